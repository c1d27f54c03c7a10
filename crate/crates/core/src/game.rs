//! Rules of the three-player GHZ game and small generalizations of it.
//!
//! A [`GameSpec`] lists the allowed question triples, each with an exact
//! rational weight (the referee's distribution) and the parity the product of
//! the three answers must hit.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub const PLAYERS: usize = 3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Question {
    X,
    Y,
}

impl Question {
    pub const ALL: [Question; 2] = [Question::X, Question::Y];

    pub fn index(self) -> usize {
        match self {
            Question::X => 0,
            Question::Y => 1,
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'X' | 'x' => Some(Question::X),
            'Y' | 'y' => Some(Question::Y),
            _ => None,
        }
    }
}

/// A definite ±1 answer.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn product(signs: impl IntoIterator<Item = Sign>) -> Sign {
        signs.into_iter().fold(Sign::Plus, |acc, s| if s == Sign::Minus { acc.flip() } else { acc })
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Sign::from_value(v).ok_or_else(|| serde::de::Error::custom(format!("expected 1 or -1, got {v}")))
    }
}

/// A player's reply. `NoDetect` only occurs in loophole models.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Plus,
    Minus,
    NoDetect,
}

impl Answer {
    pub fn sign(self) -> Option<Sign> {
        match self {
            Answer::Plus => Some(Sign::Plus),
            Answer::Minus => Some(Sign::Minus),
            Answer::NoDetect => None,
        }
    }

    pub fn is_detected(self) -> bool {
        self != Answer::NoDetect
    }
}

impl From<Sign> for Answer {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Plus => Answer::Plus,
            Sign::Minus => Answer::Minus,
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.sign() {
            Some(sign) => s.serialize_i8(sign.value()),
            None => s.serialize_str("NoDetect"),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Sign::from_value(v)
                .map(Answer::from)
                .ok_or_else(|| serde::de::Error::custom(format!("expected 1, -1 or \"NoDetect\", got {v}"))),
            Raw::Text(t) if t == "NoDetect" || t == "0" => Ok(Answer::NoDetect),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unknown answer {t:?}"))),
        }
    }
}

/// One question per player, ordered by player index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuestionTriple(pub [Question; PLAYERS]);

impl QuestionTriple {
    pub fn new(q1: Question, q2: Question, q3: Question) -> Self {
        QuestionTriple([q1, q2, q3])
    }

    pub fn player(&self, i: usize) -> Question {
        self.0[i]
    }
}

impl fmt::Display for QuestionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in self.0 {
            write!(f, "{q:?}")?;
        }
        Ok(())
    }
}

impl FromStr for QuestionTriple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let qs: Vec<Question> = s
            .chars()
            .map(Question::from_char)
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidGame(format!("question triple {s:?} must use only X and Y")))?;
        let qs: [Question; PLAYERS] = qs
            .try_into()
            .map_err(|_| Error::InvalidGame(format!("question triple {s:?} must have {PLAYERS} letters")))?;
        Ok(QuestionTriple(qs))
    }
}

impl Serialize for QuestionTriple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QuestionTriple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub questions: QuestionTriple,
    #[serde(with = "rational::as_string")]
    pub weight: Rational,
    pub target: Sign,
}

/// Validated game rules. Construct through [`GameSpec::new`] or deserialization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameSpec {
    players: usize,
    support: Vec<SupportEntry>,
}

impl GameSpec {
    pub fn new(support: Vec<SupportEntry>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidGame("support is empty".into()));
        }
        let mut seen = HashSet::new();
        for entry in &support {
            if !seen.insert(entry.questions) {
                return Err(Error::InvalidGame(format!("duplicate triple {}", entry.questions)));
            }
            if entry.weight.is_negative() {
                return Err(Error::BadWeights(format!("negative weight on {}", entry.questions)));
            }
        }
        let total: Rational = support.iter().map(|e| &e.weight).sum();
        if !total.is_one() {
            return Err(Error::BadWeights(rational::format(&total)));
        }
        Ok(GameSpec { players: PLAYERS, support })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn support(&self) -> &[SupportEntry] {
        &self.support
    }

    pub fn entry(&self, q: &QuestionTriple) -> Option<&SupportEntry> {
        self.support.iter().find(|e| e.questions == *q)
    }

    /// True when the support and targets are those of the canonical GHZ game
    /// (weights may differ but must all be positive).
    pub fn is_ghz_shaped(&self) -> bool {
        let canonical = make_ghz_game();
        self.support.len() == canonical.support.len()
            && canonical
                .support
                .iter()
                .all(|c| self.entry(&c.questions).is_some_and(|e| e.target == c.target && !e.weight.is_zero()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl<'de> Deserialize<'de> for GameSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            players: usize,
            support: Vec<SupportEntry>,
        }
        let raw = Raw::deserialize(d)?;
        if raw.players != PLAYERS {
            return Err(serde::de::Error::custom(format!(
                "only {PLAYERS}-player games are supported, got {}",
                raw.players
            )));
        }
        GameSpec::new(raw.support).map_err(serde::de::Error::custom)
    }
}

/// The canonical game: XXX must multiply to -1; XYY, YXY, YYX to +1; uniform weights.
pub fn make_ghz_game() -> GameSpec {
    use Question::{X, Y};
    let quarter = rational::ratio(1, 4);
    let entry =
        |q: [Question; 3], target| SupportEntry { questions: QuestionTriple(q), weight: quarter.clone(), target };
    GameSpec::new(vec![
        entry([X, X, X], Sign::Minus),
        entry([X, Y, Y], Sign::Plus),
        entry([Y, X, Y], Sign::Plus),
        entry([Y, Y, X], Sign::Plus),
    ])
    .expect("canonical game is valid")
}

/// Referee's verdict. Any `NoDetect` loses.
pub fn wins(spec: &GameSpec, q: &QuestionTriple, answers: &[Answer; PLAYERS]) -> Result<bool> {
    let entry = spec.entry(q).ok_or_else(|| Error::NotInSupport(q.to_string()))?;
    let signs: Option<Vec<Sign>> = answers.iter().map(|a| a.sign()).collect();
    Ok(signs.is_some_and(|s| Sign::product(s) == entry.target))
}

/// Draws a triple with probability equal to its weight.
pub fn sample_question<R: Rng + ?Sized>(spec: &GameSpec, rng: &mut R) -> QuestionTriple {
    QuestionSampler::new(spec).sample(rng)
}

/// Cumulative table over the support, built once for repeated draws.
#[derive(Clone, Debug)]
pub struct QuestionSampler {
    cumulative: Vec<(QuestionTriple, f64)>,
}

impl QuestionSampler {
    pub fn new(spec: &GameSpec) -> Self {
        let mut acc = 0.0;
        let cumulative = spec
            .support
            .iter()
            .filter(|e| !e.weight.is_zero())
            .map(|e| {
                acc += rational::to_f64(&e.weight);
                (e.questions, acc)
            })
            .collect();
        QuestionSampler { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> QuestionTriple {
        let u: f64 = rng.random();
        // the running sum can land a hair below 1.0
        let last = self.cumulative.last().expect("validated spec has positive total weight");
        self.cumulative.iter().find(|(_, c)| u < *c).unwrap_or(last).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Question::{X, Y};

    const P: Answer = Answer::Plus;
    const M: Answer = Answer::Minus;

    fn t(s: &str) -> QuestionTriple {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_support() {
        let g = make_ghz_game();
        assert_eq!(g.entry(&t("XXX")).unwrap().target, Sign::Minus);
        for q in ["XYY", "YXY", "YYX"] {
            let e = g.entry(&t(q)).unwrap();
            assert_eq!(e.target, Sign::Plus);
            assert_eq!(e.weight, rational::ratio(1, 4));
        }
        assert!(g.entry(&t("YYY")).is_none());
        assert!(g.is_ghz_shaped());
    }

    #[test]
    fn win_predicate_examples() {
        let g = make_ghz_game();
        assert!(wins(&g, &t("XXX"), &[P, P, M]).unwrap());
        assert!(wins(&g, &t("XYY"), &[P, P, P]).unwrap());
        assert!(!wins(&g, &t("XXX"), &[P, P, P]).unwrap());
        assert!(!wins(&g, &t("XYY"), &[P, Answer::NoDetect, P]).unwrap());
        assert!(matches!(wins(&g, &t("YYY"), &[P, P, P]), Err(Error::NotInSupport(_))));
    }

    #[test]
    fn parity_splits_the_answer_cube() {
        let g = make_ghz_game();
        for e in g.support() {
            let mut winners = 0;
            for bits in 0..8u8 {
                let a = [0, 1, 2].map(|i| if bits >> i & 1 == 0 { P } else { M });
                winners += wins(&g, &e.questions, &a).unwrap() as u32;
            }
            assert_eq!(winners, 4, "{}", e.questions);
        }
    }

    #[test]
    fn rejects_bad_weights_and_duplicates() {
        let mk = |q: &str, w: Rational| SupportEntry { questions: t(q), weight: w, target: Sign::Plus };
        assert!(matches!(GameSpec::new(vec![mk("XXX", rational::ratio(9, 10))]), Err(Error::BadWeights(_))));
        assert!(matches!(
            GameSpec::new(vec![mk("XXX", rational::ratio(1, 2)), mk("XXX", rational::ratio(1, 2))]),
            Err(Error::InvalidGame(_))
        ));
        assert!(matches!(
            GameSpec::new(vec![mk("XXX", rational::int(2)), mk("XYY", rational::int(-1))]),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let g = make_ghz_game();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.starts_with(r#"{"players":3,"support":[{"questions":"XXX","weight":"1/4","target":-1}"#));
        assert_eq!(GameSpec::from_json(&text).unwrap(), g);
        assert!(
            GameSpec::from_json(r#"{"players":2,"support":[{"questions":"XXX","weight":"1","target":1}]}"#).is_err()
        );
        assert!(
            GameSpec::from_json(r#"{"players":3,"support":[{"questions":"XXX","weight":"0.9","target":1}]}"#).is_err()
        );
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = make_ghz_game();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| sample_question(&g, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn point_mass_always_sampled() {
        let mk = |q: &str, w: i64| SupportEntry { questions: t(q), weight: rational::int(w), target: Sign::Plus };
        let g = GameSpec::new(vec![mk("XXX", 1), mk("XYY", 0), mk("YXY", 0), mk("YYX", 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_question(&g, &mut rng) == QuestionTriple::new(X, X, X)));
    }

    #[test]
    fn uniform_frequencies_within_four_sigma() {
        let g = make_ghz_game();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_question(&g, &mut rng)).or_insert(0u32) += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        let mut chi2 = 0.0;
        for e in g.support() {
            let c = counts[&e.questions] as f64;
            assert!((c - n as f64 / 4.0).abs() < 4.0 * sigma);
            chi2 += (c - n as f64 / 4.0).powi(2) / (n as f64 / 4.0);
        }
        // df = 3
        assert!((chi2 - 3.0).abs() < 4.0 * (6.0f64).sqrt());
        assert!(counts.keys().all(|q| *q != QuestionTriple::new(Y, Y, Y)));
    }
}
