//! Local hidden-variable adversaries that exploit the loopholes of a game
//! experiment: "do not detect" instructions combined with post-selection,
//! sources that only sometimes emit a GHZ triplet, and causal channels
//! between sites.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{wins, Answer, GameSpec, Question, QuestionTriple, PLAYERS};
use crate::lhv::{classical_value, mixed_win_prob, MixedStrategy};
use crate::lp::{Cmp, LinearProgram, LpOutcome, Sense, Var};
use crate::rational::{self, Rational};
use crate::spacetime::LoopholeReport;

pub const EXTENDED_STRATEGY_COUNT: usize = 729;
const ANSWERS: [Answer; 3] = [Answer::Plus, Answer::Minus, Answer::NoDetect];

/// Deterministic instruction table that may refuse to be detected.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtendedStrategy {
    answers: [[Answer; 2]; PLAYERS],
}

impl ExtendedStrategy {
    pub fn new(answers: [[Answer; 2]; PLAYERS]) -> Self {
        ExtendedStrategy { answers }
    }

    pub fn from_columns(x: [Answer; PLAYERS], y: [Answer; PLAYERS]) -> Self {
        ExtendedStrategy { answers: std::array::from_fn(|p| [x[p], y[p]]) }
    }

    pub fn answer(&self, player: usize, q: Question) -> Answer {
        self.answers[player][q.index()]
    }

    pub fn answers_for(&self, q: &QuestionTriple) -> [Answer; PLAYERS] {
        std::array::from_fn(|p| self.answer(p, q.player(p)))
    }

    pub fn all_detected(&self, q: &QuestionTriple) -> bool {
        self.answers_for(q).iter().all(|a| a.is_detected())
    }

    /// Base-3 lexicographic index of `(p1X, p1Y, ..., p3Y)` with `+1 < -1 < NoDetect`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < EXTENDED_STRATEGY_COUNT, "extended strategy index {index} out of range");
        let digit = |k: u32| ANSWERS[index / 3usize.pow(5 - k) % 3];
        ExtendedStrategy { answers: std::array::from_fn(|p| [digit(2 * p as u32), digit(2 * p as u32 + 1)]) }
    }

    /// Never loses a trial in which every player is detected.
    pub fn fakes_certainty(&self, spec: &GameSpec) -> bool {
        spec.support().iter().all(|e| {
            !self.all_detected(&e.questions)
                || wins(spec, &e.questions, &self.answers_for(&e.questions)).expect("support")
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ExtendedColumns {
    x: [Answer; PLAYERS],
    y: [Answer; PLAYERS],
}

impl Serialize for ExtendedStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExtendedColumns {
            x: std::array::from_fn(|p| self.answers[p][0]),
            y: std::array::from_fn(|p| self.answers[p][1]),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExtendedStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = ExtendedColumns::deserialize(d)?;
        Ok(ExtendedStrategy::from_columns(c.x, c.y))
    }
}

pub fn enumerate_extended() -> Vec<ExtendedStrategy> {
    (0..EXTENDED_STRATEGY_COUNT).map(ExtendedStrategy::from_index).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleComponent {
    pub strategy: ExtendedStrategy,
    #[serde(with = "rational::as_string")]
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtendedEnsemble {
    pub components: Vec<EnsembleComponent>,
}

impl ExtendedEnsemble {
    pub fn point(strategy: ExtendedStrategy) -> Self {
        ExtendedEnsemble { components: vec![EnsembleComponent { strategy, weight: Rational::one() }] }
    }

    pub fn uniform(strategies: &[ExtendedStrategy]) -> Self {
        let w = rational::ratio(1, strategies.len() as i64);
        ExtendedEnsemble {
            components: strategies.iter().map(|s| EnsembleComponent { strategy: *s, weight: w.clone() }).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if self.components.iter().any(|c| c.weight.is_negative()) {
            return Err(Error::BadWeights("negative component weight".into()));
        }
        let total: Rational = self.components.iter().map(|c| &c.weight).sum();
        if !total.is_one() {
            return Err(Error::BadWeights(rational::format(&total)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PostselectedStats {
    /// `P(win | all detected)`; `None` when no trial survives post-selection.
    #[serde(serialize_with = "optional_rational")]
    pub conditional_win: Option<Rational>,
    #[serde(serialize_with = "rational_array")]
    pub per_player_detection: [Rational; PLAYERS],
    #[serde(with = "rational::as_string")]
    pub all_detected_rate: Rational,
}

impl PostselectedStats {
    pub fn conditional_win(&self) -> Result<&Rational> {
        self.conditional_win.as_ref().ok_or(Error::NoSurvivingTrials)
    }
}

fn optional_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&rational::format(r)),
        None => s.serialize_none(),
    }
}

fn rational_array<S: serde::Serializer>(rs: &[Rational; PLAYERS], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(rational::format))
}

/// Exact post-selected statistics of an ensemble under the referee's distribution.
pub fn postselected_stats(e: &ExtendedEnsemble, spec: &GameSpec) -> Result<PostselectedStats> {
    e.validate()?;
    let mut detection: [Rational; PLAYERS] = std::array::from_fn(|_| Rational::zero());
    let mut all_detected = Rational::zero();
    let mut won = Rational::zero();
    for entry in spec.support() {
        for c in &e.components {
            let mass = &entry.weight * &c.weight;
            let answers = c.strategy.answers_for(&entry.questions);
            for (p, a) in answers.iter().enumerate() {
                if a.is_detected() {
                    detection[p] += &mass;
                }
            }
            if answers.iter().all(|a| a.is_detected()) {
                if wins(spec, &entry.questions, &answers)? {
                    won += &mass;
                }
                all_detected += mass;
            }
        }
    }
    let conditional_win = (!all_detected.is_zero()).then(|| &won / &all_detected);
    Ok(PostselectedStats { conditional_win, per_player_detection: detection, all_detected_rate: all_detected })
}

/// Detection probability of `player` when asked `q`, exactly.
pub fn detection_given_question(e: &ExtendedEnsemble, player: usize, q: Question) -> Rational {
    e.components.iter().filter(|c| c.strategy.answer(player, q).is_detected()).map(|c| c.weight.clone()).sum()
}

/// The (player, local question) pairs the referee can actually ask.
fn detection_rows(spec: &GameSpec) -> Vec<(usize, Question)> {
    let mut rows = Vec::new();
    for p in 0..PLAYERS {
        for q in Question::ALL {
            if spec.support().iter().any(|e| !e.weight.is_zero() && e.questions.player(p) == q) {
                rows.push((p, q));
            }
        }
    }
    rows
}

/// Smallest detection probability over every asked (player, question) pair.
pub fn min_detection(e: &ExtendedEnsemble, spec: &GameSpec) -> Rational {
    detection_rows(spec).into_iter().map(|(p, q)| detection_given_question(e, p, q)).min().unwrap_or_else(Rational::one)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetectionMultiplier {
    pub player: usize,
    pub question: Question,
    #[serde(with = "rational::as_string")]
    pub weight: Rational,
}

/// Convex weights on the detection constraints such that every strategy
/// that fakes certainty has weighted detection at most `bound`. Any
/// post-selecting ensemble then has some detection probability `<= bound`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InfeasibilityCertificate {
    pub multipliers: Vec<DetectionMultiplier>,
    #[serde(with = "rational::as_string")]
    pub bound: Rational,
}

impl InfeasibilityCertificate {
    /// Recomputes the bound exactly over all certainty-faking strategies.
    pub fn verify(&self, spec: &GameSpec) -> Option<Rational> {
        let total: Rational = self.multipliers.iter().map(|m| &m.weight).sum();
        if !total.is_one() || self.multipliers.iter().any(|m| m.weight.is_negative()) {
            return None;
        }
        let bound = enumerate_extended()
            .iter()
            .filter(|s| s.fakes_certainty(spec))
            .map(|s| {
                self.multipliers
                    .iter()
                    .filter(|m| s.answer(m.player, m.question).is_detected())
                    .map(|m| m.weight.clone())
                    .sum::<Rational>()
            })
            .max()?;
        (bound <= self.bound).then_some(bound)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    pub eta_star: f64,
    pub witness: ExtendedEnsemble,
    pub tolerance: f64,
    pub feasible_at: f64,
    #[serde(with = "rational::as_string")]
    pub witness_min_detection: Rational,
    pub infeasible_at: f64,
    pub certificate: InfeasibilityCertificate,
    pub bisection_steps: usize,
}

/// LP feasibility for a uniform detection floor `eta`; the LP maximizes the
/// all-detected rate so that a feasible point also has surviving trials.
struct ThresholdLp<'a> {
    spec: &'a GameSpec,
    strategies: Vec<ExtendedStrategy>,
    admissible: Vec<bool>,
    rows: Vec<(usize, Question)>,
}

const LP_TOL: f64 = 1e-9;

impl<'a> ThresholdLp<'a> {
    fn new(spec: &'a GameSpec) -> Self {
        let strategies = enumerate_extended();
        let admissible = strategies.iter().map(|s| s.fakes_certainty(spec)).collect();
        ThresholdLp { spec, strategies, admissible, rows: detection_rows(spec) }
    }

    fn solve(&self, eta: f64) -> Result<Option<Vec<f64>>> {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let vars: Vec<Var> = self
            .strategies
            .iter()
            .zip(&self.admissible)
            .map(|(s, ok)| {
                let survive: f64 = self
                    .spec
                    .support()
                    .iter()
                    .filter(|e| s.all_detected(&e.questions))
                    .map(|e| rational::to_f64(&e.weight))
                    .sum();
                // losing mass under full detection must vanish
                lp.add_var(survive, 0.0, if *ok { 1.0 } else { 0.0 })
            })
            .collect();
        lp.add_constraint(vars.iter().map(|v| (*v, 1.0)), Cmp::Eq, 1.0);
        for (p, q) in &self.rows {
            let terms = self
                .strategies
                .iter()
                .zip(&vars)
                .filter(|(s, _)| s.answer(*p, *q).is_detected())
                .map(|(_, v)| (*v, 1.0));
            lp.add_constraint(terms, Cmp::Ge, eta);
        }
        match lp.try_solve()? {
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Optimal(sol) if sol.objective <= LP_TOL => Ok(None),
            LpOutcome::Optimal(sol) => Ok(Some(sol.values)),
        }
    }

    fn rationalize(&self, weights: &[f64]) -> Option<ExtendedEnsemble> {
        let snapped: Vec<(ExtendedStrategy, Rational)> = self
            .strategies
            .iter()
            .zip(weights)
            .zip(&self.admissible)
            .filter(|(_, ok)| **ok)
            .map(|((s, w), _)| (*s, rational::approximate(w.max(0.0), 1 << 40)))
            .filter(|(_, w)| !w.is_zero())
            .collect();
        let total: Rational = snapped.iter().map(|(_, w)| w).sum();
        if total.is_zero() {
            return None;
        }
        Some(ExtendedEnsemble {
            components: snapped
                .into_iter()
                .map(|(strategy, w)| EnsembleComponent { strategy, weight: w / &total })
                .collect(),
        })
    }

    /// Dual LP: convex multipliers minimizing the best weighted detection.
    fn certificate(&self) -> Result<InfeasibilityCertificate> {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let t = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let ys: Vec<Var> = self.rows.iter().map(|_| lp.add_var(0.0, 0.0, 1.0)).collect();
        lp.add_constraint(ys.iter().map(|y| (*y, 1.0)), Cmp::Eq, 1.0);
        for (s, _) in self.strategies.iter().zip(&self.admissible).filter(|(_, ok)| **ok) {
            let terms = self
                .rows
                .iter()
                .zip(&ys)
                .filter(|((p, q), _)| s.answer(*p, *q).is_detected())
                .map(|(_, y)| (*y, 1.0))
                .chain([(t, -1.0)]);
            lp.add_constraint(terms, Cmp::Le, 0.0);
        }
        let sol = lp.solve()?;
        let raw: Vec<Rational> = ys.iter().map(|y| rational::approximate(sol.value(*y).max(0.0), 1 << 20)).collect();
        let total: Rational = raw.iter().sum();
        let multipliers: Vec<DetectionMultiplier> = self
            .rows
            .iter()
            .zip(raw)
            .map(|((player, question), w)| DetectionMultiplier {
                player: *player,
                question: *question,
                weight: w / &total,
            })
            .collect();
        let mut cert = InfeasibilityCertificate { multipliers, bound: Rational::one() };
        cert.bound = cert.verify(self.spec).ok_or_else(|| Error::Lp("dual certificate failed verification".into()))?;
        Ok(cert)
    }
}

/// Largest uniform detection floor compatible with faking a certain win
/// under post-selection, found by bisection over LP feasibility.
pub fn detection_threshold(spec: &GameSpec, tol: f64) -> Result<ThresholdReport> {
    if !spec.is_ghz_shaped() {
        return Err(Error::UnsupportedShape("detection threshold needs the four GHZ question triples".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let lp = ThresholdLp::new(spec);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = lp.solve(lo)?.ok_or_else(|| Error::Lp("infeasible at eta = 0".into()))?;
    if let Some(w) = lp.solve(hi)? {
        // only possible when the classical value is already 1
        lo = hi;
        best = w;
    }
    let mut steps = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match lp.solve(mid)? {
            Some(w) => {
                lo = mid;
                best = w;
            }
            None => hi = mid,
        }
        steps += 1;
        assert!(lo <= hi, "feasibility is monotone in eta");
    }
    let eta_star = if lo == hi { lo } else { 0.5 * (lo + hi) };
    let feasible_at = eta_star - tol;
    let infeasible_at = eta_star + tol;

    let witness = lp.rationalize(&best).ok_or_else(|| Error::Lp("empty witness".into()))?;
    let stats = postselected_stats(&witness, spec)?;
    let witness_min_detection = min_detection(&witness, spec);
    let floor = rational::from_f64(feasible_at).expect("finite");
    if stats.conditional_win != Some(Rational::one()) || witness_min_detection < floor {
        return Err(Error::Lp("witness failed exact re-verification".into()));
    }

    let certificate = lp.certificate()?;
    let ceiling = rational::from_f64(infeasible_at).expect("finite");
    if infeasible_at <= 1.0 && certificate.bound >= ceiling {
        return Err(Error::Lp(format!(
            "cannot certify infeasibility at {infeasible_at}: certificate bound {}",
            rational::format(&certificate.bound)
        )));
    }
    Ok(ThresholdReport {
        eta_star,
        witness,
        tolerance: tol,
        feasible_at,
        witness_min_detection,
        infeasible_at,
        certificate,
        bisection_steps: steps,
    })
}

/// LP feasibility of a detection floor, exposed for testing and sweeps.
pub fn threshold_feasible(spec: &GameSpec, eta: f64) -> Result<bool> {
    Ok(ThresholdLp::new(spec).solve(eta)?.is_some())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceModel {
    #[serde(with = "rational::as_string")]
    pub emission_probability: Rational,
    pub fallback: MixedStrategy,
}

/// Ideal quantum play on emitted triplets, the fallback LHV strategy otherwise.
pub fn source_win_prob(m: &SourceModel, spec: &GameSpec) -> Result<Rational> {
    let p = &m.emission_probability;
    if !rational::is_probability(p) {
        return Err(Error::Domain(format!("emission probability {} outside [0,1]", rational::format(p))));
    }
    Ok(p + (Rational::one() - p) * mixed_win_prob(&m.fallback, spec)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationModel {
    pub channels: LoopholeReport,
}

impl CommunicationModel {
    pub fn any_open(&self) -> bool {
        self.channels.any_channel_open()
    }
}

/// Any open channel lets the adversary reproduce quantum statistics outright.
pub fn communication_win_prob(c: &CommunicationModel, spec: &GameSpec) -> Rational {
    if c.any_open() {
        Rational::one()
    } else {
        classical_value(spec).value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_ghz_game, Sign};
    use crate::lhv::LocalStrategy;
    use crate::spacetime::{audit, make_preset};
    use proptest::prelude::*;
    use Answer::{Minus as M, NoDetect as N, Plus as P};

    /// First certainty-faking strategy whose only refusal is `(player, q)`.
    fn single_nodetect(player: usize, q: Question) -> ExtendedStrategy {
        let g = make_ghz_game();
        enumerate_extended()
            .into_iter()
            .find(|s| {
                s.fakes_certainty(&g)
                    && (0..3).all(|p| {
                        Question::ALL.iter().all(|r| s.answer(p, *r).is_detected() != (p == player && *r == q))
                    })
            })
            .unwrap()
    }

    #[test]
    fn enumeration_covers_all_tables() {
        let all = enumerate_extended();
        assert_eq!(all.len(), 729);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all[0], ExtendedStrategy::new([[P; 2]; 3]));
        assert_eq!(all[728], ExtendedStrategy::new([[N; 2]; 3]));
    }

    #[test]
    fn always_detecting_point_mass_reduces_to_lhv() {
        let g = make_ghz_game();
        let s = postselected_stats(&ExtendedEnsemble::point(ExtendedStrategy::new([[P; 2]; 3])), &g).unwrap();
        assert_eq!(s.conditional_win, Some(rational::ratio(3, 4)));
        assert_eq!(s.per_player_detection, std::array::from_fn(|_| rational::int(1)));
        assert_eq!(s.all_detected_rate, rational::int(1));
    }

    #[test]
    fn player_one_hides_from_x() {
        let g = make_ghz_game();
        let s = postselected_stats(&ExtendedEnsemble::point(single_nodetect(0, Question::X)), &g).unwrap();
        assert_eq!(s.conditional_win, Some(rational::int(1)));
        assert_eq!(s.per_player_detection[0], rational::ratio(1, 2));
        assert_eq!(s.all_detected_rate, rational::ratio(1, 2));
    }

    #[test]
    fn empty_and_silent_ensembles() {
        let g = make_ghz_game();
        assert!(matches!(postselected_stats(&ExtendedEnsemble { components: vec![] }, &g), Err(Error::EmptyEnsemble)));
        let silent = postselected_stats(&ExtendedEnsemble::point(ExtendedStrategy::new([[N; 2]; 3])), &g).unwrap();
        assert_eq!(silent.conditional_win, None);
        assert!(matches!(silent.conditional_win(), Err(Error::NoSurvivingTrials)));
    }

    #[test]
    fn never_detecting_free_strategies_obey_classical_bound() {
        let g = make_ghz_game();
        let best = classical_value(&g).value;
        for i in 0..64 {
            let l = LocalStrategy::from_index(i);
            let e = ExtendedStrategy::new(std::array::from_fn(|p| {
                [l.answer(p, Question::X).into(), l.answer(p, Question::Y).into()]
            }));
            let s = postselected_stats(&ExtendedEnsemble::point(e), &g).unwrap();
            assert!(s.conditional_win.unwrap() <= best);
        }
    }

    #[test]
    fn postselection_never_hurts() {
        let g = make_ghz_game();
        let best_extended = enumerate_extended()
            .into_iter()
            .filter_map(|s| postselected_stats(&ExtendedEnsemble::point(s), &g).unwrap().conditional_win)
            .max()
            .unwrap();
        assert!(best_extended >= classical_value(&g).value);
        assert_eq!(best_extended, rational::int(1));
    }

    #[test]
    fn feasibility_endpoints() {
        let g = make_ghz_game();
        assert!(!threshold_feasible(&g, 1.0).unwrap());
        assert!(threshold_feasible(&g, 0.5).unwrap());
        // symmetrized witness for 1/2: each player in turn hides from X
        let sym = ExtendedEnsemble::uniform(&[
            single_nodetect(0, Question::X),
            single_nodetect(1, Question::X),
            single_nodetect(2, Question::X),
        ]);
        let s = postselected_stats(&sym, &g).unwrap();
        assert_eq!(s.conditional_win, Some(rational::int(1)));
        assert!(min_detection(&sym, &g) >= rational::ratio(1, 2));
    }

    /// Every certainty-faking strategy must refuse at least one of its six
    /// entries, so averaging bounds the floor by 5/6; the uniform mixture of
    /// single-refusal strategies attains it.
    #[test]
    fn five_sixths_oracle() {
        let g = make_ghz_game();
        let admissible: Vec<_> = enumerate_extended().into_iter().filter(|s| s.fakes_certainty(&g)).collect();
        let max_detected = admissible
            .iter()
            .map(|s| (0..3).flat_map(|p| Question::ALL.map(|q| s.answer(p, q).is_detected())).filter(|d| *d).count())
            .max()
            .unwrap();
        assert_eq!(max_detected, 5);
        let six: Vec<_> = (0..3).flat_map(|p| Question::ALL.map(|q| single_nodetect(p, q))).collect();
        assert!(six.iter().all(|s| s.fakes_certainty(&g)));
        let mix = ExtendedEnsemble::uniform(&six);
        assert_eq!(min_detection(&mix, &g), rational::ratio(5, 6));
        assert_eq!(postselected_stats(&mix, &g).unwrap().conditional_win, Some(rational::int(1)));

        let report = detection_threshold(&g, 1e-6).unwrap();
        assert!((report.eta_star - 5.0 / 6.0).abs() <= 1e-6);
    }

    /// Brute force over two-component mixtures with weights in sixths never exceeds the bisection result.
    #[test]
    fn small_mixture_search_is_consistent() {
        let g = make_ghz_game();
        let eta = detection_threshold(&g, 1e-6).unwrap().eta_star;
        let profiles: Vec<([i64; 6], bool)> = enumerate_extended()
            .into_iter()
            .filter(|s| s.fakes_certainty(&g))
            .map(|s| {
                let det = std::array::from_fn(|k| i64::from(s.answer(k / 2, Question::ALL[k % 2]).is_detected()));
                let survives = g.support().iter().any(|e| s.all_detected(&e.questions));
                (det, survives)
            })
            .collect();
        let mut best = 0;
        for (i, (a, sa)) in profiles.iter().enumerate() {
            for (b, sb) in &profiles[i..] {
                for k in 0..=6 {
                    if !((k > 0 && *sa) || (k < 6 && *sb)) {
                        continue;
                    }
                    let floor = (0..6).map(|r| k * a[r] + (6 - k) * b[r]).min().unwrap();
                    best = best.max(floor);
                }
            }
        }
        assert!(best as f64 / 6.0 <= eta + 1e-6);
        assert_eq!(best, 3);
    }

    #[test]
    fn threshold_report_is_self_certifying() {
        let g = make_ghz_game();
        let r = detection_threshold(&g, 1e-6).unwrap();
        assert!(threshold_feasible(&g, r.feasible_at).unwrap());
        assert!(!threshold_feasible(&g, r.infeasible_at).unwrap());
        assert!(r.witness_min_detection >= rational::from_f64(r.feasible_at).unwrap());
        assert_eq!(r.certificate.verify(&g), Some(r.certificate.bound.clone()));
        assert!(r.certificate.bound < rational::from_f64(r.infeasible_at).unwrap());
        assert_eq!(postselected_stats(&r.witness, &g).unwrap().conditional_win, Some(rational::int(1)));
    }

    #[test]
    fn threshold_rejects_bad_inputs() {
        let g = make_ghz_game();
        assert!(matches!(detection_threshold(&g, 0.0), Err(Error::Domain(_))));
        assert!(matches!(detection_threshold(&g, -1.0), Err(Error::Domain(_))));
        let single = GameSpec::new(vec![crate::game::SupportEntry {
            questions: "XXX".parse().unwrap(),
            weight: rational::int(1),
            target: Sign::Minus,
        }])
        .unwrap();
        assert!(matches!(detection_threshold(&single, 1e-3), Err(Error::UnsupportedShape(_))));
    }

    #[test]
    fn source_model_values() {
        let g = make_ghz_game();
        let fallback = MixedStrategy::point(LocalStrategy::constant(Sign::Plus));
        let at = |p: Rational| {
            source_win_prob(&SourceModel { emission_probability: p, fallback: fallback.clone() }, &g).unwrap()
        };
        assert_eq!(at(rational::int(0)), rational::ratio(3, 4));
        assert_eq!(at(rational::ratio(1, 2)), rational::ratio(7, 8));
        assert_eq!(at(rational::int(1)), rational::int(1));
        assert!(source_win_prob(&SourceModel { emission_probability: rational::ratio(3, 2), fallback }, &g).is_err());
    }

    #[test]
    fn communication_model_values() {
        let g = make_ghz_game();
        let value = |preset| {
            communication_win_prob(&CommunicationModel { channels: audit(&make_preset(preset).unwrap()).unwrap() }, &g)
        };
        assert_eq!(value("rowe"), rational::int(1));
        assert_eq!(value("weihs"), rational::int(1));
        assert_eq!(value("galaxy"), rational::ratio(3, 4));
        assert_eq!(value("ideal"), rational::ratio(3, 4));
    }

    #[test]
    fn extended_json() {
        let s = ExtendedStrategy::from_columns([N, P, P], [P, M, P]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"x":["NoDetect",1,1],"y":[1,-1,1]}"#);
        assert_eq!(serde_json::from_str::<ExtendedStrategy>(&text).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn source_value_is_affine_and_below_one(num in 0i64..=100) {
            let g = make_ghz_game();
            let p = rational::ratio(num, 100);
            let fallback = MixedStrategy::point(LocalStrategy::constant(Sign::Plus));
            let v = source_win_prob(&SourceModel { emission_probability: p.clone(), fallback }, &g).unwrap();
            prop_assert_eq!(&v, &((rational::int(3) + &p) / rational::int(4)));
            prop_assert_eq!(v == rational::int(1), num == 100);
        }

        #[test]
        fn feasibility_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let g = make_ghz_game();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if threshold_feasible(&g, hi).unwrap() {
                prop_assert!(threshold_feasible(&g, lo).unwrap());
            }
        }
    }
}
