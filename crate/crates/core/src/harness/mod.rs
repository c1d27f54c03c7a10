//! Seeded Monte Carlo play of the game.
//!
//! Trial `i` draws all of its randomness from a ChaCha8 stream keyed by the
//! master seed with stream id `i`, so results do not depend on how trials are
//! split across workers.

mod stats;

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use stats::{binomial_test_geq, wilson_interval, TailProbability};

use crate::error::{Error, Result};
use crate::game::{wins, Answer, GameSpec, QuestionSampler, QuestionTriple, Sign, PLAYERS};
use crate::lhv::{classical_value, LocalStrategy, MixedStrategy};
use crate::loopholes::{communication_win_prob, CommunicationModel, ExtendedEnsemble, ExtendedStrategy};
use crate::quantum::{ghz_state, joint_outcome_distribution, MeasurementAssignment, OutcomeDistribution, StateVector};
use crate::rational::{self, Rational};
use crate::spacetime::{audit, make_preset, ExperimentTimeline};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    /// No-detection answers lose.
    #[default]
    Strict,
    /// Trials with any no-detection answer are discarded.
    Postselect,
}

/// Which shared state the quantum team holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StateSpec {
    Ghz {
        sign: Sign,
    },
    /// Computational basis state, e.g. index 0 for `|000>`.
    Basis {
        index: usize,
    },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Ghz { sign: Sign::Minus }
    }
}

impl StateSpec {
    pub fn prepare(&self, n_qubits: usize) -> Result<StateVector> {
        match self {
            StateSpec::Ghz { sign } => ghz_state(n_qubits, *sign),
            StateSpec::Basis { index } => StateVector::basis(n_qubits, *index),
        }
    }
}

/// Serializable description of how the team plays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategySpec {
    /// A deterministic table; the first optimal classical strategy when omitted.
    Lhv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strategy: Option<LocalStrategy>,
    },
    Mixed {
        components: MixedStrategy,
    },
    Quantum {
        #[serde(default)]
        state: StateSpec,
        #[serde(default)]
        assignment: MeasurementAssignment,
    },
    /// Hidden instructions that may include "do not detect".
    Extended {
        ensemble: ExtendedEnsemble,
    },
    /// Ideal GHZ play when a triplet is emitted, the fallback otherwise.
    Source {
        #[serde(with = "rational::as_string")]
        emission_probability: Rational,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<MixedStrategy>,
    },
    /// Reproduces quantum statistics whenever the timeline leaves a channel open.
    Communication {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeline: Option<ExperimentTimeline>,
    },
}

impl StrategySpec {
    pub fn best_classical() -> Self {
        StrategySpec::Lhv { strategy: None }
    }

    pub fn ideal_quantum() -> Self {
        StrategySpec::Quantum { state: StateSpec::default(), assignment: MeasurementAssignment::default() }
    }
}

/// Cumulative-weight table for drawing shared randomness.
#[derive(Clone, Debug)]
struct Mixture<T> {
    items: Vec<(T, f64)>,
}

impl<T: Copy> Mixture<T> {
    fn new(items: impl IntoIterator<Item = (T, Rational)>) -> Self {
        let mut acc = 0.0;
        let items = items
            .into_iter()
            .filter(|(_, w)| *w != Rational::from_integer(0.into()))
            .map(|(t, w)| {
                acc += rational::to_f64(&w);
                (t, acc)
            })
            .collect();
        Mixture { items }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let last = self.items.last().expect("validated mixture is nonempty");
        let u = rng.random::<f64>() * last.1;
        self.items.iter().find(|(_, c)| u < *c).unwrap_or(last).0
    }
}

struct QuantumPlayer {
    dists: HashMap<QuestionTriple, OutcomeDistribution>,
}

impl QuantumPlayer {
    fn new(spec: &GameSpec, state: &StateVector, assignment: &MeasurementAssignment) -> Result<Self> {
        if state.n_qubits() != spec.players() {
            return Err(Error::Dimension(format!(
                "{}-qubit state for a {}-player game",
                state.n_qubits(),
                spec.players()
            )));
        }
        let dists = spec
            .support()
            .iter()
            .map(|e| Ok((e.questions, joint_outcome_distribution(state, &assignment.observables(&e.questions))?)))
            .collect::<Result<_>>()?;
        Ok(QuantumPlayer { dists })
    }

    fn ideal(spec: &GameSpec) -> Result<Self> {
        QuantumPlayer::new(spec, &ghz_state(PLAYERS, Sign::Minus)?, &MeasurementAssignment::default())
    }

    fn play<R: Rng + ?Sized>(&self, q: &QuestionTriple, rng: &mut R) -> [Answer; PLAYERS] {
        let outcome = self.dists[q].sample(rng);
        std::array::from_fn(|p| outcome[p].into())
    }
}

enum Player {
    Mixed(Mixture<LocalStrategy>),
    Quantum(QuantumPlayer),
    Extended(Mixture<ExtendedStrategy>),
    Source { emission: f64, quantum: QuantumPlayer, fallback: Mixture<LocalStrategy> },
}

impl Player {
    fn compile(spec: &GameSpec, strategy: &StrategySpec) -> Result<Self> {
        let mixed = |m: &MixedStrategy| -> Result<Mixture<LocalStrategy>> {
            m.validate()?;
            Ok(Mixture::new(m.components.iter().map(|c| (c.strategy, c.weight.clone()))))
        };
        let best = || MixedStrategy::point(classical_value(spec).maximizers[0]);
        Ok(match strategy {
            StrategySpec::Lhv { strategy } => Player::Mixed(mixed(&strategy.map_or_else(best, MixedStrategy::point))?),
            StrategySpec::Mixed { components } => Player::Mixed(mixed(components)?),
            StrategySpec::Quantum { state, assignment } => {
                Player::Quantum(QuantumPlayer::new(spec, &state.prepare(spec.players())?, assignment)?)
            }
            StrategySpec::Extended { ensemble } => {
                ensemble.validate()?;
                Player::Extended(Mixture::new(ensemble.components.iter().map(|c| (c.strategy, c.weight.clone()))))
            }
            StrategySpec::Source { emission_probability, fallback } => {
                if !rational::is_probability(emission_probability) {
                    return Err(Error::Domain("emission probability outside [0,1]".into()));
                }
                Player::Source {
                    emission: rational::to_f64(emission_probability),
                    quantum: QuantumPlayer::ideal(spec)?,
                    fallback: mixed(&fallback.clone().unwrap_or_else(best))?,
                }
            }
            StrategySpec::Communication { preset, timeline } => {
                let timeline = match (preset, timeline) {
                    (Some(name), None) => make_preset(name)?,
                    (None, Some(t)) => t.clone(),
                    _ => {
                        return Err(Error::Domain(
                            "communication strategy needs exactly one of preset or timeline".into(),
                        ))
                    }
                };
                let model = CommunicationModel { channels: audit(&timeline)? };
                if communication_win_prob(&model, spec) == Rational::from_integer(1.into()) && model.any_open() {
                    Player::Quantum(QuantumPlayer::ideal(spec)?)
                } else {
                    Player::Mixed(mixed(&best())?)
                }
            }
        })
    }

    fn play<R: Rng + ?Sized>(&self, q: &QuestionTriple, rng: &mut R) -> [Answer; PLAYERS] {
        match self {
            Player::Mixed(m) => m.draw(rng).answers_for(q),
            Player::Quantum(qp) => qp.play(q, rng),
            Player::Extended(m) => m.draw(rng).answers_for(q),
            Player::Source { emission, quantum, fallback } => {
                if rng.random::<f64>() < *emission {
                    quantum.play(q, rng)
                } else {
                    fallback.draw(rng).answers_for(q)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub question: QuestionTriple,
    pub answers: [Answer; PLAYERS],
    pub won: bool,
}

/// Independent random stream for one trial.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub scoring: Scoring,
    /// Worker threads; `0` uses rayon's default.
    pub workers: usize,
    pub confidence: f64,
    pub p0: Rational,
    pub keep_records: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            scoring: Scoring::Strict,
            workers: 0,
            confidence: 0.95,
            p0: rational::ratio(3, 4),
            keep_records: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub trials: u64,
    pub wins: u64,
    pub discarded: u64,
    pub win_rate: f64,
    pub interval: (f64, f64),
    pub p_value_vs_bound: f64,
    pub master_seed: u64,
    pub strategy: StrategySpec,
    pub scoring: Scoring,
    pub confidence: f64,
    #[serde(with = "rational::as_string")]
    pub p0: Rational,
    pub log10_p_value: f64,
}

#[derive(Copy, Clone, Default)]
struct Tally {
    wins: u64,
    discarded: u64,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally { wins: self.wins + other.wins, discarded: self.discarded + other.discarded }
    }
}

fn play_trial(
    spec: &GameSpec,
    referee: &QuestionSampler,
    player: &Player,
    master_seed: u64,
    index: u64,
) -> TrialRecord {
    let mut rng = trial_rng(master_seed, index);
    let question = referee.sample(&mut rng);
    let answers = player.play(&question, &mut rng);
    let won = wins(spec, &question, &answers).expect("question drawn from support");
    TrialRecord { index, question, answers, won }
}

fn tally(record: &TrialRecord, scoring: Scoring) -> Tally {
    let missing = record.answers.iter().any(|a| !a.is_detected());
    match (scoring, missing) {
        (Scoring::Postselect, true) => Tally { wins: 0, discarded: 1 },
        _ => Tally { wins: u64::from(record.won), discarded: 0 },
    }
}

/// Plays `n` trials and summarizes them; returns per-trial records when requested.
pub fn run_trials(
    spec: &GameSpec,
    strategy: &StrategySpec,
    n: u64,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<(RunReport, Option<Vec<TrialRecord>>)> {
    if n == 0 {
        return Err(Error::Domain("number of trials must be at least 1".into()));
    }
    let p0 = rational::to_f64(&opts.p0);
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Domain(format!("p0 must lie in (0,1), got {}", rational::format(&opts.p0))));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0,1), got {}", opts.confidence)));
    }
    let player = Player::compile(spec, strategy)?;
    let referee = QuestionSampler::new(spec);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let scoring = opts.scoring;
    let (total, records) = pool.install(|| {
        if opts.keep_records {
            let records: Vec<TrialRecord> =
                (0..n).into_par_iter().map(|i| play_trial(spec, &referee, &player, master_seed, i)).collect();
            let total = records.iter().fold(Tally::default(), |acc, r| acc.merge(tally(r, scoring)));
            (total, Some(records))
        } else {
            let total = (0..n)
                .into_par_iter()
                .map(|i| tally(&play_trial(spec, &referee, &player, master_seed, i), scoring))
                .reduce(Tally::default, Tally::merge);
            (total, None)
        }
    });

    let scored = n - total.discarded;
    if scored == 0 {
        return Err(Error::NoSurvivingTrials);
    }
    let win_rate = total.wins as f64 / scored as f64;
    let interval = wilson_interval(total.wins, scored, opts.confidence)?;
    let tail = binomial_test_geq(total.wins, scored, p0)?;
    let report = RunReport {
        trials: n,
        wins: total.wins,
        discarded: total.discarded,
        win_rate,
        interval,
        p_value_vs_bound: tail.p_value,
        master_seed,
        strategy: strategy.clone(),
        scoring,
        confidence: opts.confidence,
        p0: opts.p0.clone(),
        log10_p_value: tail.log10_p_value,
    };
    Ok((report, records))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    index: u64,
    q1: String,
    q2: String,
    q3: String,
    a1: &'a str,
    a2: &'a str,
    a3: &'a str,
    won: u8,
}

fn answer_text(a: Answer) -> &'static str {
    match a {
        Answer::Plus => "1",
        Answer::Minus => "-1",
        Answer::NoDetect => "NoDetect",
    }
}

/// Streams records as CSV with header `index,q1,q2,q3,a1,a2,a3,won`.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let q = r.question.0.map(|q| format!("{q:?}"));
        let [q1, q2, q3] = q;
        w.serialize(CsvRow {
            index: r.index,
            q1,
            q2,
            q3,
            a1: answer_text(r.answers[0]),
            a2: answer_text(r.answers[1]),
            a3: answer_text(r.answers[2]),
            won: u8::from(r.won),
        })
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_ghz_game;
    use crate::loopholes::EnsembleComponent;
    use crate::spacetime::make_preset;

    fn run(strategy: &StrategySpec, n: u64, seed: u64, opts: &RunOptions) -> RunReport {
        run_trials(&make_ghz_game(), strategy, n, seed, opts).unwrap().0
    }

    #[test]
    fn quantum_team_never_loses() {
        let r = run(&StrategySpec::ideal_quantum(), 100_000, 1, &RunOptions::default());
        assert_eq!(r.wins, 100_000);
        assert_eq!(r.win_rate, 1.0);
        assert_eq!(r.interval.1, 1.0);
        assert!(r.log10_p_value < -200.0);
    }

    #[test]
    fn best_classical_hovers_at_three_quarters() {
        let opts = RunOptions { confidence: 0.99, ..RunOptions::default() };
        let r = run(&StrategySpec::best_classical(), 100_000, 11, &opts);
        let (lo, hi) = wilson_interval(r.wins, r.trials, 0.99).unwrap();
        assert!(lo <= 0.75 && 0.75 <= hi, "{r:?}");
        assert!(r.interval.0 <= r.win_rate && r.win_rate <= r.interval.1);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(matches!(
            run_trials(&make_ghz_game(), &StrategySpec::ideal_quantum(), 0, 1, &RunOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let strategies = [
            StrategySpec::best_classical(),
            StrategySpec::ideal_quantum(),
            StrategySpec::Source { emission_probability: rational::ratio(1, 2), fallback: None },
        ];
        for s in &strategies {
            let one = run(s, 20_000, 5, &RunOptions { workers: 1, ..RunOptions::default() });
            let many = run(s, 20_000, 5, &RunOptions { workers: 4, ..RunOptions::default() });
            assert_eq!(one, many);
        }
    }

    #[test]
    fn records_are_ordered_and_consistent() {
        let opts = RunOptions { keep_records: true, workers: 3, ..RunOptions::default() };
        let (report, records) = run_trials(&make_ghz_game(), &StrategySpec::best_classical(), 500, 9, &opts).unwrap();
        let records = records.unwrap();
        assert!(records.iter().enumerate().all(|(i, r)| r.index == i as u64));
        assert_eq!(records.iter().filter(|r| r.won).count() as u64, report.wins);
        let g = make_ghz_game();
        assert!(records.iter().all(|r| wins(&g, &r.question, &r.answers).unwrap() == r.won));
        let mut buf = Vec::new();
        write_trials_csv(&records[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,q1,q2,q3,a1,a2,a3,won\n0,"), "{text}");
    }

    #[test]
    fn scoring_modes() {
        let hide = crate::loopholes::enumerate_extended()
            .into_iter()
            .find(|s| {
                s.fakes_certainty(&make_ghz_game())
                    && !s.answer(0, crate::game::Question::X).is_detected()
                    && (0..3).all(|p| s.answer(p, crate::game::Question::Y).is_detected())
                    && s.answer(1, crate::game::Question::X).is_detected()
                    && s.answer(2, crate::game::Question::X).is_detected()
            })
            .unwrap();
        let strategy = StrategySpec::Extended {
            ensemble: ExtendedEnsemble {
                components: vec![EnsembleComponent { strategy: hide, weight: rational::int(1) }],
            },
        };
        let strict = run(&strategy, 10_000, 3, &RunOptions::default());
        let post = run(&strategy, 10_000, 3, &RunOptions { scoring: Scoring::Postselect, ..RunOptions::default() });
        assert_eq!(strict.discarded, 0);
        assert!(strict.wins <= post.wins + post.discarded);
        assert_eq!(post.win_rate, 1.0);
        assert!(post.discarded > 4_000 && post.discarded < 6_000);

        let always = run(
            &StrategySpec::best_classical(),
            2_000,
            3,
            &RunOptions { scoring: Scoring::Postselect, ..RunOptions::default() },
        );
        assert_eq!(always.discarded, 0);
    }

    #[test]
    fn communication_strategy_follows_audit() {
        let open = StrategySpec::Communication { preset: Some("rowe".into()), timeline: None };
        let closed = StrategySpec::Communication { preset: None, timeline: Some(make_preset("galaxy").unwrap()) };
        assert_eq!(run(&open, 5_000, 2, &RunOptions::default()).win_rate, 1.0);
        let c = run(&closed, 20_000, 2, &RunOptions::default());
        assert!((c.win_rate - 0.75).abs() < 0.02);
        let both =
            StrategySpec::Communication { preset: Some("rowe".into()), timeline: Some(make_preset("rowe").unwrap()) };
        assert!(run_trials(&make_ghz_game(), &both, 10, 1, &RunOptions::default()).is_err());
    }

    #[test]
    fn strategy_json_shapes() {
        let s: StrategySpec = serde_json::from_str(r#"{"kind":"quantum","state":{"type":"ghz","sign":1}}"#).unwrap();
        assert_eq!(
            s,
            StrategySpec::Quantum {
                state: StateSpec::Ghz { sign: Sign::Plus },
                assignment: MeasurementAssignment::default()
            }
        );
        let s: StrategySpec = serde_json::from_str(r#"{"kind":"lhv"}"#).unwrap();
        assert_eq!(s, StrategySpec::best_classical());
        assert!(serde_json::from_str::<StrategySpec>(r#"{"kind":"psychic"}"#).is_err());
    }

    /// Over 200 runs of 10^4 trials the 95% interval should cover 3/4 most of the time.
    #[test]
    fn interval_coverage_sanity() {
        let g = make_ghz_game();
        let covered = (0..200u64)
            .filter(|seed| {
                let r = run_trials(&g, &StrategySpec::best_classical(), 10_000, 1_000 + seed, &RunOptions::default())
                    .unwrap()
                    .0;
                r.interval.0 <= 0.75 && 0.75 <= r.interval.1
            })
            .count();
        assert!(covered >= 180, "covered {covered}/200");
    }
}
