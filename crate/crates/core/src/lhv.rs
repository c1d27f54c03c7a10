//! Local hidden-variable strategies and the exact classical value of a game.
//!
//! Exhaustive enumeration over the 64 deterministic strategies is the primary
//! route; [`classical_value_lp`] solves the same maximization as a linear
//! program over mixture weights and serves as an independent check.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{wins, Answer, GameSpec, Question, Sign, PLAYERS};
use crate::lp::{Cmp, LinearProgram, Sense};
use crate::rational::{self, Rational};

/// Deterministic answer table: `answers[player][question]`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalStrategy {
    answers: [[Sign; 2]; PLAYERS],
}

impl LocalStrategy {
    pub fn new(answers: [[Sign; 2]; PLAYERS]) -> Self {
        LocalStrategy { answers }
    }

    /// Builds from per-question columns, e.g. `x = (+1,+1,+1), y = (-1,+1,+1)`.
    pub fn from_columns(x: [Sign; PLAYERS], y: [Sign; PLAYERS]) -> Self {
        LocalStrategy { answers: std::array::from_fn(|p| [x[p], y[p]]) }
    }

    pub fn constant(sign: Sign) -> Self {
        LocalStrategy { answers: [[sign; 2]; PLAYERS] }
    }

    pub fn answer(&self, player: usize, q: Question) -> Sign {
        self.answers[player][q.index()]
    }

    pub fn answers_for(&self, q: &crate::game::QuestionTriple) -> [Answer; PLAYERS] {
        std::array::from_fn(|p| self.answer(p, q.player(p)).into())
    }

    /// Index in lexicographic order of the flattened table
    /// `(p1X, p1Y, p2X, p2Y, p3X, p3Y)` with `+1` before `-1`.
    pub fn index(&self) -> usize {
        self.answers.iter().flatten().fold(0, |acc, s| (acc << 1) | usize::from(*s == Sign::Minus))
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 64, "strategy index {index} out of range");
        let sign = |k: usize| if index >> (5 - k) & 1 == 0 { Sign::Plus } else { Sign::Minus };
        LocalStrategy { answers: std::array::from_fn(|p| [sign(2 * p), sign(2 * p + 1)]) }
    }
}

#[derive(Serialize, Deserialize)]
struct StrategyColumns {
    x: [Sign; PLAYERS],
    y: [Sign; PLAYERS],
}

impl Serialize for LocalStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StrategyColumns {
            x: std::array::from_fn(|p| self.answers[p][0]),
            y: std::array::from_fn(|p| self.answers[p][1]),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocalStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = StrategyColumns::deserialize(d)?;
        Ok(LocalStrategy::from_columns(c.x, c.y))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedComponent {
    pub strategy: LocalStrategy,
    #[serde(with = "rational::as_string")]
    pub weight: Rational,
}

/// Shared randomness over deterministic strategies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy {
    pub components: Vec<MixedComponent>,
}

impl MixedStrategy {
    pub fn point(strategy: LocalStrategy) -> Self {
        MixedStrategy { components: vec![MixedComponent { strategy, weight: Rational::one() }] }
    }

    pub fn uniform(strategies: &[LocalStrategy]) -> Self {
        let w = rational::ratio(1, strategies.len() as i64);
        MixedStrategy {
            components: strategies.iter().map(|s| MixedComponent { strategy: *s, weight: w.clone() }).collect(),
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

fn check_shape(spec: &GameSpec) {
    debug_assert_eq!(spec.players(), PLAYERS);
}

/// All 2^6 deterministic strategies in lexicographic order.
pub fn enumerate_deterministic(spec: &GameSpec) -> Vec<LocalStrategy> {
    check_shape(spec);
    (0..64).map(LocalStrategy::from_index).collect()
}

pub fn strategy_win_prob(s: &LocalStrategy, spec: &GameSpec) -> Rational {
    spec.support()
        .iter()
        .filter(|e| wins(spec, &e.questions, &s.answers_for(&e.questions)).expect("triple from support"))
        .map(|e| e.weight.clone())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassicalValue {
    #[serde(with = "rational::as_string")]
    pub value: Rational,
    pub maximizers: Vec<LocalStrategy>,
}

/// Exact classical value and every maximizing deterministic strategy.
pub fn classical_value(spec: &GameSpec) -> ClassicalValue {
    let scored: Vec<(LocalStrategy, Rational)> = enumerate_deterministic(spec)
        .into_iter()
        .map(|s| {
            let v = strategy_win_prob(&s, spec);
            (s, v)
        })
        .collect();
    let value = scored.iter().map(|(_, v)| v).max().cloned().unwrap_or_else(Rational::zero);
    let maximizers = scored.into_iter().filter(|(_, v)| *v == value).map(|(s, _)| s).collect();
    ClassicalValue { value, maximizers }
}

pub fn mixed_win_prob(m: &MixedStrategy, spec: &GameSpec) -> Result<Rational> {
    m.validate()?;
    Ok(m.components.iter().map(|c| &c.weight * strategy_win_prob(&c.strategy, spec)).sum())
}

/// Optimum of `max sum_s w_s * value(s)` over the probability simplex, in floating point.
pub fn classical_value_lp(spec: &GameSpec) -> Result<f64> {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let vars: Vec<_> = enumerate_deterministic(spec)
        .iter()
        .map(|s| lp.add_var(rational::to_f64(&strategy_win_prob(s, spec)), 0.0, 1.0))
        .collect();
    lp.add_constraint(vars.iter().map(|v| (*v, 1.0)), Cmp::Eq, 1.0);
    Ok(lp.solve()?.objective)
}

/// Snaps the LP optimum to the enumerated value, failing if they disagree by more than `tol`.
pub fn cross_checked_value(spec: &GameSpec, tol: f64) -> Result<(ClassicalValue, f64)> {
    let exact = classical_value(spec);
    let lp = classical_value_lp(spec)?;
    if (lp - rational::to_f64(&exact.value)).abs() > tol {
        return Err(Error::Lp(format!(
            "LP optimum {lp} disagrees with enumeration {}",
            rational::format(&exact.value)
        )));
    }
    Ok((exact, lp))
}
