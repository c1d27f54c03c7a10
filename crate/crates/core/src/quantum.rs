//! Dense statevector backend: GHZ preparation, per-qubit Pauli X/Y
//! measurements, exact Born-rule outcome distributions and sampling.
//!
//! Qubit 0 is the most significant bit of the basis index, and corresponds to
//! player 1. Outcome bit 0 means eigenvalue +1.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Question, Sign, PLAYERS};
use crate::rational;

pub const MAX_QUBITS: usize = 16;
const NORM_TOL: f64 = 1e-12;
const DUST: f64 = 1e-14;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    #[serde(rename = "PauliX")]
    X,
    #[serde(rename = "PauliY")]
    Y,
}

impl Pauli {
    /// Eigenvectors for eigenvalues +1 and -1, in that order.
    fn eigenbasis(self) -> [[Complex64; 2]; 2] {
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let i = Complex64::new(0.0, FRAC_1_SQRT_2);
        match self {
            Pauli::X => [[r, r], [r, -r]],
            Pauli::Y => [[r, i], [r, -i]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!("{len} amplitudes is not 2^n for n >= 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitRange(n_qubits));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("state is not normalized (norm^2 = {norm})")));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} >= {dim}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitRange(n))
    }
}

/// `(|0...0> + sign |1...1>) / sqrt(2)`.
pub fn ghz_state(n: usize, sign: Sign) -> Result<StateVector> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    amplitudes[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amplitudes[dim - 1] = Complex64::new(f64::from(sign.value()) * FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { n_qubits: n, amplitudes })
}

/// Probabilities over ±1 outcome strings, indexed by outcome bits (bit set = -1).
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    n: usize,
    probs: Vec<f64>,
}

#[derive(Serialize)]
struct OutcomeEntry {
    outcome: Vec<Sign>,
    probability: f64,
}

impl Serialize for OutcomeDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|(outcome, probability)| OutcomeEntry { outcome, probability }))
    }
}

impl OutcomeDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn outcome(&self, index: usize) -> Vec<Sign> {
        decode_outcome(self.n, index)
    }

    pub fn probability(&self, outcome: &[Sign]) -> f64 {
        self.probs[encode_outcome(outcome)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<Sign>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, p)| (decode_outcome(self.n, i), *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Single-qubit marginal `[P(+1), P(-1)]`.
    pub fn marginal(&self, qubit: usize) -> [f64; 2] {
        let shift = self.n - 1 - qubit;
        let mut m = [0.0; 2];
        for (i, p) in self.probs.iter().enumerate() {
            m[(i >> shift) & 1] += p;
        }
        m
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Sign> {
        let u: f64 = rng.random::<f64>() * self.total();
        let mut cumulative = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            cumulative += p;
            last = i;
            if u < cumulative {
                return self.outcome(i);
            }
        }
        self.outcome(last)
    }
}

fn decode_outcome(n: usize, index: usize) -> Vec<Sign> {
    (0..n).map(|q| if index >> (n - 1 - q) & 1 == 0 { Sign::Plus } else { Sign::Minus }).collect()
}

fn encode_outcome(outcome: &[Sign]) -> usize {
    outcome.iter().fold(0, |acc, s| (acc << 1) | usize::from(*s == Sign::Minus))
}

/// Born-rule distribution for measuring `obs[k]` on qubit `k`.
///
/// Contracts each qubit with the bras of its eigenbasis, so entry `o` of the
/// result is the overlap of the state with the product eigenvector `|e_o>`.
pub fn joint_outcome_distribution(state: &StateVector, obs: &[Pauli]) -> Result<OutcomeDistribution> {
    let n = state.n_qubits;
    if obs.len() != n {
        return Err(Error::Dimension(format!("{} observables for {} qubits", obs.len(), n)));
    }
    let mut amps = state.amplitudes.clone();
    for (qubit, pauli) in obs.iter().enumerate() {
        let basis = pauli.eigenbasis();
        let stride = 1usize << (n - 1 - qubit);
        for base in 0..amps.len() {
            if base & stride != 0 {
                continue;
            }
            let (a0, a1) = (amps[base], amps[base | stride]);
            amps[base] = basis[0][0].conj() * a0 + basis[0][1].conj() * a1;
            amps[base | stride] = basis[1][0].conj() * a0 + basis[1][1].conj() * a1;
        }
    }
    let probs = amps
        .iter()
        .map(|a| {
            let p = a.norm_sqr();
            if p < DUST {
                0.0
            } else {
                p
            }
        })
        .collect();
    Ok(OutcomeDistribution { n, probs })
}

pub fn sample_outcomes<R: Rng + ?Sized>(state: &StateVector, obs: &[Pauli], rng: &mut R) -> Result<Vec<Sign>> {
    Ok(joint_outcome_distribution(state, obs)?.sample(rng))
}

/// Device settings: which Pauli each player measures for each question.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementAssignment {
    /// `settings[player] = [observable for X, observable for Y]`
    pub settings: [[Pauli; 2]; PLAYERS],
}

impl Default for MeasurementAssignment {
    fn default() -> Self {
        MeasurementAssignment { settings: [[Pauli::X, Pauli::Y]; PLAYERS] }
    }
}

impl MeasurementAssignment {
    pub fn observables(&self, q: &crate::game::QuestionTriple) -> [Pauli; PLAYERS] {
        std::array::from_fn(|p| self.settings[p][q.player(p).index()])
    }

    pub fn observable(&self, player: usize, q: Question) -> Pauli {
        self.settings[player][q.index()]
    }
}

/// Probability of winning with `state` and `assign`, summed over the support.
pub fn quantum_win_prob(spec: &GameSpec, state: &StateVector, assign: &MeasurementAssignment) -> Result<f64> {
    if state.n_qubits != spec.players() {
        return Err(Error::Dimension(format!("{}-qubit state for a {}-player game", state.n_qubits, spec.players())));
    }
    let mut total = 0.0;
    for entry in spec.support() {
        let dist = joint_outcome_distribution(state, &assign.observables(&entry.questions))?;
        let winning: f64 =
            dist.iter().filter(|(o, _)| Sign::product(o.iter().copied()) == entry.target).map(|(_, p)| p).sum();
        total += rational::to_f64(&entry.weight) * winning;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_ghz_game;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: dense Kronecker products and matrix-vector algebra.
    mod dense {
        use num_complex::Complex64;

        pub type Matrix = Vec<Vec<Complex64>>;

        fn c(re: f64, im: f64) -> Complex64 {
            Complex64::new(re, im)
        }

        pub fn pauli(name: char) -> Matrix {
            match name {
                'I' => vec![vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(1., 0.)]],
                'X' => vec![vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]],
                'Y' => vec![vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]],
                _ => unreachable!(),
            }
        }

        pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
            let (n, m) = (a.len(), b.len());
            let mut out = vec![vec![c(0., 0.); n * m]; n * m];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..m {
                        for l in 0..m {
                            out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                        }
                    }
                }
            }
            out
        }

        /// (I + s * P) / 2
        pub fn projector(name: char, s: f64) -> Matrix {
            let (i, p) = (pauli('I'), pauli(name));
            (0..2).map(|r| (0..2).map(|k| (i[r][k] + p[r][k] * s) * 0.5).collect()).collect()
        }

        pub fn expectation(m: &Matrix, psi: &[Complex64]) -> Complex64 {
            let mut acc = c(0., 0.);
            for i in 0..psi.len() {
                for j in 0..psi.len() {
                    acc += psi[i].conj() * m[i][j] * psi[j];
                }
            }
            acc
        }
    }

    fn oracle_prob(psi: &StateVector, names: &[char], outcome: &[f64]) -> f64 {
        let mut m = dense::projector(names[0], outcome[0]);
        for k in 1..names.len() {
            m = dense::kron(&m, &dense::projector(names[k], outcome[k]));
        }
        dense::expectation(&m, psi.amplitudes()).re
    }

    fn names(obs: &[Pauli]) -> Vec<char> {
        obs.iter().map(|p| if *p == Pauli::X { 'X' } else { 'Y' }).collect()
    }

    #[test]
    fn ghz_minus_amplitudes() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[7].re + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(a[1..7].iter().all(|z| z.norm() == 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(matches!(ghz_state(0, Sign::Plus), Err(Error::QubitRange(0))));
        assert!(matches!(ghz_state(17, Sign::Plus), Err(Error::QubitRange(17))));
    }

    #[test]
    fn xxx_expectation_on_ghz_minus() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let x = dense::pauli('X');
        let xxx = dense::kron(&dense::kron(&x, &x), &x);
        let e = dense::expectation(&xxx, s.amplitudes());
        assert!((e.re + 1.0).abs() < 1e-12 && e.im.abs() < 1e-12);
    }

    #[test]
    fn distributions_match_projector_oracle() {
        let states = [
            ghz_state(3, Sign::Minus).unwrap(),
            ghz_state(3, Sign::Plus).unwrap(),
            StateVector::basis(3, 0).unwrap(),
            StateVector::basis(3, 5).unwrap(),
        ];
        let settings = [[Pauli::X; 3], [Pauli::X, Pauli::Y, Pauli::Y], [Pauli::Y, Pauli::X, Pauli::Y], [Pauli::Y; 3]];
        for s in &states {
            for obs in &settings {
                let d = joint_outcome_distribution(s, obs).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-12);
                for (o, p) in d.iter() {
                    let signs: Vec<f64> = o.iter().map(|x| f64::from(x.value())).collect();
                    assert!((p - oracle_prob(s, &names(obs), &signs)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ghz_minus_supports_target_parities() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let xxx = joint_outcome_distribution(&s, &[Pauli::X; 3]).unwrap();
        for (o, p) in xxx.iter() {
            let expected = if Sign::product(o.clone()) == Sign::Minus { 0.25 } else { 0.0 };
            assert!((p - expected).abs() < 1e-12, "{o:?} {p}");
        }
        let xyy = joint_outcome_distribution(&s, &[Pauli::X, Pauli::Y, Pauli::Y]).unwrap();
        for (o, p) in xyy.iter() {
            let expected = if Sign::product(o.clone()) == Sign::Plus { 0.25 } else { 0.0 };
            assert!((p - expected).abs() < 1e-12);
        }
        let product = joint_outcome_distribution(&StateVector::basis(3, 0).unwrap(), &[Pauli::X; 3]).unwrap();
        assert!(product.probabilities().iter().all(|p| (p - 0.125).abs() < 1e-12));
    }

    #[test]
    fn marginals_are_unbiased_in_game_settings() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let a = MeasurementAssignment::default();
        for e in make_ghz_game().support() {
            let d = joint_outcome_distribution(&s, &a.observables(&e.questions)).unwrap();
            for q in 0..3 {
                let m = d.marginal(q);
                assert!((m[0] - 0.5).abs() < 1e-12 && (m[1] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn win_probabilities() {
        let g = make_ghz_game();
        let a = MeasurementAssignment::default();
        let minus = quantum_win_prob(&g, &ghz_state(3, Sign::Minus).unwrap(), &a).unwrap();
        let plus = quantum_win_prob(&g, &ghz_state(3, Sign::Plus).unwrap(), &a).unwrap();
        let zero = quantum_win_prob(&g, &StateVector::basis(3, 0).unwrap(), &a).unwrap();
        assert!((minus - 1.0).abs() < 1e-12);
        assert!(plus.abs() < 1e-12);
        assert!((zero - 0.5).abs() < 1e-12);
        assert!(matches!(quantum_win_prob(&g, &ghz_state(2, Sign::Minus).unwrap(), &a), Err(Error::Dimension(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        assert!(matches!(joint_outcome_distribution(&s, &[Pauli::X; 2]), Err(Error::Dimension(_))));
        assert!(StateVector::from_amplitudes(vec![Complex64::new(1.0, 0.0); 3]).is_err());
        assert!(StateVector::from_amplitudes(vec![Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn sampling_respects_support_and_seed() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| sample_outcomes(&s, &[Pauli::X; 3], &mut rng).unwrap()).collect::<Vec<_>>()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert!(a.iter().all(|o| Sign::product(o.clone()) == Sign::Minus));
    }

    #[test]
    fn empirical_frequencies_match_exact_distribution() {
        let s = ghz_state(3, Sign::Minus).unwrap();
        let obs = [Pauli::X, Pauli::Y, Pauli::Y];
        let d = joint_outcome_distribution(&s, &obs).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0u32; 8];
        for _ in 0..n {
            counts[encode_outcome(&d.sample(&mut rng))] += 1;
        }
        let mut chi2 = 0.0;
        let mut df = -1.0;
        for (i, p) in d.probabilities().iter().enumerate() {
            if *p == 0.0 {
                assert_eq!(counts[i], 0);
                continue;
            }
            let expected = n as f64 * p;
            chi2 += (counts[i] as f64 - expected).powi(2) / expected;
            df += 1.0;
        }
        assert!((chi2 - df).abs() < 4.0 * (2.0 * df).sqrt());
    }
}
