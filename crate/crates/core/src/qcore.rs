//! Dense n-qubit state vectors.
//!
//! Amplitudes are indexed by the computational-basis bitstring with qubit 1
//! in the most significant bit, so `|x_1 x_2 ... x_n>` lives at index
//! `sum_i x_i 2^(n-i)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Amplitude = Complex64;

/// Default cap on the number of qubits in a dense state (65536 amplitudes).
pub const DEFAULT_MAX_QUBITS: usize = 16;

/// State-level tolerance on norms and inner products.
pub const STATE_TOL: f64 = 1e-12;

/// Aggregate tolerance on sums of probabilities.
pub const AGGREGATE_TOL: f64 = 1e-10;

/// Negative probabilities down to this value are floating-point undershoot.
pub const CLAMP_SLACK: f64 = 1e-15;

/// Largest qubit count a [`BitString`] can address.
const MAX_BITS: usize = 63;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_qubits: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_qubits: DEFAULT_MAX_QUBITS }
    }
}

impl Limits {
    pub fn check(&self, n: usize) -> Result<()> {
        if n > self.max_qubits || n > MAX_BITS {
            return Err(Error::Resource(format!(
                "{n} qubits exceeds the configured maximum of {}",
                self.max_qubits.min(MAX_BITS)
            )));
        }
        Ok(())
    }
}

/// The two preparations `|psi_0>, |psi_1> = cos(theta/2)|0> +- sin(theta/2)|1>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreparationPair {
    theta: f64,
}

impl PreparationPair {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 || theta > FRAC_PI_2 {
            return Err(Error::Domain(format!(
                "theta must lie in (0, pi/2], got {theta}"
            )));
        }
        Ok(PreparationPair { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `t = tan(theta/2)`, in `(0, 1]`.
    pub fn t(&self) -> f64 {
        (self.theta / 2.0).tan()
    }

    /// `|<psi_0|psi_1>| = cos(theta)`.
    pub fn overlap(&self) -> f64 {
        self.theta.cos()
    }

    /// Pure-state trace distance `sqrt(1 - |<psi_0|psi_1>|^2) = sin(theta)`.
    pub fn trace_distance(&self) -> f64 {
        self.theta.sin()
    }

    /// Single-qubit amplitudes of `|psi_bit>`.
    pub fn amplitudes(&self, bit: bool) -> [Amplitude; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let s = if bit { -s } else { s };
        [Amplitude::new(c, 0.0), Amplitude::new(s, 0.0)]
    }
}

/// A preparation label `x` or outcome label, `n` bits with qubit 1 as the
/// most significant bit of `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n: usize,
    index: usize,
}

impl BitString {
    pub fn from_index(n: usize, index: usize) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::Domain(format!("bitstring length must be in 1..={MAX_BITS}, got {n}")));
        }
        if index >> n != 0 {
            return Err(Error::Domain(format!("index {index} does not fit in {n} bits")));
        }
        Ok(BitString { n, index })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::Domain(format!("bit values must be 0 or 1, got {b}")));
            }
            index = (index << 1) | b as usize;
        }
        Self::from_index(n, index)
    }

    /// All `2^n` bitstrings in index order.
    pub fn all(n: usize) -> Result<impl Iterator<Item = BitString>> {
        BitString::from_index(n, 0)?;
        Ok((0..1usize << n).map(move |index| BitString { n, index }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Bit for qubit `i` (0-based, qubit 1 is `i = 0`).
    pub fn bit(&self, i: usize) -> bool {
        (self.index >> (self.n - 1 - i)) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.bit(i))
    }

    pub fn weight(&self) -> u32 {
        self.index.count_ones()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    /// `diag(1, e^{i beta})` on every qubit.
    ZBeta(f64),
    /// Phase `e^{i alpha}` on `|0...0>` only.
    RAlpha(f64),
    /// Hadamard on every qubit.
    HadamardAll,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Wraps raw amplitudes, checking length, finiteness and unit norm.
    pub fn from_amplitudes(n: usize, amps: Vec<Amplitude>) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::Domain(format!("qubit count must be in 1..={MAX_BITS}, got {n}")));
        }
        let dim = 1usize << n;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amps.len() });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("state contains non-finite amplitudes".into()));
        }
        let state = StateVector { n, amps };
        let drift = (state.norm_sqr() - 1.0).abs();
        if drift > STATE_TOL {
            return Err(Error::Domain(format!("state is not normalized (|norm^2 - 1| = {drift:e})")));
        }
        Ok(state)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let x = BitString::from_index(n, index)?;
        let mut amps = vec![Amplitude::new(0.0, 0.0); 1 << n];
        amps[x.index()] = Amplitude::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    /// Sum of `|amp|^2`, accumulated sequentially so the result does not
    /// depend on scheduling.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Tensor product `self (x) other`; `self` supplies the high bits.
    pub fn kron(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n + other.n;
        if n > MAX_BITS {
            return Err(Error::Resource(format!("{n} qubits is beyond addressable size")));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector { n, amps })
    }

    pub fn apply(&mut self, gate: Gate) {
        match gate {
            Gate::ZBeta(beta) => {
                let phases: Vec<Amplitude> =
                    (0..=self.n).map(|k| Amplitude::cis(k as f64 * beta)).collect();
                for (z, a) in self.amps.iter_mut().enumerate() {
                    *a *= phases[z.count_ones() as usize];
                }
            }
            Gate::RAlpha(alpha) => {
                self.amps[0] *= Amplitude::cis(alpha);
            }
            Gate::HadamardAll => {
                walsh_hadamard(&mut self.amps);
                let scale = std::f64::consts::FRAC_1_SQRT_2.powi(self.n as i32);
                for a in self.amps.iter_mut() {
                    *a *= scale;
                }
            }
        }
    }
}

/// In-place unnormalized Walsh-Hadamard transform.
fn walsh_hadamard(v: &mut [Amplitude]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Born-rule output over the computational basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Domain("non-finite probability".into()));
            }
            if *p < 0.0 {
                if *p < -CLAMP_SLACK {
                    return Err(Error::Domain(format!("negative probability {p:e}")));
                }
                *p = 0.0;
            } else if *p > 1.0 {
                if *p > 1.0 + CLAMP_SLACK {
                    return Err(Error::Domain(format!("probability {p} exceeds 1")));
                }
                *p = 1.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > AGGREGATE_TOL {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ProbabilityVector { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Single-qubit `(|psi_0>, |psi_1>)`.
pub fn prep_states(pair: PreparationPair) -> (StateVector, StateVector) {
    let single = |bit| StateVector { n: 1, amps: pair.amplitudes(bit).to_vec() };
    (single(false), single(true))
}

/// `|Psi(x)> = |psi_{x_1}> (x) ... (x) |psi_{x_n}>` under the default qubit cap.
pub fn product_state(pair: PreparationPair, x: &BitString) -> Result<StateVector> {
    product_state_with(pair, x, &Limits::default())
}

pub fn product_state_with(pair: PreparationPair, x: &BitString, limits: &Limits) -> Result<StateVector> {
    let n = x.len();
    limits.check(n)?;
    let single = [pair.amplitudes(false), pair.amplitudes(true)];
    let amps = (0..1usize << n)
        .map(|z| {
            (0..n).fold(Amplitude::new(1.0, 0.0), |acc, i| {
                let zi = (z >> (n - 1 - i)) & 1;
                acc * single[x.bit(i) as usize][zi]
            })
        })
        .collect();
    Ok(StateVector { n, amps })
}

pub fn apply_gate(state: &StateVector, gate: Gate) -> StateVector {
    let mut out = state.clone();
    out.apply(gate);
    out
}

pub fn born_probabilities(state: &StateVector) -> ProbabilityVector {
    let probs = state.amps.iter().map(|a| a.norm_sqr()).collect();
    // Squared moduli are non-negative and the state is normalized by construction.
    ProbabilityVector::new(probs).expect("normalized state yields a probability vector")
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Amplitude> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prep_states_orthogonal_at_pi_over_two() {
        let (p0, p1) = prep_states(PreparationPair::new(FRAC_PI_2).unwrap());
        assert!(close(p0.amplitude(0).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(p0.amplitude(1).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(p1.amplitude(1).re, -FRAC_1_SQRT_2, 1e-15));
        assert!(inner_product(&p0, &p1).unwrap().norm() < 1e-15);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn prep_states_overlaps() {
        for (theta, expected) in [(FRAC_PI_4, 0.7071068), (FRAC_PI_3, 0.5), (0.3, 0.9553365)] {
            let (p0, p1) = prep_states(PreparationPair::new(theta).unwrap());
            let ip = inner_product(&p0, &p1).unwrap();
            assert!(close(ip.re, expected, 5e-8), "theta={theta}: {ip}");
            assert!(ip.im.abs() < 1e-15);
            assert!(close(p0.norm_sqr(), 1.0, 1e-15));
        }
    }

    #[test]
    fn invalid_theta_rejected() {
        for theta in [0.0, -0.1, 1.6, f64::NAN, f64::INFINITY] {
            assert!(matches!(PreparationPair::new(theta), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn product_state_plus_plus() {
        let pair = PreparationPair::new(FRAC_PI_2).unwrap();
        let s = product_state(pair, &BitString::from_bits(&[0, 0]).unwrap()).unwrap();
        for a in s.amps() {
            assert!(close(a.re, 0.5, 1e-15) && a.im == 0.0);
        }
    }

    #[test]
    fn product_state_index_convention() {
        // qubit 1 carries x_1 = 0, qubit 2 carries x_2 = 1; basis |01> is index 1.
        let pair = PreparationPair::new(FRAC_PI_3).unwrap();
        let s = product_state(pair, &BitString::from_bits(&[0, 1]).unwrap()).unwrap();
        assert!(close(s.amplitude(0b01).re, -0.4330127, 5e-8));
        assert!(close(s.amplitude(0b10).re, 0.4330127, 5e-8));
        let p = born_probabilities(&product_state(pair, &BitString::from_bits(&[0, 0]).unwrap()).unwrap());
        assert!(close(p[0], 0.5625, 1e-15));
    }

    #[test]
    fn product_state_respects_cap() {
        let pair = PreparationPair::new(0.5).unwrap();
        let x = BitString::from_index(17, 0).unwrap();
        assert!(matches!(product_state(pair, &x), Err(Error::Resource(_))));
        let limits = Limits { max_qubits: 2 };
        let x = BitString::from_index(3, 5).unwrap();
        assert!(matches!(product_state_with(pair, &x, &limits), Err(Error::Resource(_))));
    }

    #[test]
    fn gate_examples() {
        let plus = StateVector::from_amplitudes(
            1,
            vec![Amplitude::new(FRAC_1_SQRT_2, 0.0), Amplitude::new(FRAC_1_SQRT_2, 0.0)],
        )
        .unwrap();
        assert_eq!(apply_gate(&plus, Gate::RAlpha(0.0)), plus);

        let minus = apply_gate(&plus, Gate::ZBeta(PI));
        assert!(close(minus.amplitude(0).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(minus.amplitude(1).re, -FRAC_1_SQRT_2, 1e-15));
        assert!(minus.amplitude(1).im.abs() < 1e-15);

        let h = apply_gate(&StateVector::basis(3, 0).unwrap(), Gate::HadamardAll);
        for a in h.amps() {
            assert!(close(a.re, 0.3535534, 5e-8));
        }
    }

    #[test]
    fn ralpha_touches_only_all_zeros() {
        let pair = PreparationPair::new(0.7).unwrap();
        let s = product_state(pair, &BitString::from_index(3, 5).unwrap()).unwrap();
        let r = apply_gate(&s, Gate::RAlpha(1.1));
        assert_eq!(&r.amps()[1..], &s.amps()[1..]);
        assert!((r.amplitude(0) - s.amplitude(0) * Amplitude::cis(1.1)).norm() < 1e-15);
    }

    #[test]
    fn zbeta_phase_follows_popcount() {
        let s = apply_gate(&StateVector::basis(3, 0b111).unwrap(), Gate::ZBeta(0.4));
        assert!((s.amplitude(0b111) - Amplitude::cis(1.2)).norm() < 1e-15);
        let s = apply_gate(&StateVector::basis(3, 0b010).unwrap(), Gate::ZBeta(0.4));
        assert!((s.amplitude(0b010) - Amplitude::cis(0.4)).norm() < 1e-15);
    }

    #[test]
    fn born_examples() {
        let p = born_probabilities(&StateVector::basis(2, 0).unwrap());
        assert_eq!(p.probs(), &[1.0, 0.0, 0.0, 0.0]);
        let r = FRAC_1_SQRT_2;
        let z = Amplitude::new(0.0, 0.0);
        let bell = StateVector::from_amplitudes(2, vec![z, Amplitude::new(r, 0.0), Amplitude::new(r, 0.0), z]).unwrap();
        let p = born_probabilities(&bell);
        assert!(close(p[1], 0.5, 1e-15) && close(p[2], 0.5, 1e-15) && p[0] == 0.0 && p[3] == 0.0);
    }

    #[test]
    fn xi1_orthogonal_to_zero_zero() {
        let r = FRAC_1_SQRT_2;
        let z = Amplitude::new(0.0, 0.0);
        let xi1 = StateVector::from_amplitudes(2, vec![z, Amplitude::new(r, 0.0), Amplitude::new(r, 0.0), z]).unwrap();
        let zz = StateVector::basis(2, 0).unwrap();
        assert_eq!(inner_product(&xi1, &zz).unwrap(), z);
        assert!(close(inner_product(&xi1, &xi1).unwrap().re, 1.0, 1e-15));
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let a = StateVector::basis(1, 0).unwrap();
        let b = StateVector::basis(2, 0).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn probability_vector_clamps_undershoot() {
        let p = ProbabilityVector::new(vec![-1e-16, 1.0]).unwrap();
        assert_eq!(p[0], 0.0);
        assert!(ProbabilityVector::new(vec![-1e-10, 1.0 + 1e-10]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn from_amplitudes_validates() {
        let z = Amplitude::new(0.0, 0.0);
        assert!(StateVector::from_amplitudes(1, vec![Amplitude::new(1.0, 0.0), Amplitude::new(0.1, 0.0)]).is_err());
        assert!(StateVector::from_amplitudes(1, vec![Amplitude::new(f64::NAN, 0.0), z]).is_err());
        assert!(matches!(
            StateVector::from_amplitudes(2, vec![Amplitude::new(1.0, 0.0), z]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bitstring_roundtrip_and_display() {
        let x = BitString::from_bits(&[1, 0, 1, 1]).unwrap();
        assert_eq!(x.index(), 0b1011);
        assert_eq!(x.to_string(), "1011");
        assert!(x.bit(0) && !x.bit(1));
        assert_eq!(x.weight(), 3);
        assert!(BitString::from_bits(&[2]).is_err());
        assert!(BitString::from_index(2, 4).is_err());
        assert_eq!(BitString::all(3).unwrap().count(), 8);
    }

    #[test]
    fn kron_matches_product_state() {
        let pair = PreparationPair::new(FRAC_PI_6).unwrap();
        let (p0, p1) = prep_states(pair);
        let k = p0.kron(&p1).unwrap().kron(&p1).unwrap();
        let s = product_state(pair, &BitString::from_bits(&[0, 1, 1]).unwrap()).unwrap();
        for (a, b) in k.amps().iter().zip(s.amps()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
