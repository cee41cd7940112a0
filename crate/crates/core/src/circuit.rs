//! The parameterized measurement `U = H^n R_alpha Z_beta^n`.
//!
//! For a preparation angle `theta` and `n >= min_n(theta)` systems, the
//! circuit followed by a computational-basis measurement gives outcome `x`
//! zero probability on the product preparation `|Psi(x)>`. The outcome
//! amplitude reduces to
//!
//! ```text
//! 2^(-n/2) cos^n(theta/2) (e^{i alpha} + (1 + e^{i beta} t)^n - 1),  t = tan(theta/2)
//! ```
//!
//! which does not depend on `x`, so one pair `(alpha, beta)` kills every
//! forbidden outcome at once.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::qcore::{inner_product, Amplitude, Gate, Limits, PreparationPair, StateVector};
use crate::{Error, Result};

/// Default tolerance on `||f(beta)| - 1|`.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// Absolute slack on `2^(1/n) - 1 <= tan(theta/2)`. Boundary angles such as
/// `theta = pi/4, n = 2` are equalities that rounding can push either way.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

pub const MAX_BISECTION_ITERS: usize = 200;

/// Required agreement between the analytic and bisected `beta` at `n = 2`.
pub const ANALYTIC_AGREEMENT_TOL: f64 = 1e-9;

/// Dense effects are only materialized up to this many qubits by default.
pub const DEFAULT_MAX_POVM_QUBITS: usize = 10;

/// Coarse samples of `g(beta) = |f(beta)| - 1` used to locate the first
/// sign change before bisecting.
const SCAN_POINTS: usize = 64;

/// `2^(1/n) - 1 <= tan(theta/2)` up to [`FEASIBILITY_SLACK`].
pub fn is_feasible(theta: f64, n: usize) -> bool {
    n >= 1 && 2f64.powf(1.0 / n as f64) - 1.0 <= (theta / 2.0).tan() + FEASIBILITY_SLACK
}

/// Smallest `n` with `2 arctan(2^(1/n) - 1) <= theta`.
pub fn min_n(theta: f64) -> Result<usize> {
    let pair = PreparationPair::new(theta)?;
    let t = pair.t();
    // n >= ln 2 / ln(1 + t); start just below the estimate and walk up.
    let estimate = (std::f64::consts::LN_2 / t.ln_1p()).floor();
    let mut n = if estimate.is_finite() && estimate > 2.0 { estimate as usize - 1 } else { 1 };
    while n > 1 && is_feasible(theta, n - 1) {
        n -= 1;
    }
    while !is_feasible(theta, n) {
        n += 1;
    }
    Ok(n)
}

/// `f(beta) = 1 - (1 + e^{i beta} tan(theta/2))^n`.
///
/// No domain checks: `theta -> 0` gives `f = 0` identically.
pub fn f_beta(beta: f64, theta: f64, n: usize) -> Amplitude {
    let t = (theta / 2.0).tan();
    Amplitude::new(1.0, 0.0) - (Amplitude::new(1.0, 0.0) + Amplitude::cis(beta) * t).powi(n as i32)
}

/// Closed-form `beta` for `n = 2`: `arccos((1 - 4t^2 - t^4) / (4t^3))`.
///
/// The cosine argument is clamped to `[-1, 1]`; at the feasibility boundary
/// it equals 1 up to rounding.
pub fn analytic_beta_n2(theta: f64) -> f64 {
    let t = (theta / 2.0).tan();
    let c = (1.0 - 4.0 * t * t - t.powi(4)) / (4.0 * t.powi(3));
    c.clamp(-1.0, 1.0).acos()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CircuitParams {
    pub n: usize,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CircuitParams {
    pub fn new(n: usize, theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        PreparationPair::new(theta)?;
        if n == 0 {
            return Err(Error::Domain("system count n must be at least 1".into()));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Domain("alpha and beta must be finite".into()));
        }
        Ok(CircuitParams { n, theta, alpha, beta })
    }

    pub fn pair(&self) -> PreparationPair {
        PreparationPair::new(self.theta).expect("validated at construction")
    }

    /// `|e^{i alpha} + (1 + e^{i beta} t)^n - 1|`.
    pub fn residual(&self) -> f64 {
        (Amplitude::cis(self.alpha) - f_beta(self.beta, self.theta, self.n)).norm()
    }

    pub fn is_solved(&self, tol: f64) -> bool {
        self.residual() <= tol
    }

    pub fn gates(&self) -> [Gate; 3] {
        [Gate::ZBeta(self.beta), Gate::RAlpha(self.alpha), Gate::HadamardAll]
    }

    /// `U |state>`.
    pub fn apply(&self, state: &StateVector) -> StateVector {
        let mut out = state.clone();
        for g in self.gates() {
            out.apply(g);
        }
        out
    }

    /// `U^dagger |state>`.
    pub fn apply_inverse(&self, state: &StateVector) -> StateVector {
        let mut out = state.clone();
        out.apply(Gate::HadamardAll);
        out.apply(Gate::RAlpha(-self.alpha));
        out.apply(Gate::ZBeta(-self.beta));
        out
    }
}

/// Output of [`solve_params`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub params: CircuitParams,
    /// `||f(beta)| - 1|` at the returned root.
    pub beta_residual: f64,
    /// Interval of `[0, pi]` the root was bisected in.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Closed-form `beta`, only for `n = 2`.
    pub analytic_beta: Option<f64>,
}

/// Solves `|1 - (1 + e^{i beta} t)^n| = 1` for `beta` in `[0, pi]` and sets
/// `alpha = arg f(beta)`.
///
/// `g(beta) = |f(beta)| - 1` has `g(0) >= 0` and `g(pi) <= 0` whenever `n` is
/// feasible. The first sampled sign change is bisected.
pub fn solve_params(theta: f64, n: usize, tol: f64) -> Result<Solution> {
    let required = min_n(theta)?;
    if n < required {
        return Err(Error::Infeasible { theta, n, min_n: required });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("solver tolerance must be positive, got {tol}")));
    }
    let g = |beta: f64| f_beta(beta, theta, n).norm() - 1.0;

    let (beta, bracket, iterations) = locate_root(&g, tol)?;
    let residual = g(beta).abs();
    if residual > tol {
        return Err(Error::Numerical(format!(
            "bisection stalled at beta = {beta} with ||f| - 1| = {residual:e}"
        )));
    }
    let alpha = f_beta(beta, theta, n).arg();
    let params = CircuitParams::new(n, theta, alpha, beta)?;

    let analytic_beta = if n == 2 {
        let analytic = analytic_beta_n2(theta);
        // Near a double root the set of numerical roots is an interval of
        // width ~sqrt(eps); accept the analytic value if it is itself a root.
        if (analytic - beta).abs() > ANALYTIC_AGREEMENT_TOL && g(analytic).abs() > tol {
            return Err(Error::Numerical(format!(
                "analytic beta {analytic} disagrees with bisection root {beta}"
            )));
        }
        Some(analytic)
    } else {
        None
    };

    Ok(Solution { params, beta_residual: residual, bracket, iterations, analytic_beta })
}

type Root = (f64, (f64, f64), usize);

fn locate_root(g: &impl Fn(f64) -> f64, tol: f64) -> Result<Root> {
    let g0 = g(0.0);
    if g0.abs() <= tol {
        return Ok((0.0, (0.0, 0.0), 0));
    }
    if g0 < 0.0 {
        return Err(Error::Numerical(format!("|f(0)| - 1 = {g0:e} < 0; no bracket on [0, pi]")));
    }
    let step = PI / SCAN_POINTS as f64;
    let mut lo = 0.0;
    let mut hi = PI;
    for k in 1..=SCAN_POINTS {
        let b = if k == SCAN_POINTS { PI } else { k as f64 * step };
        let gb = g(b);
        if gb.abs() <= tol {
            return Ok((b, (lo, b), 0));
        }
        if gb < 0.0 {
            hi = b;
            break;
        }
        lo = b;
        if k == SCAN_POINTS {
            return Err(Error::Numerical("|f(pi)| > 1; no sign change on [0, pi]".into()));
        }
    }
    let bracket = (lo, hi);
    let (mut a, mut b) = bracket;
    for it in 1..=MAX_BISECTION_ITERS {
        let mid = 0.5 * (a + b);
        let gm = g(mid);
        if gm.abs() <= tol || mid == a || mid == b {
            return Ok((mid, bracket, it));
        }
        if gm > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(Error::Numerical(format!(
        "bisection did not converge in {MAX_BISECTION_ITERS} iterations on [{}, {}]",
        bracket.0, bracket.1
    )))
}

/// `<x| U |Psi(x)>`, identical for every `x`.
pub fn forbidden_amplitude(params: &CircuitParams) -> Amplitude {
    let n = params.n as i32;
    let (s, c) = (params.theta / 2.0).sin_cos();
    let t = s / c;
    let prefactor = std::f64::consts::FRAC_1_SQRT_2.powi(n) * c.powi(n);
    let one = Amplitude::new(1.0, 0.0);
    prefactor * (Amplitude::cis(params.alpha) + (one + Amplitude::cis(params.beta) * t).powi(n) - one)
}

/// Rank-one POVM `E_x = U^dagger |x><x| U`, stored by its kets `U^dagger |x>`.
#[derive(Clone, Debug)]
pub struct MeasurementSpec {
    n: usize,
    kets: Vec<StateVector>,
}

/// Worst-case deviations of a [`MeasurementSpec`] from a valid POVM.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PovmCheck {
    /// Max entrywise `|sum_x E_x - I|`.
    pub completeness_error: f64,
    /// Max entrywise `|E - E^dagger|` over effects.
    pub hermiticity_error: f64,
    /// Smallest eigenvalue over all effects.
    pub min_eigenvalue: f64,
    /// Max `|rank-1 eigenvalue - 1|`: the effects are projectors.
    pub projector_error: f64,
    /// Max `|tr E - 1|`.
    pub trace_error: f64,
}

impl MeasurementSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.kets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kets.is_empty()
    }

    pub fn ket(&self, outcome: usize) -> &StateVector {
        &self.kets[outcome]
    }

    /// Dense `2^n x 2^n` effect for `outcome`.
    pub fn effect(&self, outcome: usize) -> DMatrix<Amplitude> {
        let v = self.kets[outcome].amps();
        let d = v.len();
        DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj())
    }

    /// `<state| E_outcome |state>`.
    pub fn probability(&self, outcome: usize, state: &StateVector) -> Result<f64> {
        Ok(inner_product(&self.kets[outcome], state)?.norm_sqr())
    }

    pub fn check(&self) -> PovmCheck {
        let d = 1usize << self.n;
        let mut total = DMatrix::<Amplitude>::zeros(d, d);
        let mut hermiticity_error: f64 = 0.0;
        let mut min_eigenvalue = f64::INFINITY;
        let mut projector_error: f64 = 0.0;
        let mut trace_error: f64 = 0.0;
        for k in 0..self.kets.len() {
            let e = self.effect(k);
            let herm = (&e - e.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            hermiticity_error = hermiticity_error.max(herm);
            let mut eig: Vec<f64> = e.clone().symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(|a, b| a.total_cmp(b));
            min_eigenvalue = min_eigenvalue.min(eig[0]);
            projector_error = projector_error.max((eig[d - 1] - 1.0).abs());
            trace_error = trace_error.max((e.trace().re - 1.0).abs());
            total += e;
        }
        let completeness_error = (total - DMatrix::<Amplitude>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        PovmCheck { completeness_error, hermiticity_error, min_eigenvalue, projector_error, trace_error }
    }
}

pub fn build_povm(params: &CircuitParams) -> Result<MeasurementSpec> {
    build_povm_with(params, DEFAULT_MAX_POVM_QUBITS)
}

pub fn build_povm_with(params: &CircuitParams, max_qubits: usize) -> Result<MeasurementSpec> {
    Limits { max_qubits }.check(params.n)?;
    let n = params.n;
    let kets = (0..1usize << n)
        .map(|x| StateVector::basis(n, x).map(|b| params.apply_inverse(&b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSpec { n, kets })
}
