//! Discrimination objective and the overlap bounds it implies.
//!
//! For a POVM `{E_x}` on `n` systems,
//! `sigma = sum_x <Psi(x)| E_x |Psi(x)>` is zero exactly when every outcome is
//! forbidden on its preparation. Within the circuit family the forbidden
//! probability is the same for all `x`, so `sigma = 2^n |amplitude|^2`.
//! When `n` is too small for `sigma = 0` the family minimum sits at
//! `alpha = pi, beta = 0`, and a model that reproduces that measurement obeys
//! `omega^n <= sigma`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{forbidden_amplitude, is_feasible, solve_params, CircuitParams, DEFAULT_SOLVER_TOL};
use crate::qcore::{inner_product, product_state, Amplitude, BitString, Limits, PreparationPair, StateVector};
use crate::verifier::outcome_distribution;
use crate::{Error, Result};

/// `sigma` below this counts as zero.
pub const SIGMA_ZERO_TOL: f64 = 1e-10;

/// Allowed disagreement between closed-form and simulated `sigma`.
pub const SIGMA_CROSS_CHECK_TOL: f64 = 1e-10;

/// Grid search may not beat the `(pi, 0)` value by more than this.
pub const GRID_AGREEMENT_TOL: f64 = 1e-8;

pub const MAX_SIMULATED_SIGMA_QUBITS: usize = 8;

/// Random-basis search uses dense `2^n x 2^n` unitaries.
pub const MAX_SEARCH_QUBITS: usize = 3;

pub const DEFAULT_REGION_GRID: usize = 512;
pub const DEFAULT_REGION_N_MAX: usize = 4;

/// Points per axis of the `(alpha, beta)` grid before local refinement.
pub const DEFAULT_GRID_POINTS: usize = 48;

const SEARCH_SHARDS: u64 = 16;

/// Closed-form `sigma = cos^{2n}(theta/2) |e^{i alpha} + (1 + e^{i beta} t)^n - 1|^2`.
pub fn sigma_parametric(params: &CircuitParams) -> f64 {
    2f64.powi(params.n as i32) * forbidden_amplitude(params).norm_sqr()
}

/// `sigma` by simulating the circuit on every preparation.
pub fn sigma_simulated(params: &CircuitParams) -> Result<f64> {
    let limits = Limits { max_qubits: MAX_SIMULATED_SIGMA_QUBITS };
    limits.check(params.n)?;
    let mut sigma = 0.0;
    for x in BitString::all(params.n)? {
        sigma += outcome_distribution(params, &x, &limits)?[x.index()];
    }
    Ok(sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaEval {
    pub closed_form: f64,
    /// Present for `n <= MAX_SIMULATED_SIGMA_QUBITS`.
    pub simulated: Option<f64>,
}

/// Closed form, confirmed by simulation where affordable.
pub fn sigma_cross_checked(params: &CircuitParams) -> Result<SigmaEval> {
    let closed_form = sigma_parametric(params);
    let simulated = if params.n <= MAX_SIMULATED_SIGMA_QUBITS {
        let s = sigma_simulated(params)?;
        if (s - closed_form).abs() > SIGMA_CROSS_CHECK_TOL {
            return Err(Error::Numerical(format!(
                "closed-form sigma {closed_form} disagrees with simulation {s}"
            )));
        }
        Some(s)
    } else {
        None
    };
    Ok(SigmaEval { closed_form, simulated })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridMinimum {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Minimizes closed-form `sigma` over `(alpha, beta)` in `[0, 2 pi)^2`: a
/// uniform grid followed by compass search from the best grid point.
pub fn grid_minimize_sigma(theta: f64, n: usize, grid_points: usize) -> Result<GridMinimum> {
    if grid_points == 0 {
        return Err(Error::Domain("grid needs at least one point per axis".into()));
    }
    let eval = |alpha: f64, beta: f64| -> Result<f64> { Ok(sigma_parametric(&CircuitParams::new(n, theta, alpha, beta)?)) };
    let h0 = TAU / grid_points as f64;
    let mut best = GridMinimum { sigma: f64::INFINITY, alpha: 0.0, beta: 0.0 };
    for i in 0..grid_points {
        for j in 0..grid_points {
            let (alpha, beta) = (i as f64 * h0, j as f64 * h0);
            let sigma = eval(alpha, beta)?;
            if sigma < best.sigma {
                best = GridMinimum { sigma, alpha, beta };
            }
        }
    }
    let mut h = h0;
    while h > 1e-12 {
        let mut moved = false;
        for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let (alpha, beta) = (best.alpha + da, best.beta + db);
            let sigma = eval(alpha, beta)?;
            if sigma < best.sigma {
                best = GridMinimum { sigma, alpha, beta };
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best.alpha = best.alpha.rem_euclid(TAU);
    best.beta = best.beta.rem_euclid(TAU);
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaMin {
    pub theta: f64,
    pub n: usize,
    /// Minimum over the circuit family; exactly 0 when `n` is feasible.
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Whether `2 arctan(2^(1/n) - 1) <= theta`.
    pub feasible: bool,
    /// Closed-form `sigma` at the returned `(alpha, beta)`.
    pub attained_sigma: f64,
    /// Independent grid-plus-refinement minimum, infeasible case only.
    pub grid: Option<GridMinimum>,
}

pub fn sigma_min(theta: f64, n: usize) -> Result<SigmaMin> {
    sigma_min_with_grid(theta, n, DEFAULT_GRID_POINTS)
}

pub fn sigma_min_with_grid(theta: f64, n: usize, grid_points: usize) -> Result<SigmaMin> {
    let pair = PreparationPair::new(theta)?;
    if n == 0 {
        return Err(Error::Domain("system count n must be at least 1".into()));
    }
    if is_feasible(theta, n) {
        let params = solve_params(theta, n, DEFAULT_SOLVER_TOL)?.params;
        return Ok(SigmaMin {
            theta,
            n,
            sigma: 0.0,
            alpha: params.alpha,
            beta: params.beta,
            feasible: true,
            attained_sigma: sigma_parametric(&params),
            grid: None,
        });
    }
    let c = (theta / 2.0).cos();
    let sigma = c.powi(2 * n as i32) * (2.0 - (1.0 + pair.t()).powi(n as i32)).powi(2);
    let attained_sigma = sigma_parametric(&CircuitParams::new(n, theta, PI, 0.0)?);
    let grid = grid_minimize_sigma(theta, n, grid_points)?;
    if grid.sigma < sigma - GRID_AGREEMENT_TOL {
        return Err(Error::Numerical(format!(
            "grid search found sigma {} below the (pi, 0) value {sigma}",
            grid.sigma
        )));
    }
    Ok(SigmaMin { theta, n, sigma, alpha: PI, beta: 0.0, feasible: false, attained_sigma, grid: Some(grid) })
}

/// `sigma_min^(1/n)`, an upper bound on `omega(mu0, mu1)`.
pub fn omega_upper_bound(theta: f64, n: usize) -> Result<f64> {
    let s = sigma_min(theta, n)?;
    Ok(s.sigma.max(0.0).powf(1.0 / n as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionPoint {
    /// Trace distance `sin(theta)`.
    pub delta: f64,
    pub n: usize,
    pub omega_upper: f64,
}

/// Overlap bounds for `n = 1..=n_max` on the grid `delta = j / grid_size`,
/// `j = 1..=grid_size`, rows ordered by `n` then `delta`.
pub fn region_data(n_max: usize, grid_size: usize) -> Result<Vec<RegionPoint>> {
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    if grid_size < 2 {
        return Err(Error::Domain("grid_size must be at least 2".into()));
    }
    let cells: Vec<(usize, usize)> = (1..=n_max).flat_map(|n| (1..=grid_size).map(move |j| (n, j))).collect();
    cells
        .into_par_iter()
        .map(|(n, j)| {
            let delta = j as f64 / grid_size as f64;
            let theta = delta.asin();
            Ok(RegionPoint { delta, n, omega_upper: omega_upper_bound(theta, n)? })
        })
        .collect()
}

/// Decimal rendering with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp >= 8 {
        format!("{digits}{}", "0".repeat((exp - 8) as usize))
    } else if exp >= 0 {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{body}")
}

pub const REGION_CSV_HEADER: &str = "delta,n,omega_upper";

pub fn write_region_csv<W: Write>(points: &[RegionPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{REGION_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", format_sig9(p.delta), p.n, format_sig9(p.omega_upper))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub theta: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// `+inf` when no trial ran.
    pub min_sigma: f64,
    pub found: bool,
}

/// Haar-random orthonormal basis of dimension `dim`, as columns.
fn random_basis(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<Amplitude>> {
    let mut cols: Vec<Vec<Amplitude>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<Amplitude> = (0..dim)
            .map(|_| Amplitude::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        for u in &cols {
            let proj: Amplitude = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            cols.push(v);
        }
    }
    cols
}

/// Minimum `sigma` over `trials` random projective measurements, outcome `k`
/// of each basis assigned to preparation `k`.
pub fn random_povm_search(theta: f64, n: usize, trials: usize, seed: u64) -> Result<SearchResult> {
    PreparationPair::new(theta)?;
    if n == 0 || n > MAX_SEARCH_QUBITS {
        return Err(Error::Resource(format!("random search supports 1..={MAX_SEARCH_QUBITS} systems, got {n}")));
    }
    let pair = PreparationPair::new(theta)?;
    let preps: Vec<StateVector> = BitString::all(n)?.map(|x| product_state(pair, &x)).collect::<Result<_>>()?;
    let dim = preps.len();

    let per_shard = trials as u64 / SEARCH_SHARDS;
    let remainder = trials as u64 % SEARCH_SHARDS;
    let shard_minima = (0..SEARCH_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = per_shard + u64::from(shard < remainder);
            let mut best = f64::INFINITY;
            for _ in 0..count {
                let basis = random_basis(&mut rng, dim);
                let mut sigma = 0.0;
                for (v, psi) in basis.into_iter().zip(&preps) {
                    let v = StateVector::from_amplitudes(n, v)?;
                    sigma += inner_product(&v, psi)?.norm_sqr();
                }
                best = best.min(sigma);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_sigma = shard_minima.into_iter().fold(f64::INFINITY, f64::min);
    Ok(SearchResult { theta, n, trials, seed, min_sigma, found: trials > 0 })
}
