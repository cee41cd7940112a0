//! End-to-end checks of the forbidden-outcome property by state-vector
//! simulation.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{forbidden_amplitude, solve_params, CircuitParams, DEFAULT_SOLVER_TOL};
use crate::qcore::{
    born_probabilities, inner_product, product_state_with, Amplitude, BitString, Limits, ProbabilityVector,
    StateVector, AGGREGATE_TOL,
};
use crate::Result;

pub const DEFAULT_VERIFY_TOL: f64 = 1e-10;

/// Above this many qubits only a seeded random subset of preparations is
/// simulated.
pub const DEFAULT_FULL_ENUMERATION_MAX: usize = 12;

pub const DEFAULT_SAMPLE_COUNT: usize = 256;

pub const DEFAULT_SEED: u64 = 20120411;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub tol: f64,
    pub solver_tol: f64,
    pub seed: u64,
    pub full_enumeration_max: usize,
    pub sample_count: usize,
    pub limits: Limits,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: DEFAULT_VERIFY_TOL,
            solver_tol: DEFAULT_SOLVER_TOL,
            seed: DEFAULT_SEED,
            full_enumeration_max: DEFAULT_FULL_ENUMERATION_MAX,
            sample_count: DEFAULT_SAMPLE_COUNT,
            limits: Limits::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Enumeration {
    Full,
    Sampled { seed: u64, count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreparationRecord {
    /// Preparation bits `x_1 ... x_n`.
    pub preparation: String,
    /// Index of the forbidden outcome, equal to the preparation index.
    pub outcome: usize,
    pub probability: f64,
    /// Sum over all outcomes for this preparation.
    pub outcome_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NogoReport {
    pub theta: f64,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub solver_tol: f64,
    pub beta_residual: f64,
    pub beta_bracket: (f64, f64),
    pub analytic_beta: Option<f64>,
    pub enumeration: Enumeration,
    pub max_forbidden_prob: f64,
    /// `max - min` of the forbidden probabilities over preparations.
    pub forbidden_spread: f64,
    /// Max `|simulated - |forbidden_amplitude|^2|`.
    pub closed_form_max_abs_diff: f64,
    /// Max `|sum_k p(k|x) - 1|`.
    pub completeness_max_error: f64,
    pub per_preparation: Vec<PreparationRecord>,
    pub passed: bool,
}

/// Born distribution of `U |Psi(x)>` over all outcomes.
pub fn outcome_distribution(params: &CircuitParams, x: &BitString, limits: &Limits) -> Result<ProbabilityVector> {
    let state = product_state_with(params.pair(), x, limits)?;
    Ok(born_probabilities(&params.apply(&state)))
}

/// `p(k | x)` for every preparation `x`, indexed `[x][k]`.
pub fn quantum_table(params: &CircuitParams, limits: &Limits) -> Result<Vec<ProbabilityVector>> {
    limits.check(params.n)?;
    BitString::all(params.n)?
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| outcome_distribution(params, &x, limits))
        .collect()
}

pub fn verify_nogo(theta: f64, n: usize, tol: f64) -> Result<NogoReport> {
    verify_nogo_with(theta, n, &VerifyOptions { tol, ..VerifyOptions::default() })
}

pub fn verify_nogo_with(theta: f64, n: usize, opts: &VerifyOptions) -> Result<NogoReport> {
    let solution = solve_params(theta, n, opts.solver_tol)?;
    opts.limits.check(n)?;
    let params = solution.params;

    let (preparations, enumeration) = if n <= opts.full_enumeration_max {
        (BitString::all(n)?.collect::<Vec<_>>(), Enumeration::Full)
    } else {
        let total = 1usize << n;
        let count = opts.sample_count.min(total);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, count).into_vec();
        picked.sort_unstable();
        let xs = picked
            .into_iter()
            .map(|i| BitString::from_index(n, i))
            .collect::<Result<Vec<_>>>()?;
        (xs, Enumeration::Sampled { seed: opts.seed, count })
    };

    let records = preparations
        .par_iter()
        .map(|x| {
            let probs = outcome_distribution(&params, x, &opts.limits)?;
            Ok(PreparationRecord {
                preparation: x.to_string(),
                outcome: x.index(),
                probability: probs[x.index()],
                outcome_total: probs.probs().iter().sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let closed_form = forbidden_amplitude(&params).norm_sqr();
    let mut max_p = f64::NEG_INFINITY;
    let mut min_p = f64::INFINITY;
    let mut closed_form_diff: f64 = 0.0;
    let mut completeness: f64 = 0.0;
    for r in &records {
        max_p = max_p.max(r.probability);
        min_p = min_p.min(r.probability);
        closed_form_diff = closed_form_diff.max((r.probability - closed_form).abs());
        completeness = completeness.max((r.outcome_total - 1.0).abs());
    }

    Ok(NogoReport {
        theta,
        n,
        alpha: params.alpha,
        beta: params.beta,
        tol: opts.tol,
        solver_tol: opts.solver_tol,
        beta_residual: solution.beta_residual,
        beta_bracket: solution.bracket,
        analytic_beta: solution.analytic_beta,
        enumeration,
        max_forbidden_prob: max_p,
        forbidden_spread: max_p - min_p,
        closed_form_max_abs_diff: closed_form_diff,
        completeness_max_error: completeness,
        passed: max_p <= opts.tol && completeness <= AGGREGATE_TOL,
        per_preparation: records,
    })
}

/// Preparation labels of the explicit two-qubit check, in outcome order.
pub const TWOBOX_PREPARATIONS: [&str; 4] = ["0,0", "0,+", "+,0", "+,+"];

/// Tolerance on `<xi_k|prep_k>`, which is zero in exact arithmetic.
pub const TWOBOX_ORTHOGONALITY_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoBoxReport {
    pub preparations: [&'static str; 4],
    /// `|<xi_k | prep_k>|^2` for k = 1..4.
    pub forbidden_probabilities: [f64; 4],
    pub max_forbidden_amplitude: f64,
    pub max_forbidden_prob: f64,
    /// Max entrywise `|G - I|` for the Gram matrix of `xi_1..xi_4`.
    pub gram_max_deviation: f64,
    /// `|<xi_k | prep>|^2` indexed `[prep][k]`.
    pub probabilities: Vec<Vec<f64>>,
    /// The solved circuit at `theta = pi/4, n = 2`.
    pub circuit: CircuitParams,
    /// Max `|p_xi - p_circuit|` over all 16 preparation/outcome pairs.
    pub circuit_max_abs_diff: f64,
    pub passed: bool,
}

fn two_qubit(terms: &[(&[Amplitude; 2], &[Amplitude; 2])]) -> Result<StateVector> {
    let mut amps = vec![Amplitude::new(0.0, 0.0); 4];
    for (a, b) in terms {
        for i in 0..2 {
            for j in 0..2 {
                amps[2 * i + j] += a[i] * b[j];
            }
        }
    }
    let scale = FRAC_1_SQRT_2.powi(terms.len() as i32 - 1);
    StateVector::from_amplitudes(2, amps.into_iter().map(|a| a * scale).collect())
}

/// The explicit entangled basis separating `|0>` and `|+>` on two systems.
///
/// Checks orthonormality of `xi_1..xi_4`, that `xi_k` is orthogonal to the
/// k-th product of `|0>, |+>`, and that the probability table matches the
/// general circuit solved at `theta = pi/4` (the same overlap `1/sqrt 2`).
pub fn twobox_check() -> Result<TwoBoxReport> {
    let r = FRAC_1_SQRT_2;
    let c = |re: f64| Amplitude::new(re, 0.0);
    let zero = [c(1.0), c(0.0)];
    let one = [c(0.0), c(1.0)];
    let plus = [c(r), c(r)];
    let minus = [c(r), c(-r)];

    let xi = [
        two_qubit(&[(&zero, &one), (&one, &zero)])?,
        two_qubit(&[(&zero, &minus), (&one, &plus)])?,
        two_qubit(&[(&plus, &one), (&minus, &zero)])?,
        two_qubit(&[(&plus, &minus), (&minus, &plus)])?,
    ];
    let preps = [
        two_qubit(&[(&zero, &zero)])?,
        two_qubit(&[(&zero, &plus)])?,
        two_qubit(&[(&plus, &zero)])?,
        two_qubit(&[(&plus, &plus)])?,
    ];

    let mut gram_max_deviation: f64 = 0.0;
    for (i, a) in xi.iter().enumerate() {
        for (j, b) in xi.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            gram_max_deviation = gram_max_deviation.max((inner_product(a, b)? - expected).norm());
        }
    }

    let mut forbidden_probabilities = [0.0; 4];
    let mut max_forbidden_amplitude: f64 = 0.0;
    let mut probabilities = vec![vec![0.0; 4]; 4];
    for (p, prep) in preps.iter().enumerate() {
        for (k, x) in xi.iter().enumerate() {
            let amp = inner_product(x, prep)?;
            probabilities[p][k] = amp.norm_sqr();
            if p == k {
                forbidden_probabilities[k] = amp.norm_sqr();
                max_forbidden_amplitude = max_forbidden_amplitude.max(amp.norm());
            }
        }
    }
    let max_forbidden_prob = forbidden_probabilities.iter().copied().fold(0.0, f64::max);

    // |0>, |+> and |psi_0>, |psi_1> at theta = pi/4 share the overlap 1/sqrt 2,
    // so a local unitary maps one pair onto the other.
    let circuit = solve_params(FRAC_PI_4, 2, DEFAULT_SOLVER_TOL)?.params;
    let table = quantum_table(&circuit, &Limits::default())?;
    let circuit_max_abs_diff = table
        .iter()
        .zip(&probabilities)
        .flat_map(|(q, p)| q.probs().iter().zip(p).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);

    let passed = max_forbidden_amplitude <= TWOBOX_ORTHOGONALITY_TOL
        && gram_max_deviation <= 1e-12
        && circuit_max_abs_diff <= AGGREGATE_TOL;

    Ok(TwoBoxReport {
        preparations: TWOBOX_PREPARATIONS,
        forbidden_probabilities,
        max_forbidden_amplitude,
        max_forbidden_prob,
        gram_max_deviation,
        probabilities,
        circuit,
        circuit_max_abs_diff,
        passed,
    })
}
