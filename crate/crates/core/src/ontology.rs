//! Finite ontological models.
//!
//! The space of ontic states is `Lambda = {0, .., lambda_count - 1}`. Each
//! preparation `i` in `{0, 1}` samples `lambda` from `mu_i`; `n` independent
//! preparations `x` sample `(lambda_1, .., lambda_n)` from the product
//! `mu_x = mu_{x_1} x .. x mu_{x_n}`, and a [`ResponseTable`] gives the outcome
//! distribution for every joint ontic state. Joint states are indexed in mixed
//! radix with `lambda_1` most significant, matching the qubit convention.
//!
//! A model reproducing the quantum outcome probabilities of the no-go
//! measurement to within `eps` per outcome satisfies
//! `omega^n <= 2^n eps`, i.e. `D >= 1 - 2 eps^(1/n)`.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::qcore::{BitString, Limits, ProbabilityVector};
use crate::verifier::quantum_table;
use crate::{Error, Result};

/// Normalization tolerance for distributions and response rows.
pub const DIST_TOL: f64 = 1e-12;

/// Cap on `lambda_count^n` for dense joint tables.
pub const MAX_JOINT_STATES: usize = 1_000_000;

/// Slack on the inequalities `D >= 1 - 2 eps^(1/n)` and `omega^n <= 2^n eps`.
pub const BOUND_SLACK: f64 = 1e-9;

/// Residual below which circuit parameters count as solved.
pub const SOLVED_TOL: f64 = 1e-9;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Monte Carlo work is split into this many independently seeded shards.
const MC_SHARDS: u64 = 16;

/// A probability vector over `Lambda`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("distribution over an empty space".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("distribution weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(Error::Domain(format!("distribution sums to {total}, not 1")));
        }
        Ok(Distribution(weights))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::new(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OntModel {
    mu0: Distribution,
    mu1: Distribution,
}

impl OntModel {
    pub fn new(mu0: Vec<f64>, mu1: Vec<f64>) -> Result<Self> {
        if mu0.len() != mu1.len() {
            return Err(Error::DimensionMismatch { expected: mu0.len(), found: mu1.len() });
        }
        Ok(OntModel { mu0: Distribution::new(mu0)?, mu1: Distribution::new(mu1)? })
    }

    pub fn lambda_count(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &[f64] {
        self.mu0.as_slice()
    }

    pub fn mu1(&self) -> &[f64] {
        self.mu1.as_slice()
    }

    /// `mu_{bit}`.
    pub fn mu(&self, bit: bool) -> &[f64] {
        if bit {
            self.mu1()
        } else {
            self.mu0()
        }
    }

    /// `Delta`: ontic states both preparations can produce.
    pub fn overlap_region(&self) -> Vec<bool> {
        self.mu0().iter().zip(self.mu1()).map(|(a, b)| *a > 0.0 && *b > 0.0).collect()
    }
}

/// `xi(k | lambda_1, .., lambda_n)`, dense over `Lambda^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseTable {
    n: usize,
    lambda_count: usize,
    entries: Vec<Vec<f64>>,
}

impl ResponseTable {
    pub fn new(n: usize, lambda_count: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        let joint = joint_size(lambda_count, n)?;
        if entries.len() != joint {
            return Err(Error::DimensionMismatch { expected: joint, found: entries.len() });
        }
        let outcomes = 1usize << n;
        for row in &entries {
            if row.len() != outcomes {
                return Err(Error::DimensionMismatch { expected: outcomes, found: row.len() });
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Domain("response probabilities must be finite and non-negative".into()));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > DIST_TOL {
                return Err(Error::Domain(format!("response row sums to {total}, not 1")));
            }
        }
        Ok(ResponseTable { n, lambda_count, entries })
    }

    /// The same outcome distribution for every joint ontic state.
    pub fn constant(n: usize, lambda_count: usize, probs: &[f64]) -> Result<Self> {
        let joint = joint_size(lambda_count, n)?;
        Self::new(n, lambda_count, vec![probs.to_vec(); joint])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda_count(&self) -> usize {
        self.lambda_count
    }

    pub fn row(&self, joint_index: usize) -> &[f64] {
        &self.entries[joint_index]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }
}

fn joint_size(lambda_count: usize, n: usize) -> Result<usize> {
    if lambda_count == 0 || n == 0 {
        return Err(Error::Domain("lambda_count and n must be positive".into()));
    }
    u32::try_from(n)
        .ok()
        .and_then(|e| lambda_count.checked_pow(e))
        .filter(|&size| size <= MAX_JOINT_STATES)
        .ok_or_else(|| {
            Error::Resource(format!(
                "lambda_count^n = {lambda_count}^{n} exceeds the cap of {MAX_JOINT_STATES}"
            ))
        })
}

/// Digits of `joint` in base `lambda_count`, most significant first.
fn split_joint(joint: usize, lambda_count: usize, n: usize) -> impl Iterator<Item = usize> {
    let mut rest = joint;
    let mut digits = vec![0; n];
    for d in digits.iter_mut().rev() {
        *d = rest % lambda_count;
        rest /= lambda_count;
    }
    digits.into_iter()
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

/// `D = 1/2 sum |mu0 - mu1|`.
pub fn tv_distance(mu0: &[f64], mu1: &[f64]) -> Result<f64> {
    check_same_len(mu0, mu1)?;
    let d = 0.5 * mu0.iter().zip(mu1).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// `omega = sum_lambda min_i mu_i(lambda)`.
pub fn overlap(mus: &[&[f64]]) -> Result<f64> {
    let Some(first) = mus.first() else {
        return Err(Error::Domain("overlap needs at least two distributions".into()));
    };
    if mus.len() < 2 {
        return Err(Error::Domain("overlap needs at least two distributions".into()));
    }
    for m in &mus[1..] {
        check_same_len(first, m)?;
    }
    Ok((0..first.len())
        .map(|l| mus.iter().map(|m| m[l]).fold(f64::INFINITY, f64::min))
        .sum())
}

/// `q = min(mu0(Delta), mu1(Delta))` with `Delta` the intersection of supports.
pub fn overlap_region_mass(mu0: &[f64], mu1: &[f64]) -> Result<f64> {
    check_same_len(mu0, mu1)?;
    let (mut m0, mut m1) = (0.0, 0.0);
    for (a, b) in mu0.iter().zip(mu1) {
        if *a > 0.0 && *b > 0.0 {
            m0 += a;
            m1 += b;
        }
    }
    Ok(f64::min(m0, m1))
}

/// `mu_x(lambda) = prod_i mu_{x_i}(lambda_i)` over `Lambda^n`.
pub fn product_model(model: &OntModel, x: &BitString) -> Result<Vec<f64>> {
    let l = model.lambda_count();
    let n = x.len();
    let joint = joint_size(l, n)?;
    Ok((0..joint)
        .map(|j| {
            split_joint(j, l, n)
                .enumerate()
                .map(|(i, lambda)| model.mu(x.bit(i))[lambda])
                .product()
        })
        .collect())
}

/// `p(k | x) = sum_lambda xi(k | lambda) mu_x(lambda)`.
pub fn predicted_probabilities(model: &OntModel, resp: &ResponseTable, x: &BitString) -> Result<ProbabilityVector> {
    if resp.lambda_count != model.lambda_count() {
        return Err(Error::DimensionMismatch { expected: model.lambda_count(), found: resp.lambda_count });
    }
    if resp.n != x.len() {
        return Err(Error::DimensionMismatch { expected: resp.n, found: x.len() });
    }
    let weights = product_model(model, x)?;
    let mut probs = vec![0.0; 1 << resp.n];
    for (w, row) in weights.iter().zip(&resp.entries) {
        if *w == 0.0 {
            continue;
        }
        for (p, xi) in probs.iter_mut().zip(row) {
            *p += w * xi;
        }
    }
    ProbabilityVector::new(probs)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationReport {
    pub theta: f64,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Max over preparations and outcomes of `|p_model - p_quantum|`.
    pub epsilon: f64,
    pub worst_preparation: String,
    pub worst_outcome: usize,
    /// Total variation distance `D(mu0, mu1)`.
    #[serde(rename = "D")]
    pub d: f64,
    pub omega: f64,
    pub q: f64,
    /// `1 - 2 eps^(1/n)`.
    pub d_lower_bound: f64,
    pub bound_holds: bool,
    /// `omega^n`.
    pub overlap_power: f64,
    /// `2^n eps`.
    pub chain_bound: f64,
    pub chain_holds: bool,
}

/// Deviation of a model from the quantum predictions of an arbitrary circuit.
///
/// The bound fields are only guaranteed for solved parameters; see
/// [`max_deviation`].
pub fn deviation_against(model: &OntModel, resp: &ResponseTable, params: &CircuitParams) -> Result<DeviationReport> {
    let n = params.n;
    if resp.n != n {
        return Err(Error::DimensionMismatch { expected: n, found: resp.n });
    }
    joint_size(model.lambda_count(), n)?;
    let quantum = quantum_table(params, &Limits::default())?;

    let per_prep = BitString::all(n)?
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| {
            let model_p = predicted_probabilities(model, resp, &x)?;
            let q = &quantum[x.index()];
            let (k, dev) = model_p
                .probs()
                .iter()
                .zip(q.probs())
                .map(|(a, b)| (a - b).abs())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best });
            Ok((x, k, dev))
        })
        .collect::<Result<Vec<_>>>()?;
    // Sequential reduction; ties resolve to the lowest preparation index.
    let (worst_x, worst_k, epsilon) = per_prep
        .into_iter()
        .fold(None::<(BitString, usize, f64)>, |best, cur| match best {
            Some(b) if b.2 >= cur.2 => Some(b),
            _ => Some(cur),
        })
        .expect("at least one preparation");

    let d = tv_distance(model.mu0(), model.mu1())?;
    let omega = overlap(&[model.mu0(), model.mu1()])?;
    let q = overlap_region_mass(model.mu0(), model.mu1())?;
    let d_lower_bound = 1.0 - 2.0 * epsilon.powf(1.0 / n as f64);
    let overlap_power = omega.powi(n as i32);
    let chain_bound = 2f64.powi(n as i32) * epsilon;

    Ok(DeviationReport {
        theta: params.theta,
        n,
        alpha: params.alpha,
        beta: params.beta,
        epsilon,
        worst_preparation: worst_x.to_string(),
        worst_outcome: worst_k,
        d,
        omega,
        q,
        d_lower_bound,
        bound_holds: d >= d_lower_bound - BOUND_SLACK,
        overlap_power,
        chain_bound,
        chain_holds: overlap_power <= chain_bound + BOUND_SLACK,
    })
}

/// [`deviation_against`] for solved no-go parameters.
pub fn max_deviation(model: &OntModel, resp: &ResponseTable, params: &CircuitParams) -> Result<DeviationReport> {
    let residual = params.residual();
    if residual > SOLVED_TOL {
        return Err(Error::Domain(format!(
            "circuit parameters are not solved (residual {residual:e})"
        )));
    }
    deviation_against(model, resp, params)
}

/// Response that answers with the quantum distribution of the preparations
/// compatible with `lambda`, weighted by their likelihood `mu_x(lambda)`
/// under a uniform prior over `x`.
///
/// Disjoint supports reproduce the quantum predictions exactly; a shared
/// ontic state averages the preparations it cannot tell apart.
pub fn posterior_response(model: &OntModel, params: &CircuitParams) -> Result<ResponseTable> {
    let n = params.n;
    let l = model.lambda_count();
    let joint = joint_size(l, n)?;
    let quantum = quantum_table(params, &Limits::default())?;
    let preps: Vec<BitString> = BitString::all(n)?.collect();
    let outcomes = 1usize << n;

    let uniform: Vec<f64> = (0..outcomes)
        .map(|k| quantum.iter().map(|q| q[k]).sum::<f64>() / preps.len() as f64)
        .collect();

    let entries = (0..joint)
        .into_par_iter()
        .map(|j| {
            let lambdas: Vec<usize> = split_joint(j, l, n).collect();
            let mut row = vec![0.0; outcomes];
            let mut total = 0.0;
            for x in &preps {
                let w: f64 = lambdas.iter().enumerate().map(|(i, &lam)| model.mu(x.bit(i))[lam]).product();
                if w > 0.0 {
                    total += w;
                    for (r, p) in row.iter_mut().zip(quantum[x.index()].probs()) {
                        *r += w * p;
                    }
                }
            }
            if total > 0.0 {
                row.iter_mut().for_each(|r| *r /= total);
                row
            } else {
                uniform.clone()
            }
        })
        .collect();
    ResponseTable::new(n, l, entries)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceKind {
    /// Disjoint supports on `Lambda = {0, 1}`.
    PsiOntic,
    /// `mu0 = mu1` uniform on `Lambda = {0, 1}`.
    FullyOverlapping,
    /// `mu0 = (1-q, 0, q)`, `mu1 = (0, 1-q, q)`: overlap mass `q`.
    Partial(f64),
}

/// Witness models for the bound, each paired with its posterior response.
pub fn make_reference_model(kind: ReferenceKind, params: &CircuitParams) -> Result<(OntModel, ResponseTable)> {
    if params.residual() > SOLVED_TOL {
        return Err(Error::Domain("reference models require solved circuit parameters".into()));
    }
    let model = match kind {
        ReferenceKind::PsiOntic => OntModel::new(vec![1.0, 0.0], vec![0.0, 1.0])?,
        ReferenceKind::FullyOverlapping => OntModel::new(vec![0.5, 0.5], vec![0.5, 0.5])?,
        ReferenceKind::Partial(q) => {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Domain(format!("overlap mass q must lie in [0, 1], got {q}")));
            }
            OntModel::new(vec![1.0 - q, 0.0, q], vec![0.0, 1.0 - q, q])?
        }
    };
    let resp = posterior_response(&model, params)?;
    Ok((model, resp))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub samples: usize,
    pub hits: usize,
    /// Fraction of samples with every `lambda_i` in `Delta`.
    pub frequency: f64,
    /// `prod_i mu_{x_i}(Delta)`.
    pub expected: f64,
    /// `sqrt(expected (1 - expected) / samples)`.
    pub std_error: f64,
    pub seed: u64,
}

impl McEstimate {
    /// `|frequency - expected|` in units of the standard error.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.frequency == self.expected {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.frequency - self.expected).abs() / self.std_error
        }
    }
}

/// Samples `lambda` from `mu_x` and counts how often all components land in
/// the overlap region.
///
/// The work is split into fixed shards, each on its own ChaCha stream of the
/// root seed, so the result depends only on `seed` and `samples`.
pub fn sample_overlap_region(model: &OntModel, x: &BitString, samples: usize, seed: u64) -> Result<McEstimate> {
    let delta = model.overlap_region();
    let samplers = [
        WeightedIndex::new(model.mu0()).map_err(|e| Error::Domain(e.to_string()))?,
        WeightedIndex::new(model.mu1()).map_err(|e| Error::Domain(e.to_string()))?,
    ];
    let bits: Vec<bool> = x.bits().collect();

    let per_shard = samples as u64 / MC_SHARDS;
    let remainder = samples as u64 % MC_SHARDS;
    let hits: usize = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = per_shard + u64::from(shard < remainder);
            (0..count)
                .filter(|_| bits.iter().all(|&b| delta[samplers[b as usize].sample(&mut rng)]))
                .count()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();

    let expected: f64 = bits
        .iter()
        .map(|&b| model.mu(b).iter().zip(&delta).filter(|(_, d)| **d).map(|(m, _)| m).sum::<f64>())
        .product();
    let frequency = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
    let std_error = if samples == 0 { 0.0 } else { (expected * (1.0 - expected) / samples as f64).sqrt() };
    Ok(McEstimate { samples, hits, frequency, expected, std_error, seed })
}

/// On-disk model schema.
///
/// ```json
/// { "lambda_count": 3,
///   "mu0": [0.6, 0.0, 0.4],
///   "mu1": [0.0, 0.6, 0.4],
///   "response": { "n": 2, "entries": [[0.25, 0.25, 0.25, 0.25], ...] } }
/// ```
///
/// `response` is optional; `entries` has `lambda_count^n` rows of `2^n`
/// outcome probabilities, joint index `lambda_1` most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub lambda_count: usize,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseFile {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &OntModel, resp: Option<&ResponseTable>) -> Self {
        ModelFile {
            lambda_count: model.lambda_count(),
            mu0: model.mu0().to_vec(),
            mu1: model.mu1().to_vec(),
            response: resp.map(|r| ResponseFile { n: r.n, entries: r.entries.clone() }),
        }
    }

    pub fn into_model(self) -> Result<(OntModel, Option<ResponseTable>)> {
        for mu in [&self.mu0, &self.mu1] {
            if mu.len() != self.lambda_count {
                return Err(Error::DimensionMismatch { expected: self.lambda_count, found: mu.len() });
            }
        }
        let model = OntModel::new(self.mu0, self.mu1)?;
        let resp = self
            .response
            .map(|r| ResponseTable::new(r.n, self.lambda_count, r.entries))
            .transpose()?;
        Ok((model, resp))
    }
}

pub fn load_model(path: &Path) -> Result<(OntModel, Option<ResponseTable>)> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str::<ModelFile>(&text)?.into_model()
}

pub fn save_model(path: &Path, model: &OntModel, resp: Option<&ResponseTable>) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_model(model, resp))?;
    fs::write(path, text)?;
    Ok(())
}
