//! Acceptance criteria. Runs as a plain binary so every criterion prints its
//! own PASS/FAIL line; exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, TAU};
use std::time::{Duration, Instant};

use clap::Parser;
use ontic::bounds::{random_povm_search, sigma_min};
use ontic::circuit::{forbidden_amplitude, min_n, solve_params, CircuitParams, DEFAULT_SOLVER_TOL};
use ontic::cli::{run, RunConfig};
use ontic::ontology::{
    deviation_against, make_reference_model, max_deviation, overlap, posterior_response, product_model,
    sample_overlap_region, OntModel, ReferenceKind, ResponseTable,
};
use ontic::qcore::{BitString, Limits};
use ontic::verifier::{outcome_distribution, twobox_check, verify_nogo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn random_distribution(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..len)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { -rng.random::<f64>().ln() })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|x| x / total).collect();
        }
    }
}

/// Smallest angle at which `n` systems suffice, from the arctan form.
fn boundary_theta(n: usize) -> f64 {
    2.0 * (2f64.powf(1.0 / n as f64) - 1.0).atan()
}

fn ac1_two_qubit() -> Verdict {
    let start = Instant::now();
    let r = twobox_check().expect("twobox check runs");
    let elapsed = start.elapsed();
    let ok = r.max_forbidden_prob <= 1e-12 && r.gram_max_deviation <= 1e-12 && elapsed < Duration::from_secs(1);
    verdict(
        ok,
        format!(
            "max forbidden prob {:.3e}, Gram deviation {:.3e}, circuit agreement {:.3e}, {:?}",
            r.max_forbidden_prob, r.gram_max_deviation, r.circuit_max_abs_diff, elapsed
        ),
    )
}

fn ac2_general_verification() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (theta, expected_n) in [(FRAC_PI_4, 2), (FRAC_PI_3, 2), (0.3, 5)] {
        let n = min_n(theta).expect("valid theta");
        let r = verify_nogo(theta, n, 1e-10).expect("feasible");
        ok &= n == expected_n && r.max_forbidden_prob <= 1e-10 && r.per_preparation.len() == 1 << n;
        parts.push(format!("theta={theta:.4} n={n} max={:.2e}", r.max_forbidden_prob));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(10);
    verdict(ok, format!("{}; {elapsed:?}", parts.join(", ")))
}

fn ac3_closed_form_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let params = CircuitParams::new(
            n,
            rng.random_range(1e-3..=FRAC_PI_2),
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
        )
        .unwrap();
        let closed = forbidden_amplitude(&params).norm_sqr();
        for _ in 0..5 {
            let x = BitString::from_index(n, rng.random_range(0..1usize << n)).unwrap();
            let simulated = outcome_distribution(&params, &x, &Limits::default()).unwrap()[x.index()];
            worst = worst.max((closed - simulated).abs());
        }
    }
    verdict(worst <= 1e-12, format!("5000 comparisons, max |diff| {worst:.3e}"))
}

fn ac4_analytic_beta() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let theta = rng.random_range(boundary_theta(2)..=FRAC_PI_2);
        if min_n(theta).unwrap() > 2 {
            continue;
        }
        let s = solve_params(theta, 2, DEFAULT_SOLVER_TOL).unwrap();
        worst = worst.max((s.analytic_beta.unwrap() - s.params.beta).abs());
        count += 1;
    }
    verdict(worst <= 1e-9, format!("100 angles, max |beta_analytic - beta_bisection| {worst:.3e}"))
}

fn ac5_helstrom() -> Verdict {
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let theta = FRAC_PI_2 * k as f64 / 50.0;
        let s = sigma_min(theta, 1).unwrap();
        worst = worst.max((s.sigma - (1.0 - theta.sin())).abs());
    }
    let search = random_povm_search(FRAC_PI_3, 1, 100_000, 5).unwrap();
    let floor = 1.0 - FRAC_PI_3.sin();
    let ok = worst <= 1e-9 && search.found && search.min_sigma >= floor - 1e-6;
    verdict(
        ok,
        format!(
            "max |sigma_min - (1 - sin theta)| {worst:.3e}; 1e5-trial search min {:.9} vs {floor:.9}",
            search.min_sigma
        ),
    )
}

fn ac6_zero_iff_condition() -> Verdict {
    let mut mismatches = 0;
    let mut feasible = 0;
    for k in 1..=50 {
        let theta = FRAC_PI_2 * k as f64 / 50.0;
        for n in 1..=4 {
            // condition evaluated in its arctan form, independent of the solver
            let condition = boundary_theta(n) <= theta + 1e-12;
            let s = sigma_min(theta, n).unwrap();
            let zero = if s.feasible {
                s.attained_sigma <= 1e-10
            } else {
                s.sigma <= 1e-10 || s.grid.is_some_and(|g| g.sigma <= 1e-10)
            };
            feasible += condition as usize;
            if zero != condition {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("200 grid cells, {feasible} satisfy the condition, {mismatches} mismatches"))
}

fn ac7_region_csv() -> Verdict {
    let config = RunConfig::try_parse_from(["ontic", "regions"]).unwrap();
    let out = run(config).unwrap();
    let mut lines = out.output.lines();
    let header_ok = lines.next() == Some("delta,n,omega_upper");
    let rows: Vec<(f64, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let n1_worst = rows
        .iter()
        .filter(|r| r.1 == 1)
        .map(|r| (r.2 - (1.0 - r.0)).abs())
        .fold(0.0, f64::max);
    let at_one_zero = rows.iter().filter(|r| r.0 == 1.0).all(|r| r.2 == 0.0);
    let mut monotone = true;
    for n in 2..=4 {
        let prev: Vec<_> = rows.iter().filter(|r| r.1 == n - 1).collect();
        let cur: Vec<_> = rows.iter().filter(|r| r.1 == n).collect();
        monotone &= prev.len() == cur.len() && prev.iter().zip(&cur).all(|(a, b)| a.0 == b.0 && b.2 <= a.2);
    }
    let ok = header_ok && rows.len() == 4 * 512 && n1_worst <= 1e-9 && at_one_zero && monotone;
    verdict(
        ok,
        format!(
            "{} rows, n=1 max |omega - (1 - delta)| {n1_worst:.2e}, zero at delta=1: {at_one_zero}, non-increasing in n: {monotone}",
            rows.len()
        ),
    )
}

fn ac8_bound_suite() -> Verdict {
    let params = solve_params(FRAC_PI_3, 2, DEFAULT_SOLVER_TOL).unwrap().params;
    let (m, r) = make_reference_model(ReferenceKind::PsiOntic, &params).unwrap();
    let ontic_rep = max_deviation(&m, &r, &params).unwrap();
    let ontic_ok = ontic_rep.epsilon <= 1e-12 && ontic_rep.d == 1.0;

    let params = solve_params(FRAC_PI_4, 2, DEFAULT_SOLVER_TOL).unwrap().params;
    let (m, r) = make_reference_model(ReferenceKind::FullyOverlapping, &params).unwrap();
    let full_rep = max_deviation(&m, &r, &params).unwrap();
    let full_ok = full_rep.epsilon >= 0.25 - 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for trial in 0..1000 {
        let l = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let theta = rng.random_range(boundary_theta(n)..=FRAC_PI_2);
        let n = n.max(min_n(theta).unwrap());
        let params = solve_params(theta, n, DEFAULT_SOLVER_TOL).unwrap().params;
        let m = OntModel::new(random_distribution(&mut rng, l), random_distribution(&mut rng, l)).unwrap();
        let resp = if trial % 2 == 0 {
            posterior_response(&m, &params).unwrap()
        } else {
            let rows = (0..l.pow(n as u32)).map(|_| random_distribution(&mut rng, 1 << n)).collect();
            ResponseTable::new(n, l, rows).unwrap()
        };
        let rep = deviation_against(&m, &resp, &params).unwrap();
        let bound_ok = rep.d >= 1.0 - 2.0 * rep.epsilon.powf(1.0 / n as f64) - 1e-9;
        let chain_ok = rep.omega.powi(n as i32) <= 2f64.powi(n as i32) * rep.epsilon + 1e-9;
        min_slack = min_slack.min(rep.d - rep.d_lower_bound);
        if !(bound_ok && chain_ok) {
            failures += 1;
        }
    }
    verdict(
        ontic_ok && full_ok && failures == 0,
        format!(
            "psi-ontic eps {:.2e} D {}; fully-overlapping eps {:.6}; 1000 random models, {failures} violations, min D - bound {min_slack:.3e}",
            ontic_rep.epsilon, ontic_rep.d, full_rep.epsilon
        ),
    )
}

fn ac9_product_lemma() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let l = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let m = OntModel::new(random_distribution(&mut rng, l), random_distribution(&mut rng, l)).unwrap();
        let products: Vec<Vec<f64>> = BitString::all(n).unwrap().map(|x| product_model(&m, &x).unwrap()).collect();
        let refs: Vec<&[f64]> = products.iter().map(|v| v.as_slice()).collect();
        // exhaustive sum of the pointwise minimum over Lambda^n
        let lhs = overlap(&refs).unwrap();
        let rhs = overlap(&[m.mu0(), m.mu1()]).unwrap().powi(n as i32);
        worst = worst.max((lhs - rhs).abs());
    }
    verdict(worst <= 1e-9, format!("500 random models, max |omega({{mu_x}}) - omega^n| {worst:.3e}"))
}

fn ac10_monte_carlo() -> Verdict {
    let params = solve_params(FRAC_PI_3, 2, DEFAULT_SOLVER_TOL).unwrap().params;
    let x = BitString::from_bits(&[0, 1]).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [0.1, 0.5] {
        let (m, _) = make_reference_model(ReferenceKind::Partial(q), &params).unwrap();
        let est = sample_overlap_region(&m, &x, 1_000_000, 10).unwrap();
        let target = q * q;
        let se = (target * (1.0 - target) / est.samples as f64).sqrt();
        let z = (est.frequency - target).abs() / se;
        ok &= z <= 3.0;
        parts.push(format!("q={q}: freq {:.6} vs {target:.4} ({z:.2} SE)", est.frequency));
    }
    verdict(ok, parts.join(", "))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 two-qubit exact case", ac1_two_qubit),
        ("AC2 general verification", ac2_general_verification),
        ("AC3 closed-form oracle", ac3_closed_form_oracle),
        ("AC4 analytic n=2 beta", ac4_analytic_beta),
        ("AC5 Helstrom consistency", ac5_helstrom),
        ("AC6 zero iff condition", ac6_zero_iff_condition),
        ("AC7 region CSV", ac7_region_csv),
        ("AC8 bound suite", ac8_bound_suite),
        ("AC9 product lemma", ac9_product_lemma),
        ("AC10 Monte Carlo q^2", ac10_monte_carlo),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.2?})", v.detail, start.elapsed());
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
