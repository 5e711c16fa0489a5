//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Runs the full-resolution experiments (reference mesh with 4225 nodes), so
//! it takes a few minutes in an optimized build.

use std::process::ExitCode;
use std::time::Instant;

use cxsplit::experiments::{reference_discrepancy, ConvergenceReport};
use cxsplit::splitting::{ComplexRational, Rational};
use cxsplit::{
    bond_price_cir2, oracle, run_convergence, run_truncation, Cir2Params, ExperimentConfig, SplittingScheme,
};
use num_traits::{One, Zero};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

fn errors(r: &ConvergenceReport) -> Vec<f64> {
    r.records.iter().map(|x| x.err_weighted).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn in_range(s: Option<f64>, lo: f64, hi: f64) -> bool {
    s.is_some_and(|s| (lo..=hi).contains(&s))
}

fn slope_str(s: Option<f64>) -> String {
    s.map_or_else(|| "none".into(), |s| format!("{s:.3}"))
}

fn coefficient_exactness() -> Outcome {
    let s = SplittingScheme::cdv_fourth_order();
    let alpha_sum: Rational = s.alphas().iter().copied().sum();
    let beta_re: Rational = s.betas().iter().map(|b| b.re).sum();
    let beta_im: Rational = s.betas().iter().map(|b| b.im).sum();
    let re_nonneg = s.betas().iter().all(|b: &ComplexRational| b.re >= Rational::zero());
    let alpha_nonneg = s.alphas().iter().all(|a| *a >= Rational::zero());
    let passed = alpha_sum.is_one() && beta_re.is_one() && beta_im.is_zero() && re_nonneg && alpha_nonneg && s.validate().is_ok();
    outcome(
        "coefficient exactness",
        passed,
        format!("sum alpha = {alpha_sum}, sum beta = {beta_re} + {beta_im}i, Re beta >= 0: {re_nonneg}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results = vec![coefficient_exactness()];

    let base = ExperimentConfig {
        run: cxsplit::experiments::RunConfig {
            timing: false,
            ..Default::default()
        },
        ..Default::default()
    };

    // oracle suites first: they need no experiment
    let checks = oracle::run_all();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({:.2e} > {:.0e})", c.name, c.error, c.tolerance))
        .collect();
    let worst = checks
        .iter()
        .map(|c| format!("{} {:.1e}", c.name, c.error))
        .collect::<Vec<_>>()
        .join("; ");
    results.push(outcome(
        "oracle suites",
        failed.is_empty(),
        if failed.is_empty() { worst } else { failed.join("; ") },
    ));

    let reference = reference_discrepancy(&base, 1.0);
    let conv = run_convergence(&base);
    match (&conv, &reference) {
        (Ok(r), Ok(disc)) => {
            let ok = in_range(r.slope, 3.7, 4.3) && r.failures.is_empty() && *disc <= 1e-9;
            results.push(outcome(
                "4th-order convergence",
                ok,
                format!(
                    "slope {} (errors {}); closed form vs Riccati {:.1e}",
                    slope_str(r.slope),
                    fmt_list(&errors(r)),
                    disc
                ),
            ));
            let at8 = r.records.iter().find(|x| x.n == 8).map(|x| x.err_pointwise_region);
            results.push(outcome(
                "pointwise accuracy at n=8",
                at8.is_some_and(|e| e < 1e-3),
                format!("max error on x+y<=1: {}", at8.map_or("missing".into(), |e| format!("{e:.3e}"))),
            ));
            let im: Vec<f64> = r.records.iter().map(|x| x.im_residue).collect();
            let decreasing = im.iter().all(|v| v.is_finite() && *v > 0.0) && im.windows(2).all(|w| w[1] < w[0]);
            results.push(outcome(
                "imaginary residue decreasing",
                decreasing,
                format!("weighted max|Im u|: {}", fmt_list(&im)),
            ));
        }
        (Err(e), _) | (_, Err(e)) => {
            for name in ["4th-order convergence", "pointwise accuracy at n=8", "imaginary residue decreasing"] {
                results.push(outcome(name, false, format!("run failed: {e}")));
            }
        }
    }

    let mut small_eps = base.clone();
    small_eps.model.epsilon = 0.125;
    match (&conv, run_convergence(&small_eps)) {
        (Ok(a), Ok(b)) => {
            let ratios: Vec<f64> = errors(&b).iter().zip(errors(a)).map(|(x, y)| x / y).collect();
            let within = ratios.iter().all(|r| (1.0 / 3.0..=3.0).contains(r));
            let distinct = bond_price_cir2(&Cir2Params::reference_model(1.0), 1.0, 1.0) != bond_price_cir2(&Cir2Params::reference_model(0.125), 1.0, 1.0);
            let ok = within && distinct && in_range(a.slope, 3.7, 4.3) && in_range(b.slope, 3.7, 4.3);
            results.push(outcome(
                "epsilon robustness",
                ok,
                format!(
                    "ratios eps=0.125/eps=1: {}; slopes {} / {}",
                    ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", "),
                    slope_str(a.slope),
                    slope_str(b.slope)
                ),
            ));
        }
        (_, Err(e)) => results.push(outcome("epsilon robustness", false, format!("run failed: {e}"))),
        (Err(e), _) => results.push(outcome("epsilon robustness", false, format!("run failed: {e}"))),
    }

    match run_truncation(&base) {
        Ok(t) => {
            let err_at = |cut: f64| t.records.iter().find(|r| r.cutoff == cut).map(|r| r.err_weighted);
            let ok = match (err_at(4.0), err_at(16.0), err_at(32.0)) {
                (Some(e4), Some(e16), Some(e32)) => e4.is_finite() && e32 <= 2.0 * e16,
                _ => false,
            };
            let same_width = t.element_widths.windows(2).all(|w| w[0] == w[1]);
            results.push(outcome(
                "truncation boundedness",
                ok && same_width && t.failures.is_empty(),
                format!(
                    "errors at X=4,8,16,32: {}; element width {:?}; blow-up flag {}",
                    fmt_list(&t.records.iter().map(|r| r.err_weighted).collect::<Vec<_>>()),
                    t.element_widths.first(),
                    t.blow_up
                ),
            ));
        }
        Err(e) => results.push(outcome("truncation boundedness", false, format!("run failed: {e}"))),
    }

    let mut strang = base.clone();
    strang.run.scheme = "strang".into();
    let mut lie = base.clone();
    lie.run.scheme = "lie".into();
    lie.run.n_list = vec![1, 2, 4, 8, 16, 32, 64, 128];
    match (run_convergence(&lie), run_convergence(&strang)) {
        (Ok(l), Ok(s)) => results.push(outcome(
            "order separation",
            in_range(l.slope, 0.8, 1.3) && in_range(s.slope, 1.7, 2.3),
            format!("lie slope {} (n up to 128), strang slope {}", slope_str(l.slope), slope_str(s.slope)),
        )),
        (Err(e), _) | (_, Err(e)) => results.push(outcome("order separation", false, format!("run failed: {e}"))),
    }

    let mut all = true;
    for r in &results {
        all &= r.passed;
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.iter().filter(|r| r.passed).count(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
