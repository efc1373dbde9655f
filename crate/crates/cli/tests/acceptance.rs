//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! `cargo test -p caputo-cli --test acceptance`

use std::process::ExitCode;
use std::time::{Duration, Instant};

use caputo::analysis::{
    blowup_bounds_optimized, decay_lower_bound_check_from, estimate_blowup_time_auto,
    fit_blowup_exponent, osgood_blows_up,
};
use caputo::oracle::exact_linear;
use caputo::schemes::solve;
use caputo::verify::{check_gronwall, check_ordering_random, check_sandwich, check_weights};
use caputo::{GridConfig, MlOrder, ProblemSpec, RhsModel, Scheme};
use caputo_cli::{cmd_solve, RunConfig};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

const FINE_STEPS: usize = 8000;

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn linear_exactness() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [0.3, 0.5, 0.8] {
        let problem = ProblemSpec::power_law(g, 1.0, 1.0, 1.0, 1.0)?;
        let mut end_errors = Vec::new();
        let mut max_rel = 0.0;
        for k in [4e-3, 2e-3, 1e-3] {
            let tr = solve(
                &problem,
                &GridConfig::for_horizon(k, 1.0, Scheme::DiffImplicit)?,
            )?;
            let mut worst = 0.0f64;
            for (n, u) in tr.values.iter().enumerate() {
                let exact = exact_linear(problem.gamma, 1.0, 1.0, tr.t(n))?;
                worst = worst.max(((u - exact) / exact).abs());
            }
            let exact_end = exact_linear(problem.gamma, 1.0, 1.0, 1.0)?;
            end_errors.push(((tr.values[tr.len() - 1] - exact_end) / exact_end).abs());
            max_rel = worst;
        }
        // least-squares slope of log(error) against log(k)
        let xs = [4e-3f64, 2e-3, 1e-3].map(f64::ln);
        let ys: Vec<f64> = end_errors.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let order = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let target = 2.0 - g;
        let pass = max_rel <= 5e-3 && (order - target).abs() <= 0.3;
        ok &= pass;
        parts.push(format!(
            "γ={g}: max rel err {max_rel:.2e}, order {order:.2} (want {target:.1}±0.3)"
        ));
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, 10.0);
    Ok((ok, format!("{}; {:.1?}", parts.join("; "), elapsed)))
}

fn sandwich() -> Outcome {
    let start = Instant::now();
    let (ok, detail) = check_sandwich()?;
    let elapsed = start.elapsed();
    Ok((
        ok && within(elapsed, 30.0),
        format!("{detail}; {elapsed:.1?}"),
    ))
}

fn bracket() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [0.3, 0.6, 0.9] {
        for u0 in [0.12, 1.2] {
            let b = blowup_bounds_optimized(MlOrder::new(g)?, 1.0, 2.0, u0)?;
            let problem = ProblemSpec::power_law(g, 1.0, 2.0, u0, 1.5 * b.upper)?;
            let est = estimate_blowup_time_auto(&problem, FINE_STEPS)?;
            let pass = est
                .extrapolated
                .is_some_and(|t| b.lower * 0.95 <= t && t <= b.upper * 1.05);
            ok &= pass;
            parts.push(format!(
                "({g},{u0}): {:.6} in [{:.5},{:.5}]",
                est.extrapolated.unwrap_or(f64::NAN),
                b.lower,
                b.upper
            ));
        }
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, 300.0);
    Ok((ok, format!("{}; {elapsed:.1?}", parts.join(", "))))
}

fn gamma_trend() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (u0, increasing) in [(1.2, true), (0.12, false)] {
        let mut times = Vec::new();
        for g in [0.2, 0.4, 0.6, 0.8] {
            let b = blowup_bounds_optimized(MlOrder::new(g)?, 1.0, 2.0, u0)?;
            let problem = ProblemSpec::power_law(g, 1.0, 2.0, u0, 1.5 * b.upper)?;
            times.push(
                estimate_blowup_time_auto(&problem, FINE_STEPS)?
                    .extrapolated
                    .unwrap_or(f64::NAN),
            );
        }
        let monotone = times
            .windows(2)
            .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        ok &= monotone;
        let shown: Vec<String> = times.iter().map(|t| format!("{t:.4e}")).collect();
        parts.push(format!("u0={u0}: [{}]", shown.join(", ")));
    }
    Ok((ok, parts.join("; ")))
}

fn growth_exponent() -> Outcome {
    let (g, u0, k) = (0.6, 0.12, 1e-4);
    let b = blowup_bounds_optimized(MlOrder::new(g)?, 1.0, 2.0, u0)?;
    let problem = ProblemSpec::power_law(g, 1.0, 2.0, u0, 1.5 * b.upper)?;
    let t_b = estimate_blowup_time_auto(&problem, FINE_STEPS)?
        .extrapolated
        .ok_or("no blow-up time")?;
    let run = problem.with_horizon(1.2 * t_b)?;
    let tr = solve(
        &run,
        &GridConfig::for_horizon(k, run.horizon, Scheme::DiffImplicit)?,
    )?;
    let fit = fit_blowup_exponent(&tr, &run, t_b, 0.2)?;
    let exp_ok = (fit.exponent - fit.theoretical_exponent).abs() <= 0.1;
    let amp_ok = (fit.amplitude / fit.theoretical_amplitude - 1.0).abs() <= 0.25;
    Ok((
        exp_ok && amp_ok,
        format!(
            "u0={u0}, T_b={t_b:.6}: exponent {:.4} (theory {:.1}), amplitude {:.4} (theory {:.5}), {} samples",
            fit.exponent, fit.theoretical_exponent, fit.amplitude, fit.theoretical_amplitude, fit.samples
        ),
    ))
}

fn decay() -> Outcome {
    let problem = ProblemSpec::power_law(0.5, -1.0, 2.0, 1.0, 50.0)?;
    let tr = solve(
        &problem,
        &GridConfig::for_horizon(1e-3, 50.0, Scheme::DiffImplicit)?,
    )?;
    let positive = tr.values.iter().all(|&u| u > 0.0);
    let decreasing = tr.values.windows(2).all(|w| w[1] < w[0]);
    let check = decay_lower_bound_check_from(&tr, &problem, 10.0)?;
    // u(t)·t^{1/(p−1)} over [10, 50]
    let scaled: Vec<f64> = tr
        .values
        .iter()
        .enumerate()
        .filter(|(n, _)| tr.t(*n) >= 10.0)
        .map(|(n, u)| u * tr.t(n))
        .collect();
    let slower = scaled.windows(2).all(|w| w[1] > w[0]);
    Ok((
        positive && decreasing && check.holds && slower && tr.last_time() >= 50.0 - 1e-9,
        format!(
            "positive {positive}, decreasing {decreasing}, bound margin {:.3} over {} samples, u·t increasing {slower}",
            check.margin, check.samples
        ),
    ))
}

fn osgood() -> Outcome {
    let gamma = MlOrder::new(0.5)?;
    let mut agree = 0;
    for p in [1.1, 2.0, 3.0, 0.0, 0.5, 1.0] {
        if osgood_blows_up(&RhsModel::power_law(1.0, p)?, gamma, 1.0)? == (p > 1.0) {
            agree += 1;
        }
    }
    Ok((agree == 6, format!("{agree}/6 agree")))
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let (w, wd) = check_weights()?;
    let (g, gd) = check_gronwall(200)?;
    let (o, od) = check_ordering_random(100)?;
    let elapsed = start.elapsed();
    Ok((
        w && g && o && within(elapsed, 60.0),
        format!("weights: {wd}; gronwall: {gd}; ordering: {od}; {elapsed:.1?}"),
    ))
}

fn determinism() -> Outcome {
    let single = RunConfig {
        u0: 1.2,
        horizon: 0.3,
        k: 1e-4,
        ..RunConfig::default()
    };
    let a = cmd_solve(&single)?;
    let b = cmd_solve(&single)?;
    let mut swept = single.clone();
    swept.set("sweep", "gamma=0.3,0.5,0.7,0.9")?;
    swept.set("sweep", "u0=0.5,1.2")?;
    let runs: Vec<String> = (0..3)
        .map(|_| cmd_solve(&swept))
        .collect::<Result<_, _>>()?;
    let same_sweep = runs.windows(2).all(|w| w[0] == w[1]);
    Ok((
        a == b && same_sweep,
        format!(
            "single run identical {}, sweep of 8 identical over 3 runs {same_sweep}",
            a == b
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("linear exactness", linear_exactness),
        ("sandwich", sandwich),
        ("blow-up bracket", bracket),
        ("gamma trend", gamma_trend),
        ("growth exponent", growth_exponent),
        ("decay regime", decay),
        ("osgood classification", osgood),
        ("property suites", property_suites),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({detail})",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
