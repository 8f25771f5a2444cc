use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use chainbell::chained::{gamma_constant, quantum_in};
use chainbell::experiment::{
    calibrate_visibility, estimate_in, procrustean_concentrate, reported_minimum, run_table1_protocol,
    simulate_counts, ErrorMethod, EstimateOptions, NoiseModel, ProtocolConfig,
};
use chainbell::hidden_variable::{
    bell_bound_analytic, bell_bound_bruteforce, leggett_bound, violation_margin, LeggettConfig, LeggettModel,
};
use chainbell::polytope::{appendix_a_check, certify, lp_curve, sample_nonsignaling, theorem1_check, BoxShape};
use chainbell::qudit::{born_joint_table, make_maximally_entangled, SchmidtState, SettingsFamily};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

fn gamma_formula() -> Outcome {
    let start = Instant::now();
    let g2 = gamma_constant(2).unwrap();
    let g3 = gamma_constant(3).unwrap();
    let elapsed = start.elapsed();
    let e2 = (g2 - PI * PI / 16.0).abs();
    let e3 = (g3 - PI * PI / 9.0).abs();
    outcome(
        e2 <= 1e-12 && e3 <= 1e-12 && elapsed < Duration::from_millis(1),
        format!("|err| d=2 {e2:.1e}, d=3 {e3:.1e}; {elapsed:?}"),
    )
}

fn quantum_asymptotics() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for d in 2..=6 {
        let g = gamma_constant(d).unwrap();
        for n in [8, 16, 32, 64] {
            let i_n = quantum_in(d, n).unwrap().value;
            let dev = (n as f64 * i_n - 2.0 * g).abs();
            let allowed = 10.0 * g / n as f64;
            worst = worst.max(dev / allowed);
            pass &= dev <= allowed;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        pass && elapsed < Duration::from_secs(10),
        format!("worst |N I_N - 2 gamma| / (10 gamma / N) = {worst:.3}; {elapsed:?}"),
    )
}

/// `I_N` from amplitudes `<x_a| <y_b| psi>` written out in the computational
/// basis, without the library's measurement vectors or joint tables.
fn born_oracle(d: usize, n: usize) -> f64 {
    let df = d as f64;
    let nf = n as f64;
    let alpha = |a: usize| (a as f64 - 0.5) / nf;
    let beta = |b: usize| b as f64 / nf;
    let prob = |a: usize, b: usize, x: usize, y: usize| -> f64 {
        let amp: Complex64 = (0..d)
            .map(|j| {
                let phase = 2.0 * PI / df * j as f64 * ((x as f64 - alpha(a)) - (y as f64 - beta(b)));
                Complex64::from_polar(1.0, -phase)
            })
            .sum::<Complex64>()
            / (df * df.sqrt());
        amp.norm_sqr()
    };
    let mut total = 0.0;
    for i in 1..=n {
        let next = i % n + 1;
        let shift = usize::from(i == n);
        for x in 0..d {
            for y in 0..d {
                total += prob(i, i, x, y) * ((x + d - y) % d) as f64;
                total += prob(next, i, x, y) * ((y + 2 * d - x - shift) % d) as f64;
            }
        }
    }
    total
}

fn qubit_closed_form() -> Outcome {
    let psi = make_maximally_entangled(2).unwrap();
    let mut worst_lib: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for n in 1..=64 {
        let closed = 2.0 * n as f64 * (PI / (4.0 * n as f64)).sin().powi(2);
        let t = born_joint_table(&psi, &SettingsFamily::new(2, n).unwrap()).unwrap();
        let lib = chainbell::chained::evaluate_in(&t).unwrap().value;
        worst_lib = worst_lib.max((lib - closed).abs());
        worst_oracle = worst_oracle.max((born_oracle(2, n) - closed).abs());
    }
    let mut worst_qudit: f64 = 0.0;
    for d in 3..=5 {
        for n in [1, 2, 5, 9] {
            worst_qudit = worst_qudit.max((born_oracle(d, n) - quantum_in(d, n).unwrap().value).abs());
        }
    }
    outcome(
        worst_lib <= 1e-10 && worst_oracle <= 1e-10 && worst_qudit <= 1e-10,
        format!(
            "max |I_N - 2N sin^2(pi/4N)| library {worst_lib:.1e}, oracle {worst_oracle:.1e}; \
             oracle vs library d=3..5 {worst_qudit:.1e}"
        ),
    )
}

fn reported_bounds() -> Outcome {
    let b2 = bell_bound_analytic(2).unwrap().bound;
    let b3 = bell_bound_analytic(3).unwrap().bound;
    let lm = leggett_bound(LeggettConfig {
        n_settings: 6,
        model: LeggettModel::UniformSphere,
    })
    .unwrap()
    .bound;
    let mut pass = b2 == 1.0 && b3 == 16.0 / 27.0 && lm == 0.5;
    let mut brute = Vec::new();
    for (d, max_n) in [(2usize, 6usize), (3, 3)] {
        for n in 1..=max_n {
            let v = bell_bound_bruteforce(d, n).unwrap().bound;
            pass &= v == (d - 1) as f64;
            brute.push(v);
        }
    }
    let loose = bell_bound_bruteforce(3, 3).unwrap().bound > b3;
    pass &= loose;
    outcome(
        pass,
        format!("analytic {b2}, {b3:.6}; uniform sphere {lm}; enumerated {brute:?}; d=3 enumeration exceeds analytic: {loose}"),
    )
}

fn violation_margins() -> Outcome {
    let start = Instant::now();
    let bm = violation_margin(0.245, 0.007, &bell_bound_analytic(2).unwrap()).unwrap();
    let lm = violation_margin(
        0.245,
        0.007,
        &leggett_bound(LeggettConfig {
            n_settings: 6,
            model: LeggettModel::UniformSphere,
        })
        .unwrap(),
    )
    .unwrap();
    let bm3 = violation_margin(0.524, 0.006, &bell_bound_analytic(3).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let pass = (107.0..=108.0).contains(&bm)
        && (36.0..=37.0).contains(&lm)
        && (11.0..=12.0).contains(&bm3)
        && elapsed < Duration::from_millis(1);
    outcome(pass, format!("d=2 BM {bm:.3}, LM {lm:.3}; d=3 BM {bm3:.3}; {elapsed:?}"))
}

fn theorem_property_suite() -> Outcome {
    let start = Instant::now();
    let mut grid = Vec::new();
    for d in [2, 3] {
        for n in [2, 3] {
            for z in [1, 2, 3] {
                grid.push((d, n, z));
            }
        }
    }
    let mut min_slack = f64::INFINITY;
    let mut failures = 0;
    let mut inequality_failures = 0;
    for k in 0..1000u64 {
        let (d, n, z) = grid[k as usize % grid.len()];
        let c = 1 + (k as usize / grid.len()) % 2;
        let bx = sample_nonsignaling(BoxShape::new(d, z, n, c).unwrap(), k).unwrap();
        if certify(&bx).is_err() {
            failures += 1;
            continue;
        }
        for r in theorem1_check(&bx).unwrap() {
            min_slack = min_slack.min(r.slack);
            if r.slack < -1e-8 {
                failures += 1;
            }
        }
        if !appendix_a_check(&bx).unwrap().passed() {
            inequality_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && inequality_failures == 0 && elapsed < Duration::from_secs(120),
        format!(
            "1000 boxes: min slack {min_slack:.3e}, slack failures {failures}, inequality failures {inequality_failures}; {elapsed:?}"
        ),
    )
}

fn lp_consistency() -> Outcome {
    let start = Instant::now();
    let caps: Vec<f64> = (0..9).map(|k| 0.25 * k as f64).collect();
    let curve = lp_curve(2, 2, 2, &caps).unwrap();
    let elapsed = start.elapsed();
    let within = curve.iter().all(|p| p.max_delta <= 0.5 * p.i_cap + 1e-7);
    let zero = curve[0].max_delta <= 1e-8;
    let monotone = curve.windows(2).all(|w| w[1].max_delta >= w[0].max_delta - 1e-9);
    let values: Vec<String> = curve.iter().map(|p| format!("{:.4}", p.max_delta)).collect();
    outcome(
        within && zero && monotone && elapsed < Duration::from_secs(60),
        format!("max Delta over caps 0..2: [{}]; {elapsed:?}", values.join(", ")),
    )
}

fn estimator_calibration() -> Outcome {
    let psi = make_maximally_entangled(2).unwrap();
    let t = born_joint_table(&psi, &SettingsFamily::new(2, 6).unwrap()).unwrap();
    let noise = NoiseModel::ideal(2, 1e6);
    let mut within = 0;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..100u64 {
        let r = simulate_counts(&t, &noise, k).unwrap();
        let b = estimate_in(
            &r,
            &EstimateOptions {
                seed: k,
                ..EstimateOptions::default()
            },
        )
        .unwrap();
        let g = estimate_in(
            &r,
            &EstimateOptions {
                method: ErrorMethod::Gaussian,
                ..EstimateOptions::default()
            },
        )
        .unwrap();
        if (b.value - 0.204419).abs() <= 3.0 * b.stderr {
            within += 1;
        }
        worst_ratio = worst_ratio.max((b.stderr - g.stderr).abs() / g.stderr);
    }
    outcome(
        within >= 95 && worst_ratio <= 0.2,
        format!("{within}/100 within 3 stderr; worst bootstrap/Gaussian relative gap {worst_ratio:.3}"),
    )
}

fn calibrated_protocol_demo() -> Outcome {
    let start = Instant::now();
    let ns: Vec<usize> = (1..=12).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in 2..=6 {
        let target = reported_minimum(d).unwrap();
        let mut cfg = ProtocolConfig::standard(d, 1.0, 1e7, ns.clone(), d as u64).unwrap();
        let cal = calibrate_visibility(d, &cfg.noise, &ns, target.value).unwrap();
        cfg.noise.visibility = cal.visibility;
        let run = run_table1_protocol(&cfg).unwrap();
        let value_ok = (run.scan.i_star - target.value).abs() <= 2.0 * target.stderr;
        let argmin_ok = run.scan.argmin_n == target.n;
        pass &= value_ok && argmin_ok;
        parts.push(format!(
            "d={d} V={:.5} I*={:.4} (target {:.3}{}) argmin {} (target {}{})",
            cal.visibility,
            run.scan.i_star,
            target.value,
            if value_ok { "" } else { ", outside 2 sigma" },
            run.scan.argmin_n,
            target.n,
            if argmin_ok { "" } else { ", mismatch" },
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    outcome(pass, format!("{}; {elapsed:?}", parts.join("; ")))
}

fn concentration() -> Outcome {
    let skewed = SchmidtState::new(vec![0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
    let (out, eff) = procrustean_concentrate(&skewed).unwrap();
    let mut pass = eff == 0.4 && out.is_uniform(1e-15);
    let mut worst: f64 = 0.0;
    for d in 2..=8 {
        let psi = make_maximally_entangled(d).unwrap();
        let (same, eff) = procrustean_concentrate(&psi).unwrap();
        worst = worst.max((eff - 1.0).abs());
        pass &= same.amps().iter().zip(psi.amps()).all(|(a, b)| (a - b).abs() <= 1e-15);
    }
    pass &= worst <= 1e-15;
    outcome(pass, format!("skewed efficiency {eff}; uniform inputs |eff - 1| <= {worst:.1e}"))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("gamma formula", gamma_formula),
        ("quantum asymptotics", quantum_asymptotics),
        ("qubit closed form", qubit_closed_form),
        ("hidden-variable bounds", reported_bounds),
        ("violation margins", violation_margins),
        ("theorem property suite", theorem_property_suite),
        ("LP consistency", lp_consistency),
        ("estimator calibration", estimator_calibration),
        ("calibrated protocol", calibrated_protocol_demo),
        ("concentration", concentration),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let o = check();
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
