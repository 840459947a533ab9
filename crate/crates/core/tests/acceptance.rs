//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use gdprox::constructions::{
    default_eta_grid, default_t_grid, nonsmooth_experiment, EXACT_GAP_MAX_N,
};
use gdprox::distributions::SampleSet;
use gdprox::generalization::{
    check_loss_assumption, excess_rate_experiment, hp_experiment, ClipSpec, ShiftedBall,
};
use gdprox::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

const SEED: u64 = 20_240_611;

fn hinge_cfg(n: usize) -> GdConfig {
    GdConfig::one_over_l_sqrt_t(1.0, n)
}

fn c1_expectation() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [64, 256, 1024] {
        let s = proximity_experiment(
            &hinge_objective(),
            &hinge_distribution(),
            &hinge_cfg(n),
            n,
            500,
            SEED,
            0.05,
        )
        .expect("experiment runs");
        let above = (0..s.mean.len())
            .filter(|&t| s.mean[t] > s.bound_expectation[t])
            .count();
        let half = s.fraction_below_half_bound();
        ok &= above == 0 && half >= 0.95;
        let worst = (1..s.mean.len())
            .map(|t| s.mean[t] / s.bound_expectation[t])
            .fold(0.0, f64::max);
        notes.push(format!(
            "n={n}: above={above} below_half={half:.3} max_ratio={worst:.4}"
        ));
    }
    (ok, notes.join("; "))
}

fn c2_highprob() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [64, 256, 1024] {
        let s = proximity_experiment(
            &hinge_objective(),
            &hinge_distribution(),
            &hinge_cfg(n),
            n,
            500,
            SEED + 1,
            0.05,
        )
        .expect("experiment runs");
        let max = s.max_distance();
        ok &= s.exceed_fraction <= 0.05 + 0.02 && max <= 10.0;
        notes.push(format!(
            "n={n}: exceed={:.4} max_dist={max:.4}",
            s.exceed_fraction
        ));
    }
    (ok, notes.join("; "))
}

/// Brute force over all `2^(2n)` sign vectors.
fn brute_force_gap(n: usize) -> f64 {
    let total = 1u64 << (2 * n);
    let mut hits = 0u64;
    for bits in 0..total {
        let s: i64 = (0..2 * n)
            .map(|i| {
                let sign = if bits >> i & 1 == 1 { 1 } else { -1 };
                if i < n {
                    sign
                } else {
                    -sign
                }
            })
            .sum();
        // |mean z - mean z'| >= 1/sqrt(n)
        if (s.abs() as f64) / n as f64 >= 1.0 / (n as f64).sqrt() - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn c3_linear_lower_bound() -> Outcome {
    let mut ok = true;
    let min = (1..=EXACT_GAP_MAX_N)
        .map(|n| gap_probability_exact(n).unwrap())
        .fold(f64::INFINITY, f64::min);
    ok &= min >= 0.1;
    let brute = brute_force_gap(4);
    let exact4 = gap_probability_exact(4).unwrap();
    ok &= exact4 == brute && brute == 186.0 / 256.0;
    let n = 10_000;
    let reference = gap_probability_binomial(n);
    let (p, se) = gap_probability_mc(n, 20_000, SEED).unwrap();
    ok &= (p - reference).abs() <= 3.0 * se && p >= 0.1;
    let (p4, se4) = gap_probability_mc(4, 20_000, SEED).unwrap();
    ok &= (p4 - exact4).abs() <= 3.0 * se4;
    (
        ok,
        format!(
            "min_exact[1..40]={min:.4} exact(4)={exact4:.6} brute(4)={brute:.6} mc(1e4)={p:.4}+-{se:.4} ref={reference:.4} mc(4)={p4:.4}+-{se4:.4}"
        ),
    )
}

fn c4_nonsmooth_lower_bound() -> Outcome {
    let steps = 64;
    let c =
        NonsmoothConstruction::new(1.0, 1.0 / (steps as f64).sqrt(), steps, 32, 2 * steps).unwrap();
    let r = nonsmooth_experiment(&c, 2000, SEED).expect("experiment runs");
    let ok = r.checks_run > 0
        && r.checks_matched == r.checks_run
        && r.checks_lower_bound == r.checks_run
        && r.joint_event.0 >= 0.15;
    (
        ok,
        format!(
            "joint={:.4}+-{:.4} checks={} matched={} norm_bound={} max_dev={:.2e} fixed_origin={:.4}",
            r.joint_event.0,
            r.joint_event.1,
            r.checks_run,
            r.checks_matched,
            r.checks_lower_bound,
            r.max_deviation,
            r.fixed_origin.0
        ),
    )
}

const GN_LIST: [usize; 4] = [100, 1_000, 10_000, 100_000];

fn gn_fit() -> (PowerLawFit, Vec<f64>) {
    let eta = default_eta_grid();
    let t = default_t_grid();
    let vals: Vec<f64> = GN_LIST
        .iter()
        .map(|&n| gn_grid_optimize(1.0, n, &eta, &t).unwrap().value)
        .collect();
    let x = GN_LIST.iter().map(|&n| n as f64).collect();
    (
        fit_power_law(&RatePoints::new(x, vals.clone()).unwrap()).unwrap(),
        vals,
    )
}

fn c5_gn_rate() -> Outcome {
    let (fit, vals) = gn_fit();
    let ok = exponent_in(&fit, -0.30, -0.20) && fit.r_squared >= 0.98;
    (
        ok,
        format!(
            "G={vals:?} exponent={:.4} r2={:.5}",
            fit.exponent, fit.r_squared
        ),
    )
}

fn c6_gtilde() -> Outcome {
    let (g_fit, _) = gn_fit();
    let ns = [64usize, 128, 256, 512, 1024, 2048];
    let terms: Vec<f64> = ns
        .iter()
        .map(|&n| {
            gtilde_terms(
                &hinge_objective(),
                &hinge_distribution(),
                &hinge_cfg(n),
                n,
                200,
                SEED + n as u64,
                1.0,
                10_000,
            )
            .unwrap()
            .proximity_term
            .0
        })
        .collect();
    let fit = fit_power_law(
        &RatePoints::new(ns.iter().map(|&n| n as f64).collect(), terms.clone()).unwrap(),
    )
    .unwrap();
    let ok = fit.exponent <= -0.4 && fit.exponent < g_fit.exponent;
    (
        ok,
        format!(
            "proximity_term={terms:?} exponent={:.4} (G exponent {:.4})",
            fit.exponent, g_fit.exponent
        ),
    )
}

fn unit_ball_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r: f64 = rng.gen_range(0.0..1.0);
    if norm == 0.0 {
        return v;
    }
    v.iter().map(|x| x / norm * r).collect()
}

fn random_glm(rng: &mut ChaCha8Rng) -> (ConvexObjective, SampleSet) {
    let d = rng.gen_range(1..=8);
    let n = rng.gen_range(1..=64);
    let hinge = rng.gen_bool(0.5);
    let loss = if hinge {
        ScalarLoss::hinge()
    } else {
        ScalarLoss::absolute(rng.gen_range(0.5..2.0)).unwrap()
    };
    let inst = (0..n)
        .map(|_| {
            let y = if hinge {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.gen_range(-1.0..1.0)
            };
            Instance::glm(unit_ball_point(rng, d), y)
        })
        .collect();
    (
        ConvexObjective::glm(loss, d),
        SampleSet::from_instances(inst).unwrap(),
    )
}

fn c7_optimization_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (obj, s) = random_glm(&mut rng);
        let radius = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let eta = 10f64.powf(rng.gen_range(-2.0..0.0));
        let steps = rng.gen_range(10..=500);
        let cfg = GdConfig::new(eta, steps);
        let w = average_iterate(&gd_run_empirical(&obj, &s, &cfg).unwrap());
        let oracle = constrained_erm_oracle(&obj, &s, radius, 20_000).unwrap();
        let gap = empirical_risk(&s, &obj, &w).unwrap() - oracle.value;
        let bound = optimization_bound(eta, obj.lipschitz(), radius, steps) + oracle.tolerance;
        if gap > bound {
            violations += 1;
        }
        worst = worst.max(gap / bound);
    }
    (
        violations == 0,
        format!("instances=50 violations={violations} max_gap/bound={worst:.4}"),
    )
}

fn c8_excess_rate() -> Outcome {
    let ns = [32usize, 128, 512, 2048];
    let rows = excess_rate_experiment(
        &hinge_distribution(),
        &hinge_objective(),
        &ns,
        200,
        SEED,
        2.0,
        ORACLE_BUDGET,
    )
    .unwrap();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let se: Vec<f64> = rows.iter().map(|r| r.std_err).collect();
    let nonneg = rows.iter().all(|r| r.mean >= -r.tolerance);
    let pts = RatePoints::new(ns.iter().map(|&n| n as f64).collect(), means.clone());
    match pts.and_then(|p| fit_power_law(&p)) {
        Ok(fit) => (
            fit.exponent <= -0.4 && nonneg,
            format!(
                "mean_excess={means:?} se={se:?} slope={:.4} r2={:.4}",
                fit.exponent, fit.r_squared
            ),
        ),
        Err(e) => (false, format!("fit failed: {e}; means={means:?}")),
    }
}

fn c9_hp_quantiles() -> Outcome {
    let spec = ClipSpec::new(1.0, 2.0).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [256usize, 1024] {
        let r = hp_experiment(
            &hinge_distribution(),
            &hinge_objective(),
            &spec,
            n,
            &hinge_cfg(n),
            1000,
            SEED + n as u64,
            &[0.1, 0.01],
            ORACLE_BUDGET,
        )
        .unwrap();
        let row = r.rows.iter().find(|row| row.delta == 0.01).unwrap();
        ok &= row.quantile <= row.bound;
        notes.push(format!(
            "n={n}: q99={:.4e} bound={:.4}",
            row.quantile, row.bound
        ));
    }
    (ok, notes.join("; "))
}

const TRIALS: usize = 10_000;

/// Each property runs `TRIALS` randomized trials and returns its violation count.
fn c10_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let mut report = Vec::new();
    let mut total = 0usize;
    let mut record = |name: &str, v: usize, report: &mut Vec<String>| {
        total += v;
        report.push(format!("{name}={v}"));
    };

    let random_loss = |rng: &mut ChaCha8Rng| -> ScalarLoss {
        let l = rng.gen_range(0.1..3.0);
        match rng.gen_range(0..4) {
            0 => ScalarLoss::hinge(),
            1 => ScalarLoss::linear(l).unwrap(),
            2 => ScalarLoss::scaled_linear(l, rng.gen_range(0.01..1.0)).unwrap(),
            _ => ScalarLoss::absolute(l).unwrap(),
        }
    };

    // convexity of the loss and monotonicity of its subgradient
    let mut v = 0;
    for _ in 0..TRIALS {
        let loss = random_loss(&mut rng);
        let y = rng.gen_range(-1.0..1.0);
        let a = rng.gen_range(-5.0..5.0);
        let ap = rng.gen_range(-5.0..5.0);
        let lam = rng.gen_range(0.0..1.0);
        let m = lam * a + (1.0 - lam) * ap;
        let tol = 1e-12 * (1.0 + loss.value(a, y).abs() + loss.value(ap, y).abs());
        if loss.value(m, y) > lam * loss.value(a, y) + (1.0 - lam) * loss.value(ap, y) + tol {
            v += 1;
        }
        if (loss.subgrad(a, y) - loss.subgrad(ap, y)) * (a - ap) < -1e-12 {
            v += 1;
        }
    }
    record("convexity_monotonicity", v, &mut report);

    // Lipschitz in the prediction and in w
    let mut v = 0;
    for _ in 0..TRIALS {
        let loss = random_loss(&mut rng);
        let y = rng.gen_range(-1.0..1.0);
        let a = rng.gen_range(-5.0..5.0);
        let ap = rng.gen_range(-5.0..5.0);
        let l = loss.lipschitz;
        if (loss.value(a, y) - loss.value(ap, y)).abs() > l * (a - ap).abs() * (1.0 + 1e-12) + 1e-12
        {
            v += 1;
        }
        let d = rng.gen_range(1..=8);
        let obj = ConvexObjective::glm(loss, d);
        let z = Instance::glm(unit_ball_point(&mut rng, d), y);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let wp: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dist = w
            .iter()
            .zip(&wp)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let diff = instance_value(&obj, &w, &z).unwrap() - instance_value(&obj, &wp, &z).unwrap();
        if diff.abs() > l * dist * (1.0 + 1e-12) + 1e-12 {
            v += 1;
        }
        if instance_subgrad(&obj, &w, &z).unwrap().norm() > l * (1.0 + 1e-12) {
            v += 1;
        }
    }
    record("lipschitz", v, &mut report);

    // every GD step moves by at most eta L
    let mut v = 0;
    for _ in 0..TRIALS {
        let d = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=12);
        let loss = random_loss(&mut rng);
        let obj = ConvexObjective::glm(loss, d);
        let inst = (0..n)
            .map(|_| Instance::glm(unit_ball_point(&mut rng, d), rng.gen_range(-1.0..1.0)))
            .collect();
        let s = SampleSet::from_instances(inst).unwrap();
        let cfg = GdConfig::new(rng.gen_range(0.001..1.0), rng.gen_range(1..=20));
        let run = gd_run_lean(&obj, &s.measure(), &cfg).unwrap();
        if run.max_step > cfg.eta * obj.lipschitz() * (1.0 + 1e-12) {
            v += 1;
        }
    }
    record("step_size", v, &mut report);

    // clip idempotence and no increase of the hinge loss for labels +-1
    let mut v = 0;
    let hinge = ScalarLoss::hinge();
    let spec = ClipSpec::new(1.0, 2.0).unwrap();
    if check_loss_assumption(&hinge, &spec, &[-1.0, 1.0]).is_err() {
        v += 1;
    }
    for _ in 0..TRIALS {
        let b = rng.gen_range(0.1..3.0);
        let sp = ClipSpec::new(b, 1.0).unwrap();
        let a = rng.gen_range(-10.0..10.0);
        let once = clip(a, &sp);
        if clip(once, &sp) != once || once.abs() > b {
            v += 1;
        }
        let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if hinge.value(clip(a, &spec), y) > hinge.value(a, y) {
            v += 1;
        }
    }
    record("clip", v, &mut report);

    // contraction value of the shifted ball does not depend on its center
    let mut v = 0;
    for trial in 0..TRIALS {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let inst = (0..n)
            .map(|_| {
                Instance::glm(
                    unit_ball_point(&mut rng, d),
                    if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                )
            })
            .collect();
        let s = SampleSet::from_instances(inst).unwrap();
        let radius = rng.gen_range(0.0..3.0);
        let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let origin = ShiftedBall::new(WeightVector::zeros(d), radius).unwrap();
        let shifted = ShiftedBall::new(WeightVector::from_vec(center), radius).unwrap();
        let a = rademacher_glm_ball(&s, &hinge, &origin, 100, trial as u64).unwrap();
        let b = rademacher_glm_ball(&s, &hinge, &shifted, 100, trial as u64).unwrap();
        if a.contraction != b.contraction {
            v += 1;
        }
    }
    record("shift_invariance", v, &mut report);

    // closed forms against the engine
    let mut v = 0;
    for r in 0..TRIALS {
        if r % 2 == 0 {
            let lip = rng.gen_range(0.1..3.0);
            let eta = rng.gen_range(0.001..1.0);
            let n = rng.gen_range(1..=40);
            let steps = rng.gen_range(1..=30);
            let c = LinearConstruction::new(lip, rng.gen_range(1..=3)).unwrap();
            let s = sample(&c.distribution(), n, SEED, r as u64).unwrap();
            let mean = s.instances.iter().map(|z| z.label).sum::<f64>() / n as f64;
            let traj = gd_run_empirical(&c.objective(), &s, &GdConfig::new(eta, steps)).unwrap();
            for (t, w) in traj.iterates.iter().enumerate() {
                if (w[0] - linear_closed_form(lip, eta, mean, t)).abs() > 1e-12
                    || w[1..].iter().any(|&x| x != 0.0)
                {
                    v += 1;
                    break;
                }
            }
        } else {
            let steps = rng.gen_range(1..=16);
            let n = rng.gen_range(1..=16);
            let dim = rng.gen_range(steps + 1..=2 * steps + 4);
            let c = NonsmoothConstruction::new(
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.01..1.0),
                steps,
                n,
                dim,
            )
            .unwrap();
            let mut inst: Vec<Instance> = (0..n)
                .map(|_| Instance::scalar(if rng.gen_bool(0.3) { 1.0 } else { 0.0 }))
                .collect();
            let k = rng.gen_range(0..n);
            inst[k] = Instance::scalar(1.0);
            let s = SampleSet::from_instances(inst).unwrap();
            let chk = nonsmooth_trajectory_check(&c, &s, steps).unwrap();
            if !chk.matches || !chk.lower_bound_holds {
                v += 1;
            }
        }
    }
    record("closed_form_vs_engine", v, &mut report);

    (
        total == 0,
        format!("trials={TRIALS} each; violations: {}", report.join(" ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        (
            "1 proximity in expectation",
            c1_expectation,
            Some(Duration::from_secs(120)),
        ),
        ("2 proximity high probability", c2_highprob, None),
        (
            "3 linear lower bound",
            c3_linear_lower_bound,
            Some(Duration::from_secs(60)),
        ),
        ("4 nonsmooth lower bound", c4_nonsmooth_lower_bound, None),
        ("5 G(n) rate", c5_gn_rate, None),
        ("6 G-tilde versus G", c6_gtilde, None),
        ("7 optimization bound", c7_optimization_bound, None),
        (
            "8 excess-risk rate",
            c8_excess_rate,
            Some(Duration::from_secs(180)),
        ),
        (
            "9 clipped high-probability quantiles",
            c9_hp_quantiles,
            None,
        ),
        ("10 property suites", c10_properties, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let (mut ok, detail) = run();
        let elapsed = start.elapsed();
        let mut timing = format!("{:.2}s", elapsed.as_secs_f64());
        if let Some(limit) = limit {
            if elapsed > limit {
                ok = false;
                timing.push_str(&format!(" > limit {}s", limit.as_secs()));
            }
        }
        println!(
            "criterion {name}: {} [{timing}] {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
