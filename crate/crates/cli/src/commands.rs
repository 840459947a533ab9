//! The five experiments. Each reads its keys from a [`Config`], writes CSV
//! files into an [`OutputDir`] and returns the list of checks it evaluated.

use std::io::Write;
use std::path::PathBuf;

use gdprox::constructions::{
    default_t_grid, gap_probability_binomial, gap_probability_exact, gap_probability_mc,
    gn_evaluate, gn_grid_optimize, linear_reduction, log_grid, nonsmooth_event_probability,
    nonsmooth_experiment, GnVariant, NonsmoothConstruction, EXACT_GAP_MAX_N,
};
use gdprox::generalization::{excess_rate_experiment, hp_experiment, ClipSpec};
use gdprox::proximity::{gtilde_terms, proximity_experiment, stability_experiment};
use gdprox::ratefit::{exponent_in, fit_power_law, PowerLawFit, RatePoints};
use gdprox::{
    hinge_distribution, hinge_objective, ConvexObjective, FiniteDistribution, GdConfig, Instance,
    Preset, PresetContext, ScalarLoss,
};

use crate::config::{
    require_counts, require_positive, require_probability, rules, Config, EtaRule,
};
use crate::manifest::OutputDir;
use crate::CliError;

/// Named pass/fail results.
#[derive(Debug, Default)]
pub struct Checks {
    lines: Vec<String>,
    failed: usize,
}

impl Checks {
    pub fn add(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        if !ok {
            self.failed += 1;
        }
        self.lines.push(format!(
            "{} {name}: {}",
            if ok { "PASS" } else { "FAIL" },
            detail.as_ref()
        ));
    }

    pub fn note(&mut self, text: impl AsRef<str>) {
        self.lines.push(format!("INFO {}", text.as_ref()));
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

const SEED_DEFAULT: u64 = 1;

/// A named preset, or a GLM distribution given inline by `atoms`, `probs` and `loss`.
#[derive(Clone, Debug)]
enum Problem {
    Named(Preset),
    Inline(ConvexObjective, FiniteDistribution),
}

/// `atoms = x11 x12 : y1; x21 x22 : y2`, `probs = p1, p2`.
fn parse_atoms(text: &str) -> Result<Vec<Instance>, CliError> {
    let bad = |a: &str| {
        CliError::Config(format!(
            "key `atoms`: cannot parse `{a}`; expected `x1 x2 ... : y`"
        ))
    };
    text.split(';')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| {
            let (xs, y) = a.split_once(':').ok_or_else(|| bad(a))?;
            let features = xs
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad(a)))
                .collect::<Result<Vec<_>, _>>()?;
            let label = y.trim().parse::<f64>().map_err(|_| bad(a))?;
            if features.is_empty() {
                return Err(bad(a));
            }
            Ok(Instance::glm(features, label))
        })
        .collect()
}

fn read_problem(cfg: &mut Config, lipschitz: f64) -> Result<Problem, CliError> {
    let atoms: Option<String> = cfg.get_opt("atoms")?;
    let Some(atoms) = atoms else {
        let preset: String = cfg.get("preset", "hinge".to_string())?;
        return Ok(Problem::Named(preset.parse()?));
    };
    if cfg.get_opt::<String>("preset")?.is_some() {
        return Err(CliError::Config(
            "give either `preset` or `atoms`, not both".into(),
        ));
    }
    let atoms = parse_atoms(&atoms)?;
    let probs: Vec<f64> = cfg.get_list("probs", &[])?;
    if probs.len() != atoms.len() {
        return Err(CliError::Config(format!(
            "`probs` has {} entries for {} atoms",
            probs.len(),
            atoms.len()
        )));
    }
    let dim = atoms[0].features.len();
    if atoms.iter().any(|a| a.features.len() != dim) {
        return Err(CliError::Config(
            "all atoms need the same number of features".into(),
        ));
    }
    let loss: String = cfg.get("loss", "hinge".to_string())?;
    let loss = match loss.as_str() {
        "hinge" => ScalarLoss::hinge(),
        "absolute" => ScalarLoss::absolute(lipschitz)?,
        "linear" => ScalarLoss::linear(lipschitz)?,
        other => {
            return Err(CliError::Config(format!(
                "loss must be `hinge`, `absolute` or `linear`, got `{other}`"
            )))
        }
    };
    let dist =
        FiniteDistribution::new(atoms, probs).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Problem::Inline(ConvexObjective::glm(loss, dim), dist))
}

/// Builds the problem for one `n`. The learning-rate rule uses the
/// objective's own Lipschitz constant when it differs from `lipschitz`.
fn build_problem(
    problem: &Problem,
    lipschitz: f64,
    n: usize,
    eta_rule: EtaRule,
    steps: usize,
) -> Result<(ConvexObjective, FiniteDistribution, GdConfig), CliError> {
    let preset = match problem {
        Problem::Named(p) => *p,
        Problem::Inline(obj, dist) => {
            let eta = eta_rule.eta(obj.lipschitz(), steps);
            return Ok((obj.clone(), dist.clone(), GdConfig::new(eta, steps)));
        }
    };
    let mut eta = eta_rule.eta(lipschitz, steps);
    let ctx = PresetContext {
        lipschitz,
        n,
        eta,
        steps,
    };
    let (mut obj, mut dist) = preset.build(&ctx)?;
    if obj.lipschitz() != lipschitz && eta_rule == EtaRule::OneOverLSqrtT {
        eta = eta_rule.eta(obj.lipschitz(), steps);
        (obj, dist) = preset.build(&PresetContext { eta, ..ctx })?;
    }
    Ok((obj, dist, GdConfig::new(eta, steps)))
}

fn fit_rate(x: &[usize], y: &[f64]) -> Result<Option<PowerLawFit>, CliError> {
    if x.len() < 3 {
        return Ok(None);
    }
    let pts = RatePoints::new(x.iter().map(|&v| v as f64).collect(), y.to_vec())?;
    Ok(Some(fit_power_law(&pts)?))
}

pub const PROXIMITY_KEYS: &[&str] = &[
    "preset",
    "atoms",
    "probs",
    "loss",
    "n_list",
    "replicates",
    "eta_rule",
    "eta",
    "t_rule",
    "steps",
    "delta",
    "seed",
    "lipschitz",
    "stability_replicates",
];

pub fn proximity(cfg: &mut Config, out: &mut OutputDir) -> Result<Checks, CliError> {
    cfg.check_keys(PROXIMITY_KEYS)?;
    let lipschitz: f64 = cfg.get("lipschitz", 1.0)?;
    let problem = read_problem(cfg, lipschitz)?;
    let n_list: Vec<usize> = cfg.get_list("n_list", &[64, 256, 1024])?;
    require_counts("n_list", &n_list)?;
    let replicates: usize = cfg.get("replicates", 500)?;
    require_positive("replicates", replicates)?;
    let stab_reps: usize = cfg.get("stability_replicates", 200)?;
    let (eta_rule, t_rule) = rules(cfg)?;
    let delta: f64 = cfg.get("delta", 0.05)?;
    require_probability("delta", delta)?;
    let seed: u64 = cfg.get("seed", SEED_DEFAULT)?;

    let mut checks = Checks::default();
    let mut summary = Vec::new();
    for &n in &n_list {
        let steps = t_rule.steps(n);
        let (obj, dist, gd) = build_problem(&problem, lipschitz, n, eta_rule, steps)?;
        let s = proximity_experiment(&obj, &dist, &gd, n, replicates, seed, delta)?;
        out.write(&format!("proximity_n{n}.csv"), |w| s.write_csv(w))?;
        out.write(&format!("proximity_summary_n{n}.csv"), |w| {
            s.write_summary_csv(w)
        })?;
        let viol = s.expectation_violations(2.0);
        checks.add(
            &format!("n={n} mean distance within expectation bound"),
            viol.is_empty(),
            format!("{} of {} steps above bound + 2 se", viol.len(), steps + 1),
        );
        checks.add(
            &format!("n={n} high-probability exceedance"),
            s.highprob_holds(),
            format!(
                "fraction {:.4} vs delta {delta} + 2 sqrt(delta/{replicates})",
                s.exceed_fraction
            ),
        );
        let mut stab_final = f64::NAN;
        if n >= 2 && stab_reps > 0 {
            let st = stability_experiment(&obj, &dist, &gd, n, stab_reps, seed ^ 0x5742)?;
            out.write(&format!("stability_n{n}.csv"), |w| st.write_csv(w))?;
            checks.add(
                &format!("n={n} triangle inequality"),
                st.triangle_violations == 0,
                format!("{} violations", st.triangle_violations),
            );
            stab_final = st.per_t_distance[steps];
        }
        summary.push((
            n,
            steps,
            gd.eta,
            s.exceed_fraction,
            s.max_distance(),
            viol.len(),
            s.fraction_below_half_bound(),
            stab_final,
            s.mean[steps],
        ));
    }
    out.write("proximity.csv", |w| {
        writeln!(w, "n,steps,eta,exceed_fraction,max_distance,expectation_violations,below_half_bound,stability_final,proximity_final")?;
        for r in &summary {
            writeln!(w, "{},{},{:.12e},{:.6},{:.12e},{},{:.6},{:.12e},{:.12e}", r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7, r.8)?;
        }
        Ok(())
    })?;
    Ok(checks)
}

pub const LOWERBOUND_KEYS: &[&str] = &[
    "n_list",
    "replicates",
    "seed",
    "lipschitz",
    "eta",
    "nonsmooth_n",
    "nonsmooth_steps",
    "nonsmooth_replicates",
];

pub fn lowerbound(cfg: &mut Config, out: &mut OutputDir) -> Result<Checks, CliError> {
    cfg.check_keys(LOWERBOUND_KEYS)?;
    let n_list: Vec<usize> = cfg.get_list("n_list", &[4, 16, 100, 1_000, 10_000])?;
    require_counts("n_list", &n_list)?;
    let replicates: usize = cfg.get("replicates", 20_000)?;
    if replicates < 10_000 {
        return Err(CliError::Config(format!(
            "replicates must be >= 10000, got {replicates}"
        )));
    }
    let seed: u64 = cfg.get("seed", SEED_DEFAULT)?;
    let lipschitz: f64 = cfg.get("lipschitz", 1.0)?;
    let ns_n: usize = cfg.get("nonsmooth_n", 32)?;
    let ns_steps: usize = cfg.get("nonsmooth_steps", 64)?;
    let ns_reps: usize = cfg.get("nonsmooth_replicates", 2000)?;
    require_positive("nonsmooth_n", ns_n)?;
    require_positive("nonsmooth_steps", ns_steps)?;
    require_positive("nonsmooth_replicates", ns_reps)?;
    let eta: f64 = cfg.get("eta", 1.0 / (lipschitz * (ns_steps as f64).sqrt()))?;

    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for &n in &n_list {
        let exact = if n <= EXACT_GAP_MAX_N {
            Some(gap_probability_exact(n)?)
        } else {
            None
        };
        let reference = gap_probability_binomial(n);
        let (p, se) = gap_probability_mc(n, replicates, seed)?;
        let red = linear_reduction(n, replicates, seed)?;
        if let Some(e) = exact {
            checks.add(
                &format!("linear n={n} exact gap >= 0.1"),
                e >= 0.1,
                format!("{e:.6}"),
            );
        }
        checks.add(
            &format!("linear n={n} Monte Carlo agrees with exact"),
            (p - reference).abs() <= 3.0 * se,
            format!("{p:.4} +- {se:.4} vs {reference:.4}"),
        );
        checks.add(
            &format!("linear n={n} gap to the origin frequency >= 0.05"),
            red.fixed_origin.0 >= 0.05,
            format!("{:.4}", red.fixed_origin.0),
        );
        checks.add(
            &format!("linear n={n} reduction from two samples"),
            red.fixed_origin.0
                >= red.two_sample.0 / 2.0 - 3.0 * (red.fixed_origin.1 + red.two_sample.1),
            format!(
                "fixed {:.4} vs two-sample {:.4}",
                red.fixed_origin.0, red.two_sample.0
            ),
        );
        rows.push((n, exact, reference, p, se, red));
    }
    out.write("lowerbound_linear.csv", |w| {
        writeln!(w, "n,exact,binomial,mc,mc_se,two_sample,fixed_origin")?;
        for (n, exact, reference, p, se, red) in &rows {
            let e = exact.map_or(String::new(), |v| format!("{v:.12e}"));
            writeln!(
                w,
                "{n},{e},{reference:.12e},{p:.12e},{se:.12e},{:.12e},{:.12e}",
                red.two_sample.0, red.fixed_origin.0
            )?;
        }
        Ok(())
    })?;

    let con = NonsmoothConstruction::new(lipschitz, eta, ns_steps, ns_n, 2 * ns_steps)?;
    let rep = nonsmooth_experiment(&con, ns_reps, seed)?;
    let ev = nonsmooth_event_probability(ns_n)?;
    checks.add(
        "nonsmooth closed form under the joint event",
        rep.checks_run > 0 && rep.checks_matched == rep.checks_run,
        format!(
            "{} of {} (max deviation {:.2e})",
            rep.checks_matched, rep.checks_run, rep.max_deviation
        ),
    );
    checks.add(
        "nonsmooth norm lower bound",
        rep.checks_run > 0 && rep.checks_lower_bound == rep.checks_run,
        format!("{} of {}", rep.checks_lower_bound, rep.checks_run),
    );
    checks.add(
        "nonsmooth joint event frequency >= 0.15",
        rep.joint_event.0 >= 0.15,
        format!(
            "{:.4} +- {:.4} (exact {:.4})",
            rep.joint_event.0, rep.joint_event.1, ev.p_joint
        ),
    );
    checks.add(
        "nonsmooth gap to the origin frequency >= 0.05",
        rep.fixed_origin.0 >= 0.05,
        format!("{:.4}", rep.fixed_origin.0),
    );
    out.write("lowerbound_nonsmooth.csv", |w| {
        writeln!(w, "quantity,value")?;
        writeln!(w, "n,{ns_n}")?;
        writeln!(w, "steps,{ns_steps}")?;
        writeln!(w, "dim,{}", 2 * ns_steps)?;
        writeln!(w, "eta,{eta:.12e}")?;
        writeln!(w, "gamma,{:.12e}", con.gamma)?;
        writeln!(w, "replicates,{ns_reps}")?;
        writeln!(w, "joint_event,{:.12e}", rep.joint_event.0)?;
        writeln!(w, "joint_event_se,{:.12e}", rep.joint_event.1)?;
        writeln!(w, "p_allzero,{:.12e}", ev.p_allzero)?;
        writeln!(w, "p_allzero_alt,{:.12e}", ev.p_allzero_alt)?;
        writeln!(w, "p_joint,{:.12e}", ev.p_joint)?;
        writeln!(w, "p_joint_lb,{:.12e}", ev.p_joint_lb)?;
        writeln!(w, "checks_run,{}", rep.checks_run)?;
        writeln!(w, "checks_matched,{}", rep.checks_matched)?;
        writeln!(w, "checks_lower_bound,{}", rep.checks_lower_bound)?;
        writeln!(w, "max_deviation,{:.12e}", rep.max_deviation)?;
        writeln!(w, "two_sample,{:.12e}", rep.two_sample.0)?;
        writeln!(w, "fixed_origin,{:.12e}", rep.fixed_origin.0)?;
        Ok(())
    })?;
    Ok(checks)
}

pub const GN_KEYS: &[&str] = &[
    "n_list",
    "lipschitz",
    "eta_min",
    "eta_max",
    "eta_points",
    "t_max_log2",
    "gtilde_n_list",
    "gtilde_replicates",
    "radius",
    "oracle_budget",
    "seed",
];

pub fn gn(cfg: &mut Config, out: &mut OutputDir) -> Result<Checks, CliError> {
    cfg.check_keys(GN_KEYS)?;
    let n_list: Vec<usize> = cfg.get_list("n_list", &[100, 1_000, 10_000, 100_000])?;
    require_counts("n_list", &n_list)?;
    let lipschitz: f64 = cfg.get("lipschitz", 1.0)?;
    let eta_min: f64 = cfg.get("eta_min", 1e-4)?;
    let eta_max: f64 = cfg.get("eta_max", 10.0)?;
    let eta_points: usize = cfg.get("eta_points", 241)?;
    let t_max: u32 = cfg.get("t_max_log2", 20)?;
    if !(eta_min > 0.0 && eta_max >= eta_min) || eta_points == 0 || t_max > 40 {
        return Err(CliError::Config(
            "need 0 < eta_min <= eta_max, eta_points >= 1, t_max_log2 <= 40".into(),
        ));
    }
    let gt_list: Vec<usize> = cfg.get_list("gtilde_n_list", &[64, 128, 256, 512, 1024, 2048])?;
    let gt_reps: usize = cfg.get("gtilde_replicates", 200)?;
    let radius: f64 = cfg.get("radius", 1.0)?;
    let budget: usize = cfg.get("oracle_budget", 10_000)?;
    let seed: u64 = cfg.get("seed", SEED_DEFAULT)?;

    let eta_grid = log_grid(eta_min, eta_max, eta_points);
    let t_grid: Vec<usize> = if t_max == 20 {
        default_t_grid()
    } else {
        (0..=t_max).map(|k| 1usize << k).collect()
    };
    let mut checks = Checks::default();
    checks.note("sup over instances realized as the max over the drift and scaled-drift instances");
    let mut values = Vec::new();
    let mut rows = Vec::new();
    for &n in &n_list {
        let est = gn_grid_optimize(lipschitz, n, &eta_grid, &t_grid)?;
        let d = gn_evaluate(GnVariant::Drift, lipschitz, n, est.eta, est.steps)?;
        let s = gn_evaluate(GnVariant::ScaledDrift, lipschitz, n, est.eta, est.steps)?;
        values.push(est.value);
        rows.push((n, est, d, s));
    }
    out.write("gn.csv", |w| {
        writeln!(
            w,
            "n,g_estimate,eta,steps,drift_erm_gap,drift_norm_term,scaled_erm_gap,scaled_norm_term"
        )?;
        for (n, est, d, s) in &rows {
            writeln!(
                w,
                "{n},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                est.value, est.eta, est.steps, d.erm_gap, d.norm_term, s.erm_gap, s.norm_term
            )?;
        }
        Ok(())
    })?;
    let g_fit = fit_rate(&n_list, &values)?;
    match &g_fit {
        Some(f) => checks.add(
            "G(n) exponent in [-0.30, -0.20]",
            exponent_in(f, -0.30, -0.20),
            format!("exponent {:.4}, r2 {:.5}", f.exponent, f.r_squared),
        ),
        None => checks.note("fewer than three sample sizes: G(n) fit skipped"),
    }

    if !gt_list.is_empty() {
        require_counts("gtilde_n_list", &gt_list)?;
        require_positive("gtilde_replicates", gt_reps)?;
        let obj = hinge_objective();
        let dist = hinge_distribution();
        let mut terms = Vec::new();
        for &n in &gt_list {
            let gd = GdConfig::one_over_l_sqrt_t(obj.lipschitz(), n);
            let t = gtilde_terms(&obj, &dist, &gd, n, gt_reps, seed, radius, budget)?;
            terms.push((n, t));
        }
        out.write("gtilde.csv", |w| {
            writeln!(
                w,
                "n,erm_gap,erm_gap_se,proximity_term,proximity_term_se,oracle_tolerance"
            )?;
            for (n, t) in &terms {
                writeln!(
                    w,
                    "{n},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    t.erm_gap.0,
                    t.erm_gap.1,
                    t.proximity_term.0,
                    t.proximity_term.1,
                    t.oracle_tolerance
                )?;
            }
            Ok(())
        })?;
        let prox: Vec<f64> = terms.iter().map(|t| t.1.proximity_term.0).collect();
        if prox.iter().all(|&v| v > 0.0) {
            if let Some(f) = fit_rate(&gt_list, &prox)? {
                let below_g = g_fit.is_none_or(|g| f.exponent < g.exponent);
                checks.add(
                    "G-tilde proximity exponent <= -0.4 and below G",
                    f.exponent <= -0.4 && below_g,
                    format!("exponent {:.4}", f.exponent),
                );
            }
        } else {
            checks.note("G-tilde proximity term vanished at some n: fit skipped");
        }
    }
    Ok(checks)
}

pub const GENERALIZE_KEYS: &[&str] = &[
    "preset",
    "atoms",
    "probs",
    "loss",
    "n_list",
    "replicates",
    "radius",
    "oracle_budget",
    "seed",
    "hp_n_list",
    "hp_replicates",
    "deltas",
    "clip_b",
    "clip_c",
];

pub fn generalize(cfg: &mut Config, out: &mut OutputDir) -> Result<Checks, CliError> {
    cfg.check_keys(GENERALIZE_KEYS)?;
    let problem = read_problem(cfg, 1.0)?;
    let n_list: Vec<usize> = cfg.get_list("n_list", &[32, 128, 512, 2048])?;
    require_counts("n_list", &n_list)?;
    let replicates: usize = cfg.get("replicates", 200)?;
    require_positive("replicates", replicates)?;
    let radius: f64 = cfg.get("radius", 2.0)?;
    let budget: usize = cfg.get("oracle_budget", gdprox::ORACLE_BUDGET)?;
    let seed: u64 = cfg.get("seed", SEED_DEFAULT)?;
    let hp_list: Vec<usize> = cfg.get_list("hp_n_list", &[256, 1024])?;
    let hp_reps: usize = cfg.get("hp_replicates", 1000)?;
    let deltas: Vec<f64> = cfg.get_list("deltas", &[0.1, 0.01])?;
    for &d in &deltas {
        require_probability("deltas", d)?;
    }
    let spec = ClipSpec::new(cfg.get("clip_b", 1.0)?, cfg.get("clip_c", 2.0)?)?;

    let (obj, dist, _) = build_problem(&problem, 1.0, n_list[0], EtaRule::Explicit(1.0), 1)?;
    if !matches!(obj, ConvexObjective::Glm { .. }) {
        return Err(CliError::Config("generalize needs a GLM problem".into()));
    }
    let mut checks = Checks::default();
    let rows = excess_rate_experiment(&dist, &obj, &n_list, replicates, seed, radius, budget)?;
    out.write("excess_rate.csv", |w| {
        writeln!(w, "n,eta,steps,mean_excess,std_err,oracle_tolerance")?;
        for r in &rows {
            writeln!(
                w,
                "{},{:.12e},{},{:.12e},{:.12e},{:.12e}",
                r.n, r.eta, r.steps, r.mean, r.std_err, r.tolerance
            )?;
        }
        Ok(())
    })?;
    let nonneg = rows.iter().all(|r| r.mean >= -r.tolerance);
    checks.add("mean excess risk nonnegative up to tolerance", nonneg, "");
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    if means.iter().all(|&m| m > 0.0) {
        match fit_rate(&n_list, &means)? {
            Some(f) => checks.add(
                "excess-risk slope <= -0.4",
                f.exponent <= -0.4,
                format!("slope {:.4}, r2 {:.4}", f.exponent, f.r_squared),
            ),
            None => checks.note("fewer than three sample sizes: rate fit skipped"),
        }
    } else {
        checks.note("excess risk is zero at some n: rate fit skipped");
    }

    if !hp_list.is_empty() {
        require_counts("hp_n_list", &hp_list)?;
        require_positive("hp_replicates", hp_reps)?;
        let mut quantile_rows = Vec::new();
        for &n in &hp_list {
            let gd = GdConfig::one_over_l_sqrt_t(obj.lipschitz(), n);
            let r = hp_experiment(&dist, &obj, &spec, n, &gd, hp_reps, seed, &deltas, budget)?;
            out.write(&format!("hp_replicates_n{n}.csv"), |w| {
                r.write_replicates_csv(w)
            })?;
            for row in &r.rows {
                checks.add(
                    &format!("n={n} delta={} quantile below bound", row.delta),
                    row.quantile <= row.bound,
                    format!("{:.4e} <= {:.4}", row.quantile, row.bound),
                );
            }
            quantile_rows.push(r);
        }
        out.write("hp_quantiles.csv", |w| {
            writeln!(w, "n,delta,quantile,bound")?;
            for r in &quantile_rows {
                r.write_quantiles_csv(&mut *w, false)?;
            }
            Ok(())
        })?;
    }
    Ok(checks)
}

pub const RATES_KEYS: &[&str] = &[
    "input",
    "x_column",
    "y_column",
    "se_column",
    "exponent_lo",
    "exponent_hi",
];

fn read_columns(path: &PathBuf, cols: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    let idx: Vec<usize> =
        cols.iter()
            .map(|c| {
                headers.iter().position(|h| h == *c).ok_or_else(|| {
                    CliError::Config(format!("{} has no column `{c}`", path.display()))
                })
            })
            .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); cols.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (k, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                CliError::Config(format!(
                    "{}: column `{}` holds `{field}`",
                    path.display(),
                    cols[k]
                ))
            })?;
            out[k].push(v);
        }
    }
    Ok(out)
}

pub fn rates(cfg: &mut Config, out: &mut OutputDir) -> Result<Checks, CliError> {
    cfg.check_keys(RATES_KEYS)?;
    let input: String = cfg
        .get_opt("input")?
        .ok_or_else(|| CliError::Config("rates needs `input`".into()))?;
    let x_col: String = cfg.get("x_column", "n".to_string())?;
    let y_col: String = cfg
        .get_opt("y_column")?
        .ok_or_else(|| CliError::Config("rates needs `y_column`".into()))?;
    let se_col: Option<String> = cfg.get_opt("se_column")?;
    let lo: Option<f64> = cfg.get_opt("exponent_lo")?;
    let hi: Option<f64> = cfg.get_opt("exponent_hi")?;
    if lo.is_some() != hi.is_some() {
        return Err(CliError::Config(
            "give both exponent_lo and exponent_hi, or neither".into(),
        ));
    }
    if let (Some(l), Some(h)) = (lo, hi) {
        if l > h {
            return Err(CliError::Config(
                "exponent_lo must not exceed exponent_hi".into(),
            ));
        }
    }
    let mut cols = vec![x_col.as_str(), y_col.as_str()];
    if let Some(s) = &se_col {
        cols.push(s.as_str());
    }
    let data = read_columns(&PathBuf::from(&input), &cols)?;
    let mut pts = RatePoints::new(data[0].clone(), data[1].clone())?;
    if se_col.is_some() {
        pts = pts.with_std_err(data[2].clone())?;
    }
    let fit = fit_power_law(&pts)?;
    out.write("rates.csv", |w| {
        writeln!(
            w,
            "x_column,y_column,points,exponent,log_intercept,r_squared"
        )?;
        writeln!(
            w,
            "{x_col},{y_col},{},{:.12e},{:.12e},{:.12e}",
            pts.x.len(),
            fit.exponent,
            fit.log_intercept,
            fit.r_squared
        )
    })?;
    let mut checks = Checks::default();
    match (lo, hi) {
        (Some(l), Some(h)) => checks.add(
            &format!("exponent in [{l}, {h}]"),
            exponent_in(&fit, l, h),
            format!("exponent {:.4}, r2 {:.4}", fit.exponent, fit.r_squared),
        ),
        _ => checks.note(format!(
            "exponent {:.4}, r2 {:.4}",
            fit.exponent, fit.r_squared
        )),
    }
    Ok(checks)
}
