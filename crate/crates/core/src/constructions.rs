//! Explicit instances with closed-form GD trajectories.
//!
//! * [`LinearConstruction`]: `f(w; z) = L z w_1` with `z = +-1` equiprobable.
//!   GD from the origin gives `w_t = -eta L t mean(z) e_1`, so two independent
//!   samples separate linearly in `t`.
//! * [`NonsmoothConstruction`]: `f(w; z) = -(gamma L/2) z <w, 1> + (L/2) max_i(w_i - eps_i, 0)`
//!   with `z ~ Bernoulli(1/(n+1))`. When the sample holds a positive `z`, GD
//!   consumes one coordinate per step and `||w_t||` grows like `eta L sqrt(t)`;
//!   on the all-zero sample it never moves.
//! * [`GnVariant`]: the two deterministic one-dimensional drifts that pin down
//!   the origin-centred guarantee at order `L / n^{1/4}`.
//!
//! All iterate indices follow the engine: `w_t` is the point after `t` steps.

use rand::RngCore;
use rayon::prelude::*;

use crate::distributions::{replicate_rng, FiniteDistribution, SampleSet};
use crate::error::{config, Error, Result};
use crate::gd_engine::{average_iterate, gd_run_empirical, gd_run_population, GdConfig};
use crate::objectives::{ConvexObjective, Instance, LinearObjective, NonsmoothObjective};
use crate::stats::frequency;
use crate::vector::WeightVector;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstruction {
    pub lipschitz: f64,
    pub dim: usize,
}

impl LinearConstruction {
    pub fn new(lipschitz: f64, dim: usize) -> Result<Self> {
        if !(lipschitz > 0.0) || dim == 0 {
            return Err(config("linear construction needs L > 0 and d >= 1"));
        }
        Ok(LinearConstruction { lipschitz, dim })
    }

    pub fn objective(&self) -> ConvexObjective {
        ConvexObjective::Linear(LinearObjective {
            lipschitz: self.lipschitz,
            dim: self.dim,
        })
    }

    pub fn distribution(&self) -> FiniteDistribution {
        FiniteDistribution::new(
            vec![Instance::scalar(1.0), Instance::scalar(-1.0)],
            vec![0.5, 0.5],
        )
        .expect("static distribution")
    }
}

/// First coordinate of `w_t` on the linear construction: `-eta L t mean_z`.
pub fn linear_closed_form(lipschitz: f64, eta: f64, mean_z: f64, t: usize) -> f64 {
    -eta * lipschitz * t as f64 * mean_z
}

/// Largest `n` for [`gap_probability_exact`].
pub const EXACT_GAP_MAX_N: usize = 40;

fn binomial_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// `(sum z - sum z')^2 >= n` is the event `|mean(z) - mean(z')| >= 1/sqrt(n)`.
fn gap_event(n: usize, diff_of_sums: i64) -> bool {
    (diff_of_sums * diff_of_sums) as u128 >= n as u128
}

/// Exact `P(|mean(z) - mean(z')| >= 1/sqrt(n))` for two independent samples of
/// `n` Rademacher signs, by convolving the two binomial count distributions
/// in integer arithmetic.
pub fn gap_probability_exact(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if n > EXACT_GAP_MAX_N {
        return Err(Error::Domain(format!(
            "exact mode supports n <= {EXACT_GAP_MAX_N}, got {n}; use the Monte-Carlo estimate"
        )));
    }
    let row = binomial_row(n);
    let mut favourable: u128 = 0;
    for (k, ck) in row.iter().enumerate() {
        for (kp, ckp) in row.iter().enumerate() {
            // sum z = 2k - n, so the difference of sums is 2(k - k')
            if gap_event(n, 2 * (k as i64 - kp as i64)) {
                favourable += ck * ckp;
            }
        }
    }
    Ok(favourable as f64 / 2f64.powi(2 * n as i32))
}

/// Same probability for any `n`: `k - k' + n ~ Bin(2n, 1/2)`, summed in log space.
pub fn gap_probability_binomial(n: usize) -> f64 {
    let m = 2 * n;
    let mut log_fact = vec![0.0f64; m + 1];
    for i in 1..=m {
        log_fact[i] = log_fact[i - 1] + (i as f64).ln();
    }
    let log_half_pow = -(m as f64) * std::f64::consts::LN_2;
    (0..=m)
        .filter(|&j| gap_event(n, 2 * (j as i64 - n as i64)))
        .map(|j| (log_fact[m] - log_fact[j] - log_fact[m - j] + log_half_pow).exp())
        .sum()
}

/// Number of `+1` signs among `n` fair coin flips drawn from `rng`.
fn count_heads(rng: &mut impl RngCore, n: usize) -> u32 {
    let mut heads = 0;
    let mut left = n;
    while left > 0 {
        let word = rng.next_u64();
        let take = left.min(64);
        let masked = if take == 64 {
            word
        } else {
            word & ((1u64 << take) - 1)
        };
        heads += masked.count_ones();
        left -= take;
    }
    heads
}

/// `(sum z, sum z')` for the replicate's pair of Rademacher samples.
pub fn rademacher_pair_sums(n: usize, seed: u64, replicate: u64) -> (i64, i64) {
    let mut rng = replicate_rng(seed, replicate);
    let k = count_heads(&mut rng, n) as i64;
    let kp = count_heads(&mut rng, n) as i64;
    (2 * k - n as i64, 2 * kp - n as i64)
}

/// Monte-Carlo estimate of the gap probability with its binomial standard error.
pub fn gap_probability_mc(n: usize, replicates: usize, seed: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if replicates < 10_000 {
        return Err(config(format!("need >= 10^4 replicates, got {replicates}")));
    }
    let hits = (0..replicates as u64)
        .into_par_iter()
        .filter(|&r| {
            let (a, b) = rademacher_pair_sums(n, seed, r);
            gap_event(n, a - b)
        })
        .count();
    Ok(frequency(hits, replicates))
}

/// Frequencies behind the reduction from two-sample gaps to gaps against a
/// fixed reference on the linear construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearReduction {
    pub n: usize,
    /// `|w^S_t - w^{S'}_t| >= eta L t / sqrt(n)` for all `t`.
    pub two_sample: (f64, f64),
    /// `|w^S_t - 0| >= eta L t / (2 sqrt(n))` for all `t`.
    pub fixed_origin: (f64, f64),
}

pub fn linear_reduction(n: usize, replicates: usize, seed: u64) -> Result<LinearReduction> {
    if n == 0 || replicates == 0 {
        return Err(config("n and replicates must be positive"));
    }
    let pairs: Vec<(i64, i64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| rademacher_pair_sums(n, seed, r))
        .collect();
    let two = pairs.iter().filter(|(a, b)| gap_event(n, a - b)).count();
    // |mean z| >= 1/(2 sqrt n)  <=>  4 (sum z)^2 >= n
    let fixed = pairs
        .iter()
        .filter(|(a, _)| 4 * (a * a) as u128 >= n as u128)
        .count();
    Ok(LinearReduction {
        n,
        two_sample: frequency(two, replicates),
        fixed_origin: frequency(fixed, replicates),
    })
}

/// Nonsmooth construction with `gamma = 1/(4 sqrt(dT))` and
/// `eps_i = (i/(d+1)) gamma eta L / (2n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonsmoothConstruction {
    pub lipschitz: f64,
    pub eta: f64,
    pub steps: usize,
    pub n: usize,
    pub dim: usize,
    pub gamma: f64,
    pub epsilons: Vec<f64>,
}

impl NonsmoothConstruction {
    pub fn new(lipschitz: f64, eta: f64, steps: usize, n: usize, dim: usize) -> Result<Self> {
        if !(lipschitz > 0.0 && eta > 0.0) || steps == 0 || n == 0 {
            return Err(config("nonsmooth construction needs L, eta, T, n > 0"));
        }
        if dim <= steps {
            return Err(config(format!(
                "nonsmooth construction needs d > T, got d={dim}, T={steps}"
            )));
        }
        let gamma = 1.0 / (4.0 * ((dim * steps) as f64).sqrt());
        let cap = gamma * eta * lipschitz / (2.0 * n as f64);
        let epsilons = (1..=dim)
            .map(|i| i as f64 / (dim + 1) as f64 * cap)
            .collect();
        Ok(NonsmoothConstruction {
            lipschitz,
            eta,
            steps,
            n,
            dim,
            gamma,
            epsilons,
        })
    }

    /// Strict upper bound `gamma eta L / (2n)` on every threshold.
    pub fn epsilon_cap(&self) -> f64 {
        self.gamma * self.eta * self.lipschitz / (2.0 * self.n as f64)
    }

    pub fn objective(&self) -> ConvexObjective {
        ConvexObjective::Nonsmooth(NonsmoothObjective {
            lipschitz: self.lipschitz,
            gamma: self.gamma,
            epsilons: self.epsilons.clone(),
        })
    }

    /// `z = 1` with probability `1/(n+1)`, otherwise `z = 0`.
    pub fn distribution(&self) -> FiniteDistribution {
        let p = 1.0 / (self.n as f64 + 1.0);
        FiniteDistribution::new(
            vec![Instance::scalar(1.0), Instance::scalar(0.0)],
            vec![p, 1.0 - p],
        )
        .expect("valid probabilities")
    }

    pub fn gd_config(&self) -> GdConfig {
        GdConfig::new(self.eta, self.steps)
    }

    /// `w_t = t c 1 - (eta L / 2) sum_{s < t} e_s` with `c = gamma eta L sum(z) / (2n)`,
    /// valid while the sample holds a positive `z` and `t <= d`.
    pub fn closed_form(&self, sum_z: f64, t: usize) -> WeightVector {
        let c = self.gamma * self.eta * self.lipschitz * sum_z / (2.0 * self.n as f64);
        let mut w = WeightVector::from_vec(vec![t as f64 * c; self.dim]);
        for s in 0..t.saturating_sub(1).min(self.dim) {
            w[s] -= 0.5 * self.eta * self.lipschitz;
        }
        w
    }

    /// `(3/8) eta L sqrt(t - 1)`: the norm lower bound for iterate `t >= 1`.
    pub fn norm_lower_bound(&self, t: usize) -> f64 {
        0.375 * self.eta * self.lipschitz * (t.saturating_sub(1) as f64).sqrt()
    }
}

/// Probabilities of the conditioning events on the nonsmooth construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventProbabilities {
    /// `(1 - 1/(n+1))^n`: the sample has no positive `z`.
    pub p_allzero: f64,
    /// `(1 - 1/n)^n`, the variant with `n` in place of `n + 1`.
    pub p_allzero_alt: f64,
    /// `p_allzero (1 - p_allzero)`: `S'` all zero and `S` not.
    pub p_joint: f64,
    /// `0.5 (1 - e^{-1/2})`.
    pub p_joint_lb: f64,
}

pub fn nonsmooth_event_probability(n: usize) -> Result<EventProbabilities> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let nf = n as f64;
    let p = (1.0 - 1.0 / (nf + 1.0)).powi(n as i32);
    Ok(EventProbabilities {
        p_allzero: p,
        p_allzero_alt: (1.0 - 1.0 / nf).powi(n as i32),
        p_joint: p * (1.0 - p),
        p_joint_lb: 0.5 * (1.0 - (-0.5f64).exp()),
    })
}

/// Outcome of comparing an engine run against the closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryCheck {
    pub matches: bool,
    pub lower_bound_holds: bool,
    pub max_deviation: f64,
    /// `min_t ||w_t|| / ((3/8) eta L sqrt(t-1))` over `t >= 2`.
    pub min_norm_ratio: f64,
}

/// Closed-form agreement tolerance.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// Runs GD for `t` steps on `s` and checks the closed form and norm growth.
pub fn nonsmooth_trajectory_check(
    params: &NonsmoothConstruction,
    s: &SampleSet,
    t: usize,
) -> Result<TrajectoryCheck> {
    if t > params.steps {
        return Err(config(format!("t = {t} exceeds T = {}", params.steps)));
    }
    if s.len() != params.n {
        return Err(config(format!(
            "sample has {} points, construction expects {}",
            s.len(),
            params.n
        )));
    }
    let sum_z: f64 = s.instances.iter().map(|z| z.label).sum();
    if !(sum_z > 0.0) {
        return Err(Error::EventNotMet("sample holds no positive z".into()));
    }
    let traj = gd_run_empirical(&params.objective(), s, &GdConfig::new(params.eta, t))?;
    let mut max_dev: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    let mut lb = true;
    for (k, w) in traj.iterates.iter().enumerate() {
        max_dev = max_dev.max(w.distance(&params.closed_form(sum_z, k)));
        if k >= 1 {
            let bound = params.norm_lower_bound(k);
            if w.norm() < bound {
                lb = false;
            }
            if k >= 2 {
                ratio = ratio.min(w.norm() / bound);
            }
        }
    }
    Ok(TrajectoryCheck {
        matches: max_dev <= CLOSED_FORM_TOL,
        lower_bound_holds: lb,
        max_deviation: max_dev,
        min_norm_ratio: ratio,
    })
}

/// Monte-Carlo summary of independent sample pairs on the nonsmooth construction.
#[derive(Clone, Debug, PartialEq)]
pub struct NonsmoothReport {
    pub replicates: usize,
    /// `S` has a positive `z` and `S'` is all zero.
    pub joint_event: (f64, f64),
    /// Closed-form checks run (one per replicate in the joint event).
    pub checks_run: usize,
    pub checks_matched: usize,
    pub checks_lower_bound: usize,
    pub max_deviation: f64,
    /// `||w^S_t - w^{S'}_t|| >= (3/8) eta L sqrt(t-1)` for all `t`.
    pub two_sample: (f64, f64),
    /// `||w^S_t - 0|| >= (3/16) eta L sqrt(t-1)` for all `t`.
    pub fixed_origin: (f64, f64),
}

struct PairOutcome {
    joint: bool,
    check: Option<TrajectoryCheck>,
    two_sample: bool,
    fixed_origin: bool,
}

pub fn nonsmooth_experiment(
    params: &NonsmoothConstruction,
    replicates: usize,
    seed: u64,
) -> Result<NonsmoothReport> {
    if replicates == 0 {
        return Err(config("replicates must be positive"));
    }
    let dist = params.distribution();
    let obj = params.objective();
    let cfg = params.gd_config();
    let outcomes: Vec<PairOutcome> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<PairOutcome> {
            let mut rng = replicate_rng(seed, r);
            let s = SampleSet::from_indices(&dist, dist.draw_indices(&mut rng, params.n), seed, r);
            let sp = SampleSet::from_indices(&dist, dist.draw_indices(&mut rng, params.n), seed, r);
            let has_one = |x: &SampleSet| x.instances.iter().any(|z| z.label > 0.0);
            let joint = has_one(&s) && !has_one(&sp);
            let ts = gd_run_empirical(&obj, &s, &cfg)?;
            let tsp = gd_run_empirical(&obj, &sp, &cfg)?;
            let mut two = true;
            let mut fixed = true;
            for k in 1..=params.steps {
                let b = params.norm_lower_bound(k);
                if ts.iterates[k].distance(&tsp.iterates[k]) < b {
                    two = false;
                }
                if ts.iterates[k].norm() < 0.5 * b {
                    fixed = false;
                }
            }
            let check = if joint {
                Some(nonsmooth_trajectory_check(params, &s, params.steps)?)
            } else {
                None
            };
            Ok(PairOutcome {
                joint,
                check,
                two_sample: two,
                fixed_origin: fixed,
            })
        })
        .collect::<Result<_>>()?;
    let checks: Vec<&TrajectoryCheck> = outcomes.iter().filter_map(|o| o.check.as_ref()).collect();
    Ok(NonsmoothReport {
        replicates,
        joint_event: frequency(outcomes.iter().filter(|o| o.joint).count(), replicates),
        checks_run: checks.len(),
        checks_matched: checks.iter().filter(|c| c.matches).count(),
        checks_lower_bound: checks.iter().filter(|c| c.lower_bound_holds).count(),
        max_deviation: checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max),
        two_sample: frequency(outcomes.iter().filter(|o| o.two_sample).count(), replicates),
        fixed_origin: frequency(
            outcomes.iter().filter(|o| o.fixed_origin).count(),
            replicates,
        ),
    })
}

/// The two one-dimensional instances behind the origin-centred guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnVariant {
    /// `f(w; z) = L w`
    Drift,
    /// `f(w; z) = L w / n^{1/4}`
    ScaledDrift,
}

impl GnVariant {
    pub const ALL: [GnVariant; 2] = [GnVariant::Drift, GnVariant::ScaledDrift];

    /// Slope of the objective.
    pub fn slope(self, lipschitz: f64, n: usize) -> f64 {
        match self {
            GnVariant::Drift => lipschitz,
            GnVariant::ScaledDrift => lipschitz / (n as f64).powf(0.25),
        }
    }

    /// The instance as a linear construction with a single atom `z = slope / L`.
    pub fn instance(self, lipschitz: f64, n: usize) -> (ConvexObjective, FiniteDistribution) {
        let obj = ConvexObjective::Linear(LinearObjective { lipschitz, dim: 1 });
        let z = self.slope(lipschitz, n) / lipschitz;
        (obj, FiniteDistribution::single(Instance::scalar(z)))
    }
}

/// The two terms of the origin-centred guarantee for one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnTerms {
    /// `F_S(w_bar) - min_{|w| <= 1} F_S(w)`
    pub erm_gap: f64,
    /// `|w_bar| L / sqrt(n)`
    pub norm_term: f64,
    /// `w_bar`
    pub average: f64,
}

impl GnTerms {
    pub fn value(&self) -> f64 {
        self.erm_gap.max(self.norm_term)
    }
}

fn check_gn_args(lipschitz: f64, n: usize, eta: f64, steps: usize) -> Result<()> {
    if !(lipschitz > 0.0 && eta > 0.0) || n == 0 || steps == 0 {
        return Err(config("G(n) evaluation needs L, eta, n, T > 0"));
    }
    Ok(())
}

/// Closed form: with slope `a`, `w_bar = -eta a (T+1)/2`, the risk at `w_bar`
/// is `a w_bar` and the constrained minimum is `-a`.
pub fn gn_evaluate(
    variant: GnVariant,
    lipschitz: f64,
    n: usize,
    eta: f64,
    steps: usize,
) -> Result<GnTerms> {
    check_gn_args(lipschitz, n, eta, steps)?;
    let a = variant.slope(lipschitz, n);
    let avg = -eta * a * (steps as f64 + 1.0) / 2.0;
    Ok(GnTerms {
        erm_gap: a * avg + a,
        norm_term: avg.abs() * lipschitz / (n as f64).sqrt(),
        average: avg,
    })
}

/// Same terms computed from an engine run.
pub fn gn_evaluate_engine(
    variant: GnVariant,
    lipschitz: f64,
    n: usize,
    eta: f64,
    steps: usize,
) -> Result<GnTerms> {
    check_gn_args(lipschitz, n, eta, steps)?;
    let (obj, dist) = variant.instance(lipschitz, n);
    let traj = gd_run_population(&obj, &dist, &GdConfig::new(eta, steps))?;
    let avg = average_iterate(&traj);
    let risk = crate::distributions::population_risk(&dist, &obj, &avg)?;
    // a linear function on [-1, 1] is minimized at -sign(slope)
    let min = -variant.slope(lipschitz, n).abs();
    Ok(GnTerms {
        erm_gap: risk - min,
        norm_term: avg.norm() * lipschitz / (n as f64).sqrt(),
        average: avg[0],
    })
}

/// Worst case over the two instances at one `(eta, T)`.
pub fn gn_point_value(lipschitz: f64, n: usize, eta: f64, steps: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for v in GnVariant::ALL {
        worst = worst.max(gn_evaluate(v, lipschitz, n, eta, steps)?.value());
    }
    Ok(worst)
}

/// Grid estimate of `G(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnEstimate {
    pub value: f64,
    pub eta: f64,
    pub steps: usize,
}

/// Minimum over the grid of the worst case over the two instances. The sup
/// over `(D, f)` is restricted to those two instances.
pub fn gn_grid_optimize(
    lipschitz: f64,
    n: usize,
    eta_grid: &[f64],
    t_grid: &[usize],
) -> Result<GnEstimate> {
    if eta_grid.is_empty() || t_grid.is_empty() {
        return Err(config("G(n) grids must be non-empty"));
    }
    let mut best: Option<GnEstimate> = None;
    for &eta in eta_grid {
        for &steps in t_grid {
            let v = gn_point_value(lipschitz, n, eta, steps)?;
            if best.is_none_or(|b| v < b.value) {
                best = Some(GnEstimate {
                    value: v,
                    eta,
                    steps,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// `points` log-spaced learning rates in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default learning-rate grid: 241 points over `[1e-4, 10]`.
pub fn default_eta_grid() -> Vec<f64> {
    log_grid(1e-4, 10.0, 241)
}

/// Default horizon grid: powers of two up to `2^20`.
pub fn default_t_grid() -> Vec<usize> {
    (0..=20).map(|k| 1usize << k).collect()
}
