//! Operational form of the threshold relation: pick `(δ, α, r)` from `(ε, Γ)`,
//! then check by simulation that the target shows up among `r` measurements
//! and that the rescaled sample means concentrate as the Hoeffding bound says.
//!
//! The relation is
//! `ε + δ + α·e^{Γ} < 1`, `r ≫ 1/δ²`, `r ≫ 1/α²`; "≫" is made concrete by a
//! margin constant `c`, so `r ≥ c/δ²` and `r ≥ c/α²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{rescaled_mean_amplitude, Ensemble};
use crate::rng::{derive_seed, derive_seed_path};

/// Parameters realizing the hypotheses of the threshold relation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPlan {
    pub epsilon: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub r: u64,
    pub margin: f64,
}

impl ThresholdPlan {
    /// A plan with caller-chosen `δ` and `α`; `r` is the smallest integer
    /// meeting both margin bounds.
    pub fn with_slack(epsilon: f64, gamma: f64, delta: f64, alpha: f64, margin: f64) -> Result<Self> {
        validate_inputs(epsilon, gamma, margin)?;
        if !(delta > 0.0) || !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "δ = {delta} and α = {alpha} must both be positive"
            )));
        }
        if !check_inequality(epsilon, delta, alpha, gamma) {
            return Err(Error::InvalidParameter(format!(
                "ε + δ + α·e^Γ = {} is not below 1",
                epsilon + delta + alpha * gamma.exp()
            )));
        }
        let need = margin * (1.0 / (delta * delta)).max(1.0 / (alpha * alpha));
        Ok(Self { epsilon, gamma, delta, alpha, r: ceil_count(need), margin })
    }

    /// Same plan with the ensemble size replaced (for contrast runs).
    pub fn with_r(self, r: u64) -> Self {
        Self { r, ..self }
    }

    pub fn satisfies_inequality(&self) -> bool {
        check_inequality(self.epsilon, self.delta, self.alpha, self.gamma)
    }

    /// `r ≥ c/δ²` and `r ≥ c/α²`.
    pub fn satisfies_sample_bounds(&self) -> bool {
        let r = self.r as f64;
        let tol = 1.0 + 1e-12;
        r * tol >= self.margin / (self.delta * self.delta)
            && r * tol >= self.margin / (self.alpha * self.alpha)
    }
}

/// `ceil(x)` that ignores rounding noise just above an integer. The snap is
/// kept within the tolerance of `satisfies_sample_bounds`.
fn ceil_count(x: f64) -> u64 {
    let nearest = x.round();
    if x > nearest && x - nearest <= 1e-13 * nearest {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

fn validate_inputs(epsilon: f64, gamma: f64, margin: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("Γ = {gamma} must be finite and ≥ 0")));
    }
    if !(margin >= 1.0) || !margin.is_finite() {
        return Err(Error::InvalidParameter(format!("margin constant c = {margin} must be ≥ 1")));
    }
    Ok(())
}

/// Default slack split: with `s = 1 − ε`, take `δ = s/3` and
/// `α = (s/3)·e^{−Γ}`, leaving a margin of `s/3` in the inequality.
pub fn plan_parameters(epsilon: f64, gamma: f64, margin: f64) -> Result<ThresholdPlan> {
    validate_inputs(epsilon, gamma, margin)?;
    let third = (1.0 - epsilon) / 3.0;
    ThresholdPlan::with_slack(epsilon, gamma, third, third * (-gamma).exp(), margin)
}

/// `ε + δ + α·e^{Γ} < 1`.
pub fn check_inequality(epsilon: f64, delta: f64, alpha: f64, gamma: f64) -> bool {
    epsilon + delta + alpha * gamma.exp() < 1.0
}

/// Diagnostics of one ensemble in a theorem-verification run.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub found: bool,
    pub target_count: u64,
    pub rescaled_re: f64,
    pub rescaled_im: f64,
    pub empirical_weight: f64,
    /// Either rescaled constraint `|e^Γ mean ℜ − (1−ε)| ≤ δ`, `|e^Γ mean ℑ| ≤ δ` broken.
    pub constraint_violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub plan: ThresholdPlan,
    pub plan_satisfies_inequality: bool,
    pub plan_satisfies_sample_bounds: bool,
    pub trials: u64,
    pub hit_count: u64,
    pub empirical_success: f64,
    /// Fraction of trials violating a rescaled-mean constraint.
    pub hoeffding_violations: f64,
    pub series: Vec<TrialOutcome>,
}

/// Runs `trials` independent ensembles of size `plan.r` and counts how often
/// the target is among the measured outcomes.
pub fn verify_theorem(
    ensemble: &Ensemble,
    plan: &ThresholdPlan,
    trials: u64,
    root_seed: u64,
) -> Result<TheoremReport> {
    if trials == 0 || plan.r == 0 {
        return Err(Error::InvalidParameter("trials and r must be ≥ 1".into()));
    }
    let series = (0..trials)
        .into_par_iter()
        .map(|m| {
            let stats = ensemble.run(plan.r, derive_seed(root_seed, m))?;
            let rm = rescaled_mean_amplitude(&stats);
            let violated = (rm.value.re - (1.0 - plan.epsilon)).abs() > plan.delta
                || rm.value.im.abs() > plan.delta;
            Ok(TrialOutcome {
                trial: m,
                found: stats.target_found(),
                target_count: stats.target_count(),
                rescaled_re: rm.value.re,
                rescaled_im: rm.value.im,
                empirical_weight: stats.empirical_weight(),
                constraint_violated: violated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hit_count = series.iter().filter(|t| t.found).count() as u64;
    let violations = series.iter().filter(|t| t.constraint_violated).count();
    Ok(TheoremReport {
        plan: *plan,
        plan_satisfies_inequality: plan.satisfies_inequality(),
        plan_satisfies_sample_bounds: plan.satisfies_sample_bounds(),
        trials,
        hit_count,
        empirical_success: hit_count as f64 / trials as f64,
        hoeffding_violations: violations as f64 / trials as f64,
        series,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingCheck {
    pub r: u64,
    pub delta: f64,
    pub trials: u64,
    pub epsilon: f64,
    pub gamma: f64,
    /// `2·exp(−rδ²/2)`.
    pub bound: f64,
    /// Three binomial standard deviations at the bound.
    pub slack: f64,
    pub violations_re: u64,
    pub violations_im: u64,
    pub frequency_re: f64,
    pub frequency_im: f64,
    pub passed: bool,
}

/// `2·exp(−rδ²/2)`.
pub fn hoeffding_bound(r: u64, delta: f64) -> f64 {
    2.0 * (-(r as f64) * delta * delta / 2.0).exp()
}

/// Frequency, over `trials` ensembles of size `r`, of rescaled real / imaginary
/// sample means straying more than `δ` from `(1 − ε, 0)`, compared with the
/// Hoeffding bound plus 3σ binomial slack.
pub fn hoeffding_empirical_check(
    ensemble: &Ensemble,
    r: u64,
    delta: f64,
    trials: u64,
    root_seed: u64,
) -> Result<HoeffdingCheck> {
    if r == 0 || trials == 0 {
        return Err(Error::InvalidParameter("r and trials must be ≥ 1".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must be positive")));
    }
    let epsilon = ensemble.epsilon();
    let flags = (0..trials)
        .into_par_iter()
        .map(|m| {
            let stats = ensemble.run(r, derive_seed(root_seed, m))?;
            let rm = rescaled_mean_amplitude(&stats);
            Ok(((rm.value.re - (1.0 - epsilon)).abs() > delta, rm.value.im.abs() > delta))
        })
        .collect::<Result<Vec<_>>>()?;
    let violations_re = flags.iter().filter(|f| f.0).count() as u64;
    let violations_im = flags.iter().filter(|f| f.1).count() as u64;
    let bound = hoeffding_bound(r, delta);
    let p = bound.min(1.0);
    let slack = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    let (frequency_re, frequency_im) =
        (violations_re as f64 / trials as f64, violations_im as f64 / trials as f64);
    Ok(HoeffdingCheck {
        r,
        delta,
        trials,
        epsilon,
        gamma: ensemble.gamma(),
        bound,
        slack,
        violations_re,
        violations_im,
        frequency_re,
        frequency_im,
        passed: frequency_re <= bound + slack && frequency_im <= bound + slack,
    })
}

/// Smallest `r` in `1..=cap` with `success(r)` true, assuming `success` is
/// monotone in `r`. Exponential search followed by bisection.
pub fn minimal_r(cap: u64, mut success: impl FnMut(u64) -> Result<bool>) -> Result<Option<u64>> {
    if cap == 0 {
        return Ok(None);
    }
    let mut lo = 0u64; // largest known failure (0 = none)
    let mut hi = 1u64;
    loop {
        if success(hi)? {
            break;
        }
        lo = hi;
        if hi == cap {
            return Ok(None);
        }
        hi = (hi * 2).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if success(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    pub gamma: f64,
    /// Smallest ensemble size reaching the success target; the cap when censored.
    pub min_r: u64,
    pub censored: bool,
    pub repeats: u64,
    /// Estimated success probability at `min_r`.
    pub success: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Required empirical success probability `p*`.
    pub success_target: f64,
    pub repeats: u64,
    pub r_cap: u64,
}

/// For each noise strength `g`, the smallest `r` for which at least a
/// fraction `p*` of `repeats` ensembles contain the target.
///
/// Repeat `j` at grid point `i` uses root seed `(root, i, j)`; its ensemble of
/// size `r` is trajectories `0..r`, so ensembles are nested in `r` and the
/// success estimate is monotone. Each repeat records where its first hit
/// occurs, which makes every bisection point cheap to evaluate.
pub fn sweep_noise_strength(
    family: impl Fn(f64) -> Result<Ensemble> + Sync,
    grid: &[f64],
    settings: &SweepSettings,
    root_seed: u64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("noise grid is empty".into()));
    }
    let SweepSettings { success_target, repeats, r_cap } = *settings;
    if !(success_target > 0.0 && success_target <= 1.0) || repeats == 0 || r_cap == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p* ≤ 1, repeats ≥ 1, r cap ≥ 1 (got {success_target}, {repeats}, {r_cap})"
        )));
    }
    let needed = {
        let x = success_target * repeats as f64;
        ceil_count(x)
    };
    grid.iter()
        .enumerate()
        .map(|(gi, &g)| {
            let ensemble = family(g)?;
            let hits = (0..repeats)
                .into_par_iter()
                .map(|j| ensemble.first_hit(derive_seed_path(root_seed, &[gi as u64, j]), r_cap))
                .collect::<Result<Vec<_>>>()?;
            let successes = |r: u64| hits.iter().filter(|h| matches!(h, Some(k) if *k <= r)).count() as u64;
            let found = minimal_r(r_cap, |r| Ok(successes(r) >= needed))?;
            let min_r = found.unwrap_or(r_cap);
            Ok(SweepRow {
                g,
                gamma: ensemble.gamma(),
                min_r,
                censored: found.is_none(),
                repeats,
                success: successes(min_r) as f64 / repeats as f64,
            })
        })
        .collect()
}
