//! Sample-based, KL-bounded update of the parameter distribution.
//!
//! Costs are turned into weights through the REPS dual, the new Gaussian is
//! the weighted maximum-likelihood fit, and the step is shrunk towards the old
//! distribution until the closed-form KL satisfies the bound.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::param_space::{kl_divergence, ParamDistribution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepsConfig {
    pub epsilon: f64,
    pub eta_min: f64,
    pub updates_per_iteration: usize,
    pub cov_jitter_floor: f64,
    /// Divide min-shifted costs by their standard deviation before solving
    /// the dual, so that `eta_min` is relative to the cost spread.
    pub normalize_costs: bool,
}

impl Default for RepsConfig {
    fn default() -> Self {
        RepsConfig {
            epsilon: 1.0,
            eta_min: 1e-3,
            updates_per_iteration: 20,
            cov_jitter_floor: 1e-8,
            normalize_costs: true,
        }
    }
}

impl RepsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.eta_min > 0.0) {
            return Err(contract("epsilon and eta_min must be positive"));
        }
        if !(self.cov_jitter_floor >= 0.0) {
            return Err(contract("cov_jitter_floor must be non-negative"));
        }
        Ok(())
    }
}

pub const ETA_MAX: f64 = 1e6;
const DUAL_MAX_ITERS: usize = 200;
const DUAL_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 20;
const REFINE_STEPS: usize = 12;

fn shifted(costs: &[f64]) -> (f64, Vec<f64>) {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    (min, costs.iter().map(|c| c - min).collect())
}

/// `g(η) = ηε + η log((1/N) Σ exp(−(c_i − min c)/η)) + min c`
pub fn dual(costs: &[f64], epsilon: f64, eta: f64) -> f64 {
    let (min, s) = shifted(costs);
    let n = s.len() as f64;
    let mean: f64 = s.iter().map(|c| (-c / eta).exp()).sum::<f64>() / n;
    eta * epsilon + eta * mean.ln() + min
}

/// Minimises the dual by golden-section search on `log η` over `[eta_min, 1e6]`.
pub fn solve_dual(costs: &[f64], epsilon: f64, eta_min: f64) -> Result<f64> {
    if costs.len() < 2 {
        return Err(contract("the dual needs at least two samples"));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(contract("costs must be finite"));
    }
    let (_, s) = shifted(costs);
    if s.iter().all(|c| *c == 0.0) {
        return Ok(eta_min);
    }
    // The additive `min c` does not move the minimiser; leaving it out makes
    // the result depend on cost differences only.
    let g = |log_eta: f64| dual(&s, epsilon, log_eta.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (eta_min.ln(), ETA_MAX.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..DUAL_MAX_ITERS {
        if (b - a).abs() < DUAL_TOL {
            break;
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    // The bracket ends are candidates too: the minimiser can sit on a bound.
    let candidates = [(a + b) / 2.0, eta_min.ln(), ETA_MAX.ln()];
    let best = candidates
        .iter()
        .copied()
        .min_by(|x, y| g(*x).total_cmp(&g(*y)))
        .expect("non-empty");
    Ok(best.exp())
}

/// Softmax of the negated, min-shifted costs at temperature `eta`.
pub fn weights(costs: &[f64], eta: f64) -> Vec<f64> {
    let (_, s) = shifted(costs);
    let w: Vec<f64> = s.iter().map(|c| (-c / eta).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// `Σ w_i log(N w_i)`: KL of the weighted sample set from the uniform one.
pub fn sample_kl(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    w.iter()
        .filter(|v| **v > 0.0)
        .map(|v| v * (n * v).ln())
        .sum()
}

pub fn effective_sample_size(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|v| v * v).sum::<f64>()
}

/// Population standard deviation of `costs`, or 1 when it is zero or not finite.
fn cost_spread(costs: &[f64]) -> f64 {
    let n = costs.len() as f64;
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = costs.iter().map(|c| c - lo).sum::<f64>() / n;
    let std = (costs.iter().map(|c| (c - lo - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std > 0.0 && std.is_finite() {
        std
    } else {
        1.0
    }
}

/// Diagnostics for one update pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassStats {
    pub eta: f64,
    pub ess: f64,
    pub kl: f64,
    /// Interpolation factor of the accepted step (1 = full weighted-ML fit).
    pub step: f64,
    /// True when the fitted covariance was unusable and the old one was kept.
    pub cov_fallback: bool,
    /// Divisor applied to the costs before the dual solve (1 when disabled).
    pub cost_scale: f64,
}

/// Weighted maximum-likelihood moments, without Bessel correction, plus a
/// diagonal jitter floor.
pub fn weighted_moments(
    samples: &[DVector<f64>],
    w: &[f64],
    jitter: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    for (x, wi) in samples.iter().zip(w) {
        mean.axpy(*wi, x, 1.0);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (x, wi) in samples.iter().zip(w) {
        let diff = x - &mean;
        cov.ger(*wi, &diff, &diff, 1.0);
    }
    for i in 0..d {
        cov[(i, i)] += jitter;
    }
    (mean, cov)
}

/// One KL-bounded update pass.
pub fn update(
    dist: &ParamDistribution,
    samples: &[DVector<f64>],
    costs: &[f64],
    config: &RepsConfig,
) -> Result<(ParamDistribution, PassStats)> {
    config.validate()?;
    if samples.len() != costs.len() {
        return Err(contract(format!(
            "{} samples but {} costs",
            samples.len(),
            costs.len()
        )));
    }
    if samples.iter().any(|x| x.len() != dist.dim()) {
        return Err(contract("sample dimension does not match the distribution"));
    }
    let cost_scale = if config.normalize_costs {
        cost_spread(costs)
    } else {
        1.0
    };
    let scaled: Vec<f64>;
    let costs = if cost_scale == 1.0 {
        costs
    } else {
        let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
        scaled = costs.iter().map(|c| (c - lo) / cost_scale).collect();
        &scaled
    };
    let eta = solve_dual(costs, config.epsilon, config.eta_min)?;
    let w = weights(costs, eta);
    let (mean, cov) = weighted_moments(samples, &w, config.cov_jitter_floor);

    let (target_cov, cov_fallback) = match dist.with_moments(mean.clone(), cov.clone()) {
        Ok(_) => (cov, false),
        Err(e) => {
            log::warn!("weighted covariance unusable ({e}); keeping the previous covariance");
            (dist.covariance().clone(), true)
        }
    };
    let try_step = |t: f64| -> Result<Option<(ParamDistribution, f64)>> {
        let m = dist.mean() * (1.0 - t) + &mean * t;
        let c = dist.covariance() * (1.0 - t) + &target_cov * t;
        match dist.with_moments(m, c) {
            Ok(candidate) => {
                let kl = kl_divergence(&candidate, dist)?;
                Ok((kl <= config.epsilon).then_some((candidate, kl)))
            }
            Err(_) => Ok(None),
        }
    };
    let mut t = 1.0;
    let mut accepted = None;
    for _ in 0..=MAX_HALVINGS {
        if let Some(c) = try_step(t)? {
            accepted = Some(c);
            break;
        }
        t *= 0.5;
    }
    // After a rejection, bisect between the accepted and rejected factors so
    // the step lands close to the trust-region boundary.
    if accepted.is_some() && t < 1.0 {
        let (mut lo, mut hi) = (t, 2.0 * t);
        for _ in 0..REFINE_STEPS {
            let mid = 0.5 * (lo + hi);
            match try_step(mid)? {
                Some(c) => {
                    accepted = Some(c);
                    lo = mid;
                }
                None => hi = mid,
            }
        }
        t = lo;
    }
    let (next, kl, step) = match accepted {
        Some((d, kl)) => (d, kl, t),
        None => (dist.clone(), 0.0, 0.0),
    };
    Ok((
        next,
        PassStats {
            eta,
            ess: effective_sample_size(&w),
            kl,
            step,
            cov_fallback,
            cost_scale,
        },
    ))
}

/// `updates_per_iteration` chained passes over the same samples; each pass's
/// KL is measured against its own input distribution.
pub fn update_chain(
    dist: &ParamDistribution,
    samples: &[DVector<f64>],
    costs: &[f64],
    config: &RepsConfig,
) -> Result<(ParamDistribution, Vec<PassStats>)> {
    let mut current = dist.clone();
    let mut stats = Vec::with_capacity(config.updates_per_iteration);
    for _ in 0..config.updates_per_iteration {
        let (next, s) = update(&current, samples, costs, config)?;
        current = next;
        stats.push(s);
    }
    Ok((current, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_space::Transform;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn one_d(mean: f64, var: f64) -> ParamDistribution {
        ParamDistribution::diagonal(&["x"], &[mean], &[var], vec![Transform::Identity]).unwrap()
    }

    #[test]
    fn equal_costs_give_eta_min_and_uniform_weights() {
        let c = [2.0; 5];
        assert_eq!(solve_dual(&c, 1.0, 1e-3).unwrap(), 1e-3);
        assert!(weights(&c, 1e-3).iter().all(|w| (w - 0.2).abs() < 1e-15));
    }

    #[test]
    fn analytic_softmax() {
        let w = weights(&[0.0, 1.0], 1.0);
        assert!((w[0] - 0.731_058_578_630_004_9).abs() < 1e-6);
        assert!((w[1] - 0.268_941_421_369_995_1).abs() < 1e-6);
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let w = weights(&[0.0, 3.0, 10.0], 1e12);
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn huge_epsilon_drives_eta_to_minimum() {
        let c = [0.0, 1.0, 2.5, 4.0];
        let eta = solve_dual(&c, 1e6, 1e-3).unwrap();
        assert!((eta - 1e-3).abs() < 1e-6);
        let w = weights(&c, eta);
        assert!(w[0] > 1.0 - 1e-12);
    }

    #[test]
    fn dual_needs_two_samples() {
        assert!(solve_dual(&[1.0], 1.0, 1e-3).is_err());
    }

    #[test]
    fn dual_solution_is_feasible() {
        let mut r = stream(4, "t", 0);
        for _ in 0..20 {
            let c: Vec<f64> = (0..200).map(|_| r.random_range(0.0..10.0)).collect();
            let eta = solve_dual(&c, 1.0, 1e-3).unwrap();
            assert!(sample_kl(&weights(&c, eta)) <= 1.0 + 0.05);
        }
    }

    #[test]
    fn uniform_weights_reduce_to_mle() {
        let d = one_d(0.0, 1.0);
        let xs: Vec<DVector<f64>> = [1.0, 2.0, 3.0, 6.0]
            .iter()
            .map(|v| DVector::from_vec(vec![*v]))
            .collect();
        let cfg = RepsConfig {
            epsilon: 1e9,
            cov_jitter_floor: 0.0,
            ..RepsConfig::default()
        };
        let (next, stats) = update(&d, &xs, &[1.0; 4], &cfg).unwrap();
        assert!((next.mean()[0] - 3.0).abs() < 1e-12);
        assert!((next.covariance()[(0, 0)] - 3.5).abs() < 1e-12);
        assert_eq!(stats.step, 1.0);
    }

    #[test]
    fn concentrated_weights_give_floor_covariance() {
        let xs = vec![
            DVector::from_vec(vec![0.7, -0.2]),
            DVector::from_vec(vec![3.0, 1.0]),
        ];
        let (m, c) = weighted_moments(&xs, &[1.0, 0.0], 1e-8);
        assert_eq!(m, xs[0]);
        assert_eq!(c, DMatrix::identity(2, 2) * 1e-8);
    }

    #[test]
    fn constant_shift_leaves_update_bit_identical() {
        let d = one_d(0.0, 1.0);
        let s = d.sample(64, 3);
        // Dyadic costs and shift keep the min-shift exact in floating point.
        let c: Vec<f64> = s
            .internal
            .iter()
            .map(|x| ((x[0] - 1.0).powi(2) * 1024.0).round() / 1024.0)
            .collect();
        let shifted: Vec<f64> = c.iter().map(|v| v + 16.0).collect();
        let cfg = RepsConfig::default();
        let (a, sa) = update(&d, &s.internal, &c, &cfg).unwrap();
        let (b, sb) = update(&d, &s.internal, &shifted, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn quadratic_converges() {
        let mut d = one_d(0.0, 1.0);
        let cfg = RepsConfig {
            updates_per_iteration: 1,
            ..RepsConfig::default()
        };
        for it in 0..10 {
            let s = d.sample(500, 100 + it);
            let c: Vec<f64> = s.internal.iter().map(|x| (x[0] - 2.0).powi(2)).collect();
            d = update(&d, &s.internal, &c, &cfg).unwrap().0;
        }
        assert!((d.mean()[0] - 2.0).abs() < 0.05, "mean {}", d.mean()[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn accepted_pass_respects_kl_bound(seed in 0u64..10_000, mx in -3.0f64..3.0, eps in 0.05f64..2.0) {
            let d = ParamDistribution::diagonal(
                &["a", "b"], &[0.0, 0.0], &[1.0, 0.5], vec![Transform::Identity; 2]).unwrap();
            let s = d.sample(128, seed);
            let c: Vec<f64> = s.internal.iter().map(|x| (x[0] - mx).powi(2) + 3.0 * x[1].abs()).collect();
            let cfg = RepsConfig { epsilon: eps, updates_per_iteration: 3, ..RepsConfig::default() };
            let (_, stats) = update_chain(&d, &s.internal, &c, &cfg).unwrap();
            for st in stats {
                prop_assert!(st.kl <= eps + 1e-6);
            }
        }
    }
}
