//! Trajectory discrepancy: weighted L1 + squared L2 distance between
//! Gaussian-smoothed observation series, and its evaluation over a batch of
//! parameter samples.

use serde::{Deserialize, Serialize};

use crate::envs::{self, Actor, Env, EnvSpec, ObservationMask, TargetTrajectory};
use crate::error::{contract, Error, Result};
use crate::parallel;
use crate::param_space::SimParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub w_l1: f64,
    pub w_l2: f64,
    /// One weight per visible observation dimension; empty means all ones.
    pub dim_weights: Vec<f64>,
    /// Kernel standard deviation in timesteps.
    pub smooth_std: f64,
    /// Kernel half-width in units of `smooth_std`.
    pub smooth_trunc: f64,
    /// Also compare the previous step's observation at every step.
    pub stack_previous: bool,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        DiscrepancyConfig {
            w_l1: 0.5,
            w_l2: 1.0,
            dim_weights: Vec::new(),
            smooth_std: 5.0,
            smooth_trunc: 4.0,
            stack_previous: false,
        }
    }
}

impl DiscrepancyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_l1 >= 0.0 && self.w_l2 >= 0.0) {
            return Err(contract("w_l1 and w_l2 must be non-negative"));
        }
        if self.dim_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(contract("dimension weights must be non-negative"));
        }
        if !(self.smooth_std > 0.0) || !(self.smooth_trunc >= 0.0) {
            return Err(contract(
                "smooth_std must be positive and smooth_trunc non-negative",
            ));
        }
        Ok(())
    }
}

fn kernel(std: f64, trunc: f64) -> Vec<f64> {
    let radius = if std > 0.0 {
        (trunc * std).floor() as usize
    } else {
        0
    };
    (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * std * std)).exp())
        .collect()
}

/// Per-dimension Gaussian smoothing along time. The kernel is cut at
/// `trunc * std` samples each side and renormalised over the part of the
/// window that lies inside the series.
pub fn gaussian_smooth(series: &[Vec<f64>], std: f64, trunc: f64) -> Vec<Vec<f64>> {
    let k = kernel(std, trunc);
    let r = k.len() - 1;
    if r == 0 {
        return series.to_vec();
    }
    let t_len = series.len();
    let d = series.first().map_or(0, Vec::len);
    (0..t_len)
        .map(|t| {
            let lo = t.saturating_sub(r);
            let hi = (t + r).min(t_len - 1);
            let mut out = vec![0.0; d];
            let mut total = 0.0;
            for (s, row) in series.iter().enumerate().take(hi + 1).skip(lo) {
                let w = k[s.abs_diff(t)];
                total += w;
                for (o, v) in out.iter_mut().zip(row) {
                    *o += w * v;
                }
            }
            out.iter_mut().for_each(|o| *o /= total);
            out
        })
        .collect()
}

/// `w_l1 Σ_t ‖W∘(a_t − b_t)‖₁ + w_l2 Σ_t ‖W∘(a_t − b_t)‖₂²` on the smoothed
/// series, truncated to the shorter of the two.
pub fn discrepancy(sim: &[Vec<f64>], real: &[Vec<f64>], config: &DiscrepancyConfig) -> Result<f64> {
    let d = sim.first().or(real.first()).map_or(0, Vec::len);
    if sim.iter().chain(real).any(|r| r.len() != d) {
        return Err(contract(
            "observation widths differ between the two trajectories",
        ));
    }
    if !config.dim_weights.is_empty() && config.dim_weights.len() != d {
        return Err(contract(format!(
            "{} dimension weights for {d} observation dimensions",
            config.dim_weights.len()
        )));
    }
    let t = sim.len().min(real.len());
    if t == 0 {
        return Ok(0.0);
    }
    let a = gaussian_smooth(&sim[..t], config.smooth_std, config.smooth_trunc);
    let b = gaussian_smooth(&real[..t], config.smooth_std, config.smooth_trunc);
    let weight = |i: usize| config.dim_weights.get(i).copied().unwrap_or(1.0);
    let row_cost = |x: &[f64], y: &[f64]| {
        let (mut l1, mut l2) = (0.0, 0.0);
        for i in 0..d {
            let e = weight(i) * (x[i] - y[i]);
            l1 += e.abs();
            l2 += e * e;
        }
        config.w_l1 * l1 + config.w_l2 * l2
    };
    let mut total = 0.0;
    for s in 0..t {
        total += row_cost(&a[s], &b[s]);
        if config.stack_previous {
            let p = s.saturating_sub(1);
            total += row_cost(&a[p], &b[p]);
        }
    }
    Ok(total)
}

/// How simulated rollouts are driven when costing a parameter sample.
#[derive(Clone, Copy)]
pub enum CostMode<'a> {
    /// One deterministic policy rollout per sample, reset with the given seed.
    ClosedLoop { actor: &'a dyn Actor, seed: u64 },
    /// Replays each target rollout's actions from that rollout's reset seed.
    OpenLoop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBatch {
    pub costs: Vec<f64>,
    /// Indices whose simulation blew up and were assigned the penalty cost.
    pub blowups: Vec<usize>,
}

impl CostBatch {
    pub fn median(&self) -> f64 {
        median(&self.costs)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cost of every parameter sample against the target rollouts, averaged over
/// the target rollouts. Samples whose rollout blew up get ten times the
/// largest finite cost in the batch.
pub fn batch_cost(
    xi: &[SimParams],
    mode: CostMode<'_>,
    spec: &EnvSpec,
    real: &[TargetTrajectory],
    mask: &ObservationMask,
    config: &DiscrepancyConfig,
) -> Result<CostBatch> {
    if real.is_empty() {
        return Err(contract("batch_cost needs at least one target rollout"));
    }
    config.validate()?;
    let per_sample = parallel::map_indexed(xi.len(), |i| -> Result<Option<f64>> {
        let env = Env::new(spec, &xi[i])?;
        let mut total = 0.0;
        match mode {
            CostMode::ClosedLoop { actor, seed } => {
                let t = envs::rollout(&env, actor, seed, false);
                if t.failed {
                    return Ok(None);
                }
                let sim = mask.apply_all(&t.observations);
                for r in real {
                    total += discrepancy(&sim, &r.observations, config)?;
                }
            }
            CostMode::OpenLoop => {
                for r in real {
                    let t = envs::rollout_open_loop(&env, &r.actions, r.seed);
                    if t.failed {
                        return Ok(None);
                    }
                    total +=
                        discrepancy(&mask.apply_all(&t.observations), &r.observations, config)?;
                }
            }
        }
        Ok(Some(total / real.len() as f64))
    });
    let per_sample = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    let max_finite = per_sample
        .iter()
        .flatten()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !xi.is_empty() && max_finite == f64::NEG_INFINITY {
        return Err(Error::DegenerateBatch(xi.len()));
    }
    let mut blowups = Vec::new();
    let costs = per_sample
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(v) if v.is_finite() => *v,
            _ => {
                blowups.push(i);
                10.0 * max_finite
            }
        })
        .collect();
    if !blowups.is_empty() {
        log::warn!("{} of {} cost rollouts blew up", blowups.len(), xi.len());
    }
    Ok(CostBatch { costs, blowups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> DiscrepancyConfig {
        DiscrepancyConfig::default()
    }

    #[test]
    fn constant_series_unchanged() {
        let s: Vec<Vec<f64>> = (0..30).map(|_| vec![1.5, -2.0]).collect();
        for row in gaussian_smooth(&s, 5.0, 4.0) {
            assert!((row[0] - 1.5).abs() < 1e-12 && (row[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_matches_kernel_sum() {
        let mut s = vec![vec![0.0]; 81];
        s[40][0] = 1.0;
        let out = gaussian_smooth(&s, 5.0, 4.0);
        let total: f64 = (-20i32..=20).map(|k| (-(k * k) as f64 / 50.0).exp()).sum();
        assert!((out[40][0] - 1.0 / total).abs() < 1e-15);
    }

    #[test]
    fn tiny_std_is_identity() {
        let s: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * i as f64]).collect();
        assert_eq!(gaussian_smooth(&s, 0.1, 4.0), s);
    }

    #[test]
    fn single_step_arithmetic() {
        let d = discrepancy(&[vec![1.0]], &[vec![0.0]], &cfg()).unwrap();
        assert!((d - 1.5).abs() < 1e-15);
        let d2 = discrepancy(&[vec![2.0]], &[vec![0.0]], &cfg()).unwrap();
        assert!((d2 - 5.0).abs() < 1e-15);
    }

    #[test]
    fn identical_is_zero_and_width_mismatch_errors() {
        let a: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), 0.3]).collect();
        assert_eq!(discrepancy(&a, &a, &cfg()).unwrap(), 0.0);
        assert!(discrepancy(&a, &[vec![0.0]], &cfg()).is_err());
    }

    #[test]
    fn lengths_truncate_to_shorter() {
        let a: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let b = a[..12].to_vec();
        assert_eq!(discrepancy(&a, &b, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn smoothing_tolerates_small_shifts() {
        let signal = |t: f64| (t * 0.08).sin();
        let a: Vec<Vec<f64>> = (0..150).map(|t| vec![signal(t as f64)]).collect();
        let b: Vec<Vec<f64>> = (0..150).map(|t| vec![signal(t as f64 + 2.0)]).collect();
        let smooth = discrepancy(&a, &b, &cfg()).unwrap();
        let raw = discrepancy(
            &a,
            &b,
            &DiscrepancyConfig {
                smooth_std: 1e-3,
                ..cfg()
            },
        )
        .unwrap();
        assert!(smooth < raw, "{smooth} vs {raw}");
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn series(len: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), len)
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(a in series(12, 3), b in series(12, 3)) {
            let c = DiscrepancyConfig { dim_weights: vec![0.5, 1.0, 2.0], ..cfg() };
            let ab = discrepancy(&a, &b, &c).unwrap();
            let ba = discrepancy(&b, &a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        }

        #[test]
        fn zero_weight_dimension_is_ignored(a in series(10, 2), b in series(10, 2), noise in series(10, 1)) {
            let c = DiscrepancyConfig { dim_weights: vec![1.0, 0.0], ..cfg() };
            let mut b2 = b.clone();
            for (row, n) in b2.iter_mut().zip(&noise) {
                row[1] += 100.0 * n[0];
            }
            prop_assert_eq!(discrepancy(&a, &b, &c).unwrap(), discrepancy(&a, &b2, &c).unwrap());
        }

        #[test]
        fn homogeneity_of_the_two_norms(diff in 0.01f64..5.0, k in 0.5f64..3.0) {
            let c1 = DiscrepancyConfig { w_l2: 0.0, ..cfg() };
            let c2 = DiscrepancyConfig { w_l1: 0.0, ..cfg() };
            let zero = vec![vec![0.0]; 5];
            let a = vec![vec![diff]; 5];
            let ak = vec![vec![k * diff]; 5];
            let l1 = discrepancy(&a, &zero, &c1).unwrap();
            let l2 = discrepancy(&a, &zero, &c2).unwrap();
            prop_assert!((discrepancy(&ak, &zero, &c1).unwrap() - k * l1).abs() < 1e-9 * (1.0 + l1));
            prop_assert!((discrepancy(&ak, &zero, &c2).unwrap() - k * k * l2).abs() < 1e-9 * (1.0 + l2));
        }
    }
}
