//! The simulation-parameter distribution: a full-covariance Gaussian living in
//! an unconstrained internal space, with per-dimension transforms to the
//! physical values that environments consume.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const JITTER_ATTEMPTS: usize = 5;

/// Map between internal (unconstrained) and physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    /// physical = exp(internal)
    Log,
    /// physical = lo + (hi - lo) * sigmoid(internal)
    Affine {
        lo: f64,
        hi: f64,
    },
}

impl Transform {
    pub fn to_physical(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.exp(),
            Transform::Affine { lo, hi } => lo + (hi - lo) / (1.0 + (-x).exp()),
        }
    }

    pub fn to_internal(self, p: f64, dim: &str) -> Result<f64> {
        let domain = |msg: String| Error::Domain {
            dim: dim.to_string(),
            msg,
        };
        if !p.is_finite() {
            return Err(domain(format!("non-finite value {p}")));
        }
        match self {
            Transform::Identity => Ok(p),
            Transform::Log if p > 0.0 => Ok(p.ln()),
            Transform::Log => Err(domain(format!(
                "log transform needs a positive value, got {p}"
            ))),
            Transform::Affine { lo, hi } if p > lo && p < hi => Ok(((p - lo) / (hi - p)).ln()),
            Transform::Affine { lo, hi } => Err(domain(format!("{p} outside ({lo}, {hi})"))),
        }
    }
}

/// Closed physical interval a parameter is clamped into after sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::UNBOUNDED
    }
}

/// A named vector of physical simulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl SimParams {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(contract(format!(
                "{} names but {} values",
                names.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                dim: names[i].clone(),
                msg: format!("non-finite value {}", values[i]),
            });
        }
        Ok(SimParams { names, values })
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Result<Self> {
        SimParams::new(
            pairs.iter().map(|(n, _)| n.to_string()).collect(),
            pairs.iter().map(|(_, v)| *v).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => {
                self.values[i] = value;
                Ok(())
            }
            None => Err(contract(format!("unknown parameter `{name}`"))),
        }
    }
}

/// Draws from a [`ParamDistribution`], kept in both spaces.
#[derive(Clone, Debug)]
pub struct ParamSamples {
    /// Unclamped internal-space draws; these feed the distribution update.
    pub internal: Vec<DVector<f64>>,
    /// Physical values after transform and clamping.
    pub params: Vec<SimParams>,
    /// Number of coordinates that had to be clamped.
    pub clamp_events: usize,
}

/// Gaussian `N(mean, covariance)` over internal space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamDistribution {
    names: Vec<String>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    transforms: Vec<Transform>,
    bounds: Vec<Bounds>,
    chol: DMatrix<f64>,
}

impl ParamDistribution {
    /// Builds a distribution, symmetrising the covariance and repairing it with
    /// diagonal jitter when the Cholesky factorisation fails.
    pub fn new(
        names: Vec<String>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        transforms: Vec<Transform>,
    ) -> Result<Self> {
        let d = names.len();
        Self::new_bounded(names, mean, cov, transforms, vec![Bounds::UNBOUNDED; d])
    }

    pub fn new_bounded(
        names: Vec<String>,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        transforms: Vec<Transform>,
        bounds: Vec<Bounds>,
    ) -> Result<Self> {
        let d = names.len();
        if mean.len() != d || cov.nrows() != d || cov.ncols() != d {
            return Err(contract(format!(
                "dimension mismatch: {d} names, mean {}, covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if transforms.len() != d || bounds.len() != d {
            return Err(contract(format!(
                "{d} names but {} transforms and {} bounds",
                transforms.len(),
                bounds.len()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(contract("mean and covariance must be finite"));
        }
        let mut cov = (&cov + cov.transpose()) * 0.5;
        let chol = repair_cholesky(&mut cov)?;
        Ok(ParamDistribution {
            names,
            mean,
            cov,
            transforms,
            bounds,
            chol,
        })
    }

    /// Diagonal-covariance convenience constructor.
    pub fn diagonal(
        names: &[&str],
        mean: &[f64],
        variances: &[f64],
        transforms: Vec<Transform>,
    ) -> Result<Self> {
        if variances.len() != mean.len() {
            return Err(contract("mean and variance lengths differ"));
        }
        ParamDistribution::new(
            names.iter().map(|s| s.to_string()).collect(),
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
            transforms,
        )
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular factor with `L Lᵀ = Σ`.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    /// Same transforms and bounds, new moments.
    pub fn with_moments(&self, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        ParamDistribution::new_bounded(
            self.names.clone(),
            mean,
            cov,
            self.transforms.clone(),
            self.bounds.clone(),
        )
    }

    pub fn with_bounds(mut self, bounds: Vec<Bounds>) -> Result<Self> {
        if bounds.len() != self.dim() {
            return Err(contract("bounds length must equal dimension"));
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Internal-space draw `i` of the stream `seed`. Each index owns its own
    /// generator, so draws can be produced in any order or in parallel.
    pub fn sample_internal_at(&self, seed: u64, index: u64) -> DVector<f64> {
        let mut r = rng::stream(seed, "sample", index);
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| StandardNormal.sample(&mut r)),
        );
        &self.mean + &self.chol * z
    }

    pub fn sample(&self, n: usize, seed: u64) -> ParamSamples {
        let internal: Vec<_> = (0..n as u64)
            .map(|i| self.sample_internal_at(seed, i))
            .collect();
        let mut clamp_events = 0;
        let params = internal
            .iter()
            .map(|x| {
                let (p, c) = self.to_physical_clamped(x);
                clamp_events += c;
                p
            })
            .collect();
        if clamp_events > 0 {
            log::debug!("sampling clamped {clamp_events} coordinates to physical bounds");
        }
        ParamSamples {
            internal,
            params,
            clamp_events,
        }
    }

    /// Transform without clamping.
    pub fn to_physical(&self, internal: &DVector<f64>) -> SimParams {
        SimParams {
            names: self.names.clone(),
            values: internal
                .iter()
                .zip(&self.transforms)
                .map(|(&x, t)| t.to_physical(x))
                .collect(),
        }
    }

    /// Transform and clamp into bounds; returns the clamp count.
    pub fn to_physical_clamped(&self, internal: &DVector<f64>) -> (SimParams, usize) {
        let mut p = self.to_physical(internal);
        let mut clamped = 0;
        for (v, b) in p.values.iter_mut().zip(&self.bounds) {
            if !b.contains(*v) {
                *v = b.clamp(*v);
                clamped += 1;
            }
        }
        (p, clamped)
    }

    pub fn from_physical(&self, params: &SimParams) -> Result<DVector<f64>> {
        if params.names != self.names {
            return Err(contract(format!(
                "parameter names {:?} do not match distribution {:?}",
                params.names, self.names
            )));
        }
        let vals = params
            .values
            .iter()
            .zip(&self.transforms)
            .zip(&self.names)
            .map(|((&p, t), n)| t.to_internal(p, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    pub fn log_density_internal(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det() + z.norm_squared())
    }

    /// Log density of the internal-space image of `params`.
    pub fn log_density(&self, params: &SimParams) -> Result<f64> {
        Ok(self.log_density_internal(&self.from_physical(params)?))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn to_json(&self) -> DistributionJson {
        DistributionJson::from(self)
    }
}

/// `KL(p ‖ q)` in closed form.
pub fn kl_divergence(p: &ParamDistribution, q: &ParamDistribution) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(contract(format!(
            "KL between dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    if p.transforms != q.transforms {
        return Err(contract(
            "KL between distributions with different transforms",
        ));
    }
    if p.mean == q.mean && p.cov == q.cov {
        return Ok(0.0);
    }
    let d = p.dim() as f64;
    let lq = &q.chol;
    let a = lq
        .solve_lower_triangular(&p.chol)
        .expect("cholesky factor has a positive diagonal");
    let trace = a.norm_squared();
    let diff = &q.mean - &p.mean;
    let m = lq
        .solve_lower_triangular(&diff)
        .expect("cholesky factor has a positive diagonal")
        .norm_squared();
    Ok((0.5 * (trace + m - d + q.log_det() - p.log_det())).max(0.0))
}

/// Factorises `cov`, adding `λI` with a growing `λ` until it succeeds.
/// On success `cov` holds the repaired matrix.
fn repair_cholesky(cov: &mut DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let max_diag = cov
        .diagonal()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lambda = 1e-8 * max_diag.max(1e-12);
    for _ in 0..JITTER_ATTEMPTS {
        let candidate = &*cov + DMatrix::identity(cov.nrows(), cov.ncols()) * lambda;
        if let Some(c) = candidate.clone().cholesky() {
            log::debug!("covariance repaired with jitter {lambda:e}");
            *cov = candidate;
            return Ok(c.l());
        }
        lambda *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        attempts: JITTER_ATTEMPTS,
    })
}

/// On-disk form: `{"names", "mean", "covariance" (row-major, full), "transforms"}`
/// plus an optional `"bounds"` list of `[lo, hi]` pairs (`null` = unbounded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionJson {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub transforms: Vec<Transform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[Option<f64>; 2]>>,
}

impl From<&ParamDistribution> for DistributionJson {
    fn from(d: &ParamDistribution) -> Self {
        let n = d.dim();
        let bounded = d.bounds.iter().any(|b| *b != Bounds::UNBOUNDED);
        let finite = |v: f64| v.is_finite().then_some(v);
        DistributionJson {
            names: d.names.clone(),
            mean: d.mean.iter().cloned().collect(),
            covariance: (0..n)
                .map(|i| (0..n).map(|j| d.cov[(i, j)]).collect())
                .collect(),
            transforms: d.transforms.clone(),
            bounds: bounded.then(|| {
                d.bounds
                    .iter()
                    .map(|b| [finite(b.lo), finite(b.hi)])
                    .collect()
            }),
        }
    }
}

impl TryFrom<DistributionJson> for ParamDistribution {
    type Error = Error;

    fn try_from(j: DistributionJson) -> Result<Self> {
        let n = j.names.len();
        if j.covariance.len() != n || j.covariance.iter().any(|r| r.len() != n) {
            return Err(contract("covariance must be a full square matrix"));
        }
        let cov = DMatrix::from_fn(n, n, |i, k| j.covariance[i][k]);
        let bounds = match j.bounds {
            Some(b) => b
                .iter()
                .map(|[lo, hi]| {
                    Bounds::new(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
                })
                .collect(),
            None => vec![Bounds::UNBOUNDED; n],
        };
        ParamDistribution::new_bounded(
            j.names,
            DVector::from_vec(j.mean),
            cov,
            j.transforms,
            bounds,
        )
    }
}

impl Serialize for ParamDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DistributionJson::deserialize(d)?;
        ParamDistribution::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// A distribution over some parameters layered on fixed values for the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Randomization {
    pub base: SimParams,
    pub dist: ParamDistribution,
    slots: Vec<usize>,
}

impl Randomization {
    pub fn new(base: SimParams, dist: ParamDistribution) -> Result<Self> {
        let slots = dist
            .names()
            .iter()
            .map(|n| {
                base.names.iter().position(|b| b == n).ok_or_else(|| {
                    contract(format!("randomized parameter {n} is not in the base set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Randomization { base, dist, slots })
    }

    pub fn with_dist(&self, dist: ParamDistribution) -> Result<Self> {
        Randomization::new(self.base.clone(), dist)
    }

    /// Full parameter set for an internal-space point, clamped; returns the clamp count.
    pub fn compose(&self, internal: &DVector<f64>) -> (SimParams, usize) {
        let (partial, clamped) = self.dist.to_physical_clamped(internal);
        let mut full = self.base.clone();
        for (slot, v) in self.slots.iter().zip(partial.values) {
            full.values[*slot] = v;
        }
        (full, clamped)
    }

    pub fn sample_at(&self, seed: u64, index: u64) -> (DVector<f64>, SimParams, usize) {
        let x = self.dist.sample_internal_at(seed, index);
        let (p, c) = self.compose(&x);
        (x, p, c)
    }

    pub fn mean_params(&self) -> SimParams {
        self.compose(self.dist.mean()).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(d: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
        let mut r = rng::stream(seed, "test.spd", 0);
        let mut g = || -> f64 { StandardNormal.sample(&mut r) };
        let a = DMatrix::from_fn(d, d, |_, _| g());
        let cov = &a * a.transpose() * 0.3 + DMatrix::identity(d, d) * 0.2;
        let mean = DVector::from_fn(d, |_, _| g());
        (mean, cov)
    }

    fn dist(d: usize, seed: u64) -> ParamDistribution {
        let (m, c) = random_spd(d, seed);
        let names = (0..d).map(|i| format!("x{i}")).collect();
        ParamDistribution::new(names, m, c, vec![Transform::Identity; d]).unwrap()
    }

    #[test]
    fn empty_sample() {
        let p = dist(2, 1);
        assert!(p.sample(0, 3).params.is_empty());
    }

    #[test]
    fn degenerate_covariance_samples_sit_on_the_mean() {
        let p = ParamDistribution::diagonal(
            &["a", "b"],
            &[0.3, -1.0],
            &[1e-12, 1e-12],
            vec![Transform::Identity; 2],
        )
        .unwrap();
        for x in p.sample(200, 9).internal {
            assert!((x - p.mean()).amax() < 1e-4);
        }
    }

    #[test]
    fn sample_mean_within_standard_error_bound() {
        let p = dist(2, 4);
        let n = 100_000;
        let s = p.sample(n, 11);
        for i in 0..2 {
            let m = s.internal.iter().map(|x| x[i]).sum::<f64>() / n as f64;
            let sd = p.covariance()[(i, i)].sqrt();
            assert!((m - p.mean()[i]).abs() < 4.0 * sd / (n as f64).sqrt());
        }
    }

    #[test]
    fn empirical_covariance_matches_within_five_percent() {
        for d in [1usize, 3, 8] {
            let p = dist(d, 20 + d as u64);
            let n = 100_000;
            let s = p.sample(n, 5);
            let mean = s.internal.iter().fold(DVector::zeros(d), |a, x| a + x) / n as f64;
            let cov = s.internal.iter().fold(DMatrix::zeros(d, d), |a, x| {
                a + (x - &mean) * (x - &mean).transpose()
            }) / n as f64;
            let rel = (cov - p.covariance()).norm() / p.covariance().norm();
            assert!(rel < 0.05, "d={d} rel={rel}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = dist(3, 2);
        let a = p.sample(50, 77);
        let b = p.sample(50, 77);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn standard_normal_peak() {
        let p =
            ParamDistribution::diagonal(&["x"], &[0.0], &[1.0], vec![Transform::Identity]).unwrap();
        let lp = p
            .log_density(&SimParams::from_pairs(&[("x", 0.0)]).unwrap())
            .unwrap();
        assert!((lp + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn density_at_mean() {
        let p = dist(3, 8);
        let expect = -0.5 * (3.0 * LN_2PI + p.covariance().determinant().ln());
        assert!((p.log_density_internal(p.mean()) - expect).abs() < 1e-10);
    }

    #[test]
    fn density_integrates_to_one() {
        let p = dist(3, 13);
        // Grid quadrature over mean ± 6 sd per axis.
        let n = 60;
        let sd: Vec<f64> = (0..3).map(|i| p.covariance()[(i, i)].sqrt()).collect();
        let h: Vec<f64> = sd.iter().map(|s| 12.0 * s / n as f64).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = [i, j, k];
                    let x = DVector::from_fn(3, |a, _| {
                        p.mean()[a] - 6.0 * sd[a] + (idx[a] as f64 + 0.5) * h[a]
                    });
                    total += p.log_density_internal(&x).exp();
                }
            }
        }
        total *= h.iter().product::<f64>();
        assert!((total - 1.0).abs() < 1e-2, "integral {total}");
    }

    #[test]
    fn domain_error_names_the_dimension() {
        let p =
            ParamDistribution::diagonal(&["mass"], &[0.0], &[1.0], vec![Transform::Log]).unwrap();
        let err = p
            .log_density(&SimParams::from_pairs(&[("mass", -1.0)]).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Domain { ref dim, .. } if dim == "mass"));
    }

    #[test]
    fn kl_closed_forms() {
        let p =
            ParamDistribution::diagonal(&["x"], &[1.0], &[1.0], vec![Transform::Identity]).unwrap();
        let q =
            ParamDistribution::diagonal(&["x"], &[0.0], &[1.0], vec![Transform::Identity]).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let r = dist(2, 1);
        assert!(matches!(kl_divergence(&p, &r), Err(Error::Contract(_))));
    }

    #[test]
    fn transforms() {
        assert_eq!(Transform::Identity.to_physical(3.2), 3.2);
        assert!(
            (Transform::Log.to_internal(0.001, "f").unwrap() + 6.907_755_278_982_137).abs() < 1e-12
        );
        assert!(Transform::Log.to_internal(0.0, "f").is_err());
        let a = Transform::Affine { lo: -1.0, hi: 3.0 };
        assert!(a.to_internal(3.0, "a").is_err());
        assert!((a.to_physical(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transform_round_trip_on_random_vectors() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = ParamDistribution::new(
            names,
            DVector::zeros(3),
            DMatrix::identity(3, 3),
            vec![
                Transform::Identity,
                Transform::Log,
                Transform::Affine { lo: 0.5, hi: 2.0 },
            ],
        )
        .unwrap();
        for x in p.sample(100, 3).internal {
            let phys = p.to_physical(&x);
            let back = p.from_physical(&phys).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn clamping_counts_events() {
        let p = ParamDistribution::diagonal(&["x"], &[0.0], &[1.0], vec![Transform::Identity])
            .unwrap()
            .with_bounds(vec![Bounds::new(-0.1, 0.1)])
            .unwrap();
        let s = p.sample(100, 1);
        assert!(s.clamp_events > 50);
        assert!(s.params.iter().all(|sp| sp.values[0].abs() <= 0.1));
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = ParamDistribution::new(
            vec!["a".into(), "b".into()],
            DVector::zeros(2),
            cov,
            vec![Transform::Identity; 2],
        );
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn singular_covariance_is_jittered() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = ParamDistribution::new(
            vec!["a".into(), "b".into()],
            DVector::zeros(2),
            cov,
            vec![Transform::Identity; 2],
        )
        .unwrap();
        let l = p.cholesky();
        assert!((l * l.transpose() - p.covariance()).amax() <= 1e-8 * p.covariance().amax());
    }

    #[test]
    fn json_layout() {
        let p = dist(2, 3);
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["covariance"][0][1], v["covariance"][1][0]);
        assert_eq!(v["transforms"][0], "identity");
        assert!(v.get("bounds").is_none());
        let back: ParamDistribution = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative_and_zero_on_self(s1 in 0u64..10_000, s2 in 0u64..10_000, d in 1usize..5) {
            let p = dist(d, s1);
            let q = dist(d, s2);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-10);
        }

        #[test]
        fn cholesky_reconstructs_covariance(s in 0u64..10_000, d in 1usize..8) {
            let p = dist(d, s);
            let l = p.cholesky();
            prop_assert!((l * l.transpose() - p.covariance()).amax() <= 1e-8 * p.covariance().amax());
            prop_assert!((p.covariance() - p.covariance().transpose()).amax() == 0.0);
        }
    }
}
