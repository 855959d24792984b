//! Empirical cost distributions and exact CVaR/VaR on finite batches.
//!
//! CVaR is taken in its dual form
//!
//! ```text
//! CVaR_α[J] = min_ν { ν + (1/α) E[(J − ν)_+] }
//! ```
//!
//! so that `α = 1` gives the mean and small `α` averages the worst tail.
//! VaR is the left endpoint of the dual minimizer set, i.e. the
//! `(1 − α)`-quantile of the cost.

use crate::error::{Error, Result};

/// Relative slack used when turning `α·n` into an integer tail count.
const COUNT_SLACK: f64 = 1e-9;

fn ceil_count(x: f64) -> usize {
    let c = (x - COUNT_SLACK * x.abs().max(1.0)).ceil();
    if c <= 0.0 {
        0
    } else {
        c as usize
    }
}

/// Tail fraction `α ∈ (0, 1]` of a CVaR objective.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RiskLevel(f64);

impl RiskLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidRiskLevel(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Uniform bound `U` on the magnitude of sampled costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBound(f64);

impl CostBound {
    pub fn new(u: f64) -> Result<Self> {
        if u.is_finite() && u > 0.0 {
            Ok(Self(u))
        } else {
            Err(Error::InvalidCostBound(u))
        }
    }

    /// Smallest bound covering every sample of the batch.
    pub fn covering(samples: &[f64]) -> Result<Self> {
        let u = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::new(if u > 0.0 { u } else { f64::MIN_POSITIVE })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn covers(self, sample: f64) -> bool {
        sample.abs() <= self.0
    }
}

/// A batch of scalar costs sorted ascending, acting as an empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds the empirical distribution of a batch. Duplicates are kept.
    pub fn new(samples: &[f64]) -> Result<Self> {
        Self::from_vec(samples.to_vec())
    }

    pub fn from_vec(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.n() as f64
    }

    /// Right-continuous empirical CDF: `#{samples ≤ y} / n`.
    pub fn cdf(&self, y: f64) -> f64 {
        let count = self.samples.partition_point(|&s| s <= y);
        count as f64 / self.n() as f64
    }

    /// Left limit of the CDF at `y`: `#{samples < y} / n`.
    pub fn cdf_left(&self, y: f64) -> f64 {
        let count = self.samples.partition_point(|&s| s < y);
        count as f64 / self.n() as f64
    }

    /// Returns a copy with every sample shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v + c).collect(),
        }
    }
}

/// VaR estimate `inf{y : F̂(y) ≥ 1 − α}`: the `⌈(1−α)n⌉`-th smallest sample.
pub fn var_estimate(dist: &EmpiricalDistribution, alpha: RiskLevel) -> f64 {
    let n = dist.n();
    let m = ceil_count((1.0 - alpha.value()) * n as f64).clamp(1, n);
    dist.samples[m - 1]
}

/// Exact minimum of the dual objective on the batch.
///
/// With descending order statistics `J(1) ≥ … ≥ J(n)` and `k = ⌈αn⌉` this is
/// `(Σ_{i<k} J(i) + (αn − (k−1))·J(k)) / (αn)`.
pub fn cvar(dist: &EmpiricalDistribution, alpha: RiskLevel) -> f64 {
    let n = dist.n();
    let tail = alpha.value() * n as f64;
    let k = ceil_count(tail).clamp(1, n);
    let head: f64 = dist.samples.iter().rev().take(k - 1).sum();
    let kth = dist.samples[n - k];
    (head + (tail - (k - 1) as f64) * kth) / tail
}

/// `ν + (1/(αn)) Σ (J_i − ν)_+`.
pub fn cvar_dual_objective(dist: &EmpiricalDistribution, alpha: RiskLevel, nu: f64) -> f64 {
    let excess: f64 = dist.samples.iter().map(|&j| (j - nu).max(0.0)).sum();
    nu + excess / (alpha.value() * dist.n() as f64)
}

/// Kolmogorov distance `sup_y |F(y) − G(y)|` between two empirical CDFs.
pub fn ks_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    // Both CDFs are step functions that only jump at sample points, so the
    // supremum is attained at one of them.
    a.samples
        .iter()
        .chain(b.samples.iter())
        .map(|&y| (a.cdf(y) - b.cdf(y)).abs())
        .fold(0.0, f64::max)
}

/// Finite discrete law with non-negative weights summing to one.
///
/// Used for quadrature-discretized noise, where nodes carry unequal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSamples {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    /// Weights are normalized to sum to one.
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: weights.len(),
            });
        }
        if values.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, weights) = pairs.into_iter().unzip();
        Ok(Self { values, weights })
    }

    pub fn uniform(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), vec![1.0; values.len()])
    }

    /// Values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= y);
        self.weights[..idx].iter().sum::<f64>().min(1.0)
    }

    /// Left endpoint of the dual minimizer set: smallest value whose
    /// cumulative weight reaches `1 − α`.
    pub fn var(&self, alpha: RiskLevel) -> f64 {
        let target = 1.0 - alpha.value();
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += w;
            if acc >= target - COUNT_SLACK {
                return *v;
            }
        }
        self.values[self.values.len() - 1]
    }

    /// Exact dual minimum: average of the worst `α` probability mass.
    pub fn cvar(&self, alpha: RiskLevel) -> f64 {
        let a = alpha.value();
        let mut mass = 0.0;
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights).rev() {
            let take = w.min(a - mass);
            if take <= 0.0 {
                break;
            }
            acc += take * v;
            mass += take;
        }
        // Rounding can leave `mass` a hair short of `α` at `α = 1`.
        if mass < a {
            acc += (a - mass) * self.values[0];
        }
        acc / a
    }

    pub fn dual_objective(&self, alpha: RiskLevel, nu: f64) -> f64 {
        let excess: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (v - nu).max(0.0))
            .sum();
        nu + excess / alpha.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(a: f64) -> RiskLevel {
        RiskLevel::new(a).unwrap()
    }

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v).unwrap()
    }

    /// Brute-force dual minimization over a uniform ν-grid spanning the batch.
    fn grid_min(d: &EmpiricalDistribution, a: RiskLevel, points: usize) -> (f64, f64) {
        let lo = d.min() - 1.0;
        let hi = d.max() + 1.0;
        let step = (hi - lo) / (points - 1) as f64;
        let mut best = (f64::INFINITY, lo);
        for i in 0..points {
            let nu = lo + step * i as f64;
            let v = cvar_dual_objective(d, a, nu);
            if v < best.0 {
                best = (v, nu);
            }
        }
        best
    }

    #[test]
    fn build_sorts_and_keeps_duplicates() {
        assert_eq!(dist(&[3.0, 1.0, 2.0]).samples(), &[1.0, 2.0, 3.0]);
        assert_eq!(dist(&[5.0]).n(), 1);
        assert_eq!(dist(&[1.0, 1.0, 2.0]).samples(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(EmpiricalDistribution::new(&[]), Err(Error::EmptyBatch));
        assert_eq!(
            EmpiricalDistribution::new(&[1.0, f64::NAN]),
            Err(Error::NonFiniteSample)
        );
        assert_eq!(
            EmpiricalDistribution::new(&[f64::INFINITY]),
            Err(Error::NonFiniteSample)
        );
    }

    #[test]
    fn cdf_is_right_continuous_step() {
        let d = dist(&[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(1.0), 0.25);
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf_left(2.0), 0.25);
        assert_eq!(d.cdf(10.0), 1.0);
    }

    #[test]
    fn risk_level_domain() {
        assert!(RiskLevel::new(0.0).is_err());
        assert!(RiskLevel::new(1.0 + 1e-12).is_err());
        assert!(RiskLevel::new(f64::NAN).is_err());
        assert!(RiskLevel::new(1.0).is_ok());
    }

    #[test]
    fn var_examples() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        // Grid brute force: the minimizer set of the dual is [2, 3].
        let (_, nu) = grid_min(&d, level(0.5), 60_001);
        assert!((nu - 2.0).abs() < 1e-3);
        assert_eq!(var_estimate(&d, level(0.5)), 2.0);
        assert_eq!(var_estimate(&d, level(1.0)), 1.0);
        assert_eq!(var_estimate(&dist(&[7.0]), level(0.3)), 7.0);
    }

    #[test]
    fn cvar_examples() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        assert!((cvar(&d, level(1.0)) - 2.5).abs() < 1e-15);
        assert!((cvar(&d, level(0.5)) - 3.5).abs() < 1e-15);
        assert!((cvar(&d, level(0.3)) - (4.0 + 0.2 * 3.0) / 1.2).abs() < 1e-12);
        assert!((cvar(&d, level(0.25)) - 4.0).abs() < 1e-15);
        for a in [0.5, 0.3] {
            let (min, _) = grid_min(&d, level(a), 60_001);
            assert!((cvar(&d, level(a)) - min).abs() < 2.0 * 7.0 / 60_000.0);
        }
    }

    #[test]
    fn singleton_cvar_is_the_sample() {
        let d = dist(&[-3.25]);
        for a in [0.01, 0.3, 0.99, 1.0] {
            assert_eq!(cvar(&d, level(a)), -3.25);
        }
    }

    #[test]
    fn dual_objective_examples() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        // 3 + (4 − 3)/(0.5·4)
        assert!((cvar_dual_objective(&d, level(0.5), 3.0) - 3.5).abs() < 1e-15);
        assert!((cvar_dual_objective(&d, level(1.0), 0.0) - 2.5).abs() < 1e-15);
        assert_eq!(cvar_dual_objective(&dist(&[5.0]), level(0.5), 5.0), 5.0);
    }

    #[test]
    fn ks_distance_of_disjoint_batches_is_one() {
        let a = dist(&[0.0, 1.0]);
        let b = dist(&[2.0, 3.0]);
        assert_eq!(ks_distance(&a, &b), 1.0);
        assert_eq!(ks_distance(&a, &a), 0.0);
        let c = dist(&[0.0, 2.0]);
        assert_eq!(ks_distance(&a, &c), 0.5);
    }

    #[test]
    fn weighted_matches_unweighted_on_equal_weights() {
        let v = [0.3, -1.0, 2.5, 2.5, 7.0, 0.0];
        let d = dist(&v);
        let w = WeightedSamples::uniform(&v).unwrap();
        for a in [0.05, 0.2, 1.0 / 3.0, 0.5, 0.75, 1.0] {
            let a = level(a);
            assert!((w.cvar(a) - cvar(&d, a)).abs() < 1e-12);
            assert_eq!(w.var(a), var_estimate(&d, a));
        }
        assert!((w.mean() - d.mean()).abs() < 1e-15);
    }

    #[test]
    fn weighted_cvar_uses_mass_not_counts() {
        // Mass 0.1 at 10, 0.9 at 0: the worst 20% averages 10 and 0 equally.
        let w = WeightedSamples::new(vec![0.0, 10.0], vec![0.9, 0.1]).unwrap();
        assert!((w.cvar(level(0.2)) - 5.0).abs() < 1e-12);
        assert!((w.cvar(level(0.1)) - 10.0).abs() < 1e-12);
        assert!((w.cvar(level(1.0)) - 1.0).abs() < 1e-12);
        assert_eq!(w.var(level(0.2)), 0.0);
        assert!((w.dual_objective(level(0.2), 0.0) - 5.0).abs() < 1e-12);
    }
}
