//! Stochastic cost models and the parking-lot pricing scenario.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::distributions::RiskLevel;
use crate::error::{Error, Result};
use crate::estimators::SampleBatch;
use crate::learner::{FeasibleSet, Feedback};

/// Law of the scalar noise `ξ` entering a cost function.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLaw {
    Uniform {
        lo: f64,
        hi: f64,
    },
    PointMass(f64),
    /// Sampling only; the quadrature oracle needs bounded support.
    Gaussian {
        mean: f64,
        sd: f64,
    },
}

impl NoiseLaw {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self::Uniform { lo, hi })
        } else {
            Err(Error::InvalidParameter(format!(
                "uniform noise needs lo < hi, got [{lo}, {hi}]"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::PointMass(v) => v,
            Self::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Self::PointMass(_) => 0.0,
            Self::Gaussian { sd, .. } => sd * sd,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => Uniform::new(lo, hi)
                .expect("validated uniform support")
                .sample(rng),
            Self::PointMass(v) => v,
            Self::Gaussian { mean, sd } => Normal::new(mean, sd)
                .expect("finite gaussian parameters")
                .sample(rng),
        }
    }
}

/// Per-step scalar schedule indexed by `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `before` for `t ≤ last_before`, `after` afterwards.
    Step {
        before: f64,
        after: f64,
        last_before: usize,
    },
    /// `base + amplitude · cos(2πt / period)`.
    Cosine {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// `even` when `⌊2^m t / T⌋` is even, `odd` otherwise; `t = T` stays in
    /// the last block.
    Alternating {
        even: f64,
        odd: f64,
        exponent: u32,
        horizon: usize,
    },
    /// Explicit values for `t = 1..=len`; the last value repeats beyond.
    Values(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Step {
                before,
                after,
                last_before,
            } => {
                if t <= *last_before {
                    *before
                } else {
                    *after
                }
            }
            Self::Cosine {
                base,
                amplitude,
                period,
            } => base + amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).cos(),
            Self::Alternating {
                even,
                odd,
                exponent,
                horizon,
            } => {
                // The final step would otherwise start a fresh block of length one.
                let blocks = 1u64 << exponent;
                let k = ((blocks * t as u64) / *horizon as u64).min(blocks - 1);
                if k.is_multiple_of(2) {
                    *even
                } else {
                    *odd
                }
            }
            Self::Values(v) => {
                let idx = t.saturating_sub(1).min(v.len().saturating_sub(1));
                v.get(idx).copied().unwrap_or(f64::NAN)
            }
        }
    }

    pub fn values(&self, horizon: usize) -> Vec<f64> {
        (1..=horizon).map(|t| self.at(t)).collect()
    }
}

/// A sequence of stochastic costs `J_t(x, ξ)` with per-step risk levels.
pub trait CostModel: Sync {
    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn noise(&self) -> &NoiseLaw;
    fn risk_level(&self, t: usize) -> RiskLevel;
    fn cost(&self, t: usize, x: &[f64], xi: f64) -> f64;
    fn cost_gradient(&self, t: usize, x: &[f64], xi: f64) -> Vec<f64>;

    /// Steps with equal fingerprints share the same cost function and
    /// risk level. `None` disables caching.
    fn fingerprint(&self, _t: usize) -> Option<u64> {
        None
    }

    /// Exact CDF of `J_t(x, ξ)` at `y`, when available in closed form.
    fn cost_cdf(&self, _t: usize, _x: &[f64], _y: f64) -> Option<f64> {
        None
    }
}

/// Parking-lot dynamic pricing: occupancy `r = ξ + A·x`, cost
/// `J_t(x, ξ) = (ξ + A·x − r^d_t)² + (v/2)·x²` with a target-occupancy
/// schedule `r^d_t` and a risk-level schedule `α_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParkingScenario {
    pub horizon: usize,
    pub elasticity: f64,
    pub regularization: f64,
    pub noise: NoiseLaw,
    pub target: Schedule,
    pub risk: Schedule,
    pub set: FeasibleSet,
}

impl ParkingScenario {
    pub const ELASTICITY: f64 = -0.15;
    pub const REGULARIZATION: f64 = 0.005;
    pub const NOISE_LO: f64 = 0.9;
    pub const NOISE_HI: f64 = 1.1;
    pub const PRICE_LO: f64 = 0.0;
    pub const PRICE_HI: f64 = 10.0;

    /// Case-study constants: `A = −0.15`, `v = 0.005`, `ξ ∼ U[0.9, 1.1]`,
    /// prices in `[0, 10]`.
    pub fn new(horizon: usize, target: Schedule, risk: Schedule) -> Result<Self> {
        Self {
            horizon,
            elasticity: Self::ELASTICITY,
            regularization: Self::REGULARIZATION,
            noise: NoiseLaw::uniform(Self::NOISE_LO, Self::NOISE_HI)?,
            target,
            risk,
            set: FeasibleSet::new_box(vec![Self::PRICE_LO], vec![Self::PRICE_HI])?,
        }
        .validated()
    }

    pub fn with_noise(mut self, noise: NoiseLaw) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_regularization(mut self, v: f64) -> Self {
        self.regularization = v;
        self
    }

    pub fn with_elasticity(mut self, a: f64) -> Self {
        self.elasticity = a;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.set.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.set.dim(),
            });
        }
        for t in 1..=self.horizon {
            RiskLevel::new(self.risk.at(t))?;
            if !self.target.at(t).is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "target occupancy at t={t} is not finite"
                )));
            }
        }
        Ok(self)
    }

    pub fn target_at(&self, t: usize) -> f64 {
        self.target.at(t)
    }

    pub fn occupancy(&self, price: f64, xi: f64) -> f64 {
        xi + self.elasticity * price
    }

    /// Bounds `(p̲, L_g)` on the density of `J_t(x, ξ)` over its range for
    /// uniform noise. `None` when the density is unbounded, which happens
    /// when `ξ + A·x − r^d` can vanish.
    pub fn density_bounds(&self, t: usize, price: f64) -> Option<(f64, f64)> {
        let NoiseLaw::Uniform { lo, hi } = self.noise else {
            return None;
        };
        let shift = self.elasticity * price - self.target_at(t);
        let (a, b) = (lo + shift, hi + shift);
        if a <= 0.0 && b >= 0.0 {
            return None;
        }
        let (near, far) = if a > 0.0 { (a, b) } else { (-b, -a) };
        // J = z² + k with z uniform on [a, b]: density 1/(2|z|(b − a)).
        let width = b - a;
        Some((1.0 / (2.0 * far * width), 1.0 / (2.0 * near * width)))
    }
}

impl CostModel for ParkingScenario {
    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    fn risk_level(&self, t: usize) -> RiskLevel {
        RiskLevel::new(self.risk.at(t)).expect("risk schedule validated at construction")
    }

    fn cost(&self, t: usize, x: &[f64], xi: f64) -> f64 {
        let gap = xi + self.elasticity * x[0] - self.target_at(t);
        gap * gap + 0.5 * self.regularization * x[0] * x[0]
    }

    fn cost_gradient(&self, t: usize, x: &[f64], xi: f64) -> Vec<f64> {
        let gap = xi + self.elasticity * x[0] - self.target_at(t);
        vec![2.0 * self.elasticity * gap + self.regularization * x[0]]
    }

    fn fingerprint(&self, t: usize) -> Option<u64> {
        let mut h = DefaultHasher::new();
        self.target_at(t).to_bits().hash(&mut h);
        self.risk.at(t).to_bits().hash(&mut h);
        Some(h.finish())
    }

    fn cost_cdf(&self, t: usize, x: &[f64], y: f64) -> Option<f64> {
        let floor = 0.5 * self.regularization * x[0] * x[0];
        let shift = self.elasticity * x[0] - self.target_at(t);
        match self.noise {
            NoiseLaw::Uniform { lo, hi } => {
                if y < floor {
                    return Some(0.0);
                }
                let w = (y - floor).sqrt();
                let left = (-shift - w).max(lo);
                let right = (-shift + w).min(hi);
                Some(((right - left) / (hi - lo)).clamp(0.0, 1.0))
            }
            NoiseLaw::PointMass(v) => Some(if self.cost(t, x, v) <= y { 1.0 } else { 0.0 }),
            NoiseLaw::Gaussian { .. } => None,
        }
    }
}

/// Draws i.i.d. noise from a model's law and answers learner queries.
///
/// The noise behind the most recent batch is kept for logging.
pub struct ModelFeedback<'a, M: CostModel, R: Rng> {
    model: &'a M,
    rng: R,
    last_noise: Vec<f64>,
}

impl<'a, M: CostModel, R: Rng> ModelFeedback<'a, M, R> {
    pub fn new(model: &'a M, rng: R) -> Self {
        Self {
            model,
            rng,
            last_noise: Vec::new(),
        }
    }

    pub fn last_noise(&self) -> &[f64] {
        &self.last_noise
    }
}

impl<M: CostModel, R: Rng> Feedback for ModelFeedback<'_, M, R> {
    fn sample(&mut self, t: usize, x: &[f64], n: usize, with_gradients: bool) -> SampleBatch {
        self.last_noise.clear();
        let mut costs = Vec::with_capacity(n);
        let mut grads = with_gradients.then(|| Vec::with_capacity(n));
        for _ in 0..n {
            let xi = self.model.noise().sample(&mut self.rng);
            self.last_noise.push(xi);
            costs.push(self.model.cost(t, x, xi));
            if let Some(g) = grads.as_mut() {
                g.push(self.model.cost_gradient(t, x, xi));
            }
        }
        SampleBatch { costs, grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> ParkingScenario {
        ParkingScenario::new(
            500,
            Schedule::Step {
                before: 0.65,
                after: 0.7,
                last_before: 200,
            },
            Schedule::Step {
                before: 0.5,
                after: 0.8,
                last_before: 200,
            },
        )
        .unwrap()
    }

    #[test]
    fn schedules() {
        let s = step();
        assert_eq!(s.target_at(200), 0.65);
        assert_eq!(s.target_at(201), 0.7);
        let c = Schedule::Cosine {
            base: 0.7,
            amplitude: 0.05,
            period: 500.0,
        };
        assert!((c.at(0) - 0.75).abs() < 1e-15);
        assert!((c.at(250) - 0.65).abs() < 1e-15);
        let alt = Schedule::Alternating {
            even: 0.1,
            odd: 0.8,
            exponent: 1,
            horizon: 500,
        };
        assert_eq!(alt.at(249), 0.1);
        assert_eq!(alt.at(250), 0.8);
        assert_eq!(alt.at(499), 0.8);
        assert_eq!(Schedule::Values(vec![1.0, 2.0]).at(5), 2.0);
    }

    #[test]
    fn invalid_risk_schedule_rejected() {
        let r = ParkingScenario::new(10, Schedule::Constant(0.7), Schedule::Constant(1.5));
        assert!(matches!(r, Err(Error::InvalidRiskLevel(_))));
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let s = step();
        for &(t, x, xi) in &[(1, 2.0, 0.93), (300, 7.5, 1.07), (250, 0.0, 1.0)] {
            let h = 1e-6;
            let fd = (s.cost(t, &[x + h], xi) - s.cost(t, &[x - h], xi)) / (2.0 * h);
            assert!((fd - s.cost_gradient(t, &[x], xi)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn cdf_agrees_with_fine_enumeration() {
        let s = step();
        let x = [2.0];
        let n = 200_000;
        let mut costs: Vec<f64> = (0..n)
            .map(|i| {
                let xi = 0.9 + 0.2 * (i as f64 + 0.5) / n as f64;
                s.cost(300, &x, xi)
            })
            .collect();
        costs.sort_by(f64::total_cmp);
        for q in [0.1, 0.37, 0.5, 0.9] {
            let y = costs[(q * n as f64) as usize];
            assert!((s.cost_cdf(300, &x, y).unwrap() - q).abs() < 1e-4);
        }
    }

    #[test]
    fn density_bounds_for_one_sided_gap() {
        let s = step();
        // t = 300, x = 0: z = ξ − 0.7 ∈ [0.2, 0.4], density 1/(2·0.2·z).
        let (lo, hi) = s.density_bounds(300, 0.0).unwrap();
        assert!((lo - 1.0 / (2.0 * 0.4 * 0.2)).abs() < 1e-9);
        assert!((hi - 1.0 / (2.0 * 0.2 * 0.2)).abs() < 1e-9);
        // x = 2: z straddles zero.
        assert!(s.density_bounds(300, 2.0).is_none());
    }
}
