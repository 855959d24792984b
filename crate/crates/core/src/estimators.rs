//! CVaR gradient estimators.
//!
//! The first-order estimator thresholds sampled cost gradients at the
//! empirical VaR; the zeroth-order estimator scales a random unit direction
//! by the empirical CVaR at the perturbed point.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::{self, EmpiricalDistribution, RiskLevel};
use crate::error::{Error, Result};
use crate::model::CostModel;
use crate::oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    FirstOrder,
    ZerothOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub kind: GradientKind,
    /// Number of samples whose indicator fired (first-order only).
    pub active_count: Option<usize>,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }
}

/// Costs `J_t(x, ξ_i)` and, for first-order feedback, gradients `∇ₓJ_t(x, ξ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub costs: Vec<f64>,
    pub grads: Option<Vec<Vec<f64>>>,
}

impl SampleBatch {
    pub fn new(costs: Vec<f64>, grads: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let batch = Self { costs, grads };
        batch.validate()?;
        Ok(batch)
    }

    pub fn costs_only(costs: Vec<f64>) -> Result<Self> {
        Self::new(costs, None)
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        if let Some(grads) = &self.grads {
            if grads.len() != self.costs.len() {
                return Err(Error::GradientCountMismatch {
                    costs: self.costs.len(),
                    grads: grads.len(),
                });
            }
            let d = grads[0].len();
            for g in grads {
                if g.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: g.len(),
                    });
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample);
                }
            }
        }
        Ok(())
    }
}

/// Perturbation radius `δ` and decision dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub delta: f64,
    pub d: usize,
}

impl SmoothingParams {
    pub fn new(delta: f64, d: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::NonPositiveRadius(delta));
        }
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { delta, d })
    }

    /// Checks `δ < r` so the shrunken set is non-empty.
    pub fn check_inscribed(self, inscribed: f64) -> Result<Self> {
        if self.delta >= inscribed {
            Err(Error::RadiusExceedsInscribed {
                delta: self.delta,
                inscribed,
            })
        } else {
            Ok(self)
        }
    }
}

/// First-order estimate together with the VaR threshold it used.
pub(crate) fn first_order_with_threshold(
    batch: &SampleBatch,
    alpha: RiskLevel,
) -> Result<(GradientEstimate, f64)> {
    batch.validate()?;
    let grads = batch.grads.as_ref().ok_or(Error::MissingGradients)?;
    let dist = EmpiricalDistribution::new(&batch.costs)?;
    let nu = distributions::var_estimate(&dist, alpha);
    let d = grads[0].len();
    let mut g = vec![0.0; d];
    let mut active = 0;
    for (cost, grad) in batch.costs.iter().zip(grads) {
        if *cost >= nu {
            active += 1;
            for (acc, gi) in g.iter_mut().zip(grad) {
                *acc += gi;
            }
        }
    }
    let scale = 1.0 / (batch.n() as f64 * alpha.value());
    g.iter_mut().for_each(|v| *v *= scale);
    Ok((
        GradientEstimate {
            g,
            kind: GradientKind::FirstOrder,
            active_count: Some(active),
        },
        nu,
    ))
}

/// `g = (1/(nα)) Σ 1{J_i ≥ ν̂} ∇J_i` with `ν̂` the empirical VaR of the batch.
///
/// Ties at `ν̂` all count as active; no re-weighting is applied.
pub fn first_order_gradient(batch: &SampleBatch, alpha: RiskLevel) -> Result<GradientEstimate> {
    first_order_with_threshold(batch, alpha).map(|(g, _)| g)
}

/// Uniform direction on the unit sphere in `ℝ^d` (normalized Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return Ok(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// One-point estimate `g = (d/δ) · CVaR · u`.
pub fn zeroth_order_gradient(
    cvar_value: f64,
    u: &[f64],
    params: SmoothingParams,
) -> Result<GradientEstimate> {
    let params = SmoothingParams::new(params.delta, params.d)?;
    if u.len() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: u.len(),
        });
    }
    if !cvar_value.is_finite() {
        return Err(Error::NonFiniteSample);
    }
    let scale = params.d as f64 / params.delta * cvar_value;
    Ok(GradientEstimate {
        g: u.iter().map(|ui| scale * ui).collect(),
        kind: GradientKind::ZerothOrder,
        active_count: None,
    })
}

/// Monte Carlo estimate of `E_u[C_t(x + δu)]` over `m` sphere draws using the
/// quadrature oracle. The caller keeps `x` inside the shrunken set.
pub fn smoothed_cvar_oracle<M: CostModel, R: Rng + ?Sized>(
    model: &M,
    t: usize,
    x: &[f64],
    params: SmoothingParams,
    m: usize,
    quad_points: usize,
    rng: &mut R,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sphere draw".into(),
        ));
    }
    let params = SmoothingParams::new(params.delta, params.d)?;
    if x.len() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: x.len(),
        });
    }
    let mut total = 0.0;
    let mut point = vec![0.0; params.d];
    for _ in 0..m {
        let u = sample_unit_sphere(params.d, rng)?;
        for ((p, xi), ui) in point.iter_mut().zip(x).zip(&u) {
            *p = xi + params.delta * ui;
        }
        total += oracle::true_cvar(model, t, &point, quad_points)?;
    }
    Ok(total / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParkingScenario, Schedule};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn level(a: f64) -> RiskLevel {
        RiskLevel::new(a).unwrap()
    }

    #[test]
    fn first_order_examples() {
        let batch = SampleBatch::new(vec![1.0, 2.0, 3.0, 4.0], Some(vec![vec![1.0]; 4])).unwrap();
        let (g, nu) = first_order_with_threshold(&batch, level(0.5)).unwrap();
        // VaR oracle gives ν̂ = 2, indicators fire on {2, 3, 4}.
        assert_eq!(nu, 2.0);
        assert_eq!(g.active_count, Some(3));
        assert!((g.g[0] - 1.5).abs() < 1e-15);

        let single = SampleBatch::new(vec![0.7], Some(vec![vec![-2.5, 4.0]])).unwrap();
        let g = first_order_gradient(&single, level(1.0)).unwrap();
        assert_eq!(g.g, vec![-2.5, 4.0]);

        let zero = SampleBatch::new(vec![1.0, 2.0], Some(vec![vec![0.0]; 2])).unwrap();
        for a in [0.1, 0.5, 1.0] {
            assert_eq!(first_order_gradient(&zero, level(a)).unwrap().g, vec![0.0]);
        }
    }

    #[test]
    fn first_order_needs_gradients() {
        let batch = SampleBatch::costs_only(vec![1.0, 2.0]).unwrap();
        assert_eq!(
            first_order_gradient(&batch, level(0.5)),
            Err(Error::MissingGradients)
        );
        assert!(SampleBatch::new(vec![1.0], Some(vec![])).is_err());
    }

    #[test]
    fn ties_at_threshold_all_fire() {
        let batch = SampleBatch::new(vec![1.0, 3.0, 3.0, 3.0], Some(vec![vec![1.0]; 4])).unwrap();
        let g = first_order_gradient(&batch, level(0.25)).unwrap();
        assert_eq!(g.active_count, Some(3));
        assert!((g.g[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = sample_unit_sphere(1, &mut rng).unwrap();
            assert!(u[0] == 1.0 || u[0] == -1.0);
        }
        for d in [2, 3, 10] {
            let u = sample_unit_sphere(d, &mut rng).unwrap();
            let n: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(sample_unit_sphere(0, &mut rng), Err(Error::ZeroDimension));
    }

    #[test]
    fn sphere_mean_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..draws {
            let u = sample_unit_sphere(2, &mut rng).unwrap();
            mean[0] += u[0] / draws as f64;
            mean[1] += u[1] / draws as f64;
        }
        assert!(mean[0].abs() < 0.02 && mean[1].abs() < 0.02);
    }

    #[test]
    fn zeroth_order_examples() {
        let p1 = SmoothingParams::new(0.1, 1).unwrap();
        assert!((zeroth_order_gradient(3.5, &[1.0], p1).unwrap().g[0] - 35.0).abs() < 1e-12);
        assert_eq!(
            zeroth_order_gradient(0.0, &[-1.0], p1).unwrap().g,
            vec![0.0]
        );
        let p2 = SmoothingParams::new(0.5, 2).unwrap();
        let g = zeroth_order_gradient(2.0, &[0.6, 0.8], p2).unwrap();
        assert!((g.g[0] - 4.8).abs() < 1e-12 && (g.g[1] - 6.4).abs() < 1e-12);
        assert!(SmoothingParams::new(0.0, 1).is_err());
        assert!(SmoothingParams::new(-1.0, 1).is_err());
        assert!(zeroth_order_gradient(1.0, &[1.0], SmoothingParams { delta: 0.0, d: 1 }).is_err());
    }

    #[test]
    fn smoothed_oracle_on_constant_and_quadratic() {
        // Degenerate noise turns the parking cost into a deterministic quadratic.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flat = ParkingScenario::new(5, Schedule::Constant(0.7), Schedule::Constant(0.5))
            .unwrap()
            .with_noise(crate::model::NoiseLaw::PointMass(0.7))
            .with_regularization(0.0)
            .with_elasticity(1.0);
        let params = SmoothingParams::new(0.1, 1).unwrap();
        // C(x) = x², so the sphere average at 0 is δ².
        let v = smoothed_cvar_oracle(&flat, 1, &[0.0], params, 200, 9, &mut rng).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
        let constant = flat.clone().with_elasticity(0.0);
        let v = smoothed_cvar_oracle(&constant, 1, &[3.0], params, 50, 9, &mut rng).unwrap();
        assert_eq!(v, 0.0);
        assert!(smoothed_cvar_oracle(&flat, 1, &[0.0], params, 0, 9, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn first_order_norm_bounded_by_g_over_alpha(
            costs in prop::collection::vec(-10.0f64..10.0, 1..40),
            seed in any::<u64>(),
            alpha in 0.01f64..=1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grads: Vec<Vec<f64>> = costs
                .iter()
                .map(|_| sample_unit_sphere(3, &mut rng).unwrap().into_iter().map(|v| 2.0 * v).collect())
                .collect();
            let batch = SampleBatch::new(costs, Some(grads)).unwrap();
            let g = first_order_gradient(&batch, level(alpha)).unwrap();
            prop_assert!(g.active_count.unwrap() >= 1);
            prop_assert!(g.norm() <= 2.0 / alpha + 1e-9);
        }

        #[test]
        fn zeroth_order_norm_and_linearity(
            c in -50.0f64..50.0,
            k in -3.0f64..3.0,
            delta in 0.01f64..2.0,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = sample_unit_sphere(4, &mut rng).unwrap();
            let p = SmoothingParams::new(delta, 4).unwrap();
            let g = zeroth_order_gradient(c, &u, p).unwrap();
            prop_assert!((g.norm() - 4.0 / delta * c.abs()).abs() <= 1e-9 * (1.0 + g.norm()));
            let gk = zeroth_order_gradient(k * c, &u, p).unwrap();
            for (a, b) in g.g.iter().zip(&gk.g) {
                prop_assert!((k * a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}
