//! Variation metrics for drifting environments: risk-level variation
//! `V_α = Σ|α_t − α_{t−1}|` and function variation
//! `V_f = Σ sup_x E_ξ|J_t(x, ξ) − J_{t−1}(x, ξ)|`.

use rayon::prelude::*;

use crate::distributions::RiskLevel;
use crate::error::{Error, Result};
use crate::learner::FeasibleSet;
use crate::model::{CostModel, Schedule};
use crate::oracle;

/// Risk levels `α_1, …, α_T`; queries past `T` repeat the last level.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSchedule {
    values: Vec<f64>,
}

impl RiskSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("risk schedule is empty".into()));
        }
        for &a in &values {
            RiskLevel::new(a)?;
        }
        Ok(Self { values })
    }

    pub fn constant(alpha: f64, horizon: usize) -> Result<Self> {
        Self::new(vec![alpha; horizon.max(1)])
    }

    pub fn from_schedule(schedule: &Schedule, horizon: usize) -> Result<Self> {
        Self::new(schedule.values(horizon.max(1)))
    }

    pub fn from_model<M: CostModel + ?Sized>(model: &M) -> Self {
        Self {
            values: (1..=model.horizon())
                .map(|t| model.risk_level(t).value())
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, t: usize) -> RiskLevel {
        let idx = t.saturating_sub(1).min(self.values.len() - 1);
        RiskLevel::new(self.values[idx]).expect("validated at construction")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `V_α = Σ_{t=2}^{T} |α_t − α_{t−1}|`.
pub fn risk_variation(schedule: &RiskSchedule) -> f64 {
    schedule
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum()
}

/// A variation value with the resolution it was computed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationReport {
    pub value: f64,
    pub grid_points: usize,
    pub quad_points: usize,
    /// Largest coordinate spacing of the decision grid.
    pub grid_spacing: f64,
}

/// `sup_x E_ξ|J_t(x, ξ) − J_s(x, ξ)|` over the decision grid.
pub fn function_distance<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    s: usize,
    grid: &[Vec<f64>],
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    grid.iter()
        .map(|x| {
            nodes
                .iter()
                .zip(weights)
                .map(|(&xi, w)| w * (model.cost(t, x, xi) - model.cost(s, x, xi)).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Function variation over the model's horizon. The supremum over `X` is a
/// grid search with `grid_points` per coordinate; the expectation uses the
/// oracle's noise quadrature with `quad_points` nodes.
pub fn function_variation<M: CostModel + ?Sized>(
    model: &M,
    set: &FeasibleSet,
    quad_points: usize,
    grid_points: usize,
) -> Result<VariationReport> {
    if quad_points < 2 || grid_points < 2 {
        return Err(Error::InvalidParameter(
            "variation resolutions must be at least 2".into(),
        ));
    }
    let grid = set.grid(grid_points)?;
    let (nodes, weights) = oracle::noise_quadrature(model.noise(), quad_points)?;
    let grid_spacing = set
        .lo()
        .iter()
        .zip(set.hi())
        .map(|(l, h)| (h - l) / (grid_points - 1) as f64)
        .fold(0.0, f64::max);

    let summands: Vec<f64> = (2..=model.horizon())
        .into_par_iter()
        .map(|t| match (model.fingerprint(t), model.fingerprint(t - 1)) {
            (Some(a), Some(b)) if a == b => 0.0,
            _ => function_distance(model, t, t - 1, &grid, &nodes, &weights),
        })
        .collect();
    Ok(VariationReport {
        value: summands.iter().sum(),
        grid_points,
        quad_points,
        grid_spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParkingScenario;

    fn parking(horizon: usize, target: Schedule, risk: Schedule) -> ParkingScenario {
        ParkingScenario::new(horizon, target, risk).unwrap()
    }

    /// Independent evaluation of one jump summand: Simpson's rule in ξ on a
    /// fine grid of prices.
    fn jump_summand(r1: f64, r2: f64) -> f64 {
        let a = ParkingScenario::ELASTICITY;
        let mut best: f64 = 0.0;
        for k in 0..=4000 {
            let x = 10.0 * k as f64 / 4000.0;
            let f = |xi: f64| ((xi + a * x - r2).powi(2) - (xi + a * x - r1).powi(2)).abs();
            let m = 2000;
            let h = 0.2 / m as f64;
            let mut s = f(0.9) + f(1.1);
            for i in 1..m {
                s += f(0.9 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            best = best.max(s * h / 3.0 / 0.2);
        }
        best
    }

    #[test]
    fn risk_variation_examples() {
        let s = RiskSchedule::new(vec![0.5, 0.5, 0.8, 0.8]).unwrap();
        assert!((risk_variation(&s) - 0.3).abs() < 1e-12);
        assert_eq!(
            risk_variation(&RiskSchedule::constant(0.4, 100).unwrap()),
            0.0
        );
        let ramp: Vec<f64> = (0..=37).map(|k| 0.5 + 0.3 * k as f64 / 37.0).collect();
        assert!((risk_variation(&RiskSchedule::new(ramp).unwrap()) - 0.3).abs() < 1e-12);
        assert_eq!(risk_variation(&RiskSchedule::new(vec![0.7]).unwrap()), 0.0);
        assert!(RiskSchedule::new(vec![0.5, 0.0]).is_err());
    }

    #[test]
    fn prepending_duplicates_keeps_variation() {
        let base = vec![0.3, 0.9, 0.2, 0.2, 0.6];
        let mut padded = vec![0.3, 0.3, 0.3];
        padded.extend(&base);
        let a = risk_variation(&RiskSchedule::new(base).unwrap());
        let b = risk_variation(&RiskSchedule::new(padded).unwrap());
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn static_function_variation_is_zero() {
        let m = parking(50, Schedule::Constant(0.7), Schedule::Constant(0.5));
        let r = function_variation(&m, &m.set, 129, 1001).unwrap();
        assert_eq!(r.value, 0.0);
        assert!((r.grid_spacing - 0.01).abs() < 1e-15);
    }

    #[test]
    fn single_jump_matches_independent_quadrature() {
        let step = Schedule::Step {
            before: 0.65,
            after: 0.7,
            last_before: 200,
        };
        let m = parking(500, step, Schedule::Constant(0.5));
        let r = function_variation(&m, &m.set, 129, 1001).unwrap();
        let oracle = jump_summand(0.65, 0.7);
        assert!((r.value - oracle).abs() < 1e-6, "{} vs {}", r.value, oracle);
        // The summand is linear in x and peaks at the upper price: 0.05·|2ξ̄ − 3 − 1.35| = 0.1175.
        assert!((r.value - 0.1175).abs() < 1e-9);
    }

    #[test]
    fn doubling_identical_jumps_doubles_variation() {
        let one = Schedule::Values(vec![0.65, 0.65, 0.7, 0.7]);
        let two = Schedule::Values(vec![0.65, 0.7, 0.65, 0.7]);
        let m1 = parking(4, one, Schedule::Constant(0.5));
        let m2 = parking(4, two, Schedule::Constant(0.5));
        let v1 = function_variation(&m1, &m1.set, 65, 201).unwrap().value;
        let v3 = function_variation(&m2, &m2.set, 65, 201).unwrap().value;
        assert!((v3 - 3.0 * v1).abs() < 1e-12);
        let m2 = parking(
            6,
            Schedule::Values(vec![0.65, 0.65, 0.7, 0.7, 0.65, 0.65]),
            Schedule::Constant(0.5),
        );
        let v2 = function_variation(&m2, &m2.set, 65, 201).unwrap().value;
        assert!((v2 - 2.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn finer_grid_dominates() {
        let m = parking(
            100,
            Schedule::Cosine {
                base: 0.7,
                amplitude: 0.05,
                period: 100.0,
            },
            Schedule::Constant(0.5),
        );
        for k in [11, 51, 101] {
            let coarse = function_variation(&m, &m.set, 65, k).unwrap().value;
            let fine = function_variation(&m, &m.set, 65, 2 * k - 1).unwrap().value;
            assert!(fine >= coarse - 1e-12);
        }
    }

    #[test]
    fn switch_sweeps_are_ordered() {
        let mut vf = Vec::new();
        let mut va = Vec::new();
        for m in 1..=3 {
            let alt = |even, odd| Schedule::Alternating {
                even,
                odd,
                exponent: m,
                horizon: 500,
            };
            let s = parking(500, alt(0.65, 0.7), Schedule::Constant(0.5));
            vf.push(function_variation(&s, &s.set, 65, 201).unwrap().value);
            va.push(risk_variation(
                &RiskSchedule::from_schedule(&alt(0.1, 0.8), 500).unwrap(),
            ));
        }
        assert!(vf[0] <= vf[1] && vf[1] <= vf[2], "{vf:?}");
        assert!(va[0] <= va[1] && va[1] <= va[2], "{va:?}");
        // 2^m − 1 switches inside (0, T).
        for (i, v) in va.iter().enumerate() {
            assert!((v - 0.7 * ((1 << (i + 1)) - 1) as f64).abs() < 1e-9);
        }
    }
}
