//! Ground truth for scenarios with a known noise law: true CVaR by
//! deterministic quadrature, grid-search optima, dynamic regret, and
//! evaluators for the estimation-error and variation bounds.

pub mod bounds;
pub mod suites;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::distributions::{CostBound, RiskLevel, WeightedSamples};
use crate::error::{Error, Result};
use crate::learner::FeasibleSet;
use crate::model::{CostModel, NoiseLaw};

pub use bounds::{BoundKind, BoundReport};

/// Oracle resolution: decision-grid points per coordinate and noise nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub grid_points: usize,
    pub quad_points: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            grid_points: 1001,
            quad_points: 129,
        }
    }
}

/// Nodes and weights for the noise expectation.
///
/// Uniform laws use the composite midpoint rule with equal weights. The
/// induced discrete law has an exact CVaR, and refining it converges at
/// second order for smooth costs.
pub fn noise_quadrature(noise: &NoiseLaw, quad_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match *noise {
        NoiseLaw::Uniform { lo, hi } => {
            if quad_points == 0 {
                return Err(Error::InvalidParameter("quadrature needs nodes".into()));
            }
            let h = (hi - lo) / quad_points as f64;
            let nodes = (0..quad_points)
                .map(|i| lo + (i as f64 + 0.5) * h)
                .collect();
            Ok((nodes, vec![1.0 / quad_points as f64; quad_points]))
        }
        NoiseLaw::PointMass(v) => Ok((vec![v], vec![1.0])),
        NoiseLaw::Gaussian { .. } => Err(Error::UnsupportedNoise(
            "quadrature oracle needs bounded support".into(),
        )),
    }
}

/// Discretized law of `J_t(x, ξ)`.
pub fn cost_law<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    x: &[f64],
    quad_points: usize,
) -> Result<WeightedSamples> {
    let (nodes, weights) = noise_quadrature(model.noise(), quad_points)?;
    let values = nodes.iter().map(|&xi| model.cost(t, x, xi)).collect();
    WeightedSamples::new(values, weights)
}

/// `C_t(x) = CVaR_{α_t}[J_t(x, ξ)]` from the discretized noise law.
pub fn true_cvar<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    x: &[f64],
    quad_points: usize,
) -> Result<f64> {
    true_cvar_at(model, t, x, model.risk_level(t), quad_points)
}

/// As [`true_cvar`] with an explicit risk level.
pub fn true_cvar_at<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    x: &[f64],
    alpha: RiskLevel,
    quad_points: usize,
) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(cost_law(model, t, x, quad_points)?.cvar(alpha))
}

/// True `(1−α)`-quantile of `J_t(x, ξ)`: bisection on the exact CDF when the
/// model provides one, else the quadrature law.
pub fn true_var<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    x: &[f64],
    alpha: RiskLevel,
    quad_points: usize,
) -> Result<f64> {
    let law = cost_law(model, t, x, quad_points)?;
    let target = 1.0 - alpha.value();
    if model.cost_cdf(t, x, 0.0).is_none() {
        return Ok(law.var(alpha));
    }
    if target <= 0.0 {
        return Ok(law.values()[0]);
    }
    let cdf = |y: f64| model.cost_cdf(t, x, y).unwrap_or(0.0);
    let vals = law.values();
    let span = (vals[vals.len() - 1] - vals[0]).abs().max(1.0);
    let (mut lo, mut hi) = (vals[0] - span, vals[vals.len() - 1] + span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| {
                if v < bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            },
        )
        .0
}

/// Grid minimizer of `C_t` over the set: a full grid followed by one
/// refinement grid spanning the neighbouring cells of the coarse argmin.
pub fn best_decision<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    set: &FeasibleSet,
    res: Resolution,
) -> Result<(Vec<f64>, f64)> {
    if set.dim() > 2 {
        return Err(Error::DimensionTooLarge(set.dim()));
    }
    let coarse = set.grid(res.grid_points)?;
    let values = coarse
        .iter()
        .map(|x| true_cvar(model, t, x, res.quad_points))
        .collect::<Result<Vec<_>>>()?;
    let k = argmin(&values);
    let center = &coarse[k];

    let spacing: Vec<f64> = (0..set.dim())
        .map(|i| (set.hi()[i] - set.lo()[i]) / (res.grid_points - 1) as f64)
        .collect();
    let lo: Vec<f64> = (0..set.dim())
        .map(|i| (center[i] - spacing[i]).max(set.lo()[i]))
        .collect();
    let hi: Vec<f64> = (0..set.dim())
        .map(|i| (center[i] + spacing[i]).min(set.hi()[i]))
        .collect();
    let local = FeasibleSet::new_box(lo, hi)?;
    let fine = local.grid(res.grid_points.min(201))?;
    let mut best = (center.clone(), values[k]);
    for x in fine {
        let v = true_cvar(model, t, &x, res.quad_points)?;
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Single decision minimizing the horizon-averaged `(1/T)·Σ_t C_t(x)`, by
/// the same two-stage grid as [`best_decision`]. Returns the decision and
/// its averaged cost.
pub fn best_static_decision<M: CostModel + ?Sized>(
    model: &M,
    set: &FeasibleSet,
    res: Resolution,
) -> Result<(Vec<f64>, f64)> {
    if set.dim() > 2 {
        return Err(Error::DimensionTooLarge(set.dim()));
    }
    // Multiplicity of every distinct cost function.
    let mut steps: Vec<(usize, f64)> = Vec::new();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    for t in 1..=model.horizon() {
        match model.fingerprint(t) {
            Some(fp) => match slot.get(&fp) {
                Some(&i) => steps[i].1 += 1.0,
                None => {
                    slot.insert(fp, steps.len());
                    steps.push((t, 1.0));
                }
            },
            None => steps.push((t, 1.0)),
        }
    }
    let horizon = model.horizon() as f64;
    let average = |x: &[f64]| -> Result<f64> {
        let mut total = 0.0;
        for &(t, k) in &steps {
            total += k * true_cvar(model, t, x, res.quad_points)?;
        }
        Ok(total / horizon)
    };
    let scan = |grid: Vec<Vec<f64>>| -> Result<(Vec<f64>, f64)> {
        let values = grid
            .par_iter()
            .map(|x| average(x))
            .collect::<Result<Vec<_>>>()?;
        let k = argmin(&values);
        Ok((grid[k].clone(), values[k]))
    };
    let (center, value) = scan(set.grid(res.grid_points)?)?;
    let lo: Vec<f64> = (0..set.dim())
        .map(|i| {
            let h = (set.hi()[i] - set.lo()[i]) / (res.grid_points - 1) as f64;
            (center[i] - h).max(set.lo()[i])
        })
        .collect();
    let hi: Vec<f64> = (0..set.dim())
        .map(|i| {
            let h = (set.hi()[i] - set.lo()[i]) / (res.grid_points - 1) as f64;
            (center[i] + h).min(set.hi()[i])
        })
        .collect();
    let refined = scan(FeasibleSet::new_box(lo, hi)?.grid(res.grid_points.min(201))?)?;
    Ok(if refined.1 < value {
        refined
    } else {
        (center, value)
    })
}

/// Per-step optima `x_t*`, `C_t(x_t*)`, computed once per distinct cost
/// function (steps sharing a fingerprint share an entry).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub resolution: Resolution,
    pub x_opt: Vec<Vec<f64>>,
    pub c_opt: Vec<f64>,
}

impl OracleTable {
    pub fn build<M: CostModel + ?Sized>(
        model: &M,
        set: &FeasibleSet,
        resolution: Resolution,
    ) -> Result<Self> {
        let horizon = model.horizon();
        // Representative step for every distinct fingerprint, in first-seen order.
        let mut reps: Vec<usize> = Vec::new();
        let mut slot: HashMap<u64, usize> = HashMap::new();
        let mut owner = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            match model.fingerprint(t) {
                Some(fp) => {
                    let idx = *slot.entry(fp).or_insert_with(|| {
                        reps.push(t);
                        reps.len() - 1
                    });
                    owner.push(idx);
                }
                None => {
                    reps.push(t);
                    owner.push(reps.len() - 1);
                }
            }
        }
        let solved = reps
            .par_iter()
            .map(|&t| best_decision(model, t, set, resolution))
            .collect::<Result<Vec<_>>>()?;
        let (x_opt, c_opt) = owner.iter().map(|&i| solved[i].clone()).unzip();
        Ok(Self {
            resolution,
            x_opt,
            c_opt,
        })
    }

    pub fn horizon(&self) -> usize {
        self.c_opt.len()
    }

    pub fn x_opt(&self, t: usize) -> &[f64] {
        &self.x_opt[t - 1]
    }

    pub fn c_opt(&self, t: usize) -> f64 {
        self.c_opt[t - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretStep {
    pub t: usize,
    pub action: Vec<f64>,
    pub cvar_action: f64,
    pub cvar_opt: f64,
    pub x_opt: Vec<f64>,
    pub regret_cum: f64,
}

/// Cumulative dynamic regret `Σ_t C_t(a_t) − C_t(x_t*)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub steps: Vec<RegretStep>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.regret_cum)
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.regret_cum).collect()
    }
}

/// Regret of the played actions (one per step, starting at `t = 1`).
/// Gaps are summed in step order.
pub fn dynamic_regret<M: CostModel + ?Sized>(
    actions: &[Vec<f64>],
    model: &M,
    table: &OracleTable,
) -> Result<RegretTrace> {
    if actions.len() > table.horizon() {
        return Err(Error::StepOutOfRange {
            t: actions.len(),
            horizon: table.horizon(),
        });
    }
    let quad = table.resolution.quad_points;
    let mut cum = 0.0;
    let mut steps = Vec::with_capacity(actions.len());
    for (i, a) in actions.iter().enumerate() {
        let t = i + 1;
        let c = true_cvar(model, t, a, quad)?;
        cum += c - table.c_opt(t);
        steps.push(RegretStep {
            t,
            action: a.clone(),
            cvar_action: c,
            cvar_opt: table.c_opt(t),
            x_opt: table.x_opt(t).to_vec(),
            regret_cum: cum,
        });
    }
    Ok(RegretTrace { steps })
}

/// `U = max |J_t(x, ξ)|` over the decision grid, the quadrature nodes and the
/// support endpoints, across all steps.
pub fn cost_bound<M: CostModel + ?Sized>(
    model: &M,
    set: &FeasibleSet,
    res: Resolution,
) -> Result<CostBound> {
    let grid = set.grid(res.grid_points)?;
    let (mut nodes, _) = noise_quadrature(model.noise(), res.quad_points)?;
    if let NoiseLaw::Uniform { lo, hi } = *model.noise() {
        nodes.push(lo);
        nodes.push(hi);
    }
    let mut steps: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for t in 1..=model.horizon() {
        if model.fingerprint(t).is_none_or(|fp| seen.insert(fp)) {
            steps.push(t);
        }
    }
    let u = steps
        .par_iter()
        .map(|&t| {
            grid.iter()
                .flat_map(|x| nodes.iter().map(move |&xi| model.cost(t, x, xi).abs()))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    CostBound::new(u.max(f64::MIN_POSITIVE))
}

/// Largest finite-difference slope of `C_t` between neighbouring points of a
/// 1-D decision grid; an estimate of its Lipschitz constant on the set.
pub fn lipschitz_estimate<M: CostModel + ?Sized>(
    model: &M,
    t: usize,
    set: &FeasibleSet,
    res: Resolution,
) -> Result<f64> {
    if set.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: set.dim(),
        });
    }
    let grid = set.grid(res.grid_points)?;
    let vals = grid
        .iter()
        .map(|x| true_cvar(model, t, x, res.quad_points))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid
        .windows(2)
        .zip(vals.windows(2))
        .map(|(x, c)| ((c[1] - c[0]) / (x[1][0] - x[0][0])).abs())
        .fold(0.0, f64::max))
}
