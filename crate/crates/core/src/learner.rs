//! Online projected-gradient learners for time-varying CVaR objectives.
//!
//! Both learners keep a single decision vector and take one projected step
//! per round. The first-order learner queries costs and gradients at its
//! decision; the zeroth-order learner plays a randomly perturbed decision,
//! queries costs only, and projects onto a shrunken copy of the feasible set
//! so every perturbed play stays feasible.

use rand::Rng;

use crate::distributions::{self, EmpiricalDistribution, RiskLevel};
use crate::error::{Error, Result};
use crate::estimators::{self, GradientEstimate, SampleBatch, SmoothingParams};
use crate::variation::RiskSchedule;

/// Slack for feasibility checks on projected iterates.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Axis-aligned box with an interior center used as the origin for shrinking.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
    center: Vec<f64>,
}

impl FeasibleSet {
    /// Box centered at its midpoint.
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let center = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        Self::with_center(lo, hi, center)
    }

    pub fn with_center(lo: Vec<f64>, hi: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if hi.len() != lo.len() || center.len() != lo.len() {
            return Err(Error::InvalidSet(
                "bounds and center differ in length".into(),
            ));
        }
        for i in 0..lo.len() {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i]) {
                return Err(Error::InvalidSet(format!(
                    "coordinate {i}: need lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
            if !(center[i] > lo[i] && center[i] < hi[i]) {
                return Err(Error::InvalidSet(format!(
                    "coordinate {i}: center {} not strictly inside",
                    center[i]
                )));
            }
        }
        Ok(Self { lo, hi, center })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Radius of the largest ball around the center inside the box.
    pub fn inscribed_radius(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.center[i] - self.lo[i]).min(self.hi[i] - self.center[i]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Euclidean projection; for a box this is coordinate-wise clamping.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    /// The set scaled by `1 − δ/r` about its center. Any point of the result
    /// plus a perturbation of norm at most `δ` lies in the original set.
    pub fn shrink(&self, delta: f64) -> Result<Self> {
        let r = self.inscribed_radius();
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::NonPositiveRadius(delta));
        }
        if delta >= r {
            return Err(Error::RadiusExceedsInscribed {
                delta,
                inscribed: r,
            });
        }
        let s = 1.0 - delta / r;
        let scale = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(&self.center)
                .map(|(x, c)| c + s * (x - c))
                .collect()
        };
        Ok(Self {
            lo: scale(&self.lo),
            hi: scale(&self.hi),
            center: self.center.clone(),
        })
    }

    /// Uniform tensor grid with `per_dim` points per coordinate (endpoints
    /// included). Limited to `d ≤ 2`.
    pub fn grid(&self, per_dim: usize) -> Result<Vec<Vec<f64>>> {
        if self.dim() > 2 {
            return Err(Error::DimensionTooLarge(self.dim()));
        }
        if per_dim < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least 2 points".into(),
            ));
        }
        let axis = |i: usize| -> Vec<f64> {
            let step = (self.hi[i] - self.lo[i]) / (per_dim - 1) as f64;
            (0..per_dim)
                .map(|k| {
                    if k + 1 == per_dim {
                        self.hi[i]
                    } else {
                        self.lo[i] + step * k as f64
                    }
                })
                .collect()
        };
        let first = axis(0);
        if self.dim() == 1 {
            return Ok(first.into_iter().map(|v| vec![v]).collect());
        }
        let second = axis(1);
        Ok(first
            .iter()
            .flat_map(|a| second.iter().map(move |b| vec![*a, *b]))
            .collect())
    }
}

/// Euclidean projection onto `set`.
pub fn project(set: &FeasibleSet, x: &[f64]) -> Vec<f64> {
    set.project(x)
}

/// Shrunken set `X^δ`.
pub fn shrink_set(set: &FeasibleSet, delta: f64) -> Result<FeasibleSet> {
    set.shrink(delta)
}

/// Per-step sample counts `n_t`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleCounts {
    Constant(usize),
    /// `n_t = t`.
    Growing,
    /// Explicit counts for `t = 1..=len`; the last count repeats beyond.
    Custom(Vec<usize>),
}

/// Sampling schedule with the budget exponent `a` and constant `c` of the
/// requirement `Σ_t 1/√n_t ≤ c·T^{1−a/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    pub counts: SampleCounts,
    pub a: f64,
    pub c: f64,
}

impl SamplingSchedule {
    pub fn new(counts: SampleCounts, a: f64, c: f64) -> Result<Self> {
        // a = 0 is the exact exponent of single-sample steps with c = 1.
        if !(a >= 0.0 && a.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "budget exponent must be non-negative and constant positive, got a={a}, c={c}"
            )));
        }
        match &counts {
            SampleCounts::Constant(0) => {
                return Err(Error::InvalidParameter("n_t must be at least 1".into()))
            }
            SampleCounts::Custom(v) if v.is_empty() || v.contains(&0) => {
                return Err(Error::InvalidParameter(
                    "custom counts must be non-empty and positive".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { counts, a, c })
    }

    pub fn constant(n: usize) -> Result<Self> {
        Self::new(SampleCounts::Constant(n), 1.0, 1.0)
    }

    pub fn n_at(&self, t: usize) -> usize {
        match &self.counts {
            SampleCounts::Constant(n) => *n,
            SampleCounts::Growing => t.max(1),
            SampleCounts::Custom(v) => v[(t.max(1) - 1).min(v.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Checks `Σ_{t=1}^{T} 1/√n_t ≤ c·T^{1−a/2}` by direct summation.
pub fn validate_budget(schedule: &SamplingSchedule, horizon: usize) -> BudgetReport {
    let lhs: f64 = (1..=horizon)
        .map(|t| 1.0 / (schedule.n_at(t) as f64).sqrt())
        .sum();
    let rhs = schedule.c * (horizon as f64).powf(1.0 - schedule.a / 2.0);
    // Relative slack absorbs summation rounding at exact equality.
    BudgetReport {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + 1e-12),
    }
}

/// Smallest constant `n` with `T/√n ≤ c·T^{1−a/2}`, i.e. `⌈T^a / c²⌉`.
pub fn constant_schedule_for_budget(horizon: usize, a: f64, c: f64) -> usize {
    let t = horizon as f64;
    let exact = t.powf(a) / (c * c);
    let mut n = ((exact * (1.0 - 1e-12)).ceil() as usize).max(1);
    let fits = |n: usize| t / (n as f64).sqrt() <= c * t.powf(1.0 - a / 2.0) * (1.0 + 1e-12);
    while n > 1 && fits(n - 1) {
        n -= 1;
    }
    while !fits(n) {
        n += 1;
    }
    n
}

/// Largest budget exponent `a` satisfied by a constant count `n` over `T`
/// steps: `a = 2·ln(c√n)/ln T`.
pub fn budget_exponent_for_constant(n: usize, horizon: usize, c: f64) -> f64 {
    if horizon <= 1 {
        return f64::INFINITY;
    }
    2.0 * (c * (n as f64).sqrt()).ln() / (horizon as f64).ln()
}

/// Parameters for the first-order learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderParams {
    pub eta: f64,
    /// Analysis window length; recorded only.
    pub window: f64,
}

/// Parameters for the zeroth-order learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZerothOrderParams {
    pub eta: f64,
    pub delta: f64,
    /// Analysis window length; recorded only.
    pub window: f64,
}

fn total_variation(v_alpha: f64, v_f: f64) -> f64 {
    let v = v_alpha + v_f;
    // The formulas degenerate at zero variation; any positive constant keeps
    // the static-case rates.
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// `η = (V/T)^{1/3}`, window `(T/V)^{2/3}` with `V = V_α + V_f`.
pub fn select_params_first_order(horizon: usize, v_alpha: f64, v_f: f64) -> FirstOrderParams {
    let t = horizon.max(1) as f64;
    let v = total_variation(v_alpha, v_f);
    FirstOrderParams {
        eta: (v / t).cbrt(),
        window: (t / v).powf(2.0 / 3.0),
    }
}

/// Zeroth-order step size and smoothing radius.
///
/// For `a ≤ 4/5`: `δ = T^{−a/4}V^{1/5}`, `η = T^{−3a/4}V^{3/5}`, window
/// `T^a V^{−4/5}`; otherwise the `a = 4/5` exponents apply with `T^{−1/5}`,
/// `T^{−3/5}`, `T^{4/5}`. `δ` is clamped to `0.9·r`.
pub fn select_params_zeroth_order(
    horizon: usize,
    v_alpha: f64,
    v_f: f64,
    a: f64,
    inscribed_radius: f64,
) -> ZerothOrderParams {
    let t = horizon.max(1) as f64;
    let v = total_variation(v_alpha, v_f);
    let (delta, eta, window) = if a <= 0.8 {
        (
            t.powf(-a / 4.0) * v.powf(0.2),
            t.powf(-0.75 * a) * v.powf(0.6),
            t.powf(a) * v.powf(-0.8),
        )
    } else {
        (
            t.powf(-0.2) * v.powf(0.2),
            t.powf(-0.6) * v.powf(0.6),
            t.powf(0.8) * v.powf(-0.8),
        )
    };
    ZerothOrderParams {
        eta,
        delta: delta.min(0.9 * inscribed_radius),
        window,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearningMode {
    FirstOrder,
    ZerothOrder,
}

impl LearningMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::FirstOrder => "first",
            Self::ZerothOrder => "zeroth",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub mode: LearningMode,
    pub eta: f64,
    /// Smoothing radius; ignored in first-order mode.
    pub delta: f64,
    pub schedule: SamplingSchedule,
    pub risk_schedule: RiskSchedule,
}

impl LearnerConfig {
    pub fn validate(&self, set: &FeasibleSet) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.eta
            )));
        }
        if self.mode == LearningMode::ZerothOrder {
            SmoothingParams::new(self.delta, set.dim())?.check_inscribed(set.inscribed_radius())?;
        }
        Ok(())
    }

    pub fn alpha_at(&self, t: usize) -> RiskLevel {
        self.risk_schedule.at(t)
    }

    /// Set the iterates live in: `X` for first-order, `X^δ` for zeroth-order.
    pub fn iterate_set(&self, set: &FeasibleSet) -> Result<FeasibleSet> {
        match self.mode {
            LearningMode::FirstOrder => Ok(set.clone()),
            LearningMode::ZerothOrder => set.shrink(self.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub t: usize,
    pub x: Vec<f64>,
}

/// Everything a learner observed and computed in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    /// Perturbed play (zeroth-order only).
    pub x_hat: Option<Vec<f64>>,
    /// Sphere direction (zeroth-order only).
    pub u: Option<Vec<f64>>,
    pub gradient: GradientEstimate,
    /// Empirical VaR threshold (first-order only).
    pub var_estimate: Option<f64>,
    /// Empirical CVaR at the played point (zeroth-order only).
    pub cvar_estimate: Option<f64>,
    pub n_t: usize,
    pub alpha: f64,
    pub next_x: Vec<f64>,
}

impl StepRecord {
    /// The decision actually played this round.
    pub fn action(&self) -> &[f64] {
        self.x_hat.as_deref().unwrap_or(&self.x)
    }
}

/// Source of stochastic cost samples at a queried decision.
pub trait Feedback {
    fn sample(&mut self, t: usize, x: &[f64], n: usize, with_gradients: bool) -> SampleBatch;
}

fn descend(set: &FeasibleSet, x: &[f64], eta: f64, g: &[f64]) -> Vec<f64> {
    let moved: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect();
    set.project(&moved)
}

/// One round of the first-order learner:
/// `x_{t+1} = P_X(x_t − η·g¹)` with `g¹` from sampled costs and gradients.
pub fn step_first_order<F: Feedback + ?Sized>(
    state: &LearnerState,
    config: &LearnerConfig,
    set: &FeasibleSet,
    feedback: &mut F,
) -> Result<(LearnerState, StepRecord)> {
    let t = state.t;
    let n_t = config.schedule.n_at(t);
    let alpha = config.alpha_at(t);
    let batch = feedback.sample(t, &state.x, n_t, true);
    let (gradient, nu) = estimators::first_order_with_threshold(&batch, alpha)?;
    if gradient.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: gradient.dim(),
        });
    }
    let next_x = descend(set, &state.x, config.eta, &gradient.g);
    let record = StepRecord {
        t,
        x: state.x.clone(),
        x_hat: None,
        u: None,
        gradient,
        var_estimate: Some(nu),
        cvar_estimate: None,
        n_t,
        alpha: alpha.value(),
        next_x: next_x.clone(),
    };
    Ok((
        LearnerState {
            t: t + 1,
            x: next_x,
        },
        record,
    ))
}

/// One round of the zeroth-order learner: play `x̂ = x_t + δu`, estimate the
/// CVaR at `x̂` from cost samples, and step `x_{t+1} = P_{X^δ}(x_t − η·g⁰)`.
pub fn step_zeroth_order<F: Feedback + ?Sized, R: Rng + ?Sized>(
    state: &LearnerState,
    config: &LearnerConfig,
    set: &FeasibleSet,
    feedback: &mut F,
    rng: &mut R,
) -> Result<(LearnerState, StepRecord)> {
    let t = state.t;
    let d = set.dim();
    let params = SmoothingParams::new(config.delta, d)?.check_inscribed(set.inscribed_radius())?;
    let shrunk = set.shrink(params.delta)?;
    let n_t = config.schedule.n_at(t);
    let alpha = config.alpha_at(t);

    let u = estimators::sample_unit_sphere(d, rng)?;
    let x_hat: Vec<f64> = state
        .x
        .iter()
        .zip(&u)
        .map(|(x, ui)| x + params.delta * ui)
        .collect();
    assert!(
        set.contains(&x_hat, 1e-9),
        "perturbed play left the feasible set: {x_hat:?}"
    );

    let batch = feedback.sample(t, &x_hat, n_t, false);
    let dist = EmpiricalDistribution::new(&batch.costs)?;
    let cvar_hat = distributions::cvar(&dist, alpha);
    let gradient = estimators::zeroth_order_gradient(cvar_hat, &u, params)?;
    let next_x = descend(&shrunk, &state.x, config.eta, &gradient.g);
    let record = StepRecord {
        t,
        x: state.x.clone(),
        x_hat: Some(x_hat),
        u: Some(u),
        gradient,
        var_estimate: None,
        cvar_estimate: Some(cvar_hat),
        n_t,
        alpha: alpha.value(),
        next_x: next_x.clone(),
    };
    Ok((
        LearnerState {
            t: t + 1,
            x: next_x,
        },
        record,
    ))
}

/// Single-owner learner bundling configuration, feasible set and state.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    set: FeasibleSet,
    state: LearnerState,
}

impl Learner {
    /// Starts at `x1` projected onto the iterate set.
    pub fn new(config: LearnerConfig, set: FeasibleSet, x1: &[f64]) -> Result<Self> {
        if x1.len() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: x1.len(),
            });
        }
        config.validate(&set)?;
        let x = config.iterate_set(&set)?.project(x1);
        Ok(Self {
            config,
            set,
            state: LearnerState { t: 1, x },
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn step<F: Feedback + ?Sized, R: Rng + ?Sized>(
        &mut self,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepRecord> {
        let (next, record) = match self.config.mode {
            LearningMode::FirstOrder => {
                step_first_order(&self.state, &self.config, &self.set, feedback)?
            }
            LearningMode::ZerothOrder => {
                step_zeroth_order(&self.state, &self.config, &self.set, feedback, rng)?
            }
        };
        self.state = next;
        Ok(record)
    }
}
