//! Randomized coverage checks for the bound evaluators.
//!
//! Deterministic inequalities must hold on every trial; high-probability
//! bounds must hold on at least the stated fraction of trials.

use rand::Rng;

use crate::distributions::{self, CostBound, EmpiricalDistribution, RiskLevel};
use crate::error::{Error, Result};
use crate::model::{CostModel, ParkingScenario};

use super::bounds::{self, BoundKind, BoundReport, GradBoundInputs};
use super::{cost_bound, noise_quadrature, true_cvar_at, true_var, Resolution};

/// Outcome of a randomized bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub kind: BoundKind,
    pub label: String,
    pub trials: usize,
    pub passed: usize,
    /// Fraction of trials that must pass.
    pub required: f64,
    /// Trial with the largest measured/bound ratio.
    pub worst: BoundReport,
}

impl SuiteReport {
    pub fn coverage(&self) -> f64 {
        self.passed as f64 / self.trials.max(1) as f64
    }

    pub fn ok(&self) -> bool {
        self.trials > 0 && self.coverage() >= self.required
    }

    fn collect(kind: BoundKind, label: &str, required: f64, reports: &[BoundReport]) -> Self {
        let ratio = |r: &BoundReport| {
            if r.bound > 0.0 {
                r.measured / r.bound
            } else if r.measured > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        let worst = reports
            .iter()
            .copied()
            .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
            .unwrap_or_else(|| BoundReport::new(kind, 0.0, 0.0, None));
        Self {
            kind,
            label: label.to_string(),
            trials: reports.len(),
            passed: reports.iter().filter(|r| r.ok).count(),
            required,
            worst,
        }
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {}/{} within bound (coverage {:.4}, required {:.4}) {}; worst: {}",
            self.label,
            self.passed,
            self.trials,
            self.coverage(),
            self.required,
            if self.ok() { "PASS" } else { "FAIL" },
            self.worst
        )
    }
}

/// Static parking setting shared by the probabilistic suites.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationSetup {
    pub model: ParkingScenario,
    pub price: f64,
    pub n: usize,
    pub gamma_bar: f64,
}

impl ConcentrationSetup {
    /// Target 0.7, `α = 0.5`, price 2, `n = 8`, `γ̄ = 0.05`.
    pub fn parking_default() -> Result<Self> {
        use crate::model::Schedule;
        Ok(Self {
            model: ParkingScenario::new(500, Schedule::Constant(0.7), Schedule::Constant(0.5))?,
            price: 2.0,
            n: 8,
            gamma_bar: 0.05,
        })
    }
}

fn draw_costs<R: Rng + ?Sized>(setup: &ConcentrationSetup, rng: &mut R) -> Vec<f64> {
    let m = &setup.model;
    (0..setup.n)
        .map(|_| m.cost(1, &[setup.price], m.noise().sample(rng)))
        .collect()
}

/// Kolmogorov distance between an empirical batch and a continuous CDF.
pub fn ks_to_cdf(dist: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = dist.n() as f64;
    dist.samples()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Uniform CDF deviation of `n`-sample batches against the exact law.
pub fn dkw_suite<R: Rng + ?Sized>(
    setup: &ConcentrationSetup,
    trials: usize,
    rng: &mut R,
) -> Result<SuiteReport> {
    let eps = bounds::dkw_epsilon(setup.n, setup.gamma_bar)?;
    let m = &setup.model;
    let x = [setup.price];
    if m.cost_cdf(1, &x, 0.0).is_none() {
        return Err(Error::UnsupportedNoise("exact CDF required".into()));
    }
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let dist = EmpiricalDistribution::from_vec(draw_costs(setup, rng))?;
        let d = ks_to_cdf(&dist, |y| m.cost_cdf(1, &x, y).unwrap_or(0.0));
        reports.push(BoundReport::new(
            BoundKind::Dkw,
            d,
            eps,
            Some(setup.gamma_bar),
        ));
    }
    Ok(SuiteReport::collect(
        BoundKind::Dkw,
        "dkw",
        1.0 - setup.gamma_bar,
        &reports,
    ))
}

/// Empirical-vs-true CVaR gap against `(U/α)·ε_DKW(n, γ̄)`.
pub fn cvar_concentration_suite<R: Rng + ?Sized>(
    setup: &ConcentrationSetup,
    trials: usize,
    rng: &mut R,
) -> Result<SuiteReport> {
    let m = &setup.model;
    let alpha = m.risk_level(1);
    let res = Resolution::default();
    let u = cost_bound(m, &m.set, res)?;
    let eps = bounds::dkw_epsilon(setup.n, setup.gamma_bar)?;
    let bound = bounds::lemma7_bound(u, alpha, eps);
    let truth = true_cvar_at(m, 1, &[setup.price], alpha, 4 * res.quad_points)?;
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let dist = EmpiricalDistribution::from_vec(draw_costs(setup, rng))?;
        let gap = (distributions::cvar(&dist, alpha) - truth).abs();
        reports.push(BoundReport::new(
            BoundKind::CvarDistanceBound,
            gap,
            bound,
            Some(setup.gamma_bar),
        ));
    }
    Ok(SuiteReport::collect(
        BoundKind::CvarDistanceBound,
        "dkw_cvar",
        1.0 - setup.gamma_bar,
        &reports,
    ))
}

/// VaR error and the induced gradient error at a price where the cost
/// density is bounded away from zero. Returns the VaR and gradient suites.
pub fn lemma3_suites<R: Rng + ?Sized>(
    setup: &ConcentrationSetup,
    trials: usize,
    rng: &mut R,
) -> Result<(SuiteReport, SuiteReport)> {
    let m = &setup.model;
    let x = [setup.price];
    let alpha = m.risk_level(1);
    let (p_lower, l_g) = m
        .density_bounds(1, setup.price)
        .ok_or_else(|| Error::InvalidParameter("cost density unbounded at this price".into()))?;
    let fine = 4097;
    let nu_star = true_var(m, 1, &x, alpha, fine)?;
    let eps = bounds::lemma3_var_epsilon(setup.n, setup.gamma_bar, p_lower)?;

    let (nodes, weights) = noise_quadrature(m.noise(), fine)?;
    let costs: Vec<f64> = nodes.iter().map(|&xi| m.cost(1, &x, xi)).collect();
    let grads: Vec<f64> = nodes
        .iter()
        .map(|&xi| m.cost_gradient(1, &x, xi)[0])
        .collect();
    let mut g_max: f64 = grads.iter().fold(0.0, |a, g| a.max(g.abs()));
    if let crate::model::NoiseLaw::Uniform { lo, hi } = *m.noise() {
        for xi in [lo, hi] {
            g_max = g_max.max(m.cost_gradient(1, &x, xi)[0].abs());
        }
    }
    // Population ∇ₓH(x, ν) = (1/α)·E[1{J ≥ ν}·∇J].
    let grad_h = |nu: f64| -> f64 {
        costs
            .iter()
            .zip(&grads)
            .zip(&weights)
            .filter(|((c, _), _)| **c >= nu)
            .map(|((_, g), w)| w * g)
            .sum::<f64>()
            / alpha.value()
    };
    let grad_star = grad_h(nu_star);
    let grad_bound = bounds::lemma3_grad_bound(GradBoundInputs {
        g: g_max,
        l_g,
        p_lower,
        horizon: m.horizon(),
        gamma: setup.gamma_bar,
        alpha,
        n: setup.n,
    })?;

    let mut var_reports = Vec::with_capacity(trials);
    let mut grad_reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let dist = EmpiricalDistribution::from_vec(draw_costs(setup, rng))?;
        let nu_hat = distributions::var_estimate(&dist, alpha);
        var_reports.push(BoundReport::new(
            BoundKind::VarBound,
            (nu_hat - nu_star).abs(),
            eps,
            Some(setup.gamma_bar),
        ));
        grad_reports.push(BoundReport::new(
            BoundKind::GradErrorBound,
            (grad_h(nu_hat) - grad_star).abs(),
            grad_bound,
            Some(setup.gamma_bar),
        ));
    }
    Ok((
        SuiteReport::collect(
            BoundKind::VarBound,
            "lemma3_var",
            1.0 - setup.gamma_bar,
            &var_reports,
        ),
        SuiteReport::collect(
            BoundKind::GradErrorBound,
            "lemma3_grad",
            1.0 - setup.gamma_bar,
            &grad_reports,
        ),
    ))
}

fn random_level<R: Rng + ?Sized>(rng: &mut R) -> RiskLevel {
    // (0, 1]: 1 − U[0, 1) never hits zero.
    RiskLevel::new(1.0 - rng.random::<f64>()).expect("level in (0, 1]")
}

fn random_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, u: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * u).collect()
}

/// Risk-level bound on random batches with values in `[0, U]`.
pub fn lemma4_suite<R: Rng + ?Sized>(trials: usize, rng: &mut R) -> Result<SuiteReport> {
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let n = rng.random_range(1..=50);
        let u = rng.random_range(0.1..10.0);
        let dist = EmpiricalDistribution::from_vec(random_batch(rng, n, u))?;
        let (a1, a2) = (random_level(rng), random_level(rng));
        let gap = (distributions::cvar(&dist, a1) - distributions::cvar(&dist, a2)).abs();
        let bound = bounds::lemma4_bound(CostBound::new(u)?, a1, a2);
        reports.push(BoundReport::with_slack(
            BoundKind::RiskVariationBound,
            gap,
            bound,
            1e-12 * u,
        ));
    }
    Ok(SuiteReport::collect(
        BoundKind::RiskVariationBound,
        "lemma4",
        1.0,
        &reports,
    ))
}

/// Function-variation bound on random quadratic pairs `aξ² + bξ + c` under a
/// shared random discrete law.
pub fn lemma5_suite<R: Rng + ?Sized>(trials: usize, rng: &mut R) -> Result<SuiteReport> {
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let n = rng.random_range(1..=50);
        let nodes: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let mut quad = || -> [f64; 3] {
            [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]
        };
        let (q1, q2) = (quad(), quad());
        let eval = |q: [f64; 3]| -> Vec<f64> {
            nodes
                .iter()
                .map(|&z| q[0] * z * z + q[1] * z + q[2])
                .collect()
        };
        let (j1, j2) = (eval(q1), eval(q2));
        let alpha = random_level(rng);
        let gap = bounds::cvar_gap_discrete(&j1, &j2, &weights, alpha)?;
        let bound = bounds::lemma5_bound_discrete(&j1, &j2, &weights, alpha)?;
        reports.push(BoundReport::with_slack(
            BoundKind::FunctionVariationBound,
            gap,
            bound,
            1e-12,
        ));
    }
    Ok(SuiteReport::collect(
        BoundKind::FunctionVariationBound,
        "lemma5",
        1.0,
        &reports,
    ))
}

/// CVaR distance between two equal-size batches with values in `[0, U]`.
pub fn lemma7_suite<R: Rng + ?Sized>(trials: usize, rng: &mut R) -> Result<SuiteReport> {
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let n = rng.random_range(1..=50);
        let u = rng.random_range(0.1..10.0);
        let f = EmpiricalDistribution::from_vec(random_batch(rng, n, u))?;
        let g = EmpiricalDistribution::from_vec(random_batch(rng, n, u))?;
        let alpha = random_level(rng);
        let gap = (distributions::cvar(&f, alpha) - distributions::cvar(&g, alpha)).abs();
        let bound = bounds::lemma7_bound(
            CostBound::new(u)?,
            alpha,
            distributions::ks_distance(&f, &g),
        );
        reports.push(BoundReport::with_slack(
            BoundKind::CvarDistanceBound,
            gap,
            bound,
            1e-12 * u,
        ));
    }
    Ok(SuiteReport::collect(
        BoundKind::CvarDistanceBound,
        "lemma7",
        1.0,
        &reports,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_to_cdf_of_uniform_grid() {
        let d = EmpiricalDistribution::new(&[0.125, 0.375, 0.625, 0.875]).unwrap();
        assert!((ks_to_cdf(&d, |y| y.clamp(0.0, 1.0)) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn deterministic_suites_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(lemma4_suite(200, &mut rng).unwrap().ok());
        assert!(lemma5_suite(200, &mut rng).unwrap().ok());
        assert!(lemma7_suite(200, &mut rng).unwrap().ok());
    }

    #[test]
    fn probabilistic_suites_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let setup = ConcentrationSetup::parking_default().unwrap();
        let d = dkw_suite(&setup, 400, &mut rng).unwrap();
        assert!(d.ok(), "{d}");
        let c = cvar_concentration_suite(&setup, 400, &mut rng).unwrap();
        assert!(c.ok(), "{c}");
        let l3 = ConcentrationSetup {
            price: 0.0,
            ..setup
        };
        let (v, g) = lemma3_suites(&l3, 400, &mut rng).unwrap();
        assert!(v.ok(), "{v}");
        assert!(g.ok(), "{g}");
    }
}
