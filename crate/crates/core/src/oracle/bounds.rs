//! Closed-form evaluators for the estimation-error and variation bounds.

use crate::distributions::{CostBound, RiskLevel, WeightedSamples};
use crate::error::{Error, Result};
use crate::model::CostModel;

use super::noise_quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Dkw,
    VarBound,
    GradErrorBound,
    RiskVariationBound,
    FunctionVariationBound,
    CvarDistanceBound,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dkw => "dkw",
            Self::VarBound => "var_bound",
            Self::GradErrorBound => "grad_error_bound",
            Self::RiskVariationBound => "risk_variation_bound",
            Self::FunctionVariationBound => "function_variation_bound",
            Self::CvarDistanceBound => "cvar_distance_bound",
        }
    }
}

/// A measured quantity against its bound. Probabilistic bounds carry their
/// failure probability in `confidence`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
    pub confidence: Option<f64>,
}

impl BoundReport {
    pub fn new(kind: BoundKind, measured: f64, bound: f64, confidence: Option<f64>) -> Self {
        Self {
            kind,
            measured,
            bound,
            ok: measured <= bound,
            confidence,
        }
    }

    /// Same check with an absolute slack for rounding.
    pub fn with_slack(kind: BoundKind, measured: f64, bound: f64, slack: f64) -> Self {
        Self {
            ok: measured <= bound + slack,
            ..Self::new(kind, measured, bound, None)
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

impl std::fmt::Display for BoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<26} measured={:.6e} bound={:.6e} {}",
            self.name(),
            self.measured,
            self.bound,
            if self.ok { "ok" } else { "VIOLATED" }
        )?;
        if let Some(c) = self.confidence {
            write!(f, " (failure prob {c})")?;
        }
        Ok(())
    }
}

fn check_confidence(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "failure probability must lie in (0, 1), got {gamma}"
        )))
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// `ε = √(ln(2/γ̄) / (2n))`: with probability at least `1 − γ̄`,
/// `sup_y |F̂(y) − F(y)| ≤ ε`.
pub fn dkw_epsilon(n: usize, gamma_bar: f64) -> Result<f64> {
    check_count(n)?;
    check_confidence(gamma_bar)?;
    Ok(((2.0 / gamma_bar).ln() / (2.0 * n as f64)).sqrt())
}

/// `√(ln(2/γ̄)) / (p̲·√(2n))`: VaR estimation error at confidence `1 − γ̄`
/// when the cost density is bounded below by `p̲`.
pub fn lemma3_var_epsilon(n: usize, gamma_bar: f64, p_lower: f64) -> Result<f64> {
    check_count(n)?;
    check_confidence(gamma_bar)?;
    if !(p_lower > 0.0 && p_lower.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "density lower bound must be positive, got {p_lower}"
        )));
    }
    Ok((2.0 / gamma_bar).ln().sqrt() / (p_lower * (2.0 * n as f64).sqrt()))
}

/// Inputs of the gradient-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradBoundInputs {
    /// Gradient norm bound `G`.
    pub g: f64,
    /// CDF Lipschitz constant `L_g`.
    pub l_g: f64,
    /// Density lower bound `p̲`.
    pub p_lower: f64,
    pub horizon: usize,
    /// Failure probability over the whole horizon.
    pub gamma: f64,
    pub alpha: RiskLevel,
    pub n: usize,
}

/// `G·L_g·√(ln(2T/γ)) / (α·p̲·√(2n))`: bound on the gradient error caused by
/// the VaR estimate, holding for all steps with probability `1 − γ`.
pub fn lemma3_grad_bound(p: GradBoundInputs) -> Result<f64> {
    check_count(p.n)?;
    check_confidence(p.gamma)?;
    let nonneg = |v: f64| v >= 0.0;
    if p.horizon == 0 || p.p_lower.is_nan() || p.p_lower <= 0.0 || !nonneg(p.g) || !nonneg(p.l_g) {
        return Err(Error::InvalidParameter(
            "invalid gradient-bound inputs".into(),
        ));
    }
    let log = (2.0 * p.horizon as f64 / p.gamma).ln().sqrt();
    Ok(p.g * p.l_g * log / (p.alpha.value() * p.p_lower * (2.0 * p.n as f64).sqrt()))
}

/// `|1/α₁ − 1/α₂|·U`: bound on the CVaR change between two risk levels for
/// costs taking values in `[0, U]`.
pub fn lemma4_bound(u: CostBound, a1: RiskLevel, a2: RiskLevel) -> f64 {
    (1.0 / a1.value() - 1.0 / a2.value()).abs() * u.value()
}

/// `(1/α)·E|J₁ − J₂|` for two cost realizations on a shared discrete law.
pub fn lemma5_bound_discrete(
    j1: &[f64],
    j2: &[f64],
    weights: &[f64],
    alpha: RiskLevel,
) -> Result<f64> {
    if j1.len() != j2.len() || j1.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: j1.len(),
            got: j2.len().max(weights.len()),
        });
    }
    check_count(j1.len())?;
    let total: f64 = weights.iter().sum();
    let mean_gap: f64 = j1
        .iter()
        .zip(j2)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b).abs())
        .sum::<f64>()
        / total;
    Ok(mean_gap / alpha.value())
}

/// `(1/α)·E_ξ|J_{t₁}(x, ξ) − J_{t₂}(x, ξ)|` by quadrature over the first
/// model's noise law; both models must share that law.
pub fn lemma5_bound<M1: CostModel + ?Sized, M2: CostModel + ?Sized>(
    (m1, t1): (&M1, usize),
    (m2, t2): (&M2, usize),
    alpha: RiskLevel,
    x: &[f64],
    quad_points: usize,
) -> Result<f64> {
    if m1.noise() != m2.noise() {
        return Err(Error::InvalidParameter(
            "both cost functions must share the noise law".into(),
        ));
    }
    let (nodes, weights) = noise_quadrature(m1.noise(), quad_points)?;
    let j1: Vec<f64> = nodes.iter().map(|&xi| m1.cost(t1, x, xi)).collect();
    let j2: Vec<f64> = nodes.iter().map(|&xi| m2.cost(t2, x, xi)).collect();
    lemma5_bound_discrete(&j1, &j2, &weights, alpha)
}

/// Measured `|CVaR_α[J₁] − CVaR_α[J₂]|` on a shared discrete law.
pub fn cvar_gap_discrete(j1: &[f64], j2: &[f64], weights: &[f64], alpha: RiskLevel) -> Result<f64> {
    let a = WeightedSamples::new(j1.to_vec(), weights.to_vec())?.cvar(alpha);
    let b = WeightedSamples::new(j2.to_vec(), weights.to_vec())?.cvar(alpha);
    Ok((a - b).abs())
}

/// `(U/α)·sup_y |F(y) − G(y)|`: CVaR distance between two laws supported in
/// `[0, U]`.
pub fn lemma7_bound(u: CostBound, alpha: RiskLevel, sup_cdf_gap: f64) -> f64 {
    u.value() / alpha.value() * sup_cdf_gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParkingScenario, Schedule};

    fn lvl(a: f64) -> RiskLevel {
        RiskLevel::new(a).unwrap()
    }

    #[test]
    fn dkw_examples() {
        let e = dkw_epsilon(200, 0.05).unwrap();
        assert!((e - 0.09603).abs() < 5e-6, "{e}");
        let q = dkw_epsilon(800, 0.05).unwrap();
        assert!((q - e / 2.0).abs() < 1e-15);
        assert!(dkw_epsilon(10, 2.0).is_err());
        assert!(dkw_epsilon(0, 0.05).is_err());
    }

    #[test]
    fn lemma3_inverts_tail_probability() {
        let (n, p, gamma) = (8, 3.0, 0.1);
        let eps = lemma3_var_epsilon(n, gamma, p).unwrap();
        let back = 2.0 * (-2.0 * n as f64 * eps * eps * p * p).exp();
        assert!((back - gamma).abs() < 1e-12);
        let q = lemma3_var_epsilon(4 * n, gamma, p).unwrap();
        assert!((q - eps / 2.0).abs() < 1e-15);
        assert!(lemma3_var_epsilon(n, gamma, 0.0).is_err());
    }

    #[test]
    fn lemma3_grad_bound_on_parking() {
        let m =
            ParkingScenario::new(500, Schedule::Constant(0.7), Schedule::Constant(0.5)).unwrap();
        let (p_lower, l_g) = m.density_bounds(1, 0.0).unwrap();
        assert!((p_lower - 6.25).abs() < 1e-12 && (l_g - 12.5).abs() < 1e-12);
        let inputs = GradBoundInputs {
            g: 0.12,
            l_g,
            p_lower,
            horizon: 500,
            gamma: 0.05,
            alpha: lvl(0.5),
            n: 8,
        };
        let b = lemma3_grad_bound(inputs).unwrap();
        let direct = 0.12 * 12.5 * (2.0f64 * 500.0 / 0.05).ln().sqrt() / (0.5 * 6.25 * 4.0);
        assert!(b.is_finite() && b > 0.0 && (b - direct).abs() < 1e-15);
        let quad = lemma3_grad_bound(GradBoundInputs { n: 32, ..inputs }).unwrap();
        assert!((quad - b / 2.0).abs() < 1e-15);
    }

    #[test]
    fn lemma4_examples() {
        let one = CostBound::new(1.0).unwrap();
        assert!((lemma4_bound(one, lvl(0.5), lvl(0.8)) - 0.75).abs() < 1e-15);
        assert_eq!(lemma4_bound(one, lvl(0.3), lvl(0.3)), 0.0);
        let two = CostBound::new(2.0).unwrap();
        assert!((lemma4_bound(two, lvl(0.5), lvl(0.8)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn lemma5_examples() {
        let w = [0.25; 4];
        let j = [1.0, 3.0, -2.0, 0.5];
        assert_eq!(lemma5_bound_discrete(&j, &j, &w, lvl(0.4)).unwrap(), 0.0);
        let shifted: Vec<f64> = j.iter().map(|v| v + 0.7).collect();
        let b = lemma5_bound_discrete(&j, &shifted, &w, lvl(0.4)).unwrap();
        assert!((b - 0.7 / 0.4).abs() < 1e-12);
        let gap = cvar_gap_discrete(&j, &shifted, &w, lvl(0.4)).unwrap();
        assert!((gap - 0.7).abs() < 1e-12);

        let step =
            |r| ParkingScenario::new(1, Schedule::Constant(r), Schedule::Constant(0.5)).unwrap();
        let (a, b) = (step(0.65), step(0.7));
        let v = lemma5_bound((&a, 1), (&b, 1), lvl(0.5), &[2.0], 129).unwrap();
        // At x = 2 the difference is −0.05·(2ξ − 1.95); with 2ξ uniform on [1.8, 2.2]
        // the mean absolute value is 0.05·(0.15² + 0.25²)/0.8.
        let analytic = 0.05 * (0.15f64.powi(2) + 0.25f64.powi(2)) / 0.8 / 0.5;
        assert!((v - analytic).abs() < 1e-6, "{v} vs {analytic}");
    }

    #[test]
    fn lemma7_examples() {
        let u = CostBound::new(3.0).unwrap();
        assert!((lemma7_bound(u, lvl(0.5), 0.1) - 0.6).abs() < 1e-15);
        assert_eq!(lemma7_bound(u, lvl(0.5), 0.0), 0.0);
    }

    #[test]
    fn report_flags() {
        let r = BoundReport::new(BoundKind::Dkw, 0.1, 0.2, Some(0.05));
        assert!(r.ok && r.name() == "dkw");
        assert!(!BoundReport::new(BoundKind::VarBound, 0.3, 0.2, None).ok);
        assert!(BoundReport::with_slack(BoundKind::VarBound, 0.2 + 1e-14, 0.2, 1e-12).ok);
        assert!(format!("{r}").contains("ok"));
    }
}
