//! Mass, `L^{3/2}` norm, kinetic and potential energy and virial of a
//! [`SeparableAnsatz`], and certification of the blow-up hypotheses
//! (zero energy, virial at most `-1/2`, norm above the critical constant).
//!
//! Every six-dimensional integral factors into one-dimensional radial and
//! angular integrals:
//!
//! ```text
//! C⁻¹     = 8π² ‖η q²‖₁ ‖Φ p²‖₁ ∫ℒ
//! KE      = ‖Φ √(1+p²) p²‖₁ / ‖Φ p²‖₁
//! PE      = -‖η q²‖₁⁻² ∫ η(q) q (∫₀^q η q'² dq') dq
//! V       = (‖η q³‖₁ / ‖η q²‖₁) (‖Φ p³‖₁ / ‖Φ p²‖₁) (∫xℒ / ∫ℒ)
//! ```
//!
//! Two evaluation routes exist: [`Method::ClosedForm`] uses the exact
//! piecewise integrals of [`crate::profiles`]; [`Method::Quadrature`] computes
//! every factor with the adaptive integrator and serves as its oracle.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::profiles::{
    nested_moment, AngularProfile, PiecewiseProfile, ProfileError, SeparableAnsatz, FALLBACK_QUAD,
};
use crate::quadrature::{self, integrate_with, QuadResult, QuadSettings, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("{0} factor integral is zero or not finite")]
    DegenerateFactor(&'static str),
}

/// `(3/8)(15/16)^{1/3}`, the `L^{3/2}` threshold below which solutions
/// exist globally.
pub fn critical_norm() -> f64 {
    0.375 * (15.0f64 / 16.0).cbrt()
}

/// Default zero-energy tolerance for certification.
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
        }
    }
}

/// Absolute error estimates attached to a report. Closed-form entries carry
/// zero unless a quadrature fallback was needed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residuals {
    pub norm_constant: f64,
    pub mass: f64,
    pub l32_norm: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub virial: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub norm_constant: f64,
    pub mass: f64,
    pub l32_norm: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total_energy: f64,
    pub virial: f64,
    pub method: Method,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub report: FunctionalReport,
    /// `|E|`
    pub energy_residual: f64,
    /// `-1/2 - V`; non-negative when the virial hypothesis holds.
    pub virial_margin: f64,
    /// `‖f‖_{3/2} - critical_norm()`; positive when the norm hypothesis holds.
    pub norm_margin: f64,
    pub critical_norm: f64,
    pub energy_tolerance: f64,
    pub zero_energy: bool,
    pub virial_ok: bool,
    pub norm_ok: bool,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn from_report(report: FunctionalReport, energy_tolerance: f64) -> Self {
        let critical = critical_norm();
        let energy_residual = report.total_energy.abs();
        let virial_margin = -0.5 - report.virial;
        let norm_margin = report.l32_norm - critical;
        let zero_energy = energy_residual <= energy_tolerance;
        let virial_ok = report.virial <= -0.5;
        let norm_ok = report.l32_norm > critical;
        let verdict = if zero_energy && virial_ok && norm_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            report,
            energy_residual,
            virial_margin,
            norm_margin,
            critical_norm: critical,
            energy_tolerance,
            zero_energy,
            virial_ok,
            norm_ok,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `C = [8π² ‖η q²‖₁ ‖Φ p²‖₁ ∫ℒ]⁻¹`.
pub fn normalization(ansatz: &SeparableAnsatz) -> f64 {
    ansatz.norm_constant()
}

/// Total mass `∫ f dμ` using the ansatz's cached normalization.
pub fn mass(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    Ok(8.0
        * PI
        * PI
        * ansatz.norm_constant()
        * ansatz.eta().moment(2)?
        * ansatz.phi().moment(2)?
        * ansatz.angular().moments().m0)
}

fn l32_from_factors(eta32: f64, phi32: f64, ang32: f64, eta2: f64, phi2: f64, ang0: f64) -> f64 {
    (eta32 * phi32 * ang32).powf(2.0 / 3.0) / (2.0 * PI.powf(2.0 / 3.0) * eta2 * phi2 * ang0)
}

/// `‖f‖_{3/2}`.
pub fn l32_norm(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    let (eta, phi, ang) = (ansatz.eta(), ansatz.phi(), ansatz.angular().moments());
    Ok(l32_from_factors(
        eta.lbeta_moment(1.5, 2)?,
        phi.lbeta_moment(1.5, 2)?,
        ang.m32,
        eta.moment(2)?,
        phi.moment(2)?,
        ang.m0,
    ))
}

/// Mean of `√(1 + p²)` over a ball of radius `p_max` in momentum space,
///
/// `(3/8) (√(1+P²)/P² + 2√(1+P²) - asinh(P)/P³)`.
///
/// Small `P` uses the Taylor series, where the closed form cancels badly.
pub fn kinetic_energy_uniform(p_max: f64) -> f64 {
    if p_max < 0.1 {
        // 3/P³ ∫₀^P √(1+p²) p² dp = Σ_j binom(1/2, j) 3 P^{2j} / (2j + 3)
        let x = p_max * p_max;
        let mut coeff = 1.0;
        let mut power = 1.0;
        let mut sum = 0.0;
        for j in 0..12 {
            sum += coeff * 3.0 / (2.0 * j as f64 + 3.0) * power;
            coeff *= (0.5 - j as f64) / (j as f64 + 1.0);
            power *= x;
        }
        return sum;
    }
    let s = (1.0 + p_max * p_max).sqrt();
    0.375 * (s / (p_max * p_max) + 2.0 * s - p_max.asinh() / p_max.powi(3))
}

fn quad_factor<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    settings: QuadSettings,
) -> Result<QuadResult, FunctionalError> {
    Ok(integrate_with(f, lo, hi, breaks, settings)?)
}

fn kinetic_numerator(phi: &PiecewiseProfile, settings: QuadSettings) -> Result<QuadResult, FunctionalError> {
    quad_factor(
        |p| phi.eval(p) * (1.0 + p * p).sqrt() * p * p,
        0.0,
        phi.support_end(),
        &phi.breakpoints(),
        settings,
    )
}

/// Kinetic energy including rest mass, `‖Φ √(1+p²) p²‖₁ / ‖Φ p²‖₁`.
pub fn kinetic_energy(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    kinetic_energy_with_error(ansatz.phi()).map(|(v, _)| v)
}

fn kinetic_energy_with_error(phi: &PiecewiseProfile) -> Result<(f64, f64), FunctionalError> {
    if let Some(p_max) = phi.indicator_cutoff() {
        return Ok((kinetic_energy_uniform(p_max), 0.0));
    }
    let num = kinetic_numerator(phi, FALLBACK_QUAD)?;
    let den = phi.moment(2)?;
    if !(den > 0.0) {
        return Err(FunctionalError::DegenerateFactor("momentum"));
    }
    Ok((num.value / den, num.abs_error_estimate / den))
}

/// Kinetic energy of any momentum profile by quadrature.
pub fn kinetic_energy_quadrature(
    phi: &PiecewiseProfile,
    settings: QuadSettings,
) -> Result<f64, FunctionalError> {
    let den = radial_factor(phi, 1.0, 2, settings)?.value;
    if !(den > 0.0) {
        return Err(FunctionalError::DegenerateFactor("momentum"));
    }
    Ok(kinetic_numerator(phi, settings)?.value / den)
}

/// `∫₀^∞ g(r) r^k dr` by quadrature.
pub fn radial_moment_quadrature(
    g: &PiecewiseProfile,
    k: i32,
    settings: QuadSettings,
) -> Result<f64, FunctionalError> {
    Ok(radial_factor(g, 1.0, k, settings)?.value)
}

/// `ρ(q) = η(q) / (4π ‖η q²‖₁)`.
pub fn spatial_density(ansatz: &SeparableAnsatz, q_radius: f64) -> f64 {
    let eta2 = ansatz.eta().moment(2).expect("second moment is finite");
    ansatz.eta().eval(q_radius) / (4.0 * PI * eta2)
}

/// Newtonian self-energy of the spatial density, always `≤ 0`.
pub fn potential_energy(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    let eta = ansatz.eta();
    let m2 = eta.moment(2)?;
    Ok(-nested_moment(eta, eta)? / (m2 * m2))
}

/// `(‖η q³‖₁/‖η q²‖₁)(‖Φ p³‖₁/‖Φ p²‖₁)`, the magnitude of the virial for a
/// fully inward angular factor. For `ℒ = χ_[-1, a]` the virial is this times
/// `(a - 1)/2`.
pub fn virial_factor(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    let (eta, phi) = (ansatz.eta(), ansatz.phi());
    Ok(eta.moment(3)? / eta.moment(2)? * phi.moment(3)? / phi.moment(2)?)
}

/// `𝒱(f) = ∫ (q·p) f dμ`.
pub fn virial(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    let ang = ansatz.angular().moments();
    Ok(virial_factor(ansatz)? * ang.m1 / ang.m0)
}

pub fn total_energy(ansatz: &SeparableAnsatz) -> Result<f64, FunctionalError> {
    Ok(kinetic_energy(ansatz)? + potential_energy(ansatz)?)
}

/// Evaluates every functional by the chosen route with default quadrature
/// settings.
pub fn evaluate(ansatz: &SeparableAnsatz, method: Method) -> Result<FunctionalReport, FunctionalError> {
    evaluate_with(ansatz, method, QuadSettings::default())
}

pub fn evaluate_with(
    ansatz: &SeparableAnsatz,
    method: Method,
    settings: QuadSettings,
) -> Result<FunctionalReport, FunctionalError> {
    match method {
        Method::ClosedForm => evaluate_closed_form(ansatz),
        Method::Quadrature => evaluate_quadrature(ansatz, settings),
    }
}

fn evaluate_closed_form(ansatz: &SeparableAnsatz) -> Result<FunctionalReport, FunctionalError> {
    let (eta, phi) = (ansatz.eta(), ansatz.phi());
    let ang = ansatz.angular().moments();
    let (eta32, eta32_err) = eta.lbeta_moment_with_error(1.5, 2)?;
    let (phi32, phi32_err) = phi.lbeta_moment_with_error(1.5, 2)?;
    let l32 = l32_from_factors(eta32, phi32, ang.m32, eta.moment(2)?, phi.moment(2)?, ang.m0);
    let l32_err =
        l32 * (2.0 / 3.0) * (eta32_err / eta32 + phi32_err / phi32 + ansatz.angular().m32_error() / ang.m32);
    let (kinetic, kinetic_err) = kinetic_energy_with_error(phi)?;
    let potential = potential_energy(ansatz)?;
    Ok(FunctionalReport {
        norm_constant: normalization(ansatz),
        mass: mass(ansatz)?,
        l32_norm: l32,
        kinetic,
        potential,
        total_energy: kinetic + potential,
        virial: virial(ansatz)?,
        method: Method::ClosedForm,
        residuals: Residuals {
            l32_norm: l32_err,
            kinetic: kinetic_err,
            ..Residuals::default()
        },
    })
}

struct Factor {
    value: f64,
    error: f64,
}

impl Factor {
    fn rel(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            (self.error / self.value).abs()
        }
    }
}

impl From<QuadResult> for Factor {
    fn from(r: QuadResult) -> Self {
        Self {
            value: r.value,
            error: r.abs_error_estimate,
        }
    }
}

fn radial_factor(
    g: &PiecewiseProfile,
    beta: f64,
    k: i32,
    settings: QuadSettings,
) -> Result<Factor, FunctionalError> {
    quad_factor(
        |r| {
            let v = g.eval(r);
            let v = if beta == 1.0 { v } else { v.powf(beta) };
            v * r.powi(k)
        },
        0.0,
        g.support_end(),
        &g.breakpoints(),
        settings,
    )
    .map(Factor::from)
}

fn angular_factor<F: Fn(f64, f64) -> f64>(
    l: &AngularProfile,
    weight: F,
    settings: QuadSettings,
) -> Result<Factor, FunctionalError> {
    quad_factor(|x| weight(x, l.eval(x)), -1.0, 1.0, &l.breakpoints(), settings).map(Factor::from)
}

fn evaluate_quadrature(
    ansatz: &SeparableAnsatz,
    settings: QuadSettings,
) -> Result<FunctionalReport, FunctionalError> {
    let (eta, phi, ang) = (ansatz.eta(), ansatz.phi(), ansatz.angular());
    let eta2 = radial_factor(eta, 1.0, 2, settings)?;
    let eta3 = radial_factor(eta, 1.0, 3, settings)?;
    let eta32 = radial_factor(eta, 1.5, 2, settings)?;
    let phi2 = radial_factor(phi, 1.0, 2, settings)?;
    let phi3 = radial_factor(phi, 1.0, 3, settings)?;
    let phi32 = radial_factor(phi, 1.5, 2, settings)?;
    let ang0 = angular_factor(ang, |_, l| l, settings)?;
    let ang1 = angular_factor(ang, |x, l| x * l, settings)?;
    let ang32 = angular_factor(ang, |_, l| l.powf(1.5), settings)?;
    for (name, f) in [("spatial", &eta2), ("momentum", &phi2), ("angular", &ang0)] {
        if !(f.value > 0.0) {
            return Err(FunctionalError::DegenerateFactor(name));
        }
    }

    let norm_constant = 1.0 / (8.0 * PI * PI * eta2.value * phi2.value * ang0.value);
    let norm_rel = eta2.rel() + phi2.rel() + ang0.rel();
    let mass = 8.0 * PI * PI * ansatz.norm_constant() * eta2.value * phi2.value * ang0.value;

    let l32 = l32_from_factors(
        eta32.value,
        phi32.value,
        ang32.value,
        eta2.value,
        phi2.value,
        ang0.value,
    );
    let l32_rel = (2.0 / 3.0) * (eta32.rel() + phi32.rel() + ang32.rel()) + norm_rel;

    let ke_num = Factor::from(kinetic_numerator(phi, settings)?);
    let kinetic = ke_num.value / phi2.value;
    let kinetic_rel = ke_num.rel() + phi2.rel();

    let nested = Factor::from(quadrature::nested_integral(eta, eta, settings)?);
    let potential = -nested.value / (eta2.value * eta2.value);
    let potential_rel = nested.rel() + 2.0 * eta2.rel();

    let virial = eta3.value / eta2.value * phi3.value / phi2.value * ang1.value / ang0.value;
    let virial_err = virial.abs() * (eta3.rel() + eta2.rel() + phi3.rel() + phi2.rel() + ang0.rel())
        + (eta3.value / eta2.value * phi3.value / phi2.value / ang0.value) * ang1.error;

    Ok(FunctionalReport {
        norm_constant,
        mass,
        l32_norm: l32,
        kinetic,
        potential,
        total_energy: kinetic + potential,
        virial,
        method: Method::Quadrature,
        residuals: Residuals {
            norm_constant: norm_constant * norm_rel,
            mass: mass * norm_rel,
            l32_norm: l32 * l32_rel,
            kinetic: kinetic * kinetic_rel,
            potential: potential.abs() * potential_rel,
            virial: virial_err,
        },
    })
}

/// Evaluates the ansatz in closed form and checks the three hypotheses.
pub fn check_criteria(
    ansatz: &SeparableAnsatz,
    energy_tolerance: f64,
) -> Result<Certificate, FunctionalError> {
    Ok(Certificate::from_report(
        evaluate(ansatz, Method::ClosedForm)?,
        energy_tolerance,
    ))
}
