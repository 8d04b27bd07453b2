//! C¹ smoothing of step profiles, and the zero-energy rebalance that has to
//! follow it.
//!
//! A jump or kink at a breakpoint `b` becomes a cubic Hermite ramp on
//! `[b-δ, b+δ]` matching the neighbouring values and slopes. Between jumps
//! of a constant this is the plain smoothstep `3t² - 2t³`; next to a power
//! law the matched slope keeps the join C¹. Plateaus keep their values and
//! the support grows by at most `δ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::{
    evaluate, evaluate_with, kinetic_energy_quadrature, radial_moment_quadrature, Certificate,
    FunctionalError, FunctionalReport, Method,
};
use crate::profiles::{AngularProfile, Piece, PieceKind, PiecewiseProfile, ProfileError, SeparableAnsatz};
use crate::quadrature::{nested_integral, QuadSettings};
use crate::solvers::{
    brent, core_halo_parts, momentum_ball, select_alpha, CoreHaloParams, EnergyQuadratic, Family, FamilyKind,
    RootBracket, SolvedFamily, SolverError, PARAMETER_TOL,
};

/// Default half-width as a fraction of the smallest piece width.
pub const DEFAULT_RELATIVE_DELTA: f64 = 1e-3;

/// Quadrature settings for functionals of mollified data.
pub const MOLLIFIED_QUAD: QuadSettings = QuadSettings {
    abs_tol: 1e-300,
    rel_tol: 1e-13,
    max_subdivisions: crate::quadrature::DEFAULT_MAX_SUBDIVISIONS,
};

// Neighbouring pieces closer than this (relatively) already join C¹.
const JOIN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MollifyError {
    #[error("invalid transition half-width {0}")]
    InvalidDelta(f64),
    #[error("ramps of half-width {delta} overlap between breakpoints {left} and {right}")]
    Overlap { left: f64, right: f64, delta: f64 },
    #[error("{0} family cannot be rebalanced")]
    NotRebalanceable(&'static str),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Which factors of the ansatz get smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifyTarget {
    Spatial,
    Momentum,
    Angular,
    All,
}

impl MollifyTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            MollifyTarget::Spatial => "spatial",
            MollifyTarget::Momentum => "momentum",
            MollifyTarget::Angular => "angular",
            MollifyTarget::All => "all",
        }
    }

    pub fn spatial(self) -> bool {
        matches!(self, MollifyTarget::Spatial | MollifyTarget::All)
    }

    pub fn momentum(self) -> bool {
        matches!(self, MollifyTarget::Momentum | MollifyTarget::All)
    }

    pub fn angular(self) -> bool {
        matches!(self, MollifyTarget::Angular | MollifyTarget::All)
    }
}

/// Ramp half-width, either in the units of each smoothed variable or as a
/// fraction of the smallest piece width among the targeted factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delta {
    Absolute(f64),
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifySpec {
    pub delta: Delta,
    pub target: MollifyTarget,
}

impl Default for MollifySpec {
    fn default() -> Self {
        Self {
            delta: Delta::Relative(DEFAULT_RELATIVE_DELTA),
            target: MollifyTarget::All,
        }
    }
}

impl MollifySpec {
    pub fn absolute(delta: f64, target: MollifyTarget) -> Self {
        Self {
            delta: Delta::Absolute(delta),
            target,
        }
    }

    pub fn relative(factor: f64, target: MollifyTarget) -> Self {
        Self {
            delta: Delta::Relative(factor),
            target,
        }
    }

    /// Smallest finite piece width over the targeted factors.
    pub fn feature_size(&self, ansatz: &SeparableAnsatz) -> f64 {
        let mut size = f64::INFINITY;
        if self.target.spatial() {
            size = size.min(ansatz.eta().min_piece_width());
        }
        if self.target.momentum() {
            size = size.min(ansatz.phi().min_piece_width());
        }
        if self.target.angular() {
            size = size.min(ansatz.angular().min_piece_width());
        }
        size
    }

    /// The absolute half-width to use on `ansatz`.
    pub fn resolve(&self, ansatz: &SeparableAnsatz) -> Result<f64, MollifyError> {
        let delta = match self.delta {
            Delta::Absolute(d) => d,
            Delta::Relative(0.0) => 0.0,
            Delta::Relative(f) => f * self.feature_size(ansatz),
        };
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(MollifyError::InvalidDelta(delta));
        }
        Ok(delta)
    }
}

fn close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= JOIN_TOL * x.abs().max(y.abs())
}

fn joins_smoothly(left: &Piece, right: &Piece) -> bool {
    let b = left.hi;
    close(left.value_at_end(), right.eval(b)) && close(left.slope(b), right.slope(b))
}

/// Replaces every non-C¹ join in a contiguous run of pieces by a Hermite
/// ramp of half-width `delta`. The outer ends of the run are left alone.
fn mollify_pieces(pieces: &[Piece], delta: f64) -> Result<Vec<Piece>, MollifyError> {
    if delta == 0.0 {
        return Ok(pieces.to_vec());
    }
    let n = pieces.len();
    let ramped: Vec<bool> = pieces.windows(2).map(|w| !joins_smoothly(&w[0], &w[1])).collect();
    let mut out = Vec::with_capacity(2 * n);
    for (i, p) in pieces.iter().enumerate() {
        let cut_lo = i > 0 && ramped[i - 1];
        let cut_hi = i + 1 < n && ramped[i];
        let lo = if cut_lo { p.lo + delta } else { p.lo };
        let hi = if cut_hi { p.hi - delta } else { p.hi };
        if !(lo < hi) {
            return Err(MollifyError::Overlap {
                left: p.lo,
                right: p.hi,
                delta,
            });
        }
        out.push(p.restricted(lo, hi));
        if cut_hi {
            let next = &pieces[i + 1];
            let (x0, x1) = (p.hi - delta, p.hi + delta);
            out.push(Piece::new(
                x0,
                x1,
                PieceKind::SmoothRamp {
                    left: p.eval(x0),
                    right: next.eval(x1),
                    left_slope: p.slope(x0),
                    right_slope: next.slope(x1),
                },
            )?);
        }
    }
    Ok(out)
}

pub fn mollify_profile(g: &PiecewiseProfile, delta: f64) -> Result<PiecewiseProfile, MollifyError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(MollifyError::InvalidDelta(delta));
    }
    Ok(PiecewiseProfile::new(
        mollify_pieces(g.pieces(), delta)?,
        g.domain(),
    )?)
}

/// Smooths the interior joins of `ℒ`; `x = ±1` are domain ends and get no
/// ramp.
pub fn mollify_angular(l: &AngularProfile, delta: f64) -> Result<AngularProfile, MollifyError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(MollifyError::InvalidDelta(delta));
    }
    Ok(AngularProfile::new(mollify_pieces(l.pieces(), delta)?)?)
}

/// Smooths the targeted factors with an explicit half-width.
pub fn mollify_with(
    ansatz: &SeparableAnsatz,
    delta: f64,
    target: MollifyTarget,
) -> Result<SeparableAnsatz, MollifyError> {
    let eta = if target.spatial() {
        mollify_profile(ansatz.eta(), delta)?
    } else {
        ansatz.eta().clone()
    };
    let phi = if target.momentum() {
        mollify_profile(ansatz.phi(), delta)?
    } else {
        ansatz.phi().clone()
    };
    let angular = if target.angular() {
        mollify_angular(ansatz.angular(), delta)?
    } else {
        ansatz.angular().clone()
    };
    Ok(SeparableAnsatz::new(eta, phi, angular)?)
}

pub fn mollify(ansatz: &SeparableAnsatz, spec: &MollifySpec) -> Result<SeparableAnsatz, MollifyError> {
    mollify_with(ansatz, spec.resolve(ansatz)?, spec.target)
}

/// Largest normalized jump in the first derivative across ramp seams,
/// measured by one-sided differences at step `h_rel` times the narrower of
/// the two pieces meeting there. The jump is scaled by the characteristic
/// slope of those pieces so the figure does not depend on `δ`. C¹ profiles
/// give `O(h_rel)`; a bare smoothstep glued to a sloped piece gives `O(1)`.
pub fn seam_discontinuity(g: &PiecewiseProfile, h_rel: f64) -> f64 {
    fn characteristic_slope(p: &Piece) -> f64 {
        match p.kind {
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => ((right - left).abs() / p.width())
                .max(left_slope.abs())
                .max(right_slope.abs()),
            _ if p.hi.is_finite() => p.slope(p.lo).abs().max(p.slope(p.hi).abs()),
            _ => 0.0,
        }
    }
    let mut worst: f64 = 0.0;
    for pair in g.pieces().windows(2) {
        let (l, r) = (&pair[0], &pair[1]);
        if !(l.is_ramp() || r.is_ramp()) {
            continue;
        }
        let scale = characteristic_slope(l).max(characteristic_slope(r));
        if scale == 0.0 {
            continue;
        }
        let h = h_rel * l.width().min(r.width());
        let s = l.hi;
        let before = (g.eval(s) - g.eval(s - 2.0 * h)) / (2.0 * h);
        let after = (g.eval(s + 2.0 * h) - g.eval(s)) / (2.0 * h);
        worst = worst.max((after - before).abs() / scale);
    }
    worst
}

/// One functional before and after smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub name: &'static str,
    pub step: f64,
    pub mollified: f64,
}

impl Drift {
    pub fn abs(&self) -> f64 {
        (self.mollified - self.step).abs()
    }
}

pub fn drift_table(step: &FunctionalReport, mollified: &FunctionalReport) -> Vec<Drift> {
    let pairs = [
        ("mass", step.mass, mollified.mass),
        ("norm_constant", step.norm_constant, mollified.norm_constant),
        ("l32_norm", step.l32_norm, mollified.l32_norm),
        ("kinetic", step.kinetic, mollified.kinetic),
        ("potential", step.potential, mollified.potential),
        ("virial", step.virial, mollified.virial),
    ];
    pairs
        .into_iter()
        .map(|(name, step, mollified)| Drift {
            name,
            step,
            mollified,
        })
        .collect()
}

/// The parameter fixed by the zero-energy condition after smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeParameter {
    Radius(f64),
    Alpha(f64),
    Momentum(f64),
}

impl FreeParameter {
    pub fn name(&self) -> &'static str {
        match self {
            FreeParameter::Radius(_) => "R",
            FreeParameter::Alpha(_) => "alpha",
            FreeParameter::Momentum(_) => "P",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            FreeParameter::Radius(v) | FreeParameter::Alpha(v) | FreeParameter::Momentum(v) => v,
        }
    }
}

/// A smoothed family with its free parameter re-solved.
#[derive(Debug, Clone)]
pub struct Rebalanced {
    pub kind: FamilyKind,
    pub delta: f64,
    pub target: MollifyTarget,
    pub step: SolvedFamily,
    pub step_parameter: FreeParameter,
    pub parameter: FreeParameter,
    /// Roots of the smoothed halo quadratic (core-halo only).
    pub alpha_roots: Vec<f64>,
    pub ansatz: SeparableAnsatz,
    pub step_report: FunctionalReport,
    pub report: FunctionalReport,
    pub certificate: Certificate,
}

impl Rebalanced {
    pub fn drift(&self) -> Vec<Drift> {
        drift_table(&self.step_report, &self.report)
    }
}

fn quad_potential(eta: &PiecewiseProfile) -> Result<f64, FunctionalError> {
    let m2 = radial_moment_quadrature(eta, 2, MOLLIFIED_QUAD)?;
    let nested = nested_integral(eta, eta, MOLLIFIED_QUAD)?.value;
    Ok(-nested / (m2 * m2))
}

fn as_solver(e: MollifyError) -> SolverError {
    match e {
        MollifyError::Solver(s) => s,
        MollifyError::Functional(f) => SolverError::Functional(f),
        MollifyError::Profile(p) => SolverError::Profile(p),
        other => SolverError::InvalidParameter(other.to_string()),
    }
}

/// Root of an increasing `f`, bracketed outward from `guess` and kept above
/// `floor`.
fn solve_increasing<F>(mut f: F, guess: f64, floor: f64) -> Result<f64, SolverError>
where
    F: FnMut(f64) -> Result<f64, SolverError>,
{
    const CAP: f64 = 1e6;
    let (mut lo, mut hi) = (0.5 * guess, 2.0 * guess);
    while f(lo)? > 0.0 {
        lo *= 0.5;
        if lo <= floor {
            return Err(SolverError::InvalidParameter(format!(
                "no sign change above {floor}"
            )));
        }
    }
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if hi > CAP {
            return Err(SolverError::BracketExhausted { cap: CAP });
        }
    }
    brent(f, RootBracket::new(lo, hi, PARAMETER_TOL * guess.max(1.0)))
}

/// Smooths the family's step datum and re-solves its free parameter so the
/// energy is zero again, evaluating every functional by quadrature.
///
/// A core-halo amplitude supplied by the caller is kept fixed.
pub fn rebalance(
    family: &Family,
    spec: &MollifySpec,
    energy_tolerance: f64,
) -> Result<Rebalanced, MollifyError> {
    let step = family.solve()?;
    let delta = spec.resolve(&step.ansatz)?;
    let target = spec.target;
    // Fails early, naming the colliding breakpoints.
    let smoothed_step = mollify_with(&step.ansatz, delta, target)?;
    let phi = smoothed_step.phi().clone();
    let angular = smoothed_step.angular().clone();
    let smooth_eta = |g: &PiecewiseProfile| -> Result<PiecewiseProfile, MollifyError> {
        if target.spatial() {
            mollify_profile(g, delta)
        } else {
            Ok(g.clone())
        }
    };

    let (step_parameter, parameter, alpha_roots, eta, phi) = match *family {
        Family::Uniform(_) => {
            let r_step = step.radius.expect("uniform family has a radius");
            let kinetic = kinetic_energy_quadrature(&phi, MOLLIFIED_QUAD)?;
            let ball = |r: f64| {
                PiecewiseProfile::indicator(0.0, r, 1.0, step.ansatz.eta().domain())
                    .map_err(MollifyError::from)
                    .and_then(|g| smooth_eta(&g))
            };
            let r = solve_increasing(
                |r| {
                    let eta = ball(r).map_err(as_solver)?;
                    Ok(kinetic + quad_potential(&eta)?)
                },
                r_step,
                2.0 * delta,
            )?;
            (
                FreeParameter::Radius(r_step),
                FreeParameter::Radius(r),
                vec![],
                ball(r)?,
                phi,
            )
        }
        Family::CoreHalo(CoreHaloParams {
            r1, r2, r3, alpha, ..
        }) => {
            let alpha_step = step.alpha.expect("core-halo family has an amplitude");
            let (core, halo) = core_halo_parts(r1, r2, r3)?;
            let (core, halo) = (smooth_eta(&core)?, smooth_eta(&halo)?);
            let (alpha, roots) = match alpha {
                Some(a) => (a, vec![]),
                None if r2 == r3 => (0.0, vec![]),
                None => {
                    let kinetic = kinetic_energy_quadrature(&phi, MOLLIFIED_QUAD)?;
                    let quadratic = EnergyQuadratic::from_parts(
                        &core,
                        &halo,
                        kinetic,
                        |g| Ok(radial_moment_quadrature(g, 2, MOLLIFIED_QUAD)?),
                        |g, h| {
                            Ok(nested_integral(g, h, MOLLIFIED_QUAD)
                                .map_err(FunctionalError::from)?
                                .value)
                        },
                    )?;
                    let sol = select_alpha(quadratic)?;
                    (sol.alpha, sol.roots)
                }
            };
            let eta = PiecewiseProfile::linear_combination(&[(1.0, &core), (alpha, &halo)])?;
            (
                FreeParameter::Alpha(alpha_step),
                FreeParameter::Alpha(alpha),
                roots,
                eta,
                phi,
            )
        }
        Family::Monotonic(_) => {
            let eta = smooth_eta(step.ansatz.eta())?;
            let potential = quad_potential(&eta)?;
            let ball = |p: f64| -> Result<PiecewiseProfile, MollifyError> {
                let g = momentum_ball(p)?;
                if target.momentum() {
                    mollify_profile(&g, delta)
                } else {
                    Ok(g)
                }
            };
            let p = solve_increasing(
                |p| {
                    let phi = ball(p).map_err(as_solver)?;
                    Ok(kinetic_energy_quadrature(&phi, MOLLIFIED_QUAD)? + potential)
                },
                step.momentum,
                2.0 * delta,
            )?;
            (
                FreeParameter::Momentum(step.momentum),
                FreeParameter::Momentum(p),
                vec![],
                eta,
                ball(p)?,
            )
        }
    };

    let ansatz = SeparableAnsatz::new(eta, phi, angular)?;
    let step_report = evaluate(&step.ansatz, Method::ClosedForm)?;
    let report = evaluate_with(&ansatz, Method::Quadrature, MOLLIFIED_QUAD)?;
    Ok(Rebalanced {
        kind: family.kind(),
        delta,
        target,
        step,
        step_parameter,
        parameter,
        alpha_roots,
        ansatz,
        step_report,
        certificate: Certificate::from_report(report, energy_tolerance),
        report,
    })
}
