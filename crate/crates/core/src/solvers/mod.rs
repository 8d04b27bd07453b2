//! Zero-energy solves for the three ansatz families and the angular
//! threshold for the virial condition.
//!
//! * uniform ball `η = χ_[0,R]`, `Φ = χ_[0,P]`: `R = 3 / (5 KE(P))`;
//! * disjoint core-halo `η = χ_[0,R₁] + α χ_[R₂,R₃]`: the energy times
//!   `‖η q²‖₁²` is a quadratic in `α`;
//! * monotonic core-halo with a `(R₁/r)ⁿ` atmosphere: the potential energy
//!   does not depend on `P`, so `KE(P) = -PE` is solved by bracketing.
//!
//! Every family uses `ℒ = χ_[-1,a]`.

mod root;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use root::{brent, RootBracket};

use crate::functionals::{self, kinetic_energy_uniform, potential_energy, virial_factor, FunctionalError};
use crate::profiles::{
    nested_moment, AngularProfile, Piece, PiecewiseProfile, ProfileError, RadialDomain, SeparableAnsatz,
};

/// Largest acceptable `|E| / KE` after a zero-energy solve.
pub const ENERGY_RESIDUAL_TOL: f64 = 1e-10;
/// Argument tolerance handed to the root finder.
pub const PARAMETER_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("residual has no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root finder did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("zero-energy condition has no positive halo amplitude (roots: {roots:?})")]
    NoPositiveRoot { roots: Vec<f64> },
    #[error("halo has zero width; core alone has energy {core_energy}")]
    DegenerateHalo { core_energy: f64 },
    #[error("potential energy {potential} cannot balance the rest-mass floor KE >= 1")]
    NoRoot { potential: f64 },
    #[error("no momentum cutoff up to {cap} balances the energy")]
    BracketExhausted { cap: f64 },
    #[error("virial factor {factor} <= 1/2: no a in (-1, 1] reaches V = -1/2")]
    UnreachableThreshold { factor: f64 },
    #[error("energy residual {residual} exceeds {tolerance} after solve")]
    Residual { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), SolverError> {
    if cond {
        Ok(())
    } else {
        Err(SolverError::InvalidParameter(msg()))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), SolverError> {
    require(v.is_finite() && v > 0.0, || {
        format!("{name} must be positive, got {v}")
    })
}

fn check_cutoff(a: f64) -> Result<(), SolverError> {
    require(a > -1.0 && a <= 1.0, || format!("a must lie in (-1, 1], got {a}"))
}

fn check_radii(r1: f64, r2: f64, r3: f64) -> Result<(), SolverError> {
    check_positive("r1", r1)?;
    check_positive("r2", r2)?;
    check_positive("r3", r3)?;
    require(r1 <= r2 && r2 <= r3, || {
        format!("radii must satisfy r1 <= r2 <= r3, got {r1}, {r2}, {r3}")
    })
}

// ---------------------------------------------------------------------------
// Profile builders

/// `χ_[0,P)` in momentum space.
pub fn momentum_ball(p: f64) -> Result<PiecewiseProfile, ProfileError> {
    PiecewiseProfile::indicator(0.0, p, 1.0, RadialDomain::Momentum)
}

pub fn uniform_ansatz(r: f64, p: f64, a: f64) -> Result<SeparableAnsatz, ProfileError> {
    SeparableAnsatz::new(
        PiecewiseProfile::indicator(0.0, r, 1.0, RadialDomain::Position)?,
        momentum_ball(p)?,
        AngularProfile::cutoff(a)?,
    )
}

/// Core `χ_[0,R₁)` and unit halo `χ_[R₂,R₃)`; the halo is the zero profile
/// when `R₂ = R₃`.
pub fn core_halo_parts(
    r1: f64,
    r2: f64,
    r3: f64,
) -> Result<(PiecewiseProfile, PiecewiseProfile), ProfileError> {
    let core = PiecewiseProfile::indicator(0.0, r1, 1.0, RadialDomain::Position)?;
    let halo = if r3 > r2 {
        PiecewiseProfile::indicator(r2, r3, 1.0, RadialDomain::Position)?
    } else {
        PiecewiseProfile::zero(RadialDomain::Position)
    };
    Ok((core, halo))
}

pub fn core_halo_eta(r1: f64, r2: f64, r3: f64, alpha: f64) -> Result<PiecewiseProfile, ProfileError> {
    let (core, halo) = core_halo_parts(r1, r2, r3)?;
    PiecewiseProfile::linear_combination(&[(1.0, &core), (alpha, &halo)])
}

pub fn core_halo_ansatz(
    r1: f64,
    r2: f64,
    r3: f64,
    alpha: f64,
    p: f64,
    a: f64,
) -> Result<SeparableAnsatz, ProfileError> {
    SeparableAnsatz::new(
        core_halo_eta(r1, r2, r3, alpha)?,
        momentum_ball(p)?,
        AngularProfile::cutoff(a)?,
    )
}

/// `χ_[0,R₁] + (R₁/r)ⁿ χ_[R₁,R₂] + (R₁/R₂)ⁿ χ_[R₂,R₃]`.
pub fn monotonic_eta(r1: f64, r2: f64, r3: f64, n: f64) -> Result<PiecewiseProfile, ProfileError> {
    let mut pieces = vec![Piece::constant(0.0, r1, 1.0)?];
    if r2 > r1 {
        pieces.push(Piece::power_law(r1, r2, 1.0, n)?);
    }
    if r3 > r2 {
        pieces.push(Piece::constant(r2, r3, (r1 / r2).powf(n))?);
    }
    PiecewiseProfile::from_support(pieces, RadialDomain::Position)
}

pub fn monotonic_ansatz(
    r1: f64,
    r2: f64,
    r3: f64,
    n: f64,
    p: f64,
    a: f64,
) -> Result<SeparableAnsatz, ProfileError> {
    SeparableAnsatz::new(
        monotonic_eta(r1, r2, r3, n)?,
        momentum_ball(p)?,
        AngularProfile::cutoff(a)?,
    )
}

// ---------------------------------------------------------------------------
// Zero-energy solves

/// Zero-energy ball radius `R = 3 / (5 KE(P))`.
pub fn solve_uniform_r(p: f64) -> Result<f64, SolverError> {
    check_positive("p", p)?;
    Ok(3.0 / (5.0 * kinetic_energy_uniform(p)))
}

/// The energy of `η = core + α·halo`, multiplied by `‖η q²‖₁²`, written as
/// `qa α² + qb α + qc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyQuadratic {
    pub qa: f64,
    pub qb: f64,
    pub qc: f64,
}

impl EnergyQuadratic {
    /// Builds the quadratic from the second moments and nested integrals of
    /// the two parts. `nested(g, h)` must return
    /// `∫ g(q) q ∫₀^q h q'² dq' dq`.
    pub fn from_parts<N>(
        core: &PiecewiseProfile,
        halo: &PiecewiseProfile,
        kinetic: f64,
        second_moment: impl Fn(&PiecewiseProfile) -> Result<f64, SolverError>,
        nested: N,
    ) -> Result<Self, SolverError>
    where
        N: Fn(&PiecewiseProfile, &PiecewiseProfile) -> Result<f64, SolverError>,
    {
        let a = second_moment(core)?;
        let b = second_moment(halo)?;
        let c0 = nested(core, core)?;
        let c1 = nested(core, halo)? + nested(halo, core)?;
        let c2 = nested(halo, halo)?;
        Ok(Self {
            qa: kinetic * b * b - c2,
            qb: 2.0 * kinetic * a * b - c1,
            qc: kinetic * a * a - c0,
        })
    }

    /// Exact closed-form coefficients.
    pub fn closed_form(
        core: &PiecewiseProfile,
        halo: &PiecewiseProfile,
        kinetic: f64,
    ) -> Result<Self, SolverError> {
        Self::from_parts(
            core,
            halo,
            kinetic,
            |g| Ok(g.moment(2)?),
            |g, h| Ok(nested_moment(g, h)?),
        )
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        (self.qa * alpha + self.qb) * alpha + self.qc
    }

    /// Real roots in ascending order.
    pub fn real_roots(&self) -> Vec<f64> {
        let Self { qa, qb, qc } = *self;
        if qa == 0.0 {
            return if qb == 0.0 { vec![] } else { vec![-qc / qb] };
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return vec![];
        }
        // Cancellation-free pair.
        let q = -0.5 * (qb + disc.sqrt().copysign(qb));
        let mut roots = if q == 0.0 {
            vec![0.0, 0.0]
        } else {
            vec![q / qa, qc / q]
        };
        roots.sort_by(f64::total_cmp);
        roots
    }
}

/// Halo amplitude solving the zero-energy condition, with both roots of the
/// quadratic for diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub roots: Vec<f64>,
    pub quadratic: EnergyQuadratic,
}

/// Picks the smallest positive root.
pub fn select_alpha(quadratic: EnergyQuadratic) -> Result<AlphaSolution, SolverError> {
    let roots = quadratic.real_roots();
    match roots.iter().copied().find(|r| *r > 0.0) {
        Some(alpha) => Ok(AlphaSolution {
            alpha,
            roots,
            quadratic,
        }),
        None => Err(SolverError::NoPositiveRoot { roots }),
    }
}

/// Halo amplitude `α > 0` giving zero total energy for the disjoint
/// core-halo family.
pub fn solve_corehalo_alpha(r1: f64, r2: f64, r3: f64, p: f64) -> Result<AlphaSolution, SolverError> {
    check_radii(r1, r2, r3)?;
    check_positive("p", p)?;
    let kinetic = kinetic_energy_uniform(p);
    let (core, halo) = core_halo_parts(r1, r2, r3)?;
    let quadratic = EnergyQuadratic::closed_form(&core, &halo, kinetic)?;
    if r2 == r3 {
        let m2 = core.moment(2)?;
        let core_energy = quadratic.qc / (m2 * m2);
        if core_energy.abs() <= ENERGY_RESIDUAL_TOL {
            return Ok(AlphaSolution {
                alpha: 0.0,
                roots: vec![],
                quadratic,
            });
        }
        return Err(SolverError::DegenerateHalo { core_energy });
    }
    select_alpha(quadratic)
}

/// Lower end of the momentum bracket, the starting upper end and the cap on
/// its expansion.
pub const MOMENTUM_BRACKET: (f64, f64, f64) = (1e-3, 10.0, 1e6);

/// Solves `kinetic(P) + potential = 0` for the momentum cutoff, with
/// `kinetic` increasing from 1 at `P = 0`.
pub fn solve_momentum_cutoff<K>(potential: f64, mut kinetic: K) -> Result<f64, SolverError>
where
    K: FnMut(f64) -> Result<f64, SolverError>,
{
    if potential >= -1.0 {
        return Err(SolverError::NoRoot { potential });
    }
    let (mut lo, mut hi, cap) = MOMENTUM_BRACKET;
    let mut residual = |p: f64| -> Result<f64, SolverError> { Ok(kinetic(p)? + potential) };
    while residual(lo)? > 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(SolverError::NoRoot { potential });
        }
    }
    while residual(hi)? < 0.0 {
        hi *= 2.0;
        if hi > cap {
            return Err(SolverError::BracketExhausted { cap });
        }
    }
    brent(residual, RootBracket::new(lo, hi, PARAMETER_TOL))
}

/// Momentum cutoff `P` giving zero energy for the monotonic core-halo family.
pub fn solve_monotonic_p(r1: f64, r2: f64, r3: f64, n: f64) -> Result<f64, SolverError> {
    check_radii(r1, r2, r3)?;
    check_positive("n", n)?;
    let eta = monotonic_eta(r1, r2, r3, n)?;
    let probe = SeparableAnsatz::new(eta, momentum_ball(1.0)?, AngularProfile::cutoff(1.0)?)?;
    let potential = potential_energy(&probe)?;
    solve_momentum_cutoff(potential, |p| Ok(kinetic_energy_uniform(p)))
}

/// `a* = 1 - 1/S`: with `ℒ = χ_[-1,a]` the virial is `S (a - 1)/2`, so
/// `V(a) <= -1/2` exactly for `a <= a*`.
pub fn threshold_from_factor(factor: f64) -> Result<f64, SolverError> {
    if !(factor > 0.5) {
        return Err(SolverError::UnreachableThreshold { factor });
    }
    Ok(1.0 - 1.0 / factor)
}

/// Threshold cutoff for the spatial and momentum factors of `ansatz` (its
/// angular factor is ignored).
pub fn solve_threshold_a(ansatz: &SeparableAnsatz) -> Result<f64, SolverError> {
    threshold_from_factor(virial_factor(ansatz)?)
}

// ---------------------------------------------------------------------------
// Families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Uniform,
    CoreHalo,
    Monotonic,
    Custom,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Uniform => "uniform",
            FamilyKind::CoreHalo => "core-halo",
            FamilyKind::Monotonic => "monotonic",
            FamilyKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformParams {
    pub p: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreHaloParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub p: f64,
    pub a: f64,
    /// Supplied halo amplitude; solved from the zero-energy condition when
    /// absent.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicParams {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub n: f64,
    pub a: f64,
}

/// A parametrized family whose free parameter is fixed by zero energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Uniform(UniformParams),
    CoreHalo(CoreHaloParams),
    Monotonic(MonotonicParams),
}

/// A family with its free parameter solved and the resulting step datum.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedFamily {
    pub kind: FamilyKind,
    /// Ball radius (uniform family).
    pub radius: Option<f64>,
    /// Halo amplitude (core-halo family).
    pub alpha: Option<f64>,
    /// Both roots of the halo quadratic when it was solved.
    pub alpha_roots: Vec<f64>,
    pub momentum: f64,
    pub a: f64,
    pub ansatz: SeparableAnsatz,
}

impl Family {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Uniform(_) => FamilyKind::Uniform,
            Family::CoreHalo(_) => FamilyKind::CoreHalo,
            Family::Monotonic(_) => FamilyKind::Monotonic,
        }
    }

    pub fn cutoff(&self) -> f64 {
        match self {
            Family::Uniform(p) => p.a,
            Family::CoreHalo(p) => p.a,
            Family::Monotonic(p) => p.a,
        }
    }

    /// Checks every precondition without solving anything.
    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            Family::Uniform(UniformParams { p, a }) => {
                check_positive("p", p)?;
                check_cutoff(a)
            }
            Family::CoreHalo(CoreHaloParams {
                r1,
                r2,
                r3,
                p,
                a,
                alpha,
            }) => {
                check_radii(r1, r2, r3)?;
                check_positive("p", p)?;
                check_cutoff(a)?;
                if let Some(alpha) = alpha {
                    check_positive("alpha", alpha)?;
                }
                Ok(())
            }
            Family::Monotonic(MonotonicParams { r1, r2, r3, n, a }) => {
                check_radii(r1, r2, r3)?;
                check_positive("n", n)?;
                check_cutoff(a)
            }
        }
    }

    /// Solves the free parameter and builds the step datum, verifying the
    /// energy residual unless the amplitude was supplied by the caller.
    pub fn solve(&self) -> Result<SolvedFamily, SolverError> {
        self.validate()?;
        let solved = match *self {
            Family::Uniform(UniformParams { p, a }) => {
                let r = solve_uniform_r(p)?;
                SolvedFamily {
                    kind: FamilyKind::Uniform,
                    radius: Some(r),
                    alpha: None,
                    alpha_roots: vec![],
                    momentum: p,
                    a,
                    ansatz: uniform_ansatz(r, p, a)?,
                }
            }
            Family::CoreHalo(CoreHaloParams {
                r1,
                r2,
                r3,
                p,
                a,
                alpha,
            }) => {
                let (alpha, roots) = match alpha {
                    Some(alpha) => (alpha, vec![]),
                    None => {
                        let sol = solve_corehalo_alpha(r1, r2, r3, p)?;
                        (sol.alpha, sol.roots)
                    }
                };
                SolvedFamily {
                    kind: FamilyKind::CoreHalo,
                    radius: None,
                    alpha: Some(alpha),
                    alpha_roots: roots,
                    momentum: p,
                    a,
                    ansatz: core_halo_ansatz(r1, r2, r3, alpha, p, a)?,
                }
            }
            Family::Monotonic(MonotonicParams { r1, r2, r3, n, a }) => {
                let p = solve_monotonic_p(r1, r2, r3, n)?;
                SolvedFamily {
                    kind: FamilyKind::Monotonic,
                    radius: None,
                    alpha: None,
                    alpha_roots: vec![],
                    momentum: p,
                    a,
                    ansatz: monotonic_ansatz(r1, r2, r3, n, p, a)?,
                }
            }
        };
        let supplied = matches!(self, Family::CoreHalo(CoreHaloParams { alpha: Some(_), .. }));
        if !supplied {
            // KE and -PE are each at least 1, so the residual is judged
            // against their size.
            let kinetic = functionals::kinetic_energy(&solved.ansatz)?;
            let residual = functionals::total_energy(&solved.ansatz)?.abs();
            if residual > ENERGY_RESIDUAL_TOL * kinetic {
                return Err(SolverError::Residual {
                    residual,
                    tolerance: ENERGY_RESIDUAL_TOL,
                });
            }
        }
        Ok(solved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{total_energy, virial};

    #[test]
    fn uniform_radius() {
        let r = solve_uniform_r(1.0).unwrap();
        assert!((r - 0.476_010_966_207_512).abs() < 1e-12, "{r}");
        assert!((solve_uniform_r(1e-9).unwrap() - 0.6).abs() < 1e-15);
        let big = 1e6;
        assert!((solve_uniform_r(big).unwrap() * big / 0.8 - 1.0).abs() < 1e-5);
        let f = uniform_ansatz(r, 1.0, 0.0).unwrap();
        assert!(total_energy(&f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn quadratic_roots_are_stable() {
        let q = EnergyQuadratic {
            qa: 1.0,
            qb: -1e8,
            qc: 1.0,
        };
        let roots = q.real_roots();
        assert!((roots[0] - 1e-8).abs() < 1e-22);
        assert!((roots[1] - 1e8).abs() < 1e-6);
    }

    #[test]
    fn corehalo_degenerate_halo() {
        let r = solve_corehalo_alpha(0.2, 1.0, 1.0, 1.0);
        assert!(matches!(r, Err(SolverError::DegenerateHalo { .. })));
    }

    #[test]
    fn corehalo_rejects_bad_radii() {
        assert!(matches!(
            solve_corehalo_alpha(1.0, 0.5, 2.0, 1.0),
            Err(SolverError::InvalidParameter(_))
        ));
    }

    #[test]
    fn monotonic_no_root_when_potential_too_shallow() {
        // A wide ball has |PE| < 1.
        let r = solve_monotonic_p(1.0, 2.0, 3.0, 3.0);
        assert!(matches!(r, Err(SolverError::NoRoot { .. })));
        let r = solve_momentum_cutoff(-1.0, |p| Ok(kinetic_energy_uniform(p)));
        assert!(matches!(r, Err(SolverError::NoRoot { .. })));
    }

    #[test]
    fn threshold_identities() {
        assert_eq!(threshold_from_factor(1.0).unwrap(), 0.0);
        assert!(matches!(
            threshold_from_factor(0.5),
            Err(SolverError::UnreachableThreshold { .. })
        ));
        let f = uniform_ansatz(2.0, 3.0, -0.2).unwrap();
        let a_star = solve_threshold_a(&f).unwrap();
        let at = f.with_angular(AngularProfile::cutoff(a_star).unwrap()).unwrap();
        assert!((virial(&at).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn family_solve_round_trip() {
        let fams = [
            Family::Uniform(UniformParams { p: 3.0, a: -0.5 }),
            Family::CoreHalo(CoreHaloParams {
                r1: 0.2,
                r2: 1.0,
                r3: 2.0,
                p: 1.0,
                a: -0.8,
                alpha: None,
            }),
            Family::Monotonic(MonotonicParams {
                r1: 0.01,
                r2: 1.0 / 11.0,
                r3: 0.1,
                n: 3.0,
                a: -0.95,
            }),
        ];
        for fam in fams {
            let solved = fam.solve().unwrap();
            assert!(total_energy(&solved.ansatz).unwrap().abs() <= ENERGY_RESIDUAL_TOL);
        }
    }
}
