//! One-dimensional factors of the separable phase-space ansatz
//! `f(p, q) = C · η(|q|) · Φ(|p|) · ℒ(cos θ_{p,q})`.
//!
//! Radial factors are [`PiecewiseProfile`]s on `[0, ∞)` made of constant,
//! power-law and cubic ramp pieces; the angular factor is an
//! [`AngularProfile`] on `[-1, 1]`. All moments used by the functionals are
//! integrated exactly piece by piece.

mod nested;
mod piece;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::QuadratureError;

pub use nested::nested_moment;
pub(crate) use piece::FALLBACK_QUAD;
pub use piece::{Piece, PieceKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid piece interval [{lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("non-finite parameter in piece on [{lo}, {hi})")]
    NonFiniteParameter { lo: f64, hi: f64 },
    #[error("profile is negative ({value}) at {at}")]
    NegativeValue { at: f64, value: f64 },
    #[error("power-law piece must start away from the origin (piece ends at {hi})")]
    PowerLawAtOrigin { hi: f64 },
    #[error("pieces must cover the domain contiguously: gap or overlap at {at}")]
    Coverage { at: f64 },
    #[error("only a final zero piece may extend to infinity")]
    UnboundedSupport,
    #[error("moment of order {k} diverges")]
    Divergent { k: i32 },
    #[error("angular profile has zero total integral")]
    ZeroMeasure,
    #[error("angular cutoff must lie in (-1, 1], got {0}")]
    InvalidCutoff(f64),
    #[error("{0} factor integral is zero or not finite")]
    DegenerateFactor(&'static str),
    #[error("cannot combine pieces of different kinds on [{lo}, {hi})")]
    IncompatiblePieces { lo: f64, hi: f64 },
    #[error("power-law piece not allowed on the angular domain")]
    AngularPowerLaw,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Which radial variable a profile describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RadialDomain {
    #[default]
    Position,
    Momentum,
}

/// Non-negative, compactly supported radial function on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProfile {
    pieces: Vec<Piece>,
    domain: RadialDomain,
    moments: [f64; 4],
}

impl PiecewiseProfile {
    /// Builds a profile from pieces that cover `[0, ∞)` exactly; the last
    /// piece must be an unbounded zero piece.
    pub fn new(pieces: Vec<Piece>, domain: RadialDomain) -> Result<Self, ProfileError> {
        for p in &pieces {
            p.validate()?;
        }
        let first = pieces.first().ok_or(ProfileError::Coverage { at: 0.0 })?;
        if first.lo != 0.0 {
            return Err(ProfileError::Coverage { at: 0.0 });
        }
        for pair in pieces.windows(2) {
            if pair[0].hi != pair[1].lo {
                return Err(ProfileError::Coverage { at: pair[0].hi });
            }
        }
        let last = pieces.last().expect("non-empty");
        if !last.hi.is_infinite() || !last.is_zero() {
            return Err(ProfileError::UnboundedSupport);
        }
        let mut moments = [0.0; 4];
        for (k, m) in moments.iter_mut().enumerate() {
            *m = pieces
                .iter()
                .map(|p| p.moment_between(k as i32, p.lo, p.hi))
                .sum::<Result<f64, _>>()?;
        }
        Ok(Self {
            pieces,
            domain,
            moments,
        })
    }

    /// Builds a profile from pieces covering `[0, R)`; the zero tail on
    /// `[R, ∞)` is appended.
    pub fn from_support(mut pieces: Vec<Piece>, domain: RadialDomain) -> Result<Self, ProfileError> {
        let end = pieces.last().map_or(0.0, |p| p.hi);
        if !end.is_finite() {
            return Err(ProfileError::UnboundedSupport);
        }
        if end > 0.0 {
            pieces.push(Piece::constant(end, f64::INFINITY, 0.0)?);
        } else {
            pieces.push(Piece::constant(0.0, f64::INFINITY, 0.0)?);
        }
        Self::new(pieces, domain)
    }

    pub fn zero(domain: RadialDomain) -> Self {
        Self::from_support(Vec::new(), domain).expect("zero profile is valid")
    }

    /// `value · χ_[lo, hi)`.
    pub fn indicator(lo: f64, hi: f64, value: f64, domain: RadialDomain) -> Result<Self, ProfileError> {
        let mut pieces = Vec::with_capacity(3);
        if lo > 0.0 {
            pieces.push(Piece::constant(0.0, lo, 0.0)?);
        }
        pieces.push(Piece::constant(lo, hi, value)?);
        Self::from_support(pieces, domain)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn domain(&self) -> RadialDomain {
        self.domain
    }

    fn piece_index(&self, r: f64) -> usize {
        self.pieces.partition_point(|p| p.lo <= r).saturating_sub(1)
    }

    /// Right-continuous value at `r ≥ 0`.
    pub fn eval(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let p = &self.pieces[self.piece_index(r)];
        if r >= p.hi {
            0.0
        } else {
            p.eval(r)
        }
    }

    /// Derivative at `r` (right derivative at breakpoints).
    pub fn slope(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        self.pieces[self.piece_index(r)].slope(r)
    }

    /// Interior breakpoints (finite piece endpoints other than 0).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .map(|p| p.hi)
            .filter(|h| h.is_finite())
            .collect()
    }

    /// End of the support: the upper end of the last non-zero piece.
    pub fn support_end(&self) -> f64 {
        self.pieces
            .iter()
            .rev()
            .find(|p| !p.is_zero())
            .map_or(0.0, |p| p.hi)
    }

    /// Width of the narrowest finite piece.
    pub fn min_piece_width(&self) -> f64 {
        self.pieces
            .iter()
            .map(Piece::width)
            .filter(|w| w.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// `∫₀^∞ g(r) r^k dr`.
    pub fn moment(&self, k: i32) -> Result<f64, ProfileError> {
        if (0..4).contains(&k) {
            return Ok(self.moments[k as usize]);
        }
        self.partial_moment(k, f64::INFINITY)
    }

    /// `∫₀^x g(r) r^k dr`.
    pub fn partial_moment(&self, k: i32, x: f64) -> Result<f64, ProfileError> {
        let mut total = 0.0;
        for p in &self.pieces {
            if p.lo >= x {
                break;
            }
            total += p.moment_between(k, p.lo, p.hi.min(x))?;
        }
        Ok(total)
    }

    /// `∫₀^q g(r) r² dr`, the mass inside radius `q` (up to `4π`).
    pub fn cumulative_mass(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        self.partial_moment(2, q)
            .expect("second moments are finite for compactly supported profiles")
    }

    /// `∫₀^∞ g(r)^β r^k dr`.
    pub fn lbeta_moment(&self, beta: f64, k: i32) -> Result<f64, ProfileError> {
        self.lbeta_moment_with_error(beta, k).map(|(v, _)| v)
    }

    /// Like [`lbeta_moment`](Self::lbeta_moment), with the accumulated error
    /// estimate of any ramp pieces integrated numerically.
    pub fn lbeta_moment_with_error(&self, beta: f64, k: i32) -> Result<(f64, f64), ProfileError> {
        self.pieces.iter().try_fold((0.0, 0.0), |(v, e), p| {
            let (pv, pe) = p.power_moment_between(beta, k, p.lo, p.hi)?;
            Ok((v + pv, e + pe))
        })
    }

    /// Momentum cutoff `P` if the profile is `c · χ_[0, P)`.
    pub fn indicator_cutoff(&self) -> Option<f64> {
        let support: Vec<&Piece> = self.pieces.iter().filter(|p| !p.is_zero()).collect();
        match support.as_slice() {
            [p] if p.lo == 0.0 && matches!(p.kind, PieceKind::Constant { .. }) => Some(p.hi),
            _ => None,
        }
    }

    /// True when every value is 0 or 1.
    pub fn is_unit_indicator(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| matches!(p.kind, PieceKind::Constant { value } if value == 0.0 || value == 1.0))
    }

    /// Pointwise multiple `s · g`.
    pub fn scaled(&self, s: f64) -> Result<Self, ProfileError> {
        Self::new(self.pieces.iter().map(|p| p.scaled(s)).collect(), self.domain)
    }

    /// Spatial dilation `r ↦ g(r / λ)`.
    pub fn dilated(&self, lambda: f64) -> Result<Self, ProfileError> {
        Self::new(
            self.pieces.iter().map(|p| p.dilated(lambda)).collect(),
            self.domain,
        )
    }

    /// `Σ cᵢ gᵢ` for non-negative coefficients. Pieces are merged on the
    /// common refinement of all breakpoints; a power-law piece may only be
    /// combined with zero pieces or a power law of the same exponent.
    pub fn linear_combination(terms: &[(f64, &PiecewiseProfile)]) -> Result<Self, ProfileError> {
        let domain = terms.first().map_or(RadialDomain::Position, |(_, p)| p.domain);
        let mut cuts: Vec<f64> = terms.iter().flat_map(|(_, p)| p.breakpoints()).collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len());
        for (i, &lo) in cuts.iter().enumerate() {
            let hi = cuts.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let parts: Vec<Piece> = terms
                .iter()
                .map(|(c, p)| {
                    let piece = &p.pieces[p.piece_index(lo)];
                    piece.restricted(lo, hi).scaled(*c)
                })
                .filter(|p| !p.is_zero())
                .collect();
            pieces.push(sum_pieces(lo, hi, &parts)?);
        }
        Self::new(pieces, domain)
    }
}

fn sum_pieces(lo: f64, hi: f64, parts: &[Piece]) -> Result<Piece, ProfileError> {
    let incompatible = ProfileError::IncompatiblePieces { lo, hi };
    let Some(first) = parts.first() else {
        return Piece::constant(lo, hi, 0.0);
    };
    if let PieceKind::PowerLaw { exponent, .. } = first.kind {
        let mut total = 0.0;
        for p in parts {
            match p.kind {
                PieceKind::PowerLaw { value, exponent: e } if e == exponent => total += value,
                _ => return Err(incompatible),
            }
        }
        return Piece::power_law(lo, hi, total, exponent);
    }
    let mut acc = [0.0; 4];
    let mut any_ramp = false;
    for p in parts {
        match p.kind {
            PieceKind::Constant { value } => {
                acc[0] += value;
                acc[1] += value;
            }
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => {
                any_ramp = true;
                acc[0] += left;
                acc[1] += right;
                acc[2] += left_slope;
                acc[3] += right_slope;
            }
            PieceKind::PowerLaw { .. } => return Err(incompatible),
        }
    }
    if any_ramp {
        Piece::new(
            lo,
            hi,
            PieceKind::SmoothRamp {
                left: acc[0],
                right: acc[1],
                left_slope: acc[2],
                right_slope: acc[3],
            },
        )
    } else {
        Piece::constant(lo, hi, acc[0])
    }
}

/// The three angular integrals entering the functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularMoments {
    /// `∫ ℒ(x) dx`
    pub m0: f64,
    /// `∫ x ℒ(x) dx`
    pub m1: f64,
    /// `∫ ℒ(x)^{3/2} dx`
    pub m32: f64,
    /// Set when `m0` is so small that normalization is ill-conditioned.
    pub near_degenerate: bool,
}

/// Below this total angular weight the profile is flagged near-degenerate.
pub const NEAR_DEGENERATE_ANGULAR: f64 = 1e-6;

/// Non-negative function of `x = cos θ` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    pieces: Vec<Piece>,
    moments: AngularMoments,
    m32_error: f64,
}

impl AngularProfile {
    /// Pieces must cover `[-1, 1]` contiguously; power laws are not allowed.
    pub fn new(pieces: Vec<Piece>) -> Result<Self, ProfileError> {
        for p in &pieces {
            p.validate()?;
            if matches!(p.kind, PieceKind::PowerLaw { .. }) {
                return Err(ProfileError::AngularPowerLaw);
            }
        }
        let first = pieces.first().ok_or(ProfileError::Coverage { at: -1.0 })?;
        if first.lo != -1.0 {
            return Err(ProfileError::Coverage { at: -1.0 });
        }
        for pair in pieces.windows(2) {
            if pair[0].hi != pair[1].lo {
                return Err(ProfileError::Coverage { at: pair[0].hi });
            }
        }
        if pieces.last().expect("non-empty").hi != 1.0 {
            return Err(ProfileError::Coverage { at: 1.0 });
        }
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m32 = 0.0;
        let mut m32_error = 0.0;
        for p in &pieces {
            m0 += p.moment_between(0, p.lo, p.hi)?;
            m1 += p.moment_between(1, p.lo, p.hi)?;
            let (v, e) = p.power_moment_between(1.5, 0, p.lo, p.hi)?;
            m32 += v;
            m32_error += e;
        }
        if !(m0 > 0.0) {
            return Err(ProfileError::ZeroMeasure);
        }
        Ok(Self {
            pieces,
            moments: AngularMoments {
                m0,
                m1,
                m32,
                near_degenerate: m0 < NEAR_DEGENERATE_ANGULAR,
            },
            m32_error,
        })
    }

    /// `χ_[-1, a]`, momenta confined to a cone pointing inward for `a < 0`.
    pub fn cutoff(a: f64) -> Result<Self, ProfileError> {
        if !(a > -1.0 && a <= 1.0) {
            return Err(if a == -1.0 {
                ProfileError::ZeroMeasure
            } else {
                ProfileError::InvalidCutoff(a)
            });
        }
        let mut pieces = vec![Piece::constant(-1.0, a.min(1.0), 1.0)?];
        if a < 1.0 {
            pieces.push(Piece::constant(a, 1.0, 0.0)?);
        }
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn moments(&self) -> AngularMoments {
        self.moments
    }

    pub(crate) fn m32_error(&self) -> f64 {
        self.m32_error
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let i = self.pieces.partition_point(|p| p.lo <= x).saturating_sub(1);
        self.pieces[i].eval(x)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.hi).filter(|h| *h < 1.0).collect()
    }

    pub fn min_piece_width(&self) -> f64 {
        self.pieces.iter().map(Piece::width).fold(f64::INFINITY, f64::min)
    }

    /// The cutoff `a` if this is `χ_[-1, a]`.
    pub fn cutoff_parameter(&self) -> Option<f64> {
        match self.pieces.as_slice() {
            [p] if p.kind == (PieceKind::Constant { value: 1.0 }) => Some(1.0),
            [p, z] if p.kind == (PieceKind::Constant { value: 1.0 }) && z.is_zero() => Some(p.hi),
            _ => None,
        }
    }
}

/// Free-function form of [`AngularProfile::moments`].
pub fn angular_moments(angular: &AngularProfile) -> AngularMoments {
    angular.moments()
}

/// `f(p, q) = C · η(|q|) · Φ(|p|) · ℒ(cos θ_{p,q})` with `C` fixed so that the
/// total mass is one.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableAnsatz {
    eta: PiecewiseProfile,
    phi: PiecewiseProfile,
    angular: AngularProfile,
    norm_constant: f64,
}

impl SeparableAnsatz {
    pub fn new(
        eta: PiecewiseProfile,
        phi: PiecewiseProfile,
        angular: AngularProfile,
    ) -> Result<Self, ProfileError> {
        let eta2 = eta.moment(2)?;
        let phi2 = phi.moment(2)?;
        let m0 = angular.moments().m0;
        for (name, v) in [("spatial", eta2), ("momentum", phi2), ("angular", m0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProfileError::DegenerateFactor(name));
            }
        }
        let norm_constant = 1.0 / (8.0 * PI * PI * eta2 * phi2 * m0);
        if !(norm_constant.is_finite() && norm_constant > 0.0) {
            return Err(ProfileError::DegenerateFactor("normalization"));
        }
        Ok(Self {
            eta,
            phi,
            angular,
            norm_constant,
        })
    }

    pub fn eta(&self) -> &PiecewiseProfile {
        &self.eta
    }

    pub fn phi(&self) -> &PiecewiseProfile {
        &self.phi
    }

    pub fn angular(&self) -> &AngularProfile {
        &self.angular
    }

    /// Cached `C`.
    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    /// Phase-space density at `|p|`, `|q|` and `cos θ_{p,q}`.
    pub fn density(&self, p_abs: f64, q_abs: f64, cos_theta: f64) -> f64 {
        self.norm_constant * self.eta.eval(q_abs) * self.phi.eval(p_abs) * self.angular.eval(cos_theta)
    }

    /// Phase-space density at Cartesian momentum `p` and position `q`.
    pub fn density_at(&self, p: [f64; 3], q: [f64; 3]) -> f64 {
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = if pn > 0.0 && qn > 0.0 {
            (p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / (pn * qn)).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        self.density(pn, qn, cos)
    }

    /// Same ansatz with the angular factor replaced.
    pub fn with_angular(&self, angular: AngularProfile) -> Result<Self, ProfileError> {
        Self::new(self.eta.clone(), self.phi.clone(), angular)
    }

    pub fn with_eta(&self, eta: PiecewiseProfile) -> Result<Self, ProfileError> {
        Self::new(eta, self.phi.clone(), self.angular.clone())
    }

    pub fn with_phi(&self, phi: PiecewiseProfile) -> Result<Self, ProfileError> {
        Self::new(self.eta.clone(), phi, self.angular.clone())
    }
}
