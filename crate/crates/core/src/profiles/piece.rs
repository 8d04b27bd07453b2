use serde::{Deserialize, Serialize};

use super::ProfileError;
use crate::poly::Poly;
use crate::quadrature::{self, QuadSettings};

/// Tolerances for the few piece integrals that have no closed form
/// (fractional powers of ramps).
pub(crate) const FALLBACK_QUAD: QuadSettings = QuadSettings {
    abs_tol: 1e-300,
    rel_tol: 1e-14,
    max_subdivisions: 4096,
};

/// Shape of one piece on its interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PieceKind {
    Constant {
        value: f64,
    },
    /// `value · (lo / r)^exponent`, anchored at the piece's left endpoint.
    PowerLaw {
        value: f64,
        exponent: f64,
    },
    /// Cubic Hermite ramp from `left` at `lo` to `right` at `hi`. With zero
    /// slopes this is the smoothstep `left + (right - left)(3t² - 2t³)`.
    SmoothRamp {
        left: f64,
        right: f64,
        #[serde(default)]
        left_slope: f64,
        #[serde(default)]
        right_slope: f64,
    },
}

impl PieceKind {
    pub fn smoothstep(left: f64, right: f64) -> Self {
        Self::SmoothRamp {
            left,
            right,
            left_slope: 0.0,
            right_slope: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub kind: PieceKind,
}

/// `∫₁^ρ u^e du`, with the logarithmic case selected by exact comparison.
pub(crate) fn pow_integral(e: f64, rho: f64) -> f64 {
    let ln_rho = rho.ln();
    if e == -1.0 {
        ln_rho
    } else {
        ((e + 1.0) * ln_rho).exp_m1() / (e + 1.0)
    }
}

impl Piece {
    pub fn new(lo: f64, hi: f64, kind: PieceKind) -> Result<Self, ProfileError> {
        let piece = Self { lo, hi, kind };
        piece.validate()?;
        Ok(piece)
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self, ProfileError> {
        Self::new(lo, hi, PieceKind::Constant { value })
    }

    pub fn power_law(lo: f64, hi: f64, value: f64, exponent: f64) -> Result<Self, ProfileError> {
        Self::new(lo, hi, PieceKind::PowerLaw { value, exponent })
    }

    pub fn smoothstep(lo: f64, hi: f64, left: f64, right: f64) -> Result<Self, ProfileError> {
        Self::new(lo, hi, PieceKind::smoothstep(left, right))
    }

    pub(crate) fn validate(&self) -> Result<(), ProfileError> {
        let (lo, hi) = (self.lo, self.hi);
        if lo.is_nan() || hi.is_nan() || lo.is_infinite() || !(lo < hi) {
            return Err(ProfileError::InvalidInterval { lo, hi });
        }
        let params: &[f64] = match &self.kind {
            PieceKind::Constant { value } => &[*value][..],
            PieceKind::PowerLaw { value, exponent } => &[*value, *exponent][..],
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => &[*left, *right, *left_slope, *right_slope][..],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ProfileError::NonFiniteParameter { lo, hi });
        }
        match self.kind {
            PieceKind::Constant { value } if value < 0.0 => {
                Err(ProfileError::NegativeValue { at: lo, value })
            }
            PieceKind::PowerLaw { .. } if lo <= 0.0 => Err(ProfileError::PowerLawAtOrigin { hi }),
            PieceKind::PowerLaw { value, .. } if value < 0.0 => {
                Err(ProfileError::NegativeValue { at: lo, value })
            }
            PieceKind::SmoothRamp { .. } if hi.is_infinite() => Err(ProfileError::InvalidInterval { lo, hi }),
            PieceKind::SmoothRamp { left, right, .. } => {
                let (t, min) = self.ramp_minimum();
                let scale = left.abs().max(right.abs());
                if min < -1e-14 * scale || left < 0.0 || right < 0.0 {
                    Err(ProfileError::NegativeValue {
                        at: lo + t * (hi - lo),
                        value: min,
                    })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            PieceKind::Constant { value } | PieceKind::PowerLaw { value, .. } => value == 0.0,
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => left == 0.0 && right == 0.0 && left_slope == 0.0 && right_slope == 0.0,
        }
    }

    pub fn is_ramp(&self) -> bool {
        matches!(self.kind, PieceKind::SmoothRamp { .. })
    }

    /// Ramp coefficients in the local coordinate `t = (r - lo) / (hi - lo)`,
    /// lowest order first.
    fn ramp_coeffs(&self) -> Option<[f64; 4]> {
        let PieceKind::SmoothRamp {
            left: l,
            right: r,
            left_slope,
            right_slope,
        } = self.kind
        else {
            return None;
        };
        let w = self.width();
        let (ml, mr) = (w * left_slope, w * right_slope);
        Some([
            l,
            ml,
            -3.0 * l - 2.0 * ml + 3.0 * r - mr,
            2.0 * l + ml - 2.0 * r + mr,
        ])
    }

    pub(crate) fn ramp_poly(&self) -> Option<Poly> {
        self.ramp_coeffs().map(|c| Poly::new(c.to_vec()))
    }

    fn ramp_minimum(&self) -> (f64, f64) {
        let poly = self.ramp_poly().expect("ramp");
        let mut candidates = vec![0.0, 1.0];
        // p'(t) = c1 + 2 c2 t + 3 c3 t²
        let d = poly.derivative();
        let (c, b, a) = (d.coeff(0), d.coeff(1), d.coeff(2));
        if a.abs() > 0.0 {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                candidates.push((-b + s) / (2.0 * a));
                candidates.push((-b - s) / (2.0 * a));
            }
        } else if b != 0.0 {
            candidates.push(-c / b);
        }
        candidates
            .into_iter()
            .filter(|t| (0.0..=1.0).contains(t))
            .map(|t| (t, poly.eval(t)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("endpoints are always candidates")
    }

    /// Value at `r`; callers guarantee `lo <= r <= hi`.
    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            PieceKind::Constant { value } => value,
            PieceKind::PowerLaw { value, exponent } => value * (self.lo / r).powf(exponent),
            PieceKind::SmoothRamp { .. } => {
                let t = ((r - self.lo) / self.width()).clamp(0.0, 1.0);
                let c = self.ramp_coeffs().expect("ramp");
                (c[0] + t * (c[1] + t * (c[2] + t * c[3]))).max(0.0)
            }
        }
    }

    /// Derivative with respect to `r`.
    pub fn slope(&self, r: f64) -> f64 {
        match self.kind {
            PieceKind::Constant { .. } => 0.0,
            PieceKind::PowerLaw { value, exponent } => -exponent * value * (self.lo / r).powf(exponent) / r,
            PieceKind::SmoothRamp { .. } => {
                let t = ((r - self.lo) / self.width()).clamp(0.0, 1.0);
                let c = self.ramp_coeffs().expect("ramp");
                (c[1] + t * (2.0 * c[2] + t * 3.0 * c[3])) / self.width()
            }
        }
    }

    /// Left limit of the value at `hi`.
    pub fn value_at_end(&self) -> f64 {
        if self.hi.is_infinite() {
            return match self.kind {
                PieceKind::Constant { value } => value,
                _ => 0.0,
            };
        }
        self.eval(self.hi)
    }

    /// The same function restricted to `[x0, x1] ⊆ [lo, hi]`, re-anchored.
    pub fn restricted(&self, x0: f64, x1: f64) -> Piece {
        let kind = match self.kind {
            PieceKind::Constant { value } => PieceKind::Constant { value },
            PieceKind::PowerLaw { exponent, .. } => PieceKind::PowerLaw {
                value: self.eval(x0),
                exponent,
            },
            PieceKind::SmoothRamp { .. } => {
                let poly = self.ramp_poly().expect("ramp");
                let dpoly = poly.derivative();
                let w = self.width();
                let t0 = (x0 - self.lo) / w;
                let t1 = (x1 - self.lo) / w;
                PieceKind::SmoothRamp {
                    left: poly.eval(t0).max(0.0),
                    right: poly.eval(t1).max(0.0),
                    left_slope: dpoly.eval(t0) / w,
                    right_slope: dpoly.eval(t1) / w,
                }
            }
        };
        Piece { lo: x0, hi: x1, kind }
    }

    /// Values scaled by `s ≥ 0`.
    pub fn scaled(&self, s: f64) -> Piece {
        let kind = match self.kind {
            PieceKind::Constant { value } => PieceKind::Constant { value: value * s },
            PieceKind::PowerLaw { value, exponent } => PieceKind::PowerLaw {
                value: value * s,
                exponent,
            },
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => PieceKind::SmoothRamp {
                left: left * s,
                right: right * s,
                left_slope: left_slope * s,
                right_slope: right_slope * s,
            },
        };
        Piece { kind, ..*self }
    }

    /// `r ↦ piece(r / λ)`.
    pub fn dilated(&self, lambda: f64) -> Piece {
        let kind = match self.kind {
            PieceKind::SmoothRamp {
                left,
                right,
                left_slope,
                right_slope,
            } => PieceKind::SmoothRamp {
                left,
                right,
                left_slope: left_slope / lambda,
                right_slope: right_slope / lambda,
            },
            other => other,
        };
        Piece {
            lo: self.lo * lambda,
            hi: self.hi * lambda,
            kind,
        }
    }

    /// `∫_{x0}^{x1} piece(r)^β r^k dr` over a sub-range, with an error estimate
    /// (zero for closed forms).
    pub(crate) fn power_moment_between(
        &self,
        beta: f64,
        k: i32,
        x0: f64,
        x1: f64,
    ) -> Result<(f64, f64), ProfileError> {
        if x1 <= x0 || self.is_zero() {
            return Ok((0.0, 0.0));
        }
        if x1.is_infinite() {
            return Err(ProfileError::Divergent { k });
        }
        let kf = k as f64;
        match self.kind {
            PieceKind::Constant { value } | PieceKind::PowerLaw { value, .. } => {
                let exponent = match self.kind {
                    PieceKind::PowerLaw { exponent, .. } => exponent,
                    _ => 0.0,
                };
                // Value at x0 of the (possibly re-anchored) piece, raised to β.
                let v0 = if exponent == 0.0 {
                    value
                } else {
                    value * (self.lo / x0).powf(exponent)
                };
                let v0 = if beta == 1.0 { v0 } else { v0.powf(beta) };
                let e = kf - beta * exponent;
                if x0 > 0.0 {
                    Ok((v0 * x0.powi(k + 1) * pow_integral(e, x1 / x0), 0.0))
                } else if k >= 0 {
                    // Constant pieces only here (power laws need lo > 0); this
                    // branch also covers negative coordinates on [-1, 1].
                    let k1 = k + 1;
                    Ok((v0 * (x1.powi(k1) - x0.powi(k1)) / k1 as f64, 0.0))
                } else {
                    Err(ProfileError::Divergent { k })
                }
            }
            PieceKind::SmoothRamp { .. } => {
                if k < 0 && x0 <= 0.0 && x1 >= 0.0 {
                    return Err(ProfileError::Divergent { k });
                }
                if beta == 1.0 && k >= 0 {
                    let w = self.width();
                    let poly = self.ramp_poly().expect("ramp");
                    let r = Poly::linear(self.lo, w).powi(k as u32);
                    let t0 = (x0 - self.lo) / w;
                    let t1 = (x1 - self.lo) / w;
                    Ok((w * (&poly * &r).integral(t0, t1), 0.0))
                } else {
                    let res = quadrature::integrate_with(
                        |r| self.eval(r).powf(beta) * r.powi(k),
                        x0,
                        x1,
                        &[],
                        FALLBACK_QUAD,
                    )?;
                    Ok((res.value, res.abs_error_estimate))
                }
            }
        }
    }

    pub(crate) fn moment_between(&self, k: i32, x0: f64, x1: f64) -> Result<f64, ProfileError> {
        self.power_moment_between(1.0, k, x0, x1).map(|(v, _)| v)
    }
}
