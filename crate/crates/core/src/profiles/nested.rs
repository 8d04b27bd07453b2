//! Closed-form evaluation of the nested radial integral behind the potential
//! energy, `∫ g(q) q (∫₀^q h(q') q'² dq') dq`.

use super::piece::{pow_integral, Piece, PieceKind, FALLBACK_QUAD};
use super::{PiecewiseProfile, ProfileError};
use crate::poly::Poly;
use crate::quadrature;

/// `∫₁^ρ u^a (∫₁^u v^b dv) du`.
fn double_power_integral(a: f64, b: f64, rho: f64) -> f64 {
    if b == -1.0 {
        let ln_rho = rho.ln();
        if a == -1.0 {
            0.5 * ln_rho * ln_rho
        } else {
            let e = a + 1.0;
            (rho.powf(e) * ln_rho - pow_integral(a, rho)) / e
        }
    } else {
        (pow_integral(a + b + 1.0, rho) - pow_integral(a, rho)) / (b + 1.0)
    }
}

fn power_exponent(p: &Piece) -> Option<f64> {
    match p.kind {
        PieceKind::Constant { .. } => Some(0.0),
        PieceKind::PowerLaw { exponent, .. } => Some(exponent),
        PieceKind::SmoothRamp { .. } => None,
    }
}

fn local_poly(p: &Piece) -> Option<Poly> {
    match p.kind {
        PieceKind::Constant { value } => Some(Poly::constant(value)),
        PieceKind::SmoothRamp { .. } => p.ramp_poly(),
        PieceKind::PowerLaw { .. } => None,
    }
}

/// `∫_{x0}^{x1} g(q) q ∫_{x0}^{q} h(r) r² dr dq` for pieces already restricted
/// to `[x0, x1)`.
fn local_double(g: &Piece, h: &Piece) -> Result<f64, ProfileError> {
    let (x0, x1) = (g.lo, g.hi);
    if g.is_zero() || h.is_zero() {
        return Ok(0.0);
    }
    if let (Some(ng), Some(nh)) = (power_exponent(g), power_exponent(h)) {
        let (gv, hv) = (g.eval(x0), h.eval(x0));
        if x0 > 0.0 {
            let rho = x1 / x0;
            return Ok(gv * hv * x0.powi(5) * double_power_integral(1.0 - ng, 2.0 - nh, rho));
        }
        // Only constants can touch the origin.
        return Ok(gv * hv * x1.powi(5) / 15.0);
    }
    if let (Some(gp), Some(hp)) = (local_poly(g), local_poly(h)) {
        let w = x1 - x0;
        let r = Poly::linear(x0, w);
        let inner = (&hp * &(&r * &r)).antiderivative().scale(w);
        let outer = &(&gp * &r) * &inner;
        return Ok(w * outer.integral(0.0, 1.0));
    }
    // Ramp against a power law: inner integral exact, outer numerical.
    let res = quadrature::integrate_with(
        |q| {
            let inner = h.moment_between(2, x0, q).unwrap_or(f64::NAN);
            g.eval(q) * q * inner
        },
        x0,
        x1,
        &[],
        FALLBACK_QUAD,
    )?;
    Ok(res.value)
}

/// Exact `∫₀^∞ outer(q) q (∫₀^q inner(q') q'² dq') dq`.
///
/// With `outer = inner = η` this is the double integral whose ratio to
/// `‖η q²‖₁²` is minus the potential energy. The form is bilinear, which the
/// core-halo solver uses to expand the energy as a quadratic in the halo
/// amplitude.
pub fn nested_moment(outer: &PiecewiseProfile, inner: &PiecewiseProfile) -> Result<f64, ProfileError> {
    let end = outer.support_end();
    if end == 0.0 || inner.support_end() == 0.0 {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = outer
        .breakpoints()
        .into_iter()
        .chain(inner.breakpoints())
        .filter(|b| *b < end)
        .collect();
    cuts.push(0.0);
    cuts.push(end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut total = 0.0;
    let mut enclosed = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let g = outer.pieces()[outer.piece_index(x0)].restricted(x0, x1);
        let h = inner.pieces()[inner.piece_index(x0)].restricted(x0, x1);
        if !g.is_zero() {
            total += enclosed * g.moment_between(1, x0, x1)? + local_double(&g, &h)?;
        }
        enclosed += h.moment_between(2, x0, x1)?;
    }
    Ok(total)
}
