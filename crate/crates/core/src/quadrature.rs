//! Adaptive one-dimensional quadrature.
//!
//! A globally adaptive Gauss–Kronrod (10/21-point) integrator. Every closed-form
//! integral in the crate is cross-checked against it, and it evaluates the
//! functionals of mollified profiles where the closed forms would be unwieldy.
//!
//! Subintervals never straddle a supplied breakpoint: the integration range is
//! first cut at every breakpoint and each segment is refined independently
//! under one shared error budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::profiles::PiecewiseProfile;

/// Default absolute tolerance.
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
/// Default relative tolerance.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Default cap on the number of live subintervals.
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid integration range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("tolerances must be positive (abs {abs}, rel {rel})")]
    InvalidTolerance { abs: f64, rel: f64 },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("subdivision budget of {budget} intervals exceeded (estimate {value} ± {abs_error_estimate})")]
    BudgetExceeded {
        budget: usize,
        value: f64,
        abs_error_estimate: f64,
    },
}

/// Value, error estimate and work count of one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
}

/// Tolerances and budget for [`integrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadSettings {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

// Kronrod abscissae (positive half, descending) and weights; the odd-indexed
// nodes are the 10-point Gauss nodes. Digits are kept as published.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    // Error is already at the roundoff floor; splitting cannot help.
    at_floor: bool,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment, QuadratureError> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |x: f64| -> Result<f64, QuadratureError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };

    let fc = eval(center)?;
    let mut left = [0.0; 10];
    let mut right = [0.0; 10];
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        left[j] = eval(center - dx)?;
        right[j] = eval(center + dx)?;
        let pair = left[j] + right[j];
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).abs();

    // QUADPACK-style rescaling of the raw difference.
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((left[j] - mean).abs() + (right[j] - mean).abs());
    }
    asc *= half.abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * value.abs();
    let at_floor = round >= error;
    if at_floor {
        error = round;
    }

    Ok(Segment {
        lo,
        hi,
        value,
        error,
        at_floor,
    })
}

/// Integrates `f` over `[lo, hi]`, never letting a subinterval straddle a
/// breakpoint.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult, QuadratureError> {
    integrate_with(
        f,
        lo,
        hi,
        breakpoints,
        QuadSettings::with_tolerances(abs_tol, rel_tol),
    )
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    settings: QuadSettings,
) -> Result<QuadResult, QuadratureError> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(QuadratureError::InvalidRange { lo, hi });
    }
    if !(settings.abs_tol > 0.0 && settings.rel_tol > 0.0) {
        return Err(QuadratureError::InvalidTolerance {
            abs: settings.abs_tol,
            rel: settings.rel_tol,
        });
    }
    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut left = lo;
    for right in cuts.into_iter().chain(std::iter::once(hi)) {
        heap.push(kronrod21(&f, left, right)?);
        left = right;
    }

    let resum = |heap: &BinaryHeap<Segment>| {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let (mut value, mut error) = resum(&heap);
    let mut steps = 0usize;
    loop {
        if error <= settings.abs_tol.max(settings.rel_tol * value.abs()) {
            // Running totals drift; confirm against a fresh sum.
            let (v, e) = resum(&heap);
            if e <= settings.abs_tol.max(settings.rel_tol * v.abs()) {
                return Ok(QuadResult {
                    value: v,
                    abs_error_estimate: e,
                    subdivisions: heap.len(),
                });
            }
            (value, error) = (v, e);
        }
        if heap.len() >= settings.max_subdivisions {
            let (value, abs_error_estimate) = resum(&heap);
            return Err(QuadratureError::BudgetExceeded {
                budget: settings.max_subdivisions,
                value,
                abs_error_estimate,
            });
        }
        if heap.peek().is_some_and(|w| w.at_floor) {
            // Every remaining error is roundoff; this is the attainable limit.
            let (v, e) = resum(&heap);
            return Ok(QuadResult {
                value: v,
                abs_error_estimate: e,
                subdivisions: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval cannot be split further in double precision.
            return Err(QuadratureError::BudgetExceeded {
                budget: heap.len() + 1,
                value,
                abs_error_estimate: error,
            });
        }
        let left = kronrod21(&f, worst.lo, mid)?;
        let right = kronrod21(&f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        steps += 1;
        if steps.is_multiple_of(256) {
            (value, error) = resum(&heap);
        }
    }
}

/// `∫ g(q) q (∫₀^q g(q') q'² dq') dq` for a compactly supported profile.
///
/// The inner cumulative mass comes from the exact piecewise antiderivative and
/// the outer integral from [`integrate`].
pub fn nested_mass_integral(eta: &PiecewiseProfile) -> Result<QuadResult, QuadratureError> {
    nested_integral(eta, eta, QuadSettings::default())
}

/// The bilinear form `∫ outer(q) q (∫₀^q inner(q') q'² dq') dq`.
pub fn nested_integral(
    outer: &PiecewiseProfile,
    inner: &PiecewiseProfile,
    settings: QuadSettings,
) -> Result<QuadResult, QuadratureError> {
    let hi = outer.support_end();
    if hi == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let mut breaks = outer.breakpoints();
    breaks.extend(inner.breakpoints());
    integrate_with(
        |q| outer.eval(q) * q * inner.cumulative_mass(q),
        0.0,
        hi,
        &breaks,
        settings,
    )
}
