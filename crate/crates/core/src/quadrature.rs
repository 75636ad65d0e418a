//! Certified line integrals for the dispersion analysis.
//!
//! Everything in this crate that looks like `∫ g(v) dv` ultimately lands in
//! [`integrate_line`]: a globally adaptive Gauss–Kronrod 7–15 scheme with a
//! hard subdivision budget and an error estimate that is *added to*, never
//! replaced by, analytic tail bounds supplied by the caller.  On top of the
//! raw engine sit the three kernel integrals the stability theory needs:
//!
//! * [`cauchy_integral`] — `∫ φ(v)/(v−z) dv` for `Im z ≠ 0`,
//! * [`pv_cauchy`] — the principal value `p.v.∫ φ(v)/(v−s) dv` on the line,
//! * [`plemelj_boundary`] — the one-sided boundary values
//!   `1 − p.v.∫ ψ/(v−s) dv ∓ iπ ψ(s)` with `ψ = φ/k²`.
//!
//! All routines are deterministic: the same inputs produce bit-identical
//! results, panel for panel.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profiles::VelocityProfile;

/// Hard cap on the number of panels a single adaptive integration may create.
pub const PANEL_BUDGET: usize = 1 << 16;

/// Radius of the symmetric window used by the principal-value scheme.
const PV_WINDOW: f64 = 1.0;

/// Half-width of the analytic core `[s−ε, s+ε]` inside the window, where the
/// subtracted integrand is replaced by its Taylor value `2ε φ'(s)`.
const PV_CORE: f64 = 1e-6;

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    /// Estimate of the integral.
    pub value: Complex64,
    /// Certified absolute error estimate (quadrature estimate plus any
    /// analytic tail bounds folded in by the caller-facing wrappers).
    pub abs_err: f64,
    /// Number of panel subdivisions performed.
    pub subdivisions: usize,
}

// 15-point Kronrod abscissae on [-1, 1] (positive half; the rule is
// symmetric) with the embedded 7-point Gauss rule.  Standard constants.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// QUADPACK-style error rescaling: sharpen the raw `|K15 − G7|` difference
/// using the panel's total variation, and floor it at the roundoff level.
fn rescale_error(err: f64, result_abs: f64, result_asc: f64) -> f64 {
    let mut err = err.abs();
    if result_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / result_asc).powf(1.5);
        err = if scale < 1.0 { result_asc * scale } else { result_asc };
    }
    let min_err = 50.0 * f64::EPSILON * result_abs;
    err.max(min_err)
}

/// One Gauss–Kronrod 7–15 evaluation over `[a, b]`.
fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut res_abs = WGK[7] * f_center.norm();

    let mut values = [Complex64::new(0.0, 0.0); 15];
    values[7] = f_center;

    for j in 0..7 {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        values[j] = lo;
        values[14 - j] = hi;
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.norm() + hi.norm());
        // Odd indices of XGK are the embedded Gauss nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).norm();
    for j in 0..7 {
        res_asc += WGK[j] * ((values[j] - mean).norm() + (values[14 - j] - mean).norm());
    }

    let value = kronrod * half;
    let raw_err = ((kronrod - gauss) * half).norm();
    let err = rescale_error(raw_err, res_abs * half.abs(), res_asc * half.abs());
    (value, err, res_abs * half.abs())
}

/// A panel in the adaptive subdivision, ordered for the worst-first heap.
#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    res_abs: f64,
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.seq == other.seq
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on error; earlier panels win ties so the subdivision
        // order (and therefore every result) is deterministic.
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Globally adaptive integration over the segments between `breakpoints`.
///
/// Stops when `Σ err ≤ max(abs_tol, rel_tol·|Σ value|)` or when the error is
/// provably roundoff-limited; errors out with the worst remaining panel when
/// the panel budget is exhausted.
pub(crate) fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    op: &'static str,
) -> Result<QuadratureResult> {
    let mut heap: BinaryHeap<Panel> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut panels: usize = 0;

    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, err, res_abs) = gk15(f, a, b);
        heap.push(Panel {
            a,
            b,
            value,
            err,
            res_abs,
            seq,
        });
        seq += 1;
        panels += 1;
    }
    if heap.is_empty() {
        return Ok(QuadratureResult {
            value: Complex64::new(0.0, 0.0),
            abs_err: 0.0,
            subdivisions: 0,
        });
    }

    let mut subdivisions = 0usize;
    loop {
        let mut total = Complex64::new(0.0, 0.0);
        let mut total_err = 0.0;
        let mut total_abs = 0.0;
        for p in heap.iter() {
            total += p.value;
            total_err += p.err;
            total_abs += p.res_abs;
        }
        let target = abs_tol.max(rel_tol * total.norm());
        let roundoff_floor = 100.0 * f64::EPSILON * total_abs;
        if total_err <= target || total_err <= roundoff_floor {
            return Ok(QuadratureResult {
                value: total,
                abs_err: total_err,
                subdivisions,
            });
        }
        if panels + 1 > PANEL_BUDGET {
            let worst = heap.peek().expect("heap nonempty");
            return Err(Error::QuadratureNonConvergent {
                op,
                abs_err: total_err,
                panel_lo: worst.a,
                panel_hi: worst.b,
                panels,
            });
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Panel too narrow to split: roundoff-limited on this feature.
            let mut result = QuadratureResult {
                value: worst.value,
                abs_err: worst.err,
                subdivisions,
            };
            for p in heap.iter() {
                result.value += p.value;
                result.abs_err += p.err;
            }
            return Ok(result);
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err, res_abs) = gk15(f, a, b);
            heap.push(Panel {
                a,
                b,
                value,
                err,
                res_abs,
                seq,
            });
            seq += 1;
        }
        panels += 1;
        subdivisions += 1;
    }
}

/// Integrate a complex-valued `g` over the finite interval `support`,
/// subdividing adaptively until the error estimate drops below `tol`.
pub fn integrate_line<F: Fn(f64) -> Complex64>(
    g: F,
    support: (f64, f64),
    tol: f64,
) -> Result<QuadratureResult> {
    integrate_line_with_breakpoints(g, support, &[], tol)
}

/// Same as [`integrate_line`] but with caller-supplied interior breakpoints
/// (kinks, near-singular abscissae) seeded as initial panel boundaries.
pub fn integrate_line_with_breakpoints<F: Fn(f64) -> Complex64>(
    g: F,
    support: (f64, f64),
    interior: &[f64],
    tol: f64,
) -> Result<QuadratureResult> {
    let (lo, hi) = support;
    if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(
            "integrate_line",
            "support",
            format!("expected a finite interval, got [{lo}, {hi}]"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "integrate_line",
            "tol",
            format!("tolerance must be positive, got {tol}"),
        ));
    }
    let bps = assemble_breakpoints(lo, hi, interior, 16);
    adaptive(&g, &bps, tol, 0.0, "integrate_line")
}

/// Sorted, deduplicated panel boundaries: `lo`, `hi`, the clipped interior
/// points, and enough uniform fill to guarantee at least `min_panels` initial
/// panels (so a narrow feature cannot hide inside one giant panel).
fn assemble_breakpoints(lo: f64, hi: f64, interior: &[f64], min_panels: usize) -> Vec<f64> {
    let mut bps: Vec<f64> = Vec::with_capacity(interior.len() + min_panels + 2);
    bps.push(lo);
    bps.push(hi);
    for &x in interior {
        if x > lo && x < hi {
            bps.push(x);
        }
    }
    let n = min_panels.max(1);
    for j in 1..n {
        bps.push(lo + (hi - lo) * (j as f64) / (n as f64));
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    bps
}

/// Geometrically graded breakpoints accumulating toward `center` with the
/// innermost spacing `scale`; used to resolve near-singular kernels.
fn graded_breakpoints(center: f64, scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    let span = hi - lo;
    if span <= 0.0 {
        return pts;
    }
    let mut r = scale.max(1e-300);
    // Cover from the innermost scale out to the full span, doubling.
    while r < 2.0 * span {
        for x in [center - r, center + r] {
            if x > lo && x < hi {
                pts.push(x);
            }
        }
        r *= 2.0;
    }
    if center > lo && center < hi {
        pts.push(center);
    }
    pts
}

/// `∫ phi(v) (v−z)^{−m} dv` over a finite interval for a raw real-valued
/// integrand, with panels graded toward `Re z`.  Requires `Im z ≠ 0`.
pub(crate) fn cauchy_line_pow<F: Fn(f64) -> f64>(
    phi: F,
    interval: (f64, f64),
    z: Complex64,
    m: i32,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    let (lo, hi) = interval;
    if z.im == 0.0 {
        return Err(Error::invalid(
            "cauchy_integral",
            "z",
            "Im z must be nonzero; use the principal-value routine on the real line",
        ));
    }
    let integrand = move |v: f64| {
        let d = Complex64::new(v - z.re, -z.im);
        Complex64::new(phi(v), 0.0) / d.powi(m)
    };
    let mut interior = graded_breakpoints(z.re, z.im.abs(), lo, hi);
    interior.extend(assemble_breakpoints(lo, hi, &[], 16));
    let bps = assemble_breakpoints(lo, hi, &interior, 16);
    adaptive(&integrand, &bps, abs_tol, rel_tol, "cauchy_integral")
}

/// Certified `∫ φ(v)/(v−z) dv` for a velocity profile, `Im z ≠ 0`.
///
/// The integration domain is the profile support extended so that every
/// unvisited point lies at distance ≥ 1 from `z`; the profile's analytic
/// tail bound beyond that domain is added to `abs_err`.
pub fn cauchy_integral(p: &VelocityProfile, z: Complex64) -> Result<QuadratureResult> {
    cauchy_integral_pow(p, z, 1)
}

/// As [`cauchy_integral`] with kernel `(v−z)^{−m}`; `m = 2` backs the
/// analytic Newton derivative of the dispersion function.
pub fn cauchy_integral_pow(p: &VelocityProfile, z: Complex64, m: i32) -> Result<QuadratureResult> {
    if !(m >= 1 && m <= 3) {
        return Err(Error::invalid(
            "cauchy_integral",
            "m",
            format!("kernel power must be 1, 2 or 3, got {m}"),
        ));
    }
    let (v_lo, v_hi) = p.support();
    let lo = v_lo.min(z.re - 1.0);
    let hi = v_hi.max(z.re + 1.0);
    let mut result = cauchy_line_pow(|v| p.phi(v), (lo, hi), z, m, 1e-13, 1e-11)?;
    // Outside [lo, hi] every point is at distance ≥ 1 from z, so the
    // neglected mass is bounded by the |φ| tail mass itself.
    result.abs_err += p.tail_weighted_bound(lo, hi, 0);
    Ok(result)
}

/// Principal value `p.v.∫ f(v)/(v−s) dv` for a raw integrand.
///
/// Scheme: on the symmetric window `[s−1, s+1]` integrate the subtracted
/// integrand `(f(v)−f(s))/(v−s)` (the log term vanishes by symmetry), with
/// the core `|v−s| < ε` replaced by its Taylor value `2ε f'(s)`; outside the
/// window integrate the raw kernel.  `f_s` and `f1_s` are `f(s)`, `f'(s)`.
pub fn pv_line<F: Fn(f64) -> f64>(
    f: F,
    interval: (f64, f64),
    s: f64,
    f_s: f64,
    f1_s: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    let (lo, hi) = interval;
    if !s.is_finite() {
        return Err(Error::invalid("pv_cauchy", "s", "s must be finite"));
    }

    // Window part: subtracted integrand over [s−1, s−ε] ∪ [s+ε, s+1].
    let subtracted = |v: f64| Complex64::new((f(v) - f_s) / (v - s), 0.0);
    let left = adaptive(
        &subtracted,
        &assemble_breakpoints(s - PV_WINDOW, s - PV_CORE, &[], 8),
        0.5 * abs_tol,
        0.5 * rel_tol,
        "pv_cauchy",
    )?;
    let right = adaptive(
        &subtracted,
        &assemble_breakpoints(s + PV_CORE, s + PV_WINDOW, &[], 8),
        0.5 * abs_tol,
        0.5 * rel_tol,
        "pv_cauchy",
    )?;
    // Analytic core: ∫_{|δ|<ε} (f(s+δ)−f(s))/δ dδ = 2ε f'(s) + O(ε³).
    let core = 2.0 * PV_CORE * f1_s;
    let core_err = PV_CORE * PV_CORE * (1.0 + f1_s.abs()) * 1e-3;

    // Complement: raw kernel where |v−s| ≥ 1, on the pieces of [lo, hi]
    // outside the window.
    let mut value = left.value.re + right.value.re + core;
    let mut abs_err = left.abs_err + right.abs_err + core_err;
    let mut subdivisions = left.subdivisions + right.subdivisions;

    let kernel = |v: f64| Complex64::new(f(v) / (v - s), 0.0);
    if lo < s - PV_WINDOW {
        let piece = adaptive(
            &kernel,
            &assemble_breakpoints(lo, s - PV_WINDOW, &graded_breakpoints(s, 1.0, lo, s - PV_WINDOW), 8),
            0.5 * abs_tol,
            0.5 * rel_tol,
            "pv_cauchy",
        )?;
        value += piece.value.re;
        abs_err += piece.abs_err;
        subdivisions += piece.subdivisions;
    }
    if hi > s + PV_WINDOW {
        let piece = adaptive(
            &kernel,
            &assemble_breakpoints(s + PV_WINDOW, hi, &graded_breakpoints(s, 1.0, s + PV_WINDOW, hi), 8),
            0.5 * abs_tol,
            0.5 * rel_tol,
            "pv_cauchy",
        )?;
        value += piece.value.re;
        abs_err += piece.abs_err;
        subdivisions += piece.subdivisions;
    }

    Ok(QuadratureResult {
        value: Complex64::new(value, 0.0),
        abs_err,
        subdivisions,
    })
}

/// Certified principal value `p.v.∫ φ(v)/(v−s) dv` for a velocity profile.
pub fn pv_cauchy(p: &VelocityProfile, s: f64) -> Result<f64> {
    let (v_lo, v_hi) = p.support();
    // Integrate over the support extended past the window so that every
    // unvisited point has |v−s| ≥ 1.
    let lo = v_lo.min(s - PV_WINDOW);
    let hi = v_hi.max(s + PV_WINDOW);
    let mut result = pv_line(
        |v| p.phi(v),
        (lo, hi),
        s,
        p.phi(s),
        p.phi1(s),
        1e-12,
        1e-10,
    )?;
    result.abs_err += p.tail_weighted_bound(lo, hi, 0);
    let scale = 1e-9 * (1.0 + result.value.re.abs());
    if result.abs_err > scale {
        return Err(Error::QuadratureNonConvergent {
            op: "pv_cauchy",
            abs_err: result.abs_err,
            panel_lo: lo,
            panel_hi: hi,
            panels: result.subdivisions,
        });
    }
    Ok(result.value.re)
}

/// Which side of the real axis a boundary value is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from the upper half-plane, `s + i0`.
    Plus,
    /// Limit from the lower half-plane, `s − i0`.
    Minus,
}

/// One-sided boundary values of `w(z) = 1 − ∫ ψ(v)/(v−z) dv`, `ψ = φ/k²`:
///
/// `w(s ± i0) = 1 − p.v.∫ ψ/(v−s) dv ∓ iπ ψ(s)`.
pub fn plemelj_boundary(p: &VelocityProfile, k: f64, s: f64, side: Side) -> Result<Complex64> {
    if k == 0.0 {
        return Err(Error::invalid(
            "plemelj_boundary",
            "k",
            "wave number must be nonzero",
        ));
    }
    let pv = pv_cauchy(p, s)?;
    let k2 = k * k;
    let jump = std::f64::consts::PI * p.phi(s) / k2;
    let re = 1.0 - pv / k2;
    let im = match side {
        Side::Plus => -jump,
        Side::Minus => jump,
    };
    Ok(Complex64::new(re, im))
}
