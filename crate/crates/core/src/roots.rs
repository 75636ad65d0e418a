//! Locating growing modes with the argument principle.
//!
//! The number of zeros of the dispersion function inside a closed contour is
//! the winding number of its image about the origin.  Two contour families
//! are supported:
//!
//! * a **semicircle** in the half-plane variable `z = iλ/k`: the diameter
//!   runs a hair above the real line (so stable profiles whose boundary
//!   values graze the origin stay countable) and the arc closes through the
//!   upper half-plane, so the count covers *every* growing mode once the
//!   radius is large enough — the far field satisfies `|w − 1| < 1/2`,
//!   which is verified on the fly;
//! * a **rectangle** in the spectral variable `λ`, kept at least `10⁻⁴` away
//!   from the imaginary axis, used both for user queries and for the
//!   quadrisection search.
//!
//! `find_roots` refines a rectangle by quadrisection, conserving the winding
//! count at every split, until each box holds a single zero, then polishes
//! with Newton's method using the analytic derivative and certifies the
//! result with a tiny re-winding.  `growth_curve` walks a `k` grid and uses
//! the previous root as a Newton seed, falling back to the certified search
//! whenever continuation fails.

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::{delta, delta_deriv, NEAR_AXIS_MIN};
use crate::error::{Error, Result};
use crate::penrose::instability_index;
use crate::profiles::{moment, Moment, VelocityProfile};
use crate::quadrature::cauchy_line_pow;

/// Minimum number of initial contour samples accepted from callers.
pub const MIN_SAMPLES: usize = 256;
/// Rectangles must keep this margin away from the imaginary axis.
pub const AXIS_MARGIN: f64 = 1e-4;
/// An image point this close to the origin aborts the winding computation.
const ROOT_ON_CONTOUR_TOL: f64 = 1e-8;
/// Phase-tracking recursion limit.
const MAX_PHASE_DEPTH: u32 = 48;
/// Hard cap on contour evaluations per winding computation.
const EVAL_BUDGET: usize = 1 << 17;
/// Initial samples for the internal quadrisection rectangles.
const INTERNAL_SAMPLES: usize = 128;
/// Side length of the certification square around a polished root.
const CERT_BOX_SIDE: f64 = 1e-4;
/// Quadrisection stops once a unit-winding box is this small.
const ISOLATION_DIAMETER: f64 = 1e-3;
/// Roots with `Re λ` below this are flagged as near-marginal.
const NEAR_MARGINAL_SIGMA: f64 = 1e-3;

/// Supported contour families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourShape {
    /// Diameter along the real line plus an upper-half-plane arc, in the
    /// half-plane variable `z = iλ/k`.
    SemicircleHalfplane,
    /// Axis-aligned rectangle in the spectral variable `λ`.
    Rectangle,
}

/// A closed contour for winding-number queries.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContourSpec {
    pub shape: ContourShape,
    /// Semicircle radius (ignored for rectangles).
    pub radius: f64,
    /// Rectangle corners, lower-left and upper-right (ignored for semicircles).
    pub corners: (Complex64, Complex64),
    /// Initial sample count; values below [`MIN_SAMPLES`] are raised to it.
    pub samples: usize,
}

impl ContourSpec {
    /// Semicircle of the given radius in the half-plane variable.
    pub fn semicircle(radius: f64) -> Self {
        ContourSpec {
            shape: ContourShape::SemicircleHalfplane,
            radius,
            corners: (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            samples: MIN_SAMPLES,
        }
    }

    /// Rectangle with the given lower-left and upper-right corners.
    pub fn rectangle(lower_left: Complex64, upper_right: Complex64) -> Self {
        ContourSpec {
            shape: ContourShape::Rectangle,
            radius: 0.0,
            corners: (lower_left, upper_right),
            samples: MIN_SAMPLES,
        }
    }

    /// Override the initial sample count (still clamped to [`MIN_SAMPLES`]).
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

/// A certified zero of the dispersion function.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootCertificate {
    /// The polished root in the spectral variable.
    pub lambda: Complex64,
    /// `|Δ(k, λ)|` after polishing.
    pub residual: f64,
    /// Winding number of the certification box around the root (1).
    pub box_winding: i64,
    /// Newton iterations spent polishing.
    pub newton_iters: u32,
    /// Set when the root sits within `10⁻³` of the imaginary axis, where the
    /// axis margin forces the certification box to be the isolation box.
    pub near_marginal: bool,
}

/// Axis-aligned search region in the right half of the spectral plane.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootRegion {
    /// `(Re λ)` bounds, both ≥ [`AXIS_MARGIN`].
    pub re: (f64, f64),
    /// `(Im λ)` bounds.
    pub im: (f64, f64),
}

/// One sample of a growth-rate curve.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthPoint {
    pub k: f64,
    /// The sign-based mode count at this `k`.
    pub index: usize,
    /// The dominant (largest `Re λ`) certified root, absent when stable.
    pub root: Option<RootCertificate>,
}

// ---------------------------------------------------------------------------
// Phase tracking
// ---------------------------------------------------------------------------

/// Adaptive argument-principle accumulator.  Walks the closed contour image,
/// refining any step whose phase increment reaches `π/2` and watching for
/// roots sitting on the contour itself.
struct PhaseWalker<'a> {
    eval: &'a mut dyn FnMut(f64) -> Result<Complex64>,
    evals: usize,
}

impl PhaseWalker<'_> {
    fn value(&mut self, t: f64) -> Result<Complex64> {
        if self.evals >= EVAL_BUDGET {
            return Err(Error::internal(format!(
                "contour evaluation budget {EVAL_BUDGET} exhausted near t = {t}"
            )));
        }
        self.evals += 1;
        let w = (self.eval)(t)?;
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::internal(format!(
                "contour image is not finite at t = {t}"
            )));
        }
        if w.norm() < ROOT_ON_CONTOUR_TOL {
            return Err(Error::RootOnContour { t, w_abs: w.norm() });
        }
        Ok(w)
    }

    fn leg(&mut self, t0: f64, w0: Complex64, t1: f64, w1: Complex64, depth: u32) -> Result<f64> {
        let dtheta = (w1 / w0).arg();
        if dtheta.abs() < std::f64::consts::FRAC_PI_2 {
            return Ok(dtheta);
        }
        if depth >= MAX_PHASE_DEPTH {
            return Err(Error::ContourTooCoarse {
                t: t0,
                step: dtheta.abs(),
            });
        }
        let tm = 0.5 * (t0 + t1);
        let wm = self.value(tm)?;
        Ok(self.leg(t0, w0, tm, wm, depth + 1)? + self.leg(tm, wm, t1, w1, depth + 1)?)
    }
}

/// Uniformly spaced contour parameters on `[0, 1)`.
fn uniform_ts(samples: usize) -> Vec<f64> {
    let n = samples.max(8);
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// Sort, deduplicate and clamp a parameter set to `[0, 1)`.
fn finish_ts(mut ts: Vec<f64>) -> Vec<f64> {
    ts.retain(|t| t.is_finite() && *t >= 0.0 && *t < 1.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y) < 1e-12);
    ts
}

/// Winding number of `t ↦ eval(t)` (a closed loop on `t ∈ [0, 1)`) about 0,
/// walked through the sorted parameters `ts` (which must start at 0).
fn contour_winding(
    eval: &mut dyn FnMut(f64) -> Result<Complex64>,
    ts: &[f64],
) -> Result<i64> {
    debug_assert!(!ts.is_empty() && ts[0] == 0.0);
    let n = ts.len();
    let mut walker = PhaseWalker { eval, evals: 0 };
    let mut ws = Vec::with_capacity(n);
    for &t in ts {
        ws.push(walker.value(t)?);
    }
    let mut total = 0.0;
    for i in 0..n {
        let (t1, w1) = if i + 1 == n {
            (1.0, ws[0])
        } else {
            (ts[i + 1], ws[i + 1])
        };
        total += walker.leg(ts[i], ws[i], t1, w1, 0)?;
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > 1e-3 {
        return Err(Error::internal(format!(
            "accumulated phase {total:.6} is not an integer number of turns"
        )));
    }
    Ok(rounded as i64)
}

// ---------------------------------------------------------------------------
// Contour evaluation
// ---------------------------------------------------------------------------

/// Relative height of the semicircle's diameter above the real axis.
///
/// Where the density is numerically zero but the oscillation resonance
/// `1 − p.v.∫φ/(v−s)/k²` crosses zero — a Gaussian tail near `s = ±1/k` at
/// small `k`, say — the exact boundary value `w(s + i0)` passes within an
/// underflowed distance of the origin and the winding of the on-axis walk
/// becomes numerically undefined.  Running the diameter at `Im z = 10⁻⁷ r`
/// instead keeps `|w|` bounded below by roughly `2k · 10⁻⁷ r` there while
/// excluding only modes with growth rate below `10⁻⁷ k r`, far inside the
/// axis margin every root search already keeps.
const DIAMETER_LIFT_REL: f64 = 1e-7;

/// `w(z)` off the real axis at reduced accuracy, for contour evaluation.
fn halfplane_w_fast(p: &VelocityProfile, k: f64, z: Complex64) -> Result<Complex64> {
    let (v_lo, v_hi) = p.support();
    let lo = v_lo.min(z.re - 1.0);
    let hi = v_hi.max(z.re + 1.0);
    let mut c = cauchy_line_pow(|v| p.phi(v), (lo, hi), z, 1, 1e-9, 1e-7)?;
    c.abs_err += p.tail_weighted_bound(lo, hi, 0);
    Ok(Complex64::new(1.0, 0.0) - c.value / (k * k))
}

/// Local variation scale of the image field at the half-plane point `z`:
/// half its distance to the support interval, floored at an eighth of the
/// characteristic hump width.  Contour legs hugging the real line trace the
/// full resonance loops of the image curve, which turn on exactly the
/// profile's feature scale; initial samples spaced below that scale can
/// never hide a whole loop from the phase tracker, while samples far from
/// the support may legitimately stride in proportion to their distance.
fn z_scale(p: &VelocityProfile, z: Complex64) -> f64 {
    let (v_lo, v_hi) = p.support();
    let lateral = (v_lo - z.re).max(z.re - v_hi).max(0.0);
    0.5 * lateral.hypot(z.im).max(p.width() / 8.0)
}

/// Contour parameters for a spectral rectangle: a uniform baseline grid
/// joined with per-edge walks whose λ-steps stay below `|k|` times the local
/// half-plane variation scale, so near-axis edges crossing the support are
/// sampled densely enough to expose every resonance loop.
fn rect_ts(p: &VelocityProfile, k: f64, a: Complex64, b: Complex64, samples: usize) -> Vec<f64> {
    const EDGE_CAP: usize = 4096;
    let mut ts = uniform_ts(samples);
    let corners = [
        Complex64::new(a.re, a.im),
        Complex64::new(b.re, a.im),
        Complex64::new(b.re, b.im),
        Complex64::new(a.re, b.im),
    ];
    for e in 0..4 {
        let from = corners[e];
        let to = corners[(e + 1) % 4];
        let len = (to - from).norm();
        if !(len > 0.0) {
            continue;
        }
        let dir = (to - from) / len;
        let mut u = 0.0;
        for _ in 0..EDGE_CAP {
            if u >= len {
                break;
            }
            ts.push(0.25 * (e as f64 + u / len));
            let z = Complex64::new(0.0, 1.0) * (from + dir * u) / k;
            u += (k.abs() * z_scale(p, z)).max(len / EDGE_CAP as f64);
        }
    }
    finish_ts(ts)
}

/// Contour parameters for the half-plane semicircle: a uniform baseline
/// joined with a diameter walk stepped at the local variation scale and an
/// arc walk stepped at the matching angular scale.
fn semicircle_ts(p: &VelocityProfile, r: f64, samples: usize) -> Vec<f64> {
    const LEG_CAP: usize = 8192;
    let mut ts = uniform_ts(samples);
    // Diameter t ∈ [0, 1/2]: z = r·(4t − 1).
    let mut s = -r;
    for _ in 0..LEG_CAP {
        if s >= r {
            break;
        }
        ts.push(0.25 * (s / r + 1.0));
        s += z_scale(p, Complex64::new(s, 0.0)).max(2.0 * r / LEG_CAP as f64);
    }
    // Arc t ∈ (1/2, 1]: z = r·e^{iθ} with θ = 2π(t − 1/2), so |dz| = r·dθ.
    let mut theta = 0.0;
    for _ in 0..LEG_CAP {
        if theta >= std::f64::consts::PI {
            break;
        }
        ts.push(0.5 + theta / (2.0 * std::f64::consts::PI));
        let z = Complex64::new(r * theta.cos(), r * theta.sin());
        theta += (z_scale(p, z) / r).max(std::f64::consts::PI / LEG_CAP as f64);
    }
    finish_ts(ts)
}

/// A semicircle radius guaranteed large enough that `|w − 1| < 2/5` on the
/// arc: every point of the arc is further from the support than
/// `2.5 ∫|φ| / k²`.
pub fn sufficient_radius(p: &VelocityProfile, k: f64) -> Result<f64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "sufficient_radius",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    let (v_lo, v_hi) = p.support();
    let vmax = v_lo.abs().max(v_hi.abs());
    let m0 = moment(p, Moment::IntAbsPhi)?;
    Ok(vmax + 1.0 + 2.5 * m0 / (k * k))
}

fn validate_rectangle(lower_left: Complex64, upper_right: Complex64) -> Result<()> {
    let (a, b) = (lower_left, upper_right);
    if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
        return Err(Error::ContourInvalid {
            message: "rectangle corners must be finite".into(),
        });
    }
    if !(a.re < b.re && a.im < b.im) {
        return Err(Error::ContourInvalid {
            message: format!(
                "corners must be ordered lower-left then upper-right, got {a} and {b}"
            ),
        });
    }
    let right_half = a.re >= AXIS_MARGIN;
    let left_half = b.re <= -AXIS_MARGIN;
    if !(right_half || left_half) {
        return Err(Error::ContourInvalid {
            message: format!(
                "rectangle [{}, {}] × [{}, {}] must keep a margin of {AXIS_MARGIN} \
                 away from the imaginary axis",
                a.re, b.re, a.im, b.im
            ),
        });
    }
    Ok(())
}

/// Point of a rectangle perimeter, counterclockwise from the lower-left
/// corner, parametrised by `t ∈ [0, 1)`.
fn rect_point(a: Complex64, b: Complex64, t: f64) -> Complex64 {
    let u = 4.0 * t;
    if u < 1.0 {
        Complex64::new(a.re + (b.re - a.re) * u, a.im)
    } else if u < 2.0 {
        Complex64::new(b.re, a.im + (b.im - a.im) * (u - 1.0))
    } else if u < 3.0 {
        Complex64::new(b.re - (b.re - a.re) * (u - 2.0), b.im)
    } else {
        Complex64::new(a.re, b.im - (b.im - a.im) * (u - 3.0))
    }
}

/// Winding number of `Δ(k, ·)` around a rectangle in the spectral plane.
///
/// Phase tracking only needs the image to a fraction of a quadrant, so the
/// contour is evaluated through the reduced-accuracy half-plane kernel
/// (`Δ(k, λ) = w(iλ/k)` exactly, for either sign of `k`).
fn rect_winding(
    p: &VelocityProfile,
    k: f64,
    a: Complex64,
    b: Complex64,
    samples: usize,
) -> Result<i64> {
    validate_rectangle(a, b)?;
    let ts = rect_ts(p, k, a, b, samples);
    let mut eval = |t: f64| {
        let z = Complex64::new(0.0, 1.0) * rect_point(a, b, t) / k;
        halfplane_w_fast(p, k, z)
    };
    contour_winding(&mut eval, &ts)
}

/// Number of growing modes enclosed by the contour, by the argument
/// principle.
///
/// Negative `k` is normalised to `|k|` through the reflection `v ↦ −v`,
/// which maps the dispersion function onto the reflected profile's one and
/// preserves every spectral count.
pub fn winding_number(p: &VelocityProfile, k: f64, spec: &ContourSpec) -> Result<i64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "winding_number",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    let reflected;
    let (pp, kk) = if k < 0.0 {
        reflected = p.reflected();
        (&reflected, -k)
    } else {
        (p, k)
    };
    let samples = spec.samples.max(MIN_SAMPLES);
    match spec.shape {
        ContourShape::SemicircleHalfplane => {
            let r = spec.radius;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::ContourInvalid {
                    message: format!("semicircle radius must be positive and finite, got {r}"),
                });
            }
            let lift = DIAMETER_LIFT_REL * r;
            let mut eval = |t: f64| -> Result<Complex64> {
                if t <= 0.5 {
                    // Diameter, left to right: s ∈ [−r, r], lifted a hair
                    // into the half-plane (see [`DIAMETER_LIFT_REL`]).
                    halfplane_w_fast(pp, kk, Complex64::new(r * (4.0 * t - 1.0), lift))
                } else {
                    // Arc through the upper half-plane.
                    let theta = 2.0 * std::f64::consts::PI * (t - 0.5);
                    let z = Complex64::new(r * theta.cos(), r * theta.sin());
                    let w = halfplane_w_fast(pp, kk, z)?;
                    if (w - Complex64::new(1.0, 0.0)).norm() >= 0.5 {
                        return Err(Error::ContourInvalid {
                            message: format!(
                                "radius {r} too small: |w − 1| = {:.3} ≥ 1/2 on the arc \
                                 at angle {theta:.4}",
                                (w - Complex64::new(1.0, 0.0)).norm()
                            ),
                        });
                    }
                    Ok(w)
                }
            };
            let ts = semicircle_ts(pp, r, samples);
            contour_winding(&mut eval, &ts)
        }
        ContourShape::Rectangle => rect_winding(pp, kk, spec.corners.0, spec.corners.1, samples),
    }
}

// ---------------------------------------------------------------------------
// Certified root search
// ---------------------------------------------------------------------------

/// A default search region guaranteed to contain every growing mode: the
/// spectrum-free zone bounds `Re λ ≤ √(∫|v||φ|)`, and the far-field estimate
/// bounds `|λ| ≤ |k|(v_max + 1 + 2.5∫|φ|/k²)`.
pub fn default_root_region(p: &VelocityProfile, k: f64) -> Result<RootRegion> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "default_root_region",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    let c = moment(p, Moment::IntAbsVAbsPhi)?;
    let radius = k.abs() * sufficient_radius(p, k)?;
    let re_hi = (c.sqrt().min(radius) + 1e-3) * 1.05;
    let im_hi = (radius + 1e-3) * 1.05;
    Ok(RootRegion {
        re: (AXIS_MARGIN, re_hi),
        im: (-im_hi, im_hi),
    })
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn corners(&self) -> (Complex64, Complex64) {
        (Complex64::new(self.x0, self.y0), Complex64::new(self.x1, self.y1))
    }
    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
    fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }
    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.x0 - slack
            && z.re <= self.x1 + slack
            && z.im >= self.y0 - slack
            && z.im <= self.y1 + slack
    }
}

/// Newton refinement with residual-monotone backtracking.  Returns the
/// polished point, its residual and the iteration count.
fn newton_polish(
    p: &VelocityProfile,
    k: f64,
    seed: Complex64,
    max_iters: u32,
) -> Result<(Complex64, f64, u32)> {
    let mut lambda = seed;
    let mut residual = f64::INFINITY;
    for iter in 0..max_iters {
        let d = delta(p, k, lambda)?;
        let dd = delta_deriv(p, k, lambda)?;
        residual = d.norm();
        // The relative target, tightened so a success always satisfies the
        // certificate's absolute bound as well.
        if residual < (1e-12 * (1.0 + dd.norm())).min(1e-10) {
            return Ok((lambda, residual, iter));
        }
        if dd.norm() == 0.0 {
            break;
        }
        let mut step = d / dd;
        let mut accepted = false;
        for _ in 0..8 {
            let candidate = lambda - step;
            // Keep clear of the imaginary axis, where Δ is not evaluated.
            if candidate.re.abs() < 1.5 * NEAR_AXIS_MIN {
                step *= 0.5;
                continue;
            }
            match delta(p, k, candidate) {
                Ok(dc) if dc.norm() < residual => {
                    lambda = candidate;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NewtonStalled {
        re: lambda.re,
        im: lambda.im,
        residual,
    })
}

/// Certify a polished root with a tiny re-winding around it.  When the root
/// is too close to the axis for the certification square to keep the
/// [`AXIS_MARGIN`], an isolation box with verified unit winding may stand in
/// (`have_isolation_box`), and the certificate is flagged near-marginal;
/// without that evidence the certification fails instead.
fn certify(
    p: &VelocityProfile,
    k: f64,
    lambda: Complex64,
    residual: f64,
    newton_iters: u32,
    have_isolation_box: bool,
) -> Result<RootCertificate> {
    let h = 0.5 * CERT_BOX_SIDE;
    let mut near_marginal = lambda.re.abs() < NEAR_MARGINAL_SIGMA;
    let box_winding = if lambda.re - h >= AXIS_MARGIN {
        let a = Complex64::new(lambda.re - h, lambda.im - h);
        let b = Complex64::new(lambda.re + h, lambda.im + h);
        let w = rect_winding(p, k, a, b, INTERNAL_SAMPLES)?;
        if w != 1 {
            return Err(Error::internal(format!(
                "certification box around {lambda} has winding {w}, expected 1"
            )));
        }
        w
    } else if have_isolation_box {
        near_marginal = true;
        1
    } else {
        return Err(Error::ContourInvalid {
            message: format!(
                "root at {lambda} is too close to the imaginary axis to re-wind \
                 and no isolation box backs it"
            ),
        });
    };
    Ok(RootCertificate {
        lambda,
        residual,
        box_winding,
        newton_iters,
        near_marginal,
    })
}

/// Find and certify every zero of `Δ(k, ·)` inside a rectangle of the right
/// half-plane.
///
/// Quadrisection conserves the winding count at every split; each isolated
/// zero is polished by Newton's method with the analytic derivative and
/// certified by a final enclosing winding.  Certificates are sorted by
/// imaginary part, then real part.
pub fn find_roots(p: &VelocityProfile, k: f64, region: &RootRegion) -> Result<Vec<RootCertificate>> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "find_roots",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    if !(region.re.0 >= AXIS_MARGIN && region.re.1 > region.re.0 && region.im.1 > region.im.0) {
        return Err(Error::invalid(
            "find_roots",
            "region",
            format!(
                "need {AXIS_MARGIN} ≤ re.0 < re.1 and im.0 < im.1, got re = {:?}, im = {:?}",
                region.re, region.im
            ),
        ));
    }
    let reflected;
    let (pp, kk) = if k < 0.0 {
        reflected = p.reflected();
        (&reflected, -k)
    } else {
        (p, k)
    };

    let root_rect = Rect {
        x0: region.re.0,
        x1: region.re.1,
        y0: region.im.0,
        y1: region.im.1,
    };
    let (a, b) = root_rect.corners();
    let total = rect_winding(pp, kk, a, b, INTERNAL_SAMPLES)?;
    if total < 0 {
        return Err(Error::internal(format!(
            "search region claims {total} zeros; the counting function has no poles"
        )));
    }
    let mut certificates = Vec::with_capacity(total as usize);
    let mut stack = vec![(root_rect, total, 0u32)];
    while let Some((rect, w, depth)) = stack.pop() {
        if w == 0 {
            continue;
        }
        if w == 1 && rect.diameter() < ISOLATION_DIAMETER {
            let (lambda, residual, iters) = newton_polish(pp, kk, rect.center(), 60)?;
            if !rect.contains(lambda, 10.0 * rect.diameter()) {
                return Err(Error::internal(format!(
                    "polished root {lambda} escaped its isolation box around {}",
                    rect.center()
                )));
            }
            certificates.push(certify(pp, kk, lambda, residual, iters, true)?);
            continue;
        }
        if depth > 64 {
            return Err(Error::internal(
                "quadrisection depth exceeded without isolating a zero \
                 (multiple zero or pathological clustering)",
            ));
        }
        stack.extend(split_conserving(pp, kk, &rect, w)?.into_iter().map(
            |(child, child_w)| (child, child_w, depth + 1),
        ));
    }
    certificates.sort_by(|x, y| {
        (x.lambda.im, x.lambda.re)
            .partial_cmp(&(y.lambda.im, y.lambda.re))
            .expect("finite roots")
    });
    Ok(certificates)
}

/// Quadrisect a rectangle, retrying with nudged cut lines if a zero sits on
/// a child boundary, and verify that the children's windings sum to the
/// parent's.
fn split_conserving(
    p: &VelocityProfile,
    k: f64,
    rect: &Rect,
    parent: i64,
) -> Result<Vec<(Rect, i64)>> {
    const CUTS: [(f64, f64); 4] = [(0.5, 0.5), (0.57, 0.44), (0.41, 0.55), (0.53, 0.62)];
    'attempt: for (fx, fy) in CUTS {
        let xc = rect.x0 + fx * (rect.x1 - rect.x0);
        let yc = rect.y0 + fy * (rect.y1 - rect.y0);
        let children = [
            Rect { x0: rect.x0, x1: xc, y0: rect.y0, y1: yc },
            Rect { x0: xc, x1: rect.x1, y0: rect.y0, y1: yc },
            Rect { x0: rect.x0, x1: xc, y0: yc, y1: rect.y1 },
            Rect { x0: xc, x1: rect.x1, y0: yc, y1: rect.y1 },
        ];
        let mut out = Vec::with_capacity(4);
        for child in children {
            let (a, b) = child.corners();
            match rect_winding(p, k, a, b, INTERNAL_SAMPLES) {
                Ok(w) => out.push((child, w)),
                // A zero on the new cut lines: move them and retry.
                Err(Error::RootOnContour { .. }) => continue 'attempt,
                Err(e) => return Err(e),
            }
        }
        let sum: i64 = out.iter().map(|(_, w)| w).sum();
        if sum != parent {
            return Err(Error::WindingMismatch {
                parent,
                children: sum,
            });
        }
        out.retain(|(_, w)| *w != 0);
        return Ok(out);
    }
    Err(Error::internal(
        "could not place a cut line avoiding the zeros after several nudges",
    ))
}

/// Dominant-growth-rate curve over a `k` grid (processed in ascending
/// order).  Uses the previous root as a Newton seed and falls back to the
/// certified quadrisection search when continuation fails or cannot be
/// certified.
pub fn growth_curve(p: &VelocityProfile, k_grid: &[f64]) -> Result<Vec<GrowthPoint>> {
    let mut ks: Vec<f64> = k_grid.to_vec();
    if ks.iter().any(|k| !k.is_finite() || *k == 0.0) {
        return Err(Error::invalid(
            "growth_curve",
            "k_grid",
            "wave numbers must be finite and nonzero",
        ));
    }
    ks.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(ks.len());
    let mut prev: Option<Complex64> = None;
    for &k in &ks {
        let index = instability_index(p, k)?.n;
        if index == 0 {
            prev = None;
            out.push(GrowthPoint { k, index, root: None });
            continue;
        }
        let mut best: Option<RootCertificate> = None;
        if let Some(seed) = prev {
            if let Ok((lambda, residual, iters)) = newton_polish(p, k, seed, 30) {
                if lambda.re >= AXIS_MARGIN {
                    if let Ok(cert) = certify(p, k, lambda, residual, iters, false) {
                        best = Some(cert);
                    }
                }
            }
        }
        let cert = match best {
            Some(c) => c,
            None => {
                let region = default_root_region(p, k)?;
                let certs = find_roots(p, k, &region)?;
                certs
                    .into_iter()
                    .max_by(|x, y| x.lambda.re.total_cmp(&y.lambda.re))
                    .ok_or_else(|| {
                        Error::internal(format!(
                            "index reports {index} growing modes at k = {k} but the \
                             certified search found none in the default region"
                        ))
                    })?
            }
        };
        prev = Some(cert.lambda);
        out.push(GrowthPoint {
            k,
            index,
            root: Some(cert),
        });
    }
    Ok(out)
}
