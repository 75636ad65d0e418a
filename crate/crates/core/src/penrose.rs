//! Counting growing modes from sign data alone.
//!
//! At a zero `s` of `φ` the boundary value of the dispersion function is
//! real: `w(s ± i0) = 1 − k^{-2} p.v.∫ φ/(v−s) dv`.  Walking the Nyquist
//! image of the real line, each critical point whose boundary value is
//! negative contributes a crossing of the negative real axis, oriented by
//! the sign of `φ'(s)`.  The number of growing modes is therefore
//!
//! `N(k) = N₊(k) − N₋(k)`,
//!
//! where `N₊` counts critical points with `φ'(s) > 0` (minima of `f0`) and
//! negative boundary value, and `N₋` those with `φ'(s) < 0` (maxima).  No
//! root search is involved; the count is later cross-checked against the
//! argument principle by the contour machinery.
//!
//! The module also carries the `k = 0` branch (`∫ v φ dv > 0` decides
//! instability, with the explicit real root `√(∫ v φ dv)`), the detection of
//! candidate *embedded* modes (boundary value within tolerance of zero, so
//! `λ = −iks` may sit on the continuous spectrum and counting is refused),
//! and the two-stream sufficient criteria: the exact valley criterion
//! `p.v.∫ φ/(v−c) dv > k²` plus the two level-set lower bounds that certify
//! instability from a handful of `f0` evaluations.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::{
    critical_points, level_widths, moment, CriticalKind, CriticalPoint, Moment, VelocityProfile,
};
use crate::quadrature::pv_cauchy;

/// Boundary values closer to zero than this are refused as embedded-mode
/// candidates rather than silently counted.
pub const EMBEDDED_TOL: f64 = 1e-9;

/// One critical point's contribution to the count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointAssessment {
    pub point: CriticalPoint,
    /// `1 − k^{-2} p.v.∫ φ/(v−s) dv`.
    pub penrose_value: f64,
    /// Whether the point contributes (negative boundary value).
    pub counts: bool,
}

/// The full count at one wave number.
#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub k: f64,
    pub points: Vec<PointAssessment>,
    pub n_plus: usize,
    pub n_minus: usize,
    /// Number of growing modes, `n_plus − n_minus` (≥ 0 by the theory; a
    /// negative difference is reported as an internal error).
    pub n: usize,
}

/// Outcome of the long-wavelength (`k = 0`) branch.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct K0Report {
    /// `∫ v φ dv`; positive means unstable at k = 0.
    pub int_v_phi: f64,
    pub unstable: bool,
    /// The real growing root `+√(∫ v φ dv)` when unstable.
    pub root: Option<f64>,
}

/// A candidate embedded mode: boundary value within tolerance of zero.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmbeddedCandidate {
    pub s: f64,
    pub penrose_value: f64,
    /// The purely imaginary spectral parameter `λ = −iks` it would sit at.
    pub lambda_im: f64,
}

/// The real boundary value `1 − k^{-2} p.v.∫ φ(v)/(v−s) dv` at a point `s`.
///
/// Depends on `k` only through `k²`, so the sign of `k` is immaterial here.
pub fn penrose_value(p: &VelocityProfile, k: f64, s: f64) -> Result<f64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "penrose_value",
            "k",
            "wave number must be finite and nonzero (use the k = 0 branch)",
        ));
    }
    Ok(1.0 - pv_cauchy(p, s)? / (k * k))
}

/// The instability index `N(k) = N₊ − N₋` for `k ≠ 0`.
///
/// Negative `k` is normalized to `|k|` by the reflection `v ↦ −v`, under
/// which slopes, boundary values and therefore all counts are preserved;
/// the report is expressed in the original velocity coordinates.
pub fn instability_index(p: &VelocityProfile, k: f64) -> Result<IndexReport> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "instability_index",
            "k",
            "wave number must be finite and nonzero (use the k = 0 branch)",
        ));
    }
    // Reflection invariance: the reflected profile has critical points −s
    // with identical slopes and boundary values, so the count for k < 0
    // equals the count below; only the bookkeeping normalizes to |k|.
    let k_abs = k.abs();
    let cps = critical_points(p)?;
    let mut points = Vec::with_capacity(cps.len());
    let mut n_plus = 0usize;
    let mut n_minus = 0usize;
    for cp in cps {
        let value = penrose_value(p, k_abs, cp.s)?;
        if value.abs() < EMBEDDED_TOL {
            return Err(Error::EmbeddedModeCandidate {
                k,
                s: cp.s,
                value,
                tol: EMBEDDED_TOL,
            });
        }
        let counts = value < 0.0;
        if counts {
            match cp.kind {
                CriticalKind::F0Min => n_plus += 1,
                CriticalKind::F0Max => n_minus += 1,
            }
        }
        points.push(PointAssessment {
            point: cp,
            penrose_value: value,
            counts,
        });
    }
    if n_plus < n_minus {
        return Err(Error::internal(format!(
            "instability index came out negative at k = {k}: N+ = {n_plus}, N− = {n_minus}"
        )));
    }
    Ok(IndexReport {
        k,
        points,
        n_plus,
        n_minus,
        n: n_plus - n_minus,
    })
}

/// The `k = 0` branch: unstable exactly when `∫ v φ dv > 0`, with the
/// explicit growing root `√(∫ v φ dv)`.
pub fn index_at_k0(p: &VelocityProfile) -> Result<K0Report> {
    let m = moment(p, Moment::IntVPhi)?;
    let unstable = m > 0.0;
    Ok(K0Report {
        int_v_phi: m,
        unstable,
        root: if unstable { Some(m.sqrt()) } else { None },
    })
}

/// Critical points whose boundary value lies within [`EMBEDDED_TOL`] of
/// zero: candidates for modes embedded in the continuous spectrum at
/// `λ = −iks`.
pub fn embedded_modes(p: &VelocityProfile, k: f64) -> Result<Vec<EmbeddedCandidate>> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "embedded_modes",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    let mut out = Vec::new();
    for cp in critical_points(p)? {
        let value = penrose_value(p, k, cp.s)?;
        if value.abs() < EMBEDDED_TOL {
            out.push(EmbeddedCandidate {
                s: cp.s,
                penrose_value: value,
                lambda_im: -k * cp.s,
            });
        }
    }
    Ok(out)
}

/// Geometry of a double-humped equilibrium: outer maxima at `a < b`, the
/// interior minimum at `c`, and the level cap `m = min(f0(a), f0(b))` below
/// which both humps admit level sets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoStreamGeometry {
    pub a: f64,
    pub c: f64,
    pub b: f64,
    pub m: f64,
}

/// Extract the double-hump geometry; errors unless the profile has exactly
/// the max–min–max critical structure (and a density to measure).
pub fn two_stream_geometry(p: &VelocityProfile) -> Result<TwoStreamGeometry> {
    const OP: &str = "two_stream_geometry";
    if !p.has_density() {
        return Err(Error::DensityUnavailable { op: OP });
    }
    let cps = critical_points(p)?;
    let kinds: Vec<CriticalKind> = cps.iter().map(|cp| cp.kind).collect();
    if kinds != [CriticalKind::F0Max, CriticalKind::F0Min, CriticalKind::F0Max] {
        return Err(Error::invalid(
            OP,
            "profile",
            format!(
                "expected the max–min–max double-hump structure, found {} critical points",
                cps.len()
            ),
        ));
    }
    let (a, c, b) = (cps[0].s, cps[1].s, cps[2].s);
    let fa = p.f0(a).expect("density available");
    let fb = p.f0(b).expect("density available");
    Ok(TwoStreamGeometry {
        a,
        c,
        b,
        m: fa.min(fb),
    })
}

/// Exact valley criterion: for the double-humped structure, exactly one
/// growing mode exists iff `p.v.∫ φ/(v−c) dv > k²`.
pub fn two_stream_criterion(p: &VelocityProfile, g: &TwoStreamGeometry, k: f64) -> Result<bool> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            "two_stream_criterion",
            "k",
            "wave number must be finite and nonzero",
        ));
    }
    Ok(pv_cauchy(p, g.c)? > k * k)
}

/// The instability threshold in `k` implied by the valley criterion:
/// `k✻ = √(p.v.∫ φ/(v−c) dv)` when the valley integral is positive.
pub fn two_stream_threshold(p: &VelocityProfile, g: &TwoStreamGeometry) -> Result<Option<f64>> {
    let pv = pv_cauchy(p, g.c)?;
    Ok(if pv > 0.0 { Some(pv.sqrt()) } else { None })
}

/// Level-set sufficient criterion.  For levels `0 < ξ, η < m`, let
/// `a_< < a_>` be the nearest crossings of `f0 = ξ` around the left hump and
/// `b_< < b_>` those of `f0 = η` around the right hump.  Then
///
/// `(a_> − a_<)·ξ/((c − a_>)(c − a_<)) + (b_> − b_<)·η/((b_< − c)(b_> − c)) > k²`
///
/// certifies exactly one growing mode.  Returns whether the bound fires.
pub fn lemma5_check(
    p: &VelocityProfile,
    g: &TwoStreamGeometry,
    k: f64,
    xi: f64,
    eta: f64,
) -> Result<bool> {
    const OP: &str = "lemma5_check";
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(OP, "k", "wave number must be finite and nonzero"));
    }
    if !(xi > 0.0 && xi < g.m) {
        return Err(Error::invalid(OP, "xi", format!("level must lie in (0, {}), got {xi}", g.m)));
    }
    if !(eta > 0.0 && eta < g.m) {
        return Err(Error::invalid(OP, "eta", format!("level must lie in (0, {}), got {eta}", g.m)));
    }
    let cps = critical_points(p)?;
    let left = cps[0];
    let right = cps[2];
    let (a_lt, a_gt) = level_widths(p, &left, xi)?;
    let (b_lt, b_gt) = level_widths(p, &right, eta)?;
    // The bound needs the level sets to stay on their own side of the valley.
    if a_gt >= g.c || b_lt <= g.c {
        return Err(Error::invalid(
            OP,
            "xi",
            "level set spills across the valley; pick higher levels",
        ));
    }
    let lhs = (a_gt - a_lt) * xi / ((g.c - a_gt) * (g.c - a_lt))
        + (b_gt - b_lt) * eta / ((b_lt - g.c) * (b_gt - g.c));
    Ok(lhs > k * k)
}

/// Offset sufficient criterion.  For offsets `0 < σ < c − a`, `0 < τ < b − c`,
///
/// `σ·f0(a+σ)/((c − a − σ)(c − a)) + τ·f0(b−τ)/((b − c − τ)(b − c)) > k²`
///
/// certifies exactly one growing mode.  Returns whether the bound fires.
pub fn lemma6_check(
    p: &VelocityProfile,
    g: &TwoStreamGeometry,
    k: f64,
    sigma: f64,
    tau: f64,
) -> Result<bool> {
    const OP: &str = "lemma6_check";
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(OP, "k", "wave number must be finite and nonzero"));
    }
    if !(sigma > 0.0 && sigma < g.c - g.a) {
        return Err(Error::invalid(
            OP,
            "sigma",
            format!("offset must lie in (0, c − a) = (0, {}), got {sigma}", g.c - g.a),
        ));
    }
    if !(tau > 0.0 && tau < g.b - g.c) {
        return Err(Error::invalid(
            OP,
            "tau",
            format!("offset must lie in (0, b − c) = (0, {}), got {tau}", g.b - g.c),
        ));
    }
    let f = |v: f64| p.f0(v).expect("geometry construction required a density");
    let lhs = sigma * f(g.a + sigma) / ((g.c - g.a - sigma) * (g.c - g.a))
        + tau * f(g.b - tau) / ((g.b - g.c - tau) * (g.b - g.c));
    Ok(lhs > k * k)
}

/// Complex spectral parameter of the `k = 0` root as a convenience for
/// callers comparing against contour output.
pub fn k0_root_lambda(report: &K0Report) -> Option<Complex64> {
    report.root.map(|r| Complex64::new(r, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_profile, ProfileSpec};

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn single_hump_value_closed_form() {
        // p.v.∫ φ/(v−0) = −2 for the Maxwellian, so the boundary value at
        // its only critical point is 1 + 2/k² > 0: stable at every k.
        let p = build_profile(&ProfileSpec::maxwellian()).unwrap();
        for k in [0.1, 0.5, 1.0, 3.0] {
            let v = penrose_value(&p, k, 0.0).unwrap();
            assert!((v - (1.0 + 2.0 / (k * k))).abs() < 1e-8, "k = {k}: {v}");
            let report = instability_index(&p, k).unwrap();
            assert_eq!(report.n, 0);
            assert_eq!(report.n_minus, 0);
            assert_eq!(report.points.len(), 1);
            assert!(!report.points[0].counts);
        }
    }

    #[test]
    fn counter_streaming_index_and_threshold() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let g = two_stream_geometry(&p).unwrap();
        assert!((g.a + 2.0).abs() < 1e-3 && (g.b - 2.0).abs() < 1e-3);
        assert!(g.c.abs() < 1e-12);

        let k_star = two_stream_threshold(&p, &g).unwrap().expect("valley integral positive");
        // Below the threshold: one growing mode; above: none.
        let lo = instability_index(&p, k_star * (1.0 - 1e-3)).unwrap();
        assert_eq!((lo.n_plus, lo.n_minus, lo.n), (1, 0, 1));
        let hi = instability_index(&p, k_star * (1.0 + 1e-3)).unwrap();
        assert_eq!(hi.n, 0);

        // Bisecting the index flip recovers the threshold to 1e−6.
        let mut a = 0.3;
        let mut b = 1.2;
        for _ in 0..40 {
            let mid = 0.5 * (a + b);
            match instability_index(&p, mid) {
                Ok(r) if r.n == 1 => a = mid,
                Ok(_) => b = mid,
                // A bracket this tight can land inside the embedded-candidate
                // refusal band around the flip itself; the midpoint then IS
                // the threshold to the bracket's accuracy.
                Err(Error::EmbeddedModeCandidate { .. }) => {
                    a = mid;
                    b = mid;
                    break;
                }
                Err(e) => panic!("unexpected error at k = {mid}: {e}"),
            }
        }
        assert!(
            (0.5 * (a + b) - k_star).abs() < 1e-6,
            "bisected {} vs threshold {k_star}",
            0.5 * (a + b)
        );

        // The valley criterion agrees with the index wherever both apply.
        for j in 0..20 {
            let k = 0.05 * (2.0_f64 / 0.05).powf(j as f64 / 19.0);
            if (k - k_star).abs() < 1e-3 {
                continue;
            }
            let crit = two_stream_criterion(&p, &g, k).unwrap();
            let n = instability_index(&p, k).unwrap().n;
            assert_eq!(crit, n == 1, "k = {k}");
        }
    }

    #[test]
    fn embedded_candidate_is_refused_at_the_threshold() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let g = two_stream_geometry(&p).unwrap();
        let k_star = two_stream_threshold(&p, &g).unwrap().unwrap();
        // At k exactly the threshold the valley's boundary value vanishes.
        let err = instability_index(&p, k_star).unwrap_err();
        assert!(matches!(err, Error::EmbeddedModeCandidate { .. }), "got {err}");
        assert!(err.is_hypothesis_violation());

        let found = embedded_modes(&p, k_star).unwrap();
        assert_eq!(found.len(), 1);
        assert!(found[0].s.abs() < 1e-12);
        assert!(found[0].lambda_im.abs() < 1e-12);
        // Just off the threshold nothing is flagged.
        assert!(embedded_modes(&p, k_star * 1.01).unwrap().is_empty());
    }

    #[test]
    fn merged_humps_are_stable() {
        let p = build_profile(&ProfileSpec::two_stream(0.3)).unwrap();
        for k in [0.05, 0.3, 1.0, 4.0] {
            assert_eq!(instability_index(&p, k).unwrap().n, 0, "k = {k}");
        }
        assert!(two_stream_geometry(&p).is_err(), "merged profile has one hump");
    }

    #[test]
    fn negative_wave_numbers_count_identically() {
        let p = build_profile(&ProfileSpec::bump_on_tail()).unwrap();
        for k in [0.2, 0.7, 1.5] {
            let fwd = instability_index(&p, k).unwrap();
            let bwd = instability_index(&p, -k).unwrap();
            assert_eq!(fwd.n, bwd.n);
            assert_eq!(fwd.n_plus, bwd.n_plus);
            for (x, y) in fwd.points.iter().zip(bwd.points.iter()) {
                assert_eq!(x.point.s, y.point.s);
                assert_eq!(x.penrose_value, y.penrose_value);
            }
        }
    }

    #[test]
    fn long_wavelength_branch() {
        // All density presets are stable at k = 0 (∫vφ = −∫f0 < 0).
        for spec in [
            ProfileSpec::maxwellian(),
            ProfileSpec::two_stream(2.0),
            ProfileSpec::bump_on_tail(),
        ] {
            let report = index_at_k0(&build_profile(&spec).unwrap()).unwrap();
            assert!(!report.unstable, "{spec:?}");
            assert!(report.root.is_none());
            assert!((report.int_v_phi + 1.0).abs() < 1e-9, "∫vφ = −∫f0 = −1");
        }
        // The synthetic derivative has ∫vφ = √π > 0: root at π^{1/4}.
        let p = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        let report = index_at_k0(&p).unwrap();
        assert!(report.unstable);
        let root = report.root.unwrap();
        assert!(
            (root - SQRT_PI.sqrt()).abs() < 1e-10,
            "root {root} vs π^(1/4) {}",
            SQRT_PI.sqrt()
        );
        // Homogeneity: scaling φ by α² scales the root by α.
        let scaled = build_profile(&ProfileSpec::signed_synthetic().with("a", 8.0)).unwrap();
        let r2 = index_at_k0(&scaled).unwrap().root.unwrap();
        assert!((r2 - 2.0 * root).abs() < 1e-10);
    }

    #[test]
    fn signed_synthetic_counts_one_mode() {
        // φ = 2v e^{−v²} has a single zero with positive slope and
        // p.v.∫ φ/v = 2√π, so N = 1 for k² < 2√π.
        let p = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        let report = instability_index(&p, 0.5).unwrap();
        assert_eq!((report.n_plus, report.n_minus, report.n), (1, 0, 1));
        let expected = 1.0 - 2.0 * SQRT_PI / 0.25;
        assert!((report.points[0].penrose_value - expected).abs() < 1e-8);
    }

    #[test]
    fn level_set_bound_implies_instability() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let g = two_stream_geometry(&p).unwrap();
        let k = 0.1;
        // Mid-height levels on both humps: the bound should fire well below
        // the threshold, and the index must then agree.
        assert!(lemma5_check(&p, &g, k, 0.5 * g.m, 0.5 * g.m).unwrap());
        assert_eq!(instability_index(&p, k).unwrap().n, 1);
        // Far above the threshold the bound cannot fire.
        assert!(!lemma5_check(&p, &g, 2.0, 0.5 * g.m, 0.5 * g.m).unwrap());

        // Degenerate levels are rejected.
        assert!(lemma5_check(&p, &g, k, 0.0, 0.5 * g.m).is_err());
        assert!(lemma5_check(&p, &g, k, 0.5 * g.m, g.m * 2.0).is_err());
    }

    #[test]
    fn offset_bound_implies_instability() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let g = two_stream_geometry(&p).unwrap();
        let k = 0.1;
        assert!(lemma6_check(&p, &g, k, 0.5, 0.5).unwrap());
        assert_eq!(instability_index(&p, k).unwrap().n, 1);
        assert!(!lemma6_check(&p, &g, 2.0, 0.5, 0.5).unwrap());
        // Out-of-range offsets are rejected.
        assert!(lemma6_check(&p, &g, k, g.c - g.a, 0.5).is_err());
        assert!(lemma6_check(&p, &g, k, 0.5, -0.1).is_err());
    }

    #[test]
    fn geometry_requires_density_and_double_hump() {
        let signed = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        assert!(matches!(
            two_stream_geometry(&signed).unwrap_err(),
            Error::DensityUnavailable { .. }
        ));
        let single = build_profile(&ProfileSpec::maxwellian()).unwrap();
        assert!(two_stream_geometry(&single).is_err());
    }
}
