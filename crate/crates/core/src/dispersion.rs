//! The dispersion function `Δ(k, λ)` and its structural estimates.
//!
//! For `k ≠ 0` and `Re λ ≠ 0`,
//!
//! `Δ(k, λ) = 1 + (1/(ik)) ∫ φ(v)/(λ + ikv) dv = 1 − (1/k²) ∫ φ(v)/(v − z) dv`
//!
//! with `z = iλ/k`.  Temporal modes `e^{λt}` exist exactly at the zeros of
//! `Δ(k, ·)`; growing ones have `Re λ > 0`, which for `k > 0` corresponds to
//! `Im z > 0`.  The second (half-plane) form is the primary evaluation path;
//! the first is kept as an independently arranged cross-check.
//!
//! The module also provides:
//!
//! * the `k = 0` branch `Δ(0, λ) = 1 − λ^{-2} ∫ v φ dv`,
//! * `phi_fun`, the deviation `Δ − 1` and its first two `k`-derivatives by
//!   direct quadrature (with an algebraically rewritten second route for
//!   consistency testing),
//! * the spectrum-free zone `|Re λ|·|λ| > ∫|v||φ| dv` with its boundary
//!   curve, and
//! * the short-wavelength threshold `k* = (8 · sup|φ'| · ∫|φ|)^{1/4}` beyond
//!   which no growing modes exist.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profiles::{moment, Moment, VelocityProfile};
use crate::quadrature::{adaptive, cauchy_integral_pow, cauchy_line_pow, QuadratureResult};

/// Evaluations closer to the imaginary axis than this are refused; boundary
/// behaviour there is the business of the one-sided Plemelj values.
pub const NEAR_AXIS_MIN: f64 = 1e-6;

/// A point of the spectral plane tagged with its wave number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub k: f64,
    pub lambda: Complex64,
}

impl SpectralPoint {
    pub fn new(k: f64, lambda: Complex64) -> Self {
        SpectralPoint { k, lambda }
    }
    /// Growth rate `σ = Re λ`.
    pub fn sigma(&self) -> f64 {
        self.lambda.re
    }
    /// Oscillation rate `τ = Im λ`.
    pub fn tau(&self) -> f64 {
        self.lambda.im
    }
    /// The half-plane coordinate `z = iλ/k` the primary evaluation uses.
    pub fn z(&self) -> Complex64 {
        Complex64::new(0.0, 1.0) * self.lambda / self.k
    }
}

fn guard_k(op: &'static str, k: f64) -> Result<()> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(
            op,
            "k",
            "wave number must be finite and nonzero (use the k = 0 branch for k = 0)",
        ));
    }
    Ok(())
}

fn guard_axis(op: &'static str, lambda: Complex64) -> Result<()> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::invalid(op, "lambda", "spectral parameter must be finite"));
    }
    if lambda.re.abs() < NEAR_AXIS_MIN {
        return Err(Error::NearAxis {
            op,
            sigma_abs: lambda.re.abs(),
            min: NEAR_AXIS_MIN,
        });
    }
    Ok(())
}

/// `Δ(k, λ)` via the half-plane form `1 − k^{-2} ∫ φ/(v − iλ/k) dv`.
///
/// The kernel integral is amplified by `1/k²`, so both its tolerance and the
/// neglected-tail mass must shrink with `k²` for the certified relative
/// error on `Δ` to stay at `10⁻⁹` uniformly in `k`: the line tolerance is
/// `min(10⁻¹³, 3·10⁻¹⁰ k²)` and the integration domain is padded outward
/// until the profile's analytic tail bound drops below a quarter of it.
pub fn delta(p: &VelocityProfile, k: f64, lambda: Complex64) -> Result<Complex64> {
    guard_k("delta", k)?;
    guard_axis("delta", lambda)?;
    let z = Complex64::new(0.0, 1.0) * lambda / k;
    let k2 = k * k;
    let abs_tol = (3e-10 * k2).min(1e-13).max(1e-16);
    let (v_lo, v_hi) = p.support();
    let mut lo = v_lo.min(z.re - 1.0);
    let mut hi = v_hi.max(z.re + 1.0);
    let pad = p.width().max(1.0);
    for _ in 0..8 {
        if p.tail_weighted_bound(lo, hi, 0) <= 0.25 * abs_tol {
            break;
        }
        lo -= pad;
        hi += pad;
    }
    let mut c = cauchy_line_pow(|v| p.phi(v), (lo, hi), z, 1, abs_tol, 1e-11)?;
    c.abs_err += p.tail_weighted_bound(lo, hi, 0);
    let value = Complex64::new(1.0, 0.0) - c.value / k2;
    if c.abs_err / k2 > 1e-9 * value.norm().max(1.0) {
        return Err(Error::QuadratureNonConvergent {
            op: "delta",
            abs_err: c.abs_err / k2,
            panel_lo: lo,
            panel_hi: hi,
            panels: c.subdivisions,
        });
    }
    Ok(value)
}

/// `dΔ/dλ = −(i/k³) ∫ φ(v)/(v − iλ/k)² dv`, the analytic Newton derivative.
pub fn delta_deriv(p: &VelocityProfile, k: f64, lambda: Complex64) -> Result<Complex64> {
    guard_k("delta_deriv", k)?;
    guard_axis("delta_deriv", lambda)?;
    let z = Complex64::new(0.0, 1.0) * lambda / k;
    let c = cauchy_integral_pow(p, z, 2)?;
    Ok(-Complex64::new(0.0, 1.0) / (k * k * k) * c.value)
}

/// `Δ(k, λ)` via the direct form `1 + (1/(ik)) ∫ φ/(λ + ikv) dv`; retained
/// as an independently arranged cross-check of [`delta`].
pub fn delta_direct(p: &VelocityProfile, k: f64, lambda: Complex64) -> Result<Complex64> {
    guard_k("delta", k)?;
    guard_axis("delta", lambda)?;
    let r = moment_kernel(p, k, lambda, 0, 1)?;
    Ok(Complex64::new(1.0, 0.0) + r.value / (Complex64::new(0.0, 1.0) * k))
}

/// The long-wavelength branch `Δ(0, λ) = 1 − λ^{-2} ∫ v φ dv`.
pub fn delta_k0(p: &VelocityProfile, lambda: Complex64) -> Result<Complex64> {
    if lambda.norm() == 0.0 {
        return Err(Error::invalid("delta_k0", "lambda", "lambda must be nonzero"));
    }
    let m = moment(p, Moment::IntVPhi)?;
    Ok(Complex64::new(1.0, 0.0) - Complex64::new(m, 0.0) / (lambda * lambda))
}

/// `∫ v^p φ(v) (ikv + λ)^{−m} dv` with panels graded toward the
/// near-singular abscissa and the analytic tail folded into `abs_err`.
fn moment_kernel(
    p: &VelocityProfile,
    k: f64,
    lambda: Complex64,
    pow_v: u32,
    m: i32,
) -> Result<QuadratureResult> {
    let (v_lo, v_hi) = p.support();
    let integrand = move |v: f64| {
        let den = Complex64::new(lambda.re, lambda.im + k * v).powi(m);
        Complex64::new(v.powi(pow_v as i32) * p.phi(v), 0.0) / den
    };
    // Pole of the kernel sits at v = iλ/k; only its real part matters for
    // panel grading on the line.
    let (lo, hi, bps) = if k != 0.0 {
        let x = -lambda.im / k;
        let d = (lambda.re / k).abs();
        let lo = v_lo.min(x - 1.0);
        let hi = v_hi.max(x + 1.0);
        let mut bps = vec![lo, hi];
        let mut r = d.max(1e-300);
        while r < 2.0 * (hi - lo) {
            for cand in [x - r, x + r] {
                if cand > lo && cand < hi {
                    bps.push(cand);
                }
            }
            r *= 2.0;
        }
        for j in 1..16 {
            bps.push(lo + (hi - lo) * j as f64 / 16.0);
        }
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        (lo, hi, bps)
    } else {
        let mut bps: Vec<f64> = (0..=16).map(|j| v_lo + (v_hi - v_lo) * j as f64 / 16.0).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        (v_lo, v_hi, bps)
    };
    let mut r = adaptive(&integrand, &bps, 1e-13, 1e-10, "phi_fun")?;
    // Outside [lo, hi]: |ikv + λ| = |k||v − z| ≥ |k| (domain extended one
    // unit past the pole abscissa), or ≥ |λ| when k = 0.
    let denom_floor = if k != 0.0 { k.abs() } else { lambda.norm() };
    r.abs_err += p.tail_weighted_bound(lo, hi, pow_v) / denom_floor.powi(m);
    Ok(r)
}

/// `phi_fun(p, k, λ, order)` — the deviation `Δ − 1` (`order = 0`) and its
/// first two `k`-derivatives, by direct quadrature of
/// `−λ^{-1}∫ vφ/(ikv+λ)`, `iλ^{-1}∫ v²φ/(ikv+λ)²`, `2λ^{-1}∫ v³φ/(ikv+λ)³`.
pub fn phi_fun(p: &VelocityProfile, k: f64, lambda: Complex64, order: u8) -> Result<Complex64> {
    guard_phi_fun(k, lambda, order)?;
    let value = match order {
        0 => -moment_kernel(p, k, lambda, 1, 1)?.value / lambda,
        1 => Complex64::new(0.0, 1.0) * moment_kernel(p, k, lambda, 2, 2)?.value / lambda,
        _ => 2.0 * moment_kernel(p, k, lambda, 3, 3)?.value / lambda,
    };
    Ok(value)
}

/// Algebraically rewritten route for the same quantities, using only the
/// pure-kernel integrals `I_m = ∫ φ/(ikv+λ)^m` and `∫ φ = 0`.  Exists so the
/// two independent reductions can be cross-checked.
pub fn phi_fun_alt(p: &VelocityProfile, k: f64, lambda: Complex64, order: u8) -> Result<Complex64> {
    guard_phi_fun(k, lambda, order)?;
    guard_k("phi_fun", k)?; // the rewriting divides by k
    let i = Complex64::new(0.0, 1.0);
    let i1 = moment_kernel(p, k, lambda, 0, 1)?.value;
    let value = match order {
        0 => i1 / (i * k),
        1 => {
            let i2 = moment_kernel(p, k, lambda, 0, 2)?.value;
            (2.0 * i / (k * k)) * i1 - (i * lambda / (k * k)) * i2
        }
        _ => {
            let i2 = moment_kernel(p, k, lambda, 0, 2)?.value;
            let i3 = moment_kernel(p, k, lambda, 0, 3)?.value;
            (i / (k * k * k)) * (-6.0 * i1 + 6.0 * lambda * i2 - 2.0 * lambda * lambda * i3)
        }
    };
    Ok(value)
}

fn guard_phi_fun(k: f64, lambda: Complex64, order: u8) -> Result<()> {
    if order > 2 {
        return Err(Error::invalid("phi_fun", "order", format!("order must be 0, 1 or 2, got {order}")));
    }
    if lambda.norm() == 0.0 {
        return Err(Error::invalid("phi_fun", "lambda", "lambda must be nonzero"));
    }
    if k != 0.0 {
        guard_axis("phi_fun", lambda)?;
    }
    Ok(())
}

/// The certified spectrum-free zone `|Re λ| · |λ| > c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSpec {
    /// The moment `c = ∫ |v||φ| dv`.
    pub c: f64,
}

/// Compute the zone constant for a profile.
pub fn zone(p: &VelocityProfile) -> Result<ZoneSpec> {
    Ok(ZoneSpec {
        c: moment(p, Moment::IntAbsVAbsPhi)?,
    })
}

/// Is `λ` strictly inside the spectrum-free zone?
pub fn zone_contains(zone: &ZoneSpec, lambda: Complex64) -> bool {
    lambda.re.abs() * lambda.norm() > zone.c
}

/// Boundary curve `σ(τ)` of the zone: the positive root of
/// `σ⁴ + σ²τ² = c²`, i.e. `σ = √((−τ² + √(τ⁴ + 4c²))/2)`.
pub fn zone_boundary(zone: &ZoneSpec, tau_grid: &[f64]) -> Vec<(f64, f64)> {
    tau_grid
        .iter()
        .map(|&tau| {
            let t2 = tau * tau;
            let sigma = (0.5 * (-t2 + (t2 * t2 + 4.0 * zone.c * zone.c).sqrt())).sqrt();
            (tau, sigma)
        })
        .collect()
}

/// Short-wavelength stability threshold `k* = (8 · sup|φ'| · ∫|φ|)^{1/4}`:
/// no growing modes exist for `k ≥ k*`.
pub fn lemma4_threshold(p: &VelocityProfile) -> Result<f64> {
    let m1 = moment(p, Moment::MaxAbsPhi1)?;
    let m0 = moment(p, Moment::IntAbsPhi)?;
    Ok((8.0 * m1 * m0).powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_profile, ProfileSpec};

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn maxwellian() -> VelocityProfile {
        build_profile(&ProfileSpec::maxwellian()).unwrap()
    }

    #[test]
    fn far_field_approaches_one_with_certified_bound() {
        let p = maxwellian();
        let c = zone(&p).unwrap().c; // = 1 for this profile
        for lambda in [
            Complex64::new(1e3, 0.0),
            Complex64::new(700.0, 700.0),
            Complex64::new(-500.0, 300.0),
        ] {
            let d = delta(&p, 1.0, lambda).unwrap();
            let bound = c / (lambda.norm() * lambda.re.abs());
            assert!(
                (d - Complex64::new(1.0, 0.0)).norm() <= bound * (1.0 + 1e-6),
                "lambda = {lambda}: |Δ−1| = {} > bound {bound}",
                (d - Complex64::new(1.0, 0.0)).norm()
            );
        }
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        for (k, lambda) in [
            (0.5, Complex64::new(0.3, 0.7)),
            (1.3, Complex64::new(-0.2, 1.4)),
            (0.2, Complex64::new(0.05, -0.6)),
        ] {
            let a = delta(&p, k, lambda).unwrap();
            // −conj λ = (−Re λ, Im λ).
            let b = delta(&p, k, Complex64::new(-lambda.re, lambda.im)).unwrap();
            // Δ(k, −conj λ) = conj Δ(k, λ): same Kronrod nodes on mirrored
            // data, so the identity holds bit for bit.
            assert_eq!(a.conj(), b, "k = {k}, lambda = {lambda}");
        }
    }

    #[test]
    fn two_evaluation_paths_agree() {
        let specs = [ProfileSpec::maxwellian(), ProfileSpec::two_stream(2.0)];
        for spec in &specs {
            let p = build_profile(spec).unwrap();
            for k in [0.2, 1.0, 3.0] {
                for lambda in [
                    Complex64::new(0.4, 0.0),
                    Complex64::new(0.1, 1.2),
                    Complex64::new(-0.7, -0.5),
                    Complex64::new(2.0, 3.0),
                ] {
                    let a = delta(&p, k, lambda).unwrap();
                    let b = delta_direct(&p, k, lambda).unwrap();
                    assert!(
                        (a - b).norm() < 1e-8,
                        "{spec:?} k={k} λ={lambda}: w-form {a} vs direct {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn near_axis_and_zero_k_are_refused() {
        let p = maxwellian();
        assert!(matches!(
            delta(&p, 1.0, Complex64::new(1e-9, 0.5)).unwrap_err(),
            Error::NearAxis { .. }
        ));
        assert!(matches!(
            delta(&p, 0.0, Complex64::new(1.0, 0.0)).unwrap_err(),
            Error::InvalidParameter { .. }
        ));
    }

    #[test]
    fn long_wavelength_branch_closed_form() {
        // ∫vφ = −1 for the Maxwellian, so Δ(0, λ) = 1 + 1/λ².
        let p = maxwellian();
        for lambda in [Complex64::new(0.5, 0.3), Complex64::new(2.0, -1.0)] {
            let d = delta_k0(&p, lambda).unwrap();
            let expected = Complex64::new(1.0, 0.0) + 1.0 / (lambda * lambda);
            assert!((d - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn phi_fun_matches_delta_minus_one() {
        let p = build_profile(&ProfileSpec::two_stream(1.5)).unwrap();
        for (k, lambda) in [(0.4, Complex64::new(0.3, 0.9)), (2.0, Complex64::new(1.0, -0.4))] {
            let d = delta(&p, k, lambda).unwrap();
            let f = phi_fun(&p, k, lambda, 0).unwrap();
            assert!(
                ((d - Complex64::new(1.0, 0.0)) - f).norm() < 1e-8,
                "k={k} λ={lambda}"
            );
        }
    }

    #[test]
    fn phi_fun_k_derivatives_match_finite_differences() {
        let p = maxwellian();
        let lambda = Complex64::new(1.0, 1.0);
        let k = 0.8;
        let h = 1e-4;
        let f = |kk: f64| phi_fun(&p, kk, lambda, 0).unwrap();
        let fd1 = (f(k + h) - f(k - h)) / (2.0 * h);
        let d1 = phi_fun(&p, k, lambda, 1).unwrap();
        assert!((fd1 - d1).norm() < 1e-6, "fd {fd1} vs analytic {d1}");
        let fd2 = (f(k + h) - 2.0 * f(k) + f(k - h)) / (h * h);
        let d2 = phi_fun(&p, k, lambda, 2).unwrap();
        assert!((fd2 - d2).norm() < 1e-4, "fd {fd2} vs analytic {d2}");
    }

    #[test]
    fn phi_fun_two_reductions_agree() {
        let p = build_profile(&ProfileSpec::bump_on_tail()).unwrap();
        for order in [0u8, 1, 2] {
            for (k, lambda) in [
                (0.5, Complex64::new(0.7, 0.2)),
                (2.0, Complex64::new(-1.0, 1.0)),
                (7.0, Complex64::new(1.0, 1.0)),
            ] {
                let a = phi_fun(&p, k, lambda, order).unwrap();
                let b = phi_fun_alt(&p, k, lambda, order).unwrap();
                assert!(
                    (a - b).norm() < 1e-7 * (1.0 + a.norm()),
                    "order {order}, k={k}, λ={lambda}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn phi_fun_magnitude_bound_and_decay() {
        let p = maxwellian();
        let c = zone(&p).unwrap().c;
        let lambda = Complex64::new(1.0, 1.0);
        // |Δ − 1| ≤ c/(|λ||Re λ|) uniformly in k.
        for k in [0.3, 1.0, 10.0, 100.0] {
            let f = phi_fun(&p, k, lambda, 0).unwrap();
            assert!(f.norm() <= c / (lambda.norm() * lambda.re.abs()) * (1.0 + 1e-6));
        }
        // Short-wavelength decay at least as fast as k^{−3/2}.
        let mut prev = phi_fun(&p, 10.0, lambda, 0).unwrap().norm();
        for k in [20.0, 40.0, 80.0, 160.0] {
            let cur = phi_fun(&p, k, lambda, 0).unwrap().norm();
            assert!(
                cur / prev <= 2.0_f64.powf(-1.5) * 1.05,
                "decay ratio {} at k = {k}",
                cur / prev
            );
            prev = cur;
        }
    }

    #[test]
    fn zone_constant_and_boundary() {
        let p = maxwellian();
        let z = zone(&p).unwrap();
        assert!((z.c - 1.0).abs() < 1e-10, "c = {}", z.c);

        // τ = 0 boundary height is √c; the curve satisfies σ⁴ + σ²τ² = c².
        let taus: Vec<f64> = (0..50).map(|j| j as f64 * 0.5).collect();
        let pts = zone_boundary(&z, &taus);
        assert!((pts[0].1 - z.c.sqrt()).abs() < 1e-14);
        for &(tau, sigma) in &pts {
            let lhs = sigma.powi(4) + sigma * sigma * tau * tau;
            assert!((lhs - z.c * z.c).abs() < 1e-10 * (1.0 + z.c * z.c));
            // The boundary itself is an fp coin flip, so probe with a small
            // relative margin: just inside the curve (in σ) is outside the
            // zone, just beyond it is inside.
            assert!(!zone_contains(&z, Complex64::new(0.999_999 * sigma, tau)));
            assert!(zone_contains(&z, Complex64::new(1.000_01 * sigma, tau)));
        }

        // Large-τ asymptote σ ≈ c/τ within 1 % by τ = 10√c.
        let tau = 10.0 * z.c.sqrt();
        let sigma = zone_boundary(&z, &[tau])[0].1;
        assert!((sigma - z.c / tau).abs() / (z.c / tau) < 0.01);
        // Small-τ expansion σ ≈ √c − τ²/(4√c) within 1 % of the correction.
        let tau = 0.05 * z.c.sqrt();
        let sigma = zone_boundary(&z, &[tau])[0].1;
        let approx = z.c.sqrt() - tau * tau / (4.0 * z.c.sqrt());
        assert!((sigma - approx).abs() < 0.01 * (z.c.sqrt() - approx).abs() + 1e-12);
    }

    #[test]
    fn short_wavelength_threshold_closed_form_and_scaling() {
        let p = maxwellian();
        let k_star = lemma4_threshold(&p).unwrap();
        let expected = (32.0 / std::f64::consts::PI).powf(0.25);
        assert!((k_star - expected).abs() < 1e-8, "k* = {k_star}");

        // Quadrupling φ quadruples both sup|φ'| and ∫|φ|, so the threshold
        // scales by 16^{1/4} = 2.
        let scaled = build_profile(&ProfileSpec::maxwellian().with("n", 4.0)).unwrap();
        let k4 = lemma4_threshold(&scaled).unwrap();
        assert!((k4 - 2.0 * k_star).abs() < 1e-8);

        // Sanity: ∫|φ| = 2/√π and sup|φ'| = 2/√π reproduce the closed form.
        let m0 = moment(&p, Moment::IntAbsPhi).unwrap();
        let m1 = moment(&p, Moment::MaxAbsPhi1).unwrap();
        assert!((m0 - 2.0 / SQRT_PI).abs() < 1e-10);
        assert!((m1 - 2.0 / SQRT_PI).abs() < 1e-10);
    }

    #[test]
    fn long_wavelength_continuity() {
        // Δ(k, λ) → Δ(0, λ) as k ↓ 0, monotonically in the sampled ks, in
        // both half-planes.
        let p = maxwellian();
        for lambda in [
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(2.0, 0.0),
        ] {
            let limit = delta_k0(&p, lambda).unwrap();
            let mut prev_gap = f64::INFINITY;
            for k in [1e-1, 1e-2, 1e-3] {
                let gap = (delta(&p, k, lambda).unwrap() - limit).norm();
                assert!(gap < prev_gap, "gap {gap} did not shrink at k = {k}");
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-4, "gap at k = 1e−3 is {prev_gap}");
        }
    }
}
