//! Randomised invariants of the dispersion machinery.
//!
//! Each property states something the mathematics guarantees for *every*
//! admissible input, so a single counterexample is a bug, not a tolerance
//! issue.

use num_complex::Complex64;
use proptest::prelude::*;
use vstab_core::dispersion::{delta, zone};
use vstab_core::{
    build_profile, critical_points, moment, CriticalKind, Moment, ProfileSpec, VelocityProfile,
};

fn bump_on_tail() -> VelocityProfile {
    build_profile(&ProfileSpec::bump_on_tail()).expect("preset builds")
}

fn two_stream() -> VelocityProfile {
    build_profile(&ProfileSpec::two_stream(2.0)).expect("preset builds")
}

proptest! {
    /// Conjugating the spectral parameter across the imaginary axis
    /// conjugates the dispersion function — to the last bit, because the
    /// mirrored evaluation walks the identical quadrature panels.
    #[test]
    fn mirror_symmetry_is_bit_exact(
        k_mag in 0.1f64..3.0,
        k_neg in any::<bool>(),
        re_mag in 0.01f64..2.0,
        re_neg in any::<bool>(),
        im in -3.0f64..3.0,
    ) {
        let p = bump_on_tail();
        let k = if k_neg { -k_mag } else { k_mag };
        let re = if re_neg { -re_mag } else { re_mag };
        let lambda = Complex64::new(re, im);
        let a = delta(&p, k, lambda).unwrap().conj();
        let b = delta(&p, k, Complex64::new(-re, im)).unwrap();
        prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
        prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    /// Any Gaussian mixture integrates its derivative to zero, and the
    /// reported critical points are exactly the sign changes of φ: maxima
    /// and minima alternate, the outermost are maxima, and a brute scan
    /// finds the same count wherever the points are resolvable.
    #[test]
    fn mixture_critical_points_match_brute_scan(
        humps in prop::collection::vec(
            (0.2f64..2.0, -3.0f64..3.0, 0.4f64..1.5),
            1..=3,
        ),
    ) {
        let spec = ProfileSpec::gaussian_mixture(&humps);
        let p = match build_profile(&spec) {
            Ok(p) => p,
            // Degenerate stationary structure is a documented refusal,
            // not a property violation.
            Err(_) => return Ok(()),
        };

        let m0 = moment(&p, Moment::IntAbsPhi).unwrap();
        let net = moment(&p, Moment::IntPhi).unwrap();
        prop_assert!(net.abs() <= 1e-10 * (1.0 + m0));

        let cps = critical_points(&p).unwrap();
        prop_assert!(cps.len() % 2 == 1);
        for (i, cp) in cps.iter().enumerate() {
            let expect_max = i % 2 == 0;
            prop_assert_eq!(
                cp.kind == CriticalKind::F0Max,
                expect_max,
                "critical point {} at {} has kind {:?}",
                i, cp.s, cp.kind
            );
            prop_assert!(p.phi(cp.s).abs() <= 1e-8 * p.max_abs_phi());
        }

        // Brute scan, only trusted when the reported points are separated
        // by several grid steps.
        let (lo, hi) = p.support();
        let n = 8192usize;
        let h = (hi - lo) / n as f64;
        let min_gap = cps
            .windows(2)
            .map(|w| w[1].s - w[0].s)
            .fold(f64::INFINITY, f64::min);
        prop_assume!(min_gap > 4.0 * h);
        let mut crossings = 0usize;
        let mut prev = p.phi(lo + 0.5 * h);
        for i in 1..n {
            let cur = p.phi(lo + (i as f64 + 0.5) * h);
            if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
                crossings += 1;
            }
            prev = cur;
        }
        prop_assert_eq!(crossings, cps.len());
    }

    /// The certified far-field estimate: outside the spectrum-free zone
    /// boundary the dispersion function stays within `c/(|λ||Re λ|)` of one,
    /// so it cannot vanish once that bound is below one.
    #[test]
    fn far_field_bound_holds_off_the_zone(
        k in 0.2f64..3.0,
        re_mag in 0.5f64..8.0,
        re_neg in any::<bool>(),
        im in -20.0f64..20.0,
    ) {
        let p = two_stream();
        let c = zone(&p).unwrap().c;
        let re = if re_neg { -re_mag } else { re_mag };
        let lambda = Complex64::new(re, im);
        let bound = c / (lambda.norm() * lambda.re.abs());
        prop_assume!(bound <= 0.5);
        let d = delta(&p, k, lambda).unwrap();
        prop_assert!(
            (d - Complex64::new(1.0, 0.0)).norm() <= bound * (1.0 + 1e-6) + 1e-12,
            "|Δ−1| = {} exceeds bound {}",
            (d - Complex64::new(1.0, 0.0)).norm(),
            bound
        );
        prop_assert!(d.norm() >= 0.5 * (1.0 - 1e-6));
    }
}
