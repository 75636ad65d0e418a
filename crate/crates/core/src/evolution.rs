//! Direct time integration of a single spatial mode, independent of the
//! spectral machinery.
//!
//! For one wave number `k` the linearised dynamics of the mode amplitude
//! `f̂(t, v)` and its field `ĝ(t)` are
//!
//! `∂f̂/∂t = −ikv f̂ + φ(v) ĝ`,   `dĝ/dt = ∫ v f̂ dv`,
//!
//! with the field initialised from the charge constraint
//! `ĝ(0) = −(1/(ik)) ∫ f̂(0, v) dv`.  The integrator is classical RK4 over a
//! uniform velocity grid with composite Simpson weights; for analytic data
//! decaying into both tails the grid quadrature is spectrally accurate, and
//! preservation of the charge constraint is monitored as a residual.
//!
//! The same field history can be produced a second way: eliminating `f̂`
//! turns the system into a Volterra equation for the field,
//!
//! `ĝ(t) = ĝ⁰(t) − ∫₀ᵗ (t−s) F̂₀(t−s) ĝ(s) ds`,
//!
//! where `F̂₀(r) = ∫ f0(v) e^{−ikvr} dv` and `ĝ⁰` is the free-streaming
//! field of the initial data.  It is solved by Neumann iteration with
//! trapezoid convolutions.  Agreement between the two routes — and between
//! their fitted growth rates and the dispersion roots — is the module's
//! cross-validation story.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::VelocityProfile;

/// Minimum number of velocity grid points accepted.
pub const MIN_NV: usize = 256;
/// Default velocity resolution (odd, for Simpson weights).
pub const DEFAULT_NV: usize = 513;
/// The grid extends this many profile widths beyond the support.
const GRID_MARGIN_WIDTHS: f64 = 4.0;
/// Field magnitudes beyond this stop the run early.
const OVERFLOW_LIMIT: f64 = 1e280;
/// Fraction of the run excluded from the head of the fit window.
const FIT_SKIP_FRACTION: f64 = 0.2;
/// Fits below this `r²` are flagged inconclusive.
pub const FIT_R2_MIN: f64 = 0.999;
/// Neumann truncation: stop once a term's sup-norm falls below this factor
/// times the larger of the partial sum's and the first term's sup-norms.
const NEUMANN_REL_TOL: f64 = 1e-10;

/// The spectral content of one mode at a single instant.
#[derive(Debug, Clone)]
pub struct ModeState {
    pub k: f64,
    pub v_grid: Vec<f64>,
    pub f_hat: Vec<Complex64>,
    pub g_hat: Complex64,
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveConfig {
    pub t_final: f64,
    pub dt: f64,
    pub n_v: usize,
}

/// The recorded field history of a direct integration.
#[derive(Debug, Clone, Serialize)]
pub struct ModeEvolution {
    pub times: Vec<f64>,
    pub g_hat: Vec<Complex64>,
    pub g_abs: Vec<f64>,
    /// Least-squares slope of `log |ĝ|` over the fit window.
    pub fitted_rate: f64,
    /// Fit window `(t_lo, t_hi)`; the first 20 % of the run is excluded.
    pub fit_window: (f64, f64),
    pub fit_r2: f64,
    /// True when the fit met the `r²` acceptance bar.
    pub conclusive: bool,
    /// Worst observed violation of the charge constraint
    /// `ik ĝ + ∫ f̂ dv = 0`, relative to `1 + |ik ĝ|`.
    pub charge_residual: f64,
    /// Set when the run stopped early on overflow.
    pub truncated: bool,
}

/// Field history from the Volterra route.
#[derive(Debug, Clone, Serialize)]
pub struct VolterraSolution {
    pub times: Vec<f64>,
    pub e_hat: Vec<Complex64>,
    pub terms_used: usize,
    pub converged: bool,
    /// Set when the iteration was still growing at the term budget.
    pub diverged: bool,
}

/// The canonical initial datum `f̂⁰(v) = e^{−v²}`.
pub fn default_initial() -> impl Fn(f64) -> Complex64 {
    |v: f64| Complex64::new((-v * v).exp(), 0.0)
}

/// Uniform velocity grid covering the support plus a four-width margin.
/// `n_v` must be at least [`MIN_NV`]; it is rounded up to odd so the Simpson
/// weights apply.
pub fn velocity_grid(p: &VelocityProfile, n_v: usize) -> Result<Vec<f64>> {
    if n_v < MIN_NV {
        return Err(Error::invalid(
            "velocity_grid",
            "n_v",
            format!("need at least {MIN_NV} points, got {n_v}"),
        ));
    }
    let n = if n_v % 2 == 0 { n_v + 1 } else { n_v };
    let (lo, hi) = p.support();
    let margin = GRID_MARGIN_WIDTHS * p.width();
    let (a, b) = (lo - margin, hi + margin);
    Ok((0..n)
        .map(|i| a + (b - a) * (i as f64) / ((n - 1) as f64))
        .collect())
}

/// Composite Simpson weights for an odd-length uniform grid.
fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    debug_assert!(n % 2 == 1 && n >= 3);
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// The largest time step the integrator accepts: `0.1 / (|k| v_max)`, with
/// `v_max` the outermost grid speed.
pub fn max_stable_dt(p: &VelocityProfile, k: f64, n_v: usize) -> Result<f64> {
    let grid = velocity_grid(p, n_v)?;
    let vmax = grid
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(0.1 / (k.abs() * vmax))
}

impl ModeState {
    /// Sample initial data onto the grid and derive the field from the
    /// charge constraint.
    pub fn new(
        p: &VelocityProfile,
        k: f64,
        f0_hat: impl Fn(f64) -> Complex64,
        n_v: usize,
    ) -> Result<ModeState> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::invalid(
                "evolve_mode",
                "k",
                "a single spatial mode needs a finite nonzero wave number",
            ));
        }
        let v_grid = velocity_grid(p, n_v)?;
        let h = v_grid[1] - v_grid[0];
        let w = simpson_weights(v_grid.len(), h);
        let f_hat: Vec<Complex64> = v_grid.iter().map(|&v| f0_hat(v)).collect();
        let total: Complex64 = f_hat.iter().zip(&w).map(|(f, wi)| f * wi).sum();
        let g_hat = -total / Complex64::new(0.0, k);
        Ok(ModeState {
            k,
            v_grid,
            f_hat,
            g_hat,
        })
    }
}

fn validate_time_grid(
    op: &'static str,
    p: &VelocityProfile,
    k: f64,
    t_final: f64,
    dt: f64,
    n_v: usize,
) -> Result<(Vec<f64>, usize)> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::invalid(op, "t_final", "need a positive finite horizon"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(op, "dt", "need a positive finite step"));
    }
    let grid = velocity_grid(p, n_v)?;
    let dv = grid[1] - grid[0];
    let recurrence = 2.0 * std::f64::consts::PI / (k.abs() * dv);
    if t_final >= recurrence {
        return Err(Error::invalid(
            op,
            "t_final",
            format!(
                "horizon {t_final} reaches the grid recurrence time \
                 2π/(|k|·dv) = {recurrence:.3}; raise n_v or shorten the run"
            ),
        ));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((grid, steps))
}

/// Integrate one mode with RK4.  `f0_hat` supplies the initial data (see
/// [`default_initial`]); the run stops early if the field overflows, and the
/// tail of the recorded history is fitted for a growth rate.
pub fn evolve_mode(
    p: &VelocityProfile,
    k: f64,
    f0_hat: impl Fn(f64) -> Complex64,
    cfg: &EvolveConfig,
) -> Result<ModeEvolution> {
    const OP: &str = "evolve_mode";
    let state = ModeState::new(p, k, &f0_hat, cfg.n_v)?;
    let (_, steps) = validate_time_grid(OP, p, k, cfg.t_final, cfg.dt, cfg.n_v)?;
    let dt_max = max_stable_dt(p, k, cfg.n_v)?;
    if cfg.dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::invalid(
            OP,
            "dt",
            format!(
                "step {} exceeds the stability bound 0.1/(|k|·v_max) = {dt_max:.6e}",
                cfg.dt
            ),
        ));
    }

    let v = &state.v_grid;
    let n = v.len();
    let h = v[1] - v[0];
    let w = simpson_weights(n, h);
    let phi: Vec<f64> = v.iter().map(|&x| p.phi(x)).collect();
    let ik = Complex64::new(0.0, k);

    // One evaluation of the right-hand side into (df, dg).
    let rhs = |f: &[Complex64], g: Complex64, df: &mut [Complex64]| -> Complex64 {
        let mut dg = Complex64::new(0.0, 0.0);
        for i in 0..n {
            df[i] = -ik * v[i] * f[i] + phi[i] * g;
            dg += w[i] * v[i] * f[i];
        }
        dg
    };

    let mut f = state.f_hat.clone();
    let mut g = state.g_hat;
    let mut times = Vec::with_capacity(steps + 1);
    let mut g_series = Vec::with_capacity(steps + 1);
    times.push(0.0);
    g_series.push(g);

    let mut k1 = vec![Complex64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    let mut charge_residual = 0.0f64;
    let mut truncated = false;
    let dt = cfg.dt;
    for step in 1..=steps {
        let g1 = rhs(&f, g, &mut k1);
        for i in 0..n {
            tmp[i] = f[i] + 0.5 * dt * k1[i];
        }
        let g2 = rhs(&tmp, g + 0.5 * dt * g1, &mut k2);
        for i in 0..n {
            tmp[i] = f[i] + 0.5 * dt * k2[i];
        }
        let g3 = rhs(&tmp, g + 0.5 * dt * g2, &mut k3);
        for i in 0..n {
            tmp[i] = f[i] + dt * k3[i];
        }
        let g4 = rhs(&tmp, g + dt * g3, &mut k4);
        for i in 0..n {
            f[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        g += dt / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);

        times.push(step as f64 * dt);
        g_series.push(g);

        if !g.re.is_finite() || !g.im.is_finite() || g.norm() > OVERFLOW_LIMIT {
            truncated = true;
            break;
        }
        if step % 100 == 0 || step == steps {
            let total: Complex64 = f.iter().zip(&w).map(|(fi, wi)| fi * wi).sum();
            let drift = (ik * g + total).norm() / (1.0 + (ik * g).norm());
            charge_residual = charge_residual.max(drift);
        }
    }

    let g_abs: Vec<f64> = g_series.iter().map(|z| z.norm()).collect();
    let t_end = *times.last().expect("at least the initial instant");
    let fit_window = (FIT_SKIP_FRACTION * t_end, t_end);
    let (fitted_rate, fit_r2) = fit_growth(&times, &g_abs, fit_window)?;
    Ok(ModeEvolution {
        times,
        g_hat: g_series,
        g_abs,
        fitted_rate,
        fit_window,
        fit_r2,
        conclusive: fit_r2 >= FIT_R2_MIN,
        charge_residual,
        truncated,
    })
}

/// The free-streaming field `ĝ⁰(t) = −(1/(ik)) ∫ f̂⁰(v) e^{−ikvt} dv` of
/// given initial data, sampled on the standard grid.  This is the source
/// term of the Volterra route.
pub fn free_streaming_field(
    p: &VelocityProfile,
    k: f64,
    f0_hat: impl Fn(f64) -> Complex64,
    n_v: usize,
) -> Result<impl Fn(f64) -> Complex64> {
    let state = ModeState::new(p, k, f0_hat, n_v)?;
    let h = state.v_grid[1] - state.v_grid[0];
    let w = simpson_weights(state.v_grid.len(), h);
    let ik = Complex64::new(0.0, k);
    let grid = state.v_grid;
    let f0 = state.f_hat;
    Ok(move |t: f64| {
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..grid.len() {
            total += w[i] * f0[i] * Complex64::new(0.0, -k * grid[i] * t).exp();
        }
        -total / ik
    })
}

/// Neumann iteration for `x = e0 − K★x`, where `(K★x)[j] = Σᵢ wᵢ K[j−i] x[i] dt`
/// with trapezoid weights on the past.  Returns the partial sum, the number
/// of terms, and the convergence/divergence flags.
pub(crate) fn neumann_volterra(
    kernel: &[Complex64],
    e0: &[Complex64],
    dt: f64,
    max_terms: usize,
) -> (Vec<Complex64>, usize, bool, bool) {
    let n = e0.len();
    let mut sum = e0.to_vec();
    let mut term = e0.to_vec();
    let sup0 = term.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut prev_sup = sup0;
    let mut converged = sup0 == 0.0;
    let mut diverged = false;
    let mut used = 0usize;
    while used < max_terms && !converged {
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for (j, slot) in next.iter_mut().enumerate().skip(1) {
            let mut acc = 0.5 * (kernel[j] * term[0] + kernel[0] * term[j]);
            for i in 1..j {
                acc += kernel[j - i] * term[i];
            }
            *slot = -acc * dt;
        }
        used += 1;
        let sup = next.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if !sup.is_finite() {
            diverged = true;
            break;
        }
        for (s, t) in sum.iter_mut().zip(&next) {
            *s += t;
        }
        let sup_sum = sum.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        term = next;
        if sup <= NEUMANN_REL_TOL * sup_sum.max(sup0) {
            converged = true;
            break;
        }
        if used == max_terms && sup >= prev_sup {
            diverged = true;
        }
        prev_sup = sup;
    }
    (sum, used, converged, diverged)
}

/// Solve the field's Volterra equation by Neumann iteration.  `e0_hat` is
/// the free-streaming field of the initial data (see
/// [`free_streaming_field`]); the velocity grid behind the kernel is the
/// same [`DEFAULT_NV`]-point grid the direct integrator uses, so the two
/// routes are directly comparable.
pub fn volterra_mode(
    p: &VelocityProfile,
    k: f64,
    e0_hat: impl Fn(f64) -> Complex64,
    t_final: f64,
    dt: f64,
    max_terms: usize,
) -> Result<VolterraSolution> {
    const OP: &str = "volterra_mode";
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid(OP, "k", "wave number must be finite and nonzero"));
    }
    if !p.has_density() {
        return Err(Error::DensityUnavailable { op: OP });
    }
    if max_terms == 0 {
        return Err(Error::invalid(OP, "max_terms", "need at least one term"));
    }
    let (grid, steps) = validate_time_grid(OP, p, k, t_final, dt, DEFAULT_NV)?;
    let h = grid[1] - grid[0];
    let w = simpson_weights(grid.len(), h);
    let f0: Vec<f64> = grid
        .iter()
        .map(|&v| p.f0(v).expect("density checked above"))
        .collect();

    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    // K(r) = r·F̂₀(r), F̂₀(r) = ∫ f0 e^{−ikvr} dv on the shared grid.
    let kernel: Vec<Complex64> = times
        .iter()
        .map(|&r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..grid.len() {
                acc += w[i] * f0[i] * Complex64::new(0.0, -k * grid[i] * r).exp();
            }
            r * acc
        })
        .collect();
    let e0: Vec<Complex64> = times.iter().map(|&t| e0_hat(t)).collect();
    let (e_hat, terms_used, converged, diverged) =
        neumann_volterra(&kernel, &e0, dt, max_terms);
    Ok(VolterraSolution {
        times,
        e_hat,
        terms_used,
        converged,
        diverged,
    })
}

/// Least-squares slope and `r²` of `log values` against time, restricted to
/// the window.  A window of constant values fits exactly with slope zero.
pub fn fit_growth(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::invalid(
            "fit_growth",
            "values",
            "times and values must have equal length",
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &g) in times.iter().zip(values.iter()) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::FitRejected {
                message: format!("|ĝ({t})| = {g} is not positive; log-linear fit undefined"),
            });
        }
        xs.push(t);
        ys.push(g.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::FitRejected {
            message: format!("only {n} samples inside the window [{}, {}]", window.0, window.1),
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::FitRejected {
            message: "degenerate window: all samples at one instant".into(),
        });
    }
    // A constant series is an exact fit with zero slope (sxy is then pure
    // floating-point noise, so it must not leak into the slope).
    if syy <= 1e-24 * (1.0 + my * my) * nf {
        return Ok((0.0, 1.0));
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    Ok((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_profile, ProfileSpec};

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[test]
    fn fit_recovers_exact_exponentials() {
        let times: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let pure: Vec<f64> = times.iter().map(|&t| 3.0 * (0.37 * t).exp()).collect();
        let (rate, r2) = fit_growth(&times, &pure, (2.0, 10.0)).unwrap();
        assert!((rate - 0.37).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);

        let wobble: Vec<f64> = times
            .iter()
            .map(|&t| 3.0 * (0.37 * t).exp() * (1.0 + 1e-4 * (5.0 * t).sin()))
            .collect();
        let (rate, r2) = fit_growth(&times, &wobble, (2.0, 10.0)).unwrap();
        assert!((rate - 0.37).abs() < 1e-3);
        assert!(r2 > 0.999);

        let constant = vec![2.5; times.len()];
        let (rate, r2) = fit_growth(&times, &constant, (2.0, 10.0)).unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let times: Vec<f64> = (0..100).map(|i| 0.1 * i as f64).collect();
        let mut vals: Vec<f64> = times.iter().map(|&t| t.exp()).collect();
        assert!(matches!(
            fit_growth(&times, &vals, (100.0, 200.0)),
            Err(Error::FitRejected { .. })
        ));
        vals[50] = 0.0;
        assert!(matches!(
            fit_growth(&times, &vals, (1.0, 9.0)),
            Err(Error::FitRejected { .. })
        ));
    }

    #[test]
    fn initial_field_matches_closed_form() {
        // ∫ e^{−v²} dv = √π, so ĝ(0) = −√π/(ik) = i√π/k.
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let k = 0.3;
        let state = ModeState::new(&p, k, default_initial(), DEFAULT_NV).unwrap();
        let expected = Complex64::new(0.0, SQRT_PI / k);
        assert!(
            (state.g_hat - expected).norm() < 1e-10,
            "got {}, want {expected}",
            state.g_hat
        );
    }

    #[test]
    fn even_initial_data_starts_quadratically() {
        // With even f̂⁰ the field derivative vanishes at t = 0, so the first
        // step's change is O(dt²): halving dt quarters it.
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let k = 0.3;
        let first_step_change = |dt: f64| {
            let cfg = EvolveConfig {
                t_final: 1.0,
                dt,
                n_v: 257,
            };
            let out = evolve_mode(&p, k, default_initial(), &cfg).unwrap();
            (out.g_hat[1] - out.g_hat[0]).norm()
        };
        let ratio = first_step_change(1e-3) / first_step_change(5e-4);
        assert!(
            (3.5..4.5).contains(&ratio),
            "expected quadratic start, ratio {ratio}"
        );
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let k = 0.2;
        let value_at = |dt: f64| {
            let cfg = EvolveConfig {
                t_final: 2.0,
                dt,
                n_v: 257,
            };
            *evolve_mode(&p, k, default_initial(), &cfg)
                .unwrap()
                .g_hat
                .last()
                .unwrap()
        };
        let reference = value_at(1.0 / 640.0);
        let e1 = (value_at(1.0 / 40.0) - reference).norm();
        let e2 = (value_at(1.0 / 80.0) - reference).norm();
        let ratio = e1 / e2;
        assert!(
            ratio > 8.0 && ratio < 40.0,
            "expected ~16× error drop per halving, got {ratio} ({e1} vs {e2})"
        );
    }

    #[test]
    fn growth_rate_is_grid_converged() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let k = 0.2;
        let rate = |n_v: usize| {
            // Long enough that the free-streaming transient (still a few
            // percent of the signal at t ≈ 6) has left the fit window.
            let cfg = EvolveConfig {
                t_final: 60.0,
                dt: 0.04,
                n_v,
            };
            let out = evolve_mode(&p, k, default_initial(), &cfg).unwrap();
            assert!(out.conclusive, "r² = {}", out.fit_r2);
            assert!(out.charge_residual < 1e-10, "charge {}", out.charge_residual);
            out.fitted_rate
        };
        let coarse = rate(257);
        let fine = rate(513);
        assert!(
            ((coarse - fine) / fine).abs() < 5e-3,
            "grid sensitivity: {coarse} vs {fine}"
        );
    }

    #[test]
    fn parameter_validation_names_the_field() {
        let p = build_profile(&ProfileSpec::maxwellian()).unwrap();
        let bad_nv = EvolveConfig {
            t_final: 1.0,
            dt: 1e-3,
            n_v: 100,
        };
        match evolve_mode(&p, 1.0, default_initial(), &bad_nv) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "n_v"),
            other => panic!("expected n_v rejection, got {other:?}"),
        }
        let bad_dt = EvolveConfig {
            t_final: 1.0,
            dt: 1.0,
            n_v: 257,
        };
        match evolve_mode(&p, 1.0, default_initial(), &bad_dt) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "dt"),
            other => panic!("expected dt rejection, got {other:?}"),
        }
        let beyond_recurrence = EvolveConfig {
            t_final: 1e6,
            dt: 1e-3,
            n_v: 257,
        };
        match evolve_mode(&p, 1.0, default_initial(), &beyond_recurrence) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "t_final"),
            other => panic!("expected recurrence rejection, got {other:?}"),
        }
        assert!(evolve_mode(&p, 0.0, default_initial(), &bad_dt).is_err());
    }

    #[test]
    fn zero_kernel_iteration_is_exact() {
        let e0: Vec<Complex64> = (0..100)
            .map(|j| Complex64::new((j as f64 * 0.1).cos(), 0.3 * j as f64))
            .collect();
        let kernel = vec![Complex64::new(0.0, 0.0); e0.len()];
        let (sum, used, converged, diverged) = neumann_volterra(&kernel, &e0, 0.01, 50);
        assert_eq!(sum, e0);
        assert!(converged);
        assert!(!diverged);
        assert_eq!(used, 1);
    }

    #[test]
    fn runaway_kernel_is_flagged_divergent() {
        let n = 200;
        let e0 = vec![Complex64::new(1.0, 0.0); n];
        let kernel = vec![Complex64::new(-100.0, 0.0); n];
        let (_, used, converged, diverged) = neumann_volterra(&kernel, &e0, 0.05, 6);
        assert_eq!(used, 6);
        assert!(!converged);
        assert!(diverged);
    }

    #[test]
    fn volterra_agrees_with_direct_integration() {
        let p = build_profile(&ProfileSpec::maxwellian()).unwrap();
        let k = 1.0;
        let (t_final, dt) = (2.0, 2e-3);
        let cfg = EvolveConfig {
            t_final,
            dt,
            n_v: DEFAULT_NV,
        };
        let direct = evolve_mode(&p, k, default_initial(), &cfg).unwrap();
        let e0 = free_streaming_field(&p, k, default_initial(), DEFAULT_NV).unwrap();
        let volterra = volterra_mode(&p, k, e0, t_final, dt, 200).unwrap();
        assert!(volterra.converged);
        assert!(!volterra.diverged);
        assert_eq!(direct.times.len(), volterra.times.len());
        let sup = direct
            .g_hat
            .iter()
            .zip(&volterra.e_hat)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-4, "routes disagree by {sup}");
    }

    #[test]
    fn overflowing_run_truncates_but_still_fits() {
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let k = 0.2;
        let big = |v: f64| Complex64::new(1e250 * (-v * v).exp(), 0.0);
        let cfg = EvolveConfig {
            t_final: 400.0,
            dt: 0.04,
            n_v: 513,
        };
        let out = evolve_mode(&p, k, big, &cfg).unwrap();
        assert!(out.truncated);
        assert!(*out.times.last().unwrap() < 400.0);
        // The planted growth still dominates the fit.
        assert!(out.fitted_rate > 0.0);
    }

    #[test]
    fn field_requires_density_for_volterra() {
        let p = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        let err = volterra_mode(&p, 0.5, |_| Complex64::new(1.0, 0.0), 1.0, 1e-2, 10).unwrap_err();
        assert!(matches!(err, Error::DensityUnavailable { .. }));
    }
}
