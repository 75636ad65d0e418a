//! Velocity-space equilibria and the structural quantities the stability
//! theory reads off them.
//!
//! A profile bundles the equilibrium distribution `f0(v)` (when available)
//! with its derivative `φ = f0'` — the function that actually enters the
//! dispersion relation — plus the second and third derivatives, a finite
//! support interval outside which `|φ|` is negligible, and certified bounds
//! on everything that leaks past that interval.
//!
//! Built-in families:
//!
//! * `maxwellian` — a single Gaussian hump `n·N(u, σ²)`;
//! * `two_stream` — symmetric pair `(n/2)·N(±u, σ²)`;
//! * `bump_on_tail` — bulk plus drifting minority hump;
//! * `gaussian_mixture` — arbitrary positive Gaussian combination;
//! * `tabulated` — sampled `f0` interpolated by a natural cubic spline;
//! * `signed_synthetic` — supplies `φ` directly (no `f0`), used to probe the
//!   long-wavelength branch where `∫ v φ dv > 0` forces instability.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_line_with_breakpoints;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// |φ(s)| must sit below `ROOT_TOL · max|φ|` for `s` to count as a zero.
const ROOT_TOL: f64 = 1e-12;
/// Zeros with `|φ'(s)| < DEGENERACY_TOL · max|φ'|` are rejected as degenerate.
const DEGENERACY_TOL: f64 = 1e-8;
/// Relative floor defining the support: `|φ| < 1e−14 · max|φ|` outside it.
const TAIL_EPS_REL: f64 = 1e-14;
/// Bisection tolerance (velocity units) for level-set boundaries.
const LEVEL_TOL: f64 = 1e-10;
/// Grid resolution for the zero/extremum scans over the support.
const SCAN_POINTS: usize = 8192;

/// Declarative description of an equilibrium, deserializable from JSON:
/// `{"kind": "...", "params": {...}, "table": [[v, f0], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProfileSpec {
    pub kind: Kind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

/// Equilibrium family selector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Maxwellian,
    TwoStream,
    BumpOnTail,
    GaussianMixture,
    Tabulated,
    SignedSynthetic,
}

impl ProfileSpec {
    /// Unit-density Maxwellian `f0 = e^{−v²}/√π` (σ = 1/√2).
    pub fn maxwellian() -> Self {
        ProfileSpec {
            kind: Kind::Maxwellian,
            params: BTreeMap::new(),
            table: None,
        }
    }

    /// Symmetric counter-streaming pair with beam speed `u`.
    pub fn two_stream(u: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("u".to_string(), u);
        ProfileSpec {
            kind: Kind::TwoStream,
            params,
            table: None,
        }
    }

    /// Bulk plus weak drifting hump with the default parameter set.
    pub fn bump_on_tail() -> Self {
        ProfileSpec {
            kind: Kind::BumpOnTail,
            params: BTreeMap::new(),
            table: None,
        }
    }

    /// Mixture of Gaussian humps, one `(n, u, σ)` triple each.
    pub fn gaussian_mixture(components: &[(f64, f64, f64)]) -> Self {
        let mut params = BTreeMap::new();
        for (i, (n, u, sigma)) in components.iter().enumerate() {
            let j = i + 1;
            params.insert(format!("n{j}"), *n);
            params.insert(format!("u{j}"), *u);
            params.insert(format!("sigma{j}"), *sigma);
        }
        ProfileSpec {
            kind: Kind::GaussianMixture,
            params,
            table: None,
        }
    }

    /// Odd synthetic derivative `φ(v) = a (v−u) e^{−(v−u)²/(2σ²)}` with the
    /// default `a = 2, u = 0, σ = 1/√2`, i.e. `φ = 2v e^{−v²}`.
    pub fn signed_synthetic() -> Self {
        ProfileSpec {
            kind: Kind::SignedSynthetic,
            params: BTreeMap::new(),
            table: None,
        }
    }

    /// Tabulated `f0` samples, strictly increasing in `v`.
    pub fn tabulated(table: Vec<[f64; 2]>) -> Self {
        ProfileSpec {
            kind: Kind::Tabulated,
            params: BTreeMap::new(),
            table: Some(table),
        }
    }

    /// Insert or overwrite a scalar parameter, builder-style.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// One Gaussian hump of the distribution: `n · N(u, σ²)`.
#[derive(Debug, Clone, Copy)]
struct Hump {
    n: f64,
    u: f64,
    sigma: f64,
}

impl Hump {
    fn f0(&self, v: f64) -> f64 {
        let w = (v - self.u) / self.sigma;
        self.n / (self.sigma * SQRT_2PI) * (-0.5 * w * w).exp()
    }
    fn phi(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        -self.n * w / (self.sigma.powi(3) * SQRT_2PI) * (-0.5 * t * t).exp()
    }
    fn phi1(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        -self.n / (self.sigma.powi(3) * SQRT_2PI) * (1.0 - t * t) * (-0.5 * t * t).exp()
    }
    fn phi2(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        self.n * w / (self.sigma.powi(5) * SQRT_2PI) * (3.0 - t * t) * (-0.5 * t * t).exp()
    }
    /// Coefficient `amp` of the envelope `|φ| ≤ amp·|v−u|·e^{−(v−u)²/(2σ²)}`.
    fn amp(&self) -> f64 {
        self.n / (self.sigma.powi(3) * SQRT_2PI)
    }
}

/// Synthetic derivative-only hump `φ(v) = a (v−u) e^{−(v−u)²/(2σ²)}`.
#[derive(Debug, Clone, Copy)]
struct SignedHump {
    a: f64,
    u: f64,
    sigma: f64,
}

impl SignedHump {
    fn phi(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        self.a * w * (-0.5 * t * t).exp()
    }
    fn phi1(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        self.a * (1.0 - t * t) * (-0.5 * t * t).exp()
    }
    fn phi2(&self, v: f64) -> f64 {
        let w = v - self.u;
        let t = w / self.sigma;
        self.a * w / (self.sigma * self.sigma) * (t * t - 3.0) * (-0.5 * t * t).exp()
    }
}

/// Natural cubic spline through `(x_i, y_i)` with analytic derivatives.
#[derive(Debug, Clone)]
struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots (natural: zero at both ends).
    m: Vec<f64>,
}

impl CubicSpline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> CubicSpline {
        let n = x.len();
        debug_assert!(n >= 3 && y.len() == n);
        // Thomas solve for the interior second derivatives.
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        let mut m = vec![0.0; n];
        // Forward sweep over rows 1..n−1 (rows 0 and n−1 are the natural
        // boundary M = 0 and never enter).
        for i in 2..n - 1 {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let upper = if i + 1 <= n - 2 { sup[i] * m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        CubicSpline { x, y, m }
    }

    fn segment(&self, v: f64) -> usize {
        match self.x.binary_search_by(|p| p.total_cmp(&v)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.x.len() - 2),
        }
    }

    fn in_range(&self, v: f64) -> bool {
        v >= self.x[0] && v <= self.x[self.x.len() - 1]
    }

    fn eval(&self, v: f64) -> f64 {
        if !self.in_range(v) {
            return 0.0;
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - v) / h;
        let b = (v - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn deriv1(&self, v: f64) -> f64 {
        if !self.in_range(v) {
            return 0.0;
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - v) / h;
        let b = (v - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    fn deriv2(&self, v: f64) -> f64 {
        if !self.in_range(v) {
            return 0.0;
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - v) / h;
        let b = (v - self.x[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }

    fn deriv3(&self, v: f64) -> f64 {
        if !self.in_range(v) {
            return 0.0;
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        (self.m[i + 1] - self.m[i]) / h
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Gaussians(Vec<Hump>),
    Signed(SignedHump),
    Spline(CubicSpline),
}

/// A built equilibrium: evaluators plus certified support/tail metadata.
#[derive(Debug, Clone)]
pub struct VelocityProfile {
    repr: Repr,
    support: (f64, f64),
    tail_eps: f64,
    max_abs_phi: f64,
}

impl VelocityProfile {
    /// The distribution `f0(v)` itself, when the family supplies one.
    pub fn f0(&self, v: f64) -> Option<f64> {
        match &self.repr {
            Repr::Gaussians(humps) => Some(humps.iter().map(|h| h.f0(v)).sum()),
            Repr::Signed(_) => None,
            Repr::Spline(s) => Some(s.eval(v)),
        }
    }

    /// `φ(v) = f0'(v)`, the kernel of the dispersion integral.
    pub fn phi(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Gaussians(humps) => humps.iter().map(|h| h.phi(v)).sum(),
            Repr::Signed(h) => h.phi(v),
            Repr::Spline(s) => s.deriv1(v),
        }
    }

    /// `φ'(v)`.
    pub fn phi1(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Gaussians(humps) => humps.iter().map(|h| h.phi1(v)).sum(),
            Repr::Signed(h) => h.phi1(v),
            Repr::Spline(s) => s.deriv2(v),
        }
    }

    /// `φ''(v)`.
    pub fn phi2(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Gaussians(humps) => humps.iter().map(|h| h.phi2(v)).sum(),
            Repr::Signed(h) => h.phi2(v),
            Repr::Spline(s) => s.deriv3(v),
        }
    }

    /// True when [`VelocityProfile::f0`] returns values.
    pub fn has_density(&self) -> bool {
        !matches!(self.repr, Repr::Signed(_))
    }

    /// Interval outside which `|φ| < tail_eps`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// The absolute tail threshold `1e−14 · max|φ|`.
    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    /// Supremum of `|φ|` over the line.
    pub fn max_abs_phi(&self) -> f64 {
        self.max_abs_phi
    }

    /// Characteristic hump width, used for grid padding.
    pub fn width(&self) -> f64 {
        match &self.repr {
            Repr::Gaussians(humps) => humps
                .iter()
                .map(|h| h.sigma)
                .fold(0.0_f64, f64::max),
            Repr::Signed(h) => h.sigma,
            Repr::Spline(s) => (s.x[s.x.len() - 1] - s.x[0]) / 8.0,
        }
    }

    /// The reflected equilibrium `ṽ = −v`, i.e. `f̃0(v) = f0(−v)` and
    /// `φ̃(v) = −φ(−v)`.  Analysis at negative wave numbers reduces to the
    /// reflected profile at `|k|`.
    pub fn reflected(&self) -> VelocityProfile {
        let repr = match &self.repr {
            Repr::Gaussians(humps) => Repr::Gaussians(
                humps
                    .iter()
                    .map(|h| Hump {
                        n: h.n,
                        u: -h.u,
                        sigma: h.sigma,
                    })
                    .collect(),
            ),
            Repr::Signed(h) => Repr::Signed(SignedHump {
                a: h.a,
                u: -h.u,
                sigma: h.sigma,
            }),
            Repr::Spline(s) => {
                let mut x: Vec<f64> = s.x.iter().rev().map(|v| -v).collect();
                let mut y: Vec<f64> = s.y.iter().rev().copied().collect();
                // Rebuild rather than mirror coefficients so knot bookkeeping
                // stays in one place.
                let spline = CubicSpline::new(std::mem::take(&mut x), std::mem::take(&mut y));
                Repr::Spline(spline)
            }
        };
        VelocityProfile {
            repr,
            support: (-self.support.1, -self.support.0),
            tail_eps: self.tail_eps,
            max_abs_phi: self.max_abs_phi,
        }
    }

    /// Certified upper bound on `∫_{v<lo} |φ||v|^p dv + ∫_{v>hi} |φ||v|^p dv`
    /// for `p ∈ {0, 1, 2, 3}`.  Zero for tabulated profiles (φ vanishes
    /// outside the table).
    pub fn tail_weighted_bound(&self, lo: f64, hi: f64, p: u32) -> f64 {
        match &self.repr {
            Repr::Spline(_) => 0.0,
            Repr::Gaussians(humps) => humps
                .iter()
                .map(|h| hump_tail_bound(h.amp(), h.u, h.sigma, lo, hi, p))
                .sum(),
            Repr::Signed(h) => hump_tail_bound(h.a.abs(), h.u, h.sigma, lo, hi, p),
        }
    }

    /// Interior points where `φ` changes sign (no degeneracy checks); shared
    /// by the moment quadrature (|φ| kinks) and the critical-point finder.
    pub(crate) fn phi_zeros(&self) -> Vec<f64> {
        let (lo, hi) = self.support;
        let n = SCAN_POINTS;
        let h = (hi - lo) / n as f64;
        let mut zeros = Vec::new();
        let mut prev_v = lo;
        let mut prev_f = self.phi(prev_v);
        for j in 1..=n {
            let v = lo + h * j as f64;
            let f = self.phi(v);
            if prev_f == 0.0 {
                // Grid point exactly on a zero: take it directly.
                if zeros.last().map_or(true, |&z: &f64| (prev_v - z).abs() > h * 0.5) {
                    zeros.push(prev_v);
                }
            } else if prev_f * f < 0.0 {
                zeros.push(bisect_zero(|t| self.phi(t), prev_v, v));
            }
            prev_v = v;
            prev_f = f;
        }
        zeros
    }
}

/// Upper bound on `∫ amp·|v−u| e^{−(v−u)²/(2σ²)} |v|^p dv` outside `[lo, hi]`.
///
/// Uses closed-form Gaussian tail moments with `erfc(t) ≤ e^{−t²}`, so the
/// result is a genuine (slightly loose) upper bound with elementary terms.
fn hump_tail_bound(amp: f64, u: f64, sigma: f64, lo: f64, hi: f64, p: u32) -> f64 {
    // One-sided tail ∫_x^∞ w^m e^{−w²/(2σ²)} dw, valid upper bound for x ≥ 0.
    fn tail_moment(m: u32, x: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let e = (-0.5 * x * x / s2).exp();
        match m {
            0 => sigma * (std::f64::consts::PI / 2.0).sqrt() * e, // erfc bound
            1 => s2 * e,
            _ => s2 * (x.powi(m as i32 - 1) * e + (m as f64 - 1.0) * tail_moment(m - 2, x, sigma)),
        }
    }
    // Bound for one side at centered distance x = |boundary − u| ≥ 0:
    // |v|^p ≤ (|w| + |u|)^p expanded binomially.
    let side = |x: f64| -> f64 {
        let x = x.max(0.0);
        let mut total = 0.0;
        let ua = u.abs();
        for j in 0..=p {
            let binom = match (p, j) {
                (_, 0) => 1.0,
                (1, 1) => 1.0,
                (2, 1) => 2.0,
                (2, 2) => 1.0,
                (3, 1) => 3.0,
                (3, 2) => 3.0,
                (3, 3) => 1.0,
                _ => 1.0,
            };
            total += binom * ua.powi((p - j) as i32) * tail_moment(j + 1, x, sigma);
        }
        amp * total
    };
    // If a boundary is on the "wrong" side of the hump center the one-sided
    // bound below still holds after clamping x to 0 (it then over-counts by
    // at most the full half-mass, which is safe).
    let upper = side(hi - u) * if hi >= u { 1.0 } else { 2.0 };
    let lower = side(u - lo) * if u >= lo { 1.0 } else { 2.0 };
    upper + lower
}

fn bisect_zero<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    if f(b) == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Deterministic golden-section maximization of `f` on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a < 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// Scan `[lo, hi]` on a dense grid and refine every local maximum of `f`,
/// returning the global `(argmax, max)`.
fn grid_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let n = SCAN_POINTS;
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|j| f(lo + h * j as f64)).collect();
    let mut best = (lo, vals[0]);
    for j in 0..=n {
        let is_local_max = (j == 0 || vals[j] >= vals[j - 1]) && (j == n || vals[j] >= vals[j + 1]);
        if !is_local_max {
            continue;
        }
        let a = lo + h * (j.saturating_sub(1)) as f64;
        let b = lo + h * ((j + 1).min(n)) as f64;
        let (x, fx) = golden_max(&f, a, b);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

fn get_param(
    params: &BTreeMap<String, f64>,
    key: &str,
    default: Option<f64>,
    op: &'static str,
) -> Result<f64> {
    match (params.get(key), default) {
        (Some(&v), _) => Ok(v),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::InvalidParameter {
            op,
            field: "params",
            message: format!("missing required parameter `{key}`"),
        }),
    }
}

fn reject_unknown_keys(
    params: &BTreeMap<String, f64>,
    allowed: &dyn Fn(&str) -> bool,
) -> Result<()> {
    for key in params.keys() {
        if !allowed(key) {
            return Err(Error::InvalidParameter {
                op: "build_profile",
                field: "params",
                message: format!("unknown parameter `{key}`"),
            });
        }
    }
    Ok(())
}

/// Build and validate a [`VelocityProfile`] from its declarative spec.
pub fn build_profile(spec: &ProfileSpec) -> Result<VelocityProfile> {
    const OP: &str = "build_profile";
    let default_sigma = std::f64::consts::FRAC_1_SQRT_2;
    let repr = match spec.kind {
        Kind::Maxwellian => {
            reject_unknown_keys(&spec.params, &|k| matches!(k, "n" | "u" | "sigma"))?;
            let n = get_param(&spec.params, "n", Some(1.0), OP)?;
            let u = get_param(&spec.params, "u", Some(0.0), OP)?;
            let sigma = get_param(&spec.params, "sigma", Some(default_sigma), OP)?;
            validate_humps(&[(n, u, sigma)])?;
            Repr::Gaussians(vec![Hump { n, u, sigma }])
        }
        Kind::TwoStream => {
            reject_unknown_keys(&spec.params, &|k| matches!(k, "n" | "u" | "sigma"))?;
            let n = get_param(&spec.params, "n", Some(1.0), OP)?;
            let u = get_param(&spec.params, "u", None, OP)?;
            let sigma = get_param(&spec.params, "sigma", Some(default_sigma), OP)?;
            validate_humps(&[(n, u, sigma)])?;
            Repr::Gaussians(vec![
                Hump {
                    n: 0.5 * n,
                    u,
                    sigma,
                },
                Hump {
                    n: 0.5 * n,
                    u: -u,
                    sigma,
                },
            ])
        }
        Kind::BumpOnTail => {
            reject_unknown_keys(&spec.params, &|k| {
                matches!(k, "n1" | "u1" | "sigma1" | "n2" | "u2" | "sigma2")
            })?;
            let n1 = get_param(&spec.params, "n1", Some(0.9), OP)?;
            let u1 = get_param(&spec.params, "u1", Some(0.0), OP)?;
            let s1 = get_param(&spec.params, "sigma1", Some(default_sigma), OP)?;
            let n2 = get_param(&spec.params, "n2", Some(0.1), OP)?;
            let u2 = get_param(&spec.params, "u2", Some(3.5), OP)?;
            let s2 = get_param(&spec.params, "sigma2", Some(0.5), OP)?;
            validate_humps(&[(n1, u1, s1), (n2, u2, s2)])?;
            Repr::Gaussians(vec![
                Hump {
                    n: n1,
                    u: u1,
                    sigma: s1,
                },
                Hump {
                    n: n2,
                    u: u2,
                    sigma: s2,
                },
            ])
        }
        Kind::GaussianMixture => {
            let mut humps = Vec::new();
            let mut i = 1;
            loop {
                let has_any = spec.params.contains_key(&format!("n{i}"))
                    || spec.params.contains_key(&format!("u{i}"))
                    || spec.params.contains_key(&format!("sigma{i}"));
                if !has_any {
                    break;
                }
                let n = get_param_owned(&spec.params, &format!("n{i}"), OP)?;
                let u = get_param_owned(&spec.params, &format!("u{i}"), OP)?;
                let sigma = get_param_owned(&spec.params, &format!("sigma{i}"), OP)?;
                humps.push(Hump { n, u, sigma });
                i += 1;
            }
            if humps.is_empty() {
                return Err(Error::invalid(
                    OP,
                    "params",
                    "gaussian_mixture needs at least one (n1, u1, sigma1) component",
                ));
            }
            let expected = humps.len() * 3;
            if spec.params.len() != expected {
                return Err(Error::invalid(
                    OP,
                    "params",
                    format!(
                        "expected exactly {} contiguous component parameters, found {}",
                        expected,
                        spec.params.len()
                    ),
                ));
            }
            let triples: Vec<(f64, f64, f64)> =
                humps.iter().map(|h| (h.n, h.u, h.sigma)).collect();
            validate_humps(&triples)?;
            Repr::Gaussians(humps)
        }
        Kind::SignedSynthetic => {
            reject_unknown_keys(&spec.params, &|k| matches!(k, "a" | "u" | "sigma"))?;
            let a = get_param(&spec.params, "a", Some(2.0), OP)?;
            let u = get_param(&spec.params, "u", Some(0.0), OP)?;
            let sigma = get_param(&spec.params, "sigma", Some(default_sigma), OP)?;
            if a == 0.0 || !a.is_finite() {
                return Err(Error::invalid(OP, "a", "amplitude must be finite and nonzero"));
            }
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::invalid(OP, "sigma", format!("width must be positive, got {sigma}")));
            }
            if !u.is_finite() {
                return Err(Error::invalid(OP, "u", "center must be finite"));
            }
            Repr::Signed(SignedHump { a, u, sigma })
        }
        Kind::Tabulated => {
            if !spec.params.is_empty() {
                return Err(Error::invalid(OP, "params", "tabulated profiles take no scalar parameters"));
            }
            let table = spec.table.as_ref().ok_or_else(|| {
                Error::invalid(OP, "table", "tabulated profiles require a `table` of [v, f0] rows")
            })?;
            Repr::Spline(build_spline(table)?)
        }
    };
    if spec.kind != Kind::Tabulated && spec.table.is_some() {
        return Err(Error::invalid(
            OP,
            "table",
            "only tabulated profiles accept a `table`",
        ));
    }

    // Support and extrema: coarse bracket first, then certified refinement.
    let (scan_lo, scan_hi) = coarse_range(&repr);
    let probe = VelocityProfile {
        repr,
        support: (scan_lo, scan_hi),
        tail_eps: 0.0,
        max_abs_phi: 0.0,
    };
    let (_, max_abs_phi) = grid_max(|v| probe.phi(v).abs(), scan_lo, scan_hi);
    if !(max_abs_phi > 0.0) || !max_abs_phi.is_finite() {
        return Err(Error::invalid(
            OP,
            "params",
            "profile derivative is identically zero or non-finite over its range",
        ));
    }
    let tail_eps = TAIL_EPS_REL * max_abs_phi;
    let support = match &probe.repr {
        Repr::Spline(s) => (s.x[0], s.x[s.x.len() - 1]),
        _ => {
            let env = |v: f64| probe.phi(v).abs();
            let lo = shrink_support(&env, scan_lo, scan_hi, tail_eps, true);
            let hi = shrink_support(&env, scan_lo, scan_hi, tail_eps, false);
            (lo, hi)
        }
    };
    Ok(VelocityProfile {
        support,
        tail_eps,
        max_abs_phi,
        ..probe
    })
}

fn get_param_owned(params: &BTreeMap<String, f64>, key: &str, op: &'static str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::InvalidParameter {
        op,
        field: "params",
        message: format!("missing component parameter `{key}`"),
    })
}

fn validate_humps(triples: &[(f64, f64, f64)]) -> Result<()> {
    const OP: &str = "build_profile";
    let mut any_positive = false;
    for &(n, u, sigma) in triples {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::invalid(OP, "n", format!("density weight must be ≥ 0, got {n}")));
        }
        if n > 0.0 {
            any_positive = true;
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(OP, "sigma", format!("width must be positive, got {sigma}")));
        }
        if !u.is_finite() {
            return Err(Error::invalid(OP, "u", "center must be finite"));
        }
    }
    if !any_positive {
        return Err(Error::invalid(OP, "n", "at least one component must have positive density"));
    }
    Ok(())
}

/// Generous bracket guaranteed to contain the support.
fn coarse_range(repr: &Repr) -> (f64, f64) {
    match repr {
        Repr::Gaussians(humps) => {
            let lo = humps
                .iter()
                .map(|h| h.u - 12.0 * h.sigma)
                .fold(f64::INFINITY, f64::min);
            let hi = humps
                .iter()
                .map(|h| h.u + 12.0 * h.sigma)
                .fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        Repr::Signed(h) => (h.u - 12.0 * h.sigma, h.u + 12.0 * h.sigma),
        Repr::Spline(s) => (s.x[0], s.x[s.x.len() - 1]),
    }
}

/// Find the point where the envelope drops below `eps`, approaching from
/// outside the bracket so the support is as tight as the threshold allows.
fn shrink_support<F: Fn(f64) -> f64>(env: &F, lo: f64, hi: f64, eps: f64, left: bool) -> f64 {
    // March inward from the bracket edge until the envelope exceeds eps,
    // then bisect the boundary in the last step.
    let n = 4096;
    let h = (hi - lo) / n as f64;
    if left {
        let mut prev = lo;
        for j in 1..=n {
            let v = lo + h * j as f64;
            if env(v) > eps {
                // Boundary in [prev, v].
                let mut a = prev;
                let mut b = v;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if env(mid) > eps {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return a;
            }
            prev = v;
        }
        lo
    } else {
        let mut prev = hi;
        for j in 1..=n {
            let v = hi - h * j as f64;
            if env(v) > eps {
                let mut a = prev;
                let mut b = v;
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if env(mid) > eps {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return a;
            }
            prev = v;
        }
        hi
    }
}

/// Spline refinement factor: the raw table is resampled onto a grid this
/// many times finer (local 6-point Lagrange) before the natural cubic spline
/// is built.  Needed because the derivative of a cubic spline on the raw
/// grid carries an O(h³) error with a constant (Hall–Meyer) too large for
/// the accuracy target at realistic table resolutions.
const SPLINE_REFINE: usize = 4;

fn build_spline(table: &[[f64; 2]]) -> Result<CubicSpline> {
    const OP: &str = "build_profile";
    if table.len() < 8 {
        return Err(Error::invalid(
            OP,
            "table",
            format!("need at least 8 rows, got {}", table.len()),
        ));
    }
    let mut max_f = 0.0_f64;
    for w in table.windows(2) {
        if !(w[1][0] > w[0][0]) {
            return Err(Error::invalid(
                OP,
                "table",
                format!("velocities must be strictly increasing: {} then {}", w[0][0], w[1][0]),
            ));
        }
    }
    for row in table {
        if !row[0].is_finite() || !row[1].is_finite() {
            return Err(Error::invalid(OP, "table", "entries must be finite"));
        }
        if row[1] < 0.0 {
            return Err(Error::invalid(
                OP,
                "table",
                format!("f0 must be nonnegative, got {} at v = {}", row[1], row[0]),
            ));
        }
        max_f = max_f.max(row[1]);
    }
    if max_f == 0.0 {
        return Err(Error::invalid(OP, "table", "f0 is identically zero"));
    }
    let edge_tol = 1e-12 * max_f;
    if table[0][1] > edge_tol || table[table.len() - 1][1] > edge_tol {
        return Err(Error::invalid(
            OP,
            "table",
            "f0 must vanish at the table endpoints (≤ 1e-12 · max f0)",
        ));
    }

    // Local 6-point Lagrange resampling onto the refined grid.
    let xs: Vec<f64> = table.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = table.iter().map(|r| r[1]).collect();
    let lagrange = |v: f64| -> f64 {
        let i = match xs.binary_search_by(|p| p.total_cmp(&v)) {
            Ok(i) => return ys[i],
            Err(i) => i,
        };
        let lo = i.saturating_sub(3).min(xs.len() - 6);
        let window = lo..lo + 6;
        let mut total = 0.0;
        for j in window.clone() {
            let mut lj = 1.0;
            for l in window.clone() {
                if l != j {
                    lj *= (v - xs[l]) / (xs[j] - xs[l]);
                }
            }
            total += lj * ys[j];
        }
        total
    };
    let mut fine_x = Vec::with_capacity((table.len() - 1) * SPLINE_REFINE + 1);
    let mut fine_y = Vec::with_capacity(fine_x.capacity());
    for seg in 0..table.len() - 1 {
        let (a, b) = (xs[seg], xs[seg + 1]);
        for j in 0..SPLINE_REFINE {
            let t = j as f64 / SPLINE_REFINE as f64;
            let v = a + (b - a) * t;
            fine_x.push(v);
            fine_y.push(if j == 0 { ys[seg] } else { lagrange(v) });
        }
    }
    fine_x.push(xs[xs.len() - 1]);
    fine_y.push(ys[ys.len() - 1]);
    Ok(CubicSpline::new(fine_x, fine_y))
}

/// Structural moments of `φ` used across the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `∫ φ dv` (must vanish for any integrable equilibrium derivative).
    IntPhi,
    /// `∫ v φ dv` — the sign decides the long-wavelength branch.
    IntVPhi,
    /// `∫ |v||φ| dv` — the spectrum-free-zone constant.
    IntAbsVAbsPhi,
    /// `∫ |φ| dv`.
    IntAbsPhi,
    /// `∫ |v|³|φ| dv`.
    IntAbsV3AbsPhi,
    /// `sup |φ'|` (not an integral; refined scan).
    MaxAbsPhi1,
}

/// Evaluate a structural moment with certified error below
/// `1e−10 · (1 + |value|)`.
pub fn moment(p: &VelocityProfile, which: Moment) -> Result<f64> {
    let (lo, hi) = p.support();
    if let Moment::MaxAbsPhi1 = which {
        let (_, m) = grid_max(|v| p.phi1(v).abs(), lo, hi);
        return Ok(m);
    }
    let needs_abs = matches!(
        which,
        Moment::IntAbsVAbsPhi | Moment::IntAbsPhi | Moment::IntAbsV3AbsPhi
    );
    let mut kinks: Vec<f64> = Vec::new();
    if needs_abs {
        kinks = p.phi_zeros();
        kinks.push(0.0);
    }
    let g = |v: f64| -> Complex64 {
        let phi = p.phi(v);
        let x = match which {
            Moment::IntPhi => phi,
            Moment::IntVPhi => v * phi,
            Moment::IntAbsVAbsPhi => v.abs() * phi.abs(),
            Moment::IntAbsPhi => phi.abs(),
            Moment::IntAbsV3AbsPhi => v.abs().powi(3) * phi.abs(),
            Moment::MaxAbsPhi1 => unreachable!(),
        };
        Complex64::new(x, 0.0)
    };
    let mut r = integrate_line_with_breakpoints(g, (lo, hi), &kinks, 3e-11)?;
    let p_weight = match which {
        Moment::IntPhi | Moment::IntAbsPhi => 0,
        Moment::IntVPhi | Moment::IntAbsVAbsPhi => 1,
        Moment::IntAbsV3AbsPhi => 3,
        Moment::MaxAbsPhi1 => unreachable!(),
    };
    r.abs_err += p.tail_weighted_bound(lo, hi, p_weight);
    let value = r.value.re;
    if r.abs_err > 1e-10 * (1.0 + value.abs()) {
        return Err(Error::QuadratureNonConvergent {
            op: "moment",
            abs_err: r.abs_err,
            panel_lo: lo,
            panel_hi: hi,
            panels: r.subdivisions,
        });
    }
    Ok(value)
}

/// Classification of a zero of `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    /// `φ'(s) < 0`: a local maximum of `f0`.
    F0Max,
    /// `φ'(s) > 0`: a local minimum of `f0`.
    F0Min,
}

/// A simple zero `s` of `φ` with its slope `φ'(s)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalPoint {
    pub s: f64,
    pub slope: f64,
    pub kind: CriticalKind,
}

/// All zeros of `φ` in the support, each certified simple.
///
/// Errors with [`Error::DegenerateCriticalPoint`] when any zero (including a
/// tangential touch without sign change) has `|φ'|` below the degeneracy
/// tolerance `1e−8 · max|φ'|`.
pub fn critical_points(p: &VelocityProfile) -> Result<Vec<CriticalPoint>> {
    let max_phi1 = moment(p, Moment::MaxAbsPhi1)?;
    let slope_tol = DEGENERACY_TOL * max_phi1;
    let value_tol = ROOT_TOL * p.max_abs_phi();

    let mut points = Vec::new();
    for s in p.phi_zeros() {
        let value = p.phi(s);
        if value.abs() > value_tol {
            return Err(Error::internal(format!(
                "zero refinement left |phi({s})| = {:.3e} above the tolerance {value_tol:.3e}",
                value.abs()
            )));
        }
        let slope = p.phi1(s);
        if slope.abs() < slope_tol {
            return Err(Error::DegenerateCriticalPoint {
                s,
                slope_abs: slope.abs(),
                tol: slope_tol,
            });
        }
        let kind = if slope < 0.0 {
            CriticalKind::F0Max
        } else {
            CriticalKind::F0Min
        };
        points.push(CriticalPoint { s, slope, kind });
    }

    // Tangential near-zeros without a sign change also break the counting
    // hypotheses; sweep for local minima of |φ| that dip toward zero.
    let (lo, hi) = p.support();
    let n = SCAN_POINTS;
    let h = (hi - lo) / n as f64;
    let suspicious = 1e-5 * p.max_abs_phi();
    let vals: Vec<f64> = (0..=n).map(|j| p.phi(lo + h * j as f64)).collect();
    for j in 1..n {
        let (a, b, c) = (vals[j - 1].abs(), vals[j].abs(), vals[j + 1].abs());
        if b <= a && b <= c && b < suspicious && vals[j - 1] * vals[j + 1] > 0.0 {
            let (_, neg_min) = golden_max(
                &|v: f64| -p.phi(v).abs(),
                lo + h * (j - 1) as f64,
                lo + h * (j + 1) as f64,
            );
            let min_abs = -neg_min;
            let near_known = points
                .iter()
                .any(|cp| (cp.s - (lo + h * j as f64)).abs() < 2.0 * h);
            if !near_known && min_abs < value_tol.max(slope_tol * h) {
                return Err(Error::DegenerateCriticalPoint {
                    s: lo + h * j as f64,
                    slope_abs: 0.0,
                    tol: slope_tol,
                });
            }
        }
    }
    Ok(points)
}

/// For a local maximum `cp` of `f0` and a level `0 < mu < f0(s)`, the nearest
/// points left and right of `s` where `f0` crosses `mu`:
/// `(sup{v < s : f0 ≤ mu}, inf{v > s : f0 ≤ mu})`, each to 1e−10.
pub fn level_widths(p: &VelocityProfile, cp: &CriticalPoint, mu: f64) -> Result<(f64, f64)> {
    const OP: &str = "level_widths";
    if !p.has_density() {
        return Err(Error::DensityUnavailable { op: OP });
    }
    if cp.kind != CriticalKind::F0Max {
        return Err(Error::invalid(OP, "cp", "level widths are defined at maxima of f0"));
    }
    let peak = p.f0(cp.s).expect("density available");
    if !(mu > 0.0 && mu < peak) {
        return Err(Error::invalid(
            OP,
            "mu",
            format!("level must satisfy 0 < mu < f0(s) = {peak}, got {mu}"),
        ));
    }
    let f0 = |v: f64| p.f0(v).expect("density available");
    let step = (p.width() / 64.0).max(1e-6);
    let march = |dir: f64| -> Result<f64> {
        let mut v = cp.s;
        let (lo, hi) = p.support();
        let limit_lo = lo - 8.0 * p.width() - 1.0;
        let limit_hi = hi + 8.0 * p.width() + 1.0;
        loop {
            let next = v + dir * step;
            if next < limit_lo || next > limit_hi {
                return Err(Error::internal(format!(
                    "level {mu} never reached marching from s = {} (direction {dir})",
                    cp.s
                )));
            }
            if f0(next) <= mu {
                // Crossing inside (v, next) (or (next, v) on the left).
                let (mut inside, mut outside) = (v, next);
                for _ in 0..200 {
                    let mid = 0.5 * (inside + outside);
                    if (outside - inside).abs() < LEVEL_TOL {
                        break;
                    }
                    if f0(mid) <= mu {
                        outside = mid;
                    } else {
                        inside = mid;
                    }
                }
                return Ok(0.5 * (inside + outside));
            }
            v = next;
        }
    };
    let left = march(-1.0)?;
    let right = march(1.0)?;
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn maxwellian() -> VelocityProfile {
        build_profile(&ProfileSpec::maxwellian()).unwrap()
    }

    #[test]
    fn maxwellian_closed_forms() {
        let p = maxwellian();
        // f0 = e^{−v²}/√π, φ = −2v e^{−v²}/√π at σ = 1/√2.
        for v in [-2.0f64, -0.5, 0.0, 0.3, 1.7] {
            let f0 = (-v * v).exp() / SQRT_PI;
            let phi = -2.0 * v * (-v * v).exp() / SQRT_PI;
            let phi1 = -2.0 * (1.0 - 2.0 * v * v) * (-v * v).exp() / SQRT_PI;
            let phi2 = 4.0 * v * (3.0 - 2.0 * v * v) * (-v * v).exp() / SQRT_PI;
            assert!((p.f0(v).unwrap() - f0).abs() < 1e-15);
            assert!((p.phi(v) - phi).abs() < 1e-15);
            assert!((p.phi1(v) - phi1).abs() < 1e-14);
            assert!((p.phi2(v) - phi2).abs() < 1e-13);
        }
        assert!(p.has_density());
        let (lo, hi) = p.support();
        assert!(lo < -5.0 && hi > 5.0 && hi < 12.0);
        assert!(p.phi(hi).abs() <= p.tail_eps() * (1.0 + 1e-9));
    }

    #[test]
    fn signed_synthetic_closed_forms() {
        let p = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        for v in [-1.0, 0.2, 2.5] {
            assert!((p.phi(v) - 2.0 * v * (-v * v).exp()).abs() < 1e-15);
        }
        assert!(!p.has_density());
        assert!(p.f0(0.0).is_none());
    }

    #[test]
    fn central_difference_consistency() {
        // φ must be the exact derivative of f0: residual of the central
        // difference is O(h²) with observed order ≥ 1.9.
        let table: Vec<[f64; 2]> = (0..=400)
            .map(|j| {
                let v = -6.0 + 12.0 * j as f64 / 400.0;
                [v, (-v * v).exp() / SQRT_PI]
            })
            .collect();
        let profiles = [
            maxwellian(),
            build_profile(&ProfileSpec::two_stream(2.0)).unwrap(),
            build_profile(&ProfileSpec::tabulated(table)).unwrap(),
        ];
        for p in &profiles {
            // Sample away from spline knots so each stencil stays inside one
            // polynomial piece.
            for v in [-1.702_3, -0.341_1, 0.513_7, 1.290_9] {
                let resid = |h: f64| {
                    let diff = (p.f0(v + h).unwrap() - p.f0(v - h).unwrap()) / (2.0 * h);
                    (p.phi(v) - diff).abs()
                };
                let r3 = resid(1e-3);
                let r4 = resid(1e-4);
                if r3 < 1e-13 {
                    continue; // Already at roundoff; order test meaningless.
                }
                let order = (r3 / r4).log10();
                assert!(
                    order >= 1.9,
                    "observed order {order:.3} at v = {v} (r3 = {r3:.3e}, r4 = {r4:.3e})"
                );
            }
        }
    }

    #[test]
    fn tabulated_maxwellian_matches_analytic_derivative() {
        let table: Vec<[f64; 2]> = (0..=400)
            .map(|j| {
                let v = -6.0 + 12.0 * j as f64 / 400.0;
                [v, (-v * v).exp() / SQRT_PI]
            })
            .collect();
        let p = build_profile(&ProfileSpec::tabulated(table)).unwrap();
        let mut worst = 0.0_f64;
        for j in 0..=10_000 {
            let v = -6.0 + 12.0 * j as f64 / 10_000.0;
            let exact = -2.0 * v * (-v * v).exp() / SQRT_PI;
            worst = worst.max((p.phi(v) - exact).abs());
        }
        assert!(worst < 1e-6, "max |phi − analytic| = {worst:.3e}");
    }

    #[test]
    fn moments_match_closed_forms() {
        let p = maxwellian();
        // ∫φ = 0; ∫vφ = −∫f0 = −1; ∫|v||φ| = 2/√π·∫|v|v e^{−v²}... = 1;
        // ∫|φ| = 2/√π; sup|φ'| = 2/√π at v = 0.
        assert!(moment(&p, Moment::IntPhi).unwrap().abs() < 1e-10);
        assert!((moment(&p, Moment::IntVPhi).unwrap() + 1.0).abs() < 1e-10);
        assert!((moment(&p, Moment::IntAbsVAbsPhi).unwrap() - 1.0).abs() < 1e-10);
        assert!((moment(&p, Moment::IntAbsPhi).unwrap() - 2.0 / SQRT_PI).abs() < 1e-10);
        assert!((moment(&p, Moment::MaxAbsPhi1).unwrap() - 2.0 / SQRT_PI).abs() < 1e-10);
        // ∫|v|³|φ| = (2/√π)∫v⁴e^{−v²}·... = (2/√π)·(3√π/4)·... : oracle below.
        let oracle = brute_moment(&p, |v, phi| v.abs().powi(3) * phi.abs());
        assert!((moment(&p, Moment::IntAbsV3AbsPhi).unwrap() - oracle).abs() < 1e-7);
    }

    /// Plain trapezoid oracle on a fine grid, independent of the engine.
    fn brute_moment(p: &VelocityProfile, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (lo, hi) = (-12.0, 12.0);
        let n = 1_000_000;
        let h = (hi - lo) / n as f64;
        let eval = |v: f64| f(v, p.phi(v));
        let mut sum = 0.5 * (eval(lo) + eval(hi));
        for j in 1..n {
            sum += eval(lo + h * j as f64);
        }
        sum * h
    }

    #[test]
    fn zero_mean_derivative_for_all_presets() {
        let specs = [
            ProfileSpec::maxwellian(),
            ProfileSpec::two_stream(2.0),
            ProfileSpec::two_stream(0.3),
            ProfileSpec::bump_on_tail(),
            ProfileSpec::signed_synthetic(),
            ProfileSpec::gaussian_mixture(&[(0.5, -1.0, 0.6), (0.5, 2.0, 0.9)]),
        ];
        for spec in &specs {
            let p = build_profile(spec).unwrap();
            let total = moment(&p, Moment::IntPhi).unwrap();
            assert!(total.abs() < 1e-10, "{spec:?}: ∫φ = {total:.3e}");
        }
    }

    #[test]
    fn critical_points_of_presets() {
        let p = maxwellian();
        let cps = critical_points(&p).unwrap();
        assert_eq!(cps.len(), 1);
        assert!(cps[0].s.abs() < 1e-12);
        assert_eq!(cps[0].kind, CriticalKind::F0Max);
        assert!((cps[0].slope + 2.0 / SQRT_PI).abs() < 1e-10);

        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let cps = critical_points(&p).unwrap();
        assert_eq!(cps.len(), 3);
        assert!((cps[0].s + 2.0).abs() < 1e-3);
        assert!(cps[1].s.abs() < 1e-12);
        assert!((cps[2].s - 2.0).abs() < 1e-3);
        assert_eq!(cps[0].kind, CriticalKind::F0Max);
        assert_eq!(cps[1].kind, CriticalKind::F0Min);
        assert_eq!(cps[2].kind, CriticalKind::F0Max);

        // Below the hump-merge threshold u = 1/√2 the humps fuse: one max.
        let p = build_profile(&ProfileSpec::two_stream(0.3)).unwrap();
        let cps = critical_points(&p).unwrap();
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::F0Max);
    }

    #[test]
    fn critical_points_match_brute_scan() {
        for spec in [
            ProfileSpec::bump_on_tail(),
            ProfileSpec::two_stream(1.5),
            ProfileSpec::gaussian_mixture(&[(0.6, -1.5, 0.5), (0.4, 1.0, 0.7)]),
        ] {
            let p = build_profile(&spec).unwrap();
            let cps = critical_points(&p).unwrap();
            // Independent oracle: sign changes of φ on a 100k grid.
            let (lo, hi) = p.support();
            let n = 100_000;
            let h = (hi - lo) / n as f64;
            let mut brute = 0usize;
            let mut prev = p.phi(lo);
            for j in 1..=n {
                let f = p.phi(lo + h * j as f64);
                if prev * f < 0.0 {
                    brute += 1;
                }
                prev = f;
            }
            assert_eq!(cps.len(), brute, "{spec:?}");
        }
    }

    #[test]
    fn degenerate_profile_is_rejected() {
        // At exactly the merge threshold u = 1/√2 (σ = 1/√2) the central
        // zero of φ has φ'(0) = 0.
        let spec = ProfileSpec::two_stream(std::f64::consts::FRAC_1_SQRT_2);
        let err = critical_points(&build_profile(&spec).unwrap()).unwrap_err();
        assert!(err.is_hypothesis_violation(), "got {err}");
    }

    #[test]
    fn invalid_specs_name_the_offending_field() {
        let bad_sigma = ProfileSpec::maxwellian().with("sigma", -1.0);
        match build_profile(&bad_sigma).unwrap_err() {
            Error::InvalidParameter { field, .. } => assert_eq!(field, "sigma"),
            other => panic!("unexpected error {other}"),
        }
        let unknown = ProfileSpec::maxwellian().with("temperature", 3.0);
        assert!(matches!(
            build_profile(&unknown).unwrap_err(),
            Error::InvalidParameter { .. }
        ));
        let not_monotone = ProfileSpec::tabulated(vec![
            [0.0, 0.0],
            [1.0, 0.5],
            [0.5, 0.7],
            [2.0, 0.4],
            [3.0, 0.2],
            [4.0, 0.1],
            [5.0, 0.01],
            [6.0, 0.0],
        ]);
        assert!(matches!(
            build_profile(&not_monotone).unwrap_err(),
            Error::InvalidParameter { field: "table", .. }
        ));
    }

    #[test]
    fn level_widths_closed_forms() {
        // Maxwellian at μ = f0(0)/e: e^{−v²} = 1/e ⇒ v = ±1.
        let p = maxwellian();
        let cp = critical_points(&p).unwrap()[0];
        let mu = (1.0_f64).exp().recip() / SQRT_PI;
        let (l, r) = level_widths(&p, &cp, mu).unwrap();
        assert!((l + 1.0).abs() < 1e-9, "left {l}");
        assert!((r - 1.0).abs() < 1e-9, "right {r}");

        // Two-stream peak at half-height: width ≈ 2√(ln 2) (cross-hump term
        // perturbs in the 5th digit at u = 2, hence the 1e−3 tolerance).
        let p = build_profile(&ProfileSpec::two_stream(2.0)).unwrap();
        let cps = critical_points(&p).unwrap();
        let peak = cps[2];
        let mu = 0.5 * p.f0(peak.s).unwrap();
        let (l, r) = level_widths(&p, &peak, mu).unwrap();
        let expected = 2.0 * (2.0_f64.ln()).sqrt();
        assert!(((r - l) - expected).abs() < 1e-3, "width {}", r - l);

        // Monotonicity: higher level, narrower set.
        let (l2, r2) = level_widths(&p, &peak, 1.5 * mu).unwrap();
        assert!(l2 > l && r2 < r);
    }

    #[test]
    fn level_widths_rejects_bad_inputs() {
        let p = maxwellian();
        let cp = critical_points(&p).unwrap()[0];
        assert!(level_widths(&p, &cp, 0.0).is_err());
        assert!(level_widths(&p, &cp, 10.0).is_err());
        let signed = build_profile(&ProfileSpec::signed_synthetic()).unwrap();
        let fake = CriticalPoint {
            s: 0.0,
            slope: -1.0,
            kind: CriticalKind::F0Max,
        };
        assert!(matches!(
            level_widths(&signed, &fake, 0.1).unwrap_err(),
            Error::DensityUnavailable { .. }
        ));
    }

    #[test]
    fn reflection_matches_pointwise() {
        let p = build_profile(&ProfileSpec::bump_on_tail()).unwrap();
        let r = p.reflected();
        for v in [-3.0, -0.4, 0.0, 1.2, 3.8] {
            assert!((r.phi(v) + p.phi(-v)).abs() < 1e-15);
            assert!((r.f0(v).unwrap() - p.f0(-v).unwrap()).abs() < 1e-15);
        }
        let (lo, hi) = p.support();
        assert_eq!(r.support(), (-hi, -lo));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ProfileSpec::two_stream(2.0).with("sigma", 0.8);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ProfileSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let parsed: ProfileSpec =
            serde_json::from_str(r#"{"kind":"maxwellian","params":{"n":1.0}}"#).unwrap();
        assert_eq!(parsed.kind, Kind::Maxwellian);
    }
}
