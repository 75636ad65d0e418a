//! Error type shared by every analysis routine.
//!
//! Errors fall into two families that callers treat differently:
//!
//! * **hypothesis violations** — the input equilibrium fails a structural
//!   assumption of the counting theory (a degenerate critical point, or a
//!   candidate embedded mode sitting on the continuous spectrum).  These are
//!   properties of the problem, not of the numerics, and map to exit code 2
//!   in the command-line tool.
//! * **numeric failures** — quadrature that will not converge, a contour that
//!   passes through a root, invalid parameters, and similar.  Exit code 1.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while analysing a velocity profile.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter fails a precondition.  `op` names the
    /// operation, `field` the offending parameter.
    #[error("{op}: invalid `{field}`: {message}")]
    InvalidParameter {
        op: &'static str,
        field: &'static str,
        message: String,
    },

    /// The adaptive quadrature exhausted its panel budget.  The worst
    /// remaining panel is reported so the failure can be localised.
    #[error(
        "{op}: quadrature did not converge: error estimate {abs_err:.3e} \
         with worst panel [{panel_lo:.6e}, {panel_hi:.6e}] after {panels} panels"
    )]
    QuadratureNonConvergent {
        op: &'static str,
        abs_err: f64,
        panel_lo: f64,
        panel_hi: f64,
        panels: usize,
    },

    /// A zero of phi has |phi'| below the degeneracy tolerance, so the
    /// sign-counting formula for the instability index does not apply.
    #[error(
        "critical point at v = {s:.12} is degenerate: |phi'(s)| = {slope_abs:.3e} \
         is below the tolerance {tol:.3e}; the index count requires simple zeros"
    )]
    DegenerateCriticalPoint { s: f64, slope_abs: f64, tol: f64 },

    /// The real part of the boundary value at a critical point is within the
    /// embedded-mode tolerance of zero: lambda = -i k s is a candidate
    /// spectral point *on* the imaginary axis and the count is unreliable.
    #[error(
        "candidate embedded mode at k = {k}, critical point s = {s:.12}: \
         1 - pv/k^2 = {value:.3e} lies within the tolerance {tol:.1e} of zero"
    )]
    EmbeddedModeCandidate { k: f64, s: f64, value: f64, tol: f64 },

    /// Dispersion-function evaluation was requested too close to the
    /// imaginary axis, where only the one-sided boundary values are defined.
    #[error(
        "{op}: |Re lambda| = {sigma_abs:.3e} is below {min:.1e}; points this \
         close to the imaginary axis require the one-sided boundary values"
    )]
    NearAxis {
        op: &'static str,
        sigma_abs: f64,
        min: f64,
    },

    /// The image of the contour passes through (or nearly through) the
    /// origin, so the winding number is undefined.
    #[error(
        "winding number undefined: |function| = {w_abs:.3e} at contour \
         parameter t = {t:.9} (root on or near the contour)"
    )]
    RootOnContour { t: f64, w_abs: f64 },

    /// Adaptive phase tracking hit its refinement limit without bringing the
    /// phase step below pi/2.
    #[error(
        "contour too coarse near parameter t = {t:.9}: phase step \
         {step:.3} >= pi/2 at the refinement limit"
    )]
    ContourTooCoarse { t: f64, step: f64 },

    /// The requested contour violates a structural requirement (radius too
    /// small, rectangle touching the imaginary axis, too few samples, ...).
    #[error("invalid contour: {message}")]
    ContourInvalid { message: String },

    /// Winding-number bookkeeping lost roots during subdivision.
    #[error("winding mismatch during subdivision: parent box has {parent}, children sum to {children}")]
    WindingMismatch { parent: i64, children: i64 },

    /// An operation needed the distribution f0 itself, but the profile only
    /// supplies its derivative (the signed synthetic family).
    #[error("{op}: profile supplies only phi = f0'; the distribution f0 itself is unavailable")]
    DensityUnavailable { op: &'static str },

    /// Growth-rate fitting could not produce a meaningful slope.
    #[error("growth fit rejected: {message}")]
    FitRejected { message: String },

    /// Newton refinement failed to converge on a bracketed root.
    #[error("newton polish stalled at lambda = {re}+{im}i with residual {residual:.3e}")]
    NewtonStalled { re: f64, im: f64, residual: f64 },

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {message}")]
    Internal { message: String },
}

impl Error {
    /// True for errors that certify a *hypothesis violation* of the counting
    /// theory rather than a numerical breakdown.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCriticalPoint { .. } | Error::EmbeddedModeCandidate { .. }
        )
    }

    pub(crate) fn invalid(op: &'static str, field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            op,
            field,
            message: message.into(),
        }
    }

    pub(crate) fn internal(message: impl Into<String>) -> Self {
        Error::Internal {
            message: message.into(),
        }
    }
}
