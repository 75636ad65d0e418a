//! `vstab` — command-line stability analysis of 1-D velocity profiles.
//!
//! Exit codes: `0` success, `2` hypothesis violation (degenerate critical
//! point or candidate embedded mode — a property of the input equilibrium),
//! `1` anything else (bad options, malformed profile, numeric failure).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use vstab_core::{build_profile, Error, ProfileSpec, VelocityProfile};

use output::{emit, Document, Format};

/// Inclusive grid `start:stop:count` (e.g. `0.1:2:20`).
#[derive(Debug, Clone, Copy)]
struct Range {
    a: f64,
    b: f64,
    n: usize,
}

impl Range {
    fn grid(&self) -> Vec<f64> {
        commands::grid(self.a, self.b, self.n)
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("expected start:stop:count, got {s:?}"));
    };
    let a: f64 = a.parse().map_err(|e| format!("bad start {a:?}: {e}"))?;
    let b: f64 = b.parse().map_err(|e| format!("bad stop {b:?}: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("bad count {n:?}: {e}"))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err("range endpoints must be finite".to_string());
    }
    if n == 0 {
        return Err("range count must be at least 1".to_string());
    }
    if n > 1 && b < a {
        return Err("range stop must not precede start".to_string());
    }
    Ok(Range { a, b, n })
}

fn parse_f64_list<const N: usize>(s: &str, what: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers ({what}), got {s:?}"));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad number {part:?}: {e}"))?;
    }
    Ok(out)
}

fn parse_box(s: &str) -> Result<[f64; 4], String> {
    parse_f64_list::<4>(s, "sx,sy,ex,ey")
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_f64_list::<2>(s, "two probe values")
}

#[derive(Debug, Args)]
struct Common {
    /// Profile description, JSON: {"kind": "...", "params": {...}}
    #[arg(long, value_name = "FILE")]
    profile: PathBuf,

    /// Output format (CSV columns are documented per command in --help)
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,

    /// Write output to this file instead of stdout
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(
    name = "vstab",
    version,
    about = "Linear stability analysis of 1-D velocity equilibria",
    long_about = "Counts growing modes, certifies dispersion roots, emits Nyquist curves \
                  and spectrum-free-zone boundaries, and cross-checks everything against \
                  direct time integration.\n\nThe VSTAB_THREADS environment variable caps \
                  the per-k fan-out of scan commands."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count growing modes over a wave-number grid.
    ///
    /// CSV columns: k, n_plus, n_minus, n, then (s, penrose, counts) per
    /// critical point.
    Index {
        #[command(flatten)]
        common: Common,
        /// Wave-number grid start:stop:count (inclusive)
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        k_range: Range,
        /// Shorthand for --format json
        #[arg(long)]
        json: bool,
    },
    /// Find and certify every growing root at one wave number.
    ///
    /// CSV columns: re, im, residual, box_winding, newton_iters,
    /// near_marginal.
    Roots {
        #[command(flatten)]
        common: Common,
        /// Wave number
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Search box sx,sy,ex,ey (lower-left and upper-right corners in
        /// the spectral plane); defaults to a box certified to contain
        /// every growing mode
        #[arg(long = "box", value_parser = parse_box, allow_hyphen_values = true)]
        search_box: Option<[f64; 4]>,
        /// Shorthand for --format json
        #[arg(long)]
        json: bool,
    },
    /// Dominant growth rate along a wave-number grid.
    ///
    /// CSV columns: k, re, im (re/im empty where no growing mode exists).
    Growth {
        #[command(flatten)]
        common: Common,
        /// Wave-number grid start:stop:count (inclusive)
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        k_range: Range,
        /// Shorthand for --format csv --output FILE
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Boundary values w(s+i0) along the real line (Nyquist curve data).
    ///
    /// CSV columns: s, re, im.
    Nyquist {
        #[command(flatten)]
        common: Common,
        /// Wave number
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Boundary grid start:stop:count (inclusive)
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        s_range: Range,
    },
    /// Spectrum-free-zone boundary sigma(tau).
    ///
    /// CSV columns: tau, sigma.
    Zone {
        #[command(flatten)]
        common: Common,
        /// Imaginary-part grid start:stop:count (inclusive)
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        tau_range: Range,
    },
    /// Integrate one spatial mode in time and fit its growth rate.
    ///
    /// CSV columns: t, re, im, abs; fitted_rate/fit_r2/conclusive are
    /// appended as `# key,value` lines, and --compare-roots adds
    /// dispersion_rate and rate_ratio.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Wave number
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Time horizon
        #[arg(long = "T", visible_alias = "t-final")]
        t_final: f64,
        /// Time step (must satisfy the advection stability bound)
        #[arg(long)]
        dt: f64,
        /// Velocity grid points (odd; default 513)
        #[arg(long, default_value_t = vstab_core::evolution::DEFAULT_NV)]
        n_v: usize,
        /// Also locate the certified dispersion roots and append the
        /// dominant rate and fitted/dispersion ratio
        #[arg(long)]
        compare_roots: bool,
        /// Shorthand for --format csv --output FILE
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Two-hump geometry, threshold, and sufficient instability conditions.
    ///
    /// CSV columns: k, a, c, b, m, threshold, criterion, n, lemma5, lemma6.
    TwoStream {
        #[command(flatten)]
        common: Common,
        /// Wave number
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Probe the level-pair sufficient condition at heights xi,eta
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        lemma5: Option<[f64; 2]>,
        /// Probe the offset sufficient condition at offsets sigma,tau
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        lemma6: Option<[f64; 2]>,
    },
    /// Check every structural invariant of a profile and print a report.
    ///
    /// CSV columns: field, value.  Exits 1 if any check fails, 2 if the
    /// profile violates a counting hypothesis.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load_profile(path: &PathBuf) -> Result<(VelocityProfile, ProfileSpec), Error> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter {
        op: "cli",
        field: "profile",
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let spec: ProfileSpec = serde_json::from_str(&raw).map_err(|e| Error::InvalidParameter {
        op: "cli",
        field: "profile",
        message: format!("malformed profile JSON in {}: {e}", path.display()),
    })?;
    let profile = build_profile(&spec)?;
    Ok((profile, spec))
}

fn write_out(doc: &Document, format: Format, output: Option<&PathBuf>) -> Result<(), Error> {
    emit(doc, format, output).map_err(|e| Error::InvalidParameter {
        op: "cli",
        field: "output",
        message: format!("cannot write output: {e}"),
    })
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Index {
            common,
            k_range,
            json,
        } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::index(&p, &k_range.grid())?;
            let (format, output) = commands::resolve_format(common.format, common.output, json, None);
            write_out(&doc, format, output.as_ref())?;
            Ok(true)
        }
        Command::Roots {
            common,
            k,
            search_box,
            json,
        } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::roots(&p, k, search_box)?;
            let (format, output) = commands::resolve_format(common.format, common.output, json, None);
            write_out(&doc, format, output.as_ref())?;
            Ok(true)
        }
        Command::Growth {
            common,
            k_range,
            csv,
        } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::growth(&p, &k_range.grid())?;
            let (format, output) = commands::resolve_format(common.format, common.output, false, csv);
            write_out(&doc, format, output.as_ref())?;
            Ok(true)
        }
        Command::Nyquist { common, k, s_range } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::nyquist(&p, k, &s_range.grid())?;
            write_out(&doc, common.format, common.output.as_ref())?;
            Ok(true)
        }
        Command::Zone { common, tau_range } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::zone_cmd(&p, &tau_range.grid())?;
            write_out(&doc, common.format, common.output.as_ref())?;
            Ok(true)
        }
        Command::Evolve {
            common,
            k,
            t_final,
            dt,
            n_v,
            compare_roots,
            csv,
        } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::evolve(&p, k, t_final, dt, n_v, compare_roots)?;
            let (format, output) = commands::resolve_format(common.format, common.output, false, csv);
            write_out(&doc, format, output.as_ref())?;
            Ok(true)
        }
        Command::TwoStream {
            common,
            k,
            lemma5,
            lemma6,
        } => {
            let (p, _) = load_profile(&common.profile)?;
            let doc = commands::two_stream(&p, k, lemma5, lemma6)?;
            write_out(&doc, common.format, common.output.as_ref())?;
            Ok(true)
        }
        Command::Validate { common } => {
            let (p, spec) = load_profile(&common.profile)?;
            let (doc, ok) = commands::validate(&p, &spec)?;
            write_out(&doc, common.format, common.output.as_ref())?;
            if !ok {
                eprintln!("vstab: validate: one or more invariant checks failed");
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("vstab: {e}");
            if e.is_hypothesis_violation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
