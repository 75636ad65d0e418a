//! One function per subcommand, each returning a [`Document`].
//!
//! Every function takes the already-built profile; profile ingestion and
//! exit-code mapping live in `main`.

use std::path::PathBuf;

use serde_json::json;
use vstab_core::dispersion::{zone, zone_boundary};
use vstab_core::evolution::{default_initial, evolve_mode, EvolveConfig};
use vstab_core::penrose::{
    index_at_k0, instability_index, lemma5_check, lemma6_check, two_stream_criterion,
    two_stream_geometry, two_stream_threshold, IndexReport,
};
use vstab_core::roots::{default_root_region, find_roots, RootRegion};
use vstab_core::{
    critical_points, moment, plemelj_boundary, CriticalKind, Error, Moment, ProfileSpec, Result,
    Side, VelocityProfile,
};

use crate::output::{Cell, Document};

/// Number of worker threads for per-`k` fan-out: the `VSTAB_THREADS`
/// environment variable when set, otherwise the machine's parallelism.
fn thread_cap() -> Result<usize> {
    match std::env::var("VSTAB_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidParameter {
                op: "cli",
                field: "VSTAB_THREADS",
                message: format!("must be a positive integer, got {raw:?}"),
            }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Count growing modes at every wave number of the grid, fanning the
/// independent evaluations out over worker threads.  Rows come back ordered
/// by `k` and the first failure in `k` order wins, so the output does not
/// depend on scheduling.
pub fn index(p: &VelocityProfile, ks: &[f64]) -> Result<Document> {
    let workers = thread_cap()?.min(ks.len()).max(1);
    let chunk = ks.len().div_ceil(workers);
    let mut results: Vec<Result<IndexReport>> = Vec::with_capacity(ks.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = ks
            .chunks(chunk)
            .map(|block| {
                scope.spawn(move || {
                    block
                        .iter()
                        .map(|&k| instability_index(p, k))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            results.extend(handle.join().expect("index worker panicked"));
        }
    });
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        reports.push(r?);
    }

    let n_points = reports.first().map_or(0, |r| r.points.len());
    let mut header = vec![
        "k".to_string(),
        "n_plus".to_string(),
        "n_minus".to_string(),
        "n".to_string(),
    ];
    for i in 1..=n_points {
        header.push(format!("s{i}"));
        header.push(format!("penrose{i}"));
        header.push(format!("counts{i}"));
    }
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                Cell::Num(r.k),
                Cell::Int(r.n_plus as i64),
                Cell::Int(r.n_minus as i64),
                Cell::Int(r.n as i64),
            ];
            for pt in &r.points {
                row.push(Cell::Num(pt.point.s));
                row.push(Cell::Num(pt.penrose_value));
                row.push(Cell::Bool(pt.counts));
            }
            row
        })
        .collect();
    Ok(Document {
        header,
        rows,
        footer: vec![],
        json: serde_json::to_value(&reports).expect("reports serialize"),
    })
}

/// Locate and certify every growing root in a spectral box.
pub fn roots(p: &VelocityProfile, k: f64, corners: Option<[f64; 4]>) -> Result<Document> {
    let region = match corners {
        Some([sx, sy, ex, ey]) => RootRegion {
            re: (sx, ex),
            im: (sy, ey),
        },
        None => default_root_region(p, k)?,
    };
    let certs = find_roots(p, k, &region)?;
    let rows = certs
        .iter()
        .map(|c| {
            vec![
                Cell::Num(c.lambda.re),
                Cell::Num(c.lambda.im),
                Cell::Num(c.residual),
                Cell::Int(c.box_winding),
                Cell::Int(c.newton_iters as i64),
                Cell::Bool(c.near_marginal),
            ]
        })
        .collect();
    Ok(Document {
        header: ["re", "im", "residual", "box_winding", "newton_iters", "near_marginal"]
            .map(String::from)
            .to_vec(),
        rows,
        footer: vec![],
        json: json!({
            "k": k,
            "region": serde_json::to_value(region).expect("region serializes"),
            "roots": serde_json::to_value(&certs).expect("certificates serialize"),
        }),
    })
}

/// Dominant growth rate along a wave-number grid.
pub fn growth(p: &VelocityProfile, ks: &[f64]) -> Result<Document> {
    let points = vstab_core::roots::growth_curve(p, ks)?;
    let rows = points
        .iter()
        .map(|g| match &g.root {
            Some(c) => vec![Cell::Num(g.k), Cell::Num(c.lambda.re), Cell::Num(c.lambda.im)],
            None => vec![Cell::Num(g.k), Cell::Empty, Cell::Empty],
        })
        .collect();
    Ok(Document {
        header: ["k", "re", "im"].map(String::from).to_vec(),
        rows,
        footer: vec![],
        json: serde_json::to_value(&points).expect("growth points serialize"),
    })
}

/// Boundary values `w(s + i0)` along a real grid — the data behind a
/// Nyquist diagram.
pub fn nyquist(p: &VelocityProfile, k: f64, ss: &[f64]) -> Result<Document> {
    let mut rows = Vec::with_capacity(ss.len());
    let mut entries = Vec::with_capacity(ss.len());
    for &s in ss {
        let w = plemelj_boundary(p, k, s, Side::Plus)?;
        rows.push(vec![Cell::Num(s), Cell::Num(w.re), Cell::Num(w.im)]);
        entries.push(json!({ "s": s, "re": w.re, "im": w.im }));
    }
    Ok(Document {
        header: ["s", "re", "im"].map(String::from).to_vec(),
        rows,
        footer: vec![],
        json: json!({ "k": k, "curve": entries }),
    })
}

/// The certified spectrum-free zone boundary `σ(τ)`.
pub fn zone_cmd(p: &VelocityProfile, taus: &[f64]) -> Result<Document> {
    let z = zone(p)?;
    let boundary = zone_boundary(&z, taus);
    let rows = boundary
        .iter()
        .map(|&(tau, sigma)| vec![Cell::Num(tau), Cell::Num(sigma)])
        .collect();
    let entries: Vec<_> = boundary
        .iter()
        .map(|&(tau, sigma)| json!({ "tau": tau, "sigma": sigma }))
        .collect();
    Ok(Document {
        header: ["tau", "sigma"].map(String::from).to_vec(),
        rows,
        footer: vec![],
        json: json!({ "c": z.c, "boundary": entries }),
    })
}

/// Direct time integration of one spatial mode, optionally cross-checked
/// against the certified dispersion roots.
pub fn evolve(
    p: &VelocityProfile,
    k: f64,
    t_final: f64,
    dt: f64,
    n_v: usize,
    compare_roots: bool,
) -> Result<Document> {
    let cfg = EvolveConfig { t_final, dt, n_v };
    let run = evolve_mode(p, k, default_initial(), &cfg)?;

    let mut footer = vec![
        ("fitted_rate".to_string(), Cell::Num(run.fitted_rate)),
        ("fit_r2".to_string(), Cell::Num(run.fit_r2)),
        ("conclusive".to_string(), Cell::Bool(run.conclusive)),
    ];
    let mut compare = serde_json::Value::Null;
    if compare_roots {
        let region = default_root_region(p, k)?;
        let certs = find_roots(p, k, &region)?;
        let dominant = certs
            .iter()
            .map(|c| c.lambda.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if dominant > f64::NEG_INFINITY {
            let ratio = run.fitted_rate / dominant;
            footer.push(("dispersion_rate".to_string(), Cell::Num(dominant)));
            footer.push(("rate_ratio".to_string(), Cell::Num(ratio)));
            compare = json!({ "dispersion_rate": dominant, "rate_ratio": ratio });
        } else {
            footer.push(("dispersion_rate".to_string(), Cell::Empty));
            footer.push(("rate_ratio".to_string(), Cell::Empty));
            compare = json!({ "dispersion_rate": null, "rate_ratio": null });
        }
    }

    let rows = run
        .times
        .iter()
        .zip(&run.g_hat)
        .zip(&run.g_abs)
        .map(|((&t, g), &a)| vec![Cell::Num(t), Cell::Num(g.re), Cell::Num(g.im), Cell::Num(a)])
        .collect();
    let mut value = serde_json::to_value(&run).expect("evolution serializes");
    value["k"] = json!(k);
    value["config"] = serde_json::to_value(cfg).expect("config serializes");
    value["compare"] = compare;
    Ok(Document {
        header: ["t", "re", "im", "abs"].map(String::from).to_vec(),
        rows,
        footer,
        json: value,
    })
}

/// Two-hump geometry, instability threshold, and the interval-arithmetic
/// sufficient conditions at chosen probe points.
pub fn two_stream(
    p: &VelocityProfile,
    k: f64,
    lemma5: Option<[f64; 2]>,
    lemma6: Option<[f64; 2]>,
) -> Result<Document> {
    let g = two_stream_geometry(p)?;
    let threshold = two_stream_threshold(p, &g)?;
    let criterion = two_stream_criterion(p, &g, k)?;
    let n = instability_index(p, k)?.n;
    let l5 = match lemma5 {
        Some([xi, eta]) => Some(lemma5_check(p, &g, k, xi, eta)?),
        None => None,
    };
    let l6 = match lemma6 {
        Some([sigma, tau]) => Some(lemma6_check(p, &g, k, sigma, tau)?),
        None => None,
    };

    let opt_bool = |b: Option<bool>| b.map_or(Cell::Empty, Cell::Bool);
    let row = vec![
        Cell::Num(k),
        Cell::Num(g.a),
        Cell::Num(g.c),
        Cell::Num(g.b),
        Cell::Num(g.m),
        threshold.map_or(Cell::Empty, Cell::Num),
        Cell::Bool(criterion),
        Cell::Int(n as i64),
        opt_bool(l5),
        opt_bool(l6),
    ];
    Ok(Document {
        header: ["k", "a", "c", "b", "m", "threshold", "criterion", "n", "lemma5", "lemma6"]
            .map(String::from)
            .to_vec(),
        rows: vec![row],
        footer: vec![],
        json: json!({
            "k": k,
            "geometry": serde_json::to_value(g).expect("geometry serializes"),
            "threshold": threshold,
            "criterion": criterion,
            "n": n,
            "lemma5": l5,
            "lemma6": l6,
        }),
    })
}

/// Structural invariant report: neutrality, decay, sign structure, critical
/// points, and the moments every estimate depends on.  Returns the document
/// plus whether every check passed.
pub fn validate(p: &VelocityProfile, spec: &ProfileSpec) -> Result<(Document, bool)> {
    let (lo, hi) = p.support();
    let m_abs = moment(p, Moment::IntAbsPhi)?;
    let m_net = moment(p, Moment::IntPhi)?;
    let m_v = moment(p, Moment::IntVPhi)?;
    let zone_c = moment(p, Moment::IntAbsVAbsPhi)?;
    let sup_slope = moment(p, Moment::MaxAbsPhi1)?;

    let neutrality_ok = m_net.abs() <= 1e-8 * (1.0 + m_abs);
    let edge = p.phi(lo).abs().max(p.phi(hi).abs());
    let decay_ok = edge <= 1e-8 * p.max_abs_phi();
    let mut density_ok = true;
    if p.has_density() {
        let n = 2001;
        for i in 0..=n {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            let f = p.f0(v).expect("density available");
            if f < -1e-12 * p.max_abs_phi() {
                density_ok = false;
                break;
            }
        }
    }
    let cps = critical_points(p)?;
    let k0 = index_at_k0(p)?;
    let ok = neutrality_ok && decay_ok && density_ok;

    let mut rows = vec![
        vec![
            Cell::Text("kind".into()),
            Cell::Text(format!("{:?}", spec.kind)),
        ],
        vec![Cell::Text("support_lo".into()), Cell::Num(lo)],
        vec![Cell::Text("support_hi".into()), Cell::Num(hi)],
        vec![Cell::Text("width".into()), Cell::Num(p.width())],
        vec![Cell::Text("max_abs_phi".into()), Cell::Num(p.max_abs_phi())],
        vec![Cell::Text("has_density".into()), Cell::Bool(p.has_density())],
        vec![Cell::Text("int_phi".into()), Cell::Num(m_net)],
        vec![Cell::Text("int_abs_phi".into()), Cell::Num(m_abs)],
        vec![Cell::Text("int_v_phi".into()), Cell::Num(m_v)],
        vec![Cell::Text("zone_c".into()), Cell::Num(zone_c)],
        vec![Cell::Text("sup_abs_phi1".into()), Cell::Num(sup_slope)],
        vec![Cell::Text("neutrality_ok".into()), Cell::Bool(neutrality_ok)],
        vec![Cell::Text("decay_ok".into()), Cell::Bool(decay_ok)],
        vec![Cell::Text("density_nonnegative".into()), Cell::Bool(density_ok)],
        vec![Cell::Text("k0_unstable".into()), Cell::Bool(k0.unstable)],
        vec![
            Cell::Text("critical_points".into()),
            Cell::Int(cps.len() as i64),
        ],
    ];
    for (i, cp) in cps.iter().enumerate() {
        let name = match cp.kind {
            CriticalKind::F0Max => "max",
            CriticalKind::F0Min => "min",
        };
        rows.push(vec![
            Cell::Text(format!("critical_{}", i + 1)),
            Cell::Text(format!("{name} at {} slope {}", cp.s, cp.slope)),
        ]);
    }
    rows.push(vec![Cell::Text("all_checks".into()), Cell::Bool(ok)]);

    let doc = Document {
        header: ["field", "value"].map(String::from).to_vec(),
        rows,
        footer: vec![],
        json: json!({
            "kind": serde_json::to_value(spec.kind).expect("kind serializes"),
            "support": [lo, hi],
            "width": p.width(),
            "max_abs_phi": p.max_abs_phi(),
            "has_density": p.has_density(),
            "int_phi": m_net,
            "int_abs_phi": m_abs,
            "int_v_phi": m_v,
            "zone_c": zone_c,
            "sup_abs_phi1": sup_slope,
            "neutrality_ok": neutrality_ok,
            "decay_ok": decay_ok,
            "density_nonnegative": density_ok,
            "k0_unstable": k0.unstable,
            "critical_points": serde_json::to_value(&cps).expect("points serialize"),
            "all_checks": ok,
        }),
    };
    Ok((doc, ok))
}

/// Inclusive `a:b:n` grid with exact endpoints.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            a * (1.0 - t) + b * t
        })
        .collect()
}

/// Resolve `--csv PATH` and `--json` shorthands against the general
/// `--format`/`--output` options.
pub fn resolve_format(
    format: crate::output::Format,
    output: Option<PathBuf>,
    json_flag: bool,
    csv_path: Option<PathBuf>,
) -> (crate::output::Format, Option<PathBuf>) {
    if let Some(path) = csv_path {
        return (crate::output::Format::Csv, Some(path));
    }
    if json_flag {
        return (crate::output::Format::Json, output);
    }
    (format, output)
}
