use std::f64::consts::PI;
use std::path::Path;

use narrowflux::asymptotics::{sphere_drop_n, sphere_drop_neumann, sphere_fluxes, ExpansionResult};
use narrowflux::geometry::{
    nondimensionalize, validate_config, Domain, ProblemKind, Role, ValidatedConfig, WindowConfig,
};
use narrowflux::halfspace::{fit_constants, trace_flow, HalfSpaceBc, HalfSpacePair, TraceOptions, TraceSample};
use narrowflux::linsys::{influx_drop, KernelTreatment};
use narrowflux::validators::{bem_solve_extrapolated, mc_flux_split, BemMesh, McConfig, OracleReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{write_csv, write_json, RunManifest, SweepRanges};
use crate::{Bc, CliError, CliResult, DropArgs, DropMethod, ExitKind, FluxArgs, FluxMethod, Kernel, SweepArgs, TraceArgs};

/// One sweep point on the sphere, already scaled to the unit sphere.
struct Case {
    eps: f64,
    l: Option<f64>,
    cfg: ValidatedConfig,
    /// Physical concentration per dimensionless unit.
    conc_scale: f64,
    /// Physical flux per dimensionless unit.
    flux_scale: f64,
}

fn sphere_cases(sweep: &SweepArgs, exit: Role) -> CliResult<Vec<Case>> {
    let configs: Vec<WindowConfig> = match (&sweep.config, &sweep.eps) {
        (Some(path), eps) => {
            if sweep.l.is_some() {
                return Err(CliError::Usage("--l applies only to pair configurations built from --eps".into()));
            }
            let base = WindowConfig::load(path)?;
            let r = match base.domain {
                Domain::UnitSphere => 1.0,
                Domain::Sphere { r } => r,
                Domain::HalfSpace => {
                    return Err(CliError::Usage("drop and flux need a sphere configuration; use trace for the half-space".into()));
                }
            };
            match eps {
                None => vec![base],
                Some(list) => list
                    .0
                    .iter()
                    .map(|e| {
                        let mut c = base.clone();
                        c.windows.iter_mut().for_each(|w| w.radius = e * r);
                        c
                    })
                    .collect(),
            }
        }
        (None, Some(eps)) => {
            let ls = sweep.l.as_ref().map_or_else(|| vec![2.0], |s| s.0.clone());
            eps.0
                .iter()
                .flat_map(|&e| ls.iter().map(move |&l| WindowConfig::sphere_pair(e, l, exit)))
                .collect()
        }
        (None, None) => return Err(CliError::Usage("give --config or --eps".into())),
    };
    configs
        .iter()
        .map(|c| {
            let (unit, factor) = nondimensionalize(c)?;
            let r = match c.domain {
                Domain::Sphere { r } => r,
                _ => 1.0,
            };
            let cfg = validate_config(&unit)?;
            Ok(Case {
                eps: cfg.eps,
                l: (cfg.n_windows() == 2).then(|| cfg.distances.get(0, 1)),
                conc_scale: factor,
                flux_scale: c.current * r * r,
                cfg,
            })
        })
        .collect()
}

fn kernel(k: Kernel) -> KernelTreatment {
    match k {
        Kernel::Truncated => KernelTreatment::Truncated,
        Kernel::Exact => KernelTreatment::Exact,
    }
}

fn asym_drop(case: &Case) -> CliResult<ExpansionResult> {
    let c = &case.cfg;
    Ok(match (c.kind()?, c.n_windows()) {
        (ProblemKind::Neumann, 2) => sphere_drop_neumann(c.eps, c.distances.get(0, 1))?,
        (ProblemKind::Neumann, _) => {
            return Err(narrowflux::Error::Role("asymptotic drops with Neumann exits need exactly one exit".into()).into())
        }
        (ProblemKind::Mixed, _) => sphere_drop_n(c.eps, &c.distances)?,
    })
}

#[derive(Debug, Clone, Serialize)]
struct DropRow {
    index: usize,
    eps: f64,
    l: Option<f64>,
    n_windows: usize,
    method: &'static str,
    value: f64,
    leading: Option<f64>,
    log_term: Option<f64>,
    quad_term: Option<f64>,
    error_estimate: Option<f64>,
}

fn method_name(m: DropMethod) -> &'static str {
    match m {
        DropMethod::Asym2 => "asym2",
        DropMethod::Asym3 => "asym3",
        DropMethod::Linsys => "linsys",
        DropMethod::Bem => "bem",
    }
}

fn drop_rows(index: usize, case: &Case, a: &DropArgs) -> CliResult<Vec<DropRow>> {
    let s = case.conc_scale;
    let row = |method, value: f64| DropRow {
        index,
        eps: case.eps,
        l: case.l,
        n_windows: case.cfg.n_windows(),
        method,
        value: s * value,
        leading: None,
        log_term: None,
        quad_term: None,
        error_estimate: None,
    };
    let mut rows = Vec::new();
    for &m in &a.method {
        let name = method_name(m);
        rows.push(match m {
            DropMethod::Asym2 | DropMethod::Asym3 => {
                let full = asym_drop(case)?;
                let e = if m == DropMethod::Asym2 { full.two_term() } else { full };
                DropRow {
                    leading: Some(s * e.leading),
                    log_term: Some(s * e.log_term),
                    quad_term: e.quad_term.map(|q| s * q),
                    ..row(name, e.total)
                }
            }
            DropMethod::Linsys => row(name, influx_drop(&case.cfg, kernel(a.kernel))?.0),
            DropMethod::Bem => {
                let est = bem_solve_extrapolated(&case.cfg, &BemMesh::level(a.mesh_level))?;
                DropRow {
                    error_estimate: Some(s * est.error_estimate),
                    ..row(name, est.drop)
                }
            }
        });
    }
    Ok(rows)
}

/// Pairs every asymptotic row of a sweep point with every numerical row.
fn drop_oracles(rows: &[DropRow]) -> CliResult<Vec<OracleReport>> {
    let mut out = Vec::new();
    for a in rows.iter().filter(|r| r.method.starts_with("asym")) {
        for n in rows.iter().filter(|r| r.index == a.index && !r.method.starts_with("asym")) {
            let case = format!("{}:{}-vs-{}", a.index, a.method, n.method);
            out.push(OracleReport::new(case, a.eps, a.value, n.value, n.error_estimate)?);
        }
    }
    Ok(out)
}

fn sweep_ranges(s: &SweepArgs) -> SweepRanges {
    SweepRanges {
        eps: s.eps.as_ref().map(|v| v.0.clone()),
        l: s.l.as_ref().map(|v| v.0.clone()),
    }
}

pub fn drop(out: &Path, a: &DropArgs, args: Vec<String>) -> CliResult<()> {
    let exit = match a.exit {
        ExitKind::Neumann => Role::OutfluxNeumann,
        ExitKind::Absorbing => Role::Absorbing,
    };
    let cases = sphere_cases(&a.sweep, exit)?;
    let per_case: Vec<Vec<DropRow>> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| drop_rows(i, c, a))
        .collect::<CliResult<_>>()?;
    let rows: Vec<DropRow> = per_case.into_iter().flatten().collect();
    let mut manifest = RunManifest::new("drop", args, a.sweep.config.clone(), sweep_ranges(&a.sweep), out);
    write_csv(out, "drop.csv", &rows)?;
    manifest.files.push("drop.csv".into());
    let oracles = drop_oracles(&rows)?;
    if !oracles.is_empty() {
        write_json(out, "oracle.json", &oracles)?;
        manifest.files.push("oracle.json".into());
    }
    manifest.write()
}

#[derive(Debug, Clone, Serialize)]
struct FluxRow {
    index: usize,
    eps: f64,
    method: &'static str,
    /// Exit window number, 1-based after the influx window.
    window: usize,
    flux: f64,
    stderr: Option<f64>,
    fraction: Option<f64>,
}

fn flux_rows(index: usize, case: &Case, a: &FluxArgs) -> CliResult<Vec<FluxRow>> {
    let c = &case.cfg;
    if c.kind()? != ProblemKind::Mixed {
        return Err(narrowflux::Error::Role("flux needs absorbing exit windows".into()).into());
    }
    let s = case.flux_scale;
    let influx = PI * c.eps * c.eps;
    let mut rows = Vec::new();
    for &m in &a.method {
        let (name, fluxes, stderr, frac): (_, Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>) = match m {
            FluxMethod::Asym => ("asym", sphere_fluxes(c.eps, &c.distances)?.fluxes, None, None),
            FluxMethod::Linsys => ("linsys", influx_drop(c, kernel(a.kernel))?.2.fluxes, None, None),
            FluxMethod::Mc => {
                let mc = McConfig {
                    n_particles: a.particles,
                    master_seed: a.seed,
                    ..McConfig::default()
                };
                let r = mc_flux_split(c, &mc)?;
                (
                    "mc",
                    r.p.iter().map(|p| -influx * p).collect(),
                    Some(r.stderr.iter().map(|e| influx * e).collect()),
                    Some(r.p.clone()),
                )
            }
        };
        for (j, f) in fluxes.iter().enumerate() {
            rows.push(FluxRow {
                index,
                eps: c.eps,
                method: name,
                window: j + 1,
                flux: s * f,
                stderr: stderr.as_ref().map(|e| s * e[j]),
                fraction: frac.as_ref().map(|p| p[j]),
            });
        }
    }
    Ok(rows)
}

fn flux_oracles(rows: &[FluxRow]) -> CliResult<Vec<OracleReport>> {
    let mut out = Vec::new();
    for a in rows.iter().filter(|r| r.method == "asym") {
        for n in rows
            .iter()
            .filter(|r| r.index == a.index && r.window == a.window && r.method != "asym")
        {
            let case = format!("{}:window{}:asym-vs-{}", a.index, a.window, n.method);
            out.push(OracleReport::new(case, a.eps, a.flux, n.flux, n.stderr)?);
        }
    }
    Ok(out)
}

pub fn flux(out: &Path, a: &FluxArgs, args: Vec<String>) -> CliResult<()> {
    let cases = sphere_cases(&a.sweep, Role::Absorbing)?;
    let per_case: Vec<Vec<FluxRow>> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| flux_rows(i, c, a))
        .collect::<CliResult<_>>()?;
    let rows: Vec<FluxRow> = per_case.into_iter().flatten().collect();
    let mut manifest = RunManifest::new("flux", args, a.sweep.config.clone(), sweep_ranges(&a.sweep), out);
    if a.method.contains(&FluxMethod::Mc) {
        manifest.seed = Some(a.seed);
    }
    write_csv(out, "flux.csv", &rows)?;
    manifest.files.push("flux.csv".into());
    let oracles = flux_oracles(&rows)?;
    if !oracles.is_empty() {
        write_json(out, "oracle.json", &oracles)?;
        manifest.files.push("oracle.json".into());
    }
    manifest.write()
}

#[derive(Debug, Clone, Serialize)]
struct TracePoint {
    t: f64,
    x: f64,
    z: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TraceSummary {
    index: usize,
    eps: f64,
    l: f64,
    #[serde(rename = "I")]
    current: f64,
    bc: HalfSpaceBc,
    #[serde(rename = "L_pe")]
    l_pe: f64,
    #[serde(rename = "T_tr")]
    t_tr: f64,
    terminal_x: f64,
    file: String,
}

fn trace_pairs(a: &TraceArgs) -> CliResult<Vec<HalfSpacePair>> {
    let bc = match a.bc {
        Bc::Neumann => HalfSpaceBc::NeumannPair,
        Bc::Mixed => HalfSpaceBc::MixedAbsorbing,
    };
    if let Some(path) = &a.sweep.config {
        if a.sweep.l.is_some() {
            return Err(CliError::Usage("--l cannot be combined with --config".into()));
        }
        let mut base = WindowConfig::load(path)?;
        if base.domain != Domain::HalfSpace {
            return Err(CliError::Usage("trace needs a half_space configuration".into()));
        }
        let eps_list = a.sweep.eps.as_ref().map(|s| s.0.clone()).unwrap_or_else(|| vec![base.windows.first().map_or(0.0, |w| w.radius)]);
        return eps_list
            .iter()
            .map(|&e| {
                base.windows.iter_mut().for_each(|w| w.radius = e);
                let v = validate_config(&base)?;
                if v.n_windows() != 2 {
                    return Err(narrowflux::Error::Role(format!("trace needs two windows, got {}", v.n_windows())).into());
                }
                let bc = match v.kind()? {
                    ProblemKind::Neumann => HalfSpaceBc::NeumannPair,
                    ProblemKind::Mixed => HalfSpaceBc::MixedAbsorbing,
                };
                Ok(HalfSpacePair::new(v.eps, v.distances.get(0, 1), base.current, bc)?)
            })
            .collect();
    }
    let eps = a.sweep.eps.as_ref().ok_or_else(|| CliError::Usage("give --config or --eps".into()))?.0.clone();
    let ls = a.sweep.l.as_ref().ok_or_else(|| CliError::Usage("give --l with --eps".into()))?.0.clone();
    let mut pairs = Vec::new();
    let mut first_err = None;
    for &e in &eps {
        for &l in &ls {
            match HalfSpacePair::new(e, l, a.current, bc) {
                Ok(p) => pairs.push(p),
                Err(err @ narrowflux::Error::Overlap { .. }) => {
                    log::warn!("skipping eps = {e}, l = {l}: windows overlap");
                    first_err.get_or_insert(err);
                }
                Err(err) => return Err(err.into()),
            }
        }
    }
    match (pairs.is_empty(), first_err) {
        (true, Some(e)) => Err(e.into()),
        _ => Ok(pairs),
    }
}

pub fn trace(out: &Path, a: &TraceArgs, args: Vec<String>) -> CliResult<()> {
    let pairs = trace_pairs(a)?;
    let opts = TraceOptions {
        rel_tol: a.rel_tol,
        max_time: a.max_time,
        ..TraceOptions::default()
    };
    let traces = pairs
        .par_iter()
        .map(|p| trace_flow(p, &opts))
        .collect::<narrowflux::Result<Vec<_>>>()?;
    let mut manifest = RunManifest::new("trace", args, a.sweep.config.clone(), sweep_ranges(&a.sweep), out);
    let mut summary = Vec::new();
    for (i, (p, t)) in pairs.iter().zip(&traces).enumerate() {
        let file = format!("trace_{i:03}.csv");
        let pts: Vec<TracePoint> = t.points.iter().map(|&(t, x, z)| TracePoint { t, x, z }).collect();
        write_csv(out, &file, &pts)?;
        manifest.files.push(file.clone());
        summary.push(TraceSummary {
            index: i,
            eps: p.eps,
            l: p.l,
            current: p.current,
            bc: p.bc,
            l_pe: t.l_pe,
            t_tr: t.t_tr,
            terminal_x: t.terminal_x,
            file,
        });
    }
    write_json(out, "summary.json", &summary)?;
    manifest.files.push("summary.json".into());
    if a.fit {
        let samples: Vec<TraceSample> = pairs
            .iter()
            .zip(&traces)
            .map(|(p, t)| TraceSample {
                eps: p.eps,
                l: p.l,
                current: p.current,
                l_pe: t.l_pe,
                t_tr: t.t_tr,
            })
            .collect();
        write_json(out, "fit.json", &fit_constants(&samples)?)?;
        manifest.files.push("fit.json".into());
    }
    manifest.write()
}
