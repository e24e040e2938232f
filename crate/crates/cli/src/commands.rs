//! The file-producing subcommands: spectrum, minimize, sweep, mass, and
//! lambda-star.  Each command computes its full result before writing, so a
//! failed run leaves no partial artifacts.

use std::path::Path;

use critmin_core::analysis::{sweep_energy, SweepPoint};
use critmin_core::greenmass::{self, Probe};
use critmin_core::mesh::{Mesh, MeshKind};
use critmin_core::relaxopt::{continuation, extract_solution};
use critmin_core::spectral::{dirichlet_spectrum, spectrum_with_clusters, SpectrumTable};
use critmin_core::tol;

use crate::config::RunConfig;
use crate::emit::{self, float, Json};
use crate::{CliError, Ctx};

/// Number of eigenvalues reported by the spectrum command; enough to show
/// the first few multiplicity clusters on every supported domain.
const SPECTRUM_ROWS: usize = 10;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// A spectrum table whose top cluster lies strictly above `lambda`, so the
/// spectral interval of `lambda` is determined.
fn table_covering(mesh: &Mesh, lambda: f64) -> Result<SpectrumTable, CliError> {
    let mut clusters = 2usize;
    loop {
        let table = spectrum_with_clusters(mesh, clusters).map_err(CliError::from_core)?;
        let top = table.distinct(table.n_distinct()).map_err(CliError::from_core)?;
        if top > lambda {
            return Ok(table);
        }
        if clusters >= 64 {
            return Err(CliError::Config(format!(
                "problem.lambda = {lambda} lies above the resolvable spectrum (top {top:.6})"
            )));
        }
        clusters += 2;
    }
}

fn require_lambda(cfg: &RunConfig) -> Result<f64, CliError> {
    cfg.lambda.ok_or_else(|| CliError::Config("missing key `problem.lambda`".into()))
}

pub fn cmd_spectrum(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let mesh = cfg.build_mesh()?;
    let count = SPECTRUM_ROWS.min(mesh.n_nodes() - 1);
    let table = dirichlet_spectrum(&mesh, count).map_err(CliError::from_core)?;

    let mut rows = Vec::new();
    for (j, &lambda) in table.eigenvalues.iter().enumerate().take(count) {
        let cluster = table
            .clusters
            .iter()
            .find(|c| j >= c.start && j < c.start + c.multiplicity)
            .expect("every eigenvalue belongs to a cluster");
        rows.push(vec![
            format!("{}", j + 1),
            float(lambda),
            float(cluster.value),
            format!("{}", cluster.multiplicity),
        ]);
    }
    if cfg.write_csv {
        let body = emit::to_csv(&["index", "lambda", "Lambda_cluster", "multiplicity"], &rows);
        write_file(&ctx.out.join("spectrum.csv"), &body)?;
    }
    Ok(())
}

pub fn cmd_minimize(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let lambda = require_lambda(cfg)?;
    let mesh = cfg.build_mesh()?;
    let table = table_covering(&mesh, lambda)?;
    let iv = table.interval_of_guarded(lambda, tol::SPEC_TOL_REL).map_err(CliError::from_core)?;
    let k = table.multiplicity_index(iv.index).map_err(CliError::from_core)?;

    let res = continuation(&mesh, lambda, k, &cfg.eps_schedule, &cfg.relax_settings())
        .map_err(CliError::from_core)?;
    let sol = extract_solution(&mesh, &res.pair).map_err(CliError::from_core)?;

    if cfg.write_json {
        let stages: Vec<Json> = res
            .stages
            .iter()
            .map(|s| {
                Json::Object(vec![
                    ("converged", Json::Bool(s.converged)),
                    ("eps", Json::Float(s.eps)),
                    ("fp_residual", Json::Float(s.fp_residual)),
                    ("gamma1", Json::Float(s.gamma1)),
                    ("gamma2", Json::Float(s.gamma2)),
                    ("iterations", Json::UInt(s.iterations as u64)),
                    ("mu", Json::Float(s.mu)),
                    ("objective", Json::Float(s.objective)),
                ])
            })
            .collect();
        let doc = Json::Object(vec![
            ("attained", Json::Bool(res.attained)),
            ("el_residual", Json::Float(res.el_residual)),
            ("energy", Json::Float(sol.energy)),
            ("energy_form", Json::Float(sol.energy_form)),
            ("interval_index", Json::UInt(iv.index as u64)),
            ("k", Json::UInt(k as u64)),
            ("lambda", Json::Float(lambda)),
            ("mu_star", Json::Float(res.mu_star)),
            ("nodal_domains", Json::UInt(sol.nodal_domains as u64)),
            ("pde_residual", Json::Float(sol.pde_residual)),
            ("seed", Json::UInt(ctx.seed)),
            ("stages", Json::Array(stages)),
        ]);
        write_file(&ctx.out.join("minimizer.json"), &emit::to_json(&doc))?;
    }
    if cfg.write_csv {
        let radial = mesh.kind() == MeshKind::RadialBall;
        let header: Vec<&str> = if radial {
            vec!["node", "r", "u", "phi", "psi"]
        } else {
            vec!["node", "x", "y", "z", "u", "phi", "psi"]
        };
        let u = res.weight.values();
        let mut rows = Vec::with_capacity(mesh.n_nodes());
        for i in 0..mesh.n_nodes() {
            let mut row = vec![format!("{i}")];
            row.extend(mesh.coords(i).iter().map(|&c| float(c)));
            row.push(float(u[i]));
            row.push(float(res.pair.phi[i]));
            row.push(float(sol.psi[i]));
            rows.push(row);
        }
        write_file(&ctx.out.join("solution.csv"), &emit::to_csv(&header, &rows))?;
    }
    Ok(())
}

pub fn cmd_sweep(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let grid = cfg
        .lambda_grid
        .clone()
        .ok_or_else(|| CliError::Config("missing key `problem.lambda_grid`".into()))?;
    let mesh = cfg.build_mesh()?;
    let top = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(CliError::Config("problem.lambda_grid has no finite entries".into()));
    }
    let table = table_covering(&mesh, top)?;
    let settings = cfg.relax_settings();
    let schedule = &cfg.eps_schedule;

    // Grid points are independent; distribute them round-robin over the
    // worker threads and reassemble in grid order before writing.
    let threads = ctx.threads.max(1).min(grid.len().max(1));
    let mut outcomes: Vec<Option<Result<SweepPoint, String>>> = vec![None; grid.len()];
    let run_point = |idx: usize| -> Result<SweepPoint, String> {
        let rep = sweep_energy(&mesh, &table, &grid[idx..=idx], schedule, &settings);
        rep.points
            .into_iter()
            .next()
            .map(Ok)
            .or_else(|| rep.failures.into_iter().next().map(|(_, e)| Err(e)))
            .expect("one grid point yields one outcome")
    };
    if threads <= 1 {
        for (idx, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(run_point(idx));
        }
    } else {
        let n = grid.len();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let run_point = &run_point;
                handles.push(scope.spawn(move || {
                    (t..n)
                        .step_by(threads)
                        .map(|idx| (idx, run_point(idx)))
                        .collect::<Vec<_>>()
                }));
            }
            for handle in handles {
                for (idx, outcome) in handle.join().expect("sweep worker panicked") {
                    outcomes[idx] = Some(outcome);
                }
            }
        });
    }

    let mut rows = Vec::new();
    let mut n_ok = 0usize;
    let mut first_failure = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome.expect("every grid point was assigned") {
            Ok(p) => {
                n_ok += 1;
                rows.push(vec![
                    float(p.lambda),
                    format!("{}", p.interval_index),
                    format!("{}", p.k),
                    float(p.mu_star),
                    float(p.energy),
                    format!("{}", p.attained),
                    float(p.wall_time_ms / 1.0e3),
                ]);
            }
            Err(e) => {
                eprintln!("sweep: lambda = {}: {e}", grid[idx]);
                if first_failure.is_none() {
                    first_failure = Some(e);
                }
            }
        }
    }
    if n_ok == 0 {
        return Err(CliError::Solver(
            first_failure.unwrap_or_else(|| "empty lambda grid".into()),
        ));
    }
    if cfg.write_csv {
        let body = emit::to_csv(
            &["lambda", "i", "k", "mu_star", "energy", "attained", "wall_time"],
            &rows,
        );
        write_file(&ctx.out.join("sweep.csv"), &body)?;
    }
    Ok(())
}

pub fn cmd_mass(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let lambdas: Vec<f64> = match (&cfg.lambda_grid, cfg.lambda) {
        (Some(grid), _) => grid.clone(),
        (None, Some(l)) => vec![l],
        (None, None) => {
            return Err(CliError::Config(
                "mass needs `problem.lambda` or `problem.lambda_grid`".into(),
            ))
        }
    };
    let mesh = cfg.build_mesh()?;
    let probes = cfg.resolve_probes(&mesh)?;
    let top = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let table = table_covering(&mesh, top)?;

    let mut rows = Vec::new();
    for &lambda in &lambdas {
        for (j, (probe, pos)) in probes.iter().enumerate() {
            let m = greenmass::mass_at(&mesh, &table, lambda, *probe).map_err(|e| {
                match CliError::from_core(e) {
                    CliError::Config(msg) => {
                        CliError::Config(format!("probe `{}`: {msg}", cfg.probes[j]))
                    }
                    CliError::Solver(msg) => {
                        CliError::Solver(format!("probe `{}`: {msg}", cfg.probes[j]))
                    }
                    other => other,
                }
            })?;
            rows.push(vec![
                float(lambda),
                float(pos[0]),
                float(pos[1]),
                float(pos[2]),
                float(m),
            ]);
        }
    }
    if cfg.write_csv {
        let body = emit::to_csv(&["lambda", "x", "y", "z", "mass"], &rows);
        write_file(&ctx.out.join("mass.csv"), &body)?;
    }
    Ok(())
}

pub fn cmd_lambda_star(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?;
    let mesh = cfg.build_mesh()?;
    let probes = cfg.resolve_probes(&mesh)?;
    let table = spectrum_with_clusters(&mesh, cfg.interval + 1).map_err(CliError::from_core)?;
    let probe_list: Vec<Probe> = probes.iter().map(|(p, _)| *p).collect();
    let est = greenmass::lambda_star(
        &mesh,
        &table,
        cfg.interval,
        &probe_list,
        cfg.bisect_tol,
    )
    .map_err(CliError::from_core)?;

    if cfg.write_json {
        let doc = Json::Object(vec![
            ("bracket_hi", Json::Float(est.bracket.1)),
            ("bracket_lo", Json::Float(est.bracket.0)),
            ("evaluations", Json::UInt(est.evaluations as u64)),
            ("interval_hi", Json::Float(est.interval.1)),
            ("interval_index", Json::UInt(cfg.interval as u64)),
            ("interval_lo", Json::Float(est.interval.0)),
            ("lambda_star", Json::Float(est.lambda_star)),
            (
                "probes",
                Json::Array(
                    cfg.probes.iter().map(|p| Json::Str(p.to_string())).collect(),
                ),
            ),
        ]);
        write_file(&ctx.out.join("lambda_star.json"), &emit::to_json(&doc))?;
    }
    Ok(())
}
