//! Flat `section.key = value` run configuration.
//!
//! The format is plain text: one assignment per line, `#` starts a comment,
//! blank lines are ignored.  Every key must be on the whitelist below and
//! may appear at most once; list values are comma-separated, probes are
//! semicolon-separated.  Numeric ranges are enforced by the core module
//! preconditions when the mesh and solvers are built.

use std::path::PathBuf;

use critmin_core::greenmass::Probe;
use critmin_core::mesh::Mesh;
use critmin_core::relaxopt::RelaxSettings;
use critmin_core::tol;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "domain.kind",
    "domain.resolution",
    "domain.box_lengths",
    "domain.grading",
    "problem.lambda",
    "problem.lambda_grid",
    "problem.interval",
    "relax.eps_schedule",
    "relax.max_iters",
    "relax.f_tol",
    "relax.fp_tol",
    "mass.probes",
    "mass.bisect_tol",
    "output.directory",
    "output.formats",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Ball,
    Box,
}

/// A mass probe as written in the config; resolved against a mesh later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeSpec {
    Center,
    /// Cell indices `(ix, iy, iz)` on a box grid, 0-based.
    Node(usize, usize, usize),
}

impl std::fmt::Display for ProbeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProbeSpec::Center => write!(f, "center"),
            ProbeSpec::Node(ix, iy, iz) => write!(f, "node:{ix},{iy},{iz}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: DomainKind,
    pub resolution: usize,
    pub box_lengths: [f64; 3],
    pub grading: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub interval: usize,
    pub eps_schedule: Vec<f64>,
    pub max_iters: usize,
    pub f_tol: f64,
    pub fp_tol: f64,
    pub probes: Vec<ProbeSpec>,
    pub bisect_tol: f64,
    pub directory: Option<PathBuf>,
    pub write_csv: bool,
    pub write_json: bool,
    pub seed: u64,
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("config key `{key}`: {what} (got `{value}`)"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value.parse::<f64>().map_err(|_| bad(key, value, "expected a number"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value.parse::<usize>().map_err(|_| bad(key, value, "expected a nonnegative integer"))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|p| parse_f64(key, p.trim())).collect()
}

impl RunConfig {
    /// Parse a config file body.  Unknown keys, duplicates, and malformed
    /// values are errors; missing optional keys fall back to defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut kind = None;
        let mut resolution = None;
        let mut box_lengths = [1.0; 3];
        let mut grading = None;
        let mut lambda = None;
        let mut lambda_grid = None;
        let mut interval = 0usize;
        // Defaults target certified production runs: the schedule reaches
        // 1e-8 and the stage tolerances are tight enough for the attainment
        // certificate, deeper than the exploratory core defaults.
        let mut eps_schedule: Vec<f64> = (1..=8).map(|j| 10.0_f64.powi(-j)).collect();
        let mut max_iters = tol::MAX_STAGE_ITERS;
        let mut f_tol = 1.0e-12;
        let mut fp_tol = 1.0e-8;
        let mut probes = vec![ProbeSpec::Center];
        let mut bisect_tol = tol::BISECT_REL;
        let mut directory = None;
        let mut write_csv = true;
        let mut write_json = true;
        let mut seed_holder = None;
        let mut seen: Vec<&str> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key_part, value_part)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `section.key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key_part.trim();
            let value = value_part.trim();
            let Some(&known) = KNOWN_KEYS.iter().find(|&&k| k == key) else {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            };
            if seen.contains(&known) {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            seen.push(known);

            match known {
                "domain.kind" => {
                    kind = Some(match value {
                        "ball" => DomainKind::Ball,
                        "box" => DomainKind::Box,
                        _ => return Err(bad(key, value, "expected `ball` or `box`")),
                    })
                }
                "domain.resolution" => resolution = Some(parse_usize(key, value)?),
                "domain.box_lengths" => {
                    let v = parse_f64_list(key, value)?;
                    if v.len() != 3 {
                        return Err(bad(key, value, "expected three comma-separated lengths"));
                    }
                    box_lengths = [v[0], v[1], v[2]];
                }
                "domain.grading" => grading = Some(parse_f64(key, value)?),
                "problem.lambda" => lambda = Some(parse_f64(key, value)?),
                "problem.lambda_grid" => lambda_grid = Some(parse_f64_list(key, value)?),
                "problem.interval" => interval = parse_usize(key, value)?,
                "relax.eps_schedule" => {
                    let v = parse_f64_list(key, value)?;
                    if v.is_empty() {
                        return Err(bad(key, value, "expected at least one stage"));
                    }
                    eps_schedule = v;
                }
                "relax.max_iters" => max_iters = parse_usize(key, value)?,
                "relax.f_tol" => f_tol = parse_f64(key, value)?,
                "relax.fp_tol" => fp_tol = parse_f64(key, value)?,
                "mass.probes" => {
                    let mut list = Vec::new();
                    for part in value.split(';') {
                        list.push(parse_probe(key, part.trim())?);
                    }
                    if list.is_empty() {
                        return Err(bad(key, value, "expected at least one probe"));
                    }
                    probes = list;
                }
                "mass.bisect_tol" => bisect_tol = parse_f64(key, value)?,
                "output.directory" => directory = Some(PathBuf::from(value)),
                "output.formats" => {
                    write_csv = false;
                    write_json = false;
                    for part in value.split(',') {
                        match part.trim() {
                            "csv" => write_csv = true,
                            "json" => write_json = true,
                            other => {
                                return Err(bad(key, other, "expected `csv` and/or `json`"))
                            }
                        }
                    }
                }
                "seed" => {
                    seed_holder = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| bad(key, value, "expected a nonnegative integer"))?,
                    )
                }
                _ => unreachable!("whitelist covered above"),
            }
        }
        let kind = kind.ok_or_else(|| CliError::Config("missing key `domain.kind`".into()))?;
        let resolution =
            resolution.ok_or_else(|| CliError::Config("missing key `domain.resolution`".into()))?;
        Ok(RunConfig {
            kind,
            resolution,
            box_lengths,
            grading,
            lambda,
            lambda_grid,
            interval,
            eps_schedule,
            max_iters,
            f_tol,
            fp_tol,
            probes,
            bisect_tol,
            directory,
            write_csv,
            write_json,
            seed: seed_holder.unwrap_or(0),
        })
    }

    pub fn build_mesh(&self) -> Result<Mesh, CliError> {
        let mesh = match (self.kind, self.grading) {
            (DomainKind::Ball, None) => Mesh::radial_ball(self.resolution),
            (DomainKind::Ball, Some(g)) => Mesh::radial_ball_graded(self.resolution, g),
            (DomainKind::Box, None) => Mesh::box3(self.box_lengths, self.resolution),
            (DomainKind::Box, Some(_)) => {
                return Err(CliError::Config(
                    "config key `domain.grading` applies to ball domains only".into(),
                ))
            }
        };
        mesh.map_err(CliError::from_core)
    }

    pub fn relax_settings(&self) -> RelaxSettings {
        RelaxSettings { max_iters: self.max_iters, f_rel_tol: self.f_tol, fp_tol: self.fp_tol }
    }

    /// Turn the configured probe specs into mesh probes with coordinates.
    pub fn resolve_probes(&self, mesh: &Mesh) -> Result<Vec<(Probe, [f64; 3])>, CliError> {
        let mut out = Vec::with_capacity(self.probes.len());
        for spec in &self.probes {
            let probe = match (*spec, self.kind) {
                (ProbeSpec::Center, DomainKind::Ball) => Probe::Center,
                (ProbeSpec::Center, DomainKind::Box) => {
                    return Err(CliError::Config(
                        "probe `center` applies to ball domains; use `node:ix,iy,iz`".into(),
                    ))
                }
                (ProbeSpec::Node(ix, iy, iz), DomainKind::Box) => {
                    let r = self.resolution;
                    if ix >= r || iy >= r || iz >= r {
                        return Err(CliError::Config(format!(
                            "probe `{spec}` outside the {r}^3 grid"
                        )));
                    }
                    Probe::Node(ix + r * (iy + r * iz))
                }
                (ProbeSpec::Node(..), DomainKind::Ball) => {
                    return Err(CliError::Config(format!(
                        "probe `{spec}` applies to box domains; use `center`"
                    )))
                }
            };
            let pos = match probe {
                Probe::Center => [0.0, 0.0, 0.0],
                Probe::Node(i) => mesh.position(i),
            };
            out.push((probe, pos));
        }
        Ok(out)
    }
}

fn parse_probe(key: &str, text: &str) -> Result<ProbeSpec, CliError> {
    if text == "center" {
        return Ok(ProbeSpec::Center);
    }
    if let Some(rest) = text.strip_prefix("node:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 3 {
            let ix = parse_usize(key, parts[0].trim())?;
            let iy = parse_usize(key, parts[1].trim())?;
            let iz = parse_usize(key, parts[2].trim())?;
            return Ok(ProbeSpec::Node(ix, iy, iz));
        }
    }
    Err(bad(key, text, "expected `center` or `node:ix,iy,iz`"))
}
