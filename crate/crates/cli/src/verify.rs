//! Self-verification suite: a curated set of identities and oracles that the
//! solver must reproduce on small fixed meshes.  Each check runs on its own
//! domain; the run configuration only contributes the spectral parameter for
//! the mass checks (which are skipped with a reason when that parameter sits
//! on the Dirichlet spectrum) and the random seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use critmin_core::analysis::{
    bifurcation_check, direct_coercive_minimize, second_order_check, sobolev_oracle_agreement,
};
use critmin_core::error::CoreError;
use critmin_core::greenmass::{self, Probe};
use critmin_core::mesh::Mesh;
use critmin_core::relaxopt::{continuation, extract_solution, RelaxSettings};
use critmin_core::spectral::{
    dirichlet_spectrum, sign_law_check, weighted_eigenpairs, WeightField,
};
use critmin_core::tol;

use crate::emit::{self, Json};
use crate::{CliError, Ctx};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

struct Outcome {
    name: &'static str,
    status: Status,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    let status = if pass { Status::Pass } else { Status::Fail };
    Outcome { name, status, detail }
}

fn radial_spectrum_oracle() -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(300)?;
    let table = dirichlet_spectrum(&mesh, 3)?;
    let mut worst = 0.0f64;
    for (j, &lambda) in table.eigenvalues.iter().enumerate() {
        let exact = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
        worst = worst.max(((lambda - exact) / exact).abs());
    }
    Ok(outcome(
        "radial-spectrum-oracle",
        worst <= 1.0e-3,
        format!("max relative error vs (j pi)^2 over j <= 3: {worst:.3e}"),
    ))
}

fn box_spectrum_exact() -> Result<Outcome, CoreError> {
    let r = 8usize;
    let mesh = Mesh::box3([1.0, 1.0, 1.0], r)?;
    let table = dirichlet_spectrum(&mesh, 4)?;
    let h = 1.0 / r as f64;
    let axis = |j: usize| {
        let s = (j as f64 * std::f64::consts::PI * h / 2.0).sin();
        4.0 / (h * h) * s * s
    };
    let mut exact = Vec::new();
    for jx in 1..=4 {
        for jy in 1..=4 {
            for jz in 1..=4 {
                exact.push(axis(jx) + axis(jy) + axis(jz));
            }
        }
    }
    exact.sort_by(f64::total_cmp);
    let mut worst = 0.0f64;
    for (computed, wanted) in table.eigenvalues.iter().zip(&exact) {
        worst = worst.max(((computed - wanted) / wanted).abs());
    }
    Ok(outcome(
        "box-spectrum-exact",
        worst <= 1.0e-7,
        format!("max relative error vs closed-form grid eigenvalues: {worst:.3e}"),
    ))
}

fn sobolev_two_quadratures() -> Result<Outcome, CoreError> {
    let dev = sobolev_oracle_agreement();
    Ok(outcome(
        "sobolev-two-quadratures",
        dev <= tol::SOBOLEV_QUAD_REL,
        format!("bubble energy vs critical norm disagreement: {dev:.3e}"),
    ))
}

fn constant_weight_identity(seed: u64) -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(200)?;
    let table = dirichlet_spectrum(&mesh, 4)?;
    let volume_pow = mesh.volume().powf(2.0 / 3.0);
    let constant = WeightField::new(&mesh, vec![1.0; mesh.n_nodes()])?.normalized(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let i = rng.gen_range(0..3usize);
        let lo = if i == 0 { 0.0 } else { table.distinct(i)? };
        let hi = table.distinct(i + 1)?;
        let lambda = lo + (0.15 + 0.7 * rng.gen::<f64>()) * (hi - lo);
        let k = table.multiplicity_index(i)?;
        let pairs = weighted_eigenpairs(&mesh, lambda, &constant, k)?;
        let wanted = (hi - lambda) * volume_pow;
        let got = pairs[k - 1].mu;
        worst = worst.max(((got - wanted) / wanted).abs());
    }
    Ok(outcome(
        "constant-weight-identity",
        worst <= 1.0e-9,
        format!("max relative error of mu_k vs (Lambda - lambda) |Omega|^(2/3): {worst:.3e}"),
    ))
}

fn sign_law_random_weights(seed: u64, inject_fault: bool) -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(120)?;
    let table = dirichlet_spectrum(&mesh, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    let mut checked = 0usize;
    let mut all_hold = true;
    for i in 0..2usize {
        let lo = if i == 0 { 0.0 } else { table.distinct(i)? };
        let hi = table.distinct(i + 1)?;
        for _ in 0..3 {
            let lambda = lo + (0.2 + 0.6 * rng.gen::<f64>()) * (hi - lo);
            let values: Vec<f64> =
                (0..mesh.n_nodes()).map(|_| 0.2 + rng.gen::<f64>()).collect();
            let weight = WeightField::new(&mesh, values)?;
            let report = sign_law_check(&mesh, &table, lambda, &weight)?;
            all_hold &= report.holds;
            checked += 1;
        }
    }
    if inject_fault {
        all_hold = !all_hold;
    }
    let detail = if inject_fault {
        format!("fault injection inverted the verdict over {checked} weights")
    } else {
        format!("sign pattern of mu_1..mu_k held for all {checked} random weights")
    };
    Ok(outcome("sign-law-random-weights", all_hold, detail))
}

fn coercive_crosscheck() -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(150)?;
    let table = dirichlet_spectrum(&mesh, 2)?;
    let lambda = 0.55 * table.distinct(1)?;
    let direct = direct_coercive_minimize(&mesh, &table, lambda)?;
    let schedule: Vec<f64> = (1..=5).map(|p| 10.0f64.powi(-p)).collect();
    let settings = RelaxSettings { fp_tol: 1.0e-7, ..RelaxSettings::default() };
    let relaxed = continuation(&mesh, lambda, 1, &schedule, &settings)?;
    let rel = ((relaxed.mu_star - direct.value) / direct.value).abs();
    Ok(outcome(
        "coercive-crosscheck",
        rel <= 1.0e-4,
        format!("direct vs relaxed minimum relative gap: {rel:.3e}"),
    ))
}

fn mass_center_oracle(lambda: f64) -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(400)?;
    let table = table_covering_core(&mesh, lambda)?;
    if let Err(CoreError::NearSpectrum { nearest, .. }) =
        table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)
    {
        return Ok(Outcome {
            name: "mass-center-oracle",
            status: Status::Skip,
            detail: format!(
                "lambda = {lambda} sits on the Dirichlet spectrum (nearest {nearest:.6}); \
                 the mass is undefined there"
            ),
        });
    }
    let mass = greenmass::mass_at(&mesh, &table, lambda, Probe::Center)?;
    let root = lambda.sqrt();
    let oracle = -root * (root.cos() / root.sin()) / (4.0 * std::f64::consts::PI);
    let rel = ((mass - oracle) / oracle).abs();
    Ok(outcome(
        "mass-center-oracle",
        rel <= 1.0e-2,
        format!("center mass vs -sqrt(l) cot(sqrt(l)) / 4 pi: relative error {rel:.3e}"),
    ))
}

fn mass_derivative_identity(lambda: f64) -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(400)?;
    let table = table_covering_core(&mesh, lambda)?;
    if let Err(CoreError::NearSpectrum { nearest, .. }) =
        table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)
    {
        return Ok(Outcome {
            name: "mass-derivative-identity",
            status: Status::Skip,
            detail: format!(
                "lambda = {lambda} sits on the Dirichlet spectrum (nearest {nearest:.6}); \
                 the mass is undefined there"
            ),
        });
    }
    let delta = 1.0e-3 * lambda.abs().max(1.0);
    let d = greenmass::mass_derivative_identity(&mesh, &table, lambda, Probe::Center, delta)?;
    let rel =
        ((d.finite_difference - d.green_square_integral) / d.green_square_integral).abs();
    let positive = d.green_square_integral > 0.0;
    Ok(outcome(
        "mass-derivative-identity",
        rel <= tol::MASS_DERIV_REL && positive,
        format!("dm/dlambda vs int G^2: relative error {rel:.3e}"),
    ))
}

fn relaxation_stage_converges() -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(100)?;
    let table = dirichlet_spectrum(&mesh, 2)?;
    let lambda = 0.5 * table.distinct(1)?;
    let schedule: Vec<f64> = (1..=4).map(|p| 10.0f64.powi(-p)).collect();
    let res = continuation(&mesh, lambda, 1, &schedule, &RelaxSettings::default())?;
    let all = res.stages.iter().all(|s| s.converged);
    let worst = res.stages.iter().map(|s| s.fp_residual).fold(0.0, f64::max);
    Ok(outcome(
        "relaxation-stage-converges",
        all,
        format!(
            "{} stages converged, worst fixed-point residual {worst:.3e}",
            res.stages.len()
        ),
    ))
}

fn second_order_quartic_scaling(seed: u64) -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(150)?;
    let table = dirichlet_spectrum(&mesh, 2)?;
    let lambda = 0.6 * table.distinct(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
    let values: Vec<f64> = (0..mesh.n_nodes()).map(|_| 0.5 + rng.gen::<f64>()).collect();
    let weight = WeightField::new(&mesh, values)?;
    let constant = vec![1.0; mesh.n_nodes()];
    let report = second_order_check(&mesh, lambda, &weight, 1, &constant)?;
    let err = (report.c2_model - 10.0).abs();
    Ok(outcome(
        "second-order-quartic-scaling",
        err <= 1.0e-8,
        format!("constant-direction curvature vs exact value 10: error {err:.3e}"),
    ))
}

fn bifurcation_approach() -> Result<Outcome, CoreError> {
    let mesh = Mesh::radial_ball(200)?;
    let table = dirichlet_spectrum(&mesh, 2)?;
    let lambda = 0.99 * table.distinct(1)?;
    let schedule: Vec<f64> = (1..=6).map(|p| 10.0f64.powi(-p)).collect();
    let settings = RelaxSettings { fp_tol: 1.0e-7, ..RelaxSettings::default() };
    let res = continuation(&mesh, lambda, 1, &schedule, &settings)?;
    let sol = extract_solution(&mesh, &res.pair)?;
    let report = bifurcation_check(&mesh, &table, lambda, &sol.psi)?;
    Ok(outcome(
        "bifurcation-approach",
        report.residual <= 5.0e-2,
        format!(
            "linearized projection residual {:.3e} at amplitude {:.3e}",
            report.residual, report.amplitude
        ),
    ))
}

/// Spectrum table whose top cluster clears `lambda`; core-error flavor of
/// the command helper so check bodies stay in `CoreError`.
fn table_covering_core(
    mesh: &Mesh,
    lambda: f64,
) -> Result<critmin_core::spectral::SpectrumTable, CoreError> {
    let mut clusters = 2usize;
    loop {
        let table = critmin_core::spectral::spectrum_with_clusters(mesh, clusters)?;
        if table.distinct(table.n_distinct())? > lambda {
            return Ok(table);
        }
        if clusters >= 64 {
            return Err(CoreError::Precondition(format!(
                "lambda = {lambda} lies above the resolvable spectrum"
            )));
        }
        clusters += 2;
    }
}

pub fn cmd_verify(ctx: &Ctx, inject_fault: bool) -> Result<(), CliError> {
    let lambda_mass = ctx.cfg.as_ref().and_then(|c| c.lambda).unwrap_or(3.0);
    let seed = ctx.seed;

    let runs: Vec<(&'static str, Box<dyn FnOnce() -> Result<Outcome, CoreError>>)> = vec![
        ("radial-spectrum-oracle", Box::new(radial_spectrum_oracle)),
        ("box-spectrum-exact", Box::new(box_spectrum_exact)),
        ("sobolev-two-quadratures", Box::new(sobolev_two_quadratures)),
        ("constant-weight-identity", Box::new(move || constant_weight_identity(seed))),
        (
            "sign-law-random-weights",
            Box::new(move || sign_law_random_weights(seed, inject_fault)),
        ),
        ("coercive-crosscheck", Box::new(coercive_crosscheck)),
        ("mass-center-oracle", Box::new(move || mass_center_oracle(lambda_mass))),
        ("mass-derivative-identity", Box::new(move || mass_derivative_identity(lambda_mass))),
        ("relaxation-stage-converges", Box::new(relaxation_stage_converges)),
        ("second-order-quartic-scaling", Box::new(move || second_order_quartic_scaling(seed))),
        ("bifurcation-approach", Box::new(bifurcation_approach)),
    ];

    let mut outcomes = Vec::with_capacity(runs.len());
    for (name, run) in runs {
        let out = run().unwrap_or_else(|e| Outcome {
            name,
            status: Status::Fail,
            detail: format!("check aborted: {e}"),
        });
        println!("[{}] {}: {}", out.status.as_str(), out.name, out.detail);
        outcomes.push(out);
    }

    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    let (passes, failures, skips) = (count(Status::Pass), count(Status::Fail), count(Status::Skip));

    let write_json = ctx.cfg.as_ref().map_or(true, |c| c.write_json);
    if write_json {
        let checks: Vec<Json> = outcomes
            .iter()
            .map(|o| {
                Json::Object(vec![
                    ("detail", Json::Str(o.detail.clone())),
                    ("name", Json::Str(o.name.to_string())),
                    ("status", Json::Str(o.status.as_str().to_string())),
                ])
            })
            .collect();
        let doc = Json::Object(vec![
            ("checks", Json::Array(checks)),
            ("failures", Json::UInt(failures as u64)),
            ("passes", Json::UInt(passes as u64)),
            ("seed", Json::UInt(seed)),
            ("skips", Json::UInt(skips as u64)),
        ]);
        let path = ctx.out.join("verify.json");
        std::fs::write(&path, emit::to_json(&doc))
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }

    if failures > 0 {
        return Err(CliError::VerifyFailed(failures));
    }
    Ok(())
}
