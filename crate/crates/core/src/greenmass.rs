//! Green functions of `-Delta - lambda` and the mass of their regular part.
//!
//! Writing `Phi(x, y) = 1 / (4 pi |x - y|)` for the Newtonian kernel, the
//! Green function splits as `G_lambda(x, y) = Phi(x, y) + H_lambda(x, y)`
//! where the regular part solves
//!
//! ```text
//! (-Delta - lambda) H = lambda Phi(x, .)  in the domain,
//! H = -Phi(x, .)                          on the boundary,
//! ```
//!
//! and the mass is the diagonal value `m_lambda(x) = H_lambda(x, x)`.  The
//! mass is increasing in `lambda` (`dm/dlambda = int G^2`), tends to the
//! boundary law `-1/(8 pi d(x))` for `lambda = 0` near the wall, and blows
//! up like `sum_j phi_j(x)^2 / (Lambda - lambda)` below an eigenvalue
//! `Lambda`; its zero crossing `lambda_*` inside a spectral interval is the
//! threshold for attainment of the critical minimization.

use crate::error::{CoreError, Result};
use crate::linalg::{dot, minres, TridiagLU};
use crate::mesh::{Mesh, MeshKind};
use crate::spectral::SpectrumTable;
use crate::tol;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Where to place the singular source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// The center of a radial mesh.
    Center,
    /// An interior node of a box mesh, by linear index.
    Node(usize),
}

struct ProbeInfo {
    /// Node carrying the delta load.
    node: usize,
    position: [f64; 3],
    /// Whether the probe sits at an actual node (false for the radial
    /// center, which lies below the first shell).
    on_node: bool,
}

fn resolve_probe(mesh: &Mesh, probe: Probe) -> Result<ProbeInfo> {
    match (mesh.kind(), probe) {
        (MeshKind::RadialBall, Probe::Center) => {
            Ok(ProbeInfo { node: 0, position: [0.0, 0.0, 0.0], on_node: false })
        }
        (MeshKind::RadialBall, Probe::Node(_)) => Err(CoreError::Precondition(
            "radial meshes are probed at the center only".into(),
        )),
        (MeshKind::Box3, Probe::Center) => Err(CoreError::Precondition(
            "box meshes are probed at explicit nodes".into(),
        )),
        (MeshKind::Box3, Probe::Node(node)) => {
            if node >= mesh.n_nodes() {
                return Err(CoreError::Precondition(format!(
                    "probe node {node} outside mesh with {} nodes",
                    mesh.n_nodes()
                )));
            }
            let position = mesh.position(node);
            let spacings = mesh.spacings();
            let distance = mesh.boundary_distance(position);
            let required =
                (tol::PROBE_MARGIN_CELLS + 0.5) * spacings.iter().cloned().fold(0.0, f64::max);
            if distance < required {
                return Err(CoreError::ProbeTooClose { distance, required });
            }
            Ok(ProbeInfo { node, position, on_node: true })
        }
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Solve `(A - lambda M) x = rhs`.  Radial meshes use a pivoted tridiagonal
/// factorization; boxes use diagonally scaled MINRES, which tolerates the
/// indefiniteness above interior eigenvalues.
pub(crate) fn solve_shifted(mesh: &Mesh, lambda: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    match mesh.kind() {
        MeshKind::RadialBall => {
            let t = mesh.stiffness_tridiag().expect("radial stiffness is tridiagonal");
            let mut k = t;
            for (d, w) in k.diag.iter_mut().zip(mesh.weights()) {
                *d -= lambda * w;
            }
            let lu = TridiagLU::factor_shifted(&k, 0.0);
            let mut x = rhs.to_vec();
            lu.solve(&mut x);
            Ok(x)
        }
        MeshKind::Box3 => {
            let w = mesh.weights();
            let n = mesh.n_nodes();
            let op = |v: &[f64], out: &mut [f64]| {
                mesh.apply_stiffness(v, out);
                for i in 0..n {
                    out[i] -= lambda * w[i] * v[i];
                }
            };
            let diag: Vec<f64> = mesh
                .stiffness_diag()
                .iter()
                .zip(w)
                .map(|(d, wi)| (d - lambda * wi).abs().max(1.0e-12))
                .collect();
            let (x, _) = minres(op, Some(&diag), rhs, tol::KRYLOV_REL_RESID, tol::KRYLOV_MAX_ITERS)?;
            Ok(x)
        }
    }
}

/// Node values of the Green function `G_lambda(., probe)`.
///
/// `lambda` must stay clear of the Dirichlet spectrum; closeness is judged
/// against the containing spectral interval of `table`.
pub fn green_column(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    probe: Probe,
) -> Result<Vec<f64>> {
    table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)?;
    let info = resolve_probe(mesh, probe)?;
    let mut rhs = vec![0.0; mesh.n_nodes()];
    rhs[info.node] = 1.0;
    solve_shifted(mesh, lambda, &rhs)
}

/// Node values of the Newtonian kernel `Phi(., probe)`.  The probe cell
/// itself gets the average of the kernel over the volume-equivalent ball,
/// `3 / (8 pi a)` with `a = (3 w / 4 pi)^(1/3)`.
fn newton_column(mesh: &Mesh, info: &ProbeInfo) -> Vec<f64> {
    let w = mesh.weights();
    (0..mesh.n_nodes())
        .map(|i| {
            if info.on_node && i == info.node {
                let a = (3.0 * w[i] / FOUR_PI).cbrt();
                3.0 / (8.0 * std::f64::consts::PI * a)
            } else {
                1.0 / (FOUR_PI * dist(mesh.position(i), info.position))
            }
        })
        .collect()
}

fn mass_rhs(mesh: &Mesh, lambda: f64, info: &ProbeInfo) -> Vec<f64> {
    let w = mesh.weights();
    let phi_col = newton_column(mesh, info);
    let mut rhs: Vec<f64> =
        phi_col.iter().zip(w).map(|(p, wi)| wi * lambda * p).collect();
    // Dirichlet data H = -Phi on the wall enters through the face closures.
    for link in mesh.boundary_links() {
        let d = dist(link.point, info.position);
        rhs[link.node] -= link.coeff / (FOUR_PI * d);
    }
    rhs
}

/// Node values of the regular part `H_lambda(., probe)`.
pub fn regular_part(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    probe: Probe,
) -> Result<Vec<f64>> {
    table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)?;
    let info = resolve_probe(mesh, probe)?;
    let rhs = mass_rhs(mesh, lambda, &info);
    solve_shifted(mesh, lambda, &rhs)
}

fn read_at_probe(mesh: &Mesh, field: &[f64], info: &ProbeInfo) -> Result<f64> {
    if info.on_node {
        Ok(field[info.node])
    } else {
        // The regular part genuinely has a linear term in r at the center,
        // so extrapolate linearly rather than assuming an even profile.
        mesh.radial_center_value_linear(field)
    }
}

/// The mass `m_lambda(probe) = H_lambda(probe, probe)`.
pub fn mass_at(mesh: &Mesh, table: &SpectrumTable, lambda: f64, probe: Probe) -> Result<f64> {
    table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)?;
    let info = resolve_probe(mesh, probe)?;
    let rhs = mass_rhs(mesh, lambda, &info);
    let h = solve_shifted(mesh, lambda, &rhs)?;
    read_at_probe(mesh, &h, &info)
}

/// Both sides of the monotonicity identity `dm/dlambda = int G^2`: a central
/// difference of the mass against the quadrature of the squared Green
/// column.
#[derive(Debug, Clone, Copy)]
pub struct MassDerivative {
    pub finite_difference: f64,
    pub green_square_integral: f64,
}

pub fn mass_derivative_identity(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    probe: Probe,
    delta: f64,
) -> Result<MassDerivative> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CoreError::Precondition(format!("delta = {delta} must be positive")));
    }
    let m_plus = mass_at(mesh, table, lambda + delta, probe)?;
    let m_minus = mass_at(mesh, table, lambda - delta, probe)?;
    let g = green_column(mesh, table, lambda, probe)?;
    let w = mesh.weights();
    let integral: f64 = g.iter().zip(w).map(|(gi, wi)| wi * gi * gi).sum();
    Ok(MassDerivative {
        finite_difference: (m_plus - m_minus) / (2.0 * delta),
        green_square_integral: integral,
    })
}

// ---------------------------------------------------------------------------
// Threshold location
// ---------------------------------------------------------------------------

/// A bisection estimate of the zero crossing of the mass in a spectral
/// interval.
#[derive(Debug, Clone)]
pub struct ThresholdEstimate {
    /// The spectral interval searched.
    pub interval: (f64, f64),
    /// Midpoint of the final bracket.
    pub lambda_star: f64,
    /// Final sign-change bracket.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Locate `lambda_*` where `max_probes m_lambda` changes sign inside the
/// `interval_index`-th spectral interval (0 = below the first eigenvalue).
/// The mass is increasing in `lambda`, so a sign change is a simple zero.
pub fn lambda_star(
    mesh: &Mesh,
    table: &SpectrumTable,
    interval_index: usize,
    probes: &[Probe],
    rel_tol: f64,
) -> Result<ThresholdEstimate> {
    if probes.is_empty() {
        return Err(CoreError::Precondition("lambda_star needs at least one probe".into()));
    }
    if !(rel_tol > 0.0 && rel_tol < 0.5) {
        return Err(CoreError::Precondition(format!("rel_tol = {rel_tol} out of (0, 0.5)")));
    }
    let hi = table.distinct(interval_index + 1)?;
    let lo = if interval_index == 0 { 0.0 } else { table.distinct(interval_index)? };
    let len = hi - lo;
    // Twice the spectral guard, so that endpoint evaluations cannot trip it.
    let inset = 2.0 * tol::SPEC_TOL_REL.max(1.0e-3) * len;
    let mut evaluations = 0usize;
    let mut f = |lambda: f64| -> Result<f64> {
        evaluations += 1;
        let mut worst = f64::NEG_INFINITY;
        for &p in probes {
            worst = worst.max(mass_at(mesh, table, lambda, p)?);
        }
        Ok(worst)
    };
    let mut a = lo + inset;
    let mut b = hi - inset;
    let fa = f(a)?;
    let fb = f(b)?;
    if fa >= 0.0 || fb <= 0.0 {
        return Err(CoreError::ThresholdNotBracketed(format!(
            "mass does not change sign on [{a:.6}, {b:.6}]: m({a:.6}) = {fa:.3e}, m({b:.6}) = \
             {fb:.3e}"
        )));
    }
    while b - a > rel_tol * len {
        let mid = 0.5 * (a + b);
        if f(mid)? > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(ThresholdEstimate {
        interval: (lo, hi),
        lambda_star: 0.5 * (a + b),
        bracket: (a, b),
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// Deflation at an eigenvalue
// ---------------------------------------------------------------------------

/// The deflated mass at a Dirichlet eigenvalue, together with the achieved
/// orthogonality defect of the deflated solve.
#[derive(Debug, Clone)]
pub struct DeflatedMass {
    pub value: f64,
    /// `max_j |phi_j' M x| / ||x||_M` over the eigenspace basis.
    pub defect: f64,
}

fn eigenspace_checked<'t>(
    mesh: &Mesh,
    table: &'t SpectrumTable,
    i: usize,
) -> Result<(&'t [Vec<f64>], f64, f64)> {
    let value = table.distinct(i)?;
    let space = table.eigenspace(i)?;
    // The deflation is only as good as the eigenpairs: check their residuals.
    let w = mesh.weights();
    let n = mesh.n_nodes();
    let mut av = vec![0.0; n];
    for phi in space {
        mesh.apply_stiffness(phi, &mut av);
        let mut res = 0.0;
        let mut scale = 0.0;
        for idx in 0..n {
            let r = av[idx] - value * w[idx] * phi[idx];
            res += r * r;
            scale += (av[idx]) * (av[idx]);
        }
        if res.sqrt() > tol::DEFLATION_TOL * scale.sqrt().max(1.0e-300) {
            return Err(CoreError::Precondition(format!(
                "eigenpair residual {:.3e} too large for deflation at eigenvalue {i}",
                res.sqrt() / scale.sqrt()
            )));
        }
    }
    let gap = if i + 1 <= table.n_distinct() && i >= 1 {
        let next = if i < table.n_distinct() { table.distinct(i + 1)? } else { value * 2.0 };
        let prev = if i > 1 { table.distinct(i - 1)? } else { 0.0 };
        (next - value).min(value - prev)
    } else {
        value
    };
    Ok((space, value, gap))
}

/// Solve the deflated system `(A - Lambda_i M) x = rhs` on the M-orthogonal
/// complement of the eigenspace, via the symmetric rank shift
/// `K + sigma (M Phi)(M Phi)'`.  The right-hand side is projected onto the
/// complement first, which makes the shifted solution exactly the deflated
/// one.  Returns the solution and its orthogonality defect.
fn deflated_solve(
    mesh: &Mesh,
    basis: &[Vec<f64>],
    value: f64,
    gap: f64,
    rhs_in: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = mesh.n_nodes();
    let w = mesh.weights();
    let mut rhs = rhs_in.to_vec();
    for phi in basis {
        let c = dot(phi, &rhs);
        for i in 0..n {
            rhs[i] -= c * w[i] * phi[i];
        }
    }
    let sigma = gap.max(1.0);
    let op = |v: &[f64], out: &mut [f64]| {
        mesh.apply_stiffness(v, out);
        for i in 0..n {
            out[i] -= value * w[i] * v[i];
        }
        for phi in basis {
            let c = sigma * crate::linalg::dot_w(phi, v, w);
            for i in 0..n {
                out[i] += c * w[i] * phi[i];
            }
        }
    };
    let diag: Vec<f64> = mesh
        .stiffness_diag()
        .iter()
        .zip(w)
        .map(|(d, wi)| (d - value * wi).abs().max(1.0e-12))
        .collect();
    let (x, _) = minres(op, Some(&diag), &rhs, tol::KRYLOV_REL_RESID, tol::KRYLOV_MAX_ITERS)?;
    let xm = {
        let mut s = 0.0;
        for i in 0..n {
            s += w[i] * x[i] * x[i];
        }
        s.sqrt().max(1.0e-300)
    };
    let mut defect = 0.0_f64;
    for phi in basis {
        defect = defect.max(crate::linalg::dot_w(phi, &x, w).abs() / xm);
    }
    Ok((x, defect))
}

/// Node values of the deflated Green function at the i-th distinct
/// eigenvalue: `(-Delta - Lambda_i) G = delta_x - sum_j phi_j(x) phi_j`,
/// M-orthogonal to the eigenspace.
pub fn deflated_green_column(
    mesh: &Mesh,
    table: &SpectrumTable,
    i: usize,
    probe: Probe,
) -> Result<(Vec<f64>, f64)> {
    let info = resolve_probe(mesh, probe)?;
    let (basis, value, gap) = eigenspace_checked(mesh, table, i)?;
    let probe_values: Vec<f64> = basis
        .iter()
        .map(|phi| eigenfunction_at_probe(mesh, phi, &info))
        .collect::<Result<_>>()?;
    let n = mesh.n_nodes();
    let w = mesh.weights();
    let mut rhs = vec![0.0; n];
    rhs[info.node] = 1.0;
    for (phi, &pv) in basis.iter().zip(&probe_values) {
        for idx in 0..n {
            rhs[idx] -= pv * w[idx] * phi[idx];
        }
    }
    deflated_solve(mesh, basis, value, gap, &rhs)
}

fn eigenfunction_at_probe(mesh: &Mesh, phi: &[f64], info: &ProbeInfo) -> Result<f64> {
    if info.on_node {
        Ok(phi[info.node])
    } else {
        mesh.radial_center_value_even(phi)
    }
}

/// The deflated mass at the i-th distinct eigenvalue: the finite limit of
/// `m_lambda - sum_j phi_j(x)^2 / (Lambda_i - lambda)` as `lambda` tends to
/// `Lambda_i` from below.
pub fn deflated_mass(
    mesh: &Mesh,
    table: &SpectrumTable,
    i: usize,
    probe: Probe,
) -> Result<DeflatedMass> {
    let info = resolve_probe(mesh, probe)?;
    let (basis, value, gap) = eigenspace_checked(mesh, table, i)?;
    let probe_values: Vec<f64> = basis
        .iter()
        .map(|phi| eigenfunction_at_probe(mesh, phi, &info))
        .collect::<Result<_>>()?;
    let mut rhs = mass_rhs(mesh, value, &info);
    let n = mesh.n_nodes();
    let w = mesh.weights();
    for (phi, &pv) in basis.iter().zip(&probe_values) {
        for idx in 0..n {
            rhs[idx] -= pv * w[idx] * phi[idx];
        }
    }
    let (mut h, defect) = deflated_solve(mesh, basis, value, gap, &rhs)?;
    // The solve fixes the eigencomponents of H to zero, but the regular
    // part is the deflated kernel minus the Newtonian column, so its true
    // eigencomponents are c_j = -(phi_j, Phi(., probe)).
    let phi_col = newton_column(mesh, &info);
    for phi in basis {
        let c = -crate::linalg::dot_w(phi, &phi_col, w);
        for idx in 0..n {
            h[idx] += c * phi[idx];
        }
    }
    let value_at = read_at_probe(mesh, &h, &info)?;
    Ok(DeflatedMass { value: value_at, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectrum_with_clusters;

    fn ball_mass_oracle(lambda: f64) -> f64 {
        // m_lambda(0) = -sqrt(lambda) cot(sqrt(lambda)) / (4 pi) on the unit
        // ball.
        let s = lambda.sqrt();
        -s * s.cos() / s.sin() / FOUR_PI
    }

    #[test]
    fn radial_green_column_matches_closed_forms() {
        let mesh = Mesh::radial_ball(400).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        // lambda = 0: G = (1/r - 1) / (4 pi).
        let g0 = green_column(&mesh, &table, 0.0, Probe::Center).unwrap();
        for j in (80..380).step_by(60) {
            let r = (j as f64 + 0.5) / 400.0;
            let exact = (1.0 / r - 1.0) / FOUR_PI;
            assert!(
                ((g0[j] - exact) / exact).abs() < 1.0e-3,
                "r = {r}: {} vs {exact}",
                g0[j]
            );
        }
        // lambda = 5: G = sin(sqrt(5)(1 - r)) / (4 pi r sin sqrt(5)).
        let l = 5.0_f64;
        let g5 = green_column(&mesh, &table, l, Probe::Center).unwrap();
        for j in (80..380).step_by(60) {
            let r = (j as f64 + 0.5) / 400.0;
            let exact = (l.sqrt() * (1.0 - r)).sin() / (FOUR_PI * r * l.sqrt().sin());
            assert!(
                ((g5[j] - exact) / exact).abs() < 1.0e-3,
                "r = {r}: {} vs {exact}",
                g5[j]
            );
        }
    }

    #[test]
    fn ball_center_mass_matches_cotangent_formula() {
        let mesh = Mesh::radial_ball(500).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        for &lambda in &[1.0, 2.0, 3.0, 5.0, 8.0] {
            let m = mass_at(&mesh, &table, lambda, Probe::Center).unwrap();
            let exact = ball_mass_oracle(lambda);
            assert!(
                (m - exact).abs() < 1.0e-3 * exact.abs().max(0.05),
                "lambda = {lambda}: {m} vs {exact}"
            );
        }
        // Sign structure around the ball threshold pi^2/4.
        let m_low = mass_at(&mesh, &table, 2.0, Probe::Center).unwrap();
        let m_high = mass_at(&mesh, &table, 3.0, Probe::Center).unwrap();
        assert!(m_low < 0.0 && m_high > 0.0, "{m_low} {m_high}");
    }

    #[test]
    fn mass_derivative_identity_holds() {
        let mesh = Mesh::radial_ball(300).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let check =
            mass_derivative_identity(&mesh, &table, 5.0, Probe::Center, 1.0e-3).unwrap();
        // The Green-square quadrature is first order near the singularity,
        // so the two sides agree at the discretization level only.
        let rel = (check.finite_difference - check.green_square_integral).abs()
            / check.green_square_integral;
        assert!(rel < tol::MASS_DERIV_REL, "fd {} vs int {}", check.finite_difference, check.green_square_integral);
        assert!(check.green_square_integral > 0.0);
    }

    #[test]
    fn box_mass_derivative_identity_holds() {
        let mesh = Mesh::box3([1.0, 1.0, 1.0], 17).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let probe = Probe::Node(mesh.box_node(8, 8, 8).unwrap());
        let check = mass_derivative_identity(&mesh, &table, 8.0, probe, 1.0e-2).unwrap();
        let rel = (check.finite_difference - check.green_square_integral).abs()
            / check.green_square_integral;
        assert!(rel < 5.0e-2, "fd {} vs int {}", check.finite_difference, check.green_square_integral);
    }

    #[test]
    fn threshold_is_found_on_the_ball() {
        let mesh = Mesh::radial_ball(400).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let est = lambda_star(&mesh, &table, 0, &[Probe::Center], 1.0e-3).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 4.0;
        assert!(
            ((est.lambda_star - exact) / exact).abs() < 1.0e-2,
            "{} vs {exact}",
            est.lambda_star
        );
        assert!(est.bracket.0 < est.lambda_star && est.lambda_star < est.bracket.1);
        assert!(est.evaluations > 5);
    }

    #[test]
    fn guards_reject_bad_inputs() {
        let mesh = Mesh::radial_ball(200).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let l1 = table.distinct(1).unwrap();
        assert!(matches!(
            mass_at(&mesh, &table, l1 + 1.0e-9, Probe::Center),
            Err(CoreError::NearSpectrum { .. })
        ));
        assert!(mass_at(&mesh, &table, 5.0, Probe::Node(10)).is_err());
        let boxm = Mesh::box3([1.0, 1.0, 1.0], 9).unwrap();
        let btable = spectrum_with_clusters(&boxm, 2).unwrap();
        let wall = boxm.box_node(0, 4, 4).unwrap();
        assert!(matches!(
            mass_at(&boxm, &btable, 5.0, Probe::Node(wall)),
            Err(CoreError::ProbeTooClose { .. })
        ));
        assert!(mass_at(&boxm, &btable, 5.0, Probe::Center).is_err());
    }

    #[test]
    fn deflated_solves_are_orthogonal_and_consistent() {
        let mesh = Mesh::radial_ball(300).unwrap();
        let table = spectrum_with_clusters(&mesh, 3).unwrap();
        let (g, defect) = deflated_green_column(&mesh, &table, 1, Probe::Center).unwrap();
        assert!(defect <= tol::DEFLATION_TOL, "defect {defect}");
        assert!(g.iter().all(|x| x.is_finite()));
        let dm = deflated_mass(&mesh, &table, 1, Probe::Center).unwrap();
        assert!(dm.defect <= tol::DEFLATION_TOL);
        // Consistency with the singular expansion: m(lambda) minus the pole
        // term should approach the deflated value as lambda -> Lambda_1.
        let l1 = table.distinct(1).unwrap();
        let phi1 = &table.eigenspace(1).unwrap()[0];
        let p0 = mesh.radial_center_value_even(phi1).unwrap();
        let d = 0.05;
        let m = mass_at(&mesh, &table, l1 - d, Probe::Center).unwrap();
        let compensated = m - p0 * p0 / d;
        assert!(
            (compensated - dm.value).abs() < 0.05 * dm.value.abs().max(1.0),
            "compensated {compensated} vs deflated {}",
            dm.value
        );
    }
}
