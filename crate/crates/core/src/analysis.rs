//! Analysis layer on top of the spectral and relaxation machinery: an
//! independent direct minimizer for the coercive range, lambda sweeps,
//! second-order expansion checks, bubble test families near the threshold,
//! and a bifurcation diagnostic.

use std::time::Instant;

use crate::error::{CoreError, Result};
use crate::greenmass::{self, Probe};
use crate::linalg::{dot, dot_w, minres, norm2};
use crate::mesh::{Mesh, MeshKind};
use crate::relaxopt::{continuation, RelaxSettings};
use crate::sobolev;
use crate::spectral::{b_diag, norm_l6, weighted_eigenpairs, SpectrumTable, WeightField};
use crate::tol;

/// The strict upper threshold of the critical minimization: the inverse
/// square of the best constant in the three-dimensional Sobolev embedding
/// into L^6, equal to `3 (pi / 2)^(4/3)`.
#[must_use]
pub fn sobolev_threshold() -> f64 {
    sobolev::best_constant_squared()
}

/// The 3/2 power of the threshold: the Dirichlet energy (and critical norm
/// to the sixth power) of the standard bubble, equal to `3 sqrt(3) pi^2 / 4`.
#[must_use]
pub fn bubble_energy() -> f64 {
    sobolev::best_constant_cubed()
}

/// Relative disagreement between the two bubble quadratures behind the
/// threshold constant (Dirichlet energy vs. critical norm, equal for the
/// exact profile): the numerical error bar of the oracle itself.
#[must_use]
pub fn sobolev_oracle_agreement() -> f64 {
    sobolev::quadrature_agreement()
}

// ---------------------------------------------------------------------------
// Direct minimization in the coercive range
// ---------------------------------------------------------------------------

/// Result of the direct fixed-point minimization of
/// `(int |grad v|^2 - lambda v^2) / (int v^6)^(1/3)`.
#[derive(Debug, Clone)]
pub struct CoerciveMinimum {
    /// The quotient at the last iterate, whose L^6 norm is one.
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
}

const DIRECT_MAX_ITERS: usize = 20_000;

/// Minimize the critical quotient directly for `0 < lambda < Lambda_1`,
/// where the quadratic form is coercive, by the fixed-point iteration
/// `v <- normalize((A - lambda M)^-1 M v^5)`.  For the first principal
/// index this gives the same value as the weighted-eigenvalue minimization
/// and serves as an independent cross-check of the relaxation path.
pub fn direct_coercive_minimize(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
) -> Result<CoerciveMinimum> {
    let l1 = table.distinct(1)?;
    if !(lambda > 0.0 && lambda < l1 * (1.0 - tol::SPEC_TOL_REL)) {
        return Err(CoreError::Precondition(format!(
            "direct minimization needs 0 < lambda < Lambda_1 = {l1:.6}, got {lambda}"
        )));
    }
    let n = mesh.n_nodes();
    let w = mesh.weights();
    let form = |v: &[f64]| -> f64 {
        let mut av = vec![0.0; n];
        mesh.apply_stiffness(v, &mut av);
        dot(v, &av) - lambda * dot_w(v, v, w)
    };
    let mut v: Vec<f64> = table.eigenvectors[0].iter().map(|x| x.abs()).collect();
    let s = norm_l6(mesh, &v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut value = form(&v);
    for it in 1..=DIRECT_MAX_ITERS {
        let rhs: Vec<f64> = (0..n).map(|i| w[i] * v[i].powi(5)).collect();
        let z = greenmass::solve_shifted(mesh, lambda, &rhs)?;
        let zn = norm_l6(mesh, &z);
        if !(zn > 0.0 && zn.is_finite()) {
            return Err(CoreError::NonFinite("direct minimization iterate"));
        }
        let mut cand: Vec<f64> = z.iter().map(|x| x / zn).collect();
        let mut val_new = form(&cand);
        if val_new > value {
            // The plain step overshot; fall back to the midpoint.
            for i in 0..n {
                cand[i] = 0.5 * (cand[i] + v[i]);
            }
            let cn = norm_l6(mesh, &cand);
            cand.iter_mut().for_each(|x| *x /= cn);
            val_new = form(&cand);
        }
        let drop = value - val_new;
        v = cand;
        value = val_new;
        if drop.abs() <= tol::DIRECT_MIN_REL * value.abs() {
            return Ok(CoerciveMinimum { value, minimizer: v, iterations: it });
        }
    }
    Err(CoreError::SolveNonConvergence { iterations: DIRECT_MAX_ITERS, residual: value })
}

// ---------------------------------------------------------------------------
// Lambda sweeps
// ---------------------------------------------------------------------------

/// One converged point of a lambda sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Index of the spectral interval containing lambda (0 below Lambda_1).
    pub interval_index: usize,
    /// Principal index attached to that interval.
    pub k: usize,
    pub mu_star: f64,
    /// `mu_star^(3/2)`, the critical energy scale of the extracted solution.
    pub energy: f64,
    pub attained: bool,
    pub el_residual: f64,
    /// The constant-weight upper bound `|Omega|^(2/3) (Lambda_(i+1) - lambda)`
    /// with the discrete eigenvalue, valid for the discrete minimum.
    pub mu_upper_bound: f64,
    pub wall_time_ms: f64,
    /// Final minimizing weight, kept for per-weight regularity checks.
    pub weight: WeightField,
}

/// A sweep over a lambda grid.  Failures do not abort the remaining grid.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<(f64, String)>,
}

pub fn sweep_energy(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambdas: &[f64],
    schedule: &[f64],
    settings: &RelaxSettings,
) -> SweepReport {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &lambda in lambdas {
        let start = Instant::now();
        let outcome = (|| -> Result<SweepPoint> {
            let iv = table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)?;
            let k = table.multiplicity_index(iv.index)?;
            let res = continuation(mesh, lambda, k, schedule, settings)?;
            Ok(SweepPoint {
                lambda,
                interval_index: iv.index,
                k,
                mu_star: res.mu_star,
                energy: res.mu_star.powf(1.5),
                attained: res.attained,
                el_residual: res.el_residual,
                mu_upper_bound: mesh.volume().powf(2.0 / 3.0) * (iv.hi - lambda),
                wall_time_ms: start.elapsed().as_secs_f64() * 1.0e3,
                weight: res.weight,
            })
        })();
        match outcome {
            Ok(p) => points.push(p),
            Err(e) => failures.push((lambda, e.to_string())),
        }
    }
    SweepReport { points, failures }
}

// ---------------------------------------------------------------------------
// Second-order expansion
// ---------------------------------------------------------------------------

/// Ingredients and outcomes of the second-order expansion of
/// `mu_k(u (1 + t h))` around `t = 0`:
///
/// ```text
/// mu(t) / mu = 1 - 4 Q1 t + c2 t^2 + o(t^2),
/// c2 = 4 (4 Q1^2 - (3/2) Q2 - Q_psi).
/// ```
///
/// The averages use the eigen-measure `w u^4 phi_k^2`, which at a relaxed
/// minimizer coincides with `w u^6`; with that measure the expansion is
/// exact for every weight, not only minimizers.  `h` is normalized to unit
/// sup norm on entry.
#[derive(Debug, Clone)]
pub struct SecondOrderReport {
    pub mu: f64,
    /// First moment of `h` in the eigen-measure.
    pub q1: f64,
    /// Second moment of `h` in the eigen-measure.
    pub q2: f64,
    /// Coupling of `h` to the first-order eigenvector correction.
    pub q_psi: f64,
    pub c2_model: f64,
    /// Richardson-extrapolated central finite difference of `mu(t)`.
    pub c2_fd: f64,
    /// Discrete `int u^2 |grad h|^2` over interior edges.
    pub weighted_h_energy: f64,
    /// `(1/mu) int u^2 |grad h|^2 + 4 Q1^2 - 4 Q2`; nonnegative when the
    /// weight minimizes the critical value.
    pub stability_margin: f64,
    /// Eigencomponent left in the correction solve, relative to its B-norm.
    pub psi_defect: f64,
}

pub fn second_order_check(
    mesh: &Mesh,
    lambda: f64,
    weight: &WeightField,
    k: usize,
    direction: &[f64],
) -> Result<SecondOrderReport> {
    let n = mesh.n_nodes();
    if direction.len() != n {
        return Err(CoreError::Precondition(format!(
            "direction has {} entries, mesh has {n} nodes",
            direction.len()
        )));
    }
    if k == 0 {
        return Err(CoreError::Precondition("principal index k must be at least 1".into()));
    }
    let hmax = direction.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(hmax > 0.0 && hmax.is_finite()) {
        return Err(CoreError::NonFinite("perturbation direction"));
    }
    let h: Vec<f64> = direction.iter().map(|x| x / hmax).collect();
    let u = weight.normalized(mesh)?;
    let pairs = weighted_eigenpairs(mesh, lambda, &u, k + 1)?;
    let mu = pairs[k - 1].mu;
    if mu <= 0.0 {
        return Err(CoreError::Precondition(format!(
            "second-order expansion needs mu_k > 0, got {mu:.6e}"
        )));
    }
    let gap_above = (pairs[k].mu - mu).abs();
    let scale = mu.abs().max(pairs[k].mu.abs());
    let gap_below = if k >= 2 { (mu - pairs[k - 2].mu).abs() } else { f64::INFINITY };
    if gap_above <= tol::GAP_REL * scale || gap_below <= tol::GAP_REL * scale {
        return Err(CoreError::Precondition(
            "second-order expansion requires a simple eigenvalue; the target sits in a cluster"
                .into(),
        ));
    }
    let phi = &pairs[k - 1].phi;
    let b = b_diag(mesh, &u);
    let q1: f64 = (0..n).map(|i| b[i] * phi[i] * phi[i] * h[i]).sum();
    let q2: f64 = (0..n).map(|i| b[i] * phi[i] * phi[i] * h[i] * h[i]).sum();

    // First-order eigenvector correction, B-orthogonal to phi:
    // (A - lambda M - mu B) psi = 4 mu B phi (h - Q1).
    let mut rhs: Vec<f64> = (0..n).map(|i| 4.0 * mu * b[i] * phi[i] * (h[i] - q1)).collect();
    let c = dot(phi, &rhs);
    for i in 0..n {
        rhs[i] -= c * b[i] * phi[i];
    }
    let (psi, psi_defect) = if norm2(&rhs) == 0.0 {
        (vec![0.0; n], 0.0)
    } else {
        let w = mesh.weights();
        let sigma = gap_above.max(1.0);
        let op = |v: &[f64], out: &mut [f64]| {
            mesh.apply_stiffness(v, out);
            for i in 0..n {
                out[i] -= (lambda * w[i] + mu * b[i]) * v[i];
            }
            let cv = sigma * dot_w(phi, v, &b);
            for i in 0..n {
                out[i] += cv * b[i] * phi[i];
            }
        };
        let diag: Vec<f64> = mesh
            .stiffness_diag()
            .iter()
            .enumerate()
            .map(|(i, d)| (d - lambda * w[i] - mu * b[i]).abs().max(1.0e-12))
            .collect();
        let (mut psi, _) =
            minres(op, Some(&diag), &rhs, tol::KRYLOV_REL_RESID, tol::KRYLOV_MAX_ITERS)?;
        let d = dot_w(phi, &psi, &b);
        for i in 0..n {
            psi[i] -= d * phi[i];
        }
        // Floor the scale at one (the B-norm of the eigenvector itself), so
        // a negligible correction cannot inflate the ratio.
        let pn = dot_w(&psi, &psi, &b).sqrt().max(1.0);
        (psi, d.abs() / pn)
    };
    let q_psi: f64 = (0..n).map(|i| b[i] * psi[i] * phi[i] * h[i]).sum();
    let c2_model = 4.0 * (4.0 * q1 * q1 - 1.5 * q2 - q_psi);

    // Central differences of the k-th eigenvalue along the weight path.
    let mu_of = |t: f64| -> Result<f64> {
        let vals: Vec<f64> = (0..n).map(|i| u.values()[i] * (1.0 + t * h[i])).collect();
        let wt = WeightField::new(mesh, vals)?;
        Ok(weighted_eigenpairs(mesh, lambda, &wt, k)?[k - 1].mu)
    };
    let c2_at = |t: f64| -> Result<f64> {
        Ok(((mu_of(t)? + mu_of(-t)?) / (2.0 * mu) - 1.0) / (t * t))
    };
    let tau = 1.0e-3;
    let c2_fd = (4.0 * c2_at(tau)? - c2_at(2.0 * tau)?) / 3.0;

    let uv = u.values();
    let mut h_energy = 0.0;
    mesh.for_each_interior_edge(|i, j, ce| {
        let dh = h[i] - h[j];
        h_energy += ce * dh * dh * 0.5 * (uv[i] * uv[i] + uv[j] * uv[j]);
    });
    let stability_margin = h_energy / mu + 4.0 * q1 * q1 - 4.0 * q2;
    Ok(SecondOrderReport {
        mu,
        q1,
        q2,
        q_psi,
        c2_model,
        c2_fd,
        weighted_h_energy: h_energy,
        stability_margin,
        psi_defect,
    })
}

// ---------------------------------------------------------------------------
// Bubble test family
// ---------------------------------------------------------------------------

/// One member of a bubble test family.
#[derive(Debug, Clone)]
pub struct BubblePoint {
    pub eps: f64,
    /// Min-max upper bound for the critical value from the k-dimensional
    /// test span: the largest span eigenvalue times the weight norm factor.
    pub objective: f64,
    /// `(threshold - objective) / (threshold * eps * mass)`: positive and
    /// order one on both sides of the threshold when the expansion
    /// `objective = threshold (1 - const * mass * eps + o(eps))` holds.
    pub deviation_ratio: f64,
}

/// Outcome of driving a concentrated test family through the minimization.
#[derive(Debug, Clone)]
pub struct BubbleFamilyReport {
    pub lambda: f64,
    pub k: usize,
    /// Mass of the Green regular part at the center.
    pub mass: f64,
    /// Whether the mass is positive, the hypothesis under which the family
    /// is expected to dip strictly below the threshold.
    pub hypothesis_met: bool,
    pub threshold: f64,
    pub points: Vec<BubblePoint>,
}

/// Evaluate the critical objective on test spans built from the first
/// `k - 1` eigenfunctions plus a truncated bubble of width `eps` glued to
/// the Green column at the center.  Radial meshes only: the construction
/// concentrates at the center and needs the mesh to resolve widths well
/// below the domain scale.
pub fn bubble_test_family(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    eps_list: &[f64],
) -> Result<BubbleFamilyReport> {
    if mesh.kind() != MeshKind::RadialBall {
        return Err(CoreError::Precondition("bubble test families are built on radial meshes".into()));
    }
    let iv = table.interval_of_guarded(lambda, tol::SPEC_TOL_REL)?;
    let k = table.multiplicity_index(iv.index)?;
    if table.eigenvectors.len() < k - 1 {
        return Err(CoreError::Precondition(format!(
            "table holds {} eigenvectors, need {} below the interval",
            table.eigenvectors.len(),
            k - 1
        )));
    }
    let mass = greenmass::mass_at(mesh, table, lambda, Probe::Center)?;
    let g = greenmass::green_column(mesh, table, lambda, Probe::Center)?;
    let threshold = sobolev::best_constant_squared();
    let n = mesh.n_nodes();
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(CoreError::Precondition(format!("bubble width {eps} out of (0, 0.5)")));
        }
        // W(r) = 4 pi r g(r) * eps^(-1/2) U0(r / eps): a bubble of width eps
        // matched to the Green column, so that W = U_eps near the center and
        // W vanishes on the boundary.
        let bubble: Vec<f64> = (0..n)
            .map(|i| {
                let r = mesh.position(i)[0];
                4.0 * std::f64::consts::PI * r * g[i]
                    * sobolev::bubble_profile(r / eps)
                    / eps.sqrt()
            })
            .collect();
        let wmax = bubble.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let floor = 1.0e-6 * wmax;
        let weight =
            WeightField::new(mesh, bubble.iter().map(|x| x.abs() + floor).collect())?;
        let mut basis: Vec<Vec<f64>> = table.eigenvectors[..k - 1].to_vec();
        basis.push(bubble);
        let (_, top) = crate::spectral::extremal_rayleigh_on_span(mesh, lambda, &weight, &basis)?;
        let objective = top * norm_l6(mesh, weight.values()).powi(4);
        let deviation_ratio = (threshold - objective) / (threshold * eps * mass);
        points.push(BubblePoint { eps, objective, deviation_ratio });
    }
    Ok(BubbleFamilyReport { lambda, k, mass, hypothesis_met: mass > 0.0, threshold, points })
}

// ---------------------------------------------------------------------------
// Bifurcation diagnostic
// ---------------------------------------------------------------------------

/// How close a solution is to the eigenspace it bifurcates from.
#[derive(Debug, Clone)]
pub struct BifurcationReport {
    /// Sup-norm distance of the peak-normalized solution to its projection
    /// onto the eigenspace at the upper end of the interval.
    pub residual: f64,
    /// Peak amplitude of the unnormalized solution.
    pub amplitude: f64,
}

/// Project the solution onto the eigenspace of the eigenvalue bounding its
/// interval from above.  Near that eigenvalue the extracted solution is a
/// small multiple of an eigenfunction, so the residual tends to zero and
/// the amplitude shrinks.
pub fn bifurcation_check(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    psi: &[f64],
) -> Result<BifurcationReport> {
    if psi.len() != mesh.n_nodes() {
        return Err(CoreError::Precondition(format!(
            "solution has {} entries, mesh has {} nodes",
            psi.len(),
            mesh.n_nodes()
        )));
    }
    let iv = table.interval_of(lambda)?;
    let space = table.eigenspace(iv.index + 1)?;
    let amplitude = psi.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(CoreError::NonFinite("bifurcation solution"));
    }
    let hat: Vec<f64> = psi.iter().map(|x| x / amplitude).collect();
    let w = mesh.weights();
    let mut proj = vec![0.0; psi.len()];
    for phi in space {
        let c = dot_w(phi, &hat, w);
        for i in 0..psi.len() {
            proj[i] += c * phi[i];
        }
    }
    let residual = hat
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(BifurcationReport { residual, amplitude })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectrum_with_clusters;

    #[test]
    fn direct_minimizer_is_a_weighted_eigenpair() {
        let mesh = Mesh::radial_ball(300).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let lambda = 6.0;
        let min = direct_coercive_minimize(&mesh, &table, lambda).unwrap();
        assert!(min.value > 0.0);
        assert!(min.value < sobolev_threshold());
        let bound = mesh.volume().powf(2.0 / 3.0) * (table.distinct(1).unwrap() - lambda);
        assert!(min.value <= bound * (1.0 + 1.0e-12), "{} vs {bound}", min.value);
        // At the fixed point the minimizer is the first eigenfunction of the
        // pencil weighted by its own profile, with eigenvalue equal to the
        // minimum value.
        let wf = WeightField::new(&mesh, min.minimizer.clone()).unwrap();
        let mu = weighted_eigenpairs(&mesh, lambda, &wf, 1).unwrap()[0].mu;
        assert!(
            ((mu - min.value) / min.value).abs() < 1.0e-9,
            "mu {mu} vs direct {}",
            min.value
        );
    }

    #[test]
    fn direct_minimizer_rejects_noncoercive_lambda() {
        let mesh = Mesh::radial_ball(100).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        assert!(direct_coercive_minimize(&mesh, &table, 11.0).is_err());
        assert!(direct_coercive_minimize(&mesh, &table, 0.0).is_err());
    }

    #[test]
    fn sweep_collects_points_and_failures() {
        let mesh = Mesh::radial_ball(120).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let schedule = [1.0e-1, 1.0e-2, 1.0e-3, 1.0e-4];
        let l1 = table.distinct(1).unwrap();
        let grid = [4.0, 6.0, l1];
        let report =
            sweep_energy(&mesh, &table, &grid, &schedule, &RelaxSettings::default());
        assert_eq!(report.points.len(), 2);
        assert_eq!(report.failures.len(), 1);
        let [a, b] = [&report.points[0], &report.points[1]];
        assert_eq!((a.interval_index, a.k), (0, 1));
        assert!(a.mu_star >= b.mu_star, "monotone: {} then {}", a.mu_star, b.mu_star);
        for p in &report.points {
            assert!(p.mu_star > 0.0 && p.mu_star <= p.mu_upper_bound * (1.0 + 1.0e-9));
            assert!((p.energy - p.mu_star.powf(1.5)).abs() < 1.0e-12 * p.energy);
        }
    }

    #[test]
    fn constant_direction_reproduces_scaling_exactly() {
        let mesh = Mesh::radial_ball(200).unwrap();
        // Any positive weight: the scaling family u (1 + t) has
        // mu(t) = (1 + t)^(-4) mu, hence c2 = 10, for every u.
        let vals: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| 1.0 + 0.3 * (std::f64::consts::PI * mesh.position(i)[0]).cos())
            .collect();
        let weight = WeightField::new(&mesh, vals).unwrap();
        let h = vec![1.0; mesh.n_nodes()];
        let rep = second_order_check(&mesh, 5.0, &weight, 1, &h).unwrap();
        assert!((rep.q1 - 1.0).abs() < 1.0e-12, "q1 = {}", rep.q1);
        assert!((rep.c2_model - 10.0).abs() < 1.0e-8, "model {}", rep.c2_model);
        assert!((rep.c2_fd - 10.0).abs() < 1.0e-6, "fd {}", rep.c2_fd);
        assert!(rep.stability_margin.abs() < 1.0e-10, "margin {}", rep.stability_margin);
        assert!(rep.psi_defect < 1.0e-8);
    }

    #[test]
    fn expansion_matches_finite_differences_for_rough_directions() {
        let mesh = Mesh::radial_ball(200).unwrap();
        let vals: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| 1.0 + 0.2 * (2.0 * std::f64::consts::PI * mesh.position(i)[0]).sin())
            .collect();
        let weight = WeightField::new(&mesh, vals).unwrap();
        let h: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| (3.0 * std::f64::consts::PI * mesh.position(i)[0]).cos())
            .collect();
        let rep = second_order_check(&mesh, 5.0, &weight, 1, &h).unwrap();
        let rel = (rep.c2_model - rep.c2_fd).abs() / rep.c2_fd.abs().max(1.0);
        assert!(rel < 1.0e-4, "model {} vs fd {}", rep.c2_model, rep.c2_fd);
    }

    #[test]
    fn bubble_family_dips_below_threshold_when_mass_is_positive() {
        let mesh = Mesh::radial_ball(800).unwrap();
        let table = spectrum_with_clusters(&mesh, 3).unwrap();
        let l2 = table.distinct(2).unwrap();
        let rep = bubble_test_family(&mesh, &table, 0.95 * l2, &[0.1, 0.05]).unwrap();
        assert_eq!(rep.k, 2);
        assert!(rep.hypothesis_met, "mass {}", rep.mass);
        for p in &rep.points {
            assert!(
                p.objective < rep.threshold,
                "eps {}: {} vs {}",
                p.eps,
                p.objective,
                rep.threshold
            );
            assert!(p.deviation_ratio > 0.0);
        }
    }

    #[test]
    fn bubble_family_stays_above_threshold_when_mass_is_negative() {
        let mesh = Mesh::radial_ball(800).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let rep = bubble_test_family(&mesh, &table, 2.0, &[0.1, 0.05]).unwrap();
        assert_eq!(rep.k, 1);
        assert!(!rep.hypothesis_met, "mass {}", rep.mass);
        for p in &rep.points {
            assert!(p.objective > rep.threshold * 0.999);
        }
    }

    #[test]
    fn bifurcation_residual_measures_offspace_component() {
        let mesh = Mesh::radial_ball(200).unwrap();
        let table = spectrum_with_clusters(&mesh, 2).unwrap();
        let phi1 = &table.eigenvectors[0];
        let phi2 = &table.eigenvectors[1];
        let psi: Vec<f64> =
            phi1.iter().zip(phi2).map(|(a, b)| 0.9 * a + 0.01 * b).collect();
        let rep = bifurcation_check(&mesh, &table, 5.0, &psi).unwrap();
        let expected = 0.01 * phi2.iter().map(|x| x.abs()).fold(0.0, f64::max)
            / psi.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!((rep.residual - expected).abs() < 1.0e-10 * expected.max(1.0));
        assert!(rep.residual < 0.05);
    }
}
