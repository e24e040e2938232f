//! Eigenvalue machinery: the Dirichlet spectrum of a mesh, and the weighted
//! generalized eigenvalue
//!
//! ```text
//! (-Delta - lambda) phi = mu w(u) phi,     w(u) = u^(2*-2) = u^4,
//! ```
//!
//! whose p-th value is the min-max quantity
//!
//! ```text
//! mu_p(u) = inf_{dim V = p} max_{v in V} int (|grad v|^2 - lambda v^2)
//!                                        / int u^4 v^2.
//! ```
//!
//! Radial meshes reduce to symmetric tridiagonal problems solved by Sturm
//! bisection; box meshes are handled matrix-free by shift-inverted subspace
//! iteration with Rayleigh-Ritz extraction.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::linalg::{
    cg, dot, dot_w, jacobi_eigh, norm2, orthonormalize_weighted, pencil_small, seeded_vector,
    CgFailure, SymTridiag, TridiagLU,
};
use crate::mesh::{Mesh, MeshKind};
use crate::tol;

// ---------------------------------------------------------------------------
// Weight fields
// ---------------------------------------------------------------------------

/// A strictly positive node field used as the weight `u` in the generalized
/// eigenvalue problem.  Cheap to clone; the critical-norm `||u||_{L^6}` is
/// cached at construction.
#[derive(Debug, Clone)]
pub struct WeightField {
    values: Arc<Vec<f64>>,
    min_value: f64,
    norm_2star: f64,
}

impl WeightField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(CoreError::Precondition(format!(
                "weight field has {} values for a mesh with {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        let mut min_value = f64::INFINITY;
        for &v in &values {
            if !v.is_finite() {
                return Err(CoreError::NonFinite("weight field"));
            }
            if v <= 0.0 {
                return Err(CoreError::Precondition(
                    "weight field must be strictly positive".into(),
                ));
            }
            min_value = min_value.min(v);
        }
        let norm_2star = norm_l6(mesh, &values);
        Ok(Self { values: Arc::new(values), min_value, norm_2star })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Result<Self> {
        Self::new(mesh, vec![c; mesh.n_nodes()])
    }

    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[must_use]
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// The critical norm `(int u^6)^(1/6)`.
    #[must_use]
    pub fn norm_2star(&self) -> f64 {
        self.norm_2star
    }

    /// The same field scaled to unit critical norm.
    pub fn normalized(&self, mesh: &Mesh) -> Result<Self> {
        let s = 1.0 / self.norm_2star;
        Self::new(mesh, self.values.iter().map(|v| v * s).collect())
    }
}

/// `(int |f|^6)^(1/6)` under the mesh quadrature.
#[must_use]
pub fn norm_l6(mesh: &Mesh, f: &[f64]) -> f64 {
    let w = mesh.weights();
    let s: f64 = f.iter().zip(w).map(|(x, wi)| wi * x.powi(6)).sum();
    s.powf(1.0 / 6.0)
}

/// Diagonal of the weight matrix `B_u = diag(w_i u_i^4)`.
#[must_use]
pub(crate) fn b_diag(mesh: &Mesh, weight: &WeightField) -> Vec<f64> {
    mesh.weights().iter().zip(weight.values().iter()).map(|(w, u)| w * u.powi(4)).collect()
}

// ---------------------------------------------------------------------------
// Spectrum tables
// ---------------------------------------------------------------------------

/// A group of numerically equal eigenvalues.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Representative value (mean of the group).
    pub value: f64,
    /// Index of the first member in the eigenvalue list.
    pub start: usize,
    pub multiplicity: usize,
}

/// The location of `lambda` between consecutive distinct eigenvalues:
/// `lo < lambda < hi` with `index` distinct eigenvalues at or below `lambda`
/// (`index = 0` means `lambda` lies below the whole spectrum and `lo` is
/// negative infinity).
#[derive(Debug, Clone, Copy)]
pub struct SpectralInterval {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Lowest part of the Dirichlet spectrum of a mesh, with eigenvalues grouped
/// into clusters of equal values.  Eigenvectors are M-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectrumTable {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub clusters: Vec<Cluster>,
}

impl SpectrumTable {
    #[must_use]
    pub fn n_distinct(&self) -> usize {
        self.clusters.len()
    }

    /// The i-th distinct eigenvalue, 1-based.
    pub fn distinct(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.clusters.len() {
            return Err(CoreError::Precondition(format!(
                "distinct eigenvalue index {i} outside 1..={}",
                self.clusters.len()
            )));
        }
        Ok(self.clusters[i - 1].value)
    }

    /// Eigenvectors spanning the eigenspace of the i-th distinct eigenvalue.
    pub fn eigenspace(&self, i: usize) -> Result<&[Vec<f64>]> {
        if i == 0 || i > self.clusters.len() {
            return Err(CoreError::Precondition(format!(
                "eigenspace index {i} outside 1..={}",
                self.clusters.len()
            )));
        }
        let c = &self.clusters[i - 1];
        Ok(&self.eigenvectors[c.start..c.start + c.multiplicity])
    }

    /// Locate `lambda` strictly between distinct eigenvalues.
    pub fn interval_of(&self, lambda: f64) -> Result<SpectralInterval> {
        self.interval_of_guarded(lambda, 0.0)
    }

    /// Like `interval_of`, but also rejects `lambda` within `rel_margin`
    /// times the interval length of either endpoint.
    pub fn interval_of_guarded(&self, lambda: f64, rel_margin: f64) -> Result<SpectralInterval> {
        if self.clusters.is_empty() {
            return Err(CoreError::Precondition("empty spectrum table".into()));
        }
        let index = self.clusters.iter().take_while(|c| c.value <= lambda).count();
        let last = self.clusters.len();
        if index >= last {
            return Err(CoreError::Precondition(format!(
                "lambda = {lambda} is not covered by a table with {last} distinct eigenvalues \
                 up to {}; request a deeper spectrum",
                self.clusters[last - 1].value
            )));
        }
        let hi = self.clusters[index].value;
        let lo = if index == 0 { f64::NEG_INFINITY } else { self.clusters[index - 1].value };
        let len = if index == 0 { hi } else { hi - lo };
        let margin = rel_margin * len;
        let dist = (lambda - lo).min(hi - lambda);
        if dist < margin {
            let nearest = if lambda - lo < hi - lambda { lo } else { hi };
            return Err(CoreError::NearSpectrum { lambda, nearest, tol: margin });
        }
        Ok(SpectralInterval { index, lo, hi })
    }

    /// The principal index `k` attached to the interval `(Lambda_i,
    /// Lambda_{i+1})`: one plus the number of eigenvalues (with multiplicity)
    /// at or below `Lambda_i`.
    pub fn multiplicity_index(&self, i: usize) -> Result<usize> {
        if i > self.clusters.len() {
            return Err(CoreError::Precondition(format!(
                "multiplicity index needs {i} distinct eigenvalues, table has {}",
                self.clusters.len()
            )));
        }
        Ok(1 + self.clusters[..i].iter().map(|c| c.multiplicity).sum::<usize>())
    }
}

fn group_clusters(vals: &[f64]) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (idx, &v) in vals.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (v - c.value).abs() <= tol::CLUSTER_REL * v.abs().max(1.0) => {
                // Running mean keeps the representative stable.
                let m = c.multiplicity as f64;
                c.value = (c.value * m + v) / (m + 1.0);
                c.multiplicity += 1;
            }
            _ => clusters.push(Cluster { value: v, start: idx, multiplicity: 1 }),
        }
    }
    clusters
}

/// Lowest `count` Dirichlet eigenvalues of the mesh with M-orthonormal
/// eigenvectors.  The table is always truncated to whole clusters, so the
/// multiplicity of its last entry is trustworthy; it may therefore contain
/// slightly fewer or more eigenvalues than requested.
pub fn dirichlet_spectrum(mesh: &Mesh, count: usize) -> Result<SpectrumTable> {
    let n = mesh.n_nodes();
    if count == 0 {
        return Err(CoreError::Precondition("requested an empty spectrum".into()));
    }
    let mut m = count + 2;
    loop {
        m = m.min(n - 1);
        let (vals, vecs) = plain_eigenpairs(mesh, m)?;
        let mut clusters = group_clusters(&vals);
        // The trailing cluster may continue past the computed window; keep it
        // only when the window provably ends it.
        let last_complete = match clusters.last() {
            Some(c) if c.start + c.multiplicity == vals.len() && m < n - 1 => {
                clusters.pop();
                clusters.last().map_or(0, |c| c.start + c.multiplicity)
            }
            _ => vals.len(),
        };
        if last_complete >= count || m == n - 1 {
            let eigenvalues = vals[..last_complete].to_vec();
            let eigenvectors = vecs.into_iter().take(last_complete).collect();
            return Ok(SpectrumTable { eigenvalues, eigenvectors, clusters });
        }
        m += (m / 2).max(4);
    }
}

/// A spectrum table holding at least `min_clusters` distinct eigenvalues.
pub fn spectrum_with_clusters(mesh: &Mesh, min_clusters: usize) -> Result<SpectrumTable> {
    let n = mesh.n_nodes();
    let mut count = min_clusters.max(1) + 2;
    loop {
        let table = dirichlet_spectrum(mesh, count)?;
        if table.n_distinct() >= min_clusters {
            return Ok(table);
        }
        if count >= n - 1 {
            return Err(CoreError::Precondition(format!(
                "mesh too small to resolve {min_clusters} distinct eigenvalues"
            )));
        }
        count += count.max(4);
    }
}

// ---------------------------------------------------------------------------
// Plain spectrum solvers
// ---------------------------------------------------------------------------

fn plain_eigenpairs(mesh: &Mesh, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    match mesh.kind() {
        MeshKind::RadialBall => {
            let a = mesh.stiffness_tridiag().expect("radial mesh has a tridiagonal stiffness");
            tridiag_pencil_eigenpairs(&a, mesh.weights(), count)
        }
        MeshKind::Box3 => {
            let diag_a = mesh.stiffness_diag();
            let b = mesh.weights().to_vec();
            subspace_smallest(
                |v, out| mesh.apply_stiffness(v, out),
                &diag_a,
                &b,
                0.0,
                count,
                0xB0F5,
            )
        }
    }
}

/// Exact ground eigenvalue of the discrete box stencil; the discrete modes
/// are products of sines, so this is closed-form.
fn box_discrete_lambda1(mesh: &Mesh) -> f64 {
    let h = mesh.spacings();
    debug_assert_eq!(h.len(), 3);
    let vol = mesh.volume();
    // Recover the lengths from volume and spacings via n_a = L_a / h_a.
    // All axes share the cell count, so L_a = h_a * R.
    let r = (mesh.n_nodes() as f64).cbrt().round();
    h.iter()
        .map(|&ha| {
            let la = ha * r;
            let s = (std::f64::consts::PI * ha / (2.0 * la)).sin();
            4.0 / (ha * ha) * s * s
        })
        .sum::<f64>()
        * vol.powi(0)
}

// ---------------------------------------------------------------------------
// Weighted pencils
// ---------------------------------------------------------------------------

/// One eigenpair of `(-Delta - lambda) phi = mu u^4 phi`, with `phi`
/// normalized by `int u^4 phi^2 = 1`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenpair {
    /// 1-based position in the ascending eigenvalue sequence.
    pub index_p: usize,
    pub mu: f64,
    pub phi: Vec<f64>,
    pub lambda: f64,
}

/// Lowest `count` eigenpairs of the weighted pencil at spectral parameter
/// `lambda`.  Eigenvectors are B_u-orthonormal and sign-fixed.
pub fn weighted_eigenpairs(
    mesh: &Mesh,
    lambda: f64,
    weight: &WeightField,
    count: usize,
) -> Result<Vec<GeneralizedEigenpair>> {
    if !lambda.is_finite() {
        return Err(CoreError::NonFinite("lambda"));
    }
    let b = b_diag(mesh, weight);
    let (vals, vecs) = match mesh.kind() {
        MeshKind::RadialBall => {
            let a = mesh.stiffness_tridiag().expect("radial mesh has a tridiagonal stiffness");
            let mut k = a;
            for (d, w) in k.diag.iter_mut().zip(mesh.weights()) {
                *d -= lambda * w;
            }
            tridiag_pencil_eigenpairs(&k, &b, count)?
        }
        MeshKind::Box3 => {
            let w = mesh.weights();
            let apply_k = |v: &[f64], out: &mut [f64]| {
                mesh.apply_stiffness(v, out);
                for i in 0..v.len() {
                    out[i] -= lambda * w[i] * v[i];
                }
            };
            let k_diag: Vec<f64> =
                mesh.stiffness_diag().iter().zip(w).map(|(d, wi)| d - lambda * wi).collect();
            // A rigorous lower bound on mu_1 from the exact discrete ground
            // eigenvalue: the quadratic form satisfies
            // v'(A - lambda M)v >= (L1 - lambda) v'Mv, and v'Bv relates to
            // v'Mv by the range of u^4.
            let l1 = box_discrete_lambda1(mesh);
            let u4: Vec<f64> = weight.values().iter().map(|u| u.powi(4)).collect();
            let u4_max = u4.iter().cloned().fold(f64::MIN, f64::max);
            let u4_min = u4.iter().cloned().fold(f64::MAX, f64::min);
            let bound =
                if lambda <= l1 { (l1 - lambda) / u4_max } else { (l1 - lambda) / u4_min };
            let mut sigma = bound - 0.05 * (bound.abs() + 1.0);
            let mut attempt = 0;
            loop {
                match subspace_smallest(&apply_k, &k_diag, &b, sigma, count, 0x9E11) {
                    Ok(res) => break res,
                    Err(CoreError::Precondition(msg)) if msg == "indefinite" && attempt < 8 => {
                        sigma -= sigma.abs() + 1.0;
                        attempt += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    };
    Ok(vals
        .into_iter()
        .zip(vecs)
        .enumerate()
        .map(|(p, (mu, phi))| GeneralizedEigenpair { index_p: p + 1, mu, phi, lambda })
        .collect())
}

/// The Rayleigh quotient `(v'Av - lambda v'Mv) / (v'B_u v)`.
pub fn rayleigh_quotient(mesh: &Mesh, lambda: f64, weight: &WeightField, v: &[f64]) -> Result<f64> {
    let n = mesh.n_nodes();
    let mut av = vec![0.0; n];
    mesh.apply_stiffness(v, &mut av);
    let w = mesh.weights();
    let num = dot(v, &av) - lambda * dot_w(v, v, w);
    let den = dot_w(v, v, &b_diag(mesh, weight));
    if den <= 0.0 || !den.is_finite() {
        return Err(CoreError::Precondition("Rayleigh quotient of a null vector".into()));
    }
    Ok(num / den)
}

/// Extreme Rayleigh quotients over the span of the given (independent)
/// vectors: the span realizes the min-max value when it contains the first
/// `p` eigenvectors, and upper-bounds it otherwise.  Returns (min, max).
pub fn extremal_rayleigh_on_span(
    mesh: &Mesh,
    lambda: f64,
    weight: &WeightField,
    basis: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let m = basis.len();
    if m == 0 {
        return Err(CoreError::Precondition("empty span".into()));
    }
    let n = mesh.n_nodes();
    let w = mesh.weights();
    let b = b_diag(mesh, weight);
    let mut kb = vec![vec![0.0; n]; m];
    for (j, v) in basis.iter().enumerate() {
        mesh.apply_stiffness(v, &mut kb[j]);
        for i in 0..n {
            kb[j][i] -= lambda * w[i] * v[i];
        }
    }
    let mut s = vec![0.0; m * m];
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            s[i * m + j] = dot(&basis[i], &kb[j]);
            g[i * m + j] = dot_w(&basis[i], &basis[j], &b);
        }
    }
    // Symmetrize against quadrature roundoff.
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (s[i * m + j] + s[j * m + i]);
            s[i * m + j] = v;
            s[j * m + i] = v;
        }
    }
    let (vals, _) = pencil_small(m, &s, &g)?;
    Ok((vals[0], vals[m - 1]))
}

// ---------------------------------------------------------------------------
// Sign law
// ---------------------------------------------------------------------------

/// Outcome of checking the sign pattern of `mu_1 <= ... <= mu_k` for the
/// principal index attached to the interval containing `lambda`.
#[derive(Debug, Clone)]
pub struct SignLawReport {
    /// Principal index for the interval.
    pub k: usize,
    /// The first `k` weighted eigenvalues.
    pub mu: Vec<f64>,
    /// Whether mu_p <= 0 for all p < k and mu_k > 0 (up to solver tolerance).
    pub holds: bool,
}

/// Check that the first `k - 1` weighted eigenvalues are nonpositive and the
/// k-th is positive, with `k` determined by the position of `lambda` in the
/// Dirichlet spectrum.
pub fn sign_law_check(
    mesh: &Mesh,
    table: &SpectrumTable,
    lambda: f64,
    weight: &WeightField,
) -> Result<SignLawReport> {
    let interval = table.interval_of(lambda)?;
    let k = table.multiplicity_index(interval.index)?;
    let pairs = weighted_eigenpairs(mesh, lambda, weight, k)?;
    let mu: Vec<f64> = pairs.iter().map(|p| p.mu).collect();
    let scale = mu.iter().map(|m| m.abs()).fold(1.0e-12, f64::max);
    let slack = 1.0e-8 * scale;
    let holds = mu[..k - 1].iter().all(|&m| m <= slack) && mu[k - 1] > slack;
    Ok(SignLawReport { k, mu, holds })
}

// ---------------------------------------------------------------------------
// One-sided eigenvalue derivatives
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSide {
    Right,
    Left,
}

/// One-sided derivative `d/dt mu_k((1 + t h) u)` at `t = 0`.
///
/// The weight perturbation changes `B_u` at first order by
/// `4 t diag(w u^4 h)`; restricting to the eigenspace of `mu_k`, the cluster
/// splits with slopes `-4 mu_k eta_j` where `eta_j` are the eigenvalues of
/// the restricted form `sum_i w_i u_i^4 h_i phi phi'`.  Ordering the slopes
/// ascending, the k-th curve takes the q-th slope from the left for `t > 0`
/// and the mirrored one for `t < 0`, where `q` is the position of `k` inside
/// its cluster.
pub fn directional_derivative(
    mesh: &Mesh,
    weight: &WeightField,
    pairs: &[GeneralizedEigenpair],
    k: usize,
    h: &[f64],
    side: DerivativeSide,
) -> Result<f64> {
    if k == 0 || k > pairs.len() {
        return Err(CoreError::Precondition(format!(
            "pair index {k} outside 1..={}",
            pairs.len()
        )));
    }
    let mu_k = pairs[k - 1].mu;
    let scale = pairs.iter().map(|p| p.mu.abs()).fold(1.0e-12, f64::max);
    let near = |m: f64| (m - mu_k).abs() <= tol::CLUSTER_REL * scale;
    let a = (0..k - 1).rev().take_while(|&j| near(pairs[j].mu)).count();
    let start = k - 1 - a;
    let mut end = k;
    while end < pairs.len() && near(pairs[end].mu) {
        end += 1;
    }
    if end == pairs.len() && end < mesh.n_nodes() {
        // The cluster may extend past the supplied pairs.
        let next_missing = pairs.len();
        return Err(CoreError::Precondition(format!(
            "eigenvalue cluster around index {k} may continue past the {next_missing} supplied \
             pairs; supply more"
        )));
    }
    let m = end - start;
    let q = k - start;
    let w = mesh.weights();
    let u = weight.values();
    // Restricted first-order form in the B_u-orthonormal cluster basis.
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let pi = &pairs[start + i].phi;
            let pj = &pairs[start + j].phi;
            let mut acc = 0.0;
            for idx in 0..pi.len() {
                acc += w[idx] * u[idx].powi(4) * h[idx] * pi[idx] * pj[idx];
            }
            hm[i * m + j] = acc;
            hm[j * m + i] = acc;
        }
    }
    let (eta, _) = jacobi_eigh(m, &hm)?;
    let mut slopes: Vec<f64> = eta.iter().map(|e| -4.0 * mu_k * e).collect();
    slopes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(match side {
        DerivativeSide::Right => slopes[q - 1],
        DerivativeSide::Left => slopes[m - q],
    })
}

// ---------------------------------------------------------------------------
// Solver kernels
// ---------------------------------------------------------------------------

/// Flip signs so that the first entry reaching 99.9% of the max magnitude is
/// positive; keeps eigenvector output deterministic.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mx = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if mx == 0.0 {
        return;
    }
    for &x in v.iter() {
        if x.abs() >= 0.999 * mx {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Lowest eigenpairs of `K phi = theta diag(b) phi` for a symmetric
/// tridiagonal `K`, via the symmetric reduction `S = D^{-1/2} K D^{-1/2}`.
/// The returned vectors are diag(b)-orthonormal.
fn tridiag_pencil_eigenpairs(
    k: &SymTridiag,
    b: &[f64],
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.n();
    let sqrt_b: Vec<f64> = b.iter().map(|x| x.sqrt()).collect();
    let diag: Vec<f64> = (0..n).map(|i| k.diag[i] / b[i]).collect();
    let off: Vec<f64> = (0..n - 1).map(|i| k.off[i] / (sqrt_b[i] * sqrt_b[i + 1])).collect();
    let s = SymTridiag { diag, off };
    let vals = s.lowest_eigenvalues(count)?;

    // Inverse iteration cannot separate eigenvectors whose eigenvalues nearly
    // coincide, so partition the wanted values into gap-separated groups and
    // give tight groups a joint block treatment.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for j in 1..count {
        if vals[j] - vals[j - 1] > 1.0e-6 * vals[j].abs().max(1.0) {
            groups.push((start, j));
            start = j;
        }
    }
    groups.push((start, count));

    let mut out_vals = vec![0.0; count];
    let mut out_vecs: Vec<Vec<f64>> = vec![Vec::new(); count];
    for &(lo, hi) in &groups {
        let (thetas, vecs) = if hi - lo == 1 {
            let (refined, v) = s.eigenvector(vals[lo], 0x5EED + lo as u64)?;
            (vec![refined], vec![v])
        } else {
            cluster_eigenvectors(&s, &vals[lo..hi], 0x5EED + lo as u64)?
        };
        let mut kphi = vec![0.0; n];
        for (offset, (refined, v)) in thetas.into_iter().zip(vecs).enumerate() {
            // Residuals are judged in the original pencil variables: the
            // reduced matrix has entries of size 1/b and its roundoff floor
            // would swamp the check whenever the weight spans many decades.
            let mut phi: Vec<f64> = v.iter().zip(&sqrt_b).map(|(x, sb)| x / sb).collect();
            k.apply(&phi, &mut kphi);
            let scale = norm2(&kphi);
            let res: f64 = kphi
                .iter()
                .zip(&phi)
                .zip(b)
                .map(|((a, p), bb)| (a - refined * bb * p).powi(2))
                .sum::<f64>()
                .sqrt();
            if res > tol::PENCIL_RESIDUAL_REL * scale + tol::PENCIL_RESIDUAL_ABS {
                return Err(CoreError::EigNonConvergence { iterations: 3, residual: res });
            }
            fix_sign(&mut phi);
            out_vals[lo + offset] = refined;
            out_vecs[lo + offset] = phi;
        }
    }
    Ok((out_vals, out_vecs))
}

/// Joint inverse iteration for a tight eigenvalue cluster: one shared shift,
/// an orthonormal block of iterates, and a final Rayleigh-Ritz rotation.  The
/// span converges at the rate set by the gap to the rest of the spectrum even
/// when in-cluster gaps sit at roundoff level.
fn cluster_eigenvectors(
    s: &SymTridiag,
    lambdas: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = s.n();
    let m = lambdas.len();
    let shift = lambdas.iter().sum::<f64>() / m as f64;
    let lu = TridiagLU::factor_shifted(s, shift);
    let mut block: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut v = seeded_vector(n, seed + j as u64);
            let nrm = norm2(&v);
            for x in v.iter_mut() {
                *x /= nrm;
            }
            v
        })
        .collect();
    for pass in 0..4 {
        if pass > 0 {
            for v in block.iter_mut() {
                lu.solve(v);
                let nrm = norm2(v);
                if !(nrm > 0.0 && nrm.is_finite()) {
                    return Err(CoreError::EigNonConvergence { iterations: pass, residual: nrm });
                }
                for x in v.iter_mut() {
                    *x /= nrm;
                }
            }
        }
        // Gram-Schmidt with a redraw when a column collapses onto the span of
        // the previous ones.
        for j in 0..m {
            for attempt in 0..3 {
                let (head, tail) = block.split_at_mut(j);
                let v = &mut tail[0];
                for prev in head.iter() {
                    let c = dot(v, prev);
                    for (x, p) in v.iter_mut().zip(prev) {
                        *x -= c * p;
                    }
                }
                let nrm = norm2(v);
                if nrm > 1.0e-8 {
                    for x in v.iter_mut() {
                        *x /= nrm;
                    }
                    break;
                }
                if attempt == 2 {
                    return Err(CoreError::EigNonConvergence {
                        iterations: pass,
                        residual: nrm,
                    });
                }
                *v = seeded_vector(n, seed + 31 + 7 * j as u64 + attempt as u64);
            }
        }
    }
    let mut h = vec![0.0; m * m];
    let mut sv = vec![0.0; n];
    for i in 0..m {
        s.apply(&block[i], &mut sv);
        for j in i..m {
            let acc = dot(&sv, &block[j]);
            h[i * m + j] = acc;
            h[j * m + i] = acc;
        }
    }
    let (thetas, z) = jacobi_eigh(m, &h)?;
    let mut rotated: Vec<Vec<f64>> = Vec::with_capacity(m);
    for q in 0..m {
        let mut v = vec![0.0; n];
        for (p, col) in block.iter().enumerate() {
            let c = z[p * m + q];
            for (x, y) in v.iter_mut().zip(col) {
                *x += c * y;
            }
        }
        rotated.push(v);
    }
    Ok((thetas, rotated))
}

/// Shift-inverted subspace iteration with Rayleigh-Ritz extraction for the
/// pencil `K phi = theta diag(b) phi`, finding the `count` smallest
/// eigenvalues.  Requires `sigma` strictly below the smallest eigenvalue so
/// that `K - sigma B` is positive definite; an indefinite inner solve is
/// reported as `Precondition("indefinite")` so callers can lower the shift.
fn subspace_smallest<F>(
    apply_k: F,
    k_diag: &[f64],
    b: &[f64],
    sigma: f64,
    count: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    if count == 0 || count >= n {
        return Err(CoreError::Precondition(format!(
            "requested {count} eigenpairs of an n = {n} problem"
        )));
    }
    let block = (count + (count / 2).max(4)).min(n - 1);
    let apply_shifted = |v: &[f64], out: &mut [f64]| {
        apply_k(v, out);
        for i in 0..n {
            out[i] -= sigma * b[i] * v[i];
        }
    };
    let precond: Vec<f64> = k_diag
        .iter()
        .zip(b)
        .map(|(kd, bi)| {
            let d = kd - sigma * bi;
            if d > 0.0 {
                d
            } else {
                1.0
            }
        })
        .collect();

    let mut x: Vec<Vec<f64>> = (0..block).map(|j| seeded_vector(n, seed + j as u64)).collect();
    orthonormalize_weighted(&mut x, b)?;
    let mut theta = vec![0.0; block];
    let mut locked = 0usize;
    let mut worst = f64::INFINITY;
    let mut rhs = vec![0.0; n];
    let mut kv = vec![0.0; n];

    for _sweep in 0..500 {
        // Inverse-iterate the unlocked block through (K - sigma B)^{-1} B.
        // Solving far past the current subspace error wastes Krylov work, so
        // the inner tolerance tracks the leading unlocked eigenresidual and
        // only reaches its floor on the final sweeps.
        let inner_rel = (0.05 * worst).clamp(tol::KRYLOV_REL_RESID, 1.0e-3);
        for j in locked..block {
            for i in 0..n {
                rhs[i] = b[i] * x[j][i];
            }
            match cg(&apply_shifted, &precond, &rhs, inner_rel, tol::KRYLOV_MAX_ITERS) {
                Ok((y, _)) => x[j] = y,
                Err(CgFailure::Indefinite) => {
                    return Err(CoreError::Precondition("indefinite".into()))
                }
                Err(CgFailure::Stalled { iterations, residual }) => {
                    return Err(CoreError::SolveNonConvergence { iterations, residual })
                }
            }
        }
        // B-orthonormalize the unlocked block against everything.
        if let Err(_) = orthonormalize_weighted(&mut x, b) {
            // Rank collapse: refresh the offending directions and retry once.
            for j in locked..block {
                let fresh = seeded_vector(n, seed ^ (0xA55A + j as u64));
                for (xi, fi) in x[j].iter_mut().zip(&fresh) {
                    *xi += 1.0e-8 * fi;
                }
            }
            orthonormalize_weighted(&mut x, b)?;
        }
        // Rayleigh-Ritz on the unlocked block.
        let m = block - locked;
        let mut s = vec![0.0; m * m];
        let mut kx: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            apply_k(&x[locked + j], &mut kv);
            kx.push(kv.clone());
        }
        for i in 0..m {
            for j in i..m {
                let v = dot(&x[locked + i], &kx[j]);
                s[i * m + j] = v;
                s[j * m + i] = v;
            }
        }
        let (vals, c) = jacobi_eigh(m, &s)?;
        let old: Vec<Vec<f64>> = x[locked..].to_vec();
        for j in 0..m {
            for i in 0..n {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += old[l][i] * c[l * m + j];
                }
                x[locked + j][i] = acc;
            }
            theta[locked + j] = vals[j];
        }
        // Lock converged leading pairs.
        loop {
            if locked >= count {
                break;
            }
            let j = locked;
            apply_k(&x[j], &mut kv);
            let mut knorm = 0.0;
            let mut rnorm = 0.0;
            for i in 0..n {
                let bv = b[i] * x[j][i];
                let r = kv[i] - theta[j] * bv;
                rnorm += r * r;
                knorm += kv[i] * kv[i];
            }
            rnorm = rnorm.sqrt();
            knorm = knorm.sqrt().max(theta[j].abs() * 1.0e-6).max(1.0e-30);
            worst = rnorm / knorm;
            if worst <= tol::EIG_RESIDUAL_REL {
                locked += 1;
            } else {
                break;
            }
        }
        if locked >= count {
            let mut order: Vec<usize> = (0..count).collect();
            order.sort_by(|&i, &j| theta[i].partial_cmp(&theta[j]).unwrap());
            let vals: Vec<f64> = order.iter().map(|&i| theta[i]).collect();
            let vecs: Vec<Vec<f64>> = order
                .iter()
                .map(|&i| {
                    let mut v = x[i].clone();
                    fix_sign(&mut v);
                    v
                })
                .collect();
            return Ok((vals, vecs));
        }
    }
    Err(CoreError::EigNonConvergence { iterations: 500, residual: worst })
}
