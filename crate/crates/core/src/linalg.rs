//! Minimal dense/sparse linear algebra used by the solvers.
//!
//! Everything here is written against the shapes that actually occur in the
//! crate: symmetric tridiagonal systems from the radial reduction, matrix-free
//! 7-point stencils from boxes, and small dense blocks from Rayleigh-Ritz
//! projections.  No general-purpose matrix library is needed at these sizes.

use crate::error::{CoreError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Euclidean inner product.
#[must_use]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
#[must_use]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Weighted inner product `sum_i w_i a_i b_i`.
#[must_use]
pub fn dot_w(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), wi)| wi * x * y).sum()
}

/// Deterministic pseudo-random vector in [-1, 1]^n, used to seed iterative
/// eigensolvers reproducibly.
#[must_use]
pub fn seeded_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

// ---------------------------------------------------------------------------
// Symmetric tridiagonal matrices
// ---------------------------------------------------------------------------

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    #[must_use]
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Gershgorin bounds on the spectrum.
    #[must_use]
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via the signs of
    /// the LDL^T pivots of `T - x I`).
    #[must_use]
    pub fn count_below(&self, x: f64) -> usize {
        const PIVMIN: f64 = 1.0e-300;
        let n = self.n();
        let mut count = 0usize;
        let mut d = self.diag[0] - x;
        if d.abs() < PIVMIN {
            d = -PIVMIN;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / d;
            if d.abs() < PIVMIN {
                d = -PIVMIN;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `count` lowest eigenvalues by Sturm bisection, ascending.  The
    /// bracket width is driven down relative to the eigenvalue itself, not to
    /// the spectral radius: reduced pencils can have a huge Gershgorin range
    /// while the wanted eigenvalues stay O(1).
    pub fn lowest_eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if count == 0 || count > n {
            return Err(CoreError::Precondition(format!(
                "requested {count} eigenvalues of a {n}x{n} tridiagonal matrix"
            )));
        }
        let (glo, ghi) = self.gershgorin();
        let pad = 1.0e-12 * glo.abs().max(ghi.abs()).max(1.0);
        let mut out = Vec::with_capacity(count);
        let mut lo_start = glo - pad;
        for j in 0..count {
            let mut lo = lo_start;
            let mut hi = ghi + pad;
            for _ in 0..256 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1.0e-14 * mid.abs().max(1.0e-3) || mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let lam = 0.5 * (lo + hi);
            out.push(lam);
            // The next eigenvalue cannot sit below this bracket's floor.
            lo_start = lo;
        }
        Ok(out)
    }

    /// Eigenvector for an eigenvalue estimate via inverse iteration, with one
    /// Rayleigh-quotient refinement pass.  Returns the refined eigenvalue and
    /// the normalized vector.
    pub fn eigenvector(&self, lambda: f64, seed: u64) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let mut v = seeded_vector(n, seed);
        normalize(&mut v);
        let mut lam = lambda;
        let mut work = vec![0.0; n];
        for pass in 0..3 {
            let lu = TridiagLU::factor_shifted(self, lam);
            for _ in 0..2 {
                lu.solve(&mut v);
                normalize(&mut v);
            }
            self.apply(&v, &mut work);
            let rq = dot(&v, &work);
            if (rq - lam).abs() <= 1.0e-15 * rq.abs().max(1.0) {
                lam = rq;
                break;
            }
            lam = rq;
            if pass == 2 {
                break;
            }
        }
        Ok((lam, v))
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// LU factorization of a (possibly shifted) tridiagonal matrix with partial
/// pivoting; the pivoting introduces a second superdiagonal.
pub struct TridiagLU {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLU {
    /// Factor `T - shift I` for a symmetric tridiagonal `T`.
    #[must_use]
    pub fn factor_shifted(t: &SymTridiag, shift: f64) -> Self {
        let dl: Vec<f64> = t.off.clone();
        let du: Vec<f64> = t.off.clone();
        let d: Vec<f64> = t.diag.iter().map(|x| x - shift).collect();
        Self::factor_parts(dl, d, du)
    }

    /// Factor a general tridiagonal matrix given its bands.
    #[must_use]
    pub fn factor_parts(mut dl: Vec<f64>, mut d: Vec<f64>, mut du: Vec<f64>) -> Self {
        const TINY: f64 = 1.0e-300;
        let n = d.len();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < TINY {
                    d[i] = if d[i] < 0.0 { -TINY } else { TINY };
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1].abs() < TINY {
            d[n - 1] = if d[n - 1] < 0.0 { -TINY } else { TINY };
        }
        Self { dl, d, du, du2, swapped }
    }

    /// Solve in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Krylov solvers
// ---------------------------------------------------------------------------

/// Why a CG solve stopped short.
#[derive(Debug)]
pub enum CgFailure {
    /// The operator is not positive definite along a search direction.
    Indefinite,
    /// Out of iterations.
    Stalled { iterations: usize, residual: f64 },
}

/// Preconditioned conjugate gradients for an SPD operator.  `precond_diag`
/// holds strictly positive Jacobi entries.  Returns the solution and the
/// iteration count.
pub fn cg<F>(
    op: F,
    precond_diag: &[f64],
    b: &[f64],
    tol_rel: f64,
    max_iters: usize,
) -> std::result::Result<(Vec<f64>, usize), CgFailure>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond_diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 1..=max_iters {
        op(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(CgFailure::Indefinite);
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rnorm = norm2(&r);
        if rnorm <= tol_rel * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] / precond_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = norm2(&r) / bnorm;
    Err(CgFailure::Stalled { iterations: max_iters, residual: rnorm })
}

/// MINRES for a symmetric (possibly indefinite) operator, with an optional
/// SPD diagonal scaling: with `scale = d`, the system is solved as
/// `D^{-1/2} K D^{-1/2} y = D^{-1/2} b`, `x = D^{-1/2} y`, which is plain
/// Jacobi preconditioning without any inner-product bookkeeping.
pub fn minres<F>(
    op: F,
    scale: Option<&[f64]>,
    b: &[f64],
    tol_rel: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let sqrt_d: Option<Vec<f64>> = scale.map(|d| d.iter().map(|x| x.max(1.0e-300).sqrt()).collect());
    let bs: Vec<f64> = match &sqrt_d {
        Some(s) => b.iter().zip(s).map(|(bi, si)| bi / si).collect(),
        None => b.to_vec(),
    };
    let apply = |v: &[f64], out: &mut [f64], tmp: &mut [f64]| match &sqrt_d {
        Some(s) => {
            for i in 0..n {
                tmp[i] = v[i] / s[i];
            }
            op(tmp, out);
            for i in 0..n {
                out[i] /= s[i];
            }
        }
        None => op(v, out),
    };

    let beta1 = norm2(&bs);
    let mut x = vec![0.0; n];
    if beta1 == 0.0 {
        return Ok((x, 0));
    }
    let mut r1 = bs.clone();
    let mut r2 = bs.clone();
    let mut y = bs;
    let mut tmp = vec![0.0; n];
    let mut ay = vec![0.0; n];

    let mut oldb = 0.0_f64;
    let mut beta = beta1;
    let mut dbar = 0.0_f64;
    let mut epsln = 0.0_f64;
    let mut phibar = beta1;
    let mut cs = -1.0_f64;
    let mut sn = 0.0_f64;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for itn in 1..=max_iters {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| yi * s).collect();
        apply(&v, &mut ay, &mut tmp);
        if itn >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                ay[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &ay);
        let c = alfa / beta;
        for i in 0..n {
            ay[i] -= c * r2[i];
        }
        r1 = std::mem::replace(&mut r2, ay.clone());
        y = r2.clone();
        oldb = beta;
        beta = norm2(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(1.0e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol_rel * beta1 {
            let sol = match &sqrt_d {
                Some(sd) => x.iter().zip(sd).map(|(xi, si)| xi / si).collect(),
                None => x,
            };
            return Ok((sol, itn));
        }
    }
    Err(CoreError::SolveNonConvergence { iterations: max_iters, residual: phibar / beta1 })
}

// ---------------------------------------------------------------------------
// Small dense symmetric problems
// ---------------------------------------------------------------------------

/// Cyclic Jacobi eigensolver for a small dense symmetric matrix (row-major,
/// n x n).  Returns ascending eigenvalues and the matrix of eigenvectors
/// stored column-wise (`vecs[i * n + j]` = component i of eigenvector j).
pub fn jacobi_eigh(n: usize, a_in: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a_in.len() != n * n {
        return Err(CoreError::Precondition(format!(
            "jacobi_eigh: matrix length {} does not match n = {n}",
            a_in.len()
        )));
    }
    let mut a = a_in.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1.0e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1.0e-18 * norm {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (jnew, &jold) in order.iter().enumerate() {
        for i in 0..n {
            vecs[i * n + jnew] = v[i * n + jold];
        }
    }
    Ok((vals, vecs))
}

/// Solve the small symmetric generalized problem `S x = theta G x` with `G`
/// symmetric positive definite, via Cholesky reduction and Jacobi.  Returns
/// ascending eigenvalues and G-orthonormal eigenvectors (column-wise).
pub fn pencil_small(n: usize, s: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    // Cholesky G = L L^T.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(CoreError::Precondition(
                        "pencil_small: Gram matrix is not positive definite".into(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // C = L^{-1} S L^{-T}, built column by column.
    let solve_lower = |b: &mut [f64]| {
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l[i * n + k] * b[k];
            }
            b[i] = sum / l[i * n + i];
        }
    };
    let solve_upper = |b: &mut [f64]| {
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * b[k];
            }
            b[i] = sum / l[i * n + i];
        }
    };
    let mut c = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = s[i * n + j];
        }
        solve_lower(&mut col);
        for i in 0..n {
            c[i * n + j] = col[i];
        }
    }
    let mut row = vec![0.0; n];
    for i in 0..n {
        row.copy_from_slice(&c[i * n..(i + 1) * n]);
        solve_lower(&mut row);
        c[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let (vals, y) = jacobi_eigh(n, &c)?;
    // Back-transform columns: x = L^{-T} y.
    let mut vecs = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            col[i] = y[i * n + j];
        }
        solve_upper(&mut col);
        for i in 0..n {
            vecs[i * n + j] = col[i];
        }
    }
    Ok((vals, vecs))
}

/// Gaussian elimination with partial pivoting for small dense systems.
pub fn gauss_solve(n: usize, a_in: &[f64], b_in: &[f64]) -> Result<Vec<f64>> {
    let mut a = a_in.to_vec();
    let mut b = b_in.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1.0e-300 {
            return Err(CoreError::Precondition("gauss_solve: singular matrix".into()));
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= a[i * n + k] * b[k];
        }
        b[i] = sum / a[i * n + i];
    }
    Ok(b)
}

/// Two-pass modified Gram-Schmidt in the weighted inner product
/// `<a, b> = sum_i w_i a_i b_i`.  Vectors are orthonormalized in place.
/// Returns an error if the set is numerically rank deficient.
pub fn orthonormalize_weighted(vecs: &mut [Vec<f64>], w: &[f64]) -> Result<()> {
    let m = vecs.len();
    for j in 0..m {
        for _pass in 0..2 {
            for i in 0..j {
                let c = dot_w(&vecs[j], &vecs[i], w);
                let (head, tail) = vecs.split_at_mut(j);
                let vi = &head[i];
                let vj = &mut tail[0];
                for k in 0..vj.len() {
                    vj[k] -= c * vi[k];
                }
            }
        }
        let nrm = dot_w(&vecs[j], &vecs[j], w).sqrt();
        if nrm < 1.0e-12 {
            return Err(CoreError::Precondition(
                "orthonormalize_weighted: rank-deficient vector set".into(),
            ));
        }
        for x in vecs[j].iter_mut() {
            *x /= nrm;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SymTridiag {
        SymTridiag { diag: vec![2.0; n], off: vec![-1.0; n - 1] }
    }

    #[test]
    fn sturm_bisection_matches_analytic_laplacian_eigenvalues() {
        let n = 64;
        let t = laplacian_1d(n);
        let vals = t.lowest_eigenvalues(5).unwrap();
        for (j, v) in vals.iter().enumerate() {
            let k = (j + 1) as f64;
            let exact = 4.0 * (k * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin().powi(2);
            assert!((v - exact).abs() < 1.0e-11, "j={j}: {v} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_gives_small_residual() {
        let n = 80;
        let t = laplacian_1d(n);
        let vals = t.lowest_eigenvalues(3).unwrap();
        for (j, &lam) in vals.iter().enumerate() {
            let (lr, v) = t.eigenvector(lam, 7 + j as u64).unwrap();
            let mut av = vec![0.0; n];
            t.apply(&v, &mut av);
            let res: f64 = av.iter().zip(&v).map(|(a, x)| (a - lr * x).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1.0e-10, "residual {res}");
        }
    }

    #[test]
    fn tridiag_lu_solves_shifted_system() {
        let n = 50;
        let t = laplacian_1d(n);
        // An indefinite shift between eigenvalues.
        let shift = 0.01;
        let lu = TridiagLU::factor_shifted(&t, shift);
        let b = seeded_vector(n, 3);
        let mut x = b.clone();
        lu.solve(&mut x);
        let mut tx = vec![0.0; n];
        t.apply(&x, &mut tx);
        for i in 0..n {
            tx[i] -= shift * x[i];
        }
        let err: f64 =
            tx.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() / norm2(&b);
        assert!(err < 1.0e-12, "relative error {err}");
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 40;
        let t = laplacian_1d(n);
        let b = seeded_vector(n, 11);
        let diag = t.diag.clone();
        let (x, _iters) =
            cg(|v, out| t.apply(v, out), &diag, &b, 1.0e-12, 10_000).expect("cg converges");
        let mut tx = vec![0.0; n];
        t.apply(&x, &mut tx);
        let err: f64 =
            tx.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() / norm2(&b);
        assert!(err < 1.0e-10, "relative error {err}");
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let n = 30;
        let t = laplacian_1d(n);
        // Shift past the first eigenvalue: indefinite.
        let shift = 0.5;
        let b = seeded_vector(n, 5);
        let diag: Vec<f64> = vec![1.0; n];
        let r = cg(
            |v, out| {
                t.apply(v, out);
                for i in 0..n {
                    out[i] -= shift * v[i];
                }
            },
            &diag,
            &b,
            1.0e-12,
            10_000,
        );
        assert!(matches!(r, Err(CgFailure::Indefinite)));
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 60;
        let t = laplacian_1d(n);
        let shift = 0.05; // between eigenvalue 1 and 2 of the 1-D Laplacian at n=60
        let b = seeded_vector(n, 17);
        let op = |v: &[f64], out: &mut [f64]| {
            t.apply(v, out);
            for i in 0..n {
                out[i] -= shift * v[i];
            }
        };
        let scale: Vec<f64> = vec![2.0; n];
        let (x, _iters) = minres(op, Some(&scale), &b, 1.0e-12, 20_000).unwrap();
        let mut tx = vec![0.0; n];
        t.apply(&x, &mut tx);
        for i in 0..n {
            tx[i] -= shift * x[i];
        }
        let err: f64 =
            tx.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() / norm2(&b);
        assert!(err < 1.0e-9, "relative error {err}");
    }

    #[test]
    fn jacobi_diagonalizes_small_matrix() {
        // Symmetric 3x3 with known spectrum {1, 2, 4}.
        // Build Q diag(1,2,4) Q^T for a rotation Q.
        let q = [
            [0.6, -0.8, 0.0],
            [0.8, 0.6, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let d = [1.0, 2.0, 4.0];
        let mut a = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += q[i][k] * d[k] * q[j][k];
                }
                a[i * 3 + j] = s;
            }
        }
        let (vals, vecs) = jacobi_eigh(3, &a).unwrap();
        for (v, e) in vals.iter().zip(&d) {
            assert!((v - e).abs() < 1.0e-12);
        }
        // Columns orthonormal.
        for p in 0..3 {
            for r in p..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    s += vecs[i * 3 + p] * vecs[i * 3 + r];
                }
                let want = if p == r { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1.0e-12);
            }
        }
    }

    #[test]
    fn pencil_small_reduces_to_weighted_eigenproblem() {
        // S = diag(3, 5), G = diag(1, 4): eigenvalues 3 and 1.25.
        let s = vec![3.0, 0.0, 0.0, 5.0];
        let g = vec![1.0, 0.0, 0.0, 4.0];
        let (vals, vecs) = pencil_small(2, &s, &g).unwrap();
        assert!((vals[0] - 1.25).abs() < 1.0e-13);
        assert!((vals[1] - 3.0).abs() < 1.0e-13);
        // G-orthonormality.
        for p in 0..2 {
            let mut s = 0.0;
            for i in 0..2 {
                s += vecs[i * 2 + p] * g[i * 2 + i] * vecs[i * 2 + p];
            }
            assert!((s - 1.0).abs() < 1.0e-12);
        }
    }

    #[test]
    fn gauss_solve_matches_hand_solution() {
        let a = vec![2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let b = vec![8.0, -11.0, -3.0];
        let x = gauss_solve(3, &a, &b).unwrap();
        let want = [2.0, 3.0, -1.0];
        for (xi, wi) in x.iter().zip(&want) {
            assert!((xi - wi).abs() < 1.0e-12);
        }
    }

    #[test]
    fn weighted_gram_schmidt_orthonormalizes() {
        let w = vec![0.5, 1.5, 2.0, 1.0];
        let mut vs = vec![seeded_vector(4, 1), seeded_vector(4, 2), seeded_vector(4, 3)];
        orthonormalize_weighted(&mut vs, &w).unwrap();
        for i in 0..3 {
            for j in i..3 {
                let d = dot_w(&vs[i], &vs[j], &w);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1.0e-12);
            }
        }
    }
}
