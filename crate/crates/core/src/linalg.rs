//! Dense Hermitian eigendecomposition, thick-restart Lanczos, Krylov
//! propagator action, small general matrix exponentials, and Gauss-Legendre
//! quadrature.
//!
//! Dense factorizations are delegated to `faer`; everything iterative is
//! implemented here against the [`HermitianOp`] mat-vec interface so sparse
//! operators never have to materialize densely.

use faer::{Mat, Side};
use num_complex::Complex64;
use thiserror::Error;

use crate::sparse::SparseHermitian;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "eigensolver did not converge: {matvecs} matvecs, best residual {best_residual:.3e} \
         (target {target:.3e})"
    )]
    NoConvergence {
        matvecs: usize,
        best_residual: f64,
        target: f64,
    },
    #[error("dense eigendecomposition failed: {0}")]
    DenseFailure(String),
    #[error("operator dimension {dim} too small for {k} requested eigenpairs")]
    TooFewStates { dim: usize, k: usize },
}

/// Matrix-free Hermitian operator.
pub trait HermitianOp {
    fn dim(&self) -> usize;
    /// y = A x.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Cheap upper bound on the spectral norm (used to scale tolerances).
    fn norm_upper(&self) -> f64;
}

impl HermitianOp for SparseHermitian {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.csr().matvec_into(x, y);
    }
    fn norm_upper(&self) -> f64 {
        self.norm_inf()
    }
}

/// Dense Hermitian matrix viewed as a matrix-free operator.
pub struct DenseOp<'a>(pub &'a Mat<Complex64>);

impl HermitianOp for DenseOp<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.0.nrows();
        for r in 0..n {
            let mut acc = Complex64::ZERO;
            for c in 0..n {
                acc += self.0[(r, c)] * x[c];
            }
            y[r] = acc;
        }
    }
    fn norm_upper(&self) -> f64 {
        let n = self.0.nrows();
        (0..n)
            .map(|r| (0..n).map(|c| self.0[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub struct HermEig {
    pub values: Vec<f64>,
    /// Column k is the eigenvector of `values[k]`.
    pub vectors: Mat<Complex64>,
}

/// Full eigendecomposition of a dense Hermitian matrix (ascending order).
pub fn herm_eig(m: &Mat<Complex64>) -> Result<HermEig, SolveError> {
    let n = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SolveError::DenseFailure(format!("{e:?}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| evd.S()[i].re).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        values.push(raw[src]);
        for r in 0..n {
            vectors[(r, k)] = evd.U()[(r, src)];
        }
    }
    Ok(HermEig { values, vectors })
}

/// Eigendecomposition of a dense real symmetric matrix (ascending order).
pub fn sym_eig(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>), SolveError> {
    let n = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SolveError::DenseFailure(format!("{e:?}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        values.push(raw[src]);
        for r in 0..n {
            vectors[(r, k)] = evd.U()[(r, src)];
        }
    }
    Ok((values, vectors))
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V f(Λ) V†.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Mat<Complex64> {
        let n = self.dim();
        let mut scaled = Mat::<Complex64>::zeros(n, n);
        for k in 0..n {
            let w = f(self.values[k]);
            for r in 0..n {
                scaled[(r, k)] = self.vectors[(r, k)] * w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// exp(t H) as a dense matrix.
    pub fn exp(&self, t: f64) -> Mat<Complex64> {
        // subtract the extreme eigenvalue before exponentiating only when it
        // would overflow; callers here always use bounded t*spectrum.
        self.map_spectrum(|lam| (t * lam).exp())
    }

    /// exp(t H) x without forming the matrix.
    pub fn exp_apply(&self, t: f64, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut coeff = vec![Complex64::ZERO; n];
        for k in 0..n {
            let mut acc = Complex64::ZERO;
            for r in 0..n {
                acc += self.vectors[(r, k)].conj() * x[r];
            }
            coeff[k] = acc * (t * self.values[k]).exp();
        }
        let mut out = vec![Complex64::ZERO; n];
        for k in 0..n {
            let c = coeff[k];
            for r in 0..n {
                out[r] += self.vectors[(r, k)] * c;
            }
        }
        out
    }
}

/// Result of an iterative or dense lowest-eigenpair solve.
#[derive(Clone, Debug)]
pub struct LowestEigen {
    /// Ascending eigenvalues, length k.
    pub values: Vec<f64>,
    /// Normalized eigenvectors matching `values`.
    pub vectors: Vec<Vec<Complex64>>,
    /// Explicit residuals ‖Hv − λv‖.
    pub residuals: Vec<f64>,
    /// Number of operator applications consumed.
    pub matvecs: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Lowest `k` eigenpairs by dense eigendecomposition.
pub fn dense_lowest(h: &Mat<Complex64>, k: usize) -> Result<LowestEigen, SolveError> {
    let n = h.nrows();
    if k > n {
        return Err(SolveError::TooFewStates { dim: n, k });
    }
    let eig = herm_eig(h)?;
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let v: Vec<Complex64> = (0..n).map(|r| eig.vectors[(r, j)]).collect();
        let mut hv = vec![Complex64::ZERO; n];
        DenseOp(h).apply(&v, &mut hv);
        axpy(&mut hv, Complex64::new(-eig.values[j], 0.0), &v);
        residuals.push(norm(&hv));
        vectors.push(v);
    }
    Ok(LowestEigen {
        values: eig.values[..k].to_vec(),
        vectors,
        residuals,
        matvecs: k,
    })
}

/// Options for [`lowest_eigenpairs`].
#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Krylov basis size between restarts.
    pub basis_size: usize,
    /// Maximum restart cycles before giving up.
    pub max_cycles: usize,
    /// Dimension at or below which the dense path is taken outright.
    pub dense_cutoff: usize,
    /// Seed for the deterministic start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            basis_size: 64,
            max_cycles: 400,
            dense_cutoff: 600,
            seed: 0x5eed,
        }
    }
}

/// Lowest `k` eigenpairs of a Hermitian operator.
///
/// Thick-restart Lanczos with full reorthogonalization; residuals
/// ‖Hv − λv‖ ≤ tol·‖H‖ are verified explicitly on the returned pairs.
pub fn lowest_eigenpairs(
    op: &dyn HermitianOp,
    k: usize,
    tol: f64,
    opts: LanczosOptions,
) -> Result<LowestEigen, SolveError> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(SolveError::TooFewStates { dim: n, k });
    }
    let scale = op.norm_upper().max(1.0);
    let target = tol * scale;

    if n <= opts.dense_cutoff.max(2 * k + 2) {
        let mut dense = Mat::<Complex64>::zeros(n, n);
        let mut basis = vec![Complex64::ZERO; n];
        let mut col = vec![Complex64::ZERO; n];
        for j in 0..n {
            basis.iter_mut().for_each(|z| *z = Complex64::ZERO);
            basis[j] = Complex64::new(1.0, 0.0);
            op.apply(&basis, &mut col);
            for i in 0..n {
                dense[(i, j)] = col[i];
            }
        }
        return dense_lowest(&dense, k);
    }

    let m = opts.basis_size.max(2 * k + 8).min(n);
    let keep = (2 * k + 6).min(m - 2);

    // deterministic pseudo-random start
    let mut v0: Vec<Complex64> = {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(opts.seed, 0);
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    };
    let nv = norm(&v0);
    v0.iter_mut().for_each(|z| *z /= nv);

    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    // projected matrix, entries in the current basis (real symmetric)
    let mut t = vec![vec![0.0f64; m]; m];
    let mut locked = 0usize; // kept Ritz vectors occupy columns 0..locked
    let mut matvecs = 0usize;
    let mut best_residual = f64::INFINITY;

    let mut w = vec![Complex64::ZERO; n];
    for _cycle in 0..opts.max_cycles {
        // extend basis to size m with Lanczos steps (full reorthogonalization)
        let mut j = basis.len() - 1;
        loop {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            // subtract known components
            if j > locked {
                let beta_prev = t[j][j - 1];
                if j >= 1 && beta_prev != 0.0 {
                    axpy(&mut w, Complex64::new(-beta_prev, 0.0), &basis[j - 1]);
                }
            } else if j == locked && locked > 0 {
                // border column: w couples to all locked vectors
                for i in 0..locked {
                    let c = t[i][j];
                    if c != 0.0 {
                        axpy(&mut w, Complex64::new(-c, 0.0), &basis[i]);
                    }
                }
            }
            let alpha = dot(&basis[j], &w).re;
            t[j][j] = alpha;
            axpy(&mut w, Complex64::new(-alpha, 0.0), &basis[j]);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = dot(b, &w);
                    if c.norm_sqr() > 0.0 {
                        axpy(&mut w, -c, b);
                    }
                }
            }
            let beta = norm(&w);
            if j + 1 == m || j + 1 == n {
                // cycle full: diagonalize projection
                let dim_t = j + 1;
                let (theta, s) = small_sym_eig(&t, dim_t)?;
                // residual estimates for the lowest k Ritz values
                let mut est = Vec::with_capacity(k);
                for i in 0..k {
                    est.push((beta * s[(dim_t - 1, i)]).abs());
                }
                let worst = est.iter().cloned().fold(0.0, f64::max);
                best_residual = best_residual.min(worst);
                if worst <= 0.5 * target || beta <= 1e-14 * scale || dim_t == n {
                    // assemble Ritz vectors and verify true residuals
                    let mut out_vals = Vec::with_capacity(k);
                    let mut out_vecs = Vec::with_capacity(k);
                    let mut out_res = Vec::with_capacity(k);
                    let mut ok = true;
                    for i in 0..k {
                        let mut v = vec![Complex64::ZERO; n];
                        for (bidx, b) in basis.iter().enumerate() {
                            axpy(&mut v, Complex64::new(s[(bidx, i)], 0.0), b);
                        }
                        let nv = norm(&v);
                        v.iter_mut().for_each(|z| *z /= nv);
                        op.apply(&v, &mut w);
                        matvecs += 1;
                        axpy(&mut w, Complex64::new(-theta[i], 0.0), &v);
                        let res = norm(&w);
                        ok &= res <= target;
                        out_vals.push(theta[i]);
                        out_vecs.push(v);
                        out_res.push(res);
                    }
                    if ok {
                        return Ok(LowestEigen {
                            values: out_vals,
                            vectors: out_vecs,
                            residuals: out_res,
                            matvecs,
                        });
                    }
                    if beta <= 1e-14 * scale || dim_t == n {
                        // exhausted the space without meeting the target
                        return Err(SolveError::NoConvergence {
                            matvecs,
                            best_residual: out_res.iter().cloned().fold(0.0, f64::max),
                            target,
                        });
                    }
                }
                // thick restart: keep lowest `keep` Ritz vectors
                let mut new_basis: Vec<Vec<Complex64>> = Vec::with_capacity(keep + 1);
                for i in 0..keep {
                    let mut v = vec![Complex64::ZERO; n];
                    for (bidx, b) in basis.iter().enumerate() {
                        axpy(&mut v, Complex64::new(s[(bidx, i)], 0.0), b);
                    }
                    new_basis.push(v);
                }
                let mut vnext = w.clone();
                vnext.iter_mut().for_each(|z| *z /= beta);
                new_basis.push(vnext);
                for row in t.iter_mut() {
                    row.iter_mut().for_each(|x| *x = 0.0);
                }
                for i in 0..keep {
                    t[i][i] = theta[i];
                    let c = beta * s[(dim_t - 1, i)];
                    t[i][keep] = c;
                    t[keep][i] = c;
                }
                basis = new_basis;
                locked = keep;
                break;
            } else {
                t[j][j + 1] = beta;
                t[j + 1][j] = beta;
                if beta <= 1e-14 * scale {
                    // invariant subspace: inject a fresh orthogonal direction
                    use rand::Rng;
                    let mut rng = crate::rng::seeded_rng(opts.seed, basis.len() as u64 + 1);
                    let mut fresh: Vec<Complex64> = (0..n)
                        .map(|_| {
                            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                        })
                        .collect();
                    for b in basis.iter() {
                        let c = dot(b, &fresh);
                        axpy(&mut fresh, -c, b);
                    }
                    let nf = norm(&fresh);
                    fresh.iter_mut().for_each(|z| *z /= nf);
                    w.copy_from_slice(&fresh);
                    t[j][j + 1] = 0.0;
                    t[j + 1][j] = 0.0;
                    basis.push(w.clone());
                    j += 1;
                    continue;
                }
                let mut vnext = w.clone();
                vnext.iter_mut().for_each(|z| *z /= beta);
                basis.push(vnext);
                j += 1;
            }
        }
    }
    Err(SolveError::NoConvergence {
        matvecs,
        best_residual,
        target,
    })
}

fn small_sym_eig(t: &[Vec<f64>], dim: usize) -> Result<(Vec<f64>, Mat<f64>), SolveError> {
    let mut m = Mat::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = t[i][j];
        }
    }
    sym_eig(&m)
}

/// exp(t H) v for a large Hermitian operator via a Lanczos-Krylov projection.
///
/// The subspace is grown until the a-posteriori estimate drops below
/// tol·‖result‖ or `m_max` is reached.
pub fn krylov_exp_apply(
    op: &dyn HermitianOp,
    t: f64,
    v: &[Complex64],
    tol: f64,
    m_max: usize,
) -> Result<Vec<Complex64>, SolveError> {
    let n = op.dim();
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok(vec![Complex64::ZERO; n]);
    }
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::ZERO; n];
    let mut prev: Option<Vec<Complex64>> = None;
    let m_cap = m_max.min(n);
    let mut matvecs = 0usize;

    for j in 0..m_cap {
        op.apply(&basis[j], &mut w);
        matvecs += 1;
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        axpy(&mut w, Complex64::new(-alpha, 0.0), &basis[j]);
        if j > 0 {
            axpy(&mut w, Complex64::new(-betas[j - 1], 0.0), &basis[j - 1]);
        }
        for b in basis.iter() {
            let c = dot(b, &w);
            axpy(&mut w, -c, b);
        }
        let beta = norm(&w);

        // evaluate the projected exponential
        let dim_t = alphas.len();
        let mut tm = Mat::<f64>::zeros(dim_t, dim_t);
        for i in 0..dim_t {
            tm[(i, i)] = alphas[i];
            if i + 1 < dim_t {
                tm[(i, i + 1)] = betas[i];
                tm[(i + 1, i)] = betas[i];
            }
        }
        let (vals, vecs) = sym_eig(&tm)?;
        let mut coeff = vec![0.0f64; dim_t];
        for kk in 0..dim_t {
            let weight = (t * vals[kk]).exp();
            for i in 0..dim_t {
                coeff[i] += vecs[(i, kk)] * weight * vecs[(0, kk)];
            }
        }
        let cur: Vec<Complex64> = {
            let mut out = vec![Complex64::ZERO; n];
            for (i, b) in basis.iter().enumerate() {
                axpy(&mut out, Complex64::new(beta0 * coeff[i], 0.0), b);
            }
            out
        };
        let settled = match &prev {
            Some(p) => {
                let diff: f64 = cur
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                diff <= tol * norm(&cur).max(1e-300)
            }
            None => false,
        };
        if settled || beta <= 1e-14 || j + 1 == m_cap {
            if settled || beta <= 1e-14 {
                return Ok(cur);
            }
            return Err(SolveError::NoConvergence {
                matvecs,
                best_residual: f64::NAN,
                target: tol,
            });
        }
        betas.push(beta);
        let vnext: Vec<Complex64> = w.iter().map(|z| z / beta).collect();
        basis.push(vnext);
        prev = Some(cur);
    }
    unreachable!()
}

/// exp(A) for a small general complex matrix by scaling and squaring with a
/// high-order Taylor kernel.
pub fn expm_dense(a: &Mat<Complex64>) -> Mat<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.25 {
        (norm1 / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(s as i32);
    let mut b = Mat::<Complex64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            b[(r, c)] = a[(r, c)] * scale;
        }
    }
    // Taylor to order 20 via Horner: exp(B) = Σ B^k / k!
    let mut acc = Mat::<Complex64>::identity(n, n);
    for k in (1..=20u32).rev() {
        let mut next = &b * &acc;
        let inv = 1.0 / k as f64;
        for r in 0..n {
            for c in 0..n {
                next[(r, c)] *= inv;
            }
        }
        for i in 0..n {
            next[(i, i)] += Complex64::new(1.0, 0.0);
        }
        acc = next;
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

/// exp(t·A) for a small Hermitian matrix: closed forms for 1×1 and 2×2,
/// eigendecomposition beyond.
pub fn expm_hermitian_small(a: &Mat<Complex64>, t: f64) -> Mat<Complex64> {
    let n = a.nrows();
    match n {
        1 => {
            let mut out = Mat::<Complex64>::zeros(1, 1);
            out[(0, 0)] = Complex64::new((t * a[(0, 0)].re).exp(), 0.0);
            out
        }
        2 => {
            // A = m·I + D with trace-free D; e^{tA} = e^{tm}(cosh(tr)·I + sinh(tr)/r·D)
            let aa = a[(0, 0)].re;
            let bb = a[(1, 1)].re;
            let c = a[(0, 1)];
            let m = 0.5 * (aa + bb);
            let delta = 0.5 * (aa - bb);
            let r = (delta * delta + c.norm_sqr()).sqrt();
            let (ch, sh_over_r) = if r < 1e-300 {
                (1.0, t)
            } else {
                ((t * r).cosh(), (t * r).sinh() / r)
            };
            let scale = (t * m).exp();
            let mut out = Mat::<Complex64>::zeros(2, 2);
            out[(0, 0)] = Complex64::new(scale * (ch + sh_over_r * delta), 0.0);
            out[(1, 1)] = Complex64::new(scale * (ch - sh_over_r * delta), 0.0);
            out[(0, 1)] = c * (scale * sh_over_r);
            out[(1, 0)] = c.conj() * (scale * sh_over_r);
            out
        }
        _ => herm_eig(a).expect("hermitian exp").exp(t),
    }
}

/// Operator 2-norm of a small dense matrix (largest singular value).
pub fn spectral_norm(a: &Mat<Complex64>) -> f64 {
    let gram = a.adjoint() * a;
    match herm_eig(&gram) {
        Ok(eig) => eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// Frobenius norm.
pub fn frob_norm(a: &Mat<Complex64>) -> f64 {
    let mut s = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            s += a[(r, c)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess, refined by Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{BasisTag, CooMatrix, SparseHermitian};
    use approx::assert_abs_diff_eq;

    fn random_hermitian(n: usize, seed: u64) -> Mat<Complex64> {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(seed, 0);
        let mut m = Mat::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    Complex64::new(rng.random::<f64>() - 0.5, 0.0)
                } else {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                };
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    #[test]
    fn herm_eig_reconstructs() {
        let m = random_hermitian(12, 3);
        let eig = herm_eig(&m).unwrap();
        let recon = eig.map_spectrum(|x| x);
        for i in 0..12 {
            for j in 0..12 {
                assert_abs_diff_eq!(recon[(i, j)].re, m[(i, j)].re, epsilon = 1e-12);
                assert_abs_diff_eq!(recon[(i, j)].im, m[(i, j)].im, epsilon = 1e-12);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lanczos_matches_dense_on_diagonal() {
        // diag(0, 1, 2) — the classic smoke test
        let mut coo = CooMatrix::new(3, 3);
        for i in 0..3 {
            coo.push(i, i, Complex64::new(i as f64, 0.0));
        }
        let h = SparseHermitian::new(coo, BasisTag::new("diag", 3)).unwrap();
        let got = lowest_eigenpairs(&h, 2, 1e-10, LanczosOptions::default()).unwrap();
        assert_abs_diff_eq!(got.values[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(got.values[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn lanczos_matches_dense_on_random_sparse() {
        // banded Hermitian, large enough to exercise the iterative path
        let n = 800;
        let mut coo = CooMatrix::new(n, n);
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(11, 0);
        for i in 0..n {
            coo.push(i, i, Complex64::new(rng.random::<f64>() * 2.0, 0.0));
            for off in 1..=3usize {
                if i + off < n {
                    let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    coo.push(i, i + off, v);
                    coo.push(i + off, i, v.conj());
                }
            }
        }
        let h = SparseHermitian::new(coo, BasisTag::new("band", n)).unwrap();
        let opts = LanczosOptions {
            dense_cutoff: 0,
            ..Default::default()
        };
        let got = lowest_eigenpairs(&h, 3, 1e-9, opts).unwrap();
        let dense = dense_lowest(&h.to_dense(), 3).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(got.values[i], dense.values[i], epsilon = 1e-7);
        }
        for (r, lam) in got.residuals.iter().zip(&got.values) {
            assert!(*r <= 1e-9 * h.norm_inf().max(1.0), "residual {r} at {lam}");
        }
    }

    #[test]
    fn lanczos_resolves_exact_degeneracy() {
        // I₂ ⊗ H doubles every eigenvalue; the solver must report both
        // copies of the lowest one, not skip to the next level
        let n = 350;
        let base = random_hermitian(n, 21);
        let mut coo = CooMatrix::new(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let v = base[(i, j)];
                if v != Complex64::ZERO {
                    coo.push(i, j, v);
                    coo.push(n + i, n + j, v);
                }
            }
        }
        let h = SparseHermitian::new(coo, BasisTag::new("doubled", 2 * n)).unwrap();
        let opts = LanczosOptions {
            dense_cutoff: 0,
            ..Default::default()
        };
        let got = lowest_eigenpairs(&h, 3, 1e-9, opts).unwrap();
        let dense = herm_eig(&base).unwrap();
        assert_abs_diff_eq!(got.values[0], dense.values[0], epsilon = 1e-8);
        assert_abs_diff_eq!(got.values[1], dense.values[0], epsilon = 1e-8);
        assert_abs_diff_eq!(got.values[2], dense.values[1], epsilon = 1e-8);
        // the two degenerate vectors are orthonormal
        let overlap: Complex64 = got.vectors[0]
            .iter()
            .zip(&got.vectors[1])
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!(overlap.norm() < 1e-7, "degenerate pair overlap {overlap}");
    }

    #[test]
    fn exhausted_iteration_budget_reports_diagnostics() {
        let n = 800;
        let mut coo = CooMatrix::new(n, n);
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(2, 0);
        for i in 0..n {
            coo.push(i, i, Complex64::new(rng.random::<f64>(), 0.0));
            if i + 1 < n {
                let v = Complex64::new(rng.random::<f64>() - 0.5, 0.0);
                coo.push(i, i + 1, v);
                coo.push(i + 1, i, v);
            }
        }
        let h = SparseHermitian::new(coo, BasisTag::new("band", n)).unwrap();
        let opts = LanczosOptions {
            dense_cutoff: 0,
            basis_size: 12,
            max_cycles: 1,
            ..Default::default()
        };
        let err = lowest_eigenpairs(&h, 3, 1e-12, opts).unwrap_err();
        match err {
            SolveError::NoConvergence {
                matvecs,
                best_residual,
                target,
            } => {
                assert!(matvecs > 0);
                assert!(best_residual > target);
            }
            other => panic!("expected NoConvergence, got {other}"),
        }
    }

    #[test]
    fn krylov_exp_matches_dense() {
        let n = 120;
        let m = random_hermitian(n, 5);
        let eig = herm_eig(&m).unwrap();
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(6, 0);
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let exact = eig.exp_apply(-0.7, &v);
        let approx_v = krylov_exp_apply(&DenseOp(&m), -0.7, &v, 1e-12, 80).unwrap();
        let diff: f64 = exact
            .iter()
            .zip(&approx_v)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-9, "krylov exp error {diff}");
    }

    #[test]
    fn expm_dense_matches_spectral_path_on_hermitian() {
        let m = random_hermitian(6, 9);
        let eig = herm_eig(&m).unwrap();
        let via_eig = eig.exp(1.0);
        let via_taylor = expm_dense(&m);
        for i in 0..6 {
            for j in 0..6 {
                assert!((via_eig[(i, j)] - via_taylor[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expm_dense_handles_non_normal() {
        // nilpotent: exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        let mut m = Mat::<Complex64>::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let e = expm_dense(&m);
        assert!((e[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e[(0, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(e[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6, 0.0, 2.0);
        // degree ≤ 11 is exact; ∫₀² t^7 dt = 2^8/8 = 32
        let got: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(7)).sum();
        assert_abs_diff_eq!(got, 32.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let mut m = Mat::<Complex64>::zeros(2, 2);
        m[(0, 0)] = Complex64::new(-3.0, 0.0);
        m[(1, 1)] = Complex64::new(2.0, 0.0);
        assert_abs_diff_eq!(spectral_norm(&m), 3.0, epsilon = 1e-12);
    }
}
