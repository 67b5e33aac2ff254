//! The fiberwise Hilbert-Schmidt representation over the phonon coordinate
//! grid, and the canonical cone of fiberwise-PSD fields.
//!
//! A sector state is stored as one D×D complex matrix ψ(φ) per grid point φ
//! (D = C(|Λ|, M̂)); membership in the canonical cone means every fiber is
//! Hermitian and positive semidefinite, which is checked exactly per point.
//! The sector Hamiltonian acts fiberwise through left/right multiplications
//! by 𝕋_{+g}(φ) = T_{+g}(φ) − ½⟨n, U_eff n⟩ and the diagonal coupling
//! Σ U_eff(x−y) ℒ(n_x)ℛ(n_y), plus the grid Laplacian of the phonon energy;
//! the same operator assembled through the tensor-product route must agree
//! entrywise, which fixes the sign of the absorbed quadratic term.

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::fock::{hop, FermionBasis, QGrid};
use crate::lattice::LatticeGraph;
use crate::linalg::{herm_eig, spectral_norm, HermEig, SolveError};
use crate::model::{
    check_a1, hole_particle_block, CouplingGrid, CouplingSpec, EffectiveCoulomb, ModelError,
    PhononBasis, SectorSpec,
};
use crate::rng::seeded_rng;
use crate::sparse::{BasisTag, CooMatrix, SparseHermitian};

fn cone_index(g: usize, x: usize, y: usize, d: usize) -> usize {
    g * d * d + x * d + y
}

/// A discretized element of the canonical cone space: one D×D matrix per
/// grid point.
#[derive(Clone, Debug)]
pub struct ConeField {
    pub fermion_dim: usize,
    pub grid: QGrid,
    pub values: Vec<Mat<Complex64>>,
}

/// Per-field membership diagnostics.
#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub member: bool,
    /// Most negative fiber eigenvalue (absolute).
    pub worst_eigenvalue: f64,
    /// Largest |ψ(φ) − ψ(φ)†| entry over fibers.
    pub worst_hermiticity_defect: f64,
    /// Largest fiber spectral norm (the field scale).
    pub max_fiber_norm: f64,
    pub worst_point: usize,
}

impl ConeField {
    pub fn zeros(fermion_dim: usize, grid: QGrid) -> ConeField {
        let values = (0..grid.dim())
            .map(|_| Mat::zeros(fermion_dim, fermion_dim))
            .collect();
        ConeField {
            fermion_dim,
            grid,
            values,
        }
    }

    /// Reshape a flattened sector vector (index g·D² + X·D + Y) into fibers.
    pub fn from_flat(fermion_dim: usize, grid: QGrid, flat: &[Complex64]) -> ConeField {
        let d = fermion_dim;
        assert_eq!(flat.len(), grid.dim() * d * d);
        let values = (0..grid.dim())
            .map(|g| {
                let mut m = Mat::zeros(d, d);
                for x in 0..d {
                    for y in 0..d {
                        m[(x, y)] = flat[cone_index(g, x, y, d)];
                    }
                }
                m
            })
            .collect();
        ConeField {
            fermion_dim,
            grid,
            values,
        }
    }

    pub fn to_flat(&self) -> Vec<Complex64> {
        let d = self.fermion_dim;
        let mut out = vec![Complex64::ZERO; self.grid.dim() * d * d];
        for (g, m) in self.values.iter().enumerate() {
            for x in 0..d {
                for y in 0..d {
                    out[cone_index(g, x, y, d)] = m[(x, y)];
                }
            }
        }
        out
    }

    /// Frobenius norm of the flattened vector.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|m| {
                let mut s = 0.0;
                for x in 0..m.nrows() {
                    for y in 0..m.ncols() {
                        s += m[(x, y)].norm_sqr();
                    }
                }
                s
            })
            .sum::<f64>()
            .sqrt()
    }

    /// A random cone member: PSD matrices B†B placed at `n_points` random
    /// grid points, normalized.
    pub fn random_member(
        fermion_dim: usize,
        grid: QGrid,
        n_points: usize,
        rng: &mut ChaCha8Rng,
    ) -> ConeField {
        let mut field = ConeField::zeros(fermion_dim, grid);
        let n_g = field.grid.dim();
        for _ in 0..n_points.max(1) {
            let g = rng.random_range(0..n_g);
            let d = fermion_dim;
            let mut b = Mat::<Complex64>::zeros(d, d);
            for x in 0..d {
                for y in 0..d {
                    b[(x, y)] =
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            let psd = b.adjoint() * &b;
            for x in 0..d {
                for y in 0..d {
                    field.values[g][(x, y)] += psd[(x, y)];
                }
            }
        }
        let norm = field.norm();
        for m in &mut field.values {
            for x in 0..fermion_dim {
                for y in 0..fermion_dim {
                    m[(x, y)] /= norm;
                }
            }
        }
        field
    }

    /// The fiberwise absolute value: each Hermitian-part fiber is replaced
    /// by |ψ(φ)| = ψ₊(φ) + ψ₋(φ). For an eigenvector with real fibers this
    /// is the canonical cone-positive representative of its eigenspace; when
    /// the heat semigroup preserves the cone, it has the same energy.
    pub fn absolute_value(&self) -> ConeField {
        let d = self.fermion_dim;
        let values = self
            .values
            .iter()
            .map(|m| {
                let mut herm = Mat::<Complex64>::zeros(d, d);
                for x in 0..d {
                    for y in 0..d {
                        herm[(x, y)] = (m[(x, y)] + m[(y, x)].conj()) * 0.5;
                    }
                }
                match herm_eig(&herm) {
                    Ok(eig) => eig.map_spectrum(f64::abs),
                    Err(_) => herm,
                }
            })
            .collect();
        ConeField {
            fermion_dim: d,
            grid: self.grid.clone(),
            values,
        }
    }

    /// Exact fiberwise membership check.
    pub fn membership(&self) -> MembershipReport {
        let mut worst_eigenvalue = f64::INFINITY;
        let mut worst_hermiticity_defect = 0.0f64;
        let mut max_fiber_norm = 0.0f64;
        let mut worst_point = 0;
        for (g, m) in self.values.iter().enumerate() {
            let d = self.fermion_dim;
            let mut herm = Mat::<Complex64>::zeros(d, d);
            let mut defect = 0.0f64;
            for x in 0..d {
                for y in 0..d {
                    defect = defect.max((m[(x, y)] - m[(y, x)].conj()).norm() * 0.5);
                    herm[(x, y)] = (m[(x, y)] + m[(y, x)].conj()) * 0.5;
                }
            }
            worst_hermiticity_defect = worst_hermiticity_defect.max(defect);
            if let Ok(eig) = herm_eig(&herm) {
                let lo = eig.values.first().copied().unwrap_or(0.0);
                let hi = eig
                    .values
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0f64, f64::max);
                max_fiber_norm = max_fiber_norm.max(hi);
                if lo < worst_eigenvalue {
                    worst_eigenvalue = lo;
                    worst_point = g;
                }
            }
        }
        if worst_eigenvalue == f64::INFINITY {
            worst_eigenvalue = 0.0;
        }
        let scale = max_fiber_norm.max(1e-300);
        let member = worst_eigenvalue >= -1e-12 * scale && worst_hermiticity_defect <= 1e-12 * scale;
        MembershipReport {
            member,
            worst_eigenvalue,
            worst_hermiticity_defect,
            max_fiber_norm,
            worst_point,
        }
    }
}

/// The sector Hamiltonian (and its hopping-only part) on the flattened grid
/// space of dimension D²·n_q^{|Λ|}.
pub struct GridHamiltonian {
    pub fermion_dim: usize,
    pub grid: QGrid,
    pub sector: SectorSpec,
    /// ℍ_M = −𝕋 − 𝕌 + H_p.
    pub full: SparseHermitian,
    /// K_M = −𝕋 + H_p.
    pub hopping_part: SparseHermitian,
    /// Diagonal of 𝕌 = Σ U_eff(x−y) ℒ(n_x)ℛ(n_y).
    pub coulomb_diag: Vec<f64>,
    /// Diagonal of 𝕌₀ = U₀ Σ ℒ(n_x)ℛ(n_x) (empty when U_eff is not pd).
    pub coulomb_floor_diag: Vec<f64>,
    pub u0: Option<f64>,
}

/// Assemble ℍ_M on the grid (fiberwise left/right multiplication route).
pub fn grid_hamiltonian(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    sector: SectorSpec,
    grid: &QGrid,
) -> Result<GridHamiltonian, ModelError> {
    let a1 = check_a1(graph, couplings)?;
    if !a1.holds {
        return Err(ModelError::A1Violated { spread: a1.spread });
    }
    let cg = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    let basis = FermionBasis::new(sites, sector.m_hat());
    let d = basis.dim();
    let n_g = grid.dim();
    let dim = d * d * n_g;

    // fermion-sector hop matrices and the quadratic diagonal of 𝕋_{+g}
    let mut quad_diag = vec![0.0; d];
    for (i, &mask) in basis.states().iter().enumerate() {
        let mut acc = 0.0;
        for x in 0..sites {
            if mask >> x & 1 == 0 {
                continue;
            }
            for y in 0..sites {
                if mask >> y & 1 == 1 {
                    acc += cg.u_eff(x, y);
                }
            }
        }
        quad_diag[i] = -0.5 * acc;
    }

    let mut t_part = CooMatrix::new(dim, dim);
    // per grid point: 𝕋_{+g}(φ) = Σ t e^{iΦ(φ)} c†c + quad_diag
    for g in 0..n_g {
        let phi = grid.point(g);
        let mut tt = Mat::<Complex64>::zeros(d, d);
        for &(x, y) in graph.edges() {
            let tval = cg.t[x][y];
            if tval == 0.0 {
                continue;
            }
            for (a, b) in [(x, y), (y, x)] {
                let coeffs = cg.phase_coefficients(a, b);
                let angle: f64 = coeffs.iter().zip(&phi).map(|(c, q)| c * q).sum();
                let phase = Complex64::from_polar(tval, angle);
                let hop_ab = hop(&basis, a, b);
                for (r, c, v) in hop_ab.entries() {
                    tt[(r, c)] += v * phase;
                }
            }
        }
        for (i, &q) in quad_diag.iter().enumerate() {
            tt[(i, i)] += Complex64::new(q, 0.0);
        }
        // ℒ(𝕋): (X', Y) ← (X, Y) with weight tt[X', X]
        for xo in 0..d {
            for xi in 0..d {
                let v = tt[(xo, xi)];
                if v == Complex64::ZERO {
                    continue;
                }
                for y in 0..d {
                    t_part.push(cone_index(g, xo, y, d), cone_index(g, xi, y, d), v);
                }
            }
        }
        // ℛ(𝕋): ψ𝕋: (X, Y') ← (X, Y) with weight tt[Y, Y']
        for yi in 0..d {
            for yo in 0..d {
                let v = tt[(yi, yo)];
                if v == Complex64::ZERO {
                    continue;
                }
                for x in 0..d {
                    t_part.push(cone_index(g, x, yo, d), cone_index(g, x, yi, d), v);
                }
            }
        }
    }

    // 𝕌 diagonal: Σ_{x∈X, y∈Y} U_eff(x−y), independent of the grid point
    let occupied: Vec<Vec<usize>> = basis
        .states()
        .iter()
        .map(|&m| (0..sites).filter(|&x| m >> x & 1 == 1).collect())
        .collect();
    let mut u_fiber = vec![0.0; d * d];
    for x_idx in 0..d {
        for y_idx in 0..d {
            let mut acc = 0.0;
            for &x in &occupied[x_idx] {
                for &y in &occupied[y_idx] {
                    acc += cg.u_eff(x, y);
                }
            }
            u_fiber[x_idx * d + y_idx] = acc;
        }
    }
    let mut coulomb_diag = vec![0.0; dim];
    for g in 0..n_g {
        for f in 0..d * d {
            coulomb_diag[g * d * d + f] = u_fiber[f];
        }
    }

    // U₀ floor diagonal U₀·|X ∩ Y|
    let ue = crate::model::effective_coulomb(graph, couplings)?;
    let coulomb_floor_diag = if let Some(u0) = ue.u0 {
        let mut v = vec![0.0; dim];
        for g in 0..n_g {
            for x_idx in 0..d {
                for y_idx in 0..d {
                    let overlap = (basis.state(x_idx) & basis.state(y_idx)).count_ones() as f64;
                    v[cone_index(g, x_idx, y_idx, d)] = u0 * overlap;
                }
            }
        }
        v
    } else {
        Vec::new()
    };

    // H_p on the grid ⊗ identity fiber
    let hp = grid.phonon_energy(couplings.omega0);
    let mut hp_part = CooMatrix::new(dim, dim);
    for (gr, gc, v) in hp.entries() {
        for f in 0..d * d {
            hp_part.push(gr * d * d + f, gc * d * d + f, v);
        }
    }

    let mut k_m = t_part.scale(Complex64::new(-1.0, 0.0));
    k_m = k_m.add(&hp_part);
    let mut full = k_m.clone();
    for (i, &v) in coulomb_diag.iter().enumerate() {
        if v != 0.0 {
            full.push(i, i, Complex64::new(-v, 0.0));
        }
    }

    let label = format!(
        "cone[{} sites, M̂={}, D={}, {}]",
        sites,
        sector.m_hat(),
        d,
        grid.tag().label
    );
    Ok(GridHamiltonian {
        fermion_dim: d,
        grid: grid.clone(),
        sector,
        full: SparseHermitian::new(full, BasisTag::new(format!("{label} full"), dim))?,
        hopping_part: SparseHermitian::new(k_m, BasisTag::new(format!("{label} K_M"), dim))?,
        coulomb_diag,
        coulomb_floor_diag,
        u0: ue.u0,
    })
}

/// The same operator assembled through the tensor-product route
/// (hole-particle form on (M̂, M̂) ⊗ grid), transported to the flattened cone
/// index order. Entrywise agreement with [`grid_hamiltonian`] pins the sign
/// of the absorbed quadratic term.
pub fn grid_hamiltonian_tensor_route(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    sector: SectorSpec,
    grid: &QGrid,
) -> Result<Mat<Complex64>, ModelError> {
    let hp = hole_particle_block(
        graph,
        couplings,
        &sector.hole_particle_basis(),
        PhononBasis::Grid(grid),
    )?;
    let basis = FermionBasis::new(graph.vertex_count(), sector.m_hat());
    let d = basis.dim();
    let n_g = grid.dim();
    let dim = d * d * n_g;
    let mut out = Mat::<Complex64>::zeros(dim, dim);
    // tensor index: (X·D + Y)·n_g + g  →  cone index g·D² + X·D + Y
    let map = |i: usize| -> usize {
        let e = i / n_g;
        let g = i % n_g;
        cone_index(g, e / d, e % d, d)
    };
    let csr = hp.csr();
    for r in 0..csr.rows {
        for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
            out[(map(r), map(csr.col_idx[k] as usize))] = csr.values[k];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SemigroupRow {
    pub beta: f64,
    /// Worst min output eigenvalue relative to the output field scale.
    pub worst_relative_eigenvalue: f64,
    pub satisfied: bool,
}

/// Flattened dimension above which the semigroup action switches from a
/// dense eigendecomposition to the Krylov propagator.
pub const DENSE_EXPONENTIAL_CUTOFF: usize = 4096;

/// Apply e^{−βℍ_M} to seeded random cone members and verify the outputs
/// stay in the cone within `tol`·(field scale). Dense below
/// [`DENSE_EXPONENTIAL_CUTOFF`], Krylov (tolerance 1e−10) above.
pub fn semigroup_positivity_check(
    gh: &GridHamiltonian,
    betas: &[f64],
    n_members: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<SemigroupRow>, SolveError> {
    let eig = if gh.full.dim() <= DENSE_EXPONENTIAL_CUTOFF {
        Some(herm_eig(&gh.full.to_dense())?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &beta in betas {
        let mut worst = 0.0f64;
        let mut rng = seeded_rng(seed, 0);
        for _ in 0..n_members {
            let member = ConeField::random_member(gh.fermion_dim, gh.grid.clone(), 3, &mut rng);
            let out_flat = match &eig {
                Some(e) => e.exp_apply(-beta, &member.to_flat()),
                None => crate::linalg::krylov_exp_apply(
                    &gh.full,
                    -beta,
                    &member.to_flat(),
                    1e-10,
                    240,
                )?,
            };
            let out = ConeField::from_flat(gh.fermion_dim, gh.grid.clone(), &out_flat);
            let rep = out.membership();
            let rel = -rep.worst_eigenvalue / rep.max_fiber_norm.max(1e-300);
            worst = worst.max(rel);
        }
        rows.push(SemigroupRow {
            beta,
            worst_relative_eigenvalue: worst,
            satisfied: worst <= tol,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct StrictPositivityReport {
    pub e0: f64,
    pub gap: f64,
    pub gap_tol: f64,
    pub unique: bool,
    /// min over interior grid points of (fiber min eigenvalue).
    pub min_interior_eigenvalue: f64,
    /// Largest fiber norm (gauge-fixed ground field scale).
    pub max_fiber_norm: f64,
    /// Hermiticity defect of the gauge-fixed fibers.
    pub hermiticity_defect: f64,
    pub strictly_positive: bool,
    /// (grid point, fiber min eigenvalue, fiber norm) profile on the
    /// interior.
    pub profile: Vec<(usize, f64, f64)>,
}

/// Ground state of the flattened ℍ_M: verify uniqueness, fix the cone gauge
/// by the phase of Σ_φ Tr ψ(φ), and report fiberwise strict positivity on
/// interior grid points.
pub fn ground_state_strict_positivity(
    gh: &GridHamiltonian,
    gap_tol_factor: f64,
) -> Result<StrictPositivityReport, SolveError> {
    let eig = herm_eig(&gh.full.to_dense())?;
    let e0 = eig.values[0];
    let gap = eig.values[1] - e0;
    let gap_tol = gap_tol_factor * e0.abs().max(1.0);
    let dim = gh.full.dim();
    let flat: Vec<Complex64> = (0..dim).map(|i| eig.vectors[(i, 0)]).collect();
    let mut field = ConeField::from_flat(gh.fermion_dim, gh.grid.clone(), &flat);

    // gauge: rotate the global phase so Σ_φ Tr ψ(φ) is real positive
    let mut trace_sum = Complex64::ZERO;
    for m in &field.values {
        for i in 0..gh.fermion_dim {
            trace_sum += m[(i, i)];
        }
    }
    let phase = if trace_sum.norm() > 0.0 {
        trace_sum.conj() / trace_sum.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    for m in &mut field.values {
        for x in 0..gh.fermion_dim {
            for y in 0..gh.fermion_dim {
                m[(x, y)] *= phase;
            }
        }
    }

    let mut min_interior = f64::INFINITY;
    let mut max_fiber_norm = 0.0f64;
    let mut herm_defect = 0.0f64;
    let mut profile = Vec::new();
    for (g, m) in field.values.iter().enumerate() {
        let d = gh.fermion_dim;
        let mut herm = Mat::<Complex64>::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                herm_defect = herm_defect.max((m[(x, y)] - m[(y, x)].conj()).norm() * 0.5);
                herm[(x, y)] = (m[(x, y)] + m[(y, x)].conj()) * 0.5;
            }
        }
        let fiber_eig = herm_eig(&herm)?;
        let lo = fiber_eig.values[0];
        let hi = fiber_eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        max_fiber_norm = max_fiber_norm.max(hi);
        if gh.grid.is_interior(g) {
            min_interior = min_interior.min(lo);
            profile.push((g, lo, hi));
        }
    }

    Ok(StrictPositivityReport {
        e0,
        gap,
        gap_tol,
        unique: gap > gap_tol,
        min_interior_eigenvalue: min_interior,
        max_fiber_norm,
        hermiticity_defect: herm_defect,
        strictly_positive: min_interior > 0.0,
        profile,
    })
}

#[derive(Clone, Debug)]
pub struct CoulombBoundReport {
    /// Worst output min eigenvalue relative to output scale, over samples.
    pub worst_relative_eigenvalue: f64,
    pub satisfied: bool,
    /// Same check for the psd-route operator Σ λ_x ℒ(ñ_x)ℛ(ñ_x).
    pub psd_route_worst: f64,
    pub psd_route_satisfied: bool,
}

/// Fiber-level check that Σ U_eff(x−y)ℒ(n_x)ℛ(n_y) − U₀ Σ ℒ(n_x)ℛ(n_x)
/// maps PSD matrices to PSD matrices (no grid needed: the operators act on
/// each fiber separately), plus the psd-decomposition route
/// Σ λ_x ℒ(ñ_x)ℛ(ñ_x) with ñ = Pᵀn.
pub fn coulomb_lower_bound_check(
    u_eff: &EffectiveCoulomb,
    m_hat: usize,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<CoulombBoundReport, SolveError> {
    let sites = u_eff.dim();
    let basis = FermionBasis::new(sites, m_hat);
    let d = basis.dim();
    let u0 = u_eff.u0.expect("lower bound needs a positive definite U_eff");

    // Hadamard multipliers: W[X,Y] = Σ_{x∈X,y∈Y} U_eff(x,y) − U₀|X∩Y|
    let mut w = Mat::<f64>::zeros(d, d);
    for xi in 0..d {
        for yi in 0..d {
            let (mx, my) = (basis.state(xi), basis.state(yi));
            let mut acc = 0.0;
            for x in 0..sites {
                if mx >> x & 1 == 0 {
                    continue;
                }
                for y in 0..sites {
                    if my >> y & 1 == 1 {
                        acc += u_eff.entry(x, y);
                    }
                }
            }
            w[(xi, yi)] = acc - u0 * (mx & my).count_ones() as f64;
        }
    }

    // psd route: eigen-decompose U_eff = PΛPᵀ, ñ_x diag values Σ_{a∈X} P[a,x]
    let (lambdas, p_mat) = crate::linalg::sym_eig(&u_eff.matrix)?;
    let n_tilde: Vec<Vec<f64>> = (0..sites)
        .map(|k| {
            (0..d)
                .map(|xi| {
                    let mask = basis.state(xi);
                    (0..sites)
                        .filter(|&a| mask >> a & 1 == 1)
                        .map(|a| p_mat[(a, k)])
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut rng = seeded_rng(seed, 0);
    let mut worst = 0.0f64;
    let mut psd_worst = 0.0f64;
    for _ in 0..n_samples {
        let mut b = Mat::<Complex64>::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                b[(x, y)] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let xi = b.adjoint() * &b;

        // difference operator: Hadamard with W
        let mut out = Mat::<Complex64>::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                out[(x, y)] = xi[(x, y)] * w[(x, y)];
            }
        }
        let eig = herm_eig(&out)?;
        let scale = spectral_norm(&out).max(1e-300);
        worst = worst.max(-eig.values[0] / scale);

        // psd route: Σ_k λ_k ñ_k ξ ñ_k (diagonal multipliers)
        let mut out2 = Mat::<Complex64>::zeros(d, d);
        for (k, &lam) in lambdas.iter().enumerate() {
            for x in 0..d {
                for y in 0..d {
                    out2[(x, y)] += xi[(x, y)] * (lam * n_tilde[k][x] * n_tilde[k][y]);
                }
            }
        }
        let eig2 = herm_eig(&out2)?;
        let scale2 = spectral_norm(&out2).max(1e-300);
        psd_worst = psd_worst.max(-eig2.values[0] / scale2);
    }

    Ok(CoulombBoundReport {
        worst_relative_eigenvalue: worst,
        satisfied: worst <= tol,
        psd_route_worst: psd_worst,
        psd_route_satisfied: psd_worst <= tol,
    })
}

#[derive(Clone, Debug)]
pub struct ExpansionRow {
    pub beta: f64,
    /// ‖e^{−βℍ⁰} − Σ_{n≤N} 𝒟_n‖ for N = 0, 1, 2, ...
    pub remainders: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ExpansionReport {
    pub rows: Vec<ExpansionRow>,
    /// For each N: the log-log slope of remainder vs β (expected N+1).
    pub slopes: Vec<f64>,
    pub remainders_monotone: bool,
    /// Worst relative cone violation of partial sums applied to samples.
    pub cone_worst: f64,
}

/// Evaluate the iterated-convolution expansion of e^{−βℍ⁰} with
/// ℍ⁰ = K − 𝕌₀ and the partial sums Σ_{n≤N} 𝒟_n: remainder magnitudes,
/// their β-scaling, and cone preservation of each partial sum on samples.
pub fn duhamel_expansion_check(
    gh: &GridHamiltonian,
    betas: &[f64],
    max_terms: usize,
    quad_points: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ExpansionReport, SolveError> {
    assert!(max_terms <= 2, "expansion implemented through the 2nd term");
    let dim = gh.full.dim();
    let u0_diag = &gh.coulomb_floor_diag;
    assert!(!u0_diag.is_empty(), "expansion needs a pd U_eff");

    // ℍ⁰ = K − 𝕌₀
    let k_eig = herm_eig(&gh.hopping_part.to_dense())?;
    let mut h0 = gh.hopping_part.to_dense();
    for i in 0..dim {
        h0[(i, i)] -= Complex64::new(u0_diag[i], 0.0);
    }
    let h0_eig = herm_eig(&h0)?;

    // transform 𝕌₀ into the K eigenbasis: Ũ₀ = V† diag V
    let v = &k_eig.vectors;
    let mut scaled = Mat::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for m in 0..dim {
            scaled[(i, m)] = Complex64::new(u0_diag[i], 0.0) * v[(i, m)];
        }
    }
    let u_tilde = v.adjoint() * &scaled;

    let diag_exp = |t: f64| -> Vec<f64> { k_eig.values.iter().map(|e| (-t * e).exp()).collect() };
    let back = |m: &Mat<Complex64>| -> Mat<Complex64> { v * m * v.adjoint() };

    let mut rows = Vec::new();
    let mut all_partials: Vec<Vec<Mat<Complex64>>> = Vec::new();
    for &beta in betas {
        let target = h0_eig.exp(-beta);
        // 𝒟₀ = e^{−βK}
        let d0 = k_eig.exp(-beta);
        // 𝒟₁ = ∫₀^β e^{−sK} 𝕌₀ e^{−(β−s)K} ds (in the K eigenbasis)
        let (nodes, weights) = crate::linalg::gauss_legendre(quad_points, 0.0, beta);
        let mut d1_eigb = Mat::<Complex64>::zeros(dim, dim);
        for (s, w) in nodes.iter().zip(&weights) {
            let left = diag_exp(*s);
            let right = diag_exp(beta - *s);
            for r in 0..dim {
                for c in 0..dim {
                    d1_eigb[(r, c)] += u_tilde[(r, c)] * (w * left[r] * right[c]);
                }
            }
        }
        let d1 = back(&d1_eigb);
        // 𝒟₂ over the simplex s₁+s₂ ≤ β via the map s₁ = βu, s₂ = β(1−u)v
        let (unodes, uweights) = crate::linalg::gauss_legendre(quad_points, 0.0, 1.0);
        let mut d2_eigb = Mat::<Complex64>::zeros(dim, dim);
        for (u, wu) in unodes.iter().zip(&uweights) {
            let s1 = beta * u;
            for (vv, wv) in unodes.iter().zip(&uweights) {
                let s2 = beta * (1.0 - u) * vv;
                let s3 = beta - s1 - s2;
                let jac = beta * beta * (1.0 - u) * wu * wv;
                let e1 = diag_exp(s1);
                let e2 = diag_exp(s2);
                let e3 = diag_exp(s3);
                // e1·Ũ₀·e2·Ũ₀·e3 with diagonal e's: one matmul
                let mut left = Mat::<Complex64>::zeros(dim, dim);
                for r in 0..dim {
                    for c in 0..dim {
                        left[(r, c)] = u_tilde[(r, c)] * (e1[r] * e2[c]);
                    }
                }
                let prod = &left * &u_tilde;
                for r in 0..dim {
                    for c in 0..dim {
                        d2_eigb[(r, c)] += prod[(r, c)] * (jac * e3[c]);
                    }
                }
            }
        }
        let d2 = back(&d2_eigb);

        let mut partials = Vec::new();
        let mut acc = Mat::<Complex64>::zeros(dim, dim);
        let mut remainders = Vec::new();
        for term in [&d0, &d1, &d2][..=max_terms].iter() {
            acc = &acc + *term;
            partials.push(acc.clone());
            let diff = &target - &acc;
            remainders.push(spectral_norm(&diff));
        }
        all_partials.push(partials);
        rows.push(ExpansionRow { beta, remainders });
    }

    // slopes of log remainder vs log β for each truncation order
    let mut slopes = Vec::new();
    for n in 0..=max_terms {
        let xs: Vec<f64> = betas.iter().map(|b| b.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.remainders[n].ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        slopes.push(num / den);
    }

    let remainders_monotone = rows
        .iter()
        .all(|r| r.remainders.windows(2).all(|w| w[1] <= w[0]));

    // cone preservation of partial sums on samples
    let mut cone_worst = 0.0f64;
    let mut rng = seeded_rng(seed, 0);
    for partials in &all_partials {
        for p in partials {
            for _ in 0..n_samples {
                let member =
                    ConeField::random_member(gh.fermion_dim, gh.grid.clone(), 2, &mut rng);
                let flat = member.to_flat();
                let mut out = vec![Complex64::ZERO; dim];
                for r in 0..dim {
                    let mut acc = Complex64::ZERO;
                    for c in 0..dim {
                        acc += p[(r, c)] * flat[c];
                    }
                    out[r] = acc;
                }
                let field = ConeField::from_flat(gh.fermion_dim, gh.grid.clone(), &out);
                let rep = field.membership();
                cone_worst =
                    cone_worst.max(-rep.worst_eigenvalue / rep.max_fiber_norm.max(1e-300));
            }
        }
    }

    Ok(ExpansionReport {
        rows,
        slopes,
        remainders_monotone,
        cone_worst,
    })
}

/// Extract the (φ_row, φ_col) kernel block of e^{−βK_M} as a D²×D² matrix,
/// normalized by the grid weight h^{|Λ|} so it approximates the continuum
/// kernel operator.
pub fn semigroup_kernel_block(
    gh: &GridHamiltonian,
    k_eig: &HermEig,
    beta: f64,
    g_row: usize,
    g_col: usize,
) -> Mat<Complex64> {
    let d = gh.fermion_dim;
    let dd = d * d;
    let weight = gh.grid.spacing().powi(gh.grid.site_count() as i32);
    let mut out = Mat::<Complex64>::zeros(dd, dd);
    // column-block application of the exponential
    for f_col in 0..dd {
        let mut unit = vec![Complex64::ZERO; gh.full.dim()];
        unit[g_col * dd + f_col] = Complex64::new(1.0, 0.0);
        let applied = k_eig.exp_apply(-beta, &unit);
        for f_row in 0..dd {
            out[(f_row, f_col)] = applied[g_row * dd + f_row] / weight;
        }
    }
    out
}
