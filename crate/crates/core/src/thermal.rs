//! Exact finite-temperature traces: Duhamel two-point functions, the charge
//! susceptibility on the torus with its momentum-space bound, and the
//! field-deformation inequality of the partition function.
//!
//! All traces are dense-exact: every (N↑, N↓) block of the Hamiltonian is
//! eigendecomposed in full and the trace is the block sum with a single
//! global normalization — no stochastic estimators anywhere. Boltzmann
//! weights are computed relative to the global ground energy so β of a few
//! dozen cannot overflow.

use faer::Mat;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::fock::{BosonBasisOcc, SpinSectorBasis};
use crate::lattice::LatticeGraph;
use crate::linalg::{herm_eig, HermEig, SolveError};
use crate::model::{
    assemble_h, effective_coulomb, h_field, hole_particle_block, CouplingSpec, ElectronBasis,
    ModelError, PhononBasis,
};
use crate::rng::seeded_rng;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("charge susceptibility needs the periodic hypercubic torus")]
    NotTorus,
    #[error("momentum {p:?} is not on the reciprocal grid (π/L)·ℤ^d")]
    MomentumOffGrid { p: Vec<f64> },
    #[error("Û_eff({p:?}) = {value:.3e} < 0: momentum-space positivity violated")]
    B2Violated { p: Vec<f64>, value: f64 },
}

/// Which unitary frame the trace is taken in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThermalFrame {
    /// H + Σ μ_x n_x on the original electron basis.
    OriginalWithMu,
    /// The hole-particle transformed ℍ (no explicit μ; it is absorbed).
    HoleParticle,
}

/// One conserved (N↑, N↓) block, fully eigendecomposed.
pub struct ThermalBlock {
    pub basis: SpinSectorBasis,
    pub eig: HermEig,
}

/// Eigen-data of a Hamiltonian at inverse temperature β, block by block.
pub struct ThermalState {
    pub beta: f64,
    pub frame: ThermalFrame,
    pub blocks: Vec<ThermalBlock>,
    /// Global ground energy; Boltzmann weights use E − e_min.
    pub e_min: f64,
    /// Σ e^{−β(E−e_min)} over all eigenvalues of all blocks.
    pub z_shifted: f64,
    ph_dim: usize,
}

/// Per-block complex diagonals of an observable that is diagonal in the
/// occupation basis (δn_x, momentum densities, σ-weighted sums, ...).
pub struct BlockDiagonal {
    pub blocks: Vec<Vec<Complex64>>,
}

impl BlockDiagonal {
    pub fn conj(&self) -> BlockDiagonal {
        BlockDiagonal {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|z| z.conj()).collect())
                .collect(),
        }
    }
}

/// Build the thermal state of the half-filling-pinned model: all electron
/// blocks ⊗ the truncated phonon basis, dense-exact.
pub fn thermal_state(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    n_max: usize,
    beta: f64,
    frame: ThermalFrame,
) -> Result<ThermalState, ThermalError> {
    let sites = graph.vertex_count();
    let phonons = BosonBasisOcc::new(sites, n_max);
    let ph_dim = phonons.dim();
    let sectors: Vec<(usize, usize)> = (0..=sites)
        .flat_map(|a| (0..=sites).map(move |b| (a, b)))
        .collect();
    let blocks: Vec<ThermalBlock> = sectors
        .par_iter()
        .map(|&(a, b)| -> Result<ThermalBlock, ThermalError> {
            let basis = SpinSectorBasis::new(sites, a, b);
            let h = match frame {
                ThermalFrame::OriginalWithMu => assemble_h(
                    graph,
                    couplings,
                    &ElectronBasis::Sector(basis.clone()),
                    &phonons,
                    true,
                )?,
                ThermalFrame::HoleParticle => hole_particle_block(
                    graph,
                    couplings,
                    &basis,
                    PhononBasis::Occupation(&phonons),
                )?,
            };
            let eig = herm_eig(&h.to_dense())?;
            Ok(ThermalBlock { basis, eig })
        })
        .collect::<Result<_, _>>()?;
    let e_min = blocks
        .iter()
        .flat_map(|b| b.eig.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let z_shifted: f64 = blocks
        .iter()
        .flat_map(|b| b.eig.values.iter())
        .map(|e| (-beta * (e - e_min)).exp())
        .sum();
    Ok(ThermalState {
        beta,
        frame,
        blocks,
        e_min,
        z_shifted,
        ph_dim,
    })
}

impl ThermalState {
    pub fn ph_dim(&self) -> usize {
        self.ph_dim
    }

    fn weight(&self, e: f64) -> f64 {
        (-self.beta * (e - self.e_min)).exp()
    }

    /// Assemble a per-block diagonal Σ_x w_x·(f_x + offset) from per-site
    /// electron diagonals f_x.
    fn site_weighted_diagonal(
        &self,
        weights: &[Complex64],
        per_site: impl Fn(&SpinSectorBasis, usize) -> Vec<f64>,
        offset: f64,
    ) -> BlockDiagonal {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let dim_e = b.basis.dim();
                let mut diag = vec![Complex64::ZERO; dim_e * self.ph_dim];
                for (x, &w) in weights.iter().enumerate() {
                    if w == Complex64::ZERO {
                        continue;
                    }
                    let site_diag = per_site(&b.basis, x);
                    for (e, &v) in site_diag.iter().enumerate() {
                        let value = w * (v + offset);
                        for p in 0..self.ph_dim {
                            diag[e * self.ph_dim + p] += value;
                        }
                    }
                }
                diag
            })
            .collect();
        BlockDiagonal { blocks }
    }

    /// n_x as a block diagonal.
    pub fn observable_number(&self, x: usize) -> BlockDiagonal {
        let sites = self.blocks[0].basis.site_count();
        let mut w = vec![Complex64::ZERO; sites];
        w[x] = Complex64::new(1.0, 0.0);
        self.site_weighted_diagonal(&w, |b, x| b.number_diagonal(x), 0.0)
    }

    /// δñ_p = |Λ|^{−1/2} Σ_x e^{−i p·x} (n_x − 1).
    pub fn observable_density_fluctuation(
        &self,
        graph: &LatticeGraph,
        p: &[f64],
    ) -> BlockDiagonal {
        let sites = graph.vertex_count();
        let positions = graph.positions().expect("torus has positions");
        let norm = 1.0 / (sites as f64).sqrt();
        let weights: Vec<Complex64> = (0..sites)
            .map(|x| {
                let phase: f64 = positions[x]
                    .iter()
                    .zip(p)
                    .map(|(&c, &pj)| c as f64 * pj)
                    .sum();
                Complex64::from_polar(norm, -phase)
            })
            .collect();
        self.site_weighted_diagonal(&weights, |b, x| b.number_diagonal(x), -1.0)
    }

    /// Σ_x (U_eff h)_x σ_x with complex h (hole-particle frame observable).
    pub fn observable_sigma_coulomb(
        &self,
        u_eff: &Mat<f64>,
        h: &[Complex64],
    ) -> BlockDiagonal {
        let sites = u_eff.nrows();
        let weights: Vec<Complex64> = (0..sites)
            .map(|x| (0..sites).map(|y| u_eff[(x, y)] * h[y]).sum())
            .collect();
        self.site_weighted_diagonal(&weights, |b, x| b.sigma_diagonal(x), 0.0)
    }

    /// Thermal average of a block-diagonal observable.
    pub fn average(&self, obs: &BlockDiagonal) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (block, diag) in self.blocks.iter().zip(&obs.blocks) {
            let n = block.eig.values.len();
            for m in 0..n {
                let w = self.weight(block.eig.values[m]);
                if w == 0.0 {
                    continue;
                }
                // ⟨m|A|m⟩ = Σ_i |V_{im}|² a_i
                let mut amm = Complex64::ZERO;
                for i in 0..n {
                    amm += diag[i] * block.eig.vectors[(i, m)].norm_sqr();
                }
                acc += amm * w;
            }
        }
        acc / self.z_shifted
    }

    /// The Duhamel two-point function (A, B) of two block-diagonal
    /// observables, evaluated in the eigenbasis with the degenerate limit
    /// taken below |E_n − E_m| < 1e−12.
    pub fn duhamel(&self, a: &BlockDiagonal, b: &BlockDiagonal) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (block, (da, db)) in self
            .blocks
            .iter()
            .zip(a.blocks.iter().zip(b.blocks.iter()))
        {
            let n = block.eig.values.len();
            // transform the diagonals into the eigenbasis with two dense
            // products: Ã = V† diag(a) V
            let v = &block.eig.vectors;
            let mut scaled_a = Mat::<Complex64>::zeros(n, n);
            let mut scaled_b = Mat::<Complex64>::zeros(n, n);
            for i in 0..n {
                for m in 0..n {
                    scaled_a[(i, m)] = da[i] * v[(i, m)];
                    scaled_b[(i, m)] = db[i] * v[(i, m)];
                }
            }
            let ta = v.adjoint() * &scaled_a;
            let tb = v.adjoint() * &scaled_b;
            for m in 0..n {
                let em = block.eig.values[m];
                let wm = self.weight(em);
                for nn in 0..n {
                    let en = block.eig.values[nn];
                    let kernel = if (en - em).abs() < 1e-12 {
                        wm
                    } else {
                        (wm - self.weight(en)) / (self.beta * (en - em))
                    };
                    if kernel == 0.0 {
                        continue;
                    }
                    acc += ta[(m, nn)] * tb[(nn, m)] * kernel;
                }
            }
        }
        acc / self.z_shifted
    }
}

/// The reciprocal grid of the torus: p = (π/L)·k componentwise, within
/// [−π, π).
pub fn reciprocal_momenta(graph: &LatticeGraph) -> Result<Vec<Vec<f64>>, ThermalError> {
    let (l, d) = graph.is_torus().ok_or(ThermalError::NotTorus)?;
    let per_axis: Vec<f64> = (0..2 * l as i64)
        .map(|k| (k - l as i64) as f64 * std::f64::consts::PI / l as f64)
        .collect();
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for prefix in &out {
            for &pj in &per_axis {
                let mut v = prefix.clone();
                v.push(pj);
                next.push(v);
            }
        }
        out = next;
    }
    Ok(out)
}

fn momentum_on_grid(graph: &LatticeGraph, p: &[f64]) -> Result<(), ThermalError> {
    let (l, d) = graph.is_torus().ok_or(ThermalError::NotTorus)?;
    if p.len() != d {
        return Err(ThermalError::MomentumOffGrid { p: p.to_vec() });
    }
    for &pj in p {
        let k = pj * l as f64 / std::f64::consts::PI;
        if (k - k.round()).abs() > 1e-9 {
            return Err(ThermalError::MomentumOffGrid { p: p.to_vec() });
        }
    }
    Ok(())
}

/// Finite-volume charge susceptibility χ_Λ(p) = β (δñ_{−p}, δñ_p).
pub fn charge_susceptibility(
    ts: &ThermalState,
    graph: &LatticeGraph,
    p: &[f64],
) -> Result<f64, ThermalError> {
    momentum_on_grid(graph, p)?;
    assert_eq!(ts.frame, ThermalFrame::OriginalWithMu);
    let minus_p: Vec<f64> = p.iter().map(|v| -v).collect();
    let a = ts.observable_density_fluctuation(graph, &minus_p);
    let b = ts.observable_density_fluctuation(graph, p);
    let value = ts.duhamel(&a, &b);
    debug_assert!(value.im.abs() < 1e-9 * value.re.abs().max(1.0));
    Ok(ts.beta * value.re)
}

/// Momentum-space effective Coulomb Û_{eff,Λ}(p) = Σ_{x∈Λ} e^{−ip·x} U_eff(x).
pub fn u_eff_hat(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    p: &[f64],
) -> Result<f64, ThermalError> {
    momentum_on_grid(graph, p)?;
    let ue = effective_coulomb(graph, couplings)?;
    let positions = graph.positions().expect("torus has positions");
    let origin = positions
        .iter()
        .position(|c| c.iter().all(|&v| v == 0))
        .expect("torus contains the origin");
    let mut acc = Complex64::ZERO;
    for x in 0..graph.vertex_count() {
        let phase: f64 = positions[x]
            .iter()
            .zip(p)
            .map(|(&c, &pj)| c as f64 * pj)
            .sum();
        acc += Complex64::from_polar(ue.entry(x, origin), -phase);
    }
    debug_assert!(acc.im.abs() < 1e-9 * acc.re.abs().max(1.0));
    Ok(acc.re)
}

/// One momentum row of the susceptibility bound check.
#[derive(Clone, Debug)]
pub struct SusceptibilityRow {
    pub p: Vec<f64>,
    pub chi: f64,
    pub u_hat: f64,
    /// χ·Û_eff, compared against 1.
    pub product: f64,
    pub checked: bool,
    pub satisfied: bool,
}

/// One random-field row of the raw Duhamel inequality check
/// ((⟨σ,U_eff h⟩*, ⟨σ,U_eff h⟩)) ≤ β⁻¹⟨h, U_eff h⟩.
#[derive(Clone, Debug)]
pub struct DuhamelBoundRow {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug)]
pub struct SusceptibilityReport {
    pub beta: f64,
    pub rows: Vec<SusceptibilityRow>,
    /// max_x |⟨n_x⟩ − 1|.
    pub half_filling_deviation: f64,
    pub duhamel_rows: Vec<DuhamelBoundRow>,
    pub all_satisfied: bool,
}

/// Check χ_Λ(p)·Û_{eff,Λ}(p) ≤ 1 + tol at every reciprocal momentum with
/// Û_eff > 0, the half-filling identity ⟨n_x⟩ = 1, and the raw Duhamel
/// inequality on random complex fields in the hole-particle frame.
pub fn susceptibility_bound_check(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    n_max: usize,
    beta: f64,
    tol: f64,
    n_random_fields: usize,
    seed: u64,
) -> Result<SusceptibilityReport, ThermalError> {
    let momenta = reciprocal_momenta(graph)?;
    // momentum-space positivity must hold before the bound is meaningful
    for p in &momenta {
        let v = u_eff_hat(graph, couplings, p)?;
        if v < -1e-12 {
            return Err(ThermalError::B2Violated {
                p: p.clone(),
                value: v,
            });
        }
    }

    let ts = thermal_state(graph, couplings, n_max, beta, ThermalFrame::OriginalWithMu)?;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for p in &momenta {
        let chi = charge_susceptibility(&ts, graph, p)?;
        let u_hat = u_eff_hat(graph, couplings, p)?;
        let checked = u_hat > 1e-12;
        let product = chi * u_hat;
        let satisfied = !checked || product <= 1.0 + tol;
        all_ok &= satisfied;
        rows.push(SusceptibilityRow {
            p: p.clone(),
            chi,
            u_hat,
            product,
            checked,
            satisfied,
        });
    }

    let mut half_filling_deviation = 0.0f64;
    for x in 0..graph.vertex_count() {
        let nx = ts.average(&ts.observable_number(x));
        half_filling_deviation = half_filling_deviation.max((nx.re - 1.0).abs());
    }

    // raw Duhamel bound with random complex h in the transformed frame
    let ts_hp = thermal_state(graph, couplings, n_max, beta, ThermalFrame::HoleParticle)?;
    let ue = effective_coulomb(graph, couplings)?;
    let mut rng = seeded_rng(seed, 0);
    let mut duhamel_rows = Vec::new();
    for _ in 0..n_random_fields {
        let h: Vec<Complex64> = (0..graph.vertex_count())
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let a = ts_hp.observable_sigma_coulomb(&ue.matrix, &h);
        let lhs = ts_hp.duhamel(&a.conj(), &a).re;
        let mut rhs = 0.0;
        for x in 0..graph.vertex_count() {
            for y in 0..graph.vertex_count() {
                rhs += (h[x].conj() * ue.entry(x, y) * h[y]).re;
            }
        }
        rhs /= beta;
        let satisfied = lhs <= rhs * (1.0 + 1e-10) + 1e-12;
        all_ok &= satisfied;
        duhamel_rows.push(DuhamelBoundRow {
            lhs,
            rhs,
            satisfied,
        });
    }

    Ok(SusceptibilityReport {
        beta,
        rows,
        half_filling_deviation,
        duhamel_rows,
        all_satisfied: all_ok,
    })
}

/// ε-regularized partition function Z_{β,ε}(h) = Tr[e^{−βℍ(h)} e^{−εH_p}],
/// with Boltzmann weights relative to `e_shift`.
fn regularized_partition(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    field: &[f64],
    phonons: &BosonBasisOcc,
    beta: f64,
    epsilon: f64,
    e_shift: f64,
) -> Result<f64, ThermalError> {
    let h = h_field(graph, couplings, field, PhononBasis::Occupation(phonons))?;
    let eig = herm_eig(&h.to_dense())?;
    let dim = h.dim();
    let ph_dim = phonons.dim();
    let hp_diag = phonons.energy_diagonal(couplings.omega0);
    // Tr[e^{−βℍ(h)} e^{−εH_p}] = Σ_m w_m Σ_i e^{−εH_p(i)} |V_{im}|²
    let mut z = 0.0;
    for m in 0..dim {
        let w = (-beta * (eig.values[m] - e_shift)).exp();
        if w == 0.0 {
            continue;
        }
        let mut overlap = 0.0;
        for i in 0..dim {
            overlap += (-epsilon * hp_diag[i % ph_dim]).exp() * eig.vectors[(i, m)].norm_sqr();
        }
        z += w * overlap;
    }
    Ok(z)
}

#[derive(Clone, Debug)]
pub struct GaussianDominationReport {
    pub beta: f64,
    pub epsilon: f64,
    /// Z(h)/Z(0) per sampled field.
    pub ratios: Vec<f64>,
    pub all_dominated: bool,
    /// max |Z(h) − Z(−h)|/Z(0) over samples.
    pub evenness_deviation: f64,
    /// Least-squares quadratic fit of λ ↦ Z(λh)/Z(0) around λ = 0.
    pub fit_linear: f64,
    pub fit_curvature: f64,
}

/// Verify Z_{β,ε}(h) ≤ Z_{β,ε}(0) on seeded Gaussian fields, the evenness of
/// Z under h → −h, and that λ ↦ Z(λh) is stationary and concave at λ = 0.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_domination_check(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    n_max: usize,
    beta: f64,
    epsilon: f64,
    n_samples: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<GaussianDominationReport, ThermalError> {
    let sites = graph.vertex_count();
    let phonons = BosonBasisOcc::new(sites, n_max);
    // common shift so the ratios are well scaled
    let h0 = h_field(
        graph,
        couplings,
        &vec![0.0; sites],
        PhononBasis::Occupation(&phonons),
    )?;
    let e_shift = crate::linalg::dense_lowest(&h0.to_dense(), 1)?.values[0];
    let z0 = regularized_partition(
        graph,
        couplings,
        &vec![0.0; sites],
        &phonons,
        beta,
        epsilon,
        e_shift,
    )?;

    let mut rng = seeded_rng(seed, 0);
    let samples: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| (0..sites).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    let results: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|h| -> Result<(f64, f64), ThermalError> {
            let zh = regularized_partition(graph, couplings, h, &phonons, beta, epsilon, e_shift)?;
            let hneg: Vec<f64> = h.iter().map(|v| -v).collect();
            let zneg =
                regularized_partition(graph, couplings, &hneg, &phonons, beta, epsilon, e_shift)?;
            Ok((zh, zneg))
        })
        .collect::<Result<_, _>>()?;

    let mut ratios = Vec::with_capacity(n_samples);
    let mut evenness = 0.0f64;
    let mut all_ok = true;
    for (zh, zneg) in &results {
        let ratio = zh / z0;
        all_ok &= *zh <= z0 * (1.0 + rel_tol);
        evenness = evenness.max((zh - zneg).abs() / z0);
        ratios.push(ratio);
    }

    // quadratic fit of Z(λh)/Z(0) on a symmetric λ stencil for the first h
    let (fit_linear, fit_curvature) = if let Some(h) = samples.first() {
        let lambdas = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let mut values = Vec::new();
        for &lam in &lambdas {
            let hl: Vec<f64> = h.iter().map(|v| v * lam).collect();
            let z = regularized_partition(graph, couplings, &hl, &phonons, beta, epsilon, e_shift)?;
            values.push(z / z0);
        }
        fit_quadratic(&lambdas, &values)
    } else {
        (0.0, 0.0)
    };

    Ok(GaussianDominationReport {
        beta,
        epsilon,
        ratios,
        all_dominated: all_ok,
        evenness_deviation: evenness,
        fit_linear,
        fit_curvature,
    })
}

/// Least-squares fit of y ≈ c₀ + c₁λ + c₂λ²; returns (c₁, c₂).
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for i in 0..n {
        let basis = [1.0, xs[i], xs[i] * xs[i]];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
            rhs[r] += basis[r] * ys[i];
        }
    }
    let mut a = [
        [m[0][0], m[0][1], m[0][2], rhs[0]],
        [m[1][0], m[1][1], m[1][2], rhs[1]],
        [m[2][0], m[2][1], m[2][2], rhs[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    (a[1][3] / a[1][1], a[2][3] / a[2][2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gauss_legendre;
    use crate::model::Coupling;
    use approx::assert_abs_diff_eq;

    fn ring4() -> LatticeGraph {
        LatticeGraph::hypercubic(2, 1)
    }

    #[test]
    fn duhamel_of_identity_is_one() {
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.2, 1.0);
        let ts = thermal_state(&g, &c, 1, 1.3, ThermalFrame::OriginalWithMu).unwrap();
        let ident = BlockDiagonal {
            blocks: ts
                .blocks
                .iter()
                .map(|b| vec![Complex64::new(1.0, 0.0); b.eig.values.len()])
                .collect(),
        };
        let v = ts.duhamel(&ident, &ident);
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn duhamel_matches_quadrature_oracle() {
        // independent oracle: 20-point Gauss quadrature of the s-integral on
        // a random 6×6 Hermitian block
        use rand::Rng;
        let mut rng = seeded_rng(42, 0);
        let n = 6;
        let mut hm = Mat::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    Complex64::new(rng.random::<f64>() - 0.5, 0.0)
                } else {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                };
                hm[(i, j)] = v;
                hm[(j, i)] = v.conj();
            }
        }
        let diag_a: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let diag_b: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let beta = 1.7;
        let eig = herm_eig(&hm).unwrap();

        // quadrature oracle: Z⁻¹ ∫₀¹ ds Tr[e^{−sβH} A e^{−(1−s)βH} B]
        let mut a_mat = Mat::<Complex64>::zeros(n, n);
        let mut b_mat = Mat::<Complex64>::zeros(n, n);
        for i in 0..n {
            a_mat[(i, i)] = diag_a[i];
            b_mat[(i, i)] = diag_b[i];
        }
        let z: f64 = eig.values.iter().map(|e| (-beta * e).exp()).sum();
        let (nodes, weights) = gauss_legendre(20, 0.0, 1.0);
        let mut oracle = Complex64::ZERO;
        for (s, w) in nodes.iter().zip(&weights) {
            let left = eig.exp(-s * beta);
            let right = eig.exp(-(1.0 - s) * beta);
            let prod = &left * &a_mat * &right * &b_mat;
            let mut tr = Complex64::ZERO;
            for i in 0..n {
                tr += prod[(i, i)];
            }
            oracle += tr * *w;
        }
        oracle /= Complex64::new(z, 0.0);

        // eigenbasis formula through a one-block ThermalState
        let ts = ThermalState {
            beta,
            frame: ThermalFrame::OriginalWithMu,
            e_min: 0.0,
            z_shifted: z,
            ph_dim: 1,
            blocks: vec![ThermalBlock {
                basis: SpinSectorBasis::new(3, 1, 1), // placeholder, unused
                eig,
            }],
        };
        let got = ts.duhamel(
            &BlockDiagonal {
                blocks: vec![diag_a.clone()],
            },
            &BlockDiagonal {
                blocks: vec![diag_b.clone()],
            },
        );
        assert!((got - oracle).norm() < 1e-8, "got {got}, oracle {oracle}");

        // symmetry (A,B) = (B,A) and positivity of (A*, A)
        let swapped = ts.duhamel(
            &BlockDiagonal {
                blocks: vec![diag_b],
            },
            &BlockDiagonal {
                blocks: vec![diag_a.clone()],
            },
        );
        assert!((got - swapped).norm() < 1e-10);
        let a = BlockDiagonal {
            blocks: vec![diag_a],
        };
        let pos = ts.duhamel(&a.conj(), &a);
        assert!(pos.re >= 0.0 && pos.im.abs() < 1e-12);
    }

    #[test]
    fn duhamel_bounded_by_symmetrized_correlation() {
        // (A*, A) ≤ ½⟨A*A + AA*⟩ for diagonal observables
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
        let ts = thermal_state(&g, &c, 2, 2.0, ThermalFrame::OriginalWithMu).unwrap();
        use rand::Rng;
        let mut rng = seeded_rng(9, 0);
        let a = BlockDiagonal {
            blocks: ts
                .blocks
                .iter()
                .map(|b| {
                    (0..b.eig.values.len())
                        .map(|_| {
                            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                        })
                        .collect()
                })
                .collect(),
        };
        let lhs = ts.duhamel(&a.conj(), &a).re;
        // for diagonal A, ½(A*A + AA*) = |a|² diag
        let abs2 = BlockDiagonal {
            blocks: a
                .blocks
                .iter()
                .map(|blk| {
                    blk.iter()
                        .map(|z| Complex64::new(z.norm_sqr(), 0.0))
                        .collect()
                })
                .collect(),
        };
        let rhs = ts.average(&abs2).re;
        assert!(lhs <= rhs + 1e-12, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn susceptibility_momentum_symmetry_and_infinite_temperature() {
        let g = ring4();
        let c = CouplingSpec::onsite(1.0, 1.0, 0.1, 1.0);
        let ts = thermal_state(&g, &c, 1, 1.0, ThermalFrame::OriginalWithMu).unwrap();
        let p = vec![std::f64::consts::PI / 2.0];
        let minus_p = vec![-std::f64::consts::PI / 2.0];
        let chi_p = charge_susceptibility(&ts, &g, &p).unwrap();
        let chi_mp = charge_susceptibility(&ts, &g, &minus_p).unwrap();
        assert_abs_diff_eq!(chi_p, chi_mp, epsilon = 1e-10);

        // β → 0: χ/β → Tr[δñ_{−p} δñ_p]/Tr[1] (maximally mixed state)
        let beta = 1e-6;
        let ts0 = thermal_state(&g, &c, 1, beta, ThermalFrame::OriginalWithMu).unwrap();
        let chi0 = charge_susceptibility(&ts0, &g, &p).unwrap();
        let a = ts0.observable_density_fluctuation(&g, &minus_p);
        let b = ts0.observable_density_fluctuation(&g, &p);
        let mut tr = Complex64::ZERO;
        let mut count = 0.0;
        for (ba, bb) in a.blocks.iter().zip(&b.blocks) {
            for (x, y) in ba.iter().zip(bb) {
                tr += x * y;
                count += 1.0;
            }
        }
        assert_abs_diff_eq!(chi0 / beta, (tr / count).re, epsilon = 1e-4);

        let off = vec![0.1234];
        assert!(matches!(
            charge_susceptibility(&ts, &g, &off),
            Err(ThermalError::MomentumOffGrid { .. })
        ));
    }

    #[test]
    fn u_eff_hat_matches_nearest_neighbor_closed_form() {
        // U₀ on-site, U₁/2d nearest-neighbor, g = g₀δ on the 4-ring:
        // Û_eff(p) = (U₀ − U₁ − 2g₀²/ω₀) + U₁(1 + cos p)
        let g = ring4();
        let (u0, u1, g0, omega0) = (1.0, 0.4, 0.1, 1.0);
        let c = CouplingSpec {
            hopping: Coupling::Uniform(1.0),
            coulomb: Coupling::NearestNeighbor {
                onsite: u0,
                neighbor: u1 / 2.0,
            },
            eph: Coupling::OnSite(g0),
            omega0,
        };
        for p in reciprocal_momenta(&g).unwrap() {
            let got = u_eff_hat(&g, &c, &p).unwrap();
            let want = (u0 - u1 - 2.0 * g0 * g0 / omega0) + u1 * (1.0 + p[0].cos());
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_hubbard_susceptibility_bound_holds() {
        // g = 0, U = U₀δ: χ·U₀ ≤ 1 at every momentum
        let g = ring4();
        let c = CouplingSpec::onsite(1.0, 1.0, 0.0, 1.0);
        let rep = susceptibility_bound_check(&g, &c, 1, 1.0, 1e-8, 3, 7).unwrap();
        assert!(rep.all_satisfied, "{rep:?}");
        assert!(
            rep.half_filling_deviation < 1e-10,
            "pure Hubbard ⟨n⟩ is exact, got {}",
            rep.half_filling_deviation
        );
        for row in &rep.rows {
            assert!(row.checked);
            assert!(row.product <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn gaussian_domination_two_site() {
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
        let rep = gaussian_domination_check(&g, &c, 2, 1.0, 0.1, 8, 1e-10, 11).unwrap();
        assert!(rep.all_dominated, "{:?}", rep.ratios);
        assert!(rep.evenness_deviation < 1e-10, "{}", rep.evenness_deviation);
        assert!(rep.fit_linear.abs() < 1e-8, "{}", rep.fit_linear);
        assert!(rep.fit_curvature <= 1e-10, "{}", rep.fit_curvature);
    }

    #[test]
    fn half_filling_identity_converges_with_the_cutoff() {
        // the identity ⟨n_x⟩ = 1 is exact in the untruncated phonon space;
        // per-site cutoffs bias it through the thermal tail, and the bias
        // must die out along the n_max ladder (2-site keeps this cheap at
        // strong coupling)
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
        let mut devs = Vec::new();
        for n_max in [4usize, 8, 12, 16] {
            let ts = thermal_state(&g, &c, n_max, 1.0, ThermalFrame::OriginalWithMu).unwrap();
            let mut dev = 0.0f64;
            for x in 0..2 {
                let nx = ts.average(&ts.observable_number(x));
                dev = dev.max((nx.re - 1.0).abs());
            }
            devs.push(dev);
        }
        assert!(devs.windows(2).all(|w| w[1] < w[0]), "not shrinking: {devs:?}");
        assert!(*devs.last().unwrap() < 1e-6, "{devs:?}");
    }

    #[test]
    fn b2_violation_detected() {
        // strong attraction makes Û_eff negative somewhere
        let g = ring4();
        let c = CouplingSpec::onsite(1.0, 0.1, 0.8, 1.0);
        assert!(matches!(
            susceptibility_bound_check(&g, &c, 1, 1.0, 1e-8, 0, 0),
            Err(ThermalError::B2Violated { .. })
        ));
    }

    #[test]
    fn quadratic_fit_recovers_coefficients() {
        let xs = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * x - 2.0 * x * x).collect();
        let (c1, c2) = fit_quadratic(&xs, &ys);
        assert_abs_diff_eq!(c1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c2, -2.0, epsilon = 1e-12);
    }
}
