//! The Holstein-Hubbard Hamiltonian in its four working forms, plus the
//! effective Coulomb matrix and its definiteness analysis.
//!
//! With U_eff(x−y) = U(x−y) − (2/ω₀)Σ_z g(x−z)g(y−z), the four forms are
//!
//! - H: hopping + ½ΣU(n_x−1)(n_y−1) + Σ g n_x(b†+b) + ω₀Σb†b, assembled on
//!   occupation bases ([`assemble_h`]);
//! - Ĥ_M: the Lang-Firsov dressing, where the phonon displacement is absorbed
//!   and hopping acquires phases e^{−iΦ_{x,y}} with
//!   Φ_{x,y} = √2 ω₀^{−1/2} Σ_z {g(x−z) − g(y−z)} q_z ([`lang_firsov`]);
//! - ℍ_M: the hole-particle transform of Ĥ_M, with up-spin phases conjugated
//!   and the Coulomb term turned into ½ΣU_eff σ_x σ_y ([`hole_particle`]);
//! - ℍ(h): the field-deformed full-space Hamiltonian with
//!   Ũ(h) = ½ΣU_eff(σ_x+h_x)(σ_y+h_y) ([`h_field`]).
//!
//! Spectra relate by spec(H_M) = spec(Ĥ_M) + shift with the shift returned by
//! [`lang_firsov`], and spec(ℍ_M) = spec(Ĥ_M) exactly at any phonon
//! truncation (the hole-particle transform acts on fermions alone).

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{BosonBasisOcc, QGrid, SpinSectorBasis};
use crate::lattice::LatticeGraph;
use crate::linalg::sym_eig;
use crate::sparse::{BasisTag, CooMatrix, SparseHermitian};

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("phonon frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("coupling table needs vertex positions on this graph")]
    MissingGeometry,
    #[error("coupling table is not even: value at {key:?} conflicts with its negation")]
    AsymmetricTable { key: Vec<i64> },
    #[error(
        "uniform-coupling-sum condition violated: Σ_x g(x−y) varies by {spread:.3e} over y"
    )]
    A1Violated { spread: f64 },
    #[error("site count {0} must be even for half-filling sectors")]
    OddSiteCount(usize),
    #[error("sector M = {m} out of range |M| ≤ {max}")]
    SectorOutOfRange { m: i64, max: i64 },
    #[error(transparent)]
    Sparse(#[from] crate::sparse::SparseError),
}

/// A symmetric function of vertex differences.
#[derive(Clone, Debug)]
pub enum Coupling {
    /// v·δ(x−y).
    OnSite(f64),
    /// `onsite` at x = y, `neighbor` on graph edges, 0 elsewhere.
    NearestNeighbor { onsite: f64, neighbor: f64 },
    /// Uniform value on every edge (hopping use), 0 elsewhere.
    Uniform(f64),
    /// Explicit table of difference vectors; missing keys are 0. Lookup
    /// tries both signs, and conflicting ±x entries are rejected by
    /// [`CouplingSpec::validate`].
    Table(std::collections::BTreeMap<Vec<i64>, f64>),
}

impl Coupling {
    pub fn zero() -> Coupling {
        Coupling::OnSite(0.0)
    }

    fn eval(&self, graph: &LatticeGraph, x: usize, y: usize) -> Result<f64, ModelError> {
        Ok(match self {
            Coupling::OnSite(v) => {
                if x == y {
                    *v
                } else {
                    0.0
                }
            }
            Coupling::NearestNeighbor { onsite, neighbor } => {
                if x == y {
                    *onsite
                } else if graph.has_edge(x, y) {
                    *neighbor
                } else {
                    0.0
                }
            }
            Coupling::Uniform(v) => {
                if x != y && graph.has_edge(x, y) {
                    *v
                } else {
                    0.0
                }
            }
            Coupling::Table(map) => {
                let diff = graph.difference(x, y).ok_or(ModelError::MissingGeometry)?;
                let neg: Vec<i64> = diff.iter().map(|c| -c).collect();
                map.get(&diff).or_else(|| map.get(&neg)).copied().unwrap_or(0.0)
            }
        })
    }
}

/// Model couplings: hopping t, Coulomb U, electron-phonon g, frequency ω₀.
#[derive(Clone, Debug)]
pub struct CouplingSpec {
    pub hopping: Coupling,
    pub coulomb: Coupling,
    pub eph: Coupling,
    pub omega0: f64,
}

impl CouplingSpec {
    /// The standard laboratory point: uniform hopping t, on-site U₀ and g₀.
    pub fn onsite(t: f64, u0: f64, g0: f64, omega0: f64) -> CouplingSpec {
        CouplingSpec {
            hopping: Coupling::Uniform(t),
            coulomb: Coupling::OnSite(u0),
            eph: Coupling::OnSite(g0),
            omega0,
        }
    }

    pub fn validate(&self, graph: &LatticeGraph) -> Result<(), ModelError> {
        if self.omega0 <= 0.0 {
            return Err(ModelError::NonPositiveFrequency(self.omega0));
        }
        for c in [&self.hopping, &self.coulomb, &self.eph] {
            if let Coupling::Table(map) = c {
                if graph.positions().is_none() {
                    return Err(ModelError::MissingGeometry);
                }
                for (key, &v) in map {
                    let neg: Vec<i64> = key.iter().map(|c| -c).collect();
                    if let Some(&w) = map.get(&neg) {
                        if (v - w).abs() > 1e-15 * v.abs().max(1.0) {
                            return Err(ModelError::AsymmetricTable { key: key.clone() });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn t(&self, graph: &LatticeGraph, x: usize, y: usize) -> Result<f64, ModelError> {
        self.hopping.eval(graph, x, y)
    }

    pub fn u(&self, graph: &LatticeGraph, x: usize, y: usize) -> Result<f64, ModelError> {
        self.coulomb.eval(graph, x, y)
    }

    pub fn g(&self, graph: &LatticeGraph, x: usize, y: usize) -> Result<f64, ModelError> {
        self.eph.eval(graph, x, y)
    }
}

/// Pairwise coupling values materialized as |Λ|×|Λ| tables.
#[derive(Clone, Debug)]
pub struct CouplingGrid {
    pub t: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub omega0: f64,
}

impl CouplingGrid {
    pub fn build(graph: &LatticeGraph, c: &CouplingSpec) -> Result<CouplingGrid, ModelError> {
        c.validate(graph)?;
        let n = graph.vertex_count();
        let mut t = vec![vec![0.0; n]; n];
        let mut u = vec![vec![0.0; n]; n];
        let mut g = vec![vec![0.0; n]; n];
        for x in 0..n {
            for y in 0..n {
                t[x][y] = c.t(graph, x, y)?;
                u[x][y] = c.u(graph, x, y)?;
                g[x][y] = c.g(graph, x, y)?;
            }
        }
        Ok(CouplingGrid {
            t,
            u,
            g,
            omega0: c.omega0,
        })
    }

    /// Phonon-mediated attraction V(x−y) = (2/ω₀) Σ_z g(x−z) g(y−z).
    pub fn v(&self, x: usize, y: usize) -> f64 {
        let n = self.g.len();
        (2.0 / self.omega0) * (0..n).map(|z| self.g[x][z] * self.g[y][z]).sum::<f64>()
    }

    /// U_eff(x−y) = U(x−y) − V(x−y).
    pub fn u_eff(&self, x: usize, y: usize) -> f64 {
        self.u[x][y] - self.v(x, y)
    }

    /// Phase coefficients a_z = √2 ω₀^{−1/2} {g(x−z) − g(y−z)} of Φ_{x,y}.
    pub fn phase_coefficients(&self, x: usize, y: usize) -> Vec<f64> {
        let n = self.g.len();
        let scale = 2f64.sqrt() / self.omega0.sqrt();
        (0..n)
            .map(|z| scale * (self.g[x][z] - self.g[y][z]))
            .collect()
    }
}

/// Relative tolerance for the psd/pd flags, scaled by ‖U_eff‖.
pub const DEFINITENESS_TOL: f64 = 1e-12;

/// The effective Coulomb matrix M_{xy} = U_eff(x−y) with its spectrum and
/// definiteness flags.
#[derive(Clone, Debug)]
pub struct EffectiveCoulomb {
    pub matrix: faer::Mat<f64>,
    pub eigenvalues: Vec<f64>,
    pub psd: bool,
    pub pd: bool,
    /// Smallest eigenvalue when positive definite.
    pub u0: Option<f64>,
}

impl EffectiveCoulomb {
    pub fn from_matrix(m: faer::Mat<f64>) -> EffectiveCoulomb {
        let (eigenvalues, _) = sym_eig(&m).expect("symmetric eigendecomposition");
        let scale = eigenvalues.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);
        let psd = lambda_min >= -DEFINITENESS_TOL * scale;
        let pd = lambda_min > DEFINITENESS_TOL * scale;
        EffectiveCoulomb {
            matrix: m,
            eigenvalues,
            psd,
            pd,
            u0: if pd { Some(lambda_min) } else { None },
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }
}

/// U_eff as a matrix over Λ, with psd/pd flags and U₀.
pub fn effective_coulomb(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
) -> Result<EffectiveCoulomb, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let n = graph.vertex_count();
    let mut m = faer::Mat::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            m[(x, y)] = grid.u_eff(x, y);
        }
    }
    Ok(EffectiveCoulomb::from_matrix(m))
}

/// Result of checking that Σ_x g(x−y) is independent of y.
#[derive(Clone, Debug)]
pub struct UniformSumReport {
    pub holds: bool,
    pub spread: f64,
    /// The common row sum g* when the condition holds.
    pub g_star: Option<f64>,
    pub row_sums: Vec<f64>,
}

/// Check that the electron-phonon coupling has uniform column sums, and
/// report g* = Σ_x g(x).
pub fn check_a1(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
) -> Result<UniformSumReport, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let n = graph.vertex_count();
    let row_sums: Vec<f64> = (0..n)
        .map(|y| (0..n).map(|x| grid.g[x][y]).sum())
        .collect();
    let max = row_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = max - min;
    let scale = row_sums.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
    let holds = spread < 1e-12 * scale;
    Ok(UniformSumReport {
        holds,
        spread,
        g_star: if holds { Some(row_sums[0]) } else { None },
        row_sums,
    })
}

/// Local chemical potential μ_x = (2/ω₀) Σ_{y,z} g(x−z) g(z−y).
pub fn chemical_potential(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
) -> Result<Vec<f64>, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let n = graph.vertex_count();
    Ok((0..n)
        .map(|x| {
            (2.0 / grid.omega0)
                * (0..n)
                    .flat_map(|y| (0..n).map(move |z| (y, z)))
                    .map(|(y, z)| grid.g[x][z] * grid.g[z][y])
                    .sum::<f64>()
        })
        .collect())
}

/// A half-filling spin sector: S_z eigenvalue M (stored as 2M so
/// half-integer sectors of odd site counts are exact), N↑ = (|Λ|+2M)/2,
/// N↓ = (|Λ|−2M)/2, hole-particle particle number M̂ = N↓.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SectorSpec {
    pub sites: usize,
    m2: i64,
}

impl SectorSpec {
    /// Integer-M sector of an even-site graph.
    pub fn new(graph: &LatticeGraph, m: i64) -> Result<SectorSpec, ModelError> {
        let sites = graph.vertex_count();
        if sites % 2 != 0 {
            return Err(ModelError::OddSiteCount(sites));
        }
        let max = (sites / 2) as i64;
        if m.abs() > max {
            return Err(ModelError::SectorOutOfRange { m, max });
        }
        Ok(SectorSpec { sites, m2: 2 * m })
    }

    /// Sector from doubled spin 2M (parity must match the site count).
    pub fn from_doubled(sites: usize, m2: i64) -> Result<SectorSpec, ModelError> {
        if (sites as i64 + m2) % 2 != 0 || m2.abs() > sites as i64 {
            return Err(ModelError::SectorOutOfRange {
                m: m2,
                max: sites as i64,
            });
        }
        Ok(SectorSpec { sites, m2 })
    }

    pub fn m2(&self) -> i64 {
        self.m2
    }

    pub fn spin_z(&self) -> f64 {
        self.m2 as f64 / 2.0
    }

    pub fn n_up(&self) -> usize {
        ((self.sites as i64 + self.m2) / 2) as usize
    }

    pub fn n_down(&self) -> usize {
        ((self.sites as i64 - self.m2) / 2) as usize
    }

    pub fn m_hat(&self) -> usize {
        self.n_down()
    }

    /// The (N↑, N↓) basis of this sector in the original frame.
    pub fn electron_basis(&self) -> SpinSectorBasis {
        SpinSectorBasis::new(self.sites, self.n_up(), self.n_down())
    }

    /// The (M̂, M̂) basis of the hole-particle frame.
    pub fn hole_particle_basis(&self) -> SpinSectorBasis {
        SpinSectorBasis::new(self.sites, self.m_hat(), self.m_hat())
    }
}

/// Electron Hilbert space selector for model assemblies.
#[derive(Clone, Debug)]
pub enum ElectronBasis {
    /// One (N↑, N↓) block.
    Sector(SpinSectorBasis),
    /// All 4^{|Λ|} occupation states; index = mask_up · 2^{|Λ|} + mask_down.
    Full { sites: usize },
}

impl ElectronBasis {
    pub fn dim(&self) -> usize {
        match self {
            ElectronBasis::Sector(s) => s.dim(),
            ElectronBasis::Full { sites } => 1usize << (2 * sites),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ElectronBasis::Sector(s) => s.tag("").label,
            ElectronBasis::Full { sites } => format!("electrons[{sites} sites, full]"),
        }
    }

    fn sites(&self) -> usize {
        match self {
            ElectronBasis::Sector(s) => s.site_count(),
            ElectronBasis::Full { sites } => *sites,
        }
    }

    /// c†_{x↑} c_{y↑}.
    pub fn hop_up(&self, x: usize, y: usize) -> CooMatrix {
        match self {
            ElectronBasis::Sector(s) => s.hop_up(x, y),
            ElectronBasis::Full { sites } => {
                mask_hop(*sites, x, y).kron(&CooMatrix::identity(1 << sites))
            }
        }
    }

    /// c†_{x↓} c_{y↓}; the up-parity strings cancel in the quadratic.
    pub fn hop_down(&self, x: usize, y: usize) -> CooMatrix {
        match self {
            ElectronBasis::Sector(s) => s.hop_down(x, y),
            ElectronBasis::Full { sites } => {
                CooMatrix::identity(1 << sites).kron(&mask_hop(*sites, x, y))
            }
        }
    }

    /// Diagonal of n_x.
    pub fn number_diagonal(&self, x: usize) -> Vec<f64> {
        match self {
            ElectronBasis::Sector(s) => s.number_diagonal(x),
            ElectronBasis::Full { sites } => {
                let n = 1usize << sites;
                let mut out = Vec::with_capacity(n * n);
                for mu in 0..n as u64 {
                    for md in 0..n as u64 {
                        out.push(((mu >> x & 1) + (md >> x & 1)) as f64);
                    }
                }
                out
            }
        }
    }

    /// Diagonal of σ_x = n_{x↑} − n_{x↓}.
    pub fn sigma_diagonal(&self, x: usize) -> Vec<f64> {
        match self {
            ElectronBasis::Sector(s) => s.sigma_diagonal(x),
            ElectronBasis::Full { sites } => {
                let n = 1usize << sites;
                let mut out = Vec::with_capacity(n * n);
                for mu in 0..n as u64 {
                    for md in 0..n as u64 {
                        out.push((mu >> x & 1) as f64 - (md >> x & 1) as f64);
                    }
                }
                out
            }
        }
    }
}

/// c†_x c_y over the whole 2^{sites} mask space of one fermion species.
fn mask_hop(sites: usize, x: usize, y: usize) -> CooMatrix {
    let dim = 1usize << sites;
    let mut m = CooMatrix::new(dim, dim);
    for mask in 0..dim as u64 {
        if mask >> y & 1 == 0 {
            continue;
        }
        let removed = mask & !(1u64 << y);
        if removed >> x & 1 == 1 {
            continue;
        }
        let sign_y = if (mask & ((1u64 << y) - 1)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let sign_x = if (removed & ((1u64 << x) - 1)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        m.push((removed | 1 << x) as usize, mask as usize, one() * sign_y * sign_x);
    }
    m
}

/// Phonon representation selector.
#[derive(Clone, Copy, Debug)]
pub enum PhononBasis<'a> {
    Occupation(&'a BosonBasisOcc),
    Grid(&'a QGrid),
}

impl PhononBasis<'_> {
    pub fn dim(&self) -> usize {
        match self {
            PhononBasis::Occupation(b) => b.dim(),
            PhononBasis::Grid(g) => g.dim(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PhononBasis::Occupation(b) => b.tag().label,
            PhononBasis::Grid(g) => g.tag().label,
        }
    }

    /// Normal-ordered phonon energy: ω₀Σb†b, or its grid form
    /// ½Σ(−∇² + ω₀²q²) − ω₀|Λ|/2.
    fn energy(&self, omega0: f64) -> CooMatrix {
        match self {
            PhononBasis::Occupation(b) => {
                let mut m = CooMatrix::new(b.dim(), b.dim());
                for (i, v) in b.energy_diagonal(omega0).into_iter().enumerate() {
                    m.push(i, i, one() * v);
                }
                m
            }
            PhononBasis::Grid(g) => g.phonon_energy(omega0),
        }
    }

    /// exp(i Σ a_z q_z): diagonal on the grid, an exact exponential of the
    /// truncated q on the occupation basis.
    fn phase(&self, coeffs: &[f64], omega0: f64) -> CooMatrix {
        match self {
            PhononBasis::Occupation(b) => b.phase_exponential(coeffs, omega0),
            PhononBasis::Grid(g) => {
                let d = g.phase_diagonal(coeffs);
                let mut m = CooMatrix::new(g.dim(), g.dim());
                for (i, v) in d.into_iter().enumerate() {
                    m.push(i, i, v);
                }
                m
            }
        }
    }
}

fn composite_tag(name: &str, electrons: &ElectronBasis, ph_label: &str, dim: usize) -> BasisTag {
    BasisTag::new(format!("{name}: {} ⊗ {}", electrons.label(), ph_label), dim)
}

/// Diagonal electron vector ⊗ identity-phonon, in COO form.
fn electron_diagonal_term(diag: &[f64], ph_dim: usize) -> CooMatrix {
    let dim = diag.len() * ph_dim;
    let mut m = CooMatrix::new(dim, dim);
    for (e, &v) in diag.iter().enumerate() {
        if v != 0.0 {
            for p in 0..ph_dim {
                let i = e * ph_dim + p;
                m.push(i, i, one() * v);
            }
        }
    }
    m
}

/// The original Hamiltonian on electrons ⊗ phonons (occupation basis), with
/// the local chemical potential optionally added for half-filled traces.
pub fn assemble_h(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    electrons: &ElectronBasis,
    phonons: &BosonBasisOcc,
    include_chemical_potential: bool,
) -> Result<SparseHermitian, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    assert_eq!(electrons.sites(), sites);
    assert_eq!(phonons.site_count(), sites);
    let ph_dim = phonons.dim();
    let dim = electrons.dim() * ph_dim;
    let mut h = CooMatrix::new(dim, dim);
    let id_ph = CooMatrix::identity(ph_dim);

    // hopping −Σ t(x−y) c†_{xσ}c_{yσ}, both orientations and spins
    for &(x, y) in graph.edges() {
        let t = grid.t[x][y];
        if t == 0.0 {
            continue;
        }
        let hop = electrons
            .hop_up(x, y)
            .add(&electrons.hop_up(y, x))
            .add(&electrons.hop_down(x, y))
            .add(&electrons.hop_down(y, x))
            .scale(one() * -t);
        h = h.add(&hop.kron(&id_ph));
    }

    // Coulomb ½ Σ U(x−y)(n_x−1)(n_y−1), plus optional Σ μ_x n_x
    let occ: Vec<Vec<f64>> = (0..sites).map(|x| electrons.number_diagonal(x)).collect();
    let mu = if include_chemical_potential {
        chemical_potential(graph, couplings)?
    } else {
        vec![0.0; sites]
    };
    let mut coulomb = vec![0.0; electrons.dim()];
    for (e, acc) in coulomb.iter_mut().enumerate() {
        for x in 0..sites {
            for y in 0..sites {
                *acc += 0.5 * grid.u[x][y] * (occ[x][e] - 1.0) * (occ[y][e] - 1.0);
            }
            *acc += mu[x] * occ[x][e];
        }
    }
    h = h.add(&electron_diagonal_term(&coulomb, ph_dim));

    // electron-phonon Σ g(x−y) n_x (b†_y + b_y)
    for x in 0..sites {
        for y in 0..sites {
            let gxy = grid.g[x][y];
            if gxy == 0.0 {
                continue;
            }
            let mut nx = CooMatrix::new(electrons.dim(), electrons.dim());
            for (e, &v) in occ[x].iter().enumerate() {
                if v != 0.0 {
                    nx.push(e, e, one() * v);
                }
            }
            let b = phonons.annihilator(y);
            let disp = b.adjoint().add(&b).scale(one() * gxy);
            h = h.add(&nx.kron(&disp));
        }
    }

    // phonon energy ω₀ Σ b†b
    let mut ph_energy = CooMatrix::new(dim, dim);
    for (p, v) in phonons
        .energy_diagonal(couplings.omega0)
        .into_iter()
        .enumerate()
    {
        if v != 0.0 {
            for e in 0..electrons.dim() {
                let i = e * ph_dim + p;
                ph_energy.push(i, i, one() * v);
            }
        }
    }
    h = h.add(&ph_energy);

    let name = if include_chemical_potential { "H+μN" } else { "H" };
    Ok(SparseHermitian::new(
        h,
        composite_tag(name, electrons, &phonons.tag().label, dim),
    )?)
}

/// Hopping dressed with phases:
/// Σ_{(x,y)} t(x−y) c†_{xσ}c_{yσ} e^{i·sign·Φ_{x,y}} over both edge
/// orientations; `sign` = +1 gives T_{+g,σ}, −1 gives T_{−g,σ}.
fn phase_hopping(
    graph: &LatticeGraph,
    grid: &CouplingGrid,
    electrons: &ElectronBasis,
    phonons: &PhononBasis,
    spin_up: bool,
    sign: f64,
) -> CooMatrix {
    let dim = electrons.dim() * phonons.dim();
    let mut term = CooMatrix::new(dim, dim);
    for &(x, y) in graph.edges() {
        let t = grid.t[x][y];
        if t == 0.0 {
            continue;
        }
        for (a, b) in [(x, y), (y, x)] {
            let coeffs: Vec<f64> = grid
                .phase_coefficients(a, b)
                .into_iter()
                .map(|c| sign * c)
                .collect();
            let phase = phonons.phase(&coeffs, grid.omega0);
            let hop = if spin_up {
                electrons.hop_up(a, b)
            } else {
                electrons.hop_down(a, b)
            };
            term = term.add(&hop.kron(&phase).scale(one() * t));
        }
    }
    term
}

/// ½ Σ U_eff(x−y)(n_x−1)(n_y−1) as an electron diagonal.
fn effective_coulomb_diagonal(
    grid: &CouplingGrid,
    electrons: &ElectronBasis,
    sites: usize,
) -> Vec<f64> {
    let occ: Vec<Vec<f64>> = (0..sites).map(|x| electrons.number_diagonal(x)).collect();
    let mut diag = vec![0.0; electrons.dim()];
    for (e, acc) in diag.iter_mut().enumerate() {
        for x in 0..sites {
            for y in 0..sites {
                *acc += 0.5 * grid.u_eff(x, y) * (occ[x][e] - 1.0) * (occ[y][e] - 1.0);
            }
        }
    }
    diag
}

/// ½ Σ U_eff(x−y)(σ_x+h_x)(σ_y+h_y) as an electron diagonal.
fn sigma_coulomb_diagonal(
    grid: &CouplingGrid,
    electrons: &ElectronBasis,
    sites: usize,
    h: &[f64],
) -> Vec<f64> {
    let sig: Vec<Vec<f64>> = (0..sites).map(|x| electrons.sigma_diagonal(x)).collect();
    let mut diag = vec![0.0; electrons.dim()];
    for (e, acc) in diag.iter_mut().enumerate() {
        for x in 0..sites {
            for y in 0..sites {
                *acc += 0.5 * grid.u_eff(x, y) * (sig[x][e] + h[x]) * (sig[y][e] + h[y]);
            }
        }
    }
    diag
}

/// The Lang-Firsov dressed sector Hamiltonian Ĥ_M together with the scalar
/// `shift` such that spec(H_M) = spec(Ĥ_M) + shift.
///
/// Requires the uniform-coupling-sum condition (Σ_x g(x−y) independent of
/// y); under it, shift = ½Σ_{x,y}V(x−y) − (2/ω₀)g*²|Λ| = −g*²|Λ|/ω₀.
pub fn lang_firsov(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    sector: SectorSpec,
    phonons: PhononBasis,
) -> Result<(SparseHermitian, f64), ModelError> {
    let a1 = check_a1(graph, couplings)?;
    if !a1.holds {
        return Err(ModelError::A1Violated { spread: a1.spread });
    }
    let g_star = a1.g_star.expect("holds implies g_star");
    let grid = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    let electrons = ElectronBasis::Sector(sector.electron_basis());
    let ph_dim = phonons.dim();
    let dim = electrons.dim() * ph_dim;

    let mut h = CooMatrix::new(dim, dim);
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, true, -1.0).scale(-one()));
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, false, -1.0).scale(-one()));
    h = h.add(&electron_diagonal_term(
        &effective_coulomb_diagonal(&grid, &electrons, sites),
        ph_dim,
    ));
    h = h.add(&CooMatrix::identity(electrons.dim()).kron(&phonons.energy(grid.omega0)));

    let v_total: f64 = (0..sites)
        .flat_map(|x| (0..sites).map(move |y| (x, y)))
        .map(|(x, y)| grid.v(x, y))
        .sum();
    let shift = 0.5 * v_total - (2.0 / grid.omega0) * g_star * g_star * sites as f64;

    let tag = composite_tag("LF-dressed H_M", &electrons, &phonons.label(), dim);
    Ok((SparseHermitian::new(h, tag)?, shift))
}

/// The hole-particle transformed sector Hamiltonian
/// ℍ_M = −T_{+g,↑} − T_{−g,↓} + Ũ + H_p on the (M̂, M̂) block; unitarily
/// equivalent to Ĥ_M at any phonon truncation.
pub fn hole_particle(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    sector: SectorSpec,
    phonons: PhononBasis,
) -> Result<SparseHermitian, ModelError> {
    hole_particle_block(graph, couplings, &sector.hole_particle_basis(), phonons)
}

/// ℍ restricted to an arbitrary (n₁, n₂) block of the hole-particle frame
/// (the full-space trace is the sum over all such blocks).
pub fn hole_particle_block(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    block: &SpinSectorBasis,
    phonons: PhononBasis,
) -> Result<SparseHermitian, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    let electrons = ElectronBasis::Sector(block.clone());
    let ph_dim = phonons.dim();
    let dim = electrons.dim() * ph_dim;

    let mut h = CooMatrix::new(dim, dim);
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, true, 1.0).scale(-one()));
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, false, -1.0).scale(-one()));
    h = h.add(&electron_diagonal_term(
        &sigma_coulomb_diagonal(&grid, &electrons, sites, &vec![0.0; sites]),
        ph_dim,
    ));
    h = h.add(&CooMatrix::identity(electrons.dim()).kron(&phonons.energy(grid.omega0)));

    let tag = composite_tag("hole-particle H", &electrons, &phonons.label(), dim);
    Ok(SparseHermitian::new(h, tag)?)
}

/// The field-deformed Hamiltonian ℍ(h) on the full electron space;
/// ℍ(0) = ℍ.
pub fn h_field(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    field: &[f64],
    phonons: PhononBasis,
) -> Result<SparseHermitian, ModelError> {
    let grid = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    assert_eq!(field.len(), sites);
    let electrons = ElectronBasis::Full { sites };
    let ph_dim = phonons.dim();
    let dim = electrons.dim() * ph_dim;

    let mut h = CooMatrix::new(dim, dim);
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, true, 1.0).scale(-one()));
    h = h.add(&phase_hopping(graph, &grid, &electrons, &phonons, false, -1.0).scale(-one()));
    h = h.add(&electron_diagonal_term(
        &sigma_coulomb_diagonal(&grid, &electrons, sites, field),
        ph_dim,
    ));
    h = h.add(&CooMatrix::identity(electrons.dim()).kron(&phonons.energy(grid.omega0)));

    let tag = composite_tag("field-deformed H", &electrons, &phonons.label(), dim);
    Ok(SparseHermitian::new(h, tag)?)
}

/// The normal-ordered phonon energy alone on a composite electron ⊗ phonon
/// space (used by the ε-regularized traces).
pub fn phonon_energy_operator(
    electrons: &ElectronBasis,
    phonons: PhononBasis,
    omega0: f64,
) -> Result<SparseHermitian, ModelError> {
    let dim = electrons.dim() * phonons.dim();
    let m = CooMatrix::identity(electrons.dim()).kron(&phonons.energy(omega0));
    Ok(SparseHermitian::new(
        m,
        composite_tag("H_p", electrons, &phonons.label(), dim),
    )?)
}
