//! Brownian-bridge sampling, strong product integration, and the Monte Carlo
//! estimator of the hopping-semigroup kernel.
//!
//! The kernel of e^{−βK_M} between phonon configurations φ, φ' is estimated
//! as
//!
//!   P_β(φ,φ') · E[ ℒ(G_β(ω)) ℛ(G_β(ω)†) e^{−∫₀^β V(ω(s)) ds} ]
//!
//! over bridges ω(s) = (1−s/β)φ + (s/β)φ' + √β α(s/β), where α is the
//! standard Brownian bridge with covariance δ_{xy}·s(1−t), G_β(ω) is the
//! ordered product integral ∏ exp{𝕋_{+g}(ω(s)) ds} of the fiber hopping
//! matrix, V(φ) = ½ω₀²Σq² − ω₀|Λ|/2, and the Gaussian weight carries the
//! |Λ|-dimensional normalization P_β = (2πβ)^{−|Λ|/2} e^{−|φ−φ'|²/(2β)}.
//!
//! Sampling is counter-based: batch b draws from stream b of the seed, and
//! batch means are merged in fixed order, so every figure is reproducible
//! bit for bit.

use faer::Mat;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::fock::FermionBasis;
use crate::lattice::LatticeGraph;
use crate::linalg::{expm_dense, expm_hermitian_small, spectral_norm};
use crate::model::{check_a1, CouplingGrid, CouplingSpec, ModelError, SectorSpec};
use crate::rng::seeded_rng;

#[derive(Debug, Error)]
pub enum PathError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "product integral did not settle: last two refinements differ by {diff:.3e} \
         (target {target:.3e})"
    )]
    NoRefinementConvergence { diff: f64, target: f64 },
}

/// A sampled path on a uniform time grid: `values[j]` is the configuration
/// at `times[j]`.
#[derive(Clone, Debug)]
pub struct BridgePath {
    pub times: Vec<f64>,
    /// K+1 samples of the |Λ|-dimensional path.
    pub values: Vec<Vec<f64>>,
}

/// A standard Brownian bridge on [0, 1] with α(0) = α(1) = 0, one
/// independent component per site, realized by conditioning a Gaussian
/// random walk: α_j = W_j − (j/K)·W_K. The covariance at the grid nodes is
/// exactly δ_{xy}·s(1−t).
pub fn sample_bridge(sites: usize, k: usize, rng: &mut ChaCha8Rng) -> BridgePath {
    assert!(k >= 2);
    let step = (1.0 / k as f64).sqrt();
    let mut walk = vec![vec![0.0; sites]];
    for _ in 0..k {
        let prev = walk.last().unwrap().clone();
        let next: Vec<f64> = prev
            .iter()
            .map(|w| w + step * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        walk.push(next);
    }
    let last = walk.last().unwrap().clone();
    let values: Vec<Vec<f64>> = walk
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let frac = j as f64 / k as f64;
            w.iter().zip(&last).map(|(wj, wk)| wj - frac * wk).collect()
        })
        .collect();
    let times = (0..=k).map(|j| j as f64 / k as f64).collect();
    BridgePath { times, values }
}

/// The conditioned path ω(s) = (1−s/β)φ + (s/β)φ' + √β·α(s/β) on [0, β].
pub fn bridge_to_path(alpha: &BridgePath, phi: &[f64], phi_prime: &[f64], beta: f64) -> BridgePath {
    let sqrt_beta = beta.sqrt();
    let values = alpha
        .values
        .iter()
        .zip(&alpha.times)
        .map(|(a, &t)| {
            phi.iter()
                .zip(phi_prime)
                .zip(a)
                .map(|((&p, &q), &al)| (1.0 - t) * p + t * q + sqrt_beta * al)
                .collect()
        })
        .collect();
    let times = alpha.times.iter().map(|t| t * beta).collect();
    BridgePath { times, values }
}

/// The |Λ|-dimensional Gaussian endpoint weight
/// P_β(φ, φ') = (2πβ)^{−|Λ|/2} exp(−|φ−φ'|²/(2β)).
pub fn endpoint_weight(phi: &[f64], phi_prime: &[f64], beta: f64) -> f64 {
    let d2: f64 = phi
        .iter()
        .zip(phi_prime)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (2.0 * std::f64::consts::PI * beta).powf(-(phi.len() as f64) / 2.0) * (-d2 / (2.0 * beta)).exp()
}

/// Ordered product of step exponentials over a partition: factors
/// exp{A(s_j)(s_j − s_{j−1})} with the sampler evaluated at right endpoints,
/// earliest time leftmost.
#[derive(Clone, Debug)]
pub struct ProductIntegral {
    pub value: Mat<Complex64>,
    /// Largest partition interval.
    pub mesh: f64,
    /// Riemann estimate of ∫‖A(s)‖_F ds on the same partition (an upper
    /// bound on the spectral-norm integral).
    pub norm_integral: f64,
}

/// Product integral over explicit right-endpoint samples: `samples[j]` is
/// A(times[j+1]), so `times` has one more entry than `samples`.
pub fn product_integral(samples: &[Mat<Complex64>], times: &[f64]) -> ProductIntegral {
    assert_eq!(samples.len() + 1, times.len());
    let n = samples
        .first()
        .map(|m| m.nrows())
        .unwrap_or(0);
    let mut value = Mat::<Complex64>::identity(n, n);
    let mut mesh = 0.0f64;
    let mut norm_integral = 0.0f64;
    for (j, a) in samples.iter().enumerate() {
        let dt = times[j + 1] - times[j];
        mesh = mesh.max(dt);
        norm_integral += crate::linalg::frob_norm(a) * dt;
        let mut scaled = Mat::<Complex64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                scaled[(r, c)] = a[(r, c)] * dt;
            }
        }
        value = &value * expm_dense(&scaled);
    }
    ProductIntegral {
        value,
        mesh,
        norm_integral,
    }
}

/// Product integral of a continuous matrix path on [0, a] by uniform
/// refinement. The step product converges at first order in the mesh, so
/// successive doublings are Richardson-combined (2P_{2K} − P_K) and the
/// extrapolated sequence is iterated until it settles within `tol`
/// (relative).
pub fn product_integral_refined(
    a_of: impl Fn(f64) -> Mat<Complex64>,
    a: f64,
    tol: f64,
    max_levels: usize,
) -> Result<ProductIntegral, PathError> {
    let mut k = 16usize;
    let mut prev_raw: Option<ProductIntegral> = None;
    let mut prev_extrap: Option<Mat<Complex64>> = None;
    let mut last_diff = f64::NAN;
    let mut last_target = tol;
    for _ in 0..max_levels {
        let times: Vec<f64> = (0..=k).map(|j| a * j as f64 / k as f64).collect();
        let samples: Vec<Mat<Complex64>> = (1..=k).map(|j| a_of(times[j])).collect();
        let cur = product_integral(&samples, &times);
        if let Some(p) = &prev_raw {
            let n = cur.value.nrows();
            let mut extrap = Mat::<Complex64>::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    extrap[(r, c)] = cur.value[(r, c)] * 2.0 - p.value[(r, c)];
                }
            }
            if let Some(pe) = &prev_extrap {
                let diff = spectral_norm(&(&extrap - pe));
                let scale = spectral_norm(&extrap).max(1e-300);
                last_diff = diff;
                last_target = tol * scale;
                if diff <= tol * scale {
                    return Ok(ProductIntegral {
                        value: extrap,
                        mesh: cur.mesh,
                        norm_integral: cur.norm_integral,
                    });
                }
            }
            prev_extrap = Some(extrap);
        }
        prev_raw = Some(cur);
        k *= 2;
    }
    Err(PathError::NoRefinementConvergence {
        diff: last_diff,
        target: last_target,
    })
}

/// Precomputed structure of the fiber hopping matrix
/// 𝕋_{+g}(φ) = Σ t(x−y) e^{iΦ_{x,y}(φ)} c†_x c_y − ½⟨n, U_eff n⟩ on the
/// M̂-particle sector; only the phases depend on φ.
pub struct FiberHopping {
    d: usize,
    /// (phase coefficients, hop entries scaled by t) per directed edge.
    directed: Vec<(Vec<f64>, Vec<(usize, usize, f64)>)>,
    quad_diag: Vec<f64>,
}

impl FiberHopping {
    pub fn prepare(graph: &LatticeGraph, cg: &CouplingGrid, basis: &FermionBasis) -> FiberHopping {
        let sites = graph.vertex_count();
        let mut directed = Vec::new();
        for &(x, y) in graph.edges() {
            let tval = cg.t[x][y];
            if tval == 0.0 {
                continue;
            }
            for (a, b) in [(x, y), (y, x)] {
                let coeffs = cg.phase_coefficients(a, b);
                let entries: Vec<(usize, usize, f64)> = crate::fock::hop(basis, a, b)
                    .entries()
                    .map(|(r, c, v)| (r, c, v.re * tval))
                    .collect();
                directed.push((coeffs, entries));
            }
        }
        let quad_diag = basis
            .states()
            .iter()
            .map(|&mask| {
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
                -0.5 * acc
            })
            .collect();
        FiberHopping {
            d: basis.dim(),
            directed,
            quad_diag,
        }
    }

    /// Evaluate 𝕋_{+g}(φ) into a caller-provided buffer.
    pub fn evaluate(&self, phi: &[f64], out: &mut Mat<Complex64>) {
        for r in 0..self.d {
            for c in 0..self.d {
                out[(r, c)] = Complex64::ZERO;
            }
        }
        for (coeffs, entries) in &self.directed {
            let angle: f64 = coeffs.iter().zip(phi).map(|(c, q)| c * q).sum();
            let phase = Complex64::from_polar(1.0, angle);
            for &(r, c, v) in entries {
                out[(r, c)] += phase * v;
            }
        }
        for (i, &q) in self.quad_diag.iter().enumerate() {
            out[(i, i)] += Complex64::new(q, 0.0);
        }
    }
}

/// The fiber hopping matrix at one configuration (convenience wrapper).
pub fn fiber_hopping_matrix(
    graph: &LatticeGraph,
    cg: &CouplingGrid,
    basis: &FermionBasis,
    phi: &[f64],
) -> Mat<Complex64> {
    let prepared = FiberHopping::prepare(graph, cg, basis);
    let mut out = Mat::zeros(basis.dim(), basis.dim());
    prepared.evaluate(phi, &mut out);
    out
}

/// Monte Carlo estimate of the e^{−βK_M} kernel between φ and φ', as a
/// D²×D² operator on fiber matrices (index X·D+Y), with per-entry standard
/// errors from batch means.
#[derive(Clone, Debug)]
pub struct FkEstimate {
    pub mean: Mat<Complex64>,
    /// Standard error of each complex entry (√(Var re + Var im) of the
    /// batch means).
    pub std_err: Mat<f64>,
    pub n_samples: usize,
    pub n_batches: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn fk_kernel_estimate(
    graph: &LatticeGraph,
    couplings: &CouplingSpec,
    sector: SectorSpec,
    phi: &[f64],
    phi_prime: &[f64],
    beta: f64,
    n_samples: usize,
    k_slices: usize,
    seed: u64,
) -> Result<FkEstimate, PathError> {
    let a1 = check_a1(graph, couplings)?;
    if !a1.holds {
        return Err(PathError::Model(ModelError::A1Violated { spread: a1.spread }));
    }
    let cg = CouplingGrid::build(graph, couplings)?;
    let sites = graph.vertex_count();
    let basis = FermionBasis::new(sites, sector.m_hat());
    let d = basis.dim();
    let dd = d * d;
    let omega0 = couplings.omega0;
    let p_beta = endpoint_weight(phi, phi_prime, beta);

    let n_batches = 64usize.min(n_samples.max(1));
    let per_batch = n_samples.div_ceil(n_batches);
    let prepared = FiberHopping::prepare(graph, &cg, &basis);
    let potential = |q: &[f64]| -> f64 {
        0.5 * omega0 * omega0 * q.iter().map(|v| v * v).sum::<f64>()
            - 0.5 * omega0 * sites as f64
    };

    use rayon::prelude::*;
    let batch_means: Vec<Mat<Complex64>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = seeded_rng(seed, batch as u64);
            let mut acc = Mat::<Complex64>::zeros(dd, dd);
            let mut tt = Mat::<Complex64>::zeros(d, d);
            let mut g_mat = Mat::<Complex64>::zeros(d, d);
            let mut next = Mat::<Complex64>::zeros(d, d);
            for _ in 0..per_batch {
                let alpha = sample_bridge(sites, k_slices, &mut rng);
                let omega = bridge_to_path(&alpha, phi, phi_prime, beta);
                // trapezoid of ∫ V(ω(s)) ds on the slice grid
                let mut action = 0.0;
                for j in 0..k_slices {
                    let dt = omega.times[j + 1] - omega.times[j];
                    action +=
                        0.5 * dt * (potential(&omega.values[j]) + potential(&omega.values[j + 1]));
                }
                let weight = (-action).exp();
                // ordered product of exp{𝕋(ω(s_j))·Δ} at right endpoints
                let dt = beta / k_slices as f64;
                for r in 0..d {
                    for c in 0..d {
                        g_mat[(r, c)] = if r == c {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::ZERO
                        };
                    }
                }
                for j in 1..=k_slices {
                    prepared.evaluate(&omega.values[j], &mut tt);
                    let step = expm_hermitian_small(&tt, dt);
                    // next = g_mat · step
                    for r in 0..d {
                        for c in 0..d {
                            let mut s = Complex64::ZERO;
                            for k in 0..d {
                                s += g_mat[(r, k)] * step[(k, c)];
                            }
                            next[(r, c)] = s;
                        }
                    }
                    std::mem::swap(&mut g_mat, &mut next);
                }
                // ℒ(G)ℛ(G†): [(X,Y),(X',Y')] = G[X,X']·conj(G[Y,Y'])
                for x in 0..d {
                    for y in 0..d {
                        for xp in 0..d {
                            for yp in 0..d {
                                acc[(x * d + y, xp * d + yp)] +=
                                    g_mat[(x, xp)] * g_mat[(y, yp)].conj() * weight;
                            }
                        }
                    }
                }
            }
            let scale = Complex64::new(p_beta / per_batch as f64, 0.0);
            let mut mean = Mat::<Complex64>::zeros(dd, dd);
            for r in 0..dd {
                for c in 0..dd {
                    mean[(r, c)] = acc[(r, c)] * scale;
                }
            }
            mean
        })
        .collect();

    let mut mean = Mat::<Complex64>::zeros(dd, dd);
    for b in &batch_means {
        for r in 0..dd {
            for c in 0..dd {
                mean[(r, c)] += b[(r, c)];
            }
        }
    }
    let nb = n_batches as f64;
    for r in 0..dd {
        for c in 0..dd {
            mean[(r, c)] /= Complex64::new(nb, 0.0);
        }
    }
    let mut std_err = Mat::<f64>::zeros(dd, dd);
    for r in 0..dd {
        for c in 0..dd {
            let mut var_re = 0.0;
            let mut var_im = 0.0;
            for b in &batch_means {
                let dz = b[(r, c)] - mean[(r, c)];
                var_re += dz.re * dz.re;
                var_im += dz.im * dz.im;
            }
            var_re /= nb - 1.0;
            var_im /= nb - 1.0;
            std_err[(r, c)] = ((var_re + var_im) / nb).sqrt();
        }
    }

    Ok(FkEstimate {
        mean,
        std_err,
        n_samples: per_batch * n_batches,
        n_batches,
    })
}

/// The closed-form kernel of e^{−β(½p² + ½ω²q² − ω/2)} in one coordinate.
pub fn mehler_kernel(omega0: f64, beta: f64, q: f64, q_prime: f64) -> f64 {
    let s = (omega0 * beta).sinh();
    let c = (omega0 * beta).cosh();
    let prefactor = (omega0 / (2.0 * std::f64::consts::PI * s)).sqrt();
    prefactor
        * (-(omega0 * ((q * q + q_prime * q_prime) * c - 2.0 * q * q_prime)) / (2.0 * s)).exp()
        * (0.5 * omega0 * beta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::QGrid;

    #[test]
    fn bridge_endpoints_vanish_and_covariance_matches() {
        let k = 16;
        let n_samples = 40_000;
        let mut rng = seeded_rng(8, 0);
        // measure Cov(α_x(s), α_y(t)) on a 3×3 grid of (s, t) for 2 sites
        let probes = [k / 4, k / 2, 3 * k / 4];
        let mut sums = [[0.0f64; 3]; 3];
        let mut cross = 0.0f64;
        for _ in 0..n_samples {
            let b = sample_bridge(2, k, &mut rng);
            assert!(b.values[0].iter().all(|&v| v == 0.0));
            assert!(b.values[k].iter().all(|&v| v == 0.0));
            for (i, &pi) in probes.iter().enumerate() {
                for (j, &pj) in probes.iter().enumerate() {
                    sums[i][j] += b.values[pi][0] * b.values[pj][0];
                }
            }
            cross += b.values[probes[0]][0] * b.values[probes[2]][1];
        }
        for (i, &pi) in probes.iter().enumerate() {
            for (j, &pj) in probes.iter().enumerate() {
                let (s, t) = (pi as f64 / k as f64, pj as f64 / k as f64);
                let want = s.min(t) * (1.0 - s.max(t));
                let got = sums[i][j] / n_samples as f64;
                // var of the product estimator ≈ (want² + var bound)/n; 3σ
                let se = (2.0f64 / n_samples as f64).sqrt() * 0.5;
                assert!(
                    (got - want).abs() < 3.0 * se,
                    "cov({s},{t}): got {got}, want {want}"
                );
            }
        }
        // distinct sites are independent
        let se = (1.0f64 / n_samples as f64).sqrt();
        assert!((cross / n_samples as f64).abs() < 3.0 * se);
    }

    #[test]
    fn product_integral_constant_and_commuting() {
        // constant A: result = e^{aA} exactly at any partition
        let mut a = Mat::<Complex64>::zeros(2, 2);
        a[(0, 1)] = Complex64::new(0.3, 0.1);
        a[(1, 0)] = Complex64::new(-0.2, 0.4);
        a[(0, 0)] = Complex64::new(0.1, 0.0);
        let times: Vec<f64> = (0..=7).map(|j| 1.3 * j as f64 / 7.0).collect();
        let samples = vec![a.clone(); 7];
        let got = product_integral(&samples, &times);
        let mut scaled = Mat::<Complex64>::zeros(2, 2);
        for r in 0..2 {
            for c in 0..2 {
                scaled[(r, c)] = a[(r, c)] * 1.3;
            }
        }
        let want = expm_dense(&scaled);
        for r in 0..2 {
            for c in 0..2 {
                assert!((got.value[(r, c)] - want[(r, c)]).norm() < 1e-13);
            }
        }

        // commuting family A(s) = f(s)·A₀: result = e^{(∫f)A₀}
        let f = |s: f64| 1.0 + s * s;
        let integral_f = |a: f64| a + a * a * a / 3.0;
        let pi_res = product_integral_refined(
            |s| {
                let mut m = Mat::<Complex64>::zeros(2, 2);
                for r in 0..2 {
                    for c in 0..2 {
                        m[(r, c)] = a[(r, c)] * f(s);
                    }
                }
                m
            },
            0.9,
            1e-8,
            14,
        )
        .unwrap();
        let mut scaled = Mat::<Complex64>::zeros(2, 2);
        for r in 0..2 {
            for c in 0..2 {
                scaled[(r, c)] = a[(r, c)] * integral_f(0.9);
            }
        }
        let want = expm_dense(&scaled);
        for r in 0..2 {
            for c in 0..2 {
                assert!((pi_res.value[(r, c)] - want[(r, c)]).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn zero_path_gives_identity_and_norm_bound_holds() {
        let times: Vec<f64> = (0..=5).map(|j| j as f64 / 5.0).collect();
        let zeros = vec![Mat::<Complex64>::zeros(3, 3); 5];
        let got = product_integral(&zeros, &times);
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::ZERO
                };
                assert_eq!(got.value[(r, c)], want);
            }
        }

        // submultiplicativity ‖∏e^{A ds}‖ ≤ e^{∫‖A‖}
        use rand::Rng;
        let mut rng = seeded_rng(5, 0);
        for _ in 0..10 {
            let mut a0 = Mat::<Complex64>::zeros(3, 3);
            for r in 0..3 {
                for c in 0..3 {
                    a0[(r, c)] =
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
            let times: Vec<f64> = (0..=32).map(|j| j as f64 / 32.0).collect();
            let samples: Vec<Mat<Complex64>> = (1..=32)
                .map(|j| {
                    let s = times[j];
                    let mut m = Mat::<Complex64>::zeros(3, 3);
                    for r in 0..3 {
                        for c in 0..3 {
                            m[(r, c)] = a0[(r, c)] * (1.0 + 0.5 * s);
                        }
                    }
                    m
                })
                .collect();
            let got = product_integral(&samples, &times);
            assert!(spectral_norm(&got.value) <= got.norm_integral.exp() + 1e-10);
        }
    }

    #[test]
    fn ordered_remainder_inequality_on_random_smooth_paths() {
        // ‖∏e^{A ds} − 1 − ∫A‖ ≤ e^{∫‖A‖} − 1 − ∫‖A‖
        use rand::Rng;
        let mut rng = seeded_rng(14, 0);
        for trial in 0..20 {
            let mut mats = Vec::new();
            for _ in 0..3 {
                let mut m = Mat::<Complex64>::zeros(4, 4);
                for r in 0..4 {
                    for c in 0..4 {
                        m[(r, c)] = Complex64::new(
                            0.6 * (rng.random::<f64>() - 0.5),
                            0.6 * (rng.random::<f64>() - 0.5),
                        );
                    }
                }
                mats.push(m);
            }
            let a_of = |s: f64| -> Mat<Complex64> {
                let mut m = Mat::<Complex64>::zeros(4, 4);
                for r in 0..4 {
                    for c in 0..4 {
                        m[(r, c)] =
                            mats[0][(r, c)] + mats[1][(r, c)] * s + mats[2][(r, c)] * (s * s);
                    }
                }
                m
            };
            let a_len = 1.0;
            let prod = product_integral_refined(a_of, a_len, 1e-7, 14).unwrap();
            let (nodes, weights) = crate::linalg::gauss_legendre(24, 0.0, a_len);
            let mut int_a = Mat::<Complex64>::zeros(4, 4);
            let mut int_norm = 0.0;
            for (s, w) in nodes.iter().zip(&weights) {
                let m = a_of(*s);
                int_norm += spectral_norm(&m) * w;
                for r in 0..4 {
                    for c in 0..4 {
                        int_a[(r, c)] += m[(r, c)] * *w;
                    }
                }
            }
            let mut lhs_mat = prod.value.clone();
            for i in 0..4 {
                lhs_mat[(i, i)] -= Complex64::new(1.0, 0.0);
            }
            let lhs = spectral_norm(&(&lhs_mat - &int_a));
            let rhs = int_norm.exp() - 1.0 - int_norm;
            assert!(lhs <= rhs, "trial {trial}: lhs {lhs} > rhs {rhs}");
        }
    }

    #[test]
    fn one_site_kernel_matches_oscillator_closed_form() {
        // 1 site, empty fermion sector (M = 1/2, M̂ = 0): the kernel is the
        // shifted-oscillator closed form exactly
        let g = LatticeGraph::from_edges_with_positions(1, &[], Some(vec![vec![0]])).unwrap();
        let c = CouplingSpec::onsite(0.0, 1.0, 0.3, 1.0);
        let sector = SectorSpec::from_doubled(1, 1).unwrap(); // M = +1/2 → M̂ = 0
        let beta = 0.5;
        for (q, qp) in [(0.0, 0.0), (0.6, -0.3), (1.2, 1.2)] {
            let est =
                fk_kernel_estimate(&g, &c, sector, &[q], &[qp], beta, 12_000, 64, 123).unwrap();
            let want = mehler_kernel(1.0, beta, q, qp);
            let got = est.mean[(0, 0)].re;
            let se = est.std_err[(0, 0)].max(1e-12);
            assert!(
                (got - want).abs() <= 3.5 * se + 2e-4,
                "kernel({q},{qp}): got {got} ± {se}, want {want}"
            );
        }
    }

    #[test]
    fn short_time_kernel_concentrates_at_equal_endpoints() {
        let g = LatticeGraph::from_edges_with_positions(1, &[], Some(vec![vec![0]])).unwrap();
        let c = CouplingSpec::onsite(0.0, 1.0, 0.0, 1.0);
        let sector = SectorSpec::from_doubled(1, 1).unwrap();
        let same = fk_kernel_estimate(&g, &c, sector, &[0.4], &[0.4], 0.05, 4000, 32, 5).unwrap();
        let far = fk_kernel_estimate(&g, &c, sector, &[0.4], &[-1.6], 0.05, 4000, 32, 5).unwrap();
        assert!(same.mean[(0, 0)].re > 100.0 * far.mean[(0, 0)].re.abs());
    }

    #[test]
    fn resampling_agrees_within_errors() {
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
        let sector = SectorSpec::new(&g, 0).unwrap();
        let phi = [0.3, -0.2];
        let phip = [-0.5, 0.1];
        let a = fk_kernel_estimate(&g, &c, sector, &phi, &phip, 0.4, 8_000, 48, 100).unwrap();
        let b = fk_kernel_estimate(&g, &c, sector, &phi, &phip, 0.4, 8_000, 48, 200).unwrap();
        let d = a.mean.nrows();
        for r in 0..d {
            for c_ in 0..d {
                let diff = (a.mean[(r, c_)] - b.mean[(r, c_)]).norm();
                let se = (a.std_err[(r, c_)].powi(2) + b.std_err[(r, c_)].powi(2)).sqrt();
                assert!(
                    diff <= 4.0 * se + 1e-9,
                    "entry ({r},{c_}): runs differ by {diff} vs se {se}"
                );
            }
        }
    }

    #[test]
    fn two_site_kernel_matches_grid_exact_semigroup() {
        // full cross-check including hopping phases: MC vs the discretized
        // semigroup kernel of K_M
        let g = LatticeGraph::hypercubic(1, 1);
        let c = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
        let sector = SectorSpec::new(&g, 0).unwrap();
        let beta = 0.4;
        let grid = QGrid::new(2, 25, 6.0);
        let gh = crate::cone::grid_hamiltonian(&g, &c, sector, &grid).unwrap();
        let k_eig = crate::linalg::herm_eig(&gh.hopping_part.to_dense()).unwrap();
        // pick interior grid points as endpoints
        let vals = grid.coordinate_values();
        let (i1, i2) = (11usize, 14usize); // q = -0.5, 1.0
        let g_row = i1 * 25 + i2;
        let g_col = i2 * 25 + i1;
        let exact = crate::cone::semigroup_kernel_block(&gh, &k_eig, beta, g_row, g_col);
        let phi = [vals[i1], vals[i2]];
        let phip = [vals[i2], vals[i1]];
        let est = fk_kernel_estimate(&g, &c, sector, &phi, &phip, beta, 16_000, 64, 31).unwrap();
        let dd = est.mean.nrows();
        for r in 0..dd {
            for cc in 0..dd {
                let diff = (est.mean[(r, cc)] - exact[(r, cc)]).norm();
                let tol = 4.0 * est.std_err[(r, cc)] + 6e-3; // MC + grid bias
                assert!(
                    diff <= tol,
                    "entry ({r},{cc}): |MC − grid| = {diff} > {tol} (exact {}, mc {})",
                    exact[(r, cc)],
                    est.mean[(r, cc)]
                );
            }
        }
    }
}
