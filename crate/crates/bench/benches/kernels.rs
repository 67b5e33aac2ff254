use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use hhlab_bench::ring_hamiltonian;
use hhlab_core::fock::QGrid;
use hhlab_core::lattice::LatticeGraph;
use hhlab_core::linalg::{herm_eig, lowest_eigenpairs, LanczosOptions};
use hhlab_core::model::{CouplingGrid, CouplingSpec, SectorSpec};
use hhlab_core::pathintegral::{bridge_to_path, product_integral, sample_bridge};
use hhlab_core::rng::seeded_rng;

fn bench_matvec(c: &mut Criterion) {
    let h = ring_hamiltonian(2);
    let x = vec![Complex64::new(1.0, 0.5); h.dim()];
    c.bench_function("ring_matvec_nmax2", |b| {
        b.iter(|| std::hint::black_box(h.matvec(&x)))
    });
}

fn bench_assembly(c: &mut Criterion) {
    c.bench_function("ring_assembly_nmax2", |b| {
        b.iter(|| std::hint::black_box(ring_hamiltonian(2)))
    });
}

fn bench_lanczos(c: &mut Criterion) {
    let h = ring_hamiltonian(2);
    let opts = LanczosOptions {
        dense_cutoff: 0,
        ..Default::default()
    };
    let mut group = c.benchmark_group("eigensolver");
    group.sample_size(10);
    group.bench_function("ring_lowest3_nmax2", |b| {
        b.iter(|| std::hint::black_box(lowest_eigenpairs(&h, 3, 1e-9, opts).unwrap()))
    });
    group.finish();
}

fn bench_dense_eig(c: &mut Criterion) {
    let graph = LatticeGraph::hypercubic(1, 1);
    let couplings = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
    let sector = SectorSpec::new(&graph, 0).unwrap();
    let grid = QGrid::new(2, 15, 6.0);
    let gh = hhlab_core::cone::grid_hamiltonian(&graph, &couplings, sector, &grid).unwrap();
    let dense = gh.full.to_dense();
    let mut group = c.benchmark_group("dense");
    group.sample_size(10);
    group.bench_function("herm_eig_900", |b| {
        b.iter(|| std::hint::black_box(herm_eig(&dense).unwrap()))
    });
    group.finish();
}

fn bench_bridge(c: &mut Criterion) {
    let graph = LatticeGraph::hypercubic(1, 1);
    let couplings = CouplingSpec::onsite(1.0, 1.0, 0.3, 1.0);
    let cg = CouplingGrid::build(&graph, &couplings).unwrap();
    let basis = hhlab_core::fock::FermionBasis::new(2, 1);
    let prepared = hhlab_core::pathintegral::FiberHopping::prepare(&graph, &cg, &basis);
    c.bench_function("bridge_sample_and_propagate_k64", |b| {
        let mut rng = seeded_rng(1, 0);
        b.iter(|| {
            let alpha = sample_bridge(2, 64, &mut rng);
            let omega = bridge_to_path(&alpha, &[0.2, -0.1], &[-0.3, 0.4], 0.5);
            let mut tt = faer::Mat::<Complex64>::zeros(2, 2);
            let samples: Vec<faer::Mat<Complex64>> = (1..=64)
                .map(|j| {
                    prepared.evaluate(&omega.values[j], &mut tt);
                    tt.clone()
                })
                .collect();
            std::hint::black_box(product_integral(&samples, &omega.times))
        })
    });
}

criterion_group!(
    benches,
    bench_matvec,
    bench_assembly,
    bench_lanczos,
    bench_dense_eig,
    bench_bridge
);
criterion_main!(benches);
