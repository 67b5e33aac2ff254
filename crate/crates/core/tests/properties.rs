//! Property tests of the structural invariants: randomized inputs instead of
//! hand-picked cases wherever the invariant is supposed to hold universally.

use num_complex::Complex64;
use proptest::prelude::*;

use hhlab_core::fock::FermionBasis;
use hhlab_core::lattice::{subsets_with_popcount, FermionicGraph, LatticeGraph};
use hhlab_core::sparse::CooMatrix;

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Random bipartite graphs: vertices split into two classes with edges only
/// across; built from a class-size pair and an edge-presence mask.
fn bipartite_graph() -> impl Strategy<Value = LatticeGraph> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(a, b)| {
        let pairs = a * b;
        (Just((a, b)), 0u32..(1u32 << pairs)).prop_map(move |((a, b), mask)| {
            let mut edges = Vec::new();
            for i in 0..a {
                for j in 0..b {
                    if mask >> (i * b + j) & 1 == 1 {
                        edges.push((i, a + j));
                    }
                }
            }
            LatticeGraph::from_edges(a + b, &edges).expect("cross-class edges are bipartite")
        })
    })
}

proptest! {
    #[test]
    fn sublattice_signs_cross_every_edge(g in bipartite_graph()) {
        for &(x, y) in g.edges() {
            prop_assert_eq!(g.gamma(x) * g.gamma(y), -1.0);
        }
    }

    #[test]
    fn fermionic_graph_has_binomial_vertex_count(
        g in bipartite_graph(),
        n_frac in 0.0f64..1.0,
    ) {
        let sites = g.vertex_count();
        let n = ((sites as f64) * n_frac) as usize;
        let fg = g.fermionic_graph(n).unwrap();
        prop_assert_eq!(fg.vertex_count(), binom(sites, n));
    }

    #[test]
    fn fermionic_edges_differ_in_one_adjacent_element(
        edges_mask in 0u32..(1 << 10),
        n in 1usize..5,
    ) {
        // random base graph on 5 vertices (not necessarily bipartite)
        let pairs: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| edges_mask >> k & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let fg = FermionicGraph::build(5, &edges, n).unwrap();
        let adjacent = |a: usize, b: usize| edges.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b)));
        for &(i, j) in &fg.edges {
            let (mi, mj) = (fg.vertices[i], fg.vertices[j]);
            let sym = mi ^ mj;
            prop_assert_eq!(sym.count_ones(), 2, "subsets must differ in one element");
            let a = sym.trailing_zeros() as usize;
            let b = 63 - sym.leading_zeros() as usize;
            prop_assert!(adjacent(a, b), "differing elements must be adjacent");
        }
    }

    #[test]
    fn subset_enumeration_is_sorted_and_complete(bits in 1usize..10, k in 0usize..10) {
        let k = k.min(bits);
        let subsets = subsets_with_popcount(bits, k);
        prop_assert_eq!(subsets.len(), binom(bits, k));
        prop_assert!(subsets.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(subsets.iter().all(|m| m.count_ones() as usize == k));
    }

    #[test]
    fn csr_matvec_matches_dense(
        entries in proptest::collection::vec(
            (0usize..6, 0usize..6, -1.0f64..1.0, -1.0f64..1.0),
            0..24,
        ),
        x_parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
    ) {
        let mut coo = CooMatrix::new(6, 6);
        for (r, c, re, im) in entries {
            coo.push(r, c, Complex64::new(re, im));
        }
        let x: Vec<Complex64> = x_parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let sparse = coo.to_csr().matvec(&x);
        let dense = coo.to_dense();
        for r in 0..6 {
            let mut want = Complex64::ZERO;
            for c in 0..6 {
                want += dense[(r, c)] * x[c];
            }
            prop_assert!((sparse[r] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_an_involution_and_kron_shapes_multiply(
        entries in proptest::collection::vec(
            (0usize..4, 0usize..3, -1.0f64..1.0, -1.0f64..1.0),
            1..10,
        ),
    ) {
        let mut coo = CooMatrix::new(4, 3);
        for (r, c, re, im) in entries {
            coo.push(r, c, Complex64::new(re, im));
        }
        let twice = coo.adjoint().adjoint().to_csr().to_dense();
        let original = coo.to_csr().to_dense();
        for r in 0..4 {
            for c in 0..3 {
                prop_assert_eq!(twice[(r, c)], original[(r, c)]);
            }
        }
        let eye = CooMatrix::identity(2);
        let k = coo.kron(&eye);
        prop_assert_eq!(k.rows, 8);
        prop_assert_eq!(k.cols, 6);
    }

    #[test]
    fn number_operators_commute_and_are_binary(
        sites in 2usize..5,
        n_frac in 0.0f64..1.0,
        x in 0usize..5,
        y in 0usize..5,
    ) {
        let n = ((sites as f64) * n_frac) as usize;
        let x = x % sites;
        let y = y % sites;
        let basis = FermionBasis::new(sites, n.min(sites));
        let nx = hhlab_core::fock::number_diagonal(&basis, x);
        let ny = hhlab_core::fock::number_diagonal(&basis, y);
        for (a, b) in nx.iter().zip(&ny) {
            prop_assert!(*a == 0.0 || *a == 1.0);
            // diagonal operators commute entrywise
            prop_assert_eq!(a * b, b * a);
        }
    }
}
