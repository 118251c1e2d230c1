//! Cross-module invariants checked against the simulator and the
//! d-separation oracle.

use attncausal::attnmat::{correlation, synthesize_attention};
use attncausal::citest::{partial_correlation, CiConfig};
use attncausal::discovery::{learn_from_effect, learn_structure};
use attncausal::matrix::Matrix;
use attncausal::pag::{apply_fci_rules, orient, orient_v_structures, Mark, OrientationConfig, Pag};
use attncausal::scmsim::{
    d_separated, effect_matrix, observed_effect_matrix, oracle_fci, random_scm, scm_covariance, Dag, Scm,
    ScmParams,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn subsets(pool: &[usize]) -> Vec<Vec<usize>> {
    (0u32..1 << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

fn ancestors(dag: &Dag) -> Vec<Vec<bool>> {
    let n = dag.n();
    let mut anc = vec![vec![false; n]; n];
    for a in 0..n {
        let mut stack = vec![a];
        while let Some(v) = stack.pop() {
            for &c in dag.children(v) {
                if !anc[a][c] {
                    anc[a][c] = true;
                    stack.push(c);
                }
            }
        }
    }
    anc
}

fn exact() -> CiConfig {
    CiConfig::exact(1e-7, 1000).unwrap()
}

fn scm_strategy(max_n: usize) -> impl Strategy<Value = Scm> {
    (3usize..=max_n, 0.2f64..0.7, any::<u64>())
        .prop_map(|(n, d, seed)| random_scm(&ScmParams::new(n, d), seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn effect_matrix_inverts_i_minus_g(scm in scm_strategy(9)) {
        let n = scm.n;
        let m = effect_matrix(&scm);
        let mut i_minus_g = Matrix::identity(n);
        let g = scm.weights();
        for i in 0..n {
            for j in 0..n {
                i_minus_g.set(i, j, i_minus_g.get(i, j) - g.get(i, j));
            }
        }
        prop_assert!(m.matrix().matmul(&i_minus_g).max_abs_diff(&Matrix::identity(n)) < 1e-10);
        prop_assert!(i_minus_g.matmul(m.matrix()).max_abs_diff(&Matrix::identity(n)) < 1e-10);
    }

    #[test]
    fn faithful_zero_partial_correlation_iff_d_separated(scm in scm_strategy(6)) {
        let n = scm.n;
        let r = correlation(&scm_covariance(&scm)).unwrap();
        let dag = scm.dag();
        for i in 0..n {
            for j in i + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != i && v != j).collect();
                for z in subsets(&rest) {
                    let rho = partial_correlation(&r, i, j, &z).unwrap();
                    prop_assert_eq!(rho.abs() < 1e-7, d_separated(&dag, i, j, &z), "({}, {} | {:?}) rho {}", i, j, z, rho);
                }
            }
        }
    }

    #[test]
    fn arrowheads_respect_causal_order(scm in scm_strategy(8)) {
        let a = synthesize_attention(&effect_matrix(&scm)).unwrap();
        let g = learn_structure(&a, &exact()).unwrap().pag;
        let anc = ancestors(&scm.dag());
        for e in g.edges() {
            // an arrowhead at a means a is not an ancestor of b
            if e.mark_a == Mark::Arrow {
                prop_assert!(!anc[e.a][e.b], "{:?}", e);
            }
            if e.mark_b == Mark::Arrow {
                prop_assert!(!anc[e.b][e.a], "{:?}", e);
            }
            if e.mark_a == Mark::Tail {
                prop_assert!(anc[e.a][e.b], "{:?}", e);
            }
            if e.mark_b == Mark::Tail {
                prop_assert!(anc[e.b][e.a], "{:?}", e);
            }
        }
    }

    #[test]
    fn trace_records_are_consistent_with_output(scm in scm_strategy(8)) {
        let a = synthesize_attention(&effect_matrix(&scm)).unwrap();
        let res = learn_structure(&a, &exact()).unwrap();
        prop_assert!(res.trace.tests_performed >= res.trace.records.len());
        for rec in &res.trace.records {
            prop_assert!(rec.i < rec.j && rec.j < scm.n);
            prop_assert!(!rec.cond.contains(&rec.i) && !rec.cond.contains(&rec.j));
            prop_assert_eq!(rec.cond_size, rec.cond.len());
            if rec.independent {
                // the pair was dropped and keeps the separating set that was found
                prop_assert!(!res.pag.is_adjacent(rec.i, rec.j));
                prop_assert_eq!(res.pag.sepset(rec.i, rec.j), Some(rec.cond.as_slice()));
            }
        }
        for (i, j) in res.pag.skeleton() {
            prop_assert!(!res.trace.records.iter().any(|r| (r.i, r.j) == (i, j) && r.independent));
        }
    }

    #[test]
    fn orientation_is_monotone_and_order_free(scm in scm_strategy(8), shuffle in any::<u64>()) {
        let truth = oracle_fci(&scm.dag(), &[]);
        let mut g = truth.clone();
        g.reset_marks();
        orient_v_structures(&mut g);
        let before = g.clone();
        apply_fci_rules(&mut g, &OrientationConfig::default());
        prop_assert_eq!(g.skeleton(), before.skeleton());
        for e in before.edges() {
            for (node, other, mark) in [(e.a, e.b, e.mark_a), (e.b, e.a, e.mark_b)] {
                if mark != Mark::Circle {
                    prop_assert_eq!(g.mark_at(node, other), Some(mark));
                }
            }
        }
        let mut twice = g.clone();
        orient_v_structures(&mut twice);
        apply_fci_rules(&mut twice, &OrientationConfig::default());
        prop_assert_eq!(&twice, &g);

        // same skeleton and sepsets inserted in another order
        let mut pairs: Vec<((usize, usize), Vec<usize>)> = truth.sepsets().map(|(p, s)| (p, s.to_vec())).collect();
        let mut edges = truth.skeleton();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        pairs.shuffle(&mut rng);
        edges.shuffle(&mut rng);
        let mut h = Pag::empty(truth.n());
        for ((a, b), s) in &pairs {
            h.add_edge(*b, *a, Mark::Circle, Mark::Circle).unwrap();
            h.remove_edge_with_sepset(*b, *a, s).unwrap();
        }
        for (a, b) in edges {
            h.add_edge(b, a, Mark::Circle, Mark::Circle).unwrap();
        }
        orient(&mut h, &OrientationConfig::default());
        prop_assert_eq!(&h, &g);
    }

    #[test]
    fn latent_output_never_links_separable_pairs(n in 5usize..=7, d in 0.25f64..0.5, seed in any::<u64>()) {
        let Ok(scm) = random_scm(&ScmParams::new(n, d).with_latents(1), seed) else {
            return Ok(());
        };
        let observed = scm.observed();
        let m = observed_effect_matrix(&scm).unwrap();
        let g = learn_from_effect(&m, &exact(), &OrientationConfig::default()).unwrap().pag;
        prop_assert_eq!(g.n(), observed.len());
        let dag = scm.dag();
        for (a, b) in g.skeleton() {
            let rest: Vec<usize> = observed.iter().copied().filter(|&v| v != observed[a] && v != observed[b]).collect();
            for z in subsets(&rest) {
                prop_assert!(!d_separated(&dag, observed[a], observed[b], &z), "edge {}-{} separated by {:?}", a, b, z);
            }
        }
    }
}
