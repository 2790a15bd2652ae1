//! Oracle-engine invariants: MAG construction, adjacency characterization,
//! and equivalence-relation structure of the fine-grained interventional
//! equivalence check.

mod common;

use common::*;
use ffci::classes::InterventionKind;
use ffci::graph::VertexKind;
use ffci::oracle::{fi_markov_equivalent, mag_of, oracle_ci, CiQuery};
use ffci::separation::d_separated;
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[test]
fn mag_of_always_yields_a_valid_mag() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let aug = random_soundness_config(&mut rng);
        // Mag::new re-validates ancestrality and maximality internally.
        let mag = mag_of(&aug).unwrap();
        assert!(ffci::validate(mag.graph(), ffci::GraphClass::Mag).is_valid());
    }
}

#[test]
fn mag_adjacency_iff_no_observed_conditioning_set_separates() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..120 {
        let aug = random_soundness_config_sized(3, 6, &mut rng);
        let g = aug.graph();
        let obs = aug.observed();
        let sel: BTreeSet<usize> = g.ids_of_kind(VertexKind::Selection).into_iter().collect();
        let mag = mag_of(&aug).unwrap();
        for (pi, &vi) in obs.iter().enumerate() {
            for (pj, &vj) in obs.iter().enumerate().skip(pi + 1) {
                let others: Vec<usize> = obs
                    .iter()
                    .copied()
                    .filter(|&v| v != vi && v != vj)
                    .collect();
                let mut separable = false;
                'outer: for size in 0..=others.len() {
                    for cond in others.iter().copied().combinations(size) {
                        let mut z: BTreeSet<usize> = cond.into_iter().collect();
                        z.extend(sel.iter().copied());
                        if d_separated(g, &set(&[vi]), &set(&[vj]), &z).unwrap() {
                            separable = true;
                            break 'outer;
                        }
                    }
                }
                assert_eq!(
                    mag.graph().adjacent(pi, pj),
                    !separable,
                    "adjacency mismatch for pair ({pi},{pj})"
                );
            }
        }
    }
}

fn enumerate_family(rng: &mut ChaCha8Rng, count: usize) -> Vec<ffci::AugmentedDag> {
    (0..count)
        .map(|_| {
            let n = 3;
            let p = rng.gen_range(0.3..0.8);
            let mut g = random_dag(n, p, rng);
            if rng.gen_bool(0.5) {
                let l = g.add_vertex(VertexKind::Latent, "L1");
                g.add_directed(l, 0).unwrap();
                g.add_directed(l, 1).unwrap();
            }
            if rng.gen_bool(0.5) {
                let s = g.add_vertex(VertexKind::Selection, "S1");
                g.add_directed(1, s).unwrap();
                g.add_directed(2, s).unwrap();
            }
            ffci::augment(
                &ffci::Dag::new(g).unwrap(),
                &singleton_targets(n),
                &[InterventionKind::Hard; 3],
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn equivalence_is_reflexive_symmetric_transitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let family = enumerate_family(&mut rng, 24);
    for g in &family {
        assert!(fi_markov_equivalent(g, g).unwrap().verdict);
    }
    for a in &family {
        for b in &family {
            let ab = fi_markov_equivalent(a, b).unwrap().verdict;
            let ba = fi_markov_equivalent(b, a).unwrap().verdict;
            assert_eq!(ab, ba, "symmetry");
        }
    }
    for a in &family {
        for b in &family {
            for c in &family {
                let ab = fi_markov_equivalent(a, b).unwrap().verdict;
                let bc = fi_markov_equivalent(b, c).unwrap().verdict;
                let ac = fi_markov_equivalent(a, c).unwrap().verdict;
                if ab && bc {
                    assert!(ac, "transitivity");
                }
            }
        }
    }
}

#[test]
fn equivalent_models_answer_every_small_query_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let family = enumerate_family(&mut rng, 60);
    let mut compared = 0usize;
    for (i, a) in family.iter().enumerate() {
        for b in family.iter().skip(i + 1) {
            if !fi_markov_equivalent(a, b).unwrap().verdict {
                continue;
            }
            compared += 1;
            let n = a.observed().len();
            // X-vs-X queries over all disjoint conditioning sets up to 3.
            for x in 0..n {
                for y in x + 1..n {
                    let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                    for size in 0..=others.len().min(3) {
                        for cond in others.iter().copied().combinations(size) {
                            let q = CiQuery::vars([x], [y], cond);
                            assert_eq!(
                                oracle_ci(a, &q).unwrap(),
                                oracle_ci(b, &q).unwrap(),
                                "X query mismatch on equivalent pair"
                            );
                        }
                    }
                }
            }
            // Indicator queries for every regime and target.
            for k in 1..=3 {
                for x in 0..n {
                    let others: Vec<usize> = (0..n).filter(|&v| v != x).collect();
                    for size in 0..=others.len().min(3) {
                        for cond in others.iter().copied().combinations(size) {
                            let q = CiQuery::psi(k, [x], cond);
                            assert_eq!(
                                oracle_ci(a, &q).unwrap(),
                                oracle_ci(b, &q).unwrap(),
                                "indicator query mismatch on equivalent pair"
                            );
                        }
                    }
                }
            }
        }
    }
    assert!(compared >= 3, "family produced only {compared} equivalent pairs");
}
