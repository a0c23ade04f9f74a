//! Second-order projective parsing charts in log space.
//!
//! One deduction system (arcs, adjacent siblings, headed-span boundaries)
//! drives the partition function, Viterbi decoding and part marginals,
//! optionally restricted by a [`ConstraintMask`]. An exhaustive
//! enumerator serves as the test oracle for small sentences.

mod brute;
mod chart;
pub(crate) mod deduction;
mod scores;
mod tree;

use thiserror::Error;

pub use crate::constraints::ConstraintMask;
pub use brute::{brute_force, BruteMode, BruteResult, BRUTE_FORCE_MAX_N};
pub use chart::{inside, marginals, viterbi, ChartArena, ChartSet};
pub use deduction::Kind as CellKind;
pub use scores::{Part, ScoreSet};
pub use tree::{enumerate_projective_trees, tree_score, DepTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("dimension mismatch: expected n = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("scores contain NaN or +inf")]
    InvalidScores,
    #[error("no legal tree under the given constraints")]
    NoLegalTree,
    #[error("empty support: the partition function is -inf")]
    EmptySupport,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("sentence of {n} tokens exceeds the enumeration limit of {max}")]
    TooLarge { n: usize, max: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scores(n: usize, rng: &mut ChaCha8Rng) -> ScoreSet<f64> {
        let mut s = ScoreSet::zeros(n);
        for x in s.arc_table_mut().iter_mut() {
            *x = rng.gen_range(-2.0..2.0);
        }
        for x in s.sib_table_mut().iter_mut() {
            *x = rng.gen_range(-2.0..2.0);
        }
        for x in s.span_left_table_mut().iter_mut() {
            *x = rng.gen_range(-2.0..2.0);
        }
        for x in s.span_right_table_mut().iter_mut() {
            *x = rng.gen_range(-2.0..2.0);
        }
        s
    }

    #[test]
    fn single_token_partition_is_zero() {
        let s = ScoreSet::<f64>::zeros(1);
        assert_eq!(inside(&s, None).unwrap(), 0.0);
    }

    #[test]
    fn two_tokens_three_trees() {
        let s = ScoreSet::<f64>::zeros(2);
        let oracle = brute_force(&s, None, BruteMode::Sum).unwrap();
        assert_eq!(oracle.count, 3);
        assert!((inside(&s, None).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inside_matches_oracle_seeded_n5() {
        let mut rng = ChaCha8Rng::seed_from_u64(20240517);
        let s = random_scores(5, &mut rng);
        let z = inside(&s, None).unwrap();
        let b = brute_force(&s, None, BruteMode::Sum).unwrap();
        assert!((z - b.value).abs() < 1e-9, "{} vs {}", z, b.value);
    }

    #[test]
    fn viterbi_chain_example() {
        let mut s = ScoreSet::<f64>::zeros(2);
        *s.arc_mut(0, 1) = 5.0;
        *s.arc_mut(1, 2) = 4.0;
        let (tree, score) = viterbi(&s, None, None).unwrap();
        assert_eq!(tree.heads(), &[0, 1]);
        assert_eq!(score, 9.0);
    }

    #[test]
    fn viterbi_tie_breaking_is_pinned() {
        let s = ScoreSet::<f64>::zeros(3);
        let (t1, _) = viterbi(&s, None, None).unwrap();
        let (t2, _) = viterbi(&s, None, None).unwrap();
        assert_eq!(t1, t2);
        // smallest split points everywhere give the right-branching chain
        assert_eq!(t1.heads(), &[0, 1, 2]);
    }

    #[test]
    fn viterbi_root_window_matches_restricted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let s = random_scores(4, &mut rng);
        let (tree, score) = viterbi(&s, None, Some(2..=3)).unwrap();
        for (h, m) in tree.arcs() {
            if h == 0 {
                assert!((2..=3).contains(&m));
            }
        }
        let mut best = f64::NEG_INFINITY;
        for heads in enumerate_projective_trees(4) {
            let t = DepTree::new(heads).unwrap();
            if t.arcs().all(|(h, m)| h != 0 || (2..=3).contains(&m)) {
                best = best.max(tree_score(&s, &t).unwrap());
            }
        }
        assert!((score - best).abs() < 1e-12);
        assert!((tree_score(&s, &tree).unwrap() - score).abs() < 1e-12);
    }

    #[test]
    fn marginals_single_token() {
        let m = marginals(&ScoreSet::<f64>::zeros(1), None).unwrap();
        assert_eq!(m.arc(0, 1), 1.0);
        assert_eq!(m.span_left(1, 1), 1.0);
        assert_eq!(m.span_right(1, 1), 1.0);
    }

    #[test]
    fn arc_marginals_sum_to_one_per_modifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            let s = random_scores(n, &mut rng);
            let m = marginals(&s, None).unwrap();
            for dep in 1..=n {
                let total: f64 = (0..=n).filter(|&h| h != dep).map(|h| m.arc(h, dep)).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn marginals_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_scores(4, &mut rng);
        let m = marginals(&s, None).unwrap();
        let step = 1e-4;
        for p in ScoreSet::<f64>::valid_parts(4) {
            let mut plus = s.clone();
            *plus.part_mut(p) += step;
            let mut minus = s.clone();
            *minus.part_mut(p) -= step;
            let fd = (inside(&plus, None).unwrap() - inside(&minus, None).unwrap()) / (2.0 * step);
            let got = m.part(p);
            assert!(
                (fd - got).abs() <= 1e-4 * fd.abs().max(got.abs()).max(1e-3),
                "{:?}: fd {} vs {}",
                p,
                fd,
                got
            );
        }
    }

    #[test]
    fn forbidding_all_root_arcs_empties_support() {
        let s = ScoreSet::<f64>::zeros(3);
        let mut mask = ConstraintMask::all_permissive(3);
        for m in 1..=3 {
            mask.forbid_arc(0, m);
        }
        assert_eq!(inside(&s, Some(&mask)).unwrap(), f64::NEG_INFINITY);
        assert_eq!(
            brute_force(&s, Some(&mask), BruteMode::Sum).unwrap().value,
            f64::NEG_INFINITY
        );
        assert_eq!(viterbi(&s, Some(&mask), None).unwrap_err(), ChartError::NoLegalTree);
        assert_eq!(marginals(&s, Some(&mask)).unwrap_err(), ChartError::EmptySupport);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = ScoreSet::<f64>::zeros(3);
        let mask = ConstraintMask::all_permissive(4);
        assert!(matches!(
            inside(&s, Some(&mask)),
            Err(ChartError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn brute_force_refuses_large_inputs() {
        let s = ScoreSet::<f64>::zeros(9);
        assert!(matches!(
            brute_force(&s, None, BruteMode::Sum),
            Err(ChartError::TooLarge { .. })
        ));
    }

    #[test]
    fn shared_arc_shift_moves_partition_by_n_times_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_scores(5, &mut rng);
        let mut shifted = s.clone();
        for x in shifted.arc_table_mut() {
            *x += 0.75;
        }
        let z0 = inside(&s, None).unwrap();
        let z1 = inside(&shifted, None).unwrap();
        assert!((z1 - z0 - 5.0 * 0.75).abs() < 1e-9);
        assert_eq!(
            viterbi(&s, None, None).unwrap().0,
            viterbi(&shifted, None, None).unwrap().0
        );
    }

    #[test]
    fn neg_infinity_scores_do_not_produce_nan() {
        let mut s = ScoreSet::<f64>::zeros(4);
        *s.arc_mut(0, 2) = f64::NEG_INFINITY;
        *s.sib_mut(0, 1, 3) = f64::NEG_INFINITY;
        let z = inside(&s, None).unwrap();
        assert!(z.is_finite());
        let m = marginals(&s, None).unwrap();
        assert!(m.arc_table().iter().all(|x| !x.is_nan()));
        assert_eq!(m.arc(0, 2), 0.0);
    }

    #[test]
    fn golden_chart_dump_two_tokens() {
        let s = ScoreSet::<f64>::zeros(2);
        let mut arena = ChartArena::new();
        arena.inside(&s, None).unwrap();
        let dump = arena.chart().dump();
        let expected = include_str!("../../tests/golden/chart_n2_zero.txt");
        assert_eq!(dump, expected);
    }

    #[test]
    fn f32_inside_agrees_with_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_scores(6, &mut rng);
        let z64 = inside(&s, None).unwrap();
        let z32 = inside(&s.cast::<f32>(), None).unwrap();
        assert!((z64 - z32 as f64).abs() < 1e-4);
    }
}
