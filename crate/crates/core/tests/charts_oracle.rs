use latent_ssa::charts::{
    brute_force, inside, marginals, tree_score, viterbi, BruteMode, ConstraintMask, ScoreSet,
};
use latent_ssa::constraints::{build_stage1_mask, build_stage2_mask, SentimentTuple, Span};
use latent_ssa::labels::Polarity;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scores(n: usize, rng: &mut ChaCha8Rng) -> ScoreSet<f64> {
    let mut s = ScoreSet::zeros(n);
    for x in s.arc_table_mut() {
        *x = rng.gen_range(-3.0..3.0);
    }
    for x in s.sib_table_mut() {
        *x = rng.gen_range(-3.0..3.0);
    }
    for x in s.span_left_table_mut() {
        *x = rng.gen_range(-3.0..3.0);
    }
    for x in s.span_right_table_mut() {
        *x = rng.gen_range(-3.0..3.0);
    }
    s
}

fn random_span(n: usize, rng: &mut ChaCha8Rng) -> Span {
    let a = rng.gen_range(0..n);
    let b = (a + rng.gen_range(0..3)).min(n - 1);
    Span::new(a, b)
}

fn random_mask(n: usize, rng: &mut ChaCha8Rng) -> ConstraintMask {
    loop {
        if rng.gen_bool(0.5) {
            let e = random_span(n, rng);
            let t = SentimentTuple::new(vec![], vec![], vec![e], Polarity::Positive);
            if let Ok((m, _)) = build_stage1_mask(n, &[t]) {
                return m;
            }
        } else {
            let e = random_span(n, rng);
            let h = random_span(n, rng);
            let holders = if h.overlaps(&e) { vec![] } else { vec![h] };
            if let Ok((m, _)) = build_stage2_mask(n, &[e], &holders, &[]) {
                return m;
            }
        }
    }
}

#[test]
fn inside_and_viterbi_match_oracle_under_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in 1..=6 {
        for _ in 0..25 {
            let s = random_scores(n, &mut rng);
            let mask = random_mask(n, &mut rng);
            let z = inside(&s, Some(&mask)).unwrap();
            let b = brute_force(&s, Some(&mask), BruteMode::Sum).unwrap();
            assert!(b.count > 0);
            assert!((z - b.value).abs() <= 1e-9, "n={} {} vs {}", n, z, b.value);
            assert!(z <= inside(&s, None).unwrap() + 1e-12);

            let (tree, score) = viterbi(&s, Some(&mask), None).unwrap();
            let bm = brute_force(&s, Some(&mask), BruteMode::Max).unwrap();
            assert!((score - bm.value).abs() <= 1e-9);
            assert!(mask.permits(&tree));
            assert!((tree_score(&s, &tree).unwrap() - score).abs() <= 1e-9);
        }
    }
}

#[test]
fn masked_marginals_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 2..=5 {
        let s = random_scores(n, &mut rng);
        let mask = random_mask(n, &mut rng);
        let m = marginals(&s, Some(&mask)).unwrap();
        let step = 1e-4;
        for p in ScoreSet::<f64>::valid_parts(n) {
            let mut plus = s.clone();
            *plus.part_mut(p) += step;
            let mut minus = s.clone();
            *minus.part_mut(p) -= step;
            let fd = (inside(&plus, Some(&mask)).unwrap() - inside(&minus, Some(&mask)).unwrap()) / (2.0 * step);
            let got = m.part(p);
            assert!(
                (fd - got).abs() <= 1e-4 * fd.abs().max(got.abs()).max(1e-4),
                "{:?}: {} vs {}",
                p,
                fd,
                got
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_score_never_exceeds_partition(seed in 0u64..10_000, n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scores(n, &mut rng);
        let z = inside(&s, None).unwrap();
        let (tree, best) = viterbi(&s, None, None).unwrap();
        prop_assert!(best <= z + 1e-12);
        for (l, r) in tree.yields().into_iter().skip(1) {
            prop_assert!(l <= r);
        }
    }
}
