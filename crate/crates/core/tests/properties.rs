//! Property tests for invariants that hold across the pipeline.

use std::collections::HashSet;

use mathcurate::answer::{answers_equivalent, parse_answer, CanonicalAnswer};
use mathcurate::bon::{pass_at_n, rm_at_n_exact, CandidatePool, PoolCandidate};
use mathcurate::curation::{dedup_prompts, detect_repetition, CurationConfig, PromptRecord, ResponseCandidate};
use mathcurate::decontam::{lcs_len, normalize_text};
use mathcurate::gateway::cross_check_labels;
use mathcurate::pairs::{label_candidates, select_group, SampleStrategy, SamplerConfig};
use mathcurate::reward::listwise_bt_loss;
use proptest::prelude::*;

fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    // exponential recursion, fine for the short inputs generated here
    fn go(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (Some((x, ra)), Some((y, rb))) if x == y => 1 + go(ra, rb),
            (Some((_, ra)), Some((_, rb))) => go(ra, b).max(go(a, rb)),
            _ => 0,
        }
    }
    go(a, b)
}

fn brute_repetition(tokens: &[&str], cfg: &CurationConfig) -> bool {
    let r = cfg.repetition_min_repeats;
    (cfg.repetition_block_min..=cfg.repetition_block_max).any(|l| {
        (0..tokens.len()).any(|s| {
            s + l * r <= tokens.len() && (1..r).all(|i| tokens[s + i * l..s + (i + 1) * l] == tokens[s..s + l])
        })
    })
}

fn pool(scores: &[i32], labels: &[bool]) -> CandidatePool {
    CandidatePool::new(
        "p",
        scores.iter().zip(labels).map(|(&s, &l)| PoolCandidate::labeled(s as f64, l)).collect(),
    )
}

fn pool_strategy() -> impl Strategy<Value = (Vec<i32>, Vec<bool>, usize)> {
    (1usize..=8).prop_flat_map(|size| {
        (
            prop::collection::vec(-3i32..3, size),
            prop::collection::vec(any::<bool>(), size),
            1..=size,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rational_renderings_are_equivalent(p in -10_000i64..10_000, q in 1i64..500) {
        let a = parse_answer(&format!("{p}/{q}")).unwrap();
        let b = parse_answer(&format!("\\frac{{{}}}{{{}}}", 2 * p, 2 * q)).unwrap();
        let c = CanonicalAnswer::rational(-p, -q);
        prop_assert!(answers_equivalent(&a, &a));
        prop_assert!(answers_equivalent(&a, &b) && answers_equivalent(&b, &a));
        prop_assert!(answers_equivalent(&b, &c) && answers_equivalent(&a, &c));
        let off = parse_answer(&format!("{}/{q}", p + 1)).unwrap();
        prop_assert!(!answers_equivalent(&a, &off));
    }

    #[test]
    fn dedup_is_idempotent_and_case_blind(texts in prop::collection::vec("[a-cA-C ]{0,6}", 0..30)) {
        let records: Vec<PromptRecord> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| PromptRecord::new(format!("r{i}"), t.clone(), "prop"))
            .collect();
        let once = dedup_prompts(&records);
        prop_assert_eq!(&dedup_prompts(&once), &once);
        let upper: Vec<PromptRecord> = records
            .iter()
            .map(|r| PromptRecord { text: r.text.to_uppercase(), ..r.clone() })
            .collect();
        let ids = |v: &[PromptRecord]| v.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&dedup_prompts(&upper)), ids(&once));
        let distinct: HashSet<String> = texts.iter().map(|t| t.to_lowercase()).collect();
        prop_assert_eq!(once.len(), distinct.len());
    }

    #[test]
    fn normalization_is_idempotent(text in "[a-zA-Z0-9 ,.!?$\\\\{}()-]{0,60}") {
        let once = normalize_text(&text);
        prop_assert_eq!(normalize_text(&once.join(" ")), once);
    }

    #[test]
    fn repetition_matches_brute_force(tokens in prop::collection::vec(prop::sample::select(vec!["a", "b"]), 0..40)) {
        let cfg = CurationConfig {
            repetition_block_min: 2,
            repetition_block_max: 4,
            repetition_min_repeats: 3,
            ..CurationConfig::default()
        };
        prop_assert_eq!(detect_repetition(&tokens.join(" "), &cfg), brute_repetition(&tokens, &cfg));
    }

    #[test]
    fn lcs_matches_brute_force(a in prop::collection::vec(0u8..3, 0..10), b in prop::collection::vec(0u8..3, 0..10)) {
        let fast = lcs_len(&a, &b);
        prop_assert_eq!(fast, brute_lcs(&a, &b));
        prop_assert_eq!(fast, lcs_len(&b, &a));
    }

    #[test]
    fn cross_check_is_symmetric_in_the_second_opinions(x in -3i64..3, y in -3i64..3, z in -3i64..3) {
        let (p, s1, s2) = (CanonicalAnswer::rational(x, 1), CanonicalAnswer::rational(y, 1), CanonicalAnswer::rational(z, 1));
        prop_assert_eq!(cross_check_labels(&p, [&s1, &s2]), cross_check_labels(&p, [&s2, &s1]));
        prop_assert_eq!(cross_check_labels(&p, [&s1, &s2]), x == y && y == z);
    }

    #[test]
    fn listwise_loss_falls_as_positives_rise(
        pos in prop::collection::vec(-5.0f64..5.0, 1..4),
        neg in prop::collection::vec(-5.0f64..5.0, 1..4),
        bump in 0.01f64..3.0,
        c in -100.0f64..100.0,
    ) {
        let base = listwise_bt_loss(&pos, &neg).unwrap();
        let raised: Vec<f64> = pos.iter().map(|p| p + bump).collect();
        prop_assert!(listwise_bt_loss(&raised, &neg).unwrap() < base);
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        prop_assert!((listwise_bt_loss(&shift(&pos), &shift(&neg)).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn pass_at_n_is_monotone_in_n(total in 1usize..20, c_frac in 0.0f64..1.0) {
        let c = (c_frac * total as f64) as usize;
        let values: Vec<_> = (0..=total).map(|k| pass_at_n(total, c, k).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rm_at_n_ignores_positive_rescaling((scores, labels, n) in pool_strategy(), a in 1i32..5, b in -10i32..10) {
        let original = rm_at_n_exact(&pool(&scores, &labels), n).unwrap();
        let scaled: Vec<i32> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(rm_at_n_exact(&pool(&scaled, &labels), n).unwrap(), original.clone());
        let pass = pass_at_n(scores.len(), labels.iter().filter(|l| **l).count(), n).unwrap();
        prop_assert!(original <= pass);
    }

    #[test]
    fn groups_never_repeat_a_response(
        num_pos in 1usize..20,
        num_neg in 1usize..20,
        seed in any::<u64>(),
        random in any::<bool>(),
    ) {
        let reference = CanonicalAnswer::rational(1, 1);
        let cands = (0..num_pos + num_neg)
            .map(|i| {
                let ans = if i < num_pos { 1 } else { 2 };
                let score = ((i as u64).wrapping_mul(seed | 1) % 97) as f64;
                (ResponseCandidate::new("q", "m", format!("\\boxed{{{ans}}}")), Some(score))
            })
            .collect();
        let labeled = label_candidates("q", "", &reference, cands);
        let strategy = if random { SampleStrategy::Random } else { SampleStrategy::ScoreSorted };
        let cfg = SamplerConfig { strategy, seed, ..SamplerConfig::default() };
        let sel = select_group(&labeled, &cfg).unwrap().unwrap();
        let all: Vec<usize> = sel.positives.iter().chain(&sel.negatives).copied().collect();
        let unique: HashSet<usize> = all.iter().copied().collect();
        prop_assert_eq!(unique.len(), all.len());
        prop_assert!(sel.positives.iter().all(|&i| labeled.candidates[i].is_positive()));
        prop_assert!(sel.negatives.iter().all(|&i| !labeled.candidates[i].is_positive()));
        prop_assert_eq!(all.len(), cfg.group_size.min(num_pos + num_neg));
    }
}
