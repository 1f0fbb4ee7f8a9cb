//! Exact and sampled best-of-n metrics on a tiny pool.
//!
//!     cargo run --example best_of_n_eval

use mathcurate::bon::{
    evaluate_benchmark, majority_at_n_exact, pass_at_n, rm_at_n, rm_at_n_exact, CandidatePool, Dataset, EvalConfig,
    EvalMode, PoolCandidate, StoredScore,
};
use mathcurate::CanonicalAnswer;

fn main() {
    // scores 3, 1, 2, 0; only the two lowest-scored candidates are right
    let reference = CanonicalAnswer::rational(7, 1);
    let answers = [8, 7, 8, 7];
    let pool = CandidatePool::new(
        "toy",
        [3.0, 1.0, 2.0, 0.0]
            .iter()
            .zip(answers)
            .map(|(&s, a)| PoolCandidate::with_answer(s, Some(CanonicalAnswer::rational(a, 1)), &reference))
            .collect(),
    );
    println!("rm@2 exact       = {}", rm_at_n_exact(&pool, 2).unwrap());
    println!("majority@2 exact = {}", majority_at_n_exact(&pool, 2).unwrap());
    println!("pass@2           = {}", pass_at_n(4, pool.num_correct(), 2).unwrap());
    let sampled = rm_at_n(&pool, &EvalConfig { n: 2, pool_size: 4, num_seeds: 10_000, ..EvalConfig::default() }).unwrap();
    println!("rm@2 sampled     = {:.4} (std {:.4} over {} seeds)", sampled.mean, sampled.std, sampled.num_seeds);

    let datasets = vec![Dataset { name: "toy".into(), pools: vec![pool] }];
    let cfg = EvalConfig { n: 2, pool_size: 4, mode: EvalMode::Exact, ..EvalConfig::default() };
    let report = evaluate_benchmark(&datasets, &StoredScore, &cfg).unwrap();
    println!("\n{}", report.to_table());
}
