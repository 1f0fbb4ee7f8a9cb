//! Label candidates against a reference and sample score-sorted groups.
//!
//!     cargo run --example build_preference_groups

use mathcurate::curation::ResponseCandidate;
use mathcurate::pairs::{label_candidates, score_sorted_sample, SampleStrategy, SamplerConfig};
use mathcurate::reward::features::BasicFeatures;
use mathcurate::CanonicalAnswer;

fn main() {
    let reference = CanonicalAnswer::rational(42, 1);
    let candidates = (0..32)
        .map(|i| {
            let answer = if i % 3 == 0 { 42 } else { 40 + i % 5 };
            let text = format!("Working step {i}.\nSo the result is \\boxed{{{answer}}}.");
            let prior = ((i * 37) % 100) as f64 / 100.0;
            (ResponseCandidate::new("q1", "policy", text), Some(prior))
        })
        .collect();
    let labeled = label_candidates("q1", "What is 6 times 7?", &reference, candidates);
    println!("positives {} negatives {}", labeled.positive_indices().len(), labeled.negative_indices().len());

    for strategy in [SampleStrategy::ScoreSorted, SampleStrategy::Random] {
        let cfg = SamplerConfig { strategy, ..SamplerConfig::default() };
        let group = score_sorted_sample(&labeled, &cfg, &BasicFeatures).unwrap().expect("both labels present");
        let prior = |id: &str| {
            let i: usize = id.rsplit('#').next().unwrap().parse().unwrap();
            labeled.candidates[i].prior_score.unwrap()
        };
        let pos: Vec<f64> = group.positives.iter().map(|m| prior(&m.response_id)).collect();
        let neg: Vec<f64> = group.negatives.iter().map(|m| prior(&m.response_id)).collect();
        println!("{strategy:?}: {} pairs, positive priors {pos:?}, negative priors {neg:?}", group.num_pairs());
    }
}
