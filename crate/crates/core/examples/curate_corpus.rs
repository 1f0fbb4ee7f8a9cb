//! Deduplicate prompts, filter responses, and compose an SFT blend.
//!
//!     cargo run --example curate_corpus

use mathcurate::curation::{
    compose_blend, dedup_prompts, filter_response, BlendSource, CurationConfig, PromptRecord, ResponseCandidate,
    SelectionRule,
};

fn main() {
    let prompts = vec![
        PromptRecord::new("a", "What is 7 times 8?", "seed"),
        PromptRecord::new("b", "WHAT IS 7 TIMES 8?", "seed"),
        PromptRecord::new("c", "Find the area of a 3 by 4 rectangle.", "seed"),
    ];
    let unique = dedup_prompts(&prompts);
    println!("dedup: {} -> {} prompts", prompts.len(), unique.len());

    let config = CurationConfig::default();
    let responses = [
        ResponseCandidate::new("a", "m", "7 * 8 = 56, so \\boxed{56}."),
        ResponseCandidate::new("c", "m", "The area is twelve square units."),
        ResponseCandidate::new("c", "m", format!("{}\\boxed{{12}}", "and then ".repeat(30))),
    ];
    for r in &responses {
        let outcome = filter_response(r, &config);
        let failed: Vec<&str> = outcome.failed_checks().collect();
        println!("{} passed={} failed={:?}", r.problem_id, outcome.passed, failed);
    }

    let extra = vec![PromptRecord::new("d", "Compute 2^10.", "synthetic"), PromptRecord::new("a", "dup id", "synthetic")];
    let blend = compose_blend(
        &[
            BlendSource { name: "seeds".into(), records: &unique, rule: SelectionRule::All, target: None },
            BlendSource { name: "synthetic".into(), records: &extra, rule: SelectionRule::All, target: None },
        ],
        0,
    )
    .expect("sources are large enough");
    let ids: Vec<&str> = blend.iter().map(|r| r.id.as_str()).collect();
    println!("blend: {ids:?}");
}
