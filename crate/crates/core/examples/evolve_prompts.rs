//! Evolve seed prompts and generate solutions through the offline stub backend.
//!
//!     cargo run --example evolve_prompts

use mathcurate::curation::PromptRecord;
use mathcurate::gateway::{EvolutionMode, Gateway, GeneratorConfig, RequestKind};

fn main() {
    let gateway = Gateway::new(GeneratorConfig::default()).expect("stub backend needs no endpoint");
    let seeds = vec![
        PromptRecord::new("s1", "Ava has 12 apples and gives away 5. How many are left?", "seed"),
        PromptRecord::new("s2", "What is the sum of the first 10 positive integers?", "seed"),
    ];
    for mode in [EvolutionMode::Breadth, EvolutionMode::Depth] {
        let (created, failed) = gateway.evolve_prompts(&seeds, mode).expect("templates are enabled");
        for p in &created {
            println!("[{:?}] {} -> {}", p.origin, p.id, p.text);
        }
        assert!(failed.is_empty());
    }
    // the constraint template stays off unless configured
    println!("constraints: {:?}", gateway.evolve_prompt(&seeds[0], EvolutionMode::Constraints).unwrap_err().to_string());

    let (solutions, _) = gateway.generate_solutions(&seeds, RequestKind::Solution, 2);
    for s in solutions {
        println!("{} {}: {:?}", s.problem_id, s.model_id, s.boxed_answer);
    }
}
