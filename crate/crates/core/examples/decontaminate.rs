//! Flag training prompts that overlap a benchmark, per domain rule.
//!
//!     cargo run --example decontaminate

use mathcurate::curation::{Domain, PromptRecord};
use mathcurate::decontam::{build_ngram_index, is_contaminated, DecontamConfig, DecontamMode, TestItem};

fn main() {
    let items = vec![TestItem {
        test_set: "bench".into(),
        id: "t1".into(),
        text: "A bag holds 4 red marbles and 6 blue marbles. If two marbles are drawn without replacement, \
               what is the probability that both are blue?"
            .into(),
    }];
    let config = DecontamConfig::default();
    let index = build_ngram_index(&items, &config);

    let prompts = [
        // near-verbatim copy
        PromptRecord::new("copy", "a bag holds 4 red marbles and 6 blue marbles; if two marbles are drawn without replacement, what is the probability that both are BLUE", "web"),
        // a borrowed 13-word span inside a much longer new problem
        PromptRecord::new(
            "span",
            "Consider a new game. Each player rolls three dice and records the total, then the dealer explains: \
             4 red marbles and 6 blue marbles. If two marbles are drawn without replacement we continue; \
             find the expected number of rounds until someone rolls eighteen, and justify every step carefully.",
            "web",
        ),
        PromptRecord::new("clean", "How many primes are less than 50?", "web"),
    ];
    for mode in [DecontamMode::Math, DecontamMode::General] {
        let cfg = DecontamConfig { mode, ..config.clone() };
        for p in &prompts {
            let d = is_contaminated(&p.clone().with_domain(Domain::Math), &index, &cfg);
            let lcs: Vec<String> = d.matches.iter().map(|m| format!("{}:{:.2}", m.id, m.lcs_fraction)).collect();
            println!("{mode:?} {:<6} contaminated={:<5} {lcs:?}", p.id, d.contaminated);
        }
    }
}
