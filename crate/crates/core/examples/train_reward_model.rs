//! Train a linear reward model with the listwise loss and compare objectives.
//!
//!     cargo run --release --example train_reward_model

use mathcurate::pairs::{GroupMember, PreferenceGroup};
use mathcurate::reward::{ranking_accuracy, train, LossKind, TrainerConfig};
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let d = 10;
    let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // noisy labels: a member is positive when its true score beats a jittered cut
    let member = |tag: String, rng: &mut rand_chacha::ChaCha8Rng| {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.3..0.3);
        (s, GroupMember { response_id: tag, features: x.into() })
    };
    let groups: Vec<PreferenceGroup> = (0..300)
        .map(|g| {
            let mut members: Vec<_> = (0..6).map(|i| member(format!("g{g}#{i}"), &mut rng)).collect();
            members.sort_by(|a, b| b.0.total_cmp(&a.0));
            let k = rng.gen_range(1..=5);
            let (pos, neg) = members.split_at(k);
            PreferenceGroup {
                problem_id: format!("g{g}"),
                positives: pos.iter().map(|m| m.1.clone()).collect(),
                negatives: neg.iter().map(|m| m.1.clone()).collect(),
                num_positive: k,
            }
        })
        .collect();
    let (train_set, held_out) = groups.split_at(240);

    for loss in LossKind::ALL {
        let cfg = TrainerConfig { loss, batch_size: 16, epochs: 20, ..TrainerConfig::default() };
        let out = train(train_set, &cfg).expect("training succeeds");
        let last = out.trace.last().unwrap();
        println!(
            "{loss:?}: {} steps, final loss {:.4}, held-out pair accuracy {:.3}",
            out.trace.len(),
            last.loss,
            ranking_accuracy(&out.params, held_out).unwrap()
        );
    }
}
