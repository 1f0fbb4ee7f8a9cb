use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, RequestKind, TransportError};
use crate::answer::{answers_equivalent, parse_answer, CanonicalAnswer};
use crate::curation::ResponseCandidate;
use crate::pairs::PriorScorer;
use crate::seeding::{derive_seed, mix64, stable_hash, unit_interval};

/// Output mix of the offline generator. Rates are per response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StubConfig {
    pub correct_rate: f64,
    pub missing_box_rate: f64,
    pub repetition_rate: f64,
    /// Share of evolved prompts padded past typical length caps.
    pub long_prompt_rate: f64,
    /// Per-problem spread of the correct rate: a problem's rate is
    /// `correct_rate + spread * (0.5 - difficulty)` with difficulty uniform
    /// in `[0, 1)` by problem id, clamped to `[0, 1]`.
    pub difficulty_spread: f64,
}

impl Default for StubConfig {
    fn default() -> Self {
        StubConfig {
            correct_rate: 0.75,
            missing_box_rate: 0.03,
            repetition_rate: 0.02,
            long_prompt_rate: 0.03,
            difficulty_spread: 0.0,
        }
    }
}

impl StubConfig {
    pub fn always_correct() -> Self {
        StubConfig {
            correct_rate: 1.0,
            missing_box_rate: 0.0,
            repetition_rate: 0.0,
            long_prompt_rate: 0.0,
            difficulty_spread: 0.0,
        }
    }
}

/// Deterministic offline generator. Replies are a pure function of the
/// request key and model name; the request body only matters for
/// evolution, where the seed question is rewritten.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    config: StubConfig,
}

fn kind_code(kind: RequestKind) -> u64 {
    match kind {
        RequestKind::EvolveBreadth => 1,
        RequestKind::EvolveDepth => 2,
        RequestKind::EvolveConstraints => 3,
        RequestKind::Solution => 4,
        // second opinions share the solution stream, separated by model and sample
        RequestKind::CrossCheck => 4,
    }
}

impl StubBackend {
    pub fn new(config: StubConfig) -> Self {
        StubBackend { config }
    }

    /// Ground-truth answer the stub assigns to a problem id.
    pub fn truth(problem_id: &str) -> i64 {
        (stable_hash(problem_id) % 1000) as i64
    }

    pub fn truth_answer(problem_id: &str) -> CanonicalAnswer {
        CanonicalAnswer::rational(Self::truth(problem_id), 1)
    }

    /// Difficulty in `[0, 1)` the stub assigns to a problem id.
    pub fn difficulty(problem_id: &str) -> f64 {
        unit_interval(mix64(stable_hash(problem_id) ^ 0xd1ff_1c0e))
    }

    fn correct_rate(&self, problem_id: &str) -> f64 {
        let c = &self.config;
        (c.correct_rate + c.difficulty_spread * (0.5 - Self::difficulty(problem_id))).clamp(0.0, 1.0)
    }

    fn request_hash(model: &str, prompt_id: &str, kind: RequestKind, sample: u32) -> u64 {
        derive_seed(
            stable_hash(prompt_id),
            &[stable_hash(model), kind_code(kind), u64::from(sample)],
        )
    }

    /// Solution text for a problem, as the stub would produce it.
    pub fn solution_text(&self, model: &str, prompt_id: &str, kind: RequestKind, sample: u32) -> String {
        let h = Self::request_hash(model, prompt_id, kind, sample);
        let draw = |salt: u64| unit_interval(mix64(h ^ salt));
        let truth = Self::truth(prompt_id);
        let correct = draw(1) < self.correct_rate(prompt_id);

        let mut lines = vec!["We solve the problem step by step.".to_string()];
        let steps = 2 + (h % 4);
        for i in 1..=steps {
            let v = (mix64(h ^ (i << 8)) % 97) as i64;
            lines.push(format!(
                "Step {i}: simplify the expression to obtain an intermediate value of {v}."
            ));
        }
        if draw(2) < self.config.repetition_rate {
            lines.push("and so we continue and so we continue".into());
            lines.push("and so we continue ".repeat(40));
            return lines.join("\n");
        }
        // a noisy quality cue: usually present on correct work, sometimes not
        let verifies = draw(7) < if correct { 0.7 } else { 0.15 };
        if verifies {
            lines.push("Substituting back confirms the result.".into());
        }
        let answer = if correct {
            match mix64(h ^ 3) % 4 {
                0 => truth.to_string(),
                1 => format!("{truth}.0"),
                2 => format!("\\frac{{{}}}{{2}}", 2 * truth),
                _ => format!("\\dfrac{{{}}}{{3}}", 3 * truth),
            }
        } else {
            let offset = [1, -1, 10][(mix64(h ^ 4) % 3) as usize];
            (truth + offset).to_string()
        };
        if draw(5) < self.config.missing_box_rate {
            lines.push(format!("The final answer is {answer}."));
        } else {
            lines.push(format!("Therefore, the final answer is \\boxed{{{answer}}}."));
        }
        lines.join("\n")
    }

    fn evolution_text(&self, request: &ChatRequest) -> String {
        let key = &request.key;
        let h = Self::request_hash(&request.model, &key.prompt_id, key.kind, key.sample);
        let body = request.user_text();
        let seed = body
            .split_once("#Given MATH Question#:\n")
            .map(|(_, rest)| rest)
            .and_then(|rest| rest.split("\n\n#Created MATH Question#:").next())
            .unwrap_or(body);
        let shift = (h % 7 + 1) as u64;
        let rewritten = shift_numbers(seed.trim(), shift);
        let mut question = match key.kind {
            RequestKind::EvolveBreadth => format!("In a different setting, {rewritten}"),
            RequestKind::EvolveDepth => {
                format!("{rewritten} Then find the remainder when the result is divided by 7.")
            }
            _ => format!("{rewritten} The answer must also be a prime number."),
        };
        if unit_interval(mix64(h ^ 6)) < self.config.long_prompt_rate {
            question.push(' ');
            question.push_str(
                &"Justify every intermediate quantity in full detail before moving on. ".repeat(40),
            );
        }
        format!("Here is a new question.\n\n#Created MATH Question#:\n{}", question.trim_end())
    }
}

fn shift_numbers(text: &str, shift: u64) -> String {
    let mut out = String::with_capacity(text.len());
    let mut digits = String::new();
    let flush = |digits: &mut String, out: &mut String| {
        if !digits.is_empty() {
            match digits.parse::<u64>() {
                Ok(n) => out.push_str(&(n.saturating_add(shift)).to_string()),
                Err(_) => out.push_str(digits),
            }
            digits.clear();
        }
    };
    for c in text.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
        } else {
            flush(&mut digits, &mut out);
            out.push(c);
        }
    }
    flush(&mut digits, &mut out);
    out
}

impl ChatBackend for StubBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let key = &request.key;
        Ok(match key.kind {
            RequestKind::Solution | RequestKind::CrossCheck => {
                self.solution_text(&request.model, &key.prompt_id, key.kind, key.sample)
            }
            _ => self.evolution_text(request),
        })
    }
}

/// Hidden quality signal of stub responses: correct answers score higher on
/// average, with enough overlap that the ranking is imperfect.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubQualityScorer;

impl PriorScorer for StubQualityScorer {
    fn prior_score(&self, candidate: &ResponseCandidate) -> f64 {
        let u = unit_interval(derive_seed(
            stable_hash(&candidate.problem_id),
            &[stable_hash(&candidate.model_id), stable_hash(&candidate.text)],
        ));
        let truth = StubBackend::truth_answer(&candidate.problem_id);
        let correct = candidate
            .boxed_answer
            .as_deref()
            .and_then(|raw| parse_answer(raw).ok())
            .is_some_and(|a| answers_equivalent(&a, &truth));
        if correct {
            0.3 + 0.7 * u
        } else {
            0.7 * u
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::extract_boxed;

    #[test]
    fn correctness_rate_roughly_holds() {
        let stub = StubBackend::new(StubConfig {
            missing_box_rate: 0.0,
            repetition_rate: 0.0,
            ..Default::default()
        });
        let correct = (0..2000)
            .filter(|i| {
                let id = format!("p{i}");
                let text = stub.solution_text("m", &id, RequestKind::Solution, 0);
                let ans = parse_answer(&extract_boxed(&text).unwrap()).unwrap();
                answers_equivalent(&ans, &StubBackend::truth_answer(&id))
            })
            .count();
        assert!((1350..1650).contains(&correct), "{correct}");
    }

    #[test]
    fn difficulty_spreads_problem_rates() {
        let stub = StubBackend::new(StubConfig { correct_rate: 0.5, difficulty_spread: 1.0, ..StubConfig::always_correct() });
        let easy = (0..400).map(|i| format!("d{i}")).find(|id| StubBackend::difficulty(id) < 0.05).unwrap();
        let hard = (0..400).map(|i| format!("d{i}")).find(|id| StubBackend::difficulty(id) > 0.95).unwrap();
        assert!(stub.correct_rate(&easy) > 0.95);
        assert!(stub.correct_rate(&hard) < 0.05);
    }

    #[test]
    fn numbers_shift() {
        assert_eq!(shift_numbers("add 2 and 40.", 3), "add 5 and 43.");
    }

    #[test]
    fn quality_separates_on_average() {
        let stub = StubBackend::default();
        let (mut good, mut bad) = (Vec::new(), Vec::new());
        for i in 0..500 {
            let id = format!("q{i}");
            let cand = ResponseCandidate::new(&id, "m", stub.solution_text("m", &id, RequestKind::Solution, 0));
            let s = StubQualityScorer.prior_score(&cand);
            let truth = StubBackend::truth_answer(&id);
            let ok = cand
                .boxed_answer
                .as_deref()
                .and_then(|r| parse_answer(r).ok())
                .is_some_and(|a| answers_equivalent(&a, &truth));
            if ok { good.push(s) } else { bad.push(s) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&good) > mean(&bad) + 0.2);
    }
}
