//! Requests to generator models: prompt evolution, solution generation and
//! cross-check second opinions.
//!
//! Every request goes through a [`ChatBackend`]. Two backends ship with the
//! crate: [`HttpBackend`] speaks the OpenAI-compatible chat-completions
//! protocol, and [`StubBackend`] answers deterministically from a hash of
//! the request key so whole pipelines can run offline with known ground
//! truth.

mod http;
mod stub;
pub mod templates;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::{answers_equivalent, CanonicalAnswer};
use crate::curation::{Origin, PromptRecord, ResponseCandidate};

pub use http::HttpBackend;
pub use stub::{StubBackend, StubConfig, StubQualityScorer};
use templates::{CREATED_MARKER, SEED_SLOT, STEP_BY_STEP_INSTRUCTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Full chat-completions URL, e.g. `http://host:8000/v1/chat/completions`.
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_ms: u64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub retry_base_delay_ms: u64,
    pub max_in_flight: usize,
    pub backend: BackendKind,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Re-enables the constraint-adding evolution template.
    pub enable_constraint_evolution: bool,
    pub transcript_path: Option<PathBuf>,
    pub stub: StubConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            endpoint_url: String::new(),
            model_name: "stub-large".into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            request_timeout_ms: 60_000,
            max_retries: 3,
            retry_base_delay_ms: 500,
            max_in_flight: 8,
            backend: BackendKind::Stub,
            api_key_env: "GENERATOR_API_KEY".into(),
            enable_constraint_evolution: false,
            transcript_path: None,
            stub: StubConfig::default(),
        }
    }
}

impl GeneratorConfig {
    /// Defaults for the weaker cross-check generator, which samples twice.
    pub fn cross_check_default() -> Self {
        GeneratorConfig {
            model_name: "stub-mini".into(),
            temperature: 0.7,
            stub: StubConfig {
                correct_rate: 0.6,
                ..StubConfig::default()
            },
            ..GeneratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.backend == BackendKind::Http && self.endpoint_url.trim().is_empty() {
            return Err("generator.endpoint_url is required for the http backend".into());
        }
        if !(self.temperature >= 0.0) {
            return Err("generator.temperature must be non-negative".into());
        }
        if self.max_in_flight == 0 {
            return Err("generator.max_in_flight must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Breadth,
    Depth,
    /// Constraint-adding rewrite; rejected unless enabled in the config.
    Constraints,
}

impl EvolutionMode {
    pub fn template(self) -> &'static str {
        match self {
            EvolutionMode::Breadth => templates::BREADTH_TEMPLATE,
            EvolutionMode::Depth => templates::DEPTH_TEMPLATE,
            EvolutionMode::Constraints => templates::CONSTRAINTS_TEMPLATE,
        }
    }

    pub fn origin(self) -> Origin {
        match self {
            EvolutionMode::Breadth => Origin::SyntheticBreadth,
            EvolutionMode::Depth | EvolutionMode::Constraints => Origin::SyntheticDepth,
        }
    }

    fn kind(self) -> RequestKind {
        match self {
            EvolutionMode::Breadth => RequestKind::EvolveBreadth,
            EvolutionMode::Depth => RequestKind::EvolveDepth,
            EvolutionMode::Constraints => RequestKind::EvolveConstraints,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    EvolveBreadth,
    EvolveDepth,
    EvolveConstraints,
    Solution,
    CrossCheck,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::EvolveBreadth => "evolve_breadth",
            RequestKind::EvolveDepth => "evolve_depth",
            RequestKind::EvolveConstraints => "evolve_constraints",
            RequestKind::Solution => "solution",
            RequestKind::CrossCheck => "cross_check",
        }
    }
}

/// Identity of a request, independent of its wire body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestKey {
    pub prompt_id: String,
    pub kind: RequestKind,
    pub sample: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Chat-completions request body. `key` is not sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip)]
    pub key: RequestKey,
}

impl ChatRequest {
    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unusable response: {0}")]
    BadResponse(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Transport(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::BadResponse(_) => false,
        }
    }
}

/// Anything that can answer a chat request.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// A request that did not produce a response after all retries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedGeneration {
    pub problem_id: String,
    pub model_id: String,
    pub kind: RequestKind,
    pub sample: u32,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("generator configuration: {0}")]
    Config(String),
    #[error("constraint evolution is disabled (set enable_constraint_evolution to use it)")]
    ConstraintEvolutionDisabled,
    #[error("seed prompt `{0}` is empty")]
    EmptySeed(String),
    #[error("generation for `{}` failed after {} attempts: {}", .0.problem_id, .0.attempts, .0.error)]
    Failed(FailedGeneration),
}

#[derive(Serialize)]
struct TranscriptEntry<'a> {
    key: &'a RequestKey,
    request: &'a ChatRequest,
    attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Retrying, concurrency-bounded front end over a backend.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: GeneratorConfig,
    pool: rayon::ThreadPool,
}

type Outcome = Result<(String, u32), (TransportError, u32)>;

impl Gateway {
    /// Builds the backend named in `config`.
    pub fn new(config: GeneratorConfig) -> Result<Self, GatewayError> {
        config.validate().map_err(GatewayError::Config)?;
        let backend: Arc<dyn ChatBackend> = match config.backend {
            BackendKind::Stub => Arc::new(StubBackend::new(config.stub.clone())),
            BackendKind::Http => Arc::new(HttpBackend::from_config(&config)),
        };
        Self::with_backend(config, backend)
    }

    pub fn with_backend(
        config: GeneratorConfig,
        backend: Arc<dyn ChatBackend>,
    ) -> Result<Self, GatewayError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_in_flight.max(1))
            .thread_name(|i| format!("gateway-{i}"))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Gateway {
            backend,
            config,
            pool,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    fn base_request(&self, key: RequestKey, content: String) -> ChatRequest {
        ChatRequest {
            model: self.config.model_name.clone(),
            messages: vec![ChatMessage::user(content)],
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
            key,
        }
    }

    /// Evolution request for one seed.
    pub fn evolve_request(
        &self,
        seed: &PromptRecord,
        mode: EvolutionMode,
    ) -> Result<ChatRequest, GatewayError> {
        if mode == EvolutionMode::Constraints && !self.config.enable_constraint_evolution {
            return Err(GatewayError::ConstraintEvolutionDisabled);
        }
        if seed.text.trim().is_empty() {
            return Err(GatewayError::EmptySeed(seed.id.clone()));
        }
        let body = mode.template().replacen(SEED_SLOT, &seed.text, 1);
        let key = RequestKey {
            prompt_id: seed.id.clone(),
            kind: mode.kind(),
            sample: 0,
        };
        Ok(self.base_request(key, body))
    }

    /// Solution request: the prompt followed by the step-by-step instruction.
    pub fn solution_request(&self, prompt: &PromptRecord, kind: RequestKind, sample: u32) -> ChatRequest {
        let key = RequestKey {
            prompt_id: prompt.id.clone(),
            kind,
            sample,
        };
        let content = format!("{}\n{}", prompt.text, STEP_BY_STEP_INSTRUCTION);
        self.base_request(key, content)
    }

    fn attempt(&self, request: &ChatRequest) -> Outcome {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.backend.complete(request) {
                Ok(text) => return Ok((text, attempts)),
                Err(e) if e.retryable() && attempts <= self.config.max_retries => {
                    let delay = self
                        .config
                        .retry_base_delay_ms
                        .saturating_mul(1u64 << (attempts - 1).min(16));
                    log::debug!(
                        "{} {}: attempt {attempts} failed ({e}); retrying in {delay} ms",
                        request.key.prompt_id,
                        request.key.kind.as_str()
                    );
                    std::thread::sleep(Duration::from_millis(delay));
                }
                Err(e) => return Err((e, attempts)),
            }
        }
    }

    /// Issues every request with at most `max_in_flight` outstanding and
    /// returns outcomes in request order.
    pub fn run_all(&self, requests: &[ChatRequest]) -> Vec<Result<String, FailedGeneration>> {
        let raw: Vec<Outcome> = self
            .pool
            .install(|| requests.par_iter().map(|r| self.attempt(r)).collect());
        if let Some(path) = &self.config.transcript_path {
            if let Err(e) = self.append_transcript(path, requests, &raw) {
                log::warn!("transcript not written: {e}");
            }
        }
        requests
            .iter()
            .zip(raw)
            .map(|(req, outcome)| {
                outcome.map(|(text, _)| text).map_err(|(err, attempts)| FailedGeneration {
                    problem_id: req.key.prompt_id.clone(),
                    model_id: req.model.clone(),
                    kind: req.key.kind,
                    sample: req.key.sample,
                    attempts,
                    error: err.to_string(),
                })
            })
            .collect()
    }

    fn append_transcript(
        &self,
        path: &PathBuf,
        requests: &[ChatRequest],
        outcomes: &[Outcome],
    ) -> crate::error::Result<()> {
        use std::io::Write;
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| crate::error::Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for (request, outcome) in requests.iter().zip(outcomes) {
            let (attempts, response, error) = match outcome {
                Ok((text, a)) => (*a, Some(text.as_str()), None),
                Err((e, a)) => (*a, None, Some(e.to_string())),
            };
            let entry = TranscriptEntry {
                key: &request.key,
                request,
                attempts,
                response,
                error: error.as_deref(),
            };
            let line = serde_json::to_string(&entry).expect("transcript entry serializes");
            writeln!(out, "{line}").map_err(|e| crate::error::Error::io(path, e))?;
        }
        out.flush().map_err(|e| crate::error::Error::io(path, e))
    }

    /// Evolves one seed into a synthetic prompt with id `<seed>:<mode>`.
    pub fn evolve_prompt(
        &self,
        seed: &PromptRecord,
        mode: EvolutionMode,
    ) -> Result<PromptRecord, GatewayError> {
        let (mut ok, mut failed) = self.evolve_prompts(std::slice::from_ref(seed), mode)?;
        match failed.pop() {
            Some(f) => Err(GatewayError::Failed(f)),
            None => Ok(ok.remove(0)),
        }
    }

    /// Evolves every seed; failures are returned alongside successes.
    pub fn evolve_prompts(
        &self,
        seeds: &[PromptRecord],
        mode: EvolutionMode,
    ) -> Result<(Vec<PromptRecord>, Vec<FailedGeneration>), GatewayError> {
        let requests = seeds
            .iter()
            .map(|s| self.evolve_request(s, mode))
            .collect::<Result<Vec<_>, _>>()?;
        let mut created = Vec::new();
        let mut failed = Vec::new();
        for (seed, outcome) in seeds.iter().zip(self.run_all(&requests)) {
            match outcome {
                Ok(reply) => {
                    let mut record = PromptRecord {
                        id: format!("{}:{}", seed.id, mode_suffix(mode)),
                        text: strip_to_created_question(&reply),
                        source: seed.source.clone(),
                        domain: seed.domain,
                        origin: mode.origin(),
                        style_tag: seed.style_tag.clone(),
                        extra: Default::default(),
                    };
                    record
                        .extra
                        .insert("seed_id".into(), serde_json::Value::String(seed.id.clone()));
                    created.push(record);
                }
                Err(f) => failed.push(f),
            }
        }
        Ok((created, failed))
    }

    /// One greedy solution per prompt (or `samples` sampled ones).
    pub fn generate_solutions(
        &self,
        prompts: &[PromptRecord],
        kind: RequestKind,
        samples: u32,
    ) -> (Vec<ResponseCandidate>, Vec<FailedGeneration>) {
        let requests: Vec<ChatRequest> = prompts
            .iter()
            .flat_map(|p| (0..samples).map(move |s| (p, s)))
            .map(|(p, s)| self.solution_request(p, kind, s))
            .collect();
        let mut ok = Vec::new();
        let mut failed = Vec::new();
        for (req, outcome) in requests.iter().zip(self.run_all(&requests)) {
            match outcome {
                Ok(text) => {
                    let mut cand = ResponseCandidate::new(&req.key.prompt_id, &req.model, text);
                    if samples > 1 || kind != RequestKind::Solution {
                        cand.extra.insert("sample".into(), req.key.sample.into());
                    }
                    ok.push(cand);
                }
                Err(f) => failed.push(f),
            }
        }
        (ok, failed)
    }

    pub fn generate_solution(&self, prompt: &PromptRecord) -> Result<ResponseCandidate, FailedGeneration> {
        let (mut ok, mut failed) =
            self.generate_solutions(std::slice::from_ref(prompt), RequestKind::Solution, 1);
        match failed.pop() {
            Some(f) => Err(f),
            None => Ok(ok.remove(0)),
        }
    }
}

fn mode_suffix(mode: EvolutionMode) -> &'static str {
    match mode {
        EvolutionMode::Breadth => "breadth",
        EvolutionMode::Depth => "depth",
        EvolutionMode::Constraints => "constraints",
    }
}

/// Drops everything up to and including the created-question marker.
pub fn strip_to_created_question(reply: &str) -> String {
    match reply.rfind(CREATED_MARKER) {
        Some(pos) => reply[pos + CREATED_MARKER.len()..].trim().to_string(),
        None => reply.trim().to_string(),
    }
}

/// High-quality flag: both second opinions agree with each other and with
/// the primary answer.
pub fn cross_check_labels(primary: &CanonicalAnswer, secondary: [&CanonicalAnswer; 2]) -> bool {
    answers_equivalent(secondary[0], secondary[1])
        && answers_equivalent(secondary[0], primary)
        && answers_equivalent(secondary[1], primary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::parse_answer;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn seed() -> PromptRecord {
        PromptRecord::new("s1", "What is 2 + 3?", "unit")
    }

    fn stub_gateway() -> Gateway {
        Gateway::new(GeneratorConfig::default()).unwrap()
    }

    #[test]
    fn breadth_and_depth_templates() {
        let gw = stub_gateway();
        let breadth = gw.evolve_request(&seed(), EvolutionMode::Breadth).unwrap();
        let text = breadth.user_text();
        assert!(text.contains("brand new math question"));
        assert!(text.contains("distinctly different"));
        assert!(text.contains("What is 2 + 3?"));
        assert!(!text.contains(SEED_SLOT));
        let depth = gw.evolve_request(&seed(), EvolutionMode::Depth).unwrap();
        assert!(depth.user_text().contains("more complex and"));
        assert!(depth.user_text().contains("challenging"));
    }

    #[test]
    fn constraint_template_is_gated() {
        let gw = stub_gateway();
        assert_eq!(
            gw.evolve_request(&seed(), EvolutionMode::Constraints),
            Err(GatewayError::ConstraintEvolutionDisabled)
        );
        let enabled = Gateway::new(GeneratorConfig {
            enable_constraint_evolution: true,
            ..Default::default()
        })
        .unwrap();
        let req = enabled.evolve_request(&seed(), EvolutionMode::Constraints).unwrap();
        assert!(req.user_text().contains("additional constraints"));
    }

    #[test]
    fn empty_seed_rejected() {
        let gw = stub_gateway();
        let empty = PromptRecord::new("e", "  ", "unit");
        assert_eq!(
            gw.evolve_request(&empty, EvolutionMode::Breadth),
            Err(GatewayError::EmptySeed("e".into()))
        );
    }

    #[test]
    fn marker_stripping() {
        assert_eq!(strip_to_created_question("junk\n#Created MATH Question#:\n Q? "), "Q?");
        assert_eq!(strip_to_created_question("  just a question "), "just a question");
    }

    #[test]
    fn stub_evolution_is_deterministic() {
        let gw = stub_gateway();
        let a = gw.evolve_prompt(&seed(), EvolutionMode::Breadth).unwrap();
        let b = gw.evolve_prompt(&seed(), EvolutionMode::Breadth).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.id, "s1:breadth");
        assert_eq!(a.origin, Origin::SyntheticBreadth);
        assert!(!a.text.contains(CREATED_MARKER));
    }

    #[test]
    fn solution_message_carries_instruction() {
        let gw = stub_gateway();
        let req = gw.solution_request(&seed(), RequestKind::Solution, 0);
        assert_eq!(
            req.user_text(),
            "What is 2 + 3?\nPlease reason step by step, and put your final answer within \\boxed{}."
        );
        let body = serde_json::to_value(&req).unwrap();
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["max_tokens"], 4096);
        assert!(body.get("key").is_none());
    }

    #[test]
    fn stub_solution_boxes_hashed_truth() {
        let cfg = GeneratorConfig {
            stub: StubConfig::always_correct(),
            ..Default::default()
        };
        let gw = Gateway::new(cfg).unwrap();
        let prompt = seed();
        let cand = gw.generate_solution(&prompt).unwrap();
        let truth = StubBackend::truth(&prompt.id);
        let boxed = cand.boxed_answer.clone().unwrap();
        assert!(answers_equivalent(
            &parse_answer(&boxed).unwrap(),
            &CanonicalAnswer::rational(truth, 1)
        ));
        let again = gw.generate_solution(&prompt).unwrap();
        assert_eq!(cand.text, again.text);
    }

    struct Flaky {
        failures_left: AtomicU32,
        calls: AtomicU32,
    }

    impl ChatBackend for Flaky {
        fn complete(&self, _: &ChatRequest) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                Err(TransportError::Transport("reset".into()))
            } else {
                Ok("\\boxed{1}".into())
            }
        }
    }

    fn fast_config(max_retries: u32) -> GeneratorConfig {
        GeneratorConfig {
            max_retries,
            retry_base_delay_ms: 1,
            ..Default::default()
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let backend = Arc::new(Flaky {
            failures_left: AtomicU32::new(2),
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::with_backend(fast_config(3), backend.clone()).unwrap();
        let cand = gw.generate_solution(&seed()).unwrap();
        assert_eq!(cand.boxed_answer.as_deref(), Some("1"));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn exhausted_retries_yield_failure_record() {
        let backend = Arc::new(Flaky {
            failures_left: AtomicU32::new(100),
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::with_backend(fast_config(2), backend.clone()).unwrap();
        let failed = gw.generate_solution(&seed()).unwrap_err();
        assert_eq!(failed.attempts, 3);
        assert_eq!(failed.problem_id, "s1");
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn unreachable_http_endpoint_fails_after_retries() {
        let cfg = GeneratorConfig {
            backend: BackendKind::Http,
            endpoint_url: "http://127.0.0.1:9/v1/chat/completions".into(),
            request_timeout_ms: 500,
            ..fast_config(2)
        };
        let gw = Gateway::new(cfg).unwrap();
        let failed = gw.generate_solution(&seed()).unwrap_err();
        assert_eq!(failed.attempts, 3);
        assert_eq!(failed.kind, RequestKind::Solution);
    }

    #[test]
    fn http_requires_endpoint() {
        let cfg = GeneratorConfig {
            backend: BackendKind::Http,
            ..Default::default()
        };
        assert!(matches!(Gateway::new(cfg), Err(GatewayError::Config(_))));
    }

    #[test]
    fn outcomes_account_for_every_request() {
        let backend = Arc::new(Flaky {
            failures_left: AtomicU32::new(3),
            calls: AtomicU32::new(0),
        });
        let gw = Gateway::with_backend(fast_config(0), backend).unwrap();
        let prompts: Vec<_> = (0..10)
            .map(|i| PromptRecord::new(format!("p{i}"), "q", "unit"))
            .collect();
        let (ok, failed) = gw.generate_solutions(&prompts, RequestKind::Solution, 1);
        assert_eq!(ok.len() + failed.len(), 10);
        assert_eq!(failed.len(), 3);
    }

    #[test]
    fn cross_check_rules() {
        let p = |s: &str| parse_answer(s).unwrap();
        assert!(cross_check_labels(&p("1/2"), [&p("0.5"), &p("\\frac{1}{2}")]));
        assert!(!cross_check_labels(&p("1/2"), [&p("0.5"), &p("0.6")]));
        assert!(!cross_check_labels(&p("3"), [&p("4"), &p("4")]));
    }
}
