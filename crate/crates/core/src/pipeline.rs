//! End-to-end run: profile, pause injection, paraphrase gating, selection, generation and
//! hallucination evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attribution::{AttributionProvider, FixtureAttribution, HttpAttribution, MockAttribution};
use crate::cache::{CachingTransport, ResponseCache};
use crate::gate::{gate, FileParaphrases, GateConfig, GateReport, HttpParaphrase, ParaphraseSource, StaticParaphrases};
use crate::hallucination::{
    evaluate, EvidenceConfig, FixtureSearch, HallucinationError, HallucinationVerdict, HttpSearch,
    SearchProvider, SEARCH_KEY_ENV,
};
use crate::nli::{FixtureNli, HttpNli, LexicalNli, NliProvider};
use crate::pause::{inject_pauses, PauseAnnotatedPrompt, PauseConfig};
use crate::provider::{endpoint, HttpTransport, ProviderError, SharedTransport, WIRE_SCHEMA_VERSION};
use crate::selector::{select_optimal, SelectionReport, SelectorConfig, SelectorError};
use crate::text::{
    AbstractnessParams, Analyzer, ConcretenessLexicon, FrequencyBase, LinguisticProfile, RuleTagger,
};
use crate::topic::{load_background, LdaParams};

pub const GENERATE_PATH: &str = "/v1/generate";
pub const PROVIDER_TOKEN_ENV: &str = "SCA_PROVIDER_TOKEN";
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Largest `n` a paraphrase service accepts.
pub const MAX_LIVE_PARAPHRASES: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provider error in {stage}: {message}")]
    Provider { stage: String, message: String },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Provider { .. } => 3,
            PipelineError::Stage { .. } => 4,
        }
    }

    fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage: stage.into(),
            message: e.to_string(),
        }
    }

    fn provider(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Provider {
            stage: stage.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub lexicon_path: Option<PathBuf>,
    pub delta1: f64,
    pub delta2: f64,
    pub normalize: bool,
    pub frequency_base: FrequencyBase,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            lexicon_path: None,
            delta1: 1.0,
            delta2: 1.0,
            normalize: true,
            frequency_base: FrequencyBase::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub background_path: Option<PathBuf>,
}

impl LdaConfig {
    pub fn params(&self) -> LdaParams {
        let d = LdaParams::default();
        LdaParams {
            k: self.k.unwrap_or(d.k),
            alpha: self.alpha,
            beta: self.beta.unwrap_or(d.beta),
            seed: self.seed.unwrap_or(d.seed),
            iters: self.iters.unwrap_or(d.iters),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub attribution_url: Option<String>,
    pub nli_url: Option<String>,
    pub paraphrase_url: Option<String>,
    pub search_url: Option<String>,
    pub generation_url: Option<String>,
    pub timeout_secs: u64,
    pub mock_seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            attribution_url: None,
            nli_url: None,
            paraphrase_url: None,
            search_url: None,
            generation_url: None,
            timeout_secs: 60,
            mock_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    /// One paraphrase per line, or a JSON array.
    pub candidates_path: Option<PathBuf>,
    /// JSON object from text to attribution response.
    pub attribution_path: Option<PathBuf>,
    /// JSON array of NLI rows; unlisted pairs use the lexical stand-in.
    pub nli_path: Option<PathBuf>,
    /// Directory of evidence documents.
    pub evidence_dir: Option<PathBuf>,
    /// Text returned as the model's answer.
    pub generation_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub offline: bool,
    pub cache_dir: Option<PathBuf>,
    /// Number of paraphrases requested from the provider.
    pub paraphrase_n: usize,
    /// Attribute the pause-injected renderings instead of the plain texts.
    pub pause_before_attribution: bool,
    pub text: TextConfig,
    pub pause: PauseConfig,
    pub gate: GateConfig,
    pub selector: SelectorConfig,
    pub lda: LdaConfig,
    pub evidence: EvidenceConfig,
    pub providers: ProviderConfig,
    pub fixtures: FixtureConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            offline: false,
            cache_dir: None,
            paraphrase_n: 10,
            pause_before_attribution: false,
            text: TextConfig::default(),
            pause: PauseConfig::default(),
            gate: GateConfig::default(),
            selector: SelectorConfig::default(),
            lda: LdaConfig::default(),
            evidence: EvidenceConfig::default(),
            providers: ProviderConfig::default(),
            fixtures: FixtureConfig::default(),
        }
    }
}

fn check_url(name: &str, value: &str) -> Result<(), PipelineError> {
    let parsed = url::Url::parse(value)
        .map_err(|e| PipelineError::Config(format!("providers.{name}: {value:?} is not a URL: {e}")))?;
    if !matches!(parsed.scheme(), "http" | "https") || parsed.host().is_none() {
        return Err(PipelineError::Config(format!(
            "providers.{name}: {value:?} must be an http(s) URL with a host"
        )));
    }
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.cache_dir);
        fix(&mut self.text.lexicon_path);
        fix(&mut self.lda.background_path);
        fix(&mut self.fixtures.candidates_path);
        fix(&mut self.fixtures.attribution_path);
        fix(&mut self.fixtures.nli_path);
        fix(&mut self.fixtures.evidence_dir);
        fix(&mut self.fixtures.generation_path);
    }

    /// Applies a global seed to every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.lda.seed = Some(seed);
        self.providers.mock_seed = seed;
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.pause.validate().map_err(|e| PipelineError::Config(format!("pause: {e}")))?;
        self.gate.validate().map_err(|e| PipelineError::Config(format!("gate: {e}")))?;
        self.selector.validate().map_err(|e| PipelineError::Config(format!("selector: {e}")))?;
        self.evidence.validate().map_err(|e| PipelineError::Config(format!("evidence: {e}")))?;
        AbstractnessParams::new(self.text.delta1, self.text.delta2, self.text.normalize)
            .map_err(|e| PipelineError::Config(format!("text: {e}")))?;
        if self.lda.params().k < 2 {
            return Err(PipelineError::Config("lda.k must be at least 2".into()));
        }
        if !self.offline {
            let p = &self.providers;
            if p.paraphrase_url.is_some() && self.paraphrase_n > MAX_LIVE_PARAPHRASES {
                return Err(PipelineError::Config(format!(
                    "paraphrase_n {} exceeds the service limit of {MAX_LIVE_PARAPHRASES}",
                    self.paraphrase_n
                )));
            }
            for (name, url) in [
                ("attribution_url", &p.attribution_url),
                ("nli_url", &p.nli_url),
                ("paraphrase_url", &p.paraphrase_url),
                ("search_url", &p.search_url),
                ("generation_url", &p.generation_url),
            ] {
                if let Some(u) = url {
                    check_url(name, u)?;
                }
            }
        }
        Ok(())
    }

    fn live(&self, url: &Option<String>) -> Option<String> {
        if self.offline {
            None
        } else {
            url.clone()
        }
    }
}

pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, ProviderError>;
}

/// `POST /v1/generate` with `{prompt}` answering `{text}`.
pub struct HttpGeneration {
    transport: SharedTransport,
    url: String,
}

impl HttpGeneration {
    pub fn new(transport: SharedTransport, base_url: &str) -> Self {
        Self {
            transport,
            url: endpoint(base_url, GENERATE_PATH),
        }
    }
}

impl Generator for HttpGeneration {
    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let resp = self.transport.post_json(&self.url, &json!({ "prompt": prompt }))?;
        resp.get("text")
            .and_then(|t| t.as_str())
            .map(String::from)
            .ok_or_else(|| ProviderError::Schema("generation response lacks \"text\"".into()))
    }
}

/// Returns the same text for every prompt.
pub struct FixedGeneration(pub String);

impl Generator for FixedGeneration {
    fn generate(&self, _prompt: &str) -> Result<String, ProviderError> {
        Ok(self.0.clone())
    }
}

/// Networking used to build live providers.
pub struct Transports {
    pub providers: SharedTransport,
    pub search: SharedTransport,
}

impl Transports {
    /// HTTP transports with bearer tokens from the environment.
    pub fn from_env(timeout: Duration) -> Self {
        let token = std::env::var(PROVIDER_TOKEN_ENV).ok();
        let key = std::env::var(SEARCH_KEY_ENV).ok();
        Self {
            providers: Arc::new(HttpTransport::new(timeout, token)),
            search: Arc::new(HttpTransport::new(timeout, key)),
        }
    }

    pub fn single(t: SharedTransport) -> Self {
        Self {
            providers: t.clone(),
            search: t,
        }
    }
}

/// Every external dependency of a run.
pub struct Providers {
    pub attribution: Box<dyn AttributionProvider>,
    pub nli: Box<dyn NliProvider>,
    pub paraphrase: Box<dyn ParaphraseSource>,
    pub search: Option<Box<dyn SearchProvider>>,
    pub generator: Option<Box<dyn Generator>>,
    /// What backs each provider, recorded in the report.
    pub kinds: BTreeMap<String, String>,
}

impl Providers {
    /// Builds providers; live endpoints use `transports`, everything else is fixture or mock.
    pub fn from_config(cfg: &PipelineConfig, transports: Transports) -> Result<Self, PipelineError> {
        let wrap = |t: SharedTransport| -> SharedTransport {
            match &cfg.cache_dir {
                Some(dir) => Arc::new(CachingTransport::new(t, ResponseCache::new(dir, WIRE_SCHEMA_VERSION))),
                None => t,
            }
        };
        let provider_t = wrap(transports.providers);
        let search_t = wrap(transports.search);
        let mut kinds = BTreeMap::new();
        let fx = &cfg.fixtures;
        let p = &cfg.providers;

        let attribution: Box<dyn AttributionProvider> = match (cfg.live(&p.attribution_url), &fx.attribution_path) {
            (Some(url), _) => {
                kinds.insert("attribution".into(), format!("http {url}"));
                Box::new(HttpAttribution::new(provider_t.clone(), &url))
            }
            (None, Some(path)) => {
                kinds.insert("attribution".into(), format!("fixture {}", path.display()));
                Box::new(FixtureAttribution::load(path).map_err(|e| PipelineError::Config(e.to_string()))?)
            }
            (None, None) => {
                kinds.insert("attribution".into(), format!("mock seed {}", p.mock_seed));
                Box::new(MockAttribution::new(p.mock_seed))
            }
        };

        let nli: Box<dyn NliProvider> = match (cfg.live(&p.nli_url), &fx.nli_path) {
            (Some(url), _) => {
                kinds.insert("nli".into(), format!("http {url}"));
                Box::new(HttpNli::new(provider_t.clone(), &url))
            }
            (None, Some(path)) => {
                kinds.insert("nli".into(), format!("fixture {}", path.display()));
                Box::new(FixtureNli::load(path, LexicalNli).map_err(|e| PipelineError::Config(e.to_string()))?)
            }
            (None, None) => {
                kinds.insert("nli".into(), "lexical".into());
                Box::new(LexicalNli)
            }
        };

        let paraphrase: Box<dyn ParaphraseSource> = match (cfg.live(&p.paraphrase_url), &fx.candidates_path) {
            (Some(url), _) => {
                kinds.insert("paraphrase".into(), format!("http {url}"));
                Box::new(HttpParaphrase::new(provider_t.clone(), &url))
            }
            (None, Some(path)) => {
                kinds.insert("paraphrase".into(), format!("file {}", path.display()));
                Box::new(FileParaphrases::new(path))
            }
            (None, None) => {
                kinds.insert("paraphrase".into(), "none".into());
                Box::new(StaticParaphrases::default())
            }
        };

        let search: Option<Box<dyn SearchProvider>> = match (cfg.live(&p.search_url), &fx.evidence_dir) {
            (Some(url), _) => {
                kinds.insert("search".into(), format!("http {url}"));
                Some(Box::new(HttpSearch::new(search_t, &url)))
            }
            (None, Some(dir)) => {
                kinds.insert("search".into(), format!("fixture {}", dir.display()));
                Some(Box::new(FixtureSearch::new(dir)))
            }
            (None, None) => None,
        };

        let generator: Option<Box<dyn Generator>> = match (cfg.live(&p.generation_url), &fx.generation_path) {
            (Some(url), _) => {
                kinds.insert("generation".into(), format!("http {url}"));
                Some(Box::new(HttpGeneration::new(provider_t, &url)))
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
                kinds.insert("generation".into(), format!("fixture {}", path.display()));
                Some(Box::new(FixedGeneration(text)))
            }
            (None, None) => None,
        };

        Ok(Self {
            attribution,
            nli,
            paraphrase,
            search,
            generator,
            kinds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub ok: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub report_schema: u32,
    pub wire_schema: u32,
    pub toolkit: String,
    pub providers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub prompt: String,
    pub profile: Option<LinguisticProfile>,
    pub pause: Option<PauseAnnotatedPrompt>,
    pub candidates: Option<Vec<String>>,
    pub gate: Option<GateReport>,
    pub selection: Option<SelectionReport>,
    pub chosen_prompt: Option<String>,
    /// The chosen prompt with pauses injected, as sent for generation.
    pub chosen_rendered: Option<String>,
    pub generation: Option<String>,
    pub hallucination: Option<HallucinationVerdict>,
    pub error: Option<String>,
    pub stages: Vec<StageRecord>,
    pub versions: Versions,
}

impl PipelineReport {
    pub fn new(prompt: &str, providers: BTreeMap<String, String>) -> Self {
        Self {
            prompt: prompt.to_string(),
            profile: None,
            pause: None,
            candidates: None,
            gate: None,
            selection: None,
            chosen_prompt: None,
            chosen_rendered: None,
            generation: None,
            hallucination: None,
            error: None,
            stages: Vec::new(),
            versions: Versions {
                report_schema: REPORT_SCHEMA_VERSION,
                wire_schema: WIRE_SCHEMA_VERSION,
                toolkit: env!("CARGO_PKG_VERSION").to_string(),
                providers,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Copy with every timing zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.stages.iter_mut().for_each(|s| s.elapsed_ms = 0.0);
        r
    }
}

/// A failed run with everything computed before the failure.
#[derive(Debug, Clone)]
pub struct PipelineFailure {
    pub error: PipelineError,
    pub report: Box<PipelineReport>,
}

fn timed<T>(
    report: &mut PipelineReport,
    name: &str,
    f: impl FnOnce() -> Result<T, PipelineError>,
) -> Result<T, PipelineError> {
    let start = Instant::now();
    log::info!("stage {name}: start");
    let out = f();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1000.0;
    match &out {
        Ok(_) => log::info!("stage {name}: done in {elapsed_ms:.1} ms"),
        Err(e) => log::error!("stage {name}: {e}"),
    }
    report.stages.push(StageRecord {
        name: name.to_string(),
        ok: out.is_ok(),
        elapsed_ms,
    });
    out
}

/// Loads the concreteness lexicon named in the config, or the bundled one.
pub fn load_lexicon(cfg: &TextConfig) -> Result<ConcretenessLexicon, PipelineError> {
    match &cfg.lexicon_path {
        Some(p) => ConcretenessLexicon::load(p).map_err(|e| PipelineError::Config(e.to_string())),
        None => Ok(ConcretenessLexicon::paper_fixture()),
    }
}

pub fn run_pipeline(
    cfg: &PipelineConfig,
    prompt: &str,
    providers: &Providers,
) -> Result<PipelineReport, PipelineFailure> {
    let mut report = PipelineReport::new(prompt, providers.kinds.clone());
    match run_stages(cfg, prompt, providers, &mut report) {
        Ok(()) => Ok(report),
        Err(error) => {
            report.error = Some(error.to_string());
            Err(PipelineFailure {
                error,
                report: Box::new(report),
            })
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    prompt: &str,
    providers: &Providers,
    report: &mut PipelineReport,
) -> Result<(), PipelineError> {
    cfg.validate()?;
    let lexicon = load_lexicon(&cfg.text)?;
    let background = match &cfg.lda.background_path {
        Some(p) => load_background(p).map_err(|e| PipelineError::Config(e.to_string()))?,
        None => Vec::new(),
    };
    let tagger = RuleTagger::new();
    let mut analyzer = Analyzer::new(&lexicon, &tagger);
    analyzer.abstractness = AbstractnessParams::new(cfg.text.delta1, cfg.text.delta2, cfg.text.normalize)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    analyzer.frequency_base = cfg.text.frequency_base;

    let profile = timed(report, "profile", || {
        analyzer.profile(prompt).map_err(|e| PipelineError::stage("profile", e))
    })?;
    report.profile = Some(profile);

    let paused = timed(report, "inject_pauses", || {
        inject_pauses(prompt, &cfg.pause, &analyzer).map_err(|e| PipelineError::stage("inject_pauses", e))
    })?;
    report.pause = Some(paused.clone());

    let candidates = timed(report, "candidates", || {
        providers
            .paraphrase
            .candidates(prompt, cfg.paraphrase_n)
            .map_err(|e| PipelineError::provider("candidates", e))
    })?;
    report.candidates = Some(candidates.clone());

    let gated = timed(report, "gate", || {
        gate(prompt, &candidates, providers.nli.as_ref(), &cfg.gate).map_err(|e| PipelineError::stage("gate", e))
    })?;
    if let Some(c) = gated.candidates.iter().find(|c| c.error.is_some()) {
        log::warn!("entailment unavailable for {:?}: {}", c.text, c.error.as_deref().unwrap_or(""));
    }
    let kept = gated.kept_texts();
    report.gate = Some(gated);

    let mut selector_cfg = cfg.selector.clone();
    selector_cfg.lda = cfg.lda.params();
    // pool texts fed to attribution, and their pause-injected renderings
    let render = |text: &str| -> Result<String, PipelineError> {
        inject_pauses(text, &cfg.pause, &analyzer)
            .map(|p| p.rendered)
            .map_err(|e| PipelineError::stage("select", e))
    };
    let selection = timed(report, "select", || {
        let (orig, pool): (String, Vec<String>) = if cfg.pause_before_attribution {
            (paused.rendered.clone(), kept.iter().map(|k| render(k)).collect::<Result<_, _>>()?)
        } else {
            (prompt.to_string(), kept.clone())
        };
        select_optimal(&orig, &pool, providers.attribution.as_ref(), &background, &selector_cfg).map_err(|e| {
            match e {
                SelectorError::Aborted { .. } => PipelineError::provider("select", e),
                other => PipelineError::stage("select", other),
            }
        })
    })?;
    let chosen = if selection.chosen_index == 0 {
        prompt.to_string()
    } else {
        kept[selection.chosen_index - 1].clone()
    };
    report.selection = Some(selection);
    let rendered = if chosen == prompt { paused.rendered.clone() } else { render(&chosen)? };
    report.chosen_prompt = Some(chosen);
    report.chosen_rendered = Some(rendered.clone());

    if let Some(generator) = &providers.generator {
        let text = timed(report, "generate", || {
            generator.generate(&rendered).map_err(|e| PipelineError::provider("generate", e))
        })?;
        report.generation = Some(text.clone());

        if let Some(search) = &providers.search {
            let verdict = timed(report, "evaluate", || {
                evaluate(prompt, &text, search.as_ref(), providers.nli.as_ref(), &cfg.evidence).map_err(|e| match e {
                    HallucinationError::Retrieval(_) => PipelineError::provider("evaluate", e),
                    other => PipelineError::stage("evaluate", other),
                })
            })?;
            report.hallucination = Some(verdict);
        }
    }
    Ok(())
}
