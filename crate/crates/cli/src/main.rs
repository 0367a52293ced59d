use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sca_core::gate::{gate, CandidateStatus, GateReport, ParaphraseSource};
use sca_core::hallucination::{evaluate, HallucinationError, HallucinationVerdict};
use sca_core::pause::{inject_pauses, PauseAnnotatedPrompt};
use sca_core::pipeline::{
    load_lexicon, run_pipeline, PipelineConfig, PipelineError, PipelineReport, Providers, Transports,
};
use sca_core::selector::{select_optimal, SelectionReport, SelectorError};
use sca_core::text::{AbstractnessParams, Analyzer, LinguisticProfile, RuleTagger};
use sca_core::topic::load_background;

#[derive(Parser)]
#[command(name = "sca", version, about = "Prompt scoring, pause injection, paraphrase selection and hallucination checks")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use only fixture and mock providers; never touch the network.
    #[arg(long, global = true)]
    offline: bool,
    /// Directory for cached provider responses.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Seed for the topic model and the mock attribution provider.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the machine-readable JSON record to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TextInput {
    #[arg(long, required_unless_present = "file", conflicts_with = "file")]
    text: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
}

impl TextInput {
    fn read(&self) -> Result<String, PipelineError> {
        match (&self.text, &self.file) {
            (Some(t), _) => Ok(t.clone()),
            (None, Some(p)) => read_file(p).map(|s| s.trim_end().to_string()),
            (None, None) => Err(PipelineError::Config("no input text".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Readability, formality, concreteness and abstractness of a text.
    Profile(TextInput),
    /// Insert pause tokens after conjunctions.
    Inject(TextInput),
    /// Filter paraphrase candidates by coverage, correctness and diversity.
    Gate {
        #[arg(long)]
        original: String,
        /// One candidate per line.
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Choose the most comprehensible prompt among the original and candidates.
    Select {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        candidates: PathBuf,
        /// Attribution service URL, or `mock`.
        #[arg(long, default_value = "mock")]
        provider: String,
    },
    /// Check generated text against retrieved evidence.
    Evaluate {
        #[arg(long)]
        prompt: String,
        /// File with the generated text.
        #[arg(long)]
        generated: PathBuf,
        /// Directory of evidence documents; otherwise the configured search provider.
        #[arg(long)]
        evidence_dir: Option<PathBuf>,
    },
    /// Run the full pipeline.
    Run {
        #[arg(long, required_unless_present = "prompt_file", conflicts_with = "prompt_file")]
        prompt: Option<String>,
        #[arg(long)]
        prompt_file: Option<PathBuf>,
    },
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn stage(name: &str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage: name.into(),
        message: e.to_string(),
    }
}

fn provider_err(name: &str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Provider {
        stage: name.into(),
        message: e.to_string(),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.offline {
        cfg.offline = true;
    }
    if let Some(dir) = &cli.cache_dir {
        cfg.cache_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_providers(cfg: &PipelineConfig) -> Result<Providers, PipelineError> {
    let transports = Transports::from_env(Duration::from_secs(cfg.providers.timeout_secs));
    Providers::from_config(cfg, transports)
}

fn emit<T: Serialize>(cli: &Cli, value: &T, table: impl FnOnce() -> String) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(value).expect("serializable");
    if let Some(path) = &cli.report {
        std::fs::write(path, format!("{json}\n"))
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    }
    if cli.json {
        println!("{json}");
    } else {
        print!("{}", table());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn profile_table(p: &LinguisticProfile) -> String {
    let bin = |b: Option<String>| b.unwrap_or_else(|| "-".into());
    let mut out = String::new();
    out += &format!("{:<14}{:>10}  {}\n", "measure", "value", "bin");
    out += &format!("{:<14}{:>10.2}  {:?}\n", "readability", p.readability, p.bins.readability.bin);
    out += &format!("{:<14}{:>10.2}  {:?}\n", "formality", p.formality, p.bins.formality.bin);
    out += &format!(
        "{:<14}{:>10}  {}\n",
        "concreteness",
        fmt_opt(p.concreteness),
        bin(p.bins.concreteness.map(|b| format!("{:?}", b.bin)))
    );
    out += &format!("{:<14}{:>10}\n", "abstractness", fmt_opt(p.abstractness));
    out += &format!("{:<14}{:>10.2}\n", "lexicon hits", p.covered_word_fraction);
    out
}

fn inject_table(p: &PauseAnnotatedPrompt) -> String {
    let mut out = format!("{}\n\n", p.rendered);
    out += &format!("{:>3}  {:>8}  {:>6}  segment\n", "#", "score", "pauses");
    for (i, s) in p.segments.iter().enumerate() {
        out += &format!("{:>3}  {:>8}  {:>6}  {}\n", i, fmt_opt(s.score), s.pause_count, s.text.trim());
    }
    out
}

fn gate_table(r: &GateReport) -> String {
    let mut out = format!("{:>3}  {:>4}  {:>6}  {:>6}  {:>8}  {:<20}  text\n", "#", "med", "fwd", "bwd", "div", "status");
    for (i, c) in r.candidates.iter().enumerate() {
        out += &format!(
            "{:>3}  {:>4}  {:>6}  {:>6}  {:>8}  {:<20}  {}\n",
            i,
            c.med_from_original,
            fmt_opt(c.entail_fwd),
            fmt_opt(c.entail_bwd),
            fmt_opt(c.dissimilarity_avg),
            format!("{:?}", c.status),
            c.text
        );
    }
    out += "\nkept:\n";
    if r.original_only {
        out += "  (none; the original prompt stands)\n";
    }
    for c in r.kept() {
        out += &format!("  {}\n", c.text);
    }
    out
}

fn select_table(r: &SelectionReport) -> String {
    let mut out = format!("{:>3}  {:>9}  {:>9}  {:>9}  text\n", "#", "align", "topic", "score");
    for rec in &r.records {
        let mark = if rec.index == r.chosen_index { "*" } else { " " };
        out += &format!(
            "{:>2}{}  {:>9}  {:>9}  {:>9}  {}\n",
            rec.index,
            mark,
            fmt_opt(rec.alignment),
            fmt_opt(rec.topic_sim),
            fmt_opt(rec.comprehension),
            rec.text
        );
    }
    out += &format!("\nchosen: {}\n", r.chosen_text());
    if r.tie_break_applied {
        out += "(tie broken in favour of the earliest entry)\n";
    }
    out
}

fn verdict_table(v: &HallucinationVerdict) -> String {
    let mut out = format!("{:<8}  {:>7}  {:>7}  {:<18}  sentence\n", "label", "entail", "contra", "evidence");
    for s in &v.per_sentence {
        out += &format!(
            "{:<8}  {:>7.3}  {:>7.3}  {:<18}  {}{}\n",
            format!("{:?}", s.label).to_uppercase(),
            s.best_entail,
            s.best_contradict,
            s.best_evidence_id.as_deref().unwrap_or("-"),
            s.sentence,
            if s.undetermined { "  [undetermined]" } else { "" }
        );
    }
    let f = v.fractions;
    out += &format!("\nsupport {:.3}  refute {:.3}  nei {:.3}\n", f.support, f.refute, f.nei);
    if v.empty_evidence {
        out += "(no evidence was found)\n";
    }
    out
}

fn run_summary(r: &PipelineReport) -> String {
    let mut out = String::new();
    if let Some(p) = &r.profile {
        out += &profile_table(p);
        out += "\n";
    }
    if let Some(g) = &r.gate {
        out += &gate_table(g);
        out += "\n";
    }
    if let Some(s) = &r.selection {
        out += &select_table(s);
        out += "\n";
    }
    if let Some(c) = &r.chosen_rendered {
        out += &format!("prompt sent: {c}\n\n");
    }
    if let Some(v) = &r.hallucination {
        out += &verdict_table(v);
    }
    out
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    let lexicon = load_lexicon(&cfg.text)?;
    let tagger = RuleTagger::new();
    let mut analyzer = Analyzer::new(&lexicon, &tagger);
    analyzer.abstractness = AbstractnessParams::new(cfg.text.delta1, cfg.text.delta2, cfg.text.normalize)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    analyzer.frequency_base = cfg.text.frequency_base;

    match &cli.command {
        Command::Profile(input) => {
            let p = analyzer.profile(&input.read()?).map_err(|e| stage("profile", e))?;
            emit(cli, &p, || profile_table(&p))
        }
        Command::Inject(input) => {
            let p = inject_pauses(&input.read()?, &cfg.pause, &analyzer).map_err(|e| stage("inject", e))?;
            emit(cli, &p, || inject_table(&p))
        }
        Command::Gate { original, candidates } => {
            let mut cfg = cfg.clone();
            cfg.fixtures.candidates_path = Some(candidates.clone());
            cfg.providers.paraphrase_url = None;
            let providers = build_providers(&cfg)?;
            let cands = providers
                .paraphrase
                .candidates(original, usize::MAX)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            let r = gate(original, &cands, providers.nli.as_ref(), &cfg.gate).map_err(|e| stage("gate", e))?;
            if r.candidates.iter().any(|c| c.status == CandidateStatus::Undetermined) {
                log::warn!("some candidates could not be checked for entailment");
            }
            emit(cli, &r, || gate_table(&r))
        }
        Command::Select { prompt, candidates, provider } => {
            let mut cfg = cfg.clone();
            if provider == "mock" {
                cfg.providers.attribution_url = None;
                cfg.fixtures.attribution_path = None;
            } else {
                cfg.providers.attribution_url = Some(provider.clone());
                cfg.validate()?;
            }
            let providers = build_providers(&cfg)?;
            let cands = sca_core::gate::FileParaphrases::new(candidates)
                .candidates(prompt, usize::MAX)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            let background = match &cfg.lda.background_path {
                Some(p) => load_background(p).map_err(|e| PipelineError::Config(e.to_string()))?,
                None => Vec::new(),
            };
            let mut scfg = cfg.selector.clone();
            scfg.lda = cfg.lda.params();
            let r = select_optimal(prompt, &cands, providers.attribution.as_ref(), &background, &scfg).map_err(
                |e| match e {
                    SelectorError::Aborted { .. } => provider_err("select", e),
                    other => stage("select", other),
                },
            )?;
            emit(cli, &r, || select_table(&r))
        }
        Command::Evaluate { prompt, generated, evidence_dir } => {
            let mut cfg = cfg.clone();
            if let Some(dir) = evidence_dir {
                cfg.fixtures.evidence_dir = Some(dir.clone());
                cfg.providers.search_url = None;
            }
            let providers = build_providers(&cfg)?;
            let search = match (&providers.search, evidence_dir) {
                (Some(s), _) => s,
                (None, _) => {
                    return Err(PipelineError::Config(
                        "no evidence source: pass --evidence-dir or configure providers.search_url".into(),
                    ))
                }
            };
            let text = read_file(generated)?;
            let v = evaluate(prompt, &text, search.as_ref(), providers.nli.as_ref(), &cfg.evidence).map_err(
                |e| match e {
                    HallucinationError::Retrieval(_) => provider_err("evaluate", e),
                    other => stage("evaluate", other),
                },
            )?;
            emit(cli, &v, || verdict_table(&v))
        }
        Command::Run { prompt, prompt_file } => {
            let prompt = match (prompt, prompt_file) {
                (Some(p), _) => p.clone(),
                (None, Some(f)) => read_file(f)?.trim_end().to_string(),
                (None, None) => return Err(PipelineError::Config("no prompt".into())),
            };
            let providers = build_providers(&cfg)?;
            match run_pipeline(&cfg, &prompt, &providers) {
                Ok(r) => emit(cli, &r, || run_summary(&r)),
                Err(failure) => {
                    // the partial report is still written for inspection
                    if let Some(path) = &cli.report {
                        let _ = std::fs::write(path, format!("{}\n", failure.report.to_json()));
                    }
                    if cli.json {
                        println!("{}", failure.report.to_json());
                    }
                    Err(failure.error)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sca: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
