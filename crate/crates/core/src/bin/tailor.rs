use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use tailor_core::config::{resolve, FlagOverrides, Resolved, RunOverrides};
use tailor_core::engine::{Engine, EngineError};
use tailor_core::experiment::{compare, load_jd_set};
use tailor_core::generation::RenderFormat;
use tailor_core::ingest::{DocFormat, SourceDocument};
use tailor_core::pipeline::{PipelineError, RunInputs, RunState};
use tailor_core::service::{serve, AppState};
use tailor_core::vault::{Collection, VaultError};

// Plain print! panics when stdout is a closed pipe (`tailor runs list | head`).
macro_rules! out {
    ($($t:tt)*) => { emit(format!($($t)*) + "\n") };
}

macro_rules! out_raw {
    ($($t:tt)*) => { emit(format!($($t)*)) };
}

fn emit(text: String) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(EXIT_STORE as i32);
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PIPELINE: u8 = 3;
const EXIT_STORE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "tailor", version, about = "Career-vault resume tailoring")]
struct Cli {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory (vault, run history, run outputs).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Gateway profile name.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Skill lexicon file, one term per line.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manage the career vault.
    #[command(subcommand)]
    Vault(VaultCmd),
    /// Tailor a resume to a job description.
    Run(RunArgs),
    /// Inspect run history.
    #[command(subcommand)]
    Runs(RunsCmd),
    /// Store generated items of a run in the vault.
    Approve {
        run_id: String,
        item_ids: Vec<String>,
    },
    /// Baseline-versus-vault experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Print a rendered resume of a finished run.
    Render {
        run_id: String,
        #[arg(long, default_value = "txt")]
        format: RenderFormat,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Subcommand, Debug)]
enum VaultCmd {
    /// Parse, embed and index documents. `.csv`/`.xml` files are career records.
    Index {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Index resumes as generated content instead of resume history.
        #[arg(long)]
        generated: bool,
    },
    /// List stored chunks.
    List {
        #[arg(long)]
        collection: Option<String>,
    },
    /// Delete a chunk by id.
    Delete { chunk_id: String },
}

#[derive(Subcommand, Debug)]
enum RunsCmd {
    List,
    Show { run_id: String },
    Trace { run_id: String },
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    /// Run both conditions for every JD in a groups file and print the delta table.
    Compare {
        #[arg(long)]
        jds: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        resume: PathBuf,
        /// Print the full report as JSON instead of the table.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    jd: PathBuf,
    #[arg(long)]
    resume: PathBuf,
    /// Print the run summary as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args, Debug, Default)]
struct RunFlags {
    /// Baseline condition: skip vault retrieval.
    #[arg(long)]
    no_retrieval: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tau_fallback: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    llm_fallback: bool,
    #[arg(long)]
    llm_jd_extraction: bool,
    /// Comma-separated render formats.
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<RenderFormat>>,
}

impl RunFlags {
    fn overrides(&self) -> RunOverrides {
        RunOverrides {
            alpha: self.alpha,
            tau: self.tau,
            tau_fallback: self.tau_fallback,
            retrieval_enabled: self.no_retrieval.then_some(false),
            k: self.k,
            seed: self.seed,
            llm_fallback: self.llm_fallback.then_some(true),
            llm_jd_extraction: self.llm_jd_extraction.then_some(true),
            formats: self.formats.clone(),
            max_extra_review_passes: None,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::InvalidInput { .. }
            | EngineError::UnknownRun(_)
            | EngineError::UnknownItem { .. }
            | EngineError::NotApprovable { .. }
            | EngineError::RunNotDone(_)
            | EngineError::Ingest(_)
            | EngineError::Vault(VaultError::UnknownChunk(_) | VaultError::UnknownRun(_)) => {
                EXIT_INPUT
            }
            EngineError::Pipeline(PipelineError::InvalidConfig { .. }) => EXIT_USAGE,
            EngineError::Pipeline(_) | EngineError::Gateway(_) => EXIT_PIPELINE,
            EngineError::Vault(_)
            | EngineError::Store(_)
            | EngineError::DimensionMismatch { .. }
            | EngineError::Io { .. }
            | EngineError::Json { .. } => EXIT_STORE,
        };
        Failure::new(code, e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn resume_inputs(path: &Path, jd_text: String) -> Result<RunInputs, Failure> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("md" | "markdown") => DocFormat::Markdown,
        _ => DocFormat::Plaintext,
    };
    Ok(RunInputs {
        jd_text,
        resume_text: read_input(path)?,
        resume_format: format,
        base_doc_id: "target".into(),
    })
}

fn source_document(path: &Path, generated: bool) -> Result<SourceDocument, Failure> {
    SourceDocument::from_path(path, generated)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn print_run(engine: &Engine, state: &RunState) {
    let ats = state.ats.as_ref().expect("finished run");
    out!("run_id: {}", state.run_id);
    out!("condition: {}", state.condition.as_str());
    out!(
        "overall_fit: {:.1} ({})",
        ats.overall_fit,
        ats.verdict.as_str()
    );
    out!(
        "best_profile: {:.1} ({})",
        ats.best_profile,
        ats.best_profile_name
    );
    for p in &ats.profile_scores {
        out!("  {:<14}{:>6.1}", p.name, p.score);
    }
    let cov = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.1}"));
    out!(
        "coverage: skill {} / responsibility {} / qualification {}",
        cov(ats.coverage.cov_skill),
        cov(ats.coverage.cov_resp),
        cov(ats.coverage.cov_qual)
    );
    out!(
        "retrieved {} kept {} fallback {} findings {} review passes {}",
        state.retrieved.len(),
        state.snippets.len(),
        state.fallback_items.len(),
        state.findings.len(),
        state.pass_count
    );
    for f in &state.flags {
        out!("flag: {f}");
    }
    out!("outputs:");
    let dir = engine.data_dir().join("runs").join(&state.run_id);
    for format in state.rendered.keys() {
        out!(
            "  {}",
            dir.join(format!("resume.{}", format.extension())).display()
        );
    }
    out!("  {}", dir.join("trace.jsonl").display());
}

fn open_engine(resolved: &Resolved) -> Result<Engine, Failure> {
    let gateway = resolved
        .gateway
        .build()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    Ok(Engine::open(
        &resolved.data_dir,
        gateway,
        resolved.lexicon.clone(),
    )?)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let run_flags = match &cli.command {
        Command::Run(a) => a.run.overrides(),
        Command::Experiment(ExperimentCmd::Compare { run, .. }) => run.overrides(),
        _ => RunOverrides::default(),
    };
    let resolved = resolve(&FlagOverrides {
        config_file: cli.config.clone(),
        data_dir: cli.data_dir.clone(),
        gateway_profile: cli.profile.clone(),
        lexicon: cli.lexicon.clone(),
        run: run_flags,
    })
    .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let engine = open_engine(&resolved)?;

    match cli.command {
        Command::Vault(VaultCmd::Index { files, generated }) => {
            for path in &files {
                let doc = source_document(path, generated)?;
                let report = engine.index_document(&doc)?;
                out!(
                    "{}\t{}\t{}",
                    path.display(),
                    report.collection.as_str(),
                    report.chunks
                );
            }
        }
        Command::Vault(VaultCmd::List { collection }) => {
            let c = match collection.as_deref() {
                None => None,
                Some(name) => Some(Collection::parse(name).ok_or_else(|| {
                    Failure::new(EXIT_USAGE, format!("unknown collection {name:?}"))
                })?),
            };
            for info in engine.list_chunks(c) {
                out!(
                    "{}\t{}\t{:?}\t{}",
                    info.chunk.chunk_id,
                    info.collection.as_str(),
                    info.chunk.level,
                    info.chunk.text.lines().next().unwrap_or("")
                );
            }
        }
        Command::Vault(VaultCmd::Delete { chunk_id }) => {
            engine.delete_chunk(&chunk_id)?;
            out!("deleted {chunk_id}");
        }
        Command::Run(args) => {
            let inputs = resume_inputs(&args.resume, read_input(&args.jd)?)?;
            let state = engine.run(&inputs, &resolved.run)?;
            if args.json {
                out!(
                    "{}",
                    json_line(&tailor_core::service::RunSummary::of(&state))
                );
            } else {
                print_run(&engine, &state);
            }
        }
        Command::Runs(RunsCmd::List) => {
            for r in engine.list_runs()? {
                let score = r.overall_fit.map_or("-".to_string(), |v| format!("{v:.1}"));
                let verdict = r.verdict.map_or("-", |v| v.as_str());
                out!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.run_id,
                    r.created_at.to_rfc3339(),
                    r.condition.as_str(),
                    json_line(&r.status).trim_matches('"'),
                    score,
                    verdict
                );
            }
        }
        Command::Runs(RunsCmd::Show { run_id }) => {
            let record = engine.run_record(&run_id)?;
            match engine.run_result(&run_id) {
                Ok(state) => print_run(&engine, &state),
                Err(EngineError::RunNotDone(_)) => out!("{}", json_line(&record)),
                Err(e) => return Err(e.into()),
            }
        }
        Command::Runs(RunsCmd::Trace { run_id }) => {
            for ev in engine.replay_trace(&run_id)? {
                out!("{}", serde_json::to_string(&ev).expect("serializable"));
            }
        }
        Command::Approve { run_id, item_ids } => {
            for a in engine.approve(&run_id, &item_ids)? {
                out!("{}\t{}", a.item_id, a.chunk_id);
            }
        }
        Command::Experiment(ExperimentCmd::Compare {
            jds,
            groups,
            resume,
            json,
            ..
        }) => {
            let set = load_jd_set(&jds, &groups)?;
            let inputs = resume_inputs(&resume, String::new())?;
            let report = compare(&engine, &set, &inputs, &resolved.run)?;
            if json {
                out!("{}", json_line(&report));
            } else {
                out_raw!("{}", report.table);
            }
        }
        Command::Render { run_id, format } => {
            out_raw!("{}", engine.render(&run_id, format)?);
        }
        Command::Serve { port, host } => {
            let state = AppState {
                engine: Arc::new(engine),
                defaults: resolved.run.clone(),
            };
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Failure::new(EXIT_STORE, e.to_string()))?;
            rt.block_on(serve(state, (host, port).into()))
                .map_err(|e| Failure::new(EXIT_STORE, format!("serve: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
