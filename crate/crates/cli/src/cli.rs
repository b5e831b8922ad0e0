//! Subcommands of the `imt` binary.

use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use imtkit::eval::{bleu_components, effort_components, ter_components, EvalReport, SystemComponents, DEFAULT_REPETITIONS};
use imtkit::imt::{simulate_trace, ImtSession, SuffixGenerator};
use imtkit::nmt::{BeamConfig, NmtSystem, NmtSystemConfig, TrainConfig};
use imtkit::smt::{train_smt, tune_weights, DecodeConfig, MertConfig, SmtTrainConfig};
use imtkit::text::{builtin_rules, corpus_stats, load_monolingual, load_parallel, sample_modern_text, synth_drift, DriftRule};
use imtkit::{detokenize, tokenize, ParallelCorpus, Sentence};

use crate::registry::{Engine, EngineRegistry, COPY_ENGINE};
use crate::server::{serve, AppState};
use crate::store::SessionStore;

#[derive(Debug, Parser)]
#[command(name = "imt", version, about = "Interactive modernization of historical text")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a phrase-based engine, optionally tuning weights on a dev set.
    TrainSmt(TrainSmtArgs),
    /// Train the neural encoder-decoder engine.
    TrainNmt(TrainNmtArgs),
    /// Modernize a file line by line with an engine's first suggestion.
    Modernize(ModernizeArgs),
    /// Run the simulated user over a test set and report WSR/MAR.
    ImtSimulate(SimulateArgs),
    /// Score hypothesis files with BLEU and TER.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic historical/modern parallel corpus.
    SynthCorpus(SynthArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainSmtArgs {
    /// Historical side of the training corpus, one sentence per line.
    #[arg(long)]
    pub src: PathBuf,
    /// Modern side of the training corpus.
    #[arg(long)]
    pub tgt: PathBuf,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Extra modern text for the language model.
    #[arg(long = "lm-text")]
    pub lm_text: Vec<PathBuf>,
    #[arg(long, requires = "dev_tgt")]
    pub dev_src: Option<PathBuf>,
    #[arg(long, requires = "dev_src")]
    pub dev_tgt: Option<PathBuf>,
    /// Weight tuning rounds on the dev set.
    #[arg(long, default_value_t = 3)]
    pub tune_rounds: usize,
    #[arg(long, default_value_t = 100)]
    pub nbest: usize,
    #[arg(long, default_value_t = 5)]
    pub ibm_iterations: usize,
    #[arg(long, default_value_t = 4)]
    pub max_phrase_len: usize,
    #[arg(long, default_value_t = 5)]
    pub lm_order: usize,
    #[arg(long, default_value_t = DecodeConfig::default().beam_size)]
    pub beam_size: usize,
    #[arg(long, default_value_t = DecodeConfig::default().distortion_limit)]
    pub distortion_limit: usize,
    #[arg(long, default_value_t = DecodeConfig::default().table_limit)]
    pub table_limit: usize,
}

#[derive(Debug, Args)]
pub struct TrainNmtArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for initialization and batch order.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = NmtSystemConfig::default().merges)]
    pub merges: usize,
    #[arg(long, default_value_t = NmtSystemConfig::default().embed)]
    pub embed: usize,
    #[arg(long, default_value_t = NmtSystemConfig::default().hidden)]
    pub hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().label_smoothing)]
    pub label_smoothing: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_updates)]
    pub max_updates: usize,
    /// Global gradient norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = BeamConfig::default().beam_size)]
    pub beam_size: usize,
    #[arg(long, default_value_t = BeamConfig::default().max_output_len)]
    pub max_output_len: usize,
    /// Write the per-update training loss here.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Directory scanned for engines; defaults to $IMT_MODEL_DIR.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
}

impl EngineArgs {
    fn registry(&self) -> Result<EngineRegistry> {
        Ok(match &self.model_dir {
            Some(dir) => EngineRegistry::from_dir(dir)?,
            None => EngineRegistry::from_env()?,
        })
    }
}

#[derive(Debug, Args)]
pub struct ModernizeArgs {
    /// Engine name, model directory or "copy".
    #[arg(long)]
    pub engine: String,
    /// Input file; "-" reads stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub engines: EngineArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Engine name, model directory or "copy"; repeat to compare engines.
    #[arg(long, required = true)]
    pub engine: Vec<String>,
    /// Test set as SRC,REF file paths.
    #[arg(long, value_parser = parse_file_pair)]
    pub test: (PathBuf, PathBuf),
    /// Seed for the significance tests.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub reps: usize,
    /// Leave out the copy baseline row.
    #[arg(long)]
    pub no_baseline: bool,
    /// Write every session trace to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub engines: EngineArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference file.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// System output as NAME=FILE; repeat for several systems.
    #[arg(long, required = true, value_parser = parse_named_file)]
    pub hyp: Vec<(String, PathBuf)>,
    /// System the daggers compare against.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub reps: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Modern sentences to age; sampled from the built-in generator when
    /// omitted.
    #[arg(long)]
    pub modern: Option<PathBuf>,
    /// Sentences to sample without --modern.
    #[arg(long, default_value_t = 2000)]
    pub sentences: usize,
    /// Rule file (pattern<TAB>replacement[<TAB>probability]); built-in
    /// archaic Spanish rules when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Historical side output.
    #[arg(long)]
    pub out_src: PathBuf,
    /// Modern side output.
    #[arg(long)]
    pub out_tgt: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory of UI files served at /.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Session journal; sessions are kept in memory only when omitted.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    #[command(flatten)]
    pub engines: EngineArgs,
}

fn parse_file_pair(s: &str) -> std::result::Result<(PathBuf, PathBuf), String> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.into(), b.into())),
        _ => Err("expected SRC,REF".into()),
    }
}

fn parse_named_file(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.into(), p.into())),
        _ => Err("expected NAME=FILE".into()),
    }
}

/// Parses `argv` (program name first) and runs the command, writing
/// reports to `out`. Returns the process exit code: 0 on success, 2 on a
/// usage error, 1 on a runtime error.
pub fn run_with(argv: impl IntoIterator<Item = impl Into<std::ffi::OsString> + Clone>, out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(argv: impl IntoIterator<Item = impl Into<std::ffi::OsString> + Clone>) -> i32 {
    run_with(argv, &mut io::stdout().lock())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::TrainSmt(a) => train_smt_cmd(a, out),
        Command::TrainNmt(a) => train_nmt_cmd(a, out),
        Command::Modernize(a) => modernize_cmd(a, out),
        Command::ImtSimulate(a) => simulate_cmd(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out),
        Command::SynthCorpus(a) => synth_cmd(a, out),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn load_corpus(src: &Path, tgt: &Path) -> Result<ParallelCorpus> {
    let loaded = load_parallel(src, tgt).with_context(|| format!("loading {} and {}", src.display(), tgt.display()))?;
    ensure!(!loaded.corpus.is_empty(), "{}: no usable sentence pairs", src.display());
    Ok(loaded.corpus)
}

/// Every line of a file tokenized, blank lines kept as empty sentences.
fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(text.lines().map(tokenize).collect())
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train_smt_cmd(a: TrainSmtArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.src, &a.tgt)?;
    let mut extra = Vec::new();
    for p in &a.lm_text {
        extra.extend(load_monolingual(p)?);
    }
    let cfg = SmtTrainConfig {
        ibm_iterations: a.ibm_iterations,
        max_phrase_len: a.max_phrase_len,
        lm_order: a.lm_order,
    };
    let mut model = train_smt(&corpus, &extra, &cfg)?;
    model.config = DecodeConfig {
        beam_size: a.beam_size,
        distortion_limit: a.distortion_limit,
        table_limit: a.table_limit,
    };
    if let (Some(ds), Some(dt)) = (&a.dev_src, &a.dev_tgt) {
        let dev = load_corpus(ds, dt)?;
        let mert = MertConfig {
            nbest: a.nbest,
            decode: model.config,
            ..MertConfig::default()
        };
        model.weights = tune_weights(&model.phrase_table, &model.lm, &dev, &model.weights, a.tune_rounds, &mert)?;
    }
    model.save(&a.out)?;
    writeln!(out, "corpus: {}", corpus_stats(&corpus))?;
    writeln!(out, "phrase table: {} source phrases", model.phrase_table.len())?;
    writeln!(out, "weights: {}", model.weights.to_text().trim_end().replace('\n', ", "))?;
    writeln!(out, "saved to {}", a.out.display())?;
    Ok(())
}

fn train_nmt_cmd(a: TrainNmtArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.src, &a.tgt)?;
    let cfg = NmtSystemConfig {
        merges: a.merges,
        embed: a.embed,
        hidden: a.hidden,
        train: TrainConfig {
            learning_rate: a.learning_rate,
            batch_size: a.batch_size,
            label_smoothing: a.label_smoothing,
            max_updates: a.max_updates,
            seed: a.seed,
            clip_norm: (a.clip_norm > 0.0).then_some(a.clip_norm),
        },
        beam: BeamConfig {
            beam_size: a.beam_size,
            max_output_len: a.max_output_len,
        },
    };
    let (system, trace) = NmtSystem::train(&corpus, &cfg)?;
    system.save(&a.out)?;
    if let Some(p) = &a.loss_log {
        write_lines(p, trace.iter().map(|l| format!("{l}")))?;
    }
    writeln!(out, "corpus: {}", corpus_stats(&corpus))?;
    writeln!(
        out,
        "vocabulary: {} source / {} target subwords",
        system.model.src_vocab.len(),
        system.model.tgt_vocab.len()
    )?;
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        writeln!(out, "loss: {first:.4} -> {last:.4} over {} updates", trace.len())?;
    }
    writeln!(out, "saved to {}", a.out.display())?;
    Ok(())
}

fn modernize_cmd(a: ModernizeArgs, out: &mut dyn Write) -> Result<()> {
    let engine = a.engines.registry()?.resolve(&a.engine)?;
    let sources = read_sentences(&a.input)?;
    let mut lines = Vec::with_capacity(sources.len());
    for (i, src) in sources.iter().enumerate() {
        if src.is_empty() {
            lines.push(String::new());
            continue;
        }
        let hyp = engine
            .generator
            .suffix(src, &Sentence::default())
            .map_err(|e| anyhow::anyhow!("line {}: {e}", i + 1))?;
        lines.push(detokenize(&hyp));
    }
    match &a.output {
        Some(p) => write_lines(p, lines),
        None => {
            for l in lines {
                writeln!(out, "{l}")?;
            }
            Ok(())
        }
    }
}

/// Simulates every pair on one engine, spreading sentences over threads.
pub fn simulate_corpus(generator: &dyn SuffixGenerator, corpus: &ParallelCorpus) -> Result<Vec<ImtSession>> {
    let pairs = corpus.pairs();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(pairs.len().max(1));
    let chunk = pairs.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|p| simulate_trace(generator, &p.source, &p.target))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut sessions = Vec::with_capacity(pairs.len());
        for h in handles {
            sessions.extend(h.join().expect("simulation thread panicked")?);
        }
        Ok(sessions)
    })
}

fn simulate_cmd(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.test.0, &a.test.1)?;
    let registry = a.engines.registry()?;
    let mut engines: Vec<(String, Engine)> = Vec::new();
    let with_baseline = !a.no_baseline && !a.engine.iter().any(|e| e == COPY_ENGINE);
    if with_baseline {
        engines.push(("Baseline".to_string(), registry.resolve(COPY_ENGINE)?));
    }
    for spec in &a.engine {
        let engine = registry.resolve(spec)?;
        if engines.iter().any(|(n, _)| *n == engine.name) {
            bail!("engine {:?} given twice", engine.name);
        }
        engines.push((engine.name.clone(), engine));
    }
    let refs: Vec<Sentence> = corpus.targets().cloned().collect();
    let mut systems = Vec::new();
    let mut traces = String::new();
    for (name, engine) in &engines {
        let start = std::time::Instant::now();
        let sessions = simulate_corpus(&*engine.generator, &corpus)?;
        log::info!("{name}: simulated {} sessions in {:.1?}", sessions.len(), start.elapsed());
        let metrics: Vec<_> = sessions.iter().map(ImtSession::metrics).collect();
        if a.trace.is_some() {
            for (i, s) in sessions.iter().enumerate() {
                traces.push_str(&format!("# {name} sentence {}\n{}", i + 1, s.trace()));
            }
        }
        systems.push((
            name.clone(),
            SystemComponents {
                bleu: None,
                ter: None,
                effort: Some(effort_components(&metrics, &refs)?),
            },
        ));
    }
    if let Some(p) = &a.trace {
        fs::write(p, traces).with_context(|| format!("writing {}", p.display()))?;
    }
    let baseline = with_baseline.then_some("Baseline");
    let report = EvalReport::build(systems, baseline, a.reps, a.seed)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report.to_json())?)?;
    } else {
        writeln!(out, "IMT results on {} ({})", corpus.name, corpus_stats(&corpus))?;
        write!(out, "{}", report.render_effort())?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let refs = read_sentences(&a.reference)?;
    ensure!(!refs.is_empty(), "{}: no reference sentences", a.reference.display());
    let mut systems = Vec::new();
    for (name, path) in &a.hyp {
        if systems.iter().any(|(n, _)| n == name) {
            bail!("system {name:?} given twice");
        }
        let hyps = read_sentences(path)?;
        ensure!(
            hyps.len() == refs.len(),
            "{}: {} lines but the reference has {}",
            path.display(),
            hyps.len(),
            refs.len()
        );
        systems.push((
            name.clone(),
            SystemComponents {
                bleu: Some(bleu_components(&hyps, &refs)?),
                ter: Some(ter_components(&hyps, &refs)?),
                effort: None,
            },
        ));
    }
    if let Some(b) = &a.baseline {
        ensure!(systems.iter().any(|(n, _)| n == b), "baseline {b:?} is not among the systems");
    }
    let report = EvalReport::build(systems, a.baseline.as_deref(), a.reps, a.seed)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report.to_json())?)?;
    } else {
        write!(out, "{}", report.render_quality())?;
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let modern = match &a.modern {
        Some(p) => load_monolingual(p)?,
        None => sample_modern_text(a.sentences, a.seed),
    };
    ensure!(!modern.is_empty(), "no modern sentences to age");
    let rules = match &a.rules {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DriftRule::parse_rules(&text)?
        }
        None => builtin_rules(),
    };
    let corpus = synth_drift(&modern, &rules, a.seed);
    write_lines(&a.out_src, corpus.sources().map(detokenize))?;
    write_lines(&a.out_tgt, corpus.targets().map(detokenize))?;
    writeln!(out, "{}", corpus_stats(&corpus))?;
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let registry = a.engines.registry()?;
    let store = match &a.journal {
        Some(p) => SessionStore::with_journal(p)?,
        None => SessionStore::in_memory(),
    };
    if let Some(dir) = &a.static_dir {
        ensure!(dir.is_dir(), "{}: not a directory", dir.display());
    }
    let names: Vec<String> = registry.infos().into_iter().map(|e| e.name).collect();
    eprintln!("engines: {}", names.join(", "));
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(serve(addr, AppState::new(registry, store), a.static_dir))
}
