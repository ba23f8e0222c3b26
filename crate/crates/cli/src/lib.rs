//! Command-line harness for the simultaneous translation toolkit.
//!
//! Every command is a plain function over explicit readers and writers so
//! the binary and the integration tests share one code path.

pub mod config;
pub mod data;
pub mod sweep;
pub mod svg;
pub mod trace;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use simulmt_core::decoding::{beam_search, default_max_len, greedy_decode, TokenSource};
use simulmt_core::metrics::{corpus_bleu, delay_tau};
use simulmt_core::training::{token_accuracy, train, write_log_csv};
use simulmt_core::{
    Checkpoint, Criterion, InputPipe, OutputPipe, SimulConfig, TokenId, Vocabulary,
};

use config::RunConfig;

pub const CHECKPOINT_FILE: &str = "model.smdc";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const FRONTIER_SVG_FILE: &str = "frontier.svg";

#[derive(Debug, Parser)]
#[command(name = "simulmt", version, about = "Simultaneous neural machine translation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write the checkpoint, training log and split files.
    Train(TrainArgs),
    /// Consecutive greedy or beam-search translation of a file.
    Translate(TranslateArgs),
    /// Streaming simultaneous decoding: one token per line on stdin.
    Simul(SimulArgs),
    /// Quality/delay sweep over the delta x s0 x criterion grid.
    Sweep(SweepArgs),
    /// Render the chunk alignment of one simultaneous translation.
    Trace(TraceArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    Bleu(BleuArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Worse,
    Diff,
    Entropy,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Worse => Criterion::WaitIfWorse,
            CriterionArg::Diff => Criterion::WaitIfDiff,
            CriterionArg::Entropy => Criterion::Entropy,
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected an integer >= 1, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; the built-in cipher setup when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `training.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One whitespace-tokenized sentence per line.
    #[arg(long)]
    pub input: PathBuf,
    /// 1 is greedy decoding.
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub beam_width: usize,
    /// Target length cap; `2|X| + 10` per sentence when omitted.
    #[arg(long, value_parser = positive)]
    pub max_len: Option<usize>,
    /// Write `translations.txt` here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DecodeArgs {
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub delta: usize,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub s0: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Worse)]
    pub criterion: CriterionArg,
    /// Target length cap; `2s + 10` with `s` the tokens received so far
    /// when omitted.
    #[arg(long, value_parser = positive)]
    pub max_len: Option<usize>,
}

impl DecodeArgs {
    pub fn simul_config(&self) -> SimulConfig {
        SimulConfig {
            max_target_len: self.max_len,
            ..SimulConfig::new(self.delta, self.s0, self.criterion.into())
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test sources; `test.src` next to the checkpoint when omitted.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Test references; `test.tgt` next to the checkpoint when omitted.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Takes the sweep grid from this run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict the grid to one delta.
    #[arg(long, value_parser = positive)]
    pub delta: Option<usize>,
    /// Restrict the grid to one s0.
    #[arg(long, value_parser = positive)]
    pub s0: Option<usize>,
    /// Restrict the grid to one criterion.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Add the entropy criterion to the grid.
    #[arg(long)]
    pub entropy: bool,
    /// Width of the beam-search baseline row.
    #[arg(long, value_parser = positive)]
    pub beam_width: Option<usize>,
    /// Directory for `sweep.csv` and `frontier.svg`, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Source sentence, whitespace-tokenized, without `<eos>`.
    #[arg(long)]
    pub sentence: String,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Also write `trace.txt` and `trace.svg` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    /// One hypothesis per line.
    pub hypotheses: PathBuf,
    /// One reference per line, aligned with the hypotheses.
    pub references: PathBuf,
}

/// A command-line problem clap cannot see, such as a bad flag combination.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(simulmt_core::Error::Diverged { .. }) = cause.downcast_ref() {
            return EXIT_DIVERGED;
        }
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
    }
    EXIT_DATA
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, stdin, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cmd: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(&a, stdout),
        Command::Translate(a) => cmd_translate(&a, stdout),
        Command::Simul(a) => cmd_simul(&a, stdin, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
        Command::Trace(a) => cmd_trace(&a, stdout),
        Command::Bleu(a) => cmd_bleu(&a, stdout),
    }
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    let data = data::load(&cfg.data)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    data::write_splits(&args.out, &data.text)?;
    fs::write(
        args.out.join("config.json"),
        serde_json::to_string_pretty(&cfg)? + "\n",
    )?;

    let model = cfg
        .model
        .with_vocab(data.source_vocab.len(), data.target_vocab.len());
    let outcome = train(model, &data.train, &data.valid, &cfg.training)?;

    let mut log = Vec::new();
    write_log_csv(&outcome.log, &mut log)?;
    fs::write(args.out.join(TRAIN_LOG_FILE), log)?;
    let ckpt = Checkpoint::new(outcome.params, data.source_vocab, data.target_vocab)?;
    ckpt.save(args.out.join(CHECKPOINT_FILE))?;

    let epochs = outcome.log.len();
    writeln!(stdout, "epochs {epochs} best_epoch {}", outcome.best_epoch)?;
    if !data.test.is_empty() {
        let acc = token_accuracy(&ckpt.params, &data.test)?;
        writeln!(stdout, "test_token_accuracy {acc:.6}")?;
    }
    writeln!(stdout, "checkpoint {}", args.out.join(CHECKPOINT_FILE).display())?;
    Ok(())
}

pub fn cmd_translate(args: &TranslateArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let lines = data::read_lines(&args.input)?;
    let mut out = String::new();
    for line in &lines {
        let src = ckpt.source_vocab.encode_line(line);
        let max_len = args.max_len.unwrap_or_else(|| default_max_len(src.len()));
        let ids = if args.beam_width == 1 {
            greedy_decode(&ckpt.params, &src, max_len)?.tokens()
        } else {
            beam_search(&ckpt.params, &src, args.beam_width, max_len)?.tokens
        };
        out.push_str(&ckpt.target_vocab.decode(&ids));
        out.push('\n');
    }
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("translations.txt"), out)?;
        }
        None => stdout.write_all(out.as_bytes())?,
    }
    Ok(())
}

/// Reads one token per line. Blank lines are skipped; a line holding more
/// than one token is a protocol error.
struct LineTokens<'a> {
    reader: &'a mut dyn BufRead,
    vocab: &'a Vocabulary,
    line: String,
}

impl TokenSource for LineTokens<'_> {
    fn next_token(&mut self) -> simulmt_core::Result<Option<TokenId>> {
        loop {
            self.line.clear();
            if self.reader.read_line(&mut self.line)? == 0 {
                return Ok(None);
            }
            let mut toks = self.line.split_whitespace();
            match (toks.next(), toks.next()) {
                (None, _) => continue,
                (Some(t), None) => return Ok(Some(self.vocab.id_or_unk(t))),
                (Some(_), Some(_)) => {
                    return Err(simulmt_core::Error::Protocol(format!(
                        "expected one token per line, got `{}`",
                        self.line.trim_end()
                    )))
                }
            }
        }
    }
}

/// One line per committed token, `token<TAB>s<TAB>s'<TAB>logp`.
pub fn format_commit(vocab: &Vocabulary, step: &simulmt_core::decoding::TraceStep) -> String {
    format!(
        "{}\t{}\t{}\t{:.6}",
        vocab.token(step.token).unwrap_or("<unk>"),
        step.s,
        step.s_prime,
        step.logp
    )
}

/// Serves sentences from `input` until it ends; see [`Command::Simul`].
pub fn simul_session(
    ckpt: &Checkpoint,
    cfg: &SimulConfig,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    loop {
        let mut source = LineTokens {
            reader: &mut *input,
            vocab: &ckpt.source_vocab,
            line: String::new(),
        };
        let mut pipe = InputPipe::new(&mut source);
        let result = {
            let mut output = OutputPipe::with_sink(|step: &simulmt_core::decoding::TraceStep| {
                let line = format_commit(&ckpt.target_vocab, step);
                writeln!(out, "{line}")
                    .and_then(|_| out.flush())
                    .map_err(simulmt_core::Error::Io)
            });
            simulmt_core::simul_greedy_decode(&ckpt.params, &mut pipe, &mut output, cfg)
        };
        let trace = match result {
            Ok(t) => t,
            // The stream ended cleanly between sentences.
            Err(simulmt_core::Error::EmptySource) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let source_len = pipe.drain()?;
        let tau = delay_tau(&trace.s_values(), source_len)?;
        writeln!(out, "#trace tau={tau:.6} truncated={}", u8::from(trace.truncated))?;
        out.flush()?;
    }
}

pub fn cmd_simul(args: &SimulArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    simul_session(&ckpt, &args.decode.simul_config(), stdin, stdout)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let mut grid = load_config(args.config.as_deref())?.sweep;
    if let Some(d) = args.delta {
        grid.deltas = vec![d];
    }
    if let Some(s) = args.s0 {
        grid.s0s = vec![s];
    }
    if let Some(c) = args.criterion {
        grid.criteria = vec![c.into()];
    }
    if args.entropy {
        grid = grid.with_entropy();
    }
    if let Some(w) = args.beam_width {
        grid.beam_width = w;
    }
    grid.validate().map_err(|e| UsageError(e.to_string()))?;

    let dir = args.checkpoint.parent().unwrap_or(Path::new("."));
    let src_path = args.source.clone().unwrap_or_else(|| dir.join("test.src"));
    let ref_path = args.reference.clone().unwrap_or_else(|| dir.join("test.tgt"));
    let sources = data::encode_sources(&ckpt.source_vocab, &data::read_lines(&src_path)?);
    let references: Vec<Vec<String>> = data::read_lines(&ref_path)?
        .iter()
        .map(|l| data::tokens(l))
        .collect();
    if sources.is_empty() {
        bail!("test corpus {} is empty", src_path.display());
    }

    let rows = sweep::SweepData {
        params: &ckpt.params,
        target_vocab: &ckpt.target_vocab,
        sources: &sources,
        references: &references,
    }
    .run(&grid)?;

    fs::create_dir_all(&args.out)?;
    let mut csv = Vec::new();
    sweep::write_csv(&rows, &mut csv)?;
    fs::write(args.out.join(SWEEP_CSV_FILE), &csv)?;
    fs::write(
        args.out.join(FRONTIER_SVG_FILE),
        svg::frontier_svg(&rows, "Quality vs. delay"),
    )?;

    stdout.write_all(&csv)?;
    for best in sweep::best_by_criterion(&rows) {
        writeln!(
            stdout,
            "best_q2d criterion={} delta={} s0={} bleu={:.4} mean_tau={:.4} q2d={:.4}",
            best.label,
            best.delta.unwrap_or(0),
            best.s0.unwrap_or(0),
            best.bleu,
            best.mean_tau,
            best.q2d
        )?;
    }
    Ok(())
}

pub fn cmd_trace(args: &TraceArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let cfg = args.decode.simul_config();
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let src = ckpt.source_vocab.encode_line(&args.sentence);
    let mut input = InputPipe::from_tokens(src.clone());
    let mut output = OutputPipe::new();
    let trace = simulmt_core::simul_greedy_decode(&ckpt.params, &mut input, &mut output, &cfg)?;
    let tau = delay_tau(&trace.s_values(), src.len())?;

    let r = trace::Rendering::new(&src, &trace, &ckpt.source_vocab, &ckpt.target_vocab);
    let text = format!("{}tau {tau:.6}\n", r.text());
    stdout.write_all(text.as_bytes())?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trace.txt"), &text)?;
        let title = format!(
            "{} delta={} s0={} tau={tau:.3}",
            cfg.criterion, cfg.delta, cfg.s0
        );
        fs::write(dir.join("trace.svg"), r.svg(&title))?;
    }
    Ok(())
}

pub fn cmd_bleu(args: &BleuArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let read = |p: &Path| -> anyhow::Result<Vec<Vec<String>>> {
        Ok(data::read_lines(p)?.iter().map(|l| data::tokens(l)).collect())
    };
    let hyps = read(&args.hypotheses)?;
    let refs = read(&args.references)?;
    let report = corpus_bleu(&hyps, &refs, 4)?;
    let precisions: Vec<String> = report
        .precisions
        .iter()
        .map(|p| format!("{:.4}", 100.0 * p))
        .collect();
    writeln!(
        stdout,
        "BLEU = {:.4} ({}) BP = {:.4} hyp_len = {} ref_len = {}",
        report.bleu,
        precisions.join("/"),
        report.brevity_penalty,
        report.hyp_len,
        report.ref_len
    )?;
    Ok(())
}
