use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use simulmt_cli::config::SweepGrid;
use simulmt_cli::sweep::SweepData;
use simulmt_cli::{format_commit, CHECKPOINT_FILE, FRONTIER_SVG_FILE, SWEEP_CSV_FILE};
use simulmt_cli::trace::Rendering;
use simulmt_core::decoding::{default_max_len, simul_greedy_decode_with, WaitDecision, WaitPolicy};
use simulmt_core::metrics::alignment_chunks;
use simulmt_core::{
    greedy_decode, simul_greedy_decode, Checkpoint, Criterion, InputPipe, OutputPipe, SimulConfig,
};

const SMALL: &str = r#"{
    "data": {"task": {"kind": "cipher", "vocab_size": 12, "min_len": 3,
             "max_len": 8, "count": 300, "seed": 2}},
    "model": {"emb_dim": 8, "hidden_dim": 12, "att_dim": 10},
    "training": {"seed": 4, "max_epochs": 2}
}"#;

struct Output {
    code: u8,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], stdin: &str) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut input = stdin.as_bytes();
    let code = simulmt_cli::run(
        std::iter::once("simulmt").chain(args.iter().copied()),
        &mut input,
        &mut out,
        &mut err,
    );
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// A small model trained once and shared by every test in this file.
fn model_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-model");
        let _ = fs::remove_dir_all(&root);
        fs::create_dir_all(&root).unwrap();
        let cfg = root.join("small.json");
        fs::write(&cfg, SMALL).unwrap();
        let out = root.join("run");
        let r = run(&["train", "--config", &s(&cfg), "--out", &s(&out)], "");
        assert_eq!(r.code, 0, "{}", r.stderr);
        out
    })
}

fn checkpoint_path() -> String {
    s(&model_dir().join(CHECKPOINT_FILE))
}

fn checkpoint() -> Checkpoint {
    Checkpoint::load(model_dir().join(CHECKPOINT_FILE)).unwrap()
}

fn test_sentences() -> Vec<String> {
    fs::read_to_string(model_dir().join("test.src"))
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn train_writes_artifacts() {
    let dir = model_dir();
    for f in ["train.src", "train.tgt", "valid.src", "test.tgt", "config.json", "train_log.csv"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let log = fs::read_to_string(dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["frobnicate"], "").code, 1);
    assert_eq!(run(&["translate", "--checkpoint", "x"], "").code, 1);
    let r = run(&["simul", "--checkpoint", &checkpoint_path(), "--delta", "0"], "");
    assert_eq!(r.code, 1);
    assert_eq!(run(&["--help"], "").code, 0);
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = s(&tmp.path().join("nope.smdc"));
    let input = tmp.path().join("in.txt");
    fs::write(&input, "a b\n").unwrap();
    let r = run(&["translate", "--checkpoint", &missing, "--input", &s(&input)], "");
    assert_eq!(r.code, 2);
    assert!(!r.stderr.is_empty());

    let garbage = tmp.path().join("bad.smdc");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    let r = run(&["translate", "--checkpoint", &s(&garbage), "--input", &s(&input)], "");
    assert_eq!(r.code, 2);

    let r = run(&["bleu", &s(&input), &s(&tmp.path().join("absent"))], "");
    assert_eq!(r.code, 2);
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"data": {"task": {"kind": "copy", "vocab_size": 8, "min_len": 2,
                    "max_len": 4, "count": 60, "seed": 1}},
            "model": {"emb_dim": 4, "hidden_dim": 4, "att_dim": 4},
            "training": {"max_epochs": 2, "rho": -1e300}}"#,
    )
    .unwrap();
    let r = run(&["train", "--config", &s(&cfg), "--out", &s(&tmp.path().join("o"))], "");
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn translate_creates_missing_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("deep/nested");
    let input = model_dir().join("test.src");
    let r = run(
        &["translate", "--checkpoint", &checkpoint_path(), "--input", &s(&input), "--out", &s(&out)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let written = fs::read_to_string(out.join("translations.txt")).unwrap();
    assert_eq!(written.lines().count(), test_sentences().len());
}

#[test]
fn empty_input_gives_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty.txt");
    fs::write(&input, "").unwrap();
    let out = tmp.path().join("o");
    let r = run(
        &["translate", "--checkpoint", &checkpoint_path(), "--input", &s(&input), "--out", &s(&out)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fs::read_to_string(out.join("translations.txt")).unwrap(), "");

    let r = run(&["simul", "--checkpoint", &checkpoint_path()], "");
    assert_eq!((r.code, r.stdout.as_str()), (0, ""));
}

#[test]
fn beam_width_one_is_greedy() {
    let input = s(&model_dir().join("test.src"));
    let ckpt = checkpoint_path();
    let greedy = run(&["translate", "--checkpoint", &ckpt, "--input", &input], "");
    let beam1 = run(&["translate", "--checkpoint", &ckpt, "--input", &input, "--beam-width", "1"], "");
    assert_eq!(greedy.code, 0);
    assert_eq!(greedy.stdout, beam1.stdout);

    let c = checkpoint();
    let expected: String = test_sentences()
        .iter()
        .map(|line| {
            let src = c.source_vocab.encode_line(line);
            let t = greedy_decode(&c.params, &src, default_max_len(src.len())).unwrap();
            c.target_vocab.decode(&t.tokens()) + "\n"
        })
        .collect();
    assert_eq!(greedy.stdout, expected);
}

fn engine_lines(c: &Checkpoint, line: &str, cfg: &SimulConfig) -> String {
    let src = c.source_vocab.encode_line(line);
    let mut input = InputPipe::from_tokens(src.clone());
    let mut output = OutputPipe::new();
    let trace = simul_greedy_decode(&c.params, &mut input, &mut output, cfg).unwrap();
    let tau = simulmt_core::delay_tau(&trace.s_values(), src.len()).unwrap();
    let mut out = String::new();
    for step in &trace.steps {
        out.push_str(&format_commit(&c.target_vocab, step));
        out.push('\n');
    }
    out.push_str(&format!("#trace tau={tau:.6} truncated={}\n", u8::from(trace.truncated)));
    out
}

fn stream(lines: &[String]) -> String {
    let mut s = String::new();
    for line in lines {
        for tok in line.split_whitespace() {
            s.push_str(tok);
            s.push('\n');
        }
        s.push_str("<eos>\n");
    }
    s
}

#[test]
fn simul_stream_matches_engine() {
    let c = checkpoint();
    let lines: Vec<String> = test_sentences().into_iter().take(6).collect();
    for (crit, flag) in [
        (Criterion::WaitIfWorse, "worse"),
        (Criterion::WaitIfDiff, "diff"),
        (Criterion::Entropy, "entropy"),
    ] {
        let cfg = SimulConfig::new(2, 3, crit);
        let r = run(
            &["simul", "--checkpoint", &checkpoint_path(), "--delta", "2", "--s0", "3", "--criterion", flag],
            &stream(&lines),
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        let expected: String = lines.iter().map(|l| engine_lines(&c, l, &cfg)).collect();
        assert_eq!(r.stdout, expected);
    }
}

#[test]
fn simul_with_full_initial_read_matches_translate() {
    let lines: Vec<String> = test_sentences().into_iter().take(10).collect();
    let tmp = tempfile::tempdir().unwrap();
    for line in &lines {
        let n = line.split_whitespace().count() + 1;
        let r = run(
            &["simul", "--checkpoint", &checkpoint_path(), "--s0", &n.to_string()],
            &stream(std::slice::from_ref(line)),
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        let words: Vec<&str> = r
            .stdout
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split('\t').next().unwrap())
            .filter(|w| *w != "<eos>")
            .collect();
        let input = tmp.path().join("one.txt");
        fs::write(&input, format!("{line}\n")).unwrap();
        let t = run(&["translate", "--checkpoint", &checkpoint_path(), "--input", &s(&input)], "");
        assert_eq!(words.join(" "), t.stdout.trim_end());
    }
}

#[test]
fn simul_protocol_errors() {
    let r = run(&["simul", "--checkpoint", &checkpoint_path()], "a\nb\n");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("<eos>"), "{}", r.stderr);
    let r = run(&["simul", "--checkpoint", &checkpoint_path()], "a b\n<eos>\n");
    assert_eq!(r.code, 2);
}

#[test]
fn sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let r = run(
        &["sweep", "--checkpoint", &checkpoint_path(), "--delta", "1", "--entropy", "--out", &s(&out)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(out.join(SWEEP_CSV_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("criterion,delta,s0,bleu,mean_tau,q2d"));
    // 3 criteria x 1 delta x 6 initial reads, then greedy and beam.
    assert_eq!(lines.clone().count(), 3 * 6 + 2);
    assert!(lines.clone().any(|l| l.starts_with("greedy,,,")));
    assert!(lines.any(|l| l.starts_with("beam5,,,")));
    assert!(r.stdout.contains("best_q2d"));

    let svg = fs::read_to_string(out.join(FRONTIER_SVG_FILE)).unwrap();
    assert_svg_self_contained(&svg);
}

#[test]
fn sweep_row_count_for_grids() {
    let c = checkpoint();
    let sources: Vec<Vec<usize>> = test_sentences()
        .iter()
        .take(8)
        .map(|l| c.source_vocab.encode_line(l))
        .collect();
    let refs: Vec<Vec<String>> = fs::read_to_string(model_dir().join("test.tgt"))
        .unwrap()
        .lines()
        .take(8)
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect();
    let data = SweepData {
        params: &c.params,
        target_vocab: &c.target_vocab,
        sources: &sources,
        references: &refs,
    };
    for (deltas, s0s, criteria) in [
        (vec![1], vec![1], vec![Criterion::WaitIfDiff]),
        (vec![1, 4], vec![2, 3, 9], vec![Criterion::WaitIfWorse, Criterion::Entropy]),
        (vec![2, 3, 5], vec![1, 2], vec![Criterion::WaitIfWorse, Criterion::WaitIfDiff, Criterion::Entropy]),
    ] {
        let expected = deltas.len() * s0s.len() * criteria.len() + 2;
        let grid = SweepGrid { deltas, s0s, criteria, beam_width: 3 };
        let rows = data.run(&grid).unwrap();
        assert_eq!(rows.len(), expected);
        assert_eq!(rows[rows.len() - 2].label, "greedy");
        assert_eq!(rows[rows.len() - 1].label, "beam3");
        for r in &rows {
            assert!(r.mean_tau > 0.0 && r.mean_tau <= 1.0);
        }
    }
}

fn assert_svg_self_contained(svg: &str) {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    for node in doc.descendants() {
        assert_ne!(node.tag_name().name(), "image");
        assert_ne!(node.tag_name().name(), "script");
        for attr in node.attributes() {
            assert!(!attr.value().contains("http://") || attr.name() == "xmlns");
            assert!(!attr.value().starts_with("url(") || attr.value().starts_with("url(#"));
            assert_ne!(attr.name(), "href");
        }
    }
}

#[test]
fn trace_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sentence = test_sentences().remove(0);
    let out = tmp.path().join("t");
    let r = run(
        &["trace", "--checkpoint", &checkpoint_path(), "--sentence", &sentence, "--out", &s(&out)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = fs::read_to_string(out.join("trace.txt")).unwrap();
    assert_eq!(text, r.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("source  "));
    assert!(lines[1].starts_with("target  "));
    assert!(lines[2].starts_with("s'      "));
    assert!(lines[3].starts_with("tau "));
    assert_svg_self_contained(&fs::read_to_string(out.join("trace.svg")).unwrap());
}

struct NeverWait;

impl WaitPolicy for NeverWait {
    fn decide(&self, small: &[f64], large: &[f64]) -> simulmt_core::Result<WaitDecision> {
        let d = Criterion::WaitIfDiff.decide(small, large)?;
        Ok(WaitDecision { wait: false, ..d })
    }
}

#[test]
fn never_waiting_trace_has_one_leading_chunk() {
    let c = checkpoint();
    let words: Vec<String> = test_sentences()
        .into_iter()
        .find(|l| l.split_whitespace().count() == 5)
        .unwrap()
        .split_whitespace()
        .map(str::to_owned)
        .collect();
    let src = c.source_vocab.encode_line(&words.join(" "));
    assert_eq!(src.len(), 6);
    let mut input = InputPipe::from_tokens(src.clone());
    let mut output = OutputPipe::new();
    let cfg = SimulConfig::new(1, 1, Criterion::WaitIfDiff);
    let trace = simul_greedy_decode_with(&c.params, &mut input, &mut output, &cfg, &NeverWait).unwrap();
    assert!(trace.steps.iter().all(|s| s.s_prime == 1));

    let chunks = alignment_chunks(&trace.s_prime_values());
    assert_eq!(chunks.len(), 1);
    assert_eq!(chunks[0].source, 0..1);
    assert_eq!(chunks[0].target, 0..trace.len());

    let r = Rendering::new(&src, &trace, &c.source_vocab, &c.target_vocab);
    let first = r.text().lines().next().unwrap().to_owned();
    assert_eq!(first, format!("source  [{}] {} <eos>", words[0], words[1..].join(" ")));
}

#[test]
fn bleu_command() {
    let tmp = tempfile::tempdir().unwrap();
    let hyp = tmp.path().join("hyp");
    let reference = tmp.path().join("ref");
    fs::write(&hyp, "a b c\nthe cat sat on the mat\n").unwrap();
    fs::write(&reference, "a b c\nthe cat sat on the mat\n").unwrap();
    let r = run(&["bleu", &s(&hyp), &s(&reference)], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("BLEU = 100.00"), "{}", r.stdout);

    fs::write(&reference, "a b c\n").unwrap();
    let r = run(&["bleu", &s(&hyp), &s(&reference)], "");
    assert_eq!(r.code, 2);
}
