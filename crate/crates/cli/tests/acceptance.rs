//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach the terminal in
//! order. Exits non-zero when a hard criterion fails; criterion 7 is soft
//! and only reports.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use simulmt_cli::config::RunConfig;
use simulmt_cli::data;
use simulmt_cli::sweep::SweepData;
use simulmt_cli::{cmd_train, TrainArgs, CHECKPOINT_FILE};
use simulmt_core::decoding::{
    default_max_len, greedy_decode, wait_if_diff, wait_if_entropy, wait_if_worse, WaitPolicy,
};
use simulmt_core::metrics::{corpus_bleu, delay_tau};
use simulmt_core::model::{ModelConfig, ModelParams};
use simulmt_core::numerics::{fd_gradient, log_softmax, Rng};
use simulmt_core::training::{generate_task, grad_nll, nll, token_accuracy};
use simulmt_core::{
    Checkpoint, Criterion, InputPipe, OutputPipe, SentencePair, SimulConfig, SweepResult,
    TaskKind, TaskSpec, EOS,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { pass: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { pass: false, detail: detail.into() }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A trained model with its test split.
struct Trained {
    ckpt: Checkpoint,
    test_pairs: Vec<SentencePair>,
    sources: Vec<Vec<usize>>,
    references: Vec<Vec<String>>,
    best_epoch: usize,
    elapsed: Duration,
}

fn train_from_config(cfg_path: &Path, out: &Path) -> Trained {
    let start = Instant::now();
    let args = TrainArgs {
        config: Some(cfg_path.to_path_buf()),
        seed: None,
        out: out.to_path_buf(),
    };
    let mut log = Vec::new();
    cmd_train(&args, &mut log).expect("training succeeds");
    let elapsed = start.elapsed();
    let ckpt = Checkpoint::load(out.join(CHECKPOINT_FILE)).unwrap();
    let cfg = RunConfig::load(cfg_path).unwrap();
    let data = data::load(&cfg.data).unwrap();
    let text = String::from_utf8(log).unwrap();
    let best_epoch = text
        .split_whitespace()
        .skip_while(|w| *w != "best_epoch")
        .nth(1)
        .and_then(|w| w.parse().ok())
        .expect("best_epoch in training output");
    Trained {
        sources: data::encode_sources(&ckpt.source_vocab, &data.text[2].source),
        references: data.text[2].target.iter().map(|l| data::tokens(l)).collect(),
        test_pairs: data.test,
        ckpt,
        best_epoch,
        elapsed,
    }
}

fn sweep(model: &Trained, cfg_path: &Path) -> (Vec<SweepResult>, Duration) {
    let start = Instant::now();
    let grid = RunConfig::load(cfg_path).unwrap().sweep;
    let rows = SweepData {
        params: &model.ckpt.params,
        target_vocab: &model.ckpt.target_vocab,
        sources: &model.sources,
        references: &model.references,
    }
    .run(&grid)
    .expect("sweep completes within the forward-pass bound");
    (rows, start.elapsed())
}

fn cell<'a>(rows: &'a [SweepResult], label: &str, delta: usize, s0: usize) -> &'a SweepResult {
    rows.iter()
        .find(|r| r.label == label && r.delta == Some(delta) && r.s0 == Some(s0))
        .unwrap_or_else(|| panic!("missing cell {label} {delta} {s0}"))
}

fn cipher_sentences(count: usize) -> Vec<Vec<usize>> {
    let spec = TaskSpec {
        kind: TaskKind::Cipher,
        vocab_size: 20,
        min_len: 4,
        max_len: 16,
        count: count * 10,
        seed: 11,
    };
    let d = generate_task(&spec).unwrap();
    d.test.into_iter().take(count).map(|p| p.source).collect()
}

fn criterion_1() -> Outcome {
    let sentences = cipher_sentences(100);
    let mut checked = 0;
    for seed in 1..=5u64 {
        let params =
            ModelParams::gaussian(ModelConfig::with_vocab(20, 20), 0.5, &mut Rng::new(seed));
        for src in &sentences {
            let max_len = default_max_len(src.len());
            let greedy = greedy_decode(&params, src, max_len).unwrap().tokens();
            for crit in [Criterion::WaitIfWorse, Criterion::WaitIfDiff, Criterion::Entropy] {
                for s0 in [src.len(), src.len() + 3] {
                    let mut input = InputPipe::from_tokens(src.clone());
                    let mut output = OutputPipe::new();
                    let cfg = SimulConfig {
                        max_target_len: Some(max_len),
                        ..SimulConfig::new(1, s0, crit)
                    };
                    let t = simulmt_core::simul_greedy_decode(&params, &mut input, &mut output, &cfg)
                        .unwrap();
                    if t.tokens() != greedy {
                        return fail(format!("seed {seed}, source {src:?}, {crit}, s0 {s0}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    pass(format!("{checked} decodes over 100 sentences x 5 seeds match greedy exactly"))
}

fn criterion_2() -> Outcome {
    let mut rng = Rng::new(5);
    let params = ModelParams::gaussian(ModelConfig::with_vocab(20, 20), 0.3, &mut rng);
    for i in 0..100 {
        let len = 1 + rng.below(20);
        let mut src: Vec<usize> = (0..len).map(|_| 3 + rng.below(17)).collect();
        src.push(EOS);
        let split = rng.below(src.len() + 1);
        let full = params.encode(&src).unwrap();
        let head = params.encode(&src[..split]).unwrap();
        let grown = params.extend_context(&head, &src[split..]).unwrap();
        if grown.vectors() != full.vectors() || grown.carry() != full.carry() {
            return fail(format!("pair {i}: split {split} of {src:?}"));
        }
    }
    pass("100 (sentence, split) pairs bit-identical")
}

fn criterion_3() -> Outcome {
    let cfg = ModelConfig {
        source_vocab: 8,
        target_vocab: 8,
        emb_dim: 4,
        hidden_dim: 6,
        att_dim: 6,
    };
    let mut rng = Rng::new(99);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut params = ModelParams::gaussian(cfg, 0.3, &mut rng);
        let sentence = |rng: &mut Rng| vec![3 + rng.below(5), 3 + rng.below(5), EOS];
        let pair = SentencePair {
            source: sentence(&mut rng),
            target: sentence(&mut rng),
        };
        let (_, g) = grad_nll(&params, &pair);
        let flat = params.to_flat();
        let fd = fd_gradient(
            |x| {
                params.set_flat(x);
                nll(&params, &pair)
            },
            &flat,
            1e-5,
        );
        for (a, b) in g.to_flat().iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-5));
        }
    }
    let detail = format!("max relative error {worst:.3e} over 20 instances");
    if worst < 1e-4 { pass(detail) } else { fail(detail) }
}

fn criterion_4() -> Outcome {
    let consecutive = delay_tau(&[7; 9], 7).unwrap();
    let diagonal = delay_tau(&[1, 2, 3, 4], 4).unwrap();
    let t = 1000;
    let s: Vec<usize> = (1..=t).collect();
    let asymptote = delay_tau(&s, t).unwrap();
    let detail = format!(
        "consecutive {consecutive}, diagonal(4) {diagonal}, diagonal(1000) {asymptote}"
    );
    if consecutive == 1.0 && diagonal == 0.625 && (asymptote - 0.5).abs() < 1e-3 {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn criterion_8() -> Outcome {
    let mut cases = 0;
    // Wait-If-Worse: strict decrease of the same token's log-probability.
    for (small, large, expect) in [(-1.0, -1.5, true), (-1.0, -1.0, false), (-2.0, -1.0, false)] {
        if wait_if_worse(small, large) != expect {
            return fail(format!("worse({small}, {large})"));
        }
        cases += 1;
    }
    // Through the policy: the token is the argmax under the small context.
    let dist = |p: &[f64]| p.iter().map(|x: &f64| x.ln()).collect::<Vec<_>>();
    // Pairwise distinct entropies, so the entropy verdict never hinges on rounding.
    let grid = [
        [0.7, 0.2, 0.1],
        [0.5, 0.3, 0.2],
        [0.25, 0.65, 0.1],
        [0.4, 0.4, 0.2],
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.15, 0.25, 0.6],
    ];
    let argmax = |p: &[f64; 3]| {
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        best
    };
    let entropy = |p: &[f64; 3]| -> f64 { p.iter().map(|x| -x * x.ln()).sum() };
    for small in &grid {
        for large in &grid {
            let (ls, ll) = (dist(small), dist(large));
            let tok = argmax(small);
            let expect_worse = small[tok] > large[tok];
            let expect_diff = argmax(small) != argmax(large);
            let expect_entropy = entropy(small) > entropy(large) + 1e-12;
            let got = (
                Criterion::WaitIfWorse.decide(&ls, &ll).unwrap().wait,
                Criterion::WaitIfDiff.decide(&ls, &ll).unwrap().wait,
                Criterion::Entropy.decide(&ls, &ll).unwrap().wait,
            );
            let direct = (
                wait_if_worse(ls[tok], ll[tok]),
                wait_if_diff(argmax(small), argmax(large)),
                wait_if_entropy(small, large).unwrap(),
            );
            let expect = (expect_worse, expect_diff, expect_entropy);
            if got != expect || direct != expect {
                return fail(format!("{small:?} vs {large:?}: {got:?} / {direct:?} != {expect:?}"));
            }
            cases += 1;
        }
    }
    // Ties inside an argmax resolve to the lowest id.
    let tie = log_softmax(&[1.0, 1.0, 0.0]).unwrap();
    let second = log_softmax(&[0.0, 1.0, 1.0]).unwrap();
    let d = Criterion::WaitIfDiff.decide(&tie, &second).unwrap();
    if (d.argmax_small, d.argmax_large, d.wait) != (0, 1, true) {
        return fail("argmax tie-break");
    }
    pass(format!("{} ordering cases", cases + 1))
}

fn criterion_9() -> Outcome {
    let toks = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    let corpus = vec![toks("a b c d e"), toks("the cat sat on the mat")];
    let same = corpus_bleu(&corpus, &corpus, 4).unwrap().bleu;
    let clipped = corpus_bleu(&[toks("the the the the")], &[toks("the cat")], 4).unwrap();
    let bp3 = corpus_bleu(&[toks("a b c")], &[toks("a b c d")], 3).unwrap().bleu;
    let bp4 = corpus_bleu(&[toks("a b c d e f")], &[toks("a b c d e f g h")], 4)
        .unwrap()
        .bleu;
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    let detail = format!(
        "identical {same}, clipped p1 {} bleu {}, brevity {:.4} / {:.4}",
        clipped.precisions[0], clipped.bleu, bp3, bp4
    );
    let ok = (same - 100.0).abs() < 1e-9
        && round4(clipped.precisions[0]) == 0.25
        && clipped.precisions[1] == 0.0
        && clipped.bleu == 0.0
        && round4(bp3) == 71.6531
        && round4(bp4) == 71.6531;
    if ok { pass(detail) } else { fail(detail) }
}

fn criterion_6(model: &Trained, rows: &[SweepResult], sweep_time: Duration) -> Outcome {
    let acc = token_accuracy(&model.ckpt.params, &model.test_pairs).unwrap();
    let total = model.elapsed + sweep_time;
    let mut problems = Vec::new();
    if acc < 0.99 {
        problems.push(format!("accuracy {acc:.4} < 0.99"));
    }
    // Regression value of the default cipher run.
    if model.best_epoch != 8 {
        problems.push(format!("best epoch {} (pinned 8)", model.best_epoch));
    }
    let mut labels: Vec<&str> = rows
        .iter()
        .filter(|r| r.criterion.is_some())
        .map(|r| r.label.as_str())
        .collect();
    labels.dedup();
    let mut parts = Vec::new();
    for label in &labels {
        let lo = cell(rows, label, 1, 2).mean_tau;
        let hi = cell(rows, label, 3, 7).mean_tau;
        parts.push(format!("{label} {lo:.3}<{hi:.3}"));
        if lo.is_nan() || lo >= hi {
            problems.push(format!("(a) {label}: {lo} >= {hi}"));
        }
    }
    for r in rows {
        match r.criterion {
            Some(_) if r.mean_tau.is_nan() || r.mean_tau >= 1.0 => {
                problems.push(format!("(b) {} {:?} {:?} tau {}", r.label, r.delta, r.s0, r.mean_tau))
            }
            None if r.mean_tau != 1.0 => problems.push(format!("(b) baseline {} tau {}", r.label, r.mean_tau)),
            _ => {}
        }
    }
    if total > Duration::from_secs(300) {
        problems.push(format!("took {total:?}"));
    }
    let max_tau = rows
        .iter()
        .filter(|r| r.criterion.is_some())
        .map(|r| r.mean_tau)
        .fold(0.0, f64::max);
    let detail = format!(
        "accuracy {acc:.4}, best epoch {}, {}, max swept tau {max_tau:.4}, baselines 1, {:.0}s",
        model.best_epoch,
        parts.join(", "),
        total.as_secs_f64()
    );
    if problems.is_empty() {
        pass(detail)
    } else {
        fail(format!("{detail}; {}", problems.join("; ")))
    }
}

fn criterion_7(cipher: &[SweepResult], reverse: &[SweepResult]) -> Outcome {
    let mut matched = 0;
    let mut ok = 0;
    let mut failures = Vec::new();
    for r in reverse.iter().filter(|r| r.criterion.is_some()) {
        let c = cell(cipher, &r.label, r.delta.unwrap(), r.s0.unwrap());
        matched += 1;
        if r.mean_tau > c.mean_tau {
            ok += 1;
        } else {
            failures.push(format!(
                "{}/{}/{} {:.3}<={:.3}",
                r.label,
                r.delta.unwrap(),
                r.s0.unwrap(),
                r.mean_tau,
                c.mean_tau
            ));
        }
    }
    let detail = format!("{ok}/{matched} matched cells with reverse tau > cipher tau");
    if ok * 10 >= matched * 9 {
        pass(detail)
    } else {
        let shown: Vec<_> = failures.iter().take(6).cloned().collect();
        fail(format!("{detail}; failing cells (first 6): {}", shown.join(", ")))
    }
}

fn criterion_10(work: &Path) -> Outcome {
    let cfg = r#"{
        "data": {"task": {"kind": "cipher", "vocab_size": 12, "min_len": 3,
                 "max_len": 8, "count": 300, "seed": 2}},
        "model": {"emb_dim": 8, "hidden_dim": 12, "att_dim": 10},
        "training": {"seed": 4, "max_epochs": 2}
    }"#;
    let cfg_path = work.join("small.json");
    fs::write(&cfg_path, cfg).unwrap();
    let run = |args: &[&str], stdin: &[u8]| -> (u8, Vec<u8>) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut input = stdin;
        let code = simulmt_cli::run(
            std::iter::once("simulmt").chain(args.iter().copied()),
            &mut input,
            &mut out,
            &mut err,
        );
        (code, out)
    };
    let dir = |name: &str| work.join(name).to_string_lossy().into_owned();
    let cfg_s = cfg_path.to_string_lossy().into_owned();

    let mut checkpoints = Vec::new();
    for name in ["a", "b"] {
        let (code, _) = run(&["train", "--config", &cfg_s, "--out", &dir(name)], b"");
        if code != 0 {
            return fail(format!("train exited {code}"));
        }
        checkpoints.push(fs::read(work.join(name).join(CHECKPOINT_FILE)).unwrap());
    }
    if checkpoints[0] != checkpoints[1] {
        return fail("checkpoints differ");
    }

    let ckpt = work.join("a").join(CHECKPOINT_FILE).to_string_lossy().into_owned();
    let test_src = work.join("a").join("test.src").to_string_lossy().into_owned();
    let first = fs::read_to_string(&test_src).unwrap();
    let sentence = first.lines().next().unwrap().to_owned();
    let mut stream = String::new();
    for line in first.lines().take(5) {
        for tok in line.split_whitespace() {
            stream.push_str(tok);
            stream.push('\n');
        }
        stream.push_str("<eos>\n");
    }
    let commands: Vec<(Vec<String>, Vec<u8>, Option<&str>)> = vec![
        (vec!["translate".into(), "--checkpoint".into(), ckpt.clone(), "--input".into(), test_src.clone()], vec![], None),
        (
            vec!["translate".into(), "--checkpoint".into(), ckpt.clone(), "--input".into(), test_src.clone(), "--beam-width".into(), "5".into()],
            vec![],
            None,
        ),
        (
            vec!["simul".into(), "--checkpoint".into(), ckpt.clone(), "--criterion".into(), "diff".into()],
            stream.into_bytes(),
            None,
        ),
        (
            vec!["trace".into(), "--checkpoint".into(), ckpt.clone(), "--sentence".into(), sentence, "--out".into(), "{out}".into()],
            vec![],
            Some("trace.svg"),
        ),
        (
            vec!["sweep".into(), "--checkpoint".into(), ckpt.clone(), "--delta".into(), "2".into(), "--entropy".into(), "--out".into(), "{out}".into()],
            vec![],
            Some("frontier.svg"),
        ),
    ];
    for (i, (args, stdin, file)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out_dir = dir(&format!("cmd{i}_{rep}"));
            let args: Vec<String> = args
                .iter()
                .map(|a| if a == "{out}" { out_dir.clone() } else { a.clone() })
                .collect();
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let (code, stdout) = run(&refs, stdin);
            if code != 0 {
                return fail(format!("{} exited {code}", args[0]));
            }
            let file_bytes = file.map(|f| fs::read(Path::new(&out_dir).join(f)).unwrap());
            outputs.push((stdout, file_bytes));
        }
        if outputs[0] != outputs[1] {
            return fail(format!("{} output not reproducible", args[0]));
        }
    }
    pass("identical checkpoints; translate, beam, simul, trace and sweep byte-identical on rerun")
}

fn panic_message(e: &(dyn std::any::Any + Send)) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().unwrap();
    let mut hard_failure = false;
    let mut report = |n: u8, name: &str, hard: bool, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| fail(format!("panicked: {}", panic_message(&*e))));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        let kind = if hard { "" } else { " (soft)" };
        println!(
            "criterion {n:>2} {name}{kind}: {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if hard && !outcome.pass {
            hard_failure = true;
        }
    };

    report(1, "reduction equivalence", true, &mut criterion_1);
    report(2, "incremental encoder", true, &mut criterion_2);
    report(3, "gradient oracle", true, &mut criterion_3);
    report(4, "delay pinned values", true, &mut criterion_4);

    let cipher_cfg = configs_dir().join("cipher.json");
    let reverse_cfg = configs_dir().join("reverse.json");
    let default_matches = RunConfig::load(&cipher_cfg).ok() == Some(RunConfig::default());
    // Both models feed criteria 5 to 7; a panic here fails all three.
    let trained = panic::catch_unwind(|| {
        let cipher = train_from_config(&cipher_cfg, &work.path().join("cipher"));
        let cipher_sweep = sweep(&cipher, &cipher_cfg);
        let reverse = train_from_config(&reverse_cfg, &work.path().join("reverse"));
        let reverse_sweep = sweep(&reverse, &reverse_cfg);
        (cipher, cipher_sweep, reverse, reverse_sweep)
    })
    .map_err(|e| panic_message(&*e));

    match &trained {
        Ok((cipher, (cipher_rows, cipher_sweep_time), reverse, (reverse_rows, _))) => {
            report(5, "complexity bound", true, &mut || {
                let sessions = (cipher_rows.len() - 2) * cipher.sources.len()
                    + (reverse_rows.len() - 2) * reverse.sources.len();
                pass(format!(
                    "{sessions} simultaneous sessions within 2(|Y| + ceil((|X|-s0)/delta))"
                ))
            });
            report(6, "trade-off existence", true, &mut || {
                if !default_matches {
                    return fail("configs/cipher.json differs from the built-in default");
                }
                criterion_6(cipher, cipher_rows, *cipher_sweep_time)
            });
            report(7, "delay ordering across tasks", false, &mut || {
                criterion_7(cipher_rows, reverse_rows)
            });
        }
        Err(msg) => {
            report(5, "complexity bound", true, &mut || fail(format!("setup panicked: {msg}")));
            report(6, "trade-off existence", true, &mut || fail(format!("setup panicked: {msg}")));
            report(7, "delay ordering across tasks", false, &mut || {
                fail(format!("setup panicked: {msg}"))
            });
        }
    }
    report(8, "criterion truth tables", true, &mut criterion_8);
    report(9, "BLEU pinned values", true, &mut criterion_9);
    report(10, "determinism", true, &mut || criterion_10(work.path()));

    if hard_failure {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
