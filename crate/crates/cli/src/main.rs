use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use latent_ssa::data::{dataset_stats, load_dataset, save_dataset, Alignment, Example, RoleStats};
use latent_ssa::metrics::{breakdown, evaluate, Bucket};
use latent_ssa::pipeline::{predict_dataset, predict_gold_expressions};
use latent_ssa::training::{checkpoint, train};
use latent_ssa::verify::{run_all, VerifyOptions};
use latent_ssa::{ChartArena32, Model32, TrainConfig};

#[derive(Parser)]
#[command(name = "latent-ssa", version, about = "Structured sentiment analysis by latent-tree dependency parsing")]
struct Cli {
    /// Reject character offsets that do not fall on token boundaries.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes metrics.jsonl, best.ckpt and config.txt.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Development split for model selection (defaults to the training data).
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Flat key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` settings applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict tuples and write them in the dataset JSON schema.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Decode roles for the gold expressions instead of predicted ones.
        #[arg(long)]
        gold_expressions: bool,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Comma-separated increasing length lower bounds, e.g. 1,2,3,4.
        #[arg(long, value_delimiter = ',')]
        buckets: Option<Vec<usize>>,
    },
    /// Run the oracle, gradient and round-trip self-checks.
    Verify {
        #[arg(long, default_value_t = 7)]
        n_max: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Span-length statistics of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

/// Errors that are the caller's fault rather than the data's.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    Failed,
}

fn load(path: &Path, strict: bool) -> Result<Vec<Example>> {
    let align = if strict { Alignment::Strict } else { Alignment::Snap };
    Ok(load_dataset(path, align)?)
}

fn cmd_train(data: &Path, dev: Option<&Path>, config: Option<&Path>, set: &[String], out: &Path, strict: bool) -> Result<Status> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("{}", p.display()))?;
            TrainConfig::parse(&text).map_err(|e| Usage(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    let train_data = load(data, strict)?;
    let dev_data = match dev {
        Some(p) => load(p, strict)?,
        None => Vec::new(),
    };
    info!("training on {} sentences, {} dev sentences", train_data.len(), dev_data.len());
    let outcome = train::<f32>(&train_data, &dev_data, &cfg, Some(out))?;
    eprintln!(
        "best SF1 {:.4} at epoch {} ({} sentences skipped); checkpoint {}",
        outcome.best_sf1,
        outcome.best_epoch,
        outcome.skipped,
        out.join("best.ckpt").display()
    );
    Ok(Status::Ok)
}

fn cmd_predict(model: &Path, data: &Path, out: &Path, workers: usize, gold_expressions: bool, strict: bool) -> Result<Status> {
    let (model, header): (Model32, _) = checkpoint::load(model)?;
    info!("loaded model from epoch {:?} (dev SF1 {:?})", header.epoch, header.dev_sf1);
    let examples = load(data, strict)?;
    let predicted: Vec<Vec<_>> = if gold_expressions {
        let mut arena = ChartArena32::new();
        examples
            .iter()
            .map(|e| predict_gold_expressions(&model, &e.sentence.tokens, &e.tuples, &mut arena))
            .collect()
    } else {
        let tokens: Vec<Vec<String>> = examples.iter().map(|e| e.sentence.tokens.clone()).collect();
        let run = predict_dataset(&model, &tokens, workers);
        for (e, r) in examples.iter().zip(&run.results) {
            if let Err(msg) = r {
                log::error!("{}: prediction failed: {msg}", e.sentence.id);
            }
        }
        match run.throughput {
            Some(t) => eprintln!("{} sentences in {:.3}s ({t:.1} sentences/s)", run.sentences, run.seconds),
            None => eprintln!("no sentences"),
        }
        run.tuples()
    };
    let out_examples: Vec<Example> = examples
        .into_iter()
        .zip(predicted)
        .map(|(e, tuples)| Example {
            sentence: e.sentence,
            tuples,
        })
        .collect();
    save_dataset(out, &out_examples)?;
    Ok(Status::Ok)
}

fn bucket_lines(title: &str, buckets: &[Bucket]) -> String {
    let mut s = format!("{title}\n");
    for b in buckets {
        let range = match b.hi {
            Some(hi) => format!("[{}, {})", b.lo, hi),
            None => format!("[{}, inf)", b.lo),
        };
        match &b.f1 {
            Some(p) => s += &format!("  {range:<12}{:>10.3}  ({} gold, {} predicted)\n", p.f1, p.gold, p.predicted),
            None => s += &format!("  {range:<12}{:>10}\n", "-"),
        }
    }
    s
}

fn cmd_eval(gold: &Path, pred: &Path, buckets: Option<&[usize]>, strict: bool) -> Result<Status> {
    let gold = load(gold, strict)?;
    let pred = load(pred, strict)?;
    let by_id: HashMap<&str, &Example> = pred.iter().map(|e| (e.sentence.id.as_str(), e)).collect();
    let mut g = Vec::with_capacity(gold.len());
    let mut p = Vec::with_capacity(gold.len());
    for e in &gold {
        let Some(pe) = by_id.get(e.sentence.id.as_str()) else {
            bail!("prediction file has no sentence `{}`", e.sentence.id);
        };
        if pe.sentence.tokens != e.sentence.tokens {
            bail!("sentence `{}` is tokenized differently in the two files", e.sentence.id);
        }
        g.push(e.tuples.clone());
        p.push(pe.tuples.clone());
    }
    if pred.len() != gold.len() {
        bail!("gold has {} sentences, predictions {}", gold.len(), pred.len());
    }
    let report = evaluate(&g, &p)?;
    print!("{}", report.table());
    let mut json = serde_json::json!({ "metrics": report });
    if let Some(edges) = buckets {
        let b = breakdown(&g, &p, edges).map_err(|e| Usage(e.to_string()))?;
        print!("{}", bucket_lines("expression F1 by expression length", &b.expression));
        print!("{}", bucket_lines("SF1 by tuple length", &b.tuple));
        json["breakdown"] = serde_json::to_value(&b)?;
    }
    println!("{}", serde_json::to_string(&json)?);
    Ok(Status::Ok)
}

fn cmd_verify(n_max: usize, trials: usize, seed: u64) -> Result<Status> {
    if n_max == 0 || n_max > latent_ssa::charts::BRUTE_FORCE_MAX_N {
        return Err(Usage(format!("--n-max must lie in 1..={}", latent_ssa::charts::BRUTE_FORCE_MAX_N)).into());
    }
    if trials == 0 {
        return Err(Usage("--trials must be positive".into()).into());
    }
    let mut ok = true;
    for r in run_all(&VerifyOptions { n_max, trials, seed }) {
        println!(
            "{} {:<30} checks {:>8}  failures {:>4}  worst {:.3e}  {:.1}s",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.checks,
            r.failures,
            r.worst,
            r.seconds
        );
        if let Some(d) = &r.detail {
            eprintln!("  {}: {d}", r.name);
        }
        ok &= r.passed;
    }
    Ok(if ok { Status::Ok } else { Status::Failed })
}

fn role_line(name: &str, r: &RoleStats) -> String {
    let frac = r.fraction_ge4.map_or("-".to_string(), |f| format!("{:.2}%", 100.0 * f));
    let max = r.max_len.map_or("-".to_string(), |m| m.to_string());
    format!("{name:<12}{:>8}{frac:>12}{max:>8}\n", r.count)
}

fn cmd_stats(data: &Path, strict: bool) -> Result<Status> {
    let s = dataset_stats(&load(data, strict)?);
    println!("{} sentences, {} tuples", s.sentences, s.tuples);
    println!("{:<12}{:>8}{:>12}{:>8}", "role", "spans", "len>=4", "max");
    print!("{}", role_line("holder", &s.holder));
    print!("{}", role_line("target", &s.target));
    print!("{}", role_line("expression", &s.expression));
    println!("{}", serde_json::to_string(&s)?);
    Ok(Status::Ok)
}

fn run(cli: Cli) -> Result<Status> {
    let strict = cli.strict;
    match cli.command {
        Command::Train {
            data,
            dev,
            config,
            set,
            out,
        } => cmd_train(&data, dev.as_deref(), config.as_deref(), &set, &out, strict),
        Command::Predict {
            model,
            data,
            out,
            workers,
            gold_expressions,
        } => cmd_predict(&model, &data, &out, workers, gold_expressions, strict),
        Command::Eval { gold, pred, buckets } => cmd_eval(&gold, &pred, buckets.as_deref(), strict),
        Command::Verify { n_max, trials, seed } => cmd_verify(n_max, trials, seed),
        Command::Stats { data } => cmd_stats(&data, strict),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
