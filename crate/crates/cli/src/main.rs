// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! `tuplechain` command-line front end.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 on usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tuplechain::harness::{self, Algo, BenchConfig, Engine};
use tuplechain::workload::{self, Expected, Format, Trace, TupleProfile, UpdateStream};
use tuplechain::{Classifier, FieldSchema, Rule, DEFAULT_MIN_HEAD_BITS};

#[derive(Parser)]
#[command(name = "tuplechain", version, about = "TupleChain flow-table classifiers: build, benchmark, audit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a classifier and print its layout.
    Build(BuildArgs),
    /// Run the rate-controlled lookup/update benchmark.
    Bench(BenchArgs),
    /// Build and run every structural audit.
    Audit(AuditArgs),
    /// Cross-check classifiers against the linear oracle on a trace.
    Equiv(EquivArgs),
    /// Generate synthetic rule sets, traces and update streams.
    #[command(subcommand)]
    Gen(GenCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Tc,
    Etc,
    Tss,
    Linear,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Tc => Algo::Tc,
            AlgoArg::Etc => Algo::Etc,
            AlgoArg::Tss => Algo::Tss,
            AlgoArg::Linear => Algo::Linear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Classbench,
    Generic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

#[derive(Args)]
struct Input {
    /// Rule file (plain or gzip).
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_enum, default_value = "generic")]
    format: FormatArg,
    #[arg(long, default_value_t = DEFAULT_MIN_HEAD_BITS)]
    min_head_bits: u32,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text")]
    report: ReportArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "tc")]
    algo: AlgoArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "tc")]
    algo: AlgoArg,
    /// Trace file; a synthetic trace is generated when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Keys to generate when no trace is given.
    #[arg(long, default_value_t = 100_000)]
    keys: usize,
    /// Update stream file.
    #[arg(long)]
    updates: Option<PathBuf>,
    /// Lookup keys offered per second.
    #[arg(long, default_value_t = 1e7)]
    tx_rate: f64,
    /// Updates offered per second; 0 disables the update manager.
    #[arg(long, default_value_t = 0.0)]
    update_rate: f64,
    /// Run length in seconds; by default the trace and updates are sent once.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "tc")]
    algo: AlgoArg,
    /// Corrupt one hint before auditing (exercises the failure path).
    #[arg(long, hide = true)]
    inject_fault: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EquivArgs {
    #[command(flatten)]
    input: Input,
    /// Algorithms to check; all of them by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    algo: Vec<AlgoArg>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    keys: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Synthetic d-field rules in the generic format.
    Rules {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        fields: usize,
        #[arg(long, default_value_t = 32)]
        width: u32,
        /// Distinct masks (tuples).
        #[arg(long, default_value_t = 64)]
        masks: usize,
        /// Fraction of mask pairs related by containment.
        #[arg(long)]
        density: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        skew: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// ACL-style ClassBench filter file.
    Classbench {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lookup keys for a rule file, annotated with expected priorities.
    Trace {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0.8)]
        hit_ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistent insert/delete stream over a rule file.
    Updates {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        insert_ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Rate annotation written into the stream header.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(input: &Input) -> Result<workload::RuleSetFile> {
    let format = match input.format {
        FormatArg::Classbench => Format::ClassBench,
        FormatArg::Generic => Format::Generic,
    };
    workload::parse_rules(&input.rules, format).with_context(|| format!("loading {}", input.rules.display()))
}

fn load_trace(path: Option<&Path>, schema: &FieldSchema, rules: &[Rule], count: usize, seed: u64) -> Result<Trace> {
    Ok(match path {
        Some(p) => workload::parse_trace(p, schema).with_context(|| format!("loading {}", p.display()))?,
        None => workload::gen_trace(schema, rules, seed, count, 0.8)?,
    })
}

fn emit(output: &Output, text: impl std::fmt::Display, value: serde_json::Value) -> Result<()> {
    let body = match output.report {
        ReportArg::Text => format!("{text}\n"),
        ReportArg::Json => format!("{}\n", serde_json::to_string_pretty(&value)?),
    };
    match &output.out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn build(a: BuildArgs) -> Result<bool> {
    let file = load(&a.input)?;
    let t = Instant::now();
    let engine = Engine::build(a.algo.into(), &file.schema, file.rules, a.input.min_head_bits)?;
    let secs = t.elapsed().as_secs_f64();
    let value = json!({
        "algo": engine.algo().to_string(),
        "provenance": file.provenance,
        "rules": engine.len(),
        "build_secs": secs,
        "memory_bytes": engine.memory_bytes(),
        "layout": engine.layout(),
    });
    let text = format!(
        "algo      {}\nrules     {} ({} source, expansion x{:.2})\nbuild     {:.3}s\nmemory    {} bytes\nlayout    {}",
        engine.algo(),
        engine.len(),
        file.provenance.source_rules,
        file.provenance.expansion_factor,
        secs,
        engine.memory_bytes(),
        engine.layout()
    );
    emit(&a.output, text, value)?;
    Ok(true)
}

fn bench(a: BenchArgs) -> Result<bool> {
    let file = load(&a.input)?;
    let trace = load_trace(a.trace.as_deref(), &file.schema, &file.rules, a.keys, a.seed)?;
    let updates = match &a.updates {
        Some(p) => workload::parse_updates(p, &file.schema).with_context(|| format!("loading {}", p.display()))?,
        None => UpdateStream::default(),
    };
    if a.update_rate > 0.0 && a.updates.is_none() {
        bail!("--update-rate needs --updates");
    }
    let duration = match a.duration {
        Some(d) if !(d > 0.0 && d.is_finite()) => bail!("--duration must be positive"),
        Some(d) => Some(Duration::from_secs_f64(d)),
        None => None,
    };
    let cfg = BenchConfig {
        tx_rate: a.tx_rate,
        update_rate: a.update_rate,
        duration,
        min_head_bits: a.input.min_head_bits,
        ..BenchConfig::new(a.algo.into())
    };
    let out = harness::run_bench(&cfg, &file.schema, file.rules, trace.keys, &updates)?;
    let ok = out.report.bound_violations == 0;
    emit(&a.output, &out.report, serde_json::to_value(&out.report)?)?;
    Ok(ok)
}

fn audit(a: AuditArgs) -> Result<bool> {
    let file = load(&a.input)?;
    let report = harness::run_audit(a.algo.into(), &file.schema, file.rules, a.input.min_head_bits, a.inject_fault)?;
    let ok = report.passed;
    emit(&a.output, &report, serde_json::to_value(&report)?)?;
    Ok(ok)
}

fn equiv(a: EquivArgs) -> Result<bool> {
    let file = load(&a.input)?;
    let trace = load_trace(a.trace.as_deref(), &file.schema, &file.rules, a.keys, a.seed)?;
    let algos: Vec<Algo> = if a.algo.is_empty() {
        Algo::ALL.to_vec()
    } else {
        a.algo.iter().map(|&x| x.into()).collect()
    };
    let report = harness::run_equiv(&file.schema, file.rules.clone(), &trace.keys, &algos, a.input.min_head_bits)?;

    // Annotated traces are checked against the oracle too.
    let oracle = tuplechain::LinearScan::build(file.schema.clone(), file.rules)?;
    let mut annotation_mismatches = 0usize;
    for (k, e) in trace.keys.iter().zip(&trace.expected) {
        let got = oracle.lookup(k);
        let agrees = match e {
            None => true,
            Some(Expected::Miss) => !got.is_hit(),
            Some(Expected::Priority(p)) => got.is_hit() && got.priority() == *p,
        };
        annotation_mismatches += usize::from(!agrees);
    }
    let ok = report.passed && annotation_mismatches == 0;
    let mut value = serde_json::to_value(&report)?;
    value["annotation_mismatches"] = json!(annotation_mismatches);
    emit(&a.output, format!("{report}\nannotations   {annotation_mismatches} mismatches"), value)?;
    Ok(ok)
}

fn gen(cmd: GenCmd) -> Result<bool> {
    match cmd {
        GenCmd::Rules { count, fields, width, masks, density, skew, seed, out } => {
            let schema = FieldSchema::uniform(fields, width)?;
            let profile = TupleProfile { masks, density, skew };
            let file = workload::gen_rules(seed, count, &schema, &profile);
            workload::write_generic(&out, &schema, &file.rules)?;
        }
        GenCmd::Classbench { count, seed, out } => {
            workload::write_classbench(&out, &workload::gen_classbench(seed, count))?;
        }
        GenCmd::Trace { input, count, hit_ratio, seed, out } => {
            let file = load(&input)?;
            let mut trace = workload::gen_trace(&file.schema, &file.rules, seed, count, hit_ratio)?;
            let tc = tuplechain::TupleChain::build(file.schema.clone(), file.rules)?;
            trace.expected = trace
                .keys
                .iter()
                .map(|k| {
                    let r = tc.lookup(k);
                    Some(if r.is_hit() { Expected::Priority(r.priority()) } else { Expected::Miss })
                })
                .collect();
            workload::write_trace(&out, &file.schema, &trace)?;
        }
        GenCmd::Updates { input, count, insert_ratio, seed, rate, out } => {
            let file = load(&input)?;
            let mut stream = workload::gen_updates(&file.schema, &file.rules, seed, count, insert_ratio)?;
            stream.rate = rate;
            workload::write_updates(&out, &file.schema, &stream)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Build(a) => build(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Audit(a) => audit(a),
        Cmd::Equiv(a) => equiv(a),
        Cmd::Gen(c) => gen(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
