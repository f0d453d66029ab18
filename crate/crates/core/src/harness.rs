// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Rate-controlled benchmark platform.
//!
//! Three actors: a tester streaming lookup keys, an update manager streaming
//! rule updates, and one executor that owns the classifier and drains both.
//! The sources talk to the executor through bounded queues; a full queue
//! drops the batch and counts it, like a saturated link.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, select, Receiver, Sender, TrySendError};
use serde::Serialize;

use crate::audit::AuditResult;
use crate::baseline::{linear_lookup, LinearScan, TupleSpace};
use crate::classifier::{Classifier, ProbeBound, TupleChain};
use crate::error::{Error, Result};
use crate::etc::ExtendedTupleChain;
use crate::model::{FieldSchema, FieldVector, MatchResult, Rule};
use crate::workload::{UpdateOp, UpdateStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Tc,
    Etc,
    Tss,
    Linear,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Tc, Algo::Etc, Algo::Tss, Algo::Linear];
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Tc => "tc",
            Algo::Etc => "etc",
            Algo::Tss => "tss",
            Algo::Linear => "linear",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tc" => Ok(Algo::Tc),
            "etc" => Ok(Algo::Etc),
            "tss" => Ok(Algo::Tss),
            "linear" => Ok(Algo::Linear),
            other => Err(Error::Usage(format!("unknown algo {other:?} (tc, etc, tss, linear)"))),
        }
    }
}

/// Per-lookup probe ceiling for the current structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeLimit {
    pub probes: usize,
    /// Closed-form ceiling, where one applies.
    pub closed_form: Option<f64>,
}

impl ProbeLimit {
    pub fn admits(&self, probes: u32) -> bool {
        probes as usize <= self.probes && self.closed_form.is_none_or(|c| probes as f64 <= c + 1e-9)
    }
}

/// Any of the four classifiers behind one type.
#[derive(Debug, Clone)]
pub enum Engine {
    Tc(TupleChain),
    Etc(ExtendedTupleChain),
    Tss(TupleSpace),
    Linear(LinearScan),
}

impl Engine {
    pub fn build(algo: Algo, schema: &FieldSchema, rules: Vec<Rule>, min_head_bits: u32) -> Result<Self> {
        let s = schema.clone();
        Ok(match algo {
            Algo::Tc => Engine::Tc(TupleChain::build(s, rules)?),
            Algo::Etc => Engine::Etc(ExtendedTupleChain::build(s, rules, min_head_bits)?),
            Algo::Tss => Engine::Tss(TupleSpace::build(s, rules)?),
            Algo::Linear => Engine::Linear(LinearScan::build(s, rules)?),
        })
    }

    pub fn algo(&self) -> Algo {
        match self {
            Engine::Tc(_) => Algo::Tc,
            Engine::Etc(_) => Algo::Etc,
            Engine::Tss(_) => Algo::Tss,
            Engine::Linear(_) => Algo::Linear,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Engine::Tc(c) => c,
            Engine::Etc(c) => c,
            Engine::Tss(c) => c,
            Engine::Linear(c) => c,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Classifier {
        match self {
            Engine::Tc(c) => c,
            Engine::Etc(c) => c,
            Engine::Tss(c) => c,
            Engine::Linear(c) => c,
        }
    }

    /// The most probes any single lookup may take right now.
    pub fn probe_limit(&self) -> ProbeLimit {
        match self {
            Engine::Tc(c) => {
                let b = c.probe_bound();
                ProbeLimit { probes: b.per_chain, closed_form: Some(b.closed_form) }
            }
            Engine::Etc(c) => {
                // One head probe per group plus the deepest local search.
                let probes = c
                    .groups()
                    .iter()
                    .map(|g| 1 + g.locals().map(|(_, l)| l.probe_bound().per_chain).max().unwrap_or(0))
                    .sum();
                ProbeLimit { probes, closed_form: None }
            }
            Engine::Tss(c) => ProbeLimit { probes: c.tuple_count(), closed_form: None },
            Engine::Linear(c) => ProbeLimit { probes: c.len(), closed_form: None },
        }
    }

    /// Test hook: corrupts one hint. False for algorithms without hints.
    #[doc(hidden)]
    pub fn inject_fault(&mut self) -> bool {
        match self {
            Engine::Tc(c) => c.inject_hint_fault(),
            Engine::Etc(c) => c.inject_hint_fault(),
            _ => false,
        }
    }

    /// Layout figures for reports.
    pub fn layout(&self) -> serde_json::Value {
        match self {
            Engine::Tc(c) => {
                let s = c.stats();
                let b: ProbeBound = s.probe_bound();
                serde_json::json!({
                    "tuples": s.tuple_count,
                    "chains": s.chain_count,
                    "max_chain_tuples": s.max_chain_tuples,
                    "entries": s.entry_total,
                    "owner_links": s.owner_link_total,
                    "probe_bound": b.per_chain,
                    "closed_form_bound": b.closed_form,
                })
            }
            Engine::Etc(c) => serde_json::to_value(c.stats()).unwrap_or_default(),
            Engine::Tss(c) => serde_json::json!({ "tuples": c.tuple_count() }),
            Engine::Linear(c) => serde_json::json!({ "rules": c.len() }),
        }
    }
}

impl Classifier for Engine {
    fn name(&self) -> &'static str {
        self.inner().name()
    }

    fn schema(&self) -> &FieldSchema {
        self.inner().schema()
    }

    #[inline]
    fn lookup(&self, key: &FieldVector) -> MatchResult {
        match self {
            Engine::Tc(c) => c.lookup(key),
            Engine::Etc(c) => c.lookup(key),
            Engine::Tss(c) => c.lookup(key),
            Engine::Linear(c) => c.lookup(key),
        }
    }

    fn insert(&mut self, rule: Rule) -> Result<()> {
        self.inner_mut().insert(rule)
    }

    fn remove(&mut self, rule: &Rule) -> bool {
        self.inner_mut().remove(rule)
    }

    fn len(&self) -> usize {
        self.inner().len()
    }

    fn memory_bytes(&self) -> usize {
        self.inner().memory_bytes()
    }

    fn audit(&self) -> AuditResult {
        self.inner().audit()
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algo: Algo,
    pub min_head_bits: u32,
    /// Lookup keys per second offered by the tester.
    pub tx_rate: f64,
    /// Updates per second offered by the update manager; 0 disables updates.
    pub update_rate: f64,
    /// Run length. `None` sends the trace and the update stream once each.
    pub duration: Option<Duration>,
    /// Keys per lookup batch.
    pub batch: usize,
    /// Queue capacity, in batches (lookups) or operations (updates).
    pub queue: usize,
    /// Keep every lookup result (trace index and outcome).
    pub record: bool,
}

impl BenchConfig {
    pub fn new(algo: Algo) -> Self {
        BenchConfig {
            algo,
            min_head_bits: crate::etc::DEFAULT_MIN_HEAD_BITS,
            tx_rate: 1e6,
            update_rate: 0.0,
            duration: None,
            batch: 64,
            queue: 1024,
            record: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tx_rate > 0.0 && self.tx_rate.is_finite()) {
            return Err(Error::Usage(format!("tx rate must be positive, got {}", self.tx_rate)));
        }
        if !(self.update_rate >= 0.0 && self.update_rate.is_finite()) {
            return Err(Error::Usage(format!("update rate must be non-negative, got {}", self.update_rate)));
        }
        if self.batch == 0 || self.queue == 0 {
            return Err(Error::Usage("batch and queue sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub algo: String,
    pub rules_initial: usize,
    pub rules_final: usize,
    pub tx_rate: f64,
    pub update_rate: f64,
    pub lookups_sent: u64,
    pub lookups_done: u64,
    pub lookup_drops: u64,
    pub hits: u64,
    /// Lookups completed per second, in millions.
    pub mpps: f64,
    pub avg_probes: f64,
    pub max_probes: u32,
    pub bound_violations: u64,
    pub updates_sent: u64,
    pub updates_applied: u64,
    pub update_rejects: u64,
    pub update_drops: u64,
    pub updates_per_sec: f64,
    pub memory_bytes: usize,
    pub build_secs: f64,
    pub wall_secs: f64,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "algo            {}", self.algo)?;
        writeln!(f, "rules           {} -> {}", self.rules_initial, self.rules_final)?;
        writeln!(f, "lookups         {} done / {} sent / {} dropped", self.lookups_done, self.lookups_sent, self.lookup_drops)?;
        writeln!(f, "hits            {}", self.hits)?;
        writeln!(f, "rate            {:.3} Mpps", self.mpps)?;
        writeln!(f, "probes          avg {:.2}, max {}", self.avg_probes, self.max_probes)?;
        writeln!(f, "bound viol.     {}", self.bound_violations)?;
        writeln!(
            f,
            "updates         {} applied / {} rejected / {} sent / {} dropped ({:.0}/s)",
            self.updates_applied, self.update_rejects, self.updates_sent, self.update_drops, self.updates_per_sec
        )?;
        writeln!(f, "memory          {} bytes", self.memory_bytes)?;
        write!(f, "time            build {:.3}s, run {:.3}s", self.build_secs, self.wall_secs)
    }
}

pub struct BenchOutcome {
    pub report: MetricsReport,
    /// Updates in the order the executor applied them.
    pub applied: Vec<UpdateOp>,
    /// (trace index, result) per completed lookup when recording.
    pub results: Vec<(usize, MatchResult)>,
    pub engine: Engine,
}

struct TokenBucket {
    rate: f64,
    burst: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rate: f64, burst: usize) -> Self {
        TokenBucket { rate, burst: burst as f64, tokens: burst as f64, last: Instant::now() }
    }

    /// Blocks until `n` tokens are available, or returns false at `deadline`.
    fn take(&mut self, n: usize, deadline: Option<Instant>) -> bool {
        loop {
            let now = Instant::now();
            self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.rate).min(self.burst.max(n as f64));
            self.last = now;
            if self.tokens >= n as f64 {
                self.tokens -= n as f64;
                return true;
            }
            if deadline.is_some_and(|d| now >= d) {
                return false;
            }
            let wait = Duration::from_secs_f64(((n as f64 - self.tokens) / self.rate).min(0.01));
            thread::sleep(wait);
        }
    }
}

#[derive(Default)]
struct SourceCounters {
    sent: AtomicU64,
    dropped: AtomicU64,
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

fn tester(
    keys: Arc<Vec<FieldVector>>,
    cfg: BenchConfig,
    deadline: Option<Instant>,
    tx: Sender<(usize, usize)>,
    counters: Arc<SourceCounters>,
) {
    if keys.is_empty() {
        return;
    }
    let mut bucket = TokenBucket::new(cfg.tx_rate, cfg.batch);
    let mut at = 0usize;
    loop {
        if deadline.is_none() && at >= keys.len() {
            return;
        }
        if past(deadline) {
            return;
        }
        let start = at % keys.len();
        let n = cfg.batch.min(keys.len() - start);
        if !bucket.take(n, deadline) {
            return;
        }
        counters.sent.fetch_add(n as u64, Ordering::Relaxed);
        match tx.try_send((start, n)) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) => {
                counters.dropped.fetch_add(n as u64, Ordering::Relaxed);
            }
            Err(TrySendError::Disconnected(_)) => return,
        }
        at += n;
    }
}

fn update_manager(
    ops: Vec<UpdateOp>,
    rate: f64,
    deadline: Option<Instant>,
    tx: Sender<UpdateOp>,
    counters: Arc<SourceCounters>,
) {
    let mut bucket = TokenBucket::new(rate, 1);
    for op in ops {
        if past(deadline) || !bucket.take(1, deadline) {
            return;
        }
        counters.sent.fetch_add(1, Ordering::Relaxed);
        match tx.try_send(op) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) => {
                counters.dropped.fetch_add(1, Ordering::Relaxed);
            }
            Err(TrySendError::Disconnected(_)) => return,
        }
    }
}

#[derive(Default)]
struct ExecStats {
    lookups: u64,
    hits: u64,
    probes: u64,
    max_probes: u32,
    violations: u64,
    applied: u64,
    rejects: u64,
    log: Vec<UpdateOp>,
    results: Vec<(usize, MatchResult)>,
}

fn apply(engine: &mut Engine, op: &UpdateOp) -> bool {
    match op {
        UpdateOp::Insert(r) => engine.insert(r.clone()).is_ok(),
        UpdateOp::Delete(r) => engine.remove(r),
    }
}

/// Replays `ops` in order; returns how many were accepted.
pub fn replay(engine: &mut Engine, ops: &[UpdateOp]) -> usize {
    ops.iter().filter(|op| apply(engine, op)).count()
}

fn executor(
    engine: &mut Engine,
    keys: &[FieldVector],
    lookups: Receiver<(usize, usize)>,
    updates: Receiver<UpdateOp>,
    record: bool,
) -> ExecStats {
    let mut st = ExecStats::default();
    let mut limit = engine.probe_limit();
    let mut dirty = false;
    let (mut lk_open, mut up_open) = (true, true);
    while lk_open || up_open {
        let never_l = crossbeam_channel::never();
        let never_u = crossbeam_channel::never();
        let lr = if lk_open { &lookups } else { &never_l };
        let ur = if up_open { &updates } else { &never_u };
        select! {
            recv(ur) -> msg => match msg {
                Ok(op) => {
                    if apply(engine, &op) {
                        st.applied += 1;
                    } else {
                        st.rejects += 1;
                    }
                    st.log.push(op);
                    dirty = true;
                }
                Err(_) => up_open = false,
            },
            recv(lr) -> msg => match msg {
                Ok((start, n)) => {
                    if dirty {
                        limit = engine.probe_limit();
                        dirty = false;
                    }
                    for (i, key) in keys[start..start + n].iter().enumerate() {
                        let r = engine.lookup(key);
                        st.lookups += 1;
                        st.hits += r.is_hit() as u64;
                        st.probes += r.probes as u64;
                        st.max_probes = st.max_probes.max(r.probes);
                        if !limit.admits(r.probes) {
                            st.violations += 1;
                        }
                        if record {
                            st.results.push((start + i, r));
                        }
                    }
                }
                Err(_) => lk_open = false,
            },
        }
    }
    st
}

/// Builds the classifier for `cfg.algo` and runs the three actors.
pub fn run_bench(
    cfg: &BenchConfig,
    schema: &FieldSchema,
    rules: Vec<Rule>,
    keys: Vec<FieldVector>,
    updates: &UpdateStream,
) -> Result<BenchOutcome> {
    cfg.validate()?;
    let rules_initial = rules.len();
    let t0 = Instant::now();
    let mut engine = Engine::build(cfg.algo, schema, rules, cfg.min_head_bits)?;
    let build_secs = t0.elapsed().as_secs_f64();

    let keys = Arc::new(keys);
    let (ltx, lrx) = bounded(cfg.queue);
    let (utx, urx) = bounded(cfg.queue);
    let lc = Arc::new(SourceCounters::default());
    let uc = Arc::new(SourceCounters::default());
    let start = Instant::now();
    let deadline = cfg.duration.map(|d| start + d);

    let st = thread::scope(|s| {
        {
            let (keys, cfg, lc) = (keys.clone(), cfg.clone(), lc.clone());
            s.spawn(move || tester(keys, cfg, deadline, ltx, lc));
        }
        if cfg.update_rate > 0.0 {
            let (ops, rate, uc) = (updates.ops.clone(), cfg.update_rate, uc.clone());
            s.spawn(move || update_manager(ops, rate, deadline, utx, uc));
        } else {
            drop(utx);
        }
        executor(&mut engine, &keys, lrx, urx, cfg.record)
    });
    let wall = start.elapsed().as_secs_f64();

    let report = MetricsReport {
        algo: cfg.algo.to_string(),
        rules_initial,
        rules_final: engine.len(),
        tx_rate: cfg.tx_rate,
        update_rate: cfg.update_rate,
        lookups_sent: lc.sent.load(Ordering::Relaxed),
        lookups_done: st.lookups,
        lookup_drops: lc.dropped.load(Ordering::Relaxed),
        hits: st.hits,
        mpps: if wall > 0.0 { st.lookups as f64 / wall / 1e6 } else { 0.0 },
        avg_probes: if st.lookups > 0 { st.probes as f64 / st.lookups as f64 } else { 0.0 },
        max_probes: st.max_probes,
        bound_violations: st.violations,
        updates_sent: uc.sent.load(Ordering::Relaxed),
        updates_applied: st.applied,
        update_rejects: st.rejects,
        update_drops: uc.dropped.load(Ordering::Relaxed),
        updates_per_sec: if wall > 0.0 { st.applied as f64 / wall } else { 0.0 },
        memory_bytes: engine.memory_bytes(),
        build_secs,
        wall_secs: wall,
    };
    Ok(BenchOutcome { report, applied: st.log, results: st.results, engine })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub algo: String,
    pub rules: usize,
    pub passed: bool,
    pub violation: Option<String>,
    pub memory_bytes: usize,
    pub layout: serde_json::Value,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "algo      {}", self.algo)?;
        writeln!(f, "rules     {}", self.rules)?;
        writeln!(f, "memory    {} bytes", self.memory_bytes)?;
        writeln!(f, "layout    {}", self.layout)?;
        match &self.violation {
            None => write!(f, "audit     clean"),
            Some(v) => write!(f, "audit     FAILED at {v}"),
        }
    }
}

/// Builds and runs every structural check; `inject_fault` corrupts one hint
/// first so the failure path can be exercised.
pub fn run_audit(
    algo: Algo,
    schema: &FieldSchema,
    rules: Vec<Rule>,
    min_head_bits: u32,
    inject_fault: bool,
) -> Result<AuditReport> {
    let mut engine = Engine::build(algo, schema, rules, min_head_bits)?;
    if inject_fault && !engine.inject_fault() {
        return Err(Error::Usage(format!("{algo} has no hint to corrupt")));
    }
    let violation = engine.audit().err().map(|v| v.to_string());
    Ok(AuditReport {
        algo: algo.to_string(),
        rules: engine.len(),
        passed: violation.is_none(),
        violation,
        memory_bytes: engine.memory_bytes(),
        layout: engine.layout(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub algo: String,
    pub index: usize,
    pub key: String,
    pub expected: Option<(i64, u64)>,
    pub found: Option<(i64, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivReport {
    pub keys: usize,
    pub algos: Vec<String>,
    pub divergences: u64,
    pub bound_violations: u64,
    pub first_divergence: Option<Divergence>,
    pub passed: bool,
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "keys          {}", self.keys)?;
        writeln!(f, "checked       {} against linear", self.algos.join(", "))?;
        writeln!(f, "divergences   {}", self.divergences)?;
        writeln!(f, "bound viol.   {}", self.bound_violations)?;
        match &self.first_divergence {
            None => write!(f, "equivalence   OK"),
            Some(d) => write!(
                f,
                "first         {} at key #{} {}: expected {:?}, found {:?}",
                d.algo, d.index, d.key, d.expected, d.found
            ),
        }
    }
}

fn tag(r: &MatchResult) -> Option<(i64, u64)> {
    r.rule.map(|t| (t.priority, t.id))
}

/// Cross-checks each of `algos` against the linear oracle on every key.
pub fn run_equiv(
    schema: &FieldSchema,
    rules: Vec<Rule>,
    keys: &[FieldVector],
    algos: &[Algo],
    min_head_bits: u32,
) -> Result<EquivReport> {
    let engines: Vec<Engine> = algos
        .iter()
        .filter(|&&a| a != Algo::Linear)
        .map(|&a| Engine::build(a, schema, rules.clone(), min_head_bits))
        .collect::<Result<_>>()?;
    let limits: Vec<ProbeLimit> = engines.iter().map(Engine::probe_limit).collect();
    let oracle = LinearScan::build(schema.clone(), rules)?;

    let mut divergences = 0;
    let mut bound_violations = 0;
    let mut first = None;
    for (i, key) in keys.iter().enumerate() {
        let want = tag(&linear_lookup(oracle.rules(), key));
        for (e, limit) in engines.iter().zip(&limits) {
            let got = e.lookup(key);
            if !limit.admits(got.probes) {
                bound_violations += 1;
            }
            if tag(&got) != want {
                divergences += 1;
                first.get_or_insert_with(|| Divergence {
                    algo: e.algo().to_string(),
                    index: i,
                    key: schema.display(key),
                    expected: want,
                    found: tag(&got),
                });
            }
        }
    }
    Ok(EquivReport {
        keys: keys.len(),
        algos: engines.iter().map(|e| e.algo().to_string()).collect(),
        divergences,
        bound_violations,
        passed: divergences == 0 && bound_violations == 0,
        first_divergence: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_names_round_trip() {
        for a in Algo::ALL {
            assert_eq!(a.to_string().parse::<Algo>().unwrap(), a);
        }
        assert!("bogus".parse::<Algo>().is_err());
    }

    #[test]
    fn bad_rates_are_rejected() {
        let s = FieldSchema::uniform(1, 8).unwrap();
        for (tx, up) in [(0.0, 0.0), (-1.0, 0.0), (1.0, -1.0), (f64::NAN, 0.0)] {
            let cfg = BenchConfig { tx_rate: tx, update_rate: up, ..BenchConfig::new(Algo::Tc) };
            assert!(run_bench(&cfg, &s, vec![], vec![], &UpdateStream::default()).is_err());
        }
    }

    #[test]
    fn token_bucket_paces() {
        let mut b = TokenBucket::new(2000.0, 10);
        let t = Instant::now();
        for _ in 0..30 {
            assert!(b.take(10, None));
        }
        // 300 tokens at 2000/s, first 10 free.
        assert!(t.elapsed() >= Duration::from_millis(130));
    }
}
