// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

//! Benchmark bodies shared by the bench targets.

use criterion::{black_box, BatchSize, BenchmarkId, Criterion, Throughput};
use tuplechain::harness::{Algo, Engine};
use tuplechain::workload::{gen_rules, gen_trace, gen_updates, TupleProfile, UpdateOp};
use tuplechain::{Classifier, FieldSchema, Rule, DEFAULT_MIN_HEAD_BITS};

fn dataset(n: usize, masks: usize) -> (FieldSchema, Vec<Rule>) {
    let s = FieldSchema::uniform(2, 32).expect("static schema");
    let rules = gen_rules(n as u64, n, &s, &TupleProfile::new(masks).with_density(0.1)).rules;
    (s, rules)
}

/// Lookup throughput for every algorithm over 2-field sets of growing size.
pub fn lookup(c: &mut Criterion) {
    let mut group = c.benchmark_group("lookup");
    for n in [1_000, 100_000] {
        let (s, rules) = dataset(n, 80);
        let keys = gen_trace(&s, &rules, 1, 4096, 0.8).expect("valid ratio").keys;
        group.throughput(Throughput::Elements(keys.len() as u64));
        for algo in Algo::ALL {
            if algo == Algo::Linear && n > 1_000 {
                continue;
            }
            let engine = Engine::build(algo, &s, rules.clone(), DEFAULT_MIN_HEAD_BITS).expect("valid rules");
            group.bench_with_input(BenchmarkId::new(algo.to_string(), n), &keys, |b, keys| {
                b.iter(|| {
                    for k in keys {
                        black_box(engine.lookup(k));
                    }
                })
            });
        }
    }
    group.finish();
}

/// Cost of a fixed batch of mixed inserts and deletes.
pub fn update(c: &mut Criterion) {
    let mut group = c.benchmark_group("update");
    let (s, rules) = dataset(20_000, 80);
    let ops = gen_updates(&s, &rules, 2, 1000, 0.5).expect("valid ratio").ops;
    group.throughput(Throughput::Elements(ops.len() as u64));
    for algo in [Algo::Tc, Algo::Etc, Algo::Tss] {
        let base = Engine::build(algo, &s, rules.clone(), DEFAULT_MIN_HEAD_BITS).expect("valid rules");
        group.bench_function(algo.to_string(), |b| {
            b.iter_batched(
                || base.clone(),
                |mut e| {
                    for op in &ops {
                        match op {
                            UpdateOp::Insert(r) => e.insert(r.clone()).expect("fresh id"),
                            UpdateOp::Delete(r) => assert!(e.remove(r)),
                        }
                    }
                    e
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}
