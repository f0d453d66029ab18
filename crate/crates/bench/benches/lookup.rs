// SPDX-License-Identifier: Apache-2.0
// Copyright The tuplechain Authors

use criterion::{criterion_group, criterion_main};

criterion_group!(benches, tuplechain_bench::lookup);
criterion_main!(benches);
