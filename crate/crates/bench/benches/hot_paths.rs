use std::collections::BTreeMap;
use std::hint::black_box;

use cci_core::cultures::global_cultures;
use cci_core::gateway::json::extract_first_object;
use cci_core::{compute_cci_with_log, roc_auc, CultureSet, GeneralityVector};
use criterion::{criterion_group, criterion_main, Criterion};

/// Cheap deterministic values in [0, 1].
fn lcg(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed;
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn bench_cci(c: &mut Criterion) {
    let names = global_cultures();
    let set = CultureSet::new(names.clone(), "Japan").unwrap();
    let scores: BTreeMap<String, f64> = names.into_iter().zip(lcg(19, 1)).collect();
    let vector = GeneralityVector::single_run(scores).unwrap();
    c.bench_function("cci_19_cultures", |b| {
        b.iter(|| compute_cci_with_log(black_box(&vector), black_box(&set)).unwrap())
    });
}

fn bench_auc(c: &mut Criterion) {
    let pos: Vec<f64> = lcg(300, 2).iter().map(|x| (x * 100.0).round() / 100.0).collect();
    let neg: Vec<f64> = lcg(300, 3).iter().map(|x| (x * 80.0).round() / 100.0).collect();
    c.bench_function("roc_auc_300x300", |b| {
        b.iter(|| roc_auc(black_box(&pos), black_box(&neg)).unwrap())
    });
}

fn bench_extract(c: &mut Criterion) {
    let text = format!(
        "Sure! Here is my reasoning {{not json}} and then:\n```json\n{{\"scores\": {{{}}}}}\n```",
        global_cultures()
            .iter()
            .map(|c| format!("\"{c}\": 0.42"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    c.bench_function("extract_first_object_noisy", |b| {
        b.iter(|| extract_first_object(black_box(&text)).unwrap())
    });
}

criterion_group!(benches, bench_cci, bench_auc, bench_extract);
criterion_main!(benches);
