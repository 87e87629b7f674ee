use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use longmm_core::ads::plan_batch;
use longmm_core::composer::{pack, pack_sharded, PackItem};
use longmm_core::curator::{max_similarity_batch, ReferenceIndex, Span};
use longmm_core::manifest::{ImageDims, Sample, VisualItem};
use longmm_core::{AdsConfig, ClipFeature, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples(n: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..n)
        .map(|i| {
            let items = match i % 3 {
                0 => (0..rng.random_range(1..=4))
                    .map(|_| VisualItem::Image {
                        dims: ImageDims::new(rng.random_range(200..4000), rng.random_range(200..4000)).unwrap(),
                        uri: String::new(),
                    })
                    .collect(),
                1 => vec![VisualItem::Video {
                    duration_s: rng.random_range(10.0..3600.0),
                    uri: String::new(),
                }],
                _ => vec![VisualItem::Document {
                    pages: rng.random_range(1..100),
                    uri: String::new(),
                }],
            };
            Sample {
                id: format!("s{i}"),
                items,
                text_tokens: rng.random_range(0..4000),
                tags: vec![],
            }
        })
        .collect()
}

fn clips(n: usize, dim: usize, seed: u64) -> Vec<ClipFeature> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| ClipFeature {
            video_id: format!("v{}", i / 10),
            clip_index: (i % 10) as u32,
            span: Span { start_s: 0.0, end_s: 10.0 },
            vector: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_plan(c: &mut Criterion) {
    let cfg = AdsConfig::new(32768);
    let mut g = c.benchmark_group("plan_batch");
    for n in [1_000, 10_000] {
        let s = samples(n);
        g.throughput(Throughput::Elements(n as u64));
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &s, |b, s| b.iter(|| plan_batch(black_box(s), &cfg, exec)));
        }
    }
    g.finish();
}

fn bench_similarity(c: &mut Criterion) {
    let mut g = c.benchmark_group("max_similarity_batch");
    g.sample_size(10);
    let reference = clips(5_000, 64, 1);
    let index = ReferenceIndex::new(&reference).unwrap();
    let cands = clips(2_000, 64, 2);
    g.throughput(Throughput::Elements((cands.len() * reference.len()) as u64));
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| max_similarity_batch(black_box(&cands), &index, exec).unwrap()));
    }
    g.finish();
}

fn bench_pack(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let items: Vec<PackItem> = (0..100_000)
        .map(|i| PackItem::new(format!("s{i}"), rng.random_range(500..32768)))
        .collect();
    let mut g = c.benchmark_group("pack");
    g.sample_size(10);
    g.throughput(Throughput::Elements(items.len() as u64));
    g.bench_function("single_stream", |b| b.iter(|| pack(black_box(&items), 32768).unwrap()));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("sharded_8", name), |b| {
            b.iter(|| pack_sharded(black_box(&items), 32768, 8, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_plan, bench_similarity, bench_pack);
criterion_main!(benches);
