use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use smhd_bench::fixture;
use smhd_core::assets;
use smhd_core::classify::build_features;
use smhd_core::corpus::{ingest_posts, IngestOptions};
use smhd_core::pattern::match_conditions;
use smhd_core::pipeline::{build_cohort, BuildConfig};
use smhd_core::psycholing::analyze;

fn benches(c: &mut Criterion) {
    let f = fixture(60);
    let patterns = assets::patterns().unwrap();
    let lexicons = assets::lexicons().unwrap();
    let policy = assets::policy().unwrap();
    let categories = assets::categories().unwrap();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);

    g.throughput(Throughput::Bytes(f.ndjson.len() as u64));
    g.bench_function("ingest", |b| {
        b.iter(|| ingest_posts(&f.ndjson[..], IngestOptions::default()).unwrap())
    });

    g.throughput(Throughput::Elements(f.posts.len() as u64));
    g.bench_function("match_conditions", |b| {
        b.iter(|| {
            f.posts
                .iter()
                .map(|p| match_conditions(&p.id, &p.text, &patterns, &lexicons, 40).len())
                .sum::<usize>()
        })
    });

    g.throughput(Throughput::Elements(f.users.len() as u64));
    g.bench_function("build_cohort", |b| {
        b.iter(|| build_cohort(&f.users, &patterns, &lexicons, &policy, &BuildConfig::default()).unwrap())
    });

    g.throughput(Throughput::Elements(f.docs.len() as u64));
    g.bench_function("tfidf_features", |b| {
        b.iter(|| build_features(&f.docs, None, 20).unwrap())
    });
    g.bench_function("analyze", |b| b.iter(|| analyze(&f.records, &f.docs, &categories).unwrap()));
    g.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
