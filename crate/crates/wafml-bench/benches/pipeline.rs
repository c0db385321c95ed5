//! End-to-end hot-path benchmarks: container splitting, parsing, feature
//! extraction, per-request classification for both detectors, and the two
//! training routines (small corpus, reduced sample count).

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wafml_bench::{catalog_container, catalog_requests};
use wafml_core::features::{extract_features, FeatureVector, Lexicon};
use wafml_core::gmm::fit_gmm;
use wafml_core::http::{
    filter_headers, parse_request, split_container, HttpRequest, ONECLASS_HEADER_DROP_LIST,
};
use wafml_core::ngram::{train, ConfigSet, DEFAULT_N_MAX};

fn parsed(n: usize) -> Vec<HttpRequest> {
    catalog_requests(n)
        .iter()
        .map(|raw| parse_request(raw).expect("bench corpus parses"))
        .collect()
}

fn vectors(requests: &[HttpRequest]) -> Vec<FeatureVector> {
    let lexicon = Lexicon::builtin();
    requests
        .iter()
        .map(|req| extract_features(&filter_headers(req, &ONECLASS_HEADER_DROP_LIST), lexicon))
        .collect()
}

fn bench_ingest(c: &mut Criterion) {
    let text = catalog_container(200);
    c.bench_function("split_container/200", |b| {
        b.iter(|| split_container("bench", black_box(&text)))
    });

    let raws = catalog_requests(8);
    let get = raws[0].clone();
    let post = raws[3].clone();
    c.bench_function("parse_request/get", |b| {
        b.iter(|| parse_request(black_box(&get)).unwrap())
    });
    c.bench_function("parse_request/post", |b| {
        b.iter(|| parse_request(black_box(&post)).unwrap())
    });

    let req = parse_request(&get).unwrap();
    let lexicon = Lexicon::builtin();
    c.bench_function("extract_features", |b| {
        b.iter(|| {
            let scanned = filter_headers(black_box(&req), &ONECLASS_HEADER_DROP_LIST);
            extract_features(&scanned, lexicon)
        })
    });
}

fn bench_classify(c: &mut Criterion) {
    let requests = parsed(600);
    let vectors = vectors(&requests);
    let lexicon = Lexicon::builtin();

    let oneclass = fit_gmm(&vectors, 2, 7, lexicon.hash()).expect("bench corpus fits");
    let probe = vectors[0].clone();
    c.bench_function("oneclass_classify", |b| {
        b.iter(|| oneclass.classify(black_box(&probe), 0.5))
    });

    let ngram = train(&requests, ConfigSet::builtin(DEFAULT_N_MAX), BTreeMap::new())
        .expect("bench corpus trains");
    let get = &requests[0];
    let post = &requests[3];
    c.bench_function("ngram_classify/get", |b| {
        b.iter(|| ngram.classify(black_box(get)))
    });
    c.bench_function("ngram_classify/post", |b| {
        b.iter(|| ngram.classify(black_box(post)))
    });
}

fn bench_training(c: &mut Criterion) {
    let requests = parsed(600);
    let vectors = vectors(&requests);
    let lexicon = Lexicon::builtin();

    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("fit_gmm/600", |b| {
        b.iter(|| fit_gmm(black_box(&vectors), 2, 7, lexicon.hash()).unwrap())
    });
    group.bench_function("ngram_train/600", |b| {
        b.iter(|| {
            train(
                black_box(&requests),
                ConfigSet::builtin(DEFAULT_N_MAX),
                BTreeMap::new(),
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_ingest, bench_classify, bench_training);
criterion_main!(benches);
