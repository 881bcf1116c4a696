use std::hint::black_box;
use std::time::Duration;

use cabinet_core::exec::Execution;
use cabinet_core::model::{CandidateDraft, OfficeDraft};
use cabinet_core::oracle::exact_pav_with;
use cabinet_core::sim::{generate_profile, Bloc, BlocSpec};
use cabinet_core::tally::greedy_pav_with;
use cabinet_core::{validate_election, ApprovalProfile, Election, ElectionDraft};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

/// `offices` offices with `slate` candidates each; one bloc per slate
/// position, sized 1..=slate, with 30% per-office defection.
fn instance(offices: usize, slate: usize, voters: usize) -> (Election, ApprovalProfile) {
    let election = validate_election(&ElectionDraft {
        name: "bench".into(),
        offices: (0..offices)
            .map(|o| OfficeDraft {
                id: format!("o{o}"),
                name: String::new(),
                candidates: (0..slate)
                    .map(|c| CandidateDraft {
                        id: format!("o{o}c{c}"),
                        name: String::new(),
                    })
                    .collect(),
            })
            .collect(),
    })
    .unwrap();
    let weight_total: usize = (1..=slate).sum();
    let blocs = (0..slate)
        .map(|pos| Bloc {
            label: format!("b{pos}"),
            voter_count: voters * (slate - pos) / weight_total,
            approved: election
                .offices()
                .iter()
                .map(|o| (o.id.to_string(), vec![o.candidates[pos].id.to_string()]))
                .collect(),
        })
        .collect();
    let spec = BlocSpec {
        name: None,
        blocs,
        seed: 7,
        defection_rate: 0.3,
    };
    let profile = generate_profile(&election, &spec).unwrap();
    (election, profile)
}

fn greedy(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_pav");
    group.warm_up_time(Duration::from_millis(500));
    for (label, (offices, slate, voters)) in [("12x4x500", (12, 4, 500)), ("20x8x20000", (20, 8, 20_000))] {
        let (election, profile) = instance(offices, slate, voters);
        for (mode, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(mode, label), &exec, |b, &exec| {
                b.iter(|| greedy_pav_with(black_box(&election), black_box(&profile), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_pav");
    group.sample_size(10);
    let (election, profile) = instance(6, 4, 200);
    for (mode, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(mode, "6x4x200"), &exec, |b, &exec| {
            b.iter(|| exact_pav_with(black_box(&election), black_box(&profile), 1 << 20, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, greedy, exact);
criterion_main!(benches);
