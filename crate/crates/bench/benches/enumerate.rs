use criterion::{criterion_group, criterion_main, Criterion};
use whyprov::{enumerate, goal_closure, EnumerateOptions, EnumerationSession};
use whyprov_bench::{evaluate, middle_answer, path_accessibility, transclosure};

fn small(c: &mut Criterion) {
    let (q, db) = path_accessibility();
    let tuple = vec![whyprov::Symbol::intern("d")];
    c.bench_function("enumerate/path-accessibility", |b| {
        b.iter(|| {
            enumerate(&q, &db, &tuple, EnumerateOptions::default())
                .unwrap()
                .count()
        })
    });
}

fn first_members(c: &mut Criterion) {
    let (q, db) = transclosure(1000, 1500);
    let fix = evaluate(&q, &db);
    let goal = q.goal(&middle_answer(&q, &fix)).unwrap();
    let dc = goal_closure(&db, &fix, &goal).unwrap();
    let mut group = c.benchmark_group("enumerate/transclosure-1000x1500");
    group.sample_size(10);
    for k in [1, 10, 100] {
        group.bench_function(format!("first-{k}"), |b| {
            b.iter(|| {
                let opts = EnumerateOptions {
                    max_members: Some(k),
                    ..Default::default()
                };
                EnumerationSession::from_closure(&dc, opts, Default::default())
                    .unwrap()
                    .count()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, small, first_members);
criterion_main!(benches);
