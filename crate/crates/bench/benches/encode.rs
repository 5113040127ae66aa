use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use whyprov::{encode, goal_closure, Acyclicity, EncodeOptions};
use whyprov_bench::{evaluate, middle_answer, transclosure, GRAPHS};

fn closure_and_encode(c: &mut Criterion) {
    let mut group = c.benchmark_group("encode");
    group.sample_size(10);
    for (n, m) in GRAPHS {
        let (q, db) = transclosure(n, m);
        let fix = evaluate(&q, &db);
        let goal = q.goal(&middle_answer(&q, &fix)).unwrap();
        let label = format!("{n}x{m}");
        group.bench_function(BenchmarkId::new("closure", &label), |b| {
            b.iter(|| goal_closure(&db, &fix, &goal).unwrap().graph.node_count())
        });
        let dc = goal_closure(&db, &fix, &goal).unwrap();
        for (name, acyc) in [("tc", Acyclicity::TransitiveClosure), ("ve", Acyclicity::VertexElimination)] {
            if name == "tc" && n > 1000 {
                continue;
            }
            let opts = EncodeOptions::with(acyc);
            group.bench_function(BenchmarkId::new(name, &label), |b| {
                b.iter(|| encode(&dc, &opts).unwrap().cnf.clauses.len())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, closure_and_encode);
criterion_main!(benches);
