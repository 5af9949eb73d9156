use criterion::{criterion_group, criterion_main, Criterion};

use ischema::dsl::{parse_scenario, parse_theory};
use ischema::enumerate::{count_models, GridSpec};
use ischema::library::{all_schemas, classify, prelude};
use ischema::testkit::{random_scenario, rng};
use ischema::{Execution, Tolerances};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_classify(c: &mut Criterion) {
    let schemas = all_schemas();
    let tol = Tolerances::default();
    let scenes: Vec<_> = (0..4).map(|s| random_scenario(&mut rng(s), 8, 6)).collect();
    let mut g = c.benchmark_group("classify");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                for sc in &scenes {
                    classify(sc, &schemas, prelude(), &tol, exec).unwrap();
                }
            })
        });
    }
    g.finish();
}

fn bench_enumerate(c: &mut Criterion) {
    let th = parse_theory("theory G axiom inside(o, c) and eventually not inside(o, c) end", "g").unwrap();
    let sk = parse_scenario(
        "scenario s entity o : Object = point(0, 0) entity c : Container = circle(2, 2, 1.5) trace length 1 end",
        "s",
    )
    .unwrap();
    let mut grid = GridSpec::new((0, 4), (0, 4), vec!["o".into()]);
    grid.horizon = 3;
    let tol = Tolerances::default();
    let mut g = c.benchmark_group("enumerate");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| count_models(&th, &sk, &grid, &[], &[], &tol, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_classify, bench_enumerate);
criterion_main!(benches);
