use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lldlab::divisor::sinh_divisor;
use lldlab::hadamard::{self, TailBoundMode, TruncationSpec};
use lldlab::newtoncramer;
use lldlab::par;
use lldlab::testfn::TestFunction;
use lldlab::vertline::{self, LineFunction};
use lldlab::Complex64;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn bench(c: &mut Criterion) {
    let div = sinh_divisor();
    let trunc = TruncationSpec::new(100_000, 1e-9, TailBoundMode::FromTailModel).unwrap();
    let phi = TestFunction::bump(2.0, 0.5).unwrap();
    let s = Complex64::new(1.5, 7.0);
    let g = LineFunction::coth();

    let mut group = c.benchmark_group("parallel_vs_sequential");
    group.sample_size(10);
    for (name, seq) in modes() {
        par::set_sequential(seq);
        group.bench_function(BenchmarkId::new("pair_w", name), |b| {
            b.iter(|| newtoncramer::pair_w(&div, 2, &phi, &trunc).unwrap())
        });
        group.bench_function(BenchmarkId::new("log_derivative_sum", name), |b| {
            b.iter(|| hadamard::log_derivative_sum(&div, 2, 0.0, s, &trunc).unwrap())
        });
        group.bench_function(BenchmarkId::new("line_l1_norm", name), |b| {
            b.iter(|| vertline::line_l1_norm(&g, 2.0, 2, 4096.0, 1e-8).unwrap())
        });
    }
    par::set_sequential(false);
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
