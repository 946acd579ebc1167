use criterion::{black_box, criterion_group, criterion_main, Criterion};

use distmatch::copula::theta::CopulaSpec;
use distmatch::density::{preset, Preset};
use distmatch::meixner::MeixnerSpec;

fn bench_poly_eval(c: &mut Criterion) {
    let spec = MeixnerSpec::normal(0.0, 1.0);
    c.bench_function("poly_eval n=8", |b| {
        b.iter(|| spec.poly_eval(black_box(8), black_box(1.3)).unwrap())
    });
}

fn bench_density_eval(c: &mut Criterion) {
    let spec = preset(Preset::Example4, 0.5).unwrap().with_kappa(0.3);
    c.bench_function("expansion density_eval d=2", |b| {
        b.iter(|| spec.density_eval(black_box(&[0.7, -1.2])).unwrap())
    });
    let spec5 = preset(Preset::Example5(4), 0.5).unwrap().with_kappa(0.05);
    c.bench_function("expansion density_eval d=4", |b| {
        b.iter(|| spec5.density_eval(black_box(&[0.7, -1.2, 0.1, 0.4])).unwrap())
    });
}

fn bench_theta_eval(c: &mut Criterion) {
    for d in [2usize, 3, 4] {
        let spec = CopulaSpec::signed_uniform(d, 0.5).unwrap();
        let u: Vec<f64> = (0..d).map(|i| 0.11 + 0.17 * i as f64).collect();
        c.bench_function(&format!("theta_eval d={d}"), |b| {
            b.iter(|| spec.theta_eval(black_box(&u)).unwrap())
        });
    }
}

fn bench_sampling(c: &mut Criterion) {
    let spec = CopulaSpec::signed_uniform(3, 0.5).unwrap();
    c.bench_function("copula sample n=1000 d=3", |b| {
        b.iter(|| spec.sample(black_box(1000), black_box(7)).unwrap())
    });
}

criterion_group!(benches, bench_poly_eval, bench_density_eval, bench_theta_eval, bench_sampling);
criterion_main!(benches);
