use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use normfill::{normal_guided_filter, sparse_to_dense, DensifyParams, FilterParams, SuperpixelParams};
use normfill::densify::superpixel_segment;
use normfill_bench::frame;

fn filters(c: &mut Criterion) {
    let f = frame("box_room", 0.02);
    let params = FilterParams::default();

    let mut group = c.benchmark_group("normal_guided_filter");
    group.sample_size(10);
    group.bench_function("window", |b| {
        b.iter(|| normal_guided_filter(&f.seeds, &f.view.normals, &f.camera, &params, None).unwrap())
    });
    let labels = superpixel_segment(&f.view.color, &SuperpixelParams::default()).unwrap();
    group.bench_function("superpixel", |b| {
        b.iter(|| normal_guided_filter(&f.seeds, &f.view.normals, &f.camera, &params, Some(&labels)).unwrap())
    });
    group.finish();

    c.bench_function("superpixel_segment", |b| {
        b.iter(|| superpixel_segment(&f.view.color, &SuperpixelParams::default()).unwrap())
    });

    let mut group = c.benchmark_group("sparse_to_dense");
    group.sample_size(10);
    for density in [0.005, 0.02, 0.1] {
        let f = frame("box_room", density);
        group.bench_with_input(BenchmarkId::from_parameter(density), &f, |b, f| {
            b.iter(|| sparse_to_dense(&f.seeds, &f.view.normals, &f.view.color, &f.camera, &DensifyParams::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, filters);
criterion_main!(benches);
