use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use percolab_core::events::{detect, Bitmap, DetectorPolicy};
use percolab_core::{BooleanModel, EventSpec, ModelSpec, Phase, RadiusLaw, RngStream, VoronoiModel};

fn near_critical(lambda: f64) -> ModelSpec {
    ModelSpec::Boolean(BooleanModel::new(lambda, RadiusLaw::Constant { radius: 1.0 }).unwrap())
}

fn exact_crossing(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_crossing");
    for r in [16.0, 32.0, 64.0] {
        let spec = EventSpec::cross(3.0 * r, r, Phase::Occupied);
        let field = near_critical(0.36).realize(&spec.region(), 1e-3, &mut RngStream::new(1, 0)).unwrap();
        g.throughput(Throughput::Elements(field.size() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(r), &field, |b, f| {
            b.iter(|| detect(&spec, f, DetectorPolicy::default()).unwrap())
        });
    }
    g.finish();
}

fn raster_arm(c: &mut Criterion) {
    let mut g = c.benchmark_group("raster");
    g.sample_size(20);
    let spec = EventSpec::origin_arm(16.0, Phase::Vacant);
    let field = near_critical(0.36).realize(&spec.region(), 1e-3, &mut RngStream::new(2, 0)).unwrap();
    for cells in [256.0, 512.0, 1024.0] {
        g.bench_with_input(BenchmarkId::new("boolean_vacant_arm", cells), &cells, |b, &cells| {
            b.iter(|| Bitmap::rasterize(&field, spec.region(), spec.scale() / cells).unwrap().evaluate(&spec))
        });
    }
    let spec = EventSpec::cross(10.0, 10.0, Phase::Occupied);
    let voronoi = ModelSpec::Voronoi(VoronoiModel::unweighted(0.5).unwrap());
    let field = voronoi.realize(&spec.region(), 1e-3, &mut RngStream::new(3, 0)).unwrap();
    g.bench_function("voronoi_crossing_512", |b| {
        b.iter(|| Bitmap::rasterize(&field, spec.region(), spec.scale() / 512.0).unwrap().evaluate(&spec))
    });
    g.finish();
}

criterion_group!(benches, exact_crossing, raster_arm);
criterion_main!(benches);
