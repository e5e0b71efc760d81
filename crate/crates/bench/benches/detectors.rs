use criterion::{criterion_group, criterion_main, Criterion};

use scim_bench::{single_device, two_devices, Fixture};
use scim_core::harness::PrecoderChoice;
use scim_core::{Detector, DetectorKind};

fn bench_system(c: &mut Criterion, label: &str, fx: &Fixture) {
    let mut group = c.benchmark_group(label);
    for kind in [DetectorKind::Mmse, DetectorKind::Omp, DetectorKind::OmpMmse, DetectorKind::Cavi] {
        let det = Detector::new(kind);
        if det.supports(fx.system.devices(), fx.system.precoder_kind()).is_err() {
            continue;
        }
        let input = fx.input();
        group.bench_function(kind.name(), |b| b.iter(|| det.detect(&input).expect("detection")));
    }
    group.finish();
}

fn detectors(c: &mut Criterion) {
    let ftn = Fixture::new(&single_device(), 1).expect("single-device fixture");
    bench_system(c, "single_ftn_L64_N80_Q10", &ftn);

    let mut plain = single_device();
    plain.precoder = PrecoderChoice::Identity;
    plain.n = Some(64);
    plain.q = 8;
    let plain = Fixture::new(&plain, 1).expect("identity fixture");
    bench_system(c, "single_identity_L64_Q8", &plain);

    let multi = Fixture::new(&two_devices(), 1).expect("two-device fixture");
    bench_system(c, "two_device_L64_Q5", &multi);
}

criterion_group!(benches, detectors);
criterion_main!(benches);
