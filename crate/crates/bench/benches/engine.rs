use ashgan_bench::{random_pair, random_tensor};
use ashgan_core::dataset::{split_dataset, RawPair, Satellite, SplitFractions};
use ashgan_core::eval::{ash_presence, AshThresholds};
use ashgan_core::model::{build_composite, build_discriminator, build_generator, ArchitectureSpec};
use ashgan_core::nn::{seeded_rng, Adam, Conv2d, ConvTranspose2d};
use ashgan_core::train::{discriminator_step, make_fake_samples, make_real_samples};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn convolutions(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv");
    let mut rng = seeded_rng(0);
    for &(channels, size) in &[(64, 64), (128, 32), (512, 8)] {
        let x = random_tensor([1, channels, size, size], 1);
        let mut conv = Conv2d::new(channels, channels * 2, 4, 2, &mut rng);
        group.bench_with_input(
            BenchmarkId::new("forward_s2", format!("{channels}x{size}")),
            &x,
            |b, x| b.iter(|| conv.forward(x, false).unwrap()),
        );
        let mut up = ConvTranspose2d::new(channels, channels / 2, 4, 2, &mut rng);
        group.bench_with_input(
            BenchmarkId::new("transposed_forward", format!("{channels}x{size}")),
            &x,
            |b, x| b.iter(|| up.forward(x, false).unwrap()),
        );
    }
    group.finish();
}

fn generator(c: &mut Criterion) {
    let mut group = c.benchmark_group("generator_forward");
    group.sample_size(10);
    for (label, arch) in [
        ("64_div4", ArchitectureSpec::scaled(64, 4).unwrap()),
        ("256_full", ArchitectureSpec::standard()),
    ] {
        let mut g = build_generator(&arch.generator, 0).unwrap();
        let x = random_tensor(g.input_shape(1), 2);
        group.bench_function(label, |b| b.iter(|| g.forward(&x, None, false).unwrap()));
    }
    group.finish();
}

/// One discriminator update on a real and a fake batch plus one composite
/// update: the inner loop of training.
fn training_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_iteration");
    group.sample_size(10);
    for (label, arch) in [
        ("64_div4", ArchitectureSpec::scaled(64, 4).unwrap()),
        ("64_div1", ArchitectureSpec::scaled(64, 1).unwrap()),
    ] {
        let mut g = build_generator(&arch.generator, 0).unwrap();
        let mut d = build_discriminator(&arch.discriminator, 0).unwrap();
        let patch = d.spec().patch_size();
        let pair = random_pair(arch.input_size(), 3);
        let real = make_real_samples(std::slice::from_ref(&pair), patch).unwrap();
        let (mut g_opt, mut d_opt) = (Adam::new(2e-4, 0.5, 0.999), Adam::new(2e-4, 0.5, 0.999));
        group.bench_function(label, |b| {
            b.iter(|| {
                discriminator_step(&mut d, &mut d_opt, &real.sources, &real.targets, 1.0).unwrap();
                let fake = make_fake_samples(&mut g, &real.sources, patch, None).unwrap();
                discriminator_step(&mut d, &mut d_opt, &real.sources, &fake.generated, 0.0)
                    .unwrap();
                build_composite(&mut g, &mut d, 100.0)
                    .unwrap()
                    .train_step(&real.sources, &real.targets, &mut g_opt, None)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn data_path(c: &mut Criterion) {
    let pairs: Vec<RawPair> = [
        (Satellite::Goes16, 148),
        (Satellite::Goes17, 401),
        (Satellite::Himawari8, 16),
        (Satellite::Meteosat11, 35),
    ]
    .iter()
    .flat_map(|&(sat, n)| (0..n).map(move |i| RawPair::placeholder(format!("{}_{i}", sat.prefix()), sat)))
    .collect();
    c.bench_function("split_600", |b| {
        b.iter(|| split_dataset(&pairs, SplitFractions::default(), 0).unwrap())
    });
    let mask = image::RgbImage::from_fn(256, 256, |x, y| {
        image::Rgb(if (x / 16 + y / 16) % 5 == 0 { [0; 3] } else { [255; 3] })
    });
    let thresholds = AshThresholds::default();
    c.bench_function("ash_presence_256", |b| b.iter(|| ash_presence(&mask, &thresholds)));
}

criterion_group!(benches, convolutions, generator, training_iteration, data_path);
criterion_main!(benches);
