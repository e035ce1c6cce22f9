use tfp_core::{
    capture_preset, fit_preset, sample_noise, stylize_with_preset, ArchSpec, FusionConfig, Network,
    NoiseRng, Shape, Tensor,
};

fn image(seed: u64, h: usize, w: usize) -> Tensor {
    let mut rng = NoiseRng::new(seed);
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, _, _, _| {
        rng.next_open01() as f32
    })
}

fn bits(t: &Tensor) -> Vec<u32> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn channel_variance(t: &Tensor) -> Vec<f64> {
    (0..t.shape().c)
        .map(|c| {
            let p = t.plane(0, c);
            let m = p.iter().map(|&v| f64::from(v)).sum::<f64>() / p.len() as f64;
            p.iter().map(|&v| (f64::from(v) - m).powi(2)).sum::<f64>() / p.len() as f64
        })
        .collect()
}

#[test]
fn noise_moments() {
    let t = sample_noise(2024, 256, 256).unwrap();
    let n = t.data().len() as f64;
    assert_eq!(t.data().len(), 3 * 256 * 256);
    let mean = t.data().iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = t
        .data()
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!(var > 0.97 && var < 1.03, "var {var}");
}

#[test]
fn distinct_seeds_give_independent_noise() {
    let a = sample_noise(1, 64, 64).unwrap();
    let b = sample_noise(2, 64, 64).unwrap();
    // Independent unit Gaussians: ||a - b|| / ||a|| is about sqrt(2).
    let dist = a.sq_distance(&b).unwrap().sqrt();
    let norm = a
        .data()
        .iter()
        .map(|&v| f64::from(v).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(dist / norm > 0.5);
}

#[test]
fn capture_records_provenance() {
    let net = Network::random(ArchSpec::tfp(), 3).unwrap();
    let p = capture_preset(&net, 77, 256, 256, "waves").unwrap();
    assert_eq!(p.features.shape(), Shape::new(1, 16, 64, 64));
    assert_eq!(
        bits(&p.features),
        bits(&net.enc_deep(&sample_noise(77, 256, 256).unwrap()).unwrap())
    );
    assert_eq!(
        (p.seed, p.source_size, p.style_id.as_str()),
        (77, (256, 256), "waves")
    );
    let q = capture_preset(&net, 78, 256, 256, "waves").unwrap();
    assert!(p.features.sq_distance(&q.features).unwrap() > 0.0);
}

#[test]
fn stylize_matches_full_pipeline() {
    let net = Network::random(ArchSpec::tfp(), 21).unwrap();
    let cfg = FusionConfig::new(1.0, 0.8).unwrap();
    for seed in 0..4 {
        let content = image(100 + seed, 64, 64);
        let preset = capture_preset(&net, seed, 64, 64, "s").unwrap();
        let fast = stylize_with_preset(&net, &preset, &content, &cfg).unwrap();
        let full = net
            .forward_full(&content, &sample_noise(seed, 64, 64).unwrap(), &cfg)
            .unwrap();
        assert_eq!(bits(&fast), bits(&full.cs_tex_noise));
    }
}

#[test]
fn stylize_other_sizes_uses_tiling() {
    let net = Network::random(ArchSpec::tfp_l(), 21).unwrap();
    let cfg = FusionConfig::default();
    let preset = capture_preset(&net, 3, 32, 32, "s").unwrap();
    let content = image(1, 48, 80);
    let out = stylize_with_preset(&net, &preset, &content, &cfg).unwrap();
    assert_eq!(out.shape(), content.shape());
    let fs = net.enc_shallow(&content).unwrap();
    let expected = net
        .dec_fusion(&fs, &fit_preset(&preset, 12, 20).unwrap(), &cfg)
        .unwrap();
    assert_eq!(bits(&out), bits(&expected));
}

#[test]
fn stylize_batches_share_the_preset() {
    let net = Network::random(ArchSpec::tfp_l(), 21).unwrap();
    let cfg = FusionConfig::default();
    let preset = capture_preset(&net, 3, 32, 32, "s").unwrap();
    let a = image(1, 32, 32);
    let b = image(2, 32, 32);
    let both = stylize_with_preset(
        &net,
        &preset,
        &Tensor::concat_batch(&[a.clone(), b.clone()]).unwrap(),
        &cfg,
    )
    .unwrap();
    assert_eq!(
        bits(&both.batch_item(0)),
        bits(&stylize_with_preset(&net, &preset, &a, &cfg).unwrap())
    );
    assert_eq!(
        bits(&both.batch_item(1)),
        bits(&stylize_with_preset(&net, &preset, &b, &cfg).unwrap())
    );
}

#[test]
fn shallow_only_fusion_depends_on_content() {
    let net = Network::random(ArchSpec::tfp(), 5).unwrap();
    let cfg = FusionConfig::new(1.0, 0.0).unwrap();
    let preset = capture_preset(&net, 1, 32, 32, "s").unwrap();
    let a = stylize_with_preset(&net, &preset, &image(1, 32, 32), &cfg).unwrap();
    let b = stylize_with_preset(&net, &preset, &image(2, 32, 32), &cfg).unwrap();
    assert!(a.sq_distance(&b).unwrap() > 0.0);
    let other = capture_preset(&net, 2, 32, 32, "s").unwrap();
    let c = stylize_with_preset(&net, &other, &image(1, 32, 32), &cfg).unwrap();
    assert_eq!(bits(&a), bits(&c));
}

#[test]
fn seeds_diversify_output() {
    let net = Network::random(ArchSpec::tfp(), 5).unwrap();
    let content = image(9, 64, 64);
    let cfg = FusionConfig::default();
    let a = stylize_with_preset(
        &net,
        &capture_preset(&net, 1, 64, 64, "s").unwrap(),
        &content,
        &cfg,
    )
    .unwrap();
    let b = stylize_with_preset(
        &net,
        &capture_preset(&net, 2, 64, 64, "s").unwrap(),
        &content,
        &cfg,
    )
    .unwrap();
    let mad = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f32>()
        / a.data().len() as f32;
    assert!(mad > 0.0);
}

#[test]
fn gray_content_still_gets_texture() {
    let net = Network::random(ArchSpec::tfp(), 2024).unwrap();
    let gray = Tensor::full(Shape::new(1, 3, 128, 128), 0.5);
    let preset = capture_preset(&net, 7, 128, 128, "s").unwrap();
    let textured = stylize_with_preset(&net, &preset, &gray, &FusionConfig::default()).unwrap();
    let color = net.dec_shallow(&net.enc_shallow(&gray).unwrap()).unwrap();
    let vt = channel_variance(&textured);
    let vc = channel_variance(&color);
    for c in 0..3 {
        assert!(
            vt[c] > vc[c],
            "channel {c}: textured {} <= color {}",
            vt[c],
            vc[c]
        );
    }
}

#[test]
fn stylize_rejects_bad_content_and_presets() {
    let net = Network::random(ArchSpec::tfp(), 5).unwrap();
    let preset = capture_preset(&net, 1, 32, 32, "s").unwrap();
    let cfg = FusionConfig::default();
    let gray1 = Tensor::zeros(Shape::new(1, 1, 32, 32));
    assert!(stylize_with_preset(&net, &preset, &gray1, &cfg).is_err());
    let lite = Network::random(ArchSpec::tfp_l(), 5).unwrap();
    assert!(stylize_with_preset(&lite, &preset, &image(1, 32, 32), &cfg).is_err());
}
