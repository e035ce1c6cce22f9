use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tfp::format::{load_preset, load_weights};
use tfp::image_io::save_png;
use tfp_core::{count_flops, FlopPath, NoiseRng, Shape, Tensor};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        ws.ok(&["init", "--seed", "5", "--out", &ws.s("w.tfpw")]);
        ws
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.p(name).to_str().unwrap().to_owned()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tfp"))
            .args(args)
            .env("TFP_THREADS", "2")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn content(&self, name: &str, h: usize, w: usize) -> String {
        let mut rng = NoiseRng::new(h as u64 * 1000 + w as u64);
        let t = Tensor::from_fn(Shape::new(1, 3, h, w), |_, _, _, _| {
            rng.next_open01() as f32
        });
        save_png(&t, &self.p(name)).unwrap();
        self.s(name)
    }

    fn preset(&self, seed: &str, name: &str) -> String {
        self.ok(&[
            "preset",
            "gen",
            "--weights",
            &self.s("w.tfpw"),
            "--seed",
            seed,
            "--out",
            &self.s(name),
        ]);
        self.s(name)
    }

    fn stylize(&self, preset: &str, content: &str, out: &str) -> Vec<u8> {
        self.ok(&[
            "stylize",
            "--weights",
            &self.s("w.tfpw"),
            "--preset",
            preset,
            "--content",
            content,
            "--out",
            &self.s(out),
        ]);
        std::fs::read(self.p(out)).unwrap()
    }
}

fn dims(path: &Path) -> (u32, u32) {
    image::image_dimensions(path).unwrap()
}

#[test]
fn init_writes_loadable_weights_for_both_variants() {
    let ws = Workspace::new();
    assert_eq!(load_weights(&ws.p("w.tfpw")).unwrap().count_params(), 9_334);
    ws.ok(&["init", "--variant", "tfp-l", "--out", &ws.s("l.tfpw")]);
    assert_eq!(load_weights(&ws.p("l.tfpw")).unwrap().count_params(), 6_082);
}

#[test]
fn preset_gen_is_seed_deterministic() {
    let ws = Workspace::new();
    let a = ws.preset("11", "a.tfpp");
    let b = ws.preset("11", "b.tfpp");
    let c = ws.preset("12", "c.tfpp");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let p = load_preset(Path::new(&a)).unwrap();
    assert_eq!((p.seed, p.source_size), (11, (256, 256)));
    assert_eq!(p.features.shape(), Shape::new(1, 16, 64, 64));
}

#[test]
fn preset_gen_prints_a_fresh_seed_when_none_given() {
    let ws = Workspace::new();
    let out = ws.ok(&[
        "preset",
        "gen",
        "--weights",
        &ws.s("w.tfpw"),
        "--size",
        "32x48",
        "--out",
        &ws.s("p.tfpp"),
    ]);
    let seed: u64 = out
        .lines()
        .next()
        .unwrap()
        .strip_prefix("seed ")
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(load_preset(&ws.p("p.tfpp")).unwrap().seed, seed);
}

#[test]
fn stylize_preserves_size_including_non_multiples_of_four() {
    let ws = Workspace::new();
    let preset = ws.preset("3", "p.tfpp");
    for (h, w) in [(256, 256), (250, 250), (37, 61)] {
        let content = ws.content(&format!("c{h}x{w}.png"), h, w);
        let out = format!("o{h}x{w}.png");
        let first = ws.stylize(&preset, &content, &out);
        assert_eq!(dims(&ws.p(&out)), (w as u32, h as u32));
        assert_eq!(ws.stylize(&preset, &content, &out), first);
    }
}

#[test]
fn stylize_reads_jpeg_content() {
    let ws = Workspace::new();
    let preset = ws.preset("3", "p.tfpp");
    let img = image::RgbImage::from_fn(40, 24, |x, y| {
        image::Rgb([(x * 6) as u8, (y * 10) as u8, 128])
    });
    img.save(ws.p("c.jpg")).unwrap();
    ws.stylize(&preset, &ws.s("c.jpg"), "o.png");
    assert_eq!(dims(&ws.p("o.png")), (40, 24));
}

#[test]
fn stylize_lambda_overrides_change_output() {
    let ws = Workspace::new();
    let preset = ws.preset("3", "p.tfpp");
    let content = ws.content("c.png", 64, 64);
    let base = ws.stylize(&preset, &content, "a.png");
    ws.ok(&[
        "stylize",
        "--weights",
        &ws.s("w.tfpw"),
        "--preset",
        &preset,
        "--content",
        &content,
        "--out",
        &ws.s("b.png"),
        "--lambda-d",
        "0.25",
    ]);
    assert_ne!(std::fs::read(ws.p("b.png")).unwrap(), base);
}

#[test]
fn texture_is_seeded() {
    let ws = Workspace::new();
    let mut files = Vec::new();
    for (seed, name) in [("1", "a.png"), ("1", "b.png"), ("2", "c.png")] {
        let out = ws.ok(&[
            "texture",
            "--weights",
            &ws.s("w.tfpw"),
            "--seed",
            seed,
            "--size",
            "60x90",
            "--out",
            &ws.s(name),
        ]);
        assert_eq!(out.trim(), format!("seed {seed}"));
        assert_eq!(dims(&ws.p(name)), (90, 60));
        files.push(std::fs::read(ws.p(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_ne!(files[0], files[2]);
}

#[test]
fn thread_count_does_not_change_output() {
    let ws = Workspace::new();
    let preset = ws.preset("9", "p.tfpp");
    let content = ws.content("c.png", 96, 128);
    let args = |out: &str| {
        vec![
            "stylize".to_string(),
            "--weights".into(),
            ws.s("w.tfpw"),
            "--preset".into(),
            preset.clone(),
            "--content".into(),
            content.clone(),
            "--out".into(),
            ws.s(out),
        ]
    };
    for (threads, out) in [("1", "t1.png"), ("3", "t3.png")] {
        let status = Command::new(env!("CARGO_BIN_EXE_tfp"))
            .args(args(out))
            .env("TFP_THREADS", threads)
            .status();
        assert!(status.unwrap().success());
    }
    assert_eq!(
        std::fs::read(ws.p("t1.png")).unwrap(),
        std::fs::read(ws.p("t3.png")).unwrap()
    );
}

#[test]
fn bench_writes_report() {
    let ws = Workspace::new();
    let preset = ws.preset("4", "p.tfpp");
    let out = ws.ok(&[
        "bench",
        "--weights",
        &ws.s("w.tfpw"),
        "--preset",
        &preset,
        "--size",
        "64x64",
        "--warmup",
        "1",
        "--report",
        &ws.s("r.txt"),
    ]);
    assert!(out.contains("speedup"));
    let report = std::fs::read_to_string(ws.p("r.txt")).unwrap();
    let kv: HashMap<&str, &str> = report.lines().filter_map(|l| l.split_once('=')).collect();
    for key in [
        "variant",
        "params",
        "storage_bytes",
        "height",
        "width",
        "reps",
        "warmup",
        "threads",
        "flops_full",
        "flops_preset",
        "full_mean_ms",
        "full_p50_ms",
        "full_p95_ms",
        "preset_mean_ms",
        "preset_p50_ms",
        "preset_p95_ms",
        "speedup",
    ] {
        assert!(kv.contains_key(key), "missing {key}");
    }
    let net = load_weights(&ws.p("w.tfpw")).unwrap();
    assert_eq!(kv["params"].parse::<usize>().unwrap(), net.count_params());
    assert_eq!(
        kv["storage_bytes"].parse::<u64>().unwrap(),
        std::fs::metadata(ws.p("w.tfpw")).unwrap().len()
    );
    assert_eq!(kv["reps"], "20");
    let full: u64 = kv["flops_full"].parse().unwrap();
    let preset_flops: u64 = kv["flops_preset"].parse().unwrap();
    assert!(preset_flops < full);
    assert_eq!(
        full,
        count_flops(&net, 64, 64, FlopPath::Full).unwrap().total
    );
}

#[test]
fn bench_refuses_too_few_reps() {
    let ws = Workspace::new();
    let preset = ws.preset("4", "p.tfpp");
    let out = ws.run(&[
        "bench",
        "--weights",
        &ws.s("w.tfpw"),
        "--preset",
        &preset,
        "--size",
        "32x32",
        "--reps",
        "5",
    ]);
    assert!(!out.status.success());
}

#[test]
fn corrupt_inputs_fail_without_writing_output() {
    let ws = Workspace::new();
    let preset = ws.preset("4", "p.tfpp");
    let content = ws.content("c.png", 32, 32);
    let mut bad = std::fs::read(ws.p("w.tfpw")).unwrap();
    bad.truncate(bad.len() / 2);
    std::fs::write(ws.p("bad.tfpw"), &bad).unwrap();
    std::fs::write(ws.p("bad.tfpp"), b"TFPP\x07\0\0\0").unwrap();
    std::fs::write(ws.p("bad.png"), b"not an image").unwrap();

    let cases: [(&str, &str, &str); 3] = [
        (&ws.s("bad.tfpw"), &preset, &content),
        (&ws.s("w.tfpw"), &ws.s("bad.tfpp"), &content),
        (&ws.s("w.tfpw"), &preset, &ws.s("bad.png")),
    ];
    for (i, (weights, preset, content)) in cases.iter().enumerate() {
        let out_name = format!("out{i}.png");
        let out = ws.run(&[
            "stylize",
            "--weights",
            weights,
            "--preset",
            preset,
            "--content",
            content,
            "--out",
            &ws.s(&out_name),
        ]);
        assert!(!out.status.success(), "case {i} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
        assert!(!ws.p(&out_name).exists(), "case {i} left output behind");
    }
    let out = ws.run(&[
        "preset",
        "gen",
        "--weights",
        &ws.s("bad.tfpw"),
        "--seed",
        "1",
        "--out",
        &ws.s("x.tfpp"),
    ]);
    assert!(!out.status.success());
    assert!(!ws.p("x.tfpp").exists());
}

#[test]
fn preset_from_other_variant_is_rejected() {
    let ws = Workspace::new();
    ws.ok(&["init", "--variant", "tfp-l", "--out", &ws.s("l.tfpw")]);
    ws.ok(&[
        "preset",
        "gen",
        "--weights",
        &ws.s("l.tfpw"),
        "--seed",
        "1",
        "--size",
        "32x32",
        "--out",
        &ws.s("l.tfpp"),
    ]);
    let content = ws.content("c.png", 32, 32);
    let out = ws.run(&[
        "stylize",
        "--weights",
        &ws.s("w.tfpw"),
        "--preset",
        &ws.s("l.tfpp"),
        "--content",
        &content,
        "--out",
        &ws.s("o.png"),
    ]);
    assert!(!out.status.success());
    assert!(!ws.p("o.png").exists());
}

#[test]
fn invalid_size_is_a_usage_error() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "texture",
        "--weights",
        &ws.s("w.tfpw"),
        "--size",
        "12by12",
        "--out",
        &ws.s("t.png"),
    ]);
    assert!(!out.status.success());
    let out = ws.run(&[
        "preset",
        "gen",
        "--weights",
        &ws.s("w.tfpw"),
        "--size",
        "30x30",
        "--out",
        &ws.s("p.tfpp"),
    ]);
    assert!(!out.status.success());
}
