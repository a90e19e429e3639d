//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use candle_core::{DType, Device, Tensor, Var};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stig_cli::commands::{aliasing_peak, detector_experiment, load_dir};
use stig_core::metrics::{averaged_spectrum, fid, lfd, AveragedSpectrum, FidStats, LfdMode};
use stig_core::spectral::{
    chessboard_integration, sinc_kernel_response, to_image, to_spectrum, wiener_profile, Layout,
};
use stig_core::ImageSample;
use stig_model::detector::DetectorConfig;
use stig_model::layers::l2_normalize;
use stig_model::losses::{
    lf_loss, lsgan_discriminator, lsgan_generator, pcl_loss, rec_loss, scalar, total_loss, DiscriminatorLosses,
};
use stig_model::networks::{FrequencyPatchSet, PatchLocations};
use stig_model::spectral_ops::{ring_mean_operator, ring_profile};
use stig_model::{LossComponents, LossWeights, ModelConfig, PatchDiscriminator, SpectralDiscriminator, SsimConfig};

type Outcome = std::result::Result<String, String>;

fn report(n: usize, name: &str, outcome: Outcome) {
    let line = match &outcome {
        Ok(detail) => format!("criterion {n}: PASS {name}: {detail}"),
        Err(detail) => format!("criterion {n}: FAIL {name}: {detail}"),
    };
    // the raw handle bypasses libtest capture, so PASS lines show too
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(detail) = outcome {
        panic!("criterion {n} failed: {detail}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageSample {
    ImageSample::new(Array3::from_shape_fn((h, w, c), |_| rng.random_range(-1.0f32..=1.0))).unwrap()
}

#[test]
fn criterion_01_dft_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let images: Vec<_> = (0..100).map(|_| random_image(&mut rng, 64, 64, 3)).collect();
    let t = Instant::now();
    let mut worst = 0.0f32;
    for img in &images {
        let back = to_image(&to_spectrum(img).unwrap()).unwrap();
        let err = (back.pixels() - img.pixels()).iter().fold(0.0f32, |m, v| m.max(v.abs()));
        worst = worst.max(err);
    }
    let secs = t.elapsed().as_secs_f64();
    let outcome = ensure(worst < 1e-4, || format!("max error {worst:e} ≥ 1e-4"))
        .and_then(|_| ensure(secs < 10.0, || format!("took {secs:.2} s")))
        .map(|_| format!("max error {worst:.2e}, {secs:.2} s for 100 images"));
    report(1, "DFT round trip", outcome);
}

#[test]
fn criterion_02_chessboard_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut telescoping = 0.0f64;
    for _ in 0..500 {
        let h = 2 * rng.random_range(1..=16usize);
        let w = 2 * rng.random_range(1..=16usize);
        let mag = Array2::from_shape_fn((h, w), |_| rng.random_range(0.0..10.0));
        let p = chessboard_integration(mag.view(), Layout::Centered).unwrap();
        let rings = h.min(w) / 2;
        let mut oracle = vec![0.0; rings];
        for i in 0..h {
            for j in 0..w {
                let u = (i as i64 - (h / 2) as i64).unsigned_abs() as usize;
                let v = (j as i64 - (w / 2) as i64).unsigned_abs() as usize;
                if u.max(v) < rings {
                    oracle[u.max(v)] += mag[[i, j]];
                }
            }
        }
        for (a, b) in p.values().iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        let r = rings as i64 - 1;
        let mut a_last = 0.0;
        for u in -r..=r {
            for v in -r..=r {
                a_last += mag[[(h as i64 / 2 + u) as usize, (w as i64 / 2 + v) as usize]];
            }
        }
        telescoping = telescoping.max((p.values().iter().sum::<f64>() - a_last).abs());
    }
    let outcome = ensure(worst < 1e-6, || format!("bucket mismatch {worst:e}"))
        .and_then(|_| ensure(telescoping < 1e-6, || format!("telescoping mismatch {telescoping:e}")))
        .map(|_| format!("500 spectra, max deviation {worst:.1e}, telescoping {telescoping:.1e}"));
    report(2, "chessboard integration", outcome);
}

#[test]
fn criterion_03_wiener_profile() {
    let freqs: Vec<f64> = (0..200).map(|i| i as f64 * 0.25).collect();
    let mut outcome = Ok(());
    for ab in [1e-4, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0] {
        let p = wiener_profile(ab, &freqs).unwrap();
        outcome = outcome
            .and_then(|_| ensure(p.response[0] == 1.0, || format!("response(0) = {} at ᾱ={ab}", p.response[0])))
            .and_then(|_| {
                ensure(p.response.windows(2).all(|w| w[1] <= w[0]), || format!("not monotone at ᾱ={ab}"))
            });
    }
    let hand = wiener_profile(0.5, &[1.0]).unwrap().response[0];
    let outcome = outcome
        .and_then(|_| ensure((hand - 0.5).abs() < 1e-12, || format!("(ᾱ=0.5, f=1) gives {hand}")))
        .map(|_| format!("7 ᾱ values, hand value {hand}"));
    report(3, "Wiener profile", outcome);
}

#[test]
fn criterion_04_sinc_ripple() {
    let sizes = [3usize, 9, 17, 33, 65];
    let ripple: Vec<f64> = sizes.iter().map(|&k| sinc_kernel_response(k, 0.25, 4096).unwrap().ripple).collect();
    let inversions = ripple.windows(2).filter(|w| w[1] > w[0]).count();
    let outcome = ensure(ripple[4] < ripple[0], || format!("ripple at 65 {} ≥ at 3 {}", ripple[4], ripple[0]))
        .and_then(|_| ensure(inversions == 0, || format!("{inversions} inversions in {ripple:?}")))
        .map(|_| {
            let s: Vec<String> = sizes.iter().zip(&ripple).map(|(k, r)| format!("{k}:{r:.4}")).collect();
            s.join(" ")
        });
    report(4, "sinc ripple", outcome);
}

const FD_EPS: f64 = 1e-5;

fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

/// Worst relative error between autograd and central differences over `probes` coordinates.
fn gradient_error<F: Fn(&Tensor) -> Tensor>(x0: &Tensor, f: F, probes: usize) -> f64 {
    let var = Var::from_tensor(x0).unwrap();
    let grads = f(var.as_tensor()).backward().unwrap();
    let g: Vec<f64> = grads.get(var.as_tensor()).unwrap().flatten_all().unwrap().to_vec1().unwrap();
    let base: Vec<f64> = x0.flatten_all().unwrap().to_vec1().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.random_range(0..base.len());
        let eval = |d: f64| {
            let mut v = base.clone();
            v[i] += d;
            scalar(&f(&Tensor::from_vec(v, x0.shape(), &Device::Cpu).unwrap())).unwrap()
        };
        let numeric = (eval(FD_EPS) - eval(-FD_EPS)) / (2.0 * FD_EPS);
        if numeric.abs() < 1e-9 && g[i].abs() < 1e-9 {
            continue;
        }
        worst = worst.max((g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

#[test]
fn criterion_05_loss_suite() {
    let toy = ModelConfig {
        channels: 3,
        gen_depth: 2,
        gen_base: 4,
        gen_residual: false,
        disc_base: 4,
        disc_downsample: 1,
        embed_dim: 8,
    };
    let d = PatchDiscriminator::new(&toy, 8, DType::F64, 3).unwrap();
    let ds = SpectralDiscriminator::new(4, DType::F64, 4).unwrap();
    let op = ring_mean_operator(8, 8, DType::F64).unwrap();
    let ssim_cfg = SsimConfig {
        window: 7,
        ..SsimConfig::default()
    };
    let y = uniform(&[2, 3, 8, 8], -1.0, 1.0, 5);
    let x = uniform(&[2, 3, 8, 8], -0.9, 0.9, 6);
    let f_in = l2_normalize(&uniform(&[2, 5, 8], -1.0, 1.0, 7)).unwrap();
    let locs = PatchLocations(vec![(0..5).collect()]);
    let input = FrequencyPatchSet {
        layers: vec![f_in],
        locations: locs.clone(),
    };
    let mag_a = uniform(&[2, 3, 8, 8], 0.0, 5.0, 8);
    let mut errors = vec![
        ("L_adv", gradient_error(&y, |y| lsgan_generator(&d.forward(y).unwrap()).unwrap(), 30)),
        (
            "L_pcl",
            gradient_error(
                &uniform(&[2, 5, 8], -1.0, 1.0, 9),
                |q| {
                    let out = FrequencyPatchSet {
                        layers: vec![l2_normalize(q).unwrap()],
                        locations: locs.clone(),
                    };
                    pcl_loss(&input, &out, 0.07).unwrap()
                },
                30,
            ),
        ),
        ("L_rec", gradient_error(&y, |b| rec_loss(&x, &(b * 0.9).unwrap(), &ssim_cfg).unwrap(), 30)),
        (
            "L_spec",
            gradient_error(&y, |y| lsgan_generator(&ds.forward(&ring_profile(y, &op).unwrap()).unwrap()).unwrap(), 30),
        ),
        ("L_lf", gradient_error(&uniform(&[2, 3, 8, 8], 0.0, 5.0, 10), |b| lf_loss(&mag_a, b, 2).unwrap(), 30)),
    ];
    let fixed = d.forward(&y).unwrap();
    errors.push((
        "L_adv(D)",
        gradient_error(&x, |r| lsgan_discriminator(&d.forward(r).unwrap(), &fixed).unwrap(), 30),
    ));
    let mut outcome = Ok(());
    for (name, e) in &errors {
        outcome = outcome.and_then(|_| ensure(*e < 1e-3, || format!("{name} gradient relative error {e:e}")));
    }

    // closed forms
    let ones = Tensor::ones((2, 1, 3, 3), DType::F64, &Device::Cpu).unwrap();
    let zeros = ones.zeros_like().unwrap();
    let perfect_d = scalar(&lsgan_discriminator(&ones, &zeros).unwrap()).unwrap();
    let fooled_g = scalar(&lsgan_generator(&ones).unwrap()).unwrap();
    let s = 16usize;
    let same = l2_normalize(&Tensor::ones((2, s, 4), DType::F64, &Device::Cpu).unwrap()).unwrap();
    let set = || FrequencyPatchSet {
        layers: vec![same.clone()],
        locations: PatchLocations(vec![(0..s).collect()]),
    };
    let uniform_pcl = scalar(&pcl_loss(&set(), &set(), 0.07).unwrap()).unwrap();
    let identical_rec = scalar(&rec_loss(&x, &x, &ssim_cfg).unwrap()).unwrap();
    let identical_lf = scalar(&lf_loss(&mag_a, &mag_a, 3).unwrap()).unwrap();
    let outcome = outcome
        .and_then(|_| ensure(perfect_d.abs() < 1e-6 && fooled_g.abs() < 1e-6, || "LSGAN zeros".into()))
        .and_then(|_| ensure((uniform_pcl - (s as f64).ln()).abs() < 1e-6, || format!("uniform PCL {uniform_pcl}")))
        .and_then(|_| ensure(identical_rec.abs() < 1e-6, || format!("rec(x, x) = {identical_rec}")))
        .and_then(|_| ensure(identical_lf.abs() < 1e-6, || format!("lf(x, x) = {identical_lf}")))
        .map(|_| {
            let worst = errors.iter().map(|(_, e)| *e).fold(0.0, f64::max);
            format!("worst gradient relative error {worst:.1e}; closed forms exact")
        });
    report(5, "loss suite", outcome);
}

#[test]
fn criterion_06_total_objective() {
    let unit = LossComponents {
        adv: 1.0,
        pcl: 1.0,
        rec: 1.0,
        spec: 1.0,
        lf: 1.0,
    };
    let (total, _) = total_loss(&unit, &DiscriminatorLosses::default(), &LossWeights::default()).unwrap();
    report(6, "total objective", ensure(total == 22.0, || format!("total {total}")).map(|_| "22".into()));
}

fn stats(mean: Vec<f64>, cov: DMatrix<f64>) -> FidStats {
    FidStats {
        mean: DVector::from_vec(mean),
        cov,
        count: 100,
    }
}

#[test]
fn criterion_07_fid_closed_forms() {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
    let a = stats(vec![0.1, -0.4, 2.0], cov.clone());
    let same = fid(&a, &a).unwrap();
    let shift = [1.0, -2.0, 0.5];
    let b = stats(vec![1.1, -2.4, 2.5], cov);
    let shifted = fid(&a, &b).unwrap();
    let d2: f64 = shift.iter().map(|v| v * v).sum();
    // commuting covariances: both diagonal
    let (s1, s2) = ([1.0, 4.0, 0.25], [9.0, 1.0, 0.25]);
    let c = stats(vec![0.0; 3], DMatrix::from_diagonal(&DVector::from_row_slice(&s1)));
    let e = stats(vec![0.5; 3], DMatrix::from_diagonal(&DVector::from_row_slice(&s2)));
    let commuting = fid(&c, &e).unwrap();
    let expected = 0.75 + s1.iter().zip(&s2).map(|(p, q)| p + q - 2.0 * (p * q).sqrt()).sum::<f64>();
    let outcome = ensure(same < 1e-6, || format!("identical stats give {same}"))
        .and_then(|_| ensure((shifted - d2).abs() < 1e-6, || format!("mean shift {shifted} vs {d2}")))
        .and_then(|_| ensure((commuting - expected).abs() < 1e-6, || format!("commuting {commuting} vs {expected}")))
        .map(|_| format!("self {same:.1e}, shift {shifted:.6}, commuting {commuting:.6}"));
    report(7, "FID closed forms", outcome);
}

#[test]
fn criterion_08_lfd() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let real: Vec<_> = (0..6).map(|_| random_image(&mut rng, 16, 16, 3)).collect();
    let fake: Vec<_> = (0..6)
        .map(|_| {
            let img = random_image(&mut rng, 16, 16, 3);
            ImageSample::new(img.pixels().mapv(|v| 0.5 * v + 0.2)).unwrap()
        })
        .collect();
    let ar = averaged_spectrum(&real).unwrap();
    let af = averaged_spectrum(&fake).unwrap();
    let blend = |t: f64| AveragedSpectrum {
        log_mag: &af.log_mag * (1.0 - t) + &ar.log_mag * t,
        raw: &af.raw * (1.0 - t) + &ar.raw * t,
        count: af.count,
    };
    let mut outcome = Ok(());
    for mode in [LfdMode::Raw, LfdMode::Normalized] {
        let own = lfd(&ar, &averaged_spectrum(&real).unwrap(), mode).unwrap();
        outcome = outcome.and_then(|_| ensure(own == 0.0, || format!("{mode:?}: identical sets give {own}")));
        let curve: Vec<f64> = (0..=10).map(|i| lfd(&ar, &blend(i as f64 / 10.0), mode).unwrap()).collect();
        outcome = outcome
            .and_then(|_| ensure(curve.windows(2).all(|w| w[1] < w[0]), || format!("{mode:?}: not decreasing {curve:?}")));
    }
    report(8, "LFD", outcome.map(|_| "zero on identical sets, strictly decreasing along the blend".into()));
}

// ---------------------------------------------------------------------------
// Desk-scale end-to-end run shared by criteria 9 and 10.

const DESK_IMAGES: usize = 500;
const DESK_STEPS: usize = 3000;

fn stig() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stig"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(cmd: &mut Command) -> std::result::Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Desk {
    _root: tempfile::TempDir,
    real: Vec<ImageSample>,
    fake: Vec<ImageSample>,
    refined: Vec<ImageSample>,
    train_secs: f64,
}

fn desk_config(real: &Path, fake: &Path) -> String {
    format!(
        r#"seed = 0

[data]
real_dir = "{}"
fake_dir = "{}"
image_size = 64

[training]
total_steps = {DESK_STEPS}
lr = 8e-5
batch_size = 1
image_size = 64
num_patches = 64

[training.model]
gen_depth = 3
gen_base = 8
disc_base = 16
embed_dim = 64
"#,
        s(real),
        s(fake)
    )
}

fn build_desk() -> std::result::Result<Desk, String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = |n: &str| root.path().join(n);
    let n = DESK_IMAGES.to_string();
    run(stig().args(["synth", "--mode", "dead_leaves", "--count", &n, "--seed", "1", "--out", s(&dir("real"))]))?;
    run(stig().args(["synth", "--mode", "dead_leaves", "--count", &n, "--seed", "2", "--out", s(&dir("source"))]))?;
    run(stig().args([
        "synth", "--mode", "checkerboard_upsample", "--input", s(&dir("source")), "--out", s(&dir("fake")),
    ]))?;
    let cfg = dir("desk.toml");
    std::fs::write(&cfg, desk_config(&dir("real"), &dir("fake"))).map_err(|e| e.to_string())?;
    let t = Instant::now();
    run(stig().args(["--config", s(&cfg), "train", "--out", s(&dir("train"))]))?;
    let train_secs = t.elapsed().as_secs_f64();
    run(stig().args([
        "refine", "--checkpoint", s(&dir("train").join("final.ckpt")), "--input", s(&dir("fake")), "--out",
        s(&dir("refine")),
    ]))?;
    let load = |p: PathBuf| -> std::result::Result<Vec<ImageSample>, String> {
        Ok(load_dir(&p, 64).map_err(|e| e.to_string())?.into_iter().map(|(_, i)| i).collect())
    };
    // file stems line up, so sorted listings pair each fake with its refinement
    Ok(Desk {
        real: load(dir("real"))?,
        fake: load(dir("fake"))?,
        refined: load(dir("refine").join("images"))?,
        train_secs,
        _root: root,
    })
}

fn desk() -> &'static std::result::Result<Desk, String> {
    static DESK: OnceLock<std::result::Result<Desk, String>> = OnceLock::new();
    DESK.get_or_init(build_desk)
}

#[test]
fn criterion_09_desk_scale_refinement() {
    let outcome = desk().as_ref().map_err(Clone::clone).and_then(|d| {
        let ar = averaged_spectrum(&d.real).unwrap();
        let lfd_fake = lfd(&ar, &averaged_spectrum(&d.fake).unwrap(), LfdMode::Raw).unwrap();
        let lfd_refined = lfd(&ar, &averaged_spectrum(&d.refined).unwrap(), LfdMode::Raw).unwrap();
        let (pr, pf, pg) = (
            aliasing_peak(&d.real).unwrap(),
            aliasing_peak(&d.fake).unwrap(),
            aliasing_peak(&d.refined).unwrap(),
        );
        let reduction = 1.0 - (pg - pr) / (pf - pr);
        let detail = format!(
            "LFD_raw fake {lfd_fake:.4} refined {lfd_refined:.4} (ratio {:.3}); peak excess real {pr:.3} fake {pf:.3} refined {pg:.3} (reduction {:.1}%); {DESK_STEPS} steps in {:.0} s",
            lfd_refined / lfd_fake,
            100.0 * reduction,
            d.train_secs
        );
        ensure(pf > pr, || format!("fake set shows no aliasing peak: {detail}"))?;
        ensure(lfd_refined <= 0.8 * lfd_fake, || format!("LFD ratio above 0.8: {detail}"))?;
        ensure(reduction >= 0.5, || format!("peak reduced by less than 50%: {detail}"))?;
        Ok(detail)
    });
    report(9, "desk-scale refinement", outcome);
}

#[test]
fn criterion_10_detector_confusion() {
    let outcome = desk().as_ref().map_err(Clone::clone).and_then(|d| {
        let cfg = DetectorConfig::default();
        let res = detector_experiment(&d.real, &d.fake, Some(&d.refined), &cfg).map_err(|e| e.to_string())?;
        let c = res.confusion.expect("refined set given");
        let drop = c.accuracy_original - c.accuracy_refined;
        let detail = format!(
            "held-out accuracy {:.2}% on original fakes, {:.2}% with refined fakes (drop {:.1} pp, {} per class)",
            100.0 * c.accuracy_original,
            100.0 * c.accuracy_refined,
            100.0 * drop,
            c.per_class
        );
        ensure(c.accuracy_original >= 0.95, || format!("detector below 95%: {detail}"))?;
        ensure(drop >= 0.20, || format!("drop below 20 pp: {detail}"))?;
        Ok(detail)
    });
    report(10, "detector confusion", outcome);
}

// ---------------------------------------------------------------------------

fn strip_wall_time(log: &str) -> Vec<serde_json::Value> {
    log.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        })
        .collect()
}

#[test]
fn criterion_11_determinism() {
    let outcome = (|| -> std::result::Result<String, String> {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let dir = |n: &str| root.path().join(n);
        run(stig().args(["synth", "--mode", "dead_leaves", "--count", "6", "--size", "32", "--seed", "3", "--out", s(&dir("real"))]))?;
        run(stig().args(["synth", "--mode", "dead_leaves", "--count", "6", "--size", "32", "--seed", "4", "--out", s(&dir("src"))]))?;
        run(stig().args([
            "synth", "--mode", "checkerboard_upsample", "--input", s(&dir("src")), "--size", "32", "--out",
            s(&dir("fake")),
        ]))?;
        let cfg = dir("run.toml");
        let text = format!(
            "seed = 17\n\n[data]\nreal_dir = \"{}\"\nfake_dir = \"{}\"\nimage_size = 32\n\n[training]\ntotal_steps = 12\nimage_size = 32\nnum_patches = 16\naugment_rotation = true\n\n[training.model]\ngen_depth = 2\ngen_base = 4\ndisc_base = 8\ndisc_downsample = 2\nembed_dim = 16\n",
            s(&dir("real")),
            s(&dir("fake"))
        );
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let mut hashes = Vec::new();
        let mut logs = Vec::new();
        for name in ["a", "b"] {
            run(stig().args(["--config", s(&cfg), "train", "--out", s(&dir(name))]))?;
            hashes.push(std::fs::read_to_string(dir(name).join("final.ckpt.sha256")).map_err(|e| e.to_string())?);
            logs.push(strip_wall_time(
                &std::fs::read_to_string(dir(name).join("loss.jsonl")).map_err(|e| e.to_string())?,
            ));
        }
        ensure(logs[0].len() == 12, || format!("expected 12 log lines, got {}", logs[0].len()))?;
        ensure(logs[0] == logs[1], || "loss logs differ".into())?;
        ensure(hashes[0] == hashes[1], || format!("hashes differ: {} vs {}", hashes[0].trim(), hashes[1].trim()))?;
        Ok(format!("12-step logs identical, checkpoint sha256 {}", hashes[0].split_whitespace().next().unwrap_or("")))
    })();
    report(11, "determinism", outcome);
}
