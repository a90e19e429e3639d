use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stig_core::data::{checkerboard_upsample, dead_leaves, DeadLeavesConfig};
use stig_core::ImageSample;
use stig_model::checkpoint::load_generator;
use stig_model::params::ParamStore;
use stig_model::{lr_at, refine, LossRecord, LossWeights, ModelConfig, SsimConfig, Stig, TrainOutputs, TrainingConfig};

fn toy_config(size: usize) -> TrainingConfig {
    TrainingConfig {
        total_steps: 20,
        image_size: size,
        num_patches: 8,
        weights: LossWeights {
            sigma: 3,
            ..LossWeights::default()
        },
        model: ModelConfig {
            gen_depth: 2,
            gen_base: 4,
            disc_base: 4,
            disc_downsample: 1,
            embed_dim: 8,
            ..ModelConfig::default()
        },
        ssim: SsimConfig {
            window: 7,
            ..SsimConfig::default()
        },
        ..TrainingConfig::default()
    }
}

/// Natural-statistics reals and their aliased counterparts.
fn toy_sets(size: usize, n: usize, seed: u64) -> (Vec<ImageSample>, Vec<ImageSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = DeadLeavesConfig {
        size,
        r_max: size as f64 * 0.6,
        ..DeadLeavesConfig::default()
    };
    let real: Vec<_> = (0..n).map(|_| dead_leaves(&cfg, &mut rng).unwrap()).collect();
    let fake = (0..n)
        .map(|_| checkerboard_upsample(&dead_leaves(&cfg, &mut rng).unwrap(), 4, 0.25).unwrap())
        .collect();
    (real, fake)
}

fn snapshot(ps: &ParamStore) -> Vec<Vec<f64>> {
    ps.snapshot()
        .iter()
        .map(|(_, t)| t.to_dtype(candle_core::DType::F64).unwrap().flatten_all().unwrap().to_vec1().unwrap())
        .collect()
}

fn without_time(r: &LossRecord) -> LossRecord {
    LossRecord {
        wall_time_s: 0.0,
        ..r.clone()
    }
}

#[test]
fn learning_rate_schedule() {
    let cfg = TrainingConfig {
        total_steps: 1000,
        ..TrainingConfig::default()
    };
    assert_eq!(lr_at(0, &cfg).unwrap(), 8e-5);
    assert_eq!(lr_at(199, &cfg).unwrap(), 8e-5);
    assert!((lr_at(600, &cfg).unwrap() - 4e-5).abs() < 1e-18);
    assert_eq!(lr_at(1000, &cfg).unwrap(), 0.0);
    assert!(lr_at(1001, &cfg).is_err());
    let all_decay = TrainingConfig {
        warm_fraction: 0.0,
        ..cfg.clone()
    };
    assert!((lr_at(500, &all_decay).unwrap() - 4e-5).abs() < 1e-18);
}

#[test]
fn config_validation() {
    let bad = [
        TrainingConfig {
            lr: 0.0,
            ..TrainingConfig::default()
        },
        TrainingConfig {
            warm_fraction: 1.5,
            ..TrainingConfig::default()
        },
        TrainingConfig {
            image_size: 63,
            ..TrainingConfig::default()
        },
    ];
    for cfg in bad {
        assert!(Stig::new(cfg).is_err());
    }
}

#[test]
fn fixed_seed_steps_are_bit_identical() {
    let (real, fake) = toy_sets(16, 4, 1);
    let run = || {
        let mut s = Stig::new(TrainingConfig {
            augment_rotation: true,
            ..toy_config(16)
        })
        .unwrap();
        let recs: Vec<_> = (0..3)
            .map(|i| without_time(&s.train_step(&fake[i..i + 1], &real[i + 1..i + 2]).unwrap()))
            .collect();
        (recs, snapshot(s.generator().params()))
    };
    let (ra, pa) = run();
    let (rb, pb) = run();
    assert_eq!(ra, rb);
    assert_eq!(pa, pb);
}

#[test]
fn zero_weights_leave_parameters_untouched() {
    let (real, fake) = toy_sets(16, 2, 2);
    let cfg = toy_config(16);
    let mut s = Stig::new(TrainingConfig {
        weights: LossWeights {
            adv: 0.0,
            pcl: 0.0,
            rec: 0.0,
            spec: 0.0,
            lf: 0.0,
            ..cfg.weights.clone()
        },
        ..cfg
    })
    .unwrap();
    let before = [
        snapshot(s.generator().params()),
        snapshot(s.projection_head().params()),
        snapshot(s.patch_discriminator().params()),
        snapshot(s.spectral_discriminator().params()),
    ];
    let r = s.train_step(&fake[..1], &real[..1]).unwrap();
    assert_eq!(r.gen_total, 0.0);
    let after = [
        snapshot(s.generator().params()),
        snapshot(s.projection_head().params()),
        snapshot(s.patch_discriminator().params()),
        snapshot(s.spectral_discriminator().params()),
    ];
    assert_eq!(before, after);
}

#[test]
fn adversarial_only_path_trains_generator() {
    let (real, fake) = toy_sets(16, 2, 3);
    let cfg = toy_config(16);
    let mut s = Stig::new(TrainingConfig {
        weights: LossWeights {
            pcl: 0.0,
            rec: 0.0,
            spec: 0.0,
            lf: 0.0,
            ..cfg.weights.clone()
        },
        ..cfg
    })
    .unwrap();
    let g0 = snapshot(s.generator().params());
    let h0 = snapshot(s.projection_head().params());
    let r = s.train_step(&fake[..1], &real[..1]).unwrap();
    assert_eq!(r.pcl, 0.0);
    assert!(r.adv > 0.0);
    assert_ne!(g0, snapshot(s.generator().params()));
    assert_eq!(h0, snapshot(s.projection_head().params()));
}

#[test]
fn rejects_mismatched_image_size() {
    let (real, fake) = toy_sets(16, 1, 4);
    let mut s = Stig::new(toy_config(32)).unwrap();
    assert!(s.train_step(&fake, &real).is_err());
    assert!(refine(s.generator(), &fake).is_err());
    assert_eq!(s.step(), 0);
}

/// Mean of the first and last `w` values.
fn ends(v: &[f64], w: usize) -> (f64, f64) {
    let head = v[..w].iter().sum::<f64>() / w as f64;
    let tail = v[v.len() - w..].iter().sum::<f64>() / w as f64;
    (head, tail)
}

#[test]
fn smoke_run_reduces_generator_adversarial_loss() {
    let (real, fake) = toy_sets(64, 16, 5);
    let mut cfg = toy_config(64);
    cfg.total_steps = 200;
    cfg.model.gen_depth = 3;
    cfg.model.disc_downsample = 3;
    cfg.num_patches = 64;
    cfg.weights.sigma = 8;
    cfg.ssim = SsimConfig::default();
    let mut s = Stig::new(cfg).unwrap();
    let recs = s.fit(&fake, &real, &TrainOutputs::default()).unwrap();
    assert_eq!(recs.len(), 200);
    let adv: Vec<f64> = recs.iter().map(|r| r.adv).collect();
    let (head, tail) = ends(&adv, 20);
    assert!(tail < head, "adversarial loss did not trend down: {head} -> {tail}");
    assert!(recs.iter().all(|r| r.gen_total.is_finite()));
}

#[test]
fn fit_logs_one_line_per_step_and_resumes() {
    let (real, fake) = toy_sets(16, 4, 6);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("loss.jsonl");
    let mut cfg = toy_config(16);
    cfg.total_steps = 6;
    let outputs = TrainOutputs {
        log: Some(log.clone()),
        checkpoint_dir: Some(dir.path().to_path_buf()),
        checkpoint_every: Some(3),
    };
    let mut s = Stig::new(cfg.clone()).unwrap();
    let recs = s.fit(&fake, &real, &outputs).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 6);
    let parsed: Vec<LossRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, recs);

    // Resuming from the step-3 checkpoint reproduces the remaining steps.
    let mut resumed = Stig::load(&dir.path().join("step_0000003.ckpt")).unwrap();
    assert_eq!(resumed.step(), 3);
    let tail = resumed.fit(&fake, &real, &TrainOutputs::default()).unwrap();
    let strip = |v: &[LossRecord]| v.iter().map(without_time).collect::<Vec<_>>();
    assert_eq!(strip(&tail), strip(&recs[3..]));
    assert_eq!(snapshot(resumed.generator().params()), snapshot(s.generator().params()));
}

#[test]
fn checkpoint_round_trip_refines_identically() {
    let (real, fake) = toy_sets(16, 4, 7);
    let mut s = Stig::new(toy_config(16)).unwrap();
    for i in 0..2 {
        s.train_step(&fake[i..i + 1], &real[i..i + 1]).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    s.save(&path).unwrap();
    let g = load_generator(&path).unwrap();
    let a = refine(s.generator(), &fake).unwrap();
    let b = refine(&g, &fake).unwrap();
    let again = refine(&g, &fake).unwrap();
    for ((x, y), z) in a.iter().zip(&b).zip(&again) {
        assert_eq!(x.image, y.image);
        assert_eq!(x.spectrum, y.spectrum);
        assert_eq!(y.image, z.image);
    }
    let full = Stig::load(&path).unwrap();
    assert_eq!(full.step(), 2);
    assert_eq!(full.config(), s.config());
    assert_eq!(snapshot(full.patch_discriminator().params()), snapshot(s.patch_discriminator().params()));

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_generator(&path).is_err());
}

#[test]
fn identity_generator_refines_to_the_input_spectrum() {
    let (_, fake) = toy_sets(16, 3, 8);
    let mut cfg = toy_config(16);
    cfg.model.gen_residual = true;
    let s = Stig::new(cfg).unwrap();
    let out = refine(s.generator(), &fake).unwrap();
    let transform = stig_core::spectral::SpectralTransform::<f32>::new(16, 16).unwrap();
    for (r, img) in out.iter().zip(&fake) {
        let input = transform.to_spectrum(img).unwrap();
        let d = (r.spectrum.log_mag() - input.log_mag()).mapv(f32::abs);
        assert!(d.iter().all(|&v| v < 1e-6));
        let pd = (r.image.pixels() - img.pixels()).mapv(f32::abs);
        assert!(pd.iter().all(|&v| v < 1e-4));
    }
}

#[test]
fn refine_is_pure() {
    let (_, fake) = toy_sets(16, 2, 9);
    let s = Stig::new(toy_config(16)).unwrap();
    let a = refine(s.generator(), &fake).unwrap();
    let b = refine(s.generator(), &fake).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.image, y.image);
    }
}
