//! Subcommand implementations and the set-level helpers they share.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stig_core::data::{
    dead_leaves, list_images, load_dataset, load_image, save_image, synthesize_aliased_set, write_npz,
    write_spectra_npz, DeadLeavesConfig, Domain, SynthMode,
};
use stig_core::metrics::{
    averaged_spectrum, embed_images, embed_spectra, fid, lfd, render_spectrum_png, write_metrics_csv,
    AveragedSpectrum, ImageEmbedder, LfdMode, MetricsRow,
};
use stig_core::spectral::{
    chessboard_integration, ddpm_alpha_bar_schedule, sinc_kernel_response, to_spectrum, wiener_profile, Layout,
};
use stig_core::ImageSample;
use stig_model::detector::{
    evaluate_confusion, train_detector, write_confusion_csv, ConfusionReport, ConfusionRow, DetectorArch,
    DetectorConfig, DetectorSample, Label,
};
use stig_model::trainer::checkpoint_path;
use stig_model::{file_sha256, load_generator, refine, Stig, TrainOutputs};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::record::write_run_record;
use crate::{AnalyzeArgs, ArchArg, Cli, Command, DetectorArgs, MetricsArgs, RefineArgs, SynthArgs, SynthModeArg, TrainArgs};

/// Ring whose excess marks 4× grid aliasing, and the neighbour offset it is compared with.
pub const PEAK_OFFSET: usize = 3;

pub fn dispatch(cli: Cli, argv: &[String]) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed, cli.out.clone());
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let name = match &cli.command {
        Command::Train(_) => "train",
        Command::Refine(_) => "refine",
        Command::Analyze(_) => "analyze",
        Command::Metrics(_) => "metrics",
        Command::Detector(_) => "detector",
        Command::Synth(_) => "synth",
    };
    write_run_record(&out, name, argv, &cfg)?;
    match &cli.command {
        Command::Train(a) => train(&cfg, a),
        Command::Refine(a) => refine_dir(&cfg, a),
        Command::Analyze(a) => analyze(&cfg, a),
        Command::Metrics(a) => metrics(&cfg, a),
        Command::Detector(a) => detector(&cfg, a),
        Command::Synth(a) => synth(&cfg, a),
    }
}

/// Loads every readable image of `dir` at `size`, skipping broken files.
pub fn load_dir(dir: &Path, size: usize) -> Result<Vec<(PathBuf, ImageSample)>> {
    let mut out = Vec::new();
    for path in list_images(dir)? {
        match load_image(&path, size) {
            Ok(img) => out.push((path, img)),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        return Err(Error::usage(format!("no readable images in {}", dir.display())));
    }
    Ok(out)
}

fn images(set: &[(PathBuf, ImageSample)]) -> Vec<ImageSample> {
    set.iter().map(|(_, i)| i.clone()).collect()
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

fn image_size(cfg: &RunConfig, flag: Option<usize>) -> usize {
    flag.or(cfg.data.as_ref().map(|d| d.image_size)).unwrap_or(cfg.training.image_size)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn train(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::usage("train needs a [data] section in the config"))?;
    let out = &cfg.output_dir;
    let ds = load_dataset(data, cfg.seed)?;
    let (real, fake) = (ds.images(Domain::Real), ds.images(Domain::Fake));
    log::info!("training on {} fake and {} real images", fake.len(), real.len());
    let log_path = out.join("loss.jsonl");
    let mut stig = match &args.resume {
        Some(p) => {
            let s = Stig::load(p)?;
            if s.config() != &cfg.training {
                log::warn!("resuming with the checkpoint's training config, not the one given");
            }
            s
        }
        None => {
            if log_path.exists() {
                std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
            }
            Stig::new(cfg.training.clone())?
        }
    };
    let checkpoint_dir = out.join("checkpoints");
    if args.checkpoint_every.is_some() {
        std::fs::create_dir_all(&checkpoint_dir).map_err(|e| Error::io(&checkpoint_dir, e))?;
    }
    stig.fit(
        &fake,
        &real,
        &TrainOutputs {
            log: Some(log_path),
            checkpoint_dir: Some(checkpoint_dir),
            checkpoint_every: args.checkpoint_every,
        },
    )?;
    let path = checkpoint_path(out);
    stig.save(&path)?;
    let hash = file_sha256(&path)?;
    let hash_path = out.join("final.ckpt.sha256");
    std::fs::write(&hash_path, format!("{hash}  final.ckpt\n")).map_err(|e| Error::io(&hash_path, e))?;
    println!("{hash}  {}", path.display());
    Ok(())
}

fn refine_dir(cfg: &RunConfig, args: &RefineArgs) -> Result<()> {
    let g = load_generator(&args.checkpoint)?;
    let set = load_dir(&args.input, g.image_size())?;
    let refined = refine(&g, &images(&set))?;
    let img_dir = cfg.output_dir.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut spectra = Vec::new();
    for ((path, _), r) in set.iter().zip(refined) {
        let name = stem(path);
        save_image(&r.image, &img_dir.join(format!("{name}.png")))?;
        if args.spectra {
            spectra.push((name, r.spectrum));
        }
    }
    if args.spectra {
        write_spectra_npz(&cfg.output_dir.join("spectra.npz"), &spectra)?;
    }
    println!("refined {} images into {}", set.len(), img_dir.display());
    Ok(())
}

/// Diffusion timesteps shown when no `--alpha-bar` is given.
const WIENER_TIMESTEPS: [usize; 6] = [0, 50, 100, 250, 500, 999];

fn analyze(cfg: &RunConfig, args: &AnalyzeArgs) -> Result<()> {
    if !(args.wiener || args.sinc || args.ci || args.avg_spectrum) {
        return Err(Error::usage("analyze needs at least one of --wiener, --sinc, --ci, --avg-spectrum"));
    }
    let out = &cfg.output_dir;
    if args.wiener {
        if args.freq_samples < 2 || !(args.max_freq > 0.0) {
            return Err(Error::usage("--freq-samples must be ≥ 2 and --max-freq positive"));
        }
        let freqs: Vec<f64> = (0..args.freq_samples)
            .map(|i| args.max_freq * i as f64 / (args.freq_samples - 1) as f64)
            .collect();
        let profiles = if args.alpha_bar.is_empty() {
            let schedule = ddpm_alpha_bar_schedule(1000, 1e-4, 0.02)?;
            WIENER_TIMESTEPS
                .iter()
                .map(|&t| {
                    let mut p = wiener_profile(schedule[t], &freqs)?;
                    p.timestep = Some(t);
                    Ok(p)
                })
                .collect::<stig_core::Result<Vec<_>>>()?
        } else {
            args.alpha_bar
                .iter()
                .map(|&ab| wiener_profile(ab, &freqs))
                .collect::<stig_core::Result<Vec<_>>>()?
        };
        let path = out.join("wiener.csv");
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "timestep,alpha_bar,freq,response").map_err(io)?;
        for p in &profiles {
            let t = p.timestep.map(|t| t.to_string()).unwrap_or_default();
            for (f, r) in p.freqs.iter().zip(&p.response) {
                writeln!(w, "{t},{},{f},{r}", p.alpha_bar).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
    }
    if args.sinc {
        let path = out.join("sinc_ripple.csv");
        let curve_path = out.join("sinc_response.csv");
        let mut w = create(&path)?;
        let mut c = create(&curve_path)?;
        writeln!(w, "kernel_size,cutoff,ripple").map_err(|e| Error::io(&path, e))?;
        writeln!(c, "kernel_size,freq,magnitude").map_err(|e| Error::io(&curve_path, e))?;
        for &k in &args.sizes {
            let r = sinc_kernel_response(k, args.cutoff, 4096)?;
            writeln!(w, "{k},{},{}", args.cutoff, r.ripple).map_err(|e| Error::io(&path, e))?;
            for (bin, m) in r.response.iter().enumerate() {
                writeln!(c, "{k},{},{m}", r.frequency(bin)).map_err(|e| Error::io(&curve_path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        c.flush().map_err(|e| Error::io(&curve_path, e))?;
    }
    if args.ci || args.avg_spectrum {
        let input = args
            .input
            .as_ref()
            .ok_or_else(|| Error::usage("--ci and --avg-spectrum need --input"))?;
        let set = load_dir(input, image_size(cfg, args.size))?;
        if args.ci {
            let path = out.join("ci.csv");
            let mut w = create(&path)?;
            let io = |e| Error::io(&path, e);
            writeln!(w, "image,ring,value").map_err(io)?;
            for (p, img) in &set {
                let mag = to_spectrum(&img.cast::<f64>())?.mean_raw_magnitude()?;
                let prof = chessboard_integration(mag.view(), Layout::Centered)?;
                for (k, v) in prof.values().iter().enumerate() {
                    writeln!(w, "{},{k},{v}", stem(p)).map_err(io)?;
                }
            }
            let mean = averaged_spectrum(&images(&set))?.chessboard()?;
            for (k, v) in mean.values().iter().enumerate() {
                writeln!(w, "mean,{k},{v}").map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        if args.avg_spectrum {
            let avg = averaged_spectrum(&images(&set))?;
            render_spectrum_png(&avg, &out.join("avg_spectrum.png"))?;
            let to_dyn = |a: &ndarray::Array2<f64>| a.mapv(|v| v as f32).into_dyn();
            write_npz(
                &out.join("avg_spectrum.npz"),
                &[("log_mag".into(), to_dyn(&avg.log_mag)), ("raw".into(), to_dyn(&avg.raw))],
            )?;
        }
    }
    Ok(())
}

/// One metrics row of `candidate` against `real`.
pub fn metrics_row(
    benchmark: &str,
    variant: &str,
    real: &[ImageSample],
    real_avg: &AveragedSpectrum,
    candidate: &[ImageSample],
    embedder: &dyn ImageEmbedder,
) -> Result<MetricsRow> {
    let avg = averaged_spectrum(candidate)?;
    Ok(MetricsRow {
        benchmark: benchmark.to_string(),
        variant: variant.to_string(),
        fid_image: fid(&embed_images(real, embedder)?, &embed_images(candidate, embedder)?)?,
        fid_spectrum: fid(&embed_spectra(real, embedder)?, &embed_spectra(candidate, embedder)?)?,
        lfd_raw: lfd(real_avg, &avg, LfdMode::Raw)?,
        lfd_norm: lfd(real_avg, &avg, LfdMode::Normalized)?,
        n_real: real.len(),
        n_fake: candidate.len(),
    })
}

fn metrics(cfg: &RunConfig, args: &MetricsArgs) -> Result<()> {
    let size = image_size(cfg, args.size);
    let benchmark = args
        .benchmark
        .clone()
        .or(cfg.data.as_ref().map(|d| d.benchmark.clone()))
        .unwrap_or_else(|| "desk".into());
    let embedder = args.embedder.unwrap_or(cfg.metrics.embedder).build();
    let real = images(&load_dir(&args.real, size)?);
    let real_avg = averaged_spectrum(&real)?;
    let mut rows = vec![metrics_row(
        &benchmark,
        "original",
        &real,
        &real_avg,
        &images(&load_dir(&args.fake, size)?),
        embedder.as_ref(),
    )?];
    if let Some(dir) = &args.refined {
        let refined = images(&load_dir(dir, size)?);
        rows.push(metrics_row(&benchmark, "refined", &real, &real_avg, &refined, embedder.as_ref())?);
    }
    write_metrics_csv(&cfg.output_dir.join("metrics.csv"), &rows)?;
    println!("benchmark\tvariant\tFID_image\tFID_spectrum\tLFD_raw\tLFD_norm");
    for r in &rows {
        println!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.benchmark, r.variant, r.fid_image, r.fid_spectrum, r.lfd_raw, r.lfd_norm
        );
    }
    Ok(())
}

/// Aliasing peak of a set: the chessboard ring at `H/4` against its neighbours.
pub fn aliasing_peak(images: &[ImageSample]) -> Result<f64> {
    let avg = averaged_spectrum(images)?;
    let ring = avg.dim().0 / 4;
    Ok(avg.chessboard()?.peak_ratio(ring, PEAK_OFFSET)?)
}

pub fn spectra(images: &[ImageSample]) -> Result<Vec<Array3<f32>>> {
    images
        .iter()
        .map(|img| Ok(to_spectrum(img)?.log_mag().clone()))
        .collect()
}

/// Result of training a detector on real-vs-fake spectra and evaluating it on
/// the held-out portion, with refined versions of the held-out fakes.
pub struct DetectorOutcome {
    pub val_accuracy: f64,
    pub confusion: Option<ConfusionReport>,
}

/// `refined` must be index-aligned with `fake` when given.
pub fn detector_experiment(
    real: &[ImageSample],
    fake: &[ImageSample],
    refined: Option<&[ImageSample]>,
    cfg: &DetectorConfig,
) -> Result<DetectorOutcome> {
    if let Some(r) = refined {
        if r.len() != fake.len() {
            return Err(Error::usage("refined set must pair one-to-one with the fake set"));
        }
    }
    let real_s = spectra(real)?;
    let fake_s = spectra(fake)?;
    let samples: Vec<DetectorSample> = real_s
        .iter()
        .map(|s| DetectorSample::new(s.clone(), Label::Real))
        .chain(fake_s.iter().map(|s| DetectorSample::new(s.clone(), Label::Fake)))
        .collect::<stig_model::Result<_>>()?;
    let trained = train_detector(&samples, cfg)?;
    let confusion = match refined {
        Some(r) => {
            let refined_s = spectra(r)?;
            let n_real = real_s.len();
            let mut val_real = Vec::new();
            let mut val_fake = Vec::new();
            let mut val_refined = Vec::new();
            for &i in &trained.val_indices {
                if i < n_real {
                    val_real.push(real_s[i].clone());
                } else {
                    val_fake.push(fake_s[i - n_real].clone());
                    val_refined.push(refined_s[i - n_real].clone());
                }
            }
            Some(evaluate_confusion(&trained.detector, &val_fake, &val_refined, &val_real)?)
        }
        None => None,
    };
    Ok(DetectorOutcome {
        val_accuracy: trained.val_accuracy,
        confusion,
    })
}

fn arch_name(a: DetectorArch) -> &'static str {
    match a {
        DetectorArch::ShallowCnn => "shallow_cnn",
        DetectorArch::VitB16 => "vit_b16",
        DetectorArch::VitSmall => "vit_small",
    }
}

fn detector(cfg: &RunConfig, args: &DetectorArgs) -> Result<()> {
    let size = image_size(cfg, args.size);
    let mut dcfg = cfg.detector.clone();
    if let Some(a) = args.arch {
        dcfg.arch = match a {
            ArchArg::ShallowCnn => DetectorArch::ShallowCnn,
            ArchArg::VitB16 => DetectorArch::VitB16,
            ArchArg::VitSmall => DetectorArch::VitSmall,
        };
    }
    let benchmark = args
        .benchmark
        .clone()
        .or(cfg.data.as_ref().map(|d| d.benchmark.clone()))
        .unwrap_or_else(|| "desk".into());
    let real = images(&load_dir(&args.real, size)?);
    let fake_set = load_dir(&args.fake, size)?;
    let fake = images(&fake_set);
    // Refined images are matched to their sources by file stem.
    let refined = match &args.refined {
        Some(dir) => {
            let by_stem: HashMap<String, ImageSample> =
                load_dir(dir, size)?.into_iter().map(|(p, i)| (stem(&p), i)).collect();
            let paired = fake_set
                .iter()
                .map(|(p, _)| {
                    by_stem
                        .get(&stem(p))
                        .cloned()
                        .ok_or_else(|| Error::usage(format!("no refined image for {}", p.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(paired)
        }
        None => None,
    };
    let outcome = detector_experiment(&real, &fake, refined.as_deref(), &dcfg)?;
    println!("held-out accuracy {:.4}", outcome.val_accuracy);
    let summary = serde_json::json!({
        "arch": arch_name(dcfg.arch),
        "benchmark": benchmark,
        "val_accuracy": outcome.val_accuracy,
        "confusion": outcome.confusion,
    });
    let path = cfg.output_dir.join("detector.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")
        .map_err(|e| Error::io(&path, e))?;
    if let Some(c) = outcome.confusion {
        println!("original {:.4} refined {:.4} ({} per class)", c.accuracy_original, c.accuracy_refined, c.per_class);
        write_confusion_csv(
            &cfg.output_dir.join("confusion.csv"),
            &[ConfusionRow {
                method: arch_name(dcfg.arch).into(),
                benchmark,
                original: c.accuracy_original,
                refined: c.accuracy_refined,
                per_class: c.per_class,
            }],
        )?;
    }
    Ok(())
}

/// Writes `count` seeded dead-leaves images named `00000.png`, `00001.png`, ...
pub fn write_dead_leaves(dir: &Path, count: usize, size: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = DeadLeavesConfig {
        size,
        ..DeadLeavesConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        save_image(&dead_leaves(&cfg, &mut rng)?, &dir.join(format!("{i:05}.png")))?;
    }
    Ok(())
}

fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let out = &cfg.output_dir;
    let n = match args.mode {
        SynthModeArg::DeadLeaves => {
            write_dead_leaves(out, args.count, args.size, cfg.seed)?;
            args.count
        }
        mode => {
            let input = args
                .input
                .as_ref()
                .ok_or_else(|| Error::usage("artifact modes need --input"))?;
            let m = match mode {
                SynthModeArg::CheckerboardUpsample => {
                    let SynthMode::CheckerboardUpsample { factor, imbalance } = SynthMode::checkerboard() else {
                        unreachable!()
                    };
                    SynthMode::CheckerboardUpsample {
                        factor: args.factor.unwrap_or(factor),
                        imbalance: args.imbalance.unwrap_or(imbalance),
                    }
                }
                _ => SynthMode::HighfreqSuppress {
                    alpha_bar: args.alpha_bar.unwrap_or(0.99),
                },
            };
            synthesize_aliased_set(input, m, out, args.size)?
        }
    };
    println!("wrote {n} images to {}", out.display());
    Ok(())
}
