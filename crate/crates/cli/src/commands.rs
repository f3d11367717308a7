use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};
use serde::Serialize;
use spnet_core::data::{
    is_supported_image, list_images, load_dataset, read_gray, whorl_corpus, write_dataset, Manifest, ManifestEntry,
    Point, Sample, IMAGE_DIR,
};
use spnet_core::eval::{emit_report, predict_points, EvalReport};
use spnet_core::nn::{save_checkpoint, save_checkpoint_with_optimizer, Mln, Mrn, NetworkSpec, ParameterStore};
use spnet_core::poincare::{detect_singularities, primary_singularity, BaselineParams};
use spnet_core::train::{split_dataset, train_phase1, train_phase2, TrainConfig, TrainLog};

use crate::args::{
    AnnotateArgs, BaselineArgs, Command, EvalArgs, Phase, PredictArgs, Subset, SynthArgs, TrainArgs,
};
use crate::model::{ModelDir, Split, MODEL_FILE, TRAIN_LOG_FILE};
use crate::{server, Cli};

/// Sidecar written next to every output artifact so a run can be repeated.
pub const COMMAND_FILE: &str = "command.json";

const PREDICT_BATCH: usize = 8;

pub fn dispatch(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a, argv),
        Command::Train(a) => train(a, argv),
        Command::Predict(a) => predict(a, argv),
        Command::Eval(a) => eval(a, argv),
        Command::Baseline(a) => baseline(a, argv),
        Command::Annotate(a) => annotate(a),
    }
}

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    command: &'a [String],
    #[serde(flatten)]
    details: T,
}

fn write_echo<T: Serialize>(path: &Path, argv: &[String], details: T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Echo { command: argv, details })? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `out.csv` → `out.csv.meta.json`.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn synth(a: SynthArgs, argv: &[String]) -> Result<()> {
    ensure!(a.count > 0, "--count must be at least 1");
    let samples = whorl_corpus(a.count, a.size.height, a.size.width, a.noise, a.seed)?;
    write_dataset(&a.out, &samples)?;
    #[derive(Serialize)]
    struct Details {
        count: usize,
        size: String,
        noise: f64,
        seed: u64,
    }
    write_echo(
        &a.out.join(COMMAND_FILE),
        argv,
        Details { count: a.count, size: a.size.to_string(), noise: a.noise, seed: a.seed },
    )?;
    println!("wrote {} images to {}", a.count, a.out.display());
    Ok(())
}

fn train(a: TrainArgs, argv: &[String]) -> Result<()> {
    let loaded = load_dataset(&a.data).with_context(|| format!("loading dataset {}", a.data.display()))?;
    let total = loaded.samples.len();
    let annotated: Vec<Sample> = loaded.samples.into_iter().filter(|s| s.annotation.is_some()).collect();
    if annotated.len() < total {
        info!("{} of {total} images have no singular point or no label and are not used", total - annotated.len());
    }

    let resuming = a.phase == Phase::Two;
    let previous = if resuming {
        Some(ModelDir::read(&a.out).context("--phase 2 needs a model directory from an earlier --phase 1 run")?)
    } else {
        None
    };

    let mut config = TrainConfig::for_input(a.size.height, a.size.width);
    config.learning_rate = a.lr;
    config.epochs = a.epochs;
    config.batch_size = a.batch_size;
    config.split_fraction = a.split;
    config.seed = a.seed;
    if let Some(hw) = a.mask_half_width {
        config.mask_half_width = hw;
    }
    config.validate()?;

    let spec = match &previous {
        Some(prev) => {
            ensure!(
                (prev.spec.input_height, prev.spec.input_width) == (a.size.height, a.size.width),
                "--size {} does not match the stored network input {}x{}",
                a.size,
                prev.spec.input_height,
                prev.spec.input_width
            );
            prev.spec.clone()
        }
        None => NetworkSpec::for_input(a.size.height, a.size.width),
    };

    let split = match &previous {
        Some(_) => Split::read(&a.out)?,
        None => {
            let (train, test) = split_dataset(annotated.clone(), config.split_fraction, config.seed)?;
            Split {
                train: train.into_iter().map(|s| s.id).collect(),
                test: test.into_iter().map(|s| s.id).collect(),
            }
        }
    };
    let train_set = annotated
        .iter()
        .filter(|s| split.train.contains(&s.id))
        .map(|s| s.resized(spec.input_height, spec.input_width))
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(
        train_set.len() == split.train.len(),
        "{} training images listed in the split are missing from {}",
        split.train.len() - train_set.len(),
        a.data.display()
    );
    info!("training on {} images, holding out {}", train_set.len(), split.test.len());

    let (mln, mut mln_params) = Mln::build(&spec, config.seed)?;
    let (mrn, mut mrn_params) = Mrn::build(&spec, config.seed.wrapping_add(1))?;
    let mut log = TrainLog::default();
    let mut phases = Vec::new();
    if let Some(prev) = &previous {
        let store = spnet_core::nn::load_checkpoint(a.out.join(MODEL_FILE))?;
        mln_params.load_from(&store.filter_prefix("mln."))?;
        mrn_params.load_from(&store.filter_prefix("mrn."))?;
        phases = prev.phases_trained.clone();
    }

    fs::create_dir_all(&a.out)?;
    if matches!(a.phase, Phase::One | Phase::All) {
        log.append(train_phase1(&mln, &mut mln_params, &train_set, &config)?);
        phases.push(1);
    }
    if matches!(a.phase, Phase::Two | Phase::All) {
        let cfg = TrainConfig { epochs: a.phase2_epochs.unwrap_or(a.epochs), ..config.clone() };
        log.append(train_phase2(&mrn, &mut mrn_params, &train_set, &cfg)?);
        phases.push(2);
    }

    let mut store = ParameterStore::new();
    store.extend(&mln_params)?;
    store.extend(&mrn_params)?;
    let path = a.out.join(MODEL_FILE);
    if a.save_optimizer {
        save_checkpoint_with_optimizer(&store, &path)?;
    } else {
        save_checkpoint(&store, &path)?;
    }

    let log_path = a.out.join(TRAIN_LOG_FILE);
    if resuming && log_path.exists() {
        let mut text = fs::read_to_string(&log_path)?;
        let fresh = log.to_csv_string();
        text.push_str(fresh.split_once('\n').map_or("", |(_, rows)| rows));
        fs::write(&log_path, text)?;
    } else {
        log.write_csv(&log_path)?;
    }

    let mut commands = previous.as_ref().map(|p| p.commands.clone()).unwrap_or_default();
    commands.push(argv.to_vec());
    ModelDir {
        spec,
        train: config,
        phases_trained: phases,
        dataset: a.data.display().to_string(),
        commands,
    }
    .write(&a.out)?;
    split.write(&a.out)?;
    if let Some(loss) = log.final_loss() {
        println!("final loss {loss:.6}; model written to {}", a.out.display());
    }
    Ok(())
}

/// Expands files, image directories and dataset directories into image paths.
fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_file() {
            ensure!(is_supported_image(input), "{} is not a PNG or PGM image", input.display());
            out.push(input.clone());
        } else if input.is_dir() {
            let dir = if input.join(IMAGE_DIR).is_dir() { input.join(IMAGE_DIR) } else { input.clone() };
            out.extend(list_images(&dir)?.into_iter().map(|n| dir.join(n)));
        } else {
            bail!("input {} does not exist", input.display());
        }
    }
    Ok(out)
}

fn file_id(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn predict(a: PredictArgs, argv: &[String]) -> Result<()> {
    let (meta, net) = ModelDir::load_net(&a.model)?;
    ensure!(meta.phases_trained.contains(&2), "model in {} has no trained phase 2", a.model.display());
    let mut paths = collect_images(&a.inputs)?;
    if a.subset != Subset::All {
        let split = Split::read(&a.model)?;
        let keep = if a.subset == Subset::Train { split.train } else { split.test };
        paths.retain(|p| keep.contains(&file_id(p)));
    }
    ensure!(!paths.is_empty(), "no images to predict");

    let samples = paths
        .iter()
        .map(|p| {
            let image = read_gray(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Sample::new(file_id(p), image, None)?.resized(net.spec().input_height, net.spec().input_width)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let points = predict_points(&net, &samples, PREDICT_BATCH)?;

    let mut manifest = Manifest::new();
    for (s, p) in samples.iter().zip(points) {
        manifest.set(s.id.clone(), ManifestEntry::Point(p));
    }
    manifest.write_atomic(&a.out)?;
    #[derive(Serialize)]
    struct Details {
        model: String,
        images: usize,
    }
    write_echo(
        &sidecar_path(&a.out),
        argv,
        Details { model: a.model.display().to_string(), images: samples.len() },
    )?;
    println!("wrote {} predictions to {}", samples.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs, argv: &[String]) -> Result<()> {
    let pred = Manifest::read(&a.pred)?;
    let truth = Manifest::read(&a.truth)?;
    let model_id = a.model_id.unwrap_or_else(|| a.pred.display().to_string());
    let dataset_id = a.dataset_id.unwrap_or_else(|| a.truth.display().to_string());
    let report = EvalReport::from_manifests(&pred, &truth, a.threshold, model_id, dataset_id)?;
    if report.missing_predictions > 0 {
        warn!("{} ground-truth images have no prediction and are not scored", report.missing_predictions);
    }
    emit_report(&report, &a.out)?;
    write_echo(&a.out.join(COMMAND_FILE), argv, ())?;
    println!(
        "TDR {:.4} at {} px over {} images; report in {}",
        report.tdr,
        a.threshold,
        report.samples.len(),
        a.out.display()
    );
    Ok(())
}

fn baseline(a: BaselineArgs, argv: &[String]) -> Result<()> {
    let params = BaselineParams { block_size: a.block_size, smoothing_iterations: a.smoothing };
    let paths = collect_images(&a.inputs)?;
    ensure!(!paths.is_empty(), "no images to process");
    let mut manifest = Manifest::new();
    for p in &paths {
        let image = read_gray(p).with_context(|| format!("reading {}", p.display()))?;
        let shape = image.shape();
        let (h, w) = (shape[2], shape[3]);
        let found = detect_singularities(&image, &params).with_context(|| format!("processing {}", p.display()))?;
        let entry = match primary_singularity(&found, h, w) {
            Some(s) => ManifestEntry::Point(Point::new(s.x, s.y)),
            None => ManifestEntry::NoSingularPoint,
        };
        manifest.set(file_id(p), entry);
    }
    manifest.write_atomic(&a.out)?;
    write_echo(&sidecar_path(&a.out), argv, params)?;
    println!("wrote {} baseline detections to {}", paths.len(), a.out.display());
    Ok(())
}

fn annotate(a: AnnotateArgs) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    runtime.block_on(server::serve(&a.data, a.port, a.ui_dir.as_deref()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(sidecar_path(Path::new("out/p.csv")), PathBuf::from("out/p.csv.meta.json"));
    }
}
