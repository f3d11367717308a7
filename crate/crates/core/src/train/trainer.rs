use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{make_gt_mask, EpochRecord, TrainConfig, TrainError, TrainLog};
use crate::data::Sample;
use crate::fpenv::FlushDenormals;
use crate::loss::{bce_loss, mse_loss};
use crate::nn::{Mln, Mrn, NetError, NetworkSpec, ParameterStore, SpNet};
use crate::ops;
use crate::tensor::Tensor;

/// The visiting order of `n` samples in `epoch`; a fixed function of `(seed, epoch)`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Per-sample network input and regression target.
struct Example {
    input: Tensor,
    target: Tensor,
}

fn check_size(spec: &NetworkSpec, s: &Sample) -> Result<(), TrainError> {
    if (s.height(), s.width()) != (spec.input_height, spec.input_width) {
        return Err(NetError::InputShape(format!(
            "sample {} is {}×{}, the network expects {}×{}",
            s.id,
            s.height(),
            s.width(),
            spec.input_height,
            spec.input_width
        ))
        .into());
    }
    Ok(())
}

fn gt_mask(s: &Sample, config: &TrainConfig) -> Result<Tensor, TrainError> {
    let p = s.input_annotation().ok_or_else(|| TrainError::Unannotated(s.id.clone()))?;
    make_gt_mask(p, s.height(), s.width(), config.mask_half_width)
}

/// Runs `epochs × batches`, each batch a forward/backward/Adam step supplied by `step`.
fn run_epochs(
    phase: u8,
    examples: &[Example],
    params: &mut ParameterStore,
    config: &TrainConfig,
    mut step: impl FnMut(&ParameterStore, &Tensor, &Tensor) -> Result<(f32, crate::nn::Gradients), TrainError>,
) -> Result<TrainLog, TrainError> {
    let _ftz = FlushDenormals::new();
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let order = epoch_order(config.seed, epoch, examples.len());
        let mut total = 0.0f64;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let inputs: Vec<&Tensor> = idx.iter().map(|&i| &examples[i].input).collect();
            let targets: Vec<&Tensor> = idx.iter().map(|&i| &examples[i].target).collect();
            let (loss, grads) = step(params, &Tensor::stack(&inputs)?, &Tensor::stack(&targets)?)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    phase,
                    epoch: epoch + 1,
                    batch: batch + 1,
                });
            }
            params.adam_update(&grads, config.learning_rate)?;
            total += loss as f64 * idx.len() as f64;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            phase,
            mean_loss: total / examples.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "phase {phase} epoch {}/{}: loss {:.6} ({:.1}s)",
            record.epoch, config.epochs, record.mean_loss, record.seconds
        );
        log.records.push(record);
    }
    Ok(log)
}

/// Fits the MLN to ground-truth square masks with binary cross-entropy.
///
/// Samples must already be at the network's input size and annotated.
pub fn train_phase1(
    mln: &Mln,
    params: &mut ParameterStore,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    config.validate()?;
    let examples = samples
        .iter()
        .map(|s| {
            check_size(mln.spec(), s)?;
            Ok(Example {
                input: s.image.clone(),
                target: gt_mask(s, config)?,
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    run_epochs(1, &examples, params, config, |p, images, masks| {
        let cache = mln.forward_train(p, images)?;
        let loss = bce_loss(cache.mask(), masks)?;
        let mut grads = p.zero_grads();
        mln.backward(p, &cache, &loss.grad, &mut grads)?;
        Ok((loss.value, grads))
    })
}

/// Fits the MRN to normalised `(x/W, y/H)` from image ⊕ ground-truth mask with MSE.
pub fn train_phase2(
    mrn: &Mrn,
    params: &mut ParameterStore,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    config.validate()?;
    let examples = samples
        .iter()
        .map(|s| {
            check_size(mrn.spec(), s)?;
            let p = s.input_annotation().ok_or_else(|| TrainError::Unannotated(s.id.clone()))?;
            let target = Tensor::from_vec(
                &[1, 2],
                vec![(p.x / s.width() as f64) as f32, (p.y / s.height() as f64) as f32],
            )?;
            Ok(Example {
                input: ops::concat_channels(&s.image, &gt_mask(s, config)?)?,
                target,
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    run_epochs(2, &examples, params, config, |p, inputs, targets| {
        let cache = mrn.forward_train(p, inputs)?;
        let loss = mse_loss(cache.output(), targets)?;
        let mut grads = p.zero_grads();
        mrn.backward(p, &cache, &loss.grad, &mut grads)?;
        Ok((loss.value, grads))
    })
}

/// Composes the trained networks; no parameter is modified.
pub fn stack(mln: Mln, mln_params: ParameterStore, mrn: Mrn, mrn_params: ParameterStore) -> Result<SpNet, TrainError> {
    Ok(SpNet::stack(mln, mln_params, mrn, mrn_params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_fingerprint, Point, SyntheticParams};

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            input_height: 16,
            input_width: 16,
            encoder_channels: vec![2, 4],
            hourglass_count: 1,
            hourglass_depth: 1,
            hourglass_channels: 4,
            decoder_channels: vec![4, 2],
            mrn_channels: vec![2, 4],
            mrn_dense: vec![8, 2],
        }
    }

    fn whorl(x: f64, y: f64) -> Sample {
        synth_fingerprint(&SyntheticParams::whorl(Point::new(x, y), 0.0, 0), 16, 16).unwrap()
    }

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 2,
            input_height: 16,
            input_width: 16,
            mask_half_width: 2,
            ..Default::default()
        }
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(7, 3, 10);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_eq!(a, epoch_order(7, 3, 10));
        assert_ne!(a, epoch_order(7, 4, 10));
    }

    #[test]
    fn zero_epochs_change_nothing() {
        let (mln, mut p1) = Mln::build(&tiny_spec(), 1).unwrap();
        let before = p1.clone();
        let log = train_phase1(&mln, &mut p1, &[whorl(8.0, 8.0)], &config(0)).unwrap();
        assert!(log.is_empty());
        assert_eq!(p1, before);

        let (mrn, mut p2) = Mrn::build(&tiny_spec(), 1).unwrap();
        let before = p2.clone();
        assert!(train_phase2(&mrn, &mut p2, &[whorl(8.0, 8.0)], &config(0)).unwrap().is_empty());
        assert_eq!(p2, before);
    }

    #[test]
    fn one_record_per_epoch_and_loss_drops() {
        let (mln, mut p) = Mln::build(&tiny_spec(), 1).unwrap();
        let samples = [whorl(5.0, 6.0), whorl(10.0, 9.0), whorl(8.0, 4.0)];
        let log = train_phase1(&mln, &mut p, &samples, &TrainConfig { learning_rate: 0.01, ..config(30) }).unwrap();
        assert_eq!(log.len(), 30);
        assert!(log.records.iter().all(|r| r.phase == 1));
        assert!(log.final_loss().unwrap() < log.first_loss().unwrap());
    }

    #[test]
    fn constant_target_is_learned() {
        let (mrn, mut p) = Mrn::build(&tiny_spec(), 2).unwrap();
        let samples: Vec<Sample> = [(3.0, 12.0), (12.0, 3.0), (7.0, 7.0), (1.0, 14.0)]
            .iter()
            .map(|&(x, y)| Sample {
                // every sample targets the image centre
                annotation: Some(Point::new(8.0, 8.0)),
                ..whorl(x, y)
            })
            .collect();
        let cfg = TrainConfig { learning_rate: 0.005, ..config(150) };
        train_phase2(&mrn, &mut p, &samples, &cfg).unwrap();
        for s in &samples {
            let input = ops::concat_channels(&s.image, &gt_mask(&samples[0], &cfg).unwrap()).unwrap();
            let out = mrn.forward(&p, &input).unwrap();
            for &v in out.data() {
                assert!((v - 0.5).abs() < 0.02, "{v}");
            }
        }
    }

    #[test]
    fn unannotated_and_misfit_samples_are_rejected() {
        let (mln, mut p) = Mln::build(&tiny_spec(), 1).unwrap();
        let blank = Sample { annotation: None, ..whorl(8.0, 8.0) };
        assert!(matches!(
            train_phase1(&mln, &mut p, &[blank], &config(1)),
            Err(TrainError::Unannotated(_))
        ));
        let big = synth_fingerprint(&SyntheticParams::whorl(Point::new(8.0, 8.0), 0.0, 0), 32, 32).unwrap();
        assert!(matches!(
            train_phase1(&mln, &mut p, &[big], &config(1)),
            Err(TrainError::Net(NetError::InputShape(_)))
        ));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let (mrn, mut p) = Mrn::build(&tiny_spec(), 1).unwrap();
        let id = p.id_of("mrn.dense1.bias").unwrap();
        p.get_mut(id).data_mut()[0] = f32::INFINITY;
        assert!(matches!(
            train_phase2(&mrn, &mut p, &[whorl(8.0, 8.0)], &config(1)),
            Err(TrainError::NonFiniteLoss { phase: 2, epoch: 1, batch: 1 })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let samples = [whorl(5.0, 6.0), whorl(10.0, 9.0), whorl(8.0, 4.0)];
        let run = || {
            let (mln, mut p) = Mln::build(&tiny_spec(), 4).unwrap();
            train_phase1(&mln, &mut p, &samples, &config(3)).unwrap();
            p
        };
        assert_eq!(run(), run());
    }
}
