use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lf::Stack;
use crate::nn::adam::{adam_step, AdamState, TrainHyper};
use crate::nn::loss::sq_err_and_grad;
use crate::nn::network::{Gradients, NetworkDef};

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.9e}", self.step, self.epoch, self.loss)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainSummary {
    pub records: Vec<LogRecord>,
    /// Mean batch loss of every completed epoch.
    pub epoch_means: Vec<f64>,
}

impl TrainSummary {
    pub fn initial_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

/// Mean squared error of a batch and its summed gradients.
pub fn batch_loss_and_grads(
    net: &NetworkDef,
    inputs: &[&Stack],
    targets: &[&Stack],
) -> (f64, Gradients<f32>) {
    let item_len = targets[0].data.len();
    let denom = item_len * targets.len();
    let per_item: Vec<(f64, Gradients<f32>)> = (0..inputs.len())
        .into_par_iter()
        .map(|i| {
            let x = inputs[i];
            let cache = net.forward_item(&x.data, x.h, x.w);
            let (sum, dy) = sq_err_and_grad(&cache.output, &targets[i].data, denom);
            (sum, net.backward_item(&cache, &dy))
        })
        .collect();
    let mut total = Gradients::zeros_like(net);
    let mut sum = 0.0;
    for (s, g) in &per_item {
        sum += s;
        total.add_assign(g);
    }
    (sum / denom as f64, total)
}

fn check_samples(net: &NetworkDef, inputs: &[Stack], targets: &[Stack]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let (x0, t0) = (&inputs[0], &targets[0]);
    for (i, (x, t)) in inputs.iter().zip(targets).enumerate() {
        if (x.channels, x.h, x.w) != (x0.channels, x0.h, x0.w)
            || (t.channels, t.h, t.w) != (t0.channels, t0.h, t0.w)
            || (x.h, x.w) != (t.h, t.w)
        {
            return Err(Error::Dimension(format!(
                "training sample {i} has inconsistent shape"
            )));
        }
    }
    if x0.channels != net.in_channels() || t0.channels != net.out_channels() {
        return Err(Error::Dimension(format!(
            "samples are {}->{} channels, network is {}->{}",
            x0.channels,
            t0.channels,
            net.in_channels(),
            net.out_channels()
        )));
    }
    Ok(())
}

/// Minibatch Adam training. Sample order is reshuffled every epoch from a
/// generator seeded with `hyper.seed`; the last partial batch is kept.
/// `on_step` sees every log record as it is produced.
pub fn train_network(
    net: &mut NetworkDef,
    inputs: &[Stack],
    targets: &[Stack],
    hyper: &TrainHyper,
    on_step: &mut dyn FnMut(&LogRecord),
) -> Result<TrainSummary> {
    hyper.validate()?;
    check_samples(net, inputs, targets)?;
    let mut state = AdamState::new(net);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut summary = TrainSummary::default();
    let max_steps = hyper.max_steps.unwrap_or(u64::MAX as usize) as u64;

    'epochs: for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch_size) {
            if state.t >= max_steps {
                break 'epochs;
            }
            let xs: Vec<&Stack> = chunk.iter().map(|&i| &inputs[i]).collect();
            let ts: Vec<&Stack> = chunk.iter().map(|&i| &targets[i]).collect();
            let (loss, grads) = batch_loss_and_grads(net, &xs, &ts);
            if !loss.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "training diverged at step {}: loss {loss}",
                    state.t + 1
                )));
            }
            adam_step(net, &grads, &mut state, hyper);
            let rec = LogRecord {
                step: state.t,
                epoch,
                loss,
            };
            on_step(&rec);
            summary.records.push(rec);
            epoch_sum += loss;
            batches += 1;
        }
        if batches > 0 {
            summary.epoch_means.push(epoch_sum / batches as f64);
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::ConvLayer;
    use crate::nn::network::Network;

    #[test]
    fn learns_a_scale() {
        // y = 0.5·x with a single 1x1 weight
        let net0 = Network::new(vec![ConvLayer::<f32>::zeros(1, 1, 1, false).unwrap()]).unwrap();
        let inputs: Vec<Stack> = (0..20)
            .map(|i| Stack {
                w: 3,
                h: 3,
                channels: 1,
                data: (0..9).map(|j| ((i * 9 + j) as f32 * 0.37).sin()).collect(),
            })
            .collect();
        let targets: Vec<Stack> = inputs
            .iter()
            .map(|s| Stack {
                data: s.data.iter().map(|v| 0.5 * v).collect(),
                ..s.clone()
            })
            .collect();
        let hyper = TrainHyper {
            alpha: 0.05,
            batch_size: 6,
            epochs: 60,
            ..TrainHyper::default()
        };
        let mut net = net0.clone();
        let mut lines = 0;
        let s = train_network(&mut net, &inputs, &targets, &hyper, &mut |_| lines += 1).unwrap();
        assert_eq!(lines, 60 * 4);
        assert!(
            (net.layers[0].weights[0] - 0.5).abs() < 0.02,
            "{:?}",
            net.layers[0]
        );
        assert!(s.final_loss().unwrap() < 0.01 * s.initial_loss().unwrap());

        // deterministic
        let mut net2 = net0.clone();
        let s2 = train_network(&mut net2, &inputs, &targets, &hyper, &mut |_| {}).unwrap();
        assert_eq!(net, net2);
        assert_eq!(s, s2);
    }

    #[test]
    fn max_steps_caps_training() {
        let mut net = Network::new(vec![ConvLayer::<f32>::zeros(1, 1, 1, false).unwrap()]).unwrap();
        let x = vec![Stack::zeros(2, 2, 1); 10];
        let hyper = TrainHyper {
            batch_size: 3,
            epochs: 10,
            max_steps: Some(7),
            ..TrainHyper::default()
        };
        let s = train_network(&mut net, &x, &x, &hyper, &mut |_| {}).unwrap();
        assert_eq!(s.records.len(), 7);
    }

    #[test]
    fn rejects_mismatched_samples() {
        let mut net = Network::new(vec![ConvLayer::<f32>::zeros(2, 1, 1, false).unwrap()]).unwrap();
        let x = vec![Stack::zeros(2, 2, 1)];
        assert!(train_network(&mut net, &x, &x, &TrainHyper::default(), &mut |_| {}).is_err());
        assert!(train_network(&mut net, &[], &[], &TrainHyper::default(), &mut |_| {}).is_err());
    }

    #[test]
    fn log_line_format() {
        let r = LogRecord {
            step: 3,
            epoch: 1,
            loss: 0.25,
        };
        assert_eq!(r.to_string(), "3 1 2.500000000e-1");
    }
}
