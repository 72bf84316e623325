//! Named finite-difference gradient checks covering every differentiable
//! building block and every architecture at its smallest usable size.
//! Shared by the `gradcheck` command and the release gate.

use rand::Rng;

use crate::error::Result;
use crate::harness::loss::mse_loss;
use crate::layers::gradcheck::{gradcheck, relative_error, GRADCHECK_STEP, GRADCHECK_TOL};
use crate::layers::gru::{conv_gru_tape_step, GruParams};
use crate::layers::tape::{NodeId, Tape};
use crate::layers::{Activation, ConvSpec, ParamStore};
use crate::rng::{self, Domain};
use crate::synthgen::MotionLabels;
use crate::tensor::Tensor;
use crate::zoo::{build_model, ArchId, ModelConfig, MotionPrediction};

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: String,
    pub max_rel_err: f64,
    pub passed: bool,
}

impl SuiteOutcome {
    fn new(name: &str, max_rel_err: f64) -> Self {
        SuiteOutcome {
            name: name.to_string(),
            max_rel_err,
            passed: max_rel_err < GRADCHECK_TOL,
        }
    }
}

fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::uniform_from(shape, -1.0, 1.0, rng).expect("static shape")
}

fn check_scalar_graph(
    name: &str,
    store: &mut ParamStore,
    forward: impl Fn(&ParamStore, &mut Tape) -> Result<NodeId>,
) -> Result<SuiteOutcome> {
    let unit = Tensor::from_vec(&[1], vec![1.0])?;
    let report = gradcheck(
        store,
        |s| {
            let mut tape = Tape::new();
            let out = forward(s, &mut tape)?;
            tape.backward(s, out, &unit)?;
            Ok(tape.value(out).data()[0])
        },
        |s| {
            let mut tape = Tape::new();
            let out = forward(s, &mut tape)?;
            Ok(tape.value(out).data()[0])
        },
        GRADCHECK_STEP,
    )?;
    Ok(SuiteOutcome::new(name, report.max_rel_err()))
}

/// Check each layer type in a minimal graph that routes its backward pass
/// into parameter gradients.
pub fn layer_gradchecks(seed: u64) -> Result<Vec<SuiteOutcome>> {
    let mut r = rng::stream(seed, Domain::GradCheck, 0);
    let mut outcomes = Vec::new();

    {
        let mut store = ParamStore::new();
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 3,
            kernel: vec![2, 3, 2],
            stride: vec![1, 2, 1],
            padding: vec![1, 0, 1],
        };
        let w = store.add("w", rand_tensor(&spec.weight_shape(), &mut r));
        let b = store.add("b", rand_tensor(&[3], &mut r));
        let x = rand_tensor(&[2, 4, 5, 4], &mut r);
        outcomes.push(check_scalar_graph("conv3d", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let y = tape.conv3d(s, xn, w, Some(b), &spec)?;
            tape.reduce_mean(y, &[0, 1, 2, 3])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let spec = ConvSpec {
            in_channels: 2,
            out_channels: 2,
            kernel: vec![3, 2, 2, 2],
            stride: vec![1, 1, 2, 1],
            padding: vec![1, 0, 1, 0],
        };
        let w = store.add("w", rand_tensor(&spec.weight_shape(), &mut r));
        let b = store.add("b", rand_tensor(&[2], &mut r));
        let x = rand_tensor(&[3, 2, 3, 4, 3], &mut r);
        outcomes.push(check_scalar_graph("conv4d", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let y = tape.conv4d(s, xn, w, Some(b), &spec)?;
            tape.reduce_mean(y, &[0, 1, 2, 3, 4])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let spec = ConvSpec::same(1, 2, &[3, 3, 3]);
        let w = store.add("w", rand_tensor(&spec.weight_shape(), &mut r));
        let b = store.add("b", rand_tensor(&[2], &mut r));
        let x = rand_tensor(&[1, 4, 4, 6], &mut r);
        outcomes.push(check_scalar_graph("avg-pool3d", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let y = tape.conv3d(s, xn, w, Some(b), &spec)?;
            let p = tape.avg_pool(y, &[1, 2, 2, 3])?;
            tape.reduce_mean(p, &[0, 1, 2, 3])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let spec = ConvSpec::same(1, 2, &[3, 3, 3, 3]);
        let w = store.add("w", rand_tensor(&spec.weight_shape(), &mut r));
        let b = store.add("b", rand_tensor(&[2], &mut r));
        let x = rand_tensor(&[3, 1, 4, 4, 4], &mut r);
        outcomes.push(check_scalar_graph("avg-pool4d", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let y = tape.conv4d(s, xn, w, Some(b), &spec)?;
            let p = tape.avg_pool(y, &[1, 1, 2, 2, 2])?;
            tape.reduce_mean(p, &[0, 1, 2, 3, 4])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let w = store.add("w", rand_tensor(&[5, 7], &mut r));
        let b = store.add("b", rand_tensor(&[5], &mut r));
        let x = rand_tensor(&[7], &mut r);
        outcomes.push(check_scalar_graph("dense", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let y = tape.dense(s, xn, w, b)?;
            tape.reduce_mean(y, &[0])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let spec = ConvSpec::same(2, 2, &[3, 3, 3]);
        let w = store.add("w", rand_tensor(&spec.weight_shape(), &mut r));
        let b = store.add("b", rand_tensor(&[2], &mut r));
        let x = rand_tensor(&[2, 4, 4, 4], &mut r);
        outcomes.push(check_scalar_graph("relu-chain", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let a = tape.activation(xn, Activation::Relu)?;
            let y = tape.conv3d(s, a, w, Some(b), &spec)?;
            let a2 = tape.activation(y, Activation::Relu)?;
            tape.reduce_mean(a2, &[0, 1, 2, 3])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let spec_a = ConvSpec::same(1, 2, &[3, 3, 3]);
        let spec_b = ConvSpec::same(1, 3, &[3, 3, 3]);
        let wa = store.add("wa", rand_tensor(&spec_a.weight_shape(), &mut r));
        let ba = store.add("ba", rand_tensor(&[2], &mut r));
        let wb = store.add("wb", rand_tensor(&spec_b.weight_shape(), &mut r));
        let bb = store.add("bb", rand_tensor(&[3], &mut r));
        let x = rand_tensor(&[1, 3, 3, 3], &mut r);
        outcomes.push(check_scalar_graph("concat", &mut store, |s, tape| {
            let xn = tape.leaf(x.clone());
            let ya = tape.conv3d(s, xn, wa, Some(ba), &spec_a)?;
            let yb = tape.conv3d(s, xn, wb, Some(bb), &spec_b)?;
            let cat = tape.concat(&[ya, yb], 0)?;
            tape.reduce_mean(cat, &[0, 1, 2, 3])
        })?);
    }

    {
        let mut store = ParamStore::new();
        let params = GruParams::init(&mut store, "gru", 1, 2, [3, 3, 3], &mut r);
        // the recurrent weights initialize to zero; randomize everything so
        // the check exercises real gradient paths
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.value(id).shape().to_vec();
            let fresh = rand_tensor(&shape, &mut r);
            store.value_mut(id).data_mut().copy_from_slice(fresh.data());
        }
        let x0 = rand_tensor(&[1, 3, 3, 3], &mut r);
        let x1 = rand_tensor(&[1, 3, 3, 3], &mut r);
        let h0 = rand_tensor(&[2, 3, 3, 3], &mut r);
        outcomes.push(check_scalar_graph("gru-step", &mut store, |s, tape| {
            let mut h = tape.leaf(h0.clone());
            for x in [&x0, &x1] {
                let xn = tape.leaf(x.clone());
                h = conv_gru_tape_step(tape, s, xn, h, &params)?;
            }
            tape.reduce_mean(h, &[0, 1, 2, 3])
        })?);
    }

    Ok(outcomes)
}

/// Finite-difference check of a whole model against the regression loss,
/// perturbing every parameter scalar.
pub fn model_gradcheck(arch: ArchId, config: &ModelConfig, seed: u64) -> Result<SuiteOutcome> {
    let mut model = build_model(arch, config, seed)?;
    let mut r = rng::stream(seed, Domain::GradCheck, 1 + arch as u64);
    let t = config.sequence_length;
    let s = config.volume_size;
    let input = rand_tensor(&[t, 1, s, s, s], &mut r);
    let target = MotionLabels::from_flat(&std::array::from_fn::<f64, 9, _>(|_| {
        r.random_range(-1.0..1.0)
    }))?;

    let loss_of = |model: &crate::zoo::Model| -> Result<f64> {
        let pred = model.forward(&input)?;
        Ok(mse_loss(&pred, &target).0)
    };

    let mut tape = Tape::new();
    let out = model.forward_tape(&mut tape, &input)?;
    let pred = MotionPrediction::from_flat(tape.value(out).data())?;
    let (_, grad) = mse_loss(&pred, &target);
    let grad_seed = Tensor::from_vec(&[9], grad.to_vec())?;
    model.store.zero_grad();
    tape.backward(&mut model.store, out, &grad_seed)?;
    let analytic: Vec<Tensor> = model
        .store
        .ids()
        .map(|id| model.store.grad(id).clone())
        .collect();

    let h = GRADCHECK_STEP;
    let mut worst = 0.0f64;
    let ids: Vec<_> = model.store.ids().collect();
    for (idx, &id) in ids.iter().enumerate() {
        for slot in 0..model.store.value(id).len() {
            let orig = model.store.value(id).data()[slot];
            model.store.value_mut(id).data_mut()[slot] = orig + h;
            let up = loss_of(&model)?;
            model.store.value_mut(id).data_mut()[slot] = orig - h;
            let down = loss_of(&model)?;
            model.store.value_mut(id).data_mut()[slot] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic[idx].data()[slot], numeric));
        }
    }
    Ok(SuiteOutcome::new(arch.name(), worst))
}

/// Every architecture at the smallest configuration.
pub fn model_gradchecks(seed: u64) -> Result<Vec<SuiteOutcome>> {
    let config = ModelConfig::tiny();
    ArchId::ALL
        .iter()
        .map(|&arch| model_gradcheck(arch, &config, seed))
        .collect()
}

/// Layer checks followed by whole-model checks.
pub fn full_gradcheck_suite(seed: u64) -> Result<Vec<SuiteOutcome>> {
    let mut outcomes = layer_gradchecks(seed)?;
    outcomes.extend(model_gradchecks(seed)?);
    Ok(outcomes)
}
