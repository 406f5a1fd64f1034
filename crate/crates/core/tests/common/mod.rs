//! Central-difference gradient oracle shared by the test targets.
#![allow(dead_code)]

use hakws_core::grad::{zero_grad, Mode, Module, Tensor};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Central differences at `h` and `h/2` further apart than this fraction of
/// their magnitude mean the probe straddles a ReLU kink, where a difference
/// quotient is not a derivative. On smooth stretches they agree to `O(h^2)`.
const KINK_DISAGREEMENT: f64 = 1e-6;

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `sum(weights * model(x))` in train mode.
fn projected(model: &mut dyn Module<f64>, x: &Tensor<f64>, weights: &Tensor<f64>) -> f64 {
    let y = model.forward(x, Mode::Train).unwrap();
    y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug)]
pub struct GradCheck {
    /// Worst relative error over the input and every learnable tensor.
    pub worst: f64,
    pub worst_tensor: String,
    pub checked: usize,
    /// Probes discarded because they straddle a kink.
    pub skipped: usize,
}

/// Plain central difference of a smooth `f` at step [`FD_STEP`].
pub fn central_difference(f: impl Fn(f64) -> f64) -> f64 {
    (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP)
}

/// Central difference of `f` at step [`FD_STEP`]; `None` across a kink.
fn central(mut f: impl FnMut(f64) -> f64) -> Option<f64> {
    let full = (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP);
    let half = (f(FD_STEP / 2.0) - f(-FD_STEP / 2.0)) / FD_STEP;
    let scale = full.abs().max(half.abs()).max(1e-6);
    ((full - half).abs() <= KINK_DISAGREEMENT * scale).then_some(full)
}

/// Compares the analytic input and parameter gradients of a random linear
/// projection of `model(x)` with central differences.
///
/// `max_coords` caps the number of coordinates probed per tensor; `None`
/// probes all of them.
pub fn check_gradients(
    model: &mut dyn Module<f64>,
    x: &Tensor<f64>,
    seed: u64,
    max_coords: Option<usize>,
) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = model.forward(x, Mode::Train).unwrap();
    let weights = random_tensor(y.shape(), &mut rng);
    zero_grad(model);
    let dx = model.backward(&weights).unwrap();

    let pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        match max_coords {
            Some(m) if m < n => sample(rng, n, m).into_vec(),
            _ => (0..n).collect(),
        }
    };

    let mut report = GradCheck {
        worst: 0.0,
        worst_tensor: String::new(),
        checked: 0,
        skipped: 0,
    };
    let record = |name: &str, analytic: Vec<f64>, numeric: Vec<Option<f64>>, r: &mut GradCheck| {
        let probes = analytic.len();
        let (analytic, numeric): (Vec<f64>, Vec<f64>) = analytic
            .into_iter()
            .zip(numeric)
            .filter_map(|(a, n)| n.map(|n| (a, n)))
            .unzip();
        r.checked += analytic.len();
        r.skipped += probes - analytic.len();
        let e = rel_error(&analytic, &numeric);
        if e > r.worst || r.worst_tensor.is_empty() {
            r.worst = r.worst.max(e);
            r.worst_tensor = name.to_string();
        }
    };

    let coords = pick(x.len(), &mut rng);
    let mut probe = x.clone();
    let mut numeric = Vec::with_capacity(coords.len());
    for &i in &coords {
        let orig = probe.data()[i];
        numeric.push(central(|d| {
            probe.data_mut()[i] = orig + d;
            projected(model, &probe, &weights)
        }));
        probe.data_mut()[i] = orig;
    }
    let analytic: Vec<f64> = coords.iter().map(|&i| dx.data()[i]).collect();
    record("input", analytic, numeric, &mut report);

    let mut names = Vec::new();
    let mut grads = Vec::new();
    model.visit(&mut |p| {
        if p.learnable {
            names.push(p.name.clone());
            grads.push(p.grad.data().to_vec());
        }
    });
    for (t, (name, grad)) in names.iter().zip(grads).enumerate() {
        let coords = pick(grad.len(), &mut rng);
        let mut numeric = Vec::with_capacity(coords.len());
        for &i in &coords {
            let set = |value: Option<f64>, model: &mut dyn Module<f64>| -> f64 {
                let (mut k, mut prev) = (0, 0.0);
                model.visit_mut(&mut |p| {
                    if p.learnable {
                        if k == t {
                            prev = p.value.data()[i];
                            if let Some(v) = value {
                                p.value.data_mut()[i] = v;
                            }
                        }
                        k += 1;
                    }
                });
                prev
            };
            let orig = set(None, model);
            numeric.push(central(|d| {
                set(Some(orig + d), model);
                projected(model, x, &weights)
            }));
            set(Some(orig), model);
        }
        let analytic = coords.iter().map(|&i| grad[i]).collect();
        record(name, analytic, numeric, &mut report);
    }
    // Leave no dangling activation cache from the probes.
    let _ = model.backward(&weights);
    report
}
