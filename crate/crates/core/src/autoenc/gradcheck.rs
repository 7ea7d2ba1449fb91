use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{loss_and_gradient, AeModel, Workspace};

/// Denominator floor of the relative error, so that coordinates whose true
/// gradient vanishes are judged on absolute error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    pub h: f64,
    pub coords_per_layer: usize,
    pub biases_only: bool,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            coords_per_layer: 200,
            biases_only: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub layer_type: String,
    pub checked: usize,
    /// Sampled coordinates whose +-h probe flipped a ReLU on or off.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub layers: Vec<LayerCheck>,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn gradient_check(model: &AeModel, window: &[f64], tolerance: f64) -> GradCheckReport {
    gradient_check_with(model, window, tolerance, &GradCheckOptions::default())
}

/// Compares backprop against central differences on a sampled subset of
/// every layer's parameters.
///
/// Coordinates whose probes cross a ReLU kink are skipped and counted, as
/// the one-sided slopes there legitimately disagree with the derivative.
pub fn gradient_check_with(
    model: &AeModel,
    window: &[f64],
    tolerance: f64,
    opts: &GradCheckOptions,
) -> GradCheckReport {
    let Ok((_, grad)) = loss_and_gradient(model, window) else {
        return GradCheckReport {
            tolerance,
            checked: 0,
            max_rel_error: f64::INFINITY,
            max_abs_error: f64::INFINITY,
            layers: Vec::new(),
            passed: false,
        };
    };
    let mut probe = model.clone();
    let mut ws = Workspace::new(&model.arch);
    ws.input_mut().copy_from_slice(window);
    ws.forward(&model.params, &model.arch);
    let base_pattern = ws.relu_pattern(&model.arch);
    let mut eval = |params: &[f64]| {
        let loss = ws.forward(params, &model.arch);
        (loss, ws.relu_pattern(&model.arch) == base_pattern)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut layers = Vec::new();
    for (k, l) in model.arch.layers.iter().enumerate() {
        let mut coords: Vec<usize> = l.bias.range().collect();
        if !opts.biases_only && l.tied_to.is_none() {
            coords.extend(l.weights.range());
        }
        let take = opts.coords_per_layer.min(coords.len());
        let picked: Vec<usize> = sample(&mut rng, coords.len(), take).into_iter().map(|i| coords[i]).collect();
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        let mut skipped = 0;
        for &p in &picked {
            let orig = probe.params[p];
            probe.params[p] = orig + opts.h;
            let (up, same_up) = eval(&probe.params);
            probe.params[p] = orig - opts.h;
            let (down, same_down) = eval(&probe.params);
            probe.params[p] = orig;
            if !(same_up && same_down) {
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * opts.h);
            let abs = (grad[p] - numeric).abs();
            let rel = relative_error(grad[p], numeric);
            max_rel = max_rel.max(if rel.is_nan() { f64::INFINITY } else { rel });
            max_abs = max_abs.max(if abs.is_nan() { f64::INFINITY } else { abs });
        }
        layers.push(LayerCheck {
            layer: k,
            layer_type: l.type_name().to_string(),
            checked: picked.len() - skipped,
            skipped_kinks: skipped,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    let max_rel_error = layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max);
    let max_abs_error = layers.iter().map(|l| l.max_abs_error).fold(0.0, f64::max);
    GradCheckReport {
        tolerance,
        checked: layers.iter().map(|l| l.checked).sum(),
        max_rel_error,
        max_abs_error,
        layers,
        passed: max_rel_error < tolerance,
    }
}
