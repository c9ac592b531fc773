//! The corrector network: a stack of LSTM layers and a dense head mapping
//! the final hidden state to the h forecast-correction outputs, with exact
//! analytic backpropagation through time.
//!
//! Gate blocks are ordered (input, forget, cell candidate, output) inside
//! each layer's weight matrices.

use super::{loss_eval, loss_grad_wrt_pred, CorrectorInput, LossKind};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Layer count and hidden width of the corrector stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: usize,
    pub hidden: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        // 3 recurrent layers of width 50.
        NetworkSpec {
            layers: 3,
            hidden: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// Input weights, 4H x in_dim row-major.
    pub w: Vec<f64>,
    /// Recurrent weights, 4H x H row-major.
    pub u: Vec<f64>,
    /// Gate biases, 4H.
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub hidden: usize,
}

/// All corrector parameters: the LSTM stack plus the dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    /// Dense head, output x H row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub input_dim: usize,
    pub hidden: usize,
    pub output: usize,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    /// Uniform(-s, s) init with s = 1/sqrt(fan-in) per weight block;
    /// biases start at zero.
    pub fn init(
        spec: &NetworkSpec,
        input_dim: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let hidden = spec.hidden;
        let mut layers = Vec::with_capacity(spec.layers);
        for l in 0..spec.layers {
            let in_dim = if l == 0 { input_dim } else { hidden };
            let sw = 1.0 / (in_dim as f64).sqrt();
            let su = 1.0 / (hidden as f64).sqrt();
            layers.push(LstmLayer {
                w: (0..4 * hidden * in_dim).map(|_| rng.gen_range(-sw..sw)).collect(),
                u: (0..4 * hidden * hidden).map(|_| rng.gen_range(-su..su)).collect(),
                b: vec![0.0; 4 * hidden],
                in_dim,
                hidden,
            });
        }
        let sd = 1.0 / (hidden as f64).sqrt();
        LstmParams {
            layers,
            dense_w: (0..output * hidden).map(|_| rng.gen_range(-sd..sd)).collect(),
            dense_b: vec![0.0; output],
            input_dim,
            hidden,
            output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub(crate) fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.w);
            out.push(&l.u);
            out.push(&l.b);
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.u);
            out.push(&mut l.b);
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "flat vector has {} values, parameters need {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Elementwise accumulate: `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        let others = other.tensors();
        for (mine, theirs) in self.tensors_mut().into_iter().zip(others) {
            for (a, b) in mine.iter_mut().zip(theirs.iter()) {
                *a += scale * b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Write as a flat little-endian f64 tensor file plus a JSON shape
    /// manifest next to it.
    pub fn save(&self, bin_path: impl AsRef<Path>, manifest_path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.num_params() * 8);
        for t in self.tensors() {
            for v in t {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(bin_path, bytes)?;
        let manifest = serde_json::json!({
            "layers": self.layers.len(),
            "hidden": self.hidden,
            "input_dim": self.input_dim,
            "output": self.output,
            "num_params": self.num_params(),
        });
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(bin_path: impl AsRef<Path>, manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let get = |key: &str| -> Result<usize> {
            manifest[key]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::load(format!("manifest missing '{key}'")))
        };
        let spec = NetworkSpec {
            layers: get("layers")?,
            hidden: get("hidden")?,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut params = LstmParams::init(&spec, get("input_dim")?, get("output")?, &mut rng);
        let bytes = std::fs::read(bin_path)?;
        if bytes.len() != params.num_params() * 8 {
            return Err(Error::load(format!(
                "tensor file has {} bytes, manifest implies {}",
                bytes.len(),
                params.num_params() * 8
            )));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.set_flat(&flat)?;
        Ok(params)
    }
}

use rand::SeedableRng;

struct StepCache {
    gates: Vec<f64>,  // 4H: i, f, g, o (post-activation)
    c: Vec<f64>,      // H
    tanh_c: Vec<f64>, // H
    h: Vec<f64>,      // H
}

struct LayerCache {
    steps: Vec<StepCache>,
}

struct ForwardCache {
    // Feature vectors fed to layer 0, one per step.
    inputs: Vec<Vec<f64>>,
    layers: Vec<LayerCache>,
}

fn forward_impl(params: &LstmParams, input: &CorrectorInput) -> Result<(Vec<f64>, ForwardCache)> {
    if input.feature_width() != params.input_dim {
        return Err(Error::invalid(format!(
            "input feature width {} does not match network input dim {}",
            input.feature_width(),
            params.input_dim
        )));
    }
    let hidden = params.hidden;
    let steps = input.window_len();
    let mut inputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut feat = Vec::new();
        input.feature(t, &mut feat);
        inputs.push(feat);
    }

    let mut layers_cache = Vec::with_capacity(params.layers.len());
    let mut layer_input: Vec<Vec<f64>> = inputs.clone();
    for layer in &params.layers {
        let mut cache = LayerCache {
            steps: Vec::with_capacity(steps),
        };
        let mut h_prev = vec![0.0; hidden];
        let mut c_prev = vec![0.0; hidden];
        for (t, x) in layer_input.iter().enumerate() {
            let mut pre = layer.b.clone();
            for (row, p) in pre.iter_mut().enumerate() {
                let wrow = &layer.w[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (wv, xv) in wrow.iter().zip(x.iter()) {
                    *p += wv * xv;
                }
                let urow = &layer.u[row * hidden..(row + 1) * hidden];
                for (uv, hv) in urow.iter().zip(h_prev.iter()) {
                    *p += uv * hv;
                }
            }
            let mut gates = vec![0.0; 4 * hidden];
            for j in 0..hidden {
                gates[j] = sigmoid(pre[j]);
                gates[hidden + j] = sigmoid(pre[hidden + j]);
                gates[2 * hidden + j] = pre[2 * hidden + j].tanh();
                gates[3 * hidden + j] = sigmoid(pre[3 * hidden + j]);
            }
            let mut c = vec![0.0; hidden];
            let mut tanh_c = vec![0.0; hidden];
            let mut h = vec![0.0; hidden];
            for j in 0..hidden {
                c[j] = gates[hidden + j] * c_prev[j] + gates[j] * gates[2 * hidden + j];
                if !c[j].is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite activation at window step {t}"
                    )));
                }
                tanh_c[j] = c[j].tanh();
                h[j] = gates[3 * hidden + j] * tanh_c[j];
            }
            h_prev = h.clone();
            c_prev = c.clone();
            cache.steps.push(StepCache {
                gates,
                c,
                tanh_c,
                h,
            });
        }
        layer_input = cache.steps.iter().map(|s| s.h.clone()).collect();
        layers_cache.push(cache);
    }

    // Dense head on the final top-layer hidden state.
    let final_h = &layers_cache.last().unwrap().steps.last().unwrap().h;
    let mut out = params.dense_b.clone();
    for (row, o) in out.iter_mut().enumerate() {
        let wrow = &params.dense_w[row * hidden..(row + 1) * hidden];
        for (wv, hv) in wrow.iter().zip(final_h.iter()) {
            *o += wv * hv;
        }
        if !o.is_finite() {
            return Err(Error::Numeric("non-finite dense output".into()));
        }
    }
    Ok((
        out,
        ForwardCache {
            inputs,
            layers: layers_cache,
        },
    ))
}

/// Run the stack over all window steps and apply the dense head to the
/// final top-layer hidden state. Deterministic.
pub fn lstm_forward(params: &LstmParams, input: &CorrectorInput) -> Result<Vec<f64>> {
    forward_impl(params, input).map(|(out, _)| out)
}

/// Forward pass returning the network output and the hybrid forecast
/// `y_pred + out * window_mean`.
pub fn lstm_forward_hybrid(
    params: &LstmParams,
    input: &CorrectorInput,
    y_pred: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (out, _) = forward_impl(params, input)?;
    let hybrid = y_pred
        .iter()
        .zip(&out)
        .map(|(p, o)| p + o * input.window_mean)
        .collect();
    Ok((out, hybrid))
}

/// One training example for gradient evaluation.
#[derive(Debug, Clone)]
pub struct GradExample<'a> {
    pub input: &'a CorrectorInput,
    pub y_true: &'a [f64],
    pub y_pred: &'a [f64],
}

/// Exact analytic gradient of the batch-mean loss with respect to every
/// parameter, plus the batch-mean loss itself.
pub fn lstm_gradient(
    params: &LstmParams,
    batch: &[GradExample<'_>],
    loss: LossKind,
) -> Result<(LstmParams, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient batch must be nonempty"));
    }
    let mut grad = params.zeros_like();
    let mut total_loss = 0.0;
    for ex in batch {
        let (out, cache) = forward_impl(params, ex.input)?;
        let ybar = ex.input.window_mean;
        let hybrid: Vec<f64> = ex
            .y_pred
            .iter()
            .zip(&out)
            .map(|(p, o)| p + o * ybar)
            .collect();
        total_loss += loss_eval(loss, ex.y_true, &hybrid, ybar)?;
        let dpred = loss_grad_wrt_pred(loss, ex.y_true, &hybrid, ybar)?;
        let dout: Vec<f64> = dpred.iter().map(|d| d * ybar).collect();
        backward(params, &cache, &dout, &mut grad)?;
    }
    let scale = 1.0 / batch.len() as f64;
    grad.scale(scale);
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((grad, total_loss * scale))
}

/// Accumulate one example's parameter gradients into `grad`.
fn backward(
    params: &LstmParams,
    cache: &ForwardCache,
    dout: &[f64],
    grad: &mut LstmParams,
) -> Result<()> {
    let hidden = params.hidden;
    let steps = cache.inputs.len();
    let top = params.layers.len() - 1;

    // Dense head.
    let final_h = &cache.layers[top].steps[steps - 1].h;
    let mut dh_top_last = vec![0.0; hidden];
    for (row, d) in dout.iter().enumerate() {
        grad.dense_b[row] += d;
        for j in 0..hidden {
            grad.dense_w[row * hidden + j] += d * final_h[j];
            dh_top_last[j] += params.dense_w[row * hidden + j] * d;
        }
    }

    // dx flowing into each layer from the layer above, per step.
    let mut dx_above: Vec<Vec<f64>> = vec![vec![0.0; hidden]; steps];
    dx_above[steps - 1] = dh_top_last;

    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let lcache = &cache.layers[l];
        let glayer = &mut grad.layers[l];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dx_below: Vec<Vec<f64>> = if l > 0 {
            vec![vec![0.0; hidden]; steps]
        } else {
            Vec::new()
        };
        for t in (0..steps).rev() {
            let step = &lcache.steps[t];
            let c_prev: &[f64] = if t > 0 { &lcache.steps[t - 1].c } else { &[] };
            let h_prev: &[f64] = if t > 0 { &lcache.steps[t - 1].h } else { &[] };
            let x_t: &[f64] = if l == 0 {
                &cache.inputs[t]
            } else {
                &cache.layers[l - 1].steps[t].h
            };

            let mut da = vec![0.0; 4 * hidden];
            for j in 0..hidden {
                let dh = dx_above[t][j] + dh_next[j];
                let o = step.gates[3 * hidden + j];
                let i_g = step.gates[j];
                let f_g = step.gates[hidden + j];
                let g_g = step.gates[2 * hidden + j];
                let tc = step.tanh_c[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                let d_o = dh * tc;
                let d_i = dc * g_g;
                let d_g = dc * i_g;
                let d_f = dc * if t > 0 { c_prev[j] } else { 0.0 };
                dc_next[j] = dc * f_g;
                da[j] = d_i * i_g * (1.0 - i_g);
                da[hidden + j] = d_f * f_g * (1.0 - f_g);
                da[2 * hidden + j] = d_g * (1.0 - g_g * g_g);
                da[3 * hidden + j] = d_o * o * (1.0 - o);
            }

            let mut dh_prev = vec![0.0; hidden];
            for (row, d) in da.iter().enumerate() {
                glayer.b[row] += d;
                let wrow_g = &mut glayer.w[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (k, wv) in wrow_g.iter_mut().enumerate() {
                    *wv += d * x_t[k];
                }
                if t > 0 {
                    let urow_g = &mut glayer.u[row * hidden..(row + 1) * hidden];
                    for (k, uv) in urow_g.iter_mut().enumerate() {
                        *uv += d * h_prev[k];
                    }
                    let urow = &layer.u[row * hidden..(row + 1) * hidden];
                    for (k, uv) in urow.iter().enumerate() {
                        dh_prev[k] += uv * d;
                    }
                }
                if l > 0 {
                    let wrow = &layer.w[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for (k, wv) in wrow.iter().enumerate() {
                        dx_below[t][k] += wv * d;
                    }
                }
            }
            dh_next = dh_prev;
        }
        if l > 0 {
            dx_above = dx_below;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_input(w: usize, k: usize) -> CorrectorInput {
        CorrectorInput {
            z: (0..w).map(|t| ((t as f64) * 0.7).sin() * 0.1).collect(),
            weak: (0..k)
                .map(|c| (0..w).map(|t| 0.5 + 0.01 * ((t + c) as f64)).collect())
                .collect(),
            window_mean: 2.0,
            origin: w,
        }
    }

    #[test]
    fn zero_params_output_dense_bias() {
        let spec = NetworkSpec {
            layers: 3,
            hidden: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = LstmParams::init(&spec, 1, 3, &mut rng);
        params.scale(0.0);
        params.dense_b = vec![0.25, -0.5, 1.0];
        let out = lstm_forward(&params, &toy_input(6, 0)).unwrap();
        assert_eq!(out, vec![0.25, -0.5, 1.0]);
    }

    #[test]
    fn forward_deterministic_and_shaped() {
        let spec = NetworkSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = LstmParams::init(&spec, 2, 52, &mut rng);
        let input = toy_input(104, 1);
        let a = lstm_forward(&params, &input).unwrap();
        let b = lstm_forward(&params, &input).unwrap();
        assert_eq!(a.len(), 52);
        assert_eq!(a, b);
    }

    #[test]
    fn duplicated_example_gradient_equals_single() {
        let spec = NetworkSpec {
            layers: 2,
            hidden: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = LstmParams::init(&spec, 1, 2, &mut rng);
        let input = toy_input(6, 0);
        let y_true = [1.0, 2.0];
        let y_pred = [0.8, 2.3];
        let ex = GradExample {
            input: &input,
            y_true: &y_true,
            y_pred: &y_pred,
        };
        let (g1, l1) = lstm_gradient(&params, &[ex.clone()], LossKind::Smae).unwrap();
        let (g2, l2) = lstm_gradient(&params, &[ex.clone(), ex], LossKind::Smae).unwrap();
        assert_eq!(l1, l2);
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_zero_at_smae_minimum() {
        // Output matches the normalized residual exactly: dense-head
        // gradient vanishes (subgradient 0 at the kink).
        let spec = NetworkSpec {
            layers: 2,
            hidden: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = LstmParams::init(&spec, 1, 2, &mut rng);
        let input = toy_input(6, 0);
        let out = lstm_forward(&params, &input).unwrap();
        let y_pred = [1.0, 2.0];
        let y_true: Vec<f64> = y_pred
            .iter()
            .zip(&out)
            .map(|(p, o)| p + o * input.window_mean)
            .collect();
        let ex = GradExample {
            input: &input,
            y_true: &y_true,
            y_pred: &y_pred,
        };
        let (grad, loss) = lstm_gradient(&params, &[ex], LossKind::Smae).unwrap();
        assert_eq!(loss, 0.0);
        for v in grad.to_flat() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn flat_round_trip_and_save_load() {
        let spec = NetworkSpec {
            layers: 3,
            hidden: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = LstmParams::init(&spec, 2, 13, &mut rng);
        let flat = params.to_flat();
        let mut copy = params.zeros_like();
        copy.set_flat(&flat).unwrap();
        assert_eq!(copy, params);

        let dir = std::env::temp_dir().join(format!("hermes-lstm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        params
            .save(dir.join("p.bin"), dir.join("p.json"))
            .unwrap();
        let loaded = LstmParams::load(dir.join("p.bin"), dir.join("p.json")).unwrap();
        assert_eq!(loaded, params);
    }
}
