//! Minimal feed-forward function-approximation kernel: forward pass,
//! exact reverse-mode gradients, an adaptive-moment optimizer, and
//! bit-exact binary checkpoints. Both the policy and value networks are
//! built from this module; nothing here knows about the simulator.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint: {0}")]
    Format(String),
    #[error("input width {found} does not match architecture input {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("upstream width {found} does not match architecture output {expected}")]
    UpstreamWidth { expected: usize, found: usize },
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
}

/// Hidden-layer nonlinearity tag, stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
        }
    }

    fn from_code(code: u8) -> Result<Self, NnError> {
        match code {
            0 => Ok(Activation::Tanh),
            other => Err(NnError::Format(format!("unknown activation tag {other}"))),
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value `a = f(z)`.
    fn derivative_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Layer widths: input, zero or more hidden layers, output; hidden layers
/// use the tagged activation, the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        assert!(input > 0 && output > 0, "widths must be positive");
        assert!(hidden.iter().all(|&h| h > 0), "widths must be positive");
        Architecture {
            input,
            hidden: hidden.to_vec(),
            output,
            activation: Activation::Tanh,
        }
    }

    /// (fan-in, fan-out) of each affine layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let widths: Vec<usize> = std::iter::once(self.input)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.output))
            .collect();
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|(fan_in, fan_out)| fan_out * (fan_in + 1))
            .sum()
    }
}

/// One affine layer: `fan_out x fan_in` row-major weights plus biases.
/// Also reused as the per-layer shape for gradients and moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.fan_out {
            let row = &self.weights[r * self.fan_in..(r + 1) * self.fan_in];
            let mut acc = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Parameter-shaped gradient (or moment) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    pub layers: Vec<Layer>,
}

impl NetworkGradients {
    pub fn zeros_like(params: &NetworkParameters) -> Self {
        NetworkGradients {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &NetworkGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.weights {
                *w *= factor;
            }
            for b in &mut layer.biases {
                *b *= factor;
            }
        }
    }
}

/// All weights and biases of one network, with its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    arch: Architecture,
    pub layers: Vec<Layer>,
}

/// Cached activations from one forward pass, consumed by `backward`.
pub struct ForwardTrace {
    /// `activations[0]` is the input; `activations[L]` is the output.
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least input")
    }
}

impl NetworkParameters {
    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| Layer::zeros(fan_in, fan_out))
            .collect();
        NetworkParameters { arch, layers }
    }

    /// Orthogonal-style initialization: each weight matrix gets orthonormal
    /// rows or columns (whichever dimension is smaller) scaled by `gain`,
    /// except the final layer which uses `final_gain`; biases are zero.
    pub fn orthogonal_init<R: Rng>(
        arch: Architecture,
        gain: f64,
        final_gain: f64,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(arch);
        let n_layers = net.layers.len();
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let g = if l + 1 == n_layers { final_gain } else { gain };
            let w = orthogonal_matrix(layer.fan_out, layer.fan_in, rng);
            for (dst, src) in layer.weights.iter_mut().zip(w) {
                *dst = g * src;
            }
        }
        net
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_trace(input).activations.pop().unwrap()
    }

    pub fn forward_trace(&self, input: &[f64]) -> ForwardTrace {
        assert_eq!(
            input.len(),
            self.arch.input,
            "input width mismatches architecture"
        );
        let n_layers = self.layers.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        let mut z = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(activations.last().unwrap(), &mut z);
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = self.arch.activation.apply(*v);
                }
            }
            activations.push(z.clone());
        }
        ForwardTrace { activations }
    }

    /// Exact reverse-mode gradients of `output . upstream` with respect to
    /// every weight and bias, reusing the forward trace.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &[f64]) -> NetworkGradients {
        assert_eq!(
            upstream.len(),
            self.arch.output,
            "upstream width mismatches architecture"
        );
        let mut grads = NetworkGradients::zeros_like(self);
        // The output layer is linear, so dL/dz at the top is `upstream`.
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let g = &mut grads.layers[l];
            for r in 0..layer.fan_out {
                let d = delta[r];
                g.biases[r] = d;
                let row = &mut g.weights[r * layer.fan_in..(r + 1) * layer.fan_in];
                for (slot, x) in row.iter_mut().zip(input) {
                    *slot = d * x;
                }
            }
            if l > 0 {
                // Propagate through the weights, then through the previous
                // layer's activation.
                let mut prev = vec![0.0; layer.fan_in];
                for r in 0..layer.fan_out {
                    let d = delta[r];
                    let row = &layer.weights[r * layer.fan_in..(r + 1) * layer.fan_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(&trace.activations[l]) {
                    *p *= self.arch.activation.derivative_from_value(*a);
                }
                delta = prev;
            }
        }
        grads
    }

    pub fn gradients(&self, input: &[f64], upstream: &[f64]) -> NetworkGradients {
        let trace = self.forward_trace(input);
        self.backward(&trace, upstream)
    }

    /// Serializes to the checkpoint wire format (all integers and floats
    /// little-endian): magic `FWNN`, format version u32, activation tag u8,
    /// input width u32, hidden-layer count u32, hidden widths u32 each,
    /// output width u32, then per layer all weights then all biases as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.arch.n_parameters());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.push(self.arch.activation.code());
        buf.extend_from_slice(&(self.arch.input as u32).to_le_bytes());
        buf.extend_from_slice(&(self.arch.hidden.len() as u32).to_le_bytes());
        for &h in &self.arch.hidden {
            buf.extend_from_slice(&(h as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(self.arch.output as u32).to_le_bytes());
        for layer in &self.layers {
            for w in &layer.weights {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            for b in &layer.biases {
                buf.extend_from_slice(&b.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let magic = cursor.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(NnError::Format("bad magic; not a checkpoint file".into()));
        }
        let version = cursor.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Format(format!(
                "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let activation = Activation::from_code(cursor.u8()?)?;
        let input = cursor.u32()? as usize;
        let n_hidden = cursor.u32()? as usize;
        if n_hidden > 64 {
            return Err(NnError::Format(format!(
                "implausible hidden-layer count {n_hidden}"
            )));
        }
        let mut hidden = Vec::with_capacity(n_hidden);
        for _ in 0..n_hidden {
            hidden.push(cursor.u32()? as usize);
        }
        let output = cursor.u32()? as usize;
        if input == 0 || output == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(NnError::Format("zero layer width".into()));
        }
        let arch = Architecture {
            input,
            hidden,
            output,
            activation,
        };
        let mut net = Self::zeros(arch);
        for layer in &mut net.layers {
            for w in &mut layer.weights {
                *w = cursor.f64()?;
            }
            for b in &mut layer.biases {
                *b = cursor.f64()?;
            }
        }
        if cursor.pos != bytes.len() {
            return Err(NnError::Format(format!(
                "{} trailing bytes after parameters",
                bytes.len() - cursor.pos
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FWNN";
const CHECKPOINT_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::Format("truncated checkpoint".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Random `rows x cols` matrix (row-major) whose smaller dimension is
/// orthonormal, built by modified Gram-Schmidt on standard-normal draws.
fn orthogonal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (big, small) = (rows.max(cols), rows.min(cols));
    // `basis` holds `small` vectors of length `big`, orthonormalized.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(small);
    for _ in 0..small {
        let mut v: Vec<f64> = (0..big).map(|_| rng.sample(StandardNormal)).collect();
        loop {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            // A draw (numerically) inside the span of the basis is
            // astronomically unlikely; redraw rather than divide by ~0.
            if norm > 1e-8 {
                for x in &mut v {
                    *x /= norm;
                }
                break;
            }
            v = (0..big).map(|_| rng.sample(StandardNormal)).collect();
        }
        basis.push(v);
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            // basis vectors run along the larger dimension.
            w[r * cols + c] = if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    w
}

/// Adaptive-moment gradient descent (bias-corrected first and second
/// moments) for one network's parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    first_moment: Vec<Layer>,
    second_moment: Vec<Layer>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(params: &NetworkParameters, learning_rate: f64) -> Self {
        let shape = || {
            params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect::<Vec<_>>()
        };
        OptimizerState {
            first_moment: shape(),
            second_moment: shape(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step along `grads`; mutates `params` in place.
    pub fn apply(
        &mut self,
        params: &mut NetworkParameters,
        grads: &NetworkGradients,
    ) -> Result<(), NnError> {
        for (l, layer) in grads.layers.iter().enumerate() {
            let finite = layer.weights.iter().chain(&layer.biases).all(|g| g.is_finite());
            if !finite {
                return Err(NnError::NonFiniteGradient { layer: l });
            }
        }
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for l in 0..params.layers.len() {
            let g = &grads.layers[l];
            let m = &mut self.first_moment[l];
            let v = &mut self.second_moment[l];
            let p = &mut params.layers[l];
            let update = |pv: &mut f64, mv: &mut f64, vv: &mut f64, gv: f64| {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let m_hat = *mv / bias1;
                let v_hat = *vv / bias2;
                *pv -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            };
            for i in 0..p.weights.len() {
                update(&mut p.weights[i], &mut m.weights[i], &mut v.weights[i], g.weights[i]);
            }
            for i in 0..p.biases.len() {
                update(&mut p.biases[i], &mut m.biases[i], &mut v.biases[i], g.biases[i]);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(arch: Architecture, seed: u64) -> NetworkParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkParameters::orthogonal_init(arch, 2.0_f64.sqrt(), 1.0, &mut rng)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = NetworkParameters::zeros(Architecture::new(15, &[64, 64], 9));
        let out = net.forward(&vec![0.3; 15]);
        assert_eq!(out, vec![0.0; 9]);
    }

    #[test]
    fn single_affine_layer_is_wx_plus_b() {
        let mut net = NetworkParameters::zeros(Architecture::new(1, &[], 1));
        net.layers[0].weights[0] = 2.5;
        net.layers[0].biases[0] = -0.75;
        let out = net.forward(&[3.0]);
        assert_eq!(out, vec![2.5 * 3.0 - 0.75]);
    }

    #[test]
    fn forward_outputs_stay_finite_on_random_inputs() {
        let net = random_net(Architecture::new(15, &[64, 64], 9), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let input: Vec<f64> = (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let out = net.forward(&input);
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    /// Central finite differences over every parameter.
    fn finite_difference_check(net: &NetworkParameters, input: &[f64], upstream: &[f64]) {
        let h = 1e-5;
        let loss = |p: &NetworkParameters| -> f64 {
            p.forward(input)
                .iter()
                .zip(upstream)
                .map(|(o, u)| o * u)
                .sum()
        };
        let grads = net.gradients(input, upstream);
        for l in 0..net.layers.len() {
            for (kind, count) in [("w", net.layers[l].weights.len()), ("b", net.layers[l].biases.len())] {
                for i in 0..count {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    let (slot_p, slot_m, analytic) = if kind == "w" {
                        (
                            &mut plus.layers[l].weights[i],
                            &mut minus.layers[l].weights[i],
                            grads.layers[l].weights[i],
                        )
                    } else {
                        (
                            &mut plus.layers[l].biases[i],
                            &mut minus.layers[l].biases[i],
                            grads.layers[l].biases[i],
                        )
                    };
                    *slot_p += h;
                    *slot_m -= h;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    if analytic.abs() > 1e-6 {
                        let rel = (numeric - analytic).abs() / analytic.abs();
                        assert!(
                            rel <= 1e-4,
                            "layer {l} {kind}[{i}]: analytic {analytic}, numeric {numeric}"
                        );
                    } else {
                        assert!((numeric - analytic).abs() <= 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_small_net() {
        let net = random_net(Architecture::new(3, &[4], 2), 7);
        let input = [0.4, -0.2, 0.9];
        let upstream = [1.0, -0.5];
        finite_difference_check(&net, &input, &upstream);
    }

    #[test]
    fn gradients_match_finite_differences_deep_net() {
        let net = random_net(Architecture::new(5, &[8, 6], 3), 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let input: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        finite_difference_check(&net, &input, &upstream);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = random_net(Architecture::new(4, &[5], 2), 9);
        let grads = net.gradients(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0]);
        for layer in &grads.layers {
            assert!(layer.weights.iter().all(|&g| g == 0.0));
            assert!(layer.biases.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn linear_net_hand_derivative() {
        let mut net = NetworkParameters::zeros(Architecture::new(1, &[], 1));
        net.layers[0].weights[0] = 1.7;
        let x = 4.25;
        let grads = net.gradients(&[x], &[1.0]);
        assert_eq!(grads.layers[0].weights[0], x);
        assert_eq!(grads.layers[0].biases[0], 1.0);
    }

    #[test]
    fn optimizer_fixed_points() {
        let arch = Architecture::new(3, &[4], 2);
        let net0 = random_net(arch.clone(), 21);

        // Zero gradients leave parameters unchanged.
        let mut net = net0.clone();
        let mut opt = OptimizerState::new(&net, 3e-4);
        let zeros = NetworkGradients::zeros_like(&net);
        opt.apply(&mut net, &zeros).unwrap();
        assert_eq!(net, net0);

        // Zero learning rate leaves parameters unchanged for any gradient.
        let mut net = net0.clone();
        let mut opt = OptimizerState::new(&net, 0.0);
        let mut grads = NetworkGradients::zeros_like(&net);
        grads.layers[0].weights[0] = 5.0;
        opt.apply(&mut net, &grads).unwrap();
        assert_eq!(net, net0);
    }

    #[test]
    fn optimizer_three_step_recursion_matches_hand_computation() {
        let mut net = NetworkParameters::zeros(Architecture::new(1, &[], 1));
        net.layers[0].weights[0] = 0.5;
        let lr = 0.1;
        let mut opt = OptimizerState::new(&net, lr);

        let gradient_sequence = [0.3, -0.2, 0.7];
        // Hand recursion on the scalar weight.
        let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
        let (mut m, mut v, mut theta) = (0.0_f64, 0.0_f64, 0.5_f64);
        for (t, &g) in gradient_sequence.iter().enumerate() {
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let m_hat = m / (1.0 - beta1.powi(t as i32 + 1));
            let v_hat = v / (1.0 - beta2.powi(t as i32 + 1));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);

            let mut grads = NetworkGradients::zeros_like(&net);
            grads.layers[0].weights[0] = g;
            opt.apply(&mut net, &grads).unwrap();
            assert!(
                (net.layers[0].weights[0] - theta).abs() < 1e-12,
                "step {t}: {} vs {theta}",
                net.layers[0].weights[0]
            );
        }
    }

    #[test]
    fn optimizer_rejects_non_finite_gradients() {
        let mut net = random_net(Architecture::new(2, &[3], 1), 2);
        let mut opt = OptimizerState::new(&net, 1e-3);
        let mut grads = NetworkGradients::zeros_like(&net);
        grads.layers[1].biases[0] = f64::NAN;
        let err = opt.apply(&mut net, &grads).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { layer: 1 }));
    }

    #[test]
    fn orthogonal_init_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gain = 2.0_f64.sqrt();
        let net = NetworkParameters::orthogonal_init(
            Architecture::new(15, &[64, 64], 9),
            gain,
            0.01,
            &mut rng,
        );
        // Biases all zero.
        for layer in &net.layers {
            assert!(layer.biases.iter().all(|&b| b == 0.0));
        }
        // First layer is 64x15: columns should be orthonormal times gain.
        let l0 = &net.layers[0];
        for c1 in 0..l0.fan_in {
            for c2 in 0..l0.fan_in {
                let dot: f64 = (0..l0.fan_out)
                    .map(|r| l0.weights[r * l0.fan_in + c1] * l0.weights[r * l0.fan_in + c2])
                    .sum();
                let expected = if c1 == c2 { gain * gain } else { 0.0 };
                assert!(
                    (dot - expected).abs() < 1e-9,
                    "columns {c1},{c2}: dot {dot}"
                );
            }
        }
        // Final layer (9x64) rows orthonormal times 0.01.
        let lf = net.layers.last().unwrap();
        for r in 0..lf.fan_out {
            let norm: f64 = lf.weights[r * lf.fan_in..(r + 1) * lf.fan_in]
                .iter()
                .map(|w| w * w)
                .sum();
            assert!((norm.sqrt() - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let arch = Architecture::new(15, &[64, 64], 9);
        let a = random_net(arch.clone(), 99);
        let b = random_net(arch.clone(), 99);
        let c = random_net(arch, 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = random_net(Architecture::new(15, &[64, 64], 9), 31);
        let bytes = net.to_bytes();
        let restored = NetworkParameters::from_bytes(&bytes).unwrap();
        assert_eq!(restored.architecture(), net.architecture());
        for (a, b) in net.layers.iter().zip(&restored.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.biases.iter().zip(&b.biases) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.fwnn");
        net.save(&path).unwrap();
        let loaded = NetworkParameters::load(&path).unwrap();
        assert_eq!(loaded, net);
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let net = random_net(Architecture::new(3, &[4], 2), 8);
        let bytes = net.to_bytes();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(NetworkParameters::from_bytes(&bad_magic).is_err());

        let mut bad_version = bytes.clone();
        bad_version[4] = 99;
        assert!(NetworkParameters::from_bytes(&bad_version).is_err());

        let truncated = &bytes[..bytes.len() - 3];
        assert!(NetworkParameters::from_bytes(truncated).is_err());

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(NetworkParameters::from_bytes(&trailing).is_err());
    }
}
