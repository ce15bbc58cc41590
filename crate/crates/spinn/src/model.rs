//! The structure-preserving network: periodic feature embedding, dense
//! feed-forward trunk, and the hard-constraint wrapper `ũ = ψ + φ·u_nn`.
//!
//! With the defaults `ψ = u₀(x)·e^(−t)` and `φ = t`, the constrained output
//! reproduces the initial condition exactly at `t = 0` for any parameter
//! values, and the truncated Fourier embedding makes it exactly periodic in
//! x. Training therefore needs only the PDE residual loss.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{jet_add, jet_mul, jet_tanh, Arith, Jet, Jet4, Values};
use crate::problems::PdeProblem;
use crate::tape::{Tape, Var};

/// Choice of ψ in the hard constraint. The decaying form is the default;
/// the constant form `ψ = u₀(x)` is kept as an alternative because both
/// satisfy ψ(0, x) = u₀(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// ψ(t, x) = u₀(x)·e^(−t)
    ExpDecay,
    /// ψ(t, x) = u₀(x)
    Constant,
}

/// What the network sees as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// `[t, 1, cos(2πx/P), sin(2πx/P), …, cos(2πmx/P), sin(2πmx/P)]`
    PeriodicEmbedding,
    /// Plain `[t, x]`; used by the baseline three-term formulation.
    Raw,
}

/// Truncated Fourier feature map with `m` harmonics over period `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicEmbedding {
    pub period: f64,
    pub m: usize,
}

impl PeriodicEmbedding {
    pub fn new(period: f64, m: usize) -> Result<PeriodicEmbedding> {
        if m == 0 {
            return Err(Error::Config("embedding needs m >= 1 harmonics".into()));
        }
        if !(period > 0.0) {
            return Err(Error::Config(format!(
                "embedding period must be positive, got {period}"
            )));
        }
        Ok(PeriodicEmbedding { period, m })
    }

    /// `2m + 2`: the t feature, the constant 1, and a cos/sin pair per
    /// harmonic. The constant feature is redundant with biases but kept to
    /// match the cited construction verbatim.
    pub fn output_dim(&self) -> usize {
        2 * self.m + 2
    }

    /// Feature jets at `(t, x)` with exact analytic derivatives: the t
    /// feature carries `u_t = 1`, trigonometric features carry x-derivatives
    /// through order four.
    pub fn features(&self, t: f64, x: f64) -> Vec<Jet4> {
        let cx = &mut Values;
        let mut out = Vec::with_capacity(self.output_dim());
        out.push(Jet::time(cx, t));
        out.push(Jet::constant(cx, 1.0));
        let xj = Jet::space(cx, x);
        let omega = 2.0 * std::f64::consts::PI / self.period;
        for k in 1..=self.m {
            let arg = crate::jet::jet_scale(cx, xj, k as f64 * omega);
            out.push(crate::jet::jet_cos(cx, arg));
            out.push(crate::jet::jet_sin(cx, arg));
        }
        out
    }
}

/// Dense feed-forward network: tanh hidden layers, identity output layer.
/// Parameters are stored flat per layer as row-major weights followed by
/// biases, so the serialized order is unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Σ (fan_in + 1)·fan_out over consecutive layer pairs.
pub fn param_count_for(widths: &[usize]) -> usize {
    widths
        .windows(2)
        .map(|w| (w[0] + 1) * w[1])
        .sum()
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    // 53 explicit mantissa bits; identical across platforms.
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl DenseNet {
    fn check_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "invalid layer widths {widths:?}: need >= 2 layers, all positive"
            )));
        }
        Ok(())
    }

    /// All parameters zero.
    pub fn zeros(widths: Vec<usize>) -> Result<DenseNet> {
        Self::check_widths(&widths)?;
        let params = vec![0.0; param_count_for(&widths)];
        Ok(DenseNet { widths, params })
    }

    /// Glorot-uniform weights, bound √(6/(fan_in + fan_out)); zero biases.
    /// Draws consume the RNG in layer order, so results are reproducible for
    /// a fixed seed stream.
    pub fn glorot(widths: Vec<usize>, rng: &mut ChaCha8Rng) -> Result<DenseNet> {
        Self::check_widths(&widths)?;
        let mut params = Vec::with_capacity(param_count_for(&widths));
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push((2.0 * uniform01(rng) - 1.0) * bound);
            }
            for _ in 0..fan_out {
                params.push(0.0);
            }
        }
        Ok(DenseNet { widths, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Forward pass over jets with explicit parameter scalars, so the same
    /// code serves plain evaluation (`params = self.params()`) and taped
    /// evaluation (`params` = tape variables).
    pub fn forward_with<A: Arith>(
        &self,
        cx: &mut A,
        params: &[A::S],
        features: &[Jet<A::S>],
    ) -> Result<Vec<Jet<A::S>>> {
        if features.len() != self.widths[0] {
            return Err(Error::Config(format!(
                "network expects {} input features, got {}",
                self.widths[0],
                features.len()
            )));
        }
        if params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "network has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }

        let n_layers = self.widths.len() - 1;
        let mut h: Vec<Jet<A::S>> = features.to_vec();
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let biases = &params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let mut z = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let mut acc = crate::jet::jet_smul(cx, weights[j * fan_in], h[0]);
                for i in 1..fan_in {
                    let term = crate::jet::jet_smul(cx, weights[j * fan_in + i], h[i]);
                    acc = jet_add(cx, acc, term);
                }
                // Bias is constant in t and x: only the value slot moves.
                acc.u = cx.add(acc.u, biases[j]);
                z.push(if l + 1 == n_layers {
                    acc
                } else {
                    jet_tanh(cx, acc)
                });
            }
            h = z;
            offset += (fan_in + 1) * fan_out;
        }
        Ok(h)
    }

    /// Plain evaluation with the stored parameters.
    pub fn forward(&self, features: &[Jet4]) -> Result<Vec<Jet4>> {
        self.forward_with(&mut Values, &self.params, features)
    }
}

/// Model hyperparameters; see [`SpModel::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_layers: usize,
    pub width: usize,
    /// Fourier harmonics; `None` uses the problem's default.
    pub m: Option<usize>,
    pub psi_mode: PsiMode,
    pub input_mode: InputMode,
    /// Apply the hard-constraint wrapper. Disabled for the baseline
    /// formulation, which must fit the initial condition through its loss.
    pub constrained: bool,
    /// One trunk with one output head per component; otherwise one network
    /// per component.
    pub shared_trunk: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_layers: 7,
            width: 32,
            m: None,
            psi_mode: PsiMode::ExpDecay,
            input_mode: InputMode::PeriodicEmbedding,
            constrained: true,
            shared_trunk: true,
            seed: 0,
        }
    }
}

/// The full constrained model for one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SpModel {
    pub problem: PdeProblem,
    pub config: ModelConfig,
    pub embedding: PeriodicEmbedding,
    nets: Vec<DenseNet>,
}

impl SpModel {
    /// Build an initialized model. Logs a warning when the truncated Fourier
    /// tail of the initial condition beyond `m` harmonics exceeds 1e-3 in
    /// relative energy — a sign that the embedding cannot represent u₀ well.
    pub fn build(problem: &PdeProblem, config: &ModelConfig) -> Result<SpModel> {
        problem.domain.validate()?;
        let m = config.m.unwrap_or(problem.default_m);
        let embedding = PeriodicEmbedding::new(problem.domain.period(), m)?;

        let input_dim = match config.input_mode {
            InputMode::PeriodicEmbedding => embedding.output_dim(),
            InputMode::Raw => 2,
        };
        if config.hidden_layers == 0 || config.width == 0 {
            return Err(Error::Config(
                "model needs at least one hidden layer of positive width".into(),
            ));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let nets = if config.shared_trunk {
            let mut widths = vec![input_dim];
            widths.extend(std::iter::repeat(config.width).take(config.hidden_layers));
            widths.push(problem.components);
            vec![DenseNet::glorot(widths, &mut rng)?]
        } else {
            (0..problem.components)
                .map(|_| {
                    let mut widths = vec![input_dim];
                    widths.extend(std::iter::repeat(config.width).take(config.hidden_layers));
                    widths.push(1);
                    DenseNet::glorot(widths, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?
        };

        if config.input_mode == InputMode::PeriodicEmbedding {
            for comp in 0..problem.components {
                let tail = spectral_tail_ratio(problem, comp, m);
                if tail > 1e-3 {
                    log::warn!(
                        "problem '{}' component {comp}: u0 Fourier tail beyond m={m} \
                         harmonics is {tail:.2e} (> 1e-3); consider a larger m",
                        problem.id
                    );
                }
            }
        }

        Ok(SpModel {
            problem: problem.clone(),
            config: config.clone(),
            embedding,
            nets,
        })
    }

    pub fn components(&self) -> usize {
        self.problem.components
    }

    pub fn nets(&self) -> &[DenseNet] {
        &self.nets
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(|n| n.param_count()).sum()
    }

    /// All parameters as one flat vector, nets concatenated in order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for net in &self.nets {
            out.extend_from_slice(net.params());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Config(format!(
                "model has {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for net in &mut self.nets {
            let n = net.param_count();
            net.params_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Input feature jets for `(t, x)` under the configured input mode.
    pub fn features(&self, t: f64, x: f64) -> Vec<Jet4> {
        match self.config.input_mode {
            InputMode::PeriodicEmbedding => self.embedding.features(t, x),
            InputMode::Raw => vec![Jet4::at_time(t), Jet4::at_space(x)],
        }
    }

    /// ψ jet for one component: `u₀(x)` carried by the configured time
    /// profile. Analytic in both t and x.
    pub fn psi(&self, component: usize, t: f64, x: f64) -> Jet4 {
        let u0 = self.problem.u0_jet(component, x);
        match self.config.psi_mode {
            PsiMode::Constant => u0,
            PsiMode::ExpDecay => {
                let cx = &mut Values;
                let tj = Jet::time(cx, t);
                let neg_t = crate::jet::jet_scale(cx, tj, -1.0);
                let decay = crate::jet::jet_exp(cx, neg_t);
                jet_mul(cx, u0, decay)
            }
        }
    }

    /// φ jet: `φ(t, x) = t`, zero at t = 0 for every x.
    pub fn phi(&self, t: f64) -> Jet4 {
        Jet4::at_time(t)
    }

    /// Raw network output `u_nn` per component (no constraint applied),
    /// generic over the scalar context.
    pub fn network_with<A: Arith>(
        &self,
        cx: &mut A,
        params: &[A::S],
        t: f64,
        x: f64,
    ) -> Result<Vec<Jet<A::S>>> {
        let feats_v = self.features(t, x);
        let feats: Vec<Jet<A::S>> = feats_v.iter().map(|f| f.lift(cx)).collect();
        let mut outputs = Vec::with_capacity(self.components());
        let mut off = 0;
        for net in &self.nets {
            let n = net.param_count();
            let outs = net.forward_with(cx, &params[off..off + n], &feats)?;
            outputs.extend(outs);
            off += n;
        }
        Ok(outputs)
    }

    /// Constrained output `ũ = ψ + φ·u_nn` per component (or `u_nn` itself
    /// when the model is unconstrained), generic over the scalar context.
    pub fn eval_with<A: Arith>(
        &self,
        cx: &mut A,
        params: &[A::S],
        t: f64,
        x: f64,
    ) -> Result<Vec<Jet<A::S>>> {
        let mut outputs = self.network_with(cx, params, t, x)?;
        if !self.config.constrained {
            return Ok(outputs);
        }
        let phi = self.phi(t).lift(cx);
        for (comp, u_nn) in outputs.iter_mut().enumerate() {
            let psi = self.psi(comp, t, x).lift(cx);
            let wrapped = jet_mul(cx, phi, *u_nn);
            *u_nn = jet_add(cx, psi, wrapped);
        }
        Ok(outputs)
    }

    /// Constrained jets with the stored parameters.
    pub fn eval(&self, t: f64, x: f64) -> Result<Vec<Jet4>> {
        let params = self.flat_params();
        self.eval_with(&mut Values, &params, t, x)
    }

    /// Field values only (value slot of each component).
    pub fn predict(&self, t: f64, x: f64) -> Result<Vec<f64>> {
        Ok(self.eval(t, x)?.iter().map(|j| j.u).collect())
    }

    /// Taped evaluation: bind this model's parameters on `tape` once, then
    /// call [`SpModel::eval_with`] with the returned handles per point.
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        tape.bind_params(&self.flat_params())
    }

    /// Zero the output layer of every net, forcing `u_nn ≡ 0` so the
    /// constrained model starts exactly at ψ.
    pub fn zero_last_layer(&mut self) {
        for net in &mut self.nets {
            let widths = net.widths().to_vec();
            let last = widths.len() - 2;
            let tail = (widths[last] + 1) * widths[last + 1];
            let n = net.param_count();
            for p in &mut net.params_mut()[n - tail..] {
                *p = 0.0;
            }
        }
    }
}

/// Relative L₂ energy of the Fourier tail of u₀ beyond `m` harmonics,
/// estimated from a 512-point DFT.
pub fn spectral_tail_ratio(problem: &PdeProblem, component: usize, m: usize) -> f64 {
    let n = 512usize;
    let period = problem.domain.period();
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let x = problem.domain.a + period * i as f64 / n as f64;
            problem.u0_jet(component, x).u
        })
        .collect();

    let mut total = 0.0;
    let mut tail = 0.0;
    for k in 0..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &s) in samples.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
            re += s * ang.cos();
            im += s * ang.sin();
        }
        let weight = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
        let power = weight * (re * re + im * im);
        total += power;
        if k > m {
            tail += power;
        }
    }
    if total <= 0.0 {
        0.0
    } else {
        (tail / total).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, u32 little-endian header length, JSON header,
// then all parameters as little-endian f64 in declared layer order.
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"SPINNCK1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    problem: PdeProblem,
    model: ModelConfig,
    /// Resolved harmonic count (config `m` may have been `None`).
    m: usize,
    period: f64,
    widths: Vec<Vec<usize>>,
    param_count: usize,
}

impl SpModel {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let header = CheckpointHeader {
            format_version: 1,
            problem: self.problem.clone(),
            model: self.config.clone(),
            m: self.embedding.m,
            period: self.embedding.period,
            widths: self.nets.iter().map(|n| n.widths().to_vec()).collect(),
            param_count: self.param_count(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                detail: format!("header serialization failed: {e}"),
            })?;

        let mut bytes = Vec::with_capacity(16 + header_json.len() + 8 * self.param_count());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&header_json);
        for v in self.flat_params() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<SpModel> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let schema = |detail: String| Error::Schema {
            path: path.to_path_buf(),
            detail,
        };
        if bytes.len() < 12 || &bytes[0..8] != CHECKPOINT_MAGIC {
            return Err(schema("not a model checkpoint (bad magic)".into()));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if bytes.len() < 12 + hlen {
            return Err(schema("truncated header".into()));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[12..12 + hlen])
            .map_err(|e| schema(format!("bad header JSON: {e}")))?;
        if header.format_version != 1 {
            return Err(schema(format!(
                "unsupported checkpoint version {}",
                header.format_version
            )));
        }

        let mut config = header.model.clone();
        config.m = Some(header.m);
        let mut model = SpModel::build(&header.problem, &config)?;

        let declared: Vec<Vec<usize>> = model.nets.iter().map(|n| n.widths().to_vec()).collect();
        if declared != header.widths {
            return Err(schema(format!(
                "layer widths {:?} do not match rebuilt model {:?}",
                header.widths, declared
            )));
        }

        let body = &bytes[12 + hlen..];
        if body.len() != 8 * header.param_count || header.param_count != model.param_count() {
            return Err(schema(format!(
                "parameter payload holds {} bytes, expected {}",
                body.len(),
                8 * model.param_count()
            )));
        }
        let flat: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        model.set_flat_params(&flat)?;
        Ok(model)
    }
}
