//! Graph-convolutional autoencoder with differentiable min-cut pooling.
//!
//! The encoder runs the block-diagonal input through two parallel blocks:
//! a pooling block ending in a row-softmax that emits the soft assignment
//! matrix `S`, and a feature block that emits low-dimensional node features
//! `H`. Pooling computes `Z = S^T H`; the decoder starts from `S Z` and
//! maps back to the input feature width. Training minimizes a weighted sum
//! of reconstruction, cut, orthogonality, and negative-entropy losses, each
//! averaged over the training periods.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::StackedLayout;
use crate::graph::RenormalizedLaplacian;
use crate::matrix::Matrix;
use crate::tensor::{Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: {term} is not finite")]
    Diverged { epoch: usize, term: &'static str },
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    GraphConv,
    Dense,
}

/// Network and training hyperparameters. The paper leaves layer counts,
/// widths, and the optimizer unspecified; these defaults follow the
/// shallow-model guidance for limited data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    /// Latent width `d'` of the feature block.
    pub latent_dim: usize,
    /// Number of pooled node groups `|N'|`.
    pub groups: usize,
    /// Hidden widths of the pooling block before the assignment layer.
    pub pool_hidden: Vec<usize>,
    /// Hidden widths of the feature block before the latent layer.
    pub feature_hidden: Vec<usize>,
    /// Whether the feature block uses graph convolutions or dense layers.
    pub feature_block: BlockKind,
    /// Hidden widths of the decoder before the output layer.
    pub decoder_hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Early stop when the total loss changes by less than
    /// `plateau_rel_tol` (relative) over `plateau_window` epochs.
    pub plateau_window: usize,
    pub plateau_rel_tol: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            latent_dim: 4,
            groups: 6,
            pool_hidden: vec![16],
            feature_hidden: vec![],
            feature_block: BlockKind::GraphConv,
            decoder_hidden: vec![],
            activation: Activation::Tanh,
            epochs: 500,
            learning_rate: 1e-3,
            seed: 0,
            plateau_window: 50,
            plateau_rel_tol: 1e-6,
        }
    }
}

impl ArchitectureConfig {
    fn validate(&self, n_nodes: usize) -> Result<(), TrainError> {
        if self.latent_dim == 0 || self.groups == 0 {
            return Err(TrainError::Config(
                "latent_dim and groups must be positive".into(),
            ));
        }
        if self.groups > n_nodes {
            return Err(TrainError::Config(format!(
                "cannot pool {} nodes into {} groups",
                n_nodes, self.groups
            )));
        }
        Ok(())
    }
}

/// Weights of the multi-objective training loss. `class_alphas` follows
/// the class order of the stacked layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_r: f64,
    pub alpha_p: f64,
    pub alpha_h: f64,
    pub class_alphas: Vec<f64>,
}

impl LossWeights {
    pub fn new(
        alpha_r: f64,
        alpha_p: f64,
        alpha_h: f64,
        class_alphas: Vec<f64>,
    ) -> Result<Self, TrainError> {
        let w = LossWeights {
            alpha_r,
            alpha_p,
            alpha_h,
            class_alphas,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let all = [self.alpha_r, self.alpha_p, self.alpha_h]
            .into_iter()
            .chain(self.class_alphas.iter().copied());
        for a in all.clone() {
            if a < 0.0 || !a.is_finite() {
                return Err(TrainError::Config(format!("negative loss weight {}", a)));
            }
        }
        if [self.alpha_r, self.alpha_p, self.alpha_h]
            .iter()
            .all(|&a| a == 0.0)
        {
            return Err(TrainError::Config("all loss weights are zero".into()));
        }
        Ok(())
    }

    fn preset(alpha_r: f64, alpha_p: f64, alpha_h: f64, n_classes: usize) -> Self {
        LossWeights {
            alpha_r,
            alpha_p,
            alpha_h,
            class_alphas: vec![1.0; n_classes],
        }
    }

    /// Pooling loss only: (0, 1, 0).
    pub fn pl(n_classes: usize) -> Self {
        Self::preset(0.0, 1.0, 0.0, n_classes)
    }

    /// Pooling and reconstruction: (1, 1, 0).
    pub fn prl(n_classes: usize) -> Self {
        Self::preset(1.0, 1.0, 0.0, n_classes)
    }

    /// Pooling and entropy: (0, 1, 1).
    pub fn phl(n_classes: usize) -> Self {
        Self::preset(0.0, 1.0, 1.0, n_classes)
    }

    /// Pooling, reconstruction, and entropy: (1, 1, 1).
    pub fn prhl(n_classes: usize) -> Self {
        Self::preset(1.0, 1.0, 1.0, n_classes)
    }
}

/// Learned weights. `fixed_assignment` replaces the pooling block's output
/// with a given matrix; it is a diagnostic hook for pinning a known
/// grouping while exercising the rest of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub pool_weights: Vec<Matrix>,
    pub feature_weights: Vec<Matrix>,
    pub decoder_weights: Vec<Matrix>,
    pub fixed_assignment: Option<Matrix>,
}

/// Architecture plus parameters; everything needed to run a forward pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub arch: ArchitectureConfig,
    pub params: ModelParams,
    /// Input width the model was built for (features plus one-hot columns).
    pub input_cols: usize,
    /// Output width of the decoder (feature columns only).
    pub recon_cols: usize,
    pub n_nodes: usize,
}

fn init_weight(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

impl Model {
    /// Seeded uniform initialization in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn init(
        arch: &ArchitectureConfig,
        n_nodes: usize,
        input_cols: usize,
        recon_cols: usize,
    ) -> Result<Model, TrainError> {
        arch.validate(n_nodes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(arch.seed);
        let chain = |rng: &mut ChaCha8Rng, from: usize, widths: &[usize], to: usize| {
            let mut weights = Vec::new();
            let mut prev = from;
            for &w in widths {
                weights.push(init_weight(rng, prev, w));
                prev = w;
            }
            weights.push(init_weight(rng, prev, to));
            weights
        };
        let pool_weights = chain(&mut rng, input_cols, &arch.pool_hidden, arch.groups);
        let feature_weights = chain(&mut rng, input_cols, &arch.feature_hidden, arch.latent_dim);
        let decoder_weights = chain(&mut rng, arch.latent_dim, &arch.decoder_hidden, recon_cols);
        Ok(Model {
            arch: arch.clone(),
            params: ModelParams {
                pool_weights,
                feature_weights,
                decoder_weights,
                fixed_assignment: None,
            },
            input_cols,
            recon_cols,
            n_nodes,
        })
    }
}

fn apply_activation(tape: &Tape, v: Var, activation: Activation) -> Var {
    match activation {
        Activation::Relu => tape.relu(v),
        Activation::Tanh => tape.tanh(v),
        Activation::Identity => v,
    }
}

/// One graph convolution `sigma(L H Theta)`.
pub fn gcn_layer(
    tape: &Tape,
    h: Var,
    laplacian: Var,
    theta: Var,
    activation: Activation,
) -> Result<Var, TensorError> {
    let lh = tape.matmul(laplacian, h)?;
    let pre = tape.matmul(lh, theta)?;
    Ok(apply_activation(tape, pre, activation))
}

fn dense_layer(
    tape: &Tape,
    h: Var,
    theta: Var,
    activation: Activation,
) -> Result<Var, TensorError> {
    let pre = tape.matmul(h, theta)?;
    Ok(apply_activation(tape, pre, activation))
}

/// Pool node features with a (row-stochastic) assignment: `Z = S^T H`.
pub fn pool(tape: &Tape, s: Var, h: Var) -> Result<Var, TensorError> {
    let st = tape.transpose(s);
    tape.matmul(st, h)
}

/// Disaggregate pooled features back to nodes: `S Z`.
pub fn unpool(tape: &Tape, s: Var, z: Var) -> Result<Var, TensorError> {
    tape.matmul(s, z)
}

/// Cut loss `-Tr(S^T A~ S) / Tr(S^T D~ S)`; lies in [-1, 0] for any
/// entrywise-nonnegative assignment.
pub fn cut_loss(tape: &Tape, s: Var, a_tilde: Var, d_tilde: Var) -> Result<Var, TensorError> {
    let st = tape.transpose(s);
    let num = tape.trace(tape.matmul(tape.matmul(st, a_tilde)?, s)?)?;
    let den = tape.trace(tape.matmul(tape.matmul(st, d_tilde)?, s)?)?;
    debug_assert!(tape.value(den).scalar_value() > 0.0, "degenerate D~ trace");
    let ratio = tape.div_scalar(num, den)?;
    Ok(tape.scale(ratio, -1.0))
}

/// Orthogonality loss `|| S^T S / ||S^T S||_F - I/sqrt(g) ||_F` in [0, 2].
pub fn orthogonality_loss(tape: &Tape, s: Var) -> Result<Var, TensorError> {
    let (_, groups) = tape.shape(s);
    let st = tape.transpose(s);
    let sts = tape.matmul(st, s)?;
    let norm = tape.frobenius_norm(sts);
    let scaled = tape.div_scalar(sts, norm)?;
    let target = tape.leaf(Matrix::identity(groups).scale(1.0 / (groups as f64).sqrt()));
    let diff = tape.sub(scaled, target)?;
    Ok(tape.frobenius_norm(diff))
}

const ENTROPY_EPS: f64 = 1e-9;

/// Negative entropy of group-level input sums: `v^T log(v)` with
/// `v = S^T H0 1`. An epsilon shift inside the logarithm guards `v -> 0`.
/// For a fixed total, the loss is minimized by equal group sums.
pub fn entropy_loss(tape: &Tape, s: Var, h0: Var) -> Result<Var, TensorError> {
    let (_, d) = tape.shape(h0);
    let (_, groups) = tape.shape(s);
    let ones = tape.leaf(Matrix::filled(d, 1, 1.0));
    let row_sums = tape.matmul(h0, ones)?;
    let st = tape.transpose(s);
    let v = tape.matmul(st, row_sums)?;
    debug_assert!(
        tape.value(v).data().iter().all(|&x| x > -ENTROPY_EPS),
        "negative group sum"
    );
    let eps = tape.leaf(Matrix::filled(groups, 1, ENTROPY_EPS));
    let shifted = tape.add(v, eps)?;
    let logs = tape.log(shifted)?;
    let prods = tape.mul(v, logs)?;
    Ok(tape.sum(prods))
}

/// One period's class-weighted squared reconstruction error
/// `sum_s alpha_s ||X_s - X_s^||_F^2`. The caller divides by the number of
/// periods to complete the dataset-level loss.
pub fn reconstruction_term(
    tape: &Tape,
    x: Var,
    x_hat: Var,
    layout: &StackedLayout,
    class_alphas: &[f64],
) -> Result<Var, TensorError> {
    debug_assert_eq!(layout.classes.len(), class_alphas.len());
    let mut total: Option<Var> = None;
    for (i, (rows, cols)) in layout
        .row_ranges
        .iter()
        .zip(layout.col_ranges.iter())
        .enumerate()
    {
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        let xs = tape.block(x, rows.clone(), cols.clone())?;
        let xh = tape.block(x_hat, rows.clone(), cols.clone())?;
        let diff = tape.sub(xs, xh)?;
        let sq = tape.sum(tape.square(diff));
        let weighted = tape.scale(sq, class_alphas[i]);
        total = Some(match total {
            Some(t) => tape.add(t, weighted)?,
            None => weighted,
        });
    }
    Ok(total.unwrap_or_else(|| tape.scalar(0.0)))
}

/// Weighted total `alpha_R L_R + alpha_P L_P + alpha_H L_H`.
pub fn total_loss(
    tape: &Tape,
    recon: Var,
    pool_loss: Var,
    entropy: Var,
    weights: &LossWeights,
) -> Result<Var, TensorError> {
    let r = tape.scale(recon, weights.alpha_r);
    let p = tape.scale(pool_loss, weights.alpha_p);
    let h = tape.scale(entropy, weights.alpha_h);
    tape.add(tape.add(r, p)?, h)
}

/// Tape handles produced by one period's forward pass.
pub struct PeriodForward {
    pub s: Var,
    pub z: Var,
    pub x_hat: Var,
    pub cut: Var,
    pub ortho: Var,
    pub entropy: Var,
    pub recon: Var,
}

/// Graph leaves shared by every period of an epoch.
struct GraphLeaves {
    laplacian: Var,
    a_tilde: Var,
    d_tilde: Var,
}

fn forward_period(
    tape: &Tape,
    model: &Model,
    weights_vars: &WeightVars,
    graph: &GraphLeaves,
    x: Var,
    layout: &StackedLayout,
    class_alphas: &[f64],
) -> Result<PeriodForward, TensorError> {
    let act = model.arch.activation;

    // Pooling block: hidden graph convolutions, then a softmax assignment.
    let s = if let Some(fixed) = &model.params.fixed_assignment {
        tape.leaf(fixed.clone())
    } else {
        let mut h = x;
        let last = weights_vars.pool.len() - 1;
        for (i, &w) in weights_vars.pool.iter().enumerate() {
            let lh = tape.matmul(graph.laplacian, h)?;
            let pre = tape.matmul(lh, w)?;
            h = if i == last {
                tape.softmax_rows(pre)
            } else {
                apply_activation(tape, pre, act)
            };
        }
        h
    };

    // Feature block.
    let mut h = x;
    for &w in &weights_vars.feature {
        h = match model.arch.feature_block {
            BlockKind::GraphConv => gcn_layer(tape, h, graph.laplacian, w, act)?,
            BlockKind::Dense => dense_layer(tape, h, w, act)?,
        };
    }

    let z = pool(tape, s, h)?;
    let mut d = unpool(tape, s, z)?;

    // Decoder: hidden layers use the configured activation, the output
    // layer is linear.
    let last = weights_vars.decoder.len() - 1;
    for (i, &w) in weights_vars.decoder.iter().enumerate() {
        let layer_act = if i == last { Activation::Identity } else { act };
        d = match model.arch.feature_block {
            BlockKind::GraphConv => gcn_layer(tape, d, graph.laplacian, w, layer_act)?,
            BlockKind::Dense => dense_layer(tape, d, w, layer_act)?,
        };
    }

    let cut = cut_loss(tape, s, graph.a_tilde, graph.d_tilde)?;
    let ortho = orthogonality_loss(tape, s)?;
    let entropy = entropy_loss(tape, s, x)?;
    let recon = reconstruction_term(tape, x, d, layout, class_alphas)?;
    Ok(PeriodForward {
        s,
        z,
        x_hat: d,
        cut,
        ortho,
        entropy,
        recon,
    })
}

struct WeightVars {
    pool: Vec<Var>,
    feature: Vec<Var>,
    decoder: Vec<Var>,
}

fn register_weights(tape: &Tape, params: &ModelParams) -> WeightVars {
    WeightVars {
        pool: params.pool_weights.iter().map(|w| tape.leaf(w.clone())).collect(),
        feature: params
            .feature_weights
            .iter()
            .map(|w| tape.leaf(w.clone()))
            .collect(),
        decoder: params
            .decoder_weights
            .iter()
            .map(|w| tape.leaf(w.clone()))
            .collect(),
    }
}

/// Per-epoch loss values in dataset units (averaged over periods).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub cut: f64,
    pub ortho: f64,
    pub entropy: f64,
}

impl LossBreakdown {
    pub fn pooling(&self) -> f64 {
        self.cut + self.ortho
    }

    fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("recon", self.recon),
            ("cut", self.cut),
            ("ortho", self.ortho),
            ("entropy", self.entropy),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// Adam with the standard moment decays; full-batch over all periods.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..grad.len() {
                let g = grad.data()[i];
                m.data_mut()[i] = self.beta1 * m.data()[i] + (1.0 - self.beta1) * g;
                v.data_mut()[i] = self.beta2 * v.data()[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data()[i] / bc1;
                let v_hat = v.data()[i] / bc2;
                param.data_mut()[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// A trained model together with its per-period outputs and loss history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedAutoencoder {
    pub model: Model,
    pub loss_weights: LossWeights,
    pub final_losses: LossBreakdown,
    pub trajectory: Vec<LossBreakdown>,
    /// Soft assignment `S` per period, rows summing to one.
    pub assignments: Vec<Matrix>,
    /// Pooled latent `Z = S^T H` per period.
    pub latents: Vec<Matrix>,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    trained: TrainedAutoencoder,
}

impl TrainedAutoencoder {
    /// Deterministic forward pass of one input. Returns `(S, Z)`.
    pub fn encode(
        &self,
        lap: &RenormalizedLaplacian,
        x: &Matrix,
    ) -> Result<(Matrix, Matrix), TrainError> {
        if x.shape() != (self.model.n_nodes, self.model.input_cols) {
            return Err(TrainError::Input(format!(
                "encode input is {:?}, model expects {:?}",
                x.shape(),
                (self.model.n_nodes, self.model.input_cols)
            )));
        }
        let tape = Tape::new();
        let graph = GraphLeaves {
            laplacian: tape.leaf(lap.laplacian.clone()),
            a_tilde: tape.leaf(lap.a_tilde.clone()),
            d_tilde: tape.leaf(lap.d_tilde_matrix()),
        };
        let weights = register_weights(&tape, &self.model.params);
        let x_var = tape.leaf(x.clone());
        // Reconstruction geometry is irrelevant for encoding; reuse a
        // single-class layout covering the whole input.
        let layout = StackedLayout {
            classes: vec!["all".into()],
            row_ranges: vec![0..self.model.n_nodes],
            col_ranges: vec![0..self.model.recon_cols],
            feature_cols: self.model.recon_cols,
            one_hot: false,
            total_rows: self.model.n_nodes,
            total_cols: self.model.input_cols,
        };
        let fwd = forward_period(&tape, &self.model, &weights, &graph, x_var, &layout, &[1.0])?;
        Ok((tape.value(fwd.s), tape.value(fwd.z)))
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            trained: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedAutoencoder, TrainError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(TrainError::Config(format!(
                "unsupported model file version {}",
                file.version
            )));
        }
        Ok(file.trained)
    }

    /// Write the loss trajectory as `epoch,total,recon,cut,ortho,entropy`.
    pub fn write_loss_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "epoch,total,recon,cut,ortho,entropy")?;
        for (epoch, l) in self.trajectory.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                epoch, l.total, l.recon, l.cut, l.ortho, l.entropy
            )?;
        }
        Ok(())
    }
}

/// Train on the stacked inputs (one matrix per period) with full-batch
/// Adam. Deterministic for a fixed seed; records the loss trajectory and
/// the per-period `S`, `Z` from a final encode pass.
pub fn train(
    inputs: &[Matrix],
    layout: &StackedLayout,
    lap: &RenormalizedLaplacian,
    arch: &ArchitectureConfig,
    loss_weights: &LossWeights,
) -> Result<TrainedAutoencoder, TrainError> {
    if inputs.is_empty() {
        return Err(TrainError::Input("training dataset is empty".into()));
    }
    loss_weights.validate()?;
    if loss_weights.class_alphas.len() != layout.classes.len() {
        return Err(TrainError::Config(format!(
            "{} class alphas for {} classes",
            loss_weights.class_alphas.len(),
            layout.classes.len()
        )));
    }
    for x in inputs {
        if x.shape() != (layout.total_rows, layout.total_cols) {
            return Err(TrainError::Input(format!(
                "input period is {:?}, layout expects {:?}",
                x.shape(),
                (layout.total_rows, layout.total_cols)
            )));
        }
    }
    let model = Model::init(arch, layout.total_rows, layout.total_cols, layout.feature_cols)?;
    train_model(model, inputs, layout, lap, loss_weights)
}

/// Like [`train`] but starting from explicit parameters.
/// One full-batch forward pass: the per-term losses (averaged over
/// periods) and the gradient of the weighted total with respect to every
/// weight matrix, in (pooling block, feature block, decoder) order.
pub fn loss_and_gradients(
    model: &Model,
    inputs: &[Matrix],
    layout: &StackedLayout,
    lap: &RenormalizedLaplacian,
    loss_weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Matrix>), TrainError> {
    let n_periods = inputs.len() as f64;
    let tape = Tape::new();
    let graph = GraphLeaves {
        laplacian: tape.leaf(lap.laplacian.clone()),
        a_tilde: tape.leaf(lap.a_tilde.clone()),
        d_tilde: tape.leaf(lap.d_tilde_matrix()),
    };
    let weights = register_weights(&tape, &model.params);

    let mut recon_sum: Option<Var> = None;
    let mut cut_sum: Option<Var> = None;
    let mut ortho_sum: Option<Var> = None;
    let mut entropy_sum: Option<Var> = None;
    let add_to = |acc: &mut Option<Var>, v: Var| -> Result<(), TensorError> {
        *acc = Some(match acc.take() {
            Some(a) => tape.add(a, v)?,
            None => v,
        });
        Ok(())
    };
    for x in inputs {
        let x_var = tape.leaf(x.clone());
        let fwd = forward_period(
            &tape,
            model,
            &weights,
            &graph,
            x_var,
            layout,
            &loss_weights.class_alphas,
        )?;
        add_to(&mut recon_sum, fwd.recon)?;
        add_to(&mut cut_sum, fwd.cut)?;
        add_to(&mut ortho_sum, fwd.ortho)?;
        add_to(&mut entropy_sum, fwd.entropy)?;
    }
    let scale = 1.0 / n_periods;
    let recon = tape.scale(recon_sum.unwrap(), scale);
    let cut = tape.scale(cut_sum.unwrap(), scale);
    let ortho = tape.scale(ortho_sum.unwrap(), scale);
    let entropy = tape.scale(entropy_sum.unwrap(), scale);
    let pooling = tape.add(cut, ortho)?;
    let total = total_loss(&tape, recon, pooling, entropy, loss_weights)?;

    let losses = LossBreakdown {
        total: tape.value(total).scalar_value(),
        recon: tape.value(recon).scalar_value(),
        cut: tape.value(cut).scalar_value(),
        ortho: tape.value(ortho).scalar_value(),
        entropy: tape.value(entropy).scalar_value(),
    };
    let grads = tape.backward(total)?;
    let grad_values: Vec<Matrix> = weights
        .pool
        .iter()
        .chain(&weights.feature)
        .chain(&weights.decoder)
        .map(|&v| grads.wrt(v))
        .collect();
    Ok((losses, grad_values))
}

pub fn train_model(
    mut model: Model,
    inputs: &[Matrix],
    layout: &StackedLayout,
    lap: &RenormalizedLaplacian,
    loss_weights: &LossWeights,
) -> Result<TrainedAutoencoder, TrainError> {
    let shapes: Vec<(usize, usize)> = model
        .params
        .pool_weights
        .iter()
        .chain(&model.params.feature_weights)
        .chain(&model.params.decoder_weights)
        .map(|w| w.shape())
        .collect();
    let mut adam = Adam::new(model.arch.learning_rate, &shapes);
    let mut trajectory: Vec<LossBreakdown> = Vec::new();

    for epoch in 0..=model.arch.epochs {
        let (losses, grad_values) =
            loss_and_gradients(&model, inputs, layout, lap, loss_weights)?;
        if let Some(term) = losses.non_finite_term() {
            return Err(TrainError::Diverged { epoch, term });
        }
        trajectory.push(losses);

        // The final iteration only records losses; no parameter update.
        if epoch == model.arch.epochs {
            break;
        }
        if plateaued(&trajectory, model.arch.plateau_window, model.arch.plateau_rel_tol) {
            break;
        }

        let mut param_refs: Vec<&mut Matrix> = model
            .params
            .pool_weights
            .iter_mut()
            .chain(model.params.feature_weights.iter_mut())
            .chain(model.params.decoder_weights.iter_mut())
            .collect();
        adam.step(&mut param_refs, &grad_values);
    }

    // Final encode pass over all periods.
    let mut assignments = Vec::with_capacity(inputs.len());
    let mut latents = Vec::with_capacity(inputs.len());
    for x in inputs {
        let tape = Tape::new();
        let graph = GraphLeaves {
            laplacian: tape.leaf(lap.laplacian.clone()),
            a_tilde: tape.leaf(lap.a_tilde.clone()),
            d_tilde: tape.leaf(lap.d_tilde_matrix()),
        };
        let weights = register_weights(&tape, &model.params);
        let x_var = tape.leaf(x.clone());
        let fwd = forward_period(
            &tape,
            &model,
            &weights,
            &graph,
            x_var,
            layout,
            &loss_weights.class_alphas,
        )?;
        assignments.push(tape.value(fwd.s));
        latents.push(tape.value(fwd.z));
    }

    let final_losses = *trajectory.last().unwrap();
    Ok(TrainedAutoencoder {
        model,
        loss_weights: loss_weights.clone(),
        final_losses,
        trajectory,
        assignments,
        latents,
    })
}

fn plateaued(trajectory: &[LossBreakdown], window: usize, rel_tol: f64) -> bool {
    if window == 0 || trajectory.len() <= window {
        return false;
    }
    let now = trajectory[trajectory.len() - 1].total;
    let then = trajectory[trajectory.len() - 1 - window].total;
    (now - then).abs() <= rel_tol * then.abs().max(1.0)
}
