//! The distribution-preserving message-passing classifier.
//!
//! K stacked layers update node representations by
//! `h'(v) = C_k([h(v), sum_{w in N(v)} T_k(h(w))])`, a sum readout with a
//! per-node transformation pools the final layer into graph
//! representations, and five prediction heads read the node and graph
//! representations for the classification and distribution tasks. Every
//! transformation is a one-hidden-layer MLP whose hidden layer applies batch
//! normalization followed by ReLU.

mod export;

pub use export::export_embeddings;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Batch;
use crate::scalar::Scalar;
use crate::tensor::{
    BatchNormState, Mode, ParamId, ParamStore, Tape, Tensor, TensorError, Var,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("batch feature width {got} does not match input width {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Whether the first layer's neighborhood transformation is the identity or
/// a learned MLP. With one-hot inputs the identity keeps the aggregation
/// injective, so both are valid; the choice is a searched hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstLayerTransform {
    Identical,
    Mlp,
}

impl FirstLayerTransform {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Identical => "identical",
            Self::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identical" => Some(Self::Identical),
            "mlp" => Some(Self::Mlp),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_node_classes: usize,
    pub num_graph_classes: usize,
    pub first_layer_transform: FirstLayerTransform,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_layers == 0 {
            return Err(ModelError::BadConfig("num_layers must be >= 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(ModelError::BadConfig("hidden_dim must be >= 1".into()));
        }
        if self.num_node_classes == 0 || self.num_graph_classes == 0 {
            return Err(ModelError::BadConfig("class counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Input width of layer k's combine MLP: current width plus the width of
    /// the transformed neighborhood sum.
    fn combine_input_width(&self, layer: usize) -> usize {
        if layer == 0 {
            match self.first_layer_transform {
                FirstLayerTransform::Identical => 2 * self.num_node_classes,
                FirstLayerTransform::Mlp => self.num_node_classes + self.hidden_dim,
            }
        } else {
            2 * self.hidden_dim
        }
    }
}

/// One-hidden-layer MLP: affine -> batch norm -> ReLU -> affine.
#[derive(Clone, Debug)]
pub struct MlpBlock<T> {
    w1: ParamId,
    b1: ParamId,
    gamma: ParamId,
    beta: ParamId,
    bn_state: BatchNormState<T>,
    w2: ParamId,
    b2: ParamId,
}

impl<T: Scalar> MlpBlock<T> {
    fn new(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
    ) -> Self {
        Self {
            w1: store.add(format!("{name}.w1"), Tensor::glorot_uniform(d_in, d_hidden, rng)),
            b1: store.add(format!("{name}.b1"), Tensor::zeros(1, d_hidden)),
            gamma: store.add(format!("{name}.bn.gamma"), Tensor::filled(1, d_hidden, T::one())),
            beta: store.add(format!("{name}.bn.beta"), Tensor::zeros(1, d_hidden)),
            bn_state: BatchNormState::new(d_hidden),
            w2: store.add(format!("{name}.w2"), Tensor::glorot_uniform(d_hidden, d_out, rng)),
            b2: store.add(format!("{name}.b2"), Tensor::zeros(1, d_out)),
        }
    }

    fn forward(
        &mut self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
        mode: Mode,
    ) -> Result<Var, TensorError> {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let hidden = tape.affine(x, w1, b1)?;
        let normed = tape.batch_norm(hidden, gamma, beta, &mut self.bn_state, mode)?;
        let activated = tape.relu(normed);
        tape.affine(activated, w2, b2)
    }
}

/// Tape handles for everything a forward pass produces.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    /// Final node representations, (total nodes) x hidden.
    pub node_reprs: Var,
    /// Graph representations, |batch| x hidden.
    pub graph_reprs: Var,
    /// Task 1 scores, |batch| x C_G.
    pub graph_scores: Var,
    /// Task 2 scores, (total nodes) x C_N.
    pub node_label_scores: Var,
    /// Task 3 scores, (total nodes) x C_G.
    pub graph_label_scores: Var,
    /// Task 4 predictions, |batch| x C_N.
    pub graph_dist_pred: Var,
    /// Task 5 predictions, (total nodes) x C_N.
    pub neigh_dist_pred: Var,
}

#[derive(Clone, Debug)]
pub struct DpGnnModel<T> {
    config: ModelConfig,
    /// Neighborhood transformations; `None` at layer 0 means identity.
    transforms: Vec<Option<MlpBlock<T>>>,
    combines: Vec<MlpBlock<T>>,
    readout_block: MlpBlock<T>,
    head_graph_class: MlpBlock<T>,
    head_node_label: MlpBlock<T>,
    head_graph_label: MlpBlock<T>,
    head_graph_dist: MlpBlock<T>,
    head_neigh_dist: MlpBlock<T>,
}

impl<T: Scalar> DpGnnModel<T> {
    /// Builds all blocks, registering parameters in `store` with seeded
    /// Glorot-uniform weights, zero biases, and unit/zero batch-norm scales.
    pub fn new(config: ModelConfig, store: &mut ParamStore<T>, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = config.hidden_dim;
        let c_n = config.num_node_classes;
        let c_g = config.num_graph_classes;

        let mut transforms = Vec::with_capacity(config.num_layers);
        let mut combines = Vec::with_capacity(config.num_layers);
        for k in 0..config.num_layers {
            let transform = if k == 0 {
                match config.first_layer_transform {
                    FirstLayerTransform::Identical => None,
                    FirstLayerTransform::Mlp => Some(MlpBlock::new(
                        store,
                        &mut rng,
                        &format!("layer{k}.transform"),
                        c_n,
                        hidden,
                        hidden,
                    )),
                }
            } else {
                Some(MlpBlock::new(
                    store,
                    &mut rng,
                    &format!("layer{k}.transform"),
                    hidden,
                    hidden,
                    hidden,
                ))
            };
            transforms.push(transform);
            combines.push(MlpBlock::new(
                store,
                &mut rng,
                &format!("layer{k}.combine"),
                config.combine_input_width(k),
                hidden,
                hidden,
            ));
        }
        Ok(Self {
            transforms,
            combines,
            readout_block: MlpBlock::new(store, &mut rng, "readout", hidden, hidden, hidden),
            head_graph_class: MlpBlock::new(store, &mut rng, "head.graph_class", hidden, hidden, c_g),
            head_node_label: MlpBlock::new(store, &mut rng, "head.node_label", hidden, hidden, c_n),
            head_graph_label: MlpBlock::new(store, &mut rng, "head.graph_label", hidden, hidden, c_g),
            head_graph_dist: MlpBlock::new(store, &mut rng, "head.graph_dist", hidden, hidden, c_n),
            head_neigh_dist: MlpBlock::new(store, &mut rng, "head.neigh_dist", hidden, hidden, c_n),
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// One message-passing layer: transform neighbors, sum them, concatenate
    /// with the current representation, and combine.
    pub fn layer_forward(
        &mut self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        layer: usize,
        h: Var,
        batch: &Batch<T>,
        mode: Mode,
    ) -> Result<Var, ModelError> {
        let transformed = match &mut self.transforms[layer] {
            Some(mlp) => mlp.forward(tape, store, h, mode)?,
            None => h,
        };
        let aggregated = tape.neighbor_sum(transformed, &batch.adjacency)?;
        let concatenated = tape.concat_cols(h, aggregated)?;
        Ok(self.combines[layer].forward(tape, store, concatenated, mode)?)
    }

    /// Sum readout: per-graph sum of a learned transformation of the final
    /// node representations.
    pub fn readout(
        &mut self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        node_reprs: Var,
        batch: &Batch<T>,
        mode: Mode,
    ) -> Result<Var, ModelError> {
        let transformed = self.readout_block.forward(tape, store, node_reprs, mode)?;
        Ok(tape.segment_sum(transformed, &batch.node_to_graph, batch.num_graphs())?)
    }

    /// Full forward pass: K layers from the one-hot features, readout, and
    /// all five heads.
    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        batch: &Batch<T>,
        mode: Mode,
    ) -> Result<ForwardOutput, ModelError> {
        if batch.features.cols() != self.config.num_node_classes {
            return Err(ModelError::FeatureWidth {
                expected: self.config.num_node_classes,
                got: batch.features.cols(),
            });
        }
        let mut h = tape.constant(batch.features.clone());
        for layer in 0..self.config.num_layers {
            h = self.layer_forward(tape, store, layer, h, batch, mode)?;
        }
        let graph_reprs = self.readout(tape, store, h, batch, mode)?;
        Ok(ForwardOutput {
            node_reprs: h,
            graph_reprs,
            graph_scores: self.head_graph_class.forward(tape, store, graph_reprs, mode)?,
            node_label_scores: self.head_node_label.forward(tape, store, h, mode)?,
            graph_label_scores: self.head_graph_label.forward(tape, store, h, mode)?,
            graph_dist_pred: self.head_graph_dist.forward(tape, store, graph_reprs, mode)?,
            neigh_dist_pred: self.head_neigh_dist.forward(tape, store, h, mode)?,
        })
    }

    /// Batch-norm running statistics of every block, named for checkpointing.
    pub fn buffer_tensors(&self) -> Vec<(String, Vec<f64>)> {
        self.blocks()
            .into_iter()
            .flat_map(|(name, block)| {
                [
                    (
                        format!("{name}.bn.running_mean"),
                        block.bn_state.running_mean.iter().map(|v| v.to_f64()).collect(),
                    ),
                    (
                        format!("{name}.bn.running_var"),
                        block.bn_state.running_var.iter().map(|v| v.to_f64()).collect(),
                    ),
                ]
            })
            .collect()
    }

    /// Restores one running-statistics buffer by its checkpoint name.
    pub fn load_buffer(&mut self, name: &str, values: &[f64]) -> Result<(), ModelError> {
        let (block_name, field) = name
            .rsplit_once('.')
            .ok_or_else(|| ModelError::BadConfig(format!("unknown buffer {name}")))?;
        let block_name = block_name
            .strip_suffix(".bn")
            .ok_or_else(|| ModelError::BadConfig(format!("unknown buffer {name}")))?;
        let block = self
            .blocks_mut()
            .into_iter()
            .find(|(n, _)| n == block_name)
            .map(|(_, b)| b)
            .ok_or_else(|| ModelError::BadConfig(format!("unknown buffer {name}")))?;
        let target = match field {
            "running_mean" => &mut block.bn_state.running_mean,
            "running_var" => &mut block.bn_state.running_var,
            _ => return Err(ModelError::BadConfig(format!("unknown buffer {name}"))),
        };
        if target.len() != values.len() {
            return Err(ModelError::BadConfig(format!(
                "buffer {name} has width {}, checkpoint has {}",
                target.len(),
                values.len()
            )));
        }
        for (t, &v) in target.iter_mut().zip(values) {
            *t = T::from_f64(v);
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<(String, &MlpBlock<T>)> {
        let mut out = Vec::new();
        for (k, t) in self.transforms.iter().enumerate() {
            if let Some(block) = t {
                out.push((format!("layer{k}.transform"), block));
            }
        }
        for (k, block) in self.combines.iter().enumerate() {
            out.push((format!("layer{k}.combine"), block));
        }
        out.push(("readout".into(), &self.readout_block));
        out.push(("head.graph_class".into(), &self.head_graph_class));
        out.push(("head.node_label".into(), &self.head_node_label));
        out.push(("head.graph_label".into(), &self.head_graph_label));
        out.push(("head.graph_dist".into(), &self.head_graph_dist));
        out.push(("head.neigh_dist".into(), &self.head_neigh_dist));
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut MlpBlock<T>)> {
        let mut out = Vec::new();
        for (k, t) in self.transforms.iter_mut().enumerate() {
            if let Some(block) = t {
                out.push((format!("layer{k}.transform"), block));
            }
        }
        for (k, block) in self.combines.iter_mut().enumerate() {
            out.push((format!("layer{k}.combine"), block));
        }
        out.push(("readout".into(), &mut self.readout_block));
        out.push(("head.graph_class".into(), &mut self.head_graph_class));
        out.push(("head.node_label".into(), &mut self.head_node_label));
        out.push(("head.graph_label".into(), &mut self.head_graph_label));
        out.push(("head.graph_dist".into(), &mut self.head_graph_dist));
        out.push(("head.neigh_dist".into(), &mut self.head_neigh_dist));
        out
    }
}
