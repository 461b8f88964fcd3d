use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    /// LSTM cell unrolled over the input sequence; emits the full hidden sequence.
    Recurrent,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output width. Ignored (conventionally 0) for identity layers.
    pub width: usize,
    /// Ignored for recurrent cells, which use the standard LSTM nonlinearities.
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(width: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            width,
            activation,
        }
    }

    pub fn recurrent(width: usize) -> Self {
        Self {
            kind: LayerKind::Recurrent,
            width,
            activation: Activation::Tanh,
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: LayerKind::Identity,
            width: 0,
            activation: Activation::Linear,
        }
    }
}

/// Additive skip connection between graph nodes.
///
/// Node 0 is the input, nodes `1..=L` are the layers and node `L + 1` is the
/// input of the Gaussian output head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkipEdge {
    pub from: usize,
    pub to: usize,
}

/// Decoded network topology: a chain of layers plus additive skip edges,
/// terminated by a head that emits a mean and a variance per output.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Features per time step.
    pub input_dim: usize,
    /// Number of time steps per sample; 1 for plain feed-forward inputs.
    pub seq_len: usize,
    /// Number of predicted quantities; the head emits twice as many values.
    pub output_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub skips: Vec<SkipEdge>,
}

impl NetworkSpec {
    pub fn feed_forward(input_dim: usize, output_dim: usize, layers: Vec<LayerSpec>) -> Self {
        Self {
            input_dim,
            seq_len: 1,
            output_dim,
            layers,
            skips: Vec::new(),
        }
    }

    pub fn with_skips(mut self, skips: Vec<SkipEdge>) -> Self {
        self.skips = skips;
        self
    }

    /// Index of the head node.
    pub fn head_node(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn input_len(&self) -> usize {
        self.seq_len * self.input_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.seq_len == 0 || self.output_dim == 0 {
            return Err(Error::InvalidSpec(
                "input_dim, seq_len and output_dim must be positive".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.kind != LayerKind::Identity && layer.width == 0 {
                return Err(Error::InvalidSpec(format!("layer {} has zero width", i + 1)));
            }
        }
        let head = self.head_node();
        let mut seen = std::collections::HashSet::new();
        for edge in &self.skips {
            if edge.from >= edge.to {
                return Err(Error::InvalidSpec(format!(
                    "skip {} -> {} is not forward (cycle)",
                    edge.from, edge.to
                )));
            }
            if edge.to > head {
                return Err(Error::InvalidSpec(format!(
                    "skip {} -> {} targets a node past the head",
                    edge.from, edge.to
                )));
            }
            if !seen.insert(*edge) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate skip {} -> {}",
                    edge.from, edge.to
                )));
            }
        }
        Ok(())
    }

    /// Per-step output width of node `node` (0 = input).
    pub fn node_width(&self, node: usize) -> usize {
        if node == 0 {
            return self.input_dim;
        }
        let layer = &self.layers[node - 1];
        match layer.kind {
            LayerKind::Identity => self.node_width(node - 1),
            _ => layer.width,
        }
    }

    /// Per-step width of the combined input arriving at node `node` (1..=head).
    pub fn in_width(&self, node: usize) -> usize {
        self.node_width(node - 1)
    }

    /// Stable 64-bit fingerprint of the topology, used in checkpoint headers.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&json);
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

/// Where each parameter block lives inside the flat weight vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub layers: Vec<LayerBlock>,
    /// One entry per skip edge, in `spec.skips` order; `None` when widths match.
    pub projections: Vec<Option<ProjBlock>>,
    pub head: HeadBlock,
    pub total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LayerBlock {
    Dense {
        w: usize,
        b: usize,
        rows: usize,
        cols: usize,
    },
    Recurrent {
        w: usize,
        u: usize,
        b: usize,
        hidden: usize,
        cols: usize,
    },
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ProjBlock {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct HeadBlock {
    pub w_mean: usize,
    pub b_mean: usize,
    pub w_var: usize,
    pub b_var: usize,
    pub outputs: usize,
    /// Flattened head input length (`seq_len * width`).
    pub cols: usize,
}

impl Layout {
    /// Parameters are ordered by destination node: the skip projections into a
    /// node come first, then the node's own weights. The head is last.
    pub fn new(spec: &NetworkSpec) -> Self {
        let mut offset = 0usize;
        let mut take = |n: usize| {
            let at = offset;
            offset += n;
            at
        };
        let mut projections = vec![None; spec.skips.len()];
        let mut layers = Vec::with_capacity(spec.layers.len());
        let head_node = spec.head_node();
        for node in 1..=head_node {
            for (k, edge) in spec.skips.iter().enumerate() {
                if edge.to != node {
                    continue;
                }
                let rows = spec.in_width(node);
                let cols = spec.node_width(edge.from);
                if rows != cols {
                    projections[k] = Some(ProjBlock {
                        offset: take(rows * cols),
                        rows,
                        cols,
                    });
                }
            }
            if node == head_node {
                break;
            }
            let layer = &spec.layers[node - 1];
            let cols = spec.in_width(node);
            let block = match layer.kind {
                LayerKind::Dense => {
                    let rows = layer.width;
                    LayerBlock::Dense {
                        w: take(rows * cols),
                        b: take(rows),
                        rows,
                        cols,
                    }
                }
                LayerKind::Recurrent => {
                    let hidden = layer.width;
                    LayerBlock::Recurrent {
                        w: take(4 * hidden * cols),
                        u: take(4 * hidden * hidden),
                        b: take(4 * hidden),
                        hidden,
                        cols,
                    }
                }
                LayerKind::Identity => LayerBlock::Identity,
            };
            layers.push(block);
        }
        let outputs = spec.output_dim;
        let cols = spec.seq_len * spec.in_width(head_node);
        let head = HeadBlock {
            w_mean: take(outputs * cols),
            b_mean: take(outputs),
            w_var: take(outputs * cols),
            b_var: take(outputs),
            outputs,
            cols,
        };
        Layout {
            layers,
            projections,
            head,
            total: offset,
        }
    }
}
