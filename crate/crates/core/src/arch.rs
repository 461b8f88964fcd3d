//! Architecture search space: a chain of variable nodes, each choosing a
//! layer configuration (or identity), plus binary skip-connection nodes that
//! link each variable node to up to three earlier, nonconsecutive nodes.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerKind, LayerSpec, NetworkSpec, SkipEdge};

pub const DEFAULT_WIDTHS: [usize; 5] = [16, 32, 64, 128, 256];
pub const DEFAULT_NODES: usize = 5;
/// How far back (in variable nodes, beyond the direct predecessor) skips may reach.
pub const DEFAULT_SKIP_SPAN: usize = 3;

/// One categorical decision per entry, in search-space order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchConfig(pub Vec<usize>);

impl ArchConfig {
    pub fn hamming(&self, other: &ArchConfig) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Layer choice for variable node `n` (1-based graph index).
    Layer(usize),
    /// Skip from graph node `from` into graph node `to` (0 = input).
    Skip { from: usize, to: usize },
}

/// Shape of the data the decoded networks consume and emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoShape {
    pub input_dim: usize,
    pub seq_len: usize,
    pub output_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    io: IoShape,
    options: Vec<Vec<LayerSpec>>,
    decisions: Vec<Decision>,
}

impl SearchSpace {
    /// `options[k]` lists the choices of variable node `k + 1`.
    pub fn new(io: IoShape, options: Vec<Vec<LayerSpec>>, skip_span: usize) -> Result<Self> {
        if options.is_empty() {
            return Err(Error::Config("search space needs at least one variable node".into()));
        }
        for (k, opts) in options.iter().enumerate() {
            if opts.len() < 2 {
                return Err(Error::Config(format!(
                    "variable node {} has {} option(s); at least 2 required",
                    k + 1,
                    opts.len()
                )));
            }
            if let Some(bad) = opts.iter().find(|o| o.kind != LayerKind::Identity && o.width == 0) {
                return Err(Error::Config(format!("zero-width option {bad:?}")));
            }
        }
        let mut decisions = Vec::new();
        for node in 1..=options.len() {
            decisions.push(Decision::Layer(node));
            // Skips into `node` from nodes node-1-span ..= node-2.
            let lo = node.saturating_sub(1 + skip_span);
            if node >= 2 {
                for from in lo..=node - 2 {
                    if node - 1 - from <= skip_span {
                        decisions.push(Decision::Skip { from, to: node });
                    }
                }
            }
        }
        Ok(Self { io, options, decisions })
    }

    /// Dense nodes: identity or width x {relu, tanh}.
    pub fn dense(io: IoShape, nodes: usize, widths: &[usize], activations: &[Activation]) -> Result<Self> {
        let mut opts = vec![LayerSpec::identity()];
        for &w in widths {
            for &a in activations {
                opts.push(LayerSpec::dense(w, a));
            }
        }
        Self::new(io, vec![opts; nodes], DEFAULT_SKIP_SPAN)
    }

    /// Stacked LSTM cells: identity or one of the hidden sizes.
    pub fn recurrent(io: IoShape, nodes: usize, widths: &[usize]) -> Result<Self> {
        let mut opts = vec![LayerSpec::identity()];
        opts.extend(widths.iter().map(|&w| LayerSpec::recurrent(w)));
        Self::new(io, vec![opts; nodes], DEFAULT_SKIP_SPAN)
    }

    pub fn dense_default(io: IoShape) -> Self {
        Self::dense(io, DEFAULT_NODES, &DEFAULT_WIDTHS, &[Activation::Relu, Activation::Tanh])
            .expect("default dense space is valid")
    }

    pub fn recurrent_default(io: IoShape) -> Self {
        Self::recurrent(io, DEFAULT_NODES, &DEFAULT_WIDTHS).expect("default recurrent space is valid")
    }

    pub fn io(&self) -> IoShape {
        self.io
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn variable_nodes(&self) -> usize {
        self.options.len()
    }

    pub fn option_count(&self, decision: usize) -> usize {
        match self.decisions[decision] {
            Decision::Layer(node) => self.options[node - 1].len(),
            Decision::Skip { .. } => 2,
        }
    }

    /// Number of distinct configurations (product of option counts).
    pub fn cardinality(&self) -> u128 {
        (0..self.decisions.len())
            .map(|d| self.option_count(d) as u128)
            .product()
    }

    pub fn skip_count(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| matches!(d, Decision::Skip { .. }))
            .count()
    }

    pub fn check(&self, cfg: &ArchConfig) -> Result<()> {
        if cfg.0.len() != self.decisions.len() {
            return Err(Error::dims(self.decisions.len(), cfg.0.len(), "architecture config length"));
        }
        for (d, &v) in cfg.0.iter().enumerate() {
            if v >= self.option_count(d) {
                return Err(Error::Config(format!(
                    "decision {d} has value {v} but only {} options",
                    self.option_count(d)
                )));
            }
        }
        Ok(())
    }

    /// Uniform draw per decision variable.
    pub fn random_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ArchConfig {
        ArchConfig(
            (0..self.decisions.len())
                .map(|d| rng.random_range(0..self.option_count(d)))
                .collect(),
        )
    }

    /// Changes exactly one decision variable to a different, uniformly chosen value.
    pub fn mutate<R: Rng + ?Sized>(&self, parent: &ArchConfig, rng: &mut R) -> Result<ArchConfig> {
        self.check(parent)?;
        let mut child = parent.clone();
        let d = rng.random_range(0..self.decisions.len());
        let n = self.option_count(d);
        // Draw from the n-1 other values.
        let pick = rng.random_range(0..n - 1);
        child.0[d] = if pick >= parent.0[d] { pick + 1 } else { pick };
        Ok(child)
    }

    /// Builds the network topology. Identity choices drop their layer; skip
    /// endpoints on dropped layers move to the nearest surviving earlier node
    /// (sources) or the next surviving node or head (destinations). Skips that
    /// collapse onto a consecutive pair or duplicate another are dropped.
    pub fn decode(&self, cfg: &ArchConfig) -> Result<NetworkSpec> {
        self.check(cfg)?;
        let n = self.options.len();
        let mut layers = Vec::new();
        // new_index[k] for graph node k (0..=n); None for dropped layers.
        let mut new_index = vec![None; n + 1];
        new_index[0] = Some(0);
        for (d, decision) in self.decisions.iter().enumerate() {
            if let Decision::Layer(node) = *decision {
                let layer = self.options[node - 1][cfg.0[d]];
                if layer.kind != LayerKind::Identity {
                    layers.push(layer);
                    new_index[node] = Some(layers.len());
                }
            }
        }
        let head = layers.len() + 1;
        let source = |k: usize| (0..=k).rev().find_map(|j| new_index[j]).unwrap_or(0);
        let dest = |k: usize| (k..=n).find_map(|j| new_index[j]).unwrap_or(head);

        let mut skips = BTreeSet::new();
        for (d, decision) in self.decisions.iter().enumerate() {
            if let Decision::Skip { from, to } = *decision {
                if cfg.0[d] == 1 {
                    let (s, t) = (source(from), dest(to));
                    if s + 1 < t {
                        skips.insert(SkipEdge { from: s, to: t });
                    }
                }
            }
        }
        let spec = NetworkSpec {
            input_dim: self.io.input_dim,
            seq_len: self.io.seq_len,
            output_dim: self.io.output_dim,
            layers,
            skips: skips.into_iter().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
