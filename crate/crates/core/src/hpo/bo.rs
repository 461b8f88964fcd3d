use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gp::GaussianProcess;
use super::{HyperConfig, HyperSpace};
use crate::error::{Error, Result};

/// Imputed objective for pending points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiarStrategy {
    Min,
    #[default]
    Mean,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub kappa: f64,
    pub liar: LiarStrategy,
    pub pool_size: usize,
    pub length_scale: f64,
    pub jitter: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            kappa: 1.96,
            liar: LiarStrategy::Mean,
            pool_size: 512,
            length_scale: 0.3,
            jitter: 1e-6,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.pool_size == 0 || !(self.length_scale > 0.0) || !(self.jitter > 0.0) {
            return Err(Error::Config("pool size, length scale and jitter must be positive".into()));
        }
        Ok(())
    }
}

/// Upper confidence bound `mu + kappa * sigma`.
pub fn ucb(mu: f64, sigma: f64, kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(mu + kappa * sigma)
}

/// Asynchronous BO state: true observations, pending points carrying a liar value,
/// and the surrogate fitted to both. Objectives are maximized.
#[derive(Clone, Debug)]
pub struct BayesOpt {
    space: HyperSpace,
    cfg: BoConfig,
    observed: Vec<(HyperConfig, f64)>,
    pending: Vec<HyperConfig>,
    surrogate: Option<GaussianProcess>,
}

impl BayesOpt {
    pub fn new(space: HyperSpace, cfg: BoConfig) -> Result<Self> {
        space.validate()?;
        cfg.validate()?;
        Ok(Self {
            space,
            cfg,
            observed: Vec::new(),
            pending: Vec::new(),
            surrogate: None,
        })
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    pub fn config(&self) -> &BoConfig {
        &self.cfg
    }

    pub fn observations(&self) -> &[(HyperConfig, f64)] {
        &self.observed
    }

    pub fn pending(&self) -> &[HyperConfig] {
        &self.pending
    }

    pub fn liar_count(&self) -> usize {
        self.pending.len()
    }

    /// The value imputed at pending points, or `None` before any observation.
    pub fn liar_value(&self) -> Option<f64> {
        let ys = self.observed.iter().map(|o| o.1);
        match self.cfg.liar {
            _ if self.observed.is_empty() => None,
            LiarStrategy::Mean => Some(ys.sum::<f64>() / self.observed.len() as f64),
            LiarStrategy::Min => ys.reduce(f64::min),
            LiarStrategy::Max => ys.reduce(f64::max),
        }
    }

    fn refit(&mut self) -> Result<()> {
        let Some(liar) = self.liar_value() else {
            self.surrogate = None;
            return Ok(());
        };
        let mut xs = Vec::with_capacity(self.observed.len() + self.pending.len());
        let mut ys = Vec::with_capacity(xs.capacity());
        for (c, y) in &self.observed {
            xs.push(self.space.encode(c)?.to_vec());
            ys.push(*y);
        }
        for c in &self.pending {
            xs.push(self.space.encode(c)?.to_vec());
            ys.push(liar);
        }
        self.surrogate = Some(GaussianProcess::fit(xs, &ys, self.cfg.length_scale, self.cfg.jitter)?);
        Ok(())
    }

    /// Records a finished evaluation and drops one matching pending entry.
    pub fn tell(&mut self, cfg: HyperConfig, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::Domain(format!("non-finite score {score}")));
        }
        self.space.encode(&cfg)?;
        if let Some(i) = self.pending.iter().position(|p| *p == cfg) {
            self.pending.remove(i);
        }
        self.observed.push((cfg, score));
        self.refit()
    }

    /// Drops the pending entry of an evaluation that will never be told.
    pub fn forget(&mut self, cfg: &HyperConfig) -> Result<bool> {
        match self.pending.iter().position(|p| p == cfg) {
            Some(i) => {
                self.pending.remove(i);
                self.refit()?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Posterior mean and standard deviation, or `None` before any observation.
    pub fn predict(&self, cfg: &HyperConfig) -> Result<Option<(f64, f64)>> {
        let x = self.space.encode(cfg)?;
        Ok(self.surrogate.as_ref().map(|gp| gp.predict(&x)))
    }

    pub fn acquisition(&self, cfg: &HyperConfig) -> Result<Option<f64>> {
        match self.predict(cfg)? {
            Some((m, s)) => ucb(m, s, self.cfg.kappa).map(Some),
            None => Ok(None),
        }
    }

    /// Index of the candidate with the highest UCB, skipping `exclude`. First wins ties.
    pub fn best_candidate(&self, candidates: &[HyperConfig], exclude: &[HyperConfig]) -> Result<Option<usize>> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if exclude.contains(c) {
                continue;
            }
            let score = self.acquisition(c)?.unwrap_or(0.0);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        Ok(best.map(|b| b.0))
    }

    /// Proposes `q` distinct configurations with the constant-liar scheme and
    /// registers each as pending.
    pub fn ask<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<Vec<HyperConfig>> {
        if q == 0 {
            return Err(Error::Contract("ask requires q >= 1".into()));
        }
        let mut picks: Vec<HyperConfig> = Vec::with_capacity(q);
        while picks.len() < q {
            let pick = if self.surrogate.is_none() {
                let c = self.space.sample(rng);
                if picks.contains(&c) {
                    continue;
                }
                c
            } else {
                let pool: Vec<HyperConfig> = (0..self.cfg.pool_size).map(|_| self.space.sample(rng)).collect();
                match self.best_candidate(&pool, &picks)? {
                    Some(i) => pool[i],
                    None => continue,
                }
            };
            picks.push(pick);
            self.pending.push(pick);
            self.refit()?;
        }
        Ok(picks)
    }
}
