//! Inner-iteration behaviour of the PDA on an uncoded link.

use rayon::prelude::*;

use crate::idd::IddError;
use crate::modem::{symbol_probs_to_bit_llrs, LlrFrame, LlrRole};
use crate::pda::PdaDetector;

use super::config::ExperimentConfig;
use super::link::{uncoded_use, Link};
use super::seeding::{stream, Purpose};
use super::{worker_pool, HarnessError, Result};

const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub it_i: usize,
    pub bit_errors: u64,
    pub bits: u64,
    /// Mean of `ΔP` over symbols; `None` for `it_i = 0`, which has no
    /// previous iteration.
    pub mean_delta: Option<f64>,
    pub mean_abs_delta: Option<f64>,
    pub positive: usize,
    pub negative: usize,
    /// Symbols with `|ΔP| < ε`.
    pub below_epsilon: usize,
}

impl ProbeRow {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub epsilon: f64,
    pub rows: Vec<ProbeRow>,
    /// Per transmitted symbol, `ΔP` after sweeps `2..=it_i + 1`:
    /// the change of the probability assigned to the transmitted point.
    pub deltas: Vec<Vec<f64>>,
    /// Share of symbols whose `ΔP` trace takes both signs.
    pub fluctuating_fraction: f64,
}

/// Count of entries with `|ΔP| < ε` at each iteration.
pub fn classify(deltas: &[Vec<f64>], epsilon: f64, iterations: usize) -> Vec<usize> {
    (0..iterations)
        .map(|k| deltas.iter().filter(|d| d[k].abs() < epsilon).count())
        .collect()
}

struct ChunkResult {
    bit_errors: Vec<u64>,
    bits: u64,
    deltas: Vec<Vec<f64>>,
}

/// Uncoded PDA detection with zero priors and `cfg.inner_iterations`
/// extra sweeps at `cfg.ebn0_db[0]` (rate 1).
pub fn pda_convergence_probe(cfg: &ExperimentConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let constellation = cfg.constellation().map_err(|e| HarnessError::Config(e.to_string()))?;
    let det = PdaDetector::new(constellation.clone(), cfg.pda_config());
    let iterations = cfg.inner_iterations + 1;
    let mb = constellation.bits_per_symbol();
    let link = Link::new(cfg, Link::sigma2_for(cfg, cfg.ebn0_db[0], 1.0))?;
    let chunks = cfg.uses.div_ceil(CHUNK);
    let parts: Vec<ChunkResult> = worker_pool(cfg.workers)?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(cfg.seed, Purpose::Probe, 0, c as u64);
                let mut out = ChunkResult {
                    bit_errors: vec![0; iterations],
                    bits: 0,
                    deltas: Vec::new(),
                };
                let zero = LlrFrame::zeros(cfg.n_t * mb, LlrRole::APriori, mb)?;
                for _ in 0..CHUNK.min(cfg.uses - c * CHUNK) {
                    let (signs, obs) = uncoded_use(&link, &constellation, &mut rng)?;
                    let (_, trace) = det
                        .detect_traced(&obs.y, &obs.h_est, link.sigma2(), &zero)
                        .map_err(IddError::from)?;
                    for (k, probs) in trace[1..].iter().enumerate() {
                        let llrs = symbol_probs_to_bit_llrs(probs, &constellation)?;
                        out.bit_errors[k] += llrs
                            .values()
                            .iter()
                            .zip(&signs)
                            .filter(|(l, &b)| (**l >= 0.0) != (b > 0))
                            .count() as u64;
                    }
                    out.bits += signs.len() as u64;
                    for (i, label) in signs.chunks(mb).enumerate() {
                        let m = constellation.index_of(label)?;
                        let p: Vec<f64> = trace[1..].iter().map(|t| t.row(i)[m]).collect();
                        out.deltas.push(p.windows(2).map(|w| w[1] - w[0]).collect());
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()
    })?;

    let bits: u64 = parts.iter().map(|p| p.bits).sum();
    let deltas: Vec<Vec<f64>> = parts.iter().flat_map(|p| p.deltas.iter().cloned()).collect();
    let below = classify(&deltas, cfg.epsilon, iterations - 1);
    let rows = (0..iterations)
        .map(|k| {
            let bit_errors = parts.iter().map(|p| p.bit_errors[k]).sum();
            let (mut mean_delta, mut mean_abs_delta, mut positive, mut negative, mut below_epsilon) =
                (None, None, 0, 0, 0);
            if k > 0 && !deltas.is_empty() {
                let d: Vec<f64> = deltas.iter().map(|t| t[k - 1]).collect();
                let n = d.len() as f64;
                mean_delta = Some(d.iter().sum::<f64>() / n);
                mean_abs_delta = Some(d.iter().map(|v| v.abs()).sum::<f64>() / n);
                positive = d.iter().filter(|&&v| v > 0.0).count();
                negative = d.iter().filter(|&&v| v < 0.0).count();
                below_epsilon = below[k - 1];
            }
            ProbeRow {
                it_i: k,
                bit_errors,
                bits,
                mean_delta,
                mean_abs_delta,
                positive,
                negative,
                below_epsilon,
            }
        })
        .collect();
    let fluctuating = deltas
        .iter()
        .filter(|d| d.iter().any(|&v| v > 0.0) && d.iter().any(|&v| v < 0.0))
        .count();
    Ok(ProbeReport {
        epsilon: cfg.epsilon,
        rows,
        fluctuating_fraction: fluctuating as f64 / deltas.len().max(1) as f64,
        deltas,
    })
}
