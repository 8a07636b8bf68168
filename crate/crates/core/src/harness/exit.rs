//! Extrinsic-information transfer of the inner detector.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::idd::{DetectorKind, SoftDetector};
use crate::modem::{LlrFrame, LlrRole};

use super::config::ExperimentConfig;
use super::link::{uncoded_use, Link, CODE_RATE};
use super::seeding::{stream, Purpose};
use super::{worker_pool, HarnessError, Result};

/// Channel uses handled by one random stream.
const CHUNK: usize = 512;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mutual information between a bit and a consistent Gaussian LLR
/// `L ~ N(σ²/2 · b, σ²)`:
/// `J(σ) = 1 - E[log2(1 + e^{-L}) | b = +1]`.
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    // Simpson's rule over L = σ²/2 + σ t, t within ±10 standard deviations.
    const N: usize = 2000;
    let (lo, hi) = (-10.0, 10.0);
    let h = (hi - lo) / N as f64;
    let f = |t: f64| {
        let l = 0.5 * sigma * sigma + sigma * t;
        (-0.5 * t * t).exp() * softplus(-l)
    };
    let mut acc = f(lo) + f(hi);
    for k in 1..N {
        acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let expectation = acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt();
    (1.0 - expectation / LN_2).clamp(0.0, 1.0)
}

/// Inverse of [`j_function`] by bisection. `I = 1` has no finite preimage.
pub fn j_inverse(mi: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&mi) {
        return Err(HarnessError::Exit(format!("I_A = {mi} outside [0, 1)")));
    }
    if mi == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while j_function(hi) < mi {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(HarnessError::Exit(format!("I_A = {mi} too close to 1")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < mi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Time-average estimate `1 - mean(log2(1 + e^{-b L}))` with `b = ±1`.
pub fn mutual_information(llrs: &[f64], signs: &[i8]) -> f64 {
    assert_eq!(llrs.len(), signs.len());
    if llrs.is_empty() {
        return 0.0;
    }
    1.0 - penalty_sum(llrs, signs) / (llrs.len() as f64 * LN_2)
}

fn penalty_sum(llrs: &[f64], signs: &[i8]) -> f64 {
    llrs.iter().zip(signs).map(|(&l, &b)| softplus(-(b as f64) * l)).sum()
}

/// A-priori LLRs of the consistent Gaussian model at spread `sigma`.
pub fn synthetic_apriori<R: Rng + ?Sized>(signs: &[i8], sigma: f64, rng: &mut R) -> Vec<f64> {
    signs
        .iter()
        .map(|&b| {
            let n: f64 = StandardNormal.sample(rng);
            0.5 * sigma * sigma * b as f64 + sigma * n
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitPoint {
    pub ia: f64,
    pub ie: f64,
    pub detector: DetectorKind,
    pub ebn0_db: f64,
}

/// `I_E` of `detector` for every `I_A` in `cfg.ia_grid` and every
/// `E_b/N_0` in `cfg.ebn0_db`, each from `cfg.uses` uncoded channel uses.
pub fn measure_exit(cfg: &ExperimentConfig, detector: DetectorKind) -> Result<Vec<ExitPoint>> {
    cfg.validate()?;
    if cfg.ia_grid.is_empty() {
        return Err(HarnessError::Config("empty I_A grid".into()));
    }
    let constellation = cfg.constellation().map_err(|e| HarnessError::Config(e.to_string()))?;
    let det = SoftDetector::new(detector, &constellation, cfg.n_t, cfg.pda_config(), cfg.pda_rule)?;
    let mb = constellation.bits_per_symbol();
    let chunks = cfg.uses.div_ceil(CHUNK);
    let pool = worker_pool(cfg.workers)?;
    let mut points = Vec::new();
    for (s, &ebn0_db) in cfg.ebn0_db.iter().enumerate() {
        let link = Link::new(cfg, Link::sigma2_for(cfg, ebn0_db, CODE_RATE))?;
        for (a, &ia) in cfg.ia_grid.iter().enumerate() {
            let sigma_a = j_inverse(ia)?;
            let point = s * cfg.ia_grid.len() + a;
            let partial: Vec<(f64, usize)> = pool.install(|| {
                (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = stream(cfg.seed, Purpose::Exit, point, c as u64);
                        let n = CHUNK.min(cfg.uses - c * CHUNK);
                        let mut sum = 0.0;
                        let mut count = 0;
                        for _ in 0..n {
                            let (signs, obs) = uncoded_use(&link, &constellation, &mut rng)?;
                            let la = synthetic_apriori(&signs, sigma_a, &mut rng);
                            let la = LlrFrame::new(la, LlrRole::APriori, mb)?;
                            let (le, _) = det.detect(&obs.y, &obs.h_est, link.sigma2(), &la)?;
                            sum += penalty_sum(le.values(), &signs);
                            count += signs.len();
                        }
                        Ok((sum, count))
                    })
                    .collect::<Result<_>>()
            })?;
            let (sum, count) = partial.iter().fold((0.0, 0), |(s, c), &(ps, pc)| (s + ps, c + pc));
            points.push(ExitPoint {
                ia,
                ie: 1.0 - sum / (count as f64 * LN_2),
                detector,
                ebn0_db,
            });
        }
    }
    Ok(points)
}
