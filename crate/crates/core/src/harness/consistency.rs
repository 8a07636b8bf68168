//! Consistency of soft outputs: for true-posterior LLRs
//! `ln p(L | b=+1) - ln p(L | b=-1) = L`.

use rayon::prelude::*;

use crate::idd::{DetectorKind, SoftDetector};
use crate::modem::{LlrFrame, LlrRole};

use super::config::ExperimentConfig;
use super::exit::{j_inverse, synthetic_apriori};
use super::link::{uncoded_use, Link, CODE_RATE};
use super::seeding::{stream, Purpose};
use super::{worker_pool, HarnessError, Result};

pub const MIN_SAMPLES: usize = 10_000;
const BINS: usize = 40;
/// Bins with fewer samples on either side are left out of the fit.
const MIN_BIN_COUNT: usize = 10;
const CHUNK: usize = 512;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyBin {
    pub center: f64,
    /// `ln(n₊/N₊) - ln(n₋/N₋)`; NaN when a side is empty.
    pub log_ratio: f64,
    pub count: usize,
    pub plus: usize,
    pub minus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub bins: Vec<ConsistencyBin>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% intervals.
    pub slope_ci: (f64, f64),
    pub intercept_ci: (f64, f64),
    pub samples: usize,
}

/// Histograms `L` separately for `b = +1` and `b = -1` over a symmetric
/// range, then fits `log_ratio = intercept + slope · L` by least squares
/// weighted with the inverse Poisson variance of each bin's log-ratio.
pub fn consistency_from_samples(llrs: &[f64], signs: &[i8]) -> Result<ConsistencyReport> {
    assert_eq!(llrs.len(), signs.len());
    if llrs.len() < MIN_SAMPLES {
        return Err(HarnessError::InsufficientSamples {
            got: llrs.len(),
            need: MIN_SAMPLES,
        });
    }
    let mut mags: Vec<f64> = llrs.iter().map(|l| l.abs()).filter(|l| l.is_finite()).collect();
    mags.sort_by(f64::total_cmp);
    let range = mags[(mags.len() * 99) / 100].clamp(1e-3, 50.0);
    let width = 2.0 * range / BINS as f64;
    let mut plus = vec![0usize; BINS];
    let mut minus = vec![0usize; BINS];
    for (&l, &b) in llrs.iter().zip(signs) {
        if !(l.abs() < range) {
            continue;
        }
        let k = (((l + range) / width) as usize).min(BINS - 1);
        if b > 0 {
            plus[k] += 1;
        } else {
            minus[k] += 1;
        }
    }
    let n_plus = signs.iter().filter(|&&b| b > 0).count().max(1) as f64;
    let n_minus = (signs.len() as f64 - n_plus).max(1.0);
    let bins: Vec<ConsistencyBin> = (0..BINS)
        .map(|k| {
            let (p, m) = (plus[k], minus[k]);
            let log_ratio = if p > 0 && m > 0 {
                (p as f64 / n_plus).ln() - (m as f64 / n_minus).ln()
            } else {
                f64::NAN
            };
            ConsistencyBin {
                center: -range + (k as f64 + 0.5) * width,
                log_ratio,
                count: p + m,
                plus: p,
                minus: m,
            }
        })
        .collect();

    let fit: Vec<(f64, f64, f64)> = bins
        .iter()
        .filter(|b| b.plus >= MIN_BIN_COUNT && b.minus >= MIN_BIN_COUNT)
        .map(|b| {
            (
                b.center,
                b.log_ratio,
                1.0 / (1.0 / b.plus as f64 + 1.0 / b.minus as f64),
            )
        })
        .collect();
    if fit.len() < 3 {
        return Err(HarnessError::InsufficientSamples {
            got: fit.len(),
            need: 3,
        });
    }
    let sw: f64 = fit.iter().map(|f| f.2).sum();
    let mx = fit.iter().map(|f| f.2 * f.0).sum::<f64>() / sw;
    let my = fit.iter().map(|f| f.2 * f.1).sum::<f64>() / sw;
    let sxx: f64 = fit.iter().map(|f| f.2 * (f.0 - mx).powi(2)).sum();
    let sxy: f64 = fit.iter().map(|f| f.2 * (f.0 - mx) * (f.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = fit.iter().map(|f| f.2 * (f.1 - intercept - slope * f.0).powi(2)).sum();
    let s2 = rss / (fit.len() - 2) as f64;
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    Ok(ConsistencyReport {
        bins,
        slope,
        intercept,
        slope_ci: (slope - Z95 * se_slope, slope + Z95 * se_slope),
        intercept_ci: (intercept - Z95 * se_intercept, intercept + Z95 * se_intercept),
        samples: llrs.len(),
    })
}

/// Extrinsic LLRs of `detector` over `cfg.uses` uncoded channel uses at
/// `cfg.ebn0_db[0]`, with consistent Gaussian priors of information `ia`.
pub fn collect_llrs(cfg: &ExperimentConfig, detector: DetectorKind, ia: f64) -> Result<(Vec<f64>, Vec<i8>)> {
    cfg.validate()?;
    let constellation = cfg.constellation().map_err(|e| HarnessError::Config(e.to_string()))?;
    let det = SoftDetector::new(detector, &constellation, cfg.n_t, cfg.pda_config(), cfg.pda_rule)?;
    let mb = constellation.bits_per_symbol();
    let link = Link::new(cfg, Link::sigma2_for(cfg, cfg.ebn0_db[0], CODE_RATE))?;
    let sigma_a = j_inverse(ia)?;
    let chunks = cfg.uses.div_ceil(CHUNK);
    let parts: Vec<(Vec<f64>, Vec<i8>)> = worker_pool(cfg.workers)?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(cfg.seed, Purpose::Consistency, 0, c as u64);
                let mut llrs = Vec::new();
                let mut bits = Vec::new();
                for _ in 0..CHUNK.min(cfg.uses - c * CHUNK) {
                    let (signs, obs) = uncoded_use(&link, &constellation, &mut rng)?;
                    let la = LlrFrame::new(synthetic_apriori(&signs, sigma_a, &mut rng), LlrRole::APriori, mb)?;
                    let (le, _) = det.detect(&obs.y, &obs.h_est, link.sigma2(), &la)?;
                    llrs.extend(le.values());
                    bits.extend(signs);
                }
                Ok((llrs, bits))
            })
            .collect::<Result<_>>()
    })?;
    Ok(parts.into_iter().fold((vec![], vec![]), |(mut l, mut b), (pl, pb)| {
        l.extend(pl);
        b.extend(pb);
        (l, b)
    }))
}

pub fn consistency_test(cfg: &ExperimentConfig, detector: DetectorKind, ia: f64) -> Result<ConsistencyReport> {
    let (llrs, signs) = collect_llrs(cfg, detector, ia)?;
    consistency_from_samples(&llrs, &signs)
}
