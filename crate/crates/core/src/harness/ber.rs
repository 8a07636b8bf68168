//! Monte-Carlo bit and frame error rates of the full IDD chain.

use rand::Rng;
use rayon::prelude::*;

use crate::idd::IddSystem;
use crate::numerics::ComplexMatrix;

use super::config::ExperimentConfig;
use super::link::{Link, CODE_RATE};
use super::seeding::frame_rng;
use super::{worker_pool, HarnessError, Result};

/// Error tallies after one outer iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationCount {
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    /// Sum over frames of the squared per-frame bit-error count, for the
    /// frame-level standard error.
    pub sq_bit_errors: u64,
}

impl IterationCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        self.bit_errors as f64 / self.bits as f64
    }

    /// Standard error of [`ber`](Self::ber) treating frames as the
    /// independent samples.
    pub fn ber_std_error(&self, frames: u64, bits_per_frame: u64) -> f64 {
        if frames < 2 || bits_per_frame == 0 {
            return f64::INFINITY;
        }
        let n = frames as f64;
        let mean = self.bit_errors as f64 / n;
        let var = (self.sq_bit_errors as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt() / bits_per_frame as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    FrameErrors,
    MaxFrames,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::FrameErrors => "frame-errors",
            StopReason::MaxFrames => "max-frames",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub sigma2: f64,
    pub frames: u64,
    pub bits_per_frame: u64,
    /// Index `z` holds the tallies after outer iteration `z`.
    pub iterations: Vec<IterationCount>,
    pub stop: StopReason,
    /// Detector real operations over all frames and iterations.
    pub detector_ops: u64,
}

impl BerPoint {
    pub fn last(&self) -> &IterationCount {
        self.iterations.last().expect("at least one iteration")
    }

    pub fn ber(&self) -> f64 {
        self.last().ber()
    }

    pub fn ber_at(&self, iteration: usize) -> f64 {
        self.iterations[iteration].ber()
    }

    pub fn std_error_at(&self, iteration: usize) -> f64 {
        self.iterations[iteration].ber_std_error(self.frames, self.bits_per_frame)
    }

    pub fn frame_errors(&self) -> u64 {
        self.last().frame_errors
    }

    pub fn fer(&self) -> f64 {
        self.frame_errors() as f64 / self.frames as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub config: ExperimentConfig,
    pub points: Vec<BerPoint>,
}

/// Bit-error count of every outer iteration of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: Vec<u64>,
    pub detector_ops: u64,
}

/// Seed of the turbo and channel interleavers, shared by every SNR point.
fn system_seed(master: u64) -> u64 {
    master.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0x5851_f42d_4c95_7f2d
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<IddSystem> {
    cfg.validate()?;
    let constellation = cfg.constellation().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(IddSystem::new(
        constellation,
        cfg.n_t,
        cfg.n_r,
        cfg.idd_config(),
        system_seed(cfg.seed),
    )?)
}

/// Random information bits, encode, transmit, receive; deterministic in
/// `(master, snr_index, frame)`.
pub fn simulate_frame(
    system: &IddSystem,
    link: &Link,
    master: u64,
    snr_index: usize,
    frame: u64,
) -> Result<FrameOutcome> {
    let mut rng = frame_rng(master, snr_index, frame);
    let info: Vec<u8> = (0..system.config().turbo.info_len)
        .map(|_| rng.random_range(0..2))
        .collect();
    let xs = system.modulate(&info)?;
    let obs = link.transmit(&xs, &mut rng)?;
    let (ys, hs): (Vec<_>, Vec<ComplexMatrix>) = obs.into_iter().map(|o| (o.y, o.h_est)).unzip();
    let out = system.run_receiver(&ys, &hs, link.sigma2())?;
    let bit_errors = out
        .per_iteration
        .iter()
        .map(|d| d.iter().zip(&info).filter(|(a, b)| a != b).count() as u64)
        .collect();
    Ok(FrameOutcome {
        bit_errors,
        detector_ops: out.detector_ops.get(),
    })
}

/// Runs frames in batches until the last iteration has collected
/// `min_frame_errors` frame errors or `max_frames` frames were simulated.
/// Inside a batch the stop rule is applied in frame order, so the result
/// does not depend on the batch size or on the worker count.
pub fn run_point(cfg: &ExperimentConfig, system: &IddSystem, snr_index: usize, ebn0_db: f64) -> Result<BerPoint> {
    let sigma2 = Link::sigma2_for(cfg, ebn0_db, CODE_RATE);
    let link = Link::new(cfg, sigma2)?;
    let iterations = cfg.outer_iterations + 1;
    let bits_per_frame = cfg.info_len as u64;
    let mut counts = vec![IterationCount::default(); iterations];
    let mut frames = 0u64;
    let mut ops = 0u64;
    let max_frames = cfg.max_frames as u64;
    let min_errors = cfg.min_frame_errors as u64;
    let reached = |c: &[IterationCount]| min_errors > 0 && c[iterations - 1].frame_errors >= min_errors;
    while frames < max_frames && !reached(&counts) {
        let end = (frames + cfg.batch as u64).min(max_frames);
        let outcomes: Vec<FrameOutcome> = (frames..end)
            .into_par_iter()
            .map(|f| simulate_frame(system, &link, cfg.seed, snr_index, f))
            .collect::<Result<_>>()?;
        for o in outcomes {
            for (c, &e) in counts.iter_mut().zip(&o.bit_errors) {
                c.bit_errors += e;
                c.sq_bit_errors += e * e;
                c.bits += bits_per_frame;
                c.frame_errors += u64::from(e > 0);
            }
            ops += o.detector_ops;
            frames += 1;
            if reached(&counts) {
                break;
            }
        }
    }
    Ok(BerPoint {
        ebn0_db,
        sigma2,
        frames,
        bits_per_frame,
        iterations: counts.clone(),
        stop: if reached(&counts) {
            StopReason::FrameErrors
        } else {
            StopReason::MaxFrames
        },
        detector_ops: ops,
    })
}

pub fn run_ber_experiment(cfg: &ExperimentConfig) -> Result<BerReport> {
    let system = build_system(cfg)?;
    let points = worker_pool(cfg.workers)?.install(|| {
        cfg.ebn0_db
            .iter()
            .enumerate()
            .map(|(k, &db)| run_point(cfg, &system, k, db))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BerReport {
        config: cfg.clone(),
        points,
    })
}

/// `E_b/N_0` where a BER curve crosses `target`, interpolating
/// `log10(BER)` linearly between the two bracketing points. `None` if the
/// curve never goes from above to at-or-below the target.
pub fn crossing_db(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let log = |b: f64| b.max(1e-12).log10();
    points.windows(2).find_map(|w| {
        let ((x0, b0), (x1, b1)) = (w[0], w[1]);
        if b0 > target && b1 <= target {
            let t = (log(b0) - log(target)) / (log(b0) - log(b1));
            Some(x0 + t * (x1 - x0))
        } else {
            None
        }
    })
}
