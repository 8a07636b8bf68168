//! Instrumented real-operation counts beside the closed-form estimates.

use rand::Rng;

use crate::channel::{add_noise, NakagamiChannel, NoiseSpec};
use crate::idd::{DetectorKind, IddError};
use crate::map_detector::{analytic_search_ops, MapDetector};
use crate::modem::{build_constellation, map_bits, LlrFrame, LlrRole, ModulationKind};
use crate::numerics::LogSumMode;
use crate::pda::{analytic_sweep_ops, PdaConfig, PdaDetector};

use super::seeding::{stream, Purpose};
use super::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityRow {
    pub n_t: usize,
    pub n_r: usize,
    pub order: usize,
    pub detector: DetectorKind,
    /// Counted operations of one detector iteration (one PDA sweep, one
    /// full candidate search).
    pub counted_ops: u64,
    pub analytic_ops: u64,
}

impl ComplexityRow {
    pub fn ratio(&self) -> f64 {
        self.counted_ops as f64 / self.analytic_ops as f64
    }
}

/// One row per detector and `(N_t = N_r, M)` pair. The instance is a random
/// 4QAM/16QAM channel use with random priors; counts do not depend on the
/// data.
pub fn complexity_report(grid: &[(usize, usize)], pda: PdaConfig, seed: u64) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::new();
    for (g, &(n, order)) in grid.iter().enumerate() {
        let q =
            build_constellation(ModulationKind::Qam, order, 1.0).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mb = q.bits_per_symbol();
        let mut rng = stream(seed, Purpose::Complexity, g, 0);
        let h = NakagamiChannel::new(1.0, 1.0)?.sample(n, n, &mut rng)?;
        let signs: Vec<i8> = (0..n * mb).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let x = map_bits(&signs, &q)?;
        let y = add_noise(&h.mul_vec(&x).expect("square channel"), NoiseSpec::new(0.2)?, &mut rng);
        let la = LlrFrame::new(
            (0..n * mb).map(|_| rng.random_range(-3.0..3.0)).collect(),
            LlrRole::APriori,
            mb,
        )?;

        let pda_det = PdaDetector::new(
            q.clone(),
            PdaConfig {
                inner_iterations: 0,
                ..pda
            },
        );
        let pda_out = pda_det.detect(&y, &h, 0.2, &la).map_err(IddError::from)?;
        rows.push(ComplexityRow {
            n_t: n,
            n_r: n,
            order,
            detector: DetectorKind::AbLogPda,
            counted_ops: pda_out.ops.get(),
            analytic_ops: analytic_sweep_ops(n, n, order),
        });

        let map_det = MapDetector::new(&q, n, LogSumMode::Exact).map_err(IddError::from)?;
        let map_out = map_det.detect(&y, &h, 0.2, &la).map_err(IddError::from)?;
        rows.push(ComplexityRow {
            n_t: n,
            n_r: n,
            order,
            detector: DetectorKind::ExactLogMap,
            counted_ops: map_out.ops.get(),
            analytic_ops: analytic_search_ops(n, n, order),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert_eq!(analytic_sweep_ops(2, 2, 4), 192);
        assert_eq!(analytic_search_ops(2, 2, 4), 448);
    }

    #[test]
    fn counts_are_reproducible_and_data_independent() {
        let grid = [(2, 4), (2, 16), (3, 4)];
        let a = complexity_report(&grid, PdaConfig::default(), 1).unwrap();
        let b = complexity_report(&grid, PdaConfig::default(), 1).unwrap();
        let c = complexity_report(&grid, PdaConfig::default(), 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn map_count_tracks_its_formula() {
        let rows = complexity_report(&[(2, 4), (3, 4), (2, 16)], PdaConfig::default(), 3).unwrap();
        for r in rows.iter().filter(|r| r.detector == DetectorKind::ExactLogMap) {
            assert!((0.5..=2.0).contains(&r.ratio()), "{r:?}");
        }
    }
}
