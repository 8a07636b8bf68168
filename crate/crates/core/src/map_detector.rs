//! Candidate-search MAP detectors (exact Jacobian and max-log folding) and
//! the brute-force symbol posterior.

use num_complex::Complex64;
use thiserror::Error;

use crate::modem::{Constellation, LlrFrame, LlrRole, ModemError, SymbolProbMatrix};
use crate::numerics::{ComplexMatrix, ComplexVector, LogSumMode, OpCount};

/// Largest candidate set the enumerating detectors accept.
pub const MAX_CANDIDATES: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("{order}^{n_t} candidates exceeds the limit of {MAX_CANDIDATES}")]
    TooLarge { order: usize, n_t: usize },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

pub type Result<T> = std::result::Result<T, MapError>;

/// Every transmit vector for a given constellation and antenna count,
/// stored as point indices and as `+1/-1` bit vectors. Candidate `c` has
/// symbol `k` equal to digit `k` of `c` in base `M`, most significant
/// first.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    constellation: Constellation,
    n_t: usize,
    indices: Vec<usize>,
    bits: Vec<i8>,
}

impl CandidateTable {
    pub fn new(constellation: &Constellation, n_t: usize) -> Result<Self> {
        let order = constellation.order();
        let count = (0..n_t)
            .try_fold(1usize, |acc, _| acc.checked_mul(order).filter(|&v| v <= MAX_CANDIDATES))
            .ok_or(MapError::TooLarge { order, n_t })?;
        if n_t == 0 {
            return Err(MapError::Dimensions("no transmit antennas".into()));
        }
        let mb = constellation.bits_per_symbol();
        let mut indices = Vec::with_capacity(count * n_t);
        let mut bits = Vec::with_capacity(count * n_t * mb);
        for c in 0..count {
            let mut rest = c;
            let mut digits = vec![0; n_t];
            for k in (0..n_t).rev() {
                digits[k] = rest % order;
                rest /= order;
            }
            for &m in &digits {
                bits.extend_from_slice(constellation.label(m));
            }
            indices.extend(digits);
        }
        Ok(Self {
            constellation: constellation.clone(),
            n_t,
            indices,
            bits,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len() / self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn symbol_indices(&self, c: usize) -> &[usize] {
        &self.indices[c * self.n_t..(c + 1) * self.n_t]
    }

    pub fn bit_vector(&self, c: usize) -> &[i8] {
        let w = self.n_t * self.constellation.bits_per_symbol();
        &self.bits[c * w..(c + 1) * w]
    }

    /// `Hs` for every candidate, with the real multiplications counted.
    fn products(&self, h: &ComplexMatrix, ops: &mut OpCount) -> Vec<Complex64> {
        let n_r = h.rows();
        let mut out = Vec::with_capacity(self.len() * n_r);
        for c in 0..self.len() {
            let idx = self.symbol_indices(c);
            for r in 0..n_r {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &m) in idx.iter().enumerate() {
                    acc += h.get(r, k) * self.constellation.point(m);
                }
                out.push(acc);
            }
        }
        ops.add(4 * n_r * self.n_t * self.len());
        out
    }

    /// `-||y - Hs||^2 / (2σ²)` for every candidate.
    fn log_likelihoods(
        &self,
        y: &ComplexVector,
        h: &ComplexMatrix,
        sigma2: f64,
        ops: &mut OpCount,
    ) -> Result<Vec<f64>> {
        if h.cols() != self.n_t || y.len() != h.rows() {
            return Err(MapError::Dimensions(format!(
                "{}x{} channel, received length {}, table for {} antennas",
                h.rows(),
                h.cols(),
                y.len(),
                self.n_t
            )));
        }
        let n_r = h.rows();
        let hs = self.products(h, ops);
        let scale = -0.5 / sigma2;
        let out = hs
            .chunks(n_r)
            .map(|col| {
                scale
                    * col
                        .iter()
                        .zip(y.as_slice())
                        .map(|(a, b)| (b - a).norm_sqr())
                        .sum::<f64>()
            })
            .collect::<Vec<f64>>();
        ops.add(self.len() * (2 * n_r + 1) + 1);
        Ok(out)
    }
}

/// Extrinsic and a-posteriori bit LLRs of a MAP detector.
#[derive(Debug, Clone)]
pub struct MapOutput {
    pub extrinsic: LlrFrame,
    pub aposteriori: LlrFrame,
    pub ops: OpCount,
}

/// Candidate-search detector; `mode` selects exact or max-log folding.
#[derive(Debug, Clone)]
pub struct MapDetector {
    table: CandidateTable,
    mode: LogSumMode,
}

impl MapDetector {
    pub fn new(constellation: &Constellation, n_t: usize, mode: LogSumMode) -> Result<Self> {
        Ok(Self {
            table: CandidateTable::new(constellation, n_t)?,
            mode,
        })
    }

    pub fn table(&self) -> &CandidateTable {
        &self.table
    }

    pub fn mode(&self) -> LogSumMode {
        self.mode
    }

    /// For each bit `k`: fold `metric(b) - ½ b_k L_A(b_k)` over the
    /// candidates with `b_k = +1` and with `b_k = -1` and take the
    /// difference. The a-posteriori LLRs use the full prior term.
    pub fn detect(&self, y: &ComplexVector, h: &ComplexMatrix, sigma2: f64, apriori: &LlrFrame) -> Result<MapOutput> {
        let mb = self.table.constellation.bits_per_symbol();
        let width = self.table.n_t * mb;
        if apriori.len() != width || apriori.bits_per_symbol() != mb {
            return Err(MapError::Dimensions(format!(
                "{} a-priori LLRs for {width} bits per channel use",
                apriori.len()
            )));
        }
        let mut ops = OpCount::default();
        let la = apriori.values();
        let mut metric = self.table.log_likelihoods(y, h, sigma2, &mut ops)?;
        for (c, m) in metric.iter_mut().enumerate() {
            let prior: f64 = self
                .table
                .bit_vector(c)
                .iter()
                .zip(la)
                .map(|(&b, &l)| f64::from(b) * l)
                .sum();
            *m += 0.5 * prior;
        }
        ops.add(metric.len());

        let mut ext = Vec::with_capacity(width);
        let mut post = Vec::with_capacity(width);
        for k in 0..width {
            let (mut dp, mut dm) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let (mut ep, mut em) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let own = 0.5 * la[k];
            for (c, &m) in metric.iter().enumerate() {
                if self.table.bit_vector(c)[k] > 0 {
                    dp = self.mode.combine(dp, m);
                    ep = self.mode.combine(ep, m - own);
                } else {
                    dm = self.mode.combine(dm, m);
                    em = self.mode.combine(em, m + own);
                }
            }
            post.push(dp - dm);
            ext.push(ep - em);
        }
        Ok(MapOutput {
            extrinsic: LlrFrame::new(ext, LlrRole::Extrinsic, mb)?,
            aposteriori: LlrFrame::new(post, LlrRole::APosteriori, mb)?,
            ops,
        })
    }
}

pub fn exact_log_map(
    constellation: &Constellation,
    y: &ComplexVector,
    h: &ComplexMatrix,
    sigma2: f64,
    apriori: &LlrFrame,
) -> Result<MapOutput> {
    MapDetector::new(constellation, h.cols(), LogSumMode::Exact)?.detect(y, h, sigma2, apriori)
}

pub fn max_log_map(
    constellation: &Constellation,
    y: &ComplexVector,
    h: &ComplexMatrix,
    sigma2: f64,
    apriori: &LlrFrame,
) -> Result<MapOutput> {
    MapDetector::new(constellation, h.cols(), LogSumMode::MaxLog)?.detect(y, h, sigma2, apriori)
}

/// Exact marginals `P(s_i = a_m | y)` under independent symbol priors.
pub fn true_posterior_marginals(
    constellation: &Constellation,
    y: &ComplexVector,
    h: &ComplexMatrix,
    sigma2: f64,
    priors: &SymbolProbMatrix,
) -> Result<SymbolProbMatrix> {
    let table = CandidateTable::new(constellation, h.cols())?;
    if priors.n_t() != h.cols() || priors.order() != constellation.order() {
        return Err(MapError::Dimensions(format!(
            "{}x{} prior matrix for {} antennas",
            priors.n_t(),
            priors.order(),
            h.cols()
        )));
    }
    let mut log_w = table.log_likelihoods(y, h, sigma2, &mut OpCount::default())?;
    for (c, w) in log_w.iter_mut().enumerate() {
        *w += table
            .symbol_indices(c)
            .iter()
            .enumerate()
            .map(|(k, &m)| priors.row(k)[m].ln())
            .sum::<f64>();
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let order = constellation.order();
    let n_t = h.cols();
    let mut data = vec![0.0; n_t * order];
    for (c, w) in log_w.iter().enumerate() {
        let p = (w - top).exp();
        for (k, &m) in table.symbol_indices(c).iter().enumerate() {
            data[k * order + m] += p;
        }
    }
    Ok(SymbolProbMatrix::from_rows(n_t, order, data))
}

/// Analytic real-operation count of one candidate search:
/// `M^{N_t} (4 N_r N_t + 6 N_r)`.
pub fn analytic_search_ops(n_t: usize, n_r: usize, order: usize) -> u64 {
    (order as u64).pow(n_t as u32) * (4 * n_r * n_t + 6 * n_r) as u64
}
