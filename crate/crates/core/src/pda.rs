//! Approximate-Bayesian log-domain probabilistic data association detector.
//!
//! For every transmit symbol `s_i` the interference-plus-noise term
//! `v_i = sum_{k != i} s_k h_k + n` is modelled as one improper complex
//! Gaussian whose mean, covariance and pseudo-covariance come from the
//! current symbol probabilities of the *other* symbols. The likelihood of
//! `y | s_i = a_m` is then evaluated through the real composite covariance
//! `Λ_i`, shifted by its maximum for numerical stability and normalised in
//! the log domain. The output row is a normalised symbol likelihood: the
//! prior of `s_i` itself never enters row `i`.
//!
//! The bit LLRs produced from those rows are handed to the decoder as they
//! are, without subtracting the a-priori LLRs.

use num_complex::Complex64;
use thiserror::Error;

use crate::modem::{
    apriori_llrs_to_symbol_probs, log_probs_to_bit_llrs, normalize_row, symbol_probs_to_bit_llrs, Constellation,
    LlrFrame, LlrRole, ModemError, SymbolProbMatrix,
};
use crate::numerics::{
    compose_covariance, max_star_maxlog, pd_inverse_counted, quadratic_form_counted, rank_two_update, ComplexMatrix,
    ComplexVector, LogSumMode, NumericsError, OpCount, RankTwoTerm, RealMatrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdaError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

pub type Result<T> = std::result::Result<T, PdaError>;

/// Order in which rows of the probability matrix are refreshed within a
/// sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Every row of a sweep is computed from the matrix as it stood at the
    /// start of the sweep.
    #[default]
    Parallel,
    /// Row `i` sees the rows `0..i` already refreshed in the same sweep.
    Serial,
}

impl std::str::FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "parallel" | "jacobi" => Ok(Schedule::Parallel),
            "serial" | "gauss-seidel" => Ok(Schedule::Serial),
            other => Err(format!("unknown schedule `{other}`")),
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::Parallel => write!(f, "parallel"),
            Schedule::Serial => write!(f, "serial"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdaConfig {
    /// Extra sweeps after the first one.
    pub inner_iterations: usize,
    /// `Exact` or `MaxLog`; `Table` is treated like `Exact` with a tabulated
    /// correction.
    pub log_sum: LogSumMode,
    pub schedule: Schedule,
    /// Derive every `Λ_i^{-1}` from one full inverse per sweep by a rank-2
    /// downdate instead of factorising each `Λ_i`.
    pub use_downdate_inverse: bool,
}

impl Default for PdaConfig {
    fn default() -> Self {
        Self {
            inner_iterations: 0,
            log_sum: LogSumMode::Exact,
            schedule: Schedule::Parallel,
            use_downdate_inverse: true,
        }
    }
}

/// Mean, variance and pseudo-variance of one symbol under a probability row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMoments {
    pub mean: Complex64,
    pub variance: f64,
    pub pseudo: Complex64,
}

pub fn symbol_moments(row: &[f64], constellation: &Constellation) -> SymbolMoments {
    symbol_moments_counted(row, constellation, &mut OpCount::default())
}

fn symbol_moments_counted(row: &[f64], constellation: &Constellation, ops: &mut OpCount) -> SymbolMoments {
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    let mut square = Complex64::new(0.0, 0.0);
    for (m, &p) in row.iter().enumerate() {
        mean += constellation.point(m) * p;
        second += constellation.abs_sqr()[m] * p;
        square += constellation.squares()[m] * p;
    }
    ops.add(5 * row.len() + 5);
    // The central sums are recovered from raw moments; tiny negative
    // round-off is clamped.
    let variance = (second - mean.norm_sqr()).max(0.0);
    let mut pseudo = square - mean * mean;
    if pseudo.norm() > variance {
        pseudo *= variance / pseudo.norm();
    }
    SymbolMoments { mean, variance, pseudo }
}

/// Complex-domain statistics of the interference-plus-noise term of symbol
/// `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceStats {
    pub mean: ComplexVector,
    pub covariance: ComplexMatrix,
    pub pseudo_covariance: ComplexMatrix,
}

/// `μ_i = Σ_{k≠i} E(s_k) h_k`, `Υ_i = Σ_{k≠i} C(s_k) h_k h_k^H + 2σ² I` and
/// `Ῡ_i = Σ_{k≠i} C_p(s_k) h_k h_k^T`.
pub fn interference_stats(
    i: usize,
    probs: &SymbolProbMatrix,
    h: &ComplexMatrix,
    sigma2: f64,
    constellation: &Constellation,
) -> Result<InterferenceStats> {
    check_dims(probs, h, constellation)?;
    let n_r = h.rows();
    let mut mean = vec![Complex64::new(0.0, 0.0); n_r];
    let mut cov = ComplexMatrix::identity(n_r).scale(2.0 * sigma2);
    let mut pseudo = ComplexMatrix::zeros(n_r, n_r);
    for k in (0..h.cols()).filter(|&k| k != i) {
        let mom = symbol_moments(probs.row(k), constellation);
        let col = h.column(k);
        for r in 0..n_r {
            mean[r] += mom.mean * col[r];
            for c in 0..n_r {
                cov.set(r, c, cov.get(r, c) + col[r] * col[c].conj() * mom.variance);
                pseudo.set(r, c, pseudo.get(r, c) + col[r] * col[c] * mom.pseudo);
            }
        }
    }
    Ok(InterferenceStats {
        mean: ComplexVector::new(mean)?,
        covariance: cov,
        pseudo_covariance: pseudo,
    })
}

/// Working state for one received vector.
#[derive(Debug, Clone)]
pub struct PdaState {
    pub probs: SymbolProbMatrix,
    pub moments: Vec<SymbolMoments>,
    /// `ψ_{m,i}` from the most recent update of each row.
    pub log_rows: Vec<Vec<f64>>,
    pub ops: OpCount,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct PdaOutput {
    pub probs: SymbolProbMatrix,
    /// Bit LLRs computed from the output rows; these are what the decoder
    /// receives.
    pub extrinsic: LlrFrame,
    /// Identical values tagged as a-posteriori.
    pub aposteriori: LlrFrame,
    pub ops: OpCount,
}

#[derive(Debug, Clone)]
pub struct PdaDetector {
    constellation: Constellation,
    config: PdaConfig,
}

impl PdaDetector {
    pub fn new(constellation: Constellation, config: PdaConfig) -> Self {
        Self { constellation, config }
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn config(&self) -> &PdaConfig {
        &self.config
    }

    /// Symbol probabilities and moments from the a-priori LLRs.
    pub fn init_state(&self, apriori: &LlrFrame) -> Result<PdaState> {
        let probs = apriori_llrs_to_symbol_probs(apriori, &self.constellation)?;
        let mut ops = OpCount::default();
        let moments = (0..probs.n_t())
            .map(|k| symbol_moments_counted(probs.row(k), &self.constellation, &mut ops))
            .collect();
        let order = self.constellation.order();
        let log_rows = (0..probs.n_t())
            .map(|k| probs.row(k).iter().map(|p| p.ln()).collect())
            .collect::<Vec<Vec<f64>>>();
        debug_assert!(log_rows.iter().all(|r: &Vec<f64>| r.len() == order));
        Ok(PdaState {
            probs,
            moments,
            log_rows,
            ops: OpCount::default(),
            sweeps: 0,
        })
    }

    /// Recomputes row `i` from the moments of the other rows held in
    /// `state`, assembling and factorising `Λ_i` directly. The state's row,
    /// log-row and moments for `i` are replaced.
    pub fn symbol_update(
        &self,
        i: usize,
        y: &ComplexVector,
        h: &ComplexMatrix,
        sigma2: f64,
        state: &mut PdaState,
    ) -> Result<Vec<f64>> {
        check_dims(&state.probs, h, &self.constellation)?;
        check_observation(y, h)?;
        let columns: Vec<Vec<Complex64>> = (0..h.cols()).map(|k| h.column(k)).collect();
        let mut ops = OpCount::default();
        let mu_total = total_mean(&columns, &state.moments, &mut ops);
        let inverse = direct_inverse(i, &columns, &state.moments, sigma2, &mut ops)?;
        let (row, log_row) = self.row_from_inverse(i, y, &columns, &state.moments, &mu_total, &inverse, &mut ops)?;
        state.ops += ops;
        self.commit_row(i, &row, log_row, state);
        Ok(row)
    }

    /// One pass over all rows according to the configured schedule.
    pub fn sweep(&self, y: &ComplexVector, h: &ComplexMatrix, sigma2: f64, state: &mut PdaState) -> Result<()> {
        check_dims(&state.probs, h, &self.constellation)?;
        check_observation(y, h)?;
        let n_t = h.cols();
        let columns: Vec<Vec<Complex64>> = (0..n_t).map(|k| h.column(k)).collect();
        let mut ops = OpCount::default();
        let mut moments = state.moments.clone();
        let mut mu_total = total_mean(&columns, &moments, &mut ops);
        let mut terms: Vec<RankTwoTerm> = columns
            .iter()
            .zip(&moments)
            .map(|(col, mom)| RankTwoTerm::new(col, mom.variance, mom.pseudo))
            .collect();
        let mut full_inverse = if self.config.use_downdate_inverse {
            let mut lambda = RealMatrix::scaled_identity(2 * h.rows(), 2.0 * sigma2);
            for t in &terms {
                t.accumulate(&mut lambda, 1.0, &mut ops);
            }
            Some(pd_inverse_counted(&lambda, &mut ops)?)
        } else {
            None
        };

        let mut fresh: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n_t);
        for i in 0..n_t {
            let inverse = match &full_inverse {
                Some(inv) => rank_two_update(inv, &terms[i], -1.0, &mut ops)?,
                None => direct_inverse(i, &columns, &moments, sigma2, &mut ops)?,
            };
            let (row, log_row) = self.row_from_inverse(i, y, &columns, &moments, &mu_total, &inverse, &mut ops)?;
            match self.config.schedule {
                Schedule::Parallel => fresh.push((row, log_row)),
                Schedule::Serial => {
                    let mom = symbol_moments_counted(&row, &self.constellation, &mut ops);
                    let delta = mom.mean - moments[i].mean;
                    for (mu, hk) in mu_total.iter_mut().zip(&columns[i]) {
                        *mu += delta * hk;
                    }
                    ops.add(4 * columns[i].len());
                    moments[i] = mom;
                    terms[i] = RankTwoTerm::new(&columns[i], mom.variance, mom.pseudo);
                    if full_inverse.is_some() {
                        full_inverse = Some(rank_two_update(&inverse, &terms[i], 1.0, &mut ops)?);
                    }
                    state.probs.set_row(i, &row);
                    state.log_rows[i] = log_row;
                }
            }
        }
        if self.config.schedule == Schedule::Parallel {
            for (i, (row, log_row)) in fresh.into_iter().enumerate() {
                moments[i] = symbol_moments_counted(&row, &self.constellation, &mut ops);
                state.probs.set_row(i, &row);
                state.log_rows[i] = log_row;
            }
        }
        state.moments = moments;
        state.ops += ops;
        state.sweeps += 1;
        Ok(())
    }

    /// Full detection: priors to probabilities, `1 + inner_iterations`
    /// sweeps, rows to bit LLRs.
    pub fn detect(&self, y: &ComplexVector, h: &ComplexMatrix, sigma2: f64, apriori: &LlrFrame) -> Result<PdaOutput> {
        let mut state = self.init_state(apriori)?;
        if state.probs.n_t() != h.cols() {
            return Err(PdaError::Dimensions(format!(
                "{} a-priori symbols for {} transmit antennas",
                state.probs.n_t(),
                h.cols()
            )));
        }
        for _ in 0..=self.config.inner_iterations {
            self.sweep(y, h, sigma2, &mut state)?;
        }
        self.finish(state)
    }

    /// Like [`detect`](Self::detect) but also returns the probability matrix
    /// before the first sweep and after every sweep.
    pub fn detect_traced(
        &self,
        y: &ComplexVector,
        h: &ComplexMatrix,
        sigma2: f64,
        apriori: &LlrFrame,
    ) -> Result<(PdaOutput, Vec<SymbolProbMatrix>)> {
        let mut state = self.init_state(apriori)?;
        let mut trace = vec![state.probs.clone()];
        for _ in 0..=self.config.inner_iterations {
            self.sweep(y, h, sigma2, &mut state)?;
            trace.push(state.probs.clone());
        }
        Ok((self.finish(state)?, trace))
    }

    fn finish(&self, state: PdaState) -> Result<PdaOutput> {
        let llrs = match self.config.log_sum {
            LogSumMode::MaxLog => log_probs_to_bit_llrs(&state.log_rows, &self.constellation, max_star_maxlog)?,
            _ => symbol_probs_to_bit_llrs(&state.probs, &self.constellation)?,
        };
        Ok(PdaOutput {
            probs: state.probs,
            extrinsic: llrs.clone().with_role(LlrRole::Extrinsic),
            aposteriori: llrs,
            ops: state.ops,
        })
    }

    fn commit_row(&self, i: usize, row: &[f64], log_row: Vec<f64>, state: &mut PdaState) {
        state.probs.set_row(i, row);
        state.log_rows[i] = log_row;
        state.moments[i] = symbol_moments(row, &self.constellation);
    }

    /// `w = y - a_m h_i - μ_i`, `β_m = -w^T Λ_i^{-1} w`, shift by the
    /// maximum, normalise in the log domain.
    #[allow(clippy::too_many_arguments)]
    fn row_from_inverse(
        &self,
        i: usize,
        y: &ComplexVector,
        columns: &[Vec<Complex64>],
        moments: &[SymbolMoments],
        mu_total: &[Complex64],
        inverse: &RealMatrix,
        ops: &mut OpCount,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n_r = y.len();
        let hi = &columns[i];
        // residual = y - μ_i, with μ_i = μ_total - E(s_i) h_i
        let mut residual = vec![0.0; 2 * n_r];
        for r in 0..n_r {
            let z = y[r] - mu_total[r] + moments[i].mean * hi[r];
            residual[r] = z.re;
            residual[n_r + r] = z.im;
        }
        ops.add(4 * n_r);
        let order = self.constellation.order();
        let mut beta = Vec::with_capacity(order);
        let mut w = vec![0.0; 2 * n_r];
        for m in 0..order {
            let a = self.constellation.point(m);
            for r in 0..n_r {
                let s = a * hi[r];
                w[r] = residual[r] - s.re;
                w[n_r + r] = residual[n_r + r] - s.im;
            }
            ops.add(4 * n_r);
            beta.push(quadratic_form_counted(&w, inverse, ops)?);
        }
        let gamma = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = beta.iter().map(|b| b - gamma).collect();
        let log_row: Vec<f64> = match self.config.log_sum {
            LogSumMode::MaxLog => shifted,
            mode => {
                let norm = mode.fold(shifted.iter().copied());
                shifted.iter().map(|b| b - norm).collect()
            }
        };
        let mut row: Vec<f64> = log_row.iter().map(|psi| psi.exp()).collect();
        normalize_row(&mut row);
        Ok((row, log_row))
    }
}

fn total_mean(columns: &[Vec<Complex64>], moments: &[SymbolMoments], ops: &mut OpCount) -> Vec<Complex64> {
    let n_r = columns[0].len();
    let mut mu = vec![Complex64::new(0.0, 0.0); n_r];
    for (col, mom) in columns.iter().zip(moments) {
        for (acc, hk) in mu.iter_mut().zip(col) {
            *acc += mom.mean * hk;
        }
    }
    ops.add(4 * n_r * columns.len());
    mu
}

/// `Λ_i^{-1}` by assembling `2σ² I + Σ_{k≠i} G_k D_k G_k^T` and factorising.
fn direct_inverse(
    i: usize,
    columns: &[Vec<Complex64>],
    moments: &[SymbolMoments],
    sigma2: f64,
    ops: &mut OpCount,
) -> Result<RealMatrix> {
    let n_r = columns[0].len();
    let mut lambda = RealMatrix::scaled_identity(2 * n_r, 2.0 * sigma2);
    for (k, (col, mom)) in columns.iter().zip(moments).enumerate() {
        if k != i {
            RankTwoTerm::new(col, mom.variance, mom.pseudo).accumulate(&mut lambda, 1.0, ops);
        }
    }
    Ok(pd_inverse_counted(&lambda, ops)?)
}

/// Composite covariance of symbol `i` built from the complex-domain
/// statistics.
pub fn composite_covariance(stats: &InterferenceStats) -> Result<RealMatrix> {
    Ok(compose_covariance(&stats.covariance, &stats.pseudo_covariance)?.into_matrix())
}

fn check_dims(probs: &SymbolProbMatrix, h: &ComplexMatrix, constellation: &Constellation) -> Result<()> {
    if probs.n_t() != h.cols() || probs.order() != constellation.order() {
        return Err(PdaError::Dimensions(format!(
            "{}x{} probability matrix, {}x{} channel, {}-point constellation",
            probs.n_t(),
            probs.order(),
            h.rows(),
            h.cols(),
            constellation.order()
        )));
    }
    Ok(())
}

fn check_observation(y: &ComplexVector, h: &ComplexMatrix) -> Result<()> {
    if y.len() != h.rows() {
        return Err(PdaError::Dimensions(format!(
            "received vector of length {} with {} receive antennas",
            y.len(),
            h.rows()
        )));
    }
    Ok(())
}

/// Analytic real-operation count of one sweep:
/// `4 M N_t N_r^2 + 2 M N_t N_r + 4 N_t N_r^2`.
pub fn analytic_sweep_ops(n_t: usize, n_r: usize, order: usize) -> u64 {
    let (t, r, m) = (n_t as u64, n_r as u64, order as u64);
    4 * m * t * r * r + 2 * m * t * r + 4 * t * r * r
}
