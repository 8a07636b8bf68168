//! Flat `key=value` experiment configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::channel::FadingPolicy;
use crate::idd::{DetectorKind, IddConfig, PdaExtrinsicRule};
use crate::modem::{build_constellation, Constellation, ModulationKind};
use crate::numerics::LogSumMode;
use crate::pda::{PdaConfig, Schedule};
use crate::turbo::TurboCodeSpec;

use super::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub modulation: ModulationKind,
    pub order: usize,
    pub nakagami_m: f64,
    pub omega: f64,
    /// CSI accuracy; 1 means perfect channel knowledge.
    pub rho: f64,
    pub fading: FadingPolicy,
    pub ebn0_db: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub turbo_iterations: usize,
    pub info_len: usize,
    pub decoder_log_sum: LogSumMode,
    pub detector: DetectorKind,
    pub schedule: Schedule,
    pub pda_rule: PdaExtrinsicRule,
    pub pda_log_sum: LogSumMode,
    pub downdate: bool,
    pub min_frame_errors: usize,
    pub max_frames: usize,
    /// Frames simulated between two stop-rule checks.
    pub batch: usize,
    pub seed: u64,
    /// 0 picks the number of available cores.
    pub workers: usize,
    pub out: PathBuf,
    /// A-priori mutual information grid for EXIT measurements.
    pub ia_grid: Vec<f64>,
    /// Channel uses per point for EXIT, consistency and probe runs.
    pub uses: usize,
    /// Convergence threshold of the PDA probe.
    pub epsilon: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_t: 2,
            n_r: 2,
            modulation: ModulationKind::Qam,
            order: 4,
            nakagami_m: 1.0,
            omega: 1.0,
            rho: 1.0,
            fading: FadingPolicy::PerUse,
            ebn0_db: vec![1.5],
            outer_iterations: 3,
            inner_iterations: 0,
            turbo_iterations: 4,
            info_len: 2400,
            decoder_log_sum: LogSumMode::Table,
            detector: DetectorKind::AbLogPda,
            schedule: Schedule::Parallel,
            pda_rule: PdaExtrinsicRule::NormalizedLikelihood,
            pda_log_sum: LogSumMode::Exact,
            downdate: true,
            min_frame_errors: 100,
            max_frames: 20_000,
            batch: 32,
            seed: 1,
            workers: 0,
            out: PathBuf::from("results"),
            ia_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.99],
            uses: 20_000,
            epsilon: 1e-3,
        }
    }
}

/// Every key accepted by [`ExperimentConfig::set`], in echo order.
pub const KEYS: &[&str] = &[
    "nt",
    "nr",
    "modulation",
    "order",
    "m",
    "omega",
    "rho",
    "fading",
    "ebn0",
    "it_o",
    "it_i",
    "it_tc",
    "info_len",
    "decoder_log_sum",
    "detector",
    "schedule",
    "pda_rule",
    "pda_log_sum",
    "downdate",
    "min_frame_errors",
    "max_frames",
    "batch",
    "seed",
    "workers",
    "out",
    "ia",
    "uses",
    "epsilon",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| HarnessError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse(key, t))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one field from its textual form. Accepts a few aliases
    /// (`n_t`, `outer_iterations`, ...).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "nt" | "n_t" => self.n_t = parse(&key, value)?,
            "nr" | "n_r" => self.n_r = parse(&key, value)?,
            "modulation" => self.modulation = parse(&key, value)?,
            "order" | "m_order" => self.order = parse(&key, value)?,
            "m" | "nakagami_m" => self.nakagami_m = parse(&key, value)?,
            "omega" => self.omega = parse(&key, value)?,
            "rho" => self.rho = parse(&key, value)?,
            "fading" => self.fading = parse(&key, value)?,
            "ebn0" | "ebn0_db" => self.ebn0_db = parse_list(&key, value)?,
            "it_o" | "outer_iterations" => self.outer_iterations = parse(&key, value)?,
            "it_i" | "inner_iterations" => self.inner_iterations = parse(&key, value)?,
            "it_tc" | "turbo_iterations" => self.turbo_iterations = parse(&key, value)?,
            "info_len" => self.info_len = parse(&key, value)?,
            "decoder_log_sum" => self.decoder_log_sum = parse(&key, value)?,
            "detector" => self.detector = parse(&key, value)?,
            "schedule" => self.schedule = parse(&key, value)?,
            "pda_rule" => self.pda_rule = parse(&key, value)?,
            "pda_log_sum" => self.pda_log_sum = parse(&key, value)?,
            "downdate" => self.downdate = parse(&key, value)?,
            "min_frame_errors" => self.min_frame_errors = parse(&key, value)?,
            "max_frames" => self.max_frames = parse(&key, value)?,
            "batch" => self.batch = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "workers" => self.workers = parse(&key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "ia" | "ia_grid" => self.ia_grid = parse_list(&key, value)?,
            "uses" => self.uses = parse(&key, value)?,
            "epsilon" => self.epsilon = parse(&key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat text file: one `key = value` per line, `#` starts a
    /// comment, blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.n_t == 0 || self.n_r == 0 {
            return fail(format!(
                "antenna counts must be positive, got {}x{}",
                self.n_t, self.n_r
            ));
        }
        if let Err(e) = self.constellation() {
            return fail(e.to_string());
        }
        if !(self.nakagami_m >= 0.5) || !self.nakagami_m.is_finite() {
            return fail(format!("Nakagami m must be finite and >= 0.5, got {}", self.nakagami_m));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return fail(format!("omega must be positive, got {}", self.omega));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.ebn0_db.is_empty() {
            return fail("Eb/N0 sweep is empty".into());
        }
        if let Some(x) = self.ebn0_db.iter().find(|x| !x.is_finite()) {
            return fail(format!("Eb/N0 value {x} is not finite"));
        }
        if self.info_len < 2 {
            return fail(format!("info_len must be at least 2, got {}", self.info_len));
        }
        if self.turbo_iterations == 0 {
            return fail("it_tc must be at least 1".into());
        }
        if self.max_frames == 0 || self.batch == 0 {
            return fail("max_frames and batch must be positive".into());
        }
        if let Some(x) = self.ia_grid.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return fail(format!("I_A value {x} outside [0, 1)"));
        }
        if self.uses == 0 {
            return fail("uses must be positive".into());
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Unit average energy per transmit antenna.
    pub fn constellation(&self) -> std::result::Result<Constellation, crate::modem::ModemError> {
        build_constellation(self.modulation, self.order, 1.0)
    }

    pub fn pda_config(&self) -> PdaConfig {
        PdaConfig {
            inner_iterations: self.inner_iterations,
            log_sum: self.pda_log_sum,
            schedule: self.schedule,
            use_downdate_inverse: self.downdate,
        }
    }

    pub fn idd_config(&self) -> IddConfig {
        IddConfig {
            detector: self.detector,
            outer_iterations: self.outer_iterations,
            pda: self.pda_config(),
            pda_rule: self.pda_rule,
            turbo: TurboCodeSpec {
                info_len: self.info_len,
                iterations: self.turbo_iterations,
                log_sum: self.decoder_log_sum,
                ..Default::default()
            },
        }
    }

    /// `(key, value)` for every field, in [`KEYS`] order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.n_t.to_string(),
            self.n_r.to_string(),
            self.modulation.to_string(),
            self.order.to_string(),
            self.nakagami_m.to_string(),
            self.omega.to_string(),
            self.rho.to_string(),
            self.fading.to_string(),
            join(&self.ebn0_db),
            self.outer_iterations.to_string(),
            self.inner_iterations.to_string(),
            self.turbo_iterations.to_string(),
            self.info_len.to_string(),
            self.decoder_log_sum.to_string(),
            self.detector.to_string(),
            self.schedule.to_string(),
            self.pda_rule.to_string(),
            self.pda_log_sum.to_string(),
            self.downdate.to_string(),
            self.min_frame_errors.to_string(),
            self.max_frames.to_string(),
            self.batch.to_string(),
            self.seed.to_string(),
            self.workers.to_string(),
            self.out.display().to_string(),
            join(&self.ia_grid),
            self.uses.to_string(),
            self.epsilon.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// The text form read back by [`from_text`](Self::from_text).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
