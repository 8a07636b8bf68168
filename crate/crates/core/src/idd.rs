//! Outer detector/decoder loop. The detector works on interleaved coded
//! bits grouped per channel use; the decoder works on the coded frame in
//! transmission order of the turbo encoder.

use thiserror::Error;

use crate::map_detector::{MapDetector, MapError};
use crate::modem::{bit_to_sign, clip_llr, map_bits, Constellation, LlrFrame, LlrRole, ModemError};
use crate::numerics::{ComplexMatrix, ComplexVector, LogSumMode, OpCount};
use crate::pda::{PdaConfig, PdaDetector, PdaError};
use crate::turbo::{build_interleaver, Interleaver, TurboCode, TurboCodeSpec, TurboError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IddError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error(transparent)]
    Pda(#[from] PdaError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Turbo(#[from] TurboError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

pub type Result<T> = std::result::Result<T, IddError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorKind {
    #[default]
    AbLogPda,
    ExactLogMap,
    MaxLogMap,
}

impl std::str::FromStr for DetectorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pda" | "ab-log-pda" => Ok(Self::AbLogPda),
            "map" | "exact-log-map" => Ok(Self::ExactLogMap),
            "max-log-map" | "maxlog-map" => Ok(Self::MaxLogMap),
            other => Err(format!("unknown detector `{other}`")),
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AbLogPda => "ab-log-pda",
            Self::ExactLogMap => "exact-log-map",
            Self::MaxLogMap => "max-log-map",
        })
    }
}

/// What the PDA hands to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PdaExtrinsicRule {
    /// Bit LLRs of the normalised likelihood rows as they are.
    #[default]
    NormalizedLikelihood,
    /// Those LLRs minus the a-priori LLRs (the classical rule, kept for
    /// comparison).
    SubtractPrior,
}

impl std::str::FromStr for PdaExtrinsicRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "normalized-likelihood" | "likelihood" => Ok(Self::NormalizedLikelihood),
            "subtract-prior" | "subtract" => Ok(Self::SubtractPrior),
            other => Err(format!("unknown extrinsic rule `{other}`")),
        }
    }
}

impl std::fmt::Display for PdaExtrinsicRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NormalizedLikelihood => "normalized-likelihood",
            Self::SubtractPrior => "subtract-prior",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IddConfig {
    pub detector: DetectorKind,
    pub outer_iterations: usize,
    pub pda: PdaConfig,
    pub pda_rule: PdaExtrinsicRule,
    pub turbo: TurboCodeSpec,
}

impl Default for IddConfig {
    fn default() -> Self {
        Self {
            detector: DetectorKind::AbLogPda,
            outer_iterations: 3,
            pda: PdaConfig::default(),
            pda_rule: PdaExtrinsicRule::NormalizedLikelihood,
            turbo: TurboCodeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ToDecoder,
    ToDetector,
}

/// Bit interleaver between the code and the modulator. The interleaved
/// stream is padded with zero bits up to a whole number of channel uses;
/// padded positions carry no information at the receiver.
#[derive(Debug, Clone)]
pub struct ChannelInterleaver {
    inner: Interleaver,
    padded_len: usize,
}

impl ChannelInterleaver {
    pub fn new(inner: Interleaver, bits_per_use: usize) -> Self {
        let padded_len = inner.len().div_ceil(bits_per_use) * bits_per_use;
        Self { inner, padded_len }
    }

    pub fn coded_len(&self) -> usize {
        self.inner.len()
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    pub fn interleave_bits(&self, bits: &[u8]) -> Vec<u8> {
        let mut out = self.inner.apply(bits);
        out.resize(self.padded_len, 0);
        out
    }
}

/// Moves LLRs between the decoder domain (coded order, length `coded_len`)
/// and the detector domain (interleaved and padded). The result is tagged
/// a-priori for its destination.
pub fn llr_route(
    frame: &LlrFrame,
    route: Route,
    interleaver: &ChannelInterleaver,
    bits_per_symbol: usize,
) -> Result<LlrFrame> {
    let values = frame.values();
    match route {
        Route::ToDecoder => {
            if values.len() != interleaver.padded_len {
                return Err(IddError::Dimensions(format!(
                    "{} detector LLRs for a padded frame of {}",
                    values.len(),
                    interleaver.padded_len
                )));
            }
            let out = interleaver.inner.invert(&values[..interleaver.coded_len()]);
            Ok(LlrFrame::new(out, LlrRole::APriori, 1)?)
        }
        Route::ToDetector => {
            if values.len() != interleaver.coded_len() {
                return Err(IddError::Dimensions(format!(
                    "{} decoder LLRs for a frame of {}",
                    values.len(),
                    interleaver.coded_len()
                )));
            }
            let mut out = interleaver.inner.apply(values);
            out.resize(interleaver.padded_len, 0.0);
            Ok(LlrFrame::new(out, LlrRole::APriori, bits_per_symbol)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    /// Information-bit decisions after the last outer iteration.
    pub decisions: Vec<u8>,
    /// Decisions after each outer iteration `0..=it_o`.
    pub per_iteration: Vec<Vec<u8>>,
    /// Detector output LLRs of each outer iteration, detector domain.
    pub detector_llrs: Vec<LlrFrame>,
    /// Detector operation count summed over the frame and iterations.
    pub detector_ops: OpCount,
}

/// Either inner detector behind one call.
#[derive(Debug, Clone)]
pub enum SoftDetector {
    Pda(PdaDetector, PdaExtrinsicRule),
    Map(MapDetector),
}

impl SoftDetector {
    pub fn new(
        kind: DetectorKind,
        constellation: &Constellation,
        n_t: usize,
        pda: PdaConfig,
        rule: PdaExtrinsicRule,
    ) -> Result<Self> {
        Ok(match kind {
            DetectorKind::AbLogPda => Self::Pda(PdaDetector::new(constellation.clone(), pda), rule),
            DetectorKind::ExactLogMap => Self::Map(MapDetector::new(constellation, n_t, LogSumMode::Exact)?),
            DetectorKind::MaxLogMap => Self::Map(MapDetector::new(constellation, n_t, LogSumMode::MaxLog)?),
        })
    }

    /// Extrinsic bit LLRs of one channel use, unclipped.
    pub fn detect(
        &self,
        y: &ComplexVector,
        h: &ComplexMatrix,
        sigma2: f64,
        apriori: &LlrFrame,
    ) -> Result<(LlrFrame, OpCount)> {
        match self {
            Self::Pda(det, rule) => {
                let res = det.detect(y, h, sigma2, apriori)?;
                let out = match rule {
                    PdaExtrinsicRule::NormalizedLikelihood => res.extrinsic,
                    PdaExtrinsicRule::SubtractPrior => {
                        let v = res
                            .aposteriori
                            .values()
                            .iter()
                            .zip(apriori.values())
                            .map(|(d, a)| d - a)
                            .collect();
                        LlrFrame::new(v, LlrRole::Extrinsic, apriori.bits_per_symbol())?
                    }
                };
                Ok((out, res.ops))
            }
            Self::Map(det) => {
                let res = det.detect(y, h, sigma2, apriori)?;
                Ok((res.extrinsic, res.ops))
            }
        }
    }
}

/// One configured transmitter/receiver pair.
pub struct IddSystem {
    constellation: Constellation,
    n_t: usize,
    n_r: usize,
    config: IddConfig,
    code: TurboCode,
    channel_interleaver: ChannelInterleaver,
    detector: SoftDetector,
}

impl IddSystem {
    /// `seed` fixes both the turbo interleaver and the channel
    /// interleaver.
    pub fn new(constellation: Constellation, n_t: usize, n_r: usize, config: IddConfig, seed: u64) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(IddError::Dimensions("antenna counts must be positive".into()));
        }
        let code = TurboCode::with_seed(config.turbo, seed)?;
        let bits_per_use = n_t * constellation.bits_per_symbol();
        let channel_interleaver = ChannelInterleaver::new(
            build_interleaver(code.coded_len(), seed ^ 0x9e37_79b9_7f4a_7c15),
            bits_per_use,
        );
        let detector = SoftDetector::new(config.detector, &constellation, n_t, config.pda, config.pda_rule)?;
        Ok(Self {
            constellation,
            n_t,
            n_r,
            config,
            code,
            channel_interleaver,
            detector,
        })
    }

    pub fn config(&self) -> &IddConfig {
        &self.config
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn code(&self) -> &TurboCode {
        &self.code
    }

    pub fn channel_interleaver(&self) -> &ChannelInterleaver {
        &self.channel_interleaver
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn bits_per_use(&self) -> usize {
        self.n_t * self.constellation.bits_per_symbol()
    }

    pub fn channel_uses(&self) -> usize {
        self.channel_interleaver.padded_len() / self.bits_per_use()
    }

    /// Code rate including termination and padding.
    pub fn effective_rate(&self) -> f64 {
        self.config.turbo.info_len as f64 / self.channel_interleaver.padded_len() as f64
    }

    /// Encode, interleave, pad and map; one transmit vector per channel use.
    pub fn modulate(&self, info: &[u8]) -> Result<Vec<ComplexVector>> {
        let coded = self.code.encode(info)?;
        let stream = self.channel_interleaver.interleave_bits(&coded.bits);
        let signs: Vec<i8> = stream.iter().map(|&b| bit_to_sign(b)).collect();
        let symbols = map_bits(&signs, &self.constellation)?;
        Ok(symbols
            .as_slice()
            .chunks(self.n_t)
            .map(|c| ComplexVector::new(c.to_vec()).expect("non-empty chunk"))
            .collect())
    }

    fn detect_frame(
        &self,
        ys: &[ComplexVector],
        hs: &[ComplexMatrix],
        sigma2: f64,
        apriori: &LlrFrame,
        ops: &mut OpCount,
    ) -> Result<LlrFrame> {
        let mb = self.constellation.bits_per_symbol();
        let width = self.bits_per_use();
        let mut out = Vec::with_capacity(apriori.len());
        for (t, (y, h)) in ys.iter().zip(hs).enumerate() {
            let la = LlrFrame::new(
                apriori.values()[t * width..(t + 1) * width].to_vec(),
                LlrRole::APriori,
                mb,
            )?;
            let (llrs, n) = self.detector.detect(y, h, sigma2, &la)?;
            *ops += n;
            out.extend(llrs.values());
        }
        let out = out.into_iter().map(clip_llr).collect();
        Ok(LlrFrame::new(out, LlrRole::Extrinsic, mb)?)
    }

    /// Runs `1 + it_o` detector passes with decoding after each. `hs` are
    /// the channel matrices the receiver believes in.
    pub fn run_receiver(&self, ys: &[ComplexVector], hs: &[ComplexMatrix], sigma2: f64) -> Result<ReceiverOutput> {
        let uses = self.channel_uses();
        if ys.len() != uses || hs.len() != uses {
            return Err(IddError::Dimensions(format!(
                "{} received vectors and {} channel matrices for {uses} channel uses",
                ys.len(),
                hs.len()
            )));
        }
        if let Some((y, h)) = ys
            .iter()
            .zip(hs)
            .find(|(y, h)| y.len() != self.n_r || h.rows() != self.n_r || h.cols() != self.n_t)
        {
            return Err(IddError::Dimensions(format!(
                "received length {}, channel {}x{}, expected {}x{}",
                y.len(),
                h.rows(),
                h.cols(),
                self.n_r,
                self.n_t
            )));
        }
        let mb = self.constellation.bits_per_symbol();
        let mut apriori = LlrFrame::zeros(self.channel_interleaver.padded_len(), LlrRole::APriori, mb)?;
        let mut per_iteration = Vec::with_capacity(self.config.outer_iterations + 1);
        let mut detector_llrs = Vec::with_capacity(self.config.outer_iterations + 1);
        let mut ops = OpCount::default();
        for z in 0..=self.config.outer_iterations {
            let detected = self.detect_frame(ys, hs, sigma2, &apriori, &mut ops)?;
            let to_decoder = llr_route(&detected, Route::ToDecoder, &self.channel_interleaver, mb)?;
            let decoded = self.code.decode(to_decoder.values())?;
            per_iteration.push(decoded.hard_decisions());
            detector_llrs.push(detected);
            if z < self.config.outer_iterations {
                let feedback: Vec<f64> = decoded.coded_extrinsic.iter().map(|&v| clip_llr(v)).collect();
                apriori = llr_route(
                    &LlrFrame::new(feedback, LlrRole::Extrinsic, 1)?,
                    Route::ToDetector,
                    &self.channel_interleaver,
                    mb,
                )?;
            }
        }
        Ok(ReceiverOutput {
            decisions: per_iteration.last().cloned().unwrap_or_default(),
            per_iteration,
            detector_llrs,
            detector_ops: ops,
        })
    }
}
