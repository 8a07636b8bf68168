//! Rate-1/2 turbo code: two recursive systematic convolutional encoders, a
//! random interleaver, alternate puncturing of the two parity streams, and
//! an iterative log-domain BCJR decoder.
//!
//! Bits are `0/1` on the encoder side. LLRs follow `ln P(0)/P(1)`, which is
//! the `+1/-1` convention of the modem with `0 -> +1`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::{max_star, max_star_maxlog, max_star_table, LogSumMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurboError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid generator polynomials: {0}")]
    Polynomial(String),
    #[error("interleaver of length {got} for {expected} information bits")]
    Interleaver { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, TurboError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurboCodeSpec {
    pub info_len: usize,
    /// Feedback generator in octal notation, e.g. `0o7`.
    pub feedback: u32,
    /// Feedforward generator in octal notation, e.g. `0o5`.
    pub feedforward: u32,
    pub iterations: usize,
    pub log_sum: LogSumMode,
}

impl Default for TurboCodeSpec {
    fn default() -> Self {
        Self {
            info_len: 2400,
            feedback: 0o7,
            feedforward: 0o5,
            iterations: 4,
            log_sum: LogSumMode::Table,
        }
    }
}

/// A permutation with its inverse. `apply` produces `out[j] = x[perm[j]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Interleaver {
    pub fn from_permutation(perm: Vec<usize>) -> Option<Self> {
        let mut inv = vec![usize::MAX; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            if p >= perm.len() || inv[p] != usize::MAX {
                return None;
            }
            inv[p] = j;
        }
        Some(Self { perm, inv })
    }

    pub fn identity(len: usize) -> Self {
        Self::from_permutation((0..len).collect()).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len(), "interleaver length");
        self.perm.iter().map(|&p| x[p]).collect()
    }

    pub fn invert<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len(), "interleaver length");
        self.inv.iter().map(|&j| x[j]).collect()
    }
}

/// Uniform random permutation drawn from `seed`.
pub fn build_interleaver(len: usize, seed: u64) -> Interleaver {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Interleaver::from_permutation(perm).expect("shuffle yields a permutation")
}

/// Recursive systematic convolutional code. The state holds the last
/// `memory` feedback-register bits, most recent in bit 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rsc {
    memory: usize,
    feedback: u32,
    feedforward: u32,
}

impl Rsc {
    pub fn new(feedback: u32, feedforward: u32) -> Result<Self> {
        let degree = |g: u32| 31 - g.leading_zeros() as usize;
        if feedback == 0 || feedforward == 0 {
            return Err(TurboError::Polynomial("zero polynomial".into()));
        }
        let memory = degree(feedback).max(degree(feedforward));
        if memory == 0 || memory > 8 {
            return Err(TurboError::Polynomial(format!("memory {memory}")));
        }
        // The leading (current-time) feedback tap must be present.
        if (feedback >> memory) & 1 == 0 {
            return Err(TurboError::Polynomial(format!(
                "feedback {feedback:o} lacks the D^0 tap"
            )));
        }
        Ok(Self {
            memory,
            feedback,
            feedforward,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn states(&self) -> usize {
        1 << self.memory
    }

    /// Tap of `g` on `D^j`; the most significant octal digit is `D^0`.
    fn tap(&self, g: u32, j: usize) -> u8 {
        ((g >> (self.memory - j)) & 1) as u8
    }

    fn register_sum(&self, g: u32, state: usize) -> u8 {
        (1..=self.memory).fold(0, |acc, j| acc ^ (self.tap(g, j) & ((state >> (j - 1)) & 1) as u8))
    }

    /// `(next state, parity)` for one input bit.
    pub fn step(&self, state: usize, input: u8) -> (usize, u8) {
        let a = input ^ self.register_sum(self.feedback, state);
        let parity = (self.tap(self.feedforward, 0) & a) ^ self.register_sum(self.feedforward, state);
        let next = ((state << 1) | a as usize) & (self.states() - 1);
        (next, parity)
    }

    /// The input that drives the register input to zero, used for
    /// termination.
    pub fn terminating_input(&self, state: usize) -> u8 {
        self.register_sum(self.feedback, state)
    }

    /// Parity stream from the zero state without termination.
    pub fn encode(&self, bits: &[u8]) -> (Vec<u8>, usize) {
        let mut state = 0;
        let parity = bits
            .iter()
            .map(|&b| {
                let (next, p) = self.step(state, b);
                state = next;
                p
            })
            .collect();
        (parity, state)
    }

    /// Systematic and parity tail bits that return `state` to zero.
    pub fn terminate(&self, mut state: usize) -> (Vec<u8>, Vec<u8>) {
        let mut sys = Vec::with_capacity(self.memory);
        let mut par = Vec::with_capacity(self.memory);
        for _ in 0..self.memory {
            let u = self.terminating_input(state);
            let (next, p) = self.step(state, u);
            sys.push(u);
            par.push(p);
            state = next;
        }
        debug_assert_eq!(state, 0);
        (sys, par)
    }
}

/// Role of each transmitted coded bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitRole {
    Systematic(usize),
    /// Parity of the first encoder at information time `k`.
    Parity1(usize),
    /// Parity of the second encoder at interleaved time `j`.
    Parity2(usize),
    TailSystematic(usize),
    TailParity(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedFrame {
    /// The transmitted sequence.
    pub bits: Vec<u8>,
    pub systematic: Vec<u8>,
    /// Unpunctured parity streams.
    pub parity1: Vec<u8>,
    pub parity2: Vec<u8>,
    pub tail_systematic: Vec<u8>,
    pub tail_parity: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct TurboOutput {
    /// A-posteriori LLRs of the information bits.
    pub info_app: Vec<f64>,
    /// Extrinsic LLRs on every transmitted coded bit, in transmission
    /// order.
    pub coded_extrinsic: Vec<f64>,
    /// Parity extrinsics of both encoders at every time, including the
    /// punctured positions.
    pub parity1_extrinsic: Vec<f64>,
    pub parity2_extrinsic: Vec<f64>,
}

impl TurboOutput {
    pub fn hard_decisions(&self) -> Vec<u8> {
        self.info_app.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TurboCode {
    spec: TurboCodeSpec,
    rsc: Rsc,
    interleaver: Interleaver,
    roles: Vec<BitRole>,
}

impl TurboCode {
    pub fn new(spec: TurboCodeSpec, interleaver: Interleaver) -> Result<Self> {
        if interleaver.len() != spec.info_len {
            return Err(TurboError::Interleaver {
                expected: spec.info_len,
                got: interleaver.len(),
            });
        }
        let rsc = Rsc::new(spec.feedback, spec.feedforward)?;
        let mut roles = Vec::with_capacity(2 * spec.info_len + 2 * rsc.memory());
        for k in 0..spec.info_len {
            roles.push(BitRole::Systematic(k));
            roles.push(if k % 2 == 0 {
                BitRole::Parity1(k)
            } else {
                BitRole::Parity2(k)
            });
        }
        for t in 0..rsc.memory() {
            roles.push(BitRole::TailSystematic(t));
            roles.push(BitRole::TailParity(t));
        }
        Ok(Self {
            spec,
            rsc,
            interleaver,
            roles,
        })
    }

    pub fn with_seed(spec: TurboCodeSpec, seed: u64) -> Result<Self> {
        Self::new(spec, build_interleaver(spec.info_len, seed))
    }

    pub fn spec(&self) -> &TurboCodeSpec {
        &self.spec
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn coded_len(&self) -> usize {
        self.roles.len()
    }

    pub fn position_map(&self) -> &[BitRole] {
        &self.roles
    }

    pub fn encode(&self, info: &[u8]) -> Result<CodedFrame> {
        if info.len() != self.spec.info_len {
            return Err(TurboError::Length {
                expected: self.spec.info_len,
                got: info.len(),
            });
        }
        let (parity1, end) = self.rsc.encode(info);
        let (tail_systematic, tail_parity) = self.rsc.terminate(end);
        let (parity2, _) = self.rsc.encode(&self.interleaver.apply(info));
        let bits = self
            .roles
            .iter()
            .map(|role| match *role {
                BitRole::Systematic(k) => info[k],
                BitRole::Parity1(k) => parity1[k],
                BitRole::Parity2(j) => parity2[j],
                BitRole::TailSystematic(t) => tail_systematic[t],
                BitRole::TailParity(t) => tail_parity[t],
            })
            .collect();
        Ok(CodedFrame {
            bits,
            systematic: info.to_vec(),
            parity1,
            parity2,
            tail_systematic,
            tail_parity,
        })
    }

    /// Iterative decoding from per-coded-bit channel LLRs (transmission
    /// order). Punctured parities enter as zero.
    pub fn decode(&self, channel: &[f64]) -> Result<TurboOutput> {
        match self.spec.log_sum {
            LogSumMode::Exact => self.decode_with(channel, max_star),
            LogSumMode::MaxLog => self.decode_with(channel, max_star_maxlog),
            LogSumMode::Table => self.decode_with(channel, max_star_table),
        }
    }

    pub fn decode_with<F: Fn(f64, f64) -> f64 + Copy>(&self, channel: &[f64], combine: F) -> Result<TurboOutput> {
        if channel.len() != self.coded_len() {
            return Err(TurboError::Length {
                expected: self.coded_len(),
                got: channel.len(),
            });
        }
        let n = self.spec.info_len;
        let nu = self.rsc.memory();
        let mut ls = vec![0.0; n];
        let mut lp1 = vec![0.0; n];
        let mut lp2 = vec![0.0; n];
        let mut tail_s = vec![0.0; nu];
        let mut tail_p = vec![0.0; nu];
        for (role, &l) in self.roles.iter().zip(channel) {
            match *role {
                BitRole::Systematic(k) => ls[k] = l,
                BitRole::Parity1(k) => lp1[k] = l,
                BitRole::Parity2(j) => lp2[j] = l,
                BitRole::TailSystematic(t) => tail_s[t] = l,
                BitRole::TailParity(t) => tail_p[t] = l,
            }
        }
        let ls2 = self.interleaver.apply(&ls);
        let mut le2 = vec![0.0; n];
        let mut run1 = None;
        let mut run2 = None;
        let iterations = self.spec.iterations.max(1);
        for it in 0..iterations {
            let last = it + 1 == iterations;
            let r1 = bcjr_inner(&self.rsc, &ls, &le2, &lp1, Some((&tail_s, &tail_p)), combine, last);
            let la2 = self.interleaver.apply(&r1.info_extrinsic);
            let r2 = bcjr_inner(&self.rsc, &ls2, &la2, &lp2, None, combine, last);
            le2 = self.interleaver.invert(&r2.info_extrinsic);
            run1 = Some(r1);
            run2 = Some(r2);
        }
        let (r1, r2) = (
            run1.expect("at least one iteration"),
            run2.expect("at least one iteration"),
        );
        let le1 = &r1.info_extrinsic;
        let info_app: Vec<f64> = (0..n).map(|k| ls[k] + le1[k] + le2[k]).collect();
        let coded_extrinsic = self
            .roles
            .iter()
            .map(|role| match *role {
                BitRole::Systematic(k) => le1[k] + le2[k],
                BitRole::Parity1(k) => r1.parity_extrinsic[k],
                BitRole::Parity2(j) => r2.parity_extrinsic[j],
                BitRole::TailSystematic(t) => r1.tail_systematic_extrinsic[t],
                BitRole::TailParity(t) => r1.tail_parity_extrinsic[t],
            })
            .collect();
        Ok(TurboOutput {
            info_app,
            coded_extrinsic,
            parity1_extrinsic: r1.parity_extrinsic,
            parity2_extrinsic: r2.parity_extrinsic,
        })
    }
}

/// Outputs of one constituent BCJR pass.
#[derive(Debug, Clone)]
pub struct ConstituentOutput {
    pub info_app: Vec<f64>,
    /// `app - a-priori - systematic channel`.
    pub info_extrinsic: Vec<f64>,
    pub parity_extrinsic: Vec<f64>,
    pub tail_systematic_extrinsic: Vec<f64>,
    pub tail_parity_extrinsic: Vec<f64>,
}

/// Log-domain BCJR over one constituent trellis. With `tail` the trellis is
/// extended by the termination steps and forced to end in state zero;
/// without it the final state is left open.
pub fn bcjr<F: Fn(f64, f64) -> f64 + Copy>(
    rsc: &Rsc,
    ls: &[f64],
    la: &[f64],
    lp: &[f64],
    tail: Option<(&[f64], &[f64])>,
    combine: F,
) -> ConstituentOutput {
    bcjr_inner(rsc, ls, la, lp, tail, combine, true)
}

/// Stands in for `-inf` so that the log-sum rules need no special cases.
const FLOOR: f64 = -1e30;

/// Branch structure of an RSC trellis. Branch `b = 2s + u` leaves state
/// `s` with input `u`; every state has exactly two incoming branches.
struct Trellis {
    states: usize,
    next: Vec<usize>,
    /// Index into the per-step metric quadruple: `2u + parity`.
    label: Vec<usize>,
    /// Incoming branches of each state.
    preds: Vec<[usize; 2]>,
    forced: Vec<usize>,
}

impl Trellis {
    fn new(rsc: &Rsc) -> Self {
        let sc = rsc.states();
        let mut next = vec![0; 2 * sc];
        let mut label = vec![0; 2 * sc];
        let mut preds = vec![[usize::MAX; 2]; sc];
        for st in 0..sc {
            for u in 0..2u8 {
                let (nx, p) = rsc.step(st, u);
                let b = 2 * st + u as usize;
                next[b] = nx;
                label[b] = 2 * u as usize + p as usize;
                let slot = usize::from(preds[nx][0] != usize::MAX);
                preds[nx][slot] = b;
            }
        }
        debug_assert!(preds.iter().all(|p| p[1] != usize::MAX));
        let forced = (0..sc).map(|st| rsc.terminating_input(st) as usize).collect();
        Self {
            states: sc,
            next,
            label,
            preds,
            forced,
        }
    }
}

fn bcjr_inner<F: Fn(f64, f64) -> f64 + Copy>(
    rsc: &Rsc,
    ls: &[f64],
    la: &[f64],
    lp: &[f64],
    tail: Option<(&[f64], &[f64])>,
    combine: F,
    with_parity: bool,
) -> ConstituentOutput {
    let tr = Trellis::new(rsc);
    let n = ls.len();
    let sc = tr.states;
    let tail_len = tail.map_or(0, |(s, _)| s.len());
    let steps = n + tail_len;

    // Branch metrics per step for (u, parity) = (0,0), (0,1), (1,0), (1,1).
    let mut g = Vec::with_capacity(steps);
    let quad = |x: f64, p: f64| [x + p, x - p, -x + p, -x - p];
    for t in 0..n {
        g.push(quad(0.5 * (la[t] + ls[t]), 0.5 * lp[t]));
    }
    if let Some((ts, tp)) = tail {
        for (x, p) in ts.iter().zip(tp) {
            g.push(quad(0.5 * x, 0.5 * p));
        }
    }
    let allowed = |t: usize, b: usize| t < n || b & 1 == tr.forced[b >> 1];

    let mut alpha = vec![FLOOR; (steps + 1) * sc];
    alpha[0] = 0.0;
    for t in 0..steps {
        let (cur, rest) = alpha.split_at_mut((t + 1) * sc);
        let cur = &cur[t * sc..];
        let nxt = &mut rest[..sc];
        let gt = &g[t];
        let mut top = FLOOR;
        for d in 0..sc {
            let [b0, b1] = tr.preds[d];
            let v0 = if allowed(t, b0) {
                cur[b0 >> 1] + gt[tr.label[b0]]
            } else {
                FLOOR
            };
            let v1 = if allowed(t, b1) {
                cur[b1 >> 1] + gt[tr.label[b1]]
            } else {
                FLOOR
            };
            let v = combine(v0, v1);
            nxt[d] = v;
            top = top.max(v);
        }
        nxt.iter_mut().for_each(|v| *v -= top);
    }

    let mut beta = vec![FLOOR; (steps + 1) * sc];
    if tail.is_some() {
        beta[steps * sc] = 0.0;
    } else {
        beta[steps * sc..].fill(0.0);
    }
    for t in (0..steps).rev() {
        let (cur, rest) = beta.split_at_mut((t + 1) * sc);
        let cur = &mut cur[t * sc..];
        let nxt = &rest[..sc];
        let gt = &g[t];
        let mut top = FLOOR;
        for st in 0..sc {
            let (b0, b1) = (2 * st, 2 * st + 1);
            let v0 = if allowed(t, b0) {
                nxt[tr.next[b0]] + gt[tr.label[b0]]
            } else {
                FLOOR
            };
            let v1 = if allowed(t, b1) {
                nxt[tr.next[b1]] + gt[tr.label[b1]]
            } else {
                FLOOR
            };
            let v = combine(v0, v1);
            cur[st] = v;
            top = top.max(v);
        }
        cur.iter_mut().for_each(|v| *v -= top);
    }

    let mut info_app = Vec::with_capacity(n);
    let mut info_extrinsic = Vec::with_capacity(n);
    let mut parity_extrinsic = Vec::with_capacity(if with_parity { n } else { 0 });
    let mut tail_sys = Vec::with_capacity(tail_len);
    let mut tail_par = Vec::with_capacity(tail_len);
    let mut branch = vec![FLOOR; 2 * sc];
    for t in 0..steps {
        let a = &alpha[t * sc..(t + 1) * sc];
        let bt = &beta[(t + 1) * sc..(t + 2) * sc];
        let gt = &g[t];
        for (b, v) in branch.iter_mut().enumerate() {
            *v = if allowed(t, b) {
                a[b >> 1] + gt[tr.label[b]] + bt[tr.next[b]]
            } else {
                FLOOR
            };
        }
        // Even branches carry u = 0, odd branches u = 1.
        let u0 = branch.iter().step_by(2).copied().reduce(combine).unwrap_or(FLOOR);
        let u1 = branch
            .iter()
            .skip(1)
            .step_by(2)
            .copied()
            .reduce(combine)
            .unwrap_or(FLOOR);
        let app = u0 - u1;
        let parity_llr = || {
            let (mut p0, mut p1) = (FLOOR, FLOOR);
            for (b, &v) in branch.iter().enumerate() {
                if tr.label[b] & 1 == 1 {
                    p1 = combine(p1, v);
                } else {
                    p0 = combine(p0, v);
                }
            }
            p0 - p1
        };
        if t < n {
            info_app.push(app);
            info_extrinsic.push(app - la[t] - ls[t]);
            if with_parity {
                parity_extrinsic.push(parity_llr() - lp[t]);
            }
        } else {
            let (ts, tp) = tail.expect("tail steps only exist with a tail");
            tail_sys.push(app - ts[t - n]);
            tail_par.push(parity_llr() - tp[t - n]);
        }
    }
    ConstituentOutput {
        info_app,
        info_extrinsic,
        parity_extrinsic,
        tail_systematic_extrinsic: tail_sys,
        tail_parity_extrinsic: tail_par,
    }
}

/// Maximum-likelihood state sequence through one constituent trellis
/// (started in zero, open end), returning the decided information bits.
pub fn viterbi(rsc: &Rsc, ls: &[f64], lp: &[f64]) -> Vec<u8> {
    let n = ls.len();
    let s_count = rsc.states();
    let neg = f64::NEG_INFINITY;
    let mut metric = vec![neg; s_count];
    metric[0] = 0.0;
    let mut back = vec![(0usize, 0u8); n * s_count];
    for t in 0..n {
        let mut nm = vec![neg; s_count];
        for s in 0..s_count {
            if metric[s] == neg {
                continue;
            }
            for u in 0..2u8 {
                let (d, p) = rsc.step(s, u);
                let x = if u == 0 { 1.0 } else { -1.0 };
                let ps = if p == 0 { 1.0 } else { -1.0 };
                let m = metric[s] + 0.5 * x * ls[t] + 0.5 * ps * lp[t];
                if m > nm[d] {
                    nm[d] = m;
                    back[t * s_count + d] = (s, u);
                }
            }
        }
        metric = nm;
    }
    let mut s = (0..s_count).fold(0, |best, k| if metric[k] > metric[best] { k } else { best });
    let mut out = vec![0u8; n];
    for t in (0..n).rev() {
        let (prev, u) = back[t * s_count + s];
        out[t] = u;
        s = prev;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rsc75() -> Rsc {
        Rsc::new(0o7, 0o5).unwrap()
    }

    fn bpsk_llrs(bits: &[u8], sigma2: f64, rng: &mut impl Rng) -> Vec<f64> {
        let sd = sigma2.sqrt();
        bits.iter()
            .map(|&b| {
                let x = if b == 0 { 1.0 } else { -1.0 };
                let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sd;
                2.0 * (x + noise) / sigma2
            })
            .collect()
    }

    #[test]
    fn impulse_response() {
        let mut input = vec![0u8; 7];
        input[0] = 1;
        let (parity, _) = rsc75().encode(&input);
        assert_eq!(parity, vec![1, 1, 1, 0, 1, 1, 0]);
    }

    #[test]
    fn termination_returns_to_zero() {
        let rsc = rsc75();
        for state in 0..4 {
            let (sys, _) = rsc.terminate(state);
            let mut s = state;
            for &u in &sys {
                s = rsc.step(s, u).0;
            }
            assert_eq!(s, 0);
        }
    }

    #[test]
    fn all_zero_codeword_and_length() {
        let code = TurboCode::with_seed(TurboCodeSpec::default(), 1).unwrap();
        let frame = code.encode(&vec![0; 2400]).unwrap();
        assert_eq!(frame.bits.len(), 2 * 2400 + 4);
        assert!(frame.bits.iter().all(|&b| b == 0));
        assert!(code.encode(&[0; 10]).is_err());
    }

    #[test]
    fn encoder_is_linear() {
        let spec = TurboCodeSpec {
            info_len: 200,
            ..Default::default()
        };
        let code = TurboCode::with_seed(spec, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..200).map(|_| rng.random_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let (ea, eb, eab) = (
                code.encode(&a).unwrap(),
                code.encode(&b).unwrap(),
                code.encode(&ab).unwrap(),
            );
            for k in 0..ea.bits.len() {
                assert_eq!(ea.bits[k] ^ eb.bits[k], eab.bits[k]);
            }
        }
    }

    #[test]
    fn puncturing_alternates_parities() {
        let code = TurboCode::with_seed(
            TurboCodeSpec {
                info_len: 8,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        let roles = code.position_map();
        assert_eq!(roles[1], BitRole::Parity1(0));
        assert_eq!(roles[3], BitRole::Parity2(1));
        assert_eq!(roles[5], BitRole::Parity1(2));
        let p1 = roles.iter().filter(|r| matches!(r, BitRole::Parity1(_))).count();
        let p2 = roles.iter().filter(|r| matches!(r, BitRole::Parity2(_))).count();
        assert_eq!((p1, p2), (4, 4));
    }

    #[test]
    fn interleaver_properties() {
        let il = build_interleaver(100, 9);
        let x: Vec<usize> = (0..100).collect();
        assert_eq!(il.invert(&il.apply(&x)), x);
        assert_eq!(il.apply(&il.invert(&x)), x);
        assert_eq!(build_interleaver(100, 9), il);
        assert_ne!(build_interleaver(100, 10), il);
        let total: usize = (0..1000u64)
            .map(|seed| {
                let il = build_interleaver(64, seed);
                il.permutation().iter().enumerate().filter(|(j, &p)| *j == p).count()
            })
            .sum();
        let mean = total as f64 / 1000.0;
        // Poisson(1): standard error of the mean is about 0.03.
        assert!((mean - 1.0).abs() < 0.15, "{mean}");
    }

    #[test]
    fn saturated_input_decodes_codeword() {
        let code = TurboCode::with_seed(TurboCodeSpec::default(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let info: Vec<u8> = (0..2400).map(|_| rng.random_range(0..2)).collect();
        let frame = code.encode(&info).unwrap();
        let llrs: Vec<f64> = frame
            .bits
            .iter()
            .map(|&b| if b == 0 { 100.0 } else { -100.0 })
            .collect();
        assert_eq!(code.decode(&llrs).unwrap().hard_decisions(), info);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let code = TurboCode::with_seed(
            TurboCodeSpec {
                log_sum: LogSumMode::Exact,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let out = code.decode(&vec![0.0; code.coded_len()]).unwrap();
        assert!(out.info_app.iter().all(|v| v.abs() < 1e-9));
        assert!(out.coded_extrinsic.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn max_log_bcjr_matches_viterbi() {
        let rsc = rsc75();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sigma2 = 0.5;
        let zero = vec![0.0; 64];
        for _ in 0..1000 {
            let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let (par, _) = rsc.encode(&info);
            let ls = bpsk_llrs(&info, sigma2, &mut rng);
            let lp = bpsk_llrs(&par, sigma2, &mut rng);
            let vit = viterbi(&rsc, &ls, &lp);
            let out = bcjr(&rsc, &ls, &zero, &lp, None, max_star_maxlog);
            let dec: Vec<u8> = out.info_app.iter().map(|&l| u8::from(l < 0.0)).collect();
            assert_eq!(dec, vit);
        }
    }

    #[test]
    fn exact_bcjr_matches_viterbi_at_high_snr() {
        let rsc = rsc75();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma2 = 0.2;
        let zero = vec![0.0; 64];
        for _ in 0..1000 {
            let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let (par, _) = rsc.encode(&info);
            let ls = bpsk_llrs(&info, sigma2, &mut rng);
            let lp = bpsk_llrs(&par, sigma2, &mut rng);
            let vit = viterbi(&rsc, &ls, &lp);
            let out = bcjr(&rsc, &ls, &zero, &lp, None, max_star);
            let dec: Vec<u8> = out.info_app.iter().map(|&l| u8::from(l < 0.0)).collect();
            assert_eq!(dec, vit);
        }
    }

    #[test]
    fn extrinsic_excludes_own_inputs() {
        // A single constituent with only systematic information on one bit
        // returns zero extrinsic for that bit's own systematic LLR when
        // nothing else is observed.
        let rsc = rsc75();
        let mut ls = vec![0.0; 16];
        ls[5] = 3.0;
        let zero = vec![0.0; 16];
        let out = bcjr(&rsc, &ls, &zero, &zero, None, max_star);
        assert!(out.info_extrinsic[5].abs() < 1e-12);
        assert!((out.info_app[5] - 3.0).abs() < 1e-12);
    }

    fn awgn_ber(spec: TurboCodeSpec, ebn0_db: f64, frames: usize, seed: u64) -> (usize, usize) {
        let code = TurboCode::with_seed(spec, seed).unwrap();
        let sigma2 = 1.0 / (2.0 * 0.5 * 10f64.powf(ebn0_db / 10.0));
        let mut errors = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for _ in 0..frames {
            let info: Vec<u8> = (0..spec.info_len).map(|_| rng.random_range(0..2)).collect();
            let frame = code.encode(&info).unwrap();
            let llrs = bpsk_llrs(&frame.bits, sigma2, &mut rng);
            let dec = code.decode(&llrs).unwrap().hard_decisions();
            errors += dec.iter().zip(&info).filter(|(a, b)| a != b).count();
        }
        (errors, frames * spec.info_len)
    }

    #[test]
    fn awgn_waterfall_health() {
        let (errors, bits) = awgn_ber(TurboCodeSpec::default(), 1.5, 500, 11);
        let ber = errors as f64 / bits as f64;
        assert!(ber <= 1e-3, "BER {ber}");
    }

    #[test]
    fn table_correction_tracks_exact_decoder() {
        // Converged LLRs at 2 dB average |L| ~ 40, so the comparison is made
        // relative to the exact LLR magnitude.
        let exact = TurboCode::with_seed(
            TurboCodeSpec {
                log_sum: LogSumMode::Exact,
                ..Default::default()
            },
            12,
        )
        .unwrap();
        let table = TurboCode::with_seed(TurboCodeSpec::default(), 12).unwrap();
        let sigma2 = 1.0 / (2.0 * 0.5 * 10f64.powf(0.2));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (mut diff, mut mag, mut agree, mut count) = (0.0, 0.0, 0, 0);
        for _ in 0..20 {
            let info: Vec<u8> = (0..2400).map(|_| rng.random_range(0..2)).collect();
            let llrs = bpsk_llrs(&exact.encode(&info).unwrap().bits, sigma2, &mut rng);
            let a = exact.decode(&llrs).unwrap();
            let b = table.decode(&llrs).unwrap();
            for (x, y) in a.info_app.iter().zip(&b.info_app) {
                diff += (x - y).abs();
                mag += x.abs();
                agree += usize::from((*x < 0.0) == (*y < 0.0));
                count += 1;
            }
        }
        assert!(diff / mag <= 0.005, "relative |ΔL| = {}", diff / mag);
        assert!(agree as f64 >= 0.9999 * count as f64);
    }

    #[test]
    fn punctured_parity_extrinsics_stay_internal() {
        let code = TurboCode::with_seed(
            TurboCodeSpec {
                info_len: 64,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let llrs = bpsk_llrs(&code.encode(&info).unwrap().bits, 0.8, &mut rng);
        let out = code.decode(&llrs).unwrap();
        assert_eq!(out.coded_extrinsic.len(), code.coded_len());
        assert_eq!(out.parity1_extrinsic.len(), 64);
        for (role, &v) in code.position_map().iter().zip(&out.coded_extrinsic) {
            match *role {
                BitRole::Parity1(k) => {
                    assert_eq!(k % 2, 0);
                    assert_eq!(v, out.parity1_extrinsic[k]);
                }
                BitRole::Parity2(j) => {
                    assert_eq!(j % 2, 1);
                    assert_eq!(v, out.parity2_extrinsic[j]);
                }
                _ => {}
            }
        }
    }
}
