//! Constellations, bit/symbol mapping and conversions between bit LLRs and
//! symbol probabilities.
//!
//! Bits are carried as `+1` / `-1` and an LLR is `ln P(+1) / P(-1)`. In the
//! binary domain of the FEC code, bit value `0` is `+1` and `1` is `-1`.
//!
//! Constellation index `m` is the label read as a binary number with `+1 -> 0`
//! and `-1 -> 1`, most significant label bit first. Index 0 therefore carries
//! the all-`+1` label.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{max_star, ComplexVector, NumericsError};

/// LLR magnitudes are clipped to this value.
pub const LLR_CLIP: f64 = 50.0;
/// Probabilities are floored here before row normalisation.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("unsupported constellation order {order} for {kind:?}")]
    UnsupportedOrder { kind: ModulationKind, order: usize },
    #[error("frame length {len} is not a multiple of {bits_per_symbol} bits per symbol")]
    LengthMismatch { len: usize, bits_per_symbol: usize },
    #[error("bit value {0} is not +1 or -1")]
    InvalidBit(i8),
    #[error("probability matrix has {got} columns, constellation has {expected} points")]
    OrderMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ModemError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationKind {
    Pam,
    Qam,
}

impl std::str::FromStr for ModulationKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pam" => Ok(ModulationKind::Pam),
            "qam" => Ok(ModulationKind::Qam),
            other => Err(format!("unknown modulation `{other}`")),
        }
    }
}

impl std::fmt::Display for ModulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModulationKind::Pam => write!(f, "pam"),
            ModulationKind::Qam => write!(f, "qam"),
        }
    }
}

/// Gray-labelled PAM or square QAM constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ModulationKind,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
    /// `labels[m * bits_per_symbol + l]` is bit `l` of point `m`.
    labels: Vec<i8>,
    energy: f64,
    abs_sqr: Vec<f64>,
    squares: Vec<Complex64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    /// Unnormalised integer grid: PAM levels `{-(M-1), ..., M-1}` and square
    /// QAM with the same levels on each axis.
    pub fn base(kind: ModulationKind, order: usize) -> Result<Self> {
        let unsupported = ModemError::UnsupportedOrder { kind, order };
        if order < 2 || !order.is_power_of_two() {
            return Err(unsupported);
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        // (levels per axis, bits per axis) for the real axis and, for QAM, the
        // imaginary axis.
        let (axis_levels, axis_bits) = match kind {
            ModulationKind::Pam => (order, bits_per_symbol),
            ModulationKind::Qam => {
                if bits_per_symbol % 2 != 0 {
                    return Err(unsupported);
                }
                (1usize << (bits_per_symbol / 2), bits_per_symbol / 2)
            }
        };
        let level = |i: usize| (2 * i) as f64 - (axis_levels - 1) as f64;
        // Each axis position i carries the Gray word gray(i); a Gray bit of 1 is
        // the label +1, so the lowest level of 2-PAM is -1 <-> -1.
        let mut points = vec![Complex64::new(0.0, 0.0); order];
        let mut labels = vec![0i8; order * bits_per_symbol];
        let axis_label = |i: usize| -> Vec<i8> {
            let g = gray(i);
            (0..axis_bits)
                .map(|b| if (g >> (axis_bits - 1 - b)) & 1 == 1 { 1 } else { -1 })
                .collect()
        };
        let mut place = |point: Complex64, label: Vec<i8>| {
            let index = label.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b == -1));
            points[index] = point;
            labels[index * bits_per_symbol..(index + 1) * bits_per_symbol].copy_from_slice(&label);
        };
        match kind {
            ModulationKind::Pam => {
                for i in 0..axis_levels {
                    place(Complex64::new(level(i), 0.0), axis_label(i));
                }
            }
            ModulationKind::Qam => {
                for i in 0..axis_levels {
                    for q in 0..axis_levels {
                        let mut label = axis_label(i);
                        label.extend(axis_label(q));
                        place(Complex64::new(level(i), level(q)), label);
                    }
                }
            }
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        Ok(Self::from_parts(kind, points, bits_per_symbol, labels, energy))
    }

    fn from_parts(
        kind: ModulationKind,
        points: Vec<Complex64>,
        bits_per_symbol: usize,
        labels: Vec<i8>,
        energy: f64,
    ) -> Self {
        let abs_sqr = points.iter().map(|p| p.norm_sqr()).collect();
        let squares = points.iter().map(|p| p * p).collect();
        Self {
            kind,
            points,
            bits_per_symbol,
            labels,
            energy,
            abs_sqr,
            squares,
        }
    }

    /// Rescales so the mean point energy equals `energy`.
    pub fn normalized(&self, energy: f64) -> Self {
        let scale = (energy / self.energy).sqrt();
        let points = self.points.iter().map(|p| p * scale).collect();
        Self::from_parts(self.kind, points, self.bits_per_symbol, self.labels.clone(), energy)
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, m: usize) -> Complex64 {
        self.points[m]
    }

    /// `|a_m|^2` for every point.
    pub fn abs_sqr(&self) -> &[f64] {
        &self.abs_sqr
    }

    /// `a_m^2` for every point.
    pub fn squares(&self) -> &[Complex64] {
        &self.squares
    }

    pub fn label(&self, m: usize) -> &[i8] {
        &self.labels[m * self.bits_per_symbol..(m + 1) * self.bits_per_symbol]
    }

    #[inline]
    pub fn label_bit(&self, m: usize, l: usize) -> i8 {
        self.labels[m * self.bits_per_symbol + l]
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    /// Point index for a `+1/-1` label.
    pub fn index_of(&self, label: &[i8]) -> Result<usize> {
        if label.len() != self.bits_per_symbol {
            return Err(ModemError::LengthMismatch {
                len: label.len(),
                bits_per_symbol: self.bits_per_symbol,
            });
        }
        label.iter().try_fold(0usize, |acc, &b| match b {
            1 => Ok(acc << 1),
            -1 => Ok((acc << 1) | 1),
            other => Err(ModemError::InvalidBit(other)),
        })
    }

    /// Points whose bit `l` equals `bit`.
    pub fn subset(&self, l: usize, bit: i8) -> impl Iterator<Item = usize> + '_ {
        (0..self.order()).filter(move |&m| self.label_bit(m, l) == bit)
    }
}

/// Gray-labelled constellation normalised to mean energy `energy`.
pub fn build_constellation(kind: ModulationKind, order: usize, energy: f64) -> Result<Constellation> {
    Ok(Constellation::base(kind, order)?.normalized(energy))
}

/// `N_t x M` matrix of symbol probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolProbMatrix {
    n_t: usize,
    order: usize,
    data: Vec<f64>,
}

impl SymbolProbMatrix {
    pub fn uniform(n_t: usize, order: usize) -> Self {
        Self {
            n_t,
            order,
            data: vec![1.0 / order as f64; n_t * order],
        }
    }

    /// Takes unnormalised non-negative rows, floors and normalises them.
    pub fn from_rows(n_t: usize, order: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_t * order);
        let mut p = Self { n_t, order, data };
        for i in 0..n_t {
            normalize_row(p.row_mut(i));
        }
        p
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        self.row_mut(i).copy_from_slice(row);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|row sum - 1|`.
    pub fn max_row_error(&self) -> f64 {
        (0..self.n_t)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Total-variation distance between row `i` of `self` and of `other`.
    pub fn total_variation(&self, other: &SymbolProbMatrix, i: usize) -> f64 {
        0.5 * self
            .row(i)
            .iter()
            .zip(other.row(i))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Floors at [`PROB_FLOOR`] and rescales to unit sum.
pub fn normalize_row(row: &mut [f64]) {
    for v in row.iter_mut() {
        if !(*v >= PROB_FLOOR) {
            *v = PROB_FLOOR;
        }
    }
    let sum: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrRole {
    APriori,
    APosteriori,
    Extrinsic,
}

/// Bit LLRs in antenna-major order: position `k = M_b * i + l` holds bit `l`
/// of antenna `i` (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    values: Vec<f64>,
    role: LlrRole,
    bits_per_symbol: usize,
}

impl LlrFrame {
    pub fn new(values: Vec<f64>, role: LlrRole, bits_per_symbol: usize) -> Result<Self> {
        if bits_per_symbol == 0 || values.len() % bits_per_symbol != 0 {
            return Err(ModemError::LengthMismatch {
                len: values.len(),
                bits_per_symbol,
            });
        }
        Ok(Self {
            values,
            role,
            bits_per_symbol,
        })
    }

    pub fn zeros(len: usize, role: LlrRole, bits_per_symbol: usize) -> Result<Self> {
        Self::new(vec![0.0; len], role, bits_per_symbol)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn role(&self) -> LlrRole {
        self.role
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn symbols(&self) -> usize {
        self.values.len() / self.bits_per_symbol
    }

    /// LLR of bit `l` of antenna `i`.
    pub fn bit(&self, i: usize, l: usize) -> f64 {
        self.values[self.bits_per_symbol * i + l]
    }

    /// Same values under a different role tag.
    pub fn with_role(mut self, role: LlrRole) -> Self {
        self.role = role;
        self
    }

    /// Copies the frame, clipping every value to `±LLR_CLIP` and mapping NaN
    /// to zero.
    pub fn clipped(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| clip_llr(v)).collect(),
            ..self.clone()
        }
    }
}

#[inline]
pub fn clip_llr(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-LLR_CLIP, LLR_CLIP)
    }
}

/// `ln P(b = bit)` for a bit with LLR `llr`, i.e. `-ln(1 + e^{-bit * llr})`.
#[inline]
fn log_bit_prob(llr: f64, bit: i8) -> f64 {
    let x = f64::from(bit) * llr;
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x > 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Maps consecutive `M_b`-tuples of `+1/-1` bits to constellation points.
pub fn map_bits(bits: &[i8], constellation: &Constellation) -> Result<ComplexVector> {
    let mb = constellation.bits_per_symbol();
    if bits.is_empty() || bits.len() % mb != 0 {
        return Err(ModemError::LengthMismatch {
            len: bits.len(),
            bits_per_symbol: mb,
        });
    }
    let symbols = bits
        .chunks(mb)
        .map(|chunk| constellation.index_of(chunk).map(|m| constellation.point(m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexVector::new(symbols)?)
}

/// Labels of the given point indices, concatenated.
pub fn demap_indices(indices: &[usize], constellation: &Constellation) -> Vec<i8> {
    indices
        .iter()
        .flat_map(|&m| constellation.label(m).iter().copied())
        .collect()
}

/// Product-form symbol probabilities from per-bit a-priori LLRs.
pub fn apriori_llrs_to_symbol_probs(llrs: &LlrFrame, constellation: &Constellation) -> Result<SymbolProbMatrix> {
    let mb = constellation.bits_per_symbol();
    if llrs.bits_per_symbol() != mb {
        return Err(ModemError::LengthMismatch {
            len: llrs.len(),
            bits_per_symbol: mb,
        });
    }
    let n_t = llrs.symbols();
    let order = constellation.order();
    let mut data = vec![0.0; n_t * order];
    for i in 0..n_t {
        let row = &mut data[i * order..(i + 1) * order];
        for (m, p) in row.iter_mut().enumerate() {
            let log_p: f64 = (0..mb)
                .map(|l| log_bit_prob(llrs.bit(i, l), constellation.label_bit(m, l)))
                .sum();
            *p = log_p.exp();
        }
    }
    Ok(SymbolProbMatrix::from_rows(n_t, order, data))
}

/// `L(b_il) = ln(sum_{A_l^+} P / sum_{A_l^-} P)`, clipped to `±LLR_CLIP`.
pub fn symbol_probs_to_bit_llrs(probs: &SymbolProbMatrix, constellation: &Constellation) -> Result<LlrFrame> {
    check_order(probs, constellation)?;
    let mb = constellation.bits_per_symbol();
    let mut values = Vec::with_capacity(probs.n_t() * mb);
    for i in 0..probs.n_t() {
        let row = probs.row(i);
        for l in 0..mb {
            let (mut plus, mut minus) = (0.0, 0.0);
            for (m, &p) in row.iter().enumerate() {
                if constellation.label_bit(m, l) == 1 {
                    plus += p;
                } else {
                    minus += p;
                }
            }
            values.push(clip_llr((plus / minus).ln()));
        }
    }
    LlrFrame::new(values, LlrRole::APosteriori, mb)
}

/// Bit LLRs from per-row log-probabilities using a log-sum rule over the
/// `A_l^±` halves.
pub fn log_probs_to_bit_llrs(
    log_rows: &[Vec<f64>],
    constellation: &Constellation,
    combine: impl Fn(f64, f64) -> f64,
) -> Result<LlrFrame> {
    let mb = constellation.bits_per_symbol();
    let mut values = Vec::with_capacity(log_rows.len() * mb);
    for row in log_rows {
        if row.len() != constellation.order() {
            return Err(ModemError::OrderMismatch {
                got: row.len(),
                expected: constellation.order(),
            });
        }
        for l in 0..mb {
            let (mut plus, mut minus) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (m, &v) in row.iter().enumerate() {
                if constellation.label_bit(m, l) == 1 {
                    plus = combine(plus, v);
                } else {
                    minus = combine(minus, v);
                }
            }
            values.push(clip_llr(plus - minus));
        }
    }
    LlrFrame::new(values, LlrRole::APosteriori, mb)
}

/// Same as [`log_probs_to_bit_llrs`] with the exact Jacobian logarithm.
pub fn log_probs_to_bit_llrs_exact(log_rows: &[Vec<f64>], constellation: &Constellation) -> Result<LlrFrame> {
    log_probs_to_bit_llrs(log_rows, constellation, max_star)
}

/// Row-wise argmax, ties resolved toward the lowest index.
pub fn hard_decision(probs: &SymbolProbMatrix) -> Vec<usize> {
    (0..probs.n_t())
        .map(|i| {
            probs
                .row(i)
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (m, &p)| if p > best.1 { (m, p) } else { best },
                )
                .0
        })
        .collect()
}

fn check_order(probs: &SymbolProbMatrix, constellation: &Constellation) -> Result<()> {
    if probs.order() != constellation.order() {
        return Err(ModemError::OrderMismatch {
            got: probs.order(),
            expected: constellation.order(),
        });
    }
    Ok(())
}

/// FEC bit `0/1` to the `+1/-1` convention.
#[inline]
pub fn bit_to_sign(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

#[inline]
pub fn sign_to_bit(sign: i8) -> u8 {
    u8::from(sign < 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qam4() -> Constellation {
        build_constellation(ModulationKind::Qam, 4, 1.0).unwrap()
    }

    #[test]
    fn qam4_points_and_energy() {
        let c = qam4();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for p in c.points() {
            assert!((p.re.abs() - s).abs() < 1e-15 && (p.im.abs() - s).abs() < 1e-15);
        }
        assert!((c.mean_energy() - 1.0).abs() < 1e-12);
        assert_eq!(c.label(0), &[1, 1]);
        assert_eq!(c.label(1), &[1, -1]);
        assert_eq!(c.label(2), &[-1, 1]);
        assert_eq!(c.label(3), &[-1, -1]);
    }

    #[test]
    fn pam4_base_levels() {
        let c = Constellation::base(ModulationKind::Pam, 4).unwrap();
        let mut levels: Vec<f64> = c.points().iter().map(|p| p.re).collect();
        levels.sort_by(f64::total_cmp);
        assert_eq!(levels, vec![-3.0, -1.0, 1.0, 3.0]);
        assert!(c.points().iter().all(|p| p.im == 0.0));
    }

    #[test]
    fn unsupported_orders() {
        assert!(Constellation::base(ModulationKind::Qam, 8).is_err());
        assert!(Constellation::base(ModulationKind::Pam, 6).is_err());
        assert!(Constellation::base(ModulationKind::Qam, 1).is_err());
    }

    #[test]
    fn qam16_gray_adjacency() {
        let c = build_constellation(ModulationKind::Qam, 16, 1.0).unwrap();
        assert!((c.mean_energy() - 1.0).abs() < 1e-12);
        let step = 2.0 / 10f64.sqrt();
        let mut pairs = 0;
        for a in 0..16 {
            for b in a + 1..16 {
                let d = c.point(a) - c.point(b);
                let adjacent = ((d.re.abs() - step).abs() < 1e-9 && d.im.abs() < 1e-9)
                    || ((d.im.abs() - step).abs() < 1e-9 && d.re.abs() < 1e-9);
                if adjacent {
                    pairs += 1;
                    let diff = c.label(a).iter().zip(c.label(b)).filter(|(x, y)| x != y).count();
                    assert_eq!(diff, 1, "points {a} and {b}");
                }
            }
        }
        assert_eq!(pairs, 24);
    }

    #[test]
    fn label_halves_partition() {
        for (kind, order) in [
            (ModulationKind::Qam, 4),
            (ModulationKind::Qam, 16),
            (ModulationKind::Qam, 64),
            (ModulationKind::Pam, 8),
        ] {
            let c = build_constellation(kind, order, 1.0).unwrap();
            for l in 0..c.bits_per_symbol() {
                assert_eq!(c.subset(l, 1).count(), order / 2);
                assert_eq!(c.subset(l, -1).count(), order / 2);
            }
            for m in 0..order {
                assert_eq!(c.index_of(c.label(m)).unwrap(), m);
            }
        }
    }

    #[test]
    fn map_all_qam4_labels_roundtrip() {
        let c = qam4();
        for m in 0..4 {
            let s = map_bits(c.label(m), &c).unwrap();
            assert_eq!(s[0], c.point(m));
        }
    }

    #[test]
    fn antenna_order_in_concatenation() {
        let c = qam4();
        let s = map_bits(&[1, 1, -1, -1], &c).unwrap();
        assert_eq!(s[0], c.point(0));
        assert_eq!(s[1], c.point(3));
        assert!(matches!(
            map_bits(&[1, 1, 1], &c),
            Err(ModemError::LengthMismatch { .. })
        ));
        assert!(matches!(map_bits(&[1, 0], &c), Err(ModemError::InvalidBit(0))));
    }

    #[test]
    fn zero_llrs_give_uniform_rows() {
        let c = build_constellation(ModulationKind::Qam, 16, 1.0).unwrap();
        let p = apriori_llrs_to_symbol_probs(&LlrFrame::zeros(12, LlrRole::APriori, 4).unwrap(), &c).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn infinite_llrs_saturate() {
        let c = qam4();
        let l = LlrFrame::new(vec![f64::INFINITY, f64::INFINITY], LlrRole::APriori, 2).unwrap();
        let p = apriori_llrs_to_symbol_probs(&l, &c).unwrap();
        assert_eq!(p.row(0)[0], 1.0);
        assert!(p.row(0)[1..].iter().all(|&v| v <= 1e-299));
    }

    #[test]
    fn product_form_example() {
        let c = qam4();
        let l = LlrFrame::new(vec![3f64.ln(), 0.0], LlrRole::APriori, 2).unwrap();
        let p = apriori_llrs_to_symbol_probs(&l, &c).unwrap();
        for (got, want) in p.row(0).iter().zip([0.375, 0.375, 0.125, 0.125]) {
            assert!((got - want).abs() < 1e-15);
        }
        let back = symbol_probs_to_bit_llrs(&p, &c).unwrap();
        assert!((back.bit(0, 0) - 3f64.ln()).abs() < 1e-12);
        assert!(back.bit(0, 1).abs() < 1e-12);
    }

    #[test]
    fn uniform_row_gives_zero_llrs() {
        let c = build_constellation(ModulationKind::Qam, 16, 1.0).unwrap();
        let l = symbol_probs_to_bit_llrs(&SymbolProbMatrix::uniform(2, 16), &c).unwrap();
        assert!(l.values().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(l.role(), LlrRole::APosteriori);
    }

    #[test]
    fn near_point_mass_row() {
        let c = qam4();
        let eps = 1e-6;
        let p = SymbolProbMatrix::from_rows(1, 4, vec![1.0 - 3.0 * eps, eps, eps, eps]);
        let l = symbol_probs_to_bit_llrs(&p, &c).unwrap();
        let want = ((1.0 - 2.0 * eps) / (2.0 * eps)).ln();
        assert!((l.bit(0, 0) - want).abs() < 1e-9);
        assert!((l.bit(0, 1) - want).abs() < 1e-9);
    }

    #[test]
    fn hard_decision_rules() {
        let ident = SymbolProbMatrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(hard_decision(&ident), vec![0, 1]);
        assert_eq!(hard_decision(&SymbolProbMatrix::uniform(1, 4)), vec![0]);
        let p = SymbolProbMatrix::from_rows(1, 4, vec![0.2, 0.5, 0.2, 0.1]);
        assert_eq!(hard_decision(&p), vec![1]);
    }

    #[test]
    fn llr_frame_checks_length() {
        assert!(LlrFrame::new(vec![0.0; 5], LlrRole::APriori, 2).is_err());
        let f = LlrFrame::new(vec![70.0, f64::NAN], LlrRole::Extrinsic, 2)
            .unwrap()
            .clipped();
        assert_eq!(f.values(), &[LLR_CLIP, 0.0]);
    }

    proptest! {
        #[test]
        fn qam16_frames_roundtrip(bits in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 4..=64)) {
            let c = build_constellation(ModulationKind::Qam, 16, 1.0).unwrap();
            let bits = &bits[..bits.len() / 4 * 4];
            let s = map_bits(bits, &c).unwrap();
            let idx: Vec<usize> = s.as_slice().iter().map(|z| c.points().iter().position(|p| p == z).unwrap()).collect();
            prop_assert_eq!(demap_indices(&idx, &c), bits.to_vec());
        }

        #[test]
        fn llr_prob_conversions_are_inverse(llrs in proptest::collection::vec(-30.0f64..30.0, 8)) {
            let c = build_constellation(ModulationKind::Qam, 16, 1.0).unwrap();
            let frame = LlrFrame::new(llrs.clone(), LlrRole::APriori, 4).unwrap();
            let p = apriori_llrs_to_symbol_probs(&frame, &c).unwrap();
            prop_assert!(p.max_row_error() <= 1e-9);
            let back = symbol_probs_to_bit_llrs(&p, &c).unwrap();
            for (a, b) in llrs.iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
