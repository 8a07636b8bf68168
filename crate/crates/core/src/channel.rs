//! Nakagami-m MIMO channel realisations, AWGN, imperfect CSI and SNR
//! calibration.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::numerics::{ComplexMatrix, ComplexVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("Nakagami fading parameter m = {0} is below 0.5")]
    FadingParameter(f64),
    #[error("mean square envelope must be positive, got {0}")]
    MeanPower(f64),
    #[error("channel-estimation accuracy rho = {0} is outside [0, 1]")]
    Accuracy(f64),
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("antenna counts must be positive")]
    Dimensions,
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// Whether a fresh channel matrix is drawn for every channel use or once per
/// coded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingPolicy {
    #[default]
    PerUse,
    PerFrame,
}

impl std::str::FromStr for FadingPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "per-use" | "use" | "fast" => Ok(FadingPolicy::PerUse),
            "per-frame" | "frame" | "block" => Ok(FadingPolicy::PerFrame),
            other => Err(format!("unknown fading policy `{other}`")),
        }
    }
}

impl std::fmt::Display for FadingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FadingPolicy::PerUse => write!(f, "per-use"),
            FadingPolicy::PerFrame => write!(f, "per-frame"),
        }
    }
}

/// i.i.d. entries `r e^{j theta}` with Nakagami-m envelope `r` and uniform
/// phase `theta`.
#[derive(Debug, Clone, Copy)]
pub struct NakagamiChannel {
    m: f64,
    omega: f64,
    power: Gamma<f64>,
}

impl NakagamiChannel {
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        if !(m >= 0.5) {
            return Err(ChannelError::FadingParameter(m));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(ChannelError::MeanPower(omega));
        }
        // r^2 ~ Gamma(shape m, scale omega / m)
        let power = Gamma::new(m, omega / m).map_err(|_| ChannelError::FadingParameter(m))?;
        Ok(Self { m, omega, power })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// One complex channel coefficient.
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let r = self.power.sample(rng).sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(r, theta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n_r: usize, n_t: usize, rng: &mut R) -> Result<ComplexMatrix> {
        if n_r == 0 || n_t == 0 {
            return Err(ChannelError::Dimensions);
        }
        let data = (0..n_r * n_t).map(|_| self.sample_entry(rng)).collect();
        Ok(ComplexMatrix::new(n_r, n_t, data).expect("finite channel entries"))
    }
}

/// A channel matrix together with the estimate exposed to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub h_est: ComplexMatrix,
    pub rho: f64,
    pub m: f64,
    pub omega: f64,
}

/// Draws `H` (and sets the estimate equal to it).
pub fn sample_channel<R: Rng + ?Sized>(
    m: f64,
    omega: f64,
    n_r: usize,
    n_t: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let h = NakagamiChannel::new(m, omega)?.sample(n_r, n_t, rng)?;
    Ok(ChannelRealization {
        h_est: h.clone(),
        h,
        rho: 1.0,
        m,
        omega,
    })
}

/// Zero-mean circular complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `rho H + sqrt(1 - rho^2) dH` with unit-variance complex Gaussian `dH`.
pub fn corrupt_csi<R: Rng + ?Sized>(h: &ComplexMatrix, rho: f64, rng: &mut R) -> Result<ComplexMatrix> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ChannelError::Accuracy(rho));
    }
    if rho == 1.0 {
        return Ok(h.clone());
    }
    let err_scale = (1.0 - rho * rho).sqrt();
    let data = h
        .as_slice()
        .iter()
        .map(|&z| rho * z + err_scale * complex_gaussian(1.0, rng))
        .collect();
    Ok(ComplexMatrix::new(h.rows(), h.cols(), data).expect("finite estimate"))
}

/// Per-real-dimension noise variance `sigma^2`; complex entries carry
/// `N_0 = 2 sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma2: f64,
}

impl NoiseSpec {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(ChannelError::NoiseVariance(sigma2));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n0(&self) -> f64 {
        2.0 * self.sigma2
    }
}

/// Adds i.i.d. complex Gaussian noise of variance `2 sigma^2` per entry.
pub fn add_noise<R: Rng + ?Sized>(x: &ComplexVector, noise: NoiseSpec, rng: &mut R) -> ComplexVector {
    let n0 = noise.n0();
    let data = x.as_slice().iter().map(|&z| z + complex_gaussian(n0, rng)).collect();
    ComplexVector::new(data).expect("finite received vector")
}

/// `sigma^2 = E_s / (2 R M_b N_t 10^{EbN0/10})`, i.e. `E_b = E_s / (R M_b N_t)`
/// with `E_s` the total transmit energy per channel use.
pub fn ebn0_to_sigma2(ebn0_db: f64, rate: f64, bits_per_symbol: usize, n_t: usize, es: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    es / (2.0 * rate * bits_per_symbol as f64 * n_t as f64 * ebn0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DRAWS: usize = 1_000_000;

    fn envelope_power_moments(m: f64, omega: f64, seed: u64) -> (f64, f64) {
        let ch = NakagamiChannel::new(m, omega).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..DRAWS).map(|_| ch.sample_entry(&mut rng).norm_sqr()).collect();
        let mean = samples.iter().sum::<f64>() / DRAWS as f64;
        let var = samples.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (DRAWS - 1) as f64;
        (mean, var)
    }

    #[test]
    fn rayleigh_mean_power() {
        let (mean, _) = envelope_power_moments(1.0, 1.0, 1);
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn one_sided_gaussian_moments() {
        let (mean, var) = envelope_power_moments(0.5, 1.0, 2);
        assert!((mean - 1.0).abs() < 0.02);
        assert!((var - 2.0).abs() / 2.0 < 0.02);
    }

    #[test]
    fn moment_matching_recovers_m() {
        for (k, m) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
            let (mean, var) = envelope_power_moments(m, 1.0, 10 + k as u64);
            let m_hat = mean * mean / var;
            assert!((m_hat - m).abs() / m < 0.03, "m = {m}, estimate {m_hat}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert_eq!(
            NakagamiChannel::new(0.4, 1.0).unwrap_err(),
            ChannelError::FadingParameter(0.4)
        );
        assert!(NakagamiChannel::new(1.0, 0.0).is_err());
        let h = ComplexMatrix::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(corrupt_csi(&h, 1.5, &mut rng).is_err());
        assert!(corrupt_csi(&h, -0.1, &mut rng).is_err());
        assert!(NoiseSpec::new(0.0).is_err());
    }

    #[test]
    fn phase_is_uniform_and_independent_of_envelope() {
        let ch = NakagamiChannel::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut phases: Vec<f64> = Vec::with_capacity(n);
        for _ in 0..n {
            let z = ch.sample_entry(&mut rng);
            phases.push(z.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU);
        }
        phases.sort_by(f64::total_cmp);
        let ks = phases
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                ((k + 1) as f64 / n as f64 - u)
                    .abs()
                    .max((u - k as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS = {ks}");

        let n = DRAWS;
        let (mut sr, mut sc, mut ss, mut srr, mut scc, mut sss, mut src, mut srs) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = ch.sample_entry(&mut rng);
            let (r, th) = (z.norm(), z.arg());
            let (cs, sn) = (th.cos(), th.sin());
            sr += r;
            sc += cs;
            ss += sn;
            srr += r * r;
            scc += cs * cs;
            sss += sn * sn;
            src += r * cs;
            srs += r * sn;
        }
        let nf = n as f64;
        let corr = |sxy: f64, sx: f64, sy: f64, sxx: f64, syy: f64| {
            let cov = sxy / nf - sx * sy / nf / nf;
            cov / ((sxx / nf - (sx / nf).powi(2)).sqrt() * (syy / nf - (sy / nf).powi(2)).sqrt())
        };
        assert!(corr(src, sr, sc, srr, scc).abs() < 0.01);
        assert!(corr(srs, sr, ss, srr, sss).abs() < 0.01);
    }

    #[test]
    fn perfect_and_useless_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = sample_channel(1.0, 1.0, 2, 2, &mut rng).unwrap();
        assert_eq!(corrupt_csi(&real.h, 1.0, &mut rng).unwrap(), real.h);

        let n = 200_000;
        let h = ComplexMatrix::identity(1);
        let mut power = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let e = corrupt_csi(&h, 0.0, &mut rng).unwrap().get(0, 0);
            power += e.norm_sqr();
            cross += e;
        }
        assert!((power / n as f64 - 1.0).abs() < 0.02);
        assert!((cross / n as f64).norm() < 0.01);
    }

    #[test]
    fn csi_error_moments_at_rho_097() {
        let rho = 0.97;
        let ch = NakagamiChannel::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 500_000;
        let (mut err, mut est) = (0.0, 0.0);
        for _ in 0..n {
            let h = ComplexMatrix::new(1, 1, vec![ch.sample_entry(&mut rng)]).unwrap();
            let e = corrupt_csi(&h, rho, &mut rng).unwrap();
            err += (e.get(0, 0) - h.get(0, 0)).norm_sqr();
            est += e.get(0, 0).norm_sqr();
        }
        let want_err = (1.0 - rho).powi(2) + (1.0 - rho * rho);
        assert!(((err / n as f64) - want_err).abs() / want_err < 0.02);
        let want_est = rho * rho + (1.0 - rho * rho);
        assert!(((est / n as f64) - want_est).abs() / want_est < 0.02);
    }

    #[test]
    fn noise_statistics() {
        let sigma2 = 0.37;
        let noise = NoiseSpec::new(sigma2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ComplexVector::zeros(1);
        let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
        for _ in 0..DRAWS {
            let z = add_noise(&x, noise, &mut rng)[0];
            rr += z.re * z.re;
            ii += z.im * z.im;
            ri += z.re * z.im;
        }
        let n = DRAWS as f64;
        assert!(((rr + ii) / n - 2.0 * sigma2).abs() / (2.0 * sigma2) < 0.01);
        assert!((rr / n - sigma2).abs() / sigma2 < 0.01);
        assert!((ii / n - sigma2).abs() / sigma2 < 0.01);
        assert!((ri / n).abs() / sigma2 < 0.01);
    }

    #[test]
    fn tiny_noise_leaves_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = ComplexVector::new(vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)]).unwrap();
        let y = add_noise(&x, NoiseSpec::new(1e-30).unwrap(), &mut rng);
        for k in 0..2 {
            assert!((y[k] - x[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn ebn0_conversion() {
        assert!((ebn0_to_sigma2(0.0, 0.5, 2, 2, 2.0) - 0.5).abs() < 1e-15);
        assert!(ebn0_to_sigma2(300.0, 0.5, 2, 2, 2.0) < 1e-29);
        let a = ebn0_to_sigma2(3.0, 0.5, 2, 2, 1.0);
        let b = ebn0_to_sigma2(3.0, 0.5, 4, 2, 1.0);
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = sample_channel(1.5, 1.0, 3, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_channel(1.5, 1.0, 3, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
