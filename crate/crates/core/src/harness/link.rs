//! Transmit vectors through fading, noise and (possibly imperfect) channel
//! estimation.

use rand::Rng;

use crate::channel::{add_noise, corrupt_csi, ebn0_to_sigma2, FadingPolicy, NakagamiChannel, NoiseSpec};
use crate::modem::{map_bits, Constellation};
use crate::numerics::{ComplexMatrix, ComplexVector};

use super::config::ExperimentConfig;
use super::Result;

/// Nominal code rate used for the `E_b/N_0` scale.
pub const CODE_RATE: f64 = 0.5;

/// What the receiver gets for one channel use.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: ComplexVector,
    /// The matrix the receiver believes in.
    pub h_est: ComplexMatrix,
    pub h: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct Link {
    channel: NakagamiChannel,
    n_t: usize,
    n_r: usize,
    rho: f64,
    fading: FadingPolicy,
    noise: NoiseSpec,
}

impl Link {
    pub fn new(cfg: &ExperimentConfig, sigma2: f64) -> Result<Self> {
        Ok(Self {
            channel: NakagamiChannel::new(cfg.nakagami_m, cfg.omega)?,
            n_t: cfg.n_t,
            n_r: cfg.n_r,
            rho: cfg.rho,
            fading: cfg.fading,
            noise: NoiseSpec::new(sigma2)?,
        })
    }

    /// Noise variance per real dimension at `ebn0_db` for a coded link with
    /// unit-energy symbols on every transmit antenna.
    pub fn sigma2_for(cfg: &ExperimentConfig, ebn0_db: f64, rate: f64) -> f64 {
        let mb = cfg.order.trailing_zeros() as usize;
        ebn0_to_sigma2(ebn0_db, rate, mb, cfg.n_t, cfg.n_t as f64)
    }

    pub fn sigma2(&self) -> f64 {
        self.noise.sigma2()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let h = self.channel.sample(self.n_r, self.n_t, rng)?;
        let h_est = corrupt_csi(&h, self.rho, rng)?;
        Ok((h, h_est))
    }

    pub fn transmit<R: Rng + ?Sized>(&self, xs: &[ComplexVector], rng: &mut R) -> Result<Vec<Observation>> {
        let mut block = None;
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let (h, h_est) = match (self.fading, &block) {
                (FadingPolicy::PerFrame, Some(b)) => Clone::clone(b),
                _ => {
                    let b = self.draw(rng)?;
                    if self.fading == FadingPolicy::PerFrame {
                        block = Some(b.clone());
                    }
                    b
                }
            };
            let clean = h.mul_vec(x).expect("transmit vector matches the channel");
            out.push(Observation {
                y: add_noise(&clean, self.noise, rng),
                h_est,
                h,
            });
        }
        Ok(out)
    }
}

/// One uncoded channel use with uniformly random bits; returns the bit
/// signs (`+1` for bit 0) in detector order.
pub fn uncoded_use<R: Rng + ?Sized>(
    link: &Link,
    constellation: &Constellation,
    rng: &mut R,
) -> Result<(Vec<i8>, Observation)> {
    let n = link.n_t * constellation.bits_per_symbol();
    let signs: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let x = map_bits(&signs, constellation)?;
    let obs = link
        .transmit(std::slice::from_ref(&x), rng)?
        .pop()
        .expect("one observation");
    Ok((signs, obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::seeding::frame_rng;
    use num_complex::Complex64;

    fn ones(n: usize) -> ComplexVector {
        ComplexVector::new(vec![Complex64::new(1.0, 0.0); n]).unwrap()
    }

    #[test]
    fn fading_policies() {
        let mut cfg = ExperimentConfig::default();
        let xs = vec![ones(2); 5];
        let link = Link::new(&cfg, 0.1).unwrap();
        let obs = link.transmit(&xs, &mut frame_rng(1, 0, 0)).unwrap();
        assert!(obs.windows(2).all(|w| w[0].h != w[1].h));
        assert!(obs.iter().all(|o| o.h == o.h_est));
        cfg.fading = FadingPolicy::PerFrame;
        cfg.rho = 0.9;
        let link = Link::new(&cfg, 0.1).unwrap();
        let obs = link.transmit(&xs, &mut frame_rng(1, 0, 0)).unwrap();
        assert!(obs.windows(2).all(|w| w[0].h == w[1].h && w[0].h_est == w[1].h_est));
        assert!(obs[0].h != obs[0].h_est);
    }

    #[test]
    fn sigma2_scale() {
        // 2x2 4QAM, R = 1/2: E_b = E_s / 2, so 0 dB gives N_0 = 1.
        let cfg = ExperimentConfig::default();
        assert!((Link::sigma2_for(&cfg, 0.0, CODE_RATE) - 0.5).abs() < 1e-15);
    }
}
