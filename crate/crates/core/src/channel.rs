//! BPSK over an AWGN channel, producing channel LLRs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Bit, Error, Llr, Result};

/// Magnitude used for the noiseless channel's LLRs. Finite so that `g`
/// updates never produce `inf - inf`.
pub const NOISELESS_LLR: Llr = 1.0e3;

/// Noise variance for unit-energy BPSK at `ebn0_db` and code rate `rate`.
pub fn noise_variance(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// AWGN channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    ebn0_db: f64,
    rate: f64,
    sigma2: f64,
}

impl ChannelParams {
    /// `rate` counts information bits only (K / N).
    pub fn new(ebn0_db: f64, rate: f64) -> Result<Self> {
        if !ebn0_db.is_finite() || !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "channel ebn0={ebn0_db} dB, rate={rate}"
            )));
        }
        Ok(Self {
            ebn0_db,
            rate,
            sigma2: noise_variance(ebn0_db, rate),
        })
    }

    pub fn ebn0_db(&self) -> f64 {
        self.ebn0_db
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma2
    }
}

/// Channel model used by simulations and profiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    Awgn(ChannelParams),
    /// Error-free channel with confident LLRs.
    Noiseless,
}

impl Channel {
    pub fn awgn(ebn0_db: f64, rate: f64) -> Result<Self> {
        Ok(Channel::Awgn(ChannelParams::new(ebn0_db, rate)?))
    }

    /// Writes the channel LLRs for codeword `x` into `llr`.
    pub fn transmit_into<R: Rng + ?Sized>(&self, x: &[Bit], rng: &mut R, llr: &mut [Llr]) {
        assert_eq!(x.len(), llr.len());
        match self {
            Channel::Awgn(p) => {
                let sigma = p.sigma2.sqrt();
                let scale = 2.0 / p.sigma2;
                for (y, &b) in llr.iter_mut().zip(x) {
                    let s = 1.0 - 2.0 * b as f64;
                    let noise: f64 = rng.sample(StandardNormal);
                    *y = scale * (s + sigma * noise);
                }
            }
            Channel::Noiseless => {
                for (y, &b) in llr.iter_mut().zip(x) {
                    *y = NOISELESS_LLR * (1.0 - 2.0 * b as f64);
                }
            }
        }
    }
}

/// BPSK-modulates `x`, adds Gaussian noise and returns `y_i = 2 r_i / σ²`.
pub fn transmit<R: Rng + ?Sized>(x: &[Bit], params: &ChannelParams, rng: &mut R) -> Vec<Llr> {
    let mut y = vec![0.0; x.len()];
    Channel::Awgn(*params).transmit_into(x, rng, &mut y);
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn variance_formula() {
        let p = ChannelParams::new(0.0, 0.5).unwrap();
        assert!((p.noise_variance() - 1.0).abs() < 1e-12);
        let p = ChannelParams::new(3.0, 0.5).unwrap();
        assert!((p.noise_variance() - 1.0 / 10f64.powf(0.3)).abs() < 1e-12);
        assert!(ChannelParams::new(1.0, 0.0).is_err());
        assert!(ChannelParams::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn high_snr_signs_match_bpsk() {
        let p = ChannelParams::new(40.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Bit> = (0..256).map(|i| (i % 3 == 0) as Bit).collect();
        let y = transmit(&x, &p, &mut rng);
        for (b, l) in x.iter().zip(&y) {
            assert_eq!(*l < 0.0, *b == 1);
        }
        let mut z = vec![0.0; x.len()];
        Channel::Noiseless.transmit_into(&x, &mut rng, &mut z);
        for (b, l) in x.iter().zip(&z) {
            assert_eq!(*l < 0.0, *b == 1);
        }
    }

    #[test]
    fn mean_llr_of_zero_codeword() {
        let p = ChannelParams::new(1.0, 0.5).unwrap();
        let s2 = p.noise_variance();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let y = transmit(&vec![0; n], &p, &mut rng);
        let mean = y.iter().sum::<f64>() / n as f64;
        // y has mean 2/σ² and standard deviation 2/σ
        let se = 2.0 / s2.sqrt() / (n as f64).sqrt();
        assert!((mean - 2.0 / s2).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn empirical_noise_variance_within_one_percent() {
        let p = ChannelParams::new(2.0, 0.5).unwrap();
        let s2 = p.noise_variance();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let y = transmit(&vec![0; n], &p, &mut rng);
        // r = y σ² / 2, noise = r - 1
        let var = y
            .iter()
            .map(|l| {
                let e = l * s2 / 2.0 - 1.0;
                e * e
            })
            .sum::<f64>()
            / n as f64;
        assert!((var / s2 - 1.0).abs() < 0.01, "variance {var} vs {s2}");
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let p = ChannelParams::new(1.5, 0.5).unwrap();
        let x = vec![1, 0, 1, 1, 0, 0, 1, 0];
        let a = transmit(&x, &p, &mut ChaCha8Rng::seed_from_u64(5));
        let b = transmit(&x, &p, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
