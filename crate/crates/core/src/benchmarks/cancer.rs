//! Marked point process of cancer and stromal cells on the unit square,
//! reduced to four hand-crafted statistics.

use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use super::misspec::{MisspecConfig, MisspecVariant};
use crate::error::{Error, Result};
use crate::ndcompute::Array;

pub const CANCER_PARAM_DIM: usize = 3;
pub const CANCER_STAT_DIM: usize = 4;

/// Geometry of the simulator; the defaults are the ones used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CancerGeometry {
    /// Standard deviation of daughter positions around their parent.
    pub daughter_sd: f64,
    /// Radius around a necrotic parent inside which cancer cells are removed.
    pub necrosis_radius: f64,
    /// Stromal cells used for the distance statistics.
    pub distance_sample: usize,
    pub max_attempts: usize,
}

impl Default for CancerGeometry {
    fn default() -> Self {
        Self { daughter_sd: 0.05, necrosis_radius: 0.1, distance_sample: 50, max_attempts: 100 }
    }
}

/// Gamma priors as (shape, rate) for `(λ_c, λ_p, λ_d)`.
pub const PRIORS: [(f64, f64); 3] = [(25.0, 0.03), (45.0, 3.0), (5.0, 0.5)];

pub(crate) fn sample_prior<R: RngCore + ?Sized>(rng: &mut R) -> Vec<f64> {
    PRIORS
        .iter()
        .map(|&(shape, rate)| Gamma::new(shape, 1.0 / rate).expect("fixed Gamma prior").sample(rng))
        .collect()
}

fn poisson<R: RngCore + ?Sized>(rate: f64, rng: &mut R) -> Result<usize> {
    if rate <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(rate).map_err(|_| Error::Contract(format!("invalid Poisson rate {}", rate)))?;
    Ok(p.sample(rng) as usize)
}

fn unit<R: RngCore + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random::<f64>(), rng.random::<f64>()]
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

/// Cell positions `(cancer, stromal)` of one point pattern.
pub type Pattern = (Vec<[f64; 2]>, Vec<[f64; 2]>);

/// Simulate one point pattern.
pub fn simulate_pattern<R: RngCore + ?Sized>(
    theta: &[f64],
    pi: f64,
    geometry: &CancerGeometry,
    rng: &mut R,
) -> Result<Pattern> {
    let (lc, lp, ld) = (theta[0], theta[1], theta[2]);
    let stromal: Vec<[f64; 2]> = (0..poisson(lc, rng)?).map(|_| unit(rng)).collect();
    let offset = Normal::new(0.0, geometry.daughter_sd).map_err(|_| Error::Config("invalid daughter_sd".into()))?;
    let parents: Vec<[f64; 2]> = (0..poisson(lp, rng)?).map(|_| unit(rng)).collect();
    let mut cancer = Vec::new();
    for p in &parents {
        for _ in 0..poisson(ld, rng)? {
            let c = [p[0] + offset.sample(rng), p[1] + offset.sample(rng)];
            if (0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1]) {
                cancer.push(c);
            }
        }
    }
    if pi > 0.0 {
        let r2 = geometry.necrosis_radius * geometry.necrosis_radius;
        let necrotic: Vec<[f64; 2]> = parents.iter().copied().filter(|_| rng.random::<f64>() < pi).collect();
        cancer.retain(|c| necrotic.iter().all(|p| dist2(*c, *p) > r2));
    }
    Ok((cancer, stromal))
}

/// Cancer count, stromal count, mean and max distance from the first
/// `distance_sample` stromal cells to their nearest cancer cell.
pub fn statistics(cancer: &[[f64; 2]], stromal: &[[f64; 2]], geometry: &CancerGeometry) -> [f64; 4] {
    let m = stromal.len().min(geometry.distance_sample);
    let nearest: Vec<f64> = stromal[..m]
        .iter()
        .map(|s| libm::sqrt(cancer.iter().map(|c| dist2(*s, *c)).fold(f64::INFINITY, f64::min)))
        .collect();
    let mean = nearest.iter().sum::<f64>() / m.max(1) as f64;
    let max = nearest.iter().copied().fold(0.0, f64::max);
    [cancer.len() as f64, stromal.len() as f64, mean, max]
}

pub(crate) fn simulate<R: RngCore + ?Sized>(m: &MisspecConfig, theta: &[f64], k: usize, rng: &mut R) -> Result<Array> {
    if theta.len() != CANCER_PARAM_DIM {
        return Err(Error::Dimension { op: "cancer simulate", detail: format!("theta has {} entries", theta.len()) });
    }
    let geometry = CancerGeometry::default();
    let pi = if m.effective() == MisspecVariant::Necrosis { m.pi } else { 0.0 };
    let mut out = Vec::with_capacity(k * CANCER_STAT_DIM);
    for _ in 0..k {
        let mut attempt = 0;
        loop {
            let (cancer, stromal) = simulate_pattern(theta, pi, &geometry, rng)?;
            if !cancer.is_empty() && !stromal.is_empty() {
                out.extend(statistics(&cancer, &stromal, &geometry));
                break;
            }
            attempt += 1;
            if attempt >= geometry.max_attempts {
                return Err(Error::Simulator { attempts: attempt, reason: "a cell class stayed empty".into() });
            }
        }
    }
    Array::matrix(k, CANCER_STAT_DIM, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn prior_means() {
        let mut rng = seeded(1);
        let n = 4000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            for (a, v) in acc.iter_mut().zip(sample_prior(&mut rng)) {
                *a += v / n as f64;
            }
        }
        for (a, (shape, rate)) in acc.iter().zip(PRIORS) {
            let mean = shape / rate;
            assert!((a - mean).abs() < 0.03 * mean, "{} vs {}", a, mean);
        }
    }

    #[test]
    fn statistics_on_tiny_pattern() {
        let g = CancerGeometry::default();
        let s = statistics(&[[0.0, 0.0], [1.0, 1.0]], &[[0.0, 0.5], [0.9, 1.0]], &g);
        assert_eq!(s[0], 2.0);
        assert_eq!(s[1], 2.0);
        assert!((s[2] - 0.3).abs() < 1e-12);
        assert!((s[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_necrosis_lowers_cancer_counts() {
        let theta = [800.0, 15.0, 10.0];
        let mut rng = seeded(4);
        let base = simulate(&MisspecConfig::none(), &theta, 200, &mut rng).unwrap();
        let nec = simulate(&MisspecConfig::necrosis(0.75), &theta, 200, &mut rng).unwrap();
        let mean0 = |a: &Array| (0..a.rows()).map(|i| a.get(i, 0)).sum::<f64>() / a.rows() as f64;
        assert!(mean0(&nec) < 0.6 * mean0(&base));
    }

    #[test]
    fn zero_rates_exhaust_retries() {
        let r = simulate(&MisspecConfig::none(), &[0.0, 0.0, 0.0], 1, &mut seeded(1));
        assert!(matches!(r, Err(Error::Simulator { .. })));
    }
}
