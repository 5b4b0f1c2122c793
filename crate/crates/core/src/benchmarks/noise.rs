use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution};

/// With probability `lambda`, replace the whole observation by independent
/// Beta(2, 5) components. Draws nothing when `lambda == 0`.
pub(crate) fn beta_replace<R: RngCore + ?Sized>(x: &mut [f64], lambda: f64, rng: &mut R) {
    if lambda <= 0.0 {
        return;
    }
    if rng.random::<f64>() < lambda {
        let beta = Beta::new(2.0, 5.0).expect("fixed Beta parameters");
        for xi in x.iter_mut() {
            *xi = beta.sample(rng);
        }
    }
}
