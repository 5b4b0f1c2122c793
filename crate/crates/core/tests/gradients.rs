mod common;

use common::random_problem;
use mspec_core::ndcompute::{Array, Tape};
use mspec_core::rng::{seeded, standard_normals};
use proptest::prelude::*;

#[test]
fn network_and_loss_gradients_match_central_differences() {
    for seed in 0..8 {
        let p = random_problem(100 + seed);
        let err = p.max_relative_error(1e-5, 1e-3);
        assert!(err < 1e-4, "seed {}: relative error {:e}", seed, err);
    }
}

fn fd_scalar(f: &dyn Fn(&Array) -> f64, x: &Array, h: f64) -> Array {
    let mut g = Array::zeros(x.shape());
    for i in 0..x.len() {
        let mut p = x.clone();
        p.data_mut()[i] += h;
        let mut m = x.clone();
        m.data_mut()[i] -= h;
        g.data_mut()[i] = (f(&p) - f(&m)) / (2.0 * h);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random composite graph: matmul, bias, tanh, softplus, pooling and logsumexp.
    #[test]
    fn random_graph_gradients(seed in 0u64..100_000, rows in 1usize..4, seg in 1usize..4, cols in 1usize..4) {
        let mut rng = seeded(seed);
        let n = rows * seg;
        let x = Array::matrix(n, cols, standard_normals(&mut rng, n * cols)).unwrap();
        let w = Array::matrix(cols, 3, standard_normals(&mut rng, cols * 3)).unwrap();
        let b = Array::vector(standard_normals(&mut rng, 3));
        let f = |x: &Array, w: &Array, b: &Array| -> (f64, Vec<Array>) {
            let tape = Tape::new();
            let (xv, wv, bv) = (tape.param(x), tape.param(w), tape.param(b));
            let h = xv.matmul(wv).unwrap().add_row(bv).unwrap().tanh().unwrap();
            let pooled = h.segment_mean(seg).unwrap().add(h.segment_max(seg).unwrap().softplus().unwrap()).unwrap();
            let out = pooled.square().unwrap().sum_cols().unwrap().logsumexp().unwrap();
            let g = tape.backward(out).unwrap();
            (out.item(), vec![g.get(xv), g.get(wv), g.get(bv)])
        };
        let (_, grads) = f(&x, &w, &b);
        let fx = fd_scalar(&|v| f(v, &w, &b).0, &x, 1e-6);
        let fw = fd_scalar(&|v| f(&x, v, &b).0, &w, 1e-6);
        let fb = fd_scalar(&|v| f(&x, &w, v).0, &b, 1e-6);
        for (g, fd) in grads.iter().zip([fx, fw, fb]) {
            for (a, e) in g.data().iter().zip(fd.data()) {
                prop_assert!((a - e).abs() / a.abs().max(e.abs()).max(1e-3) < 1e-4, "{} vs {}", a, e);
            }
        }
    }
}
