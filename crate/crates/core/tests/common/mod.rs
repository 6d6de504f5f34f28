#![allow(dead_code)]

use aa_admm::{Complex, DMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Largest distance in a greedy nearest-neighbour pairing of two multisets.
pub fn multiset_gap(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "multiset sizes differ");
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Random matrix rescaled to spectral radius `radius`.
pub fn contraction(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DMatrix<f64> {
    let m = gaussian_matrix(rng, n, 1.0);
    let r = aa_admm::jacobian::eigenvalues(&m).unwrap().iter().fold(0.0f64, |r, l| r.max(l.norm()));
    m * (radius / r)
}
