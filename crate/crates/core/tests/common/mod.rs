//! Brute-force reference computations shared by the integration tests.
//! They use only the index conventions of the lattice, not its methods.

#![allow(dead_code)]

use rand::Rng;
use zdtoric::cell::{CellVector, MEASURED_PLAQUETTES};
use zdtoric::{NoiseModel, QuditDistribution, Zd};

pub fn h(l: usize, x: usize, y: usize) -> usize {
    2 * ((y % l) * l + x % l)
}

pub fn v(l: usize, x: usize, y: usize) -> usize {
    2 * ((y % l) * l + x % l) + 1
}

/// Plaquette charges, index `y L + x`.
pub fn syndrome(l: usize, d: usize, ex: &[u8]) -> Vec<u8> {
    let mut s = vec![0u8; l * l];
    for y in 0..l {
        for x in 0..l {
            let c = ex[h(l, x, y)] as usize + ex[v(l, x, y)] as usize + 2 * d
                - ex[h(l, x, y + 1)] as usize
                - ex[v(l, x + 1, y)] as usize;
            s[y * l + x] = (c % d) as u8;
        }
    }
    s
}

/// `(Σ_x h(x, 0), Σ_y v(0, y))` mod d.
pub fn winding(l: usize, d: usize, ex: &[u8]) -> (usize, usize) {
    let w1: usize = (0..l).map(|x| ex[h(l, x, 0)] as usize).sum();
    let w2: usize = (0..l).map(|y| ex[v(l, 0, y)] as usize).sum();
    (w1 % d, w2 % d)
}

/// Normalized class probabilities by summing every error in `Z_d^n` whose
/// syndrome is `target`, indexed `w1 · d + w2`.
pub fn brute_force_classes(l: usize, d: usize, probs: &[Vec<f64>], target: &[u8]) -> Vec<f64> {
    let n = 2 * l * l;
    let mut ex = vec![0u8; n];
    let mut acc = vec![0.0; d * d];
    loop {
        if syndrome(l, d, &ex) == target {
            let p: f64 = ex
                .iter()
                .enumerate()
                .map(|(e, &k)| probs[e][k as usize])
                .product();
            let (w1, w2) = winding(l, d, &ex);
            acc[w1 * d + w2] += p;
        }
        let mut e = 0;
        loop {
            if e == n {
                let total: f64 = acc.iter().sum();
                return acc.iter().map(|a| a / total).collect();
            }
            ex[e] += 1;
            if (ex[e] as usize) < d {
                break;
            }
            ex[e] = 0;
            e += 1;
        }
    }
}

/// Charges of the three measured cell plaquettes.
pub fn cell_defect(d: usize, x: &CellVector) -> [u8; 3] {
    MEASURED_PLAQUETTES.map(|plaq| {
        let c: i64 = plaq.iter().map(|&(q, s)| s as i64 * x[q] as i64).sum();
        c.rem_euclid(d as i64) as u8
    })
}

/// Every vector of `Z_d^10`.
pub fn all_cell_vectors(d: usize) -> impl Iterator<Item = CellVector> {
    (0..d.pow(10)).map(move |mut i| {
        let mut x = [0u8; 10];
        for q in x.iter_mut() {
            *q = (i % d) as u8;
            i /= d;
        }
        x
    })
}

/// Random distribution with every entry positive.
pub fn random_dist<R: Rng>(rng: &mut R, d: usize) -> QuditDistribution {
    QuditDistribution::from_weights((0..d).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap()
}

pub fn random_noise<R: Rng>(rng: &mut R, m: Zd, edges: usize) -> (NoiseModel, Vec<Vec<f64>>) {
    let dists: Vec<QuditDistribution> =
        (0..edges).map(|_| random_dist(rng, m.as_usize())).collect();
    let probs = dists.iter().map(|q| q.probs().to_vec()).collect();
    (NoiseModel::from_edges(m, &dists).unwrap(), probs)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
