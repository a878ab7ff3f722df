//! Simplex-lattice weight vectors and reference Pareto fronts.

use alloc::vec;
use alloc::vec::Vec;

use super::Problem;

/// Smallest reference set size used for IGD.
pub const REFERENCE_POINTS: usize = 500;

/// All vectors with entries `k/h`, `k ∈ 0..=h`, summing to one, in
/// lexicographic order of the integer numerators.
pub fn simplex_lattice(m: usize, h: usize) -> Vec<Vec<f64>> {
    fn fill(m: usize, left: usize, h: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == m - 1 {
            out.push(
                prefix
                    .iter()
                    .chain(core::iter::once(&left))
                    .map(|&k| k as f64 / h as f64)
                    .collect(),
            );
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(m, left - k, h, prefix, out);
            prefix.pop();
        }
    }
    assert!(m >= 1 && h >= 1);
    let mut out = Vec::new();
    fill(m, h, h, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Number of lattice points, `C(h + m − 1, m − 1)`.
pub fn lattice_size(m: usize, h: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..m {
        c = c * (h + i) as u128 / i as u128;
    }
    c as usize
}

/// Smallest lattice parameter giving at least `n` points.
pub fn lattice_parameter(m: usize, n: usize) -> usize {
    let mut h = 1;
    while lattice_size(m, h) < n {
        h += 1;
    }
    h
}

/// Exactly `n` weight vectors: the first `n` points of the smallest lattice
/// holding at least `n`.
pub fn uniform_weights(m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut w = simplex_lattice(m, lattice_parameter(m, n));
    w.truncate(n);
    w
}

/// Reference front: lattice directions projected onto the unit sphere and
/// stretched by the problem's per-objective front scale.
pub fn reference_front(problem: &Problem) -> Vec<Vec<f64>> {
    let m = problem.n_objectives();
    let scale = problem.front_scale();
    simplex_lattice(m, lattice_parameter(m, REFERENCE_POINTS))
        .into_iter()
        .map(|dir| {
            let norm = libm::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
            dir.iter().zip(&scale).map(|(v, s)| s * v / norm).collect()
        })
        .collect()
}

/// Per-objective maxima of a point set.
pub fn column_max(points: &[Vec<f64>]) -> Vec<f64> {
    let m = points.first().map_or(0, Vec::len);
    let mut out = vec![f64::NEG_INFINITY; m];
    for p in points {
        for (o, v) in out.iter_mut().zip(p) {
            *o = o.max(*v);
        }
    }
    out
}
