//! Objective-space indicators for minimization problems.

use alloc::vec::Vec;

use super::MoeadError;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

/// `a` is no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// Tchebycheff aggregation `max_i w_i·|f_i − z*_i|`.
pub fn tch(f: &[f64], w: &[f64], z_star: &[f64]) -> f64 {
    f.iter()
        .zip(w)
        .zip(z_star)
        .map(|((f, w), z)| w * (f - z).abs())
        .fold(0.0, f64::max)
}

/// Mean distance from each reference point to its nearest approximation point.
pub fn igd<A: AsRef<[f64]>, R: AsRef<[f64]>>(approx: &[A], reference: &[R]) -> Result<f64, MoeadError> {
    if approx.is_empty() || reference.is_empty() {
        return Err(MoeadError::EmptySet);
    }
    let total: f64 = reference
        .iter()
        .map(|r| {
            libm::sqrt(
                approx
                    .iter()
                    .map(|a| squared_distance(a.as_ref(), r.as_ref()))
                    .fold(f64::INFINITY, f64::min),
            )
        })
        .sum();
    Ok(total / reference.len() as f64)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact volume dominated by `points` and bounded by `reference`, for up to
/// three objectives. Points that do not strictly dominate the reference point
/// in every coordinate contribute nothing.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P], reference: &[f64]) -> Result<f64, MoeadError> {
    let m = reference.len();
    if m == 0 {
        return Err(MoeadError::Config("empty reference point"));
    }
    if m > 3 {
        return Err(MoeadError::UnsupportedObjectives(m));
    }
    let mut inside: Vec<&[f64]> = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref();
        if p.len() != m {
            return Err(MoeadError::Dimension {
                expected: m,
                actual: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(MoeadError::NonFinite("objective in hypervolume"));
        }
        if p.iter().zip(reference).all(|(v, r)| v < r) {
            inside.push(p);
        }
    }
    if inside.is_empty() {
        return Ok(0.0);
    }
    Ok(match m {
        1 => reference[0] - inside.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            let mut pts: Vec<(f64, f64)> = inside.iter().map(|p| (p[0], p[1])).collect();
            hv2d(&mut pts, reference[0], reference[1])
        }
        _ => {
            inside.sort_by(|a, b| a[2].total_cmp(&b[2]));
            let mut volume = 0.0;
            let mut slice: Vec<(f64, f64)> = Vec::with_capacity(inside.len());
            for (k, p) in inside.iter().enumerate() {
                slice.push((p[0], p[1]));
                let top = inside.get(k + 1).map_or(reference[2], |q| q[2]);
                if top > p[2] {
                    let mut scratch = slice.clone();
                    volume += hv2d(&mut scratch, reference[0], reference[1]) * (top - p[2]);
                }
            }
            volume
        }
    })
}

fn hv2d(points: &mut [(f64, f64)], rx: f64, ry: f64) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best_y = ry;
    let mut area = 0.0;
    for &(x, y) in points.iter() {
        if y < best_y {
            area += (rx - x) * (best_y - y);
            best_y = y;
        }
    }
    area
}

/// `true` for every point not dominated by another point of the set.
pub fn non_dominated_mask<P: AsRef<[f64]>>(points: &[P]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q.as_ref(), p.as_ref())))
        .collect()
}

pub fn non_dominated_ratio<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let count = non_dominated_mask(points).into_iter().filter(|&b| b).count();
    count as f64 / points.len() as f64
}

/// Mean distance from each point to its nearest other point (0 for fewer
/// than two points).
pub fn mean_nearest_distance<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let total: f64 = (0..points.len())
        .map(|i| {
            libm::sqrt(
                (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| squared_distance(points[i].as_ref(), points[j].as_ref()))
                    .fold(f64::INFINITY, f64::min),
            )
        })
        .sum();
    total / points.len() as f64
}

/// Product of the `m` smallest values of `distances` (all of them when fewer
/// than `m` are given). A point with no neighbors is infinitely sparse.
pub fn product_of_smallest(distances: &mut [f64], m: usize) -> f64 {
    let m = m.min(distances.len());
    if m == 0 {
        return f64::INFINITY;
    }
    if m < distances.len() {
        distances.select_nth_unstable_by(m - 1, f64::total_cmp);
    }
    distances[..m].iter().product()
}

/// Sparsity level of `point` with respect to `others` (the point itself must
/// not be among them): product of the distances to its `m` nearest members.
pub fn sparsity_against<P: AsRef<[f64]>>(point: &[f64], others: &[P], m: usize) -> f64 {
    let mut d: Vec<f64> = others.iter().map(|o| distance(point, o.as_ref())).collect();
    product_of_smallest(&mut d, m)
}

/// Sparsity level of every member of `points` with respect to the rest.
pub fn sparsity_levels<P: AsRef<[f64]>>(points: &[P], m: usize) -> Vec<f64> {
    let n = points.len();
    let mut dist = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(points[i].as_ref(), points[j].as_ref());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut row = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| dist[i * n + j]));
            product_of_smallest(&mut row, m)
        })
        .collect()
}
