//! DTLZ2, DTLZ4 and WFG4–9 test problems (minimization).
//!
//! WFG problems use `k = 2(m − 1)` position variables, `l = D − k` distance
//! variables, bounds `[0, 2i]` for variable `i = 1..D`, the concave shape
//! with scaling `S_j = 2j` and no degeneracy (`A = 1`). DTLZ4 uses α = 100.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use super::MoeadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Dtlz2,
    Dtlz4,
    Wfg4,
    Wfg5,
    Wfg6,
    Wfg7,
    Wfg8,
    Wfg9,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 8] = [
        Self::Dtlz2,
        Self::Dtlz4,
        Self::Wfg4,
        Self::Wfg5,
        Self::Wfg6,
        Self::Wfg7,
        Self::Wfg8,
        Self::Wfg9,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dtlz2 => "dtlz2",
            Self::Dtlz4 => "dtlz4",
            Self::Wfg4 => "wfg4",
            Self::Wfg5 => "wfg5",
            Self::Wfg6 => "wfg6",
            Self::Wfg7 => "wfg7",
            Self::Wfg8 => "wfg8",
            Self::Wfg9 => "wfg9",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    pub fn is_wfg(self) -> bool {
        !matches!(self, Self::Dtlz2 | Self::Dtlz4)
    }
}

pub const DTLZ4_ALPHA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Problem {
    kind: ProblemKind,
    m: usize,
    d: usize,
}

impl Problem {
    pub fn new(kind: ProblemKind, m: usize, d: usize) -> Result<Self, MoeadError> {
        if m < 2 {
            return Err(MoeadError::Config("at least two objectives are required"));
        }
        if kind.is_wfg() {
            if d <= 2 * (m - 1) {
                return Err(MoeadError::Config("WFG needs D > 2(m - 1)"));
            }
        } else if d < m {
            return Err(MoeadError::Config("DTLZ needs D >= m"));
        }
        Ok(Self { kind, m, d })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn n_objectives(&self) -> usize {
        self.m
    }

    pub fn n_variables(&self) -> usize {
        self.d
    }

    /// Number of WFG position variables.
    pub fn wfg_k(&self) -> usize {
        2 * (self.m - 1)
    }

    pub fn lower_bound(&self, _i: usize) -> f64 {
        0.0
    }

    pub fn upper_bound(&self, i: usize) -> f64 {
        if self.kind.is_wfg() {
            2.0 * (i + 1) as f64
        } else {
            1.0
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.d).map(|i| (self.lower_bound(i), self.upper_bound(i))).collect()
    }

    /// Per-objective scale of the Pareto front: the front is the positive
    /// octant of the unit sphere stretched by these factors.
    pub fn front_scale(&self) -> Vec<f64> {
        if self.kind.is_wfg() {
            (1..=self.m).map(|j| 2.0 * j as f64).collect()
        } else {
            vec![1.0; self.m]
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, MoeadError> {
        if x.len() != self.d {
            return Err(MoeadError::Dimension {
                expected: self.d,
                actual: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < self.lower_bound(i) || v > self.upper_bound(i) {
                return Err(MoeadError::OutOfBounds { index: i, value: v });
            }
        }
        let f = match self.kind {
            ProblemKind::Dtlz2 => dtlz(x, self.m, 1.0),
            ProblemKind::Dtlz4 => dtlz(x, self.m, DTLZ4_ALPHA),
            _ => self.wfg(x),
        };
        if f.iter().any(|v| !v.is_finite()) {
            return Err(MoeadError::NonFinite("objective value"));
        }
        Ok(f)
    }

    fn wfg(&self, x: &[f64]) -> Vec<f64> {
        let (m, n, k) = (self.m, self.d, self.wfg_k());
        let mut y: Vec<f64> = x.iter().enumerate().map(|(i, &v)| v / self.upper_bound(i)).collect();
        let t = match self.kind {
            ProblemKind::Wfg4 => {
                y.iter_mut().for_each(|v| *v = s_multi(*v, 30.0, 10.0, 0.35));
                reduce_sum(&y, m, k)
            }
            ProblemKind::Wfg5 => {
                y.iter_mut().for_each(|v| *v = s_decept(*v, 0.35, 0.001, 0.05));
                reduce_sum(&y, m, k)
            }
            ProblemKind::Wfg6 => {
                y[k..].iter_mut().for_each(|v| *v = s_linear(*v, 0.35));
                reduce_nonsep(&y, m, k)
            }
            ProblemKind::Wfg7 => {
                for i in 0..k {
                    let u = mean(&y[i + 1..]);
                    y[i] = b_param(y[i], u, 0.98 / 49.98, 0.02, 50.0);
                }
                y[k..].iter_mut().for_each(|v| *v = s_linear(*v, 0.35));
                reduce_sum(&y, m, k)
            }
            ProblemKind::Wfg8 => {
                let orig = y.clone();
                for i in k..n {
                    let u = mean(&orig[..i]);
                    y[i] = b_param(orig[i], u, 0.98 / 49.98, 0.02, 50.0);
                }
                y[k..].iter_mut().for_each(|v| *v = s_linear(*v, 0.35));
                reduce_sum(&y, m, k)
            }
            ProblemKind::Wfg9 => {
                let orig = y.clone();
                for i in 0..n - 1 {
                    let u = mean(&orig[i + 1..]);
                    y[i] = b_param(orig[i], u, 0.98 / 49.98, 0.02, 50.0);
                }
                for (i, v) in y.iter_mut().enumerate() {
                    *v = if i < k {
                        s_decept(*v, 0.35, 0.001, 0.05)
                    } else {
                        s_multi(*v, 30.0, 95.0, 0.35)
                    };
                }
                reduce_nonsep(&y, m, k)
            }
            ProblemKind::Dtlz2 | ProblemKind::Dtlz4 => unreachable!(),
        };
        // With A = 1 the position parameters pass through unchanged.
        let x_m = t[m - 1];
        let pos = &t[..m - 1];
        (1..=m)
            .map(|j| x_m + 2.0 * j as f64 * concave(pos, j))
            .collect()
    }
}

fn dtlz(x: &[f64], m: usize, alpha: f64) -> Vec<f64> {
    let g: f64 = x[m - 1..].iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
    let theta: Vec<f64> = x[..m - 1].iter().map(|&v| libm::pow(v, alpha) * FRAC_PI_2).collect();
    (0..m)
        .map(|j| {
            let mut f = 1.0 + g;
            for th in &theta[..m - 1 - j] {
                f *= libm::cos(*th);
            }
            if j > 0 {
                f *= libm::sin(theta[m - 1 - j]);
            }
            f
        })
        .collect()
}

/// Concave shape `h_j`, `j = 1..=M`, over the `M − 1` position parameters.
fn concave(x: &[f64], j: usize) -> f64 {
    let big_m = x.len() + 1;
    let mut h = 1.0;
    for v in &x[..big_m - j] {
        h *= libm::sin(v * FRAC_PI_2);
    }
    if j > 1 {
        h *= libm::cos(x[big_m - j] * FRAC_PI_2);
    }
    to_unit(h)
}

/// Snaps values within 1e-10 outside `[0, 1]` back onto the interval.
fn to_unit(v: f64) -> f64 {
    const EPS: f64 = 1e-10;
    if (-EPS..0.0).contains(&v) {
        0.0
    } else if v > 1.0 && v <= 1.0 + EPS {
        1.0
    } else {
        v
    }
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

pub fn s_linear(y: f64, a: f64) -> f64 {
    to_unit(libm::fabs(y - a) / libm::fabs(libm::floor(a - y) + a))
}

pub fn s_decept(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let t1 = libm::floor(y - a + b) * (1.0 - c + (a - b) / b) / (a - b);
    let t2 = libm::floor(a + b - y) * (1.0 - c + (1.0 - a - b) / b) / (1.0 - a - b);
    to_unit(1.0 + (libm::fabs(y - a) - b) * (t1 + t2 + 1.0 / b))
}

pub fn s_multi(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let t1 = libm::fabs(y - c) / (2.0 * (libm::floor(c - y) + c));
    let t2 = (4.0 * a + 2.0) * core::f64::consts::PI * (0.5 - t1);
    to_unit((1.0 + libm::cos(t2) + 4.0 * b * t1 * t1) / (b + 2.0))
}

pub fn b_param(y: f64, u: f64, a: f64, b: f64, c: f64) -> f64 {
    let v = a - (1.0 - 2.0 * u) * libm::fabs(libm::floor(0.5 - u) + a);
    to_unit(libm::pow(y, b + (c - b) * v))
}

pub fn r_nonsep(y: &[f64], a: usize) -> f64 {
    let len = y.len();
    let mut num = 0.0;
    for j in 0..len {
        num += y[j];
        for k in 0..a - 1 {
            num += libm::fabs(y[j] - y[(1 + j + k) % len]);
        }
    }
    let half = a.div_ceil(2) as f64;
    let a = a as f64;
    to_unit(num / (len as f64 * half * (1.0 + 2.0 * a - 2.0 * half) / a))
}

fn reduce_sum(y: &[f64], m: usize, k: usize) -> Vec<f64> {
    let gap = k / (m - 1);
    let mut t: Vec<f64> = (0..m - 1).map(|i| to_unit(mean(&y[i * gap..(i + 1) * gap]))).collect();
    t.push(to_unit(mean(&y[k..])));
    t
}

fn reduce_nonsep(y: &[f64], m: usize, k: usize) -> Vec<f64> {
    let gap = k / (m - 1);
    let mut t: Vec<f64> = (0..m - 1).map(|i| r_nonsep(&y[i * gap..(i + 1) * gap], gap)).collect();
    t.push(r_nonsep(&y[k..], y.len() - k));
    t
}
