//! Decomposition-based evolutionary run with DE reproduction, Tchebycheff
//! replacement, an elite archive and adaptive weight adjustment.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::indicators::{distance, dominates, product_of_smallest, sparsity_against, sparsity_levels, tch};
use super::reference::uniform_weights;
use super::{MoeadError, Problem};

pub const NEIGHBORHOOD_SIZES: [usize; 4] = [15, 20, 25, 30];
pub const SCALING_FACTORS: [f64; 4] = [0.4, 0.5, 0.6, 0.7];
pub const K: f64 = 0.5;
/// Offset keeping new AWA weights finite when an objective sits on `z*`.
pub const WEIGHT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Op1,
    Op2,
    Op3,
    Op4,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Self::Op1, Self::Op2, Self::Op3, Self::Op4];

    /// Distinct parents besides the current solution.
    pub fn parents(self) -> usize {
        match self {
            Self::Op1 => 2,
            Self::Op2 => 4,
            Self::Op3 => 5,
            Self::Op4 => 3,
        }
    }
}

/// DE mutant before repair and mutation; `parents` are `x^{(r1)}, x^{(r2)}, …`.
pub fn de_mutant(op: Operator, xi: &[f64], parents: &[&[f64]], f: f64, k: f64) -> Vec<f64> {
    assert!(parents.len() >= op.parents());
    let p = parents;
    (0..xi.len())
        .map(|d| match op {
            Operator::Op1 => xi[d] + f * (p[0][d] - p[1][d]),
            Operator::Op2 => xi[d] + f * (p[0][d] - p[1][d]) + f * (p[2][d] - p[3][d]),
            Operator::Op3 => xi[d] + k * (xi[d] - p[0][d]) + f * (p[1][d] - p[2][d]) + f * (p[3][d] - p[4][d]),
            Operator::Op4 => xi[d] + k * (xi[d] - p[0][d]) + f * (p[1][d] - p[2][d]),
        })
        .collect()
}

pub fn clip_to_bounds(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Polynomial mutation, each variable mutated with probability `prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(x: &mut [f64], bounds: &[(f64, f64)], prob: f64, eta: f64, rng: &mut R) {
    let power = 1.0 / (eta + 1.0);
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        if rng.random::<f64>() >= prob || hi <= lo {
            continue;
        }
        let span = hi - lo;
        let d1 = (*v - lo) / span;
        let d2 = (hi - *v) / span;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * libm::pow(1.0 - d1, eta + 1.0);
            libm::pow(val, power) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * libm::pow(1.0 - d2, eta + 1.0);
            1.0 - libm::pow(val, power)
        };
        *v = (*v + dq * span).clamp(lo, hi);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub neighborhood_size: usize,
    pub operator: Operator,
    pub f: f64,
    pub adapt_weights: bool,
}

impl Action {
    /// Action counts per agent: neighborhood size, operator, F, weights (N/T).
    pub const SIZES: [usize; 4] = [4, 4, 4, 2];
    /// Static configuration: 20 neighbors, OP1, F = 0.5, no weight adaptation.
    pub const DEFAULT_INDICES: [usize; 4] = [1, 0, 1, 0];

    pub fn from_indices(idx: &[usize]) -> Result<Self, MoeadError> {
        if idx.len() != 4 {
            return Err(MoeadError::Dimension {
                expected: 4,
                actual: idx.len(),
            });
        }
        if idx.iter().zip(Self::SIZES).any(|(&a, n)| a >= n) {
            return Err(MoeadError::Config("action index out of range"));
        }
        Ok(Self {
            neighborhood_size: NEIGHBORHOOD_SIZES[idx[0]],
            operator: Operator::ALL[idx[1]],
            f: SCALING_FACTORS[idx[2]],
            adapt_weights: idx[3] == 1,
        })
    }

    pub fn default_static() -> Self {
        Self::from_indices(&Self::DEFAULT_INDICES).expect("valid default")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub population: usize,
    pub neighborhood_size: usize,
    pub mutation_eta: f64,
    pub archive_factor: f64,
    pub adapt_fraction: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            population: 100,
            neighborhood_size: 20,
            mutation_eta: 20.0,
            archive_factor: 1.5,
            adapt_fraction: 0.05,
        }
    }
}

/// Bounded set of mutually non-dominated solutions. When full, the member
/// with the lowest sparsity level inside the archive is evicted.
#[derive(Debug, Clone)]
pub struct EliteArchive {
    capacity: usize,
    m: usize,
    members: Vec<Individual>,
    /// Pairwise objective distances (diagonal unused).
    dist: Vec<Vec<f64>>,
    /// Distance to the m-th nearest other member.
    kth: Vec<f64>,
    sl: Vec<f64>,
    dirty: Vec<bool>,
}

impl EliteArchive {
    pub fn new(capacity: usize, m: usize) -> Self {
        Self {
            capacity,
            m,
            members: Vec::new(),
            dist: Vec::new(),
            kth: Vec::new(),
            sl: Vec::new(),
            dirty: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    /// Adds `ind` unless an existing member dominates or equals it. Returns
    /// whether it was accepted (it may still be the member evicted when the
    /// archive overflows).
    pub fn insert(&mut self, ind: &Individual) -> bool {
        if self.members.iter().any(|e| e.f == ind.f || dominates(&e.f, &ind.f)) {
            return false;
        }
        let mut i = 0;
        while i < self.members.len() {
            if dominates(&ind.f, &self.members[i].f) {
                self.remove(i);
            } else {
                i += 1;
            }
        }
        let row: Vec<f64> = self.members.iter().map(|e| distance(&e.f, &ind.f)).collect();
        for (j, &d) in row.iter().enumerate() {
            self.dist[j].push(d);
            if d < self.kth[j] {
                self.dirty[j] = true;
            }
        }
        let mut own = row;
        own.push(0.0);
        self.dist.push(own);
        self.members.push(ind.clone());
        self.kth.push(f64::INFINITY);
        self.sl.push(0.0);
        self.dirty.push(true);
        if self.members.len() > self.capacity {
            self.refresh();
            let worst = (0..self.sl.len())
                .min_by(|&a, &b| self.sl[a].total_cmp(&self.sl[b]).then(a.cmp(&b)))
                .expect("non-empty archive");
            self.remove(worst);
        }
        true
    }

    fn remove(&mut self, i: usize) {
        for j in 0..self.members.len() {
            if j != i && self.dist[j][i] <= self.kth[j] {
                self.dirty[j] = true;
            }
        }
        self.members.swap_remove(i);
        self.dist.swap_remove(i);
        for row in &mut self.dist {
            row.swap_remove(i);
        }
        self.kth.swap_remove(i);
        self.sl.swap_remove(i);
        self.dirty.swap_remove(i);
    }

    fn refresh(&mut self) {
        let mut buf = Vec::with_capacity(self.members.len());
        for i in 0..self.members.len() {
            if !self.dirty[i] {
                continue;
            }
            buf.clear();
            buf.extend(self.dist[i].iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d));
            self.sl[i] = product_of_smallest(&mut buf, self.m);
            let k = self.m.min(buf.len());
            self.kth[i] = if buf.len() >= self.m {
                buf[..k].iter().copied().fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            self.dirty[i] = false;
        }
    }

    /// Sparsity level of every member within the archive.
    pub fn sparsity_levels(&mut self) -> Vec<f64> {
        self.refresh();
        self.sl.clone()
    }
}

/// One MOEA/D run. All randomness comes from the run's own stream.
#[derive(Debug, Clone)]
pub struct MoeadRun {
    problem: Problem,
    settings: RunSettings,
    bounds: Vec<(f64, f64)>,
    population: Vec<Individual>,
    weights: Vec<Vec<f64>>,
    /// Per subproblem, all subproblems sorted by weight distance (self first).
    neighbor_order: Vec<Vec<usize>>,
    neighborhood_size: usize,
    ideal: Vec<f64>,
    archive: EliteArchive,
    evaluations: u64,
    generation: usize,
    rng: ChaCha8Rng,
}

impl MoeadRun {
    pub fn new(problem: Problem, settings: RunSettings, seed: u64) -> Result<Self, MoeadError> {
        let m = problem.n_objectives();
        if settings.population <= m {
            return Err(MoeadError::Config("population must exceed the number of objectives"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = problem.bounds();
        let weights = uniform_weights(m, settings.population);
        let mut population = Vec::with_capacity(settings.population);
        for _ in 0..settings.population {
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let f = problem.evaluate(&x)?;
            population.push(Individual { x, f });
        }
        let capacity = libm::floor(settings.archive_factor * settings.population as f64) as usize;
        let mut run = Self {
            ideal: vec![f64::INFINITY; m],
            archive: EliteArchive::new(capacity, m),
            neighborhood_size: settings.neighborhood_size,
            neighbor_order: Vec::new(),
            evaluations: settings.population as u64,
            generation: 0,
            problem,
            settings,
            bounds,
            population,
            weights,
            rng,
        };
        for i in 0..run.population.len() {
            let f = run.population[i].f.clone();
            run.update_ideal(&f);
            let ind = run.population[i].clone();
            run.archive.insert(&ind);
        }
        run.rebuild_neighbors();
        Ok(run)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.population.iter().map(|i| i.f.clone()).collect()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn ideal(&self) -> &[f64] {
        &self.ideal
    }

    pub fn archive(&self) -> &EliteArchive {
        &self.archive
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn neighborhood_size(&self) -> usize {
        self.neighborhood_size
    }

    /// Indices of the `T` subproblems with the closest weight vectors,
    /// including `i` itself.
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        let t = self.neighborhood_size.min(self.population.len());
        &self.neighbor_order[i][..t]
    }

    pub fn set_neighborhood_size(&mut self, t: usize) {
        self.neighborhood_size = t.max(1);
    }

    fn rebuild_neighbors(&mut self) {
        let n = self.weights.len();
        self.neighbor_order = (0..n)
            .map(|i| {
                let d: Vec<f64> = self.weights.iter().map(|w| distance(&self.weights[i], w)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                // self first, even if another weight vector coincides with it
                order.sort_by(|&a, &b| {
                    (a != i)
                        .cmp(&(b != i))
                        .then(d[a].total_cmp(&d[b]))
                        .then(a.cmp(&b))
                });
                order
            })
            .collect();
    }

    fn update_ideal(&mut self, f: &[f64]) {
        for (z, &v) in self.ideal.iter_mut().zip(f) {
            if v < *z {
                *z = v;
            }
        }
    }

    /// Draws distinct parents from the neighborhood of `i` (excluding `i`),
    /// falling back to the whole population when the neighborhood is too small.
    pub fn select_parents(&mut self, i: usize, count: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = self.neighborhood(i).iter().copied().filter(|&j| j != i).collect();
        if pool.len() < count {
            pool = (0..self.population.len()).filter(|&j| j != i).collect();
        }
        index::sample(&mut self.rng, pool.len(), count)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    }

    /// Offspring for subproblem `i`: DE mutant, clipped, then mutated.
    pub fn offspring(&mut self, i: usize, op: Operator, f: f64) -> Vec<f64> {
        let parents = self.select_parents(i, op.parents());
        let xs: Vec<&[f64]> = parents.iter().map(|&j| self.population[j].x.as_slice()).collect();
        let mut child = de_mutant(op, &self.population[i].x, &xs, f, K);
        clip_to_bounds(&mut child, &self.bounds);
        let prob = 1.0 / self.bounds.len() as f64;
        polynomial_mutation(&mut child, &self.bounds, prob, self.settings.mutation_eta, &mut self.rng);
        child
    }

    /// Applies an offspring of subproblem `i`: ideal point update, replacement
    /// in the neighborhood (strict improvement) and archive insertion.
    /// Returns how many subproblems took the offspring.
    pub fn apply_offspring(&mut self, i: usize, child: Individual) -> usize {
        self.update_ideal(&child.f);
        let mut replaced = 0;
        let t = self.neighborhood_size.min(self.population.len());
        for k in 0..t {
            let j = self.neighbor_order[i][k];
            let w = &self.weights[j];
            if tch(&child.f, w, &self.ideal) < tch(&self.population[j].f, w, &self.ideal) {
                self.population[j] = child.clone();
                replaced += 1;
            }
        }
        self.archive.insert(&child);
        replaced
    }

    /// One generation under `action`: optional weight adaptation first, then
    /// one offspring per subproblem in index order. Consumes exactly N
    /// evaluations.
    pub fn generation_step(&mut self, action: &Action) -> Result<(), MoeadError> {
        if action.adapt_weights {
            self.adapt_weights();
        }
        self.set_neighborhood_size(action.neighborhood_size);
        for i in 0..self.population.len() {
            let x = self.offspring(i, action.operator, action.f);
            let f = self.problem.evaluate(&x)?;
            self.evaluations += 1;
            self.apply_offspring(i, Individual { x, f });
        }
        self.generation += 1;
        Ok(())
    }

    /// Weight vector for an added solution: `w_j ∝ 1/(f_j − z*_j + ε)`.
    pub fn weight_for(&self, f: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = f
            .iter()
            .zip(&self.ideal)
            .map(|(v, z)| 1.0 / ((v - z).max(0.0) + WEIGHT_EPS))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// Removes the ⌊fraction·N⌋ most crowded subproblems and refills them
    /// one at a time from the archive member farthest (by sparsity level)
    /// from the current population. Neighborhoods are rebuilt afterwards.
    pub fn adapt_weights(&mut self) -> usize {
        let n = self.population.len();
        let count = libm::floor(self.settings.adapt_fraction * n as f64 + 1e-9) as usize;
        if count == 0 {
            return 0;
        }
        let m = self.problem.n_objectives();
        let sl = sparsity_levels(&self.objectives(), m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sl[a].total_cmp(&sl[b]).then(a.cmp(&b)));
        let mut drop = vec![false; n];
        for &i in &order[..count] {
            drop[i] = true;
        }
        let mut keep = drop.iter().map(|d| !d);
        self.population.retain(|_| keep.next().unwrap());
        let mut keep = drop.iter().map(|d| !d);
        self.weights.retain(|_| keep.next().unwrap());

        for _ in 0..count {
            let objs = self.objectives();
            let pick = if self.archive.is_empty() {
                log::warn!("elite archive empty during weight adaptation; duplicating sparsest member");
                let sl = sparsity_levels(&objs, m);
                let best = (0..sl.len())
                    .max_by(|&a, &b| sl[a].total_cmp(&sl[b]).then(b.cmp(&a)))
                    .expect("population is non-empty");
                self.population[best].clone()
            } else {
                let members = self.archive.members();
                let best = (0..members.len())
                    .map(|k| (k, sparsity_against(&members[k].f, &objs, m)))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .expect("archive is non-empty")
                    .0;
                members[best].clone()
            };
            self.weights.push(self.weight_for(&pick.f));
            self.population.push(pick);
        }
        self.rebuild_neighbors();
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moead::ProblemKind;

    fn run(n: usize, seed: u64) -> MoeadRun {
        let problem = Problem::new(ProblemKind::Dtlz2, 3, 6).unwrap();
        let settings = RunSettings {
            population: n,
            ..RunSettings::default()
        };
        MoeadRun::new(problem, settings, seed).unwrap()
    }

    #[test]
    fn operator_examples() {
        let xi = [0.3, 0.6];
        let a = [0.7, 0.2];
        let out = de_mutant(Operator::Op1, &xi, &[&a, &a], 0.6, K);
        assert_eq!(out, xi.to_vec());
        let (r2, r3) = ([0.9, 0.1], [0.4, 0.4]);
        let out = de_mutant(Operator::Op4, &xi, &[&xi, &r2, &r3], 0.5, K);
        for d in 0..2 {
            assert!((out[d] - (xi[d] + 0.5 * (r2[d] - r3[d]))).abs() < 1e-15);
        }
        let mut out = de_mutant(Operator::Op2, &[0.5], &[&[0.9], &[0.1], &[0.8], &[0.2]], 0.5, K);
        assert!((out[0] - 1.2).abs() < 1e-15);
        clip_to_bounds(&mut out, &[(0.0, 1.0)]);
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn default_action_is_static_moead() {
        let a = Action::default_static();
        assert_eq!(a.neighborhood_size, 20);
        assert_eq!(a.operator, Operator::Op1);
        assert_eq!(a.f, 0.5);
        assert!(!a.adapt_weights);
        assert!(Action::from_indices(&[4, 0, 0, 0]).is_err());
    }

    #[test]
    fn neighborhoods_contain_self_first() {
        let r = run(100, 1);
        for i in 0..100 {
            let nb = r.neighborhood(i);
            assert_eq!(nb.len(), 20);
            assert_eq!(nb[0], i);
        }
    }

    #[test]
    fn generation_uses_exactly_n_evaluations_and_keeps_invariants() {
        let mut r = run(100, 2);
        let before = r.evaluations();
        r.generation_step(&Action::from_indices(&[3, 2, 3, 1]).unwrap()).unwrap();
        assert_eq!(r.evaluations() - before, 100);
        assert_eq!(r.population().len(), 100);
        for p in r.population() {
            for (z, f) in r.ideal().iter().zip(&p.f) {
                assert!(z <= f);
            }
        }
        let a = r.archive().members();
        assert!(a.len() <= 150);
        for x in a {
            for y in a {
                assert!(!dominates(&x.f, &y.f));
            }
        }
    }

    #[test]
    fn dominated_offspring_changes_nothing() {
        let mut r = run(30, 3);
        let before = r.population().to_vec();
        let worst = Individual {
            x: vec![1.0; 6],
            f: vec![1e6; 3],
        };
        assert_eq!(r.apply_offspring(0, worst), 0);
        assert_eq!(r.population(), &before[..]);
    }

    #[test]
    fn offspring_below_ideal_moves_ideal() {
        let mut r = run(30, 4);
        let mut f = r.ideal().to_vec();
        f[1] -= 0.25;
        let expected = f[1];
        r.apply_offspring(5, Individual { x: vec![0.5; 6], f });
        assert_eq!(r.ideal()[1], expected);
    }

    #[test]
    fn adaptation_keeps_size_and_simplex() {
        let mut r = run(20, 5);
        assert_eq!(r.adapt_weights(), 1);
        assert_eq!(r.population().len(), 20);
        assert_eq!(r.weights().len(), 20);
        for w in r.weights() {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn archive_eviction_respects_capacity() {
        let mut a = EliteArchive::new(5, 2);
        for k in 0..20 {
            let x = k as f64 / 19.0;
            a.insert(&Individual {
                x: vec![],
                f: vec![x, 1.0 - x],
            });
            assert!(a.len() <= 5);
        }
        assert!(!a.insert(&Individual {
            x: vec![],
            f: vec![2.0, 2.0]
        }));
    }

    #[test]
    fn same_seed_same_population() {
        let mut a = run(50, 9);
        let mut b = run(50, 9);
        let act = Action::from_indices(&[0, 3, 2, 0]).unwrap();
        a.generation_step(&act).unwrap();
        b.generation_step(&act).unwrap();
        assert_eq!(a.population(), b.population());
    }
}
