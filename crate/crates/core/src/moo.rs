//! NSGA-II for the rate/sensing trade-off.
//!
//! Genes are *effective power shares*: gene `(m, i)` is the fraction of
//! DL-RRU `m`'s budget spent on stream `i` (data streams first, pilot
//! last), i.e. `α_{m,i}‖w_{i,m}‖²` and `β_m‖w_s,m‖²`. The per-RRU power
//! constraint is then `Σ shares ≤ 1`, which [`repair_genes`] enforces by
//! proportional scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::BeamNorms;
use crate::comm::PowerAllocation;
use crate::error::{Error, Result};

/// Tolerance on the per-RRU load after repair.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Two maximized objectives: rate `f1` and sensing accuracy `f2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub f1: f64,
    pub f2: f64,
}

impl Objectives {
    pub fn new(f1: f64, f2: f64) -> Self {
        Objectives { f1, f2 }
    }

    /// `self` is at least as good in both objectives and better in one.
    pub fn dominates(&self, other: &Objectives) -> bool {
        self.f1 >= other.f1 && self.f2 >= other.f2 && (self.f1 > other.f1 || self.f2 > other.f2)
    }

    pub fn weakly_dominates(&self, other: &Objectives) -> bool {
        self.f1 >= other.f1 && self.f2 >= other.f2
    }

    fn get(&self, k: usize) -> f64 {
        if k == 0 {
            self.f1
        } else {
            self.f2
        }
    }
}

/// A bounded `[0,1]^n` search space with a repair map and a two-objective
/// evaluator.
pub trait Problem: Sync {
    fn n_genes(&self) -> usize;

    /// Maps arbitrary genes in `[0,1]` onto the feasible set.
    fn repair(&self, genes: &mut [f64]);

    fn evaluate(&self, genes: &[f64]) -> Result<Objectives>;

    /// Largest constraint excess of `genes`; non-positive when feasible.
    fn constraint_excess(&self, genes: &[f64]) -> f64;
}

fn check_shape(genes: &[f64], m_dl: usize, k_dl: usize) {
    assert_eq!(
        genes.len(),
        m_dl * (k_dl + 1),
        "gene vector must hold M_dl·(K_dl+1) shares"
    );
}

/// Per-RRU share sums.
pub fn gene_loads(genes: &[f64], m_dl: usize, k_dl: usize) -> Vec<f64> {
    check_shape(genes, m_dl, k_dl);
    genes.chunks(k_dl + 1).map(|c| c.iter().sum()).collect()
}

/// Clamps genes to `[0,1]` and scales every overloaded RRU back onto
/// its budget.
pub fn repair_genes(genes: &mut [f64], m_dl: usize, k_dl: usize) {
    check_shape(genes, m_dl, k_dl);
    for chunk in genes.chunks_mut(k_dl + 1) {
        for g in chunk.iter_mut() {
            *g = if g.is_nan() { 0.0 } else { g.clamp(0.0, 1.0) };
        }
        // The slack absorbs the rounding of a previous rescale, so a
        // repaired vector is a fixed point.
        let load: f64 = chunk.iter().sum();
        if load > 1.0 + 1e-12 {
            chunk.iter_mut().for_each(|g| *g /= load);
        }
    }
}

/// Converts shares to power factors. A share on a beam of zero norm
/// carries no power and decodes to a zero factor.
pub fn decode_genes(
    genes: &[f64],
    norms: &BeamNorms,
    p_max: f64,
    p_ul: Vec<f64>,
) -> PowerAllocation {
    let (m_dl, k_dl) = (norms.m_dl(), norms.k_dl());
    check_shape(genes, m_dl, k_dl);
    let factor = |share: f64, norm: f64| if norm > 0.0 { share / norm } else { 0.0 };
    let mut alloc = PowerAllocation::zeros(m_dl, k_dl, p_max, p_ul);
    for (m, chunk) in genes.chunks(k_dl + 1).enumerate() {
        for i in 0..k_dl {
            alloc.alpha[m][i] = factor(chunk[i], norms.data[m][i]);
        }
        alloc.beta[m] = factor(chunk[k_dl], norms.pilot[m]);
    }
    alloc
}

/// Inverse of [`decode_genes`].
pub fn encode_allocation(alloc: &PowerAllocation, norms: &BeamNorms) -> Vec<f64> {
    let mut genes = Vec::with_capacity(alloc.m_dl() * (alloc.k_dl() + 1));
    for m in 0..alloc.m_dl() {
        genes.extend(
            alloc.alpha[m]
                .iter()
                .zip(&norms.data[m])
                .map(|(a, w)| a * w),
        );
        genes.push(alloc.beta[m] * norms.pilot[m]);
    }
    genes
}

/// Repairs the genes and decodes them to a feasible allocation.
pub fn repair_to_constraint(
    genes: &[f64],
    norms: &BeamNorms,
    p_max: f64,
    p_ul: Vec<f64>,
) -> PowerAllocation {
    let mut g = genes.to_vec();
    repair_genes(&mut g, norms.m_dl(), norms.k_dl());
    decode_genes(&g, norms, p_max, p_ul)
}

/// Indices of each non-dominated front, best first.
pub fn fast_nondominated_sort(objectives: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for p in 0..n {
        for q in 0..n {
            if objectives[p].dominates(&objectives[q]) {
                dominated_by[p].push(q);
            } else if objectives[q].dominates(&objectives[p]) {
                counts[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&p| counts[p] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Standard crowding distance of each member of `front`, in input order.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for k in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a].get(k).total_cmp(&front[b].get(k)).then(a.cmp(&b)));
        let lo = front[order[0]].get(k);
        let hi = front[order[n - 1]].get(k);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 || !span.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]].get(k) - front[order[w - 1]].get(k);
            dist[order[w]] += gap / span;
        }
    }
    dist
}

/// Area dominated by `points` relative to the origin (both objectives
/// maximized). Points with a negative coordinate contribute nothing.
pub fn hypervolume(points: &[Objectives]) -> f64 {
    let mut pts: Vec<Objectives> = points
        .iter()
        .copied()
        .filter(|p| p.f1 > 0.0 && p.f2 > 0.0)
        .collect();
    pts.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(b.f2.total_cmp(&a.f2)));
    let mut hv = 0.0;
    let mut top = 0.0;
    for p in pts {
        if p.f2 > top {
            hv += p.f1 * (p.f2 - top);
            top = p.f2;
        }
    }
    hv
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsgaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub eta_c: f64,
    /// Per-gene mutation probability; `1/n_genes` when unset.
    pub mutation_prob: Option<f64>,
    pub eta_m: f64,
    /// Set from the run's master seed, never from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        NsgaConfig {
            population: 100,
            generations: 200,
            crossover_prob: 0.9,
            eta_c: 15.0,
            mutation_prob: None,
            eta_m: 20.0,
            seed: 1,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(Error::config(
                "nsga2.population",
                "must be even and at least 4",
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::config("nsga2.crossover_prob", "must lie in [0, 1]"));
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config("nsga2.mutation_prob", "must lie in [0, 1]"));
            }
        }
        if !(self.eta_c >= 0.0 && self.eta_m >= 0.0) {
            return Err(Error::config(
                "nsga2.eta_c",
                "distribution indices must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    /// Repaired genes.
    pub genes: Vec<f64>,
    pub objectives: Objectives,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Non-dominated members sorted by ascending `f1`.
    pub members: Vec<Individual>,
    pub generations: usize,
    pub evaluations: usize,
    pub seed: u64,
    /// Hypervolume of the population's first front, initial population first.
    pub hypervolume_trace: Vec<f64>,
    /// Best `f1` and best `f2` in the population after each generation.
    pub best_trace: Vec<Objectives>,
}

impl ParetoFront {
    pub fn objectives(&self) -> Vec<Objectives> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume(&self.objectives())
    }
}

/// Runs NSGA-II and returns the final population's first front.
pub fn evolve_nsga2<P: Problem + ?Sized>(problem: &P, config: &NsgaConfig) -> Result<ParetoFront> {
    config.validate()?;
    let n = problem.n_genes();
    if n == 0 {
        return Err(Error::InvalidArgument("problem has no genes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p_mut = config.mutation_prob.unwrap_or(1.0 / n as f64);

    let initial: Vec<Vec<f64>> = (0..config.population)
        .map(|_| {
            let mut g: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            problem.repair(&mut g);
            g
        })
        .collect();
    let mut population = evaluate_all(problem, initial)?;
    let mut evaluations = population.len();
    assign_rank_and_crowding(&mut population);

    let mut hypervolume_trace = vec![front_hypervolume(&population)];
    let mut best_trace = vec![best_objectives(&population)];

    for _ in 0..config.generations {
        let mut children = Vec::with_capacity(config.population);
        while children.len() < config.population {
            let a = &population[tournament(&population, &mut rng)].genes;
            let b = &population[tournament(&population, &mut rng)].genes;
            let (mut c1, mut c2) = if rng.random::<f64>() < config.crossover_prob {
                sbx(a, b, config.eta_c, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            for c in [&mut c1, &mut c2] {
                polynomial_mutation(c, p_mut, config.eta_m, &mut rng);
                problem.repair(c);
            }
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate_all(problem, children)?;
        evaluations += offspring.len();
        population.extend(offspring);
        population = environmental_selection(population, config.population);
        hypervolume_trace.push(front_hypervolume(&population));
        best_trace.push(best_objectives(&population));
    }

    let mut members: Vec<Individual> = population.into_iter().filter(|i| i.rank == 0).collect();
    members.sort_by(|a, b| {
        a.objectives
            .f1
            .total_cmp(&b.objectives.f1)
            .then(b.objectives.f2.total_cmp(&a.objectives.f2))
    });
    Ok(ParetoFront {
        members,
        generations: config.generations,
        evaluations,
        seed: config.seed,
        hypervolume_trace,
        best_trace,
    })
}

fn evaluate_all<P: Problem + ?Sized>(problem: &P, genes: Vec<Vec<f64>>) -> Result<Vec<Individual>> {
    genes
        .into_par_iter()
        .map(|g| match problem.evaluate(&g) {
            Ok(objectives) if objectives.f1.is_finite() && objectives.f2.is_finite() => {
                Ok(Individual {
                    genes: g,
                    objectives,
                    rank: 0,
                    crowding: 0.0,
                })
            }
            Ok(objectives) => Err(Error::Evaluation {
                genes: g,
                source: Box::new(Error::InvalidArgument(format!(
                    "non-finite objectives {objectives:?}"
                ))),
            }),
            Err(e) => Err(Error::Evaluation {
                genes: g,
                source: Box::new(e),
            }),
        })
        .collect()
}

fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objs: Vec<Objectives> = pop.iter().map(|i| i.objectives).collect();
    let fronts = fast_nondominated_sort(&objs);
    for (rank, front) in fronts.iter().enumerate() {
        let fo: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&fo)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

fn environmental_selection(mut pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut pool);
    let mut keep = Vec::with_capacity(size);
    for front in fronts {
        if keep.len() + front.len() <= size {
            keep.extend(front);
        } else {
            let mut last = front;
            last.sort_by(|&a, &b| {
                pool[b]
                    .crowding
                    .total_cmp(&pool[a].crowding)
                    .then(a.cmp(&b))
            });
            last.truncate(size - keep.len());
            keep.extend(last);
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = keep
        .into_iter()
        .map(|i| slots[i].take().expect("selected once"))
        .collect();
    // Crowding is reported relative to the survivors.
    assign_rank_and_crowding(&mut next);
    next
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    if better(&pop[j], &pop[i]) {
        j
    } else {
        i
    }
}

/// Bounded simulated binary crossover on `[0,1]`.
fn sbx(a: &[f64], b: &[f64], eta: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for k in 0..a.len() {
        if rng.random::<f64>() > 0.5 || (a[k] - b[k]).abs() < 1e-14 {
            continue;
        }
        let (y1, y2) = if a[k] < b[k] {
            (a[k], b[k])
        } else {
            (b[k], a[k])
        };
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * y1 / (y2 - y1);
        let beta_hi = 1.0 + 2.0 * (1.0 - y2) / (y2 - y1);
        let lo = (0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1))).clamp(0.0, 1.0);
        let hi = (0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1))).clamp(0.0, 1.0);
        if rng.random::<f64>() < 0.5 {
            c1[k] = hi;
            c2[k] = lo;
        } else {
            c1[k] = lo;
            c2[k] = hi;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation on `[0,1]`.
fn polynomial_mutation(genes: &mut [f64], prob: f64, eta: f64, rng: &mut ChaCha8Rng) {
    for g in genes.iter_mut() {
        if rng.random::<f64>() >= prob {
            continue;
        }
        let y = *g;
        let u: f64 = rng.random();
        let power = 1.0 / (eta + 1.0);
        let delta = if u < 0.5 {
            let xy = 1.0 - y;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
            val.powf(power) - 1.0
        } else {
            let xy = y;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
            1.0 - val.powf(power)
        };
        *g = (y + delta).clamp(0.0, 1.0);
    }
}

fn front_hypervolume(pop: &[Individual]) -> f64 {
    let front: Vec<Objectives> = pop
        .iter()
        .filter(|i| i.rank == 0)
        .map(|i| i.objectives)
        .collect();
    hypervolume(&front)
}

fn best_objectives(pop: &[Individual]) -> Objectives {
    Objectives {
        f1: pop
            .iter()
            .map(|i| i.objectives.f1)
            .fold(f64::NEG_INFINITY, f64::max),
        f2: pop
            .iter()
            .map(|i| i.objectives.f2)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn o(f1: f64, f2: f64) -> Objectives {
        Objectives::new(f1, f2)
    }

    /// Concave trade-off on a simplex: f1 = Σ data shares, f2 = √pilot.
    struct Toy {
        m_dl: usize,
        k_dl: usize,
    }

    impl Problem for Toy {
        fn n_genes(&self) -> usize {
            self.m_dl * (self.k_dl + 1)
        }
        fn repair(&self, genes: &mut [f64]) {
            repair_genes(genes, self.m_dl, self.k_dl)
        }
        fn evaluate(&self, genes: &[f64]) -> Result<Objectives> {
            let mut f1 = 0.0;
            let mut f2 = 0.0;
            for c in genes.chunks(self.k_dl + 1) {
                f1 += c[..self.k_dl].iter().map(|x| x.sqrt()).sum::<f64>();
                f2 += c[self.k_dl].sqrt();
            }
            Ok(o(f1, f2))
        }
        fn constraint_excess(&self, genes: &[f64]) -> f64 {
            gene_loads(genes, self.m_dl, self.k_dl)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
                - 1.0
        }
    }

    #[test]
    fn sort_hand_example() {
        let pts = [o(2.0, 2.0), o(1.0, 2.0), o(2.0, 1.0), o(1.0, 1.0)];
        assert_eq!(
            fast_nondominated_sort(&pts),
            vec![vec![0], vec![1, 2], vec![3]]
        );
    }

    #[test]
    fn sort_degenerate_inputs() {
        assert_eq!(fast_nondominated_sort(&[o(1.0, 1.0)]), vec![vec![0]]);
        assert_eq!(
            fast_nondominated_sort(&[o(1.0, 1.0); 4]),
            vec![vec![0, 1, 2, 3]]
        );
        assert!(fast_nondominated_sort(&[]).is_empty());
    }

    #[test]
    fn crowding_boundary_and_interior() {
        assert_eq!(
            crowding_distance(&[o(1.0, 2.0), o(2.0, 1.0)]),
            vec![f64::INFINITY; 2]
        );
        let d = crowding_distance(&[o(0.0, 2.0), o(1.0, 1.0), o(2.0, 0.0)]);
        assert_eq!(d[0], f64::INFINITY);
        assert_eq!(d[2], f64::INFINITY);
        assert_relative_eq!(d[1], 2.0);
    }

    #[test]
    fn crowding_order_invariant() {
        let pts = vec![
            o(0.0, 5.0),
            o(1.0, 3.0),
            o(2.5, 2.0),
            o(4.0, 0.5),
            o(5.0, 0.0),
        ];
        let d = crowding_distance(&pts);
        let perm = [3, 0, 4, 2, 1];
        let shuffled: Vec<Objectives> = perm.iter().map(|&i| pts[i]).collect();
        let ds = crowding_distance(&shuffled);
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(ds[k], d[i]);
        }
    }

    #[test]
    fn repair_examples() {
        let mut zero = vec![0.0; 4];
        repair_genes(&mut zero, 1, 3);
        assert_eq!(zero, vec![0.0; 4]);

        let mut over = vec![0.5, 0.5, 0.6, 0.4];
        repair_genes(&mut over, 1, 3);
        assert_eq!(over, vec![0.25, 0.25, 0.3, 0.2]);
        assert_relative_eq!(gene_loads(&over, 1, 3)[0], 1.0, max_relative = 1e-15);

        let feasible = vec![0.1, 0.2, 0.3, 0.0, 0.5, 0.5];
        let mut again = feasible.clone();
        repair_genes(&mut again, 2, 2);
        assert_eq!(again, feasible);
    }

    #[test]
    fn decode_matches_loads() {
        let norms = BeamNorms {
            data: vec![vec![2.0, 0.5], vec![1.0, 0.0]],
            pilot: vec![1.0, 4.0],
        };
        let alloc = repair_to_constraint(&[0.9, 0.9, 0.2, 0.3, 0.4, 0.3], &norms, 1.0, vec![]);
        let loads = alloc.loads(&norms);
        assert_relative_eq!(loads[0], 1.0, max_relative = 1e-12);
        // The zero-norm beam carries no power.
        assert_relative_eq!(loads[1], 0.6, max_relative = 1e-12);
        assert_eq!(alloc.alpha[1][1], 0.0);
        let genes = encode_allocation(&alloc, &norms);
        assert_relative_eq!(genes[0], 0.45, max_relative = 1e-12);
        assert_relative_eq!(genes[5], 0.3, max_relative = 1e-12);
    }

    #[test]
    fn hypervolume_staircase() {
        assert_eq!(hypervolume(&[]), 0.0);
        assert_relative_eq!(hypervolume(&[o(2.0, 3.0)]), 6.0);
        // Union of [0,3]x[0,1] and [0,1]x[0,3].
        assert_relative_eq!(hypervolume(&[o(3.0, 1.0), o(1.0, 3.0), o(1.0, 1.0)]), 5.0);
    }

    #[test]
    fn zero_generations_returns_initial_front() {
        let toy = Toy { m_dl: 2, k_dl: 2 };
        let cfg = NsgaConfig {
            population: 20,
            generations: 0,
            ..NsgaConfig::default()
        };
        let front = evolve_nsga2(&toy, &cfg).unwrap();
        assert_eq!(front.evaluations, 20);
        assert_eq!(front.hypervolume_trace.len(), 1);
        let objs = front.objectives();
        for a in &objs {
            assert!(!objs.iter().any(|b| b.dominates(a)));
        }
    }

    #[test]
    fn toy_run_is_clean_deterministic_and_elitist() {
        let toy = Toy { m_dl: 2, k_dl: 2 };
        let cfg = NsgaConfig {
            population: 40,
            generations: 60,
            seed: 9,
            ..NsgaConfig::default()
        };
        let front = evolve_nsga2(&toy, &cfg).unwrap();
        assert_eq!(front, evolve_nsga2(&toy, &cfg).unwrap());
        let objs = front.objectives();
        for a in &objs {
            assert!(!objs.iter().any(|b| b.dominates(a)));
        }
        for w in front.members.windows(2) {
            assert!(w[1].objectives.f2 <= w[0].objectives.f2);
        }
        for m in &front.members {
            assert!(toy.constraint_excess(&m.genes) <= CONSTRAINT_TOL);
        }
        for w in front.best_trace.windows(2) {
            assert!(w[1].f1 >= w[0].f1 && w[1].f2 >= w[0].f2);
        }
        assert!(front.hypervolume() >= front.hypervolume_trace[0]);
    }

    #[test]
    fn rejects_odd_population() {
        let toy = Toy { m_dl: 1, k_dl: 1 };
        let cfg = NsgaConfig {
            population: 7,
            ..NsgaConfig::default()
        };
        assert!(matches!(
            evolve_nsga2(&toy, &cfg),
            Err(Error::Config { .. })
        ));
    }

    struct Failing;
    impl Problem for Failing {
        fn n_genes(&self) -> usize {
            2
        }
        fn repair(&self, _: &mut [f64]) {}
        fn evaluate(&self, genes: &[f64]) -> Result<Objectives> {
            if genes[0] > 0.5 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                Ok(o(genes[0], genes[1]))
            }
        }
        fn constraint_excess(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn evaluator_failure_carries_genes() {
        let cfg = NsgaConfig {
            population: 8,
            generations: 1,
            ..NsgaConfig::default()
        };
        match evolve_nsga2(&Failing, &cfg) {
            Err(Error::Evaluation { genes, .. }) => assert!(genes[0] > 0.5),
            other => panic!("expected an evaluation error, got {other:?}"),
        }
    }
}
