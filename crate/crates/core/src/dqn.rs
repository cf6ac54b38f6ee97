//! Deep Q-learning over discretized power shares.
//!
//! One centralized agent acts for all DL-RRUs. An action sets a single
//! share `(m, stream)` to one of `L` grid levels; the environment repairs
//! the shares onto the power constraint and rewards `f1 + b·f2`. Episodes
//! start from all shares at 1, which repairs to equal power allocation.
//!
//! The exploitation convention is inverted with respect to most DQN
//! texts: `ε` is the probability of acting greedily, and it *grows* from
//! `epsilon_start` to `epsilon_end`.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comm::PowerAllocation;
use crate::error::{Error, Result};
use crate::experiments::Scenario;
use crate::moo::{Problem, CONSTRAINT_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Grid levels per share; `j/(L-1)` for `L ≥ 2`, `{1}` for `L = 1`.
    pub levels: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub discount: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Gradient updates between target-network syncs.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which `ε` rises linearly; half the run when unset.
    pub anneal_steps: Option<usize>,
    /// Abort when any Q-value magnitude exceeds this.
    pub q_bound: f64,
    /// Scalarization constant; `f1(EPA)/f2(EPA)` when unset.
    pub scale: Option<f64>,
    /// Set from the run's master seed, never from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            episodes: 40,
            steps_per_episode: 50,
            levels: 10,
            hidden: vec![128, 128],
            learning_rate: 1e-3,
            discount: 0.9,
            buffer_capacity: 10_000,
            batch_size: 64,
            target_sync: 200,
            epsilon_start: 0.1,
            epsilon_end: 0.95,
            anneal_steps: None,
            q_bound: 1e6,
            scale: None,
            seed: 1,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dqn.episodes", self.episodes),
            ("dqn.steps_per_episode", self.steps_per_episode),
            ("dqn.levels", self.levels),
            ("dqn.buffer_capacity", self.buffer_capacity),
            ("dqn.batch_size", self.batch_size),
            ("dqn.target_sync", self.target_sync),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("dqn.hidden", "layer sizes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("dqn.learning_rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("dqn.discount", "must lie in [0, 1]"));
        }
        for (key, e) in [
            ("dqn.epsilon_start", self.epsilon_start),
            ("dqn.epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        if self.epsilon_end < self.epsilon_start {
            return Err(Error::config(
                "dqn.epsilon_end",
                "must not be below epsilon_start",
            ));
        }
        if !(self.q_bound > 0.0) {
            return Err(Error::config("dqn.q_bound", "must be positive"));
        }
        if let Some(b) = self.scale {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::config(
                    "dqn.scale",
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.episodes * self.steps_per_episode
    }

    pub fn level_values(&self) -> Vec<f64> {
        level_grid(self.levels)
    }
}

pub fn level_grid(levels: usize) -> Vec<f64> {
    match levels {
        0 => Vec::new(),
        1 => vec![1.0],
        l => (0..l).map(|j| j as f64 / (l - 1) as f64).collect(),
    }
}

/// Probability of acting greedily at `step`.
pub fn epsilon_schedule(step: usize, config: &DqnConfig) -> f64 {
    let horizon = config
        .anneal_steps
        .unwrap_or(config.total_steps() / 2)
        .max(1);
    let t = (step as f64 / horizon as f64).min(1.0);
    config.epsilon_start + t * (config.epsilon_end - config.epsilon_start)
}

/// `f1 + b·f2` of a feasible allocation.
pub fn reward(scenario: &Scenario, alloc: &PowerAllocation, b: f64) -> Result<f64> {
    alloc.check_feasible(scenario.norms(), CONSTRAINT_TOL)?;
    let f1 = scenario.rates(alloc).f1;
    let f2 = scenario.sensing(alloc)?.f2;
    Ok(f1 + b * f2)
}

/// `f1(EPA)/f2(EPA)`, or zero when sensing is unobservable at EPA.
pub fn calibrate_scale(scenario: &Scenario) -> Result<f64> {
    let epa = scenario.epa_allocation();
    let f1 = scenario.rates(&epa).f1;
    let f2 = scenario.sensing(&epa)?.f2;
    if f2 > 0.0 {
        Ok(f1 / f2)
    } else {
        log::warn!("sensing objective is zero at EPA; scalarization constant set to 0");
        Ok(0.0)
    }
}

/// Action `index` decoded as (gene, level).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionSpec {
    pub rru: usize,
    /// Data stream index, or `None` for the pilot.
    pub stream: Option<usize>,
    pub level: usize,
}

impl ActionSpec {
    pub fn decode(index: usize, k_dl: usize, levels: usize) -> Self {
        let gene = index / levels;
        let level = index % levels;
        let (rru, slot) = (gene / (k_dl + 1), gene % (k_dl + 1));
        ActionSpec {
            rru,
            stream: (slot < k_dl).then_some(slot),
            level,
        }
    }

    pub fn gene(&self, k_dl: usize) -> usize {
        self.rru * (k_dl + 1) + self.stream.unwrap_or(k_dl)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    /// `in × out`
    w: DMatrix<f64>,
    b: DVector<f64>,
}

/// Fully connected network with ReLU hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

struct Cache {
    /// Input to each layer, then the output.
    activations: Vec<DMatrix<f64>>,
}

impl QNetwork {
    /// He-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Dense {
                    w: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-limit..limit)),
                    b: DVector::zeros(w[1]),
                }
            })
            .collect();
        QNetwork { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.w.nrows()).collect();
        s.extend(self.layers.last().map(|l| l.w.ncols()));
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    /// Rows of `x` are samples.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_cached(x)
            .activations
            .pop()
            .expect("output layer")
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        let x = DMatrix::from_row_slice(1, state.len(), state);
        self.forward(&x).row(0).iter().copied().collect()
    }

    fn forward_cached(&self, x: &DMatrix<f64>) -> Cache {
        let mut activations = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations.last().expect("input") * &layer.w;
            for mut row in z.row_iter_mut() {
                row += layer.b.transpose();
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        Cache { activations }
    }

    /// Gradients of `mean_j ½(Q(s_j, a_j) - y_j)²`, and the loss.
    fn gradients(
        &self,
        states: &DMatrix<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> (Vec<Dense>, f64) {
        let cache = self.forward_cached(states);
        let out = cache.activations.last().expect("output");
        let batch = states.nrows() as f64;
        let mut delta = DMatrix::zeros(out.nrows(), out.ncols());
        let mut loss = 0.0;
        for (j, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = out[(j, a)] - y;
            loss += 0.5 * err * err / batch;
            delta[(j, a)] = err / batch;
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &cache.activations[i];
            let gw = input.transpose() * &delta;
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if i > 0 {
                let mut back = &delta * self.layers[i].w.transpose();
                // ReLU derivative from the stored post-activation.
                back.zip_apply(input, |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        (grads, loss)
    }

    /// TD loss of a batch without updating.
    pub fn loss(&self, states: &DMatrix<f64>, actions: &[usize], targets: &[f64]) -> f64 {
        let out = self.forward(states);
        actions
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(j, (&a, &y))| 0.5 * (out[(j, a)] - y).powi(2))
            .sum::<f64>()
            / states.nrows() as f64
    }

    fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat text checkpoint: a header line, the layer sizes, then every
    /// weight matrix (row-major, `in × out`) followed by its bias, one
    /// number per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{CHECKPOINT_HEADER}")?;
        let sizes: Vec<String> = self.sizes().iter().map(usize::to_string).collect();
        writeln!(f, "{}", sizes.join(" "))?;
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                for c in 0..l.w.ncols() {
                    writeln!(f, "{:e}", l.w[(r, c)])?;
                }
            }
            for v in l.b.iter() {
                writeln!(f, "{v:e}")?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("malformed checkpoint: {msg}"));
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end".into()))?
                .map_err(Error::from)
        };
        if next()? != CHECKPOINT_HEADER {
            return Err(bad("missing header".into()));
        }
        let sizes = next()?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if sizes.len() < 2 {
            return Err(bad("need at least two layer sizes".into()));
        }
        let mut layers = Vec::new();
        for w in sizes.windows(2) {
            let mut read = |n: usize| -> Result<Vec<f64>> {
                (0..n)
                    .map(|_| {
                        next()?
                            .trim()
                            .parse::<f64>()
                            .map_err(|e| bad(e.to_string()))
                    })
                    .collect()
            };
            let weights = read(w[0] * w[1])?;
            let bias = read(w[1])?;
            layers.push(Dense {
                w: DMatrix::from_row_slice(w[0], w[1], &weights),
                b: DVector::from_vec(bias),
            });
        }
        Ok(QNetwork { layers })
    }
}

pub const CHECKPOINT_HEADER: &str = "# nafd-isac q-network v1";

/// Adam with the usual `β₁ = 0.9, β₂ = 0.999, ε = 1e-8`.
#[derive(Clone, Debug)]
struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    fn new(net: &QNetwork, lr: f64) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense {
                w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                b: DVector::zeros(l.b.len()),
            })
            .collect();
        Adam {
            lr,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, net: &mut QNetwork, grads: &[Dense]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        };
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &gi), mi), vi) in layer
                .w
                .iter_mut()
                .zip(g.w.iter())
                .zip(m.w.iter_mut())
                .zip(v.w.iter_mut())
            {
                update(p, gi, mi, vi);
            }
            for (((p, &gi), mi), vi) in layer
                .b
                .iter_mut()
                .zip(g.b.iter())
                .zip(m.b.iter_mut())
                .zip(v.b.iter_mut())
            {
                update(p, gi, mi, vi);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// FIFO replay memory with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// `n` draws with replacement.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Experience> {
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// What the agent optimizes: a [`Problem`] plus a fixed feature vector
/// appended to every state.
pub struct Environment<'a> {
    pub problem: &'a dyn Problem,
    pub m_dl: usize,
    pub k_dl: usize,
    pub features: Vec<f64>,
    /// Scalarization constant `b`.
    pub scale: f64,
}

impl Environment<'_> {
    fn reward(&self, repaired: &[f64]) -> Result<f64> {
        let o = self.problem.evaluate(repaired)?;
        Ok(o.f1 + self.scale * o.f2)
    }

    fn repaired(&self, genes: &[f64]) -> Vec<f64> {
        let mut g = genes.to_vec();
        self.problem.repair(&mut g);
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnReport {
    /// Best repaired shares seen, including the episode start.
    pub best_genes: Vec<f64>,
    pub best_reward: f64,
    /// Reward at the episode start (equal power allocation).
    pub reset_reward: f64,
    /// Mean step reward of each episode.
    pub episode_rewards: Vec<f64>,
    /// Best reward seen by the end of each episode.
    pub best_trace: Vec<f64>,
    /// Reward after every step.
    pub step_rewards: Vec<f64>,
    /// Largest constraint excess over every evaluated allocation.
    pub max_constraint_excess: f64,
    pub evaluations: usize,
    /// Greedy rollout from the episode start with the final network.
    pub greedy_genes: Vec<f64>,
    pub greedy_reward: f64,
    pub scale: f64,
    pub network: QNetwork,
}

impl DqnReport {
    pub fn trace_csv_header() -> Vec<String> {
        ["episode", "mean_reward", "best_reward"]
            .map(String::from)
            .to_vec()
    }

    pub fn trace_csv_rows(&self) -> Vec<Vec<String>> {
        self.episode_rewards
            .iter()
            .zip(&self.best_trace)
            .enumerate()
            .map(|(e, (m, b))| vec![e.to_string(), m.to_string(), b.to_string()])
            .collect()
    }
}

/// Trains on a scenario with `b` from the config or calibrated at EPA.
pub fn train_dqn(scenario: &Scenario, config: &DqnConfig) -> Result<DqnReport> {
    let scale = match config.scale {
        Some(b) => b,
        None => calibrate_scale(scenario)?,
    };
    let env = Environment {
        problem: scenario,
        m_dl: scenario.m_dl(),
        k_dl: scenario.k_dl(),
        features: standardized(&scenario.csi_summary()),
        scale,
    };
    train_agent(&env, config)
}

fn standardized(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    x.iter()
        .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
        .collect()
}

fn state_vector(genes: &[f64], features: &[f64]) -> Vec<f64> {
    genes.iter().chain(features).copied().collect()
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// The training loop, generic over the environment.
pub fn train_agent(env: &Environment<'_>, config: &DqnConfig) -> Result<DqnReport> {
    config.validate()?;
    let n_genes = env.m_dl * (env.k_dl + 1);
    if n_genes == 0 || env.problem.n_genes() != n_genes {
        return Err(Error::InvalidArgument(
            "environment gene count does not match M_dl·(K_dl+1)".into(),
        ));
    }
    let levels = config.level_values();
    let n_actions = n_genes * levels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut sizes = vec![n_genes + env.features.len()];
    sizes.extend(&config.hidden);
    sizes.push(n_actions);
    let mut online = QNetwork::new(&sizes, &mut rng);
    let mut target = online.clone();
    let mut adam = Adam::new(&online, config.learning_rate);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);

    let reset = vec![1.0; n_genes];
    let reset_repaired = env.repaired(&reset);
    let reset_reward = env.reward(&reset_repaired)?;
    // The reward is learned relative to the starting point's magnitude.
    let norm = if reset_reward.abs() > 0.0 {
        reset_reward.abs()
    } else {
        1.0
    };

    let mut best_genes = reset_repaired.clone();
    let mut best_reward = reset_reward;
    let mut max_excess = env.problem.constraint_excess(&reset_repaired);
    let mut evaluations = 1;
    let mut episode_rewards = Vec::with_capacity(config.episodes);
    let mut best_trace = Vec::with_capacity(config.episodes);
    let mut step_rewards = Vec::with_capacity(config.total_steps());
    let mut updates = 0usize;
    let mut step = 0usize;

    for _ in 0..config.episodes {
        let mut genes = reset.clone();
        let mut episode_sum = 0.0;
        for _ in 0..config.steps_per_episode {
            let state = state_vector(&genes, &env.features);
            let action = if rng.random::<f64>() < epsilon_schedule(step, config) {
                let q = online.q_values(&state);
                let peak = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if !(peak <= config.q_bound) {
                    return Err(Error::Diverged {
                        step,
                        magnitude: peak,
                        bound: config.q_bound,
                        trace: step_rewards,
                    });
                }
                argmax(&q)
            } else {
                rng.random_range(0..n_actions)
            };
            let spec = ActionSpec::decode(action, env.k_dl, levels.len());
            genes[spec.gene(env.k_dl)] = levels[spec.level];
            let repaired = env.repaired(&genes);
            max_excess = max_excess.max(env.problem.constraint_excess(&repaired));
            let r = env.reward(&repaired)?;
            evaluations += 1;
            if r > best_reward {
                best_reward = r;
                best_genes = repaired;
            }
            episode_sum += r;
            step_rewards.push(r);
            buffer.push(Experience {
                state,
                action,
                reward: r / norm,
                next_state: state_vector(&genes, &env.features),
            });

            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(config.batch_size, &mut rng);
                let width = batch[0].state.len();
                let states = DMatrix::from_row_iterator(
                    batch.len(),
                    width,
                    batch.iter().flat_map(|e| e.state.iter().copied()),
                );
                let next = DMatrix::from_row_iterator(
                    batch.len(),
                    width,
                    batch.iter().flat_map(|e| e.next_state.iter().copied()),
                );
                let q_next = target.forward(&next);
                let targets: Vec<f64> = batch
                    .iter()
                    .enumerate()
                    .map(|(j, e)| e.reward + config.discount * q_next.row(j).max())
                    .collect();
                let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
                let (grads, _) = online.gradients(&states, &actions, &targets);
                adam.step(&mut online, &grads);
                updates += 1;
                if updates % config.target_sync == 0 {
                    target = online.clone();
                }
                let magnitude = online.max_abs();
                if !magnitude.is_finite() {
                    return Err(Error::Diverged {
                        step,
                        magnitude,
                        bound: config.q_bound,
                        trace: step_rewards,
                    });
                }
            }
            step += 1;
        }
        episode_rewards.push(episode_sum / config.steps_per_episode as f64);
        best_trace.push(best_reward);
    }

    let (greedy_genes, greedy_reward) =
        greedy_rollout(env, &online, &levels, config.steps_per_episode)?;
    max_excess = max_excess.max(env.problem.constraint_excess(&greedy_genes));
    Ok(DqnReport {
        best_genes,
        best_reward,
        reset_reward,
        episode_rewards,
        best_trace,
        step_rewards,
        max_constraint_excess: max_excess,
        evaluations,
        greedy_genes,
        greedy_reward,
        scale: env.scale,
        network: online,
    })
}

/// Follows the greedy policy from the episode start and returns the best
/// repaired shares along the way.
fn greedy_rollout(
    env: &Environment<'_>,
    net: &QNetwork,
    levels: &[f64],
    steps: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut genes = vec![1.0; env.m_dl * (env.k_dl + 1)];
    let mut best = env.repaired(&genes);
    let mut best_r = env.reward(&best)?;
    for _ in 0..steps {
        let spec = ActionSpec::decode(
            argmax(&net.q_values(&state_vector(&genes, &env.features))),
            env.k_dl,
            levels.len(),
        );
        genes[spec.gene(env.k_dl)] = levels[spec.level];
        let repaired = env.repaired(&genes);
        let r = env.reward(&repaired)?;
        if r > best_r {
            best_r = r;
            best = repaired;
        }
    }
    Ok((best, best_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moo::{gene_loads, repair_genes, Objectives};
    use approx::assert_relative_eq;

    struct Toy;

    impl Problem for Toy {
        fn n_genes(&self) -> usize {
            6
        }
        fn repair(&self, genes: &mut [f64]) {
            repair_genes(genes, 2, 2)
        }
        fn evaluate(&self, genes: &[f64]) -> Result<Objectives> {
            // Rewards data on RRU 0 and pilot on RRU 1.
            Ok(Objectives::new(genes[0] + genes[1], genes[5].sqrt()))
        }
        fn constraint_excess(&self, genes: &[f64]) -> f64 {
            gene_loads(genes, 2, 2)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
                - 1.0
        }
    }

    fn env(scale: f64) -> Environment<'static> {
        Environment {
            problem: &Toy,
            m_dl: 2,
            k_dl: 2,
            features: vec![0.5, -0.5],
            scale,
        }
    }

    fn small_config() -> DqnConfig {
        DqnConfig {
            episodes: 12,
            steps_per_episode: 20,
            hidden: vec![32, 32],
            batch_size: 16,
            target_sync: 50,
            levels: 5,
            ..DqnConfig::default()
        }
    }

    #[test]
    fn epsilon_endpoints_and_monotone() {
        let cfg = DqnConfig::default();
        assert_eq!(epsilon_schedule(0, &cfg), 0.1);
        assert_relative_eq!(epsilon_schedule(cfg.total_steps(), &cfg), 0.95);
        assert_relative_eq!(epsilon_schedule(10 * cfg.total_steps(), &cfg), 0.95);
        let mut prev = 0.0;
        for s in 0..cfg.total_steps() {
            let e = epsilon_schedule(s, &cfg);
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn level_grid_shapes() {
        assert_eq!(level_grid(1), vec![1.0]);
        assert_eq!(level_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(level_grid(10).len(), 10);
    }

    #[test]
    fn action_round_trip() {
        let (k, l) = (3, 10);
        for idx in 0..2 * (k + 1) * l {
            let a = ActionSpec::decode(idx, k, l);
            assert_eq!(a.gene(k) * l + a.level, idx);
        }
        assert_eq!(ActionSpec::decode(39, 3, 10).stream, None);
    }

    #[test]
    fn replay_is_fifo() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(Experience {
                state: vec![],
                action: i,
                reward: 0.0,
                next_state: vec![],
            });
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).unwrap().action, 2);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::new(&[3, 5, 4], &mut rng);
        let x = DMatrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
        let actions = [0, 3, 1, 3];
        let targets = [0.2, -0.4, 1.0, 0.0];
        let (grads, _) = net.gradients(&x, &actions, &targets);
        let h = 1e-6;
        for (li, (r, c)) in [(0, (1, 2)), (1, (4, 3)), (0, (2, 0))] {
            let mut plus = net.clone();
            plus.layers[li].w[(r, c)] += h;
            let mut minus = net.clone();
            minus.layers[li].w[(r, c)] -= h;
            let fd = (plus.loss(&x, &actions, &targets) - minus.loss(&x, &actions, &targets))
                / (2.0 * h);
            assert_relative_eq!(grads[li].w[(r, c)], fd, max_relative = 1e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_step_reduces_td_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = QNetwork::new(&[4, 16, 6], &mut rng);
        let x = DMatrix::from_fn(8, 4, |i, j| ((i + 2 * j) as f64).cos());
        let actions = [0, 1, 2, 3, 4, 5, 0, 1];
        let targets = [1.0, 0.5, -0.5, 0.2, 0.0, 0.7, 1.0, 0.5];
        let before = net.loss(&x, &actions, &targets);
        let (grads, loss) = net.gradients(&x, &actions, &targets);
        assert_relative_eq!(loss, before, max_relative = 1e-12);
        let mut adam = Adam::new(&net, 1e-4);
        adam.step(&mut net, &grads);
        assert!(net.loss(&x, &actions, &targets) < before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = QNetwork::new(&[3, 4, 2], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.txt");
        net.save(&path).unwrap();
        assert_eq!(QNetwork::load(&path).unwrap(), net);
        std::fs::write(&path, "nonsense\n").unwrap();
        assert!(QNetwork::load(&path).is_err());
    }

    #[test]
    fn single_level_is_a_fixed_point() {
        let cfg = DqnConfig {
            levels: 1,
            ..small_config()
        };
        let report = train_agent(&env(1.0), &cfg).unwrap();
        assert!(report
            .step_rewards
            .iter()
            .all(|&r| r == report.reset_reward));
        assert_eq!(report.best_reward, report.reset_reward);
        assert_eq!(report.best_genes, vec![1.0 / 3.0; 6]);
    }

    #[test]
    fn training_is_deterministic_feasible_and_monotone() {
        let cfg = small_config();
        let a = train_agent(&env(1.0), &cfg).unwrap();
        let b = train_agent(&env(1.0), &cfg).unwrap();
        assert_eq!(a.step_rewards, b.step_rewards);
        assert_eq!(a.best_genes, b.best_genes);
        assert!(a.max_constraint_excess <= CONSTRAINT_TOL);
        assert!(a.best_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(a.best_reward >= a.reset_reward);
        assert!(
            a.best_reward > a.reset_reward,
            "the toy optimum is far from equal shares"
        );
    }

    #[test]
    fn divergence_guard_fires() {
        let cfg = DqnConfig {
            q_bound: 1e-12,
            epsilon_start: 1.0,
            epsilon_end: 1.0,
            ..small_config()
        };
        assert!(matches!(
            train_agent(&env(1.0), &cfg),
            Err(Error::Diverged { step: 0, .. })
        ));
    }
}
