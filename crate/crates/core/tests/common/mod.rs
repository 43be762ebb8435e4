//! Random small instances and brute-force evaluations of the detector
//! statistics, written directly from their max/sup definitions.
#![allow(dead_code)]

use cyclo_qcd::{BatchPartition, Family, IpidModel, PostChangeGrid};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub const EPSILON: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Instance {
    pub model: IpidModel,
    pub grid: PostChangeGrid,
    pub start: u64,
    pub values: Vec<f64>,
}

impl Instance {
    pub fn batch_of(&self, k: u64) -> usize {
        let t = self.model.period() as u64;
        let phase = (k - 1) % t + 1;
        self.model
            .partition()
            .boundaries()
            .iter()
            .position(|&b| phase <= b as u64)
            .unwrap()
    }

    /// Global index of the i-th value (0-based).
    pub fn index(&self, i: usize) -> u64 {
        self.start + i as u64
    }
}

/// Log-likelihood ratio from the densities, dropping terms common to both.
pub fn oracle_llr(family: Family, theta: f64, lambda: f64, y: f64) -> f64 {
    match family {
        Family::Poisson => (y * lambda.ln() - lambda) - (y * theta.ln() - theta),
        Family::Gaussian { sigma } => {
            ((y - theta).powi(2) - (y - lambda).powi(2)) / (2.0 * sigma * sigma)
        }
    }
}

fn param(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.5..20.0)
}

/// T ≤ 12, E ≤ 3, |Λ^(e)| ≤ 3, n ≤ 60, parameters in [0.5, 20].
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = rng.gen_range(1..=12usize);
    let e = rng.gen_range(1..=period.min(3));
    let mut cuts: Vec<usize> = (1..period).collect::<Vec<_>>();
    cuts.shuffle(&mut rng);
    let mut boundaries: Vec<usize> = cuts[..e - 1].to_vec();
    boundaries.sort_unstable();
    boundaries.push(period);
    let family = if rng.gen_bool(0.7) {
        Family::Poisson
    } else {
        Family::Gaussian {
            sigma: rng.gen_range(0.5..4.0),
        }
    };
    let theta: Vec<f64> = (0..e).map(|_| param(&mut rng)).collect();
    let per_batch: Vec<Vec<f64>> = theta
        .iter()
        .map(|&t| {
            let size = rng.gen_range(1..=3);
            let mut lambdas = Vec::with_capacity(size);
            while lambdas.len() < size {
                let l = param(&mut rng);
                if (l - t).abs() >= EPSILON {
                    lambdas.push(l);
                }
            }
            lambdas
        })
        .collect();
    let partition = BatchPartition::new(period, boundaries).unwrap();
    let model = IpidModel::new(family, partition, theta.clone()).unwrap();
    let grid = PostChangeGrid::new(&model, per_batch.clone(), EPSILON).unwrap();
    let start = rng.gen_range(1..=3 * period as u64);
    let n = rng.gen_range(1..=60usize);
    // Pre-change samples, then post-change from a random alternative per batch.
    let gamma = rng.gen_range(1..=n + 1);
    let post: Vec<f64> = per_batch
        .iter()
        .map(|l| *l.choose(&mut rng).unwrap())
        .collect();
    let mut inst = Instance {
        model,
        grid,
        start,
        values: Vec::new(),
    };
    for i in 0..n {
        let b = inst.batch_of(inst.index(i));
        let p = if i + 1 >= gamma { post[b] } else { theta[b] };
        let y = match family {
            Family::Poisson => Poisson::new(p).unwrap().sample(&mut rng),
            Family::Gaussian { sigma } => Normal::new(p, sigma).unwrap().sample(&mut rng),
        };
        inst.values.push(y);
    }
    inst
}

/// Σ_{i=k..n, b(i)=e} llr(θ^(e), λ, y_i) with 1-based k, n over the values.
pub fn partial_sum(inst: &Instance, e: usize, lambda: f64, k: usize, n: usize) -> f64 {
    let theta = inst.model.theta(e);
    (k..=n)
        .filter(|&i| inst.batch_of(inst.index(i - 1)) == e)
        .map(|i| oracle_llr(inst.model.family(), theta, lambda, inst.values[i - 1]))
        .sum()
}

/// W_n^e = max_{1≤k≤n} max_{λ∈Λ^(e)} partial sum.
pub fn oracle_single(inst: &Instance, e: usize, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 1..=n {
        for &l in inst.grid.alternatives(e) {
            best = best.max(partial_sum(inst, e, l, k, n));
        }
    }
    best
}

/// Every λ-vector of the product grid.
pub fn product_vectors(grid: &PostChangeGrid) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for lambdas in grid.per_batch() {
        out = out
            .into_iter()
            .flat_map(|v| {
                lambdas.iter().map(move |&l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

/// W_n = max over k in `lo..=n` and all λ-vectors of Σ_e partial sums.
pub fn oracle_all_from(inst: &Instance, lo: usize, n: usize) -> f64 {
    let vectors = product_vectors(&inst.grid);
    let mut best = f64::NEG_INFINITY;
    for k in lo..=n {
        for v in &vectors {
            let s: f64 = v
                .iter()
                .enumerate()
                .map(|(e, &l)| partial_sum(inst, e, l, k, n))
                .sum();
            best = best.max(s);
        }
    }
    best
}

pub fn oracle_all(inst: &Instance, n: usize) -> f64 {
    oracle_all_from(inst, 1, n)
}

/// Σ_e max_λ of the full sum from k = 1.
pub fn sandwich_lower(inst: &Instance, n: usize) -> f64 {
    (0..inst.model.num_batches())
        .map(|e| {
            inst.grid
                .alternatives(e)
                .iter()
                .map(|&l| partial_sum(inst, e, l, 1, n))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}
