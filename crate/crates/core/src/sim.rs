//! Monte Carlo reference: Lindley recursion with FGM-coupled inputs.
//!
//! Each replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `r`. Every customer consumes a fixed number of uniforms (two, or
//! three in the proportional family), so customer `k` of replication `r`
//! always sees the same keystream words regardless of scheduling.

use crate::copula::sample_pair;
use crate::distlib::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::{Family, QueueModel};
use crate::par::{map_range, Execution};
use crate::stats::{mean_se, MeanSe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_WARMUP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Customers per replication, warmup included.
    pub customers: u64,
    /// Discarded leading customers; `None` picks 1e5, doubled when `rho > 0.8`.
    #[serde(default)]
    pub warmup: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cdf_grid: Option<Vec<f64>>,
}

fn default_replications() -> u32 {
    10
}

impl SimConfig {
    pub fn new(customers: u64, replications: u32, seed: u64) -> Self {
        Self {
            customers,
            warmup: None,
            replications,
            seed,
            cdf_grid: None,
        }
    }

    pub fn effective_warmup(&self, model: &QueueModel) -> u64 {
        self.warmup.unwrap_or(if model.rho() > 0.8 {
            2 * DEFAULT_WARMUP
        } else {
            DEFAULT_WARMUP
        })
    }

    pub fn validate(&self, model: &QueueModel) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("sim.replications must be at least 1".into()));
        }
        let warmup = self.effective_warmup(model);
        if warmup >= self.customers {
            return Err(Error::Config(format!(
                "sim.warmup ({warmup}) must be smaller than sim.customers ({})",
                self.customers
            )));
        }
        if let Some(g) = &self.cdf_grid {
            if g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config("sim.cdf_grid must be finite and strictly increasing".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdfs {
    pub grid: Vec<f64>,
    pub wait: Vec<f64>,
    pub max_overlap: Vec<f64>,
    pub min_overlap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub wait: MeanSe,
    pub max_overlap: MeanSe,
    pub min_overlap: MeanSe,
    pub prob_s_gt_a: MeanSe,
    /// Customers measured per replication.
    pub measured: u64,
    pub warmup: u64,
    pub seed: u64,
    pub streams: Vec<u64>,
    pub diverged: bool,
    pub cdf: Option<EmpiricalCdfs>,
}

/// Interarrival sampler state for one model.
#[derive(Debug, Clone)]
enum Arrival {
    Parametric(DistributionSpec),
    Proportional { lambda: f64, a: Vec<f64>, cum: Vec<f64> },
}

/// Draws `(S, A)` with FGM-coupled uniforms.
#[derive(Debug, Clone)]
pub struct PairSampler {
    theta: crate::copula::Theta,
    service: DistributionSpec,
    arrival: Arrival,
}

impl PairSampler {
    pub fn new(model: &QueueModel) -> Self {
        let arrival = match &model.family {
            Family::Proportional { atoms } => {
                let mut acc = 0.0;
                let cum = atoms
                    .atoms()
                    .iter()
                    .map(|at| {
                        acc += at.p;
                        acc
                    })
                    .collect();
                Arrival::Proportional {
                    lambda: model.lambda,
                    a: atoms.atoms().iter().map(|at| at.a).collect(),
                    cum,
                }
            }
            _ => Arrival::Parametric(model.arrival_spec().expect("parametric arrival")),
        };
        Self {
            theta: model.theta,
            service: model.service.clone(),
            arrival,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u = sample_pair(self.theta, rng);
        let s = self.service.quantile_unchecked(u.u1);
        match &self.arrival {
            Arrival::Parametric(d) => (s, d.quantile_unchecked(u.u2)),
            Arrival::Proportional { lambda, a, cum } => {
                let j = -(-u.u2).ln_1p() / lambda;
                let v: f64 = rng.random();
                let i = cum.partition_point(|&c| c <= v).min(a.len() - 1);
                (s, a[i] * s + j)
            }
        }
    }
}

/// One `(S, A)` draw.
pub fn sample_sa<R: Rng + ?Sized>(model: &QueueModel, rng: &mut R) -> (f64, f64) {
    PairSampler::new(model).sample(rng)
}

/// Generator for replication `r`.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

struct Replication {
    sums: [f64; 4],
    quarters: [f64; 4],
    counts: Option<[Vec<u64>; 3]>,
}

fn run_replication(sampler: &PairSampler, cfg: &SimConfig, warmup: u64, r: u64) -> Replication {
    let mut rng = replication_rng(cfg.seed, r);
    let measured = cfg.customers - warmup;
    let quarter = (measured / 4).max(1);
    let grid = cfg.cdf_grid.as_deref();
    let mut counts = grid.map(|g| [vec![0u64; g.len() + 1], vec![0u64; g.len() + 1], vec![0u64; g.len() + 1]]);
    let mut w = 0.0f64;
    let mut sums = [0.0f64; 4];
    let mut quarters = [0.0f64; 4];
    for k in 0..cfg.customers {
        let (s, a) = sampler.sample(&mut rng);
        let d = s - a;
        if k >= warmup {
            let m = w + d.max(0.0);
            let v = w.min((w + d).max(0.0));
            debug_assert!(v <= w && w <= m);
            sums[0] += w;
            sums[1] += m;
            sums[2] += v;
            sums[3] += f64::from(u8::from(d > 0.0));
            let q = (((k - warmup) / quarter) as usize).min(3);
            quarters[q] += w;
            if let (Some(g), Some(c)) = (grid, counts.as_mut()) {
                // index of the first grid point >= value
                c[0][g.partition_point(|&t| t < w)] += 1;
                c[1][g.partition_point(|&t| t < m)] += 1;
                c[2][g.partition_point(|&t| t < v)] += 1;
            }
        }
        w = (w + d).max(0.0);
    }
    for s in &mut sums {
        *s /= measured as f64;
    }
    Replication {
        sums,
        quarters,
        counts,
    }
}

/// Runs `cfg.replications` independent replications.
pub fn run(model: &QueueModel, cfg: &SimConfig, exec: Execution) -> Result<SimResult> {
    cfg.validate(model)?;
    let warmup = cfg.effective_warmup(model);
    let sampler = PairSampler::new(model);
    let reps = map_range(exec, cfg.replications as usize, |r| {
        run_replication(&sampler, cfg, warmup, r as u64)
    });
    let col = |i: usize| -> Vec<f64> { reps.iter().map(|r| r.sums[i]).collect() };
    let diverged = model.load() >= 1.0
        || reps.iter().any(|r| {
            let q = r.quarters;
            q.windows(2).all(|w| w[1] > w[0]) && q[3] > 2.0 * q[0]
        });
    if diverged {
        log::warn!("simulation looks unstable: waiting times keep growing");
    }
    let measured = cfg.customers - warmup;
    let cdf = cfg.cdf_grid.as_ref().map(|g| {
        let total = measured as f64 * reps.len() as f64;
        let cum = |idx: usize| -> Vec<f64> {
            let mut acc = 0u64;
            (0..g.len())
                .map(|j| {
                    acc += reps.iter().map(|r| r.counts.as_ref().unwrap()[idx][j]).sum::<u64>();
                    acc as f64 / total
                })
                .collect()
        };
        EmpiricalCdfs {
            grid: g.clone(),
            wait: cum(0),
            max_overlap: cum(1),
            min_overlap: cum(2),
        }
    });
    Ok(SimResult {
        wait: mean_se(&col(0)),
        max_overlap: mean_se(&col(1)),
        min_overlap: mean_se(&col(2)),
        prob_s_gt_a: mean_se(&col(3)),
        measured,
        warmup,
        seed: cfg.seed,
        streams: (0..cfg.replications as u64).collect(),
        diverged,
        cdf,
    })
}
