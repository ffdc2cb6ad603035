//! Seeded random scenario generation for tests, benchmarks and the
//! `genfixture` command.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contention::{estimate_dsa_throughput, ContentionModel, SlowdownGrid};
use crate::model::{Accelerator, DnnSpec, LayerGroup, Objective, Scenario};

#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub accelerators: usize,
    pub min_dnns: usize,
    pub max_dnns: usize,
    pub min_groups: usize,
    pub max_groups: usize,
    /// Cap on unrolled groups across all DNNs.
    pub max_total_groups: usize,
    pub identity_contention: bool,
    /// Probability that a group is restricted to a single accelerator.
    pub partial_support: f64,
    /// Probability of a dependency edge between consecutive DNNs.
    pub dependency: f64,
    /// Probability that a DNN runs two iterations when the cap allows it.
    pub repeat: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            accelerators: 2,
            min_dnns: 2,
            max_dnns: 3,
            min_groups: 2,
            max_groups: 6,
            max_total_groups: 12,
            identity_contention: false,
            partial_support: 0.1,
            dependency: 0.15,
            repeat: 0.15,
        }
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Accelerator 0 is a white-box GPU; the rest are black-box DSAs whose
/// demand is transferred from the GPU figure through memory-controller
/// utilization ratios.
pub fn random_scenario(seed: u64, spec: &RandomSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = spec.accelerators.max(1);
    let accelerators: Vec<Accelerator> = (0..na)
        .map(|id| Accelerator {
            id,
            name: if id == 0 { "GPU".into() } else { format!("DSA{id}") },
            blackbox: id > 0,
        })
        .collect();

    let n_dnns = rng.random_range(spec.min_dnns..=spec.max_dnns);
    let mut sizes: Vec<usize> = (0..n_dnns)
        .map(|_| rng.random_range(spec.min_groups..=spec.max_groups))
        .collect();
    while sizes.iter().sum::<usize>() > spec.max_total_groups {
        let (i, _) = sizes.iter().enumerate().max_by_key(|&(i, &s)| (s, usize::MAX - i)).unwrap();
        if sizes[i] <= 1 {
            break;
        }
        sizes[i] -= 1;
    }
    let mut total: usize = sizes.iter().sum();
    let mut iterations = vec![1usize; n_dnns];
    for (d, &s) in sizes.iter().enumerate() {
        if rng.random_bool(spec.repeat) && total + s <= spec.max_total_groups {
            iterations[d] = 2;
            total += s;
        }
    }

    let dnns = sizes
        .iter()
        .enumerate()
        .map(|(d, &len)| DnnSpec {
            name: format!("net{d}"),
            groups: (0..len).map(|i| random_group(&mut rng, d, i, na, spec)).collect(),
            iterations: iterations[d],
        })
        .collect();

    let dependencies = (1..n_dnns)
        .filter(|_| rng.random_bool(spec.dependency))
        .map(|c| (c - 1, c))
        .collect();

    let contention = if spec.identity_contention {
        ContentionModel::identity(na)
    } else {
        ContentionModel::new((0..na).map(|_| random_grid(&mut rng)).collect())
    };
    let objective = if rng.random_bool(0.5) {
        Objective::MaxThroughput
    } else {
        Objective::MinMaxLatency
    };
    let epsilon = if rng.random_bool(0.5) { 0.05 } else { 0.5 };
    Scenario::new(accelerators, dnns, dependencies, contention, epsilon, objective)
        .expect("generated scenario is valid")
}

fn random_group(rng: &mut ChaCha8Rng, dnn: usize, index: usize, na: usize, spec: &RandomSpec) -> LayerGroup {
    let mut g = LayerGroup::new(dnn, index);
    let only = (na > 1 && rng.random_bool(spec.partial_support)).then(|| rng.random_range(0..na));
    let gpu_thr = round3(rng.random_range(0.0..60.0));
    let emc_gpu: f64 = rng.random_range(0.2..0.9);
    for a in 0..na {
        if only.is_none_or(|o| o == a) {
            g.exec_time.insert(a, round3(rng.random_range(0.5..5.0)));
        }
        let thr = if a == 0 || gpu_thr == 0.0 {
            gpu_thr
        } else {
            let emc_dsa: f64 = rng.random_range(0.1..0.9);
            round3(estimate_dsa_throughput(gpu_thr, emc_gpu, emc_dsa).unwrap())
        };
        g.req_throughput.insert(a, thr);
        for b in 0..na {
            if a != b {
                g.tau_out.insert((a, b), round3(rng.random_range(0.0..0.4)));
                g.tau_in.insert((a, b), round3(rng.random_range(0.0..0.2)));
            }
        }
    }
    g
}

/// A valid grid: unit first column, non-decreasing along external demand.
pub fn random_grid(rng: &mut impl Rng) -> SlowdownGrid {
    let req = vec![0.0, 30.0, 60.0];
    let ext = vec![0.0, 40.0, 80.0];
    let factor = req
        .iter()
        .map(|_| {
            let mut row = vec![1.0];
            for _ in 1..ext.len() {
                let prev = *row.last().unwrap();
                row.push(round3(prev + rng.random_range(0.0..0.8)));
            }
            row
        })
        .collect();
    SlowdownGrid::new(req, ext, factor).expect("valid random grid")
}

/// One group with the given per-accelerator times and uniform transition
/// costs, for hand-built scenarios.
pub fn uniform_group(
    dnn: usize,
    index: usize,
    exec: &[(usize, f64)],
    thr: f64,
    accelerators: usize,
    tau: f64,
) -> LayerGroup {
    let mut g = LayerGroup::new(dnn, index);
    g.exec_time = exec.iter().copied().collect::<BTreeMap<_, _>>();
    for a in 0..accelerators {
        g.req_throughput.insert(a, thr);
        for b in 0..accelerators {
            if a != b {
                g.tau_out.insert((a, b), tau);
                g.tau_in.insert((a, b), tau);
            }
        }
    }
    g
}
