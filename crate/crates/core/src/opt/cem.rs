//! Cross-entropy method over a diagonal Gaussian.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::CemConfig;

/// Anything the search can rank; lower is better, non-finite is rejected.
pub trait Scored {
    fn score(&self) -> f64;
}

impl Scored for f64 {
    fn score(&self) -> f64 {
        *self
    }
}

/// Per-iteration summary kept in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub episode: usize,
    pub iteration: usize,
    /// Lowest energy among this iteration's candidates.
    pub iteration_best: f64,
    /// Lowest energy over everything evaluated so far in the run.
    pub best_so_far: f64,
    pub n_elite: usize,
    pub n_diverged: usize,
    /// Distribution after the elite update.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Everything an observer may want to audit about one iteration.
pub struct IterationSamples<'a> {
    pub log: &'a IterationLog,
    pub samples: &'a [Vec<f64>],
    pub energies: &'a [f64],
    /// Candidate indices of the elites, best first.
    pub elites: &'a [usize],
    /// Variance after the update (floored).
    pub var: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct CemRun<R> {
    pub best: Vec<f64>,
    pub best_result: R,
    /// (episode, iteration, candidate index) of the best sample.
    pub best_at: (usize, usize, usize),
    pub history: Vec<IterationLog>,
}

/// Every candidate of an iteration had a non-finite energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllDiverged {
    pub episode: usize,
    pub iteration: usize,
}

/// Number of elites for `k` samples.
pub fn elite_count(elite_frac: f64, k: usize) -> usize {
    ((elite_frac * k as f64 - 1e-9).ceil() as usize).clamp(1, k)
}

/// 64-bit FNV-1a over a byte stream.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of the sample stream for one episode of one tagged run.
pub fn stream_seed(seed: u64, tag: &str, episode: usize) -> u64 {
    fnv1a(
        seed.to_le_bytes()
            .into_iter()
            .chain(tag.bytes())
            .chain((episode as u64).to_le_bytes()),
    )
}

/// Energy, sample, result and (episode, iteration, index) of the best
/// candidate so far.
type Best<R> = (f64, Vec<f64>, R, (usize, usize, usize));

/// Minimizes `objective` over R^d starting from N(0, diag(sigma0²)).
///
/// `objective` receives every candidate of an iteration at once and must
/// return one result per candidate, in order. Later episodes restart from
/// the best sample so far with the initial spread.
pub fn cem_minimize<R, F, O>(
    sigma0: &[f64],
    cfg: &CemConfig,
    seed: u64,
    tag: &str,
    mut objective: F,
    mut observer: O,
) -> Result<CemRun<R>, AllDiverged>
where
    R: Scored + Clone,
    F: FnMut(&[Vec<f64>]) -> Vec<R>,
    O: FnMut(&IterationSamples),
{
    let d = sigma0.len();
    let floor2 = cfg.sigma_floor * cfg.sigma_floor;
    let n_elite_max = elite_count(cfg.elite_frac, cfg.samples);
    let mut best: Option<Best<R>> = None;
    let mut history = Vec::new();

    for episode in 0..cfg.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, tag, episode));
        let mut mean = match &best {
            Some((_, x, _, _)) => x.clone(),
            None => vec![0.0; d],
        };
        let mut std: Vec<f64> = sigma0.to_vec();
        for iteration in 0..cfg.iterations {
            let samples: Vec<Vec<f64>> = (0..cfg.samples)
                .map(|_| {
                    (0..d)
                        .map(|j| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            mean[j] + std[j] * z
                        })
                        .collect()
                })
                .collect();
            let results = objective(&samples);
            assert_eq!(results.len(), samples.len(), "one result per candidate");
            let energies: Vec<f64> = results.iter().map(Scored::score).collect();

            let mut order: Vec<usize> = (0..energies.len())
                .filter(|&k| energies[k].is_finite())
                .collect();
            let n_diverged = energies.len() - order.len();
            if order.is_empty() {
                return Err(AllDiverged { episode, iteration });
            }
            order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
            let elites = &order[..n_elite_max.min(order.len())];

            let top = elites[0];
            if best.as_ref().is_none_or(|b| energies[top] < b.0) {
                best = Some((
                    energies[top],
                    samples[top].clone(),
                    results[top].clone(),
                    (episode, iteration, top),
                ));
            }

            let m = elites.len() as f64;
            let mut var = vec![0.0; d];
            for j in 0..d {
                let mu = elites.iter().map(|&k| samples[k][j]).sum::<f64>() / m;
                let v = elites
                    .iter()
                    .map(|&k| (samples[k][j] - mu).powi(2))
                    .sum::<f64>()
                    / m;
                mean[j] = mu;
                var[j] = v.max(floor2);
                std[j] = var[j].sqrt();
            }
            let log = IterationLog {
                episode,
                iteration,
                iteration_best: energies[top],
                best_so_far: best.as_ref().expect("set above").0,
                n_elite: elites.len(),
                n_diverged,
                mean: mean.clone(),
                std: std.clone(),
            };
            observer(&IterationSamples {
                log: &log,
                samples: &samples,
                energies: &energies,
                elites,
                var: &var,
            });
            history.push(log);
        }
    }
    let (_, x, r, at) = best.expect("at least one iteration");
    Ok(CemRun {
        best: x,
        best_result: r,
        best_at: at,
        history,
    })
}
