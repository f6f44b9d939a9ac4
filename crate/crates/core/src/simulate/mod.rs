//! Monte-Carlo check of the containment event: over a surely-degraded
//! broadcast channel, the `rho`-decoder on `Z` never fails while the
//! `q`-decoder on `Y` succeeds.
//!
//! Each trial draws its own `ChaCha20` stream (seed, stream = trial index),
//! so reports do not depend on scheduling. Codeword 0 is always sent.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cc_bound::gamma_cc_membership;
use crate::error::{Error, Result};
use crate::metric::{gamma_membership, AdditiveMetric, DEFAULT_TIE_TOL};
use crate::optim::SolverConfig;
use crate::prob::{BroadcastChannel, ProbVector};

/// 97.5% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookMode {
    /// Letters drawn i.i.d. from the composition.
    Iid,
    /// Uniform over the type class of the composition.
    ConstantComposition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub blocklength: usize,
    pub codebook_size: usize,
    pub composition: ProbVector,
    pub mode: CodebookMode,
    pub trials: u64,
    pub seed: u64,
}

impl SimConfig {
    /// The letter counts of the composition at this blocklength.
    fn type_counts(&self) -> Result<Vec<usize>> {
        let n = self.blocklength as f64;
        self.composition
            .as_slice()
            .iter()
            .map(|&p| {
                let c = p * n;
                if (c - c.round()).abs() > 1e-9 {
                    Err(Error::InvalidArgument(format!(
                        "composition is not a type of length {}",
                        self.blocklength
                    )))
                } else {
                    Ok(c.round() as usize)
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.blocklength == 0 || self.codebook_size == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument(
                "blocklength, codebook size and trials must be positive".into(),
            ));
        }
        if self.mode == CodebookMode::ConstantComposition {
            self.type_counts()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub trials: u64,
    pub both_correct: u64,
    pub q_correct_rho_wrong: u64,
    pub q_wrong_rho_correct: u64,
    pub both_wrong: u64,
    /// Trials where the `q`-decoder had several maximizers (scored wrong).
    pub q_ties: u64,
    pub rho_ties: u64,
}

impl SimReport {
    pub fn q_errors(&self) -> u64 {
        self.q_wrong_rho_correct + self.both_wrong
    }

    pub fn rho_errors(&self) -> u64 {
        self.q_correct_rho_wrong + self.both_wrong
    }

    fn add(mut self, o: Self) -> Self {
        self.trials += o.trials;
        self.both_correct += o.both_correct;
        self.q_correct_rho_wrong += o.q_correct_rho_wrong;
        self.q_wrong_rho_correct += o.q_wrong_rho_correct;
        self.both_wrong += o.both_wrong;
        self.q_ties += o.q_ties;
        self.rho_ties += o.rho_ties;
        self
    }
}

/// Runs the simulation after checking that `channel` is surely degraded:
/// `Gamma(q, rho)` for i.i.d. codebooks, `Gamma(q, rho, P)` for constant
/// composition ones.
pub fn simulate_containment(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    sim: &SimConfig,
) -> Result<SimReport> {
    let member = match sim.mode {
        CodebookMode::Iid => gamma_membership(channel, q, rho, DEFAULT_TIE_TOL)?.member,
        CodebookMode::ConstantComposition => {
            gamma_cc_membership(channel, q, rho, &sim.composition, &SolverConfig::default())?.member
        }
    };
    if !member {
        return Err(Error::NotMember(
            "channel is not surely degraded for this metric pair".into(),
        ));
    }
    simulate_joint(channel, q, rho, sim)
}

/// The same experiment without the membership precondition.
pub fn simulate_joint(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    sim: &SimConfig,
) -> Result<SimReport> {
    sim.validate()?;
    let (nx, ny, nz) = (channel.nx(), channel.ny(), channel.nz());
    if (q.inputs(), q.outputs()) != (nx, ny) || (rho.inputs(), rho.outputs()) != (nx, nz) {
        return Err(Error::DimensionMismatch(format!(
            "channel is {nx}x{ny}x{nz}, metrics are {}x{} and {}x{}",
            q.inputs(),
            q.outputs(),
            rho.inputs(),
            rho.outputs()
        )));
    }
    if sim.composition.len() != nx {
        return Err(Error::DimensionMismatch(format!(
            "composition has {} symbols, channel {nx}",
            sim.composition.len()
        )));
    }
    let outputs: Vec<Option<WeightedIndex<f64>>> = (0..nx)
        .map(|x| WeightedIndex::new(channel.slice(x)).ok())
        .collect();
    let letters = WeightedIndex::new(sim.composition.as_slice())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let base: Vec<usize> = match sim.mode {
        CodebookMode::Iid => Vec::new(),
        CodebookMode::ConstantComposition => sim
            .type_counts()?
            .iter()
            .enumerate()
            .flat_map(|(x, &c)| std::iter::repeat_n(x, c))
            .collect(),
    };
    let n = sim.blocklength;
    let scale = |m: &AdditiveMetric| {
        1.0 + m.as_flat().iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()))
    };
    let (q_eps, rho_eps) = (1e-9 * n as f64 * scale(q), 1e-9 * n as f64 * scale(rho));

    let report = (0..sim.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha20Rng::seed_from_u64(sim.seed);
            rng.set_stream(trial);
            let book: Vec<Vec<usize>> = (0..sim.codebook_size)
                .map(|_| match sim.mode {
                    CodebookMode::Iid => (0..n).map(|_| letters.sample(&mut rng)).collect(),
                    CodebookMode::ConstantComposition => {
                        let mut w = base.clone();
                        w.shuffle(&mut rng);
                        w
                    }
                })
                .collect();
            let mut ys = Vec::with_capacity(n);
            let mut zs = Vec::with_capacity(n);
            for &x in &book[0] {
                let cell = outputs[x]
                    .as_ref()
                    .expect("sent letters have positive probability")
                    .sample(&mut rng);
                ys.push(cell / nz);
                zs.push(cell % nz);
            }
            let (q_ok, q_tie) = decode(&book, |x, i| q.get(x, ys[i]), q_eps);
            let (r_ok, r_tie) = decode(&book, |x, i| rho.get(x, zs[i]), rho_eps);
            SimReport {
                trials: 1,
                both_correct: (q_ok && r_ok) as u64,
                q_correct_rho_wrong: (q_ok && !r_ok) as u64,
                q_wrong_rho_correct: (!q_ok && r_ok) as u64,
                both_wrong: (!q_ok && !r_ok) as u64,
                q_ties: q_tie as u64,
                rho_ties: r_tie as u64,
            }
        })
        .reduce(SimReport::default, SimReport::add);
    Ok(report)
}

/// Whether codeword 0 is the unique maximizer (within `eps`), and whether
/// it tied with a competitor.
fn decode(book: &[Vec<usize>], score: impl Fn(usize, usize) -> f64, eps: f64) -> (bool, bool) {
    let total = |word: &[usize]| word.iter().enumerate().map(|(i, &x)| score(x, i)).sum::<f64>();
    let sent = total(&book[0]);
    let mut tie = false;
    for word in &book[1..] {
        let s = total(word);
        if s > sent + eps {
            return (false, false);
        }
        if s >= sent - eps {
            tie = true;
        }
    }
    (!tie, tie)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    /// Wilson score interval at 95%.
    pub interval: (f64, f64),
}

impl ErrorEstimate {
    fn new(errors: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = errors as f64 / n;
        let z2 = Z_95 * Z_95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            errors,
            trials,
            rate: p,
            interval: ((center - half).max(0.0), (center + half).min(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRates {
    pub q: ErrorEstimate,
    pub rho: ErrorEstimate,
}

pub fn estimate_error_rates(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    sim: &SimConfig,
) -> Result<ErrorRates> {
    let r = simulate_joint(channel, q, rho, sim)?;
    Ok(ErrorRates {
        q: ErrorEstimate::new(r.q_errors(), r.trials),
        rho: ErrorEstimate::new(r.rho_errors(), r.trials),
    })
}
