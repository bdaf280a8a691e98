use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;
use crate::smallsignal::ANALYSIS_EPSILON;

use super::{
    evaluate_attack, AccessMask, AttackDistribution, AttackVector, ChannelRanges, SetpointDeviation,
};

/// Draws every channel uniformly from its range, then zeroes the channels
/// outside `mask`. Drawing masked channels too keeps the stream layout
/// independent of the mask.
pub fn random_attack<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &[ChannelRanges],
    mask: &AccessMask,
) -> AttackVector {
    let channels = ranges
        .iter()
        .map(|r| {
            (
                rng.random_range(r.p.0..=r.p.1),
                rng.random_range(r.q.0..=r.q.1),
            )
        })
        .collect();
    AttackVector { channels }.masked(mask)
}

/// The independent stream used by trial `k` of a campaign seeded with `seed`.
pub fn trial_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Re-creates the attack drawn by trial `k`.
pub fn trial_attack(
    seed: u64,
    k: u64,
    ranges: &[ChannelRanges],
    mask: &AccessMask,
) -> AttackVector {
    random_attack(&mut trial_rng(seed, k), ranges, mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Stable,
    Unstable,
    /// Power flow or reduction failed: no valid operating point.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessfulTrial {
    pub trial: u64,
    pub attack: AttackVector,
    pub spectral_abscissa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub trials: u64,
    pub successes: u64,
    pub stables: u64,
    pub divergences: u64,
    pub success_rate: f64,
    pub successful: Vec<SuccessfulTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub trials: u64,
    pub seed: u64,
    pub distribution: AttackDistribution,
    pub mask: AccessMask,
    pub jobs: usize,
}

fn run_trial(
    case: &NetworkCase,
    cfg: &CampaignConfig,
    ranges: &[ChannelRanges],
    k: u64,
) -> (TrialOutcome, Option<SuccessfulTrial>) {
    let attack = trial_attack(cfg.seed, k, ranges, &cfg.mask);
    match evaluate_attack(case, &attack, &SetpointDeviation::zeros(case)) {
        Err(_) => (TrialOutcome::Infeasible, None),
        Ok(a) if a.eigen.spectral_abscissa > ANALYSIS_EPSILON => {
            let spectral_abscissa = a.eigen.spectral_abscissa;
            (
                TrialOutcome::Unstable,
                Some(SuccessfulTrial {
                    trial: k,
                    attack,
                    spectral_abscissa,
                }),
            )
        }
        Ok(_) => (TrialOutcome::Stable, None),
    }
}

/// Blind random attacks with generator setpoints held fixed.
///
/// Trial `k` draws from [`trial_rng`]`(seed, k)` and results are collected
/// in trial order, so the statistics do not depend on `jobs`.
pub fn monte_carlo_campaign(case: &NetworkCase, cfg: &CampaignConfig) -> Result<CampaignStats> {
    if cfg.trials == 0 {
        return Err(Error::InvalidSpec {
            input: "trials=0".into(),
            message: "a campaign needs at least one trial".into(),
        });
    }
    if cfg.mask.p.len() != case.loads.len() {
        return Err(Error::Dimension(format!(
            "mask covers {} loads, case has {}",
            cfg.mask.p.len(),
            case.loads.len()
        )));
    }
    let ranges = cfg.distribution.ranges(case);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|k| run_trial(case, cfg, &ranges, k))
            .collect()
    });

    let mut stats = CampaignStats {
        trials: cfg.trials,
        successes: 0,
        stables: 0,
        divergences: 0,
        success_rate: 0.0,
        successful: Vec::new(),
    };
    for (outcome, success) in outcomes {
        match outcome {
            TrialOutcome::Stable => stats.stables += 1,
            TrialOutcome::Unstable => stats.successes += 1,
            TrialOutcome::Infeasible => stats.divergences += 1,
        }
        stats.successful.extend(success);
    }
    stats.success_rate = stats.successes as f64 / stats.trials as f64;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: u64, dist: &str, jobs: usize) -> CampaignConfig {
        CampaignConfig {
            trials,
            seed: 7,
            distribution: AttackDistribution::parse(dist).unwrap(),
            mask: AccessMask::full(3),
            jobs,
        }
    }

    #[test]
    fn degenerate_range_gives_zero() {
        let ranges = AttackDistribution::parse("uniform:p=[0,0],q=[0,0]")
            .unwrap()
            .ranges(&NetworkCase::wscc9());
        let a = trial_attack(0, 3, &ranges, &AccessMask::full(3));
        assert!(a.is_zero());
    }

    #[test]
    fn null_campaign() {
        let stats =
            monte_carlo_campaign(&NetworkCase::wscc9(), &cfg(1, "uniform:p=[0,0],q=[0,0]", 1))
                .unwrap();
        assert_eq!(
            (stats.successes, stats.stables, stats.divergences),
            (0, 1, 0)
        );
    }

    #[test]
    fn mask_is_enforced() {
        let case = NetworkCase::wscc9();
        let mask = AccessMask::parse("L1:pq,L3:pq", &case).unwrap();
        let ranges = AttackDistribution::default().ranges(&case);
        for k in 0..200 {
            let a = trial_attack(1, k, &ranges, &mask);
            assert_eq!(a.channels[1], (0.0, 0.0));
        }
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let case = NetworkCase::wscc9();
        let a = monte_carlo_campaign(&case, &cfg(300, "scaled:2.5", 1)).unwrap();
        let b = monte_carlo_campaign(&case, &cfg(300, "scaled:2.5", 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.successes + a.stables + a.divergences, 300);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(monte_carlo_campaign(&NetworkCase::wscc9(), &cfg(0, "scaled:1", 1)).is_err());
    }
}
