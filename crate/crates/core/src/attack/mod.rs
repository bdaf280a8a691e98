//! Load-measurement falsification: forward evaluation, blind random
//! campaigns and optimization-based synthesis under access masks.

mod campaign;
mod evaluate;
mod synth;
mod vector;

pub use campaign::{
    monte_carlo_campaign, random_attack, trial_attack, trial_rng, CampaignConfig, CampaignStats,
    SuccessfulTrial, TrialOutcome,
};
pub use evaluate::{evaluate_attack, falsified_case};
pub use synth::{synthesize_attack, OuterRecord, SynthesisOptions, SynthesisResult};
pub use vector::{AccessMask, AttackDistribution, AttackVector, ChannelRanges, SetpointDeviation};

use crate::error::Result;
use crate::netmodel::NetworkCase;

/// Access masks of the limited-access scenarios, in order: L1 and L3,
/// L1 only, active power of every load.
pub fn masked_scenarios(case: &NetworkCase) -> Result<[AccessMask; 3]> {
    Ok([
        AccessMask::parse("L1:pq,L3:pq", case)?,
        AccessMask::parse("L1:pq", case)?,
        AccessMask::parse("L1:p,L2:p,L3:p", case)?,
    ])
}
