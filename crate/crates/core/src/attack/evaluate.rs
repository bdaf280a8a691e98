use crate::error::Result;
use crate::netmodel::NetworkCase;
use crate::smallsignal::{analyze_case, Analysis, AnalysisOptions};

use super::{AttackVector, SetpointDeviation};

/// The case an operator would act on after the falsification: every load
/// shifted by its attack channel, every setpoint shifted by the deviation.
pub fn falsified_case(
    case: &NetworkCase,
    attack: &AttackVector,
    deviation: &SetpointDeviation,
) -> NetworkCase {
    let mut out = case.clone();
    for (load, &(dp, dq)) in out.loads.iter_mut().zip(&attack.channels) {
        load.p_mw += dp;
        load.q_mvar += dq;
    }
    let slack = case.slack_generator();
    let mut dp = deviation.dp_mw.iter();
    for (g, gen) in out.generators.iter_mut().enumerate() {
        if g != slack {
            if let (Some(p), Some(d)) = (gen.p_set_mw.as_mut(), dp.next()) {
                *p += d;
            }
        }
        if let Some(dv) = deviation.dv_pu.get(g) {
            gen.v_set_pu += dv;
        }
    }
    out
}

/// Runs the full stability pipeline on the falsified case.
///
/// A power-flow divergence comes back as an error; campaigns count it as an
/// infeasible operating point rather than a verdict.
pub fn evaluate_attack(
    case: &NetworkCase,
    attack: &AttackVector,
    deviation: &SetpointDeviation,
) -> Result<Analysis> {
    analyze_case(
        &falsified_case(case, attack, deviation),
        &AnalysisOptions::default(),
    )
}
