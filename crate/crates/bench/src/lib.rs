//! Shared fixtures for the criterion benches.

use destab::attack::AttackVector;
use destab::NetworkCase;

pub fn wscc() -> NetworkCase {
    NetworkCase::wscc9()
}

/// A fixed, moderately sized falsification of every load channel.
pub fn sample_attack(case: &NetworkCase) -> AttackVector {
    let mut attack = AttackVector::zeros(case.loads.len());
    for (k, (dp, dq)) in attack.channels.iter_mut().enumerate() {
        *dp = 20.0 + 5.0 * k as f64;
        *dq = -10.0;
    }
    attack
}
