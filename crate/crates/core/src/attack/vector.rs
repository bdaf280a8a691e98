//! Attack vectors, access masks, setpoint deviations and the textual
//! distribution/mask specifications.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;

/// Per-load falsification `(dP MW, dQ MVAr)`, indexed like `case.loads`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackVector {
    pub channels: Vec<(f64, f64)>,
}

impl AttackVector {
    pub fn zeros(n_loads: usize) -> Self {
        Self {
            channels: vec![(0.0, 0.0); n_loads],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(|&(p, q)| p == 0.0 && q == 0.0)
    }

    /// True when every channel outside `mask` is exactly zero.
    pub fn respects(&self, mask: &AccessMask) -> bool {
        self.channels.len() == mask.p.len()
            && self
                .channels
                .iter()
                .enumerate()
                .all(|(k, &(p, q))| (mask.p[k] || p == 0.0) && (mask.q[k] || q == 0.0))
    }

    pub fn masked(mut self, mask: &AccessMask) -> Self {
        for (k, (p, q)) in self.channels.iter_mut().enumerate() {
            if !mask.p[k] {
                *p = 0.0;
            }
            if !mask.q[k] {
                *q = 0.0;
            }
        }
        self
    }
}

/// Generator setpoint changes: `dp_mw` for every non-slack machine (in
/// generator order, slack skipped), `dv_pu` for every machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointDeviation {
    pub dp_mw: Vec<f64>,
    pub dv_pu: Vec<f64>,
}

impl SetpointDeviation {
    pub fn zeros(case: &NetworkCase) -> Self {
        Self {
            dp_mw: vec![0.0; case.generators.len().saturating_sub(1)],
            dv_pu: vec![0.0; case.generators.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dp_mw.iter().chain(&self.dv_pu).all(|&x| x == 0.0)
    }
}

/// Channels of one load the attacker can write.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessMask {
    pub p: Vec<bool>,
    pub q: Vec<bool>,
}

impl AccessMask {
    pub fn full(n_loads: usize) -> Self {
        Self {
            p: vec![true; n_loads],
            q: vec![true; n_loads],
        }
    }

    pub fn none(n_loads: usize) -> Self {
        Self {
            p: vec![false; n_loads],
            q: vec![false; n_loads],
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.p.iter().chain(&self.q).any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            p: self.p.iter().map(|b| !b).collect(),
            q: self.q.iter().map(|b| !b).collect(),
        }
    }

    /// Accessible channels as `(load index, is_reactive)` in load order,
    /// active before reactive.
    pub fn channels(&self) -> Vec<(usize, bool)> {
        (0..self.p.len())
            .flat_map(|k| [(k, false), (k, true)])
            .filter(|&(k, reactive)| if reactive { self.q[k] } else { self.p[k] })
            .collect()
    }

    /// Parses `L1:pq,L3:p` or `*:p` against the loads of `case`.
    pub fn parse(spec: &str, case: &NetworkCase) -> Result<Self> {
        let bad = |message: &str| Error::InvalidSpec {
            input: spec.to_string(),
            message: message.to_string(),
        };
        let n = case.loads.len();
        let mut mask = Self::none(n);
        for entry in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (label, chans) = entry
                .split_once(':')
                .ok_or_else(|| bad("expected LABEL:CHANNELS"))?;
            let targets: Vec<usize> = match label.trim() {
                "*" => (0..n).collect(),
                l => vec![case
                    .load_by_label(l)
                    .ok_or_else(|| Error::MissingLoad(l.to_string()))?],
            };
            let chans = chans.trim();
            if chans.is_empty() || chans.chars().any(|c| c != 'p' && c != 'q') {
                return Err(bad("channels must be drawn from `p` and `q`"));
            }
            for k in targets {
                mask.p[k] |= chans.contains('p');
                mask.q[k] |= chans.contains('q');
            }
        }
        Ok(mask)
    }
}

impl fmt::Display for AccessMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.p.len())
            .filter(|&k| self.p[k] || self.q[k])
            .map(|k| {
                let mut s = format!("{}:", NetworkCase::load_label(k));
                if self.p[k] {
                    s.push('p');
                }
                if self.q[k] {
                    s.push('q');
                }
                s
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Inclusive uniform ranges for one load, MW and MVAr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRanges {
    pub p: (f64, f64),
    pub q: (f64, f64),
}

/// Random-attack distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackDistribution {
    /// Same absolute ranges on every load: `uniform:p=[lo,hi],q=[lo,hi]`.
    Uniform { p: (f64, f64), q: (f64, f64) },
    /// `[-f |P_L|, f |P_L|]` and `[-f |Q_L|, f |Q_L|]` per load: `scaled:f`.
    Scaled { factor: f64 },
}

impl Default for AttackDistribution {
    fn default() -> Self {
        AttackDistribution::Scaled { factor: 2.5 }
    }
}

fn parse_range(text: &str) -> Option<(f64, f64)> {
    let inner = text.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (lo, hi) = inner.split_once(',')?;
    let lo: f64 = lo.trim().parse().ok()?;
    let hi: f64 = hi.trim().parse().ok()?;
    (lo.is_finite() && hi.is_finite() && lo <= hi).then_some((lo, hi))
}

impl AttackDistribution {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |message: &str| Error::InvalidSpec {
            input: spec.to_string(),
            message: message.to_string(),
        };
        let spec_t = spec.trim();
        if let Some(rest) = spec_t.strip_prefix("scaled:") {
            let factor: f64 = rest
                .trim()
                .parse()
                .map_err(|_| bad("factor is not a number"))?;
            if !(factor >= 0.0 && factor.is_finite()) {
                return Err(bad("factor must be finite and nonnegative"));
            }
            return Ok(Self::Scaled { factor });
        }
        let rest = spec_t
            .strip_prefix("uniform:")
            .ok_or_else(|| bad("expected `uniform:` or `scaled:`"))?;
        let (p_part, q_part) = rest
            .split_once("],")
            .ok_or_else(|| bad("expected p=[lo,hi],q=[lo,hi]"))?;
        let p = p_part
            .trim()
            .strip_prefix("p=")
            .and_then(|r| parse_range(&format!("{r}]")))
            .ok_or_else(|| bad("malformed p range"))?;
        let q = q_part
            .trim()
            .strip_prefix("q=")
            .and_then(parse_range)
            .ok_or_else(|| bad("malformed q range"))?;
        Ok(Self::Uniform { p, q })
    }

    pub fn ranges(&self, case: &NetworkCase) -> Vec<ChannelRanges> {
        case.loads
            .iter()
            .map(|load| match *self {
                Self::Uniform { p, q } => ChannelRanges { p, q },
                Self::Scaled { factor } => {
                    let p = factor * load.p_mw.abs();
                    let q = factor * load.q_mvar.abs();
                    ChannelRanges {
                        p: (-p, p),
                        q: (-q, q),
                    }
                }
            })
            .collect()
    }
}

impl fmt::Display for AttackDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { p, q } => {
                write!(f, "uniform:p=[{},{}],q=[{},{}]", p.0, p.1, q.0, q.1)
            }
            Self::Scaled { factor } => write!(f, "scaled:{factor}"),
        }
    }
}
