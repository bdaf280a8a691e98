//! Grid data model and the JSON case-file format.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WSCC9_JSON: &str = include_str!("../../assets/wscc9.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Lower voltage magnitude bound (pu).
    pub v_min: f64,
    /// Upper voltage magnitude bound (pu).
    pub v_max: f64,
    pub name: String,
}

/// Pi-model branch. All impedances in per unit on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance, split evenly between both ends.
    pub b_sh: f64,
    /// Off-nominal turns ratio on the `from` side.
    pub tap: f64,
}

/// Synchronous machine with classical-model dynamic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub bus: usize,
    /// Scheduled active power in MW; `None` on the slack machine.
    pub p_set_mw: Option<f64>,
    pub v_set_pu: f64,
    /// Inertia constant (s).
    pub h_s: f64,
    /// Damping (pu torque / pu speed).
    pub d_pu: f64,
    pub r_a_pu: f64,
    /// Reactance behind the classical EMF (transient reactance).
    pub x_q_pu: f64,
    pub omega_s_rad_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub bus: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
}

/// A validated grid description.
///
/// Powers are stored in MW/MVAr exactly as they appear in the case file;
/// [`NetworkCase::to_pu`] is the single conversion point into per unit.
/// Loads are labeled `L1`, `L2`, ... in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<GeneratorSpec>,
    pub loads: Vec<LoadSpec>,
}

impl NetworkCase {
    /// Parses and validates a JSON case file.
    pub fn parse(text: &str) -> Result<Self> {
        let case: NetworkCase = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        case.validate()?;
        Ok(case)
    }

    /// The embedded WSCC 3-machine 9-bus case (Anderson–Fouad network and
    /// machine data, loads and setpoints as tabulated for the case studies).
    pub fn wscc9() -> Self {
        Self::parse(WSCC9_JSON).expect("embedded WSCC case is valid")
    }

    pub fn wscc9_json() -> &'static str {
        WSCC9_JSON
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    pub fn to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    pub fn from_pu(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Position of bus `id` in `self.buses`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_generator(&self) -> usize {
        self.generators
            .iter()
            .position(|g| self.bus(g.bus).map(|b| b.kind) == Some(BusKind::Slack))
            .expect("validated case has a slack generator")
    }

    pub fn bus(&self, id: usize) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn load_label(index: usize) -> String {
        format!("L{}", index + 1)
    }

    pub fn load_by_label(&self, label: &str) -> Option<usize> {
        let k: usize = label.strip_prefix('L')?.parse().ok()?;
        (k >= 1 && k <= self.loads.len()).then(|| k - 1)
    }

    /// Checks every structural invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return Err(Error::semantic("case", "base_mva must be positive"));
        }
        if self.buses.is_empty() {
            return Err(Error::semantic("case", "no buses"));
        }

        let mut ids = HashSet::new();
        for bus in &self.buses {
            let entity = format!("bus {}", bus.id);
            if bus.id == 0 {
                return Err(Error::semantic(entity, "bus ids are 1-based"));
            }
            if !ids.insert(bus.id) {
                return Err(Error::semantic(entity, "duplicate bus id"));
            }
            if !(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max) || !bus.v_max.is_finite() {
                return Err(Error::semantic(
                    entity,
                    format!("voltage bounds [{}, {}] are invalid", bus.v_min, bus.v_max),
                ));
            }
        }

        let slacks: Vec<usize> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
            .collect();
        match slacks.len() {
            0 => return Err(Error::semantic("case", "no slack bus")),
            1 => {}
            _ => {
                let names: Vec<String> = slacks.iter().map(|id| id.to_string()).collect();
                return Err(Error::semantic(
                    "slack bus",
                    format!("buses {} are all marked slack", names.join(", ")),
                ));
            }
        }

        for (k, br) in self.branches.iter().enumerate() {
            let entity = format!("branch {} ({}-{})", k + 1, br.from, br.to);
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(Error::semantic(entity, format!("unknown bus {end}")));
                }
            }
            if br.from == br.to {
                return Err(Error::semantic(entity, "from and to buses coincide"));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(Error::SingularBranch {
                    from: br.from,
                    to: br.to,
                });
            }
            if !(br.b_sh >= 0.0) {
                return Err(Error::semantic(entity, "negative line charging"));
            }
            if !(br.tap > 0.0 && br.tap.is_finite()) || !br.r.is_finite() || !br.x.is_finite() {
                return Err(Error::semantic(
                    entity,
                    "non-finite or nonpositive parameter",
                ));
            }
        }

        let mut gen_buses: HashMap<usize, usize> = HashMap::new();
        for (k, g) in self.generators.iter().enumerate() {
            let entity = format!("generator at bus {}", g.bus);
            let Some(bus) = self.bus(g.bus) else {
                return Err(Error::semantic(entity, "references an unknown bus"));
            };
            if gen_buses.insert(g.bus, k).is_some() {
                return Err(Error::semantic(
                    entity,
                    "more than one generator on the bus",
                ));
            }
            match bus.kind {
                BusKind::Pq => {
                    return Err(Error::semantic(entity, "generator on a PQ bus"));
                }
                BusKind::Pv if g.p_set_mw.is_none() => {
                    return Err(Error::semantic(entity, "PV generator needs p_set_mw"));
                }
                _ => {}
            }
            if !(g.h_s > 0.0) {
                return Err(Error::semantic(entity, "inertia must be positive"));
            }
            if !(g.x_q_pu > 0.0) {
                return Err(Error::semantic(entity, "x_q must be positive"));
            }
            if !(g.d_pu >= 0.0) {
                return Err(Error::semantic(entity, "damping must be nonnegative"));
            }
            if !(g.omega_s_rad_s > 0.0) {
                return Err(Error::semantic(
                    entity,
                    "synchronous speed must be positive",
                ));
            }
            if !(g.v_set_pu > 0.0) || !g.r_a_pu.is_finite() || g.r_a_pu < 0.0 {
                return Err(Error::semantic(
                    entity,
                    "invalid voltage setpoint or resistance",
                ));
            }
        }
        for bus in &self.buses {
            if bus.kind != BusKind::Pq && !gen_buses.contains_key(&bus.id) {
                return Err(Error::semantic(
                    format!("bus {}", bus.id),
                    "slack/PV bus without a generator",
                ));
            }
        }

        for load in &self.loads {
            if !ids.contains(&load.bus) {
                return Err(Error::semantic(
                    format!("load at bus {}", load.bus),
                    "references an unknown bus",
                ));
            }
            if !load.p_mw.is_finite() || !load.q_mvar.is_finite() {
                return Err(Error::semantic(
                    format!("load at bus {}", load.bus),
                    "non-finite power",
                ));
            }
        }
        Ok(())
    }
}
