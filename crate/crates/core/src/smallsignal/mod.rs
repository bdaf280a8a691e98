//! Linearized machine-network model, reduced state matrix and modal analysis.

mod generator;
mod modal;
mod system;

pub use generator::{linearize_generator, rotation, stator, GeneratorLinearization};
pub use modal::{
    eigendecompose, eigenvalue_sensitivity, eigenvalue_sensitivity_of, is_unstable,
    spectrum_unstable, EigenSolution, ANALYSIS_EPSILON, CONDITIONING_FLOOR,
};
pub use system::{
    assemble_system, reduce_state_matrix, StateMatrix, SystemMatrices, MAX_CONDITION,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::netmodel::{
    augment_load_admittance, build_ybus, partition_ybus, NetworkCase, ShuntLoad,
};
use crate::powerflow::{
    check_voltage_bounds, init_generator_states, solve_power_flow, BoundCheck,
    GeneratorOperatingState, OperatingPoint, PowerFlowOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub power_flow: PowerFlowOptions,
    /// Stability margin for the verdict (1/s).
    pub epsilon: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            power_flow: PowerFlowOptions::default(),
            epsilon: ANALYSIS_EPSILON,
        }
    }
}

/// Everything the linearization produces at one operating point.
#[derive(Debug, Clone)]
pub struct Linearized {
    pub generators: Vec<GeneratorOperatingState>,
    pub linearizations: Vec<GeneratorLinearization>,
    pub system: SystemMatrices,
    pub state: StateMatrix,
}

/// Result of the power flow → linearization → eigenvalue pipeline.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub op: OperatingPoint,
    pub bounds: Vec<BoundCheck>,
    pub linearized: Linearized,
    pub eigen: EigenSolution,
    pub unstable: bool,
}

impl Analysis {
    pub fn bounds_ok(&self) -> bool {
        self.bounds.iter().all(|b| b.ok)
    }
}

/// Assembles and reduces the state matrix at `op`.
///
/// Loads become constant admittances at the solved voltages. Loads on
/// generator buses are folded into the generator block the same way.
pub fn linearize_at(case: &NetworkCase, op: &OperatingPoint) -> Result<Linearized> {
    let y = build_ybus(case)?;
    let part = partition_ybus(&y, case)?;

    let mut gen_loads = Vec::new();
    let mut bus_loads = Vec::new();
    for load in &case.loads {
        let k = case.bus_index(load.bus).expect("validated");
        let shunt = |slot| ShuntLoad {
            bus: load.bus,
            slot,
            p: case.to_pu(load.p_mw),
            q: case.to_pu(load.q_mvar),
            v_mag: op.v[k].norm(),
        };
        match part.gen_slot(k) {
            Some(slot) => gen_loads.push(shunt(slot)),
            None => bus_loads.push(shunt(part.load_slot(k).expect("bus in one group"))),
        }
    }
    let y1 = augment_load_admittance(&part.y1, &gen_loads)?;
    let y4 = augment_load_admittance(&part.y4, &bus_loads)?;

    let generators = (0..case.generators.len())
        .map(|g| init_generator_states(op, case, g))
        .collect::<Result<Vec<_>>>()?;
    let linearizations = case
        .generators
        .iter()
        .zip(&generators)
        .map(|(spec, st)| linearize_generator(spec, st))
        .collect::<Result<Vec<_>>>()?;
    let system = assemble_system(&linearizations, &y1, &part.y2, &part.y3, &y4)?;
    let state = reduce_state_matrix(&system)?;
    Ok(Linearized {
        generators,
        linearizations,
        system,
        state,
    })
}

pub fn analyze_operating_point(
    case: &NetworkCase,
    op: OperatingPoint,
    epsilon: f64,
) -> Result<Analysis> {
    let linearized = linearize_at(case, &op)?;
    let eigen = eigendecompose(&linearized.state.a)?;
    Ok(Analysis {
        bounds: check_voltage_bounds(&op, case),
        unstable: is_unstable(&eigen, epsilon),
        op,
        linearized,
        eigen,
    })
}

/// Power flow, machine initialization, assembly, reduction and eigenanalysis.
pub fn analyze_case(case: &NetworkCase, options: &AnalysisOptions) -> Result<Analysis> {
    let op = solve_power_flow(case, &options.power_flow)?;
    analyze_operating_point(case, op, options.epsilon)
}
