//! Bus admittance matrix, its real block form and the generator/load partition.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;

/// Complex nodal admittance matrix in the bus order of the case.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub y: DMatrix<Complex64>,
    pub bus_ids: Vec<usize>,
}

/// Writes `[[G, -B], [B, G]]` for `y = G + jB` at block `(row, col)`.
pub fn set_block(m: &mut DMatrix<f64>, row: usize, col: usize, y: Complex64) {
    m[(2 * row, 2 * col)] = y.re;
    m[(2 * row, 2 * col + 1)] = -y.im;
    m[(2 * row + 1, 2 * col)] = y.im;
    m[(2 * row + 1, 2 * col + 1)] = y.re;
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// Real `2n x 2n` form acting on `[Re V1, Im V1, Re V2, ...]`.
    pub fn to_block(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                set_block(&mut out, i, j, self.y[(i, j)]);
            }
        }
        out
    }

    /// `Y * v` in complex arithmetic.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.y[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// Standard pi-model Y-bus. An off-nominal tap is an ideal transformer at
/// the `from` end, so the whole from-side pi admittance scales by `1/tap²`.
pub fn build_ybus(case: &NetworkCase) -> Result<AdmittanceMatrix> {
    let n = case.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &case.branches {
        let z = Complex64::new(br.r, br.x);
        if z.norm() == 0.0 {
            return Err(Error::SingularBranch {
                from: br.from,
                to: br.to,
            });
        }
        let f = case
            .bus_index(br.from)
            .ok_or_else(|| Error::semantic("branch", format!("unknown bus {}", br.from)))?;
        let t = case
            .bus_index(br.to)
            .ok_or_else(|| Error::semantic("branch", format!("unknown bus {}", br.to)))?;
        let ys = z.inv();
        let charging = Complex64::new(0.0, br.b_sh / 2.0);
        y[(f, f)] += (ys + charging) / (br.tap * br.tap);
        y[(t, t)] += ys + charging;
        y[(f, t)] -= ys / br.tap;
        y[(t, f)] -= ys / br.tap;
    }
    Ok(AdmittanceMatrix {
        y,
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
    })
}

/// Real block partition with generator buses first.
///
/// Generator buses follow the order of `case.generators`; every other bus
/// (loads and zero-injection buses) follows in ascending bus id.
#[derive(Debug, Clone, PartialEq)]
pub struct YPartition {
    /// Bus positions (into `case.buses`) of the generator group.
    pub gen_buses: Vec<usize>,
    /// Bus positions of the load group.
    pub load_buses: Vec<usize>,
    pub y1: DMatrix<f64>,
    pub y2: DMatrix<f64>,
    pub y3: DMatrix<f64>,
    pub y4: DMatrix<f64>,
}

impl YPartition {
    /// Bus positions in partition order.
    pub fn order(&self) -> Vec<usize> {
        self.gen_buses
            .iter()
            .chain(self.load_buses.iter())
            .copied()
            .collect()
    }

    /// Slot of bus position `bus` within the load group.
    pub fn load_slot(&self, bus: usize) -> Option<usize> {
        self.load_buses.iter().position(|&b| b == bus)
    }

    pub fn gen_slot(&self, bus: usize) -> Option<usize> {
        self.gen_buses.iter().position(|&b| b == bus)
    }

    /// `[[Y1, Y2], [Y3, Y4]]` in partition order.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let g = self.y1.nrows();
        let l = self.y4.nrows();
        let mut out = DMatrix::zeros(g + l, g + l);
        out.view_mut((0, 0), (g, g)).copy_from(&self.y1);
        out.view_mut((0, g), (g, l)).copy_from(&self.y2);
        out.view_mut((g, 0), (l, g)).copy_from(&self.y3);
        out.view_mut((g, g), (l, l)).copy_from(&self.y4);
        out
    }
}

pub fn partition_ybus(y: &AdmittanceMatrix, case: &NetworkCase) -> Result<YPartition> {
    let n = case.n_buses();
    if y.dim() != n {
        return Err(Error::Dimension(format!(
            "admittance matrix is {}x{} for {n} buses",
            y.dim(),
            y.dim()
        )));
    }
    let gen_buses: Vec<usize> = case
        .generators
        .iter()
        .map(|g| {
            case.bus_index(g.bus)
                .ok_or_else(|| Error::semantic("generator", format!("unknown bus {}", g.bus)))
        })
        .collect::<Result<_>>()?;
    let mut load_buses: Vec<usize> = (0..n).filter(|b| !gen_buses.contains(b)).collect();
    load_buses.sort_by_key(|&b| case.buses[b].id);

    let block = y.to_block();
    let pick = |rows: &[usize], cols: &[usize]| {
        let mut m = DMatrix::zeros(2 * rows.len(), 2 * cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        m[(2 * i + a, 2 * j + b)] = block[(2 * r + a, 2 * c + b)];
                    }
                }
            }
        }
        m
    };
    Ok(YPartition {
        y1: pick(&gen_buses, &gen_buses),
        y2: pick(&gen_buses, &load_buses),
        y3: pick(&load_buses, &gen_buses),
        y4: pick(&load_buses, &load_buses),
        gen_buses,
        load_buses,
    })
}

/// A constant-impedance load folded into a diagonal block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuntLoad {
    /// Bus id, for error reporting.
    pub bus: usize,
    /// Block index within the matrix being augmented.
    pub slot: usize,
    /// Active power, pu.
    pub p: f64,
    /// Reactive power, pu.
    pub q: f64,
    pub v_mag: f64,
}

/// Adds `G_L = P/|V|^2`, `B_L = Q/|V|^2` to the diagonal blocks as
/// `[[G + G_L, -B + B_L], [B - B_L, G + G_L]]`.
pub fn augment_load_admittance(block: &DMatrix<f64>, loads: &[ShuntLoad]) -> Result<DMatrix<f64>> {
    let mut out = block.clone();
    for load in loads {
        if !(load.v_mag > 0.0) {
            return Err(Error::ZeroVoltage { bus: load.bus });
        }
        if 2 * load.slot + 1 >= out.nrows() {
            return Err(Error::Dimension(format!(
                "load slot {} outside a {}x{} block matrix",
                load.slot,
                out.nrows(),
                out.ncols()
            )));
        }
        let v2 = load.v_mag * load.v_mag;
        let g_l = load.p / v2;
        let b_l = load.q / v2;
        let k = 2 * load.slot;
        out[(k, k)] += g_l;
        out[(k, k + 1)] += b_l;
        out[(k + 1, k)] -= b_l;
        out[(k + 1, k + 1)] += g_l;
    }
    Ok(out)
}
