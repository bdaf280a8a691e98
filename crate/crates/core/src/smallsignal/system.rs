use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::linalg::condition_estimate;
use crate::smallsignal::GeneratorLinearization;

/// Largest condition estimate of the algebraic block accepted for reduction.
pub const MAX_CONDITION: f64 = 1e12;

/// Linearized DAE blocks
/// `[dx'; 0] = [[A~, B~], [C~, D~]] [dx; dy]` with `y = (V_g, V_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub c_tilde: DMatrix<f64>,
    pub d_tilde: DMatrix<f64>,
}

/// Reduced state matrix with states ordered `[dδ1, dω1, dδ2, dω2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub a: DMatrix<f64>,
    pub labels: Vec<String>,
    /// Condition estimate of the eliminated algebraic block.
    pub condition: f64,
}

impl StateMatrix {
    pub fn new(a: DMatrix<f64>) -> Self {
        let labels = (0..a.nrows() / 2)
            .flat_map(|k| [format!("dδ{}", k + 1), format!("dω{}", k + 1)])
            .collect();
        Self {
            a,
            labels,
            condition: 1.0,
        }
    }
}

fn block_diag(blocks: impl Iterator<Item = Matrix2<f64>>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for (k, b) in blocks.enumerate() {
        out.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&b);
    }
    out
}

/// Builds `A~ = A_G`, `B~ = [B_G 0]`, `C~ = [-C_G; 0]` and
/// `D~ = [[Y1 - D_G, Y2], [Y3, Y4']]`.
pub fn assemble_system(
    gens: &[GeneratorLinearization],
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    y3: &DMatrix<f64>,
    y4: &DMatrix<f64>,
) -> Result<SystemMatrices> {
    let ng = gens.len();
    let g = 2 * ng;
    let l = y4.nrows();
    let shapes_ok = y1.shape() == (g, g)
        && y2.shape() == (g, l)
        && y3.shape() == (l, g)
        && y4.shape() == (l, l);
    if !shapes_ok {
        return Err(Error::Dimension(format!(
            "{ng} generators against partition blocks {:?} {:?} {:?} {:?}",
            y1.shape(),
            y2.shape(),
            y3.shape(),
            y4.shape()
        )));
    }
    let a_g = block_diag(gens.iter().map(|x| x.a_g), ng);
    let b_g = block_diag(gens.iter().map(|x| x.b_g), ng);
    let c_g = block_diag(gens.iter().map(|x| x.c_g), ng);
    let d_g = block_diag(gens.iter().map(|x| x.d_g), ng);

    let mut b_tilde = DMatrix::zeros(g, g + l);
    b_tilde.view_mut((0, 0), (g, g)).copy_from(&b_g);
    let mut c_tilde = DMatrix::zeros(g + l, g);
    c_tilde.view_mut((0, 0), (g, g)).copy_from(&(-c_g));
    let mut d_tilde = DMatrix::zeros(g + l, g + l);
    d_tilde.view_mut((0, 0), (g, g)).copy_from(&(y1 - d_g));
    d_tilde.view_mut((0, g), (g, l)).copy_from(y2);
    d_tilde.view_mut((g, 0), (l, g)).copy_from(y3);
    d_tilde.view_mut((g, g), (l, l)).copy_from(y4);
    Ok(SystemMatrices {
        a_tilde: a_g,
        b_tilde,
        c_tilde,
        d_tilde,
    })
}

/// `A = A~ - B~ D~^{-1} C~`, via an LU solve of `D~ X = C~`.
pub fn reduce_state_matrix(sys: &SystemMatrices) -> Result<StateMatrix> {
    let n = sys.a_tilde.nrows();
    let m = sys.d_tilde.nrows();
    if sys.a_tilde.ncols() != n
        || sys.b_tilde.shape() != (n, m)
        || sys.c_tilde.shape() != (m, n)
        || sys.d_tilde.ncols() != m
    {
        return Err(Error::Dimension("inconsistent system blocks".into()));
    }
    if m == 0 {
        let mut out = StateMatrix::new(sys.a_tilde.clone());
        out.condition = 1.0;
        return Ok(out);
    }
    let condition = condition_estimate(&sys.d_tilde);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let x = sys
        .d_tilde
        .clone()
        .lu()
        .solve(&sys.c_tilde)
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
    let mut out = StateMatrix::new(&sys.a_tilde - &sys.b_tilde * x);
    out.condition = condition;
    Ok(out)
}
