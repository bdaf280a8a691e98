use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::RealEigen;

/// Default stability margin for analysis verdicts (1/s). Keeps the
/// structural zero (reference-angle) mode from being flagged.
pub const ANALYSIS_EPSILON: f64 = 1e-6;

/// Smallest accepted `|ψᵀφ| / (‖ψ‖ ‖φ‖)` for a first-order sensitivity.
pub const CONDITIONING_FLOOR: f64 = 1e-8;

/// Eigenvalues (rad/s) with unit right eigenvectors and matching left
/// eigenvectors, sorted by descending real part, then ascending `|Im|`,
/// positive imaginary part first within a conjugate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub eigenvalues: Vec<Complex64>,
    /// Column `k` is φ_k, normalized to unit 2-norm.
    pub right_vectors: DMatrix<Complex64>,
    /// Column `k` is ψ_k with `ψ_kᵀ A = λ_k ψ_kᵀ` and `ψ_kᵀ φ_k = 1`.
    /// `None` when the eigenvector matrix is singular (defective spectrum).
    pub left_vectors: Option<DMatrix<Complex64>>,
    pub spectral_abscissa: f64,
    /// Verdict at [`ANALYSIS_EPSILON`].
    pub unstable: bool,
}

fn mode_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.re.total_cmp(&a.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(b.im.total_cmp(&a.im))
}

/// Full nonsymmetric eigendecomposition of a real matrix.
pub fn eigendecompose(a: &DMatrix<f64>) -> Result<EigenSolution> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Dimension(
            "state matrix has non-finite entries".into(),
        ));
    }
    let n = a.nrows();
    let mut pairs = RealEigen::new(a)?.complex_pairs();
    pairs.sort_by(|x, y| mode_order(&x.0, &y.0));

    let mut right = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (k, (_, vec)) in pairs.iter().enumerate() {
        let norm = vec.norm();
        let mut unit = if norm > 0.0 {
            vec.unscale(norm)
        } else {
            vec.clone()
        };
        // Fix the phase: largest component real and positive.
        let pivot = unit
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, z)| {
                if z.norm() > acc.1 {
                    (i, z.norm())
                } else {
                    acc
                }
            })
            .0;
        if unit[pivot].norm() > 0.0 {
            let phase = unit[pivot] / unit[pivot].norm();
            unit = unit.map(|z| z / phase);
        }
        right.set_column(k, &unit);
    }

    let left = right
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .map(|inv| inv.transpose());

    let eigenvalues: Vec<Complex64> = pairs.into_iter().map(|p| p.0).collect();
    let spectral_abscissa = eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EigenSolution {
        unstable: spectral_abscissa > ANALYSIS_EPSILON,
        eigenvalues,
        right_vectors: right,
        left_vectors: left,
        spectral_abscissa,
    })
}

impl EigenSolution {
    pub fn right(&self, k: usize) -> DVector<Complex64> {
        self.right_vectors.column(k).into_owned()
    }

    pub fn left(&self, k: usize) -> Option<DVector<Complex64>> {
        self.left_vectors.as_ref().map(|l| l.column(k).into_owned())
    }

    /// Index of the mode that sets the spectral abscissa.
    pub fn leading(&self) -> usize {
        0
    }
}

/// True iff some eigenvalue has real part strictly above `epsilon`.
pub fn is_unstable(eig: &EigenSolution, epsilon: f64) -> bool {
    spectrum_unstable(&eig.eigenvalues, epsilon)
}

pub fn spectrum_unstable(eigenvalues: &[Complex64], epsilon: f64) -> bool {
    eigenvalues.iter().any(|l| l.re > epsilon)
}

/// First-order derivative of eigenvalue `k` along the perturbation `da`:
/// `ψᵀ dA φ / (ψᵀ φ)`.
pub fn eigenvalue_sensitivity_of(
    eig: &EigenSolution,
    k: usize,
    da: &DMatrix<f64>,
) -> Result<Complex64> {
    let psi = eig.left(k).ok_or(Error::DefectiveEigenvalue { index: k })?;
    let phi = eig.right(k);
    let denom = psi.dot(&phi);
    let conditioning = denom.norm() / (psi.norm() * phi.norm());
    if !(conditioning >= CONDITIONING_FLOOR) {
        return Err(Error::DefectiveEigenvalue { index: k });
    }
    let da_phi = DVector::from_fn(phi.len(), |i, _| {
        (0..phi.len())
            .map(|j| phi[j] * da[(i, j)])
            .sum::<Complex64>()
    });
    Ok(psi.dot(&da_phi) / denom)
}

/// Sensitivities of every eigenvalue along `da`.
pub fn eigenvalue_sensitivity(eig: &EigenSolution, da: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    (0..eig.eigenvalues.len())
        .map(|k| eigenvalue_sensitivity_of(eig, k, da))
        .collect()
}
