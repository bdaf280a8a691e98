use crate::error::{Error, Result};
use crate::netmodel::GeneratorSpec;
use crate::powerflow::GeneratorOperatingState;
use nalgebra::Matrix2;

/// Linearized classical machine:
/// `dx' = a_g dx + b_g dV`, `dI = c_g dx + d_g dV`, with `x = (delta, omega)`
/// and `V`, `I` in rectangular network-frame components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLinearization {
    /// `[[0, omega_s], [k_delta, -D/(2H)]]`, where `k_delta` is the
    /// electrical-torque sensitivity to rotor angle at fixed terminal voltage.
    pub a_g: Matrix2<f64>,
    pub b_g: Matrix2<f64>,
    pub c_g: Matrix2<f64>,
    pub d_g: Matrix2<f64>,
}

/// `T(delta)` mapping network-frame `(re, im)` to machine `(d, q)`.
pub fn rotation(delta: f64) -> Matrix2<f64> {
    let (s, c) = delta.sin_cos();
    Matrix2::new(s, -c, c, s)
}

/// Stator impedance operator `[[-R_a, X_q], [-X_q, -R_a]]`.
pub fn stator(gen: &GeneratorSpec) -> Matrix2<f64> {
    Matrix2::new(-gen.r_a_pu, gen.x_q_pu, -gen.x_q_pu, -gen.r_a_pu)
}

pub fn linearize_generator(
    gen: &GeneratorSpec,
    state: &GeneratorOperatingState,
) -> Result<GeneratorLinearization> {
    let t = rotation(state.delta0);
    let z_inv = stator(gen).try_inverse().ok_or_else(|| {
        Error::semantic(
            format!("generator at bus {}", gen.bus),
            "singular stator impedance",
        )
    })?;
    let two_h = 2.0 * gen.h_s;

    let torque_row = Matrix2::new(0.0, 0.0, 0.0, -state.e_prime / two_h);
    let b_g = torque_row * z_inv * t;

    // d(V_dq)/d(delta) at fixed network voltage.
    let dv_ddelta = z_inv * nalgebra::Vector2::new(state.vq0, -state.vd0);
    let k_delta = -state.e_prime / two_h * dv_ddelta[1];
    let a_g = Matrix2::new(0.0, gen.omega_s_rad_s, k_delta, -gen.d_pu / two_h);

    let c_g = t.transpose()
        * (z_inv * Matrix2::new(state.vq0, 0.0, -state.vd0, 0.0)
            - Matrix2::new(state.iq0, 0.0, -state.id0, 0.0));
    let d_g = t.transpose() * z_inv * t;

    let lin = GeneratorLinearization { a_g, b_g, c_g, d_g };
    if [a_g, b_g, c_g, d_g]
        .iter()
        .any(|m| m.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::semantic(
            format!("generator at bus {}", gen.bus),
            "non-finite linearization",
        ));
    }
    Ok(lin)
}
