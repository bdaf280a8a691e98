//! AC power flow in rectangular coordinates and classical-machine initialization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{build_ybus, AdmittanceMatrix, BusKind, NetworkCase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    /// Largest tolerated power (pu) or squared-voltage mismatch.
    pub tol: f64,
    pub max_iter: usize,
    /// Ignore any supplied initial guess and start from the flat profile.
    pub flat_start: bool,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            flat_start: true,
        }
    }
}

/// A converged power-flow solution. Quantities are per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v: Vec<Complex64>,
    pub i_inj: Vec<Complex64>,
    pub s_inj: Vec<Complex64>,
    pub slack_p: f64,
    pub slack_q: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mismatch: f64,
    /// Mismatch norm at the start of every iteration, final value last.
    pub trace: Vec<f64>,
}

impl OperatingPoint {
    pub fn v_mag(&self) -> Vec<f64> {
        self.v.iter().map(|v| v.norm()).collect()
    }
}

/// Per-bus voltage bound verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bus: usize,
    pub v_mag: f64,
    pub ok: bool,
}

/// Classical-machine internal state at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOperatingState {
    pub delta0: f64,
    pub e_prime: f64,
    pub vd0: f64,
    pub vq0: f64,
    pub id0: f64,
    pub iq0: f64,
}

struct Schedule {
    kind: Vec<BusKind>,
    p: Vec<f64>,
    q: Vec<f64>,
    v_set: Vec<f64>,
}

fn schedule(case: &NetworkCase) -> Schedule {
    let n = case.n_buses();
    let mut s = Schedule {
        kind: case.buses.iter().map(|b| b.kind).collect(),
        p: vec![0.0; n],
        q: vec![0.0; n],
        v_set: vec![1.0; n],
    };
    for load in &case.loads {
        let k = case.bus_index(load.bus).expect("validated");
        s.p[k] -= case.to_pu(load.p_mw);
        s.q[k] -= case.to_pu(load.q_mvar);
    }
    for g in &case.generators {
        let k = case.bus_index(g.bus).expect("validated");
        s.p[k] += g.p_set_mw.map_or(0.0, |p| case.to_pu(p));
        s.v_set[k] = g.v_set_pu;
    }
    s
}

fn flat_profile(s: &Schedule) -> Vec<Complex64> {
    s.kind
        .iter()
        .zip(&s.v_set)
        .map(|(kind, &vs)| match kind {
            BusKind::Pq => Complex64::new(1.0, 0.0),
            _ => Complex64::new(vs, 0.0),
        })
        .collect()
}

/// Power-flow mismatch per non-slack bus: `(dP, dQ or dV^2)` in bus order.
fn mismatch(y: &AdmittanceMatrix, s: &Schedule, v: &[Complex64]) -> Vec<(usize, f64, f64)> {
    let current = y.apply(v);
    (0..v.len())
        .filter(|&k| s.kind[k] != BusKind::Slack)
        .map(|k| {
            let sk = v[k] * current[k].conj();
            let second = match s.kind[k] {
                BusKind::Pv => s.v_set[k] * s.v_set[k] - v[k].norm_sqr(),
                _ => s.q[k] - sk.im,
            };
            (k, s.p[k] - sk.re, second)
        })
        .collect()
}

fn jacobian(y: &AdmittanceMatrix, s: &Schedule, v: &[Complex64], vars: &[usize]) -> DMatrix<f64> {
    let current = y.apply(v);
    let m = vars.len();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for (r, &i) in vars.iter().enumerate() {
        let (ei, fi) = (v[i].re, v[i].im);
        let (ai, bi) = (current[i].re, current[i].im);
        for (c, &k) in vars.iter().enumerate() {
            let g = y.y[(i, k)].re;
            let b = y.y[(i, k)].im;
            let same = i == k;
            // P_i = e_i a_i + f_i b_i, with (a, b) = Re/Im of (Y v)_i.
            let mut dp_de = ei * g + fi * b;
            let mut dp_df = -ei * b + fi * g;
            if same {
                dp_de += ai;
                dp_df += bi;
            }
            jac[(2 * r, 2 * c)] = dp_de;
            jac[(2 * r, 2 * c + 1)] = dp_df;
            match s.kind[i] {
                BusKind::Pv => {
                    if same {
                        jac[(2 * r + 1, 2 * c)] = 2.0 * ei;
                        jac[(2 * r + 1, 2 * c + 1)] = 2.0 * fi;
                    }
                }
                _ => {
                    // Q_i = f_i a_i - e_i b_i.
                    let mut dq_de = fi * g - ei * b;
                    let mut dq_df = -fi * b - ei * g;
                    if same {
                        dq_de -= bi;
                        dq_df += ai;
                    }
                    jac[(2 * r + 1, 2 * c)] = dq_de;
                    jac[(2 * r + 1, 2 * c + 1)] = dq_df;
                }
            }
        }
    }
    jac
}

/// Newton–Raphson power flow from a flat start.
pub fn solve_power_flow(case: &NetworkCase, options: &PowerFlowOptions) -> Result<OperatingPoint> {
    solve_power_flow_with_guess(case, options, None)
}

/// Newton–Raphson power flow, optionally warm-started from `guess`
/// (ignored when `options.flat_start` is set).
pub fn solve_power_flow_with_guess(
    case: &NetworkCase,
    options: &PowerFlowOptions,
    guess: Option<&[Complex64]>,
) -> Result<OperatingPoint> {
    let y = build_ybus(case)?;
    let s = schedule(case);
    let n = case.n_buses();
    let mut v = match guess {
        Some(g) if !options.flat_start && g.len() == n => g.to_vec(),
        _ => flat_profile(&s),
    };
    let slack = s
        .kind
        .iter()
        .position(|k| *k == BusKind::Slack)
        .expect("validated");
    v[slack] = Complex64::new(s.v_set[slack], 0.0);
    let vars: Vec<usize> = (0..n).filter(|&k| k != slack).collect();

    let measure = |v: &[Complex64]| {
        mismatch(&y, &s, v)
            .iter()
            .map(|&(k, a, b)| (k, a.abs().max(b.abs())))
            .fold((slack, 0.0_f64), |acc, (k, m)| {
                if m > acc.1 || m.is_nan() {
                    (k, m)
                } else {
                    acc
                }
            })
    };
    let step = |v: &[Complex64]| -> Option<Vec<Complex64>> {
        if vars.is_empty() {
            return None;
        }
        let mis = mismatch(&y, &s, v);
        let rhs = DVector::from_iterator(2 * mis.len(), mis.iter().flat_map(|&(_, a, b)| [a, b]));
        let dx = jacobian(&y, &s, v, &vars)
            .lu()
            .solve(&rhs)
            .filter(|dx| dx.iter().all(|x| x.is_finite()))?;
        let mut next = v.to_vec();
        for (r, &k) in vars.iter().enumerate() {
            next[k] += Complex64::new(dx[2 * r], dx[2 * r + 1]);
        }
        Some(next)
    };

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let (worst_bus, norm) = measure(&v);
        trace.push(norm);
        if norm <= options.tol {
            break;
        }
        if iterations >= options.max_iter || !norm.is_finite() || norm > 1e8 {
            return Err(Error::PowerFlowDiverged {
                iterations,
                mismatch: norm,
                worst_bus: case.buses[worst_bus].id,
                trace,
            });
        }
        v = step(&v).ok_or(Error::SingularJacobian {
            iteration: iterations,
        })?;
        iterations += 1;
    }

    // Inside the tolerance one more Newton step lands near roundoff. The
    // rigid-body modes of the state matrix amplify leftover mismatch by
    // roughly omega_s / (D/2H), so the small-signal results need it.
    for _ in 0..2 {
        let current = *trace.last().expect("at least one entry");
        match step(&v).map(|next| (measure(&next).1, next)) {
            Some((norm, next)) if norm < 0.1 * current => {
                v = next;
                trace.push(norm);
                iterations += 1;
            }
            _ => break,
        }
    }

    let i_inj = y.apply(&v);
    let s_inj: Vec<Complex64> = v.iter().zip(&i_inj).map(|(v, i)| v * i.conj()).collect();
    let load_at_slack: Complex64 = case
        .loads
        .iter()
        .filter(|l| case.bus_index(l.bus) == Some(slack))
        .map(|l| Complex64::new(case.to_pu(l.p_mw), case.to_pu(l.q_mvar)))
        .sum();
    let slack_out = s_inj[slack] + load_at_slack;
    Ok(OperatingPoint {
        slack_p: slack_out.re,
        slack_q: slack_out.im,
        mismatch: *trace.last().expect("at least one entry"),
        v,
        i_inj,
        s_inj,
        converged: true,
        iterations,
        trace,
    })
}

/// Closed-interval voltage magnitude check for every bus.
pub fn check_voltage_bounds(op: &OperatingPoint, case: &NetworkCase) -> Vec<BoundCheck> {
    case.buses
        .iter()
        .zip(&op.v)
        .map(|(bus, v)| {
            let v_mag = v.norm();
            BoundCheck {
                bus: bus.id,
                v_mag,
                ok: bus.v_min <= v_mag && v_mag <= bus.v_max,
            }
        })
        .collect()
}

/// Complex power delivered by generator `gen` (pu): net injection plus any
/// load on the same bus.
pub fn generator_power(op: &OperatingPoint, case: &NetworkCase, gen: usize) -> Complex64 {
    let bus = case.generators[gen].bus;
    let k = case.bus_index(bus).expect("validated");
    let local: Complex64 = case
        .loads
        .iter()
        .filter(|l| l.bus == bus)
        .map(|l| Complex64::new(case.to_pu(l.p_mw), case.to_pu(l.q_mvar)))
        .sum();
    op.s_inj[k] + local
}

/// Rotates a network-frame phasor into the machine dq frame at angle `delta`.
pub fn to_dq(x: Complex64, delta: f64) -> (f64, f64) {
    let (s, c) = delta.sin_cos();
    (x.re * s - x.im * c, x.re * c + x.im * s)
}

/// Inverse of [`to_dq`].
pub fn from_dq(d: f64, q: f64, delta: f64) -> Complex64 {
    let (s, c) = delta.sin_cos();
    Complex64::new(d * s + q * c, -d * c + q * s)
}

/// Internal EMF, rotor angle and dq-frame quantities of generator `gen`.
pub fn init_generator_states(
    op: &OperatingPoint,
    case: &NetworkCase,
    gen: usize,
) -> Result<GeneratorOperatingState> {
    let spec = &case.generators[gen];
    let k = case.bus_index(spec.bus).expect("validated");
    let v = op.v[k];
    if v.norm() == 0.0 {
        return Err(Error::ZeroVoltage { bus: spec.bus });
    }
    let current = (generator_power(op, case, gen) / v).conj();
    let emf = v + Complex64::new(spec.r_a_pu, spec.x_q_pu) * current;
    let delta0 = emf.arg();
    let (vd0, vq0) = to_dq(v, delta0);
    let (id0, iq0) = to_dq(current, delta0);
    Ok(GeneratorOperatingState {
        delta0,
        e_prime: emf.norm(),
        vd0,
        vq0,
        id0,
        iq0,
    })
}
