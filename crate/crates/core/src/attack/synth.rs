use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;
use crate::powerflow::{solve_power_flow_with_guess, OperatingPoint, PowerFlowOptions};
use crate::smallsignal::{
    eigendecompose, eigenvalue_sensitivity, linearize_at, Analysis, EigenSolution,
};

use super::{
    evaluate_attack, falsified_case, trial_rng, AccessMask, AttackVector, SetpointDeviation,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Required spectral abscissa (1/s).
    pub epsilon_unstable: f64,
    /// Weight on squared active setpoint changes (pu).
    pub weight_p: f64,
    /// Weight on squared voltage setpoint changes (pu).
    pub weight_v: f64,
    /// Weight on squared load falsifications (pu). Small; it only breaks
    /// ties between attacks that need the same redispatch.
    pub weight_attack: f64,
    /// Treat setpoint deviations as decision variables. When off, the
    /// dispatch is frozen and only the load channels move.
    pub redispatch: bool,
    /// Per-channel bound on `|dP|` and `|dQ|` of a load (MW, MVAr).
    pub load_box_mw: f64,
    /// Bound on `|dP|` of a machine (MW).
    pub setpoint_box_mw: f64,
    /// Bound on `|dV|` of a machine (pu).
    pub setpoint_box_pu: f64,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Inner loop stops when the gradient infinity norm drops below this.
    pub inner_tol: f64,
    /// Log-sum-exp temperature of the smoothed abscissa (1/s).
    pub smoothing: f64,
    /// Half-width of the random initial load falsification (MW, MVAr).
    pub start_radius_mw: f64,
    pub starts: usize,
    pub seed: u64,
    /// Worker threads for the starts; 0 picks the rayon default.
    pub jobs: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            epsilon_unstable: 0.1,
            weight_p: 1.0,
            weight_v: 1.0,
            weight_attack: 0.01,
            redispatch: true,
            load_box_mw: 500.0,
            setpoint_box_mw: 500.0,
            setpoint_box_pu: 0.2,
            penalty_initial: 100.0,
            penalty_growth: 10.0,
            max_outer: 8,
            max_inner: 60,
            inner_tol: 1e-7,
            smoothing: 0.02,
            start_radius_mw: 150.0,
            starts: 8,
            seed: 0,
            jobs: 0,
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| {
            Err(Error::InvalidSpec {
                input: "synthesis options".into(),
                message: message.into(),
            })
        };
        if !(self.epsilon_unstable > 0.0) {
            return bad("epsilon_unstable must be positive");
        }
        if !(self.penalty_growth > 1.0) {
            return bad("penalty growth factor must exceed 1");
        }
        if !(self.penalty_initial > 0.0 && self.smoothing > 0.0) {
            return bad("penalty weight and smoothing must be positive");
        }
        if self.starts == 0 {
            return bad("at least one start is required");
        }
        if [self.weight_p, self.weight_v, self.weight_attack]
            .iter()
            .any(|w| !(*w >= 0.0))
        {
            return bad("objective weights must be nonnegative");
        }
        Ok(())
    }
}

/// One outer (penalty) iteration of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub start: usize,
    pub outer: usize,
    pub penalty: f64,
    pub objective: f64,
    pub spectral_abscissa: f64,
    /// `max(0, epsilon_unstable - abscissa)` at the iterate.
    pub violation: f64,
    pub accepted: bool,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub attack: AttackVector,
    pub deviation: SetpointDeviation,
    pub objective: f64,
    pub feasible: bool,
    /// Abscissa of the returned attack, or the best one reached when infeasible.
    pub spectral_abscissa: f64,
    /// Independent re-evaluation of the returned attack.
    pub analysis: Option<Analysis>,
    /// Start that produced the result.
    pub start: usize,
    pub trace: Vec<OuterRecord>,
}

/// Decision vector layout: accessible load channels, then active setpoint
/// changes of the non-slack machines, then voltage setpoint changes. All
/// entries are per unit.
struct Problem<'a> {
    case: &'a NetworkCase,
    channels: Vec<(usize, bool)>,
    n_dp: usize,
    n_dv: usize,
    opts: &'a SynthesisOptions,
    weights: Vec<f64>,
    bounds: Vec<f64>,
    /// Largest magnitude a rigid-body mode can have: the zero mode and the
    /// speed mode, which decays at roughly the machines' `D / 2H`.
    rigid_radius: f64,
}

/// Values of one flat-start evaluation.
struct Sample {
    op: OperatingPoint,
    eigen: EigenSolution,
    smooth: f64,
    abscissa: f64,
    v_penalty: f64,
}

impl<'a> Problem<'a> {
    fn new(case: &'a NetworkCase, mask: &AccessMask, opts: &'a SynthesisOptions) -> Self {
        let channels = mask.channels();
        let (n_dp, n_dv) = if opts.redispatch {
            (case.generators.len() - 1, case.generators.len())
        } else {
            (0, 0)
        };
        let mut weights = vec![opts.weight_attack; channels.len()];
        weights.extend(std::iter::repeat_n(opts.weight_p, n_dp));
        weights.extend(std::iter::repeat_n(opts.weight_v, n_dv));
        let mut bounds = vec![case.to_pu(opts.load_box_mw); channels.len()];
        bounds.extend(std::iter::repeat_n(case.to_pu(opts.setpoint_box_mw), n_dp));
        bounds.extend(std::iter::repeat_n(opts.setpoint_box_pu, n_dv));
        let rigid_radius = case
            .generators
            .iter()
            .map(|g| g.d_pu / (2.0 * g.h_s))
            .fold(0.0, f64::max)
            * 1.5
            + 1e-6;
        Self {
            case,
            channels,
            rigid_radius,
            n_dp,
            n_dv,
            opts,
            weights,
            bounds,
        }
    }

    fn dim(&self) -> usize {
        self.channels.len() + self.n_dp + self.n_dv
    }

    fn inputs(&self, z: &DVector<f64>) -> (AttackVector, SetpointDeviation) {
        let mut attack = AttackVector::zeros(self.case.loads.len());
        for (i, &(k, reactive)) in self.channels.iter().enumerate() {
            let mw = self.case.from_pu(z[i]);
            if reactive {
                attack.channels[k].1 = mw;
            } else {
                attack.channels[k].0 = mw;
            }
        }
        let mut dev = SetpointDeviation::zeros(self.case);
        let na = self.channels.len();
        for j in 0..self.n_dp {
            dev.dp_mw[j] = self.case.from_pu(z[na + j]);
        }
        for j in 0..self.n_dv {
            dev.dv_pu[j] = z[na + self.n_dp + j];
        }
        (attack, dev)
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        z.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum()
    }

    fn box_penalty(&self, z: &DVector<f64>) -> f64 {
        z.iter()
            .zip(&self.bounds)
            .map(|(x, b)| (x.abs() - b).max(0.0).powi(2))
            .sum()
    }

    fn target(&self) -> f64 {
        1.05 * self.opts.epsilon_unstable
    }

    fn falsified(&self, z: &DVector<f64>) -> NetworkCase {
        let (a, d) = self.inputs(z);
        falsified_case(self.case, &a, &d)
    }

    fn v_penalty(&self, case: &NetworkCase, op: &OperatingPoint) -> f64 {
        case.buses
            .iter()
            .zip(&op.v)
            .map(|(b, v)| {
                let m = v.norm();
                (b.v_min - m).max(0.0).powi(2) + (m - b.v_max).max(0.0).powi(2)
            })
            .sum()
    }

    /// Power flow and state matrix; warm-started when `guess` is given.
    fn state(
        &self,
        z: &DVector<f64>,
        guess: Option<&OperatingPoint>,
    ) -> Option<(NetworkCase, OperatingPoint, DMatrix<f64>)> {
        let case = self.falsified(z);
        let opts = PowerFlowOptions {
            flat_start: guess.is_none(),
            ..PowerFlowOptions::default()
        };
        let op = solve_power_flow_with_guess(&case, &opts, guess.map(|g| g.v.as_slice())).ok()?;
        let a = linearize_at(&case, &op).ok()?.state.a;
        Some((case, op, a))
    }

    fn sample(&self, z: &DVector<f64>) -> Option<Sample> {
        let (case, op, a) = self.state(z, None)?;
        let eigen = eigendecompose(&a).ok()?;
        Some(Sample {
            smooth: smoothed_abscissa(
                &eigen.eigenvalues,
                &eigen.right_vectors,
                self.opts.smoothing,
                self.rigid_radius,
            ),
            abscissa: eigen.spectral_abscissa,
            v_penalty: self.v_penalty(&case, &op),
            op,
            eigen,
        })
    }

    fn merit(&self, z: &DVector<f64>, s: &Sample, mu: f64) -> f64 {
        let stab = (self.target() - s.smooth).max(0.0);
        self.objective(z) + mu * (stab * stab + s.v_penalty + self.box_penalty(z))
    }

    /// Gradient of the merit. Eigenvalue derivatives come from the modal
    /// sensitivity formula applied to a central difference of the state
    /// matrix; if a mode is too ill-conditioned for that, the smoothed
    /// abscissa itself is differenced.
    fn gradient(&self, z: &DVector<f64>, s: &Sample, mu: f64) -> Option<DVector<f64>> {
        let n = self.dim();
        let h = 1e-6;
        let stab = (self.target() - s.smooth).max(0.0);
        let weights = mode_weights(&s.eigen, self.opts.smoothing, self.rigid_radius);
        let mut g = DVector::zeros(n);
        for j in 0..n {
            let mut zp = z.clone();
            zp[j] += h;
            let mut zm = z.clone();
            zm[j] -= h;
            let (cp, opp, ap) = self.state(&zp, Some(&s.op))?;
            let (cm, opm, am) = self.state(&zm, Some(&s.op))?;
            let dv = (self.v_penalty(&cp, &opp) - self.v_penalty(&cm, &opm)) / (2.0 * h);

            let mut ds = 0.0;
            if stab > 0.0 {
                let da = (&ap - &am) / (2.0 * h);
                ds = match eigenvalue_sensitivity(&s.eigen, &da) {
                    Ok(dl) => dl
                        .iter()
                        .zip(&weights)
                        .zip(&s.eigen.eigenvalues)
                        .map(|((d, w), l)| w * (d.re - FREQUENCY_WEIGHT * l.im.signum() * d.im))
                        .sum(),
                    Err(_) => {
                        let ep = eigendecompose(&ap).ok()?;
                        let em = eigendecompose(&am).ok()?;
                        let t = self.opts.smoothing;
                        (smoothed_abscissa(
                            &ep.eigenvalues,
                            &ep.right_vectors,
                            t,
                            self.rigid_radius,
                        ) - smoothed_abscissa(
                            &em.eigenvalues,
                            &em.right_vectors,
                            t,
                            self.rigid_radius,
                        )) / (2.0 * h)
                    }
                };
            }
            let x = z[j];
            let b = self.bounds[j];
            let dbox = 2.0 * (x.abs() - b).max(0.0) * x.signum();
            g[j] = 2.0 * self.weights[j] * x + mu * (-2.0 * stab * ds + dv + dbox);
        }
        Some(g)
    }
}

/// Weight of `|Im λ|` in the per-mode proxy. A classical-machine pair
/// keeps a nearly fixed real part until its frequency collapses and it
/// splits into two real modes, so the proxy rewards shrinking the frequency.
const FREQUENCY_WEIGHT: f64 = 0.02;

/// Rigid-body modes: every rotor angle moves together. These are the zero
/// reference-angle mode and the centre-of-inertia speed mode; no load
/// change can push them across the imaginary axis.
fn rigid_modes(eigenvalues: &[Complex64], vectors: &DMatrix<Complex64>, radius: f64) -> Vec<bool> {
    let m = vectors.nrows() / 2;
    eigenvalues
        .iter()
        .enumerate()
        .map(|(k, l)| {
            if m < 2 || l.norm() > radius {
                return false;
            }
            let sum: Complex64 = (0..m).map(|g| vectors[(2 * g, k)]).sum();
            let norm = (0..m)
                .map(|g| vectors[(2 * g, k)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            norm > 0.0 && sum.norm() / ((m as f64).sqrt() * norm) > 0.99
        })
        .collect()
}

fn mode_proxy(l: &Complex64) -> f64 {
    l.re - FREQUENCY_WEIGHT * l.im.abs()
}

/// Log-sum-exp of `Re λ − c·|Im λ|` over the non-rigid modes. It bounds
/// the spectral abscissa of those modes from above once a real mode leads.
fn smoothed_abscissa(
    eigenvalues: &[Complex64],
    vectors: &DMatrix<Complex64>,
    tau: f64,
    radius: f64,
) -> f64 {
    let rigid = rigid_modes(eigenvalues, vectors, radius);
    let g: Vec<f64> = eigenvalues
        .iter()
        .zip(&rigid)
        .filter(|(_, r)| !**r)
        .map(|(l, _)| mode_proxy(l))
        .collect();
    if g.is_empty() {
        return f64::NEG_INFINITY;
    }
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + tau * g.iter().map(|x| ((x - top) / tau).exp()).sum::<f64>().ln()
}

/// Softmax weights matching [`smoothed_abscissa`], zero on rigid modes.
fn mode_weights(eig: &EigenSolution, tau: f64, radius: f64) -> Vec<f64> {
    let rigid = rigid_modes(&eig.eigenvalues, &eig.right_vectors, radius);
    let top = eig
        .eigenvalues
        .iter()
        .zip(&rigid)
        .filter(|(_, r)| !**r)
        .map(|(l, _)| mode_proxy(l))
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = eig
        .eigenvalues
        .iter()
        .zip(&rigid)
        .map(|(l, r)| {
            if *r {
                0.0
            } else {
                ((mode_proxy(l) - top) / tau).exp()
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Quasi-Newton minimization of the merit at a fixed penalty weight.
fn bfgs(p: &Problem, z0: DVector<f64>, mu: f64) -> (DVector<f64>, usize) {
    let n = p.dim();
    let Some(s) = p.sample(&z0) else {
        return (z0, 0);
    };
    let mut z = z0;
    let mut f = p.merit(&z, &s, mu);
    let Some(mut g) = p.gradient(&z, &s, mu) else {
        return (z, 0);
    };
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let max_step = 1.0;
    let mut it = 0;
    while it < p.opts.max_inner {
        if g.amax() < p.opts.inner_tol {
            break;
        }
        let mut d = -(&hinv * &g);
        if g.dot(&d) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = -g.clone();
        }
        let big = d.amax();
        if big > max_step {
            d *= max_step / big;
        }
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let zt = &z + &d * t;
            if let Some(st) = p.sample(&zt) {
                let ft = p.merit(&zt, &st, mu);
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    next = Some((zt, st, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((zn, sn, fnew)) = next else { break };
        let Some(gn) = p.gradient(&zn, &sn, mu) else {
            break;
        };
        let step = &zn - &z;
        let y = &gn - &g;
        let sy = step.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &step * y.transpose();
            let right = &eye - rho * &y * step.transpose();
            hinv = &left * &hinv * &right + rho * &step * step.transpose();
        }
        let improvement = f - fnew;
        z = zn;
        g = gn;
        f = fnew;
        it += 1;
        if improvement.abs() <= 1e-14 * f.abs().max(1.0) {
            break;
        }
    }
    (z, it)
}

/// Full independent check through [`evaluate_attack`].
fn verify(p: &Problem, z: &DVector<f64>) -> Option<(Analysis, bool)> {
    let (a, d) = p.inputs(z);
    let an = evaluate_attack(p.case, &a, &d).ok()?;
    let in_box = p.box_penalty(z) == 0.0;
    let ok = in_box && an.bounds_ok() && an.eigen.spectral_abscissa >= p.opts.epsilon_unstable;
    Some((an, ok))
}

/// Scales a feasible point toward the origin as far as feasibility allows.
/// The objective is quadratic, so this never increases it.
fn shrink(p: &Problem, z: &DVector<f64>) -> DVector<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        match verify(p, &(z * mid)) {
            Some((_, true)) => hi = mid,
            _ => lo = mid,
        }
    }
    z * hi
}

struct StartOutcome {
    z: DVector<f64>,
    feasible: bool,
    objective: f64,
    abscissa: f64,
    trace: Vec<OuterRecord>,
}

fn run_start(p: &Problem, start: usize) -> StartOutcome {
    let n = p.dim();
    let na = p.channels.len();
    let mut rng = trial_rng(p.opts.seed, start as u64);
    let radius = p.case.to_pu(p.opts.start_radius_mw);
    let mut z = DVector::from_fn(n, |j, _| {
        let x: f64 = rng.random_range(-1.0..=1.0);
        if j < na {
            x * radius
        } else {
            0.0
        }
    });

    // Pull a start that has no power-flow solution toward the origin.
    for _ in 0..20 {
        if p.sample(&z).is_some() {
            break;
        }
        z *= 0.5;
    }

    let violation_of = |z: &DVector<f64>| -> (f64, f64) {
        match p.sample(z) {
            Some(s) => ((p.opts.epsilon_unstable - s.abscissa).max(0.0), s.abscissa),
            None => (f64::INFINITY, f64::NEG_INFINITY),
        }
    };

    let mut trace = Vec::new();
    let mut mu = p.opts.penalty_initial;
    let (mut best_violation, mut best_abscissa) = violation_of(&z);
    let mut feasible = false;
    for outer in 0..p.opts.max_outer {
        let (zn, inner) = bfgs(p, z.clone(), mu);
        let (violation, abscissa) = violation_of(&zn);
        let accepted = violation <= best_violation;
        trace.push(OuterRecord {
            start,
            outer,
            penalty: mu,
            objective: p.objective(&zn),
            spectral_abscissa: abscissa,
            violation,
            accepted,
            inner_iterations: inner,
        });
        if accepted {
            z = zn;
            best_violation = violation;
            best_abscissa = abscissa;
            if let Some((_, true)) = verify(p, &z) {
                feasible = true;
                break;
            }
        }
        mu *= p.opts.penalty_growth;
    }
    if feasible {
        z = shrink(p, &z);
        best_abscissa = verify(p, &z).map_or(best_abscissa, |(a, _)| a.eigen.spectral_abscissa);
    }
    StartOutcome {
        objective: p.objective(&z),
        z,
        feasible,
        abscissa: best_abscissa,
        trace,
    }
}

/// Searches for the attack with the least setpoint disturbance that drives
/// the spectral abscissa to at least `epsilon_unstable` while keeping every
/// bus voltage within its bounds.
///
/// Penalty continuation over a quasi-Newton inner loop, restarted from
/// several random load falsifications. An infeasible outcome is returned
/// with `feasible = false` and the best abscissa reached.
pub fn synthesize_attack(
    case: &NetworkCase,
    mask: &AccessMask,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    opts.validate()?;
    if mask.p.len() != case.loads.len() || mask.q.len() != case.loads.len() {
        return Err(Error::Dimension(format!(
            "mask covers {} loads, case has {}",
            mask.p.len(),
            case.loads.len()
        )));
    }
    if mask.is_empty() {
        return Err(Error::InvalidSpec {
            input: mask.to_string(),
            message: "synthesis needs at least one accessible channel".into(),
        });
    }

    let zero_attack = AttackVector::zeros(case.loads.len());
    let zero_dev = SetpointDeviation::zeros(case);
    let base = evaluate_attack(case, &zero_attack, &zero_dev)?;
    if base.eigen.spectral_abscissa >= opts.epsilon_unstable && base.bounds_ok() {
        return Ok(SynthesisResult {
            attack: zero_attack,
            deviation: zero_dev,
            objective: 0.0,
            feasible: true,
            spectral_abscissa: base.eigen.spectral_abscissa,
            analysis: Some(base),
            start: 0,
            trace: Vec::new(),
        });
    }

    let p = Problem::new(case, mask, opts);
    let runs = |starts: Vec<usize>| -> Vec<StartOutcome> {
        starts.into_par_iter().map(|s| run_start(&p, s)).collect()
    };
    let starts: Vec<usize> = (0..opts.starts).collect();
    let outcomes = if opts.jobs == 0 {
        runs(starts)
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(|| runs(starts))
    };

    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            b.feasible
                .cmp(&a.feasible)
                .then(if a.feasible {
                    a.objective.total_cmp(&b.objective)
                } else {
                    b.abscissa.total_cmp(&a.abscissa)
                })
                .then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .expect("at least one start");
    let trace: Vec<OuterRecord> = outcomes.iter().flat_map(|o| o.trace.clone()).collect();
    let o = &outcomes[best];
    let (attack, deviation) = p.inputs(&o.z);
    let analysis = evaluate_attack(case, &attack, &deviation).ok();
    Ok(SynthesisResult {
        attack,
        deviation,
        objective: o.objective,
        feasible: o.feasible,
        spectral_abscissa: o.abscissa,
        analysis,
        start: best,
        trace,
    })
}
