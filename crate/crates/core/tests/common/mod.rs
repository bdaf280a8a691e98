//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the crate's numerical routines.
#![allow(dead_code, clippy::needless_range_loop)]

use destab::netmodel::{BusKind, NetworkCase};
use destab::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn two_machine() -> NetworkCase {
    NetworkCase::parse(include_str!("../data/two_machine.json")).unwrap()
}

pub fn wscc_q(q_mvar: f64) -> NetworkCase {
    let mut case = NetworkCase::wscc9();
    case.loads[2].q_mvar = q_mvar;
    case
}

/// Bus current injections from per-branch circuit physics: an ideal
/// transformer of ratio `tap:1` at the from end feeding a pi section.
pub fn branch_injections(case: &NetworkCase, v: &[Complex64]) -> Vec<Complex64> {
    let idx = |id: usize| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut inj = vec![c(0.0, 0.0); v.len()];
    for br in &case.branches {
        let (f, t) = (idx(br.from), idx(br.to));
        let ys = c(1.0, 0.0) / c(br.r, br.x);
        let half = c(0.0, br.b_sh / 2.0);
        let vf = v[f] / br.tap;
        let series = (vf - v[t]) * ys;
        inj[f] += (series + half * vf) / br.tap;
        inj[t] += -series + half * v[t];
    }
    inj
}

/// Dense Y-bus assembled column by column from [`branch_injections`].
pub fn ybus_from_physics(case: &NetworkCase) -> Vec<Vec<Complex64>> {
    let n = case.buses.len();
    let mut y = vec![vec![c(0.0, 0.0); n]; n];
    for k in 0..n {
        let mut e = vec![c(0.0, 0.0); n];
        e[k] = c(1.0, 0.0);
        let col = branch_injections(case, &e);
        for i in 0..n {
            y[i][k] = col[i];
        }
    }
    y
}

/// Gaussian elimination with partial pivoting; `a` is row-major.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            if m != 0.0 {
                for k in col..n {
                    a[row][k] -= m * a[col][k];
                }
                b[row] -= m * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Polar-coordinate Newton power flow with a central-difference Jacobian.
/// Returns bus voltages in file order.
pub fn polar_power_flow(case: &NetworkCase) -> Vec<Complex64> {
    let n = case.buses.len();
    let y = ybus_from_physics(case);
    let idx = |id: usize| case.buses.iter().position(|b| b.id == id).unwrap();
    let base = case.base_mva;

    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    let mut vm = vec![1.0; n];
    for g in &case.generators {
        let k = idx(g.bus);
        p_spec[k] += g.p_set_mw.unwrap_or(0.0) / base;
        vm[k] = g.v_set_pu;
    }
    for l in &case.loads {
        let k = idx(l.bus);
        p_spec[k] -= l.p_mw / base;
        q_spec[k] -= l.q_mvar / base;
    }
    let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
    let ang_vars: Vec<usize> = (0..n).filter(|&k| kinds[k] != BusKind::Slack).collect();
    let mag_vars: Vec<usize> = (0..n).filter(|&k| kinds[k] == BusKind::Pq).collect();
    let mut va = vec![0.0; n];

    let residual = |va: &[f64], vm: &[f64]| -> Vec<f64> {
        let v: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(vm[k], va[k]))
            .collect();
        let s: Vec<Complex64> = (0..n)
            .map(|i| v[i] * (0..n).map(|k| y[i][k] * v[k]).sum::<Complex64>().conj())
            .collect();
        ang_vars
            .iter()
            .map(|&k| s[k].re - p_spec[k])
            .chain(mag_vars.iter().map(|&k| s[k].im - q_spec[k]))
            .collect()
    };

    for _ in 0..50 {
        let r = residual(&va, &vm);
        if r.iter().fold(0.0_f64, |m, x| m.max(x.abs())) < 1e-12 {
            break;
        }
        let nv = ang_vars.len() + mag_vars.len();
        let mut jac = vec![vec![0.0; nv]; nv];
        let h = 1e-7;
        for j in 0..nv {
            let (mut a1, mut m1, mut a2, mut m2) = (va.clone(), vm.clone(), va.clone(), vm.clone());
            if j < ang_vars.len() {
                a1[ang_vars[j]] += h;
                a2[ang_vars[j]] -= h;
            } else {
                m1[mag_vars[j - ang_vars.len()]] += h;
                m2[mag_vars[j - ang_vars.len()]] -= h;
            }
            let (rp, rm) = (residual(&a1, &m1), residual(&a2, &m2));
            for i in 0..nv {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let dx = gauss_solve(jac, r.iter().map(|x| -x).collect());
        for (j, &k) in ang_vars.iter().enumerate() {
            va[k] += dx[j];
        }
        for (j, &k) in mag_vars.iter().enumerate() {
            vm[k] += dx[ang_vars.len() + j];
        }
    }
    (0..n)
        .map(|k| Complex64::from_polar(vm[k], va[k]))
        .collect()
}

/// All roots of the monic polynomial with coefficients `coef` (highest
/// degree first, leading 1 omitted) by Durand–Kerner iteration.
pub fn durand_kerner(coef: &[f64]) -> Vec<Complex64> {
    let n = coef.len();
    let eval = |z: Complex64| coef.iter().fold(c(1.0, 0.0), |acc, &a| acc * z + a);
    let seed = c(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let prev = roots.clone();
        for i in 0..n {
            let denom: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| roots[i] - roots[j])
                .product();
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots
}

/// Nonlinear classical machine behind `r_a + j x_q`, network frame.
pub struct Machine {
    pub h: f64,
    pub d: f64,
    pub r_a: f64,
    pub x_q: f64,
    pub omega_s: f64,
    pub e: f64,
    pub p_m: f64,
}

impl Machine {
    /// Stator current injected into the network.
    pub fn current(&self, delta: f64, v: Complex64) -> Complex64 {
        (Complex64::from_polar(self.e, delta) - v) / c(self.r_a, self.x_q)
    }

    /// `(d delta/dt, d omega/dt)` with `omega` the speed deviation.
    pub fn rates(&self, delta: f64, omega: f64, v: Complex64) -> (f64, f64) {
        let i = self.current(delta, v);
        let p_e = (Complex64::from_polar(self.e, delta) * i.conj()).re;
        (
            self.omega_s * omega,
            (self.p_m - p_e - self.d * omega) / (2.0 * self.h),
        )
    }
}

/// Deterministic xorshift for test-side randomness that must not depend on
/// the crate's rng plumbing.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Exhaustive 200 x 200 search over the single load of the two-machine
/// case on `[-500, 500]` MW/MVAr. Returns the smallest `a_p² + a_q²` (pu²)
/// among grid points with abscissa at least `epsilon` and voltages in
/// bounds, with the point in MW/MVAr.
pub fn toy_grid_best(epsilon: f64) -> Option<(f64, (f64, f64))> {
    use destab::attack::{evaluate_attack, AttackVector, SetpointDeviation};
    let case = two_machine();
    let dev = SetpointDeviation::zeros(&case);
    let n = 200;
    let step = 1000.0 / (n - 1) as f64;
    let mut best: Option<(f64, (f64, f64))> = None;
    for i in 0..n {
        for j in 0..n {
            let (p, q) = (-500.0 + step * i as f64, -500.0 + step * j as f64);
            let obj = (p / case.base_mva).powi(2) + (q / case.base_mva).powi(2);
            if best.is_some_and(|b| b.0 <= obj) {
                continue;
            }
            let attack = AttackVector {
                channels: vec![(p, q)],
            };
            if let Ok(an) = evaluate_attack(&case, &attack, &dev) {
                if an.eigen.spectral_abscissa >= epsilon && an.bounds_ok() {
                    best = Some((obj, (p, q)));
                }
            }
        }
    }
    best
}

pub fn toy_options() -> destab::attack::SynthesisOptions {
    destab::attack::SynthesisOptions {
        redispatch: false,
        weight_attack: 1.0,
        ..Default::default()
    }
}
