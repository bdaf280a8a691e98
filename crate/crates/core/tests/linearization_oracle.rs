mod common;

use common::{c, Machine, XorShift};
use destab::netmodel::GeneratorSpec;
use destab::powerflow::GeneratorOperatingState;
use destab::smallsignal::linearize_generator;
use destab::Complex64;
use nalgebra::Matrix2;

const H: f64 = 1e-6;

fn dq(z: Complex64, delta: f64) -> (f64, f64) {
    let r = z * Complex64::from_polar(1.0, -delta);
    (-r.im, r.re)
}

struct Point {
    spec: GeneratorSpec,
    state: GeneratorOperatingState,
    machine: Machine,
    v: Complex64,
}

fn random_point(rng: &mut XorShift) -> Point {
    let spec = GeneratorSpec {
        bus: 1,
        p_set_mw: None,
        v_set_pu: 1.0,
        h_s: rng.uniform(1.0, 25.0),
        d_pu: rng.uniform(0.0, 2.0),
        r_a_pu: rng.uniform(0.0, 0.05),
        x_q_pu: rng.uniform(0.05, 1.0),
        omega_s_rad_s: 120.0 * std::f64::consts::PI,
    };
    let v = Complex64::from_polar(rng.uniform(0.9, 1.1), rng.uniform(-0.5, 0.5));
    let i0 = c(rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 1.5));
    let emf = v + c(spec.r_a_pu, spec.x_q_pu) * i0;
    let delta0 = emf.arg();
    let (vd0, vq0) = dq(v, delta0);
    let (id0, iq0) = dq(i0, delta0);
    let machine = Machine {
        h: spec.h_s,
        d: spec.d_pu,
        r_a: spec.r_a_pu,
        x_q: spec.x_q_pu,
        omega_s: spec.omega_s_rad_s,
        e: emf.norm(),
        p_m: (emf * i0.conj()).re,
    };
    let state = GeneratorOperatingState {
        delta0,
        e_prime: emf.norm(),
        vd0,
        vq0,
        id0,
        iq0,
    };
    Point {
        spec,
        state,
        machine,
        v,
    }
}

/// Jacobians of the nonlinear machine by central differences, in the
/// `(x, V) -> (x', I)` layout of the linearization.
fn numeric(p: &Point) -> [Matrix2<f64>; 4] {
    let f = |x: [f64; 2], v: [f64; 2]| {
        let vc = c(v[0], v[1]);
        let (d, w) = p.machine.rates(x[0], x[1], vc);
        let i = p.machine.current(x[0], vc);
        [d, w, i.re, i.im]
    };
    let x0 = [p.state.delta0, 0.0];
    let v0 = [p.v.re, p.v.im];
    let mut out = [Matrix2::zeros(); 4];
    for j in 0..2 {
        let (mut xp, mut xm) = (x0, x0);
        xp[j] += H;
        xm[j] -= H;
        let (fp, fm) = (f(xp, v0), f(xm, v0));
        let (mut vp, mut vm) = (v0, v0);
        vp[j] += H;
        vm[j] -= H;
        let (gp, gm) = (f(x0, vp), f(x0, vm));
        for i in 0..2 {
            out[0][(i, j)] = (fp[i] - fm[i]) / (2.0 * H);
            out[2][(i, j)] = (fp[i + 2] - fm[i + 2]) / (2.0 * H);
            out[1][(i, j)] = (gp[i] - gm[i]) / (2.0 * H);
            out[3][(i, j)] = (gp[i + 2] - gm[i + 2]) / (2.0 * H);
        }
    }
    out
}

#[test]
fn blocks_match_nonlinear_machine() {
    let mut rng = XorShift(0x9e37_79b9_7f4a_7c15);
    for trial in 0..25 {
        let p = random_point(&mut rng);
        let lin = linearize_generator(&p.spec, &p.state).unwrap();
        let [a, b, cg, d] = numeric(&p);
        for (name, got, want) in [
            ("a_g", lin.a_g, a),
            ("b_g", lin.b_g, b),
            ("c_g", lin.c_g, cg),
            ("d_g", lin.d_g, d),
        ] {
            let scale = want.abs().max().max(1.0);
            let err = (got - want).abs().max() / scale;
            assert!(err < 1e-6, "trial {trial} {name}: {got} vs {want}");
        }
    }
}

#[test]
fn operating_point_is_an_equilibrium() {
    let mut rng = XorShift(17);
    for _ in 0..10 {
        let p = random_point(&mut rng);
        let (dd, dw) = p.machine.rates(p.state.delta0, 0.0, p.v);
        assert_eq!(dd, 0.0);
        assert!(dw.abs() < 1e-12);
    }
}
