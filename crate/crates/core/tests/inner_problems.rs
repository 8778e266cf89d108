mod common;

use common::{fd_gradient, golden_section, random_vec, rng};
use proptest::prelude::*;
use sesop::linesearch::{
    minimize, LineSearchConfig, OrthogonalizationObjective, SesopObjective, SmoothConvexProblem,
};
use sesop::lp::{norm, pairing, LpSpec};

fn value(p: &dyn SmoothConvexProblem, t: &[f64]) -> f64 {
    let mut g = vec![0.0; t.len()];
    p.evaluate(t, &mut g)
}

fn grad(p: &dyn SmoothConvexProblem, t: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; t.len()];
    p.evaluate(t, &mut g);
    g
}

struct Instance {
    xi: Vec<f64>,
    dirs: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    dual: LpSpec,
}

fn instance(seed: u64, p: f64, dim: usize, k: usize) -> Instance {
    let mut r = rng(seed);
    let space = LpSpec::with_default_power(dim, p).unwrap();
    Instance {
        xi: random_vec(&mut r, dim),
        dirs: (0..k).map(|_| random_vec(&mut r, dim)).collect(),
        offsets: random_vec(&mut r, k),
        dual: space.dual(),
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1e-3 + y.abs()))
        .fold(0.0, f64::max)
}

#[test]
fn step_width_gradient_matches_finite_differences() {
    for (seed, p) in [(1, 1.5), (2, 3.0)] {
        let inst = instance(seed, p, 15, 3);
        let h = SesopObjective::new(
            &inst.xi,
            inst.dirs.iter().map(Vec::as_slice).collect(),
            &inst.offsets,
            inst.dual,
        )
        .unwrap();
        let mut r = rng(seed + 100);
        for _ in 0..20 {
            let t = random_vec(&mut r, 3);
            let f = |v: &[f64]| value(&h, v);
            let fd = fd_gradient(&f, &t);
            assert!(max_rel(&grad(&h, &t), &fd) <= 1e-5);
        }
    }
}

#[test]
fn orthogonalization_gradient_matches_finite_differences() {
    for (seed, p) in [(3, 1.5), (4, 3.0)] {
        let inst = instance(seed, p, 15, 3);
        let g = OrthogonalizationObjective::new(
            &inst.xi,
            inst.dirs.iter().map(Vec::as_slice).collect(),
            inst.dual,
        )
        .unwrap();
        let mut r = rng(seed + 100);
        for _ in 0..20 {
            let s = random_vec(&mut r, 3);
            let f = |v: &[f64]| value(&g, v);
            let fd = fd_gradient(&f, &s);
            assert!(max_rel(&grad(&g, &s), &fd) <= 1e-5);
        }
    }
}

#[test]
fn step_width_value_at_origin() {
    // h(0) = (1/power*) ‖ξ‖^{power*} = (1/power*) ‖x‖^{power}
    let space = LpSpec::new(6, 1.5, 2.0).unwrap();
    let mut r = rng(8);
    let x = random_vec(&mut r, 6);
    let xi = space.duality_map_slice(&x);
    let d = random_vec(&mut r, 6);
    let h = SesopObjective::new(&xi, vec![&d], &[0.3], space.dual()).unwrap();
    let expected = norm(&x, 1.5).powf(2.0) / 2.0;
    assert!((value(&h, &[0.0]) - expected).abs() <= 1e-12 * expected);
}

#[test]
fn hilbert_step_width_is_a_parabola() {
    let space = LpSpec::new(10, 2.0, 2.0).unwrap();
    let mut r = rng(21);
    let xi = random_vec(&mut r, 10);
    let u = random_vec(&mut r, 10);
    let alpha = 0.7;
    let offsets = [alpha];
    let h = SesopObjective::new(&xi, vec![&u], &offsets, space.dual()).unwrap();
    // h(t) = ½‖ξ − t u‖² + t α  ⇒  t* = (⟨ξ,u⟩ − α)/‖u‖²
    let t_star = (pairing(&xi, &u) - alpha) / pairing(&u, &u);
    let m = minimize(&h, &LineSearchConfig::new(1e-12, 20)).unwrap();
    assert!((m.t[0] - t_star).abs() <= 1e-10 * (1.0 + t_star.abs()));
}

#[test]
fn step_width_minimizer_is_stationary() {
    let inst = instance(31, 1.5, 25, 3);
    let h = SesopObjective::new(
        &inst.xi,
        inst.dirs.iter().map(Vec::as_slice).collect(),
        &inst.offsets,
        inst.dual,
    )
    .unwrap();
    let m = minimize(&h, &LineSearchConfig::new(1e-12, 200)).unwrap();
    let f = |v: &[f64]| value(&h, v);
    for g in fd_gradient(&f, &m.t) {
        assert!(g.abs() <= 1e-5, "{g}");
    }
}

#[test]
fn lp3_orthogonalization_matches_golden_section() {
    let space = LpSpec::new(12, 1.5, 1.5).unwrap(); // dual is l3 with power 3
    let mut r = rng(41);
    let d = random_vec(&mut r, 12);
    let w = random_vec(&mut r, 12);
    let g = OrthogonalizationObjective::new(&d, vec![&w], space.dual()).unwrap();
    let m = minimize(&g, &LineSearchConfig::new(1e-13, 100)).unwrap();
    let f = |s: f64| value(&g, &[s]);
    let s_ref = golden_section(&f, -10.0, 10.0, 1e-9);
    assert!((m.t[0] - s_ref).abs() <= 1e-6, "{} vs {}", m.t[0], s_ref);
}

#[test]
fn two_starts_reach_the_same_minimizer() {
    let inst = instance(55, 1.5, 20, 3);
    let h = SesopObjective::new(
        &inst.xi,
        inst.dirs.iter().map(Vec::as_slice).collect(),
        &inst.offsets,
        inst.dual,
    )
    .unwrap();
    let tol = 1e-10;
    let a = minimize(&h, &LineSearchConfig::new(tol, 500)).unwrap();
    let b = minimize(
        &h,
        &LineSearchConfig::new(tol, 500).with_initial_point(vec![2.0, -1.0, 0.5]),
    )
    .unwrap();
    assert!(a.converged && b.converged);
    for (x, y) in a.t.iter().zip(&b.t) {
        assert!((x - y).abs() <= 10.0 * tol, "{x} vs {y}");
    }
}

proptest! {
    #[test]
    fn minimize_never_increases_value(seed in 0u64..200, p in 1.2f64..4.0, start in prop::collection::vec(-5.0f64..5.0, 2)) {
        let inst = instance(seed, p, 8, 2);
        let h = SesopObjective::new(&inst.xi, inst.dirs.iter().map(Vec::as_slice).collect(), &inst.offsets, inst.dual).unwrap();
        let f0 = value(&h, &start);
        let m = minimize(&h, &LineSearchConfig::new(1e-10, 5).with_initial_point(start)).unwrap();
        prop_assert!(m.value <= f0);
    }

    #[test]
    fn gradients_agree_with_differences_everywhere(seed in 0u64..200, p in 1.3f64..4.0) {
        let inst = instance(seed, p, 9, 2);
        let h = SesopObjective::new(&inst.xi, inst.dirs.iter().map(Vec::as_slice).collect(), &inst.offsets, inst.dual).unwrap();
        let g = OrthogonalizationObjective::new(&inst.xi, inst.dirs.iter().map(Vec::as_slice).collect(), inst.dual).unwrap();
        let mut r = rng(seed);
        let t = random_vec(&mut r, 2);
        let fh = |v: &[f64]| value(&h, v);
        let fg = |v: &[f64]| value(&g, v);
        prop_assert!(max_rel(&grad(&h, &t), &fd_gradient(&fh, &t)) <= 1e-5);
        prop_assert!(max_rel(&grad(&g, &t), &fd_gradient(&fg, &t)) <= 1e-5);
    }
}
