use std::f64::consts::TAU;

use ekp_core::convexint::lambda_max;
use ekp_core::dynamics::{step, FluidState, Model};
use ekp_core::fields::{
    divergence, gradient, helmholtz_project, laplacian, partial, solve_poisson, Grid, ScalarField, VectorField,
};
use ekp_core::korteweg::{korteweg_force_direct, korteweg_identity_residual};
use ekp_core::laws::{CapillarityLaw, PressureLaw};
use ekp_core::madelung::{madelung_transform, split_step, wave_gradient, WaveState};
use ekp_core::profiles::{random_density, random_momentum};
use ekp_core::relent::{poisson_correction, relative_energy};
use ekp_core::whitney::{whitney_decompose, AxisBox, BoxSet};
use num_complex::Complex;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig::with_cases(cases)
}

fn pressure_laws() -> Vec<PressureLaw<f64>> {
    vec![
        PressureLaw::quadratic(),
        PressureLaw::power(1.4, 0.8).unwrap(),
        PressureLaw::power(3.0, 0.2).unwrap(),
        PressureLaw::polynomial(vec![0.0, 1.0, 0.5]).unwrap(),
    ]
}

fn capillarity_laws() -> Vec<CapillarityLaw<f64>> {
    vec![
        CapillarityLaw::constant_k(1.0).unwrap(),
        CapillarityLaw::quantum(0.7).unwrap(),
        CapillarityLaw::constant_chi(0.5).unwrap(),
        CapillarityLaw::polynomial(vec![0.0, 1.0, 0.25]).unwrap(),
    ]
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn derivative_of_trig_polynomial_is_exact(a in -2.0f64..2.0, b in -2.0f64..2.0, m in 1i64..7, dim in 1usize..3) {
        let g = Grid::<f64>::unit(dim, 16).unwrap();
        let w = TAU * m as f64;
        let f = ScalarField::from_fn(&g, |x| a * (w * x[0]).sin() + b * (w * x[0]).cos());
        let df = ScalarField::from_fn(&g, |x| w * (a * (w * x[0]).cos() - b * (w * x[0]).sin()));
        let got = partial(&f, 0).unwrap();
        prop_assert!(got.sub(&df).max_abs() <= 1e-12 * df.max_abs().max(1.0));
    }

    #[test]
    fn helmholtz_is_idempotent_and_orthogonal(seed in 0u64..1000) {
        let g = Grid::<f64>::unit(2, 16).unwrap();
        let j = random_momentum(&g, 4, 1.0, seed);
        let h = helmholtz_project(&j).unwrap();
        let grad = gradient(&h.potential).unwrap();
        let again = helmholtz_project(&h.solenoidal).unwrap();
        prop_assert!(again.solenoidal.sub(&h.solenoidal).max_abs() < 1e-12);
        prop_assert!(h.solenoidal.inner(&grad).abs() <= 1e-10 * h.solenoidal.l2_norm() * grad.l2_norm() + 1e-300);
        prop_assert!(divergence(&h.solenoidal).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn poisson_inverts_laplacian(seed in 0u64..1000, dim in 1usize..4) {
        let g = Grid::<f64>::unit(dim, 8).unwrap();
        let f = random_density(&g, 2, 1.0, 0.5, seed).unwrap().map(|v| v - 1.0);
        let f = f.map(|v| v - f.mean());
        let back = solve_poisson(&laplacian(&f).unwrap()).unwrap();
        prop_assert!(back.sub(&f).max_abs() < 1e-10);
    }

    #[test]
    fn internal_energy_curvature_matches_pressure(rho in 0.1f64..4.0) {
        for law in pressure_laws() {
            let h = 1e-4 * rho;
            let e = |x: f64| law.internal_energy(x).unwrap();
            let fd = (e(rho + h) - 2.0 * e(rho) + e(rho - h)) / (h * h);
            let exact = law.p_prime(rho) / rho;
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{law:?}: {fd} {exact}");
        }
    }

    #[test]
    fn chi_is_rho_times_k(rho in 0.01f64..10.0) {
        for law in capillarity_laws() {
            prop_assert!((law.chi(rho) - rho * law.k(rho)).abs() <= 4.0 * f64::EPSILON * law.chi(rho).abs().max(1.0));
        }
    }

    #[test]
    fn korteweg_identity_and_zero_mean_force(seed in 0u64..1000, dim in 1usize..3, modes in 1usize..5, amp in 0.0f64..0.9) {
        let g = Grid::<f64>::unit(dim, 64).unwrap();
        let rho = random_density(&g, modes, 1.0, amp, seed).unwrap();
        for law in capillarity_laws() {
            let res = korteweg_identity_residual(&rho, &law).unwrap();
            prop_assert!(res < 1e-8, "{law:?}: {res:e}");
            let f = korteweg_force_direct(&rho, &law).unwrap();
            prop_assert!(f.mean().iter().all(|m| m.abs() < 1e-10));
        }
    }

    #[test]
    fn one_step_conserves_mass(seed in 0u64..1000) {
        let g = Grid::<f64>::unit(1, 32).unwrap();
        let rho = random_density(&g, 4, 1.0, 0.4, seed).unwrap();
        let j = random_momentum(&g, 4, 0.3, seed + 1);
        let model = Model::new(PressureLaw::quadratic(), CapillarityLaw::constant_k(1.0).unwrap(), 0.5).unwrap();
        let s = FluidState::new(0.0, rho, j).unwrap();
        let next = step(&s, 1e-4, &model).unwrap();
        prop_assert!((next.mass() - s.mass()).abs() <= 1e-12 * s.mass());
    }

    #[test]
    fn wave_mass_is_invariant_and_current_is_bounded(seed in 0u64..1000, node in 0.0f64..0.05) {
        let g = Grid::<f64>::unit(1, 64).unwrap();
        let amp = random_density(&g, 3, 1.0, 0.5, seed).unwrap();
        let phase = random_density(&g, 2, 1.0, 0.5, seed + 7).unwrap();
        // a near-node at the origin
        let rho = ScalarField::from_fn(&g, |x| node + (1.0 - node) * (0.5 - 0.5 * (TAU * x[0]).cos())).mul(&amp);
        let w = WaveState::from_amplitude_phase(&rho, &phase.scale(3.0), 0.5).unwrap();
        let (dens, j) = madelung_transform(&w);
        let grad = wave_gradient(&w);
        for p in 0..g.len() {
            let gnorm = grad.iter().map(|c| c[p].norm_sqr()).sum::<f64>().sqrt();
            let bound = 2.0 * dens.values()[p].sqrt() * w.hbar * gnorm;
            prop_assert!(j.at(p)[0].abs() <= bound + 1e-14);
        }
        let mut cur = w.clone();
        for _ in 0..20 {
            cur = split_step(&cur, 1e-3, &PressureLaw::quadratic()).unwrap();
        }
        prop_assert!((cur.mass() - w.mass()).abs() <= 1e-12 * w.mass());
    }

    #[test]
    fn lambda_max_recovers_spectrum(angles in prop::array::uniform3(0.0f64..TAU), eig in prop::array::uniform3(-5.0f64..5.0)) {
        let (a, b, c) = (angles[0], angles[1], angles[2]);
        let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
        let rx = |t: f64| [[1.0, 0.0, 0.0], [0.0, t.cos(), -t.sin()], [0.0, t.sin(), t.cos()]];
        let mul = |x: [[f64; 3]; 3], y: [[f64; 3]; 3]| {
            let mut o = [[0.0; 3]; 3];
            for i in 0..3 { for j in 0..3 { for k in 0..3 { o[i][j] += x[i][k] * y[k][j]; } } }
            o
        };
        let q = mul(mul(rz(a), rx(b)), rz(c));
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 { for j in 0..3 { for k in 0..3 { m[i][j] += q[i][k] * eig[k] * q[j][k]; } } }
        let top = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((lambda_max(&m, 3) - top).abs() <= 1e-12 * top.abs().max(1.0) * 10.0);
    }

    #[test]
    fn kinetic_bound_and_rank_one_monotonicity(g in prop::array::uniform3(-3.0f64..3.0), w in prop::array::uniform6(-2.0f64..2.0), r in 0.1f64..5.0) {
        let mut wm = [[w[0], w[1], w[2]], [w[1], w[3], w[4]], [w[2], w[4], w[5]]];
        let tr = (wm[0][0] + wm[1][1] + wm[2][2]) / 3.0;
        for (i, row) in wm.iter_mut().enumerate() { row[i] -= tr; }
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 { for j in 0..3 { a[i][j] = g[i] * g[j] / r - wm[i][j]; } }
        let g2 = g.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(1.5 * lambda_max(&a, 3) >= 0.5 * g2 / r - 1e-12);
        let mut plus = [[0.0; 3]; 3];
        for i in 0..3 { for j in 0..3 { plus[i][j] = -wm[i][j] + g[i] * g[j] / r; } }
        let base: [[f64; 3]; 3] = wm.map(|row| row.map(|v| -v));
        prop_assert!(lambda_max(&plus, 3) >= lambda_max(&base, 3) - 1e-12);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn whitney_cubes_are_valid_disjoint_and_monotone(
        corners in prop::collection::vec((0.0f64..0.6, 0.0f64..0.6, 0.1f64..0.4, 0.1f64..0.4), 1..4)
    ) {
        let boxes = corners
            .iter()
            .map(|&(x, y, w, h)| AxisBox::new(vec![x, y], vec![x + w, y + h]).unwrap())
            .collect();
        let set = BoxSet::new(2, boxes).unwrap();
        let coarse = whitney_decompose(&set, 6).unwrap();
        let fine = whitney_decompose(&set, 7).unwrap();
        for c in &fine.cubes {
            prop_assert!(c.satisfies_predicate());
            let mid: Vec<f64> = c.lo.iter().zip(&c.hi).map(|(a, b)| 0.5 * (a + b)).collect();
            // the cube's distance sits within half a diameter of its centre's
            let centre = set.distance_to_complement(&mid).unwrap();
            prop_assert!(c.dist <= centre + 1e-12 && c.dist >= centre - 0.5 * c.diam - 1e-12);
            prop_assert!(c.diam <= c.dist + 1e-12 && c.dist <= 4.0 * c.diam + 1e-12);
        }
        for (i, a) in fine.cubes.iter().enumerate() {
            for b in &fine.cubes[i + 1..] {
                prop_assert!(!a.cube.overlaps(&b.cube));
            }
        }
        for c in &coarse.cubes {
            prop_assert!(fine.cubes.iter().any(|f| f.cube == c.cube));
        }
        prop_assert!(fine.residual_bound <= coarse.residual_bound + 1e-15);
    }

    #[test]
    fn relative_energy_is_nonnegative_and_poisson_term_nonpositive(seed in 0u64..1000, dim in 1usize..3) {
        let g = Grid::<f64>::unit(dim, 16).unwrap();
        let rho = random_density(&g, 3, 1.0, 0.6, seed).unwrap();
        let r = random_density(&g, 3, 1.2, 0.6, seed + 1).unwrap();
        let j = random_momentum(&g, 3, 0.5, seed + 2);
        let l = random_momentum(&g, 3, 0.5, seed + 3);
        for law in pressure_laws() {
            prop_assert!(relative_energy(&rho, &j, &r, &l, &law).unwrap() >= 0.0);
        }
        prop_assert!(poisson_correction(&rho, &r).unwrap() <= 0.0);
        let zero = VectorField::zeros(&g);
        prop_assert!(relative_energy(&r, &zero, &r, &zero, &PressureLaw::quadratic()).unwrap().abs() < 1e-14);
    }
}

#[test]
fn complex_wave_constructor_rejects_bad_input() {
    let g = Grid::<f64>::unit(1, 8).unwrap();
    assert!(WaveState::new(0.0, &g, vec![Complex::new(1.0, 0.0); 7], 1.0).is_err());
    assert!(WaveState::new(0.0, &g, vec![Complex::new(1.0, 0.0); 8], 0.0).is_err());
}
