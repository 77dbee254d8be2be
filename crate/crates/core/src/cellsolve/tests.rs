use super::*;
use crate::linalg::{sym_eigenvalues, IDENTITY3};
use crate::material::{make_structured, Axis, Geometry, Phase};

const TOL: f64 = 1e-10;

fn laminate(a: [f64; 2], ms: [f64; 2], theta: f64, n: usize) -> UnitCellMaterial {
    make_structured(
        &Geometry::Laminate {
            normal: Axis::X,
            fractions: vec![theta, 1.0 - theta],
        },
        vec![Phase::new(a[0], ms[0]), Phase::new(a[1], ms[1])],
        n,
    )
    .unwrap()
}

#[test]
fn homogeneous_correctors_vanish() {
    let cell = UnitCellMaterial::homogeneous(Phase::new(3.0, 2.0), 8).unwrap();
    let model = homogenize(&cell, 1e-8).unwrap();
    for j in 0..3 {
        for l in 0..3 {
            let expect = if j == l { 3.0 } else { 0.0 };
            assert!((model.a_hom[j][l] - expect).abs() < 1e-14);
            assert_eq!(model.b_demag[j][l], 0.0);
        }
    }
    assert_eq!(model.diagnostics.exchange_iterations, [0; 3]);
}

#[test]
fn laminate_sawtooth_corrector() {
    let n = 16;
    let cell = laminate([1.0, 4.0], [1.0, 1.0], 0.5, n);
    let phi = solve_exchange_corrector(&cell, 0, TOL).unwrap().field;
    let h = 1.0 / n as f64;
    // slope of phi_1 inside each phase is 1.6 / a - 1 away from interfaces
    for (i, a) in [(2, 1.0), (12, 4.0)] {
        let slope = (phi.values()[i + 1] - phi.values()[i]) / h;
        assert!((slope - (1.6 / a - 1.0)).abs() < 1e-8, "slope {slope}");
    }
    assert_eq!(solve_exchange_corrector(&cell, 1, TOL).unwrap().field.max_abs(), 0.0);
    let set = solve_exchange_correctors(&cell, TOL).unwrap();
    let a = assemble_a_hom(&cell, &set).unwrap();
    assert!((a[0][0] - 1.6).abs() < 1e-9);
    assert!((a[1][1] - 2.5).abs() < 1e-12);
    assert!((a[2][2] - 2.5).abs() < 1e-12);
    assert!(a[0][1].abs() < 1e-12);
}

#[test]
fn laminate_demag_corrector_and_b() {
    let n = 16;
    let cell = laminate([1.0, 1.0], [1.0, 0.0], 0.5, n);
    let w = solve_demag_corrector(&cell, 0, TOL).unwrap().field;
    let h = 1.0 / n as f64;
    for (i, ms) in [(2, 1.0), (12, 0.0)] {
        let slope = (w.values()[i + 1] - w.values()[i]) / h;
        assert!((slope - (0.5 - ms)).abs() < 1e-8, "slope {slope}");
    }
    let set = solve_demag_correctors(&cell, TOL).unwrap();
    assert_eq!(set.w[1].max_abs(), 0.0);
    let b = assemble_b_demag(&cell, &set.w).unwrap();
    assert!((b[0][0] - 0.25).abs() < 1e-9);
    assert!(b[1][1].abs() < 1e-14 && b[0][1].abs() < 1e-14);

    let quarter = laminate([1.0, 1.0], [1.0, 0.0], 0.25, n);
    let set = solve_demag_correctors(&quarter, TOL).unwrap();
    let b = assemble_b_demag(&quarter, &set.w).unwrap();
    assert!((b[0][0] - 0.1875).abs() < 1e-9);
}

#[test]
fn checkerboard_is_close_to_geometric_mean() {
    let cell = make_structured(
        &Geometry::Checkerboard { invariant: Axis::Z },
        vec![Phase::new(1.0, 1.0), Phase::new(4.0, 1.0)],
        16,
    )
    .unwrap();
    let set = solve_exchange_correctors(&cell, 1e-8).unwrap();
    let a = assemble_a_hom(&cell, &set).unwrap();
    assert!((a[0][0] - 2.0).abs() < 0.15, "{:?}", a);
    assert!((a[0][0] - a[1][1]).abs() < 1e-8);
    assert!((a[2][2] - 2.5).abs() < 1e-12);
}

#[test]
fn correctors_minimize_cell_energy() {
    let cell = make_structured(
        &Geometry::SphereInclusion {
            radius: 0.3,
            center: [0.5; 3],
        },
        vec![Phase::new(1.0, 1.0), Phase::new(5.0, 1.0)],
        8,
    )
    .unwrap();
    let set = solve_exchange_correctors(&cell, 1e-10).unwrap();
    let a = assemble_a_hom(&cell, &set).unwrap();
    for j in 0..3 {
        let e = crate::linalg::unit(j);
        assert!((exchange_cell_energy(&cell, e, &set.phi[j]).unwrap() - a[j][j]).abs() < 1e-12);
        assert!(exchange_residual(&cell, j, &set.phi[j]).unwrap() <= 1e-10);
        let zero = ScalarCellField::zeros(8);
        assert!(a[j][j] <= exchange_cell_energy(&cell, e, &zero).unwrap());
        let mut perturbed = set.phi[j].values().to_vec();
        perturbed[17] += 1e-3;
        let p = ScalarCellField::new(8, perturbed, false).unwrap();
        assert!(a[j][j] < exchange_cell_energy(&cell, e, &p).unwrap());
    }
    let ev = sym_eigenvalues(&a);
    let avg = crate::material::cell_averages(&cell);
    assert!(avg.harm_a <= ev[0] && ev[2] <= avg.mean_a);
}

#[test]
fn g_hom_quadratic_form() {
    let a = [[1.6, 0.0, 0.0], [0.0, 2.5, 0.0], [0.0, 0.0, 2.5]];
    assert_eq!(g_hom_density(&a, &[[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]), 1.6);
    assert_eq!(g_hom_density(&a, &[[0.0; 3]; 3]), 0.0);
    let xi = [[1.0, 2.0, 0.5], [0.0, -1.0, 3.0], [2.0, 0.0, 1.0]];
    let c = 2.0;
    let ci = IDENTITY3.map(|r| r.map(|v| v * c));
    let sq: f64 = xi.iter().flatten().map(|v| v * v).sum();
    assert!((g_hom_density(&ci, &xi) - c * sq).abs() < 1e-12);
}

#[test]
fn dirichlet_ladder_on_laminate() {
    let cell = laminate([1.0, 4.0], [1.0, 1.0], 0.5, 8);
    let xi = [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
    let v: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&t| dirichlet_cell_value(&cell, &xi, t, 1e-10).unwrap())
        .collect();
    assert!(v[0] > 1.6 + 1e-3);
    assert!(v[1] <= v[0] + 1e-9 && v[2] <= v[1] + 1e-9, "{v:?}");
    assert!(v[2] >= 1.6 - 1e-9);
    let p = periodic_tiled_value(&cell, &xi, 2, 1e-10).unwrap();
    assert!((p - 1.6).abs() < 1e-8);
    let homog = UnitCellMaterial::homogeneous(Phase::new(2.0, 1.0), 4).unwrap();
    let xi = [[1.0, 1.0, 0.0], [0.0, 0.0, 2.0], [0.0; 3]];
    assert!((dirichlet_cell_value(&homog, &xi, 2, 1e-8).unwrap() - 12.0).abs() < 1e-12);
}

#[test]
fn tangential_defect_vanishes() {
    let cell = laminate([1.0, 4.0], [1.0, 1.0], 0.5, 8);
    let xi = [[1.0, 0.5, 0.0], [0.0, 1.0, 2.0], [0.0; 3]];
    let d = tangential_corrector_check(&cell, [0.0, 0.0, 1.0], &xi, 1e-8).unwrap();
    assert_eq!(d, 0.0);
    let s = [1.0 / 3f64.sqrt(); 3];
    let xi = [[1.0, 0.0, 2.0], [-1.0, 1.0, -1.0], [0.0, -1.0, -1.0]];
    let d = tangential_corrector_check(&cell, s, &xi, 1e-8).unwrap();
    assert!(d <= 1e-7, "defect {d}");
    assert!(tangential_corrector_check(&cell, s, &[[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]], 1e-8).is_err());
}

#[test]
fn trilinear_sampling_reproduces_nodes() {
    let n = 4;
    let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
    let f = ScalarCellField::new(n, vals, false).unwrap();
    assert_eq!(f.sample([1.5 / 4.0, 2.5 / 4.0, 0.5 / 4.0]), 9.0);
    // periodic: shifting by a whole cell leaves the value unchanged
    let y = [0.13, 0.77, 0.41];
    assert!((f.sample(y) - f.sample([y[0] + 1.0, y[1] - 2.0, y[2] + 3.0])).abs() < 1e-12);
}

#[test]
fn bad_arguments_are_rejected() {
    let cell = laminate([1.0, 4.0], [1.0, 1.0], 0.5, 4);
    assert!(solve_exchange_corrector(&cell, 3, 1e-8).is_err());
    assert!(solve_exchange_corrector(&cell, 0, 0.5).is_err());
    let other = laminate([1.0, 4.0], [1.0, 1.0], 0.5, 8);
    let set = solve_exchange_correctors(&other, 1e-8).unwrap();
    assert!(matches!(
        assemble_a_hom(&cell, &set),
        Err(Error::ResolutionMismatch { .. })
    ));
}

#[test]
fn model_json_round_trip() {
    let cell = laminate([1.0, 4.0], [1.0, 0.0], 0.5, 8);
    let model = homogenize(&cell, 1e-8).unwrap();
    let text = model.to_json().unwrap();
    assert_eq!(HomogenizedModel::from_json(&text).unwrap(), model);
    assert!(text.find("a_hom").unwrap() < text.find("b_demag").unwrap());
}
