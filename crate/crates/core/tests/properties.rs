use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use magnhom::cellsolve::{
    assemble_a_hom, dirichlet_cell_value, exchange_cell_energy, homogenize, solve_exchange_correctors,
    HomogenizedModel, ScalarCellField,
};
use magnhom::converge::{continuous_convergence_sweep, decreasing_with_slack, recovery_sequence};
use magnhom::demag::{magnetostatic_energy, stray_field, DomainGrid, VectorDomainField};
use magnhom::energy::{
    anisotropy_density, dirichlet_energy, energy_fine, energy_hom, minimize, AppliedField, EnergyModel, Evaluator,
    MagnetizationField, MinimizeOptions, UNIT_TOL,
};
use magnhom::linalg::{asymmetry, dot_fields, frobenius, mat_vec, normalize, sym_eigenvalues, Mat3, Vec3};
use magnhom::material::{
    cell_averages, parse_cell, sample_to_domain, validate, write_cell, AnisotropySpec, Phase, UnitCellMaterial,
};

const TOL: f64 = 1e-8;

fn unit_vec() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-3)
        .prop_map(|v| normalize(v).unwrap())
}

fn anisotropy() -> impl Strategy<Value = AnisotropySpec> {
    prop_oneof![
        Just(AnisotropySpec::None),
        (0.0f64..2.0, unit_vec()).prop_map(|(kappa, axis)| AnisotropySpec::Uniaxial { kappa, axis }),
        (0.0f64..2.0, rotation()).prop_map(|(kappa, r)| AnisotropySpec::Cubic {
            kappa,
            axes: [r[0], r[1], r[2]],
        }),
    ]
}

fn phase() -> impl Strategy<Value = Phase> {
    (0.5f64..5.0, 0.0f64..2.0, anisotropy()).prop_map(|(a, ms, an)| Phase::new(a, ms).with_anisotropy(an))
}

/// Two-phase cell with both phases present.
fn two_phase_cell() -> impl Strategy<Value = UnitCellMaterial> {
    (2usize..=6)
        .prop_flat_map(|n| (Just(n), phase(), phase(), prop::collection::vec(0u16..2, n * n * n)))
        .prop_map(|(n, p0, p1, mut map)| {
            map[0] = 0;
            map[1] = 1;
            UnitCellMaterial::new(n, vec![p0, p1], map).unwrap()
        })
}

/// Rows of a rotation matrix from a unit quaternion.
fn rotation() -> impl Strategy<Value = Mat3> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero", |q| q.iter().map(|c| c * c).sum::<f64>() > 1e-2)
        .prop_map(|q| {
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            let [w, x, y, z] = q.map(|c| c / n);
            [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                ],
                [
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                ],
                [
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ]
        })
}

fn random_field(grid: DomainGrid, seed: u64) -> MagnetizationField {
    MagnetizationField::random(grid, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn vector_field(grid: DomainGrid, s: f64) -> VectorDomainField {
    VectorDomainField::from_fn(grid, |x| {
        let t = s * (x[0] + 2.0 * x[1] + 3.0 * x[2]);
        [t.sin(), (1.7 * t).cos(), (0.3 * t + x[0]).sin()]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cell_average_inequalities(cell in two_phase_cell()) {
        let avg = cell_averages(&cell);
        prop_assert!(avg.harm_a <= avg.mean_a * (1.0 + 1e-14));
        prop_assert!(avg.mean_ms * avg.mean_ms <= avg.mean_ms_sq * (1.0 + 1e-14) + 1e-300);
    }

    #[test]
    fn cell_file_round_trip(cell in two_phase_cell()) {
        let back = parse_cell(&write_cell(&cell).unwrap()).unwrap();
        prop_assert_eq!(back, cell);
    }

    #[test]
    fn sampling_at_half_period_doubles_coordinates(cell in two_phase_cell(), k in 0u32..3) {
        let eps = 0.5f64.powi(k as i32);
        let n = 16;
        let unit = DomainGrid::cube(1.0, n);
        let doubled = DomainGrid::cube(2.0, n);
        let fine = sample_to_domain(&cell, &unit, eps / 2.0).unwrap();
        let coarse = sample_to_domain(&cell, &doubled, eps).unwrap();
        prop_assert_eq!(fine, coarse);
    }

    #[test]
    fn a_hom_symmetric_and_bounded(cell in two_phase_cell(), seed in any::<u64>()) {
        let set = solve_exchange_correctors(&cell, TOL).unwrap();
        let a = assemble_a_hom(&cell, &set).unwrap();
        prop_assert!(asymmetry(&a) <= 1e-10 * frobenius(&a));
        let avg = cell_averages(&cell);
        let ev = sym_eigenvalues(&a);
        let delta = 10.0 * TOL * avg.mean_a;
        prop_assert!(avg.harm_a - delta <= ev[0], "{} > {}", avg.harm_a, ev[0]);
        prop_assert!(ev[2] <= avg.mean_a + delta, "{} > {}", ev[2], avg.mean_a);

        // the corrector beats psi = 0 and random zero-mean trial fields
        let n = cell.resolution();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..3 {
            let mut xi = [0.0; 3];
            xi[j] = 1.0;
            let slack = 10.0 * TOL * avg.mean_a;
            let zero = exchange_cell_energy(&cell, xi, &ScalarCellField::zeros(n)).unwrap();
            prop_assert!(a[j][j] <= zero + slack);
            for _ in 0..5 {
                let v: Vec<f64> = (0..n * n * n).map(|_| rand::Rng::random_range(&mut rng, -0.3..0.3)).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let psi = ScalarCellField::new(n, v.iter().map(|x| x - mean).collect(), true).unwrap();
                prop_assert!(a[j][j] <= exchange_cell_energy(&cell, xi, &psi).unwrap() + slack);
            }
        }
    }

    #[test]
    fn a_hom_permutation_equivariant(cell in two_phase_cell(), which in 0usize..6) {
        let perms = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]];
        let p = perms[which];
        let a = assemble_a_hom(&cell, &solve_exchange_correctors(&cell, 1e-11).unwrap()).unwrap();
        let permuted = cell.permute_axes(p).unwrap();
        let b = assemble_a_hom(&permuted, &solve_exchange_correctors(&permuted, 1e-11).unwrap()).unwrap();
        for d in 0..3 {
            for e in 0..3 {
                prop_assert!((b[d][e] - a[p[d]][p[e]]).abs() <= 1e-8 * frobenius(&a), "{b:?} vs {a:?}");
            }
        }
    }

    #[test]
    fn b_demag_psd(cell in two_phase_cell()) {
        let model = homogenize(&cell, TOL).unwrap();
        let b = model.b_demag;
        let trace = b[0][0] + b[1][1] + b[2][2];
        prop_assert!(asymmetry(&b) <= 1e-10 * frobenius(&b).max(f64::MIN_POSITIVE));
        prop_assert!(sym_eigenvalues(&b)[0] >= -1e-10 * trace.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn b_demag_vanishes_for_constant_ms(a0 in 0.5f64..5.0, a1 in 0.5f64..5.0, ms in 0.0f64..2.0, n in 2usize..6) {
        let map: Vec<u16> = (0..n * n * n).map(|i| ((i * 7 + i / 3) % 2) as u16).collect();
        let cell = UnitCellMaterial::new(n, vec![Phase::new(a0, ms), Phase::new(a1, ms)], map).unwrap();
        prop_assert!(frobenius(&homogenize(&cell, TOL).unwrap().b_demag) <= TOL);
    }

    #[test]
    fn dirichlet_ladder_monotone(cell in two_phase_cell(), j in 0usize..3) {
        let cell = if cell.resolution() > 4 { cell.resample(4).unwrap() } else { cell };
        let model = homogenize(&cell, TOL).unwrap();
        let mut xi = [[0.0; 3]; 3];
        xi[0][j] = 1.0;
        let g = model.a_hom[j][j];
        let values: Vec<f64> = [1, 2, 4].iter().map(|&t| dirichlet_cell_value(&cell, &xi, t, TOL).unwrap()).collect();
        let slack = 10.0 * TOL * g.max(1.0);
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0] + slack), "{values:?}");
        prop_assert!(values.iter().all(|&v| v >= g - slack), "{values:?} vs {g}");
    }

    #[test]
    fn stray_field_linear_and_reciprocal(s in 0.1f64..5.0, t in 0.1f64..5.0, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let grid = DomainGrid::new([1.0, 0.5, 0.75], [6, 4, 5]).unwrap();
        let (u, v) = (vector_field(grid, s), vector_field(grid, t));
        let hu = stray_field(&u).unwrap();
        let hv = stray_field(&v).unwrap();
        let combo = VectorDomainField::new(
            grid,
            u.values().iter().zip(v.values()).map(|(a, b)| [0, 1, 2].map(|d| alpha * a[d] + beta * b[d])).collect(),
        ).unwrap();
        let hc = stray_field(&combo).unwrap();
        let scale = hu.values().iter().chain(hv.values()).flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for ((c, a), b) in hc.values().iter().zip(hu.values()).zip(hv.values()) {
            for d in 0..3 {
                prop_assert!((c[d] - alpha * a[d] - beta * b[d]).abs() <= 1e-12 * scale * (alpha.abs() + beta.abs() + 1.0));
            }
        }
        let x = dot_fields(hu.values(), v.values());
        let y = dot_fields(hv.values(), u.values());
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()));
        prop_assert!(magnetostatic_energy(&u, 1.0).unwrap() >= 0.0);
    }

    #[test]
    fn anisotropy_frame_covariant(spec in anisotropy(), m in unit_vec(), r in rotation()) {
        let rotated = match &spec {
            AnisotropySpec::None => AnisotropySpec::None,
            AnisotropySpec::Uniaxial { kappa, axis } => AnisotropySpec::Uniaxial { kappa: *kappa, axis: mat_vec(&r, *axis) },
            AnisotropySpec::Cubic { kappa, axes } => AnisotropySpec::Cubic {
                kappa: *kappa,
                axes: axes.map(|u| mat_vec(&r, u)),
            },
        };
        let before = anisotropy_density(&spec, m);
        let after = anisotropy_density(&rotated, mat_vec(&r, m));
        prop_assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
    }

    #[test]
    fn energy_decomposition(cell in two_phase_cell(), seed in any::<u64>(), h in prop::array::uniform3(-2.0f64..2.0)) {
        let grid = DomainGrid::cube(1.0, 8);
        let eps = 0.5;
        let m = random_field(grid, seed);
        let h_a = AppliedField::new(h).unwrap();
        let model = homogenize(&cell, TOL).unwrap();
        let fine = energy_fine(&cell, eps, &m, h_a, 1.0).unwrap();
        let hom = energy_hom(&model, &m, h_a, 1.0).unwrap();
        for e in [fine, hom] {
            prop_assert_eq!(e.total, e.exchange + e.anisotropy + e.magnetostatic + e.zeeman);
            prop_assert!(e.exchange >= 0.0 && e.anisotropy >= 0.0 && e.magnetostatic >= 0.0);
        }
    }

    #[test]
    fn equicoercivity_sandwich(cell in two_phase_cell(), seed in any::<u64>(), mu0 in 0.1f64..3.0) {
        let grid = DomainGrid::cube(1.0, 16);
        let m = random_field(grid, seed);
        let report = validate(&cell);
        let e = energy_fine(&cell, 0.25, &m, AppliedField::ZERO, mu0).unwrap();
        let d = dirichlet_energy(&m);
        let vol = grid.volume();
        let upper = report.big_c_ex.max(0.5 * mu0 * report.c_s * report.c_s * vol).max(report.c_an * vol);
        prop_assert!(report.c_ex * d <= e.total * (1.0 + 1e-12), "{} * {d} > {}", report.c_ex, e.total);
        prop_assert!(e.total <= upper * (1.0 + d), "{} > {upper} * (1 + {d})", e.total);
    }

    #[test]
    fn homogeneous_cell_is_scale_free(p in phase(), seed in any::<u64>(), h in prop::array::uniform3(-2.0f64..2.0)) {
        let cell = UnitCellMaterial::homogeneous(p.clone(), 2).unwrap();
        let grid = DomainGrid::cube(1.0, 16);
        let m = random_field(grid, seed);
        let h_a = AppliedField::new(h).unwrap();
        let a = energy_fine(&cell, 1.0, &m, h_a, 1.0).unwrap();
        let b = energy_fine(&cell, 0.5, &m, h_a, 1.0).unwrap();
        let c = energy_fine(&cell, 0.25, &m, h_a, 1.0).unwrap();
        let parts = |e: &magnhom::energy::EnergyBreakdown| [e.exchange, e.anisotropy, e.magnetostatic, e.zeeman, e.total];
        prop_assert_eq!(parts(&a), parts(&b));
        prop_assert_eq!(parts(&a), parts(&c));
        let model = homogenize(&cell, TOL).unwrap();
        let hom = energy_hom(&model, &m, h_a, 1.0).unwrap();
        let direct = energy_hom(&HomogenizedModel::isotropic(p.a_ex, p.m_s, p.anisotropy.clone()), &m, h_a, 1.0).unwrap();
        let scale = a.total.abs().max(1.0);
        for (x, y) in [(a.exchange, hom.exchange), (a.anisotropy, hom.anisotropy), (a.magnetostatic, hom.magnetostatic), (a.zeeman, hom.zeeman)] {
            prop_assert!((x - y).abs() <= 10.0 * TOL * scale, "{x} vs {y}");
        }
        prop_assert!((hom.total - direct.total).abs() <= 10.0 * TOL * scale);
    }

    #[test]
    fn homogeneous_sweeps_stay_below_tol(p in phase(), h in prop::array::uniform3(-2.0f64..2.0)) {
        let cell = UnitCellMaterial::homogeneous(p, 2).unwrap();
        let model = homogenize(&cell, TOL).unwrap();
        let grid = DomainGrid::cube(1.0, 16);
        let m = MagnetizationField::from_fn(grid, |x| {
            let t = 2.0 * x[0] + x[2];
            [t.sin() * x[1].cos(), t.sin() * x[1].sin(), t.cos()]
        }).unwrap();
        let r = continuous_convergence_sweep(&cell, &model, &m, AppliedField::new(h).unwrap(), 1.0, &[0.5, 0.25]).unwrap();
        for row in &r.errors {
            for (e, v) in row.iter().zip(&r.reference) {
                prop_assert!(*e <= TOL * v.abs().max(1.0), "{:?}", r.errors);
            }
        }
        prop_assert!(r.verdict.pass);
    }

    #[test]
    fn recovery_sequence_is_unit(cell in two_phase_cell(), k in 0u32..2, f in 0.5f64..2.0) {
        let cell = cell.resample(4).unwrap();
        let set = solve_exchange_correctors(&cell, TOL).unwrap();
        let grid = DomainGrid::cube(1.0, 16);
        let m0 = MagnetizationField::from_fn(grid, |x| {
            let t = f * (x[0] + 0.5 * x[1] - x[2]);
            [t.cos(), t.sin() * 0.6, t.sin() * 0.8]
        }).unwrap();
        let m = recovery_sequence(&set, &m0, 0.5f64.powi(k as i32 + 1)).unwrap();
        prop_assert!(m.unit_defect() <= UNIT_TOL);
    }

    #[test]
    fn minimizer_keeps_unit_norm_and_descends(seed in any::<u64>(), h in prop::array::uniform3(-5.0f64..5.0)) {
        let grid = DomainGrid::cube(1.0, 6);
        let cell = UnitCellMaterial::homogeneous(
            Phase::new(1.0, 1.0).with_anisotropy(AnisotropySpec::Uniaxial { kappa: 0.5, axis: [0.0, 0.0, 1.0] }),
            2,
        ).unwrap();
        let eval = Evaluator::new(EnergyModel::Fine { cell: &cell, epsilon: 1.0 }, &grid, AppliedField::new(h).unwrap(), 1.0).unwrap();
        let out = minimize(&eval, &random_field(grid, seed), MinimizeOptions::new(40, 1e-3)).unwrap();
        prop_assert!(out.field.unit_defect() <= UNIT_TOL);
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn field_files_round_trip(seed in any::<u64>(), nx in 1usize..5, ny in 1usize..5, nz in 1usize..5) {
        let grid = DomainGrid::new([1.0, 0.5 * ny as f64, 0.25], [nx, ny, nz]).unwrap();
        let m = random_field(grid, seed);
        prop_assert_eq!(&MagnetizationField::from_bytes(&m.to_bytes()).unwrap(), &m);
        prop_assert_eq!(&MagnetizationField::from_text(&m.to_text()).unwrap(), &m);
    }

    #[test]
    fn strictly_decreasing_ladders_pass(mut v in prop::collection::vec(1e-6f64..1.0, 2..6)) {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v.dedup();
        prop_assert!(decreasing_with_slack(&v, 0.0).0);
        let mut rising = v.clone();
        rising.reverse();
        if rising.len() >= 3 {
            prop_assert!(!decreasing_with_slack(&rising, 0.0).0);
        }
    }
}
