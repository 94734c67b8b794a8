use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wavekit_core::reference::infinite_well_energy;
use wavekit_core::*;

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> WaveField {
    let active = grid.active();
    let mut f = WaveField::zeros(grid);
    for i in active {
        f.values[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_symmetric(n in 16usize..200, periodic in any::<bool>(), fourth in any::<bool>(), seed in any::<u64>()) {
        let bc = if periodic { Boundary::Periodic } else { Boundary::Dirichlet };
        let grid = Grid::line(-1.0, 2.5, n, bc).unwrap();
        let lap = build_laplacian(&grid, if fourth { 4 } else { 2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_field(&grid, &mut rng);
        let b = random_field(&grid, &mut rng);
        let lhs = inner_product(&lap.apply(&a).unwrap(), &b).unwrap();
        let rhs = inner_product(&a, &lap.apply(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn radial_s_wave_operator_matches_line_operator(n in 12usize..120, r_max in 1.0f64..40.0) {
        let radial = Grid::radial(r_max, n).unwrap();
        let line = Grid::line(0.0, r_max, n + 1, Boundary::Dirichlet).unwrap();
        prop_assert!((radial.spacing() - line.spacing()).abs() < 1e-15 * r_max);
        let a = build_radial_laplacian(&radial, 0, 2).unwrap();
        let b = build_laplacian(&line, 2).unwrap();
        for i in radial.active() {
            for j in radial.active() {
                prop_assert_eq!(a.entry(i, j), b.entry(i + 1, j + 1));
            }
        }
    }

    #[test]
    fn flat_wells_have_no_turning_points(
        depth in 0.1f64..50.0,
        width in 0.2f64..3.0,
        offset in 0.01f64..10.0,
        below in any::<bool>(),
    ) {
        let pot = PotentialSpec::square_well(depth, width);
        let grid = Grid::line(-5.0, 5.0, 201, Boundary::Dirichlet).unwrap();
        let inside = if below { -depth - offset } else { offset };
        let between = -depth * (0.5 + 0.4 * (offset / 10.0));
        for e in [inside, between] {
            let set = find_singular_set(&pot, e, SingularKind::EEqualsV, &grid).unwrap();
            prop_assert!(set.is_empty(), "{e}: {:?}", set.locations);
        }
    }

    #[test]
    fn turning_points_lie_on_the_energy_surface(e in 0.05f64..20.0, omega in 0.2f64..3.0, k in 0.2f64..4.0) {
        let checks = [
            (PotentialSpec::harmonic(omega, 1.0), Grid::line(-12.0, 12.0, 301, Boundary::Dirichlet).unwrap(), e),
            (PotentialSpec::coulomb(k), Grid::radial(60.0, 400).unwrap(), -k / (1.0 + e)),
        ];
        for (pot, grid, energy) in checks {
            let set = find_singular_set(&pot, energy, SingularKind::EEqualsV, &grid).unwrap();
            for x in &set.locations {
                prop_assert!(*x >= grid.x_min() && *x <= grid.x_max());
                let v = pot.evaluate(*x).unwrap();
                prop_assert!((energy - v).abs() <= 1e-9 * energy.abs().max(1.0), "{x}: {}", energy - v);
            }
        }
    }
}

fn well_errors(order: usize) -> Vec<f64> {
    let units = UnitSystem::natural();
    [41usize, 81, 161]
        .iter()
        .map(|&n| {
            let grid = Grid::line(0.0, PI, n, Boundary::Dirichlet).unwrap();
            let disc = Discretization { order, angular_momentum: 0 };
            let s = reference::solve_schrodinger_with(&grid, &PotentialSpec::free(), 3, &units, disc).unwrap();
            (s.energies[2] - infinite_well_energy(3, PI, &units)).abs()
        })
        .collect()
}

#[test]
fn second_order_stencil_converges_at_order_two() {
    let e = well_errors(2);
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn fourth_order_stencil_converges_at_order_four() {
    let e = well_errors(4);
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 16.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn turning_points_of_standard_potentials() {
    let units = UnitSystem::natural();
    let grid = Grid::line(-6.0, 6.0, 241, Boundary::Dirichlet).unwrap();
    let set = find_singular_set(&PotentialSpec::harmonic(1.0, units.mass), 2.0, SingularKind::EEqualsV, &grid).unwrap();
    assert_eq!(set.locations.len(), 2);
    assert!((set.locations[0] + 2.0).abs() < 1e-9 && (set.locations[1] - 2.0).abs() < 1e-9);

    let radial = Grid::radial(30.0, 300).unwrap();
    let set = find_singular_set(&PotentialSpec::coulomb(1.0), -0.5, SingularKind::EEqualsV, &radial).unwrap();
    assert_eq!(set.locations.len(), 1);
    assert!((set.locations[0] - 2.0).abs() < 1e-9);
}
