use proptest::prelude::*;
use wavekit_core::planewave::*;
use wavekit_core::reference::{finite_well_energies, gaussian_packet, klein_gordon_energy};
use wavekit_core::*;

#[test]
fn reflected_grid_gives_the_same_spectrum() {
    let units = UnitSystem::natural();
    let a = Grid::line(-3.0, 5.0, 401, Boundary::Dirichlet).unwrap();
    let b = Grid::line(-5.0, 3.0, 401, Boundary::Dirichlet).unwrap();
    let sa = solve_schrodinger_stationary(&a, &PotentialSpec::harmonic(1.3, 1.0).centered(0.7), 6, &units).unwrap();
    let sb = solve_schrodinger_stationary(&b, &PotentialSpec::harmonic(1.3, 1.0).centered(-0.7), 6, &units).unwrap();
    for (x, y) in sa.energies.iter().zip(&sb.energies) {
        assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
    }
}

#[test]
fn eigenstates_are_orthonormal() {
    let units = UnitSystem::natural();
    let grid = Grid::line(-8.0, 8.0, 600, Boundary::Dirichlet).unwrap();
    let s = solve_schrodinger_stationary(&grid, &PotentialSpec::square_well(6.0, 1.5), 6, &units).unwrap();
    for (i, a) in s.states.iter().enumerate() {
        for (j, b) in s.states.iter().enumerate() {
            let g = inner_product(a, b).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g.re - want).abs() <= 1e-8 && g.im.abs() <= 1e-8, "G[{i}][{j}] = {g}");
        }
    }
}

#[test]
fn crank_nicolson_conserves_norm() {
    let units = UnitSystem::natural();
    for bc in [Boundary::Dirichlet, Boundary::Periodic] {
        let grid = Grid::line(-20.0, 20.0, 512, bc).unwrap();
        let psi = gaussian_packet(&grid, -3.0, 1.0, 2.0);
        let t = propagate_schrodinger(&psi, &PotentialSpec::harmonic(0.3, 1.0), 0.01, 1000, &units).unwrap();
        assert!(t.max_norm_drift() <= 1e-10, "{bc:?}: {}", t.max_norm_drift());
    }
}

#[test]
fn finite_well_catalog_matches_the_grid_solver() {
    let units = UnitSystem::natural();
    let exact = finite_well_energies(10.0, 1.0, &units);
    let grid = Grid::line(-8.0, 8.0, 3201, Boundary::Dirichlet).unwrap();
    let s = solve_schrodinger_stationary(&grid, &PotentialSpec::square_well(10.0, 1.0), exact.len(), &units).unwrap();
    for (e, g) in exact.iter().zip(&s.energies) {
        assert!((e - g).abs() < 2e-2 * e.abs().max(1.0), "{e} vs {g}");
    }
}

fn units_strategy() -> impl Strategy<Value = UnitSystem> {
    (0.1f64..10.0, 0.1f64..10.0, 0.5f64..200.0).prop_map(|(h, m, c)| UnitSystem::new(h, m, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn calibration_closes_for_free_states(p in -50.0f64..50.0, units in units_strategy()) {
        prop_assume!(p.abs() > 1e-3);
        for check in calibration_residuals(p, &units).unwrap() {
            prop_assert!(check.relative() <= 1e-12, "{}: {}", check.constant, check.relative());
        }
        prop_assert!(residual_nr_stationary(&PlaneWaveState::free_nr(p, &units), &units).unwrap().abs()
            <= 1e-12 * (p * p / units.mass).max(1e-300));
    }

    #[test]
    fn klein_gordon_is_recovered_without_potential(p in -20.0f64..20.0, e in -50.0f64..50.0, units in units_strategy()) {
        let state = PlaneWaveState::free_rel(p, &units).with_energy(e);
        let kg = klein_gordon_energy(p, units.rest_energy, units.c);
        let want = e * e - kg * kg;
        let got = residual_rel_timedep(&state, &units).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * (e * e).max(kg * kg));
    }

    #[test]
    fn residuals_are_continuous_as_the_potential_vanishes(p in 0.2f64..5.0, units in units_strategy()) {
        let nr = PlaneWaveState::free_nr(p, &units).with_energy(p * p / units.mass);
        let rel = PlaneWaveState::free_rel(p, &units);
        let scale = units.rest_energy.min(nr.energy);
        let mut slopes: Vec<Vec<f64>> = Vec::new();
        let mut noise: Vec<f64> = Vec::new();
        for v in [1e-2, 1e-3, 1e-4].map(|f| f * scale) {
            let diffs = [
                residual_nr_stationary(&nr.with_potential(v), &units).unwrap() - residual_nr_stationary(&nr, &units).unwrap(),
                residual_nr_timedep(&nr.with_potential(v), &units).unwrap() - residual_nr_timedep(&nr, &units).unwrap(),
                residual_rel_stationary(&rel.with_potential(v), &units).unwrap() - residual_rel_stationary(&rel, &units).unwrap(),
                residual_rel_timedep(&rel.with_potential(v), &units).unwrap() - residual_rel_timedep(&rel, &units).unwrap(),
                residual_spin_half(&rel.with_potential(v), &units, Branch::Positive).unwrap()
                    - residual_spin_half(&rel, &units, Branch::Positive).unwrap(),
                residual_massless(&rel.with_potential(v), &units, Branch::Negative).unwrap()
                    - residual_massless(&rel, &units, Branch::Negative).unwrap(),
            ];
            slopes.push(diffs.iter().map(|d| d.abs() / v).collect());
            // Roundoff in residuals built from terms of size ~E² (or E for the spinor ones).
            let big = (rel.energy * rel.energy).max(nr.energy * nr.energy).max(units.c * units.c * p * p);
            noise.push(1e-13 * big / v);
        }
        // |r(V) − r(0)| ≤ K|V| with K read off at the largest V.
        for j in 0..slopes[0].len() {
            let k = slopes[0][j] * 1.5;
            for (s, n) in slopes.iter().zip(&noise) {
                prop_assert!(s[j] <= k + n, "residual {j}: {} > {k} + {n}", s[j]);
            }
        }
    }
}

#[test]
fn modified_dispersion_differs_from_the_shifted_parabola() {
    // Zero of p²/2m − (E − 2V)²/(E − V) at constant V versus E = p²/2m + V.
    let units = UnitSystem::natural();
    for v in [0.3, -0.7, 1.5] {
        let p: f64 = 3.0;
        let shifted = p * p / 2.0 + v;
        let state = PlaneWaveState::free_nr(p, &units).with_potential(v).with_energy(shifted);
        let r = residual_nr_stationary(&state, &units).unwrap();
        assert!(r.abs() > 1e-3, "V = {v}: residual {r}");
        // The zero set is where (E − 2V)² = (p²/2m)(E − V).
        let k = p * p / 2.0;
        let b = 4.0 * v + k;
        let root = 0.5 * (b + (b * b - 4.0 * (4.0 * v * v + k * v)).sqrt());
        let on_shell = state.with_energy(root);
        assert!(residual_nr_stationary(&on_shell, &units).unwrap().abs() < 1e-12);
        assert!((root - shifted).abs() > 1e-3);
    }
}
