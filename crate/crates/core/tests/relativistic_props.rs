use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wavekit_core::modified_rel::*;
use wavekit_core::planewave::Branch;
use wavekit_core::reference::dirac_free_energies;
use wavekit_core::*;

/// Plain Klein-Gordon leapfrog on a periodic grid, written out by hand.
fn kg_leapfrog(phi: &[f64], vel: &[f64], h: f64, dt: f64, steps: usize, c: f64, mass_term: f64) -> Vec<Vec<f64>> {
    let n = phi.len();
    let accel = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let lap = (u[(i + 1) % n] - 2.0 * u[i] + u[(i + n - 1) % n]) / (h * h);
                c * c * lap - mass_term * u[i]
            })
            .collect()
    };
    let a0 = accel(phi);
    let mut prev = phi.to_vec();
    let mut cur: Vec<f64> = (0..n).map(|i| phi[i] + vel[i] * dt + 0.5 * dt * dt * a0[i]).collect();
    let mut out = vec![phi.to_vec(), cur.clone()];
    for _ in 1..steps {
        let a = accel(&cur);
        let next: Vec<f64> = (0..n).map(|i| 2.0 * cur[i] - prev[i] + dt * dt * a[i]).collect();
        prev = std::mem::replace(&mut cur, next);
        out.push(cur.clone());
    }
    out
}

#[test]
fn free_propagator_is_klein_gordon() {
    let units = UnitSystem::new(1.0, 2.0, 1.5).unwrap();
    let grid = Grid::line(0.0, 2.0 * PI, 128, Boundary::Periodic).unwrap();
    let scenario = RelScenario::new(units, PotentialSpec::free(), grid, Ends::Open).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let vel: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dt = 0.01;
    let run = propagate_rel_timedep(
        &WaveField::from_real(&grid, &phi).unwrap(),
        &WaveField::from_real(&grid, &vel).unwrap(),
        &scenario,
        dt,
        500,
    )
    .unwrap();
    let mass_term = (units.rest_energy / units.hbar).powi(2);
    let oracle = kg_leapfrog(&phi, &vel, grid.spacing(), dt, 500, units.c, mass_term);
    for (frame, want) in run.trajectory.frames.iter().zip(&oracle) {
        for (z, w) in frame.values.iter().zip(want) {
            assert!((z.re - w).abs() <= 1e-12 && z.im == 0.0);
        }
    }
}

fn measured_frequency(n: usize, v: f64) -> (f64, f64) {
    let units = UnitSystem::natural();
    let grid = Grid::line(0.0, 2.0 * PI, n, Boundary::Periodic).unwrap();
    let k = 3.0;
    let scenario = RelScenario::new(units, PotentialSpec::constant(v), grid, Ends::Open).unwrap();
    let dt = 0.2 * grid.spacing();
    let phi = WaveField::from_fn(&grid, |x| Complex64::new((k * x).cos(), 0.0));
    let steps = (2.0 / dt) as usize;
    let run = propagate_rel_timedep(&phi, &WaveField::zeros(&grid), &scenario, dt, steps).unwrap();
    let amp: Vec<f64> = run
        .trajectory
        .frames
        .iter()
        .map(|f| inner_product(&phi, f).unwrap().re / PI)
        .collect();
    let mut sum = 0.0;
    let mut count = 0.0;
    for i in 1..amp.len() - 1 {
        if amp[i].abs() > 0.5 {
            sum += (amp[i + 1] + amp[i - 1]) / (2.0 * amp[i]);
            count += 1.0;
        }
    }
    let omega = (sum / count).acos() / dt;
    // Zero of (E(1 + V/E0))² − (c²p² + E0²) with E = ħω, p = ħk.
    let exact = (k * k + 1.0).sqrt() / (1.0 + v);
    (omega, exact)
}

#[test]
fn constant_potential_dispersion_converges_at_second_order() {
    for v in [0.0, 0.5, -0.3] {
        let errors: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let (w, e) = measured_frequency(n, v);
                (w - e).abs()
            })
            .collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.5..4.5).contains(&ratio), "V = {v}: ratio {ratio} from {errors:?}");
        }
    }
}

#[test]
fn box_levels_follow_the_constant_potential_identity() {
    let units = UnitSystem::natural();
    let grid = Grid::line(0.0, PI, 64, Boundary::Dirichlet).unwrap();
    let free = solve_rel_stationary(&RelScenario::boxed(units, PotentialSpec::free(), grid).unwrap(), (1.0 + 1e-9, 8.0)).unwrap();
    for v in [0.3, 1.7] {
        let s = RelScenario::boxed(units, PotentialSpec::constant(v), grid).unwrap();
        let r = solve_rel_stationary(&s, (1.0 + v + 1e-9, 8.0 + v)).unwrap();
        assert!(r.states.len() >= 3);
        for (a, b) in r.states.iter().zip(&free.states) {
            let (e, ef) = (a.energy, b.energy);
            let lhs = (e - v).powi(2) - 1.0;
            let rhs = (ef * ef - 1.0) / (1.0 + v).powi(2);
            assert!((lhs - rhs).abs() <= 1e-9 * rhs, "{lhs} vs {rhs}");
            assert!(e - v < ef);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_spinor_operator_is_hermitian(n in 8usize..96, periodic in any::<bool>(), seed in any::<u64>()) {
        let units = UnitSystem::new(1.0, 0.7, 2.0).unwrap();
        let n = n + n % 2;
        let bc = if periodic { Boundary::Periodic } else { Boundary::Dirichlet };
        let grid = Grid::line(-1.0, 3.0, n, bc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = || {
            let mut f = SpinorField::from_fn(&grid, |_| {
                (Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                 Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            });
            if !periodic {
                for v in [&mut f.upper, &mut f.lower] {
                    v[0] = Complex64::new(0.0, 0.0);
                    v[n - 1] = Complex64::new(0.0, 0.0);
                }
            }
            f
        };
        let (a, b) = (field(), field());
        let free = PotentialSpec::free();
        let ha = apply_modified_hamiltonian(&a, &free, &units).unwrap();
        let hb = apply_modified_hamiltonian(&b, &free, &units).unwrap();
        let dot = |x: &SpinorField, y: &SpinorField| {
            inner_product(&x.component(true), &y.component(true)).unwrap()
                + inner_product(&x.component(false), &y.component(false)).unwrap()
        };
        let (l, r) = (dot(&ha, &b), dot(&a, &hb));
        prop_assert!((l - r).norm() <= 1e-12 * l.norm().max(1.0), "{l} vs {r}");
    }

    #[test]
    fn constant_potential_only_rescales(v in -0.9f64..5.0, seed in any::<u64>()) {
        let units = UnitSystem::natural();
        let grid = Grid::line(0.0, 2.0, 40, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = SpinorField::from_fn(&grid, |_| {
            (Complex64::new(rng.gen_range(-1.0..1.0), 0.0), Complex64::new(0.0, rng.gen_range(-1.0..1.0)))
        });
        let free = apply_modified_hamiltonian(&psi, &PotentialSpec::free(), &units).unwrap();
        let shifted = apply_modified_hamiltonian(&psi, &PotentialSpec::constant(v), &units).unwrap();
        let f = 1.0 / (1.0 + v / units.rest_energy);
        for (s, w) in shifted.upper.iter().chain(&shifted.lower).zip(free.upper.iter().chain(&free.lower)) {
            prop_assert_eq!(*s, w * f);
        }
    }
}

#[test]
fn varying_potential_breaks_symmetry_of_the_modified_operator() {
    let units = UnitSystem::natural();
    let grid = Grid::line(-3.0, 3.0, 64, Boundary::Periodic).unwrap();
    let pot = PotentialSpec::harmonic(0.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut field = || {
        SpinorField::from_fn(&grid, |_| {
            (Complex64::new(rng.gen_range(-1.0..1.0), 0.0), Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
        })
    };
    let (a, b) = (field(), field());
    let dot = |x: &SpinorField, y: &SpinorField| {
        inner_product(&x.component(true), &y.component(true)).unwrap() + inner_product(&x.component(false), &y.component(false)).unwrap()
    };
    let l = dot(&apply_modified_hamiltonian(&a, &pot, &units).unwrap(), &b);
    let r = dot(&a, &apply_modified_hamiltonian(&b, &pot, &units).unwrap());
    assert!((l - r).norm() > 1e-3);
}

#[test]
fn generalized_eigenpairs_have_small_residuals() {
    let units = UnitSystem::new(1.0, 1.0, 2.0).unwrap();
    for bc in [Boundary::Dirichlet, Boundary::Periodic] {
        let grid = Grid::line(-4.0, 4.0, 200, bc).unwrap();
        let r = solve_spin_half_stationary(&grid, &PotentialSpec::harmonic(0.8, 1.0), &units, 1.0, 12).unwrap();
        assert!(r.residuals.iter().all(|x| *x <= 1e-8), "{bc:?}: {:?}", r.residuals);
    }
}

fn low_mode(n: usize, r: f64) -> f64 {
    let units = UnitSystem::new(1.0, 0.5, 1.0).unwrap();
    let grid = Grid::line(0.0, 2.0 * PI, n, Boundary::Periodic).unwrap();
    let s = solve_spin_half_stationary(&grid, &PotentialSpec::free(), &units, r, 6).unwrap();
    // p = ±1 positive branch
    let target = dirac_free_energies(1.0, 0.5, 1.0).0;
    s.energies.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs())).unwrap()
}

#[test]
fn wilson_shift_vanishes_linearly_in_h() {
    let shifts: Vec<f64> = [64usize, 128, 256].iter().map(|&n| (low_mode(n, 1.0) - low_mode(n, 0.0)).abs()).collect();
    for pair in shifts.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.8..2.2).contains(&ratio), "{shifts:?}");
    }
    let n = 128;
    let small: Vec<f64> = [1.0, 0.1, 0.01].iter().map(|r| (low_mode(n, *r) - low_mode(n, 0.0)).abs()).collect();
    assert!(small[1] < small[0] && small[2] < small[1]);
}

#[test]
fn massless_plane_waves_are_eigenfields() {
    let units = UnitSystem::new(1.0, 1.0, 1.0).unwrap();
    let grid = Grid::line(0.0, 2.0 * PI, 256, Boundary::Periodic).unwrap();
    let v = 0.5;
    let s = solve_massless(&grid, &PotentialSpec::constant(v), &units, 40).unwrap();
    for p in [1.0, 2.0] {
        for branch in [Branch::Positive, Branch::Negative] {
            let want = branch.sign() * p / (1.0 + v);
            let got = s.energies.iter().copied().min_by(|a, b| (a - want).abs().total_cmp(&(b - want).abs())).unwrap();
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }
    let rest = dirac_free_energies(0.0, 1.0, 1.0);
    assert_eq!(rest, (1.0, -1.0));
}

#[test]
fn wilson_lattice_matches_dirac_dispersion_for_low_modes() {
    let units = UnitSystem::new(1.0, 0.25, 1.0).unwrap();
    let grid = Grid::line(0.0, 2.0 * PI, 1024, Boundary::Periodic).unwrap();
    let s = solve_spin_half_stationary(&grid, &PotentialSpec::free(), &units, 1.0, 38).unwrap();
    for p in 0..10 {
        let (plus, minus) = dirac_free_energies(p as f64, 0.25, 1.0);
        for want in [plus, minus] {
            let got = s.energies.iter().copied().min_by(|a, b| (a - want).abs().total_cmp(&(b - want).abs())).unwrap();
            assert!(((got - want) / want).abs() <= 1e-3, "p = {p}: {got} vs {want}");
        }
    }
}
