use crack_lattice::crack_solver::{crack_opening_profile, predictor_field};
use crack_lattice::dislocation::{
    dislocation_equilibrium, plaquette_winding, recover_displacement, reduce_strain, Core,
    DislocationConfig, StrainForm, Winding,
};
use crack_lattice::energy::{half_integer_distance, EnergyModel};
use crack_lattice::greens::{
    boundary_difference, check_max_principle, ghom_diff, max_principle_boundary, potential_kernel,
};
use crack_lattice::lattice::{
    neighbor_directions, separation_of_points, Bond, Direction, DualSite, PrimalSite,
};
use crack_lattice::primal::{PrimalField, Window};
use proptest::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;

fn direction() -> impl Strategy<Value = Direction> {
    prop::sample::select(Direction::ALL.to_vec())
}

fn off_crack_site(half: i32) -> impl Strategy<Value = DualSite> {
    (-half..=half, -half..=half)
        .prop_map(|(i, j)| DualSite::new(i, j))
        .prop_filter("off the crack line", |s| !s.on_crack())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_factorises(
        ax in -1e3..1e3f64, ay in -1e3..1e3f64,
        bx in -1e3..1e3f64, by in -1e3..1e3f64,
    ) {
        let s = separation_of_points([ax, ay], [bx, by], false);
        prop_assume!(s.d > 1e-9);
        prop_assert!((s.d - s.d_w * s.d_tilde_w).abs() <= 1e-10 * s.d);
    }

    #[test]
    fn reduced_strain_is_a_representative(x in -50.0..50.0f64) {
        let r = reduce_strain(x);
        prop_assert!(r > -0.5 && r <= 0.5);
        let k = x - r;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn bond_sets_are_symmetric(i in -20..20i32, j in -20..20i32) {
        let l = PrimalSite::new(i, j);
        for &d in neighbor_directions(l) {
            let h = l.step(d);
            prop_assert!(neighbor_directions(h).contains(&d.reversed()));
        }
    }

    #[test]
    fn full_lattice_differences_stay_below_a_quarter(
        di in -60..60i64, dj in -60..60i64, rho in direction(),
    ) {
        let v = ghom_diff((di, dj), (0, 0), rho).abs();
        prop_assert!(v <= 0.25);
        let (oi, oj) = rho.offset();
        if (di, dj) != (0, 0) && (di + oi as i64, dj + oj as i64) != (0, 0) {
            prop_assert!(v < 0.25);
        }
    }

    #[test]
    fn kernel_is_harmonic_off_the_origin(i in -150..150i64, j in -150..150i64) {
        prop_assume!((i, j) != (0, 0));
        let lap: f64 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .map(|(a, b)| potential_kernel((i + a, j + b)) - potential_kernel((i, j)))
            .sum();
        prop_assert!(lap.abs() < 1e-11);
    }

    #[test]
    fn deep_boundary_differences_are_small(s in off_crack_site(40), rho in direction()) {
        let t = s.step(rho);
        prop_assume!(s.crack_distance_sq() >= 4 && t.crack_distance_sq() >= 4);
        prop_assert!(boundary_difference(s, rho).unwrap() < 1.0 / PI - 0.25);
    }

    #[test]
    fn residual_matches_finite_differences(seed in 0u64..1000, i in -5..5i32, j in -5..5i32) {
        let model = EnergyModel::new(1.7).unwrap();
        let w = Window::new(8.0);
        let y = PrimalField::from_fn(w, |l| {
            let x = (seed as f64 + 0.37 * l.i as f64 + 0.71 * l.j as f64).sin();
            0.3 * x + (l.i * l.j) as f64
        });
        let l = PrimalSite::new(i, j);
        let h = 1e-6;
        let g = model.site_gradient(&y, l).unwrap().unwrap();
        let mut plus = y.clone();
        plus.set(l, y.get(l).unwrap() + h);
        let mut minus = y.clone();
        minus.set(l, y.get(l).unwrap() - h);
        let fd = model.energy_diff(&plus, &minus, w) / (2.0 * h);
        prop_assert!((fd - g).abs() < 1e-7, "fd {} vs {}", fd, g);
    }

    #[test]
    fn hessian_form_is_weighted_dirichlet_energy(seed in 0u64..1000, lambda in 0.1..5.0f64) {
        let model = EnergyModel::new(lambda).unwrap();
        let w = Window::new(7.0);
        let y = PrimalField::from_fn(w, |l| 0.2 * ((l.i + 2 * l.j) as f64 + seed as f64).cos());
        let v = PrimalField::from_fn(w, |l| {
            if l.norm() < 4.0 { ((3 * l.i - l.j) as f64 * 0.1 + seed as f64).sin() } else { 0.0 }
        });
        let form = model.hessian_form(&y, &v, w).unwrap();
        let direct: f64 = v
            .positive_bonds(w)
            .map(|b| v.bond_difference(b).unwrap().powi(2))
            .sum::<f64>() * lambda;
        prop_assert!((form - direct).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn integer_jumps_cost_no_energy(seed in 0u64..1000, jumps in prop::collection::vec((-5..5i32, -5..5i32, -3..3i32), 1..10)) {
        let model = EnergyModel::new(1.0).unwrap();
        let w = Window::new(6.0);
        let y = PrimalField::from_fn(w, |l| 0.1 * ((l.i * 7 + l.j * 3) as f64 + seed as f64).sin());
        let mut z = y.clone();
        for (i, j, n) in jumps {
            let l = PrimalSite::new(i, j);
            if let Some(v) = z.get(l) {
                z.set(l, v + n as f64);
            }
        }
        prop_assert!(model.energy_diff(&z, &y, w).abs() < 1e-12);
        prop_assert!(
            (model.stability_margin(&z, w) - model.stability_margin(&y, w)).abs() < 1e-12
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn negated_burgers_signs_negate_strain(x in -6..6i32, y in -6..6i32, b in prop::sample::select(vec![-1, 1])) {
        let site = DualSite::new(x, y);
        prop_assume!(!site.on_crack());
        let cfg = DislocationConfig::single(site, b).unwrap();
        let a = dislocation_equilibrium(&cfg, 40, 1e-12).unwrap();
        let n = dislocation_equilibrium(&cfg.negated(), 40, 1e-12).unwrap();
        for (bond, v) in a.strain.iter() {
            prop_assert_eq!(n.strain.get(bond).unwrap(), -v);
        }
    }

    #[test]
    fn winding_is_gauge_invariant(x in -6..6i32, y in -6..6i32, gi in -8..8i32, gj in -8..8i32) {
        let site = DualSite::new(x, y);
        prop_assume!(!site.on_crack());
        let cfg = DislocationConfig::single(site, 1).unwrap();
        let eq = dislocation_equilibrium(&cfg, 40, 1e-12).unwrap();
        let other = recover_displacement(&eq.strain, PrimalSite::new(gi, gj)).unwrap();
        let base = eq.displacement.get(PrimalSite::new(gi, gj)).unwrap();
        for (l, v) in other.iter() {
            let shift = eq.displacement.get(l).unwrap() - base - v;
            prop_assert!((shift - shift.round()).abs() < 1e-9);
        }
        // windings from the reduced bond lengths of either displacement agree
        let w = eq.strain.window();
        let a = StrainForm::from_displacement(&eq.displacement, w);
        let b = StrainForm::from_displacement(&other, w);
        for c in [site, DualSite::new(x + 2, y), DualSite::new(-3, 4)] {
            match (plaquette_winding(&a, c), plaquette_winding(&b, c)) {
                (Winding::Value(p), Winding::Value(q)) => prop_assert!((p - q).abs() < 1e-9),
                (p, q) => prop_assert_eq!(p, q),
            }
        }
    }

    #[test]
    fn maximum_principle_on_random_data(seed in 0u64..10_000, r in 6..20i32) {
        let data: HashMap<DualSite, f64> = max_principle_boundary(r)
            .into_iter()
            .enumerate()
            .map(|(k, l)| (l, ((k as f64 + 1.0) * (seed as f64 + 0.5)).sin()))
            .collect();
        let rep = check_max_principle(&data, r, 1e-12).unwrap();
        prop_assert!(rep.holds);
        prop_assert!(rep.interior_max < rep.boundary_max);
    }
}

#[test]
fn two_core_equilibrium_has_two_charges() {
    let cfg = DislocationConfig::new(vec![
        Core::new(DualSite::new(3, 2), 1),
        Core::new(DualSite::new(-6, 2), -1),
    ])
    .unwrap();
    let eq = dislocation_equilibrium(&cfg, 64, 1e-12).unwrap();
    let mut total = 0.0;
    for i in -20..=20 {
        for j in -20..=20 {
            if let Winding::Value(w) = plaquette_winding(&eq.strain, DualSite::new(i, j)) {
                total += w.abs();
            }
        }
    }
    assert!((total - 2.0).abs() < 1e-6);
}

#[test]
fn predictor_alone_opens_like_a_square_root() {
    let y = predictor_field(1.0, Window::new(70.0));
    for (k, o) in crack_opening_profile(&y, 60).unwrap() {
        if k >= 10 {
            let expected = 2.0 * (k as f64 + 0.5).sqrt();
            assert!((o - expected).abs() < 0.02 * expected);
        }
    }
}

#[test]
fn margins_stay_away_from_half_integers_for_dislocations() {
    let cfg = DislocationConfig::single(DualSite::new(3, 2), 1).unwrap();
    let eq = dislocation_equilibrium(&cfg, 64, 1e-12).unwrap();
    let worst = eq
        .strain
        .iter()
        .map(|(_, a)| half_integer_distance(a))
        .fold(f64::INFINITY, f64::min);
    assert!(worst > 0.2);
    assert!(eq
        .strain
        .get(Bond::new(PrimalSite::new(-3, 0), Direction::MinusE2))
        .is_none());
}
