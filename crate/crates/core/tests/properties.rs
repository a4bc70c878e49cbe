mod common;

use std::sync::Arc;

use proptest::prelude::*;
use splf::constitutive::{DriftEngine, FluidParams};
use splf::exponents::{admissible_existence, admissible_existence_unified, p1, p2, p3};
use splf::integrator::{InitialCondition, SimConfig, Simulator};
use splf::noise::{self, CovarianceSpectrum};
use splf::spectral::snapshot::{read_snapshot, to_bytes};
use splf::spectral::{from_grid, make_basis, project_div_free, sobolev_norm, to_grid};

fn coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip_preserves_fields(d in 2usize..=3, n in 1usize..=2, seed in any::<u64>()) {
        let basis = make_basis(n, d).unwrap();
        let mut r = common::rng(seed);
        let field = common::unit_field(&basis, &mut r);
        let back = project_div_free(&from_grid(&to_grid(&field, 2 * n + 1).unwrap(), n).unwrap()).unwrap();
        let c0 = basis.coordinates(&field).unwrap();
        let c1 = basis.coordinates(&back).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(x in coords(make_basis(2, 2).unwrap().len())) {
        let basis = make_basis(2, 2).unwrap();
        let field = basis.to_field(&x).unwrap();
        let back = read_snapshot(&to_bytes(&field)[..]).unwrap();
        prop_assert_eq!(back.coeffs(), field.coeffs());
    }

    #[test]
    fn energy_pairing_identity(p in 1.3f64..4.0, nu in 0.1f64..2.0, x in coords(make_basis(3, 2).unwrap().len())) {
        let basis = Arc::new(make_basis(3, 2).unwrap());
        let engine = DriftEngine::new(basis.clone(), FluidParams::new(p, nu).unwrap()).unwrap();
        let mut ws = engine.workspace();
        let mut b = vec![0.0; x.len()];
        let diss = engine.evaluate(&mut ws, &x, &mut b);
        let xb: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
        prop_assert!(diss >= 0.0);
        prop_assert!((xb + diss).abs() < 1e-10 * (1.0 + diss));
    }

    #[test]
    fn sobolev_norm_monotone_in_alpha(x in coords(make_basis(2, 2).unwrap().len()), a in 0.0f64..2.0, da in 0.0f64..1.0, p in 1.0f64..4.0) {
        let basis = make_basis(2, 2).unwrap();
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let field = basis.to_field(&x).unwrap();
        let lo = sobolev_norm(&field, p, a).unwrap();
        let hi = sobolev_norm(&field, p, a + da).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn admissibility_forms_agree(p in 1.0f64..6.0, d in 2usize..40) {
        prop_assert_eq!(admissible_existence(p, d), admissible_existence_unified(p, d));
    }

    #[test]
    fn critical_exponents_ordering(d in 2usize..200) {
        let a = p1(d).unwrap();
        let c = p3(d).unwrap();
        let b = p2(d).unwrap();
        if d <= 8 {
            prop_assert!(b.is_none_or(|b| num_traits::ToPrimitive::to_f64(&b).unwrap() > c));
            prop_assert!(num_traits::ToPrimitive::to_f64(&a).unwrap() < c);
        }
        if d >= 10 {
            prop_assert!(b.unwrap() < a);
        }
    }

    #[test]
    fn trace_monotone_in_truncation(c in 0.0f64..2.0, s in 2.01f64..5.0, n in 1usize..4) {
        let spec = noise::validate(&CovarianceSpectrum::Power { c, s }, 2).unwrap();
        prop_assert!(spec.trace_pn(n) <= spec.trace_pn(n + 1));
    }

    #[test]
    fn running_integrals_nondecreasing(seed in 0u64..1000, p in 1.6f64..3.5) {
        let mut c = SimConfig::new(2, p, 1.0, 2, 2e-3, 0.04, 1, seed);
        c.gamma = CovarianceSpectrum::Power { c: 0.2, s: 3.0 };
        c.init = InitialCondition::Gaussian { sigma: 1.0, r: 2.5 };
        let rec = Simulator::new(&c).unwrap().simulate(0);
        prop_assert!(rec.completed());
        for w in rec.rows.windows(2) {
            prop_assert!(w[1].int_diss >= w[0].int_diss);
            prop_assert!(w[1].int_gamma >= w[0].int_gamma);
        }
    }
}
