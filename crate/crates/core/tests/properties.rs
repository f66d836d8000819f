use hallmhd::experiment::{ExperimentConfig, InitialData, JobKind, PresetSpec};
use hallmhd::hall::{extended_rhs, ExtendedState, PhysicalParams};
use hallmhd::lp::{besov_morrey_norm, LpPartition, NormSpec};
use hallmhd::ops::heat_propagate;
use hallmhd::random::{random_solenoidal, Ensemble};
use hallmhd::{GridSpec, VectorField};
use proptest::prelude::*;

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn grid() -> GridSpec {
    GridSpec::cube(8).unwrap()
}

fn field(seed: u64) -> VectorField {
    random_solenoidal(&grid(), &Ensemble::default(), seed)
}

fn state(seed: u64) -> ExtendedState {
    ExtendedState::consistent(&field(2 * seed), &field(2 * seed + 1)).unwrap()
}

fn close(a: &ExtendedState, b: &ExtendedState, tol: f64) -> bool {
    a.sub(b).max_abs_coeff() <= tol * (1.0 + a.max_abs_coeff().max(b.max_abs_coeff()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonlinearity_is_bilinear(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000, a in -3.0f64..3.0, h in 0.1f64..2.0) {
        let params = PhysicalParams { mu: 1.0, nu: 1.0, h };
        let (x, y, z) = (state(s1), state(s2), state(s3));
        let lhs = extended_rhs(&x.axpy(a, &y), &z, &params);
        let rhs = extended_rhs(&x, &z, &params).axpy(a, &extended_rhs(&y, &z, &params));
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let lhs = extended_rhs(&z, &x.axpy(a, &y), &params);
        let rhs = extended_rhs(&z, &x, &params).axpy(a, &extended_rhs(&z, &y, &params));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn norm_is_homogeneous_and_subadditive(s1 in 0u64..1000, s2 in 0u64..1000, a in -5.0f64..5.0, p in 2.5f64..6.0) {
        let spec = NormSpec::critical(p, 2.0);
        let part = LpPartition::build(&grid()).unwrap();
        let n = |f: &VectorField| besov_morrey_norm(f, &spec, &part).unwrap();
        let (u, v) = (field(s1), field(s2));
        prop_assert!((n(&u.scaled(a)) - a.abs() * n(&u)).abs() <= 1e-12 * (1.0 + n(&u)));
        prop_assert!(n(&u.add(&v)) <= (n(&u) + n(&v)) * (1.0 + 1e-12));
    }

    #[test]
    fn heat_semigroup_contracts_in_l2(s in 0u64..1000, t in 0.0f64..2.0, kappa in 0.1f64..3.0) {
        let u = field(s);
        prop_assert!(heat_propagate(&u, t, kappa).unwrap().l2_norm() <= u.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn config_round_trip_is_identity(seed in any::<u64>(), amp in 0.0f64..10.0, n in 1usize..64, kind in 0usize..3) {
        let kind = [JobKind::SolveGlobal, JobKind::SolveLocal, JobKind::NormReport][kind];
        let mut cfg: ExperimentConfig = ExperimentConfig::from_json(
            r#"{"kind": "norm_report", "grid": {"n_per_axis": 8, "box_length": 1.0},
                "initial_data": {"preset": "random", "amplitude": 1.0}}"#,
        ).unwrap();
        cfg.kind = kind;
        cfg.seed = seed;
        cfg.snapshot_stride = n;
        cfg.solver.n_steps = n + 1;
        cfg.initial_data = InitialData::Preset(PresetSpec { preset: "orszag_tang".into(), seed, amplitude: amp, ensemble: None });
        let again = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.to_json().unwrap(), again.to_json().unwrap());
    }
}
