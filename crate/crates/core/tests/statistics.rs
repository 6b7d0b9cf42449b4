use proptest::prelude::*;

use wsq_core::harness::{self, Flavor, GeneratorSpec, Mutation};
use wsq_core::io;
use wsq_core::minimality::{self, BetaMode, MinimalResult};
use wsq_core::petz::{self, PetzCertificate, PetzInstance, PetzOptions};
use wsq_core::spectral;
use wsq_core::sufficiency::{self, Tolerances};
use wsq_core::{DiscreteStatistic, StateFamily};

fn try_gen(
    flavor: Flavor,
    dim: usize,
    states: usize,
    seed: u64,
) -> Option<(DiscreteStatistic, StateFamily)> {
    harness::generate(&GeneratorSpec {
        dim,
        states,
        flavor,
        seed,
    })
    .ok()
}

fn planted() -> impl Strategy<Value = (DiscreteStatistic, StateFamily)> {
    (1usize..=3, 0usize..=1, 3usize..=6, 2usize..=4, any::<u64>())
        .prop_filter_map(
            "infeasible generator parameters",
            |(classes, dead_atoms, d, n, seed)| {
                try_gen(
                    Flavor::ClassPlanted {
                        classes,
                        dead_atoms,
                    },
                    d,
                    n,
                    seed,
                )
            },
        )
        .prop_filter("too many atoms to enumerate", |(t, _)| t.atom_count() <= 7)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn class_criterion_matches_direct_check((t, f) in planted()) {
        let tol = Tolerances::default();
        prop_assert!(sufficiency::check_weak_sufficiency(&t, &f, &tol).unwrap().sufficient());
        for phi in minimality::enumerate_coarse_grainings(&t, 7).unwrap() {
            let (u, _) = spectral::apply_coarse(&t, &phi).unwrap();
            let direct = sufficiency::check_weak_sufficiency(&u, &f, &tol).unwrap().sufficient();
            let by_class = minimality::check_coarse_sufficient(&t, &f, &phi, &tol, BetaMode::Complex).unwrap();
            prop_assert_eq!(direct, by_class, "coarse map {:?}", phi.values());
        }
    }

    #[test]
    fn minimal_statistic_is_below_every_sufficient_coarse_graining((t, f) in planted()) {
        let tol = Tolerances::default();
        let result = minimality::minimal_statistic(&t, &f, &tol, BetaMode::Complex);
        let Ok(result) = result else {
            prop_assume!(false);
            unreachable!()
        };
        match result {
            MinimalResult::Minimal { statistic, .. } => {
                prop_assert!(sufficiency::check_weak_sufficiency(&statistic, &f, &tol).unwrap().sufficient());
                prop_assert!(minimality::is_function_of(&statistic, &t, 1e-8).is_some());
                for phi in minimality::enumerate_coarse_grainings(&t, 7).unwrap() {
                    let (u, _) = spectral::apply_coarse(&t, &phi).unwrap();
                    if sufficiency::check_weak_sufficiency(&u, &f, &tol).unwrap().sufficient() {
                        prop_assert!(minimality::is_function_of(&statistic, &u, 1e-8).is_some());
                    }
                }
            }
            MinimalResult::NoMinimalExists { dead_atom, .. } => {
                let table = spectral::project_states(&t, &f).unwrap();
                prop_assert!(table.dead_atoms(tol.zero).contains(&dead_atom));
                let variants = minimality::dead_atom_variants(&t, dead_atom).unwrap();
                prop_assert!(!variants.is_empty());
                for tn in &variants {
                    prop_assert!(sufficiency::check_weak_sufficiency(tn, &f, &tol).unwrap().sufficient());
                }
                // no sufficient statistic lies below every variant and T at once
                for phi in minimality::enumerate_coarse_grainings(&t, 7).unwrap() {
                    let (s, _) = spectral::apply_coarse(&t, &phi).unwrap();
                    let below_all = variants.iter().all(|tn| minimality::is_function_of(&s, tn, 1e-8).is_some());
                    if below_all {
                        prop_assert!(!sufficiency::check_weak_sufficiency(&s, &f, &tol).unwrap().sufficient());
                    }
                }
            }
        }
    }

    #[test]
    fn equivalence_classes_are_transitive((t, f) in planted()) {
        let tol = Tolerances::default();
        let verdict = sufficiency::check_weak_sufficiency(&t, &f, &tol).unwrap();
        let table = verdict.gamma.unwrap();
        let classes = minimality::equivalence_classes(&table, tol.rank, BetaMode::Complex);
        prop_assert!(classes.transitivity_residual <= 1e-8);
        let mut seen: Vec<usize> = classes.classes.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, table.active_atoms());
    }

    #[test]
    fn planted_petz_instances_are_feasible(d in 2usize..=5, n in 1usize..=3, seed in any::<u64>()) {
        let generated = try_gen(Flavor::AtomPlanted, d, n, seed);
        prop_assume!(generated.is_some());
        let (t, f) = generated.unwrap();
        let inst = PetzInstance::new(t, f, true).unwrap();
        let opts = PetzOptions::default();
        let cert = petz::petz_feasibility(&inst, &opts).unwrap();
        let rhos = cert.rhos().expect("feasible");
        prop_assert!(inst.constraint_residual(rhos) <= opts.tol);
        for rho in rhos {
            prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
        }
        prop_assert!(petz::structural_check(&inst, rhos, opts.structural_tol).is_ok());
        prop_assert!(petz::petz_implies_weak_check(&inst).unwrap());
    }

    #[test]
    fn overlapping_states_are_never_petz_sufficient(d in 2usize..=5, n in 2usize..=3, seed in any::<u64>()) {
        let generated = try_gen(Flavor::ComplexVectors, d, n, seed);
        prop_assume!(generated.is_some());
        let (t, f) = generated.unwrap();
        let inst = PetzInstance::new(t, f, true).unwrap();
        let cert = petz::petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let is_orthogonality = matches!(cert, PetzCertificate::InfeasibleOrthogonality { .. });
        prop_assert!(is_orthogonality);
    }

    #[test]
    fn instances_round_trip_through_json(
        fl in prop_oneof![Just(Flavor::RealVectors), Just(Flavor::ComplexVectors), Just(Flavor::AtomPlanted)],
        d in 1usize..=6,
        n in 1usize..=4,
        seed in any::<u64>(),
    ) {
        let generated = try_gen(fl, d, n, seed);
        prop_assume!(generated.is_some());
        let (t, f) = generated.unwrap();
        let text = io::serialize_instance(Some(&t), &f);
        let back = io::parse_instance(&text).unwrap();
        let again = io::parse_instance(&io::serialize_instance(back.statistic.as_ref(), &back.family)).unwrap();
        for (a, b) in [(&f, &back.family), (&back.family, &again.family)] {
            prop_assert_eq!(a.labels(), b.labels());
            for (u, v) in a.vectors().iter().zip(b.vectors()) {
                prop_assert!((u - v).max_abs() <= 1e-15);
            }
        }
        for (a, b) in [(&t, back.statistic.as_ref().unwrap()), (back.statistic.as_ref().unwrap(), again.statistic.as_ref().unwrap())] {
            prop_assert_eq!(a.eigenvalues(), b.eigenvalues());
            for (p, q) in a.projections().iter().zip(b.projections()) {
                prop_assert!(p.matrix().max_abs_diff(q.matrix()) <= 1e-15);
            }
        }
    }
}

#[test]
fn petz_solver_is_deterministic() {
    let (t, f) = try_gen(Flavor::AtomPlanted, 4, 3, 11).unwrap();
    let inst = PetzInstance::new(t, f, true).unwrap();
    let opts = PetzOptions::default();
    let a = io::petz_certificate_file(
        &inst,
        &petz::petz_feasibility(&inst, &opts).unwrap(),
        &opts,
        &Tolerances::default(),
    )
    .to_json();
    let b = io::petz_certificate_file(
        &inst,
        &petz::petz_feasibility(&inst, &opts).unwrap(),
        &opts,
        &Tolerances::default(),
    )
    .to_json();
    assert_eq!(a, b);
}

#[test]
fn default_suite_passes() {
    let report = harness::run_property_suite(0x5eed, 100, None);
    for p in &report.properties {
        assert_eq!(p.failed, 0, "{}: {:?}", p.name, p.counterexample);
        assert!(p.passed > 0, "{} never exercised", p.name);
    }
}

#[test]
fn every_mutation_is_caught() {
    for m in Mutation::ALL {
        let report = harness::run_property_suite(0x5eed, 100, Some(m));
        let failing = report.failing();
        assert!(!failing.is_empty(), "{m:?} survived");
        for p in failing {
            let cx = p.counterexample.as_ref().expect("counterexample recorded");
            let text = serde_json::to_string(&cx.instance).unwrap();
            assert!(
                io::parse_instance(&text).is_ok(),
                "{m:?}: counterexample does not parse"
            );
        }
    }
}
