use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, SQRT_2};

use serde::Serialize;
use wsq_core::harness::{self, PropertyReport};
use wsq_core::io::{self, verdicts, CertificateFile, CertificateKind};
use wsq_core::petz::{self, PetzCertificate, PetzInstance, PetzOptions};
use wsq_core::sufficiency::{self, Existence};
use wsq_core::{SpectralFunction, Tolerances, VersionAssignment, WitnessFactorization};

const QUBIT: &str = include_str!("../examples/qubit_weak_not_petz.json");
const CYCLE: &str = include_str!("../examples/phase_cycle.json");

#[derive(Debug, Serialize)]
pub struct ExampleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelftestPayload {
    pub examples: Vec<ExampleOutcome>,
    pub suite: PropertyReport,
}

fn outcome(name: &'static str, r: wsq_core::Result<(bool, String)>) -> ExampleOutcome {
    match r {
        Ok((passed, detail)) => ExampleOutcome {
            name,
            passed,
            detail,
        },
        Err(e) => ExampleOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn examples() -> Vec<ExampleOutcome> {
    let tol = Tolerances::default();
    let mut out = Vec::new();
    let qubit = match io::parse_instance(QUBIT) {
        Ok(q) => q,
        Err(e) => {
            out.push(outcome("qubit_parse", Err(e)));
            return out;
        }
    };
    let Some(t) = qubit.statistic.clone() else {
        out.push(ExampleOutcome {
            name: "qubit_parse",
            passed: false,
            detail: "bundled instance has no statistic".into(),
        });
        return out;
    };
    let f = &qubit.family;

    out.push(outcome(
        "qubit_weakly_sufficient",
        (|| {
            let v = sufficiency::check_weak_sufficiency(&t, f, &tol)?;
            let Some(w) = &v.witness else {
                return Ok((false, "no witness".into()));
            };
            let r = sufficiency::verify_witness(&t, f, w, tol.witness)?.max_residual;
            Ok((r <= 1e-12, format!("witness residual {r:.3e}")))
        })(),
    ));

    out.push(outcome(
        "qubit_explicit_witness",
        (|| {
            let chi = f
                .get("phi2")
                .cloned()
                .ok_or(wsq_core::Error::UnknownLabel("phi2".into()))?;
            let w = WitnessFactorization {
                chi,
                functions: BTreeMap::from([
                    (
                        "phi1".to_string(),
                        SpectralFunction::new(vec![(1.0, SQRT_2), (-1.0, 0.0)]),
                    ),
                    (
                        "phi2".to_string(),
                        SpectralFunction::new(vec![(1.0, 1.0), (-1.0, 1.0)]),
                    ),
                ]),
                versions: VersionAssignment::identity(f.labels()),
            };
            let r = sufficiency::verify_witness(&t, f, &w, tol.witness)?.max_residual;
            Ok((r <= 1e-12, format!("residual {r:.3e}")))
        })(),
    ));

    out.push(outcome(
        "qubit_not_petz",
        (|| {
            let inst = PetzInstance::new(t.clone(), f.clone(), true)?;
            Ok(
                match petz::petz_feasibility(&inst, &PetzOptions::default())? {
                    PetzCertificate::InfeasibleOrthogonality { pair, overlap } => {
                        let gap = (overlap.norm() - FRAC_1_SQRT_2).abs();
                        (
                            gap <= 1e-12,
                            format!("{pair:?} overlap {:.17}", overlap.norm()),
                        )
                    }
                    other => (false, format!("unexpected {other:?}")),
                },
            )
        })(),
    ));

    out.push(outcome(
        "qubit_construct",
        (|| {
            Ok(match sufficiency::exists_weakly_sufficient(f, &tol)? {
                Existence::Constructed { statistic, .. } => {
                    let ok = sufficiency::check_weak_sufficiency(&statistic, f, &tol)?.sufficient();
                    (ok, format!("{} atoms", statistic.atom_count()))
                }
                Existence::NonExistence { defect, .. } => (false, format!("defect {defect}")),
            })
        })(),
    ));

    out.push(outcome(
        "phase_cycle_obstructed",
        (|| {
            let cycle = io::parse_instance(CYCLE)?;
            Ok(
                match sufficiency::exists_weakly_sufficient(&cycle.family, &tol)? {
                    Existence::NonExistence { defect, .. } => (
                        (defect.abs() - FRAC_PI_4).abs() <= 1e-9,
                        format!("defect {defect:.12}"),
                    ),
                    Existence::Constructed { .. } => (false, "constructed a statistic".into()),
                },
            )
        })(),
    ));
    out
}

pub fn run(seed: u64, count: usize) -> CertificateFile {
    let examples = examples();
    let suite = harness::run_property_suite(seed, count, None);
    for e in &examples {
        eprintln!(
            "{:<34} {} {}",
            e.name,
            if e.passed { "ok" } else { "FAIL" },
            e.detail
        );
    }
    for p in &suite.properties {
        eprintln!(
            "{:<34} {} ({} passed, {} skipped, {} failed)",
            p.name,
            if p.failed == 0 { "ok" } else { "FAIL" },
            p.passed,
            p.skipped,
            p.failed
        );
    }
    let passed = examples.iter().all(|e| e.passed) && suite.passed();
    let verdict = if passed {
        verdicts::PASS
    } else {
        verdicts::FAIL
    };
    CertificateFile::new(
        CertificateKind::Selftest,
        verdict,
        Tolerances::default(),
        SelftestPayload { examples, suite },
    )
}
