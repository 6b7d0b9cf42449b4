//! JSON instance files and certificates.
//!
//! Complex numbers are always two-element `[re, im]` arrays. An instance is
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "states": { "phi1": [[1, 0], [0, 0]] },
//!   "statistic": { "matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]] }
//! }
//! ```
//!
//! where `statistic` may instead be `{"eigenvalues": [...], "projections":
//! [...]}` or be omitted.

use std::collections::BTreeMap;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, Complex, HermitianMatrix};
use crate::minimality::{self, BetaMode, MinimalResult};
use crate::petz::{self, PetzCertificate, PetzInstance, PetzOptions};
use crate::phases::{self, PhaseConstraint, VersionAssignment};
use crate::spectral::{self, DiscreteStatistic, SpectralFunction, StateFamily};
use crate::sufficiency::{
    self, Existence, SufficiencyVerdict, Tolerances, Violation, WitnessFactorization,
};
use crate::TOOL_VERSION;

pub type Pair = [f64; 2];
pub type MatrixJson = Vec<Vec<Pair>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dimension: usize,
    pub states: BTreeMap<String, Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatisticFile {
    Matrix(MatrixForm),
    Spectral(SpectralForm),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixForm {
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralForm {
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<MatrixJson>,
}

/// A validated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub statistic: Option<DiscreteStatistic>,
    pub family: StateFamily,
}

pub fn pair(z: Complex) -> Pair {
    [z.re, z.im]
}

pub fn unpair(p: Pair) -> Complex {
    c(p[0], p[1])
}

pub fn vector_json(v: &CVector) -> Vec<Pair> {
    v.entries().iter().copied().map(pair).collect()
}

pub fn vector_from_json(v: &[Pair]) -> Result<CVector> {
    CVector::new(v.iter().copied().map(unpair).collect())
}

pub fn matrix_json(m: &CMatrix) -> MatrixJson {
    (0..m.rows())
        .map(|i| m.row(i).iter().copied().map(pair).collect())
        .collect()
}

pub fn matrix_from_json(m: &MatrixJson) -> Result<CMatrix> {
    CMatrix::from_rows(
        m.iter()
            .map(|r| r.iter().copied().map(unpair).collect())
            .collect(),
    )
}

fn from_str_at<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema(format!("at '{path}': {}", e.into_inner()))
    })
}

fn from_value_at<T: DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema(format!("at '{path}': {}", e.into_inner()))
    })
}

fn check_square(m: &MatrixJson, d: usize, at: &str) -> Result<()> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::Schema(format!(
            "at '{at}': expected a {d}x{d} matrix"
        )));
    }
    Ok(())
}

pub fn statistic_from_json(s: &StatisticFile, d: usize) -> Result<DiscreteStatistic> {
    match s {
        StatisticFile::Matrix(MatrixForm { matrix }) => {
            check_square(matrix, d, "statistic.matrix")?;
            let h = HermitianMatrix::new(matrix_from_json(matrix)?)?;
            DiscreteStatistic::from_matrix(&h, None)
        }
        StatisticFile::Spectral(SpectralForm {
            eigenvalues,
            projections,
        }) => {
            let ps = projections
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    check_square(p, d, &format!("statistic.projections[{k}]"))?;
                    HermitianMatrix::new(matrix_from_json(p)?)
                })
                .collect::<Result<Vec<_>>>()?;
            DiscreteStatistic::new(eigenvalues.clone(), ps)
        }
    }
}

pub fn statistic_json(t: &DiscreteStatistic) -> SpectralForm {
    SpectralForm {
        eigenvalues: t.eigenvalues().to_vec(),
        projections: t
            .projections()
            .iter()
            .map(|p| matrix_json(p.matrix()))
            .collect(),
    }
}

pub fn family_from_json(states: &BTreeMap<String, Vec<Pair>>, d: usize) -> Result<StateFamily> {
    let mut out = Vec::with_capacity(states.len());
    for (label, v) in states {
        if v.len() != d {
            return Err(Error::Schema(format!(
                "at 'states.{label}': expected {d} entries, found {}",
                v.len()
            )));
        }
        out.push((label.clone(), vector_from_json(v)?));
    }
    StateFamily::new(out)
}

pub fn family_json(f: &StateFamily) -> BTreeMap<String, Vec<Pair>> {
    f.iter()
        .map(|(l, v)| (l.to_string(), vector_json(v)))
        .collect()
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = from_str_at(text)?;
    if file.dimension == 0 {
        return Err(Error::Schema("at 'dimension': must be positive".into()));
    }
    let family = family_from_json(&file.states, file.dimension)?;
    let statistic = file
        .statistic
        .as_ref()
        .map(|s| statistic_from_json(s, file.dimension))
        .transpose()?;
    Ok(Instance { statistic, family })
}

pub fn instance_file(statistic: Option<&DiscreteStatistic>, family: &StateFamily) -> InstanceFile {
    InstanceFile {
        dimension: family.dim(),
        states: family_json(family),
        statistic: statistic.map(|t| StatisticFile::Spectral(statistic_json(t))),
    }
}

/// Serializes an instance with the statistic in spectral form.
pub fn serialize_instance(statistic: Option<&DiscreteStatistic>, family: &StateFamily) -> String {
    serde_json::to_string_pretty(&instance_file(statistic, family))
        .expect("instance serialization is infallible")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    WeakSufficiency,
    Existence,
    Minimality,
    Petz,
    Oracle,
    Selftest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub kind: CertificateKind,
    pub verdict: String,
    pub tool_version: String,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petz_options: Option<PetzOptions>,
    pub payload: serde_json::Value,
}

impl CertificateFile {
    pub fn new(
        kind: CertificateKind,
        verdict: &str,
        tolerances: Tolerances,
        payload: impl Serialize,
    ) -> Self {
        Self {
            kind,
            verdict: verdict.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            tolerances,
            petz_options: None,
            payload: serde_json::to_value(payload).expect("payload serialization is infallible"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization is infallible")
    }
}

pub fn parse_certificate(text: &str) -> Result<CertificateFile> {
    from_str_at(text)
}

pub mod verdicts {
    pub const SUFFICIENT: &str = "sufficient";
    pub const NOT_SUFFICIENT: &str = "not_sufficient";
    pub const CONSTRUCTED: &str = "constructed";
    pub const NONEXISTENCE: &str = "nonexistence";
    pub const MINIMAL: &str = "minimal";
    pub const NO_MINIMAL_EXISTS: &str = "no_minimal_exists";
    pub const FEASIBLE: &str = "feasible";
    pub const INFEASIBLE_ORTHOGONALITY: &str = "infeasible_orthogonality";
    pub const NUMERICALLY_INFEASIBLE: &str = "numerically_infeasible";
    pub const AGREE: &str = "agree";
    pub const DISAGREE: &str = "disagree";
    pub const PASS: &str = "pass";
    pub const FAIL: &str = "fail";

    /// Whether a verdict string is an affirmative answer.
    pub fn affirmative(v: &str) -> bool {
        matches!(
            v,
            SUFFICIENT | CONSTRUCTED | MINIMAL | FEASIBLE | AGREE | PASS
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessJson {
    pub chi: Vec<Pair>,
    pub versions: BTreeMap<String, Pair>,
    /// Per label, `(eigenvalue, value)` points.
    pub functions: BTreeMap<String, Vec<[f64; 2]>>,
}

impl WitnessJson {
    pub fn from_witness(w: &WitnessFactorization) -> Self {
        Self {
            chi: vector_json(&w.chi),
            versions: w
                .versions
                .iter()
                .map(|(l, z)| (l.to_string(), pair(z)))
                .collect(),
            functions: w
                .functions
                .iter()
                .map(|(l, f)| (l.clone(), f.points().iter().map(|&(a, b)| [a, b]).collect()))
                .collect(),
        }
    }

    pub fn to_witness(&self) -> Result<WitnessFactorization> {
        Ok(WitnessFactorization {
            chi: vector_from_json(&self.chi)?,
            versions: VersionAssignment::new(
                self.versions
                    .iter()
                    .map(|(l, p)| (l.clone(), unpair(*p)))
                    .collect(),
            )?,
            functions: self
                .functions
                .iter()
                .map(|(l, pts)| {
                    (
                        l.clone(),
                        SpectralFunction::new(pts.iter().map(|p| (p[0], p[1])).collect()),
                    )
                })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintJson {
    pub left: String,
    pub right: String,
    pub value: Pair,
}

fn cycle_json(cycle: &[PhaseConstraint]) -> Vec<ConstraintJson> {
    cycle
        .iter()
        .map(|k| ConstraintJson {
            left: k.left.clone(),
            right: k.right.clone(),
            value: pair(k.value),
        })
        .collect()
}

fn cycle_from_json(cycle: &[ConstraintJson]) -> Vec<PhaseConstraint> {
    cycle
        .iter()
        .map(|k| PhaseConstraint::new(k.left.clone(), k.right.clone(), unpair(k.value)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViolationJson {
    Rank {
        atom: usize,
        eigenvalue: f64,
        dim: usize,
    },
    PhaseObstruction {
        cycle: Vec<ConstraintJson>,
        defect: f64,
    },
}

impl ViolationJson {
    pub fn from_violation(v: &Violation) -> Self {
        match v {
            Violation::Rank {
                atom,
                eigenvalue,
                dim,
            } => ViolationJson::Rank {
                atom: *atom,
                eigenvalue: *eigenvalue,
                dim: *dim,
            },
            Violation::PhaseObstruction { cycle, defect } => ViolationJson::PhaseObstruction {
                cycle: cycle_json(cycle),
                defect: *defect,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakPayload {
    pub statistic: SpectralForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
    #[serde(default)]
    pub violations: Vec<ViolationJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExistencePayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<SpectralForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<ConstraintJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalityPayload {
    pub statistic: SpectralForm,
    /// Witness for the input statistic.
    pub witness: WitnessJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimal: Option<SpectralForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimal_witness: Option<WitnessJson>,
    #[serde(default)]
    pub classes: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_atom: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalue: Option<f64>,
    pub strict_real: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PetzPayload {
    pub statistic: SpectralForm,
    pub unital: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhos: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_constraint_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn weak_certificate(
    t: &DiscreteStatistic,
    verdict: &SufficiencyVerdict,
    tol: &Tolerances,
) -> CertificateFile {
    let payload = WeakPayload {
        statistic: statistic_json(t),
        witness: verdict.witness.as_ref().map(WitnessJson::from_witness),
        violations: verdict
            .violations
            .iter()
            .map(ViolationJson::from_violation)
            .collect(),
    };
    let v = if verdict.sufficient() {
        verdicts::SUFFICIENT
    } else {
        verdicts::NOT_SUFFICIENT
    };
    CertificateFile::new(CertificateKind::WeakSufficiency, v, *tol, payload)
}

pub fn existence_certificate(e: &Existence, tol: &Tolerances) -> CertificateFile {
    match e {
        Existence::Constructed { statistic, witness } => CertificateFile::new(
            CertificateKind::Existence,
            verdicts::CONSTRUCTED,
            *tol,
            ExistencePayload {
                statistic: Some(statistic_json(statistic)),
                witness: Some(WitnessJson::from_witness(witness)),
                cycle: None,
                defect: None,
            },
        ),
        Existence::NonExistence { cycle, defect } => CertificateFile::new(
            CertificateKind::Existence,
            verdicts::NONEXISTENCE,
            *tol,
            ExistencePayload {
                statistic: None,
                witness: None,
                cycle: Some(cycle_json(cycle)),
                defect: Some(*defect),
            },
        ),
    }
}

/// Certificate for a minimality run; needs the witness for `t` that the run
/// established.
pub fn minimality_certificate(
    t: &DiscreteStatistic,
    f: &StateFamily,
    result: &MinimalResult,
    tol: &Tolerances,
    mode: BetaMode,
) -> Result<CertificateFile> {
    let witness_for = |s: &DiscreteStatistic| -> Result<WitnessJson> {
        sufficiency::check_weak_sufficiency(s, f, tol)?
            .witness
            .as_ref()
            .map(WitnessJson::from_witness)
            .ok_or(Error::NotWeaklySufficient)
    };
    let base = MinimalityPayload {
        statistic: statistic_json(t),
        witness: witness_for(t)?,
        minimal: None,
        minimal_witness: None,
        classes: Vec::new(),
        dead_atom: None,
        eigenvalue: None,
        strict_real: mode == BetaMode::StrictReal,
    };
    Ok(match result {
        MinimalResult::Minimal { statistic, classes } => CertificateFile::new(
            CertificateKind::Minimality,
            verdicts::MINIMAL,
            *tol,
            MinimalityPayload {
                minimal: Some(statistic_json(statistic)),
                minimal_witness: Some(witness_for(statistic)?),
                classes: classes.classes.clone(),
                ..base
            },
        ),
        MinimalResult::NoMinimalExists {
            dead_atom,
            eigenvalue,
        } => CertificateFile::new(
            CertificateKind::Minimality,
            verdicts::NO_MINIMAL_EXISTS,
            *tol,
            MinimalityPayload {
                dead_atom: Some(*dead_atom),
                eigenvalue: Some(*eigenvalue),
                ..base
            },
        ),
    })
}

pub fn petz_certificate_file(
    inst: &PetzInstance,
    cert: &PetzCertificate,
    opts: &PetzOptions,
    tol: &Tolerances,
) -> CertificateFile {
    let mut payload = PetzPayload {
        statistic: statistic_json(&inst.statistic),
        unital: inst.unital,
        rhos: None,
        max_constraint_residual: None,
        iterations: None,
        pair: None,
        overlap: None,
        residual_floor: None,
        note: None,
    };
    let verdict = match cert {
        PetzCertificate::Feasible {
            rhos,
            max_constraint_residual,
            iterations,
        } => {
            payload.rhos = Some(rhos.iter().map(|r| matrix_json(r.matrix())).collect());
            payload.max_constraint_residual = Some(*max_constraint_residual);
            payload.iterations = Some(*iterations);
            verdicts::FEASIBLE
        }
        PetzCertificate::InfeasibleOrthogonality { pair: p, overlap } => {
            payload.pair = Some(p.clone());
            payload.overlap = Some(pair(*overlap));
            verdicts::INFEASIBLE_ORTHOGONALITY
        }
        PetzCertificate::NumericallyInfeasible {
            residual_floor,
            iterations,
        } => {
            payload.residual_floor = Some(*residual_floor);
            payload.iterations = Some(*iterations);
            payload.note = Some(
                "alternating projections stalled above tolerance; this is numerical evidence, not a proof"
                    .into(),
            );
            verdicts::NUMERICALLY_INFEASIBLE
        }
    };
    let mut file = CertificateFile::new(CertificateKind::Petz, verdict, *tol, payload);
    file.petz_options = Some(*opts);
    file
}

/// Outcome of re-checking a certificate against its instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub valid: bool,
    pub detail: String,
}

impl Verification {
    fn ok(detail: impl Into<String>) -> Self {
        Self {
            valid: true,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self {
            valid: false,
            detail: detail.into(),
        }
    }
}

fn same_statistic(a: &DiscreteStatistic, b: &DiscreteStatistic) -> bool {
    a.atom_count() == b.atom_count()
        && a.eigenvalues()
            .iter()
            .zip(b.eigenvalues())
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
        && a.projections()
            .iter()
            .zip(b.projections())
            .all(|(p, q)| p.matrix().max_abs_diff(q.matrix()) <= 1e-9)
}

fn verify_witness_json(
    t: &DiscreteStatistic,
    f: &StateFamily,
    w: &WitnessJson,
    tol: f64,
) -> Result<Verification> {
    let check = sufficiency::verify_witness(t, f, &w.to_witness()?, tol)?;
    Ok(if check.valid {
        Verification::ok(format!("witness residual {:.3e}", check.max_residual))
    } else {
        Verification::fail(format!(
            "witness residual {:.3e} exceeds {tol:.1e}",
            check.max_residual
        ))
    })
}

/// The cycle must be infeasible on its own and every constraint value must be
/// reproduced by `source` (the overlap the constraint claims to come from).
fn verify_cycle(
    cycle: &[ConstraintJson],
    f: &StateFamily,
    tol: &Tolerances,
    source: impl Fn(&CVector, &CVector) -> Vec<Complex>,
) -> Result<Verification> {
    for k in cycle {
        let (Some(l), Some(r)) = (f.get(&k.left), f.get(&k.right)) else {
            return Ok(Verification::fail(format!(
                "unknown labels {} / {}",
                k.left, k.right
            )));
        };
        let target = unpair(k.value);
        if !source(l, r).iter().any(|z| (z - target).norm() <= 1e-9) {
            return Ok(Verification::fail(format!(
                "constraint {} / {} does not match the instance",
                k.left, k.right
            )));
        }
    }
    let cons = cycle_from_json(cycle);
    let labels: Vec<String> = f.labels().to_vec();
    Ok(match phases::align_phases(&cons, &labels, tol.angle)? {
        phases::Alignment::Infeasible { defect, .. } => Verification::ok(format!(
            "phase cycle of length {} with defect {defect:.3e}",
            cycle.len()
        )),
        phases::Alignment::Aligned(_) => Verification::fail("claimed cycle is consistent"),
    })
}

/// Re-checks a certificate using only the instance and the certificate.
pub fn verify_certificate(inst: &Instance, cert: &CertificateFile) -> Result<Verification> {
    let f = &inst.family;
    let tol = &cert.tolerances;
    let d = f.dim();
    let matches_instance = |t: &DiscreteStatistic| match &inst.statistic {
        Some(s) => same_statistic(s, t),
        None => true,
    };
    match cert.kind {
        CertificateKind::WeakSufficiency => {
            let p: WeakPayload = from_value_at(cert.payload.clone())?;
            let t = statistic_from_json(&StatisticFile::Spectral(p.statistic), d)?;
            if !matches_instance(&t) {
                return Ok(Verification::fail("statistic differs from the instance"));
            }
            if verdicts::affirmative(&cert.verdict) {
                let w = p
                    .witness
                    .ok_or_else(|| Error::Schema("at 'payload.witness': missing".into()))?;
                return verify_witness_json(&t, f, &w, tol.witness);
            }
            let table = spectral::project_states(&t, f)?;
            let Some(first) = p.violations.first() else {
                return Ok(Verification::fail("negative verdict without violations"));
            };
            match first {
                ViolationJson::Rank { atom, .. } => {
                    let comps = table.components.get(*atom).ok_or_else(|| {
                        Error::Schema(format!("at 'payload.violations': no atom {atom}"))
                    })?;
                    let r = linalg::numerical_rank(comps, tol.rank)?;
                    Ok(if r >= 2 {
                        Verification::ok(format!("atom {atom} carries {r} directions"))
                    } else {
                        Verification::fail(format!("atom {atom} has rank {r}"))
                    })
                }
                ViolationJson::PhaseObstruction { cycle, .. } => {
                    verify_cycle(cycle, f, tol, |l, r| {
                        t.projections()
                            .iter()
                            .map(|p| p.matrix().mul_vec(l).dot_unchecked(r))
                            .collect()
                    })
                }
            }
        }
        CertificateKind::Existence => {
            let p: ExistencePayload = from_value_at(cert.payload.clone())?;
            if verdicts::affirmative(&cert.verdict) {
                let (Some(s), Some(w)) = (p.statistic, p.witness) else {
                    return Err(Error::Schema(
                        "at 'payload': missing statistic or witness".into(),
                    ));
                };
                let t = statistic_from_json(&StatisticFile::Spectral(s), d)?;
                verify_witness_json(&t, f, &w, tol.witness)
            } else {
                let cycle = p
                    .cycle
                    .ok_or_else(|| Error::Schema("at 'payload.cycle': missing".into()))?;
                verify_cycle(&cycle, f, tol, |l, r| vec![l.dot_unchecked(r)])
            }
        }
        CertificateKind::Minimality => {
            let p: MinimalityPayload = from_value_at(cert.payload.clone())?;
            let t = statistic_from_json(&StatisticFile::Spectral(p.statistic.clone()), d)?;
            if !matches_instance(&t) {
                return Ok(Verification::fail("statistic differs from the instance"));
            }
            let base = verify_witness_json(&t, f, &p.witness, tol.witness)?;
            if !base.valid {
                return Ok(base);
            }
            if verdicts::affirmative(&cert.verdict) {
                let (Some(s), Some(w)) = (p.minimal, p.minimal_witness) else {
                    return Err(Error::Schema("at 'payload.minimal': missing".into()));
                };
                let s = statistic_from_json(&StatisticFile::Spectral(s), d)?;
                let sw = verify_witness_json(&s, f, &w, tol.witness)?;
                if !sw.valid {
                    return Ok(sw);
                }
                if minimality::is_function_of(&s, &t, 1e-9).is_none() {
                    return Ok(Verification::fail(
                        "minimal statistic is not a function of the input",
                    ));
                }
                let mode = if p.strict_real {
                    BetaMode::StrictReal
                } else {
                    BetaMode::Complex
                };
                Ok(match minimality::minimal_statistic(&t, f, tol, mode)? {
                    MinimalResult::Minimal { statistic, .. }
                        if spectral::atom_signature(&statistic) == spectral::atom_signature(&s) =>
                    {
                        Verification::ok("minimal statistic re-derived")
                    }
                    _ => Verification::fail("minimal statistic could not be re-derived"),
                })
            } else {
                let k = p
                    .dead_atom
                    .ok_or_else(|| Error::Schema("at 'payload.dead_atom': missing".into()))?;
                let table = spectral::project_states(&t, f)?;
                if k >= t.atom_count() {
                    return Ok(Verification::fail(format!("no atom {k}")));
                }
                let load = table.weights.iter().map(|row| row[k]).fold(0.0, f64::max);
                Ok(if load <= tol.zero * tol.zero {
                    Verification::ok(format!("atom {k} carries no state"))
                } else {
                    Verification::fail(format!("atom {k} is loaded ({load:.3e})"))
                })
            }
        }
        CertificateKind::Petz => {
            let p: PetzPayload = from_value_at(cert.payload.clone())?;
            let t = statistic_from_json(&StatisticFile::Spectral(p.statistic), d)?;
            if !matches_instance(&t) {
                return Ok(Verification::fail("statistic differs from the instance"));
            }
            let opts = cert.petz_options.unwrap_or_default();
            let pinst = PetzInstance::new(t, f.clone(), p.unital)?;
            match cert.verdict.as_str() {
                verdicts::FEASIBLE => {
                    let rhos = p
                        .rhos
                        .ok_or_else(|| Error::Schema("at 'payload.rhos': missing".into()))?
                        .iter()
                        .map(|m| HermitianMatrix::new(matrix_from_json(m)?))
                        .collect::<Result<Vec<_>>>()?;
                    if rhos.len() != pinst.statistic.atom_count() {
                        return Ok(Verification::fail("wrong number of atom states"));
                    }
                    let residual = pinst.constraint_residual(&rhos);
                    let min_eig = rhos
                        .iter()
                        .map(HermitianMatrix::min_eigenvalue)
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    Ok(if residual <= opts.tol && min_eig >= -1e-8 {
                        Verification::ok(format!(
                            "residual {residual:.3e}, min eigenvalue {min_eig:.3e}"
                        ))
                    } else {
                        Verification::fail(format!(
                            "residual {residual:.3e}, min eigenvalue {min_eig:.3e}"
                        ))
                    })
                }
                verdicts::INFEASIBLE_ORTHOGONALITY => {
                    let (l, r) = p
                        .pair
                        .ok_or_else(|| Error::Schema("at 'payload.pair': missing".into()))?;
                    let (Some(u), Some(v)) = (f.get(&l), f.get(&r)) else {
                        return Ok(Verification::fail("unknown labels in pair"));
                    };
                    let z = u.dot_unchecked(v);
                    Ok(if z.norm() > opts.tol {
                        Verification::ok(format!("overlap |<{l},{r}>| = {:.17}", z.norm()))
                    } else {
                        Verification::fail("pair is orthogonal")
                    })
                }
                _ => {
                    let rerun = petz::petz_feasibility(&pinst, &opts)?;
                    Ok(
                        if matches!(rerun, PetzCertificate::NumericallyInfeasible { .. }) {
                            Verification::ok("solver re-run stalls again (numerical evidence only)")
                        } else {
                            Verification::fail("solver re-run reached a different verdict")
                        },
                    )
                }
            }
        }
        CertificateKind::Oracle | CertificateKind::Selftest => Ok(Verification::fail(
            "report certificates carry no checkable claim",
        )),
    }
}
