//! Weak sufficiency: the discrete decision procedure, factorization witnesses
//! and the existence construction.
//!
//! `T = Σ λ_k e_k` is weakly sufficient for `{φ_θ}` iff every atom sees the
//! family in at most one direction (`dim span{e_k φ_θ} ≤ 1`) and there are
//! versions `c_θ φ_θ` for which all `⟨e_k φ̃_θ′, φ̃_θ″⟩` are real. When both
//! hold, the witness `χ`, `Φ_θ` is assembled directly from the per-atom
//! coefficients `e_k φ_θ = γ_k(θ) ξ_k`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Mutation;
use crate::linalg::{self, c, CMatrix, CVector, Complex, HermitianMatrix, ZERO};
use crate::phases::{self, Alignment, PhaseConstraint, VersionAssignment};
use crate::spectral::{self, DiscreteStatistic, SpectralFunction, StateFamily};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff for numerical rank.
    pub rank: f64,
    /// Coefficients `|γ_k(θ)|` at or below this are treated as zero.
    pub zero: f64,
    /// Angular tolerance for phase consistency (radians).
    pub angle: f64,
    /// Acceptance threshold on witness residuals.
    pub witness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: linalg::RANK_TOL,
            zero: phases::ZERO_TOL,
            angle: phases::ANGLE_TOL,
            witness: 1e-7,
        }
    }
}

/// `χ`, the real functions `Φ_θ` and the versions `c_θ` with
/// `Φ_θ(T) χ = c_θ φ_θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessFactorization {
    pub chi: CVector,
    pub functions: BTreeMap<String, SpectralFunction>,
    pub versions: VersionAssignment,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Atom `atom` sees the family in `dim ≥ 2` directions.
    Rank {
        atom: usize,
        eigenvalue: f64,
        dim: usize,
    },
    /// No choice of versions makes every per-atom product real.
    PhaseObstruction {
        cycle: Vec<PhaseConstraint>,
        defect: f64,
    },
}

/// Per-atom representatives `ξ_k` and coefficients `γ_k(θ)` with
/// `e_k φ_θ = γ_k(θ) ξ_k`. Inactive atoms have no `ξ_k` and zero `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaTable {
    pub labels: Vec<String>,
    pub xi: Vec<Option<CVector>>,
    /// `gamma[k][θ]`
    pub gamma: Vec<Vec<Complex>>,
}

impl GammaTable {
    pub fn atom_count(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.xi[k].is_some()
    }

    pub fn active_atoms(&self) -> Vec<usize> {
        (0..self.atom_count())
            .filter(|&k| self.is_active(k))
            .collect()
    }

    pub fn row(&self, k: usize) -> &[Complex] {
        &self.gamma[k]
    }
}

#[derive(Clone, Debug)]
pub struct SufficiencyVerdict {
    pub witness: Option<WitnessFactorization>,
    pub violations: Vec<Violation>,
    /// Present whenever every atom passed the rank test.
    pub gamma: Option<GammaTable>,
}

impl SufficiencyVerdict {
    pub fn sufficient(&self) -> bool {
        self.witness.is_some()
    }
}

/// Decides weak sufficiency of `t` for `f` and, when it holds, returns a
/// witness that [`verify_witness`] accepts.
pub fn check_weak_sufficiency(
    t: &DiscreteStatistic,
    f: &StateFamily,
    tol: &Tolerances,
) -> Result<SufficiencyVerdict> {
    check_with(t, f, tol, None)
}

pub(crate) fn modulus_for(mutation: Option<Mutation>) -> f64 {
    if mutation == Some(Mutation::PhaseFullTurn) {
        2.0 * PI
    } else {
        PI
    }
}

pub(crate) fn check_with(
    t: &DiscreteStatistic,
    f: &StateFamily,
    tol: &Tolerances,
    mutation: Option<Mutation>,
) -> Result<SufficiencyVerdict> {
    let table = spectral::project_states(t, f)?;
    let n_states = f.len();

    let mut violations = Vec::new();
    let mut xi = Vec::with_capacity(t.atom_count());
    let mut gamma = Vec::with_capacity(t.atom_count());
    for (k, comps) in table.components.iter().enumerate() {
        let (best, best_norm) = comps
            .iter()
            .map(CVector::norm)
            .enumerate()
            .fold((0, 0.0), |acc, (i, n)| if n > acc.1 { (i, n) } else { acc });
        if best_norm <= tol.zero {
            xi.push(None);
            gamma.push(vec![ZERO; n_states]);
            continue;
        }
        if mutation != Some(Mutation::SkipRankTest) {
            let dim = linalg::numerical_rank(comps, tol.rank)?;
            if dim > 1 {
                violations.push(Violation::Rank {
                    atom: k,
                    eigenvalue: t.eigenvalue(k),
                    dim,
                });
                xi.push(None);
                gamma.push(vec![ZERO; n_states]);
                continue;
            }
        }
        let raw = comps[best].scale(c(1.0 / best_norm, 0.0));
        let lead = raw[raw.argmax_abs()];
        let rep = raw.scale(lead.conj() / lead.norm());
        gamma.push(comps.iter().map(|v| v.dot_unchecked(&rep)).collect());
        xi.push(Some(rep));
    }
    if !violations.is_empty() {
        return Ok(SufficiencyVerdict {
            witness: None,
            violations,
            gamma: None,
        });
    }
    let table = GammaTable {
        labels: f.labels().to_vec(),
        xi,
        gamma,
    };

    let constraints = atom_constraints(&table, tol.zero);
    let versions =
        match phases::align_phases_mod(&constraints, f.labels(), tol.angle, modulus_for(mutation))?
        {
            Alignment::Aligned(v) => v,
            Alignment::Infeasible { cycle, defect } => {
                return Ok(SufficiencyVerdict {
                    witness: None,
                    violations: vec![Violation::PhaseObstruction { cycle, defect }],
                    gamma: Some(table),
                });
            }
        };

    let witness = assemble_witness(t, f, &table, versions, tol.zero);
    Ok(SufficiencyVerdict {
        witness: Some(witness),
        violations: Vec::new(),
        gamma: Some(table),
    })
}

/// `⟨e_k φ_θ′, φ_θ″⟩ = γ_k(θ′) conj(γ_k(θ″))` for every active atom and every
/// pair of states with nonzero coefficients there.
fn atom_constraints(table: &GammaTable, zero: f64) -> Vec<PhaseConstraint> {
    let mut out = Vec::new();
    for k in table.active_atoms() {
        let row = table.row(k);
        for a in 0..row.len() {
            if row[a].norm() <= zero {
                continue;
            }
            for b in a + 1..row.len() {
                if row[b].norm() <= zero {
                    continue;
                }
                out.push(PhaseConstraint::new(
                    table.labels[a].clone(),
                    table.labels[b].clone(),
                    row[a] * row[b].conj(),
                ));
            }
        }
    }
    out
}

fn assemble_witness(
    t: &DiscreteStatistic,
    f: &StateFamily,
    table: &GammaTable,
    versions: VersionAssignment,
    zero: f64,
) -> WitnessFactorization {
    let active = table.active_atoms();
    let weight = 1.0 / (active.len() as f64).sqrt();
    let mut chi = CVector::zeros(t.dim());
    let mut values = vec![vec![0.0; t.atom_count()]; f.len()];
    for &k in &active {
        let row = table.row(k);
        // After the version phases every c_θ γ_k(θ) shares one phase mod π;
        // fold that phase into ξ_k so the coefficients become real.
        let dressed: Vec<Complex> = row
            .iter()
            .zip(f.labels())
            .map(|(g, l)| versions.get(l) * g)
            .collect();
        let lead = dressed
            .iter()
            .copied()
            .fold(ZERO, |m, z| if z.norm() > m.norm() { z } else { m });
        let omega = if lead.norm() > zero {
            lead / lead.norm()
        } else {
            c(1.0, 0.0)
        };
        chi.axpy(omega * weight, table.xi[k].as_ref().unwrap());
        for (th, z) in dressed.iter().enumerate() {
            values[th][k] = (z * omega.conj()).re / weight;
        }
    }
    let functions = f
        .labels()
        .iter()
        .zip(values)
        .map(|(l, v)| (l.clone(), SpectralFunction::on_atoms(t, &v)))
        .collect();
    WitnessFactorization {
        chi,
        functions,
        versions,
    }
}

#[derive(Clone, Debug)]
pub struct WitnessCheck {
    pub valid: bool,
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
}

/// Checks `‖Φ_θ(T) χ − c_θ φ_θ‖ ≤ tol` for every state. Missing functions or
/// eigenvalues outside a function's domain give an infinite residual.
pub fn verify_witness(
    t: &DiscreteStatistic,
    f: &StateFamily,
    w: &WitnessFactorization,
    tol: f64,
) -> Result<WitnessCheck> {
    if w.chi.dim() != t.dim() || f.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: if w.chi.dim() != t.dim() {
                w.chi.dim()
            } else {
                f.dim()
            },
        });
    }
    let mut residuals = BTreeMap::new();
    for (label, phi) in f.iter() {
        let r = match w.functions.get(label) {
            Some(func) => match spectral::evaluate_function_on_statistic(t, func, &w.chi) {
                Ok(image) => image.distance(&phi.scale(w.versions.get(label))),
                Err(Error::MissingEigenvalue(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            },
            None => f64::INFINITY,
        };
        residuals.insert(label.to_string(), r);
    }
    let max_residual = residuals.values().copied().fold(0.0, f64::max);
    Ok(WitnessCheck {
        valid: max_residual <= tol && w.chi.norm() > 0.0,
        residuals,
        max_residual,
    })
}

#[derive(Clone, Debug)]
pub enum Existence {
    Constructed {
        statistic: DiscreteStatistic,
        witness: WitnessFactorization,
    },
    /// No versions make the Gram matrix real, hence no weakly sufficient
    /// statistic exists.
    NonExistence {
        cycle: Vec<PhaseConstraint>,
        defect: f64,
    },
}

/// Decides whether any weakly sufficient statistic exists for `f` and builds
/// one when it does.
///
/// The construction aligns the phases of the full Gram matrix, orthonormalizes
/// a maximal independent subfamily (greedy in label order) and puts eigenvalue
/// `n` on the `n`-th Gram-Schmidt direction, with eigenvalue 0 on the
/// orthogonal complement when it is nonzero.
pub fn exists_weakly_sufficient(f: &StateFamily, tol: &Tolerances) -> Result<Existence> {
    exists_with(f, tol, None)
}

pub(crate) fn exists_with(
    f: &StateFamily,
    tol: &Tolerances,
    mutation: Option<Mutation>,
) -> Result<Existence> {
    let g = linalg::gram_matrix(f.vectors())?;
    let constraints = phases::gram_constraints(f.labels(), &g);
    let versions =
        match phases::align_phases_mod(&constraints, f.labels(), tol.angle, modulus_for(mutation))?
        {
            Alignment::Aligned(v) => v,
            Alignment::Infeasible { cycle, defect } => {
                return Ok(Existence::NonExistence { cycle, defect })
            }
        };

    let mut selected: Vec<CVector> = Vec::new();
    for (label, v) in f.iter() {
        selected.push(v.scale(versions.get(label)));
        if linalg::numerical_rank(&selected, tol.rank)? < selected.len() {
            selected.pop();
        }
    }
    let gs = linalg::gram_schmidt(&selected, tol.rank)?;
    let statistic = statistic_on_basis(&gs.ortho)?;

    let verdict = check_with(&statistic, f, tol, mutation)?;
    match verdict.witness {
        Some(witness) => Ok(Existence::Constructed { statistic, witness }),
        None => Err(Error::InvalidStatistic(
            "constructed statistic failed the weak-sufficiency check".into(),
        )),
    }
}

/// `Σ_n n P_[ξ_n]`, plus `0 · (I − Σ_n P_[ξ_n])` when the `ξ_n` do not span.
pub fn statistic_on_basis(ortho: &[CVector]) -> Result<DiscreteStatistic> {
    let d = ortho.first().ok_or(Error::Empty("basis"))?.dim();
    let mut eigenvalues = Vec::with_capacity(ortho.len() + 1);
    let mut projections = Vec::with_capacity(ortho.len() + 1);
    let mut rest = CMatrix::identity(d);
    for (n, xi) in ortho.iter().enumerate() {
        let p = HermitianMatrix::projector(xi)?;
        rest = &rest - p.matrix();
        eigenvalues.push((n + 1) as f64);
        projections.push(p);
    }
    if ortho.len() < d {
        eigenvalues.push(0.0);
        projections.push(HermitianMatrix::symmetrized(rest));
    }
    DiscreteStatistic::new(eigenvalues, projections)
}

/// Largest normalized imaginary part of `⟨c_θ′ φ_θ′, c_θ″ φ_θ″⟩` over all pairs
/// of states with nonzero overlap.
pub fn gram_reality_residual(f: &StateFamily, versions: &VersionAssignment) -> Result<f64> {
    let g = linalg::gram_matrix(f.vectors())?;
    Ok(versions.max_residual(&phases::gram_constraints(f.labels(), &g)))
}
