//! Petz sufficiency for discrete statistics as a semidefinite feasibility
//! problem.
//!
//! A positive map into the algebra of `T = Σ λ_k e_k` has the form
//! `α(x) = Σ_k tr(ρ_k x) e_k` with `ρ_k ⪰ 0`. Invariance of every state
//! reads `Σ_k w_{θk} ρ_k = P_[φ_θ]`, and unitality adds `tr ρ_k = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Mutation;
use crate::linalg::{self, c, CMatrix, Complex, HermitianMatrix};
use crate::spectral::{self, DiscreteStatistic, StateFamily};
use crate::sufficiency::{self, Tolerances};

#[derive(Clone, Debug)]
pub struct PetzInstance {
    pub statistic: DiscreteStatistic,
    pub family: StateFamily,
    /// `weights[θ][k] = ‖e_k φ_θ‖²`
    pub weights: Vec<Vec<f64>>,
    pub unital: bool,
}

impl PetzInstance {
    pub fn new(statistic: DiscreteStatistic, family: StateFamily, unital: bool) -> Result<Self> {
        let weights = spectral::project_states(&statistic, &family)?.weights;
        Ok(Self {
            statistic,
            family,
            weights,
            unital,
        })
    }

    fn targets(&self) -> Vec<CMatrix> {
        self.family
            .vectors()
            .iter()
            .map(|v| CMatrix::outer(v, v))
            .collect()
    }

    /// Largest entrywise defect of `Σ_k w_{θk} ρ_k = P_[φ_θ]` and, when
    /// unital, of `tr ρ_k = 1`.
    pub fn constraint_residual(&self, rhos: &[HermitianMatrix]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, p) in self.weights.iter().zip(self.targets()) {
            let mut sum = CMatrix::zeros(p.rows(), p.cols());
            for (w, rho) in row.iter().zip(rhos) {
                sum = &sum + &rho.matrix().scale(c(*w, 0.0));
            }
            worst = worst.max(sum.max_abs_diff(&p));
        }
        if self.unital {
            for rho in rhos {
                worst = worst.max((rho.trace() - 1.0).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PetzOptions {
    pub max_iters: usize,
    /// Feasibility tolerance on constraint residuals.
    pub tol: f64,
    /// Tolerance for [`structural_check`].
    pub structural_tol: f64,
    pub plateau_window: usize,
}

impl Default for PetzOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-7,
            structural_tol: 1e-6,
            plateau_window: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub enum PetzCertificate {
    Feasible {
        rhos: Vec<HermitianMatrix>,
        max_constraint_residual: f64,
        iterations: usize,
    },
    /// Two states overlap; an invariant positive map cannot exist.
    InfeasibleOrthogonality {
        pair: (String, String),
        overlap: Complex,
    },
    /// The alternating projections stalled above tolerance. This is a
    /// numerical verdict, not a proof.
    NumericallyInfeasible {
        residual_floor: f64,
        iterations: usize,
    },
}

impl PetzCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self, PetzCertificate::Feasible { .. })
    }

    pub fn rhos(&self) -> Option<&[HermitianMatrix]> {
        match self {
            PetzCertificate::Feasible { rhos, .. } => Some(rhos),
            _ => None,
        }
    }
}

/// First pair of states (in label order) with `|⟨φ′, φ″⟩| > tol`.
pub fn orthogonality_precheck(f: &StateFamily, tol: f64) -> Option<((String, String), Complex)> {
    let vs = f.vectors();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let z = vs[a].dot_unchecked(&vs[b]);
            if z.norm() > tol {
                let l = f.labels();
                return Some(((l[a].clone(), l[b].clone()), z));
            }
        }
    }
    None
}

pub fn petz_feasibility(inst: &PetzInstance, opts: &PetzOptions) -> Result<PetzCertificate> {
    feasibility_with(inst, opts, None)
}

/// Least-squares projector `z ↦ z − A⁺(Az − b)` for one coordinate block.
struct AffineBlock {
    a: Vec<f64>,
    pinv: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl AffineBlock {
    fn new(a: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        let pinv = linalg::real_pseudo_inverse(&a, rows, cols)?;
        Ok(Self {
            a,
            pinv,
            rows,
            cols,
        })
    }

    fn project(&self, z: &mut [f64], b: &[f64]) {
        let r: Vec<f64> = (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.a[i * self.cols + j] * z[j])
                    .sum::<f64>()
                    - b[i]
            })
            .collect();
        for (j, zj) in z.iter_mut().enumerate() {
            *zj -= (0..self.rows)
                .map(|i| self.pinv[j * self.rows + i] * r[i])
                .sum::<f64>();
        }
    }
}

/// Orthogonal projection (Frobenius metric) onto the affine constraint set.
///
/// Each off-diagonal real or imaginary coordinate is an independent copy of
/// the system `W x = b`; the diagonal coordinates are coupled by the trace
/// rows and solved jointly.
struct AffineSet {
    d: usize,
    k: usize,
    off: AffineBlock,
    diag: AffineBlock,
    targets: Vec<CMatrix>,
    trace_rows: bool,
}

impl AffineSet {
    fn new(inst: &PetzInstance, trace_rows: bool) -> Result<Self> {
        let d = inst.statistic.dim();
        let k = inst.statistic.atom_count();
        let nt = inst.weights.len();
        let w: Vec<f64> = inst.weights.iter().flatten().copied().collect();
        let off = AffineBlock::new(w, nt, k)?;

        let rows = nt * d + if trace_rows { k } else { 0 };
        let cols = k * d;
        let mut a = vec![0.0; rows * cols];
        for (th, row) in inst.weights.iter().enumerate() {
            for i in 0..d {
                for (atom, &wk) in row.iter().enumerate() {
                    a[(th * d + i) * cols + atom * d + i] = wk;
                }
            }
        }
        if trace_rows {
            for atom in 0..k {
                for i in 0..d {
                    a[(nt * d + atom) * cols + atom * d + i] = 1.0;
                }
            }
        }
        let diag = AffineBlock::new(a, rows, cols)?;
        Ok(Self {
            d,
            k,
            off,
            diag,
            targets: inst.targets(),
            trace_rows,
        })
    }

    fn project(&self, xs: &[CMatrix]) -> Vec<CMatrix> {
        let (d, k) = (self.d, self.k);
        let mut out = xs.to_vec();
        for i in 0..d {
            for j in i + 1..d {
                let mut re: Vec<f64> = xs.iter().map(|x| x[(i, j)].re).collect();
                let mut im: Vec<f64> = xs.iter().map(|x| x[(i, j)].im).collect();
                let b_re: Vec<f64> = self.targets.iter().map(|p| p[(i, j)].re).collect();
                let b_im: Vec<f64> = self.targets.iter().map(|p| p[(i, j)].im).collect();
                self.off.project(&mut re, &b_re);
                self.off.project(&mut im, &b_im);
                for a in 0..k {
                    out[a][(i, j)] = c(re[a], im[a]);
                    out[a][(j, i)] = c(re[a], -im[a]);
                }
            }
        }
        let mut z: Vec<f64> = xs
            .iter()
            .flat_map(|x| (0..d).map(move |i| x[(i, i)].re))
            .collect();
        let mut b: Vec<f64> = self
            .targets
            .iter()
            .flat_map(|p| (0..d).map(move |i| p[(i, i)].re))
            .collect();
        if self.trace_rows {
            b.extend(std::iter::repeat_n(1.0, k));
        }
        self.diag.project(&mut z, &b);
        for a in 0..k {
            for i in 0..d {
                out[a][(i, i)] = c(z[a * d + i], 0.0);
            }
        }
        out
    }
}

pub(crate) fn feasibility_with(
    inst: &PetzInstance,
    opts: &PetzOptions,
    mutation: Option<Mutation>,
) -> Result<PetzCertificate> {
    if inst.statistic.dim() != inst.family.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.statistic.dim(),
            found: inst.family.dim(),
        });
    }
    if let Some((pair, overlap)) = orthogonality_precheck(&inst.family, opts.tol) {
        return Ok(PetzCertificate::InfeasibleOrthogonality { pair, overlap });
    }

    let trace_rows = inst.unital && mutation != Some(Mutation::DropTraceConstraint);
    let affine = AffineSet::new(inst, trace_rows)?;
    let mut scored = inst.clone();
    scored.unital = trace_rows;
    let d = inst.statistic.dim();
    let k = inst.statistic.atom_count();

    // Dykstra: the affine step needs no correction term, the cone step does.
    let mut x: Vec<CMatrix> = vec![CMatrix::identity(d).scale(c(1.0 / d as f64, 0.0)); k];
    let mut q: Vec<CMatrix> = vec![CMatrix::zeros(d, d); k];
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iters.min(1 << 16));
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let y = affine.project(&x);
        let mut rhos = Vec::with_capacity(k);
        for a in 0..k {
            let z = &y[a] + &q[a];
            let p = linalg::psd_project(&HermitianMatrix::symmetrized(z.clone()))?;
            q[a] = &z - p.matrix();
            x[a] = p.matrix().clone();
            rhos.push(p);
        }
        residual = scored.constraint_residual(&rhos);
        if residual <= opts.tol {
            return Ok(PetzCertificate::Feasible {
                rhos,
                max_constraint_residual: residual,
                iterations: it,
            });
        }
        history.push(residual);
        if history.len() > opts.plateau_window {
            let then = history[history.len() - 1 - opts.plateau_window];
            if then - residual < 1e-12 * then && residual > 10.0 * opts.tol {
                return Ok(PetzCertificate::NumericallyInfeasible {
                    residual_floor: residual,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::Undecided {
        iterations: opts.max_iters,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum StructuralViolation {
    /// Two states both load the same atom.
    SharedAtom {
        atom: usize,
        states: (String, String),
    },
    /// A loaded atom's `ρ_k` is not the projector of the state it carries.
    NotStateProjector {
        atom: usize,
        state: String,
        deviation: f64,
    },
}

/// Checks that every atom loaded by a state (`w_{nk} > tol`) carries only
/// that state and has `ρ_k = P_[φ_n]` within `10 · tol`. In non-unital mode the
/// comparison is with `tr(ρ_k) P_[φ_n]`.
pub fn structural_check(
    inst: &PetzInstance,
    rhos: &[HermitianMatrix],
    tol: f64,
) -> std::result::Result<(), StructuralViolation> {
    let labels = inst.family.labels();
    for atom in 0..inst.statistic.atom_count() {
        let loaders: Vec<usize> = (0..inst.weights.len())
            .filter(|&n| inst.weights[n][atom] > tol)
            .collect();
        if loaders.len() > 1 {
            return Err(StructuralViolation::SharedAtom {
                atom,
                states: (labels[loaders[0]].clone(), labels[loaders[1]].clone()),
            });
        }
        if let Some(&n) = loaders.first() {
            let v = &inst.family.vectors()[n];
            let scale = if inst.unital { 1.0 } else { rhos[atom].trace() };
            let expected = CMatrix::outer(v, v).scale(c(scale, 0.0));
            let deviation = rhos[atom].matrix().max_abs_diff(&expected);
            if deviation > 10.0 * tol {
                return Err(StructuralViolation::NotStateProjector {
                    atom,
                    state: labels[n].clone(),
                    deviation,
                });
            }
        }
    }
    Ok(())
}

/// Weak sufficiency of the instance's statistic, which every Petz-feasible
/// instance should satisfy.
pub fn petz_implies_weak_check(inst: &PetzInstance) -> Result<bool> {
    Ok(
        sufficiency::check_weak_sufficiency(&inst.statistic, &inst.family, &Tolerances::default())?
            .sufficient(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn diag_stat(values: &[f64]) -> DiscreteStatistic {
        DiscreteStatistic::from_matrix(&HermitianMatrix::from_diag(values), None).unwrap()
    }

    fn family(states: &[(&str, &[f64])]) -> StateFamily {
        StateFamily::normalized(
            states
                .iter()
                .map(|(l, v)| (l.to_string(), CVector::from_real(v).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn basis_instance() -> PetzInstance {
        PetzInstance::new(
            diag_stat(&[1.0, -1.0]),
            family(&[("phi1", &[1.0, 0.0]), ("phi2", &[0.0, 1.0])]),
            true,
        )
        .unwrap()
    }

    #[test]
    fn qubit_example_fails_orthogonality() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, -1.0]),
            family(&[("phi1", &[1.0, 0.0]), ("phi2", &[1.0, 1.0])]),
            true,
        )
        .unwrap();
        match petz_feasibility(&inst, &PetzOptions::default()).unwrap() {
            PetzCertificate::InfeasibleOrthogonality { pair, overlap } => {
                assert_eq!(pair, ("phi1".to_string(), "phi2".to_string()));
                assert!((overlap.norm() - S).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(petz_implies_weak_check(&inst).unwrap());
    }

    #[test]
    fn orthonormal_families_pass_precheck() {
        let f = family(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("b", &[0.0, 1.0, 0.0]),
            ("c", &[0.0, 0.0, 1.0]),
        ]);
        assert!(orthogonality_precheck(&f, 1e-12).is_none());
        let g = StateFamily::new(vec![
            (
                "u".into(),
                CVector::new(vec![c(S, 0.0), c(0.0, S)]).unwrap(),
            ),
            (
                "v".into(),
                CVector::new(vec![c(0.0, S), c(S, 0.0)]).unwrap(),
            ),
        ])
        .unwrap();
        assert!(orthogonality_precheck(&g, 1e-12).is_none());
    }

    #[test]
    fn basis_instance_is_feasible_with_projectors() {
        let inst = basis_instance();
        let cert = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let PetzCertificate::Feasible {
            rhos,
            max_constraint_residual,
            ..
        } = &cert
        else {
            panic!("expected feasible, got {cert:?}");
        };
        assert!(*max_constraint_residual <= 1e-7);
        // atoms ascend: λ = −1 carries phi2, λ = 1 carries phi1
        let p2 = HermitianMatrix::from_diag(&[0.0, 1.0]);
        let p1 = HermitianMatrix::from_diag(&[1.0, 0.0]);
        assert!(rhos[0].matrix().max_abs_diff(p2.matrix()) < 1e-9);
        assert!(rhos[1].matrix().max_abs_diff(p1.matrix()) < 1e-9);
        assert_eq!(structural_check(&inst, rhos, 1e-6), Ok(()));
        assert!(petz_implies_weak_check(&inst).unwrap());
    }

    #[test]
    fn contradictory_single_atom_is_numerically_infeasible() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 1.0]),
            family(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]),
            true,
        )
        .unwrap();
        match petz_feasibility(&inst, &PetzOptions::default()).unwrap() {
            PetzCertificate::NumericallyInfeasible { residual_floor, .. } => {
                // oracle: least squares gives ρ = I/2, missing each target by 1/2
                assert!((residual_floor - 0.5).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spectator_atom_is_unconstrained() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 2.0, 3.0]),
            family(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0])]),
            true,
        )
        .unwrap();
        let cert = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let rhos = cert.rhos().expect("feasible").to_vec();
        assert_eq!(structural_check(&inst, &rhos, 1e-6), Ok(()));
        let mut altered = rhos.clone();
        altered[2] = HermitianMatrix::from_diag(&[0.0, 0.0, 1.0]);
        assert_eq!(structural_check(&inst, &altered, 1e-6), Ok(()));
    }

    #[test]
    fn mixing_breaks_structure() {
        let inst = basis_instance();
        let cert = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let mut rhos = cert.rhos().unwrap().to_vec();
        let mixed =
            &rhos[1].matrix().scale(c(0.5, 0.0)) + &CMatrix::identity(2).scale(c(0.25, 0.0));
        rhos[1] = HermitianMatrix::new(mixed).unwrap();
        assert!(matches!(
            structural_check(&inst, &rhos, 1e-6),
            Err(StructuralViolation::NotStateProjector { atom: 1, .. })
        ));
    }

    #[test]
    fn spread_state_forces_projectors_on_each_atom() {
        // φ = (√0.7, √0.3, 0) spread over two atoms; ψ on the third
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 2.0, 3.0]),
            family(&[
                ("phi", &[0.7f64.sqrt(), 0.3f64.sqrt(), 0.0]),
                ("psi", &[0.0, 0.0, 1.0]),
            ]),
            true,
        )
        .unwrap();
        let cert = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let rhos = cert.rhos().expect("feasible");
        assert!(inst.constraint_residual(rhos) <= 1e-7);
        for rho in rhos {
            assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
        }
        assert_eq!(structural_check(&inst, rhos, 1e-6), Ok(()));
    }

    #[test]
    fn dropping_trace_rows_loses_structure() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 2.0, 3.0]),
            family(&[
                ("phi", &[0.7f64.sqrt(), 0.3f64.sqrt(), 0.0]),
                ("psi", &[0.0, 0.0, 1.0]),
            ]),
            true,
        )
        .unwrap();
        let cert = feasibility_with(
            &inst,
            &PetzOptions::default(),
            Some(Mutation::DropTraceConstraint),
        )
        .unwrap();
        let rhos = cert.rhos().expect("still feasible without trace rows");
        assert!(structural_check(&inst, rhos, 1e-6).is_err());
    }

    #[test]
    fn non_unital_mode_accepts_scaled_projectors() {
        let mut inst = basis_instance();
        inst.unital = false;
        let cert = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let rhos = cert.rhos().expect("feasible");
        assert_eq!(structural_check(&inst, rhos, 1e-6), Ok(()));
    }

    #[test]
    fn shared_atom_is_reported() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 1.0]),
            family(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]),
            true,
        )
        .unwrap();
        let rhos = vec![HermitianMatrix::identity(2)
            .into_matrix()
            .scale(c(0.5, 0.0))];
        let rhos: Vec<HermitianMatrix> = rhos
            .into_iter()
            .map(|m| HermitianMatrix::new(m).unwrap())
            .collect();
        assert!(matches!(
            structural_check(&inst, &rhos, 1e-6),
            Err(StructuralViolation::SharedAtom { atom: 0, .. })
        ));
    }

    #[test]
    fn budget_exhaustion_is_undecided() {
        let inst = PetzInstance::new(
            diag_stat(&[1.0, 1.0]),
            family(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]),
            true,
        )
        .unwrap();
        let opts = PetzOptions {
            max_iters: 5,
            ..PetzOptions::default()
        };
        assert!(matches!(
            petz_feasibility(&inst, &opts),
            Err(Error::Undecided { iterations: 5, .. })
        ));
    }

    #[test]
    fn solver_is_deterministic() {
        let inst = basis_instance();
        let a = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        let b = petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        assert_eq!(a.rhos().unwrap(), b.rhos().unwrap());
    }
}
