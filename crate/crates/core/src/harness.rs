//! Seeded instance generators, a brute-force weak-sufficiency oracle and the
//! property suite that cross-checks every decision procedure.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, InstanceFile};
use crate::linalg::{self, c, CMatrix, CVector, Complex, HermitianMatrix};
use crate::minimality::{self, BetaMode, MinimalResult};
use crate::petz::{self, PetzCertificate, PetzInstance, PetzOptions};
use crate::phases::{self, PhaseConstraint, VersionAssignment};
use crate::spectral::{self, CoarseMap, DiscreteStatistic, StateFamily};
use crate::sufficiency::{self, Existence, Tolerances};

pub const MAX_DIM: usize = 32;
pub const MAX_STATES: usize = 8;
/// Size guard for [`brute_force_weak_sufficiency`].
pub const BRUTE_MAX_STATES: usize = 4;
pub const BRUTE_MAX_ATOMS: usize = 6;
/// Atom limit for the exhaustive coarse-graining properties.
pub const SUITE_MAX_ATOMS: usize = 6;
/// Seed used by `selftest` when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Deliberate defects used to check that the property suite has teeth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Phase alignment modulo 2π instead of π.
    PhaseFullTurn,
    /// The per-atom rank test is skipped.
    SkipRankTest,
    /// The Petz solver drops `tr ρ_k = 1`.
    DropTraceConstraint,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [
        Mutation::PhaseFullTurn,
        Mutation::SkipRankTest,
        Mutation::DropTraceConstraint,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Real states; the statistic has rank-one atoms on a real basis.
    RealVectors,
    /// Generic complex states and statistic.
    ComplexVectors,
    /// Pairwise orthogonal states.
    OrthogonalPlanted,
    /// Each state spread with unequal weights over its own set of atoms.
    AtomPlanted,
    /// The first three states carry a `(1,0), (1,1)/√2, (1,i)/√2` cycle.
    PhaseObstructed,
    /// Weakly sufficient instance with planted `∼` classes and dead atoms.
    ClassPlanted { classes: usize, dead_atoms: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dim: usize,
    pub states: usize,
    pub flavor: Flavor,
    pub seed: u64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn phase(rng: &mut ChaCha8Rng) -> Complex {
    phases::unit(rng.random_range(0.0..2.0 * PI))
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize, real: bool) -> CVector {
    let v: Vec<Complex> = (0..d)
        .map(|_| c(gaussian(rng), if real { 0.0 } else { gaussian(rng) }))
        .collect();
    CVector::new(v)
        .expect("finite")
        .normalized()
        .expect("nonzero")
}

/// Orthonormal basis from Gram-Schmidt on Gaussian vectors.
pub fn random_basis(rng: &mut ChaCha8Rng, d: usize, real: bool) -> Vec<CVector> {
    loop {
        let vs: Vec<CVector> = (0..d).map(|_| random_vector(rng, d, real)).collect();
        if let Ok(gs) = linalg::gram_schmidt(&vs, 1e-6) {
            return gs.ortho;
        }
    }
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> HermitianMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(gaussian(rng), 0.0);
        for j in i + 1..d {
            let z = c(gaussian(rng), gaussian(rng));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianMatrix::new(m).expect("Hermitian by construction")
}

fn projector_onto(vs: &[&CVector], d: usize) -> HermitianMatrix {
    let mut p = CMatrix::zeros(d, d);
    for v in vs {
        p = &p + &CMatrix::outer(v, v);
    }
    HermitianMatrix::symmetrized(p)
}

fn shuffled_values(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut values: Vec<f64> = (1..=k).map(|x| x as f64).collect();
    values.shuffle(rng);
    values
}

/// Statistic whose atoms are consecutive blocks of `basis` of size
/// `1..=max_block`.
fn blocked_statistic(
    rng: &mut ChaCha8Rng,
    basis: &[CVector],
    max_block: usize,
) -> Result<(DiscreteStatistic, Vec<Vec<usize>>)> {
    let d = basis.len();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < d {
        let size = rng.random_range(1..=max_block).min(d - i);
        blocks.push((i..i + size).collect::<Vec<_>>());
        i += size;
    }
    let projections = blocks
        .iter()
        .map(|b| projector_onto(&b.iter().map(|&j| &basis[j]).collect::<Vec<_>>(), d))
        .collect();
    let t = DiscreteStatistic::new(shuffled_values(rng, blocks.len()), projections)?;
    Ok((t, blocks))
}

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

fn family(vectors: Vec<CVector>) -> Result<StateFamily> {
    StateFamily::normalized(labels(vectors.len()).into_iter().zip(vectors).collect())
}

fn infeasible(msg: String) -> Error {
    Error::InvalidFamily(format!("infeasible generator parameters: {msg}"))
}

/// Builds the instance described by `spec`; identical specs give identical
/// instances.
pub fn generate(spec: &GeneratorSpec) -> Result<(DiscreteStatistic, StateFamily)> {
    let (d, n) = (spec.dim, spec.states);
    if d == 0 || d > MAX_DIM || n == 0 || n > MAX_STATES {
        return Err(infeasible(format!(
            "need 1 ≤ dim ≤ {MAX_DIM} and 1 ≤ states ≤ {MAX_STATES}, got dim {d}, states {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rng = &mut rng;
    match spec.flavor {
        Flavor::RealVectors => {
            let basis = random_basis(rng, d, true);
            let (t, _) = blocked_statistic(rng, &basis, 1)?;
            let f = family((0..n).map(|_| random_vector(rng, d, true)).collect())?;
            Ok((t, f))
        }
        Flavor::ComplexVectors => {
            let basis = random_basis(rng, d, false);
            let (t, _) = blocked_statistic(rng, &basis, 2)?;
            let f = family((0..n).map(|_| random_vector(rng, d, false)).collect())?;
            Ok((t, f))
        }
        Flavor::OrthogonalPlanted => {
            if n > d {
                return Err(infeasible(format!(
                    "{n} orthogonal states in dimension {d}"
                )));
            }
            let basis = random_basis(rng, d, false);
            let (t, _) = blocked_statistic(rng, &basis, 2)?;
            let states = random_basis(rng, d, false);
            let f = family(
                states
                    .into_iter()
                    .take(n)
                    .map(|v| v.scale(phase(rng)))
                    .collect(),
            )?;
            Ok((t, f))
        }
        Flavor::AtomPlanted => {
            if n > d {
                return Err(infeasible(format!(
                    "{n} atom-disjoint states in dimension {d}"
                )));
            }
            let basis = random_basis(rng, d, false);
            let (mut t, mut blocks) = blocked_statistic(rng, &basis, 2)?;
            if blocks.len() < n {
                (t, blocks) = blocked_statistic(rng, &basis, 1)?;
            }
            let k = blocks.len();
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(rng);
            let mut owner: Vec<Option<usize>> = vec![None; k];
            for (i, &atom) in order.iter().enumerate() {
                owner[atom] = if i < n {
                    Some(i)
                } else {
                    Some(rng.random_range(0..=n)).filter(|&s| s < n)
                };
            }
            let mut states = Vec::with_capacity(n);
            for s in 0..n {
                let mut v = CVector::zeros(d);
                for atom in (0..k).filter(|&a| owner[a] == Some(s)) {
                    let mut u = CVector::zeros(d);
                    for &j in &blocks[atom] {
                        u.axpy(c(gaussian(rng), gaussian(rng)), &basis[j]);
                    }
                    let u = u.normalized().expect("nonzero");
                    let w: f64 = rng.random_range(0.2..1.0);
                    v.axpy(phase(rng) * w.sqrt(), &u);
                }
                states.push(v);
            }
            Ok((t, family(states)?))
        }
        Flavor::PhaseObstructed => {
            if n < 3 || d < 2 {
                return Err(infeasible(
                    "the obstruction needs 3 states and dimension 2".into(),
                ));
            }
            let basis = random_basis(rng, d, false);
            let (e0, e1) = (&basis[0], &basis[1]);
            let mut states = vec![e0.scale(phase(rng))];
            let mut b = e0.scale(c(FRAC_1_SQRT_2, 0.0));
            b.axpy(c(FRAC_1_SQRT_2, 0.0), e1);
            states.push(b.scale(phase(rng)));
            let mut ci = e0.scale(c(FRAC_1_SQRT_2, 0.0));
            ci.axpy(c(0.0, FRAC_1_SQRT_2), e1);
            states.push(ci.scale(phase(rng)));
            for _ in 3..n {
                states.push(random_vector(rng, d, false));
            }
            let stat_basis = random_basis(rng, d, false);
            let (t, _) = blocked_statistic(rng, &stat_basis, 2)?;
            Ok((t, family(states)?))
        }
        Flavor::ClassPlanted {
            classes,
            dead_atoms,
        } => {
            if classes == 0 || classes + dead_atoms > d {
                return Err(infeasible(format!(
                    "{classes} classes and {dead_atoms} dead atoms in dimension {d}"
                )));
            }
            let basis = random_basis(rng, d, false);
            let active = rng.random_range(classes..=d - dead_atoms);
            let mut atoms: Vec<Vec<usize>> = (0..active + dead_atoms).map(|j| vec![j]).collect();
            atoms[active - 1].extend(active + dead_atoms..d);
            let rows: Vec<Vec<f64>> = (0..classes)
                .map(|_| (0..n).map(|_| gaussian(rng)).collect())
                .collect();
            let class_of: Vec<usize> = (0..active)
                .map(|k| {
                    if k < classes {
                        k
                    } else {
                        rng.random_range(0..classes)
                    }
                })
                .collect();
            let mut states = vec![CVector::zeros(d); n];
            for k in 0..active {
                let beta = c(gaussian(rng), gaussian(rng));
                for (th, v) in states.iter_mut().enumerate() {
                    v.axpy(beta * rows[class_of[k]][th], &basis[k]);
                }
            }
            let projections = atoms
                .iter()
                .map(|a| projector_onto(&a.iter().map(|&j| &basis[j]).collect::<Vec<_>>(), d))
                .collect();
            let t = DiscreteStatistic::new(shuffled_values(rng, atoms.len()), projections)?;
            Ok((t, family(states)?))
        }
    }
}

fn minors_vanish(vs: &[CVector], tol: f64) -> bool {
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let (u, v) = (vs[a].entries(), vs[b].entries());
            for i in 0..u.len() {
                for j in i + 1..u.len() {
                    if (u[i] * v[j] - u[j] * v[i]).norm() > tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Levenberg-Marquardt on `Σ sin²(a_l − a_r + arg v)` from `start`, with the
/// first label pinned. Returns the polished assignment and its max residual.
pub fn polish_phases(
    constraints: &[PhaseConstraint],
    labels: &[String],
    start: &VersionAssignment,
) -> Result<(VersionAssignment, f64)> {
    let idx = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let edges: Vec<(usize, usize, f64)> = constraints
        .iter()
        .map(|k| Ok((idx(&k.left)?, idx(&k.right)?, k.value.arg())))
        .collect::<Result<_>>()?;
    let n = labels.len();
    let mut a: Vec<f64> = labels.iter().map(|l| start.get(l).arg()).collect();
    let sse = |a: &[f64]| {
        edges
            .iter()
            .map(|&(l, r, t)| (a[l] - a[r] + t).sin().powi(2))
            .sum::<f64>()
    };
    let mut cost = sse(&a);
    let mut mu = 1e-3;
    for _ in 0..500 {
        if cost < 1e-30 || mu > 1e12 || n < 2 {
            break;
        }
        let m = n - 1;
        let mut jtj = vec![vec![0.0; m]; m];
        let mut jtr = vec![0.0; m];
        for &(l, r, t) in &edges {
            let x = a[l] - a[r] + t;
            let (res, d) = (x.sin(), x.cos());
            let mut grad = vec![0.0; m];
            if l > 0 {
                grad[l - 1] += d;
            }
            if r > 0 {
                grad[r - 1] -= d;
            }
            for i in 0..m {
                jtr[i] += grad[i] * res;
                for j in 0..m {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        for (i, row) in jtj.iter_mut().enumerate() {
            row[i] += mu;
        }
        let Some(step) = solve_small(jtj, jtr.iter().map(|x| -x).collect()) else {
            mu *= 10.0;
            continue;
        };
        let mut trial = a.clone();
        for i in 0..m {
            trial[i + 1] += step[i];
        }
        let tc = sse(&trial);
        if tc < cost {
            a = trial;
            cost = tc;
            mu = (mu / 3.0).max(1e-12);
        } else {
            mu *= 4.0;
        }
    }
    let versions = VersionAssignment::new(
        labels
            .iter()
            .zip(&a)
            .map(|(l, &x)| (l.clone(), phases::unit(x)))
            .collect(),
    )?;
    let worst = versions.max_residual(constraints);
    Ok((versions, worst))
}

/// Grid search plus local polish over all phase assignments; `true` when the
/// best assignment satisfies every constraint within `10 · ANGLE_TOL`.
pub fn phases_feasible_by_search(
    constraints: &[PhaseConstraint],
    labels: &[String],
    phase_steps: usize,
) -> Result<bool> {
    if constraints.is_empty() {
        return Ok(true);
    }
    let grid = phases::oracle_align(constraints, labels, phase_steps)?;
    let (_, worst) = polish_phases(constraints, labels, &grid.assignment)?;
    Ok(worst <= 10.0 * phases::ANGLE_TOL)
}

/// Independent decision of weak sufficiency: 2×2 minors for the per-atom rank
/// condition and an exhaustive phase search over the per-atom overlaps.
pub fn brute_force_weak_sufficiency(
    t: &DiscreteStatistic,
    f: &StateFamily,
    phase_steps: usize,
) -> Result<bool> {
    if f.len() > BRUTE_MAX_STATES || t.atom_count() > BRUTE_MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "brute force handles at most {BRUTE_MAX_STATES} states and {BRUTE_MAX_ATOMS} atoms"
        )));
    }
    if t.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: f.dim(),
        });
    }
    let mut constraints = Vec::new();
    for p in t.projections() {
        let comps: Vec<CVector> = f.vectors().iter().map(|v| p.matrix().mul_vec(v)).collect();
        if !minors_vanish(&comps, 1e-8) {
            return Ok(false);
        }
        for a in 0..comps.len() {
            for b in a + 1..comps.len() {
                if comps[a].norm() > 1e-10 && comps[b].norm() > 1e-10 {
                    constraints.push(PhaseConstraint::new(
                        f.labels()[a].clone(),
                        f.labels()[b].clone(),
                        comps[a].dot_unchecked(&f.vectors()[b]),
                    ));
                }
            }
        }
    }
    phases_feasible_by_search(&constraints, f.labels(), phase_steps)
}

/// A generated instance under test.
#[derive(Clone, Debug)]
pub struct Case {
    pub spec: GeneratorSpec,
    pub statistic: DiscreteStatistic,
    pub family: StateFamily,
    rounded: bool,
}

impl Case {
    pub fn generate(spec: GeneratorSpec) -> Result<Self> {
        let (statistic, family) = generate(&spec)?;
        Ok(Self {
            spec,
            statistic,
            family,
            rounded: false,
        })
    }

    fn with(&self, statistic: DiscreteStatistic, family: StateFamily) -> Self {
        Self {
            spec: self.spec,
            statistic,
            family,
            rounded: self.rounded,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    /// Preconditions not met.
    Skip,
    Fail(String),
}

fn fail(msg: impl Into<String>) -> Outcome {
    Outcome::Fail(msg.into())
}

fn err_fail(e: Error) -> Outcome {
    Outcome::Fail(format!("error: {e}"))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return err_fail(e),
        }
    };
}

macro_rules! pre {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(_) => return Outcome::Skip,
        }
    };
}

type Check = fn(&Case, Option<Mutation>) -> Outcome;

struct Property {
    name: &'static str,
    flavors: &'static [FlavorKind],
    check: Check,
    shrink: bool,
}

#[derive(Clone, Copy, Debug)]
enum FlavorKind {
    Real,
    Complex,
    Orthogonal,
    Atom,
    Obstructed,
    Classes,
    ClassesAllActive,
    ClassesDead,
}

/// Random valid spec of the given kind at desk scale (dimension ≤ 6).
fn random_spec(rng: &mut ChaCha8Rng, kind: FlavorKind) -> GeneratorSpec {
    let seed = rng.random();
    let d = rng.random_range(2..=6usize);
    let (states, flavor) = match kind {
        FlavorKind::Real => (rng.random_range(1..=4), Flavor::RealVectors),
        FlavorKind::Complex => (rng.random_range(1..=4), Flavor::ComplexVectors),
        FlavorKind::Orthogonal => (rng.random_range(1..=d.min(4)), Flavor::OrthogonalPlanted),
        FlavorKind::Atom => (rng.random_range(1..=d.min(3)), Flavor::AtomPlanted),
        FlavorKind::Obstructed => (rng.random_range(3..=4), Flavor::PhaseObstructed),
        FlavorKind::Classes | FlavorKind::ClassesAllActive | FlavorKind::ClassesDead => {
            let dead = match kind {
                FlavorKind::ClassesAllActive => 0,
                FlavorKind::ClassesDead => 1,
                _ => rng.random_range(0..=1),
            };
            let classes = rng.random_range(1..=(d - dead).min(3));
            (
                rng.random_range(2..=3),
                Flavor::ClassPlanted {
                    classes,
                    dead_atoms: dead,
                },
            )
        }
    };
    GeneratorSpec {
        dim: d,
        states,
        flavor,
        seed,
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn check_determinism(case: &Case, _: Option<Mutation>) -> Outcome {
    let a = tri!(generate(&case.spec));
    let b = tri!(generate(&case.spec));
    let sa = io::serialize_instance(Some(&a.0), &a.1);
    let sb = io::serialize_instance(Some(&b.0), &b.1);
    if sa == sb {
        Outcome::Pass
    } else {
        fail("same spec produced different instances")
    }
}

fn check_oracle_agreement(case: &Case, m: Option<Mutation>) -> Outcome {
    let brute = pre!(brute_force_weak_sufficiency(
        &case.statistic,
        &case.family,
        36
    ));
    let v = tri!(sufficiency::check_with(
        &case.statistic,
        &case.family,
        &tol(),
        m
    ));
    if v.sufficient() == brute {
        Outcome::Pass
    } else {
        fail(format!(
            "checker says {}, brute force says {brute}",
            v.sufficient()
        ))
    }
}

fn check_witness_soundness(case: &Case, m: Option<Mutation>) -> Outcome {
    let v = tri!(sufficiency::check_with(
        &case.statistic,
        &case.family,
        &tol(),
        m
    ));
    let Some(w) = v.witness else {
        return Outcome::Pass;
    };
    let check = tri!(sufficiency::verify_witness(
        &case.statistic,
        &case.family,
        &w,
        tol().witness
    ));
    if check.valid {
        Outcome::Pass
    } else {
        fail(format!("witness residual {:.3e}", check.max_residual))
    }
}

fn gram_is_real(f: &StateFamily) -> bool {
    linalg::gram_matrix(f.vectors())
        .map(|g| g.data().iter().all(|z| z.im.abs() <= 1e-12))
        .unwrap_or(false)
}

fn check_existence_real(case: &Case, m: Option<Mutation>) -> Outcome {
    if !gram_is_real(&case.family) {
        return Outcome::Skip;
    }
    match tri!(sufficiency::exists_with(&case.family, &tol(), m)) {
        Existence::Constructed { statistic, witness } => {
            let v = tri!(sufficiency::check_with(&statistic, &case.family, &tol(), m));
            let w = tri!(sufficiency::verify_witness(
                &statistic,
                &case.family,
                &witness,
                tol().witness
            ));
            if v.sufficient() && w.valid {
                Outcome::Pass
            } else {
                fail("constructed statistic does not check")
            }
        }
        Existence::NonExistence { defect, .. } => fail(format!(
            "real Gram matrix reported obstructed (defect {defect:.3e})"
        )),
    }
}

fn check_existence_obstructed(case: &Case, m: Option<Mutation>) -> Outcome {
    let f = &case.family;
    if f.len() > phases::ORACLE_MAX_LABELS {
        return Outcome::Skip;
    }
    let g = tri!(linalg::gram_matrix(f.vectors()));
    let cons = phases::gram_constraints(f.labels(), &g);
    if tri!(phases_feasible_by_search(&cons, f.labels(), 36)) {
        return Outcome::Skip;
    }
    match tri!(sufficiency::exists_with(f, &tol(), m)) {
        Existence::NonExistence { .. } => Outcome::Pass,
        Existence::Constructed { .. } => fail("obstructed family admitted a statistic"),
    }
}

/// Preconditions shared by the coarse-graining properties: an unmutated
/// sufficient verdict and a small enough statistic.
fn sufficient_small(case: &Case) -> Option<sufficiency::GammaTable> {
    if case.statistic.atom_count() > SUITE_MAX_ATOMS {
        return None;
    }
    let v = sufficiency::check_weak_sufficiency(&case.statistic, &case.family, &tol()).ok()?;
    v.gamma.filter(|_| v.witness.is_some())
}

fn check_p1(case: &Case, m: Option<Mutation>) -> Outcome {
    if sufficient_small(case).is_none() {
        return Outcome::Skip;
    }
    let (t, f) = (&case.statistic, &case.family);
    for phi in tri!(minimality::enumerate_coarse_grainings(t, SUITE_MAX_ATOMS)) {
        let lhs = tri!(minimality::check_coarse_with(
            t,
            f,
            &phi,
            &tol(),
            BetaMode::Complex,
            m
        ));
        let (u, _) = tri!(spectral::apply_coarse(t, &phi));
        let rhs = tri!(sufficiency::check_with(&u, f, &tol(), m)).sufficient();
        if lhs != rhs {
            return fail(format!(
                "coarse map {:?}: class criterion says {lhs}, direct check says {rhs}",
                phi.values()
            ));
        }
    }
    Outcome::Pass
}

fn nontrivial(f: &StateFamily) -> bool {
    linalg::numerical_rank(f.vectors(), tol().rank)
        .map(|r| r >= 2)
        .unwrap_or(false)
}

fn check_minimality(case: &Case, m: Option<Mutation>) -> Outcome {
    let Some(table) = sufficient_small(case) else {
        return Outcome::Skip;
    };
    if (0..table.atom_count()).any(|k| !table.is_active(k)) || !nontrivial(&case.family) {
        return Outcome::Skip;
    }
    let (t, f) = (&case.statistic, &case.family);
    let s = match tri!(minimality::minimal_with(t, f, &tol(), BetaMode::Complex, m)) {
        MinimalResult::Minimal { statistic, .. } => statistic,
        MinimalResult::NoMinimalExists { dead_atom, .. } => {
            return fail(format!("no dead atom, yet atom {dead_atom} reported dead"))
        }
    };
    if !tri!(sufficiency::check_with(&s, f, &tol(), m)).sufficient() {
        return fail("minimal statistic is not weakly sufficient");
    }
    for phi in tri!(minimality::enumerate_coarse_grainings(t, SUITE_MAX_ATOMS)) {
        let (u, _) = tri!(spectral::apply_coarse(t, &phi));
        if tri!(sufficiency::check_with(&u, f, &tol(), m)).sufficient()
            && minimality::is_function_of(&s, &u, 1e-9).is_none()
        {
            return fail(format!(
                "S is not a function of the sufficient coarse-graining {:?}",
                phi.values()
            ));
        }
    }
    Outcome::Pass
}

fn check_no_minimal(case: &Case, m: Option<Mutation>) -> Outcome {
    let Some(table) = sufficient_small(case) else {
        return Outcome::Skip;
    };
    let Some(dead) = (0..table.atom_count()).find(|&k| !table.is_active(k)) else {
        return Outcome::Skip;
    };
    if !nontrivial(&case.family) {
        return Outcome::Skip;
    }
    let (t, f) = (&case.statistic, &case.family);
    if let MinimalResult::Minimal { .. } =
        tri!(minimality::minimal_with(t, f, &tol(), BetaMode::Complex, m))
    {
        return fail(format!(
            "atom {dead} is dead, yet a minimal statistic was returned"
        ));
    }
    let variants = tri!(minimality::dead_atom_variants(t, dead));
    for (i, v) in variants.iter().enumerate() {
        if !tri!(sufficiency::check_with(v, f, &tol(), m)).sufficient() {
            return fail(format!("variant {i} is not weakly sufficient"));
        }
    }
    for phi in tri!(minimality::enumerate_coarse_grainings(t, SUITE_MAX_ATOMS)) {
        let (s, _) = tri!(spectral::apply_coarse(t, &phi));
        if s.atom_count() > 1
            && tri!(sufficiency::check_with(&s, f, &tol(), m)).sufficient()
            && variants
                .iter()
                .all(|v| minimality::is_function_of(&s, v, 1e-9).is_some())
        {
            return fail(format!("{:?} is a function of every variant", phi.values()));
        }
    }
    Outcome::Pass
}

fn check_transitivity(case: &Case, _: Option<Mutation>) -> Outcome {
    let Some(table) = sufficient_small(case) else {
        return Outcome::Skip;
    };
    let cls = minimality::equivalence_classes(&table, tol().rank, BetaMode::Complex);
    if cls.transitivity_residual <= 1e-6 {
        Outcome::Pass
    } else {
        fail(format!(
            "transitivity residual {:.3e}",
            cls.transitivity_residual
        ))
    }
}

fn atoms_disjointly_loaded(inst: &PetzInstance) -> bool {
    (0..inst.statistic.atom_count())
        .all(|k| inst.weights.iter().filter(|row| row[k] > 1e-9).count() <= 1)
}

fn check_petz_planted(case: &Case, m: Option<Mutation>) -> Outcome {
    let inst = tri!(PetzInstance::new(
        case.statistic.clone(),
        case.family.clone(),
        true
    ));
    if petz::orthogonality_precheck(&inst.family, 1e-9).is_some() || !atoms_disjointly_loaded(&inst)
    {
        return Outcome::Skip;
    }
    let opts = PetzOptions::default();
    let cert = tri!(petz::feasibility_with(&inst, &opts, m));
    let PetzCertificate::Feasible { rhos, .. } = &cert else {
        return fail(format!("planted feasible instance reported {cert:?}"));
    };
    let residual = inst.constraint_residual(rhos);
    if residual > 1e-6 {
        return fail(format!("constraint residual {residual:.3e}"));
    }
    for rho in rhos {
        let e = tri!(rho.min_eigenvalue());
        if e < -1e-8 {
            return fail(format!("atom state has eigenvalue {e:.3e}"));
        }
    }
    if let Err(v) = petz::structural_check(&inst, rhos, opts.structural_tol) {
        return fail(format!("structural check: {v:?}"));
    }
    if !tri!(petz::petz_implies_weak_check(&inst)) {
        return fail("feasible instance is not weakly sufficient");
    }
    Outcome::Pass
}

fn check_petz_necessity(case: &Case, m: Option<Mutation>) -> Outcome {
    let inst = tri!(PetzInstance::new(
        case.statistic.clone(),
        case.family.clone(),
        true
    ));
    if petz::orthogonality_precheck(&inst.family, 1e-6).is_none() {
        return Outcome::Skip;
    }
    match petz::feasibility_with(&inst, &PetzOptions::default(), m) {
        Ok(PetzCertificate::Feasible { .. }) => fail("non-orthogonal family reported feasible"),
        _ => Outcome::Pass,
    }
}

fn check_io_round_trip(case: &Case, _: Option<Mutation>) -> Outcome {
    let text = io::serialize_instance(Some(&case.statistic), &case.family);
    let back = tri!(io::parse_instance(&text));
    let t = back.statistic.expect("statistic was serialized");
    let close = |a: &CMatrix, b: &CMatrix| a.max_abs_diff(b) <= 1e-15;
    let same = t.eigenvalues() == case.statistic.eigenvalues()
        && t.projections()
            .iter()
            .zip(case.statistic.projections())
            .all(|(p, q)| close(p.matrix(), q.matrix()))
        && back.family.labels() == case.family.labels()
        && back
            .family
            .vectors()
            .iter()
            .zip(case.family.vectors())
            .all(|(u, v)| u.distance(v) <= 1e-15);
    if same {
        Outcome::Pass
    } else {
        fail("round trip changed the instance")
    }
}

fn check_jacobi(case: &Case, _: Option<Mutation>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(case.spec.seed);
    let d = rng.random_range(1..=16);
    let h = random_hermitian(&mut rng, d);
    let eig = tri!(linalg::hermitian_eig(&h, linalg::EIG_TOL));
    let r = eig.reconstruct().max_abs_diff(h.matrix()) / h.matrix().frobenius().max(1.0);
    if r <= 1e-9 {
        Outcome::Pass
    } else {
        fail(format!("relative reconstruction residual {r:.3e}"))
    }
}

use FlavorKind::*;

const ALL_KINDS: &[FlavorKind] = &[Real, Complex, Orthogonal, Atom, Obstructed, Classes];

fn properties() -> Vec<Property> {
    vec![
        Property {
            name: "generator_determinism",
            flavors: ALL_KINDS,
            check: check_determinism,
            shrink: false,
        },
        Property {
            name: "oracle_agreement",
            flavors: ALL_KINDS,
            check: check_oracle_agreement,
            shrink: true,
        },
        Property {
            name: "witness_soundness",
            flavors: ALL_KINDS,
            check: check_witness_soundness,
            shrink: true,
        },
        Property {
            name: "existence_real_gram",
            flavors: &[Real],
            check: check_existence_real,
            shrink: true,
        },
        Property {
            name: "existence_obstructed",
            flavors: &[Obstructed],
            check: check_existence_obstructed,
            shrink: true,
        },
        Property {
            name: "coarse_criterion_cross_validation",
            flavors: &[Classes],
            check: check_p1,
            shrink: true,
        },
        Property {
            name: "minimality",
            flavors: &[ClassesAllActive],
            check: check_minimality,
            shrink: true,
        },
        Property {
            name: "no_minimal_with_dead_atom",
            flavors: &[ClassesDead],
            check: check_no_minimal,
            shrink: true,
        },
        Property {
            name: "equivalence_transitivity",
            flavors: &[Classes],
            check: check_transitivity,
            shrink: false,
        },
        Property {
            name: "petz_planted_feasible",
            flavors: &[Atom],
            check: check_petz_planted,
            shrink: true,
        },
        Property {
            name: "petz_orthogonality_necessary",
            flavors: &[Complex, Obstructed],
            check: check_petz_necessity,
            shrink: true,
        },
        Property {
            name: "io_round_trip",
            flavors: ALL_KINDS,
            check: check_io_round_trip,
            shrink: false,
        },
        Property {
            name: "jacobi_reconstruction",
            flavors: &[Complex],
            check: check_jacobi,
            shrink: false,
        },
    ]
}

fn round3(z: Complex) -> Complex {
    c((z.re * 1e3).round() / 1e3, (z.im * 1e3).round() / 1e3)
}

/// Smaller variants of a case: drop a state, merge two adjacent atoms, round
/// the states to three decimals.
fn shrink_candidates(case: &Case) -> Vec<Case> {
    let mut out = Vec::new();
    let (t, f) = (&case.statistic, &case.family);
    if f.len() > 1 {
        for i in 0..f.len() {
            if let Ok(g) = f.retain(|j| j != i) {
                out.push(case.with(t.clone(), g));
            }
        }
    }
    for k in 0..t.atom_count().saturating_sub(1) {
        let mut values = t.eigenvalues().to_vec();
        values[k + 1] = values[k];
        if let Ok((u, _)) = spectral::apply_coarse(t, &CoarseMap::new(values)) {
            out.push(case.with(u, f.clone()));
        }
    }
    let rounded: Vec<(String, CVector)> = f
        .iter()
        .filter_map(|(l, v)| {
            let r = CVector::new(v.entries().iter().copied().map(round3).collect()).ok()?;
            Some((l.to_string(), r))
        })
        .collect();
    if !case.rounded && rounded.len() == f.len() {
        if let Ok(g) = StateFamily::normalized(rounded) {
            let mut r = case.with(t.clone(), g);
            r.rounded = true;
            out.push(r);
        }
    }
    out
}

fn shrink(case: Case, check: Check, m: Option<Mutation>) -> (Case, String, usize) {
    let mut current = case;
    let mut detail = match check(&current, m) {
        Outcome::Fail(d) => d,
        _ => unreachable!("only failing cases are shrunk"),
    };
    let mut steps = 0;
    'outer: while steps < 200 {
        for cand in shrink_candidates(&current) {
            if let Outcome::Fail(d) = check(&cand, m) {
                current = cand;
                detail = d;
                steps += 1;
                continue 'outer;
            }
        }
        break;
    }
    (current, detail, steps)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub spec: GeneratorSpec,
    pub detail: String,
    pub shrink_steps: usize,
    pub instance: InstanceFile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub skipped: usize,
    pub failed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub count: usize,
    pub mutation: Option<Mutation>,
    pub properties: Vec<PropertyOutcome>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failed == 0)
    }

    pub fn failing(&self) -> Vec<&PropertyOutcome> {
        self.properties.iter().filter(|p| p.failed > 0).collect()
    }

    pub fn property(&self, name: &str) -> Option<&PropertyOutcome> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Runs every property on `count` generated cases. The first failure of each
/// property is shrunk and serialized.
pub fn run_property_suite(seed: u64, count: usize, mutation: Option<Mutation>) -> PropertyReport {
    let mut report = PropertyReport {
        seed,
        count,
        mutation,
        properties: Vec::new(),
    };
    if count == 0 {
        return report;
    }
    for (pi, prop) in properties().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((pi as u64 + 1) << 32));
        let mut outcome = PropertyOutcome {
            name: prop.name.to_string(),
            cases: 0,
            passed: 0,
            skipped: 0,
            failed: 0,
            counterexample: None,
        };
        for i in 0..count {
            let spec = random_spec(&mut rng, prop.flavors[i % prop.flavors.len()]);
            let case = match Case::generate(spec) {
                Ok(c) => c,
                Err(e) => {
                    outcome.cases += 1;
                    outcome.failed += 1;
                    outcome.counterexample.get_or_insert(Counterexample {
                        spec,
                        detail: format!("generator error: {e}"),
                        shrink_steps: 0,
                        instance: InstanceFile {
                            dimension: spec.dim,
                            states: Default::default(),
                            statistic: None,
                        },
                    });
                    continue;
                }
            };
            outcome.cases += 1;
            match (prop.check)(&case, mutation) {
                Outcome::Pass => outcome.passed += 1,
                Outcome::Skip => outcome.skipped += 1,
                Outcome::Fail(detail) => {
                    outcome.failed += 1;
                    if outcome.counterexample.is_none() {
                        let (small, detail, steps) = if prop.shrink {
                            shrink(case, prop.check, mutation)
                        } else {
                            (case, detail, 0)
                        };
                        outcome.counterexample = Some(Counterexample {
                            spec,
                            detail,
                            shrink_steps: steps,
                            instance: io::instance_file(Some(&small.statistic), &small.family),
                        });
                    }
                }
            }
        }
        report.properties.push(outcome);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(flavor: Flavor, dim: usize, states: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            dim,
            states,
            flavor,
            seed,
        }
    }

    #[test]
    fn real_vectors_have_real_gram() {
        let (_, f) = generate(&spec(Flavor::RealVectors, 4, 3, 7)).unwrap();
        let g = linalg::gram_matrix(f.vectors()).unwrap();
        assert!(g.data().iter().all(|z| z.im.abs() < 1e-15));
    }

    #[test]
    fn generation_is_deterministic() {
        for flavor in [
            Flavor::RealVectors,
            Flavor::ComplexVectors,
            Flavor::AtomPlanted,
            Flavor::PhaseObstructed,
            Flavor::ClassPlanted {
                classes: 2,
                dead_atoms: 1,
            },
        ] {
            let s = spec(flavor, 5, 3, 42);
            let (t1, f1) = generate(&s).unwrap();
            let (t2, f2) = generate(&s).unwrap();
            assert_eq!(
                io::serialize_instance(Some(&t1), &f1),
                io::serialize_instance(Some(&t2), &f2)
            );
        }
    }

    #[test]
    fn atom_planted_is_petz_feasible() {
        let (t, f) = generate(&spec(Flavor::AtomPlanted, 4, 2, 3)).unwrap();
        let inst = PetzInstance::new(t, f, true).unwrap();
        let cert = petz::petz_feasibility(&inst, &PetzOptions::default()).unwrap();
        assert!(cert.is_feasible(), "{cert:?}");
    }

    #[test]
    fn phase_obstructed_has_no_statistic() {
        let (_, f) = generate(&spec(Flavor::PhaseObstructed, 3, 3, 11)).unwrap();
        match sufficiency::exists_weakly_sufficient(&f, &tol()).unwrap() {
            Existence::NonExistence { defect, .. } => {
                assert!((defect.abs() - PI / 4.0).abs() < 1e-9)
            }
            Existence::Constructed { .. } => panic!("obstruction not detected"),
        }
    }

    #[test]
    fn class_planted_is_sufficient_with_dead_atom() {
        let s = spec(
            Flavor::ClassPlanted {
                classes: 2,
                dead_atoms: 1,
            },
            5,
            3,
            9,
        );
        let (t, f) = generate(&s).unwrap();
        let v = sufficiency::check_weak_sufficiency(&t, &f, &tol()).unwrap();
        assert!(v.sufficient());
        let table = v.gamma.unwrap();
        assert_eq!(
            (0..table.atom_count())
                .filter(|&k| !table.is_active(k))
                .count(),
            1
        );
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(generate(&spec(Flavor::OrthogonalPlanted, 2, 3, 0)).is_err());
        assert!(generate(&spec(Flavor::PhaseObstructed, 4, 2, 0)).is_err());
        assert!(generate(&spec(Flavor::RealVectors, 33, 1, 0)).is_err());
        assert!(generate(&spec(Flavor::RealVectors, 3, 9, 0)).is_err());
        assert!(generate(&spec(
            Flavor::ClassPlanted {
                classes: 3,
                dead_atoms: 1
            },
            3,
            2,
            0
        ))
        .is_err());
    }

    fn qubit() -> (DiscreteStatistic, StateFamily) {
        let t = DiscreteStatistic::from_matrix(&HermitianMatrix::from_diag(&[1.0, -1.0]), None)
            .unwrap();
        let f = StateFamily::new(vec![
            ("phi1".into(), CVector::from_real(&[1.0, 0.0]).unwrap()),
            (
                "phi2".into(),
                CVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap(),
            ),
        ])
        .unwrap();
        (t, f)
    }

    #[test]
    fn brute_force_examples() {
        let (t, f) = qubit();
        assert!(brute_force_weak_sufficiency(&t, &f, 36).unwrap());

        let t2 =
            DiscreteStatistic::from_matrix(&HermitianMatrix::from_diag(&[1.0, 1.0, 2.0]), None)
                .unwrap();
        let f2 = StateFamily::new(vec![
            ("a".into(), CVector::from_real(&[1.0, 0.0, 0.0]).unwrap()),
            ("b".into(), CVector::from_real(&[0.0, 1.0, 0.0]).unwrap()),
        ])
        .unwrap();
        assert!(!brute_force_weak_sufficiency(&t2, &f2, 36).unwrap());

        let (t3, f3) = generate(&spec(Flavor::PhaseObstructed, 3, 3, 5)).unwrap();
        assert!(!brute_force_weak_sufficiency(&t3, &f3, 36).unwrap());
    }

    #[test]
    fn brute_force_size_guard() {
        let (t, _) = qubit();
        let f = family((0..5).map(|i| CVector::basis(2, i % 2)).collect()).unwrap();
        assert!(matches!(
            brute_force_weak_sufficiency(&t, &f, 36),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn polish_reaches_exact_solution() {
        let labels = labels(3);
        let cons = vec![
            PhaseConstraint::new("s0", "s1", phases::unit(0.3)),
            PhaseConstraint::new("s1", "s2", phases::unit(-1.1)),
        ];
        let start = VersionAssignment::identity(&labels);
        let (_, worst) = polish_phases(&cons, &labels, &start).unwrap();
        assert!(worst < 1e-12);
    }

    #[test]
    fn empty_suite_passes() {
        let r = run_property_suite(1, 0, None);
        assert!(r.properties.is_empty());
        assert!(r.passed());
    }

    #[test]
    fn small_suite_passes() {
        let r = run_property_suite(2024, 6, None);
        assert!(r.passed(), "{}", serde_json::to_string_pretty(&r).unwrap());
        assert_eq!(r.seed, 2024);
    }
}
