//! Version selection: unit-modulus phases `c_θ` that make prescribed inner
//! products real.
//!
//! A constraint `(θ′, θ″, v)` asks for `c_θ′ · conj(c_θ″) · v ∈ ℝ`, i.e.
//! `arg c_θ′ − arg c_θ″ + arg v ≡ 0 (mod π)`. Negative reals are allowed, so
//! the offsets live in `ℝ/πℤ`, not `ℝ/2πℤ`. [`align_phases`] solves the system
//! exactly with a union-find carrying angular offsets; [`oracle_align`] is an
//! exhaustive grid search used to cross-check it.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, Complex, ONE};

/// Default angular tolerance (radians) for consistency checks.
pub const ANGLE_TOL: f64 = 1e-6;
/// Inner products below this (relative to the norms involved) impose nothing.
pub const ZERO_TOL: f64 = 1e-10;
/// Largest family the grid oracle accepts.
pub const ORACLE_MAX_LABELS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConstraint {
    pub left: String,
    pub right: String,
    pub value: Complex,
}

impl PhaseConstraint {
    pub fn new(left: impl Into<String>, right: impl Into<String>, value: Complex) -> Self {
        Self {
            left: left.into(),
            right: right.into(),
            value,
        }
    }

    /// `|Im(c_left · conj(c_right) · v)| / |v|` under `versions`. Labels the
    /// assignment does not mention count as phase 1.
    pub fn residual(&self, versions: &VersionAssignment) -> f64 {
        normalized_residual(
            versions.get(&self.left),
            versions.get(&self.right),
            self.value,
        )
    }
}

fn normalized_residual(cl: Complex, cr: Complex, v: Complex) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    (cl * cr.conj() * v).im.abs() / n
}

/// Unit-modulus phase per label; the version of `φ_θ` is `c_θ φ_θ`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct VersionAssignment {
    phases: BTreeMap<String, Complex>,
}

impl VersionAssignment {
    pub fn new(phases: BTreeMap<String, Complex>) -> Result<Self> {
        for (label, z) in &phases {
            if !(z.re.is_finite() && z.im.is_finite()) || (z.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidFamily(format!(
                    "phase for '{label}' does not have modulus one"
                )));
            }
        }
        Ok(Self { phases })
    }

    /// All phases equal to one.
    pub fn identity<S: AsRef<str>>(labels: &[S]) -> Self {
        Self {
            phases: labels
                .iter()
                .map(|l| (l.as_ref().to_string(), ONE))
                .collect(),
        }
    }

    pub fn get(&self, label: &str) -> Complex {
        self.phases.get(label).copied().unwrap_or(ONE)
    }

    pub fn phases(&self) -> &BTreeMap<String, Complex> {
        &self.phases
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Complex)> {
        self.phases.iter().map(|(l, z)| (l.as_str(), *z))
    }

    /// Multiplies every phase by `e^{iα}`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let w = Complex::from_polar(1.0, alpha);
        Self {
            phases: self
                .phases
                .iter()
                .map(|(l, z)| (l.clone(), z * w))
                .collect(),
        }
    }

    /// Flips the sign of the listed labels.
    pub fn negated<S: AsRef<str>>(&self, labels: &[S]) -> Self {
        let mut out = self.clone();
        for l in labels {
            if let Some(z) = out.phases.get_mut(l.as_ref()) {
                *z = -*z;
            }
        }
        out
    }

    pub fn max_residual(&self, constraints: &[PhaseConstraint]) -> f64 {
        constraints
            .iter()
            .map(|k| k.residual(self))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Alignment {
    Aligned(VersionAssignment),
    /// The constraints along `cycle` cannot hold simultaneously; `defect` is the
    /// angle (mod π) by which the closing constraint is violated.
    Infeasible {
        cycle: Vec<PhaseConstraint>,
        defect: f64,
    },
}

impl Alignment {
    pub fn is_aligned(&self) -> bool {
        matches!(self, Alignment::Aligned(_))
    }

    pub fn versions(&self) -> Option<&VersionAssignment> {
        match self {
            Alignment::Aligned(v) => Some(v),
            Alignment::Infeasible { .. } => None,
        }
    }
}

/// Constraints from the off-diagonal entries of a Gram-like matrix whose rows
/// and columns are indexed by `labels`. Entries with
/// `|G_jk| ≤ ZERO_TOL · sqrt(G_jj G_kk)` are skipped.
pub fn gram_constraints<S: AsRef<str>>(labels: &[S], g: &CMatrix) -> Vec<PhaseConstraint> {
    let mut out = Vec::new();
    for j in 0..labels.len() {
        for k in j + 1..labels.len() {
            let scale = (g[(j, j)].re.abs() * g[(k, k)].re.abs()).sqrt();
            if g[(j, k)].norm() > ZERO_TOL * scale {
                out.push(PhaseConstraint::new(
                    labels[j].as_ref(),
                    labels[k].as_ref(),
                    g[(j, k)],
                ));
            }
        }
    }
    out
}

fn wrap(x: f64, modulus: f64) -> f64 {
    let r = x - modulus * (x / modulus).round();
    // keep the half-open interval (−m/2, m/2]
    if r <= -modulus / 2.0 {
        r + modulus
    } else {
        r
    }
}

struct OffsetForest {
    parent: Vec<usize>,
    // a_i − a_parent(i), reduced mod `modulus`
    offset: Vec<f64>,
    size: Vec<usize>,
    modulus: f64,
}

impl OffsetForest {
    fn new(n: usize, modulus: f64) -> Self {
        Self {
            parent: (0..n).collect(),
            offset: vec![0.0; n],
            size: vec![1; n],
            modulus,
        }
    }

    /// Returns `(root, a_i − a_root)`.
    fn find(&mut self, i: usize) -> (usize, f64) {
        let p = self.parent[i];
        if p == i {
            return (i, 0.0);
        }
        let (root, to_root) = self.find(p);
        let total = wrap(self.offset[i] + to_root, self.modulus);
        self.parent[i] = root;
        self.offset[i] = total;
        (root, total)
    }

    /// Attach so that `a_child_root − a_parent_root = delta`.
    fn link(&mut self, mut a: usize, mut b: usize, mut delta: f64) {
        // `delta` is a_b − a_a; keep the larger tree as parent.
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
            delta = -delta;
        }
        self.parent[b] = a;
        self.offset[b] = wrap(delta, self.modulus);
        self.size[a] += self.size[b];
    }
}

/// Solves the mod-π phase system.
///
/// Every label receives a phase; each connected component is normalized so
/// that its lexicographically smallest label has phase 1. On failure the
/// returned cycle consists of tree constraints joining the two endpoints plus
/// the constraint that closed the inconsistent loop.
pub fn align_phases<S: AsRef<str>>(
    constraints: &[PhaseConstraint],
    labels: &[S],
    angle_tol: f64,
) -> Result<Alignment> {
    align_phases_mod(constraints, labels, angle_tol, PI)
}

pub(crate) fn align_phases_mod<S: AsRef<str>>(
    constraints: &[PhaseConstraint],
    labels: &[S],
    angle_tol: f64,
    modulus: f64,
) -> Result<Alignment> {
    let names: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let lookup = |l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };

    let n = names.len();
    let mut forest = OffsetForest::new(n, modulus);
    let mut tree: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];

    for (ci, k) in constraints.iter().enumerate() {
        let l = lookup(&k.left)?;
        let r = lookup(&k.right)?;
        if k.value.norm() == 0.0 {
            continue;
        }
        let arg = k.value.arg();
        let (rl, ol) = forest.find(l);
        let (rr, or) = forest.find(r);
        if rl != rr {
            // a_rr − a_rl = ol + arg − or
            forest.link(rl, rr, ol + arg - or);
            tree[l].push((r, ci));
            tree[r].push((l, ci));
            continue;
        }
        let defect = wrap(ol - or + arg, modulus);
        if defect.abs() > angle_tol {
            let mut cycle: Vec<PhaseConstraint> = tree_path(&tree, l, r)
                .into_iter()
                .map(|i| constraints[i].clone())
                .collect();
            cycle.push(k.clone());
            return Ok(Alignment::Infeasible { cycle, defect });
        }
    }

    let mut anchor: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    let mut found = Vec::with_capacity(n);
    for i in 0..n {
        let (root, off) = forest.find(i);
        found.push((root, off));
        anchor
            .entry(root)
            .and_modify(|(best, best_off)| {
                if names[i] < names[*best] {
                    *best = i;
                    *best_off = off;
                }
            })
            .or_insert((i, off));
    }
    let phases = names
        .iter()
        .zip(found)
        .map(|(name, (root, off))| {
            let a = wrap(off - anchor[&root].1, modulus);
            (name.to_string(), Complex::from_polar(1.0, a))
        })
        .collect();
    Ok(Alignment::Aligned(VersionAssignment { phases }))
}

fn tree_path(tree: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; tree.len()];
    let mut seen = vec![false; tree.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(v, ci) in &tree[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, ci));
                queue.push_back(v);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while let Some((p, ci)) = prev[cur] {
        path.push(ci);
        cur = p;
    }
    path.reverse();
    path
}

#[derive(Clone, Debug)]
pub struct OracleAlignment {
    pub assignment: VersionAssignment,
    pub max_residual: f64,
}

/// Exhaustive search over phases `2πj/steps`.
///
/// The first label is pinned to phase 1 (a global phase changes nothing) and,
/// for even `steps`, the other labels only range over half the circle since a
/// sign flip leaves every residual unchanged.
pub fn oracle_align<S: AsRef<str>>(
    constraints: &[PhaseConstraint],
    labels: &[S],
    steps: usize,
) -> Result<OracleAlignment> {
    if labels.len() > ORACLE_MAX_LABELS {
        return Err(Error::TooLarge(format!(
            "grid oracle accepts at most {ORACLE_MAX_LABELS} labels, got {}",
            labels.len()
        )));
    }
    if steps == 0 {
        return Err(Error::TooLarge("grid needs at least one step".into()));
    }
    let names: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut edges = Vec::with_capacity(constraints.len());
    for k in constraints {
        let l = *index
            .get(k.left.as_str())
            .ok_or_else(|| Error::UnknownLabel(k.left.clone()))?;
        let r = *index
            .get(k.right.as_str())
            .ok_or_else(|| Error::UnknownLabel(k.right.clone()))?;
        let n = k.value.norm();
        if n > 0.0 {
            edges.push((l, r, k.value / n));
        }
    }

    let free = names.len().saturating_sub(1);
    let range = if steps.is_multiple_of(2) {
        steps / 2
    } else {
        steps
    };
    let grid: Vec<Complex> = (0..steps)
        .map(|j| Complex::from_polar(1.0, 2.0 * PI * j as f64 / steps as f64))
        .collect();

    let mut digits = vec![0usize; free];
    let mut phases = vec![ONE; names.len()];
    let mut best = (f64::INFINITY, phases.clone());
    loop {
        for (i, &d) in digits.iter().enumerate() {
            phases[i + 1] = grid[d];
        }
        let mut worst: f64 = 0.0;
        for &(l, r, u) in &edges {
            worst = worst.max((phases[l] * phases[r].conj() * u).im.abs());
            if worst >= best.0 {
                break;
            }
        }
        if worst < best.0 {
            best = (worst, phases.clone());
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == free {
                let assignment = VersionAssignment {
                    phases: names
                        .iter()
                        .zip(&best.1)
                        .map(|(n, z)| (n.to_string(), *z))
                        .collect(),
                };
                let max_residual = if best.0.is_finite() { best.0 } else { 0.0 };
                return Ok(OracleAlignment {
                    assignment,
                    max_residual,
                });
            }
            digits[pos] += 1;
            if digits[pos] < range {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Rotation `e^{iθ}` as a convenience for tests and generators.
pub fn unit(theta: f64) -> Complex {
    c(theta.cos(), theta.sin())
}
