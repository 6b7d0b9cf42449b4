//! Discrete statistics `T = Σ λ_k e_k`, state families, coarse-grainings and
//! the projections `e_k φ_θ` of states onto spectral atoms.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, HermitianMatrix};

/// Tolerance for the partition-of-identity checks on a statistic.
pub const PARTITION_TOL: f64 = 1e-8;
/// States must have unit norm to within this.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Relative tolerance used when grouping eigenvalues of a matrix into atoms.
pub const GROUP_TOL: f64 = 1e-9;
/// Relative tolerance for matching an eigenvalue against a function's domain.
pub const EIGENVALUE_MATCH_TOL: f64 = 1e-9;

/// A selfadjoint operator with finite spectrum, stored as eigenvalue /
/// projection pairs sorted by ascending eigenvalue.
///
/// The projections are mutually orthogonal, nonzero and sum to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStatistic {
    eigenvalues: Vec<f64>,
    projections: Vec<HermitianMatrix>,
}

impl DiscreteStatistic {
    pub fn new(eigenvalues: Vec<f64>, projections: Vec<HermitianMatrix>) -> Result<Self> {
        Self::with_tol(eigenvalues, projections, PARTITION_TOL)
    }

    pub fn with_tol(
        eigenvalues: Vec<f64>,
        projections: Vec<HermitianMatrix>,
        tol: f64,
    ) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidStatistic("no atoms".into()));
        }
        if eigenvalues.len() != projections.len() {
            return Err(Error::InvalidStatistic(format!(
                "{} eigenvalues but {} projections",
                eigenvalues.len(),
                projections.len()
            )));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidStatistic(format!(
                "eigenvalue {bad} is not finite"
            )));
        }
        let d = projections[0].dim();
        if let Some(p) = projections.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }

        let mut pairs: Vec<(f64, HermitianMatrix)> =
            eigenvalues.into_iter().zip(projections).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (eigenvalues, projections): (Vec<f64>, Vec<HermitianMatrix>) =
            pairs.into_iter().unzip();

        let scale = eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()));
        for (k, w) in eigenvalues.windows(2).enumerate() {
            if w[1] - w[0] <= 1e-12 * scale {
                return Err(Error::InvalidStatistic(format!(
                    "eigenvalues {} and {} (atoms {k} and {}) are not distinct",
                    w[0],
                    w[1],
                    k + 1
                )));
            }
        }
        for (k, p) in projections.iter().enumerate() {
            let m = p.matrix();
            let dev = (m * m).max_abs_diff(m);
            if dev > tol {
                return Err(Error::InvalidStatistic(format!(
                    "projection {k} is not idempotent (deviation {dev:.3e})"
                )));
            }
            if p.trace() < 0.5 {
                return Err(Error::InvalidStatistic(format!("projection {k} is zero")));
            }
        }
        for j in 0..projections.len() {
            for k in j + 1..projections.len() {
                let prod = (projections[j].matrix() * projections[k].matrix()).max_abs();
                if prod > tol {
                    return Err(Error::InvalidStatistic(format!(
                        "projections {j} and {k} are not orthogonal (deviation {prod:.3e})"
                    )));
                }
            }
        }
        let mut sum = CMatrix::zeros(d, d);
        for p in &projections {
            sum = &sum + p.matrix();
        }
        let dev = sum.max_abs_diff(&CMatrix::identity(d));
        if dev > tol {
            return Err(Error::InvalidStatistic(format!(
                "projections do not sum to the identity (deviation {dev:.3e})"
            )));
        }
        Ok(Self {
            eigenvalues,
            projections,
        })
    }

    /// Builds a statistic whose atoms are already known to partition the
    /// identity (sums of atoms of a valid statistic, rank-one projectors of an
    /// orthonormal basis, ...). Sorting is still applied.
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, projections: Vec<HermitianMatrix>) -> Self {
        let mut pairs: Vec<(f64, HermitianMatrix)> =
            eigenvalues.into_iter().zip(projections).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (eigenvalues, projections) = pairs.into_iter().unzip();
        Self {
            eigenvalues,
            projections,
        }
    }

    /// Spectral decomposition of a Hermitian matrix. Eigenvalues closer than
    /// `group_tol` (default `1e-9 · spectral radius`) are merged into one atom.
    pub fn from_matrix(m: &HermitianMatrix, group_tol: Option<f64>) -> Result<Self> {
        let eig = linalg::hermitian_eig(m, linalg::EIG_TOL)?;
        let radius = eig.values.iter().fold(0.0f64, |r, l| r.max(l.abs()));
        let tol = group_tol.unwrap_or(GROUP_TOL * radius);
        let d = m.dim();

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..eig.values.len() {
            match groups.last_mut() {
                Some(g) if eig.values[i] - eig.values[*g.last().unwrap()] <= tol => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let mut eigenvalues = Vec::with_capacity(groups.len());
        let mut projections = Vec::with_capacity(groups.len());
        for g in groups {
            let mean = g.iter().map(|&i| eig.values[i]).sum::<f64>() / g.len() as f64;
            let mut p = CMatrix::zeros(d, d);
            for &i in &g {
                p = &p + &CMatrix::outer(&eig.vectors[i], &eig.vectors[i]);
            }
            eigenvalues.push(mean);
            projections.push(HermitianMatrix::symmetrized(p));
        }
        Self::new(eigenvalues, projections)
    }

    pub fn dim(&self) -> usize {
        self.projections[0].dim()
    }

    pub fn atom_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projections(&self) -> &[HermitianMatrix] {
        &self.projections
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn projection(&self, k: usize) -> &HermitianMatrix {
        &self.projections[k]
    }

    /// Index of the atom carrying eigenvalue `lambda`, if any.
    pub fn atom_of(&self, lambda: f64) -> Option<usize> {
        self.eigenvalues
            .iter()
            .position(|&l| eigenvalues_match(l, lambda))
    }

    /// `Σ_k λ_k e_k`
    pub fn to_matrix(&self) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (l, p) in self.eigenvalues.iter().zip(&self.projections) {
            m = &m + &p.matrix().scale(c(*l, 0.0));
        }
        m
    }

    /// Same atoms, new eigenvalues (must be distinct).
    pub fn relabel(&self, eigenvalues: Vec<f64>) -> Result<Self> {
        Self::new(eigenvalues, self.projections.clone())
    }
}

pub(crate) fn eigenvalues_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIGENVALUE_MATCH_TOL * a.abs().max(b.abs()).max(1.0)
}

/// A finite family of labeled unit vectors, kept sorted by label.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFamily {
    labels: Vec<String>,
    vectors: Vec<CVector>,
}

impl StateFamily {
    pub fn new(states: Vec<(String, CVector)>) -> Result<Self> {
        let family = Self::unchecked(states)?;
        for (label, v) in family.iter() {
            let n = v.norm();
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidFamily(format!(
                    "state '{label}' not unit norm (norm {n})"
                )));
            }
        }
        Ok(family)
    }

    /// Like [`StateFamily::new`] but rescales every vector to unit norm.
    pub fn normalized(states: Vec<(String, CVector)>) -> Result<Self> {
        let mut out = Vec::with_capacity(states.len());
        for (label, v) in states {
            let u = v
                .normalized()
                .ok_or_else(|| Error::InvalidFamily(format!("state '{label}' is zero")))?;
            out.push((label, u));
        }
        Self::unchecked(out)
    }

    fn unchecked(mut states: Vec<(String, CVector)>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidFamily("family is empty".into()));
        }
        states.sort_by(|a, b| a.0.cmp(&b.0));
        for w in states.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidFamily(format!(
                    "duplicate label '{}'",
                    w[0].0
                )));
            }
        }
        let d = states[0].1.dim();
        if let Some((label, v)) = states.iter().find(|(_, v)| v.dim() != d) {
            return Err(Error::InvalidFamily(format!(
                "state '{label}' has dimension {} (expected {d})",
                v.dim()
            )));
        }
        let (labels, vectors) = states.into_iter().unzip();
        Ok(Self { labels, vectors })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn get(&self, label: &str) -> Option<&CVector> {
        self.index_of(label).map(|i| &self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CVector)> {
        self.labels.iter().map(String::as_str).zip(&self.vectors)
    }

    /// Subfamily keeping the states whose index passes `keep`.
    pub fn retain(&self, mut keep: impl FnMut(usize) -> bool) -> Result<Self> {
        let states = self
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, (l, v))| (l.to_string(), v.clone()))
            .collect();
        Self::unchecked(states)
    }

    /// Applies `f` to every vector, keeping labels.
    pub fn map_vectors(&self, mut f: impl FnMut(usize, &CVector) -> CVector) -> Result<Self> {
        let states = self
            .iter()
            .enumerate()
            .map(|(i, (l, v))| (l.to_string(), f(i, v)))
            .collect();
        Self::unchecked(states)
    }
}

/// A function on the atoms of a statistic, given by its value on each atom in
/// ascending-eigenvalue order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseMap {
    values: Vec<f64>,
}

impl CoarseMap {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn identity(t: &DiscreteStatistic) -> Self {
        Self::new(t.eigenvalues().to_vec())
    }

    /// Builds the map from `(eigenvalue, value)` pairs; every eigenvalue of `t`
    /// must be covered.
    pub fn from_pairs(t: &DiscreteStatistic, pairs: &[(f64, f64)]) -> Result<Self> {
        let f = SpectralFunction::new(pairs.to_vec());
        t.eigenvalues()
            .iter()
            .map(|&l| f.value_at(l).ok_or(Error::MissingEigenvalue(l)))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// Map sending atom `k` to `blocks[k] + 1`.
    pub fn from_blocks(blocks: &[usize]) -> Self {
        Self::new(blocks.iter().map(|&b| (b + 1) as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Coarse-graining `Φ(T) = Σ_k β_k f_k` with `f_k = Σ_{j∈I_k} e_j`.
///
/// Returns the new statistic and the blocks `I_k` of original atom indices,
/// ordered like the new atoms (ascending `β`).
pub fn apply_coarse(
    t: &DiscreteStatistic,
    phi: &CoarseMap,
) -> Result<(DiscreteStatistic, Vec<Vec<usize>>)> {
    if phi.values.len() != t.atom_count() {
        return Err(Error::InvalidStatistic(format!(
            "coarse map has {} values for {} atoms",
            phi.values.len(),
            t.atom_count()
        )));
    }
    if let Some(bad) = phi.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidStatistic(format!(
            "coarse value {bad} is not finite"
        )));
    }
    let mut order: Vec<usize> = (0..t.atom_count()).collect();
    order.sort_by(|&a, &b| phi.values[a].total_cmp(&phi.values[b]).then(a.cmp(&b)));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for k in order {
        let v = phi.values[k];
        if betas.last() == Some(&v) {
            blocks.last_mut().unwrap().push(k);
        } else {
            betas.push(v);
            blocks.push(vec![k]);
        }
    }
    let d = t.dim();
    let projections = blocks
        .iter()
        .map(|b| {
            let mut p = CMatrix::zeros(d, d);
            for &j in b {
                p = &p + t.projection(j).matrix();
            }
            HermitianMatrix::symmetrized(p)
        })
        .collect();
    Ok((DiscreteStatistic::from_parts(betas, projections), blocks))
}

/// `components[k][θ] = e_k φ_θ` and `weights[θ][k] = ‖e_k φ_θ‖²`.
#[derive(Clone, Debug)]
pub struct AtomProjectionTable {
    pub components: Vec<Vec<CVector>>,
    pub weights: Vec<Vec<f64>>,
}

impl AtomProjectionTable {
    pub fn component(&self, atom: usize, state: usize) -> &CVector {
        &self.components[atom][state]
    }

    pub fn weight(&self, state: usize, atom: usize) -> f64 {
        self.weights[state][atom]
    }

    /// Largest deviation of a weight row sum from one.
    pub fn stochastic_defect(&self) -> f64 {
        self.weights
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Atoms that no state loads above `tol`.
    pub fn dead_atoms(&self, tol: f64) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&k| self.weights.iter().all(|row| row[k] <= tol))
            .collect()
    }
}

pub fn project_states(t: &DiscreteStatistic, f: &StateFamily) -> Result<AtomProjectionTable> {
    if t.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: f.dim(),
        });
    }
    let components: Vec<Vec<CVector>> = t
        .projections()
        .iter()
        .map(|p| f.vectors().iter().map(|v| p.matrix().mul_vec(v)).collect())
        .collect();
    let weights = (0..f.len())
        .map(|th| components.iter().map(|row| row[th].norm_sqr()).collect())
        .collect();
    Ok(AtomProjectionTable {
        components,
        weights,
    })
}

/// A real function on a finite set of eigenvalues, stored as sorted
/// `(eigenvalue, value)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    points: Vec<(f64, f64)>,
}

impl SpectralFunction {
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { points }
    }

    /// Function with value `values[k]` on the `k`-th eigenvalue of `t`.
    pub fn on_atoms(t: &DiscreteStatistic, values: &[f64]) -> Self {
        Self::new(
            t.eigenvalues()
                .iter()
                .copied()
                .zip(values.iter().copied())
                .collect(),
        )
    }

    pub fn constant(t: &DiscreteStatistic, value: f64) -> Self {
        Self::new(t.eigenvalues().iter().map(|&l| (l, value)).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value_at(&self, lambda: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(l, _)| eigenvalues_match(*l, lambda))
            .map(|&(_, v)| v)
    }

    /// Values on the atoms of `t`, or the first eigenvalue not covered.
    pub fn values_on(&self, t: &DiscreteStatistic) -> Result<Vec<f64>> {
        t.eigenvalues()
            .iter()
            .map(|&l| self.value_at(l).ok_or(Error::MissingEigenvalue(l)))
            .collect()
    }
}

/// `Φ(T) v = Σ_k Φ(λ_k) e_k v`.
pub fn evaluate_function_on_statistic(
    t: &DiscreteStatistic,
    f: &SpectralFunction,
    v: &CVector,
) -> Result<CVector> {
    if v.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: v.dim(),
        });
    }
    let values = f.values_on(t)?;
    let mut out = CVector::zeros(t.dim());
    for (p, val) in t.projections().iter().zip(values) {
        if val != 0.0 {
            out.axpy(c(val, 0.0), &p.matrix().mul_vec(v));
        }
    }
    Ok(out)
}

/// Rounded projection entries of every atom, for comparing atom structures
/// irrespective of eigenvalues.
pub(crate) fn atom_signature(t: &DiscreteStatistic) -> BTreeSet<Vec<u64>> {
    t.projections()
        .iter()
        .map(|p| {
            p.matrix()
                .data()
                .iter()
                .flat_map(|z| {
                    [
                        (z.re * 1e8).round() as i64 as u64,
                        (z.im * 1e8).round() as i64 as u64,
                    ]
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, Complex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn diag_stat(values: &[f64]) -> DiscreteStatistic {
        DiscreteStatistic::from_matrix(&HermitianMatrix::from_diag(values), None).unwrap()
    }

    fn family(states: &[(&str, &[f64])]) -> StateFamily {
        StateFamily::new(
            states
                .iter()
                .map(|(l, v)| (l.to_string(), CVector::from_real(v).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn statistic_from_diag_pm1() {
        let t = diag_stat(&[1.0, -1.0]);
        assert_eq!(t.eigenvalues(), &[-1.0, 1.0]);
        assert_eq!(t.projection(0).matrix(), &CMatrix::from_diag(&[0.0, 1.0]));
        assert_eq!(t.projection(1).matrix(), &CMatrix::from_diag(&[1.0, 0.0]));
    }

    #[test]
    fn statistic_from_identity_is_one_atom() {
        let t = DiscreteStatistic::from_matrix(&HermitianMatrix::identity(3), None).unwrap();
        assert_eq!(t.atom_count(), 1);
        assert_eq!(t.eigenvalue(0), 1.0);
        assert!(t.projection(0).matrix().max_abs_diff(&CMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn near_degenerate_eigenvalues_are_grouped() {
        let m = HermitianMatrix::from_diag(&[1.0, 1.0 + 1e-12, 5.0]);
        let t = DiscreteStatistic::from_matrix(&m, Some(1e-9)).unwrap();
        assert_eq!(t.atom_count(), 2);
        assert!((t.projection(0).trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_broken_partitions() {
        let e1 = HermitianMatrix::from_diag(&[1.0, 0.0]);
        let e2 = HermitianMatrix::from_diag(&[0.0, 1.0]);
        let err = DiscreteStatistic::new(vec![1.0], vec![e1.clone()]).unwrap_err();
        assert!(err.to_string().contains("sum to the identity"), "{err}");
        let err = DiscreteStatistic::new(vec![1.0, 1.0], vec![e1.clone(), e2.clone()]).unwrap_err();
        assert!(err.to_string().contains("not distinct"), "{err}");
        let half = HermitianMatrix::from_diag(&[0.5, 0.5]);
        let err = DiscreteStatistic::new(vec![1.0, 2.0], vec![half.clone(), half]).unwrap_err();
        assert!(err.to_string().contains("idempotent"), "{err}");
        let ok = DiscreteStatistic::new(vec![2.0, -3.0], vec![e1, e2]).unwrap();
        assert_eq!(ok.eigenvalues(), &[-3.0, 2.0]);
    }

    #[test]
    fn reconstruction_of_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2, 4, 7] {
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = c(rng.random_range(-2.0..2.0), 0.0);
                for j in i + 1..n {
                    let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            let h = HermitianMatrix::new(m.clone()).unwrap();
            let t = DiscreteStatistic::from_matrix(&h, None).unwrap();
            assert_eq!(t.atom_count(), n);
            assert!(t.to_matrix().max_abs_diff(&m) < 1e-8);
        }
    }

    #[test]
    fn coarse_identity_and_constant() {
        let t = diag_stat(&[1.0, 2.0, 3.0]);
        let (u, blocks) = apply_coarse(&t, &CoarseMap::identity(&t)).unwrap();
        assert_eq!(u, t);
        assert_eq!(blocks, vec![vec![0], vec![1], vec![2]]);
        let (u, blocks) = apply_coarse(&t, &CoarseMap::new(vec![4.0; 3])).unwrap();
        assert_eq!(u.atom_count(), 1);
        assert!(u.projection(0).matrix().max_abs_diff(&CMatrix::identity(3)) < 1e-15);
        assert_eq!(blocks, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn coarse_merges_atoms() {
        let t = diag_stat(&[1.0, 2.0, 3.0]);
        let phi = CoarseMap::from_pairs(&t, &[(1.0, 7.0), (2.0, 7.0), (3.0, 9.0)]).unwrap();
        let (u, blocks) = apply_coarse(&t, &phi).unwrap();
        assert_eq!(u.eigenvalues(), &[7.0, 9.0]);
        assert_eq!(blocks, vec![vec![0, 1], vec![2]]);
        assert_eq!(
            u.projection(0).matrix(),
            &CMatrix::from_diag(&[1.0, 1.0, 0.0])
        );
        assert_eq!(
            u.projection(1).matrix(),
            &CMatrix::from_diag(&[0.0, 0.0, 1.0])
        );
        assert!(CoarseMap::from_pairs(&t, &[(1.0, 7.0)]).is_err());
    }

    #[test]
    fn coarse_composition() {
        let t = diag_stat(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let phi = CoarseMap::new(vec![0.0, 1.0, 0.0, 2.0, 1.0]);
        let (u, blocks) = apply_coarse(&t, &phi).unwrap();
        let psi = CoarseMap::new(vec![5.0, 6.0, 5.0]);
        let (twice, _) = apply_coarse(&u, &psi).unwrap();
        // Ψ∘Φ on the atoms of T.
        let mut composed = vec![0.0; 5];
        for (b, block) in blocks.iter().enumerate() {
            for &k in block {
                composed[k] = psi.values()[b];
            }
        }
        let (once, _) = apply_coarse(&t, &CoarseMap::new(composed)).unwrap();
        assert_eq!(atom_signature(&twice), atom_signature(&once));
        assert_eq!(twice.eigenvalues(), once.eigenvalues());
    }

    #[test]
    fn project_states_example() {
        let t = diag_stat(&[1.0, -1.0]);
        let f = family(&[("phi2", &[S, S])]);
        let table = project_states(&t, &f).unwrap();
        // atom 0 is λ = −1 (second coordinate)
        assert!(
            table
                .component(1, 0)
                .distance(&CVector::from_real(&[S, 0.0]).unwrap())
                < 1e-15
        );
        assert!(
            table
                .component(0, 0)
                .distance(&CVector::from_real(&[0.0, S]).unwrap())
                < 1e-15
        );
        assert!((table.weight(0, 0) - 0.5).abs() < 1e-15);
        assert!((table.weight(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn project_eigenvector_has_one_nonzero_row() {
        let t = diag_stat(&[1.0, 2.0, 3.0]);
        let f = family(&[("a", &[0.0, 1.0, 0.0])]);
        let table = project_states(&t, &f).unwrap();
        let nonzero: Vec<usize> = (0..3).filter(|&k| table.weight(0, k) > 0.0).collect();
        assert_eq!(nonzero, vec![1]);
        assert_eq!(table.dead_atoms(1e-12), vec![0, 2]);
    }

    #[test]
    fn project_weights_pythagoras() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = if i == j {
                    c(rng.random_range(-1.0..1.0), 0.0)
                } else {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                };
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let t = DiscreteStatistic::from_matrix(&HermitianMatrix::new(m).unwrap(), None).unwrap();
        let v: Vec<Complex> = (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = StateFamily::normalized(vec![("x".into(), CVector::new(v).unwrap())]).unwrap();
        let table = project_states(&t, &f).unwrap();
        assert!(table.stochastic_defect() < 1e-12);
        // components are mutually orthogonal and sum back to the state
        let mut sum = CVector::zeros(n);
        for k in 0..t.atom_count() {
            sum = &sum + table.component(k, 0);
            for j in k + 1..t.atom_count() {
                assert!(
                    inner(table.component(k, 0), table.component(j, 0))
                        .unwrap()
                        .norm()
                        < 1e-12
                );
            }
        }
        assert!(sum.distance(&f.vectors()[0]) < 1e-12);
    }

    #[test]
    fn evaluate_examples() {
        let t = diag_stat(&[1.0, -1.0]);
        let chi = CVector::from_real(&[S, S]).unwrap();
        let one = SpectralFunction::constant(&t, 1.0);
        assert_eq!(evaluate_function_on_statistic(&t, &one, &chi).unwrap(), chi);
        let t1 = SpectralFunction::new(vec![(1.0, 2f64.sqrt()), (-1.0, 0.0)]);
        let out = evaluate_function_on_statistic(&t, &t1, &chi).unwrap();
        assert!(out.distance(&CVector::basis(2, 0)) < 1e-15);
        let partial = SpectralFunction::new(vec![(1.0, 1.0)]);
        assert!(matches!(
            evaluate_function_on_statistic(&t, &partial, &chi),
            Err(Error::MissingEigenvalue(l)) if l == -1.0
        ));
    }

    #[test]
    fn family_validation() {
        let err = StateFamily::new(vec![(
            "phi1".into(),
            CVector::from_real(&[0.9, 0.0]).unwrap(),
        )])
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "invalid state family: state 'phi1' not unit norm (norm 0.9)"
        );
        let e = CVector::basis(2, 0);
        assert!(StateFamily::new(vec![("a".into(), e.clone()), ("a".into(), e.clone())]).is_err());
        assert!(
            StateFamily::new(vec![("a".into(), e), ("b".into(), CVector::basis(3, 0))]).is_err()
        );
        let f = family(&[("z", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert_eq!(f.labels(), &["b".to_string(), "z".to_string()]);
        assert_eq!(f.index_of("z"), Some(1));
    }
}
