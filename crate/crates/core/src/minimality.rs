//! The relation `j ∼ m` (`γ_j = β γ_m`, `β ≠ 0`) on active atoms, the
//! coarse-graining criterion built on it, and minimal statistics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::harness::Mutation;
use crate::linalg::{self, Complex};
use crate::spectral::{self, CoarseMap, DiscreteStatistic, SpectralFunction, StateFamily};
use crate::sufficiency::{self, GammaTable, SufficiencyVerdict, Tolerances};

/// Largest atom count accepted by [`enumerate_coarse_grainings`].
pub const MAX_ENUMERATED_ATOMS: usize = 9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BetaMode {
    /// Any nonzero complex ratio.
    #[default]
    Complex,
    /// The ratio must also be real, as read off the given table.
    StrictReal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomClasses {
    /// Classes of active atoms, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// `β` with `γ_j = β γ_m` for every tested pair `(j, m)`, `j < m`, in a
    /// common class.
    pub witnesses: BTreeMap<(usize, usize), Complex>,
    /// Largest proportionality residual over all pairs within a class,
    /// including pairs joined only through transitivity.
    pub transitivity_residual: f64,
}

impl AtomClasses {
    pub fn class_of(&self, atom: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&atom))
    }
}

fn row_norm(row: &[Complex]) -> f64 {
    row.iter().map(Complex::norm_sqr).sum::<f64>().sqrt()
}

/// `(β, ‖γ_j − β γ_m‖ / ‖γ_j‖)` with `β` the least-squares ratio.
fn proportionality(gj: &[Complex], gm: &[Complex]) -> (Complex, f64) {
    let nm = gm.iter().map(Complex::norm_sqr).sum::<f64>();
    let beta = gj
        .iter()
        .zip(gm)
        .map(|(a, b)| a * b.conj())
        .sum::<Complex>()
        / nm;
    let res = gj
        .iter()
        .zip(gm)
        .map(|(a, b)| (a - beta * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (beta, res / row_norm(gj))
}

fn related(gj: &[Complex], gm: &[Complex], tol: f64, mode: BetaMode) -> Option<Complex> {
    let (beta, res) = proportionality(gj, gm);
    let real_ok = mode == BetaMode::Complex || beta.im.abs() <= tol * beta.norm();
    (res <= tol && beta.norm() > 0.0 && real_ok).then_some(beta)
}

/// Partitions the active atoms of `g` into `∼` classes.
///
/// Two nonzero rows are related when the relative residual of the best
/// proportional fit is at most `tol`.
pub fn equivalence_classes(g: &GammaTable, tol: f64, mode: BetaMode) -> AtomClasses {
    let active: Vec<usize> = (0..g.atom_count())
        .filter(|&k| g.is_active(k) && row_norm(g.row(k)) > 0.0)
        .collect();
    let mut parent: Vec<usize> = (0..active.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut witnesses = BTreeMap::new();
    for a in 0..active.len() {
        for b in a + 1..active.len() {
            let (j, m) = (active[a], active[b]);
            if let Some(beta) = related(g.row(j), g.row(m), tol, mode) {
                witnesses.insert((j, m), beta);
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &k) in active.iter().enumerate() {
        let r = root(&mut parent, i);
        grouped.entry(r).or_default().push(k);
    }
    let mut classes: Vec<Vec<usize>> = grouped.into_values().collect();
    classes.sort_by_key(|c| c[0]);

    let mut transitivity_residual: f64 = 0.0;
    for class in &classes {
        for (i, &j) in class.iter().enumerate() {
            for &m in &class[i + 1..] {
                transitivity_residual =
                    transitivity_residual.max(proportionality(g.row(j), g.row(m)).1);
            }
        }
    }
    AtomClasses {
        classes,
        witnesses,
        transitivity_residual,
    }
}

fn sufficient_table(
    t: &DiscreteStatistic,
    f: &StateFamily,
    tol: &Tolerances,
    mutation: Option<Mutation>,
) -> Result<(SufficiencyVerdict, GammaTable)> {
    let verdict = sufficiency::check_with(t, f, tol, mutation)?;
    if !verdict.sufficient() {
        return Err(Error::NotWeaklySufficient);
    }
    let table = verdict
        .gamma
        .clone()
        .expect("sufficient verdicts carry a table");
    Ok((verdict, table))
}

/// Decides whether the coarse-graining `Φ(T)` is weakly sufficient, given that
/// `T` is: every block of merged atoms must consist of mutually related active
/// atoms (inactive atoms merge freely).
pub fn check_coarse_sufficient(
    t: &DiscreteStatistic,
    f: &StateFamily,
    phi: &CoarseMap,
    tol: &Tolerances,
    mode: BetaMode,
) -> Result<bool> {
    check_coarse_with(t, f, phi, tol, mode, None)
}

pub(crate) fn check_coarse_with(
    t: &DiscreteStatistic,
    f: &StateFamily,
    phi: &CoarseMap,
    tol: &Tolerances,
    mode: BetaMode,
    mutation: Option<Mutation>,
) -> Result<bool> {
    let (_, table) = sufficient_table(t, f, tol, mutation)?;
    let classes = equivalence_classes(&table, tol.rank, mode);
    let (_, blocks) = spectral::apply_coarse(t, phi)?;
    Ok(blocks.iter().all(|block| {
        let mut seen = block.iter().filter_map(|&k| classes.class_of(k));
        match seen.next() {
            Some(first) => seen.all(|c| c == first),
            None => true,
        }
    }))
}

#[derive(Clone, Debug)]
pub enum MinimalResult {
    /// `S = Σ_m m q_m` with `q_m` the sum of the atoms in the `m`-th class.
    Minimal {
        statistic: DiscreteStatistic,
        classes: AtomClasses,
    },
    /// Atom `dead_atom` carries no state, so no minimal statistic exists.
    NoMinimalExists { dead_atom: usize, eigenvalue: f64 },
}

/// Minimal weakly sufficient statistic among the functions of `T`.
pub fn minimal_statistic(
    t: &DiscreteStatistic,
    f: &StateFamily,
    tol: &Tolerances,
    mode: BetaMode,
) -> Result<MinimalResult> {
    minimal_with(t, f, tol, mode, None)
}

pub(crate) fn minimal_with(
    t: &DiscreteStatistic,
    f: &StateFamily,
    tol: &Tolerances,
    mode: BetaMode,
    mutation: Option<Mutation>,
) -> Result<MinimalResult> {
    let rank = linalg::numerical_rank(f.vectors(), tol.rank)?;
    if rank < 2 {
        return Err(Error::TrivialFamily(rank));
    }
    let (_, table) = sufficient_table(t, f, tol, mutation)?;
    if let Some(k) = (0..table.atom_count()).find(|&k| !table.is_active(k)) {
        return Ok(MinimalResult::NoMinimalExists {
            dead_atom: k,
            eigenvalue: t.eigenvalue(k),
        });
    }
    let classes = equivalence_classes(&table, tol.rank, mode);
    let mut values = vec![0.0; t.atom_count()];
    for (m, class) in classes.classes.iter().enumerate() {
        for &k in class {
            values[k] = (m + 1) as f64;
        }
    }
    let (statistic, _) = spectral::apply_coarse(t, &CoarseMap::new(values))?;
    Ok(MinimalResult::Minimal { statistic, classes })
}

/// Returns `Ψ` with `S = Ψ(U)` when every atom of `U` lies under exactly one
/// atom of `S` (`‖q f − f‖ ≤ tol` entrywise).
pub fn is_function_of(
    s: &DiscreteStatistic,
    u: &DiscreteStatistic,
    tol: f64,
) -> Option<SpectralFunction> {
    if s.dim() != u.dim() {
        return None;
    }
    let mut points = Vec::with_capacity(u.atom_count());
    for (lf, pf) in u.eigenvalues().iter().zip(u.projections()) {
        let mut owners = s
            .eigenvalues()
            .iter()
            .zip(s.projections())
            .filter(|(_, q)| q.matrix().matmul(pf.matrix()).max_abs_diff(pf.matrix()) <= tol);
        let (&lq, _) = owners.next()?;
        if owners.next().is_some() {
            return None;
        }
        points.push((*lf, lq));
    }
    Some(SpectralFunction::new(points))
}

/// All set partitions of the atoms of a statistic, as coarse maps with block
/// values `1..=#blocks`.
#[derive(Clone, Debug)]
pub struct CoarseGrainings {
    rgs: Vec<usize>,
    done: bool,
}

impl Iterator for CoarseGrainings {
    type Item = CoarseMap;

    fn next(&mut self) -> Option<CoarseMap> {
        if self.done {
            return None;
        }
        let out = CoarseMap::from_blocks(&self.rgs);
        // next restricted growth string
        let n = self.rgs.len();
        let mut prefix_max = vec![0; n];
        for i in 1..n {
            prefix_max[i] = prefix_max[i - 1].max(self.rgs[i - 1]);
        }
        match (1..n).rev().find(|&i| self.rgs[i] <= prefix_max[i]) {
            Some(i) => {
                self.rgs[i] += 1;
                self.rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
            }
            None => self.done = true,
        }
        Some(out)
    }
}

pub fn enumerate_coarse_grainings(
    t: &DiscreteStatistic,
    max_atoms: usize,
) -> Result<CoarseGrainings> {
    let n = t.atom_count();
    if n > max_atoms.min(MAX_ENUMERATED_ATOMS) {
        return Err(Error::TooLarge(format!(
            "{n} atoms exceeds the enumeration limit of {}",
            max_atoms.min(MAX_ENUMERATED_ATOMS)
        )));
    }
    Ok(CoarseGrainings {
        rgs: vec![0; n],
        done: false,
    })
}

/// `T_n = λ_n (e_dead + e_n) + Σ_{k ∉ {dead, n}} λ_k e_k` for every `n ≠ dead`.
pub fn dead_atom_variants(t: &DiscreteStatistic, dead: usize) -> Result<Vec<DiscreteStatistic>> {
    if dead >= t.atom_count() {
        return Err(Error::InvalidStatistic(format!("no atom {dead}")));
    }
    (0..t.atom_count())
        .filter(|&n| n != dead)
        .map(|n| {
            let mut values = t.eigenvalues().to_vec();
            values[dead] = t.eigenvalue(n);
            spectral::apply_coarse(t, &CoarseMap::new(values)).map(|(s, _)| s)
        })
        .collect()
}

/// A table with rows `γ_k` given directly.
#[cfg(test)]
fn table_from_rows(labels: Vec<String>, rows: Vec<Vec<Complex>>) -> GammaTable {
    let xi = rows
        .iter()
        .map(|r| (r.iter().any(|z| *z != linalg::ZERO)).then(|| linalg::CVector::basis(1, 0)))
        .collect();
    GammaTable {
        labels,
        xi,
        gamma: rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVector, HermitianMatrix, ZERO};
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn table(rows: &[&[Complex]]) -> GammaTable {
        let labels = (0..rows[0].len()).map(|i| format!("s{i}")).collect();
        table_from_rows(labels, rows.iter().map(|r| r.to_vec()).collect())
    }

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

    fn three_atom_case() -> (DiscreteStatistic, StateFamily) {
        (
            diag_stat(&[1.0, 2.0, 3.0]),
            family(&[("phi1", &[1.0, 1.0, 0.0]), ("phi2", &[0.0, 0.0, 1.0])]),
        )
    }

    #[test]
    fn scalar_multiple_rows_are_related() {
        let g = table(&[&[c(1.0, 0.0), ZERO], &[c(2.0, 0.0), ZERO]]);
        let cls = equivalence_classes(&g, 1e-8, BetaMode::Complex);
        assert_eq!(cls.classes, vec![vec![0, 1]]);
        assert!((cls.witnesses[&(0, 1)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_rows_are_not_related() {
        let g = table(&[&[c(1.0, 0.0), ZERO], &[ZERO, c(1.0, 0.0)]]);
        let cls = equivalence_classes(&g, 1e-8, BetaMode::Complex);
        assert_eq!(cls.classes, vec![vec![0], vec![1]]);
        assert!(cls.witnesses.is_empty());
    }

    #[test]
    fn complex_ratio_accepted_unless_strict() {
        let g = table(&[&[c(S, 0.0), c(S, 0.0)], &[c(0.0, S), c(0.0, S)]]);
        let cls = equivalence_classes(&g, 1e-8, BetaMode::Complex);
        assert_eq!(cls.classes, vec![vec![0, 1]]);
        assert!((cls.witnesses[&(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
        let strict = equivalence_classes(&g, 1e-8, BetaMode::StrictReal);
        assert_eq!(strict.classes, vec![vec![0], vec![1]]);
    }

    #[test]
    fn zero_rows_are_excluded() {
        let g = table(&[&[ZERO, ZERO], &[c(1.0, 0.0), ZERO]]);
        let cls = equivalence_classes(&g, 1e-8, BetaMode::Complex);
        assert_eq!(cls.classes, vec![vec![1]]);
    }

    #[test]
    fn transitive_closure_is_reverified() {
        let g = table(&[
            &[c(1.0, 0.0), c(1.0, 0.0)],
            &[c(2.0, 0.0), c(2.0, 0.0)],
            &[c(0.0, 3.0), c(0.0, 3.0)],
        ]);
        let cls = equivalence_classes(&g, 1e-8, BetaMode::Complex);
        assert_eq!(cls.classes, vec![vec![0, 1, 2]]);
        assert!(cls.transitivity_residual < 1e-15);
    }

    #[test]
    fn coarse_identity_is_sufficient() {
        let (t, f) = three_atom_case();
        let tol = Tolerances::default();
        assert!(
            check_coarse_sufficient(&t, &f, &CoarseMap::identity(&t), &tol, BetaMode::Complex)
                .unwrap()
        );
    }

    #[test]
    fn merging_proportional_atoms_is_sufficient() {
        let (t, f) = three_atom_case();
        let tol = Tolerances::default();
        let merge12 = CoarseMap::from_blocks(&[0, 0, 1]);
        assert!(check_coarse_sufficient(&t, &f, &merge12, &tol, BetaMode::Complex).unwrap());
        let merge23 = CoarseMap::from_blocks(&[0, 1, 1]);
        assert!(!check_coarse_sufficient(&t, &f, &merge23, &tol, BetaMode::Complex).unwrap());
        // oracle: the direct checker on the merged statistics
        for (phi, expect) in [(merge12, true), (CoarseMap::from_blocks(&[0, 1, 1]), false)] {
            let (u, _) = spectral::apply_coarse(&t, &phi).unwrap();
            assert_eq!(
                sufficiency::check_weak_sufficiency(&u, &f, &tol)
                    .unwrap()
                    .sufficient(),
                expect
            );
        }
    }

    #[test]
    fn coarse_check_requires_sufficient_base() {
        let t = diag_stat(&[1.0, 1.0, 2.0]);
        let f = family(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0])]);
        let err = check_coarse_sufficient(
            &t,
            &f,
            &CoarseMap::identity(&t),
            &Tolerances::default(),
            BetaMode::Complex,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotWeaklySufficient));
    }

    #[test]
    fn minimal_statistic_merges_classes() {
        let (t, f) = three_atom_case();
        let MinimalResult::Minimal { statistic, classes } =
            minimal_statistic(&t, &f, &Tolerances::default(), BetaMode::Complex).unwrap()
        else {
            panic!("expected a minimal statistic");
        };
        assert_eq!(classes.classes, vec![vec![0, 1], vec![2]]);
        assert_eq!(statistic.eigenvalues(), &[1.0, 2.0]);
        let q1 = HermitianMatrix::from_diag(&[1.0, 1.0, 0.0]);
        assert!(statistic.projection(0).matrix().max_abs_diff(q1.matrix()) < 1e-15);
        assert!(
            sufficiency::check_weak_sufficiency(&statistic, &f, &Tolerances::default())
                .unwrap()
                .sufficient()
        );
    }

    #[test]
    fn minimal_statistic_keeps_distinct_atoms() {
        let t = diag_stat(&[5.0, 7.0]);
        let f = family(&[("a", &[1.0, 0.0]), ("b", &[1.0, 1.0])]);
        let MinimalResult::Minimal { statistic, .. } =
            minimal_statistic(&t, &f, &Tolerances::default(), BetaMode::Complex).unwrap()
        else {
            panic!("expected a minimal statistic");
        };
        assert_eq!(statistic.eigenvalues(), &[1.0, 2.0]);
        assert_eq!(
            spectral::atom_signature(&statistic),
            spectral::atom_signature(&t)
        );
    }

    #[test]
    fn dead_atom_blocks_minimality() {
        let t = diag_stat(&[1.0, 2.0, 3.0]);
        let f = family(&[("phi1", &[0.0, 1.0, 0.0]), ("phi2", &[0.0, 0.0, 1.0])]);
        match minimal_statistic(&t, &f, &Tolerances::default(), BetaMode::Complex).unwrap() {
            MinimalResult::NoMinimalExists {
                dead_atom,
                eigenvalue,
            } => {
                assert_eq!(dead_atom, 0);
                assert_eq!(eigenvalue, 1.0);
            }
            MinimalResult::Minimal { .. } => panic!("dead atom ignored"),
        }
        let variants = dead_atom_variants(&t, 0).unwrap();
        assert_eq!(variants.len(), 2);
        assert_eq!(variants[0].eigenvalues(), &[2.0, 3.0]);
        let p = HermitianMatrix::from_diag(&[1.0, 1.0, 0.0]);
        assert!(variants[0].projection(0).matrix().max_abs_diff(p.matrix()) < 1e-15);
        for v in &variants {
            assert!(
                sufficiency::check_weak_sufficiency(v, &f, &Tolerances::default())
                    .unwrap()
                    .sufficient()
            );
        }
    }

    #[test]
    fn trivial_family_is_rejected() {
        let t = diag_stat(&[1.0, 2.0]);
        let f = family(&[("a", &[1.0, 1.0]), ("b", &[-1.0, -1.0])]);
        assert!(matches!(
            minimal_statistic(&t, &f, &Tolerances::default(), BetaMode::Complex),
            Err(Error::TrivialFamily(1))
        ));
    }

    #[test]
    fn function_of_examples() {
        let u = diag_stat(&[3.0, 4.0, 5.0]);
        let s = DiscreteStatistic::new(
            vec![1.0, 2.0],
            vec![
                HermitianMatrix::from_diag(&[1.0, 1.0, 0.0]),
                HermitianMatrix::from_diag(&[0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let psi = is_function_of(&s, &u, 1e-9).unwrap();
        assert_eq!(psi.points(), &[(3.0, 1.0), (4.0, 1.0), (5.0, 2.0)]);

        let id = is_function_of(&u, &u, 1e-9).unwrap();
        assert_eq!(id.points(), &[(3.0, 3.0), (4.0, 4.0), (5.0, 5.0)]);

        let s2 = DiscreteStatistic::new(
            vec![1.0, 2.0],
            vec![
                HermitianMatrix::from_diag(&[1.0, 0.0, 0.0]),
                HermitianMatrix::from_diag(&[0.0, 1.0, 1.0]),
            ],
        )
        .unwrap();
        let u2 = DiscreteStatistic::new(
            vec![3.0, 5.0],
            vec![
                HermitianMatrix::from_diag(&[1.0, 1.0, 0.0]),
                HermitianMatrix::from_diag(&[0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        assert!(is_function_of(&s2, &u2, 1e-9).is_none());
    }

    fn bell(n: usize) -> usize {
        // Bell triangle
        let mut row = vec![1usize];
        for _ in 1..n {
            let mut next = vec![*row.last().unwrap()];
            for &x in &row {
                next.push(next.last().unwrap() + x);
            }
            row = next;
        }
        *row.last().unwrap()
    }

    #[test]
    fn partition_counts_are_bell_numbers() {
        for n in 1..=7 {
            let values: Vec<f64> = (1..=n).map(|x| x as f64).collect();
            let t = diag_stat(&values);
            let maps: Vec<CoarseMap> = enumerate_coarse_grainings(&t, 9).unwrap().collect();
            assert_eq!(maps.len(), bell(n), "n = {n}");
            let distinct: std::collections::BTreeSet<Vec<u64>> = maps
                .iter()
                .map(|m| m.values().iter().map(|v| *v as u64).collect())
                .collect();
            assert_eq!(distinct.len(), maps.len());
        }
        assert_eq!(bell(3), 5);
        assert_eq!(bell(4), 15);
    }

    #[test]
    fn enumeration_guard() {
        let t = diag_stat(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert!(matches!(
            enumerate_coarse_grainings(&t, 12),
            Err(Error::TooLarge(_))
        ));
        let small = diag_stat(&[1.0, 2.0, 3.0]);
        assert!(enumerate_coarse_grainings(&small, 2).is_err());
    }
}
