//! Constraint matrices `A` (one row per inequality `row · θ ≥ 0`), builders
//! for the common shapes, irreducibility certification, and the weight
//! transform that yields the polar-cone edges.
//!
//! Domain and row indices are 0-based throughout the API. The constraint
//! file format (see [`ConstraintSpec`]) uses 1-based domain ids.

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone;
use crate::error::{Error, Result};

/// Residual threshold for the positive-combination tests, relative to `1 + ‖row‖`.
pub const IRREDUCIBLE_TOL: f64 = 1e-8;

/// An `m x D` matrix of linear inequality constraints `A θ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    rows: DMatrix<f64>,
}

impl ConstraintMatrix {
    pub fn from_matrix(rows: DMatrix<f64>) -> Result<Self> {
        let (m, d) = rows.shape();
        if m == 0 {
            return Err(Error::NoConstraints);
        }
        if d < 2 {
            return Err(Error::InvalidMatrix(format!("need at least 2 domains, got {d}")));
        }
        if let Some(v) = rows.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {v}")));
        }
        for i in 0..m {
            if rows.row(i).iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidMatrix(format!("row {} is zero", i + 1)));
            }
        }
        Ok(ConstraintMatrix { rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::NoConstraints);
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::from_matrix(DMatrix::from_fn(m, d, |i, j| rows[i][j]))
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_domains(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_constraints()).map(|i| self.rows.row(i).iter().copied().collect()).collect()
    }

    /// Whether every row sums to zero (constant vectors lie on the cone boundary).
    pub fn rows_sum_to_zero(&self) -> bool {
        (0..self.n_constraints()).all(|i| {
            let row = self.rows.row(i);
            row.sum().abs() <= 1e-12 * row.abs().sum()
        })
    }

    /// `A θ`.
    pub fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.rows * theta
    }

    /// Interprets each row as an order relation `θ_lower ≤ θ_upper`: exactly
    /// two nonzero entries of equal magnitude and opposite sign.
    pub fn order_pairs(&self) -> Option<Vec<(usize, usize)>> {
        let mut pairs = Vec::with_capacity(self.n_constraints());
        for i in 0..self.n_constraints() {
            let nz: Vec<(usize, f64)> = self
                .rows
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect();
            if nz.len() != 2 || nz[0].1 != -nz[1].1 {
                return None;
            }
            let (lower, upper) = if nz[0].1 < 0.0 { (nz[0].0, nz[1].0) } else { (nz[1].0, nz[0].0) };
            pairs.push((lower, upper));
        }
        Some(pairs)
    }

    /// Runs [`check_irreducible`] and wraps the matrix on success.
    pub fn certify(self) -> std::result::Result<IrreducibleConstraints, ReducibilityWitness> {
        match check_irreducible(&self) {
            Irreducibility::Irreducible => Ok(IrreducibleConstraints(self)),
            Irreducibility::Reducible(w) => Err(w),
        }
    }
}

/// A constraint matrix that has passed [`check_irreducible`].
#[derive(Debug, Clone, PartialEq)]
pub struct IrreducibleConstraints(ConstraintMatrix);

impl IrreducibleConstraints {
    pub fn into_inner(self) -> ConstraintMatrix {
        self.0
    }
}

impl Deref for IrreducibleConstraints {
    type Target = ConstraintMatrix;

    fn deref(&self) -> &ConstraintMatrix {
        &self.0
    }
}

/// Factor sizes of a cross-classification. Domains are flattened row-major:
/// the last factor varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainGrid {
    sizes: Vec<usize>,
}

impl DomainGrid {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidGrid("no factors".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidGrid(format!("zero factor size in {sizes:?}")));
        }
        Ok(DomainGrid { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_domains(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn flatten(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.sizes.len());
        levels.iter().zip(&self.sizes).fold(0, |acc, (&l, &s)| {
            debug_assert!(l < s);
            acc * s + l
        })
    }

    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.sizes.len()];
        for (slot, &s) in levels.iter_mut().zip(&self.sizes).rev() {
            *slot = index % s;
            index /= s;
        }
        levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisOrder {
    pub axis: usize,
    pub direction: Direction,
}

impl AxisOrder {
    pub fn increasing(axis: usize) -> Self {
        AxisOrder { axis, direction: Direction::Increasing }
    }
}

/// Monotonicity along each listed axis, holding the other factors fixed.
/// One row per adjacent pair of levels; for an increasing axis the row has
/// `-1` at the lower level and `+1` at the upper.
pub fn build_monotone(grid: &DomainGrid, axes: &[AxisOrder]) -> Result<ConstraintMatrix> {
    if axes.is_empty() {
        return Err(Error::NoConstraints);
    }
    let p = grid.sizes().len();
    let mut seen = HashSet::new();
    for ax in axes {
        if ax.axis >= p {
            return Err(Error::InvalidGrid(format!("axis {} out of range for {p} factors", ax.axis)));
        }
        if grid.sizes()[ax.axis] < 2 {
            return Err(Error::InvalidGrid(format!("axis {} has fewer than 2 levels", ax.axis)));
        }
        if !seen.insert(ax.axis) {
            return Err(Error::InvalidGrid(format!("axis {} listed twice", ax.axis)));
        }
    }

    let d = grid.n_domains();
    let mut rows = Vec::new();
    for ax in axes {
        let sign = match ax.direction {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        };
        for lower in 0..d {
            let mut levels = grid.unflatten(lower);
            if levels[ax.axis] + 1 >= grid.sizes()[ax.axis] {
                continue;
            }
            levels[ax.axis] += 1;
            let upper = grid.flatten(&levels);
            let mut row = vec![0.0; d];
            row[lower] = -sign;
            row[upper] = sign;
            rows.push(row);
        }
    }
    ConstraintMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeDirection {
    RootSmallest,
    RootLargest,
}

/// `θ_root ≤ θ_d` (or `≥`) for every other domain, rows in increasing `d`.
pub fn build_tree_order(n_domains: usize, root: usize, direction: TreeDirection) -> Result<ConstraintMatrix> {
    if n_domains < 2 {
        return Err(Error::InvalidMatrix(format!("tree order needs at least 2 domains, got {n_domains}")));
    }
    if root >= n_domains {
        return Err(Error::InvalidMatrix(format!("root {} out of range", root + 1)));
    }
    let sign = match direction {
        TreeDirection::RootSmallest => 1.0,
        TreeDirection::RootLargest => -1.0,
    };
    let rows: Vec<Vec<f64>> = (0..n_domains)
        .filter(|&d| d != root)
        .map(|d| {
            let mut row = vec![0.0; n_domains];
            row[root] = -sign;
            row[d] = sign;
            row
        })
        .collect();
    ConstraintMatrix::from_rows(&rows)
}

/// One row `θ_lower ≤ θ_upper` per pair.
pub fn build_partial_order(pairs: &[(usize, usize)], n_domains: usize) -> Result<ConstraintMatrix> {
    if pairs.is_empty() {
        return Err(Error::NoConstraints);
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(pairs.len());
    for &(lower, upper) in pairs {
        if lower >= n_domains || upper >= n_domains {
            return Err(Error::InvalidMatrix(format!(
                "pair ({}, {}) out of range for {n_domains} domains",
                lower + 1,
                upper + 1
            )));
        }
        if lower == upper {
            return Err(Error::InvalidMatrix(format!("self-pair ({}, {})", lower + 1, upper + 1)));
        }
        if !seen.insert((lower, upper)) {
            return Err(Error::DuplicatePair { lower: lower + 1, upper: upper + 1 });
        }
        let mut row = vec![0.0; n_domains];
        row[lower] = -1.0;
        row[upper] = 1.0;
        rows.push(row);
    }
    ConstraintMatrix::from_rows(&rows)
}

/// Drops every pair implied by the others through transitivity, keeping the
/// covering relations in their original order. Duplicates collapse to one.
/// The result builds an irreducible matrix whenever the order is acyclic.
pub fn transitive_reduction(pairs: &[(usize, usize)], n_domains: usize) -> Result<Vec<(usize, usize)>> {
    let mut reach = vec![vec![false; n_domains]; n_domains];
    for &(lo, hi) in pairs {
        if lo >= n_domains || hi >= n_domains {
            return Err(Error::InvalidMatrix(format!(
                "pair ({}, {}) out of range for {n_domains} domains",
                lo + 1,
                hi + 1
            )));
        }
        reach[lo][hi] = true;
    }
    for k in 0..n_domains {
        for i in 0..n_domains {
            if reach[i][k] {
                let via = reach[k].clone();
                for (r, v) in reach[i].iter_mut().zip(via) {
                    *r |= v;
                }
            }
        }
    }
    if let Some(d) = (0..n_domains).find(|&d| reach[d][d]) {
        return Err(Error::CyclicOrder(d + 1));
    }
    let mut kept = Vec::new();
    let mut seen = HashSet::new();
    for &(lo, hi) in pairs {
        let implied = (0..n_domains).any(|k| k != lo && k != hi && reach[lo][k] && reach[k][hi]);
        if !implied && seen.insert((lo, hi)) {
            kept.push((lo, hi));
        }
    }
    Ok(kept)
}

/// Why a matrix is reducible. Indices are 0-based rows.
#[derive(Debug, Clone, PartialEq)]
pub enum ReducibilityWitness {
    /// `row = Σ coefficient · other_row`.
    RowCombination { row: usize, coefficients: Vec<(usize, f64)> },
    /// `0 = Σ coefficient · row`, coefficients summing to one.
    OriginCombination { coefficients: Vec<(usize, f64)> },
}

impl ReducibilityWitness {
    /// The row to blame: the redundant row, or the first row in an origin combination.
    pub fn row(&self) -> usize {
        match self {
            ReducibilityWitness::RowCombination { row, .. } => *row,
            ReducibilityWitness::OriginCombination { coefficients } => coefficients.first().map_or(0, |c| c.0),
        }
    }
}

impl fmt::Display for ReducibilityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = |cs: &[(usize, f64)]| {
            cs.iter().map(|(j, a)| format!("{a:.6}*row{}", j + 1)).collect::<Vec<_>>().join(" + ")
        };
        match self {
            ReducibilityWitness::RowCombination { row, coefficients } => {
                write!(f, "row {} = {}", row + 1, terms(coefficients))
            }
            ReducibilityWitness::OriginCombination { coefficients } => {
                write!(f, "0 = {}", terms(coefficients))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Irreducibility {
    Irreducible,
    Reducible(ReducibilityWitness),
}

impl Irreducibility {
    pub fn is_irreducible(&self) -> bool {
        matches!(self, Irreducibility::Irreducible)
    }
}

/// Certifies that no row is a nonnegative combination of the others and
/// that the origin is not a nontrivial nonnegative combination of the rows.
///
/// Each question is a nonnegative least-squares fit solved with the cone
/// projection; a fit residual below `1e-8 (1 + ‖target‖)` counts as exact.
pub fn check_irreducible(a: &ConstraintMatrix) -> Irreducibility {
    let m = a.n_constraints();
    let d = a.n_domains();
    let support = |coefs: &DVector<f64>, map: &dyn Fn(usize) -> usize| -> Vec<(usize, f64)> {
        coefs.iter().enumerate().filter(|(_, &c)| c > 0.0).map(|(k, &c)| (map(k), c)).collect()
    };

    for i in 0..m {
        let target = a.row(i);
        if m == 1 {
            break;
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let gens = DMatrix::from_fn(d, m - 1, |r, k| a.matrix()[(others[k], r)]);
        let fit = cone::project_generated(&target, &gens).expect("active set terminates on finite edge sets");
        let residual = (&target - &fit.rho).norm();
        if residual < IRREDUCIBLE_TOL * (1.0 + target.norm()) {
            let coefficients = support(&fit.coefficient_vector(m - 1), &|k| others[k]);
            return Irreducibility::Reducible(ReducibilityWitness::RowCombination { row: i, coefficients });
        }
    }

    // Origin test on unit-normalised rows augmented with a sum-to-one coordinate.
    let norms: Vec<f64> = (0..m).map(|i| a.matrix().row(i).norm()).collect();
    let gens = DMatrix::from_fn(d + 1, m, |r, j| if r < d { a.matrix()[(j, r)] / norms[j] } else { 1.0 });
    let mut target = DVector::zeros(d + 1);
    target[d] = 1.0;
    let fit = cone::project_generated(&target, &gens).expect("active set terminates on finite edge sets");
    if (&target - &fit.rho).norm() < IRREDUCIBLE_TOL * 2.0 {
        let raw = fit.coefficient_vector(m);
        let scaled: Vec<f64> = raw.iter().zip(&norms).map(|(c, n)| c / n).collect();
        let total: f64 = scaled.iter().sum();
        let coefficients =
            scaled.iter().enumerate().filter(|(_, &c)| c > 0.0).map(|(j, &c)| (j, c / total)).collect();
        return Irreducibility::Reducible(ReducibilityWitness::OriginCombination { coefficients });
    }
    Irreducibility::Irreducible
}

/// Edges `γ_j` of the polar cone, stored as the columns of a `D x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarEdgeSet {
    generators: DMatrix<f64>,
}

impl PolarEdgeSet {
    /// Edges from the columns of `generators`; every column must be nonzero.
    pub fn from_columns(generators: DMatrix<f64>) -> Result<Self> {
        if generators.ncols() == 0 {
            return Err(Error::NoConstraints);
        }
        for j in 0..generators.ncols() {
            if generators.column(j).iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidMatrix(format!("edge {} is zero", j + 1)));
            }
        }
        Ok(PolarEdgeSet { generators })
    }

    /// Negated rows of `a`.
    pub fn from_constraints(a: &ConstraintMatrix) -> Self {
        PolarEdgeSet { generators: -a.matrix().transpose() }
    }

    pub fn len(&self) -> usize {
        self.generators.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.generators.nrows()
    }

    pub fn edge(&self, j: usize) -> DVector<f64> {
        self.generators.column(j).into_owned()
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }
}

/// `A_s = A diag(w)^{-1/2}` and its polar edges `-rows(A_s)`.
pub fn transform_by_weights(a: &ConstraintMatrix, weights: &DVector<f64>) -> Result<(ConstraintMatrix, PolarEdgeSet)> {
    check_weights(weights, a.n_domains())?;
    let inv_sqrt: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let scaled = DMatrix::from_fn(a.n_constraints(), a.n_domains(), |i, j| a.matrix()[(i, j)] * inv_sqrt[j]);
    let edges = PolarEdgeSet { generators: -scaled.transpose() };
    Ok((ConstraintMatrix { rows: scaled }, edges))
}

pub(crate) fn check_weights(weights: &DVector<f64>, expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: weights.len() });
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveWeight { index, value });
        }
    }
    Ok(())
}

/// Constraint specification file. Domain ids in `pairs` and `tree.root`
/// are 1-based; `monotone[].axis` is a 0-based index into `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintSpec {
    Monotone {
        grid: Vec<usize>,
        monotone: Vec<AxisOrder>,
    },
    Tree {
        tree: TreeSpec,
    },
    Pairs {
        pairs: Vec<[usize; 2]>,
        #[serde(rename = "D")]
        n_domains: usize,
    },
    Matrix {
        matrix: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    #[serde(rename = "D")]
    pub n_domains: usize,
    pub root: usize,
    pub direction: TreeDirection,
}

impl ConstraintSpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Builds the matrix without certifying it.
    pub fn build(&self) -> Result<ConstraintMatrix> {
        match self {
            ConstraintSpec::Monotone { grid, monotone } => build_monotone(&DomainGrid::new(grid.clone())?, monotone),
            ConstraintSpec::Tree { tree } => {
                if tree.root == 0 {
                    return Err(Error::InvalidMatrix("domain ids are 1-based".into()));
                }
                build_tree_order(tree.n_domains, tree.root - 1, tree.direction)
            }
            ConstraintSpec::Pairs { pairs, n_domains } => {
                if pairs.iter().flatten().any(|&v| v == 0) {
                    return Err(Error::InvalidMatrix("domain ids are 1-based".into()));
                }
                let zero_based: Vec<(usize, usize)> = pairs.iter().map(|p| (p[0] - 1, p[1] - 1)).collect();
                build_partial_order(&zero_based, *n_domains)
            }
            ConstraintSpec::Matrix { matrix } => ConstraintMatrix::from_rows(matrix),
        }
    }

    /// Builds and certifies; a reducible matrix is an error naming the witness.
    pub fn build_certified(&self) -> Result<IrreducibleConstraints> {
        self.build()?.certify().map_err(Error::Reducible)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn salary_pairs() -> Vec<(usize, usize)> {
        // Domains ordered (11, 21, 12, 22, 13, 23): position varies fastest.
        vec![(0, 1), (2, 3), (4, 5), (0, 4), (2, 4), (1, 5), (3, 5)]
    }

    fn salary_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            7,
            6,
            &[
                -1., 1., 0., 0., 0., 0., //
                0., 0., -1., 1., 0., 0., //
                0., 0., 0., 0., -1., 1., //
                -1., 0., 0., 0., 1., 0., //
                0., 0., -1., 0., 1., 0., //
                0., -1., 0., 0., 0., 1., //
                0., 0., 0., -1., 0., 1.,
            ],
        )
    }

    #[test]
    fn grid_flattening_is_row_major() {
        let g = DomainGrid::new(vec![2, 3]).unwrap();
        assert_eq!(g.flatten(&[0, 2]), 2);
        assert_eq!(g.flatten(&[1, 0]), 3);
        for i in 0..6 {
            assert_eq!(g.flatten(&g.unflatten(i)), i);
        }
    }

    #[test]
    fn monotone_on_position_gives_first_rows_of_salary_matrix() {
        // Grid listed as (department, position) so position is the fastest factor.
        let g = DomainGrid::new(vec![3, 2]).unwrap();
        let a = build_monotone(&g, &[AxisOrder::increasing(1)]).unwrap();
        assert_eq!(a.n_constraints(), 3);
        assert_eq!(a.matrix(), &salary_matrix().rows(0, 3).into_owned());
    }

    #[test]
    fn smallest_monotone_instance() {
        let g = DomainGrid::new(vec![2]).unwrap();
        let a = build_monotone(&g, &[AxisOrder::increasing(0)]).unwrap();
        assert_eq!(a.to_rows(), vec![vec![-1.0, 1.0]]);
    }

    #[test]
    fn double_monotone_six_by_four_has_38_zero_sum_rows() {
        let g = DomainGrid::new(vec![6, 4]).unwrap();
        let a = build_monotone(&g, &[AxisOrder::increasing(0), AxisOrder::increasing(1)]).unwrap();
        // adjacent pairs by enumeration
        let mut count = 0;
        for i in 0..6 {
            for j in 0..4 {
                count += usize::from(i + 1 < 6) + usize::from(j + 1 < 4);
            }
        }
        assert_eq!(count, 38);
        assert_eq!(a.n_constraints(), 38);
        assert!(a.rows_sum_to_zero());
        assert!(check_irreducible(&a).is_irreducible());
    }

    #[test]
    fn decreasing_axis_flips_signs() {
        let g = DomainGrid::new(vec![3]).unwrap();
        let a = build_monotone(&g, &[AxisOrder { axis: 0, direction: Direction::Decreasing }]).unwrap();
        assert_eq!(a.to_rows()[0], vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn monotone_errors() {
        let g = DomainGrid::new(vec![2, 1]).unwrap();
        assert!(matches!(build_monotone(&g, &[]), Err(Error::NoConstraints)));
        assert!(build_monotone(&g, &[AxisOrder::increasing(1)]).is_err());
        assert!(build_monotone(&g, &[AxisOrder::increasing(2)]).is_err());
    }

    #[test]
    fn tree_orders() {
        let a = build_tree_order(3, 0, TreeDirection::RootSmallest).unwrap();
        assert_eq!(a.to_rows(), vec![vec![-1.0, 1.0, 0.0], vec![-1.0, 0.0, 1.0]]);

        let a = build_tree_order(2, 0, TreeDirection::RootSmallest).unwrap();
        assert_eq!(a.to_rows(), vec![vec![-1.0, 1.0]]);

        let a = build_tree_order(4, 1, TreeDirection::RootLargest).unwrap();
        assert_eq!(a.n_constraints(), 3);
        for row in a.to_rows() {
            assert_eq!(row[1], 1.0);
            assert_eq!(row.iter().filter(|&&v| v == -1.0).count(), 1);
        }
        assert!(check_irreducible(&a).is_irreducible());
        assert!(build_tree_order(1, 0, TreeDirection::RootSmallest).is_err());
    }

    #[test]
    fn salary_partial_order_is_irreducible() {
        let a = build_partial_order(&salary_pairs(), 6).unwrap();
        assert_eq!(a.matrix(), &salary_matrix());
        assert!(check_irreducible(&a).is_irreducible());
        assert_eq!(a.order_pairs().unwrap(), salary_pairs());
    }

    #[test]
    fn partial_order_errors() {
        assert!(matches!(build_partial_order(&[(0, 1), (0, 1)], 2), Err(Error::DuplicatePair { .. })));
        assert!(build_partial_order(&[(1, 1)], 2).is_err());
        assert!(build_partial_order(&[(0, 2)], 2).is_err());
        assert!(matches!(build_partial_order(&[], 2), Err(Error::NoConstraints)));
    }

    #[test]
    fn opposite_pairs_are_reducible_through_origin() {
        let a = build_partial_order(&[(0, 1), (1, 0)], 2).unwrap();
        match check_irreducible(&a) {
            // with two rows, row 2 = 1 * (-row 1) is not a positive combination,
            // so the verdict must come from the origin test
            Irreducibility::Reducible(ReducibilityWitness::OriginCombination { coefficients }) => {
                assert_eq!(coefficients.len(), 2);
                assert!((coefficients[0].1 - 0.5).abs() < 1e-8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_row_is_reducible() {
        let a = ConstraintMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![-1.0, 1.0, 0.0]])
            .unwrap();
        match check_irreducible(&a) {
            Irreducibility::Reducible(ReducibilityWitness::RowCombination { row, coefficients }) => {
                assert_eq!(row, 0);
                assert_eq!(coefficients.len(), 1);
                assert_eq!(coefficients[0].0, 2);
                assert!((coefficients[0].1 - 1.0).abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transitive_row_is_reducible() {
        let a = ConstraintMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![-1.0, 0.0, 1.0]])
            .unwrap();
        // row3 = row1 + row2, checked directly
        let sum = a.row(0) + a.row(1);
        assert_eq!(sum, a.row(2));
        match check_irreducible(&a) {
            Irreducibility::Reducible(ReducibilityWitness::RowCombination { row, coefficients }) => {
                assert_eq!(row, 2);
                assert_eq!(coefficients.len(), 2);
                for (_, c) in coefficients {
                    assert!((c - 1.0).abs() < 1e-10);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_row_rejected() {
        assert!(ConstraintMatrix::from_rows(&[vec![0.0, 0.0]]).is_err());
        assert!(ConstraintMatrix::from_rows(&[vec![1.0]]).is_err());
    }

    #[test]
    fn unit_weights_leave_matrix_unchanged() {
        let a = build_partial_order(&salary_pairs(), 6).unwrap();
        let (as_, edges) = transform_by_weights(&a, &DVector::from_element(6, 1.0)).unwrap();
        assert_eq!(as_, a);
        for j in 0..7 {
            assert_eq!(edges.edge(j), -a.row(j));
        }
    }

    #[test]
    fn weighted_edges_for_three_domain_monotone() {
        let a = build_monotone(&DomainGrid::new(vec![3]).unwrap(), &[AxisOrder::increasing(0)]).unwrap();
        let n_hat = [2.0, 5.0, 3.0];
        let total: f64 = n_hat.iter().sum();
        let w = DVector::from_iterator(3, n_hat.iter().map(|n| n / total));
        let (_, edges) = transform_by_weights(&a, &w).unwrap();
        let g1 = [(total / n_hat[0]).sqrt(), -(total / n_hat[1]).sqrt(), 0.0];
        let g2 = [0.0, (total / n_hat[1]).sqrt(), -(total / n_hat[2]).sqrt()];
        for k in 0..3 {
            assert!((edges.edge(0)[k] - g1[k]).abs() < 1e-14);
            assert!((edges.edge(1)[k] - g2[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn common_weight_scale_rescales_edges() {
        let a = build_monotone(&DomainGrid::new(vec![4]).unwrap(), &[AxisOrder::increasing(0)]).unwrap();
        let w = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let c = 4.0;
        let (_, e1) = transform_by_weights(&a, &w).unwrap();
        let (_, e2) = transform_by_weights(&a, &(&w * c)).unwrap();
        // A (cW)^{-1/2} = c^{-1/2} A W^{-1/2}
        for j in 0..3 {
            assert!((e1.edge(j) - e2.edge(j) * c.sqrt()).norm() < 1e-14);
        }
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let a = build_tree_order(2, 0, TreeDirection::RootSmallest).unwrap();
        let err = transform_by_weights(&a, &DVector::from_vec(vec![1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveWeight { index: 1, .. }));
    }

    #[test]
    fn spec_file_variants_parse() {
        let s = ConstraintSpec::from_json(r#"{"grid":[6,4],"monotone":[{"axis":0,"direction":"inc"},{"axis":1,"direction":"inc"}]}"#)
            .unwrap();
        assert_eq!(s.build_certified().unwrap().n_constraints(), 38);

        let s = ConstraintSpec::from_json(r#"{"tree":{"D":4,"root":2,"direction":"root_largest"}}"#).unwrap();
        assert_eq!(s.build().unwrap().row(0)[1], 1.0);

        let s = ConstraintSpec::from_json(r#"{"pairs":[[1,2],[3,4],[5,6],[1,5],[3,5],[2,6],[4,6]],"D":6}"#).unwrap();
        assert_eq!(s.build().unwrap().matrix(), &salary_matrix());

        let s = ConstraintSpec::from_json(r#"{"matrix":[[-1,1,0],[0,-1,1],[-1,1,0]]}"#).unwrap();
        match s.build_certified() {
            Err(Error::Reducible(w)) => assert_eq!(w.row(), 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transitive_reduction_drops_implied_pairs() {
        let pairs = [(0, 1), (1, 2), (0, 2), (0, 1), (2, 3)];
        let kept = transitive_reduction(&pairs, 4).unwrap();
        assert_eq!(kept, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(check_irreducible(&build_partial_order(&kept, 4).unwrap()).is_irreducible());
        assert!(!check_irreducible(&build_partial_order(&pairs[..3], 4).unwrap()).is_irreducible());
        assert!(matches!(transitive_reduction(&[(0, 1), (1, 0)], 2), Err(Error::CyclicOrder(_))));
    }
}
