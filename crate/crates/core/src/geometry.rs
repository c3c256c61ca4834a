//! Polytopes `{ z : A z + b >= 0 }`, box constraints, and the per-region
//! adversarial constraint systems.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::network::AffineMap;
use crate::scalar::Scalar;

/// Finite intersection of half-spaces `A_i · z + b_i >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<T> {
    a: Matrix<T>,
    b: Vec<T>,
}

impl<T: Scalar> Polytope<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>) -> Result<Self> {
        check_dim("polytope offsets", a.rows(), b.len())?;
        Ok(Self { a, b })
    }

    /// The whole space `R^dim`.
    pub fn whole_space(dim: usize) -> Self {
        Self {
            a: Matrix::zeros(0, dim),
            b: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<T>], offsets: Vec<T>, dim: usize) -> Result<Self> {
        let a = Matrix::from_rows(rows, dim).ok_or_else(|| Error::Dimension {
            context: "polytope rows".into(),
            expected: dim,
            actual: rows.iter().map(Vec::len).find(|&n| n != dim).unwrap_or(dim),
        })?;
        check_dim("polytope dimension", dim, a.cols())?;
        Self::new(a, offsets)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Value of row `i` at `z`.
    pub fn row_value(&self, i: usize, z: &[T]) -> T {
        dot(self.a.row(i), z) + self.b[i]
    }

    pub fn row_values(&self, z: &[T]) -> Vec<T> {
        (0..self.num_rows()).map(|i| self.row_value(i, z)).collect()
    }

    /// True iff every row satisfies `A_i · z + b_i >= -tol`.
    pub fn contains(&self, z: &[T], tol: T) -> Result<bool> {
        check_dim("point", self.dim(), z.len())?;
        Ok((0..self.num_rows()).all(|i| self.row_value(i, z) >= -tol))
    }

    /// Rows with an all-zero normal and a negative offset; any such row makes
    /// the polytope empty.
    pub fn trivially_infeasible_rows(&self) -> Vec<usize> {
        (0..self.num_rows())
            .filter(|&i| self.a.row(i).iter().all(|x| x.is_zero()) && self.b[i] < T::zero())
            .collect()
    }

    /// Row concatenation.
    pub fn intersect(&self, other: &Polytope<T>) -> Result<Polytope<T>> {
        check_dim("polytope intersection", self.dim(), other.dim())?;
        let mut out = self.clone();
        for (row, &b) in other.a.row_iter().zip(&other.b) {
            out.a.push_row(row);
            out.b.push(b);
        }
        Ok(out)
    }

    pub fn push_row(&mut self, row: &[T], offset: T) -> Result<()> {
        check_dim("polytope row", self.dim(), row.len())?;
        self.a.push_row(row);
        self.b.push(offset);
        Ok(())
    }

    /// Rewrites every row over `z` as a row over `δ` with `z = x + δ`.
    pub fn shifted(&self, x: &[T]) -> Result<Polytope<T>> {
        check_dim("shift point", self.dim(), x.len())?;
        let b = (0..self.num_rows()).map(|i| self.row_value(i, x)).collect();
        Ok(Polytope {
            a: self.a.clone(),
            b,
        })
    }
}

/// Axis-aligned box `lower <= z <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> BoxConstraint<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::Config(format!(
                "box lower bound exceeds upper bound in coordinate {i}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` in every coordinate.
    pub fn uniform(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Self {
        Self::uniform(dim, T::zero(), T::one()).expect("0 <= 1")
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, z: &[T]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    pub fn clamp(&self, z: &mut [T]) {
        for (v, (&lo, &hi)) in z.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(lo).min(hi);
        }
    }

    /// `2d` rows: `z_i - lower_i >= 0` then `upper_i - z_i >= 0`.
    pub fn to_polytope(&self) -> Polytope<T> {
        let d = self.dim();
        let mut a = Matrix::zeros(2 * d, d);
        let mut b = Vec::with_capacity(2 * d);
        for i in 0..d {
            a[(i, i)] = T::one();
            b.push(-self.lower[i]);
        }
        for i in 0..d {
            a[(d + i, i)] = -T::one();
            b.push(self.upper[i]);
        }
        Polytope { a, b }
    }
}

/// Inequalities over `δ` for "class `target` beats class `current` at
/// `x + δ`, and `x + δ` lies in `region ∩ constraint`".
///
/// Row 0 is the decision row, followed by the shifted rows of `region` and
/// then of `constraint`.
pub fn adversarial_constraints<T: Scalar>(
    output: &AffineMap<T>,
    current: usize,
    target: usize,
    region: &Polytope<T>,
    constraint: &Polytope<T>,
    x: &[T],
) -> Result<Polytope<T>> {
    let d = x.len();
    check_dim("output map input", d, output.v.cols())?;
    check_dim("region dimension", d, region.dim())?;
    check_dim("constraint dimension", d, constraint.dim())?;
    let k = output.output_dim();
    if current >= k || target >= k {
        return Err(Error::Precondition(format!(
            "class index out of range ({current}, {target}) for {k} classes"
        )));
    }
    if current == target {
        return Err(Error::Precondition(
            "target class equals current class".into(),
        ));
    }
    let w: Vec<T> = output
        .v
        .row(target)
        .iter()
        .zip(output.v.row(current))
        .map(|(&l, &c)| l - c)
        .collect();
    let offset = dot(&w, x) + output.a[target] - output.a[current];
    let mut p = Polytope::new(Matrix::from_row_major(1, d, w), vec![offset])?;
    p = p.intersect(&region.shifted(x)?)?;
    p.intersect(&constraint.shifted(x)?)
}
