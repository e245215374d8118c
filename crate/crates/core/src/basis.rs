use crate::algebra::{Matrix, Vector};
use crate::error::{Error, Result};

/// Quadratic monomial basis `φ(x̄)` with its analytic Jacobian.
///
/// Squares come first in ascending index order. Cross terms follow: for
/// three states the order is `x̄₁x̄₂, x̄₂x̄₃, x̄₁x̄₃` (the order the robot
/// weights are usually listed in), every other dimension uses lexicographic pairs.
/// The ordering is fixed at construction and never changes, so logged
/// weights stay comparable between runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl QuadBasis {
    pub fn new(n: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        if n == 3 {
            pairs.extend([(0, 1), (1, 2), (0, 2)]);
        } else {
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j));
                }
            }
        }
        QuadBasis { n, pairs }
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    /// `n(n+1)/2`
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Human-readable monomial labels, e.g. `x1*x2`.
    pub fn labels(&self) -> Vec<String> {
        self.pairs
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    format!("x{}^2", i + 1)
                } else {
                    format!("x{}*x{}", i + 1, j + 1)
                }
            })
            .collect()
    }

    pub fn eval(&self, xbar: &Vector) -> Result<Vector> {
        self.check(xbar)?;
        Ok(Vector::from_iterator(
            self.len(),
            self.pairs.iter().map(|&(i, j)| xbar[i] * xbar[j]),
        ))
    }

    /// Jacobian `φ′(x̄)`, shape `n_c x n`.
    pub fn grad(&self, xbar: &Vector) -> Result<Matrix> {
        self.check(xbar)?;
        let mut d = Matrix::zeros(self.len(), self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                d[(k, i)] = 2.0 * xbar[i];
            } else {
                d[(k, i)] = xbar[j];
                d[(k, j)] = xbar[i];
            }
        }
        Ok(d)
    }

    fn check(&self, xbar: &Vector) -> Result<()> {
        if xbar.len() != self.n {
            return Err(Error::dim("QuadBasis", self.n, xbar.len()));
        }
        Ok(())
    }
}
