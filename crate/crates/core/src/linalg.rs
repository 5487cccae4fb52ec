//! Small dense least-squares helpers on top of nalgebra.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number of `GᵀG` above which a design is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Condition number of `GᵀG` above which a design is reported as ill-conditioned.
pub const WARN_CONDITION: f64 = 1e8;

/// Thin SVD of a column-equilibrated design matrix, reusable for several
/// right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    u: DMatrix<f64>,
    inv_s: DVector<f64>,
    v: DMatrix<f64>,
    scale: Vec<f64>,
    condition: f64,
}

impl LeastSquares {
    /// `design` is row-major `rows × names.len()`.
    pub fn new(design: &[f64], rows: usize, names: &[String]) -> Result<Self> {
        let cols = names.len();
        debug_assert_eq!(design.len(), rows * cols);
        let mut x = DMatrix::from_row_slice(rows, cols, design);
        let mut scale = Vec::with_capacity(cols);
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::SingularDesign {
                    condition: f64::INFINITY,
                    columns: alloc::vec![names[j].clone()],
                });
            }
            col /= norm;
            scale.push(1.0 / norm);
        }
        if rows < cols {
            return Err(Error::SingularDesign { condition: f64::INFINITY, columns: names.to_vec() });
        }
        let svd = x.svd(true, true);
        let s = &svd.singular_values;
        let (mut smax, mut smin, mut imin) = (0.0f64, f64::INFINITY, 0);
        for (i, &v) in s.iter().enumerate() {
            smax = smax.max(v);
            if v < smin {
                smin = v;
                imin = i;
            }
        }
        let ratio = smax / smin;
        let condition = ratio * ratio;
        let v_t = svd.v_t.expect("requested V");
        if !(condition <= SINGULAR_CONDITION) {
            let weakest = v_t.row(imin);
            let columns = names
                .iter()
                .zip(weakest.iter())
                .filter(|(_, w)| w.abs() >= 0.1)
                .map(|(n, _)| n.clone())
                .collect();
            return Err(Error::SingularDesign { condition, columns });
        }
        if condition > WARN_CONDITION {
            log::warn!("ill-conditioned design: condition number of GᵀG is {condition:.3e}");
        }
        Ok(Self {
            u: svd.u.expect("requested U"),
            inv_s: s.map(|v| 1.0 / v),
            v: v_t.transpose(),
            scale,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        let uty = self.u.tr_mul(&y).component_mul(&self.inv_s);
        let beta = &self.v * uty;
        beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect()
    }

    /// Residuals `y − ŷ` of the projection onto the column space.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let fitted = &self.u * self.u.tr_mul(&yv);
        y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
    }
}

/// Solves the symmetric positive definite system `a x = b` (row-major `a`).
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_row_slice(n, n, a);
    let chol = m.cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| alloc::format!("c{i}")).collect()
    }

    #[test]
    fn recovers_exact_coefficients() {
        let rows = 20;
        let mut design = Vec::new();
        let mut y = Vec::new();
        for i in 0..rows {
            let x = i as f64 / 3.0;
            design.extend([1.0, x, x * x]);
            y.push(2.0 - 0.5 * x + 0.25 * x * x);
        }
        let ls = LeastSquares::new(&design, rows, &names(3)).unwrap();
        let c = ls.coefficients(&y);
        for (a, b) in c.iter().zip([2.0, -0.5, 0.25]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(ls.residuals(&y).iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn names_collinear_columns() {
        let rows = 10;
        let mut design = Vec::new();
        for i in 0..rows {
            let x = i as f64;
            design.extend([1.0, x, 2.0 * x, libm::sin(x)]);
        }
        let err = LeastSquares::new(&design, rows, &names(4)).unwrap_err();
        match err {
            Error::SingularDesign { columns, .. } => {
                assert!(columns.contains(&"c1".to_string()) && columns.contains(&"c2".to_string()));
                assert!(!columns.contains(&"c3".to_string()));
            }
            other => panic!("{other:?}"),
        }
        let zero_col = vec![1.0, 0.0, 1.0, 0.0];
        assert!(LeastSquares::new(&zero_col, 2, &names(2)).is_err());
    }

    #[test]
    fn spd_solve() {
        let x = solve_spd(&[4.0, 1.0, 1.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
        assert!(solve_spd(&[0.0, 0.0, 0.0, 0.0], &[1.0, 1.0]).is_none());
    }
}
