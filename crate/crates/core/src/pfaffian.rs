//! Pfaffian of a complex antisymmetric matrix by Parlett-Reid elimination.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::majorana::antisymmetry_residual;

/// Relative antisymmetry tolerance accepted by [`pfaffian`].
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

/// `Pf(A)` via the skew LTLᵀ reduction with partial pivoting.
pub fn pfaffian(a: &CMat) -> Result<C64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParams(format!("Pfaffian needs a square matrix, got {:?}", a.dim())));
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if n == 0 {
        return Ok(C64::from(1.0));
    }
    let residual = antisymmetry_residual(a);
    if residual > ANTISYMMETRY_TOL {
        return Err(Error::NotAntisymmetric { residual });
    }
    let mut a = a.clone();
    let mut pf = C64::from(1.0);
    for k in (0..n - 1).step_by(2) {
        let kp = (k + 1..n).max_by(|&x, &y| a[[x, k]].norm().total_cmp(&a[[y, k]].norm())).unwrap();
        if kp != k + 1 {
            for c in 0..n {
                a.swap([k + 1, c], [kp, c]);
            }
            for r in 0..n {
                a.swap([r, k + 1], [r, kp]);
            }
            pf = -pf;
        }
        let pivot = a[[k, k + 1]];
        if pivot.norm() == 0.0 {
            return Ok(C64::from(0.0));
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| a[[k, j]] / pivot).collect();
            let col: Vec<C64> = (k + 2..n).map(|j| a[[j, k + 1]]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[[i, j]] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use ndarray as nd;
    use proptest::prelude::*;

    fn antisym_from(vals: &[(f64, f64)], n: usize) -> CMat {
        let mut a = CMat::zeros((n, n));
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(vals[k].0, vals[k].1);
                a[[i, j]] = z;
                a[[j, i]] = -z;
                k += 1;
            }
        }
        a
    }

    #[test]
    fn two_by_two() {
        let a = nd::array![[C64::from(0.0), C64::new(1.5, -2.0)], [C64::new(-1.5, 2.0), C64::from(0.0)]];
        assert_eq!(pfaffian(&a).unwrap(), C64::new(1.5, -2.0));
    }

    #[test]
    fn block_diagonal_pairs() {
        let (x, y) = (C64::new(0.3, 1.0), C64::new(-2.0, 0.5));
        let mut a = CMat::zeros((4, 4));
        a[[0, 1]] = x;
        a[[1, 0]] = -x;
        a[[2, 3]] = y;
        a[[3, 2]] = -y;
        assert!((pfaffian(&a).unwrap() - x * y).norm() < 1e-15);
    }

    #[test]
    fn four_by_four_formula() {
        let a = antisym_from(&[(1.0, 0.0), (2.0, 1.0), (0.5, -1.0), (3.0, 0.0), (-1.0, 2.0), (0.7, 0.2)], 4);
        let expect = a[[0, 1]] * a[[2, 3]] - a[[0, 2]] * a[[1, 3]] + a[[0, 3]] * a[[1, 2]];
        assert!((pfaffian(&a).unwrap() - expect).norm() < 1e-13);
    }

    #[test]
    fn errors() {
        assert!(matches!(pfaffian(&CMat::zeros((3, 3))), Err(Error::OddDimension(3))));
        let mut a = CMat::zeros((2, 2));
        a[[0, 1]] = C64::from(1.0);
        assert!(matches!(pfaffian(&a), Err(Error::NotAntisymmetric { .. })));
    }

    proptest! {
        #[test]
        fn square_is_determinant(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 28)) {
            let a = antisym_from(&vals, 8);
            let pf = pfaffian(&a).unwrap();
            let det = linalg::det(&a).unwrap();
            prop_assert!((pf * pf - det).norm() <= 1e-10 * det.norm().max(1e-300));
        }
    }
}
