//! Dense solver for the small normal-equation systems of the surrogate fit.

use crate::scalar::Real;

/// Solves `a · x = b` for a square row-major `a` by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `n · eps · max|a|`.
pub fn solve<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n), "system must be square");
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    let cutoff = T::of_usize(n) * T::epsilon() * scale;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap().then(j.cmp(&i)))
            .unwrap();
        if a[pivot][col].abs() <= cutoff {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }

    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let tail: T = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let x = solve(vec![vec![2.0f64, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn needs_pivoting() {
        let x = solve(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0f32, 3.0]).unwrap();
        assert_eq!(x, [3.0, 2.0]);
    }

    #[test]
    fn singular() {
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
        assert!(solve(vec![vec![0.0]], vec![1.0f64]).is_none());
    }
}
