use num_traits::Zero;

use super::rational::Rat;

/// Solves the square system `A x = b` exactly by Gaussian elimination.
/// Returns `None` when `A` is singular.
pub fn solve(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n), "system must be square");
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].clone();
        for j in col..n {
            let v = &a[col][j] / &inv;
            a[col][j] = v;
        }
        b[col] = &b[col] / &inv;
        let pivot_row = a[col].clone();
        let pivot_b = b[col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for j in col..n {
                if !pivot_row[j].is_zero() {
                    let delta = &factor * &pivot_row[j];
                    a[r][j] -= delta;
                }
            }
            b[r] -= &factor * &pivot_b;
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rational::{int, ratio};

    #[test]
    fn solves_two_by_two() {
        // x + y = 3, x - y = 1
        let x = solve(vec![vec![int(1), int(1)], vec![int(1), int(-1)]], vec![int(3), int(1)]).unwrap();
        assert_eq!(x, vec![int(2), int(1)]);
    }

    #[test]
    fn needs_row_swap() {
        let x = solve(vec![vec![int(0), int(2)], vec![int(3), int(0)]], vec![int(1), int(1)]).unwrap();
        assert_eq!(x, vec![ratio(1, 3), ratio(1, 2)]);
    }

    #[test]
    fn singular_is_none() {
        assert!(solve(vec![vec![int(1), int(2)], vec![int(2), int(4)]], vec![int(1), int(2)]).is_none());
    }
}
