//! Non-negative least squares in normal-equation form.

use nalgebra::{DMatrix, DVector};

/// Lawson–Hanson active-set solver for `min ‖Ax − b‖²` subject to `x ≥ 0`,
/// given `gram = AᵀA` and `rhs = Aᵀb`. Subproblems use an SVD pseudo-inverse
/// so nearly collinear columns do not break it.
pub(crate) fn nnls(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let k = rhs.len();
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    for _ in 0..3 * k + 3 {
        let grad = rhs - gram * &x;
        let Some(j) = (0..k).filter(|&j| !passive[j] && grad[j] > tol).max_by(|&a, &b| grad[a].total_cmp(&grad[b])) else {
            break;
        };
        passive[j] = true;
        for _ in 0..3 * k + 3 {
            let z = solve_passive(gram, rhs, &passive);
            if (0..k).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            // step back to the boundary and free the variables that hit it
            let mut alpha = 1.0f64;
            for i in (0..k).filter(|&i| passive[i] && z[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - z[i]));
            }
            x += (z - &x) * alpha;
            for i in 0..k {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

fn solve_passive(gram: &DMatrix<f64>, rhs: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..rhs.len()).filter(|&i| passive[i]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
    let r = DVector::from_iterator(idx.len(), idx.iter().map(|&i| rhs[i]));
    let eps = 1e-13 * sub.diagonal().max().max(f64::MIN_POSITIVE);
    let sol = sub.svd(true, true).solve(&r, eps).unwrap_or_else(|_| DVector::zeros(idx.len()));
    let mut z = DVector::zeros(rhs.len());
    for (a, &i) in idx.iter().enumerate() {
        z[i] = sol[a];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        nnls(&(a.transpose() * a), &(a.transpose() * b))
    }

    #[test]
    fn unconstrained_solution_is_kept() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = solve(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_component_is_clamped() {
        // unconstrained optimum (−1, 2); constrained optimum (0, 1.5)
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0, 1.0]);
        let x = solve(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn kkt_conditions_hold_on_random_problems() {
        use rand::Rng;
        let mut r = crate::rng::stream(3);
        for _ in 0..50 {
            let (m, k) = (r.random_range(3..30), r.random_range(1..8));
            let a = DMatrix::from_fn(m, k, |_, _| r.random_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| r.random_range(-1.0..1.0));
            let x = solve(&a, &b);
            let grad = a.transpose() * (&b - &a * &x);
            for j in 0..k {
                assert!(x[j] >= 0.0);
                assert!(grad[j] <= 1e-9, "gradient {} at free variable", grad[j]);
                if x[j] > 0.0 {
                    assert!(grad[j].abs() <= 1e-9, "gradient {} on support", grad[j]);
                }
            }
        }
    }
}
