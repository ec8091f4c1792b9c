//! Central finite differences used when a system omits an analytic derivative.

use crate::linalg::Matrix;
use crate::scalar::{lit, Real};

/// Step `cbrt(eps_mach) * max(1, |x|)`, balancing truncation against round-off.
pub fn fd_step<T: Real>(x: T) -> T {
    T::epsilon().cbrt() * T::one().max(x.abs())
}

/// Gradient of a scalar function.
pub fn gradient<T: Real>(f: impl Fn(&[T]) -> T, u: &[T]) -> Vec<T> {
    let mut x = u.to_vec();
    (0..u.len())
        .map(|k| {
            let h = fd_step(u[k]);
            x[k] = u[k] + h;
            let fp = f(&x);
            x[k] = u[k] - h;
            let fm = f(&x);
            x[k] = u[k];
            (fp - fm) / (lit::<T>(2.0) * h)
        })
        .collect()
}

/// Jacobian `J[i][k] = d f_i / d u_k` of a vector function written into `out`.
pub fn jacobian<T: Real>(f: impl Fn(&[T], &mut [T]), u: &[T], m: usize) -> Matrix<T> {
    let n = u.len();
    let mut jac = Matrix::zeros(m, n);
    let mut x = u.to_vec();
    let mut fp = vec![T::zero(); m];
    let mut fm = vec![T::zero(); m];
    for k in 0..n {
        let h = fd_step(u[k]);
        x[k] = u[k] + h;
        f(&x, &mut fp);
        x[k] = u[k] - h;
        f(&x, &mut fm);
        x[k] = u[k];
        for i in 0..m {
            jac[(i, k)] = (fp[i] - fm[i]) / (lit::<T>(2.0) * h);
        }
    }
    jac
}

/// Jacobian of a function returning a fresh vector.
pub fn jacobian_of<T: Real>(f: impl Fn(&[T]) -> Vec<T>, u: &[T]) -> Matrix<T> {
    let m = f(u).len();
    jacobian(|x, out: &mut [T]| out.copy_from_slice(&f(x)), u, m)
}
