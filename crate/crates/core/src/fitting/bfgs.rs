//! Quasi-Newton minimization with finite-difference gradients.

use crate::Scalar;

#[derive(Debug, Clone)]
pub struct Bfgs<T> {
    pub max_iterations: usize,
    pub gradient_tolerance: T,
    /// Base central-difference step, scaled per coordinate by `max(1, |x_i|)`.
    pub fd_step: T,
}

impl<T: Scalar> Default for Bfgs<T> {
    fn default() -> Self {
        Bfgs {
            max_iterations: 500,
            gradient_tolerance: T::of(1e-6),
            fd_step: T::of(T::FD_STEP),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Counts objective calls and maps non-finite values to +inf.
struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F> Counted<F> {
    fn call<T: Scalar>(&mut self, x: &[T]) -> T
    where
        F: FnMut(&[T]) -> T,
    {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    }
}

/// Central-difference gradient with step `base * max(1, |x_i|)` per coordinate.
pub fn central_gradient<T: Scalar>(f: &mut impl FnMut(&[T]) -> T, x: &[T], base: T) -> Vec<T> {
    let mut probe = x.to_vec();
    let two = T::of(2.0);
    (0..x.len())
        .map(|i| {
            let h = base * x[i].abs().max(T::one());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (two * h)
        })
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn identity<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect()
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

impl<T: Scalar> Bfgs<T> {
    /// Minimizes `f` from `x0`. Returns `None` if `f(x0)` is not finite.
    pub fn minimize(&self, f: impl FnMut(&[T]) -> T, x0: &[T]) -> Option<Minimum<T>> {
        let n = x0.len();
        let mut obj = Counted { f, calls: 0 };
        let mut x = x0.to_vec();
        let mut fx = obj.call(&x);
        if !fx.is_finite() {
            return None;
        }
        let mut grad = central_gradient(&mut |p: &[T]| obj.call(p), &x, self.fd_step);
        let mut h_inv = identity::<T>(n);
        let mut fresh = true;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iterations {
            if grad.iter().any(|g| !g.is_finite()) {
                break;
            }
            if norm(&grad) <= self.gradient_tolerance {
                converged = true;
                break;
            }
            iterations += 1;

            let mut dir: Vec<T> = h_inv.iter().map(|row| -dot(row, &grad)).collect();
            let mut slope = dot(&grad, &dir);
            // also catches a NaN slope
            if slope.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Less) {
                h_inv = identity(n);
                fresh = true;
                dir = grad.iter().map(|&g| -g).collect();
                slope = dot(&grad, &dir);
            }

            let Some((x_new, f_new)) = self.line_search(&mut obj, &x, fx, &dir, slope) else {
                if fresh {
                    break;
                }
                // retry from steepest descent before giving up
                h_inv = identity(n);
                fresh = true;
                continue;
            };
            let grad_new = central_gradient(&mut |p: &[T]| obj.call(p), &x_new, self.fd_step);
            let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let y: Vec<T> = grad_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
            let sy = dot(&s, &y);

            if sy > T::of(1e-12) * norm(&s) * norm(&y) && sy > T::zero() {
                if fresh {
                    // scale the initial inverse Hessian to the observed curvature
                    let scale = sy / dot(&y, &y);
                    for (i, row) in h_inv.iter_mut().enumerate() {
                        row[i] = scale;
                    }
                    fresh = false;
                }
                update_inverse(&mut h_inv, &s, &y, T::one() / sy);
            }

            let decrease = fx - f_new;
            x = x_new;
            fx = f_new;
            grad = grad_new;
            // no representable progress left
            if decrease <= T::epsilon() * fx.abs().max(T::one()) {
                break;
            }
        }

        if !converged
            && grad.iter().all(|g| g.is_finite())
            && norm(&grad) <= self.gradient_tolerance
        {
            converged = true;
        }
        Some(Minimum {
            x,
            value: fx,
            converged,
            iterations,
            evaluations: obj.calls,
        })
    }

    /// Backtracking search satisfying the Armijo condition.
    fn line_search<F: FnMut(&[T]) -> T>(
        &self,
        obj: &mut Counted<F>,
        x: &[T],
        fx: T,
        dir: &[T],
        slope: T,
    ) -> Option<(Vec<T>, T)> {
        let c1 = T::of(ARMIJO_C1);
        let half = T::of(0.5);
        let mut alpha = T::one();
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<T> = x
                .iter()
                .zip(dir)
                .map(|(&xi, &di)| xi + alpha * di)
                .collect();
            let ft = obj.call(&trial);
            if ft <= fx + c1 * alpha * slope {
                return Some((trial, ft));
            }
            alpha = alpha * half;
        }
        None
    }
}

/// H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
fn update_inverse<T: Scalar>(h: &mut [Vec<T>], s: &[T], y: &[T], rho: T) {
    let n = s.len();
    let hy: Vec<T> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] = h[i][j] - rho * (hy[i] * s[j] + s[i] * hy[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
