//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection and
//! eigenvectors by inverse iteration.

/// Symmetric tridiagonal matrix, `diag.len() = off.len() + 1`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin bounds on the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + x.abs());
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            if q == 0.0 {
                q = tiny;
            }
            q = (self.diag[i] - x) - self.off[i - 1] * (self.off[i - 1] / q);
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) to absolute width `abs_tol`
    /// or four ulps, whichever is larger.
    pub fn eigenvalue(&self, k: usize, abs_tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
        for _ in 0..500 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= abs_tol.max(4.0 * f64::EPSILON * mid.abs()) || mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(T - shift I) x = b` by Gaussian elimination with partial
    /// pivoting. Exactly singular pivots are perturbed.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let eps = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        // Row i of U has entries (u0, u1, u2) at columns i, i+1, i+2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();
        // current row being eliminated: (a, c) at columns i, i+1
        let mut a = self.diag[0] - shift;
        let mut c = if n > 1 { self.off[0] } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a == 0.0 { eps } else { a };
                break;
            }
            let sub = self.off[i];
            let next_d = self.diag[i + 1] - shift;
            let next_c = if i + 2 < n { self.off[i + 1] } else { 0.0 };
            if a.abs() >= sub.abs() {
                let piv = if a == 0.0 { eps } else { a };
                u0[i] = piv;
                u1[i] = c;
                u2[i] = 0.0;
                let l = sub / piv;
                rhs[i + 1] -= l * rhs[i];
                a = next_d - l * c;
                c = next_c;
            } else {
                // swap rows i and i+1
                u0[i] = sub;
                u1[i] = next_d;
                u2[i] = next_c;
                let l = a / sub;
                rhs.swap(i, i + 1);
                rhs[i + 1] -= l * rhs[i];
                a = c - l * next_d;
                c = -l * next_c;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }

    /// Unit eigenvector for an eigenvalue approximation `lambda` and the
    /// residual `‖T v - lambda v‖`.
    pub fn eigenvector(&self, lambda: f64, iterations: usize) -> (Vec<f64>, f64) {
        let n = self.len();
        // deterministic, not orthogonal to any particular mode
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
        normalize(&mut v);
        let mut best = (v.clone(), f64::INFINITY);
        for _ in 0..iterations.max(1) {
            let mut w = self.solve_shifted(lambda, &v);
            if !w.iter().all(|x| x.is_finite()) {
                break;
            }
            normalize(&mut w);
            v = w;
            let r = self.residual(&v, lambda);
            if r < best.1 {
                best = (v.clone(), r);
            }
        }
        best
    }

    pub fn residual(&self, v: &[f64], lambda: f64) -> f64 {
        let tv = self.mul(v);
        tv.iter()
            .zip(v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            let got = t.eigenvalue(k, 1e-14);
            assert!((got - exact).abs() < 1e-13, "k {k}: {got} vs {exact}");
            let (v, r) = t.eigenvector(got, 3);
            assert!(r < 1e-12, "residual {r}");
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoted_solve() {
        let t = SymTridiagonal {
            diag: vec![0.0, 1.0, 4.0, -2.0],
            off: vec![3.0, 0.5, 1.0],
        };
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let x = t.solve_shifted(0.25, &b);
        let tx = t.mul(&x);
        for i in 0..4 {
            assert!((tx[i] - 0.25 * x[i] - b[i]).abs() < 1e-12);
        }
    }
}
