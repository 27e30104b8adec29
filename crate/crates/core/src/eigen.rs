//! Eigenvalues of a dense real nonsymmetric matrix.
//!
//! Pipeline: diagonal balancing by powers of two, Householder reduction to
//! upper Hessenberg form, then Francis double-shift QR with deflation on
//! negligible subdiagonals. Complex eigenvalues come out as exact conjugate
//! pairs because each 2×2 block is resolved in closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const RADIX: f64 = 2.0;

/// Iteration budget per matrix dimension.
pub const ITERATIONS_PER_DIM: usize = 30;

/// All eigenvalues of `a`, in the order they deflate.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("matrix", "must be square"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = Work::from_matrix(a);
    h.balance();
    h.reduce_to_hessenberg();
    h.hqr()
}

/// Square matrix stored row-major with 1-based indexing.
struct Work {
    n: usize,
    data: Vec<f64>,
}

impl Work {
    fn from_matrix(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut w = Work {
            n,
            data: vec![0.0; (n + 1) * (n + 1)],
        };
        for i in 0..n {
            for j in 0..n {
                w.set(i + 1, j + 1, a[(i, j)]);
            }
        }
        w
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.n + 1) + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[i * (n + 1) + j] = v;
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[i * (n + 1) + j] += v;
    }

    /// Similarity scaling so row and column norms are comparable.
    fn balance(&mut self) {
        let n = self.n;
        let sqrdx = RADIX * RADIX;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut r = 0.0;
                let mut c = 0.0;
                for j in 1..=n {
                    if j != i {
                        c += self.at(j, i).abs();
                        r += self.at(i, j).abs();
                    }
                }
                if c != 0.0 && r != 0.0 {
                    let mut g = r / RADIX;
                    let mut f = 1.0;
                    let s = c + r;
                    while c < g {
                        f *= RADIX;
                        c *= sqrdx;
                    }
                    g = r * RADIX;
                    while c > g {
                        f /= RADIX;
                        c /= sqrdx;
                    }
                    if (c + r) / f < 0.95 * s {
                        done = false;
                        let inv = 1.0 / f;
                        for j in 1..=n {
                            let v = self.at(i, j) * inv;
                            self.set(i, j, v);
                        }
                        for j in 1..=n {
                            let v = self.at(j, i) * f;
                            self.set(j, i, v);
                        }
                    }
                }
            }
        }
    }

    /// Householder similarity transforms zeroing everything below the
    /// first subdiagonal. Columns that are already reduced are skipped.
    #[allow(clippy::needless_range_loop)]
    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        if n < 3 {
            return;
        }
        let mut v = vec![0.0; n + 1];
        for k in 1..=n - 2 {
            let scale: f64 = (k + 1..=n).map(|i| self.at(i, k).abs()).sum();
            let tail: f64 = (k + 2..=n).map(|i| self.at(i, k).abs()).sum();
            if scale == 0.0 || tail == 0.0 {
                continue;
            }
            let mut sigma = 0.0;
            for i in k + 1..=n {
                v[i] = self.at(i, k) / scale;
                sigma += v[i] * v[i];
            }
            let alpha = sigma.sqrt().copysign(v[k + 1]);
            v[k + 1] += alpha;
            let beta = alpha * v[k + 1];
            // Left: H ← (I − v vᵀ/β) H on rows k+1..n.
            for j in 1..=n {
                let dot: f64 = (k + 1..=n).map(|i| v[i] * self.at(i, j)).sum::<f64>() / beta;
                if dot != 0.0 {
                    for i in k + 1..=n {
                        self.add(i, j, -dot * v[i]);
                    }
                }
            }
            // Right: H ← H (I − v vᵀ/β) on columns k+1..n.
            for i in 1..=n {
                let dot: f64 = (k + 1..=n).map(|j| self.at(i, j) * v[j]).sum::<f64>() / beta;
                if dot != 0.0 {
                    for j in k + 1..=n {
                        self.add(i, j, -dot * v[j]);
                    }
                }
            }
            for i in k + 2..=n {
                self.set(i, k, 0.0);
            }
        }
    }

    /// Francis double-shift QR on the Hessenberg matrix.
    fn hqr(&mut self) -> Result<Vec<Complex64>> {
        let n = self.n;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];
        let mut anorm = 0.0;
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm += self.at(i, j).abs();
            }
        }
        let budget = ITERATIONS_PER_DIM * n;
        let mut total = 0usize;
        let mut nn = n;
        let mut t = 0.0;
        while nn >= 1 {
            let mut its = 0usize;
            loop {
                // Look for a single small subdiagonal element.
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.at(l - 1, l - 1).abs() + self.at(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.at(l, l - 1).abs() + s == s {
                        self.set(l, l - 1, 0.0);
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.at(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.at(nn - 1, nn - 1);
                let mut w = self.at(nn, nn - 1) * self.at(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let zz = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        let zz = p + zz.copysign(p);
                        wr[nn - 1] = x + zz;
                        wr[nn] = x + zz;
                        if zz != 0.0 {
                            wr[nn] = x - w / zz;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -zz;
                        wi[nn] = zz;
                    }
                    nn -= 2;
                    break;
                }
                if total >= budget {
                    return Err(Error::ConvergenceFailure {
                        dim: n,
                        iterations: total,
                        unreduced: nn,
                    });
                }
                if its > 0 && its.is_multiple_of(10) {
                    // Exceptional shift.
                    t += x;
                    for i in 1..=nn {
                        self.add(i, i, -x);
                    }
                    let s = self.at(nn, nn - 1).abs() + self.at(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;
                total += 1;
                self.francis_step(l, nn, x, y, w);
            }
        }
        Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
    }

    fn francis_step(&mut self, l: usize, nn: usize, mut x: f64, mut y: f64, w: f64) {
        // Find two consecutive small subdiagonal elements.
        let mut m = nn - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = self.at(m, m);
            let rr = x - z;
            let s = y - z;
            p = (rr * s - w) / self.at(m + 1, m) + self.at(m, m + 1);
            q = self.at(m + 1, m + 1) - z - rr - s;
            r = self.at(m + 2, m + 1);
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = self.at(m, m - 1).abs() * (q.abs() + r.abs());
            let v = p.abs() * (self.at(m - 1, m - 1).abs() + z.abs() + self.at(m + 1, m + 1).abs());
            if u + v == v {
                break;
            }
            m -= 1;
        }
        for i in m + 2..=nn {
            self.set(i, i - 2, 0.0);
            if i != m + 2 {
                self.set(i, i - 3, 0.0);
            }
        }
        // Double QR step on rows l..nn and columns m..nn.
        for k in m..nn {
            if k != m {
                p = self.at(k, k - 1);
                q = self.at(k + 1, k - 1);
                r = 0.0;
                if k != nn - 1 {
                    r = self.at(k + 2, k - 1);
                }
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = (p * p + q * q + r * r).sqrt().copysign(p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    let v = -self.at(k, k - 1);
                    self.set(k, k - 1, v);
                }
            } else {
                self.set(k, k - 1, -s * x);
            }
            p += s;
            x = p / s;
            y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut pp = self.at(k, j) + q * self.at(k + 1, j);
                if k != nn - 1 {
                    pp += r * self.at(k + 2, j);
                    self.add(k + 2, j, -pp * z);
                }
                self.add(k + 1, j, -pp * y);
                self.add(k, j, -pp * x);
            }
            let mmin = if nn < k + 3 { nn } else { k + 3 };
            for i in l..=mmin {
                let mut pp = x * self.at(i, k) + y * self.at(i, k + 1);
                if k != nn - 1 {
                    pp += z * self.at(i, k + 2);
                    self.add(i, k + 2, -pp * r);
                }
                self.add(i, k + 1, -pp * q);
                self.add(i, k, -pp);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let ev = sorted(eigenvalues(&a).unwrap());
        assert_eq!(
            ev,
            vec![
                Complex64::new(-3.0, 0.0),
                Complex64::new(-2.0, 0.0),
                Complex64::new(-1.0, 0.0)
            ]
        );
    }

    #[test]
    fn unit_line_cubic() {
        // λ³ + 2λ² + 3λ + 2 = (λ + 1)(λ² + λ + 2).
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, -1.0]);
        let ev = sorted(eigenvalues(&a).unwrap());
        let b = 7f64.sqrt() / 2.0;
        let expected = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(-0.5, -b),
            Complex64::new(-0.5, b),
        ];
        for (g, e) in ev.iter().zip(expected.iter()) {
            assert!((g - e).norm() < 1e-13, "{g} vs {e}");
        }
        assert_eq!(ev[1], ev[2].conj());
    }

    #[test]
    fn companion_matrix_roots() {
        // (λ−1)(λ−2)(λ−3)(λ−4)(λ−5) in companion form.
        let coeffs = [-120.0, 274.0, -225.0, 85.0, -15.0];
        let mut a = DMatrix::zeros(5, 5);
        for i in 1..5 {
            a[(i, i - 1)] = 1.0;
        }
        for i in 0..5 {
            a[(i, 4)] = -coeffs[i];
        }
        let ev = sorted(eigenvalues(&a).unwrap());
        for (k, e) in ev.iter().enumerate() {
            assert!((e.re - (k + 1) as f64).abs() < 1e-9);
            assert!(e.im.abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -5.0, 5.0, 0.0]);
        let ev = eigenvalues(&a).unwrap();
        assert!(ev
            .iter()
            .all(|e| e.re.abs() < 1e-15 && (e.im.abs() - 5.0).abs() < 1e-14));
    }

    #[test]
    fn rejects_non_finite() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, 1.0, 0.0]);
        assert!(eigenvalues(&a).is_err());
        assert!(eigenvalues(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn dense_random_matrix_trace_and_determinant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [4, 9, 17] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let ev = eigenvalues(&a).unwrap();
            let sum: Complex64 = ev.iter().sum();
            let prod: Complex64 = ev.iter().product();
            assert!((sum.re - a.trace()).abs() < 1e-10);
            assert!(sum.im.abs() < 1e-10);
            let det = a.clone().determinant();
            assert!((prod.re - det).abs() < 1e-9 * det.abs().max(1.0));
        }
    }
}
