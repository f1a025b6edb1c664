//! 2x2 complex matrices acting on the (x, y) polarization pair.

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Row-major 2x2 complex matrix, `[[xx, xy], [yx, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jones(pub [[Complex64; 2]; 2]);

impl Jones {
    pub const ZERO: Jones = Jones([[Complex64::new(0.0, 0.0); 2]; 2]);

    pub fn new(xx: Complex64, xy: Complex64, yx: Complex64, yy: Complex64) -> Self {
        Jones([[xx, xy], [yx, yy]])
    }

    pub fn identity() -> Self {
        Self::diag(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn diag(x: Complex64, y: Complex64) -> Self {
        Self::new(x, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), y)
    }

    /// Rotation of the polarization frame by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c.into(), (-s).into(), s.into(), c.into())
    }

    pub fn xx(&self) -> Complex64 {
        self.0[0][0]
    }
    pub fn xy(&self) -> Complex64 {
        self.0[0][1]
    }
    pub fn yx(&self) -> Complex64 {
        self.0[1][0]
    }
    pub fn yy(&self) -> Complex64 {
        self.0[1][1]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let m = self.0;
        Jones([[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let m = self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn det(&self) -> Complex64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `|row_0|^2` and `|row_1|^2`.
    pub fn row_norms_sqr(&self) -> [f64; 2] {
        let m = self.0;
        [
            m[0][0].norm_sqr() + m[0][1].norm_sqr(),
            m[1][0].norm_sqr() + m[1][1].norm_sqr(),
        ]
    }

    pub fn frobenius_sqr(&self) -> f64 {
        let [a, b] = self.row_norms_sqr();
        a + b
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Singular values `(σ_max, σ_min)`.
    ///
    /// From the eigenvalues of `A†A`; `σ_min` is recovered as
    /// `|det A| / σ_max` to avoid cancellation.
    pub fn singular_values(&self) -> (f64, f64) {
        let t = self.frobenius_sqr();
        let d = self.det().norm();
        let disc = (t * t - 4.0 * d * d).max(0.0).sqrt();
        let smax = ((t + disc) / 2.0).sqrt();
        if smax == 0.0 {
            return (0.0, 0.0);
        }
        (smax, d / smax)
    }

    /// 2-norm condition number; infinite for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let (smax, smin) = self.singular_values();
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }

    /// Inverse by Gaussian elimination with partial pivoting.
    /// `None` when a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let zero = Complex64::new(0.0, 0.0);
        let mut a = self.0;
        let mut inv = Self::identity().0;
        if a[1][0].norm() > a[0][0].norm() {
            a.swap(0, 1);
            inv.swap(0, 1);
        }
        let p0 = a[0][0];
        if p0 == zero {
            return None;
        }
        let l = a[1][0] / p0;
        for c in 0..2 {
            a[1][c] -= l * a[0][c];
            inv[1][c] -= l * inv[0][c];
        }
        let p1 = a[1][1];
        if p1 == zero {
            return None;
        }
        for c in 0..2 {
            inv[1][c] /= p1;
        }
        for c in 0..2 {
            inv[0][c] = (inv[0][c] - a[0][1] * inv[1][c]) / p0;
        }
        Some(Jones(inv))
    }

    /// Singular value decomposition `A = Σ σ_i u_i v_i†`, as
    /// `[(σ_1, u_1, v_1), (σ_2, u_2, v_2)]` with `σ_1 ≥ σ_2`.
    pub fn svd(&self) -> [(f64, [Complex64; 2], [Complex64; 2]); 2] {
        let (s1, s2) = self.singular_values();
        let g = self.adjoint() * *self;
        let (a, b, d) = (g.0[0][0].re, g.0[0][1], g.0[1][1].re);
        let lam = s1 * s1;
        // eigenvector of A†A for λ_max; pick the better-conditioned form
        let cand1 = [b, Complex64::new(lam - a, 0.0)];
        let cand2 = [Complex64::new(lam - d, 0.0), b.conj()];
        let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
        let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
        let v1 = if n1.max(n2) == 0.0 {
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        } else if n1 >= n2 {
            normalize(cand1)
        } else {
            normalize(cand2)
        };
        let v2 = complement(v1);
        let u1 = if s1 > 0.0 {
            let w = self.apply(v1);
            [w[0] / s1, w[1] / s1]
        } else {
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        };
        // A v2 is orthogonal to u1; take its phase against the complement,
        // which stays accurate when σ_2 is tiny
        let c = complement(u1);
        let w = self.apply(v2);
        let p = c[0].conj() * w[0] + c[1].conj() * w[1];
        let ph = if p.norm() > 0.0 { p / p.norm() } else { Complex64::new(1.0, 0.0) };
        let u2 = [c[0] * ph, c[1] * ph];
        [(s1, u1, v1), (s2, u2, v2)]
    }

    /// Tikhonov-regularized pseudo-inverse `Σ σ_i/(σ_i² + ε²) v_i u_i†`.
    pub fn regularized_inverse(&self, eps: f64) -> Self {
        let mut out = Self::ZERO;
        for (s, u, v) in self.svd() {
            if s == 0.0 {
                continue;
            }
            let w = s / (s * s + eps * eps);
            for r in 0..2 {
                for c in 0..2 {
                    out.0[r][c] += v[r] * u[c].conj() * w;
                }
            }
        }
        out
    }

    /// Haar-distributed element of U(2).
    ///
    /// Gram-Schmidt on two columns of i.i.d. complex Gaussians. The
    /// implied QR factor has a positive real diagonal, which is exactly the
    /// phase convention that makes the result Haar rather than merely
    /// unitary.
    pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut g = || {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        };
        let a = [g(), g()];
        let b = [g(), g()];
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        let q0 = [a[0] / na, a[1] / na];
        let proj = q0[0].conj() * b[0] + q0[1].conj() * b[1];
        let r = [b[0] - proj * q0[0], b[1] - proj * q0[1]];
        let nr = (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
        let q1 = [r[0] / nr, r[1] / nr];
        Self::new(q0[0], q1[0], q0[1], q1[1])
    }
}

fn normalize(v: [Complex64; 2]) -> [Complex64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Unit vector orthogonal to unit vector `v`.
fn complement(v: [Complex64; 2]) -> [Complex64; 2] {
    [-v[1].conj(), v[0].conj()]
}

impl Mul for Jones {
    type Output = Jones;

    fn mul(self, rhs: Jones) -> Jones {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Jones(out)
    }
}

impl Add for Jones {
    type Output = Jones;

    fn add(mut self, rhs: Jones) -> Jones {
        self += rhs;
        self
    }
}

impl AddAssign for Jones {
    fn add_assign(&mut self, rhs: Jones) {
        for r in 0..2 {
            for c in 0..2 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
    }
}

impl Sub for Jones {
    type Output = Jones;

    fn sub(self, rhs: Jones) -> Jones {
        self + rhs.scale((-1.0).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn haar_draws_are_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let j = Jones::sample_haar(&mut rng);
            let p = j * j.adjoint();
            assert!((p - Jones::identity()).max_abs() < 1e-12);
            assert!((j.det().norm() - 1.0).abs() < 1e-12);
        }
    }

    /// Kolmogorov-Smirnov statistic of samples against Uniform[0, 1].
    fn ks_uniform(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = x - i as f64 / n;
                let hi = (i + 1) as f64 / n - x;
                lo.max(hi)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn haar_marginal_is_uniform() {
        // For Haar U(2), |J_xx|^2 ~ Uniform[0, 1].
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| Jones::sample_haar(&mut rng).xx().norm_sqr())
            .collect();
        let d = ks_uniform(xs);
        // asymptotic critical value at α = 0.01
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d < crit, "KS D = {d}, critical {crit}");
    }

    #[test]
    fn haar_phase_of_entry_is_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let z = Jones::sample_haar(&mut rng).yx();
                (z.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
            })
            .collect();
        assert!(ks_uniform(xs) < 1.628 / (n as f64).sqrt());
    }

    #[test]
    fn inverse_of_general_matrix() {
        let a = Jones::new(c(1.0, 2.0), c(-0.5, 0.3), c(0.1, -1.0), c(2.0, 0.0));
        let inv = a.inverse().unwrap();
        assert!((inv * a - Jones::identity()).max_abs() < 1e-14);
        assert!((a * inv - Jones::identity()).max_abs() < 1e-14);
    }

    #[test]
    fn inverse_needs_pivoting() {
        let a = Jones::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(a.inverse().unwrap(), a);
        assert!(Jones::ZERO.inverse().is_none());
        let rank1 = Jones::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        assert!(rank1.inverse().is_none());
    }

    #[test]
    fn singular_values_of_diagonal() {
        let d = Jones::diag(c(0.0, 3.0), c(-0.5, 0.0));
        let (smax, smin) = d.singular_values();
        assert!((smax - 3.0).abs() < 1e-14);
        assert!((smin - 0.5).abs() < 1e-14);
        assert!((d.condition_number() - 6.0).abs() < 1e-13);
        assert_eq!(Jones::ZERO.condition_number(), f64::INFINITY);
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let mut mats = vec![
            Jones::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)),
            Jones::diag(c(0.0, 0.0), c(3.0, 1.0)),
            Jones::ZERO,
            Jones::identity(),
        ];
        for _ in 0..50 {
            let u = Jones::sample_haar(&mut rng);
            let v = Jones::sample_haar(&mut rng);
            mats.push(u * Jones::diag(c(2.0, 0.0), c(1e-9, 0.0)) * v);
        }
        for m in mats {
            let mut back = Jones::ZERO;
            for (s, u, v) in m.svd() {
                for r in 0..2 {
                    for col in 0..2 {
                        back.0[r][col] += u[r] * v[col].conj() * s;
                    }
                }
            }
            assert!((back - m).max_abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn regularized_inverse_limits() {
        let a = Jones::new(c(1.0, 2.0), c(-0.5, 0.3), c(0.1, -1.0), c(2.0, 0.0));
        let pinv = a.regularized_inverse(1e-12);
        assert!((pinv - a.inverse().unwrap()).max_abs() < 1e-12);
        assert_eq!(Jones::ZERO.regularized_inverse(0.0), Jones::ZERO);
        // rank-one: pseudo-inverse stays bounded
        let rank1 = Jones::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        let p = rank1.regularized_inverse(1e-12);
        assert!(p.max_abs() < 1.0);
        assert!((rank1 * p * rank1 - rank1).max_abs() < 1e-9);
    }
}
