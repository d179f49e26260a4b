//! Symmetric 2x2 matrices, fully symmetric fourth-order tensors, and rigid
//! motions for planar linearized elasticity.
//!
//! Fourth-order tensors are stored as 3x3 matrices in the orthonormal Mandel
//! basis of symmetric matrices `{e1⊗e1, e2⊗e2, (e1⊗e2 + e2⊗e1)/√2}`. In this
//! basis the matrix of a major-symmetric tensor is symmetric, its eigenvalues
//! are the extremes of the quadratic form `C A : A` over unit-Frobenius
//! symmetric `A`, and composition and inversion are plain 3x3 matrix algebra.

// indexed loops mirror the matrix formulas throughout this module
#![allow(clippy::needless_range_loop)]

use crate::scalar::{self, SQRT_2};
use crate::vec2::Vec2;
use crate::Error;
use core::ops::{Add, Mul, Neg, Sub};

/// Tolerance below which a convexity margin counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// A symmetric 2x2 matrix (strain, stress, or plain quadratic form).
///
/// Only the symmetric part is ever stored, so symmetrization is idempotent by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 { a11: 0.0, a12: 0.0, a22: 0.0 };
    pub const IDENTITY: SymMat2 = SymMat2 { a11: 1.0, a12: 0.0, a22: 1.0 };

    #[inline]
    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymMat2 { a11, a12, a22 }
    }

    /// Symmetric part of a general 2x2 matrix given row-wise.
    #[inline]
    pub fn symmetrize(m: [[f64; 2]; 2]) -> Self {
        SymMat2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
    }

    /// `sym(u ⊗ v)`.
    #[inline]
    pub fn sym_outer(u: Vec2, v: Vec2) -> Self {
        SymMat2::new(u.x * v.x, 0.5 * (u.x * v.y + u.y * v.x), u.y * v.y)
    }

    /// `u ⊗ u`.
    #[inline]
    pub fn outer_self(u: Vec2) -> Self {
        SymMat2::new(u.x * u.x, u.x * u.y, u.y * u.y)
    }

    /// Matrix-vector product `A v`.
    #[inline]
    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a12 * v.x + self.a22 * v.y)
    }

    #[inline]
    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    #[inline]
    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Frobenius inner product `A : B` (off-diagonal counted twice).
    #[inline]
    pub fn ddot(self, other: SymMat2) -> f64 {
        self.a11 * other.a11 + self.a22 * other.a22 + 2.0 * self.a12 * other.a12
    }

    /// Frobenius norm `|A| = (Σ A_ij²)^{1/2}`.
    #[inline]
    pub fn norm(self) -> f64 {
        scalar::sqrt(self.ddot(self))
    }

    /// Coordinates in the orthonormal Mandel basis.
    #[inline]
    pub fn to_mandel(self) -> [f64; 3] {
        [self.a11, self.a22, SQRT_2 * self.a12]
    }

    #[inline]
    pub fn from_mandel(v: [f64; 3]) -> Self {
        SymMat2::new(v[0], v[2] / SQRT_2, v[1])
    }

    /// Eigenvalues, smallest first.
    pub fn eigenvalues(self) -> [f64; 2] {
        let mean = 0.5 * self.trace();
        let r = scalar::hypot(0.5 * (self.a11 - self.a22), self.a12);
        [mean - r, mean + r]
    }

    /// Congruence transform `R A Rᵀ` for a rotation by `theta`.
    pub fn rotated(self, theta: f64) -> SymMat2 {
        let (c, s) = (scalar::cos(theta), scalar::sin(theta));
        SymMat2::new(
            c * c * self.a11 - 2.0 * c * s * self.a12 + s * s * self.a22,
            c * s * (self.a11 - self.a22) + (c * c - s * s) * self.a12,
            s * s * self.a11 + 2.0 * c * s * self.a12 + c * c * self.a22,
        )
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 + rhs.a11, self.a12 + rhs.a12, self.a22 + rhs.a22)
    }
}

impl Sub for SymMat2 {
    type Output = SymMat2;
    fn sub(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 - rhs.a11, self.a12 - rhs.a12, self.a22 - rhs.a22)
    }
}

impl Mul<f64> for SymMat2 {
    type Output = SymMat2;
    fn mul(self, rhs: f64) -> SymMat2 {
        SymMat2::new(self.a11 * rhs, self.a12 * rhs, self.a22 * rhs)
    }
}

impl Neg for SymMat2 {
    type Output = SymMat2;
    fn neg(self) -> SymMat2 {
        self * -1.0
    }
}

/// A fully symmetric fourth-order tensor acting on symmetric 2x2 matrices,
/// stored as its 3x3 Mandel matrix.
///
/// Major symmetry `C_ijkl = C_klij` is the symmetry of the stored matrix;
/// minor symmetries are implied because the tensor only acts on and returns
/// symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor4 {
    m: [[f64; 3]; 3],
}

impl Tensor4 {
    pub const ZERO: Tensor4 = Tensor4 { m: [[0.0; 3]; 3] };

    /// Identity on symmetric matrices.
    pub fn identity() -> Tensor4 {
        Tensor4 { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Isotropic tensor `λ I₂⊗I₂ + 2μ I₄`, i.e. `C A = λ tr(A) I + 2μ A`.
    pub fn isotropic(lambda: f64, mu: f64) -> Tensor4 {
        Tensor4 {
            m: [
                [lambda + 2.0 * mu, lambda, 0.0],
                [lambda, lambda + 2.0 * mu, 0.0],
                [0.0, 0.0, 2.0 * mu],
            ],
        }
    }

    /// Wraps a raw Mandel matrix. No symmetry is enforced; use
    /// [`Tensor4::symmetry_residual`] to diagnose.
    pub fn from_mandel(m: [[f64; 3]; 3]) -> Tensor4 {
        Tensor4 { m }
    }

    #[inline]
    pub fn mandel(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    /// Builds the tensor from its components `C_ijkl` (indices in `{0,1}`).
    /// The component function is minor-symmetrized, so it may be given in any
    /// index convention that agrees on symmetric inputs.
    pub fn from_components(c: impl Fn(usize, usize, usize, usize) -> f64) -> Tensor4 {
        let sym = |i: usize, j: usize, k: usize, l: usize| {
            0.25 * (c(i, j, k, l) + c(j, i, k, l) + c(i, j, l, k) + c(j, i, l, k))
        };
        // basis pairs (i,j) for Mandel slots, with √2 weight on the shear slot
        let idx = [(0usize, 0usize), (1, 1), (0, 1)];
        let w = [1.0, 1.0, SQRT_2];
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let (i, j) = idx[a];
                let (k, l) = idx[b];
                m[a][b] = w[a] * w[b] * sym(i, j, k, l);
            }
        }
        Tensor4 { m }
    }

    /// Component `C_ijkl` recovered from the Mandel matrix.
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let slot = |i: usize, j: usize| -> (usize, f64) {
            match (i, j) {
                (0, 0) => (0, 1.0),
                (1, 1) => (1, 1.0),
                _ => (2, 1.0 / SQRT_2),
            }
        };
        let (a, wa) = slot(i, j);
        let (b, wb) = slot(k, l);
        self.m[a][b] * wa * wb
    }

    /// Contraction `C A = Σ_kl C_ijkl A_kl`.
    pub fn contract(&self, a: SymMat2) -> SymMat2 {
        let v = a.to_mandel();
        let mut out = [0.0; 3];
        for r in 0..3 {
            out[r] = self.m[r][0] * v[0] + self.m[r][1] * v[1] + self.m[r][2] * v[2];
        }
        SymMat2::from_mandel(out)
    }

    /// Double contraction `C A : B = Σ C_ijkl A_kl B_ij`.
    pub fn double_contract(&self, a: SymMat2, b: SymMat2) -> f64 {
        self.contract(a).ddot(b)
    }

    /// Deviation from major symmetry of the Mandel matrix (max abs entry of
    /// `M - Mᵀ`).
    pub fn symmetry_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                r = r.max(scalar::abs(self.m[i][j] - self.m[j][i]));
            }
        }
        r
    }

    /// Smallest eigenvalue of the Mandel matrix, which equals
    /// `min { C A : A : |A| = 1, A symmetric }`.
    pub fn convexity_margin(&self) -> f64 {
        let e = self.eigenvalues();
        e[0]
    }

    /// Eigenvalues of the (symmetrized) Mandel matrix, ascending. Uses cyclic
    /// Jacobi rotations; the matrix is 3x3 so a handful of sweeps converges to
    /// machine precision.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut a = self.m;
        // symmetrize defensively; callers may hold raw input
        for i in 0..3 {
            for j in (i + 1)..3 {
                let v = 0.5 * (a[i][j] + a[j][i]);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        for _sweep in 0..32 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if off < 1e-30 * (1.0 + a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2]) {
                break;
            }
            for p in 0..2 {
                for q in (p + 1)..3 {
                    if scalar::abs(a[p][q]) < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = if theta >= 0.0 {
                        1.0 / (theta + scalar::sqrt(1.0 + theta * theta))
                    } else {
                        -1.0 / (-theta + scalar::sqrt(1.0 + theta * theta))
                    };
                    let c = 1.0 / scalar::sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..3 {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..3 {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        e
    }

    /// Composition `(C ∘ D) A = C (D A)`.
    pub fn compose(&self, other: &Tensor4) -> Tensor4 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.m[i][k] * other.m[k][j];
                }
                m[i][j] = s;
            }
        }
        Tensor4 { m }
    }

    /// Inverse as a map on symmetric matrices. Requires strong convexity:
    /// errors when the margin is at or below [`SINGULAR_TOL`].
    pub fn invert(&self) -> Result<Tensor4, Error> {
        let margin = self.convexity_margin();
        if margin <= SINGULAR_TOL {
            return Err(Error::SingularTensor { margin });
        }
        let m = &self.m;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if scalar::abs(det) <= SINGULAR_TOL {
            return Err(Error::SingularTensor { margin: det });
        }
        let inv = |r0: usize, c0: usize, r1: usize, c1: usize| (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        let mi = [
            [inv(1, 1, 2, 2), inv(0, 2, 2, 1), inv(0, 1, 1, 2)],
            [inv(1, 2, 2, 0), inv(0, 0, 2, 2), inv(0, 2, 1, 0)],
            [inv(1, 0, 2, 1), inv(0, 1, 2, 0), inv(0, 0, 1, 1)],
        ];
        Ok(Tensor4 { m: mi })
    }

    /// Frobenius norm of the Mandel matrix.
    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.m {
            for v in row {
                s += v * v;
            }
        }
        scalar::sqrt(s)
    }

    /// Detects an isotropic tensor and returns its Lame parameters when the
    /// entrywise deviation from `isotropic(λ, μ)` is at most `tol`.
    pub fn isotropy(&self, tol: f64) -> Option<(f64, f64)> {
        let lambda = self.m[0][1];
        let mu = 0.5 * self.m[2][2];
        let iso = Tensor4::isotropic(lambda, mu);
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max(scalar::abs(self.m[i][j] - iso.m[i][j]));
            }
        }
        if dev <= tol {
            Some((lambda, mu))
        } else {
            None
        }
    }

    /// Tensor with all components rotated by `theta`:
    /// `C'_ijkl = R_ia R_jb R_kc R_ld C_abcd`.
    pub fn rotated(&self, theta: f64) -> Tensor4 {
        let (c, s) = (scalar::cos(theta), scalar::sin(theta));
        let r = [[c, -s], [s, c]];
        Tensor4::from_components(|i, j, k, l| {
            let mut sum = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for p in 0..2 {
                        for q in 0..2 {
                            sum += r[i][a] * r[j][b] * r[k][p] * r[l][q] * self.component(a, b, p, q);
                        }
                    }
                }
            }
            sum
        })
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(self, rhs: Tensor4) -> Tensor4 {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += rhs.m[i][j];
            }
        }
        Tensor4 { m }
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(self, rhs: Tensor4) -> Tensor4 {
        let mut m = self.m;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= rhs.m[i][j];
            }
        }
        Tensor4 { m }
    }
}

impl Mul<f64> for Tensor4 {
    type Output = Tensor4;
    fn mul(self, rhs: f64) -> Tensor4 {
        let mut m = self.m;
        for row in &mut m {
            for v in row {
                *v *= rhs;
            }
        }
        Tensor4 { m }
    }
}

impl Neg for Tensor4 {
    type Output = Tensor4;
    fn neg(self) -> Tensor4 {
        self * -1.0
    }
}

/// Infinitesimal rigid motion `R(x) = W x + c` with `W = [[0, -w], [w, 0]]`.
///
/// Its symmetric gradient vanishes identically; the three generators span the
/// kernel of the strain operator in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub spin: f64,
    pub shift: Vec2,
}

impl RigidMotion {
    pub fn eval(&self, x: Vec2) -> Vec2 {
        Vec2::new(-self.spin * x.y + self.shift.x, self.spin * x.x + self.shift.y)
    }

    /// The two translations and the unit spin.
    pub fn generators() -> [RigidMotion; 3] {
        [
            RigidMotion { spin: 0.0, shift: Vec2::EX },
            RigidMotion { spin: 0.0, shift: Vec2::EY },
            RigidMotion { spin: 1.0, shift: Vec2::ZERO },
        ]
    }
}

/// Serialized forms of a tensor: either a raw Mandel matrix or Lame
/// parameters for an isotropic one.
#[cfg(feature = "serde")]
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    Isotropic { lambda: f64, mu: f64 },
    Mandel { mandel: [[f64; 3]; 3] },
}

#[cfg(feature = "serde")]
impl TensorSpec {
    pub fn to_tensor(&self) -> Tensor4 {
        match *self {
            TensorSpec::Isotropic { lambda, mu } => Tensor4::isotropic(lambda, mu),
            TensorSpec::Mandel { mandel } => Tensor4::from_mandel(mandel),
        }
    }

    pub fn from_tensor(t: &Tensor4) -> TensorSpec {
        if let Some((lambda, mu)) = t.isotropy(1e-14) {
            TensorSpec::Isotropic { lambda, mu }
        } else {
            TensorSpec::Mandel { mandel: *t.mandel() }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_sym(rng: &mut SplitMix64) -> SymMat2 {
        SymMat2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
    }

    fn random_tensor(rng: &mut SplitMix64) -> Tensor4 {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v = rng.uniform(-1.0, 1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let t = Tensor4::from_mandel(m);
        let n = t.frobenius();
        t * (1.0 / n)
    }

    /// Component-sum oracle for C A, independent of the Mandel machinery.
    fn contract_oracle(c: &Tensor4, a: SymMat2) -> SymMat2 {
        let aij = [[a.a11, a.a12], [a.a12, a.a22]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += c.component(i, j, k, l) * aij[k][l];
                    }
                }
            }
        }
        SymMat2::symmetrize(out)
    }

    fn double_contract_oracle(c: &Tensor4, a: SymMat2, b: SymMat2) -> f64 {
        let bij = [[b.a11, b.a12], [b.a12, b.a22]];
        let ca = contract_oracle(c, a);
        let caij = [[ca.a11, ca.a12], [ca.a12, ca.a22]];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += caij[i][j] * bij[i][j];
            }
        }
        s
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let m = [[1.0, 2.0], [4.0, 3.0]];
        let s = SymMat2::symmetrize(m);
        let s2 = SymMat2::symmetrize([[s.a11, s.a12], [s.a12, s.a22]]);
        assert_eq!(s, s2);
        assert_eq!(s.a12, 3.0);
    }

    #[test]
    fn isotropic_zero_lambda_half_mu_is_identity() {
        let c = Tensor4::isotropic(0.0, 0.5);
        let mut rng = SplitMix64::new(7);
        for _ in 0..50 {
            let a = random_sym(&mut rng);
            let ca = c.contract(a);
            assert!((ca - a).norm() < 1e-15);
        }
    }

    #[test]
    fn isotropic_on_identity() {
        // λ tr(I) I + 2μ I = (2λ + 2μ) I
        let c = Tensor4::isotropic(1.0, 1.0);
        let ci = c.contract(SymMat2::IDENTITY);
        assert!((ci - SymMat2::IDENTITY * 4.0).norm() < 1e-14);
    }

    #[test]
    fn isotropic_on_trace_free() {
        let c = Tensor4::isotropic(3.7, 0.9);
        let a = SymMat2::new(0.4, -1.3, -0.4);
        assert!((c.contract(a) - a * (2.0 * 0.9)).norm() < 1e-14);
        let shear = SymMat2::sym_outer(Vec2::EX, Vec2::EY);
        let c2 = Tensor4::isotropic(2.0, 0.7);
        assert!((c2.contract(shear) - shear * 1.4).norm() < 1e-15);
    }

    #[test]
    fn contract_matches_component_oracle() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..200 {
            let c = random_tensor(&mut rng);
            let a = random_sym(&mut rng);
            let lhs = c.contract(a);
            let rhs = contract_oracle(&c, a);
            assert!((lhs - rhs).norm() < 1e-14, "contract deviates from quadruple-sum oracle");
        }
    }

    #[test]
    fn contract_is_linear() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..100 {
            let c = random_tensor(&mut rng);
            let a = random_sym(&mut rng);
            let b = random_sym(&mut rng);
            let (x, y) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let lhs = c.contract(a * x + b * y);
            let rhs = c.contract(a) * x + c.contract(b) * y;
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn double_contract_identity_on_i2() {
        let c = Tensor4::identity();
        assert!((c.double_contract(SymMat2::IDENTITY, SymMat2::IDENTITY) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn double_contract_symmetric_and_matches_oracle() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let c = random_tensor(&mut rng);
            let a = random_sym(&mut rng);
            let b = random_sym(&mut rng);
            let v = c.double_contract(a, b);
            assert!((v - c.double_contract(b, a)).abs() < 1e-14);
            assert!((v - double_contract_oracle(&c, a, b)).abs() < 1e-14);
        }
    }

    #[test]
    fn convexity_margin_isotropic() {
        // brute-force minimization over sampled unit symmetric matrices
        let brute = |c: &Tensor4| {
            let mut best = f64::INFINITY;
            let mut rng = SplitMix64::new(3);
            for _ in 0..10_000 {
                let mut a = random_sym(&mut rng);
                let n = a.norm();
                if n < 1e-12 {
                    continue;
                }
                a = a * (1.0 / n);
                best = best.min(c.double_contract(a, a));
            }
            best
        };
        let c = Tensor4::isotropic(1.0, 1.0);
        assert!((c.convexity_margin() - 2.0).abs() < 1e-12);
        assert!((brute(&c) - 2.0).abs() < 2e-3);

        let c = Tensor4::isotropic(-0.4, 0.5);
        assert!((c.convexity_margin() - 0.2).abs() < 1e-12);
        assert!((brute(&c) - 0.2).abs() < 2e-3);
    }

    #[test]
    fn margin_shift_is_spectral() {
        let mut rng = SplitMix64::new(21);
        for _ in 0..50 {
            let c = random_tensor(&mut rng);
            let m = c.convexity_margin();
            let shifted = c - Tensor4::identity() * m;
            assert!(shifted.convexity_margin().abs() < 1e-12);
        }
    }

    #[test]
    fn strong_convexity_quantified() {
        let mut rng = SplitMix64::new(5);
        let c = Tensor4::isotropic(0.8, 1.4);
        let margin = c.convexity_margin();
        for _ in 0..1000 {
            let a = random_sym(&mut rng);
            assert!(c.double_contract(a, a) >= margin * a.ddot(a) - 1e-12);
        }
    }

    #[test]
    fn invert_identity_and_random() {
        let id = Tensor4::identity();
        assert_eq!(*id.invert().unwrap().mandel(), *id.mandel());

        let mut rng = SplitMix64::new(13);
        let mut tested = 0;
        while tested < 50 {
            let mut c = random_tensor(&mut rng);
            let m = c.convexity_margin();
            if m < 0.05 {
                c = c + Tensor4::identity() * (0.05 - m + 0.05);
            }
            let inv = c.invert().unwrap();
            let comp = c.compose(&inv);
            let dev = (comp - Tensor4::identity()).frobenius();
            assert!(dev < 1e-12 * c.frobenius().max(1.0), "compose-identity defect {dev}");
            tested += 1;
        }
    }

    #[test]
    fn invert_isotropic_checked_by_compose() {
        let c = Tensor4::isotropic(1.3, 0.8);
        let inv = c.invert().unwrap();
        assert!((c.compose(&inv) - Tensor4::identity()).frobenius() < 1e-13);
        // inverse of an isotropic tensor is isotropic
        assert!(inv.isotropy(1e-13).is_some());
    }

    #[test]
    fn invert_rejects_singular() {
        let c = Tensor4::isotropic(0.0, 0.0);
        assert!(matches!(c.invert(), Err(Error::SingularTensor { .. })));
    }

    #[test]
    fn mandel_component_round_trip() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..100 {
            let c = random_tensor(&mut rng);
            let rt = Tensor4::from_components(|i, j, k, l| c.component(i, j, k, l));
            let dev = (rt - c).frobenius();
            assert!(dev < 1e-14, "round trip defect {dev}");
        }
    }

    #[test]
    fn constructors_have_major_symmetry() {
        let mut rng = SplitMix64::new(19);
        for _ in 0..50 {
            let c = random_tensor(&mut rng);
            assert!(c.symmetry_residual() < 1e-14);
            assert!(c.rotated(rng.uniform(0.0, 2.0 * scalar::PI)).symmetry_residual() < 1e-13);
        }
        assert_eq!(Tensor4::isotropic(2.0, 3.0).symmetry_residual(), 0.0);
    }

    #[test]
    fn rigid_motions_have_zero_strain() {
        // finite-difference symmetric gradient at random points
        let mut rng = SplitMix64::new(23);
        for r in RigidMotion::generators() {
            for _ in 0..20 {
                let x = Vec2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
                let h = 1e-6;
                let dx = (r.eval(x + Vec2::EX * h) - r.eval(x - Vec2::EX * h)) / (2.0 * h);
                let dy = (r.eval(x + Vec2::EY * h) - r.eval(x - Vec2::EY * h)) / (2.0 * h);
                let strain = SymMat2::symmetrize([[dx.x, dy.x], [dx.y, dy.y]]);
                assert!(strain.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenvalues_match_rayleigh_extremes() {
        let mut rng = SplitMix64::new(29);
        let c = random_tensor(&mut rng);
        let e = c.eigenvalues();
        for _ in 0..2000 {
            let mut a = random_sym(&mut rng);
            let n = a.norm();
            if n < 1e-9 {
                continue;
            }
            a = a * (1.0 / n);
            let q = c.double_contract(a, a);
            assert!(q > e[0] - 1e-10 && q < e[2] + 1e-10);
        }
    }

    #[test]
    fn rotation_preserves_isotropy() {
        let c = Tensor4::isotropic(1.7, 0.6);
        let r = c.rotated(0.83);
        assert!((r - c).frobenius() < 1e-13);
    }
}
