//! Elastic moment tensors for thin strip-like inclusions, built from the
//! interface transmission conditions.
//!
//! Across a material interface with unit normal `n`, the tangential part of
//! the displacement gradient and the normal traction are continuous:
//!
//! ```text
//! ∇u_e τ = ∇u_i τ,      C0 ∇̂u_e n = C1 ∇̂u_i n.
//! ```
//!
//! The first condition forces the interior strain to differ from the exterior
//! one by a rank-two update `e_i = e_e + δ⊗n + n⊗δ`; the second determines
//! `δ = ½ q((C0−C1) e_e n)` where `q` inverts the acoustic-type form
//! `ζ ↦ (C1(ζ⊗n))n`. Eliminating `e_i` yields a fourth-order tensor mapping
//! the exterior strain to the stress-contrast response — the elastic moment
//! tensor of a thin inclusion. Two sign conventions are in circulation:
//!
//! * [`Convention::Constructive`]: `M̃` with `(C0−C1) e_i = M̃ e_e`,
//!   `M̃ h = (C0−C1)h + (C0−C1)(q((C0−C1)h n) ⊗ n)`.
//! * [`Convention::Expansion`]: `T = −M̃`, so `(C1−C0) e_i = T e_e`. This is
//!   the tensor that enters the first-order boundary expansion and the one
//!   satisfying the upper bound `T E:E ≤ (C1−C0)E:E`; it is the default
//!   everywhere downstream. The convergence harness discriminates the two
//!   empirically.

use crate::scalar;
use crate::tensor::{SymMat2, Tensor4, SINGULAR_TOL};
use crate::vec2::Vec2;
use crate::Error;

/// Contrast below which the moment tensor short-circuits to exactly zero.
pub const ZERO_CONTRAST_TOL: f64 = 1e-13;

const UNIT_TOL: f64 = 1e-9;

/// Orthonormal frame `(n, τ)` on an interface or curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    n: Vec2,
    tau: Vec2,
}

impl Frame {
    /// Checks `|n| = |τ| = 1` and `n·τ = 0` to 1e-12.
    pub fn new(n: Vec2, tau: Vec2) -> Result<Frame, Error> {
        let defect = scalar::abs(n.norm() - 1.0)
            .max(scalar::abs(tau.norm() - 1.0))
            .max(scalar::abs(n.dot(tau)));
        if defect > 1e-12 {
            return Err(Error::BadFrame { defect });
        }
        Ok(Frame { n, tau })
    }

    /// Frame with `n = τ` rotated by -90 degrees.
    pub fn from_tangent(tau: Vec2) -> Result<Frame, Error> {
        Frame::new(tau.rot270(), tau)
    }

    /// Frame with `τ = n` rotated by +90 degrees.
    pub fn from_normal(n: Vec2) -> Result<Frame, Error> {
        Frame::new(n, n.rot90())
    }

    #[inline]
    pub fn normal(&self) -> Vec2 {
        self.n
    }

    #[inline]
    pub fn tangent(&self) -> Vec2 {
        self.tau
    }
}

/// Sign convention of a [`MomentTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Convention {
    /// `(C1−C0) e_i = T e_e`; enters the boundary expansion. Default.
    Expansion,
    /// `(C0−C1) e_i = M̃ e_e`; the raw laminate construction.
    Constructive,
}

/// A thin-inclusion elastic moment tensor together with its convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTensor {
    pub tensor: Tensor4,
    pub convention: Convention,
}

impl MomentTensor {
    /// The same tensor in the Expansion convention (exact negation when
    /// stored constructively).
    pub fn expansion_tensor(&self) -> Tensor4 {
        match self.convention {
            Convention::Expansion => self.tensor,
            Convention::Constructive => -self.tensor,
        }
    }
}

fn require_unit(n: Vec2) -> Result<(), Error> {
    let norm = n.norm();
    if scalar::abs(norm - 1.0) > UNIT_TOL {
        return Err(Error::NonUnitNormal { norm });
    }
    Ok(())
}

fn require_convex(c: &Tensor4) -> Result<f64, Error> {
    let margin = c.convexity_margin();
    if margin <= SINGULAR_TOL {
        return Err(Error::NotConvex { margin });
    }
    Ok(margin)
}

/// The matrix `Q` of the quadratic form `(Q ζ)·ξ = (C1(ζ⊗n)):(ξ⊗n)`.
///
/// `Q` is symmetric positive definite with smallest eigenvalue at least half
/// the convexity margin of `C1` (the factor comes from `|sym(ζ⊗n)|² ≥ ½|ζ|²`,
/// with equality when `ζ ⊥ n`).
pub fn q_inverse(c1: &Tensor4, n: Vec2) -> Result<SymMat2, Error> {
    require_convex(c1)?;
    require_unit(n)?;
    let basis = [Vec2::EX, Vec2::EY];
    let mut q = [[0.0; 2]; 2];
    for (i, &xi) in basis.iter().enumerate() {
        for (j, &zeta) in basis.iter().enumerate() {
            q[i][j] = c1.double_contract(SymMat2::sym_outer(zeta, n), SymMat2::sym_outer(xi, n));
        }
    }
    Ok(SymMat2::new(q[0][0], 0.5 * (q[0][1] + q[1][0]), q[1][1]))
}

/// The inverse of [`q_inverse`]: `q · q⁻¹ = I₂` to 1e-12.
pub fn q_matrix(c1: &Tensor4, n: Vec2) -> Result<SymMat2, Error> {
    let qi = q_inverse(c1, n)?;
    let det = qi.det();
    if scalar::abs(det) <= SINGULAR_TOL {
        return Err(Error::SingularTensor { margin: det });
    }
    Ok(SymMat2::new(qi.a22 / det, -qi.a12 / det, qi.a11 / det))
}

/// Interior strain and interface jump for a given exterior strain.
#[derive(Debug, Clone, Copy)]
pub struct Transmission {
    /// Strain on the inclusion side of the interface.
    pub e_int: SymMat2,
    /// Jump vector `δ` with `e_int = e_ext + δ⊗n + n⊗δ`.
    pub jump: Vec2,
}

/// Solves the transmission conditions for the interior strain:
/// `δ = ½ q((C0−C1) e_ext n)` and `e_int = e_ext + δ⊗n + n⊗δ`, after which
/// the traction condition `C1 e_int n = C0 e_ext n` holds.
pub fn transmission_solve(
    c0: &Tensor4,
    c1: &Tensor4,
    n: Vec2,
    e_ext: SymMat2,
) -> Result<Transmission, Error> {
    require_convex(c0)?;
    let q = q_matrix(c1, n)?;
    let w = (c0.contract(e_ext) - c1.contract(e_ext)).apply(n);
    let jump = q.apply(w) * 0.5;
    let e_int = e_ext + SymMat2::sym_outer(jump, n) * 2.0;
    Ok(Transmission { e_int, jump })
}

/// Builds the thin-inclusion moment tensor for phases `C0` (background) and
/// `C1` (inclusion) with interface normal `n`.
///
/// When the contrast `|C1−C0|` is below [`ZERO_CONTRAST_TOL`] the result is
/// exactly zero in either convention.
pub fn moment_tensor(
    c0: &Tensor4,
    c1: &Tensor4,
    n: Vec2,
    convention: Convention,
) -> Result<MomentTensor, Error> {
    require_convex(c0)?;
    require_convex(c1)?;
    require_unit(n)?;
    let d = *c0 - *c1;
    if d.frobenius() < ZERO_CONTRAST_TOL {
        return Ok(MomentTensor { tensor: Tensor4::ZERO, convention });
    }
    let q = q_matrix(c1, n)?;
    // Columns of M̃ over the Mandel basis: M̃h = Dh + D·sym(q((Dh)n) ⊗ n).
    let apply = |h: SymMat2| -> SymMat2 {
        let dh = d.contract(h);
        let w = dh.apply(n);
        dh + d.contract(SymMat2::sym_outer(q.apply(w), n))
    };
    let basis = [
        SymMat2::from_mandel([1.0, 0.0, 0.0]),
        SymMat2::from_mandel([0.0, 1.0, 0.0]),
        SymMat2::from_mandel([0.0, 0.0, 1.0]),
    ];
    let mut m = [[0.0; 3]; 3];
    for (col, &h) in basis.iter().enumerate() {
        let v = apply(h).to_mandel();
        for row in 0..3 {
            m[row][col] = v[row];
        }
    }
    let constructive = Tensor4::from_mandel(m);
    let tensor = match convention {
        Convention::Constructive => constructive,
        Convention::Expansion => -constructive,
    };
    Ok(MomentTensor { tensor, convention })
}

/// Closed-form coefficients of the isotropic moment tensor in the frame form
/// `M h = a tr(h) I₂ + b h + c ((hτ)·τ) τ⊗τ + d ((hn)·n) n⊗n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicMomentCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Reference closed-form coefficient set for isotropic phases, in the
/// Constructive convention.
///
/// These are the conventionally quoted rational expressions. The `a` and `d`
/// entries agree with the tensor produced by [`moment_tensor`]; the quoted
/// `b` and `c` do not (the shear coefficient is quoted at half its value).
/// Use [`fit_isotropic_coeffs`] on the constructed tensor for the set that is
/// consistent with the transmission conditions.
pub fn isotropic_moment_coeffs(
    lambda0: f64,
    mu0: f64,
    lambda1: f64,
    mu1: f64,
) -> Result<IsotropicMomentCoeffs, Error> {
    for (lambda, mu) in [(lambda0, mu0), (lambda1, mu1)] {
        if mu <= 0.0 || lambda + mu <= 0.0 {
            return Err(Error::BadLameParameters { lambda, mu });
        }
    }
    let a = (lambda0 - lambda1) * (lambda0 + 2.0 * mu0) / (lambda1 + 2.0 * mu1);
    let b = (mu0 - mu1) * mu0 / mu1;
    let c = (mu0 - mu1)
        * (2.0 * lambda1 * (mu1 - mu0) + mu1 * (lambda1 - lambda0) + 2.0 * mu1 * (mu1 - mu0))
        / (mu1 * (lambda1 + 2.0 * mu1));
    let d = 2.0 * (mu0 - mu1) * (mu1 * lambda0 - lambda1 * mu0) / (mu1 * (lambda1 + 2.0 * mu1));
    Ok(IsotropicMomentCoeffs { a, b, c, d })
}

/// Builds the tensor `h ↦ a tr(h) I + b h + c ((hτ)·τ)τ⊗τ + d ((hn)·n)n⊗n`.
pub fn coeffs_to_tensor(coeffs: &IsotropicMomentCoeffs, frame: &Frame) -> Tensor4 {
    let n = frame.normal();
    let tau = frame.tangent();
    let ttau = SymMat2::outer_self(tau);
    let nn = SymMat2::outer_self(n);
    let apply = |h: SymMat2| -> SymMat2 {
        SymMat2::IDENTITY * (coeffs.a * h.trace())
            + h * coeffs.b
            + ttau * (coeffs.c * h.apply(tau).dot(tau))
            + nn * (coeffs.d * h.apply(n).dot(n))
    };
    let basis = [
        SymMat2::from_mandel([1.0, 0.0, 0.0]),
        SymMat2::from_mandel([0.0, 1.0, 0.0]),
        SymMat2::from_mandel([0.0, 0.0, 1.0]),
    ];
    let mut m = [[0.0; 3]; 3];
    for (col, &h) in basis.iter().enumerate() {
        let v = apply(h).to_mandel();
        for row in 0..3 {
            m[row][col] = v[row];
        }
    }
    Tensor4::from_mandel(m)
}

/// Extracts `(a, b, c, d)` from a tensor assumed to lie in the frame family
/// of [`coeffs_to_tensor`]. Rebuilding with the result and comparing
/// entrywise tests membership in the family.
pub fn fit_isotropic_coeffs(tensor: &Tensor4, frame: &Frame) -> IsotropicMomentCoeffs {
    let n = frame.normal();
    let tau = frame.tangent();
    let ttau = SymMat2::outer_self(tau);
    let nn = SymMat2::outer_self(n);
    let shear = SymMat2::sym_outer(tau, n);
    let a = tensor.contract(nn).ddot(ttau);
    let b = 2.0 * tensor.contract(shear).ddot(shear);
    let c = tensor.contract(ttau).ddot(ttau) - a - b;
    let d = tensor.contract(nn).ddot(nn) - a - b;
    IsotropicMomentCoeffs { a, b, c, d }
}

/// Verdicts of the two-sided quadratic bound
/// `C0 C1⁻¹ (C1−C0) E:E  ≤  T E:E  ≤  (C1−C0) E:E`.
#[derive(Debug, Clone, Copy)]
pub struct BoundsReport {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub lower_value: f64,
    pub moment_value: f64,
    pub upper_value: f64,
}

/// Slack used when judging the sandwich bounds.
pub const BOUNDS_SLACK: f64 = 1e-10;

/// Evaluates the sandwich bounds for the Expansion-convention tensor on a
/// given strain. The upper bound holds universally
/// (`T E:E = (C1−C0)E:E − (q w)·w` with `w = ((C1−C0)E)n` and `q` positive
/// definite); the lower bound is reported, not asserted, because the
/// operator-composition form need not dominate for non-commuting
/// anisotropic pairs.
pub fn bounds_check(
    c0: &Tensor4,
    c1: &Tensor4,
    m: &MomentTensor,
    e: SymMat2,
) -> Result<BoundsReport, Error> {
    let t = m.expansion_tensor();
    let contrast = *c1 - *c0;
    let c1_inv = c1.invert()?;
    let lower_value = c0.contract(c1_inv.contract(contrast.contract(e))).ddot(e);
    let moment_value = t.double_contract(e, e);
    let upper_value = contrast.double_contract(e, e);
    Ok(BoundsReport {
        lower_ok: lower_value <= moment_value + BOUNDS_SLACK,
        upper_ok: moment_value <= upper_value + BOUNDS_SLACK,
        lower_value,
        moment_value,
        upper_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    pub(crate) fn random_unit(rng: &mut SplitMix64) -> Vec2 {
        Vec2::unit_from_angle(rng.uniform(0.0, 2.0 * scalar::PI))
    }

    pub(crate) fn random_sym(rng: &mut SplitMix64) -> SymMat2 {
        SymMat2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
    }

    /// Random unit-Frobenius tensor with convexity margin at least `margin`.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn random_convex_tensor(rng: &mut SplitMix64, margin: f64) -> Tensor4 {
        loop {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let v = rng.uniform(-1.0, 1.0);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let mut t = Tensor4::from_mandel(m);
            let e = t.convexity_margin();
            if e < margin + 0.05 {
                t = t + Tensor4::identity() * (margin + 0.1 - e);
            }
            let t = t * (1.0 / t.frobenius());
            if t.convexity_margin() >= margin {
                return t;
            }
        }
    }

    /// Brute-force transmission oracle: solves the 2-unknown linear system
    /// for the jump directly from the traction condition.
    fn transmission_oracle(c0: &Tensor4, c1: &Tensor4, n: Vec2, e_ext: SymMat2) -> SymMat2 {
        // (C1(δ⊗n + n⊗δ))n = ((C0−C1) e_ext) n, solved for δ by 2x2 inversion
        let col = |d: Vec2| -> Vec2 {
            c1.contract(SymMat2::sym_outer(d, n) * 2.0).apply(n)
        };
        let a0 = col(Vec2::EX);
        let a1 = col(Vec2::EY);
        let rhs = (c0.contract(e_ext) - c1.contract(e_ext)).apply(n);
        let det = a0.x * a1.y - a1.x * a0.y;
        let delta = Vec2::new((rhs.x * a1.y - a1.x * rhs.y) / det, (a0.x * rhs.y - rhs.x * a0.y) / det);
        e_ext + SymMat2::sym_outer(delta, n) * 2.0
    }

    #[test]
    fn q_inverse_isotropic_closed_form() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..20 {
            let (l1, m1) = (rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0));
            let c1 = Tensor4::isotropic(l1, m1);
            let n = random_unit(&mut rng);
            let qi = q_inverse(&c1, n).unwrap();
            let expect = SymMat2::IDENTITY * m1 + SymMat2::outer_self(n) * (l1 + m1);
            assert!((qi - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn q_inverse_specific_instance() {
        let c1 = Tensor4::isotropic(2.0, 3.0);
        let qi = q_inverse(&c1, Vec2::EY).unwrap();
        assert!((qi - SymMat2::new(3.0, 0.0, 8.0)).norm() < 1e-14);
        let q = q_matrix(&c1, Vec2::EY).unwrap();
        assert!((q - SymMat2::new(1.0 / 3.0, 0.0, 1.0 / 8.0)).norm() < 1e-14);
    }

    #[test]
    fn q_matrix_matches_isotropic_formula() {
        // q = (1/μ1) I − (λ1+μ1)/(μ1(λ1+2μ1)) n⊗n
        let (l1, m1) = (1.4, 0.9);
        let c1 = Tensor4::isotropic(l1, m1);
        let n = Vec2::EX;
        let q = q_matrix(&c1, n).unwrap();
        let expect = SymMat2::IDENTITY * (1.0 / m1)
            - SymMat2::outer_self(n) * ((l1 + m1) / (m1 * (l1 + 2.0 * m1)));
        assert!((q - expect).norm() < 1e-13);
    }

    #[test]
    fn q_product_is_identity_and_positive() {
        let mut rng = SplitMix64::new(37);
        for _ in 0..100 {
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let qi = q_inverse(&c1, n).unwrap();
            let q = q_matrix(&c1, n).unwrap();
            // product
            let p00 = q.a11 * qi.a11 + q.a12 * qi.a12;
            let p01 = q.a11 * qi.a12 + q.a12 * qi.a22;
            let p11 = q.a12 * qi.a12 + q.a22 * qi.a22;
            assert!((p00 - 1.0).abs() < 1e-12 && p01.abs() < 1e-12 && (p11 - 1.0).abs() < 1e-12);
            // positive definiteness with the sharp margin/2 constant
            let half_margin = 0.5 * c1.convexity_margin();
            for _ in 0..20 {
                let z = Vec2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
                assert!(qi.apply(z).dot(z) >= half_margin * z.norm_sq() - 1e-12);
            }
        }
    }

    #[test]
    fn q_rejects_non_unit_normal() {
        let c1 = Tensor4::isotropic(1.0, 1.0);
        assert!(matches!(
            q_inverse(&c1, Vec2::new(0.0, 1.5)),
            Err(Error::NonUnitNormal { .. })
        ));
    }

    #[test]
    fn transmission_no_contrast() {
        let c = Tensor4::isotropic(1.0, 1.0);
        let e = SymMat2::new(0.3, -0.2, 0.9);
        let t = transmission_solve(&c, &c, Vec2::EY, e).unwrap();
        assert!(t.jump.norm() < 1e-15);
        assert!((t.e_int - e).norm() < 1e-15);
    }

    #[test]
    fn transmission_traction_residual() {
        let c0 = Tensor4::isotropic(1.0, 1.0);
        let c1 = Tensor4::isotropic(2.0, 3.0);
        let t = transmission_solve(&c0, &c1, Vec2::EY, SymMat2::IDENTITY).unwrap();
        let resid = (c1.contract(t.e_int).apply(Vec2::EY) - c0.contract(SymMat2::IDENTITY).apply(Vec2::EY)).norm();
        assert!(resid < 1e-11, "traction residual {resid}");
    }

    #[test]
    fn transmission_matches_bruteforce_oracle() {
        let mut rng = SplitMix64::new(41);
        for _ in 0..200 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let e = random_sym(&mut rng);
            let got = transmission_solve(&c0, &c1, n, e).unwrap().e_int;
            let want = transmission_oracle(&c0, &c1, n, e);
            assert!((got - want).norm() < 1e-11);
            // tangential continuity is structural: (e_int − e_ext) τ ⋅ τ = 0
            let tau = n.rot90();
            assert!(((got - e).apply(tau)).dot(tau).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_tensor_zero_contrast() {
        let c = Tensor4::isotropic(1.7, 0.4);
        for conv in [Convention::Expansion, Convention::Constructive] {
            let m = moment_tensor(&c, &c, Vec2::EX, conv).unwrap();
            assert_eq!(m.tensor.frobenius(), 0.0);
        }
    }

    #[test]
    fn conventions_are_exact_negatives() {
        let mut rng = SplitMix64::new(43);
        for _ in 0..50 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let m = moment_tensor(&c0, &c1, n, Convention::Constructive).unwrap();
            let sum = t.tensor + m.tensor;
            assert_eq!(sum.frobenius(), 0.0, "conventions must negate exactly");
            assert_eq!(t.expansion_tensor().mandel(), m.expansion_tensor().mandel());
        }
    }

    #[test]
    fn defining_identity_against_transmission() {
        // (C1−C0) e_int = T e_ext for transmission-consistent pairs
        let mut rng = SplitMix64::new(47);
        for _ in 0..200 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let e = random_sym(&mut rng);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let e_int = transmission_solve(&c0, &c1, n, e).unwrap().e_int;
            let lhs = (c1 - c0).contract(e_int);
            let rhs = t.tensor.contract(e);
            assert!((lhs - rhs).norm() <= 1e-10 * e.norm().max(1e-30), "defining identity violated");
        }
    }

    #[test]
    fn moment_tensor_major_symmetry() {
        let mut rng = SplitMix64::new(53);
        for _ in 0..100 {
            let c0 = random_convex_tensor(&mut rng, 0.05);
            let c1 = random_convex_tensor(&mut rng, 0.05);
            let n = random_unit(&mut rng);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            assert!(t.tensor.symmetry_residual() < 1e-12);
            // pairing form of the same statement
            let h = random_sym(&mut rng);
            let g = random_sym(&mut rng);
            let v = t.tensor.contract(h).ddot(g) - t.tensor.contract(g).ddot(h);
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn frame_invariance_under_rotation() {
        let mut rng = SplitMix64::new(59);
        for _ in 0..50 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let e = random_sym(&mut rng);
            let theta = rng.uniform(0.0, 2.0 * scalar::PI);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let (c, s) = (scalar::cos(theta), scalar::sin(theta));
            let n_rot = Vec2::new(c * n.x - s * n.y, s * n.x + c * n.y);
            let t_rot = moment_tensor(&c0.rotated(theta), &c1.rotated(theta), n_rot, Convention::Expansion).unwrap();
            let lhs = t_rot.tensor.contract(e.rotated(theta));
            let rhs = t.tensor.contract(e).rotated(theta);
            assert!((lhs - rhs).norm() < 1e-11);
        }
    }

    #[test]
    fn normal_flip_invariance() {
        // n enters only through n⊗n, so T(-n) = T(n)
        let mut rng = SplitMix64::new(61);
        for _ in 0..50 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let t1 = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let t2 = moment_tensor(&c0, &c1, -n, Convention::Expansion).unwrap();
            assert!((t1.tensor - t2.tensor).frobenius() < 1e-13);
        }
    }

    #[test]
    fn printed_coeffs_instance_and_degenerate_cases() {
        let c = isotropic_moment_coeffs(1.0, 1.0, 2.0, 3.0).unwrap();
        assert!((c.a - (-3.0 / 8.0)).abs() < 1e-15);
        assert!((c.b - (-2.0 / 3.0)).abs() < 1e-15);
        assert!((c.c - (-23.0 / 12.0)).abs() < 1e-15);
        assert!((c.d - (-1.0 / 6.0)).abs() < 1e-15);

        let z = isotropic_moment_coeffs(1.3, 0.7, 1.3, 0.7).unwrap();
        assert_eq!((z.a, z.b, z.c, z.d), (0.0, 0.0, 0.0, 0.0));

        // equal shear moduli kill every coefficient but a
        let s = isotropic_moment_coeffs(1.1, 0.8, 2.4, 0.8).unwrap();
        assert_eq!(s.b, 0.0);
        assert_eq!(s.c, 0.0);
        assert_eq!(s.d, 0.0);
        assert!((s.a - (1.1 - 2.4) * (1.1 + 1.6) / (2.4 + 1.6)).abs() < 1e-15);

        assert!(isotropic_moment_coeffs(1.0, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn constructive_tensor_lies_in_frame_family() {
        let mut rng = SplitMix64::new(67);
        for _ in 0..100 {
            let (l0, m0) = (rng.uniform(-0.3, 2.0), rng.uniform(0.2, 3.0));
            let (l1, m1) = (rng.uniform(-0.3, 2.0), rng.uniform(0.2, 3.0));
            if l0 + m0 <= 0.05 || l1 + m1 <= 0.05 {
                continue;
            }
            let c0 = Tensor4::isotropic(l0, m0);
            let c1 = Tensor4::isotropic(l1, m1);
            let n = random_unit(&mut rng);
            let frame = Frame::from_normal(n).unwrap();
            let mt = moment_tensor(&c0, &c1, n, Convention::Constructive).unwrap();
            let fit = fit_isotropic_coeffs(&mt.tensor, &frame);
            let rebuilt = coeffs_to_tensor(&fit, &frame);
            assert!((rebuilt - mt.tensor).frobenius() < 1e-12, "not in the a,b,c,d family");
        }
    }

    #[test]
    fn fitted_coeffs_match_derived_formulas() {
        // independent closed-form oracle for the fitted coefficients
        let mut rng = SplitMix64::new(71);
        for _ in 0..50 {
            let (l0, m0) = (rng.uniform(0.1, 2.0), rng.uniform(0.2, 3.0));
            let (l1, m1) = (rng.uniform(0.1, 2.0), rng.uniform(0.2, 3.0));
            let c0 = Tensor4::isotropic(l0, m0);
            let c1 = Tensor4::isotropic(l1, m1);
            let n = random_unit(&mut rng);
            let frame = Frame::from_normal(n).unwrap();
            let mt = moment_tensor(&c0, &c1, n, Convention::Constructive).unwrap();
            let fit = fit_isotropic_coeffs(&mt.tensor, &frame);
            let md = m0 - m1;
            let a = (l0 - l1) * (l0 + 2.0 * m0) / (l1 + 2.0 * m1);
            let b = 2.0 * md * m0 / m1;
            let c = 2.0 * md * (m1 * (l1 - l0) + l1 * (m1 - m0) + 2.0 * m1 * (m1 - m0))
                / (m1 * (l1 + 2.0 * m1));
            let d = 2.0 * md * (m1 * l0 - l1 * m0) / (m1 * (l1 + 2.0 * m1));
            assert!((fit.a - a).abs() < 1e-12);
            assert!((fit.b - b).abs() < 1e-12);
            assert!((fit.c - c).abs() < 1e-12);
            assert!((fit.d - d).abs() < 1e-12);
            // printed a and d agree with the construction; b differs by 2
            let printed = isotropic_moment_coeffs(l0, m0, l1, m1).unwrap();
            assert!((printed.a - fit.a).abs() < 1e-12);
            assert!((printed.d - fit.d).abs() < 1e-12);
            assert!((2.0 * printed.b - fit.b).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_zero_strain_equality() {
        let c0 = Tensor4::isotropic(1.0, 1.0);
        let c1 = Tensor4::isotropic(2.0, 3.0);
        let t = moment_tensor(&c0, &c1, Vec2::EY, Convention::Expansion).unwrap();
        let r = bounds_check(&c0, &c1, &t, SymMat2::ZERO).unwrap();
        assert!(r.lower_ok && r.upper_ok);
        assert_eq!(r.lower_value, 0.0);
        assert_eq!(r.moment_value, 0.0);
        assert_eq!(r.upper_value, 0.0);
    }

    #[test]
    fn bounds_isotropic_sweep() {
        let mut rng = SplitMix64::new(73);
        for _ in 0..1000 {
            let (l0, m0) = (rng.uniform(0.05, 2.0), rng.uniform(0.1, 3.0));
            let (l1, m1) = (rng.uniform(0.05, 2.0), rng.uniform(0.1, 3.0));
            let c0 = Tensor4::isotropic(l0, m0);
            let c1 = Tensor4::isotropic(l1, m1);
            let n = random_unit(&mut rng);
            let e = random_sym(&mut rng);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let r = bounds_check(&c0, &c1, &t, e).unwrap();
            assert!(r.upper_ok, "upper bound must hold");
            assert!(r.lower_ok, "isotropic lower bound must hold");
        }
    }

    #[test]
    fn bounds_anisotropic_upper_always() {
        let mut rng = SplitMix64::new(79);
        let mut lower_violations = 0usize;
        for _ in 0..500 {
            let c0 = random_convex_tensor(&mut rng, 0.1);
            let c1 = random_convex_tensor(&mut rng, 0.1);
            let n = random_unit(&mut rng);
            let e = random_sym(&mut rng);
            let t = moment_tensor(&c0, &c1, n, Convention::Expansion).unwrap();
            let r = bounds_check(&c0, &c1, &t, e).unwrap();
            assert!(r.upper_ok, "upper bound must hold even for anisotropic pairs");
            if !r.lower_ok {
                lower_violations += 1;
            }
        }
        // logged, not asserted: the composition form can fail off the
        // commuting case
        let _ = lower_violations;
    }

    #[test]
    fn frame_invariants() {
        let f = Frame::from_tangent(Vec2::EX).unwrap();
        assert_eq!(f.normal(), Vec2::new(0.0, -1.0));
        assert!(Frame::new(Vec2::EX, Vec2::new(0.1, 1.0)).is_err());
    }
}
