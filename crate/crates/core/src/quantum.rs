//! Real two-level polarization algebra for the photon pair.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::models::{pw_bracket, recommended_bracket, ScatterAngles, TWO_PI};
use crate::quadrature;
use crate::sampling::OrthSign;

const UNIT_NORM_TOLERANCE: f64 = 1e-12;

/// Linear polarization state on the `{|x⟩, |y⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolVector(pub Vector2<f64>);

impl PolVector {
    /// `cos Φ |x⟩ + sin Φ |y⟩`.
    pub fn linear(big_phi: f64) -> Self {
        PolVector(Vector2::new(big_phi.cos(), big_phi.sin()))
    }

    pub fn x() -> Self {
        PolVector(Vector2::new(1.0, 0.0))
    }

    pub fn y() -> Self {
        PolVector(Vector2::new(0.0, 1.0))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Two-photon state on `|x⟩|x⟩, |x⟩|y⟩, |y⟩|x⟩, |y⟩|y⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState(pub Vector4<f64>);

impl PairState {
    pub fn product(a: &PolVector, b: &PolVector) -> Self {
        PairState(Vector4::new(a.0.x * b.0.x, a.0.x * b.0.y, a.0.y * b.0.x, a.0.y * b.0.y))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Exchanges photon 1 and photon 2.
    pub fn swapped(&self) -> Self {
        let v = self.0;
        PairState(Vector4::new(v[0], v[2], v[1], v[3]))
    }

    pub fn max_abs_diff(&self, other: &PairState) -> f64 {
        (self.0 - other.0).amax()
    }
}

/// Single-photon scattering matrix `F·𝕀 − G cos 2φ σ_z − G sin 2φ σ_x`,
/// without the `r₀²/2` prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMatrix(pub Matrix2<f64>);

impl ScatterMatrix {
    pub fn eigenvalues(&self) -> (f64, f64) {
        let e = self.0.symmetric_eigenvalues();
        (e[0].min(e[1]), e[0].max(e[1]))
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[(0, 1)] == self.0[(1, 0)]
    }
}

pub fn sigma_z() -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, -1.0)
}

pub fn sigma_x() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, 1.0, 0.0)
}

/// `(|x⟩|y⟩ − |y⟩|x⟩)/√2`.
pub fn singlet() -> PairState {
    PairState(Vector4::new(0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0))
}

/// `(|Φ⟩|Φ+π/2⟩ − |Φ+π/2⟩|Φ⟩)/√2`, built term by term.
pub fn rotated_singlet(big_phi: f64) -> PairState {
    let a = PolVector::linear(big_phi);
    let b = PolVector::linear(big_phi + FRAC_PI_2);
    let v = PairState::product(&a, &b).0 - PairState::product(&b, &a).0;
    PairState(v / v.norm())
}

pub fn scatter_matrix(chi: f64, varphi: f64) -> Result<ScatterMatrix> {
    let a = ScatterAngles::new(chi, varphi)?;
    Ok(matrix_of(&a))
}

fn matrix_of(a: &ScatterAngles) -> ScatterMatrix {
    let (f, g) = (a.f(), a.g());
    let t = 2.0 * a.phi;
    ScatterMatrix(Matrix2::identity() * f - sigma_z() * (g * t.cos()) - sigma_x() * (g * t.sin()))
}

/// `⟨Φ|S|Φ⟩` for a unit polarization vector.
pub fn expectation_single(pol: &PolVector, chi: f64, varphi: f64) -> Result<f64> {
    let norm = pol.norm();
    if norm.is_nan() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::Domain {
            what: "polarization norm",
            value: norm,
            domain: "1 ± 1e-12",
        });
    }
    let s = scatter_matrix(chi, varphi)?;
    Ok(pol.0.dot(&(s.0 * pol.0)))
}

/// `⟨Ψ|S₁⊗S₂|Ψ⟩` on the singlet, fixed-frame azimuths.
pub fn expectation_pair(chi1: f64, varphi1: f64, chi2: f64, varphi2: f64) -> Result<f64> {
    let s1 = scatter_matrix(chi1, varphi1)?;
    let s2 = scatter_matrix(chi2, varphi2)?;
    let joint: Matrix4<f64> = s1.0.kronecker(&s2.0);
    let psi = singlet().0;
    Ok(psi.dot(&(joint * psi)))
}

/// Reconstructs the singlet as `±(1/(π√2)) ∫ |Φ⟩|Φ±π/2⟩ dΦ` over `[0, 2π)`
/// with an `nodes`-point periodic rule; returns the larger componentwise
/// deviation of the two branches.
pub fn decomposition_error(nodes: usize) -> f64 {
    let target = singlet();
    [OrthSign::Plus, OrthSign::Minus]
        .iter()
        .map(|&sign| {
            let coeff = f64::from(sign.as_i8()) / (PI * 2f64.sqrt());
            let component = |k: usize| {
                quadrature::periodic(nodes, 0.0, |p| {
                    let s = PairState::product(&PolVector::linear(p), &PolVector::linear(p + sign.shift()));
                    s.0[k]
                })
            };
            let v = Vector4::from_fn(|k, _| coeff * component(k));
            PairState(v).max_abs_diff(&target)
        })
        .fold(0.0, f64::max)
}

/// Node count used by [`decomposition_check`].
pub const DECOMPOSITION_NODES: usize = 256;

pub fn decomposition_check() -> f64 {
    decomposition_error(DECOMPOSITION_NODES)
}

/// Nodes of the periodic rule for Φ-averages; the integrands are
/// trigonometric polynomials of degree ≤ 4 in Φ, so this is exact.
pub const AVERAGING_NODES: usize = 64;

/// `|(1/2π)∫ B(ϕ₁, ϕ₂) dΦ − PW(φ₁, φ₂)|` where `ϕ₁ = φ₁ − Φ`,
/// `ϕ₂ = φ₂ − Φ − sign·π/2` and `B` is `bracket`.
pub fn averaging_residual_with<B>(fixed1: &ScatterAngles, fixed2: &ScatterAngles, sign: OrthSign, bracket: B) -> f64
where
    B: Fn(&ScatterAngles, &ScatterAngles) -> f64,
{
    let avg = quadrature::periodic(AVERAGING_NODES, 0.0, |big_phi| {
        let a1 = fixed1.with_phi(fixed1.phi - big_phi);
        let a2 = fixed2.with_phi(fixed2.phi - big_phi - sign.shift());
        bracket(&a1, &a2)
    }) / TWO_PI;
    (avg - pw_bracket(fixed1, fixed2)).abs()
}

/// Residual of the Φ-average of the recommended bracket against the
/// Pryce-Ward bracket, worst over both orthogonality signs.
pub fn averaging_identity(chi1: f64, varphi1: f64, chi2: f64, varphi2: f64) -> Result<f64> {
    let a1 = ScatterAngles::new(chi1, varphi1)?;
    let a2 = ScatterAngles::new(chi2, varphi2)?;
    Ok([OrthSign::Plus, OrthSign::Minus]
        .iter()
        .map(|&s| averaging_residual_with(&a1, &a2, s, recommended_bracket))
        .fold(0.0, f64::max))
}
