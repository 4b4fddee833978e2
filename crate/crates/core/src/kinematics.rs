//! Polar-angle kinematics of 511 keV Compton scattering.
//!
//! For a photon whose energy equals the electron rest energy, the
//! Klein-Nishina cross section depends on the polar scattering cosine `χ`
//! only through
//!
//! ```text
//! F(χ) = (2 + (1 − χ)³) / (2 − χ)³        G(χ) = (1 − χ²) / (2 − χ)²
//! ```
//!
//! Every evaluator in this crate works with the dimensionless bracket built
//! from `F` and `G`. The physical prefactors are exposed as constants but
//! never folded in.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature;

/// Classical electron radius in metres (CODATA 2018).
pub const CLASSICAL_ELECTRON_RADIUS: f64 = 2.817_940_326_2e-15;

/// Prefactor `r₀²/2` multiplying the single-photon bracket `F − G cos 2ϕ`.
pub const SINGLE_PREFACTOR: f64 = CLASSICAL_ELECTRON_RADIUS * CLASSICAL_ELECTRON_RADIUS / 2.0;

/// Prefactor `r₀⁴/16` multiplying every two-photon bracket.
pub const PAIR_PREFACTOR: f64 = SINGLE_PREFACTOR * SINGLE_PREFACTOR / 4.0;

/// Supremum of `F + G` over `[-1, 1]`, attained at `χ = 1`.
pub const SUP_F_PLUS_G: f64 = 2.0;

/// Maximum of `G`, attained at `χ = 1/2`.
pub const MAX_G: f64 = 1.0 / 3.0;

const LAMBDA_TOLERANCE: f64 = 1e-10;

/// Cosine of the polar scattering angle, guaranteed to lie in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PolarCosine(f64);

impl PolarCosine {
    pub fn new(chi: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&chi) {
            Ok(PolarCosine(chi))
        } else {
            Err(Error::Domain {
                what: "polar cosine",
                value: chi,
                domain: "[-1, 1]",
            })
        }
    }

    /// Caller guarantees `chi ∈ [-1, 1]`.
    #[inline]
    pub(crate) fn new_unchecked(chi: f64) -> Self {
        debug_assert!((-1.0..=1.0).contains(&chi));
        PolarCosine(chi)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PolarCosine {
    type Error = Error;

    fn try_from(chi: f64) -> Result<Self> {
        PolarCosine::new(chi)
    }
}

#[inline]
pub(crate) fn f_raw(chi: f64) -> f64 {
    let d = 2.0 - chi;
    let u = 1.0 - chi;
    (2.0 + u * u * u) / (d * d * d)
}

#[inline]
pub(crate) fn g_raw(chi: f64) -> f64 {
    let d = 2.0 - chi;
    (1.0 - chi * chi) / (d * d)
}

/// `F(χ)`, always positive.
#[inline]
pub fn big_f(chi: PolarCosine) -> f64 {
    f_raw(chi.0)
}

/// `G(χ)`, non-negative and vanishing at `χ = ±1`.
#[inline]
pub fn big_g(chi: PolarCosine) -> f64 {
    g_raw(chi.0)
}

/// Integral constants of the kinematic functions over `χ ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicConstants {
    /// `𝓕 = ∫F dχ = (40 − 27 ln 3)/9`
    pub big_f_int: f64,
    /// `𝒢 = ∫G dχ = 4 (ln 3 − 1)`
    pub big_g_int: f64,
    /// `𝒢/𝓕`, the azimuthal modulation of the marginal Klein-Nishina distribution.
    pub ratio: f64,
    /// `λ = (2𝓕)⁻¹ ∫G²/F dχ`, the modulation suppression of direct Pryce-Ward sampling.
    pub lambda: f64,
}

impl KinematicConstants {
    fn compute() -> Self {
        let ln3 = 3f64.ln();
        let big_f_int = (40.0 - 27.0 * ln3) / 9.0;
        let big_g_int = 4.0 * (ln3 - 1.0);
        // No closed form is known for ∫G²/F; the quadrature value is authoritative.
        let integral = quadrature::adaptive(
            |x| {
                let g = g_raw(x);
                g * g / f_raw(x)
            },
            -1.0,
            1.0,
            LAMBDA_TOLERANCE,
        )
        .expect("G²/F is smooth on [-1, 1]");
        KinematicConstants {
            big_f_int,
            big_g_int,
            ratio: big_g_int / big_f_int,
            lambda: integral.value / (2.0 * big_f_int),
        }
    }

    /// Approximate closed form `5 ln 3 / (18 π 𝓕)` for `λ`.
    pub fn lambda_closed_form_estimate(&self) -> f64 {
        5.0 * 3f64.ln() / (18.0 * std::f64::consts::PI * self.big_f_int)
    }

    /// `(2π𝓕)`, the normalization of a single-photon bracket.
    #[inline]
    pub fn single_norm(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.big_f_int
    }

    /// `(2π𝓕)²`, the normalization of a two-photon bracket.
    #[inline]
    pub fn pair_norm(&self) -> f64 {
        let s = self.single_norm();
        s * s
    }
}

/// Process-wide kinematic constants, computed once.
pub fn constants() -> &'static KinematicConstants {
    static CONSTANTS: OnceLock<KinematicConstants> = OnceLock::new();
    CONSTANTS.get_or_init(KinematicConstants::compute)
}
