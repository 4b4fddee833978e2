//! Joint and single-photon scattering densities.
//!
//! Each density comes in two forms: the dimensionless bracket (what the
//! quantum-mechanical calculation produces) and the normalized probability
//! density over `χ ∈ [-1, 1]`, `φ ∈ [0, 2π)` per photon. Azimuths are either
//! fixed-frame (`φ`, measured from the lab axis) or polarization-relative
//! (`ϕ`, measured from the photon's initial polarization); every function
//! documents which one it expects.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kinematics::{constants, f_raw, g_raw, PolarCosine};

pub const TWO_PI: f64 = 2.0 * PI;

/// Maps any finite angle into `[0, 2π)`; `2π` itself maps to `0`.
#[inline]
pub fn normalize_azimuth(phi: f64) -> f64 {
    let r = phi.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// One photon's scattering outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterAngles {
    pub chi: PolarCosine,
    /// Azimuth in `[0, 2π)`; the frame is fixed by context.
    pub phi: f64,
}

impl ScatterAngles {
    /// Validates `chi` and normalizes `phi` into `[0, 2π)`.
    pub fn new(chi: f64, phi: f64) -> Result<Self> {
        let chi = PolarCosine::new(chi)?;
        if !phi.is_finite() {
            return Err(Error::Domain {
                what: "azimuth",
                value: phi,
                domain: "finite reals",
            });
        }
        Ok(ScatterAngles {
            chi,
            phi: normalize_azimuth(phi),
        })
    }

    #[inline]
    pub(crate) fn new_unchecked(chi: f64, phi: f64) -> Self {
        ScatterAngles {
            chi: PolarCosine::new_unchecked(chi),
            phi,
        }
    }

    #[inline]
    pub fn f(&self) -> f64 {
        f_raw(self.chi.value())
    }

    #[inline]
    pub fn g(&self) -> f64 {
        g_raw(self.chi.value())
    }

    /// Same polar cosine, azimuth replaced (and normalized).
    pub fn with_phi(&self, phi: f64) -> Self {
        ScatterAngles {
            chi: self.chi,
            phi: normalize_azimuth(phi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Two independent Klein-Nishina scatterings (polarization frame).
    KnIndependent,
    /// Pryce-Ward cross section (fixed frame).
    PwFixedFrame,
    /// Pryce-Ward with the frame shift naively substituted (polarization frame).
    NaivePhi,
    /// Reconciled cross section (polarization frame).
    Recommended,
    /// Two-parameter family of reconciled solutions (polarization frame).
    AnsatzFamily,
}

/// Which azimuth convention a model's density is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzimuthFrame {
    Fixed,
    Polarization,
}

/// A joint scattering model. `b_ff`, `b_gg` only matter for [`ModelKind::AnsatzFamily`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub b_ff: f64,
    pub b_gg: f64,
}

impl ModelSpec {
    pub const fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            b_ff: 0.0,
            b_gg: 0.0,
        }
    }

    pub const fn ansatz(b_ff: f64, b_gg: f64) -> Self {
        ModelSpec {
            kind: ModelKind::AnsatzFamily,
            b_ff,
            b_gg,
        }
    }

    pub fn frame(&self) -> AzimuthFrame {
        match self.kind {
            ModelKind::PwFixedFrame => AzimuthFrame::Fixed,
            _ => AzimuthFrame::Polarization,
        }
    }

    /// Dimensionless bracket of the model's cross section.
    pub fn bracket(&self, a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
        match self.kind {
            ModelKind::KnIndependent => kn_bracket(a1) * kn_bracket(a2),
            ModelKind::PwFixedFrame => pw_bracket(a1, a2),
            ModelKind::NaivePhi => naive_phi_bracket(a1, a2),
            ModelKind::Recommended => recommended_bracket(a1, a2),
            ModelKind::AnsatzFamily => ansatz_bracket(a1, a2, self.b_ff, self.b_gg),
        }
    }

    /// Normalized joint probability density.
    pub fn density(&self, a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
        self.bracket(a1, a2) / constants().pair_norm()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::KnIndependent => "kn-independent",
            ModelKind::PwFixedFrame => "pw-fixed-frame",
            ModelKind::NaivePhi => "naive-phi",
            ModelKind::Recommended => "recommended",
            ModelKind::AnsatzFamily => "ansatz",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kn-independent" => Ok(ModelKind::KnIndependent),
            "pw-fixed-frame" => Ok(ModelKind::PwFixedFrame),
            "naive-phi" => Ok(ModelKind::NaivePhi),
            "recommended" => Ok(ModelKind::Recommended),
            "ansatz" => Ok(ModelKind::AnsatzFamily),
            other => Err(Error::UnsupportedModel(other.to_string())),
        }
    }
}

/// `F − G cos 2ϕ`; `ϕ` relative to the photon's polarization.
#[inline]
pub fn kn_bracket(a: &ScatterAngles) -> f64 {
    a.f() - a.g() * (2.0 * a.phi).cos()
}

/// Klein-Nishina density `(F − G cos 2ϕ) / (2π𝓕)`.
pub fn kn_density(a: &ScatterAngles) -> f64 {
    kn_bracket(a) / constants().single_norm()
}

/// `F₁F₂ − G₁G₂ cos 2(φ₂ − φ₁)`; fixed-frame azimuths.
#[inline]
pub fn pw_bracket(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    a1.f() * a2.f() - a1.g() * a2.g() * (2.0 * (a2.phi - a1.phi)).cos()
}

/// Pryce-Ward joint density; fixed-frame azimuths.
pub fn pw_density_fixed(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    pw_bracket(a1, a2) / constants().pair_norm()
}

/// `F₁F₂ + G₁G₂ cos 2(ϕ₂ − ϕ₁)`; polarization-relative azimuths.
#[inline]
pub fn naive_phi_bracket(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    a1.f() * a2.f() + a1.g() * a2.g() * (2.0 * (a2.phi - a1.phi)).cos()
}

/// Pryce-Ward density re-expressed in polarization-relative azimuths. Its
/// single-photon marginals carry no azimuthal modulation.
pub fn naive_phi_density(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    naive_phi_bracket(a1, a2) / constants().pair_norm()
}

/// `F₁F₂ + G₁G₂ cos 2(ϕ₂ − ϕ₁) − (F₂G₁ cos 2ϕ₁ + F₁G₂ cos 2ϕ₂)`.
#[inline]
pub fn recommended_bracket(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    let (f1, g1, f2, g2) = (a1.f(), a1.g(), a2.f(), a2.g());
    f1 * f2 + g1 * g2 * (2.0 * (a2.phi - a1.phi)).cos()
        - (f2 * g1 * (2.0 * a1.phi).cos() + f1 * g2 * (2.0 * a2.phi).cos())
}

/// Reconciled joint density; polarization-relative azimuths. Both
/// single-photon marginals are Klein-Nishina and its average over the
/// polarization angle is the Pryce-Ward density.
pub fn recommended_density(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    recommended_bracket(a1, a2) / constants().pair_norm()
}

/// Free-parameter part of the ansatz family, in density units.
fn ansatz_extra(a1: &ScatterAngles, a2: &ScatterAngles, b_ff: f64, b_gg: f64) -> f64 {
    let c = constants();
    let (ff, gg) = (c.big_f_int, c.big_g_int);
    let (f1, g1, f2, g2) = (a1.f(), a1.g(), a2.f(), a2.g());
    let t1 = (gg * f2 - ff * g2) * (b_ff * ff * f1 - b_gg * gg * g1) * (2.0 * a1.phi).cos();
    let t2 = (gg * f1 - ff * g1) * (b_ff * ff * f2 - b_gg * gg * g2) * (2.0 * a2.phi).cos();
    (t1 + t2) / (ff * gg)
}

/// Two-parameter solution family; `(0, 0)` is the recommended density.
/// Returned as-is, including negative values.
pub fn ansatz_density(a1: &ScatterAngles, a2: &ScatterAngles, b_ff: f64, b_gg: f64) -> f64 {
    recommended_density(a1, a2) + ansatz_extra(a1, a2, b_ff, b_gg)
}

/// Ansatz density scaled by `(2π𝓕)²` to bracket units.
pub fn ansatz_bracket(a1: &ScatterAngles, a2: &ScatterAngles, b_ff: f64, b_gg: f64) -> f64 {
    recommended_bracket(a1, a2) + ansatz_extra(a1, a2, b_ff, b_gg) * constants().pair_norm()
}

/// Upper bound on `|ansatz_bracket − recommended_bracket|` over the whole domain.
pub fn ansatz_extra_bracket_bound(b_ff: f64, b_gg: f64) -> f64 {
    let c = constants();
    let (ff, gg) = (c.big_f_int, c.big_g_int);
    // |𝒢F − 𝓕G| ≤ max(𝒢 sup F, 𝓕 sup G) since both terms are non-negative.
    let diff = (2.0 * gg).max(ff / 3.0);
    let coeff = b_ff.abs() * ff * 2.0 + b_gg.abs() * gg / 3.0;
    2.0 * diff * coeff / (ff * gg) * c.pair_norm()
}

/// Density of photon 2 given photon 1 under Pryce-Ward; fixed-frame azimuths.
/// `(F₁F₂ − G₁G₂ cos 2Δ) / (2π𝓕 F₁)`.
pub fn pw_conditional_density(fixed1: &ScatterAngles, fixed2: &ScatterAngles) -> f64 {
    pw_bracket(fixed1, fixed2) / (constants().single_norm() * fixed1.f())
}

/// Density of photon 2 given photon 1 under the recommended model.
pub fn recommended_conditional_density(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    recommended_density(a1, a2) / kn_density(a1)
}

/// Joint density implicitly sampled by direct Pryce-Ward sampling
/// (photon 1 Klein-Nishina, photon 2 conditional Pryce-Ward), in
/// polarization-relative azimuths.
pub fn staged_pw_density(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
    kn_density(a1) * naive_phi_bracket(a1, a2) / (constants().single_norm() * a1.f())
}

/// Angular grid used for non-negativity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub chi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl AngularGrid {
    pub const DEFAULT_CHI_POINTS: usize = 51;
    pub const DEFAULT_PHI_POINTS: usize = 64;

    /// `chi_points` equally spaced on `[-1, 1]` (ends included), `phi_points`
    /// equally spaced on `[0, 2π)`.
    pub fn new(chi_points: usize, phi_points: usize) -> Self {
        assert!(chi_points >= 2 && phi_points >= 1);
        let chi = (0..chi_points)
            .map(|i| (-1.0 + 2.0 * i as f64 / (chi_points - 1) as f64).clamp(-1.0, 1.0))
            .collect();
        let phi = (0..phi_points).map(|k| TWO_PI * k as f64 / phi_points as f64).collect();
        AngularGrid { chi, phi }
    }

    pub fn iter(&self) -> impl Iterator<Item = ScatterAngles> + '_ {
        self.chi
            .iter()
            .flat_map(move |&c| self.phi.iter().map(move |&p| ScatterAngles::new_unchecked(c, p)))
    }
}

impl Default for AngularGrid {
    fn default() -> Self {
        AngularGrid::new(Self::DEFAULT_CHI_POINTS, Self::DEFAULT_PHI_POINTS)
    }
}

/// Minimum of [`ansatz_density`] over `grid × grid`, stopping early once
/// the running minimum drops below `stop_below`.
///
/// The density is `A + B cos 2ϕ₁ + C cos 2ϕ₂ + D cos 2(ϕ₂ − ϕ₁)` at each
/// polar pair; pairs whose trivial lower bound `A − |B| − |C| − |D|` already
/// exceeds the running minimum are skipped, and azimuths are deduplicated
/// by the period-π symmetry.
pub fn ansatz_grid_minimum(grid: &AngularGrid, b_ff: f64, b_gg: f64, stop_below: f64) -> f64 {
    let c = constants();
    let (ff, gg) = (c.big_f_int, c.big_g_int);
    let kappa = c.pair_norm() / (ff * gg);

    let mut doubled: Vec<f64> = grid.phi.iter().map(|p| normalize_azimuth(2.0 * p)).collect();
    doubled.sort_by(f64::total_cmp);
    doubled.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let trig: Vec<(f64, f64)> = doubled.iter().map(|t| (t.cos(), t.sin())).collect();

    let fg: Vec<(f64, f64)> = grid.chi.iter().map(|&x| (f_raw(x), g_raw(x))).collect();
    let mut min = f64::INFINITY;
    for (i, &(f1, g1)) in fg.iter().enumerate() {
        // The pair (χ₂, χ₁) yields the same values with the azimuths swapped.
        for &(f2, g2) in &fg[i..] {
            let a = f1 * f2;
            let d = g1 * g2;
            let b = -f2 * g1 + kappa * (gg * f2 - ff * g2) * (b_ff * ff * f1 - b_gg * gg * g1);
            let cc = -f1 * g2 + kappa * (gg * f1 - ff * g1) * (b_ff * ff * f2 - b_gg * gg * g2);
            if a - b.abs() - cc.abs() - d.abs() >= min * c.pair_norm() {
                continue;
            }
            for &(c1, s1) in &trig {
                for &(c2, s2) in &trig {
                    let v = a + b * c1 + cc * c2 + d * (c1 * c2 + s1 * s2);
                    let v = v / c.pair_norm();
                    if v < min {
                        min = v;
                    }
                }
            }
            if min < stop_below {
                return min;
            }
        }
    }
    min
}
