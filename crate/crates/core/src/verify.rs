//! Invariant suite run by the `verify` command.

use std::fmt;
use std::time::Instant;

use rand::Rng;

use crate::analysis::{two_sample_chi_square, AzimuthHistogram2d};
use crate::kinematics::{constants, PolarCosine};
use crate::models::{kn_density, recommended_bracket, AngularGrid, ScatterAngles, TWO_PI};
use crate::quadrature;
use crate::quantum;
use crate::sampling::{run_pipeline_into, OrthSign, Pipeline, RandomStream, NON_NEGATIVITY_TOLERANCE};

/// Joint bracket in polarization-relative azimuths, `(2π𝓕)²` times the density.
pub type BracketFn = fn(&ScatterAngles, &ScatterAngles) -> f64;

/// Nodes of the periodic azimuth rule; exact for the harmonics present.
const AZIMUTH_NODES: usize = 16;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub fast: bool,
    pub seed: u64,
    pub workers: usize,
    pub bracket: BracketFn,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            fast: false,
            seed: 20_240_511,
            workers: 1,
            bracket: recommended_bracket,
        }
    }
}

impl VerifyConfig {
    /// Tolerance on quadrature-based identities.
    pub fn tolerance(&self) -> f64 {
        if self.fast {
            1e-6
        } else {
            1e-8
        }
    }

    fn quadrature_tolerance(&self) -> f64 {
        self.tolerance() * 1e-3
    }

    fn staged_samples(&self) -> u64 {
        if self.fast {
            200_000
        } else {
            1_000_000
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {} ({:.2} s)", self.name, self.detail, self.seconds)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out: String = self.checks.iter().map(|c| format!("{c}\n")).collect();
        match self.first_failure() {
            None => out.push_str(&format!("verify: all {} checks passed\n", self.checks.len())),
            Some(c) => out.push_str(&format!("verify: FAILED at {}\n", c.name)),
        }
        out
    }

    pub fn to_json(&self) -> String {
        let checks: Vec<serde_json::Value> = self
            .checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "passed": c.passed,
                    "detail": c.detail,
                })
            })
            .collect();
        let root = serde_json::json!({
            "passed": self.all_passed(),
            "first_failure": self.first_failure().map(|c| c.name),
            "checks": checks,
        });
        let mut s = serde_json::to_string_pretty(&root).expect("JSON values serialize");
        s.push('\n');
        s
    }
}

fn timed<F: FnOnce() -> (bool, String)>(name: &'static str, f: F) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// `∫ dχ ∫ dϕ h(χ, ϕ)` with adaptive quadrature in `χ` and the periodic rule in `ϕ`.
fn integrate_photon<H: FnMut(&ScatterAngles) -> f64>(mut h: H, tol: f64) -> Result<f64, String> {
    quadrature::adaptive(
        |chi| quadrature::periodic(AZIMUTH_NODES, 0.0, |phi| h(&ScatterAngles::new_unchecked(chi, phi))),
        -1.0,
        1.0,
        tol,
    )
    .map(|i| i.value)
    .map_err(|e| e.to_string())
}

fn random_angles<R: Rng>(rng: &mut R) -> ScatterAngles {
    ScatterAngles::new_unchecked(rng.gen_range(-1.0..=1.0), rng.gen_range(0.0..TWO_PI))
}

pub fn check_constants() -> CheckOutcome {
    timed("constants", || {
        let c = constants();
        let ln3 = 3f64.ln();
        let f_ok = (c.big_f_int - (40.0 - 27.0 * ln3) / 9.0).abs() < 1e-10;
        let g_ok = (c.big_g_int - 4.0 * (ln3 - 1.0)).abs() < 1e-10;
        let f_quad = quadrature::adaptive(
            |x| crate::kinematics::big_f(PolarCosine::new_unchecked(x)),
            -1.0,
            1.0,
            1e-13,
        )
        .map(|i| i.value)
        .unwrap_or(f64::NAN);
        let quad_ok = (f_quad - c.big_f_int).abs() < 1e-10;
        let ratio_ok = (c.ratio - 0.3434).abs() < 5e-5;
        let lambda_ok = (c.lambda - 0.08457).abs() < 5e-5;
        (
            f_ok && g_ok && quad_ok && ratio_ok && lambda_ok,
            format!(
                "F={:.12} G={:.12} G/F={:.6} lambda={:.10}",
                c.big_f_int, c.big_g_int, c.ratio, c.lambda
            ),
        )
    })
}

pub fn check_normalization(cfg: &VerifyConfig) -> CheckOutcome {
    timed("normalization", || {
        let tol = cfg.quadrature_tolerance();
        let bracket = cfg.bracket;
        let total = integrate_photon(
            |a1| integrate_photon(|a2| bracket(a1, a2), tol).unwrap_or(f64::NAN),
            tol,
        );
        match total {
            Ok(v) => {
                let norm = v / constants().pair_norm();
                ((norm - 1.0).abs() < cfg.tolerance(), format!("integral = {norm:.15}"))
            }
            Err(e) => (false, e),
        }
    })
}

pub fn check_marginals(cfg: &VerifyConfig, spots: usize) -> CheckOutcome {
    timed("marginals", || {
        let tol = cfg.quadrature_tolerance();
        let bracket = cfg.bracket;
        let norm = constants().pair_norm();
        let mut rng = RandomStream::new(cfg.seed, 1).rng();
        let mut worst = 0.0f64;
        for _ in 0..spots {
            let spot = random_angles(&mut rng);
            let expected = kn_density(&spot);
            let m2 = integrate_photon(|a1| bracket(a1, &spot), tol);
            let m1 = integrate_photon(|a2| bracket(&spot, a2), tol);
            for m in [m1, m2] {
                match m {
                    Ok(v) => worst = worst.max((v / norm - expected).abs()),
                    Err(e) => return (false, e),
                }
            }
        }
        (
            worst < cfg.tolerance(),
            format!("max |marginal - KN| = {worst:.3e} over {spots} spots"),
        )
    })
}

pub fn check_averaging(cfg: &VerifyConfig, points: usize) -> CheckOutcome {
    timed("averaging-identity", || {
        let mut rng = RandomStream::new(cfg.seed, 2).rng();
        let norm = constants().pair_norm();
        let mut worst = 0.0f64;
        for _ in 0..points {
            let a1 = random_angles(&mut rng);
            let a2 = random_angles(&mut rng);
            for sign in [OrthSign::Plus, OrthSign::Minus] {
                let r = quantum::averaging_residual_with(&a1, &a2, sign, cfg.bracket) / norm;
                worst = worst.max(r);
            }
        }
        let tol = if cfg.fast { 1e-6 } else { 1e-10 };
        (
            worst < tol,
            format!("max density residual = {worst:.3e} over {points} points"),
        )
    })
}

pub fn check_non_negativity(cfg: &VerifyConfig) -> CheckOutcome {
    timed("non-negativity", || {
        let grid = AngularGrid::default();
        let points: Vec<ScatterAngles> = grid.iter().collect();
        let norm = constants().pair_norm();
        let mut min = f64::INFINITY;
        for a1 in &points {
            for a2 in &points {
                min = min.min((cfg.bracket)(a1, a2) / norm);
            }
        }
        (
            min >= NON_NEGATIVITY_TOLERANCE,
            format!("grid minimum {min:.3e} over {}^2 points", points.len()),
        )
    })
}

pub fn check_exchange_symmetry(cfg: &VerifyConfig, points: usize) -> CheckOutcome {
    timed("exchange-symmetry", || {
        let mut rng = RandomStream::new(cfg.seed, 3).rng();
        let mut mismatches = 0usize;
        for _ in 0..points {
            let a1 = random_angles(&mut rng);
            let a2 = random_angles(&mut rng);
            if (cfg.bracket)(&a1, &a2) != (cfg.bracket)(&a2, &a1) {
                mismatches += 1;
            }
        }
        (mismatches == 0, format!("{mismatches} inexact swaps out of {points}"))
    })
}

pub fn check_quantum(cfg: &VerifyConfig) -> CheckOutcome {
    timed("quantum", || {
        let mut rng = RandomStream::new(cfg.seed, 4).rng();
        let singlet = quantum::singlet();
        let rot = (0..100)
            .map(|_| quantum::rotated_singlet(rng.gen_range(0.0..TWO_PI)).max_abs_diff(&singlet))
            .fold(0.0, f64::max);
        let mut pair = 0.0f64;
        for _ in 0..1000 {
            let a1 = random_angles(&mut rng);
            let a2 = random_angles(&mut rng);
            let v = quantum::expectation_pair(a1.chi.value(), a1.phi, a2.chi.value(), a2.phi).unwrap_or(f64::NAN);
            let d = (v - crate::models::pw_bracket(&a1, &a2)).abs();
            pair = if d.is_nan() { f64::INFINITY } else { pair.max(d) };
        }
        let dec = quantum::decomposition_check();
        (
            rot < 1e-14 && pair < 1e-12 && dec < 1e-10,
            format!("rotation {rot:.1e}, pair expectation {pair:.1e}, decomposition {dec:.1e}"),
        )
    })
}

/// Two-sample χ² between joint 4D and staged (KN then conditional)
/// sampling of the recommended model.
pub fn check_staged_vs_joint(cfg: &VerifyConfig) -> CheckOutcome {
    timed("staged-vs-joint", || {
        let n = cfg.staged_samples();
        let hist = |p: Pipeline, seed: u64| run_pipeline_into(p, n, seed, cfg.workers, || AzimuthHistogram2d::new(32));
        let joint = hist(Pipeline::Recommended, cfg.seed);
        let staged = hist(Pipeline::RecommendedStaged, cfg.seed.wrapping_add(1));
        match (joint, staged) {
            (Ok(a), Ok(b)) => match two_sample_chi_square(a.counts(), b.counts()) {
                Ok(r) => (
                    r.p_value > 1e-3,
                    format!("chi2/dof = {:.1}/{}, p = {:.4} at n = {n}", r.chi2, r.dof, r.p_value),
                ),
                Err(e) => (false, e.to_string()),
            },
            (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
        }
    })
}

/// Runs every check in order.
pub fn run(cfg: &VerifyConfig) -> Report {
    let spots = if cfg.fast { 20 } else { 100 };
    let points = if cfg.fast { 200 } else { 1000 };
    let checks = vec![
        check_constants(),
        check_normalization(cfg),
        check_marginals(cfg, spots),
        check_averaging(cfg, points),
        check_non_negativity(cfg),
        check_exchange_symmetry(cfg, 10_000),
        check_quantum(cfg),
        check_staged_vs_joint(cfg),
    ];
    for c in &checks {
        log::info!("{c}");
    }
    Report { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(a1: &ScatterAngles, a2: &ScatterAngles) -> f64 {
        recommended_bracket(a1, a2) - 2.0 * a1.g() * a2.g() * (2.0 * (a2.phi - a1.phi)).cos()
    }

    #[test]
    fn fast_suite_passes() {
        let report = run(&VerifyConfig {
            fast: true,
            ..VerifyConfig::default()
        });
        assert!(report.all_passed(), "{}", report.to_text());
    }

    #[test]
    fn injected_sign_error_fails_averaging() {
        let cfg = VerifyConfig {
            fast: true,
            bracket: flipped,
            ..VerifyConfig::default()
        };
        let c = check_averaging(&cfg, 50);
        assert!(!c.passed, "{c}");
        assert!(check_normalization(&cfg).passed);
    }

    #[test]
    fn report_names_first_failure() {
        let ok = CheckOutcome {
            name: "a",
            passed: true,
            detail: String::new(),
            seconds: 0.0,
        };
        let bad = CheckOutcome {
            name: "b",
            passed: false,
            ..ok.clone()
        };
        let r = Report { checks: vec![ok, bad] };
        assert!(r.to_text().ends_with("verify: FAILED at b\n"));
        assert!(r.to_json().contains("\"first_failure\": \"b\""));
    }
}
