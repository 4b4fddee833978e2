//! Estimators, histograms, goodness-of-fit and analytic reference curves.

use std::cmp::Ordering;
use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::kinematics::constants;
use crate::models::{ansatz_grid_minimum, AngularGrid, ModelKind, TWO_PI};
use crate::sampling::{EventSink, PairEvent, Photon, Pipeline, NON_NEGATIVITY_TOLERANCE};

/// Binned counts with an optional expected probability mass per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    /// Expected fraction of all entries falling in each bin.
    analytic: Option<Vec<f64>>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>, analytic: Option<Vec<f64>>) -> Result<Self> {
        if edges.len() < 2
            || edges
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
        {
            return Err(Error::Precondition(
                "histogram edges must be strictly increasing".into(),
            ));
        }
        if counts.len() != edges.len() - 1 {
            return Err(Error::Precondition("histogram needs one count per bin".into()));
        }
        if analytic.as_ref().is_some_and(|a| a.len() != counts.len()) {
            return Err(Error::Precondition("histogram needs one analytic value per bin".into()));
        }
        Ok(Histogram {
            edges,
            counts,
            analytic,
        })
    }

    /// `bins` equal-width bins over `[lo, hi)`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 1 || lo.partial_cmp(&hi) != Some(Ordering::Less) {
            return Err(Error::Precondition(format!("invalid binning [{lo}, {hi}) x {bins}")));
        }
        let edges = (0..=bins)
            .map(|i| {
                if i == bins {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / bins as f64
                }
            })
            .collect();
        Histogram::new(edges, vec![0; bins], None)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn analytic(&self) -> Option<&[f64]> {
        self.analytic.as_deref()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    /// Index of the bin holding `x`; the last bin is closed on the right.
    pub fn find_bin(&self, x: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let n = self.bins();
        let mut i = (((x - lo) / (hi - lo)) * n as f64) as usize;
        i = i.min(n - 1);
        while i > 0 && x < self.edges[i] {
            i -= 1;
        }
        while i + 1 < n && x >= self.edges[i + 1] {
            i += 1;
        }
        Some(i)
    }

    /// Returns `false` when `x` is outside the binned range.
    pub fn fill(&mut self, x: f64) -> bool {
        match self.find_bin(x) {
            Some(i) => {
                self.counts[i] += 1;
                true
            }
            None => false,
        }
    }

    /// Sets the expected mass of each bin from `mass(lo, hi)`.
    pub fn set_analytic<F: FnMut(f64, f64) -> f64>(&mut self, mut mass: F) {
        let a = (0..self.bins()).map(|i| {
            let (lo, hi) = self.bin(i);
            mass(lo, hi)
        });
        self.analytic = Some(a.collect());
    }

    pub fn clear_analytic(&mut self) {
        self.analytic = None;
    }

    /// Adds the counts of a histogram with identical edges.
    pub fn add(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::Precondition("cannot add histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Fitted coefficient `k` of a density `(1/2π)(1 − k cos 2φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationEstimate {
    pub k_hat: f64,
    pub std_err: f64,
    pub n: u64,
}

impl ModulationEstimate {
    /// `2·mean(cos 2φ)`, i.e. `−k̂`; the form used for correlation statistics.
    pub fn correlation(&self) -> f64 {
        -self.k_hat
    }

    /// Number of standard errors separating `k̂` from `k`.
    pub fn pull(&self, k: f64) -> f64 {
        (self.k_hat - k) / self.std_err
    }
}

/// Streaming first and second moments of `cos 2α`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CosineMoments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl CosineMoments {
    #[inline]
    pub fn push(&mut self, angle: f64) {
        let c = (2.0 * angle).cos();
        self.n += 1;
        self.sum += c;
        self.sum_sq += c * c;
    }

    pub fn merge(&mut self, other: &CosineMoments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Moment estimator `k̂ = −2·mean(cos 2α)` with standard error
    /// `2·sqrt(Var[cos 2α]/n)`.
    pub fn estimate(&self) -> Result<ModulationEstimate> {
        if self.n < 2 {
            return Err(Error::Precondition(format!("need at least 2 angles, got {}", self.n)));
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok(ModulationEstimate {
            k_hat: -2.0 * mean,
            std_err: 2.0 * (var / n).sqrt(),
            n: self.n,
        })
    }
}

/// Moment estimate of `k` from a list of azimuths.
pub fn estimate_modulation(phis: &[f64]) -> Result<ModulationEstimate> {
    let mut m = CosineMoments::default();
    for &p in phis {
        m.push(p);
    }
    m.estimate()
}

/// Closed-form modulation coefficient of a polarization-relative single-photon
/// marginal produced by `pipeline`.
///
/// Photon 2: `𝒢/𝓕` for Klein-Nishina marginals, `λ𝒢/𝓕` for direct
/// Pryce-Ward sampling, `0` for joint Pryce-Ward and the naive form. Photon 1
/// of direct Pryce-Ward sampling is plain Klein-Nishina.
pub fn analytic_marginal(pipeline: Pipeline, photon: Photon) -> f64 {
    let c = constants();
    match (pipeline, photon) {
        (Pipeline::KnKn, _) => c.ratio,
        (Pipeline::KnPw, Photon::First) => c.ratio,
        (Pipeline::KnPw, Photon::Second) => c.lambda * c.ratio,
        (Pipeline::PwPw, _) | (Pipeline::NaivePhi, _) => 0.0,
        (Pipeline::Recommended, _) | (Pipeline::RecommendedStaged, _) | (Pipeline::Ansatz { .. }, _) => c.ratio,
    }
}

/// `∫_lo^hi (1/2π)(1 − k cos 2φ) dφ`.
pub fn modulated_mass(k: f64, lo: f64, hi: f64) -> f64 {
    ((hi - lo) - 0.5 * k * ((2.0 * hi).sin() - (2.0 * lo).sin())) / TWO_PI
}

/// Which azimuth of an event to histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzimuthSelector {
    /// `ϕ₁`, polarization-relative.
    Photon1,
    /// `ϕ₂`, polarization-relative.
    Photon2,
    /// `φ₁`, fixed frame.
    Fixed1,
    /// `φ₂`, fixed frame.
    Fixed2,
}

impl AzimuthSelector {
    #[inline]
    pub fn select(self, e: &PairEvent) -> f64 {
        match self {
            AzimuthSelector::Photon1 => e.photon1.phi,
            AzimuthSelector::Photon2 => e.photon2.phi,
            AzimuthSelector::Fixed1 => e.fixed1_phi,
            AzimuthSelector::Fixed2 => e.fixed2_phi,
        }
    }

    /// Modulation of the selected marginal; fixed-frame marginals are flat
    /// because the polarization angle is uniform.
    pub fn analytic_k(self, pipeline: Pipeline) -> f64 {
        match self {
            AzimuthSelector::Photon1 => analytic_marginal(pipeline, Photon::First),
            AzimuthSelector::Photon2 => analytic_marginal(pipeline, Photon::Second),
            AzimuthSelector::Fixed1 | AzimuthSelector::Fixed2 => 0.0,
        }
    }
}

/// Equal-width azimuth histogram over `[0, 2π)`, with the closed-form
/// marginal of `pipeline` as the analytic column when given.
pub fn histogram_phi(
    events: &[PairEvent],
    selector: AzimuthSelector,
    bins: usize,
    pipeline: Option<Pipeline>,
) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::Precondition("need at least 2 bins".into()));
    }
    let mut h = Histogram::uniform(0.0, TWO_PI, bins)?;
    for e in events {
        h.fill(selector.select(e));
    }
    if let Some(p) = pipeline {
        let k = selector.analytic_k(p);
        h.set_analytic(|lo, hi| modulated_mass(k, lo, hi));
    }
    Ok(h)
}

/// Outcome of a χ² test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn reduced(&self) -> f64 {
        self.chi2 / self.dof as f64
    }
}

fn p_value(chi2: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN)
}

/// Pearson χ² of the counts against `analytic × total`; `dof = bins − 1`.
pub fn chi_square(h: &Histogram) -> Result<ChiSquareResult> {
    let analytic = h.analytic().ok_or(Error::MissingAnalytic)?;
    let total = h.total() as f64;
    let mut chi2 = 0.0;
    for (bin, (&count, &mass)) in h.counts().iter().zip(analytic).enumerate() {
        let expected = mass * total;
        if expected.is_nan() || expected < 5.0 {
            return Err(Error::LowExpectedCount { bin, expected });
        }
        let d = count as f64 - expected;
        chi2 += d * d / expected;
    }
    let dof = h.bins() - 1;
    Ok(ChiSquareResult {
        chi2,
        dof,
        p_value: p_value(chi2, dof),
    })
}

/// Two-sample χ² homogeneity test on matching bins; bins empty in both
/// samples are dropped.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    if a.len() != b.len() {
        return Err(Error::Precondition("two-sample test needs matching bins".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::Precondition("two-sample test needs non-empty samples".into()));
    }
    let ka = (nb as f64 / na as f64).sqrt();
    let kb = (na as f64 / nb as f64).sqrt();
    let mut chi2 = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        let d = ka * x as f64 - kb * y as f64;
        chi2 += d * d / (x + y) as f64;
        used += 1;
    }
    if used < 2 {
        return Err(Error::Precondition(
            "two-sample test needs at least 2 occupied bins".into(),
        ));
    }
    let dof = used - 1;
    Ok(ChiSquareResult {
        chi2,
        dof,
        p_value: p_value(chi2, dof),
    })
}

/// Joint `(ϕ₁, ϕ₂)` histogram over `[0, 2π)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthHistogram2d {
    bins: usize,
    counts: Vec<u64>,
}

impl AzimuthHistogram2d {
    pub fn new(bins: usize) -> Self {
        assert!(bins >= 1);
        AzimuthHistogram2d {
            bins,
            counts: vec![0; bins * bins],
        }
    }

    #[inline]
    fn index(&self, phi: f64) -> usize {
        ((phi / TWO_PI * self.bins as f64) as usize).min(self.bins - 1)
    }

    pub fn fill(&mut self, phi1: f64, phi2: f64) {
        let i = self.index(phi1) * self.bins + self.index(phi2);
        self.counts[i] += 1;
    }

    /// Row-major counts, `ϕ₁` major.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl EventSink for AzimuthHistogram2d {
    fn record(&mut self, e: &PairEvent) {
        self.fill(e.photon1.phi, e.photon2.phi);
    }

    fn merge(&mut self, next: Self) {
        for (a, b) in self.counts.iter_mut().zip(next.counts) {
            *a += b;
        }
    }
}

/// Streaming summary of a pipeline run: azimuth marginals plus the
/// cos 2(·) moments used for modulation and correlation estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSummary {
    pub phi1: Histogram,
    pub phi2: Histogram,
    pub chi2: Histogram,
    pub phi1_moments: CosineMoments,
    pub phi2_moments: CosineMoments,
    /// Moments of `ϕ₂ − ϕ₁`.
    pub relative_moments: CosineMoments,
    /// Moments of `φ₂ − φ₁` in the fixed frame.
    pub fixed_relative_moments: CosineMoments,
}

impl EventSummary {
    pub const CHI_BINS: usize = 50;

    pub fn new(phi_bins: usize) -> Result<Self> {
        if phi_bins < 2 {
            return Err(Error::Precondition("need at least 2 bins".into()));
        }
        Ok(EventSummary {
            phi1: Histogram::uniform(0.0, TWO_PI, phi_bins)?,
            phi2: Histogram::uniform(0.0, TWO_PI, phi_bins)?,
            chi2: Histogram::uniform(-1.0, 1.0, Self::CHI_BINS)?,
            phi1_moments: CosineMoments::default(),
            phi2_moments: CosineMoments::default(),
            relative_moments: CosineMoments::default(),
            fixed_relative_moments: CosineMoments::default(),
        })
    }

    /// Fills the analytic columns of the azimuth histograms for `pipeline`.
    pub fn attach_analytic(&mut self, pipeline: Pipeline) {
        let k1 = analytic_marginal(pipeline, Photon::First);
        let k2 = analytic_marginal(pipeline, Photon::Second);
        self.phi1.set_analytic(|lo, hi| modulated_mass(k1, lo, hi));
        self.phi2.set_analytic(|lo, hi| modulated_mass(k2, lo, hi));
    }
}

impl EventSink for EventSummary {
    fn record(&mut self, e: &PairEvent) {
        self.phi1.fill(e.photon1.phi);
        self.phi2.fill(e.photon2.phi);
        self.chi2.fill(e.photon2.chi.value());
        self.phi1_moments.push(e.photon1.phi);
        self.phi2_moments.push(e.photon2.phi);
        self.relative_moments.push(e.photon2.phi - e.photon1.phi);
        self.fixed_relative_moments.push(e.fixed2_phi - e.fixed1_phi);
    }

    fn merge(&mut self, next: Self) {
        self.phi1.add(&next.phi1).expect("same binning");
        self.phi2.add(&next.phi2).expect("same binning");
        self.chi2.add(&next.chi2).expect("same binning");
        self.phi1_moments.merge(&next.phi1_moments);
        self.phi2_moments.merge(&next.phi2_moments);
        self.relative_moments.merge(&next.relative_moments);
        self.fixed_relative_moments.merge(&next.fixed_relative_moments);
    }
}

/// `n` equally spaced azimuths on `[0, 2π)`.
pub fn azimuth_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TWO_PI * k as f64 / n as f64).collect()
}

/// Closed-form `(2π)²·R(ϕ₁, ϕ₂)` of the χ-marginalized joint density, rows
/// indexed by `ϕ₁`.
///
/// Naive form: `1 + (𝒢/𝓕)² cos 2(ϕ₂ − ϕ₁)`; recommended form additionally
/// `− (𝒢/𝓕)(cos 2ϕ₁ + cos 2ϕ₂)`.
pub fn reduced_2d(model: ModelKind, phis1: &[f64], phis2: &[f64]) -> Result<Vec<Vec<f64>>> {
    let r = constants().ratio;
    let linear = match model {
        ModelKind::NaivePhi => 0.0,
        ModelKind::Recommended => r,
        other => return Err(Error::UnsupportedModel(format!("reduced_2d({other})"))),
    };
    Ok(phis1
        .iter()
        .map(|&p1| {
            phis2
                .iter()
                .map(|&p2| 1.0 + r * r * (2.0 * (p2 - p1)).cos() - linear * ((2.0 * p1).cos() + (2.0 * p2).cos()))
                .collect()
        })
        .collect())
}

/// Non-negativity of the ansatz family over a `(b_ff, b_gg)` window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMap {
    pub b_ff: Vec<f64>,
    pub b_gg: Vec<f64>,
    /// Grid minimum of the density, `min_density[i][j]` at `(b_ff[i], b_gg[j])`.
    pub min_density: Vec<Vec<f64>>,
    pub feasible: Vec<Vec<bool>>,
}

impl FeasibilityMap {
    pub fn feasible_count(&self) -> usize {
        self.feasible.iter().flatten().filter(|&&f| f).count()
    }

    /// True when no feasible cell touches the border of the window.
    pub fn feasible_set_is_interior(&self) -> bool {
        let (ni, nj) = (self.b_ff.len(), self.b_gg.len());
        (0..ni).all(|i| {
            (0..nj).all(|j| {
                let border = i == 0 || j == 0 || i + 1 == ni || j + 1 == nj;
                !(border && self.feasible[i][j])
            })
        })
    }

    /// Feasibility at the grid point closest to `(b_ff, b_gg)`.
    pub fn nearest(&self, b_ff: f64, b_gg: f64) -> bool {
        let closest = |grid: &[f64], v: f64| {
            (0..grid.len())
                .min_by(|&a, &b| (grid[a] - v).abs().total_cmp(&(grid[b] - v).abs()))
                .unwrap()
        };
        self.feasible[closest(&self.b_ff, b_ff)][closest(&self.b_gg, b_gg)]
    }

    /// `(b_ff, b_gg, min_density, feasible)` rows, `b_ff` major.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, bool)> + '_ {
        self.b_ff.iter().enumerate().flat_map(move |(i, &bf)| {
            self.b_gg
                .iter()
                .enumerate()
                .map(move |(j, &bg)| (bf, bg, self.min_density[i][j], self.feasible[i][j]))
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Grid minimum of the ansatz density at each `(b_ff, b_gg)` on a
/// `resolution × resolution` lattice spanning both ranges (ends included).
/// Rows are computed in parallel and assembled in order.
pub fn scan_ansatz(b_ff_range: (f64, f64), b_gg_range: (f64, f64), resolution: usize) -> Result<FeasibilityMap> {
    let finite = [b_ff_range.0, b_ff_range.1, b_gg_range.0, b_gg_range.1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || b_ff_range.0 > b_ff_range.1 || b_gg_range.0 > b_gg_range.1 {
        return Err(Error::Precondition(
            "ansatz scan ranges must be finite with lo <= hi".into(),
        ));
    }
    if resolution == 0 {
        return Err(Error::Precondition("scan resolution must be positive".into()));
    }
    let b_ff = linspace(b_ff_range.0, b_ff_range.1, resolution);
    let b_gg = linspace(b_gg_range.0, b_gg_range.1, resolution);
    let grid = AngularGrid::default();

    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(b_ff.len());
    let chunk = b_ff.len().div_ceil(threads);
    let row = |bf: f64| -> Vec<f64> {
        b_gg.iter()
            .map(|&bg| ansatz_grid_minimum(&grid, bf, bg, f64::NEG_INFINITY))
            .collect()
    };
    let min_density: Vec<Vec<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = b_ff
            .chunks(chunk)
            .map(|rows| scope.spawn(|| rows.iter().map(|&bf| row(bf)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("scan worker panicked"))
            .collect()
    });
    let feasible = min_density
        .iter()
        .map(|r| r.iter().map(|&m| m >= NON_NEGATIVITY_TOLERANCE).collect())
        .collect();
    Ok(FeasibilityMap {
        b_ff,
        b_gg,
        min_density,
        feasible,
    })
}

/// `π`-periodic helper used in tests and verification: the analytic
/// single-photon marginal `(1/2π)(1 − k cos 2φ)`.
pub fn modulated_density(k: f64, phi: f64) -> f64 {
    (1.0 - k * (2.0 * phi).cos()) / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RandomStream;
    use rand::Rng;

    #[test]
    fn histogram_invariants() {
        assert!(Histogram::new(vec![0.0, 0.0], vec![0], None).is_err());
        assert!(Histogram::new(vec![0.0, 1.0, 2.0], vec![0], None).is_err());
        assert!(Histogram::new(vec![0.0, 1.0], vec![0], Some(vec![0.5, 0.5])).is_err());
        let mut h = Histogram::uniform(0.0, 1.0, 4).unwrap();
        assert!(h.fill(0.0) && h.fill(0.25) && h.fill(0.999) && h.fill(1.0));
        assert!(!h.fill(-0.1) && !h.fill(f64::NAN));
        assert_eq!(h.counts(), &[1, 1, 0, 2]);
    }

    #[test]
    fn zero_events_give_zero_counts() {
        let h = histogram_phi(&[], AzimuthSelector::Photon2, 16, Some(Pipeline::KnKn)).unwrap();
        assert_eq!(h.total(), 0);
        assert!(h.counts().iter().all(|&c| c == 0));
        assert!(histogram_phi(&[], AzimuthSelector::Photon2, 1, None).is_err());
    }

    #[test]
    fn modulation_needs_two_points() {
        assert!(estimate_modulation(&[]).is_err());
        assert!(estimate_modulation(&[1.0]).is_err());
        let e = estimate_modulation(&[0.0, PI / 2.0]).unwrap();
        assert_eq!(e.k_hat, 0.0);
        assert!(e.std_err > 0.0);
    }

    #[test]
    fn uniform_phis_give_zero_modulation() {
        let mut rng = RandomStream::new(21, 0).rng();
        let phis: Vec<f64> = (0..200_000).map(|_| TWO_PI * rng.gen::<f64>()).collect();
        let e = estimate_modulation(&phis).unwrap();
        assert!(e.k_hat.abs() < 3.0 * e.std_err, "{e:?}");
    }

    #[test]
    fn analytic_marginals() {
        let c = constants();
        assert!((analytic_marginal(Pipeline::KnKn, Photon::Second) - 0.3434).abs() < 5e-5);
        assert!((analytic_marginal(Pipeline::KnPw, Photon::Second) - 0.02904).abs() < 5e-6);
        assert_eq!(analytic_marginal(Pipeline::PwPw, Photon::Second), 0.0);
        assert_eq!(analytic_marginal(Pipeline::Recommended, Photon::Second), c.ratio);
    }

    #[test]
    fn kn_pw_analytic_extremes() {
        let c = constants();
        let k = c.lambda * c.ratio;
        let h = histogram_phi(&[], AzimuthSelector::Photon2, 64, Some(Pipeline::KnPw)).unwrap();
        let a = h.analytic().unwrap();
        let max = a.iter().cloned().fold(f64::MIN, f64::max);
        let min = a.iter().cloned().fold(f64::MAX, f64::min);
        // Bin centers sit half a bin off the extrema and each mass averages the curve.
        let w = TWO_PI / 64.0;
        let shrink = w.cos() * w.sin() / w;
        let binned = (1.0 - k * shrink) / (1.0 + k * shrink);
        assert!((min / max - binned).abs() < 1e-12, "{} {}", min / max, binned);
        assert!((min / max - (1.0 - k) / (1.0 + k)).abs() < 1e-3);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_exact_expectation_is_zero() {
        let mut h = Histogram::new(vec![0.0, 1.0, 2.0, 3.0], vec![10, 20, 70], None).unwrap();
        assert!(matches!(chi_square(&h), Err(Error::MissingAnalytic)));
        h.set_analytic(|lo, _| [0.1, 0.2, 0.7][lo as usize]);
        let r = chi_square(&h).unwrap();
        assert!(r.chi2.abs() < 1e-12);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_rejects_low_counts() {
        let mut h = Histogram::new(vec![0.0, 1.0, 2.0], vec![1, 9], None).unwrap();
        h.set_analytic(|lo, _| [0.1, 0.9][lo as usize]);
        assert!(matches!(chi_square(&h), Err(Error::LowExpectedCount { bin: 0, .. })));
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let r = two_sample_chi_square(&[5, 10, 0, 20], &[5, 10, 0, 20]).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert_eq!(r.dof, 2);
        assert!(two_sample_chi_square(&[1, 2], &[1]).is_err());
        assert!(two_sample_chi_square(&[0, 0], &[1, 2]).is_err());
    }

    #[test]
    fn reduced_2d_peaks_and_mean() {
        let g = azimuth_grid(256);
        let r = constants().ratio;
        let naive = reduced_2d(ModelKind::NaivePhi, &g, &g).unwrap();
        let rec = reduced_2d(ModelKind::Recommended, &g, &g).unwrap();
        let peak = |m: &Vec<Vec<f64>>| m.iter().flatten().cloned().fold(f64::MIN, f64::max);
        assert!((peak(&naive) - (1.0 + r * r)).abs() < 1e-12);
        assert!((peak(&rec) - (1.0 + r).powi(2)).abs() < 1e-12);
        let mean = rec.iter().flatten().sum::<f64>() / (256.0 * 256.0);
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(reduced_2d(ModelKind::PwFixedFrame, &g, &g).is_err());
    }

    #[test]
    fn scan_shape_and_origin() {
        let m = scan_ansatz((-1.0, 1.0), (-1.0, 1.0), 3).unwrap();
        assert_eq!(m.rows().count(), 9);
        assert!(m.feasible[1][1]);
        assert!(!m.feasible[2][1]);
        assert!(scan_ansatz((1.0, -1.0), (0.0, 1.0), 3).is_err());
        assert!(scan_ansatz((0.0, f64::NAN), (0.0, 1.0), 3).is_err());
    }

    #[test]
    fn modulated_mass_matches_density_integral() {
        let k = 0.3;
        let exact = modulated_mass(k, 0.2, 1.3);
        let q = crate::quadrature::adaptive(|p| modulated_density(k, p), 0.2, 1.3, 1e-14).unwrap();
        assert!((exact - q.value).abs() < 1e-13);
    }
}
