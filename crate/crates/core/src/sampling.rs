//! Event generation.
//!
//! All samplers use rejection against constant envelopes. Single-photon
//! brackets are bounded by `sup(F + G) = 2`; pair brackets by
//! `(F₁ + G₁)(F₂ + G₂) ≤ 4`, which also serves as a cheap squeeze before
//! the azimuths are drawn.
//!
//! Randomness comes from [`RandomStream`]: ChaCha8 keyed by the 64-bit seed
//! (expanded with `SeedableRng::seed_from_u64`) with the stream index as
//! the ChaCha stream id, so every `(seed, stream_index)` pair yields an
//! independent, reproducible sequence.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinematics::{f_raw, g_raw, MAX_G, SUP_F_PLUS_G};
use crate::models::{
    ansatz_extra_bracket_bound, ansatz_grid_minimum, normalize_azimuth, AngularGrid, AzimuthFrame, ModelKind,
    ModelSpec, ScatterAngles, TWO_PI,
};

/// Relative safety margin added to every rejection envelope.
pub const ENVELOPE_MARGIN: f64 = 1e-9;

/// Densities at or above this value count as non-negative.
pub const NON_NEGATIVITY_TOLERANCE: f64 = -1e-12;

/// Orientation of the second photon's polarization relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrthSign {
    /// Second photon polarized at `Φ + π/2`.
    Plus,
    /// Second photon polarized at `Φ − π/2`.
    Minus,
}

impl OrthSign {
    #[inline]
    pub fn shift(self) -> f64 {
        match self {
            OrthSign::Plus => FRAC_PI_2,
            OrthSign::Minus => -FRAC_PI_2,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            OrthSign::Plus => 1,
            OrthSign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(OrthSign::Plus),
            -1 => Some(OrthSign::Minus),
            _ => None,
        }
    }
}

/// Initial polarizations of a photon pair in the fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFrame {
    /// First photon's polarization angle from the fixed x-axis, in `[0, 2π)`.
    pub big_phi: f64,
    pub orth_sign: OrthSign,
}

impl PolarizationFrame {
    pub fn new(big_phi: f64, orth_sign: OrthSign) -> Self {
        PolarizationFrame {
            big_phi: normalize_azimuth(big_phi),
            orth_sign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    First,
    Second,
}

#[inline]
fn frame_offset(frame: &PolarizationFrame, photon: Photon) -> f64 {
    match photon {
        Photon::First => frame.big_phi,
        Photon::Second => frame.big_phi + frame.orth_sign.shift(),
    }
}

/// Polarization-relative `ϕ` to fixed-frame `φ`: `(ϕ + Φ [± π/2]) mod 2π`.
#[inline]
pub fn to_fixed_frame(phi: f64, frame: &PolarizationFrame, photon: Photon) -> f64 {
    normalize_azimuth(phi + frame_offset(frame, photon))
}

/// Fixed-frame `φ` to polarization-relative `ϕ`: `(φ − Φ [∓ π/2]) mod 2π`.
#[inline]
pub fn to_polarization_frame(varphi: f64, frame: &PolarizationFrame, photon: Photon) -> f64 {
    normalize_azimuth(varphi - frame_offset(frame, photon))
}

/// A fully described two-photon scattering event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub frame: PolarizationFrame,
    /// Photon 1, polarization-relative azimuth.
    pub photon1: ScatterAngles,
    /// Photon 2, polarization-relative azimuth.
    pub photon2: ScatterAngles,
    pub fixed1_phi: f64,
    pub fixed2_phi: f64,
}

impl PairEvent {
    pub fn from_polarization(frame: PolarizationFrame, photon1: ScatterAngles, photon2: ScatterAngles) -> Self {
        PairEvent {
            frame,
            photon1,
            photon2,
            fixed1_phi: to_fixed_frame(photon1.phi, &frame, Photon::First),
            fixed2_phi: to_fixed_frame(photon2.phi, &frame, Photon::Second),
        }
    }

    pub fn from_fixed(frame: PolarizationFrame, fixed1: ScatterAngles, fixed2: ScatterAngles) -> Self {
        PairEvent {
            frame,
            photon1: fixed1.with_phi(to_polarization_frame(fixed1.phi, &frame, Photon::First)),
            photon2: fixed2.with_phi(to_polarization_frame(fixed2.phi, &frame, Photon::Second)),
            fixed1_phi: fixed1.phi,
            fixed2_phi: fixed2.phi,
        }
    }

    pub fn fixed1(&self) -> ScatterAngles {
        ScatterAngles {
            chi: self.photon1.chi,
            phi: self.fixed1_phi,
        }
    }

    pub fn fixed2(&self) -> ScatterAngles {
        ScatterAngles {
            chi: self.photon2.chi,
            phi: self.fixed2_phi,
        }
    }
}

pub type StreamRng = ChaCha8Rng;

/// Identifies one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RandomStream { seed, stream_index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[inline]
fn uniform_chi<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * rng.gen::<f64>() - 1.0
}

#[inline]
fn uniform_phi<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normalize_azimuth(TWO_PI * rng.gen::<f64>())
}

/// `Φ` uniform on `[0, 2π)`, sign uniform on `{+, −}`.
pub fn sample_frame<R: Rng + ?Sized>(rng: &mut R) -> PolarizationFrame {
    let big_phi = uniform_phi(rng);
    let orth_sign = if rng.gen::<bool>() {
        OrthSign::Plus
    } else {
        OrthSign::Minus
    };
    PolarizationFrame { big_phi, orth_sign }
}

/// Klein-Nishina scattering, polarization-relative azimuth.
pub fn sample_kn<R: Rng + ?Sized>(rng: &mut R) -> ScatterAngles {
    let envelope = SUP_F_PLUS_G * (1.0 + ENVELOPE_MARGIN);
    loop {
        let chi = uniform_chi(rng);
        let w = envelope * rng.gen::<f64>();
        let (f, g) = (f_raw(chi), g_raw(chi));
        if w > f + g {
            continue;
        }
        let phi = uniform_phi(rng);
        if w <= f - g * (2.0 * phi).cos() {
            return ScatterAngles::new_unchecked(chi, phi);
        }
    }
}

/// Photon 2 given photon 1 under Pryce-Ward; both in the fixed frame.
pub fn sample_pw_conditional<R: Rng + ?Sized>(rng: &mut R, fixed1: &ScatterAngles) -> ScatterAngles {
    let (f1, g1) = (fixed1.f(), fixed1.g());
    let envelope = (SUP_F_PLUS_G * f1 + MAX_G * g1) * (1.0 + ENVELOPE_MARGIN);
    loop {
        let chi = uniform_chi(rng);
        let w = envelope * rng.gen::<f64>();
        let (f2, g2) = (f_raw(chi), g_raw(chi));
        if w > f1 * f2 + g1 * g2 {
            continue;
        }
        let phi = uniform_phi(rng);
        if w <= f1 * f2 - g1 * g2 * (2.0 * (phi - fixed1.phi)).cos() {
            return ScatterAngles::new_unchecked(chi, phi);
        }
    }
}

/// Photon 2 given photon 1 under the recommended model; polarization frame.
///
/// As a function of photon 2 the bracket is `F₂·A + G₂·(G₁ cos 2(ϕ₂ − ϕ₁) − F₁ cos 2ϕ₂)`
/// with `A = F₁ − G₁ cos 2ϕ₁`; the second factor is a sinusoid in `ϕ₂` of
/// amplitude `B = |F₁ − G₁ e^{2iϕ₁}|`.
pub fn sample_recommended_conditional<R: Rng + ?Sized>(rng: &mut R, photon1: &ScatterAngles) -> ScatterAngles {
    let (f1, g1) = (photon1.f(), photon1.g());
    let c1 = (2.0 * photon1.phi).cos();
    let a = f1 - g1 * c1;
    let b = (f1 * f1 + g1 * g1 - 2.0 * f1 * g1 * c1).max(0.0).sqrt();
    let envelope = (SUP_F_PLUS_G * a + MAX_G * b) * (1.0 + ENVELOPE_MARGIN);
    loop {
        let chi = uniform_chi(rng);
        let w = envelope * rng.gen::<f64>();
        let (f2, g2) = (f_raw(chi), g_raw(chi));
        if w > f2 * a + g2 * b {
            continue;
        }
        let phi = uniform_phi(rng);
        let bracket = f2 * a + g2 * (g1 * (2.0 * (phi - photon1.phi)).cos() - f1 * (2.0 * phi).cos());
        if w <= bracket {
            return ScatterAngles::new_unchecked(chi, phi);
        }
    }
}

/// Grid minimum of ansatz densities, memoized per parameter pair.
fn cached_ansatz_minimum(b_ff: f64, b_gg: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let key = (b_ff.to_bits(), b_gg.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&m) = cache.lock().expect("cache poisoned").get(&key) {
        return m;
    }
    let m = ansatz_grid_minimum(&AngularGrid::default(), b_ff, b_gg, NON_NEGATIVITY_TOLERANCE);
    cache.lock().expect("cache poisoned").insert(key, m);
    m
}

/// All-at-once 4D rejection sampler for a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct JointSampler {
    model: ModelSpec,
    envelope: f64,
    squeeze: bool,
    proposals: u64,
    accepted: u64,
}

impl JointSampler {
    /// Fails for ansatz parameters whose density is negative on the
    /// default angular grid.
    pub fn new(model: ModelSpec) -> Result<Self> {
        let (envelope, squeeze) = match model.kind {
            ModelKind::AnsatzFamily => {
                if !(model.b_ff.is_finite() && model.b_gg.is_finite()) {
                    return Err(Error::Precondition("ansatz parameters must be finite".into()));
                }
                let min_density = cached_ansatz_minimum(model.b_ff, model.b_gg);
                if min_density < NON_NEGATIVITY_TOLERANCE {
                    return Err(Error::InfeasibleAnsatz {
                        b_ff: model.b_ff,
                        b_gg: model.b_gg,
                        min_density,
                    });
                }
                (4.0 + ansatz_extra_bracket_bound(model.b_ff, model.b_gg), false)
            }
            _ => (4.0, true),
        };
        Ok(JointSampler {
            model,
            envelope: envelope * (1.0 + ENVELOPE_MARGIN),
            squeeze,
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// Draws both photons' angles in the model's own azimuth frame.
    pub fn sample_angles<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (ScatterAngles, ScatterAngles) {
        loop {
            self.proposals += 1;
            let chi1 = uniform_chi(rng);
            let chi2 = uniform_chi(rng);
            let w = self.envelope * rng.gen::<f64>();
            if self.squeeze && w > (f_raw(chi1) + g_raw(chi1)) * (f_raw(chi2) + g_raw(chi2)) {
                continue;
            }
            let a1 = ScatterAngles::new_unchecked(chi1, uniform_phi(rng));
            let a2 = ScatterAngles::new_unchecked(chi2, uniform_phi(rng));
            if w <= self.model.bracket(&a1, &a2) {
                self.accepted += 1;
                return (a1, a2);
            }
        }
    }

    /// Draws a frame, then the angles, and fills both azimuth representations.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> PairEvent {
        let frame = sample_frame(rng);
        let (a1, a2) = self.sample_angles(rng);
        match self.model.frame() {
            AzimuthFrame::Fixed => PairEvent::from_fixed(frame, a1, a2),
            AzimuthFrame::Polarization => PairEvent::from_polarization(frame, a1, a2),
        }
    }

    pub fn proposals(&self) -> u64 {
        self.proposals
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// One event from `model` by 4D rejection sampling.
pub fn sample_joint<R: Rng + ?Sized>(rng: &mut R, model: ModelSpec) -> Result<PairEvent> {
    Ok(JointSampler::new(model)?.sample(rng))
}

/// Complete event-generation procedures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pipeline {
    /// Both photons Klein-Nishina, independently.
    KnKn,
    /// Photon 1 Klein-Nishina, photon 2 conditional Pryce-Ward (direct Pryce-Ward sampling).
    KnPw,
    /// Pryce-Ward sampled jointly in the fixed frame.
    PwPw,
    /// Naive polarization-frame density sampled jointly.
    NaivePhi,
    /// Recommended density sampled jointly.
    Recommended,
    /// Photon 1 Klein-Nishina, photon 2 conditional recommended.
    RecommendedStaged,
    Ansatz {
        b_ff: f64,
        b_gg: f64,
    },
}

impl Pipeline {
    pub const ALL_NAMED: [&'static str; 7] = [
        "kn-independent",
        "pw-direct",
        "pw-joint",
        "naive-phi",
        "recommended",
        "recommended-staged",
        "ansatz",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::KnKn => "kn-independent",
            Pipeline::KnPw => "pw-direct",
            Pipeline::PwPw => "pw-joint",
            Pipeline::NaivePhi => "naive-phi",
            Pipeline::Recommended => "recommended",
            Pipeline::RecommendedStaged => "recommended-staged",
            Pipeline::Ansatz { .. } => "ansatz",
        }
    }

    /// Parses a flag name; `ansatz` takes its parameters from the arguments.
    pub fn from_name(name: &str, b_ff: Option<f64>, b_gg: Option<f64>) -> Result<Self> {
        Ok(match name {
            "kn-independent" => Pipeline::KnKn,
            "pw-direct" => Pipeline::KnPw,
            "pw-joint" => Pipeline::PwPw,
            "naive-phi" => Pipeline::NaivePhi,
            "recommended" => Pipeline::Recommended,
            "recommended-staged" => Pipeline::RecommendedStaged,
            "ansatz" => match (b_ff, b_gg) {
                (Some(b_ff), Some(b_gg)) => Pipeline::Ansatz { b_ff, b_gg },
                _ => {
                    return Err(Error::Precondition(
                        "model `ansatz` requires both --bff and --bgg".into(),
                    ))
                }
            },
            other => return Err(Error::UnsupportedModel(other.to_string())),
        })
    }

    /// The joint density this pipeline realizes (for staged pipelines, the
    /// density whose conditional is sampled for photon 2).
    pub fn model(&self) -> ModelSpec {
        match *self {
            Pipeline::KnKn => ModelSpec::new(ModelKind::KnIndependent),
            Pipeline::KnPw | Pipeline::PwPw => ModelSpec::new(ModelKind::PwFixedFrame),
            Pipeline::NaivePhi => ModelSpec::new(ModelKind::NaivePhi),
            Pipeline::Recommended | Pipeline::RecommendedStaged => ModelSpec::new(ModelKind::Recommended),
            Pipeline::Ansatz { b_ff, b_gg } => ModelSpec::ansatz(b_ff, b_gg),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pipeline::Ansatz { b_ff, b_gg } => write!(f, "ansatz(b_ff={b_ff:e},b_gg={b_gg:e})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::from_name(s, None, None)
    }
}

/// Stateful event generator for one [`Pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineSampler {
    pipeline: Pipeline,
    joint: Option<JointSampler>,
}

impl PipelineSampler {
    pub fn new(pipeline: Pipeline) -> Result<Self> {
        let joint = match pipeline {
            Pipeline::PwPw | Pipeline::NaivePhi | Pipeline::Recommended | Pipeline::Ansatz { .. } => {
                Some(JointSampler::new(pipeline.model())?)
            }
            Pipeline::KnKn | Pipeline::KnPw | Pipeline::RecommendedStaged => None,
        };
        Ok(PipelineSampler { pipeline, joint })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> PairEvent {
        if let Some(joint) = self.joint.as_mut() {
            return joint.sample(rng);
        }
        let frame = sample_frame(rng);
        match self.pipeline {
            Pipeline::KnKn => {
                let p1 = sample_kn(rng);
                let p2 = sample_kn(rng);
                PairEvent::from_polarization(frame, p1, p2)
            }
            Pipeline::KnPw => {
                let p1 = sample_kn(rng);
                let fixed1 = p1.with_phi(to_fixed_frame(p1.phi, &frame, Photon::First));
                let fixed2 = sample_pw_conditional(rng, &fixed1);
                PairEvent::from_fixed(frame, fixed1, fixed2)
            }
            Pipeline::RecommendedStaged => {
                let p1 = sample_kn(rng);
                let p2 = sample_recommended_conditional(rng, &p1);
                PairEvent::from_polarization(frame, p1, p2)
            }
            _ => unreachable!("joint pipelines handled above"),
        }
    }

    /// `(proposals, accepted)` of the 4D sampler, if this pipeline uses one.
    pub fn joint_counts(&self) -> Option<(u64, u64)> {
        self.joint.as_ref().map(|j| (j.proposals(), j.accepted()))
    }
}

/// Receives the events of one partition; partitions are merged in index order.
pub trait EventSink: Send {
    fn record(&mut self, event: &PairEvent);
    /// Appends the contents of the next partition.
    fn merge(&mut self, next: Self)
    where
        Self: Sized;
}

impl EventSink for Vec<PairEvent> {
    fn record(&mut self, event: &PairEvent) {
        self.push(*event);
    }

    fn merge(&mut self, next: Self) {
        self.extend(next);
    }
}

/// Splits `n` into `workers` contiguous partition sizes, larger ones first.
pub fn partition_sizes(n: u64, workers: usize) -> Vec<u64> {
    let w = workers as u64;
    (0..w).map(|i| n / w + u64::from(i < n % w)).collect()
}

/// Generates exactly `n` events, partition `i` drawing from stream `(seed, i)`.
pub fn run_pipeline_into<S, F>(pipeline: Pipeline, n: u64, seed: u64, workers: usize, make_sink: F) -> Result<S>
where
    S: EventSink,
    F: Fn() -> S + Sync,
{
    if n == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    if workers == 0 {
        return Err(Error::Precondition("worker count must be at least 1".into()));
    }
    let template = PipelineSampler::new(pipeline)?;
    let sizes = partition_sizes(n, workers);

    let run_partition = |index: usize, count: u64| {
        let mut rng = RandomStream::new(seed, index as u64).rng();
        let mut sampler = template.clone();
        let mut sink = make_sink();
        for _ in 0..count {
            sink.record(&sampler.sample(&mut rng));
        }
        (sink, sampler.joint_counts())
    };

    let results: Vec<_> = if workers == 1 {
        vec![run_partition(0, sizes[0])]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = sizes
                .iter()
                .enumerate()
                .map(|(i, &count)| scope.spawn(move || run_partition(i, count)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sampling worker panicked"))
                .collect()
        })
    };

    let mut proposals = 0;
    let mut accepted = 0;
    let mut merged: Option<S> = None;
    for (sink, counts) in results {
        if let Some((p, a)) = counts {
            proposals += p;
            accepted += a;
        }
        match merged.as_mut() {
            None => merged = Some(sink),
            Some(m) => m.merge(sink),
        }
    }
    if proposals > 0 {
        log::info!(
            "{pipeline}: 4D acceptance {:.4} ({accepted}/{proposals})",
            accepted as f64 / proposals as f64
        );
    }
    Ok(merged.expect("at least one partition"))
}

/// Generates exactly `n` events and returns them in partition order.
pub fn run_pipeline(pipeline: Pipeline, n: u64, seed: u64, workers: usize) -> Result<Vec<PairEvent>> {
    run_pipeline_into(pipeline, n, seed, workers, Vec::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circular_distance(a: f64, b: f64) -> f64 {
        let d = (a - b).abs() % TWO_PI;
        d.min(TWO_PI - d)
    }

    #[test]
    fn fixed_frame_examples() {
        let f = PolarizationFrame::new(PI / 4.0, OrthSign::Plus);
        assert!((to_fixed_frame(0.0, &f, Photon::First) - PI / 4.0).abs() < 1e-15);
        let f = PolarizationFrame::new(PI, OrthSign::Plus);
        assert!((to_fixed_frame(1.5 * PI, &f, Photon::First) - PI / 2.0).abs() < 1e-15);
        let f = PolarizationFrame::new(0.0, OrthSign::Plus);
        assert!((to_fixed_frame(0.0, &f, Photon::Second) - PI / 2.0).abs() < 1e-15);
        let f = PolarizationFrame::new(0.0, OrthSign::Minus);
        assert!((to_fixed_frame(0.0, &f, Photon::Second) - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn polarization_frame_examples() {
        let f = PolarizationFrame::new(0.0, OrthSign::Plus);
        assert!(to_polarization_frame(PI / 2.0, &f, Photon::Second).abs() < 1e-15);
        let f = PolarizationFrame::new(PI / 4.0, OrthSign::Minus);
        assert!((to_polarization_frame(0.0, &f, Photon::First) - 1.75 * PI).abs() < 1e-15);
    }

    #[test]
    fn frame_roundtrip() {
        let mut rng = RandomStream::new(3, 0).rng();
        for _ in 0..100_000 {
            let frame = sample_frame(&mut rng);
            let phi = uniform_phi(&mut rng);
            for photon in [Photon::First, Photon::Second] {
                let back = to_polarization_frame(to_fixed_frame(phi, &frame, photon), &frame, photon);
                assert!((0.0..TWO_PI).contains(&back));
                assert!(circular_distance(back, phi) < 1e-12);
            }
        }
    }

    #[test]
    fn stream_determinism_and_independence() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = RandomStream::new(9, 2).rng();
                move |_| r.gen()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = RandomStream::new(9, 2).rng();
                move |_| r.gen()
            })
            .collect();
        let c: Vec<u64> = (0..8)
            .map({
                let mut r = RandomStream::new(9, 3).rng();
                move |_| r.gen()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn frame_sampling_is_uniform() {
        let mut rng = RandomStream::new(11, 0).rng();
        let n = 1_000_000;
        let (mut cos_sum, mut plus) = (0.0, 0u64);
        for _ in 0..n {
            let f = sample_frame(&mut rng);
            assert!((0.0..TWO_PI).contains(&f.big_phi));
            cos_sum += (2.0 * f.big_phi).cos();
            plus += u64::from(f.orth_sign == OrthSign::Plus);
        }
        assert!((cos_sum / n as f64).abs() < 3e-3);
        assert!((plus as f64 / n as f64 - 0.5).abs() < 2e-3);
    }

    #[test]
    fn samples_stay_in_domain() {
        let mut rng = RandomStream::new(5, 1).rng();
        for _ in 0..20_000 {
            let a = sample_kn(&mut rng);
            assert!((-1.0..=1.0).contains(&a.chi.value()) && (0.0..TWO_PI).contains(&a.phi));
            let b = sample_pw_conditional(&mut rng, &a);
            assert!((-1.0..=1.0).contains(&b.chi.value()) && (0.0..TWO_PI).contains(&b.phi));
            let c = sample_recommended_conditional(&mut rng, &a);
            assert!((-1.0..=1.0).contains(&c.chi.value()) && (0.0..TWO_PI).contains(&c.phi));
        }
    }

    #[test]
    fn conditional_envelopes_dominate() {
        let grid = AngularGrid::new(41, 48);
        for a1 in grid.iter() {
            let (f1, g1) = (a1.f(), a1.g());
            let pw_env = SUP_F_PLUS_G * f1 + MAX_G * g1;
            let c1 = (2.0 * a1.phi).cos();
            let rec_env = SUP_F_PLUS_G * (f1 - g1 * c1) + MAX_G * (f1 * f1 + g1 * g1 - 2.0 * f1 * g1 * c1).sqrt();
            for a2 in grid.iter() {
                assert!(crate::models::pw_bracket(&a1, &a2) <= pw_env);
                assert!(crate::models::recommended_bracket(&a1, &a2) <= rec_env + 1e-15);
            }
        }
    }

    #[test]
    fn joint_envelope_dominates_on_grid() {
        let grid = AngularGrid::new(41, 32);
        let models = [
            ModelSpec::new(ModelKind::KnIndependent),
            ModelSpec::new(ModelKind::PwFixedFrame),
            ModelSpec::new(ModelKind::NaivePhi),
            ModelSpec::new(ModelKind::Recommended),
        ];
        for a1 in grid.iter() {
            let s1 = a1.f() + a1.g();
            for a2 in grid.iter() {
                let squeeze = s1 * (a2.f() + a2.g());
                assert!(squeeze <= 4.0 + 1e-15);
                for m in &models {
                    assert!(m.bracket(&a1, &a2) <= squeeze + 1e-15, "{m:?}");
                }
            }
        }
    }

    #[test]
    fn infeasible_ansatz_rejected() {
        let err = JointSampler::new(ModelSpec::ansatz(10.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAnsatz { .. }));
        assert!(JointSampler::new(ModelSpec::ansatz(f64::NAN, 0.0)).is_err());
        assert!(JointSampler::new(ModelSpec::ansatz(0.0, 0.0)).is_ok());
    }

    #[test]
    fn joint_acceptance_near_expected() {
        let mut rng = RandomStream::new(1, 0).rng();
        let mut s = JointSampler::new(ModelSpec::new(ModelKind::Recommended)).unwrap();
        for _ in 0..50_000 {
            s.sample(&mut rng);
        }
        // ∫bracket / (envelope · volume) = 𝓕²/16
        let expected = crate::kinematics::constants().big_f_int.powi(2) / 16.0;
        assert!((s.acceptance_rate() - expected).abs() < 2e-3, "{}", s.acceptance_rate());
    }

    #[test]
    fn pipeline_preconditions() {
        assert!(matches!(
            run_pipeline(Pipeline::Recommended, 0, 1, 1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            run_pipeline(Pipeline::Recommended, 10, 1, 0),
            Err(Error::Precondition(_))
        ));
        assert!(Pipeline::from_name("ansatz", Some(0.0), None).is_err());
        assert!("nope".parse::<Pipeline>().is_err());
    }

    #[test]
    fn partitions_cover_n() {
        assert_eq!(partition_sizes(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(partition_sizes(2, 4), vec![1, 1, 0, 0]);
        let n: u64 = partition_sizes(1_000_003, 7).iter().sum();
        assert_eq!(n, 1_000_003);
    }

    #[test]
    fn pipeline_deterministic() {
        let a = run_pipeline(Pipeline::Recommended, 1000, 42, 1).unwrap();
        let b = run_pipeline(Pipeline::Recommended, 1000, 42, 1).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        let c = run_pipeline(Pipeline::KnPw, 1001, 42, 4).unwrap();
        let d = run_pipeline(Pipeline::KnPw, 1001, 42, 4).unwrap();
        assert_eq!(c, d);
        // Partition i is exactly the serial output of stream i.
        let mut rng = RandomStream::new(42, 1).rng();
        let mut s = PipelineSampler::new(Pipeline::KnPw).unwrap();
        let second: Vec<_> = (0..250).map(|_| s.sample(&mut rng)).collect();
        assert_eq!(&c[251..501], &second[..]);
    }

    #[test]
    fn event_frames_consistent() {
        for p in [
            Pipeline::KnKn,
            Pipeline::KnPw,
            Pipeline::PwPw,
            Pipeline::Recommended,
            Pipeline::RecommendedStaged,
        ] {
            for e in run_pipeline(p, 500, 8, 2).unwrap() {
                let f1 = to_fixed_frame(e.photon1.phi, &e.frame, Photon::First);
                let f2 = to_fixed_frame(e.photon2.phi, &e.frame, Photon::Second);
                assert!(circular_distance(f1, e.fixed1_phi) < 1e-12);
                assert!(circular_distance(f2, e.fixed2_phi) < 1e-12);
            }
        }
    }
}
