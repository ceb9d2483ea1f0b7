//! Complex baseband signals: dual-carrier waveform synthesis, frequency
//! translation, lowpass design, FIR filtering and time/phase alignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DpdError, Result};

pub type C64 = Complex64;

/// Upper bound on the composite simulation rate accepted by [`DualCarrierSpec`].
pub const DEFAULT_MAX_SAMPLE_RATE_HZ: f64 = 2.0e9;
/// Longest FIR that [`design_lowpass`] will return.
pub const MAX_FILTER_LEN: usize = 1 << 15;

/// Uniformly sampled complex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBasebandSignal {
    samples: Vec<C64>,
    sample_rate_hz: f64,
}

impl ComplexBasebandSignal {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DpdError::Rate(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(DpdError::InvalidInput("signal has no samples".into()));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(DpdError::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// All-zero signal of the given length.
    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x(n)|^2.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub(crate) fn with_samples(&self, samples: Vec<C64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
    Qam16,
}

impl Modulation {
    fn draw(self, rng: &mut ChaCha8Rng) -> C64 {
        match self {
            Modulation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let re = if rng.gen::<bool>() { s } else { -s };
                let im = if rng.gen::<bool>() { s } else { -s };
                C64::new(re, im)
            }
            Modulation::Qam16 => {
                const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
                let scale = 1.0 / 10f64.sqrt();
                let re = LEVELS[rng.gen_range(0..4)] * scale;
                let im = LEVELS[rng.gen_range(0..4)] * scale;
                C64::new(re, im)
            }
        }
    }
}

/// Kaiser-windowed raised-cosine transmit pulse.
///
/// The windowed pulse keeps the raised-cosine zero crossings at every
/// nonzero multiple of the symbol period, so sampling the (ideally
/// band-selected) received carrier at the symbol instants is ISI free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseShape {
    pub rolloff: f64,
    /// One-sided span in symbols.
    pub span_symbols: usize,
    pub kaiser_beta: f64,
}

impl Default for PulseShape {
    fn default() -> Self {
        Self {
            rolloff: 0.22,
            span_symbols: 32,
            kaiser_beta: 14.0,
        }
    }
}

impl PulseShape {
    /// Pulse value at time `t` measured in symbol periods.
    pub fn value(&self, t: f64) -> f64 {
        let half = self.span_symbols as f64;
        if t.abs() > half {
            return 0.0;
        }
        let b = self.rolloff;
        let rc = if t == 0.0 {
            1.0
        } else if b > 0.0 && ((2.0 * b * t).abs() - 1.0).abs() < 1e-10 {
            PI / 4.0 * sinc(1.0 / (2.0 * b))
        } else {
            sinc(t) * (PI * b * t).cos() / (1.0 - (2.0 * b * t).powi(2))
        };
        let r = t / half;
        let w = bessel_i0(self.kaiser_beta * (1.0 - r * r).max(0.0).sqrt())
            / bessel_i0(self.kaiser_beta);
        rc * w
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Description of a noncontiguous two-carrier transmit signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualCarrierSpec {
    /// Occupied bandwidth of each carrier, (1 + rolloff) x symbol rate.
    pub cc_bandwidth_hz: [f64; 2],
    /// Center-to-center spacing, equal to 2 f_IF.
    pub carrier_spacing_hz: f64,
    pub modulation: Modulation,
    pub per_cc_power: [f64; 2],
    pub guard: f64,
    pub pulse: PulseShape,
    /// Highest IM sub-band order that must be represented alias free.
    pub max_im_order: u32,
    /// Highest nonlinearity order whose regrowth must fit around each sub-band.
    pub max_dpd_order: u32,
    pub max_sample_rate_hz: f64,
}

impl Default for DualCarrierSpec {
    fn default() -> Self {
        Self {
            cc_bandwidth_hz: [1.0e6, 1.0e6],
            carrier_spacing_hz: 12.0e6,
            modulation: Modulation::Qpsk,
            per_cc_power: [1.0, 1.0],
            guard: 1.2,
            pulse: PulseShape::default(),
            max_im_order: 3,
            max_dpd_order: 9,
            max_sample_rate_hz: DEFAULT_MAX_SAMPLE_RATE_HZ,
        }
    }
}

/// Composite sample clock derived from a [`DualCarrierSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeClock {
    pub sample_rate_hz: f64,
    pub samples_per_symbol: [usize; 2],
    /// Lower bound the rate had to satisfy.
    pub required_rate_hz: f64,
}

impl DualCarrierSpec {
    pub fn f_if_hz(&self) -> f64 {
        self.carrier_spacing_hz / 2.0
    }

    pub fn max_cc_bandwidth_hz(&self) -> f64 {
        self.cc_bandwidth_hz[0].max(self.cc_bandwidth_hz[1])
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.max_cc_bandwidth_hz();
        for (i, &bw) in self.cc_bandwidth_hz.iter().enumerate() {
            if !(bw.is_finite() && bw > 0.0) {
                return Err(DpdError::InvalidInput(format!(
                    "cc_bandwidth_hz[{i}] must be positive"
                )));
            }
        }
        for (i, &p) in self.per_cc_power.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(DpdError::InvalidInput(format!(
                    "per_cc_power[{i}] must be positive"
                )));
            }
        }
        if !(self.carrier_spacing_hz > b) {
            return Err(DpdError::Overlap {
                spacing_hz: self.carrier_spacing_hz,
                bandwidth_hz: b,
            });
        }
        if !(self.guard >= 1.0) {
            return Err(DpdError::InvalidInput("guard factor must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.pulse.rolloff) {
            return Err(DpdError::InvalidInput("rolloff must lie in [0, 1]".into()));
        }
        if self.pulse.span_symbols == 0 {
            return Err(DpdError::InvalidInput(
                "pulse span must be at least one symbol".into(),
            ));
        }
        if self.max_im_order == 0 || self.max_im_order.is_multiple_of(2) {
            return Err(DpdError::Order("max_im_order must be odd".into()));
        }
        if self.max_dpd_order == 0 || self.max_dpd_order.is_multiple_of(2) {
            return Err(DpdError::Order("max_dpd_order must be odd".into()));
        }
        Ok(())
    }

    /// Minimum composite rate: guard * (m_max f_IF + Q B_max / 2) * 2.
    pub fn required_sample_rate_hz(&self) -> f64 {
        self.guard
            * (self.max_im_order as f64 * self.f_if_hz()
                + self.max_dpd_order as f64 * self.max_cc_bandwidth_hz() / 2.0)
            * 2.0
    }

    /// Smallest integer multiple of the wider carrier's symbol rate that
    /// satisfies [`Self::required_sample_rate_hz`].
    pub fn composite_clock(&self) -> Result<CompositeClock> {
        self.validate()?;
        let required = self.required_sample_rate_hz();
        let base = self.max_cc_bandwidth_hz() / (1.0 + self.pulse.rolloff);
        let k = (required / base).ceil().max(2.0);
        let fs = k * base;
        if fs > self.max_sample_rate_hz {
            return Err(DpdError::Rate(format!(
                "composite rate {fs:.6e} Hz exceeds the configured maximum {:.6e} Hz",
                self.max_sample_rate_hz
            )));
        }
        let mut sps = [0usize; 2];
        for i in 0..2 {
            let rate = self.cc_bandwidth_hz[i] / (1.0 + self.pulse.rolloff);
            sps[i] = (fs / rate).round().max(2.0) as usize;
        }
        Ok(CompositeClock {
            sample_rate_hz: fs,
            samples_per_symbol: sps,
            required_rate_hz: required,
        })
    }
}

/// Transmitted symbols of one carrier together with its pulse description.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    /// Symbol k is centered on sample k * samples_per_symbol.
    pub symbols: Vec<C64>,
    pub symbol_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub pulse: PulseShape,
}

/// Output of [`generate_dual_carrier`].
#[derive(Debug, Clone)]
pub struct DualCarrierWaveform {
    pub composite: ComplexBasebandSignal,
    pub cc1: ComplexBasebandSignal,
    pub cc2: ComplexBasebandSignal,
    pub symbols: [SymbolStream; 2],
    pub f_if_hz: f64,
    pub clock: CompositeClock,
}

impl DualCarrierWaveform {
    pub fn sample_rate_hz(&self) -> f64 {
        self.clock.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.composite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.composite.is_empty()
    }

    /// Occupied bandwidth of the wider carrier.
    pub fn max_cc_bandwidth_hz(&self) -> f64 {
        let b = |s: &SymbolStream| s.symbol_rate_hz * (1.0 + s.pulse.rolloff);
        b(&self.symbols[0]).max(b(&self.symbols[1]))
    }
}

/// Synthesizes x(n) = x1(n) e^{+j w n} + x2(n) e^{-j w n}, w = 2 pi f_IF / f_s.
pub fn generate_dual_carrier(
    spec: &DualCarrierSpec,
    n_samples: usize,
    seed: u64,
) -> Result<DualCarrierWaveform> {
    let clock = spec.composite_clock()?;
    let fs = clock.sample_rate_hz;
    let mut ccs = Vec::with_capacity(2);
    let mut streams = Vec::with_capacity(2);
    for i in 0..2 {
        let sps = clock.samples_per_symbol[i];
        let visible = n_samples.div_ceil(sps);
        if visible < 100 {
            return Err(DpdError::InvalidInput(format!(
                "{n_samples} samples carry only {visible} symbols on carrier {}; need at least 100",
                i + 1
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let span = spec.pulse.span_symbols;
        // symbols -span..visible+span, the hidden ones only feed the edges
        let all: Vec<C64> = (0..visible + 2 * span)
            .map(|_| spec.modulation.draw(&mut rng))
            .collect();
        let mut x = shape_symbols(&all, span, sps, &spec.pulse, n_samples);
        let p = mean_power(&x);
        let g = (spec.per_cc_power[i] / p).sqrt();
        x.iter_mut().for_each(|v| *v *= g);
        ccs.push(ComplexBasebandSignal::new(x, fs)?);
        streams.push(SymbolStream {
            symbols: all[span..span + visible].to_vec(),
            symbol_rate_hz: fs / sps as f64,
            samples_per_symbol: sps,
            pulse: spec.pulse,
        });
    }
    let f_if = spec.f_if_hz();
    let w = f_if / fs;
    let composite: Vec<C64> = (0..n_samples)
        .map(|n| {
            ccs[0].samples[n] * unit_tone(w, n as i64) + ccs[1].samples[n] * unit_tone(-w, n as i64)
        })
        .collect();
    let cc2 = ccs.pop().expect("two carriers");
    let cc1 = ccs.pop().expect("two carriers");
    let s2 = streams.pop().expect("two carriers");
    let s1 = streams.pop().expect("two carriers");
    Ok(DualCarrierWaveform {
        composite: ComplexBasebandSignal::new(composite, fs)?,
        cc1,
        cc2,
        symbols: [s1, s2],
        f_if_hz: f_if,
        clock,
    })
}

/// Pulse-shapes `symbols`, where entry `offset` is the symbol centered on sample 0.
fn shape_symbols(
    symbols: &[C64],
    offset: usize,
    sps: usize,
    pulse: &PulseShape,
    len: usize,
) -> Vec<C64> {
    let half = pulse.span_symbols * sps;
    let taps: Vec<f64> = (0..=2 * half)
        .map(|i| pulse.value((i as f64 - half as f64) / sps as f64))
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); len];
    for (n, o) in out.iter_mut().enumerate() {
        // global sample index n + offset*sps relative to symbol 0 of `symbols`
        let g = n + offset * sps;
        let k_lo = g.saturating_sub(half).div_ceil(sps);
        let k_hi = ((g + half) / sps).min(symbols.len().saturating_sub(1));
        let mut acc = C64::new(0.0, 0.0);
        for k in k_lo..=k_hi {
            let tap = taps[g + half - k * sps];
            acc += symbols[k] * tap;
        }
        *o = acc;
    }
    out
}

/// e^{j 2 pi f_norm n}, with the phase reduced modulo one cycle first.
#[inline]
pub(crate) fn unit_tone(f_norm: f64, n: i64) -> C64 {
    let cycles = (f_norm * n as f64).rem_euclid(1.0);
    C64::from_polar(1.0, 2.0 * PI * cycles)
}

/// Multiplies `x` by e^{j 2 pi f_norm (n0 + n)}.
pub(crate) fn mix_at(x: &[C64], f_norm: f64, n0: i64) -> Vec<C64> {
    x.iter()
        .enumerate()
        .map(|(n, &v)| v * unit_tone(f_norm, n0 + n as i64))
        .collect()
}

/// out(n) = in(n) e^{j 2 pi f_shift n / f_s}, phase referenced to n = 0.
pub fn frequency_shift(
    sig: &ComplexBasebandSignal,
    f_shift_hz: f64,
) -> Result<ComplexBasebandSignal> {
    let fs = sig.sample_rate_hz();
    if !(f_shift_hz.abs() < fs / 2.0) {
        return Err(DpdError::Rate(format!(
            "shift of {f_shift_hz} Hz aliases at sample rate {fs} Hz"
        )));
    }
    sig.with_samples(mix_at(sig.samples(), f_shift_hz / fs, 0))
}

/// Kaiser-window linear-phase lowpass.
///
/// `cutoff_hz` is the passband edge and the stopband begins at
/// `cutoff_hz + transition_hz`. The returned taps are odd in number,
/// symmetric, and have unit DC gain. The stopband is verified on a dense
/// grid and the length grown until it meets `stopband_atten_db`.
pub fn design_lowpass(
    cutoff_hz: f64,
    stopband_atten_db: f64,
    transition_hz: f64,
    f_s: f64,
) -> Result<Vec<f64>> {
    if !(cutoff_hz > 0.0 && cutoff_hz < f_s / 2.0) {
        return Err(DpdError::Design(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            f_s / 2.0
        )));
    }
    if !(transition_hz > 0.0) || !(stopband_atten_db > 0.0) {
        return Err(DpdError::Design(
            "transition width and attenuation must be positive".into(),
        ));
    }
    let stop = cutoff_hz + transition_hz;
    if stop >= f_s / 2.0 {
        return Err(DpdError::Design(format!(
            "stopband edge {stop} Hz is beyond Nyquist ({} Hz)",
            f_s / 2.0
        )));
    }
    let a = stopband_atten_db;
    let beta = if a > 50.0 {
        0.1102 * (a - 8.7)
    } else if a >= 21.0 {
        0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
    } else {
        0.0
    };
    let dw = 2.0 * PI * transition_hz / f_s;
    let mut len = (((a - 8.0) / (2.285 * dw)).ceil() as usize + 1).max(3) | 1;
    let fc = (cutoff_hz + stop) / 2.0 / f_s;
    loop {
        if len > MAX_FILTER_LEN {
            return Err(DpdError::Design(format!(
                "{a} dB with a {transition_hz} Hz transition needs more than {MAX_FILTER_LEN} taps"
            )));
        }
        let taps = kaiser_lowpass(len, fc, beta);
        if stopband_peak_db(&taps, stop / f_s) <= -a {
            return Ok(taps);
        }
        len = (len + len / 16 + 2) | 1;
    }
}

fn kaiser_lowpass(len: usize, fc: f64, beta: f64) -> Vec<f64> {
    let m = (len - 1) as f64 / 2.0;
    let i0b = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - m;
            let r = t / m;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            2.0 * fc * sinc(2.0 * fc * t) * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    // exact symmetry after normalization
    for i in 0..len / 2 {
        let v = 0.5 * (taps[i] + taps[len - 1 - i]);
        taps[i] = v;
        taps[len - 1 - i] = v;
    }
    taps
}

/// Peak stopband response in dB over [stop, 0.5] (normalized frequency),
/// read from a zero-padded FFT with at least eight bins per tap.
fn stopband_peak_db(taps: &[f64], stop: f64) -> f64 {
    let nfft = (taps.len() * 8).max(4096).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); nfft];
    for (b, &t) in buf.iter_mut().zip(taps) {
        *b = C64::new(t, 0.0);
    }
    FftPlanner::<f64>::new()
        .plan_fft_forward(nfft)
        .process(&mut buf);
    let first = (stop * nfft as f64).ceil() as usize;
    let mut peak = buf[first..=nfft / 2]
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    // the edge itself may fall between bins
    peak = peak.max(real_fir_response(taps, stop).norm());
    20.0 * peak.max(1e-300).log10()
}

/// Frequency response of a real FIR at normalized frequency `f` (cycles/sample).
pub fn real_fir_response(taps: &[f64], f: f64) -> C64 {
    let m = (taps.len() - 1) as f64 / 2.0;
    let mut acc = C64::new(0.0, 0.0);
    for (i, &h) in taps.iter().enumerate() {
        acc += h * C64::from_polar(1.0, -2.0 * PI * f * (i as f64 - m));
    }
    acc
}

fn is_symmetric(taps: &[C64]) -> bool {
    let n = taps.len();
    (0..n / 2).all(|i| taps[i] == taps[n - 1 - i])
}

/// Linear convolution truncated to the input length. With
/// `compensate_delay` and symmetric taps the output is advanced by
/// (L-1)/2 samples; asymmetric taps are never advanced.
pub fn fir_filter(
    sig: &ComplexBasebandSignal,
    taps: &[C64],
    compensate_delay: bool,
) -> Result<ComplexBasebandSignal> {
    if taps.is_empty() {
        return Err(DpdError::Shape("filter has no taps".into()));
    }
    let advance = if compensate_delay && is_symmetric(taps) {
        (taps.len() - 1) / 2
    } else {
        0
    };
    sig.with_samples(convolve_window(sig.samples(), taps, advance, sig.len()))
}

/// [`fir_filter`] with real taps.
pub fn fir_filter_real(
    sig: &ComplexBasebandSignal,
    taps: &[f64],
    compensate_delay: bool,
) -> Result<ComplexBasebandSignal> {
    let taps: Vec<C64> = taps.iter().map(|&t| C64::new(t, 0.0)).collect();
    fir_filter(sig, &taps, compensate_delay)
}

/// Samples `advance .. advance + len` of the full linear convolution x * h.
pub(crate) fn convolve_window(x: &[C64], h: &[C64], advance: usize, len: usize) -> Vec<C64> {
    if h.len() <= 48 || x.len() <= 4 * h.len() {
        return convolve_direct(x, h, advance, len);
    }
    let full = convolve_fft(x, h);
    (advance..advance + len)
        .map(|i| full.get(i).copied().unwrap_or_default())
        .collect()
}

fn convolve_direct(x: &[C64], h: &[C64], advance: usize, len: usize) -> Vec<C64> {
    (advance..advance + len)
        .map(|n| {
            let k_lo = n.saturating_sub(x.len().saturating_sub(1));
            let k_hi = n.min(h.len() - 1);
            let mut acc = C64::new(0.0, 0.0);
            if k_lo <= k_hi {
                for k in k_lo..=k_hi {
                    acc += h[k] * x[n - k];
                }
            }
            acc
        })
        .collect()
}

/// Full linear convolution by overlap-add.
fn convolve_fft(x: &[C64], h: &[C64]) -> Vec<C64> {
    let l = h.len();
    let nfft = (4 * l).next_power_of_two();
    let step = nfft - l + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let mut hf = vec![C64::new(0.0, 0.0); nfft];
    hf[..l].copy_from_slice(h);
    fwd.process(&mut hf);
    let scale = 1.0 / nfft as f64;
    let mut out = vec![C64::new(0.0, 0.0); x.len() + l - 1];
    let mut buf = vec![C64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start < x.len() {
        let end = (start + step).min(x.len());
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        buf[..end - start].copy_from_slice(&x[start..end]);
        fwd.process(&mut buf);
        buf.iter_mut().zip(&hf).for_each(|(a, b)| *a *= b * scale);
        inv.process(&mut buf);
        let n_out = (end - start + l - 1).min(out.len() - start);
        for i in 0..n_out {
            out[start + i] += buf[i];
        }
        start = end;
    }
    out
}

/// Result of [`align`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// obs(n) ~ gain * ref(n - lag)
    pub lag: i64,
    pub phase_gain: C64,
    pub peak_correlation: f64,
    /// obs advanced by `lag` and divided by `phase_gain`, same length as ref.
    pub aligned_obs: ComplexBasebandSignal,
}

pub const MIN_ALIGN_OVERLAP: usize = 1000;

/// Integer-lag and complex-gain alignment of `obs` onto `reference`.
pub fn align(
    reference: &ComplexBasebandSignal,
    obs: &ComplexBasebandSignal,
    max_lag: usize,
) -> Result<Alignment> {
    if reference.sample_rate_hz() != obs.sample_rate_hz() {
        return Err(DpdError::Rate(
            "alignment requires equal sample rates".into(),
        ));
    }
    let r = reference.samples();
    let o = obs.samples();
    let max_lag = max_lag as i64;
    let mut best: Option<(i64, f64, C64)> = None;
    for lag in -max_lag..=max_lag {
        // pairs (n, n + lag) with both in range
        let n_lo = 0.max(-lag) as usize;
        let n_hi = (r.len() as i64).min(o.len() as i64 - lag);
        if n_hi <= n_lo as i64 || ((n_hi - n_lo as i64) as usize) < MIN_ALIGN_OVERLAP {
            continue;
        }
        let n_hi = n_hi as usize;
        let mut c = C64::new(0.0, 0.0);
        let mut er = 0.0;
        let mut eo = 0.0;
        for n in n_lo..n_hi {
            let ov = o[(n as i64 + lag) as usize];
            c += ov * r[n].conj();
            er += r[n].norm_sqr();
            eo += ov.norm_sqr();
        }
        let rho = if er > 0.0 && eo > 0.0 {
            c.norm() / (er * eo).sqrt()
        } else {
            0.0
        };
        let gain = if er > 0.0 { c / er } else { C64::new(0.0, 0.0) };
        if best.is_none_or(|(_, b, _)| rho > b) {
            best = Some((lag, rho, gain));
        }
    }
    let (lag, rho, gain) = best.ok_or_else(|| {
        DpdError::Align(format!(
            "no lag within +/-{max_lag} leaves {MIN_ALIGN_OVERLAP} overlapping samples"
        ))
    })?;
    if rho < 0.1 {
        return Err(DpdError::Align(format!(
            "peak normalized correlation {rho:.3} is below 0.1"
        )));
    }
    let inv = C64::new(1.0, 0.0) / gain;
    let aligned: Vec<C64> = (0..r.len() as i64)
        .map(|n| {
            let i = n + lag;
            if i >= 0 && (i as usize) < o.len() {
                o[i as usize] * inv
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(Alignment {
        lag,
        phase_gain: gain,
        peak_correlation: rho,
        aligned_obs: reference.with_samples(aligned)?,
    })
}
