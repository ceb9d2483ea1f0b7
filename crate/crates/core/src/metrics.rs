//! Spectral and constellation metrics and the running-complexity model.

use std::fmt::Write as _;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::SubBandId;
use crate::error::{DpdError, Result};
use crate::signals::{mix_at, ComplexBasebandSignal, SymbolStream, C64};

pub const DEFAULT_SEGMENT_LEN: usize = 4096;
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Welch estimate, two-sided and centered on DC.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies_hz: Vec<f64>,
    /// Power per Hz; the sum of density times bin width is the mean power.
    pub density: Vec<f64>,
    pub segment_len: usize,
    pub overlap: f64,
    pub segments: usize,
    pub sample_rate_hz: f64,
}

impl PsdEstimate {
    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_len as f64
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width_hz()
    }

    /// Power of the bins whose centers fall in [lo, hi].
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> Result<f64> {
        let nyq = self.sample_rate_hz / 2.0;
        if !(lo_hz < hi_hz) || lo_hz < -nyq || hi_hz > nyq {
            return Err(DpdError::Band(format!(
                "band [{lo_hz}, {hi_hz}] Hz is empty or outside +/-{nyq} Hz"
            )));
        }
        let p: f64 = self
            .frequencies_hz
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
            .map(|(_, d)| d)
            .sum();
        Ok(p * self.bin_width_hz())
    }

    /// Delimited table with `#` metadata lines.
    pub fn to_csv(&self, extra_meta: &[(&str, String)]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sample_rate_hz={}", self.sample_rate_hz);
        let _ = writeln!(
            s,
            "# window=hann segment_len={} overlap={} segments={}",
            self.segment_len, self.overlap, self.segments
        );
        let _ = writeln!(
            s,
            "# normalization=two-sided density, sum(density*bin_width)=mean power"
        );
        for (k, v) in extra_meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("frequency_hz,density_db_per_hz\n");
        for (f, d) in self.frequencies_hz.iter().zip(&self.density) {
            let _ = writeln!(s, "{f:.3},{:.4}", 10.0 * d.max(1e-300).log10());
        }
        s
    }
}

/// Averaged Hann-windowed periodogram.
pub fn psd(sig: &ComplexBasebandSignal, segment_len: usize, overlap: f64) -> Result<PsdEstimate> {
    let x = sig.samples();
    if segment_len < 2 || segment_len > x.len() {
        return Err(DpdError::Shape(format!(
            "segment length {segment_len} must lie in 2..={}",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(DpdError::Shape("overlap must lie in [0, 1)".into()));
    }
    let n = segment_len;
    let hop = ((n as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut segments = 0;
    let mut start = 0;
    while start + n <= x.len() {
        for i in 0..n {
            buf[i] = x[start + i] * window[i];
        }
        fft.process(&mut buf);
        acc.iter_mut()
            .zip(&buf)
            .for_each(|(a, b)| *a += b.norm_sqr());
        segments += 1;
        start += hop;
    }
    let fs = sig.sample_rate_hz();
    let scale = 1.0 / (segments as f64 * fs * wpow);
    let half = n / 2;
    let mut freqs = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for k in 0..n {
        // fftshift: bin (k + half) mod n sits at frequency (k - half) fs / n
        let src = (k + half) % n;
        freqs.push((k as f64 - half as f64) * fs / n as f64);
        density.push(acc[src] * scale);
    }
    Ok(PsdEstimate {
        frequencies_hz: freqs,
        density,
        segment_len: n,
        overlap,
        segments,
        sample_rate_hz: fs,
    })
}

pub fn psd_default(sig: &ComplexBasebandSignal) -> Result<PsdEstimate> {
    psd(sig, DEFAULT_SEGMENT_LEN.min(sig.len()), DEFAULT_OVERLAP)
}

/// Per-carrier and IM-band powers behind an IMR figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImrReading {
    pub dbc: f64,
    pub wanted_power: f64,
    pub im_power: f64,
}

/// IMR in dBc: stronger carrier band power over the IM sub-band power.
pub fn imr_from_psd(
    p: &PsdEstimate,
    sub_band: SubBandId,
    f_if_hz: f64,
    cc_band_hz: f64,
    im_band_hz: f64,
) -> Result<ImrReading> {
    let c1 = p.band_power(f_if_hz - cc_band_hz / 2.0, f_if_hz + cc_band_hz / 2.0)?;
    let c2 = p.band_power(-f_if_hz - cc_band_hz / 2.0, -f_if_hz + cc_band_hz / 2.0)?;
    let center = sub_band.center_hz(f_if_hz);
    let im = p.band_power(center - im_band_hz / 2.0, center + im_band_hz / 2.0)?;
    let wanted = c1.max(c2);
    if im <= 0.0 {
        return Err(DpdError::ZeroDivide("IM band carries no power".into()));
    }
    Ok(ImrReading {
        dbc: 10.0 * (wanted / im).log10(),
        wanted_power: wanted,
        im_power: im,
    })
}

/// [`imr_from_psd`] with the default PSD settings.
pub fn imr(
    pa_out: &ComplexBasebandSignal,
    sub_band: SubBandId,
    f_if_hz: f64,
    cc_band_hz: f64,
    im_band_hz: f64,
) -> Result<f64> {
    Ok(imr_from_psd(
        &psd_default(pa_out)?,
        sub_band,
        f_if_hz,
        cc_band_hz,
        im_band_hz,
    )?
    .dbc)
}

/// Which carrier an EVM measurement selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Carrier {
    /// Carrier at +f_IF.
    Upper,
    /// Carrier at -f_IF.
    Lower,
}

impl Carrier {
    pub fn index(self) -> usize {
        match self {
            Carrier::Upper => 0,
            Carrier::Lower => 1,
        }
    }
}

/// EVM in percent after downconversion, channel filtering, symbol
/// sampling, lag search and a single complex least-squares gain.
pub fn evm(
    reference: &SymbolStream,
    measured: &ComplexBasebandSignal,
    carrier: Carrier,
    f_if_hz: f64,
) -> Result<f64> {
    let fs = measured.sample_rate_hz();
    let sps = reference.samples_per_symbol;
    if measured.len() / sps < 100 || reference.symbols.len() < 100 {
        return Err(DpdError::Align("EVM needs at least 100 symbols".into()));
    }
    let shift = match carrier {
        Carrier::Upper => -f_if_hz,
        Carrier::Lower => f_if_hz,
    };
    let mut bb = mix_at(measured.samples(), shift / fs, 0);
    let nsym = reference.symbols.len();
    let guard = (reference.pulse.span_symbols).min(nsym / 10);
    // fade the record ends so the circular filter sees no jump
    let ramp = (guard * sps / 2).min(bb.len() / 4);
    let len = bb.len();
    for i in 0..ramp {
        let w = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos();
        bb[i] *= w;
        bb[len - 1 - i] *= w;
    }
    // channel filter: flat over the occupied band and the window's skirt
    let rate = reference.symbol_rate_hz;
    let pass = rate * (1.0 + reference.pulse.rolloff) / 2.0 + 0.1 * rate;
    let stop = (pass + 0.5 * rate).min(f_if_hz);
    let rx = channel_filter(&bb, pass.min(stop) / fs, stop / fs);
    let max_off = (8 * sps) as i64;
    let mut best: Option<(f64, C64, i64)> = None;
    for off in -max_off..=max_off {
        let mut c = C64::new(0.0, 0.0);
        let mut rr = 0.0;
        let mut ss = 0.0;
        let mut count = 0;
        for k in guard..nsym - guard {
            let i = (k * sps) as i64 + off;
            if i < 0 || i as usize >= rx.len() {
                continue;
            }
            let r = rx[i as usize];
            let s = reference.symbols[k];
            c += s * r.conj();
            rr += r.norm_sqr();
            ss += s.norm_sqr();
            count += 1;
        }
        if count < 100 || rr == 0.0 {
            continue;
        }
        let rho = c.norm() / (rr * ss).sqrt();
        if best.is_none_or(|(b, _, _)| rho > b) {
            best = Some((rho, c / rr, off));
        }
    }
    let (rho, gain, off) =
        best.ok_or_else(|| DpdError::Align("no symbol alignment found".into()))?;
    if rho < 0.1 {
        return Err(DpdError::Align(format!(
            "symbol correlation {rho:.3} is below 0.1"
        )));
    }
    let mut err = 0.0;
    let mut refp = 0.0;
    for k in guard..nsym - guard {
        let i = (k * sps) as i64 + off;
        if i < 0 || i as usize >= rx.len() {
            continue;
        }
        let s = reference.symbols[k];
        err += (gain * rx[i as usize] - s).norm_sqr();
        refp += s.norm_sqr();
    }
    Ok(100.0 * (err / refp).sqrt())
}

/// Zero-phase FFT filter with a raised-cosine taper from `pass` to `stop`
/// (cycles/sample).
fn channel_filter(x: &[C64], pass: f64, stop: f64) -> Vec<C64> {
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = x.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        } / n as f64;
        let a = f.abs();
        if a >= stop {
            *v = C64::new(0.0, 0.0);
        } else if a > pass {
            *v *= 0.5 + 0.5 * (std::f64::consts::PI * (a - pass) / (stop - pass)).cos();
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter_mut().for_each(|v| *v /= n as f64);
    buf
}

/// Band power referenced to an absolute total, minus a scalar attenuation.
pub fn integrated_power(
    p: &PsdEstimate,
    lo_hz: f64,
    hi_hz: f64,
    ref_dbm_total: f64,
    extra_atten_db: f64,
) -> Result<f64> {
    let band = p.band_power(lo_hz, hi_hz)?;
    let total = p.total_power();
    if total <= 0.0 {
        return Err(DpdError::ZeroDivide("spectrum has no power".into()));
    }
    Ok(10.0 * (band / total).log10() + ref_dbm_total - extra_atten_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopsKind {
    /// Sub-band DPD at IM order m (3, 5, 7 or 9).
    SubBand(u32),
    FullBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub basis_flops: u64,
    pub filtering_flops: u64,
    pub total_flops: u64,
    pub rate_hz: f64,
    pub gflops: f64,
}

/// Running complexity of ninth-order processing with memory depth N.
pub fn flops_model(kind: FlopsKind, q: u32, memory: u64, rate_hz: f64) -> Result<ComplexityReport> {
    if q != 9 {
        return Err(DpdError::UnsupportedOrder(q));
    }
    let (basis, per_tap) = match kind {
        FlopsKind::SubBand(3) => (37, 32),
        FlopsKind::SubBand(5) => (40, 24),
        FlopsKind::SubBand(7) => (45, 16),
        FlopsKind::SubBand(9) => (48, 8),
        FlopsKind::SubBand(m) => {
            return Err(DpdError::Order(format!(
                "no complexity figures for sub-band order {m}"
            )))
        }
        FlopsKind::FullBand => (11, 40),
    };
    let filtering = per_tap * (memory + 1) - 2;
    let total = basis + filtering;
    Ok(ComplexityReport {
        basis_flops: basis,
        filtering_flops: filtering,
        total_flops: total,
        rate_hz,
        gflops: total as f64 * rate_hz / 1e9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{generate_dual_carrier, DualCarrierSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gaussian(n: usize, power: f64, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, (power / 2.0).sqrt()).unwrap();
        (0..n)
            .map(|_| c(nd.sample(&mut rng), nd.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn white_noise_is_flat() {
        let fs = 10e6;
        let s = ComplexBasebandSignal::new(gaussian(1_000_000, 1.0, 1), fs).unwrap();
        let p = psd_default(&s).unwrap();
        let expect = 1.0 / fs;
        for d in &p.density {
            assert!((10.0 * (d / expect).log10()).abs() < 1.0);
        }
        assert!((p.total_power() - s.mean_power()).abs() / s.mean_power() < 0.01);
    }

    #[test]
    fn tone_power_by_band_integration() {
        let fs = 10e6;
        let f = 1.234e6;
        let x: Vec<C64> = (0..100_000)
            .map(|n| C64::from_polar(0.5, 2.0 * std::f64::consts::PI * f * n as f64 / fs))
            .collect();
        let p = psd_default(&ComplexBasebandSignal::new(x, fs).unwrap()).unwrap();
        let band = p.band_power(f - 20e3, f + 20e3).unwrap();
        assert!((10.0 * (band / 0.25).log10()).abs() < 0.1);
    }

    #[test]
    fn zero_signal_zero_density() {
        let p = psd_default(&ComplexBasebandSignal::zeros(10_000, 1e6).unwrap()).unwrap();
        assert!(p.density.iter().all(|d| *d == 0.0));
        assert!(psd(&ComplexBasebandSignal::zeros(100, 1e6).unwrap(), 4096, 0.5).is_err());
    }

    fn two_band_signal(p_wanted: f64, p_im: f64) -> ComplexBasebandSignal {
        let fs = 40e6;
        let n = 200_000;
        let w =
            |f: f64, i: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * i as f64 / fs);
        let x: Vec<C64> = (0..n)
            .map(|i| w(5e6, i) * p_wanted.sqrt() + w(15e6, i) * p_im.sqrt())
            .collect();
        ComplexBasebandSignal::new(x, fs).unwrap()
    }

    #[test]
    fn imr_ratio_definition() {
        let sb = SubBandId::plus(3).unwrap();
        let r = imr(&two_band_signal(1.0, 1e-3), sb, 5e6, 1e6, 3e6).unwrap();
        assert!((r - 30.0).abs() < 0.1);
        let r = imr(&two_band_signal(1.0, 1.0), sb, 5e6, 1e6, 3e6).unwrap();
        assert!(r.abs() < 0.1);
        let scaled = ComplexBasebandSignal::new(
            two_band_signal(1.0, 1e-3)
                .samples()
                .iter()
                .map(|v| v * 7.0)
                .collect(),
            40e6,
        )
        .unwrap();
        assert!((imr(&scaled, sb, 5e6, 1e6, 3e6).unwrap() - 30.0).abs() < 0.1);
        assert!(matches!(
            imr(
                &two_band_signal(1.0, 1.0),
                SubBandId::plus(9).unwrap(),
                5e6,
                1e6,
                3e6
            ),
            Err(DpdError::Band(_))
        ));
    }

    fn carriers() -> crate::signals::DualCarrierWaveform {
        let spec = DualCarrierSpec {
            carrier_spacing_hz: 10e6,
            ..DualCarrierSpec::default()
        };
        generate_dual_carrier(&spec, 300_000, 3).unwrap()
    }

    #[test]
    fn evm_of_ideal_signal_is_zero() {
        let wf = carriers();
        let e = evm(&wf.symbols[0], &wf.composite, Carrier::Upper, wf.f_if_hz).unwrap();
        assert!(e < 1e-6, "{e}");
        let e = evm(&wf.symbols[1], &wf.composite, Carrier::Lower, wf.f_if_hz).unwrap();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn evm_ignores_gain_and_delay() {
        let wf = carriers();
        let g = c(2.0, -1.0);
        let mut shifted = vec![c(0.0, 0.0); 13];
        shifted.extend(wf.composite.samples().iter().map(|v| v * g));
        shifted.truncate(wf.len());
        let e = evm(
            &wf.symbols[0],
            &ComplexBasebandSignal::new(shifted, wf.sample_rate_hz()).unwrap(),
            Carrier::Upper,
            wf.f_if_hz,
        )
        .unwrap();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn evm_of_known_error() {
        let wf = carriers();
        // white error at -40 dB relative to the carrier, restricted to the
        // carrier's channel so the channel filter keeps all of it
        let noise = gaussian(wf.len(), 1.0, 9);
        let sps = wf.symbols[0].samples_per_symbol;
        let edge = 0.5 / sps as f64;
        let nb = channel_filter(&noise, edge, edge);
        let p = crate::signals::mean_power(&nb);
        let scale = (1e-4 * wf.cc1.mean_power() / p).sqrt();
        let w = wf.f_if_hz / wf.sample_rate_hz();
        let err = mix_at(&nb, w, 0);
        let meas: Vec<C64> = wf
            .composite
            .samples()
            .iter()
            .zip(&err)
            .map(|(a, b)| a + b * scale)
            .collect();
        let e = evm(
            &wf.symbols[0],
            &ComplexBasebandSignal::new(meas, wf.sample_rate_hz()).unwrap(),
            Carrier::Upper,
            wf.f_if_hz,
        )
        .unwrap();
        assert!((e - 1.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn integrated_power_examples() {
        let s = two_band_signal(1.0, 1e-3);
        let p = psd_default(&s).unwrap();
        let whole = integrated_power(&p, -20e6, 20e6, 25.0, 0.0).unwrap();
        assert!((whole - 25.0).abs() < 1e-9);
        let a = integrated_power(&p, 14e6, 16e6, 25.0, 0.0).unwrap();
        let b = integrated_power(&p, 14e6, 16e6, 25.0, 65.0).unwrap();
        assert_eq!(a - b, 65.0);
        // spur at -48 dBc of +25 dBm with 65 dB attenuation
        let s = two_band_signal(1.0, 10f64.powf(-4.8));
        let p = psd_default(&s).unwrap();
        let spur = integrated_power(&p, 14e6, 16e6, 25.0, 65.0).unwrap();
        assert!((spur + 88.0).abs() < 0.1, "{spur}");
    }

    #[test]
    fn complexity_table() {
        let cases = [(3, 0.891), (5, 0.774), (7, 0.675), (9, 0.558)];
        for (m, g) in cases {
            let r = flops_model(FlopsKind::SubBand(m), 9, 1, 9e6).unwrap();
            assert_eq!(r.gflops, g);
        }
        let r = flops_model(FlopsKind::SubBand(3), 9, 1, 9e6).unwrap();
        assert_eq!(
            (r.basis_flops, r.filtering_flops, r.total_flops),
            (37, 62, 99)
        );
        let f = flops_model(FlopsKind::FullBand, 9, 3, 189e6).unwrap();
        assert_eq!(f.total_flops, 169);
        assert_eq!(f.gflops, 31.941);
        assert!(matches!(
            flops_model(FlopsKind::FullBand, 7, 3, 1e6),
            Err(DpdError::UnsupportedOrder(7))
        ));
    }

    #[test]
    fn csv_has_metadata_header() {
        let p = psd(
            &ComplexBasebandSignal::new(gaussian(8192, 1.0, 2), 1e6).unwrap(),
            1024,
            0.5,
        )
        .unwrap();
        let csv = p.to_csv(&[("ref_dbm", "23".into())]);
        assert!(csv.starts_with("# sample_rate_hz=1000000"));
        assert!(csv.contains("# ref_dbm=23"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1025);
    }
}
