//! Narrowband feedback receiver that isolates one IM sub-band of the PA output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::SubBandId;
use crate::error::{DpdError, Result};
use crate::pa::{sub_band_lowpass, SubBandFilter};
use crate::signals::{unit_tone, ComplexBasebandSignal, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    pub sub_band: SubBandId,
    /// Two-sided width of the observed band around the sub-band center.
    pub obs_bandwidth_hz: f64,
    pub decimation: usize,
    pub stopband_atten_db: f64,
    /// Power of additive white complex Gaussian noise; zero disables it.
    pub noise_power: f64,
    pub noise_seed: u64,
}

impl ObserverConfig {
    /// Observation bandwidth Q times the wider carrier bandwidth.
    pub fn for_order(sub_band: SubBandId, q: u32, cc_bandwidth_hz: f64) -> Self {
        Self {
            sub_band,
            obs_bandwidth_hz: q as f64 * cc_bandwidth_hz,
            decimation: 1,
            stopband_atten_db: 80.0,
            noise_power: 0.0,
            noise_seed: 0,
        }
    }
}

/// Observer with its lowpass designed for one composite rate.
#[derive(Debug, Clone)]
pub struct Observer {
    cfg: ObserverConfig,
    filter: SubBandFilter,
    taps: Vec<C64>,
    w: f64,
    rate_hz: f64,
}

impl Observer {
    pub fn new(cfg: ObserverConfig, f_if_hz: f64, f_s: f64) -> Result<Self> {
        if cfg.decimation == 0 {
            return Err(DpdError::InvalidInput(
                "decimation must be at least 1".into(),
            ));
        }
        let center = cfg.sub_band.center_hz(f_if_hz).abs();
        if center >= f_s / 2.0 {
            return Err(DpdError::Rate(format!(
                "sub-band {} at {center} Hz is beyond Nyquist for {f_s} Hz",
                cfg.sub_band
            )));
        }
        if f_s / (cfg.decimation as f64) < 2.0 * cfg.obs_bandwidth_hz {
            return Err(DpdError::Rate(format!(
                "decimated rate {} Hz is below twice the observation bandwidth",
                f_s / cfg.decimation as f64
            )));
        }
        // order 1 with B = obs bandwidth gives a passband of half the observed width
        let filter = sub_band_lowpass(
            1,
            cfg.sub_band.harmonic(),
            cfg.obs_bandwidth_hz,
            f_if_hz,
            f_s,
            cfg.stopband_atten_db,
        )?;
        let taps = filter.taps.iter().map(|&t| C64::new(t, 0.0)).collect();
        Ok(Self {
            w: -(cfg.sub_band.harmonic() as f64) * f_if_hz / f_s,
            cfg,
            filter,
            taps,
            rate_hz: f_s,
        })
    }

    pub fn config(&self) -> &ObserverConfig {
        &self.cfg
    }

    pub fn filter(&self) -> &SubBandFilter {
        &self.filter
    }

    /// Samples on each side of an output that the lowpass reaches.
    pub fn half_len(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn output_rate_hz(&self) -> f64 {
        self.rate_hz / self.cfg.decimation as f64
    }

    /// Full-rate observation e(n) for n in `start .. start + len` (global
    /// indices), from `y` whose first sample has global index `y_start`.
    /// Samples of `y` outside the slice count as zero. No noise, no decimation.
    pub(crate) fn observe_range(
        &self,
        y: &[C64],
        y_start: i64,
        start: i64,
        len: usize,
    ) -> Vec<C64> {
        if len == 0 {
            return Vec::new();
        }
        let g = self.half_len() as i64;
        let l = self.taps.len();
        // e(n) = sum_k h(k) v(n + g - k), v(t) = y(t) e^{-j w t}
        let t0 = start + g - l as i64 + 1;
        let v: Vec<C64> = (t0..start + len as i64 + g)
            .map(
                |t| match usize::try_from(t - y_start).ok().and_then(|i| y.get(i)) {
                    Some(&s) => s * unit_tone(self.w, t),
                    None => C64::new(0.0, 0.0),
                },
            )
            .collect();
        crate::signals::convolve_window(&v, &self.taps, l - 1, len)
    }
}

/// Mixes the sub-band to DC, lowpasses with delay compensation, decimates
/// and optionally adds observation noise. Output is at the decimated rate.
pub fn observe_sub_band(
    pa_out: &ComplexBasebandSignal,
    cfg: &ObserverConfig,
    f_if_hz: f64,
) -> Result<ComplexBasebandSignal> {
    let obs = Observer::new(cfg.clone(), f_if_hz, pa_out.sample_rate_hz())?;
    observe_with(&obs, pa_out)
}

pub fn observe_with(
    obs: &Observer,
    pa_out: &ComplexBasebandSignal,
) -> Result<ComplexBasebandSignal> {
    if pa_out.sample_rate_hz() != obs.rate_hz {
        return Err(DpdError::Rate(
            "observer was designed for another sample rate".into(),
        ));
    }
    let mixed = crate::signals::mix_at(pa_out.samples(), obs.w, 0);
    let full = crate::signals::convolve_window(&mixed, &obs.taps, obs.half_len(), mixed.len());
    let mut out: Vec<C64> = full.into_iter().step_by(obs.cfg.decimation).collect();
    add_noise(
        &mut out,
        obs.cfg.noise_power,
        &mut ChaCha8Rng::seed_from_u64(obs.cfg.noise_seed),
    );
    ComplexBasebandSignal::new(out, obs.output_rate_hz())
}

pub(crate) fn add_noise(x: &mut [C64], power: f64, rng: &mut ChaCha8Rng) {
    if power <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, (power / 2.0).sqrt()).expect("finite noise power");
    for v in x.iter_mut() {
        *v += C64::new(normal.sample(rng), normal.sample(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpd::compose_pa_input;
    use crate::signals::{design_lowpass, fir_filter_real, mean_power};
    use proptest::prelude::*;
    use rand::Rng;

    const FS: f64 = 100e6;
    const F_IF: f64 = 5e6;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg(sb: &str) -> ObserverConfig {
        ObserverConfig::for_order(sb.parse().unwrap(), 3, 1e6)
    }

    fn tone(f: f64, amp: C64, n: usize) -> ComplexBasebandSignal {
        ComplexBasebandSignal::new(
            (0..n).map(|i| amp * unit_tone(f / FS, i as i64)).collect(),
            FS,
        )
        .unwrap()
    }

    fn bandlimited(n: usize, seed: u64, bw: f64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<C64> = (0..n)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let h = design_lowpass(bw, 100.0, bw * 0.2, FS).unwrap();
        fir_filter_real(&ComplexBasebandSignal::new(raw, FS).unwrap(), &h, true)
            .unwrap()
            .into_samples()
    }

    #[test]
    fn tone_at_center_becomes_constant() {
        let a = c(0.3, -0.4);
        let y = observe_sub_band(&tone(3.0 * F_IF, a, 4000), &cfg("3+"), F_IF).unwrap();
        let obs = Observer::new(cfg("3+"), F_IF, FS).unwrap();
        let g = obs.half_len();
        for v in &y.samples()[g..4000 - g] {
            assert!((v - a).norm() < 1e-6);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let y = observe_sub_band(
            &ComplexBasebandSignal::zeros(500, FS).unwrap(),
            &cfg("5-"),
            F_IF,
        )
        .unwrap();
        assert!(y.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn neighbour_sub_band_is_rejected() {
        let y = observe_sub_band(&tone(5.0 * F_IF, c(1.0, 0.0), 6000), &cfg("3+"), F_IF).unwrap();
        let obs = Observer::new(cfg("3+"), F_IF, FS).unwrap();
        let g = obs.half_len();
        let p = mean_power(&y.samples()[g..6000 - g]);
        assert!(10.0 * p.log10() <= -80.0);
    }

    #[test]
    fn rate_errors() {
        let far = ObserverConfig::for_order(SubBandId::plus(11).unwrap(), 11, 1e6);
        assert!(matches!(
            Observer::new(far, F_IF, FS),
            Err(DpdError::Rate(_))
        ));
        let mut dec = cfg("3+");
        dec.decimation = 40;
        assert!(matches!(
            Observer::new(dec, F_IF, FS),
            Err(DpdError::Rate(_))
        ));
    }

    #[test]
    fn round_trip_through_compose() {
        let n = 8000;
        let g = bandlimited(n, 3, 1.0e6);
        let sb: SubBandId = "3-".parse().unwrap();
        let inj = ComplexBasebandSignal::new(g.clone(), FS).unwrap();
        let composite = compose_pa_input(
            &ComplexBasebandSignal::zeros(n, FS).unwrap(),
            &[(sb, inj)],
            F_IF,
        )
        .unwrap();
        let y = observe_sub_band(&composite, &cfg("3-"), F_IF).unwrap();
        let m = 400;
        let err: f64 = (m..n - m).map(|i| (y.samples()[i] - g[i]).norm_sqr()).sum();
        let pow: f64 = (m..n - m).map(|i| g[i].norm_sqr()).sum();
        assert!(10.0 * (err / pow).log10() <= -60.0);
    }

    #[test]
    fn decimated_path_keeps_every_dth_sample() {
        let g = bandlimited(4000, 5, 1.0e6);
        let sig = ComplexBasebandSignal::new(g, FS).unwrap();
        let full = observe_sub_band(&sig, &cfg("3+"), F_IF).unwrap();
        let mut d = cfg("3+");
        d.decimation = 4;
        let dec = observe_sub_band(&sig, &d, F_IF).unwrap();
        assert_eq!(dec.sample_rate_hz(), FS / 4.0);
        for (i, v) in dec.samples().iter().enumerate() {
            assert_eq!(*v, full.samples()[4 * i]);
        }
    }

    #[test]
    fn range_matches_whole_signal_path() {
        let y = bandlimited(3000, 7, 20e6);
        let obs = Observer::new(cfg("3+"), F_IF, FS).unwrap();
        let whole =
            observe_with(&obs, &ComplexBasebandSignal::new(y.clone(), FS).unwrap()).unwrap();
        let part = obs.observe_range(&y, 0, 1000, 500);
        for (a, b) in part.iter().zip(&whole.samples()[1000..1500]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_knob_adds_requested_power() {
        let mut c3 = cfg("3+");
        c3.noise_power = 1e-4;
        c3.noise_seed = 9;
        let y = observe_sub_band(
            &ComplexBasebandSignal::zeros(200_000, FS).unwrap(),
            &c3,
            F_IF,
        )
        .unwrap();
        let p = mean_power(y.samples());
        assert!((p / 1e-4 - 1.0).abs() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn observer_is_linear(seed in 0u64..1000, k in -2.0f64..2.0) {
            let a = bandlimited(1500, seed, 30e6);
            let b = bandlimited(1500, seed + 1, 30e6);
            let sum: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x + y * k).collect();
            let run = |v: Vec<C64>| observe_sub_band(&ComplexBasebandSignal::new(v, FS).unwrap(), &cfg("3+"), F_IF).unwrap();
            let (ya, yb, ys) = (run(a), run(b), run(sum));
            let scale = ys.samples().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            for i in 0..1500 {
                let want = ya.samples()[i] + yb.samples()[i] * k;
                prop_assert!((ys.samples()[i] - want).norm() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
