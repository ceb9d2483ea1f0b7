//! Coefficient learning: sample- and block-adaptive decorrelation, the
//! closed-form reference solutions and the closed-loop simulation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{apply_transform, gen_basis, orthogonalize, OrthoTransform, SubBandId};
use crate::dpd::{compose_at, injection_range, DpdCoefficients, SubBandDpd};
use crate::error::{DpdError, Result};
use crate::observe::{add_noise, Observer, ObserverConfig};
use crate::pa::PowerAmplifier;
use crate::signals::{
    align, generate_dual_carrier, ComplexBasebandSignal, DualCarrierSpec, DualCarrierWaveform, C64,
    MIN_ALIGN_OVERLAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningMode {
    /// One update per sample (M = L = 1).
    Sample,
    #[default]
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub mu: f64,
    /// NLMS regularizer C. `None` picks 1e-8 times the mean regressor
    /// energy of the first block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<f64>,
    /// Samples per block, M.
    pub block_size: usize,
    /// Samples between block starts, L >= M.
    pub update_interval: usize,
    pub max_updates: usize,
    /// Times the whole target sequence is learned; later passes refine
    /// each sub-band with all others active.
    pub passes: usize,
    pub mode: LearningMode,
    /// Extra feedback-path delay in samples, recovered by alignment.
    pub latency: usize,
    pub max_lag: usize,
    /// Samples used to estimate the orthonormalizing transform.
    pub ortho_training_samples: usize,
    pub observer_atten_db: f64,
    pub observer_noise_power: f64,
    /// Divergence threshold: running-mean residual over the mean of the
    /// first blocks a sub-band was ever learned on, both taken over about
    /// 10000 samples.
    pub divergence_db: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            regularizer: None,
            block_size: 1000,
            update_interval: 1000,
            max_updates: 200,
            passes: 1,
            mode: LearningMode::Block,
            latency: 0,
            max_lag: 16,
            ortho_training_samples: 100_000,
            observer_atten_db: 80.0,
            observer_noise_power: 0.0,
            divergence_db: 20.0,
        }
    }
}

impl LearningConfig {
    /// Effective (M, L): sample mode is the M = L = 1 special case.
    pub fn block_geometry(&self) -> (usize, usize) {
        match self.mode {
            LearningMode::Sample => (1, 1),
            LearningMode::Block => (self.block_size, self.update_interval),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(DpdError::config("learning.mu", "must be finite and >= 0"));
        }
        if let Some(c) = self.regularizer {
            if !(c > 0.0 && c.is_finite()) {
                return Err(DpdError::config(
                    "learning.regularizer",
                    "must be finite and > 0",
                ));
            }
        }
        if self.mode == LearningMode::Block {
            if self.block_size == 0 {
                return Err(DpdError::config(
                    "learning.block_size",
                    "must be at least 1",
                ));
            }
            if self.update_interval < self.block_size {
                return Err(DpdError::config(
                    "learning.update_interval",
                    "must be >= block_size",
                ));
            }
        }
        if self.passes == 0 {
            return Err(DpdError::config("learning.passes", "must be at least 1"));
        }
        if self.ortho_training_samples < 100 {
            return Err(DpdError::config(
                "learning.ortho_training_samples",
                "must be at least 100",
            ));
        }
        if !(self.observer_atten_db > 0.0) {
            return Err(DpdError::config(
                "learning.observer_atten_db",
                "must be positive",
            ));
        }
        if !(self.observer_noise_power >= 0.0) {
            return Err(DpdError::config(
                "learning.observer_noise_power",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

// ---- update rules ----

/// Shared arithmetic of both NLMS forms: accumulates ||S||_F^2 and S e^*
/// row by row, starting from the first row, then applies one step.
fn nlms_apply<'a>(
    alpha: &mut [C64],
    rows: impl Iterator<Item = (&'a [C64], C64)>,
    mu: f64,
    c: f64,
) -> Result<()> {
    let mut energy: Option<f64> = None;
    let mut corr: Option<Vec<C64>> = None;
    for (s, e) in rows {
        if s.len() != alpha.len() {
            return Err(DpdError::Shape(format!(
                "regressor row of width {} against {} coefficients",
                s.len(),
                alpha.len()
            )));
        }
        let ec = e.conj();
        let row_energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        energy = Some(energy.map_or(row_energy, |a| a + row_energy));
        match corr.as_mut() {
            None => corr = Some(s.iter().map(|v| v * ec).collect()),
            Some(acc) => acc.iter_mut().zip(s).for_each(|(a, v)| *a += v * ec),
        }
    }
    let (Some(energy), Some(corr)) = (energy, corr) else {
        return Err(DpdError::Shape("empty block".into()));
    };
    let step = mu / (energy + c);
    alpha
        .iter_mut()
        .zip(&corr)
        .for_each(|(a, g)| *a -= g * step);
    Ok(())
}

/// a' = a - mu / (||s||^2 + C) * s e^*.
pub fn sample_adaptive_step(alpha: &[C64], s: &[C64], e: C64, mu: f64, c: f64) -> Result<Vec<C64>> {
    let mut out = alpha.to_vec();
    nlms_apply(&mut out, std::iter::once((s, e)), mu, c)?;
    Ok(out)
}

/// a' = a - mu / (||S||_F^2 + C) * S e^*, with `rows[n]` the regressor at
/// block sample n.
pub fn block_adaptive_update(
    alpha: &[C64],
    rows: &[Vec<C64>],
    e: &[C64],
    mu: f64,
    c: f64,
) -> Result<Vec<C64>> {
    if rows.len() != e.len() {
        return Err(DpdError::Shape(format!(
            "{} rows against {} errors",
            rows.len(),
            e.len()
        )));
    }
    let mut out = alpha.to_vec();
    nlms_apply(
        &mut out,
        rows.iter().map(Vec::as_slice).zip(e.iter().copied()),
        mu,
        c,
    )?;
    Ok(out)
}

// ---- closed forms ----

fn nonzero(v: C64, what: &str) -> Result<C64> {
    if v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
        return Err(DpdError::ZeroDivide(what.into()));
    }
    Ok(v)
}

/// Third-order inverse: -f3 / f1.
pub fn alpha_third_inverse(f1: C64, f3: C64) -> Result<C64> {
    Ok(-f3 / nonzero(f1, "f1 is zero")?)
}

/// Products of independent envelope moments E|x1|^i E|x2|^j.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    values: BTreeMap<(u32, u32), f64>,
}

/// Every moment the closed forms use.
pub const STANDARD_MOMENTS: [(u32, u32); 12] = [
    (4, 2),
    (6, 2),
    (4, 4),
    (4, 6),
    (6, 4),
    (8, 2),
    (6, 0),
    (4, 0),
    (0, 4),
    (0, 2),
    (2, 0),
    (0, 6),
];

impl MomentSet {
    pub fn get(&self, i: u32, j: u32) -> Result<f64> {
        self.values
            .get(&(i, j))
            .copied()
            .ok_or_else(|| DpdError::InvalidInput(format!("moment E_{i}{j} was not estimated")))
    }

    pub fn from_values(values: impl IntoIterator<Item = ((u32, u32), f64)>) -> Result<Self> {
        let values: BTreeMap<_, _> = values.into_iter().collect();
        if values.values().any(|v| !(*v >= 0.0)) {
            return Err(DpdError::InvalidInput("moments must be nonnegative".into()));
        }
        if values.contains_key(&(0, 0)) {
            return Err(DpdError::InvalidInput("E_00 is not a moment".into()));
        }
        Ok(Self { values })
    }
}

/// E_ij = mean(|x1|^i) mean(|x2|^j).
pub fn estimate_moments(x1: &[C64], x2: &[C64], needed: &[(u32, u32)]) -> Result<MomentSet> {
    if x1.is_empty() || x2.is_empty() {
        return Err(DpdError::Shape("moment estimation needs samples".into()));
    }
    let abs_moment = |x: &[C64], k: u32| -> f64 {
        if k == 0 {
            return 1.0;
        }
        x.iter()
            .map(|v| v.norm_sqr().powf(k as f64 / 2.0))
            .sum::<f64>()
            / x.len() as f64
    };
    MomentSet::from_values(
        needed
            .iter()
            .map(|&(i, j)| ((i, j), abs_moment(x1, i) * abs_moment(x2, j))),
    )
}

/// MMSE coefficient of the third-order sub-band DPD on a third-order PA:
/// -(conj(f1) f3 E42 + 2|f3|^2 (E62 + E44)) / D with
/// D = |f1|^2 E42 + 4 Re(f1 conj(f3)) (E62 + E44) + 4 |f3|^2 (E46 + 2 E64 + E82).
pub fn alpha_mmse(f1: C64, f3: C64, m: &MomentSet) -> Result<C64> {
    let e42 = m.get(4, 2)?;
    let s1 = m.get(6, 2)? + m.get(4, 4)?;
    let s2 = m.get(4, 6)? + 2.0 * m.get(6, 4)? + m.get(8, 2)?;
    let num = f1 * f3.conj() * e42 + 2.0 * f3.norm_sqr() * s1;
    let den = f1.norm_sqr() * e42 + 4.0 * (f1 * f3.conj()).re * s1 + 4.0 * f3.norm_sqr() * s2;
    if den == 0.0 || !den.is_finite() {
        return Err(DpdError::ZeroDivide("MMSE denominator vanishes".into()));
    }
    Ok(-num.conj() / den)
}

/// Decorrelation solution: -f3 / (f1 + 2 f3 (E60/E40 + E04/E02)).
pub fn alpha_decorr_analytic(f1: C64, f3: C64, m: &MomentSet) -> Result<C64> {
    let e40 = m.get(4, 0)?;
    let e02 = m.get(0, 2)?;
    if e40 == 0.0 || e02 == 0.0 {
        return Err(DpdError::ZeroDivide("E40 or E02 is zero".into()));
    }
    let den = f1 + 2.0 * f3 * (m.get(6, 0)? / e40 + m.get(0, 4)? / e02);
    Ok(-f3 / nonzero(den, "decorrelation denominator vanishes")?)
}

/// Fifth-order inverse coefficients (a3, a51, a52) for the injection
/// a3 u + a51 |x1|^2 u + a52 |x2|^2 u with u = x2^* x1^2.
pub fn fifth_order_inverse(f1: C64, f3: C64, f5: C64) -> Result<(C64, C64, C64)> {
    let f1 = nonzero(f1, "f1 is zero")?;
    let r = f3 / f1;
    let base = 2.0 * r * r;
    Ok((-r, base - 2.0 * f5 / f1, base - 3.0 * f5 / f1))
}

// ---- closed loop ----

const DIVERGENCE_WINDOW: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningHistory {
    pub block_start: Vec<usize>,
    /// Observed residual power of each block before its update (dB).
    pub residual_db: Vec<f64>,
    /// Coefficients after each update.
    pub coefficients: Vec<Vec<C64>>,
}

impl LearningHistory {
    pub fn len(&self) -> usize {
        self.residual_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual_db.is_empty()
    }

    /// Delimited table: update, block start, residual dB, |a_i| per coefficient.
    pub fn to_csv(&self, sub_band: SubBandId) -> String {
        let mut s = format!("# sub_band={sub_band}\n");
        let width = self.coefficients.first().map_or(0, Vec::len);
        s.push_str("update,block_start,residual_db");
        for i in 0..width {
            s.push_str(&format!(",abs_a{i}"));
        }
        s.push('\n');
        for u in 0..self.len() {
            s.push_str(&format!(
                "{},{},{:.6}",
                u, self.block_start[u], self.residual_db[u]
            ));
            for a in &self.coefficients[u] {
                s.push_str(&format!(",{:.9e}", a.norm()));
            }
            s.push('\n');
        }
        s
    }
}

/// Result of learning one sub-band.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetOutcome {
    pub dpd: SubBandDpd,
    pub history: LearningHistory,
    pub regularizer: f64,
    /// Feedback lag and complex gain found when learning started.
    pub calibration_lag: i64,
    pub calibration_gain: C64,
    pub observer_passband_hz: f64,
    pub observer_clipped: bool,
}

struct Active {
    dpd: SubBandDpd,
    columns: Vec<Vec<C64>>,
    /// Reference residual for the divergence test, from the first learning.
    initial_power: Option<f64>,
}

/// Observation and regressors of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedBlock {
    pub start: usize,
    /// Gain-normalized sub-band error e(n).
    pub error: Vec<C64>,
    /// Regressor rows for the same samples.
    pub rows: Vec<Vec<C64>>,
    pub lag: i64,
    pub gain: C64,
}

impl ObservedBlock {
    /// Largest normalized correlation |<e, s_i>| / (|e| |s_i|) over regressor slots.
    pub fn max_error_correlation(&self) -> f64 {
        let width = self.rows.first().map_or(0, Vec::len);
        let ee: f64 = self.error.iter().map(|v| v.norm_sqr()).sum();
        (0..width)
            .map(|i| {
                let mut c = C64::new(0.0, 0.0);
                let mut ss = 0.0;
                for (r, e) in self.rows.iter().zip(&self.error) {
                    c += e * r[i].conj();
                    ss += r[i].norm_sqr();
                }
                c.norm() / (ee * ss).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn residual_power(&self) -> f64 {
        self.error.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.error.len() as f64
    }
}

/// Closed-loop simulator over one waveform: composes the predistorted
/// input, runs the PA, observes a sub-band through a delayed feedback
/// path, aligns and updates.
pub struct ClosedLoop<'a> {
    pa: &'a dyn PowerAmplifier,
    wf: &'a DualCarrierWaveform,
    q: u32,
    memory: usize,
    cfg: LearningConfig,
    active: Vec<Active>,
    blocks_used: usize,
    noise_rng: ChaCha8Rng,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(
        pa: &'a dyn PowerAmplifier,
        wf: &'a DualCarrierWaveform,
        q: u32,
        memory: usize,
        cfg: LearningConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(0x6f6273);
        Ok(Self {
            pa,
            wf,
            q,
            memory,
            cfg,
            active: Vec::new(),
            blocks_used: 0,
            noise_rng,
        })
    }

    pub fn dpds(&self) -> Vec<SubBandDpd> {
        self.active.iter().map(|a| a.dpd.clone()).collect()
    }

    pub fn config(&self) -> &LearningConfig {
        &self.cfg
    }

    /// Samples a block of `sub_band` must keep clear of at each end of
    /// the waveform.
    pub fn block_margin(&self, sub_band: SubBandId) -> Result<usize> {
        Ok(self.margin(&self.observer(sub_band)?))
    }

    fn observer(&self, sub_band: SubBandId) -> Result<Observer> {
        let mut oc = ObserverConfig::for_order(sub_band, self.q, self.wf.max_cc_bandwidth_hz());
        oc.stopband_atten_db = self.cfg.observer_atten_db;
        Observer::new(oc, self.wf.f_if_hz, self.wf.sample_rate_hz())
    }

    fn margin(&self, obs: &Observer) -> usize {
        obs.half_len()
            + self.cfg.max_lag
            + self.cfg.latency
            + self.pa.memory_len()
            + self.memory
            + 1
    }

    /// Block starts cycle through the waveform when it is shorter than the
    /// total learning span.
    fn block_start(&self, index: usize, margin: usize, m: usize) -> Result<usize> {
        let (_, l) = self.cfg.block_geometry();
        let len = self.wf.len();
        if len < 2 * margin + m {
            return Err(DpdError::InvalidInput(format!(
                "waveform of {len} samples is too short for blocks of {m} with margin {margin}"
            )));
        }
        let span = len - 2 * margin - m + 1;
        Ok(margin + (index * l) % span)
    }

    fn prepare(
        &self,
        sub_band: SubBandId,
        margin: usize,
    ) -> Result<(OrthoTransform, Vec<Vec<C64>>)> {
        if sub_band.order() > self.pa.order() {
            return Err(DpdError::Band(format!(
                "sub-band {sub_band} lies above the PA order {}",
                self.pa.order()
            )));
        }
        let fs = self.wf.sample_rate_hz();
        let u = gen_basis(
            self.wf.cc1.samples(),
            self.wf.cc2.samples(),
            sub_band,
            self.q,
            fs,
        )?;
        let end = (margin + self.cfg.ortho_training_samples).min(u.len());
        let (_, w) = orthogonalize(&u.slice(margin.min(end.saturating_sub(100)), end))?;
        let s = apply_transform(&w, &u)?;
        Ok((w, s.columns))
    }

    /// Simulates PA input/output over a window around `start .. start + m`
    /// and returns the observation after alignment and gain normalization.
    #[allow(clippy::too_many_arguments)]
    fn simulate_block(
        &self,
        target: Option<(&DpdCoefficients, &[Vec<C64>])>,
        obs: &Observer,
        start: usize,
        m: usize,
        calibration: Option<(i64, C64)>,
    ) -> Result<(Vec<C64>, i64, C64)> {
        let g = obs.half_len();
        let lag_pad = self.cfg.max_lag;
        let lat = self.cfg.latency;
        let h = self.pa.memory_len();
        let wa = start - g - lag_pad - lat - h;
        let wb = (start + m + g + lag_pad).min(self.wf.len());
        let fs = self.wf.sample_rate_hz();
        let x = &self.wf.composite.samples()[wa..wb];
        let mut parts: Vec<(SubBandId, Vec<C64>)> = self
            .active
            .iter()
            .map(|a| {
                (
                    a.dpd.sub_band(),
                    injection_range(&a.dpd.coeffs, &a.columns, wa, wb),
                )
            })
            .collect();
        if let Some((coeffs, cols)) = target {
            parts.push((coeffs.sub_band, injection_range(coeffs, cols, wa, wb)));
        }
        let refs: Vec<(SubBandId, &[C64])> =
            parts.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        let xt = compose_at(x, &refs, self.wf.f_if_hz / fs, wa as i64);
        let y = self.pa.apply_samples(&xt);
        // feedback path delay
        let mut fb = vec![C64::new(0.0, 0.0); y.len()];
        fb[lat..].copy_from_slice(&y[..y.len() - lat]);
        let c0 = h + lat;
        let (lag, gain) = match calibration {
            Some(v) if wb - wa - c0 < MIN_ALIGN_OVERLAP + lag_pad => v,
            _ => {
                let r = ComplexBasebandSignal::new(xt[c0..].to_vec(), fs)?;
                let o = ComplexBasebandSignal::new(fb[c0..].to_vec(), fs)?;
                let a = align(&r, &o, lag_pad)?;
                (a.lag, a.phase_gain)
            }
        };
        // y_hat(n) = fb(n + lag) / gain over [start - g, start + m + g)
        let inv = C64::new(1.0, 0.0) / gain;
        let lo = start - g;
        let hi = (start + m + g).min(wb);
        let yhat: Vec<C64> = (lo..hi)
            .map(|n| {
                let i = n as i64 + lag - wa as i64;
                if i >= 0 && (i as usize) < fb.len() {
                    fb[i as usize] * inv
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let e = obs.observe_range(&yhat, lo as i64, start as i64, m);
        Ok((e, lag, gain))
    }

    fn rows(&self, cols: &[Vec<C64>], start: usize, m: usize) -> Vec<Vec<C64>> {
        let k = cols.len();
        (start..start + m)
            .map(|n| {
                let mut r = vec![C64::new(0.0, 0.0); k * (self.memory + 1)];
                for d in 0..=self.memory {
                    for i in 0..k {
                        r[d * k + i] = if n >= d {
                            cols[i][n - d]
                        } else {
                            C64::new(0.0, 0.0)
                        };
                    }
                }
                r
            })
            .collect()
    }

    fn calibrate(
        &self,
        obs: &Observer,
        coeffs: &DpdCoefficients,
        cols: &[Vec<C64>],
        margin: usize,
    ) -> Result<(i64, C64)> {
        let m = (MIN_ALIGN_OVERLAP + 4 * self.cfg.max_lag + 1000)
            .min(self.wf.len().saturating_sub(2 * margin));
        let (_, lag, gain) =
            self.simulate_block(Some((coeffs, cols)), obs, margin, m.max(1), None)?;
        Ok((lag, gain))
    }

    /// Learns `sub_band` with the other learned sub-bands active, then keeps
    /// it active. Learning a sub-band again refines its coefficients. After
    /// an error the loop state is unspecified.
    pub fn learn(&mut self, sub_band: SubBandId) -> Result<TargetOutcome> {
        let obs = self.observer(sub_band)?;
        let margin = self.margin(&obs);
        // a sub-band learned before continues from its coefficients and transform
        let slot = self
            .active
            .iter()
            .position(|a| a.dpd.sub_band() == sub_band);
        let (w, cols, mut coeffs, mut initial) = match slot {
            Some(i) => {
                let a = self.active.remove(i);
                (a.dpd.transform, a.columns, a.dpd.coeffs, a.initial_power)
            }
            None => {
                let (w, cols) = self.prepare(sub_band, margin)?;
                (
                    w,
                    cols,
                    DpdCoefficients::zeros(sub_band, self.q, self.memory)?,
                    None,
                )
            }
        };
        let (cal_lag, cal_gain) = self.calibrate(&obs, &coeffs, &cols, margin)?;
        let (m, _) = self.cfg.block_geometry();
        let mut history = LearningHistory::default();
        let mut c_reg = self.cfg.regularizer;
        // divergence compares running means over DIVERGENCE_WINDOW samples
        let k = DIVERGENCE_WINDOW.div_ceil(m).max(1);
        let mut recent: std::collections::VecDeque<f64> =
            std::collections::VecDeque::with_capacity(k);
        let mut first = None;
        for u in 0..self.cfg.max_updates {
            let start = self.block_start(self.blocks_used, margin, m)?;
            self.blocks_used += 1;
            let (mut e, _, _) = self.simulate_block(
                Some((&coeffs, &cols)),
                &obs,
                start,
                m,
                Some((cal_lag, cal_gain)),
            )?;
            add_noise(&mut e, self.cfg.observer_noise_power, &mut self.noise_rng);
            let rows = self.rows(&cols, start, m);
            let p = e.iter().map(|v| v.norm_sqr()).sum::<f64>() / m as f64;
            let db = 10.0 * p.max(1e-300).log10();
            first.get_or_insert(p);
            if recent.len() == k {
                recent.pop_front();
            }
            recent.push_back(p);
            let mean = recent.iter().sum::<f64>() / recent.len() as f64;
            if initial.is_none() && (recent.len() == k || u + 1 == self.cfg.max_updates) {
                initial = Some(mean);
            }
            let to_db = |v: f64| 10.0 * v.max(1e-300).log10();
            let diverged = match initial {
                Some(i) => to_db(mean) > to_db(i) + self.cfg.divergence_db,
                None => false,
            };
            if !p.is_finite() || diverged {
                return Err(DpdError::Divergence {
                    sub_band: sub_band.to_string(),
                    update: u,
                    residual_db: to_db(mean),
                    initial_db: to_db(initial.or(first).unwrap_or(f64::NAN)),
                });
            }
            let c = *c_reg.get_or_insert_with(|| {
                let energy: f64 = rows.iter().flatten().map(|v| v.norm_sqr()).sum();
                (1e-8 * energy / m as f64).max(f64::MIN_POSITIVE)
            });
            coeffs.taps = match self.cfg.mode {
                LearningMode::Sample => {
                    sample_adaptive_step(&coeffs.taps, &rows[0], e[0], self.cfg.mu, c)?
                }
                LearningMode::Block => {
                    block_adaptive_update(&coeffs.taps, &rows, &e, self.cfg.mu, c)?
                }
            };
            history.block_start.push(start);
            history.residual_db.push(db);
            history.coefficients.push(coeffs.taps.clone());
        }
        let dpd = SubBandDpd {
            coeffs,
            transform: w,
        };
        let a = Active {
            dpd: dpd.clone(),
            columns: cols,
            initial_power: initial,
        };
        match slot {
            Some(i) => self.active.insert(i, a),
            None => self.active.push(a),
        }
        Ok(TargetOutcome {
            dpd,
            history,
            regularizer: c_reg.unwrap_or(0.0),
            calibration_lag: cal_lag,
            calibration_gain: cal_gain,
            observer_passband_hz: obs.filter().passband_hz,
            observer_clipped: obs.filter().clipped,
        })
    }

    /// Observes `sub_band` over one block with all learned DPDs active and
    /// no update. `sub_band` must already be learned.
    pub fn observe_block(
        &self,
        sub_band: SubBandId,
        start: usize,
        len: usize,
    ) -> Result<ObservedBlock> {
        let idx = self
            .active
            .iter()
            .position(|a| a.dpd.sub_band() == sub_band)
            .ok_or_else(|| {
                DpdError::InvalidInput(format!("sub-band {sub_band} has not been learned"))
            })?;
        let obs = self.observer(sub_band)?;
        let margin = self.margin(&obs);
        if start < margin || start + len + margin > self.wf.len() {
            return Err(DpdError::InvalidInput(
                "block lies outside the usable waveform".into(),
            ));
        }
        let (error, lag, gain) = self.simulate_block(None, &obs, start, len, None)?;
        Ok(ObservedBlock {
            start,
            error,
            rows: self.rows(&self.active[idx].columns, start, len),
            lag,
            gain,
        })
    }
}

/// Learned DPDs with their histories, in learning order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopResult {
    pub targets: Vec<TargetOutcome>,
}

impl ClosedLoopResult {
    pub fn dpds(&self) -> Vec<SubBandDpd> {
        self.targets.iter().map(|t| t.dpd.clone()).collect()
    }
}

/// Learns `targets` in order on an existing waveform, repeating the
/// sequence `passes` times. Histories of later passes are appended.
pub fn run_closed_loop_on(
    pa: &dyn PowerAmplifier,
    wf: &DualCarrierWaveform,
    targets: &[SubBandId],
    q: u32,
    memory: usize,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<ClosedLoopResult> {
    let mut lp = ClosedLoop::new(pa, wf, q, memory, cfg.clone(), seed)?;
    let mut out: Vec<TargetOutcome> = Vec::with_capacity(targets.len());
    for pass in 0..cfg.passes {
        for (i, &t) in targets.iter().enumerate() {
            let o = lp.learn(t)?;
            if pass == 0 {
                out.push(o);
            } else {
                let prev = &mut out[i];
                let h = &mut prev.history;
                h.block_start.extend(o.history.block_start);
                h.residual_db.extend(o.history.residual_db);
                h.coefficients.extend(o.history.coefficients);
                prev.dpd = o.dpd;
            }
        }
    }
    Ok(ClosedLoopResult { targets: out })
}

/// Generates a waveform long enough for every target's updates and learns.
pub fn run_closed_loop(
    pa: &dyn PowerAmplifier,
    spec: &DualCarrierSpec,
    targets: &[SubBandId],
    q: u32,
    memory: usize,
    cfg: &LearningConfig,
    seed: u64,
) -> Result<ClosedLoopResult> {
    let (m, l) = cfg.block_geometry();
    let n = training_waveform_len(cfg, targets.len(), m, l);
    let wf = generate_dual_carrier(spec, n, seed)?;
    run_closed_loop_on(pa, &wf, targets, q, memory, cfg, seed)
}

/// Waveform length that lets all updates use fresh data, plus margins.
pub fn training_waveform_len(cfg: &LearningConfig, n_targets: usize, m: usize, l: usize) -> usize {
    let updates = cfg.max_updates * n_targets.max(1) * cfg.passes;
    let span = (updates.saturating_sub(1)) * l + m;
    span.max(cfg.ortho_training_samples) + 2 * 8192
}
