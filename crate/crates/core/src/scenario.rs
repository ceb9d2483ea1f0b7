//! Scenario configuration, end-to-end runs, sweeps and artifact files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{OrthoTransform, Sign, SubBandId};
use crate::dpd::{predistort, CoefficientRecord, DpdCoefficients, SubBandDpd};
use crate::error::{DpdError, Result};
use crate::learn::{
    alpha_decorr_analytic, alpha_mmse, alpha_third_inverse, estimate_moments, run_closed_loop_on,
    training_waveform_len, LearningConfig, LearningHistory, STANDARD_MOMENTS,
};
use crate::metrics::{
    evm, flops_model, imr_from_psd, integrated_power, psd, Carrier, ComplexityReport, FlopsKind,
    PsdEstimate,
};
use crate::pa::{PaModel, PowerAmplifier};
use crate::signals::{
    generate_dual_carrier, ComplexBasebandSignal, DualCarrierSpec, DualCarrierWaveform, C64,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaConfig {
    /// Fixture path, relative to the scenario file, or `builtin:<name>`.
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    ThirdInverse,
    Mmse,
    DecorrelationAnalytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpdConfig {
    /// Sub-bands learned in order, e.g. `["3+", "5-"]`.
    pub targets: Vec<SubBandId>,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default)]
    pub memory: usize,
    /// Closed-form solutions evaluated next to the learned DPD (memoryless
    /// PA, third-order targets only).
    #[serde(default)]
    pub references: Vec<ReferenceMethod>,
}

fn default_q() -> u32 {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Absolute total transmit power at `tx_power_db = 0`; the unitless
    /// spectrum is labeled with this plus the drive offset.
    pub ref_power_dbm: f64,
    /// Attenuation applied to spur powers (duplexer isolation).
    pub duplexer_atten_db: f64,
    /// Integration width of an IM band; defaults to order times the wider
    /// carrier bandwidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im_band_hz: Option<f64>,
    pub psd_segment_len: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            ref_power_dbm: 23.0,
            duplexer_atten_db: 0.0,
            im_band_hz: None,
            psd_segment_len: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Drive offset applied to both carrier powers.
    #[serde(default)]
    pub tx_power_db: f64,
    /// Waveform length; by default long enough for all learning blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub carriers: DualCarrierSpec,
    pub pa: PaConfig,
    pub dpd: DpdConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Directory that relative fixture paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

pub const PRESETS: [&str; 4] = [
    "tableII_analytic",
    "fig5_im3",
    "fig8_multiband",
    "rx_desense",
];

/// Shipped scenario text by name.
pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "tableII_analytic" => include_str!("../scenarios/tableII_analytic.toml"),
        "fig5_im3" => include_str!("../scenarios/fig5_im3.toml"),
        "fig8_multiband" => include_str!("../scenarios/fig8_multiband.toml"),
        "rx_desense" => include_str!("../scenarios/rx_desense.toml"),
        _ => return None,
    })
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| {
            let Some(span) = e.span() else {
                return DpdError::config("<document>", e.message().trim().to_string());
            };
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            DpdError::config(
                locate(text, span.start),
                format!("line {line}: {}", e.message().trim()),
            )
        })?;
        sc.validate()?;
        Ok(sc)
    }

    /// Reads a scenario file, or a shipped preset named `preset:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("preset:")) {
            let text = preset_text(name).ok_or_else(|| {
                DpdError::config(
                    "<preset>",
                    format!("unknown preset '{name}', expected one of {PRESETS:?}"),
                )
            })?;
            return Self::from_toml_str(text);
        }
        let text = std::fs::read_to_string(path)?;
        let mut sc = Self::from_toml_str(&text)?;
        sc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.dpd.targets.is_empty() {
            return Err(DpdError::config(
                "dpd.targets",
                "needs at least one sub-band",
            ));
        }
        for (i, t) in self.dpd.targets.iter().enumerate() {
            if self.dpd.targets[..i].contains(t) {
                return Err(DpdError::config(
                    "dpd.targets",
                    format!("sub-band {t} is listed twice"),
                ));
            }
            if self.dpd.q < t.order()
                || self.dpd.q.is_multiple_of(2)
                || self.dpd.q > crate::basis::MAX_BASIS_ORDER
            {
                return Err(DpdError::config(
                    "dpd.q",
                    format!(
                        "must be odd, >= {} and <= {}",
                        t.order(),
                        crate::basis::MAX_BASIS_ORDER
                    ),
                ));
            }
        }
        if self.dpd.q > self.carriers.max_dpd_order {
            return Err(DpdError::config(
                "dpd.q",
                format!(
                    "exceeds carriers.max_dpd_order {}, which sets the sample rate",
                    self.carriers.max_dpd_order
                ),
            ));
        }
        if !self.tx_power_db.is_finite() {
            return Err(DpdError::config("tx_power_db", "must be finite"));
        }
        if self.metrics.psd_segment_len < 16 {
            return Err(DpdError::config(
                "metrics.psd_segment_len",
                "must be at least 16",
            ));
        }
        if let Some(b) = self.metrics.im_band_hz {
            if !(b > 0.0) {
                return Err(DpdError::config("metrics.im_band_hz", "must be positive"));
            }
        }
        self.learning.validate()?;
        self.carrier_spec()
            .validate()
            .map_err(|e| DpdError::config("carriers", e.to_string()))?;
        Ok(())
    }

    /// Carrier description with the drive offset folded in.
    pub fn carrier_spec(&self) -> DualCarrierSpec {
        let mut spec = self.carriers.clone();
        let g = 10f64.powf(self.tx_power_db / 10.0);
        spec.per_cc_power.iter_mut().for_each(|p| *p *= g);
        spec
    }

    pub fn load_pa(&self) -> Result<PaModel> {
        let m = &self.pa.model;
        let pa = if m.starts_with("builtin:") {
            PaModel::load(Path::new(m))
        } else {
            PaModel::load(&self.base_dir.join(m))
        }
        .map_err(|e| match e {
            DpdError::Config { .. } => e,
            other => DpdError::config("pa.model", other.to_string()),
        })?;
        for t in &self.dpd.targets {
            if t.order() > pa.order() {
                return Err(DpdError::config(
                    "dpd.targets",
                    format!("sub-band {t} exceeds the PA order {}", pa.order()),
                ));
            }
        }
        if !self.dpd.references.is_empty() {
            if pa.as_memoryless().is_none() {
                return Err(DpdError::config(
                    "dpd.references",
                    "closed forms need a memoryless PA",
                ));
            }
            if self.dpd.targets.iter().any(|t| t.order() != 3) {
                return Err(DpdError::config(
                    "dpd.references",
                    "closed forms exist for third-order sub-bands only",
                ));
            }
        }
        Ok(pa)
    }

    pub fn waveform_len(&self) -> usize {
        let (m, l) = self.learning.block_geometry();
        self.samples
            .unwrap_or_else(|| training_waveform_len(&self.learning, self.dpd.targets.len(), m, l))
    }
}

/// Dotted path of the table key whose value starts at byte `pos`.
fn locate(text: &str, pos: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if offset > pos {
            break;
        }
        if t.starts_with('[') {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubBandReport {
    pub sub_band: SubBandId,
    pub imr_before_dbc: f64,
    pub imr_after_dbc: f64,
    pub spur_before_dbm: f64,
    pub spur_after_dbm: f64,
    pub final_residual_db: f64,
    pub regularizer: f64,
    pub observer_passband_hz: f64,
    pub observer_clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceReport {
    pub method: ReferenceMethod,
    pub sub_band: SubBandId,
    /// Coefficient of the third-order basis function, [re, im].
    pub alpha: [f64; 2],
    pub imr_dbc: f64,
    pub evm_pct: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityEntry {
    /// Sub-band label, or "full" for the full-band reference.
    pub kind: String,
    pub rate_hz: f64,
    pub basis_flops: u64,
    pub filtering_flops: u64,
    pub total_flops: u64,
    pub gflops: f64,
}

impl ComplexityEntry {
    fn new(kind: String, r: ComplexityReport) -> Self {
        Self {
            kind,
            rate_hz: r.rate_hz,
            basis_flops: r.basis_flops,
            filtering_flops: r.filtering_flops,
            total_flops: r.total_flops,
            gflops: r.gflops,
        }
    }
}

/// Metrics summary written as `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub tx_power_db: f64,
    pub q: u32,
    pub memory: usize,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub f_if_hz: f64,
    pub ref_power_dbm: f64,
    pub duplexer_atten_db: f64,
    pub evm_before_pct: [f64; 2],
    pub evm_after_pct: [f64; 2],
    pub sub_bands: Vec<SubBandReport>,
    #[serde(default)]
    pub references: Vec<ReferenceReport>,
    pub coefficients: Vec<CoefficientRecord>,
    /// Present only for ninth-order DPD.
    #[serde(default)]
    pub complexity: Vec<ComplexityEntry>,
}

impl Summary {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| DpdError::config("summary", e.message().trim().to_string()))
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub psd_before: PsdEstimate,
    pub psd_after: PsdEstimate,
    pub histories: Vec<(SubBandId, LearningHistory)>,
    pub dpds: Vec<SubBandDpd>,
}

/// IMR, spur power and per-carrier EVM of one PA output.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub psd: PsdEstimate,
    pub imr_dbc: Vec<f64>,
    pub spur_dbm: Vec<f64>,
    pub evm_pct: [f64; 2],
}

/// Runs the PA on the (optionally predistorted) waveform and measures it.
pub fn evaluate(
    pa: &dyn PowerAmplifier,
    wf: &DualCarrierWaveform,
    dpds: &[SubBandDpd],
    bands: &[SubBandId],
    metrics: &MetricsConfig,
) -> Result<Evaluation> {
    let x = predistort(
        &wf.composite,
        wf.cc1.samples(),
        wf.cc2.samples(),
        wf.f_if_hz,
        dpds,
    )?;
    let y = ComplexBasebandSignal::new(pa.apply_samples(x.samples()), wf.sample_rate_hz())?;
    let p = psd(
        &y,
        metrics.psd_segment_len.min(y.len()),
        crate::metrics::DEFAULT_OVERLAP,
    )?;
    let b = wf.max_cc_bandwidth_hz();
    let mut imr_dbc = Vec::with_capacity(bands.len());
    let mut spur_dbm = Vec::with_capacity(bands.len());
    for &sb in bands {
        let width = metrics.im_band_hz.unwrap_or(sb.order() as f64 * b);
        let r = imr_from_psd(&p, sb, wf.f_if_hz, b, width)?;
        imr_dbc.push(r.dbc);
        let c = sb.center_hz(wf.f_if_hz);
        spur_dbm.push(integrated_power(
            &p,
            c - width / 2.0,
            c + width / 2.0,
            metrics.ref_power_dbm,
            metrics.duplexer_atten_db,
        )?);
    }
    let evm_pct = [
        evm(&wf.symbols[0], &y, Carrier::Upper, wf.f_if_hz)?,
        evm(&wf.symbols[1], &y, Carrier::Lower, wf.f_if_hz)?,
    ];
    Ok(Evaluation {
        psd: p,
        imr_dbc,
        spur_dbm,
        evm_pct,
    })
}

/// Third-order single-coefficient DPD from a closed form.
pub fn reference_dpd(
    method: ReferenceMethod,
    pa: &PaModel,
    wf: &DualCarrierWaveform,
    sub_band: SubBandId,
) -> Result<SubBandDpd> {
    let m = pa
        .as_memoryless()
        .ok_or_else(|| DpdError::config("dpd.references", "closed forms need a memoryless PA"))?;
    let (a, b) = match sub_band.sign() {
        Sign::Plus => (wf.cc1.samples(), wf.cc2.samples()),
        Sign::Minus => (wf.cc2.samples(), wf.cc1.samples()),
    };
    let alpha = match method {
        ReferenceMethod::ThirdInverse => alpha_third_inverse(m.f1, m.f3)?,
        ReferenceMethod::Mmse => {
            alpha_mmse(m.f1, m.f3, &estimate_moments(a, b, &STANDARD_MOMENTS)?)?
        }
        ReferenceMethod::DecorrelationAnalytic => {
            alpha_decorr_analytic(m.f1, m.f3, &estimate_moments(a, b, &STANDARD_MOMENTS)?)?
        }
    };
    let w = OrthoTransform::identity(1);
    Ok(SubBandDpd {
        coeffs: DpdCoefficients::from_basis_domain(sub_band, 3, 0, &[alpha], &w)?,
        transform: w,
    })
}

/// Third-order basis coefficient of a reference DPD.
fn reference_alpha(d: &SubBandDpd) -> Result<C64> {
    Ok(d.coeffs.to_basis_domain(&d.transform)?[0])
}

/// Generates the waveform, learns every target and measures before and after.
pub fn run(sc: &Scenario) -> Result<RunReport> {
    sc.validate()?;
    let pa = sc.load_pa()?;
    let spec = sc.carrier_spec();
    let wf = generate_dual_carrier(&spec, sc.waveform_len(), sc.seed)?;
    let targets = &sc.dpd.targets;
    let metrics = MetricsConfig {
        ref_power_dbm: sc.metrics.ref_power_dbm + sc.tx_power_db,
        ..sc.metrics.clone()
    };
    let before = evaluate(&pa, &wf, &[], targets, &metrics)?;
    let learned = run_closed_loop_on(
        &pa,
        &wf,
        targets,
        sc.dpd.q,
        sc.dpd.memory,
        &sc.learning,
        sc.seed,
    )?;
    let dpds = learned.dpds();
    let after = evaluate(&pa, &wf, &dpds, targets, &metrics)?;

    let sub_bands = learned
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| SubBandReport {
            sub_band: targets[i],
            imr_before_dbc: before.imr_dbc[i],
            imr_after_dbc: after.imr_dbc[i],
            spur_before_dbm: before.spur_dbm[i],
            spur_after_dbm: after.spur_dbm[i],
            final_residual_db: t
                .history
                .residual_db
                .last()
                .copied()
                .unwrap_or(f64::NEG_INFINITY),
            regularizer: t.regularizer,
            observer_passband_hz: t.observer_passband_hz,
            observer_clipped: t.observer_clipped,
        })
        .collect();

    let mut references = Vec::new();
    for &method in &sc.dpd.references {
        for &sb in targets {
            let d = reference_dpd(method, &pa, &wf, sb)?;
            let ev = evaluate(&pa, &wf, std::slice::from_ref(&d), &[sb], &metrics)?;
            let a = reference_alpha(&d)?;
            references.push(ReferenceReport {
                method,
                sub_band: sb,
                alpha: [a.re, a.im],
                imr_dbc: ev.imr_dbc[0],
                evm_pct: ev.evm_pct,
            });
        }
    }

    let mut complexity = Vec::new();
    if sc.dpd.q == 9 {
        let b = spec.max_cc_bandwidth_hz();
        for sb in targets.iter().filter(|t| t.order() <= 9) {
            let r = flops_model(
                FlopsKind::SubBand(sb.order()),
                9,
                sc.dpd.memory as u64,
                9.0 * b,
            )?;
            complexity.push(ComplexityEntry::new(sb.to_string(), r));
        }
        let r = flops_model(
            FlopsKind::FullBand,
            9,
            sc.dpd.memory as u64,
            9.0 * (spec.carrier_spacing_hz + b),
        )?;
        complexity.push(ComplexityEntry::new("full".into(), r));
    }

    let summary = Summary {
        scenario: sc.name.clone(),
        seed: sc.seed,
        tx_power_db: sc.tx_power_db,
        q: sc.dpd.q,
        memory: sc.dpd.memory,
        samples: wf.len(),
        sample_rate_hz: wf.sample_rate_hz(),
        f_if_hz: wf.f_if_hz,
        ref_power_dbm: sc.metrics.ref_power_dbm,
        duplexer_atten_db: sc.metrics.duplexer_atten_db,
        evm_before_pct: before.evm_pct,
        evm_after_pct: after.evm_pct,
        sub_bands,
        references,
        coefficients: dpds.iter().map(CoefficientRecord::from_dpd).collect(),
        complexity,
    };
    Ok(RunReport {
        summary,
        psd_before: before.psd,
        psd_after: after.psd,
        histories: learned
            .targets
            .iter()
            .zip(targets)
            .map(|(t, s)| (*s, t.history.clone()))
            .collect(),
        dpds,
    })
}

/// File name used for a sub-band's learning history.
pub fn history_file_name(sb: SubBandId) -> String {
    let sign = match sb.sign() {
        Sign::Plus => "p",
        Sign::Minus => "m",
    };
    format!("history_im{}{sign}.csv", sb.order())
}

/// Writes summary.toml, psd_before.csv, psd_after.csv and one history file
/// per target into `dir`, and returns the paths written.
pub fn write_artifacts(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let s = &report.summary;
    let meta = |stage: &str| {
        vec![
            ("scenario", s.scenario.clone()),
            ("stage", stage.to_string()),
            ("ref_power_dbm", s.ref_power_dbm.to_string()),
            ("seed", s.seed.to_string()),
        ]
    };
    let mut files = vec![
        (dir.join("summary.toml"), s.to_toml_string()),
        (
            dir.join("psd_before.csv"),
            report.psd_before.to_csv(&meta("before")),
        ),
        (
            dir.join("psd_after.csv"),
            report.psd_after.to_csv(&meta("after")),
        ),
    ];
    for (sb, h) in &report.histories {
        files.push((dir.join(history_file_name(*sb)), h.to_csv(*sb)));
    }
    for (p, text) in &files {
        std::fs::write(p, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    TxPowerDb,
    DpdOrder,
}

impl std::str::FromStr for SweepVar {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tx_power_db" => Ok(SweepVar::TxPowerDb),
            "dpd_order" => Ok(SweepVar::DpdOrder),
            other => Err(DpdError::config(
                "--var",
                format!("unknown sweep variable '{other}', expected tx_power_db or dpd_order"),
            )),
        }
    }
}

/// One sweep point and target sub-band.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub sub_band: SubBandId,
    pub imr_before_dbc: f64,
    pub imr_after_dbc: f64,
    pub spur_before_dbm: f64,
    pub spur_after_dbm: f64,
}

/// Evenly spaced sweep values including both ends.
pub fn sweep_values(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(DpdError::config(
            "--steps",
            "need at least one finite sweep point",
        ));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    Ok((0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Scenario with the swept variable set to `value`.
pub fn sweep_point(base: &Scenario, var: SweepVar, value: f64) -> Result<Scenario> {
    let mut sc = base.clone();
    match var {
        SweepVar::TxPowerDb => sc.tx_power_db = value,
        SweepVar::DpdOrder => {
            if value.fract() != 0.0 || value < 1.0 {
                return Err(DpdError::config(
                    "--var dpd_order",
                    format!("{value} is not a positive integer"),
                ));
            }
            sc.dpd.q = value as u32;
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Runs every point in parallel and returns rows in sweep order.
pub fn sweep(base: &Scenario, var: SweepVar, values: &[f64]) -> Result<Vec<SweepRow>> {
    let points: Vec<Scenario> = values
        .iter()
        .map(|&v| sweep_point(base, var, v))
        .collect::<Result<_>>()?;
    let reports: Vec<Result<RunReport>> = points.par_iter().map(run).collect();
    let mut rows = Vec::new();
    for (index, (r, &value)) in reports.into_iter().zip(values).enumerate() {
        let r = r?;
        for sb in &r.summary.sub_bands {
            rows.push(SweepRow {
                index,
                value,
                sub_band: sb.sub_band,
                imr_before_dbc: sb.imr_before_dbc,
                imr_after_dbc: sb.imr_after_dbc,
                spur_before_dbm: sb.spur_before_dbm,
                spur_after_dbm: sb.spur_after_dbm,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(base: &Scenario, var: SweepVar, rows: &[SweepRow]) -> String {
    let name = match var {
        SweepVar::TxPowerDb => "tx_power_db",
        SweepVar::DpdOrder => "dpd_order",
    };
    let mut s = format!(
        "# scenario={}\n# seed={}\n# ref_power_dbm={}\n# duplexer_atten_db={}\nindex,{name},sub_band,imr_before_dbc,imr_after_dbc,spur_before_dbm,spur_after_dbm\n",
        base.name, base.seed, base.metrics.ref_power_dbm, base.metrics.duplexer_atten_db
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4}\n",
            r.index,
            r.value,
            r.sub_band,
            r.imr_before_dbc,
            r.imr_after_dbc,
            r.spur_before_dbm,
            r.spur_after_dbm
        ));
    }
    s
}
