//! Main-path sub-band DPD: regressors, injection signals and the composed
//! PA input.

use serde::{Deserialize, Serialize};

use crate::basis::{apply_transform, gen_basis, OrthoBasisSet, OrthoTransform, SubBandId};
use crate::error::{DpdError, Result};
use crate::signals::{unit_tone, ComplexBasebandSignal, C64};

/// Stacked filter taps for one sub-band, delay-major:
/// `[orders at delay 0 | orders at delay 1 | ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpdCoefficients {
    pub sub_band: SubBandId,
    pub q: u32,
    pub memory: usize,
    pub taps: Vec<C64>,
}

impl DpdCoefficients {
    pub fn zeros(sub_band: SubBandId, q: u32, memory: usize) -> Result<Self> {
        crate::basis::check_order(sub_band, q)?;
        let len = sub_band.basis_count(q) * (memory + 1);
        Ok(Self {
            sub_band,
            q,
            memory,
            taps: vec![C64::new(0.0, 0.0); len],
        })
    }

    pub fn from_taps(sub_band: SubBandId, q: u32, memory: usize, taps: Vec<C64>) -> Result<Self> {
        let mut c = Self::zeros(sub_band, q, memory)?;
        if taps.len() != c.taps.len() {
            return Err(DpdError::Shape(format!(
                "{} taps supplied, {} expected for {sub_band} with Q = {q}, N = {memory}",
                taps.len(),
                c.taps.len()
            )));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(DpdError::InvalidInput("coefficients must be finite".into()));
        }
        c.taps = taps;
        Ok(c)
    }

    pub fn orders_per_delay(&self) -> usize {
        self.sub_band.basis_count(self.q)
    }

    /// Tap for basis column `col` at delay `delay`.
    pub fn tap(&self, delay: usize, col: usize) -> C64 {
        self.taps[delay * self.orders_per_delay() + col]
    }

    /// Equivalent taps on the raw basis: x~(n) = sum_k sum_j b_{k,j} u_j(n - k),
    /// with b_{k,j} = sum_i conj(a_{k,i}) W_ij. Same delay-major layout.
    pub fn to_basis_domain(&self, w: &OrthoTransform) -> Result<Vec<C64>> {
        let k = self.orders_per_delay();
        if w.dim() != k {
            return Err(DpdError::Shape(format!(
                "transform is {0}x{0}, expected {k}x{k}",
                w.dim()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.taps.len()];
        for d in 0..=self.memory {
            for j in 0..k {
                out[d * k + j] = (j..k).map(|i| self.tap(d, i).conj() * w.get(i, j)).sum();
            }
        }
        Ok(out)
    }

    /// Inverse of [`Self::to_basis_domain`].
    pub fn from_basis_domain(
        sub_band: SubBandId,
        q: u32,
        memory: usize,
        b: &[C64],
        w: &OrthoTransform,
    ) -> Result<Self> {
        let mut c = Self::zeros(sub_band, q, memory)?;
        let k = c.orders_per_delay();
        if w.dim() != k || b.len() != c.taps.len() {
            return Err(DpdError::Shape(
                "basis-domain taps do not match the transform".into(),
            ));
        }
        // solve conj(a_d)^T W = b_d by back substitution (W lower triangular)
        for d in 0..=memory {
            let mut a = vec![C64::new(0.0, 0.0); k];
            for j in (0..k).rev() {
                let acc: C64 = (j + 1..k).map(|i| a[i] * w.get(i, j)).sum();
                a[j] = (b[d * k + j] - acc) / w.get(j, j);
            }
            for i in 0..k {
                c.taps[d * k + i] = a[i].conj();
            }
        }
        Ok(c)
    }
}

/// Rows s(n) = [s(n); s(n-1); ...; s(n-N)], stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    rows: Vec<C64>,
    width: usize,
    pub rate_hz: f64,
}

impl Regressor {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.width.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, n: usize) -> &[C64] {
        &self.rows[n * self.width..(n + 1) * self.width]
    }
}

pub fn build_regressor(ortho: &OrthoBasisSet, memory: usize) -> Regressor {
    let k = ortho.n_columns();
    let len = ortho.len();
    let width = k * (memory + 1);
    let mut rows = vec![C64::new(0.0, 0.0); len * width];
    for n in 0..len {
        for d in 0..=memory.min(n) {
            for (i, col) in ortho.columns.iter().enumerate() {
                rows[n * width + d * k + i] = col[n - d];
            }
        }
    }
    Regressor {
        rows,
        width,
        rate_hz: ortho.rate_hz,
    }
}

/// x~(n) = a^H s(n).
pub fn injection_signal(
    coeffs: &DpdCoefficients,
    reg: &Regressor,
) -> Result<ComplexBasebandSignal> {
    if coeffs.taps.len() != reg.width() {
        return Err(DpdError::Shape(format!(
            "{} coefficients against regressor rows of width {}",
            coeffs.taps.len(),
            reg.width()
        )));
    }
    let out = (0..reg.len())
        .map(|n| dot_conj(&coeffs.taps, reg.row(n)))
        .collect();
    ComplexBasebandSignal::new(out, reg.rate_hz)
}

#[inline]
pub(crate) fn dot_conj(a: &[C64], s: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (ai, si) in a.iter().zip(s) {
        acc += ai.conj() * si;
    }
    acc
}

/// Injection over samples `start..end` computed straight from the basis
/// columns; identical arithmetic to [`injection_signal`].
pub(crate) fn injection_range(
    coeffs: &DpdCoefficients,
    columns: &[Vec<C64>],
    start: usize,
    end: usize,
) -> Vec<C64> {
    let k = columns.len();
    let mut row = vec![C64::new(0.0, 0.0); coeffs.taps.len()];
    (start..end)
        .map(|n| {
            for d in 0..=coeffs.memory {
                for i in 0..k {
                    row[d * k + i] = if n >= d {
                        columns[i][n - d]
                    } else {
                        C64::new(0.0, 0.0)
                    };
                }
            }
            dot_conj(&coeffs.taps, &row)
        })
        .collect()
}

/// x~(n) = x(n) + sum_m x~_m(n) e^{j 2 pi h_m f_IF n / f_s}.
pub fn compose_pa_input(
    x: &ComplexBasebandSignal,
    injections: &[(SubBandId, ComplexBasebandSignal)],
    f_if_hz: f64,
) -> Result<ComplexBasebandSignal> {
    let fs = x.sample_rate_hz();
    for (sb, inj) in injections {
        if inj.sample_rate_hz() != fs {
            return Err(DpdError::Rate(format!(
                "injection for {sb} is at {} Hz, composite at {fs} Hz",
                inj.sample_rate_hz()
            )));
        }
        if inj.len() != x.len() {
            return Err(DpdError::Shape(format!(
                "injection for {sb} has a different length"
            )));
        }
    }
    let parts: Vec<(SubBandId, &[C64])> =
        injections.iter().map(|(s, i)| (*s, i.samples())).collect();
    ComplexBasebandSignal::new(compose_at(x.samples(), &parts, f_if_hz / fs, 0), fs)
}

/// Composition with the first sample at global index `n0`.
pub(crate) fn compose_at(
    x: &[C64],
    injections: &[(SubBandId, &[C64])],
    w_if: f64,
    n0: i64,
) -> Vec<C64> {
    let mut out = x.to_vec();
    for (sb, inj) in injections {
        let w = sb.harmonic() as f64 * w_if;
        for (n, (o, v)) in out.iter_mut().zip(inj.iter()).enumerate() {
            *o += v * unit_tone(w, n0 + n as i64);
        }
    }
    out
}

/// A learned sub-band DPD: coefficients plus the frozen transform they act through.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandDpd {
    pub coeffs: DpdCoefficients,
    pub transform: OrthoTransform,
}

impl SubBandDpd {
    pub fn sub_band(&self) -> SubBandId {
        self.coeffs.sub_band
    }

    /// Injection signal for the carriers `x1`, `x2`.
    pub fn injection(&self, x1: &[C64], x2: &[C64], rate_hz: f64) -> Result<Vec<C64>> {
        let basis = gen_basis(x1, x2, self.coeffs.sub_band, self.coeffs.q, rate_hz)?;
        let s = apply_transform(&self.transform, &basis)?;
        Ok(injection_range(&self.coeffs, &s.columns, 0, x1.len()))
    }
}

/// Predistorted PA input for the composite `x` built from carriers `x1`, `x2`.
pub fn predistort(
    x: &ComplexBasebandSignal,
    x1: &[C64],
    x2: &[C64],
    f_if_hz: f64,
    dpds: &[SubBandDpd],
) -> Result<ComplexBasebandSignal> {
    let fs = x.sample_rate_hz();
    let mut inj = Vec::with_capacity(dpds.len());
    for d in dpds {
        inj.push((
            d.sub_band(),
            ComplexBasebandSignal::new(d.injection(x1, x2, fs)?, fs)?,
        ));
    }
    compose_pa_input(x, &inj, f_if_hz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientRecord {
    pub sub_band: SubBandId,
    pub q: u32,
    pub memory: usize,
    /// Interleaved real/imaginary parts, delay-major.
    pub taps: Vec<f64>,
    /// Row-major orthonormalizing transform, interleaved real/imaginary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Vec<f64>>,
}

fn interleave(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn deinterleave(v: &[f64], field: &str) -> Result<Vec<C64>> {
    if !v.len().is_multiple_of(2) {
        return Err(DpdError::config(
            field,
            "odd number of real/imaginary values",
        ));
    }
    Ok(v.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

impl CoefficientRecord {
    pub fn from_dpd(d: &SubBandDpd) -> Self {
        Self {
            sub_band: d.coeffs.sub_band,
            q: d.coeffs.q,
            memory: d.coeffs.memory,
            taps: interleave(&d.coeffs.taps),
            transform: Some(interleave(d.transform.rows())),
        }
    }

    pub fn to_dpd(&self) -> Result<SubBandDpd> {
        let coeffs = DpdCoefficients::from_taps(
            self.sub_band,
            self.q,
            self.memory,
            deinterleave(&self.taps, "taps")?,
        )?;
        let k = coeffs.orders_per_delay();
        let transform = match &self.transform {
            Some(t) => OrthoTransform::from_rows(k, deinterleave(t, "transform")?)?,
            None => OrthoTransform::identity(k),
        };
        Ok(SubBandDpd { coeffs, transform })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("coefficients serialize")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| DpdError::config("coefficients", e.to_string()))
    }
}
