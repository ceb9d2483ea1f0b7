//! Behavioral power-amplifier models and analytical sub-band outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{gen_basis, SubBandId};
use crate::error::{DpdError, Result};
use crate::signals::{convolve_window, design_lowpass, mix_at, ComplexBasebandSignal, C64};

/// Anything that maps a PA input sequence to its output sequence.
pub trait PowerAmplifier: Send + Sync {
    /// Highest odd nonlinearity order.
    fn order(&self) -> u32;
    /// Number of past samples the output depends on.
    fn memory_len(&self) -> usize;
    /// Output for `x` with zero pre-history.
    fn apply_samples(&self, x: &[C64]) -> Vec<C64>;

    fn apply(&self, x: &ComplexBasebandSignal) -> Result<ComplexBasebandSignal> {
        ComplexBasebandSignal::new(self.apply_samples(x.samples()), x.sample_rate_hz())
    }
}

/// Parallel Hammerstein model: y = sum_p f_p * (|x|^{p-1} x).
#[derive(Debug, Clone, PartialEq)]
pub struct PhModel {
    order: u32,
    branches: BTreeMap<u32, Vec<C64>>,
}

impl PhModel {
    pub fn new(order: u32, branches: BTreeMap<u32, Vec<C64>>) -> Result<Self> {
        if order.is_multiple_of(2) {
            return Err(DpdError::Order(format!(
                "PA order must be odd, got {order}"
            )));
        }
        if !branches.contains_key(&1) {
            return Err(DpdError::InvalidInput(
                "the linear branch p = 1 is required".into(),
            ));
        }
        for (&p, taps) in &branches {
            if p % 2 == 0 || p > order {
                return Err(DpdError::Order(format!(
                    "branch order {p} must be odd and <= {order}"
                )));
            }
            if taps.is_empty() {
                return Err(DpdError::InvalidInput(format!("branch {p} has no taps")));
            }
            if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
                return Err(DpdError::InvalidInput(format!(
                    "branch {p} has non-finite taps"
                )));
            }
        }
        Ok(Self { order, branches })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn branches(&self) -> &BTreeMap<u32, Vec<C64>> {
        &self.branches
    }

    pub fn branch(&self, p: u32) -> Option<&[C64]> {
        self.branches.get(&p).map(Vec::as_slice)
    }

    /// Samples at the start of an output affected by the zero pre-history.
    pub fn transient_len(&self) -> usize {
        self.branches.values().map(Vec::len).max().unwrap_or(1) - 1
    }

    pub fn scaled(&self, c: C64) -> PhModel {
        PhModel {
            order: self.order,
            branches: self
                .branches
                .iter()
                .map(|(&p, t)| (p, t.iter().map(|v| v * c).collect()))
                .collect(),
        }
    }
}

impl PowerAmplifier for PhModel {
    fn order(&self) -> u32 {
        self.order
    }

    fn memory_len(&self) -> usize {
        self.transient_len()
    }

    fn apply_samples(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        let mut z = vec![C64::new(0.0, 0.0); x.len()];
        for (&p, taps) in &self.branches {
            let k = ((p - 1) / 2) as i32;
            z.iter_mut()
                .zip(x)
                .for_each(|(zn, &xn)| *zn = xn * xn.norm_sqr().powi(k));
            for (n, yn) in y.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (d, &t) in taps.iter().enumerate().take(n + 1) {
                    acc += t * z[n - d];
                }
                *yn += acc;
            }
        }
        y
    }
}

pub fn ph_apply(model: &PhModel, x: &ComplexBasebandSignal) -> Result<ComplexBasebandSignal> {
    model.apply(x)
}

/// y = f1 x + f3 |x|^2 x + f5 |x|^4 x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemorylessPoly {
    pub f1: C64,
    pub f3: C64,
    pub f5: C64,
}

impl MemorylessPoly {
    pub fn new(f1: C64, f3: C64, f5: C64) -> Result<Self> {
        if f1 == C64::new(0.0, 0.0) {
            return Err(DpdError::InvalidInput("f1 must be nonzero".into()));
        }
        Ok(Self { f1, f3, f5 })
    }

    #[inline]
    pub fn eval(&self, x: C64) -> C64 {
        let r = x.norm_sqr();
        x * (self.f1 + r * (self.f3 + r * self.f5))
    }

    pub fn to_ph(&self) -> PhModel {
        let mut branches = BTreeMap::new();
        branches.insert(1, vec![self.f1]);
        let mut order = 1;
        if self.f3 != C64::new(0.0, 0.0) || self.f5 != C64::new(0.0, 0.0) {
            branches.insert(3, vec![self.f3]);
            order = 3;
        }
        if self.f5 != C64::new(0.0, 0.0) {
            branches.insert(5, vec![self.f5]);
            order = 5;
        }
        PhModel { order, branches }
    }

    /// Exact m-th harmonic (in theta) of the output for the input
    /// sum_i c_i(n) e^{j h_i theta}, sampled at `points` phases.
    ///
    /// For a memoryless model this is the sub-band m component with no
    /// filtering error; `points` must exceed the highest output harmonic
    /// plus |m| to avoid folding.
    pub fn harmonic(
        &self,
        components: &[(i32, &[C64])],
        m: i32,
        points: usize,
    ) -> Result<Vec<C64>> {
        let len = components.first().map_or(0, |c| c.1.len());
        if components.iter().any(|c| c.1.len() != len) {
            return Err(DpdError::Shape(
                "harmonic components differ in length".into(),
            ));
        }
        let tones: Vec<Vec<C64>> = (0..points)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
                components
                    .iter()
                    .map(|&(h, _)| C64::from_polar(1.0, h as f64 * th))
                    .collect()
            })
            .collect();
        let demod: Vec<C64> = (0..points)
            .map(|k| {
                C64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (m as f64) * k as f64 / points as f64,
                )
            })
            .collect();
        Ok((0..len)
            .map(|n| {
                let mut acc = C64::new(0.0, 0.0);
                for (tk, dk) in tones.iter().zip(&demod) {
                    let x: C64 = components.iter().zip(tk).map(|(c, t)| c.1[n] * t).sum();
                    acc += self.eval(x) * dk;
                }
                acc / points as f64
            })
            .collect())
    }
}

impl PowerAmplifier for MemorylessPoly {
    fn order(&self) -> u32 {
        if self.f5 != C64::new(0.0, 0.0) {
            5
        } else if self.f3 != C64::new(0.0, 0.0) {
            3
        } else {
            1
        }
    }

    fn memory_len(&self) -> usize {
        0
    }

    fn apply_samples(&self, x: &[C64]) -> Vec<C64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }
}

pub fn memoryless_apply(
    model: &MemorylessPoly,
    x: &ComplexBasebandSignal,
) -> Result<ComplexBasebandSignal> {
    model.apply(x)
}

/// Either PA model behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum PaModel {
    Ph(PhModel),
    Memoryless(MemorylessPoly),
}

impl PaModel {
    pub fn as_ph(&self) -> PhModel {
        match self {
            PaModel::Ph(m) => m.clone(),
            PaModel::Memoryless(m) => m.to_ph(),
        }
    }

    pub fn as_memoryless(&self) -> Option<&MemorylessPoly> {
        match self {
            PaModel::Memoryless(m) => Some(m),
            PaModel::Ph(_) => None,
        }
    }
}

impl PowerAmplifier for PaModel {
    fn order(&self) -> u32 {
        match self {
            PaModel::Ph(m) => m.order(),
            PaModel::Memoryless(m) => PowerAmplifier::order(m),
        }
    }

    fn memory_len(&self) -> usize {
        match self {
            PaModel::Ph(m) => m.memory_len(),
            PaModel::Memoryless(m) => m.memory_len(),
        }
    }

    fn apply_samples(&self, x: &[C64]) -> Vec<C64> {
        match self {
            PaModel::Ph(m) => m.apply_samples(x),
            PaModel::Memoryless(m) => m.apply_samples(x),
        }
    }
}

/// Branch filters seen by sub-band m: f_p(k) e^{-j 2 pi h f_IF k / f_s}
/// for p >= m, where h is the signed sub-band harmonic. The sub-band
/// lowpass is applied separately by [`sub_band_output_oracle`].
pub fn sub_band_branch_response(
    model: &PhModel,
    sub_band: SubBandId,
    f_if_hz: f64,
    f_s: f64,
) -> Result<BTreeMap<u32, Vec<C64>>> {
    check_band(model, sub_band)?;
    let w = -(sub_band.harmonic() as f64) * f_if_hz / f_s;
    Ok(model
        .branches
        .iter()
        .filter(|(&p, _)| p >= sub_band.order())
        .map(|(&p, taps)| (p, mix_at(taps, w, 0)))
        .collect())
}

fn check_band(model: &PhModel, sub_band: SubBandId) -> Result<()> {
    if sub_band.order() > model.order() {
        return Err(DpdError::Band(format!(
            "sub-band {sub_band} lies above the PA order {}",
            model.order()
        )));
    }
    Ok(())
}

/// Lowpass isolating one sub-band around DC after mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandFilter {
    pub passband_hz: f64,
    pub stopband_hz: f64,
    pub stopband_atten_db: f64,
    /// True when the nominal passband had to be narrowed to fit between sub-bands.
    pub clipped: bool,
    pub taps: Vec<f64>,
}

/// Lowpass for the sub-band at odd `harmonic` of f_IF, after it has been
/// mixed to DC. The passband half-width is order * B / 2, limited to 0.4
/// times the distance to the nearest other sub-band; the stopband starts
/// where that sub-band's passband begins. Neighbours include images of
/// sub-bands near Nyquist, so the top sub-band may see its mirror closer
/// than 2 f_IF.
pub fn sub_band_lowpass(
    order: u32,
    harmonic: i32,
    cc_bandwidth_hz: f64,
    f_if_hz: f64,
    f_s: f64,
    atten_db: f64,
) -> Result<SubBandFilter> {
    let gap = neighbour_distance(harmonic, f_if_hz, f_s);
    let nominal = order as f64 * cc_bandwidth_hz / 2.0;
    let limit = 0.4 * gap;
    let (pass, clipped) = if nominal > limit {
        (limit, true)
    } else {
        (nominal, false)
    };
    let stop = gap - pass;
    let taps = design_lowpass(pass, atten_db, stop - pass, f_s)?;
    Ok(SubBandFilter {
        passband_hz: pass,
        stopband_hz: stop,
        stopband_atten_db: atten_db,
        clipped,
        taps,
    })
}

/// Smallest distance from harmonic `h` to any other odd harmonic below
/// Nyquist, measured around the sampling circle.
fn neighbour_distance(h: i32, f_if_hz: f64, f_s: f64) -> f64 {
    let top = ((f_s / 2.0 / f_if_hz).ceil() as i32) | 1;
    (-top..=top)
        .filter(|k| k % 2 != 0 && *k != h && (*k as f64 * f_if_hz).abs() < f_s / 2.0)
        .map(|k| {
            let d = ((k - h) as f64 * f_if_hz).rem_euclid(f_s);
            d.min(f_s - d)
        })
        .fold(2.0 * f_if_hz, f64::min)
}

/// Model-side sub-band output h * sum_p f_{m,p} * u_{m,p}, with the
/// symmetric lowpass `h` delay-compensated.
pub fn sub_band_output_oracle(
    model: &PhModel,
    x1: &ComplexBasebandSignal,
    x2: &ComplexBasebandSignal,
    sub_band: SubBandId,
    f_if_hz: f64,
    lowpass: &[f64],
) -> Result<ComplexBasebandSignal> {
    check_band(model, sub_band)?;
    if x1.sample_rate_hz() != x2.sample_rate_hz() {
        return Err(DpdError::Rate("carrier rates differ".into()));
    }
    if lowpass.is_empty() || lowpass.len().is_multiple_of(2) {
        return Err(DpdError::Design(
            "oracle lowpass must have odd length".into(),
        ));
    }
    let fs = x1.sample_rate_hz();
    let basis = gen_basis(x1.samples(), x2.samples(), sub_band, model.order(), fs)?;
    let resp = sub_band_branch_response(model, sub_band, f_if_hz, fs)?;
    let len = x1.len();
    let mut z = vec![C64::new(0.0, 0.0); len];
    for (col, p) in basis.columns.iter().zip(basis.orders()) {
        if let Some(taps) = resp.get(&p) {
            let part = convolve_window(col, taps, 0, len);
            z.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
    }
    let h: Vec<C64> = lowpass.iter().map(|&t| C64::new(t, 0.0)).collect();
    let out = convolve_window(&z, &h, (h.len() - 1) / 2, len);
    ComplexBasebandSignal::new(out, fs)
}

// ---- fixtures ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    kind: String,
    #[serde(default)]
    order: Option<u32>,
    #[serde(default)]
    branch: Vec<BranchEntry>,
    #[serde(default)]
    f1: Option<[f64; 2]>,
    #[serde(default)]
    f3: Option<[f64; 2]>,
    #[serde(default)]
    f5: Option<[f64; 2]>,
    #[serde(default)]
    description: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchEntry {
    p: u32,
    /// Interleaved real/imaginary parts.
    taps: Vec<f64>,
}

fn pair(v: Option<[f64; 2]>) -> C64 {
    v.map_or(C64::new(0.0, 0.0), |[re, im]| C64::new(re, im))
}

impl PaModel {
    /// Parses the fixture text format (see the crate README).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: FixtureFile =
            toml::from_str(text).map_err(|e| DpdError::config("pa fixture", e.to_string()))?;
        match f.kind.as_str() {
            "parallel_hammerstein" => {
                let order = f
                    .order
                    .ok_or_else(|| DpdError::config("pa fixture.order", "missing"))?;
                let mut branches = BTreeMap::new();
                for b in f.branch {
                    if b.taps.len() % 2 != 0 || b.taps.is_empty() {
                        return Err(DpdError::config(
                            format!("pa fixture.branch[p={}].taps", b.p),
                            "expected a nonempty list of re, im pairs",
                        ));
                    }
                    let taps = b.taps.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
                    if branches.insert(b.p, taps).is_some() {
                        return Err(DpdError::config(
                            "pa fixture.branch",
                            format!("duplicate order {}", b.p),
                        ));
                    }
                }
                Ok(PaModel::Ph(PhModel::new(order, branches)?))
            }
            "memoryless" => Ok(PaModel::Memoryless(MemorylessPoly::new(
                pair(f.f1),
                pair(f.f3),
                pair(f.f5),
            )?)),
            other => Err(DpdError::config(
                "pa fixture.kind",
                format!("unknown kind '{other}', expected parallel_hammerstein or memoryless"),
            )),
        }
    }

    pub fn to_toml_string(&self) -> String {
        let split = |c: C64| Some([c.re, c.im]);
        let f = match self {
            PaModel::Ph(m) => FixtureFile {
                kind: "parallel_hammerstein".into(),
                order: Some(m.order),
                branch: m
                    .branches
                    .iter()
                    .map(|(&p, t)| BranchEntry {
                        p,
                        taps: t.iter().flat_map(|c| [c.re, c.im]).collect(),
                    })
                    .collect(),
                f1: None,
                f3: None,
                f5: None,
                description: None,
            },
            PaModel::Memoryless(m) => FixtureFile {
                kind: "memoryless".into(),
                order: None,
                branch: vec![],
                f1: split(m.f1),
                f3: split(m.f3),
                f5: split(m.f5),
                description: None,
            },
        };
        toml::to_string(&f).expect("fixture serializes")
    }

    /// Loads a fixture file, or a built-in model named `builtin:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("builtin:")) {
            return builtin_fixture(name);
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| DpdError::config("pa", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

pub const BUILTIN_FIXTURES: [&str; 3] = ["memoryless3", "memoryless5", "ph9"];

/// Shipped synthetic models. Their text forms live in `fixtures/`.
pub fn builtin_fixture(name: &str) -> Result<PaModel> {
    let text = match name {
        "memoryless3" => include_str!("../fixtures/memoryless3.toml"),
        "memoryless5" => include_str!("../fixtures/memoryless5.toml"),
        "ph9" => include_str!("../fixtures/ph9.toml"),
        other => {
            return Err(DpdError::config(
                "pa",
                format!("unknown built-in fixture '{other}', expected one of {BUILTIN_FIXTURES:?}"),
            ))
        }
    };
    PaModel::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::frequency_shift;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sig(v: Vec<C64>) -> ComplexBasebandSignal {
        ComplexBasebandSignal::new(v, 1.0e6).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    fn ph(order: u32, b: &[(u32, Vec<C64>)]) -> PhModel {
        PhModel::new(order, b.iter().cloned().collect()).unwrap()
    }

    #[test]
    fn identity_and_delay() {
        let x = noise(20, 1);
        let m = ph(1, &[(1, vec![c(1.0, 0.0)])]);
        assert_eq!(m.apply_samples(&x), x);
        let d = ph(1, &[(1, vec![c(0.0, 0.0), c(1.0, 0.0)])]);
        let y = d.apply_samples(&x);
        assert_eq!(y[0], c(0.0, 0.0));
        assert_eq!(&y[1..], &x[..19]);
    }

    #[test]
    fn third_order_constant_input() {
        let m = ph(3, &[(1, vec![c(1.0, 0.0)]), (3, vec![c(0.5, 0.0)])]);
        let y = m.apply_samples(&[c(2.0, 0.0); 5]);
        assert!(y.iter().all(|v| (v - c(6.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn memoryless_values() {
        let id = MemorylessPoly::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let x = noise(8, 2);
        assert_eq!(id.apply_samples(&x), x);
        let m = MemorylessPoly::new(c(1.0, 0.0), c(-0.1, 0.0), c(0.0, 0.0)).unwrap();
        assert!((m.eval(c(1.0, 0.0)) - c(0.9, 0.0)).norm() < 1e-15);
        let m = MemorylessPoly::new(c(1.0, 0.0), c(-0.1, 0.0), c(0.01, 0.0)).unwrap();
        assert!((m.eval(c(1.0, 0.0)) - c(0.91, 0.0)).norm() < 1e-15);
        assert!(MemorylessPoly::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn model_validation() {
        let b = |p: u32| -> BTreeMap<u32, Vec<C64>> {
            [(1, vec![c(1.0, 0.0)]), (p, vec![c(1.0, 0.0)])].into()
        };
        assert!(PhModel::new(4, b(3)).is_err());
        assert!(PhModel::new(3, b(5)).is_err());
        assert!(PhModel::new(5, b(2)).is_err());
        assert!(PhModel::new(3, [(3, vec![c(1.0, 0.0)])].into()).is_err());
        assert!(PhModel::new(3, [(1, vec![c(f64::NAN, 0.0)])].into()).is_err());
    }

    #[test]
    fn single_tap_response_is_tone_invariant() {
        let m = ph(
            5,
            &[
                (1, vec![c(1.0, 0.0)]),
                (3, vec![c(0.2, 0.1)]),
                (5, vec![c(0.01, 0.0)]),
            ],
        );
        for sb in ["3+", "3-", "5+"] {
            let r = sub_band_branch_response(&m, sb.parse().unwrap(), 6e6, 50e6).unwrap();
            for (p, t) in &r {
                assert_eq!(t, m.branch(*p).unwrap());
            }
        }
    }

    #[test]
    fn two_tap_response_is_modulated() {
        let m = ph(
            3,
            &[(1, vec![c(1.0, 0.0)]), (3, vec![c(1.0, 0.0), c(1.0, 0.0)])],
        );
        let (f_if, fs) = (6e6, 50e6);
        let r = sub_band_branch_response(&m, SubBandId::plus(3).unwrap(), f_if, fs).unwrap();
        let want = C64::from_polar(1.0, -2.0 * std::f64::consts::PI * 3.0 * f_if / fs);
        assert_eq!(r[&3][0], c(1.0, 0.0));
        assert!((r[&3][1] - want).norm() < 1e-14);
        assert!(!r.contains_key(&1));
        assert!(matches!(
            sub_band_branch_response(&m, SubBandId::plus(5).unwrap(), f_if, fs),
            Err(DpdError::Band(_))
        ));
    }

    #[test]
    fn oracle_zero_second_carrier() {
        let m = ph(
            5,
            &[
                (1, vec![c(1.0, 0.0)]),
                (3, vec![c(0.1, 0.0), c(0.05, 0.0)]),
                (5, vec![c(0.01, 0.0)]),
            ],
        );
        let x1 = sig(noise(200, 3));
        let x2 = sig(vec![c(0.0, 0.0); 200]);
        let y =
            sub_band_output_oracle(&m, &x1, &x2, "3-".parse().unwrap(), 1e5, &[0.25, 0.5, 0.25])
                .unwrap();
        assert!(y.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn oracle_memoryless_constants() {
        let (a, b) = (c(0.3, 0.1), c(-0.2, 0.4));
        let f3 = c(0.05, -0.02);
        let m = ph(3, &[(1, vec![c(1.0, 0.0)]), (3, vec![f3])]);
        let x1 = sig(vec![a; 64]);
        let x2 = sig(vec![b; 64]);
        let y =
            sub_band_output_oracle(&m, &x1, &x2, SubBandId::plus(3).unwrap(), 1e5, &[1.0]).unwrap();
        let want = f3 * b.conj() * a * a;
        assert!(y.samples().iter().all(|v| (v - want).norm() < 1e-15));
    }

    #[test]
    fn lowpass_stopband_reaches_aliased_mirror() {
        // 11+ sits at 132 MHz and 11- wraps around 272 MHz to 8 MHz away
        let (f_if, fs) = (12e6, 272e6);
        assert_eq!(neighbour_distance(11, f_if, fs), 8e6);
        assert_eq!(neighbour_distance(3, f_if, fs), 24e6);
        let lp = sub_band_lowpass(11, 11, 1e6, f_if, fs, 100.0).unwrap();
        assert!(lp.clipped);
        assert!(lp.passband_hz + lp.stopband_hz <= 8e6 + 1e-6);
    }

    /// Brute force: compose the composite, run the PA, mix the sub-band to
    /// DC and lowpass with the same filter.
    #[test]
    fn oracle_matches_brute_force_p7() {
        let fs = 80e6;
        let f_if = 4e6;
        let n = 12_000;
        let lp = sub_band_lowpass(7, 7, 0.5e6, f_if, fs, 120.0).unwrap();
        // narrowband carriers: smoothed noise
        let smooth = |v: Vec<C64>| -> Vec<C64> {
            let h: Vec<C64> = design_lowpass(0.2e6, 120.0, 0.1e6, fs)
                .unwrap()
                .iter()
                .map(|&t| c(t, 0.0))
                .collect();
            convolve_window(&v, &h, (h.len() - 1) / 2, v.len())
                .iter()
                .map(|v| v * 20.0)
                .collect()
        };
        let x1 = sig(smooth(noise(n, 11))).samples().to_vec();
        let x2 = sig(smooth(noise(n, 12))).samples().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut branches = BTreeMap::new();
        for p in [1u32, 3, 5, 7] {
            let s = 0.5f64.powi(((p - 1) / 2) as i32);
            let taps: Vec<C64> = [1.0, 0.3, 0.1]
                .iter()
                .map(|w| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (w * s))
                .collect();
            branches.insert(p, taps);
        }
        let m = PhModel::new(7, branches).unwrap();
        let w = f_if / fs;
        let comp: Vec<C64> = mix_at(&x1, w, 0)
            .iter()
            .zip(mix_at(&x2, -w, 0))
            .map(|(a, b)| a + b)
            .collect();
        let y = ComplexBasebandSignal::new(m.apply_samples(&comp), fs).unwrap();
        let s1 = ComplexBasebandSignal::new(x1, fs).unwrap();
        let s2 = ComplexBasebandSignal::new(x2, fs).unwrap();
        let h: Vec<C64> = lp.taps.iter().map(|&t| c(t, 0.0)).collect();
        let margin = lp.taps.len();
        for sb in ["3+", "3-", "5+", "5-", "7+", "7-"] {
            let sb: SubBandId = sb.parse().unwrap();
            let oracle = sub_band_output_oracle(&m, &s1, &s2, sb, f_if, &lp.taps).unwrap();
            let mixed = frequency_shift(&y, -sb.center_hz(f_if)).unwrap();
            let brute = convolve_window(mixed.samples(), &h, (h.len() - 1) / 2, n);
            let (mut err, mut pow) = (0.0, 0.0);
            for i in margin..n - margin {
                err += (oracle.samples()[i] - brute[i]).norm_sqr();
                pow += brute[i].norm_sqr();
            }
            let nmse = 10.0 * (err / pow).log10();
            assert!(nmse <= -80.0, "{sb}: {nmse:.1} dB");
        }
    }

    #[test]
    fn harmonic_extraction_of_memoryless_third_order() {
        let f3 = c(0.05, -0.02);
        let m = MemorylessPoly::new(c(1.0, 0.0), f3, c(0.0, 0.0)).unwrap();
        let a = noise(10, 21);
        let b = noise(10, 22);
        let y = m.harmonic(&[(1, &a), (-1, &b)], 3, 32).unwrap();
        for n in 0..10 {
            assert!((y[n] - f3 * b[n].conj() * a[n] * a[n]).norm() < 1e-15);
        }
    }

    #[test]
    fn fixtures_parse_and_round_trip() {
        for name in BUILTIN_FIXTURES {
            let m = builtin_fixture(name).unwrap();
            let again = PaModel::from_toml_str(&m.to_toml_string()).unwrap();
            assert_eq!(m, again);
        }
        assert_eq!(builtin_fixture("ph9").unwrap().as_ph().order(), 9);
        assert!(builtin_fixture("nope").is_err());
        assert!(PaModel::from_toml_str("kind = \"laser\"").is_err());
        assert!(PaModel::from_toml_str(
            "kind = \"parallel_hammerstein\"\norder = 3\n[[branch]]\np = 1\ntaps = [1.0]\n"
        )
        .is_err());
    }

    #[test]
    fn fixture_gain_deviation_is_moderate() {
        // memoryless fixtures at their average drive, ph9 near its envelope peaks
        for (name, drive) in [("memoryless3", 2.0f64), ("memoryless5", 2.0), ("ph9", 4.0)] {
            let m = builtin_fixture(name).unwrap().as_ph();
            let x = vec![c(drive.sqrt(), 0.0); 8];
            let g = m.apply_samples(&x)[7].norm() / drive.sqrt();
            let g1: C64 = m.branch(1).unwrap().iter().sum();
            let dev_db = (20.0 * (g / g1.norm()).log10()).abs();
            assert!((0.2..=1.5).contains(&dev_db), "{name}: {dev_db:.2} dB");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn homogeneous_in_taps(seed in 0u64..500, re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let m = builtin_fixture("ph9").unwrap().as_ph();
            let x = noise(64, seed);
            let k = c(re, im);
            let y = m.apply_samples(&x);
            let ys = m.scaled(k).apply_samples(&x);
            for (a, b) in y.iter().zip(&ys) {
                prop_assert!((a * k - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }

        #[test]
        fn odd_order_phase_equivariance(seed in 0u64..500, theta in -3.2f64..3.2) {
            let m = builtin_fixture("ph9").unwrap().as_ph();
            let x = noise(64, seed);
            let r = C64::from_polar(1.0, theta);
            let xr: Vec<C64> = x.iter().map(|v| v * r).collect();
            let y = m.apply_samples(&x);
            let yr = m.apply_samples(&xr);
            for (a, b) in y.iter().zip(&yr) {
                prop_assert!((a * r - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }
    }
}
