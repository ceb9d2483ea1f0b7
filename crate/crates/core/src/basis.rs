//! Static-nonlinear basis functions of the intermodulation sub-bands and
//! their orthonormalization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DpdError, Result};
use crate::signals::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// One IM sub-band, centered at sign * order * f_IF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubBandId {
    order: u32,
    sign: Sign,
}

pub const MAX_SUB_BAND_ORDER: u32 = 11;
pub const MAX_BASIS_ORDER: u32 = 11;

impl SubBandId {
    pub fn new(order: u32, sign: Sign) -> Result<Self> {
        if order.is_multiple_of(2) || !(3..=MAX_SUB_BAND_ORDER).contains(&order) {
            return Err(DpdError::Order(format!(
                "sub-band order must be odd and in 3..={MAX_SUB_BAND_ORDER}, got {order}"
            )));
        }
        Ok(Self { order, sign })
    }

    pub fn plus(order: u32) -> Result<Self> {
        Self::new(order, Sign::Plus)
    }

    pub fn minus(order: u32) -> Result<Self> {
        Self::new(order, Sign::Minus)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Signed harmonic index of the sub-band center (multiples of f_IF).
    pub fn harmonic(&self) -> i32 {
        match self.sign {
            Sign::Plus => self.order as i32,
            Sign::Minus => -(self.order as i32),
        }
    }

    pub fn center_hz(&self, f_if_hz: f64) -> f64 {
        self.harmonic() as f64 * f_if_hz
    }

    /// Number of basis functions for DPD order `q`.
    pub fn basis_count(&self, q: u32) -> usize {
        ((q - self.order) / 2 + 1) as usize
    }
}

impl fmt::Display for SubBandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{}{}", self.order, s)
    }
}

impl FromStr for SubBandId {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s
            .strip_prefix("IM")
            .or_else(|| s.strip_prefix("im"))
            .unwrap_or(s);
        let (num, sign) = match s.chars().last() {
            Some('+') => (&s[..s.len() - 1], Sign::Plus),
            Some('-') => (&s[..s.len() - 1], Sign::Minus),
            _ => {
                return Err(DpdError::Order(format!(
                    "sub-band '{s}' needs a trailing + or -"
                )))
            }
        };
        let order: u32 = num
            .parse()
            .map_err(|_| DpdError::Order(format!("bad sub-band order '{num}'")))?;
        SubBandId::new(order, sign)
    }
}

impl Serialize for SubBandId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubBandId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Integer weights of the polynomial factor multiplying the leading
/// product in u_{m+,p}, as (coefficient, power of |x1|^2, power of |x2|^2).
fn factor_table(m: u32, p: u32) -> &'static [(f64, i32, i32)] {
    match (m, p) {
        (_, p) if p == m => &[(1.0, 0, 0)],
        (3, 5) => &[(2.0, 1, 0), (3.0, 0, 1)],
        (3, 7) => &[(3.0, 2, 0), (6.0, 0, 2), (12.0, 1, 1)],
        (3, 9) => &[(4.0, 3, 0), (10.0, 0, 3), (30.0, 2, 1), (40.0, 1, 2)],
        (3, 11) => &[
            (5.0, 4, 0),
            (15.0, 0, 4),
            (60.0, 3, 1),
            (100.0, 1, 3),
            (150.0, 2, 2),
        ],
        (5, 7) => &[(4.0, 0, 1), (3.0, 1, 0)],
        (5, 9) => &[(10.0, 0, 2), (6.0, 2, 0), (20.0, 1, 1)],
        (5, 11) => &[(20.0, 0, 3), (10.0, 3, 0), (75.0, 1, 2), (60.0, 2, 1)],
        (7, 9) => &[(5.0, 0, 1), (4.0, 1, 0)],
        (7, 11) => &[(15.0, 0, 2), (10.0, 2, 0), (30.0, 1, 1)],
        (9, 11) => &[(6.0, 0, 1), (5.0, 1, 0)],
        _ => unreachable!("no basis function for sub-band {m}, order {p}"),
    }
}

/// Basis columns u_{m,p}(n) for p = m, m+2, ..., Q.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub sub_band: SubBandId,
    pub q: u32,
    /// One column per order, each of equal length.
    pub columns: Vec<Vec<C64>>,
    pub rate_hz: f64,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn orders(&self) -> impl Iterator<Item = u32> {
        (self.sub_band.order..=self.q).step_by(2)
    }

    /// Columns restricted to samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BasisSet {
        BasisSet {
            sub_band: self.sub_band,
            q: self.q,
            columns: self
                .columns
                .iter()
                .map(|c| c[start..end].to_vec())
                .collect(),
            rate_hz: self.rate_hz,
        }
    }
}

pub(crate) fn check_order(sub_band: SubBandId, q: u32) -> Result<()> {
    if q.is_multiple_of(2) || q < sub_band.order() || q > MAX_BASIS_ORDER {
        return Err(DpdError::Order(format!(
            "DPD order {q} must be odd, >= {} and <= {MAX_BASIS_ORDER}",
            sub_band.order()
        )));
    }
    Ok(())
}

/// Generates the SNL basis for `sub_band` up to order `q`. The negative
/// sub-band is obtained by exchanging the carriers.
pub fn gen_basis(
    x1: &[C64],
    x2: &[C64],
    sub_band: SubBandId,
    q: u32,
    rate_hz: f64,
) -> Result<BasisSet> {
    check_order(sub_band, q)?;
    if x1.len() != x2.len() {
        return Err(DpdError::Shape(format!(
            "carrier lengths differ: {} vs {}",
            x1.len(),
            x2.len()
        )));
    }
    let (a, b) = match sub_band.sign() {
        Sign::Plus => (x1, x2),
        Sign::Minus => (x2, x1),
    };
    let m = sub_band.order();
    let k = (m - 1) / 2;
    let orders: Vec<u32> = (m..=q).step_by(2).collect();
    let mut columns = vec![Vec::with_capacity(a.len()); orders.len()];
    for (&xa, &xb) in a.iter().zip(b) {
        // (x_b^*)^k x_a^(k+1)
        let lead = xb.conj().powu(k) * xa.powu(k + 1);
        let pa = xa.norm_sqr();
        let pb = xb.norm_sqr();
        for (col, &p) in columns.iter_mut().zip(&orders) {
            let f: f64 = factor_table(m, p)
                .iter()
                .map(|&(c, ia, ib)| c * pa.powi(ia) * pb.powi(ib))
                .sum();
            col.push(lead * f);
        }
    }
    Ok(BasisSet {
        sub_band,
        q,
        columns,
        rate_hz,
    })
}

/// Lower-triangular map s = W u with real positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoTransform {
    /// Row-major n x n.
    w: Vec<C64>,
    n: usize,
}

impl OrthoTransform {
    pub fn identity(n: usize) -> Self {
        let mut w = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            w[i * n + i] = C64::new(1.0, 0.0);
        }
        Self { w, n }
    }

    /// Builds a transform from row-major entries; the upper triangle must be zero.
    pub fn from_rows(n: usize, w: Vec<C64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(DpdError::Shape(format!(
                "expected {} entries, got {}",
                n * n,
                w.len()
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                if w[i * n + j] != C64::new(0.0, 0.0) {
                    return Err(DpdError::Shape("transform is not lower triangular".into()));
                }
            }
        }
        Ok(Self { w, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.w[row * self.n + col]
    }

    pub fn rows(&self) -> &[C64] {
        &self.w
    }

    fn compose(&self, inner: &OrthoTransform) -> OrthoTransform {
        let n = self.n;
        let mut w = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = C64::new(0.0, 0.0);
                for k in j..=i {
                    acc += self.get(i, k) * inner.get(k, j);
                }
                w[i * n + j] = acc;
            }
        }
        OrthoTransform { w, n }
    }
}

/// Basis columns s = W u, mutually orthogonal with unit RMS.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasisSet {
    pub sub_band: SubBandId,
    pub q: u32,
    pub columns: Vec<Vec<C64>>,
    pub rate_hz: f64,
}

impl OrthoBasisSet {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    // <a, b> = mean(a^* b)
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() / a.len() as f64
}

fn rms(a: &[C64]) -> f64 {
    (a.iter().map(|v| v.norm_sqr()).sum::<f64>() / a.len() as f64).sqrt()
}

/// Modified Gram-Schmidt with a second projection pass. Returns W such that
/// W u has orthonormal columns under <a, b> = mean(a^* b).
fn gram_schmidt(columns: &[Vec<C64>]) -> Result<OrthoTransform> {
    let n = columns.len();
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut w_rows: Vec<Vec<C64>> = Vec::with_capacity(n);
    for (i, col) in columns.iter().enumerate() {
        let col_rms = rms(col);
        let mut v = col.clone();
        let mut wi = vec![C64::new(0.0, 0.0); n];
        wi[i] = C64::new(1.0, 0.0);
        for _pass in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let r = inner(qj, &v);
                v.iter_mut().zip(qj).for_each(|(a, b)| *a -= r * b);
                for k in 0..=j {
                    wi[k] -= r * w_rows[j][k];
                }
            }
        }
        let res = rms(&v);
        if !(res >= 1e-12 * col_rms) || col_rms == 0.0 {
            return Err(DpdError::DegenerateBasis {
                column: i,
                residual_rms: res,
                column_rms: col_rms,
            });
        }
        v.iter_mut().for_each(|a| *a /= res);
        wi.iter_mut().for_each(|a| *a /= res);
        q.push(v);
        w_rows.push(wi);
    }
    let mut w = Vec::with_capacity(n * n);
    for (i, row) in w_rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            w.push(if j > i { C64::new(0.0, 0.0) } else { v });
        }
    }
    // diagonal is real positive by construction; clear rounding residue
    for i in 0..n {
        let d = w[i * n + i];
        w[i * n + i] = C64::new(d.re, 0.0);
    }
    Ok(OrthoTransform { w, n })
}

/// Orthonormalizes the basis. The returned columns are exactly
/// `apply_transform(W, basis)`.
pub fn orthogonalize(basis: &BasisSet) -> Result<(OrthoBasisSet, OrthoTransform)> {
    if basis.is_empty() {
        return Err(DpdError::Shape("basis has no samples".into()));
    }
    let w0 = gram_schmidt(&basis.columns)?;
    let s0 = apply_transform(&w0, basis)?;
    // one refinement sweep on the nearly orthonormal columns
    let w1 = gram_schmidt(&s0.columns)?;
    let w = w1.compose(&w0);
    let s = apply_transform(&w, basis)?;
    Ok((s, w))
}

/// s(n) = W u(n) with a frozen transform.
pub fn apply_transform(w: &OrthoTransform, basis: &BasisSet) -> Result<OrthoBasisSet> {
    if w.dim() != basis.n_columns() {
        return Err(DpdError::Shape(format!(
            "transform is {0}x{0} but the basis has {1} columns",
            w.dim(),
            basis.n_columns()
        )));
    }
    let n = w.dim();
    let len = basis.len();
    let mut columns = vec![vec![C64::new(0.0, 0.0); len]; n];
    for (i, out) in columns.iter_mut().enumerate() {
        for j in 0..=i {
            let wij = w.get(i, j);
            if wij == C64::new(0.0, 0.0) {
                continue;
            }
            out.iter_mut()
                .zip(&basis.columns[j])
                .for_each(|(o, u)| *o += wij * u);
        }
    }
    Ok(OrthoBasisSet {
        sub_band: basis.sub_band,
        q: basis.q,
        columns,
        rate_hz: basis.rate_hz,
    })
}

/// Largest |<s_i, s_j>| / (|s_i| |s_j|) over i != j.
pub fn max_cross_correlation(columns: &[Vec<C64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let c = inner(&columns[i], &columns[j]).norm() / (rms(&columns[i]) * rms(&columns[j]));
            worst = worst.max(c);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn noise(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn parse_and_display() {
        let b: SubBandId = "3+".parse().unwrap();
        assert_eq!(b, SubBandId::plus(3).unwrap());
        assert_eq!("IM7-".parse::<SubBandId>().unwrap().to_string(), "7-");
        assert!("4+".parse::<SubBandId>().is_err());
        assert!("13+".parse::<SubBandId>().is_err());
        assert!("3".parse::<SubBandId>().is_err());
    }

    #[test]
    fn zero_second_carrier_gives_zero_columns() {
        let x1 = noise(64, 1);
        let x2 = vec![c(0.0, 0.0); 64];
        for m in [3, 5, 7, 9, 11] {
            let b = gen_basis(&x1, &x2, SubBandId::plus(m).unwrap(), 11, 1.0).unwrap();
            assert!(b.columns.iter().flatten().all(|v| *v == c(0.0, 0.0)));
        }
    }

    #[test]
    fn hand_evaluated_constants() {
        let ones = vec![c(1.0, 0.0); 4];
        let b = gen_basis(&ones, &ones, SubBandId::plus(3).unwrap(), 7, 1.0).unwrap();
        assert_eq!(b.n_columns(), 3);
        assert_eq!(b.columns[0][0], c(1.0, 0.0));
        assert_eq!(b.columns[1][0], c(5.0, 0.0));
        assert_eq!(b.columns[2][0], c(21.0, 0.0));

        let twos = vec![c(2.0, 0.0); 4];
        let b = gen_basis(&twos, &ones, SubBandId::plus(5).unwrap(), 7, 1.0).unwrap();
        assert_eq!(b.columns[0][0], c(8.0, 0.0));
        assert_eq!(b.columns[1][0], c(128.0, 0.0));
    }

    #[test]
    fn order_errors() {
        let x = vec![c(1.0, 0.0); 4];
        assert!(gen_basis(&x, &x, SubBandId::plus(5).unwrap(), 3, 1.0).is_err());
        assert!(gen_basis(&x, &x, SubBandId::plus(3).unwrap(), 6, 1.0).is_err());
        assert!(SubBandId::plus(4).is_err());
    }

    /// Brute-force harmonic extraction: the m-th Fourier coefficient in theta of
    /// |x|^{p-1} x with x = a e^{j theta} + b e^{-j theta}.
    fn harmonic_oracle(a: C64, b: C64, m: i32, p: u32) -> C64 {
        let k = 64;
        let mut acc = c(0.0, 0.0);
        for i in 0..k {
            let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            let x = a * C64::from_polar(1.0, th) + b * C64::from_polar(1.0, -th);
            acc +=
                x * x.norm_sqr().powi((p as i32 - 1) / 2) * C64::from_polar(1.0, -(m as f64) * th);
        }
        acc / k as f64
    }

    #[test]
    fn tables_match_harmonic_extraction() {
        let x1 = noise(16, 3);
        let x2 = noise(16, 4);
        for m in [3u32, 5, 7, 9, 11] {
            for sign in [Sign::Plus, Sign::Minus] {
                let sb = SubBandId::new(m, sign).unwrap();
                let b = gen_basis(&x1, &x2, sb, 11, 1.0).unwrap();
                for (col, p) in b.columns.iter().zip(b.orders()) {
                    for n in 0..16 {
                        let want = harmonic_oracle(x1[n], x2[n], sb.harmonic(), p);
                        assert!(
                            (col[n] - want).norm() <= 1e-12 * (1.0 + want.norm()),
                            "m={m} p={p}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_column_normalization() {
        let u = BasisSet {
            sub_band: SubBandId::plus(3).unwrap(),
            q: 3,
            columns: vec![vec![c(2.0, 0.0), c(0.0, 2.0), c(-2.0, 0.0), c(0.0, -2.0)]],
            rate_hz: 1.0,
        };
        let (s, w) = orthogonalize(&u).unwrap();
        assert!((w.get(0, 0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((rms(&s.columns[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_columns_are_degenerate() {
        let col = noise(100, 9);
        let u = BasisSet {
            sub_band: SubBandId::plus(3).unwrap(),
            q: 5,
            columns: vec![col.clone(), col],
            rate_hz: 1.0,
        };
        assert!(matches!(
            orthogonalize(&u),
            Err(DpdError::DegenerateBasis { column: 1, .. })
        ));
    }

    #[test]
    fn random_basis_is_orthonormalized() {
        let cols: Vec<Vec<C64>> = (0..5).map(|i| noise(2000, 100 + i)).collect();
        let u = BasisSet {
            sub_band: SubBandId::plus(3).unwrap(),
            q: 11,
            columns: cols,
            rate_hz: 1.0,
        };
        let (s, w) = orthogonalize(&u).unwrap();
        assert!(max_cross_correlation(&s.columns) <= 1e-8);
        for col in &s.columns {
            assert!((rms(col) - 1.0).abs() < 1e-10);
        }
        for i in 0..5 {
            assert_eq!(w.get(i, i).im, 0.0);
            assert!(w.get(i, i).re > 0.0);
            for j in i + 1..5 {
                assert_eq!(w.get(i, j), c(0.0, 0.0));
            }
        }
        assert_eq!(apply_transform(&w, &u).unwrap(), s);
    }

    #[test]
    fn real_basis_is_orthonormalized_despite_conditioning() {
        let x1 = noise(20_000, 31);
        let x2 = noise(20_000, 32);
        let b = gen_basis(&x1, &x2, SubBandId::plus(3).unwrap(), 11, 1.0).unwrap();
        let (s, _) = orthogonalize(&b).unwrap();
        assert!(max_cross_correlation(&s.columns) <= 1e-8);
    }

    #[test]
    fn identity_transform_is_noop() {
        let x1 = noise(50, 1);
        let x2 = noise(50, 2);
        let b = gen_basis(&x1, &x2, SubBandId::minus(3).unwrap(), 7, 1.0).unwrap();
        let s = apply_transform(&OrthoTransform::identity(3), &b).unwrap();
        assert_eq!(s.columns, b.columns);
        assert!(apply_transform(&OrthoTransform::identity(2), &b).is_err());
    }

    #[test]
    fn frozen_transform_generalizes_to_fresh_block() {
        // sampling error of the Gram matrix is amplified by conditioning, so
        // the bound needs long blocks and holds only for low orders
        let n = 1_000_000;
        let x1 = noise(2 * n, 41);
        let x2 = noise(2 * n, 42);
        let b = gen_basis(&x1, &x2, SubBandId::plus(3).unwrap(), 5, 1.0).unwrap();
        let (_, w) = orthogonalize(&b.slice(0, n)).unwrap();
        let fresh = apply_transform(&w, &b.slice(n, 2 * n)).unwrap();
        let cc = max_cross_correlation(&fresh.columns);
        assert!(cc <= 1e-2, "{cc}");
    }

    #[test]
    fn projection_span_is_preserved() {
        let x1 = noise(3000, 51);
        let x2 = noise(3000, 52);
        let target = noise(3000, 53);
        let b = gen_basis(&x1, &x2, SubBandId::plus(5).unwrap(), 9, 1.0).unwrap();
        let (s, _) = orthogonalize(&b).unwrap();
        // projection onto orthonormal columns
        let mut proj_s = vec![c(0.0, 0.0); 3000];
        for col in &s.columns {
            let r = inner(col, &target);
            proj_s.iter_mut().zip(col).for_each(|(p, v)| *p += r * v);
        }
        // projection onto raw columns by normal equations (Gaussian elimination)
        let n = b.n_columns();
        let mut g = vec![vec![c(0.0, 0.0); n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = inner(&b.columns[i], &b.columns[j]);
            }
            g[i][n] = inner(&b.columns[i], &target);
        }
        for k in 0..n {
            let piv = g[k][k];
            for j in k..=n {
                g[k][j] /= piv;
            }
            for i in 0..n {
                if i != k {
                    let f = g[i][k];
                    for j in k..=n {
                        let v = g[k][j];
                        g[i][j] -= f * v;
                    }
                }
            }
        }
        let mut proj_u = vec![c(0.0, 0.0); 3000];
        for (i, col) in b.columns.iter().enumerate() {
            proj_u
                .iter_mut()
                .zip(col)
                .for_each(|(p, v)| *p += g[i][n] * v);
        }
        let err: f64 = proj_s
            .iter()
            .zip(&proj_u)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let norm: f64 = proj_u.iter().map(|v| v.norm_sqr()).sum();
        assert!((err / norm).sqrt() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sign_symmetry(seed in 0u64..1000, m in prop::sample::select(vec![3u32, 5, 7, 9, 11])) {
            let x1 = noise(32, seed);
            let x2 = noise(32, seed + 7);
            let neg = gen_basis(&x1, &x2, SubBandId::minus(m).unwrap(), 11, 1.0).unwrap();
            let pos = gen_basis(&x2, &x1, SubBandId::plus(m).unwrap(), 11, 1.0).unwrap();
            prop_assert_eq!(neg.columns, pos.columns);
        }

        #[test]
        fn degree_homogeneity(seed in 0u64..1000, scale in 0.25f64..4.0) {
            let x1 = noise(16, seed);
            let x2 = noise(16, seed + 3);
            let s1: Vec<C64> = x1.iter().map(|v| v * scale).collect();
            let s2: Vec<C64> = x2.iter().map(|v| v * scale).collect();
            let b = gen_basis(&x1, &x2, SubBandId::plus(3).unwrap(), 11, 1.0).unwrap();
            let bs = gen_basis(&s1, &s2, SubBandId::plus(3).unwrap(), 11, 1.0).unwrap();
            for ((col, cols), p) in b.columns.iter().zip(&bs.columns).zip(b.orders()) {
                let f = scale.powi(p as i32);
                for (u, v) in col.iter().zip(cols) {
                    prop_assert!((u * f - v).norm() <= 1e-12 * (u * f).norm().max(1e-300));
                }
            }
        }
    }
}
