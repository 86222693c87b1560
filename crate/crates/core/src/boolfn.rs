//! Boolean functions over Z_2^n and their exact Fourier spectra.
//!
//! Values use the ±1 convention: `-1` is True. Coefficients are stored as
//! integers scaled by `2^n`, so every comparison on this path is exact.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bits::{fmt_binary, parse_binary};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::{seeded_rng, Rational};

/// Largest supported dimension for dense tables.
pub const MAX_N: u32 = 24;

/// An output value, `Plus` = +1 (False), `Minus` = -1 (True).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// `Minus` iff `bit` is set; maps `<a, x>` to `chi_a(x)`.
    #[inline]
    pub fn from_parity(bit: bool) -> Self {
        if bit {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn is_minus(self) -> bool {
        self == Sign::Minus
    }

    /// Sign of a number, zero rounds to `Plus`.
    pub fn of<T: PartialOrd + Default>(v: T) -> Self {
        if v < T::default() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, other: Sign) -> Sign {
        Sign::from_parity(self.is_minus() != other.is_minus())
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        Sign::from_parity(!self.is_minus())
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+1" | "1" => Ok(Sign::Plus),
            "-1" => Ok(Sign::Minus),
            _ => Err(format!("expected +1 or -1, got `{s}`")),
        }
    }
}

fn check_dim(n: u32) -> Result<()> {
    if n > MAX_N {
        return Err(Error::Dimension { n, max: MAX_N });
    }
    Ok(())
}

/// Dense ±1 truth table indexed by the input bitmask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    n: u32,
    values: Vec<i8>,
}

impl BooleanFunction {
    pub fn new(n: u32, values: Vec<i8>) -> Result<Self> {
        check_dim(n)?;
        if values.len() != 1usize << n {
            return Err(Error::TableLength { got: values.len(), expected: 1 << n });
        }
        if let Some(&v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::NotPlusMinusOne(v as i64));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: u32, f: impl Fn(u64) -> Sign) -> Result<Self> {
        check_dim(n)?;
        let values = (0..1u64 << n).map(|x| f(x).value()).collect();
        Ok(Self { n, values })
    }

    pub fn constant(n: u32, s: Sign) -> Result<Self> {
        Self::from_fn(n, |_| s)
    }

    /// Build from an integer truth table: bit `x` of `bits` set means `f(x) = -1`.
    pub fn from_bits(n: u32, bits: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::param("from_bits supports n <= 6"));
        }
        Self::from_fn(n, |x| Sign::from_parity(bits >> x & 1 == 1))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    #[inline]
    pub fn value(&self, x: u64) -> i8 {
        self.values[x as usize]
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Sign {
        Sign::of(self.values[x as usize])
    }

    /// Number of inputs where the two functions differ.
    pub fn disagreements(&self, other: &BooleanFunction) -> u64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count() as u64
    }

    /// Fraction of inputs where the two functions differ.
    pub fn distance(&self, other: &BooleanFunction) -> f64 {
        self.disagreements(other) as f64 / self.len() as f64
    }

    pub fn wht(&self) -> Spectrum {
        self.wht_with(Parallelism::default())
    }

    /// Exact integer transform: `scaled[a] = sum_x f(x) (-1)^<a,x>`.
    pub fn wht_with(&self, par: Parallelism) -> Spectrum {
        let mut scaled: Vec<i64> = self.values.iter().map(|&v| v as i64).collect();
        wht_in_place(par, &mut scaled);
        Spectrum { n: self.n, scaled }
    }

    pub fn to_text(&self) -> String {
        let body: Vec<&str> = self.values.iter().map(|&v| if v == 1 { "+1" } else { "-1" }).collect();
        format!("BF p=2 n={}\n{}\n", self.n, body.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, tokens) = parse_table_text(text)?;
        if header.p != 2 {
            return Err(Error::parse(1, format!("expected p=2, got p={}", header.p)));
        }
        check_dim(header.n)?;
        let expected = 1usize << header.n;
        let values = collect_signs(&tokens, expected)?;
        Self::new(header.n, values)
    }
}

/// Header of a `BF p=<p> n=<n>` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableHeader {
    pub p: u32,
    pub n: u32,
}

/// Parse a `KEY p=.. n=..` header line.
pub(crate) fn parse_header(line: &str, key: &str, line_no: usize) -> Result<TableHeader> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::parse(line_no, format!("expected `{key} p=<p> n=<n>` header")));
    }
    let mut p = None;
    let mut n = None;
    for part in parts {
        let (k, v) =
            part.split_once('=').ok_or_else(|| Error::parse(line_no, format!("malformed header field `{part}`")))?;
        let v: u32 = v.parse().map_err(|_| Error::parse(line_no, format!("bad number `{v}`")))?;
        match k {
            "p" => p = Some(v),
            "n" => n = Some(v),
            _ => return Err(Error::parse(line_no, format!("unknown header field `{k}`"))),
        }
    }
    match (p, n) {
        (Some(p), Some(n)) => Ok(TableHeader { p, n }),
        _ => Err(Error::parse(line_no, "header needs both p= and n=")),
    }
}

/// Split a truth-table file into its header and `(line, token)` pairs.
pub fn parse_table_text(text: &str) -> Result<(TableHeader, Vec<(usize, &str)>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (i, first) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
    let header = parse_header(first, "BF", i + 1)?;
    let tokens = lines.flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t))).collect();
    Ok((header, tokens))
}

pub(crate) fn collect_signs(tokens: &[(usize, &str)], expected: usize) -> Result<Vec<i8>> {
    if tokens.len() != expected {
        let line = tokens.last().map_or(1, |t| t.0);
        return Err(Error::parse(line, format!("expected {expected} values, found {}", tokens.len())));
    }
    tokens.iter().map(|&(line, t)| t.parse::<Sign>().map(Sign::value).map_err(|m| Error::parse(line, m))).collect()
}

/// Side length of the cache-local block in which all small butterfly stages run.
const LOCAL_BLOCK: usize = 1 << 12;

/// In-place unnormalized Walsh-Hadamard butterfly.
pub(crate) fn wht_in_place(par: Parallelism, data: &mut [i64]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let local = len.min(LOCAL_BLOCK);
    exec::for_each_chunk(par, data, local, |c| {
        let mut h = 1;
        while h < c.len() {
            for block in c.chunks_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                butterfly(lo, hi);
            }
            h *= 2;
        }
    });
    let mut h = local;
    while h < len {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            butterfly_split(par, lo, hi);
        }
        h *= 2;
    }
}

#[inline]
fn butterfly(lo: &mut [i64], hi: &mut [i64]) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = x + y;
        *b = x - y;
    }
}

fn butterfly_split(par: Parallelism, lo: &mut [i64], hi: &mut [i64]) {
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        lo.par_chunks_mut(LOCAL_BLOCK).zip(hi.par_chunks_mut(LOCAL_BLOCK)).for_each(|(a, b)| butterfly(a, b));
        return;
    }
    let _ = par;
    butterfly(lo, hi);
}

/// Exact Fourier spectrum: `f^(a) = scaled[a] / 2^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Spectrum {
    n: u32,
    scaled: Vec<i64>,
}

impl Spectrum {
    /// Wrap a scaled table; only the length is checked.
    pub fn from_scaled(n: u32, scaled: Vec<i64>) -> Result<Self> {
        check_dim(n)?;
        if scaled.len() != 1usize << n {
            return Err(Error::TableLength { got: scaled.len(), expected: 1 << n });
        }
        Ok(Self { n, scaled })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn scaled(&self) -> &[i64] {
        &self.scaled
    }

    #[inline]
    pub fn scaled_at(&self, alpha: u64) -> i64 {
        self.scaled[alpha as usize]
    }

    /// `2^n`, the scale denominator.
    pub fn scale(&self) -> i64 {
        1i64 << self.n
    }

    pub fn coeff(&self, alpha: u64) -> Rational {
        Rational::new(self.scaled_at(alpha), self.scale())
    }

    pub fn coeff_f64(&self, alpha: u64) -> f64 {
        self.scaled_at(alpha) as f64 / self.scale() as f64
    }

    /// Signed constant coefficient `f^(0)`.
    pub fn mean(&self) -> Rational {
        self.coeff(0)
    }

    /// `|f^(0)|`.
    pub fn bias(&self) -> Rational {
        Rational::new(self.scaled[0].abs(), self.scale())
    }

    /// `sum |scaled|`, i.e. `2^n` times the spectral norm.
    pub fn l1_scaled(&self) -> i64 {
        self.scaled.iter().map(|v| v.abs()).sum()
    }

    pub fn spectral_norm(&self) -> Rational {
        Rational::new(self.l1_scaled(), self.scale())
    }

    pub fn spectral_norm_f64(&self) -> f64 {
        self.l1_scaled() as f64 / self.scale() as f64
    }

    pub fn sparsity(&self) -> usize {
        self.scaled.iter().filter(|&&v| v != 0).count()
    }

    /// `sum scaled^2`, equal to `4^n` for a Boolean spectrum.
    pub fn parseval_sum(&self) -> i128 {
        self.scaled.iter().map(|&v| (v as i128) * (v as i128)).sum()
    }

    /// `Some(s)` when the function is the constant `s`.
    pub fn constant_value(&self) -> Option<Sign> {
        if self.scaled[0].abs() == self.scale() {
            Some(Sign::of(self.scaled[0]))
        } else {
            None
        }
    }

    /// `Some((a, s))` when the function is `s * chi_a`.
    pub fn signed_character(&self) -> Option<(u64, Sign)> {
        let scale = self.scale();
        self.scaled.iter().position(|v| v.abs() == scale).map(|a| (a as u64, Sign::of(self.scaled[a])))
    }

    /// Index of the largest coefficient by (magnitude desc, mask asc).
    pub fn top(&self) -> u64 {
        let mut best = 0usize;
        for (i, v) in self.scaled.iter().enumerate() {
            if v.abs() > self.scaled[best].abs() {
                best = i;
            }
        }
        best as u64
    }

    /// Indices of the two largest coefficients by (magnitude desc, mask asc).
    pub fn top_two(&self) -> Result<(u64, u64)> {
        if self.sparsity() < 2 {
            return Err(Error::TooSparse);
        }
        let mut first: Option<usize> = None;
        let mut second: Option<usize> = None;
        for (i, v) in self.scaled.iter().enumerate() {
            let m = v.abs();
            if m == 0 {
                continue;
            }
            match first {
                Some(f) if self.scaled[f].abs() >= m => {
                    if second.is_none_or(|s| self.scaled[s].abs() < m) {
                        second = Some(i);
                    }
                }
                _ => {
                    second = first;
                    first = Some(i);
                }
            }
        }
        Ok((first.unwrap() as u64, second.unwrap() as u64))
    }

    /// `sum_g scaled[g] * scaled[delta ^ g]`; zero for every Boolean spectrum.
    pub fn convolution_check(&self, delta: u64) -> Result<i128> {
        if delta == 0 {
            return Err(Error::ZeroShift);
        }
        if delta >> self.n != 0 {
            return Err(Error::FormOutOfRange(delta));
        }
        Ok(self.scaled.iter().enumerate().map(|(g, &v)| v as i128 * self.scaled[g ^ delta as usize] as i128).sum())
    }

    pub fn inverse(&self) -> Result<BooleanFunction> {
        self.inverse_with(Parallelism::default())
    }

    /// Inverse transform; fails with `NotBoolean` if any value is not ±1.
    pub fn inverse_with(&self, par: Parallelism) -> Result<BooleanFunction> {
        let mut t = self.scaled.clone();
        wht_in_place(par, &mut t);
        let scale = self.scale();
        let values = t
            .iter()
            .map(|&v| match v {
                v if v == scale => Ok(1i8),
                v if v == -scale => Ok(-1i8),
                _ => Err(Error::NotBoolean),
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(BooleanFunction { n: self.n, values })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("SPEC p=2 n={}\n", self.n);
        for (a, &v) in self.scaled.iter().enumerate().filter(|(_, v)| **v != 0) {
            out.push_str(&format!("{} {}\n", fmt_binary(a as u64, self.n), v));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i, first) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let header = parse_header(first, "SPEC", i + 1)?;
        if header.p != 2 {
            return Err(Error::parse(i + 1, "expected p=2"));
        }
        check_dim(header.n)?;
        let mut scaled = vec![0i64; 1 << header.n];
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(a), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(i + 1, "expected `<alpha> <scaled>`"));
            };
            let alpha = parse_binary(a)
                .filter(|_| a.len() == header.n as usize)
                .ok_or_else(|| Error::parse(i + 1, format!("bad mask `{a}`")))?;
            scaled[alpha as usize] = v.parse().map_err(|_| Error::parse(i + 1, format!("bad integer `{v}`")))?;
        }
        Ok(Self { n: header.n, scaled })
    }
}

/// Test-function families for [`generate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionKind {
    And,
    Or,
    /// Requires odd `n`.
    Majority,
    Parity {
        mask: u64,
    },
    /// `1 - 2*1_V` for a random linear subspace `V` of co-dimension `k`.
    SubspaceIndicator {
        k: u32,
    },
    /// The function computed by a random parity tree with `size` leaves.
    RandomPdt {
        size: usize,
    },
    Random,
}

/// Deterministic generator of test functions.
pub fn generate(kind: &FunctionKind, n: u32, seed: u64) -> Result<BooleanFunction> {
    check_dim(n)?;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    match *kind {
        FunctionKind::And => BooleanFunction::from_fn(n, |x| Sign::from_parity(x == (1 << n) - 1)),
        FunctionKind::Or => BooleanFunction::from_fn(n, |x| Sign::from_parity(x != 0)),
        FunctionKind::Majority => {
            if n.is_multiple_of(2) {
                return Err(Error::param("majority needs odd n"));
            }
            BooleanFunction::from_fn(n, |x| Sign::from_parity(x.count_ones() > n / 2))
        }
        FunctionKind::Parity { mask } => {
            if mask >> n != 0 {
                return Err(Error::FormOutOfRange(mask));
            }
            BooleanFunction::from_fn(n, |x| Sign::from_parity(crate::bits::parity(mask & x)))
        }
        FunctionKind::SubspaceIndicator { k } => {
            if k > n {
                return Err(Error::param(format!("co-dimension {k} exceeds n={n}")));
            }
            let forms = random_independent_forms(n, k, seed);
            BooleanFunction::from_fn(n, |x| Sign::from_parity(forms.iter().all(|&g| !crate::bits::parity(g & x))))
        }
        FunctionKind::RandomPdt { size } => {
            let tree = crate::pdt::random_tree(n, size, seed)?;
            Ok(tree.truth_table())
        }
        FunctionKind::Random => {
            let mut rng = seeded_rng(seed);
            let values = (0..1u64 << n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            BooleanFunction::new(n, values)
        }
    }
}

/// `k` random linearly independent nonzero forms on `n` variables.
pub(crate) fn random_independent_forms(n: u32, k: u32, seed: u64) -> Vec<u64> {
    let mut rng = seeded_rng(seed);
    let mut restriction = crate::restriction::AffineRestriction::new(n);
    while restriction.codim() < k as usize {
        let g = rng.random_range(1..1u64 << n);
        if let Ok(form) = crate::restriction::LinearForm::new(g) {
            let _ = restriction.push(form, Sign::Plus);
        }
    }
    restriction.constraints().iter().map(|c| c.0.mask()).collect()
}
