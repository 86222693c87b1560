//! Boolean functions over Z_p^n for an odd prime `p`.
//!
//! Points and forms are integers in base `p`, digit `i` being coordinate
//! `i + 1`. Spectra are complex doubles; every zero or equality test uses the
//! tolerance [`TAU`].

mod km;
mod lemmas;
mod tree;

pub use km::{estimate_coeffs_p, km_search_p, km_search_p_with, EstimateP, SearchResultP, ZpOracle, ZpTableOracle};
pub use lemmas::{
    angle_between, convolution_check_p, largest_coeff_inequality, main_lemma_step_p, overcount_check, triangle_gap,
    StepReportP, TriangleGap, C0,
};
pub use tree::{
    approx_depth_cap_p, codim_bound_p, exact_size_bound_log2_p, find_constant_subspace_p, round_to_ptree,
    sparse_depth_bound_p, synth_approx_p, synth_pdt_p, synth_pdt_p_with, synth_sparse_p, PNode, PTree, ZpChain, ZpLeaf,
    ZpStep,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::boolfn::{collect_signs, parse_table_text, Sign};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::seeded_rng;

/// Zero / equality tolerance on the Z_p path.
pub const TAU: f64 = 1e-9;

/// Largest supported table size.
pub const MAX_POINTS: u64 = 1 << 20;

/// `c1(p) = (1 - cos(pi/p)) / 6`.
pub fn c1(p: u32) -> f64 {
    (1.0 - (PI / p as f64).cos()) / 6.0
}

/// `C(theta) = (1 - cos theta) / 2`.
pub fn triangle_constant(theta: f64) -> f64 {
    (1.0 - theta.cos()) / 2.0
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Base-`p` arithmetic on `n`-digit vectors packed into integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Space {
    p: u32,
    n: u32,
}

impl Space {
    pub fn new(p: u32, n: u32) -> Result<Self> {
        if !(3..=13).contains(&p) || !is_prime(p) {
            return Err(Error::param(format!("p must be an odd prime up to 13, got {p}")));
        }
        if (p as u64).checked_pow(n).is_none_or(|s| s > MAX_POINTS) {
            return Err(Error::param(format!("{p}^{n} exceeds the table limit")));
        }
        Ok(Self { p, n })
    }

    pub fn p(self) -> u32 {
        self.p
    }

    pub fn n(self) -> u32 {
        self.n
    }

    pub fn size(self) -> u64 {
        (self.p as u64).pow(self.n)
    }

    /// The same prime with `n - 1` digits.
    pub fn reduced(self) -> Self {
        Self { p: self.p, n: self.n - 1 }
    }

    pub fn pow(self, i: u32) -> u64 {
        (self.p as u64).pow(i)
    }

    #[inline]
    pub fn digit(self, x: u64, i: u32) -> u32 {
        (x / self.pow(i) % self.p as u64) as u32
    }

    pub fn digits(self, mut x: u64) -> Vec<u32> {
        (0..self.n)
            .map(|_| {
                let d = (x % self.p as u64) as u32;
                x /= self.p as u64;
                d
            })
            .collect()
    }

    pub fn from_digits(self, d: &[u32]) -> u64 {
        d.iter().rev().fold(0u64, |acc, &v| acc * self.p as u64 + v as u64)
    }

    /// `<a, x> mod p`.
    #[inline]
    pub fn inner(self, mut a: u64, mut x: u64) -> u32 {
        let p = self.p as u64;
        let mut acc = 0u64;
        while a != 0 && x != 0 {
            acc += (a % p) * (x % p);
            a /= p;
            x /= p;
        }
        (acc % p) as u32
    }

    /// `c a + b`, digit-wise mod p.
    pub fn axpy(self, c: u32, a: u64, b: u64) -> u64 {
        let p = self.p as u64;
        let (mut a, mut b) = (a, b);
        let mut out = 0u64;
        let mut w = 1u64;
        for _ in 0..self.n {
            out += ((c as u64 * (a % p) + b % p) % p) * w;
            a /= p;
            b /= p;
            w *= p;
        }
        out
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        self.axpy(1, a, b)
    }

    pub fn sub(self, a: u64, b: u64) -> u64 {
        self.axpy(self.p - 1, b, a)
    }

    pub fn neg(self, a: u64) -> u64 {
        self.axpy(self.p - 1, a, 0)
    }

    pub fn scale(self, c: u32, a: u64) -> u64 {
        self.axpy(c, a, 0)
    }

    /// Insert digit `d` at position `pos`.
    pub fn insert_digit(self, x: u64, pos: u32, d: u32) -> u64 {
        let w = self.pow(pos);
        let (low, high) = (x % w, x / w);
        (high * self.p as u64 + d as u64) * w + low
    }

    /// Delete the digit at position `pos`.
    pub fn remove_digit(self, x: u64, pos: u32) -> u64 {
        let w = self.pow(pos);
        let (low, high) = (x % w, x / (w * self.p as u64));
        high * w + low
    }

    /// Position of the lowest nonzero digit.
    pub fn pivot(self, a: u64) -> Option<u32> {
        (0..self.n).find(|&i| self.digit(a, i) != 0)
    }

    pub fn inv(self, d: u32) -> u32 {
        (1..self.p).find(|&c| c * d % self.p == 1).expect("nonzero digit in a prime field")
    }

    /// Width-`n` digit string, most significant first.
    pub fn fmt(self, a: u64) -> String {
        (0..self.n).rev().map(|i| char::from_digit(self.digit(a, i), 36).expect("digit below 36")).collect()
    }

    pub fn parse(self, s: &str) -> Option<u64> {
        if s.chars().count() != self.n as usize {
            return None;
        }
        let digits: Option<Vec<u32>> = s.chars().rev().map(|c| c.to_digit(36).filter(|&d| d < self.p)).collect();
        Some(self.from_digits(&digits?))
    }

    /// `omega^k` for `k` in `0..p`.
    pub fn roots(self) -> Vec<Complex64> {
        (0..self.p).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / self.p as f64)).collect()
    }
}

/// ±1 table over Z_p^n.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZpFunction {
    space: Space,
    values: Vec<i8>,
}

impl ZpFunction {
    pub fn new(p: u32, n: u32, values: Vec<i8>) -> Result<Self> {
        let space = Space::new(p, n)?;
        if values.len() as u64 != space.size() {
            return Err(Error::TableLength { got: values.len(), expected: space.size() as usize });
        }
        if let Some(&v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::NotPlusMinusOne(v as i64));
        }
        Ok(Self { space, values })
    }

    pub fn from_fn(p: u32, n: u32, f: impl Fn(u64) -> Sign) -> Result<Self> {
        let space = Space::new(p, n)?;
        Ok(Self { space, values: (0..space.size()).map(|x| f(x).value()).collect() })
    }

    /// The `index`-th table in lexicographic order: digit `x` of `index` in base 2 set means `f(x) = -1`.
    pub fn from_index(p: u32, n: u32, index: u64) -> Result<Self> {
        Self::from_fn(p, n, |x| Sign::from_parity(index >> x & 1 == 1))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn p(&self) -> u32 {
        self.space.p
    }

    pub fn n(&self) -> u32 {
        self.space.n
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    #[inline]
    pub fn eval(&self, x: u64) -> Sign {
        Sign::of(self.values[x as usize])
    }

    pub fn disagreements(&self, other: &ZpFunction) -> u64 {
        assert_eq!(self.space, other.space, "space mismatch");
        self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count() as u64
    }

    pub fn dft(&self) -> ZpSpectrum {
        self.dft_with(Parallelism::default())
    }

    /// `f^(a) = E_x f(x) omega^{-<a,x>}`, one length-`p` transform per dimension.
    pub fn dft_with(&self, par: Parallelism) -> ZpSpectrum {
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
        transform(self.space, &mut data, true, par);
        let scale = 1.0 / self.space.size() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        ZpSpectrum { space: self.space, coeffs: data }
    }

    pub fn to_text(&self) -> String {
        let body: Vec<&str> = self.values.iter().map(|&v| if v == 1 { "+1" } else { "-1" }).collect();
        format!("BF p={} n={}\n{}\n", self.p(), self.n(), body.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, tokens) = parse_table_text(text)?;
        let space = Space::new(header.p, header.n).map_err(|e| Error::parse(1, e.to_string()))?;
        let values = collect_signs(&tokens, space.size() as usize)?;
        Self::new(header.p, header.n, values)
    }
}

/// In-place length-`p` DFT along every dimension; `forward` uses `omega^{-1}`.
fn transform(space: Space, data: &mut [Complex64], forward: bool, par: Parallelism) {
    let p = space.p as usize;
    let roots = space.roots();
    let root = |k: usize| if forward { roots[(p - k % p) % p] } else { roots[k % p] };
    for i in 0..space.n {
        let stride = space.pow(i) as usize;
        exec::for_each_chunk(par, data, stride * p, |block| {
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            for low in 0..stride {
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = block[low + k * stride];
                }
                for a in 0..p {
                    block[low + a * stride] = (0..p).map(|k| line[k] * root(a * k)).sum();
                }
            }
        });
    }
}

/// Complex Fourier spectrum over Z_p^n.
#[derive(Debug, Clone, PartialEq)]
pub struct ZpSpectrum {
    space: Space,
    coeffs: Vec<Complex64>,
}

impl ZpSpectrum {
    pub fn from_coeffs(p: u32, n: u32, coeffs: Vec<Complex64>) -> Result<Self> {
        let space = Space::new(p, n)?;
        if coeffs.len() as u64 != space.size() {
            return Err(Error::TableLength { got: coeffs.len(), expected: space.size() as usize });
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn p(&self) -> u32 {
        self.space.p
    }

    pub fn n(&self) -> u32 {
        self.space.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, a: u64) -> Complex64 {
        self.coeffs[a as usize]
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn sparsity(&self) -> usize {
        self.coeffs.iter().filter(|c| c.norm() > TAU).count()
    }

    pub fn parseval_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|f^(a) - conj(f^(-a))|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        (0..self.space.size())
            .map(|a| (self.coeff(a) - self.coeff(self.space.neg(a)).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `f^(0)`, real for a real function.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn constant_value(&self) -> Option<Sign> {
        (self.coeffs[0].norm() > 1.0 - TAU).then(|| Sign::of(self.coeffs[0].re))
    }

    /// Smallest index whose magnitude is within `TAU` of the largest, optionally skipping one index.
    fn top_excluding(&self, skip: Option<u64>) -> Option<u64> {
        let keep = |&(i, _): &(usize, &Complex64)| Some(i as u64) != skip;
        let m = self.coeffs.iter().enumerate().filter(keep).map(|(_, c)| c.norm()).fold(0.0, f64::max);
        self.coeffs.iter().enumerate().filter(keep).find(|(_, c)| c.norm() >= m - TAU).map(|(i, _)| i as u64)
    }

    pub fn top(&self) -> u64 {
        self.top_excluding(None).expect("nonempty table")
    }

    /// Top two indices under the tolerance-aware (magnitude desc, index asc) order.
    pub fn top_two(&self) -> Result<(u64, u64)> {
        let a = self.top();
        let b = self.top_excluding(Some(a)).filter(|&b| self.coeff(b).norm() > TAU);
        b.map(|b| (a, b)).ok_or(Error::TooSparse)
    }

    pub fn inverse(&self) -> Result<ZpFunction> {
        self.inverse_with(Parallelism::default())
    }

    /// Inverse transform, snapping values within `TAU` of ±1.
    pub fn inverse_with(&self, par: Parallelism) -> Result<ZpFunction> {
        let mut data = self.coeffs.clone();
        transform(self.space, &mut data, false, par);
        let values = data
            .iter()
            .map(|c| {
                if c.im.abs() > TAU {
                    Err(Error::NotBoolean)
                } else if (c.re - 1.0).abs() <= TAU {
                    Ok(1)
                } else if (c.re + 1.0).abs() <= TAU {
                    Ok(-1)
                } else {
                    Err(Error::NotBoolean)
                }
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(ZpFunction { space: self.space, values })
    }
}

/// Restrict onto `<g, x> = lambda` (i.e. `chi_g = omega^lambda`); the result has `n - 1` digits.
///
/// `g` is scaled so its pivot digit (lowest nonzero) is 1, and `lambda` with it.
pub fn restrict_zp(s: &ZpSpectrum, g: u64, lambda: u32) -> Result<ZpSpectrum> {
    let space = s.space;
    let pivot = space.pivot(g).ok_or(Error::ZeroForm)?;
    if g >= space.size() {
        return Err(Error::FormOutOfRange(g));
    }
    let p = space.p;
    let inv = space.inv(space.digit(g, pivot));
    let unit = space.scale(inv, g);
    let lam = (lambda % p) * inv % p;
    let roots = space.roots();
    let reduced = space.reduced();
    let coeffs = (0..reduced.size())
        .map(|r| {
            let mut beta = space.insert_digit(r, pivot, 0);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..p {
                acc += roots[(lam * k % p) as usize] * s.coeffs[beta as usize];
                beta = space.add(beta, unit);
            }
            acc
        })
        .collect();
    Ok(ZpSpectrum { space: reduced, coeffs })
}

/// Test-function families over Z_p^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZpKind {
    Constant(Sign),
    Random,
    /// `-1` exactly on a random linear subspace of co-dimension `k`.
    SubspaceIndicator {
        k: u32,
    },
    /// `-1` iff more than half of the coordinates are nonzero.
    MajorityLike,
    /// `-1` iff `<form, x>` lies in `values` (a bitmask over `0..p`).
    LinearPattern {
        form: u64,
        values: u32,
    },
}

pub fn generate_zp(kind: &ZpKind, p: u32, n: u32, seed: u64) -> Result<ZpFunction> {
    let space = Space::new(p, n)?;
    match *kind {
        ZpKind::Constant(s) => ZpFunction::from_fn(p, n, |_| s),
        ZpKind::Random => {
            let mut rng = seeded_rng(seed);
            ZpFunction::new(p, n, (0..space.size()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        }
        ZpKind::SubspaceIndicator { k } => {
            if k > n {
                return Err(Error::param(format!("co-dimension {k} exceeds n={n}")));
            }
            let mut rng = seeded_rng(seed);
            let mut basis = tree::ZpBasis::new(space);
            let mut forms = Vec::new();
            while forms.len() < k as usize {
                let g = rng.random_range(1..space.size());
                if basis.push(g) {
                    forms.push(g);
                }
            }
            ZpFunction::from_fn(p, n, |x| Sign::from_parity(forms.iter().all(|&g| space.inner(g, x) == 0)))
        }
        ZpKind::MajorityLike => ZpFunction::from_fn(p, n, |x| {
            let nonzero = (0..n).filter(|&i| space.digit(x, i) != 0).count() as u32;
            Sign::from_parity(2 * nonzero > n)
        }),
        ZpKind::LinearPattern { form, values } => {
            if form >= space.size() {
                return Err(Error::FormOutOfRange(form));
            }
            ZpFunction::from_fn(p, n, |x| Sign::from_parity(values >> space.inner(form, x) & 1 == 1))
        }
    }
}
