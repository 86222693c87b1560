//! Large-coefficient search over Z_p^n by p-ary prefix buckets.
//!
//! A prefix is the low `k` digits of `alpha`. Its bucket weight
//! `sum_b |f^(a.b)|^2` is the mean of
//! `f(x1.z) f(x2.z) omega^{<a, x2 - x1>}`, whose real part is sampled.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};

use super::{Space, ZpFunction};
use crate::boolfn::Sign;
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::km::{hoeffding_samples, SearchParams};
use crate::{seeded_rng, SeededRng};

/// Membership queries to a function on Z_p^n.
pub trait ZpOracle: Sync {
    fn space(&self) -> Space;
    fn query(&self, x: u64) -> Result<Sign>;
    fn query_count(&self) -> u64;
}

/// Table-backed oracle with an optional budget.
#[derive(Debug)]
pub struct ZpTableOracle {
    f: ZpFunction,
    count: AtomicU64,
    budget: Option<u64>,
}

impl ZpTableOracle {
    pub fn new(f: ZpFunction) -> Self {
        Self { f, count: AtomicU64::new(0), budget: None }
    }

    pub fn with_budget(f: ZpFunction, budget: u64) -> Self {
        Self { f, count: AtomicU64::new(0), budget: Some(budget) }
    }
}

impl ZpOracle for ZpTableOracle {
    fn space(&self) -> Space {
        self.f.space()
    }

    fn query(&self, x: u64) -> Result<Sign> {
        let c = self.count.fetch_add(1, Ordering::Relaxed);
        match self.budget {
            Some(b) if c >= b => Err(Error::BudgetExhausted(b)),
            _ => Ok(self.f.eval(x)),
        }
    }

    fn query_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

const CHUNK: u64 = 1 << 12;

/// Signed counts per point, dense when the domain is small.
struct Tally {
    hist: Option<Vec<i64>>,
    list: Vec<(u64, i8)>,
}

impl Tally {
    fn new(domain: u64, samples: u64) -> Self {
        let dense = domain <= samples.min(CHUNK);
        Self { hist: dense.then(|| vec![0; domain as usize]), list: Vec::new() }
    }

    fn push(&mut self, d: u64, s: i8) {
        match &mut self.hist {
            Some(h) => h[d as usize] += s as i64,
            None => self.list.push((d, s)),
        }
    }

    fn merge(&mut self, other: Tally) {
        match (&mut self.hist, other.hist) {
            (Some(h), Some(o)) => h.iter_mut().zip(o).for_each(|(a, b)| *a += b),
            _ => self.list.extend(other.list),
        }
    }

    /// `sum c * omega^{sign <a, d>}` over the tallied points.
    fn correlate(&self, space: Space, roots: &[Complex64], a: u64, conj: bool) -> Complex64 {
        let p = space.p();
        let phase = |d: u64| {
            let k = space.inner(a, d);
            roots[(if conj { p - k } else { k } % p) as usize]
        };
        match &self.hist {
            Some(h) => h.iter().enumerate().filter(|(_, &c)| c != 0).map(|(d, &c)| phase(d as u64) * c as f64).sum(),
            None => self.list.iter().map(|&(d, s)| phase(d) * s as f64).sum(),
        }
    }
}

fn sample<F>(par: Parallelism, domain: u64, samples: u64, base: u64, draw: F) -> Result<Tally>
where
    F: Fn(&mut SeededRng) -> Result<(u64, i8)> + Sync,
{
    let chunks = samples.div_ceil(CHUNK) as usize;
    let parts = exec::map_range(par, chunks, |c| -> Result<Tally> {
        let mut rng = SeededRng::seed_from_u64(base);
        rng.set_stream(c as u64);
        let mut t = Tally::new(domain, samples);
        for _ in 0..CHUNK.min(samples - c as u64 * CHUNK) {
            let (d, s) = draw(&mut rng)?;
            t.push(d, s);
        }
        Ok(t)
    });
    let mut total = Tally::new(domain, samples);
    for p in parts {
        total.merge(p?);
    }
    Ok(total)
}

/// Empirical `E f(x) omega^{-<a, x>}` for each `a`, from one batch of samples.
pub fn estimate_coeffs_p<O: ZpOracle + ?Sized>(
    o: &O,
    alphas: &[u64],
    samples: u64,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<Complex64>> {
    let space = o.space();
    let size = space.size();
    let batch = sample(par, size, samples, seed, |rng| {
        let x = rng.random_range(0..size);
        Ok((x, o.query(x)?.value()))
    })?;
    let roots = space.roots();
    Ok(alphas.iter().map(|&a| batch.correlate(space, &roots, a, true) / samples as f64).collect())
}

/// A reported coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateP {
    pub alpha: u64,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResultP {
    /// Sorted by (|estimate| desc, index asc).
    pub coeffs: Vec<EstimateP>,
    pub queries: u64,
    pub buckets: usize,
}

impl SearchResultP {
    pub fn get(&self, alpha: u64) -> Option<Complex64> {
        self.coeffs.iter().find(|e| e.alpha == alpha).map(|e| e.value)
    }
}

pub fn km_search_p<O: ZpOracle + ?Sized>(o: &O, params: &SearchParams) -> Result<SearchResultP> {
    km_search_p_with(o, params, Parallelism::default())
}

/// All coefficients with `|f^(alpha)| >= theta`, with the same pruning rule
/// as the Z_2 search: keep prefixes of weight at least `theta^2/2`, at most
/// `ceil(4/theta^2)` per level, and report `|estimate| >= theta - eta`.
pub fn km_search_p_with<O: ZpOracle + ?Sized>(o: &O, params: &SearchParams, par: Parallelism) -> Result<SearchResultP> {
    let space = o.space();
    let (p, n) = (space.p(), space.n());
    let start = o.query_count();
    let theta2 = params.theta * params.theta;
    let keep = (4.0 / theta2).ceil() as usize;
    let per = params.delta / (n as usize * p as usize * keep + keep) as f64;
    let pair_samples = hoeffding_samples(theta2 / 4.0, per);
    // real and imaginary parts each to eta / sqrt 2
    let coeff_samples = hoeffding_samples(params.eta / 2f64.sqrt(), per / 2.0);
    let roots = space.roots();
    let mut rng = seeded_rng(params.seed);
    let mut survivors = vec![0u64];
    let mut buckets = 0;
    for k in 1..=n {
        let w = space.pow(k - 1);
        let candidates: Vec<u64> = survivors.iter().flat_map(|&a| (0..p as u64).map(move |c| a + c * w)).collect();
        buckets += candidates.len();
        let low = Space::new(p, k).expect("within the ambient space");
        let (lo, hi) = (low.size(), space.size() / low.size());
        let batch = sample(par, lo, pair_samples, rng.next_u64(), |r| {
            let x1 = r.random_range(0..lo);
            let x2 = r.random_range(0..lo);
            let z = r.random_range(0..hi) * lo;
            let s = o.query(x1 + z)? * o.query(x2 + z)?;
            Ok((low.sub(x2, x1), s.value()))
        })?;
        let cut = theta2 / 2.0 * pair_samples as f64;
        let mut weighted: Vec<(f64, u64)> = candidates
            .iter()
            .map(|&a| (batch.correlate(low, &roots, a, false).re, a))
            .filter(|&(wt, _)| wt >= cut)
            .collect();
        weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        weighted.truncate(keep);
        survivors = weighted.into_iter().map(|(_, a)| a).collect();
        survivors.sort_unstable();
        if survivors.is_empty() {
            break;
        }
    }
    let mut coeffs = Vec::new();
    if !survivors.is_empty() {
        let values = estimate_coeffs_p(o, &survivors, coeff_samples, rng.next_u64(), par)?;
        let floor = params.theta - params.eta;
        coeffs = survivors
            .iter()
            .zip(values)
            .map(|(&alpha, value)| EstimateP { alpha, value })
            .filter(|e| e.value.norm() >= floor)
            .collect();
        coeffs.sort_by(|a, b| b.value.norm().total_cmp(&a.value.norm()).then(a.alpha.cmp(&b.alpha)));
    }
    Ok(SearchResultP { coeffs, queries: o.query_count() - start, buckets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zp::{generate_zp, ZpKind};

    fn params(theta: f64, seed: u64) -> SearchParams {
        SearchParams::new(theta, theta / 4.0, 0.05, seed).unwrap()
    }

    #[test]
    fn pattern_function_is_recovered() {
        // f depends on <g, x> only, so its spectrum lives on multiples of g
        let f = generate_zp(&ZpKind::LinearPattern { form: 7, values: 0b001 }, 3, 3, 0).unwrap();
        let s = f.dft();
        let o = ZpTableOracle::new(f);
        let r = km_search_p(&o, &params(0.3, 1)).unwrap();
        let mut found: Vec<u64> = r.coeffs.iter().map(|e| e.alpha).collect();
        found.sort();
        let mut big: Vec<u64> = (0..27).filter(|&a| s.coeff(a).norm() >= 0.3).collect();
        big.sort();
        assert_eq!(found, big);
        for e in &r.coeffs {
            assert!((e.value - s.coeff(e.alpha)).norm() <= 0.075);
        }
    }

    #[test]
    fn majority_like_recovery() {
        let f = generate_zp(&ZpKind::MajorityLike, 3, 3, 0).unwrap();
        let s = f.dft();
        let theta = 0.2;
        let heavy: Vec<u64> = (0..27).filter(|&a| s.coeff(a).norm() >= theta).collect();
        assert!(!heavy.is_empty());
        let mut ok = 0;
        for seed in 0..10 {
            let o = ZpTableOracle::new(f.clone());
            let r = km_search_p(&o, &params(theta, seed)).unwrap();
            ok += heavy.iter().all(|&a| r.get(a).is_some()) as usize;
        }
        assert!(ok >= 9);
    }

    #[test]
    fn single_digit_soundness() {
        for idx in 0..8 {
            let f = crate::zp::ZpFunction::from_index(3, 1, idx).unwrap();
            let s = f.dft();
            let o = ZpTableOracle::new(f);
            let r = km_search_p(&o, &params(0.3, idx)).unwrap();
            for e in &r.coeffs {
                assert!(s.coeff(e.alpha).norm() >= 0.3 / 2.0);
            }
            for a in 0..3 {
                if s.coeff(a).norm() >= 0.3 {
                    assert!(r.get(a).is_some());
                }
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let f = generate_zp(&ZpKind::Random, 3, 2, 0).unwrap();
        let o = ZpTableOracle::with_budget(f, 10);
        assert_eq!(km_search_p(&o, &params(0.3, 0)), Err(Error::BudgetExhausted(10)));
    }
}
