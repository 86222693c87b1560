//! Membership-query oracles, large-coefficient search by prefix buckets, and
//! the approximate tree learner built on it.
//!
//! All candidates at one level of the search share a single batch of pair
//! samples, and all final coefficients share one batch of point samples. Each
//! individual estimate still carries its own Hoeffding guarantee.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore, SeedableRng};

use crate::boolfn::{BooleanFunction, Sign};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::pdt::{approx_depth_cap, approx_size_bound_log2, Node, ParityDecisionTree, Tree};
use crate::restriction::{LinearForm, RestrictionChain};
use crate::{bits::parity, seeded_rng, Rational, SeededRng};

/// Membership-query access to a function on `n` variables.
pub trait QueryOracle: Sync {
    fn n(&self) -> u32;

    /// `f(x)`; every call counts as one query.
    fn query(&self, x: u64) -> Result<Sign>;

    /// Queries made so far.
    fn query_count(&self) -> u64;
}

/// Oracle backed by a truth table, with an optional query budget.
#[derive(Debug)]
pub struct TableOracle {
    f: BooleanFunction,
    count: AtomicU64,
    budget: Option<u64>,
}

impl TableOracle {
    pub fn new(f: BooleanFunction) -> Self {
        Self { f, count: AtomicU64::new(0), budget: None }
    }

    pub fn with_budget(f: BooleanFunction, budget: u64) -> Self {
        Self { f, count: AtomicU64::new(0), budget: Some(budget) }
    }

    pub fn function(&self) -> &BooleanFunction {
        &self.f
    }
}

impl QueryOracle for TableOracle {
    fn n(&self) -> u32 {
        self.f.n()
    }

    #[inline]
    fn query(&self, x: u64) -> Result<Sign> {
        let c = self.count.fetch_add(1, Ordering::Relaxed);
        if let Some(b) = self.budget {
            if c >= b {
                return Err(Error::BudgetExhausted(b));
            }
        }
        Ok(self.f.eval(x))
    }

    fn query_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// The restriction of an oracle to an affine subspace, in reduced coordinates.
#[derive(Debug)]
pub struct RestrictedOracle<'a, O: ?Sized> {
    inner: &'a O,
    chain: RestrictionChain,
}

impl<'a, O: QueryOracle + ?Sized> RestrictedOracle<'a, O> {
    pub fn new(inner: &'a O, chain: RestrictionChain) -> Result<Self> {
        if chain.ambient_dim() != inner.n() {
            return Err(Error::param("chain dimension does not match the oracle"));
        }
        Ok(Self { inner, chain })
    }

    pub fn chain(&self) -> &RestrictionChain {
        &self.chain
    }
}

impl<O: QueryOracle + ?Sized> QueryOracle for RestrictedOracle<'_, O> {
    fn n(&self) -> u32 {
        self.chain.dim()
    }

    #[inline]
    fn query(&self, x: u64) -> Result<Sign> {
        self.inner.query(self.chain.lift_point(x))
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }
}

/// Threshold, accuracy, confidence and seed of one search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub theta: f64,
    pub eta: f64,
    pub delta: f64,
    pub seed: u64,
}

impl SearchParams {
    pub fn new(theta: f64, eta: f64, delta: f64, seed: u64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::param(format!("theta must lie in (0, 1], got {theta}")));
        }
        if !(eta > 0.0 && eta <= theta / 2.0) {
            return Err(Error::param(format!("eta must lie in (0, theta/2], got {eta}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { theta, eta, delta, seed })
    }
}

/// Hoeffding sample size for accuracy `acc` on a mean of ±1 values.
pub fn hoeffding_samples(acc: f64, delta: f64) -> u64 {
    ((2.0 / (acc * acc)) * (2.0 / delta).ln()).ceil() as u64
}

/// Samples handled by one RNG stream.
const CHUNK: u64 = 1 << 12;

/// Signed sample values keyed by a point, summed against characters.
struct Correlator {
    hist: Option<Vec<i64>>,
    list: Vec<(u64, i8)>,
}

impl Correlator {
    fn new(width: u32, samples: u64) -> Self {
        let dense = width < 26 && (1u64 << width) <= samples.min(CHUNK);
        let hist = dense.then(|| vec![0i64; 1 << width]);
        Self { hist, list: Vec::new() }
    }

    fn push(&mut self, d: u64, s: i8) {
        match &mut self.hist {
            Some(h) => h[d as usize] += s as i64,
            None => self.list.push((d, s)),
        }
    }

    fn merge(&mut self, other: Correlator) {
        match (&mut self.hist, other.hist) {
            (Some(h), Some(o)) => h.iter_mut().zip(o).for_each(|(a, b)| *a += b),
            _ => self.list.extend(other.list),
        }
    }

    /// `sum_samples s * chi_a(d)`.
    fn correlate(&self, a: u64) -> i64 {
        match &self.hist {
            Some(h) => h
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(d, &c)| if parity(a & d as u64) { -c } else { c })
                .sum(),
            None => self.list.iter().map(|&(d, s)| if parity(a & d) { -(s as i64) } else { s as i64 }).sum(),
        }
    }
}

fn random_bits(rng: &mut SeededRng, width: u32) -> u64 {
    match width {
        0 => 0,
        64 => rng.next_u64(),
        w => rng.next_u64() & ((1u64 << w) - 1),
    }
}

/// Draw `samples` observations with `draw`, in deterministic per-chunk streams.
fn sample_batch<F>(par: Parallelism, width: u32, samples: u64, base: u64, draw: F) -> Result<Correlator>
where
    F: Fn(&mut SeededRng) -> Result<(u64, i8)> + Sync,
{
    let chunks = samples.div_ceil(CHUNK) as usize;
    let parts = exec::map_range(par, chunks, |c| -> Result<Correlator> {
        let mut rng = SeededRng::seed_from_u64(base);
        rng.set_stream(c as u64);
        let len = CHUNK.min(samples - c as u64 * CHUNK);
        let mut acc = Correlator::new(width, samples);
        for _ in 0..len {
            let (d, s) = draw(&mut rng)?;
            acc.push(d, s);
        }
        Ok(acc)
    });
    let mut total = Correlator::new(width, samples);
    for p in parts {
        total.merge(p?);
    }
    Ok(total)
}

/// Empirical means of `f(x) chi_a(x)` for every `a` in `alphas`, from one batch of samples.
pub fn estimate_coeffs<O: QueryOracle + ?Sized>(
    o: &O,
    alphas: &[u64],
    samples: u64,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<Rational>> {
    let n = o.n();
    let batch = sample_batch(par, n, samples, seed, |rng| {
        let x = random_bits(rng, n);
        Ok((x, o.query(x)?.value()))
    })?;
    Ok(alphas.iter().map(|&a| Rational::new(batch.correlate(a), samples as i64)).collect())
}

/// Estimate `f^(alpha)` to within `eta` with probability `1 - delta`.
pub fn estimate_coeff<O: QueryOracle + ?Sized>(o: &O, alpha: u64, eta: f64, delta: f64, seed: u64) -> Result<Rational> {
    if !(eta > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::param("need eta > 0 and delta in (0, 1)"));
    }
    let m = hoeffding_samples(eta, delta);
    Ok(estimate_coeffs(o, &[alpha], m, seed, Parallelism::default())?[0])
}

/// Pairs `(x1.z, x2.z)` with `x1, x2` on the low `k` bits, tallied by `x1 ^ x2`.
fn pair_batch<O: QueryOracle + ?Sized>(o: &O, k: u32, samples: u64, seed: u64, par: Parallelism) -> Result<Correlator> {
    let high = o.n() - k;
    sample_batch(par, k, samples, seed, |r| {
        let x1 = random_bits(r, k);
        let x2 = random_bits(r, k);
        let z = random_bits(r, high) << k;
        let s = o.query(x1 | z)? * o.query(x2 | z)?;
        Ok((x1 ^ x2, s.value()))
    })
}

/// Empirical bucket weights `sum_b f^(a.b)^2` for prefixes `a` of length `k`, from one batch of pairs.
pub fn estimate_bucket_weights<O: QueryOracle + ?Sized>(
    o: &O,
    prefixes: &[u64],
    k: u32,
    samples: u64,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<Rational>> {
    if k > o.n() {
        return Err(Error::param(format!("prefix length {k} exceeds n={}", o.n())));
    }
    let batch = pair_batch(o, k, samples, seed, par)?;
    Ok(prefixes.iter().map(|&a| Rational::new(batch.correlate(a), samples as i64)).collect())
}

/// A reported coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimate {
    pub alpha: u64,
    pub value: Rational,
}

impl Estimate {
    pub fn value_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

/// Outcome of [`km_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Sorted by (|estimate| desc, mask asc).
    pub coeffs: Vec<Estimate>,
    pub queries: u64,
    /// Candidate buckets whose weight was estimated.
    pub buckets: usize,
}

impl SearchResult {
    pub fn get(&self, alpha: u64) -> Option<Rational> {
        self.coeffs.iter().find(|e| e.alpha == alpha).map(|e| e.value)
    }
}

pub(crate) fn sort_estimates(v: &mut [Estimate]) {
    v.sort_by(|a, b| b.value_f64().abs().partial_cmp(&a.value_f64().abs()).unwrap().then(a.alpha.cmp(&b.alpha)));
}

pub fn km_search<O: QueryOracle + ?Sized>(o: &O, p: &SearchParams) -> Result<SearchResult> {
    km_search_with(o, p, Parallelism::default())
}

/// All coefficients of magnitude at least `theta`, with estimates.
///
/// Prefixes are the low `k` bits of the mask. A prefix survives while its
/// estimated bucket weight is at least `theta^2/2`; at most `ceil(4/theta^2)`
/// survive a level. Survivors at full length are estimated and those with
/// `|estimate| >= theta - eta` are returned.
pub fn km_search_with<O: QueryOracle + ?Sized>(o: &O, p: &SearchParams, par: Parallelism) -> Result<SearchResult> {
    let n = o.n();
    let start = o.query_count();
    let keep = (4.0 / (p.theta * p.theta)).ceil() as usize;
    let estimates = (2 * n as usize * keep + keep) as f64;
    let per = p.delta / estimates;
    let weight_acc = p.theta * p.theta / 4.0;
    let pair_samples = hoeffding_samples(weight_acc, per);
    let coeff_samples = hoeffding_samples(p.eta, per);
    let mut rng = seeded_rng(p.seed);
    let mut survivors = vec![0u64];
    let mut buckets = 0;
    for k in 1..=n {
        let candidates: Vec<u64> = survivors.iter().flat_map(|&a| [a, a | 1 << (k - 1)]).collect();
        buckets += candidates.len();
        let batch = pair_batch(o, k, pair_samples, rng.next_u64(), par)?;
        let mut weighted: Vec<(i64, u64)> = candidates.iter().map(|&a| (batch.correlate(a), a)).collect();
        let cut = p.theta * p.theta / 2.0 * pair_samples as f64;
        weighted.retain(|&(w, _)| w as f64 >= cut);
        weighted.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        weighted.truncate(keep);
        survivors = weighted.into_iter().map(|(_, a)| a).collect();
        survivors.sort_unstable();
        if survivors.is_empty() {
            break;
        }
    }
    if n == 0 {
        survivors = vec![0];
    }
    let mut coeffs = Vec::new();
    if !survivors.is_empty() {
        let values = estimate_coeffs(o, &survivors, coeff_samples, rng.next_u64(), par)?;
        let floor = p.theta - p.eta;
        coeffs = survivors
            .iter()
            .zip(values)
            .map(|(&alpha, value)| Estimate { alpha, value })
            .filter(|e| e.value_f64().abs() >= floor)
            .collect();
        sort_estimates(&mut coeffs);
    }
    Ok(SearchResult { coeffs, queries: o.query_count() - start, buckets })
}

/// Exact bucket weight `sum_b f^(a.b)^2` for prefix `a` of length `k`, from a spectrum.
pub fn exact_bucket_weight(s: &crate::Spectrum, a: u64, k: u32) -> Rational {
    let scale = s.scale() as i128;
    let total: i128 = (0..1u64 << (s.n() - k)).map(|b| s.scaled_at(a | b << k) as i128).map(|v| v * v).sum();
    let den = scale * scale;
    let g = gcd(total, den);
    Rational::new((total / g) as i64, (den / g) as i64)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs().max(1)
}

/// Inputs to [`learn_approx_pdt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    /// Caller-supplied upper bound on the spectral norm.
    pub a_bound: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
}

/// Learned tree with bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub tree: ParityDecisionTree,
    pub queries: u64,
    pub searches: usize,
}

impl LearnOutcome {
    /// `QUERIES`/`DEPTH`/`SIZE` lines followed by the tree.
    pub fn report(&self) -> String {
        format!(
            "QUERIES {}\nDEPTH {}\nSIZE {}\n{}",
            self.queries,
            self.tree.depth(),
            self.tree.size(),
            self.tree.to_text()
        )
    }
}

struct Learner<'a, O: ?Sized> {
    oracle: &'a O,
    a: f64,
    threshold: f64,
    cap: usize,
    eta: f64,
    theta_floor: f64,
    delta_call: f64,
    rng: SeededRng,
    searches: usize,
    par: Parallelism,
}

impl<O: QueryOracle + ?Sized> Learner<'_, O> {
    fn search(&mut self, g: &RestrictedOracle<'_, O>, theta: f64) -> Result<SearchResult> {
        self.searches += 1;
        let params = SearchParams::new(theta, self.eta.min(theta / 2.0), self.delta_call, self.rng.next_u64())?;
        km_search_with(g, &params, self.par)
    }

    fn mean(&mut self, g: &RestrictedOracle<'_, O>) -> Result<Rational> {
        if g.n() == 0 {
            return Ok(Rational::from_integer(g.query(0)?.value() as i64));
        }
        let m = hoeffding_samples(self.eta, self.delta_call);
        Ok(estimate_coeffs(g, &[0], m, self.rng.next_u64(), self.par)?[0])
    }

    fn leaf(v: Rational) -> Node<Sign> {
        Node::Leaf(Sign::of(v))
    }

    fn node(&mut self, chain: RestrictionChain, depth: usize) -> Result<Node<Sign>> {
        let g = RestrictedOracle::new(self.oracle, chain)?;
        if depth >= self.cap || g.n() == 0 {
            return Ok(Self::leaf(self.mean(&g)?));
        }
        let theta1 = (1.0 / self.a).min(1.0);
        let mut found = self.search(&g, theta1)?;
        let Some(&top) = found.coeffs.first() else {
            return Ok(Self::leaf(self.mean(&g)?));
        };
        let b0 = found.get(0).unwrap_or_default();
        let b0f = *b0.numer() as f64 / *b0.denom() as f64;
        if b0f.abs() > self.threshold {
            return Ok(Self::leaf(b0));
        }
        let lift = |m: u64| LinearForm::new(g.chain().lift_form(m)).expect("nonzero");
        if top.alpha != 0 && top.value_f64().abs() > self.threshold {
            let s = Sign::of(top.value);
            return Ok(Node::query(lift(top.alpha), Node::Leaf(s), Node::Leaf(-s)));
        }
        let a = top.value_f64().abs() + self.eta;
        let theta2 = ((1.0 - a * a) / self.a).max(self.theta_floor);
        if theta2 < theta1 {
            found = self.search(&g, theta2)?;
        }
        let [first, second, ..] = found.coeffs[..] else {
            return Ok(Self::leaf(b0));
        };
        let form = LinearForm::new(first.alpha ^ second.alpha).expect("distinct masks");
        let label = lift(form.mask());
        let chain = g.chain().clone();
        let plus = self.node(chain.with(form, Sign::Plus)?, depth + 1)?;
        let minus = self.node(chain.with(form, Sign::Minus)?, depth + 1)?;
        Ok(Node::query(label, plus, minus))
    }
}

pub fn learn_approx_pdt<O: QueryOracle + ?Sized>(o: &O, p: &LearnParams) -> Result<LearnOutcome> {
    learn_approx_pdt_with(o, p, Parallelism::default())
}

/// Learn a tree within `eps` of the oracle's function with probability `1 - delta`.
///
/// Follows the approximate synthesis recursion, reading the top coefficients
/// from [`km_search`] on the restricted oracle. The threshold is adaptive: the
/// first search uses `1/A` (the largest coefficient is at least that), and a
/// second search at `(1 - (|top| + eta)^2)/A`, floored at `eps/(2A)`, runs only
/// when the second coefficient may lie below the first threshold.
pub fn learn_approx_pdt_with<O: QueryOracle + ?Sized>(
    o: &O,
    p: &LearnParams,
    par: Parallelism,
) -> Result<LearnOutcome> {
    if !(p.eps > 0.0 && p.eps < 0.5) {
        return Err(Error::param(format!("eps must lie in (0, 1/2), got {}", p.eps)));
    }
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {}", p.delta)));
    }
    if !(p.a_bound >= 1.0 && p.a_bound.is_finite()) {
        return Err(Error::param("the spectral norm bound must be at least 1"));
    }
    let n = o.n();
    let e = p.eps / 2.0;
    let cap = approx_depth_cap(p.a_bound, e);
    // internal nodes are fewer than leaves, and each makes at most three estimating calls
    let leaves_log2 = (cap.min(n as usize) as f64).min(approx_size_bound_log2(p.a_bound, cap));
    let delta_call = p.delta / (3.0 * leaves_log2.exp2());
    let start = o.query_count();
    let mut learner = Learner {
        oracle: o,
        a: p.a_bound,
        threshold: 1.0 - e,
        cap,
        eta: p.eps / (4.0 * p.a_bound),
        theta_floor: p.eps / (2.0 * p.a_bound),
        delta_call,
        rng: seeded_rng(p.seed),
        searches: 0,
        par,
    };
    let root = learner.node(RestrictionChain::new(n), 0)?;
    let tree = Tree::new(n, root)?;
    Ok(LearnOutcome { tree, queries: o.query_count() - start, searches: learner.searches })
}

/// A uniformly random point, for callers sampling their own checks.
pub fn random_point(rng: &mut SeededRng, n: u32) -> u64 {
    if n == 0 {
        0
    } else {
        rng.random_range(0..=u64::MAX >> (64 - n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{generate, FunctionKind};

    fn oracle(kind: FunctionKind, n: u32) -> TableOracle {
        TableOracle::new(generate(&kind, n, 0).unwrap())
    }

    #[test]
    fn budget_is_enforced() {
        let o = TableOracle::with_budget(generate(&FunctionKind::And, 3, 0).unwrap(), 2);
        assert!(o.query(0).is_ok());
        assert!(o.query(1).is_ok());
        assert_eq!(o.query(2), Err(Error::BudgetExhausted(2)));
        let r = estimate_coeff(&o, 0, 0.1, 0.1, 1);
        assert_eq!(r, Err(Error::BudgetExhausted(2)));
    }

    #[test]
    fn estimate_trivial_cases_are_exact() {
        let one = TableOracle::new(BooleanFunction::constant(4, Sign::Plus).unwrap());
        assert_eq!(estimate_coeff(&one, 0, 0.1, 0.05, 3).unwrap(), Rational::from_integer(1));
        let chi = oracle(FunctionKind::Parity { mask: 0b1011 }, 4);
        assert_eq!(estimate_coeff(&chi, 0b1011, 0.1, 0.05, 3).unwrap(), Rational::from_integer(1));
    }

    #[test]
    fn estimate_majority_coefficient() {
        let maj = oracle(FunctionKind::Majority, 3);
        let mut ok = 0;
        for seed in 0..100 {
            let v = estimate_coeff(&maj, 0b100, 0.05, 0.01, seed).unwrap();
            if (Rational::new(45, 100)..=Rational::new(55, 100)).contains(&v) {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}");
    }

    #[test]
    fn restricted_oracle_matches_table_restriction() {
        let f = generate(&FunctionKind::Random, 6, 17).unwrap();
        let o = TableOracle::new(f.clone());
        let mut chain = RestrictionChain::new(6);
        chain.push(LinearForm::new(0b101100).unwrap(), Sign::Minus).unwrap();
        chain.push(LinearForm::new(0b00111).unwrap(), Sign::Plus).unwrap();
        let r = RestrictedOracle::new(&o, chain.clone()).unwrap();
        let table = chain.restrict_table(&f);
        for x in 0..16 {
            assert_eq!(r.query(x).unwrap(), table.eval(x));
        }
        assert_eq!(o.query_count(), 16);
    }

    #[test]
    fn search_finds_single_character() {
        let chi = oracle(FunctionKind::Parity { mask: 0b0110 }, 4);
        let p = SearchParams::new(0.5, 0.1, 0.05, 7).unwrap();
        let r = km_search(&chi, &p).unwrap();
        assert_eq!(r.coeffs.len(), 1);
        assert_eq!(r.coeffs[0].alpha, 0b0110);
        assert_eq!(r.coeffs[0].value, Rational::from_integer(1));
    }

    #[test]
    fn search_is_reproducible() {
        let maj = oracle(FunctionKind::Majority, 5);
        let p = SearchParams::new(0.3, 0.1, 0.05, 99).unwrap();
        let a = km_search(&maj, &p).unwrap();
        let maj2 = oracle(FunctionKind::Majority, 5);
        let b = km_search(&maj2, &p).unwrap();
        assert_eq!(a, b);
        let c = km_search_with(&oracle(FunctionKind::Majority, 5), &p, Parallelism::Sequential).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn exact_bucket_weights_split() {
        let s = generate(&FunctionKind::Random, 5, 2).unwrap().wht();
        assert_eq!(exact_bucket_weight(&s, 0, 0), Rational::from_integer(1));
        for k in 0..5 {
            for a in 0..1u64 << k {
                let w = exact_bucket_weight(&s, a, k);
                let split = exact_bucket_weight(&s, a, k + 1) + exact_bucket_weight(&s, a | 1 << k, k + 1);
                assert_eq!(w, split);
            }
        }
    }

    #[test]
    fn learner_on_character_is_one_query() {
        let chi = oracle(FunctionKind::Parity { mask: 0b10010 }, 5);
        let p = LearnParams { a_bound: 1.0, eps: 0.1, delta: 0.05, seed: 4 };
        let out = learn_approx_pdt(&chi, &p).unwrap();
        assert_eq!(out.tree.depth(), 1);
        assert_eq!(out.tree.disagreements(chi.function()), 0);
    }

    #[test]
    fn learner_rejects_bad_params() {
        let chi = oracle(FunctionKind::And, 3);
        let bad = |a, e, d| learn_approx_pdt(&chi, &LearnParams { a_bound: a, eps: e, delta: d, seed: 0 }).is_err();
        assert!(bad(0.5, 0.1, 0.1));
        assert!(bad(2.0, 0.6, 0.1));
        assert!(bad(2.0, 0.1, 1.5));
    }
}
