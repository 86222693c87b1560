//! Tree synthesis from an exact spectrum.

use crate::boolfn::{Sign, Spectrum};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::restriction::{
    ceil_norm_squared, constant_subspace_chain, main_lemma_step, restrict, LinearForm, Mode, RestrictionChain,
};

use super::{FunctionalLeaf, FunctionalPdt, Node, ParityDecisionTree, Tree};

/// Subtrees on at least this many variables are built with `join`.
const PAR_MIN_DIM: u32 = 10;

fn split(par: Parallelism, dim: u32) -> Parallelism {
    if dim >= PAR_MIN_DIM {
        par
    } else {
        Parallelism::Sequential
    }
}

/// `log2(2^{A^2} n^{2A})`.
pub fn exact_size_bound_log2(a: f64, n: u32) -> f64 {
    a * a + 2.0 * a * (n.max(1) as f64).log2()
}

/// `ceil(A^2) * max(1, ceil(log2 s))`.
pub fn sparse_depth_bound(a: crate::Rational, sparsity: usize) -> u64 {
    let log_s = (sparsity.max(1) as f64).log2().ceil() as u64;
    ceil_norm_squared(a) * log_s.max(1)
}

/// `ceil(max(10 A^2, 2 log2(1/eps)))`.
pub fn approx_depth_cap(a: f64, eps: f64) -> usize {
    (10.0 * a * a).max(2.0 * (1.0 / eps).log2()).ceil() as usize
}

/// `log2(min(2^K, 2^{A^2} K^{2A}))`.
pub fn approx_size_bound_log2(a: f64, k: usize) -> f64 {
    let k = k.max(1) as f64;
    k.min(a * a + 2.0 * a * k.log2())
}

pub fn synth_exact(s: &Spectrum) -> ParityDecisionTree {
    synth_exact_with(s, Parallelism::default())
}

/// Tree computing the function exactly: query `alpha ^ beta` and recurse.
pub fn synth_exact_with(s: &Spectrum, par: Parallelism) -> ParityDecisionTree {
    fn node(s: &Spectrum, chain: &RestrictionChain, par: Parallelism) -> Node<Sign> {
        if let Some(c) = s.constant_value() {
            return Node::Leaf(c);
        }
        if let Some((alpha, sign)) = s.signed_character() {
            let form = LinearForm::new(chain.lift_form(alpha)).expect("nonzero");
            return Node::query(form, Node::Leaf(sign), Node::Leaf(-sign));
        }
        let step = main_lemma_step(s).expect("norm above 1");
        let cp = chain.with(step.delta, Sign::Plus).expect("form fits");
        let cm = chain.with(step.delta, Sign::Minus).expect("form fits");
        let par = split(par, s.n());
        let (plus, minus) =
            exec::join(par, || node(&step.restricted_plus, &cp, par), || node(&step.restricted_minus, &cm, par));
        Node::query(LinearForm::new(chain.lift_form(step.delta.mask())).expect("nonzero"), plus, minus)
    }
    let root = node(s, &RestrictionChain::new(s.n()), par);
    Tree::new(s.n(), root).expect("forms are lifted into range")
}

/// Tree computing the function exactly with depth `O(A^2 log s)`.
///
/// Each round restricts on the whole constant-subspace chain of the current
/// function; every branch of that layer has at most half the sparsity.
pub fn synth_sparse_depth(s: &Spectrum) -> ParityDecisionTree {
    fn round(s: &Spectrum, chain: &RestrictionChain) -> Node<Sign> {
        if let Some(c) = s.constant_value() {
            return Node::Leaf(c);
        }
        let forms: Vec<LinearForm> = constant_subspace_chain(s, Mode::Basic).steps().iter().map(|st| st.form).collect();
        layer(s, chain, &forms, s.sparsity())
    }
    fn layer(s: &Spectrum, chain: &RestrictionChain, forms: &[LinearForm], parent: usize) -> Node<Sign> {
        if let Some(c) = s.constant_value() {
            return Node::Leaf(c);
        }
        let Some((&form, rest)) = forms.split_first() else {
            assert!(2 * s.sparsity() <= parent, "sparsity must halve across a layer");
            return round(s, chain);
        };
        let branch = |b: Sign| {
            let r = restrict(s, form, b).expect("form fits");
            layer(&r, &chain.with(form, b).expect("form fits"), rest, parent)
        };
        let lifted = LinearForm::new(chain.lift_form(form.mask())).expect("nonzero");
        Node::query(lifted, branch(Sign::Plus), branch(Sign::Minus))
    }
    let root = round(s, &RestrictionChain::new(s.n()));
    Tree::new(s.n(), root).expect("forms are lifted into range")
}

pub fn synth_approx(s: &Spectrum, eps: f64) -> Result<FunctionalPdt> {
    synth_approx_with(s, eps, Parallelism::default())
}

/// Functional tree whose rounding is within `eps` of the function.
///
/// Runs with `eps/2` internally: unbiased leaves cost at most `eps/2` of the
/// inputs and rounding the biased ones another `eps/2`.
pub fn synth_approx_with(s: &Spectrum, eps: f64, par: Parallelism) -> Result<FunctionalPdt> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let e = eps / 2.0;
    let cap = approx_depth_cap(s.spectral_norm_f64(), e);
    let threshold = 1.0 - e;

    fn leaf(s: Spectrum) -> Node<FunctionalLeaf> {
        Node::Leaf(FunctionalLeaf { mean: s.mean(), spectrum: Some(s) })
    }
    fn node(
        s: &Spectrum,
        chain: &RestrictionChain,
        depth: usize,
        cap: usize,
        threshold: f64,
        par: Parallelism,
    ) -> Node<FunctionalLeaf> {
        if s.coeff_f64(0).abs() > threshold || depth >= cap {
            return leaf(s.clone());
        }
        let top = s.top();
        let lifted = |m: u64| LinearForm::new(chain.lift_form(m)).expect("nonzero");
        if top != 0 && s.coeff_f64(top).abs() > threshold {
            let g = LinearForm::new(top).expect("nonzero");
            let plus = restrict(s, g, Sign::Plus).expect("form fits");
            let minus = restrict(s, g, Sign::Minus).expect("form fits");
            return Node::query(lifted(top), leaf(plus), leaf(minus));
        }
        let step = main_lemma_step(s).expect("norm above 1 when no coefficient dominates");
        let cp = chain.with(step.delta, Sign::Plus).expect("form fits");
        let cm = chain.with(step.delta, Sign::Minus).expect("form fits");
        let par = split(par, s.n());
        let (plus, minus) = exec::join(
            par,
            || node(&step.restricted_plus, &cp, depth + 1, cap, threshold, par),
            || node(&step.restricted_minus, &cm, depth + 1, cap, threshold, par),
        );
        Node::query(lifted(step.delta.mask()), plus, minus)
    }
    let root = node(s, &RestrictionChain::new(s.n()), 0, cap, threshold, par);
    Tree::new(s.n(), root)
}

/// Replace each functional leaf by the sign of its mean (zero goes to `+1`).
pub fn round_to_pdt(t: &FunctionalPdt) -> ParityDecisionTree {
    t.clone().map_leaves(|l| Sign::of(l.mean))
}

/// Fraction of inputs that land on a leaf with bias at most `max_bias`.
pub fn unbiased_leaf_mass(t: &FunctionalPdt, max_bias: f64) -> f64 {
    t.leaf_paths()
        .iter()
        .filter(|(_, l)| {
            let b = l.bias();
            (*b.numer() as f64) / (*b.denom() as f64) <= max_bias
        })
        .map(|(path, _)| 0.5f64.powi(path.len() as i32))
        .sum()
}
