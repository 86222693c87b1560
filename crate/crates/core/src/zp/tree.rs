//! p-ary restriction chains, parity trees over Z_p^n, and their synthesis.
//!
//! A query node on `g` has `p` children; child `lambda` is taken when
//! `<g, x> = lambda`, i.e. `chi_g(x) = omega^lambda`.

use std::fmt;

use super::lemmas::{main_lemma_step_p, C0};
use super::{c1, restrict_zp, Space, ZpFunction, ZpSpectrum, TAU};
use crate::boolfn::{parse_header, Sign};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};

/// Echelon basis over Z_p, rows keyed by their lowest nonzero digit.
#[derive(Debug, Clone)]
pub(crate) struct ZpBasis {
    space: Space,
    rows: Vec<Option<Vec<u32>>>,
}

impl ZpBasis {
    pub(crate) fn new(space: Space) -> Self {
        Self { space, rows: vec![None; space.n() as usize] }
    }

    /// Add `g` if it is independent of the rows so far.
    pub(crate) fn push(&mut self, g: u64) -> bool {
        let p = self.space.p();
        let mut v = self.space.digits(g);
        for j in 0..v.len() {
            if v[j] == 0 {
                continue;
            }
            match &self.rows[j] {
                Some(row) => {
                    let c = v[j];
                    for (x, r) in v.iter_mut().zip(row) {
                        *x = (*x + (p - c) * r) % p;
                    }
                }
                None => {
                    let inv = self.space.inv(v[j]);
                    v.iter_mut().for_each(|x| *x = *x * inv % p);
                    self.rows[j] = Some(v);
                    return true;
                }
            }
        }
        false
    }
}

/// One step `<form, x> = value`, stated in the coordinates current at that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZpStep {
    pub form: u64,
    pub value: u32,
}

/// A sequence of p-ary restrictions; each step deletes its form's pivot digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZpChain {
    ambient: Space,
    steps: Vec<ZpStep>,
}

impl ZpChain {
    pub fn new(ambient: Space) -> Self {
        Self { ambient, steps: Vec::new() }
    }

    pub fn ambient(&self) -> Space {
        self.ambient
    }

    /// The space of the current reduced coordinates.
    pub fn current(&self) -> Space {
        self.space_at(self.steps.len())
    }

    fn space_at(&self, i: usize) -> Space {
        Space::new(self.ambient.p(), self.ambient.n() - i as u32).expect("smaller than the ambient space")
    }

    pub fn steps(&self) -> &[ZpStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, form: u64, value: u32) -> Result<()> {
        let cur = self.current();
        if form == 0 {
            return Err(Error::ZeroForm);
        }
        if form >= cur.size() {
            return Err(Error::FormOutOfRange(form));
        }
        self.steps.push(ZpStep { form, value: value % cur.p() });
        Ok(())
    }

    pub fn with(&self, form: u64, value: u32) -> Result<Self> {
        let mut c = self.clone();
        c.push(form, value)?;
        Ok(c)
    }

    fn lift_form_through(&self, upto: usize, mut g: u64) -> u64 {
        for i in (0..upto).rev() {
            let sp = self.space_at(i);
            g = sp.insert_digit(g, sp.pivot(self.steps[i].form).expect("nonzero"), 0);
        }
        g
    }

    /// Ambient form agreeing with `g` on the current subspace.
    pub fn lift_form(&self, g: u64) -> u64 {
        self.lift_form_through(self.steps.len(), g)
    }

    /// Ambient `(form, value)` constraints cutting out the subspace.
    pub fn constraints(&self) -> Vec<(u64, u32)> {
        self.steps.iter().enumerate().map(|(i, st)| (self.lift_form_through(i, st.form), st.value)).collect()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.constraints().iter().all(|&(g, v)| self.ambient.inner(g, x) == v)
    }

    /// Ambient point with reduced coordinates `x`.
    pub fn lift_point(&self, mut x: u64) -> u64 {
        let p = self.ambient.p();
        for i in (0..self.steps.len()).rev() {
            let sp = self.space_at(i);
            let st = self.steps[i];
            let j = sp.pivot(st.form).expect("nonzero");
            let x0 = sp.insert_digit(x, j, 0);
            let rest = sp.inner(st.form, x0);
            let xj = sp.inv(sp.digit(st.form, j)) * ((st.value + p - rest) % p) % p;
            x = x0 + xj as u64 * sp.pow(j);
        }
        x
    }

    /// Reduced coordinates of an ambient point of the subspace.
    pub fn project_point(&self, mut x: u64) -> u64 {
        for (i, st) in self.steps.iter().enumerate() {
            let sp = self.space_at(i);
            x = sp.remove_digit(x, sp.pivot(st.form).expect("nonzero"));
        }
        x
    }

    pub fn restrict_table(&self, f: &ZpFunction) -> ZpFunction {
        assert_eq!(f.space(), self.ambient, "space mismatch");
        let cur = self.current();
        ZpFunction::from_fn(cur.p(), cur.n(), |x| f.eval(self.lift_point(x))).expect("valid space")
    }
}

/// Node of a p-ary tree.
#[derive(Debug, Clone, PartialEq)]
pub enum PNode<L> {
    Leaf(L),
    Query { form: u64, children: Vec<PNode<L>> },
}

impl<L> PNode<L> {
    pub fn size(&self) -> usize {
        match self {
            PNode::Leaf(_) => 1,
            PNode::Query { children, .. } => children.iter().map(PNode::size).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PNode::Leaf(_) => 0,
            PNode::Query { children, .. } => 1 + children.iter().map(PNode::depth).max().unwrap_or(0),
        }
    }

    fn map<M>(self, f: &impl Fn(L) -> M) -> PNode<M> {
        match self {
            PNode::Leaf(l) => PNode::Leaf(f(l)),
            PNode::Query { form, children } => {
                PNode::Query { form, children: children.into_iter().map(|c| c.map(f)).collect() }
            }
        }
    }
}

/// Parity tree over Z_p^n.
#[derive(Debug, Clone, PartialEq)]
pub struct PTree<L> {
    space: Space,
    root: PNode<L>,
}

/// Leaf of a functional p-ary tree: the restricted function.
#[derive(Debug, Clone, PartialEq)]
pub struct ZpLeaf {
    pub mean: f64,
    pub spectrum: ZpSpectrum,
}

impl<L> PTree<L> {
    pub fn new(space: Space, root: PNode<L>) -> Result<Self> {
        fn ok<L>(node: &PNode<L>, space: Space) -> bool {
            match node {
                PNode::Leaf(_) => true,
                PNode::Query { form, children } => {
                    *form != 0
                        && *form < space.size()
                        && children.len() == space.p() as usize
                        && children.iter().all(|c| ok(c, space))
                }
            }
        }
        if !ok(&root, space) {
            return Err(Error::param("malformed p-ary tree"));
        }
        Ok(Self { space, root })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn root(&self) -> &PNode<L> {
        &self.root
    }

    /// Number of leaves.
    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn map_leaves<M>(self, f: impl Fn(L) -> M) -> PTree<M> {
        PTree { space: self.space, root: self.root.map(&f) }
    }

    pub fn leaf(&self, x: u64) -> &L {
        let mut node = &self.root;
        loop {
            match node {
                PNode::Leaf(l) => return l,
                PNode::Query { form, children } => node = &children[self.space.inner(*form, x) as usize],
            }
        }
    }

    /// True when the forms on every root-to-leaf path are independent over Z_p.
    pub fn paths_independent(&self) -> bool {
        fn walk<L>(node: &PNode<L>, basis: &ZpBasis) -> bool {
            match node {
                PNode::Leaf(_) => true,
                PNode::Query { form, children } => {
                    let mut b = basis.clone();
                    b.push(*form) && children.iter().all(|c| walk(c, &b))
                }
            }
        }
        walk(&self.root, &ZpBasis::new(self.space))
    }
}

impl PTree<Sign> {
    pub fn evaluate(&self, x: u64) -> Sign {
        *self.leaf(x)
    }

    pub fn truth_table(&self) -> ZpFunction {
        ZpFunction::from_fn(self.space.p(), self.space.n(), |x| self.evaluate(x)).expect("valid space")
    }

    pub fn disagreements(&self, f: &ZpFunction) -> u64 {
        assert_eq!(self.space, f.space(), "space mismatch");
        (0..self.space.size()).filter(|&x| self.evaluate(x) != f.eval(x)).count() as u64
    }

    pub fn distance(&self, f: &ZpFunction) -> f64 {
        self.disagreements(f) as f64 / self.space.size() as f64
    }

    /// Header `PDT p=<p> n=<n>` then pre-order `N <digits>` with `p` children, `L <+1|-1>`.
    pub fn to_text(&self) -> String {
        fn emit(node: &PNode<Sign>, space: Space, out: &mut String) {
            match node {
                PNode::Leaf(s) => out.push_str(&format!("L {s}\n")),
                PNode::Query { form, children } => {
                    out.push_str(&format!("N {}\n", space.fmt(*form)));
                    children.iter().for_each(|c| emit(c, space, out));
                }
            }
        }
        let mut out = format!("PDT p={} n={}\n", self.space.p(), self.space.n());
        emit(&self.root, self.space, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i, first) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let header = parse_header(first, "PDT", i + 1)?;
        let space = Space::new(header.p, header.n).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let mut last = i + 1;
        fn read<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            space: Space,
            last: &mut usize,
        ) -> Result<PNode<Sign>> {
            let (i, line) = lines.next().ok_or_else(|| Error::parse(*last + 1, "unexpected end of tree"))?;
            *last = i + 1;
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["N", g] => {
                    let form = space
                        .parse(g)
                        .filter(|&f| f != 0)
                        .ok_or_else(|| Error::parse(i + 1, format!("bad form `{g}`")))?;
                    let children = (0..space.p()).map(|_| read(lines, space, last)).collect::<Result<Vec<_>>>()?;
                    Ok(PNode::Query { form, children })
                }
                ["L", v] => Ok(PNode::Leaf(v.parse().map_err(|m| Error::parse(i + 1, m))?)),
                _ => Err(Error::parse(i + 1, "expected `N <form>` or `L <+1|-1>`")),
            }
        }
        let root = read(&mut lines, space, &mut last)?;
        if let Some((i, _)) = lines.next() {
            return Err(Error::parse(i + 1, "trailing lines after tree"));
        }
        PTree::new(space, root)
    }
}

impl fmt::Display for PTree<Sign> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `ceil(A^2 / c0)`.
pub fn codim_bound_p(a: f64) -> usize {
    (a * a / C0 - TAU).ceil().max(0.0) as usize
}

/// `log2(p^{2A^2/c} n^{2A/c})` with `c = min(c0, c1(p))`.
pub fn exact_size_bound_log2_p(p: u32, a: f64, n: u32) -> f64 {
    let c = C0.min(c1(p));
    2.0 * a * a / c * (p as f64).log2() + 2.0 * a / c * (n.max(1) as f64).log2()
}

/// `ceil(A^2 / c0) * max(1, ceil(log2 s))`.
pub fn sparse_depth_bound_p(a: f64, sparsity: usize) -> usize {
    let log_s = (sparsity.max(1) as f64).log2().ceil() as usize;
    codim_bound_p(a) * log_s.max(1)
}

/// `ceil((20 / c0) (A^2 + log2(1/eps)))`.
pub fn approx_depth_cap_p(a: f64, eps: f64) -> usize {
    (20.0 / C0 * (a * a + (1.0 / eps).log2())).ceil() as usize
}

/// Restriction path on which the function is constant, taking the largest drop each step.
pub fn find_constant_subspace_p(s: &ZpSpectrum) -> ZpChain {
    let mut chain = ZpChain::new(s.space());
    let mut cur = s.clone();
    while cur.constant_value().is_none() {
        let step = main_lemma_step_p(&cur).expect("a nonconstant function has norm above 1");
        let lam = step.best_branch();
        chain.push(step.eta, lam).expect("form fits");
        cur = step.restricted.into_iter().nth(lam as usize).expect("p branches");
    }
    chain
}

fn leaf_sign(s: &ZpSpectrum) -> Option<Sign> {
    let c = s.constant_value();
    assert!(c.is_some() || s.norm() > 1.0 + TAU, "norm one forces a constant");
    c
}

fn split(par: Parallelism, dim: u32) -> Parallelism {
    if dim >= 6 {
        par
    } else {
        Parallelism::Sequential
    }
}

pub fn synth_pdt_p(s: &ZpSpectrum) -> PTree<Sign> {
    synth_pdt_p_with(s, Parallelism::default())
}

/// Exact p-ary tree: query `beta - alpha` and recurse into all `p` branches.
pub fn synth_pdt_p_with(s: &ZpSpectrum, par: Parallelism) -> PTree<Sign> {
    fn node(s: &ZpSpectrum, chain: &ZpChain, par: Parallelism) -> PNode<Sign> {
        if let Some(c) = leaf_sign(s) {
            return PNode::Leaf(c);
        }
        let step = main_lemma_step_p(s).expect("norm above 1");
        let par = split(par, s.n());
        let children = exec::map_range(par, step.restricted.len(), |lam| {
            node(&step.restricted[lam], &chain.with(step.eta, lam as u32).expect("form fits"), par)
        });
        PNode::Query { form: chain.lift_form(step.eta), children }
    }
    let root = node(s, &ZpChain::new(s.space()), par);
    PTree::new(s.space(), root).expect("forms are lifted into range")
}

/// Exact p-ary tree of depth `O(A^2 log s)`: each round queries a whole
/// constant-subspace chain, which at least halves the sparsity of every branch.
pub fn synth_sparse_p(s: &ZpSpectrum) -> PTree<Sign> {
    fn round(s: &ZpSpectrum, chain: &ZpChain) -> PNode<Sign> {
        if let Some(c) = leaf_sign(s) {
            return PNode::Leaf(c);
        }
        let forms: Vec<u64> = find_constant_subspace_p(s).steps().iter().map(|st| st.form).collect();
        layer(s, chain, &forms, s.sparsity())
    }
    fn layer(s: &ZpSpectrum, chain: &ZpChain, forms: &[u64], parent: usize) -> PNode<Sign> {
        if let Some(c) = leaf_sign(s) {
            return PNode::Leaf(c);
        }
        let Some((&form, rest)) = forms.split_first() else {
            assert!(2 * s.sparsity() <= parent, "sparsity must halve across a layer");
            return round(s, chain);
        };
        let children = (0..s.p())
            .map(|lam| {
                let r = restrict_zp(s, form, lam).expect("form fits");
                layer(&r, &chain.with(form, lam).expect("form fits"), rest, parent)
            })
            .collect();
        PNode::Query { form: chain.lift_form(form), children }
    }
    let root = round(s, &ZpChain::new(s.space()));
    PTree::new(s.space(), root).expect("forms are lifted into range")
}

/// Functional p-ary tree whose rounding is within `eps` of the function.
///
/// Works with `eps/2` like the Z_2 version. Since `eps/2 < 1 - 1/sqrt 2`, a
/// coefficient above `1 - eps/2` can only be the constant one, so such a
/// node is a leaf.
pub fn synth_approx_p(s: &ZpSpectrum, eps: f64) -> Result<PTree<ZpLeaf>> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let e = eps / 2.0;
    let cap = approx_depth_cap_p(s.norm(), e);
    fn node(s: &ZpSpectrum, chain: &ZpChain, depth: usize, cap: usize, threshold: f64) -> PNode<ZpLeaf> {
        let leaf = || PNode::Leaf(ZpLeaf { mean: s.mean(), spectrum: s.clone() });
        let top = s.top();
        if s.coeff(top).norm() > threshold {
            assert_eq!(top, 0, "only the constant coefficient can dominate");
            return leaf();
        }
        if depth >= cap {
            return leaf();
        }
        let step = main_lemma_step_p(s).expect("norm above 1");
        let children = step
            .restricted
            .iter()
            .enumerate()
            .map(|(lam, r)| node(r, &chain.with(step.eta, lam as u32).expect("form fits"), depth + 1, cap, threshold))
            .collect();
        PNode::Query { form: chain.lift_form(step.eta), children }
    }
    let root = node(s, &ZpChain::new(s.space()), 0, cap, 1.0 - e);
    PTree::new(s.space(), root)
}

/// Sign of each leaf's mean (zero goes to `+1`).
pub fn round_to_ptree(t: &PTree<ZpLeaf>) -> PTree<Sign> {
    t.clone().map_leaves(|l| Sign::of(l.mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zp::{generate_zp, ZpKind};

    fn example() -> ZpFunction {
        ZpFunction::new(3, 1, vec![1, -1, -1]).unwrap()
    }

    #[test]
    fn basis_detects_dependence() {
        let s = Space::new(3, 3).unwrap();
        let mut b = ZpBasis::new(s);
        assert!(b.push(s.from_digits(&[1, 2, 0])));
        assert!(!b.push(s.from_digits(&[2, 1, 0])));
        assert!(b.push(s.from_digits(&[0, 1, 1])));
        assert!(!b.push(s.from_digits(&[1, 0, 1])));
        assert!(b.push(s.from_digits(&[0, 0, 1])));
        assert!(!b.push(0));
    }

    #[test]
    fn chain_lifts_into_subspace() {
        let sp = Space::new(5, 4).unwrap();
        let mut chain = ZpChain::new(sp);
        chain.push(sp.from_digits(&[0, 3, 1, 2]), 4).unwrap();
        chain.push(Space::new(5, 3).unwrap().from_digits(&[2, 0, 1]), 1).unwrap();
        let cur = chain.current();
        assert_eq!(cur.n(), 2);
        let mut lifted: Vec<u64> = (0..cur.size()).map(|x| chain.lift_point(x)).collect();
        for (x, &y) in lifted.iter().enumerate() {
            assert!(chain.contains(y));
            assert_eq!(chain.project_point(y), x as u64);
            for g in 0..cur.size() {
                assert_eq!(cur.inner(g, x as u64), sp.inner(chain.lift_form(g), y));
            }
        }
        lifted.sort();
        let members: Vec<u64> = (0..sp.size()).filter(|&x| chain.contains(x)).collect();
        assert_eq!(lifted, members);
    }

    #[test]
    fn exact_example() {
        let t = synth_pdt_p(&example().dft());
        assert_eq!(t.to_text(), "PDT p=3 n=1\nN 1\nL +1\nL -1\nL -1\n");
        assert_eq!(t.truth_table(), example());
        assert_eq!(PTree::from_text(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn constant_is_single_leaf_everywhere() {
        let f = ZpFunction::from_fn(3, 2, |_| Sign::Minus).unwrap();
        let s = f.dft();
        assert_eq!(synth_pdt_p(&s).size(), 1);
        assert_eq!(synth_sparse_p(&s).size(), 1);
        assert_eq!(synth_approx_p(&s, 0.1).unwrap().size(), 1);
        assert!(find_constant_subspace_p(&s).is_empty());
    }

    #[test]
    fn subspace_indicator_within_bounds() {
        for seed in 0..5 {
            let f = generate_zp(&ZpKind::SubspaceIndicator { k: 2 }, 3, 3, seed).unwrap();
            let s = f.dft();
            let a = s.norm();
            let t = synth_pdt_p(&s);
            assert_eq!(t.truth_table(), f);
            assert!(t.paths_independent());
            assert!((t.size() as f64).log2() <= exact_size_bound_log2_p(3, a, 3));
            let chain = find_constant_subspace_p(&s);
            assert!(chain.len() <= codim_bound_p(a));
            let vals: Vec<Sign> = (0..9).map(|x| f.eval(chain.lift_point(x))).collect();
            assert!(vals.iter().all(|&v| v == vals[0]));
            let sp = synth_sparse_p(&s);
            assert_eq!(sp.truth_table(), f);
            assert!(sp.depth() <= sparse_depth_bound_p(a, s.sparsity()));
        }
    }

    #[test]
    fn exact_and_sparse_over_all_two_digit_functions() {
        for idx in 0..512 {
            let f = ZpFunction::from_index(3, 2, idx).unwrap();
            let s = f.dft();
            let t = synth_pdt_p(&s);
            assert_eq!(t.truth_table(), f, "idx={idx}");
            assert!(t.paths_independent());
            let sp = synth_sparse_p(&s);
            assert_eq!(sp.truth_table(), f);
            assert!(sp.depth() <= sparse_depth_bound_p(s.norm(), s.sparsity()));
        }
    }

    #[test]
    fn approx_within_eps() {
        for (kind, p, n) in
            [(ZpKind::MajorityLike, 3, 5), (ZpKind::Random, 5, 3), (ZpKind::SubspaceIndicator { k: 1 }, 3, 4)]
        {
            let f = generate_zp(&kind, p, n, 2).unwrap();
            let s = f.dft();
            let ft = synth_approx_p(&s, 0.1).unwrap();
            assert!(ft.depth() <= approx_depth_cap_p(s.norm(), 0.05));
            assert!(round_to_ptree(&ft).distance(&f) <= 0.1);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = generate_zp(&ZpKind::Random, 3, 7, 9).unwrap();
        let s = f.dft();
        assert_eq!(synth_pdt_p_with(&s, Parallelism::Sequential), synth_pdt_p_with(&s, Parallelism::Parallel));
    }

    #[test]
    fn text_errors() {
        assert!(PTree::from_text("PDT p=3 n=1\nN 1\nL +1\nL -1\n").is_err());
        assert!(PTree::from_text("PDT p=3 n=1\nN 3\nL +1\nL -1\nL -1\n").is_err());
        assert!(PTree::from_text("PDT p=3 n=1\nN 0\nL +1\nL -1\nL -1\n").is_err());
    }
}
