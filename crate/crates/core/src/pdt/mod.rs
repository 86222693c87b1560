//! Parity decision trees over Z_2^n.
//!
//! An internal node queries `<g, x>` and goes to `plus` when it is 0
//! (`chi_g(x) = +1`) and to `minus` otherwise.

mod synth;

pub use synth::{
    approx_depth_cap, approx_size_bound_log2, exact_size_bound_log2, round_to_pdt, sparse_depth_bound, synth_approx,
    synth_approx_with, synth_exact, synth_exact_with, synth_sparse_depth, unbiased_leaf_mass,
};

use std::fmt;

use rand::Rng;

use crate::bits::{fmt_binary, parse_binary};
use crate::boolfn::{parse_header, BooleanFunction, Sign, Spectrum};
use crate::error::{Error, Result};
use crate::restriction::{AffineRestriction, LinearForm};
use crate::{seeded_rng, Rational};
use num_traits::Signed;

/// A tree node with leaves of type `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node<L> {
    Leaf(L),
    Query { form: LinearForm, plus: Box<Node<L>>, minus: Box<Node<L>> },
}

impl<L> Node<L> {
    pub fn query(form: LinearForm, plus: Node<L>, minus: Node<L>) -> Self {
        Node::Query { form, plus: Box::new(plus), minus: Box::new(minus) }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Query { plus, minus, .. } => plus.size() + minus.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Query { plus, minus, .. } => 1 + plus.depth().max(minus.depth()),
        }
    }

    fn map<M>(self, f: &impl Fn(L) -> M) -> Node<M> {
        match self {
            Node::Leaf(l) => Node::Leaf(f(l)),
            Node::Query { form, plus, minus } => Node::query(form, plus.map(f), minus.map(f)),
        }
    }
}

/// A parity tree on `n` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree<L> {
    n: u32,
    root: Node<L>,
}

/// Tree with constant leaves.
pub type ParityDecisionTree = Tree<Sign>;

/// Tree whose leaves hold the restricted function.
pub type FunctionalPdt = Tree<FunctionalLeaf>;

/// Leaf of a functional tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalLeaf {
    /// Signed constant coefficient of the restricted function.
    pub mean: Rational,
    /// The restricted spectrum in the leaf's reduced coordinates (absent after parsing).
    pub spectrum: Option<Spectrum>,
}

impl FunctionalLeaf {
    /// `|f^(0)|` of the restricted function.
    pub fn bias(&self) -> Rational {
        self.mean.abs()
    }
}

/// Root-to-leaf path: the `(form, branch)` pairs taken, and the leaf.
pub type LeafPath<'a, L> = (Vec<(LinearForm, Sign)>, &'a L);

impl<L> Tree<L> {
    pub fn new(n: u32, root: Node<L>) -> Result<Self> {
        let t = Self { n, root };
        if !t.forms_fit() {
            return Err(Error::param(format!("tree queries a form wider than n={n}")));
        }
        Ok(t)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn root(&self) -> &Node<L> {
        &self.root
    }

    /// Number of leaves.
    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn map_leaves<M>(self, f: impl Fn(L) -> M) -> Tree<M> {
        Tree { n: self.n, root: self.root.map(&f) }
    }

    /// The leaf reached by input `x`.
    pub fn leaf(&self, x: u64) -> &L {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(l) => return l,
                Node::Query { form, plus, minus } => {
                    node = if form.eval(x) == Sign::Plus { plus } else { minus };
                }
            }
        }
    }

    /// Every root-to-leaf path in pre-order.
    pub fn leaf_paths(&self) -> Vec<LeafPath<'_, L>> {
        fn walk<'a, L>(node: &'a Node<L>, path: &mut Vec<(LinearForm, Sign)>, out: &mut Vec<LeafPath<'a, L>>) {
            match node {
                Node::Leaf(l) => out.push((path.clone(), l)),
                Node::Query { form, plus, minus } => {
                    path.push((*form, Sign::Plus));
                    walk(plus, path, out);
                    path.pop();
                    path.push((*form, Sign::Minus));
                    walk(minus, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// True when the forms along every path are linearly independent.
    pub fn paths_independent(&self) -> bool {
        self.leaf_paths().iter().all(|(path, _)| {
            let mut r = AffineRestriction::new(self.n);
            path.iter().all(|&(g, b)| r.push(g, b).is_ok())
        })
    }

    fn forms_fit(&self) -> bool {
        fn fits<L>(node: &Node<L>, n: u32) -> bool {
            match node {
                Node::Leaf(_) => true,
                Node::Query { form, plus, minus } => form.mask() >> n == 0 && fits(plus, n) && fits(minus, n),
            }
        }
        fits(&self.root, self.n)
    }
}

impl ParityDecisionTree {
    pub fn evaluate(&self, x: u64) -> Sign {
        *self.leaf(x)
    }

    /// The function the tree computes.
    pub fn truth_table(&self) -> BooleanFunction {
        BooleanFunction::from_fn(self.n, |x| self.evaluate(x)).expect("tree dimension is valid")
    }

    /// Number of inputs where the tree disagrees with `f`.
    pub fn disagreements(&self, f: &BooleanFunction) -> u64 {
        assert_eq!(self.n, f.n(), "dimension mismatch");
        (0..1u64 << self.n).filter(|&x| self.evaluate(x) != f.eval(x)).count() as u64
    }

    pub fn distance(&self, f: &BooleanFunction) -> f64 {
        self.disagreements(f) as f64 / (1u64 << self.n) as f64
    }
}

/// Leaf encodings for the text format.
pub trait LeafText: Sized {
    fn fmt_leaf(&self) -> String;
    fn parse_leaf(line: &str, line_no: usize) -> Result<Self>;
}

impl LeafText for Sign {
    fn fmt_leaf(&self) -> String {
        format!("L {self}")
    }

    fn parse_leaf(line: &str, line_no: usize) -> Result<Self> {
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["L", v] => v.parse().map_err(|m| Error::parse(line_no, m)),
            _ => Err(Error::parse(line_no, "expected `L <+1|-1>`")),
        }
    }
}

impl LeafText for FunctionalLeaf {
    fn fmt_leaf(&self) -> String {
        format!("F {}", self.mean)
    }

    fn parse_leaf(line: &str, line_no: usize) -> Result<Self> {
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["F", v] => {
                let mean: Rational = v.parse().map_err(|_| Error::parse(line_no, format!("bad rational `{v}`")))?;
                Ok(FunctionalLeaf { mean, spectrum: None })
            }
            _ => Err(Error::parse(line_no, "expected `F <bias>`")),
        }
    }
}

impl<L: LeafText> Tree<L> {
    /// Header `PDT p=2 n=<n>` then pre-order `N <form>` / leaf lines.
    pub fn to_text(&self) -> String {
        fn emit<L: LeafText>(node: &Node<L>, n: u32, out: &mut String) {
            match node {
                Node::Leaf(l) => {
                    out.push_str(&l.fmt_leaf());
                    out.push('\n');
                }
                Node::Query { form, plus, minus } => {
                    out.push_str(&format!("N {}\n", fmt_binary(form.mask(), n)));
                    emit(plus, n, out);
                    emit(minus, n, out);
                }
            }
        }
        let mut out = format!("PDT p=2 n={}\n", self.n);
        emit(&self.root, self.n, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i, first) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let header = parse_header(first, "PDT", i + 1)?;
        if header.p != 2 {
            return Err(Error::parse(i + 1, "expected p=2"));
        }
        let n = header.n;
        let mut last = i + 1;
        fn read<'a, L: LeafText>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            n: u32,
            last: &mut usize,
        ) -> Result<Node<L>> {
            let (i, line) = lines.next().ok_or_else(|| Error::parse(*last + 1, "unexpected end of tree"))?;
            *last = i + 1;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("N ") {
                let rest = rest.trim();
                let mask = parse_binary(rest)
                    .filter(|_| rest.len() == n as usize)
                    .ok_or_else(|| Error::parse(i + 1, format!("bad form `{rest}`")))?;
                let form = LinearForm::new(mask).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                let plus = read(lines, n, last)?;
                let minus = read(lines, n, last)?;
                Ok(Node::query(form, plus, minus))
            } else {
                Ok(Node::Leaf(L::parse_leaf(line, i + 1)?))
            }
        }
        let root = read(&mut lines, n, &mut last)?;
        if let Some((i, _)) = lines.next() {
            return Err(Error::parse(i + 1, "trailing lines after tree"));
        }
        Tree::new(n, root)
    }
}

impl<L: LeafText> fmt::Display for Tree<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A random parity tree with exactly `size` leaves and independent forms on every path.
pub fn random_tree(n: u32, size: usize, seed: u64) -> Result<ParityDecisionTree> {
    if size == 0 || n >= 63 || size as u128 > 1u128 << n {
        return Err(Error::param(format!("cannot fit {size} leaves in a tree on {n} variables")));
    }
    fn build(n: u32, leaves: usize, path: &AffineRestriction, rng: &mut crate::SeededRng) -> Node<Sign> {
        if leaves == 1 {
            return Node::Leaf(if rng.random::<bool>() { Sign::Plus } else { Sign::Minus });
        }
        let form = loop {
            let g = LinearForm::new(rng.random_range(1..1u64 << n)).expect("nonzero");
            if path.is_independent(g) {
                break g;
            }
        };
        let cap = 1usize << (n as usize - path.codim() - 1);
        let lo = leaves.saturating_sub(cap).max(1);
        let hi = (leaves - 1).min(cap);
        let left = rng.random_range(lo..=hi);
        let mut p = path.clone();
        p.push(form, Sign::Plus).expect("independent");
        let plus = build(n, left, &p, rng);
        let minus = build(n, leaves - left, &p, rng);
        Node::query(form, plus, minus)
    }
    let mut rng = seeded_rng(seed);
    let root = build(n, size, &AffineRestriction::new(n), &mut rng);
    Tree::new(n, root)
}

/// Size/depth versus sparsity/norm of the computed function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleFacts {
    pub size: usize,
    pub depth: usize,
    pub sparsity: usize,
    pub norm: Rational,
}

impl SimpleFacts {
    /// `spar <= m 2^k` and `A <= m`.
    pub fn holds(&self) -> bool {
        let cap = (self.size as u128) << self.depth.min(100);
        (self.sparsity as u128) <= cap && self.norm <= Rational::from_integer(self.size as i64)
    }
}

/// Evaluate the tree, transform, and compare with its size and depth.
pub fn check_simple_facts(t: &ParityDecisionTree) -> SimpleFacts {
    let s = t.truth_table().wht();
    SimpleFacts { size: t.size(), depth: t.depth(), sparsity: s.sparsity(), norm: s.spectral_norm() }
}
