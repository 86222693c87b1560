//! Restrictions of Boolean functions to affine subspaces of Z_2^n.
//!
//! A restriction to `chi_g(x) = b` collapses each coset `{beta, beta ^ g}` of
//! the spectrum into one coefficient and deletes the pivot (lowest set bit of
//! `g`) from the coordinates, so the result is again a dense table.

use std::fmt;

use crate::bits::{fmt_binary, insert_bit, parity, parse_binary, remove_bit};
use crate::boolfn::{BooleanFunction, Sign, Spectrum};
use crate::error::{Error, Result};
use crate::Rational;
use num_traits::Signed;

/// A nonzero linear form `x -> <mask, x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm(u64);

impl LinearForm {
    pub fn new(mask: u64) -> Result<Self> {
        if mask == 0 {
            Err(Error::ZeroForm)
        } else {
            Ok(Self(mask))
        }
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    /// Position of the lowest set bit.
    pub fn pivot(self) -> u32 {
        self.0.trailing_zeros()
    }

    /// `chi_mask(x)`.
    #[inline]
    pub fn eval(self, x: u64) -> Sign {
        Sign::from_parity(parity(self.0 & x))
    }
}

/// Independent system of constraints `chi_g(x) = b` over Z_2^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineRestriction {
    n: u32,
    constraints: Vec<(LinearForm, Sign)>,
    /// Row-echelon basis of the span of the forms, indexed by leading bit.
    basis: Vec<u64>,
}

impl AffineRestriction {
    pub fn new(n: u32) -> Self {
        Self { n, constraints: Vec::new(), basis: vec![0; n as usize] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[(LinearForm, Sign)] {
        &self.constraints
    }

    /// Reduce `mask` against the echelon basis; zero means it is in the span.
    fn reduce(&self, mut mask: u64) -> u64 {
        for bit in (0..self.n).rev() {
            if mask >> bit & 1 == 1 && self.basis[bit as usize] != 0 {
                mask ^= self.basis[bit as usize];
            }
        }
        mask
    }

    pub fn is_independent(&self, form: LinearForm) -> bool {
        self.reduce(form.mask()) != 0
    }

    /// Append a constraint, rejecting forms in the span of earlier ones.
    pub fn push(&mut self, form: LinearForm, value: Sign) -> Result<()> {
        if form.mask() >> self.n != 0 {
            return Err(Error::FormOutOfRange(form.mask()));
        }
        let r = self.reduce(form.mask());
        if r == 0 {
            return Err(Error::DependentForm);
        }
        self.basis[63 - r.leading_zeros() as usize] = r;
        self.constraints.push((form, value));
        Ok(())
    }

    pub fn contains(&self, x: u64) -> bool {
        self.constraints.iter().all(|&(g, b)| g.eval(x) == b)
    }

    /// Values of `f` on the subspace, in ascending order of the ambient point.
    pub fn values_on(&self, f: &BooleanFunction) -> Vec<i8> {
        (0..1u64 << f.n()).filter(|&x| self.contains(x)).map(|x| f.value(x)).collect()
    }

    /// `Some(s)` if `f` is the constant `s` on the subspace, checked point by point.
    pub fn constant_on(&self, f: &BooleanFunction) -> Option<Sign> {
        let vals = self.values_on(f);
        let first = *vals.first()?;
        vals.iter().all(|&v| v == first).then(|| Sign::of(first))
    }

    pub fn to_text(&self) -> String {
        self.constraints.iter().map(|(g, b)| format!("{} {}\n", fmt_binary(g.mask(), self.n), b)).collect()
    }

    pub fn from_text(text: &str, n: u32) -> Result<Self> {
        let mut r = Self::new(n);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            let (Some(g), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(i + 1, "expected `<gamma> <+1|-1>`"));
            };
            let mask = parse_binary(g)
                .filter(|_| g.len() == n as usize)
                .ok_or_else(|| Error::parse(i + 1, format!("bad form `{g}`")))?;
            let b: Sign = b.parse().map_err(|m| Error::parse(i + 1, m))?;
            let form = LinearForm::new(mask).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            r.push(form, b).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(r)
    }
}

impl fmt::Display for AffineRestriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Collapse the spectrum onto `chi_g = b`; the result has `n - 1` variables.
pub fn restrict(s: &Spectrum, g: LinearForm, b: Sign) -> Result<Spectrum> {
    let n = s.n();
    if n == 0 || g.mask() >> n != 0 {
        return Err(Error::FormOutOfRange(g.mask()));
    }
    let pivot = g.pivot();
    let src = s.scaled();
    let gm = g.mask() as usize;
    let scaled = (0..1u64 << (n - 1))
        .map(|r| {
            let beta = insert_bit(r, pivot, false) as usize;
            let sum = match b {
                Sign::Plus => src[beta] + src[beta ^ gm],
                Sign::Minus => src[beta] - src[beta ^ gm],
            };
            assert!(sum % 2 == 0, "coset sum must be even");
            sum / 2
        })
        .collect();
    Spectrum::from_scaled(n - 1, scaled)
}

/// Restrict a truth table to `chi_g = b` directly, in the same reduced coordinates as [`restrict`].
pub fn restrict_table(f: &BooleanFunction, g: LinearForm, b: Sign) -> Result<BooleanFunction> {
    let mut chain = RestrictionChain::new(f.n());
    chain.push(g, b)?;
    Ok(chain.restrict_table(f))
}

/// One step of a restriction path, stated in the coordinates current at that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainStep {
    pub form: LinearForm,
    pub value: Sign,
}

/// A sequence of co-dimension-1 restrictions with coordinate bookkeeping.
///
/// Each step deletes the pivot coordinate of its form; forms and points in
/// the reduced space are lifted back to the ambient space on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictionChain {
    ambient: u32,
    steps: Vec<ChainStep>,
}

impl RestrictionChain {
    pub fn new(n: u32) -> Self {
        Self { ambient: n, steps: Vec::new() }
    }

    pub fn ambient_dim(&self) -> u32 {
        self.ambient
    }

    /// Number of free coordinates left.
    pub fn dim(&self) -> u32 {
        self.ambient - self.steps.len() as u32
    }

    pub fn steps(&self) -> &[ChainStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Restrict further on `chi_form = value`, `form` in current coordinates.
    pub fn push(&mut self, form: LinearForm, value: Sign) -> Result<()> {
        if form.mask() >> self.dim() != 0 {
            return Err(Error::FormOutOfRange(form.mask()));
        }
        self.steps.push(ChainStep { form, value });
        Ok(())
    }

    pub fn with(&self, form: LinearForm, value: Sign) -> Result<Self> {
        let mut c = self.clone();
        c.push(form, value)?;
        Ok(c)
    }

    pub fn pop(&mut self) -> Option<ChainStep> {
        self.steps.pop()
    }

    fn lift_form_through(steps: &[ChainStep], mut mask: u64) -> u64 {
        for st in steps.iter().rev() {
            mask = insert_bit(mask, st.form.pivot(), false);
        }
        mask
    }

    /// Ambient form equal to `chi_mask` on the current subspace.
    pub fn lift_form(&self, mask: u64) -> u64 {
        Self::lift_form_through(&self.steps, mask)
    }

    /// Ambient form of step `i`.
    pub fn ambient_form(&self, i: usize) -> LinearForm {
        LinearForm(Self::lift_form_through(&self.steps[..i], self.steps[i].form.mask()))
    }

    /// The ambient point of the subspace with reduced coordinates `x`.
    #[inline]
    pub fn lift_point(&self, mut x: u64) -> u64 {
        for st in self.steps.iter().rev() {
            let x0 = insert_bit(x, st.form.pivot(), false);
            let bit = parity(st.form.mask() & x0) ^ st.value.is_minus();
            x = x0 | (bit as u64) << st.form.pivot();
        }
        x
    }

    /// Reduced coordinates of an ambient point (only meaningful for points of the subspace).
    pub fn project_point(&self, mut x: u64) -> u64 {
        for st in &self.steps {
            x = remove_bit(x, st.form.pivot());
        }
        x
    }

    /// Inverse of [`lift_form`](Self::lift_form) for forms that vanish on every pivot.
    pub fn project_form(&self, mask: u64) -> u64 {
        self.project_point(mask)
    }

    pub fn to_affine(&self) -> AffineRestriction {
        let mut r = AffineRestriction::new(self.ambient);
        for (i, st) in self.steps.iter().enumerate() {
            r.push(self.ambient_form(i), st.value).expect("forms along a chain are independent");
        }
        r
    }

    /// The restricted truth table in reduced coordinates.
    pub fn restrict_table(&self, f: &BooleanFunction) -> BooleanFunction {
        assert_eq!(f.n(), self.ambient, "dimension mismatch");
        BooleanFunction::from_fn(self.dim(), |x| f.eval(self.lift_point(x))).expect("dimension already validated")
    }
}

/// Result of one norm-reducing restriction step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub alpha: u64,
    pub beta: u64,
    /// `alpha ^ beta`.
    pub delta: LinearForm,
    pub drop_plus: Rational,
    pub drop_minus: Rational,
    pub restricted_plus: Spectrum,
    pub restricted_minus: Spectrum,
}

impl StepReport {
    pub fn drop(&self, b: Sign) -> Rational {
        match b {
            Sign::Plus => self.drop_plus,
            Sign::Minus => self.drop_minus,
        }
    }

    pub fn restricted(&self, b: Sign) -> &Spectrum {
        match b {
            Sign::Plus => &self.restricted_plus,
            Sign::Minus => &self.restricted_minus,
        }
    }

    /// The branch where `chi_delta` agrees with the sign of `f^(alpha) f^(beta)`.
    pub fn aligned_branch(&self, s: &Spectrum) -> Sign {
        Sign::of(s.scaled_at(self.alpha)) * Sign::of(s.scaled_at(self.beta))
    }

    /// Check the two sign-cased drop bounds and the `1/A` bound against `s`.
    pub fn guarantees_hold(&self, s: &Spectrum) -> bool {
        let a = s.coeff(self.alpha).abs();
        let b = s.coeff(self.beta).abs();
        let aligned = self.aligned_branch(s);
        let cased = self.drop(aligned) >= a && self.drop(-aligned) >= b;
        let norm = s.spectral_norm();
        let best = self.drop_plus.max(self.drop_minus);
        cased && best * norm >= Rational::from_integer(1)
    }
}

/// Restrict on `chi_{alpha ^ beta}` both ways and report the norm drops.
pub fn main_lemma_step(s: &Spectrum) -> Result<StepReport> {
    if s.l1_scaled() == s.scale() {
        return Err(Error::NormOne);
    }
    let (alpha, beta) = s.top_two()?;
    let delta = LinearForm::new(alpha ^ beta)?;
    let norm = s.spectral_norm();
    let restricted_plus = restrict(s, delta, Sign::Plus)?;
    let restricted_minus = restrict(s, delta, Sign::Minus)?;
    let report = StepReport {
        alpha,
        beta,
        delta,
        drop_plus: norm - restricted_plus.spectral_norm(),
        drop_minus: norm - restricted_minus.spectral_norm(),
        restricted_plus,
        restricted_minus,
    };
    debug_assert!(report.guarantees_hold(s));
    Ok(report)
}

/// Branch selection rule for [`find_constant_subspace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Take the branch with the larger norm drop (ties go to `+1`).
    #[default]
    Basic,
    /// As `Basic` until the top coefficient reaches 1/2, then take the branch
    /// with the larger new top coefficient.
    Accelerated,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "basic" => Ok(Mode::Basic),
            "accelerated" => Ok(Mode::Accelerated),
            _ => Err(format!("unknown mode `{s}` (basic|accelerated)")),
        }
    }
}

fn choose_branch(s: &Spectrum, step: &StepReport, mode: Mode) -> Sign {
    let top = s.scaled_at(s.top()).abs();
    if mode == Mode::Accelerated && 2 * top >= s.scale() {
        let key = |b: Sign| {
            let r = step.restricted(b);
            (r.scaled_at(r.top()).abs(), step.drop(b))
        };
        return if key(Sign::Minus) > key(Sign::Plus) { Sign::Minus } else { Sign::Plus };
    }
    if step.drop_minus > step.drop_plus {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// Restriction path (in reduced coordinates) on which `s` becomes constant.
pub fn constant_subspace_chain(s: &Spectrum, mode: Mode) -> RestrictionChain {
    let mut chain = RestrictionChain::new(s.n());
    let mut cur = s.clone();
    while cur.constant_value().is_none() {
        if let Some((alpha, _)) = cur.signed_character() {
            let form = LinearForm::new(alpha).expect("nonconstant character has alpha != 0");
            chain.push(form, Sign::Plus).expect("form fits");
            break;
        }
        let step = main_lemma_step(&cur).expect("norm above 1");
        let b = choose_branch(&cur, &step, mode);
        chain.push(step.delta, b).expect("form fits");
        cur = match b {
            Sign::Plus => step.restricted_plus,
            Sign::Minus => step.restricted_minus,
        };
    }
    chain
}

/// An affine subspace on which the function is constant.
pub fn find_constant_subspace(s: &Spectrum, mode: Mode) -> AffineRestriction {
    constant_subspace_chain(s, mode).to_affine()
}

/// `ceil(A^2)` for the exact norm `A`.
pub fn ceil_norm_squared(a: Rational) -> u64 {
    let num = *a.numer() as i128;
    let den = *a.denom() as i128;
    let (n2, d2) = (num * num, den * den);
    ((n2 + d2 - 1) / d2) as u64
}
