//! Numeric checks of the Z_p inequalities, each with `TAU` slack.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{c1, restrict_zp, triangle_constant, ZpSpectrum, TAU};
use crate::error::{Error, Result};

/// Universal drop constant.
pub const C0: f64 = 1.0 / 12.0;

/// `sum_a f^(a) f^(beta - a)`, which vanishes for a ±1 function when `beta != 0`.
pub fn convolution_check_p(s: &ZpSpectrum, beta: u64) -> Result<Complex64> {
    let space = s.space();
    if beta == 0 {
        return Err(Error::ZeroShift);
    }
    if beta >= space.size() {
        return Err(Error::FormOutOfRange(beta));
    }
    Ok((0..space.size()).map(|a| s.coeff(a) * s.coeff(space.sub(beta, a))).sum())
}

/// Angle in `[0, pi]` between two complex numbers (0 if either vanishes).
pub fn angle_between(z1: Complex64, z2: Complex64) -> f64 {
    let (a, b) = (z1.norm(), z2.norm());
    if a <= TAU || b <= TAU {
        return 0.0;
    }
    ((z1 * z2.conj()).re / (a * b)).clamp(-1.0, 1.0).acos()
}

/// `|z1| + |z2| - |z1 + z2|` with its lower-bound certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGap {
    pub gap: f64,
    pub angle: f64,
    /// `C(angle) * min(|z1|, |z2|)`.
    pub bound: f64,
}

impl TriangleGap {
    pub fn holds(&self) -> bool {
        self.gap >= self.bound - TAU
    }
}

pub fn triangle_gap(z1: Complex64, z2: Complex64) -> TriangleGap {
    let (big, small) = if z2.norm() <= z1.norm() { (z1, z2) } else { (z2, z1) };
    let angle = angle_between(big, small);
    let gap = big.norm() + small.norm() - (big + small).norm();
    TriangleGap { gap, angle, bound: triangle_constant(angle) * small.norm() }
}

/// `(lhs, rhs)` where `lhs` is the L1 loss of collapsing the cosets of `eta`
/// with phase `lambda`, and `rhs` sums the pairwise losses
/// `|f^(g)| + |f^(g + eta)| - |f^(g) + omega^lambda f^(g + eta)|` over all `g`.
/// The bound is `3 lhs >= rhs`.
pub fn overcount_check(s: &ZpSpectrum, eta: u64, lambda: u32) -> Result<(f64, f64)> {
    let space = s.space();
    let restricted = restrict_zp(s, eta, lambda)?;
    let lhs = s.norm() - restricted.norm();
    let w = space.roots()[(lambda % space.p()) as usize];
    let rhs = (0..space.size())
        .map(|g| {
            let (a, b) = (s.coeff(g), s.coeff(space.add(g, eta)));
            a.norm() + b.norm() - (a + w * b).norm()
        })
        .sum();
    Ok((lhs, rhs))
}

/// When `f^(0)` is a largest coefficient and `beta` the runner-up, returns
/// `(2 |f^(0)|, sum over g not in {0, beta} of min(|f^(g)|, |f^(g - beta)|))`.
pub fn largest_coeff_inequality(s: &ZpSpectrum) -> Option<(f64, f64)> {
    let (alpha, beta) = s.top_two().ok()?;
    if alpha != 0 {
        return None;
    }
    let space = s.space();
    let rhs = (1..space.size())
        .filter(|&g| g != beta)
        .map(|g| s.coeff(g).norm().min(s.coeff(space.sub(g, beta)).norm()))
        .sum();
    Some((2.0 * s.coeff(0).norm(), rhs))
}

/// Restrictions on `<eta, x> = lambda` for every `lambda`, `eta = beta - alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReportP {
    pub alpha: u64,
    pub beta: u64,
    pub eta: u64,
    /// Indexed by `lambda`.
    pub drops: Vec<f64>,
    pub restricted: Vec<ZpSpectrum>,
}

impl StepReportP {
    fn count_at_least(&self, bound: f64) -> usize {
        self.drops.iter().filter(|&&d| d >= bound - TAU).count()
    }

    /// Every drop is at least `c0 |f^(beta)|`.
    pub fn item1(&self, s: &ZpSpectrum) -> bool {
        self.count_at_least(C0 * s.coeff(self.beta).norm()) == self.drops.len()
    }

    /// At least `floor(p/3)` drops reach `c0 |f^(alpha)|`.
    pub fn item2(&self, s: &ZpSpectrum) -> bool {
        self.count_at_least(C0 * s.coeff(self.alpha).norm()) >= (s.p() / 3) as usize
    }

    /// At least `p - 1` drops reach `c1(p) |f^(alpha)|`.
    pub fn item3(&self, s: &ZpSpectrum) -> bool {
        self.count_at_least(c1(s.p()) * s.coeff(self.alpha).norm()) >= s.p() as usize - 1
    }

    pub fn items_hold(&self, s: &ZpSpectrum) -> bool {
        self.item1(s) && self.item2(s) && self.item3(s)
    }

    /// Wherever `f^(alpha)` and `omega^lambda f^(beta)` are within `pi/3`,
    /// the drop is at least `C(pi/2) cos(pi/3) / 3 * |f^(alpha)|`.
    pub fn aligned_bound_holds(&self, s: &ZpSpectrum) -> bool {
        let roots = s.space().roots();
        let (fa, fb) = (s.coeff(self.alpha), s.coeff(self.beta));
        let bound = triangle_constant(PI / 2.0) * (PI / 3.0).cos() / 3.0 * fa.norm();
        self.drops
            .iter()
            .enumerate()
            .all(|(lam, &d)| angle_between(fa, roots[lam] * fb) > PI / 3.0 + TAU || d >= bound - TAU)
    }

    /// Index of the largest drop (smallest `lambda` on ties).
    pub fn best_branch(&self) -> u32 {
        let m = self.drops.iter().copied().fold(f64::MIN, f64::max);
        self.drops.iter().position(|&d| d >= m - TAU).expect("p drops") as u32
    }
}

/// Restrict on `chi_{beta - alpha}` for every branch and report the L1 drops.
pub fn main_lemma_step_p(s: &ZpSpectrum) -> Result<StepReportP> {
    let norm = s.norm();
    if norm <= 1.0 + TAU {
        return Err(Error::NormOne);
    }
    let (alpha, beta) = s.top_two()?;
    let eta = s.space().sub(beta, alpha);
    let restricted = (0..s.p()).map(|lam| restrict_zp(s, eta, lam)).collect::<Result<Vec<_>>>()?;
    let drops = restricted.iter().map(|r| norm - r.norm()).collect();
    let report = StepReportP { alpha, beta, eta, drops, restricted };
    debug_assert!(report.items_hold(s));
    Ok(report)
}
