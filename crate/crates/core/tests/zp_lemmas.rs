use std::f64::consts::PI;

use num_complex::Complex64;
use spectral_pdt::zp::{
    angle_between, c1, largest_coeff_inequality, main_lemma_step_p, ZpFunction, ZpSpectrum, C0, TAU,
};

fn all_tables(p: u32, n: u32) -> impl Iterator<Item = ZpSpectrum> {
    let size = (p as u64).pow(n);
    (0..1u64 << size).map(move |i| ZpFunction::from_index(p, n, i).unwrap().dft())
}

/// Brute-force transform straight from the definition.
fn naive(f: &ZpFunction) -> Vec<Complex64> {
    let s = f.space();
    let size = s.size();
    (0..size)
        .map(|a| {
            (0..size)
                .map(|x| {
                    let k = s.inner(a, x) as f64;
                    Complex64::from_polar(1.0, -2.0 * PI * k / s.p() as f64) * f.values()[x as usize] as f64
                })
                .sum::<Complex64>()
                / size as f64
        })
        .collect()
}

#[test]
fn transform_matches_definition_for_p5() {
    for i in (0..1u64 << 25).step_by(1 << 19) {
        let f = ZpFunction::from_index(5, 2, i * 7919 % (1 << 25)).unwrap();
        for (a, b) in f.dft().coeffs().iter().zip(naive(&f)) {
            assert!((a - b).norm() <= TAU);
        }
    }
}

#[test]
fn norm_one_only_for_constants() {
    for n in 0..=2 {
        for s in all_tables(3, n) {
            let one = (s.norm() - 1.0).abs() <= TAU;
            assert_eq!(one, s.constant_value().is_some());
        }
    }
}

#[test]
fn largest_coefficient_inequality_exhaustive() {
    let mut applied = 0;
    for s in all_tables(3, 1).chain(all_tables(3, 2)).chain(all_tables(5, 1)) {
        if let Some((lhs, rhs)) = largest_coeff_inequality(&s) {
            assert!(lhs <= rhs + TAU, "{lhs} > {rhs}");
            applied += 1;
        }
    }
    assert_eq!(applied, 100);
}

/// Rebuild the weight matrix of the zero-maximal case and check that all but
/// at most one column carry half of the total pair weight.
#[test]
fn good_columns_when_zero_is_largest() {
    let mut cases = 0;
    for s in all_tables(3, 1).chain(all_tables(3, 2)).chain(all_tables(5, 1)) {
        let Ok((0, beta)) = s.top_two() else { continue };
        if s.constant_value().is_some() {
            continue;
        }
        let space = s.space();
        let p = space.p();
        let roots = space.roots();
        let rows: Vec<u64> = (1..space.size()).filter(|&g| g != beta).collect();
        let w = |g: u64| s.coeff(g).norm().min(s.coeff(space.sub(g, beta)).norm());
        let total: f64 = rows.iter().map(|&g| w(g)).sum();
        let good_columns = (0..p)
            .filter(|&lam| {
                let col: f64 = rows
                    .iter()
                    .filter(|&&g| {
                        let rot = roots[(lam * (p - 1) % p) as usize] * s.coeff(space.sub(g, beta));
                        angle_between(s.coeff(g), rot) >= PI / p as f64 - 1e-9
                    })
                    .map(|&g| w(g))
                    .sum();
                col >= total / 2.0 - TAU
            })
            .count();
        assert!(good_columns >= p as usize - 1);
        let step = main_lemma_step_p(&s).unwrap();
        assert!(step.item3(&s));
        cases += 1;
    }
    assert!(cases > 50);
}

#[test]
fn step_constants_and_items_for_p5() {
    assert!((c1(3) - 1.0 / 12.0).abs() < 1e-15);
    assert!(c1(5) < C0);
    for s in all_tables(5, 1) {
        if s.constant_value().is_some() {
            continue;
        }
        let step = main_lemma_step_p(&s).unwrap();
        assert!(step.items_hold(&s));
        assert!(step.aligned_bound_holds(&s));
    }
}
