//! Brute-force references and frozen values for the Z_2 path.

use spectral_pdt::boolfn::{generate, BooleanFunction, FunctionKind, Sign};
use spectral_pdt::km::{estimate_bucket_weights, exact_bucket_weight, QueryOracle, RestrictedOracle, TableOracle};
use spectral_pdt::pdt::synth_exact;
use spectral_pdt::restriction::{find_constant_subspace, LinearForm, Mode, RestrictionChain};
use spectral_pdt::{Parallelism, Rational};

/// `sum_x f(x) (-1)^{<a,x>}` by the double loop.
fn naive_scaled(f: &BooleanFunction) -> Vec<i64> {
    let n = f.n();
    (0..1u64 << n)
        .map(|a| {
            (0..1u64 << n)
                .map(|x| if (a & x).count_ones() % 2 == 1 { -f.value(x) as i64 } else { f.value(x) as i64 })
                .sum()
        })
        .collect()
}

/// Smallest co-dimension of an affine subspace on which `f` is constant, by enumeration.
fn min_constant_codim(f: &BooleanFunction) -> usize {
    let n = f.n();
    let points = 1u64 << n;
    // a subset of points is an affine subspace iff it is closed under x ^ y ^ z
    let mut best = n as usize;
    for set in 1u64..1 << points {
        let len = set.count_ones();
        if !len.is_power_of_two() {
            continue;
        }
        let members: Vec<u64> = (0..points).filter(|&x| set >> x & 1 == 1).collect();
        let closed =
            members.iter().all(|&x| members.iter().all(|&y| members.iter().all(|&z| set >> (x ^ y ^ z) & 1 == 1)));
        let constant = members.iter().all(|&x| f.value(x) == f.value(members[0]));
        if closed && constant {
            best = best.min(n as usize - len.trailing_zeros() as usize);
        }
    }
    best
}

#[test]
fn transform_matches_double_loop() {
    for n in 1..=3 {
        for bits in 0..1u64 << (1 << n) {
            let f = BooleanFunction::from_bits(n, bits).unwrap();
            assert_eq!(f.wht().scaled(), naive_scaled(&f).as_slice());
        }
    }
    for seed in 0..20 {
        let f = generate(&FunctionKind::Random, 7, seed).unwrap();
        assert_eq!(f.wht().scaled(), naive_scaled(&f).as_slice());
    }
}

#[test]
fn frozen_spectra() {
    let and2 = generate(&FunctionKind::And, 2, 0).unwrap().wht();
    assert_eq!(and2.scaled(), &[2, 2, 2, -2]);
    let maj3 = generate(&FunctionKind::Majority, 3, 0).unwrap().wht();
    assert_eq!(maj3.scaled(), &[0, 4, 4, 0, 4, 0, 0, -4]);
    assert_eq!(maj3.spectral_norm(), Rational::from_integer(2));
    let maj5 = generate(&FunctionKind::Majority, 5, 0).unwrap().wht();
    assert_eq!(maj5.spectral_norm(), Rational::new(7, 2));
    for n in 1..=10 {
        let s = generate(&FunctionKind::And, n, 0).unwrap().wht();
        assert_eq!(s.spectral_norm(), Rational::from_integer(3) - Rational::new(4, 1 << n));
    }
}

#[test]
fn subspace_indicator_spectrum() {
    for seed in 0..10 {
        let s = generate(&FunctionKind::SubspaceIndicator { k: 2 }, 3, seed).unwrap().wht();
        // 1_V is 1/4 on the 4 points of V's annihilator; 1 - 2 * 1_V keeps that support
        assert_eq!(s.sparsity(), 4);
        assert_eq!(s.spectral_norm(), Rational::from_integer(2));
    }
}

#[test]
fn constant_subspace_is_never_below_the_optimum() {
    for n in 1..=3 {
        for bits in 0..1u64 << (1 << n) {
            let f = BooleanFunction::from_bits(n, bits).unwrap();
            let opt = min_constant_codim(&f);
            for mode in [Mode::Basic, Mode::Accelerated] {
                let r = find_constant_subspace(&f.wht(), mode);
                assert!(r.codim() >= opt);
                assert!(r.constant_on(&f).is_some());
            }
        }
    }
}

#[test]
fn frozen_trees() {
    let maj3 = generate(&FunctionKind::Majority, 3, 0).unwrap();
    let t = synth_exact(&maj3.wht());
    assert_eq!(t.truth_table(), maj3);
    assert_eq!(t.to_text(), synth_exact(&maj3.wht()).to_text());
    let chi = generate(&FunctionKind::Parity { mask: 0b110 }, 3, 0).unwrap();
    assert_eq!(synth_exact(&chi.wht()).to_text(), "PDT p=2 n=3\nN 110\nL +1\nL -1\n");
}

#[test]
fn restricted_oracle_agrees_pointwise() {
    for n in 1..=6u32 {
        let f = generate(&FunctionKind::Random, n, n as u64).unwrap();
        let o = TableOracle::new(f.clone());
        let mut chain = RestrictionChain::new(n);
        let mut g = 0b1011u64;
        while chain.dim() > 0 {
            let dim = chain.dim();
            let form = LinearForm::new(g % ((1 << dim) - 1) + 1).unwrap();
            chain.push(form, if g.is_multiple_of(3) { Sign::Minus } else { Sign::Plus }).unwrap();
            let r = RestrictedOracle::new(&o, chain.clone()).unwrap();
            let t = chain.restrict_table(&f);
            for x in 0..1u64 << chain.dim() {
                assert_eq!(r.query(x).unwrap(), t.eval(x));
            }
            g = g * 7 + 5;
        }
    }
}

#[test]
fn bucket_estimator_is_unbiased() {
    let f = generate(&FunctionKind::Majority, 5, 0).unwrap();
    let s = f.wht();
    let o = TableOracle::new(f);
    for k in 1..=4u32 {
        let prefixes: Vec<u64> = (0..1u64 << k).collect();
        let runs = 200;
        let mut sums = vec![0.0; prefixes.len()];
        for seed in 0..runs {
            let est = estimate_bucket_weights(&o, &prefixes, k, 400, seed, Parallelism::Sequential).unwrap();
            for (acc, e) in sums.iter_mut().zip(est) {
                *acc += *e.numer() as f64 / *e.denom() as f64;
            }
        }
        for (&a, sum) in prefixes.iter().zip(sums) {
            let exact = exact_bucket_weight(&s, a, k);
            let exact = *exact.numer() as f64 / *exact.denom() as f64;
            // standard error of the mean is below 1/sqrt(80000)
            assert!((sum / runs as f64 - exact).abs() < 0.02, "k={k} a={a}");
        }
    }
}
