//! Small exhaustive suites behind `spdt selftest`.

use crate::boolfn::BooleanFunction;
use crate::km::{km_search, SearchParams, TableOracle};
use crate::pdt::{round_to_pdt, sparse_depth_bound, synth_approx, synth_exact, synth_sparse_depth};
use crate::restriction::{ceil_norm_squared, find_constant_subspace, main_lemma_step, Mode};
use crate::zp::{convolution_check_p, main_lemma_step_p, overcount_check, synth_pdt_p, ZpFunction, TAU};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub name: &'static str,
    pub ok: bool,
    pub cases: u64,
}

fn all_functions(max_n: u32) -> impl Iterator<Item = BooleanFunction> {
    (1..=max_n).flat_map(|n| (0..1u64 << (1 << n)).map(move |b| BooleanFunction::from_bits(n, b).expect("n <= 3")))
}

fn suite(name: &'static str, cases: impl Iterator<Item = bool>) -> Suite {
    let mut count = 0;
    let mut ok = true;
    for c in cases {
        count += 1;
        ok &= c;
    }
    Suite { name, ok, cases: count }
}

fn transform() -> Suite {
    suite(
        "transform",
        all_functions(3).map(|f| {
            let s = f.wht();
            s.parseval_sum() == (s.scale() as i128).pow(2) && s.inverse().as_ref() == Ok(&f)
        }),
    )
}

fn convolution() -> Suite {
    suite(
        "convolution",
        all_functions(3).flat_map(|f| {
            let s = f.wht();
            (1..1u64 << s.n()).map(move |d| s.convolution_check(d) == Ok(0))
        }),
    )
}

fn main_lemma() -> Suite {
    suite(
        "main_lemma",
        all_functions(3).map(|f| {
            let s = f.wht();
            s.l1_scaled() == s.scale() || main_lemma_step(&s).is_ok_and(|st| st.guarantees_hold(&s))
        }),
    )
}

fn constant_subspace() -> Suite {
    suite(
        "constant_subspace",
        all_functions(3).flat_map(|f| {
            let s = f.wht();
            [Mode::Basic, Mode::Accelerated].into_iter().map(move |m| {
                let r = find_constant_subspace(&s, m);
                r.codim() as u64 <= ceil_norm_squared(s.spectral_norm()) && r.constant_on(&f).is_some()
            })
        }),
    )
}

fn synthesis() -> Suite {
    suite(
        "synthesis",
        all_functions(3).map(|f| {
            let s = f.wht();
            let sparse = synth_sparse_depth(&s);
            synth_exact(&s).truth_table() == f
                && sparse.truth_table() == f
                && sparse.depth() as u64 <= sparse_depth_bound(s.spectral_norm(), s.sparsity())
                && synth_approx(&s, 0.2).is_ok_and(|t| round_to_pdt(&t).distance(&f) <= 0.2)
        }),
    )
}

fn search() -> Suite {
    suite(
        "search",
        all_functions(2).enumerate().map(|(i, f)| {
            let s = f.wht();
            let params = SearchParams::new(0.3, 0.1, 0.05, i as u64).expect("valid");
            let found = km_search(&TableOracle::new(f), &params);
            found.is_ok_and(|r| (0..1u64 << s.n()).all(|a| s.coeff_f64(a).abs() < 0.3 || r.get(a).is_some()))
        }),
    )
}

fn prime_field() -> Suite {
    let tables =
        (0..8).map(|i| ZpFunction::from_index(3, 1, i)).chain((0..512).map(|i| ZpFunction::from_index(3, 2, i)));
    suite(
        "prime_field",
        tables.map(|f| {
            let f = f.expect("valid table");
            let s = f.dft();
            let size = s.space().size();
            let basics = (s.parseval_sum() - 1.0).abs() <= TAU
                && s.conjugate_asymmetry() <= TAU
                && (1..size).all(|b| convolution_check_p(&s, b).is_ok_and(|c| c.norm() <= TAU * size as f64));
            let lemma = s.constant_value().is_some() || main_lemma_step_p(&s).is_ok_and(|st| st.items_hold(&s));
            let overcount =
                (1..size).all(|e| (0..3).all(|l| overcount_check(&s, e, l).is_ok_and(|(a, b)| 3.0 * a >= b - TAU)));
            basics && lemma && overcount && synth_pdt_p(&s).truth_table() == f
        }),
    )
}

/// Every suite, in a fixed order.
pub fn run_all() -> Vec<Suite> {
    vec![transform(), convolution(), main_lemma(), constant_subspace(), synthesis(), search(), prime_field()]
}
