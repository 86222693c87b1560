//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::time::Instant;

use num_complex::Complex64;
use spectral_pdt::boolfn::{generate, BooleanFunction, FunctionKind, Spectrum};
use spectral_pdt::km::{km_search, learn_approx_pdt, LearnParams, SearchParams, TableOracle};
use spectral_pdt::pdt::{
    approx_depth_cap, check_simple_facts, exact_size_bound_log2, random_tree, round_to_pdt, sparse_depth_bound,
    synth_approx, synth_exact, synth_sparse_depth, ParityDecisionTree,
};
use spectral_pdt::restriction::{ceil_norm_squared, find_constant_subspace, main_lemma_step, Mode};
use spectral_pdt::zp::{
    codim_bound_p, convolution_check_p, exact_size_bound_log2_p, find_constant_subspace_p, generate_zp,
    largest_coeff_inequality, main_lemma_step_p, overcount_check, sparse_depth_bound_p, synth_pdt_p, synth_sparse_p,
    triangle_gap, ZpFunction, ZpKind, ZpSpectrum, C0, TAU,
};

fn all_functions(n: u32) -> impl Iterator<Item = BooleanFunction> {
    (0..1u64 << (1 << n)).map(move |b| BooleanFunction::from_bits(n, b).unwrap())
}

fn upto(max_n: u32) -> impl Iterator<Item = BooleanFunction> {
    (1..=max_n).flat_map(all_functions)
}

fn random(n: u32, count: u64, salt: u64) -> impl Iterator<Item = BooleanFunction> {
    (0..count).map(move |s| generate(&FunctionKind::Random, n, salt << 32 | s).unwrap())
}

/// AND, OR, MAJ and subspace indicators for every `n` up to `max_n`.
fn families(max_n: u32) -> Vec<BooleanFunction> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        out.push(generate(&FunctionKind::And, n, 0).unwrap());
        out.push(generate(&FunctionKind::Or, n, 0).unwrap());
        if n % 2 == 1 {
            out.push(generate(&FunctionKind::Majority, n, 0).unwrap());
        }
        for k in 1..=n.min(3) {
            out.push(generate(&FunctionKind::SubspaceIndicator { k }, n, n as u64).unwrap());
        }
    }
    out
}

fn f64_of(r: spectral_pdt::Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self { ok, detail: detail.into() }
    }
}

fn convolution() -> Outcome {
    let mut checks = 0u64;
    let mut bad = 0u64;
    for f in upto(3) {
        let s = f.wht();
        for d in 1..1u64 << s.n() {
            checks += 1;
            if s.convolution_check(d) != Ok(0) {
                bad += 1;
            }
        }
    }
    Outcome::new(bad == 0, format!("{checks} sums, {bad} nonzero"))
}

fn main_lemma() -> Outcome {
    let corpus = upto(3).chain((4..=6).flat_map(|n| random(n, 10_000 / 3 + 1, n as u64)));
    let (mut steps, mut bad) = (0u64, 0u64);
    for f in corpus {
        let s = f.wht();
        if s.l1_scaled() == s.scale() {
            continue;
        }
        steps += 1;
        if !main_lemma_step(&s).is_ok_and(|st| st.guarantees_hold(&s)) {
            bad += 1;
        }
    }
    Outcome::new(bad == 0, format!("{steps} steps, {bad} violations"))
}

fn constant_subspace() -> Outcome {
    let (mut runs, mut bad) = (0u64, 0u64);
    for f in upto(4) {
        let s = f.wht();
        let cap = ceil_norm_squared(s.spectral_norm());
        for mode in [Mode::Basic, Mode::Accelerated] {
            runs += 1;
            let r = find_constant_subspace(&s, mode);
            if r.codim() as u64 > cap || r.constant_on(&f).is_none() {
                bad += 1;
            }
        }
    }
    Outcome::new(bad == 0, format!("{runs} runs, {bad} violations"))
}

fn synthesis_corpus() -> Vec<BooleanFunction> {
    upto(3).chain(random(6, 1000, 6)).chain(families(12)).collect()
}

fn exact(corpus: &[BooleanFunction], trees: &mut Vec<ParityDecisionTree>) -> Outcome {
    let mut bad = 0;
    let mut slack = f64::INFINITY;
    for f in corpus {
        let s = f.wht();
        let t = synth_exact(&s);
        let bound = exact_size_bound_log2(f64_of(s.spectral_norm()), s.n());
        let used = (t.size() as f64).log2();
        slack = slack.min(bound - used);
        if t.truth_table() != *f || used > bound + 1e-12 {
            bad += 1;
        }
        trees.push(t);
    }
    Outcome::new(bad == 0, format!("{} functions, {bad} violations, min log2 slack {slack:.2}", corpus.len()))
}

fn sparse(corpus: &[BooleanFunction], trees: &mut Vec<ParityDecisionTree>) -> Outcome {
    let mut bad = 0;
    let mut deepest = 0;
    for f in corpus {
        let s = f.wht();
        let t = synth_sparse_depth(&s);
        deepest = deepest.max(t.depth());
        if t.truth_table() != *f || t.depth() as u64 > sparse_depth_bound(s.spectral_norm(), s.sparsity()) {
            bad += 1;
        }
        trees.push(t);
    }
    Outcome::new(bad == 0, format!("{} functions, {bad} violations, max depth {deepest}", corpus.len()))
}

fn approx(trees: &mut Vec<ParityDecisionTree>) -> Outcome {
    let mut corpus: Vec<BooleanFunction> = upto(3).collect();
    corpus.extend(families(10));
    for n in [4, 6, 8, 10] {
        corpus.extend(random(n, 5, 100 + n as u64));
        corpus.extend((0..5).map(|s| generate(&FunctionKind::RandomPdt { size: 2 * n as usize }, n, s).unwrap()));
    }
    let (mut runs, mut bad) = (0u64, 0u64);
    let mut worst = 0.0f64;
    for f in &corpus {
        let s: Spectrum = f.wht();
        let a = s.spectral_norm_f64();
        for eps in [0.2, 0.05, 0.01] {
            runs += 1;
            let Ok(t) = synth_approx(&s, eps) else {
                bad += 1;
                continue;
            };
            let rounded = round_to_pdt(&t);
            let dist = rounded.distance(f);
            worst = worst.max(dist / eps);
            if dist > eps || t.depth() > approx_depth_cap(a, eps) {
                bad += 1;
            }
            trees.push(rounded);
        }
    }
    Outcome::new(bad == 0, format!("{runs} runs, {bad} violations, worst dist/eps {worst:.3}"))
}

/// Whether `found` lists every coefficient of magnitude at least `theta`,
/// each within `eta` of the truth.
fn search_ok(s: &Spectrum, f: BooleanFunction, theta: f64, eta: f64, seed: u64) -> bool {
    let params = SearchParams::new(theta, eta, 0.05, seed).unwrap();
    let Ok(found) = km_search(&TableOracle::new(f), &params) else { return false };
    let complete = (0..1u64 << s.n()).all(|a| s.coeff_f64(a).abs() < theta || found.get(a).is_some());
    let accurate = found.coeffs.iter().all(|e| (e.value_f64() - s.coeff_f64(e.alpha)).abs() <= eta);
    complete && accurate
}

fn search() -> Outcome {
    let mut misses = 0;
    let mut count = 0;
    for (i, f) in upto(3).enumerate() {
        count += 1;
        if !search_ok(&f.wht(), f, 0.3, 0.1, i as u64) {
            misses += 1;
        }
    }
    let mut fixed = Vec::new();
    for f in [generate(&FunctionKind::Majority, 3, 0).unwrap(), generate(&FunctionKind::And, 4, 0).unwrap()] {
        let s = f.wht();
        fixed.push((0..100).filter(|&seed| search_ok(&s, f.clone(), 0.4, 0.1, seed)).count());
    }
    Outcome::new(
        misses == 0 && fixed.iter().all(|&k| k >= 95),
        format!("n<=3: {misses}/{count} failed; MAJ3 {}/100, AND4 {}/100", fixed[0], fixed[1]),
    )
}

fn learning() -> Outcome {
    let mut summary = Vec::new();
    let mut ok = true;
    for (name, f) in [
        ("AND6", generate(&FunctionKind::And, 6, 0).unwrap()),
        ("MAJ5", generate(&FunctionKind::Majority, 5, 0).unwrap()),
    ] {
        let a = f.wht().spectral_norm_f64();
        let run = |seed| {
            let params = LearnParams { a_bound: a, eps: 0.1, delta: 0.05, seed };
            learn_approx_pdt(&TableOracle::new(f.clone()), &params)
        };
        let mut good = 0;
        let mut queries = 0u64;
        for seed in 0..100 {
            if let Ok(out) = run(seed) {
                queries = queries.max(out.queries);
                if out.tree.distance(&f) <= 0.1 {
                    good += 1;
                }
            }
        }
        let repeat = matches!((run(7), run(7)), (Ok(x), Ok(y)) if x.queries == y.queries && x.tree == y.tree);
        ok &= good >= 95 && repeat;
        summary.push(format!("{name} {good}/100 max queries {queries} reproducible {repeat}"));
    }
    Outcome::new(ok, summary.join("; "))
}

fn prime_checks(s: &ZpSpectrum, all_pairs: bool) -> bool {
    let space = s.space();
    let size = space.size();
    let p = space.p();
    let roots = space.roots();
    if (s.parseval_sum() - 1.0).abs() > TAU || s.conjugate_asymmetry() > TAU {
        return false;
    }
    if !(1..size).all(|b| convolution_check_p(s, b).is_ok_and(|c| c.norm() <= TAU * size as f64)) {
        return false;
    }
    let top = s.top();
    let gap_ok = |a: u64, b: u64| (0..p as usize).all(|l| triangle_gap(s.coeff(a), roots[l] * s.coeff(b)).holds());
    let gaps =
        if all_pairs { (0..size).all(|a| (0..size).all(|b| gap_ok(a, b))) } else { (0..size).all(|a| gap_ok(a, top)) };
    if !gaps {
        return false;
    }
    if !(1..size).all(|e| (0..p).all(|l| overcount_check(s, e, l).is_ok_and(|(lhs, rhs)| 3.0 * lhs >= rhs - TAU))) {
        return false;
    }
    if largest_coeff_inequality(s).is_some_and(|(lhs, rhs)| lhs > rhs + TAU) {
        return false;
    }
    s.constant_value().is_some() || main_lemma_step_p(s).is_ok_and(|st| st.items_hold(s))
}

fn prime_suite() -> Outcome {
    let mut tables: Vec<ZpFunction> = (0..8)
        .chain(0..512)
        .enumerate()
        .map(|(i, k)| ZpFunction::from_index(3, if i < 8 { 1 } else { 2 }, k).unwrap())
        .collect();
    let exhaustive = tables.len();
    tables.extend((0..10_000).map(|seed| generate_zp(&ZpKind::Random, 3, 3, seed).unwrap()));
    let bad = tables.iter().enumerate().filter(|(i, f)| !prime_checks(&f.dft(), *i < exhaustive)).count();
    let unit = Complex64::new(1.0, 0.0);
    let sanity = triangle_gap(unit, Complex64::i()).gap > 0.5;
    Outcome::new(
        bad == 0 && sanity && (C0 - 1.0 / 12.0).abs() < 1e-15,
        format!("{exhaustive} exhaustive + 10000 sampled n=3, {bad} violations"),
    )
}

fn prime_trees() -> Outcome {
    let mut corpus = Vec::new();
    for n in 1..=2 {
        corpus.extend((0..(1u64 << 3u64.pow(n))).map(|i| ZpFunction::from_index(3, n, i).unwrap()));
    }
    for n in 3..=6 {
        corpus.extend((0..20).map(|seed| generate_zp(&ZpKind::Random, 3, n, seed).unwrap()));
        corpus.push(generate_zp(&ZpKind::MajorityLike, 3, n, 0).unwrap());
        for k in 1..=3.min(n) {
            corpus.push(generate_zp(&ZpKind::SubspaceIndicator { k }, 3, n, k as u64).unwrap());
        }
        corpus.push(generate_zp(&ZpKind::LinearPattern { form: 5, values: 0b011 }, 3, n, 0).unwrap());
    }
    let mut bad = 0;
    for f in &corpus {
        let s = f.dft();
        let a = s.norm();
        let chain = find_constant_subspace_p(&s);
        let restricted = chain.restrict_table(f);
        let constant = restricted.values().iter().all(|&v| v == restricted.values()[0]);
        let t = synth_pdt_p(&s);
        let sparse = synth_sparse_p(&s);
        let size_ok = (t.size() as f64).log2() <= exact_size_bound_log2_p(3, a, s.n()) + 1e-9;
        let ok = chain.len() <= codim_bound_p(a)
            && constant
            && t.truth_table() == *f
            && size_ok
            && sparse.truth_table() == *f
            && sparse.depth() <= sparse_depth_bound_p(a, s.sparsity());
        if !ok {
            bad += 1;
        }
    }
    Outcome::new(bad == 0, format!("{} functions with 3^n <= 729, {bad} violations", corpus.len()))
}

fn simple_facts(synthesized: &[ParityDecisionTree]) -> Outcome {
    let random_bad = (0..1000u64)
        .filter(|&seed| {
            let t = random_tree(8, 1 + (seed as usize * 37) % 64, seed).unwrap();
            !check_simple_facts(&t).holds()
        })
        .count();
    let synth_bad = synthesized.iter().filter(|t| !check_simple_facts(t).holds()).count();
    Outcome::new(
        random_bad == 0 && synth_bad == 0,
        format!("1000 random n=8: {random_bad} bad; {} synthesized: {synth_bad} bad", synthesized.len()),
    )
}

fn report(id: u32, name: &str, failed: &mut bool, run: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = run();
    let secs = start.elapsed().as_secs_f64();
    *failed |= !out.ok;
    println!("{} {id:>2} {name}: {} ({secs:.1}s)", if out.ok { "PASS" } else { "FAIL" }, out.detail);
}

fn main() {
    let mut failed = false;
    let corpus = synthesis_corpus();
    let mut trees = Vec::new();
    report(1, "convolution identity", &mut failed, convolution);
    report(2, "norm-reducing step", &mut failed, main_lemma);
    report(3, "constant subspace", &mut failed, constant_subspace);
    report(4, "exact synthesis", &mut failed, || exact(&corpus, &mut trees));
    report(5, "sparse-depth synthesis", &mut failed, || sparse(&corpus, &mut trees));
    report(6, "approximate synthesis", &mut failed, || approx(&mut trees));
    report(7, "coefficient search", &mut failed, search);
    report(8, "query learning", &mut failed, learning);
    report(9, "prime-field lemmas", &mut failed, prime_suite);
    report(10, "prime-field trees", &mut failed, prime_trees);
    report(11, "size and depth facts", &mut failed, || simple_facts(&trees));
    if failed {
        std::process::exit(1);
    }
}
