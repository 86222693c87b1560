//! The `spdt` command line.
//!
//! Reports are `KEY value` lines; `--pretty` puts the scalar fields on one
//! `key=value` line instead. Exit codes: 0 success, 1 a checked bound or
//! equivalence failed, 2 usage, parse or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bits::{fmt_binary, parse_binary};
use crate::boolfn::{generate, BooleanFunction, FunctionKind, Sign, Spectrum};
use crate::error::Error;
use crate::km::{km_search, learn_approx_pdt, LearnParams, SearchParams, TableOracle};
use crate::pdt::{
    approx_depth_cap, exact_size_bound_log2, round_to_pdt, sparse_depth_bound, synth_approx, synth_exact,
    synth_sparse_depth, ParityDecisionTree,
};
use crate::restriction::{constant_subspace_chain, Mode};
use crate::selftest;
use crate::zp::{
    approx_depth_cap_p, codim_bound_p, exact_size_bound_log2_p, find_constant_subspace_p, generate_zp, km_search_p,
    round_to_ptree, sparse_depth_bound_p, synth_approx_p, synth_pdt_p, synth_sparse_p, PTree, Space, ZpFunction,
    ZpKind, ZpSpectrum, ZpTableOracle,
};
#[derive(Parser, Debug)]
#[command(name = "spdt", version, about = "Spectral analysis and parity decision tree synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Clone, Default)]
struct Opts {
    /// Truth-table file (`BF p=<p> n=<n>` header).
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Field size; must match the input header when both are given.
    #[arg(long, global = true)]
    p: Option<u32>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Coefficient threshold (analyze: list coefficients; learn: search only).
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "basic")]
    mode: Mode,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tree: Option<PathBuf>,
    /// Upper bound on the spectral norm, required by `learn`.
    #[arg(long = "a-bound", global = true)]
    a_bound: Option<f64>,
    #[arg(long, global = true)]
    pretty: bool,
    /// Refuse to derive seeds; randomized commands need `--seed`.
    #[arg(long, global = true)]
    ci: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norm, sparsity, bias and top coefficients.
    Analyze,
    /// Build a tree from the exact spectrum.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
    },
    /// Learn a tree (or, with --theta, the large coefficients) from queries.
    Learn,
    /// Compare a tree file with a truth table.
    Verify,
    /// Emit a test function.
    Gen(GenArgs),
    /// Run the built-in exhaustive suites.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SynthKind {
    Exact,
    Sparse,
    Approx,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GenKind {
    And,
    Or,
    Majority,
    Parity,
    Subspace,
    RandomPdt,
    Random,
    Constant,
    MajorityLike,
    Pattern,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: u32,
    /// Co-dimension of the subspace.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Parity mask (binary, most significant first).
    #[arg(long)]
    mask: Option<String>,
    /// Leaves of the random tree.
    #[arg(long, default_value_t = 4)]
    size: usize,
    /// Linear form for `pattern` (base-p digits, most significant first).
    #[arg(long)]
    form: Option<String>,
    /// Values of the form mapped to -1, e.g. `0,2`.
    #[arg(long, value_delimiter = ',')]
    values: Vec<u32>,
    /// Sign of a constant function.
    #[arg(long, default_value = "+1", allow_hyphen_values = true)]
    sign: Sign,
}

/// A usage, parse or I/O problem (exit code 2).
enum Failure {
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<Report, Failure>;

/// Ordered `key value` pairs plus trailing text blocks.
#[derive(Default)]
struct Report {
    pairs: Vec<(String, String)>,
    blocks: Vec<String>,
    failed: Option<String>,
}

impl Report {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    fn check(&mut self, key: &str, ok: bool) {
        self.put(key, if ok { "PASS" } else { "FAIL" });
        if !ok && self.failed.is_none() {
            self.failed = Some(format!("{key} failed"));
        }
    }

    fn render(&self, pretty: bool) -> String {
        let mut s = String::new();
        if pretty && !self.pairs.is_empty() {
            let line: Vec<String> = self.pairs.iter().map(|(k, v)| format!("{k}={}", v.replace(' ', ":"))).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        } else if !pretty {
            for (k, v) in &self.pairs {
                s.push_str(&format!("{} {v}\n", k.to_uppercase()));
            }
        }
        for b in &self.blocks {
            s.push_str(b);
        }
        s
    }
}

/// Parse `args` (including the program name), run, and write the report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let pretty = cli.opts.pretty;
    let result = match &cli.command {
        Command::Analyze => analyze(&cli.opts),
        Command::Synth { kind } => synth(&cli.opts, *kind),
        Command::Learn => learn(&cli.opts),
        Command::Verify => verify(&cli.opts),
        Command::Gen(g) => gen(&cli.opts, g),
        Command::Selftest => Ok(run_selftest()),
    };
    match result {
        Ok(report) => {
            let _ = out.write_all(report.render(pretty).as_bytes());
            match report.failed {
                Some(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    1
                }
                None => 0,
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

enum Loaded {
    Binary(BooleanFunction),
    Prime(ZpFunction),
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn header_p(text: &str) -> Option<u32> {
    let line = text.lines().find(|l| !l.trim().is_empty())?;
    line.split_whitespace().find_map(|t| t.strip_prefix("p=")).and_then(|v| v.parse().ok())
}

fn load(opts: &Opts) -> std::result::Result<Loaded, Failure> {
    let path = opts.input.as_ref().ok_or_else(|| Failure::Usage("--in FILE is required".into()))?;
    let text = read(path)?;
    let at = |e: Error| Failure::Usage(format!("{}: {e}", path.display()));
    let p = header_p(&text).unwrap_or(2);
    if let Some(want) = opts.p {
        if want != p {
            return Err(Failure::Usage(format!("--p {want} but {} has p={p}", path.display())));
        }
    }
    if p == 2 {
        Ok(Loaded::Binary(BooleanFunction::from_text(&text).map_err(at)?))
    } else {
        Ok(Loaded::Prime(ZpFunction::from_text(&text).map_err(at)?))
    }
}

fn write_out(opts: &Opts, text: &str, report: &mut Report) -> std::result::Result<(), Failure> {
    match &opts.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            report.put("out", path.display());
        }
        None => report.blocks.push(text.to_string()),
    }
    Ok(())
}

fn seed(opts: &Opts, report: &mut Report) -> std::result::Result<u64, Failure> {
    match (opts.seed, opts.ci) {
        (Some(s), _) => Ok(s),
        (None, true) => Err(Failure::Usage("--seed is required with --ci".into())),
        (None, false) => {
            let s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
            report.put("seed", s);
            Ok(s)
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_complex(z: num_complex::Complex64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}

fn analyze(opts: &Opts) -> Outcome {
    let mut r = Report::default();
    match load(opts)? {
        Loaded::Binary(f) => {
            let s = f.wht();
            let n = s.n();
            r.put("n", n);
            r.put("p", 2);
            r.put("A", s.spectral_norm());
            r.put("spar", s.sparsity());
            r.put("bias", s.bias());
            r.put("codim", constant_subspace_chain(&s, opts.mode).len());
            if let Ok((a, b)) = s.top_two() {
                r.put("top1", format!("{} {}", fmt_binary(a, n), s.coeff(a)));
                r.put("top2", format!("{} {}", fmt_binary(b, n), s.coeff(b)));
            } else {
                let a = s.top();
                r.put("top1", format!("{} {}", fmt_binary(a, n), s.coeff(a)));
            }
            if let Some(theta) = opts.theta {
                r.blocks.push(heavy_binary(&s, theta));
            }
        }
        Loaded::Prime(f) => {
            let s = f.dft();
            let space = s.space();
            r.put("n", space.n());
            r.put("p", space.p());
            r.put("A", fmt_f64(s.norm()));
            r.put("spar", s.sparsity());
            r.put("bias", fmt_f64(s.coeff(0).norm()));
            r.put("codim", find_constant_subspace_p(&s).len());
            let top = |a: u64| format!("{} {}", space.fmt(a), fmt_complex(s.coeff(a)));
            match s.top_two() {
                Ok((a, b)) => {
                    r.put("top1", top(a));
                    r.put("top2", top(b));
                }
                Err(_) => r.put("top1", top(s.top())),
            }
            if let Some(theta) = opts.theta {
                r.blocks.push(heavy_prime(&s, theta));
            }
        }
    }
    Ok(r)
}

fn heavy_binary(s: &Spectrum, theta: f64) -> String {
    (0..1u64 << s.n())
        .filter(|&a| s.coeff_f64(a).abs() >= theta)
        .map(|a| format!("COEFF {} {}\n", fmt_binary(a, s.n()), s.coeff(a)))
        .collect()
}

fn heavy_prime(s: &ZpSpectrum, theta: f64) -> String {
    let space = s.space();
    (0..space.size())
        .filter(|&a| s.coeff(a).norm() >= theta)
        .map(|a| format!("COEFF {} {}\n", space.fmt(a), fmt_complex(s.coeff(a))))
        .collect()
}

fn need_eps(opts: &Opts) -> std::result::Result<f64, Failure> {
    opts.eps.ok_or_else(|| Failure::Usage("--eps is required".into()))
}

fn synth(opts: &Opts, kind: SynthKind) -> Outcome {
    let mut r = Report::default();
    match load(opts)? {
        Loaded::Binary(f) => {
            let s = f.wht();
            let n = s.n();
            let a = s.spectral_norm_f64();
            let tree = match kind {
                SynthKind::Exact => synth_exact(&s),
                SynthKind::Sparse => synth_sparse_depth(&s),
                SynthKind::Approx => round_to_pdt(&synth_approx(&s, need_eps(opts)?)?),
            };
            r.put("size", tree.size());
            r.put("depth", tree.depth());
            match kind {
                SynthKind::Exact => {
                    let bound = exact_size_bound_log2(a, n);
                    r.put("bound", format!("log2_size<={}", fmt_f64(bound)));
                    r.check("bound_check", (tree.size() as f64).log2() <= bound + 1e-9);
                    r.check("equivalent", tree.truth_table() == f);
                }
                SynthKind::Sparse => {
                    let bound = sparse_depth_bound(s.spectral_norm(), s.sparsity());
                    r.put("bound", format!("depth<={bound}"));
                    r.check("bound_check", tree.depth() as u64 <= bound);
                    r.check("equivalent", tree.truth_table() == f);
                }
                SynthKind::Approx => {
                    let eps = need_eps(opts)?;
                    let cap = approx_depth_cap(a, eps / 2.0);
                    let dist = tree.distance(&f);
                    r.put("bound", format!("depth<={cap}"));
                    r.check("bound_check", tree.depth() <= cap);
                    r.put("dist", fmt_f64(dist));
                    r.check("dist_check", dist <= eps);
                }
            }
            write_out(opts, &tree.to_text(), &mut r)?;
        }
        Loaded::Prime(f) => {
            let s = f.dft();
            let space = s.space();
            let a = s.norm();
            let tree = match kind {
                SynthKind::Exact => synth_pdt_p(&s),
                SynthKind::Sparse => synth_sparse_p(&s),
                SynthKind::Approx => round_to_ptree(&synth_approx_p(&s, need_eps(opts)?)?),
            };
            r.put("size", tree.size());
            r.put("depth", tree.depth());
            match kind {
                SynthKind::Exact => {
                    let bound = exact_size_bound_log2_p(space.p(), a, space.n());
                    r.put("bound", format!("log2_size<={}", fmt_f64(bound)));
                    r.check("bound_check", (tree.size() as f64).log2() <= bound + 1e-9);
                    r.check("equivalent", tree.truth_table() == f);
                }
                SynthKind::Sparse => {
                    let bound = sparse_depth_bound_p(a, s.sparsity());
                    r.put("bound", format!("depth<={bound}"));
                    r.check("bound_check", tree.depth() <= bound);
                    r.check("equivalent", tree.truth_table() == f);
                }
                SynthKind::Approx => {
                    let eps = need_eps(opts)?;
                    let cap = approx_depth_cap_p(a, eps / 2.0);
                    let dist = tree.distance(&f);
                    r.put("bound", format!("depth<={cap}"));
                    r.check("bound_check", tree.depth() <= cap);
                    r.put("dist", fmt_f64(dist));
                    r.check("dist_check", dist <= eps);
                }
            }
            r.put("codim_bound", codim_bound_p(a));
            write_out(opts, &tree.to_text(), &mut r)?;
        }
    }
    Ok(r)
}

fn learn(opts: &Opts) -> Outcome {
    let mut r = Report::default();
    let loaded = load(opts)?;
    let seed = seed(opts, &mut r)?;
    let delta = opts.delta.unwrap_or(0.05);
    if let Some(theta) = opts.theta {
        let eta = opts.eta.unwrap_or(theta / 4.0);
        let params = SearchParams::new(theta, eta, delta, seed)?;
        match loaded {
            Loaded::Binary(f) => {
                let n = f.n();
                let res = km_search(&TableOracle::new(f), &params)?;
                r.put("queries", res.queries);
                r.put("found", res.coeffs.len());
                for e in &res.coeffs {
                    r.blocks.push(format!("COEFF {} {}\n", fmt_binary(e.alpha, n), fmt_f64(e.value_f64())));
                }
            }
            Loaded::Prime(f) => {
                let space = f.space();
                let res = km_search_p(&ZpTableOracle::new(f), &params)?;
                r.put("queries", res.queries);
                r.put("found", res.coeffs.len());
                for e in &res.coeffs {
                    r.blocks.push(format!("COEFF {} {}\n", space.fmt(e.alpha), fmt_complex(e.value)));
                }
            }
        }
        return Ok(r);
    }
    let Loaded::Binary(f) = loaded else {
        return Err(Failure::Usage("tree learning needs p=2; pass --theta to search coefficients".into()));
    };
    let a_bound = opts.a_bound.ok_or_else(|| Failure::Usage("--a-bound is required".into()))?;
    let params = LearnParams { a_bound, eps: need_eps(opts)?, delta, seed };
    let oracle = TableOracle::new(f);
    let outcome = learn_approx_pdt(&oracle, &params)?;
    r.put("queries", outcome.queries);
    r.put("depth", outcome.tree.depth());
    r.put("size", outcome.tree.size());
    r.put("dist", fmt_f64(outcome.tree.distance(oracle.function())));
    write_out(opts, &outcome.tree.to_text(), &mut r)?;
    Ok(r)
}

fn verify(opts: &Opts) -> Outcome {
    let path = opts.tree.as_ref().ok_or_else(|| Failure::Usage("--tree FILE is required".into()))?;
    let text = read(path)?;
    let at = |e: Error| Failure::Usage(format!("{}: {e}", path.display()));
    let (disagree, total, p, n) = match load(opts)? {
        Loaded::Binary(f) => {
            let t = ParityDecisionTree::from_text(&text).map_err(at)?;
            if t.n() != f.n() {
                return Err(Failure::Usage(format!("tree has n={} but function has n={}", t.n(), f.n())));
            }
            (t.disagreements(&f), 1u64 << f.n(), 2, f.n())
        }
        Loaded::Prime(f) => {
            let t = PTree::from_text(&text).map_err(at)?;
            if t.space() != f.space() {
                return Err(Failure::Usage("tree and function live on different spaces".into()));
            }
            (t.disagreements(&f), f.space().size(), f.p(), f.n())
        }
    };
    let mut r = Report::default();
    if disagree == 0 {
        r.blocks.push(format!("EQUIVALENT over {p}^{n} inputs\n"));
        return Ok(r);
    }
    let dist = disagree as f64 / total as f64;
    r.put("disagreements", disagree);
    r.put("dist", fmt_f64(dist));
    match opts.eps {
        Some(eps) => r.check("dist_check", dist <= eps),
        None => r.failed = Some(format!("tree differs on {disagree} of {p}^{n} inputs")),
    }
    Ok(r)
}

fn gen(opts: &Opts, g: &GenArgs) -> Outcome {
    let mut r = Report::default();
    let p = opts.p.unwrap_or(2);
    let randomized = matches!(g.kind, GenKind::Subspace | GenKind::RandomPdt | GenKind::Random);
    let seed = if randomized { seed(opts, &mut r)? } else { opts.seed.unwrap_or(0) };
    let text = if p == 2 {
        let kind = match g.kind {
            GenKind::And => FunctionKind::And,
            GenKind::Or => FunctionKind::Or,
            GenKind::Majority => FunctionKind::Majority,
            GenKind::Parity => {
                let m = g.mask.as_deref().ok_or_else(|| Failure::Usage("parity needs --mask".into()))?;
                let mask = parse_binary(m)
                    .filter(|_| m.len() == g.n as usize)
                    .ok_or_else(|| Failure::Usage(format!("bad mask `{m}` for n={}", g.n)))?;
                FunctionKind::Parity { mask }
            }
            GenKind::Subspace => FunctionKind::SubspaceIndicator { k: g.k },
            GenKind::RandomPdt => FunctionKind::RandomPdt { size: g.size },
            GenKind::Random => FunctionKind::Random,
            GenKind::Constant => {
                return finish_gen(opts, BooleanFunction::constant(g.n, g.sign)?.to_text(), r);
            }
            other => return Err(Failure::Usage(format!("{other:?} needs an odd prime --p"))),
        };
        generate(&kind, g.n, seed)?.to_text()
    } else {
        let space = Space::new(p, g.n)?;
        let kind = match g.kind {
            GenKind::Constant => ZpKind::Constant(g.sign),
            GenKind::Random => ZpKind::Random,
            GenKind::Subspace => ZpKind::SubspaceIndicator { k: g.k },
            GenKind::MajorityLike => ZpKind::MajorityLike,
            GenKind::Pattern => {
                let f = g.form.as_deref().ok_or_else(|| Failure::Usage("pattern needs --form".into()))?;
                let form = space.parse(f).ok_or_else(|| Failure::Usage(format!("bad form `{f}`")))?;
                if g.values.iter().any(|&v| v >= p) {
                    return Err(Failure::Usage(format!("--values must lie below {p}")));
                }
                ZpKind::LinearPattern { form, values: g.values.iter().fold(0, |m, &v| m | 1 << v) }
            }
            other => return Err(Failure::Usage(format!("{other:?} is only defined for p=2"))),
        };
        generate_zp(&kind, p, g.n, seed)?.to_text()
    };
    finish_gen(opts, text, r)
}

fn finish_gen(opts: &Opts, text: String, mut r: Report) -> Outcome {
    write_out(opts, &text, &mut r)?;
    Ok(r)
}

fn run_selftest() -> Report {
    let mut r = Report::default();
    for suite in selftest::run_all() {
        r.check(suite.name, suite.ok);
        r.put(&format!("{}_cases", suite.name), suite.cases);
    }
    r
}
