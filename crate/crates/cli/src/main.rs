//! `bilinv`: enumerate, evaluate, relate, and cross-check the invariants of
//! vector-valued bilinear forms from the command line.
//!
//! Data goes to stdout as deterministic JSON (NDJSON for certificate
//! streams); diagnostics go to stderr. Exit codes are part of the
//! interface:
//!
//! - 0 success
//! - 1 a requested check failed (or an unclassified error)
//! - 2 no invariants exist at the requested degree (divisibility gate)
//! - 3 malformed JSON input
//! - 4 dimension or shape mismatch
//! - 5 budget exceeded
//! - 64 command-line usage error

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bilinv_core::invariant::{
    enumerate_distinct, evaluate_polynomial, evaluate_polynomial_blocks, weight_check,
    BilinearForm, BlockForm, GeneratorId,
};
use bilinv_core::linalg::RationalMatrix;
use bilinv_core::perm::Permutation;
use bilinv_core::poly::{discriminant, pencil_determinant, poly_equal, BVars, SparsePolynomial};
use bilinv_core::ratio;
use bilinv_core::relation::{
    enumerate_type_a_specs, enumerate_type_b_specs, kernel_span_check, trivial_relations,
    type_a_relation, type_b_relation, RelationCertificate,
};
use bilinv_core::{Error, Result};

#[derive(Parser)]
#[command(name = "bilinv", version, about = "Invariants of vector-valued bilinear forms")]
struct Cli {
    /// Worker threads for batch construction (default: all cores; also
    /// settable via BILINV_THREADS). Never affects output content.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List generator classes at (n, k, r), with their polynomials.
    Generators(GeneratorsArgs),
    /// Evaluate a generator symbolically or at a concrete form.
    Evaluate(EvaluateArgs),
    /// Emit relation certificates, or run the kernel span check.
    Relations(RelationsArgs),
    /// The determinant pencil P(x, y) of a pair of 2x2 forms.
    Pencil(PencilArgs),
    /// Check relative invariance under a group element (a, p).
    WeightCheck(WeightCheckArgs),
}

#[derive(Args)]
struct GeneratorsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    /// One representative per sign class (the default listing).
    #[arg(long)]
    distinct: bool,
    /// List raw (sigma, eta) pairs instead; guarded by --budget.
    #[arg(long)]
    raw: bool,
    /// Mark classes whose symmetrized polynomial is zero and drop their
    /// polynomials from the listing.
    #[arg(long)]
    symmetrized: bool,
    /// Cap on the raw listing size.
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    /// Human-readable lines instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Generator spec: inline JSON or a path to a JSON file. Either the
    /// permutation form {"sigma":"(23)(67)","eta":"(23)","n":2,"k":2,"r":4}
    /// or the block form {"v_blocks":[[1,3],...],"w_blocks":[...],"sign":1}.
    #[arg(long, conflicts_with_all = ["sigma", "eta"])]
    generator: Option<String>,
    #[arg(long, requires_all = ["eta", "n", "k", "r"])]
    sigma: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Evaluate numerically at this form (JSON file) instead of
    /// symbolically.
    #[arg(long)]
    form: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct RelationsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    /// Which families to emit: all, a, b, or trivial.
    #[arg(long, default_value = "all")]
    kind: String,
    /// Re-expand every certificate before printing (they are already
    /// constructed verified; this is a belt-and-braces recheck).
    #[arg(long)]
    verify: bool,
    /// Run the kernel span check instead of streaming certificates.
    #[arg(long)]
    span_check: bool,
    /// Class budget for the span check / stream cap for certificates.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Emit at most this many certificates.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct PencilArgs {
    /// Concrete form (JSON file); omit for the symbolic pencil.
    #[arg(long)]
    form: Option<PathBuf>,
    /// Force symbolic output (the default when no form is given).
    #[arg(long)]
    symbolic: bool,
    /// Emit the discriminant of the pencil instead of its coefficients.
    #[arg(long)]
    discriminant: bool,
    /// Check that the discriminant equals -1/2 times the evaluation of
    /// v_(23)(67) (x) w^(23) and print pass/fail.
    #[arg(long)]
    compare_invariant: bool,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct WeightCheckArgs {
    /// Generator spec (inline JSON or file path), as for `evaluate`.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long, requires_all = ["eta", "n", "k", "r"])]
    sigma: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Concrete form (JSON file) for the explicit check.
    #[arg(long)]
    form: Option<PathBuf>,
    /// n x n matrix a (JSON file: 2D array of rational strings).
    #[arg(long)]
    matrix_a: Option<PathBuf>,
    /// k x k matrix p (JSON file: 2D array of rational strings).
    #[arg(long)]
    matrix_p: Option<PathBuf>,
    /// Run this many random (generator, form, a, p) samples instead.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var("BILINV_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Gate { .. } | Error::Divisibility { .. } => 2,
        Error::Json(_) | Error::Parse(_) => 3,
        Error::DimensionMismatch(_)
        | Error::Shape(_)
        | Error::VariableSetMismatch(_, _)
        | Error::IndexOutOfRange { .. } => 4,
        Error::Budget { .. } => 5,
        _ => 1,
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Generators(args) => cmd_generators(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Relations(args) => cmd_relations(args),
        Command::Pencil(args) => cmd_pencil(args),
        Command::WeightCheck(args) => cmd_weight_check(args),
    }
}

// ---------------------------------------------------------------------------
// Shared input plumbing
// ---------------------------------------------------------------------------

fn read_json_file(path: &PathBuf) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

enum GeneratorSpec {
    Id(GeneratorId),
    Blocks(BlockForm),
}

impl GeneratorSpec {
    fn polynomial(&self) -> Result<SparsePolynomial> {
        match self {
            GeneratorSpec::Id(g) => evaluate_polynomial(g),
            GeneratorSpec::Blocks(bf) => evaluate_polynomial_blocks(bf),
        }
    }

    fn shape(&self) -> (usize, usize, usize) {
        match self {
            GeneratorSpec::Id(g) => (g.n, g.k, g.r),
            GeneratorSpec::Blocks(bf) => (bf.n(), bf.k(), bf.r()),
        }
    }
}

fn parse_generator_value(value: serde_json::Value) -> Result<GeneratorSpec> {
    if value.get("sigma").is_some() {
        Ok(GeneratorSpec::Id(GeneratorId::from_json_value(value)?))
    } else if value.get("v_blocks").is_some() {
        let bf: BlockForm = serde_json::from_value(value)?;
        bilinv_core::invariant::require_gate(bf.n(), bf.k(), bf.r())?;
        Ok(GeneratorSpec::Blocks(bf))
    } else {
        Err(Error::Json(
            "generator spec needs either \"sigma\"/\"eta\" or \"v_blocks\"/\"w_blocks\"".into(),
        ))
    }
}

/// Accepts inline JSON, a JSON file path, or the individual flags.
fn generator_from_args(
    generator: &Option<String>,
    sigma: &Option<String>,
    eta: &Option<String>,
    n: Option<usize>,
    k: Option<usize>,
    r: Option<usize>,
) -> Result<GeneratorSpec> {
    if let Some(text) = generator {
        let value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(_) => read_json_file(&PathBuf::from(text))?,
        };
        return parse_generator_value(value);
    }
    match (sigma, eta, n, k, r) {
        (Some(sigma), Some(eta), Some(n), Some(k), Some(r)) => {
            let g = GeneratorId::new(
                n,
                k,
                r,
                Permutation::from_cycles(sigma, 2 * r)?,
                Permutation::from_cycles(eta, r)?,
            )?;
            Ok(GeneratorSpec::Id(g))
        }
        _ => Err(Error::Usage(
            "provide --generator, or all of --sigma --eta --n --k --r".into(),
        )),
    }
}

fn read_form(path: &PathBuf) -> Result<BilinearForm> {
    BilinearForm::from_json_value(read_json_file(path)?)
}

fn read_matrix(path: &PathBuf) -> Result<RationalMatrix> {
    let value = read_json_file(path)?;
    let rows: Vec<Vec<String>> = serde_json::from_value(value)?;
    let parsed = rows
        .iter()
        .map(|row| row.iter().map(|s| ratio::parse(s)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    RationalMatrix::from_rows(parsed)
}

fn rational_json(v: &num_rational::BigRational) -> serde_json::Value {
    let (num, den) = ratio::to_parts(v);
    serde_json::json!({ "num": num, "den": den })
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

fn cmd_generators(args: GeneratorsArgs) -> Result<u8> {
    let (n, k, r) = (args.n, args.k, args.r);
    if args.raw {
        return cmd_generators_raw(args);
    }
    let classes = enumerate_distinct(n, k, r)?;
    let vars = BVars { n, k };
    let names = vars.names();
    let mut items = Vec::with_capacity(classes.len());
    for bf in &classes {
        let poly = evaluate_polynomial_blocks(bf)?;
        let mut item = serde_json::to_value(bf)?;
        let obj = item.as_object_mut().expect("block form serializes to an object");
        if args.symmetrized {
            let zero = poly.is_zero();
            obj.insert("symmetrized_zero".into(), serde_json::Value::Bool(zero));
            if !zero {
                obj.insert("polynomial".into(), poly.to_json_value(&names)?);
            }
        } else {
            obj.insert("polynomial".into(), poly.to_json_value(&names)?);
        }
        items.push(item);
    }
    if args.pretty {
        for (bf, item) in classes.iter().zip(&items) {
            let poly_text = match item.get("polynomial") {
                Some(value) => {
                    let (p, _) = SparsePolynomial::from_json_value(value.clone())?;
                    p.pretty(&|v| vars.pretty_name(v))
                }
                None => "0 (dropped by symmetrization)".to_string(),
            };
            println!(
                "v{:?} w{:?} sign {:+} : {poly_text}",
                bf.v_blocks, bf.w_blocks, bf.sign
            );
        }
    } else {
        println!("{}", serde_json::to_string(&items)?);
    }
    Ok(0)
}

fn cmd_generators_raw(args: GeneratorsArgs) -> Result<u8> {
    let (n, k, r) = (args.n, args.k, args.r);
    bilinv_core::invariant::require_gate(n, k, r)?;
    let factorial = |m: usize| (1..=m).product::<usize>();
    let raw_count = factorial(2 * r) * factorial(r);
    if raw_count > args.budget {
        return Err(Error::Budget { needed: raw_count, budget: args.budget });
    }
    use itertools::Itertools;
    let mut items = Vec::with_capacity(raw_count);
    for sigma_images in (1..=2 * r).permutations(2 * r) {
        let sigma = Permutation::from_images(sigma_images).expect("valid images");
        for eta_images in (1..=r).permutations(r) {
            let eta = Permutation::from_images(eta_images).expect("valid images");
            let g = GeneratorId::new(n, k, r, sigma.clone(), eta)?;
            items.push(g.to_json_value()?);
        }
    }
    println!("{}", serde_json::to_string(&items)?);
    Ok(0)
}

/// Serializes with sorted object keys (via `serde_json::Value`), so equal
/// inputs always produce byte-identical output.
fn to_sorted_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: EvaluateArgs) -> Result<u8> {
    let spec = generator_from_args(&args.generator, &args.sigma, &args.eta, args.n, args.k, args.r)?;
    let (n, k, _) = spec.shape();
    let poly = spec.polynomial()?;
    match &args.form {
        Some(path) => {
            let form = read_form(path)?;
            if form.n != n || form.k != k {
                return Err(Error::DimensionMismatch(format!(
                    "form of shape (n={}, k={}) against generator (n={n}, k={k})",
                    form.n, form.k
                )));
            }
            let value = poly.eval(form.values())?;
            if args.pretty {
                println!("{}", ratio::to_string(&value));
            } else {
                println!("{}", serde_json::to_string(&rational_json(&value))?);
            }
        }
        None => {
            let vars = BVars { n, k };
            if args.pretty {
                println!("{}", poly.pretty(&|v| vars.pretty_name(v)));
            } else {
                println!("{}", serde_json::to_string(&poly.to_json_value(&vars.names())?)?);
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// relations
// ---------------------------------------------------------------------------

fn cmd_relations(args: RelationsArgs) -> Result<u8> {
    let (n, k, r) = (args.n, args.k, args.r);
    bilinv_core::invariant::require_gate(n, k, r)?;

    if args.span_check {
        let report = kernel_span_check(n, k, r, args.budget)?;
        if args.pretty {
            match (report.kernel_dim, report.deficit_dim) {
                (Some(kd), Some(dd)) => println!(
                    "kernel dim {kd}, {}, deficit {dd}",
                    if report.spanned == Some(true) { "spanned" } else { "not spanned" }
                ),
                _ => println!(
                    "truncated: {} classes exceed budget {}",
                    report.num_classes, report.budget
                ),
            }
        } else {
            println!("{}", to_sorted_json(&report)?);
        }
        return Ok(if report.truncated { 5 } else { 0 });
    }

    use rayon::prelude::*;
    let mut certificates: Vec<RelationCertificate> = Vec::new();
    let want = |label: &str| args.kind == "all" || args.kind == label;
    if want("a") {
        let specs = enumerate_type_a_specs(n, r)?;
        let built: Result<Vec<_>> = specs
            .par_iter()
            .map(|spec| type_a_relation(n, r, spec))
            .collect();
        certificates.extend(built?);
    }
    if want("b") {
        let specs = enumerate_type_b_specs(k, r)?;
        let built: Result<Vec<_>> = specs
            .par_iter()
            .map(|spec| type_b_relation(k, r, spec))
            .collect();
        certificates.extend(built?);
    }
    if want("trivial") {
        certificates.extend(trivial_relations(n, k, r)?);
    }
    if !["all", "a", "b", "trivial"].contains(&args.kind.as_str()) {
        return Err(Error::Usage(format!("unknown --kind {:?}", args.kind)));
    }
    if let Some(limit) = args.limit {
        certificates.truncate(limit);
    }
    if args.verify {
        // Constructors already verified these; re-expand to be sure.
        let rechecked: Result<Vec<_>> = certificates
            .into_par_iter()
            .map(bilinv_core::relation::verify_certificate)
            .collect();
        certificates = rechecked?;
    }
    for cert in &certificates {
        if args.pretty {
            println!("{}", pretty_certificate(cert));
        } else {
            println!("{}", to_sorted_json(cert)?);
        }
    }
    eprintln!("{} certificates, all verified", certificates.len());
    Ok(0)
}

fn pretty_certificate(cert: &RelationCertificate) -> String {
    let mut parts = Vec::new();
    for t in &cert.terms {
        let coef = ratio::to_string(&t.coef);
        let sign = if coef.starts_with('-') { "-" } else { "+" };
        let magnitude = coef.trim_start_matches('-');
        let body = match (&t.sigma, &t.eta) {
            (Some(s), Some(e)) => format!("v_{s} (x) w^{e}"),
            (Some(s), None) => format!("v_{s}"),
            (None, Some(e)) => format!("w^{e}"),
            (None, None) => "1".to_string(),
        };
        if magnitude == "1" {
            parts.push(format!("{sign} {body}"));
        } else {
            parts.push(format!("{sign} {magnitude} {body}"));
        }
    }
    format!("{:?}: {} = 0", cert.kind, parts.join(" "))
}

// ---------------------------------------------------------------------------
// pencil
// ---------------------------------------------------------------------------

fn cmd_pencil(args: PencilArgs) -> Result<u8> {
    let pencil = pencil_determinant();
    let vars = BVars { n: 2, k: 2 };
    let names = vars.names();

    if args.compare_invariant {
        let disc = discriminant(&pencil)?;
        let g = GeneratorId::new(
            2,
            2,
            4,
            Permutation::from_cycles("(23)(67)", 8)?,
            Permutation::from_cycles("(23)", 4)?,
        )?;
        let target = evaluate_polynomial(&g)?.scale(&ratio::from_pair(-1, 2));
        return if poly_equal(&disc, &target)? {
            println!("pass: discriminant = (-1/2) * f[sigma=(23)(67), eta=(23)]");
            Ok(0)
        } else {
            println!("fail: discriminant != (-1/2) * f[sigma=(23)(67), eta=(23)]");
            Ok(1)
        };
    }

    match &args.form {
        Some(path) => {
            let form = read_form(path)?;
            if form.n != 2 || form.k != 2 {
                return Err(Error::DimensionMismatch(
                    "the pencil needs a form with n = 2, k = 2".into(),
                ));
            }
            let values = form.values();
            let x2 = pencil.x2.eval(values)?;
            let xy = pencil.xy.eval(values)?;
            let y2 = pencil.y2.eval(values)?;
            if args.discriminant {
                let d = discriminant(&pencil)?.eval(values)?;
                if args.pretty {
                    println!("{}", ratio::to_string(&d));
                } else {
                    println!("{}", serde_json::to_string(&rational_json(&d))?);
                }
            } else if args.pretty {
                println!(
                    "P(x,y) = ({}) x^2 + ({}) xy + ({}) y^2",
                    ratio::to_string(&x2),
                    ratio::to_string(&xy),
                    ratio::to_string(&y2)
                );
            } else {
                let out = serde_json::json!({
                    "x2": rational_json(&x2),
                    "xy": rational_json(&xy),
                    "y2": rational_json(&y2),
                });
                println!("{}", serde_json::to_string(&out)?);
            }
        }
        None => {
            if args.discriminant {
                let d = discriminant(&pencil)?;
                if args.pretty {
                    println!("{}", d.pretty(&|v| vars.pretty_name(v)));
                } else {
                    println!("{}", serde_json::to_string(&d.to_json_value(&names)?)?);
                }
            } else if args.pretty {
                let render = |p: &SparsePolynomial| p.pretty(&|v| vars.pretty_name(v));
                println!("x^2: {}", render(&pencil.x2));
                println!("xy:  {}", render(&pencil.xy));
                println!("y^2: {}", render(&pencil.y2));
            } else {
                let out = serde_json::json!({
                    "x2": pencil.x2.to_json_value(&names)?,
                    "xy": pencil.xy.to_json_value(&names)?,
                    "y2": pencil.y2.to_json_value(&names)?,
                });
                println!("{}", serde_json::to_string(&out)?);
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// weight-check
// ---------------------------------------------------------------------------

fn cmd_weight_check(args: WeightCheckArgs) -> Result<u8> {
    if let Some(samples) = args.random {
        let (n, k, r) = match (args.n, args.k, args.r) {
            (Some(n), Some(k), Some(r)) => (n, k, r),
            _ => return Err(Error::Usage("--random needs --n --k --r".into())),
        };
        bilinv_core::invariant::require_gate(n, k, r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut failures = 0usize;
        for _ in 0..samples {
            let g = GeneratorId::new(
                n,
                k,
                r,
                random_permutation(&mut rng, 2 * r),
                random_permutation(&mut rng, r),
            )?;
            let form = random_form(&mut rng, n, k);
            let a = random_invertible(&mut rng, n);
            let p = random_invertible(&mut rng, k);
            if !weight_check(&g, &form, &a, &p)? {
                failures += 1;
            }
        }
        let pass = failures == 0;
        println!(
            "{}",
            serde_json::json!({ "samples": samples, "failures": failures, "pass": pass })
        );
        return Ok(if pass { 0 } else { 1 });
    }

    let spec = generator_from_args(&args.generator, &args.sigma, &args.eta, args.n, args.k, args.r)?;
    let g = match spec {
        GeneratorSpec::Id(g) => g,
        GeneratorSpec::Blocks(bf) => bf.generator_id()?,
    };
    let (form, a, p) = match (&args.form, &args.matrix_a, &args.matrix_p) {
        (Some(f), Some(a), Some(p)) => (read_form(f)?, read_matrix(a)?, read_matrix(p)?),
        _ => {
            return Err(Error::Usage(
                "provide --form, --matrix-a and --matrix-p, or --random N".into(),
            ))
        }
    };
    let pass = weight_check(&g, &form, &a, &p)?;
    println!("{}", serde_json::json!({ "pass": pass }));
    Ok(if pass { 0 } else { 1 })
}

fn random_permutation(rng: &mut ChaCha8Rng, degree: usize) -> Permutation {
    let mut images: Vec<usize> = (1..=degree).collect();
    images.shuffle(rng);
    Permutation::from_images(images).expect("shuffled identity is a permutation")
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, k: usize) -> BilinearForm {
    let entries = (0..k * n * n)
        .map(|_| ratio::from_int(rng.gen_range(-3..=3)))
        .collect();
    BilinearForm::new(n, k, entries).expect("entry count matches")
}

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> RationalMatrix {
    loop {
        let rows: Vec<Vec<num_rational::BigRational>> = (0..n)
            .map(|_| (0..n).map(|_| ratio::from_int(rng.gen_range(-3..=3))).collect())
            .collect();
        let m = RationalMatrix::from_rows(rows).expect("square rows");
        if !m.determinant().expect("square").is_zero() {
            return m;
        }
    }
}
