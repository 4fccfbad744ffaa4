//! `l2torsion`: determinants, torsion and gluing formulas from the command line.

mod report;

use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use l2torsion::acceptance;
use l2torsion::algebra::{fk_det, FkOptions, ModelKind};
use l2torsion::complex::{CochainComplex, TorsionReport};
use l2torsion::document::{Document, Subject};
use l2torsion::formulas::{verify_fibration, verify_product, verify_sum, FormulaReport};
use l2torsion::oracle::{mahler_refine, torsion_via_dense, torsion_via_laplacian};
use l2torsion::spaces::builtin::{heisenberg_bundle, klein_bundle};
use l2torsion::spaces::{
    builtin_space, cochain_with_coefficients, l2_torsion, product_space, pushout_assemble, Bundle, CoefficientSystem, Subcomplex,
};
use l2torsion::Error;

use report::{Cell, Report};

#[derive(Parser)]
#[command(name = "l2torsion", version, about = "L2-torsion of equivariant CW complexes and its gluing formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Convergence and pass/fail tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tolerance: f64,
    /// Starting quadrature resolution per circle factor on the torus.
    #[arg(long, global = true, default_value_t = 256)]
    grid: usize,
    /// Absolute spectral cutoff replacing the relative rank rule.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Aligned text or JSON with 17 significant digits.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Also run the independent oracle and report any disagreement.
    #[arg(long, global = true)]
    oracle: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    Sum,
    Product,
    Fibration,
}

#[derive(Subcommand)]
enum Command {
    /// Fuglede-Kadison determinant of a matrix document.
    Det { file: String },
    /// Torus determinant (log Mahler measure) with its error bound.
    Mahler { file: String },
    /// L2-torsion of a complex or of a space with coefficients.
    Torsion { file: String },
    /// Check the sum, product or fibration formula on a document.
    Verify { formula: Formula, file: String },
    /// Print the document of a built-in space, product, bundle or pushout.
    Builtin {
        name: String,
        #[arg(allow_negative_numbers = true)]
        params: Vec<String>,
    },
    /// Run the acceptance suites.
    Selftest,
}

/// Why a run stopped early.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

/// A finished computation: what to print and whether it passed.
struct Done {
    report: Report,
    code: u8,
}

impl Done {
    fn ok(report: Report) -> Self {
        Done { report, code: 0 }
    }
}

fn read(file: &str) -> Result<Document, Failure> {
    let mut text = String::new();
    let res = if file == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(file).map(|t| text = t)
    };
    res.map_err(|e| Failure::Input(format!("{file}: {e}")))?;
    Ok(Document::from_json(&text)?)
}

impl Cli {
    fn options(&self) -> FkOptions {
        FkOptions::default().with_tolerance(self.tolerance).with_grid(self.grid).with_epsilon(self.epsilon)
    }

    fn run(&self) -> Result<Done, Failure> {
        match &self.command {
            Command::Det { file } => self.det(&read(file)?, false),
            Command::Mahler { file } => self.det(&read(file)?, true),
            Command::Torsion { file } => self.torsion(&read(file)?),
            Command::Verify { formula, file } => self.verify(*formula, &read(file)?),
            Command::Builtin { name, params } => {
                print!("{}", builtin(name, params)?.to_json());
                Ok(Done::ok(Report::default()))
            }
            Command::Selftest => Ok(selftest()),
        }
    }

    fn det(&self, doc: &Document, mahler: bool) -> Result<Done, Failure> {
        let m = doc.matrix()?;
        let kind = m.model().kind();
        if mahler && kind != ModelKind::Torus {
            return Err(Failure::Input("mahler needs a matrix over a torus algebra".into()));
        }
        let d = fk_det(&m, &self.options())?;
        let mut r = Report::default();
        r.field("algebra", m.model().to_string()).field("shape", vec![m.nrows(), m.ncols()]);
        if mahler {
            r.field("mahler_measure", d.log_det).field("exp_mahler_measure", d.log_det.exp());
        } else {
            r.log_pair("det", d.log_det);
        }
        r.field("rank", d.rank)
            .field("error_bound", d.error)
            .field("resolution", d.resolution)
            .field("det_class", d.det_class)
            .field("invertible", d.invertible);
        let mut code = if d.det_class { 0 } else { 3 };
        if self.oracle {
            let (name, value, bound) = if kind == ModelKind::Torus && m.shape() == (1, 1) {
                let o = mahler_refine(m.get(0, 0), m.model().torus_rank(), self.tolerance)?;
                ("mahler_refine", o.value, o.bound)
            } else {
                let c = CochainComplex::from_matrices(m.model().clone(), "D", 0, &[m.ncols(), m.nrows()], vec![m.clone()])?;
                if kind == ModelKind::FiniteGroup {
                    ("dense", torsion_via_dense(&c)?, 0.0)
                } else {
                    ("laplacian", torsion_via_laplacian(&c, self.tolerance)?, 0.0)
                }
            };
            let gap = (value - d.log_det).abs();
            r.field("oracle", name).field("oracle_log_det", value).field("oracle_bound", bound).field("disagreement", gap);
            if gap > self.tolerance.max(d.error + bound) {
                r.note("the oracle disagrees with the quadrature beyond the combined bounds");
                code = code.max(1);
            }
        }
        Ok(Done { report: r, code })
    }

    fn torsion(&self, doc: &Document) -> Result<Done, Failure> {
        let opts = self.options();
        let (c, t) = match doc.subject()? {
            Subject::Complex => {
                let c = doc.complex()?;
                let t = c.torsion(&opts)?;
                (c, t)
            }
            Subject::Matrix => return Err(Failure::Input("torsion needs a complex or a space, not a matrix".into())),
            _ => {
                let (x, h) = doc.space_with_coefficients()?;
                let t = l2_torsion(&x, &h, doc.sigma_log, &opts)?;
                (cochain_with_coefficients(&x, &h)?, t)
            }
        };
        let mut r = Report::default();
        r.field("complex", c.name()).field("algebra", c.model().to_string());
        torsion_fields(&mut r, &t);
        let mut code = if t.det_class { 0 } else { 3 };
        if self.oracle {
            let shift = t.log_value - c.torsion(&opts)?.log_value;
            let rows = self.oracle_rows(&[(c.name().to_string(), c.clone())])?;
            let gap = worst(&rows);
            r.table("oracle", &["complex", "main", "laplacian", "dense", "disagreement"], rows);
            r.field("oracle_disagreement", gap);
            if shift != 0.0 {
                r.note("oracle values exclude the sigma rescaling");
            }
            if gap > self.tolerance {
                code = code.max(1);
            }
        }
        Ok(Done { report: r, code })
    }

    /// Main, Laplacian and (finite models only) dense torsion of each complex.
    fn oracle_rows(&self, complexes: &[(String, CochainComplex)]) -> Result<Vec<Vec<Cell>>, Failure> {
        let opts = self.options();
        complexes
            .iter()
            .map(|(name, c)| {
                let main = c.torsion(&opts)?.log_value;
                let lap = torsion_via_laplacian(c, self.tolerance)?;
                let dense = if c.model().kind() == ModelKind::FiniteGroup { Some(torsion_via_dense(c)?) } else { None };
                let gap = dense.iter().fold((lap - main).abs(), |g, d| g.max((d - main).abs()));
                let dense = dense.map_or(Cell::Text("-".into()), Cell::Num);
                Ok(vec![name.as_str().into(), main.into(), lap.into(), dense, gap.into()])
            })
            .collect()
    }

    fn verify(&self, formula: Formula, doc: &Document) -> Result<Done, Failure> {
        let opts = self.options();
        let tol = self.tolerance;
        let (rep, complexes) = match formula {
            Formula::Sum => {
                let p = doc.pushout()?;
                let h = doc.pushout_coefficients(&p)?;
                let rep = verify_sum(&p, &h, doc.sigma_log, tol, &opts)?;
                let pieces = [&p.x, &p.x1, &p.x2, &p.x0];
                (rep, pieces.iter().map(|x| Ok((x.name.clone(), cochain_with_coefficients(x, &h)?))).collect::<Result<Vec<_>, Error>>())
            }
            Formula::Product => {
                let ((x1, h1), (x2, h2)) = doc.product()?;
                let rep = verify_product(&x1, &h1, &x2, &h2, tol, &opts)?;
                let oracle = || -> Result<Vec<(String, CochainComplex)>, Error> {
                    let x = product_space(&x1, &x2)?;
                    let (_, h) = CoefficientSystem::product(&h1, &h2)?;
                    Ok(vec![
                        (x.name.clone(), cochain_with_coefficients(&x, &h)?),
                        (x1.name.clone(), cochain_with_coefficients(&x1, &h1)?),
                        (x2.name.clone(), cochain_with_coefficients(&x2, &h2)?),
                    ])
                };
                (rep, oracle())
            }
            Formula::Fibration => {
                let b = doc.bundle()?;
                let h = doc.bundle_coefficients(&b)?;
                let rep = verify_fibration(&b, &h, doc.sigma_log, tol, &opts)?;
                let oracle = || -> Result<Vec<(String, CochainComplex)>, Error> {
                    let e = b.total_space()?;
                    Ok(vec![
                        (e.name.clone(), cochain_with_coefficients(&e, &h)?),
                        (b.fiber.name.clone(), cochain_with_coefficients(&b.fiber, &h)?),
                    ])
                };
                (rep, oracle())
            }
        };
        let mut r = Report::default();
        formula_fields(&mut r, &rep);
        if !matches!(formula, Formula::Product) {
            r.note(match doc.pi1_injective {
                Some(true) => "the document asserts pi_1-injectivity; the formula applies",
                Some(false) => "the document denies pi_1-injectivity; the identity is checked but the theorem does not cover it",
                None => "pi_1-injectivity is not asserted; the identity is checked numerically only",
            });
        }
        let mut code = if rep.all_passed() { 0 } else { 1 };
        if self.oracle {
            let rows = self.oracle_rows(&complexes?)?;
            let gap = worst(&rows);
            r.table("oracle", &["complex", "main", "laplacian", "dense", "disagreement"], rows);
            r.field("oracle_disagreement", gap);
            if gap > tol {
                code = 1;
            }
        }
        Ok(Done { report: r, code })
    }
}

fn worst(rows: &[Vec<Cell>]) -> f64 {
    rows.iter()
        .filter_map(|r| match r.last() {
            Some(Cell::Num(g)) => Some(*g),
            _ => None,
        })
        .fold(0.0, f64::max)
}

fn torsion_fields(r: &mut Report, t: &TorsionReport) {
    r.log_pair("torsion", t.log_value)
        .field("det_class", t.det_class)
        .field("weakly_acyclic", t.weakly_acyclic)
        .field("error_bound", t.error)
        .field("line", t.line.to_string())
        .field("trivialization", t.trivialization.as_str());
    let rows = t
        .degrees
        .iter()
        .zip(&t.betti)
        .enumerate()
        .map(|(j, (deg, b))| vec![Cell::Int(*deg), Cell::Num(*b), t.log_dets.get(j).copied().map_or(Cell::Text("-".into()), Cell::Num)])
        .collect();
    r.table("degrees", &["degree", "betti", "ln_det_d"], rows);
}

fn formula_fields(r: &mut Report, rep: &FormulaReport) {
    r.field("formula", rep.formula.as_str())
        .log_pair("lhs", rep.lhs_log)
        .log_pair("rhs", rep.rhs_log)
        .field("correction", rep.correction)
        .field("residual", rep.residual)
        .field("tolerance", rep.tolerance)
        .field("passed", rep.all_passed())
        .field("lhs_line", rep.lhs_line.to_string())
        .field("rhs_line", rep.rhs_line.to_string());
    if let Some(real) = &rep.real {
        r.field("real_residual", real.residual).field("real_passed", real.passed);
    }
    let terms = rep
        .terms
        .iter()
        .map(|t| vec![t.name.as_str().into(), t.exponent.into(), t.log_value.into(), t.weakly_acyclic.into()])
        .collect();
    r.table("terms", &["space", "exponent", "ln_torsion", "weakly_acyclic"], terms);
    if !rep.steps.is_empty() {
        let steps = rep
            .steps
            .iter()
            .map(|s| vec![s.formula.as_str().into(), s.residual.into(), s.all_passed().into()])
            .collect();
        r.table("steps", &["formula", "residual", "passed"], steps);
    }
    for n in &rep.notes {
        r.note(n.as_str());
    }
}

/// Splits `params` at the first `sep`, both sides non-empty.
fn split<'a>(name: &str, params: &'a [String], sep: &str) -> Result<(&'a [String], &'a [String]), Error> {
    let at = params.iter().position(|p| p == sep).ok_or_else(|| Error::BadParams(format!("{name}: separate the two parts by `{sep}`")))?;
    let (a, b) = (&params[..at], &params[at + 1..]);
    if a.is_empty() || b.is_empty() {
        return Err(Error::BadParams(format!("{name}: both parts must be named")));
    }
    Ok((a, b))
}

fn named(params: &[String]) -> Result<l2torsion::spaces::BuiltinSpace, Error> {
    builtin_space(&params[0], &params[1..])
}

fn builtin(name: &str, params: &[String]) -> Result<Document, Error> {
    match name {
        "product" => {
            let (a, b) = split(name, params, "x")?;
            Ok(Document::from_product(&named(a)?, &named(b)?))
        }
        "trivial_bundle" => {
            let (f, b) = split(name, params, "over")?;
            let f = named(f)?;
            Ok(Document::from_bundle(&Bundle::trivial(f.space, named(b)?.space)?, &f.coefficients))
        }
        "klein_bundle" => {
            let (b, h) = klein_bundle()?;
            Ok(Document::from_bundle(&b, &h))
        }
        "heisenberg_bundle" => {
            let p = match params {
                [] => 3,
                [p] => p.parse().map_err(|_| Error::BadParams(format!("heisenberg_bundle: {p:?} is not a positive integer")))?,
                _ => return Err(Error::BadParams("heisenberg_bundle takes at most one parameter".into())),
            };
            let (b, h) = heisenberg_bundle(p)?;
            Ok(Document::from_bundle(&b, &h))
        }
        "two_disks" => {
            if !params.is_empty() {
                return Err(Error::BadParams("two_disks takes no parameters".into()));
            }
            let d = builtin_space("disk", &["2".into()])?.space;
            let s1 = builtin_space("sphere", &["1".into()])?.space;
            let j = Subcomplex { cells: vec![vec![0], vec![0]] };
            let p = pushout_assemble(&s1, &d, &j, &d, &j.as_chain_map(&s1, &d))?;
            let mut doc = Document::from_pushout(&p, &CoefficientSystem::trivial(&p.x.group), j);
            doc.pi1_injective = Some(true);
            Ok(doc)
        }
        _ => Ok(Document::from_builtin(&builtin_space(name, params)?)),
    }
}

fn selftest() -> Done {
    let outcomes = acceptance::run_all();
    let rows = outcomes
        .iter()
        .map(|o| vec![Cell::Int(o.id.into()), o.title.into(), o.passed.into(), o.detail.as_str().into(), o.seconds.into()])
        .collect();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let mut r = Report::default();
    r.field("passed", passed).field("total", outcomes.len());
    r.table("criteria", &["id", "title", "passed", "detail", "seconds"], rows);
    Done { report: r, code: if passed == outcomes.len() { 0 } else { 1 } }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(done) => {
            if !matches!(cli.command, Command::Builtin { .. }) {
                match cli.format {
                    Format::Table => print!("{}", done.report.text()),
                    Format::Json => print!("{}", done.report.json()),
                }
            }
            ExitCode::from(done.code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
