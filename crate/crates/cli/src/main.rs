mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use friedrichs_core::classification::{
    build_v_from_u, classify, count_mutually_adjoint, sweep_alpha, MCount, RealisationReport,
};
use friedrichs_core::coefficients::{field_from_rows, validate_spec, EntrySource, FriedrichsSpec};
use friedrichs_core::defect::{invariance_harness, HarnessReport};
use friedrichs_core::expr;
use friedrichs_core::solver;
use friedrichs_core::trace_space::{build_trace_form, kernel_traces, Alpha, BoundaryCondition, KernelBases, TraceForm};
use friedrichs_core::{Error, ErrorClass};

use render::{complex_json, matrix_json, trace_basis_json};

const SCHEMA_VERSION: &str = "1";
const DEFAULT_ALPHAS: &str = "-2,-1,-0.5,0,0.3,alpha_beta,0.9,1,2,inf";

#[derive(Parser, Debug)]
#[command(name = "friedrichs-kit", version, about = "Boundary-condition analysis for one-dimensional Friedrichs systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the coefficient assumptions and report the symmetric-part bounds.
    Validate(Common),
    /// Kernel traces of the maximal operators and the deficiency indices.
    Kernels(Common),
    /// Classify the realisation given by a boundary condition.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Boundary-condition block as JSON, or `@FILE`.
        #[arg(long)]
        bc: String,
    },
    /// Classify `u(b) = alpha u(a)` over a grid of alphas (scalar specs).
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alphas; `inf` and `alpha_beta` are accepted.
        #[arg(long, default_value = DEFAULT_ALPHAS)]
        alphas: String,
    },
    /// Deficiency indices, singular-endpoint evidence and the invariance harness.
    Defect {
        #[command(flatten)]
        common: Common,
        /// JSON file with bounded parts `C` to compare.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Number of self-adjoint-type realisations.
    Count(Common),
    /// Solve `A u' + C u = f` under a boundary condition. Here `--out` names
    /// the CSV trajectory file; the summary always goes to standard output.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bc: String,
        /// Comma-separated right-hand side components.
        #[arg(long)]
        rhs: String,
    },
    /// Validate, kernels, count and (for scalar specs) the alpha sweep in one dossier.
    Report(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative rank threshold for subspace computations.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Relative threshold for semidefiniteness tests.
    #[arg(long)]
    psd_tol: Option<f64>,
    /// Relative tolerance of the ODE integrator.
    #[arg(long)]
    ode_rtol: Option<f64>,
    /// Minimum number of sample points for coefficient checks.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Failure of a command, mapped onto the exit status.
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    if let Some(n) = std::env::var("FRIEDRICHS_KIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `friedrichs-kit --help` for usage");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e.class() {
                ErrorClass::Validation => ExitCode::from(1),
                ErrorClass::Numerical => ExitCode::from(2),
            }
        }
    }
}

fn read_file(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_spec(common: &Common) -> Outcome<FriedrichsSpec> {
    let mut spec = FriedrichsSpec::from_json(&read_file(&common.spec)?)?;
    let tol = &mut spec.tolerances;
    for (flag, value, slot) in [
        ("--rank-tol", common.rank_tol, &mut tol.rank_tol),
        ("--psd-tol", common.psd_tol, &mut tol.psd_tol),
        ("--ode-rtol", common.ode_rtol, &mut tol.ode_rtol),
    ] {
        if let Some(v) = value {
            if !(v > 0.0 && v < 1.0) {
                return Err(Failure::Usage(format!("{flag} must lie in (0, 1)")));
            }
            *slot = v;
        }
    }
    if let Some(g) = common.grid {
        if g < 2 {
            return Err(Failure::Usage("--grid must be at least 2".into()));
        }
        tol.grid = g;
    }
    Ok(spec)
}

fn load_bc(arg: &str) -> Outcome<BoundaryCondition> {
    let src = match arg.strip_prefix('@') {
        Some(path) => read_file(Path::new(path))?,
        None => arg.to_string(),
    };
    Ok(BoundaryCondition::from_json(&src)?)
}

fn emit(common: &Common, command: &str, body: Value) -> Outcome<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    doc.insert("command".into(), Value::from(command));
    if let Value::Object(fields) = body {
        doc.extend(fields);
    }
    let doc = Value::Object(doc);
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n",
        Format::Text => render::text(&doc),
    };
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Validate(common) => {
            let spec = load_spec(&common)?;
            emit(&common, "validate", validate_json(&spec)?)
        }
        Command::Kernels(common) => {
            let spec = load_spec(&common)?;
            validate_spec(&spec)?;
            let (form, kb) = kernels(&spec)?;
            emit(&common, "kernels", kernels_json(&form, &kb))
        }
        Command::Classify { common, bc } => {
            let spec = load_spec(&common)?;
            let bc = load_bc(&bc)?;
            validate_spec(&spec)?;
            let (form, kb) = kernels(&spec)?;
            let v = bc.to_subspace(&form)?;
            let report = classify(&v, &kb, &form)?;
            let alpha_beta = if spec.n() == 1 && !spec.is_degenerate() {
                Some(sweep_alpha(&spec, &[])?.alpha_beta)
            } else {
                None
            };
            let m = count_mutually_adjoint(kb.d_plus, kb.d_minus, spec.field);
            emit(&common, "classify", classify_json(&form, &report, alpha_beta, m))
        }
        Command::SweepAlpha { common, alphas } => {
            let spec = load_spec(&common)?;
            validate_spec(&spec)?;
            emit(&common, "sweep-alpha", sweep_json(&spec, &alphas)?)
        }
        Command::Defect { common, samples } => {
            let spec = load_spec(&common)?;
            validate_spec(&spec)?;
            let (_, kb) = kernels(&spec)?;
            let harness = match samples {
                Some(path) => Some(run_harness(&spec, &path)?),
                None => None,
            };
            let body = serde_json::json!({
                "d_plus": kb.d_plus,
                "d_minus": kb.d_minus,
                "singular_blocks": kb.singular_blocks,
                "harness": harness.map(|h| serde_json::json!({
                    "verdict": if h.pass { "PASS" } else { "FAIL" },
                    "rows": h.rows,
                })),
            });
            emit(&common, "defect", body)
        }
        Command::Count(common) => {
            let spec = load_spec(&common)?;
            validate_spec(&spec)?;
            emit(&common, "count", count_json(&spec)?)
        }
        Command::Solve { mut common, bc, rhs } => {
            let csv = common.out.take();
            let spec = load_spec(&common)?;
            let bc = load_bc(&bc)?;
            let f = rhs
                .split(',')
                .map(|s| expr::parse(s.trim()).map_err(Error::from))
                .collect::<Result<Vec<_>, _>>()?;
            let form = build_trace_form(&spec);
            let v = bc.to_subspace(&form)?;
            let sol = solver::solve(&spec, &v, &f)?;
            if let Some(path) = &csv {
                let file = fs::File::create(path)
                    .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
                sol.write_csv(file)
                    .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let body = serde_json::json!({
                "residual_l2": sol.residual_l2,
                "u_norm": sol.u_norm,
                "f_norm": sol.f_norm,
                "trace": sol.trace.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
                "trace_distance": sol.trace_distance,
                "condition": sol.condition,
                "mu": sol.mu,
                "bound_ratio": sol.bound_ratio,
                "apriori_bound": 1.0 + 1.0 / sol.mu,
                "nodes": sol.trajectory.nodes().len(),
                "csv": csv.map(|p| p.display().to_string()),
            });
            emit(&common, "solve", body)
        }
        Command::Report(common) => {
            let spec = load_spec(&common)?;
            let validate = validate_json(&spec)?;
            let (form, kb) = kernels(&spec)?;
            let kernels = kernels_json(&form, &kb);
            let count = count_json(&spec)?;
            let sweep = if spec.n() == 1 && !spec.is_degenerate() {
                Some(sweep_json(&spec, DEFAULT_ALPHAS)?)
            } else {
                None
            };
            let body = serde_json::json!({
                "validate": validate,
                "kernels": kernels,
                "count": count,
                "sweep_alpha": sweep,
            });
            emit(&common, "report", body)
        }
    }
}

fn kernels(spec: &FriedrichsSpec) -> Outcome<(TraceForm, KernelBases)> {
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    Ok((form, kb))
}

fn validate_json(spec: &FriedrichsSpec) -> Outcome<Value> {
    let parts = validate_spec(spec)?;
    Ok(serde_json::json!({
        "field": spec.field,
        "dimension": spec.n(),
        "interval": [spec.interval.a, spec.interval.b],
        "degeneracy": spec.degeneracy,
        "mu": parts.mu,
        "lambda": parts.lambda,
        "mu_grid": parts.mu_grid,
        "mu_argmin": parts.mu_argmin,
        "grid_points": parts.grid_points,
        "symmetric_part": parts.s.render(),
        "skew_part": parts.skew_bounded.render(),
    }))
}

fn kernels_json(form: &TraceForm, kb: &KernelBases) -> Value {
    let (pos, neg, zero) = form.signature();
    serde_json::json!({
        "d_plus": kb.d_plus,
        "d_minus": kb.d_minus,
        "effective_trace_dim": form.dim(),
        "form_signature": {"positive": pos, "negative": neg, "zero": zero},
        "kernel_traces": trace_basis_json(form, kb.k.basis()),
        "adjoint_kernel_traces": trace_basis_json(form, kb.k_tilde.basis()),
        "singular_blocks": kb.singular_blocks,
    })
}

fn count_json(spec: &FriedrichsSpec) -> Outcome<Value> {
    let (_, kb) = kernels(spec)?;
    let m: MCount = count_mutually_adjoint(kb.d_plus, kb.d_minus, spec.field);
    Ok(serde_json::json!({
        "field": spec.field,
        "d_plus": kb.d_plus,
        "d_minus": kb.d_minus,
        "m": m,
    }))
}

fn categories_json(report: &RealisationReport) -> serde_json::Map<String, Value> {
    match serde_json::to_value(report.categories).expect("flags serialize") {
        Value::Object(map) => map,
        _ => unreachable!("categories serialize as an object"),
    }
}

fn classify_json(form: &TraceForm, report: &RealisationReport, alpha_beta: Option<num_complex::Complex64>, m: MCount) -> Value {
    let mut body = categories_json(report);
    let u = report.u.as_ref().map(|u| {
        let rebuilt = build_v_from_u(u, form);
        serde_json::json!({
            "domain_dim": u.domain_dim(),
            "matrix": matrix_json(u.matrix()),
            "norm_indefinite": u.norm_indefinite,
            "isometry_defect": u.isometry_defect(),
            "round_trip_distance": rebuilt.distance(&report.v),
        })
    });
    body.insert("U".into(), u.unwrap_or(Value::Null));
    body.insert("alpha_beta".into(), alpha_beta.map(complex_json).unwrap_or(Value::Null));
    body.insert("m_count".into(), serde_json::to_value(m).expect("count serializes"));
    body.insert("V".into(), trace_basis_json(form, report.v.basis()));
    body.insert("V_perp".into(), trace_basis_json(form, report.v_perp.basis()));
    body.insert(
        "diagnostics".into(),
        serde_json::to_value(&report.diagnostics).expect("diagnostics serialize"),
    );
    Value::Object(body)
}

fn parse_alphas(list: &str, alpha_beta: Alpha) -> Outcome<Vec<Alpha>> {
    list.split(',')
        .map(|s| match s.trim() {
            "alpha_beta" => Ok(alpha_beta),
            other => other.parse::<Alpha>().map_err(|e| Failure::Usage(e.to_string())),
        })
        .collect()
}

fn sweep_json(spec: &FriedrichsSpec, alphas: &str) -> Outcome<Value> {
    let probe = sweep_alpha(spec, &[])?;
    let grid = parse_alphas(alphas, Alpha::Finite(probe.alpha_beta))?;
    let sweep = sweep_alpha(spec, &grid)?;
    let rows: Vec<Value> = sweep
        .rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            obj.insert("alpha".into(), Value::from(row.alpha.label()));
            obj.extend(categories_json(&row.report));
            obj.insert(
                "norm_indefinite".into(),
                row.report.diagnostics.norm_indefinite.map(Value::from).unwrap_or(Value::Null),
            );
            Value::Object(obj)
        })
        .collect();
    Ok(serde_json::json!({
        "alpha_beta": complex_json(sweep.alpha_beta),
        "alpha_beta_quadrature": complex_json(sweep.alpha_beta_quadrature),
        "non_bijective": sweep.non_bijective().iter().map(Alpha::label).collect::<Vec<_>>(),
        "rows": rows,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesFile {
    samples: Vec<Sample>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sample {
    label: String,
    #[serde(rename = "C")]
    c: Vec<Vec<EntrySource>>,
}

fn run_harness(spec: &FriedrichsSpec, path: &Path) -> Outcome<HarnessReport> {
    let file: SamplesFile =
        serde_json::from_str(&read_file(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let samples = file
        .samples
        .into_iter()
        .map(|s| Ok((s.label, field_from_rows("C", spec.n(), &s.c)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(invariance_harness(spec, &samples)?)
}
