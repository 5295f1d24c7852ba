mod schema;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schema::{InstanceFile, Kind};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use vessel::applications::{fractional_marriage, MarriageError, MarriageOutcome};
use vessel::distribution::{DistributionError, Violation};
use vessel::game::{self, EquilibriumClass};
use vessel::id_weighted::{self, DescentOptions, WeightedClass, WeightedError, WeightedGame, WeightedProfile};
use vessel::oracles::OracleConfig;
use vessel::registry::{PotentialDescent, RegistryError, SolverRegistry, Verdict};
use vessel::solver::{self, SolverError, SolverOptions, SolverReport, DEFAULT_MAX_N};
use vessel::{Game, Profile, ResourceSet, Tol};

#[derive(Parser)]
#[command(name = "vessel", version, about = "Equilibrium costs of nonatomic resource selection games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Instance file; standard input when absent.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Result file; standard output when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Seeds the random starting profile of `idsolve` and the descent order of `potential-descent`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on the resource count for subset enumeration.
    #[arg(long = "max-n", global = true)]
    max_n: Option<usize>,
    /// Emit the piston-descent ceiling trace of `idsolve`.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium cost of every resource and the stopping order.
    Heights {
        #[arg(long, default_value = "hydraulic")]
        solver: String,
    },
    /// Heights, stopping order and an explicit equilibrium profile.
    Equilibrium,
    /// Nash check and classification of the file's profile.
    Verify,
    /// Potential of the file's profile, or of the constructed equilibrium.
    Potential,
    /// Heights as the mass of one type sweeps a grid.
    Sensitivity {
        /// Comma-separated 1-indexed resources of the swept type, e.g. "1,2".
        #[arg(long = "type")]
        type_: String,
        /// `a:b:steps`, with `steps` equal intervals from a to b.
        #[arg(long)]
        grid: String,
    },
    /// Witness for a distribution constraint.
    Satisfy,
    /// Perfect fractional marriage or a Hall violation.
    Marriage,
    /// Interval-constrained transport triple.
    Csp {
        #[arg(long, default_value = "sequential-pistons")]
        backend: String,
    },
    /// Piston descent for a weighted game.
    Idsolve,
    /// Nash check and classification of a weighted profile.
    Idverify,
}

enum Failure {
    Input(String),
    Precondition(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Precondition(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Precondition(m) => m,
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Game(_) | SolverError::BadSet(_) | SolverError::UnsortedGrid => Failure::Input(e.to_string()),
            _ => Failure::Precondition(e.to_string()),
        }
    }
}

impl From<WeightedError> for Failure {
    fn from(e: WeightedError) -> Self {
        match e {
            WeightedError::DiscontinuousCost(_) | WeightedError::NoConvergence { .. } => {
                Failure::Precondition(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Unknown { .. } => Failure::Input(e.to_string()),
            RegistryError::Failed(_) => Failure::Precondition(e.to_string()),
        }
    }
}

struct Report {
    code: u8,
    json: Value,
    text: String,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report { code: 0, json, text }
    }
}

struct Ctx {
    file: InstanceFile,
    tol: Tol,
    max_n: usize,
    seed: Option<u64>,
    trace: bool,
}

impl Ctx {
    fn opts(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_n: self.max_n }
    }

    fn expect(&self, kind: Kind, command: &str) -> Result<(), Failure> {
        let got = self.file.kind().map_err(Failure::Input)?;
        if got != kind {
            return Err(Failure::Input(format!("`{command}` needs a {} instance, got {}", kind.key(), got.key())));
        }
        Ok(())
    }

    fn game(&self, command: &str) -> Result<Game, Failure> {
        self.expect(Kind::Game, command)?;
        self.file.game.as_ref().unwrap().build().map_err(Failure::Input)
    }

    fn weighted(&self, command: &str) -> Result<WeightedGame, Failure> {
        self.expect(Kind::WeightedGame, command)?;
        self.file.weighted_game.as_ref().unwrap().build().map_err(Failure::Input)
    }

    fn descent(&self) -> DescentOptions {
        let s = self.file.settings();
        DescentOptions {
            step: s.step,
            max_iters: s.max_iters.unwrap_or(DescentOptions::default().max_iters),
            tol: self.tol,
            initial: None,
            trace: self.trace,
        }
    }
}

fn sets(s: ResourceSet) -> Value {
    json!(s.to_one_based())
}

fn order_json(r: &SolverReport) -> Value {
    Value::Array(r.stopping_order.iter().map(|st| json!([sets(st.resources), st.height])).collect())
}

fn heights_text(out: &mut String, r: &SolverReport) {
    for (j, h) in r.heights.iter().enumerate() {
        let _ = writeln!(out, "h_{} = {h}", j + 1);
    }
    for (k, st) in r.stopping_order.iter().enumerate() {
        let label = if k == 0 { "P_G" } else { "P" };
        let _ = writeln!(out, "{label} = {} at h = {}", st.resources, st.height);
    }
}

fn profile_json(p: &Profile) -> Value {
    Value::Array(
        p.rows().iter().map(|(r, row)| json!({"resources": r.to_one_based(), "consumption": row})).collect(),
    )
}

fn profile_text(out: &mut String, p: &Profile) {
    for (r, row) in p.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "s({r}) = ({})", cells.join(", "));
    }
}

fn vector_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn matrix_text(out: &mut String, m: &[Vec<f64>]) {
    for row in m {
        let _ = writeln!(out, "{}", row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t"));
    }
}

fn heights(ctx: &Ctx, solver_name: &str) -> Result<Report, Failure> {
    let g = ctx.game("heights")?;
    if solver_name == "hydraulic" {
        let r = solver::compute_heights(&g, &ctx.opts())?;
        let mut text = String::new();
        heights_text(&mut text, &r);
        let mut doc = json!({"command": "heights", "solver": "hydraulic", "heights": r.heights, "order": order_json(&r)});
        if let Some(j) = g.costs().iter().position(|f| !f.is_continuous()) {
            let w = format!("cost of resource {} has a jump; heights are vacuous when no equilibrium exists", j + 1);
            let _ = writeln!(text, "warning: {w}");
            doc["warning"] = json!(w);
        }
        return Ok(Report::ok(doc, text));
    }
    let mut reg = SolverRegistry::standard();
    if let Some(seed) = ctx.seed {
        reg.register_cost(Box::new(PotentialDescent(OracleConfig { rng_seed: seed, ..OracleConfig::default() })));
    }
    let h = reg.cost_solver(solver_name)?.equilibrium_costs(&g, &ctx.opts())?;
    let text = h.iter().enumerate().map(|(j, x)| format!("h_{} = {x}\n", j + 1)).collect();
    Ok(Report::ok(json!({"command": "heights", "solver": solver_name, "heights": h}), text))
}

fn equilibrium(ctx: &Ctx) -> Result<Report, Failure> {
    let g = ctx.game("equilibrium")?;
    let r = solver::construct_equilibrium(&g, &ctx.opts())?;
    let p = r.equilibrium.as_ref().unwrap();
    let out = game::evaluate(&g, p, ctx.tol).map_err(|e| Failure::Precondition(e.0))?;
    let mut text = String::new();
    heights_text(&mut text, &r);
    profile_text(&mut text, p);
    Ok(Report::ok(
        json!({
            "command": "equilibrium",
            "heights": r.heights,
            "order": order_json(&r),
            "profile": profile_json(p),
            "loads": out.loads,
        }),
        text,
    ))
}

fn file_profile(ctx: &Ctx, g: &Game) -> Result<Option<Profile>, Failure> {
    ctx.file.profile.as_ref().map(|rows| schema::profile(rows, g.n()).map_err(Failure::Input)).transpose()
}

fn class_name(c: EquilibriumClass) -> &'static str {
    match c {
        EquilibriumClass::NotNash => "NotNash",
        EquilibriumClass::Strong => "Strong",
        EquilibriumClass::SuperStrong => "SuperStrong",
    }
}

fn verify(ctx: &Ctx) -> Result<Report, Failure> {
    let g = ctx.game("verify")?;
    let p = file_profile(ctx, &g)?.ok_or_else(|| Failure::Input("`verify` needs a profile".into()))?;
    let out = game::evaluate(&g, &p, ctx.tol).map_err(|e| Failure::Input(e.0))?;
    let c = game::classify_equilibrium(&g, &p, ctx.tol).map_err(|e| Failure::Input(e.0))?;
    let notes: Vec<String> = if c.class == EquilibriumClass::NotNash {
        Vec::new()
    } else {
        c.plateau_resources.iter().map(|j| format!("h_{} is a plateau height", j + 1)).collect()
    };
    let mut text = format!("nash: {}\nclassification: {}\n", c.class != EquilibriumClass::NotNash, class_name(c.class));
    let _ = writeln!(text, "loads: ({})\ncosts: ({})", vector_text(&out.loads), vector_text(&out.costs));
    for n in &notes {
        let _ = writeln!(text, "note: {n}");
    }
    Ok(Report::ok(
        json!({
            "command": "verify",
            "nash": c.class != EquilibriumClass::NotNash,
            "classification": class_name(c.class),
            "loads": out.loads,
            "costs": out.costs,
            "plateau_resources": c.plateau_resources.iter().map(|j| j + 1).collect::<Vec<_>>(),
            "notes": notes,
        }),
        text,
    ))
}

fn potential(ctx: &Ctx) -> Result<Report, Failure> {
    let g = ctx.game("potential")?;
    let (p, source) = match file_profile(ctx, &g)? {
        Some(p) => (p, "profile"),
        None => (solver::construct_equilibrium(&g, &ctx.opts())?.equilibrium.unwrap(), "equilibrium"),
    };
    let value = game::potential(&g, &p, ctx.tol).map_err(|e| Failure::Input(e.0))?;
    let out = game::evaluate(&g, &p, ctx.tol).map_err(|e| Failure::Input(e.0))?;
    Ok(Report::ok(
        json!({"command": "potential", "source": source, "potential": value, "loads": out.loads}),
        format!("P* = {value} ({source})\nloads: ({})\n", vector_text(&out.loads)),
    ))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Input(format!("grid '{spec}' must be a:b:steps with a <= b and steps >= 1"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, steps] = parts.as_slice() else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite() && a <= b && a >= 0.0) || steps == 0 {
        return Err(bad());
    }
    Ok((0..=steps).map(|k| if k == steps { b } else { a + (b - a) * k as f64 / steps as f64 }).collect())
}

fn sensitivity(ctx: &Ctx, type_: &str, grid: &str) -> Result<Report, Failure> {
    let g = ctx.game("sensitivity")?;
    let ix: Vec<usize> = type_
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Failure::Input(format!("bad resource '{s}' in --type"))))
        .collect::<Result<_, _>>()?;
    let r = schema::resource_set(&ix, g.n()).map_err(Failure::Input)?;
    let grid = parse_grid(grid)?;
    let rows = solver::sensitivity(&g, r, &grid, &ctx.opts())?;
    let mut text = String::from("mass");
    for j in 0..g.n() {
        let _ = write!(text, "\th_{}", j + 1);
    }
    text.push('\n');
    for (m, h) in &rows {
        let _ = writeln!(text, "{m}\t{}", h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t"));
    }
    Ok(Report::ok(
        json!({
            "command": "sensitivity",
            "type": r.to_one_based(),
            "rows": rows.iter().map(|(m, h)| json!({"mass": m, "heights": h})).collect::<Vec<_>>(),
        }),
        text,
    ))
}

fn satisfy(ctx: &Ctx) -> Result<Report, Failure> {
    ctx.expect(Kind::Distribution, "satisfy")?;
    let dc = ctx.file.distribution.as_ref().unwrap().build().map_err(Failure::Input)?;
    match dc.satisfy(ctx.tol) {
        Ok(w) => {
            let rows: Vec<Value> =
                w.iter().map(|(r, row)| json!({"resources": r.to_one_based(), "consumption": row})).collect();
            let mut text = String::from("satisfiable\n");
            for (r, row) in &w {
                let _ = writeln!(text, "s({r}) = ({})", vector_text(row));
            }
            Ok(Report::ok(json!({"command": "satisfy", "satisfiable": true, "witness": rows}), text))
        }
        Err(DistributionError::NotNormal(v)) => {
            let kind = match v {
                Violation::Lower(_) => "lower",
                Violation::Upper(_) => "upper",
            };
            Ok(Report {
                code: 1,
                json: json!({
                    "command": "satisfy",
                    "satisfiable": false,
                    "violation": {"kind": kind, "set": sets(v.set()), "inequality": v.to_string()},
                }),
                text: format!("not satisfiable: {v}\n"),
            })
        }
        Err(e) => Err(Failure::Precondition(e.to_string())),
    }
}

fn marriage(ctx: &Ctx) -> Result<Report, Failure> {
    ctx.expect(Kind::Marriage, "marriage")?;
    let inst = ctx.file.marriage.as_ref().unwrap().build().map_err(Failure::Input)?;
    let outcome = fractional_marriage(&inst, &ctx.opts()).map_err(|e| match e {
        MarriageError::BadSet(_) => Failure::Input(e.to_string()),
        _ => Failure::Precondition(e.to_string()),
    })?;
    match outcome {
        MarriageOutcome::Perfect(m) => {
            let mut text = String::from("perfect fractional marriage\n");
            matrix_text(&mut text, &m);
            Ok(Report::ok(json!({"command": "marriage", "perfect": true, "matrix": m}), text))
        }
        MarriageOutcome::Violation { women, men } => {
            let i: Vec<usize> = women.iter().map(|i| i + 1).collect();
            Ok(Report {
                code: 1,
                json: json!({"command": "marriage", "perfect": false, "certificate": {"I": i, "RI": men.to_one_based()}}),
                text: format!(
                    "no perfect fractional marriage\nI = {{{}}}\nR^I = {men}\n|I| = {} > |R^I| = {}\n",
                    i.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                    women.len(),
                    men.len()
                ),
            })
        }
    }
}

fn csp(ctx: &Ctx, backend: &str) -> Result<Report, Failure> {
    ctx.expect(Kind::Csp, "csp")?;
    let triple = ctx.file.csp.as_ref().unwrap().build().map_err(Failure::Input)?;
    let reg = SolverRegistry::standard();
    match reg.feasibility_backend(backend)?.solve(&triple, ctx.tol)? {
        Verdict::Feasible(q) => {
            let mut text = String::from("feasible\n");
            matrix_text(&mut text, &q);
            Ok(Report::ok(json!({"command": "csp", "backend": backend, "feasible": true, "matrix": q}), text))
        }
        Verdict::Infeasible(why) => Ok(Report {
            code: 1,
            text: match &why {
                Some(w) => format!("infeasible: {w}\n"),
                None => "infeasible\n".into(),
            },
            json: json!({"command": "csp", "backend": backend, "feasible": false, "stuck": why}),
        }),
    }
}

fn random_start(g: &WeightedGame, seed: u64) -> WeightedProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fractions = g
        .types()
        .iter()
        .map(|t| {
            let w: Vec<f64> =
                (0..g.n()).map(|j| if t.resources.contains(j) { rng.gen_range(1e-3..1.0) } else { 0.0 }).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        })
        .collect();
    WeightedProfile { fractions }
}

fn idsolve(ctx: &Ctx) -> Result<Report, Failure> {
    let g = ctx.weighted("idsolve")?;
    let mut opts = ctx.descent();
    opts.initial = ctx.seed.map(|s| random_start(&g, s));
    let sol = id_weighted::w_solve_strong(&g, &opts)?;
    let mut text = String::new();
    for (j, c) in sol.costs.iter().enumerate() {
        let _ = writeln!(text, "h_{} = {c}", j + 1);
    }
    let _ = writeln!(text, "loads: ({})", vector_text(&sol.loads));
    for (i, row) in sol.profile.fractions.iter().enumerate() {
        let _ = writeln!(text, "s({}) = ({})", i + 1, vector_text(row));
    }
    let _ = writeln!(text, "iterations: {}", sol.iterations);
    let mut doc = json!({
        "command": "idsolve",
        "costs": sol.costs,
        "loads": sol.loads,
        "fractions": sol.profile.fractions,
        "iterations": sol.iterations,
        "plateau_resources": sol.plateau_resources.iter().map(|j| j + 1).collect::<Vec<_>>(),
    });
    if ctx.trace {
        let mut columns = vec!["iteration".to_string(), "ceiling".to_string()];
        columns.extend((1..=g.n()).map(|j| format!("load_{j}")));
        let rows: Vec<Vec<f64>> = sol
            .trace
            .iter()
            .map(|r| [r.iteration as f64, r.ceiling].into_iter().chain(r.loads.iter().copied()).collect())
            .collect();
        let _ = writeln!(text, "# trace\n{}", columns.join("\t"));
        for r in &rows {
            let _ = writeln!(text, "{}", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t"));
        }
        doc["trace"] = json!({"columns": columns, "rows": rows});
    }
    Ok(Report::ok(doc, text))
}

fn idverify(ctx: &Ctx) -> Result<Report, Failure> {
    let g = ctx.weighted("idverify")?;
    let rows = ctx.file.weighted_profile.as_ref().ok_or_else(|| Failure::Input("`idverify` needs a weighted_profile".into()))?;
    let s = schema::weighted_profile(rows);
    let out = id_weighted::w_evaluate(&g, &s, ctx.tol).map_err(|e| Failure::Input(e.0))?;
    let class = id_weighted::w_classify(&g, &s, &ctx.descent())?;
    let name = match class {
        WeightedClass::NotNash => "NotNash",
        WeightedClass::NashCostsMatchStrong => "NashCostsMatchStrong",
        WeightedClass::NashCostsDiffer => "NashCostsDiffer",
    };
    let nash = class != WeightedClass::NotNash;
    Ok(Report::ok(
        json!({"command": "idverify", "nash": nash, "classification": name, "loads": out.loads, "costs": out.costs}),
        format!(
            "nash: {nash}\nclassification: {name}\nloads: ({})\ncosts: ({})\n",
            vector_text(&out.loads),
            vector_text(&out.costs)
        ),
    ))
}

fn load(cli: &Cli) -> Result<Ctx, Failure> {
    let text = match &cli.input {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("cannot read {}: {e}", p.display())))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Input(format!("cannot read input: {e}")))?;
            s
        }
    };
    let file = schema::parse(&text).map_err(Failure::Input)?;
    let settings = file.settings();
    let eps = cli.tolerance.or(settings.tolerance).unwrap_or(Tol::default().eps());
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Failure::Input(format!("tolerance must be positive, got {eps}")));
    }
    Ok(Ctx {
        tol: Tol(eps),
        max_n: cli.max_n.or(settings.max_n).unwrap_or(DEFAULT_MAX_N),
        seed: cli.seed.or(settings.seed),
        trace: cli.trace,
        file,
    })
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let ctx = load(cli)?;
    match &cli.command {
        Command::Heights { solver } => heights(&ctx, solver),
        Command::Equilibrium => equilibrium(&ctx),
        Command::Verify => verify(&ctx),
        Command::Potential => potential(&ctx),
        Command::Sensitivity { type_, grid } => sensitivity(&ctx, type_, grid),
        Command::Satisfy => satisfy(&ctx),
        Command::Marriage => marriage(&ctx),
        Command::Csp { backend } => csp(&ctx, backend),
        Command::Idsolve => idsolve(&ctx),
        Command::Idverify => idverify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {}", f.message());
            return ExitCode::from(f.code());
        }
    };
    let body = match cli.format {
        Format::Json => serde_json::to_string_pretty(&report.json).expect("documents serialize") + "\n",
        Format::Text => report.text,
    };
    let written = match &cli.output {
        Some(p) => std::fs::write(p, body).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(report.code)
}
