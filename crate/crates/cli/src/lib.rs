//! Scriptable runs of enumeration, coproducts, Birkhoff decomposition,
//! Z-factors and the Hadamard numerics.

pub mod cache;
pub mod config;

use cache::Cache;
use ckren::birkhoff::{generators, BirkhoffError, Birkhoff, Character, Part, Scheme, SymbolicRules};
use ckren::graph::{builtin, enumerate_1pi, unlabeled_form, EnumOptions, FeynmanGraph, GraphError, Residue, Theory};
use ckren::hadamard::{self as hd, HadamardError, Hp, PowerLog, RadialTestFunction};
use ckren::hopf::{display_name, GraphPolynomial, Hopf, HopfError, TensorPolynomial};
use ckren::pfalg::{DegreeConvention, PFElement, DEFAULT_TRUNCATION};
use clap::{Parser, Subcommand};
use config::{Format, RunConfig};
use num::{BigRational, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("resource bound: {0}")]
    Bound(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Bound(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::LoopBound { .. } | GraphError::TooLarge(_) => CliError::Bound(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<HopfError> for CliError {
    fn from(e: HopfError) -> Self {
        match e {
            HopfError::Graph(g) => g.into(),
            HopfError::LoopBound { .. } => CliError::Bound(e.to_string()),
            HopfError::NotAugmentation(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<BirkhoffError> for CliError {
    fn from(e: BirkhoffError) -> Self {
        match e {
            BirkhoffError::Hopf(h) => h.into(),
            BirkhoffError::Graph(g) => g.into(),
            BirkhoffError::NonIntegralCounts { .. } => CliError::Input(e.to_string()),
        }
    }
}

impl From<HadamardError> for CliError {
    fn from(e: HadamardError) -> Self {
        match e {
            HadamardError::NoConvergence { .. } => CliError::Verification(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ckren", version, about = "Position-space renormalization of scalar Feynman graphs")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (overrides CKREN_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Cache directory (overrides CKREN_CACHE_DIR)
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Disable the enumeration cache
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Largest loop number any command may touch
    #[arg(long, global = true)]
    pub loop_bound: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List 1PI classes of a residue with weights and power counting
    Graphs {
        /// prop or vert
        residue: String,
        loops: u32,
    },
    /// Full and reduced coproduct of a builtin graph or a graph JSON file
    Coproduct {
        /// Builtin name (see --list) or path to a graph JSON file
        graph: Option<String>,
        /// Print the builtin names
        #[arg(long)]
        list: bool,
    },
    /// Φ, Φ̄, Φ⁻ and Φ⁺ of X^r_L and the multiplicative renormalization check
    Birkhoff { residue: String, loops: u32 },
    /// Z-factor series to the given loop order
    Zfactors { max_loops: u32 },
    /// Hadamard finite-part numerics
    Hadamard {
        #[command(subcommand)]
        which: HadamardCommand,
    },
    /// Print the effective configuration
    Config,
}

#[derive(Subcommand, Debug)]
pub enum HadamardCommand {
    /// θ_{a,m,j} and pf(I_{a,m}) for a ∈ [−3,3], m ∈ [0,3]
    Theta,
    /// Closed form against quadrature of I_{a,m}(ε)
    Sweep,
    /// Expansion coefficients against fits, and both finite-part formulas
    Expansion,
    /// Counterterm structure of the one-loop bubble in d = 6
    Bubble {
        /// Write the (ε, pairing) samples as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scaling degrees of r⁻⁴ and the bubble amplitude r⁻⁸ in d = 6
    Scaling,
}

/// Rendered command output in both formats.
pub struct Output {
    pub text: String,
    pub json: Value,
}

pub fn effective_config(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(env)?;
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(d) = &cli.cache_dir {
        cfg.cache.dir = Some(d.clone());
    }
    if cli.no_cache {
        cfg.cache.dir = None;
    }
    if let Some(b) = cli.loop_bound {
        cfg.bounds.loop_bound = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<String, CliError> {
    let cfg = effective_config(cli, env)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Input(e.to_string()))?;
    let out = pool.install(|| dispatch(&cli.command, &cfg))?;
    Ok(match cfg.output.format {
        Format::Text => out.text,
        Format::Json => serde_json::to_string_pretty(&out.json).expect("json") + "\n",
    })
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match cmd {
        Command::Graphs { residue, loops } => cmd_graphs(cfg, &parse_residue(residue)?, *loops),
        Command::Coproduct { list: true, .. } => Ok(Output {
            text: builtin::NAMES.iter().map(|n| format!("{n}\n")).collect(),
            json: json!({"schema": "ckren.builtins/1", "names": builtin::NAMES}),
        }),
        Command::Coproduct { graph: Some(g), .. } => cmd_coproduct(cfg, g),
        Command::Coproduct { graph: None, .. } => Err(CliError::Input("coproduct needs a graph name or file".into())),
        Command::Birkhoff { residue, loops } => cmd_birkhoff(cfg, parse_residue(residue)?, *loops),
        Command::Zfactors { max_loops } => cmd_zfactors(cfg, *max_loops),
        Command::Hadamard { which } => match which {
            HadamardCommand::Theta => cmd_theta(),
            HadamardCommand::Sweep => cmd_sweep(cfg),
            HadamardCommand::Expansion => cmd_expansion(cfg),
            HadamardCommand::Bubble { csv } => cmd_bubble(csv.as_deref()),
            HadamardCommand::Scaling => cmd_scaling(cfg),
        },
        Command::Config => Ok(Output { text: cfg.to_toml(), json: serde_json::to_value(cfg).expect("json") }),
    }
}

fn parse_residue(s: &str) -> Result<Residue, CliError> {
    s.parse().map_err(|_| CliError::Input(format!("unknown residue `{s}` (expected prop or vert)")))
}

fn theory(cfg: &RunConfig) -> Result<Theory, CliError> {
    Ok(Theory::new(cfg.theory.m, cfg.theory.d)?)
}

fn check_loops(cfg: &RunConfig, loops: u32) -> Result<(), CliError> {
    if loops > cfg.bounds.loop_bound {
        return Err(CliError::Bound(format!("{loops} loops exceeds the loop bound {}", cfg.bounds.loop_bound)));
    }
    Ok(())
}

/// Printed expansions stop at the configured order; the engine itself keeps
/// the default order.
fn truncate(cfg: &RunConfig, f: &PFElement) -> Result<PFElement, CliError> {
    if cfg.bounds.truncation_order > DEFAULT_TRUNCATION {
        return Err(CliError::Bound(format!(
            "truncation order {} exceeds the supported {DEFAULT_TRUNCATION}",
            cfg.bounds.truncation_order
        )));
    }
    Ok(f.clone().with_truncation(cfg.bounds.truncation_order))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub name: String,
    pub key: String,
    pub weight: String,
    pub automorphisms: u64,
    pub sdd: i64,
}

pub const GRAPHS_SCHEMA: &str = "ckren.graphs/1";

pub fn enumerate_records(cfg: &RunConfig, r: Residue, loops: u32) -> Result<Vec<GraphRecord>, CliError> {
    check_loops(cfg, loops)?;
    let t = theory(cfg)?;
    if loops == 0 {
        return Ok(vec![]);
    }
    let n = r.n_ext(t);
    let cache = Cache::new(cfg.cache.dir.clone());
    let key = format!("{GRAPHS_SCHEMA}|m={}|d={}|n={n}|L={loops}|v={}", t.m, t.d, env!("CARGO_PKG_VERSION"));
    if let Some(hit) = cache.get::<Vec<GraphRecord>>(&key) {
        return Ok(hit);
    }
    let opts = EnumOptions { loop_bound: cfg.bounds.loop_bound, ..Default::default() };
    let mut recs = Vec::new();
    for c in enumerate_1pi(t, n, loops, &opts)? {
        recs.push(GraphRecord {
            name: display_name(&unlabeled_form(&c.graph)),
            key: c.key.as_str().to_string(),
            weight: c.weight.to_string(),
            automorphisms: c.automorphisms,
            sdd: c.graph.sdd()?,
        });
    }
    cache.put(&key, &recs);
    Ok(recs)
}

fn cmd_graphs(cfg: &RunConfig, r: &Residue, loops: u32) -> Result<Output, CliError> {
    let recs = enumerate_records(cfg, *r, loops)?;
    let total = recs.iter().fold(BigRational::zero(), |a, g| a + g.weight.parse::<BigRational>().expect("rational"));
    let mut text = format!("{r} at {loops} loops: {} classes, total weight {total}\n", recs.len());
    for g in &recs {
        let _ = writeln!(text, "  {:>5}  sdd {:>2}  |Aut| {}  {}  {}", g.weight, g.sdd, g.automorphisms, g.name, g.key);
    }
    let json = json!({
        "schema": GRAPHS_SCHEMA,
        "theory": {"m": cfg.theory.m, "d": cfg.theory.d},
        "residue": r.name(),
        "loops": loops,
        "total_weight": total.to_string(),
        "classes": recs,
    });
    Ok(Output { text, json })
}

fn load_graph(t: Theory, source: &str) -> Result<(String, FeynmanGraph), CliError> {
    if let Some(g) = builtin::by_name(source) {
        return Ok((source.to_string(), g));
    }
    let s = std::fs::read_to_string(source)
        .map_err(|e| CliError::Input(format!("`{source}` is neither a builtin name nor a readable file: {e}")))?;
    let g = FeynmanGraph::from_json(&s)?;
    g.validate()?;
    if g.theory != t {
        return Err(CliError::Input(format!("graph theory (m={}, d={}) differs from the configured one", g.theory.m, g.theory.d)));
    }
    Ok((source.to_string(), g))
}

fn tensor_json(t: &TensorPolynomial) -> Value {
    let terms: Vec<Value> = t
        .terms()
        .map(|(k, c)| json!({"coefficient": c.to_string(), "left": k.left.to_string(), "right": k.right.to_string(), "pattern": k.pattern}))
        .collect();
    json!({"rendered": t.to_string(), "terms": terms})
}

fn cmd_coproduct(cfg: &RunConfig, source: &str) -> Result<Output, CliError> {
    let t = theory(cfg)?;
    let (name, g) = load_graph(t, source)?;
    check_loops(cfg, g.loop_number() as u32)?;
    let hopf = Hopf::new(t, cfg.bounds.loop_bound);
    let x = GraphPolynomial::graph(&g);
    let full = hopf.coproduct(&x)?;
    let reduced = hopf.reduced_coproduct(&x)?;
    let text = format!("graph: {name}\nas polynomial: {x}\ncoproduct: {full}\nreduced: {reduced}\n");
    let json = json!({
        "schema": "ckren.coproduct/1",
        "graph": name,
        "polynomial": x.to_string(),
        "coproduct": tensor_json(&full),
        "reduced": tensor_json(&reduced),
    });
    Ok(Output { text, json })
}

fn cmd_birkhoff(cfg: &RunConfig, r: Residue, loops: u32) -> Result<Output, CliError> {
    check_loops(cfg, loops)?;
    let t = theory(cfg)?;
    let hopf = Hopf::new(t, cfg.bounds.loop_bound);
    let phi = SymbolicRules::new(t);
    let b = Birkhoff::new(&hopf, &phi, Scheme::default());
    let x = hopf.greens_function(r, loops)?;
    let mut parts = serde_json::Map::new();
    let mut text = format!("X^{r}_{loops} = {x}\n");
    for (label, part) in [("phi", None), ("bar", Some(Part::Bar)), ("minus", Some(Part::Minus)), ("plus", Some(Part::Plus))] {
        let v = match part {
            None => phi.eval(&x)?,
            Some(p) => b.character(p).eval(&x)?,
        };
        let v = truncate(cfg, &v)?;
        let _ = writeln!(text, "{label}: {}", one_line(&v.to_string()));
        parts.insert(label.into(), Value::String(v.to_string()));
    }
    let plus = b.character(Part::Plus).eval(&x)?;
    if !plus.singular_part(DegreeConvention::Corrected).is_zero() {
        return Err(CliError::Verification(format!("Φ⁺(X^{r}_{loops}) has singular terms")));
    }
    let mut ledgers = Vec::new();
    for k in generators(&x) {
        ledgers.push(b.ledger(&k)?);
    }
    let report = b.verify_multiplicative_renormalization(r, loops)?;
    let _ = writeln!(text, "multiplicative renormalization: {}", if report.equal { "holds" } else { "FAILS" });
    for l in &ledgers {
        let _ = writeln!(text, "\n[{}] loops {}\n  phi:   {}\n  bar:   {}\n  minus: {}\n  plus:  {}", l.name, l.loops, one_line(&l.phi), one_line(&l.bar), one_line(&l.minus), one_line(&l.plus));
    }
    if !report.equal {
        return Err(CliError::Verification(format!("Φ^R(X^{r})|_{loops} differs from Φ⁺(X^{r}_{loops})")));
    }
    let json = json!({
        "schema": "ckren.birkhoff/1",
        "residue": r.name(),
        "loops": loops,
        "greens_function": x.to_string(),
        "values": parts,
        "multiplicative_renormalization": report.equal,
        "graphs": ledgers,
    });
    Ok(Output { text, json })
}

fn one_line(s: &str) -> String {
    s.lines().collect::<Vec<_>>().join(" ; ")
}

fn cmd_zfactors(cfg: &RunConfig, max: u32) -> Result<Output, CliError> {
    check_loops(cfg, max)?;
    let t = theory(cfg)?;
    let hopf = Hopf::new(t, cfg.bounds.loop_bound);
    let phi = SymbolicRules::new(t);
    let b = Birkhoff::new(&hopf, &phi, Scheme::default());
    let zp = b.z_factor(Residue::Prop, max)?;
    let zv = b.z_factor(Residue::Vert, max)?;
    let kin = zp.inverse();
    let int = zv.series();
    let mut text = String::new();
    let mut series = serde_json::Map::new();
    for (name, s) in [("Z_Kin", &kin), ("Z_Int", &int)] {
        let mut grades = Vec::new();
        for l in 0..=max {
            let c = truncate(cfg, &s.grade(l))?;
            let _ = writeln!(text, "{name}[{l}] = {}", one_line(&c.to_string()));
            grades.push(Value::String(c.to_string()));
        }
        series.insert(name.into(), Value::Array(grades));
    }
    for z in [&zp, &zv] {
        let one = z.series().mul(&z.inverse(), max);
        if !one.aligned_eq(&ckren::birkhoff::LoopSeries::one(), max) {
            return Err(CliError::Verification(format!("Z·Z⁻¹ ≠ 1 for {}", z.residue)));
        }
    }
    let _ = writeln!(text, "Z·Z⁻¹ = 1 through {max} loops");
    Ok(Output { text, json: json!({"schema": "ckren.zfactors/1", "max_loops": max, "series": series}) })
}

fn cmd_theta() -> Result<Output, CliError> {
    let mut text = String::from("a  m  pf(I)  θ_{a,m,0..m+1}\n");
    let mut rows = Vec::new();
    for a in -3i64..=3 {
        for m in 0u32..=3 {
            let th: Vec<String> = (0..=m + 1).map(|j| hd::theta(a, m, j).map(|q| q.to_string())).collect::<Result<_, _>>()?;
            let pf = hd::pf_integral(a, m).to_string();
            let _ = writeln!(text, "{a:>2} {m}  {pf}  [{}]", th.join(", "));
            rows.push(json!({"a": a, "m": m, "pf": pf, "theta": th}));
        }
    }
    Ok(Output { text, json: json!({"schema": "ckren.theta/1", "rows": rows}) })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let tol = Hp::parse("1e-20");
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for a in -3i64..=3 {
        for m in 0u32..=3 {
            for e in ["1e-1", "1e-2", "1e-3"] {
                let eh = Hp::parse(e);
                let c = hd::i_closed(a, m, &eh)?;
                let q = hd::i_quadrature(a, m, &eh, &tol)?;
                let d = (&c - &q).abs().to_f64();
                worst = worst.max(d);
                rows.push(json!({"a": a, "m": m, "eps": e, "closed": c.to_f64(), "difference": format!("{d:.3e}")}));
            }
        }
    }
    let text = format!("I_{{a,m}}(ε), a ∈ [−3,3], m ∈ [0,3], ε ∈ {{1e-1,1e-2,1e-3}}: max |closed − quadrature| = {worst:.3e} (tolerance {:e})\n", cfg.tolerances.closed_form);
    if worst > cfg.tolerances.closed_form {
        return Err(CliError::Verification(text));
    }
    Ok(Output { text, json: json!({"schema": "ckren.sweep/1", "max_difference": format!("{worst:.3e}"), "rows": rows}) })
}

fn standard_bump() -> RadialTestFunction {
    RadialTestFunction::Bump { rho: 1.5 }
}

/// Largest deviation between expansion coefficients and a least-squares fit
/// of H_{−2,0,ε} samples, and between the two finite-part formulas.
pub fn expansion_deviations() -> Result<(f64, f64), CliError> {
    let f = standard_bump();
    let ex = hd::h_expansion(-2, 0, &f, 6)?;
    let s = hd::sample(&hd::geometric_grid(3, 20), |e| hd::h_quadrature(-2, 0, e, &f))?;
    let fit = hd::fit_expansion(&s, &[(-2, 0), (-1, 0), (0, 1), (0, 0), (1, 0), (2, 0), (3, 0)])?;
    let pairs = [((-2, 0), ex.coefficient(0, 0)), ((-1, 0), ex.coefficient(1, 0)), ((0, 1), ex.coefficient(2, 1)), ((0, 0), ex.finite_part)];
    let fit_dev = pairs.iter().map(|&((e, j), c)| (fit.coefficient(e, j).expect("in basis") - c).abs()).fold(0.0, f64::max);
    let mut fp_dev: f64 = 0.0;
    for a in -3..=2 {
        for m in 0..=2 {
            let c1 = hd::h_expansion(a, m, &f, 4)?.finite_part;
            let c2 = hd::finite_part_continuation(a, m, &f, 0.5)?;
            fp_dev = fp_dev.max((c1 - c2).abs());
        }
    }
    Ok((fit_dev, fp_dev))
}

fn cmd_expansion(cfg: &RunConfig) -> Result<Output, CliError> {
    let (fit_dev, fp_dev) = expansion_deviations()?;
    let text = format!(
        "H_{{-2,0,ε}}(bump): max |expansion − fit| = {fit_dev:.3e} (tolerance {:e})\nfinite parts, a ∈ [−3,2], m ∈ [0,2]: max |Taylor subtraction − continuation| = {fp_dev:.3e} (tolerance {:e})\n",
        cfg.tolerances.expansion_fit, cfg.tolerances.finite_part
    );
    if fit_dev > cfg.tolerances.expansion_fit || fp_dev > cfg.tolerances.finite_part {
        return Err(CliError::Verification(text));
    }
    Ok(Output { text, json: json!({"schema": "ckren.expansion/1", "fit_deviation": format!("{fit_dev:.3e}"), "finite_part_deviation": format!("{fp_dev:.3e}")}) })
}

fn cmd_bubble(csv: Option<&std::path::Path>) -> Result<Output, CliError> {
    let f = standard_bump();
    let r = hd::bubble_counterterm_demo(6, &f)?;
    if let Some(p) = csv {
        let s = hd::sample(&hd::geometric_grid(3, 16), |e| Ok(r.angular_factor * hd::h_quadrature(-2, 0, e, &f)?))?;
        std::fs::write(p, hd::samples_csv(&s)).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }
    let text = format!(
        "⟨(1−χ_ε) r⁻⁸, φ⟩ in d = 6, angular factor {:.12}\n  ε⁻²: {:.10e}\n  ε⁻¹: {:.10e}\n  log ε: {:.10e}\n  const: {:.10e}\n  smooth cutoff log ε: {:.10e}\n  subtracted pairing at smallest ε: {:.10e}\n",
        r.angular_factor,
        r.pole2,
        r.pole1,
        r.log,
        r.constant,
        r.smooth_fit.coefficient(0, 1).unwrap_or(f64::NAN),
        r.subtracted.last().map(|s| s.1).unwrap_or(f64::NAN)
    );
    if r.pole2 == 0.0 || r.pole1.abs() > 1e-8 {
        return Err(CliError::Verification(text));
    }
    let mut json = serde_json::to_value(&r).expect("json");
    json["schema"] = Value::String("ckren.bubble/1".into());
    Ok(Output { text, json })
}

fn cmd_scaling(cfg: &RunConfig) -> Result<Output, CliError> {
    let d = cfg.theory.d;
    let mut text = String::new();
    let mut rows = Vec::new();
    let mut ok = true;
    // the bubble has two vertices; r⁻⁴ is a single propagator
    for (label, u, expect, vertices) in [("r^-4", -4.0, 4.0, None), ("bubble r^-8", -8.0, 8.0, Some(2))] {
        let sd = hd::scaling_degree_estimate(PowerLog { alpha: u, log_power: 0 }, d)?.sd;
        ok &= (sd - expect).abs() <= cfg.tolerances.scaling_degree;
        let _ = write!(text, "{label}: SD = {sd:.6}");
        let mut row = json!({"u": label, "sd": format!("{sd:.6}")});
        if let Some(v) = vertices {
            let sdd = hd::sdd_from_scaling_degree(sd, d, v);
            let _ = write!(text, ", SD − d(V−1) = {sdd:.6}");
            row["sdd"] = Value::String(format!("{sdd:.6}"));
        }
        text.push('\n');
        rows.push(row);
    }
    if !ok {
        return Err(CliError::Verification(text));
    }
    Ok(Output { text, json: json!({"schema": "ckren.scaling/1", "rows": rows}) })
}

