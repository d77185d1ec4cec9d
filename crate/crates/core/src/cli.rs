//! Batch experiment driver behind the `richop` binary.
//!
//! Every command reads one JSON [`ExperimentConfig`] and writes CSV tables
//! into the output directory. Each table starts with a `#` timestamp line and
//! carries the config hash in its last column; everything else is a pure
//! function of the config and seed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coeff::{sample_family, CoefficientField, DataFamily, FamilyKind, Mode};
use crate::encoder::{Encoder, EncoderKind};
use crate::fem::{FemSpace, Problem, ProblemConfig};
use crate::mesh::{refine_corner_graded, triangulate, write_mesh, Mesh, Polygon};
use crate::pipeline::NeuralOperator;
use crate::reduced_basis::{delta_curve, delta_table, weak_greedy, GreedyTrace, ReducedBasis, SnapshotSet};
use crate::relu_net::{build_phi_it, build_phi_step, vec_matrix, IteratorSpec};
use crate::richardson::{contraction_norm, history_table, iterate, ReducedOperator};
use crate::table::{num, Table};
use crate::{Error, Result};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_BUILD: u8 = 2;
pub const EXIT_CERTIFICATE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Square,
    Lshape,
    Polygon { vertices: Vec<[f64; 2]> },
}

impl DomainSpec {
    pub fn polygon(&self) -> Result<Polygon> {
        match self {
            DomainSpec::Square => Ok(Polygon::unit_square()),
            DomainSpec::Lshape => Ok(Polygon::l_shape()),
            DomainSpec::Polygon { vertices } => Polygon::new(vertices.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingSpec {
    pub grading: f64,
    pub levels: usize,
}

/// Either `n` (structured `n x n` grid, square only) or a target diameter `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub grading: Option<GradingSpec>,
}

impl MeshSpec {
    pub fn build(&self, domain: &DomainSpec) -> Result<Mesh> {
        let polygon = domain.polygon()?;
        let base = match (self.n, self.h, domain) {
            (Some(n), None, DomainSpec::Square) => Mesh::unit_square(n)?,
            (Some(_), None, _) => {
                return Err(Error::InvalidInput("mesh.n is only available on the square; use mesh.h".into()))
            }
            (None, Some(h), _) => triangulate(&polygon, h)?,
            _ => return Err(Error::InvalidInput("give exactly one of mesh.n and mesh.h".into())),
        };
        match self.grading {
            Some(g) => refine_corner_graded(&base, &polygon.reentrant_corners(), g.grading, g.levels),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant { value: f64 },
    /// `offset + sum_k weights_k * modes_k`.
    Modes { offset: f64, modes: Vec<Mode>, weights: Vec<f64> },
}

impl SourceSpec {
    pub fn field(&self) -> Result<CoefficientField> {
        match self {
            SourceSpec::Constant { value } => Ok(CoefficientField::Constant(*value)),
            SourceSpec::Modes { offset, modes, weights } => {
                if modes.len() != weights.len() {
                    return Err(Error::InvalidInput("source modes and weights differ in length".into()));
                }
                let (offset, terms) = (*offset, modes.iter().copied().zip(weights.iter().copied()).collect::<Vec<_>>());
                Ok(CoefficientField::from_fn("source", move |x| {
                    offset + terms.iter().map(|(m, w)| w * m.eval(x)).sum::<f64>()
                }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    #[serde(flatten)]
    pub kind: EncoderKind,
    pub mesh: MeshSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
}

fn one() -> f64 {
    1.0
}
fn default_degree() -> usize {
    1
}
fn default_test_count() -> usize {
    20
}
fn default_grid() -> usize {
    40
}
fn default_iterations() -> usize {
    30
}
fn default_samples() -> usize {
    200
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainSpec,
    pub mesh: MeshSpec,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Constant nominal coefficient.
    #[serde(default = "one")]
    pub a0: f64,
    pub source: SourceSpec,
    pub family: FamilyKind,
    pub encoder: EncoderSpec,
    pub training_count: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub gamma: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    /// Lattice resolution of membership checks.
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    /// Richardson steps in the convergence table.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_samples")]
    pub nncheck_samples: usize,
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default)]
    pub sweep: SweepSpec,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.beta < self.alpha) {
            return Err(Error::InvalidInput(format!(
                "need 0 < beta < alpha, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if !(self.a0 > 0.0) {
            return Err(Error::InvalidInput(format!("a0 must be positive, got {}", self.a0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if self.sweep.epsilon.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::InvalidInput("sweep epsilons must lie in (0,1)".into()));
        }
        if self.training_count == 0 || self.n > self.training_count {
            return Err(Error::InvalidInput(format!(
                "need 1 <= training_count and N <= training_count, got N = {}, training_count = {}",
                self.n, self.training_count
            )));
        }
        if self.sweep.n.iter().any(|&n| n > self.training_count) {
            return Err(Error::InvalidInput("sweep N exceeds training_count".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma must lie in (0,1], got {}", self.gamma)));
        }
        if self.test_count == 0 {
            return Err(Error::InvalidInput("test_count must be >= 1".into()));
        }
        DataFamily::new(self.family.clone(), self.alpha, self.beta)?;
        self.domain.polygon()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configs serialize");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Parser)]
#[command(name = "richop", version, about = "Neural operators for -div(a grad u) = f built from unrolled Richardson iterations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "RICHOP_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BundleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Operator bundle; defaults to `<out>/bundle`.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write the mesh and its statistics.
    Mesh(CommonArgs),
    /// Solve for the training snapshots.
    Snapshots(CommonArgs),
    /// Run the weak greedy and the delta curve.
    Greedy(CommonArgs),
    /// Build the operator and write its bundle.
    Build(CommonArgs),
    /// Evaluate a stored operator on test coefficients.
    Eval(BundleArgs),
    /// Depth and size over the sweep axes.
    Sweep(CommonArgs),
    /// Monte-Carlo check of the network certificates.
    Nncheck(CommonArgs),
    /// Error decomposition of a stored operator.
    Decompose(BundleArgs),
    /// Everything, in order.
    Run(CommonArgs),
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: format!("config error: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Certificate(_) => EXIT_CERTIFICATE,
            _ => EXIT_BUILD,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    ExitCode::from(run_with_args(args))
}

/// Parses `args` (program name first), runs the command and returns its exit code.
pub fn run_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("richop: {}", f.message);
            f.code
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
    domain: Polygon,
    family: DataFamily,
    problem: Arc<Problem>,
}

impl Context {
    fn new(args: &CommonArgs) -> std::result::Result<Self, Failure> {
        let text = fs::read_to_string(&args.config)
            .map_err(|e| Failure::config(format!("{}: {e}", args.config.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text).map_err(Failure::config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(t) = args.threads {
            // A second call fails harmlessly when the pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        let domain = cfg.domain.polygon().map_err(Failure::config)?;
        let family = DataFamily::new(cfg.family.clone(), cfg.alpha, cfg.beta).map_err(Failure::config)?;
        let mesh = cfg.mesh.build(&cfg.domain).map_err(Failure::config)?;
        let space = Arc::new(FemSpace::new(Arc::new(mesh), cfg.degree).map_err(Failure::config)?);
        let pc = ProblemConfig::new(
            cfg.alpha,
            cfg.beta,
            CoefficientField::Constant(cfg.a0),
            cfg.source.field().map_err(Failure::config)?,
        )
        .map_err(Failure::config)?;
        let problem = Arc::new(Problem::normalized(space, pc)?);
        fs::create_dir_all(&args.out).map_err(Error::from)?;
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            out: args.out.clone(),
            domain,
            family,
            problem,
        })
    }

    fn write(&self, name: &str, table: &Table) -> Result<()> {
        table.write(BufWriter::new(File::create(self.out.join(name))?), Some(&self.hash))
    }

    fn encoder(&self) -> Result<Arc<Encoder>> {
        let mesh = Arc::new(self.cfg.encoder.mesh.build(&self.cfg.domain)?);
        Ok(Arc::new(match self.cfg.encoder.kind {
            EncoderKind::Nodal { degree } => Encoder::nodal_on_mesh(mesh, degree)?,
            EncoderKind::Gll { p } => Encoder::gll(mesh, p)?,
        }))
    }

    fn training(&self) -> Result<SnapshotSet> {
        let fields = sample_family(&self.family, &self.domain, self.cfg.training_count, self.cfg.seed, self.cfg.grid_n)?;
        SnapshotSet::from_fields(&self.problem, fields)
    }

    /// Test coefficients, drawn from a seed stream disjoint from training.
    fn test_fields(&self, count: usize) -> Result<Vec<CoefficientField>> {
        sample_family(
            &self.family,
            &self.domain,
            count,
            self.cfg.seed.wrapping_add(0x9e37_79b9),
            self.cfg.grid_n,
        )
    }

    fn greedy(&self, snapshots: &SnapshotSet, n: usize) -> Result<(ReducedBasis, GreedyTrace)> {
        weak_greedy(&self.problem, snapshots, n, self.cfg.gamma)
    }

    fn bundle_dir(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join("bundle"))
    }
}

fn execute(command: &Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Mesh(a) => cmd_mesh(&Context::new(a)?),
        Command::Snapshots(a) => {
            let ctx = Context::new(a)?;
            cmd_snapshots(&ctx, &ctx.training()?)
        }
        Command::Greedy(a) => {
            let ctx = Context::new(a)?;
            cmd_greedy(&ctx, &ctx.training()?).map(|_| ())
        }
        Command::Build(a) => {
            let ctx = Context::new(a)?;
            let snaps = ctx.training()?;
            let (basis, _) = ctx.greedy(&snaps, ctx.cfg.n)?;
            cmd_build(&ctx, basis, &snaps).map(|_| ())
        }
        Command::Eval(a) => {
            let ctx = Context::new(&a.common)?;
            let op = NeuralOperator::read_bundle(&ctx.bundle_dir(&a.bundle), ctx.problem.clone())?;
            cmd_eval(&ctx, &op)
        }
        Command::Sweep(a) => cmd_sweep(&Context::new(a)?),
        Command::Nncheck(a) => {
            let ctx = Context::new(a)?;
            let snaps = ctx.training()?;
            let (basis, _) = ctx.greedy(&snaps, ctx.cfg.n)?;
            let op = NeuralOperator::assemble(ctx.problem.clone(), basis, ctx.encoder()?, &snaps.coefficients, ctx.cfg.epsilon)?;
            cmd_nncheck(&ctx, &op)
        }
        Command::Decompose(a) => {
            let ctx = Context::new(&a.common)?;
            let op = NeuralOperator::read_bundle(&ctx.bundle_dir(&a.bundle), ctx.problem.clone())?;
            cmd_decompose(&ctx, &op)
        }
        Command::Run(a) => {
            let ctx = Context::new(a)?;
            cmd_mesh(&ctx)?;
            let snaps = ctx.training()?;
            cmd_snapshots(&ctx, &snaps)?;
            let basis = cmd_greedy(&ctx, &snaps)?;
            cmd_richardson(&ctx, &basis)?;
            let op = cmd_build(&ctx, basis, &snaps)?;
            cmd_eval(&ctx, &op)?;
            if !ctx.cfg.sweep.epsilon.is_empty() || !ctx.cfg.sweep.n.is_empty() {
                cmd_sweep(&ctx)?;
            }
            cmd_decompose(&ctx, &op)?;
            cmd_nncheck(&ctx, &op)
        }
    }
}

fn cmd_mesh(ctx: &Context) -> std::result::Result<(), Failure> {
    let space = ctx.problem.space();
    let mesh = space.mesh();
    write_mesh(mesh, BufWriter::new(File::create(ctx.out.join("mesh.txt")).map_err(Error::from)?))?;
    let mut t = Table::new(&["nodes", "triangles", "degree", "free_dofs", "h_max", "h_min", "area"]);
    t.push(vec![
        mesh.num_nodes().to_string(),
        mesh.num_triangles().to_string(),
        space.degree().to_string(),
        space.num_free().to_string(),
        num(mesh.max_diameter()),
        num(mesh.min_diameter()),
        num(mesh.area()),
    ]);
    ctx.write("mesh.csv", &t)?;
    Ok(())
}

fn cmd_snapshots(ctx: &Context, snaps: &SnapshotSet) -> std::result::Result<(), Failure> {
    let p = &ctx.problem;
    let bound = p.dual_norm_of_load()? / (p.alpha() - p.beta());
    let mut t = Table::new(&["index", "energy_norm", "a_priori_bound"]);
    for (i, u) in snaps.solutions.iter().enumerate() {
        t.push(vec![i.to_string(), num(p.energy_norm(u)), num(bound)]);
    }
    ctx.write("snapshots.csv", &t)?;
    Ok(())
}

fn cmd_greedy(ctx: &Context, snaps: &SnapshotSet) -> std::result::Result<ReducedBasis, Failure> {
    let (basis, trace) = ctx.greedy(snaps, ctx.cfg.n)?;
    ctx.write("greedy.csv", &trace.table(ctx.cfg.record_timings))?;
    let test = SnapshotSet::from_fields(&ctx.problem, ctx.test_fields(ctx.cfg.test_count)?)?;
    ctx.write("delta.csv", &delta_table(&delta_curve(&basis, &test.solutions)))?;
    Ok(basis)
}

/// Contraction factors and the convergence history of the reduced iteration.
fn cmd_richardson(ctx: &Context, basis: &ReducedBasis) -> std::result::Result<(), Failure> {
    let p = &ctx.problem;
    let red = ReducedOperator::new(p, basis.ortho())?;
    let q = p.beta() / p.alpha();
    let test = ctx.test_fields(ctx.cfg.test_count)?;
    let mut t = Table::new(&["index", "contraction", "bound", "pass"]);
    let mut worst: f64 = 0.0;
    for (i, a) in test.iter().enumerate() {
        let s = contraction_norm(&red.system(p, a)?.a_v)?;
        worst = worst.max(s);
        t.push(vec![i.to_string(), num(s), num(q), (s <= q + 1e-10).to_string()]);
    }
    ctx.write("contraction.csv", &t)?;
    let sys = red.system(p, &test[0])?;
    let direct = sys.direct_solve()?;
    let state = iterate(&sys, ctx.cfg.iterations);
    // Coordinates are energy-orthonormal, so the Gram matrix is the identity.
    let gram = DMatrix::identity(basis.size(), basis.size());
    ctx.write("convergence.csv", &history_table(&state, &gram, &direct))?;
    if worst > q + 1e-10 {
        return Err(Error::Certificate(format!("contraction {worst} exceeds beta/alpha = {q}")).into());
    }
    Ok(())
}

fn build_row(op: &NeuralOperator) -> Vec<String> {
    let c = op.certificates();
    let part = |name: &str| {
        c.net
            .parts
            .iter()
            .find(|(n, _)| n == name)
            .map_or(0, |(_, s)| *s)
            .to_string()
    };
    vec![
        c.n.to_string(),
        c.m.to_string(),
        num(c.net.epsilon),
        c.net.k.to_string(),
        num(c.net.eps_it),
        num(c.net.eps_step),
        num(c.net.z_box),
        c.net.sawtooth_levels.to_string(),
        num(c.beta_tilde),
        c.net.depth.to_string(),
        c.net.size.to_string(),
        part("input"),
        part("iterator"),
    ]
}

const BUILD_COLUMNS: [&str; 13] = [
    "N", "M", "epsilon", "K", "eps_it", "eps_step", "z_box", "sawtooth_levels", "beta_tilde", "depth", "size",
    "input_size", "iterator_size",
];

fn cmd_build(ctx: &Context, basis: ReducedBasis, snaps: &SnapshotSet) -> std::result::Result<NeuralOperator, Failure> {
    let op = NeuralOperator::assemble(ctx.problem.clone(), basis, ctx.encoder()?, &snaps.coefficients, ctx.cfg.epsilon)?;
    op.write_bundle(&ctx.out.join("bundle"))?;
    let mut t = Table::new(&BUILD_COLUMNS);
    t.push(build_row(&op));
    ctx.write("build.csv", &t)?;
    Ok(op)
}

fn cmd_eval(ctx: &Context, op: &NeuralOperator) -> std::result::Result<(), Failure> {
    let p = &ctx.problem;
    let test = ctx.test_fields(ctx.cfg.test_count)?;
    let mut t = Table::new(&["index", "energy_error", "relative_error", "envelope", "certified"]);
    for (i, a) in test.iter().enumerate() {
        let u = p.galerkin_solve(&op.effective_coefficient(a))?;
        let y = op.encoder().encode(a)?;
        let g = op.evaluate_encoded(&y)?;
        let err = p.energy_norm(&(&u - &g));
        let env = op.envelope_of(&y);
        t.push(vec![
            i.to_string(),
            num(err),
            num(err / p.energy_norm(&u)),
            num(env),
            (env <= op.certificates().beta_tilde).to_string(),
        ]);
    }
    ctx.write("eval.csv", &t)?;
    Ok(())
}

fn cmd_sweep(ctx: &Context) -> std::result::Result<(), Failure> {
    let eps = if ctx.cfg.sweep.epsilon.is_empty() { vec![ctx.cfg.epsilon] } else { ctx.cfg.sweep.epsilon.clone() };
    let ns = if ctx.cfg.sweep.n.is_empty() { vec![ctx.cfg.n] } else { ctx.cfg.sweep.n.clone() };
    let n_max = *ns.iter().max().expect("nonempty");
    let snaps = ctx.training()?;
    let (basis, _) = ctx.greedy(&snaps, n_max)?;
    let encoder = ctx.encoder()?;
    let test = ctx.test_fields(ctx.cfg.test_count)?;
    let mut cols: Vec<&str> = BUILD_COLUMNS.to_vec();
    cols.push("max_network_error");
    let mut t = Table::new(&cols);
    for &n in &ns {
        let b = basis.prefix(n.min(basis.n()))?;
        for &e in &eps {
            let op = NeuralOperator::assemble(ctx.problem.clone(), b.clone(), encoder.clone(), &snaps.coefficients, e)?;
            let mut worst: f64 = 0.0;
            for a in &test {
                let y = encoder.encode(a)?;
                let d = op.reduced_solve_encoded(&y)? - op.evaluate_encoded(&y)?;
                worst = worst.max(ctx.problem.energy_norm(&d));
            }
            let mut row = build_row(&op);
            row.push(num(worst));
            t.push(row);
        }
    }
    ctx.write("sweep.csv", &t)?;
    Ok(())
}

/// Monte-Carlo errors of `Phi_step`, `Phi_it` and `Phi_app` against their certificates.
fn cmd_nncheck(ctx: &Context, op: &NeuralOperator) -> std::result::Result<(), Failure> {
    let samples = ctx.cfg.nncheck_samples;
    let c = op.certificates();
    let n = op.basis().size();
    let fields = ctx.test_fields(samples)?;
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let spec = IteratorSpec {
        n,
        k: c.net.k,
        alpha: c.net.alpha,
        beta: c.net.beta,
        epsilon: c.net.eps_it,
    };
    let step = build_phi_step(n, spec.z_box(), spec.eps_step(), &e1)?;
    let it = build_phi_it(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed ^ 0x5eed);
    let (mut w_step, mut w_it, mut w_app) = (0.0f64, 0.0f64, 0.0f64);
    for a in &fields {
        let y = op.encoder().encode(a)?;
        let sys = op.encoded_system(&y);
        let va = vec_matrix(&sys.a_v);
        let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let x = dir.normalize() * (spec.z_box() * rng.random_range(0.0..1.0));
        let input: Vec<f64> = va.iter().copied().chain(x.iter().copied()).collect();
        let want = &sys.a_v * &x + DVector::from_column_slice(&e1);
        w_step = w_step.max((DVector::from_vec(step.realize(&input)?) - want).norm());
        let exact = iterate(&sys, spec.k).c;
        w_it = w_it.max((DVector::from_vec(it.realize(&va)?) - exact).norm());
        let reference = sys.direct_solve()?;
        w_app = w_app.max((op.approximate(&y)? - reference).norm());
    }
    let mut t = Table::new(&["net", "samples", "certificate", "max_error", "pass"]);
    let checks = [
        ("phi_step", spec.eps_step(), w_step),
        ("phi_it", spec.epsilon, w_it),
        ("phi_app", c.net.epsilon, w_app),
    ];
    for (name, cert, err) in checks {
        t.push(vec![name.into(), samples.to_string(), num(cert), num(err), (err <= cert).to_string()]);
    }
    ctx.write("nncheck.csv", &t)?;
    if let Some((name, cert, err)) = checks.iter().find(|(_, cert, err)| err > cert) {
        return Err(Error::Certificate(format!("{name}: error {err:e} exceeds {cert:e}")).into());
    }
    Ok(())
}

fn cmd_decompose(ctx: &Context, op: &NeuralOperator) -> std::result::Result<(), Failure> {
    let report = op.error_decomposition(&ctx.test_fields(ctx.cfg.test_count)?)?;
    ctx.write("errors.csv", &report.table())?;
    let gap = report.triangle_gap();
    if gap > 1e-8 {
        return Err(Error::Certificate(format!("total error exceeds the sum of its parts by {gap:e}")).into());
    }
    let bad = report.violations();
    if !bad.is_empty() {
        return Err(Error::Certificate(format!("network error above epsilon for test coefficients {bad:?}")).into());
    }
    Ok(())
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests;
