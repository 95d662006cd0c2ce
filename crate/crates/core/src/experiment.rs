//! Config-driven experiment runs: every suite turns into a flat list of check
//! records plus the tabular sweeps behind them.
//!
//! The command-line front-end only parses flags, calls [`run`] and writes the
//! files; everything that decides a verdict lives here so it can be tested
//! without a process boundary.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cauchy::{
    disc_mean_value_check, planar_cauchy, verify_decay_bound, verify_growth_bound, DensityFunction,
    STABILITY_GROWTH,
};
use crate::error::Error;
use crate::fock::{compute_moments, CoeffFunction, TruncatedFockSpace};
use crate::grid::polar_grid;
use crate::paleywiener::{
    pw_completeness_sweep, pw_inner, pw_q_transform, s_eval, PWFunction, PwClosedForm, PwQuadConfig,
};
use crate::systems::{
    biorthogonal, build_system, coalescence_schedule, completeness_defect, lagrange_reconstruct,
    lattice_points, perturb_and_track, points_from_csv, random_disc, roots_of_unity, PointSystem,
    ILL_CONDITIONED, NULL_CUTOFF,
};
use crate::weights::{
    oscillation_check, regularity_check, RadialWeight, Verdict, DEFAULT_OSCILLATION_THRESHOLD,
};
use crate::young::{
    a1_a2_bounds, contradiction_check, factor_t, make_instance, q_transform, QuadConfig,
    YoungInstance,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Classical {},
    Power {
        #[serde(default = "one")]
        scale: f64,
        alpha: f64,
    },
    LogDamped {},
    Constant {
        value: f64,
    },
    /// CSV with header `t,h,hp,hpp`, relative to the config file.
    Tabulated {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointsSpec {
    Lattice {
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_offset")]
        offset: [f64; 2],
    },
    RootsOfUnity {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        phase: f64,
    },
    RandomDisc {
        #[serde(default = "two")]
        radius: f64,
    },
    List {
        points: Vec<[f64; 2]>,
    },
    /// CSV with header `re,im`, relative to the config file.
    Csv {
        path: String,
    },
}

impl Default for PointsSpec {
    fn default() -> Self {
        PointsSpec::Lattice {
            spacing: default_spacing(),
            offset: default_offset(),
        }
    }
}

/// Polar grid used for the Q-transform samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_radii")]
    pub n_radii: usize,
    #[serde(default = "default_angles")]
    pub n_angles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_radii: default_radii(),
            n_angles: default_angles(),
        }
    }
}

/// Thresholds of the pass/fail checks; each is multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "tol_identity")]
    pub identity: f64,
    #[serde(default = "tol_loose")]
    pub kernel: f64,
    #[serde(default = "tol_loose")]
    pub biorthogonality: f64,
    #[serde(default = "tol_cauchy")]
    pub cauchy: f64,
    #[serde(default = "tol_mean_value")]
    pub mean_value: f64,
    #[serde(default = "tol_loose")]
    pub residual: f64,
    #[serde(default = "tol_identity")]
    pub split: f64,
    #[serde(default = "tol_quadrature")]
    pub quadrature: f64,
    #[serde(default = "tol_loose")]
    pub reconstruction: f64,
    #[serde(default = "tol_sinc")]
    pub sinc_gram: f64,
    #[serde(default = "tol_mean_value")]
    pub s_limits: f64,
    #[serde(default = "tol_pw_q")]
    pub pw_q: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            scale: 1.0,
            identity: tol_identity(),
            kernel: tol_loose(),
            biorthogonality: tol_loose(),
            cauchy: tol_cauchy(),
            mean_value: tol_mean_value(),
            residual: tol_loose(),
            split: tol_identity(),
            quadrature: tol_quadrature(),
            reconstruction: tol_loose(),
            sinc_gram: tol_sinc(),
            s_limits: tol_mean_value(),
            pw_q: tol_pw_q(),
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 13] {
        [
            ("scale", self.scale),
            ("identity", self.identity),
            ("kernel", self.kernel),
            ("biorthogonality", self.biorthogonality),
            ("cauchy", self.cauchy),
            ("mean_value", self.mean_value),
            ("residual", self.residual),
            ("split", self.split),
            ("quadrature", self.quadrature),
            ("reconstruction", self.reconstruction),
            ("sinc_gram", self.sinc_gram),
            ("s_limits", self.s_limits),
            ("pw_q", self.pw_q),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Weights,
    Kernel,
    Systems,
    Cauchy,
    Young,
    Pw,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = [
        "weights", "kernel", "systems", "cauchy", "young", "pw", "all",
    ];

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::Weights,
            Suite::Kernel,
            Suite::Systems,
            Suite::Cauchy,
            Suite::Young,
            Suite::Pw,
            Suite::All,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            format!(
                "unknown suite `{s}`, expected one of {}",
                Suite::NAMES.join(", ")
            )
        })
    }
}

/// Tabular outputs that can be requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Regularity,
    Cauchy,
    Q,
    SigmaMin,
}

const ALL_SWEEPS: [SweepKind; 4] = [
    SweepKind::Regularity,
    SweepKind::Cauchy,
    SweepKind::Q,
    SweepKind::SigmaMin,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weight: WeightSpec,
    pub dim: usize,
    #[serde(default = "one_usize")]
    pub inflation: usize,
    #[serde(default)]
    pub points: PointsSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default = "default_suite")]
    pub suite: Suite,
    /// `None` emits every sweep the selected suites produce.
    #[serde(default)]
    pub sweeps: Option<Vec<SweepKind>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> std::result::Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.inflation == 0 {
            return bad("inflation must be at least 1".into());
        }
        if self.grid.n_radii < 2 || self.grid.n_angles < 2 {
            return bad("grid needs at least 2 radii and 2 angles".into());
        }
        for (name, v) in self.tolerances.entries() {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance `{name}` must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn wants(&self, kind: SweepKind) -> bool {
        self.sweeps
            .as_deref()
            .unwrap_or(&ALL_SWEEPS)
            .contains(&kind)
    }

    fn tol(&self, base: f64) -> f64 {
        base * self.tolerances.scale
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExperimentError {
    Config(String),
    Io { path: PathBuf, message: String },
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(m) => write!(f, "invalid config: {m}"),
            ExperimentError::Io { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl std::error::Error for ExperimentError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// `<=`, `>=`, `holds` or `info`.
    pub relation: String,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: CheckVerdict,
    /// Distance to the threshold on the passing side; negative when failing.
    pub margin: Option<f64>,
    pub error: Option<ErrorRecord>,
    pub note: Option<String>,
}

impl CheckRecord {
    fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        let pass = measured <= threshold;
        CheckRecord {
            name: name.into(),
            relation: "<=".into(),
            measured: Some(measured),
            threshold: Some(threshold),
            verdict: if pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            margin: Some(threshold - measured),
            error: None,
            note: None,
        }
    }

    fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        let pass = measured >= threshold;
        CheckRecord {
            relation: ">=".into(),
            verdict: if pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            margin: Some(measured - threshold),
            ..CheckRecord::at_most(name, measured, threshold)
        }
    }

    fn holds(name: &str, ok: bool, measured: Option<f64>) -> Self {
        CheckRecord {
            name: name.into(),
            relation: "holds".into(),
            measured,
            threshold: None,
            verdict: if ok {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            margin: None,
            error: None,
            note: None,
        }
    }

    fn info(name: &str, measured: f64) -> Self {
        CheckRecord {
            relation: "info".into(),
            verdict: CheckVerdict::Info,
            ..CheckRecord::holds(name, true, Some(measured))
        }
    }

    fn failed(name: &str, e: &Error) -> Self {
        CheckRecord {
            error: Some(e.into()),
            ..CheckRecord::holds(name, false, None)
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Keeps the measurement but downgrades the verdict to informational.
    fn informational(mut self, note: impl Into<String>) -> Self {
        self.verdict = CheckVerdict::Info;
        self.with_note(note)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact_version: String,
    pub config_sha256: String,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub checks: Vec<CheckRecord>,
    pub notes: Vec<String>,
    /// File names of the emitted CSV tables.
    pub plotdata: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != CheckVerdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks
            .iter()
            .filter(|c| c.verdict == CheckVerdict::Fail)
    }

    pub fn without_timestamp(&self) -> ExperimentReport {
        let mut r = self.clone();
        r.provenance.timestamp = None;
        r
    }
}

/// One CSV table; `description` goes into the leading comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub file_name: String,
    pub description: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    fn new(file_name: &str, description: &str, columns: &[&str]) -> Self {
        PlotTable {
            file_name: file_name.into(),
            description: description.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# columns {}: {}\n{}\n",
            self.columns.join(","),
            self.description,
            self.columns.join(",")
        );
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub tables: Vec<PlotTable>,
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs the configured suites. Relative paths inside the config resolve
/// against `base_dir`.
pub fn run(
    config: &ExperimentConfig,
    base_dir: &Path,
    timestamp: &str,
) -> std::result::Result<RunOutput, ExperimentError> {
    config.validate()?;
    let weight = load_weight(&config.weight, base_dir)?;
    let points = load_points(config, base_dir)?;

    let mut ctx = Context::new(config, weight, points);
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut tables = Vec::new();
    let suite = config.suite;
    if suite.includes(Suite::Weights) {
        weights_suite(&ctx, &mut checks, &mut tables);
    }
    if suite.includes(Suite::Kernel) {
        kernel_suite(&ctx, &mut checks);
    }
    if suite.includes(Suite::Systems) {
        systems_suite(&ctx, &mut checks, &mut tables);
    }
    if suite.includes(Suite::Cauchy) {
        cauchy_suite(&mut ctx, &mut checks, &mut tables);
    }
    if suite.includes(Suite::Young) {
        young_suite(&mut ctx, &mut checks, &mut tables);
    }
    if suite.includes(Suite::Pw) {
        pw_suite(&ctx, &mut checks, &mut tables, &mut notes);
        notes.push(
            "Paley-Wiener completeness of the punctured system is numerical evidence only".into(),
        );
    }
    if suite.includes(Suite::Young) || suite.includes(Suite::Cauchy) {
        notes.push("A2 is checked for finiteness on the truncation disc only".into());
    }

    if tables.is_empty() {
        notes.push("no sweeps".into());
    }
    let plotdata = tables.iter().map(|t| t.file_name.clone()).collect();
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        checks,
        notes,
        plotdata,
        provenance: Provenance {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(config),
            timestamp: Some(timestamp.to_string()),
        },
    };
    Ok(RunOutput { report, tables })
}

fn read_file(base_dir: &Path, path: &str) -> std::result::Result<String, ExperimentError> {
    let full = base_dir.join(path);
    std::fs::read_to_string(&full).map_err(|e| ExperimentError::Io {
        path: full,
        message: e.to_string(),
    })
}

fn load_weight(
    spec: &WeightSpec,
    base_dir: &Path,
) -> std::result::Result<RadialWeight, ExperimentError> {
    Ok(match spec {
        WeightSpec::Classical {} => RadialWeight::classical(),
        WeightSpec::Power { scale, alpha } => {
            if !(*scale > 0.0 && *alpha > 0.0) {
                return Err(ExperimentError::Config(format!(
                    "power weight needs positive scale and alpha, got {scale}, {alpha}"
                )));
            }
            RadialWeight::power(*scale, *alpha)
        }
        WeightSpec::LogDamped {} => RadialWeight::log_damped(),
        WeightSpec::Constant { value } => RadialWeight::constant(*value),
        WeightSpec::Tabulated { path } => {
            let text = read_file(base_dir, path)?;
            RadialWeight::from_csv(path.clone(), &text)
                .map_err(|e| ExperimentError::Config(format!("{path}: {e}")))?
        }
    })
}

fn load_points(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> std::result::Result<Vec<Complex64>, ExperimentError> {
    let n = config.dim;
    Ok(match &config.points {
        PointsSpec::Lattice { spacing, offset } => {
            lattice_points(n, *spacing, Complex64::new(offset[0], offset[1]))
        }
        PointsSpec::RootsOfUnity { radius, phase } => roots_of_unity(n, *radius, *phase),
        PointsSpec::RandomDisc { radius } => random_disc(n, *radius, config.seed),
        PointsSpec::List { points } => points.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        PointsSpec::Csv { path } => {
            let text = read_file(base_dir, path)?;
            points_from_csv(&text).map_err(|e| ExperimentError::Config(format!("{path}: {e}")))?
        }
    })
}

/// Shared objects, built once and reused by every suite that needs them.
struct Context<'a> {
    config: &'a ExperimentConfig,
    weight: RadialWeight,
    space: crate::Result<TruncatedFockSpace>,
    system: Option<crate::Result<PointSystem>>,
    points: Vec<Complex64>,
    instance: Option<crate::Result<YoungInstance>>,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, weight: RadialWeight, points: Vec<Complex64>) -> Self {
        let space = compute_moments(&weight, config.dim);
        Context {
            config,
            weight,
            space,
            system: None,
            points,
            instance: None,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }

    fn system(&mut self) -> crate::Result<PointSystem> {
        if self.system.is_none() {
            let built = self
                .space
                .clone()
                .and_then(|sp| build_system(self.points.clone(), &sp));
            self.system = Some(built);
        }
        self.system.clone().expect("just set")
    }

    fn instance(&mut self) -> crate::Result<YoungInstance> {
        if self.instance.is_none() {
            let built = self
                .system()
                .and_then(|ps| make_instance(&ps, self.config.inflation, self.config.seed));
            self.instance = Some(built);
        }
        self.instance.clone().expect("just set")
    }
}

fn random_function(rng: &mut ChaCha8Rng, sp: &TruncatedFockSpace) -> CoeffFunction {
    CoeffFunction::new(
        sp.moments()
            .iter()
            .map(|m| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) / m.sqrt()
            })
            .collect(),
    )
}

fn weights_suite(ctx: &Context, checks: &mut Vec<CheckRecord>, tables: &mut Vec<PlotTable>) {
    let w = &ctx.weight;
    let grid: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64).collect();
    checks.push(match w.check_derivatives(&grid) {
        Ok(()) => CheckRecord::holds("weights.derivatives", true, None),
        Err(e) => CheckRecord::failed("weights.derivatives", &e),
    });
    match regularity_check(w, 1e4, 60) {
        Ok(r) => {
            let last = *r.ratios.last().expect("nonempty");
            let mut rec = CheckRecord::at_most("weights.regularity", last, r.threshold)
                .with_note(format!("tail slope {:e}", r.tail_slope));
            if r.verdict == Verdict::Fail {
                rec.verdict = CheckVerdict::Fail;
            }
            checks.push(rec);
            if ctx.config.wants(SweepKind::Regularity) {
                let mut t = PlotTable::new(
                    "regularity.csv",
                    "log(t + |h'(t)| + |h''(t)|) / h(t) on a geometric grid",
                    &["t", "ratio"],
                );
                t.rows = r
                    .grid
                    .iter()
                    .zip(&r.ratios)
                    .map(|(a, b)| vec![*a, *b])
                    .collect();
                tables.push(t);
            }
        }
        Err(e) => checks.push(CheckRecord::failed("weights.regularity", &e)),
    }
    let samples = polar_grid(50.0, 10, 8);
    match oscillation_check(w, &samples, 0.1) {
        Ok(s) => {
            // judged on the outermost ring, like the regularity ratio at t_max
            let outer = s.iter().map(|x| x.z.norm()).fold(0.0, f64::max);
            let ring: Vec<_> = s
                .iter()
                .filter(|x| x.z.norm() >= outer * (1.0 - 1e-12))
                .collect();
            let worst = ring.iter().map(|x| x.sup).fold(0.0, f64::max);
            let flagged = s.iter().filter(|x| x.flagged).count();
            let vacuous = s.iter().filter(|x| x.note.is_some()).count();
            checks.push(
                CheckRecord::at_most("weights.oscillation", worst, DEFAULT_OSCILLATION_THRESHOLD).with_note(format!(
                    "eps = 0.1, sup over the ring |z| = {outer}; {flagged} of {} samples flagged overall, {vacuous} with underflowing probe radius",
                    s.len()
                )),
            );
        }
        Err(e) => checks.push(CheckRecord::failed("weights.oscillation", &e)),
    }
}

fn kernel_suite(ctx: &Context, checks: &mut Vec<CheckRecord>) {
    let sp = match &ctx.space {
        Ok(sp) => sp,
        Err(e) => {
            checks.push(CheckRecord::failed("kernel.reproducing", e));
            checks.push(CheckRecord::failed("kernel.exponential", e));
            return;
        }
    };
    let mut rng = ctx.rng(1);
    let lambdas = random_disc(
        50,
        2.0f64.min(0.5 * sp.cutoff_radius()),
        ctx.config.seed ^ 0x6b,
    );
    let mut worst: f64 = 0.0;
    for &l in &lambdas {
        let f = random_function(&mut rng, sp);
        let k = sp.kernel(l);
        let outcome = sp
            .inner_product(&f, &k)
            .and_then(|v| Ok((v, sp.norm(&f)? * sp.norm(&k)?)));
        match outcome {
            Ok((v, bound)) => worst = worst.max((v - f.eval(l)).norm() / bound),
            Err(e) => {
                checks.push(CheckRecord::failed("kernel.reproducing", &e));
                return;
            }
        }
    }
    checks.push(CheckRecord::at_most(
        "kernel.reproducing",
        worst,
        ctx.config.tol(ctx.config.tolerances.identity),
    ));

    let name = "kernel.exponential";
    if !ctx.weight.is_classical() {
        checks.push(CheckRecord {
            measured: None,
            ..CheckRecord::info(name, 0.0)
                .with_note("closed-form kernel known only for the classical weight")
        });
        return;
    }
    let tol = ctx.config.tol(ctx.config.tolerances.kernel);
    let radius = kernel_test_radius(sp.dim(), tol);
    let zs = random_disc(50, radius, ctx.config.seed ^ 0x7a);
    let ls = random_disc(50, radius, ctx.config.seed ^ 0x7b);
    let worst = zs
        .iter()
        .zip(&ls)
        .map(|(&z, &l)| {
            let exact = (PI * z * l.conj()).exp();
            (sp.kernel(l).eval(z) - exact).norm() / exact.norm()
        })
        .fold(0.0, f64::max);
    checks.push(
        CheckRecord::at_most(name, worst, tol)
            .with_note(format!("50 pairs in the disc of radius {radius:.4}")),
    );
}

/// Largest radius `r <= 2` at which both the truncation tail and the rounding
/// of the kernel series stay a decade below `tol`. With `x = pi r^2` the relative
/// tail is at most `x^N / N! exp(2x)` and rounding about `10 eps exp(2x)`.
fn kernel_test_radius(dim: usize, tol: f64) -> f64 {
    let ln_fact: f64 = (1..=dim).map(|k| (k as f64).ln()).sum();
    let budget = (0.1 * tol).ln();
    let mut x = 4.0 * PI;
    while x > 1e-6 {
        let tail = dim as f64 * x.ln() - ln_fact + 2.0 * x;
        let rounding = (10.0 * f64::EPSILON).ln() + 2.0 * x;
        if tail <= budget && rounding <= budget {
            break;
        }
        x *= 0.95;
    }
    (x / PI).sqrt()
}

const SYSTEMS_CHECKS: [&str; 7] = [
    "systems.condition",
    "systems.separation",
    "systems.biorthogonality",
    "systems.lagrange",
    "systems.partition_of_unity",
    "systems.completeness",
    "systems.coalescence_sigma_min",
];

/// Records every check of `names` from index `from` on as failed with `e`.
fn fail_rest(checks: &mut Vec<CheckRecord>, names: &[&str], from: usize, e: &Error) {
    checks.extend(names[from..].iter().map(|n| CheckRecord::failed(n, e)));
}

fn systems_suite(ctx: &Context, checks: &mut Vec<CheckRecord>, tables: &mut Vec<PlotTable>) {
    let ps = match ctx
        .space
        .clone()
        .and_then(|sp| build_system(ctx.points.clone(), &sp))
    {
        Ok(ps) => ps,
        Err(e) => return fail_rest(checks, &SYSTEMS_CHECKS, 0, &e),
    };
    let sp = ps.space();
    let cond = ps.cond_estimate();
    let ill = ps.is_ill_conditioned();
    let conditioned = |rec: CheckRecord| {
        if ill {
            rec.informational(format!(
                "condition estimate {cond:e} exceeds {ILL_CONDITIONED:e}; margin reported only"
            ))
        } else {
            rec
        }
    };
    checks.push(CheckRecord::info("systems.condition", cond));
    checks.push(CheckRecord::info("systems.separation", ps.separation()));
    let fam = match biorthogonal(&ps) {
        Ok(f) => f,
        Err(e) => return fail_rest(checks, &SYSTEMS_CHECKS, 2, &e),
    };
    match fam.biorthogonality_matrix(sp) {
        Ok(m) => {
            let n = m.nrows();
            let dev = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| (m[(i, j)] - if i == j { 1.0 } else { 0.0 }).norm())
                .fold(0.0, f64::max);
            checks.push(conditioned(CheckRecord::at_most(
                "systems.biorthogonality",
                dev,
                ctx.config.tol(ctx.config.tolerances.biorthogonality),
            )));
        }
        Err(e) => checks.push(CheckRecord::failed("systems.biorthogonality", &e)),
    }

    let mut rng = ctx.rng(2);
    let f = random_function(&mut rng, sp);
    let top = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let f = f.scaled(Complex64::new(1.0 / top, 0.0));
    let coeff_gap = |a: &CoeffFunction, b: &CoeffFunction| {
        a.coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    let threshold = ctx.config.tol(ctx.config.tolerances.identity) * cond.max(1.0);
    checks.push(match lagrange_reconstruct(&f, &ps) {
        Ok(r) => conditioned(CheckRecord::at_most(
            "systems.lagrange",
            coeff_gap(&r, &f),
            threshold,
        )),
        Err(e) => CheckRecord::failed("systems.lagrange", &e),
    });
    let one = CoeffFunction::monomial(0, sp.dim());
    checks.push(match lagrange_reconstruct(&one, &ps) {
        Ok(r) => conditioned(CheckRecord::at_most(
            "systems.partition_of_unity",
            coeff_gap(&r, &one),
            threshold,
        )),
        Err(e) => CheckRecord::failed("systems.partition_of_unity", &e),
    });

    match fam.normalized(sp).and_then(|g| completeness_defect(&g, sp)) {
        Ok(d) => checks.push(
            CheckRecord::at_least("systems.completeness", d.sigma_min, NULL_CUTOFF)
                .with_note(format!("null dimension {}", d.null_dim)),
        ),
        Err(e) => checks.push(CheckRecord::failed("systems.completeness", &e)),
    }

    let schedule = coalescence_schedule(&ps, 0, 1, 12, 1e-6);
    match perturb_and_track(&ps, &schedule) {
        Ok(steps) => {
            let last = steps.last().map(|s| s.sigma_min).unwrap_or(f64::NAN);
            checks.push(
                CheckRecord::info("systems.coalescence_sigma_min", last)
                    .with_note("nodes 0 and 1 brought to distance 1e-6 in 12 geometric steps"),
            );
            if ctx.config.wants(SweepKind::SigmaMin) {
                let mut t = PlotTable::new(
                    "sigma_min.csv",
                    "smallest singular value of the normalized biorthogonal Gram while nodes 0 and 1 coalesce",
                    &["step", "gap", "sigma_min", "cond"],
                );
                t.rows = steps
                    .iter()
                    .zip(&schedule)
                    .enumerate()
                    .map(|(k, (s, pts))| {
                        vec![
                            k as f64,
                            (pts[0] - pts[1]).norm(),
                            s.sigma_min,
                            s.cond_estimate,
                        ]
                    })
                    .collect();
                tables.push(t);
            }
        }
        Err(e) => checks.push(
            CheckRecord::failed("systems.coalescence_sigma_min", &e)
                .informational("coalescence sweep stopped early"),
        ),
    }
}

fn cauchy_suite(ctx: &mut Context, checks: &mut Vec<CheckRecord>, tables: &mut Vec<PlotTable>) {
    let disc = DensityFunction::disc_indicator(1.0);
    let eta = disc.default_hole_radius();
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let inside = Complex64::from_polar(0.05 + 0.08 * k as f64, 0.7 * k as f64);
        let outside = Complex64::from_polar(1.2 + 0.4 * k as f64, 1.3 * k as f64);
        let pairs = [(inside, PI * inside.conj()), (outside, PI / outside)];
        for (z, exact) in pairs {
            match planar_cauchy(&disc, z, eta) {
                Ok(v) => worst = worst.max((v - exact).norm()),
                Err(e) => {
                    checks.push(CheckRecord::failed("cauchy.disc_indicator", &e));
                    return;
                }
            }
        }
    }
    checks.push(CheckRecord::at_most(
        "cauchy.disc_indicator",
        worst,
        ctx.config.tol(ctx.config.tolerances.cauchy),
    ));

    let worst = (0..10)
        .map(|k| {
            let r = 10f64.powf((k as f64 - 5.0) / 2.0);
            disc_mean_value_check(Complex64::new(0.3 * k as f64, -0.2 * k as f64), r).norm() / r
        })
        .fold(0.0, f64::max);
    checks.push(CheckRecord::at_most(
        "cauchy.mean_value",
        worst,
        ctx.config.tol(ctx.config.tolerances.mean_value),
    ));

    let inst = match ctx.instance() {
        Ok(i) => i,
        Err(e) => {
            checks.push(CheckRecord::failed("cauchy.decay_bound", &e));
            checks.push(CheckRecord::failed("cauchy.growth_bound", &e));
            return;
        }
    };
    match inst
        .a1_density()
        .and_then(|phi| verify_decay_bound(&phi, &polar_grid(20.0, 20, 8)))
    {
        Ok(r) => {
            checks.push(
                CheckRecord::at_most("cauchy.decay_bound", r.growth, STABILITY_GROWTH).with_note(
                    format!(
                        "sup |C[P conj(H) exp(-h)]|(1 + |z|) = {:e} over |z| <= 20",
                        r.constant
                    ),
                ),
            );
            if ctx.config.wants(SweepKind::Cauchy) {
                let mut t = PlotTable::new(
                    "cauchy.csv",
                    "Cauchy transform of P conj(H) exp(-h) and the ratio |C|(1 + |z|)",
                    &[
                        "z_re",
                        "z_im",
                        "transform_re",
                        "transform_im",
                        "bound_ratio",
                    ],
                );
                t.rows = r
                    .samples
                    .iter()
                    .map(|s| vec![s.z.re, s.z.im, s.value.re, s.value.im, s.bound_ratio])
                    .collect();
                tables.push(t);
            }
        }
        Err(e) => checks.push(CheckRecord::failed("cauchy.decay_bound", &e)),
    }
    let grid = polar_grid(inst.ambient.cutoff_radius(), 12, 8);
    match inst
        .psi_density(0)
        .and_then(|psi| verify_growth_bound(&psi, 0.1, &ctx.weight, &grid))
    {
        Ok(r) => checks.push(
            CheckRecord::at_most("cauchy.growth_bound", r.bound.growth, STABILITY_GROWTH)
                .with_note(format!(
                    "sup |C[psi]| exp(-0.1 h) = {:e} over the truncation disc, {} clamped holes",
                    r.bound.constant, r.clamped
                )),
        ),
        Err(e) => checks.push(CheckRecord::failed("cauchy.growth_bound", &e)),
    }
}

const YOUNG_CHECKS: [&str; 11] = [
    "young.residual_on_lambda",
    "young.split",
    "young.quadrature_vs_moment",
    "young.t_nonzero",
    "young.t_continuity",
    "young.reconstruction",
    "young.t_at_p_zeros",
    "young.implication_fails",
    "young.a2_identity",
    "young.a1_constant",
    "young.a2_finite",
];

fn young_suite(ctx: &mut Context, checks: &mut Vec<CheckRecord>, tables: &mut Vec<PlotTable>) {
    let fail_all = |checks: &mut Vec<CheckRecord>, from: usize, e: &Error| {
        fail_rest(checks, &YOUNG_CHECKS, from, e)
    };
    let inst = match ctx.instance() {
        Ok(i) => i,
        Err(e) => return fail_all(checks, 0, &e),
    };
    let cfg = ctx.config;
    let grid = inst.default_grid(cfg.grid.n_radii, cfg.grid.n_angles);
    let r = match q_transform(&inst, &grid, QuadConfig::default()) {
        Ok(r) => r,
        Err(e) => return fail_all(checks, 0, &e),
    };
    checks.push(CheckRecord::at_most(
        "young.residual_on_lambda",
        r.worst_residual(),
        cfg.tol(cfg.tolerances.residual),
    ));
    checks.push(CheckRecord::at_most(
        "young.split",
        r.split_deviation,
        cfg.tol(cfg.tolerances.split),
    ));
    checks.push(CheckRecord::at_most(
        "young.quadrature_vs_moment",
        r.quadrature_deviation,
        cfg.tol(cfg.tolerances.quadrature),
    ));
    let t = factor_t(&r, &inst);
    if cfg.wants(SweepKind::Q) {
        let mut table = PlotTable::new(
            "q_samples.csv",
            "Q, its split A1 + A2 and T = Q / G on the polar grid (T is NaN next to nodes)",
            &[
                "z_re", "z_im", "q_re", "q_im", "a1_re", "a1_im", "a2_re", "a2_im", "t_re", "t_im",
            ],
        );
        for i in 0..r.grid.len() {
            let tz = r.t_estimate[i].unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            table.rows.push(vec![
                r.grid[i].re,
                r.grid[i].im,
                r.q[i].re,
                r.q[i].im,
                r.a1[i].re,
                r.a1[i].im,
                r.a2[i].re,
                r.a2[i].im,
                tz.re,
                tz.im,
            ]);
        }
        tables.push(table);
    }
    match t {
        Ok(t) => {
            checks.push(CheckRecord::at_least(
                "young.t_nonzero",
                t.max_abs_t,
                t.threshold,
            ));
            checks.push(CheckRecord::info(
                "young.t_continuity",
                t.continuity_deviation,
            ));
        }
        Err(e) => {
            checks.push(CheckRecord::failed("young.t_nonzero", &e));
            checks.push(CheckRecord::failed("young.t_continuity", &e));
        }
    }
    let c = contradiction_check(&inst, &r);
    checks.push(CheckRecord::at_most(
        "young.reconstruction",
        c.reconstruction_deviation,
        cfg.tol(cfg.tolerances.reconstruction),
    ));
    checks.push(CheckRecord::at_most(
        "young.t_at_p_zeros",
        c.t_at_zeros_deviation,
        cfg.tol(cfg.tolerances.reconstruction),
    ));
    checks.push(CheckRecord::holds(
        "young.implication_fails",
        c.implication_fails,
        Some(c.max_abs_c),
    ));
    match a1_a2_bounds(&inst, &r, cfg.seed) {
        Ok(b) => {
            checks.push(CheckRecord::at_most(
                "young.a2_identity",
                b.identity_deviation,
                cfg.tol(cfg.tolerances.reconstruction),
            ));
            checks.push(
                CheckRecord::info("young.a1_constant", b.a1_constant).with_note(format!(
                    "sup |A1|(1 + |z|) / |G| on the Q grid; {:e} within 3/4 of its radius, {}",
                    b.a1_inner_constant,
                    if b.a1_stable {
                        "stable"
                    } else {
                        "not yet stable at this radius"
                    }
                )),
            );
            checks.push(
                CheckRecord::holds("young.a2_finite", b.a2_finite, Some(b.a2_norm)).with_note(
                    format!(
                        "weighted L2 norm of A2, {:e} within 3/4 of the truncation disc",
                        b.a2_norm_inner
                    ),
                ),
            );
        }
        Err(e) => fail_all(checks, 8, &e),
    }
}

fn pw_suite(
    ctx: &Context,
    checks: &mut Vec<CheckRecord>,
    tables: &mut Vec<PlotTable>,
    notes: &mut Vec<String>,
) {
    let cfg = ctx.config;
    let m = 20usize;
    let sincs: Vec<PWFunction> = (-(m as i64)..=m as i64)
        .map(|k| PWFunction::sinc(k, m))
        .collect();
    let mut gram: f64 = 0.0;
    for (i, a) in sincs.iter().enumerate() {
        for (j, b) in sincs.iter().enumerate() {
            let g = pw_inner(a, b).expect("same sample range");
            gram = gram.max((g - if i == j { 1.0 } else { 0.0 }).norm());
        }
    }
    checks.push(CheckRecord::at_most(
        "pw.sinc_gram",
        gram,
        cfg.tol(cfg.tolerances.sinc_gram),
    ));
    let limits = [(0.0, -PI), (1.0, -PI / 2.0), (-1.0, -PI / 2.0)]
        .iter()
        .map(|&(x, v)| (s_eval(Complex64::new(x, 0.0)) - v).norm())
        .fold(0.0, f64::max);
    checks.push(CheckRecord::at_most(
        "pw.s_limits",
        limits,
        cfg.tol(cfg.tolerances.s_limits),
    ));

    match pw_completeness_sweep(&[10, 20, 40]) {
        Ok(rows) => {
            let decreasing = rows
                .windows(2)
                .all(|w| w[1].low_mode_norm < w[0].low_mode_norm);
            checks.push(
                CheckRecord::holds(
                    "pw.low_mode_decreasing",
                    decreasing,
                    rows.last().map(|r| r.low_mode_norm),
                )
                .with_note(format!(
                    "null dimensions {:?}",
                    rows.iter().map(|r| r.null_dim).collect::<Vec<_>>()
                )),
            );
            if cfg.wants(SweepKind::SigmaMin) {
                let mut t = PlotTable::new(
                    "pw_completeness.csv",
                    "punctured system in 2M + 1 integer samples",
                    &["m", "sigma_min", "null_dim", "low_mode_norm"],
                );
                t.rows = rows
                    .iter()
                    .map(|r| vec![r.m as f64, r.sigma_min, r.null_dim as f64, r.low_mode_norm])
                    .collect();
                tables.push(t);
            }
        }
        Err(e) => checks.push(CheckRecord::failed("pw.low_mode_decreasing", &e)),
    }

    // G = sin(pi z) and H = sinc give Q(0) = pi^2 and Q = 0 at the other integers
    let g = PwClosedForm::sine(5);
    let h = PWFunction::sinc(0, 12);
    match pw_q_transform(
        &g,
        &h,
        &[Complex64::new(0.0, 0.0), Complex64::new(5.0, 0.0)],
        PwQuadConfig::default(),
    ) {
        Ok(r) => {
            checks.push(CheckRecord::at_most(
                "pw.q_at_zero",
                (r.q[0] - PI * PI).norm() / (PI * PI),
                cfg.tol(cfg.tolerances.pw_q),
            ));
            let worst = r
                .residuals
                .iter()
                .filter(|(l, _)| *l != 0.0)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            checks.push(CheckRecord::at_most(
                "pw.q_residuals",
                worst,
                cfg.tol(cfg.tolerances.pw_q),
            ));
            notes.push(format!("real-line Q truncated at |t| <= {}", r.t_max));
        }
        Err(e) => {
            checks.push(CheckRecord::failed("pw.q_at_zero", &e));
            checks.push(CheckRecord::failed("pw.q_residuals", &e));
        }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_spacing() -> f64 {
    0.8
}
fn default_offset() -> [f64; 2] {
    [0.11, 0.07]
}
fn default_radii() -> usize {
    8
}
fn default_angles() -> usize {
    12
}
fn default_output_dir() -> String {
    "report".into()
}
fn default_suite() -> Suite {
    Suite::All
}
fn tol_identity() -> f64 {
    1e-10
}
fn tol_loose() -> f64 {
    1e-8
}
fn tol_quadrature() -> f64 {
    1e-9
}
fn tol_cauchy() -> f64 {
    1e-6
}
fn tol_mean_value() -> f64 {
    1e-12
}
fn tol_sinc() -> f64 {
    1e-15
}
fn tol_pw_q() -> f64 {
    1e-7
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn config(json: &str) -> ExperimentConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = config(r#"{"weight": {"kind": "classical"}, "dim": 5}"#);
        assert_eq!(c.inflation, 1);
        assert_eq!(c.suite, Suite::All);
        assert_eq!(c.points, PointsSpec::default());
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn missing_dim_is_rejected() {
        let e = serde_json::from_str::<ExperimentConfig>(r#"{"weight": {"kind": "classical"}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("dim"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"weight": {"kind": "classical"}, "dim": 4, "dims": 5}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"weight": {"kind": "classical", "alpha": 2}, "dim": 4}"#
        )
        .is_err());
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let c =
            config(r#"{"weight": {"kind": "classical"}, "dim": 4, "tolerances": {"split": 0}}"#);
        assert!(matches!(c.validate(), Err(ExperimentError::Config(m)) if m.contains("split")));
    }

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn kernel_suite_passes_for_classical() {
        let c = config(r#"{"weight": {"kind": "classical"}, "dim": 40, "suite": "kernel"}"#);
        let out = run(&c, Path::new("."), "t").unwrap();
        assert!(out.report.passed(), "{:?}", out.report.checks);
        assert!(out
            .report
            .checks
            .iter()
            .any(|c| c.name == "kernel.exponential" && c.verdict == CheckVerdict::Pass));
        assert_eq!(out.report.notes, vec!["no sweeps".to_string()]);
    }

    #[test]
    fn kernel_radius_grows_with_dimension() {
        let small = kernel_test_radius(6, 1e-8);
        let large = kernel_test_radius(40, 1e-8);
        assert!(small < large && large < 2.0);
        assert!((kernel_test_radius(200, 1e-1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_exponential_is_info_for_other_weights() {
        let c = config(r#"{"weight": {"kind": "log_damped"}, "dim": 10, "suite": "kernel"}"#);
        let out = run(&c, Path::new("."), "t").unwrap();
        let rec = out
            .report
            .checks
            .iter()
            .find(|c| c.name == "kernel.exponential")
            .unwrap();
        assert_eq!(rec.verdict, CheckVerdict::Info);
    }

    #[test]
    fn coalesced_nodes_surface_near_double_zero() {
        let c = config(
            r#"{"weight": {"kind": "classical"}, "dim": 3, "suite": "young",
                "points": {"kind": "list", "points": [[1, 0], [1.000000001, 0], [0, 1]]}}"#,
        );
        let out = run(&c, Path::new("."), "t").unwrap();
        assert!(!out.report.passed());
        assert!(out.report.failures().any(|c| c
            .error
            .as_ref()
            .is_some_and(|e| e.code == "NEAR_DOUBLE_ZERO")));
    }

    #[test]
    fn check_names_are_unique_and_sweeps_can_be_disabled() {
        let c = config(
            r#"{"weight": {"kind": "classical"}, "dim": 4, "sweeps": [], "suite": "systems"}"#,
        );
        let out = run(&c, Path::new("."), "t").unwrap();
        let names: HashSet<_> = out.report.checks.iter().map(|c| c.name.clone()).collect();
        assert_eq!(names.len(), out.report.checks.len());
        assert!(out.tables.is_empty());
        assert!(out.report.notes.contains(&"no sweeps".to_string()));
    }

    #[test]
    fn missing_point_file_is_an_io_error() {
        let c = config(
            r#"{"weight": {"kind": "classical"}, "dim": 4, "points": {"kind": "csv", "path": "nope.csv"}}"#,
        );
        assert!(matches!(
            run(&c, Path::new("/nonexistent"), "t"),
            Err(ExperimentError::Io { .. })
        ));
    }

    #[test]
    fn csv_has_comment_and_header() {
        let mut t = PlotTable::new("x.csv", "demo", &["t", "ratio"]);
        t.rows.push(vec![1.0, 0.5]);
        assert_eq!(t.to_csv(), "# columns t,ratio: demo\nt,ratio\n1e0,5e-1\n");
    }

    #[test]
    fn hash_tracks_config() {
        let a = config(r#"{"weight": {"kind": "classical"}, "dim": 4}"#);
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
