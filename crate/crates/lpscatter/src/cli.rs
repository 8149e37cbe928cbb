//! Scenario files, verification suites, sweeps and report writing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::closed_form;
use crate::error::{Error, Result};
use crate::evolution::{
    self, linear_times, transition_decompose, z_app_defect, z_backward, z_forward, Direction, PolarForward, ZApp,
};
use crate::grid::{make_grid, DomainKind, EnergyGrid, Scheme};
use crate::hardy::{build_hardy_projectors, oracle_suite, HardyProjector, PvScheme};
use crate::lyapunov::{lyapunov_trace, LyapunovPair, Sigma};
use crate::packets::{random_packet, reference_packet};
use crate::resonance::{
    build_resonance_states_with_floor, eigen_relation_residual, eigenvector_deviation, half_line_setup,
    proof_chain_report, survival_decomposition, projection_bound_report, BoundReport, ResonanceStates, DEFAULT_INVERSE_FLOOR,
    DEFAULT_REPORT_TOL,
};
use crate::smatrix::{ResonanceParams, SMatrixModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const SUITES: [&str; 11] = [
    "hardy-oracle",
    "operators",
    "lyapunov",
    "semigroup",
    "norms",
    "background",
    "projection-bound",
    "eigenvector",
    "proof-chain",
    "transition",
    "lp-limit",
];

const ORACLE_TOL: f64 = 1e-3;
const COMPLEMENT_TOL: f64 = 1e-6;
const SPECTRUM_TOL: f64 = 1e-8;
const MONOTONE_TOL: f64 = 1e-5;
const DECAY_RATIO: f64 = 0.05;
const SEMIGROUP_TOL: f64 = 1e-10;
const NON_SEMIGROUP_MIN: f64 = 1e-4;
const RANDOM_STATES: usize = 50;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) | Error::Usage(_) | Error::Config(_) => EXIT_CONFIG,
        Error::Precondition(_) => EXIT_PRECONDITION,
        Error::LinearAlgebra(_) | Error::Io(_) | Error::Report(_) => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpscatter", version, about = "Lyapunov operators and resonance bounds on discretized energy grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory; overrides the scenario.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random test states; overrides the scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every suite listed in a scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Vary one scenario parameter and tabulate the resonance bounds.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// One of gamma_ratio, n, e_max, model.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
    },
    /// Build the Hardy projections and run the rational oracle suite.
    VerifyHardy {
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 200.0)]
        emax: f64,
    },
    /// Check the full-line limit.
    LpLimit {
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    HalfLine,
    FullLineLimit,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub e_max: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default)]
    pub center: f64,
    pub scale: Option<f64>,
    #[serde(default = "default_pv")]
    pub pv_scheme: String,
}

fn default_scheme() -> String {
    "rational".into()
}

fn default_pv() -> String {
    "auto".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    pub e0: f64,
    pub gamma: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_report_tol")]
    pub report_tol: f64,
}

fn default_floor() -> f64 {
    DEFAULT_INVERSE_FLOOR
}

fn default_report_tol() -> f64 {
    DEFAULT_REPORT_TOL
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SMatrixConfig {
    /// `[e0, gamma]` pairs.
    #[serde(default)]
    pub extra_poles: Vec<[f64; 2]>,
    #[serde(default)]
    pub phase_a: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    64
}

impl Default for TimesConfig {
    fn default() -> Self {
        TimesConfig { t_max: 200.0, samples: default_samples() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub mode: Mode,
    pub suites: Vec<String>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub resonance: Option<ResonanceConfig>,
    #[serde(default)]
    pub smatrix: SMatrixConfig,
    #[serde(default)]
    pub times: TimesConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("lpscatter-out")
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let sc: Scenario = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read scenario {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.suites.is_empty() {
            return Err(config("suites must list at least one suite"));
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(config(format!("unknown suite '{s}'; expected one of {}", SUITES.join(", "))));
            }
            if self.mode == Mode::FullLineLimit && !matches!(s.as_str(), "hardy-oracle" | "lp-limit") {
                return Err(config(format!("suite '{s}' needs mode = \"half-line\"")));
            }
        }
        self.scheme()?;
        self.pv_scheme()?;
        if !(self.times.t_max > 0.0 && self.times.samples >= 2) {
            return Err(config("times needs t_max > 0 and samples >= 2"));
        }
        let grid = self.build_grid()?;
        if self.needs_resonance() {
            let r = self.resonance.as_ref().ok_or_else(|| config("suites need a [resonance] section"))?;
            let model = self.model()?;
            model.validate()?;
            if !(r.floor >= 0.0 && r.report_tol > 0.0) {
                return Err(config("resonance floor must be >= 0 and report_tol > 0"));
            }
            crate::resonance::check_preconditions(&grid.half_line(), &model.pole)?;
        }
        Ok(())
    }

    fn needs_resonance(&self) -> bool {
        self.suites
            .iter()
            .any(|s| matches!(s.as_str(), "norms" | "background" | "projection-bound" | "eigenvector" | "proof-chain" | "semigroup"))
    }

    pub fn scheme(&self) -> Result<Scheme> {
        match self.grid.scheme.as_str() {
            "uniform" => Ok(Scheme::Uniform),
            "gauss-legendre" => Ok(Scheme::GaussLegendre),
            "rational" => Ok(Scheme::Rational { center: self.grid.center, scale: self.grid.scale }),
            other => Err(config(format!("unknown grid scheme '{other}'; expected uniform, gauss-legendre or rational"))),
        }
    }

    pub fn pv_scheme(&self) -> Result<PvScheme> {
        match self.grid.pv_scheme.as_str() {
            "auto" => Ok(PvScheme::Auto),
            "exact" => Ok(PvScheme::Exact),
            "kernel" => Ok(PvScheme::Kernel),
            "regularized" => Ok(PvScheme::Regularized { eta_factor: 2.0 }),
            other => Err(config(format!("unknown pv_scheme '{other}'"))),
        }
    }

    pub fn build_grid(&self) -> Result<EnergyGrid> {
        make_grid(DomainKind::FullLine, self.grid.n, self.grid.e_max, self.scheme()?)
    }

    pub fn model(&self) -> Result<SMatrixModel> {
        let r = self.resonance.as_ref().ok_or_else(|| config("missing [resonance] section"))?;
        let pole = ResonanceParams::new(r.e0, r.gamma)?;
        let extra_poles = self
            .smatrix
            .extra_poles
            .iter()
            .map(|p| ResonanceParams::new(p[0], p[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(SMatrixModel { pole, extra_poles, phase_a: self.smatrix.phase_a })
    }

    fn report_tol(&self) -> f64 {
        self.resonance.as_ref().map_or(DEFAULT_REPORT_TOL, |r| r.report_tol)
    }

    fn floor(&self) -> f64 {
        self.resonance.as_ref().map_or(DEFAULT_INVERSE_FLOOR, |r| r.floor)
    }
}

/// Rows of one CSV table.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub const BOUND_HEADER: [&str; 12] =
    ["name", "relation", "lhs", "rhs_terms", "rhs_total", "constant_c", "tol", "slack", "pass", "n", "e_max", "extra"];

fn bound_row(r: &BoundReport, extra: &str) -> Vec<String> {
    vec![
        r.name.clone(),
        r.relation.symbol().into(),
        num(r.lhs),
        r.terms_string(),
        num(r.rhs_total),
        r.constant_c.map(num).unwrap_or_default(),
        num(r.tol),
        num(r.slack()),
        r.pass.to_string(),
        r.grid_meta.n.to_string(),
        num(r.grid_meta.e_max),
        extra.into(),
    ]
}

fn bound_table(reports: &[BoundReport]) -> Table {
    let mut t = Table::new(&BOUND_HEADER);
    for r in reports {
        t.push(bound_row(r, ""));
    }
    t
}

/// Outcome of one suite: a table, key results and a verdict.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: String,
    pub pass: bool,
    pub summary: Vec<(String, String)>,
    pub table: Table,
}

impl SuiteOutcome {
    fn new(name: &str, table: Table) -> Self {
        SuiteOutcome { name: name.into(), pass: true, summary: Vec::new(), table }
    }

    fn check(&mut self, key: &str, value: f64, ok: bool) {
        self.summary.push((key.into(), num(value)));
        self.summary.push((format!("{key}_ok"), ok.to_string()));
        self.pass &= ok;
    }

    fn note(&mut self, key: &str, value: String) {
        self.summary.push((key.into(), value));
    }
}

/// Built operators shared by the suites of one run.
pub struct Context {
    pub full: Arc<EnergyGrid>,
    pub hp: HardyProjector,
    pub pair: Option<LyapunovPair>,
    pub states: Option<ResonanceStates>,
    pub model: Option<SMatrixModel>,
}

impl Context {
    pub fn build(sc: &Scenario) -> Result<Context> {
        let full = Arc::new(sc.build_grid()?);
        let pv = sc.pv_scheme()?;
        let half_line_suites = sc.suites.iter().any(|s| !matches!(s.as_str(), "hardy-oracle" | "lp-limit"));
        let (hp, pair) = if sc.mode == Mode::HalfLine && half_line_suites {
            let (hp, pair) = half_line_setup(&full, pv)?;
            (hp, Some(pair))
        } else {
            (build_hardy_projectors(&full, pv)?, None)
        };
        let (states, model) = match (&pair, sc.needs_resonance()) {
            (Some(p), true) => {
                let model = sc.model()?;
                (Some(build_resonance_states_with_floor(p, model.pole, sc.floor())?), Some(model))
            }
            _ => (None, None),
        };
        Ok(Context { full, hp, pair, states, model })
    }

    fn pair(&self) -> Result<&LyapunovPair> {
        self.pair.as_ref().ok_or_else(|| config("suite needs the half-line operators"))
    }

    fn states(&self) -> Result<(&ResonanceStates, &SMatrixModel)> {
        match (&self.states, &self.model) {
            (Some(s), Some(m)) => Ok((s, m)),
            _ => Err(config("suite needs a [resonance] section")),
        }
    }
}

pub fn suite_hardy_oracle(hp: &HardyProjector) -> SuiteOutcome {
    let cases = oracle_suite(hp);
    let mut t = Table::new(&["pole_re", "pole_im", "upper_class", "residual"]);
    for c in &cases {
        t.push(vec![num(c.pole.re), num(c.pole.im), c.upper_class.to_string(), num(c.residual)]);
    }
    let worst = cases.iter().fold(0.0_f64, |m, c| m.max(c.residual));
    let mut out = SuiteOutcome::new("hardy-oracle", t);
    out.note("cases", cases.len().to_string());
    out.note("pv_scheme", hp.scheme.name().into());
    if cases.is_empty() {
        out.note("hint", "no oracle pole is resolved on this grid; raise e_max or refine near the poles".into());
    }
    out.check("max_residual", worst, !cases.is_empty() && worst <= ORACLE_TOL);
    let comp = hp.p_plus.combine(1.0, &hp.p_minus, 1.0).map(|s| {
        let id = crate::operator::OperatorMatrix::identity(hp.grid.clone());
        s.with_flags(crate::operator::Flags::SELF_ADJOINT).distance(&id)
    });
    if let Ok(Ok(d)) = comp {
        out.check("complement_defect", d, d <= 1e-12);
    }
    out
}

pub fn suite_operators(pair: &LyapunovPair) -> Result<SuiteOutcome> {
    let sf = &pair.spectral_f;
    let sb = &pair.spectral_b;
    let mut t = Table::new(&["index", "eig_m_f", "eig_m_b"]);
    for (i, (a, b)) in sf.values.iter().zip(&sb.values).enumerate() {
        t.push(vec![i.to_string(), num(*a), num(*b)]);
    }
    let mut out = SuiteOutcome::new("operators", t);
    let min_f = sf.values.first().copied().unwrap_or(0.0);
    let max_f = sf.values.last().copied().unwrap_or(0.0);
    let raw = pair.defects;
    if min_f > 0.0 || raw.clipped_f > 1e3 * f64::EPSILON {
        out.check("min_eig_m_f", min_f, min_f > 0.0);
    } else {
        out.note("min_eig_m_f", num(min_f));
        out.note("min_eig_m_f_resolved", "false".into());
    }
    out.check("max_eig_m_f", max_f, max_f <= 1.0 + SPECTRUM_TOL);
    out.check("clipped_f", raw.clipped_f, raw.clipped_f <= SPECTRUM_TOL);
    out.note("hermiticity_f", num(raw.hermiticity_f));
    out.note("hermiticity_b", num(raw.hermiticity_b));
    let comp = pair.complement_defect()?;
    out.check("complement_defect", comp, comp <= COMPLEMENT_TOL);
    let comm = pair.commutator_defect()?;
    out.check("commutator_defect", comm, comm <= COMPLEMENT_TOL);
    out.note("lambda_f_condition", num(pair.lambda_f_condition()));
    Ok(out)
}

/// Largest increase of consecutive samples.
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0]))
}

pub fn suite_lyapunov(pair: &LyapunovPair, t_max: f64, samples: usize, seed: u64) -> Result<SuiteOutcome> {
    let fwd = linear_times(0.0, t_max, samples);
    let bwd = linear_times(-t_max, 0.0, samples);
    let grid = &pair.grid_half;
    let reference = reference_packet(grid);
    let tau_f = lyapunov_trace(&pair.m_f, &reference, &fwd)?;
    let tau_b = lyapunov_trace(&pair.m_b, &reference, &bwd)?;
    let mut t = Table::new(&["t", "tau_m_f", "t_back", "tau_m_b"]);
    for k in 0..samples {
        t.push(vec![num(fwd[k]), num(tau_f[k]), num(bwd[k]), num(tau_b[k])]);
    }
    let mut out = SuiteOutcome::new("lyapunov", t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_f = 0.0_f64;
    let mut worst_b = 0.0_f64;
    for _ in 0..RANDOM_STATES {
        let psi = random_packet(grid, &mut rng);
        worst_f = worst_f.max(max_increase(&lyapunov_trace(&pair.m_f, &psi, &fwd)?));
        let mut back = lyapunov_trace(&pair.m_b, &psi, &bwd)?;
        back.reverse();
        worst_b = worst_b.max(max_increase(&back));
    }
    out.check("forward_violation", worst_f, worst_f <= MONOTONE_TOL);
    out.check("backward_violation", worst_b, worst_b <= MONOTONE_TOL);
    let rf = tau_f[samples - 1] / tau_f[0];
    out.check("forward_decay_ratio", rf, rf <= DECAY_RATIO);
    let rb = tau_b[0] / tau_b[samples - 1];
    out.check("backward_decay_ratio", rb, rb <= DECAY_RATIO);
    Ok(out)
}

pub fn suite_semigroup(pair: &LyapunovPair, model: &SMatrixModel, t_max: f64, seed: u64) -> Result<SuiteOutcome> {
    let grid = &pair.grid_half;
    let phi = reference_packet(grid);
    let times = linear_times(0.0, t_max / 2.0, 9);
    let comp = evolution::z_forward_composition_defect(pair, &phi, &times)?;
    let mut t = Table::new(&["t", "z_f_norm", "z_b_norm"]);
    let mut norms_f = Vec::new();
    let mut norms_b = Vec::new();
    for &s in &linear_times(0.0, t_max, 33) {
        let f = z_forward(pair, &phi, s)?.norm();
        let b = z_backward(pair, &phi, -s)?.norm();
        norms_f.push(f);
        norms_b.push(b);
        t.push(vec![num(s), num(f), num(b)]);
    }
    let mut out = SuiteOutcome::new("semigroup", t);
    out.check("z_f_composition_defect", comp, comp <= SEMIGROUP_TOL);
    let inc_f = max_increase(&norms_f);
    out.check("z_f_norm_increase", inc_f, inc_f <= 1e-12);
    let inc_b = max_increase(&norms_b);
    out.check("z_b_norm_increase", inc_b, inc_b <= 1e-12);
    let z = ZApp::new(pair, model);
    let psi = random_packet(grid, &mut ChaCha8Rng::seed_from_u64(seed));
    let d = z_app_defect(&z, &psi, 10.0, 10.0)?;
    out.note("z_app_contraction_ok", d.contraction_ok.to_string());
    out.pass &= d.contraction_ok;
    if model.is_pure() {
        out.note("z_app_defect", num(d.defect));
    } else {
        out.check("z_app_defect", d.defect, d.defect > NON_SEMIGROUP_MIN);
    }
    Ok(out)
}

pub fn suite_norms(states: &ResonanceStates) -> SuiteOutcome {
    let ResonanceParams { e0, gamma } = states.params;
    let app = closed_form::app_norm_sqr(e0, gamma);
    let res = closed_form::res_norm_sqr(gamma);
    let r = closed_form::ratio(e0, gamma);
    let mut t = Table::new(&["quantity", "numeric", "closed_form", "relative_error"]);
    let rows = [
        ("norm_app_sqr", states.norm_app_sqr, app),
        ("norm_res_sqr", states.norm_res_sqr, res),
        ("ratio", states.ratio, r),
    ];
    for (k, v, c) in rows {
        t.push(vec![k.into(), num(v), num(c), num((v - c).abs() / c)]);
    }
    let mut out = SuiteOutcome::new("norms", t);
    out.check("norm_app_rel_error", (states.norm_app_sqr - app).abs() / app, (states.norm_app_sqr - app).abs() <= 5e-3 * app);
    out.check("norm_res_rel_error", (states.norm_res_sqr - res).abs() / res, (states.norm_res_sqr - res).abs() <= 3e-2 * res);
    out.check("res_dominates_app", states.norm_res_sqr - states.norm_app_sqr, states.norm_res_sqr >= states.norm_app_sqr);
    out.note("floor", num(states.floor));
    out.note("discarded", states.discarded.to_string());
    out.note("conditioning", num(states.conditioning));
    out
}

pub fn suite_background(states: &ResonanceStates, t_max: f64, samples: usize, tol: f64) -> Result<SuiteOutcome> {
    let times = linear_times(0.0, t_max, samples);
    let recs = survival_decomposition(states, &times)?;
    let bound = closed_form::background_bound(states.ratio);
    let mut t = Table::new(&["t", "amplitude_re", "amplitude_im", "pole_re", "pole_im", "background_abs", "bound"]);
    for r in &recs {
        t.push(vec![
            num(r.t),
            num(r.amplitude.re),
            num(r.amplitude.im),
            num(r.pole_term.re),
            num(r.pole_term.im),
            num(r.background.norm()),
            num(bound),
        ]);
    }
    let worst = recs.iter().fold(0.0_f64, |m, r| m.max(r.background.norm()));
    let mut out = SuiteOutcome::new("background", t);
    out.check("max_background", worst, worst <= bound * (1.0 + tol));
    out.check("background_at_zero", recs[0].background.norm(), recs[0].background.norm() <= 1e-10);
    out.note("bound", num(bound));
    Ok(out)
}

fn bound_suite(name: &str, reports: Vec<BoundReport>) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(name, bound_table(&reports));
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    out.note("reports", reports.len().to_string());
    out.note("failed", failed.join(";"));
    out.pass = failed.is_empty();
    out
}

pub fn suite_projection_bound(states: &ResonanceStates, pair: &LyapunovPair, model: &SMatrixModel, tol: f64) -> Result<SuiteOutcome> {
    let r = projection_bound_report(states, pair, model, tol)?;
    let mut out = bound_suite("projection-bound", vec![r.clone()]);
    out.note("term1", num(r.term("term1").unwrap_or(f64::NAN)));
    out.note("term2", num(r.term("term2").unwrap_or(f64::NAN)));
    out.note("lhs", num(r.lhs));
    Ok(out)
}

pub fn suite_eigenvector(
    ctx: &Context,
    states: &ResonanceStates,
    model: &SMatrixModel,
    t_max: f64,
    samples: usize,
    tol: f64,
) -> Result<SuiteOutcome> {
    let pair = ctx.pair()?;
    let times = linear_times(0.0, t_max, samples);
    let reports = eigenvector_deviation(states, pair, model, &times, tol)?;
    let polar = PolarForward::build(&ctx.hp, pair)?;
    let residual = eigen_relation_residual(states, &polar, &times)?;
    let mut t = Table::new(&BOUND_HEADER);
    for (r, e) in reports.iter().zip(&residual) {
        t.push(bound_row(r, &format!("eigen_relation_residual={}", num(*e))));
    }
    let mut out = SuiteOutcome::new("eigenvector", t);
    out.pass = reports.iter().all(|r| r.pass);
    out.note("failed", reports.iter().filter(|r| !r.pass).count().to_string());
    out.note("max_eigen_relation_residual", num(residual.iter().fold(0.0_f64, |m, v| m.max(*v))));
    Ok(out)
}

pub fn suite_transition(pair: &LyapunovPair, t_max: f64, samples: usize) -> Result<SuiteOutcome> {
    let psi = reference_packet(&pair.grid_half);
    let times = linear_times(-t_max, t_max, 2 * samples - 1);
    let mut t = Table::new(&["t", "lambda_f_part", "one_minus_lambda_f_part", "one_minus_lambda_b_part", "lambda_b_part"]);
    let mut lf = Vec::new();
    let mut olb = Vec::new();
    for &s in &times {
        let (fb, ff) = transition_decompose(pair, &psi, s, Direction::Forward)?;
        let (bb, bf) = transition_decompose(pair, &psi, s, Direction::Backward)?;
        lf.push(fb.norm());
        olb.push(bb.norm());
        t.push(vec![num(s), num(fb.norm()), num(ff.norm()), num(bb.norm()), num(bf.norm())]);
    }
    let mut out = SuiteOutcome::new("transition", t);
    let mid = samples - 1;
    let ratio_f = lf[times.len() - 1] / lf[mid];
    out.check("lambda_f_decay_ratio", ratio_f, ratio_f <= DECAY_RATIO);
    let peak = lf.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0;
    let inc = max_increase(&lf[peak..]);
    out.check("lambda_f_increase_after_peak", inc, inc <= MONOTONE_TOL);
    let ratio_b = olb[times.len() - 1] / olb[mid];
    out.check("one_minus_lambda_b_decay_ratio", ratio_b, ratio_b <= DECAY_RATIO);
    Ok(out)
}

pub fn suite_lp_limit(hp: &HardyProjector, seed: u64) -> Result<SuiteOutcome> {
    let pair = LyapunovPair::build(hp, &Sigma::FullLine)?;
    let idem = pair.m_f.idempotence_defect()?;
    let idem_b = pair.m_b.idempotence_defect()?;
    let phi = random_packet(&hp.grid, &mut ChaCha8Rng::seed_from_u64(seed));
    let times = linear_times(0.0, 20.0, 9);
    let comp = evolution::lp_composition_defect(hp, &phi, &times)?;
    let aliasing = evolution::lp_matrix_defect(hp, &phi, 5.0, 5.0)?;
    let model = SMatrixModel::perturbed(ResonanceParams { e0: 1.0, gamma: 0.1 });
    let mut z_dist = 0.0_f64;
    for s in [0.0, 5.0] {
        let z = evolution::build_z_app(&pair, &model, s)?;
        z_dist = z_dist.max(z.distance(&evolution::lp_semigroup_matrix(hp, &model, s)?)?);
    }
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("m_plus_idempotence", idem),
        ("m_minus_idempotence", idem_b),
        ("z_composition_defect", comp),
        ("matrix_aliasing_defect", aliasing),
        ("z_app_minus_lp_semigroup", z_dist),
    ] {
        t.push(vec![k.into(), num(v)]);
    }
    let mut out = SuiteOutcome::new("lp-limit", t);
    out.check("m_plus_idempotence", idem, idem <= COMPLEMENT_TOL);
    out.check("m_minus_idempotence", idem_b, idem_b <= COMPLEMENT_TOL);
    out.check("z_composition_defect", comp, comp <= SEMIGROUP_TOL);
    out.check("z_app_minus_lp_semigroup", z_dist, z_dist <= COMPLEMENT_TOL);
    out.note("matrix_aliasing_defect", num(aliasing));
    Ok(out)
}

pub fn run_named_suite(name: &str, sc: &Scenario, ctx: &Context) -> Result<SuiteOutcome> {
    let tol = sc.report_tol();
    let TimesConfig { t_max, samples } = sc.times;
    match name {
        "hardy-oracle" => Ok(suite_hardy_oracle(&ctx.hp)),
        "operators" => suite_operators(ctx.pair()?),
        "lyapunov" => suite_lyapunov(ctx.pair()?, t_max, samples, sc.seed),
        "semigroup" => suite_semigroup(ctx.pair()?, ctx.states()?.1, t_max, sc.seed),
        "norms" => Ok(suite_norms(ctx.states()?.0)),
        "background" => suite_background(ctx.states()?.0, t_max, samples, tol),
        "projection-bound" => {
            let (st, m) = ctx.states()?;
            suite_projection_bound(st, ctx.pair()?, m, tol)
        }
        "eigenvector" => {
            let (st, m) = ctx.states()?;
            suite_eigenvector(ctx, st, m, t_max, samples, tol)
        }
        "proof-chain" => {
            let (st, m) = ctx.states()?;
            Ok(bound_suite("proof-chain", proof_chain_report(st, ctx.pair()?, &ctx.hp, m, tol)?))
        }
        "transition" => suite_transition(ctx.pair()?, t_max, samples),
        "lp-limit" => suite_lp_limit(&ctx.hp, sc.seed),
        other => Err(config(format!("unknown suite '{other}'"))),
    }
}

fn manifest(sc: &Scenario, extra: &[(String, String)]) -> String {
    let mut m = BTreeMap::new();
    m.insert("tool".to_string(), "lpscatter".to_string());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("seed".into(), sc.seed.to_string());
    m.insert("mode".into(), format!("{:?}", sc.mode));
    m.insert("grid.n".into(), sc.grid.n.to_string());
    m.insert("grid.e_max".into(), num(sc.grid.e_max));
    m.insert("grid.scheme".into(), sc.grid.scheme.clone());
    m.insert("grid.center".into(), num(sc.grid.center));
    m.insert("grid.scale".into(), sc.grid.scale.map(num).unwrap_or_else(|| "auto".into()));
    m.insert("grid.pv_scheme".into(), sc.grid.pv_scheme.clone());
    if let Some(r) = &sc.resonance {
        m.insert("resonance.e0".into(), num(r.e0));
        m.insert("resonance.gamma".into(), num(r.gamma));
        m.insert("resonance.floor".into(), num(r.floor));
    }
    m.insert("smatrix.extra_poles".into(), format!("{:?}", sc.smatrix.extra_poles));
    m.insert("smatrix.phase_a".into(), num(sc.smatrix.phase_a));
    m.insert("times.t_max".into(), num(sc.times.t_max));
    m.insert("times.samples".into(), sc.times.samples.to_string());
    m.insert("tol.report".into(), num(sc.report_tol()));
    m.insert("tol.oracle".into(), num(ORACLE_TOL));
    m.insert("tol.complement".into(), num(COMPLEMENT_TOL));
    m.insert("tol.spectrum".into(), num(SPECTRUM_TOL));
    m.insert("tol.monotone".into(), num(MONOTONE_TOL));
    m.insert("tol.semigroup".into(), num(SEMIGROUP_TOL));
    m.insert("tol.decay_ratio".into(), num(DECAY_RATIO));
    for (k, v) in extra {
        m.insert(k.clone(), v.clone());
    }
    m.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}={v}");
        s
    })
}

/// Runs every suite of a scenario and writes one table per suite, a summary and a manifest.
pub fn run_suite(sc: &Scenario, out_dir: &Path) -> Result<Vec<SuiteOutcome>> {
    sc.validate()?;
    fs::create_dir_all(out_dir)?;
    let ctx = Context::build(sc)?;
    let mut outcomes = Vec::new();
    for name in &sc.suites {
        let o = run_named_suite(name, sc, &ctx)?;
        o.table.write(&out_dir.join(format!("{name}.csv")))?;
        outcomes.push(o);
    }
    write_summary(out_dir, &outcomes)?;
    let verdicts: Vec<(String, String)> =
        outcomes.iter().map(|o| (format!("suite.{}", o.name), if o.pass { "pass" } else { "fail" }.into())).collect();
    fs::write(out_dir.join("manifest.txt"), manifest(sc, &verdicts))?;
    Ok(outcomes)
}

fn write_summary(out_dir: &Path, outcomes: &[SuiteOutcome]) -> Result<()> {
    let mut s = String::new();
    for o in outcomes {
        let _ = writeln!(s, "[{}] {}", o.name, if o.pass { "PASS" } else { "FAIL" });
        for (k, v) in &o.summary {
            let _ = writeln!(s, "  {k} = {v}");
        }
    }
    fs::write(out_dir.join("summary.txt"), s)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    GammaRatio,
    N,
    EMax,
    Model,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Axis> {
        match s {
            "gamma_ratio" => Ok(Axis::GammaRatio),
            "n" => Ok(Axis::N),
            "e_max" => Ok(Axis::EMax),
            "model" => Ok(Axis::Model),
            other => Err(Error::Parameter(format!("unknown sweep axis '{other}'; expected gamma_ratio, n, e_max or model"))),
        }
    }
}

pub const SWEEP_HEADER: [&str; 20] = [
    "axis",
    "value",
    "n",
    "e_max",
    "e0",
    "gamma",
    "model",
    "norm_app_sqr",
    "norm_app_closed",
    "norm_res_sqr",
    "norm_res_closed",
    "norm_res_error",
    "ratio",
    "term1",
    "term2",
    "lhs",
    "rhs_total",
    "constant_c",
    "pass",
    "conditioning",
];

fn parse_values(axis: Axis, values: &str) -> Result<Vec<String>> {
    let vals: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if vals.is_empty() {
        return Err(Error::Parameter("sweep needs at least one value".into()));
    }
    for v in &vals {
        let ok = match axis {
            Axis::Model => matches!(v.as_str(), "pure" | "perturbed" | "scenario"),
            Axis::N => v.parse::<usize>().is_ok(),
            _ => v.parse::<f64>().is_ok(),
        };
        if !ok {
            return Err(Error::Parameter(format!("bad sweep value '{v}'")));
        }
    }
    Ok(vals)
}

fn sweep_point(base: &Scenario, axis: Axis, value: &str, shared: Option<&LyapunovPair>) -> Result<Vec<String>> {
    let mut sc = base.clone();
    let r = sc.resonance.clone().ok_or_else(|| config("sweep needs a [resonance] section"))?;
    let mut model_name = "scenario";
    match axis {
        Axis::GammaRatio => {
            let g: f64 = value.parse().map_err(|_| Error::Parameter(format!("bad ratio '{value}'")))?;
            sc.resonance.as_mut().expect("checked").gamma = g * r.e0;
        }
        Axis::N => sc.grid.n = value.parse().map_err(|_| Error::Parameter(format!("bad n '{value}'")))?,
        Axis::EMax => sc.grid.e_max = value.parse().map_err(|_| Error::Parameter(format!("bad e_max '{value}'")))?,
        Axis::Model => model_name = if value == "pure" { "pure" } else if value == "perturbed" { "perturbed" } else { "scenario" },
    }
    let mut model = sc.model()?;
    match model_name {
        "pure" => model = SMatrixModel::pure(model.pole),
        "perturbed" => model = SMatrixModel::perturbed(model.pole),
        _ => {}
    }
    let owned;
    let pair = match shared {
        Some(p) => p,
        None => {
            let full = Arc::new(sc.build_grid()?);
            owned = half_line_setup(&full, sc.pv_scheme()?)?.1;
            &owned
        }
    };
    let states = build_resonance_states_with_floor(pair, model.pole, sc.floor())?;
    let rep = projection_bound_report(&states, pair, &model, sc.report_tol())?;
    let ResonanceParams { e0, gamma } = model.pole;
    let app = closed_form::app_norm_sqr(e0, gamma);
    let res = closed_form::res_norm_sqr(gamma);
    Ok(vec![
        format!("{axis:?}"),
        value.to_string(),
        pair.full.n().to_string(),
        num(pair.full.e_max()),
        num(e0),
        num(gamma),
        model_name.to_string(),
        num(states.norm_app_sqr),
        num(app),
        num(states.norm_res_sqr),
        num(res),
        num((states.norm_res_sqr - res).abs() / res),
        num(states.ratio),
        num(rep.term("term1").unwrap_or(f64::NAN)),
        num(rep.term("term2").unwrap_or(f64::NAN)),
        num(rep.lhs),
        num(rep.rhs_total),
        rep.constant_c.map(num).unwrap_or_default(),
        rep.pass.to_string(),
        num(states.conditioning),
    ])
}

/// One row per axis value, in input order regardless of worker count.
pub fn run_sweep(base: &Scenario, axis: Axis, values: &str) -> Result<Table> {
    let vals = parse_values(axis, values)?;
    if base.resonance.is_none() {
        return Err(config("sweep needs a [resonance] section"));
    }
    let shared = match axis {
        Axis::GammaRatio | Axis::Model => {
            let full = Arc::new(base.build_grid()?);
            Some(half_line_setup(&full, base.pv_scheme()?)?.1)
        }
        Axis::N | Axis::EMax => None,
    };
    let rows: Vec<Result<Vec<String>>> = vals.par_iter().map(|v| sweep_point(base, axis, v, shared.as_ref())).collect();
    let mut t = Table::new(&SWEEP_HEADER);
    for r in rows {
        t.push(r?);
    }
    Ok(t)
}

fn scenario_for_hardy(n: usize, e_max: f64) -> Scenario {
    Scenario {
        mode: Mode::FullLineLimit,
        suites: vec!["hardy-oracle".into()],
        output_dir: default_output(),
        seed: 0,
        grid: GridConfig { n, e_max, scheme: default_scheme(), center: 0.0, scale: None, pv_scheme: default_pv() },
        resonance: None,
        smatrix: SMatrixConfig::default(),
        times: TimesConfig::default(),
    }
}

fn verdict(outcomes: &[SuiteOutcome]) -> i32 {
    if outcomes.iter().all(|o| o.pass) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn print_outcomes(outcomes: &[SuiteOutcome], out_dir: &Path) {
    for o in outcomes {
        println!("{} {}", if o.pass { "PASS" } else { "FAIL" }, o.name);
    }
    println!("out_dir={}", out_dir.display());
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be at least 1".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Run { scenario } => {
            let mut sc = Scenario::load(&scenario)?;
            if let Some(s) = cli.seed {
                sc.seed = s;
            }
            let out = cli.out.unwrap_or_else(|| sc.output_dir.clone());
            let outcomes = run_suite(&sc, &out)?;
            print_outcomes(&outcomes, &out);
            Ok(verdict(&outcomes))
        }
        Command::Sweep { scenario, axis, values } => {
            let mut sc = Scenario::load(&scenario)?;
            if let Some(s) = cli.seed {
                sc.seed = s;
            }
            let axis = Axis::parse(&axis)?;
            let out = cli.out.unwrap_or_else(|| sc.output_dir.clone());
            fs::create_dir_all(&out)?;
            let table = run_sweep(&sc, axis, &values)?;
            table.write(&out.join("sweep.csv"))?;
            let pass = table.rows.iter().all(|r| r[18] == "true");
            let extra = vec![("sweep.axis".to_string(), format!("{axis:?}")), ("sweep.values".into(), values.clone())];
            fs::write(out.join("manifest.txt"), manifest(&sc, &extra))?;
            println!("{} sweep rows={}", if pass { "PASS" } else { "FAIL" }, table.rows.len());
            println!("out_dir={}", out.display());
            Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::VerifyHardy { n, emax } => {
            let mut sc = scenario_for_hardy(n, emax);
            sc.seed = cli.seed.unwrap_or(0);
            let out = cli.out.unwrap_or_else(|| sc.output_dir.clone());
            let outcomes = run_suite(&sc, &out)?;
            print_outcomes(&outcomes, &out);
            Ok(verdict(&outcomes))
        }
        Command::LpLimit { n } => {
            let mut sc = scenario_for_hardy(n, 200.0);
            sc.suites = vec!["lp-limit".into()];
            sc.seed = cli.seed.unwrap_or(0);
            let out = cli.out.unwrap_or_else(|| sc.output_dir.clone());
            let outcomes = run_suite(&sc, &out)?;
            print_outcomes(&outcomes, &out);
            Ok(verdict(&outcomes))
        }
    }
}
