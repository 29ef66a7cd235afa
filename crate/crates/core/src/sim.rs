//! Monte-Carlo logical-error-rate harness: configuration, trial loop,
//! logical-error classification, CSV and SVG output, self-checks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{reconstruct_data_error, NmsConfig, NmsDecoder};
use crate::circuit::{
    build_circuit, hook_marginal, propagate, sample_faults, sample_hooks_only, syndrome, trial_rng,
    FaultSet, MeasurementCircuit, NoiseParams,
};
use crate::code::{build_bb_code, BBSpec, CodeError, CssCode, TermRef};
use crate::compile::{
    build_circuit_level_graph, build_p_matrix, canonical_g, compile_joint, group_segments,
    CircuitLevelGraph, CompileError, JointGraph,
};
use crate::gf2::{BinMatrix, BinVector, RowBasis};
use crate::scalar::LLR_MAX;
use crate::ta::{DecoderConfig, PriorMode, TaDecoder};
use crate::trellis::{bcjr, oracle, Trellis};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot error: {0}")]
    Plot(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecoderKind {
    #[serde(rename = "TA")]
    Ta,
    #[serde(rename = "NMS")]
    Nms,
    #[serde(rename = "BPOSD0")]
    Bposd0,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Ta => "TA",
            DecoderKind::Nms => "NMS",
            DecoderKind::Bposd0 => "BPOSD0",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    /// `example-n5`, `bb90` or `gross144`; the remaining keys are ignored when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em: Option<u32>,
    /// Exponent pairs `[i, j]` of `x^i y^j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_terms: Option<Vec<[u32; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_terms: Option<Vec<[u32; 2]>>,
    /// CNOT term order, e.g. `["a0", "b0", "a1", "b1"]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl CodeSection {
    pub fn to_spec(&self) -> Result<BBSpec, ConfigError> {
        if let Some(p) = &self.preset {
            return BBSpec::preset(p)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown code preset {p:?}")));
        }
        let missing = |k: &str| ConfigError::Invalid(format!("[code] needs `{k}` or `preset`"));
        let pairs = |v: &[[u32; 2]]| v.iter().map(|t| (t[0], t[1])).collect::<Vec<_>>();
        let mut spec = BBSpec::new(
            self.name.as_deref().unwrap_or("custom"),
            self.ell.ok_or_else(|| missing("ell"))?,
            self.em.ok_or_else(|| missing("em"))?,
            &pairs(self.a_terms.as_ref().ok_or_else(|| missing("a_terms"))?),
            &pairs(self.b_terms.as_ref().ok_or_else(|| missing("b_terms"))?),
        );
        if let Some(s) = &self.schedule {
            let order = s
                .iter()
                .map(|t| t.parse::<TermRef>())
                .collect::<Result<Vec<_>, _>>()?;
            spec = spec.with_schedule(order);
        }
        if let (Some(n), Some(k)) = (self.n, self.k) {
            spec = spec.with_expected(n, k);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub p_values: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn d_300() -> usize {
    300
}
fn d_900() -> usize {
    900
}
fn d_beta() -> f64 {
    0.875
}
fn d_llr() -> f64 {
    LLR_MAX
}
fn d_prior() -> PriorMode {
    PriorMode::Variable
}
fn d_true() -> bool {
    true
}
fn d_list() -> Vec<DecoderKind> {
    vec![DecoderKind::Ta, DecoderKind::Nms, DecoderKind::Bposd0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodersSection {
    #[serde(default = "d_list")]
    pub list: Vec<DecoderKind>,
    #[serde(default = "d_300")]
    pub ta_max_iters: usize,
    /// Run all three TA members; otherwise only the first.
    #[serde(default = "d_true")]
    pub diversity: bool,
    #[serde(default = "d_prior")]
    pub prior_mode: PriorMode,
    #[serde(default = "d_900")]
    pub nms_max_iters: usize,
    #[serde(default = "d_300")]
    pub bposd_bp_iters: usize,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_llr")]
    pub llr_max: f64,
}

impl Default for DecodersSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl DecodersSection {
    pub fn ta_config(&self) -> DecoderConfig {
        DecoderConfig {
            max_iters: self.ta_max_iters,
            beta: self.beta,
            llr_max: self.llr_max,
            prior_mode: self.prior_mode,
            ..DecoderConfig::default()
        }
    }

    pub fn nms_config(&self, kind: DecoderKind) -> NmsConfig {
        NmsConfig {
            max_iters: match kind {
                DecoderKind::Bposd0 => self.bposd_bp_iters,
                _ => self.nms_max_iters,
            },
            beta: self.beta,
            llr_max: self.llr_max,
        }
    }
}

fn d_min_fail() -> u64 {
    10
}
fn d_max_trials() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    #[serde(default = "d_min_fail")]
    pub min_failures: u64,
    #[serde(default = "d_max_trials")]
    pub max_trials: u64,
    /// Worker threads; absent means all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for StoppingSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

fn d_dir() -> PathBuf {
    PathBuf::from("results")
}
fn d_csv() -> String {
    "ler.csv".into()
}
fn d_plot() -> Option<String> {
    Some("ler.svg".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
    #[serde(default = "d_csv")]
    pub csv: String,
    #[serde(default = "d_plot", skip_serializing_if = "Option::is_none")]
    pub plot: Option<String>,
    /// Write wall-clock seconds into the CSV. Off keeps output byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub decoders: DecodersSection,
    #[serde(default)]
    pub stopping: StoppingSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        build_bb_code(&self.code.to_spec()?)?;
        if self.noise.p_values.is_empty() {
            return bad("[noise] p_values is empty".into());
        }
        if let Some(p) = self.noise.p_values.iter().find(|&&p| !(p > 0.0 && p < 0.5)) {
            return bad(format!("p = {p} outside (0, 0.5)"));
        }
        if self.decoders.list.is_empty() {
            return bad("[decoders] list is empty".into());
        }
        if !(self.decoders.beta > 0.0 && self.decoders.beta <= 1.0) {
            return bad(format!("beta = {} outside (0, 1]", self.decoders.beta));
        }
        if self.decoders.ta_max_iters == 0 || self.decoders.nms_max_iters == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        if self.stopping.min_failures == 0 || self.stopping.max_trials == 0 {
            return bad("min_failures and max_trials must be at least 1".into());
        }
        if self.stopping.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }
}

/// One (code, decoder, p) point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LerRecord {
    pub code: String,
    pub decoder: String,
    pub p: f64,
    pub trials: u64,
    pub failures: u64,
    pub ler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_iters: f64,
    pub seconds: f64,
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let (k, n) = (k as f64, n as f64);
    let ph = k / n;
    let denom = 1.0 + z * z / n;
    let center = (ph + z * z / (2.0 * n)) / denom;
    let half = z / denom * (ph * (1.0 - ph) / n + z * z / (4.0 * n * n)).sqrt();
    let lo = if k == 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Residual test against `h_z` and the stabilizer row space of `h_x`.
pub struct LogicalChecker {
    h_z: BinMatrix,
    stabilizers: RowBasis,
}

impl LogicalChecker {
    pub fn new(code: &CssCode) -> Self {
        Self {
            h_z: code.h_z.clone(),
            stabilizers: RowBasis::new(&code.h_x),
        }
    }

    pub fn is_logical_error(&self, e: &BinVector, e_hat: &BinVector) -> bool {
        let r = e.xor(e_hat);
        !self.h_z.mul_vec(&r).expect("length n").is_zero() || !self.stabilizers.contains(&r)
    }
}

pub fn is_logical_error(code: &CssCode, e: &BinVector, e_hat: &BinVector) -> bool {
    LogicalChecker::new(code).is_logical_error(e, e_hat)
}

/// Everything a trial needs at one noise level.
pub struct Bench {
    pub circ: MeasurementCircuit,
    pub noise: NoiseParams,
    pub joint: JointGraph,
    pub circuit_graph: CircuitLevelGraph,
    pub checker: LogicalChecker,
}

impl Bench {
    pub fn new(circ: &MeasurementCircuit, noise: NoiseParams) -> Result<Self, SimError> {
        Ok(Self {
            joint: compile_joint(circ, noise)?,
            circuit_graph: build_circuit_level_graph(circ, noise),
            checker: LogicalChecker::new(&circ.code),
            circ: circ.clone(),
            noise,
        })
    }
}

enum Worker<'a> {
    Ta(TaDecoder<'a, f64>, DecoderConfig, bool),
    Nms(NmsDecoder<'a, f64>, NmsConfig, bool),
}

impl<'a> Worker<'a> {
    fn new(bench: &'a Bench, kind: DecoderKind, dec: &DecodersSection) -> Self {
        match kind {
            DecoderKind::Ta => Worker::Ta(
                TaDecoder::new(&bench.joint),
                dec.ta_config(),
                dec.diversity,
            ),
            _ => Worker::Nms(
                NmsDecoder::new(&bench.circuit_graph),
                dec.nms_config(kind),
                kind == DecoderKind::Bposd0,
            ),
        }
    }

    /// `(estimate, iterations)`.
    fn decode(&mut self, bench: &Bench, s: &BinVector) -> (BinVector, usize) {
        match self {
            Worker::Ta(d, cfg, diversity) => {
                let r = if *diversity {
                    d.diversity_decode(s, cfg)
                } else {
                    d.decode(s, cfg)
                };
                (r.estimate, r.iters_used)
            }
            Worker::Nms(d, cfg, osd) => {
                let r = if *osd { d.decode_bposd(s, cfg) } else { d.decode(s, cfg) };
                (reconstruct_data_error(&bench.circuit_graph, &r.hard), r.iters_used)
            }
        }
    }
}

/// Outcome of trial `t`: `(logical failure, iterations)`.
fn run_trial(bench: &Bench, w: &mut Worker<'_>, seed: u64, t: u64) -> (bool, usize) {
    let mut rng = trial_rng(seed, t);
    let e = propagate(&bench.circ, &sample_faults(&bench.circ, bench.noise, &mut rng));
    let s = syndrome(&bench.circ.code, &e);
    let (e_hat, iters) = w.decode(bench, &s);
    (bench.checker.is_logical_error(&e, &e_hat), iters)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stopping {
    pub min_failures: u64,
    pub max_trials: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResult {
    pub trials: u64,
    pub failures: u64,
    pub mean_iters: f64,
}

/// Runs trials `0, 1, 2, ...` until `failures ≥ min_failures` or
/// `trials = max_trials`. Trials are evaluated in fixed-size chunks on the
/// current rayon pool and counted in index order, so the result does not
/// depend on the worker count.
pub fn run_point(
    bench: &Bench,
    kind: DecoderKind,
    dec: &DecodersSection,
    stop: Stopping,
    seed: u64,
) -> PointResult {
    let (mut trials, mut failures, mut iters) = (0u64, 0u64, 0u64);
    let mut chunk = 256u64;
    'outer: while trials < stop.max_trials && failures < stop.min_failures {
        let end = (trials + chunk).min(stop.max_trials);
        let outcomes: Vec<(bool, usize)> = (trials..end)
            .into_par_iter()
            .map_init(
                || Worker::new(bench, kind, dec),
                |w, t| run_trial(bench, w, seed, t),
            )
            .collect();
        for (fail, it) in outcomes {
            trials += 1;
            failures += fail as u64;
            iters += it as u64;
            if failures >= stop.min_failures {
                break 'outer;
            }
        }
        chunk = (chunk * 2).min(1 << 16);
    }
    PointResult {
        trials,
        failures,
        mean_iters: if trials == 0 {
            0.0
        } else {
            iters as f64 / trials as f64
        },
    }
}

pub fn make_record(code: &str, kind: DecoderKind, p: f64, r: PointResult, seconds: f64) -> LerRecord {
    let (ci_low, ci_high) = wilson_interval(r.failures, r.trials);
    LerRecord {
        code: code.to_string(),
        decoder: kind.name().to_string(),
        p,
        trials: r.trials,
        failures: r.failures,
        ler: if r.trials == 0 {
            0.0
        } else {
            r.failures as f64 / r.trials as f64
        },
        ci_low,
        ci_high,
        mean_iters: r.mean_iters,
        seconds,
    }
}

/// Runs every (p, decoder) point of `cfg`. All decoders at one `p` see the
/// same fault samples. `progress` is called after each point.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&LerRecord),
) -> Result<Vec<LerRecord>, SimError> {
    let spec = cfg
        .code
        .to_spec()
        .map_err(|e| SimError::Pool(format!("config: {e}")))?;
    let code = build_bb_code(&spec).map_err(|e| SimError::Pool(format!("code: {e}")))?;
    let circ = build_circuit(&code);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.stopping.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| SimError::Pool(e.to_string()))?;
    let stop = Stopping {
        min_failures: cfg.stopping.min_failures,
        max_trials: cfg.stopping.max_trials,
    };
    let mut records = Vec::new();
    for &p in &cfg.noise.p_values {
        let noise = NoiseParams::new(p).map_err(|e| SimError::Pool(e.to_string()))?;
        let bench = Bench::new(&circ, noise)?;
        for &kind in &cfg.decoders.list {
            let start = Instant::now();
            let r = pool.install(|| run_point(&bench, kind, &cfg.decoders, stop, cfg.noise.seed));
            let secs = if cfg.output.timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            let rec = make_record(&spec.name, kind, p, r, secs);
            progress(&rec);
            records.push(rec);
        }
    }
    Ok(records)
}

pub fn csv_string(records: &[LerRecord]) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(records: &[LerRecord], path: &Path) -> Result<(), SimError> {
    std::fs::write(path, csv_string(records)?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<LerRecord>, SimError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Decades `[floor(log10 lo), ceil(log10 hi)]`, at least one decade wide.
fn decades(lo: f64, hi: f64) -> (i32, i32) {
    let a = lo.log10().floor() as i32;
    let b = (hi.log10().ceil() as i32).max(a + 1);
    (a, b)
}

/// Log-log LER-vs-p chart as a standalone SVG, one series per decoder.
/// Zero-failure points are omitted since they have no position on a log axis.
pub fn plot_svg(records: &[LerRecord]) -> Result<String, SimError> {
    if records.is_empty() {
        return Err(SimError::Plot("no records".into()));
    }
    let (w, h, left, right, top, bottom) = (720.0, 520.0, 80.0, 150.0, 30.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let p_min = records.iter().map(|r| r.p).fold(f64::INFINITY, f64::min);
    let p_max = records.iter().map(|r| r.p).fold(0.0, f64::max);
    let y_min = records
        .iter()
        .filter(|r| r.ler > 0.0)
        .map(|r| r.ler)
        .fold(1.0, f64::min);
    let (xa, xb) = decades(p_min, p_max);
    let (ya, yb) = decades(y_min, 1.0);
    let sx = |p: f64| left + (p.log10() - xa as f64) / (xb - xa) as f64 * pw;
    let sy = |y: f64| top + ph - (y.log10() - ya as f64) / (yb - ya) as f64 * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for d in xa..=xb {
        let x = sx(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
            top + ph,
            top + ph + 18.0
        );
    }
    for d in ya..=yb {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">fault probability p</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(20 {:.1}) rotate(-90)" text-anchor="middle">logical error rate</text>"#,
        top + ph / 2.0
    );

    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.decoder.as_str()) {
            names.push(&r.decoder);
        }
    }
    for (i, name) in names.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.decoder == *name && r.ler > 0.0)
            .map(|r| (sx(r.p), sy(r.ler)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#);
        }
        let ly = top + 20.0 + 20.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{name}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(records: &[LerRecord], path: &Path) -> Result<(), SimError> {
    std::fs::write(path, plot_svg(records)?)?;
    Ok(())
}

/// Writes the CSV (and plot, if configured) under `cfg.output.dir`.
pub fn write_outputs(cfg: &ExperimentConfig, records: &[LerRecord]) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let csv = cfg.output.dir.join(&cfg.output.csv);
    emit_csv(records, &csv)?;
    let mut written = vec![csv];
    if let Some(plot) = &cfg.output.plot {
        let path = cfg.output.dir.join(plot);
        emit_plot(records, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Published parity-propagation matrix of the five-check example circuit.
pub const EXAMPLE_P: &str = "\
00101001010000100001
10010100101000010000
01001010010100001000
10100101000010000100
01010010100001000010
10010000100001000000
01001000010000100000
10100100001000000000
01010010000100000000
00101001000010000000";

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn example_circuit() -> MeasurementCircuit {
    build_circuit(&build_bb_code(&BBSpec::example_n5()).expect("example code builds"))
}

pub fn verify_p_matrix() -> CheckOutcome {
    let rows: Vec<Vec<u8>> = EXAMPLE_P
        .lines()
        .map(|l| l.bytes().map(|b| b - b'0').collect())
        .collect();
    let golden = BinMatrix::from_rows(&rows).expect("golden matrix is rectangular");
    let got = build_p_matrix(&example_circuit()).p_mat;
    CheckOutcome {
        name: "p-matrix golden",
        passed: got == golden,
        detail: format!("{}x{} matrix", got.nrows(), got.ncols()),
    }
}

/// Max-log BCJR against exhaustive MAP on `per_rho` random inputs for each rho in 2..=6.
pub fn verify_bcjr(per_rho: usize, seed: u64) -> CheckOutcome {
    let mut worst = 0.0f64;
    for rho in 2..=6 {
        let tr = Trellis::new(rho);
        for i in 0..per_rho {
            let mut rng = trial_rng(seed, (rho * per_rho + i) as u64);
            let lx: Vec<f64> = (0..rho).map(|_| rng.gen_range(-12.0..12.0)).collect();
            let lf: Vec<f64> = (0..rho).map(|_| rng.gen_range(-12.0..12.0)).collect();
            let got = bcjr(&tr, &lx, &lf);
            let want = oracle::brute_force(&lx, &lf, false);
            for (a, b) in got.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    CheckOutcome {
        name: "bcjr oracle",
        passed: worst <= 1e-9,
        detail: format!("max deviation {worst:.2e}"),
    }
}

/// Equalizer grouping on the three preset codes under `perms` random CNOT orders each.
pub fn verify_grouping(perms: usize, seed: u64) -> CheckOutcome {
    let mut tried = 0;
    let mut failures = Vec::new();
    for spec in [BBSpec::example_n5(), BBSpec::bb90(), BBSpec::gross144()] {
        let code = build_bb_code(&spec).expect("preset builds");
        let base = build_circuit(&code);
        let mut rng = trial_rng(seed, tried as u64);
        for trial in 0..=perms {
            let circ = if trial == 0 {
                base.clone()
            } else {
                let mut order = spec.term_order();
                for i in (1..order.len()).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                let mut s = spec.clone().with_schedule(order);
                s.name = format!("{}-perm{trial}", spec.name);
                build_circuit(&build_bb_code(&s).expect("permuted schedule builds"))
            };
            tried += 1;
            let pm = build_p_matrix(&circ);
            let ok = match group_segments(&pm, &circ.code.h_x) {
                Ok(eqs) => eqs.iter().enumerate().all(|(k, eq)| {
                    pm.check_block(k).select_rows(&eq.qubit_order) == canonical_g(circ.rho())
                }),
                Err(_) => false,
            };
            if !ok {
                failures.push(format!("{} schedule {trial}", spec.name));
            }
        }
    }
    CheckOutcome {
        name: "equalizer grouping",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{tried} circuits")
        } else {
            failures.join(", ")
        },
    }
}

/// Slot flip rates of check 0 from ancilla faults alone against the closed
/// form. Only check 0's hooks are propagated so other checks sharing its
/// qubits do not contribute.
pub fn verify_hook_marginals(p: f64, samples: u64, seed: u64) -> CheckOutcome {
    let circ = build_circuit(&build_bb_code(&BBSpec::gross144()).expect("preset builds"));
    let rho = circ.rho();
    let counts = (0..samples)
        .into_par_iter()
        .fold(
            || vec![0u64; rho],
            |mut acc, t| {
                let mut rng = trial_rng(seed, t);
                let sampled = sample_hooks_only(&circ, p, &mut rng);
                let mut f = FaultSet::zeros(&circ);
                for step in sampled.hooks_of(0).ones() {
                    f.flip_hook(0, step + 1);
                }
                let e = propagate(&circ, &f);
                for (a, &q) in acc.iter_mut().zip(circ.slots(0)) {
                    *a += e.get(q) as u64;
                }
                acc
            },
        )
        .reduce(|| vec![0u64; rho], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let mut worst = 0.0f64;
    for (t, &c) in counts.iter().enumerate() {
        let q = hook_marginal(p, t + 1);
        let sigma = (q * (1.0 - q) / samples as f64).sqrt();
        worst = worst.max((c as f64 / samples as f64 - q).abs() / sigma);
    }
    CheckOutcome {
        name: "hook marginals",
        passed: worst <= 3.0,
        detail: format!("max |z| = {worst:.2}"),
    }
}

pub fn verify_all() -> Vec<CheckOutcome> {
    vec![
        verify_p_matrix(),
        verify_bcjr(1000, 11),
        verify_grouping(20, 12),
        verify_hook_marginals(0.01, 1_000_000, 13),
    ]
}

/// Text dump of a preset's matrices and equalizer permutations.
pub fn dump_graph(name: &str) -> Result<String, ConfigError> {
    let spec = BBSpec::preset(name)
        .ok_or_else(|| ConfigError::Invalid(format!("unknown code preset {name:?}")))?;
    let code = build_bb_code(&spec)?;
    let circ = build_circuit(&code);
    let np = NoiseParams::new(0.001).expect("valid p");
    let joint = compile_joint(&circ, np).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let cl = build_circuit_level_graph(&circ, np);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} n={} k={} gamma={} rho={}",
        code.name, code.n, code.k, code.gamma, code.rho
    );
    let _ = writeln!(out, "# H_X\n{}", code.h_x.to_text());
    let _ = writeln!(out, "# H_Z\n{}", code.h_z.to_text());
    let _ = writeln!(out, "# P\n{}", build_p_matrix(&circ).p_mat.to_text());
    let _ = writeln!(out, "# equalizer permutations\n{}", joint.permutation_csv());
    let _ = writeln!(
        out,
        "# circuit-level graph: {} checks x {} columns",
        cl.h_circ.nrows(),
        cl.columns()
    );
    Ok(out)
}
