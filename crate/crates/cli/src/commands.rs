use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::Serialize;

use ltest_core::combine::{GridBase, KGrid, DEFAULT_FIXED_K, DEFAULT_K_MIN};
use ltest_core::data::{load_csv, DataMatrix, RngSpec};
use ltest_core::methods::{evaluate_methods_with, required_requests, Method, MethodResult};
use ltest_core::permutation::{build_null, NullEnsemble, PValueMode};
use ltest_core::simlab::{empirical_size, size_corrected_power, ExperimentConfig};

use crate::{SimArgs, TestArgs};

/// An error and the exit code it maps to: 2 for bad input, 1 otherwise.
pub struct Failure {
    pub error: anyhow::Error,
    pub code: u8,
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { error: e.into(), code: 2 }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { error: e.into(), code: 1 }
}

type CmdResult = Result<(), Failure>;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_output(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> anyhow::Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| anyhow!("invalid {what} {s:?}")))
        .collect()
}

fn p_value_mode(conservative: bool) -> PValueMode {
    if conservative {
        PValueMode::Conservative
    } else {
        PValueMode::Strict
    }
}

fn grid_base(literal_p: bool) -> GridBase {
    if literal_p {
        GridBase::Dimension
    } else {
        GridBase::Pairs
    }
}

struct Prepared {
    data: DataMatrix<f64>,
    methods: Vec<Method>,
    grid: Option<KGrid>,
    seed: RngSpec,
    mode: PValueMode,
}

fn prepare(a: &TestArgs) -> Result<Prepared, Failure> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(input(anyhow!("--alpha {} is not in (0, 1)", a.alpha)));
    }
    if a.b == 0 {
        return Err(input(anyhow!("--B must be at least 1")));
    }
    let data: DataMatrix<f64> = load_csv(&a.input, !a.no_header)
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(input)?;
    let methods = match &a.method {
        Some(m) => Method::parse_list(m).map_err(input)?,
        None => Method::default_test_set(),
    };
    let grid = if methods.contains(&Method::Cauchy) {
        let g = match &a.k_list {
            Some(ks) => KGrid::explicit(data.p(), DEFAULT_FIXED_K, parse_list(ks, "k").map_err(input)?),
            None => KGrid::dyadic(data.p(), DEFAULT_FIXED_K, DEFAULT_K_MIN, grid_base(a.literal_p)),
        };
        Some(g.map_err(input)?)
    } else {
        None
    };
    Ok(Prepared {
        data,
        methods,
        grid,
        seed: RngSpec::new(a.seed, 0),
        mode: p_value_mode(a.conservative),
    })
}

fn ensemble(a: &TestArgs, prep: &Prepared) -> Result<Option<NullEnsemble<f64>>, Failure> {
    let requests = required_requests(&prep.methods, prep.data.p(), prep.grid.as_ref()).map_err(input)?;
    if requests.is_empty() {
        return Ok(None);
    }
    let ids: Vec<String> = requests.iter().map(|r| r.id()).collect();
    if let Some(path) = &a.null_cache {
        if path.exists() {
            let cached = NullEnsemble::<f64>::load(path)
                .with_context(|| format!("reading null ensemble {}", path.display()))
                .map_err(input)?;
            if cached.matches(&prep.data, a.b, prep.seed, &ids) {
                return Ok(Some(cached));
            }
            eprintln!("note: {} does not match this run; rebuilding", path.display());
        }
    }
    let built = build_null(&prep.data, &requests, a.b, prep.seed).map_err(input)?;
    if let Some(path) = &a.null_cache {
        built
            .save(path)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?;
    }
    Ok(Some(built))
}

#[derive(Serialize)]
struct ResultEntry {
    #[serde(flatten)]
    result: MethodResult<f64>,
    reject: bool,
}

#[derive(Serialize)]
struct TestReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input: String,
    n: usize,
    p: usize,
    seed: u64,
    #[serde(rename = "B")]
    b: usize,
    alpha: f64,
    p_value_mode: PValueMode,
    methods: &'a [Method],
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<&'a KGrid>,
    results: Vec<ResultEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_seconds: Option<f64>,
}

pub fn test(a: &TestArgs) -> CmdResult {
    let start = Instant::now();
    let prep = prepare(a)?;
    let null = ensemble(a, &prep)?;
    let results = evaluate_methods_with(&prep.data, &prep.methods, prep.grid.as_ref(), null.as_ref(), prep.mode)
        .map_err(input)?;
    let report = TestReport {
        tool: "ltest",
        version: VERSION,
        command: "test",
        input: a.input.display().to_string(),
        n: prep.data.n(),
        p: prep.data.p(),
        seed: a.seed,
        b: a.b,
        alpha: a.alpha,
        p_value_mode: prep.mode,
        methods: &prep.methods,
        grid: prep.grid.as_ref(),
        results: results
            .into_iter()
            .map(|r| ResultEntry {
                reject: r.p_value.get() <= a.alpha,
                result: r,
            })
            .collect(),
        elapsed_seconds: a.timing.then(|| start.elapsed().as_secs_f64()),
    };
    let text = serde_json::to_string_pretty(&report).map_err(runtime)? + "\n";
    write_output(a.out.as_deref(), &text)
}

pub fn null(a: &TestArgs) -> CmdResult {
    let prep = prepare(a)?;
    let requests = required_requests(&prep.methods, prep.data.p(), prep.grid.as_ref()).map_err(input)?;
    if requests.is_empty() {
        return Err(input(anyhow!("none of the selected methods is permutation calibrated")));
    }
    let built = build_null(&prep.data, &requests, a.b, prep.seed).map_err(input)?;
    write_output(a.out.as_deref(), &(built.to_json().map_err(runtime)? + "\n"))
}

#[derive(Clone, Copy)]
pub enum Experiment {
    Size,
    Power,
}

fn resolve_config(a: &SimArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = &a.dist {
        cfg.dist = v.parse()?;
    }
    if let Some(v) = &a.method {
        cfg.methods = Method::parse_list(v)?;
    }
    if let Some(v) = &a.alpha {
        cfg.alphas = parse_list(v, "alpha")?;
    }
    if let Some(v) = a.r {
        cfg.replicates = v;
    }
    if let Some(v) = a.r0 {
        cfg.null_replicates = Some(v);
    }
    if let Some(v) = a.b {
        cfg.b = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = &a.m {
        cfg.m = parse_list(v, "m")?;
    }
    if let Some(v) = a.theta {
        cfg.theta = v;
    }
    if let Some(v) = &a.k_list {
        cfg.k_list = Some(parse_list(v, "k")?);
    }
    if a.literal_p {
        cfg.grid_base = GridBase::Dimension;
    }
    if a.conservative {
        cfg.p_value_mode = PValueMode::Conservative;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(a: &SimArgs, kind: Experiment) -> CmdResult {
    let start = Instant::now();
    let cfg = resolve_config(a).map_err(input)?;
    let mut report = match kind {
        Experiment::Size => empirical_size(&cfg),
        Experiment::Power => size_corrected_power(&cfg),
    }
    .map_err(input)?;
    if a.timing {
        report.elapsed_seconds = Some(start.elapsed().as_secs_f64());
    }
    if let Some(path) = &a.svg {
        fs::write(path, report.to_svg())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?;
    }
    write_output(a.out.as_deref(), &report.to_csv())
}
