//! Line-oriented configuration documents.
//!
//! ```text
//! # comment
//! [model]
//! p1 = 4
//! lambda_x1 = fix(1,1,1) free(2,1,l1_21)
//! sigma_xixi = free(1,1,sxi_11) tie(2,2,sxi_11,2)
//! [bounds]
//! l1_21 = [-100, -0.1] | [0.1, 100]
//! [sde.xi]
//! A = 0.5 0.3; 0.2 0.4
//! ```
//!
//! Cell indices are 1-based. Parameters are numbered in order of first
//! appearance. Every error carries the 1-based line it refers to.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hfsem_core::estimate::{FitOptions, GradientMode};
use hfsem_core::lisrel::{
    local_identifiability, Cell, IdentifiabilityReport, MatrixTemplate, ModelSpec, ParamBounds,
    Templates,
};
use hfsem_core::montecarlo::FittedModel;
use hfsem_core::simulate::{check_consistency, Scheme, SdeBlock, SdeBlocks, SimGrid};
use nalgebra::{DMatrix, DVector};

/// Largest accepted value of p1, p2, k1 or k2.
pub const MAX_DIM: usize = 64;

const MATRICES: [&str; 8] = [
    "lambda_x1",
    "lambda_x2",
    "b0",
    "gamma",
    "sigma_xixi",
    "sigma_dd",
    "sigma_ee",
    "sigma_zz",
];
const BLOCKS: [&str; 4] = ["xi", "delta", "eps", "zeta"];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Read { path: PathBuf, message: String },
    Parse { file: Option<PathBuf>, line: usize, message: String },
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } => Some(*line),
            ConfigError::Read { .. } => None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, message } => {
                write!(f, "cannot read config {}: {message}", path.display())
            }
            ConfigError::Parse { file: Some(p), line, message } => {
                write!(f, "{}:{line}: {message}", p.display())
            }
            ConfigError::Parse { file: None, line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = std::result::Result<T, (usize, String)>;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Clone)]
struct Section {
    line: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Default)]
struct Document {
    sections: HashMap<String, Section>,
    end_line: usize,
}

fn known_section(name: &str) -> bool {
    matches!(name, "model" | "bounds" | "theta" | "truth" | "grid" | "mc" | "fit")
        || name.strip_prefix("sde.").is_some_and(|b| BLOCKS.contains(&b))
}

fn split_document(text: &str) -> Parsed<Document> {
    let mut doc = Document::default();
    let mut current: Option<String> = None;
    let mut end_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        end_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or((line, format!("malformed section header `{content}`")))?
                .trim();
            if !known_section(name) {
                return Err((line, format!("unknown section [{name}]")));
            }
            if doc.sections.contains_key(name) {
                return Err((line, format!("duplicate section [{name}]")));
            }
            doc.sections.insert(name.to_string(), Section { line, entries: Vec::new() });
            current = Some(name.to_string());
            continue;
        }
        let Some(sec) = &current else {
            return Err((line, "key outside any section".into()));
        };
        let (key, value) = content
            .split_once('=')
            .ok_or((line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err((line, "empty key".into()));
        }
        doc.sections.get_mut(sec).expect("current section exists").entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    doc.end_line = end_line.max(1);
    Ok(doc)
}

fn reject_unknown(section: &Section, name: &str, allowed: &[&str]) -> Parsed<()> {
    for e in &section.entries {
        if !allowed.contains(&e.key.as_str()) {
            return Err((e.line, format!("unknown key `{}` in [{name}]", e.key)));
        }
    }
    Ok(())
}

fn single<'a>(section: &'a Section, key: &str) -> Parsed<Option<&'a Entry>> {
    let mut found = None;
    for e in section.entries.iter().filter(|e| e.key == key) {
        if found.is_some() {
            return Err((e.line, format!("duplicate key `{key}`")));
        }
        found = Some(e);
    }
    Ok(found)
}

fn parse_num<T: std::str::FromStr>(e: &Entry, text: &str) -> Parsed<T> {
    text.trim()
        .parse()
        .map_err(|_| (e.line, format!("`{}`: cannot parse `{}`", e.key, text.trim())))
}

fn parse_f64(e: &Entry, text: &str) -> Parsed<f64> {
    let v: f64 = parse_num(e, text)?;
    if !v.is_finite() {
        return Err((e.line, format!("`{}`: value must be finite", e.key)));
    }
    Ok(v)
}

fn get<T: std::str::FromStr>(section: &Section, key: &str) -> Parsed<Option<T>> {
    single(section, key)?.map(|e| parse_num(e, &e.value)).transpose()
}

fn get_f64(section: &Section, key: &str) -> Parsed<Option<f64>> {
    single(section, key)?.map(|e| parse_f64(e, &e.value)).transpose()
}

fn numbers(e: &Entry, text: &str) -> Parsed<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(e, s))
        .collect()
}

fn matrix(e: &Entry) -> Parsed<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = e
        .value
        .split(';')
        .map(|r| numbers(e, r))
        .collect::<Parsed<_>>()?;
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err((e.line, format!("`{}`: rows must be non-empty and equally long", e.key)));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

enum CellSpec {
    Fix(f64),
    Free(String),
    Tie(String, f64),
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn index(e: &Entry, s: &str) -> Parsed<usize> {
    match s.trim().parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err((e.line, format!("cell index `{}` must be an integer >= 1", s.trim()))),
    }
}

fn cells(e: &Entry) -> Parsed<Vec<(usize, usize, CellSpec)>> {
    let mut out = Vec::new();
    let mut rest = e.value.trim();
    while !rest.is_empty() {
        let open = rest.find('(').ok_or((e.line, format!("expected a cell, found `{rest}`")))?;
        let close = rest.find(')').ok_or((e.line, "unclosed `(`".to_string()))?;
        if close < open {
            return Err((e.line, "unbalanced parentheses".into()));
        }
        let kind = rest[..open].trim();
        let args: Vec<&str> = rest[open + 1..close].split(',').map(str::trim).collect();
        let arity = |n: usize| -> Parsed<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err((e.line, format!("{kind}() takes {n} arguments, got {}", args.len())))
            }
        };
        let name = |s: &str| -> Parsed<String> {
            if valid_name(s) {
                Ok(s.to_string())
            } else {
                Err((e.line, format!("invalid parameter name `{s}`")))
            }
        };
        let spec = match kind {
            "fix" => {
                arity(3)?;
                CellSpec::Fix(parse_f64(e, args[2])?)
            }
            "free" => {
                arity(3)?;
                CellSpec::Free(name(args[2])?)
            }
            "tie" => {
                arity(4)?;
                CellSpec::Tie(name(args[2])?, parse_f64(e, args[3])?)
            }
            other => return Err((e.line, format!("unknown cell kind `{other}`"))),
        };
        out.push((index(e, args[0])?, index(e, args[1])?, spec));
        rest = rest[close + 1..].trim_start();
    }
    Ok(out)
}

fn bounds(e: &Entry) -> Parsed<ParamBounds> {
    let mut intervals = Vec::new();
    for part in e.value.split('|') {
        let inner = part
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or((e.line, format!("bounds must look like `[lo, hi] | [lo, hi]`, got `{}`", part.trim())))?;
        let v = numbers(e, inner)?;
        if v.len() != 2 {
            return Err((e.line, "an interval needs exactly two endpoints".into()));
        }
        intervals.push((v[0], v[1]));
    }
    ParamBounds::union(intervals).map_err(|err| (e.line, err.to_string()))
}

/// A parsed [model] (with [bounds], [theta] and [fit]).
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub name: String,
    pub spec: ModelSpec,
    pub theta: Option<Vec<f64>>,
    pub fit: FitOptions,
}

fn parse_model(doc: &Document) -> Parsed<ModelSpec> {
    let sec = doc
        .sections
        .get("model")
        .ok_or((doc.end_line, "missing [model]".to_string()))?;
    let mut allowed = vec!["p1", "p2", "k1", "k2"];
    allowed.extend(MATRICES);
    reject_unknown(sec, "model", &allowed)?;
    let mut dims = [0usize; 4];
    for (d, key) in dims.iter_mut().zip(["p1", "p2", "k1", "k2"]) {
        let e = single(sec, key)?.ok_or((sec.line, format!("[model] needs `{key}`")))?;
        *d = parse_num(e, &e.value)?;
        if *d > MAX_DIM {
            return Err((e.line, format!("`{key}` exceeds the limit of {MAX_DIM}")));
        }
    }
    let [p1, p2, k1, k2] = dims;
    let mut t = Templates::zeros(p1, p2, k1, k2);
    let mut names: Vec<String> = Vec::new();
    let mut first_use: Vec<usize> = Vec::new();
    for e in &sec.entries {
        let Some(m) = MATRICES.iter().position(|&m| m == e.key) else {
            continue;
        };
        for (i, j, spec) in cells(e)? {
            let mut param = |name: String| {
                names.iter().position(|n| *n == name).unwrap_or_else(|| {
                    names.push(name);
                    first_use.push(e.line);
                    names.len() - 1
                })
            };
            let cell = match spec {
                CellSpec::Fix(v) => Cell::Fixed(v),
                CellSpec::Free(n) => Cell::Free(param(n)),
                CellSpec::Tie(n, scale) => Cell::Tied { param: param(n), scale },
            };
            let tpl: &mut MatrixTemplate = match m {
                0 => &mut t.lambda_x1,
                1 => &mut t.lambda_x2,
                2 => &mut t.b0,
                3 => &mut t.gamma,
                4 => &mut t.sigma_xixi,
                5 => &mut t.sigma_dd,
                6 => &mut t.sigma_ee,
                _ => &mut t.sigma_zz,
            };
            tpl.set(i, j, cell).map_err(|err| (e.line, format!("{}: {err}", e.key)))?;
        }
    }

    let bsec = doc.sections.get("bounds");
    let mut by_name: HashMap<&str, (usize, ParamBounds)> = HashMap::new();
    if let Some(bsec) = bsec {
        for e in &bsec.entries {
            if !names.contains(&e.key) {
                return Err((e.line, format!("[bounds] names unknown parameter `{}`", e.key)));
            }
            if by_name.insert(e.key.as_str(), (e.line, bounds(e)?)).is_some() {
                return Err((e.line, format!("duplicate bounds for `{}`", e.key)));
            }
        }
    }
    let mut list = Vec::with_capacity(names.len());
    for (n, line) in names.iter().zip(&first_use) {
        let (_, b) = by_name
            .get(n.as_str())
            .ok_or((*line, format!("parameter `{n}` has no [bounds] entry")))?;
        list.push(b.clone());
    }
    ModelSpec::new(t, names, list).map_err(|err| (sec.line, err.to_string()))
}

fn parse_theta(doc: &Document, spec: &ModelSpec) -> Parsed<Option<Vec<f64>>> {
    let Some(sec) = doc.sections.get("theta") else {
        return Ok(None);
    };
    let mut theta = vec![None; spec.q()];
    for e in &sec.entries {
        let k = spec
            .param_index(&e.key)
            .ok_or((e.line, format!("[theta] names unknown parameter `{}`", e.key)))?;
        if theta[k].is_some() {
            return Err((e.line, format!("duplicate value for `{}`", e.key)));
        }
        theta[k] = Some(parse_f64(e, &e.value)?);
    }
    theta
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or((sec.line, format!("[theta] has no value for `{}`", spec.names()[k]))))
        .collect::<Parsed<Vec<f64>>>()
        .map(Some)
}

fn parse_fit(doc: &Document, theta: Option<&[f64]>) -> Parsed<FitOptions> {
    let mut opts = FitOptions::default();
    let Some(sec) = doc.sections.get("fit") else {
        return Ok(opts);
    };
    reject_unknown(
        sec,
        "fit",
        &["n_starts", "seed", "tol", "grad_tol", "max_iter", "init", "gradient"],
    )?;
    if let Some(v) = get(sec, "n_starts")? {
        opts.n_starts = v;
    }
    if let Some(v) = get(sec, "seed")? {
        opts.seed = v;
    }
    if let Some(v) = get_f64(sec, "tol")? {
        opts.tol = v;
    }
    if let Some(v) = get_f64(sec, "grad_tol")? {
        opts.grad_tol = v;
    }
    if let Some(v) = get(sec, "max_iter")? {
        opts.max_iter = v;
    }
    if let Some(e) = single(sec, "gradient")? {
        opts.gradient = match e.value.as_str() {
            "numeric" => GradientMode::Numeric,
            "analytic" => GradientMode::Analytic,
            other => return Err((e.line, format!("gradient must be numeric or analytic, got `{other}`"))),
        };
    }
    if let Some(e) = single(sec, "init")? {
        match e.value.as_str() {
            "theta" => {
                let t = theta.ok_or((e.line, "`init = theta` needs a [theta] section".to_string()))?;
                opts.init_override = Some(t.to_vec());
            }
            "random" => opts.init_override = None,
            other => return Err((e.line, format!("init must be theta or random, got `{other}`"))),
        }
    }
    if opts.n_starts == 0 && opts.init_override.is_none() {
        return Err((sec.line, "[fit] needs n_starts >= 1 or init = theta".into()));
    }
    Ok(opts)
}

fn parse_block(sec: &Section, name: &str) -> Parsed<SdeBlock> {
    reject_unknown(sec, name, &["drift", "A", "mu", "S", "c"])?;
    if let Some(e) = single(sec, "drift")? {
        if e.value != "ou" {
            return Err((e.line, format!("only `drift = ou` is supported, got `{}`", e.value)));
        }
    }
    let need = |key: &str| single(sec, key)?.ok_or((sec.line, format!("[{name}] needs `{key}`")));
    let a = matrix(need("A")?)?;
    let s = matrix(need("S")?)?;
    let d = s.nrows();
    let vector = |key: &str| -> Parsed<DVector<f64>> {
        match single(sec, key)? {
            Some(e) => Ok(DVector::from_vec(numbers(e, &e.value)?)),
            None => Ok(DVector::zeros(d)),
        }
    };
    SdeBlock::linear_ou(a, vector("mu")?, s, vector("c")?).map_err(|err| (sec.line, err.to_string()))
}

fn parse_blocks(doc: &Document) -> Parsed<Option<(usize, SdeBlocks)>> {
    let present: Vec<&str> = BLOCKS
        .iter()
        .copied()
        .filter(|b| doc.sections.contains_key(&format!("sde.{b}")))
        .collect();
    if present.is_empty() {
        return Ok(None);
    }
    let mut parsed = Vec::with_capacity(4);
    for b in BLOCKS {
        let key = format!("sde.{b}");
        let sec = doc.sections.get(&key).ok_or_else(|| {
            let line = doc.sections[&format!("sde.{}", present[0])].line;
            (line, format!("[sde.{}] given but [{key}] missing", present[0]))
        })?;
        parsed.push(parse_block(sec, &key)?);
    }
    let line = doc.sections[&format!("sde.{}", BLOCKS[0])].line;
    let mut it = parsed.into_iter();
    let mut next = || it.next().expect("four blocks");
    Ok(Some((
        line,
        SdeBlocks { xi: next(), delta: next(), eps: next(), zeta: next() },
    )))
}

/// Data-generating model of a configuration.
#[derive(Debug, Clone)]
pub struct Truth {
    pub spec: ModelSpec,
    pub theta: Vec<f64>,
    pub blocks: SdeBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { replications: 500, alpha: 0.05, seed: 0, workers: None }
    }
}

/// A fully loaded configuration.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelConfig,
    /// Absent when neither the file nor its `[truth] config` has SDE blocks.
    pub truth: Option<Truth>,
    pub grid: SimGrid,
    pub scheme: Scheme,
    pub mc: McSettings,
    /// Models fitted by `mc`; the configured model when `[mc] models` is unset.
    pub fitted: Vec<FittedModel>,
    /// Assumption checks at `[theta]`, when given.
    pub identifiability: Option<IdentifiabilityReport>,
}

impl StudyConfig {
    pub fn truth(&self) -> Result<&Truth, String> {
        self.truth
            .as_ref()
            .ok_or_else(|| "config defines no data-generating model ([sde.*] blocks or [truth])".into())
    }
}

fn parse_grid(doc: &Document) -> Parsed<(SimGrid, Scheme)> {
    let Some(sec) = doc.sections.get("grid") else {
        return Ok((SimGrid::new(10_000, 1e-3).expect("valid default grid"), Scheme::Auto));
    };
    reject_unknown(sec, "grid", &["n", "h", "substeps", "scheme"])?;
    let n = get(sec, "n")?.unwrap_or(10_000);
    let h = get_f64(sec, "h")?.unwrap_or(1e-3);
    let substeps = get(sec, "substeps")?.unwrap_or(10);
    let grid = SimGrid::with_substeps(n, h, substeps).map_err(|e| (sec.line, e.to_string()))?;
    let scheme = match single(sec, "scheme")? {
        None => Scheme::Auto,
        Some(e) => match e.value.as_str() {
            "auto" => Scheme::Auto,
            "euler" => Scheme::Euler,
            other => return Err((e.line, format!("scheme must be auto or euler, got `{other}`"))),
        },
    };
    Ok((grid, scheme))
}

fn parse_mc(doc: &Document) -> Parsed<(McSettings, Option<(usize, Vec<String>)>)> {
    let mut mc = McSettings::default();
    let Some(sec) = doc.sections.get("mc") else {
        return Ok((mc, None));
    };
    reject_unknown(sec, "mc", &["replications", "alpha", "seed", "workers", "models"])?;
    if let Some(v) = get(sec, "replications")? {
        mc.replications = v;
    }
    if mc.replications == 0 {
        return Err((sec.line, "replications must be >= 1".into()));
    }
    if let Some(e) = single(sec, "alpha")? {
        let a = parse_f64(e, &e.value)?;
        if !(a > 0.0 && a < 1.0) {
            return Err((e.line, format!("alpha must lie in (0, 1), got {a}")));
        }
        mc.alpha = a;
    }
    if let Some(v) = get(sec, "seed")? {
        mc.seed = v;
    }
    if let Some(e) = single(sec, "workers")? {
        let w: usize = parse_num(e, &e.value)?;
        if w == 0 {
            return Err((e.line, "workers must be >= 1".into()));
        }
        mc.workers = Some(w);
    }
    let models = single(sec, "models")?.map(|e| {
        let list = e
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        (e.line, list)
    });
    Ok((mc, models))
}

struct Loaded {
    model: ModelConfig,
    blocks: Option<(usize, SdeBlocks)>,
    doc: Document,
}

fn load_model(text: &str, name: String) -> Parsed<Loaded> {
    let doc = split_document(text)?;
    let spec = parse_model(&doc)?;
    let theta = parse_theta(&doc, &spec)?;
    let fit = parse_fit(&doc, theta.as_deref())?;
    let blocks = parse_blocks(&doc)?;
    Ok(Loaded { model: ModelConfig { name, spec, theta, fit }, blocks, doc })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn in_file(file: Option<&Path>) -> impl Fn((usize, String)) -> ConfigError + '_ {
    move |(line, message)| ConfigError::Parse { file: file.map(Path::to_path_buf), line, message }
}

// A referenced file is read as a model only; its own references are ignored.
fn load_reference(base: Option<&Path>, rel: &str, line: usize, outer: Option<&Path>) -> Result<Loaded, ConfigError> {
    let path = base.map(|b| b.join(rel)).unwrap_or_else(|| PathBuf::from(rel));
    let text = read(&path).map_err(|e| ConfigError::Parse {
        file: outer.map(Path::to_path_buf),
        line,
        message: e.to_string(),
    })?;
    load_model(&text, stem(&path)).map_err(in_file(Some(&path)))
}

fn resolve(
    text: &str,
    name: String,
    base: Option<&Path>,
    file: Option<&Path>,
) -> Result<StudyConfig, ConfigError> {
    let err = in_file(file);
    let own = load_model(text, name).map_err(&err)?;
    let (grid, scheme) = parse_grid(&own.doc).map_err(&err)?;
    let (mc, models) = parse_mc(&own.doc).map_err(&err)?;

    let truth_ref = match own.doc.sections.get("truth") {
        Some(sec) => {
            reject_unknown(sec, "truth", &["config"]).map_err(&err)?;
            let e = single(sec, "config")
                .map_err(&err)?
                .ok_or_else(|| err((sec.line, "[truth] needs `config`".into())))?;
            Some(load_reference(base, &e.value, e.line, file)?)
        }
        None => None,
    };
    let truth = match &truth_ref {
        Some(t) => {
            let line = own.doc.sections["truth"].line;
            let Some((_, blocks)) = &t.blocks else {
                return Err(err((line, format!("truth model `{}` has no [sde.*] blocks", t.model.name))));
            };
            let theta = t.model.theta.clone().ok_or_else(|| {
                err((line, format!("truth model `{}` has no [theta]", t.model.name)))
            })?;
            if t.model.spec.p() != own.model.spec.p() {
                return Err(err((
                    line,
                    format!("truth has p = {}, model has p = {}", t.model.spec.p(), own.model.spec.p()),
                )));
            }
            check_consistency(&t.model.spec, &theta, blocks).map_err(|e| err((line, e.to_string())))?;
            Some(Truth { spec: t.model.spec.clone(), theta, blocks: blocks.clone() })
        }
        None => match (&own.blocks, &own.model.theta) {
            (Some((line, blocks)), Some(theta)) => {
                check_consistency(&own.model.spec, theta, blocks).map_err(|e| err((*line, e.to_string())))?;
                Some(Truth { spec: own.model.spec.clone(), theta: theta.clone(), blocks: blocks.clone() })
            }
            (Some((line, _)), None) => {
                return Err(err((*line, "[sde.*] blocks need a [theta] section".into())))
            }
            (None, _) => None,
        },
    };

    let fitted = match models {
        None => vec![FittedModel {
            name: own.model.name.clone(),
            spec: own.model.spec.clone(),
            options: own.model.fit.clone(),
        }],
        Some((line, list)) => {
            if list.is_empty() {
                return Err(err((line, "`models` lists no files".into())));
            }
            let mut out = Vec::with_capacity(list.len());
            for rel in &list {
                let m = load_reference(base, rel, line, file)?.model;
                if m.spec.p() != own.model.spec.p() {
                    return Err(err((line, format!("model `{}` has p = {}, expected {}", m.name, m.spec.p(), own.model.spec.p()))));
                }
                out.push(FittedModel { name: m.name, spec: m.spec, options: m.fit });
            }
            out
        }
    };

    let identifiability = match &own.model.theta {
        Some(theta) => {
            let line = own.doc.sections["theta"].line;
            let report = local_identifiability(&own.model.spec, theta).map_err(|e| err((line, e.to_string())))?;
            if !report.all_pass() {
                log::warn!("assumption checks fail at [theta]: {report:?}");
            }
            Some(report)
        }
        None => None,
    };

    Ok(StudyConfig { model: own.model, truth, grid, scheme, mc, fitted, identifiability })
}

/// Parses a document held in memory. Relative `[truth]` and `[mc] models`
/// paths resolve against `base`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<StudyConfig, ConfigError> {
    resolve(text, "model".into(), base, None)
}

/// Loads, validates and cross-checks a configuration file.
pub fn parse_config(path: &Path) -> Result<StudyConfig, ConfigError> {
    let text = read(path)?;
    resolve(&text, stem(path), path.parent(), Some(path))
}
