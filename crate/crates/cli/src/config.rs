//! Run-configuration parsing and validation.
//!
//! Configurations are plain text: `[section]` headers, `key = value`
//! lines, and `#` comments. The recognized sections are `[run]`,
//! `[grid]`, `[norm]`, `[problem]`, `[solver]`, and `[output]`; which
//! keys are consumed depends on the command named by `[run] command`,
//! and any key the selected command does not use is rejected with its
//! file and line. Structural rules (value types, list lengths, ranges,
//! the norm/exponent regime) are checked here so diagnostics can point
//! at the offending line; the deeper coupled rules are re-checked by
//! the solver constructors before anything runs.

use std::path::{Path, PathBuf};

use hplap::NormKind;
use thiserror::Error;

use crate::expr::{self, Expr};

/// A configuration diagnostic, positioned by file and line where one
/// line is responsible.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A problem attributable to one line.
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    /// A file-level problem (missing section or key, say).
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// The pipeline selected by `[run] command`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Sample-based verification of the norm hypotheses.
    CheckNorm,
    /// Dirichlet energy minimization for a fixed load.
    SolveConvex,
    /// First eigenpair by constrained Rayleigh quotient minimization.
    Eigen,
    /// Monotone truncation pipeline for the purely singular problem.
    SolveSingular,
    /// Two-solution continuation for the perturbed singular problem.
    SolveMultiplicity,
}

impl Command {
    /// The name used in configuration files and summaries.
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckNorm => "check-norm",
            Command::SolveConvex => "solve-convex",
            Command::Eigen => "eigen",
            Command::SolveSingular => "solve-singular",
            Command::SolveMultiplicity => "solve-multiplicity",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "check-norm" => Some(Command::CheckNorm),
            "solve-convex" => Some(Command::SolveConvex),
            "eigen" => Some(Command::Eigen),
            "solve-singular" => Some(Command::SolveSingular),
            "solve-multiplicity" => Some(Command::SolveMultiplicity),
            _ => None,
        }
    }
}

/// How a nodal field is specified: a coordinate expression or a CSV
/// file previously written by a run (resolved relative to the
/// configuration file).
#[derive(Debug, Clone)]
pub enum FieldSpec {
    /// A parsed coordinate expression.
    Expr(Expr),
    /// A field CSV to read back against the run's grid.
    Csv(PathBuf),
}

/// The `[grid]` section. `extents` and `resolution` stay empty for
/// `check-norm`, which only needs the dimension.
#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Per-axis `(low, high)` intervals.
    pub extents: Vec<(f64, f64)>,
    /// Per-axis cell counts.
    pub resolution: Vec<usize>,
}

/// The `[solver]` section; unset keys fall back to the library
/// defaults at dispatch time.
#[derive(Debug, Clone, Default)]
pub struct SolverSpec {
    /// Seed recorded with runs and used for probe randomness.
    pub seed: u64,
    /// Gradient tolerance for the descent solves.
    pub tol_grad: Option<f64>,
    /// Iteration cap for the descent solves.
    pub max_iters: Option<usize>,
    /// Outer tolerance between consecutive truncation levels.
    pub tol_outer: Option<f64>,
    /// Fixed-point gap tolerance inside one truncation level.
    pub tol_fp: Option<f64>,
    /// Fixed-point iteration cap per truncation level.
    pub max_fp_iters: Option<usize>,
    /// Explicit truncation schedule (strictly increasing).
    pub n_schedule: Option<Vec<usize>>,
    /// Regularization schedule (strictly decreasing, positive).
    pub eps_schedule: Option<Vec<f64>>,
    /// Shrink factor for the constraint-ball radius.
    pub k: Option<f64>,
    /// Probe family size for the geometry estimates.
    pub probe_count: Option<usize>,
    /// Path segments for the deformation.
    pub segments: Option<usize>,
    /// Deformation sweep cap.
    pub max_deform_iters: Option<usize>,
    /// Initial step for each deformation descent move.
    pub descent_step: Option<f64>,
    /// Saddle refinement round cap.
    pub refine_rounds: Option<usize>,
    /// Sample count for the hypothesis check.
    pub samples: Option<usize>,
    /// Tolerance for the hypothesis check.
    pub tol_check: Option<f64>,
}

/// A fully parsed and structurally validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The selected pipeline.
    pub command: Command,
    /// Grid description.
    pub grid: GridSpec,
    /// Norm family and parameters.
    pub norm: NormKind,
    /// Energy exponent (all solve commands).
    pub p: Option<f64>,
    /// Load field for the convex solve.
    pub g: Option<FieldSpec>,
    /// Singular load field.
    pub f: Option<FieldSpec>,
    /// Singular exponent field.
    pub q: Option<FieldSpec>,
    /// Coupling strength for the perturbed problem.
    pub lambda: Option<f64>,
    /// Superlinear perturbation exponent.
    pub r: Option<f64>,
    /// Boundary strip width for the singular exponent rule.
    pub delta: Option<f64>,
    /// Solver knobs.
    pub solver: SolverSpec,
    /// Output directory.
    pub out_dir: PathBuf,
    /// Output file prefix.
    pub prefix: String,
}

/// One raw `key = value` line.
#[derive(Debug)]
struct RawEntry {
    key: String,
    value: String,
    line: usize,
    taken: bool,
}

/// All entries of one section, with take-or-reject bookkeeping.
#[derive(Debug, Default)]
struct Section {
    entries: Vec<RawEntry>,
    header_line: Option<usize>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        for e in &mut self.entries {
            if e.key == key && !e.taken {
                e.taken = true;
                return Some((e.value.clone(), e.line));
            }
        }
        None
    }

    fn first_untaken(&self) -> Option<&RawEntry> {
        self.entries.iter().find(|e| !e.taken)
    }
}

const SECTION_NAMES: [&str; 6] = ["run", "grid", "norm", "problem", "solver", "output"];

struct RawConfig {
    path: String,
    base_dir: PathBuf,
    sections: Vec<Section>,
}

impl RawConfig {
    fn section(&mut self, name: &str) -> &mut Section {
        let idx = SECTION_NAMES
            .iter()
            .position(|n| *n == name)
            .expect("section names are fixed at compile time");
        &mut self.sections[idx]
    }

    fn line_err(&self, line: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::Line { path: self.path.clone(), line, message: message.into() }
    }

    fn file_err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::File { path: self.path.clone(), message: message.into() }
    }
}

fn lex_raw(text: &str, path: &Path) -> Result<RawConfig, ConfigError> {
    let display = path.display().to_string();
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let mut raw = RawConfig {
        path: display,
        base_dir,
        sections: SECTION_NAMES.iter().map(|_| Section::default()).collect(),
    };
    let mut current: Option<usize> = None;
    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match full_line.find('#') {
            Some(pos) => &full_line[..pos],
            None => full_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| raw.line_err(line_no, "section header is missing ']'"))?
                .trim();
            let pos = SECTION_NAMES.iter().position(|n| *n == name).ok_or_else(|| {
                raw.line_err(
                    line_no,
                    format!(
                        "unknown section [{name}]; expected one of [run], [grid], [norm], \
                         [problem], [solver], [output]"
                    ),
                )
            })?;
            if let Some(prev) = raw.sections[pos].header_line {
                return Err(raw.line_err(
                    line_no,
                    format!("section [{name}] already appeared on line {prev}"),
                ));
            }
            raw.sections[pos].header_line = Some(line_no);
            current = Some(pos);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            raw.line_err(line_no, "expected 'key = value' or a [section] header")
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(raw.line_err(line_no, "empty key before '='"));
        }
        if value.is_empty() {
            return Err(raw.line_err(line_no, format!("empty value for key '{key}'")));
        }
        let section = current
            .ok_or_else(|| raw.line_err(line_no, "key appears before any [section] header"))?;
        if let Some(prev) =
            raw.sections[section].entries.iter().find(|e| e.key == key)
        {
            return Err(raw.line_err(
                line_no,
                format!(
                    "duplicate key '{key}' in [{}]; first set on line {}",
                    SECTION_NAMES[section], prev.line
                ),
            ));
        }
        raw.sections[section].entries.push(RawEntry {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
            taken: false,
        });
    }
    Ok(raw)
}

fn parse_f64(raw: &RawConfig, section: &str, key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| {
        raw.line_err(line, format!("[{section}] {key}: expected a real number, got '{value}'"))
    })?;
    if !v.is_finite() {
        return Err(raw.line_err(line, format!("[{section}] {key}: value must be finite")));
    }
    Ok(v)
}

fn parse_usize(raw: &RawConfig, section: &str, key: &str, value: &str, line: usize) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| {
        raw.line_err(
            line,
            format!("[{section}] {key}: expected a nonnegative integer, got '{value}'"),
        )
    })
}

fn parse_list_f64(raw: &RawConfig, section: &str, key: &str, value: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|piece| parse_f64(raw, section, key, piece.trim(), line))
        .collect()
}

fn parse_list_usize(raw: &RawConfig, section: &str, key: &str, value: &str, line: usize) -> Result<Vec<usize>, ConfigError> {
    value
        .split(',')
        .map(|piece| parse_usize(raw, section, key, piece.trim(), line))
        .collect()
}

/// Typed take helpers over one section.
struct SectionReader<'a> {
    raw: &'a mut RawConfig,
    name: &'static str,
}

impl<'a> SectionReader<'a> {
    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.raw.section(self.name).take(key)
    }

    fn required(&mut self, key: &str, command: Command) -> Result<(String, usize), ConfigError> {
        self.take_raw(key).ok_or_else(|| {
            self.raw.file_err(format!(
                "missing required key '{key}' in [{}] for {}",
                self.name,
                command.name()
            ))
        })
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                let v = parse_f64(self.raw, self.name, key, &v, line)?;
                Ok(Some((v, line)))
            }
        }
    }

    fn usize_opt(&mut self, key: &str) -> Result<Option<(usize, usize)>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                let v = parse_usize(self.raw, self.name, key, &v, line)?;
                Ok(Some((v, line)))
            }
        }
    }

    fn f64_required(&mut self, key: &str, command: Command) -> Result<(f64, usize), ConfigError> {
        let (v, line) = self.required(key, command)?;
        Ok((parse_f64(self.raw, self.name, key, &v, line)?, line))
    }
}

fn field_spec(
    raw: &RawConfig,
    section: &str,
    key: &str,
    value: &str,
    line: usize,
    dim: usize,
) -> Result<FieldSpec, ConfigError> {
    if let Some(path) = value.strip_prefix("csv:") {
        let path = path.trim();
        if path.is_empty() {
            return Err(raw.line_err(line, format!("[{section}] {key}: empty path after 'csv:'")));
        }
        let path = Path::new(path);
        let resolved = if path.is_absolute() {
            path.to_path_buf()
        } else {
            raw.base_dir.join(path)
        };
        return Ok(FieldSpec::Csv(resolved));
    }
    let expr = expr::parse(value, dim).map_err(|e| {
        raw.line_err(line, format!("[{section}] {key}: in expression '{value}': {e}"))
    })?;
    Ok(FieldSpec::Expr(expr))
}

/// The regime rule shared by every solve command, checked here so the
/// diagnostic carries the line of `p`.
fn check_regime(raw: &RawConfig, kind: NormKind, p: f64, p_line: usize) -> Result<(), ConfigError> {
    if p >= 2.0 {
        return Ok(());
    }
    let supported = match kind {
        NormKind::Euclidean => true,
        NormKind::TNorm { t } => t == p,
        NormKind::Quartic { .. } => false,
    };
    if supported {
        return Ok(());
    }
    let kind_name = match kind {
        NormKind::Euclidean => "euclidean".to_string(),
        NormKind::TNorm { t } => format!("t_norm(t = {t})"),
        NormKind::Quartic { lambda, mu } => format!("quartic(lambda = {lambda}, mu = {mu})"),
    };
    Err(raw.line_err(
        p_line,
        format!(
            "p = {p} with the {kind_name} norm is outside the supported regime: \
             p < 2 requires the euclidean norm or the t-norm with t = p"
        ),
    ))
}

/// Parse and validate a complete configuration. `path` names the file
/// in diagnostics and anchors relative `csv:` field sources.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
    let mut raw = lex_raw(text, path)?;

    // [run]
    let command_entry = raw.section("run").take("command");
    let (command, _) = command_entry
        .ok_or_else(|| raw.file_err("missing required key 'command' in [run]"))?;
    let command = Command::from_name(&command).ok_or_else(|| {
        raw.file_err(format!(
            "unknown command '{command}'; expected check-norm, solve-convex, eigen, \
             solve-singular, or solve-multiplicity"
        ))
    })?;

    // [grid]
    let grid = {
        let mut s = SectionReader { raw: &mut raw, name: "grid" };
        let (dim, dim_line) = s.usize_opt("dim")?.map(Ok).unwrap_or_else(|| {
            Err(s.raw.file_err(format!(
                "missing required key 'dim' in [grid] for {}",
                command.name()
            )))
        })?;
        if dim != 1 && dim != 2 {
            return Err(raw.line_err(dim_line, format!("[grid] dim must be 1 or 2, got {dim}")));
        }
        let mut s = SectionReader { raw: &mut raw, name: "grid" };
        let extents_raw = s.take_raw("extents");
        let resolution_raw = s.take_raw("resolution");
        let needs_mesh = command != Command::CheckNorm;
        let extents = match (extents_raw, needs_mesh) {
            (Some((v, line)), _) => {
                let vals = parse_list_f64(&raw, "grid", "extents", &v, line)?;
                if vals.len() != 2 * dim {
                    return Err(raw.line_err(
                        line,
                        format!(
                            "[grid] extents: expected {} comma-separated values for dim = {dim}, \
                             got {}",
                            2 * dim,
                            vals.len()
                        ),
                    ));
                }
                let pairs: Vec<(f64, f64)> =
                    vals.chunks(2).map(|c| (c[0], c[1])).collect();
                for (axis, (a, b)) in pairs.iter().enumerate() {
                    if !(a < b) {
                        return Err(raw.line_err(
                            line,
                            format!(
                                "[grid] extents: axis {axis} needs low < high, got ({a}, {b})"
                            ),
                        ));
                    }
                }
                pairs
            }
            (None, false) => Vec::new(),
            (None, true) => {
                return Err(raw.file_err(format!(
                    "missing required key 'extents' in [grid] for {}",
                    command.name()
                )))
            }
        };
        let resolution = match (resolution_raw, needs_mesh) {
            (Some((v, line)), _) => {
                let vals = parse_list_usize(&raw, "grid", "resolution", &v, line)?;
                if vals.len() != dim {
                    return Err(raw.line_err(
                        line,
                        format!(
                            "[grid] resolution: expected {dim} value(s) for dim = {dim}, got {}",
                            vals.len()
                        ),
                    ));
                }
                for &r in &vals {
                    if r < 2 {
                        return Err(raw.line_err(
                            line,
                            format!(
                                "[grid] resolution: each axis needs at least 2 cells, got {r}"
                            ),
                        ));
                    }
                }
                vals
            }
            (None, false) => Vec::new(),
            (None, true) => {
                return Err(raw.file_err(format!(
                    "missing required key 'resolution' in [grid] for {}",
                    command.name()
                )))
            }
        };
        GridSpec { dim, extents, resolution }
    };

    // [norm]
    let norm = {
        let mut s = SectionReader { raw: &mut raw, name: "norm" };
        let (kind, kind_line) = s.required("kind", command)?;
        match kind.as_str() {
            "euclidean" => NormKind::Euclidean,
            "t_norm" => {
                let (t, t_line) = match s.f64_opt("t")? {
                    Some(v) => v,
                    None => {
                        return Err(raw
                            .file_err("norm kind t_norm requires key 't' in [norm]"))
                    }
                };
                if !(t > 1.0) {
                    return Err(
                        raw.line_err(t_line, format!("[norm] t must exceed 1, got {t}"))
                    );
                }
                NormKind::TNorm { t }
            }
            "quartic" => {
                let lambda = s.f64_opt("lambda")?;
                let mu = s.f64_opt("mu")?;
                let ((lambda, l_line), (mu, m_line)) = match (lambda, mu) {
                    (Some(l), Some(m)) => (l, m),
                    _ => {
                        return Err(raw.file_err(
                            "norm kind quartic requires keys 'lambda' and 'mu' in [norm]",
                        ))
                    }
                };
                if !(lambda > 0.0) {
                    return Err(raw.line_err(
                        l_line,
                        format!("[norm] lambda must be positive, got {lambda}"),
                    ));
                }
                if !(mu > 0.0) {
                    return Err(
                        raw.line_err(m_line, format!("[norm] mu must be positive, got {mu}"))
                    );
                }
                NormKind::Quartic { lambda, mu }
            }
            other => {
                return Err(raw.line_err(
                    kind_line,
                    format!(
                        "[norm] kind: unknown kind '{other}'; expected euclidean, t_norm, \
                         or quartic"
                    ),
                ))
            }
        }
    };

    // [problem]
    let mut p = None;
    let mut g = None;
    let mut f = None;
    let mut q = None;
    let mut lambda = None;
    let mut r = None;
    let mut delta = None;
    if command != Command::CheckNorm {
        let mut s = SectionReader { raw: &mut raw, name: "problem" };
        let (p_val, p_line) = s.f64_required("p", command)?;
        if !(p_val > 1.0) {
            return Err(raw.line_err(
                p_line,
                format!("[problem] p must exceed 1, got {p_val}"),
            ));
        }
        check_regime(&raw, norm, p_val, p_line)?;
        p = Some(p_val);

        let dim = grid.dim;
        let take_field = |raw: &mut RawConfig, key: &str, required: bool| -> Result<Option<FieldSpec>, ConfigError> {
            let entry = raw.section("problem").take(key);
            match entry {
                Some((value, line)) => {
                    Ok(Some(field_spec(raw, "problem", key, &value, line, dim)?))
                }
                None if required => Err(raw.file_err(format!(
                    "missing required key '{key}' in [problem] for {}",
                    command.name()
                ))),
                None => Ok(None),
            }
        };

        match command {
            Command::SolveConvex => {
                g = take_field(&mut raw, "g", true)?;
            }
            Command::Eigen => {}
            Command::SolveSingular => {
                f = take_field(&mut raw, "f", true)?;
                q = take_field(&mut raw, "q", true)?;
                let mut s = SectionReader { raw: &mut raw, name: "problem" };
                let (d, d_line) = s.f64_required("delta", command)?;
                if !(d >= 0.0) {
                    return Err(raw.line_err(
                        d_line,
                        format!("[problem] delta must be nonnegative, got {d}"),
                    ));
                }
                delta = Some(d);
            }
            Command::SolveMultiplicity => {
                q = take_field(&mut raw, "q", true)?;
                let mut s = SectionReader { raw: &mut raw, name: "problem" };
                let (l, l_line) = s.f64_required("lambda", command)?;
                if !(l > 0.0) {
                    return Err(raw.line_err(
                        l_line,
                        format!("[problem] lambda must be positive, got {l}"),
                    ));
                }
                let (r_val, r_line) = s.f64_required("r", command)?;
                if !(r_val > 0.0) {
                    return Err(raw.line_err(
                        r_line,
                        format!("[problem] r must be positive, got {r_val}"),
                    ));
                }
                lambda = Some(l);
                r = Some(r_val);
            }
            Command::CheckNorm => unreachable!("handled by the surrounding condition"),
        }
    }

    // [solver]
    let solver = {
        let mut s = SectionReader { raw: &mut raw, name: "solver" };
        let mut spec = SolverSpec {
            seed: s.usize_opt("seed")?.map(|(v, _)| v as u64).unwrap_or(0),
            ..SolverSpec::default()
        };
        let descent = matches!(
            command,
            Command::SolveConvex
                | Command::Eigen
                | Command::SolveSingular
                | Command::SolveMultiplicity
        );
        if descent {
            if let Some((v, line)) = s.f64_opt("tol_grad")? {
                if !(v > 0.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] tol_grad must be positive, got {v}"),
                    ));
                }
                spec.tol_grad = Some(v);
            }
            if let Some((v, line)) = s.usize_opt("max_iters")? {
                if v == 0 {
                    return Err(s
                        .raw
                        .line_err(line, "[solver] max_iters must be at least 1"));
                }
                spec.max_iters = Some(v);
            }
        }
        if command == Command::SolveSingular {
            if let Some((v, line)) = s.f64_opt("tol_outer")? {
                if !(v > 0.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] tol_outer must be positive, got {v}"),
                    ));
                }
                spec.tol_outer = Some(v);
            }
            if let Some((v, line)) = s.f64_opt("tol_fp")? {
                if !(v > 0.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] tol_fp must be positive, got {v}"),
                    ));
                }
                spec.tol_fp = Some(v);
            }
            if let Some((v, line)) = s.usize_opt("max_fp_iters")? {
                if v == 0 {
                    return Err(s
                        .raw
                        .line_err(line, "[solver] max_fp_iters must be at least 1"));
                }
                spec.max_fp_iters = Some(v);
            }
            if let Some((v, line)) = s.take_raw("n_schedule") {
                let vals = parse_list_usize(s.raw, "solver", "n_schedule", &v, line)?;
                if vals.is_empty() || vals[0] == 0 {
                    return Err(s.raw.line_err(
                        line,
                        "[solver] n_schedule needs positive truncation levels",
                    ));
                }
                if vals.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(s.raw.line_err(
                        line,
                        "[solver] n_schedule must be strictly increasing",
                    ));
                }
                spec.n_schedule = Some(vals);
            }
        }
        if command == Command::SolveMultiplicity {
            if let Some((v, line)) = s.take_raw("eps_schedule") {
                let vals = parse_list_f64(s.raw, "solver", "eps_schedule", &v, line)?;
                if vals.is_empty() || vals.iter().any(|&e| !(e > 0.0)) {
                    return Err(s.raw.line_err(
                        line,
                        "[solver] eps_schedule needs positive regularization levels",
                    ));
                }
                if vals.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(s.raw.line_err(
                        line,
                        "[solver] eps_schedule must be strictly decreasing",
                    ));
                }
                spec.eps_schedule = Some(vals);
            }
            if let Some((v, line)) = s.f64_opt("k")? {
                if !(v > 0.0 && v < 1.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] k must lie strictly between 0 and 1, got {v}"),
                    ));
                }
                spec.k = Some(v);
            }
            spec.probe_count = s.usize_opt("probe_count")?.map(|(v, _)| v);
            spec.segments = s.usize_opt("segments")?.map(|(v, _)| v);
            spec.max_deform_iters = s.usize_opt("max_deform_iters")?.map(|(v, _)| v);
            if let Some((v, line)) = s.f64_opt("descent_step")? {
                if !(v > 0.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] descent_step must be positive, got {v}"),
                    ));
                }
                spec.descent_step = Some(v);
            }
            spec.refine_rounds = s.usize_opt("refine_rounds")?.map(|(v, _)| v);
        }
        if command == Command::CheckNorm {
            if let Some((v, line)) = s.usize_opt("samples")? {
                if v == 0 {
                    return Err(s
                        .raw
                        .line_err(line, "[solver] samples must be at least 1"));
                }
                spec.samples = Some(v);
            }
            if let Some((v, line)) = s.f64_opt("tol_check")? {
                if !(v > 0.0) {
                    return Err(s.raw.line_err(
                        line,
                        format!("[solver] tol_check must be positive, got {v}"),
                    ));
                }
                spec.tol_check = Some(v);
            }
        }
        spec
    };

    // [output]
    let (out_dir, prefix) = {
        let mut s = SectionReader { raw: &mut raw, name: "output" };
        let dir = s
            .take_raw("directory")
            .map(|(v, _)| PathBuf::from(v))
            .unwrap_or_else(|| PathBuf::from("."));
        let prefix = match s.take_raw("prefix") {
            Some((v, line)) => {
                if v.contains('/') || v.contains('\\') || v.contains("..") {
                    return Err(raw.line_err(
                        line,
                        format!("[output] prefix must be a bare file name stem, got '{v}'"),
                    ));
                }
                v
            }
            None => "run".to_string(),
        };
        (dir, prefix)
    };

    // Anything not consumed by the selected command is an error.
    for (name, section) in SECTION_NAMES.iter().zip(&raw.sections) {
        if let Some(entry) = section.first_untaken() {
            return Err(ConfigError::Line {
                path: raw.path.clone(),
                line: entry.line,
                message: format!(
                    "unknown key '{}' in [{name}] (not used by {})",
                    entry.key,
                    command.name()
                ),
            });
        }
    }

    Ok(RunConfig {
        command,
        grid,
        norm,
        p,
        g,
        f,
        q,
        lambda,
        r,
        delta,
        solver,
        out_dir,
        prefix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, Path::new("/tmp/config-under-test/run.cfg"))
    }

    const SINGULAR: &str = "\
[run]
command = solve-singular

[grid]
dim = 1
extents = 0, 1
resolution = 64

[norm]
kind = euclidean

[problem]
p = 2
f = 1
q = 0.5
delta = 0.1

[solver]
seed = 0

[output]
directory = out
prefix = singular
";

    #[test]
    fn minimal_singular_config_parses() {
        let cfg = parse(SINGULAR).expect("the minimal singular config is valid");
        assert_eq!(cfg.command, Command::SolveSingular);
        assert_eq!(cfg.grid.dim, 1);
        assert_eq!(cfg.grid.extents, vec![(0.0, 1.0)]);
        assert_eq!(cfg.grid.resolution, vec![64]);
        assert!(matches!(cfg.norm, NormKind::Euclidean));
        assert_eq!(cfg.p, Some(2.0));
        assert_eq!(cfg.delta, Some(0.1));
        assert!(matches!(cfg.f, Some(FieldSpec::Expr(_))));
        assert_eq!(cfg.prefix, "singular");
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let text = SINGULAR.replace("delta = 0.1", "delta = 0.1\nbogus = 3");
        let err = parse(&text).expect_err("unknown keys must be rejected");
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "names the key: {msg}");
        assert!(msg.contains(":17:"), "carries the line: {msg}");
    }

    #[test]
    fn inapplicable_key_is_rejected() {
        let text = SINGULAR.replace("delta = 0.1", "delta = 0.1\ng = 1");
        let err = parse(&text).expect_err("convex-only keys are rejected for singular runs");
        assert!(err.to_string().contains("'g'"), "{err}");
    }

    #[test]
    fn duplicate_keys_and_sections_are_rejected() {
        let text = SINGULAR.replace("p = 2", "p = 2\np = 3");
        let err = parse(&text).expect_err("duplicate key");
        assert!(err.to_string().contains("duplicate key 'p'"), "{err}");

        let text = format!("{SINGULAR}\n[grid]\ndim = 2\n");
        let err = parse(&text).expect_err("duplicate section");
        assert!(err.to_string().contains("already appeared"), "{err}");
    }

    #[test]
    fn missing_required_key_names_section_and_command() {
        let text = SINGULAR.replace("delta = 0.1", "");
        let err = parse(&text).expect_err("delta is required for singular runs");
        let msg = err.to_string();
        assert!(
            msg.contains("'delta'") && msg.contains("[problem]") && msg.contains("solve-singular"),
            "full context in the diagnostic: {msg}"
        );
    }

    #[test]
    fn regime_violation_is_a_config_error() {
        let text = "\
[run]
command = solve-convex
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = t_norm
t = 4
[problem]
p = 1.8
g = 1
";
        let err = parse(text).expect_err("p = 1.8 with t_norm(4) is unsupported");
        let msg = err.to_string();
        assert!(
            msg.contains("euclidean norm or the t-norm with t = p"),
            "states the rule functionally: {msg}"
        );
        let ok = text.replace("p = 1.8", "p = 4");
        parse(&ok).expect("t = p = 4 is fine at p >= 2");
        let ok = text.replace("t = 4", "t = 1.8");
        parse(&ok).expect("t = p = 1.8 is inside the regime");
    }

    #[test]
    fn extent_and_resolution_shapes_are_checked() {
        let text = SINGULAR.replace("extents = 0, 1", "extents = 0, 1, 0, 1");
        let err = parse(&text).expect_err("1D grids take one interval");
        assert!(err.to_string().contains("extents"), "{err}");

        let text = SINGULAR.replace("extents = 0, 1", "extents = 1, 0");
        let err = parse(&text).expect_err("reversed interval");
        assert!(err.to_string().contains("low < high"), "{err}");

        let text = SINGULAR.replace("resolution = 64", "resolution = 1");
        assert!(parse(&text).is_err(), "degenerate resolution is rejected");
    }

    #[test]
    fn csv_field_sources_resolve_relative_to_the_config() {
        let text = SINGULAR.replace("f = 1", "f = csv:fields/f.csv");
        let cfg = parse(&text).expect("csv spec parses");
        match cfg.f {
            Some(FieldSpec::Csv(path)) => {
                assert_eq!(path, Path::new("/tmp/config-under-test/fields/f.csv"));
            }
            other => panic!("expected a csv field source, got {other:?}"),
        }
    }

    #[test]
    fn expression_errors_carry_the_key_and_line() {
        let text = SINGULAR.replace("q = 0.5", "q = 0.5 + sin(");
        let err = parse(&text).expect_err("broken expression");
        let msg = err.to_string();
        assert!(msg.contains("'q'") || msg.contains(" q:"), "names the key: {msg}");

        let text = SINGULAR.replace("q = 0.5", "q = y");
        let err = parse(&text).expect_err("y on a 1D grid");
        assert!(err.to_string().contains("2-dimensional"), "{err}");
    }

    #[test]
    fn schedules_are_shape_checked() {
        let text = SINGULAR.replace("seed = 0", "seed = 0\nn_schedule = 4, 2");
        let err = parse(&text).expect_err("schedules must increase");
        assert!(err.to_string().contains("strictly increasing"), "{err}");

        let multiplicity = "\
[run]
command = solve-multiplicity
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 1.5
q = 0.5
lambda = 0.05
r = 2
[solver]
eps_schedule = 1e-2, 1e-1
";
        let err = parse(multiplicity).expect_err("eps schedules must decrease");
        assert!(err.to_string().contains("strictly decreasing"), "{err}");
    }

    #[test]
    fn check_norm_needs_only_dim_and_norm() {
        let text = "\
[run]
command = check-norm
[grid]
dim = 2
[norm]
kind = quartic
lambda = 1
mu = 1
";
        let cfg = parse(text).expect("check-norm without a mesh is valid");
        assert!(cfg.grid.extents.is_empty());
        assert!(matches!(cfg.norm, NormKind::Quartic { .. }));
    }
}
