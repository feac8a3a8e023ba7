//! Experiment configuration: one TOML file describes a run completely.

use crate::params::ProblemParams;
use crate::quadrature::QuadratureSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bubble,
    Interactions,
    Expansion,
    Landscape,
    Correction,
    All,
}

impl Suite {
    pub const CONCRETE: [Suite; 5] = [
        Suite::Bubble,
        Suite::Interactions,
        Suite::Expansion,
        Suite::Landscape,
        Suite::Correction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Bubble => "bubble",
            Suite::Interactions => "interactions",
            Suite::Expansion => "expansion",
            Suite::Landscape => "landscape",
            Suite::Correction => "correction",
            Suite::All => "all",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Suite::Bubble => {
                "bubble identity by Riesz quadrature, the energy constant A, symmetry orbits"
            }
            Suite::Interactions => {
                "pair interaction decay, lattice sums and their asymptotes, parity identity"
            }
            Suite::Expansion => {
                "expansion terms, error-term and nonlinearity scaling, weighted-norm estimates"
            }
            Suite::Landscape => {
                "reduced (r, eps) landscape: critical point, boundary signs, max-min certificate"
            }
            Suite::Correction => {
                "projected linear solve stability and the contraction for the correction"
            }
            Suite::All => "every suite above",
        }
    }

    pub fn expand(&self) -> Vec<Suite> {
        match self {
            Suite::All => Suite::CONCRETE.to_vec(),
            s => vec![*s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// Polygon sizes for the reduced landscape (coupled regime).
    pub k: Vec<usize>,
    /// Polygon sizes for the correction-solver stability sweep.
    pub k_correction: Vec<usize>,
    /// ν values for the error-term scaling.
    pub nu: Vec<f64>,
    /// Bubble separations for the pair-interaction fit.
    pub d: Vec<f64>,
    /// Concentrations for the deficit scaling.
    pub eps: Vec<f64>,
    /// Landscape grid resolution per axis.
    pub grid: usize,
    pub starts: usize,
    /// Random right-hand sides per k in the stability sweep.
    pub sources: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            k: vec![16, 32],
            k_correction: vec![4, 8, 16],
            nu: vec![50.0, 100.0, 200.0, 400.0],
            d: vec![20.0, 40.0, 80.0, 160.0],
            eps: vec![0.5, 1.0, 2.0],
            grid: 64,
            starts: 10,
            sources: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemParams,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_suite")]
    pub suite: Suite,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_suite() -> Suite {
    Suite::All
}

fn default_output() -> PathBuf {
    PathBuf::from("fraclab-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemParams::default(),
            quadrature: QuadratureSpec::default(),
            suite: default_suite(),
            sweep: Sweep::default(),
            output: default_output(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    /// 1-based line in the source text, when known.
    pub line: Option<usize>,
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every semantic problem with the configuration, not just the first.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(ConfigIssue {
                line: None,
                field: field.to_string(),
                message,
            })
        };
        for (table, msgs) in [
            ("problem", self.problem.violations()),
            ("quadrature", self.quadrature.violations()),
        ] {
            for v in msgs {
                push(&field_of(table, &v), v);
            }
        }
        let sw = &self.sweep;
        let lists: [(&str, usize); 5] = [
            ("sweep.k", sw.k.len()),
            ("sweep.k_correction", sw.k_correction.len()),
            ("sweep.nu", sw.nu.len()),
            ("sweep.d", sw.d.len()),
            ("sweep.eps", sw.eps.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                push(name, "sweep range must be nonempty".into());
            }
        }
        for (name, min, vals) in [
            ("sweep.nu", 2, &sw.nu),
            ("sweep.d", 2, &sw.d),
            ("sweep.eps", 2, &sw.eps),
        ] {
            if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                push(name, "values must be positive and finite".into());
            }
            if !vals.is_empty() && vals.len() < min {
                push(name, format!("a slope fit needs at least {min} values"));
            }
        }
        if sw.k.iter().chain(&sw.k_correction).any(|&k| k < 2) {
            push("sweep.k", "polygon sizes must be at least 2".into());
        }
        if sw.k_correction.iter().any(|&k| k > 16) {
            push(
                "sweep.k_correction",
                "the correction solver is sized for k <= 16".into(),
            );
        }
        if sw.grid < 2 {
            push("sweep.grid", "grid needs at least 2 points per axis".into());
        }
        if sw.starts == 0 {
            push("sweep.starts", "need at least one random start".into());
        }
        if sw.sources == 0 {
            push(
                "sweep.sources",
                "need at least one random right-hand side".into(),
            );
        }
        if self.output.as_os_str().is_empty() {
            push("output", "output directory must be set".into());
        }
        out
    }
}

/// Messages lead with the offending key (`m = 3.2 must ...`); fall back to the table.
fn field_of(table: &str, msg: &str) -> String {
    let key = msg.split([' ', '=']).next().unwrap_or("");
    if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        format!("{table}.{key}")
    } else {
        table.to_string()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Find the line where `key` is assigned inside `[table]` (or at top level).
fn locate(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parse and fully validate a configuration, collecting all problems.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let cfg: ExperimentConfig = match toml::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start));
            let field = e
                .span()
                .and_then(|s| text.get(s.clone()))
                .map(|t| t.split(['=', '\n']).next().unwrap_or("").trim().to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| "<document>".into());
            return Err(vec![ConfigIssue {
                line,
                field,
                message: e.message().to_string(),
            }]);
        }
    };
    let mut issues = cfg.issues();
    for is in issues.iter_mut() {
        let (table, key) = match is.field.split_once('.') {
            Some((t, k)) => (t.to_string(), k.to_string()),
            None => (String::new(), is.field.clone()),
        };
        is.line = locate(text, &table, &key).or_else(|| {
            // otherwise point at the table header
            let header = if table.is_empty() { &key } else { &table };
            text.lines()
                .position(|l| l.trim() == format!("[{header}]"))
                .map(|i| i + 1)
        });
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(issues)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigIssue {
            line: None,
            field: path.display().to_string(),
            message: e.to_string(),
        }]
    })?;
    validate_config(&text)
}
