// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Seeded, replicated sample → build → count → analyze pipelines with flat-file
//! outputs.
//!
//! Replication `r` depends only on `(seed, r)`. Replications run concurrently
//! in chunks; every file is written by a single writer in replication order,
//! so outputs are byte-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    anchored_functional, clustering_coefficient, clustering_from_totals, compute_functionals, grid_index,
    sum_and_max_paths, uniform_grid, Centering, FunctionalKind, VertexFunctionals,
};
use crate::geometry::ModelParams;
use crate::graph::build_graph;
use crate::sampler::{sample_cloud_with, RadialLaw};
use crate::stats::{default_k_order, hill_estimator, hill_plot, ks_distance, log_slope, positive_values};
use crate::theory::{
    clique_mean_asymptote, clique_regime_holds, clique_scaling, star_mean_envelope, star_regime, star_scaling,
    StarRegime, DEFAULT_ELL_BUDGET,
};

/// Code version string embedded in every output file.
pub const VERSION: &str = concat!("hrgg ", env!("CARGO_PKG_VERSION"));

/// Number of top vertices (by `D_3`) entering the `(D_3, C_3)` log-slope.
pub const TOP_VERTICES: usize = 20;

const HILL_PLOT_KS: [usize; 10] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!("unknown output format {other:?}, expected csv or json"))),
        }
    }
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_ms")]
    pub ms: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub anchor_depths: Vec<f64>,
    /// Number of time points on `[0, 1]` for the process paths.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_ks() -> Vec<usize> {
    vec![2, 3]
}

fn default_ms() -> Vec<usize> {
    vec![3]
}

fn default_reps() -> usize {
    1
}

fn default_grid() -> usize {
    101
}

fn default_out() -> PathBuf {
    PathBuf::from("hrgg-out")
}

impl ExperimentConfig {
    /// Default orders, one replication, seed 0.
    pub fn new(params: ModelParams) -> Self {
        ExperimentConfig {
            params,
            ks: default_ks(),
            ms: default_ms(),
            reps: default_reps(),
            seed: 0,
            anchor_depths: Vec::new(),
            grid: default_grid(),
            out: default_out(),
            format: OutputFormat::Csv,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Checks the hard invariants and returns regime warnings. Orders are
    /// sorted and deduplicated in place.
    pub fn validate(&mut self) -> Result<Vec<String>> {
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if let Some(k) = self.ks.iter().find(|&&k| k < 2) {
            return Err(Error::invalid(format!("star orders must be at least 2, got {k}")));
        }
        if let Some(m) = self.ms.iter().find(|&&m| m < 3) {
            return Err(Error::invalid(format!("clique orders must be at least 3, got {m}")));
        }
        if self.grid < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {}", self.grid)));
        }
        let r = self.params.radius();
        if let Some(u) = self.anchor_depths.iter().find(|u| !(0.0..=r).contains(*u)) {
            return Err(Error::invalid(format!("anchor depth {u} outside [0, {r}]")));
        }
        self.ks.sort_unstable();
        self.ks.dedup();
        self.ms.sort_unstable();
        self.ms.dedup();
        Ok(regime_warnings(self.params.alpha(), &self.ks, &self.ms))
    }

    fn header_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Human-readable warnings for orders whose limit theorem does not cover `alpha`.
pub fn regime_warnings(alpha: f64, ks: &[usize], ms: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for &k in ks {
        match star_regime(alpha, k) {
            StarRegime::Boundary => out.push(format!(
                "k = {k}: alpha = {alpha} is the boundary case 2 alpha = k - 1, no stable limit is predicted"
            )),
            StarRegime::Gaussian => out.push(format!(
                "k = {k}: alpha = {alpha} >= k - 1 lies in the Gaussian regime, outside the stable limit theorem"
            )),
            _ => {}
        }
    }
    for &m in ms {
        if !clique_regime_holds(alpha, m) {
            let lower = (2.0 * m as f64 - 3.0) / (2.0 * m as f64 - 2.0);
            out.push(format!(
                "m = {m}: alpha = {alpha} is outside ({lower}, 1); the lower bound marks a phase transition"
            ));
        }
    }
    out
}

/// Everything computed for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationData {
    pub rep: u64,
    pub depths: Vec<f64>,
    pub functionals: VertexFunctionals,
    pub clustering: Option<f64>,
}

/// Samples, builds and counts replication `rep`.
pub fn run_replication(config: &ExperimentConfig, law: &RadialLaw, rep: u64) -> Result<ReplicationData> {
    let cloud = sample_cloud_with(law, &config.params, config.seed, rep);
    let depths = cloud.points.iter().map(|p| p.u).collect();
    let graph = build_graph(cloud);
    let functionals = compute_functionals(&graph, &config.ks, &config.ms)?;
    let clustering = match functionals.clique.get(&3) {
        Some(c3) => {
            let triangles: u128 = c3.iter().map(|&c| c as u128).sum();
            clustering_from_totals(triangles, wedge_total(&functionals.degree))
        }
        None => clustering_coefficient(&graph),
    };
    Ok(ReplicationData { rep, depths, functionals, clustering })
}

fn wedge_total(degree: &[u64]) -> u128 {
    degree.iter().map(|&d| d as u128 * (d as u128).saturating_sub(1)).sum()
}

/// One per-vertex series that receives a tail fit.
struct Series {
    label: String,
    predicted: f64,
    values: Vec<f64>,
}

fn series_of(f: &VertexFunctionals, alpha: f64) -> Vec<Series> {
    let mut out = vec![Series {
        label: "degree".into(),
        predicted: 2.0 * alpha,
        values: f.degree.iter().map(|&d| d as f64).collect(),
    }];
    for (&k, counts) in f.star.iter().filter(|(&k, _)| k >= 3) {
        out.push(Series {
            label: format!("D_{k}"),
            predicted: 2.0 * alpha / (k - 1) as f64,
            values: counts.iter().map(|&c| c as f64).collect(),
        });
    }
    for (&m, counts) in &f.clique {
        out.push(Series { label: format!("C_{m}"), predicted: 2.0 * alpha, values: counts.iter().map(|&c| c as f64).collect() });
    }
    out
}

#[derive(Debug, Clone)]
struct SeriesFit {
    label: String,
    predicted: f64,
    estimate: Option<(f64, f64)>,
    dropped: usize,
    plot: Vec<(usize, f64)>,
}

/// Per-replication reductions used by the analysis.
#[derive(Debug, Clone)]
struct RepSummary {
    n: usize,
    star_sum: BTreeMap<usize, u128>,
    star_max: BTreeMap<usize, u128>,
    clique_sum: BTreeMap<usize, u128>,
    clique_max: BTreeMap<usize, u64>,
    clustering: Option<f64>,
    fits: Vec<SeriesFit>,
    slope: Option<f64>,
}

fn summarize(f: &VertexFunctionals, clustering: Option<f64>, alpha: f64) -> RepSummary {
    let star_sum = f.star.iter().map(|(&k, c)| (k, c.iter().sum())).collect();
    let star_max = f.star.iter().map(|(&k, c)| (k, c.iter().copied().max().unwrap_or(0))).collect();
    let clique_sum = f.clique.iter().map(|(&m, c)| (m, c.iter().map(|&x| x as u128).sum())).collect();
    let clique_max = f.clique.iter().map(|(&m, c)| (m, c.iter().copied().max().unwrap_or(0))).collect();
    let fits = series_of(f, alpha)
        .into_iter()
        .map(|s| {
            let (positive, dropped) = positive_values(s.values);
            let estimate = hill_estimator(&positive, default_k_order(positive.len()))
                .ok()
                .map(|fit| (fit.index_estimate, fit.standard_error));
            let ks: Vec<usize> = HILL_PLOT_KS.iter().copied().filter(|&k| k < positive.len()).collect();
            let plot = hill_plot(&positive, &ks).into_iter().map(|fit| (fit.k_order, fit.index_estimate)).collect();
            SeriesFit { label: s.label, predicted: s.predicted, estimate, dropped, plot }
        })
        .collect();
    RepSummary {
        n: f.len(),
        star_sum,
        star_max,
        clique_sum,
        clique_max,
        clustering,
        fits,
        slope: top_vertex_slope(f),
    }
}

/// Log-slope of `(D_3, C_3)` over the top vertices by `D_3` (ties by index),
/// skipping vertices with a zero coordinate.
fn top_vertex_slope(f: &VertexFunctionals) -> Option<f64> {
    let (d3, c3) = (f.star.get(&3)?, f.clique.get(&3)?);
    let mut order: Vec<usize> = (0..d3.len()).collect();
    order.sort_by(|&a, &b| d3[b].cmp(&d3[a]).then(a.cmp(&b)));
    let pairs: Vec<(f64, f64)> = order
        .into_iter()
        .take(TOP_VERTICES)
        .filter(|&v| d3[v] > 0 && c3[v] > 0)
        .map(|v| (d3[v] as f64, c3[v] as f64))
        .collect();
    log_slope(&pairs).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillPlotRow {
    pub k_order: usize,
    pub mean_estimate: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub functional: String,
    pub predicted_index: f64,
    /// Order statistic rule for the per-replication fits.
    pub k_rule: String,
    pub replications_fitted: usize,
    pub mean_estimate: Option<f64>,
    /// Spread of the estimates across replications.
    pub std_across_replications: Option<f64>,
    pub mean_standard_error: Option<f64>,
    pub zeros_dropped: usize,
    pub per_replication: Vec<Option<f64>>,
    pub hill_plot: Vec<HillPlotRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaSummary {
    pub functional: String,
    pub beta: f64,
    pub normalizer: f64,
    /// KS distance of the normalized maxima to `exp(-z^{-β})`.
    pub ks_distance: Option<f64>,
    pub normalized_maxima: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub top_vertices: usize,
    pub predicted_slope: f64,
    pub mean_slope: Option<f64>,
    pub per_replication: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub mean: Option<f64>,
    pub per_replication: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredSummary {
    pub depth: f64,
    pub functional: String,
    pub replications: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub ci95: (f64, f64),
    /// `(lower, upper)` moment envelope for stars, when defined at this depth.
    pub envelope: Option<(f64, f64)>,
    /// `C_{m,α} e^{(d-1)u/2}` for cliques, when the regime holds.
    pub asymptote: Option<f64>,
}

/// The final analysis document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub version: String,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub replications: usize,
    pub tail_fits: Vec<TailSummary>,
    pub maxima: Vec<MaximaSummary>,
    pub dependence: Option<DependenceSummary>,
    pub clustering: ClusteringSummary,
    pub anchored: Vec<AnchoredSummary>,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

fn frechet_cdf(beta: f64) -> impl Fn(f64) -> f64 {
    move |z| if z > 0.0 { (-z.powf(-beta)).exp() } else { 0.0 }
}

fn aggregate(config: &ExperimentConfig, warnings: Vec<String>, reps: &[RepSummary], anchored: Vec<AnchoredSummary>) -> Analysis {
    let params = &config.params;
    let mut tail_fits = Vec::new();
    if let Some(first) = reps.first() {
        for (i, template) in first.fits.iter().enumerate() {
            let per_rep: Vec<Option<f64>> = reps.iter().map(|r| r.fits[i].estimate.map(|e| e.0)).collect();
            let fitted: Vec<f64> = per_rep.iter().flatten().copied().collect();
            let errors: Vec<f64> = reps.iter().filter_map(|r| r.fits[i].estimate.map(|e| e.1)).collect();
            let (mean_estimate, std_across) = mean_sd(&fitted);
            let mut plot: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in reps {
                for &(k, est) in &r.fits[i].plot {
                    plot.entry(k).or_default().push(est);
                }
            }
            tail_fits.push(TailSummary {
                functional: template.label.clone(),
                predicted_index: template.predicted,
                k_rule: "floor(N^0.6) on positive values".into(),
                replications_fitted: fitted.len(),
                mean_estimate,
                std_across_replications: std_across,
                mean_standard_error: mean_sd(&errors).0,
                zeros_dropped: reps.iter().map(|r| r.fits[i].dropped).sum(),
                per_replication: per_rep,
                hill_plot: plot
                    .into_iter()
                    .map(|(k, v)| HillPlotRow {
                        k_order: k,
                        mean_estimate: v.iter().sum::<f64>() / v.len() as f64,
                        replications: v.len(),
                    })
                    .collect(),
            });
        }
    }

    let mut maxima = Vec::new();
    for &k in &config.ks {
        if let Ok(c) = star_scaling(params, k) {
            let z: Vec<f64> = reps.iter().map(|r| r.star_max[&k] as f64 / c.a_kn).collect();
            maxima.push(MaximaSummary {
                functional: format!("D_{k}"),
                beta: c.beta,
                normalizer: c.a_kn,
                ks_distance: ks_distance(&z, frechet_cdf(c.beta)).ok(),
                normalized_maxima: z,
            });
        }
    }
    for &m in &config.ms {
        if let Ok(c) = clique_scaling(params, m, DEFAULT_ELL_BUDGET) {
            let z: Vec<f64> = reps.iter().map(|r| r.clique_max[&m] as f64 / c.b_mn).collect();
            maxima.push(MaximaSummary {
                functional: format!("C_{m}"),
                beta: c.beta,
                normalizer: c.b_mn,
                ks_distance: ks_distance(&z, frechet_cdf(c.beta)).ok(),
                normalized_maxima: z,
            });
        }
    }

    let dependence = (config.ks.contains(&3) && config.ms.contains(&3)).then(|| {
        let per_replication: Vec<Option<f64>> = reps.iter().map(|r| r.slope).collect();
        let slopes: Vec<f64> = per_replication.iter().flatten().copied().collect();
        DependenceSummary { top_vertices: TOP_VERTICES, predicted_slope: 0.5, mean_slope: mean_sd(&slopes).0, per_replication }
    });

    let per_replication: Vec<Option<f64>> = reps.iter().map(|r| r.clustering).collect();
    let defined: Vec<f64> = per_replication.iter().flatten().copied().collect();
    Analysis {
        version: VERSION.into(),
        config: config.clone(),
        warnings,
        replications: reps.len(),
        tail_fits,
        maxima,
        dependence,
        clustering: ClusteringSummary { mean: mean_sd(&defined).0, per_replication },
        anchored,
    }
}

fn anchored_summaries(config: &ExperimentConfig) -> Result<Vec<AnchoredSummary>> {
    let params = &config.params;
    let mut out = Vec::new();
    for &u in &config.anchor_depths {
        for &k in &config.ks {
            let s = anchored_functional(params, u, FunctionalKind::Star(k), config.seed, config.reps)?;
            out.push(AnchoredSummary {
                depth: u,
                functional: format!("D_{k}"),
                replications: s.counts.len(),
                mean: s.mean,
                std_dev: s.std_dev,
                ci95: s.ci95,
                envelope: star_mean_envelope(u, params, k, None).ok(),
                asymptote: None,
            });
        }
        for &m in &config.ms {
            let s = anchored_functional(params, u, FunctionalKind::Clique(m), config.seed, config.reps)?;
            out.push(AnchoredSummary {
                depth: u,
                functional: format!("C_{m}"),
                replications: s.counts.len(),
                mean: s.mean,
                std_dev: s.std_dev,
                ci95: s.ci95,
                envelope: None,
                asymptote: clique_mean_asymptote(u, params, m).ok(),
            });
        }
    }
    Ok(out)
}

/// Writes rows either as CSV (comment line with version and config, then a
/// header) or as a JSON document with `columns` and `rows`.
struct TableWriter {
    w: BufWriter<File>,
    format: OutputFormat,
    rows: usize,
}

impl TableWriter {
    fn create(path: &Path, format: OutputFormat, config: &ExperimentConfig, columns: &[String]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        match format {
            OutputFormat::Csv => {
                writeln!(w, "# {VERSION} config={}", config.header_json())?;
                writeln!(w, "{}", columns.join(","))?;
            }
            OutputFormat::Json => {
                write!(
                    w,
                    "{{\"version\":{},\"config\":{},\"columns\":{},\"rows\":[",
                    serde_json::to_string(VERSION)?,
                    config.header_json(),
                    serde_json::to_string(columns)?
                )?;
            }
        }
        Ok(TableWriter { w, format, rows: 0 })
    }

    /// `cells` are already formatted as CSV tokens that are also JSON literals,
    /// except `undefined`, which becomes `null` in JSON.
    fn row(&mut self, cells: &[String]) -> Result<()> {
        match self.format {
            OutputFormat::Csv => writeln!(self.w, "{}", cells.join(","))?,
            OutputFormat::Json => {
                let sep = if self.rows == 0 { "" } else { "," };
                let body: Vec<&str> = cells.iter().map(|c| if c == UNDEFINED { "null" } else { c.as_str() }).collect();
                write!(self.w, "{sep}[{}]", body.join(","))?;
            }
        }
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if self.format == OutputFormat::Json {
            writeln!(self.w, "]}}")?;
        }
        self.w.flush()?;
        Ok(())
    }
}

const UNDEFINED: &str = "undefined";

/// 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_else(|| UNDEFINED.into())
}

fn vertex_columns(config: &ExperimentConfig) -> Vec<String> {
    let mut cols: Vec<String> = ["rep", "vertex", "u", "degree"].map(String::from).to_vec();
    cols.extend(config.ks.iter().map(|k| format!("D_{k}")));
    cols.extend(config.ms.iter().map(|m| format!("C_{m}")));
    cols
}

fn replication_columns(config: &ExperimentConfig) -> Vec<String> {
    let mut cols = vec!["rep".to_string(), "N".to_string()];
    for k in &config.ks {
        cols.push(format!("sum_D{k}"));
        cols.push(format!("max_D{k}"));
    }
    for m in &config.ms {
        cols.push(format!("sum_C{m}"));
        cols.push(format!("max_C{m}"));
    }
    cols.push("CC".into());
    cols
}

/// Uncentered, unnormalized paths of one functional in one replication.
struct RawPath {
    label: String,
    n: usize,
    sums: Vec<f64>,
    maxs: Vec<f64>,
}

fn raw_paths(f: &VertexFunctionals, grid: &[f64]) -> Result<Vec<RawPath>> {
    let mut out = Vec::new();
    let mut push = |label: String, values: Vec<f64>| -> Result<()> {
        let (s, m) = sum_and_max_paths(&values, grid, 1.0, &Centering::None)?;
        out.push(RawPath { label, n: values.len(), sums: s.values, maxs: m.values });
        Ok(())
    };
    for (&k, c) in &f.star {
        push(format!("D_{k}"), c.iter().map(|&x| x as f64).collect())?;
    }
    for (&m, c) in &f.clique {
        push(format!("C_{m}"), c.iter().map(|&x| x as f64).collect())?;
    }
    Ok(out)
}

/// Normalizer and centering policy per functional label; `None` when no
/// scaling is defined for the parameters.
fn path_scalings(config: &ExperimentConfig) -> BTreeMap<String, (f64, bool)> {
    let mut out = BTreeMap::new();
    for &k in &config.ks {
        if let Ok(c) = star_scaling(&config.params, k) {
            let centered = star_regime(config.params.alpha(), k) == StarRegime::Centered;
            out.insert(format!("D_{k}"), (c.a_kn, centered));
        }
    }
    for &m in &config.ms {
        if let Ok(c) = clique_scaling(&config.params, m, DEFAULT_ELL_BUDGET) {
            out.insert(format!("C_{m}"), (c.b_mn, true));
        }
    }
    out
}

/// Paths of the files written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub analysis: Analysis,
}

/// Runs the configured replications on `workers` threads (all cores when
/// `None`) and writes `config.json`, `vertices`, `replications`, `paths`,
/// optionally `anchored.json`, and `analysis.json` into `config.out`.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let mut config = config.clone();
    let warnings = config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute(&config, warnings, workers.unwrap_or_else(rayon::current_num_threads)))
}

fn execute(config: &ExperimentConfig, warnings: Vec<String>, workers: usize) -> Result<ExperimentReport> {
    let dir = config.out.clone();
    fs::create_dir_all(&dir)?;
    let ext = config.format.extension();
    let config_path = dir.join("config.json");
    let vertices_path = dir.join(format!("vertices.{ext}"));
    let reps_path = dir.join(format!("replications.{ext}"));
    let paths_path = dir.join(format!("paths.{ext}"));
    fs::write(&config_path, config_document(config)?)?;

    let law = RadialLaw::new(&config.params);
    let grid = uniform_grid(config.grid);
    let alpha = config.params.alpha();
    let mut vertices = TableWriter::create(&vertices_path, config.format, config, &vertex_columns(config))?;
    let mut summaries_out = TableWriter::create(&reps_path, config.format, config, &replication_columns(config))?;
    let mut summaries = Vec::with_capacity(config.reps);
    let mut paths: Vec<Vec<RawPath>> = Vec::with_capacity(config.reps);

    let chunk = 2 * workers.max(1);
    let mut start = 0u64;
    while (start as usize) < config.reps {
        let end = (start + chunk as u64).min(config.reps as u64);
        let results = (start..end)
            .into_par_iter()
            .map(|rep| {
                let data = run_replication(config, &law, rep)?;
                let summary = summarize(&data.functionals, data.clustering, alpha);
                let raw = raw_paths(&data.functionals, &grid)?;
                Ok((data, summary, raw))
            })
            .collect::<Result<Vec<_>>>()?;
        for (data, summary, raw) in results {
            write_vertices(&mut vertices, &data)?;
            summaries_out.row(&replication_row(data.rep, &summary))?;
            summaries.push(summary);
            paths.push(raw);
        }
        start = end;
    }
    vertices.finish()?;
    summaries_out.finish()?;

    write_paths(&paths_path, config, &summaries, &paths, &grid)?;
    let mut files = vec![config_path, vertices_path, reps_path, paths_path];

    let anchored = anchored_summaries(config)?;
    if !anchored.is_empty() {
        let p = dir.join("anchored.json");
        fs::write(&p, serde_json::to_string_pretty(&anchored)? + "\n")?;
        files.push(p);
    }
    let analysis = aggregate(config, warnings, &summaries, anchored);
    let p = dir.join("analysis.json");
    fs::write(&p, serde_json::to_string_pretty(&analysis)? + "\n")?;
    files.push(p);
    Ok(ExperimentReport { dir, files, analysis })
}

fn config_document(config: &ExperimentConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        version: &'a str,
        config: &'a ExperimentConfig,
    }
    Ok(serde_json::to_string_pretty(&Doc { version: VERSION, config })? + "\n")
}

fn write_vertices(w: &mut TableWriter, data: &ReplicationData) -> Result<()> {
    let f = &data.functionals;
    let mut cells = Vec::new();
    for v in 0..f.len() {
        cells.clear();
        cells.push(data.rep.to_string());
        cells.push(v.to_string());
        cells.push(real(data.depths[v]));
        cells.push(f.degree[v].to_string());
        cells.extend(f.star.values().map(|c| c[v].to_string()));
        cells.extend(f.clique.values().map(|c| c[v].to_string()));
        w.row(&cells)?;
    }
    Ok(())
}

fn replication_row(rep: u64, s: &RepSummary) -> Vec<String> {
    let mut cells = vec![rep.to_string(), s.n.to_string()];
    for (k, sum) in &s.star_sum {
        cells.push(sum.to_string());
        cells.push(s.star_max[k].to_string());
    }
    for (m, sum) in &s.clique_sum {
        cells.push(sum.to_string());
        cells.push(s.clique_max[m].to_string());
    }
    cells.push(opt_real(s.clustering));
    cells
}

/// Normalized paths. Functionals in a centered regime are centered by
/// `⌊Nt⌋ μ̂`, where `μ̂` pools all vertices of all replications.
fn write_paths(path: &Path, config: &ExperimentConfig, summaries: &[RepSummary], paths: &[Vec<RawPath>], grid: &[f64]) -> Result<()> {
    let scalings = path_scalings(config);
    let total_n: usize = summaries.iter().map(|s| s.n).sum();
    let pooled_mean = |label: &str| -> f64 {
        let total: f64 = summaries
            .iter()
            .map(|s| {
                let (kind, order) = label.split_at(2);
                let order: usize = order.parse().expect("label suffix is an order");
                if kind == "D_" {
                    s.star_sum[&order] as f64
                } else {
                    s.clique_sum[&order] as f64
                }
            })
            .sum();
        if total_n == 0 {
            0.0
        } else {
            total / total_n as f64
        }
    };
    let means: BTreeMap<&String, f64> =
        scalings.iter().filter(|(_, &(_, centered))| centered).map(|(label, _)| (label, pooled_mean(label))).collect();
    let columns: Vec<String> = ["rep", "functional", "t", "sum", "max"].map(String::from).to_vec();
    let mut w = TableWriter::create(path, config.format, config, &columns)?;
    for (rep, raw) in paths.iter().enumerate() {
        for p in raw {
            let Some(&(norm, _)) = scalings.get(&p.label) else { continue };
            let mu = means.get(&p.label).copied().unwrap_or(0.0);
            for (i, &t) in grid.iter().enumerate() {
                let j = grid_index(p.n, t);
                let sum = (p.sums[i] - j as f64 * mu) / norm;
                let label = match config.format {
                    OutputFormat::Csv => p.label.clone(),
                    OutputFormat::Json => serde_json::to_string(&p.label)?,
                };
                w.row(&[rep.to_string(), label, real(t), real(sum), real(p.maxs[i] / norm)])?;
            }
        }
    }
    w.finish()
}

/// A parsed table: column names and string cells.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path, format: OutputFormat) -> Result<Table> {
        match format {
            OutputFormat::Csv => {
                let mut lines = BufReader::new(File::open(path)?).lines().filter(|l| match l {
                    Ok(l) => !l.starts_with('#'),
                    Err(_) => true,
                });
                let header = lines
                    .next()
                    .ok_or_else(|| Error::Parse(format!("{}: missing header", path.display())))??;
                let columns: Vec<String> = header.split(',').map(String::from).collect();
                let mut rows = Vec::new();
                for line in lines {
                    let line = line?;
                    if line.is_empty() {
                        continue;
                    }
                    let row: Vec<String> = line.split(',').map(String::from).collect();
                    if row.len() != columns.len() {
                        return Err(Error::Parse(format!("{}: row has {} cells, expected {}", path.display(), row.len(), columns.len())));
                    }
                    rows.push(row);
                }
                Ok(Table { columns, rows })
            }
            OutputFormat::Json => {
                #[derive(Deserialize)]
                struct Doc {
                    columns: Vec<String>,
                    rows: Vec<Vec<serde_json::Value>>,
                }
                let doc: Doc = serde_json::from_reader(BufReader::new(File::open(path)?))?;
                let rows = doc
                    .rows
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .map(|v| match v {
                                serde_json::Value::Null => UNDEFINED.to_string(),
                                serde_json::Value::String(s) => s,
                                other => other.to_string(),
                            })
                            .collect()
                    })
                    .collect();
                Ok(Table { columns: doc.columns, rows })
            }
        }
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name}")))
    }
}

fn parse<T: FromStr>(cell: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    cell.parse().map_err(|e| Error::Parse(format!("{what}: {cell:?}: {e}")))
}

/// Recomputes the analysis from the files of a finished experiment directory.
pub fn analyze_dir(dir: &Path) -> Result<Analysis> {
    #[derive(Deserialize)]
    struct Doc {
        config: ExperimentConfig,
    }
    let doc: Doc = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
    let mut config = doc.config;
    let warnings = config.validate()?;
    let ext = config.format.extension();
    let vertices = Table::read(&dir.join(format!("vertices.{ext}")), config.format)?;
    let reps = Table::read(&dir.join(format!("replications.{ext}")), config.format)?;

    let rep_col = vertices.index("rep")?;
    let degree_col = vertices.index("degree")?;
    let star_cols: Vec<(usize, usize)> =
        config.ks.iter().map(|&k| Ok((k, vertices.index(&format!("D_{k}"))?))).collect::<Result<_>>()?;
    let clique_cols: Vec<(usize, usize)> =
        config.ms.iter().map(|&m| Ok((m, vertices.index(&format!("C_{m}"))?))).collect::<Result<_>>()?;

    let mut grouped: BTreeMap<u64, VertexFunctionals> = BTreeMap::new();
    for row in &vertices.rows {
        let rep: u64 = parse(&row[rep_col], "rep")?;
        let f = grouped.entry(rep).or_insert_with(|| VertexFunctionals {
            degree: Vec::new(),
            star: config.ks.iter().map(|&k| (k, Vec::new())).collect(),
            clique: config.ms.iter().map(|&m| (m, Vec::new())).collect(),
        });
        f.degree.push(parse(&row[degree_col], "degree")?);
        for &(k, c) in &star_cols {
            f.star.get_mut(&k).expect("initialized").push(parse(&row[c], "star count")?);
        }
        for &(m, c) in &clique_cols {
            f.clique.get_mut(&m).expect("initialized").push(parse(&row[c], "clique count")?);
        }
    }

    let rep_idx = reps.index("rep")?;
    let n_idx = reps.index("N")?;
    let cc_idx = reps.index("CC")?;
    let mut summaries = Vec::with_capacity(reps.rows.len());
    for row in &reps.rows {
        let rep: u64 = parse(&row[rep_idx], "rep")?;
        let n: usize = parse(&row[n_idx], "N")?;
        let cc = match row[cc_idx].as_str() {
            UNDEFINED => None,
            s => Some(parse::<f64>(s, "CC")?),
        };
        // replications with no vertices have no vertex rows
        let f = grouped.remove(&rep).unwrap_or_else(|| VertexFunctionals {
            degree: Vec::new(),
            star: config.ks.iter().map(|&k| (k, Vec::new())).collect(),
            clique: config.ms.iter().map(|&m| (m, Vec::new())).collect(),
        });
        if f.len() != n {
            return Err(Error::Parse(format!("replication {rep}: {} vertex rows but N = {n}", f.len())));
        }
        summaries.push(summarize(&f, cc, config.params.alpha()));
    }
    if !grouped.is_empty() {
        return Err(Error::Parse("vertex rows for replications missing from the summary file".into()));
    }

    let anchored_path = dir.join("anchored.json");
    let anchored = if anchored_path.exists() {
        serde_json::from_str(&fs::read_to_string(anchored_path)?)?
    } else {
        Vec::new()
    };
    Ok(aggregate(&config, warnings, &summaries, anchored))
}

/// Theory constants for `(d, α, n)` and the requested orders as a JSON value.
pub fn constants_report(params: &ModelParams, k: Option<usize>, m: Option<usize>) -> Result<serde_json::Value> {
    use serde_json::json;
    let mut doc = json!({
        "version": VERSION,
        "params": params,
        "R_n": params.radius(),
        "kappa": crate::theory::kappa(params.d()),
        "B_alpha": crate::theory::b_alpha(params),
    });
    let mut predicted = serde_json::Map::new();
    if let Some(k) = k {
        let c = star_scaling(params, k)?;
        doc["star"] = json!({
            "k": k,
            "B_k_alpha": c.b_k_alpha,
            "a_kn": c.a_kn,
            "regime": star_regime(params.alpha(), k),
        });
        predicted.insert(format!("D_{k}"), json!(c.beta));
    }
    if let Some(m) = m {
        let c = clique_scaling(params, m, DEFAULT_ELL_BUDGET)?;
        doc["clique"] = json!({
            "m": m,
            "xi": c.xi,
            "s": c.s,
            "ell_inf": c.ell_inf.value,
            "ell_inf_std_error": c.ell_inf.std_error,
            "C_m_alpha": c.c_m_alpha,
            "b_mn": c.b_mn,
        });
        predicted.insert(format!("C_{m}"), json!(c.beta));
    }
    predicted.insert("degree".into(), json!(2.0 * params.alpha()));
    doc["predicted_tail_index"] = serde_json::Value::Object(predicted);
    Ok(doc)
}

/// One-line digest of an analysis for logs.
pub fn describe(analysis: &Analysis) -> String {
    let mut s = String::new();
    let _ = write!(s, "{} replications", analysis.replications);
    for t in &analysis.tail_fits {
        if let Some(m) = t.mean_estimate {
            let _ = write!(s, "; {} hill {:.3} (predicted {:.3})", t.functional, m, t.predicted_index);
        }
    }
    if let Some(cc) = analysis.clustering.mean {
        let _ = write!(s, "; CC {cc:.4}");
    }
    s
}
