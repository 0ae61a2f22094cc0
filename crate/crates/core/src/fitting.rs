//! Inverse problems: path loss exponent and shadowing fits, and per-partition
//! attenuation estimation from link measurements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::propagation::{free_space_path_loss, FrequencyBand, PropagationError};
use crate::sitemodel::Material;

/// Tolerance on the NNLS optimality conditions.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no observations")]
    NoObservations,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("no data for material \"{0}\": it appears in no link")]
    NoData(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

fn log_terms(points: &[(f64, f64)], d0: f64, pl_d0: f64) -> Result<Vec<(f64, f64)>, FitError> {
    if points.is_empty() {
        return Err(FitError::NoObservations);
    }
    if !(d0 > 0.0) || !pl_d0.is_finite() {
        return Err(FitError::Domain(format!(
            "reference must have d0 > 0 and finite loss, got d0={d0} pl_d0={pl_d0}"
        )));
    }
    points
        .iter()
        .map(|&(d, pl)| {
            if !(d > 0.0) || !d.is_finite() || !pl.is_finite() {
                Err(FitError::Domain(format!("invalid point ({d} m, {pl} dB)")))
            } else {
                Ok((10.0 * (d / d0).log10(), pl - pl_d0))
            }
        })
        .collect()
}

/// Least-squares exponent with the intercept pinned at `(d0, pl_d0)`:
/// `n = Σxy / Σx²`, `x = 10·log10(d/d0)`, `y = pl − pl_d0`.
pub fn fit_exponent(points: &[(f64, f64)], d0: f64, pl_d0: f64) -> Result<f64, FitError> {
    let xy = log_terms(points, d0, pl_d0)?;
    let sxx: f64 = xy.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = xy.iter().map(|(x, y)| x * y).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate(
            "every point sits at the reference distance".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Σ(pl − pl_d0 − 10·n·log10(d/d0))².
pub fn sum_squared_error(
    points: &[(f64, f64)],
    d0: f64,
    pl_d0: f64,
    n: f64,
) -> Result<f64, FitError> {
    Ok(log_terms(points, d0, pl_d0)?
        .iter()
        .map(|(x, y)| (y - n * x).powi(2))
        .sum())
}

/// Population RMS of the residuals about zero.
pub fn estimate_sigma(points: &[(f64, f64)], d0: f64, pl_d0: f64, n: f64) -> Result<f64, FitError> {
    let sse = sum_squared_error(points, d0, pl_d0, n)?;
    Ok((sse / points.len() as f64).sqrt())
}

/// Ordinary least squares with a free intercept. Diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconstrainedFit {
    pub d0: f64,
    pub pl_d0: f64,
    pub n: f64,
    pub sigma: f64,
}

pub fn fit_unconstrained(points: &[(f64, f64)], d0: f64) -> Result<UnconstrainedFit, FitError> {
    let xy = log_terms(points, d0, 0.0)?;
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate("all points share one distance".into()));
    }
    let n = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let pl_d0 = my - n * mx;
    let sigma = estimate_sigma(points, d0, pl_d0, n)?;
    Ok(UnconstrainedFit {
        d0,
        pl_d0,
        n,
        sigma,
    })
}

/// One measured link: distance, band, path loss and how many times each
/// material is crossed.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkObservation {
    pub link_id: String,
    pub distance_m: f64,
    pub band: FrequencyBand,
    pub measured_pl_db: f64,
    pub counts: BTreeMap<String, u32>,
}

impl LinkObservation {
    pub fn new(
        link_id: impl Into<String>,
        distance_m: f64,
        band: FrequencyBand,
        measured_pl_db: f64,
        counts: BTreeMap<String, u32>,
    ) -> Result<Self, FitError> {
        if !(distance_m > 0.0) || !distance_m.is_finite() || !measured_pl_db.is_finite() {
            return Err(FitError::Domain(format!(
                "invalid link ({distance_m} m, {measured_pl_db} dB)"
            )));
        }
        Ok(LinkObservation {
            link_id: link_id.into(),
            distance_m,
            band,
            measured_pl_db,
            counts,
        })
    }

    /// Measured loss above free space.
    pub fn excess_db(&self) -> Result<f64, FitError> {
        Ok(self.measured_pl_db - free_space_path_loss(&self.band, self.distance_m)?)
    }

    pub fn count(&self, material: &str) -> u32 {
        self.counts.get(material).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    Composite,
    Nnls,
}

impl EstimationMethod {
    pub fn label(self) -> &'static str {
        match self {
            EstimationMethod::Composite => {
                "composite average (one attribution sweep from zero, materials in id order)"
            }
            EstimationMethod::Nnls => "non-negative least squares",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialEstimate {
    pub material: String,
    pub mean_loss_db: f64,
    pub std_db: f64,
    pub sample_count: usize,
    pub normalized_db_per_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandEstimate {
    pub band: FrequencyBand,
    /// Sorted by material id.
    pub materials: Vec<MaterialEstimate>,
    /// ‖A·X − excess‖² at the reported means.
    pub residual_ss: f64,
}

impl BandEstimate {
    pub fn material(&self, id: &str) -> Option<&MaterialEstimate> {
        self.materials.iter().find(|m| m.material == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLossEstimate {
    pub method: EstimationMethod,
    /// Sorted by frequency.
    pub bands: Vec<BandEstimate>,
    pub warnings: Vec<String>,
}

impl PartitionLossEstimate {
    pub fn empty(method: EstimationMethod) -> Self {
        PartitionLossEstimate {
            method,
            bands: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bands.iter().all(|b| b.materials.is_empty())
    }

    pub fn band(&self, frequency_ghz: f64) -> Option<&BandEstimate> {
        self.bands.iter().find(|b| b.band.matches(frequency_ghz))
    }

    pub fn get(&self, frequency_ghz: f64, material: &str) -> Option<&MaterialEstimate> {
        self.band(frequency_ghz)?.material(material)
    }

    /// Table-shaped text: one block per band, values to one decimal.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method: {}", self.method.label());
        for b in &self.bands {
            let _ = writeln!(out, "\n{b} GHz", b = b.band.frequency_ghz);
            let _ = writeln!(
                out,
                "{:<14} {:>10} {:>8} {:>6} {:>10}",
                "material", "mean_db", "std_db", "links", "db_per_cm"
            );
            for m in &b.materials {
                let norm = m
                    .normalized_db_per_cm
                    .map_or_else(|| "--".to_string(), |v| format!("{v:.1}"));
                let _ = writeln!(
                    out,
                    "{:<14} {:>10.1} {:>8.1} {:>6} {:>10}",
                    m.material, m.mean_loss_db, m.std_db, m.sample_count, norm
                );
            }
            let _ = writeln!(out, "residual sum of squares: {:.3} dB^2", b.residual_ss);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    /// Full-precision CSV: `freq_ghz,material,mean_loss_db,std_db,sample_count,normalized_db_per_cm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "freq_ghz,material,mean_loss_db,std_db,sample_count,normalized_db_per_cm\n",
        );
        for b in &self.bands {
            for m in &b.materials {
                let norm = m
                    .normalized_db_per_cm
                    .map_or_else(String::new, |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    b.band.frequency_ghz,
                    m.material,
                    m.mean_loss_db,
                    m.std_db,
                    m.sample_count,
                    norm
                );
            }
        }
        out
    }
}

/// Links grouped by band, with excess loss precomputed.
struct BandGroup {
    band: FrequencyBand,
    rows: Vec<(BTreeMap<String, u32>, f64)>,
}

fn group_by_band(links: &[LinkObservation]) -> Result<Vec<BandGroup>, FitError> {
    let mut groups: Vec<BandGroup> = Vec::new();
    for link in links {
        let excess = link.excess_db()?;
        let row = (link.counts.clone(), excess);
        match groups
            .iter_mut()
            .find(|g| g.band.matches(link.band.frequency_ghz))
        {
            Some(g) => g.rows.push(row),
            None => groups.push(BandGroup {
                band: link.band,
                rows: vec![row],
            }),
        }
    }
    groups.sort_by(|a, b| a.band.frequency_ghz.total_cmp(&b.band.frequency_ghz));
    Ok(groups)
}

/// Material ids that appear in at least one link; errors on ids that are
/// listed but never crossed.
fn active_materials(links: &[LinkObservation]) -> Result<BTreeSet<String>, FitError> {
    let mut listed = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for link in links {
        for (m, &c) in &link.counts {
            listed.insert(m.clone());
            if c > 0 {
                seen.insert(m.clone());
            }
        }
    }
    if let Some(missing) = listed.difference(&seen).next() {
        return Err(FitError::NoData(missing.clone()));
    }
    Ok(seen)
}

fn materials_in(group: &BandGroup) -> Vec<String> {
    let mut set = BTreeSet::new();
    for (counts, _) in &group.rows {
        for (m, &c) in counts {
            if c > 0 {
                set.insert(m.clone());
            }
        }
    }
    set.into_iter().collect()
}

fn predicted(counts: &BTreeMap<String, u32>, est: &BTreeMap<&str, f64>, skip: Option<&str>) -> f64 {
    counts
        .iter()
        .filter(|(m, _)| Some(m.as_str()) != skip)
        .map(|(m, &c)| c as f64 * est.get(m.as_str()).copied().unwrap_or(0.0))
        .sum()
}

/// Per-link loss attributed to `material` given the other materials' estimates.
fn attributions(group: &BandGroup, material: &str, est: &BTreeMap<&str, f64>) -> Vec<f64> {
    group
        .rows
        .iter()
        .filter_map(|(counts, excess)| {
            let c = counts.get(material).copied().unwrap_or(0);
            (c > 0).then(|| (excess - predicted(counts, est, Some(material))) / c as f64)
        })
        .collect()
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn residual_ss(group: &BandGroup, est: &BTreeMap<&str, f64>) -> f64 {
    group
        .rows
        .iter()
        .map(|(counts, excess)| (excess - predicted(counts, est, None)).powi(2))
        .sum()
}

/// Composite average: starting from zero, each material in id order gets the
/// mean of its per-link attributed losses, and that mean is used for the
/// materials that follow. Attributions may be negative.
pub fn fit_partitions_composite(
    links: &[LinkObservation],
) -> Result<PartitionLossEstimate, FitError> {
    if links.is_empty() {
        return Err(FitError::NoObservations);
    }
    active_materials(links)?;
    let mut out = PartitionLossEstimate::empty(EstimationMethod::Composite);
    for group in group_by_band(links)? {
        let names = materials_in(&group);
        let mut est: BTreeMap<&str, f64> = BTreeMap::new();
        let mut materials = Vec::new();
        for name in &names {
            let vals = attributions(&group, name, &est);
            let (mean, std) = mean_and_std(&vals);
            est.insert(name, mean);
            materials.push(MaterialEstimate {
                material: name.clone(),
                mean_loss_db: mean,
                std_db: std,
                sample_count: vals.len(),
                normalized_db_per_cm: None,
            });
        }
        let residual = residual_ss(&group, &est);
        out.bands.push(BandEstimate {
            band: group.band,
            materials,
            residual_ss: residual,
        });
    }
    Ok(out)
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    svd.solve(b, eps).expect("SVD computed with both U and V")
}

/// Lawson–Hanson active-set solver for `min ‖A·x − b‖²` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.amax().max(1.0) * b.amax().max(1.0);
    let tol = 1e-13 * scale * (a.nrows().max(1) as f64);
    let gradient = |x: &DVector<f64>| a.transpose() * (b - a * x);
    let mut w = gradient(&x);
    for _ in 0..(3 * n + 10) {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(&idx);
            let s_p = lstsq(&sub, b);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = s_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    let denom = x[i] - s_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s_p[k] - x[i]);
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = gradient(&x);
    }
    x
}

/// Largest violation of the NNLS optimality conditions at `x`, scaled so
/// that a converged solution reports a value below [`KKT_TOL`].
pub fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let w = a.transpose() * (b - a * x);
    let scale = (a.norm() * b.norm()).max(1.0);
    (0..x.len())
        .map(|j| {
            let primal = (-x[j]).max(0.0);
            let dual = if x[j] > 0.0 {
                w[j].abs()
            } else {
                w[j].max(0.0)
            };
            primal.max(dual / scale)
        })
        .fold(0.0, f64::max)
}

/// Joint non-negative least squares over all materials in a band. Per-material
/// spread is the population std of the loss each link attributes to that
/// material once the other materials are fixed at their estimates.
pub fn fit_partitions_nnls(links: &[LinkObservation]) -> Result<PartitionLossEstimate, FitError> {
    if links.is_empty() {
        return Err(FitError::NoObservations);
    }
    active_materials(links)?;
    let mut out = PartitionLossEstimate::empty(EstimationMethod::Nnls);
    for group in group_by_band(links)? {
        let names = materials_in(&group);
        let ghz = group.band.frequency_ghz;
        if names.is_empty() {
            out.warnings
                .push(format!("{ghz} GHz: no link crosses any partition"));
            out.bands.push(BandEstimate {
                band: group.band,
                materials: Vec::new(),
                residual_ss: residual_ss(&group, &BTreeMap::new()),
            });
            continue;
        }
        let a = DMatrix::from_fn(group.rows.len(), names.len(), |i, j| {
            group.rows[i].0.get(&names[j]).copied().unwrap_or(0) as f64
        });
        let b = DVector::from_iterator(group.rows.len(), group.rows.iter().map(|r| r.1));
        out.warnings.extend(rank_warnings(&a, &names, ghz));
        let x = nnls(&a, &b);
        let est: BTreeMap<&str, f64> = names
            .iter()
            .map(String::as_str)
            .zip(x.iter().copied())
            .collect();
        let mut materials = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let vals = attributions(&group, name, &est);
            let (_, std) = mean_and_std(&vals);
            if x[j] == 0.0 {
                out.warnings.push(format!(
                    "{ghz} GHz: {name} estimate is held at the 0 dB bound"
                ));
            }
            materials.push(MaterialEstimate {
                material: name.clone(),
                mean_loss_db: x[j],
                std_db: std,
                sample_count: vals.len(),
                normalized_db_per_cm: None,
            });
        }
        out.bands.push(BandEstimate {
            band: group.band,
            materials,
            residual_ss: residual_ss(&group, &est),
        });
    }
    Ok(out)
}

fn rank_warnings(a: &DMatrix<f64>, names: &[String], ghz: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    let mut flagged = false;
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            let (ci, cj) = (a.column(i), a.column(j));
            let cos = ci.dot(&cj) / (ci.norm() * cj.norm());
            if cos >= 1.0 - 1e-12 {
                flagged = true;
                warnings.push(format!(
                    "{ghz} GHz: rank deficient, {} and {} have proportional crossing counts",
                    names[i], names[j]
                ));
            }
        }
    }
    if !flagged {
        let sv = a.clone().svd(false, false).singular_values;
        let tol = 1e-10 * sv.max().max(1.0);
        let rank = sv.iter().filter(|&&s| s > tol).count();
        if rank < names.len() {
            warnings.push(format!(
                "{ghz} GHz: rank deficient crossing counts (rank {rank} of {}); estimates are not unique",
                names.len()
            ));
        }
    }
    warnings
}

/// Fill in dB per cm of thickness for every material that has one.
pub fn normalize_loss(
    mut estimate: PartitionLossEstimate,
    materials: &[Material],
) -> PartitionLossEstimate {
    for band in &mut estimate.bands {
        for m in &mut band.materials {
            m.normalized_db_per_cm = materials
                .iter()
                .find(|mat| mat.id == m.material)
                .and_then(|mat| mat.thickness_cm)
                .filter(|t| *t > 0.0)
                .map(|t| m.mean_loss_db / t);
        }
    }
    estimate
}

fn csv_error(e: csv::Error) -> FitError {
    let line = e.position().map_or(0, |p| p.line());
    FitError::Parse {
        line,
        message: e.to_string(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// One row of a points CSV (`location_id,distance_m,pl_db`).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScatterPoint {
    pub location_id: String,
    pub distance_m: f64,
    pub pl_db: f64,
}

pub fn parse_points_csv(text: &str) -> Result<Vec<ScatterPoint>, FitError> {
    let mut rdr = reader(text);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let p: ScatterPoint = rec.map_err(csv_error)?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_points_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("location_id,distance_m,pl_db\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.location_id, p.distance_m, p.pl_db);
    }
    out
}

const LINK_COLUMNS: [&str; 4] = ["link_id", "distance_m", "freq_ghz", "measured_pl_db"];

/// Parse `link_id,distance_m,freq_ghz,measured_pl_db,<material>...`.
pub fn parse_links_csv(text: &str) -> Result<Vec<LinkObservation>, FitError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let header_line = text
        .lines()
        .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map_or(1, |i| i as u64 + 1);
    for (i, want) in LINK_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*want) {
            return Err(FitError::Parse {
                line: header_line,
                message: format!("expected column {} to be \"{want}\"", i + 1),
            });
        }
    }
    let materials: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| FitError::Parse { line, message };
        let num = |i: usize| -> Result<f64, FitError> {
            let s = &rec[i];
            s.parse::<f64>()
                .map_err(|_| err(format!("invalid {} \"{s}\"", LINK_COLUMNS[i])))
        };
        let mut counts = BTreeMap::new();
        for (k, m) in materials.iter().enumerate() {
            let s = &rec[4 + k];
            let c: u32 = s
                .parse()
                .map_err(|_| err(format!("invalid count \"{s}\" for {m}")))?;
            counts.insert(m.clone(), c);
        }
        let band = FrequencyBand::new(num(2)?).map_err(|e| err(e.to_string()))?;
        let link = LinkObservation::new(&rec[0], num(1)?, band, num(3)?, counts)
            .map_err(|e| err(e.to_string()))?;
        out.push(link);
    }
    Ok(out)
}

pub fn write_links_csv(links: &[LinkObservation]) -> String {
    let materials: BTreeSet<&str> = links
        .iter()
        .flat_map(|l| l.counts.keys().map(String::as_str))
        .collect();
    let mut out = LINK_COLUMNS.join(",");
    for m in &materials {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for l in links {
        let _ = write!(
            out,
            "{},{},{},{}",
            l.link_id, l.distance_m, l.band.frequency_ghz, l.measured_pl_db
        );
        for m in &materials {
            let _ = write!(out, ",{}", l.count(m));
        }
        out.push('\n');
    }
    out
}

/// Synthetic link set: each link crosses a single partition type 2 to 4
/// times, types cycle through `truth` in order, distances are uniform on
/// 2–30 m and Gaussian noise of `noise_sigma_db` is added to the loss.
pub fn synthesize_links(
    truth: &[(&str, f64)],
    band: FrequencyBand,
    count: usize,
    noise_sigma_db: f64,
    seed: u64,
) -> Result<Vec<LinkObservation>, FitError> {
    if truth.is_empty() {
        return Err(FitError::Domain("no materials to synthesize".into()));
    }
    let noise = Normal::new(0.0, noise_sigma_db)
        .map_err(|e| FitError::Domain(format!("noise sigma {noise_sigma_db}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::with_capacity(count);
    for i in 0..count {
        let (material, loss) = truth[i % truth.len()];
        let crossings: u32 = rng.random_range(2..=4);
        let d: f64 = rng.random_range(2.0..30.0);
        let pl = free_space_path_loss(&band, d)? + crossings as f64 * loss + noise.sample(&mut rng);
        let counts = truth
            .iter()
            .map(|(m, _)| (m.to_string(), if *m == material { crossings } else { 0 }))
            .collect();
        links.push(LinkObservation::new(format!("L{i}"), d, band, pl, counts)?);
    }
    Ok(links)
}
