//! Measurement campaigns: per-location summaries, track planning and reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::fitting::{estimate_sigma, fit_exponent, FitError, PartitionLossEstimate};
use crate::geometry::Point;
use crate::pdp::{
    average_local_area, clip_dynamic_range, narrowband_power, path_loss_from_link,
    received_power_warning, rms_delay_spread, CalibrationReference, PdpError, PowerDelayProfile,
};
use crate::propagation::{free_space_path_loss, FrequencyBand, PathLossFit, PropagationError};

/// Location summaries for the 2.5 GHz campaign.
pub const TABLE1_CSV: &str = include_str!("../data/table1_2p5ghz.csv");
/// Location summaries for the 60 GHz campaign.
pub const TABLE2_CSV: &str = include_str!("../data/table2_60ghz.csv");
/// Local-area average path loss versus distance, 2.5 GHz.
pub const TABLE1_POINTS: &str = include_str!("../data/table1_points.csv");
/// Local-area average path loss versus distance, 60 GHz.
pub const TABLE2_POINTS: &str = include_str!("../data/table2_points.csv");

/// Published fits used as comparison points in reports: (GHz, n, σ dB).
pub const REFERENCE_FITS: [(f64, f64, f64); 2] = [(2.5, 2.4, 5.8), (60.0, 2.1, 7.9)];

const HEADER: &str =
    "location_id,distance_m,free_space_pl_db,avg_pl_db,min_pl_db,max_pl_db,min_ds_ns,max_ds_ns,avg_ds_ns";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CampaignError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: location {location}: {message}")]
    Invariant {
        line: u64,
        location: String,
        message: String,
    },
    #[error("no band given: add a `# band_ghz=<value>` line or pass a band")]
    MissingBand,
    #[error("empty PDP set for location {0}")]
    EmptyLocation(String),
    #[error(transparent)]
    Pdp(#[from] PdpError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// One location row: path loss in dB, delay spread in ns.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LocationSummary {
    pub location_id: String,
    pub distance_m: f64,
    pub free_space_pl_db: f64,
    pub avg_pl_db: f64,
    pub min_pl_db: f64,
    pub max_pl_db: f64,
    pub min_ds_ns: f64,
    pub max_ds_ns: f64,
    pub avg_ds_ns: f64,
}

impl LocationSummary {
    fn check(&self) -> Result<(), String> {
        let values = [
            self.distance_m,
            self.free_space_pl_db,
            self.avg_pl_db,
            self.min_pl_db,
            self.max_pl_db,
            self.min_ds_ns,
            self.max_ds_ns,
            self.avg_ds_ns,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if !(self.distance_m > 0.0) {
            return Err(format!(
                "distance must be positive, got {}",
                self.distance_m
            ));
        }
        if !(self.min_pl_db <= self.avg_pl_db && self.avg_pl_db <= self.max_pl_db) {
            return Err(format!(
                "path loss must satisfy min <= avg <= max, got {} / {} / {}",
                self.min_pl_db, self.avg_pl_db, self.max_pl_db
            ));
        }
        if !(self.min_ds_ns <= self.avg_ds_ns && self.avg_ds_ns <= self.max_ds_ns) {
            return Err(format!(
                "delay spread must satisfy min <= avg <= max, got {} / {} / {}",
                self.min_ds_ns, self.avg_ds_ns, self.max_ds_ns
            ));
        }
        if self.min_ds_ns < 0.0 {
            return Err("negative delay spread".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignDataset {
    pub band: FrequencyBand,
    pub rows: Vec<LocationSummary>,
}

impl CampaignDataset {
    /// `(distance_m, avg_pl_db)` per location.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.distance_m, r.avg_pl_db))
            .collect()
    }

    pub fn row(&self, location_id: &str) -> Option<&LocationSummary> {
        self.rows.iter().find(|r| r.location_id == location_id)
    }
}

fn band_comment(text: &str) -> Result<Option<f64>, CampaignError> {
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.trim().strip_prefix('#') else {
            continue;
        };
        if let Some((key, value)) = rest.split_once('=') {
            if key.trim() == "band_ghz" {
                let v = value.trim();
                return v.parse().map(Some).map_err(|_| CampaignError::Parse {
                    line: i as u64 + 1,
                    message: format!("invalid band \"{v}\""),
                });
            }
        }
    }
    Ok(None)
}

/// Parse a campaign CSV. The band comes from `band` when given, otherwise
/// from a `# band_ghz=<value>` comment line.
pub fn load_campaign(
    text: &str,
    band: Option<FrequencyBand>,
) -> Result<CampaignDataset, CampaignError> {
    let band = match band {
        Some(b) => b,
        None => FrequencyBand::new(band_comment(text)?.ok_or(CampaignError::MissingBand)?)?,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| CampaignError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(parse_err)?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
        let line = text
            .lines()
            .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map_or(1, |i| i as u64 + 1);
        return Err(CampaignError::Parse {
            line,
            message: format!("expected header `{HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: LocationSummary = rec.deserialize(Some(&headers)).map_err(parse_err)?;
        let invariant = |message: String| CampaignError::Invariant {
            line,
            location: row.location_id.clone(),
            message,
        };
        row.check().map_err(invariant)?;
        if !ids.insert(row.location_id.clone()) {
            return Err(invariant("duplicate location id".into()));
        }
        rows.push(row);
    }
    Ok(CampaignDataset { band, rows })
}

/// Full-precision CSV that [`load_campaign`] reads back unchanged.
pub fn write_campaign_csv(dataset: &CampaignDataset) -> String {
    let mut out = format!("# band_ghz={}\n{HEADER}\n", dataset.band.frequency_ghz);
    for r in &dataset.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.location_id,
            r.distance_m,
            r.free_space_pl_db,
            r.avg_pl_db,
            r.min_pl_db,
            r.max_pl_db,
            r.min_ds_ns,
            r.max_ds_ns,
            r.avg_ds_ns
        );
    }
    out
}

/// Transmit power and antenna gains of the sounder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConstants {
    pub p_t_dbm: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,
}

impl LinkConstants {
    /// 0 dBm into 6 dBi antennas at both ends.
    pub const RIG_2_5_GHZ: LinkConstants = LinkConstants {
        p_t_dbm: 0.0,
        g_t_dbi: 6.0,
        g_r_dbi: 6.0,
    };
    /// −10 dBm into 25 dBi horns at both ends.
    pub const RIG_60_GHZ: LinkConstants = LinkConstants {
        p_t_dbm: -10.0,
        g_t_dbi: 25.0,
        g_r_dbi: 25.0,
    };

    pub fn path_loss(&self, p_rec_dbm: f64) -> f64 {
        path_loss_from_link(self.p_t_dbm, self.g_t_dbi, self.g_r_dbi, p_rec_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationAnalysis {
    pub summary: LocationSummary,
    pub warnings: Vec<String>,
}

/// Summarize the PDPs recorded along one track.
///
/// Min and max path loss come from the individual PDPs. The average is the
/// path loss of the linearly averaged (composite) PDP. Delay spreads are per
/// PDP after clipping to `dynamic_range_db`.
pub fn summarize_location(
    location_id: &str,
    pdps: &[PowerDelayProfile],
    cal: &CalibrationReference,
    link: &LinkConstants,
    distance_m: f64,
    band: &FrequencyBand,
    dynamic_range_db: f64,
) -> Result<LocationAnalysis, CampaignError> {
    if pdps.is_empty() {
        return Err(CampaignError::EmptyLocation(location_id.to_string()));
    }
    let mut warnings = Vec::new();
    let mut pl = Vec::with_capacity(pdps.len());
    let mut ds = Vec::with_capacity(pdps.len());
    for (i, p) in pdps.iter().enumerate() {
        let p_rec = narrowband_power(p, cal)?;
        if let Some(w) = received_power_warning(p_rec) {
            warnings.push(format!("location {location_id} PDP {i}: {w}"));
        }
        pl.push(link.path_loss(p_rec));
        ds.push(rms_delay_spread(&clip_dynamic_range(p, dynamic_range_db)?)?);
    }
    let composite = average_local_area(pdps)?;
    let min_pl = pl.iter().copied().fold(f64::INFINITY, f64::min);
    let max_pl = pl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the composite lies between the extremes; clamp away last-bit rounding
    let avg_pl = link
        .path_loss(narrowband_power(&composite, cal)?)
        .clamp(min_pl, max_pl);
    let min_ds = ds.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ds = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg_ds = (ds.iter().sum::<f64>() / ds.len() as f64).clamp(min_ds, max_ds);
    Ok(LocationAnalysis {
        summary: LocationSummary {
            location_id: location_id.to_string(),
            distance_m,
            free_space_pl_db: free_space_path_loss(band, distance_m)?,
            avg_pl_db: avg_pl,
            min_pl_db: min_pl,
            max_pl_db: max_pl,
            min_ds_ns: min_ds,
            max_ds_ns: max_ds,
            avg_ds_ns: avg_ds,
        },
        warnings,
    })
}

/// `count` positions centered on `center`, `spacing` apart along `direction`.
pub fn track_positions(
    center: Point,
    direction: (f64, f64),
    spacing: f64,
    count: usize,
) -> Result<Vec<Point>, CampaignError> {
    let norm = direction.0.hypot(direction.1);
    if count == 0 || !(spacing >= 0.0) || !spacing.is_finite() || !(norm > 0.0) || !norm.is_finite()
    {
        return Err(PropagationError::Domain(format!(
            "track needs count >= 1, spacing >= 0 and a nonzero direction \
             (count={count}, spacing={spacing}, direction=({}, {}))",
            direction.0, direction.1
        ))
        .into());
    }
    let (ux, uy) = (direction.0 / norm, direction.1 / norm);
    let mid = (count - 1) as f64 / 2.0;
    Ok((0..count)
        .map(|i| {
            let s = (i as f64 - mid) * spacing;
            Point::new(center.x + s * ux, center.y + s * uy)
        })
        .collect())
}

/// Constrained fit of a campaign's averages. Defaults: `d0 = 1 m` and
/// `pl_d0` = free space at `d0`.
pub fn fit_campaign(
    dataset: &CampaignDataset,
    d0: Option<f64>,
    pl_d0: Option<f64>,
) -> Result<PathLossFit, CampaignError> {
    let d0 = d0.unwrap_or(1.0);
    let pl_d0 = match pl_d0 {
        Some(v) => v,
        None => free_space_path_loss(&dataset.band, d0)?,
    };
    let pts = dataset.points();
    let n = fit_exponent(&pts, d0, pl_d0)?;
    let sigma = estimate_sigma(&pts, d0, pl_d0, n)?;
    Ok(PathLossFit::new(d0, pl_d0, n, sigma)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub campaign_csv: String,
    /// `distance_m,pl_db,model_pl_db,residual_db`
    pub scatter_csv: String,
}

fn reference_fit(band: &FrequencyBand) -> Option<(f64, f64)> {
    REFERENCE_FITS
        .iter()
        .find(|(ghz, _, _)| band.matches(*ghz))
        .map(|&(_, n, s)| (n, s))
}

fn round_int(v: f64) -> i64 {
    v.round() as i64
}

/// Render the campaign, its fit and (when non-empty) partition estimates.
pub fn generate_report(
    campaign: &CampaignDataset,
    fit: &PathLossFit,
    partitions: &PartitionLossEstimate,
) -> Report {
    let ghz = campaign.band.frequency_ghz;
    let mut t = String::new();
    let _ = writeln!(
        t,
        "Measurement summary at {ghz} GHz ({} locations)",
        campaign.rows.len()
    );
    let _ = writeln!(
        t,
        "{:<9} {:>6} {:>9} {:>7} {:>9} {:>13}",
        "location", "d_m", "fspl_dB", "avg_dB", "min/max", "ds min/max/avg"
    );
    for r in &campaign.rows {
        let _ = writeln!(
            t,
            "{:<9} {:>6.1} {:>9} {:>7} {:>9} {:>13}",
            r.location_id,
            r.distance_m,
            round_int(r.free_space_pl_db),
            round_int(r.avg_pl_db),
            format!("{} / {}", round_int(r.min_pl_db), round_int(r.max_pl_db)),
            format!(
                "{} / {} / {}",
                round_int(r.min_ds_ns),
                round_int(r.max_ds_ns),
                round_int(r.avg_ds_ns)
            ),
        );
    }
    let _ = writeln!(
        t,
        "avg PL is the path loss of the linearly averaged local-area PDP"
    );

    let pts = campaign.points();
    let residuals: Vec<f64> = pts
        .iter()
        .map(|&(d, pl)| pl - (fit.pl_d0 + 10.0 * fit.n * (d / fit.d0).log10()))
        .collect();
    let _ = writeln!(t, "\nLog-distance fit");
    let _ = writeln!(
        t,
        "d0={} m  PL(d0)={:.1} dB  n={:.1}  sigma={:.1} dB",
        fit.d0, fit.pl_d0, fit.n, fit.sigma
    );
    if !residuals.is_empty() {
        let m = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / m;
        let about_mean = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m).sqrt();
        let _ = writeln!(
            t,
            "sigma is the population RMS of residuals about zero; about the residual mean ({mean:.2} dB) it is {about_mean:.2} dB"
        );
    }
    if let Some((ref_n, ref_sigma)) = reference_fit(&campaign.band) {
        let same_n = format!("{:.1}", fit.n) == format!("{ref_n:.1}");
        let same_sigma = format!("{:.1}", fit.sigma) == format!("{ref_sigma:.1}");
        if same_n && same_sigma {
            let _ = writeln!(
                t,
                "matches the reference fit n={ref_n:.1}, sigma={ref_sigma:.1} dB"
            );
        } else {
            let _ = writeln!(
                t,
                "DISCREPANCY: reference fit for {ghz} GHz is n={ref_n:.1}, sigma={ref_sigma:.1} dB; \
                 this constrained fit on local-area averages gives n={:.4}, sigma={:.4} dB",
                fit.n, fit.sigma
            );
            let _ = writeln!(
                t,
                "the reference fit's data set, intercept and sigma convention are not known, \
                 so the value is reported as computed"
            );
        }
    }

    if !partitions.is_empty() {
        let _ = writeln!(t, "\nPartition losses (in excess of free space)");
        t.push_str(&partitions.render_table());
    }

    let mut scatter = String::from("distance_m,pl_db,model_pl_db,residual_db\n");
    for (&(d, pl), r) in pts.iter().zip(&residuals) {
        let _ = writeln!(scatter, "{d},{pl},{},{r}", pl - r);
    }
    Report {
        text: t,
        campaign_csv: write_campaign_csv(campaign),
        scatter_csv: scatter,
    }
}
