//! Forward path loss models: free space, log-distance with shadowing, and the
//! partition-dependent model, plus coverage grid evaluation.
//!
//! Path loss values here exclude antenna gains. Received power is recovered
//! with `P_REC = P_T + G_T + G_R − PL` (see [`PredictionBreakdown::received_power_dbm`]).
//!
//! The partition model assumes the direct ray dominates. When most of the
//! received power arrives by multipath the per-partition attenuation loses its
//! physical meaning; no threshold for that is enforced here.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{self, crossing_counts, GeometryError, Point};
use crate::sitemodel::{SiteModel, BAND_MATCH_GHZ};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("material \"{material}\" declares no loss for {frequency_ghz} GHz")]
    MissingBand {
        material: String,
        frequency_ghz: f64,
    },
    #[error("unknown node \"{0}\"")]
    UnknownNode(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Carrier frequency together with the wavelength used in the loss formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub frequency_ghz: f64,
    pub wavelength_m: f64,
}

impl FrequencyBand {
    /// 2.5 GHz with the rounded 12 cm wavelength used by the measurement tables.
    pub const GHZ_2_5: FrequencyBand = FrequencyBand {
        frequency_ghz: 2.5,
        wavelength_m: 0.12,
    };
    /// 60 GHz with the rounded 5 mm wavelength.
    pub const GHZ_60: FrequencyBand = FrequencyBand {
        frequency_ghz: 60.0,
        wavelength_m: 0.005,
    };

    /// Band for `frequency_ghz`. The two canonical bands snap to their rounded
    /// wavelengths; anything else uses `c / f`.
    pub fn new(frequency_ghz: f64) -> Result<Self, PropagationError> {
        for canonical in [Self::GHZ_2_5, Self::GHZ_60] {
            if canonical.matches(frequency_ghz) {
                return Ok(canonical);
            }
        }
        Self::exact(frequency_ghz)
    }

    /// Band with wavelength exactly `c / f`.
    pub fn exact(frequency_ghz: f64) -> Result<Self, PropagationError> {
        if !(frequency_ghz > 0.0) || !frequency_ghz.is_finite() {
            return Err(PropagationError::Domain(format!(
                "frequency must be positive, got {frequency_ghz} GHz"
            )));
        }
        Ok(FrequencyBand {
            frequency_ghz,
            wavelength_m: SPEED_OF_LIGHT / (frequency_ghz * 1e9),
        })
    }

    /// Whether `frequency_ghz` addresses this band (±0.1 GHz).
    pub fn matches(&self, frequency_ghz: f64) -> bool {
        (self.frequency_ghz - frequency_ghz).abs() <= BAND_MATCH_GHZ + 1e-12
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} GHz", self.frequency_ghz)
    }
}

/// Log-distance model parameters: reference distance, loss at it, exponent, shadowing std.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossFit {
    pub d0: f64,
    pub pl_d0: f64,
    pub n: f64,
    pub sigma: f64,
}

impl PathLossFit {
    pub fn new(d0: f64, pl_d0: f64, n: f64, sigma: f64) -> Result<Self, PropagationError> {
        if !(d0 > 0.0) || !(sigma >= 0.0) || !pl_d0.is_finite() || !n.is_finite() {
            return Err(PropagationError::Domain(format!(
                "invalid fit d0={d0} pl_d0={pl_d0} n={n} sigma={sigma}"
            )));
        }
        Ok(PathLossFit {
            d0,
            pl_d0,
            n,
            sigma,
        })
    }
}

fn check_distance(d: f64) -> Result<(), PropagationError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(PropagationError::Domain(format!(
            "distance must be positive, got {d} m"
        )));
    }
    Ok(())
}

/// Free-space loss between isotropic antennas, `20·log10(4πd/λ)` dB.
pub fn free_space_path_loss(band: &FrequencyBand, d: f64) -> Result<f64, PropagationError> {
    check_distance(d)?;
    Ok(20.0 * (4.0 * PI * d / band.wavelength_m).log10())
}

/// `PL(d0) + 10·n·log10(d/d0) + shadowing` in dB.
pub fn log_distance_path_loss(
    fit: &PathLossFit,
    d: f64,
    shadowing_db: f64,
) -> Result<f64, PropagationError> {
    check_distance(d)?;
    Ok(fit.pl_d0 + 10.0 * fit.n * (d / fit.d0).log10() + shadowing_db)
}

/// Zero-mean Gaussian shadowing draw with standard deviation `sigma` dB.
///
/// Each `(seed, index)` pair owns an independent ChaCha stream, so a value can
/// be reproduced without replaying the draws before it.
pub fn sample_shadowing(sigma: f64, seed: u64, index: u64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z: f64 = StandardNormal.sample(&mut rng);
    sigma * z
}

/// Loss contribution of one material.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub material: String,
    pub count: u32,
    pub unit_loss_db: f64,
    pub subtotal_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBreakdown {
    pub distance_m: f64,
    pub free_space_pl_db: f64,
    /// Walls crossed by the direct ray, one entry per material with a nonzero count.
    pub partitions: Vec<LossTerm>,
    /// Clutter in the first Fresnel zone, one entry per material, applied per object.
    pub clutter: Vec<LossTerm>,
    pub total_pl_db: f64,
}

impl PredictionBreakdown {
    pub fn excess_db(&self) -> f64 {
        self.partitions
            .iter()
            .chain(&self.clutter)
            .map(|t| t.subtotal_db)
            .sum()
    }

    pub fn received_power_dbm(&self, tx_power_dbm: f64, tx_gain_dbi: f64, rx_gain_dbi: f64) -> f64 {
        tx_power_dbm + tx_gain_dbi + rx_gain_dbi - self.total_pl_db
    }
}

/// Receiving end of a prediction: a declared node or a bare position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint<'a> {
    Node(&'a str),
    At(Point),
}

fn node_position(site: &SiteModel, id: &str) -> Result<Point, PropagationError> {
    site.node(id)
        .map(|n| n.position)
        .ok_or_else(|| PropagationError::UnknownNode(id.to_string()))
}

fn terms(
    site: &SiteModel,
    counts: impl IntoIterator<Item = (String, u32)>,
    band: &FrequencyBand,
) -> Result<Vec<LossTerm>, PropagationError> {
    let mut out = Vec::new();
    for (material, count) in counts {
        if count == 0 {
            continue;
        }
        let unit = site
            .material(&material)
            .and_then(|m| m.loss_at(band.frequency_ghz))
            .ok_or_else(|| PropagationError::MissingBand {
                material: material.clone(),
                frequency_ghz: band.frequency_ghz,
            })?;
        out.push(LossTerm {
            material,
            count,
            unit_loss_db: unit,
            subtotal_db: count as f64 * unit,
        });
    }
    Ok(out)
}

/// Partition-dependent path loss between two positions.
pub fn predict_between(
    site: &SiteModel,
    tx: Point,
    rx: Point,
    band: &FrequencyBand,
) -> Result<PredictionBreakdown, PropagationError> {
    let d = tx.distance(rx);
    if d <= geometry::EPS {
        return Err(PropagationError::Domain(format!(
            "transmitter and receiver coincide at {tx}"
        )));
    }
    breakdown_at(site, tx, rx, d, band)
}

/// Like [`predict_between`] but with the free-space term evaluated at `fs_distance`.
fn breakdown_at(
    site: &SiteModel,
    tx: Point,
    rx: Point,
    fs_distance: f64,
    band: &FrequencyBand,
) -> Result<PredictionBreakdown, PropagationError> {
    let free_space_pl_db = free_space_path_loss(band, fs_distance)?;
    let (partitions, clutter) = if tx.distance(rx) > geometry::EPS {
        let partitions = terms(site, crossing_counts(site, tx, rx), band)?;
        let mut per_material: Vec<(String, u32)> = Vec::new();
        for c in geometry::clutter_hits(site, tx, rx, band.wavelength_m) {
            match per_material.iter_mut().find(|(m, _)| *m == c.material) {
                Some((_, n)) => *n += 1,
                None => per_material.push((c.material.clone(), 1)),
            }
        }
        per_material.sort();
        (partitions, terms(site, per_material, band)?)
    } else {
        (Vec::new(), Vec::new())
    };
    let mut total_pl_db = free_space_pl_db;
    for t in partitions.iter().chain(&clutter) {
        total_pl_db += t.subtotal_db;
    }
    Ok(PredictionBreakdown {
        distance_m: fs_distance,
        free_space_pl_db,
        partitions,
        clutter,
        total_pl_db,
    })
}

/// Partition-dependent path loss from node `tx` to `rx`.
pub fn partition_path_loss(
    site: &SiteModel,
    tx: &str,
    rx: Endpoint<'_>,
    band: &FrequencyBand,
) -> Result<PredictionBreakdown, PropagationError> {
    let from = node_position(site, tx)?;
    let to = match rx {
        Endpoint::Node(id) => node_position(site, id)?,
        Endpoint::At(p) => p,
    };
    predict_between(site, from, to, band)
}

/// Axis-aligned rectangle in site coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, PropagationError> {
        let b = Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        if ![min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite())
            || max_x <= min_x
            || max_y <= min_y
        {
            return Err(PropagationError::Domain(format!("degenerate bounds {b}")));
        }
        Ok(b)
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.min_x, self.min_y, self.max_x, self.max_y
        )
    }
}

/// Row-major grid of path loss values. Row 0 is the lowest `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub tx_id: String,
    pub band: FrequencyBand,
    pub bounds: Bounds,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    pub values: Vec<f64>,
}

impl CoverageGrid {
    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.bounds.min_x + (col as f64 + 0.5) * self.resolution,
            self.bounds.min_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn value(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// `#` header followed by `x,y,path_loss_db` rows at six decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# tx={}", self.tx_id)?;
        writeln!(w, "# band_ghz={}", self.band.frequency_ghz)?;
        writeln!(w, "# bounds={}", self.bounds)?;
        writeln!(w, "# resolution_m={}", self.resolution)?;
        writeln!(w, "x,y,path_loss_db")?;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let p = self.cell_center(col, row);
                writeln!(w, "{:.6},{:.6},{:.6}", p.x, p.y, self.value(col, row))?;
            }
        }
        Ok(())
    }

    /// Binary 8-bit PGM. Gray is `round(255·(max − PL)/(max − min))`, so the
    /// lowest loss is white; the top image row is the highest `y`.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (min, max) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        writeln!(w, "P5")?;
        writeln!(
            w,
            "# path_loss_db min={min:.6} max={max:.6} gray=round(255*(max-pl)/(max-min))"
        )?;
        writeln!(w, "{} {}", self.cols, self.rows)?;
        writeln!(w, "255")?;
        let span = max - min;
        let mut pixels = Vec::with_capacity(self.values.len());
        for row in (0..self.rows).rev() {
            for col in 0..self.cols {
                let v = self.value(col, row);
                let g = if span > 0.0 {
                    (255.0 * (max - v) / span).round()
                } else {
                    255.0
                };
                pixels.push(g.clamp(0.0, 255.0) as u8);
            }
        }
        w.write_all(&pixels)
    }
}

/// Per-grid lookup tables so that cells avoid string keys. Evaluates the
/// same sums in the same order as [`breakdown_at`], so values match it bit for bit.
struct GridContext<'a> {
    site: &'a SiteModel,
    band: FrequencyBand,
    ids: Vec<&'a str>,
    units: Vec<Option<f64>>,
    wall_slot: Vec<usize>,
}

struct GridScratch {
    walls: Vec<u32>,
    clutter: Vec<u32>,
    runs: Vec<(usize, f64, f64)>,
}

impl<'a> GridContext<'a> {
    fn new(site: &'a SiteModel, band: &FrequencyBand) -> Self {
        let mut ids: Vec<&str> = site
            .materials
            .iter()
            .map(|m| m.id.as_str())
            .chain(site.walls.iter().map(|w| w.material.as_str()))
            .chain(site.clutter.iter().map(|c| c.material.as_str()))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let units = ids
            .iter()
            .map(|id| {
                site.material(id)
                    .and_then(|m| m.loss_at(band.frequency_ghz))
            })
            .collect();
        let wall_slot = site
            .walls
            .iter()
            .map(|w| ids.binary_search(&w.material.as_str()).unwrap_or(0))
            .collect();
        GridContext {
            site,
            band: *band,
            ids,
            units,
            wall_slot,
        }
    }

    fn scratch(&self) -> GridScratch {
        GridScratch {
            walls: vec![0; self.ids.len()],
            clutter: vec![0; self.ids.len()],
            runs: Vec::new(),
        }
    }

    fn add_terms(&self, total: &mut f64, counts: &[u32]) -> Result<(), PropagationError> {
        for (slot, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let unit = self.units[slot].ok_or_else(|| PropagationError::MissingBand {
                material: self.ids[slot].to_string(),
                frequency_ghz: self.band.frequency_ghz,
            })?;
            *total += count as f64 * unit;
        }
        Ok(())
    }

    fn total(
        &self,
        tx: Point,
        rx: Point,
        fs_distance: f64,
        s: &mut GridScratch,
    ) -> Result<f64, PropagationError> {
        let mut total = free_space_path_loss(&self.band, fs_distance)?;
        if tx.distance(rx) > geometry::EPS {
            geometry::crossing_counts_indexed(
                self.site,
                &self.wall_slot,
                tx,
                rx,
                &mut s.walls,
                &mut s.runs,
            );
            self.add_terms(&mut total, &s.walls)?;
            s.clutter.fill(0);
            for c in geometry::clutter_hits(self.site, tx, rx, self.band.wavelength_m) {
                if let Ok(slot) = self.ids.binary_search(&c.material.as_str()) {
                    s.clutter[slot] += 1;
                }
            }
            self.add_terms(&mut total, &s.clutter)?;
        }
        Ok(total)
    }
}

/// Partition-model path loss at every cell center of `bounds`.
///
/// Cells closer to the transmitter than `resolution / 2` report the value at
/// exactly `resolution / 2` so the grid stays finite.
pub fn coverage_grid(
    site: &SiteModel,
    tx: &str,
    band: &FrequencyBand,
    bounds: Bounds,
    resolution: f64,
) -> Result<CoverageGrid, PropagationError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(PropagationError::Domain(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let origin = node_position(site, tx)?;
    let cells = |span: f64| ((span / resolution) - 1e-9).ceil().max(1.0) as usize;
    let cols = cells(bounds.max_x - bounds.min_x);
    let rows = cells(bounds.max_y - bounds.min_y);
    let near_field = resolution / 2.0;
    let ctx = GridContext::new(site, band);
    let grid_rows: Result<Vec<Vec<f64>>, PropagationError> = (0..rows)
        .into_par_iter()
        .map(|row| {
            let mut scratch = ctx.scratch();
            (0..cols)
                .map(|col| {
                    let p = Point::new(
                        bounds.min_x + (col as f64 + 0.5) * resolution,
                        bounds.min_y + (row as f64 + 0.5) * resolution,
                    );
                    let d = origin.distance(p).max(near_field);
                    ctx.total(origin, p, d, &mut scratch)
                })
                .collect()
        })
        .collect();
    Ok(CoverageGrid {
        tx_id: tx.to_string(),
        band: *band,
        bounds,
        resolution,
        cols,
        rows,
        values: grid_rows?.into_iter().flatten().collect(),
    })
}
