#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use femtoprop::campaign::{
    fit_campaign, generate_report, load_campaign, summarize_location, write_campaign_csv,
    LinkConstants, TABLE1_CSV, TABLE2_CSV,
};
use femtoprop::fitting::{
    estimate_sigma, fit_exponent, fit_partitions_composite, fit_partitions_nnls, fit_unconstrained,
    normalize_loss, parse_links_csv, parse_points_csv, PartitionLossEstimate,
};
use femtoprop::geometry::Point;
use femtoprop::pdp::{
    parse_pdp_file, random_taps, synthesize_pdp, write_pdp_file, CalibrationReference, PdpMeta,
    DEFAULT_DELTA_TAU_NS, DEFAULT_DYNAMIC_RANGE_DB,
};
use femtoprop::propagation::{
    coverage_grid, free_space_path_loss, partition_path_loss, Bounds, Endpoint, FrequencyBand,
    PredictionBreakdown,
};
use femtoprop::sitemodel::{parse_site, validate_site, SiteModel, BAND_MATCH_GHZ};

/// Indoor path loss prediction and measurement analysis.
#[derive(Debug, Parser)]
#[command(name = "femtoprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition-model path loss between a node and a receiver.
    Predict(PredictArgs),
    /// Path loss over a grid of receiver positions, as CSV and optionally PGM.
    Coverage(CoverageArgs),
    /// Fit the path loss exponent and shadowing sigma to distance/loss points.
    FitExponent(FitExponentArgs),
    /// Estimate per-partition attenuation from link measurements.
    FitPartitions(FitPartitionsArgs),
    /// Summarize the PDPs recorded at one location.
    PdpStats(PdpStatsArgs),
    /// Write a synthetic PDP file from taps.
    SimulatePdp(SimulatePdpArgs),
    /// Campaign summary, exponent fit and optional partition table.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
struct PredictArgs {
    /// Site model file.
    #[arg(long)]
    site: PathBuf,
    /// Transmitting node id.
    #[arg(long)]
    tx: String,
    /// Receiving node id, or a position written `(x,y)`.
    #[arg(long, allow_hyphen_values = true)]
    rx: String,
    /// Carrier frequency in GHz; must be a band the site declares.
    #[arg(long, allow_negative_numbers = true)]
    band: f64,
    /// Also write the breakdown as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also print received power from the transmitter's power and antenna gains.
    #[arg(long)]
    received_power: bool,
    /// Receive antenna gain in dBi when `--rx` is a position.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    rx_gain: f64,
}

#[derive(Debug, clap::Args)]
struct CoverageArgs {
    /// Site model file.
    #[arg(long)]
    site: PathBuf,
    /// Transmitting node id.
    #[arg(long)]
    tx: String,
    /// Carrier frequency in GHz; must be a band the site declares.
    #[arg(long, allow_negative_numbers = true)]
    band: f64,
    /// Area as `min_x,min_y,max_x,max_y` in meters. Defaults to the site extent.
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Cell size in meters.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.25)]
    resolution: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional grayscale image (PGM) path.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct FitExponentArgs {
    /// Points CSV with columns location_id,distance_m,pl_db.
    #[arg(long)]
    points: PathBuf,
    /// Reference distance in meters.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    d0: f64,
    /// Path loss at the reference distance in dB. Defaults to free space at d0 for `--band`.
    #[arg(long, allow_negative_numbers = true)]
    pl_d0: Option<f64>,
    /// Carrier frequency in GHz, used for the default reference loss.
    #[arg(long, allow_negative_numbers = true)]
    band: Option<f64>,
    /// Also report an ordinary least squares fit with a free intercept.
    #[arg(long)]
    unconstrained: bool,
    /// Write `distance_m,pl_db,model_pl_db,residual_db` to this file.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Composite,
    Nnls,
}

#[derive(Debug, clap::Args)]
struct FitPartitionsArgs {
    /// Links CSV: link_id,distance_m,freq_ghz,measured_pl_db,<material>...
    #[arg(long)]
    links: PathBuf,
    /// Estimation method.
    #[arg(long, value_enum, default_value_t = Method::Composite)]
    method: Method,
    /// Site model whose material thicknesses are used for dB/cm normalization.
    #[arg(long)]
    site: Option<PathBuf>,
    /// Also write the full-precision table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct PdpStatsArgs {
    /// PDP files recorded at the location.
    #[arg(required = true)]
    pdps: Vec<PathBuf>,
    /// Calibration PDP file; its `p_cal_dbm` header gives the known input power.
    #[arg(long)]
    cal: PathBuf,
    /// Location id.
    #[arg(long)]
    location: String,
    /// Transmitter to receiver distance in meters.
    #[arg(long, allow_negative_numbers = true)]
    distance: f64,
    /// Carrier frequency in GHz.
    #[arg(long, allow_negative_numbers = true)]
    band: f64,
    /// Transmit power in dBm. Defaults to the rig value for the band.
    #[arg(long, allow_negative_numbers = true)]
    pt: Option<f64>,
    /// Transmit antenna gain in dBi. Defaults to the rig value for the band.
    #[arg(long, allow_negative_numbers = true)]
    gt: Option<f64>,
    /// Receive antenna gain in dBi. Defaults to the rig value for the band.
    #[arg(long, allow_negative_numbers = true)]
    gr: Option<f64>,
    /// Dynamic range in dB used to clip PDPs before the delay spread.
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_DYNAMIC_RANGE_DB)]
    dynamic_range: f64,
    /// Append the summary as a campaign CSV row to this file (created with a header).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct SimulatePdpArgs {
    /// Output PDP file.
    #[arg(long)]
    out: PathBuf,
    /// Taps as `delay_ns:power_mw` pairs separated by commas.
    #[arg(long, conflicts_with = "seed")]
    taps: Option<String>,
    /// Draw random taps from this seed instead of `--taps`.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random taps.
    #[arg(long, default_value_t = 6)]
    num_taps: usize,
    /// Largest random tap delay in ns.
    #[arg(long, allow_negative_numbers = true, default_value_t = 100.0)]
    max_delay: f64,
    /// Power of the first random tap in mW.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-6)]
    peak_mw: f64,
    /// Bin width in ns.
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_DELTA_TAU_NS)]
    delta_tau: f64,
    /// Constant noise floor added to every bin, mW.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    noise_floor: f64,
    /// Location id recorded in the header.
    #[arg(long)]
    location: Option<String>,
    /// Calibration input power written to the header, dBm.
    #[arg(long, allow_negative_numbers = true)]
    p_cal_dbm: Option<f64>,
    /// Calibration integral written to the header.
    #[arg(long, allow_negative_numbers = true, requires = "p_cal_dbm")]
    cal_integral: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    /// 2.5 GHz location summaries.
    Table1,
    /// 60 GHz location summaries.
    Table2,
}

#[derive(Debug, clap::Args)]
struct ReportArgs {
    /// Campaign CSV.
    #[arg(long, required_unless_present = "builtin", conflicts_with = "builtin")]
    campaign: Option<PathBuf>,
    /// Use a bundled campaign instead of a file.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    /// Band in GHz, overriding the campaign file's `# band_ghz=` line.
    #[arg(long, allow_negative_numbers = true)]
    band: Option<f64>,
    /// Reference distance in meters.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    d0: f64,
    /// Path loss at the reference distance in dB. Defaults to free space at d0.
    #[arg(long, allow_negative_numbers = true)]
    pl_d0: Option<f64>,
    /// Links CSV for a partition table.
    #[arg(long)]
    links: Option<PathBuf>,
    /// Partition estimation method.
    #[arg(long, value_enum, default_value_t = Method::Composite)]
    method: Method,
    /// Site model for dB/cm normalization of the partition table.
    #[arg(long)]
    site: Option<PathBuf>,
    /// Directory for campaign.csv and scatter.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

struct Style {
    ansi: bool,
}

impl Style {
    fn detect() -> Self {
        Style {
            ansi: std::env::var_os("FEMTOPROP_NO_COLOR").is_none() && io::stdout().is_terminal(),
        }
    }

    fn bold(&self, s: &str) -> String {
        if self.ansi {
            format!("\x1b[1m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_site(path: &Path) -> Result<SiteModel> {
    let text = read(path)?;
    let site = parse_site(&text).with_context(|| path.display().to_string())?;
    let violations = validate_site(&site);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(anyhow!(
            "{}: invalid site model\n{}",
            path.display(),
            list.join("\n")
        ));
    }
    Ok(site)
}

fn site_band(site: &SiteModel, ghz: f64) -> std::result::Result<FrequencyBand, Failure> {
    let declared = site.declared_bands();
    if !declared.iter().any(|b| (b - ghz).abs() <= BAND_MATCH_GHZ) {
        let list: Vec<String> = declared.iter().map(|b| b.to_string()).collect();
        return Err(usage(format!(
            "band {ghz} GHz is not declared by the site (declared: {})",
            list.join(", ")
        )));
    }
    FrequencyBand::new(ghz).map_err(|e| usage(e.to_string()))
}

fn band_arg(ghz: f64) -> std::result::Result<FrequencyBand, Failure> {
    FrequencyBand::new(ghz).map_err(|e| usage(e.to_string()))
}

fn parse_point(s: &str) -> Option<Point> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let (x, y) = inner.split_once(',')?;
    Some(Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

fn parse_bounds(s: &str) -> std::result::Result<Bounds, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("invalid --bounds \"{s}\"")))?;
    if v.len() != 4 {
        return Err(usage(format!("--bounds needs four values, got \"{s}\"")));
    }
    Bounds::new(v[0], v[1], v[2], v[3]).map_err(|e| usage(e.to_string()))
}

fn site_extent(site: &SiteModel) -> Result<Bounds> {
    let mut pts: Vec<Point> = Vec::new();
    for w in &site.walls {
        pts.push(w.segment.a);
        pts.push(w.segment.b);
    }
    for c in &site.clutter {
        pts.push(Point::new(c.center.x - c.radius, c.center.y - c.radius));
        pts.push(Point::new(c.center.x + c.radius, c.center.y + c.radius));
    }
    pts.extend(site.nodes.iter().map(|n| n.position));
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&Point) -> f64| {
        pts.iter().map(get).fold(init, f)
    };
    let min_x = fold(f64::min, f64::INFINITY, |p| p.x);
    let min_y = fold(f64::min, f64::INFINITY, |p| p.y);
    let max_x = fold(f64::max, f64::NEG_INFINITY, |p| p.x);
    let max_y = fold(f64::max, f64::NEG_INFINITY, |p| p.y);
    Ok(Bounds::new(min_x, min_y, max_x, max_y)?)
}

fn breakdown_csv(b: &PredictionBreakdown) -> String {
    let mut out = String::from("component,material,count,unit_loss_db,subtotal_db\n");
    let _ = writeln!(out, "free_space,,,,{}", b.free_space_pl_db);
    for (kind, terms) in [("partition", &b.partitions), ("clutter", &b.clutter)] {
        for t in terms {
            let _ = writeln!(
                out,
                "{kind},{},{},{},{}",
                t.material, t.count, t.unit_loss_db, t.subtotal_db
            );
        }
    }
    let _ = writeln!(out, "total,,,,{}", b.total_pl_db);
    out
}

fn predict(args: PredictArgs, style: &Style) -> Outcome {
    let site = load_site(&args.site)?;
    let band = site_band(&site, args.band)?;
    let (rx, rx_gain, rx_label) = match parse_point(&args.rx) {
        Some(p) => (Endpoint::At(p), args.rx_gain, format!("({}, {})", p.x, p.y)),
        None => {
            let node = site
                .node(&args.rx)
                .ok_or_else(|| anyhow!("{}: unknown node \"{}\"", args.site.display(), args.rx))?;
            (
                Endpoint::Node(&args.rx),
                node.antenna_gain_dbi,
                args.rx.clone(),
            )
        }
    };
    let tx = site
        .node(&args.tx)
        .ok_or_else(|| anyhow!("{}: unknown node \"{}\"", args.site.display(), args.tx))?;
    let b = partition_path_loss(&site, &args.tx, rx, &band).map_err(anyhow::Error::from)?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}",
        style.bold(&format!(
            "{} -> {} at {} GHz",
            args.tx, rx_label, band.frequency_ghz
        ))
    );
    let _ = writeln!(out, "distance      {:>9.3} m", b.distance_m);
    let _ = writeln!(out, "free space    {:>9.2} dB", b.free_space_pl_db);
    for (kind, terms) in [("wall", &b.partitions), ("clutter", &b.clutter)] {
        for t in terms {
            let _ = writeln!(
                out,
                "{kind:<7} {:<14} x{} @ {:.2} dB = {:.2} dB",
                t.material, t.count, t.unit_loss_db, t.subtotal_db
            );
        }
    }
    if b.partitions.is_empty() && b.clutter.is_empty() {
        let _ = writeln!(out, "no walls or clutter on the path");
    }
    let _ = writeln!(out, "total PL      {:>9.2} dB", b.total_pl_db);
    if args.received_power {
        let p = b.received_power_dbm(tx.tx_power_dbm, tx.antenna_gain_dbi, rx_gain);
        let _ = writeln!(out, "received      {p:>9.2} dBm");
    }
    print!("{out}");
    if let Some(path) = &args.csv {
        write(path, breakdown_csv(&b))?;
    }
    Ok(())
}

fn coverage(args: CoverageArgs) -> Outcome {
    let site = load_site(&args.site)?;
    let band = site_band(&site, args.band)?;
    let bounds = match &args.bounds {
        Some(s) => parse_bounds(s)?,
        None => site_extent(&site)?,
    };
    if !(args.resolution > 0.0) {
        return Err(usage(format!(
            "--resolution must be positive, got {}",
            args.resolution
        )));
    }
    let grid = coverage_grid(&site, &args.tx, &band, bounds, args.resolution)
        .map_err(anyhow::Error::from)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).context("rendering CSV")?;
    write(&args.out, csv)?;
    if let Some(path) = &args.pgm {
        let mut pgm = Vec::new();
        grid.write_pgm(&mut pgm).context("rendering PGM")?;
        write(path, pgm)?;
    }
    println!(
        "{} x {} cells at {} m written to {}",
        grid.cols,
        grid.rows,
        args.resolution,
        args.out.display()
    );
    Ok(())
}

fn reference_loss(
    d0: f64,
    pl_d0: Option<f64>,
    band: Option<f64>,
) -> std::result::Result<f64, Failure> {
    match (pl_d0, band) {
        (Some(v), _) => Ok(v),
        (None, Some(ghz)) => {
            free_space_path_loss(&band_arg(ghz)?, d0).map_err(|e| usage(e.to_string()))
        }
        (None, None) => Err(usage("give --pl-d0, or --band to use free space at d0")),
    }
}

fn scatter_csv(points: &[(f64, f64)], d0: f64, pl_d0: f64, n: f64) -> String {
    let mut out = String::from("distance_m,pl_db,model_pl_db,residual_db\n");
    for &(d, pl) in points {
        let model = pl_d0 + 10.0 * n * (d / d0).log10();
        let _ = writeln!(out, "{d},{pl},{model},{}", pl - model);
    }
    out
}

fn fit_exponent_cmd(args: FitExponentArgs) -> Outcome {
    let pl_d0 = reference_loss(args.d0, args.pl_d0, args.band)?;
    let path = args.points.display().to_string();
    let pts = parse_points_csv(&read(&args.points)?).with_context(|| path.clone())?;
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.distance_m, p.pl_db)).collect();
    let n = fit_exponent(&xy, args.d0, pl_d0).with_context(|| path.clone())?;
    let sigma = estimate_sigma(&xy, args.d0, pl_d0, n).with_context(|| path.clone())?;
    println!("n={n:.2} sigma={sigma:.2}");
    println!(
        "points={} d0={} pl_d0={pl_d0} n_full={n} sigma_full={sigma}",
        xy.len(),
        args.d0
    );
    if args.unconstrained {
        let u = fit_unconstrained(&xy, args.d0).with_context(|| path.clone())?;
        println!(
            "unconstrained: pl_d0={:.2} n={:.2} sigma={:.2}",
            u.pl_d0, u.n, u.sigma
        );
    }
    if let Some(out) = &args.scatter {
        write(out, scatter_csv(&xy, args.d0, pl_d0, n))?;
    }
    Ok(())
}

fn estimate_partitions(
    links_path: &Path,
    method: Method,
    site: Option<&PathBuf>,
) -> std::result::Result<PartitionLossEstimate, Failure> {
    let ctx = links_path.display().to_string();
    let links = parse_links_csv(&read(links_path)?).with_context(|| ctx.clone())?;
    let est = match method {
        Method::Composite => fit_partitions_composite(&links),
        Method::Nnls => fit_partitions_nnls(&links),
    }
    .with_context(|| ctx.clone())?;
    Ok(match site {
        Some(p) => normalize_loss(est, &load_site(p)?.materials),
        None => est,
    })
}

fn fit_partitions(args: FitPartitionsArgs) -> Outcome {
    let est = estimate_partitions(&args.links, args.method, args.site.as_ref())?;
    print!("{}", est.render_table());
    if let Some(path) = &args.csv {
        write(path, est.to_csv())?;
    }
    Ok(())
}

fn rig_for(band: &FrequencyBand) -> LinkConstants {
    if band.matches(60.0) {
        LinkConstants::RIG_60_GHZ
    } else {
        LinkConstants::RIG_2_5_GHZ
    }
}

fn pdp_stats(args: PdpStatsArgs) -> Outcome {
    let band = band_arg(args.band)?;
    if !(args.distance > 0.0) {
        return Err(usage(format!(
            "--distance must be positive, got {}",
            args.distance
        )));
    }
    let rig = rig_for(&band);
    let link = LinkConstants {
        p_t_dbm: args.pt.unwrap_or(rig.p_t_dbm),
        g_t_dbi: args.gt.unwrap_or(rig.g_t_dbi),
        g_r_dbi: args.gr.unwrap_or(rig.g_r_dbi),
    };
    let cal_ctx = args.cal.display().to_string();
    let cal: CalibrationReference = parse_pdp_file(&read(&args.cal)?)
        .and_then(|f| f.calibration())
        .with_context(|| cal_ctx)?;
    let mut pdps = Vec::new();
    for path in &args.pdps {
        let ctx = path.display().to_string();
        pdps.push(parse_pdp_file(&read(path)?).with_context(|| ctx)?.pdp);
    }
    let a = summarize_location(
        &args.location,
        &pdps,
        &cal,
        &link,
        args.distance,
        &band,
        args.dynamic_range,
    )
    .map_err(anyhow::Error::from)?;
    let s = &a.summary;
    println!(
        "location {} ({} PDPs, {} m, {} GHz)",
        s.location_id,
        pdps.len(),
        s.distance_m,
        band.frequency_ghz
    );
    println!("free space PL   {:.2} dB", s.free_space_pl_db);
    println!(
        "avg PL          {:.2} dB (linearly averaged PDP)",
        s.avg_pl_db
    );
    println!("min / max PL    {:.2} / {:.2} dB", s.min_pl_db, s.max_pl_db);
    println!(
        "delay spread    {:.2} / {:.2} / {:.2} ns (min / max / avg)",
        s.min_ds_ns, s.max_ds_ns, s.avg_ds_ns
    );
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.csv {
        let mut text = if path.exists() {
            read(path)?
        } else {
            String::new()
        };
        let ds = femtoprop::campaign::CampaignDataset {
            band,
            rows: vec![s.clone()],
        };
        let rendered = write_campaign_csv(&ds);
        if text.is_empty() {
            text = rendered;
        } else {
            if !text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(rendered.lines().last().unwrap_or_default());
            text.push('\n');
        }
        write(path, text)?;
    }
    Ok(())
}

fn parse_taps(s: &str) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (d, p) = t
                .split_once(':')
                .ok_or_else(|| usage(format!("tap \"{t}\" is not delay_ns:power_mw")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("invalid number \"{}\" in tap \"{t}\"", v.trim())))
            };
            Ok((num(d)?, num(p)?))
        })
        .collect()
}

fn simulate_pdp(args: SimulatePdpArgs) -> Outcome {
    let taps = match (&args.taps, args.seed) {
        (Some(list), _) => parse_taps(list)?,
        (None, Some(seed)) => random_taps(seed, args.num_taps, args.max_delay, args.peak_mw),
        (None, None) => return Err(usage("give --taps or --seed")),
    };
    if taps.is_empty() {
        return Err(usage("no taps given"));
    }
    let pdp = synthesize_pdp(&taps, args.delta_tau, args.noise_floor)
        .map_err(|e| usage(e.to_string()))?
        .with_meta(PdpMeta {
            location: args.location.clone(),
            ..PdpMeta::default()
        });
    let cal = match args.p_cal_dbm {
        Some(p) => Some(
            match args.cal_integral {
                Some(i) => CalibrationReference::new(p, i),
                None => CalibrationReference::from_pdp(p, &pdp),
            }
            .map_err(|e| usage(e.to_string()))?,
        ),
        None => None,
    };
    write(&args.out, write_pdp_file(&pdp, cal.as_ref()))?;
    println!(
        "{} taps into {} bins of {} ns written to {}",
        taps.len(),
        pdp.gains().len(),
        args.delta_tau,
        args.out.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Outcome {
    let band = args.band.map(band_arg).transpose()?;
    let (text, ctx) = match (&args.campaign, args.builtin) {
        (Some(p), _) => (read(p)?, p.display().to_string()),
        (None, Some(Builtin::Table1)) => (TABLE1_CSV.to_string(), "table1".to_string()),
        (None, Some(Builtin::Table2)) => (TABLE2_CSV.to_string(), "table2".to_string()),
        (None, None) => return Err(usage("give --campaign or --builtin")),
    };
    let dataset = load_campaign(&text, band).with_context(|| ctx.clone())?;
    let fit = fit_campaign(&dataset, Some(args.d0), args.pl_d0).with_context(|| ctx.clone())?;
    let partitions = match &args.links {
        Some(p) => estimate_partitions(p, args.method, args.site.as_ref())?,
        None => PartitionLossEstimate::empty(match args.method {
            Method::Composite => femtoprop::fitting::EstimationMethod::Composite,
            Method::Nnls => femtoprop::fitting::EstimationMethod::Nnls,
        }),
    };
    let r = generate_report(&dataset, &fit, &partitions);
    print!("{}", r.text);
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(&dir.join("campaign.csv"), &r.campaign_csv)?;
        write(&dir.join("scatter.csv"), &r.scatter_csv)?;
        if !partitions.is_empty() {
            write(&dir.join("partitions.csv"), partitions.to_csv())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let style = Style::detect();
    match cli.command {
        Command::Predict(a) => predict(a, &style),
        Command::Coverage(a) => coverage(a),
        Command::FitExponent(a) => fit_exponent_cmd(a),
        Command::FitPartitions(a) => fit_partitions(a),
        Command::PdpStats(a) => pdp_stats(a),
        Command::SimulatePdp(a) => simulate_pdp(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let mut cmd = Cli::command();
    if std::env::var_os("FEMTOPROP_NO_COLOR").is_some() {
        cmd = cmd.color(ColorChoice::Never);
    }
    let parsed = cmd
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = run(cli);
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
