//! Power delay profile processing.
//!
//! Gains are linear (mW-proportional) and uniformly binned; bin `k` sits at
//! excess delay `k·Δτ`. The sounder's rig constants live here as defaults.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Multipath temporal resolution of the sounder, ns.
pub const DEFAULT_DELTA_TAU_NS: f64 = 2.5;
/// Measurement dynamic range, dB.
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 30.0;
/// Received power window of the rig, dBm; values outside it produce warnings.
pub const MAX_RECEIVED_POWER_DBM: f64 = -20.0;
pub const MIN_RECEIVED_POWER_DBM: f64 = -85.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdpError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bin width mismatch: {expected} ns vs {found} ns")]
    Mismatch { expected: f64, found: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PdpMeta {
    pub location: Option<String>,
    pub band_ghz: Option<f64>,
    pub position_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    delta_tau_ns: f64,
    gains: Vec<f64>,
    pub meta: PdpMeta,
}

impl PowerDelayProfile {
    pub fn new(delta_tau_ns: f64, gains: Vec<f64>) -> Result<Self, PdpError> {
        if !(delta_tau_ns > 0.0) || !delta_tau_ns.is_finite() {
            return Err(PdpError::Domain(format!(
                "bin width must be positive, got {delta_tau_ns} ns"
            )));
        }
        if gains.is_empty() {
            return Err(PdpError::Domain("a PDP needs at least one bin".into()));
        }
        if let Some((k, g)) = gains
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g >= 0.0) || !g.is_finite())
        {
            return Err(PdpError::Domain(format!("bin {k} has invalid gain {g}")));
        }
        Ok(PowerDelayProfile {
            delta_tau_ns,
            gains,
            meta: PdpMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: PdpMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn delta_tau_ns(&self) -> f64 {
        self.delta_tau_ns
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Copy with every gain multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self, PdpError> {
        let mut out = PowerDelayProfile::new(
            self.delta_tau_ns,
            self.gains.iter().map(|g| g * factor).collect(),
        )?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub fn peak(&self) -> f64 {
        self.gains.iter().copied().fold(0.0, f64::max)
    }
}

/// Calibration run: known input power and the integrated power it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReference {
    pub p_cal_dbm: f64,
    pub cal_integral: f64,
}

impl CalibrationReference {
    pub fn new(p_cal_dbm: f64, cal_integral: f64) -> Result<Self, PdpError> {
        if !(cal_integral > 0.0) || !cal_integral.is_finite() || !p_cal_dbm.is_finite() {
            return Err(PdpError::Domain(format!(
                "invalid calibration p_cal={p_cal_dbm} dBm integral={cal_integral}"
            )));
        }
        Ok(CalibrationReference {
            p_cal_dbm,
            cal_integral,
        })
    }

    /// Calibration from a recorded calibration PDP.
    pub fn from_pdp(p_cal_dbm: f64, pdp: &PowerDelayProfile) -> Result<Self, PdpError> {
        Self::new(p_cal_dbm, integrate_pdp(pdp))
    }
}

/// Area under the PDP, `Σ G_k·Δτ` (linear power × ns).
pub fn integrate_pdp(pdp: &PowerDelayProfile) -> f64 {
    pdp.gains.iter().sum::<f64>() * pdp.delta_tau_ns
}

/// Narrowband received power in dBm referenced to a calibration run.
pub fn narrowband_power(
    pdp: &PowerDelayProfile,
    cal: &CalibrationReference,
) -> Result<f64, PdpError> {
    let area = integrate_pdp(pdp);
    if !(area > 0.0) {
        return Err(PdpError::Domain("zero-energy PDP".into()));
    }
    Ok(cal.p_cal_dbm + 10.0 * (area / cal.cal_integral).log10())
}

/// Warning text when a received power falls outside the rig's window.
pub fn received_power_warning(p_rec_dbm: f64) -> Option<String> {
    if p_rec_dbm > MAX_RECEIVED_POWER_DBM {
        Some(format!(
            "received power {p_rec_dbm:.1} dBm is above the {MAX_RECEIVED_POWER_DBM} dBm maximum"
        ))
    } else if p_rec_dbm < MIN_RECEIVED_POWER_DBM {
        Some(format!(
            "received power {p_rec_dbm:.1} dBm is below the {MIN_RECEIVED_POWER_DBM} dBm minimum"
        ))
    } else {
        None
    }
}

/// `PL = P_T + G_T + G_R − P_REC`, dB.
pub fn path_loss_from_link(p_t_dbm: f64, g_t_dbi: f64, g_r_dbi: f64, p_rec_dbm: f64) -> f64 {
    p_t_dbm + g_t_dbi + g_r_dbi - p_rec_dbm
}

/// Zero every bin more than `range_db` below the peak bin.
pub fn clip_dynamic_range(
    pdp: &PowerDelayProfile,
    range_db: f64,
) -> Result<PowerDelayProfile, PdpError> {
    if !(range_db > 0.0) {
        return Err(PdpError::Domain(format!(
            "dynamic range must be positive, got {range_db} dB"
        )));
    }
    let floor = pdp.peak() * 10f64.powf(-range_db / 10.0);
    let mut out = pdp.clone();
    for g in &mut out.gains {
        if *g < floor {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Power-weighted RMS of the excess delays `k·Δτ`, ns.
///
/// No clipping is applied here; callers that want the rig's noise handling
/// run [`clip_dynamic_range`] first.
pub fn rms_delay_spread(pdp: &PowerDelayProfile) -> Result<f64, PdpError> {
    let total: f64 = pdp.gains.iter().sum();
    if !(total > 0.0) {
        return Err(PdpError::Domain("zero-energy PDP".into()));
    }
    let tau = |k: usize| k as f64 * pdp.delta_tau_ns;
    let mean = pdp
        .gains
        .iter()
        .enumerate()
        .map(|(k, g)| g * tau(k))
        .sum::<f64>()
        / total;
    let var = pdp
        .gains
        .iter()
        .enumerate()
        .map(|(k, g)| g * (tau(k) - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(var.max(0.0).sqrt())
}

/// Bin-wise linear mean of a set of PDPs; shorter profiles are zero-padded.
pub fn average_local_area(pdps: &[PowerDelayProfile]) -> Result<PowerDelayProfile, PdpError> {
    let first = pdps
        .first()
        .ok_or_else(|| PdpError::Domain("cannot average an empty PDP set".into()))?;
    let dt = first.delta_tau_ns;
    let mut len = 0;
    for p in pdps {
        if (p.delta_tau_ns - dt).abs() > 1e-12 * dt {
            return Err(PdpError::Mismatch {
                expected: dt,
                found: p.delta_tau_ns,
            });
        }
        len = len.max(p.gains.len());
    }
    let mut sums = vec![0.0; len];
    for p in pdps {
        for (s, g) in sums.iter_mut().zip(&p.gains) {
            *s += g;
        }
    }
    let n = pdps.len() as f64;
    let mut out = PowerDelayProfile::new(dt, sums.into_iter().map(|s| s / n).collect())?;
    out.meta = PdpMeta {
        location: first.meta.location.clone(),
        band_ghz: first.meta.band_ghz,
        position_index: None,
    };
    Ok(out)
}

/// Bin index of a tap at `delay_ns`: `floor(delay/Δτ)`, with a 1e-9 bin
/// allowance so that on-grid delays are not lost to rounding.
pub fn tap_bin(delay_ns: f64, delta_tau_ns: f64) -> usize {
    (delay_ns / delta_tau_ns + 1e-9).floor() as usize
}

/// Build a PDP from discrete taps `(delay_ns, power_mw)` plus a constant noise floor.
pub fn synthesize_pdp(
    taps: &[(f64, f64)],
    delta_tau_ns: f64,
    noise_floor_mw: f64,
) -> Result<PowerDelayProfile, PdpError> {
    if !(delta_tau_ns > 0.0) {
        return Err(PdpError::Domain(format!(
            "bin width must be positive, got {delta_tau_ns} ns"
        )));
    }
    if !(noise_floor_mw >= 0.0) {
        return Err(PdpError::Domain(format!(
            "noise floor must be nonnegative, got {noise_floor_mw}"
        )));
    }
    for &(delay, power) in taps {
        if !(delay >= 0.0) || !delay.is_finite() || !(power >= 0.0) || !power.is_finite() {
            return Err(PdpError::Domain(format!(
                "invalid tap ({delay} ns, {power} mW)"
            )));
        }
    }
    let len = taps
        .iter()
        .map(|&(d, _)| tap_bin(d, delta_tau_ns) + 1)
        .max()
        .unwrap_or(1);
    let mut gains = vec![noise_floor_mw; len];
    for &(delay, power) in taps {
        gains[tap_bin(delay, delta_tau_ns)] += power;
    }
    PowerDelayProfile::new(delta_tau_ns, gains)
}

/// Seeded random taps: a first arrival at 0 ns with `peak_mw`, then
/// `count − 1` taps uniform on `[0, max_delay_ns)` with powers drawn
/// uniformly in dB between 0 and 30 dB below the peak.
pub fn random_taps(seed: u64, count: usize, max_delay_ns: f64, peak_mw: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = Vec::with_capacity(count);
    if count > 0 {
        taps.push((0.0, peak_mw));
    }
    for _ in 1..count {
        let delay = if max_delay_ns > 0.0 {
            rng.random_range(0.0..max_delay_ns)
        } else {
            0.0
        };
        let rel_db: f64 = rng.random_range(0.0..30.0);
        taps.push((delay, peak_mw * 10f64.powf(-rel_db / 10.0)));
    }
    taps
}

/// Contents of a PDP file: the profile and, when the headers carry one, a calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpFile {
    pub pdp: PowerDelayProfile,
    pub p_cal_dbm: Option<f64>,
    pub cal_integral: Option<f64>,
}

impl PdpFile {
    /// Calibration described by this file. `cal_integral` defaults to the
    /// file's own integrated power, which is what a calibration recording is.
    pub fn calibration(&self) -> Result<CalibrationReference, PdpError> {
        let p_cal = self
            .p_cal_dbm
            .ok_or_else(|| PdpError::Domain("file has no p_cal_dbm header".into()))?;
        match self.cal_integral {
            Some(i) => CalibrationReference::new(p_cal, i),
            None => CalibrationReference::from_pdp(p_cal, &self.pdp),
        }
    }
}

/// Parse the PDP file format:
///
/// ```text
/// # delta_tau_ns=2.5
/// # p_cal_dbm=-30
/// # cal_integral=12.5
/// # location=1.4
/// 0,1.0
/// 1,0.25
/// ```
///
/// Missing bin indices are zero. A `bin_index,linear_gain` header row is allowed.
pub fn parse_pdp_file(text: &str) -> Result<PdpFile, PdpError> {
    let mut delta_tau = None;
    let mut p_cal_dbm = None;
    let mut cal_integral = None;
    let mut meta = PdpMeta::default();
    let mut bins: Vec<(usize, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let perr = |message: String| PdpError::Parse {
            line: line_no,
            message,
        };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.trim().split_once('=') else {
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| perr(format!("invalid value for {key}: \"{value}\"")))
            };
            match key {
                "delta_tau_ns" => delta_tau = Some(num()?),
                "p_cal_dbm" => p_cal_dbm = Some(num()?),
                "cal_integral" => cal_integral = Some(num()?),
                "location" => meta.location = Some(value.to_string()),
                "band_ghz" => meta.band_ghz = Some(num()?),
                "position" => {
                    meta.position_index = Some(
                        value
                            .parse()
                            .map_err(|_| perr(format!("invalid position \"{value}\"")))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        if line.starts_with("bin_index") {
            continue;
        }
        let (k, g) = line
            .split_once(',')
            .ok_or_else(|| perr(format!("expected bin_index,linear_gain, got \"{line}\"")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| perr(format!("invalid bin index \"{}\"", k.trim())))?;
        let g: f64 = g
            .trim()
            .parse()
            .map_err(|_| perr(format!("invalid gain \"{}\"", g.trim())))?;
        if bins.last().is_some_and(|&(prev, _)| k <= prev) {
            return Err(perr(format!("bin index {k} is not increasing")));
        }
        bins.push((k, g));
    }
    let delta_tau = delta_tau.ok_or_else(|| PdpError::Parse {
        line: 1,
        message: "missing `# delta_tau_ns=` header".into(),
    })?;
    let len = bins
        .last()
        .map(|&(k, _)| k + 1)
        .ok_or_else(|| PdpError::Parse {
            line: text.lines().count().max(1),
            message: "no PDP bins".into(),
        })?;
    let mut gains = vec![0.0; len];
    for (k, g) in bins {
        gains[k] = g;
    }
    Ok(PdpFile {
        pdp: PowerDelayProfile::new(delta_tau, gains)?.with_meta(meta),
        p_cal_dbm,
        cal_integral,
    })
}

/// Render a PDP in the file format; the calibration headers are optional.
pub fn write_pdp_file(pdp: &PowerDelayProfile, cal: Option<&CalibrationReference>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# delta_tau_ns={}", pdp.delta_tau_ns);
    if let Some(c) = cal {
        let _ = writeln!(out, "# p_cal_dbm={}", c.p_cal_dbm);
        let _ = writeln!(out, "# cal_integral={}", c.cal_integral);
    }
    if let Some(loc) = &pdp.meta.location {
        let _ = writeln!(out, "# location={loc}");
    }
    if let Some(b) = pdp.meta.band_ghz {
        let _ = writeln!(out, "# band_ghz={b}");
    }
    if let Some(p) = pdp.meta.position_index {
        let _ = writeln!(out, "# position={p}");
    }
    let _ = writeln!(out, "bin_index,linear_gain");
    for (k, g) in pdp.gains.iter().enumerate() {
        let _ = writeln!(out, "{k},{g}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pdp(gains: &[f64]) -> PowerDelayProfile {
        PowerDelayProfile::new(DEFAULT_DELTA_TAU_NS, gains.to_vec()).unwrap()
    }

    #[test]
    fn integration() {
        assert_eq!(integrate_pdp(&pdp(&[1.0])), 2.5);
        assert_eq!(integrate_pdp(&pdp(&[0.0, 0.0])), 0.0);
        assert_eq!(integrate_pdp(&pdp(&[1.0, 2.0, 3.0])), 15.0);
    }

    #[test]
    fn narrowband_power_against_calibration() {
        let cal = CalibrationReference::new(-30.0, 15.0).unwrap();
        assert_eq!(
            narrowband_power(&pdp(&[1.0, 2.0, 3.0]), &cal).unwrap(),
            -30.0
        );
        assert_abs_diff_eq!(
            narrowband_power(&pdp(&[10.0, 20.0, 30.0]), &cal).unwrap(),
            -20.0,
            epsilon = 1e-12
        );
        assert!(narrowband_power(&pdp(&[0.0]), &cal).is_err());
    }

    #[test]
    fn two_tap_power_matches_milliwatt_sum() {
        // calibration: 1 mW (0 dBm) in a single bin
        let cal = CalibrationReference::from_pdp(0.0, &pdp(&[1.0])).unwrap();
        let taps = [(0.0, 2e-6), (12.5, 5e-7)];
        let p = synthesize_pdp(&taps, DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        let closed_form = 10.0 * (2e-6f64 + 5e-7).log10();
        assert!((narrowband_power(&p, &cal).unwrap() - closed_form).abs() < 0.01);
    }

    #[test]
    fn link_path_loss() {
        assert_eq!(path_loss_from_link(0.0, 6.0, 6.0, -52.0), 64.0);
        assert_eq!(path_loss_from_link(-10.0, 25.0, 25.0, -58.0), 98.0);
        assert_eq!(path_loss_from_link(0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn plausibility_window() {
        assert!(received_power_warning(-52.0).is_none());
        assert!(received_power_warning(-10.0).unwrap().contains("above"));
        assert!(received_power_warning(-90.0).unwrap().contains("below"));
    }

    #[test]
    fn clipping() {
        let flat = pdp(&[1.0, 1.0, 1.0]);
        assert_eq!(clip_dynamic_range(&flat, 30.0).unwrap(), flat);
        let p = pdp(&[1.0, 1e-4]);
        assert_eq!(clip_dynamic_range(&p, 30.0).unwrap().gains(), &[1.0, 0.0]);
        let p = pdp(&[1.0, 0.1, 10f64.powf(-2.99)]);
        assert_eq!(clip_dynamic_range(&p, 30.0).unwrap(), p);
        assert!(clip_dynamic_range(&p, 0.0).is_err());
    }

    #[test]
    fn delay_spread_examples() {
        assert_eq!(rms_delay_spread(&pdp(&[0.0, 3.0])).unwrap(), 0.0);
        let two = synthesize_pdp(&[(0.0, 1.0), (10.0, 1.0)], DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        assert_abs_diff_eq!(rms_delay_spread(&two).unwrap(), 5.0, epsilon = 1e-12);
        let uneven =
            synthesize_pdp(&[(0.0, 1.0), (20.0, 0.25)], DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        assert_abs_diff_eq!(rms_delay_spread(&uneven).unwrap(), 8.0, epsilon = 1e-12);
        assert!(rms_delay_spread(&pdp(&[0.0])).is_err());
    }

    #[test]
    fn averaging_is_linear() {
        let p = pdp(&[0.3, 0.2]);
        let avg = average_local_area(&[p.clone(), p.clone(), p.clone()]).unwrap();
        for (a, b) in avg.gains().iter().zip(p.gains()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let avg = average_local_area(&[pdp(&[1.0]), pdp(&[10.0])]).unwrap();
        assert_eq!(avg.gains(), &[5.5]);
        assert_abs_diff_eq!(10.0 * avg.gains()[0].log10(), 7.4, epsilon = 0.01);
        // zero padding
        let avg = average_local_area(&[pdp(&[1.0]), pdp(&[1.0, 4.0])]).unwrap();
        assert_eq!(avg.gains(), &[1.0, 2.0]);
    }

    #[test]
    fn averaging_errors() {
        assert!(average_local_area(&[]).is_err());
        let other = PowerDelayProfile::new(1.0, vec![1.0]).unwrap();
        assert!(matches!(
            average_local_area(&[pdp(&[1.0]), other]),
            Err(PdpError::Mismatch { .. })
        ));
    }

    #[test]
    fn averaging_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        let set: Vec<PowerDelayProfile> = (0..40)
            .map(|_| {
                pdp(&(0..64)
                    .map(|_| rng.random::<f64>() * 1e-3)
                    .collect::<Vec<_>>())
            })
            .collect();
        let avg = average_local_area(&set).unwrap();
        for k in 0..64 {
            let mut acc = 0.0;
            for p in &set {
                acc += p.gains()[k];
            }
            let expected = acc / 40.0;
            assert!((avg.gains()[k] - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn synthesis_binning() {
        let p = synthesize_pdp(&[(0.0, 1.0)], DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        assert_eq!(p.gains().iter().filter(|&&g| g > 0.0).count(), 1);
        let p = synthesize_pdp(&[(1.0, 0.5), (1.4, 0.25)], DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        assert_eq!(p.gains(), &[0.75]);
        let p = synthesize_pdp(&[(2.5, 1.0)], DEFAULT_DELTA_TAU_NS, 0.0).unwrap();
        assert_eq!(p.gains(), &[0.0, 1.0]);
        let p = synthesize_pdp(&[(5.0, 1.0)], DEFAULT_DELTA_TAU_NS, 0.01).unwrap();
        assert_eq!(p.gains(), &[0.01, 0.01, 1.01]);
        assert!(synthesize_pdp(&[(-1.0, 1.0)], 2.5, 0.0).is_err());
        assert!(synthesize_pdp(&[(1.0, -1.0)], 2.5, 0.0).is_err());
    }

    #[test]
    fn random_taps_are_seeded() {
        let a = random_taps(5, 8, 100.0, 1e-6);
        assert_eq!(a, random_taps(5, 8, 100.0, 1e-6));
        assert_ne!(a, random_taps(6, 8, 100.0, 1e-6));
        assert_eq!(a[0], (0.0, 1e-6));
        assert!(a
            .iter()
            .all(|&(d, p)| (0.0..100.0).contains(&d) && (1e-9..=1e-6).contains(&p)));
        assert!(random_taps(1, 0, 10.0, 1.0).is_empty());
    }

    #[test]
    fn file_round_trip_and_errors() {
        let mut p = synthesize_pdp(&[(0.0, 1.0), (7.5, 0.125)], 2.5, 0.0).unwrap();
        p.meta.location = Some("1.4".into());
        let cal = CalibrationReference::new(-30.0, 2.5).unwrap();
        let text = write_pdp_file(&p, Some(&cal));
        let parsed = parse_pdp_file(&text).unwrap();
        assert_eq!(parsed.pdp, p);
        assert_eq!(parsed.calibration().unwrap(), cal);

        let sparse = parse_pdp_file("# delta_tau_ns=2.5\n# p_cal_dbm=0\n0,1\n3,1\n").unwrap();
        assert_eq!(sparse.pdp.gains(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(sparse.calibration().unwrap().cal_integral, 5.0);

        assert!(matches!(
            parse_pdp_file("0,1\n"),
            Err(PdpError::Parse { .. })
        ));
        assert!(matches!(
            parse_pdp_file("# delta_tau_ns=2.5\n0,1\nx,2\n"),
            Err(PdpError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_pdp_file("# delta_tau_ns=2.5\n2,1\n1,2\n"),
            Err(PdpError::Parse { line: 3, .. })
        ));
        assert!(parse_pdp_file("# delta_tau_ns=2.5\n0,-1\n").is_err());
    }

    fn gains() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..1.0f64, 1..40)
            .prop_filter("nonzero", |g| g.iter().any(|&x| x > 1e-6))
    }

    proptest! {
        #[test]
        fn power_scales_by_ten_log_c(g in gains(), c in 1e-6..1e6f64) {
            let p = pdp(&g);
            let cal = CalibrationReference::new(-10.0, 1.0).unwrap();
            let scaled = p.scaled(c).unwrap();
            let diff = narrowband_power(&scaled, &cal).unwrap() - narrowband_power(&p, &cal).unwrap();
            prop_assert!((diff - 10.0 * c.log10()).abs() < 1e-9);
        }

        #[test]
        fn delay_spread_invariances(taps in prop::collection::vec((0usize..40, 1e-6..1.0f64), 1..10), c in 1e-3..1e3f64, shift in 0usize..20) {
            let base: Vec<(f64, f64)> = taps.iter().map(|&(k, p)| (k as f64 * 2.5, p)).collect();
            let p = synthesize_pdp(&base, 2.5, 0.0).unwrap();
            let s0 = rms_delay_spread(&p).unwrap();
            let s1 = rms_delay_spread(&p.scaled(c).unwrap()).unwrap();
            let shifted: Vec<(f64, f64)> = base.iter().map(|&(d, pw)| (d + shift as f64 * 2.5, pw)).collect();
            let s2 = rms_delay_spread(&synthesize_pdp(&shifted, 2.5, 0.0).unwrap()).unwrap();
            prop_assert!((s0 - s1).abs() <= 1e-9 * s0.max(1.0));
            prop_assert!((s0 - s2).abs() <= 1e-9 * s0.max(1.0));
        }

        #[test]
        fn clipping_is_idempotent(g in gains(), range in 1.0..60.0f64) {
            let once = clip_dynamic_range(&pdp(&g), range).unwrap();
            prop_assert_eq!(clip_dynamic_range(&once, range).unwrap(), once);
        }

        #[test]
        fn averaging_preserves_mean_integral(set in prop::collection::vec(gains(), 1..8)) {
            let pdps: Vec<_> = set.iter().map(|g| pdp(g)).collect();
            let avg = average_local_area(&pdps).unwrap();
            let mean = pdps.iter().map(integrate_pdp).sum::<f64>() / pdps.len() as f64;
            prop_assert!((integrate_pdp(&avg) - mean).abs() <= 1e-12 * mean);
        }
    }
}
