//! Planar geometry for the direct TX→RX ray.
//!
//! Walls are half-open segments: a wall from `a` to `b` contains `a` but not
//! `b`, so a ray through the joint of two chained walls is counted once. The
//! ray itself is closed. Predicates use an absolute tolerance of [`EPS`] meters.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::sitemodel::SiteModel;

/// Absolute tolerance for intersection predicates, in meters.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn add_scaled(self, v: Point, t: f64) -> Point {
        Point::new(self.x + v.x * t, self.y + v.y * t)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Directed segment from `a` to `b`.
///
/// Fields are public so that a site file can carry a degenerate wall through
/// parsing and have it reported by validation; use [`Segment::new`] when the
/// nonzero-length invariant should be enforced up front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Result<Self, GeometryError> {
        let s = Segment { a, b };
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::Domain("non-finite segment endpoint".into()));
        }
        if s.is_degenerate() {
            return Err(GeometryError::Domain(format!("degenerate segment at {a}")));
        }
        Ok(s)
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn is_degenerate(&self) -> bool {
        self.length() <= EPS
    }

    fn dir(&self) -> Point {
        self.b.sub(self.a)
    }
}

/// Raw relation between two segments, expressed in the parameters of both.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Relation {
    Disjoint,
    /// Lines cross at `s1.a + t·(s1.b − s1.a)` = `s2.a + u·(s2.b − s2.a)`.
    Cross {
        t: f64,
        u: f64,
    },
    /// Collinear; `lo..=hi` is the projection of `s2` onto the parameter of `s1`.
    Collinear {
        lo: f64,
        hi: f64,
        reversed: bool,
    },
}

fn relate(s1: &Segment, s2: &Segment) -> Relation {
    let r = s1.dir();
    let s = s2.dir();
    let (rl, sl) = (r.norm(), s.norm());
    let qp = s2.a.sub(s1.a);
    let denom = r.cross(s);
    if denom.abs() <= 1e-12 * rl * sl {
        // parallel: collinear iff s2.a lies on the line of s1
        if (qp.cross(r) / rl).abs() > EPS {
            return Relation::Disjoint;
        }
        let rr = r.dot(r);
        let u0 = qp.dot(r) / rr;
        let u1 = s2.b.sub(s1.a).dot(r) / rr;
        let reversed = u1 < u0;
        return Relation::Collinear {
            lo: u0.min(u1),
            hi: u0.max(u1),
            reversed,
        };
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    Relation::Cross { t, u }
}

/// Parameter `u` along a segment of length `len` lies in the half-open `[0, 1)`.
fn in_half_open(u: f64, len: f64) -> bool {
    let e = EPS / len;
    u >= -e && u < 1.0 - e
}

fn in_closed(t: f64, len: f64) -> bool {
    let e = EPS / len;
    t >= -e && t <= 1.0 + e
}

fn lex_lt(p: Point, q: Point) -> bool {
    (p.x, p.y) < (q.x, q.y)
}

/// Intersection of two half-open segments.
///
/// Proper crossings return the crossing point. A touch at an endpoint is
/// reported when the touched endpoint is the included start `a` of its
/// segment. For a collinear overlap of positive length the lexicographically
/// smallest point of the overlap is returned. The result is independent of
/// argument order.
pub fn segment_intersection(s1: &Segment, s2: &Segment) -> Option<Point> {
    // canonical order makes the floating-point path identical for (s1, s2) and (s2, s1)
    let key = |s: &Segment| (s.a.x, s.a.y, s.b.x, s.b.y);
    let (p, q) = if key(s1) <= key(s2) {
        (s1, s2)
    } else {
        (s2, s1)
    };
    let (pl, ql) = (p.length(), q.length());
    match relate(p, q) {
        Relation::Disjoint => None,
        Relation::Cross { t, u } => {
            if in_half_open(t, pl) && in_half_open(u, ql) {
                Some(p.a.add_scaled(p.dir(), t.clamp(0.0, 1.0)))
            } else {
                None
            }
        }
        Relation::Collinear { lo, hi, reversed } => {
            let e = EPS / pl;
            let a = lo.max(0.0);
            let b = hi.min(1.0);
            if b < a - e {
                return None;
            }
            if b - a <= e {
                // single touching point: must not be the excluded end of either segment
                let touch = (a + b) / 2.0;
                let q_end = if reversed { lo } else { hi };
                let included = in_half_open(touch, pl) && (touch - q_end).abs() > EPS / pl;
                return included.then(|| p.a.add_scaled(p.dir(), touch));
            }
            let pa = p.a.add_scaled(p.dir(), a);
            let pb = p.a.add_scaled(p.dir(), b);
            Some(if lex_lt(pb, pa) { pb } else { pa })
        }
    }
}

/// First Fresnel zone radius at the point splitting the path into `d1` and `d2`.
pub fn fresnel_radius(wavelength: f64, d1: f64, d2: f64) -> Result<f64, GeometryError> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(GeometryError::Domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    if !(d1 >= 0.0) || !(d2 >= 0.0) || !(d1 + d2 > 0.0) || !(d1 + d2).is_finite() {
        return Err(GeometryError::Domain(format!(
            "invalid path split d1={d1}, d2={d2}"
        )));
    }
    Ok((wavelength * d1 * d2 / (d1 + d2)).sqrt())
}

/// Number of walls of each material crossed by the closed segment `tx → rx`.
///
/// Every declared material appears in the map, with 0 when not crossed.
pub fn crossing_counts(site: &SiteModel, tx: Point, rx: Point) -> BTreeMap<String, u32> {
    let mut ids: Vec<&str> = site
        .materials
        .iter()
        .map(|m| m.id.as_str())
        .chain(site.walls.iter().map(|w| w.material.as_str()))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let wall_material: Vec<usize> = site
        .walls
        .iter()
        .map(|w| ids.binary_search(&w.material.as_str()).unwrap_or(0))
        .collect();
    let mut counts = vec![0; ids.len()];
    let mut runs = Vec::new();
    crossing_counts_indexed(site, &wall_material, tx, rx, &mut counts, &mut runs);
    ids.iter().map(|id| id.to_string()).zip(counts).collect()
}

/// Core of [`crossing_counts`]: `wall_material[i]` is the slot of wall `i`
/// in `counts`. `counts` is overwritten; `runs` is scratch space.
pub(crate) fn crossing_counts_indexed(
    site: &SiteModel,
    wall_material: &[usize],
    tx: Point,
    rx: Point,
    counts: &mut [u32],
    runs: &mut Vec<(usize, f64, f64)>,
) {
    counts.fill(0);
    runs.clear();
    let ray = Segment { a: tx, b: rx };
    let len = ray.length();
    if len <= EPS {
        return;
    }
    let e = EPS / len;
    for (wall, &slot) in site.walls.iter().zip(wall_material) {
        let seg = &wall.segment;
        let wl = seg.length();
        if wl <= EPS {
            continue;
        }
        match relate(&ray, seg) {
            Relation::Disjoint => {}
            Relation::Cross { t, u } => {
                if in_closed(t, len) && in_half_open(u, wl) {
                    counts[slot] += 1;
                }
            }
            Relation::Collinear { lo, hi, reversed } => {
                let a = lo.max(0.0);
                let b = hi.min(1.0);
                if b < a - e {
                    continue;
                }
                if b - a <= e {
                    // the ray touches only one end of the wall; the excluded end `b` does not count
                    let end_b = if reversed { lo } else { hi };
                    if ((a + b) / 2.0 - end_b).abs() <= e {
                        continue;
                    }
                }
                runs.push((slot, a, b));
            }
        }
    }
    // collinear runs per material, in ray parameter space
    runs.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
    });
    let mut current: Option<(usize, f64)> = None;
    for &(slot, lo, hi) in runs.iter() {
        match current {
            Some((s, end)) if s == slot && lo <= end + e => current = Some((s, end.max(hi))),
            _ => {
                counts[slot] += 1;
                current = Some((slot, hi));
            }
        }
    }
}

/// Distance from `p` to the closed segment `s`.
pub fn point_segment_distance(p: Point, s: &Segment) -> f64 {
    let d = s.dir();
    let dd = d.dot(d);
    if dd == 0.0 {
        return p.distance(s.a);
    }
    let t = (p.sub(s.a).dot(d) / dd).clamp(0.0, 1.0);
    p.distance(s.a.add_scaled(d, t))
}

/// Distance from `(px, py)` (first quadrant) to the ellipse `x²/a² + y²/b² = 1`, `a ≥ b > 0`.
///
/// Robust bisection on the Lagrange parameter; see Eberly, "Distance from a
/// point to an ellipse".
fn distance_to_ellipse_boundary(a: f64, b: f64, px: f64, py: f64) -> f64 {
    let (px, py) = (px.abs(), py.abs());
    if py > 0.0 {
        if px > 0.0 {
            let z0 = px / a;
            let z1 = py / b;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (a / b) * (a / b);
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if gs > 0.0 {
                    s0 = s;
                } else if gs < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x = r0 * px / (s + r0);
            let y = py / (s + 1.0);
            (x - px).hypot(y - py)
        } else {
            (py - b).abs()
        }
    } else {
        let numer = a * px;
        let denom = a * a - b * b;
        if numer < denom {
            let xde = numer / denom;
            let x = a * xde;
            let y = b * (1.0 - xde * xde).max(0.0).sqrt();
            (x - px).hypot(y)
        } else {
            (px - a).abs()
        }
    }
}

/// Distance from `p` to the first Fresnel ellipse of `tx → rx`, 0 when inside.
///
/// The ellipse has foci at `tx` and `rx` and semi-minor axis equal to the
/// Fresnel radius at mid-path.
pub fn fresnel_zone_clearance(
    tx: Point,
    rx: Point,
    wavelength: f64,
    p: Point,
) -> Result<f64, GeometryError> {
    let d = tx.distance(rx);
    if d <= EPS {
        return Err(GeometryError::Domain("coincident path endpoints".into()));
    }
    let minor = fresnel_radius(wavelength, d / 2.0, d / 2.0)?;
    let major = (d * d / 4.0 + minor * minor).sqrt();
    let mid = Point::new((tx.x + rx.x) / 2.0, (tx.y + rx.y) / 2.0);
    let ux = Point::new((rx.x - tx.x) / d, (rx.y - tx.y) / d);
    let rel = p.sub(mid);
    let lx = rel.dot(ux);
    let ly = ux.cross(rel);
    if (lx / major).powi(2) + (ly / minor).powi(2) <= 1.0 {
        return Ok(0.0);
    }
    Ok(distance_to_ellipse_boundary(major, minor, lx, ly))
}

/// Clutter objects that encroach on the first Fresnel zone without touching the direct ray.
pub fn clutter_hits<'a>(
    site: &'a SiteModel,
    tx: Point,
    rx: Point,
    wavelength: f64,
) -> impl Iterator<Item = &'a crate::sitemodel::ClutterObject> + 'a {
    let ray = Segment { a: tx, b: rx };
    let d = tx.distance(rx);
    // the whole ellipse lies within its semi-minor axis of the segment
    let reach = fresnel_radius(wavelength, d / 2.0, d / 2.0).unwrap_or(f64::INFINITY) + 1e-6;
    site.clutter.iter().filter(move |c| {
        let gap = point_segment_distance(c.center, &ray);
        gap > c.radius
            && gap <= c.radius + reach
            && fresnel_zone_clearance(tx, rx, wavelength, c.center)
                .is_ok_and(|gap| gap <= c.radius + EPS)
    })
}

/// Number of clutter objects in the first Fresnel zone that do not block the line of sight.
pub fn clutter_count(site: &SiteModel, tx: Point, rx: Point, wavelength: f64) -> usize {
    clutter_hits(site, tx, rx, wavelength).count()
}
