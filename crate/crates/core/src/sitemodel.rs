//! Building description: materials, walls, clutter and radio nodes.
//!
//! The site file is line oriented. `#` starts a comment and fields are
//! whitespace separated:
//!
//! ```text
//! material <id> <thickness_cm | -> <band_GHz>:<loss_dB> [more band:loss pairs]
//! wall <material_id> <x1> <y1> <x2> <y2>
//! clutter <material_id> <x> <y> <radius_m>
//! node <id> <x> <y> <tx_power_dBm> <gain_dBi>
//! ```
//!
//! Materials must be declared before they are referenced.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::geometry::{Point, Segment};

/// Two frequencies closer than this (GHz) address the same loss entry.
pub const BAND_MATCH_GHZ: f64 = 0.1;

/// Bundled illustrative office floor using the five partition categories.
pub const DEMO_SITE: &str = include_str!("../data/demo.site");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SiteError {
    #[error("line {line}, column {column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown material \"{id}\"")]
    UnknownMaterial { line: usize, id: String },
    #[error("line {line}: duplicate {kind} id \"{id}\"")]
    Duplicate {
        line: usize,
        kind: &'static str,
        id: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub id: String,
    /// Absent for clutter-like materials with no meaningful thickness.
    pub thickness_cm: Option<f64>,
    /// `(band_GHz, loss_dB)` in declaration order.
    pub losses: Vec<(f64, f64)>,
}

impl Material {
    /// Loss in dB for a single traversal at `frequency_ghz`, if a band entry lies within
    /// [`BAND_MATCH_GHZ`]. Loss is never interpolated between bands.
    pub fn loss_at(&self, frequency_ghz: f64) -> Option<f64> {
        self.losses
            .iter()
            .filter(|(band, _)| (band - frequency_ghz).abs() <= BAND_MATCH_GHZ + 1e-12)
            .min_by(|x, y| {
                (x.0 - frequency_ghz)
                    .abs()
                    .total_cmp(&(y.0 - frequency_ghz).abs())
            })
            .map(|&(_, loss)| loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub material: String,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterObject {
    pub material: String,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioNode {
    pub id: String,
    pub position: Point,
    pub tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteModel {
    pub materials: Vec<Material>,
    pub walls: Vec<Wall>,
    pub clutter: Vec<ClutterObject>,
    pub nodes: Vec<RadioNode>,
}

impl SiteModel {
    pub fn material(&self, id: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&RadioNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Bands (GHz) declared by every material, in first-seen order.
    pub fn declared_bands(&self) -> Vec<f64> {
        let mut bands: Vec<f64> = Vec::new();
        for m in &self.materials {
            for &(b, _) in &m.losses {
                if !bands.iter().any(|&x| (x - b).abs() <= BAND_MATCH_GHZ) {
                    bands.push(b);
                }
            }
        }
        bands
    }
}

/// One invariant violation found by [`validate_site`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

struct Line<'a> {
    number: usize,
    text: &'a str,
    tokens: Vec<(usize, &'a str)>,
}

impl<'a> Line<'a> {
    fn split(number: usize, text: &'a str) -> Self {
        let content = text.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((s, &content[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push((s, &content[s..]));
        }
        Line {
            number,
            text,
            tokens,
        }
    }

    fn err(&self, token: usize, message: impl Into<String>) -> SiteError {
        let column = self
            .tokens
            .get(token)
            .map(|(c, _)| c + 1)
            .unwrap_or(self.text.trim_end().len() + 1);
        SiteError::Syntax {
            line: self.number,
            column,
            message: message.into(),
        }
    }

    fn expect_len(&self, min: usize, exact: bool, usage: &str) -> Result<(), SiteError> {
        let n = self.tokens.len();
        if n < min || (exact && n > min) {
            let at = if n < min { n } else { min };
            return Err(self.err(at, format!("expected `{usage}`")));
        }
        Ok(())
    }

    fn number(&self, token: usize) -> Result<f64, SiteError> {
        let (_, raw) = self.tokens[token];
        raw.parse::<f64>()
            .map_err(|_| self.err(token, format!("invalid number \"{raw}\"")))
    }

    fn id(&self, token: usize) -> &'a str {
        self.tokens[token].1
    }
}

/// Parse a site file.
///
/// Numeric values are accepted as written; invariants such as positive
/// thickness are checked by [`validate_site`].
pub fn parse_site(text: &str) -> Result<SiteModel, SiteError> {
    let mut site = SiteModel::default();
    let mut material_ids = HashSet::new();
    let mut node_ids = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = Line::split(idx + 1, raw);
        let Some(&(_, keyword)) = line.tokens.first() else {
            continue;
        };
        match keyword {
            "material" => {
                line.expect_len(4, false, "material <id> <thickness_cm|-> <band>:<loss> ...")?;
                let id = line.id(1);
                let thickness_cm = match line.id(2) {
                    "-" => None,
                    _ => Some(line.number(2)?),
                };
                let mut losses = Vec::new();
                for t in 3..line.tokens.len() {
                    let (_, raw) = line.tokens[t];
                    let (band, loss) = raw.split_once(':').ok_or_else(|| {
                        line.err(t, format!("expected <band>:<loss>, got \"{raw}\""))
                    })?;
                    let band: f64 = band
                        .parse()
                        .map_err(|_| line.err(t, format!("invalid band \"{band}\"")))?;
                    let loss: f64 = loss
                        .parse()
                        .map_err(|_| line.err(t, format!("invalid loss \"{loss}\"")))?;
                    losses.push((band, loss));
                }
                if !material_ids.insert(id.to_string()) {
                    return Err(SiteError::Duplicate {
                        line: line.number,
                        kind: "material",
                        id: id.into(),
                    });
                }
                site.materials.push(Material {
                    id: id.into(),
                    thickness_cm,
                    losses,
                });
            }
            "wall" => {
                line.expect_len(6, true, "wall <material> <x1> <y1> <x2> <y2>")?;
                let material = line.id(1);
                let coords = (2..6)
                    .map(|t| line.number(t))
                    .collect::<Result<Vec<_>, _>>()?;
                if !material_ids.contains(material) {
                    return Err(SiteError::UnknownMaterial {
                        line: line.number,
                        id: material.into(),
                    });
                }
                site.walls.push(Wall {
                    material: material.into(),
                    segment: Segment {
                        a: Point::new(coords[0], coords[1]),
                        b: Point::new(coords[2], coords[3]),
                    },
                });
            }
            "clutter" => {
                line.expect_len(5, true, "clutter <material> <x> <y> <radius_m>")?;
                let material = line.id(1);
                let (x, y, r) = (line.number(2)?, line.number(3)?, line.number(4)?);
                if !material_ids.contains(material) {
                    return Err(SiteError::UnknownMaterial {
                        line: line.number,
                        id: material.into(),
                    });
                }
                site.clutter.push(ClutterObject {
                    material: material.into(),
                    center: Point::new(x, y),
                    radius: r,
                });
            }
            "node" => {
                line.expect_len(6, true, "node <id> <x> <y> <tx_power_dBm> <gain_dBi>")?;
                let id = line.id(1);
                let v = (2..6)
                    .map(|t| line.number(t))
                    .collect::<Result<Vec<_>, _>>()?;
                if !node_ids.insert(id.to_string()) {
                    return Err(SiteError::Duplicate {
                        line: line.number,
                        kind: "node",
                        id: id.into(),
                    });
                }
                site.nodes.push(RadioNode {
                    id: id.into(),
                    position: Point::new(v[0], v[1]),
                    tx_power_dbm: v[2],
                    antenna_gain_dbi: v[3],
                });
            }
            other => return Err(line.err(0, format!("unknown record type \"{other}\""))),
        }
    }
    Ok(site)
}

/// Check every site invariant; an empty result means the site is valid.
pub fn validate_site(site: &SiteModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: &'static str| out.push(Violation { entity, rule });

    let mut seen = HashSet::new();
    for m in &site.materials {
        let entity = format!("material {}", m.id);
        if !seen.insert(m.id.as_str()) {
            push(entity.clone(), "duplicate material id");
        }
        match m.thickness_cm {
            Some(t) if !t.is_finite() => push(entity.clone(), "non-finite thickness"),
            Some(t) if t <= 0.0 => push(entity.clone(), "nonpositive thickness"),
            _ => {}
        }
        if m.losses.is_empty() {
            push(entity.clone(), "no band entries");
        }
        if m.losses
            .iter()
            .any(|(b, l)| !b.is_finite() || !l.is_finite())
        {
            push(entity.clone(), "non-finite loss");
        }
    }
    for (i, w) in site.walls.iter().enumerate() {
        let entity = format!("wall #{} ({})", i + 1, w.material);
        match site.material(&w.material) {
            None => push(entity.clone(), "unknown material"),
            Some(m) if m.thickness_cm.is_none() => {
                push(entity.clone(), "wall material has no thickness")
            }
            _ => {}
        }
        if !w.segment.a.is_finite() || !w.segment.b.is_finite() {
            push(entity, "non-finite coordinate");
        } else if w.segment.is_degenerate() {
            push(entity, "degenerate wall geometry");
        }
    }
    for (i, c) in site.clutter.iter().enumerate() {
        let entity = format!("clutter #{} ({})", i + 1, c.material);
        if site.material(&c.material).is_none() {
            push(entity.clone(), "unknown material");
        }
        if !c.center.is_finite() {
            push(entity.clone(), "non-finite coordinate");
        }
        if !(c.radius > 0.0) || !c.radius.is_finite() {
            push(entity, "nonpositive clutter radius");
        }
    }
    let mut seen = HashSet::new();
    for n in &site.nodes {
        let entity = format!("node {}", n.id);
        if !seen.insert(n.id.as_str()) {
            push(entity.clone(), "duplicate node id");
        }
        if !n.position.is_finite() || !n.tx_power_dbm.is_finite() || !n.antenna_gain_dbi.is_finite()
        {
            push(entity, "non-finite value");
        }
    }
    out
}

/// Serializes back into the site file format; `parse_site` reads it back unchanged.
impl fmt::Display for SiteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.materials {
            write!(f, "material {} ", m.id)?;
            match m.thickness_cm {
                Some(t) => write!(f, "{t}")?,
                None => write!(f, "-")?,
            }
            for (band, loss) in &m.losses {
                write!(f, " {band}:{loss}")?;
            }
            writeln!(f)?;
        }
        for w in &self.walls {
            let (a, b) = (w.segment.a, w.segment.b);
            writeln!(f, "wall {} {} {} {} {}", w.material, a.x, a.y, b.x, b.y)?;
        }
        for c in &self.clutter {
            writeln!(
                f,
                "clutter {} {} {} {}",
                c.material, c.center.x, c.center.y, c.radius
            )?;
        }
        for n in &self.nodes {
            writeln!(
                f,
                "node {} {} {} {} {}",
                n.id, n.position.x, n.position.y, n.tx_power_dbm, n.antenna_gain_dbi
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "\
# one wall between two nodes
material drywall 2.5 2.5:5.4 60:6.0
wall drywall 0 0 0 10
node ap1 -1 5 0 6
node sta 1 5 0 6   # trailing comment
";

    #[test]
    fn parses_minimal_file() {
        let site = parse_site(MINIMAL).unwrap();
        assert_eq!(site.walls.len(), 1);
        assert_eq!(site.nodes.len(), 2);
        assert_eq!(site.material("drywall").unwrap().loss_at(60.0), Some(6.0));
        assert!(validate_site(&site).is_empty());
    }

    #[test]
    fn unknown_material_names_id_and_line() {
        let err = parse_site("material drywall 2.5 2.5:5.4\nwall brick 0 0 1 1\n").unwrap_err();
        assert_eq!(
            err,
            SiteError::UnknownMaterial {
                line: 2,
                id: "brick".into()
            }
        );
        assert!(err.to_string().contains("brick"));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse_site("material a 1 2.5:1\nmaterial a 1 2.5:1\n").unwrap_err();
        assert!(matches!(
            err,
            SiteError::Duplicate {
                line: 2,
                kind: "material",
                ..
            }
        ));
        let err = parse_site("node n 0 0 0 0\nnode n 1 1 0 0\n").unwrap_err();
        assert!(matches!(
            err,
            SiteError::Duplicate {
                line: 2,
                kind: "node",
                ..
            }
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_site("material a 1 2.5:1\nwall a 0 0 x 1\n").unwrap_err();
        assert_eq!(
            err,
            SiteError::Syntax {
                line: 2,
                column: 12,
                message: "invalid number \"x\"".into()
            }
        );
        assert!(matches!(
            parse_site("window a 0 0\n").unwrap_err(),
            SiteError::Syntax {
                line: 1,
                column: 1,
                ..
            }
        ));
        assert!(matches!(
            parse_site("material a 1 2.5-1\n").unwrap_err(),
            SiteError::Syntax {
                line: 1,
                column: 14,
                ..
            }
        ));
        assert!(matches!(
            parse_site("material a 1 2.5:1\nwall a 0 0 1\n").unwrap_err(),
            SiteError::Syntax { line: 2, .. }
        ));
    }

    #[test]
    fn demo_site_matches_partition_table() {
        let site = parse_site(DEMO_SITE).unwrap();
        assert!(validate_site(&site).is_empty());
        let expect = [
            ("drywall", Some(2.5), 5.4, 6.0),
            ("whiteboard", Some(1.9), 0.5, 9.6),
            ("clear_glass", Some(0.32), 6.4, 3.6),
            ("mesh_glass", Some(0.32), 7.7, 10.2),
            ("clutter", None, 2.5, 1.2),
        ];
        for (id, thickness, low, high) in expect {
            let m = site.material(id).unwrap();
            assert_eq!(m.thickness_cm, thickness, "{id}");
            assert_eq!(m.loss_at(2.5), Some(low), "{id}");
            assert_eq!(m.loss_at(60.0), Some(high), "{id}");
        }
        assert!(site.walls.len() >= 4);
        assert!(site.node("ap1").is_some());
    }

    #[test]
    fn band_lookup_has_no_interpolation() {
        let m = Material {
            id: "g".into(),
            thickness_cm: Some(0.32),
            losses: vec![(2.5, 6.4), (60.0, 3.6)],
        };
        assert_eq!(m.loss_at(2.45), Some(6.4));
        assert_eq!(m.loss_at(2.6), Some(6.4));
        assert_eq!(m.loss_at(2.7), None);
        assert_eq!(m.loss_at(30.0), None);
    }

    #[test]
    fn violations_are_reported() {
        let site =
            parse_site(&MINIMAL.replace("wall drywall 0 0 0 10", "wall drywall 0 0 0 0")).unwrap();
        assert_eq!(
            validate_site(&site),
            vec![Violation {
                entity: "wall #1 (drywall)".into(),
                rule: "degenerate wall geometry"
            }]
        );

        let site = parse_site("material drywall -1 2.5:5.4\n").unwrap();
        let v = validate_site(&site);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "nonpositive thickness");
    }

    #[test]
    fn other_violations() {
        let mut site =
            parse_site("material c - 2.5:1\nwall c 0 0 1 1\nclutter c 0 0 0\nnode n 0 0 inf 0\n")
                .unwrap();
        site.materials.push(Material {
            id: "e".into(),
            thickness_cm: Some(1.0),
            losses: vec![],
        });
        let rules: Vec<_> = validate_site(&site).into_iter().map(|v| v.rule).collect();
        assert_eq!(
            rules,
            vec![
                "no band entries",
                "wall material has no thickness",
                "nonpositive clutter radius",
                "non-finite value"
            ]
        );
    }

    fn token() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,8}"
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e3..1e3f64, (-1000i32..1000).prop_map(f64::from)]
    }

    prop_compose! {
        fn arb_site()(
            mats in prop::collection::btree_map(token(), (prop::option::of(0.01..10.0f64), prop::collection::vec((0.5..100.0f64, finite()), 1..3)), 1..5),
            walls in prop::collection::vec((any::<prop::sample::Index>(), finite(), finite(), finite(), finite()), 0..6),
            clutter in prop::collection::vec((any::<prop::sample::Index>(), finite(), finite(), 0.01..3.0f64), 0..4),
            nodes in prop::collection::btree_map(token(), (finite(), finite(), finite(), finite()), 0..4),
        ) -> SiteModel {
            let materials: Vec<Material> = mats.into_iter().map(|(id, (t, losses))| Material { id, thickness_cm: t, losses }).collect();
            let walls = walls.into_iter().map(|(i, x1, y1, x2, y2)| Wall {
                material: materials[i.index(materials.len())].id.clone(),
                segment: Segment { a: Point::new(x1, y1), b: Point::new(x2, y2) },
            }).collect();
            let clutter = clutter.into_iter().map(|(i, x, y, r)| ClutterObject {
                material: materials[i.index(materials.len())].id.clone(),
                center: Point::new(x, y),
                radius: r,
            }).collect();
            let nodes = nodes.into_iter().map(|(id, (x, y, p, g))| RadioNode { id, position: Point::new(x, y), tx_power_dbm: p, antenna_gain_dbi: g }).collect();
            SiteModel { materials, walls, clutter, nodes }
        }
    }

    proptest! {
        #[test]
        fn serialization_round_trips(site in arb_site()) {
            let text = site.to_string();
            prop_assert_eq!(parse_site(&text).unwrap(), site);
        }
    }
}
