//! KITTI label / detection line format.
//!
//! A line holds `type truncated occluded alpha left top right bottom h w l x y z
//! rotation_y [score]`, with the location given at the bottom center of the
//! box in camera coordinates (x right, y down, z forward). Boxes are moved
//! into the z-up frame used by [`Box3D`] with a fixed axis permutation:
//! forward becomes +x, left becomes +y, up becomes +z, and the bottom center
//! is lifted by half the height. No calibration is involved.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_yaw, Box3D, Frame, GeometryError};

pub const LABEL_FIELDS: usize = 15;
pub const DETECTION_FIELDS: usize = 16;
pub const DONT_CARE: &str = "DontCare";

const FIELD_NAMES: [&str; DETECTION_FIELDS] = [
    "type", "truncated", "occluded", "alpha", "left", "top", "right", "bottom", "h", "w", "l", "x", "y", "z",
    "rotation_y", "score",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KittiError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: usize, expected: String, found: usize },
    #[error("line {line}, field {field}: {message}")]
    Field { line: usize, field: &'static str, message: String },
    #[error("line {line}: unknown category '{category}'")]
    UnknownCategory { line: usize, category: String },
    #[error("line {line}: {source}")]
    Geometry { line: usize, source: GeometryError },
}

/// What to do with a record whose type has no category id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCategory {
    /// Drop the line with a warning and count it.
    #[default]
    Skip,
    Error,
}

/// Maps KITTI type strings to integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap(pub BTreeMap<String, u32>);

impl Default for CategoryMap {
    fn default() -> Self {
        let names = ["Car", "Pedestrian", "Cyclist", "Van", "Truck", "Person_sitting", "Tram", "Misc"];
        Self(names.iter().enumerate().map(|(i, n)| (n.to_string(), i as u32)).collect())
    }
}

impl CategoryMap {
    pub fn id(&self, name: &str) -> Option<u32> {
        self.0.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.0.iter().find(|(_, &v)| v == id).map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOptions {
    pub categories: CategoryMap,
    pub unknown: UnknownCategory,
}

/// One parsed line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KittiRecord {
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    /// left, top, right, bottom in pixels.
    pub bbox_2d: [f64; 4],
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiRecord {
    pub fn is_dont_care(&self) -> bool {
        self.kind == DONT_CARE
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox_2d[3] - self.bbox_2d[1]
    }

    /// Parses one line; `line` is 1-based and only used for error messages.
    pub fn parse(text: &str, line: usize) -> Result<Self, KittiError> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != LABEL_FIELDS && fields.len() != DETECTION_FIELDS {
            return Err(KittiError::FieldCount {
                line,
                expected: format!("{LABEL_FIELDS} or {DETECTION_FIELDS}"),
                found: fields.len(),
            });
        }
        let num = |i: usize| -> Result<f64, KittiError> {
            let v: f64 = fields[i].parse().map_err(|_| KittiError::Field {
                line,
                field: FIELD_NAMES[i],
                message: format!("'{}' is not a number", fields[i]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(KittiError::Field { line, field: FIELD_NAMES[i], message: format!("{v} is not finite") })
            }
        };
        let occluded_raw = num(2)?;
        if occluded_raw.fract() != 0.0 {
            return Err(KittiError::Field { line, field: "occluded", message: format!("{occluded_raw} is not an integer") });
        }
        let rec = Self {
            kind: fields[0].to_string(),
            truncated: num(1)?,
            occluded: occluded_raw as i32,
            alpha: num(3)?,
            bbox_2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            h: num(8)?,
            w: num(9)?,
            l: num(10)?,
            x: num(11)?,
            y: num(12)?,
            z: num(13)?,
            rotation_y: num(14)?,
            score: if fields.len() == DETECTION_FIELDS { Some(num(15)?) } else { None },
        };
        if !rec.is_dont_care() {
            rec.check(line)?;
        }
        Ok(rec)
    }

    fn check(&self, line: usize) -> Result<(), KittiError> {
        let bad = |field: &'static str, message: String| Err(KittiError::Field { line, field, message });
        if !(0.0..=1.0).contains(&self.truncated) {
            return bad("truncated", format!("{} outside [0, 1]", self.truncated));
        }
        if !(0..=3).contains(&self.occluded) {
            return bad("occluded", format!("{} outside 0..=3", self.occluded));
        }
        for (field, v) in [("h", self.h), ("w", self.w), ("l", self.l)] {
            if v <= 0.0 {
                return bad(field, format!("dimension {v} must be positive"));
            }
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return bad("score", format!("{s} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Geometric box in the z-up frame. Missing scores become 1.
    pub fn to_box(&self, label: u32) -> Result<Box3D, GeometryError> {
        Box3D::new(
            [self.z, -self.x, 0.5 * self.h - self.y],
            [self.l, self.w, self.h],
            -self.rotation_y - FRAC_PI_2,
            label,
            self.score.unwrap_or(1.0),
        )
    }

    /// Copy of `self` with the 3D fields and score taken from `b`.
    pub fn with_box(&self, b: &Box3D, score: Option<f64>) -> Self {
        Self {
            h: b.dz,
            w: b.dy,
            l: b.dx,
            x: -b.cy,
            y: 0.5 * b.dz - b.cz,
            z: b.cx,
            rotation_y: normalize_yaw(-b.yaw - FRAC_PI_2),
            score,
            ..self.clone()
        }
    }

    pub fn to_line(&self) -> String {
        let mut parts = vec![
            self.kind.clone(),
            fmt_num(self.truncated),
            self.occluded.to_string(),
            fmt_num(self.alpha),
        ];
        parts.extend(self.bbox_2d.iter().map(|&v| fmt_num(v)));
        parts.extend([self.h, self.w, self.l, self.x, self.y, self.z, self.rotation_y].iter().map(|&v| fmt_num(v)));
        if let Some(s) = self.score {
            parts.push(fmt_num(s));
        }
        parts.join(" ")
    }
}

/// Fixed-point text with at least six significant digits and at least six
/// decimals, trailing zeros trimmed down to two decimals.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0.00".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(6) as usize;
    let mut s = format!("{v:.decimals$}");
    if let Some(dot) = s.find('.') {
        let min_len = dot + 3;
        while s.len() > min_len && s.ends_with('0') {
            s.pop();
        }
    }
    s
}

/// A parsed frame plus the per-record metadata evaluation and writing need.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KittiFrame {
    pub frame: Frame,
    /// Aligned with `frame.boxes`.
    pub detections: Vec<KittiRecord>,
    /// Aligned with `frame.ground_truth`; DontCare records excluded.
    pub labels: Vec<KittiRecord>,
    /// 2D regions excluded from evaluation.
    pub dont_care: Vec<[f64; 4]>,
    /// Lines dropped because their type has no category id.
    pub skipped_unknown: usize,
}

impl KittiFrame {
    pub fn id(&self) -> &str {
        &self.frame.frame_id
    }
}

struct Parsed {
    records: Vec<KittiRecord>,
    boxes: Vec<Box3D>,
    dont_care: Vec<[f64; 4]>,
    skipped: usize,
}

fn parse_lines(text: &str, detections: bool, opts: &ParseOptions) -> Result<Parsed, KittiError> {
    let mut out = Parsed { records: Vec::new(), boxes: Vec::new(), dont_care: Vec::new(), skipped: 0 };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec = KittiRecord::parse(raw, line)?;
        if detections && rec.score.is_none() {
            return Err(KittiError::FieldCount { line, expected: DETECTION_FIELDS.to_string(), found: LABEL_FIELDS });
        }
        if rec.is_dont_care() {
            out.dont_care.push(rec.bbox_2d);
            continue;
        }
        let Some(label) = opts.categories.id(&rec.kind) else {
            match opts.unknown {
                UnknownCategory::Skip => {
                    log::warn!("line {line}: skipping unknown category '{}'", rec.kind);
                    out.skipped += 1;
                    continue;
                }
                UnknownCategory::Error => return Err(KittiError::UnknownCategory { line, category: rec.kind }),
            }
        };
        let mut b = rec.to_box(label).map_err(|source| KittiError::Geometry { line, source })?;
        if !detections {
            b.score = 1.0;
        }
        out.boxes.push(b);
        out.records.push(rec);
    }
    Ok(out)
}

/// Builds a frame from detection text (16 fields per line) and optional label
/// text (15 or 16 fields). DontCare records never become candidates; label
/// DontCare regions are kept for evaluation masking.
pub fn parse_frame(
    frame_id: &str,
    label_text: Option<&str>,
    detection_text: &str,
    opts: &ParseOptions,
) -> Result<KittiFrame, KittiError> {
    let dets = parse_lines(detection_text, true, opts)?;
    let mut out = KittiFrame {
        frame: Frame::new(frame_id, dets.boxes),
        detections: dets.records,
        skipped_unknown: dets.skipped,
        ..Default::default()
    };
    if let Some(text) = label_text {
        let gts = parse_lines(text, false, opts)?;
        out.frame.ground_truth = Some(gts.boxes);
        out.labels = gts.records;
        out.dont_care = gts.dont_care;
        out.skipped_unknown += gts.skipped;
    }
    Ok(out)
}

/// Detection lines for the given `(index, score)` pairs, in that order.
pub fn detection_lines(frame: &KittiFrame, kept: &[(usize, f64)]) -> String {
    let mut s = String::new();
    for &(i, score) in kept {
        let rec = frame.detections[i].with_box(&frame.frame.boxes[i], Some(score));
        s.push_str(&rec.to_line());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Car 0.00 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59 0.92";

    #[test]
    fn parses_sample_detection() {
        let f = parse_frame("000000", None, SAMPLE, &ParseOptions::default()).unwrap();
        let b = f.frame.boxes[0];
        // Camera (x, y − h/2, z) = (−0.65, 0.885, 46.70) in the z-up frame.
        assert!((b.cx - 46.70).abs() < 1e-12);
        assert!((b.cy - 0.65).abs() < 1e-12);
        assert!((b.cz - -(1.71 - 0.825)).abs() < 1e-12);
        assert_eq!((b.dx, b.dy, b.dz), (3.64, 1.67, 1.65));
        assert!((b.yaw - (1.59 - FRAC_PI_2)).abs() < 1e-12);
        assert_eq!(b.score, 0.92);
        assert_eq!(b.label, 0);
        assert!(f.frame.ground_truth.is_none());
    }

    #[test]
    fn empty_detection_text() {
        let f = parse_frame("1", Some(""), "", &ParseOptions::default()).unwrap();
        assert!(f.frame.boxes.is_empty());
        assert_eq!(f.frame.ground_truth, Some(vec![]));
    }

    #[test]
    fn field_count_errors_name_the_line() {
        let text = format!("{SAMPLE}\nCar 0.00 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.70");
        let err = parse_frame("x", None, &text, &ParseOptions::default()).unwrap_err();
        assert_eq!(err, KittiError::FieldCount { line: 2, expected: "15 or 16".into(), found: 14 });
        let label_only = "Car 0.00 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";
        assert!(matches!(
            parse_frame("x", None, label_only, &ParseOptions::default()),
            Err(KittiError::FieldCount { line: 1, .. })
        ));
    }

    #[test]
    fn bad_numbers_name_the_field() {
        let text = SAMPLE.replace("1.67", "wide");
        let err = parse_frame("x", None, &text, &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, KittiError::Field { line: 1, field: "w", .. }));
        let text = SAMPLE.replace(" 1.65 ", " -1.65 ");
        assert!(matches!(
            parse_frame("x", None, &text, &ParseOptions::default()),
            Err(KittiError::Field { field: "h", .. })
        ));
    }

    #[test]
    fn dont_care_and_unknown_categories() {
        let labels = "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n\
                      Car 0.00 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59\n\
                      Blimp 0.00 0 -1.58 587 173 614 200 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59";
        let f = parse_frame("x", Some(labels), "", &ParseOptions::default()).unwrap();
        assert_eq!(f.dont_care.len(), 1);
        assert_eq!(f.labels.len(), 1);
        assert_eq!(f.skipped_unknown, 1);

        let strict = ParseOptions { unknown: UnknownCategory::Error, ..Default::default() };
        assert_eq!(
            parse_frame("x", Some(labels), "", &strict).unwrap_err(),
            KittiError::UnknownCategory { line: 3, category: "Blimp".into() }
        );
    }

    #[test]
    fn line_round_trip() {
        let f = parse_frame("x", None, SAMPLE, &ParseOptions::default()).unwrap();
        let text = detection_lines(&f, &[(0, 0.92)]);
        let again = KittiRecord::parse(text.trim(), 1).unwrap();
        let orig = KittiRecord::parse(SAMPLE, 1).unwrap();
        for (a, b) in [
            (again.x, orig.x),
            (again.y, orig.y),
            (again.z, orig.z),
            (again.h, orig.h),
            (again.w, orig.w),
            (again.l, orig.l),
            (again.rotation_y, orig.rotation_y),
            (again.score.unwrap(), orig.score.unwrap()),
        ] {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(46.7), "46.70");
        assert_eq!(fmt_num(-1.59), "-1.59");
        assert_eq!(fmt_num(0.000123456789), "0.000123457");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_num(0.0), "0.00");
        assert_eq!(fmt_num(-1e-12), "-0.000000000001");
        assert_eq!(fmt_num(-0.0), "0.00");
    }
}
