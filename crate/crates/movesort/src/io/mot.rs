//! MOTChallenge text interchange.
//!
//! One row per line: `frame,id,left,top,width,height,conf,-1,-1,-1`.
//! Frames are 1-based, `id` is −1 in pure detection files, and the three
//! trailing fields are always −1. Floats are written in Rust's shortest
//! round-trip notation, so `read → write` reproduces a file produced by
//! [`write_mot`] byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use crate::geom::Box;
use crate::metrics::FrameAnnotations;
use crate::tracker::OutputRow;

use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    pub frame: i64,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
}

impl MotRow {
    pub fn bbox(&self) -> Box {
        Box::new(self.left, self.top, self.width, self.height)
    }

    fn validate(&self) -> Result<(), String> {
        if self.frame < 1 {
            return Err(format!("frame must be ≥ 1, got {}", self.frame));
        }
        if !(self.width >= 0.0) || !(self.height >= 0.0) {
            return Err(format!(
                "width and height must be ≥ 0, got {},{}",
                self.width, self.height
            ));
        }
        Ok(())
    }
}

pub fn mot_to_string(rows: &[MotRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},-1,-1,-1\n",
            r.frame, r.id, r.left, r.top, r.width, r.height, r.conf
        ));
    }
    out
}

pub fn parse_mot(text: &str, label: &str) -> Result<Vec<MotRow>, IoError> {
    let err = |line: usize, msg: String| IoError::Parse { path: label.to_string(), line, msg };
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(err(line, format!("expected 10 fields, got {}", fields.len())));
        }
        let int = |s: &str, what: &str| {
            s.parse::<i64>().map_err(|_| err(line, format!("bad {what} '{s}'")))
        };
        let num = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| err(line, format!("bad {what} '{s}'")))
        };
        let row = MotRow {
            frame: int(fields[0], "frame")?,
            id: int(fields[1], "id")?,
            left: num(fields[2], "left")?,
            top: num(fields[3], "top")?,
            width: num(fields[4], "width")?,
            height: num(fields[5], "height")?,
            conf: num(fields[6], "conf")?,
        };
        row.validate().map_err(|msg| err(line, msg))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_mot(path: impl AsRef<Path>) -> Result<Vec<MotRow>, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_mot(&text, &path.display().to_string())
}

pub fn write_mot(path: impl AsRef<Path>, rows: &[MotRow]) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, mot_to_string(rows)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Groups detection rows by frame, keeping file order within a frame.
pub fn detections_by_frame(rows: &[MotRow]) -> BTreeMap<i64, Vec<Box>> {
    let mut frames: BTreeMap<i64, Vec<Box>> = BTreeMap::new();
    for r in rows {
        frames.entry(r.frame).or_default().push(r.bbox());
    }
    frames
}

/// Converts tracker output to MOT rows with unit confidence.
pub fn rows_from_output(rows: &[OutputRow]) -> Vec<MotRow> {
    rows.iter()
        .map(|r| MotRow {
            frame: r.frame,
            id: r.id as i64,
            left: r.bbox.left,
            top: r.bbox.top,
            width: r.bbox.width,
            height: r.bbox.height,
            conf: 1.0,
        })
        .collect()
}

pub fn output_from_rows(rows: &[MotRow], label: &str) -> Result<Vec<OutputRow>, IoError> {
    rows.iter()
        .map(|r| {
            if r.id < 0 {
                return Err(IoError::Parse {
                    path: label.to_string(),
                    line: 0,
                    msg: format!("track rows need a non-negative id, got {}", r.id),
                });
            }
            Ok(OutputRow { id: r.id as u64, frame: r.frame, bbox: r.bbox() })
        })
        .collect()
}

/// Interprets rows as ground truth (ids required, unique per frame).
pub fn annotations_from_rows(rows: &[MotRow], label: &str) -> Result<FrameAnnotations, IoError> {
    let mut ann = FrameAnnotations::new();
    for r in output_from_rows(rows, label)? {
        ann.insert(r.frame, r.id, r.bbox).map_err(|e| IoError::Parse {
            path: label.to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
    }
    Ok(ann)
}

/// Divides pixel coordinates by the image dimensions.
pub fn normalize_rows(rows: &mut [MotRow], img_width: f64, img_height: f64) {
    for r in rows {
        r.left /= img_width;
        r.width /= img_width;
        r.top /= img_height;
        r.height /= img_height;
    }
}

/// Multiplies normalized coordinates back to pixels.
pub fn denormalize_rows(rows: &mut [MotRow], img_width: f64, img_height: f64) {
    for r in rows {
        r.left *= img_width;
        r.width *= img_width;
        r.top *= img_height;
        r.height *= img_height;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_row_parses_to_its_fields() {
        let rows = parse_mot("1,3,10,20,30,40,1,-1,-1,-1\n", "fixture").unwrap();
        assert_eq!(rows.len(), 1);
        let r = rows[0];
        assert_eq!((r.frame, r.id), (1, 3));
        assert_eq!(r.bbox().ltwh(), [10.0, 20.0, 30.0, 40.0]);
        assert_eq!(r.conf, 1.0);
    }

    #[test]
    fn write_then_read_is_the_identity_bitwise() {
        let rows = vec![
            MotRow {
                frame: 1,
                id: 3,
                left: 10.25,
                top: 20.0,
                width: 30.125,
                height: 40.5,
                conf: 0.875,
            },
            MotRow {
                frame: 2,
                id: -1,
                left: 0.1,
                top: 0.30000000000000004,
                width: 0.2,
                height: 0.25,
                conf: 1.0,
            },
        ];
        let text = mot_to_string(&rows);
        let back = parse_mot(&text, "mem").unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.frame, b.frame);
            assert_eq!(a.id, b.id);
            for (x, y) in a.bbox().ltwh().iter().zip(b.bbox().ltwh()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.conf.to_bits(), b.conf.to_bits());
        }
        assert_eq!(mot_to_string(&back), text, "re-serialization is byte-identical");
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let err = parse_mot("1,1,0,0,1,1,1,-1,-1,-1\n2,1,0,0,-5,1,1,-1,-1,-1\n", "d.txt")
            .unwrap_err();
        match err {
            IoError::Parse { path, line, msg } => {
                assert_eq!(path, "d.txt");
                assert_eq!(line, 2);
                assert!(msg.contains("width"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_mot("0,1,0,0,1,1,1,-1,-1,-1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        let err = parse_mot("1,1,0,0,1,1,1,-1,-1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        let err = parse_mot("1,1,x,0,1,1,1,-1,-1,-1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
    }

    #[test]
    fn normalization_round_trips() {
        let mut rows = parse_mot("1,3,192,108,96,216,1,-1,-1,-1\n", "px").unwrap();
        normalize_rows(&mut rows, 1920.0, 1080.0);
        assert_eq!(rows[0].bbox().ltwh(), [0.1, 0.1, 0.05, 0.2]);
        denormalize_rows(&mut rows, 1920.0, 1080.0);
        assert_eq!(rows[0].bbox().ltwh(), [192.0, 108.0, 96.0, 216.0]);
    }
}
