//! Trajectory dataset files for model training.
//!
//! Newline-delimited text, one trajectory per record:
//!
//! ```text
//! track,<id>
//! <frame>,<left>,<top>,<width>,<height>
//! <frame>,<left>,<top>,<width>,<height>
//! ...
//! ```
//!
//! Frames must be strictly increasing within a track. Floats use shortest
//! round-trip notation, so write∘read is lossless.

use std::path::Path;

use crate::features::Observation;
use crate::geom::Box;

use super::IoError;

pub fn trajectories_to_string(tracks: &[(u64, Vec<Observation>)]) -> String {
    let mut out = String::new();
    for (id, obs) in tracks {
        out.push_str(&format!("track,{id}\n"));
        for o in obs {
            let [l, t, w, h] = o.bbox.ltwh();
            out.push_str(&format!("{},{},{},{},{}\n", o.t, l, t, w, h));
        }
    }
    out
}

pub fn parse_trajectories(text: &str, label: &str) -> Result<Vec<(u64, Vec<Observation>)>, IoError> {
    let err = |line: usize, msg: String| IoError::Parse { path: label.to_string(), line, msg };
    let mut tracks: Vec<(u64, Vec<Observation>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(id_str) = trimmed.strip_prefix("track,") {
            let id = id_str
                .trim()
                .parse::<u64>()
                .map_err(|_| err(line, format!("bad track id '{id_str}'")))?;
            tracks.push((id, Vec::new()));
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(line, format!("expected 5 fields, got {}", fields.len())));
        }
        let Some(current) = tracks.last_mut() else {
            return Err(err(line, "observation before any 'track,<id>' header".to_string()));
        };
        let frame = fields[0]
            .parse::<i64>()
            .map_err(|_| err(line, format!("bad frame '{}'", fields[0])))?;
        let mut coords = [0.0; 4];
        for (slot, s) in coords.iter_mut().zip(&fields[1..]) {
            *slot = s.parse::<f64>().map_err(|_| err(line, format!("bad number '{s}'")))?;
        }
        if let Some(last) = current.1.last() {
            if frame <= last.t {
                return Err(err(line, format!("frame {frame} not after {}", last.t)));
            }
        }
        current.1.push(Observation::new(frame, Box::from_ltwh(coords)));
    }
    Ok(tracks)
}

pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<(u64, Vec<Observation>)>, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_trajectories(&text, &path.display().to_string())
}

pub fn write_trajectories(
    path: impl AsRef<Path>,
    tracks: &[(u64, Vec<Observation>)],
) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, trajectories_to_string(tracks)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Drops the ids, keeping the observation sequences.
pub fn observation_sets(tracks: &[(u64, Vec<Observation>)]) -> Vec<Vec<Observation>> {
    tracks.iter().map(|(_, obs)| obs.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_observation() {
        let tracks = vec![
            (
                1,
                vec![
                    Observation::new(1, Box::new(0.1, 0.2, 0.3, 0.4)),
                    Observation::new(2, Box::new(0.15, 0.2, 0.3, 0.4)),
                ],
            ),
            (7, vec![Observation::new(5, Box::new(0.30000000000000004, 0.1, 0.2, 0.2))]),
        ];
        let text = trajectories_to_string(&tracks);
        let back = parse_trajectories(&text, "mem").unwrap();
        assert_eq!(back, tracks);
        assert_eq!(trajectories_to_string(&back), text);
    }

    #[test]
    fn structural_errors_name_the_line() {
        let err = parse_trajectories("1,0,0,1,1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        let err = parse_trajectories("track,1\n2,0,0,1,1\n2,0,0,1,1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }));
        let err = parse_trajectories("track,1\n2,0,0,1\n", "d.txt").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }));
    }
}
