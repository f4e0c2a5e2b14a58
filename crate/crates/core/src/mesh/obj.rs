//! Wavefront OBJ input/output for quad control nets. Only `v` and `f` records
//! are interpreted; everything else is skipped.

use super::{ControlNet, Point3};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

pub fn load_obj(bytes: &[u8]) -> Result<ControlNet> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("not UTF-8: {e}")))?;
    let mut positions: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 4]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::Format(format!("line {}: bad coordinate {t:?}", lineno + 1)))
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(Error::Format(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                positions.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| parse_index(t, positions.len(), lineno + 1))
                    .collect::<Result<_>>()?;
                if idx.len() != 4 {
                    return Err(Error::Format(format!(
                        "line {}: face has {} vertices, only quads are supported",
                        lineno + 1,
                        idx.len()
                    )));
                }
                faces.push([idx[0], idx[1], idx[2], idx[3]]);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(Error::Empty);
    }
    // indices may refer forward to vertices declared later
    if let Some(&bad) = faces.iter().flatten().find(|&&i| i >= positions.len()) {
        return Err(Error::Format(format!("face index {} out of range", bad + 1)));
    }
    ControlNet::from_faces(positions, faces)
}

fn parse_index(token: &str, n_seen: usize, lineno: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| Error::Format(format!("line {lineno}: bad face index {token:?}")))?;
    match raw {
        0 => Err(Error::Format(format!("line {lineno}: face index 0 is invalid"))),
        r if r > 0 => Ok(r as usize - 1),
        r => {
            let back = (-r) as usize;
            if back > n_seen {
                Err(Error::Format(format!("line {lineno}: relative index {r} out of range")))
            } else {
                Ok(n_seen - back)
            }
        }
    }
}

pub fn load_obj_file(path: impl AsRef<Path>) -> Result<ControlNet> {
    load_obj(&std::fs::read(path)?)
}

/// Writes positions with 17 significant digits so they survive a round trip.
pub fn write_obj<W: Write>(net: &ControlNet, mut out: W) -> Result<()> {
    for p in &net.positions {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    for f in net.cnet.faces() {
        writeln!(out, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1)?;
    }
    Ok(())
}

pub fn write_obj_file(net: &ControlNet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_obj(net, file)
}
