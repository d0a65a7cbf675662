//! Atomic file output and the CSV formats shared by the CLI.
//!
//! Every writer stages its bytes in a temporary file next to the target and
//! renames it into place, so readers never observe a half-written file.

use std::io::Write;
use std::path::Path;

use crate::detector::DetectionSet;
use crate::error::{Error, Result};
use crate::eval::{EvalReport, GroundTruth, RocPoint};
use crate::image::SaliencyMap;
use crate::detector::CandidateRecord;

/// Writes `bytes` to `path` via a sibling temp file and rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::file(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Shortest round-trip decimal; `inf`/`nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

pub fn detections_csv(sets: &[DetectionSet]) -> Result<Vec<u8>> {
    let rows = sets.iter().flat_map(|s| {
        s.detections.iter().map(move |d| {
            vec![
                s.frame_id.to_string(),
                fmt_f64(d.x),
                fmt_f64(d.y),
                fmt_f64(d.score),
                d.pixels.to_string(),
            ]
        })
    });
    csv_bytes(&["frame_id", "x", "y", "score", "pixels"], rows)
}

pub fn candidates_csv(records: &[CandidateRecord]) -> Result<Vec<u8>> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows = records.iter().map(|c| {
        let h = c.hessian.as_ref();
        vec![
            c.x.to_string(),
            c.y.to_string(),
            opt(c.sigma),
            opt(h.map(|h| h.fxx)),
            opt(h.map(|h| h.fyy)),
            opt(h.map(|h| h.fxy)),
            opt(h.map(|h| h.lambda1)),
            opt(h.map(|h| h.lambda2)),
            opt(h.map(|h| h.isotropy)),
        ]
    });
    csv_bytes(
        &["x", "y", "sigma", "fxx", "fyy", "fxy", "lambda1", "lambda2", "I"],
        rows,
    )
}

/// Raw map values in long form: `x, y, value`.
pub fn map_csv(map: &SaliencyMap) -> Result<Vec<u8>> {
    let w = map.width();
    let rows = map
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![(i % w).to_string(), (i / w).to_string(), fmt_f64(v)]);
    csv_bytes(&["x", "y", "value"], rows)
}

/// Parses a map written by [`map_csv`]. Dimensions are `max + 1` of the
/// coordinates; every pixel must be present exactly once.
pub fn read_map_csv(path: &Path) -> Result<SaliencyMap> {
    let mut r = csv::Reader::from_path(path)?;
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse_err = |what: &str| Error::Config {
            line: rec.position().map_or(0, |p| p.line() as usize),
            msg: format!("bad {what} in {}", path.display()),
        };
        let x: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| parse_err("x"))?;
        let y: usize = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| parse_err("y"))?;
        let v: f64 = rec.get(2).and_then(|s| s.trim().parse().ok()).ok_or_else(|| parse_err("value"))?;
        cells.push((x, y, v));
    }
    let w = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let h = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != w * h {
        return Err(Error::InvalidFrame(format!(
            "{}: {} cells for a {w}x{h} map",
            path.display(),
            cells.len()
        )));
    }
    let mut data = vec![f64::NAN; w * h];
    for (x, y, v) in cells {
        data[y * w + x] = v;
    }
    SaliencyMap::new(w, h, data)
}

pub fn ground_truth_csv(gts: &[GroundTruth]) -> Result<Vec<u8>> {
    let rows = gts.iter().flat_map(|g| {
        g.targets
            .iter()
            .map(move |&(x, y)| vec![g.frame_id.to_string(), x.to_string(), y.to_string()])
    });
    csv_bytes(&["frame_id", "x", "y"], rows)
}

/// Reads `frame_id, x, y` rows, grouped by frame id in ascending order.
pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut by_frame: std::collections::BTreeMap<u32, Vec<(usize, usize)>> = Default::default();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<u64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config {
                    line,
                    msg: format!("expected non-negative integer in column {}", i + 1),
                })
        };
        let id = field(0)? as u32;
        let (x, y) = (field(1)? as usize, field(2)? as usize);
        by_frame.entry(id).or_default().push((x, y));
    }
    Ok(by_frame
        .into_iter()
        .map(|(frame_id, targets)| GroundTruth { frame_id, targets })
        .collect())
}

pub fn roc_csv(curve: &[RocPoint]) -> Result<Vec<u8>> {
    let rows = curve
        .iter()
        .map(|p| vec![fmt_f64(p.threshold), fmt_f64(p.pd), fmt_f64(p.pf)]);
    csv_bytes(&["threshold", "pd", "pf"], rows)
}

pub fn report_csv(method: &str, reports: &[(u32, EvalReport)]) -> Result<Vec<u8>> {
    let rows = reports.iter().map(|(id, r)| {
        vec![
            method.to_string(),
            id.to_string(),
            fmt_f64(r.scr_in),
            fmt_f64(r.scr_out),
            r.scrg.map(fmt_f64).unwrap_or_else(|| "undefined".into()),
        ]
    });
    csv_bytes(&["method", "frame_id", "scr_in", "scr_out", "scrg"], rows)
}
