use std::io::{Read, Write};

use super::fmt_num;
use crate::budget::Transfer;
use crate::error::{usage, Error, Result};
use crate::geometry::{Manifold, ManifoldSample, PointCloud, Raster, SampleSet};

/// Largest accepted deviation between a stored sample point and the point
/// recomputed from its (rounded) parameters.
pub const RECOMPUTE_TOL: f64 = 1e-6;

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn num(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {field:?}: {e}")))
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(parse_err)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| parse_err(e.error()))?.flush()?;
    Ok(())
}

/// One row per sample: `manifold_id, lambda_0.., x_0..`. All sets must share
/// parameter and ambient dimensions.
pub fn write_sample_sets<W: Write>(out: W, sets: &[SampleSet]) -> Result<()> {
    let Some(first) = sets.first().and_then(|s| s.samples.first()) else {
        return usage("no samples to write");
    };
    let (d, n) = (first.param.len(), first.point.len());
    if sets
        .iter()
        .flat_map(|s| &s.samples)
        .any(|s| s.param.len() != d || s.point.len() != n)
    {
        return usage("sample sets differ in dimensions; write them to separate files");
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["manifold_id".to_string()];
    header.extend((0..d).map(|j| format!("lambda_{j}")));
    header.extend((0..n).map(|k| format!("x_{k}")));
    write_row(&mut w, &header)?;
    for set in sets {
        for s in &set.samples {
            let mut row = vec![set.manifold_id.to_string()];
            row.extend(s.param.iter().map(|&v| fmt_num(v)));
            row.extend(s.point.iter().map(|&v| fmt_num(v)));
            write_row(&mut w, &row)?;
        }
    }
    finish(w)
}

/// Reads sample sets, grouped by manifold id in order of first appearance.
/// Points are recomputed from the parameters and must agree with the stored
/// coordinates within [`RECOMPUTE_TOL`].
pub fn read_sample_sets<R: Read>(input: R, manifolds: &[Manifold]) -> Result<Vec<SampleSet>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(parse_err)?.clone();
    let d = header.iter().filter(|h| h.starts_with("lambda_")).count();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.get(0) != Some("manifold_id") || header.len() != 1 + d + n {
        return Err(Error::Parse("unexpected sample-set header".into()));
    }
    let mut sets: Vec<SampleSet> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        let id: usize = rec[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: manifold_id: {e}", line + 1)))?;
        let Some(m) = manifolds.iter().find(|m| m.id() == id) else {
            return Err(Error::Parse(format!(
                "row {}: unknown manifold {id}",
                line + 1
            )));
        };
        if m.param_dim() != d || m.ambient_dim() != n {
            return Err(Error::Parse(format!(
                "row {}: dimensions do not match manifold {id}",
                line + 1
            )));
        }
        let vals = rec.iter().skip(1).map(num).collect::<Result<Vec<_>>>()?;
        let sample = ManifoldSample::new(m, &vals[..d])?;
        let dev = sample
            .point
            .iter()
            .zip(&vals[d..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > RECOMPUTE_TOL {
            return Err(Error::Parse(format!(
                "row {}: stored point is {dev:e} away from the recomputed point",
                line + 1
            )));
        }
        match sets.iter_mut().find(|s| s.manifold_id == id) {
            Some(s) => s.samples.push(sample),
            None => sets.push(SampleSet::new(id, vec![sample])?),
        }
    }
    Ok(sets)
}

/// `label, x_0..`; the label column is empty for unlabeled clouds.
pub fn write_cloud<W: Write>(out: W, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..cloud.dim()).map(|k| format!("x_{k}")));
    write_row(&mut w, &header)?;
    for (p, x) in cloud.iter().enumerate() {
        let mut row = vec![cloud.labels().map(|l| l[p].to_string()).unwrap_or_default()];
        row.extend(x.iter().map(|&v| fmt_num(v)));
        write_row(&mut w, &row)?;
    }
    finish(w)
}

pub fn read_cloud<R: Read>(input: R) -> Result<PointCloud> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(parse_err)?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(Error::Parse("unexpected point-cloud header".into()));
    }
    let dim = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut unlabeled = 0;
    for rec in r.records() {
        let rec = rec.map_err(parse_err)?;
        let l = rec[0].trim();
        if l.is_empty() {
            unlabeled += 1;
        } else {
            labels.push(
                l.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("label {l:?}: {e}")))?,
            );
        }
        for f in rec.iter().skip(1) {
            data.push(num(f)?);
        }
    }
    let cloud = PointCloud::new(dim, data)?;
    match (unlabeled, labels.len()) {
        (_, 0) => Ok(cloud),
        (0, _) => cloud.with_labels(labels),
        _ => Err(Error::Parse(
            "some points are labeled and some are not".into(),
        )),
    }
}

/// Headerless CSV matrix of nonnegative reals, one image row per line.
pub fn read_matrix<R: Read>(input: R) -> Result<Raster> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for rec in r.records() {
        let rec = rec.map_err(parse_err)?;
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse("matrix rows differ in length".into()));
        }
        for f in rec.iter() {
            data.push(num(f)?);
        }
        height += 1;
    }
    Raster::new(width.unwrap_or(0), height, data)
}

pub fn write_transfers<W: Write>(out: W, log: &[Transfer]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_row(
        &mut w,
        &[
            "round",
            "donor_manifold",
            "donor_sample",
            "recipient_manifold",
            "error_before",
            "error_after",
            "committed",
        ]
        .map(String::from),
    )?;
    for t in log {
        write_row(
            &mut w,
            &[
                t.round.to_string(),
                t.donor.0.to_string(),
                t.donor.1.to_string(),
                t.recipient.to_string(),
                fmt_num(t.error_before),
                fmt_num(t.error_after),
                t.committed.to_string(),
            ],
        )?;
    }
    finish(w)
}
