//! CSV tables for reports. JSON goes through [`RunReport::to_json`].

use crate::report::{Payload, RunReport};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// The plot-ready table for a report's payload, or `None` for a failed run.
///
/// Spectrum: `index,energy,node_count,self_consistency_residual`.
/// Trajectory: `t,x,re_psi,im_psi[,re_psi2,im_psi2]`, one row per node per stored frame.
/// Dispersion: `table,p,name,value,residual,relative`.
pub fn payload_csv(report: &RunReport) -> Option<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match report.payload.as_ref()? {
        Payload::Spectrum { levels, .. } => {
            w.write_record(["index", "energy", "node_count", "self_consistency_residual"]).ok()?;
            for l in levels {
                w.write_record([
                    l.index.to_string(),
                    num(l.energy),
                    l.node_count.to_string(),
                    opt(l.self_consistency_residual),
                ])
                .ok()?;
            }
        }
        Payload::Trajectory { x, frames, .. } => {
            let spinor = frames.first().is_some_and(|f| f.field.re2.is_some());
            let mut header = vec!["t", "x", "re_psi", "im_psi"];
            if spinor {
                header.extend(["re_psi2", "im_psi2"]);
            }
            w.write_record(&header).ok()?;
            for f in frames {
                for (i, xi) in x.iter().enumerate() {
                    let mut row = vec![num(f.t), num(*xi), num(f.field.re[i]), num(f.field.im[i])];
                    if let (Some(re2), Some(im2)) = (&f.field.re2, &f.field.im2) {
                        row.push(num(re2[i]));
                        row.push(num(im2[i]));
                    }
                    w.write_record(&row).ok()?;
                }
            }
        }
        Payload::Dispersion { rows } => {
            w.write_record(["table", "p", "name", "value", "residual", "relative"]).ok()?;
            for r in rows {
                w.write_record([
                    r.table.clone(),
                    num(r.p),
                    r.name.clone(),
                    num(r.value),
                    num(r.residual),
                    opt(r.relative),
                ])
                .ok()?;
            }
        }
    }
    Some(finish(w))
}

/// Serializes rows of any serde struct as CSV with a header.
pub fn rows_csv<T: serde::Serialize>(rows: &[T]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(finish(w))
}
