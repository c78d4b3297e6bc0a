use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::{HarnessError, SweepRecord};
use crate::rdm::SpinBlockedRdms;

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// `(shots, median rdm_frob_err)` of one method, sorted by shots.
pub fn median_curve(records: &[SweepRecord], method: &str) -> Vec<(f64, f64)> {
    let mut by_shots: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method) {
        by_shots.entry(r.shots).or_default().push(r.rdm_frob_err);
    }
    by_shots.into_iter().map(|(s, e)| (s as f64, median(&e))).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorEntry {
    pub error: f64,
    pub shots_new: f64,
    pub shots_ref: f64,
    pub factor: f64,
    /// `shots_ref` was extrapolated beyond the reference curve.
    pub censored: bool,
}

/// Sorts by shots, takes logs, applies a three-point running median and then
/// a running minimum so the error is non-increasing.
fn prepare(curve: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut c: Vec<(f64, f64)> = curve.iter().copied().filter(|&(s, e)| s > 0.0 && e > 0.0).collect();
    if c.len() < 2 {
        return Err(HarnessError::ShortCurve(c.len()));
    }
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw: Vec<f64> = c.iter().map(|p| p.1).collect();
    let mut out = Vec::with_capacity(c.len());
    let mut best = f64::INFINITY;
    for k in 0..c.len() {
        let e = if k == 0 || k + 1 == c.len() { raw[k] } else { median(&raw[k - 1..=k + 1]) };
        best = best.min(e);
        out.push((c[k].0.ln(), best.ln()));
    }
    Ok(out)
}

/// `ln shots` on the reference curve at `ln error`, and whether it was extrapolated.
fn shots_at(curve: &[(f64, f64)], le: f64) -> Option<(f64, bool)> {
    let segs: Vec<(usize, usize)> = (0..curve.len() - 1).filter(|&k| curve[k].1 > curve[k + 1].1).map(|k| (k, k + 1)).collect();
    let &(f0, f1) = segs.first()?;
    let &(l0, l1) = segs.last()?;
    let along = |a: usize, b: usize| {
        let t = (curve[a].1 - le) / (curve[a].1 - curve[b].1);
        curve[a].0 + t * (curve[b].0 - curve[a].0)
    };
    if le > curve[f0].1 {
        return Some((along(f0, f1), true));
    }
    if le < curve[l1].1 {
        return Some((along(l0, l1), true));
    }
    for &(a, b) in &segs {
        if le <= curve[a].1 && le >= curve[b].1 {
            return Some((along(a, b), false));
        }
    }
    None
}

/// For each point of `curve_new`, the ratio of the shots the reference needs
/// to reach the same error to the shots spent by the new curve.
///
/// Both curves are `(shots, error)`. The reference is interpolated linearly
/// in log-log space; levels outside its error range are extrapolated from the
/// nearest segment and flagged as censored.
pub fn improvement_factor(curve_ref: &[(f64, f64)], curve_new: &[(f64, f64)]) -> Result<Vec<FactorEntry>, HarnessError> {
    let r = prepare(curve_ref)?;
    let n = prepare(curve_new)?;
    let range = |c: &[(f64, f64)]| (c.last().unwrap().1, c[0].1);
    let (rlo, rhi) = range(&r);
    let (nlo, nhi) = range(&n);
    if nhi < rlo || nlo > rhi {
        return Err(HarnessError::NonOverlapping);
    }
    let mut out = Vec::with_capacity(n.len());
    for &(ls, le) in &n {
        let (lref, censored) = shots_at(&r, le).ok_or(HarnessError::NonOverlapping)?;
        out.push(FactorEntry {
            error: le.exp(),
            shots_new: ls.exp(),
            shots_ref: lref.exp(),
            factor: (lref - ls).exp(),
            censored,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    /// `aa`, `bb` or `ab`.
    pub block: &'static str,
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
    /// Mean `|²D_opt − ²D_shadow|` at each precision.
    pub displacement: Vec<f64>,
}

/// Mean displacement between optimized and shadow 2-RDM elements, one row per
/// nonzero Hamiltonian coefficient, sorted by descending `|coefficient|`.
///
/// `coefficients` are `(block 0/1/2, i, j, c)` on the upper triangle;
/// `runs[k]` holds the `(shadow, optimized)` pairs at precision `k`.
pub fn bias_table(
    coefficients: &[(usize, usize, usize, f64)],
    runs: &[Vec<(SpinBlockedRdms, SpinBlockedRdms)>],
) -> Result<Vec<BiasRow>, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::MissingRuns("no precision levels".into()));
    }
    if let Some(k) = runs.iter().position(|r| r.is_empty()) {
        return Err(HarnessError::MissingRuns(format!("precision level {k} has no runs")));
    }
    const NAMES: [&str; 3] = ["aa", "bb", "ab"];
    let pick = |r: &SpinBlockedRdms, b: usize, i: usize, j: usize| match b {
        0 => r.d2_aa[(i, j)],
        1 => r.d2_bb[(i, j)],
        _ => r.d2_ab[(i, j)],
    };
    let mut rows: Vec<BiasRow> = coefficients
        .iter()
        .filter(|c| c.3 != 0.0)
        .map(|&(b, i, j, c)| BiasRow {
            block: NAMES[b.min(2)],
            i,
            j,
            coefficient: c,
            displacement: runs
                .iter()
                .map(|level| {
                    level.iter().map(|(s, o)| (pick(o, b, i, j) - pick(s, b, i, j)).abs()).sum::<f64>() / level.len() as f64
                })
                .collect(),
        })
        .collect();
    rows.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()));
    Ok(rows)
}

/// Writes a bias table with one displacement column per label.
pub fn write_bias_csv<W: Write>(w: W, rows: &[BiasRow], labels: &[String]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["block".to_string(), "i".into(), "j".into(), "coefficient".into()];
    header.extend(labels.iter().map(|l| format!("displacement_{l}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.block.to_string(), r.i.to_string(), r.j.to_string(), r.coefficient.to_string()];
        rec.extend(r.displacement.iter().map(|d| d.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
