//! SDPA sparse format.
//!
//! ```text
//! "comment lines start with a double quote or an asterisk
//! m
//! nblocks
//! size_1 size_2 ...        (negative size = diagonal block)
//! b_1 ... b_m
//! matno blkno i j value    (1-based, i ≤ j; matno 0 is F0)
//! ```
//!
//! SDPA solves `max ⟨F0, Y⟩ s.t. ⟨F_k, Y⟩ = c_k, Y ⪰ 0`, so a problem here
//! maps to `F0 = −C`, `F_k = A_k` and `c = b`. Rank-one terms are expanded
//! into matrix elements. Block names travel in `* block <k> <name>` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{BlockKind, Entry, Row, SdpError, SdpProblem};

fn dense_entries(problem: &SdpProblem, row: &Row, sign: f64) -> BTreeMap<(usize, usize, usize), f64> {
    let mut out = BTreeMap::new();
    for e in &row.entries {
        *out.entry((e.block, e.i, e.j)).or_insert(0.0) += sign * e.value;
    }
    for lr in &row.low_rank {
        let n = problem.blocks[lr.block].dim;
        for i in 0..n {
            for j in i..n {
                let v = sign * lr.weight * lr.v[i] * lr.v[j];
                if v != 0.0 {
                    *out.entry((lr.block, i, j)).or_insert(0.0) += v;
                }
            }
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// Writes `problem` in SDPA sparse format with round-trip float formatting.
pub fn write_sdpa(problem: &SdpProblem) -> Result<String, SdpError> {
    problem.validate()?;
    let mut s = String::new();
    for (k, b) in problem.blocks.iter().enumerate() {
        writeln!(s, "* block {} {}", k + 1, b.name).unwrap();
    }
    writeln!(s, "{}", problem.rows.len()).unwrap();
    writeln!(s, "{}", problem.blocks.len()).unwrap();
    let sizes: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.dim.to_string(),
            BlockKind::Diag => format!("-{}", b.dim),
        })
        .collect();
    writeln!(s, "{}", sizes.join(" ")).unwrap();
    let rhs: Vec<String> = problem.b.iter().map(|v| format!("{v:e}")).collect();
    writeln!(s, "{}", rhs.join(" ")).unwrap();
    let mats = std::iter::once((0, dense_entries(problem, &problem.c, -1.0)))
        .chain(problem.rows.iter().enumerate().map(|(k, r)| (k + 1, dense_entries(problem, r, 1.0))));
    for (matno, entries) in mats {
        for ((blk, i, j), v) in entries {
            writeln!(s, "{} {} {} {} {:e}", matno, blk + 1, i + 1, j + 1, v).unwrap();
        }
    }
    Ok(s)
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')')).filter(|t| !t.is_empty()).collect()
}

/// Reads an SDPA sparse file. Rank-one structure is not recoverable, so
/// every coefficient comes back as a matrix element.
pub fn read_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let err = |line: usize, msg: &str| SdpError::Sdpa { line, msg: msg.to_string() };
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty()
    });
    let mut next_data = |names: &mut BTreeMap<usize, String>| -> Option<(usize, &str)> {
        for (n, l) in lines.by_ref() {
            let t = l.trim_start();
            if let Some(rest) = t.strip_prefix('*').or_else(|| t.strip_prefix('"')) {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() >= 3 && parts[0] == "block" {
                    if let Ok(k) = parts[1].parse::<usize>() {
                        names.insert(k, parts[2..].join(" "));
                    }
                }
                continue;
            }
            return Some((n, l));
        }
        None
    };
    let parse_usize = |n: usize, l: &str| -> Result<usize, SdpError> {
        tokens(l).first().and_then(|t| t.parse().ok()).ok_or_else(|| err(n, "expected a count"))
    };

    let (n, l) = next_data(&mut names).ok_or_else(|| err(0, "missing m"))?;
    let m = parse_usize(n, l)?;
    let (n, l) = next_data(&mut names).ok_or_else(|| err(n, "missing nblocks"))?;
    let nblocks = parse_usize(n, l)?;
    let (n, l) = next_data(&mut names).ok_or_else(|| err(n, "missing block sizes"))?;
    // the sign is read from the text so that an empty diagonal block ("-0") survives
    let sizes: Vec<(bool, usize)> = tokens(l)
        .iter()
        .take(nblocks)
        .map(|t| {
            let diag = t.starts_with('-');
            t.trim_start_matches(['-', '+']).parse::<usize>().map(|d| (diag, d)).map_err(|_| err(n, "bad block size"))
        })
        .collect::<Result<_, _>>()?;
    if sizes.len() != nblocks {
        return Err(err(n, "block size list does not match nblocks"));
    }
    let mut b = Vec::with_capacity(m);
    let mut last = n;
    while b.len() < m {
        let (n, l) = next_data(&mut names).ok_or_else(|| err(last, "right-hand side too short"))?;
        last = n;
        for t in tokens(l) {
            b.push(t.parse::<f64>().map_err(|_| err(n, "bad right-hand side value"))?);
        }
    }
    if b.len() != m {
        return Err(err(last, "right-hand side has the wrong length"));
    }

    let mut problem = SdpProblem::new();
    for (k, &(diag, dim)) in sizes.iter().enumerate() {
        let name = names.get(&(k + 1)).cloned().unwrap_or_else(|| format!("block{}", k + 1));
        let kind = if diag { BlockKind::Diag } else { BlockKind::Psd };
        problem.add_block(name, kind, dim);
    }
    let mut mats: Vec<BTreeMap<(usize, usize, usize), f64>> = vec![BTreeMap::new(); m + 1];
    while let Some((n, l)) = next_data(&mut names) {
        let t = tokens(l);
        if t.len() < 5 {
            return Err(err(n, "expected `matno blkno i j value`"));
        }
        let idx: Vec<usize> =
            t[..4].iter().map(|x| x.parse::<usize>().map_err(|_| err(n, "bad index"))).collect::<Result<_, _>>()?;
        let v: f64 = t[4].parse().map_err(|_| err(n, "bad value"))?;
        let (matno, blk) = (idx[0], idx[1]);
        if matno > m || blk == 0 || blk > nblocks {
            return Err(err(n, "matrix or block number out of range"));
        }
        let (i, j) = (idx[2].min(idx[3]), idx[2].max(idx[3]));
        let spec = &problem.blocks[blk - 1];
        if i == 0 || j > spec.dim {
            return Err(err(n, "element index out of range"));
        }
        if spec.kind == BlockKind::Diag && i != j {
            return Err(err(n, "off-diagonal element in a diagonal block"));
        }
        *mats[matno].entry((blk - 1, i - 1, j - 1)).or_insert(0.0) += v;
    }
    let to_row = |map: &BTreeMap<(usize, usize, usize), f64>, sign: f64| Row {
        entries: map
            .iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|(&(block, i, j), &v)| Entry { block, i, j, value: sign * v })
            .collect(),
        low_rank: vec![],
    };
    problem.c = to_row(&mats[0], -1.0);
    for (k, map) in mats.iter().enumerate().skip(1) {
        problem.add_row(to_row(map, 1.0), b[k - 1]);
    }
    Ok(problem)
}
