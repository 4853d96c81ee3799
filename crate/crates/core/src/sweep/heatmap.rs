use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::grid::ImprovementCell;

/// `v` rounded to 6 significant digits, with `-0` printed as `0`.
fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{v:.5e}");
    let parsed: f64 = s.parse().expect("formatted float parses");
    if parsed == 0.0 {
        "0".into()
    } else {
        parsed.to_string()
    }
}

/// Improvement grid for one α: bin sizes as rows, layers as columns.
pub fn emit_heatmap(cells: &[ImprovementCell], alpha: f64) -> Result<String> {
    let at_alpha: Vec<&ImprovementCell> = cells.iter().filter(|c| c.alpha == alpha).collect();
    if at_alpha.is_empty() {
        return Err(Error::Input(format!("no cells for alpha {alpha}")));
    }
    let layers: BTreeSet<usize> = at_alpha.iter().map(|c| c.layer).collect();
    let bins: BTreeSet<usize> = at_alpha.iter().map(|c| c.bin_size).collect();
    let mut grid = BTreeMap::new();
    for c in &at_alpha {
        if grid
            .insert((c.bin_size, c.layer), c.improvement_percent)
            .is_some()
        {
            return Err(Error::Input(format!(
                "duplicate cell layer {} bin {} alpha {alpha}",
                c.layer, c.bin_size
            )));
        }
    }
    let missing: Vec<String> = bins
        .iter()
        .flat_map(|&b| layers.iter().map(move |&l| (b, l)))
        .filter(|k| !grid.contains_key(k))
        .map(|(b, l)| format!("(layer {l}, bin {b})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "grid for alpha {alpha} is not rectangular; missing {}",
            missing.join(", ")
        )));
    }
    let mut out = String::from("bin_size");
    for l in &layers {
        out.push_str(&format!(",layer_{l}"));
    }
    out.push('\n');
    for &b in &bins {
        out.push_str(&b.to_string());
        for &l in &layers {
            out.push(',');
            out.push_str(&fmt_sig(grid[&(b, l)]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parsed heatmap: layer indices, and `(bin_size, values per layer)` rows.
pub type Heatmap = (Vec<usize>, Vec<(usize, Vec<f64>)>);

pub fn parse_heatmap(csv: &str) -> Result<Heatmap> {
    let bad = |m: &str| Error::Format(format!("heatmap: {m}"));
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("bin_size") {
        return Err(bad("header must start with bin_size"));
    }
    let layers = cols
        .map(|c| {
            c.strip_prefix("layer_")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| bad(c))
        })
        .collect::<Result<Vec<usize>>>()?;
    let rows = lines
        .map(|line| {
            let mut f = line.split(',');
            let bin = f
                .next()
                .and_then(|b| b.parse().ok())
                .ok_or_else(|| bad(line))?;
            let vals = f
                .map(|v| v.parse().map_err(|_| bad(v)))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != layers.len() {
                return Err(bad(&format!("row {bin} has {} values", vals.len())));
            }
            Ok((bin, vals))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((layers, rows))
}

pub fn write_cells_jsonl(path: &Path, cells: &[ImprovementCell]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for c in cells {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cells_jsonl(path: &Path) -> Result<Vec<ImprovementCell>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cells = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            cells.push(serde_json::from_str(&line)?);
        }
    }
    Ok(cells)
}
