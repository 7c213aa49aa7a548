//! Text format for solved tables.
//!
//! ```text
//! # posg table
//! # model: CANON2
//! # nx: 2
//! # m: 4
//! # alpha: 9.0000000000000002e-1
//! # residual: 8.1234567890123450e-7
//! # iterations: 152
//! # actions: 2 2
//! # config: command=solve-discounted m=4 ...
//! c0,c1,value,row0,row1,col0,col1
//! 0,4,0.0000000000000000e0,5.0000000000000000e-1,...
//! ```
//!
//! One line per grid point in grid order. Reals are written with 17
//! significant digits, which reads back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use posg_core::shapley::DiscountedSolution;
use posg_core::{MixedAction, SimplexGrid, StrategyTable, ValueTable};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// A table read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct SolvedTable {
    pub model: String,
    pub values: ValueTable,
    pub strategies: StrategyTable,
    pub residual: f64,
    pub iterations: usize,
}

pub fn real(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn render(
    model: &str,
    solution: &DiscountedSolution,
    strategies: &StrategyTable,
    config: &str,
) -> String {
    let table = &solution.table;
    let grid = &table.grid;
    let nu = strategies.row.first().map_or(0, |a| a.len());
    let nv = strategies.col.first().map_or(0, |a| a.len());
    let mut out = String::new();
    out.push_str("# posg table\n");
    let _ = writeln!(out, "# model: {}", model);
    let _ = writeln!(out, "# nx: {}", grid.nx());
    let _ = writeln!(out, "# m: {}", grid.resolution());
    let _ = writeln!(out, "# alpha: {}", real(table.alpha));
    let _ = writeln!(out, "# residual: {}", real(solution.residual));
    let _ = writeln!(out, "# iterations: {}", solution.iterations);
    let _ = writeln!(out, "# actions: {} {}", nu, nv);
    let _ = writeln!(out, "# config: {}", config);
    let mut cols: Vec<String> = (0..grid.nx()).map(|x| format!("c{}", x)).collect();
    cols.push("value".into());
    cols.extend((0..nu).map(|u| format!("row{}", u)));
    cols.extend((0..nv).map(|v| format!("col{}", v)));
    out.push_str(&cols.join(","));
    out.push('\n');
    for i in 0..grid.len() {
        let mut fields: Vec<String> = grid.coords(i).iter().map(|c| c.to_string()).collect();
        fields.push(real(table.values[i]));
        fields.extend(strategies.row[i].probs().iter().map(|&p| real(p)));
        fields.extend(strategies.col[i].probs().iter().map(|&p| real(p)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write(
    path: &Path,
    model: &str,
    solution: &DiscountedSolution,
    strategies: &StrategyTable,
    config: &str,
) -> std::io::Result<()> {
    fs::write(path, render(model, solution, strategies, config))
}

fn format_err(line: usize, message: impl Into<String>) -> TableError {
    TableError::Format { line, message: message.into() }
}

fn header<'a>(lines: &[(usize, &'a str)], key: &str) -> Result<(usize, &'a str), TableError> {
    let prefix = format!("# {}:", key);
    lines
        .iter()
        .find_map(|&(n, l)| l.strip_prefix(prefix.as_str()).map(|rest| (n, rest.trim())))
        .ok_or_else(|| format_err(1, format!("missing header `{}`", key)))
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T, TableError> {
    s.trim().parse().map_err(|_| format_err(line, format!("bad {} `{}`", what, s)))
}

pub fn parse(text: &str) -> Result<SolvedTable, TableError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let comments: Vec<(usize, &str)> = lines.iter().copied().filter(|(_, l)| l.starts_with('#')).collect();
    let (_, model) = header(&comments, "model")?;
    let (ln, nx) = header(&comments, "nx")?;
    let nx: usize = parse_num(ln, "nx", nx)?;
    let (ln, m) = header(&comments, "m")?;
    let m: u32 = parse_num(ln, "m", m)?;
    let (ln, alpha) = header(&comments, "alpha")?;
    let alpha: f64 = parse_num(ln, "alpha", alpha)?;
    let (ln, residual) = header(&comments, "residual")?;
    let residual: f64 = parse_num(ln, "residual", residual)?;
    let (ln, iterations) = header(&comments, "iterations")?;
    let iterations: usize = parse_num(ln, "iterations", iterations)?;
    let (ln, actions) = header(&comments, "actions")?;
    let mut it = actions.split_whitespace();
    let (nu, nv): (usize, usize) = match (it.next(), it.next()) {
        (Some(a), Some(b)) => (parse_num(ln, "actions", a)?, parse_num(ln, "actions", b)?),
        _ => return Err(format_err(ln, "expected two action counts")),
    };

    let grid = Arc::new(SimplexGrid::build(nx, m).map_err(|e| format_err(ln, e.to_string()))?);
    let mut body = lines.iter().copied().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    body.next().ok_or_else(|| format_err(lines.len(), "missing column header"))?;
    let mut values = Vec::with_capacity(grid.len());
    let (mut row, mut col) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for (i, (ln, l)) in body.enumerate() {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != nx + 1 + nu + nv {
            return Err(format_err(ln, format!("expected {} fields, found {}", nx + 1 + nu + nv, fields.len())));
        }
        let coords = fields[..nx].iter().map(|f| parse_num(ln, "coordinate", f)).collect::<Result<Vec<u32>, _>>()?;
        if i >= grid.len() || grid.coords(i) != coords.as_slice() {
            return Err(format_err(ln, "grid point out of order"));
        }
        values.push(parse_num(ln, "value", fields[nx])?);
        let probs = |range: std::ops::Range<usize>| {
            let p = fields[range].iter().map(|f| parse_num(ln, "probability", f)).collect::<Result<Vec<f64>, _>>()?;
            MixedAction::new(p).ok_or_else(|| format_err(ln, "strategy is not a distribution"))
        };
        row.push(probs(nx + 1..nx + 1 + nu)?);
        col.push(probs(nx + 1 + nu..nx + 1 + nu + nv)?);
    }
    if values.len() != grid.len() {
        return Err(format_err(lines.len(), format!("expected {} grid points, found {}", grid.len(), values.len())));
    }
    Ok(SolvedTable {
        model: model.to_string(),
        values: ValueTable { grid: grid.clone(), values, alpha },
        strategies: StrategyTable { grid, row, col },
        residual,
        iterations,
    })
}

pub fn read(path: &Path) -> Result<SolvedTable, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io { path: path.display().to_string(), source })?;
    parse(&text)
}
