//! Text formats: edge lists, boundary messages, signal matrices and traces.
//!
//! Edge list:
//!
//! ```text
//! d=<nodes>
//! <i>,<j>,<weight>      one line per nonzero edge, 1-based, i < j
//! ```
//!
//! Weights are printed with 12 significant digits. A client update prefixes
//! the edge list with `client=<id> round=<t>`, a broadcast with
//! `gamma=<value> round=<t>`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::client::ClientUpdateMsg;
use crate::error::{Error, Result};
use crate::federation::RoundRecord;
use crate::graph::{edge_count, edge_index, GraphVector};
use crate::server::Broadcast;
use crate::Matrix;

/// Formats like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_edge_list(g: &GraphVector) -> String {
    let mut out = format!("d={}\n", g.d());
    for (i, j, w) in g.edges() {
        writeln!(out, "{},{},{}", i + 1, j + 1, format_sig(w, 12)).expect("write to string");
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses an edge list whose `d=` header is on line `first_line` (1-based, for messages).
fn parse_edge_lines<'a>(mut lines: impl Iterator<Item = (usize, &'a str)>) -> Result<GraphVector> {
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "missing d= header"))?;
    let d: usize = header
        .trim()
        .strip_prefix("d=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(ln, format!("expected d=<n>, got {header:?}")))?;
    if d < 2 {
        return Err(parse_err(ln, "graph needs at least 2 nodes"));
    }
    let mut w = vec![0.0; edge_count(d)];
    let mut seen = vec![false; w.len()];
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [i, j, wt] = fields[..] else {
            return Err(parse_err(ln, format!("expected i,j,weight, got {line:?}")));
        };
        let i: usize = i.parse().map_err(|_| parse_err(ln, format!("bad node index {i:?}")))?;
        let j: usize = j.parse().map_err(|_| parse_err(ln, format!("bad node index {j:?}")))?;
        let wt: f64 = wt.parse().map_err(|_| parse_err(ln, format!("bad weight {wt:?}")))?;
        if i == 0 || j == 0 || i > d || j > d || i == j {
            return Err(parse_err(ln, format!("invalid edge ({i},{j}) for d={d}")));
        }
        let k = edge_index(d, i.min(j) - 1, i.max(j) - 1);
        if std::mem::replace(&mut seen[k], true) {
            return Err(parse_err(ln, format!("duplicate edge ({i},{j})")));
        }
        w[k] = wt;
    }
    GraphVector::new(d, w)
}

pub fn parse_edge_list(text: &str) -> Result<GraphVector> {
    parse_edge_lines(text.lines().enumerate().map(|(k, l)| (k + 1, l)))
}

/// Parses `key=value` pairs from a header line, in order.
fn header_fields<'a>(line: &'a str, keys: &[&str], ln: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != keys.len() {
        return Err(parse_err(ln, format!("expected header with {keys:?}, got {line:?}")));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(p, k)| {
            p.strip_prefix(k)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| parse_err(ln, format!("expected {k}=..., got {p:?}")))
        })
        .collect()
}

impl ClientUpdateMsg {
    pub fn to_text(&self) -> String {
        format!("client={} round={}\n{}", self.id, self.round, write_edge_list(&self.w))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty message"))?;
        let f = header_fields(header, &["client", "round"], ln)?;
        let id = f[0].parse().map_err(|_| parse_err(ln, "bad client id"))?;
        let round = f[1].parse().map_err(|_| parse_err(ln, "bad round"))?;
        Ok(Self { id, round, w: parse_edge_lines(lines)? })
    }
}

impl Broadcast {
    pub fn to_text(&self) -> String {
        format!("gamma={} round={}\n{}", format_sig(self.gamma, 12), self.round, write_edge_list(&self.w_con))
    }

    /// The wire format does not name the recipient; `id` is supplied by the transport.
    pub fn from_text(id: usize, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty message"))?;
        let f = header_fields(header, &["gamma", "round"], ln)?;
        let gamma = f[0].parse().map_err(|_| parse_err(ln, "bad gamma"))?;
        let round = f[1].parse().map_err(|_| parse_err(ln, "bad round"))?;
        Ok(Self { id, round, gamma, w_con: parse_edge_lines(lines)? })
    }
}

/// Writes a `d x N` matrix as CSV, one node per row, shortest round-trip decimals.
pub fn write_matrix_csv<W: Write>(x: &Matrix, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in x.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| parse_err(k + 1, format!("bad number {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(k + 1, format!("expected {} columns, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let n = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_row_iterator(rows.len(), n, rows.into_iter().flatten()))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

/// Trace CSV: `round,sum_dw_local_sq,dw_con_sq,mu,gamma_1..gamma_I,objective`.
pub fn write_trace_csv<W: Write>(trace: &[RoundRecord], clients: usize, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["round", "sum_dw_local_sq", "dw_con_sq", "mu"].map(String::from).to_vec();
    header.extend((1..=clients).map(|i| format!("gamma_{i}")));
    header.push("objective".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for r in trace {
        let mut rec = vec![r.round.to_string(), r.sum_dw_local_sq.to_string(), r.dw_con_sq.to_string(), r.mu.to_string()];
        rec.extend(r.gamma.iter().map(f64::to_string));
        rec.push(r.objective.to_string());
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
