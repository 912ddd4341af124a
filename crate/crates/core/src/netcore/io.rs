//! Transaction CSV ingestion and the edge-list network format.
//!
//! Edge lists are plain text: `#`-prefixed header lines carrying the node
//! roster, kind, optional window and lineage, then one `i j w` line per
//! non-zero ordered entry with zero-based indices. Weights are written with
//! the shortest representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{AggregatedNetwork, AggregationWindow, BankId, NetError, NetworkKind, Span, Transaction, Transform};

const HEADER: [&str; 5] = ["date", "lender_id", "borrower_id", "volume_eur", "domestic"];

/// Read the transactions CSV at `path`; see [`read_transactions`].
pub fn ingest(path: &Path, domestic_only: bool) -> Result<Vec<Transaction>, NetError> {
    read_transactions(File::open(path)?, domestic_only)
}

/// Parse transactions, drop foreign rows when `domestic_only`, and sort by
/// date (stable, so same-day rows keep file order).
pub fn read_transactions<R: Read>(input: R, domestic_only: bool) -> Result<Vec<Transaction>, NetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(NetError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| NetError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| NetError::Parse { line, message };

        let date: NaiveDate = record[0]
            .parse()
            .map_err(|e| bad(format!("bad date `{}`: {e}", &record[0])))?;
        let lender = parse_bank(&record[1]).ok_or_else(|| bad("empty lender_id".into()))?;
        let borrower = parse_bank(&record[2]).ok_or_else(|| bad("empty borrower_id".into()))?;
        let volume: f64 = record[3]
            .parse()
            .map_err(|e| bad(format!("bad volume `{}`: {e}", &record[3])))?;
        if !volume.is_finite() {
            return Err(bad(format!("bad volume `{}`", &record[3])));
        }
        if volume <= 0.0 {
            return Err(NetError::NonPositiveVolume { line, volume });
        }
        let domestic = match &record[4] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("domestic must be 0 or 1, got `{other}`"))),
        };
        if lender == borrower {
            return Err(NetError::SelfLoan { line, bank: lender });
        }
        if domestic_only && !domestic {
            continue;
        }
        out.push(Transaction {
            date,
            lender,
            borrower,
            volume,
            domestic,
        });
    }
    out.sort_by_key(|t| t.date);
    Ok(out)
}

fn parse_bank(s: &str) -> Option<BankId> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        None
    } else {
        Some(BankId(s.to_string()))
    }
}

pub fn write_edge_list(net: &AggregatedNetwork, path: &Path) -> Result<(), NetError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_edge_list_to(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_edge_list_to<W: Write>(net: &AggregatedNetwork, out: &mut W) -> Result<(), NetError> {
    if let Some(b) = net
        .nodes()
        .iter()
        .find(|b| b.as_str().is_empty() || b.as_str().chars().any(char::is_whitespace))
    {
        return Err(NetError::Invalid(format!(
            "bank id `{b}` cannot be written to an edge list"
        )));
    }
    writeln!(out, "# kind {}", net.kind().as_str())?;
    let roster: Vec<&str> = net.nodes().iter().map(BankId::as_str).collect();
    writeln!(out, "# nodes {}", roster.join(" "))?;
    if let Some(w) = net.window() {
        writeln!(out, "# window {} {}", w.start, w.span)?;
    }
    if !net.lineage().is_empty() {
        let l: Vec<&str> = net.lineage().iter().map(|t| t.as_str()).collect();
        writeln!(out, "# lineage {}", l.join(" "))?;
    }
    let n = net.n();
    for i in 0..n {
        for j in 0..n {
            let w = net.weight(i, j);
            if w != 0.0 {
                writeln!(out, "{i} {j} {w}")?;
            }
        }
    }
    Ok(())
}

pub fn read_edge_list(path: &Path) -> Result<AggregatedNetwork, NetError> {
    parse_edge_list(BufReader::new(File::open(path)?))
}

pub(crate) fn parse_edge_list<R: BufRead>(input: R) -> Result<AggregatedNetwork, NetError> {
    let mut kind = NetworkKind::DirectedWeighted;
    let mut nodes: Option<Vec<BankId>> = None;
    let mut window = None;
    let mut lineage = Vec::new();
    let mut entries = Vec::new();

    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = k as u64 + 1;
        let bad = |message: String| NetError::Parse {
            line: lineno,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("kind") => {
                    let s = it.next().unwrap_or("");
                    kind = NetworkKind::parse(s).ok_or_else(|| bad(format!("unknown kind `{s}`")))?;
                }
                Some("nodes") => nodes = Some(it.map(|s| BankId(s.to_string())).collect()),
                Some("window") => {
                    let start: NaiveDate = it
                        .next()
                        .unwrap_or("")
                        .parse()
                        .map_err(|e| bad(format!("bad window start: {e}")))?;
                    let span: Span = it.next().unwrap_or("").parse().map_err(bad)?;
                    window = Some(AggregationWindow { start, span });
                }
                Some("lineage") => {
                    for s in it {
                        lineage.push(
                            Transform::parse(s).ok_or_else(|| bad(format!("unknown transform `{s}`")))?,
                        );
                    }
                }
                _ => {}
            }
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected `i j w`, got `{trimmed}`")));
        }
        let i: usize = parts[0].parse().map_err(|e| bad(format!("bad index: {e}")))?;
        let j: usize = parts[1].parse().map_err(|e| bad(format!("bad index: {e}")))?;
        let w: f64 = parts[2].parse().map_err(|e| bad(format!("bad weight: {e}")))?;
        entries.push((lineno, i, j, w));
    }

    let nodes = nodes.ok_or_else(|| NetError::Parse {
        line: 0,
        message: "missing `# nodes` roster line".into(),
    })?;
    let n = nodes.len();
    let mut weights = vec![0.0; n * n];
    for (line, i, j, w) in entries {
        if i >= n || j >= n {
            return Err(NetError::Parse {
                line,
                message: format!("index out of range for {n} nodes"),
            });
        }
        weights[i * n + j] = w;
    }
    Ok(AggregatedNetwork::from_dense(nodes, weights, kind)?
        .with_window(window)
        .with_lineage(lineage))
}
