//! Textual chip descriptions: a small line-oriented `key = value` format.
//!
//! ```text
//! # comment
//! rows = 10
//! cols = 10
//! obstacles = (4,6) (4,7)
//! open_edges = h(3,10) h(3,11)
//! closed_interior_edges =
//! source_ports = v(0,0)
//! sink_ports = v(9,10)
//! ```
//!
//! `rows` and `cols` are required. Unlisted boundary edges are closed;
//! unlisted interior edges between two fluid cells are valves; every edge
//! touching an obstacle cell is closed. `serialize_chip` emits the canonical
//! form (all keys present, values sorted), which `parse_chip` reads back to
//! an equal chip.

use super::{ChipBuilder, ChipError, ChipSpec, EdgeClass, EdgeId};

/// Parses a chip description and validates the result.
pub fn load_chip(text: &str) -> Result<ChipSpec, ChipError> {
    parse_chip(text)
}

/// Parses a chip description and validates the result.
pub fn parse_chip(text: &str) -> Result<ChipSpec, ChipError> {
    let mut rows: Option<(usize, usize)> = None; // (value, line)
    let mut cols: Option<(usize, usize)> = None;
    let mut builder_parts: Vec<(usize, String, String)> = Vec::new();
    let mut seen_keys: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ChipError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if seen_keys.iter().any(|k| k == key) {
            return Err(ChipError::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        seen_keys.push(key.to_string());
        match key {
            "rows" | "cols" => {
                let n: usize = value.parse().map_err(|_| ChipError::Parse {
                    line: line_no,
                    message: format!("`{key}` must be a non-negative integer, got `{value}`"),
                })?;
                if key == "rows" {
                    rows = Some((n, line_no));
                } else {
                    cols = Some((n, line_no));
                }
            }
            "obstacles" | "open_edges" | "closed_interior_edges" | "source_ports"
            | "sink_ports" => {
                builder_parts.push((line_no, key.to_string(), value.to_string()));
            }
            other => {
                return Err(ChipError::Parse {
                    line: line_no,
                    message: format!("unknown key `{other}`"),
                });
            }
        }
    }

    let (rows, _) = rows.ok_or(ChipError::Parse {
        line: text.lines().count() + 1,
        message: "missing required key `rows`".into(),
    })?;
    let (cols, _) = cols.ok_or(ChipError::Parse {
        line: text.lines().count() + 1,
        message: "missing required key `cols`".into(),
    })?;

    let mut builder = ChipBuilder::new(rows, cols);
    for (line_no, key, value) in builder_parts {
        match key.as_str() {
            "obstacles" => {
                for token in value.split_whitespace() {
                    let (r, c) = parse_pair(token, line_no)?;
                    builder = builder.obstacle(r, c);
                }
            }
            "open_edges" => {
                for token in value.split_whitespace() {
                    builder = builder.open_edge(parse_edge(token, line_no)?);
                }
            }
            "closed_interior_edges" => {
                for token in value.split_whitespace() {
                    builder = builder.closed_edge(parse_edge(token, line_no)?);
                }
            }
            "source_ports" => {
                for token in value.split_whitespace() {
                    builder = builder.source(parse_edge(token, line_no)?);
                }
            }
            "sink_ports" => {
                for token in value.split_whitespace() {
                    builder = builder.sink(parse_edge(token, line_no)?);
                }
            }
            _ => unreachable!("keys filtered above"),
        }
    }
    builder.finish()
}

fn parse_pair(token: &str, line: usize) -> Result<(usize, usize), ChipError> {
    let inner = token
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| ChipError::Parse {
            line,
            message: format!("expected `(row,col)`, got `{token}`"),
        })?;
    let (r, c) = inner.split_once(',').ok_or_else(|| ChipError::Parse {
        line,
        message: format!("expected `(row,col)`, got `{token}`"),
    })?;
    let parse_num = |s: &str| -> Result<usize, ChipError> {
        s.trim().parse().map_err(|_| ChipError::Parse {
            line,
            message: format!("expected `(row,col)` with integers, got `{token}`"),
        })
    };
    Ok((parse_num(r)?, parse_num(c)?))
}

fn parse_edge(token: &str, line: usize) -> Result<EdgeId, ChipError> {
    let (orientation, rest) = match token.split_at_checked(1) {
        Some(("h", rest)) => ('h', rest),
        Some(("v", rest)) => ('v', rest),
        _ => {
            return Err(ChipError::Parse {
                line,
                message: format!("expected `h(row,col)` or `v(row,col)`, got `{token}`"),
            })
        }
    };
    let (r, c) = parse_pair(rest, line)?;
    Ok(match orientation {
        'h' => EdgeId::horizontal(r, c),
        _ => EdgeId::vertical(r, c),
    })
}

/// Emits the canonical textual form of a chip: every key present, tokens in
/// canonical (sorted) order. Hashing this form identifies the chip.
pub fn serialize_chip(chip: &ChipSpec) -> String {
    let mut obstacles = Vec::new();
    for cell in chip.cell_ids() {
        if !chip.is_fluid(cell) {
            obstacles.push(cell.to_string());
        }
    }
    let mut open_edges = Vec::new();
    let mut closed_interior = Vec::new();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for edge in chip.all_edges() {
        match chip.edge_class(edge).unwrap() {
            EdgeClass::Open => open_edges.push(edge.to_string()),
            EdgeClass::PortSource => sources.push(edge.to_string()),
            EdgeClass::PortSink => sinks.push(edge.to_string()),
            EdgeClass::Closed => {
                // Only walls that are not implied by position or obstacles
                // are recorded explicitly.
                if chip.is_interior(edge) {
                    let (a, b) = chip.cells_of_edge(edge);
                    let both_fluid = [a, b]
                        .into_iter()
                        .flatten()
                        .all(|cell| chip.is_fluid(cell));
                    if both_fluid {
                        closed_interior.push(edge.to_string());
                    }
                }
            }
            EdgeClass::Valve => {}
        }
    }
    format!(
        "rows = {}\ncols = {}\nobstacles = {}\nopen_edges = {}\nclosed_interior_edges = {}\nsource_ports = {}\nsink_ports = {}\n",
        chip.rows(),
        chip.cols(),
        obstacles.join(" "),
        open_edges.join(" "),
        closed_interior.join(" "),
        sources.join(" "),
        sinks.join(" "),
    )
}
