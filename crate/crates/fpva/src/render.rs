//! Grid drawings of chips and their test vectors.
//!
//! Two formats, both deterministic functions of their inputs:
//!
//! * **ASCII** — one character per lattice element. Corners are `+`, valves
//!   `-`/`|`, always-open channels blank, fixed walls `=`/`#`, obstacles
//!   `X`, fluid cells `.`, ports `S`/`T`. Flow vectors letter the cells
//!   they visit (`a`, `b`, …); cut vectors letter the corners of their
//!   blockade walk (`A`, `B`, …); contested marks become `*`.
//! * **SVG** — self-contained, no external assets. Obstacles are filled
//!   blocks, fixed walls black, valves grey ticks, open channels unmarked;
//!   each flow path is a polyline through its cell centers and each cut a
//!   dashed polyline along its corner walk, colored from a fixed palette.

use std::fmt::Write as _;

use crate::chip::{CellId, ChipSpec, EdgeClass, EdgeId, Orientation};
use crate::vectors::{TestVector, VectorKind};

/// SVG pixels per cell.
const CELL: usize = 40;
/// SVG canvas margin.
const MARGIN: usize = 20;
/// Stroke colors, cycled per path or cut index.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn edge_glyph(chip: &ChipSpec, edge: EdgeId) -> char {
    match chip.edge_class(edge).expect("edge is in the lattice") {
        EdgeClass::Valve => match edge.orientation {
            Orientation::Horizontal => '-',
            Orientation::Vertical => '|',
        },
        EdgeClass::Open => ' ',
        EdgeClass::Closed => match edge.orientation {
            Orientation::Horizontal => '=',
            Orientation::Vertical => '#',
        },
        EdgeClass::PortSource => 'S',
        EdgeClass::PortSink => 'T',
    }
}

/// Character-grid position of an edge.
fn edge_char_pos(edge: EdgeId) -> (usize, usize) {
    match edge.orientation {
        Orientation::Horizontal => (2 * edge.row, 2 * edge.col + 1),
        Orientation::Vertical => (2 * edge.row + 1, 2 * edge.col),
    }
}

/// The cells a route walks through, recovered from consecutive edge pairs.
fn route_cells(chip: &ChipSpec, route: &[EdgeId]) -> Vec<CellId> {
    let mut cells = Vec::new();
    for pair in route.windows(2) {
        let (a1, a2) = chip.cells_of_edge(pair[0]);
        let (b1, b2) = chip.cells_of_edge(pair[1]);
        let of_first = [a1, a2];
        let shared = [b1, b2]
            .into_iter()
            .flatten()
            .find(|c| of_first.contains(&Some(*c)));
        if let Some(cell) = shared {
            cells.push(cell);
        }
    }
    cells
}

fn stamp(slot: &mut char, mark: char, blank: char) {
    if *slot == blank {
        *slot = mark;
    } else if *slot != mark {
        *slot = '*';
    }
}

/// Draws the chip as ASCII art, overlaying any vectors that carry drawable
/// geometry (a flow route or a cut's corner walk).
pub fn render_ascii(chip: &ChipSpec, vectors: &[TestVector]) -> String {
    let (rows, cols) = (chip.rows(), chip.cols());
    let mut grid = vec![vec![' '; 2 * cols + 1]; 2 * rows + 1];
    for row in 0..=rows {
        for col in 0..=cols {
            grid[2 * row][2 * col] = '+';
        }
    }
    for edge in chip.all_edges() {
        let (row, col) = edge_char_pos(edge);
        grid[row][col] = edge_glyph(chip, edge);
    }
    for row in 0..rows {
        for col in 0..cols {
            grid[2 * row + 1][2 * col + 1] = if chip.is_fluid(CellId::new(row, col)) {
                '.'
            } else {
                'X'
            };
        }
    }

    let mut path_index = 0usize;
    let mut cut_index = 0usize;
    for vector in vectors {
        match vector.kind {
            VectorKind::Flow => {
                if let Some(route) = &vector.route {
                    let mark = (b'a' + (path_index % 26) as u8) as char;
                    for cell in route_cells(chip, route) {
                        stamp(&mut grid[2 * cell.row + 1][2 * cell.col + 1], mark, '.');
                    }
                }
                path_index += 1;
            }
            VectorKind::Cut => {
                if let Some(dual) = &vector.dual {
                    let mark = (b'A' + (cut_index % 26) as u8) as char;
                    for &(row, col) in dual {
                        stamp(&mut grid[2 * row][2 * col], mark, '+');
                    }
                }
                cut_index += 1;
            }
        }
    }

    let mut out = String::new();
    for line in grid {
        out.extend(line);
        out.push('\n');
    }
    out
}

/// Lattice-to-canvas coordinates of a corner.
fn corner_xy(row: usize, col: usize) -> (usize, usize) {
    (MARGIN + col * CELL, MARGIN + row * CELL)
}

/// Canvas endpoints of an edge.
fn edge_xy(edge: EdgeId) -> ((usize, usize), (usize, usize)) {
    let start = corner_xy(edge.row, edge.col);
    match edge.orientation {
        Orientation::Horizontal => (start, (start.0 + CELL, start.1)),
        Orientation::Vertical => (start, (start.0, start.1 + CELL)),
    }
}

fn edge_midpoint(edge: EdgeId) -> (usize, usize) {
    let (a, b) = edge_xy(edge);
    ((a.0 + b.0) / 2, (a.1 + b.1) / 2)
}

fn cell_center(cell: CellId) -> (usize, usize) {
    let (x, y) = corner_xy(cell.row, cell.col);
    (x + CELL / 2, y + CELL / 2)
}

fn push_line(out: &mut String, a: (usize, usize), b: (usize, usize), style: &str) {
    writeln!(
        out,
        r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" {style}/>"#,
        a.0, a.1, b.0, b.1
    )
    .expect("writing to a string cannot fail");
}

fn push_polyline(out: &mut String, points: &[(usize, usize)], style: &str) {
    let coords: Vec<String> = points.iter().map(|p| format!("{},{}", p.0, p.1)).collect();
    writeln!(
        out,
        r#"  <polyline points="{}" fill="none" {style}/>"#,
        coords.join(" ")
    )
    .expect("writing to a string cannot fail");
}

/// Draws the chip as a self-contained SVG document, overlaying any vectors
/// that carry drawable geometry.
pub fn render_svg(chip: &ChipSpec, vectors: &[TestVector]) -> String {
    let width = chip.cols() * CELL + 2 * MARGIN;
    let height = chip.rows() * CELL + 2 * MARGIN;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">"#
    )
    .expect("writing to a string cannot fail");
    writeln!(
        out,
        r##"  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##
    )
    .expect("writing to a string cannot fail");

    for cell in chip.cell_ids() {
        let (x, y) = corner_xy(cell.row, cell.col);
        let fill = if chip.is_fluid(cell) { "#f7f7f7" } else { "#111111" };
        writeln!(
            out,
            r#"  <rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#
        )
        .expect("writing to a string cannot fail");
    }

    for edge in chip.all_edges() {
        let (a, b) = edge_xy(edge);
        match chip.edge_class(edge).expect("edge is in the lattice") {
            EdgeClass::Open => {}
            EdgeClass::Valve => {
                push_line(&mut out, a, b, r##"stroke="#999999" stroke-width="3""##);
            }
            EdgeClass::Closed => {
                push_line(&mut out, a, b, r##"stroke="#111111" stroke-width="3""##);
            }
            EdgeClass::PortSource | EdgeClass::PortSink => {
                let sink = matches!(
                    chip.edge_class(edge),
                    Ok(EdgeClass::PortSink)
                );
                let color = if sink { "#c03030" } else { "#20a060" };
                push_line(
                    &mut out,
                    a,
                    b,
                    &format!(r#"stroke="{color}" stroke-width="5""#),
                );
                let (mx, my) = edge_midpoint(edge);
                writeln!(
                    out,
                    r#"  <text x="{mx}" y="{}" font-family="monospace" font-size="14" text-anchor="middle" fill="{color}">{}</text>"#,
                    my + 5,
                    if sink { 'T' } else { 'S' }
                )
                .expect("writing to a string cannot fail");
            }
        }
    }

    let mut path_index = 0usize;
    let mut cut_index = 0usize;
    for vector in vectors {
        match vector.kind {
            VectorKind::Flow => {
                if let Some(route) = &vector.route {
                    let mut points = Vec::new();
                    if let Some(&first) = route.first() {
                        points.push(edge_midpoint(first));
                    }
                    points.extend(route_cells(chip, route).into_iter().map(cell_center));
                    if route.len() > 1 {
                        points.push(edge_midpoint(route[route.len() - 1]));
                    }
                    let color = PALETTE[path_index % PALETTE.len()];
                    push_polyline(
                        &mut out,
                        &points,
                        &format!(
                            r#"stroke="{color}" stroke-width="4" stroke-opacity="0.85" stroke-linejoin="round" stroke-linecap="round""#
                        ),
                    );
                }
                path_index += 1;
            }
            VectorKind::Cut => {
                if let Some(dual) = &vector.dual {
                    let points: Vec<(usize, usize)> =
                        dual.iter().map(|&(r, c)| corner_xy(r, c)).collect();
                    let color = PALETTE[cut_index % PALETTE.len()];
                    push_polyline(
                        &mut out,
                        &points,
                        &format!(
                            r#"stroke="{color}" stroke-width="3" stroke-dasharray="8 5" stroke-linejoin="round""#
                        ),
                    );
                }
                cut_index += 1;
            }
        }
    }

    out.push_str("</svg>\n");
    out
}
