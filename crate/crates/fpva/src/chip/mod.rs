//! Lattice model of a fully programmable valve array chip.
//!
//! A chip is a `rows x cols` grid of fluid cells separated by edges on the
//! rectangular lattice. A *horizontal* edge `h(r, c)` separates cell
//! `(r-1, c)` above from cell `(r, c)` below; a *vertical* edge `v(r, c)`
//! separates cell `(r, c-1)` on the left from cell `(r, c)` on the right.
//! Every edge carries a class: a controllable valve, an always-open channel,
//! a permanently closed wall, or an inlet/outlet port on the chip boundary.
//! Cells are either fluid-carrying or walled-off obstacles.
//!
//! The canonical edge order (all horizontal edges in row-major order, then
//! all vertical edges in row-major order) is the order every other module
//! uses when it needs a stable enumeration of edges or valves.

pub mod fixtures;
mod parse;

pub use parse::{load_chip, parse_chip, serialize_chip};

use std::fmt;

use thiserror::Error;

/// Errors raised while parsing, constructing, or validating a chip.
#[derive(Debug, Error)]
pub enum ChipError {
    /// A syntax or structural error in a chip description document.
    #[error("chip description line {line}: {message}")]
    Parse { line: usize, message: String },
    /// The assembled chip violates a structural invariant.
    #[error("invalid chip: {0}")]
    Validation(String),
    /// A cell coordinate outside the grid was passed to an operation.
    #[error("cell ({row},{col}) is outside the {rows}x{cols} grid")]
    UnknownCell {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    /// An edge coordinate outside the lattice was passed to an operation.
    #[error("edge {edge} does not exist on a {rows}x{cols} grid")]
    UnknownEdge {
        edge: EdgeId,
        rows: usize,
        cols: usize,
    },
}

/// Position of a cell in the grid, `(row, col)` with `(0, 0)` top-left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub fn new(row: usize, col: usize) -> Self {
        CellId { row, col }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Edge orientation. The derived order (horizontal before vertical) is part
/// of the canonical edge order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// Separates two vertically adjacent cells; drawn as a horizontal bar.
    Horizontal,
    /// Separates two horizontally adjacent cells; drawn as a vertical bar.
    Vertical,
}

/// Identifier of a lattice edge.
///
/// `h(r, c)` with `r in 0..=rows`, `c in 0..cols` separates cell `(r-1, c)`
/// from `(r, c)`; it lies on the chip boundary iff `r` is `0` or `rows`.
/// `v(r, c)` with `r in 0..rows`, `c in 0..=cols` separates `(r, c-1)` from
/// `(r, c)`; boundary iff `c` is `0` or `cols`. The derived `Ord` is the
/// canonical edge order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId {
    pub orientation: Orientation,
    pub row: usize,
    pub col: usize,
}

impl EdgeId {
    pub fn horizontal(row: usize, col: usize) -> Self {
        EdgeId {
            orientation: Orientation::Horizontal,
            row,
            col,
        }
    }

    pub fn vertical(row: usize, col: usize) -> Self {
        EdgeId {
            orientation: Orientation::Vertical,
            row,
            col,
        }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.orientation {
            Orientation::Horizontal => 'h',
            Orientation::Vertical => 'v',
        };
        write!(f, "{}({},{})", tag, self.row, self.col)
    }
}

/// What a cell is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    /// Carries fluid; participates in paths and conservation.
    Fluid,
    /// Walled off; all incident edges are permanently closed.
    Obstacle,
}

/// What an edge is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    /// Controllable: open or closed per test vector; the unit under test.
    Valve,
    /// Always open; fluid passes freely, nothing to test.
    Open,
    /// Always closed; a wall.
    Closed,
    /// Boundary inlet. Behaves as always open toward the pressure source.
    PortSource,
    /// Boundary outlet where pressure is observed.
    PortSink,
}

/// A validated chip: grid dimensions plus the class of every cell and edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChipSpec {
    rows: usize,
    cols: usize,
    /// Row-major `rows * cols`.
    cells: Vec<CellClass>,
    /// Row-major `(rows + 1) * cols`.
    horizontal: Vec<EdgeClass>,
    /// Row-major `rows * (cols + 1)`.
    vertical: Vec<EdgeClass>,
}

/// Incremental construction of a [`ChipSpec`]; `finish` materializes the
/// default classes and validates.
#[derive(Clone, Debug)]
pub struct ChipBuilder {
    rows: usize,
    cols: usize,
    obstacles: Vec<CellId>,
    open_edges: Vec<EdgeId>,
    closed_edges: Vec<EdgeId>,
    source_ports: Vec<EdgeId>,
    sink_ports: Vec<EdgeId>,
}

impl ChipBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        ChipBuilder {
            rows,
            cols,
            obstacles: Vec::new(),
            open_edges: Vec::new(),
            closed_edges: Vec::new(),
            source_ports: Vec::new(),
            sink_ports: Vec::new(),
        }
    }

    pub fn obstacle(mut self, row: usize, col: usize) -> Self {
        self.obstacles.push(CellId::new(row, col));
        self
    }

    pub fn open_edge(mut self, edge: EdgeId) -> Self {
        self.open_edges.push(edge);
        self
    }

    pub fn closed_edge(mut self, edge: EdgeId) -> Self {
        self.closed_edges.push(edge);
        self
    }

    pub fn source(mut self, edge: EdgeId) -> Self {
        self.source_ports.push(edge);
        self
    }

    pub fn sink(mut self, edge: EdgeId) -> Self {
        self.sink_ports.push(edge);
        self
    }

    /// Materializes edge classes (unlisted boundary edges are closed,
    /// unlisted interior edges between fluid cells are valves, edges
    /// touching an obstacle are closed) and validates the result.
    pub fn finish(self) -> Result<ChipSpec, ChipError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ChipError::Validation(
                "chip must have at least one row and one column".into(),
            ));
        }
        let (rows, cols) = (self.rows, self.cols);
        let mut cells = vec![CellClass::Fluid; rows * cols];
        for cell in &self.obstacles {
            if cell.row >= rows || cell.col >= cols {
                return Err(ChipError::UnknownCell {
                    row: cell.row,
                    col: cell.col,
                    rows,
                    cols,
                });
            }
            cells[cell.row * cols + cell.col] = CellClass::Obstacle;
        }

        let mut chip = ChipSpec {
            rows,
            cols,
            cells,
            horizontal: vec![EdgeClass::Closed; (rows + 1) * cols],
            vertical: vec![EdgeClass::Closed; rows * (cols + 1)],
        };
        // Default interior edges between two fluid cells to valves.
        for edge in chip.all_edges().collect::<Vec<_>>() {
            if chip.is_interior(edge) {
                let (a, b) = chip.cells_of_edge(edge);
                let fluid = |c: Option<CellId>| {
                    matches!(c.map(|c| chip.cell_class(c).unwrap()), Some(CellClass::Fluid))
                };
                if fluid(a) && fluid(b) {
                    chip.set_edge(edge, EdgeClass::Valve)?;
                }
            }
        }
        let mut assigned: std::collections::BTreeMap<EdgeId, &str> =
            std::collections::BTreeMap::new();
        for (listed, class, label) in [
            (&self.open_edges, EdgeClass::Open, "open"),
            (&self.closed_edges, EdgeClass::Closed, "closed"),
            (&self.source_ports, EdgeClass::PortSource, "source port"),
            (&self.sink_ports, EdgeClass::PortSink, "sink port"),
        ] {
            for &edge in listed {
                if !chip.edge_in_lattice(edge) {
                    return Err(ChipError::UnknownEdge { edge, rows, cols });
                }
                if let Some(previous) = assigned.insert(edge, label) {
                    if previous != label {
                        return Err(ChipError::Validation(format!(
                            "edge {edge} assigned conflicting classes ({previous} vs {label})"
                        )));
                    }
                }
                chip.set_edge(edge, class)?;
            }
        }
        chip.validate()?;
        Ok(chip)
    }
}

impl ChipSpec {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn h_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    fn v_index(&self, row: usize, col: usize) -> usize {
        row * (self.cols + 1) + col
    }

    /// True when the edge coordinates exist on this lattice.
    pub fn edge_in_lattice(&self, edge: EdgeId) -> bool {
        match edge.orientation {
            Orientation::Horizontal => edge.row <= self.rows && edge.col < self.cols,
            Orientation::Vertical => edge.row < self.rows && edge.col <= self.cols,
        }
    }

    /// True when the cell coordinates exist on this grid.
    pub fn cell_in_grid(&self, cell: CellId) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn cell_class(&self, cell: CellId) -> Result<CellClass, ChipError> {
        if !self.cell_in_grid(cell) {
            return Err(ChipError::UnknownCell {
                row: cell.row,
                col: cell.col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.cells[cell.row * self.cols + cell.col])
    }

    pub fn is_fluid(&self, cell: CellId) -> bool {
        matches!(self.cell_class(cell), Ok(CellClass::Fluid))
    }

    pub fn edge_class(&self, edge: EdgeId) -> Result<EdgeClass, ChipError> {
        if !self.edge_in_lattice(edge) {
            return Err(ChipError::UnknownEdge {
                edge,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(match edge.orientation {
            Orientation::Horizontal => self.horizontal[self.h_index(edge.row, edge.col)],
            Orientation::Vertical => self.vertical[self.v_index(edge.row, edge.col)],
        })
    }

    fn set_edge(&mut self, edge: EdgeId, class: EdgeClass) -> Result<(), ChipError> {
        if !self.edge_in_lattice(edge) {
            return Err(ChipError::UnknownEdge {
                edge,
                rows: self.rows,
                cols: self.cols,
            });
        }
        match edge.orientation {
            Orientation::Horizontal => {
                let idx = self.h_index(edge.row, edge.col);
                self.horizontal[idx] = class;
            }
            Orientation::Vertical => {
                let idx = self.v_index(edge.row, edge.col);
                self.vertical[idx] = class;
            }
        }
        Ok(())
    }

    /// True when the edge lies on the chip boundary.
    pub fn is_boundary(&self, edge: EdgeId) -> bool {
        match edge.orientation {
            Orientation::Horizontal => edge.row == 0 || edge.row == self.rows,
            Orientation::Vertical => edge.col == 0 || edge.col == self.cols,
        }
    }

    /// True when the edge separates two in-grid cells.
    pub fn is_interior(&self, edge: EdgeId) -> bool {
        self.edge_in_lattice(edge) && !self.is_boundary(edge)
    }

    /// Fluid can pass through this edge when it is (held) open.
    pub fn traversable(&self, edge: EdgeId) -> bool {
        matches!(
            self.edge_class(edge),
            Ok(EdgeClass::Valve | EdgeClass::Open | EdgeClass::PortSource | EdgeClass::PortSink)
        )
    }

    /// The cells on either side of an edge in canonical flow order: the
    /// returned pair is `(tail, head)` where the canonical flow direction is
    /// tail to head — downward through horizontal edges, rightward through
    /// vertical edges. A boundary edge has one side off-grid (`None`).
    pub fn cells_of_edge(&self, edge: EdgeId) -> (Option<CellId>, Option<CellId>) {
        match edge.orientation {
            Orientation::Horizontal => {
                let above = (edge.row > 0).then(|| CellId::new(edge.row - 1, edge.col));
                let below = (edge.row < self.rows).then(|| CellId::new(edge.row, edge.col));
                (above, below)
            }
            Orientation::Vertical => {
                let left = (edge.col > 0).then(|| CellId::new(edge.row, edge.col - 1));
                let right = (edge.col < self.cols).then(|| CellId::new(edge.row, edge.col));
                (left, right)
            }
        }
    }

    /// Sign of the canonical flow direction of `edge` as seen from `cell`:
    /// `+1` when canonical flow enters the cell, `-1` when it leaves it.
    /// The cell must be one of the edge's two sides.
    pub fn flow_sign(&self, edge: EdgeId, cell: CellId) -> Result<i64, ChipError> {
        let (tail, head) = self.cells_of_edge(edge);
        if head == Some(cell) {
            Ok(1)
        } else if tail == Some(cell) {
            Ok(-1)
        } else {
            Err(ChipError::UnknownCell {
                row: cell.row,
                col: cell.col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// The four edges around a cell, ordered left, right, upper, lower.
    pub fn incident_edges(&self, cell: CellId) -> Result<[EdgeId; 4], ChipError> {
        if !self.cell_in_grid(cell) {
            return Err(ChipError::UnknownCell {
                row: cell.row,
                col: cell.col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok([
            EdgeId::vertical(cell.row, cell.col),
            EdgeId::vertical(cell.row, cell.col + 1),
            EdgeId::horizontal(cell.row, cell.col),
            EdgeId::horizontal(cell.row + 1, cell.col),
        ])
    }

    /// All cells in row-major order.
    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        let cols = self.cols;
        (0..self.rows).flat_map(move |r| (0..cols).map(move |c| CellId::new(r, c)))
    }

    /// All fluid cells in row-major order.
    pub fn fluid_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cell_ids().filter(|&c| self.is_fluid(c))
    }

    /// All edges in canonical order: horizontal edges row-major, then
    /// vertical edges row-major. This matches the `Ord` on [`EdgeId`].
    pub fn all_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        let (rows, cols) = (self.rows, self.cols);
        let horizontals =
            (0..=rows).flat_map(move |r| (0..cols).map(move |c| EdgeId::horizontal(r, c)));
        let verticals =
            (0..rows).flat_map(move |r| (0..=cols).map(move |c| EdgeId::vertical(r, c)));
        horizontals.chain(verticals)
    }

    /// All interior edges in canonical order.
    pub fn interior_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.all_edges().filter(|&e| self.is_interior(e))
    }

    /// All valves in canonical order. This is the order test-vector bit
    /// strings and fault-campaign samples index into.
    pub fn valves(&self) -> Vec<EdgeId> {
        self.all_edges()
            .filter(|&e| matches!(self.edge_class(e), Ok(EdgeClass::Valve)))
            .collect()
    }

    /// Source port edges in canonical order.
    pub fn source_ports(&self) -> Vec<EdgeId> {
        self.all_edges()
            .filter(|&e| matches!(self.edge_class(e), Ok(EdgeClass::PortSource)))
            .collect()
    }

    /// Sink port edges in canonical order.
    pub fn sink_ports(&self) -> Vec<EdgeId> {
        self.all_edges()
            .filter(|&e| matches!(self.edge_class(e), Ok(EdgeClass::PortSink)))
            .collect()
    }

    /// The unique in-grid cell a boundary (port) edge opens into.
    pub fn port_cell(&self, edge: EdgeId) -> Result<CellId, ChipError> {
        if !self.edge_in_lattice(edge) || !self.is_boundary(edge) {
            return Err(ChipError::UnknownEdge {
                edge,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let (tail, head) = self.cells_of_edge(edge);
        Ok(tail.or(head).expect("boundary edge has one in-grid cell"))
    }

    /// Number of interior edges; equals `2*rows*cols - rows - cols`.
    pub fn interior_edge_count(&self) -> usize {
        2 * self.rows * self.cols - self.rows - self.cols
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ChipError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ChipError::Validation(
                "chip must have at least one row and one column".into(),
            ));
        }
        let mut sources = 0usize;
        let mut sinks = 0usize;
        for edge in self.all_edges() {
            let class = self.edge_class(edge).unwrap();
            match class {
                EdgeClass::PortSource | EdgeClass::PortSink => {
                    if !self.is_boundary(edge) {
                        return Err(ChipError::Validation(format!(
                            "port on interior edge {edge}"
                        )));
                    }
                    let cell = self.port_cell(edge).unwrap();
                    if !self.is_fluid(cell) {
                        return Err(ChipError::Validation(format!(
                            "port {edge} opens into obstacle cell {cell}"
                        )));
                    }
                    if class == EdgeClass::PortSource {
                        sources += 1;
                    } else {
                        sinks += 1;
                    }
                }
                EdgeClass::Open | EdgeClass::Valve => {
                    let label = if class == EdgeClass::Open {
                        "always-open edge"
                    } else {
                        "valve"
                    };
                    if self.is_boundary(edge) {
                        return Err(ChipError::Validation(format!(
                            "{label} {edge} on the chip boundary"
                        )));
                    }
                    let (a, b) = self.cells_of_edge(edge);
                    for cell in [a, b].into_iter().flatten() {
                        if !self.is_fluid(cell) {
                            return Err(ChipError::Validation(format!(
                                "{label} {edge} touches obstacle cell {cell}"
                            )));
                        }
                    }
                }
                EdgeClass::Closed => {}
            }
        }
        if sources == 0 {
            return Err(ChipError::Validation("chip has no source port".into()));
        }
        if sinks == 0 {
            return Err(ChipError::Validation("chip has no sink port".into()));
        }
        Ok(())
    }

    /// Canonical textual form; parsing it back yields an equal chip.
    pub fn serialize(&self) -> String {
        parse::serialize_chip(self)
    }

    /// Hex SHA-256 of the canonical textual form; identifies the chip in
    /// suite documents.
    pub fn sha256_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures;
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn interior_edge_count_matches_formula_and_enumeration() {
        for (name, chip) in fixtures::all() {
            let enumerated = chip.interior_edges().count();
            assert_eq!(
                enumerated,
                chip.interior_edge_count(),
                "fixture {name}: formula vs enumeration"
            );
            assert_eq!(
                chip.interior_edge_count(),
                2 * chip.rows() * chip.cols() - chip.rows() - chip.cols(),
                "fixture {name}"
            );
        }
    }

    #[test]
    fn incidence_counts_interior_edges_twice_and_boundary_once() {
        for (name, chip) in fixtures::all() {
            let mut seen: BTreeMap<EdgeId, usize> = BTreeMap::new();
            for cell in chip.cell_ids() {
                for edge in chip.incident_edges(cell).unwrap() {
                    *seen.entry(edge).or_default() += 1;
                }
            }
            for edge in chip.all_edges() {
                let expected = if chip.is_interior(edge) { 2 } else { 1 };
                assert_eq!(seen.get(&edge), Some(&expected), "fixture {name} edge {edge}");
            }
            assert_eq!(
                seen.len(),
                chip.all_edges().count(),
                "fixture {name}: incidence reaches every edge"
            );
        }
    }

    #[test]
    fn canonical_edge_order_matches_edge_id_order() {
        let chip = fixtures::full_3x3();
        let edges: Vec<EdgeId> = chip.all_edges().collect();
        let mut sorted = edges.clone();
        sorted.sort();
        assert_eq!(edges, sorted);
    }

    #[test]
    fn cells_of_edge_orientation_is_downward_and_rightward() {
        let chip = fixtures::full_3x3();
        let h = EdgeId::horizontal(1, 2);
        assert_eq!(
            chip.cells_of_edge(h),
            (Some(CellId::new(0, 2)), Some(CellId::new(1, 2)))
        );
        assert_eq!(chip.flow_sign(h, CellId::new(1, 2)).unwrap(), 1);
        assert_eq!(chip.flow_sign(h, CellId::new(0, 2)).unwrap(), -1);
        let v = EdgeId::vertical(2, 1);
        assert_eq!(
            chip.cells_of_edge(v),
            (Some(CellId::new(2, 0)), Some(CellId::new(2, 1)))
        );
        assert_eq!(chip.flow_sign(v, CellId::new(2, 1)).unwrap(), 1);
    }

    #[test]
    fn tiny_cell_incidence_orders_left_right_upper_lower() {
        let chip = fixtures::tiny_1x2();
        let edges = chip.incident_edges(CellId::new(0, 0)).unwrap();
        assert_eq!(
            edges,
            [
                EdgeId::vertical(0, 0),
                EdgeId::vertical(0, 1),
                EdgeId::horizontal(0, 0),
                EdgeId::horizontal(1, 0),
            ]
        );
        let classes: Vec<EdgeClass> = edges
            .iter()
            .map(|&e| chip.edge_class(e).unwrap())
            .collect();
        assert_eq!(
            classes,
            vec![
                EdgeClass::PortSource,
                EdgeClass::Valve,
                EdgeClass::Closed,
                EdgeClass::Closed,
            ]
        );
    }

    #[test]
    fn full_grid_interior_cell_sees_four_valves() {
        let chip = fixtures::full_10x10();
        let edges = chip.incident_edges(CellId::new(5, 5)).unwrap();
        for edge in edges {
            assert_eq!(chip.edge_class(edge).unwrap(), EdgeClass::Valve);
        }
    }

    #[test]
    fn full_grid_corner_cell_sees_two_boundary_and_two_interior_edges() {
        let chip = fixtures::full_10x10();
        let edges = chip.incident_edges(CellId::new(0, 0)).unwrap();
        let boundary: Vec<bool> = edges.iter().map(|&e| chip.is_boundary(e)).collect();
        assert_eq!(boundary, vec![true, false, true, false]);
        assert_eq!(
            chip.edge_class(EdgeId::vertical(0, 0)).unwrap(),
            EdgeClass::PortSource
        );
        assert_eq!(
            chip.edge_class(EdgeId::vertical(0, 1)).unwrap(),
            EdgeClass::Valve
        );
        assert_eq!(
            chip.edge_class(EdgeId::horizontal(0, 0)).unwrap(),
            EdgeClass::Closed
        );
        assert_eq!(
            chip.edge_class(EdgeId::horizontal(1, 0)).unwrap(),
            EdgeClass::Valve
        );
    }

    #[test]
    fn out_of_range_lookups_error() {
        let chip = fixtures::tiny_1x2();
        assert!(matches!(
            chip.cell_class(CellId::new(1, 0)),
            Err(ChipError::UnknownCell { .. })
        ));
        assert!(matches!(
            chip.edge_class(EdgeId::horizontal(2, 0)),
            Err(ChipError::UnknownEdge { .. })
        ));
        assert!(matches!(
            chip.incident_edges(CellId::new(0, 2)),
            Err(ChipError::UnknownCell { .. })
        ));
        assert!(chip.port_cell(EdgeId::vertical(0, 1)).is_err());
    }

    #[test]
    fn validation_rejects_port_on_interior_edge() {
        let err = ChipBuilder::new(3, 3)
            .source(EdgeId::vertical(1, 1))
            .sink(EdgeId::vertical(1, 3))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("port on interior edge"), "{err}");
    }

    #[test]
    fn validation_rejects_missing_ports() {
        let err = ChipBuilder::new(2, 2)
            .sink(EdgeId::vertical(0, 2))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("no source port"), "{err}");
        let err = ChipBuilder::new(2, 2)
            .source(EdgeId::vertical(0, 0))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("no sink port"), "{err}");
    }

    #[test]
    fn validation_rejects_port_into_obstacle() {
        let err = ChipBuilder::new(2, 2)
            .obstacle(0, 0)
            .source(EdgeId::vertical(0, 0))
            .sink(EdgeId::vertical(1, 2))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("obstacle cell"), "{err}");
    }

    #[test]
    fn validation_rejects_open_edge_on_boundary() {
        let err = ChipBuilder::new(2, 2)
            .source(EdgeId::vertical(0, 0))
            .sink(EdgeId::vertical(1, 2))
            .open_edge(EdgeId::horizontal(0, 1))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("on the chip boundary"), "{err}");
    }

    #[test]
    fn validation_rejects_conflicting_explicit_classes() {
        let err = ChipBuilder::new(2, 2)
            .source(EdgeId::vertical(0, 0))
            .sink(EdgeId::vertical(1, 2))
            .open_edge(EdgeId::horizontal(1, 0))
            .closed_edge(EdgeId::horizontal(1, 0))
            .finish()
            .unwrap_err();
        assert!(err.to_string().contains("conflicting classes"), "{err}");
    }

    #[test]
    fn obstacle_incident_edges_are_forced_closed() {
        let chip = fixtures::irregular_20x20();
        for cell in chip.cell_ids() {
            if chip.cell_class(cell).unwrap() == CellClass::Obstacle {
                for edge in chip.incident_edges(cell).unwrap() {
                    assert_eq!(
                        chip.edge_class(edge).unwrap(),
                        EdgeClass::Closed,
                        "edge {edge} next to obstacle {cell}"
                    );
                }
            }
        }
    }

    #[test]
    fn flow_sign_rejects_non_incident_cell() {
        let chip = fixtures::full_3x3();
        assert!(chip
            .flow_sign(EdgeId::horizontal(1, 1), CellId::new(2, 2))
            .is_err());
    }
}
