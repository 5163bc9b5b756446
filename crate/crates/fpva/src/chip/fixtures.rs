//! Built-in chips used by tests, examples, and the scaling study.

use super::{ChipBuilder, ChipSpec, EdgeId};

/// All built-in fixtures, keyed by a stable name, in a stable order.
pub fn all() -> Vec<(&'static str, ChipSpec)> {
    vec![
        ("tiny-1x2", tiny_1x2()),
        ("full-3x3", full_3x3()),
        ("full-5x5", full_5x5()),
        ("full-10x10", full_10x10()),
        ("irregular-20x20", irregular_20x20()),
    ]
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<ChipSpec> {
    all().into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, chip)| chip)
}

/// Smallest useful chip: two cells in a row, one valve between them,
/// source on the left face, sink on the right face.
pub fn tiny_1x2() -> ChipSpec {
    ChipBuilder::new(1, 2)
        .source(EdgeId::vertical(0, 0))
        .sink(EdgeId::vertical(0, 2))
        .finish()
        .expect("fixture is valid")
}

/// 3x3 all-valve array with ports at the middle of the left and right faces.
pub fn full_3x3() -> ChipSpec {
    full_with_ports(3, 3, EdgeId::vertical(1, 0), EdgeId::vertical(1, 3))
}

/// 5x5 all-valve array with ports at the middle of the left and right faces.
pub fn full_5x5() -> ChipSpec {
    full_with_ports(5, 5, EdgeId::vertical(2, 0), EdgeId::vertical(2, 5))
}

/// 10x10 all-valve array with diagonally opposite corner ports: source on
/// the left face of cell (0,0), sink on the right face of cell (9,9).
pub fn full_10x10() -> ChipSpec {
    full_diagonal(10, 10)
}

/// All-valve array with the source on the left face of the top-left cell
/// and the sink on the right face of the bottom-right cell.
pub fn full_diagonal(rows: usize, cols: usize) -> ChipSpec {
    full_with_ports(
        rows,
        cols,
        EdgeId::vertical(0, 0),
        EdgeId::vertical(rows - 1, cols),
    )
}

/// All-valve array with explicit port edges.
pub fn full_with_ports(rows: usize, cols: usize, source: EdgeId, sink: EdgeId) -> ChipSpec {
    ChipBuilder::new(rows, cols)
        .source(source)
        .sink(sink)
        .finish()
        .expect("fixture is valid")
}

/// 20x20 array with two 2x2 obstacle blocks and three always-open channel
/// runs, corner-to-corner ports. One open run spans the full width of a
/// 5-cell block boundary segment so hierarchical planning sees a boundary
/// with no valves on it. 718 valves.
pub fn irregular_20x20() -> ChipSpec {
    let mut builder = ChipBuilder::new(20, 20)
        .source(EdgeId::vertical(0, 0))
        .sink(EdgeId::vertical(19, 20));
    for (r, c) in [(4, 6), (4, 7), (5, 6), (5, 7), (14, 12), (14, 13), (15, 12), (15, 13)] {
        builder = builder.obstacle(r, c);
    }
    for c in 10..16 {
        builder = builder.open_edge(EdgeId::horizontal(3, c));
    }
    for c in 0..6 {
        builder = builder.open_edge(EdgeId::horizontal(10, c));
    }
    for c in 8..14 {
        builder = builder.open_edge(EdgeId::horizontal(17, c));
    }
    builder.finish().expect("fixture is valid")
}
