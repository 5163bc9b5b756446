//! Constructive covering path families, used as solver warm starts.
//!
//! Two constructions are tried in order:
//!
//! * For full square grids with the inlet at the top-left cell and the
//!   outlet at the bottom-right cell, an explicit two-path cover exists for
//!   every size: serpentine sweeps for odd sizes, and a transpose-symmetric
//!   pair of diagonal weaves for even sizes (a plain serpentine ends in the
//!   wrong corner when the side length is even).
//! * For everything else, a greedy router repeatedly picks an uncovered
//!   valve and threads a source-to-sink path through it, preferring edges
//!   that cover more uncovered valves along the way.
//!
//! Everything here is deterministic, and every returned family is validated
//! before it leaves the module; on any failure the caller simply proceeds
//! without a warm start.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::chip::{CellId, ChipSpec, EdgeClass, EdgeId, Orientation};

use super::FlowPath;

/// Builds a family of valid source-to-sink paths covering every valve, or
/// `None` when neither construction applies.
pub fn cover(chip: &ChipSpec) -> Option<Vec<FlowPath>> {
    if let Some(paths) = square_pair(chip) {
        return Some(paths);
    }
    greedy_cover(chip)
}

/// Transposes an edge across the main diagonal: the mirror image of a
/// vertical bar at (row, col) is a horizontal bar at (col, row).
fn transpose(edge: EdgeId) -> EdgeId {
    match edge.orientation {
        Orientation::Horizontal => EdgeId::vertical(edge.col, edge.row),
        Orientation::Vertical => EdgeId::horizontal(edge.col, edge.row),
    }
}

/// The two-path cover for a full n-by-n grid with corner-diagonal ports.
fn square_pair(chip: &ChipSpec) -> Option<Vec<FlowPath>> {
    let n = chip.rows();
    if chip.cols() != n || n < 2 {
        return None;
    }
    if chip.source_ports() != vec![EdgeId::vertical(0, 0)]
        || chip.sink_ports() != vec![EdgeId::vertical(n - 1, n)]
    {
        return None;
    }
    if !chip.cell_ids().all(|c| chip.is_fluid(c)) {
        return None;
    }
    if !chip
        .interior_edges()
        .all(|e| matches!(chip.edge_class(e), Ok(EdgeClass::Valve)))
    {
        return None;
    }

    let first: BTreeSet<EdgeId> = if n == 2 {
        // Around the top-right cell: right then down.
        BTreeSet::from([EdgeId::vertical(0, 1), EdgeId::horizontal(1, 1)])
    } else if n % 2 == 1 {
        row_serpentine(n)
    } else {
        diagonal_weave(n)
    };
    let second: BTreeSet<EdgeId> = first.iter().map(|&e| transpose(e)).collect();

    let src = EdgeId::vertical(0, 0);
    let snk = EdgeId::vertical(n - 1, n);
    let a = trace(chip, &first, src, snk)?;
    let b = trace(chip, &second, src, snk)?;

    // The pair must cover every valve; otherwise fall back to the router.
    let mut covered = a.valve_set(chip);
    covered.extend(b.valve_set(chip));
    if covered.len() != chip.valves().len() {
        return None;
    }
    Some(vec![a, b])
}

/// Interior edges of the row-by-row serpentine sweep. Only for odd `n`,
/// where the sweep ends in the bottom-right cell.
fn row_serpentine(n: usize) -> BTreeSet<EdgeId> {
    let mut edges = BTreeSet::new();
    for r in 0..n {
        for c in 1..n {
            edges.insert(EdgeId::vertical(r, c));
        }
    }
    for r in 1..n {
        let turn_col = if r % 2 == 1 { n - 1 } else { 0 };
        edges.insert(EdgeId::horizontal(r, turn_col));
    }
    edges
}

/// Interior edges of the diagonal weave for even `n >= 4`: a full row-sweep
/// pattern whose sweeps are broken along the anti-diagonal, with matching
/// connector bars mirrored across the main diagonal, plus connector bars on
/// the first and last columns at even rows. Walked from the top-left cell it
/// forms one simple path to the bottom-right cell that misses only the
/// top-right cell, and its transpose covers exactly the edges it skips.
fn diagonal_weave(n: usize) -> BTreeSet<EdgeId> {
    let mut edges = BTreeSet::new();
    // All horizontal moves except the anti-diagonal breaks...
    for r in 0..n {
        for c in 1..n {
            if r + c != n - 1 {
                edges.insert(EdgeId::vertical(r, c));
            }
        }
    }
    // ...the mirrored connectors along the anti-diagonal...
    for k in 0..=n - 2 {
        edges.insert(EdgeId::horizontal(n - 1 - k, k));
    }
    // ...and the boundary-column connectors at even rows.
    for r in (2..=n - 2).step_by(2) {
        edges.insert(EdgeId::horizontal(r, 0));
        edges.insert(EdgeId::horizontal(r, n - 1));
    }
    edges
}

/// Walks a set of interior edges into a path from the source port to the
/// sink port. Returns `None` unless the set is exactly one simple path
/// between the two port cells.
fn trace(
    chip: &ChipSpec,
    interior: &BTreeSet<EdgeId>,
    src: EdgeId,
    snk: EdgeId,
) -> Option<FlowPath> {
    let mut edges_left = interior.clone();
    let mut current = chip.port_cell(src).ok()?;
    let mut path_edges = vec![src];
    let mut path_cells = Vec::new();
    let mut visited = BTreeSet::new();
    loop {
        if !visited.insert(current) {
            return None;
        }
        path_cells.push(current);
        let nexts: Vec<EdgeId> = chip
            .incident_edges(current)
            .ok()?
            .into_iter()
            .filter(|e| edges_left.contains(e))
            .collect();
        match nexts.len() {
            0 => break,
            1 => {
                let edge = nexts[0];
                edges_left.remove(&edge);
                path_edges.push(edge);
                let (a, b) = chip.cells_of_edge(edge);
                current = match (a, b) {
                    (Some(x), Some(y)) if x == current => y,
                    (Some(x), Some(y)) if y == current => x,
                    _ => return None,
                };
            }
            _ => return None,
        }
    }
    if !edges_left.is_empty() {
        return None;
    }
    if chip.port_cell(snk).ok()? != *path_cells.last()? {
        return None;
    }
    path_edges.push(snk);
    let path = FlowPath {
        edges: path_edges,
        cells: path_cells,
    };
    path.validate(chip).ok()?;
    Some(path)
}

/// Greedy cover for arbitrary chips: pick the first uncovered valve, thread
/// a cheapest path through it (uncovered valves cost nothing, so the path
/// soaks up as many as it can), repeat. A valve the router cannot thread
/// stays pending and is retried after every success; a full round without
/// progress gives up.
fn greedy_cover(chip: &ChipSpec) -> Option<Vec<FlowPath>> {
    let mut pending: BTreeSet<EdgeId> = chip.valves().into_iter().collect();
    let mut paths = Vec::new();
    while !pending.is_empty() {
        let mut progressed = false;
        for target in pending.clone() {
            if !pending.contains(&target) {
                continue;
            }
            if let Some(path) = route_through(chip, target, &pending) {
                for valve in path.valve_set(chip) {
                    pending.remove(&valve);
                }
                paths.push(path);
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    Some(paths)
}

/// Threads a simple source-to-sink path through `target`: a cheapest route
/// from any source to one side, then a cheapest route from the other side
/// to any sink that avoids the first leg. Both orientations are tried.
fn route_through(
    chip: &ChipSpec,
    target: EdgeId,
    uncovered: &BTreeSet<EdgeId>,
) -> Option<FlowPath> {
    let (a, b) = chip.cells_of_edge(target);
    let (a, b) = (a?, b?);
    let mut best: Option<(u64, FlowPath)> = None;
    for (near, far) in [(a, b), (b, a)] {
        let Some((cost_in, entry, cells_in, edges_in)) =
            route_from_sources(chip, near, far, uncovered)
        else {
            continue;
        };
        let blocked: BTreeSet<CellId> = cells_in.iter().copied().collect();
        let Some((cost_out, exit, cells_out, edges_out)) =
            route_to_sink(chip, far, &blocked, uncovered)
        else {
            continue;
        };
        let cost = cost_in + cost_out;
        let mut edges = vec![entry];
        edges.extend(edges_in);
        edges.push(target);
        edges.extend(edges_out);
        edges.push(exit);
        let mut cells = cells_in;
        cells.extend(cells_out);
        let path = FlowPath { edges, cells };
        if path.validate(chip).is_err() {
            continue;
        }
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, path));
        }
    }
    best.map(|(_, path)| path)
}

/// Cost of stepping across an edge: free if it is a valve still waiting for
/// coverage, one otherwise.
fn step_cost(chip: &ChipSpec, edge: EdgeId, uncovered: &BTreeSet<EdgeId>) -> u64 {
    match chip.edge_class(edge) {
        Ok(EdgeClass::Valve) if uncovered.contains(&edge) => 0,
        _ => 1,
    }
}

/// Cheapest route from any source port to `goal` avoiding `avoid`. Returns
/// the cost, the chosen port, and the cell/edge walk from the port cell to
/// `goal` (the edge list excludes the port edge).
fn route_from_sources(
    chip: &ChipSpec,
    goal: CellId,
    avoid: CellId,
    uncovered: &BTreeSet<EdgeId>,
) -> Option<(u64, EdgeId, Vec<CellId>, Vec<EdgeId>)> {
    let mut dist: BTreeMap<CellId, u64> = BTreeMap::new();
    let mut pred: BTreeMap<CellId, (EdgeId, Option<CellId>)> = BTreeMap::new();
    let mut heap: BinaryHeap<Reverse<(u64, CellId)>> = BinaryHeap::new();
    for port in chip.source_ports() {
        let cell = chip.port_cell(port).ok()?;
        if cell == avoid {
            continue;
        }
        let d = 1;
        if dist.get(&cell).is_none_or(|&old| d < old) {
            dist.insert(cell, d);
            pred.insert(cell, (port, None));
            heap.push(Reverse((d, cell)));
        }
    }
    search(chip, avoid, uncovered, &mut dist, &mut pred, &mut heap, Some(goal));
    let cost = *dist.get(&goal)?;
    let (entry, cells, edges) = unwind(&pred, goal);
    Some((cost, entry, cells, edges))
}

/// Cheapest route from `from` to any sink port avoiding the `blocked`
/// cells. Returns the cost including the port edge, the chosen port, and
/// the cell/edge walk from `from` to the port cell.
fn route_to_sink(
    chip: &ChipSpec,
    from: CellId,
    blocked: &BTreeSet<CellId>,
    uncovered: &BTreeSet<EdgeId>,
) -> Option<(u64, EdgeId, Vec<CellId>, Vec<EdgeId>)> {
    if blocked.contains(&from) {
        return None;
    }
    let mut dist: BTreeMap<CellId, u64> = BTreeMap::new();
    let mut pred: BTreeMap<CellId, (EdgeId, Option<CellId>)> = BTreeMap::new();
    let mut heap: BinaryHeap<Reverse<(u64, CellId)>> = BinaryHeap::new();
    dist.insert(from, 0);
    heap.push(Reverse((0, from)));
    search_blocked(chip, blocked, uncovered, &mut dist, &mut pred, &mut heap);
    // Choose the cheapest sink port deterministically.
    let mut best: Option<(u64, EdgeId, CellId)> = None;
    for port in chip.sink_ports() {
        let cell = chip.port_cell(port).ok()?;
        let Some(&d) = dist.get(&cell) else { continue };
        let total = d + 1;
        if best.as_ref().is_none_or(|&(c, _, _)| total < c) {
            best = Some((total, port, cell));
        }
    }
    let (cost, port, cell) = best?;
    let (mut cells, edges) = unwind_from(&pred, from, cell);
    cells.insert(0, from);
    Some((cost, port, cells, edges))
}

/// Dijkstra core avoiding a single cell.
fn search(
    chip: &ChipSpec,
    avoid: CellId,
    uncovered: &BTreeSet<EdgeId>,
    dist: &mut BTreeMap<CellId, u64>,
    pred: &mut BTreeMap<CellId, (EdgeId, Option<CellId>)>,
    heap: &mut BinaryHeap<Reverse<(u64, CellId)>>,
    goal: Option<CellId>,
) {
    while let Some(Reverse((d, cell))) = heap.pop() {
        if dist.get(&cell).is_some_and(|&best| d > best) {
            continue;
        }
        if goal == Some(cell) {
            return;
        }
        let Ok(incident) = chip.incident_edges(cell) else {
            return;
        };
        for edge in incident {
            if !matches!(
                chip.edge_class(edge),
                Ok(EdgeClass::Valve) | Ok(EdgeClass::Open)
            ) {
                continue;
            }
            let (x, y) = chip.cells_of_edge(edge);
            let other = if x == Some(cell) { y } else { x };
            let Some(next) = other else { continue };
            if next == avoid || !chip.is_fluid(next) {
                continue;
            }
            let nd = d + step_cost(chip, edge, uncovered);
            if dist.get(&next).is_none_or(|&old| nd < old) {
                dist.insert(next, nd);
                pred.insert(next, (edge, Some(cell)));
                heap.push(Reverse((nd, next)));
            }
        }
    }
}

/// Dijkstra core avoiding a set of cells.
fn search_blocked(
    chip: &ChipSpec,
    blocked: &BTreeSet<CellId>,
    uncovered: &BTreeSet<EdgeId>,
    dist: &mut BTreeMap<CellId, u64>,
    pred: &mut BTreeMap<CellId, (EdgeId, Option<CellId>)>,
    heap: &mut BinaryHeap<Reverse<(u64, CellId)>>,
) {
    while let Some(Reverse((d, cell))) = heap.pop() {
        if dist.get(&cell).is_some_and(|&best| d > best) {
            continue;
        }
        let Ok(incident) = chip.incident_edges(cell) else {
            return;
        };
        for edge in incident {
            if !matches!(
                chip.edge_class(edge),
                Ok(EdgeClass::Valve) | Ok(EdgeClass::Open)
            ) {
                continue;
            }
            let (x, y) = chip.cells_of_edge(edge);
            let other = if x == Some(cell) { y } else { x };
            let Some(next) = other else { continue };
            if blocked.contains(&next) || !chip.is_fluid(next) {
                continue;
            }
            let nd = d + step_cost(chip, edge, uncovered);
            if dist.get(&next).is_none_or(|&old| nd < old) {
                dist.insert(next, nd);
                pred.insert(next, (edge, Some(cell)));
                heap.push(Reverse((nd, next)));
            }
        }
    }
}

/// Rebuilds the walk ending at `goal` from a predecessor map rooted at a
/// port (the root's predecessor entry carries the port edge and no cell).
fn unwind(
    pred: &BTreeMap<CellId, (EdgeId, Option<CellId>)>,
    goal: CellId,
) -> (EdgeId, Vec<CellId>, Vec<EdgeId>) {
    let mut cells = vec![goal];
    let mut edges = Vec::new();
    let mut cursor = goal;
    loop {
        let (edge, prev) = pred[&cursor];
        match prev {
            Some(cell) => {
                edges.push(edge);
                cells.push(cell);
                cursor = cell;
            }
            None => {
                cells.reverse();
                edges.reverse();
                return (edge, cells, edges);
            }
        }
    }
}

/// Rebuilds the walk from `from` to `goal` from a predecessor map rooted at
/// `from`. The returned cells exclude `from` itself.
fn unwind_from(
    pred: &BTreeMap<CellId, (EdgeId, Option<CellId>)>,
    from: CellId,
    goal: CellId,
) -> (Vec<CellId>, Vec<EdgeId>) {
    let mut cells = Vec::new();
    let mut edges = Vec::new();
    let mut cursor = goal;
    while cursor != from {
        cells.push(cursor);
        let (edge, prev) = pred[&cursor];
        edges.push(edge);
        cursor = prev.expect("walk roots at `from`, which has no predecessor entry");
    }
    cells.reverse();
    edges.reverse();
    (cells, edges)
}
