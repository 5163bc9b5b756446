//! Two-level flow-path generation for large arrays.
//!
//! The chip is partitioned into square blocks (ragged at the edges). A
//! reduced chip — one cell per block, one edge per inter-block boundary —
//! is solved with the ordinary path generator; each top-level path is then
//! replicated enough times to push a crossing through every valve of every
//! boundary it traverses, per-block subpath problems with pinned entry and
//! exit edges cover the valves inside each block, and the subpaths are
//! stitched back into chip-level paths.
//!
//! The result satisfies the same contract as direct generation (simple
//! port-to-port paths, every valve covered) but usually needs more paths:
//! every chip-level path crosses each boundary on its route exactly once,
//! so a boundary carrying many valves forces that many replicas.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chip::{CellId, ChipBuilder, ChipError, ChipSpec, EdgeClass, EdgeId, Orientation};
use crate::flow::{
    encode, extract_paths, generate_flow_paths, FlowError, FlowGeneration, FlowPath,
    GenerateLimits, PathModelOptions, PathProblem, TerminalSpec,
};
use crate::ilp::{solve, SolveStatus, SolverConfig};

/// Most extra traversals the escalation loop may add before giving up on a
/// block whose subpath problem keeps coming back infeasible.
pub const ESCALATION_LIMIT: usize = 16;

/// Errors raised while planning, solving, or stitching block subproblems.
#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("block size must be at least 2, got {0}")]
    BlockSizeTooSmall(usize),
    #[error(
        "block ({row},{col}) still has no covering subpaths after {added} extra traversals"
    )]
    EscalationExhausted { row: usize, col: usize, added: usize },
    #[error("blocks {0:?} hold valves but no top-level traversal enters them")]
    UnvisitedValves(Vec<(usize, usize)>),
    #[error("reduced chip boundary edge {0} would carry both a source and a sink")]
    PortConflict(EdgeId),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("chip error: {0}")]
    Chip(#[from] ChipError),
}

/// A ceil-divided partition of the cell grid into `block_size`-sized square
/// blocks; the last row and column of blocks may be smaller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub block_size: usize,
    pub block_rows: usize,
    pub block_cols: usize,
}

impl BlockPartition {
    pub fn of(chip: &ChipSpec, block_size: usize) -> Result<Self, HierarchyError> {
        if block_size < 2 {
            return Err(HierarchyError::BlockSizeTooSmall(block_size));
        }
        Ok(BlockPartition {
            block_size,
            block_rows: chip.rows().div_ceil(block_size),
            block_cols: chip.cols().div_ceil(block_size),
        })
    }

    /// The block holding a cell.
    pub fn block_of(&self, cell: CellId) -> (usize, usize) {
        (cell.row / self.block_size, cell.col / self.block_size)
    }

    pub fn is_single_block(&self) -> bool {
        self.block_rows == 1 && self.block_cols == 1
    }

    /// Grid-row range of a block row.
    fn row_span(&self, chip: &ChipSpec, block_row: usize) -> std::ops::Range<usize> {
        let start = block_row * self.block_size;
        start..((start + self.block_size).min(chip.rows()))
    }

    /// Grid-column range of a block column.
    fn col_span(&self, chip: &ChipSpec, block_col: usize) -> std::ops::Range<usize> {
        let start = block_col * self.block_size;
        start..((start + self.block_size).min(chip.cols()))
    }

    /// The fluid cells of one block.
    pub fn fluid_cells(
        &self,
        chip: &ChipSpec,
        block: (usize, usize),
    ) -> BTreeSet<CellId> {
        let mut cells = BTreeSet::new();
        for row in self.row_span(chip, block.0) {
            for col in self.col_span(chip, block.1) {
                let cell = CellId::new(row, col);
                if chip.is_fluid(cell) {
                    cells.insert(cell);
                }
            }
        }
        cells
    }

    /// Chip edges crossing the boundary between two adjacent blocks, in
    /// canonical order, any class.
    pub fn crossing_edges(
        &self,
        chip: &ChipSpec,
        from: (usize, usize),
        to: (usize, usize),
    ) -> Vec<EdgeId> {
        let (a, b) = if from <= to { (from, to) } else { (to, from) };
        let mut edges = Vec::new();
        if a.0 == b.0 && a.1 + 1 == b.1 {
            let col = b.1 * self.block_size;
            for row in self.row_span(chip, a.0) {
                edges.push(EdgeId::vertical(row, col));
            }
        } else if a.1 == b.1 && a.0 + 1 == b.0 {
            let row = b.0 * self.block_size;
            for col in self.col_span(chip, a.1) {
                edges.push(EdgeId::horizontal(row, col));
            }
        }
        edges
    }

    /// The valves strictly inside one block (both cells in the block).
    pub fn interior_valves(&self, chip: &ChipSpec, block: (usize, usize)) -> BTreeSet<EdgeId> {
        let cells = self.fluid_cells(chip, block);
        let mut valves = BTreeSet::new();
        for &cell in &cells {
            for edge in chip.incident_edges(cell).expect("cell is in the grid") {
                if !matches!(chip.edge_class(edge), Ok(EdgeClass::Valve)) {
                    continue;
                }
                let (a, b) = chip.cells_of_edge(edge);
                let a_in = a.is_some_and(|c| cells.contains(&c));
                let b_in = b.is_some_and(|c| cells.contains(&c));
                if a_in && b_in {
                    valves.insert(edge);
                }
            }
        }
        valves
    }
}

/// One traversal step of a top-level path: the boundary it crosses and the
/// chip edges assigned to carry its replicas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossingStep {
    /// Block left behind.
    pub from: (usize, usize),
    /// Block entered.
    pub to: (usize, usize),
    /// Chip edges this traversal's replicas cross through, in replica
    /// order (replica `j` uses index `j % len`). Never empty.
    pub edges: Vec<EdgeId>,
}

/// The hierarchical plan: the reduced chip, the top-level solution on it,
/// and per-path block routes with crossing assignments.
#[derive(Debug)]
pub struct SubpathPlan {
    pub reduced: ChipSpec,
    pub top: FlowGeneration,
    /// Per top path: the blocks it visits, in order.
    pub block_routes: Vec<Vec<(usize, usize)>>,
    /// Per top path: its boundary crossings (one fewer than blocks).
    pub crossings: Vec<Vec<CrossingStep>>,
    /// Per top path: how many chip-level replicas it expands into — the
    /// longest crossing-edge list on its route.
    pub multiplicity: Vec<usize>,
}

/// Where a chip port lands on the reduced chip.
fn reduced_port_edge(
    chip: &ChipSpec,
    partition: &BlockPartition,
    port: EdgeId,
) -> Result<EdgeId, HierarchyError> {
    let cell = chip.port_cell(port)?;
    let (block_row, block_col) = partition.block_of(cell);
    Ok(match port.orientation {
        Orientation::Vertical if port.col == 0 => EdgeId::vertical(block_row, 0),
        Orientation::Vertical => EdgeId::vertical(block_row, partition.block_cols),
        Orientation::Horizontal if port.row == 0 => EdgeId::horizontal(0, block_col),
        Orientation::Horizontal => EdgeId::horizontal(partition.block_rows, block_col),
    })
}

/// Builds the reduced chip — one cell per block — and classifies each
/// inter-block boundary: a valve if it carries at least one valve, open if
/// it carries only unvalved channels, and a fixed wall otherwise. Blocks
/// with no fluid cells become obstacles.
fn reduce_chip(chip: &ChipSpec, partition: &BlockPartition) -> Result<ChipSpec, HierarchyError> {
    let mut builder = ChipBuilder::new(partition.block_rows, partition.block_cols);
    for block_row in 0..partition.block_rows {
        for block_col in 0..partition.block_cols {
            if partition.fluid_cells(chip, (block_row, block_col)).is_empty() {
                builder = builder.obstacle(block_row, block_col);
            }
        }
    }
    for block_row in 0..partition.block_rows {
        for block_col in 0..partition.block_cols {
            for (neighbor, reduced_edge) in [
                (
                    (block_row, block_col + 1),
                    EdgeId::vertical(block_row, block_col + 1),
                ),
                (
                    (block_row + 1, block_col),
                    EdgeId::horizontal(block_row + 1, block_col),
                ),
            ] {
                if neighbor.0 >= partition.block_rows || neighbor.1 >= partition.block_cols {
                    continue;
                }
                let mut has_valve = false;
                let mut has_open = false;
                for edge in partition.crossing_edges(chip, (block_row, block_col), neighbor) {
                    match chip.edge_class(edge) {
                        Ok(EdgeClass::Valve) => has_valve = true,
                        Ok(EdgeClass::Open) => has_open = true,
                        _ => {}
                    }
                }
                if has_valve {
                    // Builder default: interior edges are valves.
                } else if has_open {
                    builder = builder.open_edge(reduced_edge);
                } else {
                    builder = builder.closed_edge(reduced_edge);
                }
            }
        }
    }
    let mut sources: BTreeSet<EdgeId> = BTreeSet::new();
    let mut sinks: BTreeSet<EdgeId> = BTreeSet::new();
    for port in chip.source_ports() {
        sources.insert(reduced_port_edge(chip, partition, port)?);
    }
    for port in chip.sink_ports() {
        sinks.insert(reduced_port_edge(chip, partition, port)?);
    }
    if let Some(&edge) = sources.intersection(&sinks).next() {
        return Err(HierarchyError::PortConflict(edge));
    }
    for edge in sources {
        builder = builder.source(edge);
    }
    for edge in sinks {
        builder = builder.sink(edge);
    }
    Ok(builder.finish()?)
}

/// Solves the reduced chip and assigns every crossing valve to a top-level
/// traversal: the valves of each boundary are split evenly (in canonical
/// order) among the traversals crossing it, and a path's multiplicity is
/// the largest share on its route.
pub fn plan_top_level(
    chip: &ChipSpec,
    partition: &BlockPartition,
    options: PathModelOptions,
    limits: &GenerateLimits,
) -> Result<SubpathPlan, HierarchyError> {
    let reduced = reduce_chip(chip, partition)?;
    let top = generate_flow_paths(&reduced, options, limits)?;

    // Walk each top path into block routes and raw boundary steps.
    let mut block_routes: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut raw_steps: Vec<Vec<((usize, usize), (usize, usize))>> = Vec::new();
    for path in &top.paths {
        let route: Vec<(usize, usize)> = path.cells.iter().map(|c| (c.row, c.col)).collect();
        let steps: Vec<_> = route.windows(2).map(|w| (w[0], w[1])).collect();
        block_routes.push(route);
        raw_steps.push(steps);
    }

    // Group traversals by boundary so shared boundaries split their valves.
    let mut boundary_users: BTreeMap<((usize, usize), (usize, usize)), Vec<(usize, usize)>> =
        BTreeMap::new();
    for (path_index, steps) in raw_steps.iter().enumerate() {
        for (step_index, &(from, to)) in steps.iter().enumerate() {
            let key = if from <= to { (from, to) } else { (to, from) };
            boundary_users
                .entry(key)
                .or_default()
                .push((path_index, step_index));
        }
    }
    let mut assigned: BTreeMap<(usize, usize), Vec<EdgeId>> = BTreeMap::new();
    for (&(a, b), users) in &boundary_users {
        let valves: Vec<EdgeId> = partition
            .crossing_edges(chip, a, b)
            .into_iter()
            .filter(|&e| matches!(chip.edge_class(e), Ok(EdgeClass::Valve)))
            .collect();
        let open: Option<EdgeId> = partition
            .crossing_edges(chip, a, b)
            .into_iter()
            .find(|&e| matches!(chip.edge_class(e), Ok(EdgeClass::Open)));
        let total = valves.len();
        let share = total / users.len();
        let extra = total % users.len();
        let mut cursor = 0usize;
        for (rank, &user) in users.iter().enumerate() {
            let take = share + usize::from(rank < extra);
            let chunk: Vec<EdgeId> = if take > 0 {
                let chunk = valves[cursor..cursor + take].to_vec();
                cursor += take;
                chunk
            } else if total > 0 {
                // More traversals than valves: latecomers reuse one.
                vec![valves[rank % total]]
            } else {
                // An unvalved boundary still needs a channel to cross.
                vec![open.expect("a traversed boundary has an open edge")]
            };
            assigned.insert(user, chunk);
        }
    }

    let mut crossings: Vec<Vec<CrossingStep>> = Vec::new();
    let mut multiplicity: Vec<usize> = Vec::new();
    for (path_index, steps) in raw_steps.iter().enumerate() {
        let mut path_steps = Vec::new();
        let mut replicas = 1usize;
        for (step_index, &(from, to)) in steps.iter().enumerate() {
            let edges = assigned[&(path_index, step_index)].clone();
            replicas = replicas.max(edges.len());
            path_steps.push(CrossingStep { from, to, edges });
        }
        crossings.push(path_steps);
        multiplicity.push(replicas);
    }

    // Every block that owns valves must see at least one traversal;
    // otherwise its valves can never appear on a stitched path.
    let mut visited: BTreeSet<(usize, usize)> = BTreeSet::new();
    for route in &block_routes {
        visited.extend(route.iter().copied());
    }
    let mut orphaned = Vec::new();
    for block_row in 0..partition.block_rows {
        for block_col in 0..partition.block_cols {
            let block = (block_row, block_col);
            if !visited.contains(&block)
                && !partition.interior_valves(chip, block).is_empty()
            {
                orphaned.push(block);
            }
        }
    }
    if !orphaned.is_empty() {
        return Err(HierarchyError::UnvisitedValves(orphaned));
    }

    Ok(SubpathPlan {
        reduced,
        top,
        block_routes,
        crossings,
        multiplicity,
    })
}

/// The subpaths found for one block, slot by slot.
#[derive(Debug)]
pub struct BlockSolution {
    pub subpaths: Vec<FlowPath>,
    pub status: SolveStatus,
    pub nodes: u64,
}

/// Solves one block: paths confined to the block's cells, one per pinned
/// entry/exit pair, covering every valve interior to the block. Boundary
/// valves need no coverage row — each one is itself some pair's pinned
/// terminal, so it lies on the stitched path by construction.
pub fn solve_block(
    chip: &ChipSpec,
    cells: &BTreeSet<CellId>,
    coverage: &BTreeSet<EdgeId>,
    pairs: &[(EdgeId, EdgeId)],
    options: PathModelOptions,
    limits: &GenerateLimits,
) -> Result<BlockSolution, HierarchyError> {
    let problem = PathProblem {
        chip,
        cells: cells.clone(),
        coverage: coverage.clone(),
        terminals: TerminalSpec::Pinned(pairs.to_vec()),
        n_p: pairs.len(),
        options,
    };
    let encoding = encode(&problem)?;
    let config = SolverConfig {
        node_limit: Some(limits.final_nodes),
        time_limit: limits.time_limit,
        warm_start: None,
    };
    let outcome = solve(&encoding.model, &config).map_err(FlowError::from)?;
    let subpaths = match &outcome.values {
        Some(values) => extract_paths(&problem, &encoding, values)?,
        None => Vec::new(),
    };
    Ok(BlockSolution {
        subpaths,
        status: outcome.status,
        nodes: outcome.nodes,
    })
}

/// One chip-level replica of a top path: the block-local slots it chains,
/// as `(block, slot index)`.
type ReplicaChain = Vec<((usize, usize), usize)>;

/// Joins block-local subpaths into one chip-level path; consecutive
/// subpaths share their crossing edge, which is kept once.
pub fn stitch(chain: &[&FlowPath]) -> FlowPath {
    let mut edges: Vec<EdgeId> = Vec::new();
    let mut cells: Vec<CellId> = Vec::new();
    for (index, subpath) in chain.iter().enumerate() {
        let skip = usize::from(index > 0);
        edges.extend(subpath.edges.iter().skip(skip).copied());
        cells.extend(subpath.cells.iter().copied());
    }
    FlowPath { edges, cells }
}

/// Two-level path generation: plan on the reduced chip, cover each block
/// under pinned crossings, and stitch. A degenerate partition (one block)
/// falls through to direct generation. When a block's subpath problem is
/// infeasible — its interior needs more passes than the plan provides —
/// the smallest-multiplicity path serving it gains a replica and all
/// blocks are re-solved, up to [`ESCALATION_LIMIT`] extra traversals.
pub fn generate_hierarchical(
    chip: &ChipSpec,
    block_size: usize,
    options: PathModelOptions,
    limits: &GenerateLimits,
) -> Result<FlowGeneration, HierarchyError> {
    let partition = BlockPartition::of(chip, block_size)?;
    if partition.is_single_block() {
        return Ok(generate_flow_paths(chip, options, limits)?);
    }
    let plan = plan_top_level(chip, &partition, options, limits)?;
    let mut multiplicity = plan.multiplicity.clone();
    let mut total_nodes = plan.top.nodes;
    let mut worst = plan.top.status;
    let mut added = 0usize;

    loop {
        // Lay out every replica's pinned chain and collect per-block pairs.
        let mut block_pairs: BTreeMap<(usize, usize), Vec<(EdgeId, EdgeId)>> = BTreeMap::new();
        let mut block_serving_paths: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        let mut chains: Vec<ReplicaChain> = Vec::new();
        for (path_index, route) in plan.block_routes.iter().enumerate() {
            let steps = &plan.crossings[path_index];
            let entry_ports = ports_for(&plan.reduced, chip, &partition, plan.top.paths
                [path_index]
                .edges
                .first()
                .copied()
                .expect("paths have edges"), true);
            let exit_ports = ports_for(&plan.reduced, chip, &partition, plan.top.paths
                [path_index]
                .edges
                .last()
                .copied()
                .expect("paths have edges"), false);
            for replica in 0..multiplicity[path_index] {
                let mut chain: ReplicaChain = Vec::new();
                let mut entry = entry_ports[replica % entry_ports.len()];
                for (block_pos, &block) in route.iter().enumerate() {
                    let exit = if block_pos < steps.len() {
                        let edges = &steps[block_pos].edges;
                        edges[replica % edges.len()]
                    } else {
                        exit_ports[replica % exit_ports.len()]
                    };
                    let pairs = block_pairs.entry(block).or_default();
                    chain.push((block, pairs.len()));
                    pairs.push((entry, exit));
                    block_serving_paths
                        .entry(block)
                        .or_default()
                        .insert(path_index);
                    entry = exit;
                }
                chains.push(chain);
            }
        }

        // Solve every visited block once, all its pairs in one model.
        let mut solutions: BTreeMap<(usize, usize), BlockSolution> = BTreeMap::new();
        let mut stuck: Option<(usize, usize)> = None;
        for (&block, pairs) in &block_pairs {
            let cells = partition.fluid_cells(chip, block);
            let coverage = partition.interior_valves(chip, block);
            let solution = solve_block(chip, &cells, &coverage, pairs, options, limits)?;
            total_nodes += solution.nodes;
            match solution.status {
                SolveStatus::Optimal | SolveStatus::TimeoutWithIncumbent => {
                    if solution.status == SolveStatus::TimeoutWithIncumbent {
                        worst = SolveStatus::TimeoutWithIncumbent;
                    }
                    solutions.insert(block, solution);
                }
                SolveStatus::Infeasible | SolveStatus::TimeoutNoIncumbent => {
                    stuck = Some(block);
                    break;
                }
            }
        }
        if let Some(block) = stuck {
            if added >= ESCALATION_LIMIT {
                return Err(HierarchyError::EscalationExhausted {
                    row: block.0,
                    col: block.1,
                    added,
                });
            }
            // Another pass through this block may unlock coverage: give
            // the thinnest path serving it one more replica and re-plan.
            let &path_index = block_serving_paths[&block]
                .iter()
                .min_by_key(|&&p| (multiplicity[p], p))
                .expect("a solved block has a serving path");
            multiplicity[path_index] += 1;
            added += 1;
            continue;
        }

        // Stitch the chains, drop duplicate chip-level paths, and check
        // the family end to end.
        let mut paths: Vec<FlowPath> = Vec::new();
        let mut seen: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
        for chain in &chains {
            let parts: Vec<&FlowPath> = chain
                .iter()
                .map(|&(block, slot)| &solutions[&block].subpaths[slot])
                .collect();
            let path = stitch(&parts);
            if seen.insert(path.edges.clone()) {
                paths.push(path);
            }
        }
        let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
        for path in &paths {
            path.validate(chip).map_err(HierarchyError::Flow)?;
            covered.extend(path.valve_set(chip));
        }
        if let Some(valve) = chip.valves().into_iter().find(|v| !covered.contains(v)) {
            return Err(HierarchyError::Flow(FlowError::Structure(format!(
                "stitched family misses valve {valve}"
            ))));
        }
        let budget = paths.len();
        return Ok(FlowGeneration {
            paths,
            status: worst,
            nodes: total_nodes,
            budget,
        });
    }
}

/// The chip ports behind one reduced port edge, in canonical order.
fn ports_for(
    reduced: &ChipSpec,
    chip: &ChipSpec,
    partition: &BlockPartition,
    reduced_edge: EdgeId,
    source: bool,
) -> Vec<EdgeId> {
    debug_assert!(reduced.edge_in_lattice(reduced_edge));
    let ports = if source {
        chip.source_ports()
    } else {
        chip.sink_ports()
    };
    ports
        .into_iter()
        .filter(|&port| {
            reduced_port_edge(chip, partition, port).is_ok_and(|e| e == reduced_edge)
        })
        .collect()
}
