//! Flow-path generation.
//!
//! A flow vector opens exactly the valves of one source-to-sink path, so a
//! valve stuck closed on that path kills the expected pressure at the sink.
//! A family of paths whose union touches every valve therefore detects every
//! single stuck-closed fault. This module builds an integer program whose
//! feasible points are families of up to `n_p` simple source-to-sink paths
//! covering every valve, minimizes the number of paths actually used, and
//! extracts the paths from a solution.
//!
//! The encoding, per path slot `m`: a use indicator `p{m}`, a binary `c` per
//! region cell, a binary `v` per usable edge, and a bounded integer flow `f`
//! per usable edge. Degree rows force every used cell to touch exactly two
//! used edges, terminal rows pin the endpoints, and conservation rows make
//! each used cell absorb one unit of flow, which rules out closed loops
//! disconnected from the path: a loop would have to absorb flow it never
//! receives. The same encoder serves whole-chip solves (paths run port to
//! port) and region solves (paths are pinned to cross specific edges), which
//! is what the block-decomposition layer needs.

pub mod heuristic;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use thiserror::Error;

use crate::chip::{CellId, ChipError, ChipSpec, EdgeClass, EdgeId, Orientation};
use crate::ilp::{
    solve, IlpError, IlpModel, Relation, SolveOutcome, SolveStatus, SolverConfig, VarId,
};

fn fmt_edges(edges: &[EdgeId]) -> String {
    edges
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Errors raised while encoding, solving, or extracting path families.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("chip has no source port or no sink port")]
    NoPorts,
    #[error("no source-to-sink path can pass through: {}", fmt_edges(.0))]
    UncoverableValves(Vec<EdgeId>),
    #[error("path slot {path_index} contains a closed loop disconnected from its path")]
    DisjointCycle { path_index: usize },
    #[error("path structure violation: {0}")]
    Structure(String),
    #[error("invalid pinned terminal: {0}")]
    PinnedTerminal(String),
    #[error("no covering path family within {tried} path slots")]
    BudgetExhausted { tried: usize },
    #[error("solver error: {0}")]
    Ilp(#[from] IlpError),
    #[error("chip error: {0}")]
    Chip(#[from] ChipError),
}

/// Tuning knobs for the path model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PathModelOptions {
    /// Replace the per-edge `v <= p` linking rows with one aggregate row
    /// `sum(v) <= M * p` per slot: far fewer rows, weaker propagation.
    pub aggregate_linking: bool,
}

/// Where the paths of a model start and end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminalSpec {
    /// Each used path enters through any source port and leaves through any
    /// sink port; unused slots stay empty.
    Ports,
    /// Slot `m` crosses into the region through `pairs[m].0` and out through
    /// `pairs[m].1`; every slot is used. The pinned edges must sit on the
    /// region boundary (exactly one endpoint cell inside).
    Pinned(Vec<(EdgeId, EdgeId)>),
}

/// One path-family problem: a region of cells, the valves that must be
/// covered, terminal rules, and the number of path slots.
#[derive(Clone, Debug)]
pub struct PathProblem<'a> {
    pub chip: &'a ChipSpec,
    /// Cells the paths may visit. Must all be fluid.
    pub cells: BTreeSet<CellId>,
    /// Valves that must lie on at least one path.
    pub coverage: BTreeSet<EdgeId>,
    pub terminals: TerminalSpec,
    /// Number of path slots in the model.
    pub n_p: usize,
    pub options: PathModelOptions,
}

impl<'a> PathProblem<'a> {
    /// The standard whole-chip problem: all fluid cells, all valves, port
    /// terminals.
    pub fn whole_chip(chip: &'a ChipSpec, n_p: usize) -> Self {
        PathProblem {
            chip,
            cells: chip.fluid_cells().collect(),
            coverage: chip.valves().into_iter().collect(),
            terminals: TerminalSpec::Ports,
            n_p,
            options: PathModelOptions::default(),
        }
    }
}

/// The built model plus the variable layout needed to read solutions back.
#[derive(Debug)]
pub struct PathEncoding {
    pub n_p: usize,
    pub model: IlpModel,
    /// Slot-use indicators, one per slot.
    pub p: Vec<VarId>,
    /// Per slot: cell-use binaries.
    pub c: Vec<BTreeMap<CellId, VarId>>,
    /// Per slot: edge-use binaries.
    pub v: Vec<BTreeMap<EdgeId, VarId>>,
    /// Per slot: signed edge flows.
    pub f: Vec<BTreeMap<EdgeId, VarId>>,
}

fn edge_tag(edge: EdgeId) -> String {
    let o = match edge.orientation {
        Orientation::Horizontal => 'h',
        Orientation::Vertical => 'v',
    };
    format!("{o}_{}_{}", edge.row, edge.col)
}

/// Builds the whole-chip path model with `n_p` slots.
pub fn build_path_model(
    chip: &ChipSpec,
    n_p: usize,
    options: PathModelOptions,
) -> Result<PathEncoding, FlowError> {
    let mut problem = PathProblem::whole_chip(chip, n_p);
    problem.options = options;
    encode(&problem)
}

/// Builds the integer program for a path problem.
pub fn encode(problem: &PathProblem) -> Result<PathEncoding, FlowError> {
    let chip = problem.chip;
    if problem.n_p == 0 {
        return Err(FlowError::Structure(
            "a path model needs at least one slot".into(),
        ));
    }
    if problem.cells.is_empty() {
        return Err(FlowError::Structure("the region has no cells".into()));
    }
    for &cell in &problem.cells {
        if !chip.is_fluid(cell) {
            return Err(FlowError::Structure(format!(
                "region cell {cell} is not a fluid cell"
            )));
        }
    }
    for &valve in &problem.coverage {
        if !matches!(chip.edge_class(valve)?, EdgeClass::Valve) {
            return Err(FlowError::Structure(format!(
                "coverage edge {valve} is not a valve"
            )));
        }
    }

    // Classify the edges around the region. Edges fully inside become shared
    // variables; port edges are terminals in `Ports` mode; everything else
    // that sticks out of the region is usable only as a pinned terminal.
    let mut interior: BTreeSet<EdgeId> = BTreeSet::new();
    let mut sources: Vec<EdgeId> = Vec::new();
    let mut sinks: Vec<EdgeId> = Vec::new();
    for &cell in &problem.cells {
        for edge in chip.incident_edges(cell)? {
            match chip.edge_class(edge)? {
                EdgeClass::Closed => {}
                EdgeClass::PortSource => {
                    if !sources.contains(&edge) {
                        sources.push(edge);
                    }
                }
                EdgeClass::PortSink => {
                    if !sinks.contains(&edge) {
                        sinks.push(edge);
                    }
                }
                EdgeClass::Valve | EdgeClass::Open => {
                    let (a, b) = chip.cells_of_edge(edge);
                    let a_in = a.is_some_and(|c| problem.cells.contains(&c));
                    let b_in = b.is_some_and(|c| problem.cells.contains(&c));
                    if a_in && b_in {
                        interior.insert(edge);
                    }
                }
            }
        }
    }
    sources.sort();
    sinks.sort();

    // Per-slot terminal extras.
    let pinned = match &problem.terminals {
        TerminalSpec::Ports => {
            if sources.is_empty() || sinks.is_empty() {
                return Err(FlowError::NoPorts);
            }
            None
        }
        TerminalSpec::Pinned(pairs) => {
            if pairs.len() != problem.n_p {
                return Err(FlowError::PinnedTerminal(format!(
                    "{} terminal pairs for {} path slots",
                    pairs.len(),
                    problem.n_p
                )));
            }
            for &(entry, exit) in pairs {
                if entry == exit {
                    return Err(FlowError::PinnedTerminal(format!(
                        "entry and exit must differ, both are {entry}"
                    )));
                }
                for edge in [entry, exit] {
                    if matches!(chip.edge_class(edge)?, EdgeClass::Closed) {
                        return Err(FlowError::PinnedTerminal(format!(
                            "terminal {edge} is permanently closed"
                        )));
                    }
                    let (a, b) = chip.cells_of_edge(edge);
                    let a_in = a.is_some_and(|c| problem.cells.contains(&c));
                    let b_in = b.is_some_and(|c| problem.cells.contains(&c));
                    if a_in && b_in {
                        return Err(FlowError::PinnedTerminal(format!(
                            "terminal {edge} lies inside the region"
                        )));
                    }
                    if !a_in && !b_in {
                        return Err(FlowError::PinnedTerminal(format!(
                            "terminal {edge} does not touch the region"
                        )));
                    }
                }
            }
            Some(pairs)
        }
    };

    // The flow big-M: one unit per visited cell plus slack. The whole-chip
    // bound is fixed by the grid so models for the same chip are stable.
    let whole_chip = problem.cells.len() == chip.fluid_cells().count();
    let m_f: i64 = if whole_chip {
        (chip.rows() * chip.cols() + 1) as i64
    } else {
        (problem.cells.len() + 1) as i64
    };

    let cells: Vec<CellId> = problem.cells.iter().copied().collect();
    let slot_edges: Vec<Vec<EdgeId>> = (0..problem.n_p)
        .map(|m| {
            let mut set = interior.clone();
            match pinned {
                None => {
                    set.extend(sources.iter().copied());
                    set.extend(sinks.iter().copied());
                }
                Some(pairs) => {
                    set.insert(pairs[m].0);
                    set.insert(pairs[m].1);
                }
            }
            set.into_iter().collect()
        })
        .collect();

    // Variables: all slot indicators first, then per slot the cell binaries
    // (row-major), edge binaries (canonical edge order), and edge flows.
    let mut model = IlpModel::new();
    let p: Vec<VarId> = (0..problem.n_p)
        .map(|m| match pinned {
            None => model.add_binary(format!("p{m}")),
            Some(_) => model.add_var(format!("p{m}"), 1, 1),
        })
        .collect();
    let mut c_vars: Vec<BTreeMap<CellId, VarId>> = Vec::with_capacity(problem.n_p);
    let mut v_vars: Vec<BTreeMap<EdgeId, VarId>> = Vec::with_capacity(problem.n_p);
    let mut f_vars: Vec<BTreeMap<EdgeId, VarId>> = Vec::with_capacity(problem.n_p);
    for m in 0..problem.n_p {
        let mut cm = BTreeMap::new();
        for &cell in &cells {
            cm.insert(
                cell,
                model.add_binary(format!("c{m}_{}_{}", cell.row, cell.col)),
            );
        }
        c_vars.push(cm);
        let mut vm = BTreeMap::new();
        for &edge in &slot_edges[m] {
            let name = format!("v{m}_{}", edge_tag(edge));
            let var = match pinned {
                Some(pairs) if edge == pairs[m].0 || edge == pairs[m].1 => {
                    model.add_var(name, 1, 1)
                }
                _ => model.add_binary(name),
            };
            vm.insert(edge, var);
        }
        v_vars.push(vm);
        let mut fm = BTreeMap::new();
        for &edge in &slot_edges[m] {
            fm.insert(
                edge,
                model.add_var(format!("f{m}_{}", edge_tag(edge)), -m_f, m_f),
            );
        }
        f_vars.push(fm);
    }

    for m in 0..problem.n_p {
        // Degree: a used cell touches exactly two used edges.
        for &cell in &cells {
            let mut terms: Vec<(i64, VarId)> = Vec::new();
            for edge in chip.incident_edges(cell)? {
                if let Some(&var) = v_vars[m].get(&edge) {
                    terms.push((1, var));
                }
            }
            terms.push((-2, c_vars[m][&cell]));
            model.add_constraint(
                format!("deg{m}_{}_{}", cell.row, cell.col),
                terms,
                Relation::Eq,
                0,
            );
        }
        // Terminals: a used path enters once and leaves once.
        if pinned.is_none() {
            let mut src_terms: Vec<(i64, VarId)> =
                sources.iter().map(|e| (1, v_vars[m][e])).collect();
            src_terms.push((-1, p[m]));
            model.add_constraint(format!("src{m}"), src_terms, Relation::Eq, 0);
            let mut snk_terms: Vec<(i64, VarId)> =
                sinks.iter().map(|e| (1, v_vars[m][e])).collect();
            snk_terms.push((-1, p[m]));
            model.add_constraint(format!("snk{m}"), snk_terms, Relation::Eq, 0);
        }
        // Flow only on used edges.
        for &edge in &slot_edges[m] {
            let f = f_vars[m][&edge];
            let v = v_vars[m][&edge];
            model.add_constraint(
                format!("fub{m}_{}", edge_tag(edge)),
                vec![(1, f), (-m_f, v)],
                Relation::Le,
                0,
            );
            model.add_constraint(
                format!("flb{m}_{}", edge_tag(edge)),
                vec![(1, f), (m_f, v)],
                Relation::Ge,
                0,
            );
        }
        // Conservation: every used cell absorbs exactly one unit, so any
        // loop disconnected from the terminals starves and is infeasible.
        for &cell in &cells {
            let mut terms: Vec<(i64, VarId)> = Vec::new();
            for edge in chip.incident_edges(cell)? {
                if let Some(&var) = f_vars[m].get(&edge) {
                    terms.push((chip.flow_sign(edge, cell)?, var));
                }
            }
            terms.push((-1, c_vars[m][&cell]));
            model.add_constraint(
                format!("con{m}_{}_{}", cell.row, cell.col),
                terms,
                Relation::Eq,
                0,
            );
        }
        // Linking: an unused slot must stay empty.
        if pinned.is_none() {
            if problem.options.aggregate_linking {
                let m_v = (slot_edges[m].len() + 1) as i64;
                let mut terms: Vec<(i64, VarId)> =
                    slot_edges[m].iter().map(|e| (1, v_vars[m][e])).collect();
                terms.push((-m_v, p[m]));
                model.add_constraint(format!("lnk{m}"), terms, Relation::Le, 0);
            } else {
                for &edge in &slot_edges[m] {
                    model.add_constraint(
                        format!("lnk{m}_{}", edge_tag(edge)),
                        vec![(1, v_vars[m][&edge]), (-1, p[m])],
                        Relation::Le,
                        0,
                    );
                }
            }
        }
    }
    // Symmetry: used slots come first, so permuted duplicates are cut off.
    if pinned.is_none() {
        for m in 0..problem.n_p.saturating_sub(1) {
            model.add_constraint(
                format!("sym{m}"),
                vec![(1, p[m]), (-1, p[m + 1])],
                Relation::Ge,
                0,
            );
        }
    }
    // Coverage: every listed valve lies on at least one path.
    let mut missing: Vec<EdgeId> = Vec::new();
    for &valve in &problem.coverage {
        let terms: Vec<(i64, VarId)> = (0..problem.n_p)
            .filter_map(|m| v_vars[m].get(&valve).map(|&var| (1, var)))
            .collect();
        if terms.is_empty() {
            missing.push(valve);
            continue;
        }
        model.add_constraint(format!("cov_{}", edge_tag(valve)), terms, Relation::Ge, 1);
    }
    if !missing.is_empty() {
        return Err(FlowError::UncoverableValves(missing));
    }
    model.set_objective(p.iter().map(|&var| (1, var)).collect());

    Ok(PathEncoding {
        n_p: problem.n_p,
        model,
        p,
        c: c_vars,
        v: v_vars,
        f: f_vars,
    })
}

/// One extracted path: the edge walk terminal-to-terminal and the cells it
/// visits, in order. There is always exactly one more edge than cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPath {
    pub edges: Vec<EdgeId>,
    pub cells: Vec<CellId>,
}

impl FlowPath {
    /// The valves this path opens.
    pub fn valve_set(&self, chip: &ChipSpec) -> BTreeSet<EdgeId> {
        self.edges
            .iter()
            .copied()
            .filter(|&e| matches!(chip.edge_class(e), Ok(EdgeClass::Valve)))
            .collect()
    }

    /// Checks that this is a simple source-to-sink path on the chip.
    pub fn validate(&self, chip: &ChipSpec) -> Result<(), FlowError> {
        if self.cells.is_empty() || self.edges.len() != self.cells.len() + 1 {
            return Err(FlowError::Structure(format!(
                "a path needs one more edge than cells, got {} edges and {} cells",
                self.edges.len(),
                self.cells.len()
            )));
        }
        let edge_set: BTreeSet<EdgeId> = self.edges.iter().copied().collect();
        if edge_set.len() != self.edges.len() {
            return Err(FlowError::Structure("path repeats an edge".into()));
        }
        let cell_set: BTreeSet<CellId> = self.cells.iter().copied().collect();
        if cell_set.len() != self.cells.len() {
            return Err(FlowError::Structure("path revisits a cell".into()));
        }
        let first = self.edges[0];
        let last = *self.edges.last().unwrap();
        if !matches!(chip.edge_class(first)?, EdgeClass::PortSource) {
            return Err(FlowError::Structure(format!(
                "path must start at a source port, starts at {first}"
            )));
        }
        if !matches!(chip.edge_class(last)?, EdgeClass::PortSink) {
            return Err(FlowError::Structure(format!(
                "path must end at a sink port, ends at {last}"
            )));
        }
        if chip.port_cell(first)? != self.cells[0] {
            return Err(FlowError::Structure(format!(
                "port {first} does not open into the first cell"
            )));
        }
        if chip.port_cell(last)? != *self.cells.last().unwrap() {
            return Err(FlowError::Structure(format!(
                "port {last} does not open into the last cell"
            )));
        }
        for (i, &edge) in self.edges.iter().enumerate().skip(1) {
            if i == self.edges.len() - 1 {
                break;
            }
            if !matches!(chip.edge_class(edge)?, EdgeClass::Valve | EdgeClass::Open) {
                return Err(FlowError::Structure(format!(
                    "path edge {edge} is not traversable"
                )));
            }
            let (a, b) = chip.cells_of_edge(edge);
            let want = (Some(self.cells[i - 1]), Some(self.cells[i]));
            let rev = (Some(self.cells[i]), Some(self.cells[i - 1]));
            if (a, b) != want && (a, b) != rev {
                return Err(FlowError::Structure(format!(
                    "edge {edge} does not join consecutive path cells"
                )));
            }
        }
        for &cell in &self.cells {
            if !chip.is_fluid(cell) {
                return Err(FlowError::Structure(format!(
                    "path visits non-fluid cell {cell}"
                )));
            }
        }
        Ok(())
    }
}

/// Reads the used path out of every active slot of a solution.
pub fn extract_paths(
    problem: &PathProblem,
    encoding: &PathEncoding,
    values: &[i64],
) -> Result<Vec<FlowPath>, FlowError> {
    let chip = problem.chip;
    if values.len() != encoding.model.variables().len() {
        return Err(FlowError::Structure(format!(
            "solution has {} values for {} variables",
            values.len(),
            encoding.model.variables().len()
        )));
    }
    let mut paths = Vec::new();
    for m in 0..encoding.n_p {
        if values[encoding.p[m].0] == 0 {
            continue;
        }
        let mut edges_left: BTreeSet<EdgeId> = encoding.v[m]
            .iter()
            .filter(|(_, var)| values[var.0] != 0)
            .map(|(&e, _)| e)
            .collect();
        let mut cells_left: BTreeSet<CellId> = encoding.c[m]
            .iter()
            .filter(|(_, var)| values[var.0] != 0)
            .map(|(&c, _)| c)
            .collect();
        let start = match &problem.terminals {
            TerminalSpec::Ports => edges_left
                .iter()
                .copied()
                .find(|&e| matches!(chip.edge_class(e), Ok(EdgeClass::PortSource)))
                .ok_or_else(|| {
                    FlowError::Structure(format!("slot {m} uses no source port"))
                })?,
            TerminalSpec::Pinned(pairs) => pairs[m].0,
        };
        if !edges_left.remove(&start) {
            return Err(FlowError::Structure(format!(
                "slot {m} does not use its entry edge {start}"
            )));
        }
        let (a, b) = chip.cells_of_edge(start);
        let mut current = [a, b]
            .into_iter()
            .flatten()
            .find(|c| problem.cells.contains(c))
            .ok_or_else(|| {
                FlowError::Structure(format!("entry edge {start} does not touch the region"))
            })?;
        let mut path_edges = vec![start];
        let mut path_cells = Vec::new();
        loop {
            if !cells_left.remove(&current) {
                return Err(FlowError::Structure(format!(
                    "slot {m} walks through {current} without using it"
                )));
            }
            path_cells.push(current);
            let nexts: Vec<EdgeId> = chip
                .incident_edges(current)?
                .into_iter()
                .filter(|e| edges_left.contains(e))
                .collect();
            match nexts.len() {
                0 => {
                    return Err(FlowError::Structure(format!(
                        "slot {m} dead-ends at {current}"
                    )))
                }
                1 => {
                    let edge = nexts[0];
                    edges_left.remove(&edge);
                    path_edges.push(edge);
                    let (a, b) = chip.cells_of_edge(edge);
                    let other = match (a, b) {
                        (Some(x), Some(y)) if x == current => Some(y),
                        (Some(x), Some(y)) if y == current => Some(x),
                        (Some(x), None) | (None, Some(x)) if x == current => None,
                        _ => {
                            return Err(FlowError::Structure(format!(
                                "edge {edge} is not incident to {current}"
                            )))
                        }
                    };
                    match other {
                        Some(cell) if problem.cells.contains(&cell) => current = cell,
                        _ => break,
                    }
                }
                _ => {
                    return Err(FlowError::Structure(format!(
                        "slot {m} branches at {current}"
                    )))
                }
            }
        }
        let last = *path_edges.last().unwrap();
        match &problem.terminals {
            TerminalSpec::Ports => {
                if !matches!(chip.edge_class(last)?, EdgeClass::PortSink) {
                    return Err(FlowError::Structure(format!(
                        "slot {m} ends at {last}, which is not a sink port"
                    )));
                }
            }
            TerminalSpec::Pinned(pairs) => {
                if last != pairs[m].1 {
                    return Err(FlowError::Structure(format!(
                        "slot {m} leaves through {last} instead of {}",
                        pairs[m].1
                    )));
                }
            }
        }
        if !edges_left.is_empty() || !cells_left.is_empty() {
            return Err(FlowError::DisjointCycle { path_index: m });
        }
        paths.push(FlowPath {
            edges: path_edges,
            cells: path_cells,
        });
    }
    Ok(paths)
}

/// Turns a family of paths into a full feasible assignment for the model:
/// the warm start handed to the solver. Path `i` fills slot `i`.
pub fn warm_assignment(
    problem: &PathProblem,
    encoding: &PathEncoding,
    paths: &[FlowPath],
) -> Result<Vec<i64>, FlowError> {
    let chip = problem.chip;
    if paths.len() > encoding.n_p {
        return Err(FlowError::Structure(format!(
            "{} paths for {} slots",
            paths.len(),
            encoding.n_p
        )));
    }
    if matches!(problem.terminals, TerminalSpec::Pinned(_)) && paths.len() != encoding.n_p {
        return Err(FlowError::Structure(
            "pinned models need one path per slot".into(),
        ));
    }
    let mut values = vec![0i64; encoding.model.variables().len()];
    for (m, path) in paths.iter().enumerate() {
        values[encoding.p[m].0] = 1;
        for &cell in &path.cells {
            let var = encoding.c[m].get(&cell).ok_or_else(|| {
                FlowError::Structure(format!("path cell {cell} is outside the region"))
            })?;
            values[var.0] = 1;
        }
        for &edge in &path.edges {
            let var = encoding.v[m].get(&edge).ok_or_else(|| {
                FlowError::Structure(format!("path edge {edge} has no variable in slot {m}"))
            })?;
            values[var.0] = 1;
        }
        // Send one unit to every cell: the entry edge carries the whole
        // demand, each cell keeps one unit, the exit edge carries none.
        let k = path.cells.len();
        for i in 0..k {
            let edge = path.edges[i];
            let sign = chip.flow_sign(edge, path.cells[i])?;
            let var = encoding.f[m][&edge];
            values[var.0] = (k - i) as i64 * sign;
        }
    }
    Ok(values)
}

/// Finds valves no simple source-to-sink path can pass through: a valve
/// qualifies only if, for some orientation, one side can reach a source
/// while avoiding the other side, and the other side can reach a sink while
/// avoiding the first. The test is necessary, not sufficient, so a reported
/// valve is a hard error while silence proves nothing.
pub fn uncoverable_valves(chip: &ChipSpec) -> Result<Vec<EdgeId>, FlowError> {
    if chip.source_ports().is_empty() || chip.sink_ports().is_empty() {
        return Err(FlowError::NoPorts);
    }
    let source_cells: Vec<CellId> = chip
        .source_ports()
        .iter()
        .map(|&e| chip.port_cell(e))
        .collect::<Result<_, _>>()?;
    let mut bad = Vec::new();
    for valve in chip.valves() {
        let (a, b) = chip.cells_of_edge(valve);
        let (Some(a), Some(b)) = (a, b) else {
            bad.push(valve);
            continue;
        };
        let covered = (reaches_from(chip, &source_cells, a, b)?
            && reaches_sink(chip, b, a)?)
            || (reaches_from(chip, &source_cells, b, a)? && reaches_sink(chip, a, b)?);
        if !covered {
            bad.push(valve);
        }
    }
    Ok(bad)
}

/// Breadth-first reachability from the source cells to `goal`, never
/// stepping on `avoid`, over valve and always-open edges.
fn reaches_from(
    chip: &ChipSpec,
    sources: &[CellId],
    goal: CellId,
    avoid: CellId,
) -> Result<bool, FlowError> {
    let mut seen: BTreeSet<CellId> = BTreeSet::new();
    let mut queue: VecDeque<CellId> = VecDeque::new();
    for &cell in sources {
        if cell != avoid && seen.insert(cell) {
            queue.push_back(cell);
        }
    }
    while let Some(cell) = queue.pop_front() {
        if cell == goal {
            return Ok(true);
        }
        for edge in chip.incident_edges(cell)? {
            if !matches!(chip.edge_class(edge)?, EdgeClass::Valve | EdgeClass::Open) {
                continue;
            }
            let (a, b) = chip.cells_of_edge(edge);
            let other = if a == Some(cell) { b } else { a };
            if let Some(next) = other {
                if next != avoid && chip.is_fluid(next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(false)
}

/// Breadth-first reachability from `from` to any cell carrying a sink port,
/// never stepping on `avoid`.
fn reaches_sink(chip: &ChipSpec, from: CellId, avoid: CellId) -> Result<bool, FlowError> {
    let mut sink_cells: BTreeSet<CellId> = BTreeSet::new();
    for edge in chip.sink_ports() {
        sink_cells.insert(chip.port_cell(edge)?);
    }
    let mut seen: BTreeSet<CellId> = BTreeSet::new();
    let mut queue: VecDeque<CellId> = VecDeque::new();
    if from != avoid {
        seen.insert(from);
        queue.push_back(from);
    }
    while let Some(cell) = queue.pop_front() {
        if sink_cells.contains(&cell) {
            return Ok(true);
        }
        for edge in chip.incident_edges(cell)? {
            if !matches!(chip.edge_class(edge)?, EdgeClass::Valve | EdgeClass::Open) {
                continue;
            }
            let (a, b) = chip.cells_of_edge(edge);
            let other = if a == Some(cell) { b } else { a };
            if let Some(next) = other {
                if next != avoid && chip.is_fluid(next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(false)
}

/// Budgets for path generation.
#[derive(Clone, Copy, Debug)]
pub struct GenerateLimits {
    /// Node budget for each unwarmed feasibility probe.
    pub probe_nodes: u64,
    /// Node budget for the warm-started minimizing solve.
    pub final_nodes: u64,
    /// Wall-clock backstop per solve.
    pub time_limit: Option<Duration>,
    /// Hard cap on the number of path slots; defaults to the valve count.
    pub max_paths: Option<usize>,
}

impl Default for GenerateLimits {
    fn default() -> Self {
        GenerateLimits {
            probe_nodes: 20_000,
            final_nodes: 200_000,
            time_limit: Some(Duration::from_secs(30 * 60)),
            max_paths: None,
        }
    }
}

/// A generated covering path family.
#[derive(Clone, Debug)]
pub struct FlowGeneration {
    pub paths: Vec<FlowPath>,
    pub status: SolveStatus,
    /// Total branch-and-bound nodes across every solve involved.
    pub nodes: u64,
    /// Slot budget of the model that produced the family.
    pub budget: usize,
}

/// Generates a minimal covering path family for the chip.
///
/// A constructive cover, when one exists, seeds the solver as a warm start
/// and fixes the slot budget; the solver then only has to look for something
/// smaller. Without a constructive cover the budget starts at a counting
/// lower bound and grows by one slot whenever the model proves infeasible
/// within the probe budget.
pub fn generate_flow_paths(
    chip: &ChipSpec,
    options: PathModelOptions,
    limits: &GenerateLimits,
) -> Result<FlowGeneration, FlowError> {
    if chip.source_ports().is_empty() || chip.sink_ports().is_empty() {
        return Err(FlowError::NoPorts);
    }
    let bad = uncoverable_valves(chip)?;
    if !bad.is_empty() {
        return Err(FlowError::UncoverableValves(bad));
    }
    let valves = chip.valves();
    if valves.is_empty() {
        return Ok(FlowGeneration {
            paths: Vec::new(),
            status: SolveStatus::Optimal,
            nodes: 0,
            budget: 0,
        });
    }
    if let Some(warm_paths) = heuristic::cover(chip) {
        let (outcome, paths) = attempt(
            chip,
            options,
            warm_paths.len(),
            Some(&warm_paths),
            limits.final_nodes,
            limits.time_limit,
        )?;
        let paths = paths.ok_or_else(|| {
            FlowError::Structure("warm-started solve returned no solution".into())
        })?;
        check_family(chip, &paths, &valves)?;
        return Ok(FlowGeneration {
            paths,
            status: outcome.status,
            nodes: outcome.nodes,
            budget: warm_paths.len(),
        });
    }
    probe_generate(chip, options, limits, &valves)
}

/// The fallback generation loop: unwarmed solves with a growing slot budget.
pub(crate) fn probe_generate(
    chip: &ChipSpec,
    options: PathModelOptions,
    limits: &GenerateLimits,
    valves: &[EdgeId],
) -> Result<FlowGeneration, FlowError> {
    let per_path = chip.fluid_cells().count().saturating_sub(1).max(1);
    let mut n = valves.len().div_ceil(per_path).max(1);
    let cap = limits.max_paths.unwrap_or(valves.len()).min(valves.len());
    let mut total_nodes = 0u64;
    while n <= cap {
        let (outcome, paths) = attempt(chip, options, n, None, limits.probe_nodes, limits.time_limit)?;
        total_nodes += outcome.nodes;
        match outcome.status {
            SolveStatus::Optimal | SolveStatus::TimeoutWithIncumbent => {
                let paths = paths.ok_or_else(|| {
                    FlowError::Structure("solver reported a solution but returned none".into())
                })?;
                check_family(chip, &paths, valves)?;
                return Ok(FlowGeneration {
                    paths,
                    status: outcome.status,
                    nodes: total_nodes,
                    budget: n,
                });
            }
            SolveStatus::Infeasible | SolveStatus::TimeoutNoIncumbent => {
                n += 1;
            }
        }
    }
    Err(FlowError::BudgetExhausted { tried: cap })
}

/// Builds, optionally warm-starts, and solves one whole-chip model, then
/// extracts the paths if the solver produced values.
fn attempt(
    chip: &ChipSpec,
    options: PathModelOptions,
    n_p: usize,
    warm_paths: Option<&[FlowPath]>,
    node_limit: u64,
    time_limit: Option<Duration>,
) -> Result<(SolveOutcome, Option<Vec<FlowPath>>), FlowError> {
    let mut problem = PathProblem::whole_chip(chip, n_p);
    problem.options = options;
    let encoding = encode(&problem)?;
    let warm_start = match warm_paths {
        Some(paths) => Some(warm_assignment(&problem, &encoding, paths)?),
        None => None,
    };
    let config = SolverConfig {
        node_limit: Some(node_limit),
        time_limit,
        warm_start,
    };
    let outcome = solve(&encoding.model, &config)?;
    let paths = match &outcome.values {
        Some(values) => Some(extract_paths(&problem, &encoding, values)?),
        None => None,
    };
    Ok((outcome, paths))
}

/// Final defensive check on a generated family: every path is a valid
/// source-to-sink path and every valve is covered.
fn check_family(chip: &ChipSpec, paths: &[FlowPath], valves: &[EdgeId]) -> Result<(), FlowError> {
    let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
    for path in paths {
        path.validate(chip)?;
        covered.extend(path.valve_set(chip));
    }
    for &valve in valves {
        if !covered.contains(&valve) {
            return Err(FlowError::Structure(format!(
                "generated family misses valve {valve}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::{fixtures, ChipBuilder};

    fn h(r: usize, c: usize) -> EdgeId {
        EdgeId::horizontal(r, c)
    }

    fn v(r: usize, c: usize) -> EdgeId {
        EdgeId::vertical(r, c)
    }

    #[test]
    fn tiny_chip_has_the_unique_path() {
        let chip = fixtures::tiny_1x2();
        let problem = PathProblem::whole_chip(&chip, 1);
        let encoding = encode(&problem).unwrap();
        let outcome = solve(&encoding.model, &SolverConfig::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert_eq!(outcome.objective, Some(1));
        let paths = extract_paths(&problem, &encoding, &outcome.values.unwrap()).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].edges, vec![v(0, 0), v(0, 1), v(0, 2)]);
        assert_eq!(paths[0].cells, vec![CellId::new(0, 0), CellId::new(0, 1)]);
        paths[0].validate(&chip).unwrap();
    }

    #[test]
    fn one_path_cannot_cover_a_full_grid() {
        let chip = fixtures::full_3x3();
        let encoding = build_path_model(&chip, 1, PathModelOptions::default()).unwrap();
        let outcome = solve(&encoding.model, &SolverConfig::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Infeasible);
    }

    #[test]
    fn model_layout_on_the_large_grid() {
        let chip = fixtures::full_10x10();
        let encoding = build_path_model(&chip, 2, PathModelOptions::default()).unwrap();
        let count = |prefix: char| {
            encoding
                .model
                .variables()
                .iter()
                .filter(|var| var.name.starts_with(prefix))
                .count()
        };
        assert_eq!(count('p'), 2);
        assert_eq!(count('c'), 200);
        assert_eq!(count('v'), 364, "180 interior edges plus 2 ports per slot");
        assert_eq!(count('f'), 364);
        // Slot indicators come first, and slot 0's variables precede slot 1's.
        assert_eq!(encoding.model.variables()[0].name, "p0");
        assert_eq!(encoding.model.variables()[1].name, "p1");
        assert!(encoding.p[0].0 < encoding.c[0][&CellId::new(0, 0)].0);
        assert!(
            encoding.c[0][&CellId::new(9, 9)].0 < encoding.v[0][&h(1, 0)].0,
            "cells precede edges within a slot"
        );
        assert!(
            encoding.f[0][&v(9, 10)].0 < encoding.c[1][&CellId::new(0, 0)].0,
            "slot 0 is complete before slot 1 begins"
        );
    }

    #[test]
    fn extraction_rejects_a_disjoint_loop() {
        let chip = fixtures::full_5x5();
        let problem = PathProblem::whole_chip(&chip, 1);
        let encoding = encode(&problem).unwrap();
        let mut values = vec![0i64; encoding.model.variables().len()];
        values[encoding.p[0].0] = 1;
        // A straight path across the middle row...
        let path_edges = [v(2, 0), v(2, 1), v(2, 2), v(2, 3), v(2, 4), v(2, 5)];
        for edge in path_edges {
            values[encoding.v[0][&edge].0] = 1;
        }
        for col in 0..5 {
            values[encoding.c[0][&CellId::new(2, col)].0] = 1;
        }
        // ...plus a separate loop around the top-left four cells.
        for edge in [v(0, 1), h(1, 1), v(1, 1), h(1, 0)] {
            values[encoding.v[0][&edge].0] = 1;
        }
        for cell in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            values[encoding.c[0][&CellId::new(cell.0, cell.1)].0] = 1;
        }
        let err = extract_paths(&problem, &encoding, &values).unwrap_err();
        assert!(
            matches!(err, FlowError::DisjointCycle { path_index: 0 }),
            "{err}"
        );
    }

    #[test]
    fn warm_assignments_satisfy_the_model() {
        let chip = fixtures::tiny_1x2();
        let problem = PathProblem::whole_chip(&chip, 1);
        let encoding = encode(&problem).unwrap();
        let path = FlowPath {
            edges: vec![v(0, 0), v(0, 1), v(0, 2)],
            cells: vec![CellId::new(0, 0), CellId::new(0, 1)],
        };
        let warm = warm_assignment(&problem, &encoding, &[path]).unwrap();
        assert_eq!(encoding.model.check_assignment(&warm).unwrap(), 1);

        // The same on a larger grid with a constructive cover, including an
        // unused trailing slot.
        let chip = fixtures::full_5x5();
        let paths = heuristic::cover(&chip).expect("the full grid has a cover");
        let problem = PathProblem::whole_chip(&chip, paths.len() + 1);
        let encoding = encode(&problem).unwrap();
        let warm = warm_assignment(&problem, &encoding, &paths).unwrap();
        assert_eq!(
            encoding.model.check_assignment(&warm).unwrap(),
            paths.len() as i64
        );
    }

    #[test]
    fn pocketed_valve_is_reported_unreachable() {
        // Closed edges seal cells (0,1) and (1,1) into a pocket. The valve
        // inside the pocket can never lie on a source-to-sink path, and the
        // sealing also strands the top-right corner: a path through h(1,2)
        // or h(2,2) would have to end in a cell with no port.
        let chip = ChipBuilder::new(3, 3)
            .closed_edge(v(0, 1))
            .closed_edge(v(0, 2))
            .closed_edge(v(1, 1))
            .closed_edge(v(1, 2))
            .closed_edge(h(2, 1))
            .source(v(0, 0))
            .sink(v(2, 3))
            .finish()
            .unwrap();
        let stranded = vec![h(1, 1), h(1, 2), h(2, 2)];
        assert_eq!(uncoverable_valves(&chip).unwrap(), stranded);
        let err =
            generate_flow_paths(&chip, PathModelOptions::default(), &GenerateLimits::default())
                .unwrap_err();
        match err {
            FlowError::UncoverableValves(edges) => assert_eq!(edges, stranded),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn generation_on_the_tiny_chip() {
        let chip = fixtures::tiny_1x2();
        let generated = generate_flow_paths(
            &chip,
            PathModelOptions::default(),
            &GenerateLimits::default(),
        )
        .unwrap();
        assert_eq!(generated.status, SolveStatus::Optimal);
        assert_eq!(generated.budget, 1);
        assert_eq!(generated.paths.len(), 1);
        assert_eq!(generated.paths[0].edges, vec![v(0, 0), v(0, 1), v(0, 2)]);
    }

    #[test]
    fn generation_minimizes_below_the_constructive_cover() {
        let chip = fixtures::full_3x3();
        let generated = generate_flow_paths(
            &chip,
            PathModelOptions::default(),
            &GenerateLimits::default(),
        )
        .unwrap();
        assert_eq!(generated.status, SolveStatus::Optimal);
        let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
        for path in &generated.paths {
            path.validate(&chip).unwrap();
            covered.extend(path.valve_set(&chip));
        }
        assert_eq!(covered.len(), chip.valves().len());
        assert!(generated.paths.len() <= generated.budget);
    }

    #[test]
    fn probe_loop_finds_covers_without_warm_starts() {
        let chip = fixtures::full_3x3();
        let valves = chip.valves();
        let generated = probe_generate(
            &chip,
            PathModelOptions::default(),
            &GenerateLimits::default(),
            &valves,
        )
        .unwrap();
        assert_eq!(generated.status, SolveStatus::Optimal);
        let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
        for path in &generated.paths {
            covered.extend(path.valve_set(&chip));
        }
        assert_eq!(covered.len(), valves.len());
    }

    #[test]
    fn probe_loop_reports_budget_exhaustion() {
        let chip = fixtures::full_3x3();
        let valves = chip.valves();
        let limits = GenerateLimits {
            max_paths: Some(1),
            ..GenerateLimits::default()
        };
        let err = probe_generate(&chip, PathModelOptions::default(), &limits, &valves)
            .unwrap_err();
        assert!(matches!(err, FlowError::BudgetExhausted { tried: 1 }), "{err}");
    }

    #[test]
    fn aggregate_linking_builds_one_row_per_slot() {
        // Three slots: the side-port grid needs three paths, because each
        // path covers exactly one of the three valves at the inlet cell.
        let chip = fixtures::full_3x3();
        let options = PathModelOptions {
            aggregate_linking: true,
        };
        let encoding = build_path_model(&chip, 3, options).unwrap();
        let links = encoding
            .model
            .constraints()
            .iter()
            .filter(|c| c.name.starts_with("lnk"))
            .count();
        assert_eq!(links, 3);
        let outcome = solve(&encoding.model, &SolverConfig::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert_eq!(outcome.objective, Some(3));
    }

    #[test]
    fn pinned_terminals_route_between_crossing_edges() {
        // Redo the tiny chip as a pinned region solve over both cells: the
        // path must enter through the source edge and leave via the sink.
        let chip = fixtures::tiny_1x2();
        let problem = PathProblem {
            chip: &chip,
            cells: BTreeSet::from([CellId::new(0, 0), CellId::new(0, 1)]),
            coverage: BTreeSet::from([v(0, 1)]),
            terminals: TerminalSpec::Pinned(vec![(v(0, 0), v(0, 2))]),
            n_p: 1,
            options: PathModelOptions::default(),
        };
        let encoding = encode(&problem).unwrap();
        let outcome = solve(&encoding.model, &SolverConfig::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        let paths = extract_paths(&problem, &encoding, &outcome.values.unwrap()).unwrap();
        assert_eq!(paths[0].edges, vec![v(0, 0), v(0, 1), v(0, 2)]);

        // A column-region solve on the full grid: enter through the source
        // port, cover the valve above it, leave through a named crossing
        // valve into the next column.
        let chip = fixtures::full_3x3();
        let cells: BTreeSet<CellId> = (0..3).map(|r| CellId::new(r, 0)).collect();
        let problem = PathProblem {
            chip: &chip,
            cells,
            coverage: BTreeSet::from([h(1, 0)]),
            terminals: TerminalSpec::Pinned(vec![(v(1, 0), v(0, 1))]),
            n_p: 1,
            options: PathModelOptions::default(),
        };
        let encoding = encode(&problem).unwrap();
        let outcome = solve(&encoding.model, &SolverConfig::default()).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        let paths = extract_paths(&problem, &encoding, &outcome.values.unwrap()).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].edges, vec![v(1, 0), h(1, 0), v(0, 1)]);
        assert_eq!(paths[0].cells, vec![CellId::new(1, 0), CellId::new(0, 0)]);
    }

    #[test]
    fn pinned_validation_rejects_bad_terminals() {
        let chip = fixtures::full_3x3();
        let cells: BTreeSet<CellId> = (0..3).map(|r| CellId::new(r, 0)).collect();
        let base = PathProblem {
            chip: &chip,
            cells,
            coverage: BTreeSet::new(),
            terminals: TerminalSpec::Pinned(vec![(v(1, 0), v(1, 0))]),
            n_p: 1,
            options: PathModelOptions::default(),
        };
        assert!(matches!(
            encode(&base),
            Err(FlowError::PinnedTerminal(_))
        ));
        let mut inside = base.clone();
        inside.terminals = TerminalSpec::Pinned(vec![(h(1, 0), v(0, 1))]);
        assert!(matches!(
            encode(&inside),
            Err(FlowError::PinnedTerminal(_))
        ));
        let mut detached = base.clone();
        detached.terminals = TerminalSpec::Pinned(vec![(v(1, 0), v(2, 3))]);
        assert!(matches!(
            encode(&detached),
            Err(FlowError::PinnedTerminal(_))
        ));
        let mut wrong_count = base;
        wrong_count.terminals = TerminalSpec::Pinned(vec![]);
        assert!(matches!(
            encode(&wrong_count),
            Err(FlowError::PinnedTerminal(_))
        ));
    }
}
