//! Cut-set generation.
//!
//! A cut vector closes exactly the valves of one source-to-sink cut and
//! expects every sink to stay dry, so a cut valve stuck open leaks pressure
//! across the blockade. A family of cuts in which every valve appears — and
//! is load-bearing where it appears — detects every single stuck-open fault.
//!
//! Cuts are found as paths in the wall-junction graph: the grid of channel
//! corners, where crossing an interior edge's wall segment joins two
//! adjacent junctions. Valve segments can be commanded shut, segments of
//! permanently closed edges are free walls, and always-open channels are
//! impassable. The chip boundary is solid wall except at the two port gaps,
//! so a junction walk from the boundary stretch on one side of the gaps to
//! the stretch on the other side seals the chip into a source region and a
//! sink region.
//!
//! The integer program mirrors the path encoder: per cut slot, a use
//! indicator `u`, a binary `cn` per junction, a binary `w` per usable wall
//! segment, terminal picks `sa`/`sb` on the two boundary stretches, and a
//! bounded integer flow `g` that makes every used junction absorb one unit,
//! ruling out disconnected loops. Anti-masking rows forbid a valve segment
//! from short-cutting between two junctions of the walk without being part
//! of it: such a valve would stay commanded open and could pocket the walk.
//! Coverage rows demand every valve appear in some slot, and the objective
//! minimizes the number of cuts used.

pub mod heuristic;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use thiserror::Error;

use crate::chip::{ChipError, ChipSpec, EdgeClass, EdgeId, Orientation};
use crate::faultsim::FaultError;
use crate::ilp::{
    solve, IlpError, IlpModel, Relation, SolveStatus, SolverConfig, VarId,
};

/// A junction of the wall grid: `(row, col)` with `row` in `0..=rows` and
/// `col` in `0..=cols`. Junction `(r, c)` is the corner shared by cells
/// `(r-1, c-1)`, `(r-1, c)`, `(r, c-1)` and `(r, c)`.
pub type Corner = (usize, usize);

fn fmt_corner((r, c): Corner) -> String {
    format!("({r},{c})")
}

fn fmt_edges(edges: &[EdgeId]) -> String {
    edges
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Errors raised while encoding, solving, or extracting cut families.
#[derive(Debug, Error)]
pub enum CutError {
    #[error(
        "cut generation needs exactly one source and one sink port, chip has {sources} and {sinks}"
    )]
    PortsUnsupported { sources: usize, sinks: usize },
    #[error("no separating cut can rely on: {}", fmt_edges(.0))]
    UncoverableValves(Vec<EdgeId>),
    #[error("cut slot {cut_index} contains a closed loop disconnected from its blockade")]
    DisjointLoop { cut_index: usize },
    #[error("cut structure violation: {0}")]
    Structure(String),
    #[error("solver error: {0}")]
    Ilp(#[from] IlpError),
    #[error("chip error: {0}")]
    Chip(#[from] ChipError),
    #[error("fault simulation error: {0}")]
    Fault(#[from] FaultError),
}

/// The two ends of an edge's wall segment, lower junction first.
pub fn dual_ends(edge: EdgeId) -> (Corner, Corner) {
    match edge.orientation {
        Orientation::Horizontal => ((edge.row, edge.col), (edge.row, edge.col + 1)),
        Orientation::Vertical => ((edge.row, edge.col), (edge.row + 1, edge.col)),
    }
}

/// The edge whose wall segment joins two adjacent junctions, if they are
/// adjacent at all.
pub fn segment_edge(a: Corner, b: Corner) -> Option<EdgeId> {
    if a.0 == b.0 && a.1.abs_diff(b.1) == 1 {
        Some(EdgeId::horizontal(a.0, a.1.min(b.1)))
    } else if a.1 == b.1 && a.0.abs_diff(b.0) == 1 {
        Some(EdgeId::vertical(a.0.min(b.0), a.1))
    } else {
        None
    }
}

/// Interior edges whose wall segment a blockade may use, in canonical edge
/// order: valves (closable on command, `true`) and permanently closed walls
/// (free, `false`). Always-open channels cannot be walled.
pub(crate) fn usable_duals(chip: &ChipSpec) -> Vec<(EdgeId, bool)> {
    chip.interior_edges()
        .filter_map(|e| match chip.edge_class(e) {
            Ok(EdgeClass::Valve) => Some((e, true)),
            Ok(EdgeClass::Closed) => Some((e, false)),
            _ => None,
        })
        .collect()
}

/// One of the two boundary stretches a blockade can attach to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// The boundary junction ring, split by the two port gaps into stretch A
/// (clockwise from the source gap to the sink gap) and stretch B (clockwise
/// from the sink gap back to the source gap). A junction walk from one
/// stretch to the other, together with the boundary walls, seals the source
/// off from the sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundarySplit {
    side_a: Vec<Corner>,
    side_b: Vec<Corner>,
    a_set: BTreeSet<Corner>,
    b_set: BTreeSet<Corner>,
}

impl BoundarySplit {
    pub fn of(chip: &ChipSpec) -> Result<BoundarySplit, CutError> {
        let sources = chip.source_ports();
        let sinks = chip.sink_ports();
        if sources.len() != 1 || sinks.len() != 1 {
            return Err(CutError::PortsUnsupported {
                sources: sources.len(),
                sinks: sinks.len(),
            });
        }
        let (rows, cols) = (chip.rows(), chip.cols());
        // The boundary junction ring, clockwise from the top-left corner.
        let mut ring: Vec<Corner> = Vec::new();
        for c in 0..=cols {
            ring.push((0, c));
        }
        for r in 1..=rows {
            ring.push((r, cols));
        }
        for c in (0..cols).rev() {
            ring.push((rows, c));
        }
        for r in (1..rows).rev() {
            ring.push((r, 0));
        }
        let len = ring.len();
        let mut source_at = None;
        let mut sink_at = None;
        for i in 0..len {
            let edge =
                segment_edge(ring[i], ring[(i + 1) % len]).expect("ring steps are adjacent");
            if edge == sources[0] {
                source_at = Some(i);
            }
            if edge == sinks[0] {
                sink_at = Some(i);
            }
        }
        let source_at = source_at.expect("the source port lies on the boundary");
        let sink_at = sink_at.expect("the sink port lies on the boundary");

        let walk = |from: usize, to: usize| -> Vec<Corner> {
            let mut arc = Vec::new();
            let mut i = (from + 1) % len;
            loop {
                arc.push(ring[i]);
                if i == to {
                    return arc;
                }
                i = (i + 1) % len;
            }
        };
        let side_a = walk(source_at, sink_at);
        let side_b = walk(sink_at, source_at);
        let a_set = side_a.iter().copied().collect();
        let b_set = side_b.iter().copied().collect();
        Ok(BoundarySplit {
            side_a,
            side_b,
            a_set,
            b_set,
        })
    }

    /// The junctions of a stretch, in clockwise boundary order.
    pub fn stretch(&self, side: Side) -> &[Corner] {
        match side {
            Side::A => &self.side_a,
            Side::B => &self.side_b,
        }
    }

    /// Which stretch a junction belongs to; `None` for interior junctions.
    pub fn side_of(&self, corner: Corner) -> Option<Side> {
        if self.a_set.contains(&corner) {
            Some(Side::A)
        } else if self.b_set.contains(&corner) {
            Some(Side::B)
        } else {
            None
        }
    }
}

/// One separating cut: the valves to command closed, plus the junction walk
/// (the blockade) that realizes the separation. Consecutive junctions of
/// the walk straddle one closed edge each — a cut valve or a permanent
/// wall — and the walk's ends sit on opposite boundary stretches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutSet {
    /// Valves of the blockade, in canonical order.
    pub valves: BTreeSet<EdgeId>,
    /// The blockade walk, stretch A to stretch B.
    pub dual_path: Vec<Corner>,
}

impl CutSet {
    /// The valves the blockade crosses, read off a junction walk.
    pub fn from_walk(chip: &ChipSpec, walk: Vec<Corner>) -> Result<CutSet, CutError> {
        let mut valves = BTreeSet::new();
        for pair in walk.windows(2) {
            let edge = segment_edge(pair[0], pair[1]).ok_or_else(|| {
                CutError::Structure(format!(
                    "junctions {} and {} are not adjacent",
                    fmt_corner(pair[0]),
                    fmt_corner(pair[1])
                ))
            })?;
            if matches!(chip.edge_class(edge)?, EdgeClass::Valve) {
                valves.insert(edge);
            }
        }
        Ok(CutSet {
            valves,
            dual_path: walk,
        })
    }
}

/// The built model plus the variable layout needed to read solutions back.
#[derive(Debug)]
pub struct CutEncoding {
    pub n_u: usize,
    pub model: IlpModel,
    pub split: BoundarySplit,
    /// Slot-use indicators, one per slot.
    pub u: Vec<VarId>,
    /// Per slot: junction-use binaries.
    pub cn: Vec<BTreeMap<Corner, VarId>>,
    /// Per slot: terminal picks on stretch A.
    pub sa: Vec<BTreeMap<Corner, VarId>>,
    /// Per slot: terminal picks on stretch B.
    pub sb: Vec<BTreeMap<Corner, VarId>>,
    /// Per slot: wall-segment binaries, keyed by the edge they cross.
    pub w: Vec<BTreeMap<EdgeId, VarId>>,
    /// Per slot: signed segment flows.
    pub g: Vec<BTreeMap<EdgeId, VarId>>,
    /// Per slot: flow injected at the stretch-A terminal.
    pub ga: Vec<BTreeMap<Corner, VarId>>,
    /// Per slot: flow drained at the stretch-B terminal.
    pub gb: Vec<BTreeMap<Corner, VarId>>,
}

fn edge_tag(edge: EdgeId) -> String {
    let o = match edge.orientation {
        Orientation::Horizontal => 'h',
        Orientation::Vertical => 'v',
    };
    format!("{o}_{}_{}", edge.row, edge.col)
}

/// Builds the integer program for a whole-chip cut family with `n_u` slots.
pub fn build_cut_model(chip: &ChipSpec, n_u: usize) -> Result<CutEncoding, CutError> {
    if n_u == 0 {
        return Err(CutError::Structure(
            "a cut model needs at least one slot".into(),
        ));
    }
    let split = BoundarySplit::of(chip)?;
    let duals = usable_duals(chip);
    let corners: Vec<Corner> = (0..=chip.rows())
        .flat_map(|r| (0..=chip.cols()).map(move |c| (r, c)))
        .collect();
    let mut incident: BTreeMap<Corner, Vec<EdgeId>> = BTreeMap::new();
    for &(edge, _) in &duals {
        let (a, b) = dual_ends(edge);
        incident.entry(a).or_default().push(edge);
        incident.entry(b).or_default().push(edge);
    }
    // The flow big-M: one unit per visited junction plus slack.
    let m_g = (corners.len() + 1) as i64;

    // Variables: all slot indicators first, then per slot the junction
    // binaries (row-major), terminal picks (stretch order), wall segments
    // (canonical edge order), and the flows in the same order.
    let mut model = IlpModel::new();
    let u: Vec<VarId> = (0..n_u).map(|m| model.add_binary(format!("u{m}"))).collect();
    let mut cn_vars = Vec::with_capacity(n_u);
    let mut sa_vars = Vec::with_capacity(n_u);
    let mut sb_vars = Vec::with_capacity(n_u);
    let mut w_vars = Vec::with_capacity(n_u);
    let mut g_vars = Vec::with_capacity(n_u);
    let mut ga_vars = Vec::with_capacity(n_u);
    let mut gb_vars = Vec::with_capacity(n_u);
    for m in 0..n_u {
        let mut cnm = BTreeMap::new();
        for &(r, c) in &corners {
            cnm.insert((r, c), model.add_binary(format!("cn{m}_{r}_{c}")));
        }
        cn_vars.push(cnm);
        let mut sam = BTreeMap::new();
        for &(r, c) in split.stretch(Side::A) {
            sam.insert((r, c), model.add_binary(format!("sa{m}_{r}_{c}")));
        }
        sa_vars.push(sam);
        let mut sbm = BTreeMap::new();
        for &(r, c) in split.stretch(Side::B) {
            sbm.insert((r, c), model.add_binary(format!("sb{m}_{r}_{c}")));
        }
        sb_vars.push(sbm);
        let mut wm = BTreeMap::new();
        for &(edge, _) in &duals {
            wm.insert(edge, model.add_binary(format!("w{m}_{}", edge_tag(edge))));
        }
        w_vars.push(wm);
        let mut gm = BTreeMap::new();
        for &(edge, _) in &duals {
            gm.insert(
                edge,
                model.add_var(format!("g{m}_{}", edge_tag(edge)), -m_g, m_g),
            );
        }
        g_vars.push(gm);
        let mut gam = BTreeMap::new();
        for &(r, c) in split.stretch(Side::A) {
            gam.insert((r, c), model.add_var(format!("ga{m}_{r}_{c}"), -m_g, m_g));
        }
        ga_vars.push(gam);
        let mut gbm = BTreeMap::new();
        for &(r, c) in split.stretch(Side::B) {
            gbm.insert((r, c), model.add_var(format!("gb{m}_{r}_{c}"), -m_g, m_g));
        }
        gb_vars.push(gbm);
    }

    for m in 0..n_u {
        // Degree: a used junction touches exactly two used segments, where
        // a terminal pick counts as one virtual segment.
        for &corner in &corners {
            let mut terms: Vec<(i64, VarId)> = Vec::new();
            if let Some(edges) = incident.get(&corner) {
                for edge in edges {
                    terms.push((1, w_vars[m][edge]));
                }
            }
            if let Some(&var) = sa_vars[m].get(&corner) {
                terms.push((1, var));
            }
            if let Some(&var) = sb_vars[m].get(&corner) {
                terms.push((1, var));
            }
            terms.push((-2, cn_vars[m][&corner]));
            model.add_constraint(
                format!("deg{m}_{}_{}", corner.0, corner.1),
                terms,
                Relation::Eq,
                0,
            );
        }
        // Terminals: a used cut attaches once to each stretch.
        let mut ta: Vec<(i64, VarId)> = split
            .stretch(Side::A)
            .iter()
            .map(|c| (1, sa_vars[m][c]))
            .collect();
        ta.push((-1, u[m]));
        model.add_constraint(format!("ta{m}"), ta, Relation::Eq, 0);
        let mut tb: Vec<(i64, VarId)> = split
            .stretch(Side::B)
            .iter()
            .map(|c| (1, sb_vars[m][c]))
            .collect();
        tb.push((-1, u[m]));
        model.add_constraint(format!("tb{m}"), tb, Relation::Eq, 0);
        // A blockade touches the boundary only at its terminals: anything
        // else would hang a dead lobe off the walk.
        for &corner in split.stretch(Side::A) {
            model.add_constraint(
                format!("bnd{m}_{}_{}", corner.0, corner.1),
                vec![(1, cn_vars[m][&corner]), (-1, sa_vars[m][&corner])],
                Relation::Le,
                0,
            );
        }
        for &corner in split.stretch(Side::B) {
            model.add_constraint(
                format!("bnd{m}_{}_{}", corner.0, corner.1),
                vec![(1, cn_vars[m][&corner]), (-1, sb_vars[m][&corner])],
                Relation::Le,
                0,
            );
        }
        // Flow only on used segments and terminals.
        for &(edge, _) in &duals {
            let g = g_vars[m][&edge];
            let w = w_vars[m][&edge];
            model.add_constraint(
                format!("gub{m}_{}", edge_tag(edge)),
                vec![(1, g), (-m_g, w)],
                Relation::Le,
                0,
            );
            model.add_constraint(
                format!("glb{m}_{}", edge_tag(edge)),
                vec![(1, g), (m_g, w)],
                Relation::Ge,
                0,
            );
        }
        for &corner in split.stretch(Side::A) {
            let ga = ga_vars[m][&corner];
            let sa = sa_vars[m][&corner];
            model.add_constraint(
                format!("gaub{m}_{}_{}", corner.0, corner.1),
                vec![(1, ga), (-m_g, sa)],
                Relation::Le,
                0,
            );
            model.add_constraint(
                format!("galb{m}_{}_{}", corner.0, corner.1),
                vec![(1, ga), (m_g, sa)],
                Relation::Ge,
                0,
            );
        }
        for &corner in split.stretch(Side::B) {
            let gb = gb_vars[m][&corner];
            let sb = sb_vars[m][&corner];
            model.add_constraint(
                format!("gbub{m}_{}_{}", corner.0, corner.1),
                vec![(1, gb), (-m_g, sb)],
                Relation::Le,
                0,
            );
            model.add_constraint(
                format!("gblb{m}_{}_{}", corner.0, corner.1),
                vec![(1, gb), (m_g, sb)],
                Relation::Ge,
                0,
            );
        }
        // Conservation: every used junction absorbs exactly one unit, so a
        // loop disconnected from the terminals starves and is infeasible.
        // The stretch-A terminal injects, the stretch-B terminal drains.
        for &corner in &corners {
            let mut terms: Vec<(i64, VarId)> = Vec::new();
            if let Some(edges) = incident.get(&corner) {
                for edge in edges {
                    let (tail, _head) = dual_ends(*edge);
                    let sign = if corner == tail { -1 } else { 1 };
                    terms.push((sign, g_vars[m][edge]));
                }
            }
            if let Some(&var) = ga_vars[m].get(&corner) {
                terms.push((1, var));
            }
            if let Some(&var) = gb_vars[m].get(&corner) {
                terms.push((1, var));
            }
            terms.push((-1, cn_vars[m][&corner]));
            model.add_constraint(
                format!("con{m}_{}_{}", corner.0, corner.1),
                terms,
                Relation::Eq,
                0,
            );
        }
        // Anti-masking: a valve whose wall segment joins two junctions of
        // the walk must be part of the walk. Otherwise it stays commanded
        // open and could let pressure slip around a pocket of the blockade.
        for &(edge, is_valve) in &duals {
            if !is_valve {
                continue;
            }
            let (a, b) = dual_ends(edge);
            model.add_constraint(
                format!("msk{m}_{}", edge_tag(edge)),
                vec![
                    (1, cn_vars[m][&a]),
                    (1, cn_vars[m][&b]),
                    (-1, w_vars[m][&edge]),
                ],
                Relation::Le,
                1,
            );
        }
        // Linking: an unused slot must stay empty.
        for &(edge, _) in &duals {
            model.add_constraint(
                format!("lnk{m}_{}", edge_tag(edge)),
                vec![(1, w_vars[m][&edge]), (-1, u[m])],
                Relation::Le,
                0,
            );
        }
    }
    // Symmetry: used slots come first, so permuted families collapse.
    for m in 0..n_u.saturating_sub(1) {
        model.add_constraint(
            format!("sym{m}"),
            vec![(1, u[m]), (-1, u[m + 1])],
            Relation::Ge,
            0,
        );
    }
    // Coverage: every valve appears in at least one cut.
    for &(edge, is_valve) in &duals {
        if !is_valve {
            continue;
        }
        let terms: Vec<(i64, VarId)> = (0..n_u).map(|m| (1, w_vars[m][&edge])).collect();
        model.add_constraint(format!("cov_{}", edge_tag(edge)), terms, Relation::Ge, 1);
    }
    model.set_objective((0..n_u).map(|m| (1, u[m])).collect());

    Ok(CutEncoding {
        n_u,
        model,
        split,
        u,
        cn: cn_vars,
        sa: sa_vars,
        sb: sb_vars,
        w: w_vars,
        g: g_vars,
        ga: ga_vars,
        gb: gb_vars,
    })
}

/// Reads the blockade walk out of every active slot of a solution.
pub fn extract_cuts(
    chip: &ChipSpec,
    encoding: &CutEncoding,
    values: &[i64],
) -> Result<Vec<CutSet>, CutError> {
    if values.len() != encoding.model.variables().len() {
        return Err(CutError::Structure(format!(
            "solution has {} values for {} variables",
            values.len(),
            encoding.model.variables().len()
        )));
    }
    let mut cuts = Vec::new();
    for m in 0..encoding.n_u {
        if values[encoding.u[m].0] == 0 {
            continue;
        }
        let mut segs_left: BTreeSet<EdgeId> = encoding.w[m]
            .iter()
            .filter(|(_, var)| values[var.0] != 0)
            .map(|(&e, _)| e)
            .collect();
        let starts: Vec<Corner> = encoding.sa[m]
            .iter()
            .filter(|(_, var)| values[var.0] != 0)
            .map(|(&c, _)| c)
            .collect();
        let ends: Vec<Corner> = encoding.sb[m]
            .iter()
            .filter(|(_, var)| values[var.0] != 0)
            .map(|(&c, _)| c)
            .collect();
        let (&[start], &[end]) = (starts.as_slice(), ends.as_slice()) else {
            return Err(CutError::Structure(format!(
                "slot {m} picks {} stretch-A terminals and {} stretch-B terminals",
                starts.len(),
                ends.len()
            )));
        };
        let mut incident: BTreeMap<Corner, Vec<EdgeId>> = BTreeMap::new();
        for &edge in &segs_left {
            let (a, b) = dual_ends(edge);
            incident.entry(a).or_default().push(edge);
            incident.entry(b).or_default().push(edge);
        }
        let mut walk = vec![start];
        let mut current = start;
        loop {
            let nexts: Vec<EdgeId> = incident
                .get(&current)
                .map(|edges| {
                    edges
                        .iter()
                        .copied()
                        .filter(|e| segs_left.contains(e))
                        .collect()
                })
                .unwrap_or_default();
            match nexts.len() {
                0 => break,
                1 => {
                    let edge = nexts[0];
                    segs_left.remove(&edge);
                    let (a, b) = dual_ends(edge);
                    current = if a == current { b } else { a };
                    walk.push(current);
                }
                _ => {
                    return Err(CutError::Structure(format!(
                        "slot {m} branches at junction {}",
                        fmt_corner(current)
                    )))
                }
            }
        }
        if current != end {
            return Err(CutError::Structure(format!(
                "slot {m} ends at {} instead of its terminal {}",
                fmt_corner(current),
                fmt_corner(end)
            )));
        }
        if !segs_left.is_empty() {
            return Err(CutError::DisjointLoop { cut_index: m });
        }
        if walk.len() < 2 {
            return Err(CutError::Structure(format!(
                "slot {m} uses no wall segments"
            )));
        }
        cuts.push(CutSet::from_walk(chip, walk)?);
    }
    Ok(cuts)
}

/// Turns a family of cuts into a full feasible assignment for the model:
/// the warm start handed to the solver. Cut `i` fills slot `i`.
pub fn warm_assignment(
    chip: &ChipSpec,
    encoding: &CutEncoding,
    cuts: &[CutSet],
) -> Result<Vec<i64>, CutError> {
    if cuts.len() > encoding.n_u {
        return Err(CutError::Structure(format!(
            "{} cuts for {} slots",
            cuts.len(),
            encoding.n_u
        )));
    }
    let mut values = vec![0i64; encoding.model.variables().len()];
    for (m, cut) in cuts.iter().enumerate() {
        let walk = &cut.dual_path;
        if walk.len() < 2 {
            return Err(CutError::Structure(
                "a blockade needs at least one wall segment".into(),
            ));
        }
        values[encoding.u[m].0] = 1;
        let first = walk[0];
        let last = *walk.last().unwrap();
        let sa = encoding.sa[m].get(&first).ok_or_else(|| {
            CutError::Structure(format!(
                "blockade must start on stretch A, not {}",
                fmt_corner(first)
            ))
        })?;
        values[sa.0] = 1;
        let sb = encoding.sb[m].get(&last).ok_or_else(|| {
            CutError::Structure(format!(
                "blockade must end on stretch B, not {}",
                fmt_corner(last)
            ))
        })?;
        values[sb.0] = 1;
        for (i, &corner) in walk.iter().enumerate() {
            let var = encoding.cn[m].get(&corner).ok_or_else(|| {
                CutError::Structure(format!("junction {} is off the grid", fmt_corner(corner)))
            })?;
            if values[var.0] == 1 {
                return Err(CutError::Structure(format!(
                    "blockade revisits junction {}",
                    fmt_corner(corner)
                )));
            }
            values[var.0] = 1;
            if i != 0 && i + 1 != walk.len() && encoding.split.side_of(corner).is_some() {
                return Err(CutError::Structure(format!(
                    "blockade touches the boundary mid-walk at {}",
                    fmt_corner(corner)
                )));
            }
        }
        // Send one unit to every junction: the stretch-A terminal injects
        // the whole demand, each junction keeps one unit, the stretch-B
        // terminal drains nothing.
        let len = walk.len() as i64;
        let mut walk_valves: BTreeSet<EdgeId> = BTreeSet::new();
        for i in 0..walk.len() - 1 {
            let (a, b) = (walk[i], walk[i + 1]);
            let edge = segment_edge(a, b).ok_or_else(|| {
                CutError::Structure(format!(
                    "junctions {} and {} are not adjacent",
                    fmt_corner(a),
                    fmt_corner(b)
                ))
            })?;
            let w = encoding.w[m].get(&edge).ok_or_else(|| {
                CutError::Structure(format!("the wall segment across {edge} is not usable"))
            })?;
            values[w.0] = 1;
            let magnitude = len - 1 - i as i64;
            let (tail, _head) = dual_ends(edge);
            values[encoding.g[m][&edge].0] = if tail == a { magnitude } else { -magnitude };
            if matches!(chip.edge_class(edge)?, EdgeClass::Valve) {
                walk_valves.insert(edge);
            }
        }
        values[encoding.ga[m][&first].0] = len;
        if walk_valves != cut.valves {
            return Err(CutError::Structure(
                "cut valves do not match its blockade walk".into(),
            ));
        }
    }
    Ok(values)
}

/// Finds valves no blockade can rely on: from the two ends of the valve's
/// wall segment, the walk halves must reach opposite boundary stretches
/// through usable segments without re-crossing the valve. The test is
/// necessary, not sufficient, so a reported valve is a hard error while
/// silence proves nothing.
pub fn cut_uncoverable_valves(chip: &ChipSpec) -> Result<Vec<EdgeId>, CutError> {
    let split = BoundarySplit::of(chip)?;
    let mut adj: BTreeMap<Corner, Vec<(Corner, EdgeId)>> = BTreeMap::new();
    for (edge, _) in usable_duals(chip) {
        let (a, b) = dual_ends(edge);
        adj.entry(a).or_default().push((b, edge));
        adj.entry(b).or_default().push((a, edge));
    }
    let reach = |start: Corner, skip: EdgeId| -> (bool, bool) {
        match split.side_of(start) {
            // A walk half ending on the boundary stops there.
            Some(Side::A) => return (true, false),
            Some(Side::B) => return (false, true),
            None => {}
        }
        let mut reaches_a = false;
        let mut reaches_b = false;
        let mut seen = BTreeSet::from([start]);
        let mut queue = vec![start];
        let mut head = 0;
        while head < queue.len() {
            let current = queue[head];
            head += 1;
            let Some(neighbors) = adj.get(&current) else {
                continue;
            };
            for &(next, edge) in neighbors {
                if edge == skip || !seen.insert(next) {
                    continue;
                }
                match split.side_of(next) {
                    Some(Side::A) => reaches_a = true,
                    Some(Side::B) => reaches_b = true,
                    None => queue.push(next),
                }
            }
        }
        (reaches_a, reaches_b)
    };
    let mut bad = Vec::new();
    for valve in chip.valves() {
        let (n1, n2) = dual_ends(valve);
        let (a1, b1) = reach(n1, valve);
        let (a2, b2) = reach(n2, valve);
        if !((a1 && b2) || (b1 && a2)) {
            bad.push(valve);
        }
    }
    Ok(bad)
}

/// Budgets for cut generation.
#[derive(Clone, Copy, Debug)]
pub struct CutLimits {
    /// Node budget for the warm-started minimizing solve. Zero keeps the
    /// constructive family without searching for a smaller one.
    pub final_nodes: u64,
    /// Wall-clock backstop for the solve.
    pub time_limit: Option<Duration>,
}

impl Default for CutLimits {
    fn default() -> Self {
        CutLimits {
            final_nodes: 200_000,
            time_limit: Some(Duration::from_secs(30 * 60)),
        }
    }
}

/// A generated covering cut family.
#[derive(Clone, Debug)]
pub struct CutGeneration {
    pub cuts: Vec<CutSet>,
    pub status: SolveStatus,
    /// Branch-and-bound nodes of the minimizing solve.
    pub nodes: u64,
    /// Slot budget of the model that produced the family.
    pub budget: usize,
}

/// Generates a minimal covering cut family for the chip.
///
/// A constructive family — straight blockade lines with detours plus
/// targeted residual cuts, each tightened until every valve it claims is
/// load-bearing — seeds the solver as a warm start and fixes the slot
/// budget; the solver then only has to look for something smaller. The
/// solver's answer goes through the same tightening, and the smaller of
/// the two families wins.
pub fn generate_cut_sets(chip: &ChipSpec, limits: &CutLimits) -> Result<CutGeneration, CutError> {
    let split = BoundarySplit::of(chip)?;
    let valves = chip.valves();
    if valves.is_empty() {
        return Ok(CutGeneration {
            cuts: Vec::new(),
            status: SolveStatus::Optimal,
            nodes: 0,
            budget: 0,
        });
    }
    let bad = cut_uncoverable_valves(chip)?;
    if !bad.is_empty() {
        return Err(CutError::UncoverableValves(bad));
    }
    let warm = heuristic::cover(chip, &split)?;
    let n_u = warm.len();
    let encoding = build_cut_model(chip, n_u)?;
    let warm_values = warm_assignment(chip, &encoding, &warm)?;
    let config = SolverConfig {
        node_limit: Some(limits.final_nodes),
        time_limit: limits.time_limit,
        warm_start: Some(warm_values),
    };
    let outcome = solve(&encoding.model, &config)?;
    let values = outcome
        .values
        .as_ref()
        .ok_or_else(|| CutError::Structure("warm-started solve returned no solution".into()))?;
    let raw = extract_cuts(chip, &encoding, values)?;
    let solved = heuristic::finalize(chip, &split, raw)?;
    // Tightening can reshape the solver's family; keep whichever covering
    // family is smaller, preferring the solver's on a tie.
    let cuts = if solved.len() <= warm.len() { solved } else { warm };
    check_cut_family(chip, &split, &cuts, &valves)?;
    Ok(CutGeneration {
        cuts,
        status: outcome.status,
        nodes: outcome.nodes,
        budget: n_u,
    })
}

/// Final structural validation of a covering family.
fn check_cut_family(
    chip: &ChipSpec,
    split: &BoundarySplit,
    cuts: &[CutSet],
    valves: &[EdgeId],
) -> Result<(), CutError> {
    let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
    for cut in cuts {
        let walk = &cut.dual_path;
        if walk.len() < 2 {
            return Err(CutError::Structure("a blockade walk is degenerate".into()));
        }
        if split.side_of(walk[0]) != Some(Side::A)
            || split.side_of(*walk.last().unwrap()) != Some(Side::B)
        {
            return Err(CutError::Structure(
                "a blockade does not join the two boundary stretches".into(),
            ));
        }
        let rebuilt = CutSet::from_walk(chip, walk.clone())?;
        if rebuilt.valves != cut.valves {
            return Err(CutError::Structure(
                "cut valves do not match its blockade walk".into(),
            ));
        }
        // No open valve may bridge the walk: such a valve would sit across
        // the blockade unobserved and reopen a path around the cut valves
        // nearest to it.
        let on_walk: BTreeSet<Corner> = walk.iter().copied().collect();
        for (edge, is_valve) in usable_duals(chip) {
            if !is_valve || cut.valves.contains(&edge) {
                continue;
            }
            let (a, b) = dual_ends(edge);
            if on_walk.contains(&a) && on_walk.contains(&b) {
                return Err(CutError::Structure(format!(
                    "open valve {edge} bridges a blockade walk"
                )));
            }
        }
        covered.extend(cut.valves.iter().copied());
    }
    let missing: Vec<EdgeId> = valves
        .iter()
        .copied()
        .filter(|v| !covered.contains(v))
        .collect();
    if !missing.is_empty() {
        return Err(CutError::Structure(format!(
            "family leaves valves uncovered: {}",
            fmt_edges(&missing)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
