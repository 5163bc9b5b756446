//! Constructive cut families.
//!
//! Straight blockade lines — one per column gap, one per row gap, with
//! short detours where a line would need an unwallable always-open edge —
//! cover most valves of a regular chip. A targeted pass then routes one
//! blockade through each still-uncovered valve. Every candidate goes
//! through a tightening loop that drops valves whose stuck-open fault the
//! blockade would not notice and re-routes the walk over the valves that
//! remain, so every cut in the result is separating and every valve it
//! claims is load-bearing.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::chip::{ChipSpec, EdgeId};
use crate::faultsim::Simulator;

use super::{
    dual_ends, fmt_edges, usable_duals, BoundarySplit, Corner, CutError, CutSet, Side,
};

/// The wall-junction graph: junction adjacency across usable wall segments.
struct Mesh {
    /// junction -> (neighbor, crossed edge, crossed edge is a valve), in
    /// canonical edge order.
    adj: BTreeMap<Corner, Vec<(Corner, EdgeId, bool)>>,
}

/// One junction walk found by routing: its cost and the edges it crosses.
struct Route {
    cost: u64,
    corners: Vec<Corner>,
}

/// Shortest-walk searches over the wall-junction graph.
struct Router<'a> {
    mesh: Mesh,
    split: &'a BoundarySplit,
}

impl<'a> Router<'a> {
    fn new(chip: &ChipSpec, split: &'a BoundarySplit) -> Router<'a> {
        let mut adj: BTreeMap<Corner, Vec<(Corner, EdgeId, bool)>> = BTreeMap::new();
        for (edge, is_valve) in usable_duals(chip) {
            let (a, b) = dual_ends(edge);
            adj.entry(a).or_default().push((b, edge, is_valve));
            adj.entry(b).or_default().push((a, edge, is_valve));
        }
        Router {
            mesh: Mesh { adj },
            split,
        }
    }

    /// Cheapest walk from one of `starts` to any junction of the `goal`
    /// stretch. Junctions between the ends must be interior, pass `permit`,
    /// and avoid `blocked`; each step's cost comes from `cost_of`, where
    /// `None` forbids the step. A start already on the goal stretch yields
    /// a degenerate one-junction walk. Starts on the opposite stretch are
    /// walk *terminals*: they are expanded only when `expand_boundary_starts`
    /// is set (a blockade may begin there but never pass through).
    fn route(
        &self,
        starts: &[Corner],
        goal: Side,
        expand_boundary_starts: bool,
        blocked: &BTreeSet<Corner>,
        permit: &dyn Fn(Corner) -> bool,
        cost_of: &dyn Fn(EdgeId, bool) -> Option<u64>,
    ) -> Option<Route> {
        let mut dist: BTreeMap<Corner, u64> = BTreeMap::new();
        let mut pred: BTreeMap<Corner, Corner> = BTreeMap::new();
        let mut heap: BinaryHeap<Reverse<(u64, Corner)>> = BinaryHeap::new();
        for &start in starts {
            if blocked.contains(&start) || dist.contains_key(&start) {
                continue;
            }
            match self.split.side_of(start) {
                Some(side) if side == goal => {
                    return Some(Route {
                        cost: 0,
                        corners: vec![start],
                    });
                }
                Some(_) if !expand_boundary_starts => continue,
                _ => {}
            }
            dist.insert(start, 0);
            heap.push(Reverse((0, start)));
        }
        while let Some(Reverse((cost, current))) = heap.pop() {
            if dist.get(&current).is_some_and(|&d| d < cost) {
                continue;
            }
            if self.split.side_of(current) == Some(goal) {
                let mut corners = vec![current];
                let mut at = current;
                while let Some(&prev) = pred.get(&at) {
                    corners.push(prev);
                    at = prev;
                }
                corners.reverse();
                return Some(Route { cost, corners });
            }
            let Some(neighbors) = self.mesh.adj.get(&current) else {
                continue;
            };
            for &(next, edge, is_valve) in neighbors {
                if blocked.contains(&next) {
                    continue;
                }
                let Some(step) = cost_of(edge, is_valve) else {
                    continue;
                };
                match self.split.side_of(next) {
                    Some(side) if side == goal => {}
                    Some(_) => continue,
                    None => {
                        if !permit(next) {
                            continue;
                        }
                    }
                }
                let next_cost = cost + step;
                if dist.get(&next).is_none_or(|&d| next_cost < d) {
                    dist.insert(next, next_cost);
                    pred.insert(next, current);
                    heap.push(Reverse((next_cost, next)));
                }
            }
        }
        None
    }

    /// Removes valve chords from a walk. A valve whose wall segment joins
    /// two non-consecutive walk junctions would sit right across the
    /// blockade while staying open, so the stretch between the junctions is
    /// bypassed through that segment and the valve joins the cut instead.
    /// Every splice shortens the walk, which bounds the scan. Returns
    /// whether anything changed.
    fn splice_chords(&self, walk: &mut Vec<Corner>) -> bool {
        let mut changed = false;
        'scan: loop {
            let pos: BTreeMap<Corner, usize> =
                walk.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            for (i, corner) in walk.iter().enumerate() {
                let Some(neighbors) = self.mesh.adj.get(corner) else {
                    continue;
                };
                for &(next, _, is_valve) in neighbors {
                    if !is_valve {
                        continue;
                    }
                    if pos.get(&next).is_some_and(|&j| j > i + 1) {
                        let tail: Vec<Corner> = walk[pos[&next]..].to_vec();
                        walk.truncate(i + 1);
                        walk.extend(tail);
                        changed = true;
                        continue 'scan;
                    }
                }
            }
            return changed;
        }
    }
}

/// Turns a found walk into a cut, oriented stretch A first.
fn to_cut(chip: &ChipSpec, split: &BoundarySplit, route: Route) -> Result<CutSet, CutError> {
    let mut walk = route.corners;
    if split.side_of(walk[0]) == Some(Side::B) {
        walk.reverse();
    }
    CutSet::from_walk(chip, walk)
}

/// Simulation-backed tightening: drops valves a blockade would not notice
/// and re-routes the walk over what remains.
pub(super) struct Tightener<'a> {
    chip: &'a ChipSpec,
    sim: Simulator<'a>,
    all_open: Vec<bool>,
    slot_of: BTreeMap<EdgeId, usize>,
}

impl<'a> Tightener<'a> {
    pub(super) fn new(chip: &'a ChipSpec) -> Result<Tightener<'a>, CutError> {
        let sim = Simulator::new(chip);
        let states: BTreeMap<EdgeId, bool> = chip.valves().into_iter().map(|v| (v, true)).collect();
        let all_open = sim.compile_states(&states)?;
        let slot_of = sim.valves().iter().copied().collect();
        Ok(Tightener {
            chip,
            sim,
            all_open,
            slot_of,
        })
    }

    /// Whether any sink reads pressure when exactly `closed` is commanded
    /// shut and every other valve is open.
    fn lit(&mut self, closed: &BTreeSet<EdgeId>) -> Result<bool, CutError> {
        let mut overrides = Vec::with_capacity(closed.len());
        for edge in closed {
            let slot = self.slot_of.get(edge).ok_or_else(|| {
                CutError::Structure(format!("cut claims {edge}, which is not a valve"))
            })?;
            overrides.push((*slot, false));
        }
        Ok(self.sim.observe(&self.all_open, &overrides).iter().any(|&b| b))
    }

    /// Tightens one separating cut until it is chordless and every valve it
    /// claims is load-bearing. Each round first splices valve chords into
    /// the walk, then drops every valve whose lone reopening, with the rest
    /// of the cut closed, leaks no pressure to a sink. Pruning a valve can
    /// strand the walk, so the walk is re-routed over the kept valves and
    /// the free walls, and the next round splices and prunes again. A
    /// re-route that revisits an earlier walk would loop — some corridors
    /// admit no blockade that is both chordless and fully load-bearing —
    /// so the candidate is abandoned instead. Returns `None` when nothing
    /// usable is left.
    pub(super) fn tighten(
        &mut self,
        router: &Router,
        mut cut: CutSet,
    ) -> Result<Option<CutSet>, CutError> {
        let corners = (self.chip.rows() + 1) * (self.chip.cols() + 1);
        let mut seen: BTreeSet<Vec<Corner>> = BTreeSet::new();
        for _ in 0..corners + 8 {
            let mut walk = cut.dual_path.clone();
            if router.splice_chords(&mut walk) {
                cut = CutSet::from_walk(self.chip, walk)?;
            }
            if !seen.insert(cut.dual_path.clone()) {
                return Ok(None);
            }
            if self.lit(&cut.valves)? {
                return Err(CutError::Structure(format!(
                    "closing {} does not separate the ports",
                    fmt_edges(&cut.valves.iter().copied().collect::<Vec<_>>())
                )));
            }
            let mut kept = cut.valves.clone();
            for valve in cut.valves.iter().copied() {
                if !kept.contains(&valve) {
                    continue;
                }
                let mut probe = kept.clone();
                probe.remove(&valve);
                if !self.lit(&probe)? {
                    kept.remove(&valve);
                }
            }
            if kept.is_empty() {
                return Ok(None);
            }
            if kept == cut.valves {
                return Ok(Some(cut));
            }
            let route = router
                .route(
                    router.split.stretch(Side::A),
                    Side::B,
                    true,
                    &BTreeSet::new(),
                    &|_| true,
                    &|edge, is_valve| {
                        if is_valve {
                            kept.contains(&edge).then_some(0)
                        } else {
                            Some(0)
                        }
                    },
                )
                .ok_or_else(|| {
                    CutError::Structure(
                        "a tightened blockade lost its wall continuity".to_string(),
                    )
                })?;
            cut = to_cut(self.chip, router.split, route)?;
        }
        Err(CutError::Structure(
            "blockade tightening failed to converge".to_string(),
        ))
    }
}

/// Constructs a covering family: blockade lines, then targeted residual
/// cuts, then a redundancy sweep.
pub(super) fn cover(chip: &ChipSpec, split: &BoundarySplit) -> Result<Vec<CutSet>, CutError> {
    let router = Router::new(chip, split);
    let mut tight = Tightener::new(chip)?;
    let mut cuts: Vec<CutSet> = Vec::new();
    let mut covered: BTreeSet<EdgeId> = BTreeSet::new();

    let mut lines: Vec<(bool, usize)> = (1..chip.cols()).map(|c| (true, c)).collect();
    lines.extend((1..chip.rows()).map(|r| (false, r)));
    for (vertical, index) in lines {
        let (t1, t2) = if vertical {
            ((0, index), (chip.rows(), index))
        } else {
            ((index, 0), (index, chip.cols()))
        };
        let (Some(s1), Some(s2)) = (split.side_of(t1), split.side_of(t2)) else {
            continue;
        };
        if s1 == s2 {
            // Both line ends sit on the same stretch; no blockade there.
            continue;
        }
        // Try the straight line first, then allow progressively wider
        // detours around unwallable edges.
        for width in [0usize, 1, 2, 4] {
            let band = |corner: Corner| {
                if vertical {
                    corner.1.abs_diff(index) <= width
                } else {
                    corner.0.abs_diff(index) <= width
                }
            };
            let starts: Vec<Corner> = split
                .stretch(s1)
                .iter()
                .copied()
                .filter(|&c| band(c))
                .collect();
            let found = router.route(&starts, s2, true, &BTreeSet::new(), &band, &|edge,
                                                                                   is_valve| {
                if is_valve {
                    Some(if covered.contains(&edge) { 1 } else { 0 })
                } else {
                    Some(0)
                }
            });
            let Some(found) = found else {
                continue;
            };
            if let Some(cut) = tight.tighten(&router, to_cut(chip, split, found)?)? {
                if !cut.valves.is_subset(&covered) {
                    covered.extend(cut.valves.iter().copied());
                    cuts.push(cut);
                }
            }
            break;
        }
    }
    complete(chip, split, &router, &mut tight, &mut cuts, &mut covered)?;
    drop_redundant(&mut cuts);
    Ok(cuts)
}

/// Tightens an already-found family (typically a solver's) and restores
/// full coverage afterwards: tightening can drop valves, and a targeted
/// pass wins them back.
pub(super) fn finalize(
    chip: &ChipSpec,
    split: &BoundarySplit,
    raw: Vec<CutSet>,
) -> Result<Vec<CutSet>, CutError> {
    let router = Router::new(chip, split);
    let mut tight = Tightener::new(chip)?;
    let mut cuts: Vec<CutSet> = Vec::new();
    let mut covered: BTreeSet<EdgeId> = BTreeSet::new();
    for cut in raw {
        if let Some(cut) = tight.tighten(&router, cut)? {
            if !cut.valves.is_subset(&covered) {
                covered.extend(cut.valves.iter().copied());
                cuts.push(cut);
            }
        }
    }
    complete(chip, split, &router, &mut tight, &mut cuts, &mut covered)?;
    drop_redundant(&mut cuts);
    Ok(cuts)
}

/// Routes one targeted blockade through each valve not yet covered.
fn complete(
    chip: &ChipSpec,
    split: &BoundarySplit,
    router: &Router,
    tight: &mut Tightener,
    cuts: &mut Vec<CutSet>,
    covered: &mut BTreeSet<EdgeId>,
) -> Result<(), CutError> {
    let all: BTreeSet<EdgeId> = chip.valves().into_iter().collect();
    let mut hopeless: Vec<EdgeId> = Vec::new();
    loop {
        let Some(valve) = all
            .iter()
            .copied()
            .find(|v| !covered.contains(v) && !hopeless.contains(v))
        else {
            break;
        };
        match targeted(chip, split, router, tight, valve, covered)? {
            Some(cut) => {
                covered.extend(cut.valves.iter().copied());
                cuts.push(cut);
            }
            None => hopeless.push(valve),
        }
    }
    if !hopeless.is_empty() {
        return Err(CutError::UncoverableValves(hopeless));
    }
    Ok(())
}

/// Builds a blockade that provably exercises `valve`: two walk halves from
/// the ends of its wall segment to opposite stretches, stitched across the
/// valve, tried in every end-to-stretch assignment from cheapest up. Walks
/// are routed twice — once preferring valves that still need coverage,
/// once by pure wall length, since a long blockade tends to bypass its own
/// middle and shed the target valve in tightening. Equal-cost walks can
/// still land on the boundary in different places, and only some landings
/// leave open the feed paths that make the valve load-bearing, so each
/// variant retries with earlier landing junctions blocked. A candidate
/// counts only if the valve survives tightening.
fn targeted(
    chip: &ChipSpec,
    split: &BoundarySplit,
    router: &Router,
    tight: &mut Tightener,
    valve: EdgeId,
    covered: &BTreeSet<EdgeId>,
) -> Result<Option<CutSet>, CutError> {
    let (n1, n2) = dual_ends(valve);
    let variants = [
        (n1, Side::A, n2, Side::B),
        (n1, Side::B, n2, Side::A),
        (n2, Side::A, n1, Side::B),
        (n2, Side::B, n1, Side::A),
    ];
    let mut candidates: Vec<(usize, u64, usize, CutSet)> = Vec::new();
    for profile in 0usize..2 {
        let step_cost = |edge: EdgeId, is_valve: bool| -> Option<u64> {
            if edge == valve {
                return None;
            }
            if profile == 1 {
                return Some(1);
            }
            if is_valve {
                Some(if covered.contains(&edge) { 1 } else { 0 })
            } else {
                Some(0)
            }
        };
        for (index, &(end1, goal1, end2, goal2)) in variants.iter().enumerate() {
            let mut landed: BTreeSet<Corner> = BTreeSet::new();
            for alt in 0usize..3 {
                let Some(first) = router.route(&[end1], goal1, false, &landed, &|_| true, &step_cost)
                else {
                    break;
                };
                let landing = *first.corners.last().expect("routes are never empty");
                let blocked: BTreeSet<Corner> = first.corners.iter().copied().collect();
                let second =
                    router.route(&[end2], goal2, false, &blocked, &|_| true, &step_cost);
                landed.insert(landing);
                let Some(second) = second else {
                    continue;
                };
                let mut walk: Vec<Corner> = first.corners.iter().rev().copied().collect();
                walk.extend(second.corners.iter().copied());
                let cost = first.cost + second.cost;
                candidates.push((
                    profile,
                    cost,
                    index * 4 + alt,
                    to_cut(chip, split, Route { cost, corners: walk })?,
                ));
            }
        }
    }
    candidates.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut tried: BTreeSet<Vec<Corner>> = BTreeSet::new();
    for (_, _, _, candidate) in candidates {
        if !tried.insert(candidate.dual_path.clone()) {
            continue;
        }
        if let Some(cut) = tight.tighten(router, candidate)? {
            if cut.valves.contains(&valve) {
                return Ok(Some(cut));
            }
        }
    }
    Ok(None)
}

/// Drops cuts whose every valve is also claimed by another kept cut,
/// newest first.
fn drop_redundant(cuts: &mut Vec<CutSet>) {
    let mut keep = vec![true; cuts.len()];
    for i in (0..cuts.len()).rev() {
        let others: BTreeSet<EdgeId> = cuts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && keep[j])
            .flat_map(|(_, c)| c.valves.iter().copied())
            .collect();
        if cuts[i].valves.is_subset(&others) {
            keep[i] = false;
        }
    }
    let mut it = keep.into_iter();
    cuts.retain(|_| it.next().unwrap());
}
