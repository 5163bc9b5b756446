use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::chip::fixtures::{full_3x3, full_5x5, full_diagonal, tiny_1x2};
use crate::chip::{ChipBuilder, ChipSpec, EdgeClass, EdgeId};
use crate::ilp::SolveStatus;

fn h(r: usize, c: usize) -> EdgeId {
    EdgeId::horizontal(r, c)
}

fn v(r: usize, c: usize) -> EdgeId {
    EdgeId::vertical(r, c)
}

#[test]
fn wall_segments_join_the_expected_junctions() {
    // A horizontal edge separates two cells stacked vertically, so its wall
    // segment runs left-right; a vertical edge's segment runs top-bottom.
    assert_eq!(dual_ends(h(2, 1)), ((2, 1), (2, 2)));
    assert_eq!(dual_ends(v(2, 1)), ((2, 1), (3, 1)));
    // Round trip through the junction pair, both argument orders.
    let chip = full_3x3();
    for edge in chip.interior_edges() {
        let (a, b) = dual_ends(edge);
        assert_eq!(segment_edge(a, b), Some(edge));
        assert_eq!(segment_edge(b, a), Some(edge));
    }
    assert_eq!(segment_edge((0, 0), (1, 1)), None);
    assert_eq!(segment_edge((0, 0), (0, 2)), None);
}

#[test]
fn boundary_split_arcs_on_tiny_and_mid_port_chips() {
    let split = BoundarySplit::of(&tiny_1x2()).unwrap();
    assert_eq!(split.stretch(Side::A), [(0, 0), (0, 1), (0, 2)]);
    assert_eq!(split.stretch(Side::B), [(1, 2), (1, 1), (1, 0)]);

    let split = BoundarySplit::of(&full_3x3()).unwrap();
    assert_eq!(
        split.stretch(Side::A),
        [(1, 0), (0, 0), (0, 1), (0, 2), (0, 3), (1, 3)]
    );
    assert_eq!(
        split.stretch(Side::B),
        [(2, 3), (3, 3), (3, 2), (3, 1), (3, 0), (2, 0)]
    );
    assert_eq!(split.side_of((0, 2)), Some(Side::A));
    assert_eq!(split.side_of((3, 0)), Some(Side::B));
    assert_eq!(split.side_of((1, 1)), None);
    assert_eq!(split.side_of((2, 2)), None);
}

#[test]
fn multi_port_chips_are_rejected() {
    let chip = ChipBuilder::new(2, 2)
        .source(v(0, 0))
        .sink(v(0, 2))
        .sink(v(1, 2))
        .finish()
        .unwrap();
    match BoundarySplit::of(&chip) {
        Err(CutError::PortsUnsupported { sources, sinks }) => {
            assert_eq!((sources, sinks), (1, 2));
        }
        other => panic!("expected PortsUnsupported, got {other:?}"),
    }
}

#[test]
fn model_layout_on_the_mid_port_grid() {
    let chip = full_3x3();
    let encoding = build_cut_model(&chip, 2).unwrap();
    let model = &encoding.model;
    // Per slot: 16 junctions + 6 + 6 terminals + 12 segments + 12 flows
    // + 6 + 6 terminal flows = 64; plus one use indicator per slot.
    assert_eq!(model.variables().len(), 130);
    // Per slot: 16 degree + 2 terminal-count + 12 boundary + 24 segment
    // flow bounds + 24 terminal flow bounds + 16 conservation + 12
    // anti-masking + 12 linking = 118; plus 1 symmetry + 12 coverage.
    assert_eq!(model.constraints().len(), 249);

    let names: Vec<&str> = model.variables().iter().map(|v| v.name.as_str()).collect();
    assert_eq!(&names[0..2], ["u0", "u1"]);
    assert_eq!(names[2], "cn0_0_0");
    assert_eq!(names[17], "cn0_3_3");
    // Terminal picks follow the clockwise stretch order, not sorted order.
    assert_eq!(names[18], "sa0_1_0");
    assert_eq!(names[23], "sa0_1_3");
    assert_eq!(names[24], "sb0_2_3");
    assert_eq!(names[29], "sb0_2_0");
    // Segments in canonical edge order: all horizontal, then all vertical.
    assert_eq!(names[30], "w0_h_1_0");
    assert_eq!(names[41], "w0_v_2_2");
    assert_eq!(names[42], "g0_h_1_0");
    assert_eq!(names[54], "ga0_1_0");
    assert_eq!(names[60], "gb0_2_3");
    assert_eq!(names[66], "cn1_0_0");

    // Flows are bounded by one unit per junction plus slack.
    let g = &model.variables()[42];
    assert_eq!((g.lower, g.upper), (-17, 17));

    let row_names: Vec<&str> = model
        .constraints()
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(row_names[0], "deg0_0_0");
    assert!(row_names.contains(&"ta0"));
    assert!(row_names.contains(&"bnd1_2_0"));
    assert!(row_names.contains(&"msk0_h_1_1"));
    assert!(row_names.contains(&"lnk1_v_2_2"));
    assert_eq!(row_names[row_names.len() - 13], "sym0");
    assert_eq!(row_names[row_names.len() - 1], "cov_v_2_2");
    assert_eq!(model.objective(), &[(1, encoding.u[0]), (1, encoding.u[1])]);
}

#[test]
fn extraction_walks_the_blockade() {
    // Hand-assemble one active slot: the straight blockade between columns
    // 1 and 2. Extraction only reads indicators, terminals, and segments.
    let chip = full_3x3();
    let encoding = build_cut_model(&chip, 1).unwrap();
    let mut values = vec![0i64; encoding.model.variables().len()];
    values[encoding.u[0].0] = 1;
    values[encoding.sa[0][&(0, 1)].0] = 1;
    values[encoding.sb[0][&(3, 1)].0] = 1;
    for edge in [v(0, 1), v(1, 1), v(2, 1)] {
        values[encoding.w[0][&edge].0] = 1;
    }
    let cuts = extract_cuts(&chip, &encoding, &values).unwrap();
    assert_eq!(cuts.len(), 1);
    assert_eq!(cuts[0].valves, BTreeSet::from([v(0, 1), v(1, 1), v(2, 1)]));
    assert_eq!(cuts[0].dual_path, vec![(0, 1), (1, 1), (2, 1), (3, 1)]);
}

#[test]
fn extraction_rejects_a_disconnected_loop() {
    let chip = full_5x5();
    let encoding = build_cut_model(&chip, 1).unwrap();
    let mut values = vec![0i64; encoding.model.variables().len()];
    values[encoding.u[0].0] = 1;
    values[encoding.sa[0][&(0, 1)].0] = 1;
    values[encoding.sb[0][&(5, 1)].0] = 1;
    for r in 0..5 {
        values[encoding.w[0][&v(r, 1)].0] = 1;
    }
    // A stray closed square of segments away from the blockade.
    for edge in [h(2, 3), v(2, 4), h(3, 3), v(2, 3)] {
        values[encoding.w[0][&edge].0] = 1;
    }
    match extract_cuts(&chip, &encoding, &values) {
        Err(CutError::DisjointLoop { cut_index: 0 }) => {}
        other => panic!("expected DisjointLoop, got {other:?}"),
    }
}

#[test]
fn warm_assignments_satisfy_the_model() {
    for chip in [full_3x3(), full_5x5()] {
        let split = BoundarySplit::of(&chip).unwrap();
        let family = heuristic::cover(&chip, &split).unwrap();
        let encoding = build_cut_model(&chip, family.len()).unwrap();
        let values = warm_assignment(&chip, &encoding, &family).unwrap();
        let objective = encoding.model.check_assignment(&values).unwrap();
        assert_eq!(objective, family.len() as i64);
        // The assignment round-trips through extraction.
        let extracted = extract_cuts(&chip, &encoding, &values).unwrap();
        assert_eq!(extracted, family);
    }
}

#[test]
fn tiny_chip_has_exactly_one_cut() {
    let generation = generate_cut_sets(&tiny_1x2(), &CutLimits::default()).unwrap();
    assert_eq!(generation.status, SolveStatus::Optimal);
    assert_eq!(generation.cuts.len(), 1);
    assert_eq!(generation.cuts[0].valves, BTreeSet::from([v(0, 1)]));
    assert_eq!(generation.cuts[0].dual_path, vec![(0, 1), (1, 1)]);
}

/// Exhaustive reference for small chips: every simple blockade walk with
/// interior middle junctions and no valve short-cutting between two of its
/// junctions, then the smallest covering family over those walks.
fn reference_minimum_family(chip: &ChipSpec) -> usize {
    let split = BoundarySplit::of(chip).unwrap();
    let mut adj: BTreeMap<Corner, Vec<(Corner, EdgeId)>> = BTreeMap::new();
    for (edge, _) in usable_duals(chip) {
        let (a, b) = dual_ends(edge);
        adj.entry(a).or_default().push((b, edge));
        adj.entry(b).or_default().push((a, edge));
    }
    let valves = chip.valves();
    assert!(valves.len() <= 60, "reference search is for small chips");
    let bit: BTreeMap<EdgeId, u32> = valves
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i as u32))
        .collect();
    let full: u64 = (1u64 << valves.len()) - 1;

    let mut masks: BTreeSet<u64> = BTreeSet::new();
    let mut stack: Vec<Corner> = Vec::new();
    fn dfs(
        chip: &ChipSpec,
        split: &BoundarySplit,
        adj: &BTreeMap<Corner, Vec<(Corner, EdgeId)>>,
        bit: &BTreeMap<EdgeId, u32>,
        stack: &mut Vec<Corner>,
        masks: &mut BTreeSet<u64>,
    ) {
        let current = *stack.last().unwrap();
        for &(next, _) in adj.get(&current).into_iter().flatten() {
            if stack.contains(&next) {
                continue;
            }
            match split.side_of(next) {
                Some(side) => {
                    if side != Side::B {
                        continue;
                    }
                    stack.push(next);
                    // Reject walks where a valve joins two non-consecutive
                    // junctions: the minimizer never proposes those.
                    let chordless = (0..stack.len()).all(|i| {
                        (i + 2..stack.len()).all(|j| {
                            !segment_edge(stack[i], stack[j]).is_some_and(|e| {
                                matches!(chip.edge_class(e), Ok(EdgeClass::Valve))
                            })
                        })
                    });
                    if chordless {
                        let mut mask = 0u64;
                        for pair in stack.windows(2) {
                            let edge = segment_edge(pair[0], pair[1]).unwrap();
                            if let Some(&b) = bit.get(&edge) {
                                mask |= 1 << b;
                            }
                        }
                        if mask != 0 {
                            masks.insert(mask);
                        }
                    }
                    stack.pop();
                }
                None => {
                    stack.push(next);
                    dfs(chip, split, adj, bit, stack, masks);
                    stack.pop();
                }
            }
        }
    }
    for &start in split.stretch(Side::A) {
        stack.push(start);
        dfs(chip, &split, &adj, &bit, &mut stack, &mut masks);
        stack.pop();
    }
    // Drop dominated walks, then find the smallest covering subfamily.
    let masks: Vec<u64> = masks
        .iter()
        .copied()
        .filter(|&m| !masks.iter().any(|&other| other != m && (other & m) == m))
        .collect();
    fn smallest_cover(masks: &[u64], remaining: u64, used: usize, best: &mut usize) {
        if remaining == 0 {
            *best = (*best).min(used);
            return;
        }
        if used + 1 >= *best {
            return;
        }
        // Branch on the lowest uncovered valve: some walk must cross it.
        let need = remaining.trailing_zeros();
        for &mask in masks {
            if mask & (1u64 << need) != 0 {
                smallest_cover(masks, remaining & !mask, used + 1, best);
            }
        }
    }
    let mut best = usize::MAX;
    smallest_cover(&masks, full, 0, &mut best);
    best
}

#[test]
fn generation_minimizes_on_the_mid_port_grid() {
    let chip = full_3x3();
    assert_eq!(reference_minimum_family(&chip), 4);
    let generation = generate_cut_sets(&chip, &CutLimits::default()).unwrap();
    let split = BoundarySplit::of(&chip).unwrap();
    check_cut_family(&chip, &split, &generation.cuts, &chip.valves()).unwrap();
    match generation.status {
        SolveStatus::Optimal => assert_eq!(generation.cuts.len(), 4),
        SolveStatus::TimeoutWithIncumbent => assert!(generation.cuts.len() <= 6),
        other => panic!("unexpected status {other:?}"),
    }
}

#[test]
fn generation_is_deterministic() {
    let chip = full_3x3();
    let first = generate_cut_sets(&chip, &CutLimits::default()).unwrap();
    let second = generate_cut_sets(&chip, &CutLimits::default()).unwrap();
    assert_eq!(first.cuts, second.cuts);
    assert_eq!(first.status, second.status);
    assert_eq!(first.nodes, second.nodes);
}

#[test]
fn budget_zero_keeps_the_constructive_family() {
    let chip = full_diagonal(5, 5);
    let limits = CutLimits {
        final_nodes: 0,
        ..CutLimits::default()
    };
    let generation = generate_cut_sets(&chip, &limits).unwrap();
    assert_eq!(generation.status, SolveStatus::TimeoutWithIncumbent);
    assert_eq!(generation.cuts.len(), 8);
    assert_eq!(generation.budget, 8);
    let split = BoundarySplit::of(&chip).unwrap();
    check_cut_family(&chip, &split, &generation.cuts, &chip.valves()).unwrap();
}

#[test]
fn generation_handles_chips_without_valves() {
    let chip = ChipBuilder::new(1, 1)
        .source(v(0, 0))
        .sink(v(0, 1))
        .finish()
        .unwrap();
    let generation = generate_cut_sets(&chip, &CutLimits::default()).unwrap();
    assert!(generation.cuts.is_empty());
    assert_eq!(generation.status, SolveStatus::Optimal);
    assert_eq!(generation.nodes, 0);
}

#[test]
fn walled_in_valves_are_rejected_up_front() {
    // Always-open edges surround one end of v(1,2)'s wall segment, so no
    // blockade can pass through that valve: its junction (1,2) has no other
    // usable segment.
    let chip = ChipBuilder::new(3, 4)
        .source(v(1, 0))
        .sink(v(1, 4))
        .open_edge(h(1, 1))
        .open_edge(h(1, 2))
        .open_edge(v(0, 2))
        .finish()
        .unwrap();
    assert_eq!(cut_uncoverable_valves(&chip).unwrap(), vec![v(1, 2)]);
    match generate_cut_sets(&chip, &CutLimits::default()) {
        Err(CutError::UncoverableValves(bad)) => assert_eq!(bad, vec![v(1, 2)]),
        other => panic!("expected UncoverableValves, got {other:?}"),
    }
}
