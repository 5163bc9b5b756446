//! Deterministic branch-and-bound with integer bounds propagation.
//!
//! Search is depth-first with an explicit stack. The branch variable is
//! always the first undecided variable in declaration order; its domain is
//! split in half, exploring the upper half first (for a 0/1 variable this
//! tries 1 before 0). Every node runs bounds propagation to a fixpoint over
//! the constraints, so a node where every variable is fixed is feasible by
//! construction. Each new incumbent installs the dynamic cutoff
//! `objective <= incumbent - 1`, which turns the remaining search into an
//! optimality proof. No randomness, no floating point, no threads: the node
//! sequence is a pure function of the model and the configuration.

use std::collections::VecDeque;
use std::time::Instant;

use super::{IlpError, IlpModel, Relation, SolveOutcome, SolveStatus, SolverConfig};

/// A normalized row: `sum(coeff * var) <= ub`.
struct Row {
    terms: Vec<(i64, usize)>,
    ub: i64,
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    let r = a % b;
    if r != 0 && ((r < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

fn merge_terms(terms: &[(i64, super::VarId)]) -> Vec<(i64, usize)> {
    let mut merged: std::collections::BTreeMap<usize, i128> = std::collections::BTreeMap::new();
    for &(coeff, super::VarId(id)) in terms {
        *merged.entry(id).or_default() += i128::from(coeff);
    }
    merged
        .into_iter()
        .filter(|&(_, c)| c != 0)
        .map(|(id, c)| (c as i64, id))
        .collect()
}

struct Search<'m> {
    model: &'m IlpModel,
    rows: Vec<Row>,
    /// Objective with duplicate variables merged; also the cutoff row body.
    objective: Vec<(i64, usize)>,
    /// Rows touching each variable (cutoff row excluded, handled separately).
    var_rows: Vec<Vec<u32>>,
    in_objective: Vec<bool>,
    lower: Vec<i64>,
    upper: Vec<i64>,
    trail: Vec<(usize, i64, i64)>,
    queue: VecDeque<u32>,
    in_queue: Vec<bool>,
    /// `objective <= cutoff_ub` is active once an incumbent exists.
    cutoff_ub: Option<i64>,
    best_values: Option<Vec<i64>>,
    best_objective: Option<i64>,
    nodes: u64,
}

const CUTOFF: usize = usize::MAX;

impl<'m> Search<'m> {
    fn new(model: &'m IlpModel) -> Self {
        let mut rows = Vec::new();
        for constraint in model.constraints() {
            let terms = merge_terms(&constraint.terms);
            let negated: Vec<(i64, usize)> = terms.iter().map(|&(c, v)| (-c, v)).collect();
            match constraint.relation {
                Relation::Le => rows.push(Row {
                    terms,
                    ub: constraint.rhs,
                }),
                Relation::Ge => rows.push(Row {
                    terms: negated,
                    ub: -constraint.rhs,
                }),
                Relation::Eq => {
                    rows.push(Row {
                        terms: terms.clone(),
                        ub: constraint.rhs,
                    });
                    rows.push(Row {
                        terms: negated,
                        ub: -constraint.rhs,
                    });
                }
            }
        }
        let objective = merge_terms(model.objective());
        let n = model.variables().len();
        let mut var_rows = vec![Vec::new(); n];
        for (rid, row) in rows.iter().enumerate() {
            for &(_, var) in &row.terms {
                var_rows[var].push(rid as u32);
            }
        }
        let mut in_objective = vec![false; n];
        for &(_, var) in &objective {
            in_objective[var] = true;
        }
        let queue_cap = rows.len() + 1;
        Search {
            model,
            lower: model.variables().iter().map(|v| v.lower).collect(),
            upper: model.variables().iter().map(|v| v.upper).collect(),
            rows,
            objective,
            var_rows,
            in_objective,
            trail: Vec::new(),
            queue: VecDeque::new(),
            in_queue: vec![false; queue_cap],
            cutoff_ub: None,
            best_values: None,
            best_objective: None,
            nodes: 0,
        }
    }

    fn queue_slot(&self, rid: usize) -> usize {
        if rid == CUTOFF {
            self.rows.len()
        } else {
            rid
        }
    }

    fn enqueue_row(&mut self, rid: usize) {
        let slot = self.queue_slot(rid);
        if !self.in_queue[slot] {
            self.in_queue[slot] = true;
            // The queue stores u32 row ids; CUTOFF is encoded as u32::MAX.
            self.queue
                .push_back(if rid == CUTOFF { u32::MAX } else { rid as u32 });
        }
    }

    fn enqueue_var(&mut self, var: usize) {
        for i in 0..self.var_rows[var].len() {
            let rid = self.var_rows[var][i] as usize;
            self.enqueue_row(rid);
        }
        if self.in_objective[var] && self.cutoff_ub.is_some() {
            self.enqueue_row(CUTOFF);
        }
    }

    fn enqueue_everything(&mut self) {
        for rid in 0..self.rows.len() {
            self.enqueue_row(rid);
        }
        if self.cutoff_ub.is_some() {
            self.enqueue_row(CUTOFF);
        }
    }

    fn clear_queue(&mut self) {
        while let Some(encoded) = self.queue.pop_front() {
            let rid = if encoded == u32::MAX {
                CUTOFF
            } else {
                encoded as usize
            };
            let slot = self.queue_slot(rid);
            self.in_queue[slot] = false;
        }
    }

    fn set_lower(&mut self, var: usize, value: i64) {
        self.trail.push((var, self.lower[var], self.upper[var]));
        self.lower[var] = value;
    }

    fn set_upper(&mut self, var: usize, value: i64) {
        self.trail.push((var, self.lower[var], self.upper[var]));
        self.upper[var] = value;
    }

    fn restore_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (var, lo, hi) = self.trail.pop().unwrap();
            self.lower[var] = lo;
            self.upper[var] = hi;
        }
        self.clear_queue();
    }

    /// Propagates queued rows to a fixpoint. Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while let Some(encoded) = self.queue.pop_front() {
            let rid = if encoded == u32::MAX {
                CUTOFF
            } else {
                encoded as usize
            };
            let slot = self.queue_slot(rid);
            self.in_queue[slot] = false;

            let (terms, ub): (&[(i64, usize)], i64) = if rid == CUTOFF {
                let Some(cutoff) = self.cutoff_ub else { continue };
                (&self.objective, cutoff)
            } else {
                (&self.rows[rid].terms, self.rows[rid].ub)
            };

            let min_act: i128 = terms
                .iter()
                .map(|&(a, v)| {
                    if a > 0 {
                        i128::from(a) * i128::from(self.lower[v])
                    } else {
                        i128::from(a) * i128::from(self.upper[v])
                    }
                })
                .sum();
            if min_act > i128::from(ub) {
                self.clear_queue();
                return false;
            }

            // Tightening one variable never changes this row's minimum
            // contribution of any variable (positive coefficients bound the
            // upper end, negative the lower end), so min_act stays exact
            // across the loop.
            let mut pending: Vec<(usize, bool, i64)> = Vec::new();
            for &(a, v) in terms {
                if self.lower[v] == self.upper[v] {
                    continue;
                }
                if a > 0 {
                    let new_hi = div_floor(
                        i128::from(ub) - min_act + i128::from(a) * i128::from(self.lower[v]),
                        i128::from(a),
                    );
                    if new_hi < i128::from(self.upper[v]) {
                        if new_hi < i128::from(self.lower[v]) {
                            self.clear_queue();
                            return false;
                        }
                        pending.push((v, false, new_hi as i64));
                    }
                } else {
                    let new_lo = div_ceil(
                        i128::from(ub) - min_act + i128::from(a) * i128::from(self.upper[v]),
                        i128::from(a),
                    );
                    if new_lo > i128::from(self.lower[v]) {
                        if new_lo > i128::from(self.upper[v]) {
                            self.clear_queue();
                            return false;
                        }
                        pending.push((v, true, new_lo as i64));
                    }
                }
            }
            for (v, is_lower, value) in pending {
                if is_lower {
                    self.set_lower(v, value);
                } else {
                    self.set_upper(v, value);
                }
                self.enqueue_var(v);
            }
        }
        true
    }

    fn record_incumbent(&mut self) {
        let values = self.lower.clone();
        debug_assert!(self.model.check_assignment(&values).is_ok());
        let objective = self.model.objective_value(&values);
        let improves = match self.best_objective {
            Some(best) => objective < best,
            None => true,
        };
        if improves {
            self.best_objective = Some(objective);
            self.best_values = Some(values);
            self.cutoff_ub = Some(objective - 1);
        }
    }

    fn outcome(&mut self, status: SolveStatus) -> SolveOutcome {
        SolveOutcome {
            status,
            values: self.best_values.take(),
            objective: self.best_objective,
            nodes: self.nodes,
        }
    }
}

struct Frame {
    trail_mark: usize,
    var: usize,
    alts: [(i64, i64); 2],
    next: usize,
    scan_from: usize,
}

/// Solves a model to proven optimality within the configured budgets.
pub fn solve(model: &IlpModel, config: &SolverConfig) -> Result<SolveOutcome, IlpError> {
    model.validate()?;
    let mut search = Search::new(model);

    if let Some(warm) = &config.warm_start {
        model
            .check_assignment(warm)
            .map_err(|e| IlpError::WarmStartInfeasible(Box::new(e)))?;
        search.best_objective = Some(model.objective_value(warm));
        search.best_values = Some(warm.clone());
        search.cutoff_ub = Some(model.objective_value(warm) - 1);
    }

    let started = Instant::now();
    let node_limit = config.node_limit.unwrap_or(u64::MAX);
    let mut frames: Vec<Frame> = Vec::new();
    let mut scan_from = 0usize;

    search.enqueue_everything();
    let mut conflicted = !search.propagate();

    'search: loop {
        if !conflicted {
            while scan_from < search.lower.len()
                && search.lower[scan_from] == search.upper[scan_from]
            {
                scan_from += 1;
            }
            if scan_from == search.lower.len() {
                // Every variable fixed and propagation at fixpoint: feasible.
                // Record the leaf and fall through to backtracking.
                search.record_incumbent();
            } else {
                let var = scan_from;
                let (lo, hi) = (search.lower[var], search.upper[var]);
                let mid = lo + (hi - lo) / 2;
                if search.nodes >= node_limit {
                    return Ok(search.outcome(timeout_status(&search)));
                }
                if search.nodes % 256 == 0 {
                    if let Some(limit) = config.time_limit {
                        if started.elapsed() >= limit {
                            return Ok(search.outcome(timeout_status(&search)));
                        }
                    }
                }
                search.nodes += 1;
                let frame = Frame {
                    trail_mark: search.trail.len(),
                    var,
                    alts: [(mid + 1, hi), (lo, mid)],
                    next: 1,
                    scan_from,
                };
                let (alt_lo, alt_hi) = frame.alts[0];
                frames.push(frame);
                search.set_lower(var, alt_lo);
                search.set_upper(var, alt_hi);
                search.enqueue_var(var);
                conflicted = !search.propagate();
                continue 'search;
            }
        }

        // Backtrack to the deepest frame with an untried alternative.
        loop {
            let Some(top) = frames.last_mut() else {
                let status = if search.best_values.is_some() {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                };
                return Ok(search.outcome(status));
            };
            if top.next < top.alts.len() {
                let (alt_lo, alt_hi) = top.alts[top.next];
                top.next += 1;
                let var = top.var;
                let mark = top.trail_mark;
                scan_from = top.scan_from;
                search.restore_to(mark);
                if search.nodes >= node_limit {
                    return Ok(search.outcome(timeout_status(&search)));
                }
                if search.nodes % 256 == 0 {
                    if let Some(limit) = config.time_limit {
                        if started.elapsed() >= limit {
                            return Ok(search.outcome(timeout_status(&search)));
                        }
                    }
                }
                search.nodes += 1;
                search.set_lower(var, alt_lo);
                search.set_upper(var, alt_hi);
                search.enqueue_var(var);
                // The cutoff may have tightened since this subtree was
                // entered; re-check it on the fresh branch.
                if search.cutoff_ub.is_some() {
                    search.enqueue_row(CUTOFF);
                }
                conflicted = !search.propagate();
                continue 'search;
            }
            frames.pop();
        }
    }
}

fn timeout_status(search: &Search<'_>) -> SolveStatus {
    if search.best_values.is_some() {
        SolveStatus::TimeoutWithIncumbent
    } else {
        SolveStatus::TimeoutNoIncumbent
    }
}
