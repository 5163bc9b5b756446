//! Exact integer linear programming over `i64`.
//!
//! Models are built programmatically ([`IlpModel`]), solved in-process by a
//! deterministic branch-and-bound solver ([`solve`]), or exchanged with
//! external solvers through LP-format text ([`emit_lp`], [`parse_lp`],
//! [`import_solution`]). All arithmetic is exact integer arithmetic; there
//! is no floating point anywhere, so results never depend on tolerances.
//!
//! The solver is deterministic: given the same model and the same
//! [`SolverConfig`], it visits the same nodes and returns the same outcome,
//! including the node count. Branching follows variable declaration order,
//! so model builders control search by declaring decision variables first.

mod lp_format;
mod solver;

pub use lp_format::{emit_lp, import_solution, parse_lp};
pub use solver::solve;

use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;

/// Errors raised by model construction, solving, or interchange.
#[derive(Debug, Error)]
pub enum IlpError {
    #[error("variable `{name}` has inverted bounds {lower}..={upper}")]
    InvertedBounds { name: String, lower: i64, upper: i64 },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("constraint `{constraint}` references unknown variable id {id}")]
    UnknownVarId { constraint: String, id: usize },
    #[error("assignment has {got} values but the model has {want} variables")]
    AssignmentLength { got: usize, want: usize },
    #[error("assignment sets `{name}` to {value}, outside its bounds {lower}..={upper}")]
    AssignmentOutOfBounds {
        name: String,
        value: i64,
        lower: i64,
        upper: i64,
    },
    #[error("assignment violates constraint `{0}`")]
    ConstraintViolated(String),
    #[error("warm start rejected: {0}")]
    WarmStartInfeasible(Box<IlpError>),
    #[error("LP text line {line}: {message}")]
    LpParse { line: usize, message: String },
    #[error("solution text line {line}: {message}")]
    SolutionParse { line: usize, message: String },
    #[error("solution does not assign `{0}`, whose lower bound is not 0")]
    MissingValue(String),
}

/// Handle to a model variable; indexes the model's declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// An integer variable with inclusive finite bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.lower == 0 && self.upper == 1
    }
}

/// Constraint sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A named linear constraint `sum(coeff * var) <relation> rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(i64, VarId)>,
    pub relation: Relation,
    pub rhs: i64,
}

/// An integer linear program with a minimization objective.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IlpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(i64, VarId)>,
}

impl IlpModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares an integer variable with inclusive bounds. Declaration order
    /// is the solver's branching order.
    pub fn add_var(&mut self, name: impl Into<String>, lower: i64, upper: i64) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        id
    }

    /// Declares a 0/1 variable.
    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0, 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(i64, VarId)>,
        relation: Relation,
        rhs: i64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
    }

    /// Sets the minimization objective.
    pub fn set_objective(&mut self, terms: Vec<(i64, VarId)>) {
        self.objective = terms;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(i64, VarId)] {
        &self.objective
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    /// Maps variable names to ids; usable only on validated models (unique
    /// names).
    pub fn name_index(&self) -> BTreeMap<&str, VarId> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), VarId(i)))
            .collect()
    }

    /// Checks structural validity: bounds ordered, names unique, every
    /// constraint and objective term referencing a declared variable.
    pub fn validate(&self) -> Result<(), IlpError> {
        let mut names: BTreeMap<&str, usize> = BTreeMap::new();
        for var in &self.variables {
            if var.lower > var.upper {
                return Err(IlpError::InvertedBounds {
                    name: var.name.clone(),
                    lower: var.lower,
                    upper: var.upper,
                });
            }
            if names.insert(var.name.as_str(), 1).is_some() {
                return Err(IlpError::DuplicateName(var.name.clone()));
            }
        }
        for constraint in &self.constraints {
            for &(_, VarId(id)) in &constraint.terms {
                if id >= self.variables.len() {
                    return Err(IlpError::UnknownVarId {
                        constraint: constraint.name.clone(),
                        id,
                    });
                }
            }
        }
        for &(_, VarId(id)) in &self.objective {
            if id >= self.variables.len() {
                return Err(IlpError::UnknownVarId {
                    constraint: "<objective>".into(),
                    id,
                });
            }
        }
        Ok(())
    }

    /// Objective value of a full assignment (one value per variable, in
    /// declaration order).
    pub fn objective_value(&self, values: &[i64]) -> i64 {
        self.objective
            .iter()
            .map(|&(coeff, VarId(id))| {
                i128::from(coeff) * i128::from(values[id])
            })
            .sum::<i128>() as i64
    }

    /// Verifies a full assignment against bounds and every constraint,
    /// returning its objective value. The error names the first violated
    /// bound or constraint.
    pub fn check_assignment(&self, values: &[i64]) -> Result<i64, IlpError> {
        if values.len() != self.variables.len() {
            return Err(IlpError::AssignmentLength {
                got: values.len(),
                want: self.variables.len(),
            });
        }
        for (var, &value) in self.variables.iter().zip(values) {
            if value < var.lower || value > var.upper {
                return Err(IlpError::AssignmentOutOfBounds {
                    name: var.name.clone(),
                    value,
                    lower: var.lower,
                    upper: var.upper,
                });
            }
        }
        for constraint in &self.constraints {
            let lhs: i128 = constraint
                .terms
                .iter()
                .map(|&(coeff, VarId(id))| i128::from(coeff) * i128::from(values[id]))
                .sum();
            let rhs = i128::from(constraint.rhs);
            let holds = match constraint.relation {
                Relation::Le => lhs <= rhs,
                Relation::Eq => lhs == rhs,
                Relation::Ge => lhs >= rhs,
            };
            if !holds {
                return Err(IlpError::ConstraintViolated(constraint.name.clone()));
            }
        }
        Ok(self.objective_value(values))
    }
}

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Search exhausted; the incumbent is a proven optimum.
    Optimal,
    /// Search exhausted; no feasible assignment exists.
    Infeasible,
    /// A budget expired; the best feasible assignment found is returned.
    TimeoutWithIncumbent,
    /// A budget expired before any feasible assignment was found.
    TimeoutNoIncumbent,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeoutWithIncumbent => "timeout-with-incumbent",
            SolveStatus::TimeoutNoIncumbent => "timeout-no-incumbent",
        }
    }
}

/// Result of a solve: status, best assignment (in declaration order) and its
/// objective when one exists, and the number of branch decisions explored.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub values: Option<Vec<i64>>,
    pub objective: Option<i64>,
    pub nodes: u64,
}

/// Search budgets and an optional warm start.
///
/// `node_limit` is the deterministic budget: identical runs spend identical
/// node counts. `time_limit` is a wall-clock backstop that should be sized
/// to never trigger when reproducibility matters. A warm start must be a
/// feasible assignment; it is verified and installed as the first incumbent.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub warm_start: Option<Vec<i64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_limit: None,
            time_limit: Some(Duration::from_secs(30 * 60)),
            warm_start: None,
        }
    }
}
