//! Test vectors, vector suites, and the suite text format.
//!
//! A test vector commands every valve on the chip (open or closed) and
//! records the expected fault-free observation at every sink port. Flow
//! vectors open exactly the valves of one source-to-sink path, so a valve
//! stuck closed on that path kills the expected pressure; cut vectors close
//! exactly the valves of one separating cut, so any valve of the cut stuck
//! open leaks pressure to a sink that should stay dry.
//!
//! Suites serialize to a line-oriented text document. Valve states appear as
//! a bit string over the chip's canonical valve order and expectations as a
//! bit string over the recorded sink order, so a suite is byte-identical
//! across runs whenever generation is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chip::{ChipError, ChipSpec, EdgeClass, EdgeId};
use crate::cuts::{dual_ends, segment_edge, Corner, CutGeneration};
use crate::faultsim::{propagate, CompiledSuite, FaultSet};
use crate::flow::{FlowGeneration, FlowPath};
use crate::ilp::SolveStatus;

/// Errors raised while assembling, serializing, parsing, or verifying
/// suites.
#[derive(Debug, Error)]
pub enum VectorError {
    #[error("suite text line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("suite was generated for chip {expected}, but this chip hashes to {found}")]
    ChipMismatch { expected: String, found: String },
    #[error("vector {index} does not command valve {valve}")]
    MissingValveState { index: usize, valve: EdgeId },
    #[error("vector {index} commands {edge}, which is not a valve on this chip")]
    NotAValve { index: usize, edge: EdgeId },
    #[error("assembled suite never {polarity} valve {valve}, so one stuck fault would escape")]
    PolarityGap { valve: EdgeId, polarity: &'static str },
    #[error("assembly needs at least one generated family")]
    EmptyAssembly,
    #[error("chip error: {0}")]
    Chip(#[from] ChipError),
    #[error("fault simulation error: {0}")]
    Fault(#[from] crate::faultsim::FaultError),
}

/// Which detection family a vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorKind {
    /// Opens exactly one source-to-sink path; detects valves stuck closed.
    Flow,
    /// Closes exactly one separating cut; detects valves stuck open.
    Cut,
}

impl VectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VectorKind::Flow => "flow",
            VectorKind::Cut => "cut",
        }
    }
}

/// Which families a suite carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteMode {
    Flow,
    Cut,
    Both,
}

impl SuiteMode {
    pub fn includes_flow(&self) -> bool {
        matches!(self, SuiteMode::Flow | SuiteMode::Both)
    }

    pub fn includes_cut(&self) -> bool {
        matches!(self, SuiteMode::Cut | SuiteMode::Both)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteMode::Flow => "flow",
            SuiteMode::Cut => "cut",
            SuiteMode::Both => "both",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "flow" => Some(SuiteMode::Flow),
            "cut" => Some(SuiteMode::Cut),
            "both" => Some(SuiteMode::Both),
            _ => None,
        }
    }
}

/// One test vector: full valve commands plus expected sink observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestVector {
    pub kind: VectorKind,
    /// Index of the generating path (within the suite's flow paths) or cut
    /// (within its cut sets).
    pub provenance: usize,
    /// Commanded state of every valve: `true` = open.
    pub states: BTreeMap<EdgeId, bool>,
    /// Expected fault-free observation: sink port edge -> pressurized.
    pub expected: BTreeMap<EdgeId, bool>,
    /// For flow vectors: the edge walk of the generating path, source port
    /// to sink port, used to re-check path structure at verify time.
    pub route: Option<Vec<EdgeId>>,
    /// For cut vectors: the corner walk of the separating dual path that
    /// produced the cut, used to re-check chordlessness at verify time.
    pub dual: Option<Vec<(usize, usize)>>,
}

/// Solver summary for one generated family. Node counts are deterministic;
/// wall-clock times are deliberately absent so documents are reproducible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilyStats {
    pub count: usize,
    pub status: SolveStatus,
    pub nodes: u64,
}

/// A generated (or parsed) suite of test vectors for one chip.
#[derive(Clone, Debug)]
pub struct VectorSuite {
    pub chip_sha256: String,
    pub mode: SuiteMode,
    /// Sink port edges in the order expectation bits are recorded.
    pub sink_order: Vec<EdgeId>,
    pub flow_stats: Option<FamilyStats>,
    pub cut_stats: Option<FamilyStats>,
    pub vectors: Vec<TestVector>,
}

fn status_from_str(s: &str) -> Option<SolveStatus> {
    match s {
        "optimal" => Some(SolveStatus::Optimal),
        "infeasible" => Some(SolveStatus::Infeasible),
        "timeout-with-incumbent" => Some(SolveStatus::TimeoutWithIncumbent),
        "timeout-no-incumbent" => Some(SolveStatus::TimeoutNoIncumbent),
        _ => None,
    }
}

fn fmt_edge_list(edges: &[EdgeId]) -> String {
    edges
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for VectorSuite {
    /// The canonical suite document.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite_version = 1")?;
        writeln!(f, "chip_sha256 = {}", self.chip_sha256)?;
        writeln!(f, "mode = {}", self.mode.as_str())?;
        let valve_count = self.vectors.first().map_or(0, |v| v.states.len());
        writeln!(f, "valve_count = {valve_count}")?;
        writeln!(f, "sink_order = {}", fmt_edge_list(&self.sink_order))?;
        if let Some(stats) = &self.flow_stats {
            writeln!(f, "flow_paths = {}", stats.count)?;
            writeln!(f, "flow_status = {}", stats.status.as_str())?;
            writeln!(f, "flow_nodes = {}", stats.nodes)?;
        }
        if let Some(stats) = &self.cut_stats {
            writeln!(f, "cut_sets = {}", stats.count)?;
            writeln!(f, "cut_status = {}", stats.status.as_str())?;
            writeln!(f, "cut_nodes = {}", stats.nodes)?;
        }
        writeln!(f, "vector_count = {}", self.vectors.len())?;
        for (i, vector) in self.vectors.iter().enumerate() {
            writeln!(f)?;
            writeln!(f, "[vector {i}]")?;
            writeln!(f, "kind = {}", vector.kind.as_str())?;
            writeln!(f, "provenance = {}", vector.provenance)?;
            let states: String = vector
                .states
                .values()
                .map(|&open| if open { '1' } else { '0' })
                .collect();
            writeln!(f, "states = {states}")?;
            let expected: String = self
                .sink_order
                .iter()
                .map(|sink| {
                    if vector.expected.get(sink).copied().unwrap_or(false) {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            writeln!(f, "expected = {expected}")?;
            if let Some(route) = &vector.route {
                writeln!(f, "route = {}", fmt_edge_list(route))?;
            }
            if let Some(dual) = &vector.dual {
                let corners: Vec<String> =
                    dual.iter().map(|(r, c)| format!("({r},{c})")).collect();
                writeln!(f, "dual = {}", corners.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Writes the canonical suite document.
pub fn write_suite(suite: &VectorSuite) -> String {
    suite.to_string()
}

/// Parses a suite document against the chip it was generated for. The
/// chip hash must match: state bits are positional over the chip's
/// canonical valve order, so a different chip would misread them.
pub fn parse_suite(chip: &ChipSpec, text: &str) -> Result<VectorSuite, VectorError> {
    let valves = chip.valves();
    let chip_hash = chip.sha256_hex();

    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut vectors: Vec<TestVector> = Vec::new();
    let mut current: Option<(usize, BTreeMap<String, (usize, String)>)> = None;

    let finish_vector = |index: usize,
                         fields: &BTreeMap<String, (usize, String)>,
                         sink_order: &[EdgeId]|
     -> Result<TestVector, VectorError> {
        let get = |key: &str| -> Result<(usize, String), VectorError> {
            fields.get(key).cloned().ok_or_else(|| VectorError::Parse {
                line: 0,
                message: format!("vector {index} is missing `{key}`"),
            })
        };
        let (line, kind_str) = get("kind")?;
        let kind = match kind_str.as_str() {
            "flow" => VectorKind::Flow,
            "cut" => VectorKind::Cut,
            other => {
                return Err(VectorError::Parse {
                    line,
                    message: format!("unknown vector kind `{other}`"),
                })
            }
        };
        let (line, prov_str) = get("provenance")?;
        let provenance: usize = prov_str.parse().map_err(|_| VectorError::Parse {
            line,
            message: format!("provenance must be an index, got `{prov_str}`"),
        })?;
        let (line, bits) = get("states")?;
        if bits.len() != valves.len() {
            return Err(VectorError::Parse {
                line,
                message: format!(
                    "states has {} bits but the chip has {} valves",
                    bits.len(),
                    valves.len()
                ),
            });
        }
        let mut states = BTreeMap::new();
        for (valve, ch) in valves.iter().zip(bits.chars()) {
            let open = match ch {
                '1' => true,
                '0' => false,
                other => {
                    return Err(VectorError::Parse {
                        line,
                        message: format!("states bit must be 0 or 1, got `{other}`"),
                    })
                }
            };
            states.insert(*valve, open);
        }
        let (line, bits) = get("expected")?;
        if bits.len() != sink_order.len() {
            return Err(VectorError::Parse {
                line,
                message: format!(
                    "expected has {} bits but sink_order has {} sinks",
                    bits.len(),
                    sink_order.len()
                ),
            });
        }
        let mut expected = BTreeMap::new();
        for (sink, ch) in sink_order.iter().zip(bits.chars()) {
            expected.insert(*sink, ch == '1');
        }
        let route = match fields.get("route") {
            Some((line, value)) => {
                let mut edges = Vec::new();
                for token in value.split_whitespace() {
                    edges.push(parse_edge_token(token, *line)?);
                }
                Some(edges)
            }
            None => None,
        };
        let dual = match fields.get("dual") {
            Some((line, value)) => {
                let mut corners = Vec::new();
                for token in value.split_whitespace() {
                    let inner = token
                        .strip_prefix('(')
                        .and_then(|t| t.strip_suffix(')'))
                        .ok_or_else(|| VectorError::Parse {
                            line: *line,
                            message: format!("expected `(row,col)`, got `{token}`"),
                        })?;
                    let (r, c) = inner.split_once(',').ok_or_else(|| VectorError::Parse {
                        line: *line,
                        message: format!("expected `(row,col)`, got `{token}`"),
                    })?;
                    let parse = |s: &str| -> Result<usize, VectorError> {
                        s.parse().map_err(|_| VectorError::Parse {
                            line: *line,
                            message: format!("expected `(row,col)` integers, got `{token}`"),
                        })
                    };
                    corners.push((parse(r)?, parse(c)?));
                }
                Some(corners)
            }
            None => None,
        };
        Ok(TestVector {
            kind,
            provenance,
            states,
            expected,
            route,
            dual,
        })
    };

    // First pass: collect header fields and per-vector field maps.
    let mut vector_fields: Vec<(usize, BTreeMap<String, (usize, String)>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[vector ") {
            let index: usize = rest
                .strip_suffix(']')
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| VectorError::Parse {
                    line: line_no,
                    message: format!("malformed vector header `{line}`"),
                })?;
            if let Some(done) = current.take() {
                vector_fields.push(done);
            }
            current = Some((index, BTreeMap::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(VectorError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        match &mut current {
            Some((_, fields)) => {
                fields.insert(key, (line_no, value));
            }
            None => {
                header.insert(key, (line_no, value));
            }
        }
    }
    if let Some(done) = current.take() {
        vector_fields.push(done);
    }

    let header_get = |key: &str| -> Result<(usize, String), VectorError> {
        header.get(key).cloned().ok_or_else(|| VectorError::Parse {
            line: 0,
            message: format!("missing header `{key}`"),
        })
    };

    let (line, version) = header_get("suite_version")?;
    if version != "1" {
        return Err(VectorError::Parse {
            line,
            message: format!("unsupported suite_version `{version}`"),
        });
    }
    let (_, expected_hash) = header_get("chip_sha256")?;
    if expected_hash != chip_hash {
        return Err(VectorError::ChipMismatch {
            expected: expected_hash,
            found: chip_hash,
        });
    }
    let (line, mode_str) = header_get("mode")?;
    let mode = SuiteMode::from_str(&mode_str).ok_or_else(|| VectorError::Parse {
        line,
        message: format!("unknown mode `{mode_str}`"),
    })?;
    let (line, count_str) = header_get("valve_count")?;
    let valve_count: usize = count_str.parse().map_err(|_| VectorError::Parse {
        line,
        message: format!("valve_count must be an integer, got `{count_str}`"),
    })?;
    if valve_count != valves.len() {
        return Err(VectorError::Parse {
            line,
            message: format!(
                "valve_count is {valve_count} but the chip has {} valves",
                valves.len()
            ),
        });
    }
    let (line, sink_str) = header_get("sink_order")?;
    let mut sink_order = Vec::new();
    for token in sink_str.split_whitespace() {
        sink_order.push(parse_edge_token(token, line)?);
    }

    let parse_stats = |prefix: &str| -> Result<Option<FamilyStats>, VectorError> {
        let count_key = if prefix == "flow" {
            "flow_paths"
        } else {
            "cut_sets"
        };
        let Some((line, count_str)) = header.get(count_key).cloned() else {
            return Ok(None);
        };
        let count = count_str.parse().map_err(|_| VectorError::Parse {
            line,
            message: format!("{count_key} must be an integer"),
        })?;
        let (line, status_str) =
            header
                .get(&format!("{prefix}_status"))
                .cloned()
                .ok_or_else(|| VectorError::Parse {
                    line: 0,
                    message: format!("missing header `{prefix}_status`"),
                })?;
        let status = status_from_str(&status_str).ok_or_else(|| VectorError::Parse {
            line,
            message: format!("unknown status `{status_str}`"),
        })?;
        let (line, nodes_str) =
            header
                .get(&format!("{prefix}_nodes"))
                .cloned()
                .ok_or_else(|| VectorError::Parse {
                    line: 0,
                    message: format!("missing header `{prefix}_nodes`"),
                })?;
        let nodes = nodes_str.parse().map_err(|_| VectorError::Parse {
            line,
            message: format!("{prefix}_nodes must be an integer"),
        })?;
        Ok(Some(FamilyStats {
            count,
            status,
            nodes,
        }))
    };
    let flow_stats = parse_stats("flow")?;
    let cut_stats = parse_stats("cut")?;

    let (line, vc_str) = header_get("vector_count")?;
    let vector_count: usize = vc_str.parse().map_err(|_| VectorError::Parse {
        line,
        message: format!("vector_count must be an integer, got `{vc_str}`"),
    })?;
    if vector_count != vector_fields.len() {
        return Err(VectorError::Parse {
            line,
            message: format!(
                "vector_count is {vector_count} but the document has {} vectors",
                vector_fields.len()
            ),
        });
    }

    for (index, fields) in &vector_fields {
        vectors.push(finish_vector(*index, fields, &sink_order)?);
    }

    Ok(VectorSuite {
        chip_sha256: expected_hash,
        mode,
        sink_order,
        flow_stats,
        cut_stats,
        vectors,
    })
}

fn parse_edge_token(token: &str, line: usize) -> Result<EdgeId, VectorError> {
    let err = || VectorError::Parse {
        line,
        message: format!("expected `h(row,col)` or `v(row,col)`, got `{token}`"),
    };
    let (kind, rest) = token.split_at_checked(1).ok_or_else(err)?;
    let inner = rest
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(err)?;
    let (r, c) = inner.split_once(',').ok_or_else(err)?;
    let row: usize = r.trim().parse().map_err(|_| err())?;
    let col: usize = c.trim().parse().map_err(|_| err())?;
    match kind {
        "h" => Ok(EdgeId::horizontal(row, col)),
        "v" => Ok(EdgeId::vertical(row, col)),
        _ => Err(err()),
    }
}

/// Assembles generated families into an executable suite.
///
/// One vector per flow path (in path order) followed by one per cut set (in
/// cut order). Flow vectors open exactly their path's valves; cut vectors
/// close exactly their cut's valves; every expectation is recomputed by
/// fault-free simulation, never copied from the generator.
///
/// Each family carries a per-valve obligation — some path opens every
/// valve, some cut closes every valve — and assembly fails naming the first
/// valve whose obligation is unmet, because a stuck fault on that valve
/// could escape the family that was supposed to catch it. A suite with both
/// families therefore commands every valve in both polarities.
pub fn assemble(
    chip: &ChipSpec,
    flow: Option<&FlowGeneration>,
    cuts: Option<&CutGeneration>,
) -> Result<VectorSuite, VectorError> {
    let mode = match (flow.is_some(), cuts.is_some()) {
        (true, true) => SuiteMode::Both,
        (true, false) => SuiteMode::Flow,
        (false, true) => SuiteMode::Cut,
        (false, false) => return Err(VectorError::EmptyAssembly),
    };
    let valves = chip.valves();
    let mut vectors: Vec<TestVector> = Vec::new();

    if let Some(flow) = flow {
        let mut opened: BTreeSet<EdgeId> = BTreeSet::new();
        for (index, path) in flow.paths.iter().enumerate() {
            let path_valves = path.valve_set(chip);
            opened.extend(path_valves.iter().copied());
            let states: BTreeMap<EdgeId, bool> = valves
                .iter()
                .map(|&v| (v, path_valves.contains(&v)))
                .collect();
            let expected = propagate(chip, &states, &FaultSet::new())?;
            vectors.push(TestVector {
                kind: VectorKind::Flow,
                provenance: index,
                states,
                expected,
                route: Some(path.edges.clone()),
                dual: None,
            });
        }
        if let Some(&valve) = valves.iter().find(|v| !opened.contains(v)) {
            return Err(VectorError::PolarityGap {
                valve,
                polarity: "opens",
            });
        }
    }

    if let Some(cuts) = cuts {
        let mut closed: BTreeSet<EdgeId> = BTreeSet::new();
        for (index, cut) in cuts.cuts.iter().enumerate() {
            closed.extend(cut.valves.iter().copied());
            let states: BTreeMap<EdgeId, bool> = valves
                .iter()
                .map(|&v| (v, !cut.valves.contains(&v)))
                .collect();
            let expected = propagate(chip, &states, &FaultSet::new())?;
            vectors.push(TestVector {
                kind: VectorKind::Cut,
                provenance: index,
                states,
                expected,
                route: None,
                dual: Some(cut.dual_path.clone()),
            });
        }
        if let Some(&valve) = valves.iter().find(|v| !closed.contains(v)) {
            return Err(VectorError::PolarityGap {
                valve,
                polarity: "closes",
            });
        }
    }

    Ok(VectorSuite {
        chip_sha256: chip.sha256_hex(),
        mode,
        sink_order: chip.sink_ports(),
        flow_stats: flow.map(|f| FamilyStats {
            count: f.paths.len(),
            status: f.status,
            nodes: f.nodes,
        }),
        cut_stats: cuts.map(|c| FamilyStats {
            count: c.cuts.len(),
            status: c.status,
            nodes: c.nodes,
        }),
        vectors,
    })
}

/// Outcome of one verification check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// One-line scope summary (what was checked, how many cases).
    pub detail: String,
    /// Individual failures, in deterministic order.
    pub failures: Vec<String>,
}

/// The verification report: an entry per check. Semantic failures are
/// report entries, never errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorReport {
    pub checks: Vec<CheckResult>,
}

impl VectorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VectorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            let verdict = if check.passed { "pass" } else { "FAIL" };
            writeln!(f, "{} = {} ({})", check.name, verdict, check.detail)?;
            for failure in &check.failures {
                writeln!(f, "  - {failure}")?;
            }
        }
        writeln!(
            f,
            "result = {}",
            if self.all_passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Chips at most this many cells on a side get the exhaustive mixed-pair
/// certificate; larger chips get a fixed-seed sample.
const PAIR_EXHAUSTIVE_SIDE: usize = 8;
/// Sample size for the mixed-pair certificate on large chips.
const PAIR_SAMPLE_CASES: usize = 2000;
/// Fixed seed for the sampled certificate, so reports are reproducible.
const PAIR_SAMPLE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Rebuilds a flow path from a stored route so the flow-path validator can
/// re-check it structurally.
fn path_from_route(chip: &ChipSpec, route: &[EdgeId]) -> Result<FlowPath, String> {
    if route.len() < 2 {
        return Err("route must run port to port".into());
    }
    let first_cell = chip
        .port_cell(route[0])
        .map_err(|_| format!("route starts at {}, which is not a port", route[0]))?;
    let mut cells = vec![first_cell];
    for &edge in &route[1..route.len() - 1] {
        let current = *cells.last().expect("cells is never empty");
        let (a, b) = chip.cells_of_edge(edge);
        let next = if a == Some(current) {
            b
        } else if b == Some(current) {
            a
        } else {
            None
        };
        let Some(next) = next else {
            return Err(format!("route edge {edge} does not continue the walk"));
        };
        cells.push(next);
    }
    Ok(FlowPath {
        edges: route.to_vec(),
        cells,
    })
}

/// Verifies a suite against its chip and reports per-check outcomes:
///
/// * **polarity-coverage** — every valve opens in some flow vector (when
///   the suite carries flow vectors) and closes in some cut vector (when it
///   carries cut vectors);
/// * **expected-observations** — every stored expectation equals a fresh
///   fault-free simulation;
/// * **flow-structure** — every flow vector's stored route is a simple
///   port-to-port path whose valves are exactly the opened set;
/// * **cut-separation** — every cut vector leaves every sink dry;
/// * **cut-criticality** — reopening any single closed valve of a cut
///   vector leaks pressure to some sink, so no commanded valve is padding;
/// * **cut-chordless** — each cut vector's stored junction walk crosses
///   exactly the closed valves, and no open valve spans two walk junctions
///   (such a valve could reopen a path around the blockade unobserved);
/// * **pair-certificate** — for pairs (one valve stuck closed, another
///   stuck open), some vector's observation differs from its expectation;
///   exhaustive on chips up to 8×8 cells, a 2000-case fixed-seed sample
///   above that, and skipped (reported as such) for single-family suites,
///   which only certify their own polarity.
///
/// Infrastructure problems (wrong chip, non-total state maps) surface as
/// errors; everything semantic becomes a report entry.
pub fn verify(chip: &ChipSpec, suite: &VectorSuite) -> Result<VectorReport, VectorError> {
    let found = chip.sha256_hex();
    if suite.chip_sha256 != found {
        return Err(VectorError::ChipMismatch {
            expected: suite.chip_sha256.clone(),
            found,
        });
    }
    for (index, vector) in suite.vectors.iter().enumerate() {
        for &edge in vector.states.keys() {
            if !matches!(chip.edge_class(edge), Ok(EdgeClass::Valve)) {
                return Err(VectorError::NotAValve { index, edge });
            }
        }
        if let Some(&valve) = chip
            .valves()
            .iter()
            .find(|v| !vector.states.contains_key(v))
        {
            return Err(VectorError::MissingValveState { index, valve });
        }
    }

    let valves = chip.valves();
    let mut checks: Vec<CheckResult> = Vec::new();

    // Polarity coverage, per family the suite claims to carry.
    let mut failures: Vec<String> = Vec::new();
    if suite.mode.includes_flow() {
        let mut opened: BTreeSet<EdgeId> = BTreeSet::new();
        for vector in suite.vectors.iter().filter(|v| v.kind == VectorKind::Flow) {
            opened.extend(vector.states.iter().filter(|&(_, &o)| o).map(|(&e, _)| e));
        }
        for &valve in &valves {
            if !opened.contains(&valve) {
                failures.push(format!("no flow vector opens valve {valve}"));
            }
        }
    }
    if suite.mode.includes_cut() {
        let mut closed: BTreeSet<EdgeId> = BTreeSet::new();
        for vector in suite.vectors.iter().filter(|v| v.kind == VectorKind::Cut) {
            closed.extend(vector.states.iter().filter(|&(_, &o)| !o).map(|(&e, _)| e));
        }
        for &valve in &valves {
            if !closed.contains(&valve) {
                failures.push(format!("no cut vector closes valve {valve}"));
            }
        }
    }
    checks.push(CheckResult {
        name: "polarity-coverage",
        passed: failures.is_empty(),
        detail: format!("{} valves, mode {}", valves.len(), suite.mode.as_str()),
        failures: std::mem::take(&mut failures),
    });

    // Expectations must equal a fresh fault-free simulation.
    for (index, vector) in suite.vectors.iter().enumerate() {
        let observed = propagate(chip, &vector.states, &FaultSet::new())?;
        if observed != vector.expected {
            failures.push(format!(
                "vector {index} expectation disagrees with fault-free simulation"
            ));
        }
    }
    checks.push(CheckResult {
        name: "expected-observations",
        passed: failures.is_empty(),
        detail: format!("{} vectors resimulated", suite.vectors.len()),
        failures: std::mem::take(&mut failures),
    });

    // Flow vectors: stored route is a simple port-to-port path opening
    // exactly the commanded valves.
    let mut flow_count = 0usize;
    for (index, vector) in suite.vectors.iter().enumerate() {
        if vector.kind != VectorKind::Flow {
            continue;
        }
        flow_count += 1;
        let Some(route) = &vector.route else {
            failures.push(format!("flow vector {index} records no route to check"));
            continue;
        };
        let path = match path_from_route(chip, route) {
            Ok(path) => path,
            Err(message) => {
                failures.push(format!("flow vector {index}: {message}"));
                continue;
            }
        };
        if let Err(err) = path.validate(chip) {
            failures.push(format!("flow vector {index}: {err}"));
            continue;
        }
        let commanded: BTreeSet<EdgeId> = vector
            .states
            .iter()
            .filter(|&(_, &open)| open)
            .map(|(&e, _)| e)
            .collect();
        if commanded != path.valve_set(chip) {
            failures.push(format!(
                "flow vector {index} opens valves off its own route"
            ));
        }
    }
    checks.push(CheckResult {
        name: "flow-structure",
        passed: failures.is_empty(),
        detail: format!("{flow_count} flow vectors"),
        failures: std::mem::take(&mut failures),
    });

    // Cut vectors: fault-free flow must reach no sink at all.
    let mut cut_count = 0usize;
    for (index, vector) in suite.vectors.iter().enumerate() {
        if vector.kind != VectorKind::Cut {
            continue;
        }
        cut_count += 1;
        let observed = propagate(chip, &vector.states, &FaultSet::new())?;
        for (sink, pressurized) in observed {
            if pressurized {
                failures.push(format!(
                    "cut vector {index} leaks pressure to sink {sink} with no fault injected"
                ));
            }
        }
    }
    checks.push(CheckResult {
        name: "cut-separation",
        passed: failures.is_empty(),
        detail: format!("{cut_count} cut vectors"),
        failures: std::mem::take(&mut failures),
    });

    // Cut vectors: every closed valve must be load-bearing — reopening it
    // alone must leak pressure to some sink.
    let mut reopened = 0usize;
    for (index, vector) in suite.vectors.iter().enumerate() {
        if vector.kind != VectorKind::Cut {
            continue;
        }
        let closed: Vec<EdgeId> = vector
            .states
            .iter()
            .filter(|&(_, &open)| !open)
            .map(|(&e, _)| e)
            .collect();
        for valve in closed {
            reopened += 1;
            let mut states = vector.states.clone();
            states.insert(valve, true);
            let observed = propagate(chip, &states, &FaultSet::new())?;
            if !observed.values().any(|&p| p) {
                failures.push(format!(
                    "cut vector {index}: reopening valve {valve} alone leaks nothing, so the vector cannot catch it stuck open"
                ));
            }
        }
    }
    checks.push(CheckResult {
        name: "cut-criticality",
        passed: failures.is_empty(),
        detail: format!("{reopened} single-valve reopenings"),
        failures: std::mem::take(&mut failures),
    });

    // Cut vectors: the stored junction walk must cross exactly the closed
    // valves, and no open valve may span two walk junctions.
    for (index, vector) in suite.vectors.iter().enumerate() {
        if vector.kind != VectorKind::Cut {
            continue;
        }
        let Some(walk) = &vector.dual else {
            failures.push(format!(
                "cut vector {index} records no junction walk to check"
            ));
            continue;
        };
        if walk.len() < 2 {
            failures.push(format!("cut vector {index}: junction walk is too short"));
            continue;
        }
        let distinct: BTreeSet<Corner> = walk.iter().copied().collect();
        if distinct.len() != walk.len() {
            failures.push(format!(
                "cut vector {index}: junction walk revisits a junction"
            ));
            continue;
        }
        let mut crossed: BTreeSet<EdgeId> = BTreeSet::new();
        let mut walk_ok = true;
        for pair in walk.windows(2) {
            let Some(edge) = segment_edge(pair[0], pair[1]) else {
                failures.push(format!(
                    "cut vector {index}: junctions {:?} and {:?} are not adjacent",
                    pair[0], pair[1]
                ));
                walk_ok = false;
                break;
            };
            match chip.edge_class(edge) {
                Ok(EdgeClass::Valve) => {
                    crossed.insert(edge);
                }
                Ok(_) => {}
                Err(_) => {
                    failures.push(format!(
                        "cut vector {index}: junction walk leaves the chip at {edge}"
                    ));
                    walk_ok = false;
                    break;
                }
            }
        }
        if !walk_ok {
            continue;
        }
        let closed: BTreeSet<EdgeId> = vector
            .states
            .iter()
            .filter(|&(_, &open)| !open)
            .map(|(&e, _)| e)
            .collect();
        if crossed != closed {
            failures.push(format!(
                "cut vector {index}: junction walk crosses different valves than the vector closes"
            ));
            continue;
        }
        for &valve in &valves {
            if crossed.contains(&valve) {
                continue;
            }
            let (a, b) = dual_ends(valve);
            if distinct.contains(&a) && distinct.contains(&b) {
                failures.push(format!(
                    "cut vector {index}: open valve {valve} bridges the blockade walk"
                ));
            }
        }
    }
    checks.push(CheckResult {
        name: "cut-chordless",
        passed: failures.is_empty(),
        detail: format!("{cut_count} junction walks"),
        failures: std::mem::take(&mut failures),
    });

    // Mixed-pair certificate: one valve stuck closed plus another stuck
    // open must disturb some vector's observation. A single-family suite
    // cannot promise this, so it is skipped there and reported as such.
    let detail = if suite.mode != SuiteMode::Both {
        format!(
            "skipped: a {}-only suite certifies one polarity",
            suite.mode.as_str()
        )
    } else {
        let mut compiled = CompiledSuite::new(chip, &suite.vectors)?;
        let slots = compiled.valves().to_vec();
        let n = slots.len();
        let mut cases = 0u64;
        let mut run_case = |i: usize, j: usize, failures: &mut Vec<String>| {
            cases += 1;
            let overrides = [(slots[i].1, false), (slots[j].1, true)];
            if compiled.detects_overrides(&overrides).is_none() {
                failures.push(format!(
                    "{} stuck closed together with {} stuck open escapes every vector",
                    slots[i].0, slots[j].0
                ));
            }
        };
        if chip.rows() <= PAIR_EXHAUSTIVE_SIDE && chip.cols() <= PAIR_EXHAUSTIVE_SIDE {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        run_case(i, j, &mut failures);
                    }
                }
            }
            format!("{cases} ordered pairs, exhaustive")
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SAMPLE_SEED);
            for _ in 0..PAIR_SAMPLE_CASES {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                run_case(i, j, &mut failures);
            }
            format!("{cases} ordered pairs, seeded sample")
        }
    };
    checks.push(CheckResult {
        name: "pair-certificate",
        passed: failures.is_empty(),
        detail,
        failures,
    });

    Ok(VectorReport { checks })
}
