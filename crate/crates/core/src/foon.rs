//! Functional object-oriented network (FOON) files and motion statistics.
//!
//! The file format is line oriented:
//!
//! ```text
//! O<TAB>object label
//! S<TAB>state of the preceding object
//! M<TAB>motion label
//! O<TAB>output object
//! //
//! ```
//!
//! Object lines before the `M` line are unit inputs, lines after it are
//! outputs, and `//` closes the functional unit. Blank lines are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::taxonomy::{normalize_label, MotionCode, MotionLexicon};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FoonError {
    #[error("line {line}: malformed line: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("functional unit {unit} (ending line {line}) has no motion line")]
    MissingMotion { unit: usize, line: usize },
    #[error("functional unit {unit}: second motion line at line {line}")]
    MultipleMotions { unit: usize, line: usize },
    #[error("functional unit {unit} (ending line {line}) has no {side} objects")]
    MissingObjects {
        unit: usize,
        line: usize,
        side: &'static str,
    },
    #[error("functional unit {unit} is not terminated by `//`")]
    Truncated { unit: usize },
    #[error("graph has no functional units")]
    EmptyGraph,
    #[error("top-k requires k >= 1")]
    InvalidK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectNode {
    pub label: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MotionNode {
    pub label: String,
    pub code: Option<MotionCode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FunctionalUnit {
    pub inputs: Vec<ObjectNode>,
    pub motion: MotionNode,
    pub outputs: Vec<ObjectNode>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FoonGraph {
    pub units: Vec<FunctionalUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub objects: usize,
    pub motions: usize,
    pub total: usize,
}

#[derive(Debug, Default)]
struct PendingUnit {
    inputs: Vec<ObjectNode>,
    motion: Option<MotionNode>,
    outputs: Vec<ObjectNode>,
    touched: bool,
}

impl PendingUnit {
    fn last_object(&mut self) -> Option<&mut ObjectNode> {
        if self.motion.is_some() {
            self.outputs.last_mut()
        } else {
            self.inputs.last_mut()
        }
    }
}

/// Parses a FOON file. Labels and states are case-folded and
/// whitespace-collapsed.
pub fn parse_foon(text: &str) -> Result<FoonGraph, FoonError> {
    let mut graph = FoonGraph::default();
    let mut pending = PendingUnit::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.trim() == "//" {
            let unit = graph.units.len() + 1;
            let motion = pending.motion.take().ok_or(FoonError::MissingMotion {
                unit,
                line: line_no,
            })?;
            for (side, objs) in [("input", &pending.inputs), ("output", &pending.outputs)] {
                if objs.is_empty() {
                    return Err(FoonError::MissingObjects {
                        unit,
                        line: line_no,
                        side,
                    });
                }
            }
            graph.units.push(FunctionalUnit {
                inputs: std::mem::take(&mut pending.inputs),
                motion,
                outputs: std::mem::take(&mut pending.outputs),
            });
            pending = PendingUnit::default();
            continue;
        }

        let (tag, rest) = line.split_once('\t').ok_or_else(|| FoonError::Malformed {
            line: line_no,
            reason: "expected `<tag><TAB><label>` or `//`".into(),
        })?;
        let label = normalize_label(rest);
        if label.is_empty() {
            return Err(FoonError::Malformed {
                line: line_no,
                reason: "empty label".into(),
            });
        }
        pending.touched = true;
        match tag {
            "O" => {
                let node = ObjectNode {
                    label,
                    states: Vec::new(),
                };
                if pending.motion.is_some() {
                    pending.outputs.push(node);
                } else {
                    pending.inputs.push(node);
                }
            }
            "S" => match pending.last_object() {
                Some(obj) => obj.states.push(label),
                None => {
                    return Err(FoonError::Malformed {
                        line: line_no,
                        reason: "state line without a preceding object".into(),
                    })
                }
            },
            "M" => {
                if pending.motion.is_some() {
                    return Err(FoonError::MultipleMotions {
                        unit: graph.units.len() + 1,
                        line: line_no,
                    });
                }
                pending.motion = Some(MotionNode { label, code: None });
            }
            other => {
                return Err(FoonError::Malformed {
                    line: line_no,
                    reason: format!("unknown tag {other:?}"),
                })
            }
        }
    }

    if pending.touched {
        return Err(FoonError::Truncated {
            unit: graph.units.len() + 1,
        });
    }
    Ok(graph)
}

/// Object node instances are counted per occurrence.
pub fn node_counts(g: &FoonGraph) -> NodeCounts {
    let objects = g
        .units
        .iter()
        .map(|u| u.inputs.len() + u.outputs.len())
        .sum();
    let motions = g.units.len();
    NodeCounts {
        objects,
        motions,
        total: objects + motions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub motion: String,
    pub count: usize,
    pub share: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<MotionCode>,
}

/// Motion counts sorted by count (descending), ties by label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub rows: Vec<FrequencyRow>,
    pub total_motion_nodes: usize,
}

pub fn motion_frequency(g: &FoonGraph) -> Result<FrequencyReport, FoonError> {
    if g.units.is_empty() {
        return Err(FoonError::EmptyGraph);
    }
    let mut counts: BTreeMap<&str, (usize, Option<MotionCode>)> = BTreeMap::new();
    for unit in &g.units {
        let slot = counts.entry(unit.motion.label.as_str()).or_default();
        slot.0 += 1;
        slot.1 = slot.1.or(unit.motion.code);
    }
    let total = g.units.len();
    let mut rows: Vec<FrequencyRow> = counts
        .into_iter()
        .map(|(motion, (count, code))| FrequencyRow {
            motion: motion.to_string(),
            count,
            share: count as f64 / total as f64,
            code,
        })
        .collect();
    // BTreeMap order already gives the lexicographic tie-break; sort is stable.
    rows.sort_by_key(|r| std::cmp::Reverse(r.count));
    Ok(FrequencyReport {
        rows,
        total_motion_nodes: total,
    })
}

impl FrequencyReport {
    /// Fraction of motion nodes covered by the `k` most frequent motions.
    pub fn top_k_coverage(&self, k: usize) -> Result<f64, FoonError> {
        top_k_coverage(self, k)
    }

    /// Writes `rank,motion,count,share,code` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "motion", "count", "share", "code"])?;
        for (i, row) in self.rows.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                row.motion.clone(),
                row.count.to_string(),
                format!("{:.6}", row.share),
                row.code.map(|c| c.render()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn top_k_coverage(report: &FrequencyReport, k: usize) -> Result<f64, FoonError> {
    if k < 1 {
        return Err(FoonError::InvalidK);
    }
    if report.total_motion_nodes == 0 {
        return Ok(0.0);
    }
    let covered: usize = report.rows.iter().take(k).map(|r| r.count).sum();
    Ok(covered as f64 / report.total_motion_nodes as f64)
}

/// Attaches codes to motion nodes whose labels resolve in `lex`. Returns the
/// annotated graph and each unresolved label once, in first-seen order.
pub fn annotate_motions(g: &FoonGraph, lex: &MotionLexicon) -> (FoonGraph, Vec<String>) {
    let mut out = g.clone();
    let mut unknown = Vec::new();
    let mut seen = BTreeSet::new();
    for unit in &mut out.units {
        match lex.lookup(&unit.motion.label) {
            Ok(code) => unit.motion.code = Some(code),
            Err(_) => {
                unit.motion.code = None;
                if seen.insert(unit.motion.label.clone()) {
                    unknown.push(unit.motion.label.clone());
                }
            }
        }
    }
    (out, unknown)
}
