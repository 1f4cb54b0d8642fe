//! Pass composition with the checkers in the loop: every duplication pass is
//! validated against its reverse mapping, and every CSE analysis result is
//! re-checked for inductiveness before the rewrite uses it.

use crate::cleanup::{dce, elim_self_moves};
use crate::cse3::{
    self, analyze, check_inductive, dump_invariants, AnalysisError, CheckError, Opts,
};
use crate::dup::{find_loops, rotate_all, unroll_all, verify_dup, Rejected, RevMap};
use crate::ir::{Function, NodeId, Program};
use crate::typing::{infer, IllTyped};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    Unroll,
    Rotate,
    Cse3,
    SelfMove,
    Dce,
}

impl Pass {
    pub fn name(self) -> &'static str {
        match self {
            Pass::Unroll => "unroll",
            Pass::Rotate => "rotate",
            Pass::Cse3 => "cse3",
            Pass::SelfMove => "selfmove",
            Pass::Dce => "dce",
        }
    }
}

impl FromStr for Pass {
    type Err = String;

    fn from_str(s: &str) -> Result<Pass, String> {
        Ok(match s {
            "unroll" => Pass::Unroll,
            "rotate" => Pass::Rotate,
            "cse3" => Pass::Cse3,
            "selfmove" => Pass::SelfMove,
            "dce" => Pass::Dce,
            _ => return Err(format!("unknown pass `{s}`")),
        })
    }
}

/// Parses a comma-separated pass list; the empty string is the empty list.
pub fn parse_passes(s: &str) -> Result<Vec<Pass>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(Pass::from_str)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pipeline {
    pub passes: Vec<Pass>,
    pub unroll_threshold: usize,
    pub cse3: Opts,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            passes: Vec::new(),
            unroll_threshold: 30,
            cse3: Opts::default(),
        }
    }
}

impl Pipeline {
    pub fn new(passes: &[Pass]) -> Pipeline {
        Pipeline {
            passes: passes.to_vec(),
            ..Pipeline::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PipelineError {
    IllTyped {
        function: String,
        error: IllTyped,
    },
    Analysis {
        function: String,
        error: AnalysisError,
    },
    DupRejected {
        function: String,
        pass: Pass,
        error: Rejected,
    },
    NotInductive {
        function: String,
        error: CheckError,
    },
}

impl PipelineError {
    /// Whether a checker refused a pass result.
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            PipelineError::DupRejected { .. } | PipelineError::NotInductive { .. }
        )
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::IllTyped { function, error } => {
                write!(f, "{function}: ill-typed: {error}")
            }
            PipelineError::Analysis { function, error } => write!(f, "{function}: {error}"),
            PipelineError::DupRejected {
                function,
                pass,
                error,
            } => {
                write!(f, "{function}: {} output rejected: {error}", pass.name())
            }
            PipelineError::NotInductive { function, error } => {
                write!(f, "{function}: cse3 invariants rejected: {error}")
            }
        }
    }
}

impl std::error::Error for PipelineError {}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FunctionReport {
    pub name: String,
    /// Equation catalog size and worklist iterations of each cse3 run.
    pub cse3_runs: Vec<(usize, u64)>,
    /// Invariant dump of each cse3 run.
    pub invariants: Vec<String>,
    pub loops_transformed: usize,
    /// Reverse map of the duplication passes, composed in order.
    pub map: RevMap,
    pub time: Duration,
}

pub fn optimize_function(
    f: &Function,
    pipe: &Pipeline,
) -> Result<(Function, FunctionReport), PipelineError> {
    let start = Instant::now();
    let name = f.name.clone();
    let mut report = FunctionReport {
        name: name.clone(),
        map: RevMap::identity(f),
        ..FunctionReport::default()
    };
    let mut cur = f.clone();
    for &pass in &pipe.passes {
        cur = match pass {
            Pass::Unroll | Pass::Rotate => {
                let (next, map, n) = if pass == Pass::Unroll {
                    unroll_all(&cur, pipe.unroll_threshold)
                } else {
                    rotate_all(&cur)
                };
                verify_dup(&cur, &next, &map).map_err(|error| PipelineError::DupRejected {
                    function: name.clone(),
                    pass,
                    error,
                })?;
                report.loops_transformed += n;
                report.map = map.then(&report.map);
                next
            }
            Pass::Cse3 => {
                let env = infer(&cur).map_err(|error| PipelineError::IllTyped {
                    function: name.clone(),
                    error,
                })?;
                let a =
                    analyze(&cur, &env, &pipe.cse3).map_err(|error| PipelineError::Analysis {
                        function: name.clone(),
                        error,
                    })?;
                let catalog = a.tables.catalog().clone();
                let mut checked = check_inductive(&cur, &env, &pipe.cse3, &catalog, &a.invariants)
                    .map_err(|error| PipelineError::NotInductive {
                        function: name.clone(),
                        error,
                    })?;
                report.cse3_runs.push((catalog.len(), a.iterations));
                report
                    .invariants
                    .push(dump_invariants(&catalog, &checked.invariants));
                cse3::rewrite(&cur, &mut checked, &pipe.cse3)
            }
            Pass::SelfMove => elim_self_moves(&cur),
            Pass::Dce => dce(&cur),
        };
    }
    report.time = start.elapsed();
    Ok((cur, report))
}

pub fn optimize(
    p: &Program,
    pipe: &Pipeline,
) -> Result<(Program, Vec<FunctionReport>), PipelineError> {
    let mut out = p.clone();
    let mut reports = Vec::new();
    for (name, f) in &p.functions {
        let (g, r) = optimize_function(f, pipe)?;
        out.functions.insert(name.clone(), g);
        reports.push(r);
    }
    Ok((out, reports))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopStats {
    pub header: NodeId,
    pub nodes: usize,
    pub ops_loads: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionStats {
    pub name: String,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub ops_loads_before: usize,
    pub ops_loads_after: usize,
    pub loops_before: Vec<LoopStats>,
    pub loops_after: Vec<LoopStats>,
    pub report: FunctionReport,
}

pub fn loop_stats(f: &Function) -> Vec<LoopStats> {
    find_loops(f)
        .into_iter()
        .map(|l| LoopStats {
            header: l.header,
            nodes: l.body.len(),
            ops_loads: f.count_ops_loads(&l.body),
        })
        .collect()
}

pub fn stats(p: &Program, pipe: &Pipeline) -> Result<Vec<FunctionStats>, PipelineError> {
    let (q, reports) = optimize(p, pipe)?;
    Ok(reports
        .into_iter()
        .map(|report| {
            let (f, g) = (&p.functions[&report.name], &q.functions[&report.name]);
            FunctionStats {
                name: report.name.clone(),
                nodes_before: f.code.len(),
                nodes_after: g.code.len(),
                ops_loads_before: f.count_ops_loads(f.code.keys()),
                ops_loads_after: g.count_ops_loads(g.code.keys()),
                loops_before: loop_stats(f),
                loops_after: loop_stats(g),
                report,
            }
        })
        .collect())
}

impl fmt::Display for FunctionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function {}", self.name)?;
        writeln!(f, "  nodes: {} -> {}", self.nodes_before, self.nodes_after)?;
        writeln!(
            f,
            "  ops+loads: {} -> {}",
            self.ops_loads_before, self.ops_loads_after
        )?;
        for (tag, loops) in [("before", &self.loops_before), ("after", &self.loops_after)] {
            for l in loops {
                writeln!(
                    f,
                    "  loop {} ({tag}): {} nodes, {} ops+loads",
                    l.header, l.nodes, l.ops_loads
                )?;
            }
        }
        for (catalog, iterations) in &self.report.cse3_runs {
            writeln!(f, "  cse3: {catalog} equations, {iterations} iterations")?;
        }
        writeln!(f, "  time: {:.3} ms", self.report.time.as_secs_f64() * 1e3)
    }
}
