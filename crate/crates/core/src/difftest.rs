//! Differential testing of the optimizer against the interpreter.

use crate::gen::{generate, GenConfig};
use crate::interp::{outcome_refines, run, Outcome, Status};
use crate::ir::{print, Program, Value};
use crate::pipeline::{optimize, Pipeline};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

#[derive(Clone, Debug)]
pub struct DiffConfig {
    pub gen: GenConfig,
    pub programs: u64,
    pub runs: u64,
    pub fuel: u64,
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub index: u64,
    pub program: Program,
    pub optimized: Program,
    pub args: Vec<Value>,
    pub seed: u64,
    pub before: Outcome,
    pub after: Outcome,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|v| v.to_string()).collect();
        writeln!(
            f,
            "program {} args ({}) seed {}",
            self.index,
            args.join(", "),
            self.seed
        )?;
        writeln!(f, "--- original\n{}", print(&self.program))?;
        writeln!(f, "--- optimized\n{}", print(&self.optimized))?;
        writeln!(f, "--- original outcome\n{}", self.before)?;
        write!(f, "--- optimized outcome\n{}", self.after)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub programs: u64,
    pub runs: u64,
    pub returned: u64,
    pub trapped: u64,
    pub out_of_fuel: u64,
    /// Programs whose optimization was refused by a checker.
    pub rejected: u64,
    /// Programs the pipeline failed on for another reason.
    pub errors: Vec<(u64, String)>,
    pub violations: u64,
    pub first: Option<Counterexample>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.rejected == 0 && self.errors.is_empty()
    }

    fn merge(mut self, o: Report) -> Report {
        self.programs += o.programs;
        self.runs += o.runs;
        self.returned += o.returned;
        self.trapped += o.trapped;
        self.out_of_fuel += o.out_of_fuel;
        self.rejected += o.rejected;
        self.errors.extend(o.errors);
        self.violations += o.violations;
        self.first = match (self.first, o.first) {
            (Some(a), Some(b)) => Some(if a.index <= b.index { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "programs: {}", self.programs)?;
        writeln!(f, "runs: {}", self.runs)?;
        writeln!(f, "returned: {}", self.returned)?;
        writeln!(f, "trapped: {}", self.trapped)?;
        writeln!(f, "out of fuel: {}", self.out_of_fuel)?;
        writeln!(f, "rejected: {}", self.rejected)?;
        for (i, e) in &self.errors {
            writeln!(f, "error in program {i}: {e}")?;
        }
        write!(f, "violations: {}", self.violations)
    }
}

/// Seed of run `run` of program `index`.
pub fn run_seed(base: u64, index: u64, run: u64) -> u64 {
    base.wrapping_mul(0x2545_f491_4f6c_dd1d)
        ^ index.rotate_left(32)
        ^ run.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn test_one(cfg: &DiffConfig, pipe: &Pipeline, index: u64) -> Report {
    let g = generate(&cfg.gen, index);
    let mut r = Report {
        programs: 1,
        ..Report::default()
    };
    let optimized = match optimize(&g.program, pipe) {
        Ok((p, _)) => p,
        Err(e) if e.is_rejection() => {
            r.rejected = 1;
            return r;
        }
        Err(e) => {
            r.errors.push((index, e.to_string()));
            return r;
        }
    };
    for k in 0..cfg.runs {
        let seed = run_seed(cfg.gen.seed, index, k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let args = g.inputs(&mut rng);
        let before = run(&g.program, &args, cfg.fuel, seed);
        let after = run(&optimized, &args, cfg.fuel, seed);
        r.runs += 1;
        match before.status {
            Status::Returned(_) => r.returned += 1,
            Status::Trapped(_) => r.trapped += 1,
            Status::OutOfFuel => r.out_of_fuel += 1,
        }
        if !outcome_refines(&before, &after) {
            r.violations += 1;
            if r.first.is_none() {
                r.first = Some(Counterexample {
                    index,
                    program: g.program.clone(),
                    optimized: optimized.clone(),
                    args,
                    seed,
                    before,
                    after,
                });
            }
        }
    }
    r
}

/// Optimizes `cfg.programs` generated programs and compares each against the
/// original on `cfg.runs` inputs. The report does not depend on scheduling.
pub fn difftest(cfg: &DiffConfig, pipe: &Pipeline) -> Report {
    let mut r = (0..cfg.programs)
        .into_par_iter()
        .map(|i| test_one(cfg, pipe, i))
        .reduce(Report::default, Report::merge);
    r.errors.sort_by_key(|e| e.0);
    r
}
