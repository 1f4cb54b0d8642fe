use clap::{Args, Parser, Subcommand};
use licm::cse3::CallMode;
use licm::difftest::{difftest, DiffConfig};
use licm::dup::{verify_dup, RevMap};
use licm::gen::GenConfig;
use licm::interp::{run, Genv, DEFAULT_FUEL};
use licm::ir::{parse, print, Instruction, Program, Value};
use licm::pipeline::{optimize, parse_passes, stats, Pipeline};
use licm::typing::{infer, Ty};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: u8 = 1;
const REJECTED: u8 = 2;
const VIOLATION: u8 = 3;

/// Loop unrolling, rotation and CSE over a small RTL-style IR, with checkers
/// for every transformation.
#[derive(Parser)]
#[command(name = "licm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipeArgs {
    /// Comma-separated passes among unroll, rotate, cse3, selfmove, dce.
    #[arg(long, default_value = "unroll,cse3,selfmove,dce")]
    passes: String,
    /// Largest loop body, in nodes, that unroll will copy.
    #[arg(long, default_value_t = 30)]
    unroll_threshold: usize,
    /// Keep register equations across calls (memory equations are still dropped).
    #[arg(long)]
    cse3_across_calls: bool,
    /// Do not add `rd = r'` when an assignment recomputes an available value.
    #[arg(long)]
    no_cse3_glb_moves: bool,
}

impl PipeArgs {
    fn pipeline(&self) -> Result<Pipeline, String> {
        let mut p = Pipeline::new(&parse_passes(&self.passes)?);
        p.unroll_threshold = self.unroll_threshold;
        if self.cse3_across_calls {
            p.cse3.across_calls = CallMode::ForgetMemOnly;
        }
        p.cse3.glb_moves = !self.no_cse3_glb_moves;
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a program and print it.
    Opt {
        /// Input program, or `-` for standard input.
        input: PathBuf,
        #[command(flatten)]
        pipe: PipeArgs,
        /// Print the cse3 invariants of each function to standard error.
        #[arg(long)]
        dump_invariants: bool,
        /// Write the program here instead of standard output.
        #[arg(short = 'o')]
        output: Option<PathBuf>,
        /// Write the reverse node maps of the duplication passes as JSON.
        #[arg(long)]
        emit_map: Option<PathBuf>,
    },
    /// Interpret `main` and print the external-call trace and the result.
    Run {
        input: PathBuf,
        /// Arguments of `main`: integers, floats, `&GLOBAL[+off]`, or typed
        /// forms such as `i64:5`.
        args: Vec<String>,
        /// Optimize with these passes before running.
        #[arg(long, default_value = "")]
        passes: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the inferred register types of every function.
    Typecheck { input: PathBuf },
    /// Check that TRANSF is ORIG with code duplicated according to MAP.
    CheckDup {
        orig: PathBuf,
        transf: PathBuf,
        /// JSON object mapping transformed node ids to original ones, either
        /// flat or keyed by function name.
        map: PathBuf,
    },
    /// Differential testing of the pipeline on random programs.
    Difftest {
        #[command(flatten)]
        pipe: PipeArgs,
        #[arg(long, default_value_t = 100)]
        programs: u64,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Instruction counts, loop sizes and analysis figures before and after.
    Stats {
        input: PathBuf,
        #[command(flatten)]
        pipe: PipeArgs,
    },
}

struct Failure(u8, String);

impl From<String> for Failure {
    fn from(s: String) -> Failure {
        Failure(USAGE, s)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    let mut s = String::new();
    if path == Path::new("-") {
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| e.to_string())?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Program, Failure> {
    parse(&read(path)?).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure(USAGE, format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure(USAGE, e.to_string())),
    }
}

fn optimized(
    p: &Program,
    pipe: &Pipeline,
) -> Result<(Program, Vec<licm::pipeline::FunctionReport>), Failure> {
    optimize(p, pipe).map_err(|e| Failure(REJECTED, e.to_string()))
}

/// Reads an argument of `main` at the register type inferred for it.
fn parse_arg(s: &str, ty: Ty, genv: &Genv) -> Result<Value, String> {
    let resolve = |g: &str| genv.block_of(g);
    let typed = s.contains(':') || s.starts_with('&') || s.starts_with("ptr(") || s == "undef";
    if typed {
        return Value::parse(s, resolve);
    }
    let bad = || format!("invalid {} argument `{s}`", ty.name());
    match ty {
        Ty::T32 => s.parse().map(Value::I32).map_err(|_| bad()),
        Ty::T64 | Ty::TPtr => s.parse().map(Value::I64).map_err(|_| bad()),
        Ty::TF32 => s.parse().map(Value::F32).map_err(|_| bad()),
        Ty::TF64 => s.parse().map(Value::F64).map_err(|_| bad()),
    }
}

/// Type of parameter `r` of `main`, looking through direct calls when `main`
/// itself does not constrain it.
fn param_type(p: &Program, env: &licm::typing::TypeEnv, r: licm::ir::Reg) -> Ty {
    let main = p.main_function().expect("main exists");
    if env.0.get(&r).is_some_and(|&t| t != Ty::T64) {
        return env.get(r);
    }
    for i in main.code.values() {
        let Instruction::Call { callee, args, .. } = i else {
            continue;
        };
        let Some(g) = p.functions.get(callee) else {
            continue;
        };
        for (k, &a) in args.iter().enumerate() {
            if a == r && k < g.params.len() {
                if let Ok(genv) = infer(g) {
                    if genv.get(g.params[k]) != Ty::T64 {
                        return genv.get(g.params[k]);
                    }
                }
            }
        }
    }
    env.get(r)
}

fn read_maps(text: &str, p: &Program) -> Result<BTreeMap<String, RevMap>, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("map: {e}"))?;
    let obj = v.as_object().ok_or("map: expected a JSON object")?;
    let nested = obj.values().all(|x| x.is_object()) && !obj.is_empty();
    if nested {
        obj.iter()
            .map(|(name, m)| Ok((name.clone(), RevMap::from_json(&m.to_string())?)))
            .collect()
    } else {
        let m = RevMap::from_json(text)?;
        match p.functions.len() {
            1 => Ok(p.functions.keys().map(|k| (k.clone(), m.clone())).collect()),
            _ => Ok([(p.main.clone(), m)].into_iter().collect()),
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Opt {
            input,
            pipe,
            dump_invariants,
            output,
            emit_map,
        } => {
            let p = load(&input)?;
            let (q, reports) = optimized(&p, &pipe.pipeline()?)?;
            if dump_invariants {
                let mut err = std::io::stderr().lock();
                for r in &reports {
                    for (k, inv) in r.invariants.iter().enumerate() {
                        let _ = writeln!(err, "; {} cse3 run {}\n{inv}", r.name, k + 1);
                    }
                }
            }
            if let Some(path) = emit_map {
                let maps: serde_json::Map<String, serde_json::Value> = reports
                    .iter()
                    .map(|r| {
                        let m = serde_json::from_str(&r.map.to_json()).expect("valid json");
                        (r.name.clone(), m)
                    })
                    .collect();
                let text = serde_json::to_string_pretty(&maps).expect("serializable") + "\n";
                write_out(Some(&path), &text)?;
            }
            write_out(output.as_deref(), &print(&q))
        }
        Command::Run {
            input,
            args,
            passes,
            fuel,
            seed,
        } => {
            let mut p = load(&input)?;
            let passes = parse_passes(&passes)?;
            if !passes.is_empty() {
                p = optimized(&p, &Pipeline::new(&passes))?.0;
            }
            let main = p
                .main_function()
                .ok_or_else(|| "program has no main function".to_string())?;
            if main.params.len() != args.len() {
                return Err(format!(
                    "main takes {} arguments, {} given",
                    main.params.len(),
                    args.len()
                )
                .into());
            }
            let env = infer(main)
                .map_err(|e| Failure(REJECTED, format!("{}: ill-typed: {e}", main.name)))?;
            let genv = Genv::new(&p);
            let vals = main
                .params
                .iter()
                .zip(&args)
                .map(|(&r, s)| parse_arg(s, param_type(&p, &env, r), &genv))
                .collect::<Result<Vec<_>, _>>()?;
            let outcome = run(&p, &vals, fuel, seed);
            write_out(None, &format!("{outcome}\n"))
        }
        Command::Typecheck { input } => {
            let p = load(&input)?;
            let mut out = String::new();
            for f in p.functions.values() {
                let env = infer(f)
                    .map_err(|e| Failure(REJECTED, format!("{}: ill-typed: {e}", f.name)))?;
                out.push_str(&format!("function {}\n{env}", f.name));
            }
            write_out(None, &out)
        }
        Command::CheckDup { orig, transf, map } => {
            let (o, t) = (load(&orig)?, load(&transf)?);
            let maps = read_maps(&read(&map)?, &t)?;
            for (name, tf) in &t.functions {
                let of = o.functions.get(name).ok_or_else(|| {
                    Failure(REJECTED, format!("{name}: not in the original program"))
                })?;
                let m = maps
                    .get(name)
                    .cloned()
                    .unwrap_or_else(|| RevMap::identity(tf));
                verify_dup(of, tf, &m)
                    .map_err(|e| Failure(REJECTED, format!("{name}: rejected: {e}")))?;
            }
            if let Some(name) = o.functions.keys().find(|n| !t.functions.contains_key(*n)) {
                return Err(Failure(
                    REJECTED,
                    format!("{name}: missing from the transformed program"),
                ));
            }
            write_out(None, "accepted\n")
        }
        Command::Difftest {
            pipe,
            programs,
            runs,
            fuel,
            seed,
        } => {
            let cfg = DiffConfig {
                gen: GenConfig {
                    seed,
                    ..GenConfig::default()
                },
                programs,
                runs,
                fuel,
            };
            let r = difftest(&cfg, &pipe.pipeline()?);
            write_out(None, &format!("{r}\n"))?;
            if let Some(c) = &r.first {
                return Err(Failure(VIOLATION, format!("first counterexample:\n{c}")));
            }
            if !r.ok() {
                return Err(Failure(
                    REJECTED,
                    "some programs could not be optimized".into(),
                ));
            }
            Ok(())
        }
        Command::Stats { input, pipe } => {
            let p = load(&input)?;
            let s = stats(&p, &pipe.pipeline()?).map_err(|e| Failure(REJECTED, e.to_string()))?;
            let text: String = s.iter().map(|f| f.to_string()).collect();
            write_out(None, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
