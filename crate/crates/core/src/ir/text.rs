//! Text format.
//!
//! ```text
//! global "A" size 64
//! main f
//!
//! function f(r1, r2) stack 0 {
//!   entry 1
//!   1: r3 = add32 r1, r2 -> 2
//!   2: r4 = mulimm32 r3, #5 -> 3
//!   3: r5 = load int32 [global "A" + 8] -> 4
//!   4: store int32 [r6 + r7 * 4 + 0] r4 -> 5
//!   5: if lt32 r1, r2 then 6 else 7
//!   6: r8 = call "ext" (r1, r2) -> 7
//!   7: return r4
//! }
//! ```
//!
//! Immediates are written `#n` after the register operands. `//` starts a
//! comment. The printer emits nodes in ascending order, one per line, and
//! always writes the `main` directive.

use super::{
    validate, AddrMode, Chunk, Condition, Diagnostic, Function, Instruction, NodeId, Operation,
    Program, Reg,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Arrow,
    Punct(char),
}

fn tokenize(line: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && cs.get(i + 1) == Some(&'/') {
            break;
        } else if c == '-' && cs.get(i + 1) == Some(&'>') {
            out.push(Tok::Arrow);
            i += 2;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = cs[start..i].iter().collect();
            let v = s
                .parse::<u64>()
                .map_err(|_| format!("integer too large: {s}"))?;
            out.push(Tok::Int(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_' || cs[i] == '.') {
                i += 1;
            }
            out.push(Tok::Ident(cs[start..i].iter().collect()));
        } else if c == '"' {
            let start = i + 1;
            i += 1;
            while i < cs.len() && cs[i] != '"' {
                i += 1;
            }
            if i == cs.len() {
                return Err("unterminated string".into());
            }
            out.push(Tok::Str(cs[start..i].iter().collect()));
            i += 1;
        } else if ":=[]+*,(){}#-".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Tok>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn punct(&mut self, c: char) -> Result<(), String> {
        match self.next() {
            Some(Tok::Punct(x)) if x == c => Ok(()),
            other => Err(format!("expected `{c}`, found {}", show(other.as_ref()))),
        }
    }

    fn arrow(&mut self) -> Result<(), String> {
        match self.next() {
            Some(Tok::Arrow) => Ok(()),
            other => Err(format!("expected `->`, found {}", show(other.as_ref()))),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), String> {
        match self.next() {
            Some(Tok::Ident(x)) if x == k => Ok(()),
            other => Err(format!("expected `{k}`, found {}", show(other.as_ref()))),
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Ident(x)) => Ok(x),
            other => Err(format!(
                "expected identifier, found {}",
                show(other.as_ref())
            )),
        }
    }

    fn string(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Str(x)) => Ok(x),
            other => Err(format!("expected string, found {}", show(other.as_ref()))),
        }
    }

    fn uint(&mut self) -> Result<u64, String> {
        match self.next() {
            Some(Tok::Int(x)) => Ok(x),
            other => Err(format!("expected integer, found {}", show(other.as_ref()))),
        }
    }

    fn int(&mut self) -> Result<i64, String> {
        let neg = self.at_punct('-');
        if neg {
            self.pos += 1;
        }
        let m = self.uint()?;
        signed(neg, m)
    }

    fn node(&mut self) -> Result<NodeId, String> {
        let v = self.uint()?;
        u32::try_from(v)
            .map(NodeId)
            .map_err(|_| format!("node label out of range: {v}"))
    }

    fn reg(&mut self) -> Result<Reg, String> {
        let id = self.ident()?;
        parse_reg(&id).ok_or_else(|| format!("expected register, found `{id}`"))
    }

    fn end(&self) -> Result<(), String> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("trailing input at {}", show(Some(t)))),
        }
    }
}

fn signed(neg: bool, m: u64) -> Result<i64, String> {
    if neg {
        if m == 1 << 63 {
            Ok(i64::MIN)
        } else {
            i64::try_from(m)
                .map(|v| -v)
                .map_err(|_| "integer out of range".into())
        }
    } else {
        i64::try_from(m).map_err(|_| "integer out of range".into())
    }
}

fn show(t: Option<&Tok>) -> String {
    match t {
        None => "end of line".into(),
        Some(Tok::Ident(s)) => format!("`{s}`"),
        Some(Tok::Int(v)) => format!("`{v}`"),
        Some(Tok::Str(s)) => format!("\"{s}\""),
        Some(Tok::Arrow) => "`->`".into(),
        Some(Tok::Punct(c)) => format!("`{c}`"),
    }
}

fn parse_reg(s: &str) -> Option<Reg> {
    let digits = s.strip_prefix('r')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(Reg)
}

fn is_reg_token(t: Option<&Tok>) -> bool {
    matches!(t, Some(Tok::Ident(s)) if parse_reg(s).is_some())
}

fn parse_addr(c: &mut Cursor) -> Result<(AddrMode, Vec<Reg>), String> {
    c.punct('[')?;
    let out = if c.at_ident("global") {
        c.pos += 1;
        let symbol = c.string()?;
        let offset = parse_offset(c)?;
        (AddrMode::Global { symbol, offset }, vec![])
    } else {
        let base = c.reg()?;
        if c.at_punct('+') && is_reg_token(c.toks.get(c.pos + 1)) {
            c.pos += 1;
            let index = c.reg()?;
            c.punct('*')?;
            let s = c.uint()?;
            let scale = u8::try_from(s).map_err(|_| format!("bad scale {s}"))?;
            let offset = parse_offset(c)?;
            (AddrMode::Indexed { scale, offset }, vec![base, index])
        } else {
            let offset = parse_offset(c)?;
            (AddrMode::Based { offset }, vec![base])
        }
    };
    c.punct(']')?;
    Ok(out)
}

fn parse_offset(c: &mut Cursor) -> Result<i64, String> {
    match c.next() {
        Some(Tok::Punct('+')) => c.int(),
        Some(Tok::Punct('-')) => {
            let m = c.uint()?;
            signed(true, m)
        }
        other => Err(format!(
            "expected `+` or `-`, found {}",
            show(other.as_ref())
        )),
    }
}

fn parse_reg_list(c: &mut Cursor) -> Result<Vec<Reg>, String> {
    c.punct('(')?;
    let mut regs = Vec::new();
    if !c.at_punct(')') {
        loop {
            regs.push(c.reg()?);
            if c.at_punct(',') {
                c.pos += 1;
            } else {
                break;
            }
        }
    }
    c.punct(')')?;
    Ok(regs)
}

fn parse_instruction(c: &mut Cursor) -> Result<Instruction, String> {
    if c.at_ident("store") {
        c.pos += 1;
        let cname = c.ident()?;
        let chunk = Chunk::from_name(&cname).ok_or_else(|| format!("unknown chunk `{cname}`"))?;
        let (mode, args) = parse_addr(c)?;
        let src = c.reg()?;
        c.arrow()?;
        let succ = c.node()?;
        return Ok(Instruction::Store {
            chunk,
            mode,
            args,
            src,
            succ,
        });
    }
    if c.at_ident("if") {
        c.pos += 1;
        let cname = c.ident()?;
        let cond =
            Condition::from_name(&cname).ok_or_else(|| format!("unknown condition `{cname}`"))?;
        let a = c.reg()?;
        c.punct(',')?;
        let b = c.reg()?;
        c.keyword("then")?;
        let ifso = c.node()?;
        c.keyword("else")?;
        let ifnot = c.node()?;
        return Ok(Instruction::Cond {
            cond,
            args: vec![a, b],
            ifso,
            ifnot,
        });
    }
    if c.at_ident("nop") {
        c.pos += 1;
        c.arrow()?;
        return Ok(Instruction::Nop { succ: c.node()? });
    }
    if c.at_ident("return") {
        c.pos += 1;
        let value = if c.peek().is_some() {
            Some(c.reg()?)
        } else {
            None
        };
        return Ok(Instruction::Return { value });
    }
    let dest = c.reg()?;
    c.punct('=')?;
    let name = c.ident()?;
    match name.as_str() {
        "load" => {
            let cname = c.ident()?;
            let chunk =
                Chunk::from_name(&cname).ok_or_else(|| format!("unknown chunk `{cname}`"))?;
            let (mode, args) = parse_addr(c)?;
            c.arrow()?;
            let succ = c.node()?;
            Ok(Instruction::Load {
                chunk,
                mode,
                args,
                dest,
                succ,
            })
        }
        "call" => {
            let callee = c.string()?;
            let args = parse_reg_list(c)?;
            c.arrow()?;
            let succ = c.node()?;
            Ok(Instruction::Call {
                callee,
                args,
                dest,
                succ,
            })
        }
        _ => {
            let mut args = Vec::new();
            let mut imm = None;
            if !matches!(c.peek(), Some(Tok::Arrow)) {
                loop {
                    if c.at_punct('#') {
                        c.pos += 1;
                        imm = Some(c.int()?);
                    } else {
                        if imm.is_some() {
                            return Err("register operand after immediate".into());
                        }
                        args.push(c.reg()?);
                    }
                    if c.at_punct(',') {
                        c.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            let op = Operation::from_parts(&name, imm).ok_or_else(|| match imm {
                Some(i) => format!("unknown operation `{name}` with immediate #{i}"),
                None => format!("unknown operation `{name}` (or missing immediate)"),
            })?;
            c.arrow()?;
            let succ = c.node()?;
            Ok(Instruction::Op {
                op,
                args,
                dest,
                succ,
            })
        }
    }
}

/// Parses and validates a program.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let p = parse_unchecked(text)?;
    let diags = validate(&p);
    if diags.is_empty() {
        Ok(p)
    } else {
        Err(ParseError::Invalid(diags))
    }
}

/// Parses a program without validating it.
pub fn parse_unchecked(text: &str) -> Result<Program, ParseError> {
    let mut functions = BTreeMap::new();
    let mut globals = BTreeMap::new();
    let mut main: Option<String> = None;
    let mut first_fn: Option<String> = None;
    let mut current: Option<(Function, Option<NodeId>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ParseError::Syntax { line, message };
        let toks = tokenize(raw).map_err(err)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks, pos: 0 };
        match current.as_mut() {
            None => {
                let kw = c.ident().map_err(err)?;
                match kw.as_str() {
                    "global" => {
                        let sym = c.string().map_err(err)?;
                        c.keyword("size").map_err(err)?;
                        let size = c.uint().map_err(err)?;
                        c.end().map_err(err)?;
                        if globals.insert(sym.clone(), size).is_some() {
                            return Err(err(format!("duplicate global `{sym}`")));
                        }
                    }
                    "main" => {
                        let name = c.ident().map_err(err)?;
                        c.end().map_err(err)?;
                        main = Some(name);
                    }
                    "function" => {
                        let name = c.ident().map_err(err)?;
                        let params = parse_reg_list(&mut c).map_err(err)?;
                        c.keyword("stack").map_err(err)?;
                        let stacksize = c.uint().map_err(err)?;
                        c.punct('{').map_err(err)?;
                        c.end().map_err(err)?;
                        if functions.contains_key(&name) {
                            return Err(err(format!("duplicate function `{name}`")));
                        }
                        first_fn.get_or_insert_with(|| name.clone());
                        current = Some((
                            Function {
                                name,
                                params,
                                entry: NodeId(0),
                                code: BTreeMap::new(),
                                stacksize,
                            },
                            None,
                        ));
                    }
                    other => return Err(err(format!("unexpected `{other}` at top level"))),
                }
            }
            Some((f, entry)) => {
                if c.at_punct('}') {
                    c.pos += 1;
                    c.end().map_err(err)?;
                    let (mut f, entry) = current.take().expect("inside function");
                    f.entry =
                        entry.ok_or_else(|| err(format!("function `{}` has no entry", f.name)))?;
                    functions.insert(f.name.clone(), f);
                } else if c.at_ident("entry") {
                    c.pos += 1;
                    let n = c.node().map_err(err)?;
                    c.end().map_err(err)?;
                    if entry.replace(n).is_some() {
                        return Err(err("duplicate entry directive".into()));
                    }
                } else {
                    let n = c.node().map_err(err)?;
                    c.punct(':').map_err(err)?;
                    let ins = parse_instruction(&mut c).map_err(err)?;
                    c.end().map_err(err)?;
                    if f.code.insert(n, ins).is_some() {
                        return Err(err(format!("duplicate node {n}")));
                    }
                }
            }
        }
    }
    if let Some((f, _)) = current {
        return Err(ParseError::Syntax {
            line: text.lines().count(),
            message: format!("unterminated function `{}`", f.name),
        });
    }
    let main = main
        .or_else(|| functions.contains_key("main").then(|| "main".to_string()))
        .or(first_fn)
        .ok_or(ParseError::Syntax {
            line: 0,
            message: "no function defined".into(),
        })?;
    Ok(Program {
        functions,
        globals,
        main,
    })
}

/// Parses a single `function ... { ... }` block.
pub fn parse_function(text: &str) -> Result<Function, ParseError> {
    let p = parse_unchecked(text)?;
    let n = p.functions.len();
    let mut fs = p.functions.into_values();
    match (n, fs.next()) {
        (1, Some(f)) => {
            let diags = super::validate_function(&f, &super::Scope::default());
            if diags.is_empty() {
                Ok(f)
            } else {
                Err(ParseError::Invalid(diags))
            }
        }
        _ => Err(ParseError::Syntax {
            line: 0,
            message: format!("expected exactly one function, found {n}"),
        }),
    }
}

fn addr_text(mode: &AddrMode, args: &[Reg]) -> String {
    let reg = |i: usize| {
        args.get(i)
            .map_or_else(|| "r0".to_string(), |r| r.to_string())
    };
    let off = |o: i64| {
        if o < 0 {
            format!("- {}", o.unsigned_abs())
        } else {
            format!("+ {o}")
        }
    };
    match mode {
        AddrMode::Based { offset } => format!("[{} {}]", reg(0), off(*offset)),
        AddrMode::Indexed { scale, offset } => {
            format!("[{} + {} * {} {}]", reg(0), reg(1), scale, off(*offset))
        }
        AddrMode::Global { symbol, offset } => format!("[global \"{symbol}\" {}]", off(*offset)),
    }
}

fn join(regs: &[Reg]) -> String {
    regs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn instruction_text(i: &Instruction) -> String {
    match i {
        Instruction::Op {
            op,
            args,
            dest,
            succ,
        } => {
            let mut operands: Vec<String> = args.iter().map(|r| r.to_string()).collect();
            if let Some(imm) = op.immediate() {
                operands.push(format!("#{imm}"));
            }
            if operands.is_empty() {
                format!("{dest} = {} -> {succ}", op.name())
            } else {
                format!("{dest} = {} {} -> {succ}", op.name(), operands.join(", "))
            }
        }
        Instruction::Load {
            chunk,
            mode,
            args,
            dest,
            succ,
        } => format!(
            "{dest} = load {} {} -> {succ}",
            chunk.name(),
            addr_text(mode, args)
        ),
        Instruction::Store {
            chunk,
            mode,
            args,
            src,
            succ,
        } => format!(
            "store {} {} {src} -> {succ}",
            chunk.name(),
            addr_text(mode, args)
        ),
        Instruction::Cond {
            cond,
            args,
            ifso,
            ifnot,
        } => format!("if {} {} then {ifso} else {ifnot}", cond.name(), join(args)),
        Instruction::Call {
            callee,
            args,
            dest,
            succ,
        } => format!("{dest} = call \"{callee}\" ({}) -> {succ}", join(args)),
        Instruction::Nop { succ } => format!("nop -> {succ}"),
        Instruction::Return { value: None } => "return".into(),
        Instruction::Return { value: Some(r) } => format!("return {r}"),
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&instruction_text(self))
    }
}

/// Right-hand-side text used by equation dumps: `add32(r1,r2)`,
/// `mulimm32(r2,#5)`, `load int64[r1 + 8]`.
pub(crate) fn op_rhs_text(op: &Operation, args: &[Reg]) -> String {
    let mut operands: Vec<String> = args.iter().map(|r| r.to_string()).collect();
    if let Some(imm) = op.immediate() {
        operands.push(format!("#{imm}"));
    }
    format!("{}({})", op.name(), operands.join(","))
}

pub(crate) fn load_rhs_text(chunk: Chunk, mode: &AddrMode, args: &[Reg]) -> String {
    format!("load {}{}", chunk.name(), addr_text(mode, args))
}

pub fn print_function(f: &Function) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "function {}({}) stack {} {{",
        f.name,
        join(&f.params),
        f.stacksize
    );
    let _ = writeln!(s, "  entry {}", f.entry);
    for (n, i) in &f.code {
        let _ = writeln!(s, "  {n}: {}", instruction_text(i));
    }
    s.push_str("}\n");
    s
}

pub fn print(p: &Program) -> String {
    let mut s = String::new();
    for (sym, size) in &p.globals {
        let _ = writeln!(s, "global \"{sym}\" size {size}");
    }
    let _ = writeln!(s, "main {}", p.main);
    for f in p.functions.values() {
        s.push('\n');
        s.push_str(&print_function(f));
    }
    s
}
