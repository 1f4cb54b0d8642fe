use std::fmt;
use std::hash::{Hash, Hasher};

/// A runtime value. Floats compare by bit pattern.
#[derive(Clone, Copy, Debug)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
    Ptr { block: u32, offset: i64 },
    Undef,
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (*self, *other) {
            (I32(a), I32(b)) => a == b,
            (I64(a), I64(b)) => a == b,
            (F32(a), F32(b)) => a.to_bits() == b.to_bits(),
            (F64(a), F64(b)) => a.to_bits() == b.to_bits(),
            (
                Ptr {
                    block: b1,
                    offset: o1,
                },
                Ptr {
                    block: b2,
                    offset: o2,
                },
            ) => b1 == b2 && o1 == o2,
            (Undef, Undef) => true,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        use Value::*;
        std::mem::discriminant(self).hash(state);
        match *self {
            I32(a) => a.hash(state),
            I64(a) => a.hash(state),
            F32(a) => a.to_bits().hash(state),
            F64(a) => a.to_bits().hash(state),
            Ptr { block, offset } => (block, offset).hash(state),
            Undef => {}
        }
    }
}

impl Value {
    pub fn is_undef(&self) -> bool {
        matches!(self, Value::Undef)
    }

    /// Parses the text form. `&sym` and `&sym+off` denote a pointer into a
    /// global, resolved to a block id through `resolve`; a bare integer is
    /// an `i32`.
    pub fn parse(s: &str, resolve: impl Fn(&str) -> Option<u32>) -> Result<Value, String> {
        let s = s.trim();
        let bad = || format!("invalid value `{s}`");
        if s == "undef" {
            return Ok(Value::Undef);
        }
        if let Some(rest) = s.strip_prefix('&') {
            let (sym, off) = match rest.find(['+', '-']) {
                Some(i) => (&rest[..i], rest[i..].parse::<i64>().map_err(|_| bad())?),
                None => (rest, 0),
            };
            let block = resolve(sym).ok_or_else(|| format!("unknown global `{sym}`"))?;
            return Ok(Value::Ptr { block, offset: off });
        }
        if let Some(inner) = s.strip_prefix("ptr(").and_then(|r| r.strip_suffix(')')) {
            let (b, o) = inner.split_once(',').ok_or_else(bad)?;
            return Ok(Value::Ptr {
                block: b.trim().parse().map_err(|_| bad())?,
                offset: o.trim().parse().map_err(|_| bad())?,
            });
        }
        if let Some((kind, payload)) = s.split_once(':') {
            let hex = |p: &str| -> Result<u64, String> {
                let h = p.strip_prefix("0x").ok_or_else(bad)?;
                u64::from_str_radix(h, 16).map_err(|_| bad())
            };
            return match kind {
                "i32" => payload.parse().map(Value::I32).map_err(|_| bad()),
                "i64" => payload.parse().map(Value::I64).map_err(|_| bad()),
                "f32" => {
                    let bits = u32::try_from(hex(payload)?).map_err(|_| bad())?;
                    Ok(Value::F32(f32::from_bits(bits)))
                }
                "f64" => Ok(Value::F64(f64::from_bits(hex(payload)?))),
                _ => Err(bad()),
            };
        }
        s.parse().map(Value::I32).map_err(|_| bad())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Value::I32(v) => write!(f, "i32:{v}"),
            Value::I64(v) => write!(f, "i64:{v}"),
            Value::F32(v) => write!(f, "f32:0x{:08x}", v.to_bits()),
            Value::F64(v) => write!(f, "f64:0x{:016x}", v.to_bits()),
            Value::Ptr { block, offset } => write!(f, "ptr({block},{offset})"),
            Value::Undef => f.write_str("undef"),
        }
    }
}
