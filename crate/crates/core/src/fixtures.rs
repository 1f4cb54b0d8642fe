//! Hand-written programs used by tests, benchmarks and the CLI.

use crate::ir::{parse, Program, Value};

/// The syrk kernel: `C[i][j] += alpha * A[i][k] * A[j][k]` over a triple
/// loop nest, with CompCert-style address arithmetic recomputed at every
/// access. `main(ni, nj, alpha, C, A)` fills the arrays, runs the kernel and
/// returns the bit pattern of the sum of `C`.
pub const SYRK: &str = include_str!("../fixtures/syrk.rtl");

pub fn syrk() -> Program {
    parse(SYRK).expect("syrk fixture parses")
}

/// Arguments for `main` of [`SYRK`]; `ni <= 4`, `nj <= 8`.
pub fn syrk_args(p: &Program, ni: i32, nj: i32, alpha: f64) -> Vec<Value> {
    let block = |s: &str| {
        crate::interp::Genv::new(p)
            .block_of(s)
            .expect("fixture global")
    };
    vec![
        Value::I32(ni),
        Value::I32(nj),
        Value::F64(alpha),
        Value::Ptr {
            block: block("C"),
            offset: 0,
        },
        Value::Ptr {
            block: block("A"),
            offset: 0,
        },
    ]
}
