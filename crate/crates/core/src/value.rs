//! The N-bit value domain shared by the interpreter and the pushdown layer.
//!
//! Integers and booleans live in one domain `0..2^N`. Arithmetic wraps,
//! comparisons and logical connectives produce `0`/`1`, and any nonzero
//! value counts as true.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{BinOp, Expr};

/// Largest supported bit-width for a single variable.
pub const MAX_BITS: u32 = 16;

/// Bit-width used when none is given.
pub const DEFAULT_BITS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    bits: u32,
}

impl Domain {
    pub fn new(bits: u32) -> Result<Self, DomainError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(DomainError::BadWidth(bits));
        }
        Ok(Domain { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn mask(self) -> u64 {
        (1u64 << self.bits) - 1
    }

    /// Number of distinct values, `2^N`.
    pub fn size(self) -> u64 {
        1u64 << self.bits
    }

    pub fn values(self) -> impl Iterator<Item = u64> {
        0..self.size()
    }

    pub fn contains(self, v: u64) -> bool {
        v <= self.mask()
    }

    pub fn apply(self, op: BinOp, a: u64, b: u64) -> u64 {
        let m = self.mask();
        match op {
            BinOp::Add => a.wrapping_add(b) & m,
            BinOp::Sub => a.wrapping_sub(b) & m,
            BinOp::Mul => a.wrapping_mul(b) & m,
            BinOp::Lt => (a < b) as u64,
            BinOp::Le => (a <= b) as u64,
            BinOp::Gt => (a > b) as u64,
            BinOp::Ge => (a >= b) as u64,
            BinOp::Eq => (a == b) as u64,
            BinOp::Ne => (a != b) as u64,
            BinOp::And => (a != 0 && b != 0) as u64,
            BinOp::Or => (a != 0 || b != 0) as u64,
        }
    }

    pub fn not(self, a: u64) -> u64 {
        (a == 0) as u64
    }

    /// Evaluates an expression with a caller-supplied variable lookup.
    pub fn eval<E>(
        self,
        expr: &Expr,
        lookup: &mut impl FnMut(&str) -> Result<u64, E>,
    ) -> Result<u64, E> {
        Ok(match expr {
            Expr::Const(c) => c & self.mask(),
            Expr::Var(name) => lookup(name)? & self.mask(),
            Expr::Not(inner) => self.not(self.eval(inner, lookup)?),
            Expr::Binary(op, lhs, rhs) => {
                let a = self.eval(lhs, lookup)?;
                let b = self.eval(rhs, lookup)?;
                self.apply(*op, a, b)
            }
        })
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-bit", self.bits)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("bit-width must be between 1 and {MAX_BITS}, got {0}")]
    BadWidth(u32),
    #[error("constant {constant} does not fit in {bits} bits (range 0..{max})", max = (1u64 << bits) - 1)]
    ConstantTooLarge { constant: u64, bits: u32 },
}
