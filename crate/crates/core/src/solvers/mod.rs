//! Dense deterministic solvers: a two-phase simplex for linear programs and a
//! dual active-set method for the Gaussian-prior quadratic programs.

pub mod lp;
pub mod qp;

use serde::{Deserialize, Serialize};

/// Orientation of one linear constraint row against its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    /// `a . x <= b`
    Le,
    /// `a . x >= b`
    Ge,
    /// `a . x = b`
    Eq,
}

impl Sense {
    pub fn flipped(self) -> Sense {
        match self {
            Sense::Le => Sense::Ge,
            Sense::Ge => Sense::Le,
            Sense::Eq => Sense::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}
