//! Block-monomial truncations for traces on large balls.
//!
//! Every operator built from `λ(φ)`, `λ(g)` and `P` sends each block `δ_h ⊗
//! L²_m` into a single block, so a product can be followed one source block at
//! a time without ever forming the `|B_R|·dim_m` square matrix. The semantics
//! match [`super::Truncation`] exactly; only the storage differs.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::boundary::depth_mass;
use crate::error::{Error, Result};
use crate::function::LocallyConstantFunction;
use crate::group::{GroupParams, ReducedWord};
use crate::scalar::{rational_to_f64, GaussRational};

/// Cap on `|B_R| · dim_m²`, the matrix entries a full block pass touches.
pub const DEFAULT_BLOCK_BUDGET: u128 = 50_000_000;

/// The image of one source block.
#[derive(Clone, Debug)]
pub enum BlockEntry {
    /// The block is sent outside the ball.
    Leaked,
    Map {
        target: usize,
        matrix: DMatrix<Complex64>,
        /// False when a multiplier was compressed from a deeper level.
        exact: bool,
    },
}

#[derive(Clone, Debug)]
pub struct BlockTruncation {
    params: GroupParams,
    radius: usize,
    level: usize,
    ball: Vec<ReducedWord>,
    index: HashMap<ReducedWord, usize>,
    /// Coordinates of the constant 1 in a block.
    unit: DVector<Complex64>,
}

impl BlockTruncation {
    pub fn build(params: GroupParams, radius: usize, level: usize) -> Result<Self> {
        BlockTruncation::build_with_budget(params, radius, level, DEFAULT_BLOCK_BUDGET)
    }

    pub fn build_with_budget(params: GroupParams, radius: usize, level: usize, budget: u128) -> Result<Self> {
        if level == 0 {
            return Err(Error::domain("the function level of a truncation must be at least 1"));
        }
        let dim = params.sphere_count(level);
        let requested = params.growth_count(radius).saturating_mul(dim.saturating_mul(dim));
        if requested > budget {
            return Err(Error::Budget { what: "block truncation entries", requested, cap: budget });
        }
        let ball = params.ball(radius)?;
        let index = ball.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
        let cell = rational_to_f64(&depth_mass(&params, level)).sqrt();
        Ok(BlockTruncation {
            params,
            radius,
            level,
            ball,
            index,
            unit: DVector::from_element(dim as usize, Complex64::new(cell, 0.0)),
        })
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ball(&self) -> &[ReducedWord] {
        &self.ball
    }

    pub fn block_of(&self, g: &ReducedWord) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn level_dim(&self) -> usize {
        self.unit.len()
    }

    /// Diagonal of `λ(φ)` on block `b` and whether it is exact.
    pub fn multiplier(&self, phi: &LocallyConstantFunction, b: usize) -> (Vec<Complex64>, bool) {
        let shifted = phi.translate(&self.ball[b].inverse());
        let exact = shifted.depth() <= self.level;
        let values = shifted.average_to(self.level).values().iter().map(GaussRational::to_complex).collect();
        (values, exact)
    }

    /// `P X` for a block matrix `X`; `P = u uᵀ` is rank one.
    pub fn left_p(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let row = self.unit.transpose() * x;
        &self.unit * row
    }

    /// `X P`.
    pub fn right_p(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let col = x * &self.unit;
        col * self.unit.transpose()
    }

    /// `[P, λ(φ)λ(g)]` restricted to source block `b`.
    pub fn commutator_block(&self, phi: &LocallyConstantFunction, g: &ReducedWord, b: usize) -> BlockEntry {
        let Some(target) = self.block_of(&g.mul(&self.ball[b])) else {
            return BlockEntry::Leaked;
        };
        let (diag, exact) = self.multiplier(phi, target);
        let x = DMatrix::from_diagonal(&DVector::from_vec(diag));
        let matrix = self.left_p(&x) - self.right_p(&x);
        BlockEntry::Map { target, matrix, exact }
    }

    /// Follows `(2P − 1) X_0 ⋯ X_n` from source block `b`, where `X_i =
    /// [P, λ(φ_i)λ(g_i)]`. Returns the block trace when the chain returns to
    /// `b` and zero otherwise; a chain that leaks out of the ball is reported
    /// as zero and inexact.
    pub fn chain_trace(&self, terms: &[(LocallyConstantFunction, ReducedWord)], b: usize) -> ChainTrace {
        let mut block = b;
        let mut acc: Option<DMatrix<Complex64>> = None;
        let mut exact = true;
        for (phi, g) in terms.iter().rev() {
            match self.commutator_block(phi, g, block) {
                BlockEntry::Leaked => return ChainTrace { value: Complex64::new(0.0, 0.0), exact: false },
                BlockEntry::Map { target, matrix, exact: e } => {
                    exact &= e;
                    block = target;
                    acc = Some(match acc {
                        None => matrix,
                        Some(prev) => matrix * prev,
                    });
                }
            }
        }
        if block != b {
            return ChainTrace { value: Complex64::new(0.0, 0.0), exact };
        }
        let m = acc.unwrap_or_else(|| DMatrix::identity(self.level_dim(), self.level_dim()));
        // tr((2P − 1) M) = 2 uᵀ M u − tr M.
        let pm = (self.unit.transpose() * &m * &self.unit)[(0, 0)];
        ChainTrace { value: pm * 2.0 - m.trace(), exact }
    }
}

/// One block's contribution to a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainTrace {
    pub value: Complex64,
    pub exact: bool,
}
