//! Random linear network codes: sampling the mixing matrices A and F over a
//! network, and deriving the global and per-node transfer matrices.
//!
//! The code of a network is the pair (A, F): A holds the source mixing
//! coefficients (row l = process l, column e = edge e; nonzero only on edges
//! leaving the node carrying process l) and F holds the local mixing
//! coefficients (nonzero only on line-graph pairs head(e') = tail(e)).
//! The column of C = A(I-F)^{-1} at edge e is the coefficient vector of the
//! symbol carried on e; the columns at a node's incoming edges are exactly
//! what that node observes.

use crate::galois::FieldContext;
use crate::netgraph::{Network, NodeId};
use crate::seclin;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("need at least one source process, got K={k}")]
    RateTooSmall { k: usize },
    #[error("K={k} exceeds the network min-cut {min_cut}{}", if *.strict { " (strict mode requires K strictly below the cut)" } else { "" })]
    RateExceedsCut {
        k: usize,
        min_cut: usize,
        strict: bool,
    },
    #[error("process map has {got} entries but K={k}")]
    ProcessMapLength { got: usize, k: usize },
    #[error("process {process} is placed at node {node}, which is not a source")]
    ProcessAtNonSource { process: usize, node: NodeId },
    #[error("multiple source nodes require a process map in the graph file")]
    MissingProcessMap,
    #[error("matrix has shape {rows}x{cols}, expected {want_rows}x{want_cols}")]
    BadShape {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("nonzero coefficient at structurally forbidden position ({row}, {col}) of {which}")]
    SupportViolation {
        which: &'static str,
        row: usize,
        col: usize,
    },
    #[error("node {node} out of range")]
    NodeOutOfRange { node: NodeId },
    #[error("node {node} has no incoming edges to observe")]
    NoIncomingEdges { node: NodeId },
    #[error("coefficient {value} out of range for field of size {q}")]
    CoefficientOutOfRange { value: u32, q: u32 },
}

/// Dense row-major matrix over one GF(2^m) context. Dimensions are positive.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matrix {
    ctx: FieldContext,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl Matrix {
    pub fn zeros(ctx: FieldContext, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            ctx,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(ctx: FieldContext, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(ctx: FieldContext, rows: &[Vec<u32>]) -> Result<Self, CodeError> {
        assert!(!rows.is_empty() && !rows[0].is_empty());
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        for &v in rows.iter().flatten() {
            if v >= ctx.q() {
                return Err(CodeError::CoefficientOutOfRange {
                    value: v,
                    q: ctx.q(),
                });
            }
        }
        Ok(Self {
            ctx,
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn context(&self) -> FieldContext {
        self.ctx
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.ctx, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    /// Submatrix keeping the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        assert!(!cols.is_empty());
        let mut out = Matrix::zeros(self.ctx, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out[(r, j)] = self[(r, c)];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.ctx, rhs.ctx);
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        let mut out = self.clone();
        for (o, &r) in out.data.iter_mut().zip(&rhs.data) {
            *o ^= r;
        }
        out
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.ctx, rhs.ctx);
        assert_eq!(self.cols, rhs.rows);
        let mut out = Matrix::zeros(self.ctx, self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    let p = self.ctx.mul(a, rhs[(k, c)]);
                    out[(r, c)] ^= p;
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn to_vecs(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = u32;
    fn index(&self, (r, c): (usize, usize)) -> &u32 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut u32 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Where each of the `k` source processes is emitted: the graph's process
/// map when present, otherwise the single source node. Multi-source
/// networks must carry an explicit map.
pub fn process_placement(net: &Network, k: usize) -> Result<Vec<NodeId>, CodeError> {
    let placement = match net.process_map() {
        Some(map) => {
            if map.len() != k {
                return Err(CodeError::ProcessMapLength { got: map.len(), k });
            }
            map.to_vec()
        }
        None if net.sources().len() == 1 => vec![net.sources()[0]; k],
        None => return Err(CodeError::MissingProcessMap),
    };
    if let Some((process, &node)) = placement
        .iter()
        .enumerate()
        .find(|(_, node)| !net.sources().contains(node))
    {
        return Err(CodeError::ProcessAtNonSource { process, node });
    }
    Ok(placement)
}

/// Whether K may equal the network min-cut (the standard feasible rate) or
/// must stay strictly below it.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum RateBound {
    #[default]
    Inclusive,
    Strict,
}

/// One sampled realization of a random linear network code.
#[derive(Clone, Debug)]
pub struct CodeInstance {
    ctx: FieldContext,
    k: usize,
    seed: u64,
    network: Network,
    a: Matrix,
    f: Matrix,
}

/// JSON form of a code: the topology is referenced separately, only the
/// field, rate, seed and dense coefficient arrays are stored.
#[derive(Serialize, Deserialize)]
pub struct CodeFile {
    pub field: FieldContext,
    pub k: usize,
    pub seed: u64,
    pub a: Vec<Vec<u32>>,
    pub f: Vec<Vec<u32>>,
}

impl CodeInstance {
    /// Draw every structurally allowed coefficient of A and F i.i.d. uniform
    /// over the field (zero included), deterministically from `seed`.
    pub fn sample(
        net: &Network,
        k: usize,
        ctx: FieldContext,
        seed: u64,
    ) -> Result<Self, CodeError> {
        Self::sample_bounded(net, k, ctx, seed, RateBound::Inclusive)
    }

    pub fn sample_bounded(
        net: &Network,
        k: usize,
        ctx: FieldContext,
        seed: u64,
        bound: RateBound,
    ) -> Result<Self, CodeError> {
        let placement = Self::check_rate_and_placement(net, k, bound)?;
        let e = net.edge_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // fixed draw order: A row-major, then F row-major over allowed pairs
        let mut a = Matrix::zeros(ctx, k, e);
        for (l, &node) in placement.iter().enumerate() {
            for (id, edge) in net.edges().iter().enumerate() {
                if edge.tail == node {
                    a[(l, id)] = ctx.uniform(&mut rng);
                }
            }
        }
        let mut f = Matrix::zeros(ctx, e, e);
        for (ep, feeder) in net.edges().iter().enumerate() {
            for (id, edge) in net.edges().iter().enumerate() {
                if feeder.head == edge.tail {
                    f[(ep, id)] = ctx.uniform(&mut rng);
                }
            }
        }
        Ok(Self {
            ctx,
            k,
            seed,
            network: net.clone(),
            a,
            f,
        })
    }

    /// Build a code from explicit matrices (fixtures, exhaustive enumeration,
    /// adversarial cases). Entries outside the structural support must be 0.
    pub fn from_parts(
        net: &Network,
        ctx: FieldContext,
        k: usize,
        a: Matrix,
        f: Matrix,
        seed: u64,
    ) -> Result<Self, CodeError> {
        let placement = Self::check_rate_and_placement(net, k, RateBound::Inclusive)?;
        let e = net.edge_count();
        if a.rows() != k || a.cols() != e {
            return Err(CodeError::BadShape {
                rows: a.rows(),
                cols: a.cols(),
                want_rows: k,
                want_cols: e,
            });
        }
        if f.rows() != e || f.cols() != e {
            return Err(CodeError::BadShape {
                rows: f.rows(),
                cols: f.cols(),
                want_rows: e,
                want_cols: e,
            });
        }
        for l in 0..k {
            for id in 0..e {
                if a[(l, id)] != 0 && net.edges()[id].tail != placement[l] {
                    return Err(CodeError::SupportViolation {
                        which: "A",
                        row: l,
                        col: id,
                    });
                }
            }
        }
        for ep in 0..e {
            for id in 0..e {
                if f[(ep, id)] != 0 && net.edges()[ep].head != net.edges()[id].tail {
                    return Err(CodeError::SupportViolation {
                        which: "F",
                        row: ep,
                        col: id,
                    });
                }
            }
        }
        Ok(Self {
            ctx,
            k,
            seed,
            network: net.clone(),
            a,
            f,
        })
    }

    pub fn from_file(net: &Network, file: CodeFile) -> Result<Self, CodeError> {
        let a = Matrix::from_rows(file.field, &file.a)?;
        let f = Matrix::from_rows(file.field, &file.f)?;
        Self::from_parts(net, file.field, file.k, a, f, file.seed)
    }

    pub fn to_file(&self) -> CodeFile {
        CodeFile {
            field: self.ctx,
            k: self.k,
            seed: self.seed,
            a: self.a.to_vecs(),
            f: self.f.to_vecs(),
        }
    }

    fn check_rate_and_placement(
        net: &Network,
        k: usize,
        bound: RateBound,
    ) -> Result<Vec<NodeId>, CodeError> {
        if k < 1 {
            return Err(CodeError::RateTooSmall { k });
        }
        let min_cut = net.feasible_rate();
        let infeasible = match bound {
            RateBound::Inclusive => k > min_cut,
            RateBound::Strict => k >= min_cut,
        };
        if infeasible {
            return Err(CodeError::RateExceedsCut {
                k,
                min_cut,
                strict: bound == RateBound::Strict,
            });
        }
        process_placement(net, k)
    }

    pub fn field(&self) -> FieldContext {
        self.ctx
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    /// C = A(I-F)^{-1}, computed exactly by forward substitution in
    /// topological edge order: column c_e = a_e + sum over feeders e' of
    /// F[e'][e] * c_{e'}. Acyclicity makes I-F unit-triangular in this
    /// order, so no inversion and no division are ever needed.
    pub fn global_mixing_matrix(&self) -> Matrix {
        let net = &self.network;
        let mut c = Matrix::zeros(self.ctx, self.k, net.edge_count());
        for e in net.topo_edge_order() {
            let tail = net.edges()[e].tail;
            for l in 0..self.k {
                let mut acc = self.a[(l, e)];
                for &ep in net.in_edges(tail) {
                    let beta = self.f[(ep, e)];
                    if beta != 0 {
                        acc ^= self.ctx.mul(beta, c[(l, ep)]);
                    }
                }
                c[(l, e)] = acc;
            }
        }
        c
    }

    /// The K x delta_in(v) submatrix of C a node observes: the columns of its
    /// incoming edges, in ascending edge order.
    pub fn partial_transfer_matrix(&self, v: NodeId) -> Result<Matrix, CodeError> {
        let c = self.global_mixing_matrix();
        self.partial_from_global(&c, v)
    }

    /// Same selection against a precomputed C (one pass per code instead of
    /// one per node).
    pub fn partial_from_global(&self, c: &Matrix, v: NodeId) -> Result<Matrix, CodeError> {
        if v >= self.network.node_count() {
            return Err(CodeError::NodeOutOfRange { node: v });
        }
        let incoming = self.network.in_edges(v);
        if incoming.is_empty() {
            return Err(CodeError::NoIncomingEdges { node: v });
        }
        Ok(c.select_columns(incoming))
    }

    /// A receiver can decode (an invertible output mixing exists) iff its
    /// observation has full rank K.
    pub fn is_feasible(&self, receiver: NodeId) -> Result<bool, CodeError> {
        if receiver >= self.network.node_count() {
            return Err(CodeError::NodeOutOfRange { node: receiver });
        }
        if self.network.in_edges(receiver).is_empty() {
            return Ok(false);
        }
        let partial = self.partial_transfer_matrix(receiver)?;
        Ok(seclin::rank(&partial) == self.k)
    }
}
