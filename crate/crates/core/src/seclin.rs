//! The algebraic security criterion: exact rank and reduced row echelon form
//! over GF(2^m), the count of individually recoverable source symbols, the
//! per-node security level Delta_S, and network-wide reports.
//!
//! Delta_S(v) = (K - (rank(M') + l_d)) / K measures the fraction of the K
//! source symbols a relaying node must guess before it can decode one: 0
//! means fully compromised, (K-1)/K means it would have to guess almost
//! everything. rank(M') is the node's degrees of freedom and l_d the number
//! of symbols it can already read off by elimination alone. A node with full
//! rank decodes everything, so its level is 0 by definition.

use crate::galois::FieldContext;
use crate::netgraph::NodeId;
use crate::ratio::Ratio;
use crate::rlnc::{CodeInstance, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SecurityError {
    #[error("node {node} out of range")]
    NodeOutOfRange { node: NodeId },
    #[error("node {node} has no incoming edges to observe")]
    NoObservation { node: NodeId },
    #[error("complete-DAG secure max-flow needs n >= 3, got {n}")]
    TooFewNodes { n: usize },
}

/// Row rank over GF(2^m) by forward Gaussian elimination.
pub fn rank(mat: &Matrix) -> usize {
    let ctx = mat.context();
    let mut rows = mat.to_vecs();
    let mut r = 0;
    for c in 0..mat.cols() {
        let Some(pivot) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, pivot);
        let (pivot_rows, rest) = rows.split_at_mut(r + 1);
        let pivot_row = &pivot_rows[r];
        let inv = ctx.inv(pivot_row[c]).unwrap();
        for row in rest.iter_mut().filter(|row| row[c] != 0) {
            let factor = ctx.mul(row[c], inv);
            for (x, &p) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                *x ^= ctx.mul(factor, p);
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// Reduced row echelon form and its pivot columns. Pivots are 1 with zeros
/// above and below, zero rows sink to the bottom; the result is the unique
/// canonical basis of the row space.
pub fn rref(mat: &Matrix) -> (Matrix, Vec<usize>) {
    let ctx = mat.context();
    let mut rows = mat.to_vecs();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..mat.cols() {
        let Some(pivot) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, pivot);
        let inv = ctx.inv(rows[r][c]).unwrap();
        for x in rows[r][c..].iter_mut() {
            *x = ctx.mul(inv, *x);
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c] == 0 {
                continue;
            }
            let factor = row[c];
            for (x, &p) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                *x ^= ctx.mul(factor, p);
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    (
        Matrix::from_rows(ctx, &rows).expect("canonical values"),
        pivots,
    )
}

/// Number of rows of the canonical RREF equal to a standard basis vector.
/// Each such row pins one source symbol outright; this equals the number of
/// unit vectors contained in the row space.
pub fn unit_rows(reduced: &Matrix) -> usize {
    (0..reduced.rows())
        .filter(|&r| {
            let row = reduced.row(r);
            row.iter().filter(|&&v| v != 0).count() == 1
                && row.iter().find(|&&v| v != 0) == Some(&1)
        })
        .count()
}

/// Symbols recoverable by elimination from an observation matrix whose rows
/// are received combinations and whose columns are the K source symbols.
pub fn recoverable_from_observations(obs: &Matrix) -> usize {
    unit_rows(&rref(obs).0)
}

/// Symbols node `v` can recover outright from what it receives: the unit
/// rows of the RREF of the transposed partial transfer matrix.
pub fn recoverable_symbols(code: &CodeInstance, v: NodeId) -> Result<usize, SecurityError> {
    let partial = partial_or_err(code, v)?;
    Ok(recoverable_from_observations(&partial.transpose()))
}

fn partial_or_err(code: &CodeInstance, v: NodeId) -> Result<Matrix, SecurityError> {
    if v >= code.network().node_count() {
        return Err(SecurityError::NodeOutOfRange { node: v });
    }
    if code.network().in_edges(v).is_empty() {
        return Err(SecurityError::NoObservation { node: v });
    }
    Ok(code
        .partial_transfer_matrix(v)
        .expect("validated observation"))
}

/// Security facts for one node. `delta_s_raw` is the literal formula value
/// (negative when a node can both decode and read symbols individually);
/// `delta_s` is the operational level, clamped into [0, 1] and forced to 0
/// at full rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSecurity {
    pub node: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub delta_in: usize,
    pub rank: usize,
    pub l_d: usize,
    pub delta_s_raw: Ratio,
    pub delta_s: Ratio,
}

fn node_security_from_partial(
    partial: &Matrix,
    k: usize,
    node: NodeId,
    order: Option<usize>,
) -> NodeSecurity {
    let rank = rank(partial);
    let l_d = recoverable_from_observations(&partial.transpose());
    let raw = Ratio::new(k as i64 - rank as i64 - l_d as i64, k as i64);
    let delta_s = if rank == k {
        Ratio::zero()
    } else {
        raw.clamp_non_negative()
    };
    NodeSecurity {
        node,
        order,
        delta_in: partial.cols(),
        rank,
        l_d,
        delta_s_raw: raw,
        delta_s,
    }
}

/// Evaluate the criterion at one observing node.
pub fn security_level(code: &CodeInstance, v: NodeId) -> Result<NodeSecurity, SecurityError> {
    let partial = partial_or_err(code, v)?;
    Ok(node_security_from_partial(
        &partial,
        code.k(),
        v,
        code.network().order(v),
    ))
}

/// Security facts for every intermediate node of a code's network, plus the
/// network-level minimum. `min_delta_s` is None when there is nothing to
/// eavesdrop (no intermediate nodes).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub tool_version: String,
    pub field: FieldContext,
    pub k: usize,
    pub seed: u64,
    pub nodes: Vec<NodeSecurity>,
    pub min_delta_s: Option<Ratio>,
}

impl SecurityReport {
    /// True when every intermediate node would have to guess at least one
    /// symbol; None when the network has no intermediate nodes.
    pub fn is_secure(&self) -> Option<bool> {
        self.min_delta_s.map(|m| !m.is_zero())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per node with a fixed column set; exact rationals split into
    /// numerator and denominator so nothing is rounded.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("node,order,delta_in,rank,l_d,delta_s_num,delta_s_den\n");
        for n in &self.nodes {
            let order = n.order.map(|o| o.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                n.node,
                order,
                n.delta_in,
                n.rank,
                n.l_d,
                n.delta_s.num(),
                n.delta_s.den()
            ));
        }
        out
    }
}

/// Evaluate the criterion at every intermediate node. Computes the global
/// mixing matrix once and slices it per node.
pub fn network_report(code: &CodeInstance) -> SecurityReport {
    let net = code.network();
    let c = code.global_mixing_matrix();
    let nodes: Vec<NodeSecurity> = net
        .intermediate_nodes()
        .into_iter()
        .map(|v| {
            let partial = code
                .partial_from_global(&c, v)
                .expect("intermediate nodes observe at least one edge");
            node_security_from_partial(&partial, code.k(), v, net.order(v))
        })
        .collect();
    let min_delta_s = nodes.iter().map(|n| n.delta_s).min();
    SecurityReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        field: code.field(),
        k: code.k(),
        seed: code.seed(),
        nodes,
        min_delta_s,
    }
}

/// The largest number of source processes a complete DAG on `n` nodes can
/// carry with every intermediate node kept strictly above level zero. Equals
/// the max-flow min-cut capacity n-1: transmitting at capacity leaves every
/// relay exactly one symbol short, while any lower rate hands the top-order
/// relay a full-rank observation.
pub fn secure_max_flow_complete_dag(n: usize) -> Result<usize, SecurityError> {
    if n < 3 {
        return Err(SecurityError::TooFewNodes { n });
    }
    Ok(n - 1)
}
