//! Seeded Monte Carlo harness for the library's statistical claims.
//!
//! Each claim is estimated over a grid of cells (field degree, rate, network
//! size). Cells that are small enough are enumerated exhaustively and
//! reported exactly; the rest are sampled. Every trial's random stream is
//! derived from (master seed, cell index, trial index), so results are
//! byte-identical regardless of scheduling or worker count.
//!
//! Claim ids:
//! - L2: probability that a sum of products of uniform field elements is zero
//! - L3: distribution of zeros per row of a receiver's transfer matrix
//! - T1: probability of recovering any symbol from an i.i.d. observation
//! - L4: rank of complete-DAG partial transfer matrices vs min(delta_in, K)
//! - L5: security level of complete-DAG nodes vs (K - min(K, delta_in))/K
//! - T2: secure max-flow of the complete DAG (min level at and below capacity)

use crate::galois::FieldContext;
use crate::netgraph::{GraphFile, Network};
use crate::ratio::Ratio;
use crate::rlnc::{CodeInstance, Matrix};
use crate::seclin;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

/// z for two-sided 95% Wilson intervals.
pub const WILSON_Z95: f64 = 1.96;

/// Auto mode enumerates exhaustively when the state space is at most 2^20.
const AUTO_EXHAUSTIVE_BITS: u64 = 20;
/// Forced exhaustive mode refuses state spaces beyond 2^24.
const MAX_EXHAUSTIVE_BITS: u64 = 24;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] crate::netgraph::GraphError),
    #[error(transparent)]
    Code(#[from] crate::rlnc::CodeError),
    #[error(transparent)]
    Field(#[from] crate::galois::FieldError),
    #[error(transparent)]
    Security(#[from] crate::seclin::SecurityError),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum ClaimId {
    L2,
    L3,
    T1,
    L4,
    L5,
    T2,
}

impl ClaimId {
    pub const ALL: [ClaimId; 6] = [
        ClaimId::L2,
        ClaimId::L3,
        ClaimId::T1,
        ClaimId::L4,
        ClaimId::L5,
        ClaimId::T2,
    ];
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClaimId::L2 => "L2",
            ClaimId::L3 => "L3",
            ClaimId::T1 => "T1",
            ClaimId::L4 => "L4",
            ClaimId::L5 => "L5",
            ClaimId::T2 => "T2",
        };
        f.write_str(s)
    }
}

impl FromStr for ClaimId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "L2" => Ok(ClaimId::L2),
            "L3" => Ok(ClaimId::L3),
            "T1" => Ok(ClaimId::T1),
            "L4" => Ok(ClaimId::L4),
            "L5" => Ok(ClaimId::L5),
            "T2" => Ok(ClaimId::T2),
            other => Err(format!("unknown claim id {other:?}")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    #[default]
    Auto,
    Exhaustive,
    Sampled,
}

fn default_terms() -> usize {
    1
}
fn default_trials() -> u64 {
    1000
}
fn default_threshold() -> f64 {
    0.99
}

/// Declarative description of one claim run; mirrors the JSON config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub claim: ClaimId,
    /// Field degrees; each cell uses the documented default polynomial
    /// unless `poly` overrides it (single-degree runs only).
    #[serde(default)]
    pub m: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<String>,
    #[serde(default)]
    pub k: Vec<usize>,
    /// Complete-DAG sizes (L3 without an explicit graph, L4, L5, T2).
    #[serde(default)]
    pub n: Vec<usize>,
    /// Explicit network for L3; takes precedence over `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphFile>,
    /// Number of product terms in the L2 linear combination.
    #[serde(default = "default_terms")]
    pub terms: usize,
    /// Observation count delta_in for T1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_in: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Acceptance threshold for "with high probability" verdicts.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl ExperimentConfig {
    pub fn new(claim: ClaimId) -> Self {
        Self {
            claim,
            m: Vec::new(),
            poly: None,
            k: Vec::new(),
            n: Vec::new(),
            graph: None,
            terms: default_terms(),
            delta_in: None,
            trials: default_trials(),
            seed: 0,
            threshold: default_threshold(),
            mode: SamplingMode::Auto,
        }
    }

    fn contexts(&self) -> Result<Vec<FieldContext>, ExperimentError> {
        if self.m.is_empty() {
            return Err(ExperimentError::InvalidConfig(
                "field degree list `m` must not be empty".into(),
            ));
        }
        if let Some(ref poly) = self.poly {
            if self.m.len() != 1 {
                return Err(ExperimentError::InvalidConfig(
                    "an explicit polynomial requires a single field degree".into(),
                ));
            }
            let digits = poly.strip_prefix("0x").or_else(|| poly.strip_prefix("0X"));
            let value = digits
                .and_then(|d| u32::from_str_radix(d, 16).ok())
                .or_else(|| poly.parse().ok())
                .ok_or_else(|| {
                    ExperimentError::InvalidConfig(format!("cannot parse polynomial {poly:?}"))
                })?;
            return Ok(vec![FieldContext::with_poly(self.m[0], value)?]);
        }
        self.m
            .iter()
            .map(|&m| FieldContext::new(m).map_err(Into::into))
            .collect()
    }

    fn validate_common(&self) -> Result<(), ExperimentError> {
        if self.trials < 100 {
            return Err(ExperimentError::InvalidConfig(format!(
                "trials must be at least 100, got {}",
                self.trials
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ExperimentError::InvalidConfig(format!(
                "threshold must lie in [0,1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Claim-specific annotations carried next to a cell's headline estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellDetail {
    /// L2: the closed-form ceiling (2q-1)/q^2 the estimate is checked against.
    ZeroProbabilityBound { bound: f64 },
    /// L3: zeros-per-row distribution for one receiver.
    RowZeros {
        xi: usize,
        mean_zeros_per_row: f64,
        reference_entry_rate: f64,
        buckets: Vec<RowZeroBucket>,
    },
    /// L4/L5: per-order match rates on the complete DAG, under both the
    /// delta_in-based and the order-based form of the expected level.
    DagNode {
        order: usize,
        rank_match: f64,
        delta_match: f64,
        delta_match_order_form: f64,
    },
    DagAggregate {
        rank_match: f64,
        delta_match: f64,
        delta_match_order_form: f64,
    },
    /// T2: which event the cell estimates.
    MaxFlowEvent { event: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowZeroBucket {
    pub zeros: usize,
    pub count: u64,
    pub frequency: f64,
    /// Binomial pmf at the independently measured per-entry zero rate.
    /// Informational: entries of one row share coefficients, so this is a
    /// model comparison, not a bound the data must obey.
    pub binomial_model: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub m: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_in: Option<usize>,
    /// Sampled trials, or enumerated states for exhaustive cells.
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exhaustive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<CellDetail>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub tool_version: String,
    pub claim: ClaimId,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub checks: Vec<NamedCheck>,
    pub pass: bool,
    pub wall_clock_ms: u64,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn check(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.pass)
    }

    /// Plot-ready CSV, one row per cell, stable column order. Contains no
    /// timing, so identical configs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# ncsec {}\n", self.tool_version));
        out.push_str(&format!(
            "# config {}\n",
            serde_json::to_string(&self.config).expect("config serializes")
        ));
        out.push_str(&format!("# seed {}\n", self.seed));
        out.push_str("claim,m,K,n,delta_in,trials,estimate,ci_lo,ci_hi,verdict\n");
        for cell in &self.cells {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            let verdict = match cell.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.claim,
                cell.m,
                opt(cell.k),
                opt(cell.n),
                opt(cell.delta_in),
                cell.trials,
                cell.estimate,
                cell.ci_lo,
                cell.ci_hi,
                verdict
            ));
        }
        out
    }
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z95 * WILSON_Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (WILSON_Z95 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Cell seed: one draw from the master-keyed stream at the cell's index.
fn derive_cell_seed(master: u64, cell_index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell_index);
    rng.next_u64()
}

/// Per-trial generator: same cell key, one stream per trial. Independent of
/// scheduling, so parallel and sequential runs agree bit for bit.
fn trial_rng(cell_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
    rng.set_stream(trial);
    rng
}

fn count_parallel<F>(trials: u64, cell_seed: u64, trial_is_success: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cell_seed, t);
            u64::from(trial_is_success(&mut rng))
        })
        .sum()
}

fn sampled_cell(successes: u64, trials: u64) -> (f64, f64, f64) {
    let estimate = successes as f64 / trials as f64;
    let (lo, hi) = wilson_interval(successes, trials);
    (estimate, lo, hi)
}

/// Whether a cell with a state space of `bits` binary digits runs
/// exhaustively, and a hard refusal when forced beyond the cap.
fn decide_exhaustive(mode: SamplingMode, bits: u64) -> Result<bool, ExperimentError> {
    match mode {
        SamplingMode::Auto => Ok(bits <= AUTO_EXHAUSTIVE_BITS),
        SamplingMode::Sampled => Ok(false),
        SamplingMode::Exhaustive => {
            if bits > MAX_EXHAUSTIVE_BITS {
                Err(ExperimentError::InvalidConfig(format!(
                    "exhaustive enumeration needs 2^{bits} states (cap 2^{MAX_EXHAUSTIVE_BITS})"
                )))
            } else {
                Ok(true)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// L2: zero probability of a random linear combination
// ---------------------------------------------------------------------------

fn zero_probability_cell(
    ctx: FieldContext,
    terms: usize,
    trials: u64,
    cell_seed: u64,
    mode: SamplingMode,
) -> Result<CellResult, ExperimentError> {
    let q = u64::from(ctx.q());
    let bits = 2 * terms as u64 * u64::from(ctx.m());
    let bound = (2.0 * q as f64 - 1.0) / (q as f64 * q as f64);
    let cell = if decide_exhaustive(mode, bits)? {
        // distribution of one product a*b over all q^2 pairs, convolved
        // (field addition is XOR) once per term
        let mut product_dist = vec![0u64; q as usize];
        for a in 0..ctx.q() {
            for b in 0..ctx.q() {
                product_dist[ctx.mul(a, b) as usize] += 1;
            }
        }
        let mut dist = vec![0u64; q as usize];
        dist[0] = 1;
        for _ in 0..terms {
            let mut next = vec![0u64; q as usize];
            for (s, &c) in dist.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                for (p, &pc) in product_dist.iter().enumerate() {
                    if pc != 0 {
                        next[s ^ p] += c * pc;
                    }
                }
            }
            dist = next;
        }
        let total: u64 = q.pow(2 * terms as u32);
        let successes = dist[0];
        let estimate = successes as f64 / total as f64;
        CellResult {
            m: ctx.m(),
            k: None,
            n: None,
            delta_in: None,
            trials: total,
            successes,
            estimate,
            ci_lo: estimate,
            ci_hi: estimate,
            exhaustive: true,
            verdict: Some(estimate <= bound + 1e-12),
            detail: Some(CellDetail::ZeroProbabilityBound { bound }),
        }
    } else {
        let successes = count_parallel(trials, cell_seed, |rng| {
            let mut sum = 0u32;
            for _ in 0..terms {
                let a = ctx.uniform(rng);
                let b = ctx.uniform(rng);
                sum ^= ctx.mul(a, b);
            }
            sum == 0
        });
        let (estimate, ci_lo, ci_hi) = sampled_cell(successes, trials);
        CellResult {
            m: ctx.m(),
            k: None,
            n: None,
            delta_in: None,
            trials,
            successes,
            estimate,
            ci_lo,
            ci_hi,
            exhaustive: false,
            verdict: Some(ci_lo <= bound),
            detail: Some(CellDetail::ZeroProbabilityBound { bound }),
        }
    };
    Ok(cell)
}

/// Estimate P(sum of `terms` products of uniform elements = 0); exact by
/// enumeration when the state space is small.
pub fn estimate_zero_probability(
    ctx: FieldContext,
    terms: usize,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mut config = ExperimentConfig::new(ClaimId::L2);
    config.m = vec![ctx.m()];
    config.poly = Some(format!("{:#x}", ctx.reduction_poly()));
    config.terms = terms;
    config.trials = trials;
    config.seed = seed;
    run_l2(&config, &[ctx])
}

fn run_l2(
    config: &ExperimentConfig,
    ctxs: &[FieldContext],
) -> Result<ExperimentResult, ExperimentError> {
    if config.terms < 1 {
        return Err(ExperimentError::InvalidConfig(
            "terms must be at least 1".into(),
        ));
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    for (idx, &ctx) in ctxs.iter().enumerate() {
        cells.push(zero_probability_cell(
            ctx,
            config.terms,
            config.trials,
            derive_cell_seed(config.seed, idx as u64),
            config.mode,
        )?);
    }
    let mut checks = vec![NamedCheck {
        name: "all_cells_within_bound".into(),
        pass: cells.iter().all(|c| c.verdict == Some(true)),
    }];
    if cells.len() >= 2 {
        checks.push(NamedCheck {
            name: "strictly_decreasing_in_m".into(),
            pass: cells.windows(2).all(|w| w[1].estimate < w[0].estimate),
        });
        checks.push(NamedCheck {
            name: "endpoint_cis_disjoint".into(),
            pass: cells.last().unwrap().ci_hi < cells[0].ci_lo,
        });
    }
    Ok(finish(config, cells, checks, started))
}

// ---------------------------------------------------------------------------
// T1: probability of recovering any symbol from an i.i.d. observation
// ---------------------------------------------------------------------------

fn ld_positive_cell(
    ctx: FieldContext,
    k: usize,
    delta_in: usize,
    trials: u64,
    cell_seed: u64,
    mode: SamplingMode,
) -> Result<CellResult, ExperimentError> {
    let entries = delta_in * k;
    let bits = entries as u64 * u64::from(ctx.m());
    let cell = if decide_exhaustive(mode, bits)? {
        let q = u64::from(ctx.q());
        let total = q.pow(entries as u32);
        let mut successes = 0u64;
        let mut digits = vec![0u32; entries];
        for _ in 0..total {
            let rows: Vec<Vec<u32>> = digits.chunks(k).map(|c| c.to_vec()).collect();
            let obs = Matrix::from_rows(ctx, &rows).expect("digits in range");
            if seclin::recoverable_from_observations(&obs) > 0 {
                successes += 1;
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < ctx.q() {
                    break;
                }
                *d = 0;
            }
        }
        let estimate = successes as f64 / total as f64;
        CellResult {
            m: ctx.m(),
            k: Some(k),
            n: None,
            delta_in: Some(delta_in),
            trials: total,
            successes,
            estimate,
            ci_lo: estimate,
            ci_hi: estimate,
            exhaustive: true,
            verdict: None,
            detail: None,
        }
    } else {
        let successes = count_parallel(trials, cell_seed, |rng| {
            let rows: Vec<Vec<u32>> = (0..delta_in)
                .map(|_| (0..k).map(|_| ctx.uniform(rng)).collect())
                .collect();
            let obs = Matrix::from_rows(ctx, &rows).expect("uniform in range");
            seclin::recoverable_from_observations(&obs) > 0
        });
        let (estimate, ci_lo, ci_hi) = sampled_cell(successes, trials);
        CellResult {
            m: ctx.m(),
            k: Some(k),
            n: None,
            delta_in: Some(delta_in),
            trials,
            successes,
            estimate,
            ci_lo,
            ci_hi,
            exhaustive: false,
            verdict: None,
            detail: None,
        }
    };
    Ok(cell)
}

/// Estimate P(l_d > 0) for uniform random delta_in x K observation matrices
/// over each (field, K) cell, with monotone-trend verdicts along both axes.
pub fn estimate_ld_positive(
    ctxs: &[FieldContext],
    ks: &[usize],
    delta_in: usize,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mut config = ExperimentConfig::new(ClaimId::T1);
    config.m = ctxs.iter().map(|c| c.m()).collect();
    config.k = ks.to_vec();
    config.delta_in = Some(delta_in);
    config.trials = trials;
    config.seed = seed;
    run_t1(&config, ctxs)
}

/// Non-increasing along the sequence, allowing an increase only when the
/// neighboring confidence intervals overlap.
fn nonincreasing_with_ci_tolerance(cells: &[&CellResult]) -> bool {
    cells
        .windows(2)
        .all(|w| w[1].estimate <= w[0].estimate || w[1].ci_lo <= w[0].ci_hi)
}

fn run_t1(
    config: &ExperimentConfig,
    ctxs: &[FieldContext],
) -> Result<ExperimentResult, ExperimentError> {
    let delta_in = config
        .delta_in
        .ok_or_else(|| ExperimentError::InvalidConfig("T1 requires `delta_in`".into()))?;
    if config.k.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "rate list `k` must not be empty".into(),
        ));
    }
    for &k in &config.k {
        if delta_in >= k {
            return Err(ExperimentError::InvalidConfig(format!(
                "cell with delta_in={delta_in} >= K={k} rejected (full rank is certain)"
            )));
        }
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut idx = 0u64;
    for &ctx in ctxs {
        for &k in &config.k {
            cells.push(ld_positive_cell(
                ctx,
                k,
                delta_in,
                config.trials,
                derive_cell_seed(config.seed, idx),
                config.mode,
            )?);
            idx += 1;
        }
    }
    let mut checks = Vec::new();
    if ctxs.len() >= 2 {
        for (j, &k) in config.k.iter().enumerate() {
            let column: Vec<&CellResult> = cells.iter().skip(j).step_by(config.k.len()).collect();
            checks.push(NamedCheck {
                name: format!("nonincreasing_in_m_at_k{k}"),
                pass: nonincreasing_with_ci_tolerance(&column),
            });
        }
    }
    if config.k.len() >= 2 {
        for (i, ctx) in ctxs.iter().enumerate() {
            let row: Vec<&CellResult> = cells
                .iter()
                .skip(i * config.k.len())
                .take(config.k.len())
                .collect();
            checks.push(NamedCheck {
                name: format!("nonincreasing_in_k_at_m{}", ctx.m()),
                pass: nonincreasing_with_ci_tolerance(&row),
            });
        }
    }
    Ok(finish(config, cells, checks, started))
}

// ---------------------------------------------------------------------------
// exhaustive code enumeration (shared by L3, L4/L5, T2)
// ---------------------------------------------------------------------------

/// Number of free coefficients of a code on `net` at rate `k`: allowed A
/// entries plus line-graph pairs.
fn coefficient_slots(net: &Network, k: usize) -> Result<usize, ExperimentError> {
    let a_slots: usize = crate::rlnc::process_placement(net, k)?
        .iter()
        .map(|&v| net.delta_out(v))
        .sum();
    let f_slots: usize = (0..net.node_count())
        .map(|v| net.delta_in(v) * net.delta_out(v))
        .sum();
    Ok(a_slots + f_slots)
}

/// Visit every code on `net` (all assignments of the free coefficients).
/// The caller is responsible for keeping q^slots affordable.
fn for_each_code<F: FnMut(&CodeInstance)>(
    net: &Network,
    k: usize,
    ctx: FieldContext,
    mut visit: F,
) -> Result<u64, ExperimentError> {
    let placement = crate::rlnc::process_placement(net, k)?;
    let mut a_slots = Vec::new();
    for (l, &node) in placement.iter().enumerate() {
        for (id, edge) in net.edges().iter().enumerate() {
            if edge.tail == node {
                a_slots.push((l, id));
            }
        }
    }
    let mut f_slots = Vec::new();
    for (ep, feeder) in net.edges().iter().enumerate() {
        for (id, edge) in net.edges().iter().enumerate() {
            if feeder.head == edge.tail {
                f_slots.push((ep, id));
            }
        }
    }
    let slots = a_slots.len() + f_slots.len();
    let total = u64::from(ctx.q()).pow(slots as u32);
    let mut digits = vec![0u32; slots];
    let e = net.edge_count();
    for _ in 0..total {
        let mut a = Matrix::zeros(ctx, k, e);
        let mut f = Matrix::zeros(ctx, e, e);
        for (d, &(l, id)) in digits.iter().take(a_slots.len()).zip(&a_slots) {
            a[(l, id)] = *d;
        }
        for (d, &(ep, id)) in digits.iter().skip(a_slots.len()).zip(&f_slots) {
            f[(ep, id)] = *d;
        }
        let code = CodeInstance::from_parts(net, ctx, k, a, f, 0)?;
        visit(&code);
        for d in digits.iter_mut() {
            *d += 1;
            if *d < ctx.q() {
                break;
            }
            *d = 0;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// L3: zeros per row of a receiver's transfer matrix
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn row_zero_tally(
    net: &Network,
    k: usize,
    ctx: FieldContext,
    xi: usize,
    receiver: usize,
    trials: u64,
    cell_seed: u64,
    stream_offset: u64,
) -> (Vec<u64>, Vec<f64>) {
    // per-trial zero totals kept separately for an honest per-code variance
    let (buckets, per_code): (Vec<u64>, Vec<f64>) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cell_seed, stream_offset + t);
            let code_seed = rng.next_u64();
            let code = CodeInstance::sample(net, k, ctx, code_seed)
                .expect("rate validated before tallying");
            let c = code.global_mixing_matrix();
            let partial = code
                .partial_from_global(&c, receiver)
                .expect("receiver observes at least one edge");
            let mut local = vec![0u64; xi + 1];
            let mut zeros_this_code = 0u64;
            for r in 0..partial.rows() {
                let y = partial.row(r).iter().filter(|&&v| v == 0).count();
                local[y] += 1;
                zeros_this_code += y as u64;
            }
            (local, zeros_this_code as f64)
        })
        .fold(
            || (vec![0u64; xi + 1], Vec::new()),
            |(mut acc, mut zs), (local, z)| {
                for (a, l) in acc.iter_mut().zip(&local) {
                    *a += l;
                }
                zs.push(z);
                (acc, zs)
            },
        )
        .reduce(
            || (vec![0u64; xi + 1], Vec::new()),
            |(mut a, mut za), (b, zb)| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                za.extend(zb);
                (a, za)
            },
        );
    (buckets, per_code)
}

fn binomial_pmf(n: usize, y: usize, p: f64) -> f64 {
    let mut choose = 1.0f64;
    for i in 0..y {
        choose = choose * (n - i) as f64 / (i + 1) as f64;
    }
    choose * p.powi(y as i32) * (1.0 - p).powi((n - y) as i32)
}

fn row_zeros_cell(
    ctx: FieldContext,
    k: usize,
    net: &Network,
    n_label: Option<usize>,
    trials: u64,
    cell_seed: u64,
    mode: SamplingMode,
) -> Result<CellResult, ExperimentError> {
    let receiver = net.receivers()[0];
    let xi = net.delta_in(receiver);
    if xi == 0 {
        return Err(ExperimentError::InvalidConfig(format!(
            "receiver {receiver} observes no edges"
        )));
    }
    if k > net.feasible_rate() {
        return Err(ExperimentError::InvalidConfig(format!(
            "K={k} exceeds the network min-cut {}",
            net.feasible_rate()
        )));
    }
    let slots = coefficient_slots(net, k)?;
    let bits = slots as u64 * u64::from(ctx.m());
    let (buckets, rows_total, codes, entry_rate_ref, mean_check, exhaustive) =
        if decide_exhaustive(mode, bits)? {
            let mut buckets = vec![0u64; xi + 1];
            let codes = for_each_code(net, k, ctx, |code| {
                let c = code.global_mixing_matrix();
                let partial = code
                    .partial_from_global(&c, receiver)
                    .expect("receiver observes at least one edge");
                for r in 0..partial.rows() {
                    let y = partial.row(r).iter().filter(|&&v| v == 0).count();
                    buckets[y] += 1;
                }
            })?;
            let rows = codes * k as u64;
            let zeros: u64 = buckets.iter().enumerate().map(|(y, &c)| y as u64 * c).sum();
            let rate = zeros as f64 / (rows as f64 * xi as f64);
            // exact enumeration: the model identity holds by construction
            (buckets, rows, codes, rate, true, true)
        } else {
            let (buckets, per_code) =
                row_zero_tally(net, k, ctx, xi, receiver, trials, cell_seed, 0);
            // independent replicate (disjoint trial streams) for the
            // reference per-entry rate, so the consistency check compares two
            // independent estimates instead of an identity
            let (ref_buckets, ref_per_code) =
                row_zero_tally(net, k, ctx, xi, receiver, trials, cell_seed, trials);
            let rows = buckets.iter().sum::<u64>();
            let ref_rows = ref_buckets.iter().sum::<u64>();
            let ref_zeros: u64 = ref_buckets
                .iter()
                .enumerate()
                .map(|(y, &c)| y as u64 * c)
                .sum();
            let entry_rate_ref = ref_zeros as f64 / (ref_rows as f64 * xi as f64);
            let mean = |zs: &[f64]| zs.iter().sum::<f64>() / zs.len() as f64;
            let var = |zs: &[f64], mu: f64| {
                zs.iter().map(|z| (z - mu) * (z - mu)).sum::<f64>() / (zs.len() - 1).max(1) as f64
            };
            let mu_main = mean(&per_code);
            let mu_ref = mean(&ref_per_code);
            let sigma = (var(&per_code, mu_main) / per_code.len() as f64
                + var(&ref_per_code, mu_ref) / ref_per_code.len() as f64)
                .sqrt();
            let mean_check = (mu_main - mu_ref).abs() <= 3.0 * sigma.max(f64::EPSILON);
            (buckets, rows, trials, entry_rate_ref, mean_check, false)
        };
    let zeros_total: u64 = buckets.iter().enumerate().map(|(y, &c)| y as u64 * c).sum();
    let entries = rows_total * xi as u64;
    let estimate = zeros_total as f64 / entries as f64;
    let (ci_lo, ci_hi) = if exhaustive {
        (estimate, estimate)
    } else {
        wilson_interval(zeros_total, entries)
    };
    let bucket_details: Vec<RowZeroBucket> = buckets
        .iter()
        .enumerate()
        .map(|(y, &count)| RowZeroBucket {
            zeros: y,
            count,
            frequency: count as f64 / rows_total as f64,
            binomial_model: binomial_pmf(xi, y, entry_rate_ref),
        })
        .collect();
    Ok(CellResult {
        m: ctx.m(),
        k: Some(k),
        n: n_label,
        delta_in: Some(xi),
        trials: codes,
        successes: zeros_total,
        estimate,
        ci_lo,
        ci_hi,
        exhaustive,
        verdict: Some(mean_check),
        detail: Some(CellDetail::RowZeros {
            xi,
            mean_zeros_per_row: zeros_total as f64 / rows_total as f64,
            reference_entry_rate: entry_rate_ref,
            buckets: bucket_details,
        }),
    })
}

/// Estimate the zeros-per-row distribution of the first receiver's partial
/// transfer matrix under freshly sampled codes.
pub fn estimate_row_zeros(
    ctx: FieldContext,
    k: usize,
    net: &Network,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mut config = ExperimentConfig::new(ClaimId::L3);
    config.m = vec![ctx.m()];
    config.poly = Some(format!("{:#x}", ctx.reduction_poly()));
    config.k = vec![k];
    config.graph = Some(net.to_graph_file());
    config.trials = trials;
    config.seed = seed;
    run_l3(&config, &[ctx])
}

fn run_l3(
    config: &ExperimentConfig,
    ctxs: &[FieldContext],
) -> Result<ExperimentResult, ExperimentError> {
    if config.k.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "rate list `k` must not be empty".into(),
        ));
    }
    let nets: Vec<(Option<usize>, Network)> = if let Some(ref file) = config.graph {
        vec![(None, Network::from_graph_file(file.clone())?)]
    } else if !config.n.is_empty() {
        config
            .n
            .iter()
            .map(|&n| Ok((Some(n), Network::complete_dag(n, config.seed)?)))
            .collect::<Result<_, ExperimentError>>()?
    } else {
        return Err(ExperimentError::InvalidConfig(
            "L3 needs an explicit graph or a list of complete-DAG sizes".into(),
        ));
    };
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut idx = 0u64;
    for &ctx in ctxs {
        for &k in &config.k {
            for (n_label, net) in &nets {
                cells.push(row_zeros_cell(
                    ctx,
                    k,
                    net,
                    *n_label,
                    config.trials,
                    derive_cell_seed(config.seed, idx),
                    config.mode,
                )?);
                idx += 1;
            }
        }
    }
    let checks = vec![NamedCheck {
        name: "mean_consistent_with_entry_rate".into(),
        pass: cells.iter().all(|c| c.verdict == Some(true)),
    }];
    Ok(finish(config, cells, checks, started))
}

// ---------------------------------------------------------------------------
// L4 / L5: complete-DAG rank and security level per node order
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct DagTally {
    /// per intermediate order (2..=n-1): [rank matches, delta matches,
    /// order-form delta matches]
    per_order: Vec<[u64; 3]>,
    observations: u64,
}

fn dag_tally_one(report: &seclin::SecurityReport, k: usize, acc: &mut DagTally) {
    for node in &report.nodes {
        let order = node.order.expect("complete DAG carries order labels");
        let slot = &mut acc.per_order[order - 2];
        let expected_rank = node.delta_in.min(k);
        let expected_delta = Ratio::new((k - k.min(node.delta_in)) as i64, k as i64);
        let expected_delta_order = Ratio::new((k - k.min(order)) as i64, k as i64);
        slot[0] += u64::from(node.rank == expected_rank);
        slot[1] += u64::from(node.delta_s == expected_delta);
        slot[2] += u64::from(node.delta_s == expected_delta_order);
    }
    acc.observations += 1;
}

fn dag_node_stats(
    n: usize,
    k: usize,
    ctx: FieldContext,
    trials: u64,
    cell_seed: u64,
    mode: SamplingMode,
) -> Result<DagTally, ExperimentError> {
    let net = Network::complete_dag(n, cell_seed)?;
    let orders = n - 2;
    let bits = coefficient_slots(&net, k)? as u64 * u64::from(ctx.m());
    if decide_exhaustive(mode, bits)? {
        let mut tally = DagTally {
            per_order: vec![[0; 3]; orders],
            observations: 0,
        };
        for_each_code(&net, k, ctx, |code| {
            dag_tally_one(&seclin::network_report(code), k, &mut tally);
        })?;
        Ok(tally)
    } else {
        let tally = (0..trials)
            .into_par_iter()
            .fold(
                || DagTally {
                    per_order: vec![[0; 3]; orders],
                    observations: 0,
                },
                |mut acc, t| {
                    let mut rng = trial_rng(cell_seed, t);
                    let code_seed = rng.next_u64();
                    let code = CodeInstance::sample(&net, k, ctx, code_seed)
                        .expect("rate validated before tallying");
                    dag_tally_one(&seclin::network_report(&code), k, &mut acc);
                    acc
                },
            )
            .reduce(
                || DagTally {
                    per_order: vec![[0; 3]; orders],
                    observations: 0,
                },
                |mut a, b| {
                    for (x, y) in a.per_order.iter_mut().zip(&b.per_order) {
                        for (u, v) in x.iter_mut().zip(y) {
                            *u += v;
                        }
                    }
                    a.observations += b.observations;
                    a
                },
            );
        Ok(tally)
    }
}

/// Per-order and aggregate rank/level match rates on the complete DAG.
/// `which` selects the headline estimate: 0 = rank match (L4), 1 = level
/// match (L5).
fn dag_cells(
    n: usize,
    k: usize,
    ctx: FieldContext,
    tally: &DagTally,
    threshold: f64,
    which: usize,
) -> Vec<CellResult> {
    let trials = tally.observations;
    let mut cells = Vec::new();
    let mut agg = [0u64; 3];
    for (i, counts) in tally.per_order.iter().enumerate() {
        let order = i + 2;
        for (a, c) in agg.iter_mut().zip(counts) {
            *a += c;
        }
        let successes = counts[which];
        let (estimate, ci_lo, ci_hi) = sampled_cell(successes, trials);
        cells.push(CellResult {
            m: ctx.m(),
            k: Some(k),
            n: Some(n),
            delta_in: Some(order - 1),
            trials,
            successes,
            estimate,
            ci_lo,
            ci_hi,
            exhaustive: false,
            verdict: Some(estimate >= threshold),
            detail: Some(CellDetail::DagNode {
                order,
                rank_match: counts[0] as f64 / trials as f64,
                delta_match: counts[1] as f64 / trials as f64,
                delta_match_order_form: counts[2] as f64 / trials as f64,
            }),
        });
    }
    let node_trials = trials * tally.per_order.len() as u64;
    let successes = agg[which];
    let (estimate, ci_lo, ci_hi) = sampled_cell(successes, node_trials);
    cells.push(CellResult {
        m: ctx.m(),
        k: Some(k),
        n: Some(n),
        delta_in: None,
        trials: node_trials,
        successes,
        estimate,
        ci_lo,
        ci_hi,
        exhaustive: false,
        verdict: Some(estimate >= threshold),
        detail: Some(CellDetail::DagAggregate {
            rank_match: agg[0] as f64 / node_trials as f64,
            delta_match: agg[1] as f64 / node_trials as f64,
            delta_match_order_form: agg[2] as f64 / node_trials as f64,
        }),
    });
    cells
}

/// Sample codes on complete DAGs and compare every intermediate node's rank
/// to min(delta_in, K), per node order and in aggregate.
pub fn complete_dag_rank_check(
    n: usize,
    k: usize,
    ctx: FieldContext,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mut config = ExperimentConfig::new(ClaimId::L4);
    config.m = vec![ctx.m()];
    config.poly = Some(format!("{:#x}", ctx.reduction_poly()));
    config.k = vec![k];
    config.n = vec![n];
    config.trials = trials;
    config.seed = seed;
    run_dag_claim(&config, &[ctx], 0)
}

fn run_dag_claim(
    config: &ExperimentConfig,
    ctxs: &[FieldContext],
    which: usize,
) -> Result<ExperimentResult, ExperimentError> {
    if config.k.is_empty() || config.n.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "L4/L5 need nonempty `k` and `n` lists".into(),
        ));
    }
    for &n in &config.n {
        if n < 3 {
            return Err(ExperimentError::InvalidConfig(format!(
                "complete-DAG claims need n >= 3, got {n}"
            )));
        }
        for &k in &config.k {
            if k < 1 || k > n - 1 {
                return Err(ExperimentError::InvalidConfig(format!(
                    "K={k} out of range 1..={} for n={n}",
                    n - 1
                )));
            }
        }
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut aggregates = Vec::new();
    let mut idx = 0u64;
    for &ctx in ctxs {
        for &k in &config.k {
            for &n in &config.n {
                let tally = dag_node_stats(
                    n,
                    k,
                    ctx,
                    config.trials,
                    derive_cell_seed(config.seed, idx),
                    config.mode,
                )?;
                idx += 1;
                let block = dag_cells(n, k, ctx, &tally, config.threshold, which);
                aggregates.push(block.last().expect("block has aggregate").clone());
                cells.extend(block);
            }
        }
    }
    let name = if which == 0 {
        "aggregate_rank_match"
    } else {
        "aggregate_delta_match"
    };
    let checks = vec![NamedCheck {
        name: name.into(),
        pass: aggregates.iter().all(|c| c.verdict == Some(true)),
    }];
    Ok(finish(config, cells, checks, started))
}

// ---------------------------------------------------------------------------
// T2: secure max-flow of the complete DAG
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn maxflow_cell(
    n: usize,
    k: usize,
    ctx: FieldContext,
    target: Option<Ratio>,
    event: &str,
    trials: u64,
    cell_seed: u64,
    mode: SamplingMode,
    threshold: f64,
) -> Result<CellResult, ExperimentError> {
    let net = Network::complete_dag(n, cell_seed)?;
    let success = |report: &seclin::SecurityReport| match target {
        Some(t) => report.min_delta_s == Some(t),
        None => report.min_delta_s == Some(Ratio::zero()),
    };
    let bits = coefficient_slots(&net, k)? as u64 * u64::from(ctx.m());
    let (successes, total, exhaustive) = if decide_exhaustive(mode, bits)? {
        let mut successes = 0u64;
        let total = for_each_code(&net, k, ctx, |code| {
            successes += u64::from(success(&seclin::network_report(code)));
        })?;
        (successes, total, true)
    } else {
        let successes = count_parallel(trials, cell_seed, |rng| {
            let code_seed = rng.next_u64();
            let code = CodeInstance::sample(&net, k, ctx, code_seed).expect("K <= n-1 is feasible");
            success(&seclin::network_report(&code))
        });
        (successes, trials, false)
    };
    let estimate = successes as f64 / total as f64;
    let (ci_lo, ci_hi) = if exhaustive {
        (estimate, estimate)
    } else {
        wilson_interval(successes, total)
    };
    Ok(CellResult {
        m: ctx.m(),
        k: Some(k),
        n: Some(n),
        delta_in: None,
        trials: total,
        successes,
        estimate,
        ci_lo,
        ci_hi,
        exhaustive,
        verdict: Some(estimate >= threshold),
        detail: Some(CellDetail::MaxFlowEvent {
            event: event.into(),
        }),
    })
}

/// For each n: at K = n-1 estimate P(min intermediate level = 1/(n-1)); at
/// K = n-2 estimate P(some intermediate node is fully compromised). Both
/// hold with high probability exactly when the secure max-flow is n-1.
pub fn secure_maxflow_sweep(
    ns: &[usize],
    ctx: FieldContext,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let mut config = ExperimentConfig::new(ClaimId::T2);
    config.m = vec![ctx.m()];
    config.poly = Some(format!("{:#x}", ctx.reduction_poly()));
    config.n = ns.to_vec();
    config.trials = trials;
    config.seed = seed;
    run_t2(&config, &[ctx])
}

fn run_t2(
    config: &ExperimentConfig,
    ctxs: &[FieldContext],
) -> Result<ExperimentResult, ExperimentError> {
    if config.n.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "T2 needs a nonempty `n` list".into(),
        ));
    }
    for &n in &config.n {
        if n < 3 {
            return Err(ExperimentError::InvalidConfig(format!(
                "secure max-flow needs at least one intermediate node (n >= 3), got {n}"
            )));
        }
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut checks = Vec::new();
    let mut idx = 0u64;
    for &ctx in ctxs {
        for &n in &config.n {
            let capacity = seclin::secure_max_flow_complete_dag(n)?;
            let at = maxflow_cell(
                n,
                capacity,
                ctx,
                Some(Ratio::new(1, (n - 1) as i64)),
                "min_level_is_1_over_n_minus_1",
                config.trials,
                derive_cell_seed(config.seed, idx),
                config.mode,
                config.threshold,
            )?;
            idx += 1;
            let below = maxflow_cell(
                n,
                capacity - 1,
                ctx,
                None,
                "some_intermediate_fully_compromised",
                config.trials,
                derive_cell_seed(config.seed, idx),
                config.mode,
                config.threshold,
            )?;
            idx += 1;
            checks.push(NamedCheck {
                name: format!("n{n}_at_capacity_min_level"),
                pass: at.verdict == Some(true),
            });
            checks.push(NamedCheck {
                name: format!("n{n}_below_capacity_full_decode"),
                pass: below.verdict == Some(true),
            });
            cells.push(at);
            cells.push(below);
        }
    }
    Ok(finish(config, cells, checks, started))
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

fn finish(
    config: &ExperimentConfig,
    cells: Vec<CellResult>,
    checks: Vec<NamedCheck>,
    started: Instant,
) -> ExperimentResult {
    let pass = checks.iter().all(|c| c.pass);
    ExperimentResult {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        claim: config.claim,
        seed: config.seed,
        config: config.clone(),
        cells,
        checks,
        pass,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    }
}

/// Run a claim suite described by `config` on the global thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate_common()?;
    let ctxs = config.contexts()?;
    match config.claim {
        ClaimId::L2 => run_l2(config, &ctxs),
        ClaimId::L3 => run_l3(config, &ctxs),
        ClaimId::T1 => run_t1(config, &ctxs),
        ClaimId::L4 => run_dag_claim(config, &ctxs, 0),
        ClaimId::L5 => run_dag_claim(config, &ctxs, 1),
        ClaimId::T2 => run_t2(config, &ctxs),
    }
}

/// Same, pinned to `jobs` worker threads. Results are identical for any
/// worker count; only the wall clock changes.
pub fn run_experiment_with_jobs(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentResult, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn gf(m: u32) -> FieldContext {
        FieldContext::new(m).unwrap()
    }

    #[test]
    fn l2_exact_small_fields() {
        // GF(2): products (a,b) are zero in 3 of 4 cases
        let r = estimate_zero_probability(gf(1), 1, 1000, 0).unwrap();
        let cell = &r.cells[0];
        assert!(cell.exhaustive);
        assert_eq!((cell.successes, cell.trials), (3, 4));
        // GF(4): 2q-1 = 7 zeros among 16 table entries
        let r = estimate_zero_probability(gf(2), 1, 1000, 0).unwrap();
        let cell = &r.cells[0];
        assert_eq!((cell.successes, cell.trials), (7, 16));
        assert!(r.pass);
    }

    #[test]
    fn l2_two_term_sum_gf2_exact() {
        // sum of two products over GF(2): zero unless exactly one product is 1
        // P = 1 - 2 * (3/4) * (1/4) = 10/16
        let r = estimate_zero_probability(gf(1), 2, 1000, 0).unwrap();
        let cell = &r.cells[0];
        assert_eq!((cell.successes, cell.trials), (10, 16));
    }

    #[test]
    fn l2_four_term_sum_decreases_in_q() {
        // GF(2), 4 terms, exact: XOR of four Bernoulli(1/4) products is zero
        // with probability (1 + (1/2)^4)/2 = 17/32; larger fields fall off
        let mut config = ExperimentConfig::new(ClaimId::L2);
        config.m = vec![1, 2, 8];
        config.terms = 4;
        config.trials = 20_000;
        config.seed = 4;
        let r = run_experiment(&config).unwrap();
        assert_eq!((r.cells[0].successes, r.cells[0].trials), (136, 256));
        assert!(r.cells[0].exhaustive && r.cells[1].exhaustive);
        assert!(!r.cells[2].exhaustive);
        assert_eq!(r.check("strictly_decreasing_in_m"), Some(true));
    }

    #[test]
    fn l2_sampled_agrees_with_exact() {
        let mut config = ExperimentConfig::new(ClaimId::L2);
        config.m = vec![2];
        config.trials = 20_000;
        config.seed = 5;
        config.mode = SamplingMode::Sampled;
        let r = run_experiment(&config).unwrap();
        let cell = &r.cells[0];
        assert!(!cell.exhaustive);
        let exact = 7.0 / 16.0;
        assert!(cell.ci_lo <= exact && exact <= cell.ci_hi);
    }

    #[test]
    fn l2_decreasing_across_fields() {
        let mut config = ExperimentConfig::new(ClaimId::L2);
        config.m = vec![1, 2, 4, 8];
        config.trials = 10_000;
        config.seed = 1;
        let r = run_experiment(&config).unwrap();
        assert_eq!(r.check("strictly_decreasing_in_m"), Some(true));
        assert_eq!(r.check("endpoint_cis_disjoint"), Some(true));
        assert!(r.pass);
    }

    #[test]
    fn t1_exhaustive_base_case() {
        // GF(2), K=2, delta_in=1: rows (1,0) and (0,1) recover a symbol
        let r = estimate_ld_positive(&[gf(1)], &[2], 1, 1000, 0).unwrap();
        let cell = &r.cells[0];
        assert!(cell.exhaustive);
        assert_eq!((cell.successes, cell.trials), (2, 4));
        assert_eq!(cell.estimate, 0.5);
    }

    #[test]
    fn t1_rejects_delta_at_least_k() {
        let err = estimate_ld_positive(&[gf(1)], &[2], 2, 1000, 0).unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidConfig(_)));
    }

    #[test]
    fn t1_trends() {
        let r = estimate_ld_positive(&[gf(1), gf(2), gf(4)], &[4, 8], 2, 2000, 3).unwrap();
        assert_eq!(r.check("nonincreasing_in_m_at_k4"), Some(true));
        assert_eq!(r.check("nonincreasing_in_m_at_k8"), Some(true));
        assert_eq!(r.check("nonincreasing_in_k_at_m1"), Some(true));
        assert!(r.pass);
    }

    #[test]
    fn l3_chain_exhaustive_matches_hand_count() {
        // chain 0->1->2, K=1: the receiver sees the single column [a*b];
        // zero in 2q-1 of the q^2 codes
        let net = Network::build(3, vec![(0, 1), (1, 2)], vec![0], vec![2]).unwrap();
        for m in [1, 2] {
            let r = estimate_row_zeros(gf(m), 1, &net, 1000, 0).unwrap();
            let cell = &r.cells[0];
            assert!(cell.exhaustive);
            let q = u64::from(gf(m).q());
            assert_eq!(cell.trials, q * q);
            assert_eq!(cell.successes, 2 * q - 1);
            let Some(CellDetail::RowZeros {
                xi, ref buckets, ..
            }) = cell.detail
            else {
                panic!("missing detail");
            };
            assert_eq!(xi, 1);
            // Bernoulli: only y=0 and y=1 buckets populated
            assert_eq!(buckets.len(), 2);
            assert_eq!(buckets[1].count, 2 * q - 1);
        }
    }

    #[test]
    fn l3_exhaustive_multi_source_with_process_map() {
        // two sources feeding one receiver; enumeration honors the process
        // map, so there are exactly q^2 codes (one free coefficient each)
        let file = crate::netgraph::GraphFile {
            n: 3,
            edges: vec![(0, 2), (1, 2)],
            sources: vec![0, 1],
            receivers: vec![2],
            orders: None,
            process_map: Some(vec![0, 1]),
        };
        let net = Network::from_graph_file(file).unwrap();
        let r = estimate_row_zeros(gf(1), 2, &net, 1000, 0).unwrap();
        let cell = &r.cells[0];
        assert!(cell.exhaustive);
        assert_eq!(cell.trials, 4);
        // rows are (a0, 0) and (0, a1): 12 zeros across 16 entries
        assert_eq!(cell.estimate, 0.75);
    }

    #[test]
    fn l3_sampled_mean_consistency_on_butterfly() {
        let net = fixtures::butterfly_network();
        let r = estimate_row_zeros(gf(4), 2, &net, 400, 9).unwrap();
        assert_eq!(r.check("mean_consistent_with_entry_rate"), Some(true));
        let cell = &r.cells[0];
        assert!(!cell.exhaustive);
        assert_eq!(cell.delta_in, Some(2));
    }

    #[test]
    fn l4_exhaustive_n3_gf2() {
        // n=3 complete DAG, K=2, GF(2): the only intermediate node sees the
        // source column (a1, a2); rank matches min(1, 2) = 1 unless both are
        // zero, so 24 of the 32 codes match.
        let r = complete_dag_rank_check(3, 2, gf(1), 1000, 0).unwrap();
        let per_order = &r.cells[0];
        assert_eq!(per_order.trials, 32);
        assert_eq!(per_order.successes, 24);
        assert_eq!(per_order.estimate, 0.75);
    }

    #[test]
    fn l4_rank_match_high_at_q256() {
        let r = complete_dag_rank_check(5, 4, gf(8), 300, 11).unwrap();
        let agg = r.cells.last().unwrap();
        assert!(agg.estimate > 0.97, "aggregate rank match {}", agg.estimate);
    }

    #[test]
    fn l4_per_node_rates_at_n6() {
        // per-node rank match at q=2^8: the defect rate grows roughly like
        // (order-2)/q, so orders below the top sit above 99% while the
        // top-order node runs at about 98.6%
        let r = complete_dag_rank_check(6, 5, gf(8), 1000, 6).unwrap();
        for cell in &r.cells {
            let Some(CellDetail::DagNode {
                order, rank_match, ..
            }) = cell.detail
            else {
                continue;
            };
            if order < 5 {
                assert!(rank_match >= 0.99, "order {order}: {rank_match}");
            } else {
                assert!(rank_match >= 0.97, "order {order}: {rank_match}");
            }
        }
    }

    #[test]
    fn t1_sampled_ci_covers_exact() {
        // exhaustive and sampled modes agree where both run
        let exact = estimate_ld_positive(&[gf(1)], &[2], 1, 1000, 0)
            .unwrap()
            .cells[0]
            .estimate;
        let mut config = ExperimentConfig::new(ClaimId::T1);
        config.m = vec![1];
        config.k = vec![2];
        config.delta_in = Some(1);
        config.trials = 20_000;
        config.seed = 8;
        config.mode = SamplingMode::Sampled;
        let sampled = run_experiment(&config).unwrap();
        let cell = &sampled.cells[0];
        assert!(!cell.exhaustive);
        assert!(
            cell.ci_lo <= exact && exact <= cell.ci_hi,
            "CI [{}, {}] must cover {exact}",
            cell.ci_lo,
            cell.ci_hi
        );
    }

    #[test]
    fn l5_surfaces_both_formula_variants() {
        let mut config = ExperimentConfig::new(ClaimId::L5);
        config.m = vec![8];
        config.k = vec![4];
        config.n = vec![5];
        config.trials = 200;
        config.seed = 2;
        let r = run_experiment(&config).unwrap();
        let Some(CellDetail::DagNode {
            order,
            rank_match,
            delta_match,
            delta_match_order_form,
        }) = r.cells[0].detail
        else {
            panic!("missing detail");
        };
        assert_eq!(order, 2);
        assert!(rank_match > 0.9);
        assert!(delta_match > 0.9);
        // the order-based form disagrees at low orders where order != delta_in
        assert!(delta_match_order_form < delta_match);
    }

    #[test]
    fn t2_exhaustive_n3_gf2() {
        // n=3, K=2, GF(2): intermediate sees (a1, a2); min level is 1/2 only
        // for (1,1), i.e. 8 of 32 codes.
        let r = secure_maxflow_sweep(&[3], gf(1), 1000, 0).unwrap();
        let at = &r.cells[0];
        assert!(at.exhaustive);
        assert_eq!((at.successes, at.trials), (8, 32));
        // below capacity: K=1, the node decodes fully iff its observed
        // coefficient is nonzero; the other two slots are free (4 of 8 codes)
        let below = &r.cells[1];
        assert_eq!((below.successes, below.trials), (4, 8));
    }

    #[test]
    fn t2_high_rates_at_q256() {
        let r = secure_maxflow_sweep(&[4], gf(8), 300, 4).unwrap();
        assert!(r.cells[0].estimate > 0.95);
        assert!(r.cells[1].estimate > 0.97);
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let mut config = ExperimentConfig::new(ClaimId::T1);
        config.m = vec![2];
        config.k = vec![4];
        config.delta_in = Some(2);
        config.trials = 500;
        config.seed = 12;
        let single = run_experiment_with_jobs(&config, 1).unwrap();
        let multi = run_experiment_with_jobs(&config, 4).unwrap();
        assert_eq!(single.to_csv(), multi.to_csv());
    }

    #[test]
    fn config_validation() {
        let mut config = ExperimentConfig::new(ClaimId::L2);
        config.m = vec![1];
        config.trials = 50;
        assert!(matches!(
            run_experiment(&config),
            Err(ExperimentError::InvalidConfig(_))
        ));
        config.trials = 1000;
        config.m = vec![];
        assert!(matches!(
            run_experiment(&config),
            Err(ExperimentError::InvalidConfig(_))
        ));
    }

    #[test]
    fn config_json_round_trip() {
        let mut config = ExperimentConfig::new(ClaimId::T2);
        config.m = vec![8];
        config.n = vec![4, 5, 6];
        config.trials = 1000;
        config.seed = 7;
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n, config.n);
        assert_eq!(back.claim, ClaimId::T2);
        // defaults fill in for omitted fields
        let minimal: ExperimentConfig =
            serde_json::from_str(r#"{"claim":"L2","m":[1,2],"seed":3}"#).unwrap();
        assert_eq!(minimal.trials, 1000);
        assert_eq!(minimal.terms, 1);
        assert_eq!(minimal.threshold, 0.99);
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(lo > 0.38 && hi < 0.62);
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-12);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.94);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout_is_stable() {
        let r = estimate_zero_probability(gf(1), 1, 1000, 0).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# ncsec "));
        assert!(lines.next().unwrap().starts_with("# config "));
        assert_eq!(lines.next().unwrap(), "# seed 0");
        assert_eq!(
            lines.next().unwrap(),
            "claim,m,K,n,delta_in,trials,estimate,ci_lo,ci_hi,verdict"
        );
        assert_eq!(lines.next().unwrap(), "L2,1,,,,4,0.75,0.75,0.75,pass");
    }
}
