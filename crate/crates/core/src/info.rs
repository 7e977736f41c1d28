//! Achievable rates and capacity: exact and Monte Carlo mutual information
//! for a fixed codebook, Blahut-Arimoto capacity of the induced DMC, and
//! the closed-form linear-capacity reference.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::detector::flip_probs;
use crate::error::{Error, Result};
use crate::model::{simulate_onebit, ArrayResponse, GaussianSource, SnrConfig};

/// Largest N for which the 4^N output space is enumerated densely.
pub const DENSE_LIMIT: usize = 10;
/// Memory guard on inputs x outputs for dense transition rows.
const DENSE_CELL_LIMIT: usize = 1 << 27;

pub const DEFAULT_BA_TOL: f64 = 1e-6;
pub const DEFAULT_BA_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    Exact,
    MonteCarlo,
    BlahutArimoto,
    ClosedForm,
}

impl std::fmt::Display for RateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RateMethod::Exact => "exact",
            RateMethod::MonteCarlo => "monte-carlo",
            RateMethod::BlahutArimoto => "blahut-arimoto",
            RateMethod::ClosedForm => "closed-form",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateResult {
    pub bits: f64,
    pub method: RateMethod,
    pub stderr: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Capacity input alphabet for `onebit_capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    /// All 4^M transmit vectors, deduplicated by equivalent symbol.
    Full,
    /// Candidate symbols S(X~) only; a capacity lower bound.
    CandidateReduced,
}

/// Factorized transition law of the one-bit DMC for a fixed input list.
/// Never materializes the 4^N matrix unless asked to.
#[derive(Debug, Clone)]
pub struct DmcChannel {
    pub inputs: Vec<Complex64>,
    /// log_parts[s][t]: (ln Pr(part t = +1 | s), ln Pr(part t = -1 | s)),
    /// part t = 2k for antenna k real, 2k+1 for imaginary.
    log_parts: Vec<Vec<(f64, f64)>>,
    pub n: usize,
}

impl DmcChannel {
    pub fn new(inputs: Vec<Complex64>, b_r: &ArrayResponse, snr: SnrConfig) -> Self {
        let n = b_r.len();
        let log_parts = inputs
            .iter()
            .map(|&s| {
                let fp = flip_probs(s, b_r, snr);
                let mut parts = Vec::with_capacity(2 * n);
                for &(lp_r, lq_r, lp_i, lq_i) in &fp.parts {
                    parts.push((lp_r, lq_r));
                    parts.push((lp_i, lq_i));
                }
                parts
            })
            .collect();
        Self { inputs, log_parts, n }
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        1usize << (2 * self.n)
    }

    /// ln Pr(r = output index | input index).
    pub fn log_prob(&self, input: usize, output: usize) -> f64 {
        let parts = &self.log_parts[input];
        let mut acc = 0.0;
        for (t, &(lp, lq)) in parts.iter().enumerate() {
            acc += if output >> t & 1 == 1 { lp } else { lq };
        }
        acc
    }

    /// Dense linear-domain transition rows, guarded by N and memory limits.
    pub fn dense_rows(&self) -> Result<Vec<Vec<f64>>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::EnumerationLimit(format!(
                "N={} exceeds dense enumeration limit {}",
                self.n, DENSE_LIMIT
            )));
        }
        let outputs = self.num_outputs();
        if self.num_inputs().saturating_mul(outputs) > DENSE_CELL_LIMIT {
            return Err(Error::EnumerationLimit(format!(
                "{} inputs x {} outputs exceeds the dense matrix budget",
                self.num_inputs(),
                outputs
            )));
        }
        Ok((0..self.num_inputs())
            .into_par_iter()
            .map(|i| (0..outputs).map(|r| self.log_prob(i, r).exp()).collect())
            .collect())
    }
}

/// Kahan-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn logsumexp(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Exact mutual information I(s; r) with uniform input over the codebook,
/// by full enumeration of the 4^N output space.
pub fn exact_mi(codebook: &Codebook, b_r: &ArrayResponse, snr: SnrConfig) -> Result<RateResult> {
    exact_mi_symbols(&codebook.symbols(), b_r, snr)
}

pub fn exact_mi_symbols(
    symbols: &[Complex64],
    b_r: &ArrayResponse,
    snr: SnrConfig,
) -> Result<RateResult> {
    let dmc = DmcChannel::new(symbols.to_vec(), b_r, snr);
    if dmc.n > DENSE_LIMIT {
        return Err(Error::EnumerationLimit(format!(
            "N={} exceeds dense enumeration limit {}; use mc_mi",
            dmc.n, DENSE_LIMIT
        )));
    }
    let k = dmc.num_inputs() as f64;
    let outputs = dmc.num_outputs();
    let ln_k = k.ln();
    // data-parallel over output chunks, reduced in deterministic chunk order
    let chunk = 1usize << 12;
    let chunks: Vec<f64> = (0..outputs.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(outputs);
            let mut acc = Kahan::default();
            let mut ll = vec![0.0f64; dmc.num_inputs()];
            for r in lo..hi {
                for (i, l) in ll.iter_mut().enumerate() {
                    *l = dmc.log_prob(i, r);
                }
                let log_mix = logsumexp(&ll) - ln_k;
                for &l in &ll {
                    acc.add(l.exp() * (l - log_mix));
                }
            }
            acc.value()
        })
        .collect();
    let mut total = Kahan::default();
    for c in chunks {
        total.add(c);
    }
    let bits = (total.value() / k / std::f64::consts::LN_2).max(0.0);
    Ok(RateResult {
        bits,
        method: RateMethod::Exact,
        stderr: None,
        iterations: 0,
        converged: true,
    })
}

/// Monte Carlo estimate of the same mutual information, with standard error.
pub fn mc_mi(
    codebook: &Codebook,
    b_r: &ArrayResponse,
    snr: SnrConfig,
    samples: usize,
    noise: &mut GaussianSource,
) -> Result<RateResult> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(
            "mc_mi needs at least 1000 samples".into(),
        ));
    }
    let symbols = codebook.symbols();
    let dmc = DmcChannel::new(symbols.clone(), b_r, snr);
    let k = symbols.len();
    let ln_k = (k as f64).ln();
    let mut mean = Kahan::default();
    let mut sq = Kahan::default();
    let mut ll = vec![0.0f64; k];
    for _ in 0..samples {
        let s_idx = (noise.next_u64() % k as u64) as usize;
        let r = simulate_onebit(symbols[s_idx], b_r, snr, noise);
        let idx = r.to_index();
        for (i, l) in ll.iter_mut().enumerate() {
            *l = dmc.log_prob(i, idx);
        }
        let log_mix = logsumexp(&ll) - ln_k;
        let info = (ll[s_idx] - log_mix) / std::f64::consts::LN_2;
        mean.add(info);
        sq.add(info * info);
    }
    let n = samples as f64;
    let m = mean.value() / n;
    let var = (sq.value() / n - m * m).max(0.0);
    Ok(RateResult {
        bits: m,
        method: RateMethod::MonteCarlo,
        stderr: Some((var / n).sqrt()),
        iterations: samples,
        converged: true,
    })
}

/// Blahut-Arimoto capacity of a DMC given by dense transition rows
/// (rows[x][y] = Pr(y|x), each summing to 1). `tol` is the duality-gap
/// stopping threshold in bits.
pub fn blahut_arimoto_dense(
    rows: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(RateResult, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty input alphabet".into()));
    }
    let k = rows.len();
    let outputs = rows[0].len();
    if k == 1 {
        return Ok((
            RateResult {
                bits: 0.0,
                method: RateMethod::BlahutArimoto,
                stderr: None,
                iterations: 0,
                converged: true,
            },
            vec![1.0],
        ));
    }
    // precompute row entropies: sum_y P ln P
    let row_ent: Vec<f64> = rows
        .par_iter()
        .map(|row| {
            let mut acc = Kahan::default();
            for &p in row {
                if p > 0.0 {
                    acc.add(p * p.ln());
                }
            }
            acc.value()
        })
        .collect();

    let mut p = vec![1.0 / k as f64; k];
    let tol_nats = tol * std::f64::consts::LN_2;
    let mut iterations = 0;
    let mut converged = false;
    let mut lower_nats = 0.0;
    while iterations < max_iter {
        iterations += 1;
        // q_y = sum_x p_x P(y|x)
        let q: Vec<f64> = (0..outputs)
            .into_par_iter()
            .map(|y| {
                let mut acc = Kahan::default();
                for (x, row) in rows.iter().enumerate() {
                    acc.add(p[x] * row[y]);
                }
                acc.value()
            })
            .collect();
        // D_x = D(P(.|x) || q)
        let d: Vec<f64> = rows
            .par_iter()
            .enumerate()
            .map(|(x, row)| {
                let mut acc = Kahan::default();
                for (y, &pr) in row.iter().enumerate() {
                    if pr > 0.0 {
                        acc.add(-pr * q[y].ln());
                    }
                }
                row_ent[x] + acc.value()
            })
            .collect();
        let lower = p.iter().zip(&d).map(|(&px, &dx)| px * dx).sum::<f64>();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        lower_nats = lower;
        if upper - lower <= tol_nats {
            converged = true;
            break;
        }
        // p_x <- p_x exp(D_x) / Z
        let dmax = upper;
        let mut z = 0.0;
        for (px, &dx) in p.iter_mut().zip(&d) {
            *px *= (dx - dmax).exp();
            z += *px;
        }
        for px in &mut p {
            *px /= z;
        }
    }
    Ok((
        RateResult {
            bits: lower_nats / std::f64::consts::LN_2,
            method: RateMethod::BlahutArimoto,
            stderr: None,
            iterations,
            converged,
        },
        p,
    ))
}

/// Capacity of the one-bit DMC induced by an explicit input symbol list.
pub fn blahut_arimoto(
    inputs: &[Complex64],
    b_r: &ArrayResponse,
    snr: SnrConfig,
    tol: f64,
    max_iter: usize,
) -> Result<(RateResult, Vec<f64>)> {
    let dmc = DmcChannel::new(inputs.to_vec(), b_r, snr);
    let rows = dmc.dense_rows()?;
    blahut_arimoto_dense(&rows, tol, max_iter)
}

/// Merge inputs with identical equivalent symbols; the channel depends on x
/// only through s, so this is exact.
pub fn dedup_symbols(symbols: impl IntoIterator<Item = Complex64>) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    for s in symbols {
        let key_hit = out.iter().any(|t| (t - s).norm() < 1e-9);
        if !key_hit {
            out.push(s);
        }
    }
    out
}

/// One-bit channel capacity for a (b_T, b_R, rho) triple.
pub fn onebit_capacity(
    b_t: &ArrayResponse,
    b_r: &ArrayResponse,
    snr: SnrConfig,
    mode: CapacityMode,
) -> Result<RateResult> {
    let inputs = match mode {
        CapacityMode::Full => {
            let all = crate::codebook::brute_force_symbols(b_t, 8)?;
            dedup_symbols(all.symbols())
        }
        CapacityMode::CandidateReduced => {
            let cand = crate::codebook::candidate_symbols(b_t);
            dedup_symbols(cand.symbols())
        }
    };
    let (result, _) = blahut_arimoto(&inputs, b_r, snr, DEFAULT_BA_TOL, DEFAULT_BA_MAX_ITER)?;
    Ok(result)
}

/// C_L = log2(1 + M N rho).
pub fn linear_capacity(m: usize, n: usize, snr: SnrConfig) -> RateResult {
    RateResult {
        bits: (1.0 + (m * n) as f64 * snr.rho()).log2(),
        method: RateMethod::ClosedForm,
        stderr: None,
        iterations: 0,
        converged: true,
    }
}
