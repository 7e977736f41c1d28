//! Transmit codebook design: phase-sweep candidate set, equivalent symbols,
//! max-min-distance subset selection, closed forms for K=2/4, the guarded
//! brute-force oracle, and the beamforming-gain bound checks.

use itertools::Itertools;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sign_quantize_tx, ArrayResponse, QuantizedTxVector};

pub const DEFAULT_PHASE_EPS: f64 = 1e-6;
pub const DEFAULT_BRUTE_FORCE_GUARD: usize = 10;
/// Exact subset search is used while C(|symbols|, K) stays below this.
pub const EXACT_SUBSET_LIMIT: u128 = 10_000_000;

/// The phase-sweep candidate set X~, closed under multiplication by j.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub vectors: Vec<QuantizedTxVector>,
    /// Generating phases phi_k = -angle(t_k) + eps.
    pub phases: Vec<f64>,
}

/// Equivalent symbols paired with their generating transmit vectors.
#[derive(Debug, Clone)]
pub struct SymbolSet {
    pub m: usize,
    pub entries: Vec<(Complex64, QuantizedTxVector)>,
}

impl SymbolSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn max_magnitude_symbol(&self) -> Complex64 {
        self.entries
            .iter()
            .map(|e| e.0)
            .max_by(|a, b| {
                a.norm()
                    .partial_cmp(&b.norm())
                    .unwrap()
                    .then(b.arg().partial_cmp(&a.arg()).unwrap())
            })
            .expect("non-empty symbol set")
    }
}

/// A designed codebook: K symbols with transmit vectors, Gray labels, and
/// the rotation that aligns the first entry to phase zero.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub entries: Vec<CodebookEntry>,
    pub rotation: Complex64,
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct CodebookEntry {
    pub symbol: Complex64,
    /// None for the linear PSK reference codebook, where the transmit
    /// vector is b_T scaled by a PSK symbol rather than a quantized vector.
    pub txvec: Option<QuantizedTxVector>,
    pub label: Vec<u8>,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.k().trailing_zeros() as usize
    }

    pub fn symbols(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.symbol).collect()
    }

    pub fn labels(&self) -> Vec<Vec<u8>> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn min_distance(&self) -> f64 {
        min_pairwise_distance(&self.symbols())
    }

    /// Index of the entry whose label equals `bits`.
    pub fn index_of_label(&self, bits: &[u8]) -> Option<usize> {
        self.entries.iter().position(|e| e.label == bits)
    }
}

pub fn min_pairwise_distance(symbols: &[Complex64]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..symbols.len() {
        for j in i + 1..symbols.len() {
            min = min.min((symbols[i] - symbols[j]).norm());
        }
    }
    min
}

/// x(phi): element-wise sign of b_T e^{j phi}, scaled to unit magnitude.
pub fn x_of_phi(b_t: &ArrayResponse, phi: f64) -> QuantizedTxVector {
    let rot = Complex64::from_polar(1.0, phi);
    sign_quantize_tx(&b_t.elements().iter().map(|&t| t * rot).collect::<Vec<_>>())
}

/// Phase-sweep candidate set: phi_k = -angle(t_k) + eps, expanded by
/// {±x, ±jx} and deduplicated. Size is at most 4M.
pub fn candidate_set(b_t: &ArrayResponse) -> CandidateSet {
    candidate_set_with_eps(b_t, DEFAULT_PHASE_EPS)
}

pub fn candidate_set_with_eps(b_t: &ArrayResponse, eps: f64) -> CandidateSet {
    let angles: Vec<f64> = b_t.elements().iter().map(|t| t.arg()).collect();
    // Degenerate spacing: if two element angles are closer than eps (but not
    // equal), shrink eps to half the smallest nonzero gap so the sweep still
    // lands between the switch points.
    let mut eps = eps;
    let mut min_gap = f64::INFINITY;
    for i in 0..angles.len() {
        for j in i + 1..angles.len() {
            let mut d = (angles[i] - angles[j]).abs() % (2.0 * std::f64::consts::PI);
            d = d.min(2.0 * std::f64::consts::PI - d);
            if d > 1e-14 {
                min_gap = min_gap.min(d);
            }
        }
    }
    if min_gap < eps {
        eps = min_gap / 2.0;
    }

    let mut vectors = Vec::new();
    let mut phases = Vec::new();
    for &a in &angles {
        let phi = -a + eps;
        phases.push(phi);
        let x = x_of_phi(b_t, phi);
        let jx = x.rotate_j();
        for v in [x.clone(), x.negate(), jx.clone(), jx.negate()] {
            if !vectors.contains(&v) {
                vectors.push(v);
            }
        }
    }
    debug_assert!(vectors.len() <= 4 * b_t.len());
    CandidateSet { vectors, phases }
}

/// s = sqrt(1/M) b_T^H x.
pub fn equivalent_symbol(b_t: &ArrayResponse, x: &QuantizedTxVector) -> Result<Complex64> {
    if b_t.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: b_t.len(), got: x.len() });
    }
    let m = b_t.len() as f64;
    let sum: Complex64 = b_t
        .elements()
        .iter()
        .zip(x.elements())
        .map(|(t, xe)| t.conj() * xe)
        .sum();
    Ok(sum / m.sqrt())
}

pub fn candidate_symbols(b_t: &ArrayResponse) -> SymbolSet {
    let cs = candidate_set(b_t);
    let entries = cs
        .vectors
        .into_iter()
        .map(|v| (equivalent_symbol(b_t, &v).unwrap(), v))
        .collect();
    SymbolSet { m: b_t.len(), entries }
}

/// All 4^M equivalent symbols, guarded by `max_m`.
pub fn brute_force_symbols(b_t: &ArrayResponse, max_m: usize) -> Result<SymbolSet> {
    let m = b_t.len();
    if m > max_m {
        return Err(Error::GuardExceeded { m, max_m });
    }
    let total = 1usize << (2 * m);
    let entries: Vec<(Complex64, QuantizedTxVector)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let bits = (0..m)
                .map(|k| crate::model::SignPair {
                    re_pos: idx >> (2 * k) & 1 == 1,
                    im_pos: idx >> (2 * k + 1) & 1 == 1,
                })
                .collect();
            let v = QuantizedTxVector::from_bits(bits);
            (equivalent_symbol(b_t, &v).unwrap(), v)
        })
        .collect();
    Ok(SymbolSet { m, entries })
}

/// Report for the beamforming-gain bounds: every candidate symbol magnitude
/// exceeds sqrt(M/2), and the best one reaches at least 2 sqrt(2M) / pi.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub lower_bound_all: f64,
    pub lower_bound_max: f64,
    pub all_above_lower: bool,
    pub max_above_bound: bool,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.all_above_lower && self.max_above_bound
    }
}

pub fn check_propositions(b_t: &ArrayResponse) -> BoundReport {
    let m = b_t.len();
    let symbols = candidate_symbols(b_t);
    let mags: Vec<f64> = symbols.symbols().map(|s| s.norm()).collect();
    let min_magnitude = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_magnitude = mags.iter().cloned().fold(0.0, f64::max);
    let lower_bound_all = (m as f64 / 2.0).sqrt();
    let lower_bound_max = 2.0 * (2.0 * m as f64).sqrt() / std::f64::consts::PI;
    BoundReport {
        m,
        min_magnitude,
        max_magnitude,
        lower_bound_all,
        lower_bound_max,
        all_above_lower: min_magnitude > lower_bound_all,
        max_above_bound: max_magnitude >= lower_bound_max,
    }
}

/// Binary-reflected Gray sequence for K codewords of log2 K bits each.
pub fn gray_labels(k: usize) -> Result<Vec<Vec<u8>>> {
    if k < 2 || !k.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "K must be a power of two >= 2, got {k}"
        )));
    }
    let bits = k.trailing_zeros() as usize;
    Ok((0..k)
        .map(|n| {
            let g = n ^ (n >> 1);
            (0..bits).rev().map(|b| ((g >> b) & 1) as u8).collect()
        })
        .collect())
}

fn build_codebook(
    mut chosen: Vec<(Complex64, Option<QuantizedTxVector>)>,
    m: usize,
) -> Result<Codebook> {
    let k = chosen.len();
    let labels = gray_labels(k)?;
    chosen.sort_by(|a, b| a.0.arg().partial_cmp(&b.0.arg()).unwrap());
    let rotation = {
        let s0 = chosen[0].0;
        s0 / s0.norm()
    };
    let entries = chosen
        .into_iter()
        .zip(labels)
        .map(|((symbol, txvec), label)| CodebookEntry { symbol, txvec, label })
        .collect();
    Ok(Codebook { entries, rotation, m })
}

/// Sorted-distance-vector comparison used for subset selection: larger
/// sorted distance profile wins; phase profile breaks remaining ties.
fn subset_key(symbols: &[Complex64], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push((symbols[i] - symbols[j]).norm());
        }
    }
    dists.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut phases: Vec<f64> = idx.iter().map(|&i| symbols[i].arg()).collect();
    phases.sort_by(|x, y| x.partial_cmp(y).unwrap());
    (dists, phases)
}

fn better_subset(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> bool {
    // compare sorted distances lexicographically, larger preferred
    for (x, y) in a.0.iter().zip(&b.0) {
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    // tie: smaller sorted phase vector preferred
    for (x, y) in a.1.iter().zip(&b.1) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Max-min-distance K-subset of the symbol set. Exact subset search below
/// `EXACT_SUBSET_LIMIT` combinations, greedy farthest-point seeding plus
/// pairwise-swap local search above it.
pub fn select_codebook(symbols: &SymbolSet, k: usize) -> Result<Codebook> {
    if k > symbols.len() {
        return Err(Error::Infeasible { k, available: symbols.len() });
    }
    if k < 2 || !k.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "K must be a power of two >= 2, got {k}"
        )));
    }
    let syms: Vec<Complex64> = symbols.symbols().collect();
    let n = syms.len();

    let chosen_idx = if binomial(n as u128, k as u128) <= EXACT_SUBSET_LIMIT {
        let mut best: Option<(Vec<usize>, (Vec<f64>, Vec<f64>))> = None;
        for combo in (0..n).combinations(k) {
            let key = subset_key(&syms, &combo);
            match &best {
                Some((_, bk)) if !better_subset(&key, bk) => {}
                _ => best = Some((combo, key)),
            }
        }
        best.unwrap().0
    } else {
        greedy_subset(&syms, k)
    };

    let chosen = chosen_idx
        .into_iter()
        .map(|i| {
            let (s, v) = &symbols.entries[i];
            (*s, Some(v.clone()))
        })
        .collect();
    build_codebook(chosen, symbols.m)
}

fn greedy_subset(syms: &[Complex64], k: usize) -> Vec<usize> {
    let n = syms.len();
    // seed with the farthest pair
    let mut best_pair = (0, 1, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = (syms[i] - syms[j]).norm();
            if d > best_pair.2 {
                best_pair = (i, j, d);
            }
        }
    }
    let mut selected = vec![best_pair.0, best_pair.1];
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if selected.contains(&c) {
                continue;
            }
            let d = selected
                .iter()
                .map(|&s| (syms[c] - syms[s]).norm())
                .fold(f64::INFINITY, f64::min);
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((c, d)),
            }
        }
        selected.push(best.unwrap().0);
    }
    // pairwise-swap local search to a fixed point
    loop {
        let current_key = subset_key(syms, &selected);
        let mut improved: Option<(usize, usize, (Vec<f64>, Vec<f64>))> = None;
        for (pos, &_s) in selected.clone().iter().enumerate() {
            for c in 0..n {
                if selected.contains(&c) {
                    continue;
                }
                let mut trial = selected.clone();
                trial[pos] = c;
                let key = subset_key(syms, &trial);
                let beats_current = better_subset(&key, &current_key);
                let beats_best = match &improved {
                    Some((_, _, bk)) => better_subset(&key, bk),
                    None => true,
                };
                if beats_current && beats_best {
                    improved = Some((pos, c, key));
                }
            }
        }
        match improved {
            Some((pos, c, _)) => selected[pos] = c,
            None => break,
        }
    }
    selected.sort_unstable();
    selected
}

/// Closed-form optimal codebooks for K=2 ({±s_max}) and K=4 ({±s_max, ±j s_max}).
pub fn closed_form_codebook(symbols: &SymbolSet, k: usize) -> Result<Codebook> {
    if k != 2 && k != 4 {
        return Err(Error::InvalidParameter(format!(
            "closed form exists only for K=2 or K=4, got {k}"
        )));
    }
    let (s_max, x_max) = symbols
        .entries
        .iter()
        .max_by(|a, b| {
            a.0.norm()
                .partial_cmp(&b.0.norm())
                .unwrap()
                .then(b.0.arg().partial_cmp(&a.0.arg()).unwrap())
        })
        .ok_or_else(|| Error::InvalidParameter("empty symbol set".into()))?
        .clone();

    let find = |target: Complex64, what: &'static str| -> Result<(Complex64, QuantizedTxVector)> {
        symbols
            .entries
            .iter()
            .find(|(s, _)| (s - target).norm() < 1e-9)
            .cloned()
            .ok_or(Error::ClosureViolated(what))
    };

    let mut chosen = vec![(s_max, Some(x_max))];
    let neg = find(-s_max, "negation")?;
    chosen.push((neg.0, Some(neg.1)));
    if k == 4 {
        let j = Complex64::new(0.0, 1.0);
        let pj = find(j * s_max, "multiplication by j")?;
        let nj = find(-j * s_max, "multiplication by j")?;
        chosen.push((pj.0, Some(pj.1)));
        chosen.push((nj.0, Some(nj.1)));
    }
    build_codebook(chosen, symbols.m)
}

/// Linear-transceiver reference: K-PSK with magnitude sqrt(M).
pub fn linear_psk_codebook(m: usize, k: usize) -> Result<Codebook> {
    if m == 0 {
        return Err(Error::InvalidDimension("M must be at least 1".into()));
    }
    if k < 2 || !k.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "K must be a power of two >= 2, got {k}"
        )));
    }
    let mag = (m as f64).sqrt();
    let chosen = (0..k)
        .map(|n| {
            let phase = 2.0 * std::f64::consts::PI * n as f64 / k as f64;
            (Complex64::from_polar(mag, phase), None)
        })
        .collect();
    build_codebook(chosen, m)
}

// ---------------------------------------------------------------------------
// codebook file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookFile {
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_t_deg: Option<f64>,
    pub k: usize,
    pub rotation: [f64; 2],
    pub entries: Vec<CodebookFileEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookFileEntry {
    pub re: f64,
    pub im: f64,
    /// 2M transmit sign bits as hex (element 0 real bit first); absent for
    /// the linear PSK reference codebook.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_bits_hex: Option<String>,
    pub label: String,
}

impl Codebook {
    pub fn to_file(&self, theta_t_deg: Option<f64>) -> CodebookFile {
        CodebookFile {
            m: self.m,
            theta_t_deg,
            k: self.k(),
            rotation: [self.rotation.re, self.rotation.im],
            entries: self
                .entries
                .iter()
                .map(|e| CodebookFileEntry {
                    re: e.symbol.re,
                    im: e.symbol.im,
                    tx_bits_hex: e.txvec.as_ref().map(|v| v.to_hex()),
                    label: e.label.iter().map(|b| char::from(b'0' + b)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(f: &CodebookFile) -> Result<Self> {
        if f.entries.len() != f.k {
            return Err(Error::Config(format!(
                "codebook file declares K={} but has {} entries",
                f.k,
                f.entries.len()
            )));
        }
        let entries = f
            .entries
            .iter()
            .map(|e| {
                let txvec = e
                    .tx_bits_hex
                    .as_deref()
                    .map(|h| QuantizedTxVector::from_hex(h, f.m))
                    .transpose()?;
                let label = e
                    .label
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        _ => Err(Error::Config(format!("bad label char '{c}'"))),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                Ok(CodebookEntry { symbol: Complex64::new(e.re, e.im), txvec, label })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Codebook {
            entries,
            rotation: Complex64::new(f.rotation[0], f.rotation[1]),
            m: f.m,
        })
    }
}
