//! Receive beamforming as detection: per-symbol ML weights w(s) and offsets
//! d(s) for the one-bit channel, hard decisions, symbol log-likelihoods,
//! per-bit LLRs for an outer code, and the linear MRC baseline.
//!
//! Everything stays in the log domain; the p/q flip probabilities are only
//! exponentiated inside tests.

use num_complex::Complex64;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::logq::log_q;
use crate::model::{ArrayResponse, QuantizedRxVector, SnrConfig};

pub const DEFAULT_LLR_CLIP: f64 = 50.0;

/// Per-antenna, per-part log flip probabilities for one symbol:
/// `lp` is ln Pr(part = +1 | s), `lq` is ln Pr(part = -1 | s).
#[derive(Debug, Clone)]
pub struct FlipProbs {
    /// [antenna] -> (lp_real, lq_real, lp_imag, lq_imag)
    pub parts: Vec<(f64, f64, f64, f64)>,
}

/// Pr(y_{R,k} = +1 | s) = Q(-sqrt(2 rho) real(r_k s)), and the imaginary
/// analogue, all in the log domain.
pub fn flip_probs(s: Complex64, b_r: &ArrayResponse, snr: SnrConfig) -> FlipProbs {
    let scale = (2.0 * snr.rho()).sqrt();
    let parts = b_r
        .elements()
        .iter()
        .map(|&rk| {
            let z = rk * s;
            (
                log_q(-scale * z.re),
                log_q(scale * z.re),
                log_q(-scale * z.im),
                log_q(scale * z.im),
            )
        })
        .collect();
    FlipProbs { parts }
}

/// Per-symbol ML beamforming weights and offsets for a codebook.
#[derive(Debug, Clone)]
pub struct MlWeights {
    /// weights[s][k] = ln(p_R/q_R) + j ln(p_I/q_I), clipped to ±2*llr_clip
    pub weights: Vec<Vec<Complex64>>,
    /// d(s) = sum over antennas and parts of ln(p q)
    pub offsets: Vec<f64>,
    pub llr_clip: f64,
}

impl MlWeights {
    pub fn num_symbols(&self) -> usize {
        self.weights.len()
    }

    pub fn n(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }
}

pub fn ml_weights(codebook: &Codebook, b_r: &ArrayResponse, snr: SnrConfig) -> MlWeights {
    ml_weights_with_clip(codebook, b_r, snr, DEFAULT_LLR_CLIP)
}

pub fn ml_weights_with_clip(
    codebook: &Codebook,
    b_r: &ArrayResponse,
    snr: SnrConfig,
    llr_clip: f64,
) -> MlWeights {
    let clip = 2.0 * llr_clip;
    let mut weights = Vec::with_capacity(codebook.k());
    let mut offsets = Vec::with_capacity(codebook.k());
    for entry in &codebook.entries {
        let fp = flip_probs(entry.symbol, b_r, snr);
        let mut w = Vec::with_capacity(fp.parts.len());
        let mut d = 0.0;
        for &(lp_r, lq_r, lp_i, lq_i) in &fp.parts {
            w.push(Complex64::new(
                (lp_r - lq_r).clamp(-clip, clip),
                (lp_i - lq_i).clamp(-clip, clip),
            ));
            d += lp_r + lq_r + lp_i + lq_i;
        }
        weights.push(w);
        offsets.push(d);
    }
    MlWeights { weights, offsets, llr_clip }
}

fn score(r: &QuantizedRxVector, w: &[Complex64], d: f64) -> f64 {
    // real(w^H r) + d, with r components in {±1 ± j}
    let mut acc = d;
    for (wk, bk) in w.iter().zip(r.bits()) {
        acc += if bk.re_pos { wk.re } else { -wk.re };
        acc += if bk.im_pos { wk.im } else { -wk.im };
    }
    acc
}

/// Hard ML decision: argmax_s real(w^H(s) r) + d(s). Ties go to the
/// lowest index.
pub fn detect_ml(r: &QuantizedRxVector, weights: &MlWeights) -> usize {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (w, &d)) in weights.weights.iter().zip(&weights.offsets).enumerate() {
        let sc = score(r, w, d);
        if sc > best_score {
            best_score = sc;
            best = i;
        }
    }
    best
}

/// ln Pr(r|s) = (real(w^H(s) r) + d(s)) / 2, for every codebook symbol.
pub fn symbol_log_likelihoods(r: &QuantizedRxVector, weights: &MlWeights) -> Vec<f64> {
    weights
        .weights
        .iter()
        .zip(&weights.offsets)
        .map(|(w, &d)| 0.5 * score(r, w, d))
        .collect()
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Per-bit LLRs: positive means bit 0 more likely. Clipped to ±llr_clip.
pub fn bit_llrs(
    r: &QuantizedRxVector,
    weights: &MlWeights,
    labels: &[Vec<u8>],
) -> Result<Vec<f64>> {
    let k = weights.num_symbols();
    if labels.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: labels.len() });
    }
    let bits = k.trailing_zeros() as usize;
    let ll = symbol_log_likelihoods(r, weights);
    let mut out = Vec::with_capacity(bits);
    for b in 0..bits {
        let num = logsumexp(
            ll.iter()
                .zip(labels)
                .filter(|(_, lab)| lab[b] == 0)
                .map(|(&v, _)| v),
        );
        let den = logsumexp(
            ll.iter()
                .zip(labels)
                .filter(|(_, lab)| lab[b] == 1)
                .map(|(&v, _)| v),
        );
        out.push((num - den).clamp(-weights.llr_clip, weights.llr_clip));
    }
    Ok(out)
}

/// Linear baseline: MRC combine then nearest-symbol decision.
pub fn detect_mrc(
    y_l: &[Complex64],
    b_r: &ArrayResponse,
    snr: SnrConfig,
    codebook: &Codebook,
) -> usize {
    let norm2: f64 = b_r.elements().iter().map(|e| e.norm_sqr()).sum();
    let scale = 1.0 / (snr.rho().sqrt() * norm2);
    let combined: Complex64 = b_r
        .elements()
        .iter()
        .zip(y_l)
        .map(|(rk, yk)| rk.conj() * yk)
        .sum::<Complex64>()
        * scale;
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, e) in codebook.entries.iter().enumerate() {
        let d = (combined - e.symbol).norm();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{candidate_symbols, closed_form_codebook, linear_psk_codebook};
    use crate::logq::q;
    use crate::model::{simulate_linear, ula_response, GaussianSource};

    fn snr(rho: f64) -> SnrConfig {
        SnrConfig::from_linear(rho).unwrap()
    }

    fn bpsk_codebook_m1() -> Codebook {
        // {+1, -1} with unit magnitude: candidate symbols of b_T = [1] are
        // (±1±j)/√2 rotated; use the closed form K=2 instead.
        let b = ula_response(1, 0.0).unwrap();
        closed_form_codebook(&candidate_symbols(&b), 2).unwrap()
    }

    #[test]
    fn flip_probs_zero_symbol_is_uniform() {
        let b = ula_response(3, 0.4).unwrap();
        let fp = flip_probs(Complex64::new(0.0, 0.0), &b, snr(1.0));
        for &(lp_r, lq_r, lp_i, lq_i) in &fp.parts {
            for v in [lp_r, lq_r, lp_i, lq_i] {
                assert!((v - 0.5f64.ln()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flip_probs_known_value() {
        let b = ula_response(1, 0.0).unwrap();
        let fp = flip_probs(Complex64::new(1.0, 0.0), &b, snr(1.0));
        let (lp_r, _, lp_i, _) = fp.parts[0];
        assert!((lp_r.exp() - q(-std::f64::consts::SQRT_2)).abs() < 1e-12);
        assert!((lp_r.exp() - 0.92135).abs() < 1e-5);
        assert!((lp_i.exp() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flip_probs_negation_swaps_p_and_q() {
        let b = ula_response(4, 0.3).unwrap();
        let s = Complex64::new(0.8, -0.5);
        let fp = flip_probs(s, &b, snr(2.0));
        let fn_ = flip_probs(-s, &b, snr(2.0));
        for (a, b) in fp.parts.iter().zip(&fn_.parts) {
            assert!((a.0 - b.1).abs() < 1e-12);
            assert!((a.1 - b.0).abs() < 1e-12);
            assert!((a.2 - b.3).abs() < 1e-12);
            assert!((a.3 - b.2).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_probs_normalized() {
        let b = ula_response(4, 0.7).unwrap();
        let fp = flip_probs(Complex64::new(1.2, 0.4), &b, snr(0.5));
        for &(lp_r, lq_r, lp_i, lq_i) in &fp.parts {
            assert!((lp_r.exp() + lq_r.exp() - 1.0).abs() < 1e-12);
            assert!((lp_i.exp() + lq_i.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ml_weights_antipodal_symmetry() {
        let cb = bpsk_codebook_m1();
        let b = ula_response(3, 0.2).unwrap();
        let w = ml_weights(&cb, &b, snr(1.0));
        // codebook entries are ±s; weights negate, offsets match
        for k in 0..3 {
            assert!((w.weights[0][k] + w.weights[1][k]).norm() < 1e-12);
        }
        assert!((w.offsets[0] - w.offsets[1]).abs() < 1e-12);
    }

    #[test]
    fn ml_weights_known_value() {
        // s=1, b_R=[1], rho=1: real part of weight is ln(Q(-√2)/Q(√2))
        let cb = linear_psk_codebook(1, 2).unwrap();
        let b = ula_response(1, 0.0).unwrap();
        let w = ml_weights(&cb, &b, snr(1.0));
        let idx = cb
            .entries
            .iter()
            .position(|e| (e.symbol - Complex64::new(1.0, 0.0)).norm() < 1e-9)
            .unwrap();
        let p = q(-std::f64::consts::SQRT_2);
        assert!((w.weights[idx][0].re - (p / (1.0 - p)).ln()).abs() < 1e-10);
        assert!((w.weights[idx][0].re - 2.4612).abs() < 1e-3);
        assert!(w.weights[idx][0].im.abs() < 1e-12);
    }

    #[test]
    fn detect_ml_symmetric_case() {
        let cb = linear_psk_codebook(1, 2).unwrap();
        let b = ula_response(1, 0.0).unwrap();
        let w = ml_weights(&cb, &b, snr(1.0));
        let plus_idx = cb
            .entries
            .iter()
            .position(|e| e.symbol.re > 0.0)
            .unwrap();
        let r = crate::model::sign_quantize(&[Complex64::new(1.0, 1.0)]);
        assert_eq!(detect_ml(&r, &w), plus_idx);
    }

    #[test]
    fn detect_ml_agrees_with_posterior_oracle() {
        // enumerate all outputs at N=3, K=4 and compare with the direct
        // product of per-part probabilities
        let b_t = ula_response(4, 0.2).unwrap();
        let b_r = ula_response(3, 0.15).unwrap();
        let cb = closed_form_codebook(&candidate_symbols(&b_t), 4).unwrap();
        let rho = snr(1.0);
        let w = ml_weights(&cb, &b_r, rho);
        for idx in 0..(1usize << 6) {
            let r = QuantizedRxVector::from_index(idx, 3);
            let oracle = (0..cb.k())
                .map(|si| {
                    let fp = flip_probs(cb.entries[si].symbol, &b_r, rho);
                    let mut ll = 0.0;
                    for (k, bit) in r.bits().iter().enumerate() {
                        let (lp_r, lq_r, lp_i, lq_i) = fp.parts[k];
                        ll += if bit.re_pos { lp_r } else { lq_r };
                        ll += if bit.im_pos { lp_i } else { lq_i };
                    }
                    ll
                })
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
                .unwrap()
                .0;
            assert_eq!(detect_ml(&r, &w), oracle, "output index {idx}");
        }
    }

    #[test]
    fn log_likelihoods_normalize() {
        let b_t = ula_response(3, 0.4).unwrap();
        let b_r = ula_response(4, 0.25).unwrap();
        let cb = closed_form_codebook(&candidate_symbols(&b_t), 4).unwrap();
        let w = ml_weights(&cb, &b_r, snr(1.3));
        for si in 0..cb.k() {
            let mut total = 0.0;
            for idx in 0..(1usize << 8) {
                let r = QuantizedRxVector::from_index(idx, 4);
                total += symbol_log_likelihoods(&r, &w)[si].exp();
            }
            assert!((total - 1.0).abs() < 1e-9, "symbol {si}: total={total}");
        }
    }

    #[test]
    fn log_likelihood_known_value() {
        let cb = linear_psk_codebook(1, 2).unwrap();
        let b = ula_response(1, 0.0).unwrap();
        let w = ml_weights(&cb, &b, snr(1.0));
        let idx = cb.entries.iter().position(|e| e.symbol.re > 0.0).unwrap();
        let r = crate::model::sign_quantize(&[Complex64::new(1.0, 1.0)]);
        let ll = symbol_log_likelihoods(&r, &w)[idx];
        let expect = (q(-std::f64::consts::SQRT_2) * 0.5).ln();
        assert!((ll - expect).abs() < 1e-10);
        assert!((ll + 0.7758).abs() < 1e-3);
    }

    #[test]
    fn bit_llrs_k2_degenerate() {
        let cb = bpsk_codebook_m1();
        let b = ula_response(2, 0.3).unwrap();
        let w = ml_weights(&cb, &b, snr(0.8));
        let labels = cb.labels();
        let r = QuantizedRxVector::from_index(5, 2);
        let llrs = bit_llrs(&r, &w, &labels).unwrap();
        let ll = symbol_log_likelihoods(&r, &w);
        let i0 = labels.iter().position(|l| l[0] == 0).unwrap();
        let i1 = labels.iter().position(|l| l[0] == 1).unwrap();
        assert!((llrs[0] - (ll[i0] - ll[i1])).abs() < 1e-12);
    }

    #[test]
    fn bit_llrs_match_linear_domain_oracle() {
        let b_t = ula_response(5, 0.35).unwrap();
        let b_r = ula_response(2, 0.1).unwrap();
        let cb = closed_form_codebook(&candidate_symbols(&b_t), 4).unwrap();
        let rho = snr(1.0);
        let w = ml_weights(&cb, &b_r, rho);
        let labels = cb.labels();
        for idx in 0..(1usize << 4) {
            let r = QuantizedRxVector::from_index(idx, 2);
            let llrs = bit_llrs(&r, &w, &labels).unwrap();
            // linear-domain computation from explicit probabilities
            let probs: Vec<f64> = (0..cb.k())
                .map(|si| {
                    let fp = flip_probs(cb.entries[si].symbol, &b_r, rho);
                    let mut p = 1.0;
                    for (k, bit) in r.bits().iter().enumerate() {
                        let (lp_r, lq_r, lp_i, lq_i) = fp.parts[k];
                        p *= if bit.re_pos { lp_r.exp() } else { lq_r.exp() };
                        p *= if bit.im_pos { lp_i.exp() } else { lq_i.exp() };
                    }
                    p
                })
                .collect();
            for b in 0..2 {
                let num: f64 = probs
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| l[b] == 0)
                    .map(|(p, _)| p)
                    .sum();
                let den: f64 = probs
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| l[b] == 1)
                    .map(|(p, _)| p)
                    .sum();
                assert!((llrs[b] - (num / den).ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bit_llrs_negate_under_output_negation() {
        // antipodal K=2 codebook: negating r negates the LLR
        let cb = bpsk_codebook_m1();
        let b = ula_response(3, 0.2).unwrap();
        let w = ml_weights(&cb, &b, snr(0.5));
        let labels = cb.labels();
        for idx in 0..(1usize << 6) {
            let r = QuantizedRxVector::from_index(idx, 3);
            let rn = QuantizedRxVector::from_index(!idx & 0x3f, 3);
            let a = bit_llrs(&r, &w, &labels).unwrap();
            let b2 = bit_llrs(&rn, &w, &labels).unwrap();
            assert!((a[0] + b2[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn ml_antipodal_reduces_to_sign_rule() {
        let cb = bpsk_codebook_m1();
        let b = ula_response(4, 0.6).unwrap();
        let w = ml_weights(&cb, &b, snr(1.0));
        for idx in 0..(1usize << 8) {
            let r = QuantizedRxVector::from_index(idx, 4);
            let s0 = {
                let mut acc = 0.0;
                for (wk, bk) in w.weights[0].iter().zip(r.bits()) {
                    acc += if bk.re_pos { wk.re } else { -wk.re };
                    acc += if bk.im_pos { wk.im } else { -wk.im };
                }
                acc
            };
            let expect = if s0 >= 0.0 { 0 } else { 1 };
            assert_eq!(detect_ml(&r, &w), expect);
        }
    }

    #[test]
    fn mrc_noiseless_recovers_symbol() {
        let b_r = ula_response(4, 0.3).unwrap();
        let rho = snr(2.0);
        let cb = linear_psk_codebook(4, 4).unwrap();
        for (i, e) in cb.entries.iter().enumerate() {
            let y: Vec<Complex64> = b_r
                .elements()
                .iter()
                .map(|&rk| rho.rho().sqrt() * rk * e.symbol)
                .collect();
            assert_eq!(detect_mrc(&y, &b_r, rho, &cb), i);
        }
    }

    #[test]
    fn mrc_nearest_neighbor() {
        let b_r = ula_response(1, 0.0).unwrap();
        let cb = linear_psk_codebook(1, 2).unwrap();
        let y = vec![Complex64::new(-0.1, 0.0)];
        let idx = detect_mrc(&y, &b_r, snr(1.0), &cb);
        assert!(cb.entries[idx].symbol.re < 0.0);
    }

    #[test]
    fn mrc_bpsk_ber_matches_closed_form() {
        // M=N=1, K=2 PSK at rho=1: BER = Q(sqrt(2))
        let b_r = ula_response(1, 0.0).unwrap();
        let rho = snr(1.0);
        let cb = linear_psk_codebook(1, 2).unwrap();
        let mut noise = GaussianSource::from_seed(3);
        let trials = 1_000_000;
        let mut errors = 0u64;
        for t in 0..trials {
            let tx = (t % 2) as usize;
            let y = simulate_linear(cb.entries[tx].symbol, &b_r, rho, &mut noise);
            if detect_mrc(&y, &b_r, rho, &cb) != tx {
                errors += 1;
            }
        }
        let ber = errors as f64 / trials as f64;
        let p = q(std::f64::consts::SQRT_2);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((ber - p).abs() < 3.0 * sigma, "ber={ber}, p={p}");
    }
}
