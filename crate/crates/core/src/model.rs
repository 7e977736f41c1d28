//! System model: ULA array responses, the one-bit LOS channel and its linear
//! counterpart, and sign quantization.
//!
//! Channel convention: noise is circularly symmetric complex Gaussian with
//! total variance 1 (0.5 per real dimension), so the per-part flip
//! probabilities come out as Q(-sqrt(2 rho) * ...) exactly.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Unit-magnitude array response vector (b_T or b_R).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponse {
    elements: Vec<Complex64>,
    /// Steering angle in radians, when constructed as a ULA response.
    pub angle: Option<f64>,
}

impl ArrayResponse {
    pub fn new(elements: Vec<Complex64>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidDimension("array response must be non-empty".into()));
        }
        for (k, e) in elements.iter().enumerate() {
            if !e.re.is_finite() || !e.im.is_finite() || (e.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "array response element {k} must have unit magnitude, got {e}"
                )));
            }
        }
        Ok(Self { elements, angle: None })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Complex64] {
        &self.elements
    }
}

/// Half-wavelength ULA steering vector: element k is exp(j k pi sin theta).
pub fn ula_response(n: usize, theta: f64) -> Result<ArrayResponse> {
    if n == 0 {
        return Err(Error::InvalidDimension("ULA needs at least one element".into()));
    }
    let s = theta.sin();
    let elements = (0..n)
        .map(|k| Complex64::from_polar(1.0, k as f64 * std::f64::consts::PI * s))
        .collect();
    let mut r = ArrayResponse::new(elements)?;
    r.angle = Some(theta);
    Ok(r)
}

/// Two sign bits, one complex sample. `re_pos`/`im_pos` are true for +.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignPair {
    pub re_pos: bool,
    pub im_pos: bool,
}

impl SignPair {
    pub fn from_complex(c: Complex64) -> Self {
        // sign(0) = +1 by convention
        Self {
            re_pos: c.re >= 0.0,
            im_pos: c.im >= 0.0,
        }
    }

    fn signs(self) -> (f64, f64) {
        (
            if self.re_pos { 1.0 } else { -1.0 },
            if self.im_pos { 1.0 } else { -1.0 },
        )
    }

    pub fn negate(self) -> Self {
        Self { re_pos: !self.re_pos, im_pos: !self.im_pos }
    }

    /// Multiply by j: (a + jb) j = -b + ja.
    pub fn rotate_j(self) -> Self {
        Self { re_pos: !self.im_pos, im_pos: self.re_pos }
    }
}

/// Per-antenna QPSK transmit vector, elements in {±1/√2 ± j/√2}^M.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuantizedTxVector {
    bits: Vec<SignPair>,
}

impl QuantizedTxVector {
    pub fn from_bits(bits: Vec<SignPair>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[SignPair] {
        &self.bits
    }

    pub fn elements(&self) -> Vec<Complex64> {
        self.bits
            .iter()
            .map(|b| {
                let (r, i) = b.signs();
                Complex64::new(r * FRAC_1_SQRT_2, i * FRAC_1_SQRT_2)
            })
            .collect()
    }

    pub fn negate(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| b.negate()).collect() }
    }

    pub fn rotate_j(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| b.rotate_j()).collect() }
    }

    /// 2M sign bits as hex, MSB-first: element 0 real, element 0 imag, ...
    /// Bit value 1 means +.
    pub fn to_hex(&self) -> String {
        let mut bits: Vec<bool> = Vec::with_capacity(2 * self.bits.len());
        for b in &self.bits {
            bits.push(b.re_pos);
            bits.push(b.im_pos);
        }
        while bits.len() % 4 != 0 {
            bits.push(false);
        }
        bits.chunks(4)
            .map(|c| {
                let v = c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8);
                char::from_digit(v as u32, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(hex: &str, m: usize) -> Result<Self> {
        let mut bits = Vec::with_capacity(4 * hex.len());
        for ch in hex.chars() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::InvalidParameter(format!("bad hex digit '{ch}'")))?;
            for shift in (0..4).rev() {
                bits.push((v >> shift) & 1 == 1);
            }
        }
        if bits.len() < 2 * m {
            return Err(Error::InvalidParameter(format!(
                "hex string too short for M={m}"
            )));
        }
        let pairs = (0..m)
            .map(|k| SignPair { re_pos: bits[2 * k], im_pos: bits[2 * k + 1] })
            .collect();
        Ok(Self { bits: pairs })
    }
}

/// Quantized receive vector, elements in {±1 ± j}^N.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedRxVector {
    bits: Vec<SignPair>,
}

impl QuantizedRxVector {
    pub fn from_bits(bits: Vec<SignPair>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[SignPair] {
        &self.bits
    }

    pub fn elements(&self) -> Vec<Complex64> {
        self.bits
            .iter()
            .map(|b| {
                let (r, i) = b.signs();
                Complex64::new(r, i)
            })
            .collect()
    }

    /// Index in [0, 4^N): part t (2k real, 2k+1 imag) contributes bit t,
    /// set when the part is +1.
    pub fn to_index(&self) -> usize {
        let mut idx = 0usize;
        for (k, b) in self.bits.iter().enumerate() {
            if b.re_pos {
                idx |= 1 << (2 * k);
            }
            if b.im_pos {
                idx |= 1 << (2 * k + 1);
            }
        }
        idx
    }

    pub fn from_index(idx: usize, n: usize) -> Self {
        let bits = (0..n)
            .map(|k| SignPair {
                re_pos: idx >> (2 * k) & 1 == 1,
                im_pos: idx >> (2 * k + 1) & 1 == 1,
            })
            .collect();
        Self { bits }
    }
}

/// Per-receive-antenna SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrConfig {
    rho: f64,
}

impl SnrConfig {
    pub fn from_linear(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(db / 10.0))
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn db(&self) -> f64 {
        10.0 * self.rho.log10()
    }
}

/// Seedable complex Gaussian noise source. Substreams derived from
/// (seed, stream) are independent, so parallel callers stay reproducible.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn from_seed(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// CN(0, 1): variance 0.5 per real dimension.
    pub fn complex_normal(&mut self) -> Complex64 {
        Complex64::new(
            FRAC_1_SQRT_2 * self.standard_normal(),
            FRAC_1_SQRT_2 * self.standard_normal(),
        )
    }

    pub fn next_u64(&mut self) -> u64 {
        rand::RngCore::next_u64(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Component-wise sign of real and imaginary parts; sign(0) = +1.
pub fn sign_quantize(v: &[Complex64]) -> QuantizedRxVector {
    QuantizedRxVector::from_bits(v.iter().map(|&c| SignPair::from_complex(c)).collect())
}

/// Same sign rule, packaged as a transmit vector (elements ±1/√2 ± j/√2).
pub fn sign_quantize_tx(v: &[Complex64]) -> QuantizedTxVector {
    QuantizedTxVector::from_bits(v.iter().map(|&c| SignPair::from_complex(c)).collect())
}

/// One-bit SIMO channel: r = sign(sqrt(rho) b_R s + n).
pub fn simulate_onebit(
    s: Complex64,
    b_r: &ArrayResponse,
    snr: SnrConfig,
    noise: &mut GaussianSource,
) -> QuantizedRxVector {
    let a = snr.rho().sqrt();
    let bits = b_r
        .elements()
        .iter()
        .map(|&rk| SignPair::from_complex(a * rk * s + noise.complex_normal()))
        .collect();
    QuantizedRxVector::from_bits(bits)
}

/// Linear SIMO channel: y_L = sqrt(rho) b_R s_L + n, unquantized.
pub fn simulate_linear(
    s_l: Complex64,
    b_r: &ArrayResponse,
    snr: SnrConfig,
    noise: &mut GaussianSource,
) -> Vec<Complex64> {
    let a = snr.rho().sqrt();
    b_r.elements()
        .iter()
        .map(|&rk| a * rk * s_l + noise.complex_normal())
        .collect()
}
