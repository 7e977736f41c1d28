//! LDPC outer code: sparse parity-check matrices in alist format, a
//! systematic encoder derived by GF(2) elimination, a log-domain
//! sum-product decoder, and a seeded (3,6)-regular code generator.
//!
//! Alist layout (whitespace separated):
//!   line 1: n m
//!   line 2: max column weight, max row weight
//!   line 3: n column weights
//!   line 4: m row weights
//!   next n lines: 1-based row indices per column (0 entries are padding)
//!   next m lines: 1-based column indices per row (0 entries are padding)

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Dense GF(2) matrix with u64-packed rows, used only during encoder setup.
#[derive(Debug, Clone)]
struct BitMatrix {
    rows: Vec<Vec<u64>>,
}

impl BitMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(WORD_BITS);
        Self { rows: vec![vec![0u64; words]; rows] }
    }

    fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r][c / WORD_BITS] >> (c % WORD_BITS) & 1 == 1
    }

    fn xor_rows(&mut self, target: usize, source: usize) {
        let (a, b) = if target < source {
            let (lo, hi) = self.rows.split_at_mut(source);
            (&mut lo[target], &hi[0])
        } else {
            let (lo, hi) = self.rows.split_at_mut(target);
            (&mut hi[0], &lo[source])
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= *y;
        }
    }
}

/// Systematic encoder data: parity bits are a dense GF(2) map of the
/// message bits, scattered back into codeword positions.
#[derive(Debug, Clone)]
pub struct Encoder {
    /// codeword positions carrying message bits, in message order
    pub info_cols: Vec<usize>,
    /// codeword positions carrying parity bits (the pivot columns)
    pub pivot_cols: Vec<usize>,
    /// row r: packed coefficients over message bits for parity bit r
    parity_map: Vec<Vec<u64>>,
}

/// A parity-check code with its precomputed systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub n: usize,
    /// message length, after rank correction
    pub k: usize,
    /// parity rows as stored (possibly redundant)
    pub row_cols: Vec<Vec<usize>>,
    pub col_rows: Vec<Vec<usize>>,
    pub encoder: Encoder,
}

impl LdpcCode {
    pub fn num_checks(&self) -> usize {
        self.row_cols.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn from_row_cols(row_cols: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let m = row_cols.len();
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("empty parity-check matrix".into()));
        }
        for (r, cols) in row_cols.iter().enumerate() {
            for &c in cols {
                if c >= n {
                    return Err(Error::InvalidParameter(format!(
                        "row {r} references column {c} >= n={n}"
                    )));
                }
            }
        }
        let mut col_rows = vec![Vec::new(); n];
        for (r, cols) in row_cols.iter().enumerate() {
            for &c in cols {
                col_rows[c].push(r);
            }
        }
        let encoder = build_encoder(&row_cols, n)?;
        let k = encoder.info_cols.len();
        Ok(Self { n, k, row_cols, col_rows, encoder })
    }

    /// Parse from alist text.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next_line = |what: &str| -> Result<(usize, Vec<i64>)> {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing {what}") })?;
            let vals = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected integer, got '{tok}'"),
                    })
                })
                .collect::<Result<Vec<i64>>>()?;
            Ok((lineno + 1, vals))
        };

        let (lineno, header) = next_line("size header")?;
        if header.len() != 2 || header[0] <= 0 || header[1] <= 0 {
            return Err(Error::Parse { line: lineno, msg: "expected 'n m'".into() });
        }
        let (n, m) = (header[0] as usize, header[1] as usize);
        let (_, _max_weights) = next_line("max weight line")?;
        let (lineno_cw, col_weights) = next_line("column weights")?;
        if col_weights.len() != n {
            return Err(Error::Parse {
                line: lineno_cw,
                msg: format!("expected {n} column weights, got {}", col_weights.len()),
            });
        }
        let (lineno_rw, row_weights) = next_line("row weights")?;
        if row_weights.len() != m {
            return Err(Error::Parse {
                line: lineno_rw,
                msg: format!("expected {m} row weights, got {}", row_weights.len()),
            });
        }

        let mut row_cols = vec![Vec::new(); m];
        for c in 0..n {
            let (lineno, entries) = next_line("column adjacency")?;
            let nonzero: Vec<i64> = entries.into_iter().filter(|&v| v != 0).collect();
            if nonzero.len() != col_weights[c] as usize {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!(
                        "column {} has {} entries, header says {}",
                        c + 1,
                        nonzero.len(),
                        col_weights[c]
                    ),
                });
            }
            for v in nonzero {
                if v < 1 || v > m as i64 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("row index {v} out of range 1..={m}"),
                    });
                }
                row_cols[v as usize - 1].push(c);
            }
        }
        // row adjacency lines cross-check the column lists when present
        for r in 0..m {
            match next_line("row adjacency") {
                Ok((lineno, entries)) => {
                    let mut nonzero: Vec<usize> = entries
                        .into_iter()
                        .filter(|&v| v != 0)
                        .map(|v| v as usize - 1)
                        .collect();
                    nonzero.sort_unstable();
                    let mut expect = row_cols[r].clone();
                    expect.sort_unstable();
                    if nonzero != expect {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("row {} adjacency disagrees with column lists", r + 1),
                        });
                    }
                }
                Err(_) => break, // row section is optional
            }
        }
        Self::from_row_cols(row_cols, n)
    }

    pub fn to_alist(&self) -> String {
        let n = self.n;
        let m = self.num_checks();
        let max_cw = self.col_rows.iter().map(Vec::len).max().unwrap_or(0);
        let max_rw = self.row_cols.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        out.push_str(&format!("{n} {m}\n{max_cw} {max_rw}\n"));
        out.push_str(
            &self
                .col_rows
                .iter()
                .map(|c| c.len().to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        out.push('\n');
        out.push_str(
            &self
                .row_cols
                .iter()
                .map(|r| r.len().to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        out.push('\n');
        for c in &self.col_rows {
            let mut entries: Vec<String> = c.iter().map(|&r| (r + 1).to_string()).collect();
            entries.resize(max_cw, "0".into());
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        for r in &self.row_cols {
            let mut entries: Vec<String> = r.iter().map(|&c| (c + 1).to_string()).collect();
            entries.resize(max_rw, "0".into());
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        out
    }

    /// Systematic encode: H c = 0, message bits recoverable at `info_cols`.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: message.len() });
        }
        let words = self.k.div_ceil(WORD_BITS);
        let mut msg_packed = vec![0u64; words];
        for (i, &b) in message.iter().enumerate() {
            if b != 0 {
                msg_packed[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        let mut codeword = vec![0u8; self.n];
        for (i, &c) in self.encoder.info_cols.iter().enumerate() {
            codeword[c] = message[i];
        }
        for (r, coeffs) in self.encoder.parity_map.iter().enumerate() {
            let mut acc = 0u64;
            for (a, b) in coeffs.iter().zip(&msg_packed) {
                acc ^= a & b;
            }
            codeword[self.encoder.pivot_cols[r]] = (acc.count_ones() & 1) as u8;
        }
        Ok(codeword)
    }

    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder.info_cols.iter().map(|&c| codeword[c]).collect()
    }

    pub fn parity_ok(&self, codeword: &[u8]) -> bool {
        self.row_cols.iter().all(|cols| {
            cols.iter().fold(0u8, |acc, &c| acc ^ codeword[c]) == 0
        })
    }

    /// Log-domain sum-product decoding. LLR sign convention: positive means
    /// bit 0. Returns hard decisions, parity-converged flag, and iterations.
    pub fn decode(&self, llrs: &[f64], max_iter: usize) -> Result<(Vec<u8>, bool, usize)> {
        if llrs.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: llrs.len() });
        }
        // edge storage: per check row, messages to/from its variables
        let mut check_to_var: Vec<Vec<f64>> =
            self.row_cols.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut hard = vec![0u8; self.n];
        let mut var_sum: Vec<f64> = llrs.to_vec();

        for iter in 1..=max_iter {
            // check-node update with leave-one-out forward/backward boxplus
            for (r, cols) in self.row_cols.iter().enumerate() {
                let deg = cols.len();
                if deg == 0 {
                    continue;
                }
                let incoming: Vec<f64> = cols
                    .iter()
                    .zip(&check_to_var[r])
                    .map(|(&c, &prev)| var_sum[c] - prev)
                    .collect();
                if deg == 1 {
                    check_to_var[r][0] = 0.0;
                    continue;
                }
                let mut fwd = vec![0.0; deg];
                let mut bwd = vec![0.0; deg];
                fwd[0] = incoming[0];
                for i in 1..deg {
                    fwd[i] = boxplus(fwd[i - 1], incoming[i]);
                }
                bwd[deg - 1] = incoming[deg - 1];
                for i in (0..deg - 1).rev() {
                    bwd[i] = boxplus(bwd[i + 1], incoming[i]);
                }
                for i in 0..deg {
                    check_to_var[r][i] = if i == 0 {
                        bwd[1]
                    } else if i == deg - 1 {
                        fwd[deg - 2]
                    } else {
                        boxplus(fwd[i - 1], bwd[i + 1])
                    };
                }
            }
            // variable-node totals
            var_sum.copy_from_slice(llrs);
            for (r, cols) in self.row_cols.iter().enumerate() {
                for (i, &c) in cols.iter().enumerate() {
                    var_sum[c] += check_to_var[r][i];
                }
            }
            for (c, &v) in var_sum.iter().enumerate() {
                hard[c] = (v < 0.0) as u8;
            }
            if self.parity_ok(&hard) {
                return Ok((hard, true, iter));
            }
        }
        Ok((hard, false, max_iter))
    }
}

// sign(a) sign(b) min(|a|,|b|) + log-correction terms; safe for large inputs
fn boxplus(a: f64, b: f64) -> f64 {
    let sgn = if (a < 0.0) ^ (b < 0.0) { -1.0 } else { 1.0 };
    let mag = a.abs().min(b.abs());
    let corr = (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p();
    sgn * mag + corr
}

fn build_encoder(row_cols: &[Vec<usize>], n: usize) -> Result<Encoder> {
    let m = row_cols.len();
    let mut h = BitMatrix::zeros(m, n);
    for (r, cols) in row_cols.iter().enumerate() {
        for &c in cols {
            // repeated entries cancel over GF(2); treat the sparse list as a sum
            h.rows[r][c / WORD_BITS] ^= 1 << (c % WORD_BITS);
        }
    }
    // Gauss-Jordan to reduced row echelon form, tracking pivot columns
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        if row >= m {
            break;
        }
        let pivot = (row..m).find(|&r| h.get(r, col));
        let Some(p) = pivot else { continue };
        h.rows.swap(row, p);
        for r in 0..m {
            if r != row && h.get(r, col) {
                h.xor_rows(r, row);
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let rank = pivot_cols.len();
    // rows beyond the rank reduced to zero; they are redundant checks
    let info_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let k = info_cols.len();
    let words = k.div_ceil(WORD_BITS);
    let mut parity_map = vec![vec![0u64; words]; rank];
    for (r, map) in parity_map.iter_mut().enumerate() {
        for (i, &c) in info_cols.iter().enumerate() {
            if h.get(r, c) {
                map[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
    }
    Ok(Encoder { info_cols, pivot_cols, parity_map })
}

/// Seeded (wc, wr)-regular Gallager-style construction via socket
/// permutation, with duplicate-edge repair. Deterministic for a fixed seed.
pub fn generate_regular(n: usize, wc: usize, wr: usize, seed: u64) -> Result<LdpcCode> {
    if n == 0 || wc == 0 || wr == 0 || (n * wc) % wr != 0 {
        return Err(Error::InvalidParameter(format!(
            "invalid regular code geometry n={n} wc={wc} wr={wr}"
        )));
    }
    let m = n * wc / wr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sockets = n * wc;
    let mut perm: Vec<usize> = (0..sockets).collect();
    // socket i of the column side pairs with row socket perm[i]
    for i in (1..sockets).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::with_capacity(wr); m];
    let col_of_socket = |s: usize| s / wc;
    let row_of_socket = |s: usize| s / wr;
    for (cs, &rs) in perm.iter().enumerate() {
        row_cols[row_of_socket(rs)].push(col_of_socket(cs));
    }
    // repair duplicate edges by swapping with random entries elsewhere
    for _ in 0..10_000 {
        let mut dup: Option<(usize, usize)> = None;
        'outer: for (r, cols) in row_cols.iter().enumerate() {
            for i in 0..cols.len() {
                if cols[i + 1..].contains(&cols[i]) {
                    dup = Some((r, i));
                    break 'outer;
                }
            }
        }
        let Some((r, i)) = dup else { break };
        let r2 = rng.random_range(0..m);
        let i2 = rng.random_range(0..row_cols[r2].len());
        let (a, b) = (row_cols[r][i], row_cols[r2][i2]);
        if r2 != r && !row_cols[r].contains(&b) && !row_cols[r2].contains(&a) {
            row_cols[r][i] = b;
            row_cols[r2][i2] = a;
        }
    }
    for cols in &mut row_cols {
        cols.sort_unstable();
    }
    LdpcCode::from_row_cols(row_cols, n)
}
