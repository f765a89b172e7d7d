//! Rate-1/2 convolutional code (constraint length 7, generators 133/171
//! octal, zero-tail terminated) with rate adaptation patterns.
//!
//! Rates above 1/2 puncture generator outputs; rate 1/3 repeats the
//! first generator output. Patterns are cyclic over info-bit steps, each
//! entry giving the emit multiplicity of (g1, g2) at that step:
//!
//! - 1/3: [(2, 1)]
//! - 1/2: [(1, 1)]
//! - 2/3: [(1, 1), (1, 0)]
//! - 3/4: [(1, 1), (0, 1), (1, 0)]
//!
//! The decoder is a soft-input Viterbi over the mother trellis; punctured
//! positions contribute zero metric, repeated positions sum their LLRs.
//! LLR convention: positive favors bit 1.

use super::LlsError;

pub const CONSTRAINT_LENGTH: usize = 7;
pub const TAIL_BITS: usize = CONSTRAINT_LENGTH - 1;
const N_STATES: usize = 1 << TAIL_BITS;
const G1: u32 = 0o133;
const G2: u32 = 0o171;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeRate {
    R13,
    R12,
    R23,
    R34,
}

impl CodeRate {
    pub fn ratio(&self) -> (u32, u32) {
        match self {
            CodeRate::R13 => (1, 3),
            CodeRate::R12 => (1, 2),
            CodeRate::R23 => (2, 3),
            CodeRate::R34 => (3, 4),
        }
    }

    pub fn as_f64(&self) -> f64 {
        let (n, d) = self.ratio();
        n as f64 / d as f64
    }

    fn pattern(&self) -> &'static [[u8; 2]] {
        match self {
            CodeRate::R13 => &[[2, 1]],
            CodeRate::R12 => &[[1, 1]],
            CodeRate::R23 => &[[1, 1], [1, 0]],
            CodeRate::R34 => &[[1, 1], [0, 1], [1, 0]],
        }
    }

    pub fn descriptor(&self) -> String {
        let (n, d) = self.ratio();
        format!("conv-k7-g133-g171-zerotail-r{n}/{d}")
    }
}

fn parity(word: u32) -> u8 {
    (word.count_ones() & 1) as u8
}

/// Coded length of a zero-tail-terminated block of `info_len` bits.
pub fn coded_len(rate: CodeRate, info_len: usize) -> usize {
    let pattern = rate.pattern();
    (0..info_len + TAIL_BITS)
        .map(|t| {
            let [m1, m2] = pattern[t % pattern.len()];
            (m1 + m2) as usize
        })
        .sum()
}

/// Encodes an info block, appending the zero tail.
pub fn encode(rate: CodeRate, info: &[u8]) -> Vec<u8> {
    let pattern = rate.pattern();
    let mut out = Vec::with_capacity(coded_len(rate, info.len()));
    let mut state = 0u32;
    for t in 0..info.len() + TAIL_BITS {
        let bit = if t < info.len() { info[t] as u32 } else { 0 };
        let reg = (bit << TAIL_BITS) | state;
        let o1 = parity(reg & G1);
        let o2 = parity(reg & G2);
        let [m1, m2] = pattern[t % pattern.len()];
        out.extend(std::iter::repeat_n(o1, m1 as usize));
        out.extend(std::iter::repeat_n(o2, m2 as usize));
        state = reg >> 1;
    }
    out
}

/// Soft Viterbi decode of one block. `llrs` must have exactly
/// `coded_len(rate, info_len)` entries (positive favors bit 1); returns
/// the `info_len` decoded bits.
pub fn decode(rate: CodeRate, llrs: &[f64], info_len: usize) -> Result<Vec<u8>, LlsError> {
    let expected = coded_len(rate, info_len);
    if llrs.len() != expected {
        return Err(LlsError::LengthMismatch {
            expected,
            found: llrs.len(),
        });
    }
    let pattern = rate.pattern();
    let n_steps = info_len + TAIL_BITS;

    // depuncture into per-step generator LLRs (repeats accumulate)
    let mut step_llrs = vec![[0.0f64; 2]; n_steps];
    let mut pos = 0;
    for (t, step) in step_llrs.iter_mut().enumerate() {
        let [m1, m2] = pattern[t % pattern.len()];
        for _ in 0..m1 {
            step[0] += llrs[pos];
            pos += 1;
        }
        for _ in 0..m2 {
            step[1] += llrs[pos];
            pos += 1;
        }
    }

    const NEG: f64 = -1e300;
    let mut metric = vec![NEG; N_STATES];
    metric[0] = 0.0;
    let mut backptr = vec![[0u8; N_STATES]; n_steps];
    let mut next = vec![NEG; N_STATES];
    for (t, step) in step_llrs.iter().enumerate() {
        next.iter_mut().for_each(|m| *m = NEG);
        let mut choice = [0u8; N_STATES];
        let mut from = [0u8; N_STATES];
        for (state, &state_metric) in metric.iter().enumerate() {
            if state_metric <= NEG {
                continue;
            }
            for bit in 0..2u32 {
                let reg = (bit << TAIL_BITS) | state as u32;
                let o1 = parity(reg & G1) as f64;
                let o2 = parity(reg & G2) as f64;
                let m = state_metric + o1 * step[0] + o2 * step[1];
                let to = (reg >> 1) as usize;
                if m > next[to] {
                    next[to] = m;
                    choice[to] = bit as u8;
                    from[to] = state as u8;
                }
            }
        }
        // pack (input bit, previous state) per destination
        for to in 0..N_STATES {
            backptr[t][to] = (choice[to] << 7) | from[to];
        }
        std::mem::swap(&mut metric, &mut next);
    }

    // zero-tail: trace back from state 0
    let mut state = 0usize;
    let mut bits = vec![0u8; n_steps];
    for t in (0..n_steps).rev() {
        let packed = backptr[t][state];
        bits[t] = packed >> 7;
        state = (packed & 0x7F) as usize;
    }
    bits.truncate(info_len);
    Ok(bits)
}
