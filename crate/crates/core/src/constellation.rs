//! Gray-labeled square QAM constellations (QPSK, 16QAM, 64QAM).
//!
//! Labels use the standard per-axis reflected Gray code: for order
//! `M = 2^(2h)` the first `h` label bits (MSB side) select the in-phase
//! level and the last `h` bits the quadrature level. Points are
//! normalized to unit average power with the exact divisors sqrt(2),
//! sqrt(10) and sqrt(42).

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstellationError {
    #[error("unsupported constellation order {0} (supported: 4, 16, 64)")]
    UnsupportedOrder(u32),
}

#[derive(Debug, Clone)]
pub struct Constellation {
    order: u32,
    bits: u32,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    point_of_label: Vec<usize>,
}

fn gray(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// Builds the Gray-labeled square QAM constellation of the given order.
pub fn make_constellation(order: u32) -> Result<Constellation, ConstellationError> {
    let norm = match order {
        4 => 2f64.sqrt(),
        16 => 10f64.sqrt(),
        64 => 42f64.sqrt(),
        other => return Err(ConstellationError::UnsupportedOrder(other)),
    };
    let bits = order.trailing_zeros();
    let half = bits / 2;
    let nlev = 1u32 << half;
    let mut points = Vec::with_capacity(order as usize);
    let mut labels = Vec::with_capacity(order as usize);
    for ii in 0..nlev {
        for qq in 0..nlev {
            let level = |idx: u32| (2 * idx) as f64 - (nlev - 1) as f64;
            points.push(Complex64::new(level(ii), level(qq)) / norm);
            labels.push((gray(ii) << half) | gray(qq));
        }
    }
    let mut point_of_label = vec![0usize; order as usize];
    for (idx, &label) in labels.iter().enumerate() {
        point_of_label[label as usize] = idx;
    }
    Ok(Constellation {
        order,
        bits,
        points,
        labels,
        point_of_label,
    })
}

impl Constellation {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_of(&self, point_idx: usize) -> u32 {
        self.labels[point_idx]
    }

    /// Point index carrying the given label.
    pub fn point_with_label(&self, label: u32) -> usize {
        self.point_of_label[label as usize]
    }

    /// Bit `m` of a label, with `m = 0` the most significant label bit.
    pub fn bit_of_label(&self, label: u32, m: u32) -> u8 {
        ((label >> (self.bits - 1 - m)) & 1) as u8
    }

    /// Maps `bits_per_symbol` bits (MSB first) to a constellation point.
    pub fn map_bits(&self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits as usize);
        let mut label = 0u32;
        for &b in bits {
            label = (label << 1) | b as u32;
        }
        self.points[self.point_with_label(label)]
    }
}
