//! Max-log joint-ML soft demodulator.
//!
//! For every coded bit of the serving layers the LLR is
//! `(min_{b=0} d^2 - min_{b=1} d^2) / noise_var`, minimizing the received
//! distance over the full joint candidate set of serving and interfering
//! symbol vectors. Positive LLR favors bit 1.

use num_complex::Complex64;

use super::LlsError;
use crate::constellation::Constellation;
use crate::numerics::{CMatrix, CVector};
use crate::oracle::MAX_CANDIDATES;

/// Per-layer symbol-index tuples of the candidate set.
fn enumerate_candidates(cons: &Constellation, layers: usize) -> Vec<Vec<usize>> {
    let order = cons.order() as usize;
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..layers {
        let mut next = Vec::with_capacity(out.len() * order);
        for prefix in &out {
            for idx in 0..order {
                let mut v = prefix.clone();
                v.push(idx);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn received_mean(h: &CMatrix, cons: &Constellation, candidate: &[usize]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h.rows()];
    for (layer, &pt) in candidate.iter().enumerate() {
        let s = cons.points()[pt];
        for (row, o) in out.iter_mut().enumerate() {
            *o += h.get(row, layer) * s;
        }
    }
    out
}

/// Max-log LLRs for all bits of all serving layers at one subcarrier,
/// layer-major with the label MSB first within each symbol.
///
/// `interferer` carries the interfering channel and constellation; `None`
/// is the interference-free (AWGN-style) case.
pub fn maxlog_joint_llr(
    r: &CVector,
    h1: &CMatrix,
    cons1: &Constellation,
    interferer: Option<(&CMatrix, &Constellation)>,
    noise_var: f64,
) -> Result<Vec<f64>, LlsError> {
    assert!(noise_var > 0.0, "noise_var must be positive");
    assert_eq!(r.len(), h1.rows(), "received vector dimension mismatch");
    let v1 = h1.cols();
    let bits = cons1.bits_per_symbol() as usize;
    let cand1 = enumerate_candidates(cons1, v1);
    let mean2: Vec<Vec<Complex64>> = match interferer {
        Some((h2, cons2)) => {
            assert_eq!(r.len(), h2.rows(), "interferer dimension mismatch");
            enumerate_candidates(cons2, h2.cols())
                .iter()
                .map(|c| received_mean(h2, cons2, c))
                .collect()
        }
        None => vec![vec![Complex64::new(0.0, 0.0); r.len()]],
    };
    let total = cand1.len() * mean2.len();
    if total > MAX_CANDIDATES {
        return Err(LlsError::CandidateSetTooLarge(total));
    }

    // min distance^2 per (serving layer, bit position, bit value)
    let mut min_d = vec![[f64::INFINITY; 2]; v1 * bits];
    for cand in &cand1 {
        let m1 = received_mean(h1, cons1, cand);
        for m2 in &mean2 {
            let mut d2 = 0.0;
            for i in 0..r.len() {
                d2 += (r.get(i) - m1[i] - m2[i]).norm_sqr();
            }
            for (layer, &pt) in cand.iter().enumerate() {
                let label = cons1.label_of(pt);
                for m in 0..bits {
                    let b = cons1.bit_of_label(label, m as u32) as usize;
                    let slot = &mut min_d[layer * bits + m][b];
                    if d2 < *slot {
                        *slot = d2;
                    }
                }
            }
        }
    }

    Ok(min_d
        .iter()
        .map(|d| (d[0] - d[1]) / noise_var)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::make_constellation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_complex(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn noiseless_signs_recover_bits() {
        let qpsk = make_constellation(4).unwrap();
        let h1 = CMatrix::new(1, 1, vec![Complex64::new(1.0, 0.0)]);
        for label in 0..4u32 {
            let point = qpsk.points()[qpsk.point_with_label(label)];
            let r = CVector::new(vec![point]);
            let llrs = maxlog_joint_llr(&r, &h1, &qpsk, None, 0.1).unwrap();
            assert_eq!(llrs.len(), 2);
            for (m, &llr) in llrs.iter().enumerate() {
                let bit = qpsk.bit_of_label(label, m as u32);
                assert!(
                    (llr > 0.0) == (bit == 1),
                    "label {label} bit {m}: llr {llr}"
                );
            }
        }
    }

    #[test]
    fn common_phase_rotation_leaves_llrs_unchanged() {
        let qpsk = make_constellation(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let h1 = CMatrix::from_fn(2, 1, |_, _| rand_complex(&mut rng));
            let h2 = CMatrix::from_fn(2, 1, |_, _| rand_complex(&mut rng));
            let r = CVector::new(vec![rand_complex(&mut rng), rand_complex(&mut rng)]);
            let base = maxlog_joint_llr(&r, &h1, &qpsk, Some((&h2, &qpsk)), 0.4).unwrap();
            let phase = Complex64::from_polar(1.0, 1.234);
            let rot = |m: &CMatrix| {
                CMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) * phase)
            };
            let r_rot = CVector::new(r.entries().iter().map(|z| z * phase).collect());
            let rotated =
                maxlog_joint_llr(&r_rot, &rot(&h1), &qpsk, Some((&rot(&h2), &qpsk)), 0.4)
                    .unwrap();
            for (a, b) in base.iter().zip(&rotated) {
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn matched_filter_closed_form_for_qpsk() {
        // 1x1, no interference: max-log LLRs reduce to
        // 2*sqrt(2)*Re(conj(h) r)/sigma^2 (I bit, label MSB) and
        // 2*sqrt(2)*Im(conj(h) r)/sigma^2 (Q bit).
        let qpsk = make_constellation(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let h = rand_complex(&mut rng);
            let r = rand_complex(&mut rng);
            let noise_var = 0.1 + rng.random::<f64>();
            let h1 = CMatrix::new(1, 1, vec![h]);
            let rv = CVector::new(vec![r]);
            let llrs = maxlog_joint_llr(&rv, &h1, &qpsk, None, noise_var).unwrap();
            let scale = 2.0 * 2f64.sqrt() / noise_var;
            let expect_i = scale * (h.conj() * r).re;
            let expect_q = scale * (h.conj() * r).im;
            assert!(
                (llrs[0] - expect_i).abs() <= 1e-9 * expect_i.abs().max(1.0),
                "I: {} vs {expect_i}",
                llrs[0]
            );
            assert!(
                (llrs[1] - expect_q).abs() <= 1e-9 * expect_q.abs().max(1.0),
                "Q: {} vs {expect_q}",
                llrs[1]
            );
        }
    }

    #[test]
    fn candidate_guard() {
        let qam64 = make_constellation(64).unwrap();
        let h1 = CMatrix::identity(2);
        let h2 = CMatrix::identity(2);
        let r = CVector::zeros(2);
        assert!(matches!(
            maxlog_joint_llr(&r, &h1, &qam64, Some((&h2, &qam64)), 1.0),
            Err(LlsError::CandidateSetTooLarge(_))
        ));
    }
}
