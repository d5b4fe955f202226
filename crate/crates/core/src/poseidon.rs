//! Poseidon permutation over the BN254 scalar field.
//!
//! Parameterization: S-box `x^5`, 8 full rounds, partial-round counts per
//! width taken from the circom reference table, round constants and the
//! Cauchy MDS matrix generated by the Grain LFSR procedure of the Poseidon
//! reference script. The permutation input is `[0, x_1, .., x_n]` and the
//! hash output is the first state word, which makes `hash` agree with
//! circomlib's `poseidon` template for the same inputs.

use std::sync::OnceLock;

use ark_bn254::Fr;
use ark_ff::{Field, PrimeField};

use crate::field::FieldElement;

pub const FULL_ROUNDS: usize = 8;
pub const MIN_WIDTH: usize = 2;
pub const MAX_WIDTH: usize = 17;

/// Partial rounds for widths 2..=17.
const PARTIAL_ROUNDS: [usize; 16] = [56, 57, 56, 60, 60, 63, 64, 63, 60, 66, 60, 65, 70, 60, 64, 68];

const FIELD_BITS: usize = 254;

pub struct PoseidonParams {
    pub width: usize,
    pub partial_rounds: usize,
    round_constants: Vec<Fr>,
    mds: Vec<Vec<Fr>>,
}

impl PoseidonParams {
    fn generate(width: usize) -> Self {
        assert!((MIN_WIDTH..=MAX_WIDTH).contains(&width));
        let partial_rounds = PARTIAL_ROUNDS[width - MIN_WIDTH];
        let mut grain = Grain::new(width, partial_rounds);

        let n_constants = (FULL_ROUNDS + partial_rounds) * width;
        let round_constants = (0..n_constants).map(|_| grain.next_field_rejecting()).collect();

        let mds = loop {
            let xs_ys: Vec<Fr> = (0..2 * width).map(|_| grain.next_field_reduced()).collect();
            let mut distinct = xs_ys.clone();
            distinct.sort_by_key(|f| f.into_bigint());
            distinct.dedup();
            if distinct.len() != xs_ys.len() {
                continue;
            }
            let (xs, ys) = xs_ys.split_at(width);
            let mut m = vec![vec![Fr::from(0u64); width]; width];
            let mut ok = true;
            for i in 0..width {
                for j in 0..width {
                    match (xs[i] + ys[j]).inverse() {
                        Some(inv) => m[i][j] = inv,
                        None => ok = false,
                    }
                }
            }
            if ok {
                break m;
            }
        };

        PoseidonParams {
            width,
            partial_rounds,
            round_constants,
            mds,
        }
    }

    pub fn permute(&self, state: &mut [Fr]) {
        debug_assert_eq!(state.len(), self.width);
        let t = self.width;
        let half_full = FULL_ROUNDS / 2;
        let total = FULL_ROUNDS + self.partial_rounds;
        let mut scratch = vec![Fr::from(0u64); t];
        for r in 0..total {
            for (i, s) in state.iter_mut().enumerate() {
                *s += self.round_constants[r * t + i];
            }
            if r < half_full || r >= half_full + self.partial_rounds {
                state.iter_mut().for_each(sbox);
            } else {
                sbox(&mut state[0]);
            }
            for (i, out) in scratch.iter_mut().enumerate() {
                let row = &self.mds[i];
                let mut acc = Fr::from(0u64);
                for (m, s) in row.iter().zip(state.iter()) {
                    acc += *m * s;
                }
                *out = acc;
            }
            state.copy_from_slice(&scratch);
        }
    }
}

#[inline]
fn sbox(x: &mut Fr) {
    let x2 = x.square();
    let x4 = x2.square();
    *x *= x4;
}

/// Parameters for `width`, generated once per process.
pub fn params(width: usize) -> &'static PoseidonParams {
    static TABLE: [OnceLock<PoseidonParams>; MAX_WIDTH + 1] = [const { OnceLock::new() }; MAX_WIDTH + 1];
    assert!((MIN_WIDTH..=MAX_WIDTH).contains(&width), "unsupported Poseidon width {width}");
    TABLE[width].get_or_init(|| PoseidonParams::generate(width))
}

/// Hashes 1..=16 inputs with the width `inputs.len() + 1` instance.
pub(crate) fn hash(inputs: &[FieldElement]) -> FieldElement {
    let p = params(inputs.len() + 1);
    let mut state = Vec::with_capacity(p.width);
    state.push(Fr::from(0u64));
    state.extend(inputs.iter().map(|x| x.0));
    p.permute(&mut state);
    FieldElement(state[0])
}

/// Self-shrinking Grain LFSR used by the reference parameter script.
struct Grain {
    bits: std::collections::VecDeque<bool>,
}

impl Grain {
    fn new(width: usize, partial_rounds: usize) -> Self {
        let mut bits = std::collections::VecDeque::with_capacity(80);
        let mut push = |value: u64, len: usize| {
            for i in (0..len).rev() {
                bits.push_back((value >> i) & 1 == 1);
            }
        };
        push(1, 2); // prime field
        push(0, 4); // x^alpha s-box
        push(FIELD_BITS as u64, 12);
        push(width as u64, 12);
        push(FULL_ROUNDS as u64, 10);
        push(partial_rounds as u64, 10);
        push((1 << 30) - 1, 30);
        let mut g = Grain { bits };
        for _ in 0..160 {
            g.step();
        }
        g
    }

    fn step(&mut self) -> bool {
        let b = &self.bits;
        let new_bit = b[62] ^ b[51] ^ b[38] ^ b[23] ^ b[13] ^ b[0];
        self.bits.pop_front();
        self.bits.push_back(new_bit);
        new_bit
    }

    fn next_bit(&mut self) -> bool {
        loop {
            let select = self.step();
            let out = self.step();
            if select {
                return out;
            }
        }
    }

    fn next_bytes(&mut self) -> [u8; 32] {
        let mut out = [0u8; 32];
        // 254 bits, big-endian, left-padded with two zero bits
        for i in (256 - FIELD_BITS)..256 {
            if self.next_bit() {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    fn next_field_rejecting(&mut self) -> Fr {
        loop {
            if let Ok(fe) = FieldElement::from_be_bytes(&self.next_bytes()) {
                return fe.0;
            }
        }
    }

    fn next_field_reduced(&mut self) -> Fr {
        Fr::from_be_bytes_mod_order(&self.next_bytes())
    }
}
