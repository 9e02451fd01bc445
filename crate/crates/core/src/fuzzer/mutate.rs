//! Mutation operators: the deterministic walking stages and the stacked
//! random "havoc" stage, plus splicing of two inputs.

use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

/// Inputs never grow beyond this many bytes.
pub const MAX_INPUT_LEN: usize = 4096;
/// Largest magnitude used by the arithmetic stages.
pub const ARITH_MAX: i8 = 35;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MutateError {
    #[error("position {pos} out of bounds for a {len}-byte input ({what})")]
    OutOfBounds { what: &'static str, pos: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    W8,
    W16,
    W32,
}

impl Width {
    pub fn bytes(self) -> usize {
        match self {
            Width::W8 => 1,
            Width::W16 => 2,
            Width::W32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endian {
    Little,
    Big,
}

/// A boundary value written over `width` bytes in a given byte order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InterestingValue {
    pub value: u32,
    pub width: Width,
    pub endian: Endian,
}

impl InterestingValue {
    pub fn encode(&self) -> Vec<u8> {
        let n = self.width.bytes();
        let le = self.value.to_le_bytes();
        let mut out = le[..n].to_vec();
        if self.endian == Endian::Big {
            out.reverse();
        }
        out
    }
}

/// Base table of boundary values. `0x55555555` is the width at which a
/// 3-channel 32-bit row factor wraps to zero.
pub const INTERESTING: [i64; 14] =
    [0, 1, -1, 16, 32, 64, 127, 128, 255, 0x7FFF, 0xFFFF, 0x7FFF_FFFF, 0xFFFF_FFFF, 0x5555_5555];

/// Every distinct byte pattern produced by the base table at each width
/// that can hold the value, in both byte orders.
pub fn interesting_values() -> &'static [InterestingValue] {
    static TABLE: OnceLock<Vec<InterestingValue>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut seen: Vec<(Width, Vec<u8>)> = Vec::new();
        let mut out = Vec::new();
        for width in [Width::W8, Width::W16, Width::W32] {
            let bits = 8 * width.bytes() as u32;
            let max = (1i64 << bits) - 1;
            for &v in &INTERESTING {
                if v > max {
                    continue;
                }
                let value = (v & max) as u32;
                for endian in [Endian::Little, Endian::Big] {
                    let iv = InterestingValue { value, width, endian };
                    let key = (width, iv.encode());
                    if !seen.contains(&key) {
                        seen.push(key);
                        out.push(iv);
                    }
                }
            }
        }
        out
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage<'a> {
    /// Flip bit `pos`; bit k of byte b is `(b >> (7 - k)) & 1`.
    BitFlip(usize),
    /// XOR byte `pos` with 0xFF.
    ByteFlip(usize),
    /// Wrapping add of `delta` to byte `pos`.
    Arith { pos: usize, delta: i8 },
    /// Overwrite bytes at `pos` with an interesting value.
    Interesting { pos: usize, value: InterestingValue },
    /// `n_ops` stacked random operations.
    Havoc(u32),
    /// Crossover with another input at a random point where they differ.
    Splice(&'a [u8]),
}

pub fn mutate<R: Rng + ?Sized>(input: &[u8], rng: &mut R, stage: &Stage<'_>) -> Result<Vec<u8>, MutateError> {
    let len = input.len();
    let mut out = input.to_vec();
    match *stage {
        Stage::BitFlip(pos) => {
            let byte = pos / 8;
            if byte >= len {
                return Err(MutateError::OutOfBounds { what: "bit flip", pos: byte, len });
            }
            out[byte] ^= 0x80 >> (pos % 8);
        }
        Stage::ByteFlip(pos) => {
            if pos >= len {
                return Err(MutateError::OutOfBounds { what: "byte flip", pos, len });
            }
            out[pos] ^= 0xFF;
        }
        Stage::Arith { pos, delta } => {
            if pos >= len {
                return Err(MutateError::OutOfBounds { what: "arith", pos, len });
            }
            out[pos] = out[pos].wrapping_add(delta as u8);
        }
        Stage::Interesting { pos, value } => {
            let bytes = value.encode();
            if pos + bytes.len() > len {
                return Err(MutateError::OutOfBounds { what: "interesting", pos, len });
            }
            out[pos..pos + bytes.len()].copy_from_slice(&bytes);
        }
        Stage::Havoc(n_ops) => {
            for _ in 0..n_ops {
                havoc_op(&mut out, rng);
            }
        }
        Stage::Splice(other) => {
            if let Some(split) = splice_point(input, other, rng) {
                out.truncate(split);
                out.extend_from_slice(&other[split..]);
                out.truncate(MAX_INPUT_LEN);
            }
        }
    }
    Ok(out)
}

/// The deterministic stages for an input of `len` bytes, in execution
/// order: bit flips, byte flips, 8-bit arithmetic, interesting values.
pub fn deterministic_stages(len: usize) -> impl Iterator<Item = Stage<'static>> {
    let flips = (0..len * 8).map(Stage::BitFlip);
    let bytes = (0..len).map(Stage::ByteFlip);
    let arith = (0..len).flat_map(|pos| {
        (1..=ARITH_MAX).flat_map(move |d| [Stage::Arith { pos, delta: d }, Stage::Arith { pos, delta: -d }])
    });
    let interesting = (0..len).flat_map(move |pos| {
        interesting_values()
            .iter()
            .filter(move |v| pos + v.width.bytes() <= len)
            .map(move |&value| Stage::Interesting { pos, value })
    });
    flips.chain(bytes).chain(arith).chain(interesting)
}

fn splice_point<R: Rng + ?Sized>(a: &[u8], b: &[u8], rng: &mut R) -> Option<usize> {
    let common = a.len().min(b.len());
    let first = (0..common).find(|&i| a[i] != b[i])?;
    let last = (0..common).rev().find(|&i| a[i] != b[i])?;
    if last <= first {
        return None;
    }
    Some(rng.random_range(first..last))
}

fn block_len<R: Rng + ?Sized>(rng: &mut R, limit: usize) -> usize {
    let cap = match rng.random_range(0..3) {
        0 => 32,
        1 => 128,
        _ => 1500,
    };
    rng.random_range(1..=limit.min(cap).max(1))
}

fn write_word(out: &mut [u8], pos: usize, value: u32, width: Width, endian: Endian) {
    let bytes = InterestingValue { value, width, endian }.encode();
    out[pos..pos + bytes.len()].copy_from_slice(&bytes);
}

fn read_word(buf: &[u8], pos: usize, width: Width, endian: Endian) -> u32 {
    let n = width.bytes();
    let mut v = 0u32;
    for i in 0..n {
        let b = match endian {
            Endian::Little => buf[pos + n - 1 - i],
            Endian::Big => buf[pos + i],
        };
        v = (v << 8) | b as u32;
    }
    v
}

fn random_endian<R: Rng + ?Sized>(rng: &mut R) -> Endian {
    if rng.random_bool(0.5) {
        Endian::Little
    } else {
        Endian::Big
    }
}

fn havoc_op<R: Rng + ?Sized>(out: &mut Vec<u8>, rng: &mut R) {
    let len = out.len();
    match rng.random_range(0..15u8) {
        0 if len > 0 => {
            let bit = rng.random_range(0..len * 8);
            out[bit / 8] ^= 0x80 >> (bit % 8);
        }
        op @ 1..=3 => {
            let width = [Width::W8, Width::W16, Width::W32][(op - 1) as usize];
            if len < width.bytes() {
                return;
            }
            let candidates: Vec<&InterestingValue> = interesting_values().iter().filter(|v| v.width == width).collect();
            let value = *candidates[rng.random_range(0..candidates.len())];
            let pos = rng.random_range(0..=len - width.bytes());
            out[pos..pos + width.bytes()].copy_from_slice(&value.encode());
        }
        op @ 4..=7 => {
            let width = match op {
                4 | 5 => Width::W8,
                6 => Width::W16,
                _ => Width::W32,
            };
            if len < width.bytes() {
                return;
            }
            let pos = rng.random_range(0..=len - width.bytes());
            let endian = random_endian(rng);
            let delta = rng.random_range(1..=ARITH_MAX as u32);
            let cur = read_word(out, pos, width, endian);
            let mask = (u64::MAX >> (64 - 8 * width.bytes())) as u32;
            let next =
                if op == 4 || rng.random_bool(0.5) { cur.wrapping_sub(delta) } else { cur.wrapping_add(delta) } & mask;
            write_word(out, pos, next, width, endian);
        }
        8 if len > 0 => {
            let pos = rng.random_range(0..len);
            out[pos] ^= rng.random_range(1..=255u8);
        }
        9 | 10 if len > 1 => {
            let del = block_len(rng, len - 1);
            let from = rng.random_range(0..=len - del);
            out.drain(from..from + del);
        }
        11 | 12 if len < MAX_INPUT_LEN => {
            let clone = len > 0 && rng.random_ratio(3, 4);
            let n = block_len(rng, if clone { len } else { 64 }).min(MAX_INPUT_LEN - len);
            let block: Vec<u8> = if clone {
                let from = rng.random_range(0..=len - n);
                out[from..from + n].to_vec()
            } else {
                let fill = if rng.random_bool(0.5) {
                    rng.random()
                } else {
                    out.get(rng.random_range(0..len.max(1))).copied().unwrap_or(0)
                };
                vec![fill; n]
            };
            let at = rng.random_range(0..=len);
            out.splice(at..at, block);
        }
        13 | 14 if len > 1 => {
            let n = block_len(rng, len - 1);
            let from = rng.random_range(0..=len - n);
            let to = rng.random_range(0..=len - n);
            if rng.random_ratio(3, 4) {
                out.copy_within(from..from + n, to);
            } else {
                let fill: u8 = rng.random();
                out[to..to + n].fill(fill);
            }
        }
        _ => {}
    }
}
