//! `chunk-parser`: a small PNG-like binary container.
//!
//! ```text
//! magic   89 'C' 'K' 'P'
//! header  width u32 BE | height u32 BE | bit_depth u8 | channels u8 | interlace u8
//! chunk*  length u32 BE | type [4] | data [length] | crc32(type ++ data) u32 BE
//! ```
//!
//! Chunk types whose first letter is upper case are critical: a CRC
//! mismatch aborts parsing. Ancillary chunks (lower-case first letter) are
//! used even when their CRC is wrong. Header geometry is only consumed by
//! the row-factor limit check and the row split of `DATA`.

use super::catalog::{BugId, CHUNK_PARSER};
use super::exec::{Abort, Execution, FaultKind, OpCategory};
use super::Target;
use crate::site;

pub const MAGIC: [u8; 4] = [0x89, b'C', b'K', b'P'];
pub const HEADER_LEN: usize = 11;

pub const ROW_FACTOR: BugId = BugId(0);
pub const CHUNK_OVERRUN: BugId = BugId(1);
pub const ZERO_HEIGHT: BugId = BugId(2);
pub const LONG_KEYWORD: BugId = BugId(3);
pub const EXIF_TAG: BugId = BugId(4);
pub const BAD_FILTER: BugId = BugId(5);
pub const PALETTE_MISMATCH: BugId = BugId(6);
pub const DATA_AFTER_STOP: BugId = BugId(7);

const TYPE_DATA: [u8; 4] = *b"DATA";
const TYPE_STOP: [u8; 4] = *b"STOP";
const TYPE_TEXT: [u8; 4] = *b"tEXt";
const TYPE_PALETTE: [u8; 4] = *b"sPAL";
const TYPE_EXIF: u32 = u32::from_be_bytes(*b"eXIf");

const KEYWORD_CAPACITY: usize = 80;
const MAX_FILTER: u8 = 4;

pub fn crc32(chunk_type: &[u8], data: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(chunk_type);
    h.update(data);
    h.finalize()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub channels: u8,
    pub interlace: u8,
}

impl Header {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&self.width.to_be_bytes());
        out[4..8].copy_from_slice(&self.height.to_be_bytes());
        out[8] = self.bit_depth;
        out[9] = self.channels;
        out[10] = self.interlace;
        out
    }

    /// `width * channels * (depth > 8 ? 2 : 1) + 1 + (interlaced ? 6 : 0)`
    /// in wrapping 32-bit arithmetic.
    pub fn row_factor(&self) -> u32 {
        let depth_factor = 1 + (self.bit_depth > 8) as u32;
        self.width
            .wrapping_mul(self.channels as u32)
            .wrapping_mul(depth_factor)
            .wrapping_add(1)
            .wrapping_add(6 * self.interlace as u32)
    }
}

/// Builds chunk-parser files.
#[derive(Debug, Clone)]
pub struct ChunkFile {
    bytes: Vec<u8>,
}

impl ChunkFile {
    pub fn new(header: Header) -> Self {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&header.encode());
        Self { bytes }
    }

    /// Appends a chunk with a correct CRC.
    pub fn chunk(self, chunk_type: [u8; 4], data: &[u8]) -> Self {
        let crc = crc32(&chunk_type, data);
        self.chunk_with_crc(chunk_type, data, crc)
    }

    pub fn chunk_with_crc(mut self, chunk_type: [u8; 4], data: &[u8], crc: u32) -> Self {
        self.bytes.extend_from_slice(&(data.len() as u32).to_be_bytes());
        self.bytes.extend_from_slice(&chunk_type);
        self.bytes.extend_from_slice(data);
        self.bytes.extend_from_slice(&crc.to_be_bytes());
        self
    }

    pub fn raw(mut self, bytes: &[u8]) -> Self {
        self.bytes.extend_from_slice(bytes);
        self
    }

    pub fn build(self) -> Vec<u8> {
        self.bytes
    }
}

pub const SEED_HEADER: Header = Header { width: 32, height: 4, bit_depth: 8, channels: 4, interlace: 0 };

/// `DATA` payload of `rows` rows, each a filter byte followed by `row_len`
/// pixel bytes. Pixel bytes are valid filter values, so re-slicing the
/// payload under another height never exposes a bad filter byte.
pub fn scanlines(rows: usize, row_len: usize, filter: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(rows * (row_len + 1));
    for r in 0..rows {
        out.push(filter);
        out.extend((0..row_len).map(|i| ((r + i * 3) % 5) as u8));
    }
    out
}

/// A well-formed 8-bit RGBA file that triggers no canary.
pub fn valid_file() -> Vec<u8> {
    ChunkFile::new(SEED_HEADER)
        .chunk(TYPE_TEXT, b"Title\0ground truth")
        .chunk(TYPE_PALETTE, &[2, 10, 20, 30, 40, 50, 60])
        .chunk(TYPE_DATA, &scanlines(4, 8, 0))
        .chunk(TYPE_STOP, &[])
        .build()
}

pub fn seeds() -> Vec<Vec<u8>> {
    vec![valid_file()]
}

pub fn pov(bug: BugId) -> Option<Vec<u8>> {
    let base = || ChunkFile::new(SEED_HEADER);
    let file = match bug {
        ROW_FACTOR => ChunkFile::new(Header { width: 0x5555_5555, height: 4, bit_depth: 8, channels: 3, interlace: 0 })
            .chunk(TYPE_DATA, &scanlines(4, 8, 0))
            .chunk(TYPE_STOP, &[]),
        CHUNK_OVERRUN => base().raw(&[0, 0, 1, 0]).raw(&TYPE_TEXT).raw(b"Title\0"),
        ZERO_HEIGHT => ChunkFile::new(Header { height: 0, ..SEED_HEADER })
            .chunk(TYPE_DATA, &scanlines(4, 8, 0))
            .chunk(TYPE_STOP, &[]),
        LONG_KEYWORD => {
            let mut text = vec![b'K'; 96];
            text.extend_from_slice(b"\0value");
            base().chunk(TYPE_TEXT, &text).chunk(TYPE_STOP, &[])
        }
        EXIF_TAG => base().chunk(*b"eXIf", b"MM\0*").chunk(TYPE_STOP, &[]),
        BAD_FILTER => base().chunk(TYPE_DATA, &scanlines(4, 8, 7)).chunk(TYPE_STOP, &[]),
        PALETTE_MISMATCH => base().chunk(TYPE_PALETTE, &[5, 10, 20, 30, 40, 50, 60]).chunk(TYPE_STOP, &[]),
        DATA_AFTER_STOP => {
            base().chunk(TYPE_DATA, &scanlines(4, 8, 0)).chunk(TYPE_STOP, &[]).chunk(TYPE_DATA, &scanlines(4, 8, 0))
        }
        _ => return None,
    };
    Some(file.build())
}

#[derive(Debug, Default)]
pub struct ChunkParser;

struct Decoder {
    header: Header,
    idat_limit: u32,
    stopped: bool,
    rows_decoded: u64,
    keyword: [u8; KEYWORD_CAPACITY],
    palette: Vec<[u8; 3]>,
    declared_palette_len: usize,
}

impl Decoder {
    /// Entry count as reported by the chunk's own count byte.
    fn palette_len(&self) -> usize {
        self.declared_palette_len
    }

    /// Entry count as seen through the stored entries.
    fn palette_entries(&self) -> &[[u8; 3]] {
        &self.palette
    }
}

impl Target for ChunkParser {
    fn name(&self) -> &'static str {
        CHUNK_PARSER
    }

    fn run(&self, input: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort> {
        exec.edge(site!());
        if input.len() < MAGIC.len() || !exec.cmp_bytes(site!(), &input[..4], &MAGIC) {
            exec.edge(site!());
            return Ok(());
        }
        let Some(h) = input.get(4..4 + HEADER_LEN) else {
            exec.edge(site!());
            return Ok(());
        };
        exec.count(OpCategory::Parse, HEADER_LEN as u64);
        let header =
            Header { width: be32(&h[0..4]), height: be32(&h[4..8]), bit_depth: h[8], channels: h[9], interlace: h[10] };
        if header.width > 0x7FFF_FFFF || header.height > 0x7FFF_FFFF {
            exec.edge(site!());
            return Ok(());
        }
        if !matches!(header.bit_depth, 1 | 2 | 4 | 8 | 16) {
            exec.edge(site!());
            return Ok(());
        }
        if !(1..=4).contains(&header.channels) || header.interlace > 1 {
            exec.edge(site!());
            return Ok(());
        }
        exec.edge(site!());

        let mut dec = Decoder {
            header,
            idat_limit: 0,
            stopped: false,
            rows_decoded: 0,
            keyword: [0; KEYWORD_CAPACITY],
            palette: Vec::new(),
            declared_palette_len: 0,
        };
        let mut pos = 4 + HEADER_LEN;
        loop {
            exec.tick()?;
            if pos + 8 > input.len() {
                exec.edge(site!());
                break;
            }
            exec.edge(site!());
            let length = be32(&input[pos..pos + 4]) as usize;
            let ctype: [u8; 4] = input[pos + 4..pos + 8].try_into().unwrap();
            exec.count(OpCategory::Parse, 8);
            check_chunk_length(&mut dec, exec)?;

            let body = pos + 8;
            let available = input.len() - body;
            let overrun = length as u64 + 4 > available as u64;
            exec.canary(CHUNK_OVERRUN, overrun)?;
            exec.fault(CHUNK_OVERRUN, FaultKind::OutOfBoundsRead, overrun)?;
            if overrun {
                exec.edge(site!());
            }
            let data = &input[body..body + length.min(available)];
            let stored_crc = input.get(body + length..body + length + 4).map(be32);
            exec.count(OpCategory::Checksum, data.len() as u64 + 4);
            let crc_ok = stored_crc == Some(crc32(&ctype, data));

            let critical = ctype[0].is_ascii_uppercase();
            if critical {
                exec.edge(site!());
                if !crc_ok {
                    exec.edge(site!());
                    break;
                }
                if exec.cmp_bytes(site!(), &ctype, &TYPE_DATA) {
                    exec.edge(site!());
                    handle_data(&mut dec, data, exec)?;
                } else if exec.cmp_bytes(site!(), &ctype, &TYPE_STOP) {
                    exec.edge(site!());
                    dec.stopped = true;
                } else {
                    exec.edge(site!());
                    break;
                }
            } else {
                exec.edge(site!());
                let is_exif = exec.cmp_bytes(site!(), &ctype, &TYPE_EXIF.to_be_bytes());
                exec.canary(EXIF_TAG, is_exif)?;
                exec.fault(EXIF_TAG, FaultKind::UseAfterFree, is_exif)?;
                if exec.cmp_bytes(site!(), &ctype, &TYPE_TEXT) {
                    exec.edge(site!());
                    handle_text(&mut dec, data, exec)?;
                } else if exec.cmp_bytes(site!(), &ctype, &TYPE_PALETTE) {
                    exec.edge(site!());
                    handle_palette(&mut dec, data, exec)?;
                } else {
                    exec.edge(site!());
                }
            }
            if overrun {
                break;
            }
            pos = body + length + 4;
        }
        exec.count(OpCategory::Alloc, dec.rows_decoded);
        Ok(())
    }
}

/// Upper bound on image data derived from the header, recomputed for
/// every chunk.
fn check_chunk_length(dec: &mut Decoder, exec: &mut Execution<'_>) -> Result<(), Abort> {
    let row_factor = dec.header.row_factor();
    exec.count(OpCategory::Arith, 5);
    exec.canary(ROW_FACTOR, row_factor == 0)?;
    exec.fault(ROW_FACTOR, FaultKind::DivideByZero, row_factor == 0)?;
    // A zero row factor would divide by zero here.
    let limit = u32::MAX.checked_div(row_factor).unwrap_or(0);
    if dec.header.height > limit {
        exec.edge(site!());
        dec.idat_limit = 0x7FFF_FFFF;
    }
    Ok(())
}

fn handle_data(dec: &mut Decoder, data: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort> {
    exec.canary(DATA_AFTER_STOP, dec.stopped)?;
    exec.fault(DATA_AFTER_STOP, FaultKind::UseAfterFree, dec.stopped)?;

    let height = dec.header.height as usize;
    exec.canary(ZERO_HEIGHT, height == 0)?;
    exec.fault(ZERO_HEIGHT, FaultKind::DivideByZero, height == 0)?;
    let Some(row_len) = data.len().checked_div(height) else {
        exec.edge(site!());
        return Ok(());
    };
    if row_len == 0 {
        exec.edge(site!());
        return Ok(());
    }
    let mut prev: Vec<u8> = vec![0; row_len - 1];
    for row in data.chunks_exact(row_len).take(height) {
        exec.tick()?;
        exec.edge(site!());
        let filter = row[0];
        let bad = filter > MAX_FILTER;
        exec.canary(BAD_FILTER, bad)?;
        exec.fault(BAD_FILTER, FaultKind::OutOfBoundsRead, bad)?;
        let pixels = &row[1..];
        let mut left = 0u8;
        for (i, &b) in pixels.iter().enumerate() {
            let up = prev[i];
            let v = match filter {
                1 => b.wrapping_add(left),
                2 => b.wrapping_add(up),
                3 => b.wrapping_add(((left as u16 + up as u16) / 2) as u8),
                4 => b.wrapping_add(paeth(left, up, 0)),
                _ => b,
            };
            prev[i] = v;
            left = v;
        }
        exec.count(OpCategory::Arith, pixels.len() as u64);
        dec.rows_decoded += 1;
    }
    Ok(())
}

fn handle_text(dec: &mut Decoder, data: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort> {
    let key_len = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let too_long = key_len > KEYWORD_CAPACITY - 1;
    exec.canary(LONG_KEYWORD, too_long)?;
    exec.fault(LONG_KEYWORD, FaultKind::OutOfBoundsWrite, too_long)?;
    // The copy is clipped to the buffer; the real overflow is modeled above.
    let n = key_len.min(KEYWORD_CAPACITY - 1);
    dec.keyword[..n].copy_from_slice(&data[..n]);
    dec.keyword[n] = 0;
    exec.count(OpCategory::Copy, n as u64);
    if key_len == 0 {
        exec.edge(site!());
    }
    Ok(())
}

fn handle_palette(dec: &mut Decoder, data: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort> {
    dec.declared_palette_len = data.first().copied().unwrap_or(0) as usize;
    dec.palette = data.get(1..).unwrap_or(&[]).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    exec.count(OpCategory::Copy, dec.palette.len() as u64 * 3);
    let inconsistent = dec.palette_len() != dec.palette_entries().len();
    exec.canary(PALETTE_MISMATCH, inconsistent)?;
    if dec.palette.is_empty() {
        exec.edge(site!());
    }
    Ok(())
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let (pa, pb, pc) = ((p - a as i16).abs(), (p - b as i16).abs(), (p - c as i16).abs());
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b[..4].try_into().unwrap())
}
