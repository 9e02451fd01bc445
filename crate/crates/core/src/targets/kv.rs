//! `kv-parser`: a textual key/value record format.
//!
//! ```text
//! document := entry*
//! entry    := key '=' value | '!' key            (separated by ';' ',' or whitespace)
//! value    := '"' string '"' | digits | '{' entry* '}' | '@' key
//! ```
//!
//! `!key` deletes a key, `@key` references one. String values are stored
//! through a fixed 16-byte label buffer whose length field sits right
//! behind it, so an overlong copy clobbers the length.

use std::collections::BTreeSet;

use super::catalog::{BugId, KV_PARSER};
use super::exec::{Abort, Execution, FaultKind, OpCategory};
use super::Target;
use crate::site;

pub const LABEL_OVERFLOW: BugId = BugId(8);
pub const LABEL_ZERO_LEN: BugId = BugId(9);
pub const DEEP_NESTING: BugId = BugId(10);
pub const SLOT_OVERFLOW: BugId = BugId(11);
pub const STALE_REFERENCE: BugId = BugId(12);
pub const TRAILING_ESCAPE: BugId = BugId(13);

const LABEL_CAPACITY: usize = 16;
const FRAME_LEN: usize = LABEL_CAPACITY + 8;
const SLOT_SIZE: u64 = 24;
const MAX_NESTING: usize = 32;
/// Past this depth the parser gives up instead of recursing further.
const NESTING_CUTOFF: usize = 256;

pub fn seeds() -> Vec<Vec<u8>> {
    vec![b"name = \"hello world\"\ncount = 3\nitems = {a = 1; b = \"x\\ty\"}\ntmp = 7\n!tmp\nref = @name\n".to_vec()]
}

pub fn pov(bug: BugId) -> Option<Vec<u8>> {
    let text: Vec<u8> = match bug {
        LABEL_OVERFLOW => b"name = \"0123456789abcdef\"\n".to_vec(),
        LABEL_ZERO_LEN => b"name = \"\"\n".to_vec(),
        DEEP_NESTING => {
            let mut s = b"root = ".to_vec();
            for _ in 0..40 {
                s.extend_from_slice(b"{a = ");
            }
            s.push(b'1');
            s.extend(std::iter::repeat_n(b'}', 40));
            s
        }
        SLOT_OVERFLOW => b"count = 4294967295\n".to_vec(),
        STALE_REFERENCE => b"tmp = 1\n!tmp\nref = @tmp\n".to_vec(),
        _ => return None,
    };
    Some(text)
}

#[derive(Debug, Default)]
pub struct KvParser;

enum Halt {
    Abort(Abort),
    Syntax,
}

impl From<Abort> for Halt {
    fn from(a: Abort) -> Self {
        Halt::Abort(a)
    }
}

struct Parser<'i, 'e, 'a> {
    input: &'i [u8],
    pos: usize,
    exec: &'e mut Execution<'a>,
    live: BTreeSet<&'i [u8]>,
    deleted: BTreeSet<&'i [u8]>,
}

impl Target for KvParser {
    fn name(&self) -> &'static str {
        KV_PARSER
    }

    fn run(&self, input: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort> {
        exec.edge(site!());
        let mut p = Parser { input, pos: 0, exec, live: BTreeSet::new(), deleted: BTreeSet::new() };
        match p.entries(0) {
            Ok(()) => Ok(()),
            Err(Halt::Syntax) => {
                p.exec.edge(site!());
                Ok(())
            }
            Err(Halt::Abort(a)) => Err(a),
        }
    }
}

impl<'i> Parser<'i, '_, '_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn skip_separators(&mut self) {
        while let Some(b' ' | b'\t' | b'\r' | b'\n' | b';' | b',') = self.peek() {
            self.pos += 1;
        }
    }

    fn skip_spaces(&mut self) {
        while let Some(b' ' | b'\t') = self.peek() {
            self.pos += 1;
        }
    }

    fn entries(&mut self, depth: usize) -> Result<(), Halt> {
        loop {
            self.exec.tick()?;
            self.skip_separators();
            match self.peek() {
                None => {
                    self.exec.edge(site!());
                    return if depth == 0 { Ok(()) } else { Err(Halt::Syntax) };
                }
                Some(b'}') if depth > 0 => {
                    self.exec.edge(site!());
                    self.pos += 1;
                    return Ok(());
                }
                Some(b'!') => {
                    self.exec.edge(site!());
                    self.pos += 1;
                    let key = self.key()?;
                    self.live.remove(key);
                    self.deleted.insert(key);
                }
                Some(_) => {
                    self.exec.edge(site!());
                    let key = self.key()?;
                    self.skip_spaces();
                    if self.peek() != Some(b'=') {
                        return Err(Halt::Syntax);
                    }
                    self.pos += 1;
                    self.skip_spaces();
                    self.value(depth)?;
                    self.deleted.remove(key);
                    self.live.insert(key);
                }
            }
        }
    }

    fn key(&mut self) -> Result<&'i [u8], Halt> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if !(b.is_ascii_alphanumeric() || b == b'_') {
                break;
            }
            self.pos += 1;
        }
        self.exec.count(OpCategory::Parse, (self.pos - start) as u64);
        if self.pos == start {
            self.exec.edge(site!());
            return Err(Halt::Syntax);
        }
        Ok(&self.input[start..self.pos])
    }

    fn value(&mut self, depth: usize) -> Result<(), Halt> {
        match self.peek() {
            Some(b'"') => {
                self.exec.edge(site!());
                self.pos += 1;
                let s = self.string()?;
                store_label(self.exec, &s)?;
            }
            Some(b'{') => {
                self.exec.edge(site!());
                self.pos += 1;
                let inner = depth + 1;
                let too_deep = inner > MAX_NESTING;
                self.exec.canary(DEEP_NESTING, too_deep)?;
                self.exec.fault(DEEP_NESTING, FaultKind::StackExhaustion, too_deep)?;
                if inner > NESTING_CUTOFF {
                    return Err(Halt::Syntax);
                }
                self.exec.count(OpCategory::Alloc, 1);
                self.entries(inner)?;
            }
            Some(b'@') => {
                self.exec.edge(site!());
                self.pos += 1;
                let key = self.key()?;
                let stale = self.deleted.contains(key) && !self.live.contains(key);
                self.exec.canary(STALE_REFERENCE, stale)?;
                self.exec.fault(STALE_REFERENCE, FaultKind::UseAfterFree, stale)?;
                self.exec.count(OpCategory::Compare, 1);
            }
            Some(b'0'..=b'9') => {
                self.exec.edge(site!());
                let n = self.number();
                let slots = n.checked_mul(SLOT_SIZE).filter(|&v| v <= u32::MAX as u64);
                let overflow = slots.is_none();
                self.exec.canary(SLOT_OVERFLOW, overflow)?;
                self.exec.fault(SLOT_OVERFLOW, FaultKind::OutOfBoundsWrite, overflow)?;
                self.exec.count(OpCategory::Arith, 2);
            }
            _ => {
                self.exec.edge(site!());
                return Err(Halt::Syntax);
            }
        }
        Ok(())
    }

    fn number(&mut self) -> u64 {
        let mut n: u64 = 0;
        while let Some(d @ b'0'..=b'9') = self.peek() {
            n = n.saturating_mul(10).saturating_add((d - b'0') as u64);
            self.pos += 1;
        }
        self.exec.count(OpCategory::Arith, 1);
        n
    }

    fn string(&mut self) -> Result<Vec<u8>, Halt> {
        let mut out = Vec::new();
        loop {
            self.exec.tick()?;
            match self.peek() {
                None => {
                    self.exec.edge(site!());
                    return Err(Halt::Syntax);
                }
                Some(b'"') => {
                    self.pos += 1;
                    self.exec.count(OpCategory::Parse, out.len() as u64);
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.exec.edge(site!());
                    let at_end = self.pos + 1 == self.input.len();
                    self.exec.canary(TRAILING_ESCAPE, at_end)?;
                    self.exec.fault(TRAILING_ESCAPE, FaultKind::OutOfBoundsRead, at_end)?;
                    self.pos += 1;
                    if let Some(b) = self.peek() {
                        out.push(match b {
                            b'n' => b'\n',
                            b't' => b'\t',
                            b'0' => 0,
                            other => other,
                        });
                        self.pos += 1;
                    }
                }
                Some(b) => {
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
    }
}

/// Stores a label the way a C routine with a `{ char buf[16]; size_t len; }`
/// frame would: `len = strlen(s)`, then `strcpy(buf, s)`, then
/// `64 / len`. The copy is simulated byte by byte over the frame, so an
/// exactly-16-byte label writes its terminator into the low byte of `len`.
fn store_label(exec: &mut Execution<'_>, s: &[u8]) -> Result<(), Abort> {
    let strlen = s.iter().position(|&b| b == 0).unwrap_or(s.len());
    let mut frame = [0u8; FRAME_LEN];
    frame[LABEL_CAPACITY..].copy_from_slice(&(strlen as u64).to_le_bytes());

    let overflow = strlen >= LABEL_CAPACITY;
    exec.canary(LABEL_OVERFLOW, overflow)?;
    exec.fault(LABEL_OVERFLOW, FaultKind::OutOfBoundsWrite, overflow)?;
    for (slot, &b) in frame.iter_mut().zip(s[..strlen].iter().chain(std::iter::once(&0))) {
        *slot = b;
    }
    exec.count(OpCategory::Copy, strlen as u64 + 1);

    let len = u64::from_le_bytes(frame[LABEL_CAPACITY..].try_into().unwrap());
    exec.canary(LABEL_ZERO_LEN, len == 0)?;
    exec.fault(LABEL_ZERO_LEN, FaultKind::DivideByZero, len == 0)?;
    let repeat = 64u64.checked_div(len).unwrap_or(0);
    exec.count(OpCategory::Arith, 2 + repeat.min(1));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{run_driver, ExecMode, Exit};

    fn run(input: &[u8]) -> crate::targets::ExecutionOutcome {
        run_driver(KV_PARSER, input, ExecMode::Normal).unwrap()
    }

    #[test]
    fn seed_is_clean_and_reaches_every_canary() {
        let out = run(&seeds()[0]);
        assert_eq!(out.exit, Exit::Clean);
        assert!(!out.snapshot.faulty);
        for bug in [LABEL_OVERFLOW, LABEL_ZERO_LEN, DEEP_NESTING, SLOT_OVERFLOW, STALE_REFERENCE, TRAILING_ESCAPE] {
            assert!(out.snapshot.reached(bug.index()) > 0, "{bug} not reached");
        }
    }

    #[test]
    fn label_lengths_around_the_buffer_size() {
        for (len, w1, w2) in [(15usize, 0u64, 0u64), (16, 1, 0), (17, 1, 0), (30, 1, 0)] {
            let text = format!("s = \"{}\"", "x".repeat(len));
            let out = run(text.as_bytes());
            assert_eq!(out.snapshot.triggered(LABEL_OVERFLOW.index()), w1, "len {len}");
            assert_eq!(out.snapshot.triggered(LABEL_ZERO_LEN.index()), w2, "len {len}");
        }
    }

    #[test]
    fn empty_label_triggers_the_division() {
        let out = run(b"s = \"\"");
        assert_eq!(out.snapshot.triggered(LABEL_ZERO_LEN.index()), 1);
        assert_eq!(out.snapshot.triggered(LABEL_OVERFLOW.index()), 0);
    }

    #[test]
    fn trailing_escape() {
        let out = run(b"s = \"abc\\");
        assert_eq!(out.snapshot.triggered(TRAILING_ESCAPE.index()), 1);
    }

    #[test]
    fn redefinition_revives_a_deleted_key() {
        let out = run(b"t = 1; !t; t = 2; r = @t");
        assert_eq!(out.snapshot.reached(STALE_REFERENCE.index()), 1);
        assert_eq!(out.snapshot.triggered(STALE_REFERENCE.index()), 0);
    }

    #[test]
    fn slot_overflow_threshold() {
        let limit = u32::MAX as u64 / SLOT_SIZE;
        let ok = run(format!("n = {limit}").as_bytes());
        assert_eq!(ok.snapshot.triggered(SLOT_OVERFLOW.index()), 0);
        let bad = run(format!("n = {}", limit + 1).as_bytes());
        assert_eq!(bad.snapshot.triggered(SLOT_OVERFLOW.index()), 1);
    }

    #[test]
    fn very_deep_nesting_does_not_recurse_unboundedly() {
        let input = "a = ".to_string() + &"{b = ".repeat(100_000);
        let out = run(input.as_bytes());
        assert_eq!(out.snapshot.triggered(DEEP_NESTING.index()), 1);
    }
}
