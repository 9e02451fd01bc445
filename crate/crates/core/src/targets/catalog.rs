use std::fmt;

use serde::{Deserialize, Serialize};

/// Suite-wide bug identifier; also the bug's slot in the canary registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BugId(pub u32);

impl BugId {
    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match descriptor(*self) {
            Some(d) => f.write_str(d.name),
            None => write!(f, "bug#{}", self.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BugClass {
    IntegerOverflowDivZero,
    MagicValue,
    ChecksumGuarded,
    OOBRead,
    OOBWrite,
    /// Use of released state, the memory-safe analog of use-after-free.
    StaleState,
    WeirdStatePair,
    SemanticInconsistency,
    ResourceExhaustion,
}

/// Static metadata for one injected bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BugDescriptor {
    pub id: BugId,
    pub name: &'static str,
    pub class: BugClass,
    pub target: &'static str,
    /// Whether an ideal sanitizer observes the fault once triggered.
    pub detectable: bool,
    pub has_pov: bool,
    /// The trigger predicate sits on a parse path with no checksum or
    /// magic-value guard in front of it.
    pub shallow: bool,
    pub trigger: &'static str,
}

pub const CHUNK_PARSER: &str = "chunk-parser";
pub const KV_PARSER: &str = "kv-parser";

/// Every registered target, in catalog order.
pub const TARGET_NAMES: [&str; 2] = [CHUNK_PARSER, KV_PARSER];

macro_rules! bug {
    ($id:expr, $name:expr, $class:ident, $target:expr, detect = $det:expr, pov = $pov:expr,
     shallow = $sh:expr, $trigger:expr) => {
        BugDescriptor {
            id: BugId($id),
            name: $name,
            class: BugClass::$class,
            target: $target,
            detectable: $det,
            has_pov: $pov,
            shallow: $sh,
            trigger: $trigger,
        }
    };
}

static CATALOG: [BugDescriptor; 14] = [
    bug!(
        0,
        "CHK01",
        IntegerOverflowDivZero,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "32-bit row factor width*channels*(depth>8?2:1)+1+(interlaced?6:0) wraps to zero"
    ),
    bug!(
        1,
        "CHK02",
        OOBRead,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = true,
        "declared chunk length plus CRC runs past the end of the input"
    ),
    bug!(
        2,
        "CHK03",
        IntegerOverflowDivZero,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = true,
        "image data split into rows while the header height is zero"
    ),
    bug!(
        3,
        "CHK04",
        OOBWrite,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "tEXt keyword longer than 79 bytes copied into an 80-byte buffer"
    ),
    bug!(
        4,
        "CHK05",
        MagicValue,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "ancillary chunk type equals the 32-bit tag eXIf, whose buffer is never released"
    ),
    bug!(
        5,
        "CHK06",
        ChecksumGuarded,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "row filter type above 4 in a DATA chunk with a valid CRC"
    ),
    bug!(
        6,
        "CHK07",
        SemanticInconsistency,
        CHUNK_PARSER,
        detect = false,
        pov = true,
        shallow = true,
        "sPAL declared entry count disagrees with the number of stored entries"
    ),
    bug!(
        7,
        "CHK08",
        StaleState,
        CHUNK_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "DATA chunk after STOP reuses the released row buffer"
    ),
    bug!(
        8,
        "KV01",
        WeirdStatePair,
        KV_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "string value of 16 or more bytes copied into a 16-byte label buffer"
    ),
    bug!(
        9,
        "KV02",
        WeirdStatePair,
        KV_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "label length is zero when computing the repeat count"
    ),
    bug!(
        10,
        "KV03",
        ResourceExhaustion,
        KV_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "record nesting deeper than 32 levels"
    ),
    bug!(
        11,
        "KV04",
        IntegerOverflowDivZero,
        KV_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "numeric value times the 24-byte slot size overflows 32 bits"
    ),
    bug!(
        12,
        "KV05",
        StaleState,
        KV_PARSER,
        detect = true,
        pov = true,
        shallow = false,
        "reference to a key that was deleted earlier in the document"
    ),
    bug!(
        13,
        "KV06",
        OOBRead,
        KV_PARSER,
        detect = true,
        pov = false,
        shallow = false,
        "backslash escape as the final byte of the input"
    ),
];

/// Total number of bugs in the suite; the registry size for every target.
pub const SUITE_BUG_COUNT: usize = CATALOG.len();

pub fn catalog() -> &'static [BugDescriptor] {
    &CATALOG
}

pub fn descriptor(id: BugId) -> Option<&'static BugDescriptor> {
    CATALOG.get(id.index())
}

pub fn descriptor_by_name(name: &str) -> Option<&'static BugDescriptor> {
    CATALOG.iter().find(|d| d.name.eq_ignore_ascii_case(name))
}

pub fn bugs_for(target: &str) -> impl Iterator<Item = &'static BugDescriptor> + '_ {
    CATALOG.iter().filter(move |d| d.target == target)
}

/// Mean number of bugs per target.
pub fn bug_density(bugs_per_target: &[usize]) -> f64 {
    if bugs_per_target.is_empty() {
        return 0.0;
    }
    bugs_per_target.iter().sum::<usize>() as f64 / bugs_per_target.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct BugListing {
    pub bugs: Vec<BugDescriptor>,
    pub targets: usize,
    pub density: f64,
}

/// Descriptors for one target (or the whole suite) with the bug density
/// over the selected targets. An unknown target yields an empty listing.
pub fn list_bugs(target: Option<&str>) -> BugListing {
    let targets: Vec<&str> = match target {
        None => TARGET_NAMES.to_vec(),
        Some(t) => TARGET_NAMES.iter().copied().filter(|&n| n == t).collect(),
    };
    let bugs: Vec<BugDescriptor> = CATALOG.iter().filter(|d| targets.contains(&d.target)).cloned().collect();
    let per_target: Vec<usize> = targets.iter().map(|t| bugs.iter().filter(|d| d.target == *t).count()).collect();
    BugListing { targets: targets.len(), density: bug_density(&per_target), bugs }
}
