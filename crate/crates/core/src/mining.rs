//! Closed sequential pattern mining over contour symbol sequences, per-dialect
//! pattern dictionaries, and audio segment cutting.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::signal::AudioClip;

/// Default minimum pattern length.
pub const DEFAULT_MIN_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDB {
    pub sequences: Vec<(String, Vec<i32>)>,
    pub alphabet: BTreeSet<i32>,
}

impl SequenceDB {
    pub fn new(sequences: Vec<(String, Vec<i32>)>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::Mining("empty sequence database".into()));
        }
        if sequences.iter().any(|(_, s)| s.is_empty()) {
            return Err(Error::Mining("empty sequence in database".into()));
        }
        let alphabet = sequences
            .iter()
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        Ok(SequenceDB {
            sequences,
            alphabet,
        })
    }

    pub fn from_contours(contours: &[Contour]) -> Result<Self> {
        let sequences: Vec<(String, Vec<i32>)> = contours
            .iter()
            .filter(|c| !c.symbols.is_empty())
            .map(|c| (c.source_id.clone(), c.symbols.clone()))
            .collect();
        SequenceDB::new(sequences)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    pub symbols: Vec<i32>,
    pub support: u32,
}

/// Minimum support: an absolute sequence count or a fraction of the DB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportSpec {
    Absolute(u32),
    Fraction(f64),
}

impl Default for SupportSpec {
    fn default() -> Self {
        SupportSpec::Fraction(0.01)
    }
}

impl SupportSpec {
    /// Resolve against a DB size; fractions floor at 2 sequences.
    pub fn resolve(&self, db_size: usize) -> u32 {
        match *self {
            SupportSpec::Absolute(s) => s,
            SupportSpec::Fraction(f) => ((f * db_size as f64).ceil() as u32).max(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub min_support: SupportSpec,
    pub min_len: usize,
    pub k: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: SupportSpec::default(),
            min_len: DEFAULT_MIN_LEN,
            k: crate::contour::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDictionary {
    pub dialect: String,
    pub config: MiningConfigResolved,
    pub patterns: Vec<Pattern>,
}

/// Mining config with the support threshold resolved to a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningConfigResolved {
    pub min_support: u32,
    pub min_len: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternInstance {
    pub symbols: Vec<i32>,
    pub source_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub dialect: String,
}

impl PatternInstance {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Does `seq` contain `pat` as a (not necessarily contiguous) subsequence?
fn contains_subsequence(seq: &[i32], pat: &[i32]) -> bool {
    let mut pi = 0;
    for &s in seq {
        if pi < pat.len() && s == pat[pi] {
            pi += 1;
        }
    }
    pi == pat.len()
}

fn sequence_support(db: &SequenceDB, pat: &[i32], candidates: &[usize]) -> u32 {
    candidates
        .iter()
        .filter(|&&i| contains_subsequence(&db.sequences[i].1, pat))
        .count() as u32
}

struct Miner<'a> {
    db: &'a SequenceDB,
    min_support: u32,
    min_len: usize,
    out: Vec<Pattern>,
}

impl<'a> Miner<'a> {
    /// DFS over frequent prefixes with pseudo-projections; `proj` holds
    /// (sequence index, next scan position) per supporting sequence.
    fn grow(&mut self, prefix: &mut Vec<i32>, proj: &[(usize, usize)]) {
        let support = proj.len() as u32;
        if !prefix.is_empty() && prefix.len() >= self.min_len && self.is_closed(prefix, proj, support)
        {
            self.out.push(Pattern {
                symbols: prefix.clone(),
                support,
            });
        }
        // Locally frequent extension items, in deterministic order.
        let mut counts: std::collections::BTreeMap<i32, u32> = std::collections::BTreeMap::new();
        for &(si, pos) in proj {
            let mut seen = BTreeSet::new();
            for &item in &self.db.sequences[si].1[pos..] {
                seen.insert(item);
            }
            for item in seen {
                *counts.entry(item).or_insert(0) += 1;
            }
        }
        for (item, count) in counts {
            if count < self.min_support {
                continue;
            }
            let next: Vec<(usize, usize)> = proj
                .iter()
                .filter_map(|&(si, pos)| {
                    self.db.sequences[si].1[pos..]
                        .iter()
                        .position(|&s| s == item)
                        .map(|off| (si, pos + off + 1))
                })
                .collect();
            prefix.push(item);
            self.grow(prefix, &next);
            prefix.pop();
        }
    }

    /// Bi-directional extension closure: a pattern is closed iff no single
    /// item can be inserted at any position (prepend, between, append)
    /// without dropping support. Anti-monotonicity makes the single-item
    /// check sufficient for all super-sequences.
    fn is_closed(&self, prefix: &[i32], proj: &[(usize, usize)], support: u32) -> bool {
        let candidates: Vec<usize> = proj.iter().map(|&(si, _)| si).collect();
        let mut extended = Vec::with_capacity(prefix.len() + 1);
        for pos in 0..=prefix.len() {
            for &item in &self.db.alphabet {
                extended.clear();
                extended.extend_from_slice(&prefix[..pos]);
                extended.push(item);
                extended.extend_from_slice(&prefix[pos..]);
                if sequence_support(self.db, &extended, &candidates) == support {
                    return false;
                }
            }
        }
        true
    }
}

/// Frequent closed sequential patterns of length >= `min_len` under
/// sequence-level support.
pub fn bide_mine(db: &SequenceDB, min_support: u32, min_len: usize) -> Result<Vec<Pattern>> {
    if min_support == 0 {
        return Err(Error::Mining("min_support must be > 0".into()));
    }
    if min_len == 0 {
        return Err(Error::Mining("min_len must be > 0".into()));
    }
    let mut miner = Miner {
        db,
        min_support,
        min_len,
        out: Vec::new(),
    };
    let root: Vec<(usize, usize)> = (0..db.sequences.len()).map(|i| (i, 0)).collect();
    miner.grow(&mut Vec::new(), &root);
    let mut out = miner.out;
    sort_patterns(&mut out);
    Ok(out)
}

/// Deterministic order: support desc, length desc, lexicographic.
pub fn sort_patterns(patterns: &mut [Pattern]) {
    patterns.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.symbols.len().cmp(&a.symbols.len()))
            .then(a.symbols.cmp(&b.symbols))
    });
}

/// Mine one dialect's dictionary from its contours.
pub fn build_dictionary(
    contours: &[Contour],
    dialect: &str,
    cfg: &MiningConfig,
) -> Result<PatternDictionary> {
    if contours.is_empty() {
        return Err(Error::Mining(format!("no contours for dialect {dialect}")));
    }
    let db = SequenceDB::from_contours(contours)?;
    let min_support = cfg.min_support.resolve(db.sequences.len());
    let patterns = bide_mine(&db, min_support, cfg.min_len)?;
    Ok(PatternDictionary {
        dialect: dialect.to_string(),
        config: MiningConfigResolved {
            min_support,
            min_len: cfg.min_len,
            k: cfg.k,
        },
        patterns,
    })
}

/// Earliest-minimal-window subsequence matches, left to right,
/// non-overlapping; spans in seconds of the underlying audio.
pub fn locate_occurrences(pattern: &[i32], contour: &Contour) -> Vec<(f64, f64)> {
    let syms = &contour.symbols;
    let m = pattern.len();
    let mut spans = Vec::new();
    if m == 0 || syms.len() < m {
        return spans;
    }
    let mut from = 0usize;
    while from < syms.len() {
        // Greedy forward match starting at `from`.
        let mut pi = 0usize;
        let mut end = None;
        for (i, &s) in syms.iter().enumerate().skip(from) {
            if s == pattern[pi] {
                pi += 1;
                if pi == m {
                    end = Some(i);
                    break;
                }
            }
        }
        let Some(end) = end else { break };
        // Shrink: latest start so that pattern still fits ending at `end`.
        let mut pj = m;
        let mut start = end;
        for i in (from..=end).rev() {
            if pj > 0 && syms[i] == pattern[pj - 1] {
                pj -= 1;
                start = i;
                if pj == 0 {
                    break;
                }
            }
        }
        let window_len = end - start + 1;
        let (s, e) = contour.window_span(start, window_len);
        spans.push((s, e));
        from = end + 1;
    }
    spans
}

/// Locate every dictionary pattern in the given contours, deduplicating
/// near-duplicate spans (overlap > 50% of the shorter) per source utterance.
pub fn locate_instances(
    dictionary: &PatternDictionary,
    contours: &[Contour],
) -> Vec<PatternInstance> {
    let mut instances: Vec<PatternInstance> = Vec::new();
    for contour in contours {
        let mut local: Vec<PatternInstance> = Vec::new();
        for pattern in &dictionary.patterns {
            for (start_s, end_s) in locate_occurrences(&pattern.symbols, contour) {
                local.push(PatternInstance {
                    symbols: pattern.symbols.clone(),
                    source_id: contour.source_id.clone(),
                    start_s,
                    end_s,
                    dialect: dictionary.dialect.clone(),
                });
            }
        }
        local.sort_by(|a, b| {
            a.start_s
                .partial_cmp(&b.start_s)
                .unwrap()
                .then(a.end_s.partial_cmp(&b.end_s).unwrap())
        });
        let mut kept: Vec<PatternInstance> = Vec::new();
        for cand in local {
            let dup = kept.iter().any(|k| {
                let overlap = (cand.end_s.min(k.end_s) - cand.start_s.max(k.start_s)).max(0.0);
                let shorter = cand.duration_s().min(k.duration_s());
                shorter > 0.0 && overlap / shorter > 0.5
            });
            if !dup {
                kept.push(cand);
            }
        }
        instances.extend(kept);
    }
    instances
}

/// Cut the audio spans of pattern instances out of a clip, verbatim.
pub fn cut_segments(clip: &AudioClip, instances: &[PatternInstance]) -> Result<Vec<AudioClip>> {
    let sr = clip.sample_rate as f64;
    let dur = clip.duration_s();
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        if inst.start_s < 0.0 || inst.end_s > dur + 1e-9 || inst.start_s >= inst.end_s {
            return Err(Error::SpanOutOfBounds {
                source_id: clip.source_id.clone(),
                start_s: inst.start_s,
                end_s: inst.end_s,
                dur_s: dur,
            });
        }
        let a = (inst.start_s * sr).round() as usize;
        let b = ((inst.end_s * sr).round() as usize).min(clip.samples.len());
        let mut child = AudioClip::new(
            clip.samples[a..b].to_vec(),
            clip.sample_rate,
            clip.source_id.clone(),
        )?;
        child.span = Some((inst.start_s, inst.end_s));
        out.push(child);
    }
    Ok(out)
}

pub fn write_dictionary_json(dict: &PatternDictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), dict)?;
    Ok(())
}

pub fn read_dictionary_json(path: impl AsRef<Path>) -> Result<PatternDictionary> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// TSV: `dialect<TAB>source_id<TAB>start_s<TAB>end_s<TAB>symbols`.
pub fn write_instances_tsv(instances: &[PatternInstance], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for inst in instances {
        let syms: Vec<String> = inst.symbols.iter().map(|s| s.to_string()).collect();
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{:.6}\t{}",
            inst.dialect,
            inst.source_id,
            inst.start_s,
            inst.end_s,
            syms.join(",")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
