// SPDX-License-Identifier: MIT OR Apache-2.0

//! Grading of steered generations.
//!
//! Each item gets five independent A/B/C votes. The final grade is the
//! majority; if two grades tie for the most votes (a 2-2-1 split) the lower
//! of the two wins. Strict accuracy is the share of A, loose accuracy the
//! share of A or B.
//!
//! [`keyword_judge`] and [`degenerate_detector`] are deterministic stand-ins
//! for an LLM judge so that small runs can be graded offline.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Judge grade. Ordered `C < B < A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Grade {
    /// Unrelated to the instruction, or degenerate output.
    C,
    /// Mentions the instruction but does not fully follow it.
    B,
    /// Fully follows the instruction.
    A,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::A, Grade::B, Grade::C];

    /// Case-sensitive parse of `"A"`, `"B"` or `"C"`.
    pub fn parse(s: &str) -> Option<Grade> {
        match s {
            "A" => Some(Grade::A),
            "B" => Some(Grade::B),
            "C" => Some(Grade::C),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::A => "A",
            Grade::B => "B",
            Grade::C => "C",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exactly five votes for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ballot {
    pub votes: [Grade; 5],
}

impl Ballot {
    pub fn new(votes: &[Grade]) -> Result<Self> {
        let votes: [Grade; 5] = votes
            .try_into()
            .map_err(|_| Error::WrongVoteCount(votes.len()))?;
        Ok(Self { votes })
    }
}

/// Majority grade; a tie for the most votes goes to the lower tied grade.
pub fn aggregate_ballot(ballot: &Ballot) -> Grade {
    let count = |g: Grade| ballot.votes.iter().filter(|&&v| v == g).count();
    let best = Grade::ALL.iter().map(|&g| count(g)).max().unwrap_or(0);
    // ascending order, so the first grade reaching the top count is the lowest
    [Grade::C, Grade::B, Grade::A]
        .into_iter()
        .find(|&g| count(g) == best)
        .expect("some grade holds the maximum")
}

/// Per-grade tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradeCounts {
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: usize,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: usize,
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    pub c: usize,
}

impl GradeCounts {
    pub fn add(&mut self, g: Grade) {
        match g {
            Grade::A => self.a += 1,
            Grade::B => self.b += 1,
            Grade::C => self.c += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.a + self.b + self.c
    }
}

/// Accuracy summary for one experimental condition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub n_items: usize,
    pub strict_acc: f64,
    pub loose_acc: f64,
    pub grade_counts: GradeCounts,
    pub condition_tag: String,
}

/// Strict (A) and loose (A or B) accuracy over final grades.
pub fn accuracies(final_grades: &[Grade], condition_tag: &str) -> Result<EvalReport> {
    if final_grades.is_empty() {
        return Err(Error::Empty("grades"));
    }
    let mut counts = GradeCounts::default();
    for &g in final_grades {
        counts.add(g);
    }
    let n = final_grades.len();
    Ok(EvalReport {
        n_items: n,
        strict_acc: counts.a as f64 / n as f64,
        loose_acc: (counts.a + counts.b) as f64 / n as f64,
        grade_counts: counts,
        condition_tag: condition_tag.into(),
    })
}

/// Pre- vs post-instruction comparison, optionally against the unsteered
/// baseline.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositionReport {
    pub pre_instruction: EvalReport,
    pub post_instruction: EvalReport,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub original: Option<EvalReport>,
}

/// Thresholds for flagging repetitive output.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegeneracyConfig {
    /// n-gram length.
    pub window: usize,
    /// Flag when the share of repeated n-grams exceeds this.
    pub ratio: f64,
    /// Flag when one token repeats this many times in a row.
    pub max_run: usize,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        Self {
            window: 4,
            ratio: 0.5,
            max_run: 8,
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// True when the text is mostly repeated n-grams or one token on a loop.
pub fn degenerate_detector(text: &str, cfg: &DegeneracyConfig) -> bool {
    let window = cfg.window.max(1);
    let tokens = words(text);
    let mut run = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        run = if i > 0 && tokens[i - 1] == *t { run + 1 } else { 1 };
        if run >= cfg.max_run {
            return true;
        }
    }
    if tokens.len() < window {
        return false;
    }
    let mut grams: Vec<&[String]> = tokens.windows(window).collect();
    let total = grams.len();
    grams.sort_unstable();
    grams.dedup();
    let repeated = total - grams.len();
    repeated as f64 / total as f64 > cfg.ratio
}

fn lower_chars(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// Longest common substring; returns `(length, end offset in a)`.
fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize) {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    let mut best = (0, 0);
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            cur[j] = if a[i - 1] == b[j - 1] { prev[j - 1] + 1 } else { 0 };
            if cur[j] > best.0 {
                best = (cur[j], i);
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Share of a variant's length that must be reproduced for an echo.
pub const ECHO_FRACTION: f64 = 0.8;

/// Character spans of `output` that echo one of `instructions`.
pub fn echo_spans(output: &str, instructions: &[String]) -> Vec<(usize, usize)> {
    let out = lower_chars(output);
    instructions
        .iter()
        .filter_map(|ins| {
            let ins = lower_chars(ins);
            if ins.is_empty() {
                return None;
            }
            let (len, end) = longest_common_substring(&out, &ins);
            (len > 0 && len as f64 >= ECHO_FRACTION * ins.len() as f64).then(|| (end - len, end))
        })
        .collect()
}

/// Grade keyword inclusion.
///
/// * `C` if the output is degenerate or never mentions the keyword;
/// * `A` if the keyword (case-insensitive) appears outside any echo of an
///   instruction sentence;
/// * `B` if it only appears inside such an echo.
pub fn keyword_judge(output: &str, keyword: &str, instructions: &[String], cfg: &DegeneracyConfig) -> Grade {
    if degenerate_detector(output, cfg) {
        return Grade::C;
    }
    let out = lower_chars(output);
    let kw = lower_chars(keyword);
    if kw.is_empty() || kw.len() > out.len() {
        return Grade::C;
    }
    let echoes = echo_spans(output, instructions);
    let mut seen = false;
    for start in 0..=out.len() - kw.len() {
        if out[start..start + kw.len()] != kw[..] {
            continue;
        }
        seen = true;
        let end = start + kw.len();
        if !echoes.iter().any(|&(s, e)| s <= start && end <= e) {
            return Grade::A;
        }
    }
    if seen {
        Grade::B
    } else {
        Grade::C
    }
}

/// How a condition's outputs are graded.
#[derive(Debug, Clone, PartialEq)]
pub enum JudgeRule {
    Keyword { keyword: String, degeneracy: DegeneracyConfig },
    /// Only screens for degenerate output: `C` if degenerate, else `A`.
    Degenerate(DegeneracyConfig),
    /// Votes produced offline by an external judge.
    ExternalTranscript { path: String },
}

impl JudgeRule {
    /// Grade one output; `None` for rules that need external votes.
    pub fn grade(&self, output: &str, instructions: &[String]) -> Option<Grade> {
        match self {
            JudgeRule::Keyword { keyword, degeneracy } => {
                Some(keyword_judge(output, keyword, instructions, degeneracy))
            }
            JudgeRule::Degenerate(cfg) => Some(if degenerate_detector(output, cfg) {
                Grade::C
            } else {
                Grade::A
            }),
            JudgeRule::ExternalTranscript { .. } => None,
        }
    }
}
