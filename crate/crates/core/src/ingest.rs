//! Match-log and friendship-list parsing.
//!
//! Match logs are line-delimited JSON, one match per line:
//!
//! ```text
//! {"match_id":"m1","start_time":"2024-05-01T12:00:00.000Z",
//!  "teams":[{"index":0,"players":["p1","p2"],"rank":1}, ...],
//!  "landings":{"p1":[1200.5,830.0], ...}}
//! ```
//!
//! Friendship files are two-column CSV (`player_a,player_b`), header optional.
//! Bad lines are rejected and counted; they never abort a load.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    canonical_pair, validate_match_with, Dataset, MatchRecord, MatchRules, PairKey, PlayerId,
    Position, Team, Violation,
};

pub const MATCHES_FILE: &str = "matches.jsonl";
pub const FRIENDSHIPS_FILE: &str = "friendships.csv";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(
        "empty dataset: no match was accepted ({rejected} rejected, {malformed} malformed lines)"
    )]
    EmptyDataset { rejected: usize, malformed: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub matches_accepted: usize,
    pub matches_rejected: usize,
    pub violations: Vec<(String, Violation)>,
    /// Lines that were not valid match objects at all, as (line number, error).
    pub malformed_lines: Vec<(usize, String)>,
    pub players_seen: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TeamWire {
    index: u32,
    players: Vec<PlayerId>,
    rank: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatchWire {
    match_id: String,
    start_time: String,
    teams: Vec<TeamWire>,
    landings: BTreeMap<PlayerId, [f64; 2]>,
}

fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    let t = DateTime::parse_from_rfc3339(s).map_err(|e| format!("start_time: {e}"))?;
    let millis = t.timestamp_millis();
    DateTime::from_timestamp_millis(millis).ok_or_else(|| "start_time out of range".to_owned())
}

impl MatchWire {
    fn into_record(self) -> Result<MatchRecord, String> {
        Ok(MatchRecord {
            start_time: parse_time(&self.start_time)?,
            match_id: self.match_id,
            teams: self
                .teams
                .into_iter()
                .map(|t| Team {
                    index: t.index,
                    players: t.players,
                    rank: t.rank,
                })
                .collect(),
            landings: self
                .landings
                .into_iter()
                .map(|(p, [x, y])| (p, Position::new(x, y)))
                .collect(),
        })
    }

    fn from_record(m: &MatchRecord) -> Self {
        MatchWire {
            match_id: m.match_id.clone(),
            start_time: format_time(&m.start_time),
            teams: m
                .teams
                .iter()
                .map(|t| TeamWire {
                    index: t.index,
                    players: t.players.clone(),
                    rank: t.rank,
                })
                .collect(),
            landings: m
                .landings
                .iter()
                .map(|(p, pos)| (p.clone(), [pos.x, pos.y]))
                .collect(),
        }
    }
}

/// Serializes one match as a single JSON line (no trailing newline).
pub fn match_to_line(m: &MatchRecord) -> String {
    serde_json::to_string(&MatchWire::from_record(m)).expect("match serialization is infallible")
}

enum LineOutcome {
    Blank,
    Malformed(String),
    Parsed(MatchRecord),
}

fn parse_line(line: &str) -> LineOutcome {
    if line.trim().is_empty() {
        return LineOutcome::Blank;
    }
    match serde_json::from_str::<MatchWire>(line) {
        Ok(w) => match w.into_record() {
            Ok(m) => LineOutcome::Parsed(m),
            Err(e) => LineOutcome::Malformed(e),
        },
        Err(e) => LineOutcome::Malformed(e.to_string()),
    }
}

pub fn parse_match_log<R: Read>(stream: R) -> Result<(Dataset, IngestReport), IngestError> {
    parse_match_log_with(stream, &MatchRules::default())
}

pub fn parse_match_log_with<R: Read>(
    stream: R,
    rules: &MatchRules,
) -> Result<(Dataset, IngestReport), IngestError> {
    let lines: Vec<String> = BufReader::new(stream).lines().collect::<Result<_, _>>()?;
    let outcomes: Vec<LineOutcome> = lines.par_iter().map(|l| parse_line(l)).collect();

    let mut report = IngestReport::default();
    let mut seen_ids = HashSet::new();
    let mut accepted = Vec::new();
    for (lineno, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            LineOutcome::Blank => {}
            LineOutcome::Malformed(e) => report.malformed_lines.push((lineno + 1, e)),
            LineOutcome::Parsed(m) => {
                let mut violations = validate_match_with(&m, rules);
                if seen_ids.contains(&m.match_id) {
                    violations.push(Violation::DuplicateMatchId);
                }
                if violations.is_empty() {
                    seen_ids.insert(m.match_id.clone());
                    accepted.push(m);
                    report.matches_accepted += 1;
                } else {
                    report.matches_rejected += 1;
                    report
                        .violations
                        .extend(violations.into_iter().map(|v| (m.match_id.clone(), v)));
                }
            }
        }
    }

    if accepted.is_empty() {
        return Err(IngestError::EmptyDataset {
            rejected: report.matches_rejected,
            malformed: report.malformed_lines.len(),
        });
    }
    report.players_seen = accepted
        .iter()
        .flat_map(|m| m.players())
        .collect::<HashSet<_>>()
        .len();
    let dataset =
        Dataset::new(accepted, BTreeSet::new()).expect("duplicate match ids are rejected above");
    Ok((dataset, report))
}

pub fn write_match_log<W: Write>(d: &Dataset, mut out: W) -> io::Result<()> {
    for m in d.matches() {
        out.write_all(match_to_line(m).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FriendshipList {
    pub pairs: BTreeSet<PairKey>,
    /// Self-pairs and lines without exactly two non-empty ids.
    pub rejected: usize,
}

pub fn parse_friendships<R: Read>(stream: R) -> Result<FriendshipList, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(stream);
    let mut out = FriendshipList::default();
    for (i, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                out.rejected += 1;
                continue;
            }
        };
        if i == 0 && record.len() == 2 && &record[0] == "player_a" && &record[1] == "player_b" {
            continue;
        }
        if record.len() != 2 || record[0].is_empty() || record[1].is_empty() {
            out.rejected += 1;
            continue;
        }
        match canonical_pair(PlayerId::new(&record[0]), PlayerId::new(&record[1])) {
            Ok(k) => {
                out.pairs.insert(k);
            }
            Err(_) => out.rejected += 1,
        }
    }
    Ok(out)
}

/// Writes pairs as `player_a,player_b` CSV with a header row.
pub fn write_pairs_csv<'a, W: Write>(
    pairs: impl IntoIterator<Item = &'a PairKey>,
    out: W,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["player_a", "player_b"])?;
    for k in pairs {
        w.write_record([k.a().as_str(), k.b().as_str()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub report: IngestReport,
    pub friendships_rejected: usize,
}

/// Loads `matches.jsonl` (and `friendships.csv` when present) from a directory.
/// A missing match log reads as an empty one.
pub fn load_dir(dir: &Path) -> Result<LoadedDataset, IngestError> {
    let match_path = dir.join(MATCHES_FILE);
    let (dataset, report) = match File::open(&match_path) {
        Ok(f) => parse_match_log(f)?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(IngestError::EmptyDataset {
                rejected: 0,
                malformed: 0,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let friends = match File::open(dir.join(FRIENDSHIPS_FILE)) {
        Ok(f) => parse_friendships(f)?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => FriendshipList::default(),
        Err(e) => return Err(e.into()),
    };
    Ok(LoadedDataset {
        dataset: dataset.with_friendships(friends.pairs),
        report,
        friendships_rejected: friends.rejected,
    })
}

/// Writes `matches.jsonl` and `friendships.csv` into `dir`.
pub fn write_dir(d: &Dataset, dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir)?;
    write_match_log(d, BufWriter::new(File::create(dir.join(MATCHES_FILE))?))?;
    write_pairs_csv(
        d.friendships(),
        BufWriter::new(File::create(dir.join(FRIENDSHIPS_FILE))?),
    )
}

/// Players with fewer than `min_matches` appearances are dropped from pair
/// enumeration; matches themselves are untouched.
#[derive(Debug, Clone)]
pub struct ActiveDataset<'a> {
    dataset: &'a Dataset,
    min_matches: usize,
    appearances: BTreeMap<PlayerId, usize>,
}

impl<'a> ActiveDataset<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn min_matches(&self) -> usize {
        self.min_matches
    }

    pub fn is_active(&self, p: &PlayerId) -> bool {
        self.appearances
            .get(p)
            .is_some_and(|&n| n >= self.min_matches)
    }

    pub fn appearances(&self) -> &BTreeMap<PlayerId, usize> {
        &self.appearances
    }

    pub fn active_players(&self) -> impl Iterator<Item = &PlayerId> {
        self.appearances
            .iter()
            .filter(|(_, &n)| n >= self.min_matches)
            .map(|(p, _)| p)
    }

    pub fn active_count(&self) -> usize {
        self.active_players().count()
    }
}

pub fn filter_active_players(d: &Dataset, min_matches: usize) -> ActiveDataset<'_> {
    ActiveDataset {
        dataset: d,
        min_matches: min_matches.max(1),
        appearances: d.appearances(),
    }
}
