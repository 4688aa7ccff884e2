//! Domain types shared by every stage of the pipeline.
//!
//! Distances are in game units on a planar map, ranks are 1-based with rank 1
//! the winning team, and match ordering is `(start_time, match_id)`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid pair: a player cannot be paired with itself ({0})")]
    InvalidPair(PlayerId),
    #[error("duplicate match id {0}")]
    DuplicateMatchId(String),
}

/// Opaque, case-sensitive player identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_owned())
    }
}

impl From<String> for PlayerId {
    fn from(s: String) -> Self {
        PlayerId(s)
    }
}

/// A team only exists relative to one match.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TeamRef {
    pub match_id: String,
    pub team_index: u32,
}

/// Landing position in game units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Straight-line distance.
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub index: u32,
    pub players: Vec<PlayerId>,
    /// Final placement; the first team eliminated in a T-team match ranks T.
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub match_id: String,
    pub start_time: DateTime<Utc>,
    pub teams: Vec<Team>,
    pub landings: BTreeMap<PlayerId, Position>,
}

impl MatchRecord {
    pub fn team_count(&self) -> usize {
        self.teams.len()
    }

    pub fn players(&self) -> impl Iterator<Item = &PlayerId> {
        self.teams.iter().flat_map(|t| t.players.iter())
    }

    pub fn team_of(&self, player: &PlayerId) -> Option<&Team> {
        self.teams.iter().find(|t| t.players.contains(player))
    }
}

/// Unordered player pair; the canonical form keeps `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    a: PlayerId,
    b: PlayerId,
}

impl PairKey {
    pub fn new(a: impl Into<PlayerId>, b: impl Into<PlayerId>) -> Result<Self, ModelError> {
        canonical_pair(a.into(), b.into())
    }

    pub fn a(&self) -> &PlayerId {
        &self.a
    }

    pub fn b(&self) -> &PlayerId {
        &self.b
    }

    pub fn contains(&self, player: &PlayerId) -> bool {
        &self.a == player || &self.b == player
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

pub fn canonical_pair(a: PlayerId, b: PlayerId) -> Result<PairKey, ModelError> {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Ok(PairKey { a, b }),
        std::cmp::Ordering::Greater => Ok(PairKey { a: b, b: a }),
        std::cmp::Ordering::Equal => Err(ModelError::InvalidPair(a)),
    }
}

/// Matches sorted by `(start_time, match_id)` plus the platform friendship list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    matches: Vec<MatchRecord>,
    friendships: BTreeSet<PairKey>,
}

impl Dataset {
    pub fn new(
        mut matches: Vec<MatchRecord>,
        friendships: BTreeSet<PairKey>,
    ) -> Result<Self, ModelError> {
        let mut seen = HashSet::with_capacity(matches.len());
        for m in &matches {
            if !seen.insert(m.match_id.as_str()) {
                return Err(ModelError::DuplicateMatchId(m.match_id.clone()));
            }
        }
        matches.sort_by(|x, y| {
            x.start_time
                .cmp(&y.start_time)
                .then_with(|| x.match_id.cmp(&y.match_id))
        });
        Ok(Dataset {
            matches,
            friendships,
        })
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn friendships(&self) -> &BTreeSet<PairKey> {
        &self.friendships
    }

    pub fn with_friendships(mut self, friendships: BTreeSet<PairKey>) -> Self {
        self.friendships = friendships;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Number of matches each player appears in.
    pub fn appearances(&self) -> BTreeMap<PlayerId, usize> {
        let mut counts = BTreeMap::new();
        for m in &self.matches {
            for p in m.players() {
                *counts.entry(p.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn find_match(&self, match_id: &str) -> Option<&MatchRecord> {
        self.matches.iter().find(|m| m.match_id == match_id)
    }
}

/// One broken [`MatchRecord`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyMatchId,
    DuplicateMatchId,
    NoTeams,
    DuplicateTeamIndex { index: u32 },
    TeamTooSmall { index: u32, size: usize, min: usize },
    EmptyPlayerId,
    DuplicateRoster { player: PlayerId },
    DuplicateRank { rank: u32 },
    RankOutOfRange { rank: u32, teams: usize },
    MissingLanding { player: PlayerId },
    UnrosteredLanding { player: PlayerId },
    NonFinitePosition { player: PlayerId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyMatchId => write!(f, "empty match id"),
            Violation::DuplicateMatchId => write!(f, "match id already seen"),
            Violation::NoTeams => write!(f, "match has no teams"),
            Violation::DuplicateTeamIndex { index } => write!(f, "duplicate team index {index}"),
            Violation::TeamTooSmall { index, size, min } => {
                write!(f, "team {index} has {size} players, minimum is {min}")
            }
            Violation::EmptyPlayerId => write!(f, "empty player id"),
            Violation::DuplicateRoster { player } => {
                write!(f, "player {player} appears on more than one roster slot")
            }
            Violation::DuplicateRank { rank } => write!(f, "rank {rank} assigned to several teams"),
            Violation::RankOutOfRange { rank, teams } => {
                write!(f, "rank {rank} outside 1..={teams}")
            }
            Violation::MissingLanding { player } => write!(f, "no landing for {player}"),
            Violation::UnrosteredLanding { player } => {
                write!(f, "landing given for unrostered player {player}")
            }
            Violation::NonFinitePosition { player } => {
                write!(f, "non-finite landing position for {player}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchRules {
    pub min_team_size: usize,
}

impl Default for MatchRules {
    fn default() -> Self {
        MatchRules { min_team_size: 2 }
    }
}

/// Checks a match against the record invariants with the default rules.
pub fn validate_match(m: &MatchRecord) -> Vec<Violation> {
    validate_match_with(m, &MatchRules::default())
}

pub fn validate_match_with(m: &MatchRecord, rules: &MatchRules) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.match_id.is_empty() {
        out.push(Violation::EmptyMatchId);
    }
    if m.teams.is_empty() {
        out.push(Violation::NoTeams);
        return out;
    }

    let mut indices = HashSet::new();
    let mut ranks = HashSet::new();
    let mut rostered = HashSet::new();
    let team_count = m.teams.len();
    for team in &m.teams {
        if !indices.insert(team.index) {
            out.push(Violation::DuplicateTeamIndex { index: team.index });
        }
        if team.players.len() < rules.min_team_size {
            out.push(Violation::TeamTooSmall {
                index: team.index,
                size: team.players.len(),
                min: rules.min_team_size,
            });
        }
        if team.rank < 1 || team.rank as usize > team_count {
            out.push(Violation::RankOutOfRange {
                rank: team.rank,
                teams: team_count,
            });
        } else if !ranks.insert(team.rank) {
            out.push(Violation::DuplicateRank { rank: team.rank });
        }
        for p in &team.players {
            if p.as_str().is_empty() {
                out.push(Violation::EmptyPlayerId);
            } else if !rostered.insert(p) {
                out.push(Violation::DuplicateRoster { player: p.clone() });
            }
        }
    }

    for p in m.players() {
        match m.landings.get(p) {
            None => {
                let v = Violation::MissingLanding { player: p.clone() };
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            Some(pos) if !pos.is_finite() => {
                let v = Violation::NonFinitePosition { player: p.clone() };
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            Some(_) => {}
        }
    }
    for p in m.landings.keys() {
        if !rostered.contains(p) {
            out.push(Violation::UnrosteredLanding { player: p.clone() });
        }
    }
    out
}
