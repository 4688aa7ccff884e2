//! Teammate/opponent social network.
//!
//! Nodes are players sized by matches played. Edges exist per pair and kind
//! once the pair shared at least `min_matches` matches in that context, and
//! carry the match count, longest back-to-back run and, for opponents, how
//! close their rank placements were on average. Rendering (colors, opacity,
//! thickness) is left to consumers of the JSON/DOT export.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_pairs, PairContext, PairFeatures};
use crate::ingest::ActiveDataset;
use crate::model::{Dataset, PairKey, PlayerId};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("malformed graph: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Teammate,
    Opponent,
}

impl From<PairContext> for EdgeKind {
    fn from(c: PairContext) -> Self {
        match c {
            PairContext::Teammate => EdgeKind::Teammate,
            PairContext::Opponent => EdgeKind::Opponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialEdge {
    pub pair: PairKey,
    pub kind: EdgeKind,
    pub matches: usize,
    pub max_streak: usize,
    pub avg_rank_diff: Option<f64>,
    /// `max(0, 1 - avg_rank_diff / (T_ref - 1))`; opponents only.
    pub rank_closeness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub matches_played: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialGraph {
    nodes: BTreeMap<PlayerId, NodeInfo>,
    /// Sorted by `(pair, kind)`, at most one per key.
    edges: Vec<SocialEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub min_matches: usize,
    /// Team count used to normalize rank closeness.
    pub reference_teams: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            min_matches: 3,
            reference_teams: 20,
        }
    }
}

pub fn rank_closeness(avg_rank_diff: f64, reference_teams: usize) -> f64 {
    let span = reference_teams.saturating_sub(1).max(1) as f64;
    (1.0 - avg_rank_diff / span).max(0.0)
}

/// Pair rows for every pair qualifying in either context.
pub fn graph_features(active: &ActiveDataset<'_>, min_matches: usize) -> Vec<PairFeatures> {
    let mut rows: BTreeMap<PairKey, PairFeatures> = BTreeMap::new();
    for ctx in [PairContext::Teammate, PairContext::Opponent] {
        for r in extract_pairs(active, min_matches, ctx) {
            rows.entry(r.pair.clone()).or_insert(r);
        }
    }
    rows.into_values().collect()
}

pub fn build_graph(d: &Dataset, features: &[PairFeatures], cfg: &GraphConfig) -> SocialGraph {
    let nodes = d
        .appearances()
        .into_iter()
        .map(|(p, n)| (p, NodeInfo { matches_played: n }))
        .collect();
    let mut edges: BTreeMap<(PairKey, EdgeKind), SocialEdge> = BTreeMap::new();
    for f in features {
        if f.num_matches_team >= cfg.min_matches {
            edges.insert(
                (f.pair.clone(), EdgeKind::Teammate),
                SocialEdge {
                    pair: f.pair.clone(),
                    kind: EdgeKind::Teammate,
                    matches: f.num_matches_team,
                    max_streak: f.max_consecutive_team,
                    avg_rank_diff: None,
                    rank_closeness: None,
                },
            );
        }
        if f.num_matches_opp >= cfg.min_matches {
            edges.insert(
                (f.pair.clone(), EdgeKind::Opponent),
                SocialEdge {
                    pair: f.pair.clone(),
                    kind: EdgeKind::Opponent,
                    matches: f.num_matches_opp,
                    max_streak: f.max_consecutive_opp,
                    avg_rank_diff: f.avg_rank_diff_opp,
                    rank_closeness: f
                        .avg_rank_diff_opp
                        .map(|r| rank_closeness(r, cfg.reference_teams)),
                },
            );
        }
    }
    SocialGraph {
        nodes,
        edges: edges.into_values().collect(),
    }
}

impl SocialGraph {
    pub fn nodes(&self) -> &BTreeMap<PlayerId, NodeInfo> {
        &self.nodes
    }

    pub fn edges(&self) -> &[SocialEdge] {
        &self.edges
    }

    pub fn contains(&self, p: &PlayerId) -> bool {
        self.nodes.contains_key(p)
    }

    pub fn degree(&self, p: &PlayerId) -> usize {
        self.edges.iter().filter(|e| e.pair.contains(p)).count()
    }

    fn adjacency(&self) -> HashMap<&PlayerId, Vec<&PlayerId>> {
        let mut adj: HashMap<&PlayerId, Vec<&PlayerId>> = HashMap::new();
        for e in &self.edges {
            adj.entry(e.pair.a()).or_default().push(e.pair.b());
            adj.entry(e.pair.b()).or_default().push(e.pair.a());
        }
        adj
    }

    fn induced(&self, keep: &BTreeSet<&PlayerId>) -> SocialGraph {
        SocialGraph {
            nodes: self
                .nodes
                .iter()
                .filter(|(p, _)| keep.contains(p))
                .map(|(p, n)| (p.clone(), *n))
                .collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| keep.contains(e.pair.a()) && keep.contains(e.pair.b()))
                .cloned()
                .collect(),
        }
    }
}

/// Connected components over both edge kinds, largest first; equal sizes are
/// ordered by their smallest member.
pub fn clusters(g: &SocialGraph) -> Vec<BTreeSet<PlayerId>> {
    let index: HashMap<&PlayerId, usize> =
        g.nodes.keys().enumerate().map(|(i, p)| (p, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &g.edges {
        let (Some(&a), Some(&b)) = (index.get(e.pair.a()), index.get(e.pair.b())) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<PlayerId>> = BTreeMap::new();
    for (p, &i) in &index {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert((*p).clone());
    }
    let mut out: Vec<BTreeSet<PlayerId>> = groups.into_values().collect();
    out.sort_by(|x, y| {
        y.len()
            .cmp(&x.len())
            .then_with(|| x.first().cmp(&y.first()))
    });
    out
}

/// Subgraph induced by every node within `radius` hops of either player of
/// `pair`; `None` means unbounded.
pub fn ego_network(
    g: &SocialGraph,
    pair: &PairKey,
    radius: Option<usize>,
) -> Result<SocialGraph, GraphError> {
    for p in [pair.a(), pair.b()] {
        if !g.contains(p) {
            return Err(GraphError::UnknownPlayer(p.clone()));
        }
    }
    let adj = g.adjacency();
    let mut seen: BTreeSet<&PlayerId> = [pair.a(), pair.b()].into();
    let mut queue: VecDeque<(&PlayerId, usize)> = [(pair.a(), 0), (pair.b(), 0)].into();
    while let Some((p, hops)) = queue.pop_front() {
        if radius.is_some_and(|r| hops >= r) {
            continue;
        }
        for &q in adj.get(p).into_iter().flatten() {
            if seen.insert(q) {
                queue.push_back((q, hops + 1));
            }
        }
    }
    Ok(g.induced(&seen))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Dot,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonNode {
    id: PlayerId,
    size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    a: PlayerId,
    b: PlayerId,
    kind: EdgeKind,
    weight: usize,
    thickness: usize,
    closeness: Option<f64>,
    avg_rank_diff: Option<f64>,
}

/// Wire form shared by the file export and the HTTP API.
#[derive(Debug, Serialize, Deserialize)]
pub struct JsonGraph {
    nodes: Vec<JsonNode>,
    edges: Vec<JsonEdge>,
}

impl From<&SocialGraph> for JsonGraph {
    fn from(g: &SocialGraph) -> Self {
        JsonGraph {
            nodes: g
                .nodes
                .iter()
                .map(|(p, n)| JsonNode {
                    id: p.clone(),
                    size: n.matches_played,
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| JsonEdge {
                    a: e.pair.a().clone(),
                    b: e.pair.b().clone(),
                    kind: e.kind,
                    weight: e.matches,
                    thickness: e.max_streak,
                    closeness: e.rank_closeness,
                    avg_rank_diff: e.avg_rank_diff,
                })
                .collect(),
        }
    }
}

impl TryFrom<JsonGraph> for SocialGraph {
    type Error = GraphError;

    fn try_from(j: JsonGraph) -> Result<Self, GraphError> {
        let mut nodes = BTreeMap::new();
        for n in j.nodes {
            let id = n.id.clone();
            if nodes
                .insert(
                    n.id,
                    NodeInfo {
                        matches_played: n.size,
                    },
                )
                .is_some()
            {
                return Err(GraphError::Malformed(format!("duplicate node {id}")));
            }
        }
        let mut edges = BTreeMap::new();
        for e in j.edges {
            let pair =
                PairKey::new(e.a, e.b).map_err(|err| GraphError::Malformed(err.to_string()))?;
            for p in [pair.a(), pair.b()] {
                if !nodes.contains_key(p) {
                    return Err(GraphError::UnknownPlayer(p.clone()));
                }
            }
            let edge = SocialEdge {
                pair: pair.clone(),
                kind: e.kind,
                matches: e.weight,
                max_streak: e.thickness,
                avg_rank_diff: e.avg_rank_diff,
                rank_closeness: e.closeness,
            };
            if edges.insert((pair.clone(), e.kind), edge).is_some() {
                return Err(GraphError::Malformed(format!(
                    "duplicate {:?} edge {pair}",
                    e.kind
                )));
            }
        }
        Ok(SocialGraph {
            nodes,
            edges: edges.into_values().collect(),
        })
    }
}

pub fn export_graph(g: &SocialGraph, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => {
            serde_json::to_vec(&JsonGraph::from(g)).expect("graph serialization is infallible")
        }
        ExportFormat::Dot => export_dot(g).into_bytes(),
    }
}

pub fn import_json(bytes: &[u8]) -> Result<SocialGraph, GraphError> {
    let j: JsonGraph =
        serde_json::from_slice(bytes).map_err(|e| GraphError::Malformed(e.to_string()))?;
    j.try_into()
}

fn dot_id(p: &PlayerId) -> String {
    format!(
        "\"{}\"",
        p.as_str().replace('\\', "\\\\").replace('"', "\\\"")
    )
}

fn export_dot(g: &SocialGraph) -> String {
    let mut out = String::from("graph social {\n");
    for (p, n) in &g.nodes {
        let _ = writeln!(out, "  {} [size={}];", dot_id(p), n.matches_played);
    }
    for e in &g.edges {
        let kind = match e.kind {
            EdgeKind::Teammate => "teammate",
            EdgeKind::Opponent => "opponent",
        };
        let _ = write!(
            out,
            "  {} -- {} [kind={kind}, weight={}, thickness={}",
            dot_id(e.pair.a()),
            dot_id(e.pair.b()),
            e.matches,
            e.max_streak
        );
        if let Some(c) = e.rank_closeness {
            let _ = write!(out, ", closeness={c}");
        }
        if let Some(r) = e.avg_rank_diff {
            let _ = write!(out, ", avg_rank_diff={r}");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}
