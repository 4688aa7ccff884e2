//! Review service: the ranked queue, pair details and ego networks over
//! HTTP, plus an append-only verdict log.
//!
//! Routes (all under `/api/v1`):
//!
//! - `GET /pairs?status=&limit=&offset=`
//! - `GET /pairs/{a}/{b}`
//! - `GET /pairs/{a}/{b}/network?radius=`
//! - `POST /pairs/{a}/{b}/verdict` with `{"status", "notes", "reviewer"}`
//! - `GET /stats`

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::detect::{
    read_report_file, summarize, DatasetSummary, DetectError, FlaggedPair, ReportRow,
};
use crate::features::{pair_observations, PairContext, PairObservation};
use crate::graph::{build_graph, ego_network, graph_features, GraphConfig, JsonGraph, SocialGraph};
use crate::ingest::{filter_active_players, load_dir, IngestError};
use crate::model::{Dataset, PairKey, PlayerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Confirmed,
    Rejected,
    Inconclusive,
}

/// One line of the verdict log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair_a: PlayerId,
    pub pair_b: PlayerId,
    pub status: VerdictStatus,
    pub notes: String,
    pub reviewer: String,
    pub timestamp: DateTime<Utc>,
}

impl Verdict {
    fn key(&self) -> Option<PairKey> {
        PairKey::new(self.pair_a.clone(), self.pair_b.clone()).ok()
    }

    fn same_decision(&self, status: VerdictStatus, notes: &str, reviewer: &str) -> bool {
        self.status == status && self.notes == notes && self.reviewer == reviewer
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("verdict log {path}: {source}")]
    Log { path: PathBuf, source: io::Error },
    #[error("verdict log {path} line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Report(#[from] DetectError),
    #[error(transparent)]
    Data(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Append-only verdict history, replayed from the log at startup.
#[derive(Debug)]
pub struct VerdictStore {
    file: File,
    history: HashMap<PairKey, Vec<Verdict>>,
}

impl VerdictStore {
    /// Opens (creating if needed) and replays `path`. A torn final line from
    /// an interrupted write is cut off; any other bad line is an error.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let log_err = |source| ServiceError::Log {
            path: path.to_owned(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(log_err)?;
        let mut history: HashMap<PairKey, Vec<Verdict>> = HashMap::new();
        let mut good_len = 0u64;
        let mut torn: Option<(usize, String)> = None;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(log_err)?;
            if n == 0 {
                break;
            }
            lineno += 1;
            if let Some((at, message)) = torn.take() {
                return Err(ServiceError::CorruptLog {
                    path: path.to_owned(),
                    line: at,
                    message,
                });
            }
            if line.trim().is_empty() {
                good_len += n as u64;
                continue;
            }
            let parsed = serde_json::from_str::<Verdict>(line.trim_end())
                .map_err(|e| e.to_string())
                .and_then(|v| {
                    v.key()
                        .map(|k| (k, v))
                        .ok_or_else(|| "self pair".to_owned())
                });
            match parsed {
                Ok((k, v)) if line.ends_with('\n') => {
                    history.entry(k).or_default().push(v);
                    good_len += n as u64;
                }
                Ok(_) => torn = Some((lineno, "unterminated line".into())),
                Err(e) => torn = Some((lineno, e)),
            }
        }
        if let Some((at, message)) = torn {
            tracing::warn!(line = at, %message, "dropping torn last verdict log line");
            file.set_len(good_len).map_err(log_err)?;
            file.seek(SeekFrom::End(0)).map_err(log_err)?;
        }
        Ok(VerdictStore { file, history })
    }

    pub fn history(&self, pair: &PairKey) -> &[Verdict] {
        self.history.get(pair).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn latest(&self, pair: &PairKey) -> Option<&Verdict> {
        self.history(pair).last()
    }

    pub fn all(&self) -> &HashMap<PairKey, Vec<Verdict>> {
        &self.history
    }

    /// Appends and fsyncs, unless the latest verdict already records the
    /// same decision. Returns the stored verdict and whether it is new.
    pub fn record(
        &mut self,
        pair: &PairKey,
        status: VerdictStatus,
        notes: String,
        reviewer: String,
    ) -> io::Result<(Verdict, bool)> {
        if let Some(last) = self.latest(pair) {
            if last.same_decision(status, &notes, &reviewer) {
                return Ok((last.clone(), false));
            }
        }
        let v = Verdict {
            pair_a: pair.a().clone(),
            pair_b: pair.b().clone(),
            status,
            notes,
            reviewer,
            timestamp: Utc::now().trunc_subsecs(3),
        };
        let mut line = serde_json::to_vec(&v).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.history
            .entry(pair.clone())
            .or_default()
            .push(v.clone());
        Ok((v, true))
    }
}

/// Immutable view of one loaded report and its dataset.
#[derive(Debug)]
pub struct Snapshot {
    report: Vec<FlaggedPair>,
    index: HashMap<PairKey, usize>,
    dataset: Dataset,
    graph: SocialGraph,
    summary: DatasetSummary,
}

impl Snapshot {
    pub fn new(report: Vec<FlaggedPair>, dataset: Dataset) -> Self {
        let index = report
            .iter()
            .enumerate()
            .map(|(i, f)| (f.pair.clone(), i))
            .collect();
        let gcfg = GraphConfig::default();
        let active = filter_active_players(&dataset, 1);
        let graph = build_graph(&dataset, &graph_features(&active, gcfg.min_matches), &gcfg);
        let summary = summarize(&dataset, 3);
        Snapshot {
            report,
            index,
            dataset,
            graph,
            summary,
        }
    }

    pub fn load(report: &Path, data_dir: &Path) -> Result<Self, ServiceError> {
        let report = read_report_file(report)?;
        let dataset = load_dir(data_dir)?.dataset;
        Ok(Snapshot::new(report, dataset))
    }

    fn find(&self, pair: &PairKey) -> Option<&FlaggedPair> {
        self.index.get(pair).map(|&i| &self.report[i])
    }
}

pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    verdicts: Mutex<VerdictStore>,
}

impl AppState {
    pub fn new(snapshot: Option<Snapshot>, verdicts: VerdictStore) -> Arc<Self> {
        Arc::new(AppState {
            snapshot: RwLock::new(snapshot.map(Arc::new)),
            verdicts: Mutex::new(verdicts),
        })
    }

    /// Swaps in a new report; readers holding the old one finish on it.
    pub fn replace_snapshot(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Some(Arc::new(snapshot));
    }

    fn snapshot(&self) -> Result<Arc<Snapshot>, ApiError> {
        self.snapshot
            .read()
            .expect("snapshot lock poisoned")
            .clone()
            .ok_or_else(|| ApiError(StatusCode::CONFLICT, "no detection report loaded".into()))
    }

    fn verdicts(&self) -> std::sync::MutexGuard<'_, VerdictStore> {
        self.verdicts.lock().expect("verdict lock poisoned")
    }
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn pair_key(a: String, b: String) -> Result<PairKey, ApiError> {
    PairKey::new(a, b).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

fn lookup<'s>(snap: &'s Snapshot, pair: &PairKey) -> Result<&'s FlaggedPair, ApiError> {
    snap.find(pair).ok_or_else(|| {
        ApiError(
            StatusCode::NOT_FOUND,
            format!("pair {pair} is not in the report"),
        )
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StatusFilter {
    #[default]
    All,
    Unreviewed,
    /// Unreviewed or inconclusive.
    Open,
    Confirmed,
    Rejected,
    Inconclusive,
}

impl StatusFilter {
    fn admits(self, latest: Option<VerdictStatus>) -> bool {
        match self {
            StatusFilter::All => true,
            StatusFilter::Unreviewed => latest.is_none(),
            StatusFilter::Open => matches!(latest, None | Some(VerdictStatus::Inconclusive)),
            StatusFilter::Confirmed => latest == Some(VerdictStatus::Confirmed),
            StatusFilter::Rejected => latest == Some(VerdictStatus::Rejected),
            StatusFilter::Inconclusive => latest == Some(VerdictStatus::Inconclusive),
        }
    }
}

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 1000;

#[derive(Debug, Deserialize)]
struct PageQuery {
    #[serde(default)]
    status: StatusFilter,
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Debug, Serialize)]
struct QueueEntry {
    #[serde(flatten)]
    row: ReportRow,
    verdict: Option<Verdict>,
}

#[derive(Debug, Serialize)]
struct Page {
    total: usize,
    offset: usize,
    limit: usize,
    entries: Vec<QueueEntry>,
}

async fn list_pairs(
    State(st): State<Arc<AppState>>,
    Query(q): Query<PageQuery>,
) -> Result<Json<Page>, ApiError> {
    let snap = st.snapshot()?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let verdicts = st.verdicts();
    let matching: Vec<&FlaggedPair> = snap
        .report
        .iter()
        .filter(|f| q.status.admits(verdicts.latest(&f.pair).map(|v| v.status)))
        .collect();
    let entries = matching
        .iter()
        .skip(q.offset)
        .take(limit)
        .map(|f| QueueEntry {
            row: ReportRow::from(*f),
            verdict: verdicts.latest(&f.pair).cloned(),
        })
        .collect();
    Ok(Json(Page {
        total: matching.len(),
        offset: q.offset,
        limit,
        entries,
    }))
}

#[derive(Debug, Serialize)]
struct TimelineEntry {
    match_id: String,
    start_time: DateTime<Utc>,
    distance: f64,
    rank_a: u32,
    rank_b: u32,
    rank_diff: Option<u32>,
    match_ordinal_a: u32,
    match_ordinal_b: u32,
}

#[derive(Debug, Serialize)]
struct PairDetail {
    #[serde(flatten)]
    row: ReportRow,
    /// Opponent meetings, time order.
    timeline: Vec<TimelineEntry>,
    /// Matches played on the same team.
    teammate_matches: Vec<TimelineEntry>,
    verdict: Option<Verdict>,
    history: Vec<Verdict>,
}

fn timeline_entry(d: &Dataset, o: PairObservation) -> TimelineEntry {
    let start_time = d
        .find_match(&o.match_id)
        .map(|m| m.start_time)
        .expect("observations come from the dataset");
    TimelineEntry {
        match_id: o.match_id,
        start_time,
        distance: o.distance,
        rank_a: o.rank_a,
        rank_b: o.rank_b,
        rank_diff: o.rank_diff,
        match_ordinal_a: o.match_ordinal_a,
        match_ordinal_b: o.match_ordinal_b,
    }
}

async fn pair_detail(
    State(st): State<Arc<AppState>>,
    UrlPath((a, b)): UrlPath<(String, String)>,
) -> Result<Json<PairDetail>, ApiError> {
    let snap = st.snapshot()?;
    let pair = pair_key(a, b)?;
    let flagged = lookup(&snap, &pair)?;
    let (opp, team): (Vec<_>, Vec<_>) = pair_observations(&snap.dataset, &pair)
        .into_iter()
        .partition(|o| o.context == PairContext::Opponent);
    let history = st.verdicts().history(&pair).to_vec();
    Ok(Json(PairDetail {
        row: ReportRow::from(flagged),
        timeline: opp
            .into_iter()
            .map(|o| timeline_entry(&snap.dataset, o))
            .collect(),
        teammate_matches: team
            .into_iter()
            .map(|o| timeline_entry(&snap.dataset, o))
            .collect(),
        verdict: history.last().cloned(),
        history,
    }))
}

#[derive(Debug, Deserialize)]
struct NetworkQuery {
    radius: Option<usize>,
}

async fn pair_network(
    State(st): State<Arc<AppState>>,
    UrlPath((a, b)): UrlPath<(String, String)>,
    Query(q): Query<NetworkQuery>,
) -> Result<Json<JsonGraph>, ApiError> {
    let snap = st.snapshot()?;
    let pair = pair_key(a, b)?;
    lookup(&snap, &pair)?;
    let ego = ego_network(&snap.graph, &pair, q.radius)
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, e.to_string()))?;
    Ok(Json(JsonGraph::from(&ego)))
}

#[derive(Debug, Deserialize)]
struct VerdictRequest {
    status: VerdictStatus,
    #[serde(default)]
    notes: String,
    #[serde(default)]
    reviewer: String,
}

async fn post_verdict(
    State(st): State<Arc<AppState>>,
    UrlPath((a, b)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<(StatusCode, Json<Verdict>), ApiError> {
    let req: VerdictRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let snap = st.snapshot()?;
    let pair = pair_key(a, b)?;
    lookup(&snap, &pair)?;
    let (v, created) = st
        .verdicts()
        .record(&pair, req.status, req.notes, req.reviewer)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let code = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((code, Json(v)))
}

#[derive(Debug, Serialize)]
struct Stats {
    #[serde(flatten)]
    summary: DatasetSummary,
    flagged_pairs: usize,
    /// Latest verdict per flagged pair; unreviewed pairs under `unreviewed`.
    verdicts: BTreeMap<&'static str, usize>,
}

async fn stats(State(st): State<Arc<AppState>>) -> Result<Json<Stats>, ApiError> {
    let snap = st.snapshot()?;
    let verdicts = st.verdicts();
    let mut tally: BTreeMap<&'static str, usize> =
        ["confirmed", "rejected", "inconclusive", "unreviewed"]
            .map(|k| (k, 0))
            .into();
    for f in &snap.report {
        let k = match verdicts.latest(&f.pair).map(|v| v.status) {
            None => "unreviewed",
            Some(VerdictStatus::Confirmed) => "confirmed",
            Some(VerdictStatus::Rejected) => "rejected",
            Some(VerdictStatus::Inconclusive) => "inconclusive",
        };
        *tally.get_mut(k).expect("all keys present") += 1;
    }
    Ok(Json(Stats {
        summary: snap.summary.clone(),
        flagged_pairs: snap.report.len(),
        verdicts: tally,
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/pairs", get(list_pairs))
        .route("/pairs/{a}/{b}", get(pair_detail))
        .route("/pairs/{a}/{b}/network", get(pair_network))
        .route("/pairs/{a}/{b}/verdict", post(post_verdict))
        .route("/stats", get(stats));
    Router::new().nest("/api/v1", api).with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub report: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub verdicts: PathBuf,
}

pub fn load_state(cfg: &ServiceConfig) -> Result<Arc<AppState>, ServiceError> {
    let snapshot = match (&cfg.report, &cfg.data) {
        (Some(report), Some(data)) => Some(Snapshot::load(report, data)?),
        (Some(report), None) => Some(Snapshot::new(read_report_file(report)?, Dataset::default())),
        (None, _) => None,
    };
    Ok(AppState::new(snapshot, VerdictStore::open(&cfg.verdicts)?))
}

/// Binds, prints `listening on ADDR` to stdout and serves until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let state = load_state(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{run_detection, DetectConfig, Threshold};
    use crate::simulate::{generate, SimConfig};
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use serde_json::Value;
    use tower::ServiceExt;

    fn fixture() -> (Snapshot, tempfile::TempDir) {
        let (d, _) = generate(&SimConfig {
            num_players: 400,
            num_matches: 200,
            colluder_pairs: 3,
            colluder_strength: 1.0,
            seed: 5,
            ..SimConfig::default()
        })
        .unwrap();
        let cfg = DetectConfig {
            threshold: Threshold::TopK(8),
            ..DetectConfig::default()
        };
        let report = run_detection(&d, &cfg).unwrap().report;
        (Snapshot::new(report, d), tempfile::tempdir().unwrap())
    }

    fn app(snap: Option<Snapshot>, dir: &Path) -> Router {
        let store = VerdictStore::open(&dir.join("verdicts.jsonl")).unwrap();
        router(AppState::new(snap, store))
    }

    async fn call(
        app: &Router,
        method: &str,
        uri: &str,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (
            status,
            serde_json::from_slice(&bytes).unwrap_or(Value::Null),
        )
    }

    fn top_pair(snap: &Snapshot) -> (String, String) {
        let p = &snap.report[0].pair;
        (p.a().to_string(), p.b().to_string())
    }

    #[tokio::test]
    async fn no_report_is_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(None, dir.path());
        assert_eq!(
            call(&app, "GET", "/api/v1/pairs", None).await.0,
            StatusCode::CONFLICT
        );
        assert_eq!(
            call(&app, "GET", "/api/v1/stats", None).await.0,
            StatusCode::CONFLICT
        );
    }

    #[tokio::test]
    async fn pagination_and_status_filter() {
        let (snap, dir) = fixture();
        let n = snap.report.len();
        let app = app(Some(snap), dir.path());
        let (code, page) = call(&app, "GET", "/api/v1/pairs?limit=5", None).await;
        assert_eq!(code, StatusCode::OK);
        assert_eq!(page["total"], n);
        let entries = page["entries"].as_array().unwrap();
        assert_eq!(entries.len(), 5);
        let scores: Vec<f64> = entries
            .iter()
            .map(|e| e["anomaly_score"].as_f64().unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[0] <= w[1]));
        for col in [
            "acquaintance",
            "rank_difference",
            "max_consecutive",
            "proximity",
            "num_matches",
        ] {
            assert!(entries[0].get(col).is_some(), "{col}");
        }

        let (_, page) = call(&app, "GET", "/api/v1/pairs?offset=1000", None).await;
        assert_eq!(
            (
                page["total"].as_u64(),
                page["entries"].as_array().unwrap().len()
            ),
            (Some(n as u64), 0)
        );
        let (_, page) = call(&app, "GET", "/api/v1/pairs?status=confirmed", None).await;
        assert_eq!(page["total"], 0);
        let (code, _) = call(&app, "GET", "/api/v1/pairs?status=bogus", None).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
    }

    #[tokio::test]
    async fn detail_is_canonical_and_consistent() {
        let (snap, dir) = fixture();
        let (a, b) = top_pair(&snap);
        let n_opp = snap.report[0].features.num_matches_opp;
        let avg = snap.report[0].features.avg_distance_opp.unwrap();
        let app = app(Some(snap), dir.path());
        let (code, fwd) = call(&app, "GET", &format!("/api/v1/pairs/{a}/{b}"), None).await;
        assert_eq!(code, StatusCode::OK);
        let (_, rev) = call(&app, "GET", &format!("/api/v1/pairs/{b}/{a}"), None).await;
        assert_eq!(fwd, rev);
        let timeline = fwd["timeline"].as_array().unwrap();
        assert_eq!(timeline.len(), n_opp);
        let mean = timeline
            .iter()
            .map(|t| t["distance"].as_f64().unwrap())
            .sum::<f64>()
            / n_opp as f64;
        assert!((mean - avg).abs() < 1e-9);
        let (code, _) = call(&app, "GET", "/api/v1/pairs/nobody/else", None).await;
        assert_eq!(code, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn verdict_lifecycle() {
        let (snap, dir) = fixture();
        let (a, b) = top_pair(&snap);
        let app = app(Some(snap), dir.path());
        let url = format!("/api/v1/pairs/{b}/{a}/verdict");
        let confirm = json!({"status": "confirmed", "notes": "same lobby", "reviewer": "r1"});

        let (code, v) = call(&app, "POST", &url, Some(confirm.clone())).await;
        assert_eq!(code, StatusCode::CREATED);
        assert_eq!(v["pair_a"], a.as_str());
        let (code, _) = call(&app, "POST", &url, Some(confirm)).await;
        assert_eq!(code, StatusCode::OK);
        let (code, _) = call(
            &app,
            "POST",
            &url,
            Some(json!({"status": "rejected", "reviewer": "r2"})),
        )
        .await;
        assert_eq!(code, StatusCode::CREATED);

        let (_, detail) = call(&app, "GET", &format!("/api/v1/pairs/{a}/{b}"), None).await;
        assert_eq!(detail["verdict"]["status"], "rejected");
        assert_eq!(detail["history"].as_array().unwrap().len(), 2);

        let (code, _) = call(&app, "POST", &url, Some(json!({"status": "maybe"}))).await;
        assert_eq!(code, StatusCode::BAD_REQUEST);
        let (code, _) = call(
            &app,
            "POST",
            "/api/v1/pairs/x/y/verdict",
            Some(json!({"status": "confirmed"})),
        )
        .await;
        assert_eq!(code, StatusCode::NOT_FOUND);

        let (_, stats) = call(&app, "GET", "/api/v1/stats", None).await;
        assert_eq!(stats["verdicts"]["rejected"], 1);
        assert!(
            stats["teammates"]["avg_distance"].as_f64()
                < stats["opponents"]["avg_distance"].as_f64()
        );
        let (_, page) = call(&app, "GET", "/api/v1/pairs?status=open", None).await;
        assert_eq!(
            page["total"].as_u64().unwrap() + 1,
            stats["flagged_pairs"].as_u64().unwrap()
        );
    }

    #[tokio::test]
    async fn network_radius() {
        let (snap, dir) = fixture();
        let (a, b) = top_pair(&snap);
        let app = app(Some(snap), dir.path());
        let (code, g0) = call(
            &app,
            "GET",
            &format!("/api/v1/pairs/{a}/{b}/network?radius=0"),
            None,
        )
        .await;
        assert_eq!(code, StatusCode::OK);
        assert_eq!(g0["nodes"].as_array().unwrap().len(), 2);
        let (_, g1) = call(
            &app,
            "GET",
            &format!("/api/v1/pairs/{a}/{b}/network?radius=1"),
            None,
        )
        .await;
        assert!(g1["nodes"].as_array().unwrap().len() >= 2);
        let (code, _) = call(&app, "GET", "/api/v1/pairs/zz/yy/network", None).await;
        assert_eq!(code, StatusCode::NOT_FOUND);
    }

    #[test]
    fn log_replay_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        let p = PairKey::new("a", "b").unwrap();
        {
            let mut s = VerdictStore::open(&path).unwrap();
            s.record(&p, VerdictStatus::Inconclusive, "".into(), "r".into())
                .unwrap();
            s.record(&p, VerdictStatus::Confirmed, "n".into(), "r".into())
                .unwrap();
        }
        let before = std::fs::read(&path).unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(br#"{"pair_a":"a","pair_b":"#)
            .unwrap();
        let mut s = VerdictStore::open(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), before);
        assert_eq!(s.history(&p).len(), 2);
        assert_eq!(s.latest(&p).unwrap().status, VerdictStatus::Confirmed);
        s.record(&p, VerdictStatus::Rejected, "".into(), "r".into())
            .unwrap();
        assert_eq!(VerdictStore::open(&path).unwrap().history(&p).len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        let good = r#"{"pair_a":"a","pair_b":"b","status":"confirmed","notes":"","reviewer":"r","timestamp":"2024-01-01T00:00:00Z"}"#;
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(matches!(
            VerdictStore::open(&path),
            Err(ServiceError::CorruptLog { line: 1, .. })
        ));
    }
}
