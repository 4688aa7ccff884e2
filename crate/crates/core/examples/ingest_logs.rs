//! Parse a match log with a few broken records and inspect what was rejected.

use collusion::ingest::{filter_active_players, parse_match_log};

const LOG: &str = r#"{"match_id":"m1","start_time":"2024-03-01T12:00:00.000Z","teams":[{"index":0,"players":["ana","bo"],"rank":1},{"index":1,"players":["cy","dee"],"rank":2}],"landings":{"ana":[100.0,200.0],"bo":[150.0,210.0],"cy":[9000.0,4000.0],"dee":[9100.0,4100.0]}}
{"match_id":"m2","start_time":"2024-03-01T12:30:00.000Z","teams":[{"index":0,"players":["ana","cy"],"rank":1},{"index":1,"players":["bo","dee"],"rank":1}],"landings":{"ana":[0,0],"bo":[1,1],"cy":[2,2],"dee":[3,3]}}
not json at all
{"match_id":"m3","start_time":"2024-03-01T13:00:00.000Z","teams":[{"index":0,"players":["ana","bo"],"rank":2},{"index":1,"players":["cy","dee"],"rank":1}],"landings":{"ana":[0,0],"bo":[5,5],"cy":[70000,70000],"dee":[70010,70010]}}
"#;

fn main() -> anyhow::Result<()> {
    let (dataset, report) = parse_match_log(LOG.as_bytes())?;
    println!(
        "accepted {}, rejected {}, malformed {}",
        report.matches_accepted,
        report.matches_rejected,
        report.malformed_lines.len()
    );
    for (id, violation) in &report.violations {
        println!("  {id}: {violation:?}");
    }
    for (line, err) in &report.malformed_lines {
        println!("  line {line}: {err}");
    }

    let active = filter_active_players(&dataset, 2);
    let names: Vec<&str> = active.active_players().map(|p| p.as_str()).collect();
    println!("players with 2+ matches: {names:?}");
    Ok(())
}
