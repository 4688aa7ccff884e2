//! Build the teammate/opponent graph, list its largest clusters and export
//! the neighborhood of one planted pair as DOT.

use collusion::graph::{
    build_graph, clusters, ego_network, export_graph, graph_features, ExportFormat, GraphConfig,
};
use collusion::ingest::filter_active_players;
use collusion::simulate::{generate, SimConfig};

fn main() -> anyhow::Result<()> {
    let (dataset, truth) = generate(&SimConfig {
        colluder_pairs: 3,
        colluder_strength: 1.0,
        seed: 11,
        ..SimConfig::default()
    })?;
    let cfg = GraphConfig::default();
    let active = filter_active_players(&dataset, 1);
    let graph = build_graph(&dataset, &graph_features(&active, cfg.min_matches), &cfg);
    println!(
        "{} nodes, {} edges",
        graph.nodes().len(),
        graph.edges().len()
    );

    let comps = clusters(&graph);
    let sizes: Vec<usize> = comps.iter().take(5).map(|c| c.len()).collect();
    let singletons = comps.iter().filter(|c| c.len() == 1).count();
    println!(
        "{} clusters ({singletons} isolated players), largest sizes {sizes:?}",
        comps.len()
    );

    let pair = truth
        .colluding_pairs
        .first()
        .expect("three pairs were planted");
    let ego = ego_network(&graph, pair, Some(1))?;
    println!(
        "\n{pair}: {} neighbors within one hop, {} edges among them",
        ego.nodes().len() - 2,
        ego.edges().len()
    );
    let core = ego_network(&graph, pair, Some(0))?;
    print!(
        "{}",
        String::from_utf8(export_graph(&core, ExportFormat::Dot))?
    );
    Ok(())
}
