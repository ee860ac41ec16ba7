//! Tune the penalty until the estimated graph has exactly k edges, then rank
//! them by partial correlation magnitude.
//!
//! ```text
//! cargo run --release --example top_k_edges
//! ```

use robustggm::rng::stream;
use robustggm::sim::{
    generate_scenario, random_concentration, top_k_edges, GraphSpec, Method, MethodSettings, ScenarioSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = random_concentration(&GraphSpec::new(12, 0.15, 3))?;
    let generated = generate_scenario(
        &graph,
        &ScenarioSpec::contaminated_fixed(150, 3, 10, 25.0),
        &mut stream(3, &[1]),
    )?;
    let k = graph.truth.len();
    println!("true edges: {:?}", graph.truth.edges);

    let settings = MethodSettings::default();
    for method in [Method::Glasso, Method::Tlasso] {
        let top = top_k_edges(method, &generated.data, k, &settings)?;
        let hits = top.edges.common(&graph.truth);
        println!(
            "{:<7} rho {:.4}  {hits}/{k} true  tie broken: {}",
            method.name(),
            top.rho,
            top.tie_broken
        );
        for (i, j, m) in top.magnitudes.iter().take(3) {
            println!("    ({i}, {j})  {m:.3}");
        }
    }
    Ok(())
}
