//! Glasso against tlasso on heavy-tailed data.
//!
//! ```text
//! cargo run --release --example tlasso_outliers
//! ```

use robustggm::rng::stream;
use robustggm::sim::{
    generate_scenario, random_concentration, roc_curve, GraphSpec, Method, MethodSettings, RhoGrid, ScenarioSpec,
};
use robustggm::tlasso::{tlasso_fit, TlassoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = random_concentration(&GraphSpec::new(15, 0.1, 5))?;
    let generated = generate_scenario(&graph, &ScenarioSpec::student_t(150, 3.0), &mut stream(5, &[1]))?;
    let data = &generated.data;

    // One tlasso fit. The penalty multiplies the observed log-likelihood, so
    // it scales with n.
    let config = TlassoConfig {
        rho: 0.05 * data.n() as f64,
        ..TlassoConfig::default()
    };
    let fit = tlasso_fit(data, &config, None)?;
    let trace = &fit.penalized_loglik_trace;
    println!(
        "tlasso: {} EM iterations, penalized loglik {:.2} -> {:.2}",
        fit.em_iterations,
        trace[0],
        fit.penalized_loglik()
    );
    let low = fit.weights.tau.iter().filter(|&&t| t < 0.3).count();
    println!("rows with weight below 0.3: {low} of {}", data.n());

    let settings = MethodSettings::default();
    let grid = RhoGrid::log_relative(20, 0.01);
    for method in [Method::Glasso, Method::Tlasso] {
        let curve = roc_curve(method, data, &graph.truth, &grid, &settings)?;
        println!("{:<7} AUC {:.3}", method.name(), curve.auc);
    }
    Ok(())
}
