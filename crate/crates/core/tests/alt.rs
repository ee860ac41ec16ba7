use robustggm::alt_t::{alt_tlasso_fit, gibbs_mh_estep, AltTParams, McmcConfig};
use robustggm::data::Dataset;
use robustggm::linalg::SpdMatrix;
use robustggm::rng::stream;
use robustggm::sim::{generate_scenario, random_concentration, GraphSpec, ScenarioSpec};
use robustggm::t_model::{em_fit_mle, sample_t, TParams};
use robustggm::tlasso::TlassoConfig;

#[test]
fn single_coordinate_matches_t_mle() {
    let truth = TParams::new(vec![2.0], SpdMatrix::from_diag(&[3.0]), 4.0).unwrap();
    let data = sample_t(&truth, 400, &mut stream(21, &[])).unwrap();
    let mle = em_fit_mle(&data, 4.0, 1e-10, 2000).unwrap();
    let config = TlassoConfig {
        nu: 4.0,
        max_em_iter: 40,
        ..TlassoConfig::default()
    };
    let mcmc = McmcConfig {
        k_samples: 400,
        seed: 1,
        theta_tol: 0.0,
        ..McmcConfig::default()
    };
    let fit = alt_tlasso_fit(&data, &config, &mcmc).unwrap();
    // With one coordinate the proposal is the exact conditional.
    assert_eq!(fit.tau_stats.acceptance, vec![1.0]);
    let psi = mle.params.psi.get(0, 0);
    assert!(
        (fit.mu_hat[0] - mle.params.mu[0]).abs() < 0.02 * psi.sqrt(),
        "{} vs {}",
        fit.mu_hat[0],
        mle.params.mu[0]
    );
    assert!(
        (fit.psi_hat.get(0, 0) - psi).abs() < 0.03 * psi,
        "{} vs {psi}",
        fit.psi_hat.get(0, 0)
    );
}

#[test]
fn contaminated_cells_are_downweighted() {
    let graph = random_concentration(&GraphSpec::new(6, 0.3, 11)).unwrap();
    let generated = generate_scenario(
        &graph,
        &ScenarioSpec::contaminated_fixed(80, 2, 8, 10.0),
        &mut stream(11, &[1]),
    )
    .unwrap();
    let data = &generated.data;
    let config = TlassoConfig {
        rho: 0.1 * data.n() as f64,
        max_em_iter: 20,
        ..TlassoConfig::default()
    };
    let fit = alt_tlasso_fit(data, &config, &McmcConfig::default()).unwrap();
    let (mut dirty, mut clean) = (Vec::new(), Vec::new());
    for i in 0..data.n() {
        for j in 0..data.p() {
            let w = fit.tau_stats.tau_mean(i, j);
            if generated.is_contaminated(i, j) {
                dirty.push(w)
            } else {
                clean.push(w)
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert_eq!(dirty.len(), 16);
    assert!(
        mean(&dirty) < 0.5 * mean(&clean),
        "{} vs {}",
        mean(&dirty),
        mean(&clean)
    );
}

#[test]
fn fit_is_reproducible_from_seed() {
    let data = Dataset::from_rows(
        &(0..30)
            .map(|i| {
                let x = i as f64;
                vec![(x * 0.7).sin(), (x * 1.3).cos(), (x * 0.4).sin() + 0.1 * x]
            })
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let config = TlassoConfig {
        rho: 1.0,
        max_em_iter: 5,
        ..TlassoConfig::default()
    };
    let run = |seed| {
        alt_tlasso_fit(
            &data,
            &config,
            &McmcConfig {
                seed,
                ..McmcConfig::default()
            },
        )
        .unwrap()
    };
    let (a, b, c) = (run(3), run(3), run(4));
    assert_eq!(a, b);
    assert_ne!(a.theta_hat, c.theta_hat);
}

#[test]
fn second_moments_are_consistent() {
    let params = AltTParams::new(
        vec![0.0; 3],
        SpdMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.4 }),
        5.0,
    )
    .unwrap();
    let data = Dataset::from_rows(&[vec![0.1, 2.0, -0.5], vec![6.0, 0.2, 0.3]]).unwrap();
    let theta = robustggm::linalg::spd_inverse(&params.psi).unwrap();
    let stats = gibbs_mh_estep(
        &data,
        &params,
        &theta,
        &McmcConfig {
            k_samples: 200,
            ..McmcConfig::default()
        },
    )
    .unwrap();
    for m in &stats.second_moments {
        // E[√τ_a √τ_b]² <= E[τ_a] E[τ_b] holds exactly for sample averages.
        for a in 0..3 {
            for b in 0..3 {
                assert!(m.get(a, b) > 0.0);
                assert!(m.get(a, b).powi(2) <= m.get(a, a) * m.get(b, b) * (1.0 + 1e-12));
            }
        }
    }
    assert!(stats.tau_mean(1, 0) < stats.tau_mean(0, 0));
    assert!(stats.acceptance.iter().all(|a| (0.0..=1.0).contains(a)));
}
