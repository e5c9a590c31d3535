use nalgebra::DMatrix;
use proptest::prelude::*;
use skewmsv::model::a_inverse;
use skewmsv::rng::{stream, Block};
use skewmsv::simulate::{generate_dataset, skewness_study, BetaConfig, CovTruth, SeriesTruth, SimScenario, Truth};
use skewmsv::stats::{mean, variance};

/// Population skewness of `y_i = Σ_j L_ij λ_j w_j` for the study design:
/// the skew-t cumulants of each `w_j` combined through `L = A^{-1}`, times
/// the factor `exp(3 s² / 8)` contributed by a Gaussian log-variance with
/// stationary variance `s²` shared by all series.
fn population_skewness(betas: &[f64], a: f64, nu: f64, state_var: f64) -> Vec<f64> {
    let k = betas.len();
    let (shape, scale) = (nu / 2.0, nu / 2.0);
    let c = scale / (shape - 1.0);
    let var_z = c * c / (shape - 2.0);
    let mu3_z = 4.0 * scale.powi(3) / ((shape - 1.0).powi(3) * (shape - 2.0) * (shape - 3.0));
    let l: DMatrix<f64> = a_inverse(&vec![a; k * (k - 1) / 2]).unwrap();
    let factor = (3.0 * state_var / 8.0).exp();
    (0..k)
        .map(|i| {
            let (mut k2, mut k3) = (0.0, 0.0);
            for (j, &b) in betas.iter().enumerate() {
                let w = l[(i, j)];
                k2 += w * w * (b * b * var_z + c);
                k3 += w.powi(3) * (b.powi(3) * mu3_z + 3.0 * b * var_z);
            }
            factor * k3 / k2.powf(1.5)
        })
        .collect()
}

#[test]
fn study_means_track_population_skewness() {
    let scenarios: Vec<_> = BetaConfig::ALL.iter().map(|&c| SimScenario::reference(c, 200)).collect();
    let rows = skewness_study(&scenarios, 2024).unwrap();
    let state_var = 0.05f64.powi(2) / (1.0 - 0.995f64.powi(2));
    for (ci, cfg) in BetaConfig::ALL.iter().enumerate() {
        let pop = population_skewness(&cfg.betas(5), 0.5, 20.0, state_var);
        for i in 0..5 {
            let r = &rows[ci * 5 + i];
            assert_eq!(r.series, i + 1);
            assert!((r.mean - pop[i]).abs() < 0.04, "config {} series {}: {} vs {}", r.config, i + 1, r.mean, pop[i]);
            assert!(r.q10 <= r.q25 && r.q25 <= r.q75 && r.q75 <= r.q90);
        }
    }
}

#[test]
fn inherited_skewness_decays_with_dilution() {
    let state_var = 0.25;
    let iii = population_skewness(&BetaConfig::III.betas(5), 0.5, 20.0, state_var);
    let iv = population_skewness(&BetaConfig::IV.betas(5), 0.5, 20.0, state_var);
    assert!(iii.iter().all(|&s| s < -0.1));
    assert_eq!(&iv[..2], &[0.0, 0.0]);
    assert!(iv[2] < iv[3] && iv[3] < iv[4] && iv[4] < 0.0);
}

#[test]
fn structural_shocks_have_the_stated_moments() {
    let truth = Truth {
        series: vec![SeriesTruth { mu: -9.0, phi: 0.9, sigma: 0.2, rho: -0.6, nu: 12.0, beta: -1.0 }; 2],
        cov: vec![CovTruth { mu_a: 0.3, phi_a: 0.8, v_a: 0.1 }],
    };
    let d = generate_dataset(&truth, 100_000, &mut stream(3, Block::Simulate, 0)).unwrap();
    let eps = &d.eps[0];
    let eta = &d.eta[0];
    assert!(mean(eps).abs() < 0.02 && (variance(eps) - 1.0).abs() < 0.02);
    assert!((variance(eta) - 0.04).abs() < 0.002);
    let corr = eps.iter().zip(eta).map(|(e, n)| e * n).sum::<f64>() / eps.len() as f64 / 0.2;
    assert!((corr + 0.6).abs() < 0.02, "{corr}");
    let c = 12.0 / 10.0;
    assert!((mean(&d.states.z[0]) - c).abs() < 0.01);
    let a = &d.states.a[0];
    assert!((mean(a) - 0.3).abs() < 0.02);
    assert!((variance(a) - 0.01 / 0.36).abs() < 0.003);
}

#[test]
fn reproducible_streams() {
    let sc = SimScenario::reference(BetaConfig::II, 1);
    let a = generate_dataset(&sc.truth, 50, &mut stream(1, Block::Simulate, 0)).unwrap();
    let b = generate_dataset(&sc.truth, 50, &mut stream(1, Block::Simulate, 0)).unwrap();
    let c = generate_dataset(&sc.truth, 50, &mut stream(1, Block::Simulate, 1)).unwrap();
    assert_eq!(a.panel, b.panel);
    assert_ne!(a.panel, c.panel);
}

#[test]
fn invalid_truths_are_rejected() {
    let mut sc = SimScenario::reference(BetaConfig::I, 1);
    sc.truth.series[0].nu = 4.0;
    assert!(generate_dataset(&sc.truth, 10, &mut stream(1, Block::Simulate, 0)).is_err());
    let mut sc = SimScenario::reference(BetaConfig::I, 1);
    sc.truth.cov.pop();
    assert!(generate_dataset(&sc.truth, 10, &mut stream(1, Block::Simulate, 0)).is_err());
    assert!(generate_dataset(&SimScenario::reference(BetaConfig::I, 1).truth, 0, &mut stream(1, Block::Simulate, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any valid truth yields a finite panel of the requested length.
    #[test]
    fn simulated_panels_are_finite(seed in any::<u64>(), k in 1usize..5, t in 1usize..60, beta in -2.0f64..2.0, a in -1.0f64..1.0) {
        let series = vec![SeriesTruth { mu: -9.0, phi: 0.95, sigma: 0.2, rho: -0.5, nu: 10.0, beta }; k];
        let truth = Truth { series, cov: vec![CovTruth { mu_a: a, phi_a: 0.5, v_a: 0.1 }; k * (k - 1) / 2] };
        let d = generate_dataset(&truth, t, &mut stream(seed, Block::Simulate, 0)).unwrap();
        prop_assert_eq!(d.panel.t(), t);
        prop_assert!(d.panel.returns().iter().all(|v| v.is_finite()));
    }
}
