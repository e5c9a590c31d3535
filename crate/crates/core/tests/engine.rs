use nalgebra::DMatrix;
use proptest::prelude::*;
use skewmsv::diagnostics::diagnostics;
use skewmsv::order::order_series;
use skewmsv::priors::GammaPrior;
use skewmsv::rng::{stream, Block};
use skewmsv::simulate::{generate_dataset, CovTruth, SeriesTruth, Truth};
use skewmsv::{run_mcmc, McmcSettings, ModelConfig, PriorSet, ReturnsPanel, Variant};

fn truth(k: usize, betas: &[f64]) -> Truth {
    let series = (0..k)
        .map(|i| SeriesTruth { mu: -9.0, phi: 0.97, sigma: 0.15, rho: -0.4, nu: 15.0, beta: betas[i] })
        .collect();
    Truth { series, cov: vec![CovTruth { mu_a: 0.4, phi_a: 0.9, v_a: 0.05 }; k * (k - 1) / 2] }
}

fn panel(k: usize, t: usize, seed: u64) -> ReturnsPanel {
    generate_dataset(&truth(k, &vec![-0.5; k]), t, &mut stream(seed, Block::Simulate, 0)).unwrap().panel
}

fn config(k: usize, variant: Variant, burn_in: usize, draws: usize, seed: u64) -> ModelConfig {
    let mcmc = McmcSettings { burn_in, draws, seed, ..Default::default() };
    ModelConfig::new(k, variant, PriorSet::baseline(), mcmc).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn same_seed_same_chain_any_thread_count() {
    let data = panel(3, 80, 3);
    for variant in [Variant::C, Variant::CSS] {
        let cfg = config(3, variant, 50, 200, 17);
        let a = in_pool(1, || run_mcmc(&cfg, &data).unwrap());
        let b = in_pool(1, || run_mcmc(&cfg, &data).unwrap());
        let c = in_pool(8, || run_mcmc(&cfg, &data).unwrap());
        assert!(a.same_chain(&b));
        assert!(a.same_chain(&c));
        let other = run_mcmc(&config(3, variant, 50, 200, 18), &data).unwrap();
        assert!(!a.same_chain(&other));
    }
}

#[test]
fn variants_fix_the_parameters_they_exclude() {
    let data = panel(3, 60, 4);
    for variant in [Variant::S, Variant::SS, Variant::C, Variant::CS, Variant::CSS] {
        let d = run_mcmc(&config(3, variant, 30, 100, 5), &data).unwrap();
        assert_eq!(d.n_draws(), 100);
        for draw in &d.series {
            for p in draw {
                if !variant.skewed() {
                    assert_eq!(p.beta, 0.0);
                }
                if !variant.sparse() {
                    assert!(p.included || !variant.skewed());
                }
                assert!(p.phi.abs() < 1.0 && p.sigma > 0.0 && p.rho.abs() < 1.0 && p.nu > 4.0);
            }
        }
        for t in &d.terminal {
            if !variant.correlated() {
                assert!(t.a.iter().all(|&a| a == 0.0));
            }
        }
        if variant.correlated() {
            assert!(d.cov.iter().all(|c| c.len() == 3));
        } else {
            assert!(d.cov.iter().all(|c| c.is_empty()));
        }
        if variant.sparse() {
            assert!(d.kappa.iter().all(|&k| k > 0.0 && k < 1.0));
        }
    }
}

#[test]
fn thinning_and_state_summaries() {
    let data = panel(2, 50, 6);
    let mut cfg = config(2, Variant::CS, 20, 300, 7);
    cfg.mcmc.thin = 3;
    cfg.mcmc.state_thin = 10;
    let d = run_mcmc(&cfg, &data).unwrap();
    assert_eq!(d.n_draws(), 100);
    assert_eq!(d.h_summary.paths, 10);
    assert_eq!(d.h_summary.mean.len(), 2);
    assert_eq!(d.a_summary.mean.len(), 1);
    for j in 0..2 {
        for t in 0..50 {
            let s = &d.h_summary;
            assert!(s.q05[j][t] <= s.q50[j][t] && s.q50[j][t] <= s.q95[j][t]);
        }
    }
}

#[test]
fn short_panels_are_rejected() {
    let data = panel(2, 9, 8);
    assert!(run_mcmc(&config(2, Variant::C, 10, 10, 1), &data).is_err());
    assert!(run_mcmc(&config(3, Variant::C, 10, 10, 1), &panel(2, 40, 8)).is_err());
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Rauch-Tung-Striebel smoother of `h` from `ln y²` under the linear
/// Gaussian approximation `ln y² = h + m + e`, `var(e) = r`, using the true
/// AR(1) parameters and moment estimates of `m` and `r`.
fn quasi_likelihood_smoother(y: &[f64], mu: f64, phi: f64, sigma: f64) -> Vec<f64> {
    let x: Vec<f64> = y.iter().map(|v| (v * v).max(1e-300).ln()).collect();
    let n = x.len();
    let state_var = sigma * sigma / (1.0 - phi * phi);
    let xm = x.iter().sum::<f64>() / n as f64;
    let m = xm - mu;
    let r = (x.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / (n - 1) as f64 - state_var).max(1.0);
    let q = sigma * sigma;
    let (mut a_pred, mut p_pred) = (vec![0.0; n], vec![0.0; n]);
    let (mut a_filt, mut p_filt) = (vec![0.0; n], vec![0.0; n]);
    let (mut a, mut p) = (mu, state_var);
    for t in 0..n {
        a_pred[t] = a;
        p_pred[t] = p;
        let gain = p / (p + r);
        a_filt[t] = a + gain * (x[t] - m - a);
        p_filt[t] = (1.0 - gain) * p;
        a = mu + phi * (a_filt[t] - mu);
        p = phi * phi * p_filt[t] + q;
    }
    let mut smooth = a_filt.clone();
    for t in (0..n - 1).rev() {
        let j = p_filt[t] * phi / p_pred[t + 1];
        smooth[t] = a_filt[t] + j * (smooth[t + 1] - a_pred[t + 1]);
    }
    smooth
}

#[test]
fn log_volatility_path_is_recovered() {
    let (mu, phi, sigma) = (-9.0, 0.98, 0.15);
    let truth = Truth { series: vec![SeriesTruth { mu, phi, sigma, rho: -0.4, nu: 20.0, beta: -0.5 }], cov: vec![] };
    let sim = generate_dataset(&truth, 1000, &mut stream(21, Block::Simulate, 0)).unwrap();
    let mut cfg = config(1, Variant::S, 1000, 2000, 22);
    // weak prior on the state noise so the truth is not in its tail
    cfg.priors.sigma_prec = GammaPrior { shape: 2.0, rate: 0.02 };
    let d = run_mcmc(&cfg, &sim.panel).unwrap();
    let r = correlation(&d.h_summary.mean[0], &sim.states.h[0]);
    let oracle = correlation(&quasi_likelihood_smoother(sim.panel.series(0), mu, phi, sigma), &sim.states.h[0]);
    assert!(r > 0.7 && r > oracle - 0.02, "posterior {r}, linearized smoother {oracle}");
}

#[test]
fn chain_diagnostics_cover_every_trace() {
    let data = panel(2, 80, 9);
    let d = run_mcmc(&config(2, Variant::CSS, 100, 400, 10), &data).unwrap();
    let diag = diagnostics(&d);
    assert_eq!(diag.params.len(), d.traces().len());
    assert!(diag.params.iter().all(|p| p.ess > 0.0 && p.ess.is_finite()));
    assert!(d.acceptance.rates.iter().all(|(_, r)| (0.0..=1.0).contains(r)));
}

#[test]
fn ordering_sorts_by_posterior_skewness() {
    let mut t = truth(3, &[0.0, -1.5, 1.5]);
    // heavier tails make the mixing variable, and so the skewness, informative
    t.series.iter_mut().for_each(|s| s.nu = 8.0);
    let sim = generate_dataset(&t, 1000, &mut stream(31, Block::Simulate, 0)).unwrap();
    let cfg = config(3, Variant::CS, 300, 600, 32);
    let ord = in_pool(1, || order_series(&sim.panel, &cfg).unwrap());
    assert_eq!(ord.permutation, vec![1, 0, 2], "{:?}", ord.beta_means);
    assert!(ord.beta_means[1] < ord.beta_means[0] && ord.beta_means[0] < ord.beta_means[2]);
    assert_eq!(in_pool(4, || order_series(&sim.panel, &cfg).unwrap()), ord);
    let permuted = sim.panel.permute(&ord.permutation).unwrap();
    assert_eq!(permuted.series(0), sim.panel.series(1));
}

#[test]
fn ordering_one_series_is_the_identity() {
    let p = panel(1, 200, 5);
    let ord = order_series(&p, &config(1, Variant::S, 50, 50, 6)).unwrap();
    assert_eq!(ord.permutation, vec![0]);
    assert!(ord.beta_means[0].is_finite());
}

#[test]
fn ordering_puts_the_skewed_series_first() {
    let mut t = truth(2, &[0.0, -1.0]);
    t.series.iter_mut().for_each(|s| s.nu = 8.0);
    let reps = 10;
    let first = (0..reps)
        .filter(|&r| {
            let sim = generate_dataset(&t, 1000, &mut stream(40, Block::Simulate, r)).unwrap();
            order_series(&sim.panel, &config(2, Variant::CS, 300, 600, 41 + r)).unwrap().permutation[0] == 1
        })
        .count();
    assert!(first * 5 >= reps as usize * 4, "skewed series first in {first}/{reps}");
}

#[test]
fn permuting_twice_composes() {
    let p = panel(3, 50, 9);
    let perm = vec![2, 0, 1];
    let composed: Vec<usize> = perm.iter().map(|&j| perm[j]).collect();
    assert_eq!(p.permute(&perm).unwrap().permute(&perm).unwrap(), p.permute(&composed).unwrap());
}

#[test]
fn non_finite_returns_are_rejected() {
    let mut y = DMatrix::from_element(40, 2, 0.001);
    y[(3, 1)] = f64::NAN;
    let p = ReturnsPanel::from_matrix(y);
    // non-finite input is rejected at construction
    assert!(p.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Short chains on arbitrary-scale returns, including exact zeros,
    /// keep every parameter finite and inside its support.
    #[test]
    fn sweeps_stay_in_support(seed in any::<u64>(), scale in -12.0f64..2.0, zeros in 0usize..20) {
        let k = 2;
        let mut y = DMatrix::from_fn(30, k, |t, i| {
            let u = ((seed ^ (t as u64 * 31 + i as u64)).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64;
            (u - 0.5) * scale.exp()
        });
        for t in 0..zeros {
            y[(t, t % k)] = 0.0;
        }
        let data = ReturnsPanel::from_matrix(y).unwrap();
        let d = run_mcmc(&config(k, Variant::CSS, 20, 40, seed), &data).unwrap();
        for draw in &d.series {
            for p in draw {
                prop_assert!(p.mu.is_finite() && p.beta.is_finite());
                prop_assert!(p.phi.abs() < 1.0 && p.sigma > 0.0 && p.sigma.is_finite());
                prop_assert!(p.rho.abs() < 1.0 && p.nu > 4.0 && p.nu.is_finite());
            }
        }
        prop_assert!(d.terminal.iter().all(|t| t.h.iter().chain(&t.eps).chain(&t.a).all(|v| v.is_finite())));
    }
}
