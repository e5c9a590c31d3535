//! Acceptance gate: one PASS/FAIL line per criterion and a summary line.
//! The verdicts are the lines themselves, so the rest of the workspace suite
//! still runs after a FAIL; set `ACCEPTANCE_STRICT=1` to exit non-zero on
//! any failure.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use skewmsv::forecast::{recursive_forecast, ForecastPlan};
use skewmsv::geweke::{geweke_joint_test_with, GewekeOptions, GewekeReport, Mutation};
use skewmsv::model::{LatentStates, SparsityState};
use skewmsv::portfolio::{kupiec_test, minvar_portfolio, target_portfolio, PortfolioInputs};
use skewmsv::priors::{BetaPrior, NormalPrior};
use skewmsv::rng::{stream, Block};
use skewmsv::samplers::covariance::{ffbs, RowObservations};
use skewmsv::samplers::skewness::draw_kappa;
use skewmsv::samplers::SweepContext;
use skewmsv::simulate::{generate_dataset, skewness_study, BetaConfig, CovTruth, SeriesTruth, SimScenario, Truth};
use skewmsv::stats::{mean, quantile_sorted, sorted, variance};
use skewmsv::{run_mcmc, CovParams, McmcSettings, ModelConfig, PriorSet, SeriesParams, Variant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn skewness_reproduction() -> Outcome {
    let scenarios: Vec<_> = BetaConfig::ALL.iter().map(|&c| SimScenario::reference(c, 200)).collect();
    let rows = match skewness_study(&scenarios, 2024) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let near_zero = |m: f64| m > -0.15 && m < 0.15;
    let skewed = |m: f64| m < -0.2;
    let mut pass = true;
    let mut means = Vec::new();
    for r in &rows {
        let ok = match (r.config.as_str(), r.series) {
            ("i", _) => near_zero(r.mean),
            ("ii", _) | ("iii", _) => skewed(r.mean),
            ("iv", 1 | 2) => near_zero(r.mean),
            ("iv", _) => skewed(r.mean),
            _ => false,
        };
        pass &= ok;
        means.push(format!("{}{}={:.2}", r.config, r.series, r.mean));
    }
    outcome(pass, means.join(" "))
}

/// Parameters named by the criterion; `mu[i]`, `phi_a[j]` and `v_a[j]`
/// are reported but not gated.
fn gated(name: &str) -> bool {
    ["phi[", "sigma[", "rho[", "nu[", "beta[", "kappa", "mu_a["].iter().any(|p| name.starts_with(p))
}

fn min_gated_p(r: &GewekeReport) -> (f64, String) {
    r.rows
        .iter()
        .filter(|row| gated(&row.name))
        .map(|row| (row.p_value, row.name.clone()))
        .fold((1.0, String::new()), |a, b| if b.0 < a.0 { b } else { a })
}

fn geweke_suite() -> Outcome {
    let mcmc = McmcSettings { seed: 7, ..Default::default() };
    let cfg = ModelConfig::new(2, Variant::CSS, PriorSet::baseline(), mcmc).unwrap();
    let sweeps = 100_000;
    let clean = geweke_joint_test_with(&cfg, sweeps, &GewekeOptions::default());
    let broken =
        geweke_joint_test_with(&cfg, sweeps, &GewekeOptions { mutation: Some(Mutation::SigmaOffByTwo), ..Default::default() });
    match (clean, broken) {
        (Ok(c), Ok(b)) => {
            let (pc, nc) = min_gated_p(&c);
            let (pb, nb) = min_gated_p(&b);
            let pass = pc > 0.01 && pb < 0.01;
            outcome(pass, format!("min p {pc:.3} ({nc}); mutated sampler min p {pb:.2e} ({nb})"))
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

/// Dense Gaussian posterior of one AR(1) covariance state under diagonal
/// observation noise.
fn dense_smoother(obs: &RowObservations, q: &CovParams) -> (DVector<f64>, DVector<f64>) {
    let n = obs.yhat.len();
    let w = q.v_a * q.v_a;
    let mut prec = DMatrix::zeros(n, n);
    for t in 0..n {
        prec[(t, t)] = if t == 0 || t == n - 1 { 1.0 } else { 1.0 + q.phi_a * q.phi_a } / w;
        if t + 1 < n {
            prec[(t, t + 1)] = -q.phi_a / w;
            prec[(t + 1, t)] = -q.phi_a / w;
        }
    }
    let mut rhs = &prec * DVector::from_element(n, q.mu_a);
    for t in 0..n {
        let x = obs.x[t][0];
        prec[(t, t)] += x * x / obs.var[t];
        rhs[t] += x * obs.yhat[t] / obs.var[t];
    }
    let cov = prec.try_inverse().unwrap();
    (&cov * rhs, cov.diagonal())
}

fn ffbs_oracle() -> Outcome {
    let n = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let x: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_element(1, 0.5 + rng.random::<f64>())).collect();
    let yhat: Vec<f64> = (0..n).map(|t| 0.4 * x[t][0] + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let var: Vec<f64> = (0..n).map(|t| 0.05 + 0.1 * (t % 3) as f64).collect();
    let obs = RowObservations { yhat, x, var };
    let q = CovParams { mu_a: 0.2, phi_a: 0.9, v_a: 0.15 };
    let (exact, exact_var) = dense_smoother(&obs, &q);
    let draws = 50_000;
    let mut srng = stream(8, Block::CovStates, 1);
    let mut a = vec![vec![0.0; n]];
    let mut sums = vec![0.0; n];
    for _ in 0..draws {
        if let Err(e) = ffbs(1, &obs, &[q], &mut a, &mut srng) {
            return outcome(false, e.to_string());
        }
        for t in 0..n {
            sums[t] += a[0][t];
        }
    }
    let worst = (0..n)
        .map(|t| (sums[t] / draws as f64 - exact[t]).abs() / (exact_var[t] / draws as f64).sqrt())
        .fold(0.0, f64::max);
    outcome(worst < 3.0, format!("max |mean - exact| = {worst:.2} SE over {n} time points"))
}

fn quadrature_log_bf(u: &[f64], h: &[f64], z: &[f64], p: &SeriesParams, slab: &NormalPrior) -> f64 {
    let n = u.len();
    let c = p.nu / (p.nu - 2.0);
    let lik = |beta: f64| -> f64 {
        (0..n)
            .map(|t| {
                let (m, v) = if t + 1 < n {
                    let eta = h[t + 1] - p.mu - p.phi * (h[t] - p.mu);
                    (p.rho * eta / p.sigma, 1.0 - p.rho * p.rho)
                } else {
                    (0.0, 1.0)
                };
                -0.5 * (u[t] - beta * (z[t] - c) - z[t].sqrt() * m).powi(2) / (z[t] * v)
            })
            .sum()
    };
    let base = lik(0.0);
    let (lo, hi, steps) = (-40.0, 40.0, 400_000);
    let dx = (hi - lo) / steps as f64;
    let total: f64 = (0..=steps)
        .map(|i| {
            let b = lo + i as f64 * dx;
            let prior = (-0.5 * (b - slab.mean).powi(2) / slab.var).exp() / (2.0 * std::f64::consts::PI * slab.var).sqrt();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * prior * (lik(b) - base).exp()
        })
        .sum();
    (total * dx).ln()
}

fn spike_slab_oracle() -> Outcome {
    let h: Vec<f64> = vec![-0.3, 0.1, -0.2, 0.25, 0.05];
    let z = vec![0.6, 1.9, 0.8, 1.3, 2.4];
    let y = vec![-0.9, -1.7, 0.4, -0.2, -2.1];
    let p = SeriesParams { mu: 0.0, phi: 0.9, sigma: 0.3, rho: -0.4, nu: 8.0, beta: 0.0, included: false };
    let kappa = 0.4;
    let priors = PriorSet::baseline();
    let u: Vec<f64> = y.iter().zip(&h).map(|(y, h)| y * (-0.5 * h).exp()).collect();
    let bf = quadrature_log_bf(&u, &h, &z, &p, &priors.beta_slab).exp();
    let expect = kappa * bf / (kappa * bf + 1.0 - kappa);

    let states = LatentStates::new(vec![h], vec![z], vec![]).unwrap();
    let sparsity = Some(SparsityState::new(kappa).unwrap());
    let mut ctx = SweepContext::new(Variant::SS, priors, vec![y], states, vec![p], vec![], sparsity, 41, 40).unwrap();
    let n = 100_000;
    let hits: usize = (0..n)
        .map(|s| {
            ctx.sample_beta(s);
            ctx.series[0].params.included as usize
        })
        .sum();
    let freq = hits as f64 / n as f64;
    let freq_ok = (freq - expect).abs() < 0.02;

    let prior = BetaPrior { a: 2.0, b: 2.0 };
    let mut rng = stream(3, Block::Sparsity, 0);
    let mut worst: f64 = 0.0;
    for (n1, k) in [(1usize, 5usize), (5, 5), (0, 3)] {
        let draws: Vec<f64> = (0..100_000).map(|_| draw_kappa(&prior, n1, k, &mut rng)).collect();
        let (a, b) = (prior.a + n1 as f64, prior.b + (k - n1) as f64);
        let m = a / (a + b);
        let v = a * b / ((a + b).powi(2) * (a + b + 1.0));
        let sq: Vec<f64> = draws.iter().map(|x| (x - m).powi(2)).collect();
        let z_mean = (mean(&draws) - m).abs() / (variance(&draws) / draws.len() as f64).sqrt();
        let z_var = (mean(&sq) - v).abs() / (variance(&sq) / sq.len() as f64).sqrt();
        worst = worst.max(z_mean).max(z_var);
    }
    outcome(
        freq_ok && worst < 3.0,
        format!("inclusion {freq:.4} vs quadrature {expect:.4}; kappa moments within {worst:.2} SE"),
    )
}

fn parameter_recovery() -> Outcome {
    let series: Vec<_> = [-1.0, 0.0, 0.0]
        .iter()
        .map(|&beta| SeriesTruth { mu: -9.5, phi: 0.95, sigma: 0.025, rho: -0.4, nu: 20.0, beta })
        .collect();
    let truth = Truth { series: series.clone(), cov: vec![CovTruth { mu_a: 0.3, phi_a: 0.95, v_a: 0.02 }; 3] };
    let reps = 25;
    let results: Vec<Result<([usize; 4], bool), String>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let d = generate_dataset(&truth, 1000, &mut stream(5, Block::Simulate, r as u64)).map_err(|e| e.to_string())?;
            let mcmc = McmcSettings { burn_in: 1000, draws: 2000, seed: 500 + r as u64, ..Default::default() };
            let cfg = ModelConfig::new(3, Variant::CSS, PriorSet::baseline(), mcmc).map_err(|e| e.to_string())?;
            let fit = run_mcmc(&cfg, &d.panel).map_err(|e| e.to_string())?;
            let mut cover = [0usize; 4];
            for (i, s) in series.iter().enumerate() {
                let fields: [(f64, fn(&SeriesParams) -> f64); 4] =
                    [(s.mu, |p| p.mu), (s.phi, |p| p.phi), (s.sigma, |p| p.sigma), (s.rho, |p| p.rho)];
                for (j, (tv, f)) in fields.iter().enumerate() {
                    let xs = sorted(&fit.series.iter().map(|d| f(&d[i])).collect::<Vec<_>>());
                    if quantile_sorted(&xs, 0.05) <= *tv && *tv <= quantile_sorted(&xs, 0.95) {
                        cover[j] += 1;
                    }
                }
            }
            let inc: Vec<f64> = (0..3).map(|i| fit.inclusion_probability(i)).collect();
            Ok((cover, inc[0] > 0.5 && inc[1] < 0.5 && inc[2] < 0.5))
        })
        .collect();
    let mut cover = [0usize; 4];
    let mut selected = 0;
    for r in results {
        match r {
            Ok((c, s)) => {
                (0..4).for_each(|j| cover[j] += c[j]);
                selected += s as usize;
            }
            Err(e) => return outcome(false, e),
        }
    }
    let n = 3 * reps;
    let rates: Vec<f64> = cover.iter().map(|&c| c as f64 / n as f64).collect();
    let sel = selected as f64 / reps as f64;
    let pass = rates.iter().all(|&r| r >= 0.8) && sel >= 0.8;
    outcome(
        pass,
        format!(
            "90% coverage mu {:.2} phi {:.2} sigma {:.2} rho {:.2}; correct selection {:.2}",
            rates[0], rates[1], rates[2], rates[3], sel
        ),
    )
}

fn kupiec_arithmetic() -> Outcome {
    let a = kupiec_test(30, 500, 0.05).unwrap();
    let b = kupiec_test(12, 500, 0.01).unwrap();
    let c = kupiec_test(5, 500, 0.01).unwrap();
    let pass = (a.p_value - 0.32).abs() <= 0.005 && (0.005..=0.01).contains(&b.p_value) && c.lr == 0.0;
    outcome(pass, format!("p(30,500,5%) = {:.4}; p(12,500,1%) = {:.4}; LR(5,500,1%) = {}", a.p_value, b.p_value, c.lr))
}

fn kkt_weights(inp: &PortfolioInputs, m: f64) -> DVector<f64> {
    let k = inp.g.len();
    let mut lhs = DMatrix::zeros(k + 2, k + 2);
    lhs.view_mut((0, 0), (k, k)).copy_from(&(&inp.d * 2.0));
    for i in 0..k {
        lhs[(i, k)] = inp.g[i];
        lhs[(k, i)] = inp.g[i];
        lhs[(i, k + 1)] = 1.0;
        lhs[(k + 1, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 2);
    rhs[k] = m;
    rhs[k + 1] = 1.0;
    lhs.lu().solve(&rhs).unwrap().rows(0, k).into_owned()
}

fn portfolio_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut worst_oracle, mut worst_constraint) = (0.0f64, 0.0f64);
    let mut beaten = 0;
    for n in 0..100 {
        let k = 2 + n % 7;
        let b = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.01);
        let mut d = &b * b.transpose();
        (0..k).for_each(|i| d[(i, i)] += 1e-5);
        let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal) * 3e-4);
        let inp = PortfolioInputs::new(g, d).unwrap();
        let m = 1e-4;
        let (w, mv) = match (target_portfolio(&inp, m), minvar_portfolio(&inp.d)) {
            (Ok(w), Ok(mv)) => (w, mv),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
        };
        let oracle = kkt_weights(&inp, m);
        worst_oracle = worst_oracle.max((&w - &oracle).amax() / oracle.amax().max(1.0));
        worst_constraint = worst_constraint.max((w.sum() - 1.0).abs()).max((w.dot(&inp.g) - m).abs());
        let best = (mv.transpose() * &inp.d * &mv)[(0, 0)];
        for _ in 0..1000 {
            let mut v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = v.sum();
            if s.abs() < 1e-3 {
                continue;
            }
            v /= s;
            if (v.transpose() * &inp.d * &v)[(0, 0)] < best * (1.0 - 1e-12) {
                beaten += 1;
            }
        }
    }
    let pass = worst_oracle < 1e-6 && worst_constraint < 1e-8 && beaten == 0;
    outcome(
        pass,
        format!("oracle gap {worst_oracle:.1e}; constraint gap {worst_constraint:.1e}; random portfolios beating min-variance {beaten}"),
    )
}

fn forecasting_sanity() -> Outcome {
    let reps = 20;
    let totals: Vec<Result<f64, String>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let series = vec![SeriesTruth { mu: -9.0, phi: 0.995, sigma: 0.05, rho: -0.5, nu: 20.0, beta: -1.0 }; 2];
            let truth = Truth { series, cov: vec![CovTruth { mu_a: 1.0, phi_a: 0.0, v_a: 0.0 }] };
            let d = generate_dataset(&truth, 320, &mut stream(11, Block::Simulate, r as u64)).map_err(|e| e.to_string())?;
            let mcmc = McmcSettings { burn_in: 300, draws: 1000, seed: 100 + r as u64, ..Default::default() };
            let configs: Vec<_> = [Variant::CS, Variant::S]
                .iter()
                .map(|&v| ModelConfig::new(2, v, PriorSet::baseline(), mcmc.clone()).unwrap())
                .collect();
            let plan = ForecastPlan { initial: 300, step: 20, refits: 1, d_max: 20 };
            let archive = recursive_forecast(&plan, &configs, &d.panel).map_err(|e| e.to_string())?;
            if let Some(e) = archive.refits.iter().find_map(|s| s.error.clone()) {
                return Err(e);
            }
            Ok(archive.lpdr(0, 1).map_err(|e| e.to_string())?.total)
        })
        .collect();
    let mut positive = 0;
    for t in totals {
        match t {
            Ok(v) => positive += (v > 0.0) as usize,
            Err(e) => return outcome(false, e),
        }
    }
    outcome(positive * 5 >= reps * 4, format!("cumulative LPDR of the true variant positive in {positive}/{reps}"))
}

fn determinism() -> Outcome {
    let truth = Truth {
        series: vec![SeriesTruth { mu: -9.0, phi: 0.97, sigma: 0.1, rho: -0.4, nu: 12.0, beta: -0.5 }; 3],
        cov: vec![CovTruth { mu_a: 0.3, phi_a: 0.9, v_a: 0.05 }; 3],
    };
    let data = generate_dataset(&truth, 140, &mut stream(1, Block::Simulate, 0)).unwrap().panel;
    let mcmc = McmcSettings { burn_in: 100, draws: 400, seed: 99, ..Default::default() };
    let cfg = ModelConfig::new(3, Variant::CSS, PriorSet::baseline(), mcmc.clone()).unwrap();
    let s_cfg = ModelConfig::new(3, Variant::S, PriorSet::baseline(), mcmc).unwrap();
    let plan = ForecastPlan { initial: 120, step: 5, refits: 4, d_max: 5 };
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let run = |n: usize| {
        pool(n).install(|| {
            let fit = run_mcmc(&cfg, &data).unwrap();
            let archive = recursive_forecast(&plan, &[cfg.clone(), s_cfg.clone()], &data).unwrap();
            let study = skewness_study(&[SimScenario::shared(BetaConfig::III, 3, 200, 16)], 5).unwrap();
            (fit, archive, study)
        })
    };
    let (f1, a1, s1) = run(1);
    let (f1b, a1b, s1b) = run(1);
    let (f8, a8, s8) = run(8);
    let repeat = f1.same_chain(&f1b) && a1 == a1b && s1 == s1b;
    let threads = f1.same_chain(&f8) && a1 == a8 && s1 == s8;
    outcome(repeat && threads, format!("repeat run identical: {repeat}; 1 vs 8 workers identical: {threads}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("skewness reproduction", skewness_reproduction),
        ("Geweke joint-distribution suite", geweke_suite),
        ("FFBS oracle", ffbs_oracle),
        ("spike-and-slab oracle", spike_slab_oracle),
        ("parameter recovery", parameter_recovery),
        ("Kupiec arithmetic", kupiec_arithmetic),
        ("portfolio correctness", portfolio_correctness),
        ("forecasting sanity", forecasting_sanity),
        ("determinism and parallel invariance", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mut run, mut failed) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        run += 1;
        failed += !o.pass as usize;
        println!("{verdict} criterion {id}: {name} ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
    }
    println!("acceptance: {} of {run} criteria pass", run - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
