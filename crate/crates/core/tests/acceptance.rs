//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL` line
//! straight to stdout so the verdicts show up without `--nocapture`.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use slipinv::basis::{binomial, OutputLabel, PcBasis, PcExpansion};
use slipinv::config::PipelineConfig;
use slipinv::design::{smolyak_grid_with, DesignKind, Growth, SlipVector};
use slipinv::fit::{bpdn_solve, cross_validate_delta, log_spaced_deltas, nisp_project_values, BpdnOptions, FitMethod};
use slipinv::infer::{adaptive_metropolis, hpd_interval, kde, moment_magnitude, AmOptions, Bandwidth};
use slipinv::pipeline::{self, Layout};
use slipinv::swe::{simulate, simulate_with_state, slip_to_initial_surface, Boundary, Footprint, GaugeSite, ModelConfig, Shelf, StateField};

fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

fn note(line: &str) {
    let mut out = std::io::stdout().lock();
    out.write_all(format!("     {line}\n").as_bytes()).unwrap();
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn legendre_norm(degrees: &[u32]) -> f64 {
    degrees.iter().map(|&n| 1.0 / (2.0 * n as f64 + 1.0)).product()
}

#[test]
fn basis_size_and_orthogonality() {
    let t = Instant::now();
    let basis = PcBasis::total_order(6, 5).unwrap();
    let quad = smolyak_grid_with(6, 5, Growth::Slow).unwrap();
    let psi = basis.design_matrix(&quad.nodes).unwrap();
    let w = DVector::from_vec(quad.weights.clone());
    let weighted = DMatrix::from_fn(psi.nrows(), psi.ncols(), |i, j| psi[(i, j)] * w[i]);
    let gram = psi.transpose() * weighted;
    let elapsed = t.elapsed();
    let mut diag_err: f64 = 0.0;
    let mut off_err: f64 = 0.0;
    for (k, idx) in basis.indices().iter().enumerate() {
        diag_err = diag_err.max((gram[(k, k)] - legendre_norm(idx.degrees())).abs());
        for l in 0..basis.len() {
            if l != k {
                off_err = off_err.max(gram[(k, l)].abs());
            }
        }
    }
    let pass = basis.len() == 462 && binomial(11, 5) == 462 && diag_err < 1e-10 && off_err < 1e-10 && elapsed < Duration::from_secs(1);
    verdict(
        "basis",
        pass,
        &format!("{} terms, diagonal error {diag_err:.1e}, off-diagonal {off_err:.1e}, {}", basis.len(), secs(elapsed)),
    );
}

/// Exact mean of a monomial under the uniform measure on `[-1, 1]^m`.
fn monomial_mean(exponents: &[u32]) -> f64 {
    exponents.iter().map(|&a| if a % 2 == 1 { 0.0 } else { 1.0 / (a as f64 + 1.0) }).product()
}

/// Largest quadrature error over all monomials of total degree <= `degree`.
/// Monomials are enumerated depth-first, carrying the partial product at
/// every node.
fn worst_monomial_error(nodes: &[Vec<f64>], weights: &[f64], degree: usize) -> f64 {
    fn recurse(nodes: &[Vec<f64>], weights: &[f64], axis: usize, left: usize, partial: &[f64], exps: &mut Vec<u32>, worst: &mut f64) {
        let dim = nodes[0].len();
        if axis == dim {
            let approx: f64 = partial.iter().zip(weights).map(|(p, w)| p * w).sum();
            *worst = worst.max((approx - monomial_mean(exps)).abs());
            return;
        }
        let mut current = partial.to_vec();
        for k in 0..=left {
            if k > 0 {
                for (c, x) in current.iter_mut().zip(nodes) {
                    *c *= x[axis];
                }
            }
            exps.push(k as u32);
            recurse(nodes, weights, axis + 1, left - k, &current, exps, worst);
            exps.pop();
        }
    }
    let mut worst = 0.0;
    recurse(nodes, weights, 0, degree, &vec![1.0; nodes.len()], &mut Vec::new(), &mut worst);
    worst
}

#[test]
fn smolyak_exactness() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_weight_sum: f64 = 0.0;
    let mut grids = 0;
    for growth in [Growth::Slow, Growth::Full] {
        for dim in 1..=6 {
            for level in 0..=5 {
                let q = smolyak_grid_with(dim, level, growth).unwrap();
                worst_weight_sum = worst_weight_sum.max((q.weights.iter().sum::<f64>() - 1.0).abs());
                let degree = growth.exactness(level);
                worst = worst.max(worst_monomial_error(&q.nodes, &q.weights, degree));
                grids += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let pass = worst < 1e-10 && worst_weight_sum < 1e-12 && elapsed < Duration::from_secs(10);
    verdict(
        "quadrature",
        pass,
        &format!("{grids} grids, worst monomial error {worst:.1e}, worst weight-sum error {worst_weight_sum:.1e}, {}", secs(elapsed)),
    );
}

#[test]
fn nisp_recovers_polynomials_within_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for (dim, level) in [(2, 3), (3, 4), (6, 3), (6, 5)] {
        let q = smolyak_grid_with(dim, level, Growth::Slow).unwrap();
        // Products of two order-p terms have degree 2p <= 2l + 1.
        let order = level;
        let basis = PcBasis::total_order(dim, order).unwrap();
        let planted = DMatrix::from_fn(basis.len(), 2, |_, _| rng.gen_range(-1.0..1.0));
        let values = basis.design_matrix(&q.nodes).unwrap() * &planted;
        let labels = (0..2).map(|step| OutputLabel { gauge: "y".into(), step, time_s: 0.0 }).collect();
        let exp = nisp_project_values(&values, &q, &basis, labels).unwrap();
        let err = (exp.coefficients() - &planted).abs().max();
        worst = worst.max(err);
        cases.push(format!("m={dim} l={level} p={order}: {err:.1e}"));
    }
    verdict("nisp anti-aliasing", worst < 1e-10, &format!("max coefficient error {worst:.1e} ({})", cases.join(", ")));
}

#[test]
fn bpdn_sparse_recovery_and_cv_delta() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let basis = PcBasis::total_order(6, 5).unwrap();
    let points: Vec<Vec<f64>> = (0..200).map(|_| (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let mut psi = basis.design_matrix(&points).unwrap();
    for (mut col, n) in psi.column_iter_mut().zip(basis.norms_sq()) {
        col /= n.sqrt();
    }
    let mut planted = DVector::zeros(basis.len());
    let mut support = Vec::new();
    while support.len() < 5 {
        let k = rng.gen_range(0..basis.len());
        if !support.contains(&k) {
            support.push(k);
            planted[k] = rng.gen_range(1.0..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    let clean = &psi * &planted;
    let sol = bpdn_solve(&psi, &clean, 0.0, &BpdnOptions::default()).unwrap();
    let rel = (&sol.coefficients - &planted).norm() / planted.norm();

    let sigma = 0.01;
    let noise = Normal::new(0.0, sigma).unwrap();
    let noisy = DVector::from_fn(clean.len(), |_, _| noise.sample(&mut rng)) + &clean;
    let candidates = log_spaced_deltas(noisy.norm(), 1e-4, 1.0, 13);
    let cv = cross_validate_delta(&psi, &noisy, 4, &candidates, 9, &BpdnOptions::default()).unwrap();
    let target = sigma * (clean.len() as f64).sqrt();
    let ratio = cv.delta / target;
    let elapsed = t.elapsed();
    let pass = rel <= 1e-3 && (1.0 / 3.0..=3.0).contains(&ratio) && elapsed < Duration::from_secs(60);
    verdict(
        "bpdn recovery",
        pass,
        &format!(
            "noiseless relative error {rel:.1e}; CV delta {:.3} vs sigma*sqrt(S) {target:.3} (ratio {ratio:.2}); {}",
            cv.delta,
            secs(elapsed)
        ),
    );
}

fn solver_box() -> ModelConfig {
    ModelConfig {
        nx: 40,
        ny: 30,
        lx_km: 400.0,
        ly_km: 300.0,
        t_end_s: 1200.0,
        output_dt_s: 60.0,
        taper_km: 20.0,
        subfaults: vec![Footprint { x0_km: 150.0, x1_km: 250.0, y0_km: 100.0, y1_km: 200.0 }],
        gauges: vec![
            GaugeSite { id: "n".into(), x_km: 320.0, y_km: 230.0 },
            GaugeSite { id: "s".into(), x_km: 320.0, y_km: 70.0 },
        ],
        ..ModelConfig::default()
    }
}

#[test]
fn forward_solver_invariants() {
    let t = Instant::now();

    let mut rest = solver_box();
    rest.bathymetry.shelf = Some(Shelf { x_start_km: 100.0, edge_depth_m: 50.0 });
    rest.boundary = Boundary::Reflective;
    rest.t_end_s = 30_000.0;
    rest.output_dt_s = 1000.0;
    let (_, state, steps) = simulate_with_state(&rest, &vec![0.0; rest.nx * rest.ny]).unwrap();
    let mut rest_err: f64 = 0.0;
    for j in 0..rest.ny {
        for i in 0..rest.nx {
            let k = state.at(i, j);
            rest_err = rest_err.max(state.eta(i, j).abs()).max(state.hu[k].abs()).max(state.hv[k].abs());
        }
    }

    let mut closed = solver_box();
    closed.boundary = Boundary::Reflective;
    closed.bathymetry.shelf = Some(Shelf { x_start_km: 200.0, edge_depth_m: 500.0 });
    let eta0 = slip_to_initial_surface(&SlipVector(vec![10.0]), &closed).unwrap();
    let v0 = StateField::from_surface(&closed, &eta0).unwrap().volume();
    let (_, end, _) = simulate_with_state(&closed, &eta0).unwrap();
    let drift = ((end.volume() - v0) / v0).abs();

    let recs = simulate(&solver_box(), &SlipVector(vec![8.0])).unwrap();
    let peak = recs[0].eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let asym = recs[0].eta.iter().zip(&recs[1].eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let elapsed = t.elapsed();
    let pass = steps >= 1000 && rest_err < 1e-12 && drift < 1e-10 && peak > 0.01 && asym < 1e-10 && elapsed < Duration::from_secs(30);
    verdict(
        "forward solver",
        pass,
        &format!(
            "lake at rest {rest_err:.1e} after {steps} steps; volume drift {drift:.1e}; gauge asymmetry {asym:.1e} (peak {peak:.2} m); {}",
            secs(elapsed)
        ),
    );
}

#[test]
fn moment_magnitude_reference_values() {
    let a = moment_magnitude(3.43900e22).unwrap();
    let b = moment_magnitude(3.63595e22).unwrap();
    let pass = (a - 8.99095).abs() < 1e-4 && (b - 9.00708).abs() < 1e-4;
    verdict("moment magnitude", pass, &format!("Mw {a:.5} and {b:.5}"));
}

#[test]
fn adaptive_metropolis_on_gaussian() {
    let d = 10;
    let mean: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 1.0).collect();
    let sd: Vec<f64> = (0..d).map(|i| 0.5 + 0.1 * i as f64).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()) * sd[i] * sd[j]);
    let prec = cov.clone().try_inverse().unwrap();
    let mu = DVector::from_vec(mean.clone());
    let target = |x: &[f64]| {
        let r = DVector::from_column_slice(x) - &mu;
        -0.5 * r.dot(&(&prec * &r))
    };
    let opts = AmOptions { n_iter: 100_000, seed: 21, ..AmOptions::default() };
    let init = vec![0.0; d];
    let steps = vec![0.5; d];
    let t = Instant::now();
    let chain = adaptive_metropolis(target, &init, &steps, &opts).unwrap();
    let elapsed = t.elapsed();
    let again = adaptive_metropolis(target, &init, &steps, &opts).unwrap();
    let identical = chain.samples.iter().zip(&again.samples).all(|(a, b)| a.to_bits() == b.to_bits())
        && chain.samples.len() == again.samples.len();

    let from = chain.len() / 10;
    let cols: Vec<Vec<f64>> = (0..d).map(|k| chain.column(k, from)).collect();
    let n = cols[0].len() as f64;
    let m_hat: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mean_err = m_hat.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut cov_err: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let c = cols[i].iter().zip(&cols[j]).map(|(a, b)| (a - m_hat[i]) * (b - m_hat[j])).sum::<f64>() / (n - 1.0);
            cov_err = cov_err.max((c - cov[(i, j)]).abs() / (cov[(i, i)] * cov[(j, j)]).sqrt());
        }
    }
    let pass = mean_err < 0.05 && cov_err < 0.1 && identical;
    verdict(
        "adaptive metropolis",
        pass,
        &format!(
            "max mean error {mean_err:.3}, max scaled covariance error {cov_err:.3}, acceptance {:.2}, byte-identical rerun {identical}, {}",
            chain.acceptance_rate(),
            secs(elapsed)
        ),
    );
}

#[test]
fn statistics_helpers() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mu, sigma) = (2.0, 0.7);
    let x: Vec<f64> = (0..100_000).map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let density = kde(&x, Bandwidth::Silverman, 512).unwrap();
    let integral_err = (density.integral() - 1.0).abs();
    let (lo, hi) = hpd_interval(&x, 0.95).unwrap();
    let hpd_err = ((lo - (mu - 1.96 * sigma)).abs()).max((hi - (mu + 1.96 * sigma)).abs()) / sigma;

    // Random order-3 expansion in three variables against plain Monte Carlo.
    let basis = PcBasis::total_order(3, 3).unwrap();
    let coeffs = DMatrix::from_fn(basis.len(), 1, |_, _| rng.gen_range(-1.0..1.0));
    let exp = PcExpansion::unlabeled(basis.clone(), coeffs.clone()).unwrap();
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let xi: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            basis.eval(&xi).unwrap().iter().zip(coeffs.column(0).iter()).map(|(p, c)| p * c).sum()
        })
        .collect();
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var) / n).sqrt();
    let z = (exp.variance()[0] - var) / se;

    let pass = integral_err < 1e-3 && hpd_err < 0.03 && z.abs() < 3.0;
    verdict(
        "statistics",
        pass,
        &format!("KDE integral error {integral_err:.1e}; HPD endpoint error {hpd_err:.3} sigma; PC vs MC variance {z:+.2} standard errors"),
    );
}

/// Default geometry on a 100 x 75 grid sampled every 240 s, with LHS and
/// Smolyak ensembles run once and shared by the surrogate and twin checks.
struct Desk {
    _dir: tempfile::TempDir,
    cfg: PipelineConfig,
    layout: Layout,
    ensemble_time: Duration,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let mut cfg = PipelineConfig { workers: 0, ..PipelineConfig::default() };
        cfg.model.nx = 100;
        cfg.model.ny = 75;
        cfg.model.output_dt_s = 240.0;
        cfg.design.lhs_samples = 300;
        cfg.validate.holdout_size = Some(300);
        cfg.mcmc.iterations = 200_000;
        cfg.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let layout = Layout::new(dir.path());
        let t = Instant::now();
        pipeline::cmd_design(&cfg, &layout, &[DesignKind::Smolyak, DesignKind::Lhs]).unwrap();
        for kind in [DesignKind::Smolyak, DesignKind::Lhs] {
            let ens = pipeline::cmd_ensemble(&cfg, &layout, kind).unwrap();
            assert!(ens.is_complete());
        }
        Desk { _dir: dir, cfg, layout, ensemble_time: t.elapsed() }
    })
}

fn fitted(desk: &Desk, method: FitMethod, order: usize) -> (PathBuf, Duration) {
    let dir = desk.layout.expansion_dir(method, order);
    if dir.join("manifest.txt").exists() {
        return (dir, Duration::ZERO);
    }
    let t = Instant::now();
    let dir = pipeline::cmd_fit(&desk.cfg, &desk.layout, method, order).unwrap();
    (dir, t.elapsed())
}

#[test]
fn surrogate_method_contrast() {
    let desk = desk();
    note(&format!("desk ensembles (1889 Smolyak + 300 LHS runs, 100 x 75 cells): {}", secs(desk.ensemble_time)));

    let mut nisp_peaks = Vec::new();
    for order in 1..=5 {
        let (dir, _) = fitted(desk, FitMethod::Nisp, order);
        let r = pipeline::cmd_validate(&desk.cfg, &desk.layout, &dir).unwrap();
        note(&format!("NISP p={order}: peak NRE {:.3e}, mean NRE {:.3e}", r.peak_nre(), r.mean_nre()));
        nisp_peaks.push(r.peak_nre());
    }
    let nisp_ok = nisp_peaks.windows(2).all(|w| w[1] >= w[0]);

    let mut bpdn_ok = true;
    let mut slowest = Duration::ZERO;
    let mut bpdn_means = Vec::new();
    for order in 1..=5 {
        let (dir, took) = fitted(desk, FitMethod::Bpdn, order);
        slowest = slowest.max(took);
        let r = pipeline::cmd_validate(&desk.cfg, &desk.layout, &dir).unwrap();
        note(&format!("BPDN p={order}: mean NRE {:.3e}, peak NRE {:.3e}, fit {}", r.mean_nre(), r.peak_nre(), secs(took)));
        if order >= 3 {
            bpdn_ok &= r.mean_nre() < 0.05;
            bpdn_means.push(r.mean_nre());
        }
    }
    let timing_ok = desk.ensemble_time <= Duration::from_secs(15 * 60) && slowest <= Duration::from_secs(5 * 60);
    let peaks: Vec<String> = nisp_peaks.iter().map(|p| format!("{p:.2e}")).collect();
    verdict(
        "method contrast",
        nisp_ok && bpdn_ok && timing_ok,
        &format!(
            "BPDN mean NRE below 5% for p>=3: {bpdn_ok} (max {:.2e}); NISP peak NRE non-decreasing in p: {nisp_ok} ({}); ensembles {}, slowest fit {}",
            bpdn_means.iter().copied().fold(0.0, f64::max),
            peaks.join(" -> "),
            secs(desk.ensemble_time),
            secs(slowest)
        ),
    );
}

#[test]
fn twin_experiment_recovery() {
    let desk = desk();
    fitted(desk, desk.cfg.fit.method, desk.cfg.basis.order);
    let t = Instant::now();
    let report = pipeline::cmd_twin(&desk.cfg, &desk.layout).unwrap();
    let elapsed = t.elapsed();
    for (i, p) in report.inference.parameters.iter().enumerate().take(report.planted.len()) {
        note(&format!(
            "{}: planted {:.2}, MAP {:.2}, HPD [{:.2}, {:.2}]",
            p.name, report.planted[i], p.map, p.hpd.0, p.hpd.1
        ));
    }
    let sigma: Vec<String> = report.sigma_hat.iter().map(|s| format!("{s:.3}")).collect();
    let pass = report.passed() && elapsed <= Duration::from_secs(10 * 60);
    verdict(
        "twin experiment",
        pass,
        &format!(
            "{}/{} planted slips inside their 95% HPD; sigma_hat [{}] vs {}; acceptance {:.2}; {}",
            report.slips_recovered(),
            report.planted.len(),
            sigma.join(", "),
            report.noise_sigma,
            report.inference.acceptance_rate,
            secs(elapsed)
        ),
    );
}
