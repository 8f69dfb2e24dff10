// M-step closed forms checked against direct numerical optimization of the
// conditional objectives they are meant to solve.

use crate::common::*;
use emdoa::array::sample_covariance;
use emdoa::det_gem::{gem_cm_step1, gem_cm_step2, DetEStepCache, DetGemState};
use emdoa::det_sage::{sage_cm_steps, DetSageState};
use emdoa::stoch_sage::{
    additional_em_steps, noise_stats, sequential_conditional_covariance, stoch_cycle_b,
    stoch_m_step_a, StochEStepCache, StochSageState,
};
use emdoa::{
    CMatrix, DoaVector, LineSearch, NoiseProfile, NoiseShares, SnapshotMatrix, SourcePowers,
    SplitWeights,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 20;
const TOL: f64 = 1e-3;
// wide enough to contain the main lobe for the smallest arrays
const WINDOW: f64 = 0.3;
const STEP: f64 = 2e-3;

fn close(got: f64, want: f64, what: &str) {
    let err = (got - want).abs() / want.abs().max(1.0);
    assert!(err < TOL, "{what}: {got} vs {want}");
}

/// A strong planted source near `theta0` observed in weighted noise.
fn planted(rng: &mut ChaCha8Rng, n: usize, t: usize, weights: &[f64]) -> (f64, CMatrix) {
    let theta0 = uniform(rng, 0.5, 2.6);
    let d = steering(theta0, n);
    let f = gaussian_matrix(rng, 1, t, 4.0);
    let noise = CMatrix::from_fn(n, t, |r, _| emdoa::array::complex_gaussian(rng, weights[r]));
    (theta0, &d * f + noise)
}

/// Weighted least squares `min_f sum_n |g_n - d_n f|^2 / w_n` per snapshot via
/// an SVD solve of the scaled system.  Returns the minimum and the waveform.
fn weighted_fit(g: &CMatrix, theta: f64, w: &[f64]) -> (f64, CMatrix) {
    let n = g.nrows();
    let scale: Vec<Complex64> = w.iter().map(|x| c(1.0 / x.sqrt())).collect();
    let d = steering(theta, n);
    let a = CMatrix::from_fn(n, 1, |r, _| d[(r, 0)] * scale[r]);
    let b = CMatrix::from_fn(n, g.ncols(), |r, s| g[(r, s)] * scale[r]);
    let f = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    let cost = (&a * &f - b).norm_squared();
    (cost, f)
}

fn mean_square_residual(g: &CMatrix, theta: f64, f: &CMatrix) -> Vec<f64> {
    let fit = steering(theta, g.nrows()) * f;
    (0..g.nrows())
        .map(|r| {
            (0..g.ncols())
                .map(|s| (g[(r, s)] - fit[(r, s)]).norm_sqr())
                .sum::<f64>()
                / g.ncols() as f64
        })
        .collect()
}

/// Minimizer of `ln x + a / x` found numerically on a log scale.
fn log_barrier_min(a: f64) -> f64 {
    golden_min(-30.0, 10.0, |u| u + a / u.exp()).exp()
}

fn check_signal_fit(g: &CMatrix, w: &[f64], seed: f64, theta: f64, f: &CMatrix, what: &str) {
    let theta_star = grid_max(seed - WINDOW, seed + WINDOW, STEP, |x| {
        -weighted_fit(g, x, w).0
    });
    close(theta, theta_star, &format!("{what} theta"));
    let (_, f_star) = weighted_fit(g, theta_star, w);
    let err = (f - &f_star).norm() / f_star.norm();
    assert!(err < TOL, "{what} waveform rel err {err}");
}

pub fn gem_cm_steps_match_numerical_optimum() {
    let mut rng = rng(11);
    let search = LineSearch::default();
    for k in 0..INSTANCES {
        let n = 3 + (k % 5) as usize;
        let t = 10 + k as usize;
        let shares = DMatrix::from_fn(n, 1, |_, _| uniform(&mut rng, 0.2, 2.0));
        let w: Vec<f64> = shares.column(0).iter().copied().collect();
        let (theta0, g) = planted(&mut rng, n, t, &w);
        let seed = theta0 + uniform(&mut rng, -0.015, 0.015);
        let c_diag = DMatrix::from_fn(n, 1, |_, _| uniform(&mut rng, 0.0, 0.5));
        let state = DetGemState::new(
            DoaVector::new(vec![seed]).unwrap(),
            CMatrix::zeros(1, t),
            NoiseShares::new(shares.clone()).unwrap(),
        )
        .unwrap();
        let cache = DetEStepCache {
            g: vec![g.clone()],
            c: c_diag.clone(),
        };
        let update = gem_cm_step1(&cache, &state, &search);
        check_signal_fit(
            &g,
            &w,
            seed,
            update.theta.as_slice()[0],
            &update.f,
            &format!("instance {k}"),
        );

        let residual = mean_square_residual(&g, update.theta.as_slice()[0], &update.f);
        let full = gem_cm_step2(&cache, &update, &state, 0.0).unwrap();
        let damped = gem_cm_step2(&cache, &update, &state, 0.3).unwrap();
        for r in 0..n {
            let star = log_barrier_min(c_diag[(r, 0)] + residual[r]);
            close(
                full.matrix()[(r, 0)],
                star,
                &format!("instance {k} sigma[{r}]"),
            );
            close(
                damped.matrix()[(r, 0)],
                0.3 * w[r] + 0.7 * star,
                &format!("instance {k} damped sigma[{r}]"),
            );
        }
    }
}

pub fn sage_cm_steps_match_numerical_optimum() {
    let mut rng = rng(12);
    let search = LineSearch::default();
    for k in 0..INSTANCES {
        let n = 3 + (k % 5) as usize;
        let t = 10 + k as usize;
        let sigma: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.2, 2.0)).collect();
        let (theta0, g) = planted(&mut rng, n, t, &sigma);
        let seed = theta0 + uniform(&mut rng, -0.015, 0.015);
        let other = if seed > 1.5 { 0.4 } else { 2.7 };
        let state = DetSageState::new(
            DoaVector::new(vec![other, seed]).unwrap(),
            CMatrix::zeros(2, t),
            NoiseProfile::new(sigma.clone()).unwrap(),
        )
        .unwrap();
        let gamma = 0.6;
        let (next, _) = sage_cm_steps(&g, &state, 1, gamma, &search).unwrap();
        assert_eq!(next.theta.as_slice()[0], other);
        let theta = next.theta.as_slice()[1];
        let f = next.f.rows(1, 1).into_owned();
        check_signal_fit(&g, &sigma, seed, theta, &f, &format!("instance {k}"));

        let residual = mean_square_residual(&g, theta, &f);
        for r in 0..n {
            let star = log_barrier_min(residual[r]);
            close(
                next.sigma.as_slice()[r],
                gamma * sigma[r] + (1.0 - gamma) * star,
                &format!("instance {k} sigma[{r}]"),
            );
        }
    }
}

/// `ln det K + Tr(K^-1 R)` with `K = P d d^H + share Sigma`, through LU.
fn covariance_fit(r: &CMatrix, sigma: &[f64], share: f64, theta: f64, p: f64) -> f64 {
    let d = steering(theta, r.nrows());
    let k = &d * d.adjoint() * c(p) + diag(sigma) * c(share);
    let lu = k.clone().lu();
    let det = lu.determinant().re;
    det.ln() + (lu.try_inverse().unwrap() * r).trace().re
}

/// Joint minimizer over `theta` near `seed` and `P >= 0`.
fn power_fit_optimum(r: &CMatrix, sigma: &[f64], share: f64, seed: f64) -> (f64, f64) {
    let p_max = 4.0 * r.trace().re;
    let best_p = |theta: f64| golden_min(0.0, p_max, |p| covariance_fit(r, sigma, share, theta, p));
    let profile = |theta: f64| -covariance_fit(r, sigma, share, theta, best_p(theta));
    let theta = grid_max(seed - WINDOW, seed + WINDOW, STEP, profile);
    (theta, best_p(theta))
}

fn planted_covariance(rng: &mut ChaCha8Rng, n: usize, sigma: &[f64]) -> (f64, CMatrix) {
    let (theta0, v) = planted(rng, n, 40, sigma);
    (theta0, sample_covariance(&SnapshotMatrix::new(v).unwrap()))
}

pub fn simultaneous_m_step_matches_numerical_optimum() {
    let mut rng = rng(13);
    let search = LineSearch::default();
    for k in 0..INSTANCES {
        let n = 3 + (k % 4) as usize;
        let sigma: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.3, 2.0)).collect();
        let alpha = vec![0.3, 0.7];
        let mut seeds = Vec::new();
        let mut r_m = Vec::new();
        for share in &alpha {
            let scaled: Vec<f64> = sigma.iter().map(|s| s * share).collect();
            let (theta0, r) = planted_covariance(&mut rng, n, &scaled);
            seeds.push(theta0 + uniform(&mut rng, -0.015, 0.015));
            r_m.push(r);
        }
        let state = StochSageState::new(
            DoaVector::new(seeds.clone()).unwrap(),
            SourcePowers::new(vec![1.0, 1.0]).unwrap(),
            NoiseProfile::new(sigma.clone()).unwrap(),
            SplitWeights::new(alpha.clone()).unwrap(),
        )
        .unwrap();
        let update = stoch_m_step_a(&StochEStepCache { r_m: r_m.clone() }, &state, &search);
        for m in 0..2 {
            let (theta, p) = power_fit_optimum(&r_m[m], &sigma, alpha[m], seeds[m]);
            close(
                update.theta.as_slice()[m],
                theta,
                &format!("instance {k} theta[{m}]"),
            );
            close(update.p.as_slice()[m], p, &format!("instance {k} P[{m}]"));
        }
    }
}

pub fn sequential_m_step_matches_numerical_optimum() {
    let mut rng = rng(14);
    let search = LineSearch::default();
    for k in 0..INSTANCES {
        let n = 4 + (k % 4) as usize;
        let sigma: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.3, 2.0)).collect();
        let theta0 = [uniform(&mut rng, 0.5, 1.2), uniform(&mut rng, 1.9, 2.6)];
        let d = CMatrix::from_fn(n, 2, |r, m| steering(theta0[m], n)[(r, 0)]);
        let f = gaussian_matrix(&mut rng, 2, 60, 3.0);
        let noise = CMatrix::from_fn(n, 60, |r, _| {
            emdoa::array::complex_gaussian(&mut rng, sigma[r])
        });
        let r_v = sample_covariance(&SnapshotMatrix::new(&d * f + noise).unwrap());
        let seeds: Vec<f64> = theta0
            .iter()
            .map(|x| x + uniform(&mut rng, -0.015, 0.015))
            .collect();
        let state = StochSageState::with_uniform_split(
            DoaVector::new(seeds.clone()).unwrap(),
            SourcePowers::new(vec![
                uniform(&mut rng, 1.0, 4.0),
                uniform(&mut rng, 1.0, 4.0),
            ])
            .unwrap(),
            NoiseProfile::new(sigma.clone()).unwrap(),
        )
        .unwrap();
        let i = (k % 2) as usize;
        let r_i = sequential_conditional_covariance(&state, &r_v, i).unwrap();
        let (next, _) = stoch_cycle_b(&state, &r_v, i, &search).unwrap();
        let (theta, p) = power_fit_optimum(&r_i, &sigma, 1.0, seeds[i]);
        close(
            next.theta.as_slice()[i],
            theta,
            &format!("instance {k} theta"),
        );
        close(next.p.as_slice()[i], p, &format!("instance {k} P"));

        // the other source's power solves ln P + P_hat / P
        let j = 1 - i;
        let stats = noise_stats(&state.theta, &state.p, &state.sigma, &r_v).unwrap();
        close(
            next.p.as_slice()[j],
            log_barrier_min(stats.p_hat[j]),
            &format!("instance {k} P other"),
        );
    }
}

pub fn additional_m_step_matches_numerical_optimum() {
    let mut rng = rng(15);
    for k in 0..INSTANCES {
        let n = 2 + (k % 5) as usize;
        let m = 1 + (k % 2) as usize;
        let theta: Vec<f64> = (0..m)
            .map(|j| 0.6 + 1.5 * j as f64 + uniform(&mut rng, 0.0, 0.3))
            .collect();
        let p: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 0.5, 4.0)).collect();
        let sigma: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.3, 2.0)).collect();
        let r_v = random_psd(&mut rng, n, n, 0.2);
        let theta = DoaVector::new(theta).unwrap();
        let p = SourcePowers::new(p).unwrap();
        let sigma = NoiseProfile::new(sigma).unwrap();
        let stats = noise_stats(&theta, &p, &sigma, &r_v).unwrap();
        let (p_new, sigma_new) = additional_em_steps(&theta, &p, &sigma, &r_v, 0.5).unwrap();
        for j in 0..m {
            close(
                p_new.as_slice()[j],
                log_barrier_min(stats.p_hat[j]),
                &format!("instance {k} P[{j}]"),
            );
        }
        for r in 0..n {
            close(
                sigma_new.as_slice()[r],
                log_barrier_min(stats.r_z[(r, r)].re),
                &format!("instance {k} sigma[{r}]"),
            );
        }
    }
}
