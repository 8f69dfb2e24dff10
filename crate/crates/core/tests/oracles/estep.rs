// E-step closed forms checked against brute-force Gaussian conditioning of
// the stacked complete data on small random instances.

use crate::common::*;
use emdoa::array::sample_covariance;
use emdoa::det_gem::{gem_e_step, DetGemState};
use emdoa::det_sage::{sage_e_step, DetSageState};
use emdoa::stoch_sage::{
    noise_stats, sequential_conditional_covariance, stoch_cycle_b, stoch_e_step_a, StochSageState,
};
use emdoa::{
    CMatrix, DoaVector, LineSearch, NoiseProfile, NoiseShares, SnapshotMatrix, SourcePowers,
    SplitWeights,
};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 50;
const TOL: f64 = 1e-9;

struct Instance {
    n: usize,
    m: usize,
    t: usize,
    theta: Vec<f64>,
    v: CMatrix,
}

fn instance(rng: &mut ChaCha8Rng, k: u64) -> Instance {
    let n = 1 + (k % 3) as usize;
    let m = 1 + (k / 3 % 2) as usize;
    let t = 1 + (k / 6 % 2) as usize;
    let theta = (0..m).map(|_| uniform(rng, 0.2, 2.9)).collect();
    let v = gaussian_matrix(rng, n, t, 2.0);
    Instance { n, m, t, theta, v }
}

/// Block selector `[I I ... I]` mapping stacked per-source data to `v`.
fn sum_selector(n: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(n, n * m, |r, col| c(if col % n == r { 1.0 } else { 0.0 }))
}

fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(size, size);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}

pub fn gem_e_step_matches_joint_conditioning() {
    let mut rng = rng(1);
    for k in 0..INSTANCES {
        let inst = instance(&mut rng, k);
        let (n, m, t) = (inst.n, inst.m, inst.t);
        let shares = DMatrix::from_fn(n, m, |_, _| uniform(&mut rng, 0.2, 3.0));
        let f = gaussian_matrix(&mut rng, m, t, 1.0);
        let state = DetGemState::new(
            DoaVector::new(inst.theta.clone()).unwrap(),
            f.clone(),
            NoiseShares::new(shares.clone()).unwrap(),
        )
        .unwrap();
        let cache = gem_e_step(&state, &SnapshotMatrix::new(inst.v.clone()).unwrap()).unwrap();

        let cov = block_diag(
            &(0..m)
                .map(|j| diag(&shares.column(j).iter().copied().collect::<Vec<_>>()))
                .collect::<Vec<_>>(),
        );
        let a = sum_selector(n, m);
        for s in 0..t {
            let mut mu = CMatrix::zeros(n * m, 1);
            for j in 0..m {
                let mean = steering(inst.theta[j], n) * f[(j, s)];
                mu.view_mut((j * n, 0), (n, 1)).copy_from(&mean);
            }
            let y = inst.v.columns(s, 1).into_owned();
            let (mean, cond) = condition(&mu, &cov, &a, &y);
            for j in 0..m {
                let expected = mean.rows(j * n, n).into_owned();
                let got = cache.g[j].columns(s, 1).into_owned();
                assert!(rel_err(&got, &expected) < TOL, "instance {k} source {j}");
                for r in 0..n {
                    let want = cond[(j * n + r, j * n + r)].re;
                    // relative to the share itself: c is exactly zero for one source
                    let err = (cache.c[(r, j)] - want).abs() / shares[(r, j)];
                    assert!(
                        err < TOL,
                        "instance {k} c[{r},{j}]: {} vs {want}",
                        cache.c[(r, j)]
                    );
                }
            }
        }
    }
}

pub fn sage_e_step_matches_joint_conditioning() {
    let mut rng = rng(2);
    for k in 0..INSTANCES {
        let inst = instance(&mut rng, k);
        let (n, m, t) = (inst.n, inst.m, inst.t);
        let sigma: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.2, 3.0)).collect();
        let f = gaussian_matrix(&mut rng, m, t, 1.0);
        let state = DetSageState::new(
            DoaVector::new(inst.theta.clone()).unwrap(),
            f.clone(),
            NoiseProfile::new(sigma.clone()).unwrap(),
        )
        .unwrap();
        let v = SnapshotMatrix::new(inst.v.clone()).unwrap();
        for i in 0..m {
            let g = sage_e_step(&state, &v, i).unwrap();
            // all noise in source i, the other sources are noiseless
            let blocks: Vec<CMatrix> = (0..m)
                .map(|j| {
                    if j == i {
                        diag(&sigma)
                    } else {
                        CMatrix::zeros(n, n)
                    }
                })
                .collect();
            let cov = block_diag(&blocks);
            let a = sum_selector(n, m);
            for s in 0..t {
                let mut mu = CMatrix::zeros(n * m, 1);
                for j in 0..m {
                    let mean = steering(inst.theta[j], n) * f[(j, s)];
                    mu.view_mut((j * n, 0), (n, 1)).copy_from(&mean);
                }
                let y = inst.v.columns(s, 1).into_owned();
                let (mean, _) = condition(&mu, &cov, &a, &y);
                let expected = mean.rows(i * n, n).into_owned();
                let got = g.columns(s, 1).into_owned();
                assert!(rel_err(&got, &expected) < TOL, "instance {k} cycle {i}");
            }
        }
    }
}

/// Conditional second moment `(1/T) sum_t E{x x^H | y(t)}` of a zero-mean
/// Gaussian `x` observed through `y = A x`, mapped through `out`.
fn second_moment(cov: &CMatrix, a: &CMatrix, v: &CMatrix, out: &CMatrix) -> CMatrix {
    let t = v.ncols();
    let mut acc = CMatrix::zeros(out.nrows(), out.nrows());
    let mu = CMatrix::zeros(cov.nrows(), 1);
    for s in 0..t {
        let (mean, cond) = condition(&mu, cov, a, &v.columns(s, 1).into_owned());
        let x = out * &mean;
        acc += &x * x.adjoint() + out * cond * out.adjoint();
    }
    acc / c(t as f64)
}

fn stoch_state(rng: &mut ChaCha8Rng, inst: &Instance) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p: Vec<f64> = (0..inst.m).map(|_| uniform(rng, 0.1, 5.0)).collect();
    let sigma: Vec<f64> = (0..inst.n).map(|_| uniform(rng, 0.2, 3.0)).collect();
    let raw: Vec<f64> = (0..inst.m).map(|_| uniform(rng, 0.1, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    let alpha = raw.iter().map(|a| a / total).collect();
    (p, sigma, alpha)
}

pub fn simultaneous_e_step_matches_joint_conditioning() {
    let mut rng = rng(3);
    for k in 0..INSTANCES {
        let inst = instance(&mut rng, k);
        let (n, m) = (inst.n, inst.m);
        let (p, sigma, alpha) = stoch_state(&mut rng, &inst);
        let state = StochSageState::new(
            DoaVector::new(inst.theta.clone()).unwrap(),
            SourcePowers::new(p.clone()).unwrap(),
            NoiseProfile::new(sigma.clone()).unwrap(),
            SplitWeights::new(alpha.clone()).unwrap(),
        )
        .unwrap();
        let r_v = sample_covariance(&SnapshotMatrix::new(inst.v.clone()).unwrap());
        let cache = stoch_e_step_a(&state, &r_v).unwrap();

        // g_m ~ CN(0, P_m d d^H + alpha_m Sigma), independent over m
        let blocks: Vec<CMatrix> = (0..m)
            .map(|j| {
                let d = steering(inst.theta[j], n);
                &d * d.adjoint() * c(p[j]) + diag(&sigma) * c(alpha[j])
            })
            .collect();
        let cov = block_diag(&blocks);
        let a = sum_selector(n, m);
        for j in 0..m {
            let pick = CMatrix::from_fn(n, n * m, |r, col| {
                c(if col == j * n + r { 1.0 } else { 0.0 })
            });
            let expected = second_moment(&cov, &a, &inst.v, &pick);
            assert!(
                rel_err(&cache.r_m[j], &expected) < TOL,
                "instance {k} source {j}"
            );
        }
    }
}

/// Complete data `x = (f_1, ..., f_M, z)` with `v = D f + z`.
fn source_noise_model(theta: &[f64], p: &[f64], sigma: &[f64]) -> (CMatrix, CMatrix) {
    let n = sigma.len();
    let m = theta.len();
    let mut a = CMatrix::zeros(n, m + n);
    for (j, &angle) in theta.iter().enumerate() {
        a.set_column(j, &steering(angle, n).column(0));
    }
    a.view_mut((0, m), (n, n)).fill_with_identity();
    let mut var = p.to_vec();
    var.extend_from_slice(sigma);
    (a, diag(&var))
}

pub fn additional_e_step_matches_joint_conditioning() {
    let mut rng = rng(4);
    for k in 0..INSTANCES {
        let inst = instance(&mut rng, k);
        let (n, m) = (inst.n, inst.m);
        let (p, sigma, _) = stoch_state(&mut rng, &inst);
        let r_v = sample_covariance(&SnapshotMatrix::new(inst.v.clone()).unwrap());
        let stats = noise_stats(
            &DoaVector::new(inst.theta.clone()).unwrap(),
            &SourcePowers::new(p.clone()).unwrap(),
            &NoiseProfile::new(sigma.clone()).unwrap(),
            &r_v,
        )
        .unwrap();

        let (a, cov) = source_noise_model(&inst.theta, &p, &sigma);
        let all = CMatrix::identity(m + n, m + n);
        let moment = second_moment(&cov, &a, &inst.v, &all);
        for j in 0..m {
            let want = moment[(j, j)].re;
            assert!(
                (stats.p_hat[j] - want).abs() / want < TOL,
                "instance {k} P_hat[{j}]: {} vs {want}",
                stats.p_hat[j]
            );
        }
        let r_z = moment.view((m, m), (n, n)).into_owned();
        assert!(rel_err(&stats.r_z, &r_z) < TOL, "instance {k} R_z");
    }
}

pub fn sequential_e_step_matches_joint_conditioning() {
    let mut rng = rng(5);
    let search = LineSearch::default();
    for k in 0..INSTANCES {
        let inst = instance(&mut rng, k);
        let (n, m) = (inst.n, inst.m);
        let (p, sigma, _) = stoch_state(&mut rng, &inst);
        let state = StochSageState::with_uniform_split(
            DoaVector::new(inst.theta.clone()).unwrap(),
            SourcePowers::new(p.clone()).unwrap(),
            NoiseProfile::new(sigma.clone()).unwrap(),
        )
        .unwrap();
        let r_v = sample_covariance(&SnapshotMatrix::new(inst.v.clone()).unwrap());
        let (a, cov) = source_noise_model(&inst.theta, &p, &sigma);
        let all = CMatrix::identity(m + n, m + n);
        let moment = second_moment(&cov, &a, &inst.v, &all);

        for i in 0..m {
            // g_i = d_i f_i + z
            let mut out = CMatrix::zeros(n, m + n);
            out.set_column(i, &steering(inst.theta[i], n).column(0));
            out.view_mut((0, m), (n, n)).fill_with_identity();
            let expected = second_moment(&cov, &a, &inst.v, &out);
            let got = sequential_conditional_covariance(&state, &r_v, i).unwrap();
            assert!(rel_err(&got, &expected) < TOL, "instance {k} cycle {i}");

            // the other sources take their conditional powers
            let (next, _) = stoch_cycle_b(&state, &r_v, i, &search).unwrap();
            for j in (0..m).filter(|&j| j != i) {
                let want = moment[(j, j)].re;
                let got = next.p.as_slice()[j];
                assert!(
                    (got - want).abs() / want < TOL,
                    "instance {k} cycle {i} P[{j}]"
                );
            }
        }
    }
}
