//! Monte Carlo checks of the driver samplers against the fBm covariance.

use fbmsde::fbm::{fbm_covariance, CholeskySampler, CirculantSampler, PathSampler};
use fbmsde::rng::derive_seed;
use fbmsde::{DrivingPath, HurstParameter, SamplerKind, UniformGrid};

const M: usize = 10_000;

fn hurst(h: f64) -> HurstParameter {
    HurstParameter::new(h).unwrap()
}

fn paths(kind: SamplerKind, grid: UniformGrid, h: f64, dim: usize, count: usize, base: u64) -> Vec<DrivingPath> {
    let sampler = PathSampler::new(kind, grid, hurst(h)).unwrap();
    (0..count).map(|p| sampler.sample(dim, derive_seed(base, &[p as u64])).unwrap()).collect()
}

fn mean_sq(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

#[test]
fn single_step_has_unit_variance() {
    let grid = UniformGrid::new(1.0, 1).unwrap();
    for kind in [SamplerKind::Cholesky, SamplerKind::Circulant] {
        let var = mean_sq(paths(kind, grid, 0.7, 2, M, 11).iter().map(|p| p.value(1, 1)));
        assert!((var - 1.0).abs() < 0.05, "{kind}: {var}");
    }
}

#[test]
fn single_step_scales_with_step_size() {
    // n = 1 on [0, T]: one Gaussian with standard deviation T^H.
    let grid = UniformGrid::new(0.25, 1).unwrap();
    let var = mean_sq(paths(SamplerKind::Circulant, grid, 0.8, 2, M, 12).iter().map(|p| p.value(1, 1)));
    let want = 0.25f64.powf(1.6);
    assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
}

#[test]
fn node_covariance_within_three_standard_errors() {
    let grid = UniformGrid::new(1.0, 8).unwrap();
    let hp = hurst(0.6);
    let sample = paths(SamplerKind::Cholesky, grid, 0.6, 2, M, 13);
    for i in 1..=8 {
        for j in i..=8 {
            let emp = sample.iter().map(|p| p.value(i, 1) * p.value(j, 1)).sum::<f64>() / M as f64;
            let (ti, tj) = (grid.node(i), grid.node(j));
            let sij = fbm_covariance(ti, tj, hp).unwrap();
            let se = ((fbm_covariance(ti, ti, hp).unwrap() * fbm_covariance(tj, tj, hp).unwrap() + sij * sij)
                / M as f64)
                .sqrt();
            assert!((emp - sij).abs() <= 3.0 * se, "({i},{j}): {emp} vs {sij}");
        }
    }
}

fn lag1(paths: &[DrivingPath], k: usize) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for p in paths {
        let a = p.value(k + 1, 1) - p.value(k, 1);
        let b = p.value(k + 2, 1) - p.value(k + 1, 1);
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    xy / (xx * yy).sqrt()
}

#[test]
fn samplers_agree_on_lag_one_correlation() {
    let grid = UniformGrid::new(1.0, 256).unwrap();
    let count = 4000;
    let chol = paths(SamplerKind::Cholesky, grid, 0.8, 2, count, 14);
    let circ = paths(SamplerKind::Circulant, grid, 0.8, 2, count, 15);
    let (a, b) = (lag1(&chol, 100), lag1(&circ, 100));
    let se = |r: f64| (1.0 - r * r) / (count as f64).sqrt();
    assert!((a - b).abs() < 3.0 * (se(a).powi(2) + se(b).powi(2)).sqrt(), "{a} vs {b}");
    let exact = 2f64.powf(2.0 * 0.8 - 1.0) - 1.0;
    assert!((a - exact).abs() < 3.0 * se(exact));
}

#[test]
fn self_similarity_at_horizon() {
    let grid = UniformGrid::new(2.0, 16).unwrap();
    let var = mean_sq(paths(SamplerKind::Circulant, grid, 0.7, 2, M, 16).iter().map(|p| p.value(16, 1)));
    let want = 2f64.powf(1.4);
    assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
}

#[test]
fn increments_are_stationary() {
    let grid = UniformGrid::new(1.0, 16).unwrap();
    let sample = paths(SamplerKind::Circulant, grid, 0.75, 2, M, 17);
    let want = grid.step_size().powf(1.5);
    for k in 0..16 {
        let var = mean_sq(sample.iter().map(|p| p.value(k + 1, 1) - p.value(k, 1)));
        assert!((var / want - 1.0).abs() < 0.05, "step {k}: {var} vs {want}");
    }
}

#[test]
fn coordinates_are_independent() {
    let grid = UniformGrid::new(1.0, 8).unwrap();
    let sample = paths(SamplerKind::Circulant, grid, 0.9, 3, M, 18);
    for k in [0, 3, 7] {
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for p in &sample {
            let a = p.value(k + 1, 1) - p.value(k, 1);
            let b = p.value(k + 1, 2) - p.value(k, 2);
            xy += a * b;
            xx += a * a;
            yy += b * b;
        }
        let r = xy / (xx * yy).sqrt();
        assert!(r.abs() < 3.0 / (M as f64).sqrt(), "step {k}: {r}");
    }
}

#[test]
fn time_only_driver_is_seed_independent() {
    let grid = UniformGrid::new(1.0, 32).unwrap();
    let a = CholeskySampler::new(grid, hurst(0.7)).unwrap().sample(1, 1).unwrap();
    let b = CirculantSampler::new(grid, hurst(0.7)).unwrap().sample(1, 2).unwrap();
    assert_eq!(a.values(), b.values());
    assert!((0..=32).all(|k| a.value(k, 0) == grid.node(k)));
}

#[test]
fn cholesky_refuses_large_grids() {
    let grid = UniformGrid::new(1.0, 4097).unwrap();
    assert!(matches!(CholeskySampler::new(grid, hurst(0.7)), Err(fbmsde::Error::Capacity(_))));
    assert!(CirculantSampler::new(grid, hurst(0.7)).is_ok());
}
