use fbmsde::analysis::{
    convergence_study, holder_seminorm_discrete, levy_discrepancy_rate, strong_error, LevyConfig, StudyConfig,
};
use fbmsde::fbm::sample_path;
use fbmsde::schemes::integrate;
use fbmsde::{builtin_problem, HurstParameter, SamplerKind, Scheme, SolverConfig, UniformGrid};

fn hurst(h: f64) -> HurstParameter {
    HurstParameter::new(h).unwrap()
}

#[test]
fn holder_seminorm_of_solutions_stays_bounded() {
    let problem = builtin_problem("paper5").unwrap();
    let scheme = Scheme::builtin("step2").unwrap();
    let fine = sample_path(SamplerKind::Circulant, UniformGrid::new(1.0, 512).unwrap(), 3, hurst(0.7), 21).unwrap();
    let norms: Vec<f64> = (4..=9)
        .map(|p| {
            let n = 1usize << p;
            let traj =
                integrate(&problem, &fine.restrict(512 / n).unwrap(), &scheme, &SolverConfig::default()).unwrap();
            holder_seminorm_discrete(traj.states(), 1, traj.grid(), 0.55, 0..=n).unwrap()
        })
        .collect();
    let (lo, hi) = norms.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    assert!(lo > 0.0 && hi / lo < 5.0, "{norms:?}");
}

#[test]
fn strong_error_smoke_and_provenance() {
    let problem = builtin_problem("paper5").unwrap();
    let scheme = Scheme::builtin("rk4").unwrap();
    let cfg = SolverConfig::default();
    let fine = sample_path(SamplerKind::Circulant, UniformGrid::new(1.0, 1024).unwrap(), 3, hurst(0.7), 22).unwrap();
    let reference = integrate(&problem, &fine, &scheme, &cfg).unwrap();
    let coarse = integrate(&problem, &fine.restrict(64).unwrap(), &scheme, &cfg).unwrap();
    let e = strong_error(&reference, &coarse).unwrap();
    assert!(e.max_node_error > 0.0 && e.max_node_error < 10.0);
    assert!(e.sup_interp_error >= e.max_node_error);

    let other = sample_path(SamplerKind::Circulant, UniformGrid::new(1.0, 1024).unwrap(), 3, hurst(0.7), 23).unwrap();
    let foreign = integrate(&problem, &other.restrict(64).unwrap(), &scheme, &cfg).unwrap();
    assert!(matches!(strong_error(&reference, &foreign), Err(fbmsde::Error::Protocol(_))));
}

#[test]
fn mmse_decreases_across_levels() {
    // Statistical property: adjacent levels decrease in most studies.
    let problem = builtin_problem("paper5").unwrap();
    let scheme = Scheme::builtin("rk4").unwrap();
    let (mut decreasing, mut pairs) = (0, 0);
    for seed in 0..4 {
        let cfg = StudyConfig { levels: vec![16, 32, 64, 128], ref_steps: 1024, ..StudyConfig::desk(hurst(0.8), seed) };
        let r = convergence_study(&problem, &scheme, &cfg).unwrap();
        for w in r.levels.windows(2) {
            pairs += 1;
            decreasing += usize::from(w[1].mmse <= w[0].mmse);
        }
    }
    assert!(decreasing as f64 >= 0.9 * pairs as f64, "{decreasing}/{pairs}");
}

#[test]
fn midpoint_rate_at_h_07() {
    let problem = builtin_problem("paper5").unwrap();
    let scheme = Scheme::builtin("midpoint").unwrap();
    let mut cfg = StudyConfig::desk(hurst(0.7), 7);
    cfg.solver.fp_max_iter = 1000;
    let r = convergence_study(&problem, &scheme, &cfg).unwrap();
    assert!((r.target_rate - 0.9).abs() < 1e-12);
    assert!(r.slope_within(0.2), "slope {}", r.slope);
}

#[test]
fn deterministic_control_rate() {
    let problem = builtin_problem("bm-linear").unwrap();
    let scheme = Scheme::builtin("rk4").unwrap();
    let cfg =
        StudyConfig { levels: vec![8, 16, 32, 64], ref_steps: 1024, paths: 2, ..StudyConfig::desk(hurst(0.7), 1) };
    let r = convergence_study(&problem, &scheme, &cfg).unwrap();
    assert_eq!(r.target_rate, 4.0);
    assert!(r.slope_within(0.1), "slope {}", r.slope);
}

#[test]
fn levy_rate_at_brownian_hurst() {
    let cfg = LevyConfig {
        levels: vec![16, 32, 64, 128],
        paths: 300,
        ..LevyConfig::desk(HurstParameter::sampling_only(0.5).unwrap(), 3)
    };
    let r = levy_discrepancy_rate(&cfg).unwrap();
    assert!((r.area.slope - 0.5).abs() < 0.2, "slope {}", r.area.slope);
}
