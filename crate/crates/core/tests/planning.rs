mod common;

use common::*;
use polarflip::channel::Channel;
use polarflip::code::CodeSpec;
use polarflip::planner::{
    plan_code, predict_pscf_success, profile_errors, ErrorProfile, PartitionSuccessModel, PlanOptions, ProfileCache,
    ProfileOptions,
};
use polarflip::sim::StopRule;
use polarflip::Error;
use rand::Rng;

fn opts(failures: u64, seed: u64) -> ProfileOptions {
    ProfileOptions::new(
        StopRule {
            min_errors: failures,
            max_frames: 10_000_000,
        },
        seed,
    )
}

fn profile(k: usize, c: usize, snr: f64, failures: u64, seed: u64) -> (CodeSpec, ErrorProfile) {
    let code = CodeSpec::construct(10, k, c, 2.5, None).unwrap();
    let p = profile_errors(&code, Channel::awgn(snr, code.rate()).unwrap(), opts(failures, seed)).unwrap();
    (code, p)
}

#[test]
fn profile_is_consistent_and_empty_at_frozen_leaves() {
    let (code, p) = profile(512, 16, 2.0, 500, 3);
    p.check_consistency().unwrap();
    assert!(p.failures >= 500);
    assert_eq!(p.code_hash, code.code_hash());
    for &i in code.frozen_set() {
        assert_eq!(p.e1_histogram[i], 0);
    }
    let cdf = p.cumulative_e1();
    assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
    assert!((cdf[1024] - 1.0).abs() < 1e-12);
}

#[test]
fn profiles_are_reproducible_and_worker_independent() {
    let code = CodeSpec::construct(9, 256, 8, 2.5, None).unwrap();
    let ch = Channel::awgn(1.5, code.rate()).unwrap();
    let a = profile_errors(&code, ch, opts(300, 8)).unwrap();
    let b = profile_errors(&code, ch, opts(300, 8)).unwrap();
    let c = profile_errors(
        &code,
        ch,
        ProfileOptions {
            workers: 3,
            ..opts(300, 8)
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = profile_errors(&code, ch, opts(300, 9)).unwrap();
    assert_ne!(a.e1_histogram, d.e1_histogram);
}

#[test]
fn noiseless_channel_gives_insufficient_data() {
    let code = CodeSpec::construct(8, 128, 8, 2.5, None).unwrap();
    let err = profile_errors(
        &code,
        Channel::Noiseless,
        ProfileOptions::new(
            StopRule {
                min_errors: 10,
                max_frames: 2000,
            },
            1,
        ),
    )
    .unwrap_err();
    match err {
        Error::InsufficientData { frames, failures, .. } => {
            assert_eq!(frames, 2000);
            assert_eq!(failures, 0);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn cache_round_trips_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ProfileCache::new(dir.path());
    let code = CodeSpec::construct(8, 128, 8, 2.5, None).unwrap();
    let o = opts(100, 4);
    let first = cache.get_or_profile(&code, 1.0, o).unwrap();
    let path = cache.path_for(&code, 1.0, &o);
    assert!(path.exists());
    assert_eq!(ErrorProfile::load(&path).unwrap(), first);
    assert_eq!(cache.get_or_profile(&code, 1.0, o).unwrap(), first);
}

#[test]
fn half_rate_median_sits_near_the_middle() {
    let (code, p) = profile(512, 16, 2.5, 2000, 1);
    let (split, sel) = plan_code(&code, 2, &p, PlanOptions::default()).unwrap();
    let rho = sel.rho[0] as f64 / 1024.0;
    assert!((0.4..=0.65).contains(&rho), "rho_1 = {}", sel.rho[0]);
    assert_eq!(split.plan().profiled_at_db(), Some(2.5));
    assert_eq!(split.info_positions(), code.info_positions());
}

/// The quantile moves toward the start of the block as the rate grows.
/// With this construction the rate-3/4 median lands near 0.3 N.
#[test]
fn high_rate_median_moves_toward_the_start() {
    let (c768, p768) = profile(768, 0, 2.5, 3000, 1);
    let (c512, p512) = profile(512, 0, 2.5, 3000, 1);
    let opts = PlanOptions::default();
    let (_, s768) = plan_code(&c768, 2, &p768, opts).unwrap_or_else(|e| panic!("{e}"));
    let (_, s512) = plan_code(&c512, 2, &p512, opts).unwrap_or_else(|e| panic!("{e}"));
    let rho = s768.rho[0];
    eprintln!(
        "rate 3/4: rho_1 = {rho} ({:.3} N); rate 1/2: {}",
        rho as f64 / 1024.0,
        s512.rho[0]
    );
    assert!(rho < s512.rho[0]);
    assert!(rho as f64 <= 0.35 * 1024.0);
}

/// Independent partitions with at most one error each are decodable; the
/// formula is checked against brute-force placement of random errors.
#[test]
fn success_model_matches_brute_force_placement() {
    let mut r = rng(41);
    for _ in 0..5 {
        let parts = r.random_range(2..5usize);
        let probs: Vec<Vec<f64>> = (0..parts)
            .map(|_| {
                let a = r.random_range(0.0..0.4);
                let b = r.random_range(0.0..0.3);
                vec![1.0 - a - b, a, b]
            })
            .collect();
        let model = PartitionSuccessModel::new(probs.clone()).unwrap();
        let predicted = predict_pscf_success(&model);
        let trials = 200_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            let mut total = 0;
            let mut ok = true;
            for p in &probs {
                let u: f64 = r.random();
                let e = if u < p[0] {
                    0
                } else if u < p[0] + p[1] {
                    1
                } else {
                    2
                };
                total += e;
                ok &= e <= 1;
            }
            hits += (ok && total > 0) as u64;
        }
        let est = hits as f64 / trials as f64;
        let se = (predicted * (1.0 - predicted) / trials as f64).sqrt();
        assert!((est - predicted).abs() <= 4.0 * se + 1e-9, "{est} vs {predicted}");
    }
}
