use fgmq::par::Execution;
use fgmq::sim::{replication_rng, run, sample_sa, SimConfig};
use fgmq::solver;
use fgmq::stats::{ks_pvalue, ks_statistic, mean_se, pearson};
use fgmq::{DistributionSpec, QueueModel};

#[test]
fn independent_pairs_are_uncorrelated() {
    let m = QueueModel::mg1(0.5, 0.0, DistributionSpec::exponential(1.0)).unwrap();
    let mut rng = replication_rng(21, 0);
    let n = 1_000_000;
    let (s, a): (Vec<f64>, Vec<f64>) = (0..n).map(|_| sample_sa(&m, &mut rng)).unzip();
    let per: Vec<f64> = s.chunks(n / 20).zip(a.chunks(n / 20)).map(|(x, y)| pearson(x, y)).collect();
    let r = mean_se(&per);
    assert!(r.mean.abs() < 3.0 * r.se, "{r:?}");
}

#[test]
fn empirical_p_s_gt_a_matches_analytic() {
    let m = QueueModel::mg1(0.5, 1.0, DistributionSpec::exponential(1.0)).unwrap();
    let want = solver::prob_s_gt_a(&m).unwrap();
    let mut rng = replication_rng(22, 0);
    let hits: Vec<f64> = (0..20)
        .map(|_| {
            (0..50_000)
                .filter(|_| {
                    let (s, a) = sample_sa(&m, &mut rng);
                    s > a
                })
                .count() as f64
                / 50_000.0
        })
        .collect();
    let est = mean_se(&hits);
    assert!((est.mean - want).abs() < 3.0 * est.se, "{est:?} vs {want}");
}

#[test]
fn erlang_interarrival_marginal() {
    for theta in [-1.0, 0.7] {
        let m = QueueModel::erlang(2, 2.0, theta, DistributionSpec::exponential(3.0)).unwrap();
        let mut rng = replication_rng(23, 0);
        let a: Vec<f64> = (0..200_000).map(|_| sample_sa(&m, &mut rng).1).collect();
        let arrival = DistributionSpec::erlang(2, 2.0);
        let d = ks_statistic(&a, |x| arrival.cdf(x));
        assert!(ks_pvalue(d, a.len()) > 0.01, "theta={theta}: d={d}");
    }
}

#[test]
fn warmup_does_not_shift_the_mean() {
    let m = QueueModel::mg1(0.5, 0.5, DistributionSpec::exponential(1.0)).unwrap();
    let mut cold = SimConfig::new(1_000_000, 10, 31);
    cold.warmup = Some(0);
    let mut warm = cold.clone();
    warm.warmup = Some(10_000);
    warm.customers += 10_000;
    let (a, b) = (
        run(&m, &cold, Execution::Parallel).unwrap(),
        run(&m, &warm, Execution::Parallel).unwrap(),
    );
    let joint = (a.wait.se.powi(2) + b.wait.se.powi(2)).sqrt();
    assert!((a.wait.mean - b.wait.mean).abs() < 3.0 * joint);
}

#[test]
fn ordering_and_positive_se() {
    let m = QueueModel::erlang(2, 1.0, -0.5, DistributionSpec::erlang(2, 2.0))
        .and_then(|m| m.with_rho(0.7))
        .unwrap();
    let mut cfg = SimConfig::new(300_000, 6, 41);
    cfg.warmup = Some(20_000);
    let r = run(&m, &cfg, Execution::Parallel).unwrap();
    for s in [r.wait, r.max_overlap, r.min_overlap, r.prob_s_gt_a] {
        assert!(s.se > 0.0);
    }
    assert!(r.min_overlap.mean <= r.wait.mean && r.wait.mean <= r.max_overlap.mean);
    assert_eq!(r.streams, (0..6).collect::<Vec<u64>>());
    assert_eq!(r.measured, 280_000);
}
