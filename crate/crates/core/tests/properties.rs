use anchorite::{compute_kn, deploy_sensors, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn deployments_are_uniform_on_a_grid() {
    // 10x10 cells, n = 10000, chi-square at the 0.001 level, 100 seeds
    let n = 10_000;
    let expected = n as f64 / 100.0;
    let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.999);
    let passing = (0..100u64)
        .filter(|&seed| {
            let d = deploy_sensors(n, &RngStream::new(seed).derive("deploy")).unwrap();
            let mut counts = [0u32; 100];
            for p in d.sensors() {
                let cx = ((p.x * 10.0) as usize).min(9);
                let cy = ((p.y * 10.0) as usize).min(9);
                counts[cy * 10 + cx] += 1;
            }
            let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            chi2 < critical
        })
        .count();
    assert!((critical - 148.23).abs() < 0.01, "{critical}");
    assert!(passing >= 95, "{passing}/100 seeds passed");
}

#[test]
fn kn_is_monotone_in_n() {
    let mut prev = 0;
    for n in 2..20_000 {
        let k = compute_kn(n, 1.2).unwrap();
        assert!(k >= prev && k >= 1);
        prev = k;
    }
    assert_eq!(compute_kn(1000, 1.2).unwrap(), 10);
    assert_eq!(compute_kn(10_000, 1.2).unwrap(), 14);
}
