use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relu_regions::attacks::sample_ball;
use relu_regions::linalg::norm2;

#[test]
fn radius_uniform_direction_isotropic() {
    let (n, d) = (100_000, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut radii = Vec::with_capacity(n);
    let mut mean_dir = vec![0.0; d];
    for _ in 0..n {
        let v = sample_ball(&mut rng, d, 1.0);
        let r = norm2(&v);
        assert!(r <= 1.0);
        for (m, vi) in mean_dir.iter_mut().zip(&v) {
            *m += vi / r / n as f64;
        }
        radii.push(r);
    }
    radii.sort_by(f64::total_cmp);
    let ks = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            (r - lo).abs().max((hi - r).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.01, "KS statistic {ks}");
    assert!(mean_dir.iter().all(|m| m.abs() <= 0.02), "{mean_dir:?}");
}
