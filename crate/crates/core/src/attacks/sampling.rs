use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random point of the ball `B(0, radius)` with a uniform direction and a
/// uniform radius. This is deliberately not volume-uniform: small radii are
/// as likely as large ones in any dimension.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0, "radius must be non-negative");
    if dim == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let mut norm = crate::linalg::norm2(&v);
    while norm == 0.0 {
        v = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        norm = crate::linalg::norm2(&v);
    }
    let rho = radius * rng.random::<f64>();
    for vi in &mut v {
        *vi *= rho / norm;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_ball(&mut rng, 4, 0.0), vec![0.0; 4]);
    }

    #[test]
    fn within_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v = sample_ball(&mut rng, 7, 2.5);
            assert!(crate::linalg::norm2(&v) <= 2.5);
        }
    }
}
