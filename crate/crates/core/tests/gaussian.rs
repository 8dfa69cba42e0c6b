use ftm_core::ot::{build_cost_matrix, solve_assignment};
use ftm_core::seed::stream;
use ftm_core::synthetic::{gaussian_ot_map, GaussianPair};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

fn deviation(pair: &GaussianPair, m: usize, seed: u64) -> f64 {
    let map = gaussian_ot_map(pair).unwrap();
    let mut rng = stream(seed, "gaussian-deviation", m as u64);
    let xs0 = pair.sample(0, m, &mut rng);
    let xs1 = pair.sample(1, m, &mut rng);
    let plan = solve_assignment(&build_cost_matrix(&xs0, &xs1, None, 0.0).unwrap()).unwrap();
    let perm = plan.assignment().unwrap();
    xs0.iter()
        .zip(perm)
        .map(|(x, &j)| {
            let t = map.apply(x);
            t.iter().zip(&xs1[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / m as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn empirical_assignment_approaches_closed_form_map() {
    let mut rng = stream(0, "gaussian-pair", 0);
    let d = 3;
    let pair = GaussianPair::new(
        DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        random_spd(d, &mut rng),
        random_spd(d, &mut rng),
    )
    .unwrap();
    let curve: Vec<f64> = [32, 128, 512]
        .iter()
        .map(|&m| median((0..3).map(|s| deviation(&pair, m, s)).collect()))
        .collect();
    assert!(curve[0] > curve[1] && curve[1] > curve[2], "{curve:?}");
}

#[test]
fn closed_form_map_pushes_covariance_forward() {
    let mut rng = stream(1, "gaussian-pair", 0);
    for d in 1..=5 {
        let pair = GaussianPair::new(
            DVector::zeros(d),
            DVector::from_element(d, 1.0),
            random_spd(d, &mut rng),
            random_spd(d, &mut rng),
        )
        .unwrap();
        let map = gaussian_ot_map(&pair).unwrap();
        let pushed = &map.w * &pair.sigma0 * map.w.transpose();
        assert!((pushed - &pair.sigma1).abs().max() <= 1e-6);
        let w_sym = (&map.w - map.w.transpose()).abs().max();
        assert!(w_sym <= 1e-9);
    }
}
