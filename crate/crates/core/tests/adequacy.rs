use augdem_core::data::{generate_synthetic, SyntheticPopulationSpec};
use augdem_core::stats::{adequacy_curve, fit_rational, spearman, StatsError};

fn spec(noise: f64, pairs: usize, seed: u64) -> SyntheticPopulationSpec {
    SyntheticPopulationSpec {
        participant_count: 200,
        proposal_count: 20,
        demographic_effect_strength: 0.5,
        noise_scale: noise,
        pairs_per_participant: pairs,
        seed,
    }
}

#[test]
fn zero_noise_population_agrees_at_every_size() {
    // every participant sees every pair, and with no demographic effect
    // everyone has identical preferences
    let mut s = spec(0.0, 190, 3);
    s.demographic_effect_strength = 0.0;
    let d = generate_synthetic(&s).unwrap();
    for p in adequacy_curve(&d, &[1, 5, 20, 100], 3, 1).unwrap() {
        assert!((p.r_squared - 1.0).abs() < 1e-12, "{p:?}");
        assert_eq!(p.skipped, 0);
    }
}

#[test]
fn curve_rises_with_sample_size() {
    let sizes = [2, 4, 8, 16, 32, 64, 100];
    let mut sums = vec![0.0; sizes.len()];
    for seed in 0..20 {
        let d = generate_synthetic(&spec(1.0, 10, seed)).unwrap();
        for (i, p) in adequacy_curve(&d, &sizes, 5, seed)
            .unwrap()
            .iter()
            .enumerate()
        {
            sums[i] += p.r_squared;
        }
    }
    let x: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let rho = spearman(&x, &sums).unwrap();
    assert!(rho >= 0.9, "spearman {rho}, means {sums:?}");
}

#[test]
fn curve_is_seeded_and_fits() {
    let d = generate_synthetic(&spec(1.0, 10, 4)).unwrap();
    let a = adequacy_curve(&d, &[10, 20, 40, 80], 4, 9).unwrap();
    assert_eq!(a, adequacy_curve(&d, &[10, 20, 40, 80], 4, 9).unwrap());
    assert_eq!(a[0].fraction, 0.05);
    let fit = fit_rational(&a).unwrap();
    for p in &a {
        let y = fit.predict(p.fraction);
        assert!((0.0..=1.05).contains(&y), "{fit:?}");
    }
}

#[test]
fn oversized_pairs_are_rejected() {
    let d = generate_synthetic(&spec(1.0, 10, 4)).unwrap();
    assert_eq!(
        adequacy_curve(&d, &[101], 1, 0),
        Err(StatsError::SizeTooLarge {
            requested: 101,
            population: 200
        })
    );
}
