mod common;

use amub::designs::{intersection_range, validate_design};
use amub::mubgen::{assemble_bases, spectrum, BasisSet};
use amub::planner::Target;
use amub::trims::{trim_minus_with, trim_plus_with, Choice};
use amub::unitaries::HadamardSource;
use common::{brute_mu, dense_spectrum, dense_unitarity, dense_zeros, generated_designs, is_partition};
use num_rational::Ratio;
use proptest::prelude::*;

fn oracle_matches(bs: &BasisSet) -> Result<(), String> {
    let d = bs.d();
    let fast = spectrum(bs).map_err(|e| e.to_string())?;
    let dense: Vec<_> = bs.bases().iter().map(|b| b.dense()).collect();
    let slow = dense_spectrum(&dense, d);
    if fast.delta.len() != slow.len() {
        return Err(format!("{:?} vs oracle {:?}", fast.delta, slow));
    }
    for (a, b) in fast.delta.iter().zip(&slow) {
        if (a - b).abs() > 1e-12 {
            return Err(format!("{a} vs oracle {b}"));
        }
    }
    Ok(())
}

#[test]
fn generated_designs_are_sound() {
    let src = HadamardSource::new();
    let all = generated_designs(200, &[1]);
    assert!(all.len() > 200, "only {} designs generated", all.len());
    for g in &all {
        let dsg = &g.design;
        let d = dsg.d() as u64;
        assert!(is_partition(dsg), "{}", g.label);
        assert!(validate_design(dsg).valid, "{}", g.label);
        let mu = brute_mu(dsg);
        assert_eq!(mu.1, g.mu, "{}", g.label);
        assert_eq!(intersection_range(dsg).unwrap(), mu, "{}", g.label);

        let bs = assemble_bases(dsg, Target::Complex, &src).unwrap();
        for (b, class) in bs.bases().iter().zip(dsg.classes()) {
            let dense = b.dense();
            let sq: u64 = class.sizes().iter().map(|&k| (k * k) as u64).sum();
            // Lemma 1 formula against a direct count of zeros
            let eps = Ratio::new(dense_zeros(&dense) as u64, d * d);
            assert_eq!(eps, Ratio::from_integer(1) - Ratio::new(sq, d * d), "{}", g.label);
            let kmin = *class.sizes().iter().min().unwrap() as u64;
            let kmax = *class.sizes().iter().max().unwrap() as u64;
            let one = Ratio::from_integer(1u64);
            assert!(one - Ratio::new(kmax, d) <= eps && eps <= one - Ratio::new(kmin, d), "{}", g.label);
            let dev = dense_unitarity(&dense, dsg.d());
            assert!(dev <= 1e-10, "{} deviation {dev}", g.label);
        }
    }
}

#[test]
fn shortcut_spectrum_equals_dense_oracle() {
    let src = HadamardSource::new();
    let mut real_checked = 0;
    for g in generated_designs(100, &[7]) {
        let bs = assemble_bases(&g.design, Target::Complex, &src).unwrap();
        oracle_matches(&bs).unwrap_or_else(|e| panic!("{}: {e}", g.label));
        if let Ok(real) = assemble_bases(&g.design, Target::Real, &src) {
            oracle_matches(&real).unwrap_or_else(|e| panic!("{} real: {e}", g.label));
            real_checked += 1;
        }
    }
    assert!(real_checked >= 5, "only {real_checked} real instances");
}

#[test]
fn json_round_trip_keeps_spectrum() {
    let src = HadamardSource::new();
    for g in generated_designs(64, &[]) {
        for flavor in [Target::Complex, Target::Real] {
            let Ok(bs) = assemble_bases(&g.design, flavor, &src) else {
                continue;
            };
            let back = BasisSet::from_json(&bs.to_json()).unwrap();
            assert_eq!(spectrum(&back).unwrap(), spectrum(&bs).unwrap(), "{}", g.label);
        }
    }
}

fn prime_power() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![3u64, 4, 5, 7, 8, 9, 11, 13])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seeded_trims_keep_their_claims(q in prime_power(), a in 0u64..100, b in 0u64..100, seed in any::<u64>()) {
        let e = 1 + a % (q - 1);
        let f = b % (e + 1);
        let minus = trim_minus_with(q, e, f, Choice::Seeded(seed));
        if let Ok(dsg) = minus {
            prop_assert!(is_partition(&dsg));
            prop_assert_eq!(brute_mu(&dsg).1, 1);
            prop_assert_eq!(dsg.d() as u64, (q - e) * (q - f));
        }
        if f > 0 {
            let dsg = trim_plus_with(q, e, f, Choice::Seeded(seed)).unwrap();
            prop_assert!(is_partition(&dsg));
            prop_assert_eq!(brute_mu(&dsg).1, 1);
            prop_assert_eq!(dsg.num_classes() as u64, q + 1);
            if dsg.d() <= 100 {
                let bs = assemble_bases(&dsg, Target::Complex, &HadamardSource::new()).unwrap();
                prop_assert!(oracle_matches(&bs).is_ok());
            }
        }
    }
}

