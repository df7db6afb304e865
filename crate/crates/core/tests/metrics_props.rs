use maxspan_core::metrics::{
    aal_of_series, aggregate, attack_accuracy_loss, attack_advantage, scalar_stats, PairedRun, RunRecord,
    SeriesKind, Z95,
};
use maxspan_core::rng::{substream, Stream};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

fn rec(values: Vec<f64>, seed: u64) -> RunRecord {
    RunRecord {
        fingerprint: "cfg".into(),
        seed,
        kind: SeriesKind::Accuracy,
        loss: vec![0.0; values.len()],
        values,
        adversaries: vec![],
        d_avg: None,
    }
}

fn curve() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 20)
}

#[test]
fn constructed_curves() {
    let clean = rec(vec![0.9; 100], 0);
    let attacked = rec(vec![0.8; 100], 0);
    assert_eq!(attack_accuracy_loss(&PairedRun { attacked, clean: clean.clone() }, 25).unwrap(), 750.0);
    assert_eq!(attack_accuracy_loss(&PairedRun { attacked: clean.clone(), clean }, 25).unwrap(), 0.0);
    assert_eq!(attack_advantage(109.0, 100.0).unwrap(), 9.0);
    assert_eq!(attack_advantage(83.25, 50.0).unwrap(), 66.5);
}

#[test]
fn confidence_interval_shrinks_with_root_n() {
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = substream(5, Stream::TaskData, 0);
    let records: Vec<RunRecord> = (0..50)
        .map(|s| rec((0..200).map(|_| 0.7 + noise.sample(&mut rng)).collect(), s))
        .collect();
    let width = |rs: &[RunRecord]| {
        let st = aggregate(rs).unwrap();
        st.ci_high.iter().zip(&st.ci_low).map(|(h, l)| h - l).sum::<f64>() / st.mean.len() as f64
    };
    let (w50, w10) = (width(&records), width(&records[..10]));
    // Closed-form widths 2 * z * sigma / sqrt(n).
    let expected = |n: f64| 2.0 * Z95 * 0.05 / n.sqrt();
    assert!((w50 / expected(50.0) - 1.0).abs() < 0.2, "w50 {w50}");
    assert!((w10 / expected(10.0) - 1.0).abs() < 0.2, "w10 {w10}");
    assert!(((w10 / w50) / 5f64.sqrt() - 1.0).abs() < 0.2);
}

proptest! {
    #[test]
    fn aal_of_mean_equals_mean_of_aal(
        pairs in prop::collection::vec((curve(), curve()), 2..8),
        t in 0usize..20,
    ) {
        let clean: Vec<RunRecord> = pairs.iter().enumerate().map(|(i, p)| rec(p.0.clone(), i as u64)).collect();
        let attacked: Vec<RunRecord> = pairs.iter().enumerate().map(|(i, p)| rec(p.1.clone(), i as u64)).collect();
        let mean_aal = pairs.iter().map(|p| aal_of_series(&p.0, &p.1, t).unwrap()).sum::<f64>() / pairs.len() as f64;
        let aal_mean = aal_of_series(&aggregate(&clean).unwrap().mean, &aggregate(&attacked).unwrap().mean, t).unwrap();
        prop_assert!((mean_aal - aal_mean).abs() < 1e-12 * 2000.0_f64.max(mean_aal.abs()));
    }

    #[test]
    fn aal_is_additive_and_shift_invariant(clean in curve(), attacked in curve(), t in 0usize..19, split in 0usize..19, c in -0.5f64..0.5) {
        let split = split.max(t);
        let whole = aal_of_series(&clean, &attacked, t).unwrap();
        let head = aal_of_series(&clean[..=split], &attacked[..=split], t).unwrap();
        let tail = aal_of_series(&clean, &attacked, split + 1).unwrap_or(0.0);
        prop_assert!((whole - (head + tail)).abs() < 1e-9);
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        prop_assert!((aal_of_series(&shift(&clean), &shift(&attacked), t).unwrap() - whole).abs() < 1e-9);
    }

    #[test]
    fn advantage_is_zero_on_ties_and_antisymmetric_in_sign(a in 1e-3f64..1e4, d in 1e-3f64..1e2) {
        prop_assert_eq!(attack_advantage(a, a).unwrap(), 0.0);
        prop_assert!(attack_advantage(a + d, a).unwrap() > 0.0);
        prop_assert!(attack_advantage(a, a + d).unwrap() < 0.0);
    }

    #[test]
    fn run_csv_round_trip(values in prop::collection::vec(0.0f64..=1.0, 1..50), loss in prop::collection::vec(0.0f64..10.0, 50)) {
        let mut r = rec(values, 3);
        r.loss = loss[..r.values.len()].to_vec();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        prop_assert_eq!(RunRecord::read_csv(buf.as_slice(), "cfg", 3).unwrap(), r);
    }

    #[test]
    fn scalar_std_matches_two_pass_definition(xs in prop::collection::vec(-100.0f64..100.0, 2..40)) {
        let s = scalar_stats(&xs);
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        prop_assert!((s.std - var.sqrt()).abs() < 1e-9);
    }
}
