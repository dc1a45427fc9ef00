use cxperceptron::signal::{
    detect, modulate_bpsk, modulate_nrz, prbs8, samples_per_bit, shift_samples,
    transition_halfwidth, BitSequence, ChannelParams,
};
use cxperceptron::waveform::RealWaveform;
use proptest::prelude::*;

const RATE: f64 = 80e9;

fn bits(max: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 2..max)
}

fn bit_rate() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![5e9, 8e9, 10e9, 16e9, 20e9])
}

/// Indices whose distance to every bit transition exceeds `guard` samples.
fn plateau_samples(bits: &[bool], b_sa: usize, guard: usize) -> Vec<usize> {
    let edges: Vec<usize> = (1..bits.len())
        .filter(|&l| bits[l] != bits[l - 1])
        .map(|l| l * b_sa)
        .collect();
    (0..bits.len() * b_sa)
        .filter(|&t| {
            edges
                .iter()
                .all(|&e| (t as isize - e as isize).unsigned_abs() > guard)
        })
        .collect()
}

#[test]
fn prbs_has_period_255_and_visits_every_nonzero_state() {
    for seed in 1..=255u8 {
        let seq = prbs8(255 * 2 + 8, seed).unwrap();
        assert_eq!(seq[..255], seq[255..510], "seed {seed}");
        assert_eq!(seq[..255].iter().filter(|b| **b).count(), 128);
        let mut seen = [false; 256];
        for l in 0..255 {
            let word = (0..8).fold(0usize, |w, k| (w << 1) | seq[l + k] as usize);
            assert!(!seen[word], "window repeats within a period");
            seen[word] = true;
        }
        assert!(!seen[0]);
        assert_eq!(seen.iter().filter(|s| **s).count(), 255);
    }
}

#[test]
fn prbs_period_is_minimal() {
    let seq = prbs8(510, 1).unwrap();
    for p in [3, 5, 15, 17, 51, 85] {
        assert!((0..255).any(|l| seq[l] != seq[l + p]), "period divides {p}");
    }
}

proptest! {
    #[test]
    fn prbs_obeys_its_recurrence(seed in 1u8..=255, len in 9usize..600) {
        let b = prbs8(len, seed).unwrap();
        for n in 8..len {
            prop_assert_eq!(b[n], b[n - 8] ^ b[n - 6] ^ b[n - 5] ^ b[n - 4]);
        }
    }

    #[test]
    fn nrz_plateaus_sit_on_the_two_levels(b in bits(40), rate in bit_rate(), er in 0.5..20.0f64) {
        let params = ChannelParams { extinction_ratio_db: er, ..ChannelParams::noiseless() };
        let b_sa = samples_per_bit(RATE, rate).unwrap();
        let field = modulate_nrz(&BitSequence::new(b.clone(), rate).unwrap(), &params).unwrap();
        let power = field.intensity();
        let low = 10f64.powf(-er / 10.0);
        for t in plateau_samples(&b, b_sa, transition_halfwidth(&params)) {
            let want = if b[t / b_sa] { 1.0 } else { low };
            prop_assert!((power.samples()[t] - want).abs() < 1e-12);
        }
        prop_assert!(field.samples().iter().all(|c| c.im == 0.0 && c.re >= 0.0));
    }

    #[test]
    fn nrz_low_level_falls_with_extinction_ratio(er in 0.5..20.0f64, extra in 0.1..10.0f64) {
        let lo = ChannelParams { extinction_ratio_db: er, ..ChannelParams::noiseless() }.low_level();
        let lower = ChannelParams { extinction_ratio_db: er + extra, ..ChannelParams::noiseless() }.low_level();
        prop_assert!(lower < lo && lo < 1.0);
    }

    #[test]
    fn bpsk_has_unit_magnitude_away_from_transitions(b in bits(40), rate in bit_rate()) {
        let params = ChannelParams::noiseless();
        let b_sa = samples_per_bit(RATE, rate).unwrap();
        let field = modulate_bpsk(&BitSequence::new(b.clone(), rate).unwrap(), &params).unwrap();
        for t in plateau_samples(&b, b_sa, transition_halfwidth(&params)) {
            let want = if b[t / b_sa] { -1.0 } else { 1.0 };
            prop_assert!((field.samples()[t].re - want).abs() < 1e-9);
            prop_assert!((field.samples()[t].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn detection_is_reproducible(seed in any::<u64>(), level in 0.01..10.0f64) {
        let power = RealWaveform::new(vec![level; 256], RATE).unwrap();
        let a = detect(&power, 14.0, seed);
        let b = detect(&power, 14.0, seed);
        let c = detect(&power, 14.0, seed.wrapping_add(1));
        prop_assert_eq!(a.samples(), b.samples());
        prop_assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn shift_keeps_length_and_moves_content(v in prop::collection::vec(-5.0..5.0f64, 1..50), s in -60isize..60) {
        let out = shift_samples(&v, s, f64::NAN);
        prop_assert_eq!(out.len(), v.len());
        for (t, x) in out.iter().enumerate() {
            let src = t as isize - s;
            if (0..v.len() as isize).contains(&src) {
                prop_assert_eq!(*x, v[src as usize]);
            } else {
                prop_assert!(x.is_nan());
            }
        }
    }
}

#[test]
fn detector_noise_matches_the_requested_snr() {
    let n = 100_000;
    for (snr_db, level) in [(14.0, 1.0), (10.0, 0.3), (20.0, 2.5)] {
        let power = RealWaveform::new(vec![level; n], RATE).unwrap();
        let noisy = detect(&power, snr_db, 7);
        let mean = noisy.samples().iter().sum::<f64>() / n as f64;
        let var = noisy
            .samples()
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        let measured = 10.0 * (level / var).log10();
        assert!(
            (measured - snr_db).abs() < 0.2,
            "{snr_db} dB requested, {measured:.3} dB measured"
        );
        assert!((mean - level).abs() < 5.0 * (var / n as f64).sqrt());
    }
}

#[test]
fn infinite_snr_leaves_the_trace_untouched() {
    let power = RealWaveform::new(vec![0.5; 64], RATE).unwrap();
    assert_eq!(detect(&power, f64::INFINITY, 3).samples(), power.samples());
}
