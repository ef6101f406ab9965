use peh_core::fft::{Fft, Radix2};
use peh_core::num_complex::Complex64;
use peh_core::signal::{label_speed, resize_bilinear, Image, SpeedClass};
use peh_core::synth::{plan_dataset, synth_event, TrafficScenario};
use peh_core::{harvested_energy, EnergyAccumulator, Quantity, TimeSeries};
use proptest::prelude::*;

proptest! {
    #[test]
    fn labels_partition_positive_speeds(v in 0.01f64..200.0) {
        let class = label_speed(v).class;
        let inside: Vec<SpeedClass> = SpeedClass::LABELED
            .iter()
            .copied()
            .filter(|c| { let (lo, hi) = c.interval().unwrap(); v >= lo && v <= hi })
            .collect();
        prop_assert!(inside.len() <= 1);
        prop_assert_eq!(class, inside.first().copied().unwrap_or(SpeedClass::Excluded));
    }

    #[test]
    fn energy_is_nonnegative_and_additive(
        v in prop::collection::vec(-5.0f64..5.0, 20..400),
        split in 0.05f64..0.95,
        r in 1.0f64..1e4,
    ) {
        let fs = 600.0;
        let ts = TimeSeries::new(Quantity::Voltage, 1.5, fs, v.clone()).unwrap();
        let (t1, t3) = (ts.start_time, ts.end_time());
        let t2 = ts.start_time + ((split * (v.len() - 1) as f64).round()) / fs;
        prop_assume!(t2 > t1 && t2 < t3);
        let whole = harvested_energy(&ts, r, t1, t3).unwrap();
        let parts = harvested_energy(&ts, r, t1, t2).unwrap() + harvested_energy(&ts, r, t2, t3).unwrap();
        prop_assert!(whole >= 0.0);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1e-300));
        let mut acc = EnergyAccumulator::new(fs, r);
        v.iter().for_each(|x| acc.push(*x));
        prop_assert!((acc.energy() - whole).abs() <= 1e-12 * whole.max(1e-300));
    }

    #[test]
    fn inverse_fft_recovers_input(x in prop::collection::vec(-1.0f64..1.0, 1..300)) {
        let n = Radix2.fast_len(x.len());
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        buf.resize(n, Complex64::new(0.0, 0.0));
        Radix2.process(&mut buf, false);
        Radix2.process(&mut buf, true);
        for (i, v) in x.iter().enumerate() {
            prop_assert!((buf[i].re / n as f64 - v).abs() < 1e-12);
        }
    }

    #[test]
    fn same_size_resize_is_identity((h, w, data) in (2usize..20, 2usize..20)
        .prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(0.0f32..1.0, h * w))))
    {
        let img = Image { height: h, width: w, data: data.clone() };
        let out = resize_bilinear(&img, h, w).unwrap();
        for (a, b) in out.data.iter().zip(&data) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn plans_follow_mix_and_label_their_speeds(a in 1usize..15, b in 1usize..15, c in 1usize..15, seed in any::<u64>()) {
        let plan = plan_dataset([a, b, c], seed).unwrap();
        let mut counts = [0usize; 3];
        for p in &plan {
            prop_assert_eq!(label_speed(p.speed_kmh).class, p.class);
            counts[p.class.index().unwrap()] += 1;
        }
        prop_assert_eq!(counts, [a, b, c]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn events_are_reproducible(seed in any::<u64>(), speed in 31.0f64..59.0) {
        let scn = TrafficScenario { rng_seed: seed, speed_kmh: speed, ..TrafficScenario::default() };
        prop_assert_eq!(synth_event(&scn).unwrap(), synth_event(&scn).unwrap());
    }
}
