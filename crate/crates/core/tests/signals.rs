use std::f64::consts::PI;

use mars_core::kinematics::{Mat3, VirtualImuSample};
use mars_core::sigproc::{
    assemble, disassemble, lowpass_filter, normalize_to_root, sensor_set, standardize, window, Biquad, ChannelLayout,
    Signal, WindowedSample,
};
use proptest::prelude::*;

const FS: f64 = 60.0;

fn impulse_response(f: &Biquad, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let mut y = vec![0.0; n];
    f.run(&x, &mut y);
    y
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (g(a) + g(b) + inner) * h / 3.0
}

/// Amplitude of the `freq` component of `y` by projection onto sine and
/// cosine over a whole number of periods.
fn tone_amplitude(y: &[f64], freq: f64) -> f64 {
    let w = 2.0 * PI * freq / FS;
    let n = y.len() as f64;
    let (s, c) = y.iter().enumerate().fold((0.0, 0.0), |(s, c), (i, v)| {
        (s + v * (w * i as f64).sin(), c + v * (w * i as f64).cos())
    });
    2.0 * (s * s + c * c).sqrt() / n
}

fn sample(orientation: Mat3, acceleration: [f64; 3]) -> VirtualImuSample {
    VirtualImuSample { orientation, acceleration }
}

fn rotation() -> impl Strategy<Value = Mat3> {
    prop::array::uniform3(-3.0..3.0f64).prop_map(Mat3::from_axis_angle)
}

fn streams(sensors: usize) -> impl Strategy<Value = Vec<Vec<VirtualImuSample>>> {
    (1usize..12).prop_flat_map(move |len| {
        prop::collection::vec(
            prop::collection::vec(
                (rotation(), prop::array::uniform3(-20.0..20.0f64)).prop_map(|(r, a)| sample(r, a)),
                len,
            ),
            sensors,
        )
    })
}

#[test]
fn impulse_energy_matches_integrated_magnitude() {
    for cutoff in [2.0, 5.0, 10.0, 20.0] {
        let f = Biquad::lowpass(cutoff, FS).unwrap();
        let time: f64 = impulse_response(&f, 20_000).iter().map(|v| v * v).sum();
        let freq = 2.0 / FS * simpson(|hz| f.magnitude(hz, FS).powi(2), 0.0, FS / 2.0, 20_000);
        assert!((time - freq).abs() < 1e-9, "cutoff {cutoff}: {time} vs {freq}");
    }
}

#[test]
fn four_times_cutoff_is_attenuated_sixteenfold() {
    let (cutoff, tone) = (5.0, 20.0);
    let f = Biquad::lowpass(cutoff, FS).unwrap();
    let n = 3000;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * tone * i as f64 / FS).sin()).collect();
    let y = lowpass_filter(&Signal::new(1, n, x).unwrap(), cutoff, FS).unwrap();
    let steady = &y.channel(0)[n - 600..];
    let gain = tone_amplitude(steady, tone);
    assert!((gain - f.magnitude(tone, FS)).abs() < 1e-9, "measured {gain}");
    assert!(gain <= 1.0 / 16.0, "gain {gain}");
}

#[test]
fn constant_channels_pass_unchanged() {
    let x = vec![3.25; 40];
    let y = lowpass_filter(&Signal::new(1, 40, x.clone()).unwrap(), 5.0, FS).unwrap();
    for v in y.channel(0) {
        assert!((v - 3.25).abs() < 1e-12);
    }
}

#[test]
fn root_normalization_hand_example() {
    let root = vec![sample(Mat3::rot_z(PI / 2.0), [0.0, 0.0, 9.81])];
    let other = vec![sample(Mat3::rot_z(PI / 2.0) * Mat3::rot_x(0.3), [1.0, 0.0, 0.0])];
    let out = normalize_to_root(&[root, other], 0).unwrap();
    assert_eq!(out[0][0].orientation, Mat3::IDENTITY);
    let acc = out[0][0].acceleration;
    assert!(acc[0].abs() < 1e-15 && acc[1].abs() < 1e-15 && acc[2] == 9.81);
    let expect = Mat3::rot_x(0.3).flatten();
    for (a, b) in out[1][0].orientation.flatten().iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    let acc = out[1][0].acceleration;
    assert!(acc[0].abs() < 1e-15 && (acc[1] + 1.0).abs() < 1e-15 && acc[2] == 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn root_normalization_ignores_global_rotation(s in streams(3), q in rotation()) {
        let turned: Vec<Vec<_>> = s.iter()
            .map(|st| st.iter().map(|x| sample(q * x.orientation, q.apply(x.acceleration))).collect())
            .collect();
        let (a, b) = (normalize_to_root(&s, 1).unwrap(), normalize_to_root(&turned, 1).unwrap());
        for (sa, sb) in a.iter().flatten().zip(b.iter().flatten()) {
            for (x, y) in sa.orientation.flatten().iter().zip(sb.orientation.flatten()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for k in 0..3 {
                prop_assert!((sa.acceleration[k] - sb.acceleration[k]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn assemble_round_trips(s in streams(3)) {
        let layout = ChannelLayout::new(&sensor_set("3").unwrap()).unwrap();
        let signal = assemble(&layout, &s).unwrap();
        prop_assert_eq!(signal.channels(), 36);
        prop_assert_eq!(signal.len(), s[0].len());
        prop_assert_eq!(disassemble(&layout, &signal).unwrap(), s);
    }

    #[test]
    fn windows_are_exact_slices(
        channels in 1usize..4,
        len in 0usize..80,
        t in 1usize..30,
        stride in 1usize..30,
    ) {
        let data: Vec<f64> = (0..channels * len).map(|i| i as f64).collect();
        let signal = Signal::new(channels, len, data).unwrap();
        let w = window(&signal, t, stride, 2, 9).unwrap();
        let expected = if len >= t { (len - t) / stride + 1 } else { 0 };
        prop_assert_eq!(w.len(), expected);
        for (k, s) in w.iter().enumerate() {
            prop_assert_eq!(s.start_frame, k * stride);
            prop_assert!(s.start_frame + t <= len);
            prop_assert_eq!((s.label, s.source_sequence), (2, 9));
            for c in 0..channels {
                prop_assert_eq!(&s.values[c * t..(c + 1) * t], &signal.channel(c)[k * stride..k * stride + t]);
            }
        }
    }

    #[test]
    fn standardized_training_set_has_unit_moments(
        values in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 2 * 5), 2..20),
        shift in prop::array::uniform2(-100.0..100.0f64),
    ) {
        let mut train: Vec<WindowedSample> = values.iter().map(|v| WindowedSample {
            values: v.iter().enumerate().map(|(i, x)| x + shift[i / 5]).collect(),
            label: 0,
            source_sequence: 0,
            start_frame: 0,
        }).collect();
        let mut test = train.clone();
        let stats = standardize(&mut train, &mut [&mut test[..]], 2, 5).unwrap();
        prop_assert_eq!(&train, &test);
        for c in 0..2 {
            let xs: Vec<f64> = train.iter().flat_map(|s| s.values[c * 5..(c + 1) * 5].to_vec()).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if stats.std[c] > 1e-6 {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }
}
