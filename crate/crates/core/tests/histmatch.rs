use amorph::face::{FaceBundle, Region};
use amorph::histmatch::{histogram_match, match_values, quantile_index};
use amorph::synth::{synth_face, SynthParams};
use proptest::prelude::*;

fn region_channel(b: &FaceBundle<f64>, image: &amorph::face::Image<f64>, r: Region, c: usize) -> Vec<f64> {
    b.parsing().labels().iter().enumerate().filter(|(_, &l)| l == r).map(|(i, _)| image.pixel_at(i)[c]).collect()
}

#[test]
fn synth_pair_follows_reference_quantiles() {
    let x: FaceBundle<f64> = synth_face(1, &SynthParams { size: 128, ..Default::default() }).unwrap();
    let y: FaceBundle<f64> =
        synth_face(2, &SynthParams { size: 160, lip: [0.7, 0.1, 0.2], noise: 8.0 / 255.0, ..Default::default() }).unwrap();
    let hm = histogram_match(&x, &y).unwrap();
    for r in Region::FACE {
        for c in 0..3 {
            let mut got = region_channel(&x, &hm.image, r, c);
            got.sort_by(f64::total_cmp);
            let mut target = region_channel(&y, y.image(), r, c);
            target.sort_by(f64::total_cmp);
            for (k, v) in got.iter().enumerate() {
                let q = target[quantile_index(k, got.len(), target.len())];
                assert!((v - q).abs() <= 1.0 / 255.0);
            }
        }
    }
    for (i, &r) in x.parsing().labels().iter().enumerate() {
        if r == Region::Background {
            assert_eq!(hm.image.pixel_at(i), x.image().pixel_at(i));
        }
    }
}

#[test]
fn constant_reference_region() {
    let x: FaceBundle<f64> = synth_face(3, &SynthParams { size: 64, ..Default::default() }).unwrap();
    let y: FaceBundle<f64> =
        synth_face(4, &SynthParams { size: 64, noise: 0.0, lip: [0.6, 0.2, 0.2], ..Default::default() }).unwrap();
    let hm = histogram_match(&x, &y).unwrap();
    let lip = region_channel(&y, y.image(), Region::Lip, 0)[0];
    assert!(region_channel(&x, &hm.image, Region::Lip, 0).iter().all(|&v| v == lip));
}

proptest! {
    #[test]
    fn matched_values_are_sorted_target_quantiles(
        x in prop::collection::vec(0.0f64..1.0, 1..60),
        y in prop::collection::vec(0.0f64..1.0, 1..60),
    ) {
        let out = match_values(&x, &y).unwrap();
        let mut sorted_y = y.clone();
        sorted_y.sort_by(f64::total_cmp);
        // ranks are preserved: a smaller input never maps above a larger one
        for i in 0..x.len() {
            for j in 0..x.len() {
                if x[i] < x[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
            prop_assert!(sorted_y.contains(&out[i]));
        }
    }
}
