use otseg::image::{decode_image, lab_to_unit, rgb_to_lab, srgb_to_lab, unit_to_lab};
use otseg::labels::{from_csv, load_labels, save_labels, to_csv, LabelFormat, RleLabels};
use otseg::{ColorSpace, Image, LabelMap};
use palette::{FromColor, Lab, Srgb};
use proptest::prelude::*;

proptest! {
    #[test]
    fn lab_conversion_agrees_with_palette_crate(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let ours = srgb_to_lab([r, g, b]);
        let theirs: Lab<palette::white_point::D65, f64> = Lab::from_color(Srgb::new(r, g, b).into_linear());
        prop_assert!((ours[0] - theirs.l).abs() < 1e-3, "L {} vs {}", ours[0], theirs.l);
        prop_assert!((ours[1] - theirs.a).abs() < 1e-3, "a {} vs {}", ours[1], theirs.a);
        prop_assert!((ours[2] - theirs.b).abs() < 1e-3, "b {} vs {}", ours[2], theirs.b);
    }

    #[test]
    fn unit_lab_mapping_round_trips(l in 0.0f64..=100.0, a in -128.0f64..=127.0, b in -128.0f64..=127.0) {
        let back = unit_to_lab(lab_to_unit([l, a, b]));
        for (x, y) in back.iter().zip([l, a, b]) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn label_maps_round_trip_through_every_format(
        w in 1usize..12,
        h in 1usize..12,
        seed in proptest::collection::vec(0u32..65535, 144),
        runs in 1usize..5,
    ) {
        // Short runs of repeated labels so the RLE path sees both cases.
        let labels: Vec<u32> = (0..w * h).map(|i| seed[(i / runs) % seed.len()]).collect();
        let lm = LabelMap::new(w, h, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("l.png", LabelFormat::Png16), ("l.csv", LabelFormat::Csv), ("l.json", LabelFormat::RleJson)] {
            let path = dir.path().join(name);
            save_labels(&lm, &path, fmt).unwrap();
            prop_assert_eq!(&load_labels(&path, fmt).unwrap(), &lm);
            prop_assert_eq!(LabelFormat::from_path(&path), Some(fmt));
        }
        prop_assert_eq!(&RleLabels::encode(&lm).decode().unwrap(), &lm);
        prop_assert_eq!(&from_csv(&to_csv(&lm)).unwrap(), &lm);
    }
}

#[test]
fn rle_runs_are_maximal() {
    let lm = LabelMap::new(3, 2, vec![7, 7, 1, 1, 1, 7]).unwrap();
    assert_eq!(RleLabels::encode(&lm).runs, vec![[7, 2], [1, 3], [7, 1]]);
    let json = serde_json::to_string(&RleLabels::encode(&lm)).unwrap();
    assert_eq!(json, r#"{"width":3,"height":2,"runs":[[7,2],[1,3],[7,1]]}"#);
}

#[test]
fn rle_with_wrong_total_is_rejected() {
    let bad = RleLabels {
        width: 2,
        height: 2,
        runs: vec![[0, 3]],
    };
    assert!(bad.decode().is_err());
}

#[test]
fn ragged_csv_is_rejected() {
    assert!(from_csv("1,2\n3").is_err());
    assert!(from_csv("1,x").is_err());
}

#[test]
fn pgm_values_map_to_unit_range() {
    let mut bytes = b"P5\n2 2\n255\n".to_vec();
    bytes.extend([0u8, 255, 128, 64]);
    let img = decode_image(&bytes).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
    assert_eq!(img.space(), ColorSpace::Gray);
    assert_eq!(img.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
}

#[test]
fn jpeg_is_unsupported() {
    assert!(decode_image(&[0xFF, 0xD8, 0xFF, 0xE0]).is_err());
}

#[test]
fn lab_image_stays_in_unit_cube() {
    let img = Image::from_fn(4, 4, 3, ColorSpace::Rgb, |x, y, px| {
        for (c, v) in px.iter_mut().enumerate() {
            *v = ((x + 2 * y + c) % 5) as f64 / 4.0;
        }
    })
    .unwrap();
    let lab = rgb_to_lab(&img).unwrap();
    assert_eq!(lab.space(), ColorSpace::Lab);
    assert!(lab.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(rgb_to_lab(&lab).is_err());
}
