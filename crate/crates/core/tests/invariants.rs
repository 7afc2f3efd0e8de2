mod common;

use mstree_core::eval::{confusion, metrics};
use mstree_core::features::{db_to_linear, fit_column, linear_to_db, pndvi};
use mstree_core::io::columnar::{decode_columnar, encode_columnar};
use mstree_core::io::labels::{format_labels, parse_labels};
use mstree_core::io::split_plots;
use mstree_core::io::split::tile_key;
use mstree_core::preprocess::voxel_subsample;
use mstree_core::{build_index, Channel, Label, PointCloud};
use proptest::prelude::*;

fn cloud_strategy(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((0.0f64..20.0, 0.0f64..20.0, 0.0f64..5.0, any::<bool>(), any::<bool>()), 1..max).prop_map(|pts| {
        let mut c = PointCloud::new();
        for (x, y, z, green, tree) in pts {
            let ch = if green { Channel::Green532 } else { Channel::Nir1064 };
            c.push(x, y, z, ch, -10.0, if tree { Label::Tree } else { Label::NonTree });
        }
        c
    })
}

fn labels_strategy(n: usize) -> impl Strategy<Value = Vec<(bool, bool)>> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..n)
}

fn lab(b: bool) -> Label {
    if b { Label::Tree } else { Label::NonTree }
}

proptest! {
    #[test]
    fn pndvi_antisymmetric_and_offset_invariant(n in -40.0f64..20.0, g in -40.0f64..20.0, off in -20.0f64..20.0) {
        let a = pndvi(n, g).unwrap();
        prop_assert!(a > -1.0 && a < 1.0);
        prop_assert!((a + pndvi(g, n).unwrap()).abs() <= 1e-12);
        prop_assert!((a - pndvi(n + off, g + off).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn db_conversion_is_monotone_and_invertible(a in -60.0f64..30.0, b in -60.0f64..30.0) {
        let (la, lb) = (db_to_linear(a).unwrap(), db_to_linear(b).unwrap());
        prop_assert!(la > 0.0);
        if a < b { prop_assert!(la < lb) }
        prop_assert!((linear_to_db(la).unwrap() - a).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn normalized_values_stay_in_unit_interval(
        values in prop::collection::vec(-1e3f64..1e3, 1..200),
        probes in prop::collection::vec(prop_oneof![-1e6f64..1e6, Just(f64::NAN)], 1..50),
    ) {
        let norm = fit_column("c", values.iter().copied(), 1.0, 99.0).unwrap();
        for v in probes {
            let u = norm.apply(v);
            prop_assert!((0.0..=1.0).contains(&u), "{v} -> {u}");
        }
    }

    #[test]
    fn voxel_subsample_is_idempotent(c in cloud_strategy(300), grid in 0.2f64..3.0) {
        let once = voxel_subsample(&c, grid).unwrap();
        let twice = voxel_subsample(&once, grid).unwrap();
        prop_assert_eq!(&once.x, &twice.x);
        prop_assert_eq!(&once.label, &twice.label);
        prop_assert!(once.len() <= c.len());
    }

    #[test]
    fn metrics_ignore_point_order(pairs in labels_strategy(300), rot in 0usize..300) {
        let pred: Vec<Label> = pairs.iter().map(|p| lab(p.0)).collect();
        let truth: Vec<Label> = pairs.iter().map(|p| lab(p.1)).collect();
        let cm = confusion(&pred, &truth).unwrap();
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        let k = rot % pairs.len();
        let (mut p2, mut t2) = (pred.clone(), truth.clone());
        p2.rotate_left(k);
        t2.rotate_left(k);
        p2.reverse();
        t2.reverse();
        prop_assert_eq!(confusion(&p2, &t2).unwrap(), cm);
        let m = metrics(&cm).unwrap();
        prop_assert!(m.miou >= 0.0 && m.miou <= 100.0);
        prop_assert_eq!(m.miou, (m.iou_tree + m.iou_nontree) / 2.0);
    }

    #[test]
    fn knn_matches_scan(c in cloud_strategy(200), q in (0.0f64..20.0, 0.0f64..20.0, 0.0f64..5.0), k in 1usize..20) {
        let idx = build_index(&c, None).unwrap();
        let q = [q.0, q.1, q.2];
        let got: Vec<(usize, f64)> = idx.knn(q, k).iter().map(|h| (h.id, h.dist)).collect();
        prop_assert_eq!(got, common::knn(&c, q, k, None));
    }

    #[test]
    fn columnar_round_trip(c in cloud_strategy(100)) {
        let back = decode_columnar(&encode_columnar(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn label_file_round_trip(pairs in labels_strategy(100)) {
        let labels: Vec<Label> = pairs.iter().map(|p| lab(p.0)).collect();
        prop_assert_eq!(parse_labels(&format_labels(&labels).unwrap(), labels.len()).unwrap(), labels);
    }

    #[test]
    fn split_keeps_tiles_whole(c in cloud_strategy(300), tile in 1.0f64..8.0, seed in any::<u64>()) {
        let s = split_plots(&c, [0.6, 0.2, 0.2], tile, seed).unwrap();
        let mut seen = std::collections::HashMap::new();
        for i in 0..c.len() {
            let tag = *seen.entry(tile_key(c.x[i], c.y[i], tile)).or_insert(s.assignment[i]);
            prop_assert_eq!(tag, s.assignment[i]);
        }
    }
}
