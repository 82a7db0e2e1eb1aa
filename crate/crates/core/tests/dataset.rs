use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use maqp_core::data::{load_all, load_dataset, split_records, synth_dataset, write_manifest_dataset};

#[test]
fn manifest_round_trip_preserves_scenes_to_storage_precision() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_dataset(3, 4, 64, 64, 3).unwrap();
    write_manifest_dataset(dir.path(), &scenes).unwrap();
    let back = load_all(dir.path()).unwrap();
    assert_eq!(back.len(), scenes.len());
    for (a, b) in scenes.iter().zip(&back) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.hand_mask, b.hand_mask);
        assert_eq!(a.grasps.len(), b.grasps.len());
        let rgb_err = a
            .frame
            .rgb
            .data()
            .iter()
            .zip(b.frame.rgb.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(rgb_err <= 0.5 / 255.0 + 1e-12, "rgb error {rgb_err}");
        let depth_err = a
            .frame
            .depth_m()
            .iter()
            .zip(b.frame.depth_m())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(depth_err <= 0.5e-3 + 1e-9, "depth error {depth_err}");
    }

    // A second trip through storage is exact.
    let dir2 = tempfile::tempdir().unwrap();
    write_manifest_dataset(dir2.path(), &back).unwrap();
    assert_eq!(load_all(dir2.path()).unwrap(), back);
}

#[test]
fn split_of_ten_is_nine_and_one_and_partitions() {
    let scenes = synth_dataset(0, 10, 64, 64, 2).unwrap();
    let (train, test) = split_records(scenes.clone(), 0.9, 7);
    assert_eq!((train.len(), test.len()), (9, 1));
    let mut ids: Vec<&str> = train.iter().chain(&test).map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    let mut expected: Vec<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    expected.sort_unstable();
    assert_eq!(ids, expected);

    let (train2, test2) = split_records(scenes, 0.9, 7);
    assert_eq!(train, train2);
    assert_eq!(test, test2);
}

#[test]
fn load_dataset_splits_from_disk_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest_dataset(dir.path(), &synth_dataset(0, 10, 64, 64, 2).unwrap()).unwrap();
    let a = load_dataset(dir.path(), 0.9, 11).unwrap();
    let b = load_dataset(dir.path(), 0.9, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.0.len(), a.1.len()), (9, 1));
    assert!(load_dataset(dir.path(), 1.5, 11).is_err());
}

fn write_cornell_scene(dir: &Path, stem: &str, rects: &[[(f64, f64); 4]]) {
    let (w, h) = (48u32, 40u32);
    let rgb = ImageBuffer::from_fn(w, h, |x, y| Rgb([(x * 5) as u8, (y * 6) as u8, 90]));
    rgb.save(dir.join(format!("{stem}r.png"))).unwrap();
    let depth = ImageBuffer::from_fn(w, h, |x, _| Luma([600u16 + x as u16 * 4]));
    depth.save(dir.join(format!("{stem}d.png"))).unwrap();
    let mut text = String::new();
    for r in rects {
        for (x, y) in r {
            text.push_str(&format!("{x:.2} {y:.2}\n"));
        }
    }
    fs::write(dir.join(format!("{stem}cpos.txt")), text).unwrap();
}

#[test]
fn cornell_layout_grasp_count_matches_corner_lines() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("01");
    fs::create_dir(&sub).unwrap();
    let rect = |cx: f64, cy: f64| {
        [
            (cx - 6.0, cy - 2.0),
            (cx + 6.0, cy - 2.0),
            (cx + 6.0, cy + 2.0),
            (cx - 6.0, cy + 2.0),
        ]
    };
    write_cornell_scene(&sub, "pcd0100", &[rect(20.0, 20.0), rect(25.0, 18.0), rect(30.0, 22.0)]);
    write_cornell_scene(&sub, "pcd0101", &[rect(15.0, 15.0)]);

    let scenes = load_all(dir.path()).unwrap();
    assert_eq!(scenes.len(), 2);
    for s in &scenes {
        let lines = fs::read_to_string(sub.join(format!("{}cpos.txt", s.id)))
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty())
            .count();
        assert_eq!(s.grasps.len(), lines / 4, "{}", s.id);
        assert_eq!(s.hw(), (40, 48));
        assert!(s.hand_mask.is_none());
    }
    let d = scenes[0].frame.depth_m();
    assert!((d[0] - 0.6).abs() < 1e-9);
    assert!((d[47] - (0.6 + 47.0 * 0.004)).abs() < 1e-9);
}

#[test]
fn cornell_rejects_partial_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    write_cornell_scene(dir.path(), "pcd0200", &[]);
    fs::write(dir.path().join("pcd0200cpos.txt"), "1 2\n3 4\n5 6\n").unwrap();
    assert!(load_all(dir.path()).is_err());
}
