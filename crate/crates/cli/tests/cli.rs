use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use handseg::rgbd::{load_sequence, write_sequence};
use handseg::synth::{annulus, DEFAULT_INTRINSICS};
use handseg::{BinaryMask, CameraIntrinsics, DepthFrame, RegisteredFramePair, RgbFrame};
use serde_json::Value;
use tempfile::TempDir;

fn handseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handseg")).args(args).output().expect("spawn handseg")
}

fn ok(args: &[&str]) -> String {
    let out = handseg(args);
    assert!(
        out.status.success(),
        "handseg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = handseg(args);
    assert!(!out.status.success(), "handseg {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, seed: &str, frames: &str) {
    ok(&["synth", "--out", p(dir), "--seed", seed, "--frames", frames]);
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SMALL_K: CameraIntrinsics = CameraIntrinsics { fx: 60.0, fy: 60.0, cx: 16.0, cy: 12.0 };

/// Two green blobs far apart in depth, no holes.
fn two_blob_sequence(dir: &Path, frames: usize) {
    let (w, h) = (64, 48);
    let pairs: Vec<_> = (1..=frames)
        .map(|i| {
            let mut rgb = RgbFrame::filled(w, h, [90, 90, 90]);
            let mut depth = DepthFrame::filled(w, h, 2000);
            for (c0, z) in [(5, 600), (40, 900)] {
                for r in 10..20 {
                    for c in c0 + i..c0 + i + 8 {
                        rgb.set(r, c, [30, 200, 60]);
                        depth.set(r, c, z);
                    }
                }
            }
            RegisteredFramePair::new(i, rgb, depth).unwrap()
        })
        .collect();
    write_sequence(dir, "two-blobs", &SMALL_K, &pairs).unwrap();
}

#[test]
fn synth_is_deterministic() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, "11", "5");
    synth(&b, "11", "5");
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    let seq = load_sequence(&a).unwrap();
    assert_eq!(seq.len(), 5);
    assert!(a.join("ground_truth.json").exists());
}

#[test]
fn label_is_deterministic_and_finds_both_blobs() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    two_blob_sequence(&seq, 3);
    let (a, b) = (t.path().join("a.json"), t.path().join("b.json"));
    ok(&["label", p(&seq), "--out", p(&a)]);
    ok(&["label", p(&seq), "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let json = read_json(&a);
    let anns = json["annotations"].as_array().unwrap();
    assert_eq!(anns.len(), 6);
    for image in 1..=3 {
        let n = anns.iter().filter(|x| x["image_id"] == image).count();
        assert_eq!(n, 2, "frame {image}");
    }
    assert!(anns.iter().all(|x| x["area"] == 80));
}

#[test]
fn propagate_rejects_unknown_label() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    two_blob_sequence(&seq, 2);
    let ann = t.path().join("a.json");
    ok(&["label", p(&seq), "--out", p(&ann)]);
    let out = t.path().join("p.json");
    let err = fails(&[
        "propagate", "--annotations", p(&ann), "--seed-instance", "1", "--object-label", "7", "--out", p(&out),
    ]);
    assert!(err.contains("object-label"), "{err}");
    let err = fails(&[
        "propagate", "--annotations", p(&ann), "--seed-instance", "3", "--object-label", "2", "--out", p(&out),
    ]);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(!out.exists());
}

#[test]
fn propagate_labels_static_blob_in_every_frame() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    two_blob_sequence(&seq, 4);
    let ann = t.path().join("a.json");
    ok(&["label", p(&seq), "--out", p(&ann)]);
    let out = t.path().join("p.json");
    ok(&["propagate", "--annotations", p(&ann), "--seed-instance", "1", "--object-label", "4", "--out", p(&out)]);
    let anns = read_json(&out)["annotations"].as_array().unwrap().clone();
    assert_eq!(anns.iter().filter(|a| a["category_id"] == 4).count(), 4);
    assert_eq!(anns.iter().filter(|a| a["category_id"] == 0).count(), 4);
}

#[test]
fn eval_against_self_and_empty() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    synth(&seq, "5", "6");
    let gt = seq.join("ground_truth.json");
    for mode in ["agnostic", "sensitive"] {
        let stdout = ok(&["eval", "--gt", p(&gt), "--pred", p(&gt), "--mode", mode]);
        let report: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
        assert_eq!(report["AP"], 100.0, "{mode}");
        assert_eq!(report["AP50"], 100.0, "{mode}");
    }
    let empty = t.path().join("empty.json");
    fs::write(&empty, "[]").unwrap();
    let stdout = ok(&["eval", "--gt", p(&gt), "--pred", p(&empty)]);
    let report: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(report["AP"], 0.0);

    let results = t.path().join("r.json");
    ok(&["export", "--annotations", p(&gt), "--format", "results", "--out", p(&results)]);
    let stdout = ok(&["eval", "--gt", p(&gt), "--pred", p(&results), "--mode", "sensitive"]);
    let report: Value = serde_json::from_str(stdout.lines().last().unwrap()).unwrap();
    assert_eq!(report["AP"], 100.0);
}

#[test]
fn backproject_principal_point() {
    let t = TempDir::new().unwrap();
    let k = t.path().join("k.json");
    fs::write(&k, r#"{"fx": 500.0, "fy": 400.0, "cx": 320.0, "cy": 240.0}"#).unwrap();
    let out = ok(&["backproject", "--pixel", "320", "240", "--depth", "1.25", "--intrinsics", p(&k)]);
    assert_eq!(out.trim(), "0.0 0.0 1.25");
    let out = ok(&["backproject", "--pixel", "820", "40", "--depth", "2", "--intrinsics", p(&k)]);
    assert_eq!(out.trim(), "2.0 -1.0 2.0");
    fails(&["backproject", "--pixel", "1", "1", "--depth", "0", "--intrinsics", p(&k)]);
}

#[test]
fn inpaint_without_holes_is_identity() {
    let t = TempDir::new().unwrap();
    let (seq, out) = (t.path().join("seq"), t.path().join("out"));
    two_blob_sequence(&seq, 2);
    ok(&["inpaint", p(&seq), "--out", p(&out)]);
    let (a, b) = (load_sequence(&seq).unwrap(), load_sequence(&out).unwrap());
    for i in 1..=2 {
        assert_eq!(a.frame(i).unwrap(), b.frame(i).unwrap());
    }
}

#[test]
fn label_requires_inpaint_on_holes() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    ok(&["synth", "--out", p(&seq), "--seed", "2", "--frames", "2", "--holes", "0.02"]);
    let ann = t.path().join("a.json");
    let err = fails(&["label", p(&seq), "--out", p(&ann)]);
    assert!(err.contains("--inpaint"), "{err}");
    ok(&["label", p(&seq), "--out", p(&ann), "--inpaint"]);
}

#[test]
fn seed_overlay_requires_instances_in_frame_one() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    let (w, h) = (32, 24);
    let pairs: Vec<_> = (1..=2)
        .map(|i| {
            let mut rgb = RgbFrame::filled(w, h, [90, 90, 90]);
            if i == 2 {
                for r in 5..12 {
                    for c in 5..12 {
                        rgb.set(r, c, [30, 200, 60]);
                    }
                }
            }
            RegisteredFramePair::new(i, rgb, DepthFrame::filled(w, h, 800)).unwrap()
        })
        .collect();
    write_sequence(&seq, "late", &SMALL_K, &pairs).unwrap();
    let ann = t.path().join("a.json");
    ok(&["label", p(&seq), "--out", p(&ann)]);
    let png = t.path().join("o.png");
    let err = fails(&["seed-overlay", p(&seq), "--annotations", p(&ann), "--out", p(&png)]);
    assert!(err.contains("frame 1"), "{err}");
    assert!(!png.exists());

    let seq2 = t.path().join("seq2");
    two_blob_sequence(&seq2, 1);
    ok(&["label", p(&seq2), "--out", p(&ann)]);
    let out = ok(&["seed-overlay", p(&seq2), "--annotations", p(&ann), "--out", p(&png)]);
    assert!(out.starts_with("2 instances"), "{out}");
    assert!(png.exists());
}

#[test]
fn distances_to_annulus_region() {
    let t = TempDir::new().unwrap();
    let seq = t.path().join("seq");
    synth(&seq, "9", "3");
    let k = DEFAULT_INTRINSICS;
    let (w, h) = (512, 424);

    // wheel rim at 1 m in front of the camera
    let rim = annulus([256.0, 212.0], 40.0, 48.0, w, h);
    let mut mask = BinaryMask::new(w, h);
    for px in &rim {
        mask.set(px.row as usize, px.col as usize, true);
    }
    let luma = image::GrayImage::from_fn(w as u32, h as u32, |c, r| {
        image::Luma([if mask.get(r as usize, c as usize) { 255 } else { 0 }])
    });
    luma.save(t.path().join("wheel.png")).unwrap();
    DepthFrame::filled(w, h, 1000).save_png(&t.path().join("wheel_depth.png")).unwrap();
    let regions = t.path().join("regions.json");
    fs::write(&regions, r#"[{"name": "wheel", "mask": "wheel.png", "depth": "wheel_depth.png"}]"#).unwrap();

    let gt = seq.join("ground_truth.json");
    let csv_path = t.path().join("d.csv");
    ok(&["distances", "--annotations", p(&gt), "--sequence", p(&seq), "--regions", p(&regions), "--out", p(&csv_path)]);
    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("frame,instance,region,distance_m"));

    let json = read_json(&gt);
    let anns = json["annotations"].as_array().unwrap();
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), anns.len());
    for (row, ann) in rows.iter().zip(anns) {
        let fields: Vec<_> = row.split(',').collect();
        assert_eq!(fields[0], ann["image_id"].to_string());
        assert_eq!(fields[2], "wheel");
        let c: Vec<f64> = ann["centroid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let expected = rim
            .iter()
            .map(|px| {
                let q = [(px.col as f64 - k.cx) / k.fx, (px.row as f64 - k.cy) / k.fy, 1.0];
                ((c[0] - q[0]).powi(2) + (c[1] - q[1]).powi(2) + (c[2] - q[2]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        let got: f64 = fields[3].parse().unwrap();
        assert!((got - expected).abs() < 1e-6, "{row}: expected {expected}");
    }
}
