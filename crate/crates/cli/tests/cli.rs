//! Command-level tests against the built binary and the bundled fixture
//! dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use beetscan_core::annot::load_annotations;
use beetscan_core::geometry::{obb_from_corners, rasterize, rasterize_polygon};
use beetscan_core::synthesis::synthesize_instances;
use beetscan_core::SemanticClass;

fn beetscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beetscan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/annotations.json")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn stats_prints_the_fixture_table() {
    let output = beetscan(&["stats", "--dataset", fixture_dataset().to_str().unwrap()]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("Sample"), "{text}");
    assert!(text.contains("Total"), "{text}");
    // hand-counted fixture totals: 9 images, 18 beets
    assert!(text.contains("9"), "{text}");
    assert!(text.contains("18"), "{text}");
}

#[test]
fn stats_writes_machine_readable_output_that_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let output = beetscan(&[
        "stats",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--pixels",
    ]);
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(doc["total_images"], 9);
    assert_eq!(doc["total_beets"], 18);
    let csv = std::fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert!(csv.starts_with("stage,images,beets"));
    assert_eq!(csv.lines().count(), 5);
    let pixels = std::fs::read_to_string(dir.path().join("label_pixels.csv")).unwrap();
    assert_eq!(pixels.lines().count(), 10);
    assert!(dir.path().join("label_totals.csv").exists());
}

#[test]
fn stats_on_an_empty_dataset_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("empty.json");
    std::fs::write(&dataset, r#"{"version": 1, "images": []}"#).unwrap();
    let output = beetscan(&["stats", "--dataset", dataset.to_str().unwrap()]);
    assert!(output.status.success());
    assert!(stdout(&output).contains("Total"));
}

#[test]
fn convert_writes_a_valid_one_class_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("instances.json");
    let output = beetscan(&[
        "convert",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());

    let converted = load_annotations(&out).unwrap();
    assert!(converted.warnings.is_empty());
    let originals = load_annotations(&fixture_dataset()).unwrap().images;
    for (converted, original) in converted.images.iter().zip(&originals) {
        assert!(converted
            .regions
            .iter()
            .all(|r| r.class() == SemanticClass::Beet));
        // one region per instance that has any non-Leaf region
        assert_eq!(converted.instance_ids(), original.instance_ids());
        assert_eq!(converted.regions.len(), converted.instance_ids().len());
    }
    assert!(dir.path().join("instances.report.json").exists());
}

#[test]
fn convert_reports_leaf_only_instances() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    std::fs::write(
        &dataset,
        r#"{"version": 1, "images": [{
            "id": "a", "path": "a.png", "width": 64, "height": 64, "group_id": "g",
            "meta": {"stage": "Sample", "lighting": "Sunny", "moisture": "Dry", "location": "A", "session": 0},
            "regions": [
                {"class": "Beet", "instance": 0, "polygon": [[4, 4], [30, 4], [30, 30], [4, 30]]},
                {"class": "Leaf", "instance": 1, "polygon": [[40, 40], [60, 40], [60, 60], [40, 60]]}
            ],
            "markers": []}]}"#,
    )
    .unwrap();
    let out = dir.path().join("instances.json");
    let output = beetscan(&["convert", "--dataset", dataset.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("only Leaf"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("instances.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["leaf_only_instances"][0][1], 1);
}

#[test]
fn split_is_deterministic_and_grouped() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for out in [&out_a, &out_b] {
        let output = beetscan(&[
            "split",
            "--dataset",
            fixture_dataset().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--ratios",
            "0.7,0.15,0.15",
            "--seed",
            "11",
        ]);
        assert!(output.status.success());
    }
    let bytes_a = std::fs::read(&out_a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&out_b).unwrap());

    // paired sides stay together
    let split: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    for pair in [["s00a", "s00b"], ["s01a", "s01b"]] {
        let containing = ["train", "val", "test"]
            .iter()
            .filter(|set| {
                let ids = split[**set].as_array().unwrap();
                pair.iter().any(|id| ids.iter().any(|v| v == id))
            })
            .count();
        assert_eq!(containing, 1, "pair {pair:?} split across sets");
    }
}

fn write_oracle_seg_predictions(dir: &Path) -> PathBuf {
    let images = load_annotations(&fixture_dataset()).unwrap().images;
    let mut lines = String::new();
    for image in &images {
        let mask = rasterize(&image.regions, image.width, image.height);
        let mask_path = dir.join(format!("{}_pred.png", image.image_id));
        mask.write_png(&mask_path).unwrap();
        lines.push_str(&format!(
            "{{\"image_id\": \"{}\", \"mask_path\": \"{}\"}}\n",
            image.image_id,
            mask_path.file_name().unwrap().to_str().unwrap()
        ));
    }
    let pred = dir.join("preds.jsonl");
    std::fs::write(&pred, lines).unwrap();
    pred
}

#[test]
fn evaluate_seg_oracle_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let pred = write_oracle_seg_predictions(dir.path());
    let out = dir.path().join("metrics");
    let output = beetscan(&[
        "evaluate",
        "--task",
        "seg",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--breakdown",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = stdout(&output);
    // Table-2-shaped column order
    for name in ["Bg", "Beet", "Cut", "Leaf", "Soil", "Dmg", "Rot", "Mean"] {
        assert!(text.contains(name), "missing column {name}: {text}");
    }
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["mean"], 1.0);
    assert!(out.join("meta_breakdown.csv").exists());
    let csv = std::fs::read_to_string(out.join("iou.csv")).unwrap();
    assert!(csv.contains("Mean,1.000000"));
}

#[test]
fn evaluate_det_and_obb_oracle_predictions_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let images = load_annotations(&fixture_dataset()).unwrap().images;

    // box detections from the synthesized instances themselves
    let mut det_lines = String::new();
    let mut obb_lines = String::new();
    for image in &images {
        let (instances, _) = synthesize_instances(image);
        for instance in instances {
            let mask = rasterize_polygon(instance.polygon.vertices(), image.width, image.height);
            let bbox = mask.bbox().unwrap();
            det_lines.push_str(&format!(
                "{{\"image_id\": \"{}\", \"class\": \"Beet\", \"score\": 1.0, \"box\": [{}, {}, {}, {}]}}\n",
                image.image_id, bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max
            ));
        }
        for marker in &image.markers {
            let obb = obb_from_corners(marker.corners()).unwrap();
            obb_lines.push_str(&format!(
                "{{\"image_id\": \"{}\", \"class\": \"{}\", \"score\": 0.9, \"obb\": {{\"cx\": {}, \"cy\": {}, \"w\": {}, \"h\": {}, \"angle\": {}}}}}\n",
                image.image_id,
                marker.class().name(),
                obb.center[0],
                obb.center[1],
                obb.width,
                obb.height,
                obb.angle
            ));
        }
    }
    let det_pred = dir.path().join("det.jsonl");
    std::fs::write(&det_pred, det_lines).unwrap();
    let obb_pred = dir.path().join("obb.jsonl");
    std::fs::write(&obb_pred, obb_lines).unwrap();

    let det_out = dir.path().join("det_metrics");
    let output = beetscan(&[
        "evaluate",
        "--task",
        "det",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--pred",
        det_pred.to_str().unwrap(),
        "--out",
        det_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(det_out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["mean"], 1.0);

    let obb_out = dir.path().join("obb_metrics");
    let pr_out = dir.path().join("pr.csv");
    let output = beetscan(&[
        "evaluate",
        "--task",
        "obb",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--pred",
        obb_pred.to_str().unwrap(),
        "--out",
        obb_out.to_str().unwrap(),
        "--pr-out",
        pr_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = stdout(&output);
    assert!(text.contains("Ruler"), "{text}");
    assert!(text.contains("Sign"), "{text}");
    assert!(text.contains("Mean"), "{text}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(obb_out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["mean"], 1.0);
    let pr = std::fs::read_to_string(&pr_out).unwrap();
    assert!(pr.starts_with("class,recall,precision"));
    // 101 interpolation points per class
    assert_eq!(pr.lines().count(), 1 + 2 * 101);
}

#[test]
fn evaluate_rejects_unknown_image_ids() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("preds.jsonl");
    std::fs::write(&pred, "{\"image_id\": \"nope\", \"mask_path\": \"x.png\"}\n").unwrap();
    let output = beetscan(&[
        "evaluate",
        "--task",
        "seg",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("nope"));
}

#[test]
fn inspect_without_markers_has_no_mass_fields_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("ds.json");
    std::fs::write(
        &dataset,
        r#"{"version": 1, "images": [{
            "id": "nomark", "path": "nomark.png", "width": 200, "height": 150, "group_id": "g",
            "meta": {"stage": "Harvest", "lighting": "Diffuse", "moisture": "Wet", "location": "C", "session": 6},
            "regions": [{"class": "Beet", "instance": 0, "polygon": [[10, 10], [90, 10], [90, 80], [10, 80]]}],
            "markers": []}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = beetscan(&[
        "inspect",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--oracle",
        "--tier",
        "small",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = std::fs::read_to_string(out.join("nomark.json")).unwrap();
    assert!(!report.contains("mass_g"));
    assert!(!report.contains("mm_per_px"));
    assert!(report.contains("areas_px"));
    assert!(out.join("nomark_mask.png").exists());
}

#[test]
fn inspect_runs_against_a_scripted_adapter() {
    use beetscan_core::{BinaryMask, SemanticMask};
    let dir = tempfile::tempdir().unwrap();

    // dataset: one 100x80 image with a real PNG on disk
    let dataset = dir.path().join("ds.json");
    std::fs::write(
        &dataset,
        r#"{"version": 1, "images": [{
            "id": "adapted", "path": "adapted.png", "width": 100, "height": 80, "group_id": "g",
            "meta": {"stage": "Sample", "lighting": "Sunny", "moisture": "Dry", "location": "A", "session": 0},
            "regions": [{"class": "Beet", "instance": 0, "polygon": [[10, 10], [60, 10], [60, 50], [10, 50]]}],
            "markers": []}]}"#,
    )
    .unwrap();
    beetscan_core::RgbRaster::filled(100, 80, [90, 90, 90])
        .write_png(&dir.path().join("adapted.png"))
        .unwrap();

    // canned responses: a 100x80 instance mask, a small-tier patch mask,
    // one marker
    let mut instance_mask = BinaryMask::new(100, 80);
    for y in 10..50 {
        for x in 10..60 {
            instance_mask.set(x, y, true);
        }
    }
    let instance_png = dir.path().join("instance.png");
    instance_mask.write_png(&instance_png).unwrap();
    let patch_png = dir.path().join("patch_mask.png");
    SemanticMask::filled(512, 288, beetscan_core::SemanticClass::Beet)
        .write_png(&patch_png)
        .unwrap();

    let write_response = |name: &str, body: String| {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    };
    let inst = write_response(
        "inst.json",
        format!(
            "{{\"ok\": true, \"instances\": [{{\"mask\": \"{}\", \"box\": [10, 10, 60, 50], \"score\": 0.9}}]}}\n",
            instance_png.display()
        ),
    );
    let seg = write_response(
        "seg.json",
        format!("{{\"ok\": true, \"mask\": \"{}\"}}\n", patch_png.display()),
    );
    let markers = write_response(
        "markers.json",
        "{\"ok\": true, \"markers\": [{\"obb\": {\"cx\": 80, \"cy\": 70, \"w\": 20, \"h\": 8, \"angle\": 0}, \"class\": \"Ruler\", \"score\": 0.8}]}\n".to_string(),
    );
    let script = dir.path().join("adapter.sh");
    std::fs::write(
        &script,
        format!(
            "#!/bin/sh\nwhile read line; do\n  case \"$line\" in\n    *instances*) cat '{}';;\n    *segment*) cat '{}';;\n    *markers*) cat '{}';;\n  esac\ndone\n",
            inst.display(),
            seg.display(),
            markers.display()
        ),
    )
    .unwrap();

    let out = dir.path().join("out");
    let output = beetscan(&[
        "inspect",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--adapter",
        &format!("sh {}", script.display()),
        "--tier",
        "small",
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("adapted.json")).unwrap()).unwrap();
    assert_eq!(report["beets"][0]["score"], 0.9);
    // the all-Beet patch covers the whole instance mask
    assert_eq!(report["beets"][0]["areas_px"]["Beet"], 50 * 40);
    assert!(out.join("adapted_mask.png").exists());
}

#[test]
fn inspect_requires_a_backend_choice() {
    let output = beetscan(&[
        "inspect",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--out",
        "/tmp/never",
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("--oracle"));
}

#[test]
fn invalid_dataset_parse_error_names_a_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("bad.json");
    std::fs::write(&dataset, "{\"version\": 1, \"images\": [}]}").unwrap();
    let output = beetscan(&["stats", "--dataset", dataset.to_str().unwrap()]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("byte"));
}

#[test]
fn machine_readable_split_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("split.json");
    let output = beetscan(&[
        "split",
        "--dataset",
        fixture_dataset().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let split = beetscan_core::DatasetSplit::load(&out).unwrap();
    let total = split.train.len() + split.val.len() + split.test.len();
    assert_eq!(total, 9);
}
