mod common;

use std::fs;
use std::path::Path;

use common::*;
use fundus_core::raster::ProbabilityMap;
use fundus_forge::datasets::{load_dataset, DatasetKind, Split};
use fundus_forge::io::{read_mask, read_raster, write_raster, Raster, RasterFormat};
use fundus_forge::pfm::write_pfm;
use fundus_forge::provenance::Provenance;

fn write_label_predictions(root: &Path, kind: DatasetKind, observer: &str, dir: &Path, invert: bool) {
    fs::create_dir_all(dir).unwrap();
    for s in load_dataset(root, kind).unwrap().iter().filter(|s| s.split == Split::Test) {
        let mut label = read_mask(&s.labels[observer]).unwrap();
        if invert {
            label = label.invert();
        }
        write_pfm(&ProbabilityMap::from_mask(&label), &dir.join(format!("{}.pfm", s.id))).unwrap();
    }
}

#[test]
fn help_and_usage_errors() {
    for sub in ["prep", "eval", "overlay", "split", "augment-preview", "doctor", "config"] {
        let o = forge(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    let o = forge(&["prep", "--bogus"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(forge(&[]).status.code(), Some(64));
    assert_eq!(forge(&["split", "x", "--dataset", "hrf"]).status.code(), Some(64));
    assert_eq!(forge(&["config", "show", "--set", "clahe.nope=1"]).status.code(), Some(64));
}

#[test]
fn config_show_prints_defaults_and_overrides() {
    let o = forge(&["config", "show"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let cfg = fundus_forge::config::PipelineConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, Default::default());
    for key in ["clip_limit = 2.0", "size = 1024", "seed = 42", "threshold = 0.5"] {
        assert!(text.contains(key), "{key} in {text}");
    }

    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("c.toml");
    fs::write(&file, "[resize]\nsize = 512\n").unwrap();
    let o = forge(&["config", "show", "--config", s(&file), "--set", "folds.k=4"]);
    let cfg = fundus_forge::config::PipelineConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!((cfg.resize.size, cfg.folds.k), (512, 4));

    let o = std::process::Command::new(env!("CARGO_BIN_EXE_fundus-forge"))
        .args(["config", "show"])
        .env("FUNDUS_FORGE_CONFIG", &file)
        .output()
        .unwrap();
    assert!(stdout(&o).contains("size = 512"));
}

#[test]
fn prep_single_photo_and_unreadable_file() {
    let tmp = tempfile::tempdir().unwrap();
    let f = dataset_photo(DatasetKind::Drive, 0, 0.5);
    let photo = tmp.path().join("eye.png");
    write_raster(&Raster::Rgb(f.photo), &photo, RasterFormat::Png).unwrap();
    let out = tmp.path().join("out");
    let o = forge(&["prep", s(&photo), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let img = read_raster(&out.join("eye.png")).unwrap();
    assert_eq!(img.dims(), (1024, 1024));
    assert_eq!(img.channels(), 1);
    Provenance::from_json(&fs::read_to_string(out.join("eye.json")).unwrap()).unwrap();

    let bad = tmp.path().join("broken.png");
    fs::write(&bad, b"\x89PNG\r\n\x1a\nnot really").unwrap();
    let o = forge(&["prep", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("broken.png"), "{}", stderr(&o));

    let o = forge(&["prep", s(&tmp.path().join("nope.png")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.png"));
}

#[test]
fn prep_directory_isolates_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir_all(&input).unwrap();
    for i in 0..3 {
        let f = dataset_photo(DatasetKind::Stare, i, 0.3);
        write_raster(&Raster::Rgb(f.photo), &input.join(format!("p{i}.png")), RasterFormat::Png).unwrap();
    }
    fs::write(input.join("p1.png"), b"garbage").unwrap();
    fs::write(input.join("notes.txt"), b"ignored").unwrap();
    let out = tmp.path().join("out");
    let o = forge(&["prep", s(&input), "--out", s(&out), "--set", "resize.size=128"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p1"));
    assert!(out.join("p0.png").is_file() && out.join("p2.png").is_file());
    assert!(!out.join("p1.png").exists());
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
}

#[test]
fn eval_labels_as_predictions_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("DRIVE");
    write_dataset(&root, DatasetKind::Drive, 0.3);
    let pred = tmp.path().join("pred");
    write_label_predictions(&root, DatasetKind::Drive, "1stHO", &pred, false);
    let report = tmp.path().join("report");
    let o = forge(&["eval", s(&pred), "--dataset-root", s(&root), "--dataset", "drive", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("DRIVE (1stHO)")).unwrap();
    assert_eq!(row.matches("1.000 (0.000)").count(), 4, "{text}");
    assert!(text.lines().next().unwrap().contains("Dice / F1"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report.join("metrics_DRIVE_1stHO.json")).unwrap()).unwrap();
    assert_eq!(json["fold_seed"], 42);
    assert_eq!(json["threshold"], 0.5);
    assert_eq!(json["fov_source"], "dataset");
    assert_eq!(json["summary"]["dice"]["mean"], 1.0);

    // The first observer's labels are not perfect against the second observer.
    let o = forge(&["eval", s(&pred), "--dataset-root", s(&root), "--dataset", "drive", "--observer", "2ndHO"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().find(|l| l.starts_with("DRIVE (2ndHO)")).unwrap().to_string();
    assert!(row.contains("1.000 (0.000)"), "sensitivity against a subset: {row}");
    assert!(row.matches("1.000 (0.000)").count() < 4, "{row}");

    let o = forge(&["eval", s(&pred), "--dataset-root", s(&root), "--dataset", "drive", "--observer", "vk"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_inverted_predictions_and_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("STARE");
    write_dataset(&root, DatasetKind::Stare, 0.25);
    let pred = tmp.path().join("pred");
    write_label_predictions(&root, DatasetKind::Stare, "ah", &pred, true);
    let o = forge(&["eval", s(&pred), "--dataset-root", s(&root), "--dataset", "stare", "--fov", "fov"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = stdout(&o).lines().find(|l| l.starts_with("STARE (ah)")).unwrap().to_string();
    let cells: Vec<&str> = row["STARE (ah)".len()..].split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    assert_eq!(cells[1], "0.000 (0.000)", "{row}");
    assert!(stdout(&o).contains("Synthesized"));

    fs::remove_file(pred.join("im0044.pfm")).unwrap();
    fs::remove_file(pred.join("im0324.pfm")).unwrap();
    let o = forge(&["eval", s(&pred), "--dataset-root", s(&root), "--dataset", "stare"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("im0044.pfm") && err.contains("im0324.pfm"), "{err}");
}

#[test]
fn eval_fold_directories_and_standardized_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("CHASE");
    write_dataset(&root, DatasetKind::ChaseDb1, 0.2);
    let cache = tmp.path().join("cache");
    let o = forge(&["prep", s(&root), "--dataset", "chase_db1", "--out", s(&cache), "--set", "resize.size=160"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // Standardized labels as standardized-size predictions, two identical folds.
    for fold in ["fold_0", "fold_1"] {
        let dir = tmp.path().join("pred").join(fold);
        fs::create_dir_all(&dir).unwrap();
        for s in load_dataset(&root, DatasetKind::ChaseDb1).unwrap() {
            let label = read_mask(&cache.join(format!("{}_1stHO.png", s.id))).unwrap();
            write_pfm(&ProbabilityMap::from_mask(&label), &dir.join(format!("{}.pfm", s.id))).unwrap();
        }
    }
    let o = forge(&["eval", s(&tmp.path().join("pred")), "--dataset-root", s(&root), "--dataset", "chase", "--ci", "student-t"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1).unwrap().matches("1.000 (0.000)").count(), 4, "{text}");
    assert!(text.contains("2 fold(s), 28 image(s)"), "{text}");
}

#[test]
fn split_writes_trainer_json() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("DRIVE");
    write_dataset(&root, DatasetKind::Drive, 0.1);
    let out = tmp.path().join("split.json");
    let o = forge(&["split", s(&root), "--dataset", "drive", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(json["k"], 5);
    assert_eq!(json["seed"], 42);
    assert_eq!(json["dataset"], "DRIVE");
    let assignment = json["assignment"].as_object().unwrap();
    assert_eq!(assignment.len(), 20);
    assert!(assignment.keys().all(|k| k.parse::<u32>().unwrap() >= 21));
    for fold in json["folds"].as_array().unwrap() {
        assert_eq!(fold["validation"].as_array().unwrap().len(), 4);
        assert_eq!(fold["training"].as_array().unwrap().len(), 16);
    }
    let again = forge(&["split", s(&root), "--dataset", "drive"]);
    assert_eq!(stdout(&again).as_bytes(), fs::read(&out).unwrap());

    let o = forge(&["split", s(&root), "--dataset", "drive", "--k", "25"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("25"));
}

#[test]
fn augment_preview() {
    let tmp = tempfile::tempdir().unwrap();
    let f = dataset_photo(DatasetKind::Drive, 3, 0.2);
    let photo = tmp.path().join("eye.png");
    write_raster(&Raster::Rgb(f.photo), &photo, RasterFormat::Png).unwrap();
    let cache = tmp.path().join("cache");
    assert_eq!(forge(&["prep", s(&photo), "--out", s(&cache), "--set", "resize.size=96"]).status.code(), Some(0));
    let std_img = cache.join("eye.png");

    let none = tmp.path().join("none");
    let o = forge(&["augment-preview", s(&std_img), "-n", "0", "--out", s(&none)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!none.exists());

    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let oa = forge(&["augment-preview", s(&std_img), "-n", "8", "--seed", "7", "--out", s(&a)]);
    let ob = forge(&["augment-preview", s(&std_img), "-n", "8", "--seed", "7", "--out", s(&b)]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(snapshot(&a).len(), 8);
    assert_eq!(stdout(&oa), stdout(&ob));
    assert_eq!(stdout(&oa).lines().filter(|l| l.contains("angle=") && l.contains("contrast=")).count(), 8);

    let c = tmp.path().join("c");
    forge(&["augment-preview", s(&std_img), "-n", "8", "--seed", "8", "--out", s(&c)]);
    assert_ne!(snapshot(&a), snapshot(&c));

    // Non-square input is refused.
    let o = forge(&["augment-preview", s(&photo), "-n", "1", "--out", s(&c)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn overlay_matches_map() {
    let tmp = tempfile::tempdir().unwrap();
    let f = dataset_photo(DatasetKind::Drive, 0, 0.1);
    let photo = tmp.path().join("eye.png");
    write_raster(&Raster::Rgb(f.photo.clone()), &photo, RasterFormat::Png).unwrap();
    let (w, h) = f.photo.dims();
    let map = tmp.path().join("empty.pfm");
    write_pfm(&ProbabilityMap::from_vec(w, h, vec![0.0; w * h]).unwrap(), &map).unwrap();
    let out = tmp.path().join("o.png");
    let o = forge(&["overlay", s(&photo), s(&map), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_raster(&out).unwrap(), Raster::Rgb(f.photo.clone()));

    // A square map of another size standardizes the photo first.
    write_pfm(&ProbabilityMap::from_vec(64, 64, vec![1.0; 64 * 64]).unwrap(), &map).unwrap();
    let o = forge(&["overlay", s(&photo), s(&map), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let img = read_raster(&out).unwrap().into_rgb();
    assert_eq!(img.dims(), (64, 64));
    assert!(img.data().iter().all(|px| px[0] >= 128 && px[1] == px[2]));

    write_pfm(&ProbabilityMap::from_vec(30, 20, vec![1.0; 600]).unwrap(), &map).unwrap();
    assert_eq!(forge(&["overlay", s(&photo), s(&map), "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn doctor_reports_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("DRIVE");
    write_dataset(&root, DatasetKind::Drive, 0.1);
    let o = forge(&["doctor", s(&root), "--dataset", "drive"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("140/140"));

    fs::rename(root.join("test/images/05_test.png"), root.join("test/images/05_test.tif")).unwrap();
    fs::remove_file(root.join("training/mask/22_training_mask.png")).unwrap();
    let o = forge(&["doctor", s(&root), "--dataset", "drive"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("test/images/05_test.png"), "{text}");
    assert!(text.contains("training/mask/22_training_mask.png"));
    assert!(text.contains("05_test.tif"));
}
