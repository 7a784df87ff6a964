use std::path::{Path, PathBuf};
use std::process::Command;

use repri::taskio::{
    downsample_mask, read_container, write_task, ContainerFile, DatasetIndex, EpisodeSampler,
};
use repri::types::PixelMask;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/exporter")
}

fn mask_of(file: &ContainerFile, name: &str) -> PixelMask {
    let a = file.require(name).unwrap();
    let [h, w] = a.dims() else { panic!("{name} is not 2-d") };
    PixelMask::new(*h as usize, *w as usize, a.as_u8().unwrap().to_vec()).unwrap()
}

#[test]
fn downsampling_matches_exporter() {
    let file = read_container(fixtures().join("masks.rpri")).unwrap();
    let n = file.arrays().len() / 2;
    assert_eq!(n, 7);
    for i in 0..n {
        let full = mask_of(&file, &format!("full_{i}"));
        let expected = mask_of(&file, &format!("small_{i}"));
        let got = downsample_mask(&full, expected.height(), expected.width()).unwrap();
        assert_eq!(got.values(), expected.values(), "mask {i}");
    }
}

#[test]
fn exporter_files_reencode_identically() {
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "rpri") {
            let bytes = std::fs::read(&path).unwrap();
            assert_eq!(ContainerFile::decode(&bytes).unwrap().encode(), bytes, "{}", path.display());
        }
    }
}

#[test]
fn exporter_index_yields_episodes() {
    let index = DatasetIndex::load(fixtures().join("index.tsv")).unwrap();
    assert_eq!(index.records().len(), 6);
    assert_eq!(index.records()[1].class_id, 4);
    let sampler = EpisodeSampler::new(index, 2).unwrap();
    let (class, task) = sampler.episode(11).unwrap();
    assert!([3, 4].contains(&class));
    assert_eq!(task.shots(), 2);
    assert_eq!((task.query().height(), task.query().width(), task.query().channels()), (4, 5, 6));
    assert_eq!(sampler.episode(11).unwrap().1, task);
}

#[test]
fn bench_over_exporter_index() {
    let dir = tempfile::tempdir().unwrap();
    let run = |mode: &str| {
        let out = dir.path().join(mode);
        let o = Command::new(env!("CARGO_BIN_EXE_repri"))
            .args(["bench", "--tasks", fixtures().join("index.tsv").to_str().unwrap()])
            .args(["--shots", "1", "--runs", "2", "--tasks-per-run", "5", "--mode", mode])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(v["config"]["source"]["kind"], "index");
        v["mean_miou"].as_f64().unwrap()
    };
    for mode in ["standard", "oracle"] {
        assert!((0.0..=1.0).contains(&run(mode)));
    }
}

#[test]
fn python_reads_rust_containers() {
    if Command::new("python3").arg("-c").arg("import numpy").output().map_or(true, |o| !o.status.success()) {
        eprintln!("python3 with numpy not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let task = repri::taskio::synth_task(&repri::taskio::SynthConfig::default(), 3).unwrap();
    let path = dir.path().join("t.rpri");
    write_task(&path, &task, Some(2)).unwrap();
    let script = "import sys; from repri_export import read_container, encode; \
                  a = read_container(sys.argv[1]); \
                  print(','.join(f'{k}:{v.shape}' for k, v in a.items())); \
                  assert encode(a) == open(sys.argv[1], 'rb').read()";
    let o = Command::new("python3")
        .args(["-c", script, path.to_str().unwrap()])
        .env("PYTHONPATH", Path::new(env!("CARGO_MANIFEST_DIR")).join("../../exporter"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("support_features:(1, 16, 16, 16)"), "{out}");
    assert!(out.contains("query_mask:(16, 16)"), "{out}");
}
