mod common;

use common::*;
use meshfim_core::mesh::{connected_components, load_obj, FaceAdjacencyGraph};
use meshfim_core::synth;
use meshfim_core::tokenizer::{detokenize, FimSequence};
use meshfim_core::FaceSet;
use serde_json::json;

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = meshfim(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in ["detect", "sample-region", "serialize", "repair", "eval", "gate-vis", "serve"] {
        assert!(help.contains(sub), "{sub} missing from --help");
    }

    let out = meshfim(&["serialize", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(meshfim(&["frobnicate"]).status.code(), Some(2));

    let missing = dir.path().join("missing.obj");
    let out = meshfim(&["detect", "--input", arg(&missing), "--ref", arg(&missing), "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));

    let m = write_mesh(dir.path(), "m.obj", &sphere());
    let out = dir.path().join("out.obj");
    let report = dir.path().join("r.json");
    // detection needs a reference
    let code = meshfim(&["repair", "--input", arg(&m), "--out", arg(&out), "--report", arg(&report)]).status.code();
    assert_eq!(code, Some(2));
    let code = meshfim(&["sample-region", "--mesh", arg(&m), "--mode", "percolation", "--out", arg(&report)]).status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn detect_on_pristine_sphere_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_mesh(dir.path(), "sphere.obj", &sphere());
    let out = dir.path().join("broken.json");
    meshfim_ok(&["detect", "--input", arg(&m), "--ref", arg(&m), "--out", arg(&out)]);
    let doc = read_json(&out);
    assert_eq!(doc["v"], 1);
    assert_eq!(doc["clusters"], json!([]));
    assert_eq!(doc["views"].as_array().unwrap().len(), 48);
}

#[test]
fn detect_finds_a_hole_and_dumps_masks() {
    let dir = tempfile::tempdir().unwrap();
    let pristine = sphere();
    let region = bfs_region(&pristine, 200, 12, 0);
    let damaged = synth::delete_faces(&pristine, &region.target);
    let r = write_mesh(dir.path(), "ref.obj", &pristine);
    let m = write_mesh(dir.path(), "damaged.obj", &damaged);
    let out = dir.path().join("broken.json");
    let masks = dir.path().join("masks");
    meshfim_ok(&[
        "detect", "--input", arg(&m), "--ref", arg(&r), "--views", "8", "--res", "200", "--min-cluster", "3",
        "--out", arg(&out), "--masks", arg(&masks),
    ]);
    let doc = read_json(&out);
    let clusters = doc["clusters"].as_array().unwrap();
    assert!(!clusters.is_empty());
    // every clustered point carries its view and pixel
    let points = doc["points"].as_array().unwrap();
    for k in clusters.iter().flat_map(|c| c.as_array().unwrap()) {
        let p = &points[k.as_u64().unwrap() as usize];
        assert!(p["view"].as_u64().unwrap() < 8);
        assert_eq!(p["pixel"].as_array().unwrap().len(), 2);
    }
    let pngs = std::fs::read_dir(&masks).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "png");
    assert_eq!(pngs.count(), 8);
}

#[test]
fn sample_region_writes_a_connected_record() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = held_out();
    let graph = FaceAdjacencyGraph::build(&mesh);
    let m = write_mesh(dir.path(), "m.obj", &mesh);
    let out = dir.path().join("region.json");
    for mode in ["bfs", "percolation", "training"] {
        meshfim_ok(&[
            "sample-region", "--mesh", arg(&m), "--mode", mode, "--seed-face", "17", "--budget", "40", "--seed", "5",
            "--out", arg(&out),
        ]);
        let doc = read_json(&out);
        assert_eq!(doc["v"], 1);
        assert_eq!(doc["context_width"], 3);
        let target: FaceSet = serde_json::from_value(doc["target_faces"].clone()).unwrap();
        assert_eq!(target.len(), 40, "{mode}");
        assert_eq!(connected_components(&graph, &target).len(), 1, "{mode}");
    }

    let far: Vec<String> = vec!["0".into(), (mesh.faces.len() - 1).to_string()];
    let out = meshfim(&["sample-region", "--mesh", arg(&m), "--faces", &far.join(","), "--out", arg(&out)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not connected"));
}

#[test]
fn serialize_round_trips_through_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = held_out();
    let region = bfs_region(&mesh, 30, 25, 2);
    let m = write_mesh(dir.path(), "m.obj", &mesh);
    let r = dir.path().join("region.json");
    std::fs::write(&r, region.to_json()).unwrap();
    let jsonl = dir.path().join("seq.jsonl");
    let bin = dir.path().join("seq.bin");
    meshfim_ok(&["serialize", "--mesh", arg(&m), "--region", arg(&r), "--out", arg(&jsonl)]);
    meshfim_ok(&["serialize", "--mesh", arg(&m), "--region", arg(&r), "--out", arg(&bin), "--format", "binary"]);

    let text = std::fs::read_to_string(&jsonl).unwrap();
    assert_eq!(text.lines().count(), 1);
    let seq = FimSequence::from_json_line(text.trim_end()).unwrap();
    let from_bin = FimSequence::read_binary(std::fs::File::open(&bin).unwrap()).unwrap();
    assert_eq!(seq, from_bin);
    assert_eq!(seq.bins, 256);
    let det = detokenize(&seq).unwrap();
    assert_eq!(det.context.len(), region.context.len());
    assert_eq!(det.target.len(), region.target.len());

    // jitter moves coordinates and may reorder faces, nothing else
    let aug = dir.path().join("aug.jsonl");
    meshfim_ok(&[
        "serialize", "--mesh", arg(&m), "--region", arg(&r), "--out", arg(&aug), "--augment", "0.02", "--seed", "4",
    ]);
    let jittered = FimSequence::from_json_line(std::fs::read_to_string(&aug).unwrap().trim_end()).unwrap();
    let sorted = |f: &[u8]| {
        let mut f = f.to_vec();
        f.sort_unstable();
        f
    };
    assert_eq!(sorted(&jittered.flags), sorted(&seq.flags));
    assert_eq!(jittered.target_segment().unwrap().len(), seq.target_segment().unwrap().len());
    assert_ne!(jittered.context_segment().unwrap(), seq.context_segment().unwrap());
}

#[test]
fn single_region_repair_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = held_out();
    let region = bfs_region(&mesh, 100, 30, 3);
    let m = write_mesh(dir.path(), "m.obj", &mesh);
    let r = dir.path().join("region.json");
    std::fs::write(&r, region.to_json()).unwrap();
    let (out, report, patch) = (dir.path().join("fixed.obj"), dir.path().join("report.json"), dir.path().join("p.obj"));
    meshfim_ok(&[
        "repair", "--input", arg(&m), "--region", arg(&r), "--generator", "oracle", "--seed", "2", "--out", arg(&out),
        "--report", arg(&report), "--patch", arg(&patch),
    ]);
    let doc = read_json(&report);
    assert_eq!(doc["status"], "accepted");
    assert_eq!(doc["metrics"]["r"], 1.0);
    assert_eq!(doc["target_faces"], 30);
    assert_eq!(load_obj(&patch).unwrap().faces.len(), 30);
    assert_eq!(load_obj(&out).unwrap().faces.len(), mesh.faces.len());

    let code = meshfim(&[
        "repair", "--input", arg(&m), "--region", arg(&r), "--generator", "nonsense", "--out", arg(&out), "--report",
        arg(&report),
    ])
    .status
    .code();
    assert_eq!(code, Some(2));
}

#[test]
fn iterative_repair_restores_a_damaged_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let pristine = sphere();
    let region = bfs_region(&pristine, 150, 10, 0);
    let damaged = synth::delete_faces(&pristine, &region.target);
    let r = write_mesh(dir.path(), "ref.obj", &pristine);
    let m = write_mesh(dir.path(), "damaged.obj", &damaged);
    let (out, report) = (dir.path().join("fixed.obj"), dir.path().join("report.json"));
    meshfim_ok(&[
        "repair", "--input", arg(&m), "--ref", arg(&r), "--rounds", "4", "--views", "24", "--res", "320", "--out",
        arg(&out), "--report", arg(&report),
    ]);
    let doc = read_json(&report);
    assert_eq!(doc["v"], 1);
    assert_eq!(doc["initially_damaged"], true);
    assert_eq!(doc["repaired"], true);
    assert!(!doc["rounds"].as_array().unwrap().is_empty());
    assert_eq!(load_obj(&out).unwrap().faces.len(), pristine.faces.len());
}

#[test]
fn eval_scores_a_perfect_patch() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = Vec::new();
    for (k, seed_face) in [20usize, 200].into_iter().enumerate() {
        let gt = held_out();
        let region = bfs_region(&gt, seed_face, 25, 3);
        let target = gt.submesh(&region.target);
        let names = [format!("gt{k}.obj"), format!("ctx{k}.obj"), format!("tgt{k}.obj"), format!("patch{k}.obj")];
        write_mesh(dir.path(), &names[0], &gt);
        write_mesh(dir.path(), &names[1], &gt.submesh(&region.context));
        write_mesh(dir.path(), &names[2], &target);
        write_mesh(dir.path(), &names[3], &target);
        pairs.push(json!({ "gt": names[0], "context": names[1], "target": names[2], "patch": names[3] }));
    }
    let manifest = dir.path().join("manifest.json");
    std::fs::write(&manifest, json!({ "v": 1, "pairs": pairs }).to_string()).unwrap();
    let out = dir.path().join("eval.json");
    meshfim_ok(&["eval", "--pairs", arg(&manifest), "--out", arg(&out), "--gt-samples", "20000", "--patch-samples", "2000"]);
    let doc = read_json(&out);
    assert_eq!(doc["samples"], 2);
    assert_eq!(doc["pmr"], 1.0);
    assert_eq!(doc["a_vmr"], 1.0);
    assert_eq!(doc["per_sample"].as_array().unwrap().len(), 2);

    std::fs::write(&manifest, json!({ "v": 2, "pairs": [] }).to_string()).unwrap();
    assert_eq!(meshfim(&["eval", "--pairs", arg(&manifest), "--out", arg(&out)]).status.code(), Some(2));
}

#[test]
fn gate_vis_writes_bounded_values() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = held_out();
    let region = bfs_region(&mesh, 50, 60, 3);
    let m = write_mesh(dir.path(), "m.obj", &mesh);
    let r = dir.path().join("region.json");
    std::fs::write(&r, region.to_json()).unwrap();
    let out = dir.path().join("gate.json");
    meshfim_ok(&[
        "gate-vis", "--ref", arg(&m), "--mesh", arg(&m), "--region", arg(&r), "--queries", "64", "--samples", "2000",
        "--out", arg(&out),
    ]);
    let doc = read_json(&out);
    let gate = doc["gate"].as_array().unwrap();
    assert_eq!(gate.len(), 64);
    assert_eq!(doc["queries"].as_array().unwrap().len(), 64);
    assert!(gate.iter().all(|g| (0.0..=1.0).contains(&g.as_f64().unwrap())));
    let coverage = doc["coverage"].as_array().unwrap();
    // queries deep inside the removed faces see no existing surface
    assert!(coverage.iter().any(|c| c.as_f64().unwrap() == 0.0));
}
