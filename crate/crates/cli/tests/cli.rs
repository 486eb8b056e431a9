#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use texir_core::assets::{read_pfm, read_scene_file, save_scene_file, write_pfm};
use texir_core::eval::ImageMetrics;
use texir_core::renderer::{emitter_mask, make_gbuffer};
use texir_core::load_scene;

fn texir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texir"))
        .args(args)
        .env_remove("TEXIR_THREADS")
        .output()
        .expect("spawn texir")
}

fn ok(args: &[&str]) -> Output {
    let out = texir(args);
    assert!(
        out.status.success(),
        "texir {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small bundled scene: inputs in `dir/s`, ground truth in `dir/s/gt`. Material textures
/// stay at 64² so the atlas gutters span more than a texel and bilinear lookups never mix
/// neighboring charts.
fn tiny(dir: &Path) -> PathBuf {
    let out = dir.join("s");
    ok(&[
        "synth",
        "--out",
        s(&out),
        "--width",
        "32",
        "--height",
        "24",
        "--material-res",
        "64",
        "--emissive-res",
        "32",
        "--irt-res",
        "16",
        "--render-samples",
        "16",
        "--bake-samples",
        "64",
        "--bounces",
        "1",
        "--bounce-samples",
        "16",
    ]);
    out
}

#[test]
fn help_lists_every_subcommand() {
    let out = ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["bake", "optimize", "render", "relight", "edit", "rooms", "vhl", "eval", "spheres", "synth"] {
        assert!(text.contains(cmd), "{cmd} missing from --help");
    }
}

#[test]
fn missing_mesh_is_bad_input_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path());
    std::fs::remove_file(scene.join("mesh.obj")).unwrap();
    let out = texir(&["bake", s(&scene.join("scene.json")), "--out", s(&dir.path().join("b"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.obj"));
}

#[test]
fn bake_with_one_sample_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path());
    let b = dir.path().join("b");
    ok(&["bake", s(&scene.join("scene.json")), "--out", s(&b), "--samples", "1"]);
    let irt = read_pfm(b.join("irt.pfm")).unwrap();
    assert!(irt.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(b.join("irt_coverage.pgm").is_file() && b.join("manifest.json").is_file());
    load_scene(b.join("scene.json")).unwrap();
}

#[test]
fn eval_of_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path());
    let img = scene.join("image_00.pfm");
    let out = ok(&["eval", s(&img), s(&img)]);
    let m: ImageMetrics = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((m.psnr, m.ssim, m.mse, m.mae), (99.0, 1.0, 0.0, 0.0));

    let other = dir.path().join("small.pfm");
    write_pfm(&texir_core::TextureImage::new(3, 3, 3), &other).unwrap();
    assert_eq!(texir(&["eval", s(&img), s(&other)]).status.code(), Some(2));
}

#[test]
fn edit_changes_only_the_edited_class() {
    let dir = tempfile::tempdir().unwrap();
    let gt = tiny(dir.path()).join("gt/scene.json");
    let edited = dir.path().join("e");
    ok(&["edit", s(&gt), "--class", "3", "--albedo", "1,0,0", "--out", s(&edited)]);
    let (before, after) = (dir.path().join("r0"), dir.path().join("r1"));
    // Cameras 2 and 5 look up at the ceiling (class 3).
    for (scene, out) in [(&gt, &before), (&edited.join("scene.json"), &after)] {
        ok(&["render", s(scene), "--out", s(out), "--camera", "2", "--camera", "5", "--samples", "8"]);
    }
    let scene = load_scene(&gt).unwrap();
    let mut changed = 0;
    for cam in [2usize, 5] {
        let a = read_pfm(before.join(format!("render_{cam:02}.pfm"))).unwrap();
        let b = read_pfm(after.join(format!("render_{cam:02}.pfm"))).unwrap();
        let gbuf = make_gbuffer(&scene.geometry, &scene.cameras[cam], scene.semantic.as_ref(), None);
        let emitters = emitter_mask(&gbuf, &scene.emissive, 0.5);
        for i in 0..gbuf.len() {
            let (ca, cb) = (a.rgb(i), b.rgb(i));
            let edited_pixel = gbuf.pixels[i].valid && gbuf.pixels[i].class_id == 3 && !emitters[i];
            if edited_pixel {
                // Red albedo: the red share of the pixel rises.
                assert!(cb.x / cb.element_sum() > ca.x / ca.element_sum(), "pixel {i}: {ca} -> {cb}");
                changed += 1;
            } else {
                assert_eq!(ca, cb, "pixel {i} outside class 3 changed");
            }
        }
    }
    assert!(changed > 50, "only {changed} ceiling pixels in view");
}

#[test]
fn relight_with_doubled_emission_doubles_the_render() {
    let dir = tempfile::tempdir().unwrap();
    let gt = tiny(dir.path()).join("gt/scene.json");
    let le = read_pfm(dir.path().join("s/gt/emissive.pfm")).unwrap();
    let (one, two) = (dir.path().join("le1.pfm"), dir.path().join("le2.pfm"));
    write_pfm(&le, &one).unwrap();
    write_pfm(&le.scaled(2.0), &two).unwrap();
    for (em, name) in [(&one, "l1"), (&two, "l2")] {
        let out = dir.path().join(name);
        ok(&["relight", s(&gt), "--emissive", s(em), "--out", s(&out), "--samples", "32", "--seed", "4"]);
        // A threshold the doubled walls stay below keeps emitter classification unchanged.
        ok(&[
            "render",
            s(&out.join("scene.json")),
            "--out",
            s(&dir.path().join(format!("{name}_r"))),
            "--camera",
            "0",
            "--samples",
            "8",
            "--seed",
            "4",
            "--emitter-threshold",
            "1.0",
        ]);
    }
    let a = read_pfm(dir.path().join("l1_r/render_00.pfm")).unwrap();
    let b = read_pfm(dir.path().join("l2_r/render_00.pfm")).unwrap();
    let mut lit = 0;
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((y - 2.0 * x).abs() <= 1e-6 * x.abs(), "{y} vs 2 x {x}");
        lit += usize::from(*x > 0.0);
    }
    assert!(lit > 0);
}

#[test]
fn stage_one_alone_leaves_roughness_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let out = dir.path().join("o");
    ok(&["optimize", s(&scene), "--out", s(&out), "--stages", "1", "--epochs", "2"]);
    let r = read_pfm(out.join("roughness.pfm")).unwrap();
    assert!(r.data().iter().all(|v| *v == 0.5));
    let a = read_pfm(out.join("albedo.pfm")).unwrap();
    assert!(a.data().iter().any(|v| *v != 0.5));
    assert!(out.join("stage1_albedo.pfm").is_file());
}

#[test]
fn stage_two_needs_an_albedo_source() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let out = dir.path().join("o");
    let refused = texir(&["optimize", s(&scene), "--out", s(&out), "--stages", "2", "--epochs", "1"]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--init-albedo"));

    let init = dir.path().join("s/gt/albedo.pfm");
    ok(&["optimize", s(&scene), "--out", s(&out), "--stages", "2", "--epochs", "1", "--init-albedo", s(&init)]);
    // Albedo is frozen in stage 2.
    assert_eq!(read_pfm(out.join("albedo.pfm")).unwrap(), read_pfm(&init).unwrap());

    // A stage-1 checkpoint in the output directory also unlocks stage 2.
    let out2 = dir.path().join("o2");
    ok(&["optimize", s(&scene), "--out", s(&out2), "--stages", "1", "--epochs", "1"]);
    ok(&["optimize", s(&scene), "--out", s(&out2), "--stages", "2", "--epochs", "1"]);
}

#[test]
fn missing_semantic_mask_is_explained() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let mut file = read_scene_file(&scene).unwrap();
    file.semantic_mask = None;
    save_scene_file(&file, &scene).unwrap();
    let out = texir(&["optimize", s(&scene), "--out", s(&dir.path().join("o")), "--epochs", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("semantic mask"));
}

#[test]
fn optimize_is_bit_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let runs: Vec<PathBuf> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("o{t}"));
            ok(&["optimize", s(&scene), "--out", s(&out), "--epochs", "2", "--seed", "9", "--threads", t]);
            out
        })
        .collect();
    for name in ["albedo.pfm", "roughness.pfm", "stage2_roughness.pfm"] {
        let a = std::fs::read(runs[0].join(name)).unwrap();
        let b = std::fs::read(runs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between thread counts");
    }
}

#[test]
fn outputs_never_land_on_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path());
    let before = std::fs::read(scene.join("image_00.pfm")).unwrap();
    let out = texir(&["optimize", s(&scene.join("scene.json")), "--out", s(&scene), "--epochs", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read(scene.join("image_00.pfm")).unwrap(), before);
}

#[test]
fn rooms_and_vhl_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let rooms = dir.path().join("rooms");
    let out = ok(&["rooms", s(&scene), "--out", s(&rooms)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 rooms"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(rooms.join("rooms.json")).unwrap()).unwrap();
    assert_eq!(report["room_count"], 3);

    let vhl = dir.path().join("vhl");
    ok(&["vhl", s(&scene), "--out", s(&vhl), "--samples", "8"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(vhl.join("vhl.json")).unwrap()).unwrap();
    assert_eq!(report["views"].as_array().unwrap().len(), 8);
    assert!(vhl.join("vhl_07.pgm").is_file());
}

#[test]
fn spheres_writes_a_scored_report() {
    let dir = tempfile::tempdir().unwrap();
    let scene = tiny(dir.path()).join("scene.json");
    let out = dir.path().join("sp");
    ok(&[
        "spheres",
        s(&scene),
        "--out",
        s(&out),
        "--resolution",
        "12",
        "--samples",
        "4",
        "--sh-samples",
        "2048",
        "--sg-samples",
        "256",
        "--sg-steps",
        "20",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let scores = report["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 9);
    for sc in scores.iter().filter(|sc| sc["representation"] == "tbl") {
        assert_eq!(sc["mae"], 0.0);
    }
    assert!(out.join("sphere_mirror_silver_sg.pfm").is_file());
}
