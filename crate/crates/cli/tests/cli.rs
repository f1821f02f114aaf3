use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use trevisan_core::params::{build_instance, preset_params, Preset, WeakSeedOptions};
use trevisan_core::weak_design::{design_to_bytes, design_to_text, parse_design};
use trevisan_core::{extract, BitString, WeakDesign};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trevisan"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn")
}

fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0u8; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

#[test]
fn one_block_matches_library() {
    let dir = TempDir::new().unwrap();
    let p = preset_params(Preset::Cor1, 1024, 2f64.powi(-10), 64, 0.75, WeakSeedOptions::default()).unwrap();
    let inst = build_instance(&p, None).unwrap();
    let x = random_bytes(128, 1);
    let seed = random_bytes(inst.d().div_ceil(8), 2);
    fs::write(dir.path().join("in"), &x).unwrap();
    fs::write(dir.path().join("seed"), &seed).unwrap();
    let out = run(
        &["extract", "--n", "1024", "--m", "64", "--eps", "2^-10", "--in", "in", "--out", "out",
          "--seed-file", "seed", "--reuse-seed"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = fs::read(dir.path().join("out")).unwrap();
    assert_eq!(got.len(), 8);
    let y = BitString::from_bytes(&seed, seed.len() * 8).unwrap().slice(0, inst.d());
    let want = extract(&inst, &BitString::from_bytes(&x, 1024).unwrap(), &y).unwrap();
    assert_eq!(got, want.to_bytes());
}

#[test]
fn empty_input_gives_zero_blocks() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in"), b"").unwrap();
    let out = run(
        &["extract", "--n", "256", "--m", "8", "--eps", "2^-8", "--in", "in", "--out", "out",
          "--reuse-seed", "--report", "machine"],
        dir.path(),
    );
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "extract");
    let blocks = doc["report"]["fields"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["key"] == "blocks")
        .unwrap();
    assert_eq!(blocks["value"], 0);
    assert!(fs::read(dir.path().join("out")).unwrap().is_empty());
    assert!(dir.path().join("out.seed").exists());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in"), random_bytes(64, 3)).unwrap();
    fs::write(dir.path().join("seed"), [0u8; 3]).unwrap();
    let base = ["extract", "--n", "256", "--m", "8", "--eps", "2^-8", "--in", "in", "--out", "out"];

    let short = run(&[&base[..], &["--seed-file", "seed", "--reuse-seed"]].concat(), dir.path());
    assert_eq!(short.status.code(), Some(2));

    let low_k = run(&[&base[..], &["--k", "10", "--reuse-seed"]].concat(), dir.path());
    assert_eq!(low_k.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&low_k.stderr).contains("warning"));
    let forced = run(&[&base[..], &["--k", "10", "--reuse-seed", "--force"]].concat(), dir.path());
    assert_eq!(forced.status.code(), Some(0));

    let missing = run(&["extract", "--n", "256", "--m", "8", "--eps", "2^-8", "--in", "nope", "--out", "out"], dir.path());
    assert_eq!(missing.status.code(), Some(4));

    let cor3 = run(&["params", "--preset", "cor3", "--n", "1024", "--m", "4", "--eps", "2^-20"], dir.path());
    assert_eq!(cor3.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cor3.stderr).contains("not implemented"));

    let cor4 = run(&["params", "--preset", "cor4", "--n", "1024", "--m", "2", "--eps", "2^-8", "--beta", "0.75"], dir.path());
    assert!(cor4.status.success());
    assert!(String::from_utf8_lossy(&cor4.stdout).contains("t_prime"));
}

#[test]
fn fresh_seed_per_block_consumes_seed_in_order() {
    let dir = TempDir::new().unwrap();
    let p = preset_params(Preset::Cor1, 256, 2f64.powi(-8), 8, 0.75, WeakSeedOptions::default()).unwrap();
    let inst = build_instance(&p, None).unwrap();
    let x = random_bytes(96, 4);
    let seed = random_bytes((3 * inst.d()).div_ceil(8), 5);
    fs::write(dir.path().join("in"), &x).unwrap();
    fs::write(dir.path().join("seed"), &seed).unwrap();
    let out = run(
        &["extract", "--n", "256", "--m", "8", "--eps", "2^-8", "--in", "in", "--out", "out", "--seed-file", "seed"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = fs::read(dir.path().join("out")).unwrap();
    let y = BitString::from_bytes(&seed, seed.len() * 8).unwrap();
    let xs = BitString::from_bytes(&x, 768).unwrap();
    for b in 0..3 {
        let z = extract(&inst, &xs.slice(256 * b, 256), &y.slice(b * inst.d(), inst.d())).unwrap();
        assert_eq!(got[b], z.to_bytes()[0]);
    }
}

#[test]
fn identical_bytes_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in"), random_bytes(1 << 14, 6)).unwrap();
    fs::write(dir.path().join("seed"), random_bytes(179712 / 8, 7)).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = bin()
            .args(["extract", "--n", "1024", "--m", "32", "--eps", "2^-10", "--in", "in", "--out", "out",
                   "--seed-file", "seed", "--reuse-seed", "--exact-verify"])
            .env("RAYON_NUM_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((out.stdout, fs::read(dir.path().join("out")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn design_round_trip_and_corruption() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let gen = run(&["design", "generate", "--t", "6", "--m", "20", "--method", "greedy", "--r", "3/2", "--out", "g.wd"], d);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(run(&["design", "verify", "--in", "g.wd"], d).status.success());

    assert!(run(&["design", "export", "--in", "g.wd", "--out", "g.txt"], d).status.success());
    assert!(run(&["design", "import", "--in", "g.txt", "--out", "g2.wd"], d).status.success());
    assert_eq!(fs::read(d.join("g.wd")).unwrap(), fs::read(d.join("g2.wd")).unwrap());

    // Set 7 becomes a copy of set 6; the header keeps the old r.
    let (design, _) = parse_design(&fs::read(d.join("g.wd")).unwrap()).unwrap();
    let mut sets: Vec<Vec<u32>> = design.sets().map(|s| s.to_vec()).collect();
    sets[7] = sets[6].clone();
    let bad = WeakDesign::unchecked(design.t(), design.d(), &sets, design.r_certified().clone());
    fs::write(d.join("bad.wd"), design_to_bytes(&bad).unwrap()).unwrap();
    fs::copy(d.join("g.wd.cert"), d.join("bad.wd.cert")).unwrap();
    let v = run(&["design", "verify", "--in", "bad.wd"], d);
    assert_eq!(v.status.code(), Some(3));
    let err = String::from_utf8_lossy(&v.stderr);
    assert!(err.contains("index 7"), "{err}");

    // The same corruption in the text form is refused on import.
    fs::write(d.join("bad.txt"), design_to_text(&bad)).unwrap();
    let imp = run(&["design", "import", "--in", "bad.txt", "--out", "x.wd"], d);
    assert_eq!(imp.status.code(), Some(3));
}

#[test]
fn selftest_quick_and_fault() {
    let dir = TempDir::new().unwrap();
    let ok = run(&["selftest", "quick"], dir.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run(&["selftest", "quick", "--inject-fault", "design-overlap", "--seed", "9"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("FAIL reduction"));
    assert!(text.contains("--seed 9"));
}
