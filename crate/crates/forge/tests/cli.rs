//! End-to-end runs of the `scfg-forge` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scfg-forge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let files = common::write_corpus(dir, &common::toy_corpus());
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            "[input]\nsrc = {:?}\ntgt = {:?}\nalign = {:?}\n\n[output]\ndir = {:?}\n{extra}",
            files.src,
            files.tgt,
            files.align,
            dir.join("out")
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn worked_example_reports_the_golden_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = forge(&["pipeline", "--config", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("nonterminals=8\n"), "{text}");
    assert!(text.contains("productions=20\n"), "{text}");
    assert!(text.contains("coverage=2/2\n"), "{text}");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["grammar"]["nonterminals"], 8);
    assert_eq!(manifest["grammar"]["productions"], 20);
}

#[test]
fn baseline_mode_has_a_single_plain_nonterminal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = forge(&["pipeline", "--config", &cfg, "--mode", "baseline"]);
    assert!(out.status.success(), "{}", stderr(&out));
    // the initial symbol and X
    assert!(
        stdout(&out).contains("nonterminals=2\n"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn missing_alignment_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let align = dir.path().join("corpus.align");
    fs::remove_file(&align).unwrap();
    let out = forge(&["pipeline", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains(align.to_str().unwrap()),
        "{}",
        stderr(&out)
    );
}

#[test]
fn reruns_are_identical_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_corpus(dir.path(), &common::template_corpus(60, 2));
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[input]\nsrc = {:?}\ntgt = {:?}\nalign = {:?}\n\n[merge]\nmethod = \"kmedoids\"\ntop = 12\nk = 3\nseed = 9\n",
            files.src, files.tgt, files.align
        ),
    )
    .unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = forge(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let mut manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
                .unwrap();
        let obj = manifest.as_object_mut().unwrap();
        obj.remove("timings_ms");
        // output paths name the run directory
        obj.remove("outputs");
        obj["parameters"]["output"]["dir"] = serde_json::Value::Null;
        (fs::read(out_dir.join("rules.txt")).unwrap(), manifest)
    };
    let (rules_a, manifest_a) = run("a");
    let (rules_b, manifest_b) = run("b");
    assert_eq!(rules_a, rules_b);
    assert_eq!(manifest_a, manifest_b);
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_corpus(dir.path(), &common::toy_corpus());
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let corpus = [
        "--src",
        files.src.to_str().unwrap(),
        "--tgt",
        files.tgt.to_str().unwrap(),
        "--align",
        files.align.to_str().unwrap(),
    ];

    let mut args = vec!["extract"];
    args.extend(corpus);
    let g = p("g.dump");
    args.extend(["--out", &g]);
    let out = forge(&args);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = forge(&["stats", "--grammar", &g]);
    assert!(stdout(&out).contains("nonterminals=8\n"));

    let out = forge(&["dissim", "--grammar", &g, "--pair", "X3,X6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("equivalent=true"), "{}", stdout(&out));

    let (plan, merged) = (p("plan.txt"), p("merged.dump"));
    let out = forge(&[
        "merge-bf",
        "--grammar",
        &g,
        "--out",
        &plan,
        "--merged",
        &merged,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let rules = p("rules.txt");
    let out = forge(&["export", "--grammar", &g, "--plan", &plan, "--out", &rules]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(&rules).unwrap();
    assert!(table.lines().all(|l| l.contains("prob=")));

    let (src, tgt) = (files.src.to_str().unwrap(), files.tgt.to_str().unwrap());
    let out = forge(&["verify", "--grammar", &merged, "--src", src, "--tgt", tgt]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("derivable=2/2"));

    let out = forge(&[
        "verify",
        "--grammar",
        &merged,
        "--src",
        src,
        "--tgt",
        tgt,
        "--emit-tree",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().next().unwrap().starts_with("0\t"));
}

#[test]
fn verify_fails_on_an_unseen_pair() {
    let dir = tempfile::tempdir().unwrap();
    let files = common::write_corpus(dir.path(), &common::toy_corpus());
    let g = dir.path().join("g.dump");
    let out = forge(&[
        "extract",
        "--src",
        files.src.to_str().unwrap(),
        "--tgt",
        files.tgt.to_str().unwrap(),
        "--align",
        files.align.to_str().unwrap(),
        "--out",
        g.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (src, tgt) = (dir.path().join("held.src"), dir.path().join("held.tgt"));
    fs::write(&src, "das Auto\n").unwrap();
    fs::write(&tgt, "the car\n").unwrap();
    let out = forge(&[
        "verify",
        "--grammar",
        g.to_str().unwrap(),
        "--src",
        src.to_str().unwrap(),
        "--tgt",
        tgt.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("derivable=0/1"));
}

#[test]
fn bad_arguments_exit_with_two() {
    let out = forge(&["stats", "--grammar", "/nonexistent/g.dump"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/g.dump"));
}
