use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let synth = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/planted3.json");
    let toml = format!(
        "seed = 3\n{extra}\n[synth]\nconfig = {:?}\n\n[aggregate]\nnetwork = \"full\"\n\n[nulltest]\niterations = 20\n\n[communities]\nrestarts = 4\nmin_cell_size = 15\n\n[clustering]\nk_max = 6\n",
        synth.display().to_string()
    );
    let path = dir.join("config.toml");
    fs::write(&path, toml).unwrap();
    path
}

fn alignet(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignet"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn missing_upstream_artifact_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let run = alignet(&["pipeline"], &config, &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for stage in ["synth", "ingest", "score", "graph", "aggregate", "nulltest", "communities", "intersect", "cluster", "report"] {
        assert!(out.join(stage).join("manifest.json").is_file(), "{stage} manifest");
    }

    fs::remove_file(out.join("graph/mention_edges.csv")).unwrap();
    let run = alignet(&["cluster"], &config, &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("mention_edges.csv"));
}

#[test]
fn rerunning_a_stage_reproduces_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    for stage in ["synth", "ingest", "score", "graph"] {
        assert!(alignet(&[stage], &config, &out).status.success(), "{stage}");
    }
    let first = fs::read(out.join("graph/manifest.json")).unwrap();
    let edges = fs::read(out.join("graph/mention_edges.csv")).unwrap();
    assert!(alignet(&["graph", "--threads", "3"], &config, &out).status.success());
    assert_eq!(fs::read(out.join("graph/manifest.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("graph/mention_edges.csv")).unwrap(), edges);
}

#[test]
fn synthetic_corpus_follows_the_generator_seed_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let corpus = |name: &str, extra: &[&str], config: &Path| {
        let out = dir.path().join(name);
        let mut args = vec!["synth"];
        args.extend_from_slice(extra);
        assert!(alignet(&args, config, &out).status.success());
        fs::read(out.join("synth/corpus.jsonl")).unwrap()
    };
    let base = corpus("a", &[], &config);
    assert_eq!(corpus("b", &["--seed", "99"], &config), base);

    let text = fs::read_to_string(&config).unwrap().replace("[synth]\n", "[synth]\nseed = 99\n");
    let reseeded = dir.path().join("reseeded.toml");
    fs::write(&reseeded, text).unwrap();
    assert_ne!(corpus("c", &[], &reseeded), base);
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let run = alignet(&["pipeline"], &dir.path().join("nope.toml"), &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("nope.toml"));
}

#[test]
fn invalid_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "bogus_key = 1\n");
    assert_eq!(alignet(&["synth"], &config, &out).status.code(), Some(3));

    let config = dir.path().join("bad_band.toml");
    fs::write(&config, "[nulltest]\nband = [0.9, 0.1]\n").unwrap();
    assert_eq!(alignet(&["synth"], &config, &out).status.code(), Some(3));
}

#[test]
fn absent_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "[inputs]\ncorpus = \"absent.jsonl\"\n").unwrap();
    let run = alignet(&["ingest"], &config, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("absent.jsonl"));
}
