mod support;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

use support::{post_json, TestServer};

fn salad(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salad"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .env("SALAD_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn empty_vocabulary_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = salad(dir.path(), &["vocab", "list"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");
}

#[test]
fn process_prints_triple_and_progress() {
    let dir = tempfile::tempdir().unwrap();
    let out = salad(dir.path(), &["process", "I eat sushi"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("私は寿司を食べます"));
    assert_eq!(lines.next(), Some("わたしはすしをたべます"));
    assert!(text.lines().any(|l| l == "寿司: sushi (Progress: 1/5)"), "{text}");

    salad(dir.path(), &["process", "I eat sushi"]);
    let list = stdout(&salad(dir.path(), &["vocab", "list", "--learning"]));
    assert!(list.lines().any(|l| l == "寿司: sushi (Progress: 2/5)"), "{list}");
    assert_eq!(stdout(&salad(dir.path(), &["vocab", "list", "--learned"])), "");
}

#[test]
fn process_accepts_audio_files() {
    let dir = tempfile::tempdir().unwrap();
    let wav = support::manifest_dir().join("data/fixtures/audio/i_eat_sushi.wav");
    let out = salad(dir.path(), &["process", "--audio", wav.to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["transcript"], "I eat sushi");
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let song = salad(dir.path(), &["song", "--template", "t1"]);
    assert_eq!(song.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&song.stderr).contains("error[EmptyVocabulary] (song)"));

    let untranslatable = salad(dir.path(), &["process", "The quokka juggles"]);
    assert_eq!(untranslatable.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&untranslatable.stderr).contains("TranslationFailed"));

    salad(dir.path(), &["process", "I eat sushi"]);
    assert_eq!(salad(dir.path(), &["song", "--template", "t9"]).status.code(), Some(8));
    assert_eq!(salad(dir.path(), &["process", "x", "--session", ""]).status.code(), Some(2));
    // clap usage errors
    assert_eq!(salad(dir.path(), &["process"]).status.code(), Some(2));
}

#[test]
fn song_writes_a_wav() {
    let dir = tempfile::tempdir().unwrap();
    salad(dir.path(), &["process", "I eat sushi"]);
    let out_path = dir.path().join("song.wav");
    let out = salad(dir.path(), &["song", "--template", "t2", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let clip = salad::audio::AudioClip::from_wav(&std::fs::read(&out_path).unwrap()).unwrap();
    let reported = stdout(&out);
    let duration = format!("duration: {:.3} s", clip.duration_seconds());
    assert!(reported.contains(&duration), "{reported}");
}

#[test]
fn templates_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = stdout(&salad(dir.path(), &["templates"]))
        .lines()
        .map(|l| l.split('\t').next().unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["t1", "t2", "t3"]);
}

#[test]
fn replay_reports_the_failing_input() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("inputs.txt");
    std::fs::write(&inputs, "# warmup\nI eat sushi\nGood morning\n").unwrap();
    let out = salad(dir.path(), &["replay", inputs.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("2 input(s)"));

    std::fs::write(&inputs, "Good morning\nThe quokka juggles\nI eat sushi\n").unwrap();
    let out = salad(dir.path(), &["replay", inputs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input 2"));
}

#[test]
fn cli_and_api_produce_the_same_result() {
    let api_dir = tempfile::tempdir().unwrap();
    let cli_dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(api_dir.path());
    for sentence in ["I eat sushi", "Good morning", "I eat sushi"] {
        let api = post_json(&server.url("/api/process"), &json!({"text": sentence, "session_id": "p"})).json();
        let cli = salad(cli_dir.path(), &["process", sentence, "--session", "p", "--json"]);
        assert!(cli.status.success());
        let cli: serde_json::Value = serde_json::from_slice(&cli.stdout).unwrap();
        assert_eq!(salad::pipeline::canonicalize(cli), salad::pipeline::canonicalize(api), "{sentence}");
    }
}

#[test]
fn config_file_sets_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("salad.conf"), "data_dir = store\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_salad"))
        .arg("--config")
        .arg(dir.path().join("salad.conf"))
        .args(["process", "Good morning"])
        .env("SALAD_LOG", "off")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("store/vocab.json").exists());

    std::fs::write(dir.path().join("bad.conf"), "colour = blue\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_salad"))
        .arg("--config")
        .arg(dir.path().join("bad.conf"))
        .arg("templates")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}
