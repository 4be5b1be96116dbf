use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn viml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viml"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = viml(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_MODEL: &str = r#"
batch_size = 8
epochs = 2

[model]
embed_dim = 16
ff_dim = 32
heads = 2
video_layers = 1
music_layers = 1
text_layers = 1
"#;

fn synthetic(dir: &Path) -> std::path::PathBuf {
    let store = dir.join("store");
    ok(&[
        "gen-synthetic",
        "--num-tracks",
        "40",
        "--latent-dim",
        "6",
        "--seed",
        "3",
        "--out",
        p(&store),
    ]);
    store
}

#[test]
fn pipeline_from_synthetic_data_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic(dir.path());
    assert!(store.join("texts.jsonl").exists());

    let texts = dir.path().join("d2t.jsonl");
    let out = ok(&[
        "synth-text",
        "--method",
        "data2text",
        "--tags-file",
        p(&store.join("texts.jsonl")),
        "--out",
        p(&texts),
    ]);
    assert!(out.contains("40 data2text texts"), "{out}");

    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL_MODEL).unwrap();
    let ckpt = dir.path().join("ckpt");
    ok(&[
        "train",
        "--config",
        p(&config),
        "--store",
        p(&store),
        "--texts",
        p(&texts),
        "--out",
        p(&ckpt),
    ]);
    assert!(ckpt.join("config.json").exists());
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ckpt.join("train_log.json")).unwrap())
            .unwrap();
    assert_eq!(log["steps"].as_array().unwrap().len(), 10);

    let report = dir.path().join("report.json");
    let printed = ok(&[
        "eval",
        "--ckpt",
        p(&ckpt),
        "--store",
        p(&store),
        "--texts",
        p(&texts),
        "--pool-size",
        "20",
        "--mode",
        "video_only",
        "--report",
        p(&report),
    ]);
    assert!(printed.contains("R@10"), "{printed}");
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(value["ranks"].as_array().unwrap().len(), 40);
    assert_eq!(value["protocol"]["pool"]["pool_size"], 20);

    let mt_config = dir.path().join("mt.toml");
    std::fs::write(
        &mt_config,
        SMALL_MODEL.replace(
            "[model]",
            "[model]\nuse_video = false\ntext_dropout_p = 0.0",
        ),
    )
    .unwrap();
    let mt = dir.path().join("mt");
    ok(&[
        "train",
        "--config",
        p(&mt_config),
        "--store",
        p(&store),
        "--out",
        p(&mt),
    ]);
    let ensemble = ok(&[
        "eval",
        "--ckpt",
        p(&ckpt),
        "--store",
        p(&store),
        "--pool-size",
        "20",
        "--ensemble",
        p(&mt),
        "--alpha",
        "0.5",
    ]);
    assert!(ensemble.contains("MR"), "{ensemble}");
}

#[test]
fn prompt2text_uses_examples_and_the_mock_client() {
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic(dir.path());
    let tags = store.join("texts.jsonl");
    let out = dir.path().join("p2t.jsonl");
    assert!(!viml(&[
        "synth-text",
        "--method",
        "prompt2text",
        "--tags-file",
        p(&tags),
        "--out",
        p(&out)
    ])
    .status
    .success());

    let examples = dir.path().join("examples.jsonl");
    std::fs::write(
        &examples,
        concat!(
            r#"{"tags":[{"tag":"jazz","category":"genre","confidence":0.9}],"description":"Smoky late-night jazz."}"#,
            "\n",
            r#"{"tags":[{"tag":"calm","category":"mood","confidence":0.8}],"description":"A calm, gentle piece."}"#,
            "\n"
        ),
    )
    .unwrap();
    let run = |seed: &str| {
        ok(&[
            "synth-text",
            "--method",
            "prompt2text",
            "--tags-file",
            p(&tags),
            "--examples",
            p(&examples),
            "--k",
            "2",
            "--seed",
            seed,
            "--out",
            p(&out),
        ]);
        std::fs::read_to_string(&out).unwrap()
    };
    let first = run("1");
    assert_eq!(first, run("1"));
    assert!(!first.contains("Tags:"));
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(!viml(&[
        "synth-text",
        "--method",
        "poetry",
        "--tags-file",
        "x",
        "--out",
        "y"
    ])
    .status
    .success());
    assert!(!viml(&["eval", "--ckpt", "missing", "--store", "missing"])
        .status
        .success());
    assert!(!viml(&["preset", "nope"]).status.success());
}

#[test]
fn presets_print_loadable_configs() {
    let list = ok(&["preset"]);
    for name in [
        "table1_viml",
        "table2_grid",
        "dropout_ablation",
        "fusion_study",
        "musictext",
    ] {
        assert!(list.contains(name), "{list}");
    }
    let shown = ok(&["preset", "dropout_ablation"]);
    let sections: Vec<&str> = shown.split("# ").filter(|s| !s.is_empty()).collect();
    assert_eq!(sections.len(), 2);
    for section in sections {
        let (_, body) = section.split_once('\n').unwrap();
        viml::train::TrainConfig::from_toml(body).unwrap();
    }
}

#[test]
fn serve_answers_health_and_query() {
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic(dir.path());
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL_MODEL.replace("epochs = 2", "epochs = 0")).unwrap();
    let ckpt = dir.path().join("ckpt");
    ok(&[
        "train",
        "--config",
        p(&config),
        "--store",
        p(&store),
        "--out",
        p(&ckpt),
    ]);

    let mut child = Command::new(env!("CARGO_BIN_EXE_viml"))
        .args([
            "serve",
            "--ckpt",
            p(&ckpt),
            "--store",
            p(&store),
            "--port",
            "0",
        ])
        .env("RUST_LOG", "info")
        .env("NO_COLOR", "1")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited").unwrap();
        if let Some((_, a)) = line.split_once("listening on ") {
            break a.trim().to_string();
        }
    };
    let request = |raw: String| {
        let mut stream = TcpStream::connect(&addr).unwrap();
        stream.write_all(raw.as_bytes()).unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        response
    };
    let health = request("GET /health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".into());
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    let body = r#"{"video_id":"track00001","text":"upbeat","top_k":3}"#;
    let query = request(format!(
        "POST /query HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    ));
    assert!(query.starts_with("HTTP/1.1 200"), "{query}");
    assert_eq!(query.matches("track_id").count(), 3);
    child.kill().unwrap();
    child.wait().unwrap();
}
