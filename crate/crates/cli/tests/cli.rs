use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn provarc(args: &[&str]) -> Output {
    provarc_env(args, &[])
}

fn provarc_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_provarc"));
    cmd.args(args).env_remove("PROVARC_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn key_values(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const TOY: &str = r#"{"type":"node","id":1,"attr":"aaabac"}
{"type":"node","id":2,"attr":"ababac"}
{"type":"node","id":3,"attr":"baaaba"}
{"type":"node","id":4,"attr":"lonely"}
{"type":"edge","id":10,"src":1,"dst":2,"attr":"write"}
{"type":"edge","id":11,"src":1,"dst":2,"attr":"write"}
{"type":"edge","id":12,"src":3,"dst":1,"attr":"fork"}
{"type":"edge","id":13,"src":3,"dst":2,"attr":"read"}
"#;

fn toy_archive(dir: &TempDir) -> PathBuf {
    let input = path(dir, "toy.jsonl");
    let archive = path(dir, "toy.less");
    fs::write(&input, TOY).unwrap();
    ok(provarc(&["store", s(&input), s(&archive)]));
    archive
}

#[test]
fn toy_forward_trace_reaches_both_descendants() {
    let dir = TempDir::new().unwrap();
    let archive = toy_archive(&dir);
    let out = ok(provarc(&["query", s(&archive), "--node", "3", "--limit", "5"]));
    let lines = json_lines(&out);
    let nodes: Vec<_> =
        lines.iter().filter(|v| v["type"] == "node").map(|v| (v["id"].as_u64().unwrap(), v["attr"].clone())).collect();
    assert_eq!(nodes, vec![(3, "baaaba".into()), (1, "aaabac".into()), (2, "ababac".into())]);
    let edges: Vec<_> = lines.iter().filter(|v| v["type"] == "edge").map(|v| v["id"].as_u64().unwrap()).collect();
    assert_eq!(edges, vec![12, 13]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
}

#[test]
fn backward_trace_and_isolated_node() {
    let dir = TempDir::new().unwrap();
    let archive = toy_archive(&dir);
    let out = ok(provarc(&["query", s(&archive), "--node", "2", "--direction", "backward"]));
    let ids: Vec<_> =
        json_lines(&out).iter().map(|v| (v["type"].as_str().unwrap().to_string(), v["id"].as_u64().unwrap())).collect();
    let want = [("node", 2), ("node", 1), ("node", 3), ("edge", 10), ("edge", 11), ("edge", 13), ("edge", 12)];
    assert_eq!(ids, want.map(|(t, i)| (t.to_string(), i)));

    for dir_flag in ["forward", "backward"] {
        let out = ok(provarc(&["query", s(&archive), "--node", "4", "--direction", dir_flag]));
        let lines = json_lines(&out);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0]["attr"], "lonely");
    }
}

#[test]
fn store_then_query_returns_input_attributes() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "gen.jsonl");
    let archive = path(&dir, "gen.less");
    ok(provarc(&["gen", s(&input), "--records", "400", "--seed", "9"]));
    ok(provarc(&["store", s(&input), s(&archive), "--window", "6", "--model", "tree"]));

    let records: Vec<Value> =
        fs::read_to_string(&input).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut want: HashMap<(String, u64), Value> = HashMap::new();
    for r in &records {
        want.insert((r["type"].as_str().unwrap().to_string(), r["id"].as_u64().unwrap()), r.clone());
    }
    let mut seen = 0;
    for r in records.iter().filter(|r| r["type"] == "node").take(40) {
        let id = r["id"].as_u64().unwrap().to_string();
        let out = ok(provarc(&["query", s(&archive), "--node", &id, "--limit", "50"]));
        for line in json_lines(&out) {
            let key = (line["type"].as_str().unwrap().to_string(), line["id"].as_u64().unwrap());
            assert_eq!(line, want[&key], "{key:?}");
            seen += 1;
        }
    }
    assert!(seen > 40);
}

#[test]
fn stats_matches_store_report_and_file_size() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "gen.jsonl");
    let archive = path(&dir, "gen.less");
    ok(provarc(&["gen", s(&input), "--records", "300"]));
    let stored = key_values(&ok(provarc(&["store", s(&input), s(&archive)])));
    let stats = key_values(&ok(provarc(&["stats", s(&archive)])));
    let size = fs::metadata(&archive).unwrap().len().to_string();
    assert_eq!(stored["total_bytes"], size);
    for key in [
        "model_bytes",
        "calibration_bytes",
        "node_tree_bytes",
        "edge_tree_bytes",
        "overhead_bytes",
        "total_bytes",
        "stream_length",
    ] {
        assert_eq!(stored[key], stats[key], "{key}");
    }
    let parts: u64 = ["model_bytes", "calibration_bytes", "node_tree_bytes", "edge_tree_bytes", "overhead_bytes"]
        .iter()
        .map(|k| stats[*k].parse::<u64>().unwrap())
        .sum();
    assert_eq!(parts.to_string(), size);
    assert!(stored.contains_key("training_accuracy") && stored.contains_key("compression_ratio"));
    assert!(stored["node_tree_bytes"].parse::<u64>().unwrap() > 0);
}

#[test]
fn empty_input_gives_minimal_archive() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "empty.jsonl");
    let archive = path(&dir, "empty.less");
    fs::write(&input, "").unwrap();
    let kv = key_values(&ok(provarc(&["store", s(&input), s(&archive)])));
    assert_eq!(kv["stream_length"], "1");
    assert_eq!(kv["total_bytes"], fs::metadata(&archive).unwrap().len().to_string());
    ok(provarc(&["stats", s(&archive)]));
    assert_eq!(provarc(&["query", s(&archive), "--node", "0"]).status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_honours_record_count() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (path(&dir, "a"), path(&dir, "b"), path(&dir, "c"));
    ok(provarc(&["gen", s(&a), "--records", "250", "--seed", "3"]));
    ok(provarc(&["gen", s(&b), "--records", "250", "--seed", "3"]));
    ok(provarc(&["gen", s(&c), "--records", "250", "--seed", "4"]));
    let (ta, tb, tc) = (fs::read(&a).unwrap(), fs::read(&b).unwrap(), fs::read(&c).unwrap());
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
    let edges = String::from_utf8(ta).unwrap().lines().filter(|l| l.contains(r#""type":"edge""#)).count();
    assert_eq!(edges, 250);

    let out = ok(provarc(&["gen", "-", "--records", "250", "--seed", "3"]));
    assert_eq!(out.stdout, tb);
}

#[test]
fn shuffled_corpus_has_less_local_similarity() {
    use provarc_core::attr::{bow_encode, manhattan};
    use provarc_core::graph::{normalize, parse_input};

    let dir = TempDir::new().unwrap();
    let mean_gap = |shuffle: bool| {
        let p = path(&dir, if shuffle { "s.jsonl" } else { "u.jsonl" });
        let mut args = vec!["gen", s(&p), "--records", "2000", "--seed", "5"];
        if shuffle {
            args.push("--shuffle");
        }
        ok(provarc(&args));
        let (nodes, edges) = parse_input(fs::read(&p).unwrap().as_slice()).unwrap();
        let g = normalize(nodes, edges).unwrap();
        let attrs = g.edge_attrs();
        let mut sum = 0u64;
        let mut pairs = 0u64;
        for i in 0..attrs.len() {
            for j in i + 1..attrs.len().min(i + 4) {
                sum += manhattan(&bow_encode(&attrs[i]), &bow_encode(&attrs[j]));
                pairs += 1;
            }
        }
        sum as f64 / pairs as f64
    };
    let (plain, shuffled) = (mean_gap(false), mean_gap(true));
    assert!(plain < shuffled, "{plain} vs {shuffled}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let archive = toy_archive(&dir);
    assert_eq!(provarc(&["query", s(&archive), "--node", "77"]).status.code(), Some(2));
    assert_eq!(provarc(&["query", s(&archive), "--node", "1", "--limit", "0"]).status.code(), Some(2));

    let corrupt = path(&dir, "corrupt.less");
    let mut bytes = fs::read(&archive).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&corrupt, &bytes).unwrap();
    assert_eq!(provarc(&["stats", s(&corrupt)]).status.code(), Some(1));
    assert_eq!(provarc(&["query", s(&corrupt), "--node", "1"]).status.code(), Some(1));
    assert_eq!(provarc(&["stats", s(&path(&dir, "missing"))]).status.code(), Some(1));

    let bad = path(&dir, "bad.jsonl");
    fs::write(&bad, "{\"type\":\"edge\",\"id\":1,\"src\":5,\"dst\":6}\n").unwrap();
    let out = provarc(&["store", s(&bad), s(&path(&dir, "x.less"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    fs::write(&bad, "not json\n").unwrap();
    assert_eq!(provarc(&["store", s(&bad), s(&path(&dir, "x.less"))]).status.code(), Some(1));
}

#[test]
fn thread_count_from_environment() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "t.jsonl");
    fs::write(&input, TOY).unwrap();
    let one = path(&dir, "one.less");
    let four = path(&dir, "four.less");
    ok(provarc_env(&["store", s(&input), s(&one)], &[("PROVARC_THREADS", "1")]));
    ok(provarc_env(&["store", s(&input), s(&four)], &[("PROVARC_THREADS", "4")]));
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
    let out = provarc_env(&["store", s(&input), s(&one)], &[("PROVARC_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(1));
}
