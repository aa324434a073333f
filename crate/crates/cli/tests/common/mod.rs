#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmfact_core::ingest::{write_container, Container};
use mmfact_core::scoring::{EmbeddingMatrix, EncoderMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn mmfact(args: &[&str]) -> Output {
    mmfact_env(args, &[])
}

pub fn mmfact_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mmfact"));
    cmd.args(args).env_remove("MMFACT_THREADS").env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stdout_lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Random unit-norm rows.
pub fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, dims: usize) -> EmbeddingMatrix {
    let data = (0..rows * dims).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(rows, dims, data, false)
        .unwrap()
        .normalized()
        .unwrap()
}

fn save(dir: &Path, name: &str, blocks: &[EmbeddingMatrix], encoder: &str) {
    let parts: Vec<&EmbeddingMatrix> = blocks.iter().collect();
    let m = EmbeddingMatrix::vstack(&parts).unwrap();
    let ids = (0..m.rows()).map(|i| format!("{name}-{i}")).collect();
    let meta = EncoderMeta {
        name: encoder.into(),
        layer: None,
    };
    write_container(&Container::new(m, ids, meta).unwrap(), dir.join(name)).unwrap();
}

/// Writes containers plus a manifest with `n` examples into `dir`; returns the
/// manifest path. Example `i` is `ex{i:03}` from system `sys{i % 2}`.
pub fn score_fixture(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 16;
    let mut tokens = Vec::new();
    let mut sentences = Vec::new();
    let mut images = Vec::new();
    let (mut t_at, mut s_at, mut i_at) = (0, 0, 0);
    let mut lines = Vec::new();
    for i in 0..n {
        let (doc, summ, sent, img) = (
            rng.gen_range(3..12),
            rng.gen_range(1..6),
            rng.gen_range(1..4),
            rng.gen_range(1..5),
        );
        tokens.push(unit_rows(&mut rng, doc + summ, dims));
        sentences.push(unit_rows(&mut rng, sent, dims));
        images.push(unit_rows(&mut rng, img, dims));
        lines.push(json!({
            "schema_version": 1,
            "example_id": format!("ex{i:03}"),
            "system_id": format!("sys{}", i % 2),
            "doc_tokens": {"container": "tokens.mfe", "start": t_at, "end": t_at + doc},
            "summary_tokens": {"container": "tokens.mfe", "start": t_at + doc, "end": t_at + doc + summ},
            "summary_sentences": {"container": "sentences.mfe", "start": s_at, "end": s_at + sent},
            "images": {"container": "images.mfe", "start": i_at, "end": i_at + img},
        }));
        t_at += doc + summ;
        s_at += sent;
        i_at += img;
    }
    save(dir, "tokens.mfe", &tokens, "token-encoder");
    save(dir, "sentences.mfe", &sentences, "text-encoder");
    save(dir, "images.mfe", &images, "image-encoder");
    let manifest = dir.join("manifest.jsonl");
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&manifest, body).unwrap();
    manifest
}

/// Score reports (only the fields tuning and meta-evaluation read).
pub fn write_scores(path: &Path, rows: &[(String, String, f64, f64)]) {
    let body: String = rows
        .iter()
        .map(|(ex, sys, clip, bert)| {
            let combined = 0.25 * clip + 0.75 * bert;
            format!(
                "{}\n",
                json!({"example_id": ex, "system_id": sys, "clip_s": clip, "bert_s": bert,
                       "combined": combined, "alpha": 0.25, "rescaled": false})
            )
        })
        .collect();
    std::fs::write(path, body).unwrap();
}

/// Judgments CSV with three annotators who all give `(doc, img)` per summary.
pub fn write_unanimous_judgments(path: &Path, rows: &[(String, String, bool, bool)]) {
    let mut body = String::from("example_id,system_id,annotator_id,doc_label,img_label\n");
    for (ex, sys, d, i) in rows {
        for a in ["a1", "a2", "a3"] {
            body.push_str(&format!("{ex},{sys},{a},{},{}\n", *d as u8, *i as u8));
        }
    }
    std::fs::write(path, body).unwrap();
}
