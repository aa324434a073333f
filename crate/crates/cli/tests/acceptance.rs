//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every PASS/FAIL line is printed; exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::{mmfact, path_str, score_fixture, unit_rows};
use mmfact_core::applications::{
    scst_advantage, select_guidance_images, CandidateInputs, RewardConfig, ScoreInputs,
};
use mmfact_core::benchmarks::{
    bison_accuracy, foil_paired_accuracy, ranking_accuracy, BisonItem, FoilSetting, ImageChoice, PromptMode,
    RankingInstance,
};
use mmfact_core::combiner::{predict, CombinerConfig, FittedCombiner};
use mmfact_core::ingest::{read_container, write_container, Container};
use mmfact_core::judgments::{aggregate, JudgmentRecord};
use mmfact_core::scoring::{
    bert_s, clip_s, clipbertscore, pairwise_cossim, EmbeddingMatrix, EncoderMeta, ScoreReport, DEFAULT_ALPHA,
};
use mmfact_core::stats::{fleiss_kappa, pearson, percent_majority, spearman};
use mmfact_core::text::{lcs_len, rouge_l, rouge_n, tokenize, TokenSequence};
use mmfact_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Outcome {
    check((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} (tol {tol})"))
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, dims: usize) -> EmbeddingMatrix {
    let data = (0..rows * dims).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(rows, dims, data, false).unwrap()
}

fn naive_cos(a: &[f32], b: &[f32]) -> f64 {
    let (mut d, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        d += *x as f64 * *y as f64;
        na += *x as f64 * *x as f64;
        nb += *y as f64 * *y as f64;
    }
    d / (na.sqrt() * nb.sqrt())
}

fn kernel_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for inst in 0..200 {
        let dims = rng.gen_range(1..=64);
        let (vr, tr) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let v = rand_matrix(&mut rng, vr, dims);
        let t = rand_matrix(&mut rng, tr, dims);
        let sim = pairwise_cossim(&v, &t).map_err(|e| e.to_string())?;
        let mut total = 0.0;
        let mut best = vec![f64::NEG_INFINITY; tr];
        for i in 0..vr {
            for j in 0..tr {
                let c = naive_cos(v.row(i), t.row(j));
                close(sim.get(i, j), c, 1e-6, &format!("instance {inst} pairwise ({i},{j})"))?;
                total += c;
                best[j] = best[j].max(c);
            }
        }
        close(clip_s(&v, &t).unwrap(), total / (vr * tr) as f64, 1e-6, &format!("instance {inst} clip_s"))?;
        let bert = best.iter().sum::<f64>() / tr as f64;
        close(bert_s(&v, &t).unwrap(), bert, 1e-6, &format!("instance {inst} bert_s"))?;
    }
    let took = started.elapsed();
    check(took < Duration::from_secs(5), || format!("took {took:?}"))
}

fn combination_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    for _ in 0..1000 {
        let (c, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        check(clipbertscore(c, b, 0.0).unwrap() == b, || format!("alpha=0 on ({c}, {b})"))?;
        check(clipbertscore(c, b, 1.0).unwrap() == c, || format!("alpha=1 on ({c}, {b})"))?;
    }
    check(DEFAULT_ALPHA == 0.25, || format!("DEFAULT_ALPHA = {DEFAULT_ALPHA}"))?;
    check(CombinerConfig::default().alpha == 0.25, || "combiner default alpha".into())?;
    check(RewardConfig::default().score_alpha == 0.25, || "reward default alpha".into())?;
    close(clipbertscore(0.4, 0.8, DEFAULT_ALPHA).unwrap(), 0.70, 1e-12, "0.25*0.4 + 0.75*0.8")?;
    close(predict(&FittedCombiner::with_alpha(0.25).unwrap(), 0.4, 0.8).unwrap(), 0.70, 1e-12, "predict")?;
    let r = ScoreReport::new("e", "s", 0.4, 0.8, DEFAULT_ALPHA, None).unwrap();
    close(r.combined, 0.70, 1e-12, "report combined")
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Average ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
fn counting_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn kappa_formula(table: &[Vec<u32>]) -> f64 {
    let n_items = table.len() as f64;
    let raters = table[0].iter().sum::<u32>() as f64;
    let k = table[0].len();
    let p_i: Vec<f64> = table
        .iter()
        .map(|row| (row.iter().map(|&c| (c * c) as f64).sum::<f64>() - raters) / (raters * (raters - 1.0)))
        .collect();
    let p_bar = p_i.iter().sum::<f64>() / n_items;
    let p_j: Vec<f64> = (0..k)
        .map(|j| table.iter().map(|r| r[j] as f64).sum::<f64>() / (n_items * raters))
        .collect();
    let p_e: f64 = p_j.iter().map(|p| p * p).sum();
    (p_bar - p_e) / (1.0 - p_e)
}

fn statistics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for inst in 0..100 {
        let n = rng.gen_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.gen_range(-3.0..3.0)).collect();
        close(pearson(&x, &y).unwrap().rho, textbook_pearson(&x, &y), 1e-9, &format!("pearson {inst}"))?;
    }
    for inst in 0..100 {
        let n = rng.gen_range(3..60);
        // small integer values force ties
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let (rx, ry) = (counting_ranks(&x), counting_ranks(&y));
        let Ok(got) = spearman(&x, &y) else {
            check(rx.iter().all(|&r| r == rx[0]) || ry.iter().all(|&r| r == ry[0]), || {
                format!("spearman {inst} errored on a non-constant series")
            })?;
            continue;
        };
        close(got.rho, textbook_pearson(&rx, &ry), 1e-9, &format!("spearman {inst}"))?;
    }
    for inst in 0..100 {
        let items = rng.gen_range(2..30);
        let raters = rng.gen_range(2..8u32);
        let cats = rng.gen_range(2..5);
        let table: Vec<Vec<u32>> = (0..items)
            .map(|_| {
                let mut row = vec![0u32; cats];
                for _ in 0..raters {
                    row[rng.gen_range(0..cats)] += 1;
                }
                row
            })
            .collect();
        match fleiss_kappa(&table) {
            Ok(k) => close(k, kappa_formula(&table), 1e-9, &format!("kappa {inst}"))?,
            Err(Error::UndefinedKappa) => check(!kappa_formula(&table).is_finite(), || format!("kappa {inst} undefined"))?,
            Err(e) => return Err(format!("kappa {inst}: {e}")),
        }
    }
    for inst in 0..100 {
        let raters = [3usize, 5, 7][rng.gen_range(0..3)];
        let labels: Vec<Vec<u8>> = (0..rng.gen_range(1..30))
            .map(|_| (0..raters).map(|_| rng.gen_range(0..2)).collect())
            .collect();
        let want = labels
            .iter()
            .map(|row| {
                let ones = row.iter().filter(|&&l| l == 1).count();
                ones.max(raters - ones) as f64 / raters as f64
            })
            .sum::<f64>()
            / labels.len() as f64;
        close(percent_majority(&labels).unwrap(), want, 1e-9, &format!("percent_majority {inst}"))?;
    }
    check(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateInput(_))), || {
        "constant series accepted by pearson".into()
    })?;
    check(matches!(spearman(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]), Err(Error::DegenerateInput(_))), || {
        "constant series accepted by spearman".into()
    })?;
    check(matches!(fleiss_kappa(&[[3u32, 0], [3, 0]]), Err(Error::UndefinedKappa)), || {
        "Pe = 1 accepted by fleiss_kappa".into()
    })
}

fn judgment_aggregation() -> Outcome {
    let mut checked = 0;
    for doc_bits in 0u8..8 {
        for img_bits in 0u8..8 {
            let records: Vec<JudgmentRecord> = (0..3)
                .map(|a| JudgmentRecord {
                    example_id: "e".into(),
                    system_id: "s".into(),
                    annotator_id: format!("a{a}"),
                    doc_label: doc_bits >> a & 1 == 1,
                    img_label: img_bits >> a & 1 == 1,
                })
                .collect();
            let agg = aggregate(&records).map_err(|e| e.to_string())?;
            let j = &agg[0];
            let doc = doc_bits.count_ones() >= 2;
            let img = img_bits.count_ones() >= 2;
            check(j.doc == doc && j.image == img, || format!("majority for {doc_bits:03b}/{img_bits:03b}"))?;
            check(j.combined_binary == (doc && img), || format!("AND for {doc_bits:03b}/{img_bits:03b}"))?;
            let mean = (doc as u8 + img as u8) as f64 / 2.0;
            check(j.combined_continuous == mean, || format!("mean for {doc_bits:03b}/{img_bits:03b}"))?;
            checked += 1;
        }
    }
    check(checked == 64, || format!("{checked} patterns"))
}

fn benchmark_harness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    // coarse scores make ties common
    let coarse = |rng: &mut ChaCha8Rng| rng.gen_range(0..5) as f64 / 4.0;

    let instances: Vec<RankingInstance> = (0..1000)
        .map(|i| {
            let k = rng.gen_range(2..6);
            RankingInstance {
                instance_id: format!("r{i}"),
                prompt_mode: PromptMode::Combined,
                correct_index: rng.gen_range(0..k),
                candidate_scores: (0..k).map(|_| coarse(&mut rng)).collect(),
            }
        })
        .collect();
    let mut wins = 0;
    for inst in &instances {
        let best = inst.candidate_scores[inst.correct_index];
        let rivals_max = inst
            .candidate_scores
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != inst.correct_index)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        wins += (best > rivals_max) as usize;
    }
    let r = ranking_accuracy(&instances, "test").map_err(|e| e.to_string())?;
    check(r.correct == wins && r.n == 1000, || format!("ranking {} vs oracle {wins}", r.correct))?;

    let pairs: Vec<(f64, f64)> = (0..1000).map(|_| (coarse(&mut rng), coarse(&mut rng))).collect();
    let wins = pairs.iter().filter(|(t, f)| t > f).count();
    let r = foil_paired_accuracy(&pairs, FoilSetting::NoRef).map_err(|e| e.to_string())?;
    check(r.correct == wins && r.n == 1000, || format!("foil {} vs oracle {wins}", r.correct))?;

    let axis = |i: usize| -> Vec<f32> { (0..3).map(|d| (d == i) as u8 as f32).collect() };
    let items: Vec<BisonItem> = (0..1000)
        .map(|i| BisonItem {
            item_id: format!("b{i}"),
            text: vec![1.0, rng.gen_range(0..3) as f32, rng.gen_range(0..3) as f32],
            image_a: axis(rng.gen_range(0..3)),
            image_b: axis(rng.gen_range(0..3)),
            correct: if rng.gen_bool(0.5) { ImageChoice::A } else { ImageChoice::B },
        })
        .collect();
    let wins = items
        .iter()
        .filter(|it| {
            let (a, b) = (naive_cos(&it.image_a, &it.text), naive_cos(&it.image_b, &it.text));
            match it.correct {
                ImageChoice::A => a > b,
                ImageChoice::B => b > a,
            }
        })
        .count();
    let r = bison_accuracy(&items).map_err(|e| e.to_string())?;
    check(r.correct == wins && r.n == 1000, || format!("bison {} vs oracle {wins}", r.correct))?;

    // tie fixtures: every tie scores as incorrect
    let tie = RankingInstance {
        instance_id: "tie".into(),
        prompt_mode: PromptMode::Document,
        correct_index: 2,
        candidate_scores: vec![0.5; 4],
    };
    check(ranking_accuracy(&[tie], "test").unwrap().accuracy == 0.0, || "ranking tie counted".into())?;
    check(foil_paired_accuracy(&[(0.3, 0.3)], FoilSetting::FourRef).unwrap().accuracy == 0.0, || {
        "foil tie counted".into()
    })?;
    let tied = BisonItem {
        item_id: "t".into(),
        text: vec![1.0, 1.0],
        image_a: vec![1.0, 0.0],
        image_b: vec![0.0, 1.0],
        correct: ImageChoice::A,
    };
    check(bison_accuracy(&[tied]).unwrap().accuracy == 0.0, || "bison tie counted".into())
}

fn ngram_oracle(c: &[String], r: &[String], n: usize) -> (f64, f64, f64) {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            Vec::new()
        } else {
            (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
        }
    };
    let (cg, mut rg) = (grams(c), grams(r));
    let (cn, rn) = (cg.len(), rg.len());
    let mut hits = 0;
    for g in &cg {
        if let Some(pos) = rg.iter().position(|x| x == g) {
            rg.swap_remove(pos);
            hits += 1;
        }
    }
    prf(hits, cn, rn)
}

fn prf(hits: usize, cn: usize, rn: usize) -> (f64, f64, f64) {
    let p = if cn == 0 { 0.0 } else { hits as f64 / cn as f64 };
    let r = if rn == 0 { 0.0 } else { hits as f64 / rn as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn rouge_suite() -> Outcome {
    let c = tokenize("The cat sat on the mat.");
    let r = tokenize("the cat is on the mat");
    // bigrams shared: "the cat", "on the", "the mat" of 5 each
    let s = rouge_n(&c, &r, 2);
    close(s.precision, 0.6, 1e-12, "bigram precision")?;
    close(s.recall, 0.6, 1e-12, "bigram recall")?;
    close(s.f1, 0.6, 1e-12, "bigram f1")?;
    let c = tokenize("a b c d e");
    let r = tokenize("a c e f");
    let s = rouge_l(&c, &r);
    close(s.precision, 3.0 / 5.0, 1e-12, "lcs precision")?;
    close(s.recall, 3.0 / 4.0, 1e-12, "lcs recall")?;
    close(s.f1, 2.0 * 0.6 * 0.75 / 1.35, 1e-12, "lcs f1")?;

    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let vocab = ["a", "b", "c", "d", "the", "of"];
    let words = |rng: &mut ChaCha8Rng| -> TokenSequence {
        (0..rng.gen_range(0..12)).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect()
    };
    for inst in 0..200 {
        let (c, r) = (words(&mut rng), words(&mut rng));
        for n in 1..=2 {
            let got = rouge_n(&c, &r, n);
            let (p, rc, f) = ngram_oracle(&c.tokens, &r.tokens, n);
            close(got.precision, p, 1e-9, &format!("pair {inst} rouge{n} p"))?;
            close(got.recall, rc, 1e-9, &format!("pair {inst} rouge{n} r"))?;
            close(got.f1, f, 1e-9, &format!("pair {inst} rouge{n} f"))?;
        }
        let l = lcs_oracle(&c.tokens, &r.tokens);
        check(lcs_len(&c.tokens, &r.tokens) == l, || format!("pair {inst} lcs"))?;
        let (p, rc, f) = prf(l, c.len(), r.len());
        let got = rouge_l(&c, &r);
        close(got.precision, p, 1e-9, &format!("pair {inst} rougeL p"))?;
        close(got.recall, rc, 1e-9, &format!("pair {inst} rougeL r"))?;
        close(got.f1, f, 1e-9, &format!("pair {inst} rougeL f"))?;
    }
    Ok(())
}

fn guidance_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    for inst in 0..50 {
        let dims = rng.gen_range(4..32);
        let n_images = rng.gen_range(1..10);
        let images = unit_rows(&mut rng, n_images, dims);
        let (ns, nd, nt) = (rng.gen_range(1..5), rng.gen_range(2..15), rng.gen_range(1..6));
        let sentences = unit_rows(&mut rng, ns, dims);
        let doc = unit_rows(&mut rng, nd, dims);
        let summary = unit_rows(&mut rng, nt, dims);
        let k = rng.gen_range(1..=n_images);
        let mut seen: Option<Vec<usize>> = None;
        for alpha in [0.1, 0.25, 0.9] {
            let sel = select_guidance_images(&images, &sentences, &doc, &summary, alpha, k).map_err(|e| e.to_string())?;
            if let Some(prev) = &seen {
                check(prev == &sel.ranked_indices, || format!("instance {inst}: order changed at alpha {alpha}"))?;
            }
            seen = Some(sel.ranked_indices);
        }
    }
    Ok(())
}

fn scst_rewards() -> Outcome {
    let cfg = RewardConfig::default();
    check(cfg.clipbertscore_weight == 2.0, || format!("weight {}", cfg.clipbertscore_weight))?;
    check(cfg.rl_mixing_alpha == 0.998, || format!("rl_mixing_alpha {}", cfg.rl_mixing_alpha))?;
    let pre = |v: f64| CandidateInputs {
        scores: Some(ScoreInputs::Precomputed { clip_s: v, bert_s: v }),
        tokens: None,
        references: Vec::new(),
    };
    let worked = scst_advantage(&pre(0.6), &pre(0.5), 0, &cfg).map_err(|e| e.to_string())?;
    close(worked.advantage, 0.2, 1e-12, "weighted advantage")?;

    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let vocab = ["the", "cat", "sat", "on", "a", "mat"];
    let references: Vec<TokenSequence> = vec![tokenize("the cat sat on the mat")];
    let cand = |rng: &mut ChaCha8Rng| CandidateInputs {
        scores: Some(ScoreInputs::Precomputed {
            clip_s: rng.gen_range(-1.0..1.0),
            bert_s: rng.gen_range(-1.0..1.0),
        }),
        tokens: Some((0..rng.gen_range(1..8)).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect()),
        references: references.clone(),
    };
    for i in 0..100 {
        let (s, g) = (cand(&mut rng), cand(&mut rng));
        let step = rng.gen_range(0..1000u64);
        let fwd = scst_advantage(&s, &g, step, &cfg).map_err(|e| e.to_string())?;
        let back = scst_advantage(&g, &s, step, &cfg).map_err(|e| e.to_string())?;
        check(fwd.advantage == -back.advantage, || format!("pair {i}: {} vs {}", fwd.advantage, back.advantage))?;
        let want = if step % 2 == 0 { "clipbertscore" } else { "rouge2" };
        check(fwd.reward_name == want, || format!("pair {i} step {step}: {}", fwd.reward_name))?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let manifest = score_fixture(dir.path(), 50, 1009);
    let run = |out: &std::path::Path| {
        mmfact(&["score", "--manifest", path_str(&manifest), "--containers", path_str(dir.path()), "--out", path_str(out)])
    };
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        let o = run(p);
        check(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    }
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    check(ba == bb, || "score reruns differ".into())?;
    check(ba.iter().filter(|&&c| c == b'\n').count() == 50, || "expected 50 lines".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let m = rand_matrix(&mut rng, 17, 33);
    let ids = (0..17).map(|i| format!("id{i}")).collect();
    let c = Container::new(m, ids, EncoderMeta { name: "enc".into(), layer: Some(11) }).unwrap();
    let path = dir.path().join("c.mfe");
    write_container(&c, &path).map_err(|e| e.to_string())?;
    let back = read_container(&path).map_err(|e| e.to_string())?;
    let bits = |m: &EmbeddingMatrix| m.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    check(bits(&back.matrix) == bits(&c.matrix), || "payload bits differ".into())?;
    check(back == c, || "metadata differs".into())?;
    let again = dir.path().join("d.mfe");
    write_container(&back, &again).map_err(|e| e.to_string())?;
    check(std::fs::read(&again).unwrap() == std::fs::read(&path).unwrap(), || "rewrite bytes differ".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("kernel oracle equivalence", kernel_oracle),
        ("combination identities and default alpha", combination_identities),
        ("statistics oracle suite", statistics_oracle),
        ("judgment aggregation over all 2^6 patterns", judgment_aggregation),
        ("benchmark harness vs enumeration oracles", benchmark_harness),
        ("ROUGE worked examples and random pairs", rouge_suite),
        ("guidance ranking invariant across alpha", guidance_invariance),
        ("SCST antisymmetry, parity and defaults", scst_rewards),
        ("determinism of scoring and containers", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("[PASS] {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
