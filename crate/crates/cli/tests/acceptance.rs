//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criteria 1, 7, 8 and 10 drive the `incident` binary on the
//! default 110,000-event configuration; the others check library contracts
//! against independent oracles.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use incident_core::datagen::ingest_raw_files;
use incident_core::digest::file_sha256;
use incident_core::eval::roc_auc;
use incident_core::features::{Dataset, SchemaId};
use incident_core::geomatch::{haversine_m, split, MatchCaps, SpatialIndex, TrainSplit};
use incident_core::models::{DecisionTree, ForestParams, Network, RandomForest, TrainedModel, TreeParams};
use incident_core::rng::DetRng;
use incident_core::sampling::{resample, SamplingKind, SamplingStrategy};
use incident_service::{ConditionProvider, SnapshotProvider};

type Check = Result<String, String>;

const SEED: &str = "42";
const RUNTIME_LIMIT: Duration = Duration::from_secs(600);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_incident")
}

fn incident(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawning incident: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "incident {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Artifacts of generate → match → train → evaluate, keyed by file name.
fn pipeline(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let raw = dir.join("raw");
    let data = dir.join("data.csv");
    let model = dir.join("rf.json");
    let eval = dir.join("eval.json");
    let roc = dir.join("roc.csv");
    incident(&["generate", "--out", p(&raw), "--seed", SEED])?;
    incident(&["match", "--raw", p(&raw), "--out", p(&data)])?;
    incident(&[
        "train", "--data", p(&data), "--family", "rf", "--sampling", "under", "--seed", SEED, "--out", p(&model),
    ])?;
    incident(&[
        "evaluate", "--data", p(&data), "--model", p(&model), "--split", "test", "--out", p(&eval), "--roc", p(&roc),
    ])?;
    let mut artifacts: Vec<PathBuf> = ["events.jsonl", "weather.jsonl", "roads.jsonl", "traffic.jsonl"]
        .iter()
        .map(|f| raw.join(f))
        .collect();
    for f in [
        "data.csv",
        "data.csv.drops.json",
        "data.csv.heatmap.csv",
        "rf.json",
        "rf.json.validation.json",
        "eval.json",
        "roc.csv",
    ] {
        artifacts.push(dir.join(f));
    }
    artifacts
        .iter()
        .map(|a| {
            let name = a.strip_prefix(dir).unwrap().display().to_string();
            file_sha256(a).map(|d| (name, d)).map_err(|e| e.to_string())
        })
        .collect()
}

fn criterion_1(work: &Path) -> Check {
    let mut timings = Vec::new();
    let mut digests = Vec::new();
    for run in ["run_a", "run_b"] {
        let dir = work.join(run);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let start = Instant::now();
        digests.push(pipeline(&dir)?);
        timings.push(start.elapsed());
    }
    ensure(digests[0] == digests[1], || {
        let differing: Vec<&String> = digests[0]
            .iter()
            .filter(|(k, v)| digests[1].get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        format!("artifacts differ between runs: {differing:?}")
    })?;
    let slowest = timings.iter().max().unwrap();
    ensure(*slowest < RUNTIME_LIMIT, || format!("pipeline took {slowest:?}"))?;
    Ok(format!(
        "{} artifacts identical across two seeded runs; slowest run {:.1}s",
        digests[0].len(),
        slowest.as_secs_f64()
    ))
}

fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn criterion_2() -> Check {
    let mut rng = DetRng::new(2, 0);
    let mut worst: f64 = 0.0;
    for set in 0..500 {
        let n = 2 + rng.index(199);
        let levels = 2 + rng.index(20);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let base = rng.index(levels) as f64 / levels as f64;
                if l { (base + 0.2).min(1.0) } else { base }
            })
            .collect();
        let auc = roc_auc(&labels, &scores).map_err(|e| format!("set {set}: {e}"))?.auc;
        let err = (auc - pairwise_auc(&labels, &scores)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("set {set}: |Δ| = {err:e}"))?;
    }
    Ok(format!("500 tied score sets, max |AUC - pairwise| = {worst:e}"))
}

fn criterion_3() -> Check {
    let mut rng = DetRng::new(3, 0);
    let random_point = |rng: &mut DetRng| {
        let lat = (2.0 * rng.uniform() - 1.0).asin().to_degrees();
        (lat, rng.uniform_in(-180.0, 180.0))
    };
    let points: Vec<(u32, f64, f64)> = (0..10_000u32)
        .map(|i| {
            let (lat, lon) = random_point(&mut rng);
            (i, lat, lon)
        })
        .collect();
    let index = SpatialIndex::build(points.iter().copied());
    for q in 0..1000 {
        let (lat, lon) = random_point(&mut rng);
        let got = index.nearest_one(lat, lon).map_err(|e| e.to_string())?;
        let (mut best_id, mut best_d) = (u32::MAX, f64::INFINITY);
        for &(id, plat, plon) in &points {
            let d = haversine_m((lat, lon), (plat, plon));
            if d < best_d || (d == best_d && id < best_id) {
                best_id = id;
                best_d = d;
            }
        }
        ensure(got.id == best_id, || {
            format!("query {q} ({lat}, {lon}): index {} at {} m, brute force {best_id} at {best_d} m", got.id, got.distance_m)
        })?;
    }
    Ok("1000 queries over 10,000 points agree with brute force".into())
}

fn criterion_4() -> Check {
    let mut rng = DetRng::new(4, 0);
    let rows: Vec<Vec<f64>> = (0..32).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
    let labels: Vec<bool> = (0..32).map(|_| rng.bernoulli(0.5)).collect();
    let data = Dataset::from_rows(SchemaId(0), &rows, &labels).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..32).collect();
    let net = Network::init(&[5, 4, 1], &mut rng);
    let (_, analytic) = net.loss_and_gradient(&data, &all);
    let theta = net.params_flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let loss_at = |delta: f64| {
            let mut t = theta.clone();
            t[k] += delta;
            let mut n = net.clone();
            n.set_params_flat(&t);
            n.loss_and_gradient(&data, &all).0
        };
        let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("{} weights, max relative error {worst:e}", theta.len()))
}

fn criterion_5() -> Check {
    let mut rng = DetRng::new(5, 0);
    for set in 0..100 {
        let n_pos = 2 + rng.index(150);
        let n_neg = n_pos + 1 + rng.index(1500);
        let labels: Vec<bool> = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64, rng.normal()]).collect();
        let data = TrainSplit::designate(Dataset::from_rows(SchemaId(0), &rows, &labels).map_err(|e| e.to_string())?);
        let half = (n_pos + n_neg) / 2;
        for (kind, expected) in [
            (SamplingKind::Undersample, n_pos),
            (SamplingKind::Oversample, n_neg),
            (SamplingKind::FiftyFifty, half),
        ] {
            let out = resample(&data, SamplingStrategy { kind, seed: set }).map_err(|e| e.to_string())?;
            let pos = out.n_positive();
            let neg = out.len() - pos;
            ensure(pos == expected && neg == expected, || {
                format!("set {set} ({n_pos}/{n_neg}) {kind}: got {pos}/{neg}, want {expected}/{expected}")
            })?;
        }
    }
    Ok("100 imbalanced datasets: under, over and 50-50 counts exact".into())
}

fn criterion_6() -> Check {
    let mut rng = DetRng::new(6, 0);
    let mut sizes: Vec<usize> = vec![1, 2, 3, 7, 100, 101, 110_000];
    sizes.extend((0..100).map(|_| 1 + rng.index(5000)));
    for (i, &n) in sizes.iter().enumerate() {
        let items: Vec<usize> = (0..n).collect();
        let s = split(&items, (0.70, 0.15, 0.15), i as u64).map_err(|e| e.to_string())?;
        let held = (0.15 * n as f64).round() as usize;
        ensure(s.validation.len() == held && s.test.len() == held && s.train.get().len() == n - 2 * held, || {
            format!(
                "n = {n}: sizes {}/{}/{}",
                s.train.get().len(),
                s.validation.len(),
                s.test.len()
            )
        })?;
        let mut all: Vec<usize> = s.train.get().iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        ensure(all == items, || format!("n = {n}: parts are not a partition"))?;
    }
    Ok(format!("{} sizes: 70/15/15 with remainder to train, disjoint and exhaustive", sizes.len()))
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())
}

fn json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn metric(v: &serde_json::Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("{key} is undefined"))
}

/// Tunes and trains the production RF plus the imbalance-trained baselines
/// inside the first pipeline run directory.
fn criterion_7(work: &Path) -> Check {
    let dir = work.join("run_a");
    let data = dir.join("data.csv");
    let d = p(&data);
    let corr = dir.join("corr.csv");
    incident(&["explore", "--data", d, "--out", p(&corr)])?;
    let rows = read_csv(&corr)?;
    let top = &rows[0];
    let rho: f64 = top["rho"].parse().map_err(|_| format!("rho {:?}", top["rho"]))?;
    let a = top["feature"] == "air_temperature" && (0.13..=0.23).contains(&rho);

    let tune = dir.join("tune.csv");
    incident(&["tune", "--data", d, "--family", "rf", "--n", "50", "--folds", "3", "--seed", SEED, "--out", p(&tune)])?;
    let tuned = dir.join("rf_tuned.json");
    let best = dir.join("tune.csv.best.json");
    incident(&[
        "train", "--data", d, "--family", "rf", "--sampling", "under", "--hyperparams", p(&best), "--seed", SEED,
        "--out", p(&tuned),
    ])?;
    let eval = dir.join("rf_tuned_eval.json");
    incident(&["evaluate", "--data", d, "--model", p(&tuned), "--out", p(&eval)])?;
    let auc = metric(&json(&eval)?, "auc")?;
    let b = auc >= 0.80;

    let mut recalls = Vec::new();
    for family in ["lr", "nn"] {
        let model = dir.join(format!("{family}.json"));
        let report = dir.join(format!("{family}_eval.json"));
        incident(&["train", "--data", d, "--family", family, "--sampling", "none", "--seed", SEED, "--out", p(&model)])?;
        incident(&["evaluate", "--data", d, "--model", p(&model), "--threshold", "0.5", "--out", p(&report)])?;
        recalls.push((family, metric(&json(&report)?, "recall")?));
    }
    let c = recalls.iter().all(|(_, r)| *r < 0.10);
    let detail = format!(
        "(a) top feature {} ρ = {rho:.3}; (b) tuned RF test AUC {auc:.4}; (c) recall@0.5 {}",
        top["feature"],
        recalls
            .iter()
            .map(|(f, r)| format!("{f} {r:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if a && b && c {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8(work: &Path) -> Check {
    let dir = work.join("run_a");
    let sweep = dir.join("sweep.csv");
    incident(&[
        "sweep", "--data", p(&dir.join("data.csv")), "--model", p(&dir.join("rf_tuned.json")), "--out", p(&sweep),
    ])?;
    let rows = read_csv(&sweep)?;
    let num = |r: &BTreeMap<String, String>, k: &str| -> Result<f64, String> {
        r[k].parse().map_err(|_| format!("{k} = {} at threshold {}", r[k], r["threshold"]))
    };
    let recalls: Vec<f64> = rows.iter().map(|r| num(r, "recall")).collect::<Result<_, _>>()?;
    ensure(recalls.windows(2).all(|w| w[1] <= w[0]), || format!("recall not monotone: {recalls:?}"))?;
    let at = |t: &str| rows.iter().find(|r| r["threshold"] == t).ok_or(format!("threshold {t} missing"));
    let (mid, high) = (at("0.5")?, at("0.9")?);
    let (acc5, acc9) = (num(mid, "accuracy")?, num(high, "accuracy")?);
    let (pre5, pre9) = (num(mid, "precision")?, num(high, "precision")?);
    ensure(acc9 >= acc5 && pre9 >= pre5, || {
        format!("accuracy {acc5:.4} → {acc9:.4}, precision {pre5:.4} → {pre9:.4}")
    })?;
    Ok(format!(
        "{} thresholds, recall non-increasing; accuracy {acc5:.3} → {acc9:.3}, precision {pre5:.3} → {pre9:.3} (0.5 → 0.9)",
        rows.len()
    ))
}

fn criterion_9() -> Check {
    let mut rng = DetRng::new(9, 0);
    for set in 0..50 {
        let n = 20 + rng.index(100);
        let d = 2 + rng.index(5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.index(6) as f64 + 0.5 * rng.normal()).collect()).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] + rng.normal() > 2.5).collect();
        let data = Dataset::from_rows(SchemaId(0), &rows, &labels).map_err(|e| e.to_string())?;
        let tree = TreeParams::default();
        let dt = DecisionTree::fit(&data, &tree);
        let rf = RandomForest::fit(
            &data,
            &ForestParams {
                n_trees: 1,
                tree,
                max_features: Some(d),
                bootstrap: false,
            },
            set,
        );
        let probes: Vec<Vec<f64>> = (0..50).map(|_| (0..d).map(|_| rng.uniform_in(-1.0, 7.0)).collect()).collect();
        for x in rows.iter().chain(&probes) {
            ensure(dt.predict(x).to_bits() == rf.predict(x).to_bits(), || {
                format!("set {set}: tree {} vs forest {} at {x:?}", dt.predict(x), rf.predict(x))
            })?;
        }
    }
    Ok("50 datasets: single-tree forest predictions identical to the decision tree".into())
}

struct ServerGuard(std::process::Child);

impl Drop for ServerGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn criterion_10(work: &Path) -> Check {
    let dir = work.join("run_a");
    let data = dir.join("data.csv");
    let raw = dir.join("raw");
    let model_path = dir.join("rf_tuned.json");
    let dt_path = dir.join("dt.json");
    incident(&["train", "--data", p(&data), "--family", "dt", "--sampling", "under", "--seed", SEED, "--out", p(&dt_path)])?;

    let mut child = Command::new(bin())
        .args(["serve", "--model", p(&model_path), "--second-opinion", p(&dt_path), "--raw", p(&raw), "--port", "0"])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().unwrap();
    let _guard = ServerGuard(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
    let base = line
        .split_whitespace()
        .find(|w| w.starts_with("http://"))
        .ok_or_else(|| format!("no address in {line:?}"))?
        .to_string();

    let model = TrainedModel::load(&model_path).map_err(|e| e.to_string())?;
    let stores = ingest_raw_files(&raw).map_err(|e| e.to_string())?;
    let provider = SnapshotProvider::from_stores(&stores, MatchCaps::default()).map_err(|e| e.to_string())?;
    let mut rng = DetRng::new(10, 0);
    let picks = rng.sample_indices(110_000, 100);
    let mut requests = Vec::new();
    for i in picks {
        let e = &stores.events[i];
        let record = provider
            .lookup_conditions(e.latitude, e.longitude, e.timestamp)
            .map_err(|r| format!("offline lookup failed: {}", r.as_str()))?;
        let x = model.schema.encode(&record).map_err(|e| e.to_string())?;
        let offline = model.predict_proba(&x).map_err(|e| e.to_string())?;
        let body = serde_json::json!({"latitude": e.latitude, "longitude": e.longitude, "timestamp": e.timestamp});
        requests.push((body, offline));
    }

    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let client = reqwest::Client::new();
        let url = format!("{base}/v1/predict");
        let handles: Vec<_> = requests
            .iter()
            .map(|(body, _)| {
                let (client, url, body) = (client.clone(), url.clone(), body.clone());
                tokio::spawn(async move {
                    let resp = client.post(url).json(&body).send().await.map_err(|e| e.to_string())?;
                    let status = resp.status();
                    let value: serde_json::Value = resp.json().await.map_err(|e| e.to_string())?;
                    Ok::<_, String>((status, value))
                })
            })
            .collect();
        for (h, (body, offline)) in handles.into_iter().zip(&requests) {
            let (status, value) = h.await.map_err(|e| e.to_string())??;
            ensure(status.is_success(), || format!("{body}: status {status}: {value}"))?;
            let online = value["probability"].as_f64().ok_or("missing probability")?;
            ensure(online.to_bits() == offline.to_bits(), || format!("{body}: online {online} vs offline {offline}"))?;
            ensure(value["classification"].as_bool() == Some(online >= 0.65), || format!("{body}: classification {value}"))?;
            ensure(value["second_opinion"].as_array().is_some_and(|s| !s.is_empty()), || {
                format!("{body}: empty second opinion")
            })?;
        }
        for bad in ["{not json", r#"{"latitude": 48.5}"#, r#"{"latitude": 95.0, "longitude": 9.5, "timestamp": 1527000000}"#] {
            let resp = client
                .post(&url)
                .header("content-type", "application/json")
                .body(bad)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure(resp.status().is_client_error(), || format!("{bad}: status {}", resp.status()))?;
        }
        Ok::<_, String>(())
    })?;
    Ok("100 concurrent requests bit-identical to offline scores; 3 malformed requests rejected with 4xx".into())
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let root = work.path();
    let criteria: Vec<(u8, &str, Box<dyn Fn() -> Check>)> = vec![
        (1, "pipeline determinism and runtime", Box::new(|| criterion_1(root))),
        (2, "AUC equals pairwise oracle", Box::new(criterion_2)),
        (3, "nearest-neighbour index equals brute force", Box::new(criterion_3)),
        (4, "network gradient check", Box::new(criterion_4)),
        (5, "resampling class counts", Box::new(criterion_5)),
        (6, "70/15/15 split", Box::new(criterion_6)),
        (7, "synthetic signal recovery", Box::new(|| criterion_7(root))),
        (8, "threshold sweep trends", Box::new(|| criterion_8(root))),
        (9, "single-tree forest equals decision tree", Box::new(criterion_9)),
        (10, "service round trip", Box::new(|| criterion_10(root))),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id:>2}: {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id:>2}: {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
