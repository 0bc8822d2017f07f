//! Wire-protocol conformance against a stand-alone Python worker. Skipped when
//! `python3` is not on the path.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Duration;

use ndarray::Array2;
use serde_json::json;

use ensemble_lab::combiners::Strategy;
use ensemble_lab::harness::{run_dataset, BaseEntry, RunConfig};
use ensemble_lab::learners::{BuiltinLearner, FileBackedPredictor, Sidecar, SplitName, WireClient};
use ensemble_lab::synthetic::{gaussian_mixture, MixtureSpec};
use ensemble_lab::{Dataset64, Error, ProbabilityMatrix64};

const WORKER: &str = r#"
import json, sys

stored = json.load(open(sys.argv[1])) if len(sys.argv) > 1 else None
prior = None
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    try:
        req = json.loads(line)
        op = req.get("op")
        if op == "handshake":
            reply = {"ok": True, "model": "mock", "classes": None}
        elif op == "fit":
            y = req["y"]
            prior = [y.count(c) / len(y) for c in range(max(y) + 1)]
            reply = {"ok": True, "fit_seconds": 0.0}
        elif op == "predict_proba":
            n = len(req["X"])
            reply = {"ok": True, "proba": stored[:n] if stored is not None else [prior] * n}
        elif op == "shutdown":
            print(json.dumps({"ok": True}), flush=True)
            break
        else:
            reply = {"ok": False, "error": "unknown op %r" % (op,)}
    except Exception as e:
        print("worker: %s" % e, file=sys.stderr)
        reply = {"ok": False, "error": str(e)}
    print(json.dumps(reply), flush=True)
"#;

fn python() -> Option<String> {
    let ok = Command::new("python3").arg("--version").output().map(|o| o.status.success()).unwrap_or(false);
    if !ok {
        eprintln!("python3 not found; skipping");
    }
    ok.then(|| "python3".to_string())
}

fn worker_command(dir: &Path, stored: Option<&Path>) -> Vec<String> {
    let script = dir.join("worker.py");
    fs::write(&script, WORKER).unwrap();
    let mut cmd = vec![python().unwrap(), script.to_string_lossy().into_owned()];
    cmd.extend(stored.map(|p| p.to_string_lossy().into_owned()));
    cmd
}

/// Rows with awkward decimal expansions, subnormal-adjacent entries and exact zeros.
fn awkward_matrix(n: usize, c: usize) -> ProbabilityMatrix64 {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let raw = Array2::from_shape_fn((n, c), |(i, j)| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        match (i + j) % 7 {
            0 => 0.0,
            1 => 1e-300,
            2 => 0.1 + 0.2,
            _ => (state >> 11) as f64 / (1u64 << 53) as f64 + 1e-3,
        }
    });
    ProbabilityMatrix64::normalized(raw).unwrap()
}

#[test]
fn wire_predictions_match_the_file_backed_matrix_bit_for_bit() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let matrix = awkward_matrix(40, 3);
    let stored = dir.path().join("stored.json");
    let rows: Vec<Vec<f64>> = matrix.view().rows().into_iter().map(|r| r.to_vec()).collect();
    fs::write(&stored, serde_json::to_string(&rows).unwrap()).unwrap();

    let csv = dir.path().join("mock.test.csv");
    let sidecar = Sidecar { model: "mock".into(), dataset: "d".into(), split: SplitName::Test };
    FileBackedPredictor::new(sidecar, matrix.clone()).save(&csv).unwrap();
    let from_file = FileBackedPredictor::<f64>::load(&csv).unwrap();

    let mut client = WireClient::spawn(&worker_command(dir.path(), Some(&stored)), Duration::from_secs(30)).unwrap();
    assert_eq!(client.model(), "mock");
    let x = Array2::<f64>::zeros((40, 2));
    client.fit(x.view(), &[0, 1, 2], 0).unwrap();
    let from_wire = ProbabilityMatrix64::new(client.predict_proba(x.view()).unwrap()).unwrap();
    client.shutdown().unwrap();

    assert_eq!(&from_wire, from_file.matrix());
    assert_eq!(from_wire, matrix);
    for (a, b) in from_wire.view().iter().zip(matrix.view()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn worker_survives_malformed_requests() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut client = WireClient::spawn(&worker_command(dir.path(), None), Duration::from_secs(30)).unwrap();
    for bad in [json!("not an object"), json!({"op": "explode"}), json!({"op": "fit", "X": [[0.0]]})] {
        match client.request(&bad) {
            Err(Error::Protocol(msg)) => assert!(!msg.is_empty()),
            other => panic!("expected a protocol error for {bad}, got {other:?}"),
        }
    }
    let x = Array2::<f64>::zeros((4, 1));
    client.fit(x.view(), &[0, 0, 0, 1], 0).unwrap();
    let p = client.predict_proba(x.view()).unwrap();
    assert_eq!(p.row(0).to_vec(), vec![0.75, 0.25]);
    client.shutdown().unwrap();
}

#[test]
fn external_member_runs_through_the_harness() {
    if python().is_none() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let spec = MixtureSpec { rows: 80, features: 3, ..MixtureSpec::new("ext", 2, 6) };
    let data: Dataset64 = gaussian_mixture(&spec).unwrap();
    let mut cfg = RunConfig::new(vec![], vec![
        BaseEntry::Builtin { name: None, learner: BuiltinLearner::Prior, seed: 0 },
        BaseEntry::External { name: "worker".into(), command: worker_command(dir.path(), None), timeout_seconds: Some(30) },
    ]);
    cfg.strategies = vec![Strategy::WeightedAverage, Strategy::Stacking, Strategy::SeedEnsemble];
    let run = run_dataset(&cfg, &data).unwrap();
    let by = |m: &str| run.records.iter().find(|r| r.method == m).unwrap();
    let (prior, worker) = (by("prior"), by("worker"));
    assert!(worker.is_ok(), "{:?}", worker.error);
    assert_eq!(worker.test_predictions, prior.test_predictions);
    assert_eq!(worker.accuracy(), prior.accuracy());
    for s in cfg.strategies {
        assert!(by(s.name()).is_ok(), "{}: {:?}", s.name(), by(s.name()).error);
    }
}
