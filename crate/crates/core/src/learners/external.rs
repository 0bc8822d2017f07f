//! Client for external model workers.
//!
//! A worker is a subprocess speaking newline-delimited JSON on stdin/stdout:
//!
//! ```text
//! → {"op":"handshake","version":1}              ← {"ok":true,"model":<string>,"classes":<int|null>}
//! → {"op":"fit","X":[[...]],"y":[...],"seed":<int>} ← {"ok":true,"fit_seconds":<real>}
//! → {"op":"predict_proba","X":[[...]]}          ← {"ok":true,"proba":[[...]]}
//! → {"op":"shutdown"}                           ← {"ok":true}
//! any failure                                   ← {"ok":false,"error":<string>}
//! ```
//!
//! Reals travel as shortest round-trip decimals. One request is in flight per
//! worker; each waits at most the configured timeout before the worker is killed.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use ndarray::{Array2, ArrayView2};
use serde_json::{json, Value};

use super::{Classifier, LearnerFactory, ModelKind};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

pub struct WireClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
    model: String,
    classes: Option<usize>,
    closed: bool,
}

fn rows_json<T: Real>(x: ArrayView2<'_, T>) -> Value {
    Value::Array(
        x.rows()
            .into_iter()
            .map(|r| Value::Array(r.iter().map(|v| json!(v.as_f64())).collect()))
            .collect(),
    )
}

impl WireClient {
    /// Spawns `command` (program followed by arguments) and performs the handshake.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("empty worker command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut client = Self::connect(stdout, stdin, timeout)?;
        client.child = Some(child);
        client.handshake()?;
        Ok(client)
    }

    /// Wraps an already-connected byte stream pair and performs the handshake.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
    ) -> Result<Self> {
        let mut client = Self::connect(reader, writer, timeout)?;
        client.handshake()?;
        Ok(client)
    }

    fn connect(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static, timeout: Duration) -> Result<Self> {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            timeout,
            model: String::new(),
            classes: None,
            closed: false,
        })
    }

    fn handshake(&mut self) -> Result<()> {
        let resp = self.request(&json!({"op": "handshake", "version": PROTOCOL_VERSION}))?;
        self.model = resp.get("model").and_then(Value::as_str).unwrap_or_default().to_string();
        self.classes = resp.get("classes").and_then(Value::as_u64).map(|c| c as usize);
        Ok(())
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn declared_classes(&self) -> Option<usize> {
        self.classes
    }

    fn kill(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
        self.closed = true;
    }

    /// Sends one request line and waits for one response line.
    pub fn request(&mut self, msg: &Value) -> Result<Value> {
        if self.closed {
            return Err(Error::Protocol("worker connection closed".into()));
        }
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                return Err(Error::Timeout(self.timeout.as_secs()));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.closed = true;
                return Err(Error::Protocol("worker closed its output".into()));
            }
        };
        let value: Value = serde_json::from_str(&reply)
            .map_err(|e| Error::Protocol(format!("unparseable response `{reply}`: {e}")))?;
        match value.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(value),
            Some(false) => Err(Error::Protocol(
                value.get("error").and_then(Value::as_str).unwrap_or("unspecified worker error").to_string(),
            )),
            None => Err(Error::Protocol(format!("response without `ok`: {reply}"))),
        }
    }

    /// Returns the worker-reported fit seconds.
    pub fn fit<T: Real>(&mut self, x: ArrayView2<'_, T>, y: &[usize], seed: u64) -> Result<f64> {
        let resp = self.request(&json!({"op": "fit", "X": rows_json(x), "y": y, "seed": seed}))?;
        Ok(resp.get("fit_seconds").and_then(Value::as_f64).unwrap_or(0.0))
    }

    pub fn predict_proba<T: Real>(&mut self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let resp = self.request(&json!({"op": "predict_proba", "X": rows_json(x)}))?;
        let rows = resp
            .get("proba")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Protocol("response without `proba`".into()))?;
        let c = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
        let mut out = Array2::<T>::zeros((rows.len(), c));
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_array().filter(|r| r.len() == c).ok_or_else(|| Error::Protocol("ragged proba".into()))?;
            for (j, v) in row.iter().enumerate() {
                out[[i, j]] = T::lit(v.as_f64().ok_or_else(|| Error::Protocol("non-numeric proba".into()))?);
            }
        }
        Ok(out)
    }

    pub fn shutdown(&mut self) -> Result<()> {
        if self.closed {
            return Ok(());
        }
        let result = self.request(&json!({"op": "shutdown"})).map(|_| ());
        self.closed = true;
        if let Some(child) = self.child.as_mut() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return result;
                }
                thread::sleep(Duration::from_millis(20));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
        result
    }
}

impl Drop for WireClient {
    fn drop(&mut self) {
        if !self.closed {
            let _ = self.shutdown();
        }
        if let Some(child) = self.child.as_mut() {
            if let Ok(None) = child.try_wait() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

/// Factory spawning one worker process per built model.
#[derive(Debug, Clone)]
pub struct ExternalLearner {
    pub name: String,
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl<T: Real> LearnerFactory<T> for ExternalLearner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ModelKind {
        ModelKind::External
    }

    fn build(&self) -> Result<Box<dyn Classifier<T>>> {
        Ok(Box::new(ExternalModel::new(WireClient::spawn(&self.command, self.timeout)?)))
    }
}

/// A [`Classifier`] backed by a connected worker.
pub struct ExternalModel {
    client: Mutex<WireClient>,
    fitted: Option<(usize, usize)>,
}

impl ExternalModel {
    pub fn new(client: WireClient) -> Self {
        Self { client: Mutex::new(client), fitted: None }
    }

    pub fn client(&self) -> std::sync::MutexGuard<'_, WireClient> {
        self.client.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl<T: Real> Classifier<T> for ExternalModel {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        super::check_fit_input(features, labels, class_count)?;
        self.client().fit(features, labels, seed)?;
        self.fitted = Some((features.ncols(), class_count));
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        let (width, classes) = self.fitted.ok_or(Error::NotFitted)?;
        super::check_width(width, features)?;
        let out = self.client().predict_proba(features)?;
        if out.nrows() != features.nrows() || out.ncols() != classes {
            return Err(Error::ShapeMismatch(format!(
                "worker returned {:?}, expected ({}, {classes})",
                out.dim(),
                features.nrows()
            )));
        }
        ProbabilityMatrix::new(out)
    }
}

/// Worker-side model contract used by [`serve_worker`].
pub trait WorkerAdapter {
    fn name(&self) -> String;
    fn fit(&mut self, x: Vec<Vec<f64>>, y: Vec<usize>, seed: u64) -> std::result::Result<(), String>;
    fn predict_proba(&mut self, x: Vec<Vec<f64>>) -> std::result::Result<Vec<Vec<f64>>, String>;
}

/// Runs the worker request loop until `shutdown` or end of input. Malformed
/// requests get an error response and the loop continues.
pub fn serve_worker(adapter: &mut dyn WorkerAdapter, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, stop) = match handle(adapter, &line) {
            Ok((v, stop)) => (v, stop),
            Err(e) => (json!({"ok": false, "error": e}), false),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}

fn matrix_arg(req: &Value) -> std::result::Result<Vec<Vec<f64>>, String> {
    serde_json::from_value(req.get("X").cloned().ok_or("missing X")?).map_err(|e| e.to_string())
}

fn handle(adapter: &mut dyn WorkerAdapter, line: &str) -> std::result::Result<(Value, bool), String> {
    let req: Value = serde_json::from_str(line).map_err(|e| format!("malformed request: {e}"))?;
    match req.get("op").and_then(Value::as_str) {
        Some("handshake") => Ok((json!({"ok": true, "model": adapter.name(), "classes": null}), false)),
        Some("fit") => {
            let y: Vec<usize> = serde_json::from_value(req.get("y").cloned().ok_or("missing y")?).map_err(|e| e.to_string())?;
            let seed = req.get("seed").and_then(Value::as_u64).unwrap_or(0);
            let start = std::time::Instant::now();
            adapter.fit(matrix_arg(&req)?, y, seed)?;
            Ok((json!({"ok": true, "fit_seconds": start.elapsed().as_secs_f64()}), false))
        }
        Some("predict_proba") => {
            let proba = adapter.predict_proba(matrix_arg(&req)?)?;
            Ok((json!({"ok": true, "proba": proba}), false))
        }
        Some("shutdown") => Ok((json!({"ok": true}), true)),
        other => Err(format!("unknown op {other:?}")),
    }
}
