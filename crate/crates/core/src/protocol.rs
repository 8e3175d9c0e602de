//! Newline-delimited JSON protocol between the harness and an external
//! evaluator.
//!
//! Every message is one UTF-8 JSON object on its own line, tagged by `type`.
//! The harness opens with a handshake, the evaluator answers with its own,
//! and then each request is answered by exactly one response or error:
//!
//! ```text
//! > {"type":"handshake","protocol":1,"role":"harness"}
//! < {"type":"handshake","protocol":1,"role":"evaluator"}
//! > {"type":"request","study_id":"s","point":{"s_chunk":1,...},"pairs":[{"id":"a","original_path":"/abs/a.png","mask_path":"/abs/m/a.png"}]}
//! < {"type":"response","study_id":"s","point":{"s_chunk":1,...},"score":0.25}
//! < {"type":"error","code":"malformed","message":"..."}
//! ```
//!
//! The evaluator side of the loop is [`serve`]; the harness side is
//! [`EvaluatorClient`]. A subprocess is given as a shell command, a socket
//! as `tcp://host:port`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::{BatchScorer, MaskBatch};
use crate::mask::MaskBitmap;
use crate::oracle::{oracle_terms, OracleWeights};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Harness,
    Evaluator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePairRef {
    pub id: String,
    pub original_path: PathBuf,
    pub mask_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationRequest {
    pub study_id: String,
    pub point: Value,
    pub pairs: Vec<ImagePairRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDiagnostic {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationResponse {
    pub study_id: String,
    pub point: Value,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Vec<ImageDiagnostic>>,
}

/// Machine-readable error codes carried by `error` messages.
pub mod codes {
    pub const MALFORMED: &str = "malformed";
    pub const UNSUPPORTED_PROTOCOL: &str = "unsupported_protocol";
    pub const HANDSHAKE_REQUIRED: &str = "handshake_required";
    pub const UNEXPECTED_MESSAGE: &str = "unexpected_message";
    pub const EVALUATION_FAILED: &str = "evaluation_failed";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Handshake { protocol: u32, role: Role },
    Request(EvaluationRequest),
    Response(EvaluationResponse),
    Error { code: String, message: String },
}

impl Message {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    /// One line of output, without the trailing newline.
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| Error::Protocol(e.to_string()))
    }
}

fn write_message<W: Write + ?Sized>(out: &mut W, msg: &Message) -> Result<()> {
    let mut line = msg.to_line()?;
    line.push('\n');
    out.write_all(line.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Protocol(format!("write failed: {e}")))
}

fn read_message<R: BufRead + ?Sized>(input: &mut R) -> Result<Message> {
    let mut line = String::new();
    loop {
        line.clear();
        let n = input
            .read_line(&mut line)
            .map_err(|e| Error::Protocol(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(Error::Protocol("evaluator closed the connection".into()));
        }
        if !line.trim().is_empty() {
            return Message::from_line(&line);
        }
    }
}

/// Runs the evaluator side of the protocol until `input` is exhausted.
///
/// Malformed lines and failed evaluations are answered with an `error`
/// message and the loop continues.
pub fn serve<R, W, F>(input: R, mut output: W, mut handler: F) -> Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&EvaluationRequest) -> Result<EvaluationResponse>,
{
    let mut greeted = false;
    for line in input.lines() {
        let line = line.map_err(|e| Error::Protocol(format!("read failed: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::from_line(&line) {
            Err(e) => Message::error(codes::MALFORMED, e.to_string()),
            Ok(Message::Handshake { protocol, .. }) if protocol != PROTOCOL_VERSION => Message::error(
                codes::UNSUPPORTED_PROTOCOL,
                format!("protocol {protocol} not supported, expected {PROTOCOL_VERSION}"),
            ),
            Ok(Message::Handshake { .. }) => {
                greeted = true;
                Message::Handshake {
                    protocol: PROTOCOL_VERSION,
                    role: Role::Evaluator,
                }
            }
            Ok(Message::Request(_)) if !greeted => {
                Message::error(codes::HANDSHAKE_REQUIRED, "send a handshake first")
            }
            Ok(Message::Request(req)) => match handler(&req) {
                Ok(resp) if resp.score.is_finite() => Message::Response(resp),
                Ok(resp) => Message::error(codes::EVALUATION_FAILED, format!("non-finite score {}", resp.score)),
                Err(e) => Message::error(codes::EVALUATION_FAILED, e.to_string()),
            },
            Ok(other) => Message::error(
                codes::UNEXPECTED_MESSAGE,
                format!("evaluators only accept handshake and request, got {}", kind(&other)),
            ),
        };
        write_message(&mut output, &reply)?;
    }
    Ok(())
}

fn kind(m: &Message) -> &'static str {
    match m {
        Message::Handshake { .. } => "handshake",
        Message::Request(_) => "request",
        Message::Response(_) => "response",
        Message::Error { .. } => "error",
    }
}

/// Harness-side connection to an evaluator.
pub struct EvaluatorClient {
    reader: Box<dyn BufRead + Send>,
    writer: Option<Box<dyn Write + Send>>,
    child: Option<Child>,
}

impl EvaluatorClient {
    /// Handshakes over an arbitrary stream pair.
    pub fn from_streams(reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Result<Self> {
        let mut c = Self {
            reader,
            writer: Some(writer),
            child: None,
        };
        c.handshake()?;
        Ok(c)
    }

    /// Spawns `sh -c command` and talks to it over stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Evaluator(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut c = Self {
            reader: Box::new(BufReader::new(stdout)),
            writer: Some(Box::new(BufWriter::new(stdin))),
            child: Some(child),
        };
        c.handshake()?;
        Ok(c)
    }

    /// Connects to `host:port`.
    pub fn connect(address: &str) -> Result<Self> {
        let stream =
            TcpStream::connect(address).map_err(|e| Error::Evaluator(format!("cannot connect to {address}: {e}")))?;
        let read_half = stream
            .try_clone()
            .map_err(|e| Error::Evaluator(format!("socket {address}: {e}")))?;
        Self::from_streams(Box::new(BufReader::new(read_half)), Box::new(BufWriter::new(stream)))
    }

    /// `tcp://host:port` connects; anything else is run as a shell command.
    pub fn open(spec: &str) -> Result<Self> {
        match spec.strip_prefix("tcp://") {
            Some(addr) => Self::connect(addr),
            None => Self::spawn(spec),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<()> {
        let w = self
            .writer
            .as_mut()
            .ok_or_else(|| Error::Protocol("connection closed".into()))?;
        write_message(w, msg)
    }

    fn handshake(&mut self) -> Result<()> {
        self.send(&Message::Handshake {
            protocol: PROTOCOL_VERSION,
            role: Role::Harness,
        })?;
        match read_message(&mut self.reader)? {
            Message::Handshake {
                protocol: PROTOCOL_VERSION,
                role: Role::Evaluator,
            } => Ok(()),
            Message::Error { code, message } => Err(Error::Protocol(format!("handshake rejected ({code}): {message}"))),
            other => Err(Error::Protocol(format!("unexpected handshake reply: {}", other.to_line()?))),
        }
    }

    /// Sends one request and validates the reply against it.
    pub fn evaluate(&mut self, request: &EvaluationRequest) -> Result<EvaluationResponse> {
        self.send(&Message::Request(request.clone()))?;
        match read_message(&mut self.reader)? {
            Message::Response(resp) => {
                if resp.study_id != request.study_id {
                    return Err(Error::Protocol(format!(
                        "response for study `{}` but request was for `{}`",
                        resp.study_id, request.study_id
                    )));
                }
                if resp.point != request.point {
                    return Err(Error::Protocol(format!(
                        "response point {} does not match request point {}",
                        resp.point, request.point
                    )));
                }
                if !resp.score.is_finite() {
                    return Err(Error::Protocol(format!("non-finite score {}", resp.score)));
                }
                Ok(resp)
            }
            Message::Error { code, message } => Err(Error::Evaluator(format!("{code}: {message}"))),
            other => Err(Error::Protocol(format!("expected a response, got {}", kind(&other)))),
        }
    }
}

impl Drop for EvaluatorClient {
    fn drop(&mut self) {
        // closing stdin asks the evaluator to exit
        self.writer = None;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                match child.try_wait() {
                    Ok(Some(_)) | Err(_) => return,
                    Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                }
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// [`BatchScorer`] that writes masks to disk and asks an external evaluator.
///
/// Masks for the n-th call go to `<out>/masks/eval-NNNN/<id>.png`. Originals
/// whose on-disk size differs from the working resolution are written once
/// to `<out>/originals/<id>.png` so the evaluator sees the same pixels.
pub struct ProtocolScorer {
    client: EvaluatorClient,
    study_id: String,
    out_dir: PathBuf,
    next_eval: usize,
    originals: HashMap<String, PathBuf>,
}

impl ProtocolScorer {
    pub fn new(client: EvaluatorClient, study_id: impl Into<String>, out_dir: impl AsRef<Path>, first_eval: usize) -> Result<Self> {
        let out_dir = out_dir.as_ref();
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let out_dir = std::fs::canonicalize(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(Self {
            client,
            study_id: study_id.into(),
            out_dir,
            next_eval: first_eval,
            originals: HashMap::new(),
        })
    }

    fn original_for(&mut self, id: &str, on_disk: &Path, matches: bool, pixels: &RgbImage) -> Result<PathBuf> {
        if matches {
            return Ok(on_disk.to_path_buf());
        }
        if let Some(p) = self.originals.get(id) {
            return Ok(p.clone());
        }
        let dir = self.out_dir.join("originals");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("{id}.png"));
        pixels.save(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        self.originals.insert(id.to_string(), path.clone());
        Ok(path)
    }
}

impl BatchScorer for ProtocolScorer {
    fn score_batch(&mut self, batch: &MaskBatch<'_>) -> Result<f64> {
        let dir = self.out_dir.join("masks").join(format!("eval-{:04}", self.next_eval));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        self.next_eval += 1;
        let mut pairs = Vec::with_capacity(batch.items.len());
        for (item, mask) in batch.items.iter().zip(batch.masks) {
            let mask_path = dir.join(format!("{}.png", item.id));
            mask.save(&mask_path)?;
            let original_path =
                self.original_for(&item.id, &item.original_path, item.original_on_disk_matches(), &item.original)?;
            pairs.push(ImagePairRef {
                id: item.id.clone(),
                original_path,
                mask_path,
            });
        }
        let request = EvaluationRequest {
            study_id: self.study_id.clone(),
            point: batch.model.space().point_to_json(batch.point),
            pairs,
        };
        Ok(self.client.evaluate(&request)?.score)
    }
}

/// Evaluator that scores masks read from disk with the synthetic oracle.
#[derive(Debug, Clone)]
pub struct OracleService {
    truths: HashMap<String, MaskBitmap>,
    weights: OracleWeights,
}

impl OracleService {
    pub fn new(truths: HashMap<String, MaskBitmap>, weights: OracleWeights) -> Self {
        Self { truths, weights }
    }

    pub fn handle(&self, request: &EvaluationRequest) -> Result<EvaluationResponse> {
        if request.pairs.is_empty() {
            return Err(Error::invalid("request has no image pairs"));
        }
        let mut diagnostics = Vec::with_capacity(request.pairs.len());
        for pair in &request.pairs {
            let truth = self
                .truths
                .get(&pair.id)
                .ok_or_else(|| Error::invalid(format!("unknown image id `{}`", pair.id)))?;
            let mask = MaskBitmap::load(&pair.mask_path)?;
            let score = oracle_terms(truth, &mask, self.weights.component_cap)?.weighted(&self.weights);
            diagnostics.push(ImageDiagnostic {
                id: pair.id.clone(),
                score,
            });
        }
        let score = diagnostics.iter().map(|d| d.score).sum::<f64>() / diagnostics.len() as f64;
        Ok(EvaluationResponse {
            study_id: request.study_id.clone(),
            point: request.point.clone(),
            score,
            diagnostics: Some(diagnostics),
        })
    }
}
