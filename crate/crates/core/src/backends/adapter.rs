//! External inference adapter: drives a model process over line-delimited
//! JSON on its standard streams, with rasters exchanged as PNG files in a
//! shared scratch directory.
//!
//! Requests:
//! `{"op": "instances"|"segment"|"markers", "image": "<path>", "patch_size": [w, h]?}`
//!
//! Responses:
//! `{"ok": true, "instances": [{"mask": "<path>", "box": [x0, y0, x1, y1], "score": s}]}`,
//! `{"ok": true, "mask": "<path>"}`,
//! `{"ok": true, "markers": [{"obb": {"cx", "cy", "w", "h", "angle"}, "class": "Ruler"|"Sign", "score": s}]}`,
//! or `{"ok": false, "error": "..."}`.
//!
//! One request is in flight per adapter process; every response is
//! validated against the interface invariants before it is returned.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    ImageHandle, InstancePrediction, InstanceSegmenter, MarkerDetector, OrientedDetection,
    PatchQuery, PatchSegmenter,
};
use crate::annot::MarkerClass;
use crate::error::{Error, Result};
use crate::geometry::{AxisAlignedBox, BinaryMask, OrientedBox, SemanticMask};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// How to launch and talk to an adapter process.
#[derive(Debug, Clone)]
pub struct AdapterConfig {
    /// argv of the adapter executable.
    pub command: Vec<String>,
    /// Per-request deadline.
    pub timeout: Duration,
    /// Directory for patch PNGs written by us and mask PNGs written by
    /// the adapter. Relative mask paths in responses resolve against it.
    pub scratch_dir: PathBuf,
}

impl AdapterConfig {
    pub fn new(command: Vec<String>, scratch_dir: PathBuf) -> AdapterConfig {
        AdapterConfig {
            command,
            timeout: DEFAULT_TIMEOUT,
            scratch_dir,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    op: &'a str,
    image: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    patch_size: Option<[u32; 2]>,
}

#[derive(Deserialize)]
struct Response {
    ok: bool,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    instances: Option<Vec<WireInstance>>,
    #[serde(default)]
    mask: Option<String>,
    #[serde(default)]
    markers: Option<Vec<WireMarker>>,
}

#[derive(Deserialize)]
struct WireInstance {
    mask: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    score: f64,
}

#[derive(Deserialize)]
struct WireObb {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: f64,
}

#[derive(Deserialize)]
struct WireMarker {
    obb: WireObb,
    class: String,
    score: f64,
}

/// A running adapter process implementing all three backend interfaces.
pub struct ExternalBackend {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    config: AdapterConfig,
    patch_counter: u64,
}

impl ExternalBackend {
    pub fn spawn(config: AdapterConfig) -> Result<ExternalBackend> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| Error::Validation("empty adapter command".into()))?;
        std::fs::create_dir_all(&config.scratch_dir)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (sender, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if sender.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalBackend {
            child,
            stdin,
            lines,
            config,
            patch_counter: 0,
        })
    }

    fn request(&mut self, request: &Request<'_>) -> Result<(Response, String)> {
        let mut line = serde_json::to_string(request).expect("request always serializes");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|()| self.stdin.flush())
            .map_err(|e| self.exit_error(format!("adapter stdin closed: {e}")))?;

        let answer = match self.lines.recv_timeout(self.config.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Protocol(format!("failed reading adapter stdout: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(self.config.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.exit_error("adapter closed its stdout".into()))
            }
        };
        let response: Response = serde_json::from_str(&answer)
            .map_err(|e| Error::Protocol(format!("unparsable response ({e}): {}", excerpt(&answer))))?;
        if !response.ok {
            return Err(Error::Protocol(format!(
                "adapter reported an error: {}",
                response.error.unwrap_or_else(|| "unspecified".into())
            )));
        }
        Ok((response, answer))
    }

    fn exit_error(&mut self, fallback: String) -> Error {
        // the pipe can report EOF a moment before the child is reapable
        for _ in 0..20 {
            match self.child.try_wait() {
                Ok(Some(status)) if !status.success() => {
                    return Error::Protocol(format!("adapter exited with {status}"));
                }
                Ok(Some(_)) => break,
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(_) => break,
            }
        }
        Error::Protocol(fallback)
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let candidate = Path::new(path);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            self.config.scratch_dir.join(candidate)
        }
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn excerpt(line: &str) -> String {
    const LIMIT: usize = 200;
    if line.len() <= LIMIT {
        line.to_string()
    } else {
        format!("{}...", &line[..LIMIT])
    }
}

impl InstanceSegmenter for ExternalBackend {
    fn instances(&mut self, image: &ImageHandle) -> Result<Vec<InstancePrediction>> {
        let request = Request {
            op: "instances",
            image: &image.path.to_string_lossy(),
            patch_size: None,
        };
        let (response, raw) = self.request(&request)?;
        let wire = response.instances.ok_or_else(|| {
            Error::Protocol(format!("missing `instances` field: {}", excerpt(&raw)))
        })?;
        let mut predictions = Vec::with_capacity(wire.len());
        for item in wire {
            let mask = BinaryMask::read_png(&self.resolve(&item.mask))
                .map_err(|e| Error::Protocol(format!("unreadable instance mask: {e}")))?;
            let [x0, y0, x1, y1] = item.bbox;
            let bbox = AxisAlignedBox::new(x0, y0, x1, y1)
                .map_err(|e| Error::Protocol(format!("invalid box: {e}; response: {}", excerpt(&raw))))?;
            predictions.push(InstancePrediction {
                mask,
                bbox,
                score: item.score,
            });
        }
        super::validate_instances(&predictions, image)
            .map_err(|e| Error::Protocol(format!("{e}; response: {}", excerpt(&raw))))?;
        Ok(predictions)
    }
}

impl PatchSegmenter for ExternalBackend {
    fn segment_patch(&mut self, query: &PatchQuery<'_>) -> Result<SemanticMask> {
        self.patch_counter += 1;
        let patch_path = self.config.scratch_dir.join(format!(
            "patch_{}_{:06}.png",
            query.image.image_id, self.patch_counter
        ));
        query.raster.write_png(&patch_path)?;
        let request = Request {
            op: "segment",
            image: &patch_path.to_string_lossy(),
            patch_size: Some([query.transform.target_w, query.transform.target_h]),
        };
        let (response, raw) = self.request(&request)?;
        let mask_path = response
            .mask
            .ok_or_else(|| Error::Protocol(format!("missing `mask` field: {}", excerpt(&raw))))?;
        let mask = SemanticMask::read_png(&self.resolve(&mask_path))
            .map_err(|e| Error::Protocol(format!("unreadable patch mask: {e}")))?;
        super::validate_patch_mask(&mask, query.transform)
            .map_err(|e| Error::Protocol(format!("{e}; response: {}", excerpt(&raw))))?;
        Ok(mask)
    }
}

impl MarkerDetector for ExternalBackend {
    fn markers(&mut self, image: &ImageHandle) -> Result<Vec<OrientedDetection>> {
        let request = Request {
            op: "markers",
            image: &image.path.to_string_lossy(),
            patch_size: None,
        };
        let (response, raw) = self.request(&request)?;
        let wire = response
            .markers
            .ok_or_else(|| Error::Protocol(format!("missing `markers` field: {}", excerpt(&raw))))?;
        let mut detections = Vec::with_capacity(wire.len());
        for item in wire {
            let class = MarkerClass::from_name(&item.class).ok_or_else(|| {
                Error::Protocol(format!(
                    "unknown marker class `{}`: {}",
                    item.class,
                    excerpt(&raw)
                ))
            })?;
            let obb = OrientedBox::new([item.obb.cx, item.obb.cy], item.obb.w, item.obb.h, item.obb.angle)
                .map_err(|e| Error::Protocol(format!("invalid obb: {e}; response: {}", excerpt(&raw))))?;
            detections.push(OrientedDetection {
                obb,
                class,
                score: item.score,
            });
        }
        super::validate_markers(&detections)
            .map_err(|e| Error::Protocol(format!("{e}; response: {}", excerpt(&raw))))?;
        Ok(detections)
    }
}
