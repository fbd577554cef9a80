//! Mask providers: anything that turns an image plus point prompts into
//! scored masks. [`SubprocessProvider`] speaks the JSON-lines protocol:
//!
//! ```text
//! -> {"id": 3, "image": "/tmp/x/request-3.png", "points": [[10, 4]], "scale": "patch"}
//! <- {"id": 3, "masks": [{"path": "/tmp/x/m.png", "score": 0.93}]}
//! <- {"id": 3, "error": "..."}
//! ```
//!
//! Images and masks are 8-bit grayscale PNGs; masks are 0/255 and have the
//! request image's dimensions.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, GrayImage};
use crate::io::{read_mask_png, write_gray_png};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Patch,
}

#[derive(Clone, Copy, Debug)]
pub struct MaskRequest<'a> {
    pub id: u64,
    pub image: &'a GrayImage,
    pub points: &'a [(usize, usize)],
    pub scale: Scale,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredMask {
    pub mask: BinaryMask,
    pub score: f64,
}

pub trait MaskProvider {
    fn name(&self) -> &str;

    /// At least one mask with the request image's dimensions.
    fn request(&mut self, req: &MaskRequest<'_>) -> Result<Vec<ScoredMask>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub id: u64,
    pub image: PathBuf,
    pub points: Vec<[usize; 2]>,
    pub scale: Scale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderMask {
    pub path: PathBuf,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub id: u64,
    #[serde(default)]
    pub masks: Vec<ProviderMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// In-process provider backed by a closure.
pub struct FnProvider<F> {
    name: String,
    f: F,
}

impl<F> FnProvider<F>
where
    F: FnMut(&MaskRequest<'_>) -> Result<Vec<ScoredMask>>,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> MaskProvider for FnProvider<F>
where
    F: FnMut(&MaskRequest<'_>) -> Result<Vec<ScoredMask>>,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn request(&mut self, req: &MaskRequest<'_>) -> Result<Vec<ScoredMask>> {
        (self.f)(req)
    }
}

/// A provider process started with `sh -c <command>`.
pub struct SubprocessProvider {
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    workdir: tempfile::TempDir,
    timeout: Duration,
}

impl SubprocessProvider {
    pub fn spawn(name: impl Into<String>, command: &str, timeout: Duration) -> Result<Self> {
        let name = name.into();
        let fail = |message: String| Error::Provider {
            provider: name.clone(),
            request_id: 0,
            message,
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(format!("cannot spawn `{command}`: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let workdir = tempfile::Builder::new()
            .prefix("metalseg-provider-")
            .tempdir()
            .map_err(|e| fail(format!("cannot create work directory: {e}")))?;
        Ok(Self {
            name,
            child,
            stdin,
            lines,
            workdir,
            timeout,
        })
    }

    fn fail(&self, id: u64, message: impl Into<String>) -> Error {
        Error::Provider {
            provider: self.name.clone(),
            request_id: id,
            message: message.into(),
        }
    }

    fn send(&mut self, id: u64, line: &str) -> Result<()> {
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::Provider {
            provider: self.name.clone(),
            request_id: id,
            message: "stdin closed".into(),
        })?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|()| stdin.write_all(b"\n"))
            .and_then(|()| stdin.flush())
            .map_err(|e| self.fail(id, format!("cannot write request: {e}")))
    }

    fn receive(&mut self, id: u64) -> Result<ProviderResponse> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(self.fail(id, format!("cannot read response: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    let _ = self.child.kill();
                    return Err(self.fail(id, format!("timed out after {:?}", self.timeout)));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(self.fail(id, "provider exited without responding"));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return serde_json::from_str(&line)
                .map_err(|e| self.fail(id, format!("malformed response {line:?}: {e}")));
        }
    }
}

impl MaskProvider for SubprocessProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn request(&mut self, req: &MaskRequest<'_>) -> Result<Vec<ScoredMask>> {
        let id = req.id;
        let image = self.workdir.path().join(format!("request-{id}.png"));
        write_gray_png(&image, req.image)?;
        let wire = ProviderRequest {
            id,
            image,
            points: req.points.iter().map(|&(x, y)| [x, y]).collect(),
            scale: req.scale,
        };
        self.send(id, &serde_json::to_string(&wire)?)?;
        let resp = self.receive(id)?;
        if resp.id != id {
            return Err(self.fail(id, format!("response id {} does not match", resp.id)));
        }
        if let Some(e) = resp.error {
            return Err(self.fail(id, format!("provider error: {e}")));
        }
        if resp.masks.is_empty() {
            return Err(self.fail(id, "response contains no masks"));
        }
        resp.masks
            .iter()
            .map(|m| {
                if !m.score.is_finite() {
                    return Err(self.fail(id, format!("non-finite score {}", m.score)));
                }
                let mask = read_mask_png(&m.path)
                    .map_err(|e| self.fail(id, format!("cannot read mask {}: {e}", m.path.display())))?;
                if mask.dims() != req.image.dims() {
                    return Err(self.fail(
                        id,
                        format!(
                            "mask {} is {:?}, request image is {:?}",
                            m.path.display(),
                            mask.dims(),
                            req.image.dims()
                        ),
                    ));
                }
                Ok(ScoredMask { mask, score: m.score })
            })
            .collect()
    }
}

impl Drop for SubprocessProvider {
    fn drop(&mut self) {
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// The highest-scoring mask; the first one wins ties.
pub(crate) fn best_mask(masks: Vec<ScoredMask>) -> Option<ScoredMask> {
    masks.into_iter().reduce(|best, m| if m.score > best.score { m } else { best })
}
