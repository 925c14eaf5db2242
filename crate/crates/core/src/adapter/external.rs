use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::protocol::{decode_result, Message, PROTOCOL_VERSION};
use super::{Adapter, AdapterError, Prediction};
use crate::testgen::TestCaseDescriptor;

const STDERR_CAP: usize = 64 * 1024;

/// A model process driven over stdin/stdout. Requests are strictly
/// sequential; a request that times out is abandoned and its late reply,
/// if one ever arrives, is discarded.
pub struct ExternalAdapter {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    stderr_reader: Option<JoinHandle<()>>,
    model: String,
    timeout: Duration,
    abandoned: HashSet<String>,
}

impl ExternalAdapter {
    pub fn spawn(
        command: &[String],
        working_dir: Option<&Path>,
        timeout_ms: u64,
    ) -> Result<Self, AdapterError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| AdapterError::Config("external command is empty".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(dir) = working_dir {
            cmd.current_dir(dir);
        }
        let mut child = cmd.spawn().map_err(|source| AdapterError::Launch {
            command: command.join(" "),
            source,
        })?;

        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let mut err_pipe = child.stderr.take().expect("stderr piped");
        let stderr_reader = std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                if s.len() < STDERR_CAP {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });

        let mut adapter = Self {
            stdin: child.stdin.take(),
            child,
            lines,
            stderr,
            stderr_reader: Some(stderr_reader),
            model: String::new(),
            timeout: Duration::from_millis(timeout_ms),
            abandoned: HashSet::new(),
        };
        adapter.handshake()?;
        Ok(adapter)
    }

    fn handshake(&mut self) -> Result<(), AdapterError> {
        self.send(&Message::hello())?;
        let deadline = Instant::now() + self.timeout;
        let line = match self.next_line(deadline)? {
            Some(line) => line,
            None => {
                return Err(AdapterError::HandshakeTimeout {
                    timeout_ms: self.timeout.as_millis() as u64,
                    diagnostics: self.diagnostics(),
                })
            }
        };
        match Message::parse(&line).map_err(|e| self.with_diagnostics(e))? {
            Message::Hello { version, model } if version == PROTOCOL_VERSION => {
                self.model = model.unwrap_or_else(|| "external".into());
                Ok(())
            }
            Message::Hello { version, .. } => Err(AdapterError::VersionMismatch {
                expected: PROTOCOL_VERSION,
                found: version,
                diagnostics: self.diagnostics(),
            }),
            other => Err(AdapterError::Protocol {
                message: format!("expected hello, got {other:?}"),
                diagnostics: self.diagnostics(),
            }),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<(), AdapterError> {
        let stdin = self.stdin.as_mut().expect("stdin open while adapter lives");
        let res = stdin
            .write_all(msg.to_line().as_bytes())
            .and_then(|_| stdin.flush());
        res.map_err(|_| AdapterError::Exited {
            diagnostics: self.diagnostics(),
        })
    }

    /// Next stdout line, `None` on timeout.
    fn next_line(&mut self, deadline: Instant) -> Result<Option<String>, AdapterError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => Ok(Some(line)),
            Ok(Err(e)) => Err(AdapterError::Protocol {
                message: format!("unreadable output: {e}"),
                diagnostics: self.diagnostics(),
            }),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(AdapterError::Exited {
                diagnostics: self.diagnostics(),
            }),
        }
    }

    /// Stderr collected so far. If the child has exited, waits briefly for
    /// the reader to drain the pipe.
    fn diagnostics(&mut self) -> String {
        if matches!(self.child.try_wait(), Ok(Some(_))) {
            if let Some(h) = self.stderr_reader.take() {
                let until = Instant::now() + Duration::from_millis(500);
                while !h.is_finished() && Instant::now() < until {
                    std::thread::sleep(Duration::from_millis(5));
                }
            }
        }
        self.stderr.lock().unwrap().clone()
    }

    fn with_diagnostics(&mut self, err: AdapterError) -> AdapterError {
        match err {
            AdapterError::Protocol { message, .. } => AdapterError::Protocol {
                message,
                diagnostics: self.diagnostics(),
            },
            other => other,
        }
    }
}

impl Adapter for ExternalAdapter {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn predict(
        &mut self,
        case: &TestCaseDescriptor,
        image: &Path,
    ) -> Result<Prediction, AdapterError> {
        self.send(&Message::predict(&case.id, image))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let Some(line) = self.next_line(deadline)? else {
                self.abandoned.insert(case.id.clone());
                return Err(AdapterError::Timeout {
                    id: case.id.clone(),
                    timeout_ms: self.timeout.as_millis() as u64,
                });
            };
            let msg = Message::parse(&line).map_err(|e| self.with_diagnostics(e))?;
            let Message::Result {
                id,
                detected,
                bbox,
                keypoints,
                confidence,
            } = msg
            else {
                return Err(AdapterError::Protocol {
                    message: format!("expected result for `{}`, got {msg:?}", case.id),
                    diagnostics: self.diagnostics(),
                });
            };
            if id != case.id {
                if self.abandoned.remove(&id) {
                    continue;
                }
                return Err(AdapterError::Protocol {
                    message: format!("expected result for `{}`, got `{id}`", case.id),
                    diagnostics: self.diagnostics(),
                });
            }
            return decode_result(&id, detected, bbox, keypoints, confidence).map_err(|message| {
                AdapterError::Protocol {
                    message,
                    diagnostics: self.diagnostics(),
                }
            });
        }
    }
}

impl Drop for ExternalAdapter {
    fn drop(&mut self) {
        // closing stdin is the shutdown signal
        self.stdin.take();
        let until = Instant::now() + Duration::from_millis(200);
        while Instant::now() < until {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
