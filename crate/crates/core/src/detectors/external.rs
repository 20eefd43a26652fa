//! Line protocol, version 1. For each chunk the adapter writes one line: the
//! chunk's tokens separated by tabs, with the literal token `[SEP]` between
//! turns. The process answers with one line of space-separated labels, one
//! per real token: `0` keeps, `1` removes without a category, and
//! `A R T I O` remove with that category code.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{Detector, DetectorError, DetectorInput, DetectorSpec, Labels};
use crate::model::Category;
use crate::par::Executor;

pub const PROTOCOL_VERSION: u32 = 1;

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Parses one reply line for `input`.
pub fn parse_reply(input: &DetectorInput, line: &str) -> Result<Labels, DetectorError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let labels: Labels = line
        .split(' ')
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "0" => Ok(None),
            "1" => Ok(Some(Category::Others)),
            _ => {
                let mut chars = s.chars();
                match (chars.next().and_then(Category::from_code), chars.next()) {
                    (Some(c), None) => Ok(Some(c)),
                    _ => Err(DetectorError::MalformedLabel {
                        chunk_id: input.chunk_id.clone(),
                        label: s.to_string(),
                    }),
                }
            }
        })
        .collect::<Result<_, _>>()?;
    if labels.len() != input.len() {
        return Err(DetectorError::LengthMismatch {
            chunk_id: input.chunk_id.clone(),
            expected: input.len(),
            got: labels.len(),
        });
    }
    Ok(labels)
}

/// Runs a shell command that speaks the line protocol. Each batch partition
/// gets its own process; requests within a process are answered in order.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    spec: DetectorSpec,
    command: String,
    timeout: Duration,
}

impl ExternalDetector {
    pub fn new(spec: DetectorSpec, command: String) -> Self {
        Self {
            spec,
            command,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Longest wait for any single reply line.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn spawn(&self) -> Result<Child, DetectorError> {
        Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| DetectorError::Spawn {
                command: self.command.clone(),
                message: e.to_string(),
            })
    }

    fn run(&self, inputs: &[DetectorInput]) -> Result<Vec<Labels>, DetectorError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        for i in inputs {
            i.check_cost(self.spec.max_seq)?;
        }
        let mut child = self.spawn()?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let requests: Vec<String> = inputs.iter().map(|i| i.request_line() + "\n").collect();
        // A child that exits early closes the pipe; the reader reports it.
        let writer = thread::spawn(move || {
            for r in requests {
                if stdin.write_all(r.as_bytes()).is_err() {
                    break;
                }
            }
            let _ = stdin.flush();
        });

        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let ok = line.is_ok();
                if tx.send(line).is_err() || !ok {
                    break;
                }
            }
        });

        let mut out = Vec::with_capacity(inputs.len());
        let fail = |child: &mut Child, err: DetectorError| {
            let _ = child.kill();
            let _ = child.wait();
            err
        };
        for input in inputs {
            match rx.recv_timeout(self.timeout) {
                Ok(Ok(line)) => match parse_reply(input, &line) {
                    Ok(labels) => out.push(labels),
                    Err(e) => return Err(fail(&mut child, e)),
                },
                Ok(Err(e)) => {
                    let err = DetectorError::Crash {
                        chunk_id: input.chunk_id.clone(),
                        status: format!("unreadable reply: {e}"),
                        stderr: String::new(),
                    };
                    return Err(fail(&mut child, err));
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    let err = DetectorError::Timeout {
                        chunk_id: input.chunk_id.clone(),
                        seconds: self.timeout.as_secs_f64(),
                    };
                    return Err(fail(&mut child, err));
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    let status = wait_until(&mut child, Instant::now() + self.timeout);
                    let _ = writer.join();
                    return Err(DetectorError::Crash {
                        chunk_id: input.chunk_id.clone(),
                        status: describe(status, "exited before replying"),
                        stderr: err_reader.join().unwrap_or_default(),
                    });
                }
            }
        }
        let _ = writer.join();
        let status = wait_until(&mut child, Instant::now() + self.timeout);
        match status {
            Some(s) if s.success() => Ok(out),
            other => Err(DetectorError::Crash {
                chunk_id: inputs.last().expect("non-empty").chunk_id.clone(),
                status: describe(other, "did not exit after the last reply"),
                stderr: err_reader.join().unwrap_or_default(),
            }),
        }
    }
}

/// Waits for the child until `deadline`, killing it afterwards.
fn wait_until(child: &mut Child, deadline: Instant) -> Option<ExitStatus> {
    loop {
        match child.try_wait() {
            Ok(Some(s)) => return Some(s),
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
            _ => {
                let _ = child.kill();
                let _ = child.wait();
                return None;
            }
        }
    }
}

fn describe(status: Option<ExitStatus>, fallback: &str) -> String {
    match status {
        Some(s) => s.to_string(),
        None => fallback.to_string(),
    }
}

impl Detector for ExternalDetector {
    fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    fn detect(&self, input: &DetectorInput) -> Result<Labels, DetectorError> {
        Ok(self.run(std::slice::from_ref(input))?.remove(0))
    }

    /// Splits the batch into one contiguous partition per job and runs one
    /// process per partition.
    fn detect_batch(
        &self,
        inputs: &[DetectorInput],
        exec: &Executor,
    ) -> Result<Vec<Labels>, DetectorError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let size = inputs.len().div_ceil(exec.jobs().max(1));
        let parts: Vec<&[DetectorInput]> = inputs.chunks(size).collect();
        let results = exec.try_map(&parts, |p| self.run(p))?;
        Ok(results.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::tests::conv;
    use crate::detectors::{DetectorKind, Scope};

    fn external(cmd: &str) -> ExternalDetector {
        let spec = DetectorSpec::new(
            DetectorKind::External {
                command: cmd.into(),
                protocol: PROTOCOL_VERSION,
            },
            Scope::MultiTurn,
            64,
        );
        ExternalDetector::new(spec, cmd.into()).with_timeout(Duration::from_secs(10))
    }

    fn inputs() -> Vec<DetectorInput> {
        let c = conv(&[("A", "a b c"), ("B", "d")]);
        vec![
            DetectorInput::from_span("c_000", &c, 0..4, None),
            DetectorInput::from_span("c_001", &c, 1..3, None),
        ]
    }

    /// Replies with one `0` per token, skipping `[SEP]`.
    const ALL_KEEP: &str = r#"awk -F'\t' '{ s=""; for (i=1;i<=NF;i++) if ($i!="[SEP]") s = s (s==""?"":" ") "0"; print s; fflush() }'"#;

    #[test]
    fn negative_stub_keeps_everything() {
        let out = external(ALL_KEEP)
            .detect_batch(&inputs(), &Executor::sequential())
            .unwrap();
        assert_eq!(out, vec![vec![None; 4], vec![None; 2]]);
    }

    #[test]
    fn request_lines_reach_the_process() {
        // Marks every token whose text is "b" with R.
        let cmd = r#"awk -F'\t' '{ s=""; for (i=1;i<=NF;i++) if ($i!="[SEP]") s = s (s==""?"":" ") ($i=="b"?"R":"0"); print s; fflush() }'"#;
        let out = external(cmd)
            .detect_batch(&inputs(), &Executor::sequential())
            .unwrap();
        let r = Some(Category::RepetitionParaphrase);
        assert_eq!(out, vec![vec![None, r, None, None], vec![r, None]]);
    }

    #[test]
    fn wrong_length_is_a_protocol_error() {
        let err = external("while read l; do echo 0; done")
            .detect(&inputs()[0])
            .unwrap_err();
        assert_eq!(
            err,
            DetectorError::LengthMismatch {
                chunk_id: "c_000".into(),
                expected: 4,
                got: 1
            }
        );
    }

    #[test]
    fn crash_names_the_chunk() {
        let err = external("read l; echo boom >&2; exit 3")
            .detect(&inputs()[0])
            .unwrap_err();
        match err {
            DetectorError::Crash {
                chunk_id, stderr, ..
            } => {
                assert_eq!(chunk_id, "c_000");
                assert!(stderr.contains("boom"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonzero_exit_after_replies_fails() {
        let err = external("read l; echo 0 0 0 0; exit 1")
            .detect(&inputs()[0])
            .unwrap_err();
        assert!(matches!(err, DetectorError::Crash { .. }), "{err:?}");
    }

    #[test]
    fn silent_process_times_out() {
        let d = external("sleep 5").with_timeout(Duration::from_millis(200));
        let err = d.detect(&inputs()[1]).unwrap_err();
        assert!(
            matches!(err, DetectorError::Timeout { ref chunk_id, .. } if chunk_id == "c_001"),
            "{err:?}"
        );
    }

    #[test]
    fn malformed_labels() {
        let input = &inputs()[1];
        assert!(matches!(
            parse_reply(input, "0 X\n"),
            Err(DetectorError::MalformedLabel { .. })
        ));
        assert!(matches!(
            parse_reply(input, "0 AR\n"),
            Err(DetectorError::MalformedLabel { .. })
        ));
        assert_eq!(
            parse_reply(input, "1 O\n").unwrap(),
            vec![Some(Category::Others); 2]
        );
    }

    #[test]
    fn parallel_partitions_preserve_order() {
        let c = conv(&[("A", "a b c d e f g h")]);
        let many: Vec<_> = (0..8)
            .map(|i| DetectorInput::from_span(format!("c_{i:03}"), &c, i..i + 1, None))
            .collect();
        let cmd = r#"awk -F'\t' '{ print ($1=="c" || $1=="g") ? "T" : "0"; fflush() }'"#;
        let seq = external(cmd)
            .detect_batch(&many, &Executor::sequential())
            .unwrap();
        let par = external(cmd)
            .detect_batch(&many, &Executor::new(3))
            .unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[2], vec![Some(Category::ThinkAloud)]);
    }
}
