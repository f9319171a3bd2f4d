//! External base-layer codec hook.
//!
//! The template is run through `sh -c` after substituting `{in}` with the
//! path of the Y4M base layer and `{out}` with the path where the command
//! must leave its decoded Y4M reconstruction.

use std::fs;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use grainmodel::video_io::{read_y4m, write_y4m};
use grainmodel::VideoSequence;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderHook {
    command_template: String,
    timeout: Duration,
}

impl EncoderHook {
    pub fn new(command_template: &str, timeout: Duration) -> Result<Self> {
        for placeholder in ["{in}", "{out}"] {
            let n = command_template.matches(placeholder).count();
            if n != 1 {
                bail!("encoder command must contain {placeholder} exactly once (found {n}): {command_template:?}");
            }
        }
        if timeout.is_zero() {
            bail!("encoder timeout must be positive");
        }
        Ok(Self { command_template: command_template.to_string(), timeout })
    }

    pub fn render(&self, input: &Path, output: &Path) -> String {
        self.command_template
            .replace("{in}", &shell_quote(&input.to_string_lossy()))
            .replace("{out}", &shell_quote(&output.to_string_lossy()))
    }

    /// Encodes and decodes `base` through the external command.
    pub fn run(&self, base: &VideoSequence) -> Result<VideoSequence> {
        let dir = tempfile::tempdir().context("creating hook scratch directory")?;
        let input = dir.path().join("base.y4m");
        let output = dir.path().join("decoded.y4m");
        write_y4m(fs::File::create(&input)?, base).context("writing base layer for the encoder hook")?;

        let command = self.render(&input, &output);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .with_context(|| format!("spawning encoder hook `{command}`"))?;

        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let start = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_millis(10));
        };
        // Grandchildren of a killed shell may still hold the pipes open, so
        // the readers are only joined after a normal exit.
        let Some(status) = status else {
            bail!("encoder hook timed out after {:?}: `{command}`", self.timeout);
        };
        let out = out_reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        let diagnostics = format!("--- stdout ---\n{}\n--- stderr ---\n{}", out.trim_end(), err.trim_end());
        if !status.success() {
            bail!("encoder hook failed with {status}: `{command}`\n{diagnostics}");
        }
        let file = fs::File::open(&output)
            .map_err(|e| anyhow!("encoder hook produced no output at {}: {e}\n{diagnostics}", output.display()))?;
        let decoded = read_y4m(file).context("parsing encoder hook output")?;
        if !decoded.same_geometry(base) || decoded.len() != base.len() {
            bail!(
                "encoder hook output is {}x{} {:?} with {} frames, expected {}x{} {:?} with {}",
                decoded.width(),
                decoded.height(),
                decoded.layout(),
                decoded.len(),
                base.width(),
                base.height(),
                base.layout(),
                base.len()
            );
        }
        Ok(decoded)
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}
