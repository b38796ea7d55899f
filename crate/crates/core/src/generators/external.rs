use std::collections::HashMap;
use std::io::{ErrorKind, Write};
use std::process::{Command, Stdio};

use super::{GenerateError, Generator, GeneratorRequest, PatchResult};
use crate::tokenizer::{detokenize, serialize_fim, FimSequence, Token};
use crate::{FaceSet, Point};

/// Runs a shell command as the generator.
///
/// The command receives one JSON line on stdin: the context-only sequence
/// (`S_ctx context E_ctx eos`). It must print one JSON line whose target
/// segment holds the generated faces. Its context segment is ignored.
/// Generated vertices whose tokens equal a context vertex's tokens are placed
/// exactly on that vertex, seam vertices first.
#[derive(Clone, Debug)]
pub struct ExternalGenerator {
    pub command: String,
}

impl ExternalGenerator {
    pub fn new(command: impl Into<String>) -> ExternalGenerator {
        ExternalGenerator { command: command.into() }
    }

    fn exchange(&self, prompt: &str) -> Result<String, GenerateError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        match stdin.write_all(prompt.as_bytes()).and_then(|_| stdin.write_all(b"\n")) {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        }
        drop(stdin);
        let out = child.wait_with_output()?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(GenerateError::External(format!("`{}` exited with {}: {}", self.command, out.status, stderr.trim())));
        }
        String::from_utf8(out.stdout).map_err(|_| GenerateError::External("stdout is not UTF-8".into()))
    }
}

impl Generator for ExternalGenerator {
    fn id(&self) -> String {
        format!("external:{}", self.command)
    }

    fn generate(&self, req: &GeneratorRequest) -> Result<PatchResult, GenerateError> {
        let mesh = req.mesh;
        let region = req.region;
        let t = &req.token_transform;
        let local = t.apply_mesh(mesh);
        let prompt = serialize_fim(&local, &region.context, &FaceSet::new(), &region.boundary, &req.quantization)?;

        // token triple -> exact position, seam vertices winning ties
        let mut exact: HashMap<[Token; 3], Point> = HashMap::new();
        let context_vertices = mesh.vertices_of(&region.context);
        for pass in [true, false] {
            for &v in &context_vertices {
                if region.boundary.contains(&v) == pass {
                    let key = req.quantization.quantize_point(&local.vertices[v])?;
                    exact.entry(key).or_insert(mesh.vertices[v]);
                }
            }
        }

        let reply = self.exchange(&prompt.to_json_line())?;
        let line = reply
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| GenerateError::External("no output".into()))?;
        let seq = FimSequence::from_json_line(line)?;
        if seq.bins != req.quantization.bins {
            return Err(GenerateError::External(format!(
                "reply uses {} bins, expected {}",
                seq.bins, req.quantization.bins
            )));
        }
        let decoded = detokenize(&seq)?;
        let mut patch = decoded.mesh.submesh(&decoded.target);
        let used = decoded.mesh.vertices_of(&decoded.target);
        for (slot, &v) in used.iter().enumerate() {
            let tokens = decoded.vertex_tokens[v];
            patch.vertices[slot] = match exact.get(&tokens) {
                Some(p) => *p,
                None => t.invert(&decoded.mesh.vertices[v]),
            };
        }
        let mut result = PatchResult::new(patch, self.id());
        result.diagnostics.token_count = Some(seq.len());
        result.diagnostics.dropped_blocks = decoded.dropped;
        if decoded.dropped > 0 {
            result.warn(format!("dropped {} degenerate blocks", decoded.dropped));
        }
        Ok(result)
    }
}
