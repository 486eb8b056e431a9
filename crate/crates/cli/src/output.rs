//! Output directories and the per-command run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use texir_core::assets::write_atomic;
use texir_core::optimizer::StageReport;
use texir_core::{Error, Result};

use crate::Ctx;

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `out` and refuses it when it is the directory of an input, so no command can
/// overwrite what it reads.
pub fn prepare_out(out: &Path, inputs: &[&Path]) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let out_c = out.canonicalize().map_err(|e| io_err(out, e))?;
    for input in inputs {
        let dir = input.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if dir.canonicalize().ok().as_deref() == Some(out_c.as_path()) {
            return Err(Error::InvalidInput(format!(
                "output directory {} holds the input {}; choose another --out",
                out.display(),
                input.display()
            )));
        }
    }
    Ok(())
}

/// Everything needed to reproduce a run. Written atomically as `manifest.json` once the
/// command has finished; timings are informational and excluded from reproducibility.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub scene: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub params: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageReport>,
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &'static str, ctx: &Ctx, scene: Option<&Path>, params: impl Serialize) -> Self {
        Manifest {
            command,
            scene: scene.map(Path::to_path_buf),
            seed: ctx.seed,
            threads: ctx.threads,
            params: serde_json::to_value(params).unwrap_or(serde_json::Value::Null),
            stages: Vec::new(),
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(name.to_string(), start.elapsed().as_secs_f64());
        log::info!("{name}: {:.2} s", self.timings[name]);
        out
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn write(&mut self, out: &Path) -> Result<()> {
        let path = out.join("manifest.json");
        self.outputs.sort();
        self.outputs.dedup();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))?;
        write_atomic(&path, json.as_bytes())
    }
}
