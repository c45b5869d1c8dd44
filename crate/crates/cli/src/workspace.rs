//! On-disk workspace: the loaded OPM source, the TPM graph, materialized
//! nodes, agent registrations and the agent log, plus a manifest holding a
//! SHA-256 checksum for each file and the workspace clock.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tpm::engine::MaterializedNode;
use tpm::native::{parse_tpm, serialize_tpm};
use tpm::{AgentRegistration, Engine, Timestamp};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SOURCE: &str = "source.opm";
pub const GRAPH: &str = "graph.tpm";
pub const CATALOG: &str = "catalog.json";
pub const AGENTS: &str = "agents.json";
pub const LOG: &str = "agents.log";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Current time of the workspace; queries and constructs run at it.
    pub clock: u64,
    /// File name to hex SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct Workspace {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Workspace {
    /// Open `dir`, verifying every file the manifest lists. A missing
    /// directory or manifest gives an empty workspace.
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CliError::io(manifest_path.display(), format!("corrupt manifest: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(CliError::io(manifest_path.display(), e)),
        };
        let ws = Workspace {
            dir: dir.to_owned(),
            manifest,
        };
        for (name, sum) in &ws.manifest.files {
            let path = ws.dir.join(name);
            let bytes = fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
            if &checksum(&bytes) != sum {
                return Err(CliError::io(path.display(), "checksum mismatch; the file changed outside tpm"));
            }
        }
        Ok(ws)
    }

    pub fn has(&self, name: &str) -> bool {
        self.manifest.files.contains_key(name)
    }

    pub fn read(&self, name: &str) -> Result<Option<String>> {
        if !self.has(name) {
            return Ok(None);
        }
        let path = self.dir.join(name);
        fs::read_to_string(&path)
            .map(Some)
            .map_err(|e| CliError::io(path.display(), e))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(self.dir.display(), e))?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(path.display(), e))?;
        self.manifest.files.insert(name.to_owned(), checksum(contents.as_bytes()));
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Result<()> {
        if self.manifest.files.remove(name).is_some() {
            let path = self.dir.join(name);
            fs::remove_file(&path).map_err(|e| CliError::io(path.display(), e))?;
        }
        Ok(())
    }

    pub fn save(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(self.dir.display(), e))?;
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(path.display(), e))
    }

    pub fn clock(&self) -> Timestamp {
        Timestamp(self.manifest.clock)
    }

    /// The engine over the stored TPM graph, with its catalog and agents.
    pub fn engine(&self) -> Result<Engine> {
        let Some(text) = self.read(GRAPH)? else {
            return Err(CliError::refused(format!(
                "no TPM graph in {}; run `tpm load` and `tpm convert` first",
                self.dir.display()
            )));
        };
        let graph = parse_tpm(&text).map_err(|e| CliError::parse(format!("{GRAPH}: {e}")))?;
        let mut engine = Engine::new(graph);
        let catalog: Vec<MaterializedNode> = self.read_json(CATALOG)?.unwrap_or_default();
        let agents: Vec<AgentRegistration> = self.read_json(AGENTS)?.unwrap_or_default();
        engine.restore(catalog, agents);
        Ok(engine)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<Option<T>> {
        match self.read(name)? {
            Some(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| CliError::io(self.dir.join(name).display(), e)),
            None => Ok(None),
        }
    }

    /// Write the engine state back and save the manifest.
    pub fn store_engine(&mut self, engine: &Engine) -> Result<()> {
        self.write(GRAPH, &serialize_tpm(engine.graph()))?;
        let catalog: Vec<&MaterializedNode> = engine.catalog().collect();
        let agents: Vec<&AgentRegistration> = engine.agents().collect();
        self.write(CATALOG, &(serde_json::to_string_pretty(&catalog).expect("catalog serializes") + "\n"))?;
        self.write(AGENTS, &(serde_json::to_string_pretty(&agents).expect("agents serialize") + "\n"))?;
        self.write(LOG, &engine.export_log())?;
        self.save()
    }
}
