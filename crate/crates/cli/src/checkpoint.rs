//! Resumable studies: finished replicates are appended to a JSON-lines file
//! whose first line fingerprints the experiment.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use acbandit_core::harness::ReplicateOutcome;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "checkpoint.jsonl";

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: serde_json::Value,
}

pub struct Checkpoint {
    path: PathBuf,
    file: File,
}

impl Checkpoint {
    /// Opens (or starts) the checkpoint in `dir`. Returns the replicates
    /// already finished, keyed by index. A checkpoint written for a different
    /// experiment is an error rather than silently mixed in.
    pub fn open(dir: &Path, fingerprint: serde_json::Value) -> Result<(Self, BTreeMap<usize, ReplicateOutcome>)> {
        let path = dir.join(FILE_NAME);
        let mut done = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.lines();
            if let Some(first) = lines.next() {
                let header: Header = serde_json::from_str(&first?).context("checkpoint header")?;
                if header.fingerprint != fingerprint {
                    bail!("{} belongs to a different experiment; remove it or choose another --out", path.display());
                }
                for line in lines {
                    let line = line?;
                    // a torn final line from an interrupted write is dropped
                    match serde_json::from_str::<ReplicateOutcome>(&line) {
                        Ok(o) => {
                            done.insert(o.index, o);
                        }
                        Err(_) => break,
                    }
                }
            }
        }
        // rewrite so that a torn tail never precedes new records
        let mut file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "{}", serde_json::to_string(&Header { fingerprint })?)?;
        for o in done.values() {
            writeln!(file, "{}", serde_json::to_string(o)?)?;
        }
        file.sync_data()?;
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((Self { path, file }, done))
    }

    pub fn append(&mut self, outcomes: &[ReplicateOutcome]) -> Result<()> {
        let mut buf = String::new();
        for o in outcomes {
            buf.push_str(&serde_json::to_string(o)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes()).with_context(|| format!("writing {}", self.path.display()))?;
        self.file.sync_data()?;
        Ok(())
    }
}
