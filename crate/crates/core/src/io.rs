//! Task-set files: `{"version": "1", "tasks": [{"e": "2", "d": "3", "p": "5"}], "metadata": {}}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SporadicTask, TaskSet};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed task-set file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid task set: {0}")]
    Model(#[from] ModelError),
    #[error("unsupported format version {0:?}")]
    Version(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSetFile {
    pub version: String,
    pub tasks: Vec<SporadicTask>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl TaskSetFile {
    pub fn from_taskset(ts: &TaskSet) -> Self {
        TaskSetFile { version: FORMAT_VERSION.into(), tasks: ts.tasks().to_vec(), metadata: Default::default() }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Validates parameters; deadlines beyond periods are allowed here and
    /// rejected by the operations that need constrained deadlines.
    pub fn to_taskset(&self) -> Result<TaskSet, IoError> {
        let tasks = self.tasks.iter().map(|t| SporadicTask::relaxed(t.e, t.d, t.p)).collect::<Result<Vec<_>, _>>()?;
        Ok(TaskSet::relaxed(tasks)?)
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let file: TaskSetFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(IoError::Version(file.version));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text =
            fs::read_to_string(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_json()).map_err(|source| IoError::Write { path: path.display().to_string(), source })
    }
}

/// Reads a task-set file straight into a [`TaskSet`].
pub fn read_taskset(path: &Path) -> Result<TaskSet, IoError> {
    TaskSetFile::read(path)?.to_taskset()
}
