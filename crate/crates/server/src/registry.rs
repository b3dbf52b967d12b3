//! Policies available to live sessions, keyed by id.

use std::collections::BTreeMap;
use std::path::Path;

use assistlab_eval::PolicyMode;
use assistlab_learn::PolicyNet;

use crate::protocol::PolicyInfo;
use crate::ServerError;

#[derive(Debug, Clone, Default)]
pub struct PolicyRegistry {
    policies: BTreeMap<String, PolicyNet>,
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, net: PolicyNet) {
        self.policies.insert(id.into(), net);
    }

    /// Loads every `*.json` file in `dir`; the id is the file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, ServerError> {
        let io = |e| ServerError::Io { path: dir.to_owned(), source: e };
        let mut reg = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io)?;
        paths.sort();
        for path in paths {
            if path.extension().is_some_and(|e| e == "json") {
                let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
                let net = PolicyNet::load(&path)?;
                reg.insert(id, net);
            }
        }
        Ok(reg)
    }

    pub fn get(&self, id: &str) -> Option<&PolicyNet> {
        self.policies.get(id)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn infos(&self) -> Vec<PolicyInfo> {
        self.policies
            .iter()
            .map(|(id, net)| PolicyInfo {
                id: id.clone(),
                task: net.task,
                robot: net.robot,
                mode: PolicyMode::of_training(net.biomech),
            })
            .collect()
    }
}
