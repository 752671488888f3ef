use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, BackendProfile, ModelRequest, RequestBody, Transport};

/// Reply `reply` to any prompt whose system or user text contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockBehavior {
    /// `ECHO:<user text>`.
    Echo,
    /// A stable function of seed, role and prompt.
    Hash,
    /// First matching rule, falling back to [`MockBehavior::Hash`].
    Scripted(Vec<ScriptRule>),
}

/// Deterministic in-process stand-in for a model server.
pub struct MockTransport {
    behavior: MockBehavior,
    seed: u64,
    failures_left: AtomicU32,
}

impl MockTransport {
    pub fn new(behavior: MockBehavior, seed: u64) -> Self {
        Self {
            behavior,
            seed,
            failures_left: AtomicU32::new(0),
        }
    }

    /// Makes the first `n` sends fail with a retriable transport error.
    pub fn with_failures(self, n: u32) -> Self {
        self.failures_left.store(n, Ordering::SeqCst);
        self
    }

    pub fn from_profile(profile: &BackendProfile) -> Result<Box<dyn Transport>, BackendError> {
        let name = profile.endpoint.strip_prefix("mock:").unwrap_or("");
        let behavior = match name {
            "echo" => MockBehavior::Echo,
            "hash" => MockBehavior::Hash,
            "scripted" => MockBehavior::Scripted(profile.script.clone()),
            other => {
                return Err(BackendError::Config(format!(
                    "unknown mock {other:?}; expected echo, hash or scripted"
                )))
            }
        };
        Ok(Box::new(
            MockTransport::new(behavior, profile.seed).with_failures(profile.mock_failures),
        ))
    }

    fn hashed(&self, role: &str, parts: &[&str]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(role.as_bytes());
        for p in parts {
            hasher.update([0u8]);
            hasher.update(p.as_bytes());
        }
        let digest = hasher.finalize();
        format!("mock {role} output {}", hex::encode(&digest[..8]))
    }
}

fn frame_label(path: &std::path::Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    stem.strip_prefix("frame_").unwrap_or(stem).to_string()
}

impl Transport for MockTransport {
    fn send(&self, request: &ModelRequest<'_>) -> Result<String, BackendError> {
        let fail = self
            .failures_left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if fail {
            return Err(BackendError::Transport("mock injected failure".into()));
        }

        let role = request.role.as_str();
        match &request.prompt {
            RequestBody::Image { path, .. } => {
                let label = frame_label(path);
                match &self.behavior {
                    MockBehavior::Scripted(rules) => {
                        if let Some(rule) = rules.iter().find(|r| label.contains(&r.contains)) {
                            return Ok(rule.reply.clone());
                        }
                        Ok(format!("mock description of frame {label}"))
                    }
                    _ => Ok(format!("mock description of frame {label}")),
                }
            }
            RequestBody::Text(prompt) => match &self.behavior {
                MockBehavior::Echo => Ok(format!("ECHO:{}", prompt.user_text)),
                MockBehavior::Hash => Ok(self.hashed(role, &[&prompt.system_text, &prompt.user_text])),
                MockBehavior::Scripted(rules) => {
                    let hit = rules.iter().find(|r| {
                        prompt.system_text.contains(&r.contains) || prompt.user_text.contains(&r.contains)
                    });
                    Ok(match hit {
                        Some(rule) => rule.reply.clone(),
                        None => self.hashed(role, &[&prompt.system_text, &prompt.user_text]),
                    })
                }
            },
        }
    }
}
