//! Crawler-exclusion files.
//!
//! Matching follows the usual convention: the group naming the agent beats
//! the `*` group, the longest matching pattern within the group wins, and an
//! allow beats a disallow of equal length. Patterns may use `*` (any run of
//! characters) and a trailing `$` (end of path). Pattern length is counted in
//! bytes of the pattern as written.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Allow,
    Disallow,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RobotsRule {
    pub kind: RuleKind,
    pub path_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotsGroup {
    pub agents: Vec<String>,
    pub rules: Vec<RobotsRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotsPolicy {
    pub groups: Vec<RobotsGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

pub fn parse_robots(text: &str) -> RobotsPolicy {
    parse_robots_with_diagnostics(text).0
}

/// Bytes are decoded as UTF-8 with invalid sequences replaced.
pub fn parse_robots_bytes(bytes: &[u8]) -> (RobotsPolicy, Vec<Diagnostic>) {
    parse_robots_with_diagnostics(&String::from_utf8_lossy(bytes))
}

pub fn parse_robots_with_diagnostics(text: &str) -> (RobotsPolicy, Vec<Diagnostic>) {
    let mut groups: Vec<RobotsGroup> = Vec::new();
    let mut diagnostics = Vec::new();
    // True while consecutive user-agent lines are still adding to the open group.
    let mut collecting_agents = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let line = line.trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("no ':' separator in {line:?}"),
            });
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "user-agent" | "useragent" | "user agent" => {
                if value.is_empty() {
                    diagnostics.push(Diagnostic {
                        line: line_no,
                        message: "empty user-agent".into(),
                    });
                    continue;
                }
                let agent = value.to_ascii_lowercase();
                match groups.last_mut() {
                    Some(g) if collecting_agents => g.agents.push(agent),
                    _ => groups.push(RobotsGroup {
                        agents: vec![agent],
                        rules: vec![],
                    }),
                }
                collecting_agents = true;
            }
            "allow" | "disallow" => {
                collecting_agents = false;
                let Some(group) = groups.last_mut() else {
                    diagnostics.push(Diagnostic {
                        line: line_no,
                        message: format!("{key} before any user-agent"),
                    });
                    continue;
                };
                // An empty disallow permits everything.
                let kind = if key == "allow" || value.is_empty() {
                    RuleKind::Allow
                } else {
                    RuleKind::Disallow
                };
                group.rules.push(RobotsRule {
                    kind,
                    path_prefix: value.to_owned(),
                });
            }
            _ => {
                diagnostics.push(Diagnostic {
                    line: line_no,
                    message: format!("ignored directive {key:?}"),
                });
            }
        }
    }
    (RobotsPolicy { groups }, diagnostics)
}

impl RobotsPolicy {
    /// Render back to robots.txt text. Parsing the output yields an equal policy.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for a in &g.agents {
                let _ = writeln!(out, "User-agent: {a}");
            }
            for r in &g.rules {
                let key = match r.kind {
                    RuleKind::Allow => "Allow",
                    RuleKind::Disallow => "Disallow",
                };
                let _ = writeln!(out, "{key}: {}", r.path_prefix);
            }
        }
        out
    }

    /// Rules that govern `agent`: all groups naming it, else all `*` groups.
    pub fn rules_for(&self, agent: &str) -> Vec<&RobotsRule> {
        let agent = agent.trim().to_ascii_lowercase();
        let pick = |token: &str| -> Vec<&RobotsRule> {
            self.groups
                .iter()
                .filter(|g| g.agents.iter().any(|a| a == token))
                .flat_map(|g| g.rules.iter())
                .collect()
        };
        if agent != "*" && self.groups.iter().any(|g| g.agents.iter().any(|a| *a == agent)) {
            return pick(&agent);
        }
        pick("*")
    }
}

/// Whether `pattern` matches a prefix of `path`.
pub fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (body, anchored) = match pattern.strip_suffix('$') {
        Some(b) => (b, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = body.split('*').collect();
    let mut pos = 0usize;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(part) {
                return false;
            }
            pos = part.len();
            continue;
        }
        let last = i == parts.len() - 1;
        if last && anchored {
            // The final segment must sit at the very end.
            return path.len() >= pos + part.len() && path.ends_with(part);
        }
        match path[pos..].find(part) {
            Some(off) => pos += off + part.len(),
            None => return false,
        }
    }
    !anchored || pos == path.len()
}

pub fn is_allowed(policy: &RobotsPolicy, agent: &str, path: &str) -> bool {
    let mut best: Option<(usize, RuleKind)> = None;
    for rule in policy.rules_for(agent) {
        if !pattern_matches(&rule.path_prefix, path) {
            continue;
        }
        let len = rule.path_prefix.len();
        best = match best {
            None => Some((len, rule.kind)),
            Some((l, _)) if len > l => Some((len, rule.kind)),
            Some((l, k)) if len == l && k == RuleKind::Disallow => Some((len, rule.kind)),
            keep => keep,
        };
    }
    !matches!(best, Some((_, RuleKind::Disallow)))
}
