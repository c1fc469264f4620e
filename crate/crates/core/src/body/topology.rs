//! Vertex correspondences between two mesh topologies.

use std::path::Path;

use crate::contact::ContactVector;
use crate::error::{Error, Result};
use crate::geometry::io::write_atomic;

/// Injective `src → dst` vertex map.
///
/// File format: optional `# src <name> <vertex_count>` and
/// `# dst <name> <vertex_count>` header lines, then one `src dst` index
/// pair per line.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMap {
    pub src_topology: String,
    pub src_count: usize,
    pub dst_topology: String,
    pub dst_count: usize,
    pairs: Vec<(usize, usize)>,
}

impl TopologyMap {
    pub fn new(
        src_topology: impl Into<String>,
        src_count: usize,
        dst_topology: impl Into<String>,
        dst_count: usize,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut src_seen = vec![false; src_count];
        let mut dst_seen = vec![false; dst_count];
        for &(s, d) in &pairs {
            if s >= src_count {
                return Err(Error::IndexOutOfRange { what: "topology map source", index: s, len: src_count });
            }
            if d >= dst_count {
                return Err(Error::IndexOutOfRange { what: "topology map target", index: d, len: dst_count });
            }
            if std::mem::replace(&mut src_seen[s], true) || std::mem::replace(&mut dst_seen[d], true) {
                return Err(Error::invalid("topology map", format!("pair ({s}, {d}) breaks injectivity")));
            }
        }
        Ok(Self {
            src_topology: src_topology.into(),
            src_count,
            dst_topology: dst_topology.into(),
            dst_count,
            pairs,
        })
    }

    pub fn identity(topology: &str, count: usize) -> Self {
        Self::new(topology, count, topology, count, (0..count).map(|i| (i, i)).collect())
            .expect("identity map is injective")
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn inverse(&self) -> Self {
        Self {
            src_topology: self.dst_topology.clone(),
            src_count: self.dst_count,
            dst_topology: self.src_topology.clone(),
            dst_count: self.src_count,
            pairs: self.pairs.iter().map(|&(s, d)| (d, s)).collect(),
        }
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut src = (String::from("src"), None);
        let mut dst = (String::from("dst"), None);
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let perr = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let t: Vec<&str> = rest.split_whitespace().collect();
                if let [side @ ("src" | "dst"), name, count] = t.as_slice() {
                    let count: usize = count.parse().map_err(|e| perr(format!("bad vertex count: {e}")))?;
                    let slot = if *side == "src" { &mut src } else { &mut dst };
                    *slot = (name.to_string(), Some(count));
                }
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            let [a, b] = t.as_slice() else {
                return Err(perr(format!("expected two indices, got `{line}`")));
            };
            let a: usize = a.parse().map_err(|e| perr(format!("bad index `{a}`: {e}")))?;
            let b: usize = b.parse().map_err(|e| perr(format!("bad index `{b}`: {e}")))?;
            pairs.push((a, b));
        }
        let src_count = src.1.unwrap_or_else(|| pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0));
        let dst_count = dst.1.unwrap_or_else(|| pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0));
        Self::new(src.0, src_count, dst.0, dst_count, pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# src {} {}\n# dst {} {}\n",
            self.src_topology, self.src_count, self.dst_topology, self.dst_count
        );
        for (a, b) in &self.pairs {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

/// Transfers labels across topologies; unmapped target vertices are 0.
pub fn map_contact_labels(labels: &ContactVector, map: &TopologyMap) -> Result<ContactVector> {
    if labels.len() != map.src_count {
        return Err(Error::DimensionMismatch { field: "labels", expected: map.src_count, actual: labels.len() });
    }
    if labels.topology != map.src_topology {
        return Err(Error::TopologyMismatch(labels.topology.clone(), map.src_topology.clone()));
    }
    let mut out = vec![false; map.dst_count];
    let mut probs = labels.probabilities.as_ref().map(|_| vec![0.0; map.dst_count]);
    for &(s, d) in &map.pairs {
        out[d] = labels.labels[s];
        if let (Some(dst), Some(src)) = (probs.as_mut(), labels.probabilities.as_ref()) {
            dst[d] = src[s];
        }
    }
    Ok(ContactVector { topology: map.dst_topology.clone(), labels: out, probabilities: probs })
}
