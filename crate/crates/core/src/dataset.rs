//! Line-delimited JSON graph datasets and a converter from the raw TUDataset
//! text layout.
//!
//! One record per line:
//!
//! ```text
//! {"coords": [[x, y, z], ...] | null, "edges": [[i, j], ...], "features": [[...], ...], "label": 0}
//! ```
//!
//! Blank lines are ignored. `coords` may be omitted; such records are
//! embedded spectrally before tiling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
    pub label: usize,
}

impl DatasetRecord {
    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    pub fn needs_embedding(&self) -> bool {
        self.coords.is_none()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.node_count();
        if let Some(&(a, b)) = self.edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(format!("edge ({a},{b}) out of range for {n} nodes"));
        }
        if let Some(w) = self.features.first().map(Vec::len) {
            if self.features.iter().any(|r| r.len() != w) {
                return Err("feature rows differ in width".into());
            }
        }
        if self.features.iter().flatten().any(|x| !x.is_finite()) {
            return Err("non-finite feature".into());
        }
        if let Some(coords) = &self.coords {
            if coords.len() != n {
                return Err(format!("{} coordinate rows for {n} nodes", coords.len()));
            }
            let d = coords.first().map_or(3, Vec::len);
            if !(2..=3).contains(&d) || coords.iter().any(|c| c.len() != d) {
                return Err("coordinates must all have dimension 2 or 3".into());
            }
        }
        Ok(())
    }
}

/// Parses dataset text; see the module docs for the grammar.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        rec.validate().map_err(|msg| Error::InvariantViolation { index: out.len(), msg })?;
        out.push(rec);
    }
    if let Some(w) = out.first().and_then(|r| r.features.first()).map(Vec::len) {
        if let Some(i) = out.iter().position(|r| r.features.first().is_some_and(|f| f.len() != w)) {
            return Err(Error::InvariantViolation {
                index: i,
                msg: "feature width differs from the first record".into(),
            });
        }
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads `<dir>/<name>_A.txt`, `_graph_indicator.txt`, `_graph_labels.txt`
/// and, if present, `_node_labels.txt`. Node labels become one-hot features
/// (a constant feature otherwise); graph labels are mapped to `0..C` in
/// sorted order. Coordinates are left empty.
pub fn convert_tudataset(dir: &Path, name: &str) -> Result<Vec<DatasetRecord>> {
    let read = |suffix: &str| fs::read_to_string(dir.join(format!("{name}_{suffix}.txt")));
    let ints = |text: &str, what: &str| -> Result<Vec<Vec<i64>>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.split(',')
                    .map(|t| {
                        t.trim().parse::<i64>().map_err(|e| Error::Parse {
                            line: i + 1,
                            msg: format!("{what}: {e}"),
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let indicator: Vec<usize> = ints(&read("graph_indicator")?, "graph_indicator")?
        .into_iter()
        .map(|r| r[0] as usize)
        .collect();
    let graph_labels: Vec<i64> = ints(&read("graph_labels")?, "graph_labels")?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let node_labels: Option<Vec<i64>> = match read("node_labels") {
        Ok(t) => Some(ints(&t, "node_labels")?.into_iter().map(|r| r[0]).collect()),
        Err(_) => None,
    };
    let adjacency = ints(&read("A")?, "A")?;

    let label_ids: BTreeMap<i64, usize> = graph_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let node_ids: Option<BTreeMap<i64, usize>> = node_labels.as_ref().map(|nl| {
        nl.iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect()
    });

    let graphs = graph_labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graphs];
    let mut local = vec![0usize; indicator.len()];
    for (node, &g) in indicator.iter().enumerate() {
        if g == 0 || g > graphs {
            return Err(Error::Parse {
                line: node + 1,
                msg: format!("graph id {g} out of range"),
            });
        }
        local[node] = members[g - 1].len();
        members[g - 1].push(node);
    }
    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); graphs];
    for (i, row) in adjacency.iter().enumerate() {
        let (a, b) = match row.as_slice() {
            [a, b] if *a >= 1 && *b >= 1 && (*a as usize) <= indicator.len() && (*b as usize) <= indicator.len() => {
                (*a as usize - 1, *b as usize - 1)
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "A: expected two 1-based node ids".into(),
                })
            }
        };
        if indicator[a] != indicator[b] {
            return Err(Error::Parse {
                line: i + 1,
                msg: "A: edge crosses graphs".into(),
            });
        }
        if a != b {
            let (la, lb) = (local[a], local[b]);
            edges[indicator[a] - 1].insert((la.min(lb), la.max(lb)));
        }
    }
    Ok((0..graphs)
        .map(|g| {
            let features = members[g]
                .iter()
                .map(|&node| match (&node_labels, &node_ids) {
                    (Some(nl), Some(ids)) => {
                        let mut row = vec![0.0; ids.len()];
                        row[ids[&nl[node]]] = 1.0;
                        row
                    }
                    _ => vec![1.0],
                })
                .collect();
            DatasetRecord {
                coords: None,
                edges: edges[g].iter().copied().collect(),
                features,
                label: label_ids[&graph_labels[g]],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_empty_dataset() {
        assert!(parse_dataset("").unwrap().is_empty());
        assert!(parse_dataset("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn parses_records() {
        let text = r#"{"coords": [[0,0,0],[1,0,0],[0,1,0]], "edges": [[0,1],[1,2]], "features": [[1],[1],[1]], "label": 1}
{"edges": [[0,1]], "features": [[1],[0]], "label": 0}"#;
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(!ds[0].needs_embedding());
        assert!(ds[1].needs_embedding());
    }

    #[test]
    fn bad_edge_is_invariant_violation() {
        let text = r#"{"edges": [[0,1]], "features": [[1],[1]], "label": 0}
{"edges": [[0,5]], "features": [[1],[1]], "label": 0}"#;
        assert!(matches!(parse_dataset(text), Err(Error::InvariantViolation { index: 1, .. })));
    }

    #[test]
    fn syntax_error_carries_line() {
        let text = "\n{\"edges\": [}";
        assert!(matches!(parse_dataset(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn tudataset_conversion() {
        let dir = std::env::temp_dir().join(format!("rtpool-tu-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("T_A.txt"), "1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n").unwrap();
        fs::write(dir.join("T_graph_indicator.txt"), "1\n1\n1\n2\n2\n").unwrap();
        fs::write(dir.join("T_graph_labels.txt"), "1\n-1\n").unwrap();
        fs::write(dir.join("T_node_labels.txt"), "0\n2\n0\n2\n2\n").unwrap();
        let ds = convert_tudataset(&dir, "T").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].edges, vec![(0, 1), (1, 2)]);
        assert_eq!(ds[1].edges, vec![(0, 1)]);
        assert_eq!(ds[0].label, 1);
        assert_eq!(ds[1].label, 0);
        assert_eq!(ds[0].features[1], vec![0.0, 1.0]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
