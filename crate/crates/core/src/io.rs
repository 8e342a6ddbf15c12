//! Plain-text study data: adjacency matrices (one per wave) and attribute
//! panels (one row per node, one column per wave), whitespace separated with
//! no header line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IoError>,
    },
    #[error("empty input")]
    Empty,
    #[error("adjacency matrix must have at least 2 nodes, found {0}")]
    TooSmall(usize),
    #[error("adjacency matrix is not square: row {row} has {found} entries, expected {expected}")]
    NonSquare {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-binary entry {token:?} at row {row}, column {col}")]
    NonBinary {
        row: usize,
        col: usize,
        token: String,
    },
    #[error("nonzero diagonal entry at node {0}")]
    NonzeroDiagonal(usize),
    #[error("ragged attribute rows: row {row} has {found} values, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-numeric token {token:?} at row {row}, column {col}")]
    NonNumeric {
        row: usize,
        col: usize,
        token: String,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl IoError {
    fn in_file(self, path: &Path) -> IoError {
        IoError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

/// Directed binary network observed at one wave. `tie(i, j)` means i named j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    n: usize,
    adj: Vec<u8>,
    wave: usize,
}

impl Network {
    /// Builds a network from row-major 0/1 entries, validating the invariants.
    pub fn from_rows(rows: &[Vec<u8>], wave: usize) -> Result<Self, IoError> {
        let n = rows.len();
        if n < 2 {
            return Err(IoError::TooSmall(n));
        }
        let mut adj = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(IoError::NonSquare {
                    row: i + 1,
                    found: row.len(),
                    expected: n,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(IoError::NonBinary {
                        row: i + 1,
                        col: j + 1,
                        token: v.to_string(),
                    });
                }
            }
            if row[i] != 0 {
                return Err(IoError::NonzeroDiagonal(i + 1));
            }
            adj.extend_from_slice(row);
        }
        Ok(Self { n, adj, wave })
    }

    /// Network with no ties.
    pub fn empty(n: usize, wave: usize) -> Result<Self, IoError> {
        if n < 2 {
            return Err(IoError::TooSmall(n));
        }
        Ok(Self {
            n,
            adj: vec![0; n * n],
            wave,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn wave(&self) -> usize {
        self.wave
    }

    #[inline]
    pub fn tie(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] == 1
    }

    /// Sets or clears the tie i→j. Self-ties are ignored.
    pub fn set_tie(&mut self, i: usize, j: usize, value: bool) {
        if i != j {
            self.adj[i * self.n + j] = u8::from(value);
        }
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.adj[i * self.n..(i + 1) * self.n]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|&v| v as usize).sum()
    }

    pub fn tie_count(&self) -> usize {
        self.adj.iter().map(|&v| v as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.tie_count() as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Serializes in the same format `parse_adjacency` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 2);
        for i in 0..self.n {
            let row: Vec<&str> = self
                .row(i)
                .iter()
                .map(|&v| if v == 1 { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// One node-level attribute observed over `waves()` waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePanel {
    name: String,
    values: Vec<Vec<f64>>,
}

impl AttributePanel {
    pub fn new(name: impl Into<String>, values: Vec<Vec<f64>>) -> Result<Self, IoError> {
        let Some(first) = values.first() else {
            return Err(IoError::Empty);
        };
        let waves = first.len();
        if waves == 0 {
            return Err(IoError::Empty);
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != waves {
                return Err(IoError::Ragged {
                    row: i + 1,
                    found: row.len(),
                    expected: waves,
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(IoError::NonFinite {
                    row: i + 1,
                    col: j + 1,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    /// Panel from per-wave columns (each of length n).
    pub fn from_columns(name: impl Into<String>, columns: &[Vec<f64>]) -> Result<Self, IoError> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(IoError::DimensionMismatch(
                "attribute columns differ in length".into(),
            ));
        }
        let rows = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        Self::new(name, rows)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn waves(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, node: usize, wave_index: usize) -> f64 {
        self.values[node][wave_index]
    }

    /// Values at a 0-based wave index, in node order.
    pub fn column(&self, wave_index: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[wave_index]).collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Networks (one per wave, shared node ordering) plus attribute panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyData {
    networks: Vec<Network>,
    attributes: Vec<AttributePanel>,
    waves: usize,
}

impl StudyData {
    pub fn new(
        mut networks: Vec<Network>,
        attributes: Vec<AttributePanel>,
    ) -> Result<Self, IoError> {
        let Some(first) = networks.first() else {
            return Err(IoError::Empty);
        };
        let n = first.n();
        if let Some(net) = networks.iter().find(|net| net.n() != n) {
            return Err(IoError::DimensionMismatch(format!(
                "wave {} network has {} nodes, wave {} has {}",
                net.wave(),
                net.n(),
                first.wave(),
                n
            )));
        }
        networks.sort_by_key(Network::wave);
        let waves = networks.len();
        for panel in &attributes {
            if panel.n() != n {
                return Err(IoError::DimensionMismatch(format!(
                    "attribute {:?} has {} rows but networks have {} nodes",
                    panel.name(),
                    panel.n(),
                    n
                )));
            }
            if panel.waves() != waves {
                return Err(IoError::DimensionMismatch(format!(
                    "attribute {:?} has {} waves but {} networks were given",
                    panel.name(),
                    panel.waves(),
                    waves
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = attributes.iter().find(|p| !seen.insert(p.name())) {
            return Err(IoError::DimensionMismatch(format!(
                "duplicate attribute name {:?}",
                dup.name()
            )));
        }
        Ok(Self {
            networks,
            attributes,
            waves,
        })
    }

    pub fn n(&self) -> usize {
        self.networks[0].n()
    }

    pub fn waves(&self) -> usize {
        self.waves
    }

    pub fn networks(&self) -> &[Network] {
        &self.networks
    }

    /// Network at a 0-based wave index.
    pub fn network(&self, wave_index: usize) -> &Network {
        &self.networks[wave_index]
    }

    pub fn attributes(&self) -> &[AttributePanel] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributePanel> {
        self.attributes.iter().find(|p| p.name() == name)
    }
}

/// File locations for `load_study`. Networks are listed in wave order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StudyPaths {
    pub networks: Vec<PathBuf>,
    pub attributes: Vec<(String, PathBuf)>,
}

pub fn parse_adjacency(text: &str, wave: usize) -> Result<Network, IoError> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for line in text.lines() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let r = rows.len();
        let row = tokens
            .iter()
            .enumerate()
            .map(|(c, tok)| match *tok {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(IoError::NonBinary {
                    row: r + 1,
                    col: c + 1,
                    token: other.to_string(),
                }),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    if rows.len() < 2 {
        return Err(IoError::TooSmall(rows.len()));
    }
    Network::from_rows(&rows, wave)
}

pub fn parse_attribute_panel(text: &str, name: &str) -> Result<AttributePanel, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let r = rows.len();
        let row = tokens
            .iter()
            .enumerate()
            .map(|(c, tok)| {
                let v: f64 = tok.parse().map_err(|_| IoError::NonNumeric {
                    row: r + 1,
                    col: c + 1,
                    token: tok.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(IoError::NonFinite {
                        row: r + 1,
                        col: c + 1,
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    AttributePanel::new(name, rows)
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_study(paths: &StudyPaths) -> Result<StudyData, IoError> {
    let networks = paths
        .networks
        .iter()
        .enumerate()
        .map(|(w, path)| parse_adjacency(&read(path)?, w + 1).map_err(|e| e.in_file(path)))
        .collect::<Result<Vec<_>, _>>()?;
    let attributes = paths
        .attributes
        .iter()
        .map(|(name, path)| parse_attribute_panel(&read(path)?, name).map_err(|e| e.in_file(path)))
        .collect::<Result<Vec<_>, _>>()?;
    StudyData::new(networks, attributes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_directed_tie() {
        let net = parse_adjacency("0 1\n0 0", 1).unwrap();
        assert_eq!(net.n(), 2);
        assert!(net.tie(0, 1));
        assert!(!net.tie(1, 0));
        assert_eq!(net.row(0), &[0, 1]);
    }

    #[test]
    fn adjacency_errors() {
        assert!(matches!(
            parse_adjacency("0 2\n0 0", 1),
            Err(IoError::NonBinary { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse_adjacency("0 1 0\n0 0", 1),
            Err(IoError::NonSquare { .. })
        ));
        assert!(matches!(
            parse_adjacency("1 0\n0 0", 1),
            Err(IoError::NonzeroDiagonal(1))
        ));
        assert!(matches!(parse_adjacency("0", 1), Err(IoError::TooSmall(1))));
        assert!(matches!(parse_adjacency("  \n", 1), Err(IoError::Empty)));
    }

    #[test]
    fn tolerates_padding_and_blank_lines() {
        let net = parse_adjacency("\n  0 1 1\n1   0 0 \n\n0 1 0\n", 2).unwrap();
        assert_eq!(net.n(), 3);
        assert_eq!(net.wave(), 2);
        assert_eq!(net.out_degree(0), 2);
    }

    #[test]
    fn attribute_panel_basic() {
        let p = parse_attribute_panel("1 2\n3 4", "a").unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.waves(), 2);
        assert_eq!(p.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(p.column(1), vec![2.0, 4.0]);
    }

    #[test]
    fn attribute_panel_errors() {
        assert!(matches!(
            parse_attribute_panel("1 a", "x"),
            Err(IoError::NonNumeric { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse_attribute_panel("1 2\n3", "x"),
            Err(IoError::Ragged { row: 2, .. })
        ));
        assert!(matches!(
            parse_attribute_panel("1 NaN", "x"),
            Err(IoError::NonFinite { .. })
        ));
        assert!(matches!(
            parse_attribute_panel("", "x"),
            Err(IoError::Empty)
        ));
    }

    #[test]
    fn study_dimension_checks() {
        let net = parse_adjacency("0 1\n1 0", 1).unwrap();
        let attr = parse_attribute_panel("1\n2", "a").unwrap();
        let study = StudyData::new(vec![net.clone()], vec![attr]).unwrap();
        assert_eq!((study.n(), study.waves()), (2, 1));

        let short = parse_attribute_panel("1", "a").unwrap();
        assert!(matches!(
            StudyData::new(vec![net.clone()], vec![short]),
            Err(IoError::DimensionMismatch(_))
        ));
        let two_waves = parse_attribute_panel("1 2\n2 3", "a").unwrap();
        assert!(matches!(
            StudyData::new(vec![net.clone()], vec![two_waves]),
            Err(IoError::DimensionMismatch(_))
        ));
        let big = Network::empty(3, 2).unwrap();
        assert!(matches!(
            StudyData::new(vec![net.clone(), big], vec![]),
            Err(IoError::DimensionMismatch(_))
        ));
        let a = parse_attribute_panel("1\n2", "a").unwrap();
        assert!(StudyData::new(vec![net], vec![a.clone(), a]).is_err());
    }

    #[test]
    fn networks_sorted_by_wave() {
        let w2 = parse_adjacency("0 1\n0 0", 2).unwrap();
        let w1 = parse_adjacency("0 0\n1 0", 1).unwrap();
        let study = StudyData::new(vec![w2, w1], vec![]).unwrap();
        assert_eq!(study.network(0).wave(), 1);
        assert!(study.network(0).tie(1, 0));
    }

    #[test]
    fn load_study_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let adj = dir.path().join("net1.dat");
        let attr = dir.path().join("a.dat");
        fs::write(&adj, "0 1\n0 0\n").unwrap();
        fs::write(&attr, "1\n3\n").unwrap();
        let study = load_study(&StudyPaths {
            networks: vec![adj.clone()],
            attributes: vec![("a".into(), attr)],
        })
        .unwrap();
        assert_eq!((study.n(), study.waves()), (2, 1));

        let missing = load_study(&StudyPaths {
            networks: vec![dir.path().join("nope.dat")],
            attributes: vec![],
        });
        assert!(matches!(missing, Err(IoError::Read { .. })));

        let bad = dir.path().join("bad.dat");
        fs::write(&bad, "0 3\n0 0\n").unwrap();
        let err = load_study(&StudyPaths {
            networks: vec![bad],
            attributes: vec![],
        })
        .unwrap_err();
        assert!(err.to_string().contains("bad.dat"));
    }

    fn arb_network() -> impl Strategy<Value = Network> {
        (2usize..12).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
                let mut net = Network::empty(n, 1).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        net.set_tie(i, j, bits[i * n + j]);
                    }
                }
                net
            })
        })
    }

    proptest! {
        #[test]
        fn adjacency_text_round_trip(net in arb_network()) {
            let text = net.to_text();
            let back = parse_adjacency(&text, net.wave()).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(back.to_text(), text);
        }

        #[test]
        fn malformed_input_is_a_typed_error(text in "[ 01a2\\-\\.\n]{0,40}") {
            // Never panics; any success satisfies the invariants.
            if let Ok(net) = parse_adjacency(&text, 1) {
                prop_assert!(net.n() >= 2);
                for i in 0..net.n() {
                    prop_assert!(!net.tie(i, i));
                }
            }
            if let Ok(panel) = parse_attribute_panel(&text, "x") {
                prop_assert!(panel.rows().iter().all(|r| r.len() == panel.waves()));
            }
        }
    }
}
