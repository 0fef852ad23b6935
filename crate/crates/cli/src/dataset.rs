//! JSON-lines datasets of labeled models.
//!
//! The first line is a header; each further line is one model record.
//! Writing is canonical (fixed field order, floats with 17 significant
//! digits), so reading a file and writing it back is byte-identical.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use isingnn_core::{IsingModel, MarginalSet, NodeMarginal};
use serde::Deserialize;

use crate::error::CliError;

pub const DATASET_FORMAT: &str = "isingnn-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_floats(s: &mut String, xs: impl IntoIterator<Item = f64>) {
    s.push('[');
    for (k, x) in xs.into_iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&fmt_f64(x));
    }
    s.push(']');
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub order: usize,
    pub aund_lo: f64,
    pub aund_hi: f64,
    pub connected: bool,
    pub count: usize,
    pub seed: u64,
    pub labeler: String,
    pub manifest: String,
}

impl DatasetHeader {
    pub fn to_json_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{{\"format\":{},\"version\":{},\"order\":{},\"aund_lo\":{},\"aund_hi\":{},\"connected\":{},\"count\":{},\"seed\":{},\"labeler\":{},\"manifest\":{}}}",
            json_str(&self.format),
            self.version,
            self.order,
            fmt_f64(self.aund_lo),
            fmt_f64(self.aund_hi),
            self.connected,
            self.count,
            self.seed,
            json_str(&self.labeler),
            json_str(&self.manifest)
        )
        .expect("writing to a String");
        s
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub graph: GraphRecord,
    pub omega: Vec<f64>,
    pub b: Vec<f64>,
    pub label_marginals: Option<Vec<[f64; 2]>>,
    pub seed: u64,
    pub labeler: String,
}

impl DatasetRecord {
    pub fn new(model: &IsingModel, label: Option<&MarginalSet>, seed: u64, labeler: &str) -> Self {
        Self {
            graph: GraphRecord {
                n: model.order(),
                edges: model.graph().edges().iter().map(|&(i, j)| [i, j]).collect(),
            },
            omega: model.omega().to_vec(),
            b: model.b().to_vec(),
            label_marginals: label.map(|l| l.iter().map(|m| m.as_array()).collect()),
            seed,
            labeler: labeler.to_string(),
        }
    }

    pub fn model(&self) -> Result<IsingModel, CliError> {
        if self.omega.len() != self.graph.edges.len() {
            return Err(CliError::Data(format!(
                "record has {} edges but {} couplings",
                self.graph.edges.len(),
                self.omega.len()
            )));
        }
        let triples: Vec<_> = self
            .graph
            .edges
            .iter()
            .zip(&self.omega)
            .map(|(e, &w)| (e[0], e[1], w))
            .collect();
        Ok(IsingModel::from_weighted_edges(self.graph.n, &triples, self.b.clone())?)
    }

    pub fn label(&self) -> Option<MarginalSet> {
        self.label_marginals.as_ref().map(|rows| {
            rows.iter()
                .map(|&[m, p]| NodeMarginal { p_minus: m, p_plus: p })
                .collect()
        })
    }

    pub fn to_json_line(&self) -> String {
        let mut s = String::from("{\"graph\":{\"n\":");
        write!(s, "{},\"edges\":[", self.graph.n).expect("writing to a String");
        for (k, e) in self.graph.edges.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            write!(s, "[{},{}]", e[0], e[1]).expect("writing to a String");
        }
        s.push_str("]},\"omega\":");
        push_floats(&mut s, self.omega.iter().copied());
        s.push_str(",\"b\":");
        push_floats(&mut s, self.b.iter().copied());
        s.push_str(",\"label_marginals\":");
        match &self.label_marginals {
            None => s.push_str("null"),
            Some(rows) => {
                s.push('[');
                for (k, r) in rows.iter().enumerate() {
                    if k > 0 {
                        s.push(',');
                    }
                    push_floats(&mut s, r.iter().copied());
                }
                s.push(']');
            }
        }
        write!(s, ",\"seed\":{},\"labeler\":{}}}", self.seed, json_str(&self.labeler)).expect("writing to a String");
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn to_jsonl(&self) -> String {
        let mut s = self.header.to_json_line();
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.to_json_line());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        read_lines(text.lines().map(|l| Ok(l.to_string())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        read_lines(BufReader::new(f).lines()).map_err(|e| match e {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(path, e))
    }

    pub fn models(&self) -> Result<Vec<IsingModel>, CliError> {
        self.records.iter().map(DatasetRecord::model).collect()
    }
}

fn read_lines(lines: impl Iterator<Item = std::io::Result<String>>) -> Result<Dataset, CliError> {
    let mut header = None;
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let ctx = |e: serde_json::Error| CliError::Data(format!("line {}: {e}", k + 1));
        if header.is_none() {
            let h: DatasetHeader = serde_json::from_str(&line).map_err(ctx)?;
            if h.format != DATASET_FORMAT || h.version != DATASET_VERSION {
                return Err(CliError::Data(format!(
                    "unsupported dataset format {} version {}",
                    h.format, h.version
                )));
            }
            header = Some(h);
        } else {
            records.push(serde_json::from_str::<DatasetRecord>(&line).map_err(ctx)?);
        }
    }
    let header = header.ok_or_else(|| CliError::Data("dataset has no header line".into()))?;
    if header.count != records.len() {
        return Err(CliError::Data(format!(
            "header announces {} records, found {}",
            header.count,
            records.len()
        )));
    }
    Ok(Dataset { header, records })
}
