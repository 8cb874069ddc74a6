//! Model archives: a directory holding the config snapshot, the weights,
//! every factor table, and the objective trace. Values are printed with 17
//! significant digits, so a reload reproduces the model bit-exactly.
//!
//! ```text
//! archive/
//!   version        format tag, checked on read
//!   config.toml    solver configuration snapshot
//!   model.toml     rank, mode, eta, n_patients
//!   alphas.tsv     source name, divergence, weight (defines source order)
//!   trace.tsv      outer iteration, objective
//!   W.tsv          patient loadings, labeled rows
//!   H_<name>.tsv   factor matrix per source, labeled rows
//!   b_<name>.tsv   bias vector per source, labeled rows
//! ```

use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_to_string, table, trim_line};
use crate::model::{
    CollectionSchema, Divergence, FactorModel, Mode, SolverConfig, SourceSchema,
};

pub const ARCHIVE_VERSION: &str = "sicnmf-archive-v1";

/// A fitted model together with everything needed to interpret and reuse
/// it: the source schema, the training patient labels, and the solver
/// configuration that produced it.
#[derive(Debug, Clone)]
pub struct ArchivedModel {
    pub model: FactorModel,
    pub schema: CollectionSchema,
    pub patient_labels: Vec<String>,
    pub config: SolverConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    rank: usize,
    mode: Mode,
    eta: f64,
    n_patients: usize,
}

fn factor_header(rank: usize) -> Vec<String> {
    let mut header = vec!["entity".to_string()];
    header.extend((0..rank).map(|k| format!("p{}", k + 1)));
    header
}

pub fn write_model(dir: &Path, archived: &ArchivedModel) -> Result<()> {
    let m = &archived.model;
    if archived.schema.sources.len() != m.n_sources() {
        return Err(Error::Shape(format!(
            "schema has {} sources but the model has {}",
            archived.schema.sources.len(),
            m.n_sources()
        )));
    }
    if archived.patient_labels.len() != m.n_patients() {
        return Err(Error::Shape(format!(
            "{} patient labels for {} model rows",
            archived.patient_labels.len(),
            m.n_patients()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    atomic_write(&dir.join("version"), &format!("{ARCHIVE_VERSION}\n"))?;

    let config_text = toml::to_string_pretty(&archived.config)
        .map_err(|e| Error::Archive(format!("cannot serialize config: {e}")))?;
    atomic_write(&dir.join("config.toml"), &config_text)?;

    let meta = ModelMeta {
        rank: m.rank,
        mode: m.mode,
        eta: m.eta,
        n_patients: m.n_patients(),
    };
    let meta_text = toml::to_string_pretty(&meta)
        .map_err(|e| Error::Archive(format!("cannot serialize model metadata: {e}")))?;
    atomic_write(&dir.join("model.toml"), &meta_text)?;

    let mut alphas = String::from("source\tdivergence\talpha\n");
    for (v, s) in archived.schema.sources.iter().enumerate() {
        alphas.push_str(&format!("{}\t{}\t{:.16e}\n", s.name, s.divergence, m.alpha[v]));
    }
    atomic_write(&dir.join("alphas.tsv"), &alphas)?;

    let mut trace = String::from("iteration\tobjective\n");
    for &(it, f) in &m.objective_trace {
        trace.push_str(&format!("{it}\t{f:.16e}\n"));
    }
    atomic_write(&dir.join("trace.tsv"), &trace)?;

    let mut w_header = factor_header(m.rank);
    w_header[0] = "patient".to_string();
    let w_text = table::render(
        &w_header,
        archived
            .patient_labels
            .iter()
            .zip(m.w.rows())
            .map(|(l, row)| (l.as_str(), row.to_vec())),
    );
    atomic_write(&dir.join("W.tsv"), &w_text)?;

    for (v, s) in archived.schema.sources.iter().enumerate() {
        let h_text = table::render(
            &factor_header(m.rank),
            s.col_labels
                .iter()
                .zip(m.h[v].rows())
                .map(|(l, row)| (l.as_str(), row.to_vec())),
        );
        atomic_write(&dir.join(format!("H_{}.tsv", s.name)), &h_text)?;

        let b_header = vec!["entity".to_string(), "bias".to_string()];
        let b_text = table::render(
            &b_header,
            s.col_labels
                .iter()
                .zip(m.b[v].iter())
                .map(|(l, &x)| (l.as_str(), vec![x])),
        );
        atomic_write(&dir.join(format!("b_{}.tsv", s.name)), &b_text)?;
    }
    Ok(())
}

fn read_table(dir: &Path, file: &str, context: &str) -> Result<table::Table> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(Error::Archive(format!("missing {context} ({file})")));
    }
    let contents = read_to_string(&path)?;
    table::parse_str(path.display(), &contents)
}

fn to_matrix(t: &table::Table, rank: usize, context: &str) -> Result<Array2<f64>> {
    if t.header.len() != rank + 1 {
        return Err(Error::Archive(format!(
            "{context} has {} value columns, expected {rank}",
            t.header.len() - 1
        )));
    }
    let n = t.row_labels.len();
    let mut out = Array2::zeros((n, rank));
    for (i, row) in t.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

pub fn read_model(dir: &Path) -> Result<ArchivedModel> {
    let version_path = dir.join("version");
    let version_raw = read_to_string(&version_path)?;
    let version = trim_line(version_raw.trim_end_matches('\n'));
    if version != ARCHIVE_VERSION {
        return Err(Error::Version(format!(
            "archive is {version:?}, this build reads {ARCHIVE_VERSION:?}"
        )));
    }

    let config_text = read_to_string(&dir.join("config.toml"))?;
    let config: SolverConfig = toml::from_str(&config_text)
        .map_err(|e| Error::Archive(format!("config.toml: {e}")))?;

    let meta_text = read_to_string(&dir.join("model.toml"))?;
    let meta: ModelMeta =
        toml::from_str(&meta_text).map_err(|e| Error::Archive(format!("model.toml: {e}")))?;

    let alphas_path = dir.join("alphas.tsv");
    let alphas_text = read_to_string(&alphas_path)?;
    let mut alpha = Vec::new();
    let mut names: Vec<(String, Divergence)> = Vec::new();
    for (i, raw) in alphas_text.lines().enumerate().skip(1) {
        let line = trim_line(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(alphas_path.display(), i + 1, "expected source, divergence, alpha"));
        }
        let divergence = Divergence::from_str(fields[1])
            .map_err(|e| Error::parse(alphas_path.display(), i + 1, e.to_string()))?;
        let a: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(alphas_path.display(), i + 1, format!("cannot parse alpha {:?}", fields[2])))?;
        names.push((fields[0].to_string(), divergence));
        alpha.push(a);
    }
    if names.is_empty() {
        return Err(Error::Archive("alphas.tsv lists no sources".into()));
    }

    let trace_path = dir.join("trace.tsv");
    let trace_text = read_to_string(&trace_path)?;
    let mut objective_trace = Vec::new();
    for (i, raw) in trace_text.lines().enumerate().skip(1) {
        let line = trim_line(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(trace_path.display(), i + 1, "expected iteration, objective"));
        }
        let it: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(trace_path.display(), i + 1, format!("cannot parse iteration {:?}", fields[0])))?;
        let f: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(trace_path.display(), i + 1, format!("cannot parse objective {:?}", fields[1])))?;
        objective_trace.push((it, f));
    }

    let w_table = read_table(dir, "W.tsv", "loading table")?;
    let w = to_matrix(&w_table, meta.rank, "W.tsv")?;
    if w.nrows() != meta.n_patients {
        return Err(Error::Archive(format!(
            "W.tsv has {} rows but model.toml declares {} patients",
            w.nrows(),
            meta.n_patients
        )));
    }

    let mut h = Vec::with_capacity(names.len());
    let mut b = Vec::with_capacity(names.len());
    let mut schema_sources = Vec::with_capacity(names.len());
    for (name, divergence) in &names {
        let h_table = read_table(dir, &format!("H_{name}.tsv"), &format!("factor table for source {name:?}"))?;
        let h_v = to_matrix(&h_table, meta.rank, &format!("H_{name}.tsv"))?;

        let b_table = read_table(dir, &format!("b_{name}.tsv"), &format!("bias table for source {name:?}"))?;
        let b_v_mat = to_matrix(&b_table, 1, &format!("b_{name}.tsv"))?;
        if b_table.row_labels != h_table.row_labels {
            return Err(Error::Archive(format!(
                "bias and factor tables for source {name:?} list different entities"
            )));
        }
        let b_v: Array1<f64> = b_v_mat.column(0).to_owned();

        schema_sources.push(SourceSchema {
            name: name.clone(),
            divergence: *divergence,
            col_labels: h_table.row_labels.clone(),
        });
        h.push(h_v);
        b.push(b_v);
    }

    let model = FactorModel {
        w,
        h,
        b,
        alpha,
        eta: meta.eta,
        rank: meta.rank,
        mode: meta.mode,
        objective_trace,
    };
    Ok(ArchivedModel {
        model,
        schema: CollectionSchema {
            sources: schema_sources,
        },
        patient_labels: w_table.row_labels,
        config,
    })
}
