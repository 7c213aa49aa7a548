//! JSON model files.
//!
//! ```json
//! {
//!   "name": "CANON2",
//!   "num_states": 2, "num_obs": 2, "num_actions_p1": 2, "num_actions_p2": 2,
//!   "kernel": [[[[[0.72, 0.08], [0.04, 0.16]], ...]]],
//!   "cost": [[[1.0, -1.0], [-1.0, 1.0]], ...],
//!   "initial_belief": [0.5, 0.5],
//!   "lyapunov": {"V": [3, 3], "h": [1, 1], "K": [0, 1], "drift_c": 1}
//! }
//! ```
//!
//! `kernel` is indexed `[x][u][v][z][y]` and `cost` `[x][u][v]`. Numbers are
//! written in shortest round-trip form, so `load(save(m)) == m` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use posg_core::model::ModelError;
use posg_core::{Dims, GameModel, LyapunovCert, RawModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Shape { path: PathBuf, field: String, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ModelError },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LyapunovFile {
    #[serde(rename = "V")]
    v: Vec<f64>,
    h: Vec<f64>,
    #[serde(rename = "K")]
    k: Vec<usize>,
    drift_c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    num_states: usize,
    num_obs: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    kernel: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    cost: Vec<Vec<Vec<f64>>>,
    initial_belief: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lyapunov: Option<LyapunovFile>,
}

struct ShapeCheck<'a> {
    path: &'a Path,
}

impl ShapeCheck<'_> {
    fn len<T>(&self, field: &str, items: &[T], want: usize) -> Result<(), ModelFileError> {
        if items.len() == want {
            Ok(())
        } else {
            Err(ModelFileError::Shape {
                path: self.path.to_path_buf(),
                field: field.to_string(),
                message: format!("expected {} entries, found {}", want, items.len()),
            })
        }
    }
}

fn to_raw(file: ModelFile, path: &Path) -> Result<RawModel, ModelFileError> {
    let dims = Dims::new(file.num_states, file.num_obs, file.num_actions_p1, file.num_actions_p2);
    let check = ShapeCheck { path };
    let mut kernel = Vec::with_capacity(dims.kernel_len());
    check.len("kernel", &file.kernel, dims.states)?;
    for (x, kx) in file.kernel.iter().enumerate() {
        check.len(&format!("kernel[{}]", x), kx, dims.actions_p1)?;
        for (u, ku) in kx.iter().enumerate() {
            check.len(&format!("kernel[{}][{}]", x, u), ku, dims.actions_p2)?;
            for (v, kv) in ku.iter().enumerate() {
                check.len(&format!("kernel[{}][{}][{}]", x, u, v), kv, dims.states)?;
                for (z, kz) in kv.iter().enumerate() {
                    check.len(&format!("kernel[{}][{}][{}][{}]", x, u, v, z), kz, dims.observations)?;
                    kernel.extend_from_slice(kz);
                }
            }
        }
    }
    let mut cost = Vec::with_capacity(dims.cost_len());
    check.len("cost", &file.cost, dims.states)?;
    for (x, cx) in file.cost.iter().enumerate() {
        check.len(&format!("cost[{}]", x), cx, dims.actions_p1)?;
        for (u, cu) in cx.iter().enumerate() {
            check.len(&format!("cost[{}][{}]", x, u), cu, dims.actions_p2)?;
            cost.extend_from_slice(cu);
        }
    }
    check.len("initial_belief", &file.initial_belief, dims.states)?;
    let lyapunov = match file.lyapunov {
        None => None,
        Some(l) => {
            check.len("lyapunov.V", &l.v, dims.states)?;
            check.len("lyapunov.h", &l.h, dims.states)?;
            Some(LyapunovCert { v: l.v, h: l.h, small_set: l.k, drift_c: l.drift_c })
        }
    };
    Ok(RawModel { name: file.name, dims, kernel, cost, initial_belief: file.initial_belief, lyapunov })
}

/// Parses model text without validating probabilities. `path` only labels
/// diagnostics.
pub fn parse_raw(text: &str, path: &Path) -> Result<RawModel, ModelFileError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelFileError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    to_raw(file, path)
}

pub fn load_raw(path: &Path) -> Result<RawModel, ModelFileError> {
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io { path: path.to_path_buf(), source })?;
    parse_raw(&text, path)
}

/// Reads and validates a model file.
pub fn load(path: &Path) -> Result<GameModel, ModelFileError> {
    let raw = load_raw(path)?;
    GameModel::new(raw).map_err(|source| ModelFileError::Invalid { path: path.to_path_buf(), source })
}

fn to_file(raw: &RawModel) -> ModelFile {
    let d = raw.dims;
    let kernel = (0..d.states)
        .map(|x| {
            (0..d.actions_p1)
                .map(|u| {
                    (0..d.actions_p2)
                        .map(|v| {
                            let s = &raw.kernel[d.slice_offset(x, u, v)..][..d.slice_len()];
                            s.chunks(d.observations).map(<[f64]>::to_vec).collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let cost = (0..d.states)
        .map(|x| {
            (0..d.actions_p1)
                .map(|u| (0..d.actions_p2).map(|v| raw.cost[d.cost_index(x, u, v)]).collect())
                .collect()
        })
        .collect();
    ModelFile {
        name: raw.name.clone(),
        num_states: d.states,
        num_obs: d.observations,
        num_actions_p1: d.actions_p1,
        num_actions_p2: d.actions_p2,
        kernel,
        cost,
        initial_belief: raw.initial_belief.clone(),
        lyapunov: raw.lyapunov.as_ref().map(|l| LyapunovFile {
            v: l.v.clone(),
            h: l.h.clone(),
            k: l.small_set.clone(),
            drift_c: l.drift_c,
        }),
    }
}

/// Pretty JSON with arrays of numbers kept on one line.
fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            out.push('[');
            for (k, i) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&i.to_string());
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, i) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, i, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, i)) in map.iter().enumerate() {
                pad(out, indent + 2);
                let _ = write!(out, "{}: ", Value::String(key.clone()));
                write_value(out, i, indent + 2);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn to_json(raw: &RawModel) -> String {
    let value = serde_json::to_value(to_file(raw)).expect("model data serializes");
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    out
}

pub fn save(model: &GameModel, path: &Path) -> std::io::Result<()> {
    fs::write(path, to_json(model.raw()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use posg_core::model::canonical_models;

    fn parse(text: &str) -> Result<RawModel, ModelFileError> {
        parse_raw(text, Path::new("test.json"))
    }

    #[test]
    fn round_trip_is_exact() {
        for m in canonical_models() {
            let text = to_json(m.raw());
            let back = GameModel::new(parse(&text).unwrap()).unwrap();
            assert_eq!(&back, &m, "{}", m.name());
        }
    }

    #[test]
    fn odd_decimals_survive() {
        let mut raw = canonical_models()[0].raw().clone();
        raw.cost[0] = 0.1 + 0.2;
        raw.cost[1] = -1.0 / 3.0;
        raw.cost[2] = 5e-324;
        let back = parse(&to_json(&raw)).unwrap();
        assert_eq!(back.cost, raw.cost);
    }

    #[test]
    fn missing_field_is_named() {
        let mut v: Value = serde_json::from_str(&to_json(canonical_models()[0].raw())).unwrap();
        v.as_object_mut().unwrap().remove("kernel");
        let err = parse(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("missing field `kernel`"), "{}", err);
    }

    #[test]
    fn wrong_shape_names_the_path() {
        let mut v: Value = serde_json::from_str(&to_json(canonical_models()[0].raw())).unwrap();
        v["kernel"][1][0][1] = serde_json::json!([[0.5, 0.5]]);
        let err = parse(&v.to_string()).unwrap_err();
        assert!(matches!(&err, ModelFileError::Shape { field, .. } if field == "kernel[1][0][1]"), "{}", err);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("{\n  \"name\": \"x\",\n  oops\n}").unwrap_err();
        match err {
            ModelFileError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{}", other),
        }
        assert!(matches!(parse("{\"name\": NaN}"), Err(ModelFileError::Parse { .. })));
    }

    #[test]
    fn negative_entry_fails_validation() {
        let mut raw = canonical_models()[0].raw().clone();
        raw.kernel[0] = -0.1;
        raw.kernel[1] += 0.1 + 0.72;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        fs::write(&p, to_json(&raw)).unwrap();
        assert!(matches!(load(&p), Err(ModelFileError::Invalid { .. })));
    }
}
