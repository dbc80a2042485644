use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sorkin_core::io::{sig17, to_json_string};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Written next to `--out` so the payload itself stays byte-identical
/// between runs.
#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    arguments: Vec<String>,
    version: &'static str,
    started_unix: f64,
    finished_unix: f64,
    threads: usize,
    exit_code: u8,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub struct Emitter {
    pub out: Option<PathBuf>,
    pub command: &'static str,
    pub started: f64,
}

impl Emitter {
    pub fn write(&self, payload: &str, exit_code: u8) -> Result<()> {
        match &self.out {
            None => {
                print!("{payload}");
                Ok(())
            }
            Some(path) => {
                std::fs::write(path, payload)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                let meta = Sidecar {
                    command: self.command,
                    arguments: std::env::args().skip(1).collect(),
                    version: env!("CARGO_PKG_VERSION"),
                    started_unix: self.started,
                    finished_unix: unix_now(),
                    threads: rayon::current_num_threads(),
                    exit_code,
                };
                let side = sidecar_path(path);
                std::fs::write(&side, to_json_string(&meta)?)
                    .with_context(|| format!("cannot write {}", side.display()))
            }
        }
    }
}

/// A document as JSON, or as `key,value` rows with dotted keys.
pub fn render<S: Serialize>(doc: &S, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(to_json_string(doc)?),
        Format::Csv => {
            let value = serde_json::to_value(doc)?;
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"])?;
            for (k, v) in rows {
                w.write_record([k, v])?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, x)| flatten(&join(k), x, rows)),
        Value::Array(xs) => xs
            .iter()
            .enumerate()
            .for_each(|(i, x)| flatten(&join(&i.to_string()), x, rows)),
        Value::Number(n) if n.is_f64() => {
            rows.push((prefix.to_string(), sig17(n.as_f64().unwrap_or(f64::NAN))))
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// Six significant digits for terminal summaries.
pub fn short(x: f64) -> String {
    format!("{x:.6e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_flattening() {
        #[derive(Serialize)]
        struct D {
            a: f64,
            b: Vec<u32>,
            c: Option<f64>,
        }
        let text = render(
            &D {
                a: 0.5,
                b: vec![1, 2],
                c: None,
            },
            Format::Csv,
        )
        .unwrap();
        assert_eq!(
            text,
            "key,value\na,5.0000000000000000e-1\nb.0,1\nb.1,2\nc,\n"
        );
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("/tmp/r.json")),
            PathBuf::from("/tmp/r.json.meta.json")
        );
    }
}
