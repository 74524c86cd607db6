//! JSON-lines records and CSV rows with a fixed float format: 17
//! significant digits in scientific notation, so output is byte-stable and
//! round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use friedrichs_core::{CMat, Complex64};

pub const NO_HASH: &str = "";

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_complex(z: Complex64) -> String {
    format!("[{},{}]", fmt_f64(z.re), fmt_f64(z.im))
}

/// One JSON object, built field by field in insertion order.
pub struct Record {
    buf: String,
}

impl Record {
    pub fn new(kind: &str, hash: &str) -> Self {
        Self { buf: format!("{{\"record\":{},\"config_hash\":{}", json_str(kind), json_str(hash)) }
    }

    fn key(mut self, k: &str) -> Self {
        self.buf.push(',');
        self.buf.push_str(&json_str(k));
        self.buf.push(':');
        self
    }

    pub fn str(self, k: &str, v: &str) -> Self {
        let mut r = self.key(k);
        r.buf.push_str(&json_str(v));
        r
    }

    pub fn num(self, k: &str, v: f64) -> Self {
        let mut r = self.key(k);
        r.buf.push_str(&fmt_f64(v));
        r
    }

    pub fn int(self, k: &str, v: i64) -> Self {
        let mut r = self.key(k);
        r.buf.push_str(&v.to_string());
        r
    }

    pub fn bool(self, k: &str, v: bool) -> Self {
        let mut r = self.key(k);
        r.buf.push_str(if v { "true" } else { "false" });
        r
    }

    pub fn complex(self, k: &str, v: Complex64) -> Self {
        let mut r = self.key(k);
        r.buf.push_str(&json_complex(v));
        r
    }

    pub fn cvec(self, k: &str, v: &[Complex64]) -> Self {
        let mut r = self.key(k);
        let items: Vec<String> = v.iter().map(|z| json_complex(*z)).collect();
        r.buf.push('[');
        r.buf.push_str(&items.join(","));
        r.buf.push(']');
        r
    }

    /// Row-major list of `[re, im]` pairs, as in model files.
    pub fn cmat(self, k: &str, m: &CMat) -> Self {
        self.cvec(k, m.as_slice())
    }

    pub fn finish(mut self) -> String {
        self.buf.push('}');
        self.buf
    }
}

pub fn csv_row(fields: &[String]) -> String {
    fields.join(",")
}

/// Destination of command output: named files in a directory, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> std::io::Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    pub fn write_lines(&self, name: &str, lines: &[String]) -> std::io::Result<()> {
        let mut text = lines.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        match &self.dir {
            Some(d) => fs::write(d.join(name), text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()
            }
        }
    }
}
