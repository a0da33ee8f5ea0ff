use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Records produced by a subcommand. Every record is a JSON object; JSON
/// output writes one object per line, CSV flattens them under a header row.
pub struct Records(pub Vec<Value>);

impl Records {
    pub fn one(v: Value) -> Self {
        Self(vec![v])
    }

    pub fn write(&self, format: Format, path: Option<&Path>) -> io::Result<()> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        };
        let mut out = BufWriter::new(sink);
        match format {
            Format::Json => {
                for r in &self.0 {
                    serde_json::to_writer(&mut out, r)?;
                    out.write_all(b"\n")?;
                }
            }
            Format::Csv => self.write_csv(&mut out)?,
        }
        out.flush()
    }

    fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = Vec::new();
        for r in &self.0 {
            for k in r.as_object().map(Map::keys).into_iter().flatten() {
                if !header.contains(k) {
                    header.push(k.clone());
                }
            }
        }
        w.write_record(&header)?;
        for r in &self.0 {
            let obj = r.as_object();
            let row = header.iter().map(|k| match obj.and_then(|o| o.get(k)) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
            });
            w.write_record(row)?;
        }
        w.flush()
    }
}
