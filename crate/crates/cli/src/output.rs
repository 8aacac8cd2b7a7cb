//! CSV tables whose rows carry the config hash and seed.

use std::path::Path;

use anyhow::{Context, Result};

#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    hash: String,
    seed: u64,
}

impl Table {
    pub fn new(columns: &[&str], hash: &str, seed: u64) -> Self {
        let mut header = vec!["config_hash".to_string(), "seed".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Self {
            header,
            rows: Vec::new(),
            hash: hash.to_string(),
            seed,
        }
    }

    pub fn push(&mut self, fields: Vec<String>) {
        assert_eq!(fields.len() + 2, self.header.len(), "row width");
        let mut row = vec![self.hash.clone(), self.seed.to_string()];
        row.extend(fields);
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// `NA` for missing values.
pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_prefixed_and_quoted() {
        let mut t = Table::new(&["a", "b"], "abc", 7);
        t.push(vec!["1".into(), "x,y".into()]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "config_hash,seed,a,b\nabc,7,1,\"x,y\"\n");
    }
}
