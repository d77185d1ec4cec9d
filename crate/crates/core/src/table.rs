//! Plain CSV tables with a leading `#` timestamp line and a config-hash column.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes the table; every row gets a trailing `config_hash` cell when
    /// `config_hash` is given.
    pub fn write<W: Write>(&self, mut out: W, config_hash: Option<&str>) -> Result<()> {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated at unix time {ts}")?;
        let mut header = self.columns.join(",");
        if config_hash.is_some() {
            header.push_str(",config_hash");
        }
        writeln!(out, "{header}")?;
        for row in &self.rows {
            let mut line = row.join(",");
            if let Some(h) = config_hash {
                line.push(',');
                line.push_str(h);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_string_with_hash(&self, config_hash: Option<&str>) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, config_hash).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tables are UTF-8")
    }
}

/// Shortest round-trip decimal representation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Drops `#` comment lines, leaving the deterministic body.
pub fn body(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
