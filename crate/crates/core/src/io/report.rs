use std::fmt::Write as _;

/// Named scalar metrics plus free-form notes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub entries: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.entries.push((name.into(), value));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|e| e.1)
    }

    /// Aligned two-column table preceded by `#` note lines.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            writeln!(s, "# {n}").unwrap();
        }
        let width = self.entries.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
        writeln!(s, "{:<width$}  value", "metric").unwrap();
        for (name, value) in &self.entries {
            writeln!(s, "{name:<width$}  {value:.6}").unwrap();
        }
        s
    }

    /// One `name=value` line per metric, full precision.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (name, value) in &self.entries {
            writeln!(s, "{name}={value}").unwrap();
        }
        s
    }

    /// Reads `name=value` lines; other lines are ignored.
    pub fn parse_key_values(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| {
                let (k, v) = l.split_once('=')?;
                Some((k.trim().to_string(), v.trim().parse().ok()?))
            })
            .collect();
        Self {
            entries,
            notes: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        let mut r = MetricReport::default();
        r.note("poses from ground truth");
        r.push("pcd", 97.5);
        r.push("ate_rmse_m", 0.1 + 0.2);
        let kv = r.to_key_values();
        assert_eq!(kv, "pcd=97.5\nate_rmse_m=0.30000000000000004\n");
        assert_eq!(MetricReport::parse_key_values(&kv).entries, r.entries);
        let table = r.to_table();
        assert!(table.starts_with("# poses from ground truth\nmetric      value\n"));
        assert!(table.contains("pcd         97.500000\n"));
        assert_eq!(r.get("pcd"), Some(97.5));
        assert_eq!(r.get("nope"), None);
    }
}
