//! Line-oriented `name key=value ...` records.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl fmt::Display) -> Self {
        let v = value.to_string();
        // keep one record per line and one token per value
        let v = if v.contains(char::is_whitespace) {
            format!("\"{}\"", v.replace('"', "'").replace('\n', " "))
        } else {
            v
        };
        self.fields.push((key.into(), v));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
}

impl Report {
    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn find<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Parses one record line back into a [`Record`].
pub fn parse_record(line: &str) -> Option<Record> {
    let mut rest = line.trim();
    let (name, tail) = rest.split_once(' ').unwrap_or((rest, ""));
    let mut rec = Record::new(name);
    rest = tail.trim_start();
    while !rest.is_empty() {
        let (key, after) = rest.split_once('=')?;
        let (value, next) = if let Some(q) = after.strip_prefix('"') {
            let end = q.find('"')?;
            (&q[..end], &q[end + 1..])
        } else {
            after.split_once(' ').unwrap_or((after, ""))
        };
        rec.fields.push((key.to_string(), value.to_string()));
        rest = next.trim_start();
    }
    Some(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let r = Record::new("fit").field("score", "pl").field("loss", 1.5).field("note", "two words");
        let line = r.to_string();
        assert_eq!(line, "fit score=pl loss=1.5 note=\"two words\"");
        let back = parse_record(&line).unwrap();
        assert_eq!(back.get("loss"), Some("1.5"));
        assert_eq!(back.get("note"), Some("two words"));
    }
}
