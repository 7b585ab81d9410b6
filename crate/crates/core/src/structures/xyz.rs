//! Extended-XYZ reader: count line, `key=value` comment line, then atom lines.

use std::collections::BTreeMap;

use super::{elements, insert_target, AtomicStructure, DatasetRecord, StructureError};

fn parse_error(line: usize, message: impl Into<String>) -> StructureError {
    StructureError::Parse {
        line,
        message: message.into(),
    }
}

/// Parse a float, accepting the Mathematica-style `*^` exponent found in QM9 files.
fn parse_float(token: &str) -> Option<f64> {
    let value = if token.contains("*^") {
        token.replace("*^", "e").parse().ok()?
    } else {
        token.parse().ok()?
    };
    Some(value)
}

/// Split a comment line into `key=value` pairs; values may be double-quoted.
fn comment_pairs(comment: &str) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut chars = comment.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            // bare token without a value
            continue;
        }
        chars.next();
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            for c in chars.by_ref() {
                if c == '"' {
                    break;
                }
                value.push(c);
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        pairs.push((key, value));
    }
    pairs
}

/// Parse every frame of an extended-XYZ document.
///
/// Comment-line keys that name a registered property become targets; other
/// keys are ignored except `id`, which names the record.
pub fn parse_xyz(text: &str) -> Result<Vec<DatasetRecord>, StructureError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count_line = i + 1;
        let count: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| parse_error(count_line, format!("malformed atom count {:?}", lines[i].trim())))?;
        if count == 0 {
            return Err(parse_error(count_line, "atom count must be at least 1"));
        }
        let comment = lines
            .get(i + 1)
            .ok_or_else(|| parse_error(count_line + 1, "missing comment line"))?;

        let mut targets = BTreeMap::new();
        let mut id = format!("frame{}", records.len());
        for (key, value) in comment_pairs(comment) {
            if key == "id" {
                id = value;
                continue;
            }
            if super::properties::lookup(&key).is_none() {
                continue;
            }
            let v = parse_float(&value).ok_or_else(|| {
                parse_error(count_line + 1, format!("non-numeric value for {key}: {value:?}"))
            })?;
            insert_target(&mut targets, &key, v).map_err(|m| parse_error(count_line + 1, m))?;
        }

        let mut species = Vec::with_capacity(count);
        let mut positions = Vec::with_capacity(count);
        for a in 0..count {
            let idx = i + 2 + a;
            let line_no = idx + 1;
            let line = lines
                .get(idx)
                .filter(|l| !l.trim().is_empty())
                .ok_or_else(|| {
                    parse_error(line_no, format!("expected {count} atoms, found {a}"))
                })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                return Err(parse_error(line_no, "atom line needs a symbol and 3 coordinates"));
            }
            let z = elements::atomic_number(fields[0])
                .ok_or_else(|| parse_error(line_no, format!("unknown element {:?}", fields[0])))?;
            let mut p = [0.0; 3];
            for (k, field) in fields[1..4].iter().enumerate() {
                p[k] = parse_float(field)
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_error(line_no, format!("non-numeric coordinate {field:?}")))?;
            }
            species.push(z);
            positions.push(p);
        }
        let structure = AtomicStructure::molecule(species, positions)
            .map_err(|e| parse_error(count_line, e.to_string()))?;
        records.push(DatasetRecord {
            id,
            structure,
            targets,
        });
        i += 2 + count;
    }
    Ok(records)
}
