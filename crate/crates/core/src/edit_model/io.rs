//! JSON persistence of [`RewriteModel`]. Only integer counts are stored,
//! so a save/load round trip reproduces the model exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{Context, RewriteModel, SamplingConstants};
use super::{Glyph, ModelError};

pub const FORMAT_NAME: &str = "confusim-rewrite-model";
pub const FORMAT_VERSION: u32 = 1;

const STAR: &str = "*";
const BEGIN: &str = "^";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    position_cap: usize,
    alphabet: Vec<String>,
    constants: ConstantsFile,
    replace: Vec<ReplaceRow>,
    insert: Vec<InsertRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsFile {
    edit_counts: Vec<u32>,
    p_replacement: f64,
    p_insertion: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplaceRow {
    source: String,
    bin: usize,
    counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertRow {
    context: String,
    bin: usize,
    counts: BTreeMap<String, u64>,
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::Malformed(msg.into())
}

fn parse_letter(s: &str) -> Result<char, ModelError> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_alphabetic() => Ok(c),
        _ => Err(malformed(format!("`{s}` is not a single letter"))),
    }
}

fn parse_glyph(s: &str) -> Result<Glyph, ModelError> {
    if s == STAR {
        Ok(Glyph::Star)
    } else {
        parse_letter(s).map(Glyph::Letter)
    }
}

/// Writes `model` as pretty-printed JSON.
pub fn save_model<W: Write>(model: &RewriteModel, mut sink: W) -> Result<(), ModelError> {
    if model.alphabet.is_empty() {
        return Err(ModelError::EmptyAlphabet);
    }
    let file = ModelFile {
        format: FORMAT_NAME.to_owned(),
        version: FORMAT_VERSION,
        position_cap: model.position_cap,
        alphabet: model.alphabet.iter().map(|c| c.to_string()).collect(),
        constants: ConstantsFile {
            edit_counts: model.constants.edit_counts.clone(),
            p_replacement: model.constants.p_replacement,
            p_insertion: model.constants.p_insertion,
        },
        replace: model
            .replace
            .iter()
            .map(|((s, bin), row)| ReplaceRow {
                source: s.to_string(),
                bin: *bin,
                counts: row.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            })
            .collect(),
        insert: model
            .insert
            .iter()
            .map(|((ctx, bin), row)| InsertRow {
                context: match ctx {
                    Context::Begin => BEGIN.to_owned(),
                    Context::Letter(c) => c.to_string(),
                },
                bin: *bin,
                counts: row.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut sink, &file).map_err(|e| ModelError::Io(e.to_string()))?;
    sink.write_all(b"\n").map_err(|e| ModelError::Io(e.to_string()))
}

/// Reads and validates a model written by [`save_model`].
pub fn load_model<R: Read>(mut source: R) -> Result<RewriteModel, ModelError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| ModelError::Io(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    match value.get("format").and_then(|v| v.as_str()) {
        Some(FORMAT_NAME) => {}
        Some(other) => return Err(malformed(format!("unknown format `{other}`"))),
        None => return Err(malformed("missing `format` field")),
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed("missing or invalid `version` field"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(ModelError::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;

    let mut model = RewriteModel::new(file.position_cap)?;
    for s in &file.alphabet {
        let c = parse_letter(s)?;
        if c.to_lowercase().ne(std::iter::once(c)) {
            return Err(malformed(format!("alphabet letter `{s}` is not lowercase")));
        }
        model.alphabet.insert(c);
    }
    if model.alphabet.is_empty() {
        return Err(ModelError::EmptyAlphabet);
    }
    let in_alphabet = |c: char| {
        if model.alphabet.contains(&c) {
            Ok(())
        } else {
            Err(malformed(format!("letter `{c}` missing from alphabet")))
        }
    };
    let check_bin = |bin: usize| {
        if bin < file.position_cap {
            Ok(())
        } else {
            Err(malformed(format!(
                "bin {bin} exceeds position cap {}",
                file.position_cap
            )))
        }
    };

    let mut replace = BTreeMap::new();
    for row in &file.replace {
        let s = parse_letter(&row.source)?;
        in_alphabet(s)?;
        check_bin(row.bin)?;
        let mut counts = BTreeMap::new();
        for (t, c) in &row.counts {
            let t = parse_glyph(t)?;
            if let Glyph::Letter(l) = t {
                in_alphabet(l)?;
            }
            counts.insert(t, *c);
        }
        if replace.insert((s, row.bin), counts).is_some() {
            return Err(malformed(format!(
                "duplicate replace row ({}, {})",
                row.source, row.bin
            )));
        }
    }
    let mut insert = BTreeMap::new();
    for row in &file.insert {
        let ctx = if row.context == BEGIN {
            if row.bin != 0 {
                return Err(malformed("begin-of-word insertions must use bin 0"));
            }
            Context::Begin
        } else {
            let c = parse_letter(&row.context)?;
            in_alphabet(c)?;
            Context::Letter(c)
        };
        check_bin(row.bin)?;
        let mut counts = BTreeMap::new();
        for (t, c) in &row.counts {
            let t = parse_letter(t)?;
            in_alphabet(t)?;
            counts.insert(t, *c);
        }
        if insert.insert((ctx, row.bin), counts).is_some() {
            return Err(malformed(format!(
                "duplicate insert row ({}, {})",
                row.context, row.bin
            )));
        }
    }

    let k = &file.constants;
    if k.edit_counts.is_empty() || k.edit_counts.contains(&0) {
        return Err(malformed("edit_counts must be non-empty and positive"));
    }
    let probs_ok = (0.0..=1.0).contains(&k.p_replacement)
        && (0.0..=1.0).contains(&k.p_insertion)
        && (k.p_replacement + k.p_insertion - 1.0).abs() <= 1e-9;
    if !probs_ok {
        return Err(malformed(
            "p_replacement and p_insertion must be probabilities summing to 1",
        ));
    }
    model.replace = replace;
    model.insert = insert;
    model.constants = SamplingConstants {
        edit_counts: k.edit_counts.clone(),
        p_replacement: k.p_replacement,
        p_insertion: k.p_insertion,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit_model::{estimate_model, WordPair};

    fn sample_model() -> RewriteModel {
        estimate_model(
            &[
                WordPair::new("deliver", "delver"),
                WordPair::new("wifi", "wifie"),
                WordPair::new("ab", "xab"),
            ],
            16,
        )
        .unwrap()
    }

    fn to_string(m: &RewriteModel) -> String {
        let mut buf = Vec::new();
        save_model(m, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let m = sample_model();
        let text = to_string(&m);
        let back = load_model(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn unknown_version_rejected() {
        let text = to_string(&sample_model()).replace("\"version\": 1", "\"version\": 7");
        assert_eq!(
            load_model(text.as_bytes()),
            Err(ModelError::Version {
                found: 7,
                expected: FORMAT_VERSION
            })
        );
    }

    #[test]
    fn empty_alphabet_rejected_on_save() {
        let m = RewriteModel::new(16).unwrap();
        assert_eq!(save_model(&m, Vec::new()), Err(ModelError::EmptyAlphabet));
    }

    #[test]
    fn corrupted_files_rejected() {
        let good = to_string(&sample_model());
        assert!(matches!(
            load_model(&good.as_bytes()[..good.len() / 2]),
            Err(ModelError::Malformed(_))
        ));
        assert!(matches!(load_model("{}".as_bytes()), Err(ModelError::Malformed(_))));
        let bad_bin = good.replacen("\"bin\": 0", "\"bin\": 99", 1);
        assert!(matches!(load_model(bad_bin.as_bytes()), Err(ModelError::Malformed(_))));
        let bad_p = good.replace("\"p_insertion\": 0.1", "\"p_insertion\": 0.5");
        assert!(matches!(load_model(bad_p.as_bytes()), Err(ModelError::Malformed(_))));
        let bad_fmt = good.replace(FORMAT_NAME, "other");
        assert!(matches!(load_model(bad_fmt.as_bytes()), Err(ModelError::Malformed(_))));
    }
}
