//! Serialization: vectors as CSV and length-prefixed binary, reports as
//! key-sorted JSON with 17 significant digits, and CSV tables for traces,
//! sweeps, curves and energy evaluations.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::absgrad::DescentTrace;
use crate::error::{Error, Result};

/// Writes `index,value` rows.
pub fn write_vector_csv(path: &Path, values: &[f64]) -> Result<()> {
    let bytes = csv_bytes(
        &["index", "value"],
        values.iter().enumerate().map(|(i, x)| vec![i.to_string(), format_float(*x)]),
    )?;
    write_atomic(path, &bytes)
}

/// Reads `index,value` rows; indices must be `0..n` in order.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse(format!("{}: row {row} has {} fields", path.display(), record.len())));
        }
        let index: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("{}: row {row}: {e}", path.display())))?;
        if index != row {
            return Err(Error::Parse(format!("{}: expected index {row}, found {index}", path.display())));
        }
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("{}: row {row}: {e}", path.display())))?;
        if !value.is_finite() {
            return Err(Error::Parse(format!("{}: row {row}: non-finite value", path.display())));
        }
        out.push(value);
    }
    Ok(out)
}

/// Little-endian `u64` length followed by little-endian `f64` values.
pub fn encode_vector(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * values.len());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for x in values {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_vector(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 8 {
        return Err(Error::Parse("binary vector shorter than its length prefix".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("eight bytes")) as usize;
    let body = &bytes[8..];
    if body.len() != len.saturating_mul(8) {
        return Err(Error::Parse(format!("binary vector: prefix says {len} values, found {} bytes", body.len())));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect())
}

pub fn write_vector_bin(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, encode_vector(values))?;
    Ok(())
}

pub fn read_vector_bin(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_vector(&bytes)
}

/// Shortest round-trip decimal form, used in CSV output.
pub fn format_float(x: f64) -> String {
    format!("{x}")
}

/// Renders any serializable value as pretty JSON with sorted keys and every
/// non-integer number written with 17 significant digits.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                let x = n.as_f64().expect("finite number");
                out.push_str(&format!("{x:.16e}"));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("string"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Parse(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_canonical_json(value)?.as_bytes())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// `iter,F,grad,step`.
pub fn trace_csv(trace: &DescentTrace) -> Result<Vec<u8>> {
    csv_bytes(
        &["iter", "F", "grad", "step"],
        trace.rows.iter().map(|r| {
            vec![
                r.iter.to_string(),
                format_float(r.energy),
                format_float(r.gradient),
                format_float(r.step),
            ]
        }),
    )
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub radius: usize,
    pub c_disp: f64,
    pub c_r: f64,
    pub c_grad: f64,
    pub c_lap: f64,
}

/// `R,C_disp,C_r,C_grad,C_lap`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["R", "C_disp", "C_r", "C_grad", "C_lap"],
        rows.iter().map(|r| {
            vec![
                r.radius.to_string(),
                format_float(r.c_disp),
                format_float(r.c_r),
                format_float(r.c_grad),
                format_float(r.c_lap),
            ]
        }),
    )
}

/// One point of a modulus curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub argument: f64,
    pub estimate: f64,
    pub starts: usize,
    pub spread: f64,
}

/// `argument,estimate,starts,spread`.
pub fn curve_csv(rows: &[CurveRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["argument", "estimate", "starts", "spread"],
        rows.iter().map(|r| {
            vec![
                format_float(r.argument),
                format_float(r.estimate),
                r.starts.to_string(),
                format_float(r.spread),
            ]
        }),
    )
}

/// A tagged energy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyRow {
    pub tag: String,
    pub r: f64,
    pub p: f64,
    pub value: f64,
}

/// `tag,r,p,value`, with `r = ∞` written as `inf`.
pub fn energy_csv(rows: &[EnergyRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["tag", "r", "p", "value"],
        rows.iter().map(|e| {
            vec![
                e.tag.clone(),
                exponent_text(e.r),
                format_float(e.p),
                format_float(e.value),
            ]
        }),
    )
}

/// `inf` for `∞`, the number otherwise.
pub fn exponent_text(r: f64) -> String {
    if r.is_infinite() {
        "inf".into()
    } else {
        format_float(r)
    }
}

/// Parses an exponent, accepting `inf` and `infinity`.
pub fn parse_exponent(text: &str) -> Result<f64> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("exponent {text:?}: {e}"))),
    }
}

/// Serde adapter for exponents that may be infinite: a JSON number or the
/// string `"inf"`.
pub mod exponent {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*r)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<f64, E> {
                Ok(x)
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<f64, E> {
                Ok(x as f64)
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<f64, E> {
                super::parse_exponent(s).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[test]
    fn binary_round_trip() {
        let v = vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300];
        let bytes = encode_vector(&v);
        assert_eq!(&bytes[..8], &4u64.to_le_bytes());
        assert_eq!(decode_vector(&bytes).unwrap(), v);
        assert!(decode_vector(&bytes[..12]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let v = vec![0.1, -2.5e-17, 3.0];
        write_vector_csv(&path, &v).unwrap();
        assert_eq!(read_vector_csv(&path).unwrap(), v);
    }

    #[test]
    fn canonical_json_sorts_keys_and_fixes_digits() {
        let v = serde_json::json!({"b": 1, "a": [0.1, 2.0], "c": {"z": true, "y": null}});
        let s = to_canonical_json(&v).unwrap();
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.0000000000000000e0"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn exponent_accepts_inf() {
        #[derive(Deserialize, Serialize)]
        struct E {
            #[serde(with = "exponent")]
            r: f64,
        }
        let e: E = serde_json::from_str(r#"{"r": "inf"}"#).unwrap();
        assert!(e.r.is_infinite());
        let e: E = serde_json::from_str(r#"{"r": 3}"#).unwrap();
        assert_eq!(e.r, 3.0);
        assert_eq!(serde_json::to_string(&E { r: f64::INFINITY }).unwrap(), r#"{"r":"inf"}"#);
        assert!(parse_exponent("x").is_err());
    }
}
