// Copyright 2026 The aggmarket Authors
// SPDX-License-Identifier: Apache-2.0

//! Profile, sensitivity and attribute-metadata files.
//!
//! Profiles and sensitivities share one CSV shape: a `user_id` column
//! followed by one column per attribute, named and ordered as in the
//! attribute list.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::client::{index_specs, AttributeSpec, Profile};
use crate::{Error, Result};

/// A rejected CSV row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedRow {
    /// 1-based line number, counting the header.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedProfiles {
    /// Valid rows, with all sensitivities zero.
    pub profiles: Vec<Profile>,
    pub dropped: Vec<DroppedRow>,
}

impl LoadedProfiles {
    pub fn drop_count(&self) -> usize {
        self.dropped.len()
    }
}

/// Reads profiles, dropping rows with missing or out-of-domain cells.
pub fn load_profiles(path: &Path, specs: &[AttributeSpec]) -> Result<LoadedProfiles> {
    let file = File::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    read_profiles(file, specs, path)
}

pub fn read_profiles<R: Read>(reader: R, specs: &[AttributeSpec], origin: &Path) -> Result<LoadedProfiles> {
    let rows = read_rows(reader, specs, origin, |spec, cell| {
        let x: i64 = cell.parse().map_err(|_| format!("`{cell}` is not an integer"))?;
        if spec.contains(x) {
            Ok(x)
        } else {
            Err(format!("{} = {x} outside [{}, {}]", spec.name, spec.min, spec.max))
        }
    })?;
    let mut out = LoadedProfiles::default();
    for row in rows {
        match row {
            Ok((user_id, values)) => out.profiles.push(Profile {
                user_id,
                sensitivities: vec![0.0; values.len()],
                values,
            }),
            Err(dropped) => {
                warn!(
                    "{}: dropped line {}: {}",
                    origin.display(),
                    dropped.line,
                    dropped.reason
                );
                out.dropped.push(dropped);
            }
        }
    }
    if out.profiles.is_empty() {
        return Err(Error::Ingestion {
            path: origin.to_path_buf(),
            reason: format!("no valid rows ({} dropped)", out.dropped.len()),
        });
    }
    ensure_unique_ids(out.profiles.iter().map(|p| p.user_id), origin)?;
    Ok(out)
}

/// Reads `λ` values keyed by user id. Every cell must be present and in `[0, 1]`.
pub fn load_sensitivities(path: &Path, specs: &[AttributeSpec]) -> Result<HashMap<u64, Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    read_sensitivities(file, specs, path)
}

pub fn read_sensitivities<R: Read>(
    reader: R,
    specs: &[AttributeSpec],
    origin: &Path,
) -> Result<HashMap<u64, Vec<f64>>> {
    let rows = read_rows(reader, specs, origin, |spec, cell| {
        let l: f64 = cell.parse().map_err(|_| format!("`{cell}` is not a number"))?;
        if (0.0..=1.0).contains(&l) {
            Ok(l)
        } else {
            Err(format!("{} sensitivity {l} outside [0, 1]", spec.name))
        }
    })?;
    let mut out = HashMap::new();
    for row in rows {
        let (user_id, lambdas) = row.map_err(|d| Error::Ingestion {
            path: origin.to_path_buf(),
            reason: format!("line {}: {}", d.line, d.reason),
        })?;
        if out.insert(user_id, lambdas).is_some() {
            return Err(Error::Ingestion {
                path: origin.to_path_buf(),
                reason: format!("duplicate user_id {user_id}"),
            });
        }
    }
    Ok(out)
}

/// Overwrites each profile's sensitivities from a table keyed by user id.
pub fn attach_sensitivities(profiles: &mut [Profile], table: &HashMap<u64, Vec<f64>>) -> Result<()> {
    for p in profiles {
        p.sensitivities = table
            .get(&p.user_id)
            .ok_or_else(|| Error::argument(format!("no sensitivities for user {}", p.user_id)))?
            .clone();
    }
    Ok(())
}

type Row<T> = std::result::Result<(u64, Vec<T>), DroppedRow>;

fn read_rows<R: Read, T>(
    reader: R,
    specs: &[AttributeSpec],
    origin: &Path,
    parse: impl Fn(&AttributeSpec, &str) -> std::result::Result<T, String>,
) -> Result<Vec<Row<T>>> {
    let mut csv = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(csv.headers()?, specs, origin)?;
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let line = record
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(i as u64 + 2, |p| p.line());
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rows.push(Err(DroppedRow {
                    line,
                    reason: e.to_string(),
                }));
                continue;
            }
        };
        rows.push(parse_record(&record, specs, &parse).map_err(|reason| DroppedRow { line, reason }));
    }
    Ok(rows)
}

fn parse_record<T>(
    record: &csv::StringRecord,
    specs: &[AttributeSpec],
    parse: &impl Fn(&AttributeSpec, &str) -> std::result::Result<T, String>,
) -> std::result::Result<(u64, Vec<T>), String> {
    if record.len() != specs.len() + 1 {
        return Err(format!("{} cells, expected {}", record.len(), specs.len() + 1));
    }
    let id_cell = &record[0];
    let user_id = id_cell
        .parse()
        .map_err(|_| format!("user_id `{id_cell}` is not a nonnegative integer"))?;
    let values = specs
        .iter()
        .zip(record.iter().skip(1))
        .map(|(spec, cell)| {
            if cell.is_empty() {
                Err(format!("missing {}", spec.name))
            } else {
                parse(spec, cell)
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok((user_id, values))
}

fn check_header(header: &csv::StringRecord, specs: &[AttributeSpec], origin: &Path) -> Result<()> {
    let expected: Vec<&str> = std::iter::once("user_id")
        .chain(specs.iter().map(|s| s.name.as_str()))
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::Format(format!(
            "{}: header [{}] does not match [{}]",
            origin.display(),
            found.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

fn ensure_unique_ids(ids: impl Iterator<Item = u64>, origin: &Path) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Ingestion {
                path: origin.to_path_buf(),
                reason: format!("duplicate user_id {id}"),
            });
        }
    }
    Ok(())
}

/// Reads a JSON list of `{name, min, max, price}` and assigns ids.
pub fn load_attribute_specs(path: &Path) -> Result<Vec<AttributeSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let specs: Vec<AttributeSpec> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    index_specs(specs)
}

pub fn write_attribute_specs(path: &Path, specs: &[AttributeSpec]) -> Result<()> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, specs)?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn write_profiles<W: Write>(writer: W, specs: &[AttributeSpec], profiles: &[Profile]) -> Result<()> {
    write_table(writer, specs, profiles, |p| {
        p.values.iter().map(i64::to_string).collect()
    })
}

pub fn write_sensitivities<W: Write>(writer: W, specs: &[AttributeSpec], profiles: &[Profile]) -> Result<()> {
    write_table(writer, specs, profiles, |p| {
        p.sensitivities.iter().map(f64::to_string).collect()
    })
}

fn write_table<W: Write>(
    writer: W,
    specs: &[AttributeSpec],
    profiles: &[Profile],
    cells: impl Fn(&Profile) -> Vec<String>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(std::iter::once("user_id").chain(specs.iter().map(|s| s.name.as_str())))?;
    for p in profiles {
        csv.write_record(std::iter::once(p.user_id.to_string()).chain(cells(p)))?;
    }
    csv.flush()?;
    Ok(())
}
