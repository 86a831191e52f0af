//! Delimited-text dataset layout.
//!
//! A dataset directory contains:
//!
//! * `items_{kind}.tsv` per kind: UTF-8, tab-separated, header row of
//!   attribute names, first column the item id. Empty cells are missing
//!   values.
//! * `interactions.tsv`: columns `user_id  kind  item_id  rating` (header
//!   optional). Ratings are integer stars 1..=5 by default, or 0/1 labels
//!   when the manifest declares `"rating_scale": "binary"`.
//! * `users.tsv` (optional): same layout as an item file.
//! * `manifest.json` (optional): kind order, rating scale, expected counts,
//!   and per-attribute kind/vocabulary overrides. Anything absent is
//!   auto-inferred (vocabularies from the train split at schema
//!   finalization).

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    binarize_rating, AttrEncoding, AttrSpec, AttrValue, Catalog, FeatureSchema, HeteroDataset,
    Interaction, ItemRecord, Split, UserRecord,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RatingScale {
    #[default]
    Stars,
    Binary,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Manifest {
    version: u32,
    kinds: Option<Vec<String>>,
    rating_scale: RatingScale,
    counts: Option<ManifestCounts>,
    schemas: Option<HashMap<String, Vec<ManifestAttr>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestCounts {
    #[serde(skip_serializing_if = "Option::is_none")]
    users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interactions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    items: Option<HashMap<String, usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestAttr {
    name: String,
    kind: String, // "categorical" | "numeric"
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
}

fn load_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Load {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

struct RawTable {
    header: Vec<String>,
    // id, cells
    rows: Vec<(String, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| load_err(path, 0, format!("cannot read: {e}")))?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| load_err(path, 0, "empty file"))?;
    let header: Vec<String> = header_line.split('\t').map(str::to_string).collect();
    if header.len() < 2 {
        return Err(load_err(path, 1, "header needs an id column and at least one attribute"));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split('\t').map(str::to_string).collect::<Vec<_>>();
        if cells.len() != header.len() {
            return Err(load_err(
                path,
                ln + 1,
                format!("{} columns, header has {}", cells.len(), header.len()),
            ));
        }
        let id = cells.remove(0);
        rows.push((id, cells));
    }
    Ok(RawTable {
        header: header[1..].to_vec(),
        rows,
    })
}

/// Infer each column's attribute kind: numeric iff every non-empty cell
/// parses as a float.
fn infer_schema(table: &RawTable, overrides: Option<&Vec<ManifestAttr>>) -> Result<FeatureSchema> {
    let mut attrs = Vec::with_capacity(table.header.len());
    for (col, name) in table.header.iter().enumerate() {
        if let Some(list) = overrides {
            if let Some(o) = list.iter().find(|a| &a.name == name) {
                let spec = match o.kind.as_str() {
                    "numeric" => AttrSpec::numeric(name),
                    "categorical" => match &o.levels {
                        Some(levels) => AttrSpec::categorical_with_levels(name, levels.clone()),
                        None => AttrSpec::categorical(name),
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "attribute '{name}': unknown kind '{other}'"
                        )))
                    }
                };
                attrs.push(spec);
                continue;
            }
        }
        let numeric = table
            .rows
            .iter()
            .filter(|(_, cells)| !cells[col].is_empty())
            .all(|(_, cells)| cells[col].parse::<f64>().is_ok());
        attrs.push(if numeric {
            AttrSpec::numeric(name)
        } else {
            AttrSpec::categorical(name)
        });
    }
    Ok(FeatureSchema::new(attrs))
}

fn materialize(table: RawTable, schema: &FeatureSchema) -> Vec<(String, Vec<AttrValue>)> {
    table
        .rows
        .into_iter()
        .map(|(id, cells)| {
            let attrs = cells
                .into_iter()
                .zip(&schema.attrs)
                .map(|(cell, spec)| {
                    if cell.is_empty() {
                        AttrValue::Missing
                    } else {
                        match spec.encoding {
                            AttrEncoding::Numeric { .. } => cell
                                .parse::<f64>()
                                .map(AttrValue::Numeric)
                                .unwrap_or(AttrValue::Missing),
                            AttrEncoding::Categorical { .. } => AttrValue::Categorical(cell),
                        }
                    }
                })
                .collect();
            (id, attrs)
        })
        .collect()
}

fn discover_kinds(root: &Path) -> Result<Vec<String>> {
    let mut kinds = Vec::new();
    for entry in fs::read_dir(root)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_prefix("items_").and_then(|s| s.strip_suffix(".tsv")) {
            kinds.push(stem.to_string());
        }
    }
    kinds.sort();
    if kinds.is_empty() {
        return Err(Error::Data(format!(
            "no items_*.tsv files under {}",
            root.display()
        )));
    }
    Ok(kinds)
}

/// Load a dataset directory. Kind order comes from the manifest when given,
/// otherwise from the sorted `items_*.tsv` file names.
pub fn load_dir(root: impl AsRef<Path>) -> Result<HeteroDataset> {
    let root = root.as_ref();
    let manifest_path = root.join("manifest.json");
    let manifest: Manifest = if manifest_path.exists() {
        serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .map_err(|e| load_err(&manifest_path, 0, e.to_string()))?
    } else {
        Manifest::default()
    };

    let kinds = match &manifest.kinds {
        Some(k) => k.clone(),
        None => discover_kinds(root)?,
    };

    let mut catalogs = Vec::with_capacity(kinds.len());
    let mut item_index: Vec<HashMap<String, u32>> = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        let path = root.join(format!("items_{kind}.tsv"));
        let table = read_table(&path)?;
        let overrides = manifest.schemas.as_ref().and_then(|s| s.get(kind));
        let schema = infer_schema(&table, overrides)?;
        let records = materialize(table, &schema);
        let mut index = HashMap::with_capacity(records.len());
        let items: Vec<ItemRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, (id, attrs))| {
                index.insert(id.clone(), i as u32);
                ItemRecord { id, attrs }
            })
            .collect();
        if items.is_empty() {
            return Err(load_err(&path, 0, "no items"));
        }
        item_index.push(index);
        catalogs.push(Catalog { schema, items });
    }

    // users.tsv is optional; without it users are collected from the
    // interaction file in order of first appearance
    let users_path = root.join("users.tsv");
    let (mut users, user_schema, mut user_index) = if users_path.exists() {
        let table = read_table(&users_path)?;
        let overrides = manifest.schemas.as_ref().and_then(|s| s.get("users"));
        let schema = infer_schema(&table, overrides)?;
        let records = materialize(table, &schema);
        let mut index = HashMap::with_capacity(records.len());
        let users: Vec<UserRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, (id, attrs))| {
                index.insert(id.clone(), i as u32);
                UserRecord { id, attrs }
            })
            .collect();
        (users, schema, index)
    } else {
        (Vec::new(), FeatureSchema::new(vec![]), HashMap::new())
    };
    let users_from_file = !users.is_empty();

    let inter_path = root.join("interactions.tsv");
    let text = fs::read_to_string(&inter_path)
        .map_err(|e| load_err(&inter_path, 0, format!("cannot read: {e}")))?;
    let kind_index: HashMap<&str, u16> = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as u16))
        .collect();
    let mut interactions = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 4 {
            return Err(load_err(
                &inter_path,
                ln + 1,
                format!("{} columns, expected 4", cells.len()),
            ));
        }
        if ln == 0 && cells[3].parse::<i64>().is_err() {
            continue; // header row
        }
        let user = match user_index.get(cells[0]) {
            Some(&u) => u,
            None if !users_from_file => {
                let u = users.len() as u32;
                users.push(UserRecord {
                    id: cells[0].to_string(),
                    attrs: vec![],
                });
                user_index.insert(cells[0].to_string(), u);
                u
            }
            None => {
                return Err(load_err(
                    &inter_path,
                    ln + 1,
                    format!("unknown user id '{}'", cells[0]),
                ))
            }
        };
        let kind = *kind_index.get(cells[1]).ok_or_else(|| {
            load_err(&inter_path, ln + 1, format!("unknown kind '{}'", cells[1]))
        })?;
        let item = *item_index[kind as usize].get(cells[2]).ok_or_else(|| {
            load_err(
                &inter_path,
                ln + 1,
                format!("unknown item id '{}' of kind '{}'", cells[2], cells[1]),
            )
        })?;
        let rating: i64 = cells[3].parse().map_err(|_| {
            load_err(&inter_path, ln + 1, format!("bad rating '{}'", cells[3]))
        })?;
        let (raw_rating, label) = match manifest.rating_scale {
            RatingScale::Stars => {
                let stars = u8::try_from(rating)
                    .ok()
                    .filter(|r| (1..=5).contains(r))
                    .ok_or_else(|| {
                        load_err(&inter_path, ln + 1, format!("rating {rating} outside 1..=5"))
                    })?;
                (Some(stars), binarize_rating(stars)?)
            }
            RatingScale::Binary => match rating {
                0 => (None, false),
                1 => (None, true),
                other => {
                    return Err(load_err(
                        &inter_path,
                        ln + 1,
                        format!("binary rating {other} outside {{0, 1}}"),
                    ))
                }
            },
        };
        interactions.push(Interaction {
            user,
            kind,
            item,
            raw_rating,
            label,
            split: Split::Train,
        });
    }
    if interactions.is_empty() {
        return Err(load_err(&inter_path, 0, "no interactions"));
    }

    let ds = HeteroDataset {
        kinds: kinds.clone(),
        users,
        user_schema,
        catalogs,
        interactions,
        cold_users: vec![],
    };
    ds.validate()?;

    if let Some(counts) = &manifest.counts {
        if let Some(expect) = counts.users {
            if ds.num_users() != expect {
                return Err(Error::Data(format!(
                    "manifest expects {expect} users, found {}",
                    ds.num_users()
                )));
            }
        }
        if let Some(expect) = counts.interactions {
            if ds.interactions.len() != expect {
                return Err(Error::Data(format!(
                    "manifest expects {expect} interactions, found {}",
                    ds.interactions.len()
                )));
            }
        }
        if let Some(items) = &counts.items {
            for (kind, &expect) in items {
                let k = kinds
                    .iter()
                    .position(|n| n == kind)
                    .ok_or_else(|| Error::Data(format!("manifest counts unknown kind '{kind}'")))?;
                if ds.catalogs[k].items.len() != expect {
                    return Err(Error::Data(format!(
                        "manifest expects {expect} '{kind}' items, found {}",
                        ds.catalogs[k].items.len()
                    )));
                }
            }
        }
    }
    Ok(ds)
}

/// Load the public book/music/movie dataset layout: `load_dir` plus a check
/// that exactly those three kinds are present.
pub fn load_douban(root: impl AsRef<Path>) -> Result<HeteroDataset> {
    let ds = load_dir(root)?;
    let expected = ["book", "movie", "music"];
    let mut got: Vec<&str> = ds.kinds.iter().map(String::as_str).collect();
    got.sort();
    if got != expected {
        return Err(Error::Data(format!(
            "expected kinds {expected:?}, found {:?}",
            ds.kinds
        )));
    }
    Ok(ds)
}

fn attr_cell(v: &AttrValue) -> String {
    match v {
        AttrValue::Missing => String::new(),
        AttrValue::Numeric(x) => format!("{x}"),
        AttrValue::Categorical(s) => s.clone(),
    }
}

fn write_table(
    path: &Path,
    schema: &FeatureSchema,
    rows: impl Iterator<Item = (String, Vec<String>)>,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(schema.attrs.iter().map(|a| a.name.clone()));
    writeln!(f, "{}", header.join("\t"))?;
    for (id, cells) in rows {
        let mut line = vec![id];
        line.extend(cells);
        writeln!(f, "{}", line.join("\t"))?;
    }
    Ok(())
}

/// Write a dataset in the directory layout `load_dir` reads. Split tags are
/// not persisted (splitting is a seeded runtime operation).
pub fn write_dataset(ds: &HeteroDataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root)?;

    for (k, catalog) in ds.catalogs.iter().enumerate() {
        let path = root.join(format!("items_{}.tsv", ds.kinds[k]));
        write_table(
            &path,
            &catalog.schema,
            catalog
                .items
                .iter()
                .map(|it| (it.id.clone(), it.attrs.iter().map(attr_cell).collect())),
        )?;
    }

    if !ds.user_schema.attrs.is_empty() {
        write_table(
            &root.join("users.tsv"),
            &ds.user_schema,
            ds.users
                .iter()
                .map(|u| (u.id.clone(), u.attrs.iter().map(attr_cell).collect())),
        )?;
    }

    let with_stars = ds.interactions.iter().filter(|i| i.raw_rating.is_some()).count();
    let scale = if with_stars == ds.interactions.len() {
        RatingScale::Stars
    } else if with_stars == 0 {
        RatingScale::Binary
    } else {
        return Err(Error::Data(
            "cannot write a dataset mixing star ratings and bare labels".into(),
        ));
    };

    let mut f = fs::File::create(root.join("interactions.tsv"))?;
    writeln!(f, "user_id\tkind\titem_id\trating")?;
    for i in &ds.interactions {
        let rating = match (scale, i.raw_rating) {
            (RatingScale::Stars, Some(r)) => r as i64,
            (RatingScale::Binary, None) => i.label as i64,
            _ => unreachable!("scale decided above"),
        };
        writeln!(
            f,
            "{}\t{}\t{}\t{}",
            ds.users[i.user as usize].id,
            ds.kinds[i.kind as usize],
            ds.catalogs[i.kind as usize].items[i.item as usize].id,
            rating
        )?;
    }

    let manifest = Manifest {
        version: 1,
        kinds: Some(ds.kinds.clone()),
        rating_scale: scale,
        counts: Some(ManifestCounts {
            users: Some(ds.num_users()),
            interactions: Some(ds.interactions.len()),
            items: Some(
                ds.kinds
                    .iter()
                    .zip(&ds.catalogs)
                    .map(|(k, c)| (k.clone(), c.items.len()))
                    .collect(),
            ),
        }),
        schemas: Some(
            ds.kinds
                .iter()
                .zip(&ds.catalogs)
                .map(|(k, c)| (k.clone(), manifest_attrs(&c.schema)))
                .chain(
                    (!ds.user_schema.attrs.is_empty())
                        .then(|| ("users".to_string(), manifest_attrs(&ds.user_schema))),
                )
                .collect(),
        ),
    };
    fs::write(
        root.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn manifest_attrs(schema: &FeatureSchema) -> Vec<ManifestAttr> {
    schema
        .attrs
        .iter()
        .map(|a| ManifestAttr {
            name: a.name.clone(),
            kind: match a.encoding {
                AttrEncoding::Categorical { .. } => "categorical".into(),
                AttrEncoding::Numeric { .. } => "numeric".into(),
            },
            levels: None, // vocabularies are re-inferred from the train split
        })
        .collect()
}
