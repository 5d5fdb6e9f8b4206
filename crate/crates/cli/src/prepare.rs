//! Cleaning recipes for the five public benchmark datasets. Raw files must be
//! downloaded by hand; nothing is fetched.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

#[derive(Debug, Clone, Copy)]
enum Layout {
    /// Comma separated with a header row.
    CsvHeader,
    /// Comma separated without a header; names come from the recipe.
    CsvNoHeader,
    /// Whitespace separated; lines with the wrong field count are skipped.
    Whitespace,
}

#[derive(Debug)]
pub struct Recipe {
    pub name: &'static str,
    pub url: &'static str,
    pub files: &'static str,
    layout: Layout,
    columns: &'static [&'static str],
    drop: &'static [&'static str],
    drop_missing: bool,
    pub rows: usize,
    pub cols: usize,
}

const FLARE: &[&str] = &[
    "zurich_class",
    "spot_size",
    "spot_distribution",
    "activity",
    "evolution",
    "previous_activity",
    "historically_complex",
    "became_complex",
    "area",
    "largest_spot_area",
    "c_flares",
    "m_flares",
    "x_flares",
];

const TUMOR: &[&str] = &[
    "class",
    "age",
    "sex",
    "histologic_type",
    "degree_of_diffe",
    "bone",
    "bone_marrow",
    "lung",
    "pleura",
    "peritoneum",
    "liver",
    "brain",
    "skin",
    "neck",
    "supraclavicular",
    "axillar",
    "mediastinum",
    "abdominal",
];

const LYMPH: &[&str] = &[
    "class",
    "lymphatics",
    "block_of_affere",
    "bl_of_lymph_c",
    "bl_of_lymph_s",
    "by_pass",
    "extravasates",
    "regeneration_of",
    "early_uptake_in",
    "lym_nodes_dimin",
    "lym_nodes_enlar",
    "changes_in_lym",
    "defect_in_node",
    "changes_in_node",
    "changes_in_stru",
    "special_forms",
    "dislocation_of",
    "exclusion_of_no",
    "no_of_nodes_in",
];

pub const RECIPES: &[Recipe] = &[
    Recipe {
        name: "solar-flare",
        url: "https://archive.ics.uci.edu/dataset/89/solar+flare",
        files: "flare.data1 and flare.data2, both passed with --raw (323 + 1066 rows)",
        layout: Layout::Whitespace,
        columns: FLARE,
        drop: &["c_flares", "m_flares", "x_flares"],
        drop_missing: false,
        rows: 1389,
        cols: 10,
    },
    Recipe {
        name: "thyroid",
        url: "https://archive.ics.uci.edu/dataset/915/differentiated+thyroid+cancer+recurrence",
        files: "Thyroid_Diff.csv",
        layout: Layout::CsvHeader,
        columns: &[],
        drop: &["Age", "Recurred"],
        drop_missing: false,
        rows: 383,
        cols: 15,
    },
    Recipe {
        name: "primary-tumor",
        url: "https://archive.ics.uci.edu/dataset/83/primary+tumor",
        files: "primary-tumor.data",
        layout: Layout::CsvNoHeader,
        columns: TUMOR,
        drop: &["class"],
        drop_missing: true,
        rows: 132,
        cols: 17,
    },
    Recipe {
        name: "lymphography",
        url: "https://archive.ics.uci.edu/dataset/63/lymphography",
        files: "lymphography.data",
        layout: Layout::CsvNoHeader,
        columns: LYMPH,
        drop: &["class"],
        drop_missing: false,
        rows: 148,
        cols: 18,
    },
    Recipe {
        name: "diabetes",
        url: "https://archive.ics.uci.edu/dataset/529/early+stage+diabetes+risk+prediction+dataset",
        files: "diabetes_data_upload.csv",
        layout: Layout::CsvHeader,
        columns: &[],
        drop: &["Age", "class"],
        drop_missing: false,
        rows: 520,
        cols: 15,
    },
];

pub fn recipe(name: &str) -> anyhow::Result<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name).with_context(|| {
        let names: Vec<&str> = RECIPES.iter().map(|r| r.name).collect();
        format!("unknown dataset {name:?}; known: {}", names.join(", "))
    })
}

fn read_raw(recipe: &Recipe, path: &Path) -> anyhow::Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    match recipe.layout {
        Layout::Whitespace => {
            let names: Vec<String> = recipe.columns.iter().map(|s| s.to_string()).collect();
            let mut rows = Vec::new();
            let mut skipped = 0;
            for line in BufReader::new(file).lines() {
                let fields: Vec<String> = line?.split_whitespace().map(str::to_string).collect();
                if fields.len() == names.len() {
                    rows.push(fields);
                } else if !fields.is_empty() {
                    skipped += 1;
                }
            }
            if skipped > 0 {
                log::info!("{}: skipped {skipped} line(s) that are not data rows", path.display());
            }
            Ok((names, rows))
        }
        Layout::CsvHeader | Layout::CsvNoHeader => {
            let header = matches!(recipe.layout, Layout::CsvHeader);
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(header)
                .trim(csv::Trim::All)
                .from_reader(file);
            let names: Vec<String> = if header {
                rdr.headers()?.iter().map(str::to_string).collect()
            } else {
                recipe.columns.iter().map(|s| s.to_string()).collect()
            };
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec.with_context(|| format!("reading {}", path.display()))?;
                if rec.len() != names.len() {
                    bail!("{}: row with {} fields, expected {}", path.display(), rec.len(), names.len());
                }
                rows.push(rec.iter().map(str::to_string).collect());
            }
            Ok((names, rows))
        }
    }
}

/// Applies the recipe to the raw files and writes a cleaned CSV with a
/// header. Returns `(rows, columns)` written. A shape different from the
/// published one is reported as a warning only.
pub fn prepare(recipe: &Recipe, raw: &[PathBuf], out: &Path) -> anyhow::Result<(usize, usize)> {
    if raw.is_empty() {
        bail!("no raw file given; {} expects {} from {}", recipe.name, recipe.files, recipe.url);
    }
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for path in raw {
        let (n, r) = read_raw(recipe, path)?;
        match &names {
            Some(prev) if *prev != n => bail!("{} has different columns from the first file", path.display()),
            Some(_) => {}
            None => names = Some(n),
        }
        rows.extend(r);
    }
    let names = names.expect("at least one file read");
    for d in recipe.drop {
        if !names.iter().any(|n| n == d) {
            bail!("column {d:?} not found in the raw data");
        }
    }
    let keep: Vec<usize> = (0..names.len()).filter(|&j| !recipe.drop.contains(&names[j].as_str())).collect();
    let before = rows.len();
    if recipe.drop_missing {
        rows.retain(|row: &Vec<String>| keep.iter().all(|&j| row[j] != "?" && !row[j].is_empty()));
    }
    if before != rows.len() {
        log::info!("dropped {} row(s) with missing values", before - rows.len());
    }
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(keep.iter().map(|&j| &names[j]))?;
    for row in &rows {
        w.write_record(keep.iter().map(|&j| &row[j]))?;
    }
    w.flush()?;
    let shape = (rows.len(), keep.len());
    if shape != (recipe.rows, recipe.cols) {
        log::warn!(
            "{}: cleaned data is {}×{}, the published shape is {}×{}; the raw files may differ from the ones expected ({})",
            recipe.name,
            shape.0,
            shape.1,
            recipe.rows,
            recipe.cols,
            recipe.files
        );
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tumor_recipe_drops_class_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("primary-tumor.data");
        let line = |first: &str| {
            let mut v = vec![first.to_string()];
            v.extend((0..17).map(|i| (i % 3 + 1).to_string()));
            v.join(",")
        };
        let mut bad = line("2");
        bad.replace_range(bad.len() - 1.., "?");
        std::fs::write(&raw, format!("{}\n{}\n{}\n", line("1"), bad, line("3"))).unwrap();
        let out = dir.path().join("clean.csv");
        let shape = prepare(recipe("primary-tumor").unwrap(), &[raw], &out).unwrap();
        assert_eq!(shape, (2, 17));
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("age,sex,"));
    }

    #[test]
    fn flare_files_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("flare.data1");
        let b = dir.path().join("flare.data2");
        std::fs::write(&a, "(header line)\nC S O 1 2 1 1 2 1 2 0 0 0\n").unwrap();
        std::fs::write(&b, "H A X 1 3 1 1 1 1 1 0 0 0\nD R O 1 2 1 1 2 1 1 1 0 0\n").unwrap();
        let out = dir.path().join("flare.csv");
        let shape = prepare(recipe("solar-flare").unwrap(), &[a, b], &out).unwrap();
        assert_eq!(shape, (3, 10));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(recipe("iris").is_err());
    }
}
