//! Report emission: accuracy/gap CSV, structural-slice CSV, JSON bundle and
//! optional SVG charts.
//!
//! Reported accuracies are rounded to 3 decimals and relative gaps to one
//! decimal percent, and gaps are computed from the rounded accuracies, so
//! recomputing a gap from the emitted CSV reproduces the emitted gap
//! exactly. AR cells from different datasets are never merged: every row
//! carries its dataset id and aggregation happens within one (dataset, task)
//! group only.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{macro_accuracy, relative_gap, structural_slices, EvalRecord, SliceKey, SliceTable, VERSION};
use crate::error::{Error, Result};
use crate::prompt::{InputCombination, PromptScheme, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub formats: Vec<ReportFormat>,
    pub plots: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            plots: false,
        }
    }
}

/// Prompt-sensitivity entry for one (dataset, task, combination) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub dataset_id: String,
    pub task: Task,
    pub combination: InputCombination,
    pub best: f64,
    pub average: f64,
    pub gap_rel: f64,
    pub best_scheme: PromptScheme,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

type GroupKey = (String, Task);

fn group_records(records: &[EvalRecord]) -> BTreeMap<GroupKey, Vec<&EvalRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset_id.clone(), r.task))
            .or_default()
            .push(r);
    }
    groups
}

/// Per-(combination, scheme) accuracies of one group, rounded to report
/// precision, in canonical combination and scheme order.
fn accuracy_cells(group: &[&EvalRecord]) -> Vec<(InputCombination, PromptScheme, f64, usize)> {
    let mut cells = Vec::new();
    let mut combos: Vec<InputCombination> = group.iter().map(|r| r.combination).collect();
    combos.sort();
    combos.dedup();
    for combo in combos {
        for scheme in PromptScheme::ALL {
            let records: Vec<&EvalRecord> = group
                .iter()
                .filter(|r| r.combination == combo && r.scheme == scheme)
                .copied()
                .collect();
            if records.is_empty() {
                continue;
            }
            let acc = macro_accuracy(&records).expect("cell is non-empty");
            cells.push((combo, scheme, round3(acc), records.len()));
        }
    }
    cells
}

/// Gap entries computed from the rounded per-scheme accuracies; emitted only
/// for combinations covered by all three schemes.
pub fn gap_entries(records: &[EvalRecord]) -> Vec<GapEntry> {
    let mut entries = Vec::new();
    for ((dataset_id, task), group) in group_records(records) {
        let cells = accuracy_cells(&group);
        let mut combos: Vec<InputCombination> = cells.iter().map(|(c, ..)| *c).collect();
        combos.dedup();
        for combo in combos {
            let per_scheme: Vec<(PromptScheme, f64)> = PromptScheme::ALL
                .iter()
                .filter_map(|scheme| {
                    cells
                        .iter()
                        .find(|(c, s, ..)| c == &combo && s == scheme)
                        .map(|(_, _, acc, _)| (*scheme, *acc))
                })
                .collect();
            if per_scheme.len() != PromptScheme::ALL.len() {
                continue;
            }
            match relative_gap(&per_scheme) {
                Ok((best_scheme, best, average, gap)) => entries.push(GapEntry {
                    dataset_id: dataset_id.clone(),
                    task,
                    combination: combo,
                    best,
                    average,
                    gap_rel: gap,
                    best_scheme,
                }),
                Err(Error::DegenerateCell) => continue,
                Err(e) => unreachable!("gap over validated cells: {e}"),
            }
        }
    }
    entries
}

/// Best scheme per combination (ties to the earlier scheme), used to pick
/// the records feeding the structural slices.
fn best_scheme_per_combo(group: &[&EvalRecord]) -> BTreeMap<InputCombination, PromptScheme> {
    let cells = accuracy_cells(group);
    let mut best: BTreeMap<InputCombination, (PromptScheme, f64)> = BTreeMap::new();
    for (combo, scheme, acc, _) in cells {
        let entry = best.entry(combo).or_insert((scheme, acc));
        if acc > entry.1 {
            *entry = (scheme, acc);
        }
    }
    best.into_iter().map(|(c, (s, _))| (c, s)).collect()
}

fn sliced(group: &[&EvalRecord], key: SliceKey) -> SliceTable {
    let best = best_scheme_per_combo(group);
    let records: Vec<&EvalRecord> = group
        .iter()
        .filter(|r| best.get(&r.combination) == Some(&r.scheme))
        .copied()
        .collect();
    structural_slices(&records, key)
}

#[derive(Serialize)]
struct JsonCell {
    dataset: String,
    task: Task,
    combination: InputCombination,
    scheme: PromptScheme,
    accuracy: f64,
    n: usize,
}

#[derive(Serialize)]
struct JsonGap {
    dataset: String,
    task: Task,
    combination: InputCombination,
    best_scheme: PromptScheme,
    best: f64,
    average: f64,
    gap_rel_pct: f64,
    n: usize,
}

#[derive(Serialize)]
struct JsonSliceRow {
    dataset: String,
    task: Task,
    combination: InputCombination,
    scheme: PromptScheme,
    slice: String,
    bucket: u32,
    accuracy: f64,
    n: usize,
}

#[derive(Serialize)]
struct JsonSliceCoverage {
    dataset: String,
    task: Task,
    slice: String,
    empty_buckets: Vec<u32>,
}

#[derive(Serialize)]
struct JsonReport {
    toolkit_version: String,
    cells: Vec<JsonCell>,
    gaps: Vec<JsonGap>,
    slices: Vec<JsonSliceRow>,
    slice_coverage: Vec<JsonSliceCoverage>,
}

/// Writes the report files into `out_dir` and returns their paths.
/// Deterministic: rerunning over the same records overwrites identically.
pub fn emit_report(records: &[EvalRecord], out_dir: &Path, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let groups = group_records(records);
    let gaps = gap_entries(records);
    let mut written = Vec::new();

    // Slice tables per group, with the best scheme annotation per combo.
    let mut slice_rows: Vec<JsonSliceRow> = Vec::new();
    let mut slice_coverage: Vec<JsonSliceCoverage> = Vec::new();
    for ((dataset_id, task), group) in &groups {
        let best = best_scheme_per_combo(group);
        for key in [SliceKey::Deg, SliceKey::WAvgRounded] {
            let table = sliced(group, key);
            for (bucket, per_combo) in &table.rows {
                for (combo_name, cell) in per_combo {
                    let combination = combo_from_name(combo_name);
                    slice_rows.push(JsonSliceRow {
                        dataset: dataset_id.clone(),
                        task: *task,
                        combination,
                        scheme: best[&combination],
                        slice: key.to_string(),
                        bucket: *bucket,
                        accuracy: round3(cell.accuracy()),
                        n: cell.n,
                    });
                }
            }
            slice_coverage.push(JsonSliceCoverage {
                dataset: dataset_id.clone(),
                task: *task,
                slice: key.to_string(),
                empty_buckets: table.empty_buckets,
            });
        }
    }

    if opts.formats.contains(&ReportFormat::Csv) {
        let path = out_dir.join("report.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "task", "combination", "scheme", "metric", "value", "n"])?;
        for ((dataset_id, task), group) in &groups {
            for (combo, scheme, acc, n) in accuracy_cells(group) {
                w.write_record([
                    dataset_id.as_str(),
                    &task.to_string(),
                    &combo.to_string(),
                    &scheme.to_string(),
                    "accuracy",
                    &format!("{acc:.3}"),
                    &n.to_string(),
                ])?;
            }
        }
        for gap in &gaps {
            let n: usize = groups[&(gap.dataset_id.clone(), gap.task)]
                .iter()
                .filter(|r| r.combination == gap.combination)
                .count();
            w.write_record([
                gap.dataset_id.as_str(),
                &gap.task.to_string(),
                &gap.combination.to_string(),
                &gap.best_scheme.to_string(),
                "gap_rel_pct",
                &format!("{:.1}", round1(gap.gap_rel * 100.0)),
                &n.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::CorpusRead(e.to_string()))?;
        fs::write(&path, bytes)?;
        written.push(path);

        let path = out_dir.join("slices.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "task", "combination", "scheme", "slice", "bucket", "accuracy", "n"])?;
        for row in &slice_rows {
            w.write_record([
                row.dataset.as_str(),
                &row.task.to_string(),
                &row.combination.to_string(),
                &row.scheme.to_string(),
                &row.slice,
                &row.bucket.to_string(),
                &format!("{:.3}", row.accuracy),
                &row.n.to_string(),
            ])?;
        }
        let mut bytes = w.into_inner().map_err(|e| Error::CorpusRead(e.to_string()))?;
        for cov in &slice_coverage {
            let list = if cov.empty_buckets.is_empty() {
                "none".to_owned()
            } else {
                cov.empty_buckets
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            };
            bytes.extend_from_slice(
                format!(
                    "# coverage {} {} {}: empty buckets: {}\n",
                    cov.dataset, cov.task, cov.slice, list
                )
                .as_bytes(),
            );
        }
        fs::write(&path, bytes)?;
        written.push(path);
    }

    if opts.formats.contains(&ReportFormat::Json) {
        let mut cells = Vec::new();
        for ((dataset_id, task), group) in &groups {
            for (combo, scheme, acc, n) in accuracy_cells(group) {
                cells.push(JsonCell {
                    dataset: dataset_id.clone(),
                    task: *task,
                    combination: combo,
                    scheme,
                    accuracy: acc,
                    n,
                });
            }
        }
        let json_gaps = gaps
            .iter()
            .map(|gap| JsonGap {
                dataset: gap.dataset_id.clone(),
                task: gap.task,
                combination: gap.combination,
                best_scheme: gap.best_scheme,
                best: gap.best,
                average: gap.average,
                gap_rel_pct: round1(gap.gap_rel * 100.0),
                n: groups[&(gap.dataset_id.clone(), gap.task)]
                    .iter()
                    .filter(|r| r.combination == gap.combination)
                    .count(),
            })
            .collect();
        let report = JsonReport {
            toolkit_version: VERSION.to_owned(),
            cells,
            gaps: json_gaps,
            slices: slice_rows,
            slice_coverage,
        };
        let path = out_dir.join("report.json");
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        written.push(path);
    }

    if opts.plots {
        let plot_dir = out_dir.join("plots");
        fs::create_dir_all(&plot_dir)?;
        for ((dataset_id, task), group) in &groups {
            let stem = sanitize(&format!("{dataset_id}_{task}"));
            let best = best_scheme_per_combo(group);

            let bars: Vec<(String, f64)> = best
                .iter()
                .map(|(combo, scheme)| {
                    let records: Vec<&EvalRecord> = group
                        .iter()
                        .filter(|r| r.combination == *combo && r.scheme == *scheme)
                        .copied()
                        .collect();
                    let acc = macro_accuracy(&records).unwrap_or(0.0);
                    (format!("{combo} ({scheme})"), round3(acc))
                })
                .collect();
            let path = plot_dir.join(format!("{stem}_macro.svg"));
            fs::write(
                &path,
                super::svg::bar_chart(&format!("{task} macro accuracy, best scheme — {dataset_id}"), &bars),
            )?;
            written.push(path);

            for key in [SliceKey::Deg, SliceKey::WAvgRounded] {
                let table = sliced(group, key);
                let mut series: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
                for (bucket, per_combo) in &table.rows {
                    for (combo, cell) in per_combo {
                        series
                            .entry(combo.clone())
                            .or_default()
                            .push((*bucket, round3(cell.accuracy())));
                    }
                }
                let series: Vec<(String, Vec<(u32, f64)>)> = series.into_iter().collect();
                let path = plot_dir.join(format!("{stem}_{key}.svg"));
                fs::write(
                    &path,
                    super::svg::line_chart(
                        &format!("{task} accuracy by {key} — {dataset_id}"),
                        &key.to_string(),
                        &series,
                    ),
                )?;
                written.push(path);
            }
        }
    }

    Ok(written)
}

fn combo_from_name(name: &str) -> InputCombination {
    match name {
        "CONV" => InputCombination::Conv,
        "CONV+STRUCT" => InputCombination::ConvStruct,
        "STRUCT+SUMM" => InputCombination::StructSumm,
        "STRUCT+DESC" => InputCombination::StructDesc,
        "STRUCT+SUMM+DESC" => InputCombination::StructSummDesc,
        "STRUCT" => InputCombination::Struct,
        other => unreachable!("unknown combination name {other}"),
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        combo: InputCombination,
        scheme: PromptScheme,
        id: &str,
        correct: bool,
    ) -> EvalRecord {
        EvalRecord {
            instance_id: id.to_owned(),
            dataset_id: "ds".to_owned(),
            task: Task::AddresseeRecognition,
            combination: combo,
            scheme,
            gold: "[BENNY]".to_owned(),
            predicted: if correct { "[BENNY]" } else { "[CAM]" }.to_owned(),
            correct,
            deg_u: 1,
            w_avg_o_u: 1.0,
            w_avg_o_rounded: 1,
            scores: vec![],
        }
    }

    fn small_run() -> Vec<EvalRecord> {
        let mut records = Vec::new();
        for scheme in PromptScheme::ALL {
            for i in 0..4 {
                // verbose: 3/4, medium: 2/4, concise: 1/4.
                let correct = match scheme {
                    PromptScheme::Verbose => i < 3,
                    PromptScheme::Medium => i < 2,
                    PromptScheme::Concise => i < 1,
                };
                records.push(record(InputCombination::Conv, scheme, &format!("c{i}"), correct));
            }
        }
        records
    }

    #[test]
    fn gap_entries_use_rounded_accuracies() {
        let gaps = gap_entries(&small_run());
        assert_eq!(gaps.len(), 1);
        let gap = &gaps[0];
        assert_eq!(gap.best_scheme, PromptScheme::Verbose);
        assert_eq!(gap.best, 0.75);
        assert!((gap.average - 0.5).abs() < 1e-12);
        assert!((gap.gap_rel - (1.0 - 0.5 / 0.75)).abs() < 1e-12);
    }

    #[test]
    fn csv_gap_recomputes_from_emitted_accuracies() {
        let dir = tempfile::tempdir().unwrap();
        let records = small_run();
        emit_report(&records, dir.path(), &ReportOptions::default()).unwrap();

        let mut rdr = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
        let mut accs: Vec<(PromptScheme, f64)> = Vec::new();
        let mut emitted_gap: Option<String> = None;
        for row in rdr.records() {
            let row = row.unwrap();
            let scheme = match &row[3] {
                "verbose" => PromptScheme::Verbose,
                "medium" => PromptScheme::Medium,
                _ => PromptScheme::Concise,
            };
            match &row[4] {
                "accuracy" => accs.push((scheme, row[5].parse().unwrap())),
                "gap_rel_pct" => emitted_gap = Some(row[5].to_owned()),
                _ => {}
            }
        }
        let (_, _, _, gap) = relative_gap(&accs).unwrap();
        assert_eq!(format!("{:.1}", round1(gap * 100.0)), emitted_gap.unwrap());
    }

    #[test]
    fn reports_are_deterministic() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let records = small_run();
        let opts = ReportOptions {
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            plots: true,
        };
        emit_report(&records, dir1.path(), &opts).unwrap();
        emit_report(&records, dir2.path(), &opts).unwrap();
        for name in ["report.csv", "slices.csv", "report.json"] {
            let a = fs::read(dir1.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
        let a = fs::read(dir1.path().join("plots/ds_AR_macro.svg")).unwrap();
        let b = fs::read(dir2.path().join("plots/ds_AR_macro.svg")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slice_support_is_conserved() {
        let records = small_run();
        let refs: Vec<&EvalRecord> = records
            .iter()
            .filter(|r| r.scheme == PromptScheme::Verbose)
            .collect();
        let table = structural_slices(&refs, SliceKey::Deg);
        let support: usize = table.rows.values().flat_map(|m| m.values()).map(|c| c.n).sum();
        assert_eq!(support, refs.len());
    }
}
