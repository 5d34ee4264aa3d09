//! Grading ingestion and evaluation statistics.
//!
//! Graded responses arrive as CSV rows keyed by (model, scenario,
//! replicate, category). From those this module builds the accuracy /
//! hallucination table and a two-model comparison (Cohen's h with 95% CI
//! plus a Yates-corrected chi-square per category and overall), rendered
//! as TSV for terminals and as typed structs for JSON reports.
//!
//! Proportions are kept as exact integer counts everywhere and only
//! rendered to one decimal at the output boundary, so downstream
//! arithmetic never accumulates rounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, ChiSquareResult, EffectSize, StatsError};

/// Fraction of sub-responses that must be correct for a response to grade
/// `correct` overall.
pub const DEFAULT_CORRECT_THRESHOLD: f64 = 0.75;

pub const GRADES_HEADER: [&str; 5] =
    ["model_id", "scenario_id", "replicate_id", "category", "grade"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no item grades to aggregate")]
    EmptyItems,
    #[error("no graded items for model {0:?}")]
    UnknownModel(String),
    #[error("duplicate graded item for key ({model_id}, {scenario_id}, {replicate_id}, {category})")]
    DuplicateKey {
        model_id: String,
        scenario_id: u32,
        replicate_id: u32,
        category: Category,
    },
    #[error("grades row {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("bad grades header: expected {expected:?}, got {got:?}")]
    BadHeader { expected: String, got: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("malformed reference stats: {0}")]
    Reference(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The six graded instruction categories.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Fasting,
    CarbLoading,
    Medication,
    HealthcareTeam,
    PreopOptimization,
    DelayOperation,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Fasting,
        Category::CarbLoading,
        Category::Medication,
        Category::HealthcareTeam,
        Category::PreopOptimization,
        Category::DelayOperation,
    ];

    /// The CSV token.
    pub fn token(self) -> &'static str {
        match self {
            Category::Fasting => "fasting",
            Category::CarbLoading => "carb_loading",
            Category::Medication => "medication",
            Category::HealthcareTeam => "healthcare_team",
            Category::PreopOptimization => "preop_optimization",
            Category::DelayOperation => "delay_operation",
        }
    }

    /// Human-readable report label.
    pub fn label(self) -> &'static str {
        match self {
            Category::Fasting => "Fasting Instructions",
            Category::CarbLoading => "Preoperative Carbohydrate Loading",
            Category::Medication => "Medication Instructions",
            Category::HealthcareTeam => "Instructions for the Healthcare Team",
            Category::PreopOptimization => "Preoperative Optimization Required",
            Category::DelayOperation => "Need to Delay the Operation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| format!("unknown category token {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Correct,
    Wrong,
    Hallucination,
}

impl Grade {
    pub fn token(self) -> &'static str {
        match self {
            Grade::Correct => "correct",
            Grade::Wrong => "wrong",
            Grade::Hallucination => "hallucination",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One graded response: a model's answer to one scenario replicate, judged
/// within one instruction category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedItem {
    pub model_id: String,
    pub scenario_id: u32,
    pub replicate_id: u32,
    pub category: Category,
    pub grade: Grade,
}

/// Sub-response grade used when a single response is judged sentence by
/// sentence before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemGrade {
    pub correct: bool,
    pub hallucination: bool,
}

/// Collapse sub-response grades into one response grade: any hallucination
/// makes the whole response a hallucination; otherwise the response is
/// correct when at least `threshold` of its parts are.
pub fn aggregate_item_grades_with(
    items: &[ItemGrade],
    threshold: f64,
) -> Result<Grade, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyItems);
    }
    if items.iter().any(|item| item.hallucination) {
        return Ok(Grade::Hallucination);
    }
    let correct = items.iter().filter(|item| item.correct).count();
    if correct as f64 / items.len() as f64 >= threshold {
        Ok(Grade::Correct)
    } else {
        Ok(Grade::Wrong)
    }
}

/// [`aggregate_item_grades_with`] at the default 75% threshold.
pub fn aggregate_item_grades(items: &[ItemGrade]) -> Result<Grade, EvalError> {
    aggregate_item_grades_with(items, DEFAULT_CORRECT_THRESHOLD)
}

fn check_unique(grades: &[GradedItem]) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    for item in grades {
        let key = (
            item.model_id.as_str(),
            item.scenario_id,
            item.replicate_id,
            item.category,
        );
        if !seen.insert(key) {
            return Err(EvalError::DuplicateKey {
                model_id: item.model_id.clone(),
                scenario_id: item.scenario_id,
                replicate_id: item.replicate_id,
                category: item.category,
            });
        }
    }
    Ok(())
}

/// Read a grades CSV (`model_id,scenario_id,replicate_id,category,grade`).
/// Malformed rows fail with their line number; duplicate keys are fatal.
pub fn read_grades(path: &Path) -> Result<Vec<GradedItem>, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => EvalError::Io(std::io::Error::other(e.to_string())),
            _ => EvalError::BadRow {
                line: 1,
                message: e.to_string(),
            },
        })?;

    let got: Vec<String> = reader
        .headers()
        .map_err(|e| EvalError::BadRow {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if got != GRADES_HEADER {
        return Err(EvalError::BadHeader {
            expected: GRADES_HEADER.join(","),
            got: got.join(","),
        });
    }

    let mut grades = Vec::new();
    for result in reader.deserialize::<GradedItem>() {
        match result {
            Ok(item) => {
                if item.scenario_id == 0 || item.replicate_id == 0 {
                    return Err(EvalError::BadRow {
                        line: grades.len() as u64 + 2,
                        message: "scenario_id and replicate_id must be >= 1".into(),
                    });
                }
                grades.push(item);
            }
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(grades.len() as u64 + 2);
                return Err(EvalError::BadRow {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    check_unique(&grades)?;
    Ok(grades)
}

/// Write grades as CSV with the standard header.
pub fn write_grades(path: &Path, grades: &[GradedItem]) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
    for item in grades {
        writer
            .serialize(item)
            .map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}

/// Exact success counts for one cell of the accuracy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CellCount {
    pub correct: u64,
    pub total: u64,
}

impl CellCount {
    pub fn proportion(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// One model's row of the accuracy table: per-category counts, their sum,
/// and the hallucination count across all of the model's items.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelAccuracy {
    pub model_id: String,
    pub per_category: BTreeMap<Category, CellCount>,
    pub total: CellCount,
    pub hallucinations: u64,
}

impl ModelAccuracy {
    pub fn hallucination_rate(&self) -> f64 {
        if self.total.total == 0 {
            0.0
        } else {
            self.hallucinations as f64 / self.total.total as f64
        }
    }
}

/// Build the accuracy table: one row per model (sorted by id), counting
/// only `correct` grades as successes. Duplicate keys are fatal.
pub fn accuracy_table(grades: &[GradedItem]) -> Result<Vec<ModelAccuracy>, EvalError> {
    check_unique(grades)?;
    let mut rows: BTreeMap<&str, ModelAccuracy> = BTreeMap::new();
    for item in grades {
        let row = rows
            .entry(item.model_id.as_str())
            .or_insert_with(|| ModelAccuracy {
                model_id: item.model_id.clone(),
                per_category: Category::ALL
                    .into_iter()
                    .map(|c| (c, CellCount::default()))
                    .collect(),
                total: CellCount::default(),
                hallucinations: 0,
            });
        let cell = row.per_category.get_mut(&item.category).expect("all categories present");
        cell.total += 1;
        row.total.total += 1;
        if item.grade == Grade::Correct {
            cell.correct += 1;
            row.total.correct += 1;
        }
        if item.grade == Grade::Hallucination {
            row.hallucinations += 1;
        }
    }
    Ok(rows.into_values().collect())
}

/// Fraction of a model's graded items marked `hallucination`.
pub fn hallucination_rate(grades: &[GradedItem], model_id: &str) -> Result<f64, EvalError> {
    let mut total = 0u64;
    let mut hallucinations = 0u64;
    for item in grades.iter().filter(|item| item.model_id == model_id) {
        total += 1;
        if item.grade == Grade::Hallucination {
            hallucinations += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::UnknownModel(model_id.to_string()));
    }
    Ok(hallucinations as f64 / total as f64)
}

/// One row of the two-model comparison; `category` is `None` for the
/// overall row. Counts are (correct, total) for each model.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub category: Option<Category>,
    pub x1: u64,
    pub n1: u64,
    pub x2: u64,
    pub n2: u64,
    pub effect: EffectSize,
    pub chi_square: ChiSquareResult,
}

fn category_counts(grades: &[GradedItem], model_id: &str, category: Category) -> (u64, u64) {
    let mut x = 0;
    let mut n = 0;
    for item in grades
        .iter()
        .filter(|item| item.model_id == model_id && item.category == category)
    {
        n += 1;
        if item.grade == Grade::Correct {
            x += 1;
        }
    }
    (x, n)
}

fn comparison_row(
    label: String,
    category: Option<Category>,
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
) -> Result<ComparisonRow, EvalError> {
    let effect = stats::effect_size(x1, n1, x2, n2)?;
    // A zero-margin table (both models all-correct, or all-incorrect)
    // carries no evidence of association; report it as statistic 0, p 1
    // rather than failing the whole comparison.
    let chi_square = match stats::chi_square_2x2(x1, n1 - x1, x2, n2 - x2, true) {
        Ok(result) => result,
        Err(StatsError::DegenerateTable) => ChiSquareResult {
            statistic: 0.0,
            p_value: 1.0,
            yates: true,
        },
        Err(other) => return Err(other.into()),
    };
    Ok(ComparisonRow {
        label,
        category,
        x1,
        n1,
        x2,
        n2,
        effect,
        chi_square,
    })
}

/// Compare two models: one row per category plus an overall row, each with
/// Cohen's h (95% CI) and a Yates-corrected chi-square on the 2x2 table of
/// correct vs not-correct counts.
pub fn compare_models(
    grades: &[GradedItem],
    model_a: &str,
    model_b: &str,
) -> Result<Vec<ComparisonRow>, EvalError> {
    check_unique(grades)?;
    for model in [model_a, model_b] {
        if !grades.iter().any(|item| item.model_id == model) {
            return Err(EvalError::UnknownModel(model.to_string()));
        }
    }

    let mut rows = Vec::with_capacity(Category::ALL.len() + 1);
    let (mut overall_x1, mut overall_n1, mut overall_x2, mut overall_n2) = (0, 0, 0, 0);
    for category in Category::ALL {
        let (x1, n1) = category_counts(grades, model_a, category);
        let (x2, n2) = category_counts(grades, model_b, category);
        overall_x1 += x1;
        overall_n1 += n1;
        overall_x2 += x2;
        overall_n2 += n2;
        rows.push(comparison_row(
            category.label().to_string(),
            Some(category),
            x1,
            n1,
            x2,
            n2,
        )?);
    }
    rows.push(comparison_row(
        "Overall".to_string(),
        None,
        overall_x1,
        overall_n1,
        overall_x2,
        overall_n2,
    )?);
    Ok(rows)
}

/// Previously reported comparison values, for side-by-side rendering next
/// to the freshly computed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub label: String,
    pub h: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn read_reference_stats(path: &Path) -> Result<Vec<ReferenceRow>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| EvalError::Reference(e.to_string()))
}

fn percent(numerator: u64, denominator: u64) -> String {
    if denominator == 0 {
        "-".to_string()
    } else {
        format!("{:.1}%", 100.0 * numerator as f64 / denominator as f64)
    }
}

fn fraction_cell(cell: CellCount) -> String {
    format!(
        "{}/{} ({})",
        cell.correct,
        cell.total,
        percent(cell.correct, cell.total)
    )
}

/// Render the accuracy table as TSV: one column per category, then the
/// total and the hallucination rate.
pub fn render_accuracy_tsv(rows: &[ModelAccuracy]) -> String {
    let mut out = String::from("Model");
    for category in Category::ALL {
        out.push('\t');
        out.push_str(category.label());
    }
    out.push_str("\tTotal correct\tHallucinations present\n");
    for row in rows {
        out.push_str(&row.model_id);
        for category in Category::ALL {
            out.push('\t');
            out.push_str(&fraction_cell(row.per_category[&category]));
        }
        out.push('\t');
        out.push_str(&fraction_cell(row.total));
        out.push_str(&format!(
            "\t({}/{}) {}\n",
            row.hallucinations,
            row.total.total,
            percent(row.hallucinations, row.total.total)
        ));
    }
    out
}

/// Render the comparison as TSV. With `reference`, each row carries the
/// previously reported values (matched by label) in extra columns.
pub fn render_comparison_tsv(rows: &[ComparisonRow], reference: Option<&[ReferenceRow]>) -> String {
    let mut out = String::from("Category\tCohen's h\t95% CI\tChi-square\tp-value");
    if reference.is_some() {
        out.push_str("\tReference h\tReference 95% CI\tReference chi-square\tReference p-value");
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{}\t{:.3}\t({:.3}, {:.3})\t{:.3}\t{:.3}",
            row.label,
            row.effect.h,
            row.effect.ci_low,
            row.effect.ci_high,
            row.chi_square.statistic,
            row.chi_square.p_value
        ));
        if let Some(reference) = reference {
            match reference.iter().find(|r| r.label == row.label) {
                Some(r) => out.push_str(&format!(
                    "\t{:.3}\t({:.3}, {:.3})\t{:.3}\t{:.3}",
                    r.h, r.ci_low, r.ci_high, r.statistic, r.p_value
                )),
                None => out.push_str("\t-\t-\t-\t-"),
            }
        }
        out.push('\n');
    }
    out
}

/// The machine-readable report emitted by the scoring command.
#[derive(Debug, Serialize)]
pub struct ScoreReport {
    pub accuracy: Vec<ModelAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub model_a: String,
    pub model_b: String,
    pub rows: Vec<ComparisonRow>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::path::PathBuf;

    fn item(model: &str, scenario: u32, replicate: u32, cat: Category, grade: Grade) -> GradedItem {
        GradedItem {
            model_id: model.to_string(),
            scenario_id: scenario,
            replicate_id: replicate,
            category: cat,
            grade,
        }
    }

    /// Synthesize a model's grades from per-category correct counts: slots
    /// ordered by (scenario, replicate); the first `correct` slots per
    /// category grade correct, the rest wrong, with `hallucinations` of the
    /// wrong slots upgraded to hallucination in category order.
    fn synthesize(
        model: &str,
        replicates: u32,
        correct: [u64; 6],
        hallucinations: u64,
    ) -> Vec<GradedItem> {
        let mut remaining_hallucinations = hallucinations;
        let mut grades = Vec::new();
        for (idx, category) in Category::ALL.into_iter().enumerate() {
            let n = 14 * replicates as u64;
            for slot in 0..n {
                let scenario = (slot / replicates as u64) as u32 + 1;
                let replicate = (slot % replicates as u64) as u32 + 1;
                let grade = if slot < correct[idx] {
                    Grade::Correct
                } else if remaining_hallucinations > 0 {
                    remaining_hallucinations -= 1;
                    Grade::Hallucination
                } else {
                    Grade::Wrong
                };
                grades.push(item(model, scenario, replicate, category, grade));
            }
        }
        assert_eq!(remaining_hallucinations, 0, "hallucinations exceed wrong slots");
        grades
    }

    fn reference_grades() -> Vec<GradedItem> {
        let mut grades = Vec::new();
        grades.extend(synthesize("human", 4, [56, 42, 55, 48, 38, 51], 0));
        grades.extend(synthesize("gpt3.5", 1, [14, 10, 11, 8, 6, 10], 1));
        grades.extend(synthesize("gpt3.5-rag", 1, [13, 9, 11, 11, 8, 12], 3));
        grades.extend(synthesize("gpt4.0", 1, [14, 12, 12, 11, 7, 12], 1));
        grades.extend(synthesize("gpt4.0-rag", 4, [55, 46, 52, 51, 47, 56], 4));
        grades.extend(synthesize("llama2-7b", 1, [14, 10, 7, 7, 4, 10], 10));
        grades.extend(synthesize("llama2-7b-rag", 1, [14, 7, 8, 5, 7, 12], 7));
        grades.extend(synthesize("llama2-13b", 1, [13, 8, 8, 7, 5, 9], 13));
        grades.extend(synthesize("llama2-13b-rag", 1, [12, 9, 9, 5, 4, 7], 16));
        grades
    }

    fn fixture_path(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name)
    }

    #[test]
    fn aggregation_thresholds() {
        let ok = ItemGrade { correct: true, hallucination: false };
        let bad = ItemGrade { correct: false, hallucination: false };
        let fabricated = ItemGrade { correct: true, hallucination: true };

        // 3 of 4 meets the 75% bar exactly.
        assert_eq!(aggregate_item_grades(&[ok, ok, ok, bad]).unwrap(), Grade::Correct);
        // 2 of 4 falls below it.
        assert_eq!(aggregate_item_grades(&[ok, ok, bad, bad]).unwrap(), Grade::Wrong);
        // A single hallucination overrides everything else.
        assert_eq!(
            aggregate_item_grades(&[ok, ok, ok, fabricated]).unwrap(),
            Grade::Hallucination
        );
        assert!(matches!(aggregate_item_grades(&[]), Err(EvalError::EmptyItems)));
    }

    #[test]
    fn accuracy_table_reproduces_reference_counts() {
        let grades = reference_grades();
        assert_eq!(grades.len(), 2 * 336 + 7 * 84);
        let table = accuracy_table(&grades).unwrap();
        assert_eq!(table.len(), 9);

        let human = table.iter().find(|r| r.model_id == "human").unwrap();
        assert_eq!(human.total, CellCount { correct: 290, total: 336 });
        assert_eq!(human.per_category[&Category::Fasting], CellCount { correct: 56, total: 56 });
        assert_eq!(
            human.per_category[&Category::PreopOptimization],
            CellCount { correct: 38, total: 56 }
        );
        assert_eq!(human.hallucinations, 0);

        let rag = table.iter().find(|r| r.model_id == "gpt4.0-rag").unwrap();
        assert_eq!(rag.total, CellCount { correct: 307, total: 336 });
        assert_eq!(rag.per_category[&Category::DelayOperation], CellCount { correct: 56, total: 56 });
        assert_eq!(rag.hallucinations, 4);

        let llama = table.iter().find(|r| r.model_id == "llama2-13b-rag").unwrap();
        assert_eq!(llama.total, CellCount { correct: 46, total: 84 });
        assert_eq!(llama.hallucinations, 16);

        // Totals equal the sum of category counts.
        for row in &table {
            let sum: u64 = row.per_category.values().map(|c| c.correct).sum();
            let total: u64 = row.per_category.values().map(|c| c.total).sum();
            assert_eq!(row.total, CellCount { correct: sum, total });
        }
    }

    #[test]
    fn hallucination_rates_match_reference_counts() {
        let grades = reference_grades();
        assert_abs_diff_eq!(
            hallucination_rate(&grades, "gpt4.0-rag").unwrap(),
            4.0 / 336.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            hallucination_rate(&grades, "llama2-13b-rag").unwrap(),
            16.0 / 84.0,
            epsilon = 1e-12
        );
        assert_eq!(hallucination_rate(&grades, "human").unwrap(), 0.0);
        assert!(matches!(
            hallucination_rate(&grades, "nonexistent"),
            Err(EvalError::UnknownModel(_))
        ));
    }

    #[test]
    fn comparison_reproduces_reference_effect_sizes() {
        let grades = reference_grades();
        let rows = compare_models(&grades, "human", "gpt4.0-rag").unwrap();
        assert_eq!(rows.len(), 7);

        let expected = [
            (Category::Fasting, 0.268),
            (Category::CarbLoading, -0.175),
            (Category::Medication, 0.273),
            (Category::HealthcareTeam, -0.168),
            (Category::PreopOptimization, -0.381),
            (Category::DelayOperation, -0.606),
        ];
        for (category, h) in expected {
            let row = rows.iter().find(|r| r.category == Some(category)).unwrap();
            assert_eq!((row.n1, row.n2), (56, 56));
            assert_abs_diff_eq!(row.effect.h, h, epsilon = 0.005);
            assert!(row.effect.ci_low <= row.effect.h && row.effect.h <= row.effect.ci_high);
            assert!(row.chi_square.yates);
        }

        let overall = rows.last().unwrap();
        assert_eq!(overall.category, None);
        assert_eq!((overall.x1, overall.n1, overall.x2, overall.n2), (290, 336, 307, 336));
        assert_abs_diff_eq!(overall.effect.h, -0.162, epsilon = 0.005);
    }

    #[test]
    fn comparison_delegates_to_the_chi_square_test() {
        let grades = reference_grades();
        let rows = compare_models(&grades, "human", "gpt4.0-rag").unwrap();
        let delay = rows
            .iter()
            .find(|r| r.category == Some(Category::DelayOperation))
            .unwrap();
        let direct = stats::chi_square_2x2(51, 5, 56, 0, true).unwrap();
        assert_eq!(delay.chi_square.statistic, direct.statistic);
        assert_eq!(delay.chi_square.p_value, direct.p_value);
    }

    #[test]
    fn self_comparison_is_null() {
        let grades = reference_grades();
        let rows = compare_models(&grades, "human", "human").unwrap();
        for row in rows {
            assert_eq!(row.effect.h, 0.0, "{}", row.label);
            assert_eq!(row.chi_square.p_value, 1.0, "{}", row.label);
            assert_eq!(row.chi_square.statistic, 0.0, "{}", row.label);
        }
    }

    #[test]
    fn comparison_requires_both_models() {
        let grades = reference_grades();
        assert!(matches!(
            compare_models(&grades, "human", "missing"),
            Err(EvalError::UnknownModel(_))
        ));
    }

    #[test]
    fn duplicate_keys_are_fatal() {
        let mut grades = vec![
            item("m", 1, 1, Category::Fasting, Grade::Correct),
            item("m", 1, 1, Category::Medication, Grade::Correct),
        ];
        assert!(accuracy_table(&grades).is_ok());
        grades.push(item("m", 1, 1, Category::Fasting, Grade::Wrong));
        assert!(matches!(
            accuracy_table(&grades),
            Err(EvalError::DuplicateKey { scenario_id: 1, replicate_id: 1, .. })
        ));
    }

    #[test]
    fn grades_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grades.csv");
        let grades = reference_grades();
        write_grades(&path, &grades).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "model_id,scenario_id,replicate_id,category,grade");
        assert!(text.contains("human,1,1,fasting,correct"));

        let read_back = read_grades(&path).unwrap();
        assert_eq!(read_back, grades);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grades.csv");
        std::fs::write(
            &path,
            "model_id,scenario_id,replicate_id,category,grade\n\
             human,1,1,fasting,correct\n\
             human,1,1,snacking,correct\n",
        )
        .unwrap();
        match read_grades(&path).unwrap_err() {
            EvalError::BadRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }

        std::fs::write(&path, "model,scenario,replicate,category,grade\n").unwrap();
        assert!(matches!(read_grades(&path), Err(EvalError::BadHeader { .. })));
    }

    #[test]
    fn checked_in_fixture_matches_the_synthesized_grades() {
        let grades = read_grades(&fixture_path("grades_reference.csv")).unwrap();
        assert_eq!(grades, reference_grades());
    }

    #[test]
    fn accuracy_rendering_uses_one_decimal() {
        let grades = reference_grades();
        let table = accuracy_table(&grades).unwrap();
        let tsv = render_accuracy_tsv(&table);

        assert!(tsv.contains("290/336 (86.3%)"));
        assert!(tsv.contains("307/336 (91.4%)"));
        // 68/84 is 80.95%, rendered to one decimal as 81.0%.
        assert!(tsv.contains("68/84 (81.0%)"));
        assert!(tsv.contains("(4/336) 1.2%"));
        assert!(tsv.contains("(16/84) 19.0%") || tsv.contains("(16/84) 19.1%"));
        assert_eq!(tsv.lines().count(), 10);
        let header = tsv.lines().next().unwrap();
        assert!(header.starts_with("Model\tFasting Instructions\t"));
    }

    #[test]
    fn comparison_rendering_includes_reference_columns() {
        let grades = reference_grades();
        let rows = compare_models(&grades, "human", "gpt4.0-rag").unwrap();
        let plain = render_comparison_tsv(&rows, None);
        assert_eq!(plain.lines().count(), 8);
        assert!(plain.contains("Need to Delay the Operation\t-0.607"));

        let reference = vec![ReferenceRow {
            label: "Need to Delay the Operation".to_string(),
            h: -0.606,
            ci_low: -0.869,
            ci_high: -0.345,
            statistic: 3.349,
            p_value: 0.067,
        }];
        let with_reference = render_comparison_tsv(&rows, Some(&reference));
        assert!(with_reference.contains("Reference h"));
        assert!(with_reference.contains("\t-0.606\t(-0.869, -0.345)\t3.349\t0.067"));
        // Rows without a reference entry render placeholders.
        assert!(with_reference.contains("Overall\t") && with_reference.contains("\t-\t-\t-\t-"));
    }

    #[test]
    fn reference_stats_file_parses() {
        let rows = read_reference_stats(&fixture_path("reference_stats.json")).unwrap();
        assert_eq!(rows.len(), 7);
        let delay = rows.iter().find(|r| r.label == "Need to Delay the Operation").unwrap();
        assert_abs_diff_eq!(delay.h, -0.606, epsilon = 1e-9);
        assert_abs_diff_eq!(delay.p_value, 0.067, epsilon = 1e-9);
    }

    #[test]
    fn score_report_serializes() {
        let grades = reference_grades();
        let report = ScoreReport {
            accuracy: accuracy_table(&grades).unwrap(),
            comparison: Some(ComparisonReport {
                model_a: "human".to_string(),
                model_b: "gpt4.0-rag".to_string(),
                rows: compare_models(&grades, "human", "gpt4.0-rag").unwrap(),
            }),
        };
        let json: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(json["accuracy"].as_array().unwrap().len(), 9);
        assert_eq!(json["comparison"]["rows"].as_array().unwrap().len(), 7);
        let first = &json["comparison"]["rows"][0];
        assert_eq!(first["label"], "Fasting Instructions");
        assert!(first["effect"]["h"].is_f64());
    }

    #[test]
    fn category_tokens_round_trip() {
        for category in Category::ALL {
            assert_eq!(category.token().parse::<Category>().unwrap(), category);
            let json = serde_json::to_string(&category).unwrap();
            assert_eq!(json, format!("\"{}\"", category.token()));
        }
        assert!("snacking".parse::<Category>().is_err());
    }
}
