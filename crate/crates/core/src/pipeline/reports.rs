use super::{files, read_json, read_jsonl, PipelineError};
use crate::extraction::ExtractionRecord;
use crate::prosocial::{OddsRatioReport, RecallReport};
use crate::scales::{self, ScaleThresholds, ValueCommunityMatrix};
use crate::table::write_csv;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportSummary {
    pub written: Vec<PathBuf>,
    /// Report groups skipped because their stage output is absent.
    pub skipped: Vec<String>,
}

fn wrap<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> PipelineError + '_ {
    move |e| PipelineError::Config(format!("{}: {e}", path.display()))
}

/// Writes report CSVs (and figure data) under `<out_dir>/reports` for every
/// stage output present. Fails only when none is present.
pub fn emit_reports(out_dir: &Path, thresholds: &ScaleThresholds) -> Result<ReportSummary, PipelineError> {
    let reports = out_dir.join(files::REPORTS);
    let matrix_path = out_dir.join(files::MATRIX);
    let records_path = out_dir.join(files::EXTRACTIONS);
    let odds_path = out_dir.join(files::ODDS_RATIOS);
    let recall_path = out_dir.join(files::RECALL);
    if ![&matrix_path, &records_path, &odds_path, &recall_path].iter().any(|p| p.exists()) {
        return Err(PipelineError::MissingStageOutput(format!(
            "none of {}, {}, {}, {} in {}",
            files::MATRIX,
            files::EXTRACTIONS,
            files::ODDS_RATIOS,
            files::RECALL,
            out_dir.display()
        )));
    }
    std::fs::create_dir_all(&reports).map_err(|e| PipelineError::io(&reports, e))?;
    let mut summary = ReportSummary::default();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<(), PipelineError>| -> Result<(), PipelineError> {
        let p = reports.join(name);
        f(&p)?;
        summary.written.push(p);
        Ok(())
    };

    if matrix_path.exists() {
        let matrix = ValueCommunityMatrix::read_json(&matrix_path).map_err(wrap(&matrix_path))?;
        let report = scales::prevalence_report(&matrix, thresholds);
        emit("prevalence.csv", &|p| report.write_csv(p).map_err(wrap(p)))?;
        emit("prevalence.json", &|p| report.write_json(p).map_err(wrap(p)))?;
        emit("prevalence_plot.csv", &|p| report.write_plot_csv(p).map_err(wrap(p)))?;
    } else {
        tracing::info!("no {}; prevalence reports skipped", files::MATRIX);
        summary.skipped.push("prevalence".into());
    }

    if records_path.exists() {
        let records: Vec<ExtractionRecord> =
            read_jsonl(&records_path).map_err(|e| PipelineError::Config(e.to_string()))?;
        let na = scales::na_report(&records);
        emit("na_counts.csv", &|p| na.write_counts_csv(p).map_err(wrap(p)))?;
        emit("na_explanations.csv", &|p| na.write_explanations_csv(p).map_err(wrap(p)))?;
    } else {
        tracing::info!("no {}; N/A reports skipped", files::EXTRACTIONS);
        summary.skipped.push("na".into());
    }

    if odds_path.exists() {
        let report: OddsRatioReport = read_json(&odds_path).map_err(|e| PipelineError::Config(e.to_string()))?;
        emit("odds_ratios.csv", &|p| write_csv(p, &report.rows).map_err(wrap(p)))?;
        emit("odds_ratio_plot.csv", &|p| write_csv(p, &report.plot_rows()).map_err(wrap(p)))?;
        emit("prosocial_summary.txt", &|p| {
            std::fs::write(p, report.summary() + "\n").map_err(|e| PipelineError::io(p, e))
        })?;
    } else {
        tracing::info!("no {}; odds-ratio reports skipped", files::ODDS_RATIOS);
        summary.skipped.push("odds_ratios".into());
    }

    if recall_path.exists() {
        let report: RecallReport = read_json(&recall_path).map_err(|e| PipelineError::Config(e.to_string()))?;
        emit("recall.csv", &|p| write_csv(p, &report.rows).map_err(wrap(p)))?;
        emit("recall_buckets.csv", &|p| write_csv(p, &report.bucket_counts()).map_err(wrap(p)))?;
    } else {
        tracing::info!("no {}; recall reports skipped", files::RECALL);
        summary.skipped.push("recall".into());
    }
    Ok(summary)
}
