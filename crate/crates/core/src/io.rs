//! File formats: package and lexicon CSVs, the feature-matrix CSV, fitted
//! model and topic model JSON, simulation results JSON, and the round-log
//! CSV. All writers are deterministic (no timestamps, stable field order)
//! and file writes go through a write-temp-then-rename helper.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cascade::{DecisionModel, ReplicaResult, SimConfig};
use crate::error::{Error, RowError};
use crate::lasso::{CvReport, LambdaRule, LassoFit};
use crate::textfeat::{FeatureMatrix, Lexicon, PackageRecord};
use crate::topics::{LdaModel, Vocabulary};
use crate::Result;

pub const PACKAGES_HEADER: [&str; 5] = ["test_id", "headline", "lede", "impressions", "clicks"];

/// Writes bytes to `path` atomically (temp file in the same directory, then
/// rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file_name.to_string_lossy())),
        None => Path::new(&format!(".{}.tmp", file_name.to_string_lossy())).to_path_buf(),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses the packages CSV (`test_id,headline,lede,impressions,clicks`).
/// Parsing continues past bad rows and reports every offender with its line
/// number; an empty body yields an empty list with a warning.
pub fn read_packages_csv<R: Read>(reader: R) -> Result<Vec<PackageRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = csv_reader.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != PACKAGES_HEADER {
        return Err(Error::invalid(format!(
            "bad packages header {got:?}, expected {PACKAGES_HEADER:?}"
        )));
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { line, message: format!("unparseable row: {e}") });
                continue;
            }
        };
        if row.len() != 5 {
            errors.push(RowError {
                line,
                message: format!("expected 5 fields, found {}", row.len()),
            });
            continue;
        }
        let count = |field: usize, name: &str| -> std::result::Result<u64, RowError> {
            row[field].trim().parse::<u64>().map_err(|_| RowError {
                line,
                message: format!("{name} {:?} is not a non-negative integer", &row[field]),
            })
        };
        let impressions = match count(3, "impressions") {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let clicks = match count(4, "clicks") {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        if clicks > impressions {
            errors.push(RowError {
                line,
                message: format!("clicks ({clicks}) exceed impressions ({impressions})"),
            });
            continue;
        }
        if row[1].trim().is_empty() {
            errors.push(RowError { line, message: "empty headline".to_string() });
            continue;
        }
        let lede = row[2].trim();
        records.push(PackageRecord {
            test_id: row[0].to_string(),
            headline: row[1].to_string(),
            lede: (!lede.is_empty()).then(|| lede.to_string()),
            impressions,
            clicks,
        });
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    if records.is_empty() {
        log::warn!("packages file contained a header but no rows");
    }
    Ok(records)
}

pub fn load_packages_csv(path: &Path) -> Result<Vec<PackageRecord>> {
    read_packages_csv(fs::File::open(path)?)
}

/// Parses one lexicon CSV (`term,weight`; missing weight defaults to 1.0).
/// Terms are lowercased on load.
pub fn read_lexicon_csv<R: Read>(name: &str, reader: R) -> Result<Lexicon> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = csv_reader.headers()?.clone();
    if header.get(0).map(str::trim) != Some("term") {
        return Err(Error::invalid(format!(
            "lexicon {name}: expected header starting with 'term', found {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut entries = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let line = idx + 2;
        let row = row?;
        let term = row
            .get(0)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::invalid(format!("lexicon {name} line {line}: empty term")))?;
        let weight = match row.get(1).map(str::trim) {
            None | Some("") => 1.0,
            Some(raw) => raw.parse::<f64>().map_err(|_| {
                Error::invalid(format!("lexicon {name} line {line}: bad weight {raw:?}"))
            })?,
        };
        entries.push((term.to_lowercase(), weight));
    }
    Lexicon::new(name, entries)
}

/// Loads every `*.csv` in a directory as a lexicon (name = file stem),
/// sorted by name so feature columns are stable.
pub fn load_lexicon_dir(dir: &Path) -> Result<Vec<Lexicon>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map_or(false, |ext| ext == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no .csv lexicons found in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            read_lexicon_csv(&name, fs::File::open(p)?)
        })
        .collect()
}

/// Feature-matrix CSV: `package_id`, one column per descriptor, `ctr`.
pub fn write_feature_matrix_csv<W: Write>(matrix: &FeatureMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["package_id".to_string()];
    header.extend(matrix.descriptor_names());
    header.push("ctr".to_string());
    w.write_record(&header)?;
    for r in 0..matrix.n_rows() {
        let mut row = vec![matrix.row_ids[r].clone()];
        for c in 0..matrix.n_features() {
            row.push(matrix.rows[(r, c)].to_string());
        }
        row.push(matrix.outcomes[r].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A feature matrix read back from CSV (descriptor kinds are not stored in
/// the file, only names).
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Array2<f64>,
    pub outcomes: Vec<f64>,
    pub row_ids: Vec<String>,
}

pub fn read_feature_matrix_csv<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv_reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"package_id") || cols.last() != Some(&"ctr") {
        return Err(Error::invalid(
            "feature CSV must start with package_id and end with ctr",
        ));
    }
    let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut values: Vec<f64> = Vec::new();
    let mut outcomes = Vec::new();
    let mut row_ids = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let line = idx + 2;
        let row = row?;
        if row.len() != names.len() + 2 {
            return Err(Error::invalid(format!(
                "feature CSV line {line}: expected {} fields, found {}",
                names.len() + 2,
                row.len()
            )));
        }
        row_ids.push(row[0].to_string());
        for field in 1..row.len() {
            let v: f64 = row[field].trim().parse().map_err(|_| {
                Error::invalid(format!(
                    "feature CSV line {line}: bad number {:?}",
                    &row[field]
                ))
            })?;
            if field == row.len() - 1 {
                outcomes.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n_rows = row_ids.len();
    let rows = Array2::from_shape_vec((n_rows, names.len()), values)
        .map_err(|e| Error::invalid(format!("feature CSV shape: {e}")))?;
    Ok(FeatureTable { names, rows, outcomes, row_ids })
}

/// Fitted decision model on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModelFile {
    pub schema_version: u32,
    pub descriptor_names: Vec<String>,
    pub w0: f64,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub cv: CvSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSummary {
    pub k_folds: usize,
    pub seed: u64,
    pub rule: LambdaRule,
    pub grid_size: usize,
    pub grid_ratio: f64,
    pub min_cv_error: f64,
    pub cv_error_at_chosen: f64,
}

impl FittedModelFile {
    pub fn new(
        descriptor_names: Vec<String>,
        fit: &LassoFit,
        report: &CvReport,
        rule: LambdaRule,
        grid_ratio: f64,
    ) -> Self {
        let min_cv_error = report.cv_errors.iter().copied().fold(f64::INFINITY, f64::min);
        let chosen_idx = report
            .lambda_grid
            .iter()
            .position(|&l| l == fit.lambda)
            .unwrap_or(0);
        FittedModelFile {
            schema_version: 1,
            descriptor_names,
            w0: fit.w0,
            weights: fit.weights.clone(),
            lambda: fit.lambda,
            cv: CvSummary {
                k_folds: report.k_folds,
                seed: report.seed,
                rule,
                grid_size: report.lambda_grid.len(),
                grid_ratio,
                min_cv_error,
                cv_error_at_chosen: report.cv_errors[chosen_idx],
            },
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Topic model on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaModelFile {
    pub schema_version: u32,
    pub k_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    pub topic_word_counts: Vec<Vec<u64>>,
    pub topic_totals: Vec<u64>,
}

impl LdaModelFile {
    pub fn from_model(model: &LdaModel) -> Self {
        let k = model.k_topics;
        let v = model.vocab.len();
        let topic_word_counts = (0..k)
            .map(|t| (0..v).map(|w| model.topic_word_counts[(t, w)]).collect())
            .collect();
        LdaModelFile {
            schema_version: 1,
            k_topics: k,
            alpha: model.alpha,
            beta: model.beta,
            vocab: model.vocab.terms().to_vec(),
            topic_word_counts,
            topic_totals: model.topic_totals.clone(),
        }
    }

    pub fn into_model(self) -> Result<LdaModel> {
        let v = self.vocab.len();
        if self.topic_word_counts.len() != self.k_topics
            || self.topic_word_counts.iter().any(|row| row.len() != v)
            || self.topic_totals.len() != self.k_topics
        {
            return Err(Error::invalid("topic model file has inconsistent shapes"));
        }
        let mut counts = Array2::zeros((self.k_topics, v));
        for (t, row) in self.topic_word_counts.iter().enumerate() {
            for (w, &c) in row.iter().enumerate() {
                counts[(t, w)] = c;
            }
        }
        let model = LdaModel {
            k_topics: self.k_topics,
            alpha: self.alpha,
            beta: self.beta,
            vocab: Vocabulary::from_terms(self.vocab),
            topic_word_counts: counts,
            topic_totals: self.topic_totals,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Simulation results on disk: the resolved config, the model that drove
/// the run, and every replica.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub schema_version: u32,
    pub config: SimConfig,
    pub model: DecisionModel,
    pub replicas: Vec<ReplicaResult>,
}

impl ExperimentResults {
    pub fn new(config: SimConfig, model: DecisionModel, replicas: Vec<ReplicaResult>) -> Self {
        ExperimentResults { schema_version: 1, config, model, replicas }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string(self)? + "\n").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Round logs as CSV, one row per (replica, round, arm):
/// `replica,round,arm,genotype,impressions,clicks,ctr,decision`.
pub fn write_round_log_csv<W: Write>(replicas: &[ReplicaResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "replica",
        "round",
        "arm",
        "genotype",
        "impressions",
        "clicks",
        "ctr",
        "decision",
    ])?;
    for replica in replicas {
        for log in &replica.round_logs {
            for (arm_name, arm) in [("A", &log.arm_a), ("B", &log.arm_b)] {
                w.write_record([
                    replica.replica_index.to_string(),
                    log.round_index.to_string(),
                    arm_name.to_string(),
                    arm.genotype.label(),
                    arm.impressions.to_string(),
                    arm.clicks.to_string(),
                    arm.ctr.map(|c| c.to_string()).unwrap_or_default(),
                    log.decision.as_str().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{PureKeepRule, Scenario};
    use crate::netgen::Topology;

    const GOOD_CSV: &str = "test_id,headline,lede,impressions,clicks\n\
        t1,First Headline,Some lede,100,7\n\
        t2,Second Headline,,50,0\n\
        t3,Third Headline,Another lede,14342,201\n";

    #[test]
    fn packages_round_trip() {
        let records = read_packages_csv(GOOD_CSV.as_bytes()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].test_id, "t1");
        assert_eq!(records[1].lede, None);
        assert_eq!(records[2].impressions, 14342);
    }

    #[test]
    fn packages_errors_are_aggregated_with_line_numbers() {
        let bad = "test_id,headline,lede,impressions,clicks\n\
            t1,Good,,100,7\n\
            t2,Flipped,,5,10\n\
            t3,,,100,1\n\
            t4,BadCount,,abc,1\n";
        let err = read_packages_csv(bad.as_bytes()).unwrap_err();
        match err {
            Error::Rows(rows) => {
                assert_eq!(rows.len(), 3);
                assert_eq!(rows[0].line, 3);
                assert!(rows[0].message.contains("exceed"));
                assert_eq!(rows[1].line, 4);
                assert!(rows[1].message.contains("empty headline"));
                assert_eq!(rows[2].line, 5);
            }
            other => panic!("expected row errors, got {other}"),
        }
    }

    #[test]
    fn packages_header_is_strict_and_empty_body_is_fine() {
        assert!(read_packages_csv("id,headline\nx,y\n".as_bytes()).is_err());
        let empty = read_packages_csv("test_id,headline,lede,impressions,clicks\n".as_bytes())
            .unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn lexicon_parsing_and_defaults() {
        let lex = read_lexicon_csv("demo", "term,weight\nGreat,2.0\nwow,\nplain\n".as_bytes())
            .unwrap();
        assert_eq!(lex.entries["great"], 2.0);
        assert_eq!(lex.entries["wow"], 1.0);
        assert_eq!(lex.entries["plain"], 1.0);
        assert!(read_lexicon_csv("demo", "word\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn feature_matrix_round_trip() {
        let records = vec![PackageRecord {
            test_id: "t1".into(),
            headline: "How To Test Things".into(),
            lede: None,
            impressions: 100,
            clicks: 10,
        }];
        let matrix = crate::textfeat::build_matrix(&records, &[], None).unwrap();
        let mut buf = Vec::new();
        write_feature_matrix_csv(&matrix, &mut buf).unwrap();
        let table = read_feature_matrix_csv(&buf[..]).unwrap();
        assert_eq!(table.names, matrix.descriptor_names());
        assert_eq!(table.rows.dim(), (1, 21));
        assert_eq!(table.outcomes, vec![0.1]);
        assert_eq!(table.row_ids, vec!["t1"]);
        for c in 0..21 {
            assert_eq!(table.rows[(0, c)], matrix.rows[(0, c)]);
        }
    }

    #[test]
    fn results_json_round_trip() {
        let config = SimConfig {
            n_agents: 20,
            total_steps: 10,
            round_length: 5,
            n_features_per_package: 3,
            feature_universe: 12,
            mutation_rate: 1.0 / 3.0,
            infection_rate: 0.5,
            ab_threshold: 0.95,
            scenario: Scenario::AbLed,
            pure_keep_rule: PureKeepRule::Random,
            graph: Topology::ErdosRenyi { p: 0.2 },
            master_seed: 7,
            n_replicas: 2,
        };
        let model = DecisionModel::synthetic(12, 3, 1);
        let replicas = crate::cascade::run_experiment_sequential(&config, &model).unwrap();
        let results = ExperimentResults::new(config, model, replicas);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.json");
        results.save(&path).unwrap();
        let back = ExperimentResults::load(&path).unwrap();
        assert_eq!(back.replicas, results.replicas);
        assert_eq!(back.config, results.config);

        let mut csv_buf = Vec::new();
        write_round_log_csv(&back.replicas, &mut csv_buf).unwrap();
        let text = String::from_utf8(csv_buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "replica,round,arm,genotype,impressions,clicks,ctr,decision"
        );
        // 2 replicas x 2 rounds x 2 arms
        assert_eq!(lines.count(), 8);
    }

    #[test]
    fn lda_model_file_round_trip() {
        let records = vec![
            PackageRecord {
                test_id: "s1".into(),
                headline: "cats cats lasers".into(),
                lede: None,
                impressions: 10,
                clicks: 1,
            },
            PackageRecord {
                test_id: "s2".into(),
                headline: "cats lasers dogs".into(),
                lede: None,
                impressions: 10,
                clicks: 1,
            },
        ];
        let set = crate::topics::build_documents(&records, 2).unwrap();
        let model = crate::topics::fit_lda(&set, 2, 25.0, 0.01, 20, 3).unwrap();
        let file = LdaModelFile::from_model(&model);
        let json = serde_json::to_string(&file).unwrap();
        let back: LdaModelFile = serde_json::from_str(&json).unwrap();
        let rebuilt = back.into_model().unwrap();
        assert_eq!(rebuilt.topic_word_counts, model.topic_word_counts);
        assert_eq!(rebuilt.vocab.terms(), model.vocab.terms());
        assert_eq!(rebuilt.vocab.index_of("cat"), model.vocab.index_of("cat"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
    }
}
