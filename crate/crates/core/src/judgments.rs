//! Human factuality judgments: ingestion, majority aggregation and
//! correlation of metric scores against the aggregated labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoreReport;
use crate::stats::{AgreementReport, CorrelationReport};

pub const JUDGMENTS_HEADER: &str = "example_id,system_id,annotator_id,doc_label,img_label";

/// One annotator's verdict on one system summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub example_id: String,
    pub system_id: String,
    pub annotator_id: String,
    pub doc_label: bool,
    pub img_label: bool,
}

/// Key identifying one judged summary.
pub type SummaryKey = (String, String);

/// Majority-voted judgment for one summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedJudgment {
    pub example_id: String,
    pub system_id: String,
    pub doc: bool,
    pub image: bool,
    /// Faithful to both sources.
    pub combined_binary: bool,
    /// Mean of the two facet verdicts: 0, 0.5 or 1.
    pub combined_continuous: f64,
}

impl AggregatedJudgment {
    pub fn new(example_id: String, system_id: String, doc: bool, image: bool) -> Self {
        Self {
            example_id,
            system_id,
            doc,
            image,
            combined_binary: doc && image,
            combined_continuous: (doc as u8 + image as u8) as f64 / 2.0,
        }
    }

    pub fn key(&self) -> SummaryKey {
        (self.example_id.clone(), self.system_id.clone())
    }

    pub fn value(&self, facet: Facet) -> f64 {
        match facet {
            Facet::Document => self.doc as u8 as f64,
            Facet::Image => self.image as u8 as f64,
            Facet::CombinedBinary => self.combined_binary as u8 as f64,
            Facet::CombinedContinuous => self.combined_continuous,
        }
    }
}

/// Which judgment a metric is correlated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Document,
    Image,
    CombinedBinary,
    CombinedContinuous,
}

impl Facet {
    pub fn name(self) -> &'static str {
        match self {
            Facet::Document => "document",
            Facet::Image => "image",
            Facet::CombinedBinary => "combined_binary",
            Facet::CombinedContinuous => "combined_continuous",
        }
    }
}

fn parse_label(field: &str, name: &str, line: usize) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(line, format!("{name} must be 0 or 1, got {other:?}"))),
    }
}

/// Parses a judgments CSV stream. Line numbers in errors are 1-based and
/// count the header.
pub fn parse_judgments<R: BufRead>(reader: R) -> Result<Vec<JudgmentRecord>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::parse(1, "empty file, expected header")),
    };
    if header.trim_start_matches('\u{feff}').trim_end() != JUDGMENTS_HEADER {
        return Err(Error::parse(1, format!("header must be exactly `{JUDGMENTS_HEADER}`")));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        if fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::parse(lineno, "empty identifier"));
        }
        let record = JudgmentRecord {
            example_id: fields[0].to_string(),
            system_id: fields[1].to_string(),
            annotator_id: fields[2].to_string(),
            doc_label: parse_label(fields[3], "doc_label", lineno)?,
            img_label: parse_label(fields[4], "img_label", lineno)?,
        };
        let key = (
            record.example_id.clone(),
            record.system_id.clone(),
            record.annotator_id.clone(),
        );
        if !seen.insert(key) {
            return Err(Error::Integrity(format!(
                "line {lineno}: duplicate judgment for example {}, system {}, annotator {}",
                record.example_id, record.system_id, record.annotator_id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn ingest_judgments(path: impl AsRef<Path>) -> Result<Vec<JudgmentRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(std::io::BufReader::new(f))
}

fn group(records: &[JudgmentRecord]) -> BTreeMap<SummaryKey, Vec<&JudgmentRecord>> {
    let mut groups: BTreeMap<SummaryKey, Vec<&JudgmentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.example_id.clone(), r.system_id.clone()))
            .or_default()
            .push(r);
    }
    groups
}

/// Majority vote per facet for every judged summary, sorted by
/// `(example_id, system_id)`.
pub fn aggregate(records: &[JudgmentRecord]) -> Result<Vec<AggregatedJudgment>> {
    group(records)
        .into_iter()
        .map(|((example_id, system_id), votes)| {
            let n = votes.len();
            if n % 2 == 0 {
                return Err(Error::Config(format!(
                    "example {example_id}, system {system_id} has {n} annotators; majority needs an odd count"
                )));
            }
            let doc = votes.iter().filter(|r| r.doc_label).count() * 2 > n;
            let image = votes.iter().filter(|r| r.img_label).count() * 2 > n;
            Ok(AggregatedJudgment::new(example_id, system_id, doc, image))
        })
        .collect()
}

/// Which score column of a [`ScoreReport`] to correlate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreField {
    ClipS,
    BertS,
    Combined,
}

impl ScoreField {
    pub fn get(self, r: &ScoreReport) -> f64 {
        match self {
            ScoreField::ClipS => r.clip_s,
            ScoreField::BertS => r.bert_s,
            ScoreField::Combined => r.combined,
        }
    }
}

/// Extracts one score column keyed by `(example_id, system_id)`.
pub fn score_column(reports: &[ScoreReport], field: ScoreField) -> Result<HashMap<SummaryKey, f64>> {
    let mut out = HashMap::with_capacity(reports.len());
    for r in reports {
        let key = (r.example_id.clone(), r.system_id.clone());
        if out.insert(key, field.get(r)).is_some() {
            return Err(Error::Integrity(format!(
                "duplicate score for example {}, system {}",
                r.example_id, r.system_id
            )));
        }
    }
    Ok(out)
}

/// Joins scores onto judgments, returning `(scores, judgment values)` in
/// judgment order. Scores without a judgment are ignored.
pub fn join(
    scores: &HashMap<SummaryKey, f64>,
    judgments: &[AggregatedJudgment],
    facet: Facet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut missing = Vec::new();
    let mut xs = Vec::with_capacity(judgments.len());
    let mut ys = Vec::with_capacity(judgments.len());
    for j in judgments {
        match scores.get(&j.key()) {
            Some(&s) => {
                xs.push(s);
                ys.push(j.value(facet));
            }
            None => missing.push(format!("{}/{}", j.example_id, j.system_id)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Join(format!(
            "{} judged summaries have no score: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok((xs, ys))
}

/// Pearson and Spearman correlation of a score column against one facet.
pub fn meta_correlate(
    scores: &HashMap<SummaryKey, f64>,
    judgments: &[AggregatedJudgment],
    facet: Facet,
) -> Result<CorrelationReport> {
    let (xs, ys) = join(scores, judgments, facet)?;
    CorrelationReport::compute(&xs, &ys)
}

/// Agreement on the document facet, the image facet, and both pooled
/// (each facet of each summary counted as its own item).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub document: AgreementReport,
    pub image: AgreementReport,
    pub pooled: AgreementReport,
}

pub fn agreement(records: &[JudgmentRecord]) -> Result<AgreementSummary> {
    let groups = group(records);
    let mut doc = Vec::with_capacity(groups.len());
    let mut img = Vec::with_capacity(groups.len());
    for votes in groups.values() {
        doc.push(votes.iter().map(|r| r.doc_label as u8).collect::<Vec<u8>>());
        img.push(votes.iter().map(|r| r.img_label as u8).collect::<Vec<u8>>());
    }
    let pooled: Vec<Vec<u8>> = doc.iter().chain(&img).cloned().collect();
    Ok(AgreementSummary {
        document: AgreementReport::from_binary_labels(&doc)?,
        image: AgreementReport::from_binary_labels(&img)?,
        pooled: AgreementReport::from_binary_labels(&pooled)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ex: &str, ann: &str, d: bool, i: bool) -> JudgmentRecord {
        JudgmentRecord {
            example_id: ex.into(),
            system_id: "sys".into(),
            annotator_id: ann.into(),
            doc_label: d,
            img_label: i,
        }
    }

    const GOOD: &str = "example_id,system_id,annotator_id,doc_label,img_label
e1,s,a1,1,1
e1,s,a2,1,1
e1,s,a3,0,1
e2,s,a1,0,0
e2,s,a2,0,1
e2,s,a3,1,0
";

    #[test]
    fn parse_well_formed() {
        let r = parse_judgments(GOOD.as_bytes()).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r[0].doc_label && !r[2].doc_label);
    }

    #[test]
    fn bad_label_names_line() {
        let bad = GOOD.replace("e2,s,a2,0,1", "e2,s,a2,2,1");
        match parse_judgments(bad.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("doc_label"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_integrity_error() {
        let dup = format!("{GOOD}e1,s,a2,0,0\n");
        assert!(matches!(parse_judgments(dup.as_bytes()), Err(Error::Integrity(_))));
    }

    #[test]
    fn missing_header() {
        let body = GOOD.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            parse_judgments(body.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn aggregate_examples() {
        let recs = vec![
            rec("e1", "a", true, true),
            rec("e1", "b", true, true),
            rec("e1", "c", false, true),
        ];
        let a = &aggregate(&recs).unwrap()[0];
        assert!(a.doc && a.image && a.combined_binary);
        assert_eq!(a.combined_continuous, 1.0);

        let recs = vec![
            rec("e1", "a", true, false),
            rec("e1", "b", true, false),
            rec("e1", "c", true, false),
        ];
        let a = &aggregate(&recs).unwrap()[0];
        assert!(!a.combined_binary);
        assert_eq!(a.combined_continuous, 0.5);

        let recs = vec![
            rec("e1", "a", false, true),
            rec("e1", "b", false, true),
            rec("e1", "c", true, true),
        ];
        assert!(!aggregate(&recs).unwrap()[0].doc);
    }

    #[test]
    fn even_annotators_rejected() {
        let recs = vec![rec("e1", "a", true, true), rec("e1", "b", true, true)];
        assert!(aggregate(&recs).unwrap_err().is_config());
    }

    #[test]
    fn join_reports_missing_keys() {
        let judgments = aggregate(&parse_judgments(GOOD.as_bytes()).unwrap()).unwrap();
        let mut scores = HashMap::new();
        scores.insert(("e1".to_string(), "s".to_string()), 0.5);
        match meta_correlate(&scores, &judgments, Facet::Document) {
            Err(Error::Join(m)) => assert!(m.contains("e2/s")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perfect_scores_correlate_fully() {
        let mut recs = Vec::new();
        for (i, (d, im)) in [(true, true), (false, true), (true, false), (false, false), (true, true)]
            .into_iter()
            .enumerate()
        {
            for a in ["a", "b", "c"] {
                recs.push(rec(&format!("e{i}"), a, d, im));
            }
        }
        let judgments = aggregate(&recs).unwrap();
        for facet in [
            Facet::Document,
            Facet::Image,
            Facet::CombinedBinary,
            Facet::CombinedContinuous,
        ] {
            let scores: HashMap<_, _> = judgments.iter().map(|j| (j.key(), j.value(facet))).collect();
            let r = meta_correlate(&scores, &judgments, facet).unwrap();
            assert!((r.pearson - 1.0).abs() < 1e-12, "{facet:?}");
            assert_eq!(r.n, 5);
        }
    }

    #[test]
    fn agreement_reports_each_facet() {
        let recs = parse_judgments(GOOD.as_bytes()).unwrap();
        let a = agreement(&recs).unwrap();
        assert_eq!(a.document.n_items, 2);
        assert_eq!(a.pooled.n_items, 4);
        assert_eq!(a.document.n_raters, 3);
        // doc votes split 2-1 on both items
        assert!((a.document.percent_majority - 2.0 / 3.0).abs() < 1e-12);
    }
}
