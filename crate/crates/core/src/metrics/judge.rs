//! LLM-as-judge quality scoring with a panel of judge models.

use serde::{Deserialize, Serialize};

use super::{MeanStd, MetricsError};
use crate::gateway::{tagged_spans, Gateway};
use crate::kernel::DataInstance;

/// A scoring prompt. `{task}` and `{output}` are substituted per item; the
/// judge must return the overall score between `<START>` and `<END>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub name: String,
    pub template: String,
    pub max_score: f64,
}

impl Rubric {
    /// Generic five-criterion rubric scored out of 25.
    pub fn generic() -> Self {
        Self {
            name: "generic".into(),
            max_score: 25.0,
            template: "\
Evaluate the generated output for the task \"{task}\".

Score each criterion from 0 to 5:
- Relevance: does the output directly address the task?
- Clarity: is it well-formed and easy to understand?
- Specificity: does it contain concrete, accurate detail?
- Conciseness: does it respect the requested format and length?
- Creativity: does it avoid generic or overused content?

Output to evaluate:
\"{output}\"

Give one line per criterion as \"Name: score/5 justification\", then \"Overall: total\".
Return the Overall score enclosed in between <START>, <END>."
                .into(),
        }
    }

    pub fn render(&self, task: &str, output: &str) -> String {
        self.template.replace("{task}", task).replace("{output}", output)
    }
}

/// Parses the first `<START>…<END>` span as a number. Surrounding prose is
/// ignored.
pub fn parse_score(response: &str) -> Option<f64> {
    tagged_spans(response)
        .first()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub rubric: String,
    pub max_score: f64,
    pub mean: f64,
    pub std: f64,
    pub scored: usize,
    /// Items for which no judge returned a parseable score.
    pub excluded: Vec<String>,
    /// Unparseable responses that survived the single retry.
    pub parse_failures: usize,
}

/// Scores every item with every judge; per-item consensus is the mean over
/// judges, and the dataset score is mean ± population std over items.
pub fn judge_quality(
    items: &[DataInstance],
    task: &str,
    rubric: &Rubric,
    panel: &[String],
    gateway: &Gateway,
) -> Result<QualityReport, MetricsError> {
    if panel.is_empty() {
        return Err(MetricsError::EmptyPanel);
    }
    let mut consensus = Vec::with_capacity(items.len());
    let mut excluded = Vec::new();
    let mut parse_failures = 0;
    for item in items {
        let prompt = rubric.render(task, &item.text);
        let mut scores = Vec::with_capacity(panel.len());
        for model in panel {
            let mut parsed = None;
            for _ in 0..2 {
                let response = gateway.judge(model, &prompt)?;
                parsed = parse_score(&response);
                if parsed.is_some() {
                    break;
                }
            }
            match parsed {
                Some(s) => scores.push(s),
                None => {
                    parse_failures += 1;
                    log::warn!("judge {model} gave no parseable score for item {}", item.id);
                }
            }
        }
        match MeanStd::of(&scores) {
            Some(m) => consensus.push(m.mean),
            None => excluded.push(item.id.clone()),
        }
    }
    let summary = MeanStd::of(&consensus).unwrap_or(MeanStd { mean: f64::NAN, std: f64::NAN });
    Ok(QualityReport {
        rubric: rubric.name.clone(),
        max_score: rubric.max_score,
        mean: summary.mean,
        std: summary.std,
        scored: consensus.len(),
        excluded,
        parse_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_score_only() {
        assert_eq!(parse_score("...Overall: 22 <START>22<END>"), Some(22.0));
        assert_eq!(parse_score("Overall: 22"), None);
        assert_eq!(parse_score("<START> 17.5 <END>"), Some(17.5));
        assert_eq!(parse_score("<START>great<END>"), None);
    }

    #[test]
    fn rubric_renders_placeholders() {
        let r = Rubric::generic().render("Generate a poem", "Roses bloom");
        assert!(r.contains("\"Generate a poem\""));
        assert!(r.contains("\"Roses bloom\""));
        assert!(r.contains("<START>, <END>"));
    }
}
