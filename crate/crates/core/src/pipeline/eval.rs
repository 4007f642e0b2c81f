use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::metrics::{score, EvalOptions, ScoreReport, ScoredSample};
use crate::pipeline::io::{list_pngs, load_mask, load_prediction};
use crate::{Error, Result};

fn by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(list_pngs(dir)?
        .into_iter()
        .filter_map(|p| Some((p.file_stem()?.to_string_lossy().into_owned(), p)))
        .collect())
}

/// Pairs `pred_dir/<stem>.png` with `truth_dir/<stem>.png` and scores the pool.
pub fn evaluate(pred_dir: &Path, truth_dir: &Path, opts: EvalOptions) -> Result<ScoreReport> {
    let preds = by_stem(pred_dir)?;
    let truths = by_stem(truth_dir)?;
    let unmatched: Vec<&str> = preds
        .keys()
        .filter(|k| !truths.contains_key(*k))
        .chain(truths.keys().filter(|k| !preds.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Data(format!("unmatched file stems: {}", unmatched.join(", "))));
    }
    if preds.is_empty() {
        return Err(Error::Data(format!("no PNG predictions in {}", pred_dir.display())));
    }
    let samples = preds
        .iter()
        .map(|(stem, p)| {
            let prediction = load_prediction(p)?;
            let mask = load_mask(&truths[stem])?;
            ScoredSample::new(prediction, mask).map_err(|e| Error::Data(format!("{stem}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    score(&samples, opts)
}
