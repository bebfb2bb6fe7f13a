use super::{logistic_fit, pca_first_component, PcaModel, ProsocialError, ProsocialVector, RegressionResult};
use crate::metadata::CommunityMetadata;
use serde::{Deserialize, Serialize};

/// One community's regression sample: normalised scores and whether each
/// comment carries the High upvote label (otherwise Low).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsocialDataset {
    pub community: String,
    pub year_tag: String,
    pub comment_ids: Vec<String>,
    pub vectors: Vec<ProsocialVector>,
    pub high: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRegression {
    pub community: String,
    pub pca: PcaModel,
    pub result: RegressionResult,
}

/// PCA composite over the community's own comments, then a logistic
/// regression of the upvote label on it.
pub fn analyze_community(ds: &ProsocialDataset) -> Result<CommunityRegression, ProsocialError> {
    if ds.vectors.len() != ds.high.len() {
        return Err(ProsocialError::LengthMismatch(ds.vectors.len(), ds.high.len()));
    }
    let rows: Vec<[f64; 3]> = ds.vectors.iter().map(ProsocialVector::as_array).collect();
    let (pca, scores) = pca_first_component(&rows)?;
    let result = logistic_fit(&scores, &ds.high)?;
    Ok(CommunityRegression {
        community: ds.community.clone(),
        pca,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioRow {
    pub community: String,
    pub n: usize,
    pub odds_ratio: f64,
    pub p_value: f64,
    pub variance_explained: f64,
    pub subscriber_count: Option<u64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioPlotRow {
    pub community: String,
    pub subscriber_count: Option<u64>,
    pub odds_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCommunity {
    pub community: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioReport {
    pub alpha: f64,
    pub rows: Vec<OddsRatioRow>,
    pub skipped: Vec<SkippedCommunity>,
}

impl OddsRatioReport {
    /// Significant rows only.
    pub fn plot_rows(&self) -> Vec<OddsRatioPlotRow> {
        self.rows
            .iter()
            .filter(|r| r.significant)
            .map(|r| OddsRatioPlotRow {
                community: r.community.clone(),
                subscriber_count: r.subscriber_count,
                odds_ratio: r.odds_ratio,
            })
            .collect()
    }

    /// Among significant communities, the share with odds ratio below 1.
    pub fn fraction_below_one(&self) -> Option<f64> {
        let sig: Vec<&OddsRatioRow> = self.rows.iter().filter(|r| r.significant).collect();
        if sig.is_empty() {
            return None;
        }
        Some(sig.iter().filter(|r| r.odds_ratio < 1.0).count() as f64 / sig.len() as f64)
    }

    pub fn summary(&self) -> String {
        let sig = self.rows.iter().filter(|r| r.significant).count();
        match self.fraction_below_one() {
            Some(f) => format!(
                "{sig} of {} communities significant at alpha = {}; {:.1}% of those have odds ratio < 1",
                self.rows.len(),
                self.alpha,
                100.0 * f
            ),
            None => format!("0 of {} communities significant at alpha = {}", self.rows.len(), self.alpha),
        }
    }
}

/// Tabulates per-community fits. Communities whose fit failed are listed in
/// `skipped` with the reason.
pub fn odds_ratio_report(
    fits: &[(String, Result<CommunityRegression, ProsocialError>)],
    metadata: &CommunityMetadata,
    alpha: f64,
) -> Result<OddsRatioReport, ProsocialError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ProsocialError::BadAlpha(alpha));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (community, fit) in fits {
        match fit {
            Ok(f) => rows.push(OddsRatioRow {
                community: community.clone(),
                n: f.result.n,
                odds_ratio: f.result.odds_ratio,
                p_value: f.result.p_value,
                variance_explained: f.pca.variance_explained,
                subscriber_count: metadata.subscribers(community),
                significant: f.result.p_value < alpha,
            }),
            Err(e) => skipped.push(SkippedCommunity {
                community: community.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(OddsRatioReport { alpha, rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::CommunityInfo;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Comments whose three metrics move together; the label depends on
    /// their common level with the given slope.
    fn dataset(community: &str, seed: u64, slope: f64, n: usize) -> ProsocialDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut high = Vec::new();
        for _ in 0..n {
            let level: f64 = rng.random();
            let jitter = |rng: &mut ChaCha8Rng| (level + 0.1 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
            vectors.push(ProsocialVector::from_array([jitter(&mut rng), jitter(&mut rng), jitter(&mut rng)]));
            let p = 1.0 / (1.0 + (-(slope * (level - 0.5))).exp());
            high.push(rng.random::<f64>() < p);
        }
        ProsocialDataset {
            community: community.into(),
            year_tag: "y".into(),
            comment_ids: (0..n).map(|i| format!("{community}{i}")).collect(),
            vectors,
            high,
        }
    }

    #[test]
    fn planted_fraction_below_one() {
        let meta = CommunityMetadata::from_entries((0..10).map(|i| CommunityInfo {
            community: format!("c{i}"),
            subscriber_count: Some(1000 * (i + 1)),
            description: String::new(),
        }));
        let fits: Vec<_> = (0..10)
            .map(|i| {
                let slope = if i < 8 { -6.0 } else { 6.0 };
                let name = format!("c{i}");
                let fit = analyze_community(&dataset(&name, i, slope, 1500));
                (name, fit)
            })
            .collect();
        let r = odds_ratio_report(&fits, &meta, 0.05).unwrap();
        assert_eq!(r.fraction_below_one(), Some(0.8));
        assert_eq!(r.plot_rows().len(), 10);
        assert_eq!(r.rows[0].subscriber_count, Some(1000));
        assert!(r.summary().contains("80.0%"));
    }

    #[test]
    fn nonsignificant_rows_kept_but_not_plotted() {
        let fits: Vec<_> = (0..3)
            .map(|i| {
                let name = format!("c{i}");
                let fit = analyze_community(&dataset(&name, 100 + i, 0.0, 60));
                (name, fit)
            })
            .collect();
        let r = odds_ratio_report(&fits, &CommunityMetadata::default(), 1e-9).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.plot_rows().is_empty());
        assert_eq!(r.fraction_below_one(), None);
        assert!(odds_ratio_report(&fits, &CommunityMetadata::default(), 0.0).is_err());
    }

    #[test]
    fn failed_fits_are_skipped() {
        let fits = vec![("c".to_string(), Err(ProsocialError::SingleClass))];
        let r = odds_ratio_report(&fits, &CommunityMetadata::default(), 0.05).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.skipped[0].community, "c");
    }
}
