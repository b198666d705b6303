use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Df, TestLabels, TestResult};
use crate::error::{Error, Result};
use crate::numerics::{chi2_sf, normal_sf, pearson};
use crate::panel::ObsId;

const BREUSCH_PAGAN_LM: TestLabels = TestLabels {
    name: "breusch_pagan_lm",
    title: "Cross-section dependence (Breusch-Pagan LM)",
    null: "No cross-section dependence",
    if_retained: "No cross-section dependence",
    if_rejected: "Cross-section dependence",
};

const PESARAN_CD: TestLabels = TestLabels {
    name: "pesaran_cd",
    title: "Cross-section dependence (Pesaran CD)",
    ..BREUSCH_PAGAN_LM
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionTests {
    pub breusch_pagan_lm: TestResult,
    pub pesaran_cd: TestResult,
}

/// Breusch-Pagan LM and Pesaran CD tests from pairwise residual
/// correlations between entities, each computed over the years both
/// entities are observed. Pairs with fewer than two common years, or with
/// a constant residual series, are left out with a warning.
pub fn cross_section_dependence(residuals: &[f64], obs: &[ObsId]) -> Result<CrossSectionTests> {
    if residuals.len() != obs.len() {
        return Err(Error::InvalidInput(format!(
            "{} residuals for {} observations",
            residuals.len(),
            obs.len()
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut grid: BTreeMap<&str, BTreeMap<i32, f64>> = BTreeMap::new();
    for (o, &e) in obs.iter().zip(residuals) {
        let row = grid.entry(o.entity.as_str()).or_insert_with(|| {
            order.push(o.entity.as_str());
            BTreeMap::new()
        });
        row.insert(o.year, e);
    }
    if order.len() < 2 {
        return Err(Error::NotEstimable(
            "cross-section dependence needs at least two cross-sections".into(),
        ));
    }

    let mut warnings = Vec::new();
    let (mut lm, mut cd, mut pairs) = (0.0, 0.0, 0usize);
    for (a, ea) in order.iter().enumerate() {
        for eb in &order[a + 1..] {
            let (ra, rb) = (&grid[ea], &grid[eb]);
            let (u, v): (Vec<f64>, Vec<f64>) = ra
                .iter()
                .filter_map(|(y, &x)| rb.get(y).map(|&z| (x, z)))
                .unzip();
            if u.len() < 2 {
                warnings.push(format!("{ea}-{eb}: fewer than two common years, pair skipped"));
                continue;
            }
            let Ok(rho) = pearson(&u, &v) else {
                warnings.push(format!("{ea}-{eb}: constant residuals, pair skipped"));
                continue;
            };
            let t = u.len() as f64;
            lm += t * rho * rho;
            cd += t.sqrt() * rho;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::NotEstimable("no entity pair shares two years".into()));
    }
    // with every pair present this is sqrt(2 / (N (N - 1)))
    cd /= (pairs as f64).sqrt();
    let n = residuals.len();
    let mut lm_test = BREUSCH_PAGAN_LM.result(lm, Df::Single(pairs), chi2_sf(lm, pairs as f64), n);
    let mut cd_test = PESARAN_CD.result(cd, Df::None, (2.0 * normal_sf(cd.abs())).min(1.0), n);
    lm_test.warnings = warnings.clone();
    cd_test.warnings = warnings;
    Ok(CrossSectionTests { breusch_pagan_lm: lm_test, pesaran_cd: cd_test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n_ent: usize, t: usize) -> Vec<ObsId> {
        (0..n_ent * t)
            .map(|r| ObsId { entity: format!("E{}", r / t), year: (r % t) as i32 })
            .collect()
    }

    #[test]
    fn perfectly_correlated_entities() {
        // N = 4, T = 4, all six pairs have rho = 1: LM = 6 * 4,
        // CD = sqrt(2/12) * 6 * sqrt(4) = 2 sqrt(6)
        let base = [1.0, -2.0, 1.0, 0.5];
        let e: Vec<f64> = (0..4).flat_map(|i| base.map(|v| v * (i + 1) as f64)).collect();
        let t = cross_section_dependence(&e, &ids(4, 4)).unwrap();
        assert!((t.breusch_pagan_lm.statistic - 24.0).abs() < 1e-12);
        assert_eq!(t.breusch_pagan_lm.df, Df::Single(6));
        assert!((t.pesaran_cd.statistic - 2.0 * 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_period_panel_by_hand() {
        // N = 4, T = 2: every pair correlates at +-1. Entities 0-2 move
        // together, entity 3 opposite: 3 pairs at +1, 3 at -1.
        let e = [1.0, 2.0, 3.0, 4.0, 0.0, 5.0, 2.0, 1.0];
        let t = cross_section_dependence(&e, &ids(4, 2)).unwrap();
        assert!((t.breusch_pagan_lm.statistic - 12.0).abs() < 1e-12);
        assert!(t.pesaran_cd.statistic.abs() < 1e-12);
        // all positive: CD = sqrt(2/12) * 6 * sqrt(2) = 2 sqrt(3)
        let e = [1.0, 2.0, 3.0, 4.0, 0.0, 5.0, 1.0, 2.0];
        let t = cross_section_dependence(&e, &ids(4, 2)).unwrap();
        assert!((t.pesaran_cd.statistic - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn thin_pairs_are_skipped_with_warning() {
        let obs = vec![
            ObsId { entity: "A".into(), year: 1 },
            ObsId { entity: "A".into(), year: 2 },
            ObsId { entity: "A".into(), year: 3 },
            ObsId { entity: "B".into(), year: 1 },
            ObsId { entity: "B".into(), year: 2 },
            ObsId { entity: "B".into(), year: 3 },
            ObsId { entity: "C".into(), year: 3 },
        ];
        let e = [1.0, 0.0, -1.0, 2.0, 1.0, 0.5, 3.0];
        let t = cross_section_dependence(&e, &obs).unwrap();
        assert_eq!(t.breusch_pagan_lm.df, Df::Single(1));
        assert_eq!(t.pesaran_cd.warnings.len(), 2);
    }
}
