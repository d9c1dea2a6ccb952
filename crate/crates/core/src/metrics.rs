//! Confusion matrix, segmentation metrics and the feature ablation runner.
//!
//! Classes absent from both the ground truth and the prediction are left out
//! of every mean. A class that is predicted but absent from the truth gets
//! IoU 0 and counts towards mIoU and wIoU. Mean accuracy averages the recall
//! of the classes present in the ground truth.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::{
    assemble_feature_table, geometric_features, FeatureMask, FeatureTable, GeometricFeature,
    GeometricFeatureVector, Scenario, DEFAULT_RADIUS_M,
};
use crate::forest::{train_forest, ForestParams};
use crate::model::{MultispectralCloud, PerClass, SemanticClass, NUM_CLASSES};

/// Counts indexed by `[truth][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[SemanticClass], predicted: &[SemanticClass]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid(format!(
                "{} truth labels against {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(predicted) {
            cm.counts[t.index()][p.index()] += 1;
        }
        Ok(cm)
    }

    pub fn get(&self, truth: SemanticClass, predicted: SemanticClass) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn truth_count(&self, class: SemanticClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn predicted_count(&self, class: SemanticClass) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    pub fn merged(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for i in 0..NUM_CLASSES {
            for j in 0..NUM_CLASSES {
                out.counts[i][j] += other.counts[i][j];
            }
        }
        out
    }

    /// Rows separated by `;`, entries by `,`.
    pub fn to_compact(&self) -> String {
        self.counts
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WiouWeights(pub PerClass<f64>);

impl Default for WiouWeights {
    /// Woody and canopy classes count double.
    fn default() -> Self {
        WiouWeights(PerClass([1.0, 1.0, 2.0, 2.0, 2.0, 2.0]))
    }
}

impl WiouWeights {
    pub fn uniform() -> Self {
        WiouWeights(PerClass::splat(1.0))
    }

    pub fn new(weights: [f64; NUM_CLASSES]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("wIoU weights must be positive and finite"));
        }
        Ok(WiouWeights(PerClass(weights)))
    }
}

/// All values are fractions in `[0, 1]`. Per-class entries are `None` for
/// classes excluded from the means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub per_class_iou: PerClass<Option<f64>>,
    pub per_class_recall: PerClass<Option<f64>>,
    pub miou: f64,
    pub wiou: f64,
    pub macc: f64,
    pub oa: f64,
}

/// Unweighted and weighted mean over the classes that carry an IoU.
pub fn aggregate_iou(ious: &PerClass<Option<f64>>, weights: &WiouWeights) -> Result<(f64, f64)> {
    let mut n = 0usize;
    let (mut sum, mut wsum, mut wtotal) = (0.0, 0.0, 0.0);
    for (class, iou) in ious.iter() {
        if let Some(v) = iou {
            n += 1;
            sum += v;
            wsum += weights.0[class] * v;
            wtotal += weights.0[class];
        }
    }
    if n == 0 {
        return Err(Error::invalid("no class to average over"));
    }
    Ok((sum / n as f64, wsum / wtotal))
}

pub fn metrics(cm: &ConfusionMatrix, weights: &WiouWeights) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let mut per_class_iou = PerClass::splat(None);
    let mut per_class_recall = PerClass::splat(None);
    let mut trace = 0u64;
    for class in SemanticClass::ALL {
        let tp = cm.get(class, class);
        let truth = cm.truth_count(class);
        let predicted = cm.predicted_count(class);
        trace += tp;
        let union = truth + predicted - tp;
        if union > 0 {
            per_class_iou[class] = Some(tp as f64 / union as f64);
        }
        if truth > 0 {
            per_class_recall[class] = Some(tp as f64 / truth as f64);
        }
    }
    let (miou, wiou) = aggregate_iou(&per_class_iou, weights)?;
    let recalls: Vec<f64> = per_class_recall.iter().filter_map(|(_, r)| r).collect();
    Ok(MetricReport {
        per_class_iou,
        per_class_recall,
        miou,
        wiou,
        macc: recalls.iter().sum::<f64>() / recalls.len() as f64,
        oa: trace as f64 / total as f64,
    })
}

pub const MACC_NOTE: &str =
    "mAcc averages recall over classes present in the ground truth; IoU means cover classes present in truth or prediction";

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

/// One scenario row of an ablation run.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub scenario: String,
    pub report: MetricReport,
    pub confusion: ConfusionMatrix,
}

impl AblationRow {
    /// Machine-readable `key=value` line; percentages with two decimals.
    pub fn to_key_value(&self) -> String {
        let r = &self.report;
        let mut s = format!("scenario={}", self.scenario.replace(' ', "_"));
        for (class, iou) in r.per_class_iou.iter() {
            let _ = write!(s, " iou_{}={}", class.key(), pct(iou));
        }
        let _ = write!(
            s,
            " miou={} wiou={} macc={} oa={} cm={}",
            pct(Some(r.miou)),
            pct(Some(r.wiou)),
            pct(Some(r.macc)),
            pct(Some(r.oa)),
            self.confusion.to_compact()
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Aligned table: scenario, six per-class IoUs, mIoU, wIoU, mAcc, OA.
    pub fn to_table(&self) -> String {
        let mut head = vec!["Feature vector".to_string()];
        head.extend(SemanticClass::ALL.iter().map(|c| c.name().to_string()));
        head.extend(["mIoU", "wIoU", "mAcc", "OA"].map(String::from));
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let r = &row.report;
                let mut cells = vec![row.scenario.clone()];
                cells.extend(r.per_class_iou.iter().map(|(_, v)| pct(v)));
                cells.extend([r.miou, r.wiou, r.macc, r.oa].map(|v| pct(Some(v))));
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..head.len())
            .map(|j| {
                std::iter::once(&head)
                    .chain(&body)
                    .map(|r| r[j].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for line in std::iter::once(&head).chain(&body) {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    if j == 0 {
                        format!("{c:<w$}", w = widths[j])
                    } else {
                        format!("{c:>w$}", w = widths[j])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        let _ = writeln!(out, "(IoU and accuracy values in %; {MACC_NOTE})");
        out
    }

    pub fn to_key_value(&self) -> String {
        self.rows.iter().map(|r| r.to_key_value() + "\n").collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationScenario {
    pub name: String,
    pub mask: FeatureMask,
}

impl AblationScenario {
    pub fn from_scenario(scenario: Scenario, geometric: &[GeometricFeature]) -> Self {
        AblationScenario {
            name: scenario.name().to_string(),
            mask: scenario.mask().with_geometric(geometric),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationParams {
    pub forest: ForestParams,
    pub radius_m: f64,
    pub weights: WiouWeights,
}

impl Default for AblationParams {
    fn default() -> Self {
        AblationParams {
            forest: ForestParams::default(),
            radius_m: DEFAULT_RADIUS_M,
            weights: WiouWeights::default(),
        }
    }
}

fn geometry_of(
    clouds: &[MultispectralCloud],
    radius_m: f64,
) -> Result<Vec<Vec<GeometricFeatureVector>>> {
    clouds
        .iter()
        .map(|c| geometric_features(&c.positions(), radius_m))
        .collect()
}

fn tables(
    clouds: &[MultispectralCloud],
    mask: &FeatureMask,
    geometry: Option<&[Vec<GeometricFeatureVector>]>,
) -> Result<FeatureTable> {
    let parts = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| assemble_feature_table(c, mask, geometry.map(|g| g[i].as_slice())))
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::concat(&parts)
}

fn all_labels(clouds: &[MultispectralCloud]) -> Result<Vec<SemanticClass>> {
    let mut out = Vec::new();
    for c in clouds {
        out.extend(c.labels()?);
    }
    Ok(out)
}

/// Trains and scores one forest per scenario, every one with the same seed.
///
/// Features are built per cloud exactly as a standalone feature extraction of
/// that cloud would build them, so chaining the individual pipeline steps
/// reproduces each row.
pub fn run_ablation(
    train: &[MultispectralCloud],
    test: &[MultispectralCloud],
    scenarios: &[AblationScenario],
    params: &AblationParams,
) -> Result<AblationReport> {
    params.forest.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("ablation needs training and test clouds"));
    }
    if scenarios.is_empty() {
        return Err(Error::invalid("no scenario selected"));
    }
    let train_labels = all_labels(train)?;
    let test_labels = all_labels(test)?;
    let need_geometry = scenarios.iter().any(|s| !s.mask.geometric.is_empty());
    let (train_geo, test_geo) = if need_geometry {
        (
            Some(geometry_of(train, params.radius_m)?),
            Some(geometry_of(test, params.radius_m)?),
        )
    } else {
        (None, None)
    };

    let mut report = AblationReport::default();
    for scenario in scenarios {
        let train_table = tables(train, &scenario.mask, train_geo.as_deref())?;
        let test_table = tables(test, &scenario.mask, test_geo.as_deref())?;
        let model = train_forest(&train_table, &train_labels, &params.forest)?;
        let predicted = model.predict(&test_table)?.labels;
        let confusion = ConfusionMatrix::from_labels(&test_labels, &predicted)?;
        report.rows.push(AblationRow {
            scenario: scenario.name.clone(),
            report: metrics(&confusion, &params.weights)?,
            confusion,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SemanticClass::*;

    fn ious(values: [f64; 6]) -> PerClass<Option<f64>> {
        PerClass(values.map(|v| Some(v / 100.0)))
    }

    #[test]
    fn reference_rows_reproduce() {
        let (m, w) = aggregate_iou(
            &ious([98.61, 93.20, 79.09, 57.85, 97.27, 87.58]),
            &WiouWeights::default(),
        )
        .unwrap();
        assert!((100.0 * m - 85.60).abs() <= 0.005 + 1e-9);
        assert!((100.0 * w - 83.54).abs() <= 0.005 + 1e-9);
        let (m, w) = aggregate_iou(
            &ious([92.54, 25.41, 60.87, 5.64, 88.59, 38.15]),
            &WiouWeights::default(),
        )
        .unwrap();
        assert!((100.0 * m - 51.87).abs() <= 0.005 + 1e-9);
        assert!((100.0 * w - 50.45).abs() <= 0.005 + 1e-9);
    }

    #[test]
    fn hand_computed_matrix() {
        // truth: G G G F F ; pred: G G F F T
        let truth = [Ground, Ground, Ground, Foliage, Foliage];
        let pred = [Ground, Ground, Foliage, Foliage, Trunk];
        let cm = ConfusionMatrix::from_labels(&truth, &pred).unwrap();
        let r = metrics(&cm, &WiouWeights::default()).unwrap();
        assert_eq!(r.oa, 0.6);
        assert_eq!(r.per_class_iou[Ground], Some(2.0 / 3.0));
        assert_eq!(r.per_class_iou[Foliage], Some(1.0 / 3.0));
        assert_eq!(r.per_class_iou[Trunk], Some(0.0));
        assert_eq!(r.per_class_iou[Branches], None);
        assert_eq!(r.per_class_recall[Trunk], None);
        assert!((r.miou - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.wiou - (2.0 / 3.0 + 2.0 / 3.0) / 5.0).abs() < 1e-15);
        assert!((r.macc - (2.0 / 3.0 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate_cases() {
        let truth = [Ground, Trunk, Foliage, WoodyDebris];
        let cm = ConfusionMatrix::from_labels(&truth, &truth).unwrap();
        let r = metrics(&cm, &WiouWeights::default()).unwrap();
        assert_eq!((r.oa, r.macc, r.miou, r.wiou), (1.0, 1.0, 1.0, 1.0));

        let cm = ConfusionMatrix::from_labels(&[Ground; 4], &[Foliage; 4]).unwrap();
        assert_eq!(cm.get(Ground, Foliage), 4);
        assert_eq!(cm.total(), 4);
        assert!(ConfusionMatrix::from_labels(&[Ground], &[]).is_err());
        assert!(metrics(&ConfusionMatrix::default(), &WiouWeights::default()).is_err());
        assert!(WiouWeights::new([1.0, 0.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn table_layout() {
        let cm = ConfusionMatrix::from_labels(&[Ground, Foliage], &[Ground, Foliage]).unwrap();
        let row = AblationRow {
            scenario: "Coordinates".into(),
            report: metrics(&cm, &WiouWeights::default()).unwrap(),
            confusion: cm,
        };
        let report = AblationReport { rows: vec![row] };
        let table = report.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Feature vector"));
        assert!(lines[1].starts_with("Coordinates"));
        assert!(lines[1].contains("100.00"));
        assert!(lines[2].contains("present in the ground truth"));
        assert!(report.to_key_value().contains("iou_trunk=- "));
    }
}
