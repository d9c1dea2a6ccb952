//! Per-point feature vectors: eigenvalue-based neighborhood geometry plus the
//! normalized coordinate, reflectance and vegetation-index blocks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::model::{Channel, MultispectralCloud};
use crate::preprocess::{center_values, robust_minmax_scale};
use crate::spectral::{point_index, VegetationIndexKind};

/// Neighborhood radius used when none is given.
pub const DEFAULT_RADIUS_M: f64 = 1.0;

/// Index used by the VI feature column.
pub const FEATURE_VI: VegetationIndexKind = VegetationIndexKind::NdviNirSwir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeometricFeature {
    Linearity,
    Planarity,
    Sphericity,
    Verticality,
    Eigenentropy,
    SurfaceVariation,
    Anisotropy,
    Omnivariance,
    EigenvalueSum,
    SecondEigenvalue,
    Pca1,
    Pca2,
    Curvature,
    NeighborCount,
    DegenerateFlag,
}

impl GeometricFeature {
    pub const ALL: [GeometricFeature; 15] = [
        GeometricFeature::Linearity,
        GeometricFeature::Planarity,
        GeometricFeature::Sphericity,
        GeometricFeature::Verticality,
        GeometricFeature::Eigenentropy,
        GeometricFeature::SurfaceVariation,
        GeometricFeature::Anisotropy,
        GeometricFeature::Omnivariance,
        GeometricFeature::EigenvalueSum,
        GeometricFeature::SecondEigenvalue,
        GeometricFeature::Pca1,
        GeometricFeature::Pca2,
        GeometricFeature::Curvature,
        GeometricFeature::NeighborCount,
        GeometricFeature::DegenerateFlag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometricFeature::Linearity => "linearity",
            GeometricFeature::Planarity => "planarity",
            GeometricFeature::Sphericity => "sphericity",
            GeometricFeature::Verticality => "verticality",
            GeometricFeature::Eigenentropy => "eigenentropy",
            GeometricFeature::SurfaceVariation => "surface_variation",
            GeometricFeature::Anisotropy => "anisotropy",
            GeometricFeature::Omnivariance => "omnivariance",
            GeometricFeature::EigenvalueSum => "eigenvalue_sum",
            GeometricFeature::SecondEigenvalue => "second_eigenvalue",
            GeometricFeature::Pca1 => "pca1",
            GeometricFeature::Pca2 => "pca2",
            GeometricFeature::Curvature => "curvature",
            GeometricFeature::NeighborCount => "neighbor_count",
            GeometricFeature::DegenerateFlag => "degenerate_flag",
        }
    }
}

impl FromStr for GeometricFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeometricFeature::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown geometric feature '{s}'")))
    }
}

/// Shape descriptors of one neighborhood, from the eigenvalues
/// `l1 >= l2 >= l3 >= 0` of its coordinate covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricFeatureVector {
    pub linearity: f64,
    pub planarity: f64,
    pub sphericity: f64,
    pub verticality: f64,
    pub eigenentropy: f64,
    pub surface_variation: f64,
    pub anisotropy: f64,
    pub omnivariance: f64,
    pub eigenvalue_sum: f64,
    pub second_eigenvalue: f64,
    pub pca1: f64,
    pub pca2: f64,
    pub curvature: f64,
    pub neighbor_count: usize,
    pub degenerate: bool,
}

impl GeometricFeatureVector {
    /// Row used for neighborhoods too small to describe.
    pub fn fallback() -> Self {
        GeometricFeatureVector {
            degenerate: true,
            ..Default::default()
        }
    }

    pub fn value(&self, feature: GeometricFeature) -> f64 {
        match feature {
            GeometricFeature::Linearity => self.linearity,
            GeometricFeature::Planarity => self.planarity,
            GeometricFeature::Sphericity => self.sphericity,
            GeometricFeature::Verticality => self.verticality,
            GeometricFeature::Eigenentropy => self.eigenentropy,
            GeometricFeature::SurfaceVariation => self.surface_variation,
            GeometricFeature::Anisotropy => self.anisotropy,
            GeometricFeature::Omnivariance => self.omnivariance,
            GeometricFeature::EigenvalueSum => self.eigenvalue_sum,
            GeometricFeature::SecondEigenvalue => self.second_eigenvalue,
            GeometricFeature::Pca1 => self.pca1,
            GeometricFeature::Pca2 => self.pca2,
            GeometricFeature::Curvature => self.curvature,
            GeometricFeature::NeighborCount => self.neighbor_count as f64,
            GeometricFeature::DegenerateFlag => {
                if self.degenerate {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Eigen-features of a neighborhood of at least three points.
pub fn eigen_features(neighborhood: &[[f64; 3]]) -> Result<GeometricFeatureVector> {
    if neighborhood.len() < 3 {
        return Err(Error::invalid(format!(
            "eigen features need at least 3 points, got {}",
            neighborhood.len()
        )));
    }
    Ok(eigen_features_of(neighborhood.len(), |f| {
        neighborhood.iter().for_each(f)
    }))
}

/// Shared kernel: `for_each` must yield the same `n` points on every call.
fn eigen_features_of(
    n: usize,
    for_each: impl Fn(&mut dyn FnMut(&[f64; 3])),
) -> GeometricFeatureVector {
    let inv_n = 1.0 / n as f64;
    let mut mean = [0.0; 3];
    for_each(&mut |p| {
        mean[0] += p[0];
        mean[1] += p[1];
        mean[2] += p[2];
    });
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let mut c = [0.0f64; 6];
    for_each(&mut |p| {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        let dz = p[2] - mean[2];
        c[0] += dx * dx;
        c[1] += dx * dy;
        c[2] += dx * dz;
        c[3] += dy * dy;
        c[4] += dy * dz;
        c[5] += dz * dz;
    });
    c.iter_mut().for_each(|v| *v *= inv_n);
    let cov = Matrix3::new(c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5]);
    features_from_covariance(&cov, n)
}

fn features_from_covariance(cov: &Matrix3<f64>, n: usize) -> GeometricFeatureVector {
    let eig = SymmetricEigen::new(*cov);
    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| {
            (
                eig.eigenvalues[i].max(0.0),
                eig.eigenvectors.column(i).into_owned(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (l1, l2, l3) = (pairs[0].0, pairs[1].0, pairs[2].0);

    if l1 <= 0.0 {
        return GeometricFeatureVector {
            neighbor_count: n,
            degenerate: true,
            ..Default::default()
        };
    }

    let sum = l1 + l2 + l3;
    let e = [l1 / sum, l2 / sum, l3 / sum];
    let linearity = (l1 - l2) / l1;
    let planarity = (l2 - l3) / l1;
    let sphericity = l3 / l1;
    let normal = &pairs[2].1;
    let verticality = if planarity < 0.01 && linearity > 0.9 {
        // Lines have no meaningful normal; a vertical line is maximally vertical.
        pairs[0].1.z.abs()
    } else {
        1.0 - normal.z.abs()
    };
    let eigenentropy = -e
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>();
    let surface_variation = l3 / sum;

    GeometricFeatureVector {
        linearity,
        planarity,
        sphericity,
        verticality: verticality.clamp(0.0, 1.0),
        eigenentropy: eigenentropy.max(0.0),
        surface_variation,
        anisotropy: (l1 - l3) / l1,
        omnivariance: (l1 * l2 * l3).cbrt(),
        eigenvalue_sum: sum,
        second_eigenvalue: l2,
        pca1: e[0],
        pca2: e[1],
        curvature: surface_variation,
        neighbor_count: n,
        degenerate: false,
    }
}

/// Geometric features of every point over its `radius_m` neighborhood
/// (the point itself included), in cloud order.
pub fn geometric_features(
    positions: &[[f64; 3]],
    radius_m: f64,
) -> Result<Vec<GeometricFeatureVector>> {
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(Error::invalid("feature radius must be finite and positive"));
    }
    let index = SpatialIndex::new(positions.to_vec());
    Ok(positions
        .par_iter()
        .map_init(Vec::new, |scratch: &mut Vec<usize>, q| {
            scratch.clear();
            index.for_each_within(q, radius_m, |i| scratch.push(i));
            if scratch.len() < 3 {
                return GeometricFeatureVector::fallback();
            }
            // Fixed summation order makes each row a function of its neighborhood only.
            scratch.sort_unstable();
            let pts = index.points();
            let nb: &[usize] = scratch;
            eigen_features_of(nb.len(), |f| nb.iter().for_each(|&i| f(&pts[i])))
        })
        .collect())
}

/// Which column blocks a feature table carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMask {
    /// Centered X, Y and normalized height.
    pub coordinates: bool,
    /// Reflectance columns, indexed by [`Channel::index`].
    pub channels: [bool; 3],
    /// NDVI_NIR-SWIR column.
    pub vi: bool,
    /// Geometric columns, in output order.
    pub geometric: Vec<GeometricFeature>,
}

impl FeatureMask {
    pub fn coordinates_only() -> Self {
        FeatureMask {
            coordinates: true,
            channels: [false; 3],
            vi: false,
            geometric: Vec::new(),
        }
    }

    pub fn with_geometric(mut self, features: &[GeometricFeature]) -> Self {
        self.geometric = features.to_vec();
        self
    }

    pub fn needs_spectra(&self) -> bool {
        self.vi || self.channels.iter().any(|&c| c)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.coordinates {
            names.extend(["x", "y", "z_norm"].map(String::from));
        }
        for c in Channel::ALL {
            if self.channels[c.index()] {
                names.push(format!("r_{}", c.name()));
            }
        }
        if self.vi {
            names.push("ndvi_nir_swir".to_string());
        }
        names.extend(self.geometric.iter().map(|g| g.name().to_string()));
        names
    }
}

/// The feature-vector configurations of the spectral ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Coordinates,
    Swir,
    Nir,
    Green,
    SwirNir,
    SwirGreen,
    NirGreen,
    SwirNirGreen,
    SwirNirGreenVi,
}

impl Scenario {
    /// All scenarios in report order.
    pub const ALL: [Scenario; 9] = [
        Scenario::Coordinates,
        Scenario::Swir,
        Scenario::Nir,
        Scenario::Green,
        Scenario::SwirNir,
        Scenario::SwirGreen,
        Scenario::NirGreen,
        Scenario::SwirNirGreen,
        Scenario::SwirNirGreenVi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Coordinates => "Coordinates",
            Scenario::Swir => "+SWIR",
            Scenario::Nir => "+NIR",
            Scenario::Green => "+Green",
            Scenario::SwirNir => "+SWIR + NIR",
            Scenario::SwirGreen => "+SWIR + Green",
            Scenario::NirGreen => "+NIR + Green",
            Scenario::SwirNirGreen => "+SWIR + NIR + Green",
            Scenario::SwirNirGreenVi => "+SWIR + NIR + Green + VI",
        }
    }

    /// Compact identifier for command lines and key-value reports.
    pub fn key(self) -> &'static str {
        match self {
            Scenario::Coordinates => "coordinates",
            Scenario::Swir => "swir",
            Scenario::Nir => "nir",
            Scenario::Green => "green",
            Scenario::SwirNir => "swir+nir",
            Scenario::SwirGreen => "swir+green",
            Scenario::NirGreen => "nir+green",
            Scenario::SwirNirGreen => "swir+nir+green",
            Scenario::SwirNirGreenVi => "swir+nir+green+vi",
        }
    }

    /// Coordinate and spectral blocks of the scenario; no geometric columns.
    pub fn mask(self) -> FeatureMask {
        let (s, n, g, vi) = match self {
            Scenario::Coordinates => (false, false, false, false),
            Scenario::Swir => (true, false, false, false),
            Scenario::Nir => (false, true, false, false),
            Scenario::Green => (false, false, true, false),
            Scenario::SwirNir => (true, true, false, false),
            Scenario::SwirGreen => (true, false, true, false),
            Scenario::NirGreen => (false, true, true, false),
            Scenario::SwirNirGreen => (true, true, true, false),
            Scenario::SwirNirGreenVi => (true, true, true, true),
        };
        FeatureMask {
            coordinates: true,
            channels: [s, n, g],
            vi,
            geometric: Vec::new(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .trim_start_matches('+')
            .to_ascii_lowercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.key() == key)
            .ok_or_else(|| Error::invalid(format!("unknown scenario '{s}'")))
    }
}

/// Row-major per-point feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<String>,
    values: Vec<f64>,
    rows: usize,
}

impl FeatureTable {
    pub fn new(columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            if !values.is_empty() {
                return Err(Error::invalid("values given for a table without columns"));
            }
            return Ok(FeatureTable {
                columns,
                values,
                rows: 0,
            });
        }
        if !values.len().is_multiple_of(columns.len()) {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of {} columns",
                values.len(),
                columns.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {} column {}",
                pos / columns.len(),
                columns[pos % columns.len()]
            )));
        }
        let rows = values.len() / columns.len();
        Ok(FeatureTable {
            columns,
            values,
            rows,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.columns.len();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Stacks tables with identical schemas.
    pub fn concat(tables: &[FeatureTable]) -> Result<FeatureTable> {
        let Some(first) = tables.first() else {
            return Err(Error::invalid("no tables to concatenate"));
        };
        let mut values = Vec::with_capacity(tables.iter().map(|t| t.values.len()).sum());
        for t in tables {
            if t.columns != first.columns {
                return Err(Error::SchemaMismatch {
                    expected: first.columns.clone(),
                    found: t.columns.clone(),
                });
            }
            values.extend_from_slice(&t.values);
        }
        Ok(FeatureTable {
            columns: first.columns.clone(),
            rows: values.len() / first.columns.len().max(1),
            values,
        })
    }
}

/// Builds the feature table of `cloud` for `mask`.
pub fn compute_feature_table(
    cloud: &MultispectralCloud,
    radius_m: f64,
    mask: &FeatureMask,
) -> Result<FeatureTable> {
    let geometry = if mask.geometric.is_empty() {
        None
    } else {
        if cloud.is_empty() {
            return Err(Error::invalid("cannot compute features of an empty cloud"));
        }
        Some(geometric_features(&cloud.positions(), radius_m)?)
    };
    assemble_feature_table(cloud, mask, geometry.as_deref())
}

/// Builds a feature table from precomputed geometric rows.
///
/// Coordinate, reflectance and VI columns are scaled over this cloud alone
/// (robust + min-max); geometric columns keep their natural ranges.
pub fn assemble_feature_table(
    cloud: &MultispectralCloud,
    mask: &FeatureMask,
    geometry: Option<&[GeometricFeatureVector]>,
) -> Result<FeatureTable> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot compute features of an empty cloud"));
    }
    let points = cloud.points();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    if mask.coordinates {
        if !cloud.has_z_normalized() {
            return Err(Error::invalid(
                "coordinate features need normalized heights; run height normalization first",
            ));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let zs: Vec<f64> = points
            .iter()
            .map(|p| p.z_normalized.unwrap_or(0.0))
            .collect();
        blocks.push(robust_minmax_scale(&center_values(&xs)));
        blocks.push(robust_minmax_scale(&center_values(&ys)));
        blocks.push(robust_minmax_scale(&zs));
    }
    for c in Channel::ALL {
        if mask.channels[c.index()] {
            let r: Vec<f64> = points.iter().map(|p| p.reflectance(c) as f64).collect();
            blocks.push(robust_minmax_scale(&r));
        }
    }
    if mask.vi {
        let vi = points
            .iter()
            .map(|p| point_index(FEATURE_VI, p))
            .collect::<Result<Vec<f64>>>()?;
        blocks.push(robust_minmax_scale(&vi));
    }
    if !mask.geometric.is_empty() {
        let geometry = geometry
            .ok_or_else(|| Error::invalid("geometric columns requested without geometry"))?;
        if geometry.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} geometric rows for {} points",
                geometry.len(),
                points.len()
            )));
        }
        for &g in &mask.geometric {
            blocks.push(geometry.iter().map(|v| v.value(g)).collect());
        }
    }

    let d = blocks.len();
    let mut values = vec![0.0; d * points.len()];
    for (j, block) in blocks.iter().enumerate() {
        for (i, v) in block.iter().enumerate() {
            values[i * d + j] = *v;
        }
    }
    FeatureTable::new(mask.column_names(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MultispectralPoint;

    fn cloud_with_heights(pts: &[[f64; 3]]) -> MultispectralCloud {
        MultispectralCloud::new(
            pts.iter()
                .map(|p| MultispectralPoint {
                    x: p[0],
                    y: p[1],
                    z: p[2],
                    z_normalized: Some(p[2]),
                    reflectance_db: [-10.0, -5.0, -12.0],
                    label: None,
                })
                .collect(),
            "",
        )
        .unwrap()
    }

    #[test]
    fn needs_three_points() {
        assert!(eigen_features(&[[0.0; 3], [1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let f = eigen_features(&[[1.0, 2.0, 3.0]; 5]).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.linearity, 0.0);
        assert_eq!(f.neighbor_count, 5);
    }

    #[test]
    fn line_is_linear() {
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|i| [i as f64 * 0.01, i as f64 * 0.02, 0.0])
            .collect();
        let f = eigen_features(&pts).unwrap();
        assert!(f.linearity >= 0.99);
        assert!(f.planarity <= 0.01);
        assert!(f.sphericity.abs() < 1e-9);
    }

    #[test]
    fn column_counts() {
        assert_eq!(FeatureMask::coordinates_only().column_names().len(), 3);
        assert_eq!(Scenario::SwirNirGreenVi.mask().column_names().len(), 7);
        let full = Scenario::SwirNirGreenVi
            .mask()
            .with_geometric(&GeometricFeature::ALL);
        assert_eq!(full.column_names().len(), 22);
    }

    #[test]
    fn isolated_point_gets_fallback_row() {
        let mut pts: Vec<[f64; 3]> = (0..10).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
        pts.push([50.0, 50.0, 0.0]);
        let mask = FeatureMask {
            coordinates: false,
            channels: [false; 3],
            vi: false,
            geometric: GeometricFeature::ALL.to_vec(),
        };
        let table = compute_feature_table(&cloud_with_heights(&pts), 1.0, &mask).unwrap();
        let last = table.row(10);
        let flag = table.column_index("degenerate_flag").unwrap();
        assert_eq!(last[flag], 1.0);
        assert!(last[..flag].iter().all(|&v| v == 0.0));
        assert_eq!(table.row(0)[flag], 0.0);
    }

    #[test]
    fn coordinates_require_normalized_heights() {
        let cloud = MultispectralCloud::new(
            vec![MultispectralPoint {
                x: 0.0,
                y: 0.0,
                z: 0.0,
                z_normalized: None,
                reflectance_db: [0.0; 3],
                label: None,
            }],
            "",
        )
        .unwrap();
        assert!(compute_feature_table(&cloud, 1.0, &FeatureMask::coordinates_only()).is_err());
    }

    #[test]
    fn scenario_keys_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.key().parse::<Scenario>().unwrap(), s);
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
    }

    #[test]
    fn concat_checks_schema() {
        let a = FeatureTable::new(vec!["a".into()], vec![1.0, 2.0]).unwrap();
        let b = FeatureTable::new(vec!["b".into()], vec![3.0]).unwrap();
        assert!(FeatureTable::concat(&[a.clone(), b]).is_err());
        let c = FeatureTable::concat(&[a.clone(), a]).unwrap();
        assert_eq!(c.n_rows(), 4);
        assert!(FeatureTable::new(vec!["a".into()], vec![f64::NAN]).is_err());
    }
}
