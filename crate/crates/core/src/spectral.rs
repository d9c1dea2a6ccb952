//! Reflectance unit conversion, vegetation indices and a per-class
//! separability summary used to pick the index fed to the classifier.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Channel, MultispectralCloud, MultispectralPoint, PerClass, SemanticClass};
use crate::stats::quartiles;

/// Guard added to the pooled IQR in the separability score.
pub const SEPARABILITY_EPS: f64 = 1e-12;

/// Minimum number of points a class needs to enter a separability report.
pub const MIN_CLASS_POINTS: usize = 10;

/// Converts reflectance in dB to linear units: `10^(dB / 10)`.
pub fn db_to_linear(r_db: f64) -> Result<f64> {
    if !r_db.is_finite() {
        return Err(Error::invalid(format!(
            "reflectance {r_db} dB is not finite"
        )));
    }
    Ok(10f64.powf(r_db / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VegetationIndexKind {
    NdviNirGreen,
    NdviNirSwir,
    Cvi,
    Grvi,
    Gdvi,
}

impl VegetationIndexKind {
    pub const ALL: [VegetationIndexKind; 5] = [
        VegetationIndexKind::NdviNirGreen,
        VegetationIndexKind::NdviNirSwir,
        VegetationIndexKind::Cvi,
        VegetationIndexKind::Grvi,
        VegetationIndexKind::Gdvi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VegetationIndexKind::NdviNirGreen => "NDVI_NIR-Green",
            VegetationIndexKind::NdviNirSwir => "NDVI_NIR-SWIR",
            VegetationIndexKind::Cvi => "CVI",
            VegetationIndexKind::Grvi => "GRVI",
            VegetationIndexKind::Gdvi => "GDVI",
        }
    }
}

impl fmt::Display for VegetationIndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VegetationIndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "ndvinirgreen" => Ok(VegetationIndexKind::NdviNirGreen),
            "ndvinirswir" => Ok(VegetationIndexKind::NdviNirSwir),
            "cvi" => Ok(VegetationIndexKind::Cvi),
            "grvi" => Ok(VegetationIndexKind::Grvi),
            "gdvi" => Ok(VegetationIndexKind::Gdvi),
            _ => Err(Error::invalid(format!("unknown vegetation index '{s}'"))),
        }
    }
}

/// Evaluates a vegetation index on linear reflectances.
pub fn vegetation_index(kind: VegetationIndexKind, swir: f64, nir: f64, green: f64) -> Result<f64> {
    for (name, v) in [("SWIR", swir), ("NIR", nir), ("Green", green)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!(
                "{name} reflectance must be positive and linear, got {v}"
            )));
        }
    }
    Ok(match kind {
        VegetationIndexKind::NdviNirGreen => (nir - green) / (nir + green),
        VegetationIndexKind::NdviNirSwir => (nir - swir) / (nir + swir),
        VegetationIndexKind::Cvi => nir * green / (swir * swir),
        VegetationIndexKind::Grvi => nir / green,
        VegetationIndexKind::Gdvi => nir - green,
    })
}

/// Index value of a fused point, converting its dB reflectances first.
pub fn point_index(kind: VegetationIndexKind, p: &MultispectralPoint) -> Result<f64> {
    let lin = |c: Channel| db_to_linear(p.reflectance(c) as f64);
    vegetation_index(
        kind,
        lin(Channel::Swir)?,
        lin(Channel::Nir)?,
        lin(Channel::Green)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityReport {
    pub kind: VegetationIndexKind,
    /// Only classes present in the cloud carry statistics.
    pub per_class: PerClass<Option<ClassStats>>,
    pub score: f64,
}

/// Median gap over pooled IQR, averaged over all pairs of present classes.
///
/// The pooled IQR of a pair is the mean of the two class IQRs. Higher scores
/// mean the index separates the classes better.
pub fn vi_separability(
    cloud: &MultispectralCloud,
    kind: VegetationIndexKind,
) -> Result<SeparabilityReport> {
    let labels = cloud.labels()?;
    let mut per_class_values: PerClass<Vec<f64>> = PerClass::default();
    for (p, l) in cloud.points().iter().zip(&labels) {
        per_class_values[*l].push(point_index(kind, p)?);
    }
    let underpopulated: Vec<String> = SemanticClass::ALL
        .iter()
        .filter(|&&c| {
            let n = per_class_values[c].len();
            n > 0 && n < MIN_CLASS_POINTS
        })
        .map(|c| format!("{} ({} points)", c.name(), per_class_values[*c].len()))
        .collect();
    if !underpopulated.is_empty() {
        return Err(Error::invalid(format!(
            "classes need at least {MIN_CLASS_POINTS} points: {}",
            underpopulated.join(", ")
        )));
    }
    let present: Vec<SemanticClass> = SemanticClass::ALL
        .into_iter()
        .filter(|&c| !per_class_values[c].is_empty())
        .collect();
    if present.len() < 2 {
        return Err(Error::invalid(format!(
            "separability needs at least 2 classes, found {}",
            present.len()
        )));
    }

    let mut per_class = PerClass::<Option<ClassStats>>::default();
    for &c in &present {
        let (q25, median, q75) = quartiles(&per_class_values[c]);
        per_class[c] = Some(ClassStats {
            q25,
            median,
            q75,
            count: per_class_values[c].len(),
        });
    }
    Ok(SeparabilityReport {
        kind,
        score: separability_score(
            &present
                .iter()
                .map(|&c| per_class[c].unwrap())
                .collect::<Vec<_>>(),
        ),
        per_class,
    })
}

fn separability_score(stats: &[ClassStats]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in stats.iter().enumerate() {
        for b in &stats[i + 1..] {
            let pooled = 0.5 * ((a.q75 - a.q25) + (b.q75 - b.q25));
            total += (a.median - b.median).abs() / (pooled + SEPARABILITY_EPS);
            pairs += 1;
        }
    }
    total / pairs as f64
}

impl SeparabilityReport {
    /// Tabular text form: one row per present class and a closing score line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# vegetation index: {}\n", self.kind);
        out.push_str(&format!(
            "{:<16} {:>10} {:>14} {:>14} {:>14}\n",
            "class", "count", "q25", "median", "q75"
        ));
        for (class, stats) in self.per_class.iter() {
            if let Some(s) = stats {
                out.push_str(&format!(
                    "{:<16} {:>10} {:>14.6} {:>14.6} {:>14.6}\n",
                    class.name(),
                    s.count,
                    s.q25,
                    s.median,
                    s.q75
                ));
            }
        }
        out.push_str(&format!("score {:.6}\n", self.score));
        out
    }
}
