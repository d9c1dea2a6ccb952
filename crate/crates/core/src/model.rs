//! Shared point-cloud data model: channels, semantic classes, per-channel and
//! fused multispectral clouds.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of semantic classes.
pub const NUM_CLASSES: usize = 6;

/// One monochromatic scanner channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Swir,
    Nir,
    Green,
}

impl Channel {
    /// All channels in canonical order (SWIR, NIR, Green).
    pub const ALL: [Channel; 3] = [Channel::Swir, Channel::Nir, Channel::Green];

    pub fn wavelength_nm(self) -> u32 {
        match self {
            Channel::Swir => 1550,
            Channel::Nir => 905,
            Channel::Green => 532,
        }
    }

    /// Position in [`Channel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Swir => "swir",
            Channel::Nir => "nir",
            Channel::Green => "green",
        }
    }

    pub(crate) fn bit(self) -> u8 {
        1 << self.index()
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swir" | "1550" => Ok(Channel::Swir),
            "nir" | "905" => Ok(Channel::Nir),
            "green" | "532" => Ok(Channel::Green),
            other => Err(Error::invalid(format!("unknown channel '{other}'"))),
        }
    }
}

/// Forest component classes. The integer code is the serialized form and the
/// row/column order of every confusion matrix and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SemanticClass {
    Ground = 0,
    LowVegetation = 1,
    Trunk = 2,
    Branches = 3,
    Foliage = 4,
    WoodyDebris = 5,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; NUM_CLASSES] = [
        SemanticClass::Ground,
        SemanticClass::LowVegetation,
        SemanticClass::Trunk,
        SemanticClass::Branches,
        SemanticClass::Foliage,
        SemanticClass::WoodyDebris,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Ground => "Ground",
            SemanticClass::LowVegetation => "Low vegetation",
            SemanticClass::Trunk => "Trunk",
            SemanticClass::Branches => "Branches",
            SemanticClass::Foliage => "Foliage",
            SemanticClass::WoodyDebris => "Woody debris",
        }
    }

    /// Identifier without spaces, used in key-value reports and config files.
    pub fn key(self) -> &'static str {
        match self {
            SemanticClass::Ground => "ground",
            SemanticClass::LowVegetation => "low_vegetation",
            SemanticClass::Trunk => "trunk",
            SemanticClass::Branches => "branches",
            SemanticClass::Foliage => "foliage",
            SemanticClass::WoodyDebris => "woody_debris",
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemanticClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        if let Ok(code) = lower.parse::<u8>() {
            return SemanticClass::from_code(code)
                .ok_or_else(|| Error::invalid(format!("class code {code} out of range")));
        }
        SemanticClass::ALL
            .into_iter()
            .find(|c| c.key() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown class '{s}'")))
    }
}

/// A value per semantic class, indexed by [`SemanticClass`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerClass<T>(pub [T; NUM_CLASSES]);

impl<T: Copy> PerClass<T> {
    pub fn splat(value: T) -> Self {
        PerClass([value; NUM_CLASSES])
    }

    pub fn iter(&self) -> impl Iterator<Item = (SemanticClass, T)> + '_ {
        SemanticClass::ALL.into_iter().zip(self.0.iter().copied())
    }
}

impl<T> Index<SemanticClass> for PerClass<T> {
    type Output = T;

    fn index(&self, class: SemanticClass) -> &T {
        &self.0[class.index()]
    }
}

impl<T> IndexMut<SemanticClass> for PerClass<T> {
    fn index_mut(&mut self, class: SemanticClass) -> &mut T {
        &mut self.0[class.index()]
    }
}

/// A return from a single monochromatic scanner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub reflectance_db: f32,
    pub channel: Channel,
    pub label: Option<SemanticClass>,
}

impl ChannelPoint {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// All returns of one scanner.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCloud {
    channel: Channel,
    points: Vec<ChannelPoint>,
}

impl ChannelCloud {
    /// Fails if a point belongs to another channel or carries non-finite values.
    pub fn new(channel: Channel, points: Vec<ChannelPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.channel != channel {
                return Err(Error::invalid(format!(
                    "point {i} belongs to channel {} in a {channel} cloud",
                    p.channel
                )));
            }
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite coordinates"
                )));
            }
            if !p.reflectance_db.is_finite() {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite reflectance"
                )));
            }
        }
        Ok(ChannelCloud { channel, points })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn points(&self) -> &[ChannelPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(ChannelPoint::position).collect()
    }

    /// Keeps the points whose indices are listed, in the listed order.
    pub fn select(&self, indices: &[usize]) -> ChannelCloud {
        ChannelCloud {
            channel: self.channel,
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// A fused point carrying reflectance in all three channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultispectralPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub z_normalized: Option<f64>,
    /// Reflectance in dB, indexed by [`Channel::index`].
    pub reflectance_db: [f32; 3],
    pub label: Option<SemanticClass>,
}

impl MultispectralPoint {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn reflectance(&self, channel: Channel) -> f32 {
        self.reflectance_db[channel.index()]
    }
}

/// An ordered set of fused points plus free-text provenance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultispectralCloud {
    points: Vec<MultispectralPoint>,
    pub provenance: String,
}

impl MultispectralCloud {
    pub fn new(points: Vec<MultispectralPoint>, provenance: impl Into<String>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite coordinates"
                )));
            }
            if p.reflectance_db.iter().any(|r| !r.is_finite()) {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite reflectance"
                )));
            }
            if let Some(h) = p.z_normalized {
                if !(h.is_finite() && h >= 0.0) {
                    return Err(Error::invalid(format!(
                        "point {i} has invalid normalized height {h}"
                    )));
                }
            }
        }
        Ok(MultispectralCloud {
            points,
            provenance: provenance.into(),
        })
    }

    pub fn points(&self) -> &[MultispectralPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<MultispectralPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(MultispectralPoint::position)
            .collect()
    }

    pub fn has_labels(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.label.is_some())
    }

    pub fn has_z_normalized(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.z_normalized.is_some())
    }

    /// Ground-truth labels; errors on the first unlabeled point.
    pub fn labels(&self) -> Result<Vec<SemanticClass>> {
        self.points
            .iter()
            .enumerate()
            .map(|(index, p)| p.label.ok_or(Error::Unlabeled { index }))
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> MultispectralCloud {
        MultispectralCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Replaces the label of every point.
    pub fn with_labels(&self, labels: &[SemanticClass]) -> Result<MultispectralCloud> {
        if labels.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                self.points.len()
            )));
        }
        let points = self
            .points
            .iter()
            .zip(labels)
            .map(|(p, &l)| MultispectralPoint {
                label: Some(l),
                ..*p
            })
            .collect();
        Ok(MultispectralCloud {
            points,
            provenance: self.provenance.clone(),
        })
    }
}

/// Fraction of points in each class. Classes absent from the cloud map to 0.
pub fn class_distribution(cloud: &MultispectralCloud) -> Result<PerClass<f64>> {
    let labels = cloud.labels()?;
    if labels.is_empty() {
        return Err(Error::invalid("class distribution of an empty cloud"));
    }
    let mut counts = PerClass::<usize>::default();
    for l in &labels {
        counts[*l] += 1;
    }
    let total = labels.len() as f64;
    Ok(PerClass(counts.0.map(|c| c as f64 / total)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: f64, label: Option<SemanticClass>) -> MultispectralPoint {
        MultispectralPoint {
            x,
            y: 0.0,
            z: 0.0,
            z_normalized: None,
            reflectance_db: [0.0; 3],
            label,
        }
    }

    #[test]
    fn wavelengths_are_fixed() {
        let nm: Vec<u32> = Channel::ALL.iter().map(|c| c.wavelength_nm()).collect();
        assert_eq!(nm, vec![1550, 905, 532]);
    }

    #[test]
    fn class_codes_follow_report_order() {
        for (i, c) in SemanticClass::ALL.iter().enumerate() {
            assert_eq!(c.code() as usize, i);
            assert_eq!(SemanticClass::from_code(i as u8), Some(*c));
            assert_eq!(c.key().parse::<SemanticClass>().unwrap(), *c);
        }
        assert_eq!(SemanticClass::from_code(6), None);
    }

    #[test]
    fn single_class_distribution() {
        let cloud = MultispectralCloud::new(
            (0..4)
                .map(|i| point(i as f64, Some(SemanticClass::Ground)))
                .collect(),
            "",
        )
        .unwrap();
        let d = class_distribution(&cloud).unwrap();
        assert_eq!(d[SemanticClass::Ground], 1.0);
        assert!(d.0[1..].iter().all(|&f| f == 0.0));
    }

    #[test]
    fn two_class_distribution() {
        let labels = [
            SemanticClass::Ground,
            SemanticClass::Foliage,
            SemanticClass::Ground,
            SemanticClass::Foliage,
        ];
        let cloud =
            MultispectralCloud::new(labels.iter().map(|&l| point(0.0, Some(l))).collect(), "")
                .unwrap();
        let d = class_distribution(&cloud).unwrap();
        assert_eq!(d[SemanticClass::Ground], 0.5);
        assert_eq!(d[SemanticClass::Foliage], 0.5);
        assert_eq!(d.0.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn unlabeled_point_is_reported() {
        let cloud = MultispectralCloud::new(
            vec![
                point(0.0, Some(SemanticClass::Trunk)),
                point(1.0, None),
                point(2.0, None),
            ],
            "",
        )
        .unwrap();
        match class_distribution(&cloud) {
            Err(Error::Unlabeled { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_normalized_height() {
        let mut p = point(0.0, None);
        p.z_normalized = Some(-0.5);
        assert!(MultispectralCloud::new(vec![p], "").is_err());
    }

    #[test]
    fn channel_cloud_rejects_foreign_points() {
        let p = ChannelPoint {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            reflectance_db: -3.0,
            channel: Channel::Nir,
            label: None,
        };
        assert!(ChannelCloud::new(Channel::Swir, vec![p]).is_err());
        assert!(ChannelCloud::new(Channel::Nir, vec![p]).is_ok());
    }
}
