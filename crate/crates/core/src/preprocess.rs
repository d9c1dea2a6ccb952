//! Preprocessing chain: statistical outlier removal, channel fusion, height
//! normalization and the feature normalizations (centering, robust + min-max
//! scaling).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::model::{Channel, ChannelCloud, MultispectralCloud, MultispectralPoint};
use crate::stats::{quantile_sorted, sorted_copy};

/// Statistical outlier removal parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorParams {
    pub k_neighbors: usize,
    pub sigma_multiplier: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        SorParams {
            k_neighbors: 6,
            sigma_multiplier: 1.0,
        }
    }
}

impl SorParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::invalid("SOR k_neighbors must be at least 1"));
        }
        if self.sigma_multiplier.is_nan() || self.sigma_multiplier <= 0.0 {
            return Err(Error::invalid("SOR sigma multiplier must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeParams {
    pub radius_m: f64,
}

impl MergeParams {
    /// Each missing band comes from exactly one neighbor.
    pub const NEIGHBORS: usize = 1;

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(Error::invalid("merge radius must be finite and positive"));
        }
        Ok(())
    }
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams { radius_m: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightNormParams {
    pub cell_size_m: f64,
}

impl Default for HeightNormParams {
    fn default() -> Self {
        HeightNormParams { cell_size_m: 1.0 }
    }
}

impl HeightNormParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return Err(Error::invalid("cell size must be finite and positive"));
        }
        Ok(())
    }
}

/// Anything [`sor_filter`] can thin.
pub trait PointSet: Sized {
    fn positions(&self) -> Vec<[f64; 3]>;
    fn select(&self, indices: &[usize]) -> Self;
}

impl PointSet for ChannelCloud {
    fn positions(&self) -> Vec<[f64; 3]> {
        ChannelCloud::positions(self)
    }

    fn select(&self, indices: &[usize]) -> Self {
        ChannelCloud::select(self, indices)
    }
}

impl PointSet for MultispectralCloud {
    fn positions(&self) -> Vec<[f64; 3]> {
        MultispectralCloud::positions(self)
    }

    fn select(&self, indices: &[usize]) -> Self {
        MultispectralCloud::select(self, indices)
    }
}

#[derive(Debug, Clone)]
pub struct SorOutput<C> {
    pub cloud: C,
    /// Indices (into the input) of the removed points, ascending.
    pub removed: Vec<usize>,
}

/// Mean distance from each point to its `k` nearest other points.
pub fn mean_knn_distances(positions: &[[f64; 3]], k: usize) -> Vec<f64> {
    let index = SpatialIndex::new(positions.to_vec());
    (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let mut neighbors = index.knn(&positions[i], k + 1);
            match neighbors.iter().position(|n| n.index == i) {
                Some(pos) => {
                    neighbors.remove(pos);
                }
                None => {
                    neighbors.pop();
                }
            }
            neighbors.iter().map(|n| n.dist_sq.sqrt()).sum::<f64>() / k as f64
        })
        .collect()
}

/// Statistical outlier removal: keeps a point iff its mean k-NN distance is at
/// most `mean + sigma_multiplier * std` of all mean distances.
pub fn sor_filter<C: PointSet>(cloud: &C, params: &SorParams) -> Result<SorOutput<C>> {
    params.validate()?;
    let positions = cloud.positions();
    if positions.len() <= params.k_neighbors {
        return Err(Error::invalid(format!(
            "SOR needs more than {} points, cloud has {}",
            params.k_neighbors,
            positions.len()
        )));
    }
    let mean_dists = mean_knn_distances(&positions, params.k_neighbors);
    let n = mean_dists.len() as f64;
    let mu = mean_dists.iter().sum::<f64>() / n;
    let sigma = (mean_dists.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n).sqrt();
    let threshold = mu + params.sigma_multiplier * sigma;

    let mut kept = Vec::with_capacity(positions.len());
    let mut removed = Vec::new();
    for (i, &d) in mean_dists.iter().enumerate() {
        if d <= threshold {
            kept.push(i);
        } else {
            removed.push(i);
        }
    }
    Ok(SorOutput {
        cloud: cloud.select(&kept),
        removed,
    })
}

/// Where a fused point's geometry and reflectances came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeSource {
    /// Channel cloud and index supplying the coordinates.
    pub candidate: (Channel, usize),
    /// Index into each channel cloud (by [`Channel::index`]) supplying that band.
    pub sources: [usize; 3],
}

/// Fuses three monochromatic clouds into one multispectral cloud.
///
/// Every input point is a candidate (SWIR points first, then NIR, then
/// Green). A candidate survives when each channel has a point within
/// `radius_m`; it keeps its own coordinates and label and takes each band's
/// reflectance from that channel's nearest such point.
pub fn merge_channels(
    swir: &ChannelCloud,
    nir: &ChannelCloud,
    green: &ChannelCloud,
    params: &MergeParams,
) -> Result<MultispectralCloud> {
    merge_channels_traced(swir, nir, green, params).map(|(cloud, _)| cloud)
}

/// [`merge_channels`] plus the source record of every output point.
pub fn merge_channels_traced(
    swir: &ChannelCloud,
    nir: &ChannelCloud,
    green: &ChannelCloud,
    params: &MergeParams,
) -> Result<(MultispectralCloud, Vec<MergeSource>)> {
    params.validate()?;
    let clouds = [swir, nir, green];
    for (cloud, expected) in clouds.iter().zip(Channel::ALL) {
        if cloud.channel() != expected {
            return Err(Error::invalid(format!(
                "expected a {expected} cloud, got {}",
                cloud.channel()
            )));
        }
        if cloud.is_empty() {
            return Err(Error::invalid(format!("{expected} cloud is empty")));
        }
    }
    let indices: Vec<SpatialIndex> = clouds
        .iter()
        .map(|c| SpatialIndex::new(c.positions()))
        .collect();

    let candidates: Vec<(Channel, usize)> = clouds
        .iter()
        .flat_map(|c| (0..c.len()).map(move |i| (c.channel(), i)))
        .collect();

    let fused: Vec<Option<(MultispectralPoint, MergeSource)>> = candidates
        .par_iter()
        .map(|&(channel, i)| {
            let p = clouds[channel.index()].points()[i];
            let q = p.position();
            let mut sources = [0usize; 3];
            let mut reflectance = [0f32; 3];
            for c in Channel::ALL {
                let hit = indices[c.index()].nearest_within(&q, params.radius_m)?;
                sources[c.index()] = hit.index;
                reflectance[c.index()] = clouds[c.index()].points()[hit.index].reflectance_db;
            }
            Some((
                MultispectralPoint {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    z_normalized: None,
                    reflectance_db: reflectance,
                    label: p.label,
                },
                MergeSource {
                    candidate: (channel, i),
                    sources,
                },
            ))
        })
        .collect();

    let (points, sources): (Vec<_>, Vec<_>) = fused.into_iter().flatten().unzip();
    let provenance = format!(
        "merge radius_m={} neighbors={} candidates={} fused={}",
        params.radius_m,
        MergeParams::NEIGHBORS,
        candidates.len(),
        points.len()
    );
    Ok((MultispectralCloud::new(points, provenance)?, sources))
}

/// Height above a gridded local-minimum terrain proxy, shifted so the lowest
/// point sits at exactly 0.
pub fn normalize_height(
    cloud: &MultispectralCloud,
    params: &HeightNormParams,
) -> Result<MultispectralCloud> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::invalid("cannot normalize heights of an empty cloud"));
    }
    let points = cloud.points();
    let min_x = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let min_y = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let cell_of = |p: &MultispectralPoint| {
        (
            ((p.x - min_x) / params.cell_size_m).floor() as i64,
            ((p.y - min_y) / params.cell_size_m).floor() as i64,
        )
    };

    // (minimum z, point count) per occupied cell.
    let mut cells: HashMap<(i64, i64), (f64, usize)> = HashMap::new();
    for p in points {
        let e = cells.entry(cell_of(p)).or_insert((f64::INFINITY, 0));
        e.0 = e.0.min(p.z);
        e.1 += 1;
    }
    let local_min = |cell: (i64, i64)| {
        let (own_min, count) = cells[&cell];
        if count >= 3 {
            return own_min;
        }
        let mut m = own_min;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&(z, _)) = cells.get(&(cell.0 + dx, cell.1 + dy)) {
                    m = m.min(z);
                }
            }
        }
        m
    };

    let provisional: Vec<f64> = points.iter().map(|p| p.z - local_min(cell_of(p))).collect();
    let floor = provisional.iter().copied().fold(f64::INFINITY, f64::min);
    let normalized = points
        .iter()
        .zip(&provisional)
        .map(|(p, h)| MultispectralPoint {
            z_normalized: Some(h - floor),
            ..*p
        })
        .collect();
    let provenance = join_provenance(
        &cloud.provenance,
        &format!("normalize_height cell_size_m={}", params.cell_size_m),
    );
    MultispectralCloud::new(normalized, provenance)
}

/// Shifts X and Y so both have zero mean. Z is untouched.
pub fn center_planimetric(cloud: &MultispectralCloud) -> Result<MultispectralCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot center an empty cloud"));
    }
    let xs: Vec<f64> = cloud.points().iter().map(|p| p.x).collect();
    let ys: Vec<f64> = cloud.points().iter().map(|p| p.y).collect();
    let cx = center_values(&xs);
    let cy = center_values(&ys);
    let points = cloud
        .points()
        .iter()
        .zip(cx.iter().zip(&cy))
        .map(|(p, (&x, &y))| MultispectralPoint { x, y, ..*p })
        .collect();
    MultispectralCloud::new(points, cloud.provenance.clone())
}

/// Subtracts the mean from every value.
pub fn center_values(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

/// Robust scaling `(v - median) / IQR` followed by min-max scaling to `[0, 1]`.
///
/// With a zero IQR the robust stage is skipped; a constant input maps to 0.5.
pub fn robust_minmax_scale(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let sorted = sorted_copy(values);
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let robust: Vec<f64> = if iqr > 0.0 {
        values.iter().map(|v| (v - median) / iqr).collect()
    } else {
        values.to_vec()
    };
    let lo = robust.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = robust.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.5; values.len()];
    }
    let span = hi - lo;
    robust
        .iter()
        .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect()
}

pub(crate) fn join_provenance(base: &str, step: &str) -> String {
    if base.is_empty() {
        step.to_string()
    } else {
        format!("{base}; {step}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelPoint, SemanticClass};

    fn mpoint(x: f64, y: f64, z: f64) -> MultispectralPoint {
        MultispectralPoint {
            x,
            y,
            z,
            z_normalized: None,
            reflectance_db: [0.0; 3],
            label: None,
        }
    }

    fn mcloud(pts: &[[f64; 3]]) -> MultispectralCloud {
        MultispectralCloud::new(pts.iter().map(|p| mpoint(p[0], p[1], p[2])).collect(), "").unwrap()
    }

    fn cpoint(channel: Channel, x: f64, y: f64, z: f64, r: f32) -> ChannelPoint {
        ChannelPoint {
            x,
            y,
            z,
            reflectance_db: r,
            channel,
            label: Some(SemanticClass::Ground),
        }
    }

    #[test]
    fn sor_removes_far_point_from_grid() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64, j as f64, 0.0]);
            }
        }
        pts.push([4.5, 4.5, 50.0]);
        let out = sor_filter(&mcloud(&pts), &SorParams::default()).unwrap();
        assert_eq!(out.removed, vec![100]);
        assert_eq!(out.cloud.len(), 100);
    }

    #[test]
    fn sor_keeps_everything_when_all_distances_match() {
        // Every point's nearest neighbor is exactly 1 m away, so sigma = 0.
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64, j as f64, 0.0]);
            }
        }
        let params = SorParams {
            k_neighbors: 1,
            sigma_multiplier: 1.0,
        };
        let out = sor_filter(&mcloud(&pts), &params).unwrap();
        assert!(out.removed.is_empty());
    }

    #[test]
    fn sor_requires_more_than_k_points() {
        let pts = vec![[0.0, 0.0, 0.0]; 6];
        assert!(sor_filter(&mcloud(&pts), &SorParams::default()).is_err());
        let pts = vec![[0.0, 0.0, 0.0]; 7];
        assert!(sor_filter(&mcloud(&pts), &SorParams::default()).is_ok());
    }

    #[test]
    fn sor_rejects_bad_params() {
        let pts = vec![[0.0, 0.0, 0.0]; 20];
        for params in [
            SorParams {
                k_neighbors: 0,
                sigma_multiplier: 1.0,
            },
            SorParams {
                k_neighbors: 3,
                sigma_multiplier: 0.0,
            },
        ] {
            assert!(sor_filter(&mcloud(&pts), &params).is_err());
        }
    }

    #[test]
    fn coincident_channels_fuse() {
        let swir = ChannelCloud::new(Channel::Swir, vec![cpoint(Channel::Swir, 0., 0., 0., -1.0)])
            .unwrap();
        let nir =
            ChannelCloud::new(Channel::Nir, vec![cpoint(Channel::Nir, 0., 0., 0., -2.0)]).unwrap();
        let green = ChannelCloud::new(
            Channel::Green,
            vec![cpoint(Channel::Green, 0., 0., 0., -3.0)],
        )
        .unwrap();
        let fused = merge_channels(&swir, &nir, &green, &MergeParams::default()).unwrap();
        assert_eq!(fused.len(), 3);
        for p in fused.points() {
            assert_eq!(p.reflectance_db, [-1.0, -2.0, -3.0]);
            assert_eq!(p.label, Some(SemanticClass::Ground));
        }
    }

    #[test]
    fn incomplete_spectra_are_discarded() {
        let swir = ChannelCloud::new(Channel::Swir, vec![cpoint(Channel::Swir, 0., 0., 0., -1.0)])
            .unwrap();
        let nir =
            ChannelCloud::new(Channel::Nir, vec![cpoint(Channel::Nir, 0.3, 0., 0., -2.0)]).unwrap();
        let green = ChannelCloud::new(
            Channel::Green,
            vec![cpoint(Channel::Green, 9., 9., 9., -3.0)],
        )
        .unwrap();
        let fused = merge_channels(&swir, &nir, &green, &MergeParams::default()).unwrap();
        assert!(fused.is_empty());
    }

    #[test]
    fn merge_rejects_empty_or_swapped_inputs() {
        let swir = ChannelCloud::new(Channel::Swir, vec![cpoint(Channel::Swir, 0., 0., 0., -1.0)])
            .unwrap();
        let nir = ChannelCloud::new(Channel::Nir, vec![]).unwrap();
        let green = ChannelCloud::new(
            Channel::Green,
            vec![cpoint(Channel::Green, 0., 0., 0., -3.0)],
        )
        .unwrap();
        let p = MergeParams::default();
        assert!(merge_channels(&swir, &nir, &green, &p).is_err());
        assert!(merge_channels(&green, &swir, &green, &p).is_err());
        assert!(merge_channels(&swir, &swir, &green, &MergeParams { radius_m: 0.0 }).is_err());
    }

    #[test]
    fn flat_terrain_normalizes_to_zero() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push([i as f64 * 0.37, j as f64 * 0.41, 5.0]);
            }
        }
        let out = normalize_height(&mcloud(&pts), &HeightNormParams::default()).unwrap();
        assert!(out.points().iter().all(|p| p.z_normalized == Some(0.0)));
    }

    #[test]
    fn point_above_plane_in_same_cell() {
        let mut pts = vec![
            [0.1, 0.1, 0.0],
            [0.5, 0.5, 0.0],
            [0.9, 0.2, 0.0],
            [0.4, 0.6, 3.0],
        ];
        pts.push([0.7, 0.7, 0.0]);
        let out = normalize_height(&mcloud(&pts), &HeightNormParams::default()).unwrap();
        assert_eq!(out.points()[3].z_normalized, Some(3.0));
    }

    #[test]
    fn sparse_cell_borrows_neighbor_minimum() {
        // The lone point in cell (1, 0) is measured against cell (0, 0).
        let pts = vec![
            [0.1, 0.1, 1.0],
            [0.2, 0.5, 1.0],
            [0.6, 0.3, 1.0],
            [1.5, 0.5, 4.0],
        ];
        let out = normalize_height(&mcloud(&pts), &HeightNormParams::default()).unwrap();
        assert_eq!(out.points()[3].z_normalized, Some(3.0));
    }

    #[test]
    fn tilted_terrain_trunk_height() {
        let cell = 1.0;
        let mut pts = Vec::new();
        for i in 0..=200 {
            for j in 0..=40 {
                let x = i as f64 * 0.1;
                let y = j as f64 * 0.1;
                pts.push([x, y, 0.1 * x]);
            }
        }
        let (tx, ty) = (10.05, 2.05);
        let base = 0.1 * tx;
        for k in 0..=100 {
            pts.push([tx, ty, base + k as f64 * 0.1]);
        }
        let out = normalize_height(&mcloud(&pts), &HeightNormParams { cell_size_m: cell }).unwrap();
        let top = out.points().last().unwrap().z_normalized.unwrap();
        assert!((top - 10.0).abs() <= 0.1 * cell + 1e-9, "trunk top {top}");
        let min = out
            .points()
            .iter()
            .map(|p| p.z_normalized.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.0);
    }

    #[test]
    fn centering_examples() {
        let out = center_planimetric(&mcloud(&[[0.0, 3.0, 1.0], [2.0, 5.0, 2.0]])).unwrap();
        let xs: Vec<f64> = out.points().iter().map(|p| p.x).collect();
        let ys: Vec<f64> = out.points().iter().map(|p| p.y).collect();
        assert_eq!(xs, vec![-1.0, 1.0]);
        assert_eq!(ys, vec![-1.0, 1.0]);
        assert_eq!(out.points()[1].z, 2.0);
        let again = center_planimetric(&out).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn robust_minmax_examples() {
        assert_eq!(
            robust_minmax_scale(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(robust_minmax_scale(&[7.0, 7.0, 7.0]), vec![0.5; 3]);
        // Zero IQR but not constant: robust stage skipped.
        assert_eq!(
            robust_minmax_scale(&[1.0, 1.0, 1.0, 1.0, 3.0]),
            vec![0.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert!(robust_minmax_scale(&[]).is_empty());
    }
}
