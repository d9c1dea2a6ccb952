//! Labeled synthetic forest scenes.
//!
//! A scene is built from simple primitives: a ground surface, low-vegetation
//! tufts (ellipsoid volumes), trunks (vertical cylinder walls), branches
//! (thin oblique cylinders), foliage crowns (ellipsoid volumes) and woody
//! debris logs (horizontal cylinder walls resting on the ground). Point counts
//! per class follow the requested fractions exactly. Each point draws its
//! three reflectances from per-class normal distributions in dB, and every
//! channel cloud is an independent Bernoulli thinning of the reference cloud.

use std::f64::consts::PI;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::model::{
    Channel, ChannelCloud, ChannelPoint, MultispectralCloud, MultispectralPoint, PerClass,
    SemanticClass, NUM_CLASSES,
};

/// Reference-cloud class shares (percent).
pub const DEFAULT_CLASS_PERCENT: [f64; NUM_CLASSES] = [20.14, 6.54, 1.51, 2.52, 69.08, 0.23];

/// Relative point densities of the SWIR, NIR and Green scanners.
pub const DEFAULT_CHANNEL_DENSITY: [f64; 3] = [530.0, 163.0, 604.0];

/// Mean and standard deviation (dB) per class, channels in SWIR, NIR, Green
/// order. Low vegetation and foliage share their NIR and Green response and
/// differ in SWIR.
pub const DEFAULT_SPECTRA: [[(f64, f64); 3]; NUM_CLASSES] = [
    [(-8.0, 1.5), (-6.0, 1.5), (-10.0, 1.5)],
    [(-12.0, 1.5), (-4.0, 1.5), (-11.0, 1.5)],
    [(-5.0, 1.5), (-5.0, 1.5), (-13.0, 1.5)],
    [(-7.0, 1.5), (-6.5, 1.5), (-14.5, 1.5)],
    [(-16.0, 1.5), (-4.0, 1.5), (-11.0, 1.5)],
    [(-3.0, 1.5), (-7.0, 1.5), (-9.0, 1.5)],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terrain {
    Flat,
    /// Ground rises by `slope` metres per metre along X.
    Tilted {
        slope: f64,
    },
}

impl Terrain {
    fn height(self, x: f64) -> f64 {
        match self {
            Terrain::Flat => 0.0,
            Terrain::Tilted { slope } => slope * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel(pub PerClass<[(f64, f64); 3]>);

impl Default for SpectralModel {
    fn default() -> Self {
        SpectralModel(PerClass(DEFAULT_SPECTRA))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub extent_m: (f64, f64),
    pub terrain: Terrain,
    pub n_trees: usize,
    pub n_tufts: usize,
    pub n_logs: usize,
    /// Size of the reference cloud.
    pub n_points: usize,
    /// Class shares; normalized before use.
    pub class_fractions: PerClass<f64>,
    pub spectral_model: SpectralModel,
    pub channel_density: [f64; 3],
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            extent_m: (30.0, 30.0),
            terrain: Terrain::Flat,
            n_trees: 25,
            n_tufts: 60,
            n_logs: 6,
            n_points: 1_000_000,
            class_fractions: PerClass(DEFAULT_CLASS_PERCENT.map(|p| p / 100.0)),
            spectral_model: SpectralModel::default(),
            channel_density: DEFAULT_CHANNEL_DENSITY,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (w, d) = self.extent_m;
        if !(w.is_finite() && d.is_finite() && w >= 4.0 && d >= 4.0) {
            return Err(Error::invalid(format!(
                "scene extent {w} x {d} m is degenerate (both sides must be at least 4 m)"
            )));
        }
        if let Terrain::Tilted { slope } = self.terrain {
            if !slope.is_finite() {
                return Err(Error::invalid("terrain slope must be finite"));
            }
        }
        if self
            .class_fractions
            .0
            .iter()
            .any(|f| !(f.is_finite() && *f >= 0.0))
            || self.class_fractions.0[SemanticClass::Ground.index()] <= 0.0
        {
            return Err(Error::invalid(
                "class fractions must be non-negative with a positive ground share",
            ));
        }
        for (class, spectra) in self.spectral_model.0.iter() {
            for (mean, std) in spectra {
                if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                    return Err(Error::invalid(format!(
                        "invalid spectral model for {class}: mean {mean}, std {std}"
                    )));
                }
            }
        }
        if self
            .channel_density
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::invalid("channel densities must be positive"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("a scene needs at least one point"));
        }
        Ok(())
    }

    /// Keep probability of each channel: densities normalized to sum to one.
    pub fn channel_keep_probability(&self) -> [f64; 3] {
        let total: f64 = self.channel_density.iter().sum();
        self.channel_density.map(|v| v / total)
    }

    /// Points per class after dropping classes without primitives, by
    /// largest remainder so the counts sum to `n_points`.
    pub fn class_counts(&self) -> PerClass<usize> {
        let mut shares = self.class_fractions.0;
        for class in SemanticClass::ALL {
            if !self.has_primitives(class) {
                shares[class.index()] = 0.0;
            }
        }
        let total: f64 = shares.iter().sum();
        let exact = shares.map(|s| s / total * self.n_points as f64);
        let mut counts = exact.map(|e| e.floor() as usize);
        let mut rest = self.n_points - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..NUM_CLASSES).filter(|&i| shares[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            counts[i] += 1;
            rest -= 1;
        }
        PerClass(counts)
    }

    fn has_primitives(&self, class: SemanticClass) -> bool {
        match class {
            SemanticClass::Ground => true,
            SemanticClass::LowVegetation => self.n_tufts > 0,
            SemanticClass::Trunk | SemanticClass::Branches | SemanticClass::Foliage => {
                self.n_trees > 0
            }
            // Logs are fallen trees.
            SemanticClass::WoodyDebris => self.n_logs > 0 && self.n_trees > 0,
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    ///
    /// Keys: `width_m`, `depth_m`, `terrain` (`flat` or `tilted`), `slope`,
    /// `n_trees`, `n_tufts`, `n_logs`, `n_points`, `seed`,
    /// `fraction.<class>`, `spectral.<class>.<channel>` (`mean std`),
    /// `density.<channel>`.
    pub fn parse_config(text: &str) -> Result<SceneSpec> {
        let mut spec = SceneSpec::default();
        let mut terrain = "flat".to_string();
        let mut slope = 0.1;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                record: no,
                message: format!("config line {}: {msg}", no + 1),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected 'key = value'".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let float = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("'{v}' is not a number")))
            };
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(format!("'{v}' is not a count")))
            };
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["width_m"] => spec.extent_m.0 = float(value)?,
                ["depth_m"] => spec.extent_m.1 = float(value)?,
                ["terrain"] => terrain = value.to_string(),
                ["slope"] => slope = float(value)?,
                ["n_trees"] => spec.n_trees = int(value)?,
                ["n_tufts"] => spec.n_tufts = int(value)?,
                ["n_logs"] => spec.n_logs = int(value)?,
                ["n_points"] => spec.n_points = int(value)?,
                ["seed"] => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| err(format!("'{value}' is not a seed")))?
                }
                ["fraction", class] => {
                    let c: SemanticClass = class.parse()?;
                    spec.class_fractions[c] = float(value)?;
                }
                ["spectral", class, channel] => {
                    let c: SemanticClass = class.parse()?;
                    let ch: Channel = channel.parse()?;
                    let nums: Vec<&str> = value.split_whitespace().collect();
                    if nums.len() != 2 {
                        return Err(err("spectral entries take 'mean std'".into()));
                    }
                    spec.spectral_model.0[c][ch.index()] = (float(nums[0])?, float(nums[1])?);
                }
                ["density", channel] => {
                    let ch: Channel = channel.parse()?;
                    spec.channel_density[ch.index()] = float(value)?;
                }
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        spec.terrain = match terrain.as_str() {
            "flat" => Terrain::Flat,
            "tilted" => Terrain::Tilted { slope },
            other => return Err(Error::invalid(format!("unknown terrain '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_config_file(path: &Path) -> Result<SceneSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneSpec::parse_config(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// SWIR, NIR and Green clouds.
    pub channels: [ChannelCloud; 3],
    /// Every generated point with all three reflectances and its label.
    pub reference: MultispectralCloud,
}

#[derive(Debug, Clone, Copy)]
struct Tree {
    x: f64,
    y: f64,
    base: f64,
    height: f64,
    trunk_radius: f64,
    crown_radius: f64,
}

impl Tree {
    fn trunk_top(&self) -> f64 {
        0.85 * self.height
    }

    fn crown_center(&self) -> f64 {
        0.65 * self.height
    }

    fn crown_half_height(&self) -> f64 {
        0.3 * self.height
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    from: [f64; 3],
    to: [f64; 3],
    radius: f64,
}

impl Segment {
    fn length(&self) -> f64 {
        crate::index::dist_sq(&self.from, &self.to).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radii[0] * self.radii[1] * self.radii[2]
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 3] {
        loop {
            let u: [f64; 3] = [
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            ];
            if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return [0, 1, 2].map(|i| self.center[i] + u[i] * self.radii[i]);
            }
        }
    }
}

/// Uniform point on the wall of a cylinder around `seg` with small radial noise.
fn sample_tube(seg: &Segment, rng: &mut impl Rng) -> [f64; 3] {
    let axis = [0, 1, 2].map(|i| seg.to[i] - seg.from[i]);
    let len = seg.length();
    let a = axis.map(|v| v / len);
    // Any unit vector not parallel to the axis seeds the orthonormal frame.
    let seed = if a[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let mut e1 = cross(a, seed);
    let n1 = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
    e1 = e1.map(|v| v / n1);
    let e2 = cross(a, e1);
    let t: f64 = rng.random_range(0.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = seg.radius * (1.0 + 0.05 * rng.random_range(-1.0..=1.0));
    [0, 1, 2].map(|i| seg.from[i] + t * axis[i] + r * (phi.cos() * e1[i] + phi.sin() * e2[i]))
}

struct Layout {
    tufts: Vec<Ellipsoid>,
    trunks: Vec<Segment>,
    branches: Vec<Segment>,
    crowns: Vec<Ellipsoid>,
    logs: Vec<Segment>,
}

fn layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Layout {
    let (w, d) = spec.extent_m;
    let margin = 2.0_f64.min(w / 4.0).min(d / 4.0);
    let place = |rng: &mut ChaCha8Rng| {
        (
            rng.random_range(margin..w - margin),
            rng.random_range(margin..d - margin),
        )
    };
    let terrain = spec.terrain;

    let trees: Vec<Tree> = (0..spec.n_trees)
        .map(|_| {
            let (x, y) = place(rng);
            Tree {
                x,
                y,
                base: terrain.height(x),
                height: rng.random_range(8.0..14.0),
                trunk_radius: rng.random_range(0.12..0.25),
                crown_radius: rng.random_range(1.8..2.8),
            }
        })
        .collect();
    let trunks = trees
        .iter()
        .map(|t| Segment {
            from: [t.x, t.y, t.base],
            to: [t.x, t.y, t.base + t.trunk_top()],
            radius: t.trunk_radius,
        })
        .collect();
    let mut branches = Vec::new();
    for t in &trees {
        for _ in 0..8 {
            let h = t.base + rng.random_range(0.4..0.8) * t.height;
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let reach = rng.random_range(0.6..0.9) * t.crown_radius;
            let rise = rng.random_range(0.2..0.8) * reach;
            branches.push(Segment {
                from: [t.x, t.y, h],
                to: [t.x + reach * phi.cos(), t.y + reach * phi.sin(), h + rise],
                radius: rng.random_range(0.03..0.06),
            });
        }
    }
    let crowns = trees
        .iter()
        .map(|t| Ellipsoid {
            center: [t.x, t.y, t.base + t.crown_center()],
            radii: [t.crown_radius, t.crown_radius, t.crown_half_height()],
        })
        .collect();
    let tufts = (0..spec.n_tufts)
        .map(|_| {
            let (x, y) = place(rng);
            let radius = rng.random_range(0.4..0.8);
            let half_height = rng.random_range(0.25..0.45);
            Ellipsoid {
                center: [x, y, terrain.height(x) + half_height],
                radii: [radius, radius, half_height],
            }
        })
        .collect();
    let logs = if spec.n_trees == 0 {
        Vec::new()
    } else {
        (0..spec.n_logs)
            .map(|_| {
                let (x, y) = place(rng);
                let len = rng.random_range(2.0..4.0);
                let phi: f64 = rng.random_range(0.0..PI);
                let radius = rng.random_range(0.1..0.2);
                let (dx, dy) = (0.5 * len * phi.cos(), 0.5 * len * phi.sin());
                Segment {
                    from: [x - dx, y - dy, terrain.height(x - dx) + radius],
                    to: [x + dx, y + dy, terrain.height(x + dx) + radius],
                    radius,
                }
            })
            .collect()
    };
    Layout {
        tufts,
        trunks,
        branches,
        crowns,
        logs,
    }
}

fn picker(sizes: impl Iterator<Item = f64>) -> Option<WeightedIndex<f64>> {
    WeightedIndex::new(sizes.collect::<Vec<_>>()).ok()
}

/// Generates the scene described by `spec`. The same spec always yields the
/// same scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scene = layout(spec, &mut rng);
    let counts = spec.class_counts();
    let (w, d) = spec.extent_m;
    let noise = Normal::new(0.0, 0.02).expect("fixed std");

    let mut positions: Vec<([f64; 3], SemanticClass)> = Vec::with_capacity(spec.n_points);
    for class in SemanticClass::ALL {
        let n = counts[class];
        if n == 0 {
            continue;
        }
        match class {
            SemanticClass::Ground => {
                for _ in 0..n {
                    let x = rng.random_range(0.0..w);
                    let y = rng.random_range(0.0..d);
                    let z = spec.terrain.height(x) + noise.sample(&mut rng);
                    positions.push(([x, y, z], class));
                }
            }
            SemanticClass::LowVegetation | SemanticClass::Foliage => {
                let shapes = if class == SemanticClass::Foliage {
                    &scene.crowns
                } else {
                    &scene.tufts
                };
                let pick = picker(shapes.iter().map(Ellipsoid::volume))
                    .ok_or_else(|| Error::invalid(format!("no primitive for {class}")))?;
                for _ in 0..n {
                    let e = &shapes[pick.sample(&mut rng)];
                    let mut p = e.sample(&mut rng);
                    // Tufts are clipped at the terrain surface.
                    p[2] = p[2].max(spec.terrain.height(p[0]));
                    positions.push((p, class));
                }
            }
            SemanticClass::Trunk | SemanticClass::Branches | SemanticClass::WoodyDebris => {
                let segs = match class {
                    SemanticClass::Trunk => &scene.trunks,
                    SemanticClass::Branches => &scene.branches,
                    _ => &scene.logs,
                };
                let pick = picker(segs.iter().map(|s| s.length() * s.radius))
                    .ok_or_else(|| Error::invalid(format!("no primitive for {class}")))?;
                for _ in 0..n {
                    let s = &segs[pick.sample(&mut rng)];
                    positions.push((sample_tube(s, &mut rng), class));
                }
            }
        }
    }

    let spectra = spec.spectral_model.0 .0.map(|per_channel| {
        per_channel.map(|(mean, std)| Normal::new(mean, std).expect("validated std"))
    });
    let keep = spec.channel_keep_probability();
    let mut reference = Vec::with_capacity(positions.len());
    let mut channel_points: [Vec<ChannelPoint>; 3] = Default::default();
    for (p, class) in positions {
        let reflectance_db = [0, 1, 2].map(|c| spectra[class.index()][c].sample(&mut rng) as f32);
        reference.push(MultispectralPoint {
            x: p[0],
            y: p[1],
            z: p[2],
            z_normalized: None,
            reflectance_db,
            label: Some(class),
        });
        for channel in Channel::ALL {
            let c = channel.index();
            if rng.random_bool(keep[c]) {
                channel_points[c].push(ChannelPoint {
                    x: p[0],
                    y: p[1],
                    z: p[2],
                    reflectance_db: reflectance_db[c],
                    channel,
                    label: Some(class),
                });
            }
        }
    }
    let [swir, nir, green] = channel_points;
    Ok(SyntheticScene {
        channels: [
            ChannelCloud::new(Channel::Swir, swir)?,
            ChannelCloud::new(Channel::Nir, nir)?,
            ChannelCloud::new(Channel::Green, green)?,
        ],
        reference: MultispectralCloud::new(
            reference,
            format!("synthetic seed={} points={}", spec.seed, spec.n_points),
        )?,
    })
}
