//! Synthetic feature maps with labelled salient/static regions.
//!
//! A scene is a `(c, t, h, w)` tensor whose background is static and
//! non-salient at amplitude 0. Rectangles carry one of four region kinds;
//! salient kinds use `amp_salient`, non-salient kinds `amp_nonsalient`.
//! Static rectangles hold their amplitude in every frame. Dynamic ones
//! either oscillate in place, `amp * (1 + 0.5 cos(2 pi k t / T))`, or
//! translate along `w` by `floor(v t)` cells with wrap-around. Static
//! rectangles are painted first, so a translating rectangle covers whatever
//! it passes over. Seeded Gaussian noise of standard deviation
//! `noise_sigma` is added to every element in row-major order.
//!
//! Scenes round-trip through a flat `key = value` text format; see
//! [`SceneSpec::parse`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{FarError, Result};
use crate::rng::SeededRng;
use crate::tensor::{RTensor, Shape4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegionKind {
    DynamicSalient,
    StaticSalient,
    DynamicNonsalient,
    StaticNonsalient,
}

impl RegionKind {
    /// Expected amplitude ordering after disentanglement, highest first.
    pub const ORDER: [RegionKind; 4] = [
        RegionKind::DynamicSalient,
        RegionKind::StaticSalient,
        RegionKind::DynamicNonsalient,
        RegionKind::StaticNonsalient,
    ];

    pub fn is_salient(self) -> bool {
        matches!(self, RegionKind::DynamicSalient | RegionKind::StaticSalient)
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, RegionKind::DynamicSalient | RegionKind::DynamicNonsalient)
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::DynamicSalient => "dynamic-salient",
            RegionKind::StaticSalient => "static-salient",
            RegionKind::DynamicNonsalient => "dynamic-nonsalient",
            RegionKind::StaticNonsalient => "static-nonsalient",
        }
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegionKind {
    type Err = FarError;

    fn from_str(s: &str) -> Result<Self> {
        RegionKind::ORDER
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FarError::Spec(format!("unknown region kind {s:?}")))
    }
}

/// Half-open rectangle `[h0, h1) x [w0, w1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub h0: usize,
    pub h1: usize,
    pub w0: usize,
    pub w1: usize,
}

impl Rect {
    pub fn new(h0: usize, h1: usize, w0: usize, w1: usize) -> Self {
        Self { h0, h1, w0, w1 }
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.h0 < o.h1 && o.h0 < self.h1 && self.w0 < o.w1 && o.w0 < self.w1
    }

    fn area(&self) -> usize {
        (self.h1 - self.h0) * (self.w1 - self.w0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub rect: Rect,
    pub kind: RegionKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Temporal cosine at integer frequency `k` (cycles per clip).
    Oscillate { k: usize },
    /// Horizontal translation by `floor(v * t)` cells, wrapping around.
    Translate { v: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub shape: Shape4,
    pub regions: Vec<Region>,
    pub amp_salient: f64,
    pub amp_nonsalient: f64,
    pub motion: Motion,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// 4 channels, 8 frames, 16x16 cells; one 4x4 rectangle of each kind,
    /// dynamic ones oscillating at `k = 2`, zero background elsewhere.
    pub fn standard(noise_sigma: f64, seed: u64) -> Self {
        Self {
            shape: Shape4 { c: 4, t: 8, h: 16, w: 16 },
            regions: vec![
                Region { rect: Rect::new(2, 6, 2, 6), kind: RegionKind::DynamicSalient },
                Region { rect: Rect::new(2, 6, 10, 14), kind: RegionKind::StaticSalient },
                Region { rect: Rect::new(10, 14, 2, 6), kind: RegionKind::DynamicNonsalient },
                Region { rect: Rect::new(10, 14, 10, 14), kind: RegionKind::StaticNonsalient },
            ],
            amp_salient: 1.0,
            amp_nonsalient: 0.2,
            motion: Motion::Oscillate { k: 2 },
            noise_sigma,
            seed,
        }
    }

    /// A raw 3-channel clip for the end-to-end pipeline: 24 frames of
    /// 32x32 with one 8x8 rectangle per labelled kind, oscillating at `k = 2`.
    pub fn demo(seed: u64) -> Self {
        Self {
            shape: Shape4 { c: 3, t: 24, h: 32, w: 32 },
            regions: vec![
                Region { rect: Rect::new(4, 12, 4, 12), kind: RegionKind::DynamicSalient },
                Region { rect: Rect::new(4, 12, 20, 28), kind: RegionKind::StaticSalient },
                Region { rect: Rect::new(20, 28, 4, 12), kind: RegionKind::DynamicNonsalient },
                Region { rect: Rect::new(20, 28, 20, 28), kind: RegionKind::StaticNonsalient },
            ],
            amp_salient: 1.0,
            amp_nonsalient: 0.2,
            motion: Motion::Oscillate { k: 2 },
            noise_sigma: 0.05,
            seed,
        }
    }

    pub fn amplitude(&self, kind: RegionKind) -> f64 {
        if kind.is_salient() {
            self.amp_salient
        } else {
            self.amp_nonsalient
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        if !(self.amp_salient > self.amp_nonsalient && self.amp_nonsalient > 0.0) {
            return Err(FarError::Spec(format!(
                "need amp_salient > amp_nonsalient > 0, got {} and {}",
                self.amp_salient, self.amp_nonsalient
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(FarError::Spec(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        if let Motion::Translate { v } = self.motion {
            if !v.is_finite() {
                return Err(FarError::Spec("translation velocity must be finite".into()));
            }
        }
        for (i, r) in self.regions.iter().enumerate() {
            let q = r.rect;
            if q.h0 >= q.h1 || q.w0 >= q.w1 || q.h1 > s.h || q.w1 > s.w {
                return Err(FarError::Spec(format!(
                    "region {i} {q:?} is empty or outside {}x{}",
                    s.h, s.w
                )));
            }
            for (j, o) in self.regions[..i].iter().enumerate() {
                if q.overlaps(&o.rect) {
                    return Err(FarError::Spec(format!("regions {j} and {i} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Flat text form understood by [`SceneSpec::parse`].
    pub fn to_text(&self) -> String {
        let s = self.shape;
        let mut out = format!(
            "shape = {},{},{},{}\namp_salient = {}\namp_nonsalient = {}\n",
            s.c, s.t, s.h, s.w, self.amp_salient, self.amp_nonsalient
        );
        out += &match self.motion {
            Motion::Oscillate { k } => format!("motion = oscillate {k}\n"),
            Motion::Translate { v } => format!("motion = translate {v}\n"),
        };
        out += &format!("noise_sigma = {}\nseed = {}\n", self.noise_sigma, self.seed);
        for r in &self.regions {
            let q = r.rect;
            out += &format!("region = {} {} {} {} {}\n", r.kind, q.h0, q.h1, q.w0, q.w1);
        }
        out
    }

    /// Parses `key = value` lines. Keys: `shape` (`c,t,h,w`), `amp_salient`,
    /// `amp_nonsalient`, `motion` (`oscillate K` or `translate V`),
    /// `noise_sigma`, `seed`, and repeated `region` (`KIND h0 h1 w0 w1`).
    /// `#` starts a comment. `shape` is required; the rest default to
    /// amplitudes 1.0/0.2, `oscillate 1`, no noise, seed 0, no regions.
    pub fn parse(text: &str) -> Result<Self> {
        let mut shape = None;
        let mut spec = SceneSpec {
            shape: Shape4 { c: 1, t: 1, h: 1, w: 1 },
            regions: Vec::new(),
            amp_salient: 1.0,
            amp_nonsalient: 0.2,
            motion: Motion::Oscillate { k: 1 },
            noise_sigma: 0.0,
            seed: 0,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| FarError::Spec(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>().map_err(|_| err(format!("bad integer {v:?}")))
            };
            match key {
                "shape" => {
                    let d: Vec<usize> = value.split(',').map(|p| int(p.trim())).collect::<Result<_>>()?;
                    if d.len() != 4 {
                        return Err(err("shape needs four extents c,t,h,w".into()));
                    }
                    shape = Some(Shape4::new(d[0], d[1], d[2], d[3]).map_err(|e| err(e.to_string()))?);
                }
                "amp_salient" => spec.amp_salient = num(value)?,
                "amp_nonsalient" => spec.amp_nonsalient = num(value)?,
                "noise_sigma" => spec.noise_sigma = num(value)?,
                "seed" => spec.seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "motion" => {
                    let mut parts = value.split_whitespace();
                    spec.motion = match (parts.next(), parts.next(), parts.next()) {
                        (Some("oscillate"), Some(k), None) => Motion::Oscillate { k: int(k)? },
                        (Some("translate"), Some(v), None) => Motion::Translate { v: num(v)? },
                        _ => return Err(err(format!("bad motion {value:?}"))),
                    };
                }
                "region" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 5 {
                        return Err(err("region needs KIND h0 h1 w0 w1".into()));
                    }
                    let kind = parts[0].parse().map_err(|e: FarError| err(e.to_string()))?;
                    let rect = Rect::new(int(parts[1])?, int(parts[2])?, int(parts[3])?, int(parts[4])?);
                    spec.regions.push(Region { rect, kind });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        spec.shape = shape.ok_or_else(|| FarError::Spec("missing shape".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Region kind of every `(t, h, w)` cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabelMap {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub labels: Vec<RegionKind>,
}

impl RegionLabelMap {
    pub fn get(&self, t: usize, h: usize, w: usize) -> RegionKind {
        self.labels[(t * self.h + h) * self.w + w]
    }

    /// Labels at `(t * st, h * sh, w * sw)`, matching a strided feature grid.
    pub fn subsample(&self, frames: &[usize], sh: usize, sw: usize, out_h: usize, out_w: usize) -> Self {
        let mut labels = Vec::with_capacity(frames.len() * out_h * out_w);
        for &t in frames {
            for h in 0..out_h {
                for w in 0..out_w {
                    labels.push(self.get(t, (h * sh).min(self.h - 1), (w * sw).min(self.w - 1)));
                }
            }
        }
        Self {
            t: frames.len(),
            h: out_h,
            w: out_w,
            labels,
        }
    }
}

pub fn generate(spec: &SceneSpec) -> Result<(RTensor, RegionLabelMap)> {
    spec.validate()?;
    let s = spec.shape;
    let plane = s.hw();
    let mut values = vec![0.0; s.t * plane];
    let mut labels = vec![RegionKind::StaticNonsalient; s.t * plane];

    let (statics, dynamics): (Vec<&Region>, Vec<&Region>) =
        spec.regions.iter().partition(|r| !r.kind.is_dynamic());
    for t in 0..s.t {
        for r in statics.iter().chain(dynamics.iter()) {
            let amp = spec.amplitude(r.kind);
            let (value, shift) = match (r.kind.is_dynamic(), spec.motion) {
                (false, _) => (amp, 0),
                (true, Motion::Oscillate { k }) => {
                    let phase = TAU * (k * t) as f64 / s.t as f64;
                    (amp * (1.0 + 0.5 * phase.cos()), 0)
                }
                (true, Motion::Translate { v }) => {
                    let cells = (v * t as f64).floor() as i64;
                    (amp, cells.rem_euclid(s.w as i64) as usize)
                }
            };
            for h in r.rect.h0..r.rect.h1 {
                for w in r.rect.w0..r.rect.w1 {
                    let i = t * plane + h * s.w + (w + shift) % s.w;
                    values[i] = value;
                    labels[i] = r.kind;
                }
            }
        }
    }

    let mut rng = SeededRng::new(spec.seed);
    let mut data = Vec::with_capacity(s.numel());
    for _ in 0..s.c {
        for &v in &values {
            let noise = if spec.noise_sigma > 0.0 {
                spec.noise_sigma * rng.normal()
            } else {
                0.0
            };
            data.push(v + noise);
        }
    }
    let tensor = RTensor::from_vec(s, data)?;
    let map = RegionLabelMap {
        t: s.t,
        h: s.h,
        w: s.w,
        labels,
    };
    Ok((tensor, map))
}

/// Mean `|value|` over all `(c, t, h, w)` whose `(t, h, w)` cell carries each
/// label. Kinds with no cells are absent from the map.
pub fn region_mean_amplitudes(out: &RTensor, labels: &RegionLabelMap) -> Result<BTreeMap<RegionKind, f64>> {
    let s = out.shape4()?;
    if (s.t, s.h, s.w) != (labels.t, labels.h, labels.w) {
        return Err(FarError::shape(format!(
            "labels are {}x{}x{}, tensor is {s}",
            labels.t, labels.h, labels.w
        )));
    }
    let cells = labels.labels.len();
    let mut sums: BTreeMap<RegionKind, (f64, usize)> = BTreeMap::new();
    for (i, &v) in out.data().iter().enumerate() {
        let e = sums.entry(labels.labels[i % cells]).or_insert((0.0, 0));
        e.0 += v.abs();
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect())
}

/// True when the means strictly follow [`RegionKind::ORDER`].
pub fn is_strictly_ordered(means: &BTreeMap<RegionKind, f64>) -> bool {
    RegionKind::ORDER
        .windows(2)
        .all(|p| match (means.get(&p[0]), means.get(&p[1])) {
            (Some(a), Some(b)) => a > b,
            _ => false,
        })
}

/// Number of `(h, w)` cells each rectangle covers, for diagnostics.
pub fn region_areas(spec: &SceneSpec) -> Vec<(RegionKind, usize)> {
    spec.regions.iter().map(|r| (r.kind, r.rect.area())).collect()
}
