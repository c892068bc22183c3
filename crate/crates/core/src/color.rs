//! Value-suppressing uncertainty coloring.
//!
//! The symmetry ratio picks a color from a linear palette; the uncertainty level then
//! blends from a suppression gray towards that color.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tube::{TubeMesh, UncertaintyStats};

/// Viridis at entries 0, 16, ..., 255 of the 256-entry matplotlib table.
const VIRIDIS: [[f64; 3]; 17] = [
    [0.267004, 0.004874, 0.329415],
    [0.282327, 0.094955, 0.417331],
    [0.278826, 0.175490, 0.483397],
    [0.258965, 0.251537, 0.524736],
    [0.229739, 0.322361, 0.545706],
    [0.199430, 0.387607, 0.554642],
    [0.172719, 0.448791, 0.557885],
    [0.149039, 0.508051, 0.557250],
    [0.127568, 0.566949, 0.550556],
    [0.120081, 0.622161, 0.534946],
    [0.153894, 0.680203, 0.504172],
    [0.239374, 0.735588, 0.455688],
    [0.360741, 0.785964, 0.387814],
    [0.506271, 0.828786, 0.300362],
    [0.668054, 0.861999, 0.196293],
    [0.835270, 0.886029, 0.102646],
    [0.993248, 0.906157, 0.143936],
];

/// Matplotlib's `lightgray`, #d3d3d3.
pub const LIGHT_GRAY: [f64; 3] = [211.0 / 255.0, 211.0 / 255.0, 211.0 / 255.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub name: String,
    pub stops: Vec<[f64; 3]>,
}

impl Palette {
    pub fn new(name: impl Into<String>, stops: Vec<[f64; 3]>) -> Result<Self> {
        if stops.len() < 2 {
            return Err(Error::Config(format!(
                "a palette needs at least 2 stops, got {}",
                stops.len()
            )));
        }
        if stops.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config(
                "palette components must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            stops,
        })
    }

    pub fn viridis() -> Self {
        Self {
            name: "viridis".into(),
            stops: VIRIDIS.to_vec(),
        }
    }

    /// Dark-to-light gray ramp.
    pub fn grays() -> Self {
        Self {
            name: "grays".into(),
            stops: vec![[0.1; 3], [0.9; 3]],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "viridis" => Some(Self::viridis()),
            "grays" => Some(Self::grays()),
            _ => None,
        }
    }

    /// Reads a JSON array of `[r, g, b]` stops.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stops: Vec<[f64; 3]> = serde_json::from_str(&text)?;
        let name = path
            .file_stem()
            .map_or_else(|| "custom".into(), |s| s.to_string_lossy().into_owned());
        Self::new(name, stops)
    }

    /// A named palette or, failing that, a palette file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::by_name(name_or_path) {
            Some(p) => Ok(p),
            None => Self::from_file(name_or_path),
        }
    }

    /// Piecewise-linear lookup at `t ∈ [0, 1]`; exact at both ends.
    pub fn sample(&self, t: f64) -> [f64; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let last = self.stops.len() - 1;
        let pos = t * last as f64;
        let i = (pos.floor() as usize).min(last - 1);
        let f = pos - i as f64;
        let (a, b) = (self.stops[i], self.stops[i + 1]);
        [0, 1, 2].map(|k| (1.0 - f) * a[k] + f * b[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColormapConfig {
    pub palette: Palette,
    pub suppress_color: [f64; 3],
    /// Percentile of ring magnitudes mapped to full saturation, in `(0, 100]`.
    pub magnitude_percentile: f64,
    /// Fixed ceiling; resolved from the data when `None`.
    pub magnitude_ceiling: Option<f64>,
}

impl Default for ColormapConfig {
    fn default() -> Self {
        Self {
            palette: Palette::viridis(),
            suppress_color: LIGHT_GRAY,
            magnitude_percentile: 98.0,
            magnitude_ceiling: None,
        }
    }
}

impl ColormapConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.magnitude_percentile;
        if !(p > 0.0 && p <= 100.0) {
            return Err(Error::Config(format!(
                "percentile must lie in (0, 100], got {p}"
            )));
        }
        if let Some(c) = self.magnitude_ceiling {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("ceiling must be positive, got {c}")));
            }
        }
        Palette::new(self.palette.name.clone(), self.palette.stops.clone())?;
        if self.suppress_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config(
                "suppress color components must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn suppress_rgba(&self) -> [f32; 4] {
        let [r, g, b] = self.suppress_color;
        [r as f32, g as f32, b as f32, 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorSample {
    pub rgba: [f64; 4],
}

impl ColorSample {
    pub fn to_f32(self) -> [f32; 4] {
        self.rgba.map(|c| c as f32)
    }
}

/// Parses `#rrggbb` or `rrggbb`.
pub fn parse_hex_color(s: &str) -> Result<[f64; 3]> {
    let h = s.strip_prefix('#').unwrap_or(s);
    if h.len() != 6 || !h.is_ascii() {
        return Err(Error::arg(format!("expected a #rrggbb color, got {s:?}")));
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let byte = u8::from_str_radix(&h[2 * k..2 * k + 2], 16)
            .map_err(|_| Error::arg(format!("expected a #rrggbb color, got {s:?}")))?;
        *o = byte as f64 / 255.0;
    }
    Ok(out)
}

/// Linear-interpolation percentile of `values` (the default method of numpy).
pub fn percentile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    let hi = values[(i + 1).min(values.len() - 1)];
    Some(values[i] + f * (hi - values[i]))
}

/// Magnitude mapped to full saturation: the chosen percentile of all ring magnitudes.
/// A non-positive percentile falls back to the largest magnitude, and to 1 when every
/// magnitude is zero.
pub fn resolve_ceiling<'a>(
    stats: impl IntoIterator<Item = &'a UncertaintyStats>,
    magnitude_percentile: f64,
) -> f64 {
    let mut all: Vec<f64> = stats
        .into_iter()
        .flat_map(|s| s.magnitude.iter().copied())
        .filter(|m| m.is_finite())
        .collect();
    let max = all.iter().copied().fold(0.0, f64::max);
    match percentile(&mut all, magnitude_percentile) {
        Some(c) if c > 0.0 => c,
        _ if max > 0.0 => max,
        _ => 1.0,
    }
}

/// `mix(suppress, palette(symmetry), clamp(magnitude / ceiling, 0, 1))` in linear RGB.
pub fn color_for(
    magnitude: f64,
    symmetry: f64,
    config: &ColormapConfig,
    ceiling: f64,
) -> ColorSample {
    let level = (magnitude / ceiling).clamp(0.0, 1.0);
    let level = if level.is_nan() { 0.0 } else { level };
    let c = config.palette.sample(symmetry);
    let s = config.suppress_color;
    let rgb = [0, 1, 2].map(|k| (1.0 - level) * s[k] + level * c[k]);
    ColorSample {
        rgba: [rgb[0], rgb[1], rgb[2], 1.0],
    }
}

/// Per-vertex colors: every ring takes the color of its statistics, the apex the
/// suppression color and the end-cap center the color of the last ring.
pub fn color_tube(mesh: &mut TubeMesh, config: &ColormapConfig, ceiling: f64) -> Result<()> {
    let s = &mesh.stats;
    if s.len() != mesh.rings || s.symmetry.len() != s.len() {
        return Err(Error::arg(format!(
            "statistics cover {} rings, mesh has {}",
            s.len(),
            mesh.rings
        )));
    }
    let ring_colors: Vec<[f32; 4]> = (0..s.len())
        .map(|t| color_for(s.magnitude[t], s.symmetry[t], config, ceiling).to_f32())
        .collect();
    let mut colors = Vec::with_capacity(mesh.vertices.len());
    colors.push(
        color_for(
            0.0,
            s.symmetry.first().copied().unwrap_or(1.0),
            config,
            ceiling,
        )
        .to_f32(),
    );
    for c in &ring_colors {
        colors.extend(std::iter::repeat_n(*c, mesh.ring_stride));
    }
    if mesh.end_cap {
        colors.push(*ring_colors.last().expect("at least one ring"));
    }
    if colors.len() != mesh.vertices.len() {
        return Err(Error::arg(format!(
            "mesh has {} vertices, coloring produced {}",
            mesh.vertices.len(),
            colors.len()
        )));
    }
    mesh.colors = colors;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: [f64; 4], b: [f64; 3]) -> f64 {
        (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_magnitude_is_exact_gray() {
        let c = ColormapConfig::default();
        for k in 0..=20 {
            let s = color_for(0.0, k as f64 / 20.0, &c, 0.3);
            assert_eq!(&s.rgba[..3], &c.suppress_color[..]);
        }
    }

    #[test]
    fn full_level_hits_palette_endpoints() {
        let c = ColormapConfig::default();
        let stops = &c.palette.stops;
        assert_eq!(&color_for(1.0, 0.0, &c, 1.0).rgba[..3], &stops[0][..]);
        assert_eq!(
            &color_for(5.0, 1.0, &c, 1.0).rgba[..3],
            &stops[stops.len() - 1][..]
        );
        // Blue-ish start, yellow end.
        assert!(stops[0][2] > stops[0][1]);
        let end = stops[stops.len() - 1];
        assert!(end[0] > 0.9 && end[1] > 0.8 && end[2] < 0.2);
    }

    #[test]
    fn distance_from_gray_is_monotone() {
        let c = ColormapConfig::default();
        for sym in [0.0, 0.3, 0.77, 1.0] {
            let mut last = -1.0;
            for k in 0..=50 {
                let d = dist(
                    color_for(k as f64 * 0.03, sym, &c, 1.0).rgba,
                    c.suppress_color,
                );
                assert!(d >= last);
                last = d;
            }
        }
    }

    #[test]
    fn ceiling_from_order_statistics() {
        let s = UncertaintyStats {
            magnitude: (0..100).map(|v| v as f64).collect(),
            ..Default::default()
        };
        assert!((resolve_ceiling([&s], 98.0) - 97.02).abs() < 1e-12);
        let one = UncertaintyStats {
            magnitude: vec![0.4],
            ..Default::default()
        };
        assert_eq!(resolve_ceiling([&one], 98.0), 0.4);
        let zeros = UncertaintyStats {
            magnitude: vec![0.0; 5],
            ..Default::default()
        };
        assert_eq!(resolve_ceiling([&zeros], 98.0), 1.0);
    }

    #[test]
    fn hex_colors() {
        assert_eq!(parse_hex_color("#d3d3d3").unwrap(), LIGHT_GRAY);
        assert_eq!(parse_hex_color("ff0000").unwrap(), [1.0, 0.0, 0.0]);
        assert!(parse_hex_color("#12345").is_err());
        assert!(parse_hex_color("#gg0000").is_err());
    }

    #[test]
    fn palette_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.json");
        std::fs::write(&path, "[[0,0,1],[1,1,0]]").unwrap();
        let p = Palette::resolve(path.to_str().unwrap()).unwrap();
        assert_eq!(p.name, "ramp");
        assert_eq!(p.sample(0.5), [0.5, 0.5, 0.5]);
        std::fs::write(&path, "[[0,0,1]]").unwrap();
        assert!(Palette::from_file(&path).is_err());
    }
}
