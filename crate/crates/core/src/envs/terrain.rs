//! Heightmap terrain: a regular grid of heights with bilinear lookup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Parameters of the procedural terrain: a ridge across x with a saddle
/// crossing it, plus optional hills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProceduralTerrain {
    pub resolution: f64,
    pub base: f64,
    pub ridge_height: f64,
    pub ridge_x: f64,
    pub ridge_width: f64,
    pub saddle_y: f64,
    pub saddle_depth: f64,
    pub saddle_width: f64,
    #[serde(default)]
    pub hills: Vec<Hill>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hill {
    pub center: [f64; 2],
    pub height: f64,
    pub radius: f64,
}

impl ProceduralTerrain {
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let ridge = (-(x - self.ridge_x).powi(2) / (2.0 * self.ridge_width.powi(2))).exp();
        let saddle = (-(y - self.saddle_y).powi(2) / (2.0 * self.saddle_width.powi(2))).exp();
        let mut h = self.base + ridge * (self.ridge_height - self.saddle_depth * saddle);
        for hill in &self.hills {
            let d2 = (x - hill.center[0]).powi(2) + (y - hill.center[1]).powi(2);
            h += hill.height * (-d2 / (2.0 * hill.radius.powi(2))).exp();
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightmap {
    /// World coordinates of grid sample `[0][0]`.
    pub origin: [f64; 2],
    /// Sample spacing along x and y.
    pub spacing: [f64; 2],
    /// `heights[row][col]`, rows along y, columns along x.
    pub heights: Vec<Vec<f64>>,
}

impl Heightmap {
    pub fn new(origin: [f64; 2], spacing: [f64; 2], heights: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let cols = heights.first().map_or(0, Vec::len);
        if heights.len() < 2 || cols < 2 {
            return Err(ModelError::InvalidState("heightmap needs at least 2x2 samples".into()));
        }
        if heights.iter().any(|r| r.len() != cols) {
            return Err(ModelError::InvalidState("heightmap rows have different lengths".into()));
        }
        if heights.iter().flatten().any(|h| !h.is_finite()) {
            return Err(ModelError::InvalidState("heightmap has non-finite samples".into()));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) {
            return Err(ModelError::InvalidState("heightmap spacing must be positive".into()));
        }
        Ok(Self {
            origin,
            spacing,
            heights,
        })
    }

    /// Samples `terrain` over `[x0, x1] x [y0, y1]`.
    pub fn procedural(terrain: &ProceduralTerrain, x: [f64; 2], y: [f64; 2]) -> Result<Self, ModelError> {
        let res = terrain.resolution;
        if !(res > 0.0) {
            return Err(ModelError::InvalidState("terrain resolution must be positive".into()));
        }
        let cols = ((x[1] - x[0]) / res).ceil() as usize + 1;
        let rows = ((y[1] - y[0]) / res).ceil() as usize + 1;
        let heights = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| terrain.height_at(x[0] + c as f64 * res, y[0] + r as f64 * res))
                    .collect()
            })
            .collect();
        Self::new([x[0], y[0]], [res, res], heights)
    }

    /// Reads a headerless CSV grid of heights spread over `[x0, x1] x [y0, y1]`.
    pub fn from_csv(path: &Path, x: [f64; 2], y: [f64; 2]) -> Result<Self, ModelError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| ModelError::InvalidState(format!("{}: {e}", path.display())))?;
        let mut heights = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ModelError::InvalidState(format!("{}: {e}", path.display())))?;
            let row = record
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ModelError::InvalidState(format!("{}: {e}", path.display())))?;
            heights.push(row);
        }
        let rows = heights.len().max(2);
        let cols = heights.first().map_or(2, Vec::len).max(2);
        let spacing = [(x[1] - x[0]) / (cols - 1) as f64, (y[1] - y[0]) / (rows - 1) as f64];
        Self::new([x[0], y[0]], spacing, heights)
    }

    /// Bilinear interpolation, clamped to the grid edge outside it.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let rows = self.heights.len();
        let cols = self.heights[0].len();
        let fx = ((x - self.origin[0]) / self.spacing[0]).clamp(0.0, (cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.spacing[1]).clamp(0.0, (rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(cols - 2);
        let r0 = (fy.floor() as usize).min(rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h = &self.heights;
        let bottom = h[r0][c0] * (1.0 - tx) + h[r0][c0 + 1] * tx;
        let top = h[r0 + 1][c0] * (1.0 - tx) + h[r0 + 1][c0 + 1] * tx;
        bottom * (1.0 - ty) + top * ty
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_matches_samples_and_midpoints() {
        let hm = Heightmap::new([0.0, 0.0], [1.0, 1.0], vec![vec![0.0, 2.0], vec![4.0, 6.0]]).unwrap();
        assert_eq!(hm.height(0.0, 0.0), 0.0);
        assert_eq!(hm.height(1.0, 1.0), 6.0);
        assert!((hm.height(0.5, 0.5) - 3.0).abs() < 1e-12);
        // Clamped outside the grid.
        assert_eq!(hm.height(-3.0, 0.0), 0.0);
    }

    #[test]
    fn ridge_has_lower_saddle() {
        let t = ProceduralTerrain {
            resolution: 1.0,
            base: 0.0,
            ridge_height: 20.0,
            ridge_x: 50.0,
            ridge_width: 5.0,
            saddle_y: 40.0,
            saddle_depth: 12.0,
            saddle_width: 6.0,
            hills: vec![],
        };
        assert!((t.height_at(50.0, 0.0) - 20.0).abs() < 1e-3);
        assert!((t.height_at(50.0, 40.0) - 8.0).abs() < 1e-9);
        assert!(t.height_at(0.0, 40.0) < 1e-6);
    }

    #[test]
    fn csv_import_round_trip() {
        let dir = std::env::temp_dir().join(format!("hm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("grid.csv");
        std::fs::write(&path, "0, 1, 2\n3, 4, 5\n").unwrap();
        let hm = Heightmap::from_csv(&path, [0.0, 10.0], [0.0, 5.0]).unwrap();
        assert_eq!(hm.spacing, [5.0, 5.0]);
        assert_eq!(hm.height(10.0, 5.0), 5.0);
        assert!((hm.height(5.0, 2.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ragged_grid_rejected() {
        assert!(Heightmap::new([0.0, 0.0], [1.0, 1.0], vec![vec![0.0, 1.0], vec![0.0]]).is_err());
    }
}
