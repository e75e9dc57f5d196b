use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::PosteriorBatch;
use crate::models::SeqVae;
use crate::synth::Split;

pub const VIZ_EXTENT: f64 = 3.0;
pub const DEFAULT_RESOLUTION: usize = 120;

/// Aggregated posterior density on `[-3, 3]²` plus the posterior means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VizGrid {
    pub resolution: usize,
    pub lo: f64,
    pub hi: f64,
    /// Row-major by `y` index, then `x` index.
    pub density: Vec<f64>,
    /// `(μ₁, μ₂, label)` per datapoint.
    pub scatter: Vec<(f64, f64, usize)>,
}

impl VizGrid {
    pub fn cell_size(&self) -> f64 {
        (self.hi - self.lo) / self.resolution as f64
    }

    /// Centre coordinate of cell index `i` along either axis.
    pub fn centre(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.cell_size()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.density[iy * self.resolution + ix]
    }

    /// Riemann sum of the density over the region.
    pub fn mass(&self) -> f64 {
        let a = self.cell_size();
        self.density.iter().sum::<f64>() * a * a
    }

    /// Cells at or above all of their (up to eight) neighbours and at least
    /// 1% of the global peak. A flat peak counts once: ties are broken in
    /// favour of the cell that comes first in raster order.
    pub fn local_maxima(&self) -> Vec<(usize, usize)> {
        let r = self.resolution;
        let peak = self.density.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::new();
        for iy in 0..r {
            for ix in 0..r {
                let v = self.at(ix, iy);
                if v < 0.01 * peak {
                    continue;
                }
                let mut is_max = true;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                        if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= r as i64 || ny >= r as i64 {
                            continue;
                        }
                        let w = self.at(nx as usize, ny as usize);
                        let earlier = (ny, nx) < (iy as i64, ix as i64);
                        if w > v || (earlier && w == v) {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    out.push((ix, iy));
                }
            }
        }
        out
    }

    pub fn grid_csv(&self) -> String {
        let mut out = String::from("x,y,density\n");
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let _ = writeln!(out, "{},{},{}", self.centre(ix), self.centre(iy), self.at(ix, iy));
            }
        }
        out
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("mu1,mu2,label\n");
        for (a, b, l) in &self.scatter {
            let _ = writeln!(out, "{a},{b},{l}");
        }
        out
    }

    /// Grayscale heatmap, darker for higher density.
    pub fn grid_svg(&self) -> String {
        let px = 4usize;
        let side = self.resolution * px;
        let peak = self.density.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\" viewBox=\"0 0 {side} {side}\">\n"
        );
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let shade = 255 - (255.0 * self.at(ix, iy) / peak).round() as u8;
                // SVG y grows downwards
                let y = (self.resolution - 1 - iy) * px;
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{y}\" width=\"{px}\" height=\"{px}\" fill=\"rgb({shade},{shade},{shade})\"/>",
                    ix * px
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }

    pub fn scatter_svg(&self) -> String {
        const COLOURS: [&str; 10] = [
            "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
        ];
        let side = 480.0;
        let scale = side / (self.hi - self.lo);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\" viewBox=\"0 0 {side} {side}\">\n<rect width=\"{side}\" height=\"{side}\" fill=\"white\"/>\n"
        );
        for (a, b, l) in &self.scatter {
            if *a < self.lo || *a > self.hi || *b < self.lo || *b > self.hi {
                continue;
            }
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>",
                (a - self.lo) * scale,
                (self.hi - b) * scale,
                COLOURS[l % COLOURS.len()]
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Density of `(1/B) Σ_i q(z | x_i)` at every cell centre.
pub fn grid_from_posteriors(batch: &PosteriorBatch, labels: &[usize], resolution: usize) -> Result<VizGrid> {
    if batch.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "visualization needs a 2-dimensional latent space, got n = {}",
            batch.dim()
        )));
    }
    if labels.len() != batch.len() {
        return Err(Error::shape("viz_grid", format!("{} labels for {} posteriors", labels.len(), batch.len())));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("grid resolution must be ≥ 1".into()));
    }
    let mut grid = VizGrid {
        resolution,
        lo: -VIZ_EXTENT,
        hi: VIZ_EXTENT,
        density: vec![0.0; resolution * resolution],
        scatter: (0..batch.len())
            .map(|i| (batch.mean_row(i)[0], batch.mean_row(i)[1], labels[i]))
            .collect(),
    };
    let centres: Vec<f64> = (0..resolution).map(|i| grid.centre(i)).collect();
    let b = batch.len() as f64;
    for i in 0..batch.len() {
        let (m, v) = (batch.mean_row(i), batch.var_row(i));
        // the density factorizes over the two axes
        let axis = |mean: f64, var: f64| -> Vec<f64> {
            let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
            centres.iter().map(|c| norm * (-(c - mean) * (c - mean) / (2.0 * var)).exp()).collect()
        };
        let (px, py) = (axis(m[0], v[0]), axis(m[1], v[1]));
        for (iy, fy) in py.iter().enumerate() {
            for (ix, fx) in px.iter().enumerate() {
                grid.density[iy * resolution + ix] += fx * fy / b;
            }
        }
    }
    Ok(grid)
}

/// Grid of a model's evaluation-mode posteriors over a split.
pub fn aggregated_posterior_grid(model: &SeqVae, split: &Split, resolution: usize) -> Result<VizGrid> {
    let batch = model.posterior_batch(&split.all_tokens())?;
    grid_from_posteriors(&batch, &split.labels(), resolution)
}
