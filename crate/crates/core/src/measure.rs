//! Discrete measures: weighted point clouds standing in for locally finite
//! Borel measures, with cached resolution metadata (min_sep, diam).
//!
//! Discrete measures are quadrature stand-ins for non-atomic measures. Every
//! scale-dependent computation downstream carries an r_min floor (default
//! 2·min_sep) below which outputs are flagged unreliable.

use crate::bump::{bump, BumpProfile};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A weighted point cloud in R^d with a dimension parameter s ∈ (0, d).
///
/// Immutable after construction; all derived quantities (min_sep, diam) are
/// computed once. Mutating constructors (`perturb`, `squash`) return new
/// measures and recompute the caches.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    dim: usize,
    s_param: f64,
    /// Flat coordinate storage, `dim` entries per point.
    coords: Vec<f64>,
    weights: Vec<f64>,
    min_sep: f64,
    diam: f64,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, s_param: f64, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut m = DiscreteMeasure {
            dim,
            s_param,
            coords,
            weights,
            min_sep: f64::INFINITY,
            diam: 0.0,
            metadata: BTreeMap::new(),
        };
        m.validate()?;
        m.recompute_caches();
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Validation(format!(
                "ambient dimension must be >= 2, got {}",
                self.dim
            )));
        }
        if !(self.s_param > 0.0 && self.s_param < self.dim as f64) {
            return Err(Error::Validation(format!(
                "s must lie in (0, {}), got {}",
                self.dim, self.s_param
            )));
        }
        if self.weights.is_empty() {
            return Err(Error::Validation("measure must carry at least one atom".into()));
        }
        if self.coords.len() != self.weights.len() * self.dim {
            return Err(Error::Validation(format!(
                "coordinate array length {} does not match {} points in dimension {}",
                self.coords.len(),
                self.weights.len(),
                self.dim
            )));
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite coordinate".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Validation("weights must be strictly positive and finite".into()));
        }
        Ok(())
    }

    fn recompute_caches(&mut self) {
        let n = self.len();
        let mut min_sep = f64::INFINITY;
        let mut diam: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2 = dist2(self.point(i), self.point(j));
                let d = d2.sqrt();
                if d < min_sep {
                    min_sep = d;
                }
                if d > diam {
                    diam = d;
                }
            }
        }
        self.min_sep = min_sep;
        self.diam = diam;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s_param
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Smallest pairwise distance; infinite for a single atom.
    pub fn min_sep(&self) -> f64 {
        self.min_sep
    }

    /// Support diameter; zero for a single atom.
    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Total mass, compensated in index order.
    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for &w in &self.weights {
            s.add(w);
        }
        s.total()
    }

    /// μ(B(x,r)): open-ball mass, strict inequality, ties at distance exactly
    /// r excluded.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
        }
        let r2 = r * r;
        let mut s = CompensatedSum::new();
        for i in 0..self.len() {
            if dist2(x, self.point(i)) < r2 {
                s.add(self.weights[i]);
            }
        }
        Ok(s.total())
    }

    /// I_μ(B(x,r)) = Σ_i w_i φ(|x − x_i|/r).
    pub fn smoothed_mass(&self, x: &[f64], r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let mut s = CompensatedSum::new();
        for i in 0..self.len() {
            let d = dist2(x, self.point(i)).sqrt();
            s.add(self.weights[i] * bump(d / r));
        }
        Ok(s.total())
    }

    /// The bump profile shared by all smoothed quantities.
    pub fn bump_profile(&self) -> BumpProfile {
        BumpProfile::new()
    }

    /// Rebuilds with the same parameters but new coordinates (weights kept).
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.coords = coords;
        m.validate()?;
        m.recompute_caches();
        Ok(m)
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        acc += d * d;
    }
    acc
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// On-disk measure document: {dim, s, points, weights, metadata}.
#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub s: f64,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl DiscreteMeasure {
    pub fn to_file_doc(&self) -> MeasureFile {
        MeasureFile {
            dim: self.dim,
            s: self.s_param,
            points: (0..self.len()).map(|i| self.point(i).to_vec()).collect(),
            weights: self.weights.clone(),
            metadata: self.metadata.clone(),
        }
    }

    /// Loads from the document form, re-validating invariants and recomputing
    /// min_sep/diam from scratch.
    pub fn from_file_doc(doc: MeasureFile) -> Result<Self> {
        let mut coords = Vec::with_capacity(doc.points.len() * doc.dim);
        for p in &doc.points {
            if p.len() != doc.dim {
                return Err(Error::Validation(format!(
                    "point of dimension {} in a dim-{} measure",
                    p.len(),
                    doc.dim
                )));
            }
            coords.extend_from_slice(p);
        }
        let mut m = DiscreteMeasure::new(doc.dim, doc.s, coords, doc.weights)?;
        m.metadata = doc.metadata;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_doc()).expect("measure serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeasureFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file_doc(doc)
    }
}
