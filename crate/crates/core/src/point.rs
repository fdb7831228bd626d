//! Primal points and dual vectors.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

/// A point of a feasible region. Construct through
/// [`FeasibleRegion::check_point`](crate::region::FeasibleRegion::check_point)
/// (membership-checked) or receive one from a projection / mirror map, which
/// produce feasible coordinates by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint(Vec<f64>);

impl PrimalPoint {
    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for PrimalPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An unconstrained vector of the dual space, where gradients and the SMD
/// score variable live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for DualVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DualVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
