//! Rebroadcast time response Ω(Δt): how interest in a message decays with
//! its age. The simulator only ever sees a tabulated form, a normalized
//! piecewise-constant density on a uniform grid over `[t_min, t_max)`.
//! Built-in shapes are `a * exp(-t)` and `a / t`; arbitrary tables can be
//! supplied directly. Outside the support the density is exactly zero, so a
//! broadcast has no rate before `t_min` or past `t_max`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OmegaError {
    #[error("omega.t_max must be positive, got {0}")]
    NonPositiveTMax(f64),
    #[error("omega support is empty: t_min {t_min} >= t_max {t_max}")]
    EmptySupport { t_min: f64, t_max: f64 },
    #[error("omega.t_min must be positive for the reciprocal form, got {0}")]
    ReciprocalNeedsPositiveTMin(f64),
    #[error("omega.bins must be at least 1")]
    NoBins,
    #[error("omega density at bin {index} is {value}; densities must be finite and nonnegative")]
    InvalidDensity { index: usize, value: f64 },
    #[error("omega table has no mass")]
    ZeroMass,
}

/// Normalized tabulated density. `densities[i]` covers
/// `[t_min + i*width, t_min + (i+1)*width)` and the bin masses sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaTable {
    t_min: f64,
    t_max: f64,
    width: f64,
    densities: Vec<f64>,
}

impl OmegaTable {
    /// Table for Ω(t) = a·e^(-t); bin masses are exact integrals of the
    /// exponential, so normalization does not depend on the bin count.
    pub fn exponential(t_min: f64, t_max: f64, bins: usize) -> Result<Self, OmegaError> {
        check_support(t_min, t_max, bins)?;
        let width = (t_max - t_min) / bins as f64;
        let masses: Vec<f64> = (0..bins)
            .map(|i| {
                let lo = t_min + i as f64 * width;
                (-lo).exp() - (-(lo + width)).exp()
            })
            .collect();
        Self::from_masses(t_min, t_max, masses)
    }

    /// Table for Ω(t) = a/t. On [1, 600] the normalization constant is
    /// 1/ln(600).
    pub fn reciprocal(t_min: f64, t_max: f64, bins: usize) -> Result<Self, OmegaError> {
        check_support(t_min, t_max, bins)?;
        if t_min <= 0.0 {
            return Err(OmegaError::ReciprocalNeedsPositiveTMin(t_min));
        }
        let width = (t_max - t_min) / bins as f64;
        let masses: Vec<f64> = (0..bins)
            .map(|i| {
                let lo = t_min + i as f64 * width;
                ((lo + width) / lo).ln()
            })
            .collect();
        Self::from_masses(t_min, t_max, masses)
    }

    /// Table from caller-supplied relative densities on a uniform grid; the
    /// values are rescaled so the bin masses sum to one.
    pub fn from_densities(t_min: f64, t_max: f64, densities: &[f64]) -> Result<Self, OmegaError> {
        check_support(t_min, t_max, densities.len())?;
        for (index, &value) in densities.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(OmegaError::InvalidDensity { index, value });
            }
        }
        let width = (t_max - t_min) / densities.len() as f64;
        let masses: Vec<f64> = densities.iter().map(|d| d * width).collect();
        Self::from_masses(t_min, t_max, masses)
    }

    fn from_masses(t_min: f64, t_max: f64, masses: Vec<f64>) -> Result<Self, OmegaError> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(OmegaError::ZeroMass);
        }
        let width = (t_max - t_min) / masses.len() as f64;
        let densities = masses.iter().map(|m| m / total / width).collect();
        Ok(Self {
            t_min,
            t_max,
            width,
            densities,
        })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.width
    }

    /// Density at message age `t`; zero outside `[t_min, t_max)`.
    pub fn density_at(&self, t: f64) -> f64 {
        if t < self.t_min || t >= self.t_max {
            return 0.0;
        }
        let index = ((t - self.t_min) / self.width) as usize;
        // t fractionally below t_max can round onto the one-past-last bin
        self.densities[index.min(self.densities.len() - 1)]
    }

    /// Next grid boundary strictly after age `t`, or None when the support
    /// is exhausted. Ages before `t_min` report `t_min` itself: that is the
    /// moment a fresh broadcast's rate switches on.
    pub fn next_boundary_after(&self, t: f64) -> Option<f64> {
        if t < self.t_min {
            return Some(self.t_min);
        }
        if t >= self.t_max {
            return None;
        }
        let index = ((t - self.t_min) / self.width) as usize;
        let boundary = self.t_min + (index as f64 + 1.0) * self.width;
        Some(boundary.min(self.t_max))
    }

    /// Density of bin `index`; zero past the last bin. Lets callers that
    /// track bin positions integrally sidestep float roundoff in ages.
    pub fn density_in_bin(&self, index: usize) -> f64 {
        self.densities.get(index).copied().unwrap_or(0.0)
    }

    /// Age offset of grid edge `edge`, where edge `e` opens bin `e`; the
    /// final edge (`e == bins`) closes the support at `t_max`. None once
    /// past that.
    pub fn edge_offset(&self, edge: u32) -> Option<f64> {
        if edge as usize > self.densities.len() {
            return None;
        }
        Some((self.t_min + f64::from(edge) * self.width).min(self.t_max))
    }

    /// Integral of the density over ages up to `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.t_min {
            return 0.0;
        }
        if t >= self.t_max {
            return self.total_mass();
        }
        let full_bins = ((t - self.t_min) / self.width) as usize;
        let mut acc = 0.0;
        for d in &self.densities[..full_bins.min(self.densities.len())] {
            acc += d * self.width;
        }
        if full_bins < self.densities.len() {
            let lo = self.t_min + full_bins as f64 * self.width;
            acc += self.densities[full_bins] * (t - lo);
        }
        acc
    }

    /// Total mass of the table; one up to rounding by construction.
    pub fn total_mass(&self) -> f64 {
        self.densities.iter().map(|d| d * self.width).sum()
    }
}

fn check_support(t_min: f64, t_max: f64, bins: usize) -> Result<(), OmegaError> {
    if !(t_max > 0.0) {
        return Err(OmegaError::NonPositiveTMax(t_max));
    }
    if !(t_min < t_max) || !t_min.is_finite() {
        return Err(OmegaError::EmptySupport { t_min, t_max });
    }
    if bins == 0 {
        return Err(OmegaError::NoBins);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn any_valid_table_normalizes_and_cdf_saturates(
            densities in prop::collection::vec(0.0f64..50.0, 1..40),
            t_min in 0.0f64..10.0,
            span in 0.1f64..100.0,
        ) {
            prop_assume!(densities.iter().any(|&d| d > 0.0));
            let table = OmegaTable::from_densities(t_min, t_min + span, &densities).unwrap();
            prop_assert!((table.total_mass() - 1.0).abs() <= 1e-9);
            let mut last = 0.0;
            for i in 0..=20 {
                let c = table.cdf(t_min + span * i as f64 / 20.0);
                prop_assert!(c + 1e-12 >= last, "cdf decreased: {last} -> {c}");
                last = c;
            }
            prop_assert!((table.cdf(t_min + span) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn reciprocal_table_normalizes_to_one() {
        // 1/t on [1, 600]: normalizer is 1/ln(600), total mass exactly one
        let omega = OmegaTable::reciprocal(1.0, 600.0, 600).unwrap();
        assert!((omega.total_mass() - 1.0).abs() <= 1e-9);
        let a = 0.15632499556792623; // 1/ln(600)
        // bin-averaged density tracks a/t at bin midpoints
        for t in [1.5, 10.0, 100.0, 400.0] {
            let expected = a / t;
            let got = omega.density_at(t);
            assert!(
                (got - expected).abs() <= 0.15 * expected,
                "density at {t}: got {got}, analytic {expected}"
            );
        }
    }

    #[test]
    fn exponential_table_normalizes_and_decays() {
        let omega = OmegaTable::exponential(0.0, 12.0, 240).unwrap();
        assert!((omega.total_mass() - 1.0).abs() <= 1e-9);
        let w = omega.bin_width();
        let ratio = omega.density_at(5.0 * w + w / 2.0) / omega.density_at(4.0 * w + w / 2.0);
        assert!((ratio - (-w).exp()).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn zero_outside_support() {
        let omega = OmegaTable::exponential(1.0, 10.0, 9).unwrap();
        assert_eq!(omega.density_at(0.999), 0.0);
        assert_eq!(omega.density_at(10.0), 0.0);
        assert_eq!(omega.density_at(55.0), 0.0);
        assert!(omega.density_at(1.0) > 0.0);
    }

    #[test]
    fn custom_table_is_rescaled() {
        let omega = OmegaTable::from_densities(0.0, 4.0, &[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!((omega.total_mass() - 1.0).abs() <= 1e-12);
        assert!((omega.density_at(1.7) - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(matches!(
            OmegaTable::from_densities(0.0, 1.0, &[1.0, -0.5]),
            Err(OmegaError::InvalidDensity { index: 1, .. })
        ));
        assert!(matches!(
            OmegaTable::exponential(5.0, 5.0, 10),
            Err(OmegaError::EmptySupport { .. })
        ));
        assert!(matches!(
            OmegaTable::exponential(0.0, -1.0, 10),
            Err(OmegaError::NonPositiveTMax(_))
        ));
        assert!(matches!(
            OmegaTable::reciprocal(0.0, 10.0, 10),
            Err(OmegaError::ReciprocalNeedsPositiveTMin(_))
        ));
        assert!(matches!(
            OmegaTable::from_densities(0.0, 1.0, &[0.0, 0.0]),
            Err(OmegaError::ZeroMass)
        ));
    }

    #[test]
    fn boundaries_cover_activation_and_expiry() {
        let omega = OmegaTable::exponential(1.0, 5.0, 4).unwrap();
        assert_eq!(omega.next_boundary_after(0.2), Some(1.0));
        assert_eq!(omega.next_boundary_after(1.0), Some(2.0));
        assert_eq!(omega.next_boundary_after(3.5), Some(4.0));
        assert_eq!(omega.next_boundary_after(4.0), Some(5.0));
        assert_eq!(omega.next_boundary_after(5.0), None);
        assert_eq!(omega.next_boundary_after(700.0), None);
    }

    #[test]
    fn cdf_matches_analytic_exponential() {
        let omega = OmegaTable::exponential(0.0, 20.0, 2000).unwrap();
        let norm = 1.0 - (-20.0f64).exp();
        for t in [0.5, 1.0, 3.0, 10.0] {
            let analytic = (1.0 - (-t as f64).exp()) / norm;
            let got = omega.cdf(t);
            assert!(
                (got - analytic).abs() < 2e-3,
                "cdf({t}) = {got}, analytic {analytic}"
            );
        }
        assert!((omega.cdf(20.0) - 1.0).abs() <= 1e-9);
        assert_eq!(omega.cdf(0.0), 0.0);
    }
}
