// SPDX-License-Identifier: Apache-2.0

//! Parameter conventions shared by every other module.
//!
//! All energies are measured in units of the Kondo scale `T_K = 1`, all
//! times in units of `1/T_K`. The bare parameters `Δ` and `ω_c` only enter
//! through `T_K = Δ (Δ/ω_c)^{α/(1-α)}`, so fixing `T_K = 1` and `ω_c`
//! determines `Δ = ω_c^α`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest bandwidth (in units of `T_K`) accepted as the scaling limit.
pub const MIN_BANDWIDTH: f64 = 1.0e3;

/// Bandwidth used unless configured otherwise.
pub const DEFAULT_BANDWIDTH: f64 = 1.0e4;

/// Physical inputs and the derived scales, immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
    g: f64,
    temperature: f64,
    kondo_scale: f64,
    bandwidth: f64,
    tunneling: f64,
}

impl ModelParams {
    /// Build parameters for coupling `alpha`, bandwidth `omega_c` and
    /// temperature `temperature` (both in units of `T_K`).
    pub fn new(alpha: f64, temperature: f64, omega_c: f64) -> Result<Self> {
        let base = derive_scales(alpha, omega_c)?;
        base.with_temperature(temperature)
    }

    /// Same as [`ModelParams::new`] with the default bandwidth.
    pub fn with_default_bandwidth(alpha: f64, temperature: f64) -> Result<Self> {
        Self::new(alpha, temperature, DEFAULT_BANDWIDTH)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::Domain(format!(
                "temperature must be finite and >= 0, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The small parameter `g = 1 - 2α`.
    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn kondo_scale(&self) -> f64 {
        self.kondo_scale
    }

    /// High-energy cutoff `ω_c`.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Tunneling amplitude `Δ`.
    pub fn tunneling(&self) -> f64 {
        self.tunneling
    }

    /// Initial value of both rates at `E = iω_c`: `Δ²/ω_c`.
    pub fn initial_rate(&self) -> f64 {
        self.tunneling * self.tunneling / self.bandwidth
    }

    /// `T_K` recomputed from `Δ` and `ω_c`.
    pub fn kondo_scale_from_bare(&self) -> f64 {
        kondo_scale(self.alpha, self.tunneling, self.bandwidth)
    }

    pub fn matsubara(&self, index: u64) -> Option<MatsubaraFrequency> {
        MatsubaraFrequency::new(index, self.temperature)
    }
}

/// `Δ (Δ/ω_c)^{α/(1-α)}`.
pub fn kondo_scale(alpha: f64, tunneling: f64, omega_c: f64) -> f64 {
    tunneling * (tunneling / omega_c).powf(alpha / (1.0 - alpha))
}

/// Solve the Kondo-scale relation for `Δ` at `T_K = 1`.
///
/// The temperature of the returned parameters is zero.
pub fn derive_scales(alpha: f64, omega_c: f64) -> Result<ModelParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(omega_c >= MIN_BANDWIDTH) || !omega_c.is_finite() {
        return Err(Error::Config(format!(
            "omega_c = {omega_c} is below the scaling-limit floor {MIN_BANDWIDTH} T_K"
        )));
    }
    let kondo: f64 = 1.0;
    // Δ^{1/(1-α)} = T_K ω_c^{α/(1-α)}  =>  Δ = T_K^{1-α} ω_c^α
    let tunneling = kondo.powf(1.0 - alpha) * omega_c.powf(alpha);
    Ok(ModelParams {
        alpha,
        g: 1.0 - 2.0 * alpha,
        temperature: 0.0,
        kondo_scale: kondo,
        bandwidth: omega_c,
        tunneling,
    })
}

/// Bosonic-bath Matsubara frequency `ω_m = πT(2m+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatsubaraFrequency {
    index: u64,
    value: f64,
}

impl MatsubaraFrequency {
    /// `None` at `T = 0`, where the frequencies form a continuum.
    pub fn new(index: u64, temperature: f64) -> Option<Self> {
        if temperature > 0.0 {
            Some(Self {
                index,
                value: PI * temperature * (2 * index + 1) as f64,
            })
        } else {
            None
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent inversion of the Kondo-scale relation by bisection.
    fn bisect_tunneling(alpha: f64, omega_c: f64) -> f64 {
        let (mut lo, mut hi) = (1e-6_f64, omega_c);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if kondo_scale(alpha, mid, omega_c) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn exponent_one_at_half_coupling() {
        let p = derive_scales(0.5, 1e4).unwrap();
        assert!((p.tunneling() - 100.0).abs() < 1e-10);
        assert!((p.initial_rate() - 1.0).abs() < 1e-12);
        assert_eq!(p.g(), 0.0);
    }

    #[test]
    fn vanishing_coupling_gives_bare_tunneling() {
        let p = derive_scales(1e-12, 1e4).unwrap();
        assert!((p.tunneling() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_bisection_oracle() {
        let p = derive_scales(0.45, 1e4).unwrap();
        let oracle = bisect_tunneling(0.45, 1e4);
        assert!((p.tunneling() - oracle).abs() / oracle < 1e-12);
        assert!((p.tunneling() - 10f64.powf(1.8)).abs() < 1e-9);
        assert!((p.tunneling() - 63.0957).abs() < 1e-4);
    }

    #[test]
    fn round_trip_and_monotone() {
        let mut last = 0.0;
        for k in 1..100 {
            let alpha = k as f64 / 100.0;
            let p = derive_scales(alpha, 1e4).unwrap();
            assert!((p.kondo_scale_from_bare() - 1.0).abs() < 1e-12, "alpha {alpha}");
            assert!(p.tunneling() > last);
            last = p.tunneling();
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(derive_scales(0.0, 1e4), Err(Error::Domain(_))));
        assert!(matches!(derive_scales(1.0, 1e4), Err(Error::Domain(_))));
        assert!(matches!(derive_scales(0.4, 10.0), Err(Error::Config(_))));
        assert!(ModelParams::new(0.4, -0.1, 1e4).is_err());
    }

    #[test]
    fn matsubara_spacing() {
        let t = 0.07;
        let a = MatsubaraFrequency::new(3, t).unwrap();
        let b = MatsubaraFrequency::new(4, t).unwrap();
        assert!((b.value() - a.value() - 2.0 * PI * t).abs() < 1e-15);
        assert!(MatsubaraFrequency::new(0, 0.0).is_none());
    }
}
