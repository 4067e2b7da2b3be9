//! Link model: fading-averaged rate, required transmit power and the
//! quantized distance grid that turns unicast energy into integer units.
//!
//! The expected rate over Rayleigh fading is `W * E[log2(1 + s*X)]` with
//! `X ~ Exp(1)`. It is evaluated with a composite Gauss-Legendre rule on a
//! geometrically graded mesh over `[0, 64]`; panel sizes scale with `1/s`
//! so the logarithmic branch point at `t = -1/s` never sits close to a
//! panel. The truncated tail is below `e^-64`.

use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};

const GL_ORDER: usize = 16;
const QUAD_UPPER: f64 = 64.0;

/// Small-scale fading model for `|h|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// `|h|^2` exponentially distributed with the given mean.
    Rayleigh { mean_gain: f64 },
    /// No fading: `|h|^2` is fixed.
    Static { gain: f64 },
}

impl Fading {
    fn mean_gain(&self) -> f64 {
        match *self {
            Fading::Rayleigh { mean_gain } => mean_gain,
            Fading::Static { gain } => gain,
        }
    }

    /// `E[log2(1 + snr * |h|^2 / mean_gain)]`, i.e. spectral efficiency at mean SNR `snr`.
    fn spectral_efficiency(&self, snr: f64) -> f64 {
        match self {
            Fading::Rayleigh { .. } => exp_log2_mean(snr),
            Fading::Static { .. } => (1.0 + snr).log2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    pub target_rate_bps: f64,
    /// Linear pathloss constant.
    pub pathloss_gain: f64,
    pub pathloss_exponent: f64,
    /// Noise plus (constant) interference power in Watt.
    pub noise_interference_w: f64,
    pub radius_m: f64,
    /// Transmit power that meets the target rate at the cell edge.
    pub edge_power_w: f64,
    pub slot_s: f64,
    pub fading: Fading,
}

impl ChannelParams {
    /// Builds parameters whose noise-plus-interference power is solved so that
    /// the edge user at `edge_power_w` gets exactly `target_rate_bps`.
    #[allow(clippy::too_many_arguments)]
    pub fn calibrated(
        bandwidth_hz: f64,
        target_rate_bps: f64,
        pathloss_gain: f64,
        pathloss_exponent: f64,
        radius_m: f64,
        edge_power_w: f64,
        slot_s: f64,
        fading: Fading,
    ) -> Result<Self> {
        if !(bandwidth_hz > 0.0) || !(target_rate_bps > 0.0) {
            return Err(invalid("bandwidth/target rate", "must be positive"));
        }
        let efficiency = target_rate_bps / bandwidth_hz;
        // Spectral efficiency is increasing in SNR; bracket in log-space.
        let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
        let f = |log_snr: f64| fading.spectral_efficiency(log_snr.exp()) - efficiency;
        if f(lo) > 0.0 || f(hi) < 0.0 {
            return Err(Error::BracketNotStraddling {
                lo: lo.exp(),
                hi: hi.exp(),
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let edge_snr = (0.5 * (lo + hi)).exp();
        let noise = edge_power_w
            * fading.mean_gain()
            * pathloss_gain
            * radius_m.powf(-pathloss_exponent)
            / edge_snr;
        let params = Self {
            bandwidth_hz,
            target_rate_bps,
            pathloss_gain,
            pathloss_exponent,
            noise_interference_w: noise,
            radius_m,
            edge_power_w,
            slot_s,
            fading,
        };
        params.validate()?;
        Ok(params)
    }

    /// Reference link: R = 50 m, r0/W = 1 bit/s/Hz, beta = 10 dB, alpha = 2,
    /// Pt(R) = 1 W, unit-mean Rayleigh fading, 1 MHz bandwidth, 1 s slots.
    pub fn reference() -> Self {
        Self::calibrated(
            1e6,
            1e6,
            db_to_linear(10.0),
            2.0,
            50.0,
            1.0,
            1.0,
            Fading::Rayleigh { mean_gain: 1.0 },
        )
        .expect("reference channel calibrates")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth_hz", "must be > 0"));
        }
        if !(self.target_rate_bps > 0.0) {
            return Err(invalid("target_rate_bps", "must be > 0"));
        }
        if !(self.pathloss_gain > 0.0) {
            return Err(invalid("pathloss_gain", "must be > 0"));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(invalid("pathloss_exponent", "must be >= 2"));
        }
        if !(self.noise_interference_w > 0.0) {
            return Err(invalid("noise_interference_w", "must be > 0"));
        }
        if !(self.radius_m > 0.0) {
            return Err(invalid("radius_m", "must be > 0"));
        }
        if !(self.edge_power_w > 0.0) {
            return Err(invalid("edge_power_w", "must be > 0"));
        }
        if !(self.slot_s > 0.0) {
            return Err(invalid("slot_s", "must be > 0"));
        }
        if !(self.fading.mean_gain() > 0.0) {
            return Err(invalid("fading", "mean gain must be > 0"));
        }
        let edge = self.expected_rate(self.edge_power_w, self.radius_m)?;
        if ((edge - self.target_rate_bps) / self.target_rate_bps).abs() > 1e-6 {
            return Err(invalid(
                "calibration",
                format!(
                    "edge rate {edge} differs from target {}",
                    self.target_rate_bps
                ),
            ));
        }
        Ok(())
    }

    fn check_distance(&self, d: f64) -> Result<()> {
        if !(d > 0.0 && d <= self.radius_m) {
            return Err(Error::DistanceOutOfRange {
                distance: d,
                radius: self.radius_m,
            });
        }
        Ok(())
    }

    fn mean_snr(&self, power_w: f64, d: f64) -> f64 {
        power_w * self.fading.mean_gain() * self.pathloss_gain * d.powf(-self.pathloss_exponent)
            / self.noise_interference_w
    }

    /// Fading-averaged rate in bit/s at transmit power `power_w` and distance `d`.
    pub fn expected_rate(&self, power_w: f64, d: f64) -> Result<f64> {
        self.check_distance(d)?;
        if !(power_w >= 0.0) {
            return Err(invalid("power_w", "must be >= 0"));
        }
        let snr = self.mean_snr(power_w, d);
        Ok(self.bandwidth_hz * self.fading.spectral_efficiency(snr))
    }

    /// Transmit power meeting the target rate at distance `d`, by bisection on
    /// `[0, 10 * Pt(R) * (d/R)^alpha]`.
    pub fn required_power(&self, d: f64) -> Result<f64> {
        self.check_distance(d)?;
        let mut lo = 0.0;
        let mut hi = 10.0 * self.edge_power_w * (d / self.radius_m).powf(self.pathloss_exponent);
        let target = self.target_rate_bps;
        let rate = |p: f64| self.bandwidth_hz * self.fading.spectral_efficiency(self.mean_snr(p, d));
        if rate(hi) < target {
            return Err(Error::BracketNotStraddling { lo, hi });
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        let power = 0.5 * (lo + hi);
        let residual = (rate(power) - target).abs();
        if residual >= 1e-6 * target {
            return Err(Error::Residual {
                what: "required_power rate",
                residual,
                tolerance: 1e-6 * target,
            });
        }
        Ok(power)
    }

    /// Energy in Joule to unicast one content at distance `d`.
    pub fn unicast_energy(&self, d: f64) -> Result<f64> {
        Ok(self.required_power(d)? * self.slot_s)
    }
}

/// How the class boundaries of the distance grid are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridMode {
    /// `E_unit = Pt(R) * Tp / M` and class `m` costs `m` units.
    UnitSteps,
    /// Caller-supplied strictly increasing multipliers; `E_unit = Pt(R) * Tp / l_M`.
    Multipliers(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGrid {
    radius: f64,
    boundaries: Vec<f64>,
    multipliers: Vec<u32>,
    unit_energy: f64,
}

impl DistanceGrid {
    /// Assembles a grid from known boundaries. `boundaries` are `d_1 < ... < d_M = radius`.
    pub fn from_parts(
        radius: f64,
        boundaries: Vec<f64>,
        multipliers: Vec<u32>,
        unit_energy: f64,
    ) -> Result<Self> {
        if boundaries.is_empty() || boundaries.len() != multipliers.len() {
            return Err(invalid(
                "distance grid",
                "need one multiplier per class and at least one class",
            ));
        }
        if !(radius > 0.0) || !(unit_energy > 0.0) {
            return Err(invalid("distance grid", "radius and unit energy must be > 0"));
        }
        check_multipliers(&multipliers)?;
        let mut prev = 0.0;
        for &d in &boundaries {
            if !(d > prev) {
                return Err(invalid("distance grid", "boundaries must increase"));
            }
            prev = d;
        }
        if ((prev - radius) / radius).abs() > 1e-12 {
            return Err(invalid("distance grid", "last boundary must equal the radius"));
        }
        let mut boundaries = boundaries;
        *boundaries.last_mut().unwrap() = radius;
        Ok(Self {
            radius,
            boundaries,
            multipliers,
            unit_energy,
        })
    }

    /// Grid for a square-law pathloss (`alpha = 2`) with class `m` costing `m`
    /// units: `d_m = R * sqrt(m / M)`, i.e. `M` equal-area annuli.
    pub fn equal_area(classes: u32, radius: f64, unit_energy: f64) -> Result<Self> {
        if classes == 0 {
            return Err(invalid("classes", "must be >= 1"));
        }
        let m = classes as f64;
        let boundaries = (1..=classes)
            .map(|i| radius * (i as f64 / m).sqrt())
            .collect();
        Self::from_parts(radius, boundaries, (1..=classes).collect(), unit_energy)
    }

    pub fn classes(&self) -> usize {
        self.boundaries.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn unit_energy(&self) -> f64 {
        self.unit_energy
    }

    /// `d_1..d_M`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// `l_1..l_M`.
    pub fn multipliers(&self) -> &[u32] {
        &self.multipliers
    }

    /// Energy units for class `m` (1-based); `l_0 = 0`.
    pub fn multiplier(&self, class: usize) -> u32 {
        if class == 0 {
            0
        } else {
            self.multipliers[class - 1]
        }
    }

    /// Outer boundary of class `m` (1-based); `d_0 = 0`.
    pub fn boundary(&self, class: usize) -> f64 {
        if class == 0 {
            0.0
        } else {
            self.boundaries[class - 1]
        }
    }

    /// Fraction of a uniformly located user population falling in class `m` (1-based).
    pub fn annulus_fraction(&self, class: usize) -> f64 {
        let outer = self.boundary(class);
        let inner = self.boundary(class - 1);
        (outer * outer - inner * inner) / (self.radius * self.radius)
    }

    /// Mean energy units per cell, averaged over the first `classes` classes:
    /// `sum_{j <= classes} l_j * (d_j^2 - d_{j-1}^2) / R^2`.
    pub fn partial_unicast_energy(&self, classes: usize) -> f64 {
        (1..=classes)
            .map(|m| self.multiplier(m) as f64 * self.annulus_fraction(m))
            .sum()
    }

    /// Quantized mean unicast energy, in units of `E_unit`.
    pub fn mean_unicast_energy(&self) -> f64 {
        self.partial_unicast_energy(self.classes())
    }

    /// Class index of a user at distance `d`: smallest `m` with `d <= d_m`.
    pub fn class_of(&self, d: f64) -> usize {
        self.boundaries.partition_point(|&b| b < d).min(self.classes() - 1) + 1
    }
}

fn check_multipliers(multipliers: &[u32]) -> Result<()> {
    if multipliers.first().is_some_and(|&l| l == 0) {
        return Err(invalid("multipliers", "must be positive"));
    }
    if multipliers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("multipliers", "must be strictly increasing"));
    }
    Ok(())
}

/// Solves the class boundaries so that `Pt(d_m) * Tp = l_m * E_unit`.
pub fn build_distance_grid(params: &ChannelParams, classes: usize, mode: GridMode) -> Result<DistanceGrid> {
    if classes == 0 {
        return Err(invalid("classes", "must be >= 1"));
    }
    let multipliers = match mode {
        GridMode::UnitSteps => (1..=classes as u32).collect::<Vec<_>>(),
        GridMode::Multipliers(l) => {
            if l.len() != classes {
                return Err(invalid("multipliers", "length must equal the class count"));
            }
            l
        }
    };
    check_multipliers(&multipliers)?;
    let top = *multipliers.last().unwrap() as f64;
    let unit_energy = params.edge_power_w * params.slot_s / top;
    let radius = params.radius_m;

    let mut boundaries = Vec::with_capacity(classes);
    for &l in &multipliers[..classes - 1] {
        let target = l as f64 * unit_energy;
        let (mut lo, mut hi) = (0.0, radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if params.unicast_energy(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * radius {
                break;
            }
        }
        boundaries.push(0.5 * (lo + hi));
    }
    boundaries.push(radius);
    DistanceGrid::from_parts(radius, boundaries, multipliers, unit_energy)
}

/// Free function form of [`ChannelParams::expected_rate`].
pub fn expected_rate(params: &ChannelParams, power_w: f64, d: f64) -> Result<f64> {
    params.expected_rate(power_w, d)
}

/// Free function form of [`ChannelParams::required_power`].
pub fn required_power(params: &ChannelParams, d: f64) -> Result<f64> {
    params.required_power(d)
}

/// Free function form of [`DistanceGrid::mean_unicast_energy`].
pub fn mean_unicast_energy(grid: &DistanceGrid) -> f64 {
    grid.mean_unicast_energy()
}

fn gauss_legendre() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on P_n with the usual Chebyshev initial guess.
        let n = GL_ORDER;
        let mut rule = [(0.0, 0.0); GL_ORDER];
        for (i, slot) in rule.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// `integral_0^inf e^-t log2(1 + snr * t) dt`.
pub(crate) fn exp_log2_mean(snr: f64) -> f64 {
    if snr <= 0.0 {
        return 0.0;
    }
    let rule = gauss_legendre();
    let first = (1.0f64).min(1.0 / snr) / 16.0;
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = first;
    loop {
        let b_clamped = b.min(QUAD_UPPER);
        let half = 0.5 * (b_clamped - a);
        let mid = 0.5 * (b_clamped + a);
        let panel: f64 = rule
            .iter()
            .map(|&(x, w)| {
                let t = mid + half * x;
                w * (-t).exp() * (snr * t).ln_1p()
            })
            .sum();
        total += half * panel;
        if b_clamped >= QUAD_UPPER {
            break;
        }
        a = b_clamped;
        b = 2.0 * b_clamped;
    }
    total / std::f64::consts::LN_2
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
