//! THz propagation: fitted gaseous attenuation, total path loss, Shannon
//! rate, and the closed-form inversion from rate back to distance.
//!
//! Unit conventions used throughout:
//! * carrier frequencies are passed in GHz and converted to Hz only inside
//!   the spreading-loss and rate formulas;
//! * the fitted attenuation is in dB/km, so it is scaled by `d / 1000` when
//!   multiplied by a distance in meters;
//! * antenna gains are dBi and noise power is dBm at the API, linear inside.

use std::f64::consts::{LN_10, LN_2, PI};

use crate::error::{Error, Result};
use crate::numerics::{self, Branch};

/// Speed of light used by the link budget, m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Lower edge of the attenuation fit's validity range, GHz.
pub const FIT_MIN_GHZ: f64 = 100.0;
/// Upper edge of the attenuation fit's validity range, GHz.
pub const FIT_MAX_GHZ: f64 = 1000.0;
/// Highest carrier for which sorted (same-order) assignment is provably optimal.
pub const SORTED_ASSIGNMENT_MAX_GHZ: f64 = 215.0;

/// One Gaussian lobe `a·exp(-((f - b)/c)²)` of the attenuation fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    /// Peak height `a`, dB/km.
    pub amplitude_db_per_km: f64,
    /// Centre `b`, GHz.
    pub center_ghz: f64,
    /// Width `c`, GHz.
    pub width_ghz: f64,
}

impl GaussianTerm {
    pub const fn new(amplitude_db_per_km: f64, center_ghz: f64, width_ghz: f64) -> Self {
        Self {
            amplitude_db_per_km,
            center_ghz,
            width_ghz,
        }
    }

    fn value(&self, f_ghz: f64) -> f64 {
        let t = (f_ghz - self.center_ghz) / self.width_ghz;
        self.amplitude_db_per_km * (-t * t).exp()
    }
}

/// Seven-term Gaussian fit of the specific gaseous attenuation over
/// 100–1000 GHz (dB/km).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    terms: [GaussianTerm; 7],
}

const TABLE_ONE: [GaussianTerm; 7] = [
    GaussianTerm::new(9906.0, 557.0, 3.175),
    GaussianTerm::new(9940.0, 752.1, 4.968),
    GaussianTerm::new(7301.0, 987.9, 4.6),
    GaussianTerm::new(5667.0, 556.5, 8.772),
    GaussianTerm::new(542.2, 559.1, 33.58),
    GaussianTerm::new(3.338e15, 1.46e4, 2496.0),
    GaussianTerm::new(208.2, 447.7, 6.968),
];

impl Default for GaussianFit {
    fn default() -> Self {
        Self { terms: TABLE_ONE }
    }
}

impl GaussianFit {
    pub fn new(terms: [GaussianTerm; 7]) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if !(t.width_ghz > 0.0) || !t.width_ghz.is_finite() {
                return Err(Error::Invalid(format!(
                    "fit term {}: width must be positive, got {}",
                    i + 1,
                    t.width_ghz
                )));
            }
            if !t.amplitude_db_per_km.is_finite() || !t.center_ghz.is_finite() {
                return Err(Error::Invalid(format!("fit term {} is not finite", i + 1)));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[GaussianTerm; 7] {
        &self.terms
    }

    fn check_range(f_ghz: f64) -> Result<()> {
        if (FIT_MIN_GHZ..=FIT_MAX_GHZ).contains(&f_ghz) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{f_ghz} GHz is outside the attenuation fit range [{FIT_MIN_GHZ}, {FIT_MAX_GHZ}] GHz"
            )))
        }
    }

    /// Specific gaseous attenuation at `f_ghz`, dB/km.
    pub fn gaseous_attenuation(&self, f_ghz: f64) -> Result<f64> {
        Self::check_range(f_ghz)?;
        Ok(self.terms.iter().map(|t| t.value(f_ghz)).sum())
    }

    /// Derivative of [`gaseous_attenuation`](Self::gaseous_attenuation)
    /// with respect to frequency, dB/km/GHz.
    pub fn attenuation_derivative(&self, f_ghz: f64) -> Result<f64> {
        Self::check_range(f_ghz)?;
        Ok(self
            .terms
            .iter()
            .map(|t| {
                let c2 = t.width_ghz * t.width_ghz;
                2.0 * (t.center_ghz - f_ghz) / c2 * t.value(f_ghz)
            })
            .sum())
    }

    /// `f·γ'(f) - γ(f)`; its sign decides whether the distance inversion's
    /// Lambert argument grows or shrinks with frequency.
    pub fn crossover_indicator(&self, f_ghz: f64) -> Result<f64> {
        Ok(f_ghz * self.attenuation_derivative(f_ghz)? - self.gaseous_attenuation(f_ghz)?)
    }

    /// Root of [`crossover_indicator`](Self::crossover_indicator) on
    /// 150–300 GHz (≈216.57 GHz for the default fit).
    pub fn attenuation_crossover(&self) -> Result<f64> {
        numerics::find_root(
            |f| self.crossover_indicator(f).unwrap_or(f64::NAN),
            150.0,
            300.0,
            1e-10,
        )
    }
}

/// Per-user radio link parameters (shared by all users).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    /// Total noise power over the band, dBm.
    pub noise_dbm: f64,
}

impl RadioParams {
    pub fn new(
        bandwidth_hz: f64,
        tx_power_w: f64,
        tx_gain_dbi: f64,
        rx_gain_dbi: f64,
        noise_dbm: f64,
    ) -> Result<Self> {
        let radio = Self {
            bandwidth_hz,
            tx_power_w,
            tx_gain_dbi,
            rx_gain_dbi,
            noise_dbm,
        };
        radio.validate()?;
        Ok(radio)
    }

    /// B = 10 GHz, p = 100 mW, G_t = G_r = 20 dBi, σ² = -40 dBm.
    pub fn reference() -> Self {
        Self {
            bandwidth_hz: 10e9,
            tx_power_w: 0.1,
            tx_gain_dbi: 20.0,
            rx_gain_dbi: 20.0,
            noise_dbm: -40.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Invalid(format!(
                "bandwidth must be positive, got {} Hz",
                self.bandwidth_hz
            )));
        }
        if !(self.tx_power_w > 0.0 && self.tx_power_w.is_finite()) {
            return Err(Error::Invalid(format!(
                "transmit power must be positive, got {} W",
                self.tx_power_w
            )));
        }
        if ![self.tx_gain_dbi, self.rx_gain_dbi, self.noise_dbm]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Invalid("antenna gains and noise must be finite".into()));
        }
        Ok(())
    }

    pub fn noise_w(&self) -> f64 {
        numerics::dbm_to_watts(self.noise_dbm)
    }

    /// `p·G_t·G_r / σ²`, linear.
    pub fn link_gain(&self) -> f64 {
        self.tx_power_w * numerics::db_to_linear(self.tx_gain_dbi + self.rx_gain_dbi)
            / self.noise_w()
    }
}

/// Candidate carrier frequencies in GHz, ascending and pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    /// Sorts the input; rejects duplicates and carriers outside 100–1000 GHz.
    pub fn new(mut freqs_ghz: Vec<f64>) -> Result<Self> {
        if freqs_ghz.is_empty() {
            return Err(Error::Invalid("frequency grid is empty".into()));
        }
        for &f in &freqs_ghz {
            if !(FIT_MIN_GHZ..=FIT_MAX_GHZ).contains(&f) {
                return Err(Error::Invalid(format!(
                    "grid frequency {f} GHz outside [{FIT_MIN_GHZ}, {FIT_MAX_GHZ}] GHz"
                )));
            }
        }
        freqs_ghz.sort_by(f64::total_cmp);
        if let Some(w) = freqs_ghz.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Invalid(format!(
                "duplicate grid frequency {} GHz: each user must occupy a distinct frequency",
                w[0]
            )));
        }
        Ok(Self(freqs_ghz))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when some carrier lies above the range where sorted assignment
    /// is guaranteed optimal.
    pub fn exceeds_sorted_guarantee(&self) -> bool {
        self.0.iter().any(|&f| f > SORTED_ASSIGNMENT_MAX_GHZ)
    }
}

/// Attenuation fit plus radio parameters: everything needed to map between
/// carrier, distance and achievable rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub fit: GaussianFit,
    pub radio: RadioParams,
}

impl Channel {
    pub fn new(fit: GaussianFit, radio: RadioParams) -> Self {
        Self { fit, radio }
    }

    /// Free-space spreading loss, dB.
    pub fn spreading_loss(&self, f_ghz: f64, d_m: f64) -> f64 {
        20.0 * (4.0 * PI * f_ghz * 1e9 * d_m / SPEED_OF_LIGHT).log10()
    }

    /// Absorption plus spreading loss at carrier `f_ghz` over `d_m` meters, dB.
    pub fn path_loss(&self, f_ghz: f64, d_m: f64) -> Result<f64> {
        if !(d_m > 0.0) {
            return Err(Error::Domain(format!("distance must be positive, got {d_m} m")));
        }
        let gamma = self.fit.gaseous_attenuation(f_ghz)?;
        Ok(gamma * d_m / 1000.0 + self.spreading_loss(f_ghz, d_m))
    }

    /// Achievable Shannon rate over `d_m` meters, bit/s.
    pub fn data_rate(&self, f_ghz: f64, d_m: f64) -> Result<f64> {
        let loss_db = self.path_loss(f_ghz, d_m)?;
        let snr = self.radio.link_gain() * 10f64.powf(-loss_db / 10.0);
        Ok(self.radio.bandwidth_hz * snr.ln_1p() / LN_2)
    }

    /// Loss budget (dB) available to reach rate `rate_bps`, with the
    /// distance-independent `20·log10(4π/c)` part removed.
    pub fn chi(&self, rate_bps: f64) -> Result<f64> {
        if !(rate_bps > 0.0 && rate_bps.is_finite()) {
            return Err(Error::Domain(format!("rate must be positive, got {rate_bps}")));
        }
        let snr = (rate_bps / self.radio.bandwidth_hz * LN_2).exp_m1();
        Ok(10.0 * (self.radio.link_gain() / snr).log10()
            - 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10())
    }

    /// Largest distance at which carrier `f_ghz` still supports `rate_bps`.
    ///
    /// Closed-form inverse of [`data_rate`](Self::data_rate) via the
    /// principal Lambert branch; the argument is always positive, so the
    /// distance is unique.
    pub fn distance(&self, f_ghz: f64, rate_bps: f64) -> Result<f64> {
        let gamma_db_per_m = self.fit.gaseous_attenuation(f_ghz)? / 1000.0;
        let chi = self.chi(rate_bps)?;
        let k = gamma_db_per_m * LN_10 / 20.0;
        let ln_y = k.ln() - (f_ghz * 1e9).ln() + chi * LN_10 / 20.0;
        let w = numerics::lambert_w(Branch::Principal, ln_y.exp())?;
        Ok(w / k)
    }

    /// Mixed second difference of [`distance`](Self::distance) over the
    /// rectangle `[R, R+dR] × [f, f+df]`. Positive values mean pairing the
    /// larger rate with the higher carrier beats the crossed pairing.
    pub fn supermodularity_gap(
        &self,
        rate_bps: f64,
        f_ghz: f64,
        d_rate: f64,
        d_f: f64,
    ) -> Result<f64> {
        if d_rate < 0.0 || d_f < 0.0 {
            return Err(Error::Domain("rectangle sides must be non-negative".into()));
        }
        let hi_hi = self.distance(f_ghz + d_f, rate_bps + d_rate)?;
        let lo_lo = self.distance(f_ghz, rate_bps)?;
        let hi_rate = self.distance(f_ghz, rate_bps + d_rate)?;
        let hi_freq = self.distance(f_ghz + d_f, rate_bps)?;
        Ok((hi_hi - hi_rate) - (hi_freq - lo_lo))
    }
}

impl Default for Channel {
    fn default() -> Self {
        Self::new(GaussianFit::default(), RadioParams::reference())
    }
}
