//! Physical constants, unit conversions and seed derivation.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum separation between any two nodes (m). Path loss `d^-alpha` is
/// singular at zero distance.
pub const MIN_SEPARATION: f64 = 1.0;

/// Converts a power in dBm to watts: `10^((dbm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Carrier wavelength for a carrier frequency in Hz.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// SplitMix64 finalizer, used to spread counters into independent seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo trial `trial` under `master`.
///
/// Trial seeds are `splitmix64(master ^ splitmix64(trial))`, so every trial's
/// draw depends only on `(master, trial)` and never on which worker ran it.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial))
}

/// Derives a labelled sub-seed (e.g. the estimation-error stream of a trial).
pub fn sub_seed(seed: u64, label: u64) -> u64 {
    splitmix64(seed.wrapping_add(label.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversion() {
        let w = dbm_to_watts(-83.0);
        assert!((w - 5.011_872_336_272_715e-12).abs() < 1e-24);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(w) + 83.0).abs() < 1e-12);
        assert!((dbm_to_watts(-105.0) - 3.162_277_660_168_379e-14).abs() < 1e-26);
    }

    #[test]
    fn wavelength_at_3_5_ghz() {
        assert!((wavelength(3.5e9) - 0.085_654_988).abs() < 1e-8);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|t| trial_seed(7, t)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}
