//! dB conversions. Powers are milliwatts internally.

/// 10·log10(x). Zero maps to negative infinity.
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_lin(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    lin_to_db(mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for x in [1e-9, 0.5, 1.0, 70.0, 1e6] {
            assert!((db_to_lin(lin_to_db(x)) - x).abs() < 1e-12 * x);
        }
        assert_eq!(lin_to_db(0.0), f64::NEG_INFINITY);
        assert!((dbm_to_mw(30.0) - 1000.0).abs() < 1e-9);
    }
}
