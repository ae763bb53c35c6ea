//! File formats: PGM pattern images, CSV matrices, sample sets, point clouds
//! and transfer logs. Numbers are written in plain decimal with 9 significant
//! digits.

mod pgm;
mod tables;

pub use pgm::{read_pgm, write_pgm};
pub use tables::{
    read_cloud, read_matrix, read_sample_sets, write_cloud, write_sample_sets, write_transfers,
    RECOMPUTE_TOL,
};

/// Plain decimal with 9 significant digits, trailing zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v == 0.0 {
            "0".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_num(123456.789012), "123456.789");
        assert_eq!(fmt_num(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_num(1.5e10), "15000000000");
        assert_eq!(fmt_num(-1e-12), "-0.000000000001");
    }
}
