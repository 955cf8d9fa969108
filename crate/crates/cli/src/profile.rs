//! Radial profile of a bubble: length, critical density and its cumulative
//! integral over balls around the center.

use std::io::Write;

use serde::Serialize;

use nldirac::fields::bubble_length;
use nldirac::geometry::radial_integral_to;
use nldirac::BubbleParams;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub length: f64,
    /// `|ψ|^{2n/(n-1)}`.
    pub density: f64,
    /// Integral of the density over the ball of radius `r`.
    pub cumulative: f64,
}

/// `samples` equally spaced radii from 0 to `r_max`, inclusive.
pub fn emit_profile(p: &BubbleParams, r_max: f64, samples: usize) -> Result<Vec<ProfileRow>, CliError> {
    if samples < 2 {
        return Err(CliError::Config(format!("samples must be at least 2, got {samples}")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(CliError::Config(format!("r_max must be positive, got {r_max}")));
    }
    p.validate()?;
    let n = p.dim();
    let power = 2.0 * n as f64 / (n as f64 - 1.0);
    let density = |r: f64| bubble_length(p, r).powf(power);
    let total_scale = radial_integral_to(density, n, f64::INFINITY, 1e-12)?;
    (0..samples)
        .map(|i| {
            let r = r_max * i as f64 / (samples - 1) as f64;
            let cumulative = if r == 0.0 {
                0.0
            } else {
                radial_integral_to(density, n, r, 1e-12 * total_scale)?
            };
            Ok(ProfileRow {
                r,
                length: bubble_length(p, r),
                density: density(r),
                cumulative,
            })
        })
        .collect()
}

pub fn write_csv(rows: &[ProfileRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nldirac::geometry::sphere_volume;

    #[test]
    fn first_row_and_total() {
        for (n, lam) in [(2usize, 1.0), (3, 1.0), (3, 2.5), (4, 0.5)] {
            let p = BubbleParams::ground_state(n, lam, vec![0.0; n]).unwrap();
            let rows = emit_profile(&p, 1e3 * lam, 101).unwrap();
            let nf = n as f64;
            let peak = (nf / lam).powf((nf - 1.0) / 2.0);
            assert!((rows[0].length - peak).abs() <= 1e-12 * peak);
            assert_eq!(rows[0].cumulative, 0.0);
            let total = (nf / 2.0).powf(nf) * sphere_volume(n);
            let last = rows.last().unwrap().cumulative;
            assert!((last - total).abs() <= 5e-3 * total, "n={n} {last} vs {total}");
            for w in rows.windows(2) {
                assert!(w[1].length < w[0].length);
                assert!(w[1].cumulative >= w[0].cumulative);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = BubbleParams::standard(3).unwrap();
        assert!(emit_profile(&p, 10.0, 1).is_err());
        assert!(emit_profile(&p, 0.0, 10).is_err());
        assert!(emit_profile(&p, f64::NAN, 10).is_err());
    }

    #[test]
    fn csv_header() {
        let p = BubbleParams::standard(2).unwrap();
        let mut buf = Vec::new();
        write_csv(&emit_profile(&p, 1.0, 3).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("r,length,density,cumulative"));
        assert_eq!(text.lines().count(), 4);
    }
}
