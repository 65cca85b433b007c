//! CSV rows for every subcommand. Numbers are printed in plain decimal
//! notation with 12 significant digits; undefined values are empty fields.

use std::io::Write;

use crate::decoy::BoundEstimates;
use crate::keyrate::{clamp_rate as clamped, RateReport};
use crate::optics::GainTable;
use crate::optimize::{Optimum, SweepPoint};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with [`SIGNIFICANT_DIGITS`] significant digits without an exponent.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Let the standard formatter do the rounding, then move the decimal point.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x.abs());
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i64 = exponent.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let n = digits.len() as i64;
    let body = if exponent < 0 {
        format!("0.{}{}", "0".repeat((-exponent - 1) as usize), digits)
    } else if exponent >= n - 1 {
        format!("{}{}", digits, "0".repeat((exponent - (n - 1)) as usize))
    } else {
        let split = (exponent + 1) as usize;
        format!("{}.{}", &digits[..split], &digits[split..])
    };
    if x < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

fn line(out: &mut dyn Write, fields: &[String]) -> std::io::Result<()> {
    writeln!(out, "{}", fields.join(","))
}

fn header(out: &mut dyn Write, names: &[&str]) -> std::io::Result<()> {
    writeln!(out, "{}", names.join(","))
}

pub fn write_gains(out: &mut dyn Write, gains: &GainTable) -> std::io::Result<()> {
    header(out, &["basis", "alpha", "beta", "S", "T", "E"])?;
    for (basis, alpha, beta, e) in gains.iter() {
        line(
            out,
            &[
                basis.to_string(),
                alpha.to_string(),
                beta.to_string(),
                format_number(e.s),
                format_number(e.t),
                format_number(e.error_rate()),
            ],
        )?;
    }
    Ok(())
}

pub const BOUNDS_HEADER: &[&str] = &[
    "loss_db",
    "s11_lower_z",
    "s11_lower_x",
    "e11_upper_x",
    "e11_upper_x_via_z",
    "basis_used",
    "s11_true",
    "e11_x_true",
];

/// Bound row; `truth` carries the loss and the simulator's true values when known.
pub fn write_bounds(
    out: &mut dyn Write,
    bounds: &BoundEstimates,
    truth: Option<(f64, f64, f64)>,
) -> std::io::Result<()> {
    header(out, BOUNDS_HEADER)?;
    line(
        out,
        &[
            optional(truth.map(|t| t.0)),
            format_number(bounds.s11_lower_z),
            optional(bounds.s11_lower_x),
            optional(bounds.e11_upper_x),
            optional(bounds.e11_upper_x_via_z),
            bounds.basis_used.to_string(),
            optional(truth.map(|t| t.1)),
            optional(truth.map(|t| t.2)),
        ],
    )
}

pub const RATE_HEADER: &[&str] = &[
    "loss_db",
    "r_standard",
    "r_z",
    "r_x",
    "r_infinite",
    "r_standard_clamped",
    "r_z_clamped",
    "r_x_clamped",
    "r_infinite_clamped",
    "s11_lower_z",
    "s11_lower_x",
    "e11_upper_x",
    "e11_upper_x_via_z",
    "s11_true",
    "e11_x_true",
    "s_yy_z",
    "e_yy_z",
];

pub fn write_rate(out: &mut dyn Write, r: &RateReport) -> std::io::Result<()> {
    header(out, RATE_HEADER)?;
    line(
        out,
        &[
            format_number(r.loss_db),
            optional(r.r_standard),
            format_number(r.r_z),
            optional(r.r_x),
            format_number(r.r_infinite),
            optional(r.r_standard.map(clamped)),
            format_number(clamped(r.r_z)),
            optional(r.r_x.map(clamped)),
            format_number(clamped(r.r_infinite)),
            format_number(r.bounds.s11_lower_z),
            optional(r.bounds.s11_lower_x),
            optional(r.bounds.e11_upper_x),
            optional(r.bounds.e11_upper_x_via_z),
            format_number(r.s11_true),
            format_number(r.e11_x_true),
            format_number(r.s_yy_z),
            format_number(r.e_yy_z),
        ],
    )
}

pub const SWEEP_HEADER: &[&str] = &[
    "loss_db",
    "r_standard",
    "r_z",
    "r_x",
    "r_infinite",
    "r_standard_clamped",
    "r_z_clamped",
    "r_x_clamped",
    "r_infinite_clamped",
    "rel_standard",
    "rel_z",
    "rel_x",
];

pub fn write_sweep(out: &mut dyn Write, points: &[SweepPoint]) -> std::io::Result<()> {
    header(out, SWEEP_HEADER)?;
    for p in points {
        let r = &p.report;
        line(
            out,
            &[
                format_number(r.loss_db),
                optional(r.r_standard),
                format_number(r.r_z),
                optional(r.r_x),
                format_number(r.r_infinite),
                optional(r.r_standard.map(clamped)),
                format_number(clamped(r.r_z)),
                optional(r.r_x.map(clamped)),
                format_number(clamped(r.r_infinite)),
                optional(r.relative_to_infinite(r.r_standard)),
                optional(r.relative_to_infinite(Some(r.r_z))),
                optional(r.relative_to_infinite(r.r_x)),
            ],
        )?;
    }
    Ok(())
}

pub const OPTIMIZE_HEADER: &[&str] = &[
    "loss_db",
    "protocol",
    "signal",
    "decoy",
    "rate",
    "rate_clamped",
];

pub fn write_optima(out: &mut dyn Write, points: &[SweepPoint]) -> std::io::Result<()> {
    header(out, OPTIMIZE_HEADER)?;
    for o in points.iter().flat_map(|p| &p.optima) {
        write_optimum(out, o)?;
    }
    Ok(())
}

fn write_optimum(out: &mut dyn Write, o: &Optimum) -> std::io::Result<()> {
    line(
        out,
        &[
            format_number(o.loss_db),
            o.protocol.to_string(),
            optional(o.intensities.map(|i| i.signal)),
            optional(o.intensities.and_then(|i| i.decoy)),
            format_number(o.rate),
            format_number(clamped(o.rate)),
        ],
    )
}
