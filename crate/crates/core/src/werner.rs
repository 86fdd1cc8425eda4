//! Closed-form costs along the Werner family `p |Psi-><Psi-| + (1 - p) I/4`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::costs::eof_from_concurrence;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::numerics::{h2, xlog2x_neg};

/// Header of the sweep CSV.
pub const CSV_HEADER: &str =
    "p,W_A,W_E_dd,lhs_floor,entangled,steerable,nonlocal,dd_exclusive,sdi_witness";

/// Floor on the semi-device-independent cost for qubit MUBs.
pub const LHS_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerRow {
    pub p: f64,
    pub w_a: f64,
    pub w_e_dd: f64,
    pub lhs_floor: f64,
    pub entangled: bool,
    pub steerable: bool,
    pub nonlocal: bool,
    pub dd_exclusive: bool,
    pub sdi_witness: bool,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "Werner parameter p",
            value: p,
            range: "[0, 1]",
        });
    }
    Ok(())
}

pub fn assisted_cost(p: f64) -> f64 {
    h2((1.0 - p) / 2.0)
}

pub fn concurrence(p: f64) -> f64 {
    ((3.0 * p - 1.0) / 2.0).max(0.0)
}

pub fn adversary_cost(p: f64) -> f64 {
    eof_from_concurrence(concurrence(p))
}

/// `W_A` rebuilt as `S(AB) + D(B|A) - 1` from the spectrum of the state
/// and the closed-form discord.
pub fn assisted_cost_via_discord(p: f64) -> f64 {
    let big = (1.0 + 3.0 * p) / 4.0;
    let small = (1.0 - p) / 4.0;
    let s_ab = xlog2x_neg(big) + 3.0 * xlog2x_neg(small);
    let (up, down) = ((1.0 + p) / 2.0, (1.0 - p) / 2.0);
    let discord = 2.0 - s_ab - (1.0 - xlog2x_neg(up) - xlog2x_neg(down));
    s_ab + discord - 1.0
}

pub fn werner_closed_forms(p: f64) -> Result<WernerRow> {
    check_p(p)?;
    let w_a = assisted_cost(p);
    let via_discord = assisted_cost_via_discord(p);
    debug_assert!(
        (w_a - via_discord).abs() <= 1e-10,
        "p = {p}: {w_a} vs {via_discord}"
    );
    let w_e_dd = adversary_cost(p);
    Ok(WernerRow {
        p,
        w_a,
        w_e_dd,
        lhs_floor: LHS_FLOOR,
        entangled: p > 1.0 / 3.0,
        steerable: p > 0.5,
        nonlocal: p > FRAC_1_SQRT_2,
        dd_exclusive: w_a < w_e_dd,
        sdi_witness: w_a < LHS_FLOOR,
    })
}

/// Grid point `i` of `steps` on `[lo, hi]`, hitting both endpoints exactly.
pub fn grid_point(lo: f64, hi: f64, steps: usize, i: usize) -> f64 {
    if i + 1 == steps {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    }
}

pub fn sweep(p_min: f64, p_max: f64, steps: usize, exec: Execution) -> Result<Vec<WernerRow>> {
    check_p(p_min)?;
    check_p(p_max)?;
    if !(p_min < p_max) || steps < 2 {
        return Err(Error::Config(format!(
            "sweep needs p_min < p_max and at least 2 steps, got [{p_min}, {p_max}] with {steps}"
        )));
    }
    map_indexed(exec, steps, |i| {
        werner_closed_forms(grid_point(p_min, p_max, steps, i))
    })
    .into_iter()
    .collect()
}

/// Bisection for a sign change of `f` on `[lo, hi]` down to `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let f_lo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossings {
    /// `W_A = W_E`: onset of device-dependent exclusivity.
    pub p_dd: f64,
    /// `W_A = 1/2`: onset of the steering witness.
    pub p_sdi: f64,
}

pub fn crossings() -> Crossings {
    let tol = 1e-10;
    Crossings {
        p_dd: bisect(
            |p| assisted_cost(p) - adversary_cost(p),
            1.0 / 3.0,
            1.0,
            tol,
        ),
        p_sdi: bisect(|p| assisted_cost(p) - LHS_FLOOR, 0.0, 1.0, tol),
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{}e{}{:02}", m, if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(mut w: W, rows: &[WernerRow]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let b = |x: bool| if x { 1 } else { 0 };
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            format_g12(r.p),
            format_g12(r.w_a),
            format_g12(r.w_e_dd),
            format_g12(r.lhs_floor),
            b(r.entangled),
            b(r.steerable),
            b(r.nonlocal),
            b(r.dd_exclusive),
            b(r.sdi_witness)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let r = werner_closed_forms(0.0).unwrap();
        assert!((r.w_a - 1.0).abs() < 1e-15 && r.w_e_dd == 0.0);
        let r = werner_closed_forms(1.0).unwrap();
        assert!(r.w_a.abs() < 1e-15 && (r.w_e_dd - 1.0).abs() < 1e-15);
        assert_eq!(werner_closed_forms(1.0 / 3.0).unwrap().w_e_dd, 0.0);
        assert!(werner_closed_forms(1.2).is_err());
    }

    #[test]
    fn discord_route_agrees() {
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            assert!(
                (assisted_cost(p) - assisted_cost_via_discord(p)).abs() <= 1e-10,
                "{p}"
            );
        }
    }

    #[test]
    fn sweep_grid() {
        let rows = sweep(0.0, 1.0, 3, Execution::Sequential).unwrap();
        let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![0.0, 0.5, 1.0]);
        let rows = sweep(0.0, 1.0, 101, Execution::Parallel).unwrap();
        assert!(rows.windows(2).all(|w| w[1].w_a < w[0].w_a));
        for w in rows.windows(2) {
            if w[1].p <= 1.0 / 3.0 {
                assert_eq!(w[1].w_e_dd, 0.0);
            } else if w[0].p >= 1.0 / 3.0 {
                assert!(w[1].w_e_dd > w[0].w_e_dd);
            }
        }
        assert!(sweep(0.5, 0.5, 3, Execution::Sequential).is_err());
        assert!(sweep(0.0, 1.0, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn crossing_ordering() {
        let c = crossings();
        assert!(c.p_dd > FRAC_1_SQRT_2 && c.p_dd < 1.0);
        assert!(c.p_sdi > 0.5 && c.p_sdi < 1.0);
        // 13 p^2 - 6 p - 3 = 0 from equating the two binary-entropy arguments
        let root = (6.0 + (36.0f64 + 156.0).sqrt()) / 26.0;
        assert!((c.p_dd - root).abs() < 1e-9);
    }

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(0.5), "0.5");
        assert_eq!(format_g12(0.01), "0.01");
        assert_eq!(format_g12(0.7219280948873623), "0.721928094887");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(1.5e-7), "1.5e-07");
        assert_eq!(format_g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_g12(0.0001), "0.0001");
    }

    #[test]
    fn csv_layout() {
        let rows = sweep(0.0, 1.0, 2, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,1,0,0.5,0,0,0,0,0");
        assert_eq!(lines[2], "1,0,1,0.5,1,1,1,1,1");
    }
}
