//! File emission: CSV with 12 significant digits, JSON, and 16-bit PGM heatmaps.

use std::fs;
use std::io::Write;
use std::path::Path;

use binlattice::IntensityMap;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// `%.12g`-style decimal text.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// `t, site_<label>...` rows, optionally followed by an integer column.
pub fn intensity_csv(map: &IntensityMap, site_origin: u32, extra: Option<(&str, &[usize])>) -> String {
    let clamped = map.clamped();
    let mut out = String::from("t");
    for k in 0..map.n_sites {
        out.push_str(&format!(",site_{}", k + site_origin as usize));
    }
    if let Some((name, _)) = extra {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (r, t) in map.times.iter().enumerate() {
        out.push_str(&fmt_sig(*t));
        for x in clamped.row(r) {
            out.push(',');
            out.push_str(&fmt_sig(*x));
        }
        if let Some((_, col)) = extra {
            out.push_str(&format!(",{}", col[r]));
        }
        out.push('\n');
    }
    out
}

/// Binary PGM (P5, maxval 65535): rows are times, columns are sites.
pub fn heatmap_pgm(map: &IntensityMap) -> Vec<u8> {
    let clamped = map.clamped();
    let mut out = format!("P5\n{} {}\n65535\n", map.n_sites, map.rows()).into_bytes();
    for x in clamped.iter() {
        out.extend_from_slice(&((x * 65535.0).round() as u16).to_be_bytes());
    }
    out
}

pub fn write_heatmap(path: &Path, map: &IntensityMap) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&heatmap_pgm(map)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use binlattice::dynamics::MapSource;
    use ndarray::array;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_sig(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_sig(123456.0), "123456");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(4.4e13), "4.4e+13");
        assert_eq!(fmt_sig(0.00012345), "0.00012345");
    }

    fn tiny_map() -> IntensityMap {
        IntensityMap {
            times: vec![0.0, 0.5],
            n_sites: 2,
            intensities: array![[1.0, 0.0], [0.25, 0.75 + 1e-13]],
            input_site: 0,
            source: MapSource::Unspecified,
        }
    }

    #[test]
    fn csv_layout() {
        let csv = intensity_csv(&tiny_map(), 1, Some(("stage", &[0, 1])));
        assert_eq!(csv, "t,site_1,site_2,stage\n0,1,0,0\n0.5,0.25,0.75,1\n");
    }

    #[test]
    fn pgm_layout() {
        let bytes = heatmap_pgm(&tiny_map());
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0xff, 0xff, 0, 0, 0x40, 0x00, 0xbf, 0xff]);
    }
}
