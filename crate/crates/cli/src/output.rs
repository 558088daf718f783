//! CSV, JSON and gnuplot emission.

use std::fmt::Write;
use std::path::Path;

use symext::bounds::BoundPoint;

pub const CSV_HEADER: &str = "e,qber,lambda_max,mutual_info_ne,upper_bound,duality_gap,status";

/// `%.10g`: ten significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e10)`.
pub fn format_sig10(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..10).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (9 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv(points: &[BoundPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        let fields = [
            p.e,
            p.qber,
            p.lambda_max,
            p.mutual_info_ne,
            p.upper_bound,
            p.duality_gap,
        ];
        for f in fields {
            out.push_str(&format_sig10(f));
            out.push(',');
        }
        out.push_str(p.status.label());
        out.push('\n');
    }
    out
}

pub fn json(points: &[BoundPoint]) -> String {
    let mut s = serde_json::to_string_pretty(points).expect("bound points serialize");
    s.push('\n');
    s
}

/// Plot script reading the CSV next to it; renders `<stem>.png`.
pub fn gnuplot_script(csv_path: &Path, title: &str) -> String {
    let csv_name = csv_path
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let png = csv_path.with_extension("png");
    let png_name = png
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let _ = writeln!(s, "set output '{png_name}'");
    let _ = writeln!(s, "set xlabel 'QBER'");
    let _ = writeln!(s, "set ylabel 'upper bound on one-way key rate (bits)'");
    let _ = writeln!(s, "set yrange [0:1.05]");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(
        s,
        "plot '{csv_name}' every ::1 using 1:5 with linespoints title '{title}'"
    );
    s
}
