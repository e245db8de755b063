//! Log-log plot of |λ_j| against j. Written for people, never read back.

use std::fmt::Write as _;

use np_spectra_core::Spectrum;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn decay_plot(spectra: &[(String, &Spectrum)]) -> String {
    let series: Vec<(&str, Vec<(f64, f64)>)> = spectra
        .iter()
        .map(|(label, s)| {
            let floor = s.roundoff_floor();
            let pts = s
                .moduli()
                .iter()
                .enumerate()
                .filter(|(_, m)| **m > floor)
                .map(|(j, m)| (((j + 1) as f64).log10(), m.log10()))
                .collect();
            (label.as_str(), pts)
        })
        .collect();
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x1, mut y0, mut y1) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !y0.is_finite() {
        (y0, y1) = (-1.0, 0.0);
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| PAD + x / x1 * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for e in (y0 as i32)..=(y1 as i32) {
        let y = sy(e as f64);
        let _ = writeln!(out, r#"<text x="4" y="{:.1}">1e{e}</text>"#, y + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">j (log scale)</text>"#, W / 2.0, H - 12.0);
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for &(x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, d.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">N = {label}</text>"#,
            W - PAD - 110.0,
            PAD + 16.0 * k as f64
        );
    }
    out.push_str("</svg>\n");
    out
}
