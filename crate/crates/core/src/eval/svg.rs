use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let m = 0.08 * (hi - lo);
        (lo - m, hi + m)
    }
}

/// Labelled scatter plot of 2-D points.
pub fn scatter(title: &str, points: &[(String, [f64; 2])]) -> String {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(_, p)| (p[0], p[1])).unzip();
    let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let ((x0, x1), (y0, y1)) = (fold(&xs), fold(&ys));
    let ((x0, x1), (y0, y1)) = if points.is_empty() { ((-1.0, 1.0), (-1.0, 1.0)) } else { (span(x0, x1), span(y0, y1)) };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">PC1</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})">PC2</text>"#, H / 2.0, H / 2.0);
    for (label, p) in points {
        let (cx, cy) = (sx(p[0]), sy(p[1]));
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="steelblue"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, cx + 7.0, cy - 7.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Vertical bar chart of non-negative values.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let top = bars.iter().map(|(_, v)| *v).fold(0.0f64, f64::max).max(1e-12);
    let slot = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD);
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = v.max(0.0) / top * (H - 2.0 * PAD);
        let x = PAD + i as f64 * slot + 0.15 * slot;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"/>"#,
            H - PAD - h,
            0.7 * slot
        );
        let cx = x + 0.35 * slot;
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#, H - PAD + 16.0, escape(label));
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="11">{v:.3}</text>"#, H - PAD - h - 4.0);
    }
    s.push_str("</svg>\n");
    s
}
