//! CSV and SVG writers for diagnostics artifacts.

use std::fmt::Write as _;
use std::io::Write;

use crate::diagnostics::{CorrelationMatrix, KlReport, PosteriorSummary, Predictive};
use crate::error::Result;
use crate::forward::ObsPoint;

fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_kl_csv<W: Write>(w: W, report: &KlReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["param", "k", "kl", "mean", "std"])?;
    let h = report.entries.len() / 2;
    for (i, e) in report.entries.iter().enumerate() {
        wr.write_record([e.name.clone(), (i % h.max(1) + 1).to_string(), num(e.kl), num(e.mean), num(e.std)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_param_summary_csv<W: Write>(w: W, s: &PosteriorSummary) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["param", "mean", "std", "ci95_lo", "ci95_hi", "ci99_lo", "ci99_hi"])?;
    for (name, m) in s.names.iter().zip(&s.params) {
        wr.write_record([
            name.clone(),
            num(m.mean),
            num(m.std),
            num(m.ci95.lo),
            num(m.ci95.hi),
            num(m.ci99.lo),
            num(m.ci99.hi),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_mode_summary_csv<W: Write>(w: W, s: &PosteriorSummary) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "k", "re_mean", "re_std", "re_ci99_lo", "re_ci99_hi", "im_mean", "im_std", "im_ci99_lo", "im_ci99_hi",
        "re_mapped_mean", "im_mapped_mean", "re_jensen_gap", "im_jensen_gap",
    ])?;
    for m in &s.modes {
        wr.write_record([
            m.k.to_string(),
            num(m.re.mean),
            num(m.re.std),
            num(m.re.ci99.lo),
            num(m.re.ci99.hi),
            num(m.im.mean),
            num(m.im.std),
            num(m.im.ci99.lo),
            num(m.im.ci99.hi),
            num(m.mapped_mean[0]),
            num(m.mapped_mean[1]),
            num(m.jensen_gap[0]),
            num(m.jensen_gap[1]),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_correlation_csv<W: Write>(w: W, c: &CorrelationMatrix) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(c.names.iter().cloned());
    wr.write_record(&header)?;
    let n = c.dim();
    for i in 0..n {
        let mut row = vec![c.names[i].clone()];
        row.extend((0..n).map(|j| num(c.get(i, j))));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Blue-white-red heatmap; undefined entries drawn grey.
pub fn correlation_svg(c: &CorrelationMatrix) -> String {
    let n = c.dim();
    let cell = 16;
    let margin = 40;
    let size = margin + n * cell;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="8">"#
    );
    for (i, name) in c.names.iter().enumerate() {
        let p = margin + i * cell + cell / 2;
        let _ = writeln!(s, r#"<text x="{}" y="{p}" text-anchor="end" dominant-baseline="middle">{name}</text>"#, margin - 2);
        let _ = writeln!(
            s,
            r#"<text x="{p}" y="{}" text-anchor="start" transform="rotate(-90 {p} {})">{name}</text>"#,
            margin - 2,
            margin - 2
        );
    }
    for i in 0..n {
        for j in 0..n {
            let v = c.get(i, j);
            let fill = if v.is_finite() {
                let t = v.clamp(-1.0, 1.0);
                let (r, g, b) = if t >= 0.0 {
                    (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
                } else {
                    (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
                };
                format!("rgb({},{},{})", r as u8, g as u8, b as u8)
            } else {
                "rgb(160,160,160)".to_string()
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{fill}"><title>{} / {}: {v:.3}</title></rect>"#,
                margin + j * cell,
                margin + i * cell,
                c.names[i],
                c.names[j]
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// `x,t,mean,std,min,max[,data]`.
pub fn write_predictive_csv<W: Write>(w: W, points: &[ObsPoint], p: &Predictive, data: Option<&[f64]>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["x", "t", "mean", "std", "min", "max"];
    if data.is_some() {
        header.push("data");
    }
    wr.write_record(&header)?;
    for (i, pt) in points.iter().enumerate() {
        let mut row = vec![num(pt.x), num(pt.t), num(p.mean[i]), num(p.std[i]), num(p.min[i]), num(p.max[i])];
        if let Some(d) = data {
            row.push(num(d[i]));
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::correlation_from_samples;

    #[test]
    fn svg_has_one_cell_per_entry() {
        let c = correlation_from_samples(&[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 3.0, 5.0, 0.0], 3, vec!["a".into(), "b".into(), "c".into()]);
        let svg = correlation_svg(&c);
        assert_eq!(svg.matches("<rect").count(), 9);
        assert!(svg.contains("rgb(160,160,160)"));
        let mut buf = Vec::new();
        write_correlation_csv(&mut buf, &c).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
