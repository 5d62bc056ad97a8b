use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip repr: deterministic across runs
            Cell::Num(x) => format!("{x}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) if x.is_finite() => Some(*x),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    /// `"1"` for dimensionless, `"-"` for labels.
    pub unit: String,
}

impl Column {
    pub fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

/// How to draw the table: x column, y columns, optional grouping column
/// that splits rows into separate curves.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: usize,
    pub ys: Vec<usize>,
    pub group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub plot: Option<PlotSpec>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn with_plot(mut self, x: usize, ys: &[usize], group: Option<usize>) -> Self {
        self.plot = Some(PlotSpec { x, ys: ys.to_vec(), group });
        self
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(self.columns.iter().map(Column::header))?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    /// Plain line plot, one polyline per y column and group.
    pub fn to_svg(&self) -> Option<String> {
        let spec = self.plot.as_ref()?;
        let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for &y in &spec.ys {
            for r in &self.rows {
                let (Some(px), Some(py)) = (r[spec.x].num(), r[y].num()) else {
                    continue;
                };
                let label = match spec.group {
                    Some(g) => format!("{} ({} = {})", self.columns[y].name, self.columns[g].name, r[g].render()),
                    None => self.columns[y].name.clone(),
                };
                match curves.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, pts)) => pts.push((px, py)),
                    None => curves.push((label, vec![(px, py)])),
                }
            }
        }
        let all = curves.iter().flat_map(|(_, p)| p.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x1 > x0) {
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            y1 = y0 + 1.0;
        }
        let (w, h, m) = (720.0, 440.0, 60.0);
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<polyline points="{m},{m} {m},{} {},{}" fill="none" stroke="black"/>"#,
            h - m,
            w - m,
            h - m
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(&self.columns[spec.x].header()));
        for (v, y) in [(y0, h - m), (y1, m)] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.4e}</text>"#, m - 4.0, y + 4.0);
        }
        for (v, x) in [(x0, m), (x1, w - m)] {
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{v:.4e}</text>"#, h - m + 16.0);
        }
        for (k, (label, pts)) in curves.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, path.join(" "));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
                m + 8.0,
                m + 14.0 * (k as f64 + 1.0),
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        Some(s)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_annotates() {
        let mut t = Table::new(&[("quantity", "-"), ("value", "Hz")]);
        t.push(vec!["G1, first order".into(), (-32000.0).into()]);
        t.push(vec!["say \"hi\"".into(), 0.5.into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "quantity [-],value [Hz]\r\n\"G1, first order\",-32000\r\n\"say \"\"hi\"\"\",0.5\r\n");
    }

    #[test]
    fn svg_has_one_curve_per_group() {
        let mut t = Table::new(&[("x", "1"), ("g", "1"), ("y", "1")]).with_plot(0, &[2], Some(1));
        for g in [1.0, 2.0] {
            for x in 0..3 {
                t.push(vec![(x as f64).into(), g.into(), (g * x as f64).into()]);
            }
        }
        let svg = t.to_svg().unwrap();
        assert_eq!(svg.matches("stroke-width").count(), 2);
    }
}
