//! Report encodings: JSON envelope, CSV tables and heatmap images.

use std::fmt::Write as _;

use minsing::svd::SvdGraph;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema_version: u32,
    command: &'a str,
    scenario: &'a str,
    settings: &'a serde_json::Value,
    result: R,
}

/// Pretty JSON with a trailing newline. Infinite and NaN numbers become
/// `null`.
pub fn json_report<R: Serialize>(command: &str, scenario: &str, settings: &serde_json::Value, result: R) -> Vec<u8> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command, scenario, settings, result };
    let mut out = serde_json::to_vec_pretty(&env).expect("reports serialize");
    out.push(b'\n');
    out
}

pub fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

/// Node values laid out on the raster of the graph's lattice; a graph
/// without lattice becomes a single row ordered by x.
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major from the top row; `None` where there is no node.
    pub cells: Vec<Option<f64>>,
}

impl Raster {
    pub fn of_graph(g: &SvdGraph, values: &[f64]) -> Raster {
        match &g.lattice {
            Some(l) => {
                let mut cells = vec![None; l.nx * l.ny];
                for (k, &[i, j]) in l.cells.iter().enumerate() {
                    cells[(l.ny - 1 - j) * l.nx + i] = Some(values[k]);
                }
                Raster { width: l.nx, height: l.ny, cells }
            }
            None => {
                let mut order: Vec<usize> = (0..g.len()).collect();
                order.sort_by(|&a, &b| g.nodes[a][0].total_cmp(&g.nodes[b][0]));
                Raster { width: g.len(), height: 1, cells: order.iter().map(|&k| Some(values[k])).collect() }
            }
        }
    }

    /// Grey levels in `[0, 1]`: min-max normalised over finite values, with
    /// `+inf` at the top and empty cells at zero.
    fn levels(&self) -> Vec<f64> {
        let finite = self.cells.iter().flatten().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        self.cells
            .iter()
            .map(|c| match c {
                None => 0.0,
                Some(v) if !v.is_finite() => 1.0,
                Some(v) if hi > lo => (v - lo) / (hi - lo),
                Some(_) => 0.0,
            })
            .collect()
    }

    /// Binary PGM with 16-bit big-endian samples.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for l in self.levels() {
            let v = (l * 65535.0).round() as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn to_svg(&self, cell: u32) -> Vec<u8> {
        let (w, h) = (self.width as u32 * cell, self.height as u32 * cell);
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
        for (k, (l, c)) in self.levels().iter().zip(&self.cells).enumerate() {
            if c.is_none() {
                continue;
            }
            let (x, y) = ((k % self.width) as u32 * cell, (k / self.width) as u32 * cell);
            let g = (l * 255.0).round() as u8;
            let _ = writeln!(s, "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({g},{g},{g})\"/>");
        }
        s.push_str("</svg>\n");
        s.into_bytes()
    }
}
