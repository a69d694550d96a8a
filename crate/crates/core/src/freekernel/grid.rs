//! Sampled kernels `(x_i, y_j) ↦ K_t(x_i, y_j)` and their export formats.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hexfloat::to_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    P0,
    P0Derivative,
    P0TimeDerivative,
    Phi,
    PhiK,
    Psi,
    P,
    PEps,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub provenance: Provenance,
    /// Estimated absolute error of the entries.
    pub err_est: f64,
    /// Spacing of the underlying uniform grid.
    pub spacing: f64,
    /// Half-width of the underlying grid.
    pub half_width: f64,
    #[serde(default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    pub t: f64,
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub values: Array2<f64>,
    pub meta: GridMeta,
}

#[derive(Serialize)]
struct ExactGrid<'a> {
    t: String,
    x_nodes: Vec<String>,
    y_nodes: Vec<String>,
    values: Vec<Vec<String>>,
    meta: ExactMeta<'a>,
}

#[derive(Serialize)]
struct ExactMeta<'a> {
    provenance: Provenance,
    err_est: String,
    spacing: String,
    half_width: String,
    flags: &'a [String],
}

#[derive(Deserialize)]
struct ExactGridIn {
    t: String,
    x_nodes: Vec<String>,
    y_nodes: Vec<String>,
    values: Vec<Vec<String>>,
    meta: ExactMetaIn,
}

#[derive(Deserialize)]
struct ExactMetaIn {
    provenance: Provenance,
    err_est: String,
    spacing: String,
    half_width: String,
    flags: Vec<String>,
}

impl KernelGrid {
    pub fn new(t: f64, x_nodes: Vec<f64>, y_nodes: Vec<f64>, values: Array2<f64>, meta: GridMeta) -> Result<Self> {
        if values.dim() != (x_nodes.len(), y_nodes.len()) {
            return Err(Error::GridMismatch(format!(
                "values {:?} vs nodes ({}, {})",
                values.dim(),
                x_nodes.len(),
                y_nodes.len()
            )));
        }
        Ok(Self { t, x_nodes, y_nodes, values, meta })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    /// CSV with header `t,x,y,value,err_est`.
    pub fn write_csv<W: Write>(&self, mut w: W, exact: bool) -> Result<()> {
        writeln!(w, "t,x,y,value,err_est")?;
        let fmt = |v: f64| if exact { to_hex(v) } else { format!("{v:.17e}") };
        for (i, &x) in self.x_nodes.iter().enumerate() {
            for (j, &y) in self.y_nodes.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt(self.t),
                    fmt(x),
                    fmt(y),
                    fmt(self.values[(i, j)]),
                    fmt(self.meta.err_est)
                )?;
            }
        }
        Ok(())
    }

    /// JSON; with `exact` every float is written as a hex string.
    pub fn to_json(&self, exact: bool) -> Result<String> {
        if !exact {
            return Ok(serde_json::to_string_pretty(self)?);
        }
        let hex = |v: &[f64]| v.iter().map(|&x| to_hex(x)).collect::<Vec<_>>();
        let g = ExactGrid {
            t: to_hex(self.t),
            x_nodes: hex(&self.x_nodes),
            y_nodes: hex(&self.y_nodes),
            values: self.values.rows().into_iter().map(|r| hex(&r.to_vec())).collect(),
            meta: ExactMeta {
                provenance: self.meta.provenance,
                err_est: to_hex(self.meta.err_est),
                spacing: to_hex(self.meta.spacing),
                half_width: to_hex(self.meta.half_width),
                flags: &self.meta.flags,
            },
        };
        Ok(serde_json::to_string_pretty(&g)?)
    }

    /// Parses either JSON layout written by [`KernelGrid::to_json`].
    pub fn from_json(s: &str) -> Result<Self> {
        if let Ok(g) = serde_json::from_str::<KernelGrid>(s) {
            return Ok(g);
        }
        use crate::hexfloat::from_hex;
        let g: ExactGridIn = serde_json::from_str(s)?;
        let parse = |v: &[String]| v.iter().map(|x| from_hex(x)).collect::<Result<Vec<_>>>();
        let x_nodes = parse(&g.x_nodes)?;
        let y_nodes = parse(&g.y_nodes)?;
        let mut flat = Vec::with_capacity(x_nodes.len() * y_nodes.len());
        for r in &g.values {
            flat.extend(parse(r)?);
        }
        let values = Array2::from_shape_vec((x_nodes.len(), y_nodes.len()), flat)
            .map_err(|e| Error::GridMismatch(e.to_string()))?;
        KernelGrid::new(
            from_hex(&g.t)?,
            x_nodes,
            y_nodes,
            values,
            GridMeta {
                provenance: g.meta.provenance,
                err_est: from_hex(&g.meta.err_est)?,
                spacing: from_hex(&g.meta.spacing)?,
                half_width: from_hex(&g.meta.half_width)?,
                flags: g.meta.flags,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_json_round_trip() {
        let values = Array2::from_shape_fn((2, 3), |(i, j)| (i as f64 + 0.1) / (j as f64 + 3.0));
        let g = KernelGrid::new(
            0.1,
            vec![0.0, 0.3],
            vec![-1.0, 0.0, 1.0 / 3.0],
            values,
            GridMeta { provenance: Provenance::P, err_est: 1e-9, spacing: 0.1, half_width: 1.0, flags: vec![] },
        )
        .unwrap();
        let back = KernelGrid::from_json(&g.to_json(true).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
