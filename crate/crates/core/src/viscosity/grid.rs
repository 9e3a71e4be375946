use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Domain;

/// A scalar field on the nodes of a box grid, axis 0 slowest.
///
/// `-inf` marks nodes where an upper semicontinuous function is `-inf`,
/// `+inf` the lower semicontinuous counterpart. NaN is rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub domain: Domain,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if values.len() != domain.node_count() {
            return Err(Error::DimensionMismatch {
                expected: domain.node_count(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidInput(format!("NaN value at node {i}")));
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: &Domain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.node_count()).map(|i| f(&domain.point(i))).collect();
        Self {
            domain: domain.clone(),
            values,
        }
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![c; domain.node_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidInput("grid functions live on different grids".into()));
        }
        Ok(Self {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self
            .zip_with(other, |a, b| (a - b).abs())?
            .values
            .into_iter()
            .fold(0.0, f64::max))
    }

    /// Multilinear interpolation, clamped to the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = &self.domain;
        let counts = d.counts();
        let n = counts.len();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let s = ((x[k] - d.lo[k]) / d.h).clamp(0.0, (counts[k] - 1) as f64);
            let i = (s.floor() as usize).min(counts[k].saturating_sub(2));
            base[k] = i;
            frac[k] = if counts[k] > 1 { s - i as f64 } else { 0.0 };
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; n];
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            for k in 0..n {
                let bit = (corner >> k) & 1;
                if counts[k] == 1 && bit == 1 {
                    w = 0.0;
                    break;
                }
                idx[k] = base[k] + bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.values[d.linear_index(&idx)];
            }
        }
        acc
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_writer(w);
        let d = &self.domain;
        let mut row = vec!["dims".to_string()];
        row.extend(d.counts().iter().map(|c| c.to_string()));
        wr.write_record(&row)?;
        for (label, v) in [("lo", &d.lo), ("hi", &d.hi)] {
            let mut row = vec![label.to_string()];
            row.extend(v.iter().map(|x| fmt_value(*x)));
            wr.write_record(&row)?;
        }
        wr.write_record(["h".to_string(), fmt_value(d.h)])?;
        for v in &self.values {
            wr.write_record([fmt_value(*v)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_reader(r);
        let mut records = rd.records();
        let mut header = |label: &str| -> Result<Vec<String>> {
            let rec = records
                .next()
                .ok_or_else(|| Error::InvalidInput(format!("missing `{label}` header")))??;
            if rec.get(0).map(str::trim) != Some(label) {
                return Err(Error::InvalidInput(format!("expected `{label}` header row")));
            }
            Ok(rec.iter().skip(1).map(|s| s.trim().to_string()).collect())
        };
        let dims: Vec<usize> = header("dims")?
            .iter()
            .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("bad dimension `{s}`"))))
            .collect::<Result<_>>()?;
        let lo = parse_row(&header("lo")?)?;
        let hi = parse_row(&header("hi")?)?;
        let h = parse_row(&header("h")?)?;
        if h.len() != 1 {
            return Err(Error::InvalidInput("`h` header needs exactly one value".into()));
        }
        let mut values = Vec::new();
        for rec in records {
            let rec = rec?;
            for field in rec.iter() {
                values.push(parse_value(field.trim())?);
            }
        }
        let domain = Domain::new(lo, hi, h[0])?;
        if domain.counts() != dims {
            return Err(Error::InvalidInput(format!(
                "declared dims {dims:?} disagree with box counts {:?}",
                domain.counts()
            )));
        }
        Self::new(domain, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_value(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("bad grid value `{s}`")))
}

fn parse_row(fields: &[String]) -> Result<Vec<f64>> {
    fields.iter().map(|s| parse_value(s)).collect()
}
