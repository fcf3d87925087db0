//! Mixed-observation data model: continuous features, binary features, and a
//! group label, with the binary pattern folded into a multinomial cell index.
//!
//! Cell encoding follows `U = 1 + Σ_j y_j 2^(j-1)`, a bijection from the
//! `2^d` binary patterns onto `{1, ..., M}`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// 1-based index of a binary-pattern cell, in `{1, ..., 2^d}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex(pub usize);

impl CellIndex {
    /// 0-based position for array indexing.
    pub fn pos(self) -> usize {
        self.0 - 1
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Encodes a binary vector into its cell index.
pub fn encode_cell(y: &[u8]) -> Result<CellIndex> {
    let mut m = 1usize;
    for (j, &bit) in y.iter().enumerate() {
        match bit {
            0 => {}
            1 => m += 1 << j,
            other => {
                return Err(Error::validation(format!(
                    "binary entry y{} must be 0 or 1, got {other}",
                    j + 1
                )))
            }
        }
    }
    Ok(CellIndex(m))
}

/// Decodes a cell index back into the binary vector of length `d`.
pub fn decode_cell(m: CellIndex, d: usize) -> Result<Vec<u8>> {
    let cells = 1usize << d;
    if m.0 < 1 || m.0 > cells {
        return Err(Error::validation(format!(
            "cell index {} out of range 1..={cells} for d={d}",
            m.0
        )));
    }
    let bits = m.0 - 1;
    Ok((0..d).map(|j| ((bits >> j) & 1) as u8).collect())
}

/// One record: continuous vector, binary vector, group label in `{1..q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedObservation<T> {
    pub x: Vec<T>,
    pub y: Vec<u8>,
    pub z: usize,
}

impl<T: Real> MixedObservation<T> {
    pub fn cell(&self) -> CellIndex {
        encode_cell(&self.y).expect("validated at construction")
    }
}

/// Validated immutable sample of mixed observations.
///
/// All observations share the same continuous dimension `p` and binary
/// dimension `d`; group labels are 1-based consecutive integers up to the
/// declared `q`. Safe to share across threads once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    observations: Vec<MixedObservation<T>>,
    p: usize,
    d: usize,
    q: usize,
}

impl<T: Real> Dataset<T> {
    pub fn new(observations: Vec<MixedObservation<T>>, p: usize, d: usize, q: usize) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::validation("no observations"));
        }
        if p == 0 {
            return Err(Error::validation("p must be at least 1"));
        }
        if d == 0 {
            return Err(Error::validation("d must be at least 1"));
        }
        if q == 0 {
            return Err(Error::validation("q must be at least 1"));
        }
        for (i, obs) in observations.iter().enumerate() {
            let row = i + 1;
            if obs.x.len() != p {
                return Err(Error::validation_at(row, format!("expected {p} continuous values, got {}", obs.x.len())));
            }
            if obs.y.len() != d {
                return Err(Error::validation_at(row, format!("expected {d} binary values, got {}", obs.y.len())));
            }
            if let Some(j) = obs.x.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation_at(row, format!("non-finite value in x{}", j + 1)));
            }
            if let Some(j) = obs.y.iter().position(|&b| b > 1) {
                return Err(Error::validation_at(row, format!("binary entry y{} must be 0 or 1, got {}", j + 1, obs.y[j])));
            }
            if obs.z < 1 || obs.z > q {
                return Err(Error::validation_at(row, format!("group label {} outside 1..={q}", obs.z)));
            }
        }
        Ok(Dataset { observations, p, d, q })
    }

    pub fn observations(&self) -> &[MixedObservation<T>] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of cells `M = 2^d`.
    pub fn cells(&self) -> usize {
        1 << self.d
    }

    /// Count of observations per (group, cell), `q × M`.
    pub fn group_cell_counts(&self) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0usize; self.cells()]; self.q];
        for obs in &self.observations {
            counts[obs.z - 1][obs.cell().pos()] += 1;
        }
        counts
    }

    /// Count of observations per group.
    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.q];
        for obs in &self.observations {
            counts[obs.z - 1] += 1;
        }
        counts
    }

    /// New dataset with observation `index` (0-based) removed.
    /// Used by leave-one-out loops.
    pub fn without(&self, index: usize) -> Result<Self> {
        let mut obs = Vec::with_capacity(self.observations.len() - 1);
        obs.extend_from_slice(&self.observations[..index]);
        obs.extend_from_slice(&self.observations[index + 1..]);
        Dataset::new(obs, self.p, self.d, self.q)
    }
}

/// Declared shape of a CSV file: `x1,...,xp,y1,...,yd,z` with a header row.
#[derive(Clone, Copy, Debug)]
pub struct CsvSchema {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

/// Loads a dataset from CSV. Row numbers in errors are 1-based data rows
/// (the header is row 0). Row order is preserved.
pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: CsvSchema) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let expected = schema.p + schema.d + 1;
    if headers.len() != expected {
        return Err(Error::validation(format!(
            "expected {expected} columns (x1..x{}, y1..y{}, z), found {}",
            schema.p,
            schema.d,
            headers.len()
        )));
    }
    for j in 0..schema.p {
        let want = format!("x{}", j + 1);
        if headers[j] != want {
            return Err(Error::validation(format!("missing column {want}: header has '{}'", &headers[j])));
        }
    }
    for j in 0..schema.d {
        let want = format!("y{}", j + 1);
        if headers[schema.p + j] != want {
            return Err(Error::validation(format!("missing column {want}: header has '{}'", &headers[schema.p + j])));
        }
    }
    if &headers[expected - 1] != "z" {
        return Err(Error::validation(format!("missing column z: header has '{}'", &headers[expected - 1])));
    }

    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != expected {
            return Err(Error::validation_at(row, format!("expected {expected} fields, got {}", record.len())));
        }
        let mut x = Vec::with_capacity(schema.p);
        for j in 0..schema.p {
            let field = &record[j];
            if field.is_empty() {
                return Err(Error::validation_at(row, format!("missing value in x{}", j + 1)));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::validation_at(row, format!("non-numeric value '{field}' in x{}", j + 1)))?;
            x.push(T::of(v));
        }
        let mut y = Vec::with_capacity(schema.d);
        for j in 0..schema.d {
            let field = &record[schema.p + j];
            match field {
                "0" => y.push(0),
                "1" => y.push(1),
                other => {
                    return Err(Error::validation_at(row, format!("non-binary value '{other}' in y{}", j + 1)))
                }
            }
        }
        let zfield = &record[expected - 1];
        let z: usize = zfield
            .parse()
            .map_err(|_| Error::validation_at(row, format!("non-integer group label '{zfield}'")))?;
        if z < 1 || z > schema.q {
            return Err(Error::validation_at(row, format!("unknown group label {z}, expected 1..={}", schema.q)));
        }
        observations.push(MixedObservation { x, y, z });
    }
    Dataset::new(observations, schema.p, schema.d, schema.q)
}

/// Writes a dataset back to CSV in the canonical schema. Floats are printed
/// with shortest round-trip formatting, so load → write → load is lossless.
pub fn write_csv<T: Real>(ds: &Dataset<T>, mut out: impl Write) -> Result<()> {
    let mut header = Vec::new();
    for j in 1..=ds.p() {
        header.push(format!("x{j}"));
    }
    for j in 1..=ds.d() {
        header.push(format!("y{j}"));
    }
    header.push("z".to_string());
    writeln!(out, "{}", header.join(","))?;
    for obs in ds.observations() {
        let mut fields: Vec<String> = obs.x.iter().map(|v| format!("{v}")).collect();
        fields.extend(obs.y.iter().map(|b| b.to_string()));
        fields.push(obs.z.to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
