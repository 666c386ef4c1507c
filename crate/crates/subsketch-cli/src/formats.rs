//! File formats: the row-stream input format (binary with magic "LPSS1", or
//! plain CSV auto-detected by the missing magic) and the versioned sketch
//! container (magic "LPSK1").
//!
//! All numbers are little-endian; floats are stored as raw f64 bits, so a
//! save/load round trip reproduces bit-identical estimates.

use std::fs;
use std::path::Path;
use subsketch::coreset::{CoresetSketch, SketchMode};
use subsketch::rounding::RoundingTransform;
use subsketch::stream::region::{RegionRecord, RegionSketchConfig};
use subsketch::stream::{FourierSketch, RegionEnsemble, RegionSketch};
use subsketch::svm::{ClassSketch, SvmSketch};
use subsketch::tensor::SymTensor;
use subsketch::{Real, Result, SketchError, WeightedPointSet};

pub const STREAM_MAGIC: &[u8; 5] = b"LPSS1";
pub const SKETCH_MAGIC: &[u8; 5] = b"LPSK1";
pub const SKETCH_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// byte-level helpers

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SketchError::invalid("truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn i8(&mut self) -> Result<i8> {
        Ok(self.take(1)?[0] as i8)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<Real> {
        Ok(Real::from_bits(u64::from_le_bytes(self.take(8)?.try_into().unwrap())))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<Real>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| Real::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn i8(&mut self, v: i8) {
        self.buf.push(v as u8);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: Real) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn f64s(&mut self, vs: &[Real]) {
        for &v in vs {
            self.f64(v);
        }
    }

    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

// ---------------------------------------------------------------------------
// stream input

#[derive(Debug, Clone)]
pub struct StreamData {
    pub dim: usize,
    /// (numerator, denominator) from a binary header, when present.
    pub p_header: Option<(u32, u32)>,
    pub rows: Vec<Real>,
    pub weights: Option<Vec<Real>>,
    pub labels: Option<Vec<i8>>,
    pub declared_count: u64,
}

impl StreamData {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.rows.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> Real {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn to_point_set(&self, p: Real) -> Result<WeightedPointSet> {
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.len()]);
        WeightedPointSet::new(self.dim, p, self.rows.clone(), weights)
    }
}

/// Read a row stream: binary when the magic matches, CSV otherwise. For CSV
/// the caller states the column layout via `csv_weighted` / `csv_labeled`
/// (trailing weight column, then trailing label column).
pub fn read_stream(path: &Path, csv_weighted: bool, csv_labeled: bool) -> Result<StreamData> {
    let raw = fs::read(path)
        .map_err(|e| SketchError::invalid(format!("cannot read {}: {e}", path.display())))?;
    if raw.len() >= 5 && &raw[..5] == STREAM_MAGIC {
        return read_binary_stream(&raw);
    }
    let text = String::from_utf8(raw)
        .map_err(|_| SketchError::invalid("input is neither LPSS1 binary nor UTF-8 CSV"))?;
    read_csv_stream(&text, csv_weighted, csv_labeled)
}

fn read_binary_stream(raw: &[u8]) -> Result<StreamData> {
    let mut c = Cursor::new(raw);
    c.take(5)?;
    let dim = c.u32()? as usize;
    let p_num = c.u32()?;
    let p_den = c.u32()?;
    let count = c.u64()?;
    let flags = c.u8()?;
    let has_weights = flags & 1 != 0;
    let has_labels = flags & 2 != 0;
    if dim == 0 || p_den == 0 {
        return Err(SketchError::invalid("malformed header"));
    }
    let row_bytes = 8 * dim + if has_weights { 8 } else { 0 } + if has_labels { 1 } else { 0 };
    let mut rows = Vec::new();
    let mut weights = if has_weights { Some(Vec::new()) } else { None };
    let mut labels = if has_labels { Some(Vec::new()) } else { None };
    let mut seen = 0u64;
    while c.remaining() >= row_bytes && (count == 0 || seen < count) {
        rows.extend(c.f64s(dim)?);
        if let Some(w) = weights.as_mut() {
            w.push(c.f64()?);
        }
        if let Some(l) = labels.as_mut() {
            l.push(c.i8()?);
        }
        seen += 1;
    }
    if count != 0 && seen != count {
        return Err(SketchError::invalid(format!(
            "header declares {count} rows, payload holds {seen}"
        )));
    }
    if c.remaining() != 0 {
        return Err(SketchError::invalid("trailing bytes after payload"));
    }
    Ok(StreamData {
        dim,
        p_header: Some((p_num, p_den)),
        rows,
        weights,
        labels,
        declared_count: count,
    })
}

fn read_csv_stream(text: &str, weighted: bool, labeled: bool) -> Result<StreamData> {
    let mut rows = Vec::new();
    let mut weights = if weighted { Some(Vec::new()) } else { None };
    let mut labels = if labeled { Some(Vec::new()) } else { None };
    let mut dim = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<Real> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<Real>().map_err(|_| {
                    SketchError::invalid(format!("line {}: bad number '{t}'", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        let extra = usize::from(weighted) + usize::from(labeled);
        if vals.len() <= extra {
            return Err(SketchError::invalid(format!("line {}: too few columns", lineno + 1)));
        }
        let d = vals.len() - extra;
        if dim == 0 {
            dim = d;
        } else if d != dim {
            return Err(SketchError::invalid(format!(
                "line {}: {d} coordinates, expected {dim}",
                lineno + 1
            )));
        }
        rows.extend_from_slice(&vals[..d]);
        let mut at = d;
        if let Some(w) = weights.as_mut() {
            w.push(vals[at]);
            at += 1;
        }
        if let Some(l) = labels.as_mut() {
            let lv = vals[at];
            if (lv - 1.0).abs() < 1e-9 {
                l.push(1);
            } else if (lv + 1.0).abs() < 1e-9 {
                l.push(-1);
            } else {
                return Err(SketchError::invalid(format!(
                    "line {}: label must be +1 or -1",
                    lineno + 1
                )));
            }
        }
    }
    if dim == 0 {
        return Err(SketchError::invalid("empty input"));
    }
    Ok(StreamData { dim, p_header: None, rows, weights, labels, declared_count: 0 })
}

/// Write the binary stream format (used by tests and tooling).
pub fn write_stream(
    path: &Path,
    dim: usize,
    p: (u32, u32),
    rows: &[Real],
    weights: Option<&[Real]>,
    labels: Option<&[i8]>,
) -> Result<()> {
    let n = rows.len() / dim;
    let mut w = Writer::new();
    w.bytes(STREAM_MAGIC);
    w.u32(dim as u32);
    w.u32(p.0);
    w.u32(p.1);
    w.u64(n as u64);
    let mut flags = 0u8;
    if weights.is_some() {
        flags |= 1;
    }
    if labels.is_some() {
        flags |= 2;
    }
    w.u8(flags);
    for i in 0..n {
        w.f64s(&rows[i * dim..(i + 1) * dim]);
        if let Some(ws) = weights {
            w.f64(ws[i]);
        }
        if let Some(ls) = labels {
            w.i8(ls[i]);
        }
    }
    fs::write(path, &w.buf)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// sketch container

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchKind {
    Coreset = 1,
    Region = 2,
    Fourier = 3,
    Svm = 4,
}

#[derive(Debug)]
pub enum LoadedSketch {
    Coreset { sketch: CoresetSketch, affine: bool },
    Region { ensemble: RegionEnsemble },
    Fourier { sketch: FourierSketch },
    Svm { sketch: SvmSketch },
}

#[derive(Debug, Clone)]
pub struct SketchHeader {
    pub dim: usize,
    pub p: (u32, u32),
    pub eps: Real,
    pub seed: u64,
}

pub fn save_coreset(
    path: &Path,
    header: &SketchHeader,
    sketch: &CoresetSketch,
    affine: bool,
) -> Result<()> {
    let mut w = Writer::new();
    write_common(&mut w, SketchKind::Coreset, header);
    w.u8(match sketch.mode {
        SketchMode::Additive => 0,
        SketchMode::Multiplicative => 1,
    });
    w.u8(affine as u8);
    w.u64(sketch.rounds as u64);
    let base = &sketch.base;
    w.u64(base.len() as u64);
    w.f64s(base.rows_flat());
    w.f64s(base.weights());
    match &sketch.transform {
        None => w.u8(0),
        Some(t) => {
            w.u8(1);
            w.f64s(t.matrix.as_slice());
            w.f64s(t.inverse.as_slice());
            w.f64(t.distortion);
            w.u8(t.certified as u8);
            w.u32(t.rank as u32);
            w.u8(t.rank_deficient as u8);
        }
    }
    w.u32(sketch.flags.len() as u32);
    for f in &sketch.flags {
        let b = f.as_bytes();
        w.u32(b.len() as u32);
        w.bytes(b);
    }
    fs::write(path, &w.buf)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn save_region(path: &Path, header: &SketchHeader, ens: &RegionEnsemble) -> Result<()> {
    let mut w = Writer::new();
    write_common(&mut w, SketchKind::Region, header);
    w.u32(ens.replicas.len() as u32);
    for r in &ens.replicas {
        let cfg = &r.config;
        w.u64(cfg.seed);
        w.u8(cfg.tight as u8);
        w.u64(cfg.n_hint);
        w.f64(r.eta());
        w.u64(r.n_seen());
        w.u64(r.n_est());
        w.u64(r.ignored_zero_rows());
        let centers = r.net_centers();
        w.u64((centers.len() / cfg.dim) as u64);
        w.f64s(centers);
        w.u64(r.records().len() as u64);
        for rec in r.records() {
            w.f64s(&rec.center);
            w.f64(rec.radius);
            w.u64(rec.count);
            w.u32(rec.generation);
            w.u32(rec.level);
            w.u8(rec.frozen as u8);
            w.u32(rec.children.len() as u32);
            for &c in &rec.children {
                w.u32(c as u32);
            }
            w.u32(rec.tensor.coeffs.len() as u32);
            w.f64s(&rec.tensor.coeffs);
            match &rec.reservoir {
                None => w.u8(0),
                Some(z) => {
                    w.u8(1);
                    w.f64s(z);
                }
            }
        }
    }
    fs::write(path, &w.buf)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn save_fourier(path: &Path, header: &SketchHeader, s: &FourierSketch) -> Result<()> {
    let mut w = Writer::new();
    write_common(&mut w, SketchKind::Fourier, header);
    w.u32(s.k_max as u32);
    w.f64s(s.lambda());
    let (c, sn) = s.moments();
    w.f64s(c);
    w.f64s(sn);
    w.f64(s.total_weight());
    fs::write(path, &w.buf)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn save_svm(path: &Path, header: &SketchHeader, s: &SvmSketch) -> Result<()> {
    let mut w = Writer::new();
    write_common(&mut w, SketchKind::Svm, header);
    w.f64(s.lambda);
    w.u64(s.n_total);
    w.u64(s.presample_size as u64);
    for class in [&s.pos, &s.neg] {
        match class {
            None => w.u8(0),
            Some(c) => {
                w.u8(1);
                w.u64(c.n_class);
                w.u64(c.rows.len() as u64);
                w.f64s(c.rows.rows_flat());
                w.f64s(c.rows.weights());
            }
        }
    }
    fs::write(path, &w.buf)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", path.display())))
}

fn write_common(w: &mut Writer, kind: SketchKind, header: &SketchHeader) {
    w.bytes(SKETCH_MAGIC);
    w.u32(SKETCH_VERSION);
    w.u8(kind as u8);
    w.u32(header.dim as u32);
    w.u32(header.p.0);
    w.u32(header.p.1);
    w.f64(header.eps);
    w.u64(header.seed);
}

pub fn load_sketch(path: &Path) -> Result<(SketchHeader, LoadedSketch)> {
    let raw = fs::read(path)
        .map_err(|e| SketchError::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut c = Cursor::new(&raw);
    let magic = c.take(5)?;
    if magic != SKETCH_MAGIC {
        return Err(SketchError::invalid("not a sketch file (bad magic)"));
    }
    let version = c.u32()?;
    if version != SKETCH_VERSION {
        return Err(SketchError::invalid(format!("unsupported sketch version {version}")));
    }
    let kind = c.u8()?;
    let dim = c.u32()? as usize;
    let p = (c.u32()?, c.u32()?);
    let eps = c.f64()?;
    let seed = c.u64()?;
    if dim == 0 || p.1 == 0 {
        return Err(SketchError::invalid("malformed sketch header"));
    }
    let header = SketchHeader { dim, p, eps, seed };
    let p_value = p.0 as Real / p.1 as Real;
    let loaded = match kind {
        1 => {
            let mode = match c.u8()? {
                0 => SketchMode::Additive,
                1 => SketchMode::Multiplicative,
                m => return Err(SketchError::invalid(format!("bad sketch mode {m}"))),
            };
            let affine = c.u8()? != 0;
            let rounds = c.u64()? as usize;
            let n = c.u64()? as usize;
            let rows = c.f64s(n * dim)?;
            let weights = c.f64s(n)?;
            let base = WeightedPointSet::new(dim, p_value, rows, weights)?;
            let transform = if c.u8()? != 0 {
                let m = c.f64s(dim * dim)?;
                let inv = c.f64s(dim * dim)?;
                let distortion = c.f64()?;
                let certified = c.u8()? != 0;
                let rank = c.u32()? as usize;
                let rank_deficient = c.u8()? != 0;
                Some(RoundingTransform {
                    matrix: nalgebra_from_slice(dim, &m),
                    inverse: nalgebra_from_slice(dim, &inv),
                    distortion,
                    certified,
                    rank,
                    rank_deficient,
                })
            } else {
                None
            };
            let nflags = c.u32()? as usize;
            let mut flags = Vec::with_capacity(nflags);
            for _ in 0..nflags {
                let len = c.u32()? as usize;
                let b = c.take(len)?;
                flags.push(String::from_utf8_lossy(b).into_owned());
            }
            LoadedSketch::Coreset {
                sketch: CoresetSketch { base, eps, mode, transform, rounds, flags },
                affine,
            }
        }
        2 => {
            let nrep = c.u32()? as usize;
            let mut replicas = Vec::with_capacity(nrep);
            for _ in 0..nrep {
                let rseed = c.u64()?;
                let tight = c.u8()? != 0;
                let n_hint = c.u64()?;
                let eta = c.f64()?;
                let n_seen = c.u64()?;
                let n_est = c.u64()?;
                let ignored = c.u64()?;
                let ncenters = c.u64()? as usize;
                let centers = c.f64s(ncenters * dim)?;
                let nrec = c.u64()? as usize;
                let mut records = Vec::with_capacity(nrec);
                for _ in 0..nrec {
                    let center = c.f64s(dim)?;
                    let radius = c.f64()?;
                    let count = c.u64()?;
                    let generation = c.u32()?;
                    let level = c.u32()?;
                    let frozen = c.u8()? != 0;
                    let nch = c.u32()? as usize;
                    let mut children = Vec::with_capacity(nch);
                    for _ in 0..nch {
                        children.push(c.u32()? as usize);
                    }
                    let ncoef = c.u32()? as usize;
                    let coeffs = c.f64s(ncoef)?;
                    let reservoir = if c.u8()? != 0 { Some(c.f64s(dim)?) } else { None };
                    records.push(RegionRecord {
                        center,
                        radius,
                        tensor: SymTensor { d: dim, p: p.0, coeffs },
                        count,
                        reservoir,
                        generation,
                        level,
                        children,
                        frozen,
                    });
                }
                let mut cfg = RegionSketchConfig::new(dim, p.0, eps, rseed);
                cfg.tight = tight;
                cfg.n_hint = n_hint;
                replicas.push(RegionSketch::from_parts(
                    cfg, eta, centers, records, n_seen, n_est, ignored,
                )?);
            }
            LoadedSketch::Region { ensemble: RegionEnsemble { replicas } }
        }
        3 => {
            let k_max = c.u32()? as usize;
            let lambda = c.f64s(k_max + 1)?;
            let cos_m = c.f64s(k_max + 1)?;
            let sin_m = c.f64s(k_max + 1)?;
            let total = c.f64()?;
            LoadedSketch::Fourier {
                sketch: FourierSketch::from_parts(p_value, k_max, lambda, cos_m, sin_m, total)?,
            }
        }
        4 => {
            let lambda = c.f64()?;
            let n_total = c.u64()?;
            let presample = c.u64()? as usize;
            let mut classes = Vec::with_capacity(2);
            for _ in 0..2 {
                if c.u8()? != 0 {
                    let n_class = c.u64()?;
                    let m = c.u64()? as usize;
                    let rows = c.f64s(m * (dim + 1))?;
                    let weights = c.f64s(m)?;
                    classes.push(Some(ClassSketch {
                        rows: WeightedPointSet::new(dim + 1, 1.0, rows, weights)?,
                        n_class,
                    }));
                } else {
                    classes.push(None);
                }
            }
            let neg = classes.pop().unwrap();
            let pos = classes.pop().unwrap();
            LoadedSketch::Svm {
                sketch: SvmSketch {
                    dim,
                    lambda,
                    eps,
                    n_total,
                    pos,
                    neg,
                    presample_size: presample,
                },
            }
        }
        k => return Err(SketchError::invalid(format!("unknown sketch kind {k}"))),
    };
    if c.remaining() != 0 {
        return Err(SketchError::invalid("trailing bytes in sketch file"));
    }
    Ok((header, loaded))
}

fn nalgebra_from_slice(d: usize, v: &[Real]) -> nalgebra::DMatrix<Real> {
    nalgebra::DMatrix::from_column_slice(d, d, v)
}
