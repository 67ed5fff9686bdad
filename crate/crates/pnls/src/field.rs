//! Complex-valued state on a product grid, in physical or spectral
//! representation, plus the sampled-trajectory container and binary
//! checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, ProductGrid, TorusSpectrum};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PNLS";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Representation {
    Physical,
    Spectral,
}

/// State u(t, x, y). The representation tag tracks the last transform
/// applied; `data` is row-major with torus axes outermost.
#[derive(Clone)]
pub struct Field {
    grid: Arc<ProductGrid>,
    data: Vec<Complex64>,
    rep: Representation,
    time_tag: f64,
}

impl Field {
    pub fn zero(grid: Arc<ProductGrid>) -> Self {
        let len = grid.len();
        Self { grid, data: vec![Complex64::default(); len], rep: Representation::Physical, time_tag: 0.0 }
    }

    /// Build a physical field from a pointwise map (ys, xs) -> value.
    pub fn from_physical_fn(
        grid: Arc<ProductGrid>,
        f: impl Fn(&[f64], &[f64]) -> Complex64,
    ) -> Self {
        let data = (0..grid.len())
            .map(|flat| {
                let (ys, xs) = grid.coords(flat);
                f(&ys, &xs)
            })
            .collect();
        Self { grid, data, rep: Representation::Physical, time_tag: 0.0 }
    }

    /// An exact single spectral mode: amplitude on box modes `xm`, torus
    /// modes `ym`, zero elsewhere.
    pub fn plane_wave(
        grid: Arc<ProductGrid>,
        amplitude: Complex64,
        ym: &[i64],
        xm: &[i64],
    ) -> Result<Self> {
        let idx = grid.mode_index(ym, xm)?;
        let mut data = vec![Complex64::default(); grid.len()];
        data[idx] = amplitude;
        Ok(Self { grid, data, rep: Representation::Spectral, time_tag: 0.0 })
    }

    pub fn from_parts(
        grid: Arc<ProductGrid>,
        data: Vec<Complex64>,
        rep: Representation,
        time_tag: f64,
    ) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::SizeMismatch { got: data.len(), want: grid.len() });
        }
        Ok(Self { grid, data, rep, time_tag })
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn time_tag(&self) -> f64 {
        self.time_tag
    }

    pub fn set_time_tag(&mut self, t: f64) {
        self.time_tag = t;
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn to_spectral(&mut self) -> Result<()> {
        if self.rep == Representation::Physical {
            self.grid.forward(&mut self.data)?;
            self.rep = Representation::Spectral;
        }
        Ok(())
    }

    pub fn to_physical(&mut self) -> Result<()> {
        if self.rep == Representation::Spectral {
            self.grid.inverse(&mut self.data)?;
            self.rep = Representation::Physical;
        }
        Ok(())
    }

    /// A copy in the requested representation (no copy if already there is
    /// still a clone; fields are value-semantic).
    pub fn in_representation(&self, rep: Representation) -> Result<Field> {
        let mut out = self.clone();
        match rep {
            Representation::Physical => out.to_physical()?,
            Representation::Spectral => out.to_spectral()?,
        }
        Ok(out)
    }

    /// Mode amplitudes per x-node: physical in x, modal in y. Used by the
    /// transverse-norm machinery.
    pub(crate) fn x_physical_y_modal(&self) -> Result<Vec<Complex64>> {
        let mut data = self.data.clone();
        match self.rep {
            Representation::Physical => self.grid.forward_y(&mut data)?,
            Representation::Spectral => self.grid.inverse_x(&mut data)?,
        }
        Ok(data)
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// self += c * other. Both fields must share grid and representation.
    pub fn axpy(&mut self, c: Complex64, other: &Field) {
        assert!(self.same_grid(other), "axpy across grids");
        assert_eq!(self.rep, other.rep, "axpy across representations");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * *b;
        }
    }

    /// self - other as a new field, converting representations as needed.
    pub fn difference(&self, other: &Field) -> Field {
        let mut out = self.clone();
        if other.rep == out.rep {
            out.axpy(Complex64::new(-1.0, 0.0), other);
        } else {
            let converted = other
                .in_representation(out.rep)
                .expect("difference: transform failed");
            out.axpy(Complex64::new(-1.0, 0.0), &converted);
        }
        out
    }
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("rep", &self.rep)
            .field("time_tag", &self.time_tag)
            .field("len", &self.data.len())
            .finish()
    }
}

/// Uniformly sampled trajectory; all samples share one grid and strictly
/// increasing time tags.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    samples: Vec<Field>,
}

impl TimeSeries {
    pub fn new(samples: Vec<Field>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::WindowTooShort(samples.len()));
        }
        let dt = samples[1].time_tag() - samples[0].time_tag();
        if !(dt > 0.0) {
            return Err(Error::NonUniformSamples);
        }
        for w in samples.windows(2) {
            if !w[0].same_grid(&w[1]) {
                return Err(Error::GridMismatch);
            }
            let step = w[1].time_tag() - w[0].time_tag();
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::NonUniformSamples);
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, j: usize) -> &Field {
        &self.samples[j]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Field> {
        self.samples.iter()
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        self.samples[0].grid()
    }

    pub fn sample_spacing(&self) -> f64 {
        self.samples[1].time_tag() - self.samples[0].time_tag()
    }

    pub fn window(&self) -> (f64, f64) {
        (
            self.samples[0].time_tag(),
            self.samples[self.samples.len() - 1].time_tag(),
        )
    }

    pub fn time(&self, j: usize) -> f64 {
        self.samples[j].time_tag()
    }

    /// Index of the sample nearest to `t`, if it lies within half a
    /// spacing (half-spacing ties resolve by rounding).
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let (t0, t1) = self.window();
        let dt = self.sample_spacing();
        let j = ((t - t0) / dt).round();
        let tolerance = dt * (0.5 + 1e-9);
        if j < 0.0 || j as usize >= self.samples.len() || (t0 + j * dt - t).abs() > tolerance {
            return Err(Error::WindowOutsideRun { t1: t, t2: t1 });
        }
        Ok(j as usize)
    }

    /// Restrict to the sub-window [t1, t2] (sample-aligned).
    pub fn slice(&self, t1: f64, t2: f64) -> Result<TimeSeries> {
        let i = self.index_at(t1)?;
        let j = self.index_at(t2)?;
        if j <= i {
            return Err(Error::WindowOutsideRun { t1, t2 });
        }
        TimeSeries::new(self.samples[i..=j].to_vec())
    }

    /// Apply a map to every sample, keeping time tags.
    pub fn map(&self, f: impl FnMut(&Field) -> Result<Field>) -> Result<TimeSeries> {
        let mut f = f;
        let samples = self.samples.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        TimeSeries::new(samples)
    }
}

fn write_f64(w: &mut impl Write, x: f64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Write a field to disk. Canonical payload is the physical representation;
/// a spectral field is transformed on a copy first. Little-endian
/// throughout: magic, version u16, n/k/Nx/Ny u32, L f64, radii f64 x k,
/// time tag f64, then interleaved re/im f64 pairs in row-major order with
/// the box block fastest.
pub fn save_checkpoint(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let phys = field.in_representation(Representation::Physical)?;
    let grid = phys.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for v in [
        grid.box_grid.n as u32,
        grid.torus.k as u32,
        grid.box_grid.points_per_axis as u32,
        grid.torus.modes_per_axis as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_f64(&mut w, grid.box_grid.half_length)?;
    for &rho in &grid.torus.radii {
        write_f64(&mut w, rho)?;
    }
    write_f64(&mut w, phys.time_tag())?;
    for c in phys.data() {
        write_f64(&mut w, c.re)?;
        write_f64(&mut w, c.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a field written by `save_checkpoint`. The grid is rebuilt from the
/// header (the declared spectral band is not persisted and comes back as
/// zero).
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::CorruptCheckpoint)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint);
    }
    let mut vb = [0u8; 2];
    r.read_exact(&mut vb).map_err(|_| Error::CorruptCheckpoint)?;
    let version = u16::from_le_bytes(vb);
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version, CHECKPOINT_VERSION));
    }
    let n = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    let nx = read_u32(&mut r)? as usize;
    let ny = read_u32(&mut r)? as usize;
    let half_length = read_f64(&mut r)?;
    let mut radii = Vec::with_capacity(k);
    for _ in 0..k {
        radii.push(read_f64(&mut r)?);
    }
    let time_tag = read_f64(&mut r)?;
    let grid = ProductGrid::new(
        BoxGrid { n, half_length, points_per_axis: nx, band: 0.0 },
        TorusSpectrum::new(k, radii, ny)?,
    )?;
    let len = grid.len();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(&mut r).map_err(|_| {
            Error::CheckpointDimensionMismatch(format!(
                "payload shorter than the {len} points the header declares"
            ))
        })?;
        let im = read_f64(&mut r).map_err(|_| {
            Error::CheckpointDimensionMismatch(format!(
                "payload shorter than the {len} points the header declares"
            ))
        })?;
        data.push(Complex64::new(re, im));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CheckpointDimensionMismatch(
            "payload longer than the header declares".into(),
        ));
    }
    let mut field = Field::from_parts(grid, data, Representation::Physical, 0.0)?;
    field.set_time_tag(time_tag);
    Ok(field)
}
