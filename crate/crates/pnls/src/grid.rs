//! Discretization of the product domain: a truncated periodic box for the
//! dispersive directions and a rectangular flat torus for the compact ones.
//!
//! Layout convention: data is row-major with the torus axes outermost and
//! the box axes innermost, so the box block varies fastest. Wavenumber
//! lattices are symmetric about zero with the Nyquist mode assigned to the
//! negative side; fractional multipliers depend on that convention, so it
//! is fixed here once.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Truncated periodic box standing in for the Euclidean factor: domain
/// [-L, L)^n with a uniform lattice.
#[derive(Clone, Debug)]
pub struct BoxGrid {
    /// Euclidean dimension n.
    pub n: usize,
    /// Half box length L; the box has side 2L.
    pub half_length: f64,
    /// Lattice points per axis, a power of two.
    pub points_per_axis: usize,
    /// Spectral band |xi| <= band the data is declared to occupy; zero
    /// means unknown (no recurrence guard).
    pub band: f64,
}

impl BoxGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points_per_axis as f64
    }

    pub fn coord(&self, idx: usize) -> f64 {
        -self.half_length + idx as f64 * self.spacing()
    }

    /// Signed integer mode for a storage index; Nyquist goes negative.
    pub fn mode(&self, idx: usize) -> i64 {
        signed_mode(idx, self.points_per_axis)
    }

    /// Wavenumber xi = pi m / L on axis position `idx`.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.mode(idx) as f64 * PI / self.half_length
    }

    pub fn max_wavenumber(&self) -> f64 {
        (self.points_per_axis as f64 / 2.0) * PI / self.half_length
    }
}

/// Rectangular flat torus: per-axis radii rho_j, circumference 2 pi rho_j,
/// Laplacian eigenvalues nu_m = sum_j (m_j / rho_j)^2.
#[derive(Clone, Debug)]
pub struct TorusSpectrum {
    /// Compact dimension k.
    pub k: usize,
    /// Radius per axis.
    pub radii: Vec<f64>,
    /// Lattice points (= retained modes) per axis, even.
    pub modes_per_axis: usize,
}

impl TorusSpectrum {
    pub fn new(k: usize, radii: Vec<f64>, modes_per_axis: usize) -> Result<Self> {
        if radii.len() != k {
            return Err(Error::RadiiCount { k, given: radii.len() });
        }
        if modes_per_axis == 0 || !modes_per_axis.is_multiple_of(2) {
            return Err(Error::OddModes(modes_per_axis));
        }
        for &rho in &radii {
            if !(rho > 0.0) {
                return Err(Error::NonPositive { what: "torus radius", value: rho });
            }
        }
        Ok(Self { k, radii, modes_per_axis })
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * PI * self.radii[axis] / self.modes_per_axis as f64
    }

    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        idx as f64 * self.spacing(axis)
    }

    pub fn mode(&self, idx: usize) -> i64 {
        signed_mode(idx, self.modes_per_axis)
    }

    /// Eigenvalue of -Laplacian for the signed multi-index m.
    pub fn eigenvalue(&self, m: &[i64]) -> Result<f64> {
        if m.len() != self.k {
            return Err(Error::RadiiCount { k: self.k, given: m.len() });
        }
        let half = self.modes_per_axis as i64 / 2;
        let mut nu = 0.0;
        for (axis, &mj) in m.iter().enumerate() {
            if mj.abs() > half {
                return Err(Error::ModeOutOfBand { axis, index: mj, half });
            }
            let ratio = mj as f64 / self.radii[axis];
            nu += ratio * ratio;
        }
        Ok(nu)
    }

    /// Geodesic diameter: half-period vector length.
    pub fn diameter(&self) -> f64 {
        self.radii.iter().map(|rho| (PI * rho).powi(2)).sum::<f64>().sqrt()
    }

    /// Transverse volume prod_j 2 pi rho_j.
    pub fn volume(&self) -> f64 {
        self.radii.iter().map(|rho| 2.0 * PI * rho).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.k).map(|a| self.spacing(a)).product()
    }

    pub fn points(&self) -> usize {
        self.modes_per_axis.pow(self.k as u32)
    }
}

fn signed_mode(idx: usize, len: usize) -> i64 {
    if idx < len / 2 {
        idx as i64
    } else {
        idx as i64 - len as i64
    }
}

struct Plans {
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

/// The full discretized product domain plus its transform plans. Immutable
/// after construction; transforms are reentrant.
pub struct ProductGrid {
    pub box_grid: BoxGrid,
    pub torus: TorusSpectrum,
    plans: Plans,
}

impl fmt::Debug for ProductGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProductGrid")
            .field("box_grid", &self.box_grid)
            .field("torus", &self.torus)
            .finish()
    }
}

impl ProductGrid {
    pub fn new(box_grid: BoxGrid, torus: TorusSpectrum) -> Result<Arc<Self>> {
        if !(box_grid.half_length > 0.0) {
            return Err(Error::NonPositive { what: "box half length", value: box_grid.half_length });
        }
        let nx = box_grid.points_per_axis;
        if nx == 0 || !nx.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(nx));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(torus.modes_per_axis),
            inv_y: planner.plan_fft_inverse(torus.modes_per_axis),
        };
        Ok(Arc::new(Self { box_grid, torus, plans }))
    }

    /// Axis lengths, torus axes first (outermost), box axes last.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.torus.modes_per_axis; self.torus.k];
        s.extend(std::iter::repeat_n(self.box_grid.points_per_axis, self.box_grid.n));
        s
    }

    pub fn len(&self) -> usize {
        self.torus.points() * self.box_grid.points_per_axis.pow(self.box_grid.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn box_points(&self) -> usize {
        self.box_grid.points_per_axis.pow(self.box_grid.n as u32)
    }

    /// Physical cell volume dx^n prod_j dy_j.
    pub fn cell_volume(&self) -> f64 {
        self.box_grid.spacing().powi(self.box_grid.n as i32) * self.torus.cell_volume()
    }

    /// Total domain volume (2L)^n prod_j 2 pi rho_j.
    pub fn total_volume(&self) -> f64 {
        (2.0 * self.box_grid.half_length).powi(self.box_grid.n as i32) * self.torus.volume()
    }

    /// |xi|^2 + nu_m at a flat spectral index.
    pub fn symbol(&self, flat: usize) -> f64 {
        let (nu, xi2) = self.split_symbol(flat);
        nu + xi2
    }

    /// (nu_m, |xi|^2) at a flat spectral index.
    pub fn split_symbol(&self, flat: usize) -> (f64, f64) {
        let mut rest = flat;
        let nx = self.box_grid.points_per_axis;
        let mut xi2 = 0.0;
        for _ in 0..self.box_grid.n {
            let idx = rest % nx;
            rest /= nx;
            let xi = self.box_grid.wavenumber(idx);
            xi2 += xi * xi;
        }
        let ny = self.torus.modes_per_axis;
        let mut nu = 0.0;
        for axis in (0..self.torus.k).rev() {
            let idx = rest % ny;
            rest /= ny;
            let m = self.torus.mode(idx) as f64 / self.torus.radii[axis];
            nu += m * m;
        }
        (nu, xi2)
    }

    /// Physical coordinates (y.., x..) at a flat index.
    pub fn coords(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rest = flat;
        let nx = self.box_grid.points_per_axis;
        let mut xs = vec![0.0; self.box_grid.n];
        for a in (0..self.box_grid.n).rev() {
            xs[a] = self.box_grid.coord(rest % nx);
            rest /= nx;
        }
        let ny = self.torus.modes_per_axis;
        let mut ys = vec![0.0; self.torus.k];
        for a in (0..self.torus.k).rev() {
            ys[a] = self.torus.coord(a, rest % ny);
            rest /= ny;
        }
        (ys, xs)
    }

    /// Flat spectral index of a pure mode with box modes `xm` and torus
    /// modes `ym` (signed).
    pub fn mode_index(&self, ym: &[i64], xm: &[i64]) -> Result<usize> {
        if ym.len() != self.torus.k || xm.len() != self.box_grid.n {
            return Err(Error::RadiiCount { k: self.torus.k, given: ym.len() });
        }
        let nx = self.box_grid.points_per_axis as i64;
        let ny = self.torus.modes_per_axis as i64;
        let mut flat: i64 = 0;
        for (axis, &m) in ym.iter().enumerate() {
            if m < -ny / 2 || m >= ny / 2 {
                return Err(Error::ModeOutOfBand { axis, index: m, half: ny / 2 });
            }
            flat = flat * ny + m.rem_euclid(ny);
        }
        for (axis, &m) in xm.iter().enumerate() {
            if m < -nx / 2 || m >= nx / 2 {
                return Err(Error::ModeOutOfBand { axis, index: m, half: nx / 2 });
            }
            flat = flat * nx + m.rem_euclid(nx);
        }
        Ok(flat as usize)
    }

    /// Forward transform in place: physical values -> mode amplitudes c
    /// with u(x) = sum_m c_m e^{i<m, x>}.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        let shape = self.shape();
        for axis in 0..shape.len() {
            let fft = if axis < self.torus.k { &self.plans.fwd_y } else { &self.plans.fwd_x };
            fft_axis(data, &shape, axis, fft.as_ref());
        }
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }

    /// Inverse transform in place: mode amplitudes -> physical values.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        let shape = self.shape();
        for axis in 0..shape.len() {
            let fft = if axis < self.torus.k { &self.plans.inv_y } else { &self.plans.inv_x };
            fft_axis(data, &shape, axis, fft.as_ref());
        }
        Ok(())
    }

    /// Transform the torus axes only: physical -> per-x transverse mode
    /// amplitudes. Box axes are untouched.
    pub fn forward_y(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        let shape = self.shape();
        for axis in 0..self.torus.k {
            fft_axis(data, &shape, axis, self.plans.fwd_y.as_ref());
        }
        let scale = 1.0 / self.torus.points() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }

    /// Inverse-transform the box axes only: full-spectral -> physical in x
    /// while staying modal in y.
    pub fn inverse_x(&self, data: &mut [Complex64]) -> Result<()> {
        self.check_len(data)?;
        let shape = self.shape();
        for axis in self.torus.k..shape.len() {
            fft_axis(data, &shape, axis, self.plans.inv_x.as_ref());
        }
        Ok(())
    }

    fn check_len(&self, data: &[Complex64]) -> Result<()> {
        if data.len() != self.len() {
            return Err(Error::SizeMismatch { got: data.len(), want: self.len() });
        }
        Ok(())
    }
}

/// Time before which the truncated box emulates free space for data in the
/// declared band: the fastest wave packet travels at group velocity
/// 2 * band, and wrap-around reaches data supported in the central half
/// after covering a distance L. Infinite when no band is declared.
pub fn recurrence_horizon(grid: &ProductGrid) -> f64 {
    let band = grid.box_grid.band;
    if band > 0.0 {
        grid.box_grid.half_length / (2.0 * band)
    } else {
        f64::INFINITY
    }
}

/// Run a 1-D FFT along one axis of a row-major array.
fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, fft: &dyn Fft<f64>) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    if stride == 1 {
        // innermost axis: lines are contiguous; process handles the batch
        fft.process(data);
        return;
    }
    let mut line = vec![Complex64::default(); len];
    for o in 0..outer {
        let base = o * len * stride;
        for s in 0..stride {
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * stride + s];
            }
            fft.process(&mut line);
            for (j, v) in line.iter().enumerate() {
                data[base + j * stride + s] = *v;
            }
        }
    }
}
