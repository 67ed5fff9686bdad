//! Time dynamics: the exact free propagator, the exact nonlinear phase
//! substep, the Strang split-step integrator, the Duhamel operator with
//! Picard iteration, and contraction-factor measurement.
//!
//! Sign conventions: the free flow multiplies mode (xi, m) by
//! e^{-i t (|xi|^2 + nu_m)}, and the Duhamel operator is
//! u -> free(t) f + i lambda int_0^t free(t - tau) u|u|^mu dtau. The
//! integral carries the factor i lambda; only that factor makes the fixed
//! point solve the evolution equation, and the evolve/picard cross-check
//! in the tests pins it.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponents::{
    contraction_exponents, rational_to_f64, solve_system, ExtRational, NonlinearityContext,
};
use crate::field::{Field, Representation, TimeSeries};
use crate::grid::{recurrence_horizon, BoxGrid, ProductGrid, TorusSpectrum};
use crate::norms::{mixed_norm, sobolev_norm, NormSpec};

/// Surveillance threshold: abort when max |u| exceeds this multiple of its
/// initial value.
const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub ctx: NonlinearityContext,
    /// Integrator step.
    pub dt: f64,
    /// Final time.
    pub t_final: f64,
    /// Steps between stored samples.
    pub sample_stride: usize,
    /// Spectral oversampling factor for nonlinear-term evaluation.
    pub dealias_factor: f64,
    /// Permit runs past the recurrence horizon.
    pub allow_recurrence: bool,
}

impl EvolutionConfig {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) {
            return Err(Error::NonPositive { what: "dt", value: self.dt });
        }
        if !(self.t_final > 0.0) {
            return Err(Error::NonPositive { what: "T", value: self.t_final });
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::StepMismatch { t_final: self.t_final, dt: self.dt });
        }
        let steps = steps as usize;
        if self.sample_stride == 0 || !steps.is_multiple_of(self.sample_stride) {
            return Err(Error::StrideMismatch { stride: self.sample_stride, steps });
        }
        Ok(steps)
    }

    pub fn sample_spacing(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }

    pub fn validate_horizon(&self, grid: &ProductGrid) -> Result<()> {
        let horizon = recurrence_horizon(grid);
        if !self.allow_recurrence && self.t_final > horizon {
            return Err(Error::HorizonExceeded { t_final: self.t_final, horizon });
        }
        Ok(())
    }
}

/// Exact free flow: phase e^{-i t (|xi|^2 + nu_m)} on every mode. Advances
/// the time tag by t; every weighted spectral norm is preserved.
pub fn free_propagate(f: &Field, t: f64) -> Field {
    let mut out = f
        .in_representation(Representation::Spectral)
        .expect("free_propagate: transform failed");
    let grid = out.grid().clone();
    for (flat, c) in out.data_mut().iter_mut().enumerate() {
        let phase = -t * grid.symbol(flat);
        *c *= Complex64::from_polar(1.0, phase);
    }
    out.set_time_tag(f.time_tag() + t);
    out
}

/// Exact nonlinear substep: u -> u e^{i lambda |u|^mu h} pointwise. The
/// modulus is untouched, so the discrete mass is conserved exactly. The
/// time tag is left alone; the free substeps account for physical time.
pub fn nonlinear_phase(f: &Field, lambda: f64, mu: f64, h: f64) -> Field {
    let mut out = f
        .in_representation(Representation::Physical)
        .expect("nonlinear_phase: transform failed");
    for c in out.data_mut().iter_mut() {
        let phase = lambda * c.norm().powf(mu) * h;
        *c *= Complex64::from_polar(1.0, phase);
    }
    out
}

fn padded_axis(len: usize, factor: f64, power_of_two: bool) -> usize {
    let want = (len as f64 * factor).ceil() as usize;
    if power_of_two {
        want.next_power_of_two()
    } else {
        want + want % 2
    }
}

/// An oversampled companion grid for evaluating non-polynomial
/// nonlinearities with reduced aliasing. Box axes round up to the next
/// power of two.
pub fn dealias_grid(grid: &ProductGrid, factor: f64) -> Result<Arc<ProductGrid>> {
    let bg = &grid.box_grid;
    let ts = &grid.torus;
    ProductGrid::new(
        BoxGrid {
            n: bg.n,
            half_length: bg.half_length,
            points_per_axis: padded_axis(bg.points_per_axis, factor, true),
            band: bg.band,
        },
        TorusSpectrum::new(ts.k, ts.radii.clone(), padded_axis(ts.modes_per_axis, factor, false))?,
    )
}

/// Flat index in `to` of the mode that `flat` addresses in `from`. Both
/// grids must share dimensions; mode identities are preserved, so padding
/// keeps the Nyquist convention intact.
fn remap_index(flat: usize, from: &ProductGrid, to: &ProductGrid) -> usize {
    let (fnx, tnx) = (from.box_grid.points_per_axis, to.box_grid.points_per_axis);
    let (fny, tny) = (from.torus.modes_per_axis, to.torus.modes_per_axis);
    let mut rest = flat;
    let mut parts: Vec<(usize, usize)> = Vec::with_capacity(from.box_grid.n + from.torus.k);
    for _ in 0..from.box_grid.n {
        let idx = rest % fnx;
        rest /= fnx;
        let m = if idx < fnx / 2 { idx as i64 } else { idx as i64 - fnx as i64 };
        parts.push((m.rem_euclid(tnx as i64) as usize, tnx));
    }
    for _ in 0..from.torus.k {
        let idx = rest % fny;
        rest /= fny;
        let m = if idx < fny / 2 { idx as i64 } else { idx as i64 - fny as i64 };
        parts.push((m.rem_euclid(tny as i64) as usize, tny));
    }
    let mut target = 0usize;
    for &(idx, len) in parts.iter().rev() {
        target = target * len + idx;
    }
    target
}

/// The nonlinear flux u |u|^mu as a spectral field, evaluated pointwise on
/// a grid oversampled by `factor` and truncated back to the base band.
/// Exact dealiasing is impossible for fractional powers; oversampling
/// keeps the residual below the scheme's other errors.
pub fn nonlinear_term(f: &Field, mu: f64, factor: f64) -> Result<Field> {
    if factor <= 1.0 {
        let mut w = f.in_representation(Representation::Physical)?;
        for c in w.data_mut().iter_mut() {
            *c *= c.norm().powf(mu);
        }
        w.to_spectral()?;
        return Ok(w);
    }
    let fine = dealias_grid(f.grid(), factor)?;
    nonlinear_term_on(f, mu, &fine)
}

/// `nonlinear_term` with a caller-provided oversampled grid, so repeated
/// evaluations share transform plans.
pub fn nonlinear_term_on(f: &Field, mu: f64, fine: &Arc<ProductGrid>) -> Result<Field> {
    let base = f.grid().clone();
    let spec = f.in_representation(Representation::Spectral)?;
    let mut fine_data = vec![Complex64::default(); fine.len()];
    for (flat, &c) in spec.data().iter().enumerate() {
        fine_data[remap_index(flat, &base, fine)] = c;
    }
    fine.inverse(&mut fine_data)?;
    for c in fine_data.iter_mut() {
        *c *= c.norm().powf(mu);
    }
    fine.forward(&mut fine_data)?;
    let mut out_data = vec![Complex64::default(); base.len()];
    for (flat, o) in out_data.iter_mut().enumerate() {
        *o = fine_data[remap_index(flat, &base, fine)];
    }
    Field::from_parts(base, out_data, Representation::Spectral, f.time_tag())
}

/// Strang split-step integration of the full equation, sampling every
/// `sample_stride` steps with the initial state included. Aborts with the
/// step index when the state stops being finite or blows past the
/// surveillance threshold.
pub fn evolve(f0: &Field, cfg: &EvolutionConfig) -> Result<TimeSeries> {
    let steps = cfg.steps()?;
    cfg.validate_horizon(f0.grid())?;
    let lambda = cfg.ctx.lambda;
    let mu = rational_to_f64(cfg.ctx.mu);
    let initial_max = f0
        .in_representation(Representation::Physical)?
        .max_abs()
        .max(f64::MIN_POSITIVE);

    let mut state = f0.in_representation(Representation::Spectral)?;
    state.set_time_tag(0.0);
    let mut samples = Vec::with_capacity(steps / cfg.sample_stride + 1);
    samples.push(state.clone());

    for step in 0..steps {
        state = free_propagate(&state, cfg.dt / 2.0);
        state.to_physical()?;
        state = nonlinear_phase(&state, lambda, mu, cfg.dt);
        let max = state.max_abs();
        if !state.is_finite() || max > BLOWUP_FACTOR * initial_max {
            return Err(Error::BlowUp { step, max });
        }
        state.to_spectral()?;
        state = free_propagate(&state, cfg.dt / 2.0);
        state.set_time_tag((step + 1) as f64 * cfg.dt);
        if (step + 1) % cfg.sample_stride == 0 {
            samples.push(state.clone());
        }
    }
    TimeSeries::new(samples)
}

/// Apply the Duhamel operator to a sampled trajectory: free evolution of
/// the datum plus the trapezoid-quadrature time convolution of the
/// nonlinear flux, evaluated at the same samples.
pub fn duhamel_apply(f: &Field, u: &TimeSeries, cfg: &EvolutionConfig) -> Result<TimeSeries> {
    if !f.same_grid(u.get(0)) {
        return Err(Error::GridMismatch);
    }
    let (t0, t1) = u.window();
    if t0.abs() > 1e-12 {
        return Err(Error::WindowOutsideRun { t1: t0, t2: t1 });
    }
    let mu = rational_to_f64(cfg.ctx.mu);
    let il = Complex64::new(0.0, cfg.ctx.lambda);
    let dt = u.sample_spacing();
    let fine = (cfg.dealias_factor > 1.0)
        .then(|| dealias_grid(f.grid(), cfg.dealias_factor))
        .transpose()?;

    let mut datum = f.in_representation(Representation::Spectral)?;
    datum.set_time_tag(0.0);
    // pulled-back flux g_j = free(-t_j) N(u_j), accumulated by trapezoid
    let mut out = Vec::with_capacity(u.len());
    let mut acc = Field::from_parts(
        datum.grid().clone(),
        vec![Complex64::default(); datum.grid().len()],
        Representation::Spectral,
        0.0,
    )?;
    let mut prev: Option<Field> = None;
    for j in 0..u.len() {
        let t_j = u.time(j);
        let flux = match &fine {
            Some(fg) => nonlinear_term_on(u.get(j), mu, fg)?,
            None => nonlinear_term(u.get(j), mu, 1.0)?,
        };
        let pulled = free_propagate(&flux, -t_j);
        if let Some(p) = &prev {
            acc.axpy(Complex64::new(dt / 2.0, 0.0), p);
            acc.axpy(Complex64::new(dt / 2.0, 0.0), &pulled);
        }
        prev = Some(pulled);

        let mut interaction = datum.clone();
        interaction.axpy(il, &acc);
        let mut sample = free_propagate(&interaction, t_j);
        sample.set_time_tag(t_j);
        out.push(sample);
    }
    TimeSeries::new(out)
}

/// The complete-metric pair the fixed-point argument contracts in, with a
/// plain transverse L2 inside: (mu+2, mu+2) at mass criticality, the
/// scanned working pair above it.
pub fn contraction_metric_pair(
    ctx: &NonlinearityContext,
) -> Result<(ExtRational, ExtRational)> {
    if ctx.is_mass_critical() {
        let (l, p, _, _) = contraction_exponents(ctx)?;
        Ok((l, p))
    } else {
        let sys = solve_system(ctx)?;
        Ok((sys.pair.q, sys.pair.r))
    }
}

fn series_distance(
    a: &TimeSeries,
    b: &TimeSeries,
    pair: (ExtRational, ExtRational),
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WindowTooShort(a.len().min(b.len())));
    }
    let diffs = (0..a.len())
        .map(|j| {
            let mut d = a.get(j).in_representation(Representation::Spectral)?;
            d.axpy(
                Complex64::new(-1.0, 0.0),
                &b.get(j).in_representation(Representation::Spectral)?,
            );
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    let series = TimeSeries::new(diffs)?;
    mixed_norm(&series, &NormSpec::mixed(pair.0, pair.1, 0.0))
}

#[derive(Debug)]
pub struct PicardReport {
    /// Duhamel applications performed.
    pub iterates: usize,
    /// Successive distances in the contraction metric.
    pub distances: Vec<f64>,
    pub converged: bool,
    /// The fixed-point trajectory (last iterate).
    pub series: TimeSeries,
}

/// Iterate the Duhamel operator from the free evolution until successive
/// iterates are closer than `tol` in the contraction metric. Small data is
/// the caller's responsibility; divergence surfaces as `NotConverged`
/// carrying the distance history.
pub fn picard_iterate(
    f: &Field,
    cfg: &EvolutionConfig,
    tol: f64,
    max_iter: usize,
) -> Result<PicardReport> {
    let steps = cfg.steps()?;
    cfg.validate_horizon(f.grid())?;
    let metric = contraction_metric_pair(&cfg.ctx)?;
    let spacing = cfg.sample_spacing();
    let count = steps / cfg.sample_stride;

    let mut datum = f.in_representation(Representation::Spectral)?;
    datum.set_time_tag(0.0);
    let mut current = TimeSeries::new(
        (0..=count)
            .map(|j| free_propagate(&datum, j as f64 * spacing))
            .collect(),
    )?;

    let mut distances = Vec::new();
    for iter in 0..max_iter {
        let next = duhamel_apply(f, &current, cfg)?;
        let d = match series_distance(&next, &current, metric) {
            Ok(d) => d,
            Err(Error::NonFiniteData) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        distances.push(d);
        current = next;
        if d < tol {
            return Ok(PicardReport {
                iterates: iter + 1,
                distances,
                converged: true,
                series: current,
            });
        }
        if !d.is_finite() {
            break;
        }
    }
    Err(Error::NotConverged { max_iter, distances })
}

#[derive(Debug, Clone)]
pub struct ContractionStats {
    pub max: f64,
    pub mean: f64,
    pub factors: Vec<f64>,
    /// Zero-distance pairs that had to be redrawn.
    pub resampled: usize,
}

/// Band-limited random field with decaying mode amplitudes; deterministic
/// in the generator state.
pub fn random_band_limited(
    grid: &Arc<ProductGrid>,
    x_modes: i64,
    y_modes: i64,
    rng: &mut ChaCha8Rng,
) -> Field {
    let mut data = vec![Complex64::default(); grid.len()];
    let mut ym = vec![0i64; grid.torus.k];
    let mut xm = vec![0i64; grid.box_grid.n];
    fill_modes(grid, &mut data, &mut ym, &mut xm, 0, x_modes, y_modes, rng);
    Field::from_parts(grid.clone(), data, Representation::Spectral, 0.0).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn fill_modes(
    grid: &Arc<ProductGrid>,
    data: &mut [Complex64],
    ym: &mut Vec<i64>,
    xm: &mut Vec<i64>,
    axis: usize,
    x_modes: i64,
    y_modes: i64,
    rng: &mut ChaCha8Rng,
) {
    let total_axes = grid.torus.k + grid.box_grid.n;
    if axis == total_axes {
        let m2: f64 = ym.iter().chain(xm.iter()).map(|m| (m * m) as f64).sum();
        let weight = 1.0 / (1.0 + m2);
        let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * weight;
        data[grid.mode_index(ym, xm).unwrap()] = c;
        return;
    }
    if axis < grid.torus.k {
        for m in -y_modes..=y_modes {
            ym[axis] = m;
            fill_modes(grid, data, ym, xm, axis + 1, x_modes, y_modes, rng);
        }
    } else {
        for m in -x_modes..=x_modes {
            xm[axis - grid.torus.k] = m;
            fill_modes(grid, data, ym, xm, axis + 1, x_modes, y_modes, rng);
        }
    }
}

/// Sample random pairs in the metric ball of radius `radius` around the
/// free evolution of `f` and report the worst and mean ratio
/// d(T v1, T v2) / d(v1, v2). Deterministic under a fixed seed.
pub fn contraction_factor(
    f: &Field,
    cfg: &EvolutionConfig,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<ContractionStats> {
    if trials < 2 {
        return Err(Error::ParameterConstraint(format!(
            "contraction measurement needs at least 2 trials, got {trials}"
        )));
    }
    let steps = cfg.steps()?;
    let metric = contraction_metric_pair(&cfg.ctx)?;
    let spacing = cfg.sample_spacing();
    let count = steps / cfg.sample_stride;
    let grid = f.grid().clone();

    let mut datum = f.in_representation(Representation::Spectral)?;
    datum.set_time_tag(0.0);
    let base = TimeSeries::new(
        (0..=count)
            .map(|j| free_propagate(&datum, j as f64 * spacing))
            .collect(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make_member = |rng: &mut ChaCha8Rng| -> Result<TimeSeries> {
        let g = random_band_limited(&grid, 4, 2, rng);
        let scale = 0.2 + 0.8 * rng.random::<f64>();
        let pert = TimeSeries::new(
            (0..=count)
                .map(|j| {
                    let mut s = free_propagate(&g, j as f64 * spacing);
                    s.set_time_tag(j as f64 * spacing);
                    s
                })
                .collect(),
        )?;
        let size = mixed_norm(&pert, &NormSpec::mixed(metric.0, metric.1, 0.0))?;
        let target = radius * scale / size.max(f64::MIN_POSITIVE);
        let member = (0..=count)
            .map(|j| {
                let mut s = base.get(j).clone();
                let mut p = pert.get(j).clone();
                p.scale(Complex64::new(target, 0.0));
                s.axpy(Complex64::new(1.0, 0.0), &p);
                s
            })
            .collect();
        TimeSeries::new(member)
    };

    let mut factors = Vec::with_capacity(trials);
    let mut resampled = 0usize;
    for _ in 0..trials {
        let (v1, v2, dist) = loop {
            let v1 = make_member(&mut rng)?;
            let v2 = make_member(&mut rng)?;
            let dist = series_distance(&v1, &v2, metric)?;
            if dist > 1e-13 * radius.max(f64::MIN_POSITIVE) {
                break (v1, v2, dist);
            }
            resampled += 1;
        };
        let t1 = duhamel_apply(f, &v1, cfg)?;
        let t2 = duhamel_apply(f, &v2, cfg)?;
        let num = series_distance(&t1, &t2, metric)?;
        factors.push(num / dist);
    }
    let max = factors.iter().copied().fold(0.0, f64::max);
    let mean = factors.iter().sum::<f64>() / factors.len() as f64;
    Ok(ContractionStats { max, mean, factors, resampled })
}

/// Canonical small-data profile: Gaussian envelope in x times the first
/// mode on every torus axis, normalized so the (0, sigma) Sobolev norm is
/// exactly `eps`.
pub fn gaussian_mode_data(grid: &Arc<ProductGrid>, sigma: f64, eps: f64) -> Result<Field> {
    let mut f = Field::from_physical_fn(grid.clone(), |ys, xs| {
        let r2: f64 = xs.iter().map(|x| x * x).sum();
        let phase: f64 = ys.iter().sum();
        Complex64::from_polar((-r2 / 2.0).exp(), phase)
    });
    let norm = sobolev_norm(&f, 0.0, sigma)?;
    f.scale(Complex64::new(eps / norm, 0.0));
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Rational;
    use crate::norms::{l2_norm, mass};
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize, half_length: f64) -> Arc<ProductGrid> {
        ProductGrid::new(
            BoxGrid { n: 1, half_length, points_per_axis: nx, band: 0.0 },
            TorusSpectrum::new(1, vec![1.0], ny).unwrap(),
        )
        .unwrap()
    }

    fn ctx(mu: Rational, lambda: f64) -> NonlinearityContext {
        NonlinearityContext::new(1, 1, mu, lambda, 0.75).unwrap()
    }

    fn cfg(mu: Rational, lambda: f64, dt: f64, t_final: f64, stride: usize) -> EvolutionConfig {
        EvolutionConfig {
            ctx: ctx(mu, lambda),
            dt,
            t_final,
            sample_stride: stride,
            dealias_factor: 2.0,
            allow_recurrence: true,
        }
    }

    #[test]
    fn free_flow_is_unitary_and_grouplike() {
        let g = grid(128, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.3).unwrap();
        let a = free_propagate(&free_propagate(&f, 0.7), 0.55);
        let b = free_propagate(&f, 1.25);
        let diff = a.difference(&b);
        assert!(l2_norm(&diff).unwrap() / l2_norm(&f).unwrap() < 1e-12);
        for (s, sigma) in [(0.0, 0.0), (0.5, 0.75), (1.0, 1.5)] {
            let before = sobolev_norm(&f, s, sigma).unwrap();
            let after = sobolev_norm(&b, s, sigma).unwrap();
            assert!((before - after).abs() / before < 1e-12);
        }
        let id = free_propagate(&f, 0.0);
        assert!(l2_norm(&id.difference(&f)).unwrap() < 1e-14);
    }

    #[test]
    fn free_gaussian_amplitude_law() {
        // |u(t, 0)| = (1 + 4 t^2)^{-1/4} for the unit Gaussian
        let g = grid(256, 4, 16.0);
        let f = Field::from_physical_fn(g.clone(), |_, xs| {
            Complex64::new((-xs[0] * xs[0] / 2.0).exp(), 0.0)
        });
        let nx = g.box_points();
        for t in [0.5, 1.0, 2.0] {
            let mut u = free_propagate(&f, t);
            u.to_physical().unwrap();
            let center = u.data()[nx / 2]; // y index 0, x index nx/2 (x = 0)
            let expect = (1.0 + 4.0 * t * t).powf(-0.25);
            assert!(
                (center.norm() - expect).abs() < 1e-8,
                "t={t}: {} vs {expect}",
                center.norm()
            );
        }
    }

    #[test]
    fn nonlinear_phase_rotates_without_changing_modulus() {
        let g = grid(64, 8, 8.0);
        let amp = Complex64::new(0.3, -0.2);
        let f = Field::from_physical_fn(g.clone(), |_, _| amp);
        let out = nonlinear_phase(&f, -1.0, 4.0, 0.3);
        let expect = amp * Complex64::from_polar(1.0, -amp.norm().powf(4.0) * 0.3);
        for c in out.data() {
            assert!((c - expect).norm() < 1e-15);
        }
        // identity at lambda = 0
        let id = nonlinear_phase(&f, 0.0, 4.0, 0.3);
        for (a, b) in id.data().iter().zip(f.data()) {
            assert_eq!(a, b);
        }
        // exact substep composition: two half steps equal one full step
        let f2 = gaussian_mode_data(&g, 0.75, 0.4).unwrap();
        let half_twice =
            nonlinear_phase(&nonlinear_phase(&f2, -1.0, 4.0, 0.15), -1.0, 4.0, 0.15);
        let once = nonlinear_phase(&f2, -1.0, 4.0, 0.3);
        let diff = half_twice.difference(&once);
        assert!(l2_norm(&diff).unwrap() < 1e-14);
        // mass exactly preserved
        assert!((mass(&once) - mass(&f2)).abs() / mass(&f2) < 1e-14);
    }

    #[test]
    fn plane_wave_is_exact_for_any_dt() {
        let g = grid(64, 8, 8.0);
        let amp = Complex64::new(0.4, 0.1);
        let f = Field::plane_wave(g.clone(), amp, &[2], &[3]).unwrap();
        let xi = 3.0 * PI / 8.0;
        let nu = 4.0;
        let lambda = -1.0;
        let omega = xi * xi + nu - lambda * amp.norm().powf(4.0);
        for dt in [1e-1, 1e-2] {
            let c = cfg(Rational::new(4, 1), lambda, dt, 1.0, (1.0 / dt).round() as usize);
            let series = evolve(&f, &c).unwrap();
            let last = series.get(series.len() - 1);
            let mut exact = f.clone();
            exact.scale(Complex64::from_polar(1.0, -omega));
            let err = l2_norm(&last.difference(&exact)).unwrap() / l2_norm(&f).unwrap();
            assert!(err < 1e-10, "dt={dt}: relative error {err}");
        }
    }

    #[test]
    fn evolve_without_coupling_matches_free_flow() {
        let g = grid(128, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.5).unwrap();
        let c = cfg(Rational::new(4, 1), 0.0, 1e-2, 1.0, 20);
        let series = evolve(&f, &c).unwrap();
        for j in 0..series.len() {
            let t = series.time(j);
            let expect = free_propagate(&f, t);
            let err = l2_norm(&series.get(j).difference(&expect)).unwrap();
            assert!(err / l2_norm(&f).unwrap() < 1e-12, "t={t}: {err}");
        }
    }

    #[test]
    fn mass_is_conserved_and_self_convergence_is_second_order() {
        let g = grid(128, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.3).unwrap();
        let m0 = mass(&f);

        let run = |dt: f64| {
            let c = cfg(Rational::new(4, 1), -1.0, dt, 0.5, (0.5 / dt).round() as usize);
            evolve(&f, &c).unwrap()
        };
        let reference = run(5e-4);
        let refl = reference.get(reference.len() - 1).clone();
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3] {
            let s = run(dt);
            for sm in s.iter() {
                let m = mass(sm);
                assert!((m - m0).abs() / m0 < 1e-10);
            }
            let last = s.get(s.len() - 1);
            errs.push(l2_norm(&last.difference(&refl)).unwrap());
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "self-convergence ratio {ratio}, errors {errs:?}"
        );
    }

    #[test]
    fn duhamel_of_zero_is_free_flow() {
        let g = grid(64, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.2).unwrap();
        let c = cfg(Rational::new(4, 1), -1.0, 1e-2, 0.5, 5);
        let zero_series = TimeSeries::new(
            (0..=10)
                .map(|j| {
                    let mut z = Field::zero(g.clone());
                    z.set_time_tag(j as f64 * 0.05);
                    z
                })
                .collect(),
        )
        .unwrap();
        let out = duhamel_apply(&f, &zero_series, &c).unwrap();
        for j in 0..out.len() {
            let expect = free_propagate(&f, out.time(j));
            let err = l2_norm(&out.get(j).difference(&expect)).unwrap();
            assert!(err / l2_norm(&f).unwrap() < 1e-12);
        }
        // zero coupling on a nonzero trajectory also collapses to the
        // free flow, exactly
        let free_cfg = cfg(Rational::new(4, 1), 0.0, 1e-2, 0.5, 5);
        let u = evolve(&f, &free_cfg).unwrap();
        let tu = duhamel_apply(&f, &u, &free_cfg).unwrap();
        for j in 0..tu.len() {
            let expect = free_propagate(&f, tu.time(j));
            let err = l2_norm(&tu.get(j).difference(&expect)).unwrap();
            assert!(err / l2_norm(&f).unwrap() < 1e-12);
        }
    }

    #[test]
    fn evolve_output_is_nearly_a_duhamel_fixed_point() {
        let g = grid(128, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.05).unwrap();
        let c = cfg(Rational::new(4, 1), -1.0, 2e-3, 0.5, 5);
        let u = evolve(&f, &c).unwrap();
        let tu = duhamel_apply(&f, &u, &c).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let err = l2_norm(&tu.get(j).difference(u.get(j))).unwrap();
            worst = worst.max(err);
        }
        let scale = l2_norm(&f).unwrap();
        assert!(worst / scale < 1e-6, "fixed-point residual {}", worst / scale);
    }

    #[test]
    fn picard_zero_datum_converges_immediately() {
        let g = grid(64, 8, 8.0);
        let f = Field::zero(g);
        let c = cfg(Rational::new(4, 1), -1.0, 1e-2, 0.5, 5);
        let report = picard_iterate(&f, &c, 1e-12, 8).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterates, 1);
        assert_eq!(report.distances[0], 0.0);
    }

    #[test]
    fn picard_small_data_matches_split_step() {
        let g = grid(128, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.05).unwrap();
        let c = cfg(Rational::new(4, 1), -1.0, 2e-3, 0.5, 5);
        let report = picard_iterate(&f, &c, 1e-10, 8).unwrap();
        assert!(report.converged);
        let u = evolve(&f, &c).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let err = l2_norm(&report.series.get(j).difference(u.get(j))).unwrap();
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "sup-t L2 gap {worst}");
    }

    #[test]
    fn picard_diverges_for_large_data() {
        let g = grid(64, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 12.0).unwrap();
        let c = cfg(Rational::new(4, 1), -1.0, 1e-2, 1.0, 10);
        match picard_iterate(&f, &c, 1e-10, 6) {
            Err(Error::NotConverged { distances, .. }) => {
                assert!(distances.len() >= 2);
                let non_contracting = distances.windows(2).any(|w| w[1] >= w[0])
                    || !distances.last().unwrap().is_finite();
                assert!(non_contracting, "distances unexpectedly contract: {distances:?}");
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn blowup_guard_reports_step() {
        let g = grid(64, 8, 8.0);
        let mut f = Field::zero(g);
        f.data_mut()[0] = Complex64::new(f64::NAN, 0.0);
        let c = cfg(Rational::new(4, 1), 1.0, 1e-2, 0.1, 10);
        match evolve(&f, &c) {
            Err(Error::BlowUp { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected BlowUp, got {other:?}"),
        }
    }

    #[test]
    fn contraction_factor_vanishes_without_coupling() {
        let g = grid(64, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.05).unwrap();
        let c = cfg(Rational::new(4, 1), 0.0, 1e-2, 0.5, 10);
        let stats = contraction_factor(&f, &c, 0.05, 3, 11).unwrap();
        assert_eq!(stats.max, 0.0);
        assert_eq!(stats.mean, 0.0);
    }

    #[test]
    fn contraction_factor_is_seed_deterministic_and_small() {
        let g = grid(64, 8, 8.0);
        let f = gaussian_mode_data(&g, 0.75, 0.05).unwrap();
        let c = cfg(Rational::new(4, 1), -1.0, 1e-2, 0.5, 10);
        let a = contraction_factor(&f, &c, 0.05, 3, 42).unwrap();
        let b = contraction_factor(&f, &c, 0.05, 3, 42).unwrap();
        assert_eq!(a.factors, b.factors);
        assert!(a.max < 0.5, "contraction factor {}", a.max);
    }

    #[test]
    fn config_validation_catches_mismatches() {
        let c = cfg(Rational::new(4, 1), -1.0, 3e-3, 1.0, 10);
        assert!(matches!(c.steps(), Err(Error::StepMismatch { .. })));
        let c2 = cfg(Rational::new(4, 1), -1.0, 1e-2, 1.0, 7);
        assert!(matches!(c2.steps(), Err(Error::StrideMismatch { .. })));
        let g = ProductGrid::new(
            BoxGrid { n: 1, half_length: 8.0, points_per_axis: 64, band: 2.0 },
            TorusSpectrum::new(1, vec![1.0], 8).unwrap(),
        )
        .unwrap();
        let mut c3 = cfg(Rational::new(4, 1), -1.0, 1e-2, 10.0, 10);
        c3.allow_recurrence = false;
        assert!(matches!(c3.validate_horizon(&g), Err(Error::HorizonExceeded { .. })));
        c3.allow_recurrence = true;
        assert!(c3.validate_horizon(&g).is_ok());
    }
}
