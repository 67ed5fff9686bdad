//! Fractional calculus on the flat torus: the ball-average square-function
//! form of |grad|^sigma, the Hardy-Littlewood maximal operator, pointwise
//! chain bounds, and empirical product-inequality sweeps.
//!
//! Balls use the geodesic (wrap-around) metric; volumes are exact lattice
//! counts times the cell volume. Radial quadrature for the square function
//! runs on logarithmic nodes from half the lattice spacing (below that a
//! discrete ball is a single node and the integrand vanishes) up to the
//! torus diameter. Empirical constants are reported, never asserted
//! against analytic values.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TorusSpectrum;

/// Complex function on the torus lattice.
#[derive(Clone, Debug)]
pub struct TransverseFunction {
    pub torus: TorusSpectrum,
    pub values: Vec<Complex64>,
}

impl TransverseFunction {
    pub fn new(torus: TorusSpectrum, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != torus.points() {
            return Err(Error::SizeMismatch { got: values.len(), want: torus.points() });
        }
        if !values.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { torus, values })
    }

    pub fn from_fn(torus: TorusSpectrum, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..torus.points())
            .map(|flat| f(&node_coords(&torus, flat)))
            .collect();
        Self { torus, values }
    }

    pub fn real(torus: TorusSpectrum, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        Self::new(torus, values)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Lebesgue norm with volume weights; infinite exponent gives the sup.
    pub fn lebesgue_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_abs();
        }
        let cell = self.torus.cell_volume();
        (self.values.iter().map(|c| c.norm().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lebesgue_norm(2.0)
    }

    /// Spectral Sobolev norm with multiplier (1 + nu)^{sigma/2}.
    pub fn h_sigma_norm(&self, sigma: f64) -> f64 {
        let coeffs = self.mode_amplitudes();
        let nus = eigenvalues(&self.torus);
        let sum: f64 = coeffs
            .iter()
            .zip(&nus)
            .map(|(c, nu)| (1.0 + nu).powf(sigma) * c.norm_sqr())
            .sum();
        (sum * self.torus.volume()).sqrt()
    }

    /// DFT mode amplitudes c_m with f = sum c_m e^{i m theta}.
    pub fn mode_amplitudes(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        dft_all_axes(&self.torus, &mut data, false);
        let scale = 1.0 / self.torus.points() as f64;
        for c in &mut data {
            *c *= scale;
        }
        data
    }

    pub fn from_mode_amplitudes(torus: TorusSpectrum, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != torus.points() {
            return Err(Error::SizeMismatch { got: coeffs.len(), want: torus.points() });
        }
        let mut data = coeffs;
        dft_all_axes(&torus, &mut data, true);
        Self::new(torus, data)
    }
}

fn node_coords(torus: &TorusSpectrum, flat: usize) -> Vec<f64> {
    let ny = torus.modes_per_axis;
    let mut rest = flat;
    let mut out = vec![0.0; torus.k];
    for axis in (0..torus.k).rev() {
        out[axis] = torus.coord(axis, rest % ny);
        rest /= ny;
    }
    out
}

/// Plain DFT along every torus axis (small lattices; no plan caching
/// needed here).
fn dft_all_axes(torus: &TorusSpectrum, data: &mut [Complex64], inverse: bool) {
    let ny = torus.modes_per_axis;
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddle: Vec<Complex64> = (0..ny)
        .map(|j| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * j as f64 / ny as f64))
        .collect();
    let mut line = vec![Complex64::default(); ny];
    for axis in 0..torus.k {
        let stride: usize = ny.pow((torus.k - 1 - axis) as u32);
        let outer: usize = ny.pow(axis as u32);
        for o in 0..outer {
            let base = o * ny * stride;
            for s in 0..stride {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride + s];
                }
                for (m, out) in (0..ny).map(|m| {
                    let mut acc = Complex64::default();
                    for (j, &v) in line.iter().enumerate() {
                        acc += v * twiddle[(m * j) % ny];
                    }
                    (m, acc)
                }) {
                    data[base + m * stride + s] = out;
                }
            }
        }
    }
}

/// Eigenvalues nu_m in storage order, one per lattice node.
pub fn eigenvalues(torus: &TorusSpectrum) -> Vec<f64> {
    let ny = torus.modes_per_axis;
    (0..torus.points())
        .map(|mut rest| {
            let mut nu = 0.0;
            for axis in (0..torus.k).rev() {
                let m = torus.mode(rest % ny) as f64 / torus.radii[axis];
                nu += m * m;
                rest /= ny;
            }
            nu
        })
        .collect()
}

/// Spectral fractional derivative nu_m^{sigma/2}; the zero mode is
/// annihilated.
pub fn spectral_fractional(f: &TransverseFunction, sigma: f64) -> TransverseFunction {
    let nus = eigenvalues(&f.torus);
    let mut coeffs = f.mode_amplitudes();
    for (c, nu) in coeffs.iter_mut().zip(&nus) {
        *c *= nu.powf(sigma / 2.0);
    }
    TransverseFunction::from_mode_amplitudes(f.torus.clone(), coeffs)
        .expect("sizes match by construction")
}

/// Default radial node count for the square-function quadrature.
pub const DEFAULT_RADIAL_NODES: usize = 64;

/// Radial quadrature for the square-function integral: logarithmic nodes on
/// [t_min, t_max] with the log-uniform dt/t measure.
#[derive(Clone, Debug)]
pub struct QuadratureScheme {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes: usize,
}

impl QuadratureScheme {
    /// t_min = half the smallest lattice spacing (below that a discrete
    /// ball is a single node), t_max = torus diameter.
    pub fn for_torus(torus: &TorusSpectrum, nodes: usize) -> Self {
        let min_spacing = (0..torus.k)
            .map(|a| torus.spacing(a))
            .fold(f64::INFINITY, f64::min);
        Self { t_min: min_spacing / 2.0, t_max: torus.diameter(), nodes }
    }

    pub fn default_for_torus(torus: &TorusSpectrum) -> Self {
        Self::for_torus(torus, DEFAULT_RADIAL_NODES)
    }

    pub fn radii(&self) -> Vec<f64> {
        let ratio = (self.t_max / self.t_min).ln();
        (0..self.nodes)
            .map(|i| self.t_min * (ratio * i as f64 / (self.nodes - 1) as f64).exp())
            .collect()
    }

    /// Trapezoid weights in log t.
    pub fn log_weights(&self) -> Vec<f64> {
        let dlog = (self.t_max / self.t_min).ln() / (self.nodes - 1) as f64;
        (0..self.nodes)
            .map(|i| if i == 0 || i == self.nodes - 1 { dlog / 2.0 } else { dlog })
            .collect()
    }
}

/// Lattice offsets within geodesic distance t of any node, grouped per
/// quadrature radius; translation invariance makes one table serve every
/// center.
struct BallTable {
    /// For each radius, (offsets, inverse volume).
    per_radius: Vec<(Vec<usize>, f64)>,
}

fn ball_table(torus: &TorusSpectrum, radii: &[f64]) -> BallTable {
    let points = torus.points();
    let ny = torus.modes_per_axis;
    // geodesic distance from node 0 to every node
    let dist: Vec<f64> = (0..points)
        .map(|flat| {
            let mut rest = flat;
            let mut d2 = 0.0;
            for axis in (0..torus.k).rev() {
                let idx = rest % ny;
                rest /= ny;
                let circumference = 2.0 * std::f64::consts::PI * torus.radii[axis];
                let raw = torus.coord(axis, idx);
                let wrapped = raw.min(circumference - raw);
                d2 += wrapped * wrapped;
            }
            d2.sqrt()
        })
        .collect();
    let cell = torus.cell_volume();
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap());
    let mut per_radius = Vec::with_capacity(radii.len());
    for &t in radii {
        // closed ball with a one-ulp cushion so the diameter ball always
        // covers the whole lattice
        let cutoff = t + 1e-12 * (1.0 + t);
        let offsets: Vec<usize> =
            order.iter().copied().take_while(|&i| dist[i] <= cutoff).collect();
        let vol = offsets.len() as f64 * cell;
        per_radius.push((offsets, vol.recip()));
    }
    BallTable { per_radius }
}

/// Translate a flat index by a flat offset with per-axis wrap-around.
/// Digit arithmetic from the least significant axis; no allocation, this
/// sits in the innermost ball loops.
fn translate(torus: &TorusSpectrum, flat: usize, offset: usize) -> usize {
    let ny = torus.modes_per_axis;
    let mut rest_a = flat;
    let mut rest_b = offset;
    let mut out = 0usize;
    let mut place = 1usize;
    for _ in 0..torus.k {
        out += (rest_a % ny + rest_b % ny) % ny * place;
        place *= ny;
        rest_a /= ny;
        rest_b /= ny;
    }
    out
}

/// Ball-average square-function realization of the fractional derivative:
/// per node, integrate (t^{-sigma} mean_{B(x,t)} |f(x) - f(y)|)^2 against
/// dt/t and take the square root. Real-valued output; requires
/// 0 < sigma < 1.
pub fn ball_average_fractional(
    f: &TransverseFunction,
    sigma: f64,
    quad: &QuadratureScheme,
) -> Result<TransverseFunction> {
    if !(0.0 < sigma && sigma < 1.0) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    let torus = &f.torus;
    let radii = quad.radii();
    let weights = quad.log_weights();
    let table = ball_table(torus, &radii);
    let cell = torus.cell_volume();
    let points = torus.points();
    let mut out = vec![0.0; points];
    for (x, o) in out.iter_mut().enumerate() {
        let fx = f.values[x];
        let mut acc = 0.0;
        for ((offsets, inv_vol), (&t, &w)) in
            table.per_radius.iter().zip(radii.iter().zip(&weights))
        {
            let mut sum = 0.0;
            for &off in offsets {
                sum += (fx - f.values[translate(torus, x, off)]).norm();
            }
            let avg = sum * cell * inv_vol;
            let g = avg / t.powf(sigma);
            acc += g * g * w;
        }
        *o = acc.sqrt();
    }
    TransverseFunction::real(torus.clone(), out)
}

/// Hardy-Littlewood maximal function: sup over the radii grid of ball
/// averages of |f|.
pub fn maximal_operator(f: &TransverseFunction, quad: &QuadratureScheme) -> TransverseFunction {
    let torus = &f.torus;
    let radii = quad.radii();
    let table = ball_table(torus, &radii);
    let cell = torus.cell_volume();
    let abs: Vec<f64> = f.values.iter().map(|c| c.norm()).collect();
    let points = torus.points();
    let mut out = vec![0.0; points];
    for (x, o) in out.iter_mut().enumerate() {
        let mut best: f64 = 0.0;
        for (offsets, inv_vol) in &table.per_radius {
            let sum: f64 = offsets.iter().map(|&off| abs[translate(torus, x, off)]).sum();
            best = best.max(sum * cell * inv_vol);
        }
        *o = best;
    }
    TransverseFunction::real(torus.clone(), out).expect("finite by construction")
}

#[derive(Debug, Clone)]
pub struct ChainBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Chain bound for phi(f) = |f|^mu with ball-average derivatives on both
/// sides: lhs = ||grad^s phi(f)||_{L^q}, rhs = |||f|^{mu - s/sigma}||_{L^q1}
/// ||grad^sigma f||_{L^{q2 s/sigma}}^{s/sigma}. Parameters must satisfy
/// 0 < s < mu < 1, s/mu < sigma < 1, 1/q = 1/q1 + 1/q2 and
/// (1 - s/(mu sigma)) q1 > 1.
#[allow(clippy::too_many_arguments)]
pub fn chain_bound_check(
    f: &TransverseFunction,
    mu: f64,
    s: f64,
    sigma: f64,
    q: f64,
    q1: f64,
    q2: f64,
    quad: &QuadratureScheme,
) -> Result<ChainBoundReport> {
    validate_chain_params(mu, s, sigma, q, q1, q2)?;
    let phi = TransverseFunction::real(
        f.torus.clone(),
        f.values.iter().map(|c| c.norm().powf(mu)).collect(),
    )?;
    let lhs = ball_average_fractional(&phi, s, quad)?.lebesgue_norm(q);

    let reduced = TransverseFunction::real(
        f.torus.clone(),
        f.values.iter().map(|c| c.norm().powf(mu - s / sigma)).collect(),
    )?;
    let grad_sigma = ball_average_fractional(f, sigma, quad)?;
    let rhs = reduced.lebesgue_norm(q1)
        * grad_sigma.lebesgue_norm(q2 * s / sigma).powf(s / sigma);
    let ratio = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    };
    Ok(ChainBoundReport { lhs, rhs, ratio })
}

fn validate_chain_params(mu: f64, s: f64, sigma: f64, q: f64, q1: f64, q2: f64) -> Result<()> {
    let bad = |msg: String| Err(Error::ParameterConstraint(msg));
    if !(0.0 < s && s < mu && mu < 1.0) {
        return bad(format!("need 0 < s < mu < 1, got s = {s}, mu = {mu}"));
    }
    if !(s / mu < sigma && sigma < 1.0) {
        return bad(format!("need s/mu < sigma < 1, got sigma = {sigma}"));
    }
    let recip = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    if (recip(q) - recip(q1) - recip(q2)).abs() > 1e-12 {
        return bad(format!("need 1/q = 1/q1 + 1/q2, got q = {q}, q1 = {q1}, q2 = {q2}"));
    }
    if q1.is_finite() && (1.0 - s / (mu * sigma)) * q1 <= 1.0 {
        return bad(format!("need (1 - s/(mu sigma)) q1 > 1, got q1 = {q1}"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PointwiseMaxReport {
    /// Max over nodes of lhs/rhs with the order-sigma derivative in the
    /// last factor.
    pub max_ratio_sigma_variant: f64,
    /// The same with the order-s derivative, the other reading of the
    /// bound.
    pub max_ratio_s_variant: f64,
    /// Nodes where a zero right side meets a nonzero left side.
    pub structural_violations: usize,
}

/// Pointwise chain bound |grad^s phi(f)| <= C M(|f|^mu)^{1 - s/(mu sigma)}
/// (|grad^. f|)^{s/sigma}, reported for both readings of the derivative
/// order in the last factor.
pub fn pointwise_max_check(
    f: &TransverseFunction,
    mu: f64,
    s: f64,
    sigma: f64,
    quad: &QuadratureScheme,
) -> Result<PointwiseMaxReport> {
    validate_chain_params(mu, s, sigma, 2.0, f64::INFINITY, 2.0)?;
    let phi = TransverseFunction::real(
        f.torus.clone(),
        f.values.iter().map(|c| c.norm().powf(mu)).collect(),
    )?;
    let lhs = ball_average_fractional(&phi, s, quad)?;
    let maximal = maximal_operator(&phi, quad);
    let grad_sigma = ball_average_fractional(f, sigma, quad)?;
    let grad_s = ball_average_fractional(f, s, quad)?;

    let exponent = 1.0 - s / (mu * sigma);
    let mut worst_sigma: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    let mut violations = 0usize;
    for x in 0..f.torus.points() {
        let l = lhs.values[x].re;
        let m = maximal.values[x].re.powf(exponent);
        let rhs_sigma = m * grad_sigma.values[x].re.powf(s / sigma);
        let rhs_s = m * grad_s.values[x].re.powf(s / sigma);
        if rhs_sigma == 0.0 {
            if l > 1e-14 {
                violations += 1;
            }
            continue;
        }
        worst_sigma = worst_sigma.max(l / rhs_sigma);
        if rhs_s > 0.0 {
            worst_s = worst_s.max(l / rhs_s);
        }
    }
    Ok(PointwiseMaxReport {
        max_ratio_sigma_variant: worst_sigma,
        max_ratio_s_variant: worst_s,
        structural_violations: violations,
    })
}

/// Product-inequality statistic: ||f|f|^mu||_{H^sigma} divided by
/// ||f||_{H^sigma} ||f||_inf^mu, with spectral norms. Exactly 1 on
/// modulus-constant inputs.
pub fn leibniz_ratio(f: &TransverseFunction, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    if !(mu > 0.0) {
        return Err(Error::ParameterConstraint(format!("need mu > 0, got {mu}")));
    }
    let sup = f.sup_abs();
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let product = TransverseFunction::new(
        f.torus.clone(),
        f.values.iter().map(|c| c * c.norm().powf(mu)).collect(),
    )?;
    Ok(product.h_sigma_norm(sigma) / (f.h_sigma_norm(sigma) * sup.powf(mu)))
}

/// Same statistic with |f|^{1+mu} in place of f|f|^mu.
pub fn leibniz_ratio_modulus(f: &TransverseFunction, mu: f64, sigma: f64) -> Result<f64> {
    let sup = f.sup_abs();
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let product = TransverseFunction::real(
        f.torus.clone(),
        f.values.iter().map(|c| c.norm().powf(1.0 + mu)).collect(),
    )?;
    Ok(product.h_sigma_norm(sigma) / (f.h_sigma_norm(sigma) * sup.powf(mu)))
}

/// Random trigonometric polynomial: modes up to |m| <= max_mode per axis
/// with decaying random amplitudes. The multi-index enumeration and the
/// generator draws are independent of the lattice size, so the same seed
/// yields the same polynomial at every resolution that can hold it.
pub fn random_trig_poly(torus: &TorusSpectrum, max_mode: i64, seed: u64) -> TransverseFunction {
    assert!((max_mode as usize) < torus.modes_per_axis / 2, "band exceeds the lattice");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny = torus.modes_per_axis as i64;
    let mut coeffs = vec![Complex64::default(); torus.points()];
    let side = (2 * max_mode + 1) as usize;
    let count = side.pow(torus.k as u32);
    for linear in 0..count {
        let mut rest = linear;
        let mut flat = 0usize;
        let mut m2 = 0.0;
        for _ in 0..torus.k {
            let m = (rest % side) as i64 - max_mode;
            rest /= side;
            m2 += (m * m) as f64;
            flat = flat * ny as usize + m.rem_euclid(ny) as usize;
        }
        let weight = 1.0 / (1.0 + m2);
        coeffs[flat] =
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * weight;
    }
    TransverseFunction::from_mode_amplitudes(torus.clone(), coeffs).expect("sizes match")
}
