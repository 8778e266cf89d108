//! Parallel-beam computerized tomography on the unit square.
//!
//! The image is `n × n` pixels on `[0,1]²`; pixel `(k, l)` covers
//! `[k/n, (k+1)/n] × [l/n, (l+1)/n]` and is stored at index `j = l·n + k`.
//! Ray `(a, s)` has direction `(cos θ_a, sin θ_a)` with `θ_a = π a / A` and
//! passes at signed distance `t_s` from the image center along the normal
//! `(−sin θ_a, cos θ_a)`. Shifts are bin centers of `[−√2/2, √2/2]`.
//! Measurements are stored angle-major: row `i = a·S + s`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Result, SesopError};
use crate::harness::{seeded_rng, uniform_symmetric, STREAM_NOISE};
use crate::linop::{LinearOperator, SparseOperator};
use crate::lp::pairing;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadonGeometry {
    pub num_pixels: usize,
    pub num_shifts: usize,
    pub num_angles: usize,
}

/// A single parallel-beam ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub angle: f64,
    /// Signed distance from `(0.5, 0.5)` along the normal.
    pub shift: f64,
}

impl Ray {
    pub fn direction(&self) -> (f64, f64) {
        (self.angle.cos(), self.angle.sin())
    }

    pub fn normal(&self) -> (f64, f64) {
        (-self.angle.sin(), self.angle.cos())
    }

    /// The point of the ray closest to the image center.
    pub fn origin(&self) -> (f64, f64) {
        let (nx, ny) = self.normal();
        (0.5 + self.shift * nx, 0.5 + self.shift * ny)
    }
}

impl RadonGeometry {
    pub fn new(num_pixels: usize, num_shifts: usize, num_angles: usize) -> Result<Self> {
        if num_pixels == 0 || num_shifts == 0 || num_angles == 0 {
            return Err(SesopError::InvalidConfig(format!(
                "geometry needs pixels, shifts and angles >= 1, got {num_pixels}/{num_shifts}/{num_angles}"
            )));
        }
        Ok(RadonGeometry {
            num_pixels,
            num_shifts,
            num_angles,
        })
    }

    pub fn rows(&self) -> usize {
        self.num_shifts * self.num_angles
    }

    pub fn cols(&self) -> usize {
        self.num_pixels * self.num_pixels
    }

    pub fn angle(&self, a: usize) -> f64 {
        PI * a as f64 / self.num_angles as f64
    }

    pub fn shift(&self, s: usize) -> f64 {
        let width = 2.0 * FRAC_1_SQRT_2 / self.num_shifts as f64;
        -FRAC_1_SQRT_2 + (s as f64 + 0.5) * width
    }

    pub fn ray(&self, row: usize) -> Ray {
        Ray {
            angle: self.angle(row / self.num_shifts),
            shift: self.shift(row % self.num_shifts),
        }
    }
}

/// Directions with a component below this are treated as axis-parallel.
const PARALLEL_EPS: f64 = 1e-12;

/// Parameter interval `[τ₀, τ₁]` of the ray inside `[0,1]²`, if non-empty.
pub fn clip_to_unit_square(ray: &Ray) -> Option<(f64, f64)> {
    let (ox, oy) = ray.origin();
    let (dx, dy) = ray.direction();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d) in [(ox, dx), (oy, dy)] {
        if d.abs() < PARALLEL_EPS {
            if !(0.0..=1.0).contains(&o) {
                return None;
            }
        } else {
            let (a, b) = ((0.0 - o) / d, (1.0 - o) / d);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Intersection lengths of one ray with the pixels of an `n × n` grid,
/// as `(pixel index, length)` in traversal order.
pub fn trace_ray(ray: &Ray, n: usize) -> Vec<(usize, f64)> {
    let Some((t0, t1)) = clip_to_unit_square(ray) else {
        return Vec::new();
    };
    let (ox, oy) = ray.origin();
    let (dx, dy) = ray.direction();
    let h = 1.0 / n as f64;

    // Parameters at which the ray crosses vertical and horizontal grid lines.
    let crossings = |o: f64, d: f64| -> Vec<f64> {
        if d.abs() < PARALLEL_EPS {
            return Vec::new();
        }
        let (ta, tb) = (o + t0 * d, o + t1 * d);
        let (lo, hi) = (ta.min(tb), ta.max(tb));
        let first = (lo / h).floor() as i64 + 1;
        let last = (hi / h).ceil() as i64 - 1;
        let mut v: Vec<f64> = (first.max(1)..=last.min(n as i64 - 1))
            .map(|k| (k as f64 * h - o) / d)
            .filter(|t| *t > t0 && *t < t1)
            .collect();
        if d < 0.0 {
            v.reverse();
        }
        v
    };
    let xs = crossings(ox, dx);
    let ys = crossings(oy, dy);

    let mut params = Vec::with_capacity(xs.len() + ys.len() + 2);
    params.push(t0);
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        if j >= ys.len() || (i < xs.len() && xs[i] <= ys[j]) {
            params.push(xs[i]);
            i += 1;
        } else {
            params.push(ys[j]);
            j += 1;
        }
    }
    params.push(t1);

    let max_idx = n as f64 - 1.0;
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(params.len());
    for w in params.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-15 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let k = ((ox + tm * dx) * n as f64).floor().clamp(0.0, max_idx) as usize;
        let l = ((oy + tm * dy) * n as f64).floor().clamp(0.0, max_idx) as usize;
        let idx = l * n + k;
        match out.last_mut() {
            Some((last, acc)) if *last == idx => *acc += len,
            _ => out.push((idx, len)),
        }
    }
    out
}

/// Sparse system matrix whose row `i` holds the lengths of ray `i` through
/// each pixel.
pub fn build_radon_matrix(geom: &RadonGeometry) -> SparseOperator {
    let n = geom.num_pixels;
    let rows: Vec<Vec<(usize, f64)>> = (0..geom.rows())
        .into_par_iter()
        .map(|i| trace_ray(&geom.ray(i), n))
        .collect();
    SparseOperator::from_rows(geom.cols(), rows).expect("traced rows are within the image")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Counter-clockwise rotation of the first semi-axis, radians.
    pub rotation: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(
        center: (f64, f64),
        semi_axes: (f64, f64),
        rotation: f64,
        intensity: f64,
    ) -> Result<Self> {
        if !(semi_axes.0 > 0.0 && semi_axes.1 > 0.0) {
            return Err(SesopError::Domain(format!(
                "semi-axes must be positive, got {semi_axes:?}"
            )));
        }
        Ok(Ellipse {
            center,
            semi_axes,
            rotation,
            intensity,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.rotation.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.semi_axes.0).powi(2) + (v / self.semi_axes.1).powi(2) <= 1.0
    }

    /// Line integral of the ellipse's indicator times intensity along `ray`.
    pub fn line_integral(&self, ray: &Ray) -> f64 {
        let (nx, ny) = ray.normal();
        let offset = ray.shift + 0.5 * nx + 0.5 * ny - (self.center.0 * nx + self.center.1 * ny);
        let psi = ray.angle + 0.5 * PI - self.rotation;
        let (a, b) = self.semi_axes;
        let a2 = (a * psi.cos()).powi(2) + (b * psi.sin()).powi(2);
        if offset * offset >= a2 {
            return 0.0;
        }
        2.0 * self.intensity * a * b * (a2 - offset * offset).sqrt() / a2
    }
}

/// Shepp-Logan head phantom on `[−1,1]²`, as published by Shepp and Logan
/// (1974): intensity, semi-axes, center, rotation in degrees.
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [2.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.02, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.02, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.01, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.01, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.01, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.01, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.01, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.01, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// The ten phantom ellipses mapped into `[0,1]²`.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    SHEPP_LOGAN
        .iter()
        .map(|&[rho, a, b, x0, y0, phi]| Ellipse {
            center: ((x0 + 1.0) / 2.0, (y0 + 1.0) / 2.0),
            semi_axes: (a / 2.0, b / 2.0),
            rotation: phi.to_radians(),
            intensity: rho,
        })
        .collect()
}

/// Samples the summed ellipse intensities at the `n × n` pixel centers.
pub fn rasterize(ellipses: &[Ellipse], n: usize) -> Vec<f64> {
    let mut img = vec![0.0; n * n];
    for l in 0..n {
        let y = (l as f64 + 0.5) / n as f64;
        for k in 0..n {
            let x = (k as f64 + 0.5) / n as f64;
            img[l * n + k] = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
        }
    }
    img
}

/// Shepp-Logan phantom rasterized at `n × n` pixel centers.
pub fn shepp_logan(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SesopError::InvalidConfig(
            "phantom size must be >= 1".into(),
        ));
    }
    Ok(rasterize(&shepp_logan_ellipses(), n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub geometry: RadonGeometry,
    /// Angle-major, length `shifts · angles`.
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn get(&self, angle: usize, shift: usize) -> f64 {
        self.values[angle * self.geometry.num_shifts + shift]
    }
}

/// Exact line integrals of a sum of ellipses for every ray of `geom`.
pub fn analytic_sinogram(ellipses: &[Ellipse], geom: &RadonGeometry) -> Sinogram {
    let values = (0..geom.rows())
        .map(|i| {
            let ray = geom.ray(i);
            ellipses.iter().map(|e| e.line_integral(&ray)).sum()
        })
        .collect();
    Sinogram {
        geometry: *geom,
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProjection {
    /// `A x_ls`.
    pub values: Vec<f64>,
    /// Least-squares solution reached by the iteration.
    pub x_ls: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Projects `y` onto the range of `A` by conjugate gradients on
/// `AᵀA x = Aᵀy`, stopping once `‖Aᵀ(y − Ax)‖ ≤ tol · ‖Aᵀy‖`.
pub fn project_to_range<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<RangeProjection> {
    if !(tol > 0.0) {
        return Err(SesopError::InvalidConfig(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    if y.len() != a.rows() {
        return Err(SesopError::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "range projection data",
        });
    }
    let mut x = vec![0.0; a.cols()];
    let mut r = y.to_vec();
    let mut s = a.apply_adjoint(&r)?;
    let mut p = s.clone();
    let mut q = vec![0.0; a.rows()];
    let mut gamma = pairing(&s, &s);
    let threshold = tol * gamma.sqrt();
    let mut iterations = 0;
    let mut converged = gamma.sqrt() <= threshold;
    while !converged && iterations < max_iter {
        a.apply_into(&p, &mut q);
        let qq = pairing(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        a.apply_adjoint_into(&r, &mut s);
        let gamma_new = pairing(&s, &s);
        iterations += 1;
        if gamma_new.sqrt() <= threshold {
            converged = true;
            break;
        }
        let beta = gamma_new / gamma;
        p.iter_mut()
            .zip(&s)
            .for_each(|(pi, si)| *pi = si + beta * *pi);
        gamma = gamma_new;
    }
    let values = a.apply(&x)?;
    Ok(RangeProjection {
        values,
        x_ls: x,
        converged,
        iterations,
    })
}

/// `ỹ = y + δ ‖y‖/‖n‖ · n` with `n` uniform in `[−1,1]` drawn from `seed`.
pub fn add_noise(y: &[f64], delta: f64, seed: u64) -> Result<Vec<f64>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(SesopError::Domain(format!(
            "noise level must be >= 0, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(y.to_vec());
    }
    let ny = pairing(y, y).sqrt();
    if ny == 0.0 {
        return Err(SesopError::Domain(
            "cannot scale relative noise for zero data".into(),
        ));
    }
    let noise = uniform_symmetric(&mut seeded_rng(seed, STREAM_NOISE), y.len());
    let nn = pairing(&noise, &noise).sqrt();
    let f = delta * ny / nn;
    Ok(y.iter().zip(&noise).map(|(v, e)| v + f * e).collect())
}

/// Binary 8-bit graymap of `rows × width` values, min-max normalized,
/// first row on top.
pub fn pgm_bytes(values: &[f64], width: usize) -> Vec<u8> {
    let height = if width == 0 { 0 } else { values.len() / width };
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let span = hi - lo;
    out.extend(values.iter().map(|v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}

/// Graymap of an `n × n` image stored as `j = l·n + k`, drawn with the
/// largest `y` at the top.
pub fn image_pgm(values: &[f64], n: usize) -> Vec<u8> {
    let mut flipped = Vec::with_capacity(values.len());
    for l in (0..n).rev() {
        flipped.extend_from_slice(&values[l * n..(l + 1) * n]);
    }
    pgm_bytes(&flipped, n)
}

/// Comma-separated rows of `width` values, in storage order.
pub fn grid_csv(values: &[f64], width: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}
