//! Arithmetic in finite-dimensional ℓp spaces.
//!
//! An [`LpSpec`] fixes the norm exponent `p` and the gauge power of the
//! duality mapping independently. The duality mapping with gauge
//! `t ↦ t^(power-1)` is the gradient of `(1/power)‖·‖_p^power`; on ℓp with
//! `p > 1` it is single valued and given componentwise by
//!
//! ```text
//! J(x)_i = ‖x‖_p^(power-1) · sign(x_i) · (|x_i| / ‖x‖_p)^(p-1)
//! ```
//!
//! The dual space of `LpSpec(d, p, power)` is `LpSpec(d, p*, power*)` and its
//! duality mapping inverts `J`.

use crate::error::{Result, SesopError};

/// A concrete ℓp space of dimension `dim` together with the gauge power of
/// its duality mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpec {
    dim: usize,
    p: f64,
    power: f64,
}

impl LpSpec {
    pub fn new(dim: usize, p: f64, power: f64) -> Result<Self> {
        check_exponent(p, "norm exponent")?;
        check_exponent(power, "gauge power")?;
        Ok(LpSpec { dim, p, power })
    }

    /// Space with the gauge power used throughout the experiments, `max(p, 2)`.
    pub fn with_default_power(dim: usize, p: f64) -> Result<Self> {
        LpSpec::new(dim, p, p.max(2.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// The dual space `ℓ_{p*}` with conjugate gauge power.
    pub fn dual(&self) -> LpSpec {
        LpSpec {
            dim: self.dim,
            p: conjugate(self.p),
            power: conjugate(self.power),
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        norm(v, self.p)
    }

    /// Applies the duality mapping of this space to a raw slice.
    pub fn duality_map_slice(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        duality_map_into(x, self.p, self.power, &mut out);
        out
    }
}

fn check_exponent(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() || value <= 1.0 {
        return Err(SesopError::Domain(format!(
            "{what} must be a finite real > 1, got {value}"
        )));
    }
    Ok(())
}

#[inline]
fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Returns `q` with `1/p + 1/q = 1`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    check_exponent(p, "exponent")?;
    Ok(conjugate(p))
}

/// ℓp norm, evaluated with max-scaling so large exponents do not overflow.
pub fn norm(v: &[f64], p: f64) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Checked variant of [`norm`] rejecting non-finite input.
pub fn lp_norm(v: &[f64], p: f64) -> Result<f64> {
    check_exponent(p, "norm exponent")?;
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(SesopError::Domain(format!("non-finite entry {bad}")));
    }
    Ok(norm(v, p))
}

/// Writes the duality mapping of `ℓp` with gauge power `power` into `out`.
pub fn duality_map_into(x: &[f64], p: f64, power: f64, out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    let nx = norm(x, p);
    if nx == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let outer = nx.powf(power - 1.0);
    if p == 2.0 {
        let f = outer / nx;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = f * xi;
        }
        return;
    }
    let e = p - 1.0;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = if xi == 0.0 {
            0.0
        } else {
            outer * xi.signum() * (xi.abs() / nx).powf(e)
        };
    }
}

/// Dual pairing `⟨u, v⟩` of a dual and a primal element.
#[inline]
pub fn pairing(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Element of a primal space `X = ℓp`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalVector {
    values: Vec<f64>,
    space: LpSpec,
}

/// Element of a dual space. `space` is the dual spec itself, i.e. the space
/// the values are measured in.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    values: Vec<f64>,
    space: LpSpec,
}

macro_rules! vector_common {
    ($ty:ident) => {
        impl $ty {
            pub fn new(values: Vec<f64>, space: LpSpec) -> Result<Self> {
                if values.len() != space.dim() {
                    return Err(SesopError::DimensionMismatch {
                        expected: space.dim(),
                        actual: values.len(),
                        context: stringify!($ty),
                    });
                }
                if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
                    return Err(SesopError::Domain(format!(
                        "{} entry {bad} is not finite",
                        stringify!($ty)
                    )));
                }
                Ok($ty { values, space })
            }

            pub fn zeros(space: LpSpec) -> Self {
                $ty {
                    values: vec![0.0; space.dim()],
                    space,
                }
            }

            pub(crate) fn from_raw(values: Vec<f64>, space: LpSpec) -> Self {
                debug_assert_eq!(values.len(), space.dim());
                $ty { values, space }
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn into_values(self) -> Vec<f64> {
                self.values
            }

            pub fn space(&self) -> LpSpec {
                self.space
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            /// Norm in the space the vector lives in.
            pub fn norm(&self) -> f64 {
                norm(&self.values, self.space.p())
            }
        }
    };
}

vector_common!(PrimalVector);
vector_common!(DualVector);

impl DualVector {
    /// Dual pairing with a primal element.
    pub fn pair(&self, x: &PrimalVector) -> f64 {
        pairing(&self.values, &x.values)
    }

    /// Duality mapping of the dual space, which maps back into the primal
    /// space and inverts [`duality_map`].
    pub fn to_primal(&self) -> PrimalVector {
        let s = self.space;
        PrimalVector {
            values: s.duality_map_slice(&self.values),
            space: s.dual(),
        }
    }
}

/// Duality mapping `J: X → X*` with the space's gauge power. `J(0) = 0`.
pub fn duality_map(x: &PrimalVector) -> DualVector {
    let s = x.space;
    DualVector::from_raw(s.duality_map_slice(&x.values), s.dual())
}

/// Bregman distance `Δ(x, y)` of `f = (1/power)‖·‖^power` via the identity
/// `Δ(x,y) = (1/power*)‖x‖^power − ⟨J(x), y⟩ + (1/power)‖y‖^power`.
pub fn bregman_distance(x: &PrimalVector, y: &PrimalVector) -> Result<f64> {
    if x.space != y.space {
        return Err(SesopError::Domain(
            "Bregman distance between different spaces".into(),
        ));
    }
    Ok(bregman_slices(&x.values, &y.values, x.space))
}

pub(crate) fn bregman_slices(x: &[f64], y: &[f64], space: LpSpec) -> f64 {
    let r = space.power();
    let rs = conjugate(r);
    let jx = space.duality_map_slice(x);
    let d = norm(x, space.p()).powf(r) / rs - pairing(&jx, y) + norm(y, space.p()).powf(r) / r;
    d.max(0.0)
}

/// Constants of the Xu-Roach smoothness inequality for exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XuRoachConstants {
    pub g: f64,
    pub k: f64,
    pub c: f64,
}

/// `τ₀ = (√339 − 18) / 30`.
pub fn xu_roach_tau0() -> f64 {
    (339.0_f64.sqrt() - 18.0) / 30.0
}

/// Infinite-product constant `c`, truncated once a factor differs from one
/// by less than `1e-15`.
pub fn xu_roach_c() -> f64 {
    let t0 = xu_roach_tau0();
    let mut prod = 1.0;
    let mut j = 1;
    loop {
        let term = 15.0 * t0 / 2f64.powi(j + 2);
        if term < 1e-15 {
            break;
        }
        prod *= 1.0 + term;
        j += 1;
    }
    4.0 * t0 / ((1.0 + t0 * t0).sqrt() - 1.0) * prod
}

/// `K_q`, `G_q = max(8, 64 c / K_q)` and `c` for the exponent `q` and its
/// conjugate `q*`.
pub fn xu_roach_constants(q: f64) -> Result<XuRoachConstants> {
    let qs = conjugate_exponent(q)?;
    let s3 = 3.0_f64.sqrt();
    let k = 4.0
        * (2.0 + s3)
        * [
            (0.5 * q * (q - 1.0)).min(1.0),
            (0.5 * q).min(1.0) * (q - 1.0),
            (q - 1.0) * (1.0 - (s3 - 1.0).powf(qs)),
            1.0 - (1.0 + (2.0 - s3) * qs).powf(1.0 - q),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let c = xu_roach_c();
    Ok(XuRoachConstants {
        g: (64.0 * c / k).max(8.0),
        k,
        c,
    })
}

/// Analytic upper bound of the modulus of smoothness of `ℓq`:
/// `τ^q/q` for `1 < q ≤ 2` and `(q−1)τ²/2` for `q ≥ 2`.
pub fn modulus_smoothness_bound(tau: f64, q: f64) -> f64 {
    if q <= 2.0 {
        tau.powf(q) / q
    } else {
        0.5 * (q - 1.0) * tau * tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize, p: f64, power: f64) -> LpSpec {
        LpSpec::new(dim, p, power).unwrap()
    }

    #[test]
    fn conjugate_exponent_examples() {
        assert_eq!(conjugate_exponent(2.0).unwrap(), 2.0);
        assert!((conjugate_exponent(1.5).unwrap() - 3.0).abs() < 1e-14);
        assert!((conjugate_exponent(1.2).unwrap() - 6.0).abs() < 1e-12);
        assert!(conjugate_exponent(1.0).is_err());
        assert!(conjugate_exponent(0.5).is_err());
        assert!(conjugate_exponent(f64::NAN).is_err());
        assert!(conjugate_exponent(f64::INFINITY).is_err());
    }

    #[test]
    fn spec_rejects_l1_and_linf() {
        assert!(LpSpec::new(3, 1.0, 2.0).is_err());
        assert!(LpSpec::new(3, f64::INFINITY, 2.0).is_err());
        assert!(LpSpec::new(3, 2.0, 1.0).is_err());
        let d = spec(4, 1.5, 2.0).dual();
        assert!((d.p() - 3.0).abs() < 1e-14);
        assert_eq!(d.power(), 2.0);
        assert_eq!(d.dim(), 4);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(lp_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        let v = lp_norm(&[1.0, 1.0, 1.0], 3.0).unwrap();
        assert!((v - 3f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(lp_norm(&[0.0, 0.0], 1.7).unwrap(), 0.0);
        assert!(lp_norm(&[1.0, f64::NAN], 2.0).is_err());
        // no overflow for large exponents
        let big = norm(&[1e200, 1e200], 10.0);
        assert!((big / 1e200 - 2f64.powf(0.1)).abs() < 1e-14);
    }

    #[test]
    fn duality_map_hilbert_identity_and_zero() {
        let s = spec(2, 2.0, 2.0);
        let x = PrimalVector::new(vec![1.0, -2.0], s).unwrap();
        assert_eq!(duality_map(&x).values(), &[1.0, -2.0]);
        let z = PrimalVector::zeros(spec(3, 1.7, 3.0));
        assert!(duality_map(&z).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duality_map_matches_finite_difference_gradient() {
        let s = spec(2, 1.5, 2.0);
        let x = [1.0, 1.0];
        let j = s.duality_map_slice(&x);
        let f = |v: &[f64]| 0.5 * norm(v, 1.5).powi(2);
        for i in 0..2 {
            let h = 1e-6;
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - j[i]).abs() / j[i].abs() <= 1e-6, "{fd} vs {}", j[i]);
        }
    }

    #[test]
    fn bregman_examples() {
        let s = spec(2, 2.0, 2.0);
        let x = PrimalVector::new(vec![1.0, 0.0], s).unwrap();
        let y = PrimalVector::new(vec![0.0, 1.0], s).unwrap();
        assert!((bregman_distance(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bregman_distance(&x, &x).unwrap(), 0.0);

        // ℓ3 with gauge power 3 against f(y) - f(x) - <f'(x), y - x>
        let s3 = spec(2, 3.0, 3.0);
        let x = PrimalVector::new(vec![1.0, 0.0], s3).unwrap();
        let y = PrimalVector::new(vec![0.0, 1.0], s3).unwrap();
        let f = |v: &[f64]| norm(v, 3.0).powi(3) / 3.0;
        let jx = s3.duality_map_slice(x.values());
        let direct = f(y.values())
            - f(x.values())
            - pairing(
                &jx,
                &[y.values()[0] - x.values()[0], y.values()[1] - x.values()[1]],
            );
        assert!((bregman_distance(&x, &y).unwrap() - direct).abs() < 1e-12);

        let other = PrimalVector::zeros(spec(2, 1.5, 2.0));
        assert!(bregman_distance(&x, &other).is_err());
    }

    #[test]
    fn xu_roach_values() {
        let t0 = xu_roach_tau0();
        // 18.411952... - 18 = 0.411952..., / 30
        assert!((t0 - 0.0137318).abs() < 1e-6, "{t0}");
        let c = xu_roach_constants(2.0).unwrap();
        // each argument of the min at q = q* = 2, evaluated separately
        let s3 = 3f64.sqrt();
        let a1 = 1.0_f64; // min(1, 1)
        let a2 = 1.0_f64; // min(1, 1) * 1
        let a3 = 1.0 - (s3 - 1.0) * (s3 - 1.0);
        let a4 = 1.0 - 1.0 / (1.0 + 2.0 * (2.0 - s3));
        let k = 4.0 * (2.0 + s3) * a1.min(a2).min(a3).min(a4);
        assert!((c.k - k).abs() < 1e-14);
        for q in [1.1, 1.5, 2.0, 3.0, 10.0] {
            let c = xu_roach_constants(q).unwrap();
            assert!(c.g >= 8.0);
            assert!(c.k > 0.0 && c.c > 0.0);
        }
    }

    #[test]
    fn modulus_bound_examples() {
        assert_eq!(modulus_smoothness_bound(1.0, 2.0), 0.5);
        let v = modulus_smoothness_bound(0.1, 1.5);
        assert!((v - 0.021082).abs() < 1e-6);
        for q in [1.2, 2.0, 4.0] {
            let mut prev = 0.0;
            for k in 1..100 {
                let v = modulus_smoothness_bound(k as f64 * 0.05, q);
                assert!(v >= prev);
                prev = v;
            }
        }
    }
}
