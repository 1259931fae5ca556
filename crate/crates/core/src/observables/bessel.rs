//! Modified Bessel functions of the second kind, orders 0, 1 and 2.
//!
//! Below [`CROSSOVER`] the ascending series is summed in double-double
//! arithmetic: near the seam its terms exceed the result by a factor of
//! about `e^{2z}`, far more than plain doubles can absorb. Above it the
//! large-argument expansion is summed to its smallest term.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const CROSSOVER: f64 = 18.0;

const EULER_GAMMA: Dd = Dd(0.5772156649015329, -4.942915152430645e-18);
const LN_2: Dd = Dd(std::f64::consts::LN_2, 2.3190468138462996e-17);

/// `K_order(z)` for `order` in {0, 2}, the two orders used by the analysis.
pub fn bessel_k(order: u32, z: f64) -> Result<f64> {
    match order {
        0 => k0(z),
        2 => k2(z),
        _ => Err(Error::InvalidArgument(format!("order {order} not supported; use 0 or 2"))),
    }
}

pub fn k0(z: f64) -> Result<f64> {
    check(z)?;
    Ok(if z < CROSSOVER { k0_series(z) } else { k_asymptotic(0, z) })
}

pub fn k1(z: f64) -> Result<f64> {
    check(z)?;
    Ok(if z < CROSSOVER { k1_series(z) } else { k_asymptotic(1, z) })
}

/// From the upward recurrence `K2 = K0 + (2/z) K1`, whose terms are both
/// positive, so no cancellation occurs.
pub fn k2(z: f64) -> Result<f64> {
    Ok(k0(z)? + 2.0 / z * k1(z)?)
}

fn check(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Bessel K needs z > 0, got {z}")))
    }
}

/// Ascending series for `K0`:
/// `-(ln(z/2) + γ) I0(z) + Σ_{k≥1} H_k (z²/4)^k / (k!)²`.
pub fn k0_series(z: f64) -> f64 {
    let q = Dd::from(z).sqr().div_f(4.0);
    let log_term = dd_ln(z).sub(LN_2).add(EULER_GAMMA);
    let mut term = Dd::from(1.0);
    let mut i0 = Dd::from(1.0);
    let mut harmonic = Dd::from(0.0);
    let mut tail = Dd::from(0.0);
    for k in 1..400 {
        let kf = k as f64;
        term = term.mul(q).div_f(kf * kf);
        harmonic = harmonic.add(Dd::from(1.0).div_f(kf));
        i0 = i0.add(term);
        let contrib = term.mul(harmonic);
        tail = tail.add(contrib);
        if contrib.0.abs() < 1e-34 * tail.0.abs() && term.0.abs() < 1e-34 * i0.0.abs() {
            break;
        }
    }
    tail.sub(log_term.mul(i0)).to_f64()
}

/// Ascending series for `K1`:
/// `1/z + ln(z/2) I1(z) - (z/4) Σ_{k≥0} (ψ(k+1) + ψ(k+2)) (z²/4)^k / (k!(k+1)!)`.
pub fn k1_series(z: f64) -> f64 {
    let q = Dd::from(z).sqr().div_f(4.0);
    let ln_half = dd_ln(z).sub(LN_2);
    // ψ(k+1) = H_k - γ
    let mut term = Dd::from(1.0);
    let mut harmonic = Dd::from(0.0);
    let mut i1 = Dd::from(0.0);
    let mut psi_sum = Dd::from(0.0);
    for k in 0..400 {
        let kf = k as f64;
        if k > 0 {
            term = term.mul(q).div_f(kf * (kf + 1.0));
            harmonic = harmonic.add(Dd::from(1.0).div_f(kf));
        }
        let h_next = harmonic.add(Dd::from(1.0).div_f(kf + 1.0));
        let psi = harmonic.add(h_next).sub(EULER_GAMMA.mul_f(2.0));
        i1 = i1.add(term);
        let contrib = term.mul(psi);
        psi_sum = psi_sum.add(contrib);
        if k > 2 && contrib.0.abs() < 1e-34 * psi_sum.0.abs() && term.0.abs() < 1e-34 * i1.0.abs() {
            break;
        }
    }
    let half = Dd::from(z).div_f(2.0);
    let inv = Dd::from(1.0).div(Dd::from(z));
    inv.add(ln_half.mul(half).mul(i1))
        .sub(half.mul(psi_sum).div_f(2.0))
        .to_f64()
}

/// Large-argument expansion
/// `sqrt(π/2z) e^{-z} Σ_k a_k(ν) / z^k`, `a_k = Π_{j≤k} (4ν² - (2j-1)²) / (k! 8^k)`,
/// truncated before the terms start to grow.
pub fn k_asymptotic(order: u32, z: f64) -> f64 {
    (PI / (2.0 * z)).sqrt() * (-z).exp() * asymptotic_sum(order, z)
}

/// The bracketed sum of the large-argument expansion, `K_ν(z) e^z sqrt(2z/π)`.
pub fn asymptotic_sum(order: u32, z: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let j = (2 * k - 1) as f64;
        let next = term * (mu - j * j) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (t, f) = two_sum(self.1, o.1);
        let (s, e) = quick_two_sum(s, e + t);
        let (s, e) = quick_two_sum(s, e + f);
        Dd(s, e)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.0, o.0);
        let e = e + (self.0 * o.1 + self.1 * o.0);
        let (p, e) = quick_two_sum(p, e);
        Dd(p, e)
    }

    fn mul_f(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.0, b);
        let (p, e) = quick_two_sum(p, e + self.1 * b);
        Dd(p, e)
    }

    fn sqr(self) -> Dd {
        self.mul(self)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.sub(o.mul_f(q1));
        let q2 = r.0 / o.0;
        let r = r.sub(o.mul_f(q2));
        let q3 = r.0 / o.0;
        let (q, e) = quick_two_sum(q1, q2);
        Dd(q, e).add(Dd::from(q3))
    }

    fn div_f(self, b: f64) -> Dd {
        self.div(Dd::from(b))
    }
}

/// `ln x` to double-double accuracy: `x = 2^e m` with `m` in `[1/√2, √2)`,
/// then `ln m = 2 atanh((m-1)/(m+1))` by its odd power series.
fn dd_ln(x: f64) -> Dd {
    let mut e = x.log2().floor() as i32;
    let mut m = x / 2f64.powi(e);
    if m > std::f64::consts::SQRT_2 {
        m /= 2.0;
        e += 1;
    }
    let m = Dd::from(m);
    let t = m.sub(Dd::from(1.0)).div(m.add(Dd::from(1.0)));
    let t2 = t.sqr();
    let mut power = t;
    let mut sum = t;
    for k in 1..60 {
        power = power.mul(t2);
        let term = power.div_f((2 * k + 1) as f64);
        sum = sum.add(term);
        if term.0.abs() < 1e-34 * sum.0.abs().max(1e-300) {
            break;
        }
    }
    sum.mul_f(2.0).add(LN_2.mul_f(e as f64))
}
