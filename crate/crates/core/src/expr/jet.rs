use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value of a scalar function of `(x, u)` with its first and second partials.
///
/// Mixed partials are symmetric, so a single `dxu` serves both orders.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub du: f64,
    pub dxx: f64,
    pub dxu: f64,
    pub duu: f64,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 { v, ..Default::default() }
    }

    /// Seed for the variable `x`.
    pub fn var_x(v: f64) -> Self {
        Jet2 { v, dx: 1.0, ..Default::default() }
    }

    /// Seed for the variable `u`.
    pub fn var_u(v: f64) -> Self {
        Jet2 { v, du: 1.0, ..Default::default() }
    }

    pub fn is_constant(&self) -> bool {
        self.dx == 0.0 && self.du == 0.0 && self.dxx == 0.0 && self.dxu == 0.0 && self.duu == 0.0
    }

    /// Composition `f ∘ self` given `f`, `f'`, `f''` at `self.v`.
    #[inline]
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Jet2 {
            v: f0,
            dx: f1 * self.dx,
            du: f1 * self.du,
            dxx: f2 * self.dx * self.dx + f1 * self.dxx,
            dxu: f2 * self.dx * self.du + f1 * self.dxu,
            duu: f2 * self.du * self.du + f1 * self.duu,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Jet2 {
            v: k * self.v,
            dx: k * self.dx,
            du: k * self.du,
            dxx: k * self.dxx,
            dxu: k * self.dxu,
            duu: k * self.duu,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let d = 1.0 - t * t;
        self.chain(t, d, -2.0 * t * d)
    }

    /// Integer power by repeated multiplication; valid for negative bases.
    pub fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut k = n.unsigned_abs();
        let mut acc = Jet2::constant(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            k >>= 1;
            if k > 0 {
                base = base * base;
            }
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    /// Real power with a constant exponent; requires a positive base.
    pub fn powf(self, p: f64) -> Self {
        let b = self.v;
        self.chain(b.powf(p), p * b.powf(p - 1.0), p * (p - 1.0) * b.powf(p - 2.0))
    }

    /// `self^e` for a non-constant exponent, as `exp(e·ln self)`.
    pub fn pow(self, e: Jet2) -> Self {
        (e * self.ln()).exp()
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    #[inline]
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            du: self.du + o.du,
            dxx: self.dxx + o.dxx,
            dxu: self.dxu + o.dxu,
            duu: self.duu + o.duu,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    #[inline]
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            du: self.du - o.du,
            dxx: self.dxx - o.dxx,
            dxu: self.dxu - o.dxu,
            duu: self.duu - o.duu,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    #[inline]
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            du: self.du * o.v + self.v * o.du,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxu: self.dxu * o.v + self.dx * o.du + self.du * o.dx + self.v * o.dxu,
            duu: self.duu * o.v + 2.0 * self.du * o.du + self.v * o.duu,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    #[inline]
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}
