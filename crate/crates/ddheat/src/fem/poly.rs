//! Dense bivariate polynomials in monomial form.
//!
//! Basis construction for the reference/physical elements works on exact
//! polynomial coefficients, so products, derivatives and triangle integrals
//! stay free of sampling error. Monomials `x^a y^b` are ordered by total
//! degree, then by the power of `y`.

/// Number of monomials of total degree <= deg.
#[inline]
pub fn n_monomials(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Index of the monomial `x^a y^b` in the dense layout.
#[inline]
pub fn mono_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exact integral of `x^a y^b` over the reference triangle
/// {x >= 0, y >= 0, x + y <= 1}: a! b! / (a + b + 2)!.
pub fn tri_monomial_integral(a: usize, b: usize) -> f64 {
    // a!b!/(a+b+2)! computed as a product of ratios to avoid overflow:
    // prod_{i=1..b} i/(a+i) = a!b!/(a+b)!
    let mut val = 1.0;
    for i in 1..=b {
        val *= i as f64 / (a + i) as f64;
    }
    val / ((a + b + 1) as f64 * (a + b + 2) as f64)
}

/// A polynomial in two variables with dense monomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    pub deg: usize,
    pub coef: Vec<f64>,
}

impl Poly2 {
    pub fn zero(deg: usize) -> Self {
        Poly2 {
            deg,
            coef: vec![0.0; n_monomials(deg)],
        }
    }

    /// The monomial `x^a y^b`.
    pub fn monomial(a: usize, b: usize) -> Self {
        let mut p = Poly2::zero(a + b);
        p.coef[mono_index(a, b)] = 1.0;
        p
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly2::zero(0);
        p.coef[0] = c;
        p
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        let mut idx = 0;
        for d in 0..=self.deg {
            for b in 0..=d {
                let a = d - b;
                let c = self.coef[idx];
                if c != 0.0 {
                    sum += c * x.powi(a as i32) * y.powi(b as i32);
                }
                idx += 1;
            }
        }
        sum
    }

    pub fn dx(&self) -> Poly2 {
        let deg = self.deg.saturating_sub(1);
        let mut out = Poly2::zero(deg);
        for d in 0..=self.deg {
            for b in 0..=d {
                let a = d - b;
                if a >= 1 {
                    out.coef[mono_index(a - 1, b)] += self.coef[mono_index(a, b)] * a as f64;
                }
            }
        }
        out
    }

    pub fn dy(&self) -> Poly2 {
        let deg = self.deg.saturating_sub(1);
        let mut out = Poly2::zero(deg);
        for d in 0..=self.deg {
            for b in 0..=d {
                let a = d - b;
                if b >= 1 {
                    out.coef[mono_index(a, b - 1)] += self.coef[mono_index(a, b)] * b as f64;
                }
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero(self.deg + other.deg);
        for d1 in 0..=self.deg {
            for b1 in 0..=d1 {
                let a1 = d1 - b1;
                let c1 = self.coef[mono_index(a1, b1)];
                if c1 == 0.0 {
                    continue;
                }
                for d2 in 0..=other.deg {
                    for b2 in 0..=d2 {
                        let a2 = d2 - b2;
                        let c2 = other.coef[mono_index(a2, b2)];
                        if c2 != 0.0 {
                            out.coef[mono_index(a1 + a2, b1 + b2)] += c1 * c2;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Poly2, s: f64) {
        if other.deg > self.deg {
            let mut coef = vec![0.0; n_monomials(other.deg)];
            coef[..self.coef.len()].copy_from_slice(&self.coef);
            self.coef = coef;
            self.deg = other.deg;
        }
        for d in 0..=other.deg {
            for b in 0..=d {
                let i = mono_index(d - b, b);
                self.coef[i] += s * other.coef[i];
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Poly2 {
        Poly2 {
            deg: self.deg,
            coef: self.coef.iter().map(|c| c * s).collect(),
        }
    }

    /// Exact integral over the reference triangle.
    pub fn tri_integral(&self) -> f64 {
        let mut sum = 0.0;
        let mut idx = 0;
        for d in 0..=self.deg {
            for b in 0..=d {
                let a = d - b;
                let c = self.coef[idx];
                if c != 0.0 {
                    sum += c * tri_monomial_integral(a, b);
                }
                idx += 1;
            }
        }
        sum
    }

    /// Largest total degree with a coefficient above `tol` in magnitude.
    pub fn effective_degree(&self, tol: f64) -> usize {
        let mut deg = 0;
        let mut idx = 0;
        for d in 0..=self.deg {
            for _ in 0..=d {
                if self.coef[idx].abs() > tol {
                    deg = d;
                }
                idx += 1;
            }
        }
        deg
    }
}
