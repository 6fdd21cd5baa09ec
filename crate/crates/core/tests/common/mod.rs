//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver paths it is used to check.

#![allow(dead_code)]

use num_complex::Complex64;

/// Composite Simpson rule on `n` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn simpson_complex(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Closed-form free Gaussian packet in units `hbar = m = 1`, started as
/// `exp(-(x - x_c)^2 / 4 sigma^2 + i p_c x)`, normalized.
pub fn free_gaussian(x: f64, t: f64, x_c: f64, p_c: f64, sigma: f64) -> Complex64 {
    let tau = Complex64::new(1.0, t / (2.0 * sigma * sigma));
    let d = x - x_c - p_c * t;
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
    let phase = Complex64::new(0.0, p_c * x - 0.5 * p_c * p_c * t);
    norm / tau.sqrt() * (-(d * d) / (4.0 * sigma * sigma * tau) + phase).exp()
}

/// Windowed carrier projection `(1/w) int_{x0}^{x0+w} exp(-i p0 x) psi(x) dx`
/// by Simpson quadrature of a continuous wave function (`hbar = 1`).
pub fn windowed_projection(psi: impl Fn(f64) -> Complex64, x0: f64, w: f64, p0: f64, n: usize) -> Complex64 {
    simpson_complex(|x| psi(x) * Complex64::from_polar(1.0, -p0 * x), x0, x0 + w, n) / w
}

/// `sum_sigma sgn(sigma) prod_i m[i][sigma(i)]` (or without the sign) by
/// explicit enumeration of permutations.
pub fn leibniz(m: &[Vec<Complex64>], signed: bool) -> Complex64 {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    permute(&mut perm, 0, &mut |p| {
        let mut term = Complex64::new(1.0, 0.0);
        for (i, &j) in p.iter().enumerate() {
            term *= m[i][j];
        }
        if signed && parity(p) {
            acc -= term;
        } else {
            acc += term;
        }
    });
    acc
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// True for odd permutations.
fn parity(p: &[usize]) -> bool {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

/// Dense finite-difference integrator for
/// `d rho/dt = -(p/m) d rho/dx + U'(x) d rho/dp` on cell centres.
///
/// Second-order upwind differences, zero inflow outside the box, and the
/// three-stage strong-stability-preserving Runge-Kutta scheme.
pub struct UpwindLiouville {
    pub x_lo: f64,
    pub dx: f64,
    pub nx: usize,
    pub p_lo: f64,
    pub dp: f64,
    pub np: usize,
    pub mass: f64,
}

impl UpwindLiouville {
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_lo + (j as f64 + 0.5) * self.dp
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nx * self.np);
        for i in 0..self.nx {
            for j in 0..self.np {
                out.push(f(self.x(i), self.p(j)));
            }
        }
        out
    }

    fn rhs(&self, rho: &[f64], force: &dyn Fn(f64) -> f64, out: &mut [f64]) {
        let (nx, np) = (self.nx as isize, self.np as isize);
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx || j >= np {
                0.0
            } else {
                rho[(i * np + j) as usize]
            }
        };
        let upwind = |m2: f64, m1: f64, c: f64, p1: f64, p2: f64, v: f64, h: f64| -> f64 {
            if v > 0.0 {
                v * (3.0 * c - 4.0 * m1 + m2) / (2.0 * h)
            } else {
                v * (-3.0 * c + 4.0 * p1 - p2) / (2.0 * h)
            }
        };
        for i in 0..nx {
            let fx = force(self.x(i as usize));
            for j in 0..np {
                let vx = self.p(j as usize) / self.mass;
                let c = at(i, j);
                let ddx = upwind(at(i - 2, j), at(i - 1, j), c, at(i + 1, j), at(i + 2, j), vx, self.dx);
                let ddp = upwind(at(i, j - 2), at(i, j - 1), c, at(i, j + 1), at(i, j + 2), fx, self.dp);
                out[(i * np + j) as usize] = -ddx - ddp;
            }
        }
    }

    /// Advances `rho` by `t` with the force `F(x) = -U'(x)`.
    pub fn evolve(&self, rho: &mut [f64], force: impl Fn(f64) -> f64, t: f64, cfl: f64) {
        let vmax = (self.p_lo.abs().max((self.p_lo + self.np as f64 * self.dp).abs())) / self.mass;
        let fmax = (0..self.nx).map(|i| force(self.x(i)).abs()).fold(0.0, f64::max);
        let h = cfl / (vmax / self.dx + fmax / self.dp);
        let steps = (t / h).ceil() as usize;
        let h = t / steps as f64;
        let n = rho.len();
        let (mut k, mut s1, mut s2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..steps {
            self.rhs(rho, &force, &mut k);
            for i in 0..n {
                s1[i] = rho[i] + h * k[i];
            }
            self.rhs(&s1, &force, &mut k);
            for i in 0..n {
                s2[i] = 0.75 * rho[i] + 0.25 * (s1[i] + h * k[i]);
            }
            self.rhs(&s2, &force, &mut k);
            for i in 0..n {
                rho[i] = rho[i] / 3.0 + 2.0 / 3.0 * (s2[i] + h * k[i]);
            }
        }
    }

    /// Averages `factor x factor` blocks of fine cells.
    pub fn coarsen(&self, rho: &[f64], factor: usize) -> Vec<f64> {
        let (cx, cp) = (self.nx / factor, self.np / factor);
        let mut out = vec![0.0; cx * cp];
        for i in 0..self.nx {
            for j in 0..self.np {
                out[(i / factor) * cp + j / factor] += rho[i * self.np + j];
            }
        }
        let w = (factor * factor) as f64;
        out.iter().map(|v| v / w).collect()
    }
}
