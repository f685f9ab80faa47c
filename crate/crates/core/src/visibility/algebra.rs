//! Affine and quadratic forms in the complex displacement λ.
//!
//! Every λ-dependent quantity in the overlap is at most quadratic in the
//! stacked vector z = (λ, λ*). Affine vectors carry `c + L z`, scalar forms
//! carry `c + lᵀz + zᵀ Q z` with symmetric Q.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Swaps the λ and λ* halves of the last axis (columns).
fn swap_cols(m: &CMatrix, modes: usize) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    out.columns_mut(0, modes).copy_from(&m.columns(modes, modes));
    out.columns_mut(modes, modes).copy_from(&m.columns(0, modes));
    out
}

fn swap_vec(v: &CVector, modes: usize) -> CVector {
    let mut out = CVector::zeros(v.len());
    out.rows_mut(0, modes).copy_from(&v.rows(modes, modes));
    out.rows_mut(modes, modes).copy_from(&v.rows(0, modes));
    out
}

#[derive(Debug, Clone)]
pub struct Affine {
    pub c: CVector,
    pub lin: CMatrix,
    modes: usize,
}

impl Affine {
    pub fn constant(c: CVector, modes: usize) -> Self {
        let r = c.len();
        Affine {
            c,
            lin: CMatrix::zeros(r, 2 * modes),
            modes,
        }
    }

    /// λ itself, optionally multiplied elementwise by a phase per mode.
    pub fn lambda(phase: &CVector) -> Self {
        let m = phase.len();
        let mut lin = CMatrix::zeros(m, 2 * m);
        for j in 0..m {
            lin[(j, j)] = phase[j];
        }
        Affine {
            c: CVector::zeros(m),
            lin,
            modes: m,
        }
    }

    pub fn conj(&self) -> Self {
        Affine {
            c: self.c.map(|x| x.conj()),
            lin: swap_cols(&self.lin, self.modes).map(|x| x.conj()),
            modes: self.modes,
        }
    }

    pub fn add(&self, o: &Affine) -> Self {
        Affine {
            c: &self.c + &o.c,
            lin: &self.lin + &o.lin,
            modes: self.modes,
        }
    }

    pub fn sub(&self, o: &Affine) -> Self {
        Affine {
            c: &self.c - &o.c,
            lin: &self.lin - &o.lin,
            modes: self.modes,
        }
    }

    /// Left multiplication by a matrix.
    pub fn apply(&self, m: &CMatrix) -> Self {
        Affine {
            c: m * &self.c,
            lin: m * &self.lin,
            modes: self.modes,
        }
    }

    pub fn scale_rows(&self, s: &CVector) -> Self {
        let mut out = self.clone();
        for r in 0..s.len() {
            out.c[r] *= s[r];
            for k in 0..out.lin.ncols() {
                out.lin[(r, k)] *= s[r];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Affine {
            c: self.c.map(|x| x * s),
            lin: self.lin.map(|x| x * s),
            modes: self.modes,
        }
    }

    pub fn stack(a: &Affine, b: &Affine) -> Self {
        let (ra, rb) = (a.c.len(), b.c.len());
        let cols = a.lin.ncols();
        let mut c = CVector::zeros(ra + rb);
        c.rows_mut(0, ra).copy_from(&a.c);
        c.rows_mut(ra, rb).copy_from(&b.c);
        let mut lin = CMatrix::zeros(ra + rb, cols);
        lin.rows_mut(0, ra).copy_from(&a.lin);
        lin.rows_mut(ra, rb).copy_from(&b.lin);
        Affine {
            c,
            lin,
            modes: a.modes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Quadratic {
    pub c: Complex64,
    pub lin: CVector,
    pub quad: CMatrix,
    modes: usize,
}

impl Quadratic {
    pub fn zero(modes: usize) -> Self {
        Quadratic {
            c: Complex64::new(0.0, 0.0),
            lin: CVector::zeros(2 * modes),
            quad: CMatrix::zeros(2 * modes, 2 * modes),
            modes,
        }
    }

    /// xᵀ W y for affine vectors x, y.
    pub fn bilinear(x: &Affine, w: &CMatrix, y: &Affine) -> Self {
        let wy = w * &y.c;
        let wtx = w.transpose() * &x.c;
        let c = x.c.dot(&wy);
        let lin = x.lin.transpose() * wy + y.lin.transpose() * wtx;
        let q = x.lin.transpose() * w * &y.lin;
        let quad = (&q + q.transpose()).map(|z| z * 0.5);
        Quadratic {
            c,
            lin,
            quad,
            modes: x.modes,
        }
    }

    /// Σ_j x_j y_j.
    pub fn dot(x: &Affine, y: &Affine) -> Self {
        let n = x.c.len();
        Self::bilinear(x, &CMatrix::identity(n, n), y)
    }

    pub fn conj(&self) -> Self {
        let m = self.modes;
        let q = swap_cols(&self.quad, m);
        let q = swap_cols(&q.transpose(), m).transpose();
        Quadratic {
            c: self.c.conj(),
            lin: swap_vec(&self.lin, m).map(|x| x.conj()),
            quad: q.map(|x| x.conj()),
            modes: m,
        }
    }

    pub fn add(&self, o: &Quadratic) -> Self {
        Quadratic {
            c: self.c + o.c,
            lin: &self.lin + &o.lin,
            quad: &self.quad + &o.quad,
            modes: self.modes,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Quadratic {
            c: self.c * s,
            lin: self.lin.map(|x| x * s),
            quad: self.quad.map(|x| x * s),
            modes: self.modes,
        }
    }

    /// Im of the form, i.e. (q − q*)/(2i).
    pub fn imag(&self) -> Self {
        self.add(&self.conj().scale(Complex64::new(-1.0, 0.0)))
            .scale(Complex64::new(0.0, -0.5))
    }

    /// Value at a given λ.
    pub fn eval(&self, lambda: &CVector) -> Complex64 {
        let m = self.modes;
        let mut z = CVector::zeros(2 * m);
        for j in 0..m {
            z[j] = lambda[j];
            z[m + j] = lambda[j].conj();
        }
        self.c + self.lin.dot(&z) + z.dot(&(&self.quad * &z))
    }
}

/// Coefficients in the real parametrization λ_j = x_j + i y_j, restricted to
/// the listed modes: returns (linear, quadratic) over w = (x_sel, y_sel).
pub fn to_real_imag(q: &Quadratic, selected: &[usize]) -> (CVector, CMatrix) {
    let m = q.modes;
    let h = selected.len();
    // z = P w with ∂λ_j/∂x_j = 1, ∂λ_j/∂y_j = i, ∂λ*_j/∂y_j = −i
    let mut p = CMatrix::zeros(2 * m, 2 * h);
    for (a, &j) in selected.iter().enumerate() {
        p[(j, a)] = Complex64::new(1.0, 0.0);
        p[(m + j, a)] = Complex64::new(1.0, 0.0);
        p[(j, h + a)] = I;
        p[(m + j, h + a)] = -I;
    }
    let lin = p.transpose() * &q.lin;
    let quad = p.transpose() * &q.quad * &p;
    (lin, quad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn forms_evaluate_like_direct_arithmetic() {
        let phase = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let lam = Affine::lambda(&phase);
        let k = Affine::constant(CVector::from_vec(vec![c(0.3, -0.1), c(-0.2, 0.5)]), 2);
        let x = lam.add(&k);
        let w = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.1), c(0.2, 0.0), c(0.2, 0.0), c(-0.3, 0.4)]);
        let form = Quadratic::bilinear(&x.conj(), &w, &x);
        let l = CVector::from_vec(vec![c(0.7, -0.2), c(-0.4, 0.9)]);
        let xv = CVector::from_vec(vec![l[0] * phase[0] + k.c[0], l[1] * phase[1] + k.c[1]]);
        let xc = xv.map(|z| z.conj());
        let direct = xc.dot(&(&w * &xv));
        assert!((form.eval(&l) - direct).norm() < 1e-14);

        let im = form.imag();
        assert!((im.eval(&l) - c(direct.im, 0.0)).norm() < 1e-14);
        assert!((form.conj().eval(&l) - direct.conj()).norm() < 1e-14);
    }

    #[test]
    fn real_parametrization_matches() {
        let phase = CVector::from_vec(vec![c(1.0, 0.0), c(0.6, 0.8)]);
        let lam = Affine::lambda(&phase);
        let form = Quadratic::dot(&lam, &lam.conj()).add(&Quadratic::dot(&lam, &lam).scale(c(0.2, 0.3)));
        let l = CVector::from_vec(vec![c(0.25, -0.5), c(1.5, 0.75)]);
        let (lin, quad) = to_real_imag(&form, &[0, 1]);
        let w = CVector::from_vec(vec![c(0.25, 0.0), c(1.5, 0.0), c(-0.5, 0.0), c(0.75, 0.0)]);
        let val = form.c + lin.dot(&w) + w.dot(&(&quad * &w));
        assert!((val - form.eval(&l)).norm() < 1e-13);
    }
}
