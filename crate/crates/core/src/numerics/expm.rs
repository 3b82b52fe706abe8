//! Matrix exponential and exact affine flows.

use super::matrix::{Matrix, Vector};
use crate::error::{Error, Result};

// Scaling-and-squaring with the degree-13 diagonal Padé approximant
// (Higham 2005). The lower-degree approximants are used when the norm is
// small enough that no scaling is needed.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^{A t}` for a square matrix `A`.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !t.is_finite() || !a.is_finite() {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    Ok(expm(&a.scale(t)))
}

fn expm(a: &Matrix) -> Matrix {
    let n = a.rows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let norm = a.norm1();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &PADE_3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &PADE_5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &PADE_7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &PADE_9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a.scale(2f64.powi(-s));
        let (u, v) = pade_13(&scaled);
        (u, v, s as u32)
    };
    // r = (V - U)^{-1} (V + U)
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .and_then(|lu| lu.solve_matrix(&numer))
        .expect("Padé denominator is nonsingular for norms within theta bounds");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.rows();
    let a2 = a * a;
    // Even powers I, A², A⁴, ...
    let mut powers = vec![Matrix::identity(n), a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 < b.len() {
            u_inner = &u_inner + &p.scale(b[2 * k + 1]);
        }
        if 2 * k < b.len() {
            v = &v + &p.scale(b[2 * k]);
        }
    }
    (a * &u_inner, v)
}

fn pade_13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE_13;
    let n = a.rows();
    let id = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| {
        &(&(&a6.scale(c6) + &a4.scale(c4)) + &a2.scale(c2)) + &id.scale(c0)
    };
    let u_hi = &a6 * &(&(&a6.scale(b[13]) + &a4.scale(b[11])) + &a2.scale(b[9]));
    let u = a * &(&u_hi + &lin(b[7], b[5], b[3], b[1]));
    let v_hi = &a6 * &(&(&a6.scale(b[12]) + &a4.scale(b[10])) + &a2.scale(b[8]));
    let v = &v_hi + &lin(b[6], b[4], b[2], b[0]);
    (u, v)
}

/// Exact solution of `ẋ = A x + b`, `x(0) = x0`, at time `t`, computed from
/// the exponential of the augmented matrix `[[A, b], [0, 0]]`.
pub fn affine_flow(a: &Matrix, b: &[f64], x0: &[f64], t: f64) -> Result<Vector> {
    Ok(AffineFlow::new(a, b, t)?.apply(x0))
}

/// Precomputed flow map `x ↦ Φ x + γ` of `ẋ = A x + b` over a fixed time.
#[derive(Clone, Debug)]
pub struct AffineFlow {
    pub transition: Matrix,
    pub offset: Vector,
}

impl AffineFlow {
    pub fn new(a: &Matrix, b: &[f64], t: f64) -> Result<AffineFlow> {
        let n = a.rows();
        if !a.is_square() || b.len() != n {
            return Err(Error::Dimension(format!(
                "affine flow with {}x{} matrix and forcing of length {}",
                a.rows(),
                a.cols(),
                b.len()
            )));
        }
        let mut aug = Matrix::zeros(n + 1, n + 1);
        aug.set_block(0, 0, a);
        for (i, bi) in b.iter().enumerate() {
            aug[(i, n)] = *bi;
        }
        let e = mat_exp(&aug, t)?;
        let transition = e.block(0, 0, n, n);
        let offset = Vector::from((0..n).map(|i| e[(i, n)]).collect::<Vec<_>>());
        Ok(AffineFlow { transition, offset })
    }

    pub fn apply(&self, x0: &[f64]) -> Vector {
        let mut x = self.transition.mul_vec(x0);
        for (xi, oi) in x.iter_mut().zip(self.offset.iter()) {
            *xi += oi;
        }
        x
    }

    pub fn dim(&self) -> usize {
        self.offset.dim()
    }
}
