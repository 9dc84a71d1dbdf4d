//! Dense complex linear algebra for the small operators used here: matrix
//! exponential, linear solves and Hermitian eigenvalues.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix.
pub type ComplexMatrix = Array2<C64>;

pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.dot(b) - b.dot(a)
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    a.diag().sum()
}

/// Largest entrywise modulus.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0, |m, x, y| f64::max(m, (x - y).norm()))
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_error(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    err
}

pub fn all_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn ensure_square(a: &ComplexMatrix) -> Result<usize> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

fn one_norm(a: &ComplexMatrix) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b` by LU factorisation with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    let m = b.ncols();
    let mut lu: Vec<C64> = a.iter().copied().collect();
    let mut x: Vec<C64> = b.iter().copied().collect();

    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| lu[i * n + k].norm().total_cmp(&lu[j * n + k].norm()))
            .unwrap();
        if lu[pivot * n + k].norm() == 0.0 {
            return Err(Error::InvalidParams("singular matrix in solve".into()));
        }
        if pivot != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, pivot * m + j);
            }
        }
        let (head, tail) = lu.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n..];
        let inv = 1.0 / pivot_row[k];
        let (xhead, xtail) = x.split_at_mut((k + 1) * m);
        let xk = &xhead[k * m..];
        for (row, xrow) in tail.chunks_exact_mut(n).zip(xtail.chunks_exact_mut(m)) {
            let f = row[k] * inv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            row[k] = f;
            for (r, p) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *r -= f * p;
            }
            for (r, p) in xrow.iter_mut().zip(xk) {
                *r -= f * p;
            }
        }
    }

    for i in (0..n).rev() {
        let (xhead, xtail) = x.split_at_mut((i + 1) * m);
        let xi = &mut xhead[i * m..];
        for j in (i + 1)..n {
            let f = lu[i * n + j];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            let xj = &xtail[(j - i - 1) * m..(j - i) * m];
            for (r, p) in xi.iter_mut().zip(xj) {
                *r -= f * p;
            }
        }
        let inv = 1.0 / lu[i * n + i];
        for r in xi.iter_mut() {
            *r *= inv;
        }
    }
    Ok(Array2::from_shape_vec((n, m), x).expect("shape"))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
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
const PADE13: [f64; 14] = [
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

// Backward-error bounds for each diagonal Padé degree (Higham 2005, Table 2.3).
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with diagonal Padé approximants.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(a)?;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = one_norm(a);
    let eye = identity(n);

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(a, coeffs, &eye);
            return solve(&(&v - &u), &(&v + &u));
        }
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let (u, v) = pade13(&scaled, &eye);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

fn pade_low(a: &ComplexMatrix, b: &[f64], eye: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let a2 = a.dot(a);
    let mut u_even = eye * C64::from(b[1]);
    let mut v = eye * C64::from(b[0]);
    let mut power = eye.clone();
    let mut k = 2;
    while k < b.len() {
        power = power.dot(&a2);
        u_even = u_even + &power * C64::from(b[k + 1]);
        v = v + &power * C64::from(b[k]);
        k += 2;
    }
    (a.dot(&u_even), v)
}

fn pade13(a: &ComplexMatrix, eye: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let b = |i: usize| C64::from(PADE13[i]);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_even = a6.dot(&inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + eye * b(1);
    let u = a.dot(&u_even);
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + eye * b(0);
    (u, v)
}

/// Eigenvalues of a Hermitian matrix, ascending. Closed form for 2x2,
/// cyclic complex Jacobi otherwise.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = ensure_square(a)?;
    if n == 1 {
        return Ok(vec![a[[0, 0]].re]);
    }
    if n == 2 {
        let (p, q) = (a[[0, 0]].re, a[[1, 1]].re);
        let off = a[[0, 1]].norm();
        let mean = 0.5 * (p + q);
        let half_gap = (0.25 * (p - q) * (p - q) + off * off).sqrt();
        return Ok(vec![mean - half_gap, mean + half_gap]);
    }

    let mut m = a.clone();
    let frob: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = m[[p, q]];
                let mag = beta.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = beta / mag;
                let (app, aqq) = (m[[p, p]].re, m[[q, q]].re);
                let tau = (aqq - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) * [[c, s], [-s, c]] acting on (p, q).
                let up_p = C64::from(c);
                let up_q = C64::from(s);
                let uq_p = -phase.conj() * s;
                let uq_q = phase.conj() * c;
                for k in 0..n {
                    let (xp, xq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = xp * up_p + xq * uq_p;
                    m[[k, q]] = xp * up_q + xq * uq_q;
                }
                for k in 0..n {
                    let (xp, xq) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = up_p.conj() * xp + uq_p.conj() * xq;
                    m[[q, k]] = up_q.conj() * xp + uq_q.conj() * xq;
                }
                m[[p, q]] = C64::new(0.0, 0.0);
                m[[q, p]] = C64::new(0.0, 0.0);
                m[[p, p]] = C64::from(m[[p, p]].re);
                m[[q, q]] = C64::from(m[[q, q]].re);
            }
        }
    }
    let mut ev: Vec<f64> = m.diag().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((4, 4));
        assert!(max_abs_diff(&expm(&z).unwrap(), &identity(4)) < 1e-15);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(-i theta sigma_y) = cos(theta) I - i sin(theta) sigma_y
        for &theta in &[0.001, 0.3, 2.0, 40.0] {
            let a = array![[c(0.0, 0.0), c(-theta, 0.0)], [c(theta, 0.0), c(0.0, 0.0)]];
            let e = expm(&a).unwrap();
            let want = array![
                [c(theta.cos(), 0.0), c(-theta.sin(), 0.0)],
                [c(theta.sin(), 0.0), c(theta.cos(), 0.0)]
            ];
            assert!(max_abs_diff(&e, &want) < 1e-12, "theta = {theta}");
        }
    }

    #[test]
    fn expm_diagonal_matches_scalar_exponentials() {
        let d = [c(-30.0, 2.0), c(0.1, -0.4), c(1.5, 7.0)];
        let a = Array2::from_diag(&ndarray::arr1(&d));
        let e = expm(&a).unwrap();
        for (i, z) in d.iter().enumerate() {
            assert!((e[[i, i]] - z.exp()).norm() < 1e-12 * z.exp().norm().max(1.0));
        }
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = array![
            [c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(3.0, -1.0)],
            [c(0.5, 0.5), c(1.0, 1.0), c(1.0, 0.0)]
        ];
        let x = array![[c(1.0, 2.0)], [c(-1.0, 0.0)], [c(0.0, 3.0)]];
        let b = a.dot(&x);
        assert!(max_abs_diff(&solve(&a, &b).unwrap(), &x) < 1e-13);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_spectrum() {
        // U diag(λ) U† with a fixed unitary built from expm of an anti-Hermitian matrix.
        let h = array![
            [c(0.0, 0.0), c(0.3, 0.2), c(0.0, -0.7)],
            [c(-0.3, 0.2), c(0.0, 0.0), c(0.1, 0.0)],
            [c(0.0, -0.7), c(-0.1, 0.0), c(0.0, 0.0)]
        ];
        let u = expm(&h).unwrap();
        let d = Array2::from_diag(&ndarray::arr1(&[c(-1.0, 0.0), c(0.25, 0.0), c(3.0, 0.0)]));
        let a = u.dot(&d).dot(&dagger(&u));
        let ev = hermitian_eigenvalues(&a).unwrap();
        for (got, want) in ev.iter().zip([-1.0, 0.25, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
