//! Linear-time determinants of the structured operator forms.
//!
//! The leading minors `L_k` of a tridiagonal matrix satisfy
//! `L_k = a_k L_{k−1} − b_{k−1} c_{k−1} L_{k−2}`. Minors are carried as a
//! mantissa pair sharing a running power-of-two exponent, renormalized after
//! every step, so intermediate values neither overflow nor underflow.

use crate::diffcore::{Tape, Var};
use crate::error::{Error, Result};
use crate::koopman::{BoundOperator, FormKind};

#[derive(Debug, Clone, Copy)]
struct Scaled {
    m: f64,
    e: i64,
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if !x.is_finite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

fn product(parts: &[Scaled]) -> f64 {
    let mut m = 1.0;
    let mut e = 0;
    for p in parts {
        m *= p.m;
        e += p.e;
    }
    ldexp(m, e)
}

/// Runs the three-term recursion over `diag` with couplings `coupling[k]`
/// (the product of the two off-diagonal entries joining k and k+1) and returns
/// `[1, M_1, …, M_d]`.
fn minors(diag: &[f64], coupling: &[f64]) -> Vec<Scaled> {
    let d = diag.len();
    let mut out = Vec::with_capacity(d + 1);
    out.push(Scaled { m: 1.0, e: 0 });
    let (mut p, mut q) = (1.0, 0.0);
    let mut exp = 0i64;
    for k in 0..d {
        let next = if k == 0 {
            diag[0] * p
        } else {
            diag[k] * p - coupling[k - 1] * q
        };
        out.push(Scaled { m: next, e: exp });
        q = p;
        p = next;
        let big = p.abs().max(q.abs());
        if big.is_finite() && big > 0.0 {
            let s = big.log2().floor() as i64;
            if s != 0 {
                p = ldexp(p, -s);
                q = ldexp(q, -s);
                exp += s;
            }
        }
    }
    out
}

fn check(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Domain("determinant of an empty matrix".into()));
    }
    if b.len() + 1 != a.len() || c.len() + 1 != a.len() {
        return Err(Error::Dimension {
            op: "det_tridiagonal",
            left: vec![a.len()],
            right: vec![b.len(), c.len()],
        });
    }
    Ok(())
}

/// Determinant of the tridiagonal matrix with diagonal `a`, superdiagonal `b`
/// and subdiagonal `c`.
pub fn det_tridiagonal(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    check(a, b, c)?;
    let coupling: Vec<f64> = b.iter().zip(c).map(|(x, y)| x * y).collect();
    let l = minors(a, &coupling);
    Ok(product(&[l[a.len()]]))
}

/// Determinant and its partial derivatives with respect to `a`, `b` and `c`.
pub fn det_tridiagonal_grad(
    a: &[f64],
    b: &[f64],
    c: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    check(a, b, c)?;
    let d = a.len();
    let coupling: Vec<f64> = b.iter().zip(c).map(|(x, y)| x * y).collect();
    let lead = minors(a, &coupling);
    // Trailing minors come from the recursion on the reversed matrix:
    // back[k] is the determinant of the last k rows and columns.
    let rev_a: Vec<f64> = a.iter().rev().copied().collect();
    let rev_c: Vec<f64> = coupling.iter().rev().copied().collect();
    let back = minors(&rev_a, &rev_c);
    // determinant of rows m..d−1
    let tail = |m: usize| back[d - m];

    let det = product(&[lead[d]]);
    let ga = (0..d).map(|m| product(&[lead[m], tail(m + 1)])).collect();
    let lt: Vec<f64> = (0..d - 1).map(|m| product(&[lead[m], tail(m + 2)])).collect();
    let gb = (0..d - 1).map(|m| -c[m] * lt[m]).collect();
    let gc = (0..d - 1).map(|m| -b[m] * lt[m]).collect();
    Ok((det, ga, gb, gc))
}

fn jordan_as_tridiagonal(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = 2 * re.len();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d - 1];
    let mut c = vec![0.0; d - 1];
    for (i, (&x, &y)) in re.iter().zip(im).enumerate() {
        a[2 * i] = x;
        a[2 * i + 1] = x;
        b[2 * i] = y;
        c[2 * i] = -y;
    }
    (a, b, c)
}

fn check_jordan(re: &[f64], im: &[f64]) -> Result<()> {
    if re.is_empty() || re.len() != im.len() {
        return Err(Error::Dimension {
            op: "det_jordan",
            left: vec![re.len()],
            right: vec![im.len()],
        });
    }
    Ok(())
}

/// Determinant of the block-diagonal form with blocks `[[re_i, im_i], [−im_i, re_i]]`,
/// evaluated with the tridiagonal recursion.
pub fn det_jordan(re: &[f64], im: &[f64]) -> Result<f64> {
    check_jordan(re, im)?;
    let (a, b, c) = jordan_as_tridiagonal(re, im);
    det_tridiagonal(&a, &b, &c)
}

pub fn det_jordan_grad(re: &[f64], im: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_jordan(re, im)?;
    let (a, b, c) = jordan_as_tridiagonal(re, im);
    let (det, ga, gb, gc) = det_tridiagonal_grad(&a, &b, &c)?;
    let gre = (0..re.len()).map(|i| ga[2 * i] + ga[2 * i + 1]).collect();
    let gim = (0..re.len()).map(|i| gb[2 * i] - gc[2 * i]).collect();
    Ok((det, gre, gim))
}

/// Records `det K` for a structured operator as a differentiable scalar.
pub fn determinant_var(tape: &mut Tape, op: &BoundOperator) -> Result<Var> {
    match op.kind {
        FormKind::Tridiagonal => {
            let [a, b, c] = [op.params[0], op.params[1], op.params[2]];
            let (det, ga, gb, gc) =
                det_tridiagonal_grad(tape.value(a), tape.value(b), tape.value(c))?;
            tape.scalar_fn(&[a, b, c], det, vec![ga, gb, gc])
        }
        FormKind::Jordan => {
            let [re, im] = [op.params[0], op.params[1]];
            let (det, gre, gim) = det_jordan_grad(tape.value(re), tape.value(im))?;
            tape.scalar_fn(&[re, im], det, vec![gre, gim])
        }
        FormKind::Dense => Err(Error::Config(
            "the determinant loss is too expensive for the dense form; use tridiagonal or jordan"
                .into(),
        )),
    }
}
