//! Individual loss terms on a tape.
//!
//! Step-indexed quantities are stacked step-major: with batch size `B`, row
//! `(i−1)·B + b` holds step `i` of trajectory `b`, for `i = 1..n`.

use crate::diffcore::{Tape, Var};
use crate::error::{Error, Result};
use crate::koopman::BoundOperator;

use super::determinant::determinant_var;

fn rows(tape: &Tape, v: Var) -> Result<usize> {
    match tape.shape(v) {
        [r, _] => Ok(*r),
        s => Err(Error::Contract(format!("expected a 2-D batch, got {s:?}"))),
    }
}

fn step_layout(tape: &Tape, preds: Var, targets: Var, n: usize) -> Result<usize> {
    if tape.shape(preds) != tape.shape(targets) {
        return Err(Error::Dimension {
            op: "accuracy loss",
            left: tape.shape(preds).to_vec(),
            right: tape.shape(targets).to_vec(),
        });
    }
    let r = rows(tape, preds)?;
    if n == 0 || r % n != 0 {
        return Err(Error::Contract(format!("{r} rows do not split into {n} steps")));
    }
    Ok(r / n)
}

/// `‖x_r‖²` for every row, as an `R × 1` column.
pub fn row_sq_norms(tape: &mut Tape, x: Var) -> Result<Var> {
    let sq = tape.square(x);
    tape.sum_axis(sq, 1)
}

fn row_errors(tape: &mut Tape, preds: Var, targets: Var) -> Result<Var> {
    let diff = tape.sub(preds, targets)?;
    row_sq_norms(tape, diff)
}

/// `(1/n) Σ_i ‖pred_i − v_i‖²`, averaged over the batch.
pub fn full_accuracy(tape: &mut Tape, preds: Var, targets: Var, n: usize) -> Result<Var> {
    let b = step_layout(tape, preds, targets, n)?;
    let r = row_errors(tape, preds, targets)?;
    let s = tape.sum(r)?;
    Ok(tape.scale(s, 1.0 / (n * b) as f64))
}

/// `(1/n) Σ_i λ^i ‖pred_i − v_i‖²`, averaged over the batch.
pub fn discounted_accuracy(
    tape: &mut Tape,
    preds: Var,
    targets: Var,
    n: usize,
    lambda: f64,
) -> Result<Var> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Contract(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    let b = step_layout(tape, preds, targets, n)?;
    let r = row_errors(tape, preds, targets)?;
    let weights = (1..=n)
        .flat_map(|i| std::iter::repeat_n(lambda.powi(i as i32), b))
        .collect();
    let w = tape.constant(vec![n * b, 1], weights)?;
    let wr = tape.mul(w, r)?;
    let s = tape.sum(wr)?;
    Ok(tape.scale(s, 1.0 / (n * b) as f64))
}

/// `max_i ‖pred_i − v_i‖²` per trajectory, averaged over the batch.
pub fn max_accuracy(tape: &mut Tape, preds: Var, targets: Var, n: usize) -> Result<Var> {
    let b = step_layout(tape, preds, targets, n)?;
    let r = row_errors(tape, preds, targets)?;
    let grid = tape.reshape(r, vec![n, b])?;
    let worst = tape.max_axis(grid, 0)?;
    tape.mean(worst)
}

/// `max_{i,j} (pred_{i,j} − v_{i,j})²` over steps and state coordinates per
/// trajectory, averaged over the batch.
pub fn absolute_max(tape: &mut Tape, preds: Var, targets: Var, n: usize) -> Result<Var> {
    let b = step_layout(tape, preds, targets, n)?;
    let s = tape.shape(preds)[1];
    let diff = tape.sub(preds, targets)?;
    let sq = tape.square(diff);
    let grid = tape.reshape(sq, vec![n, b * s])?;
    let over_steps = tape.max_axis(grid, 0)?;
    let per_point = tape.reshape(over_steps, vec![b, s])?;
    let worst = tape.max_axis(per_point, 1)?;
    tape.mean(worst)
}

/// Mean over rows of `‖x_r − y_r‖²`.
pub fn mean_sq_distance(tape: &mut Tape, x: Var, y: Var) -> Result<Var> {
    if tape.shape(x) != tape.shape(y) {
        return Err(Error::Dimension {
            op: "mean squared distance",
            left: tape.shape(x).to_vec(),
            right: tape.shape(y).to_vec(),
        });
    }
    let r = rows(tape, x)?;
    let diff = tape.sub(x, y)?;
    let s = tape.sq_norm(diff)?;
    Ok(tape.scale(s, 1.0 / r as f64))
}

/// `mean_r | ‖E(v_r) − E(v_{π(r)})‖² − ‖v_r − v_{π(r)}‖² |²`.
pub fn metric(tape: &mut Tape, encoded: Var, states: Var, pairing: &[usize]) -> Result<Var> {
    let r = rows(tape, encoded)?;
    if rows(tape, states)? != r || pairing.len() != r {
        return Err(Error::Dimension {
            op: "metric loss",
            left: vec![r],
            right: vec![rows(tape, states)?, pairing.len()],
        });
    }
    let ep = tape.gather_rows(encoded, pairing)?;
    let sp = tape.gather_rows(states, pairing)?;
    let de = tape.sub(encoded, ep)?;
    let ds = tape.sub(states, sp)?;
    let le = row_sq_norms(tape, de)?;
    let ls = row_sq_norms(tape, ds)?;
    let gap = tape.sub(le, ls)?;
    let sq = tape.square(gap);
    tape.mean(sq)
}

/// Spectral norm squared of `k` by power iteration on `KᵀK` from `start`,
/// differentiable through every iteration. Returns the estimate and the final
/// unit iterate.
pub fn spectral_norm_sq(
    tape: &mut Tape,
    k: Var,
    start: &[f64],
    iterations: usize,
) -> Result<(Var, Vec<f64>)> {
    let d = tape.shape(k)[0];
    if start.len() != d {
        return Err(Error::Dimension {
            op: "power iteration",
            left: tape.shape(k).to_vec(),
            right: vec![start.len()],
        });
    }
    let kt = tape.transpose(k)?;
    let mut v = tape.constant(vec![d, 1], start.to_vec())?;
    for _ in 0..iterations {
        let kv = tape.matmul(k, v)?;
        let w = tape.matmul(kt, kv)?;
        let n2 = tape.sq_norm(w)?;
        let norm = tape.sqrt(n2);
        v = tape.div(w, norm)?;
    }
    let kv = tape.matmul(k, v)?;
    let est = tape.sq_norm(kv)?;
    let last = tape.value(v).to_vec();
    Ok((est, last))
}

/// `(‖K‖² − 1)²` with the spectral norm from [`spectral_norm_sq`].
pub fn norm_loss(
    tape: &mut Tape,
    k: Var,
    start: &[f64],
    iterations: usize,
) -> Result<(Var, Vec<f64>)> {
    let (est, last) = spectral_norm_sq(tape, k, start, iterations)?;
    let one = tape.constant_scalar(1.0);
    let gap = tape.sub(est, one)?;
    Ok((tape.square(gap), last))
}

/// `mean_i (‖K z_i‖² − ‖z_i‖²)²` over the rows `z_i` of `z`.
pub fn isometry_loss(tape: &mut Tape, k: Var, z: Var) -> Result<Var> {
    let kt = tape.transpose(k)?;
    let kz = tape.matmul(z, kt)?;
    let a = row_sq_norms(tape, kz)?;
    let b = row_sq_norms(tape, z)?;
    let gap = tape.sub(a, b)?;
    let sq = tape.square(gap);
    tape.mean(sq)
}

/// `‖K Kᵀ − I‖²_F`.
pub fn unitary_loss(tape: &mut Tape, k: Var) -> Result<Var> {
    let d = tape.shape(k)[0];
    let kt = tape.transpose(k)?;
    let kkt = tape.matmul(k, kt)?;
    let eye = (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect();
    let eye = tape.constant(vec![d, d], eye)?;
    let diff = tape.sub(kkt, eye)?;
    tape.sq_norm(diff)
}

/// `(det K − 1)²` for a tridiagonal or Jordan operator.
pub fn determinant_loss(tape: &mut Tape, op: &BoundOperator) -> Result<Var> {
    let det = determinant_var(tape, op)?;
    let one = tape.constant_scalar(1.0);
    let gap = tape.sub(det, one)?;
    Ok(tape.square(gap))
}

/// Pendulum energy `½θ̇² + 1 − cos θ` of every `(θ, θ̇)` row, as a column.
pub fn pendulum_energy(tape: &mut Tape, states: Var) -> Result<Var> {
    let r = rows(tape, states)?;
    if tape.shape(states)[1] != 2 {
        return Err(Error::Dimension {
            op: "pendulum energy",
            left: tape.shape(states).to_vec(),
            right: vec![r, 2],
        });
    }
    let pick_theta = tape.constant(vec![2, 1], vec![1.0, 0.0])?;
    let pick_omega = tape.constant(vec![2, 1], vec![0.0, 1.0])?;
    let theta = tape.matmul(states, pick_theta)?;
    let omega = tape.matmul(states, pick_omega)?;
    let w2 = tape.square(omega);
    let kinetic = tape.scale(w2, 0.5);
    let c = tape.cos(theta);
    let one = tape.constant_scalar(1.0);
    let potential = tape.sub(one, c)?;
    tape.add(kinetic, potential)
}

/// `mean_i (H(pred_i) − H(pred_0))²` for step-major `preds` and the `B × 2`
/// reference `pred0`.
pub fn energy_loss(tape: &mut Tape, preds: Var, pred0: Var, n: usize) -> Result<Var> {
    let b = rows(tape, pred0)?;
    if rows(tape, preds)? != n * b {
        return Err(Error::Dimension {
            op: "energy loss",
            left: tape.shape(preds).to_vec(),
            right: tape.shape(pred0).to_vec(),
        });
    }
    let h = pendulum_energy(tape, preds)?;
    let h0 = pendulum_energy(tape, pred0)?;
    let idx: Vec<usize> = (0..n).flat_map(|_| 0..b).collect();
    let h0 = tape.gather_rows(h0, &idx)?;
    let gap = tape.sub(h, h0)?;
    let sq = tape.square(gap);
    tape.mean(sq)
}
