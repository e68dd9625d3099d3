use crate::tensor::{Result, Tape, TensorError, Var};

/// Floor applied inside every log so saturated scores stay finite.
pub const LOG_FLOOR: f64 = 1e-7;

/// Binary cross-entropy of the discriminator on real and fake scores.
pub fn d_loss(tape: &mut Tape, real: Var, fake: Var) -> Result<Var> {
    let lr = tape.log_clamped(real, LOG_FLOOR)?;
    let lr = tape.mean(lr)?;
    let one_minus = tape.scale(fake, -1.0)?;
    let one_minus = tape.add_scalar(one_minus, 1.0)?;
    let lf = tape.log_clamped(one_minus, LOG_FLOOR)?;
    let lf = tape.mean(lf)?;
    let s = tape.add(lr, lf)?;
    tape.scale(s, -1.0)
}

/// Non-saturating generator loss `−mean log D(G(z))`.
pub fn g_adv_loss(tape: &mut Tape, fake: Var) -> Result<Var> {
    let l = tape.log_clamped(fake, LOG_FLOOR)?;
    let l = tape.mean(l)?;
    tape.scale(l, -1.0)
}

/// Best-of-k L2 loss. `trajectory` holds `k·n` sample-major rows of
/// flattened predictions and `truth` the `n` flattened true futures. The
/// per-agent argmin is chosen outside the tape, so only the selected samples
/// receive gradient. Returns the loss and the chosen sample per agent.
pub fn variety_loss(tape: &mut Tape, trajectory: Var, truth: &[f64], k: usize) -> Result<(Var, Vec<usize>)> {
    let (rows, cols) = tape.dims(trajectory);
    if k == 0 || rows % k != 0 || truth.len() != (rows / k) * cols {
        return Err(TensorError::Contract(format!(
            "variety loss: {rows}x{cols} predictions, k = {k}, {} truth values",
            truth.len()
        )));
    }
    let n = rows / k;
    let tiled: Vec<f64> = (0..k).flat_map(|_| truth.iter().copied()).collect();
    let y = tape.constant(rows, cols, tiled)?;
    let diff = tape.sub(trajectory, y)?;
    let norms = tape.row_norm(diff)?;
    let values = tape.value(norms);
    let chosen: Vec<usize> = (0..n)
        .map(|a| {
            (0..k)
                .min_by(|&s, &t| values[s * n + a].total_cmp(&values[t * n + a]))
                .expect("k >= 1")
        })
        .collect();
    let rows_idx: Vec<usize> = chosen.iter().enumerate().map(|(a, &s)| s * n + a).collect();
    let best = tape.gather_rows(norms, &rows_idx)?;
    Ok((tape.mean(best)?, chosen))
}
