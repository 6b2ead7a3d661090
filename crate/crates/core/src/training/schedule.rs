use crate::error::{Error, Result};

/// Inverse-square-root schedule with linear warmup:
/// `d_dec^-0.5 · min(step^-0.5, step · warmup^-1.5)`.
///
/// `step` counts optimizer updates starting at 1.
pub fn lr_schedule(step: usize, d_dec: usize, warmup_steps: usize) -> Result<f64> {
    if step == 0 {
        return Err(Error::Contract(
            "learning-rate step must be at least 1".into(),
        ));
    }
    if d_dec == 0 || warmup_steps == 0 {
        return Err(Error::Config(
            "d_dec and warmup_steps must be positive".into(),
        ));
    }
    let s = step as f64;
    let w = warmup_steps as f64;
    Ok((d_dec as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}
