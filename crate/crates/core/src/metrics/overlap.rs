use crate::error::Result;
use crate::volume::LabelVolume;

/// Dice overlap of one label. Two empty masks count as perfect agreement.
pub fn dice(pred: &LabelVolume, gt: &LabelVolume, label: u16) -> Result<f64> {
    pred.same_grid(gt)?;
    let (mut p, mut g, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (ia, ib) = (a == label, b == label);
        p += ia as usize;
        g += ib as usize;
        both += (ia && ib) as usize;
    }
    if p + g == 0 {
        log::warn!("label {label} absent from both volumes; Dice taken as 1.0");
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (p + g) as f64)
}
