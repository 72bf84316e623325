//! Training loss: mean squared error over all nine output components, in
//! mm, targets unnormalized.

use crate::synthgen::MotionLabels;
use crate::zoo::MotionPrediction;

/// Loss and its gradient with respect to the prediction: mean of squared
/// componentwise errors, gradient 2(p - t)/9 per component.
pub fn mse_loss(pred: &MotionPrediction, target: &MotionLabels) -> (f64, [f64; 9]) {
    let p = pred.to_flat();
    let t = target.to_flat();
    let mut loss = 0.0;
    let mut grad = [0.0; 9];
    for i in 0..9 {
        let d = p[i] - t[i];
        loss += d * d;
        grad[i] = 2.0 * d / 9.0;
    }
    (loss / 9.0, grad)
}
