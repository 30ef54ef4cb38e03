use crate::error::{Error, Result};

/// Per-class F1 for classes `0..n_classes`. A class with no true positives
/// (including one absent from both lists) scores 0.
pub fn per_class_f1(predictions: &[usize], golds: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if predictions.len() != golds.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::invalid("macro F1 of an empty list"));
    }
    if let Some(&c) = predictions.iter().chain(golds).find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("class {c} outside a set of {n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut pred_count = vec![0usize; n_classes];
    let mut gold_count = vec![0usize; n_classes];
    for (&p, &g) in predictions.iter().zip(golds) {
        pred_count[p] += 1;
        gold_count[g] += 1;
        if p == g {
            tp[p] += 1;
        }
    }
    Ok((0..n_classes)
        .map(|c| {
            let denom = pred_count[c] + gold_count[c];
            if tp[c] == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1 over the class set `0..n_classes`.
pub fn macro_f1(predictions: &[usize], golds: &[usize], n_classes: usize) -> Result<f64> {
    if n_classes == 0 {
        return Err(Error::invalid("empty class set"));
    }
    let f1 = per_class_f1(predictions, golds, n_classes)?;
    Ok(f1.iter().sum::<f64>() / n_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        let m = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            macro_f1(&[1, 0, 0, 1], &[0, 0, 1, 1], 2).unwrap(),
            macro_f1(&[0, 1, 1, 0], &[1, 1, 0, 0], 2).unwrap()
        );
        // absent class 2 contributes zero
        assert!((macro_f1(&[0, 1], &[0, 1], 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(macro_f1(&[], &[], 2).is_err());
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
    }
}
