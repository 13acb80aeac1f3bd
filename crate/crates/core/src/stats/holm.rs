use crate::error::{Error, Result};

/// Holm step-down adjustment. Output is in input order.
///
/// With raw p-values sorted ascending as `p(1) <= ... <= p(m)`, the adjusted
/// value of `p(i)` is `min(1, max_{j <= i} (m - j + 1) p(j))`.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixtures() {
        assert_eq!(holm_adjust(&[0.03]).unwrap(), vec![0.03]);
        assert_eq!(holm_adjust(&[0.01, 0.04]).unwrap(), vec![0.02, 0.04]);
        assert_eq!(holm_adjust(&[0.02, 0.02, 0.02]).unwrap(), vec![0.06, 0.06, 0.06]);
        assert_eq!(holm_adjust(&[0.04, 0.01]).unwrap(), vec![0.04, 0.02]);
        assert_eq!(holm_adjust(&[0.5, 0.6]).unwrap(), vec![1.0, 1.0]);
        assert!(holm_adjust(&[]).unwrap().is_empty());
        assert!(holm_adjust(&[1.2]).is_err());
    }
}
