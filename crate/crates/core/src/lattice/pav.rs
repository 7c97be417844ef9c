/// Euclidean projection onto the non-decreasing cone (pool adjacent
/// violators), followed by clamping into `[0, 1]`.
///
/// Clamping after the projection keeps the result non-decreasing because
/// clamping is itself monotone.
pub fn pav_project(values: &[f64]) -> Vec<f64> {
    // Each block is (sum, count); blocks are merged while their means decrease.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (sum, n) in blocks {
        let mean = (sum / n as f64).clamp(0.0, 1.0);
        out.extend(std::iter::repeat_n(mean, n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_single_violation() {
        let out = pav_project(&[0.1, 0.3, 0.2]);
        let expected = [0.1, 0.25, 0.25];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone_and_constant_inputs_unchanged() {
        let mono = [0.0, 0.1, 0.1, 0.5, 0.9, 1.0];
        assert_eq!(pav_project(&mono), mono.to_vec());
        let flat = [0.4; 7];
        assert_eq!(pav_project(&flat), flat.to_vec());
        assert!(pav_project(&[]).is_empty());
    }

    #[test]
    fn clamps_into_unit_interval() {
        assert_eq!(pav_project(&[-0.5, 0.5, 1.5]), vec![0.0, 0.5, 1.0]);
        assert_eq!(pav_project(&[2.0, -2.0]), vec![0.0, 0.0]);
    }
}
