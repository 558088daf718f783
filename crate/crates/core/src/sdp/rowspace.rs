/// Outcome of reducing a linear system `A x = b` to independent rows.
#[derive(Debug, Clone, PartialEq)]
pub enum RowReduction {
    /// Indices of a maximal independent subset of rows, in input order.
    Independent(Vec<usize>),
    /// A dependent row whose right-hand side contradicts the others; carries
    /// the row index and the size of the contradiction.
    Inconsistent { row: usize, residual: f64 },
}

/// Greedy modified Gram–Schmidt over the rows of `[A | b]`.
///
/// A row is dependent when the norm of its component orthogonal to the rows
/// kept so far is below `tol` times its original norm. Dependent rows must
/// reproduce their right-hand side through the same combination, up to
/// `tol · (1 + |b|)` after scaling.
pub fn independent_rows(rows: &[Vec<f64>], rhs: &[f64], tol: f64) -> RowReduction {
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    for (i, (row, &b)) in rows.iter().zip(rhs).enumerate() {
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut r = row.clone();
        let mut rb = b;
        for _pass in 0..2 {
            for (q, qb) in &basis {
                let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                for (rv, qv) in r.iter_mut().zip(q) {
                    *rv -= dot * qv;
                }
                rb -= dot * qb;
            }
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= tol * norm0 {
            let scale = if norm0 > 0.0 { norm0 } else { 1.0 };
            if rb.abs() > tol.sqrt() * (1.0 + b.abs()) * scale.max(1.0) {
                return RowReduction::Inconsistent {
                    row: i,
                    residual: rb.abs(),
                };
            }
            continue;
        }
        r.iter_mut().for_each(|v| *v /= norm);
        basis.push((r, rb / norm));
        kept.push(i);
    }
    RowReduction::Independent(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_duplicates_and_combinations() {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ];
        let rhs = vec![1.0, 2.0, 3.0, 2.0, 0.0];
        assert_eq!(
            independent_rows(&rows, &rhs, 1e-10),
            RowReduction::Independent(vec![0, 1, 4])
        );
    }

    #[test]
    fn flags_contradiction() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let rhs = vec![1.0, 3.0];
        assert!(matches!(
            independent_rows(&rows, &rhs, 1e-10),
            RowReduction::Inconsistent { row: 1, .. }
        ));
    }

    #[test]
    fn zero_row_with_nonzero_rhs_is_inconsistent() {
        let rows = vec![vec![0.0, 0.0]];
        assert!(matches!(
            independent_rows(&rows, &[1.0], 1e-10),
            RowReduction::Inconsistent { .. }
        ));
        assert_eq!(
            independent_rows(&rows, &[0.0], 1e-10),
            RowReduction::Independent(vec![])
        );
    }
}
