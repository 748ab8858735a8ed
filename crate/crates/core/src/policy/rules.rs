//! Learning updates for Q-Routing and confidence-based Q-Routing.
//!
//! Q-Routing moves an estimate toward the observed target
//! `best_estimate + q_wait + s_transmit` with a fixed rate `eta`. The
//! confidence variant replaces `eta` with `max(c_est, 1 - c_old)`, decays
//! confidences of entries that were not refreshed during a step by `lambda`,
//! and pulls refreshed confidences toward the reporter's confidence.

use super::{ConfidenceTable, Feedback, PolicyError, QTable};
use crate::topology::NodeId;

fn check_unit(name: &'static str, value: f64) -> Result<f64, PolicyError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(PolicyError::OutOfRange { name, value })
    }
}

fn target(fb: &Feedback, q_wait: u64, s_transmit: u64) -> f64 {
    fb.best_estimate + q_wait as f64 + s_transmit as f64
}

/// Applies a fixed-rate update to `Q(y, d)` and returns the new value.
pub fn q_update(
    table: &mut QTable,
    y: NodeId,
    d: NodeId,
    q_wait: u64,
    s_transmit: u64,
    fb: &Feedback,
    eta: f64,
) -> Result<f64, PolicyError> {
    let owner = table.owner();
    let q = table.get_mut(y, d).ok_or(PolicyError::MissingEntry {
        owner,
        neighbor: y,
        destination: d,
    })?;
    let delta = eta * (target(fb, q_wait, s_transmit) - *q);
    *q = (*q + delta).max(0.0);
    Ok(*q)
}

/// Confidence-driven learning rate `max(c_est, 1 - c_old)`.
pub fn eta_confidence(c_old: f64, c_est: f64) -> Result<f64, PolicyError> {
    let c_old = check_unit("c_old", c_old)?;
    let c_est = check_unit("c_est", c_est)?;
    Ok(c_est.max(1.0 - c_old))
}

/// Confidence of an entry that was not refreshed this step.
pub fn c_decay(c_old: f64, lambda: f64) -> Result<f64, PolicyError> {
    let c_old = check_unit("c_old", c_old)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(PolicyError::OutOfRange {
            name: "lambda",
            value: lambda,
        });
    }
    Ok(lambda * c_old)
}

/// Confidence of an entry refreshed with a report carrying `c_est`.
pub fn c_update(c_old: f64, c_est: f64) -> Result<f64, PolicyError> {
    let eta = eta_confidence(c_old, c_est)?;
    // convex combination; clamp only absorbs rounding
    Ok((c_old + eta * (c_est - c_old)).clamp(0.0, 1.0))
}

/// Applies the confidence-weighted update to `Q(y, d)` and `C(y, d)`;
/// returns `(new_q, new_c)`.
pub fn cq_update(
    qtable: &mut QTable,
    ctable: &mut ConfidenceTable,
    y: NodeId,
    d: NodeId,
    q_wait: u64,
    s_transmit: u64,
    fb: &Feedback,
) -> Result<(f64, f64), PolicyError> {
    let owner = qtable.owner();
    let missing = PolicyError::MissingEntry {
        owner,
        neighbor: y,
        destination: d,
    };
    let c_old = ctable.get(y, d).ok_or(missing.clone())?;
    if !qtable.contains(y, d) {
        return Err(missing);
    }
    let c_est = fb.estimate_confidence;
    let eta = eta_confidence(c_old, c_est)?;
    let new_q = q_update(qtable, y, d, q_wait, s_transmit, fb, eta)?;
    let new_c = c_update(c_old, c_est)?;
    if let Some(c) = ctable.get_mut(y, d) {
        *c = new_c;
    }
    Ok((new_q, new_c))
}

/// Decays every confidence not listed in `updated` by `lambda`.
pub fn decay_all_unvisited(
    ctable: &mut ConfidenceTable,
    updated: &[(NodeId, NodeId)],
    lambda: f64,
) {
    ctable.map_except(updated, |c| lambda * c);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NeighborTable;
    use crate::topology::node_ids;

    const TOL: f64 = 1e-12;

    fn fb(best: f64, conf: f64) -> Feedback {
        Feedback {
            reporter: NodeId(1),
            destination: NodeId(2),
            best_estimate: best,
            estimate_confidence: conf,
        }
    }

    fn table(value: f64) -> QTable {
        let mut t = NeighborTable::new(NodeId(0), &node_ids(&[1]), 3, 0.0);
        *t.get_mut(NodeId(1), NodeId(2)).unwrap() = value;
        t
    }

    #[test]
    fn q_update_examples() {
        let mut t = table(10.0);
        let v = q_update(&mut t, NodeId(1), NodeId(2), 2, 1, &fb(5.0, 1.0), 0.85).unwrap();
        let expected = 10.0 + 0.85 * ((5.0 + 2.0 + 1.0) - 10.0);
        assert!((v - expected).abs() < TOL);
        assert!((v - 8.3).abs() < TOL);

        for eta in [0.1, 0.85, 1.0] {
            let mut t = table(8.0);
            let v = q_update(&mut t, NodeId(1), NodeId(2), 2, 1, &fb(5.0, 1.0), eta).unwrap();
            assert_eq!(v, 8.0);
        }

        let mut t = table(0.0);
        let v = q_update(&mut t, NodeId(1), NodeId(2), 0, 1, &fb(0.0, 1.0), 0.85).unwrap();
        assert!((v - 0.85).abs() < TOL);

        let mut t = table(0.0);
        assert!(matches!(
            q_update(&mut t, NodeId(2), NodeId(2), 0, 1, &fb(0.0, 1.0), 0.85),
            Err(PolicyError::MissingEntry { .. })
        ));
    }

    #[test]
    fn q_update_clamps_at_zero() {
        let mut t = table(0.5);
        // a negative target cannot arise from valid feedback; use eta > 1 overshoot instead
        let v = q_update(&mut t, NodeId(1), NodeId(2), 0, 0, &fb(0.0, 1.0), 3.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_confidence(1.0, 0.3).unwrap(), 0.3);
        assert_eq!(eta_confidence(0.0, 0.3).unwrap(), 1.0);
        assert_eq!(eta_confidence(0.5, 0.7).unwrap(), 0.7);
        assert!(eta_confidence(1.1, 0.3).is_err());
        assert!(eta_confidence(0.5, -0.1).is_err());
        assert!(eta_confidence(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn decay_examples() {
        assert!((c_decay(0.8, 0.95).unwrap() - 0.76).abs() < TOL);
        assert_eq!(c_decay(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(c_decay(1.0, 0.95).unwrap(), 0.95);
        assert!(c_decay(0.5, 1.0).is_err());
        assert!(c_decay(0.5, 0.0).is_err());
        assert!(c_decay(1.5, 0.5).is_err());
    }

    #[test]
    fn c_update_examples() {
        let expected = 0.5 + 0.9 * (0.9 - 0.5);
        assert!((c_update(0.5, 0.9).unwrap() - expected).abs() < TOL);
        assert!((c_update(0.5, 0.9).unwrap() - 0.86).abs() < TOL);
        for c in [0.0, 0.25, 0.5, 1.0] {
            assert_eq!(c_update(c, c).unwrap(), c);
        }
        assert_eq!(c_update(0.0, 1.0).unwrap(), 1.0);
        assert!(c_update(0.5, 2.0).is_err());
    }

    fn cq_tables(q: f64, c: f64) -> (QTable, ConfidenceTable) {
        let mut ct = NeighborTable::new(NodeId(0), &node_ids(&[1]), 3, 0.0);
        *ct.get_mut(NodeId(1), NodeId(2)).unwrap() = c;
        (table(q), ct)
    }

    #[test]
    fn cq_update_examples() {
        let (mut qt, mut ct) = cq_tables(10.0, 0.5);
        let (q, c) =
            cq_update(&mut qt, &mut ct, NodeId(1), NodeId(2), 2, 1, &fb(5.0, 0.9)).unwrap();
        assert!((q - (10.0 + 0.9 * (8.0 - 10.0))).abs() < TOL);
        assert!((q - 8.2).abs() < TOL);
        assert!((c - 0.86).abs() < TOL);
        assert_eq!(qt.get(NodeId(1), NodeId(2)), Some(q));
        assert_eq!(ct.get(NodeId(1), NodeId(2)), Some(c));

        // zero confidence: full overwrite with the target
        for conf in [0.0, 0.4, 1.0] {
            let (mut qt, mut ct) = cq_tables(10.0, 0.0);
            let (q, _) =
                cq_update(&mut qt, &mut ct, NodeId(1), NodeId(2), 2, 1, &fb(5.0, conf)).unwrap();
            assert!((q - 8.0).abs() < TOL);
        }

        // converged one-hop entry reported by the destination itself
        let (mut qt, mut ct) = cq_tables(1.0, 0.3);
        let (q, c) =
            cq_update(&mut qt, &mut ct, NodeId(1), NodeId(2), 0, 1, &fb(0.0, 1.0)).unwrap();
        assert_eq!(q, 1.0);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn cq_with_full_confidence_matches_fixed_rate() {
        for c_est in [0.0, 0.2, 0.55, 1.0] {
            let (mut qt, mut ct) = cq_tables(10.0, 1.0);
            let (q, _) = cq_update(
                &mut qt,
                &mut ct,
                NodeId(1),
                NodeId(2),
                3,
                1,
                &fb(2.0, c_est),
            )
            .unwrap();
            let mut plain = table(10.0);
            let expected = q_update(
                &mut plain,
                NodeId(1),
                NodeId(2),
                3,
                1,
                &fb(2.0, c_est),
                c_est,
            )
            .unwrap();
            assert_eq!(q, expected);
        }
    }

    #[test]
    fn decay_all_skips_updated() {
        let mut ct = NeighborTable::new(NodeId(0), &node_ids(&[1, 2]), 3, 0.8);
        decay_all_unvisited(&mut ct, &[(NodeId(1), NodeId(2))], 0.95);
        assert_eq!(ct.get(NodeId(1), NodeId(2)), Some(0.8));
        assert!((ct.get(NodeId(2), NodeId(1)).unwrap() - 0.76).abs() < TOL);

        let mut all = NeighborTable::new(NodeId(0), &node_ids(&[1]), 3, 0.8);
        let keys: alloc::vec::Vec<_> = all.entries().map(|(y, d, _)| (y, d)).collect();
        let before = all.clone();
        decay_all_unvisited(&mut all, &keys, 0.95);
        assert_eq!(all, before);

        let mut twice = NeighborTable::new(NodeId(0), &node_ids(&[1]), 3, 0.76);
        decay_all_unvisited(&mut twice, &[], 0.95);
        decay_all_unvisited(&mut twice, &[], 0.95);
        assert!((twice.get(NodeId(1), NodeId(2)).unwrap() - 0.6859).abs() < TOL);
    }
}
