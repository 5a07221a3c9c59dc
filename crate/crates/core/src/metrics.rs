//! Confusion matrix and the agreement measures derived from it.
//!
//! Counts stay integral until the final division.

use serde::Serialize;

use crate::error::{Error, Result};

/// `counts[i * classes + j]` = pixels of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch("confusion matrix must be square".into()));
        }
        Ok(Self {
            classes: k,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    /// Adds another matrix of the same size (for sharded accumulation).
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.classes).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(|r| r.to_vec()).collect()
    }

    fn nonempty(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::EmptyConfusion),
            n => Ok(n),
        }
    }
}

/// Accumulates a confusion matrix over labelled pixels.
///
/// `pred` holds class indices `0..classes`; `labels` uses `0` for unlabelled
/// pixels and `1..=classes` otherwise.
pub fn confusion(pred: &[usize], labels: &[u16], classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} pixels, labels {}",
            pred.len(),
            labels.len()
        )));
    }
    let mut m = ConfusionMatrix::new(classes);
    for (&p, &l) in pred.iter().zip(labels) {
        if l == 0 {
            continue;
        }
        let t = l as usize - 1;
        if t >= classes || p >= classes {
            return Err(Error::InvalidArgument(format!(
                "class out of range: truth {} prediction {} with {} classes",
                l, p, classes
            )));
        }
        m.add(t, p);
    }
    Ok(m)
}

pub fn overall_accuracy(m: &ConfusionMatrix) -> Result<f64> {
    let n = m.nonempty()?;
    Ok(m.trace() as f64 / n as f64)
}

pub fn kappa(m: &ConfusionMatrix) -> Result<f64> {
    let n = m.nonempty()? as i128;
    let chance: i128 = (0..m.classes)
        .map(|i| m.row_sum(i) as i128 * m.col_sum(i) as i128)
        .sum();
    let num = m.trace() as i128 * n - chance;
    let den = n * n - chance;
    if den == 0 {
        return Err(Error::DegenerateKappa);
    }
    Ok(num as f64 / den as f64)
}

/// Frequency-weighted IoU; classes absent from both truth and prediction are skipped.
pub fn fwiou(m: &ConfusionMatrix) -> Result<f64> {
    let n = m.nonempty()? as f64;
    let mut acc = 0.0;
    for i in 0..m.classes {
        let row = m.row_sum(i);
        let union = row + m.col_sum(i) - m.get(i, i);
        if union == 0 {
            continue;
        }
        acc += (row as f64 / n) * (m.get(i, i) as f64 / union as f64);
    }
    Ok(acc)
}

/// Machine-readable evaluation summary; field order is part of the report format.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub oa: f64,
    pub kappa: f64,
    pub fwiou: f64,
    /// `None` for classes without labelled pixels.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn from_confusion(m: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            oa: overall_accuracy(m)?,
            kappa: kappa(m)?,
            fwiou: fwiou(m)?,
            per_class_accuracy: (0..m.classes)
                .map(|i| {
                    let r = m.row_sum(i);
                    (r > 0).then(|| m.get(i, i) as f64 / r as f64)
                })
                .collect(),
            confusion: m.rows(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn worked() -> ConfusionMatrix {
        ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]).unwrap()
    }

    #[test]
    fn worked_fixture() {
        let m = worked();
        assert!((overall_accuracy(&m).unwrap() - 0.70).abs() < 1e-12);
        assert!((kappa(&m).unwrap() - 0.40).abs() < 1e-12);
        let expect = 0.5 * (40.0 / 70.0) + 0.5 * (30.0 / 60.0);
        assert!((fwiou(&m).unwrap() - expect).abs() < 1e-12);
        assert!((fwiou(&m).unwrap() - 0.535714).abs() < 1e-6);
    }

    #[test]
    fn diagonal_is_perfect() {
        let m = ConfusionMatrix::from_rows(&[vec![5, 0, 0], vec![0, 7, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(overall_accuracy(&m).unwrap(), 1.0);
        assert_eq!(kappa(&m).unwrap(), 1.0);
        assert_eq!(fwiou(&m).unwrap(), 1.0);
    }

    #[test]
    fn single_off_diagonal() {
        let m = ConfusionMatrix::from_rows(&[vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(overall_accuracy(&m).unwrap(), 0.0);
        assert_eq!(fwiou(&m).unwrap(), 0.0);
    }

    #[test]
    fn chance_agreement_gives_zero_kappa() {
        // rows (30, 70), cols (40, 60): N_ij = row_i col_j / 100
        let m = ConfusionMatrix::from_rows(&[vec![12, 18], vec![28, 42]]).unwrap();
        assert!(kappa(&m).unwrap().abs() < 1e-15);
    }

    #[test]
    fn degenerate_kappa() {
        let m = ConfusionMatrix::from_rows(&[vec![10, 0], vec![0, 0]]).unwrap();
        assert!(matches!(kappa(&m), Err(Error::DegenerateKappa)));
    }

    #[test]
    fn counting_and_unlabelled() {
        let m = confusion(&[0, 1, 1, 0], &[1, 1, 2, 0], 2).unwrap();
        assert_eq!(m.rows(), vec![vec![1, 1], vec![0, 1]]);
        let m = confusion(&[0, 1], &[0, 0], 2).unwrap();
        assert_eq!(m.total(), 0);
        assert!(matches!(overall_accuracy(&m), Err(Error::EmptyConfusion)));
        assert!(confusion(&[0, 5], &[1, 1], 2).is_err());
        assert!(confusion(&[0], &[1, 1], 2).is_err());
        let m = confusion(&[0, 1, 2], &[1, 2, 3], 3).unwrap();
        assert_eq!(m.trace(), 3);
    }

    #[test]
    fn wrong_class_contributes_nothing() {
        // class 1 always predicted as 0
        let m = ConfusionMatrix::from_rows(&[vec![10, 0], vec![5, 0]]).unwrap();
        let expect = (10.0 / 15.0) * (10.0 / 15.0);
        assert!((fwiou(&m).unwrap() - expect).abs() < 1e-15);
    }

    /// Set-intersection definitions computed straight from the maps.
    fn oracle(pred: &[usize], labels: &[u16], k: usize) -> (f64, f64) {
        let labelled: Vec<usize> = (0..pred.len()).filter(|&p| labels[p] != 0).collect();
        let n = labelled.len() as f64;
        let truth_set = |i: usize| labelled.iter().filter(move |&&p| labels[p] as usize - 1 == i);
        let mut fw = 0.0;
        let mut agree = 0.0;
        let mut chance = 0.0;
        for i in 0..k {
            let t: Vec<usize> = truth_set(i).copied().collect();
            let pset: Vec<usize> = labelled.iter().copied().filter(|&p| pred[p] == i).collect();
            let inter = t.iter().filter(|p| pset.contains(p)).count() as f64;
            let union = (t.len() + pset.len()) as f64 - inter;
            if union > 0.0 {
                fw += (t.len() as f64 / n) * inter / union;
            }
            agree += inter;
            chance += (t.len() as f64 / n) * (pset.len() as f64 / n);
        }
        let po = agree / n;
        (fw, (po - chance) / (1.0 - chance))
    }

    #[test]
    fn matches_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let k = rng.gen_range(2..6);
            let n = rng.gen_range(20..120);
            let labels: Vec<u16> = (0..n).map(|_| rng.gen_range(0..=k as u16)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let m = confusion(&pred, &labels, k).unwrap();
            if m.total() == 0 {
                continue;
            }
            let (fw, ka) = oracle(&pred, &labels, k);
            assert!((fwiou(&m).unwrap() - fw).abs() < 1e-12);
            if let Ok(kv) = kappa(&m) {
                assert!((kv - ka).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rows: Vec<Vec<u64>> = (0..4).map(|_| (0..4).map(|_| rng.gen_range(0..50)).collect()).collect();
            let m = ConfusionMatrix::from_rows(&rows).unwrap();
            let perm = [2, 0, 3, 1];
            let pr: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| rows[perm[i]][perm[j]]).collect()).collect();
            let p = ConfusionMatrix::from_rows(&pr).unwrap();
            assert!((overall_accuracy(&m).unwrap() - overall_accuracy(&p).unwrap()).abs() < 1e-15);
            assert!((kappa(&m).unwrap() - kappa(&p).unwrap()).abs() < 1e-12);
            assert!((fwiou(&m).unwrap() - fwiou(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_one_only_for_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let rows: Vec<Vec<u64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(0..4)).collect()).collect();
            let m = ConfusionMatrix::from_rows(&rows).unwrap();
            let diagonal = (0..3).all(|i| (0..3).all(|j| i == j || m.get(i, j) == 0));
            if let Ok(k) = kappa(&m) {
                assert_eq!(k == 1.0, diagonal && m.trace() > 0);
            }
        }
    }

    #[test]
    fn report_field_order() {
        let r = MetricsReport::from_confusion(&worked()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let keys = ["\"oa\"", "\"kappa\"", "\"fwiou\"", "\"per_class_accuracy\"", "\"confusion\""];
        let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.per_class_accuracy, vec![Some(0.8), Some(0.6)]);
    }
}
