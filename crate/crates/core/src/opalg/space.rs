use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::OpError;

/// Ordered list of labeled sites with their local Hilbert-space dimensions.
///
/// The first site is the most significant digit of the basis index, so the
/// matrix of `A ⊗ B` on sites `[a, b]` is `kron(A, B)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteSpace {
    labels: Vec<usize>,
    dims: Vec<usize>,
}

impl SiteSpace {
    pub fn new(labels: Vec<usize>, dims: Vec<usize>) -> Result<Self, OpError> {
        if labels.len() != dims.len() {
            return Err(OpError::DimensionMismatch {
                expected: labels.len(),
                found: dims.len(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(OpError::DuplicateSite(*l));
            }
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(OpError::ZeroDimension(labels[pos]));
        }
        Ok(Self { labels, dims })
    }

    /// Spin-½ sites with the given labels.
    pub fn qubits(labels: impl IntoIterator<Item = usize>) -> Self {
        let labels: Vec<usize> = labels.into_iter().collect();
        let dims = vec![2; labels.len()];
        Self::new(labels, dims).expect("qubit labels must be unique")
    }

    pub fn empty() -> Self {
        Self {
            labels: Vec::new(),
            dims: Vec::new(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.contains(&label)
    }

    pub fn dim_of(&self, label: usize) -> Option<usize> {
        self.position(label).map(|p| self.dims[p])
    }

    /// Sub-space on `keep`, in the order given.
    pub fn subspace(&self, keep: &[usize]) -> Result<SiteSpace, OpError> {
        let dims = keep
            .iter()
            .map(|&l| self.dim_of(l).ok_or(OpError::UnknownSite(l)))
            .collect::<Result<Vec<_>, _>>()?;
        SiteSpace::new(keep.to_vec(), dims)
    }

    /// Labels of `self` not in `keep`, in the order of `self`.
    pub fn complement(&self, keep: &[usize]) -> Vec<usize> {
        self.labels
            .iter()
            .copied()
            .filter(|l| !keep.contains(l))
            .collect()
    }

    /// Sites of `self` followed by the sites of `other` that are not already present.
    pub fn union(&self, other: &SiteSpace) -> Result<SiteSpace, OpError> {
        let mut labels = self.labels.clone();
        let mut dims = self.dims.clone();
        for (&l, &d) in other.labels.iter().zip(&other.dims) {
            match self.dim_of(l) {
                Some(existing) if existing != d => {
                    return Err(OpError::DimensionMismatch {
                        expected: existing,
                        found: d,
                    })
                }
                Some(_) => {}
                None => {
                    labels.push(l);
                    dims.push(d);
                }
            }
        }
        SiteSpace::new(labels, dims)
    }

    /// True when both spaces hold the same labeled sites, possibly in a different order.
    pub fn same_sites(&self, other: &SiteSpace) -> bool {
        self.len() == other.len()
            && self
                .labels
                .iter()
                .zip(&self.dims)
                .all(|(&l, &d)| other.dim_of(l) == Some(d))
    }
}

/// Index bookkeeping for splitting a space into a kept part (in caller order)
/// and the remaining sites.
#[derive(Clone, Debug)]
pub(crate) struct Split {
    keep_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
}

impl Split {
    pub(crate) fn new(space: &SiteSpace, keep: &[usize]) -> Result<Self, OpError> {
        let mut keep_pos = Vec::with_capacity(keep.len());
        for (i, &l) in keep.iter().enumerate() {
            if keep[..i].contains(&l) {
                return Err(OpError::DuplicateSite(l));
            }
            keep_pos.push(space.position(l).ok_or(OpError::UnknownSite(l))?);
        }
        let rest_pos: Vec<usize> = (0..space.len()).filter(|p| !keep_pos.contains(p)).collect();

        let dims = space.dims();
        let mut strides = vec![1usize; dims.len()];
        for p in (0..dims.len().saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * dims[p + 1];
        }
        Ok(Self {
            keep_offsets: offsets(&keep_pos, dims, &strides),
            rest_offsets: offsets(&rest_pos, dims, &strides),
        })
    }

    pub(crate) fn keep_dim(&self) -> usize {
        self.keep_offsets.len()
    }

    pub(crate) fn full_dim(&self) -> usize {
        self.keep_offsets.len() * self.rest_offsets.len()
    }

    /// Partial trace over the non-kept sites.
    pub(crate) fn trace_out(&self, m: MatRef<'_, c64>) -> Mat<c64> {
        let kd = self.keep_dim();
        let mut out = Mat::<c64>::zeros(kd, kd);
        for &base in &self.rest_offsets {
            for (b, &ob) in self.keep_offsets.iter().enumerate() {
                let col = base + ob;
                for (a, &oa) in self.keep_offsets.iter().enumerate() {
                    out[(a, b)] += m[(base + oa, col)];
                }
            }
        }
        out
    }

    /// `h ⊗ I_rest`, laid out in the full space's index order.
    pub(crate) fn embed(&self, h: MatRef<'_, c64>) -> Mat<c64> {
        let n = self.full_dim();
        let mut out = Mat::<c64>::zeros(n, n);
        self.embed_add(&mut out, h, 1.0);
        out
    }

    /// `out += scale * (h ⊗ I_rest)`.
    pub(crate) fn embed_add(&self, out: &mut Mat<c64>, h: MatRef<'_, c64>, scale: f64) {
        for &base in &self.rest_offsets {
            for (b, &ob) in self.keep_offsets.iter().enumerate() {
                let col = base + ob;
                for (a, &oa) in self.keep_offsets.iter().enumerate() {
                    out[(base + oa, col)] += h[(a, b)] * scale;
                }
            }
        }
    }
}

fn offsets(positions: &[usize], dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = positions.iter().map(|&p| dims[p]).product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; positions.len()];
    for _ in 0..total {
        out.push(
            positions
                .iter()
                .zip(&digits)
                .map(|(&p, &d)| d * strides[p])
                .sum(),
        );
        for k in (0..positions.len()).rev() {
            digits[k] += 1;
            if digits[k] < dims[positions[k]] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opalg::dense;

    #[test]
    fn rejects_duplicate_labels() {
        assert!(matches!(
            SiteSpace::new(vec![1, 2, 1], vec![2, 2, 2]),
            Err(OpError::DuplicateSite(1))
        ));
    }

    #[test]
    fn union_keeps_order_and_checks_dims() {
        let a = SiteSpace::qubits([3, 1]);
        let b = SiteSpace::qubits([1, 7]);
        let u = a.union(&b).unwrap();
        assert_eq!(u.labels(), &[3, 1, 7]);
        let c = SiteSpace::new(vec![1], vec![3]).unwrap();
        assert!(a.union(&c).is_err());
    }

    #[test]
    fn split_permutes_kept_sites() {
        // kron(A, B) with A on site 0 and B on site 1; keeping [1, 0] swaps the factors
        let space = SiteSpace::new(vec![0, 1], vec![2, 3]).unwrap();
        let a = Mat::from_fn(2, 2, |i, j| c64::new((i * 2 + j) as f64, 0.0));
        let b = Mat::from_fn(3, 3, |i, j| c64::new(1.0 + (i * 3 + j) as f64, 0.5));
        let ab = dense::kron(a.as_ref(), b.as_ref());
        let swapped = Split::new(&space, &[1, 0]).unwrap().trace_out(ab.as_ref());
        let ba = dense::kron(b.as_ref(), a.as_ref());
        assert!((&swapped - &ba).norm_l2() < 1e-12);
    }
}
