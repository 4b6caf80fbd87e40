use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::tensor::SegmentIndex;

/// Index structures derived once from a hierarchy and reused every epoch.
#[derive(Debug, Clone)]
pub struct HierarchyPlan {
    sizes: Vec<usize>,
    /// Closed neighborhoods of each level's graph.
    neighborhoods: Vec<Arc<SegmentIndex>>,
    /// `children[k - 1]` groups level `k - 1` nodes under level `k` clusters.
    children: Vec<Arc<SegmentIndex>>,
    /// Per base node: itself, then its ancestors, as rows of the stacked
    /// level matrices.
    attention: Arc<SegmentIndex>,
    /// Base node owning each attention entry.
    owners: Arc<[usize]>,
    offsets: Vec<usize>,
}

impl HierarchyPlan {
    pub fn new(h: &Hierarchy) -> Result<Self> {
        let k = h.num_levels();
        let sizes = h.level_sizes();
        let neighborhoods = h
            .levels()
            .iter()
            .map(|t| SegmentIndex::new(&t.closed_neighborhoods(), t.num_nodes()).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let children = (1..k)
            .map(|j| {
                let members = h.parent(j - 1).members();
                SegmentIndex::new(&members, sizes[j - 1]).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        let n = sizes[0];
        let mut segments = Vec::with_capacity(n);
        for v in 0..n {
            let anc = h.ancestors(v);
            if anc.len() != k - 1 {
                return Err(Error::Hierarchy(format!(
                    "node {v} has {} ancestors, expected {}",
                    anc.len(),
                    k - 1
                )));
            }
            let mut seg = Vec::with_capacity(k);
            seg.push(v);
            seg.extend(anc.iter().enumerate().map(|(j, &c)| offsets[j + 1] + c));
            segments.push(seg);
        }
        let attention = Arc::new(SegmentIndex::new(&segments, acc)?);
        let owners: Arc<[usize]> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
        Ok(Self {
            sizes,
            neighborhoods,
            children,
            attention,
            owners,
            offsets,
        })
    }

    #[inline]
    pub fn num_levels(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.sizes[0]
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn neighborhoods(&self, k: usize) -> &Arc<SegmentIndex> {
        &self.neighborhoods[k]
    }

    /// Children index for level `k >= 1`.
    pub fn children(&self, k: usize) -> &Arc<SegmentIndex> {
        &self.children[k - 1]
    }

    pub fn attention(&self) -> &Arc<SegmentIndex> {
        &self.attention
    }

    pub fn owners(&self) -> &Arc<[usize]> {
        &self.owners
    }

    /// First row of level `k` in the stacked level matrix.
    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }
}
