use crate::error::{Error, Result};

/// Grouping of input rows into output segments, stored as CSR.
///
/// Segment `g` owns entries `offsets[g]..offsets[g + 1]` of `members`. The
/// transpose (input row -> entry positions) is built once up front so that
/// backward passes can gather per input row instead of scattering.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIndex {
    offsets: Vec<usize>,
    members: Vec<usize>,
    num_inputs: usize,
    entry_segment: Vec<usize>,
    t_offsets: Vec<usize>,
    t_entries: Vec<usize>,
}

impl SegmentIndex {
    pub fn new<S: AsRef<[usize]>>(segments: &[S], num_inputs: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(segments.len() + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for s in segments {
            members.extend_from_slice(s.as_ref());
            offsets.push(members.len());
        }
        Self::from_csr(offsets, members, num_inputs)
    }

    pub fn from_csr(offsets: Vec<usize>, members: Vec<usize>, num_inputs: usize) -> Result<Self> {
        if offsets.first() != Some(&0)
            || offsets.last() != Some(&members.len())
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Index("malformed segment offsets".into()));
        }
        if let Some(&bad) = members.iter().find(|&&m| m >= num_inputs) {
            return Err(Error::Index(format!(
                "segment member {bad} out of range for {num_inputs} input rows"
            )));
        }
        let mut entry_segment = vec![0; members.len()];
        for g in 0..offsets.len() - 1 {
            entry_segment[offsets[g]..offsets[g + 1]].fill(g);
        }
        let mut counts = vec![0usize; num_inputs + 1];
        for &m in &members {
            counts[m + 1] += 1;
        }
        for i in 0..num_inputs {
            counts[i + 1] += counts[i];
        }
        let t_offsets = counts.clone();
        let mut cursor = counts;
        let mut t_entries = vec![0; members.len()];
        for (p, &m) in members.iter().enumerate() {
            t_entries[cursor[m]] = p;
            cursor[m] += 1;
        }
        Ok(Self {
            offsets,
            members,
            num_inputs,
            entry_segment,
            t_offsets,
            t_entries,
        })
    }

    #[inline]
    pub fn num_segments(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    #[inline]
    pub fn num_entries(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn segment(&self, g: usize) -> &[usize] {
        &self.members[self.offsets[g]..self.offsets[g + 1]]
    }

    #[inline]
    pub fn entry_range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    #[inline]
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Entry positions (into [`Self::members`]) that reference input row `i`.
    #[inline]
    pub fn entries_of_input(&self, i: usize) -> &[usize] {
        &self.t_entries[self.t_offsets[i]..self.t_offsets[i + 1]]
    }

    #[inline]
    pub fn segment_of_entry(&self, p: usize) -> usize {
        self.entry_segment[p]
    }

    pub fn first_empty_segment(&self) -> Option<usize> {
        (0..self.num_segments()).find(|&g| self.offsets[g] == self.offsets[g + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_lists_every_reference() {
        let idx = SegmentIndex::new(&[vec![0, 2], vec![2], vec![1, 0]], 3).unwrap();
        assert_eq!(idx.num_entries(), 5);
        assert_eq!(idx.entries_of_input(0), &[0, 4]);
        assert_eq!(idx.entries_of_input(2), &[1, 2]);
        assert_eq!(idx.segment_of_entry(3), 2);
        assert_eq!(idx.first_empty_segment(), None);
    }

    #[test]
    fn out_of_range_member_rejected() {
        let err = SegmentIndex::new(&[vec![0, 5]], 3).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
    }
}
