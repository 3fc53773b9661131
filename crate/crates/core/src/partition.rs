//! Row-range split of a grid across workers.

use alloc::vec::Vec;

/// Half-open row range `[start, end)` owned by one worker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowPartition {
    pub worker: usize,
    pub start: u32,
    pub end: u32,
}

impl RowPartition {
    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, row: u32) -> bool {
        (self.start..self.end).contains(&row)
    }
}

/// Splits `rows` into `workers` contiguous ranges whose sizes differ by at
/// most one. With more workers than rows some ranges are empty.
pub fn partition_rows(rows: u32, workers: usize) -> Vec<RowPartition> {
    let w = workers.max(1) as u64;
    (0..w)
        .map(|i| RowPartition {
            worker: i as usize,
            start: (rows as u64 * i / w) as u32,
            end: (rows as u64 * (i + 1) / w) as u32,
        })
        .collect()
}

/// Index of the partition owning `row`.
pub fn owner_of(parts: &[RowPartition], row: u32) -> Option<usize> {
    parts.iter().position(|p| p.contains(row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn even_split() {
        let p = partition_rows(8, 4);
        let spans: Vec<(u32, u32)> = p.iter().map(|r| (r.start, r.end)).collect();
        assert_eq!(spans, vec![(0, 2), (2, 4), (4, 6), (6, 8)]);
    }

    #[test]
    fn uneven_split() {
        let p = partition_rows(10, 3);
        let lens: Vec<u32> = p.iter().map(|r| r.len()).collect();
        assert_eq!(lens, vec![3, 3, 4]);
        assert_eq!(owner_of(&p, 9), Some(2));
    }

    #[test]
    fn more_workers_than_rows() {
        let p = partition_rows(2, 4);
        assert_eq!(p.iter().filter(|r| r.is_empty()).count(), 2);
        assert_eq!(p.iter().map(|r| r.len()).sum::<u32>(), 2);
    }
}
