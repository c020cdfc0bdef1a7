use std::fmt;

/// A set of task ids drawn from a dense universe `0..n`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct TaskSet {
    words: Vec<u64>,
}

impl TaskSet {
    pub fn empty(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut set = Self::empty(n);
        for t in 0..n {
            set.insert(t);
        }
        set
    }

    pub fn from_tasks<I: IntoIterator<Item = usize>>(n: usize, tasks: I) -> Self {
        let mut set = Self::empty(n);
        for t in tasks {
            set.insert(t);
        }
        set
    }

    pub fn insert(&mut self, task: usize) {
        let (w, b) = (task / 64, task % 64);
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << b;
    }

    pub fn contains(&self, task: usize) -> bool {
        self.words
            .get(task / 64)
            .is_some_and(|w| w & (1 << (task % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_len(&self, other: &TaskSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersects(&self, other: &TaskSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn intersection(&self, other: &TaskSet) -> TaskSet {
        TaskSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// Removes every task of `other` from `self`.
    pub fn subtract(&mut self, other: &TaskSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union_with(&mut self, other: &TaskSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &TaskSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i * 64 + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let a = TaskSet::from_tasks(130, [0, 5, 64, 129]);
        let b = TaskSet::from_tasks(130, [5, 129, 7]);
        assert_eq!(a.len(), 4);
        assert!(a.contains(64) && !a.contains(63));
        assert_eq!(a.intersection_len(&b), 2);
        assert_eq!(a.intersection(&b).to_vec(), vec![5, 129]);
        let mut c = a.clone();
        c.subtract(&b);
        assert_eq!(c.to_vec(), vec![0, 64]);
        assert!(c.is_subset(&a));
        assert!(!a.is_subset(&c));
        assert_eq!(TaskSet::full(70).len(), 70);
        assert!(TaskSet::empty(10).is_empty());
        assert_eq!(format!("{:?}", c), "{0, 64}");
    }
}
