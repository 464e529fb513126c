use serde::{Deserialize, Serialize};

/// Sorted, duplicate-free subset of `0..universe` with constant-time membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    items: Vec<usize>,
    mask: Vec<bool>,
}

impl IndexSet {
    pub fn empty(universe: usize) -> Self {
        IndexSet { items: Vec::new(), mask: vec![false; universe] }
    }

    pub fn full(universe: usize) -> Self {
        IndexSet { items: (0..universe).collect(), mask: vec![true; universe] }
    }

    /// Builds a set from arbitrary ids, ignoring duplicates.
    ///
    /// # Panics
    /// If any id is outside `0..universe`.
    pub fn from_unsorted<I: IntoIterator<Item = usize>>(universe: usize, ids: I) -> Self {
        let mut mask = vec![false; universe];
        for i in ids {
            assert!(i < universe, "index {i} outside universe {universe}");
            mask[i] = true;
        }
        Self::from_mask(mask)
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        let items = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        IndexSet { items, mask }
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.items
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.items.iter().all(|&i| other.contains(i))
    }

    pub fn complement(&self) -> IndexSet {
        Self::from_mask(self.mask.iter().map(|m| !m).collect())
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        Self::from_mask(self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect())
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        Self::from_mask(self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect())
    }

    /// Number of members shared with `other`.
    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        self.items.iter().filter(|&&i| other.contains(i)).count()
    }
}

/// On-disk form: the universe size and the member list.
#[derive(Serialize, Deserialize)]
struct IndexSetRepr {
    universe: usize,
    items: Vec<usize>,
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IndexSetRepr { universe: self.universe(), items: self.items.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = IndexSetRepr::deserialize(d)?;
        if let Some(&bad) = repr.items.iter().find(|&&i| i >= repr.universe) {
            return Err(serde::de::Error::custom(format!(
                "index {bad} outside universe {}",
                repr.universe
            )));
        }
        Ok(IndexSet::from_unsorted(repr.universe, repr.items))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_deduplicated() {
        let s = IndexSet::from_unsorted(6, [4, 1, 4, 0]);
        assert_eq!(s.as_slice(), &[0, 1, 4]);
        assert!(s.contains(4) && !s.contains(2) && !s.contains(99));
        assert_eq!(s.complement().as_slice(), &[2, 3, 5]);
    }

    #[test]
    fn set_algebra() {
        let a = IndexSet::from_unsorted(5, [0, 1, 2]);
        let b = IndexSet::from_unsorted(5, [2, 3]);
        assert_eq!(a.union(&b).as_slice(), &[0, 1, 2, 3]);
        assert_eq!(a.intersection(&b).as_slice(), &[2]);
        assert_eq!(a.intersection_len(&b), 1);
        assert!(IndexSet::from_unsorted(5, [1]).is_subset(&a));
    }

    #[test]
    fn serde_round_trip() {
        let s = IndexSet::from_unsorted(7, [6, 2]);
        let json = serde_json::to_string(&s).unwrap();
        let back: IndexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IndexSet>(r#"{"universe":2,"items":[5]}"#).is_err());
    }
}
