//! Indexing over ordered sets of discrete variables.
//!
//! A domain is a sorted list of variable ids with their state counts. Tables
//! are laid out row-major over that list, last variable fastest.

use crate::model::VarId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteDomain {
    vars: Vec<VarId>,
    cards: Vec<usize>,
}

impl DiscreteDomain {
    /// Build a domain; `pairs` need not be sorted but must not repeat ids.
    pub fn new(mut pairs: Vec<(VarId, usize)>) -> Self {
        pairs.sort_by_key(|&(v, _)| v);
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0), "duplicate var");
        let (vars, cards) = pairs.into_iter().unzip();
        DiscreteDomain { vars, cards }
    }

    pub fn empty() -> Self {
        DiscreteDomain {
            vars: Vec::new(),
            cards: Vec::new(),
        }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    pub fn position(&self, v: VarId) -> Option<usize> {
        self.vars.binary_search(&v).ok()
    }

    pub fn card_of(&self, v: VarId) -> Option<usize> {
        self.position(v).map(|i| self.cards[i])
    }

    /// Number of configurations (1 for the empty domain).
    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    /// Linear index of an assignment given in domain order.
    pub fn index_of(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.len());
        let mut idx = 0;
        for (s, c) in states.iter().zip(&self.cards) {
            debug_assert!(s < c);
            idx = idx * c + s;
        }
        idx
    }

    /// Assignment (in domain order) for a linear index.
    pub fn state_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for i in (0..self.len()).rev() {
            out[i] = idx % self.cards[i];
            idx /= self.cards[i];
        }
        out
    }

    /// Union of two domains (cards must agree on shared vars).
    pub fn union(&self, other: &DiscreteDomain) -> DiscreteDomain {
        let mut pairs: Vec<(VarId, usize)> = self
            .vars
            .iter()
            .copied()
            .zip(self.cards.iter().copied())
            .collect();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            match self.card_of(v) {
                Some(existing) => debug_assert_eq!(existing, c, "card mismatch for {v}"),
                None => pairs.push((v, c)),
            }
        }
        DiscreteDomain::new(pairs)
    }

    /// Domain without the listed variables.
    pub fn without(&self, drop: &[VarId]) -> DiscreteDomain {
        DiscreteDomain::new(
            self.vars
                .iter()
                .zip(&self.cards)
                .filter(|(v, _)| !drop.contains(v))
                .map(|(&v, &c)| (v, c))
                .collect(),
        )
    }

    /// For each configuration of `self`, the index of its restriction to
    /// `sub` (whose variables must all appear in `self`).
    pub fn projection_indices(&self, sub: &DiscreteDomain) -> Vec<usize> {
        let positions: Vec<usize> = sub
            .vars
            .iter()
            .map(|&v| self.position(v).expect("sub domain not contained"))
            .collect();
        let mut out = Vec::with_capacity(self.size());
        let mut states = vec![0usize; self.len()];
        for _ in 0..self.size() {
            let substates: Vec<usize> = positions.iter().map(|&p| states[p]).collect();
            out.push(sub.index_of(&substates));
            // advance row-major, last var fastest
            for i in (0..self.len()).rev() {
                states[i] += 1;
                if states[i] < self.cards[i] {
                    break;
                }
                states[i] = 0;
            }
        }
        out
    }

    /// Iterate configurations as (index, states-in-domain-order).
    pub fn configs(&self) -> impl Iterator<Item = (usize, Vec<usize>)> + '_ {
        (0..self.size()).map(|i| (i, self.state_of(i)))
    }
}
