//! Dense factors over discrete variables.
//!
//! Values are stored row-major with the last scope variable varying fastest.
//! Scopes are kept sorted by variable index so products can merge scopes
//! without a permutation step.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Self {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    /// `scope` must be strictly increasing.
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(scope.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Self {
            scope,
            cards,
            values,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    #[cfg(test)]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self) -> f64 {
        debug_assert!(self.scope.is_empty());
        self.values[0]
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = Vec::with_capacity(self.scope.len() + other.scope.len());
        let mut cards = Vec::with_capacity(scope.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.scope.len() || j < other.scope.len() {
            let take_self =
                j == other.scope.len() || (i < self.scope.len() && self.scope[i] <= other.scope[j]);
            if take_self {
                if j < other.scope.len() && self.scope[i] == other.scope[j] {
                    j += 1;
                }
                scope.push(self.scope[i]);
                cards.push(self.cards[i]);
                i += 1;
            } else {
                scope.push(other.scope[j]);
                cards.push(other.cards[j]);
                j += 1;
            }
        }

        // Stride of each result variable inside each operand (0 if absent).
        let a_strides = self.strides();
        let b_strides = other.strides();
        let a_map: Vec<usize> = scope
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|x| x == v)
                    .map_or(0, |k| a_strides[k])
            })
            .collect();
        let b_map: Vec<usize> = scope
            .iter()
            .map(|v| {
                other
                    .scope
                    .iter()
                    .position(|x| x == v)
                    .map_or(0, |k| b_strides[k])
            })
            .collect();

        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; scope.len()];
        let (mut ai, mut bi) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ai] * other.values[bi]);
            for d in (0..scope.len()).rev() {
                counter[d] += 1;
                ai += a_map[d];
                bi += b_map[d];
                if counter[d] < cards[d] {
                    break;
                }
                ai -= a_map[d] * cards[d];
                bi -= b_map[d] * cards[d];
                counter[d] = 0;
            }
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(k) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let inner: usize = self.cards[k + 1..].iter().product();
        let card = self.cards[k];
        let outer = self.values.len() / (inner * card);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Fixes `var` to `state`, dropping it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(k) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let inner: usize = self.cards[k + 1..].iter().product();
        let card = self.cards[k];
        let outer = self.values.len() / (inner * card);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Value at a full assignment given as `(variable, state)` lookups.
    pub fn at(&self, state_of: impl Fn(usize) -> usize) -> f64 {
        let idx = self
            .scope
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&v, &c)| acc * c + state_of(v));
        self.values[idx]
    }
}
