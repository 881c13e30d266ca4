use std::cmp::Ordering;

/// A product of generator powers such as `eps * delta^2`.
///
/// Exponents are stored sparsely as `(generator index, exponent)` pairs,
/// sorted by index, with every stored exponent nonzero. The empty monomial
/// is `1` and carries the standard part of a series.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    exponents: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    /// `generator^power`; `power == 0` gives the unit monomial.
    pub fn generator(index: usize, power: u32) -> Self {
        if power == 0 {
            return Self::one();
        }
        Self {
            exponents: vec![(index, power)],
        }
    }

    /// Builds a monomial from arbitrary pairs, merging repeated indices and
    /// dropping zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut m = Self::one();
        for (index, power) in pairs {
            m = m.mul(&Self::generator(index, power));
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, index: usize) -> u32 {
        self.exponents
            .iter()
            .find(|&&(i, _)| i == index)
            .map_or(0, |&(_, e)| e)
    }

    /// Nonzero `(generator index, exponent)` pairs in index order.
    pub fn exponents(&self) -> &[(usize, u32)] {
        &self.exponents
    }

    /// Largest generator index that occurs, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.exponents.last().map(|&(i, _)| i)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.exponents.len() + other.exponents.len());
        let (mut a, mut b) = (
            self.exponents.iter().peekable(),
            other.exponents.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(ia, ea)), Some(&&(ib, eb))) => match ia.cmp(&ib) {
                    Ordering::Less => {
                        out.push((ia, ea));
                        a.next();
                    }
                    Ordering::Greater => {
                        out.push((ib, eb));
                        b.next();
                    }
                    Ordering::Equal => {
                        out.push((ia, ea + eb));
                        a.next();
                        b.next();
                    }
                },
                (Some(&&p), None) => {
                    out.push(p);
                    a.next();
                }
                (None, Some(&&p)) => {
                    out.push(p);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Self { exponents: out }
    }

    /// True when every exponent of `self` is at most the matching exponent of `other`.
    pub fn divides(&self, other: &Self) -> bool {
        self.exponents.iter().all(|&(i, e)| other.exponent(i) >= e)
    }

    /// Exact quotient `self / divisor`, or `None` if `divisor` does not divide `self`.
    pub fn div(&self, divisor: &Self) -> Option<Self> {
        if !divisor.divides(self) {
            return None;
        }
        let exponents = self
            .exponents
            .iter()
            .filter_map(|&(i, e)| {
                let left = e - divisor.exponent(i);
                (left > 0).then_some((i, left))
            })
            .collect();
        Some(Self { exponents })
    }
}

impl Ord for Monomial {
    /// Graded order: total degree first, then lexicographic by generator
    /// declaration order with higher powers of earlier generators first
    /// (`eps^2 < eps*delta < delta^2`).
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let top = self.max_index().max(other.max_index()).unwrap_or(0);
            for i in 0..=top {
                let (a, b) = (self.exponent(i), other.exponent(i));
                if a != b {
                    return b.cmp(&a);
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
