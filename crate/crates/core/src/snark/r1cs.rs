use crate::arith::Fq;

/// Sparse linear combination over wires: `sum coeff * z[wire]`.
pub type LinComb = Vec<(usize, Fq)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub a: LinComb,
    pub b: LinComb,
    pub c: LinComb,
}

pub fn eval_lc(lc: &LinComb, z: &[Fq]) -> Fq {
    lc.iter().map(|(i, k)| z[*i] * *k).sum()
}

/// Rank-1 constraint system. Wire 0 is the constant one, wires
/// `1..=num_public` are the public inputs, the rest are private.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct R1CSystem {
    pub constraints: Vec<Constraint>,
    pub num_wires: usize,
    pub num_public: usize,
}

impl R1CSystem {
    pub fn new(num_public: usize) -> Self {
        R1CSystem {
            constraints: Vec::new(),
            num_wires: 1 + num_public,
            num_public,
        }
    }

    pub fn alloc(&mut self) -> usize {
        self.num_wires += 1;
        self.num_wires - 1
    }

    pub fn enforce(&mut self, a: LinComb, b: LinComb, c: LinComb) {
        self.constraints.push(Constraint { a, b, c });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Index of the first violated constraint, if any.
    pub fn first_unsatisfied(&self, z: &[Fq]) -> Option<usize> {
        if z.len() != self.num_wires || z[0] != Fq::ONE {
            return Some(0);
        }
        self.constraints
            .iter()
            .position(|k| eval_lc(&k.a, z) * eval_lc(&k.b, z) != eval_lc(&k.c, z))
    }

    pub fn is_satisfied(&self, z: &[Fq]) -> bool {
        self.first_unsatisfied(z).is_none()
    }
}
