//! Presentations of closed orientable surface groups.
//!
//! Generators are indexed from zero in the fixed order
//! `a_1, b_1, a_2, b_2, ..., a_g, b_g`, so generator `2i` is `a_{i+1}` and
//! generator `2i + 1` is `b_{i+1}`. Every vector of characters or hopping
//! matrices in this crate uses the same order.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Self { generator, inverse }
    }

    pub fn inverted(self) -> Self {
        Self {
            generator: self.generator,
            inverse: !self.inverse,
        }
    }

    pub fn exponent(self) -> i64 {
        if self.inverse {
            -1
        } else {
            1
        }
    }
}

/// A word in the generators and their inverses, stored without free reduction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a word from `(generator, exponent)` pairs. Exponents other than
    /// `±1` are expanded into repeated letters.
    pub fn from_powers(powers: &[(usize, i64)]) -> Self {
        let mut letters = Vec::new();
        for &(generator, exp) in powers {
            let letter = Letter::new(generator, exp < 0);
            letters.extend(std::iter::repeat_n(letter, exp.unsigned_abs() as usize));
        }
        Self(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverted()).collect())
    }

    /// Cancels adjacent `x x^{-1}` pairs until none remain.
    pub fn reduced(&self) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &letter in &self.0 {
            if out.last() == Some(&letter.inverted()) {
                out.pop();
            } else {
                out.push(letter);
            }
        }
        Word(out)
    }

    pub fn check_range(&self, generator_count: usize) -> Result<()> {
        match self.0.iter().find(|l| l.generator >= generator_count) {
            Some(l) => Err(Error::GeneratorOutOfRange {
                index: l.generator,
                count: generator_count,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SurfaceGroup {
    genus: usize,
}

impl SurfaceGroup {
    pub fn new(genus: usize) -> Result<Self> {
        if genus == 0 {
            return Err(Error::ZeroGenus(genus));
        }
        Ok(Self { genus })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn generator_count(&self) -> usize {
        2 * self.genus
    }

    /// Labels `a1, b1, ..., ag, bg`.
    pub fn generator_labels(&self) -> Vec<String> {
        (0..self.generator_count()).map(generator_label).collect()
    }

    /// The product of commutators `a_1 b_1 a_1^{-1} b_1^{-1} ... a_g b_g a_g^{-1} b_g^{-1}`.
    pub fn relator(&self) -> Word {
        let mut letters = Vec::with_capacity(4 * self.genus);
        for i in 0..self.genus {
            let (a, b) = (2 * i, 2 * i + 1);
            letters.push(Letter::new(a, false));
            letters.push(Letter::new(b, false));
            letters.push(Letter::new(a, true));
            letters.push(Letter::new(b, true));
        }
        Word(letters)
    }

    /// Exponent-sum vector of `word` in `Z^{2g}`.
    pub fn abelianize(&self, word: &Word) -> Result<Vec<i64>> {
        word.check_range(self.generator_count())?;
        let mut v = vec![0i64; self.generator_count()];
        for l in word.letters() {
            v[l.generator] += l.exponent();
        }
        Ok(v)
    }
}

pub fn generator_label(index: usize) -> String {
    let kind = if index.is_multiple_of(2) { 'a' } else { 'b' };
    format!("{kind}{}", index / 2 + 1)
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", generator_label(l.generator))?;
            if l.inverse {
                write!(f, "^-1")?;
            }
        }
        Ok(())
    }
}

/// Ordered product of the matrices assigned to the letters of `word`.
pub fn evaluate_word(word: &Word, assignment: &[DMatrix<Complex64>]) -> Result<DMatrix<Complex64>> {
    let inverses = invert_all(assignment)?;
    evaluate_with_inverses(word, assignment, &inverses)
}

pub(crate) fn invert_all(assignment: &[DMatrix<Complex64>]) -> Result<Vec<DMatrix<Complex64>>> {
    assignment
        .iter()
        .enumerate()
        .map(|(i, m)| m.clone().try_inverse().ok_or(Error::SingularMatrix(i)))
        .collect()
}

pub(crate) fn evaluate_with_inverses(
    word: &Word,
    assignment: &[DMatrix<Complex64>],
    inverses: &[DMatrix<Complex64>],
) -> Result<DMatrix<Complex64>> {
    word.check_range(assignment.len())?;
    let n = match assignment.first() {
        Some(m) => m.nrows(),
        None => return Ok(DMatrix::identity(0, 0)),
    };
    if let Some(bad) = assignment.iter().find(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.nrows().max(bad.ncols()),
        });
    }
    let mut acc = DMatrix::<Complex64>::identity(n, n);
    for l in word.letters() {
        let factor = if l.inverse {
            &inverses[l.generator]
        } else {
            &assignment[l.generator]
        };
        acc *= factor;
    }
    Ok(acc)
}
