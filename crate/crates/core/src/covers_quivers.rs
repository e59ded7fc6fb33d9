//! Finite unbranched covers realised as supercells, the matching induced
//! representations, and the quiver picture of a tight-binding model.
//!
//! Sheets are acted on from the right: lifting the loop `γ` from sheet `s`
//! ends on sheet `σ_γ(s)`, and a word acts letter by letter.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::momenta::{AbelianMomentum, NonabelianMomentum};
use crate::spectra::{compare_eigenvalues, eigenvalues};
use crate::surface_group::{Letter, SurfaceGroup, Word};
use crate::tight_binding::{bloch_abelian, bloch_nonabelian, LongHop, TightBindingModel};

/// Relative spectral distance accepted by [`pushforward_check`].
pub const PUSHFORWARD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct UnbranchedCover {
    group: SurfaceGroup,
    perms: Vec<Vec<usize>>,
    inverse_perms: Vec<Vec<usize>>,
    components: usize,
}

#[derive(Serialize, Deserialize)]
struct CoverWire {
    sheets: usize,
    perms: Vec<Vec<usize>>,
}

impl UnbranchedCover {
    /// `perms[i][s]` is the sheet reached from sheet `s` along generator `i` (0-based).
    pub fn new(group: SurfaceGroup, perms: Vec<Vec<usize>>) -> Result<Self> {
        if perms.len() != group.generator_count() {
            return Err(Error::GenusMismatch {
                expected: group.genus(),
                found: perms.len() / 2,
            });
        }
        let n = perms.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::Invalid("a cover needs at least one sheet".into()));
        }
        let mut inverse_perms = Vec::with_capacity(perms.len());
        for (i, p) in perms.iter().enumerate() {
            if p.len() != n {
                return Err(Error::BadPermutation(i));
            }
            let mut inv = vec![usize::MAX; n];
            for (s, &t) in p.iter().enumerate() {
                if t >= n || inv[t] != usize::MAX {
                    return Err(Error::BadPermutation(i));
                }
                inv[t] = s;
            }
            inverse_perms.push(inv);
        }
        let mut cover = Self {
            group,
            perms,
            inverse_perms,
            components: 0,
        };
        let relator = group.relator();
        for s in 0..n {
            if cover.act_word(s, &relator) != s {
                return Err(Error::RelatorNotIdentity(s));
            }
        }
        cover.components = cover.roots().len();
        Ok(cover)
    }

    pub fn trivial(group: SurfaceGroup) -> Self {
        Self::new(group, vec![vec![0]; group.generator_count()]).expect("one sheet")
    }

    /// `N` sheets with generator `generator` shifting `s ↦ s + 1 mod N`.
    pub fn cyclic(group: SurfaceGroup, sheets: usize, generator: usize) -> Result<Self> {
        if generator >= group.generator_count() {
            return Err(Error::GeneratorOutOfRange {
                index: generator,
                count: group.generator_count(),
            });
        }
        let id: Vec<usize> = (0..sheets).collect();
        let shift: Vec<usize> = (0..sheets).map(|s| (s + 1) % sheets).collect();
        let perms = (0..group.generator_count())
            .map(|i| {
                if i == generator {
                    shift.clone()
                } else {
                    id.clone()
                }
            })
            .collect();
        Self::new(group, perms)
    }

    pub fn group(&self) -> SurfaceGroup {
        self.group
    }

    pub fn sheets(&self) -> usize {
        self.perms[0].len()
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    /// Genus of the covering surface, summed over components: `N(g−1) + #components`.
    pub fn cover_genus(&self) -> usize {
        self.sheets() * (self.group.genus() - 1) + self.components
    }

    pub fn act(&self, sheet: usize, letter: Letter) -> usize {
        if letter.inverse {
            self.inverse_perms[letter.generator][sheet]
        } else {
            self.perms[letter.generator][sheet]
        }
    }

    pub fn act_word(&self, sheet: usize, word: &Word) -> usize {
        word.letters().iter().fold(sheet, |s, &l| self.act(s, l))
    }

    /// Smallest sheet of each connected component, ascending.
    fn roots(&self) -> Vec<usize> {
        let n = self.sheets();
        let mut seen = vec![false; n];
        let mut roots = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            roots.push(start);
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(s) = stack.pop() {
                for i in 0..self.perms.len() {
                    for t in [self.perms[i][s], self.inverse_perms[i][s]] {
                        if !seen[t] {
                            seen[t] = true;
                            stack.push(t);
                        }
                    }
                }
            }
        }
        roots
    }

    /// One-indexed `{sheets, perms}`.
    pub fn to_json(&self) -> Result<String> {
        let wire = CoverWire {
            sheets: self.sheets(),
            perms: self
                .perms
                .iter()
                .map(|p| p.iter().map(|s| s + 1).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: CoverWire = serde_json::from_str(text)?;
        if wire.perms.is_empty() || !wire.perms.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "a cover needs an even, nonzero number of permutations, got {}",
                wire.perms.len()
            )));
        }
        let group = SurfaceGroup::new(wire.perms.len() / 2)?;
        let mut perms = Vec::with_capacity(wire.perms.len());
        for (i, p) in wire.perms.iter().enumerate() {
            if p.len() != wire.sheets || p.iter().any(|&s| s == 0 || s > wire.sheets) {
                return Err(Error::BadPermutation(i));
            }
            perms.push(p.iter().map(|s| s - 1).collect());
        }
        Self::new(group, perms)
    }

    /// Reidemeister–Schreier data for the cover group.
    pub fn schreier(&self) -> Result<SchreierData> {
        SchreierData::build(self)
    }
}

/// Lift of generator `generator` starting at `sheet`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchreierEdge {
    pub sheet: usize,
    pub generator: usize,
    pub target: usize,
    /// Index among the free Schreier generators; `None` on the spanning tree.
    pub free_index: Option<usize>,
    /// Homology class on the cover, in the basis of [`SchreierData::basis_lifts`].
    pub class: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchreierData {
    /// Transversal words `t_s`, with `root·t_s = s`.
    pub transversal: Vec<Word>,
    /// Edges ordered by `(sheet, generator)`.
    pub edges: Vec<SchreierEdge>,
    /// Number of free Schreier generators after contracting the tree.
    pub free_count: usize,
    /// Each homology basis element as an integer combination of free generators.
    pub basis_lifts: Vec<Vec<i64>>,
    pub genus: usize,
}

impl SchreierData {
    fn build(cover: &UnbranchedCover) -> Result<Self> {
        let n = cover.sheets();
        let gens = cover.group.generator_count();
        // breadth-first spanning forest, generators in order, forward letter first
        let mut transversal: Vec<Option<Word>> = vec![None; n];
        let mut tree = vec![vec![false; gens]; n];
        for root in cover.roots() {
            transversal[root] = Some(Word::empty());
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for g in 0..gens {
                    for inverse in [false, true] {
                        let letter = Letter::new(g, inverse);
                        let v = cover.act(u, letter);
                        if transversal[v].is_none() {
                            let t = transversal[u]
                                .as_ref()
                                .expect("visited")
                                .concat(&Word(vec![letter]));
                            transversal[v] = Some(t);
                            let from = if inverse { v } else { u };
                            tree[from][g] = true;
                            queue.push_back(v);
                        }
                    }
                }
            }
        }
        let transversal: Vec<Word> = transversal
            .into_iter()
            .map(|t| t.expect("forest spans"))
            .collect();

        let mut free = vec![vec![None; gens]; n];
        let mut free_count = 0;
        for s in 0..n {
            for g in 0..gens {
                if !tree[s][g] {
                    free[s][g] = Some(free_count);
                    free_count += 1;
                }
            }
        }

        // lifts of the relator from every sheet, abelianized over the free generators
        let relator = cover.group.relator();
        let mut relations = Vec::with_capacity(n);
        for s in 0..n {
            let mut row = vec![0i64; free_count];
            let mut u = s;
            for &l in relator.letters() {
                let (from, sign) = if l.inverse {
                    (cover.act(u, l), -1)
                } else {
                    (u, 1)
                };
                if let Some(f) = free[from][l.generator] {
                    row[f] += sign;
                }
                u = cover.act(u, l);
            }
            relations.push(row);
        }

        let quotient = free_quotient(&relations, free_count)?;
        let rank = quotient.classes.first().map_or(0, Vec::len);
        let expected = 2 * cover.cover_genus();
        if rank != expected {
            return Err(Error::Invalid(format!(
                "cover homology has rank {rank}, expected {expected}"
            )));
        }
        let mut edges = Vec::with_capacity(n * gens);
        for s in 0..n {
            for g in 0..gens {
                let f = free[s][g];
                edges.push(SchreierEdge {
                    sheet: s,
                    generator: g,
                    target: cover.perms[g][s],
                    free_index: f,
                    class: f.map_or_else(|| vec![0; rank], |i| quotient.classes[i].clone()),
                });
            }
        }
        Ok(Self {
            transversal,
            edges,
            free_count,
            basis_lifts: quotient.lifts,
            genus: rank / 2,
        })
    }
}

struct Quotient {
    /// Class of each free generator, one row per generator.
    classes: Vec<Vec<i64>>,
    /// Preimage of each basis element of the quotient.
    lifts: Vec<Vec<i64>>,
}

/// Basis of `Z^m / rowspace(relations)` by Smith reduction, which must be torsion-free.
fn free_quotient(relations: &[Vec<i64>], m: usize) -> Result<Quotient> {
    let rows = relations.len();
    let mut a: Vec<Vec<i64>> = relations.to_vec();
    let mut w: Vec<Vec<i64>> = (0..m)
        .map(|i| (0..m).map(|j| i64::from(i == j)).collect())
        .collect();
    let mut w_inv = w.clone();

    // column ops on `a` are mirrored on the columns of w and the rows of w_inv
    fn col_addmul(
        a: &mut [Vec<i64>],
        w: &mut [Vec<i64>],
        w_inv: &mut [Vec<i64>],
        dst: usize,
        src: usize,
        q: i64,
    ) {
        for row in a.iter_mut().chain(w.iter_mut()) {
            row[dst] += q * row[src];
        }
        let moved = w_inv[dst].clone();
        for (x, y) in w_inv[src].iter_mut().zip(moved) {
            *x -= q * y;
        }
    }
    fn col_swap(
        a: &mut [Vec<i64>],
        w: &mut [Vec<i64>],
        w_inv: &mut [Vec<i64>],
        i: usize,
        j: usize,
    ) {
        for row in a.iter_mut().chain(w.iter_mut()) {
            row.swap(i, j);
        }
        w_inv.swap(i, j);
    }

    let mut t = 0;
    while t < rows.min(m) {
        let pivot = (t..rows)
            .flat_map(|i| (t..m).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i][j] != 0)
            .min_by_key(|&(i, j)| a[i][j].abs());
        let Some((pi, pj)) = pivot else { break };
        a.swap(t, pi);
        col_swap(&mut a, &mut w, &mut w_inv, t, pj);
        let p = a[t][t];
        let mut clean = true;
        for i in t + 1..rows {
            let q = a[i][t].div_euclid(p);
            if q != 0 {
                let pivot_row = a[t].clone();
                for (x, y) in a[i].iter_mut().zip(pivot_row) {
                    *x -= q * y;
                }
            }
            clean &= a[i][t] == 0;
        }
        for j in t + 1..m {
            let q = a[t][j].div_euclid(p);
            if q != 0 {
                col_addmul(&mut a, &mut w, &mut w_inv, j, t, -q);
            }
            clean &= a[t][j] == 0;
        }
        if clean {
            if p.abs() != 1 {
                return Err(Error::Invalid(format!(
                    "cover homology has torsion of order {}",
                    p.abs()
                )));
            }
            t += 1;
        }
    }
    let r = t;
    Ok(Quotient {
        classes: w.iter().map(|row| row[r..].to_vec()).collect(),
        lifts: w_inv[r..].to_vec(),
    })
}

/// Restriction of a base character to the cover group, in the cover's homology basis.
pub fn restrict(chi: &AbelianMomentum, cover: &UnbranchedCover) -> Result<AbelianMomentum> {
    let group = cover.group;
    if chi.genus() != group.genus() {
        return Err(Error::GenusMismatch {
            expected: group.genus(),
            found: chi.genus(),
        });
    }
    let data = cover.schreier()?;
    let gens = group.generator_count();
    // base homology class of each free generator t_s γ t_{sγ}^{-1}
    let mut base_class = vec![vec![0i64; gens]; data.free_count];
    for e in &data.edges {
        if let Some(f) = e.free_index {
            let word = data.transversal[e.sheet]
                .concat(&Word(vec![Letter::new(e.generator, false)]))
                .concat(&data.transversal[e.target].inverse());
            base_class[f] = group.abelianize(&word)?;
        }
    }
    let mut values = Vec::with_capacity(data.basis_lifts.len());
    for lift in &data.basis_lifts {
        let mut exps = vec![0i64; gens];
        for (coef, class) in lift.iter().zip(&base_class) {
            for (e, c) in exps.iter_mut().zip(class) {
                *e += coef * c;
            }
        }
        values.push(chi.monomial(&exps));
    }
    AbelianMomentum::new(values)
}

fn place(dst: &mut DMatrix<Complex64>, row: usize, col: usize, block: &DMatrix<Complex64>) {
    let mut view = dst.view_mut((row, col), (block.nrows(), block.ncols()));
    view += block;
}

/// The model on the cover, one copy of the unit cell per sheet, ordered (sheet) ⊗ (cell state).
///
/// Edges on the spanning tree become on-site couplings, edges whose class is
/// a basis vector `±e_i` become hops along generator `i`, and all other
/// classes become long hops.
pub fn supercell(model: &TightBindingModel, cover: &UnbranchedCover) -> Result<TightBindingModel> {
    if model.genus() != cover.group.genus() {
        return Err(Error::GenusMismatch {
            expected: cover.group.genus(),
            found: model.genus(),
        });
    }
    if !model.long_hops().is_empty() {
        return Err(Error::Invalid(
            "supercells of models with long hops are not supported".into(),
        ));
    }
    let data = cover.schreier()?;
    let d = model.dim();
    let n = cover.sheets();
    let big = n * d;
    let rank = 2 * data.genus;
    let zero = || DMatrix::<Complex64>::zeros(big, big);

    let mut onsite = zero();
    for s in 0..n {
        place(&mut onsite, s * d, s * d, model.onsite());
    }
    let mut hops = vec![zero(); rank];
    let mut long: BTreeMap<Vec<i64>, DMatrix<Complex64>> = BTreeMap::new();
    for e in &data.edges {
        let j = &model.hops()[e.generator];
        let (s, t) = (e.sheet * d, e.target * d);
        let nonzero: Vec<usize> = (0..rank).filter(|&i| e.class[i] != 0).collect();
        match nonzero.as_slice() {
            [] => {
                place(&mut onsite, s, t, j);
                place(&mut onsite, t, s, &j.adjoint());
            }
            [i] if e.class[*i] == 1 => place(&mut hops[*i], s, t, j),
            [i] if e.class[*i] == -1 => place(&mut hops[*i], t, s, &j.adjoint()),
            _ => place(long.entry(e.class.clone()).or_insert_with(zero), s, t, j),
        }
    }
    let long_hops = long
        .into_iter()
        .map(|(exponents, matrix)| LongHop { exponents, matrix })
        .collect();
    TightBindingModel::with_long_hops(SurfaceGroup::new(data.genus)?, onsite, hops, long_hops)
}

/// Induced representation of the base group: `ρ(γ)` has entry `χ(t_s γ t_{sγ}^{-1})` at `(s, sγ)`.
pub fn induce(chi: &AbelianMomentum, cover: &UnbranchedCover) -> Result<NonabelianMomentum> {
    let data = cover.schreier()?;
    if chi.genus() != data.genus {
        return Err(Error::GenusMismatch {
            expected: data.genus,
            found: chi.genus(),
        });
    }
    let n = cover.sheets();
    let gens = cover.group.generator_count();
    let mut rho = vec![DMatrix::<Complex64>::zeros(n, n); gens];
    let mut inv = rho.clone();
    for e in &data.edges {
        let neg: Vec<i64> = e.class.iter().map(|c| -c).collect();
        rho[e.generator][(e.sheet, e.target)] = chi.monomial(&e.class);
        inv[e.generator][(e.target, e.sheet)] = chi.monomial(&neg);
    }
    Ok(NonabelianMomentum::with_inverses(rho, inv))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardReport {
    pub sheets: usize,
    pub connected: bool,
    pub cover_genus: usize,
    pub distance: f64,
    pub spectral_radius: f64,
    pub pass: bool,
}

/// Largest pairwise gap between two eigenvalue lists: sorted order for real
/// spectra, greedy nearest matching otherwise.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let real = a.iter().chain(b).all(|z| z.im == 0.0);
    if real {
        let (mut x, mut y) = (a.to_vec(), b.to_vec());
        x.sort_by(compare_eigenvalues);
        y.sort_by(compare_eigenvalues);
        return x
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for p in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, q)| (k, (p - q).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("equal lengths");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// Compares the supercell spectrum at `chi` with the base model at the induced representation.
pub fn pushforward_check(
    model: &TightBindingModel,
    cover: &UnbranchedCover,
    chi: &AbelianMomentum,
) -> Result<PushforwardReport> {
    let induced = eigenvalues(&bloch_nonabelian(model, &induce(chi, cover)?)?)?;
    let folded = eigenvalues(&bloch_abelian(&supercell(model, cover)?, chi)?)?;
    let distance = multiset_distance(&induced, &folded);
    let spectral_radius = induced
        .iter()
        .chain(&folded)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(PushforwardReport {
        sheets: cover.sheets(),
        connected: cover.is_connected(),
        cover_genus: cover.cover_genus(),
        distance,
        spectral_radius,
        pass: distance <= PUSHFORWARD_TOL * spectral_radius.max(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// Which hop an arrow came from: index `hop` runs over generators, then long hops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingLabel {
    pub hop: usize,
    pub exponents: Vec<i64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrow {
    pub source: usize,
    pub target: usize,
    #[serde(with = "crate::wire::matrix")]
    pub block: DMatrix<Complex64>,
    pub crossing: Option<CrossingLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: usize,
    /// One-indexed orbitals of the atom.
    pub orbitals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quiver {
    genus: usize,
    dim: usize,
    atoms: Vec<Vec<usize>>,
    hop_count: usize,
    arrows: Vec<Arrow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuiverCounts {
    pub nodes: usize,
    pub self_arrows: usize,
    /// Unordered pairs of distinct atoms joined by on-site couplings.
    pub internal_bonds: usize,
    /// Forward/reverse crossing pairs.
    pub crossing_bonds: usize,
}

fn check_partition(atoms: &[Vec<usize>], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    for atom in atoms {
        if atom.is_empty() {
            return Err(Error::BadPartition("empty atom".into()));
        }
        for &o in atom {
            if o >= dim {
                return Err(Error::BadPartition(format!(
                    "orbital {} outside 1..={dim}",
                    o + 1
                )));
            }
            if std::mem::replace(&mut seen[o], true) {
                return Err(Error::BadPartition(format!(
                    "orbital {} listed twice",
                    o + 1
                )));
            }
        }
    }
    if let Some(o) = seen.iter().position(|s| !s) {
        return Err(Error::BadPartition(format!(
            "orbital {} not covered",
            o + 1
        )));
    }
    Ok(())
}

fn block(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn is_zero(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Quiver of `model` for a partition of the orbitals (0-based) into atoms.
pub fn quiver_from_model(model: &TightBindingModel, atoms: &[Vec<usize>]) -> Result<Quiver> {
    check_partition(atoms, model.dim())?;
    let mut arrows = Vec::new();
    for (i, ai) in atoms.iter().enumerate() {
        for (j, aj) in atoms.iter().enumerate() {
            let b = block(model.onsite(), ai, aj);
            if !is_zero(&b) {
                arrows.push(Arrow {
                    source: i,
                    target: j,
                    block: b,
                    crossing: None,
                });
            }
        }
    }
    let gens = model.hops().len();
    let hop_mats = model
        .hops()
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let mut e = vec![0i64; gens];
            e[i] = 1;
            (e, j)
        })
        .chain(
            model
                .long_hops()
                .iter()
                .map(|l| (l.exponents.clone(), &l.matrix)),
        );
    let mut hop_count = 0;
    for (hop, (exponents, j)) in hop_mats.enumerate() {
        hop_count += 1;
        for (i, ai) in atoms.iter().enumerate() {
            for (k, ak) in atoms.iter().enumerate() {
                let b = block(j, ai, ak);
                if is_zero(&b) {
                    continue;
                }
                let label = |direction| CrossingLabel {
                    hop,
                    exponents: exponents.clone(),
                    direction,
                };
                arrows.push(Arrow {
                    source: k,
                    target: i,
                    block: b.adjoint(),
                    crossing: Some(label(Direction::Reverse)),
                });
                arrows.push(Arrow {
                    source: i,
                    target: k,
                    block: b,
                    crossing: Some(label(Direction::Forward)),
                });
            }
        }
    }
    Ok(Quiver {
        genus: model.genus(),
        dim: model.dim(),
        atoms: atoms.to_vec(),
        hop_count,
        arrows,
    })
}

impl Quiver {
    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn nodes(&self) -> Vec<Node> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(id, a)| Node {
                id,
                orbitals: a.iter().map(|o| o + 1).collect(),
            })
            .collect()
    }

    pub fn counts(&self) -> QuiverCounts {
        let mut internal = std::collections::BTreeSet::new();
        let mut counts = QuiverCounts {
            nodes: self.atoms.len(),
            self_arrows: 0,
            internal_bonds: 0,
            crossing_bonds: 0,
        };
        for a in &self.arrows {
            match &a.crossing {
                None if a.source == a.target => counts.self_arrows += 1,
                None => {
                    internal.insert((a.source.min(a.target), a.source.max(a.target)));
                }
                Some(l) if l.direction == Direction::Forward => counts.crossing_bonds += 1,
                Some(_) => {}
            }
        }
        counts.internal_bonds = internal.len();
        counts
    }

    /// Sums the arrows back into a matrix: on-site blocks first, then each hop
    /// with its forward and reverse parts paired entrywise.
    pub fn reassemble(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let mut h = DMatrix::<Complex64>::zeros(d, d);
        let scatter = |m: &mut DMatrix<Complex64>, a: &Arrow| {
            let (rows, cols) = (&self.atoms[a.source], &self.atoms[a.target]);
            for (r, &gr) in rows.iter().enumerate() {
                for (c, &gc) in cols.iter().enumerate() {
                    m[(gr, gc)] = a.block[(r, c)];
                }
            }
        };
        for a in self.arrows.iter().filter(|a| a.crossing.is_none()) {
            scatter(&mut h, a);
        }
        for hop in 0..self.hop_count {
            let mut fwd = DMatrix::<Complex64>::zeros(d, d);
            let mut rev = DMatrix::<Complex64>::zeros(d, d);
            for a in &self.arrows {
                match &a.crossing {
                    Some(l) if l.hop == hop && l.direction == Direction::Forward => {
                        scatter(&mut fwd, a)
                    }
                    Some(l) if l.hop == hop => scatter(&mut rev, a),
                    _ => {}
                }
            }
            for c in 0..d {
                for r in 0..d {
                    h[(r, c)] += fwd[(r, c)] + rev[(r, c)];
                }
            }
        }
        h
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct QuiverWire<'a> {
            genus: usize,
            dim: usize,
            nodes: Vec<Node>,
            arrows: &'a [Arrow],
        }
        Ok(serde_json::to_string_pretty(&QuiverWire {
            genus: self.genus,
            dim: self.dim,
            nodes: self.nodes(),
            arrows: &self.arrows,
        })?)
    }
}

/// Scales each crossing arrow by the character on its hop class; reverse arrows get the inverse.
pub fn torus_action(q: &Quiver, chi: &AbelianMomentum) -> Result<Quiver> {
    if chi.genus() != q.genus {
        return Err(Error::GenusMismatch {
            expected: q.genus,
            found: chi.genus(),
        });
    }
    let gens = 2 * q.genus;
    let mut out = q.clone();
    for a in &mut out.arrows {
        let Some(l) = &a.crossing else { continue };
        let (z, z_inv) = if l.hop < gens {
            (chi.values()[l.hop], chi.inverse_values()[l.hop])
        } else {
            let neg: Vec<i64> = l.exponents.iter().map(|e| -e).collect();
            (chi.monomial(&l.exponents), chi.monomial(&neg))
        };
        let s = if l.direction == Direction::Forward {
            z
        } else {
            z_inv
        };
        a.block.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momenta::validate;
    use crate::sampling;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn group(g: usize) -> SurfaceGroup {
        SurfaceGroup::new(g).unwrap()
    }

    fn swap_cover() -> UnbranchedCover {
        UnbranchedCover::new(group(1), vec![vec![1, 0], vec![0, 1]]).unwrap()
    }

    fn single_site(g: usize) -> TightBindingModel {
        let one = DMatrix::from_element(1, 1, c(1., 0.));
        TightBindingModel::new(group(g), DMatrix::zeros(1, 1), vec![one; 2 * g]).unwrap()
    }

    #[test]
    fn cover_validation() {
        assert!(matches!(
            UnbranchedCover::new(group(1), vec![vec![0, 0], vec![0, 1]]),
            Err(Error::BadPermutation(0))
        ));
        // a 3-cycle and a transposition do not commute
        assert!(matches!(
            UnbranchedCover::new(group(1), vec![vec![1, 2, 0], vec![1, 0, 2]]),
            Err(Error::RelatorNotIdentity(_))
        ));
        let id = UnbranchedCover::new(group(1), vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert!(!id.is_connected());
        assert!(swap_cover().is_connected());
    }

    #[test]
    fn cover_json_is_one_indexed() {
        let text = swap_cover().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["perms"][0], serde_json::json!([2, 1]));
        assert_eq!(UnbranchedCover::from_json(&text).unwrap(), swap_cover());
        assert!(UnbranchedCover::from_json(r#"{"sheets":2,"perms":[[0,1],[1,2]]}"#).is_err());
    }

    #[test]
    fn cover_genus_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for g in 1..=3 {
            for n in 1..=4 {
                for _ in 0..5 {
                    let cover = sampling::cover(&mut rng, g, n);
                    let data = cover.schreier().unwrap();
                    assert_eq!(data.free_count, n * (2 * g - 1) + cover.components());
                    assert_eq!(data.genus, cover.cover_genus());
                    if cover.is_connected() {
                        assert_eq!(data.genus, n * (g - 1) + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_cover_leaves_model_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let model = sampling::model(&mut rng, 2, 3);
        let cover = UnbranchedCover::trivial(group(2));
        assert_eq!(supercell(&model, &cover).unwrap(), model);
        let chi = sampling::unitary_momentum(&mut rng, 2);
        let rho = induce(&chi, &cover).unwrap();
        assert_eq!(rho, NonabelianMomentum::from_abelian(&chi));
        assert_eq!(
            pushforward_check(&model, &cover, &chi).unwrap().distance,
            0.0
        );
    }

    #[test]
    fn induce_examples() {
        let rho = induce(&AbelianMomentum::trivial(1), &swap_cover()).unwrap();
        let one = c(1., 0.);
        let zero = c(0., 0.);
        assert_eq!(
            rho.matrices()[0],
            DMatrix::from_row_slice(2, 2, &[zero, one, one, zero])
        );
        assert_eq!(rho.matrices()[1], DMatrix::identity(2, 2));

        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..40 {
            let g = rng.gen_range(1..=2);
            let n = rng.gen_range(1..=4);
            let cover = sampling::cover(&mut rng, g, n);
            let chi = sampling::complex_momentum(&mut rng, cover.cover_genus(), 0.3);
            let rho = induce(&chi, &cover).unwrap();
            let report = validate(&rho, &group(g), 1e-12).unwrap();
            assert!(
                report.relator_residual < 1e-12,
                "{}",
                report.relator_residual
            );
        }
    }

    #[test]
    fn swap_cover_pushforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..20 {
            let model = sampling::model(&mut rng, 1, 2);
            let chi = sampling::unitary_momentum(&mut rng, 1);
            let r = pushforward_check(&model, &swap_cover(), &chi).unwrap();
            assert!(r.distance <= 1e-10, "{}", r.distance);
            assert!(r.pass);
        }
    }

    #[test]
    fn disconnected_cover_doubles_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let model = sampling::model(&mut rng, 1, 2);
        let cover = UnbranchedCover::new(group(1), vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(cover.cover_genus(), 2);
        let base = sampling::unitary_momentum(&mut rng, 1);
        let chi = restrict(&base, &cover).unwrap();
        let sc = supercell(&model, &cover).unwrap();
        let doubled = eigenvalues(&bloch_abelian(&sc, &chi).unwrap()).unwrap();
        let single = eigenvalues(&bloch_abelian(&model, &base).unwrap()).unwrap();
        let twice: Vec<Complex64> = single.iter().chain(&single).copied().collect();
        assert!(multiset_distance(&doubled, &twice) < 1e-12);
    }

    /// Band folding for an `N`-fold cyclic cover in the `a` direction: the
    /// restricted character is seen by the induced representation as the base
    /// character twisted by each `N`-th root of unity.
    #[test]
    fn cyclic_cover_matches_fourier_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for n in 1..=4usize {
            let cover = UnbranchedCover::cyclic(group(1), n, 0).unwrap();
            for _ in 0..10 {
                let model = single_site(1);
                let base = sampling::unitary_momentum(&mut rng, 1);
                let chi = restrict(&base, &cover).unwrap();
                let r = pushforward_check(&model, &cover, &chi).unwrap();
                assert!(r.distance <= 1e-10);

                let (za, zb) = (base.values()[0], base.values()[1]);
                let oracle: Vec<Complex64> = (0..n)
                    .map(|k| {
                        let w = Complex64::from_polar(
                            1.0,
                            2.0 * std::f64::consts::PI * k as f64 / n as f64,
                        );
                        let x = za * w;
                        x + x.inv() + zb + zb.inv()
                    })
                    .collect();
                let got =
                    eigenvalues(&bloch_abelian(&supercell(&model, &cover).unwrap(), &chi).unwrap())
                        .unwrap();
                let real_oracle: Vec<Complex64> = oracle.iter().map(|z| c(z.re, 0.)).collect();
                assert!(multiset_distance(&got, &real_oracle) < 1e-10);
            }
        }
    }

    #[test]
    fn random_covers_pushforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..60 {
            let g = rng.gen_range(1..=2);
            let n = rng.gen_range(1..=4);
            let d = rng.gen_range(1..=3);
            let cover = sampling::cover(&mut rng, g, n);
            let model = sampling::model(&mut rng, g, d);
            let chi = sampling::unitary_momentum(&mut rng, cover.cover_genus());
            let r = pushforward_check(&model, &cover, &chi).unwrap();
            assert!(r.pass, "g={g} n={n} d={d} distance={}", r.distance);
        }
    }

    #[test]
    fn supercell_rejects_mismatch() {
        let model = single_site(2);
        assert!(matches!(
            supercell(&model, &swap_cover()),
            Err(Error::GenusMismatch { .. })
        ));
        let chi = AbelianMomentum::trivial(2);
        assert!(matches!(
            induce(&chi, &swap_cover()),
            Err(Error::GenusMismatch { .. })
        ));
    }

    fn two_atom_model() -> TightBindingModel {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(1., 0.5), c(1., -0.5), c(-0.5, 0.)]);
        let ja = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0.3, 0.1), c(0., 0.), c(0., 0.)]);
        let jb = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(-0.2, 0.4), c(0., 0.), c(0., 0.)]);
        TightBindingModel::new(group(1), m, vec![ja, jb]).unwrap()
    }

    #[test]
    fn quiver_counts() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let z = DMatrix::zeros(2, 2);
        let model = TightBindingModel::new(group(1), m, vec![z.clone(), z]).unwrap();
        let q = quiver_from_model(&model, &[vec![0], vec![1]]).unwrap();
        assert_eq!(
            q.counts(),
            QuiverCounts {
                nodes: 2,
                self_arrows: 0,
                internal_bonds: 1,
                crossing_bonds: 0
            }
        );
        assert_eq!(q.arrows().len(), 2);

        // two atoms with on-site energies, one on-site bond and two crossing bonds
        let q = quiver_from_model(&two_atom_model(), &[vec![0], vec![1]]).unwrap();
        let k = q.counts();
        assert_eq!((k.nodes, k.self_arrows), (2, 2));
        assert_eq!(k.internal_bonds + k.crossing_bonds, 3);

        assert!(matches!(
            quiver_from_model(&model, &[vec![0]]),
            Err(Error::BadPartition(_))
        ));
        assert!(matches!(
            quiver_from_model(&model, &[vec![0, 1], vec![1]]),
            Err(Error::BadPartition(_))
        ));
    }

    #[test]
    fn quiver_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for _ in 0..50 {
            let g = rng.gen_range(1..=2);
            let d = rng.gen_range(1..=4);
            let model = sampling::model(&mut rng, g, d);
            let mut orbitals: Vec<usize> = (0..d).collect();
            rand::seq::SliceRandom::shuffle(orbitals.as_mut_slice(), &mut rng);
            let cut = rng.gen_range(1..=d);
            let mut atoms = vec![orbitals[..cut].to_vec()];
            if cut < d {
                atoms.push(orbitals[cut..].to_vec());
            }
            let q = quiver_from_model(&model, &atoms).unwrap();
            let chi = sampling::complex_momentum(&mut rng, g, 0.5);
            let h = bloch_abelian(&model, &chi).unwrap().matrix;
            assert_eq!(torus_action(&q, &chi).unwrap().reassemble(), h);
        }
    }

    #[test]
    fn quiver_round_trip_with_long_hops() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let cover = sampling::cover(&mut rng, 2, 3);
        let sc = supercell(&sampling::model(&mut rng, 2, 2), &cover).unwrap();
        assert!(!sc.long_hops().is_empty());
        let atoms: Vec<Vec<usize>> = (0..3).map(|s| vec![2 * s, 2 * s + 1]).collect();
        let q = quiver_from_model(&sc, &atoms).unwrap();
        let chi = sampling::complex_momentum(&mut rng, sc.genus(), 0.5);
        assert_eq!(
            torus_action(&q, &chi).unwrap().reassemble(),
            bloch_abelian(&sc, &chi).unwrap().matrix
        );
    }

    #[test]
    fn torus_action_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let q = quiver_from_model(&two_atom_model(), &[vec![0], vec![1]]).unwrap();
        assert_eq!(torus_action(&q, &AbelianMomentum::trivial(1)).unwrap(), q);
        for _ in 0..20 {
            let x = sampling::complex_momentum(&mut rng, 1, 0.5);
            let y = sampling::complex_momentum(&mut rng, 1, 0.5);
            let twice = torus_action(&torus_action(&q, &x).unwrap(), &y).unwrap();
            let once = torus_action(&q, &x.product(&y).unwrap()).unwrap();
            for (a, b) in twice.arrows().iter().zip(once.arrows()) {
                assert!((&a.block - &b.block).norm() <= 1e-14 * b.block.norm().max(1.0));
            }
        }
        assert!(torus_action(&q, &AbelianMomentum::trivial(2)).is_err());
    }

    #[test]
    fn quiver_json_lists_nodes_and_arrows() {
        let q = quiver_from_model(&two_atom_model(), &[vec![0], vec![1]]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&q.to_json().unwrap()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
        assert_eq!(v["nodes"][1]["orbitals"], serde_json::json!([2]));
        assert_eq!(v["arrows"].as_array().unwrap().len(), q.arrows().len());
    }
}
