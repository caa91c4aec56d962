//! Symbolic algebra of on-site spin-1/2 operators.
//!
//! Products of σ⁺, σ⁻, σ^z on distinct sites are the currency in which
//! equations of motion for correlation functions are derived. A
//! [`PauliString`] is a normal-ordered product with at most one operator per
//! site; sums of strings with complex weights form an [`OperatorSum`].
//!
//! The module also provides the adjoint (Heisenberg-picture) action of the
//! collective-decay generator on a string, and the moment-cumulant closure
//! that truncates the correlation hierarchy. Expectation values are taken in
//! the number-conserving sector selected by the fully inverted initial
//! state: single-operator averages ⟨σ^±⟩ vanish identically, and any moment
//! with unequal raising/lowering counts is zero.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::couplings::CouplingMatrix;
use crate::C64;

const PRUNE_EPS: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("closure order must be 2 or 3, got {0}")]
    BadOrder(usize),
}

/// Single-site operator label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiteOp {
    Plus,
    Minus,
    Z,
}

impl fmt::Display for SiteOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteOp::Plus => write!(f, "+"),
            SiteOp::Minus => write!(f, "-"),
            SiteOp::Z => write!(f, "z"),
        }
    }
}

/// Normal-ordered product of single-site operators; identity sites omitted.
///
/// Site order is canonical (ascending) because operators on different sites
/// commute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct PauliString {
    factors: BTreeMap<usize, SiteOp>,
}

impl PauliString {
    /// The identity (empty product).
    pub fn identity() -> Self {
        Self::default()
    }

    /// Single operator at one site.
    pub fn single(site: usize, op: SiteOp) -> Self {
        let mut factors = BTreeMap::new();
        factors.insert(site, op);
        PauliString { factors }
    }

    /// Build from (site, op) pairs; panics on duplicate sites.
    pub fn from_ops(ops: &[(usize, SiteOp)]) -> Self {
        let mut factors = BTreeMap::new();
        for &(site, op) in ops {
            let prev = factors.insert(site, op);
            assert!(prev.is_none(), "duplicate site {site} in operator product");
        }
        PauliString { factors }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn ops(&self) -> impl Iterator<Item = (usize, SiteOp)> + '_ {
        self.factors.iter().map(|(&s, &o)| (s, o))
    }

    pub fn op_at(&self, site: usize) -> Option<SiteOp> {
        self.factors.get(&site).copied()
    }

    pub fn site_count(&self) -> usize {
        self.factors.len()
    }

    /// Number of raising minus lowering operators.
    pub fn charge(&self) -> i32 {
        self.factors
            .values()
            .map(|op| match op {
                SiteOp::Plus => 1,
                SiteOp::Minus => -1,
                SiteOp::Z => 0,
            })
            .sum()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        for (site, op) in self.factors.iter() {
            write!(f, "s{op}[{site}]")?;
        }
        Ok(())
    }
}

/// Weighted sum of normal-ordered strings, kept simplified: no duplicate
/// strings, coefficients below 1e-14 pruned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorSum {
    terms: BTreeMap<PauliString, C64>,
}

impl OperatorSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_string(coeff: C64, s: PauliString) -> Self {
        let mut sum = Self::zero();
        sum.add_term(coeff, s);
        sum
    }

    pub fn add_term(&mut self, coeff: C64, s: PauliString) {
        let norm_after = {
            let entry = self.terms.entry(s.clone()).or_insert(C64::new(0.0, 0.0));
            *entry += coeff;
            entry.norm()
        };
        if norm_after < PRUNE_EPS {
            self.terms.remove(&s);
        }
    }

    pub fn add_sum(&mut self, coeff: C64, other: &OperatorSum) {
        for (s, c) in other.terms.iter() {
            self.add_term(coeff * c, s.clone());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, C64)> {
        self.terms.iter().map(|(s, &c)| (s, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max-norm distance between two sums, for tests.
    pub fn distance(&self, other: &OperatorSum) -> f64 {
        let mut keys: Vec<&PauliString> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|k| {
                let a = self.terms.get(k).copied().unwrap_or_default();
                let b = other.terms.get(k).copied().unwrap_or_default();
                (a - b).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (s, c) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})*{s}")?;
        }
        Ok(())
    }
}

/// Product of two single-site operators on the same site, as a sum of
/// (coefficient, optional operator): `None` denotes the identity.
fn onsite_product(a: SiteOp, b: SiteOp) -> Vec<(f64, Option<SiteOp>)> {
    use SiteOp::*;
    match (a, b) {
        (Plus, Plus) | (Minus, Minus) => vec![],
        (Plus, Minus) => vec![(0.5, None), (0.5, Some(Z))],
        (Minus, Plus) => vec![(0.5, None), (-0.5, Some(Z))],
        (Z, Plus) => vec![(1.0, Some(Plus))],
        (Plus, Z) => vec![(-1.0, Some(Plus))],
        (Z, Minus) => vec![(-1.0, Some(Minus))],
        (Minus, Z) => vec![(1.0, Some(Minus))],
        (Z, Z) => vec![(1.0, None)],
    }
}

/// Normal-ordered product of two strings. Operators on distinct sites
/// commute; coinciding sites are reduced with the on-site algebra.
pub fn multiply(a: &PauliString, b: &PauliString) -> OperatorSum {
    // Branches: (coefficient, partial factor map).
    let mut branches: Vec<(C64, BTreeMap<usize, SiteOp>)> =
        vec![(C64::new(1.0, 0.0), BTreeMap::new())];
    let mut sites: Vec<usize> = a.sites().chain(b.sites()).collect();
    sites.sort_unstable();
    sites.dedup();
    for site in sites {
        match (a.op_at(site), b.op_at(site)) {
            (Some(op), None) | (None, Some(op)) => {
                for (_, m) in branches.iter_mut() {
                    m.insert(site, op);
                }
            }
            (Some(oa), Some(ob)) => {
                let prods = onsite_product(oa, ob);
                let mut next = Vec::with_capacity(branches.len() * prods.len());
                for (c, m) in branches.into_iter() {
                    for (pc, pop) in prods.iter() {
                        let mut m2 = m.clone();
                        if let Some(op) = pop {
                            m2.insert(site, *op);
                        }
                        next.push((c * *pc, m2));
                    }
                }
                branches = next;
            }
            (None, None) => unreachable!(),
        }
    }
    let mut sum = OperatorSum::zero();
    for (c, m) in branches {
        sum.add_term(c, PauliString { factors: m });
    }
    sum
}

fn multiply_sum(a: &OperatorSum, b: &PauliString) -> OperatorSum {
    let mut out = OperatorSum::zero();
    for (s, c) in a.terms() {
        out.add_sum(c, &multiply(s, b));
    }
    out
}

fn multiply_string_sum(a: &PauliString, b: &OperatorSum) -> OperatorSum {
    let mut out = OperatorSum::zero();
    for (s, c) in b.terms() {
        out.add_sum(c, &multiply(a, s));
    }
    out
}

/// Adjoint action of one dissipative channel on an observable:
/// σ_m⁺ O σ_n⁻ - ½ σ_n⁺σ_m⁻ O - ½ O σ_n⁺σ_m⁻ (the Γ_nm weight is applied by
/// the caller).
pub fn dissipator_term(o: &PauliString, n: usize, m: usize) -> OperatorSum {
    let plus_m = PauliString::single(m, SiteOp::Plus);
    let minus_n = PauliString::single(n, SiteOp::Minus);
    let jump = multiply_sum(&multiply(&plus_m, o), &minus_n);
    let nm = multiply(
        &PauliString::single(n, SiteOp::Plus),
        &PauliString::single(m, SiteOp::Minus),
    );
    let mut out = jump;
    for (s, c) in nm.terms() {
        out.add_sum(-0.5 * c, &multiply(s, o));
        out.add_sum(-0.5 * c, &multiply(o, s));
    }
    out
}

/// Adjoint action of one coherent-exchange channel: i(σ_n⁺σ_m⁻ O - O σ_n⁺σ_m⁻)
/// (the J_nm weight is applied by the caller).
pub fn exchange_term(o: &PauliString, n: usize, m: usize) -> OperatorSum {
    let hop = multiply(
        &PauliString::single(n, SiteOp::Plus),
        &PauliString::single(m, SiteOp::Minus),
    );
    let mut out = OperatorSum::zero();
    let i = C64::new(0.0, 1.0);
    for (s, c) in hop.terms() {
        out.add_sum(i * c, &multiply(s, o));
        out.add_sum(-i * c, &multiply(o, s));
    }
    out
}

/// Operator whose expectation is d⟨O⟩/dt under the collective-decay master
/// equation, optionally including the coherent exchange Hamiltonian.
pub fn adjoint_lindblad(
    o: &PauliString,
    couplings: &CouplingMatrix,
    include_hamiltonian: bool,
) -> OperatorSum {
    let n = couplings.len();
    let mut out = OperatorSum::zero();
    for a in 0..n {
        for b in 0..n {
            let g = couplings.gamma[(a, b)];
            if g != 0.0 {
                out.add_sum(C64::new(g, 0.0), &dissipator_term(o, a, b));
            }
            if include_hamiltonian && a != b {
                let j = couplings.j[(a, b)];
                if j != 0.0 {
                    out.add_sum(C64::new(j, 0.0), &exchange_term(o, a, b));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tracked moments and the cumulant closure
// ---------------------------------------------------------------------------

/// A tracked correlation function, identified by operator pattern and site
/// indices. Only number-conserving patterns up to three sites are nonzero
/// for the fully inverted initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Moment {
    /// ⟨σ^z_a⟩
    Sz(usize),
    /// ⟨σ⁺_a σ⁻_b⟩, a ≠ b
    Pm(usize, usize),
    /// ⟨σ^z_a σ^z_b⟩, symmetric
    Zz(usize, usize),
    /// ⟨σ^z_a σ⁺_b σ⁻_c⟩, all distinct
    Zpm(usize, usize, usize),
    /// ⟨σ^z_a σ^z_b σ^z_c⟩, fully symmetric
    Zzz(usize, usize, usize),
}

impl Moment {
    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Moment::Sz(a) => vec![a],
            Moment::Pm(a, b) | Moment::Zz(a, b) => vec![a, b],
            Moment::Zpm(a, b, c) | Moment::Zzz(a, b, c) => vec![a, b, c],
        }
    }

    /// Relabel sites through a map (used to instantiate schematic equations).
    pub fn map_sites(&self, f: impl Fn(usize) -> usize) -> Moment {
        match *self {
            Moment::Sz(a) => Moment::Sz(f(a)),
            Moment::Pm(a, b) => Moment::Pm(f(a), f(b)),
            Moment::Zz(a, b) => Moment::Zz(f(a), f(b)),
            Moment::Zpm(a, b, c) => Moment::Zpm(f(a), f(b), f(c)),
            Moment::Zzz(a, b, c) => Moment::Zzz(f(a), f(b), f(c)),
        }
    }
}

impl fmt::Display for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Moment::Sz(a) => write!(f, "z[{a}]"),
            Moment::Pm(a, b) => write!(f, "C[{a},{b}]"),
            Moment::Zz(a, b) => write!(f, "Z[{a},{b}]"),
            Moment::Zpm(a, b, c) => write!(f, "T[{a};{b},{c}]"),
            Moment::Zzz(a, b, c) => write!(f, "Y[{a},{b},{c}]"),
        }
    }
}

/// Expectation value of a normal-ordered string in the number-conserving
/// sector: a tracked moment, a scalar, or zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Scalar,
    Zero,
    Tracked(Moment),
    /// More sites than the truncation order keeps; must be closed.
    Untracked(Vec<(usize, SiteOp)>),
}

/// Classify a string's expectation given the number of sites tracked
/// exactly (2 or 3).
pub fn classify(s: &PauliString, order: usize) -> Expectation {
    if s.is_identity() {
        return Expectation::Scalar;
    }
    if s.charge() != 0 {
        return Expectation::Zero;
    }
    let ops: Vec<(usize, SiteOp)> = s.ops().collect();
    if ops.len() > order {
        return Expectation::Untracked(ops);
    }
    match tracked_pattern(&ops) {
        Some(m) => Expectation::Tracked(m),
        None => Expectation::Zero,
    }
}

/// Match a balanced operator set of up to three sites onto a tracked moment.
/// Returns None for patterns that vanish in this sector (e.g. ⟨σ^zσ⁺⟩).
fn tracked_pattern(ops: &[(usize, SiteOp)]) -> Option<Moment> {
    let zs: Vec<usize> = ops
        .iter()
        .filter(|(_, o)| *o == SiteOp::Z)
        .map(|&(s, _)| s)
        .collect();
    let ps: Vec<usize> = ops
        .iter()
        .filter(|(_, o)| *o == SiteOp::Plus)
        .map(|&(s, _)| s)
        .collect();
    let ms: Vec<usize> = ops
        .iter()
        .filter(|(_, o)| *o == SiteOp::Minus)
        .map(|&(s, _)| s)
        .collect();
    if ps.len() != ms.len() {
        return None;
    }
    match (zs.len(), ps.len()) {
        (1, 0) => Some(Moment::Sz(zs[0])),
        (0, 1) => Some(Moment::Pm(ps[0], ms[0])),
        (2, 0) => Some(Moment::Zz(zs[0], zs[1])),
        (1, 1) => Some(Moment::Zpm(zs[0], ps[0], ms[0])),
        (3, 0) => Some(Moment::Zzz(zs[0], zs[1], zs[2])),
        // Patterns like ⟨σ⁺σ⁺σ⁻σ⁻⟩ are balanced but exceed three sites and
        // never reach here untruncated.
        _ => None,
    }
}

/// Polynomial in tracked moments: a sum of coefficient × moment-products.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentPoly {
    pub terms: Vec<(C64, Vec<Moment>)>,
}

impl MomentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: C64) -> Self {
        MomentPoly {
            terms: vec![(c, vec![])],
        }
    }

    pub fn single(c: C64, m: Moment) -> Self {
        MomentPoly {
            terms: vec![(c, vec![m])],
        }
    }

    pub fn add(&mut self, coeff: C64, other: &MomentPoly) {
        for (c, ms) in other.terms.iter() {
            self.terms.push((coeff * c, ms.clone()));
        }
    }

    /// Product of two polynomials.
    pub fn mul(&self, other: &MomentPoly) -> MomentPoly {
        let mut out = MomentPoly::zero();
        for (ca, ma) in self.terms.iter() {
            for (cb, mb) in other.terms.iter() {
                let mut ms = ma.clone();
                ms.extend(mb.iter().copied());
                out.terms.push((ca * cb, ms));
            }
        }
        out
    }

    /// Merge identical products and drop negligible coefficients.
    pub fn simplify(mut self) -> MomentPoly {
        for (_, ms) in self.terms.iter_mut() {
            ms.sort();
        }
        let mut map: BTreeMap<Vec<Moment>, C64> = BTreeMap::new();
        for (c, ms) in self.terms.into_iter() {
            *map.entry(ms).or_insert(C64::new(0.0, 0.0)) += c;
        }
        MomentPoly {
            terms: map
                .into_iter()
                .filter(|(_, c)| c.norm() >= PRUNE_EPS)
                .map(|(ms, c)| (c, ms))
                .collect(),
        }
    }
}

impl fmt::Display for MomentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (c, ms) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if ms.is_empty() {
                write!(f, "({c})")?;
            } else {
                let prod: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                write!(f, "({c})*{}", prod.join("*"))?;
            }
        }
        Ok(())
    }
}

/// All set partitions of {0, .., n-1}, as lists of blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn recurse(item: usize, n: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if item == n {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(item);
            recurse(item + 1, n, current, out);
            current[b].pop();
        }
        current.push(vec![item]);
        recurse(item + 1, n, current, out);
        current.pop();
    }
    recurse(0, n, &mut current, &mut out);
    out
}

/// Expectation of a block of single-site operators, as a moment or zero.
fn block_moment(ops: &[(usize, SiteOp)]) -> Option<Moment> {
    let charge: i32 = ops
        .iter()
        .map(|(_, o)| match o {
            SiteOp::Plus => 1,
            SiteOp::Minus => -1,
            SiteOp::Z => 0,
        })
        .sum();
    if charge != 0 {
        return None;
    }
    tracked_pattern(ops)
}

/// Joint cumulant of a block, expanded in moments via the partition sum with
/// Möbius weights (-1)^{b-1}(b-1)!.
fn cumulant_in_moments(ops: &[(usize, SiteOp)]) -> MomentPoly {
    let mut out = MomentPoly::zero();
    for partition in set_partitions(ops.len()) {
        let blocks = partition.len();
        let sign = if (blocks - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let weight = sign * factorial(blocks - 1);
        let mut prod = MomentPoly::scalar(C64::new(weight, 0.0));
        let mut vanished = false;
        for block in partition.iter() {
            let block_ops: Vec<(usize, SiteOp)> = block.iter().map(|&i| ops[i]).collect();
            match block_moment(&block_ops) {
                Some(m) => prod = prod.mul(&MomentPoly::single(C64::new(1.0, 0.0), m)),
                None => {
                    vanished = true;
                    break;
                }
            }
        }
        if !vanished {
            out.add(C64::new(1.0, 0.0), &prod);
        }
    }
    out.simplify()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// Close a multi-site moment at the given truncation order: cumulants of
/// more than `order` operators are set to zero, and the moment is rebuilt
/// from the partition sum over blocks of size ≤ `order`, each block's
/// cumulant expressed back in tracked moments.
pub fn close_factors(ops: &[(usize, SiteOp)], order: usize) -> MomentPoly {
    let mut out = MomentPoly::zero();
    for partition in set_partitions(ops.len()) {
        if partition.iter().any(|b| b.len() > order) {
            continue;
        }
        let mut prod = MomentPoly::scalar(C64::new(1.0, 0.0));
        let mut vanished = false;
        for block in partition.iter() {
            let block_ops: Vec<(usize, SiteOp)> = block.iter().map(|&i| ops[i]).collect();
            let kappa = cumulant_in_moments(&block_ops);
            if kappa.terms.is_empty() {
                vanished = true;
                break;
            }
            prod = prod.mul(&kappa);
        }
        if !vanished {
            out.add(C64::new(1.0, 0.0), &prod);
        }
    }
    out.simplify()
}

/// Cumulant closure of a moment given as a string (public entry point).
///
/// Strings with at most `order` distinct sites are tracked exactly and come
/// back as a single-term polynomial.
pub fn cumulant_close(moment: &PauliString, order: usize) -> Result<MomentPoly, AlgebraError> {
    if order != 2 && order != 3 {
        return Err(AlgebraError::BadOrder(order));
    }
    Ok(match classify(moment, order) {
        Expectation::Scalar => MomentPoly::scalar(C64::new(1.0, 0.0)),
        Expectation::Zero => MomentPoly::zero(),
        Expectation::Tracked(m) => MomentPoly::single(C64::new(1.0, 0.0), m),
        Expectation::Untracked(ops) => close_factors(&ops, order),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::couplings_independent;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn onsite_raising_lowering_product() {
        // σ₁⁺ σ₁⁻ = (1 + σ₁^z)/2
        let prod = multiply(
            &PauliString::single(1, SiteOp::Plus),
            &PauliString::single(1, SiteOp::Minus),
        );
        let mut expect = OperatorSum::zero();
        expect.add_term(c(0.5), PauliString::identity());
        expect.add_term(c(0.5), PauliString::single(1, SiteOp::Z));
        assert!(prod.distance(&expect) < 1e-15);
    }

    #[test]
    fn raising_twice_vanishes() {
        let prod = multiply(
            &PauliString::single(1, SiteOp::Plus),
            &PauliString::single(1, SiteOp::Plus),
        );
        assert!(prod.is_empty());
    }

    #[test]
    fn different_sites_commute() {
        let a = PauliString::single(1, SiteOp::Z);
        let b = PauliString::single(2, SiteOp::Plus);
        let ab = multiply(&a, &b);
        let ba = multiply(&b, &a);
        assert_eq!(ab.len(), 1);
        assert!(ab.distance(&ba) < 1e-15);
        let (s, coeff) = ab.terms().next().unwrap();
        assert_eq!(s.op_at(1), Some(SiteOp::Z));
        assert_eq!(s.op_at(2), Some(SiteOp::Plus));
        assert_abs_diff_eq!(coeff.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_emitter_inversion_decay() {
        // d⟨σ^z⟩/dt = -(1 + ⟨σ^z⟩) for one emitter.
        let couplings = couplings_independent(1).unwrap();
        let dz = adjoint_lindblad(&PauliString::single(0, SiteOp::Z), &couplings, false);
        let mut expect = OperatorSum::zero();
        expect.add_term(c(-1.0), PauliString::identity());
        expect.add_term(c(-1.0), PauliString::single(0, SiteOp::Z));
        assert!(dz.distance(&expect) < 1e-14);
    }

    #[test]
    fn coherence_decays_at_unit_rate_for_independent_emitters() {
        let couplings = couplings_independent(2).unwrap();
        let o = PauliString::from_ops(&[(0, SiteOp::Plus), (1, SiteOp::Minus)]);
        let d = adjoint_lindblad(&o, &couplings, false);
        let expect = OperatorSum::from_string(c(-1.0), o);
        assert!(d.distance(&expect) < 1e-14);
    }

    #[test]
    fn adjoint_of_identity_vanishes() {
        let couplings = couplings_independent(3).unwrap();
        let d = adjoint_lindblad(&PauliString::identity(), &couplings, false);
        assert!(d.is_empty(), "got {d}");
    }

    #[test]
    fn total_excitation_derivative_reproduces_emission_rate() {
        // d/dt Σ_n (1+σ_n^z)/2 = -Σ_{n,m} Γ_nm σ_n⁺σ_m⁻ as operators.
        let n = 3;
        let mut couplings = couplings_independent(n).unwrap();
        couplings.gamma[(0, 1)] = 0.3;
        couplings.gamma[(1, 0)] = 0.3;
        couplings.gamma[(1, 2)] = -0.2;
        couplings.gamma[(2, 1)] = -0.2;
        let mut lhs = OperatorSum::zero();
        for site in 0..n {
            lhs.add_sum(
                c(0.5),
                &adjoint_lindblad(&PauliString::single(site, SiteOp::Z), &couplings, false),
            );
        }
        let mut rhs = OperatorSum::zero();
        for a in 0..n {
            for b in 0..n {
                let g = couplings.gamma[(a, b)];
                if a == b {
                    rhs.add_term(c(-g * 0.5), PauliString::identity());
                    rhs.add_term(c(-g * 0.5), PauliString::single(a, SiteOp::Z));
                } else {
                    rhs.add_term(
                        c(-g),
                        PauliString::from_ops(&[(a, SiteOp::Plus), (b, SiteOp::Minus)]),
                    );
                }
            }
        }
        assert!(lhs.distance(&rhs) < 1e-13, "lhs={lhs}\nrhs={rhs}");
    }

    #[test]
    fn partition_counts_are_bell_numbers() {
        assert_eq!(set_partitions(1).len(), 1);
        assert_eq!(set_partitions(2).len(), 2);
        assert_eq!(set_partitions(3).len(), 5);
        assert_eq!(set_partitions(4).len(), 15);
    }

    #[test]
    fn pairing_closure_of_two_plus_two_minus() {
        // ⟨σ₁⁺σ₂⁺σ₃⁻σ₄⁻⟩ at order 3 reduces to C₁₃C₂₄ + C₁₄C₂₃.
        let s = PauliString::from_ops(&[
            (1, SiteOp::Plus),
            (2, SiteOp::Plus),
            (3, SiteOp::Minus),
            (4, SiteOp::Minus),
        ]);
        let poly = cumulant_close(&s, 3).unwrap();
        let mut expect = MomentPoly::zero();
        expect
            .terms
            .push((c(1.0), vec![Moment::Pm(1, 3), Moment::Pm(2, 4)]));
        expect
            .terms
            .push((c(1.0), vec![Moment::Pm(1, 4), Moment::Pm(2, 3)]));
        let diff = {
            let mut d = poly.clone();
            d.add(c(-1.0), &expect);
            d.simplify()
        };
        assert!(diff.terms.is_empty(), "poly = {poly}");
    }

    #[test]
    fn unbalanced_moments_close_to_zero() {
        let s = PauliString::from_ops(&[(0, SiteOp::Plus), (1, SiteOp::Z), (2, SiteOp::Z)]);
        let poly = cumulant_close(&s, 2).unwrap();
        assert!(poly.terms.is_empty());
    }

    #[test]
    fn three_site_inversion_closure_at_order_two() {
        // ⟨σ₀^zσ₁^zσ₂^z⟩ ≈ z₀Z₁₂ + z₁Z₀₂ + z₂Z₀₁ - 2 z₀z₁z₂.
        let s = PauliString::from_ops(&[(0, SiteOp::Z), (1, SiteOp::Z), (2, SiteOp::Z)]);
        let poly = cumulant_close(&s, 2).unwrap();
        let mut expect = MomentPoly::zero();
        expect
            .terms
            .push((c(1.0), vec![Moment::Sz(0), Moment::Zz(1, 2)]));
        expect
            .terms
            .push((c(1.0), vec![Moment::Sz(1), Moment::Zz(0, 2)]));
        expect
            .terms
            .push((c(1.0), vec![Moment::Sz(2), Moment::Zz(0, 1)]));
        expect
            .terms
            .push((c(-2.0), vec![Moment::Sz(0), Moment::Sz(1), Moment::Sz(2)]));
        let diff = {
            let mut d = poly.clone();
            d.add(c(-1.0), &expect);
            d.simplify()
        };
        assert!(diff.terms.is_empty(), "poly = {poly}");
    }

    #[test]
    fn mixed_three_site_closure_at_order_two() {
        // ⟨σ₀^zσ₁⁺σ₂⁻⟩ ≈ z₀ C₁₂ since ⟨σ^±⟩ = 0 kills every other partition.
        let s = PauliString::from_ops(&[(0, SiteOp::Z), (1, SiteOp::Plus), (2, SiteOp::Minus)]);
        let poly = cumulant_close(&s, 2).unwrap();
        assert_eq!(poly.terms.len(), 1);
        let (coeff, ms) = &poly.terms[0];
        assert_abs_diff_eq!(coeff.re, 1.0, epsilon = 1e-15);
        assert_eq!(ms.as_slice(), &[Moment::Sz(0), Moment::Pm(1, 2)]);
    }

    #[test]
    fn closure_is_exact_on_product_states() {
        // On a product state all cross-site cumulants vanish, so closure at
        // order 2 must reproduce the exact moment: a numerical check of the
        // four-z closure against the factorized value.
        let z = [0.3, -0.7, 0.5, 0.9];
        let s = PauliString::from_ops(&[
            (0, SiteOp::Z),
            (1, SiteOp::Z),
            (2, SiteOp::Z),
            (3, SiteOp::Z),
        ]);
        let poly = cumulant_close(&s, 3).unwrap();
        let eval_moment = |m: &Moment| -> f64 {
            match m {
                Moment::Sz(a) => z[*a],
                Moment::Zz(a, b) => z[*a] * z[*b],
                Moment::Zzz(a, b, c3) => z[*a] * z[*b] * z[*c3],
                _ => 0.0,
            }
        };
        let mut total = 0.0;
        for (coeff, ms) in poly.terms.iter() {
            let prod: f64 = ms.iter().map(eval_moment).product();
            total += coeff.re * prod;
        }
        let exact: f64 = z.iter().product();
        assert_abs_diff_eq!(total, exact, epsilon = 1e-12);
    }

    #[test]
    fn bad_order_is_rejected() {
        let s = PauliString::single(0, SiteOp::Z);
        assert!(cumulant_close(&s, 4).is_err());
        assert!(cumulant_close(&s, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn multiplication_is_associative(
            ops_a in proptest::collection::vec((0usize..4, 0u8..3), 1..4),
            ops_b in proptest::collection::vec((0usize..4, 0u8..3), 1..4),
            ops_c in proptest::collection::vec((0usize..4, 0u8..3), 1..4),
        ) {
            let build = |ops: &[(usize, u8)]| {
                let mut factors = BTreeMap::new();
                for &(s, o) in ops {
                    let op = match o { 0 => SiteOp::Plus, 1 => SiteOp::Minus, _ => SiteOp::Z };
                    factors.insert(s, op);
                }
                PauliString { factors }
            };
            let a = build(&ops_a);
            let b = build(&ops_b);
            let c3 = build(&ops_c);
            let ab_c = multiply_sum(&multiply(&a, &b), &c3);
            let a_bc = multiply_string_sum(&a, &multiply(&b, &c3));
            proptest::prop_assert!(ab_c.distance(&a_bc) < 1e-12);
        }
    }
}
