//! Exact `n(ε)` by walking the product spectrum in non-increasing order.
//!
//! Product eigenvalues are indexed by `k ∈ N^d` with
//! `ln λ(k) = Σ_j [ln(1 - ω_j) + (k_j - 1) ln ω_j]`. The walk is a best-first
//! search over this lattice. A node is generated only from its canonical
//! parent, the one obtained by decrementing its lowest-index coordinate that
//! exceeds 1, so every multi-index enters the frontier exactly once.
//!
//! Equal products (common when several `ω_j` coincide) are emitted in
//! lexicographic multi-index order. Log values are evaluated per class of
//! bitwise-equal `ω`, so permutations inside a class compare equal exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::kernel_spectrum::OmegaVector;
use crate::sum::CompensatedSum;

/// Default memory guard for emitted eigenvalues and frontier size.
pub const DEFAULT_CAPACITY: usize = 10_000_000;

const ROOT: u32 = u32::MAX;

/// One product eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenIndex {
    /// `(k_1, ..., k_d)`, all entries ≥ 1.
    pub multi_index: Vec<u32>,
    /// `ln λ`.
    pub log_value: f64,
}

impl EigenIndex {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop after this many eigenvalues.
    Count(usize),
    /// Stop once the cumulative mass reaches this target (< 1).
    Mass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityMode {
    Exact,
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplexityEstimate {
    Exact { n: u64 },
    /// Bracket `[lo, hi]` on `ln n`.
    LogBracket { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityResult {
    pub estimate: ComplexityEstimate,
    /// Mass of the eigenvalues kept by the returned rank.
    pub achieved_cumulative_mass: f64,
    pub epsilon: f64,
    pub mode: ComplexityMode,
}

impl ComplexityResult {
    pub fn exact_n(&self) -> Option<u64> {
        match self.estimate {
            ComplexityEstimate::Exact { n } => Some(n),
            ComplexityEstimate::LogBracket { .. } => None,
        }
    }

    /// `[lo, hi]` on `ln n`; degenerate for exact results.
    pub fn log_bracket(&self) -> (f64, f64) {
        match self.estimate {
            ComplexityEstimate::Exact { n } => {
                let l = (n as f64).ln();
                (l, l)
            }
            ComplexityEstimate::LogBracket { lo, hi } => (lo, hi),
        }
    }

    /// Point value for `ln n`: exact, or the bracket midpoint.
    pub fn log_n(&self) -> f64 {
        let (lo, hi) = self.log_bracket();
        0.5 * (lo + hi)
    }
}

#[derive(Clone, Copy)]
struct Node {
    parent: u32,
    coord: u32,
}

#[derive(Clone, Copy)]
struct Pending {
    log_value: f64,
    parent: u32,
    coord: u32,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_value
            .total_cmp(&other.log_value)
            .then_with(|| other.parent.cmp(&self.parent))
            .then_with(|| other.coord.cmp(&self.coord))
    }
}

/// Streaming best-first walk over the product lattice.
struct Walk<'a> {
    omega: &'a OmegaVector,
    class_of: Vec<usize>,
    class_log: Vec<f64>,
    base: f64,
    arena: Vec<Node>,
    heap: BinaryHeap<Pending>,
    capacity: usize,
    scratch: Vec<u32>,
}

impl<'a> Walk<'a> {
    fn new(omega: &'a OmegaVector, capacity: usize) -> Self {
        let d = omega.dim();
        // Classes of bitwise-equal ω, ordered by first appearance.
        let mut class_of = vec![0usize; d];
        let mut reps: Vec<u64> = Vec::new();
        let mut class_log = Vec::new();
        for j in 0..d {
            let bits = omega.omegas()[j].to_bits();
            match reps.iter().position(|&b| b == bits) {
                Some(c) => class_of[j] = c,
                None => {
                    class_of[j] = reps.len();
                    reps.push(bits);
                    class_log.push(-omega.log_omegas_abs()[j]);
                }
            }
        }
        let base = -omega.top_log_magnitude();
        let mut heap = BinaryHeap::new();
        heap.push(Pending { log_value: base, parent: ROOT, coord: d as u32 });
        Walk {
            omega,
            class_of,
            class_log,
            base,
            arena: Vec::new(),
            heap,
            capacity,
            scratch: vec![0; reps.len()],
        }
    }

    /// `ln λ` of the child `parent + e_coord`, summed per class in fixed order.
    fn child_log_value(&mut self, parent: u32, coord: u32) -> f64 {
        self.scratch.iter_mut().for_each(|c| *c = 0);
        self.scratch[self.class_of[coord as usize]] += 1;
        let mut cur = parent;
        while cur != ROOT {
            let node = self.arena[cur as usize];
            if node.coord as usize == self.class_of.len() {
                break;
            }
            self.scratch[self.class_of[node.coord as usize]] += 1;
            cur = node.parent;
        }
        let mut acc = self.base;
        for (c, &m) in self.scratch.iter().enumerate() {
            if m > 0 {
                acc += m as f64 * self.class_log[c];
            }
        }
        acc
    }

    fn multi_index(&self, parent: u32, coord: u32) -> Vec<u32> {
        let d = self.omega.dim();
        let mut k = vec![1u32; d];
        if parent == ROOT && coord as usize == d {
            return k;
        }
        k[coord as usize] += 1;
        let mut cur = parent;
        while cur != ROOT {
            let node = self.arena[cur as usize];
            if node.coord as usize == d {
                break;
            }
            k[node.coord as usize] += 1;
            cur = node.parent;
        }
        k
    }

    /// Pops the next group of equal-valued entries, lexicographically sorted.
    fn next_group(&mut self) -> Vec<Pending> {
        let Some(first) = self.heap.pop() else {
            return Vec::new();
        };
        let mut group = vec![first];
        while let Some(top) = self.heap.peek() {
            if top.log_value.to_bits() == first.log_value.to_bits() {
                group.push(self.heap.pop().expect("peeked"));
            } else {
                break;
            }
        }
        if group.len() > 1 {
            let mut keyed: Vec<(Vec<u32>, Pending)> = group
                .into_iter()
                .map(|p| (self.multi_index(p.parent, p.coord), p))
                .collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            group = keyed.into_iter().map(|(_, p)| p).collect();
        }
        group
    }

    /// Records `p` as emitted and pushes its canonical children.
    fn emit(&mut self, p: Pending) -> Result<()> {
        if self.arena.len() >= self.capacity {
            return Err(Error::Capacity { what: "emitted eigenvalues", cap: self.capacity });
        }
        let id = self.arena.len() as u32;
        let d = self.omega.dim() as u32;
        self.arena.push(Node { parent: p.parent, coord: p.coord });
        // Lowest non-1 coordinate of the emitted node is `coord` (or none for the root).
        let limit = if p.parent == ROOT && p.coord == d { d } else { p.coord + 1 };
        for i in 0..limit {
            let lv = self.child_log_value(id, i);
            self.heap.push(Pending { log_value: lv, parent: id, coord: i });
        }
        if self.heap.len() > self.capacity {
            return Err(Error::Capacity { what: "enumeration frontier", cap: self.capacity });
        }
        Ok(())
    }
}

fn validate_stop(stop: StopRule) -> Result<()> {
    if let StopRule::Mass(t) = stop {
        if !(t.is_finite() && t < 1.0) {
            return Err(Error::domain(format!("mass target must be finite and < 1, got {t}")));
        }
    }
    Ok(())
}

/// Drives the walk; `sink` sees every emitted entry. Returns (count, mass).
fn run_walk(
    omega: &OmegaVector,
    stop: StopRule,
    capacity: usize,
    mut sink: impl FnMut(&Walk<'_>, Pending),
) -> Result<(u64, f64)> {
    validate_stop(stop)?;
    let mut walk = Walk::new(omega, capacity);
    let mut count = 0u64;
    let mut mass = CompensatedSum::new();
    let done = |count: u64, mass: f64| match stop {
        StopRule::Count(c) => count >= c as u64,
        StopRule::Mass(t) => mass >= t,
    };
    if done(0, 0.0) {
        return Ok((0, 0.0));
    }
    loop {
        let group = walk.next_group();
        if group.is_empty() {
            return Err(Error::Numeric {
                message: "product spectrum exhausted before the stop rule held".into(),
                achieved: mass.value(),
            });
        }
        for p in group {
            sink(&walk, p);
            walk.emit(p)?;
            count += 1;
            mass.add(p.log_value.exp());
            if done(count, mass.value()) {
                return Ok((count, mass.value()));
            }
        }
    }
}

/// The largest product eigenvalues in non-increasing order, until `stop` first holds.
pub fn enumerate_top(
    omega: &OmegaVector,
    stop: StopRule,
    capacity: usize,
) -> Result<Vec<EigenIndex>> {
    let mut out = Vec::new();
    run_walk(omega, stop, capacity, |walk, p| {
        out.push(EigenIndex {
            multi_index: walk.multi_index(p.parent, p.coord),
            log_value: p.log_value,
        });
    })?;
    Ok(out)
}

/// Count and cumulative mass of the top eigenvalues under `stop`, without
/// materializing multi-indices.
pub fn top_mass(omega: &OmegaVector, stop: StopRule, capacity: usize) -> Result<(u64, f64)> {
    run_walk(omega, stop, capacity, |_, _| {})
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon must lie in (0,1), got {epsilon}")))
    }
}

/// Minimal `n` whose top-`n` eigenvalue mass reaches `1 - ε²`.
pub fn exact_complexity(
    omega: &OmegaVector,
    epsilon: f64,
    capacity: usize,
) -> Result<ComplexityResult> {
    check_epsilon(epsilon)?;
    let (n, mass) = top_mass(omega, StopRule::Mass(1.0 - epsilon * epsilon), capacity)?;
    Ok(ComplexityResult {
        estimate: ComplexityEstimate::Exact { n },
        achieved_cumulative_mass: mass,
        epsilon,
        mode: ComplexityMode::Exact,
    })
}

/// Normalized `e(n) = sqrt(1 - top-n mass)`; `e(0) = 1`.
pub fn average_error(omega: &OmegaVector, n: usize, capacity: usize) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let (_, mass) = top_mass(omega, StopRule::Count(n), capacity)?;
    Ok((1.0 - mass).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (3.0 - 5f64.sqrt()) / 2.0
    }

    #[test]
    fn two_equal_dims_top_five() {
        let w = golden();
        let v = OmegaVector::from_omegas(&[w, w]).unwrap();
        let top = enumerate_top(&v, StopRule::Count(5), DEFAULT_CAPACITY).unwrap();
        let masses: Vec<f64> = top.iter().map(EigenIndex::value).collect();
        let expected = [0.381966, 0.145898, 0.145898, 0.055728, 0.055728];
        for (m, e) in masses.iter().zip(expected) {
            assert!((m - e).abs() < 1e-6, "{masses:?}");
        }
        // Ties come out lexicographically.
        assert_eq!(top[1].multi_index, vec![1, 2]);
        assert_eq!(top[2].multi_index, vec![2, 1]);
        assert_eq!(top[3].multi_index, vec![1, 3]);
        assert_eq!(top[4].multi_index, vec![2, 2]);
    }

    #[test]
    fn one_dim_geometric() {
        let v = OmegaVector::from_omegas(&[0.5]).unwrap();
        let top = enumerate_top(&v, StopRule::Count(3), DEFAULT_CAPACITY).unwrap();
        let m: Vec<f64> = top.iter().map(EigenIndex::value).collect();
        for (a, b) in m.iter().zip([0.5, 0.25, 0.125]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn first_is_all_ones() {
        let v = OmegaVector::from_omegas(&[0.3, 0.7, 0.1, 0.5]).unwrap();
        let top = enumerate_top(&v, StopRule::Count(1), DEFAULT_CAPACITY).unwrap();
        assert_eq!(top[0].multi_index, vec![1; 4]);
        let expected: f64 = [0.7, 0.3, 0.9, 0.5].iter().product();
        assert!((top[0].value() - expected).abs() < 1e-15);
    }

    #[test]
    fn small_exact_complexities() {
        let v1 = OmegaVector::from_sigmas(&[1.0]).unwrap();
        assert_eq!(exact_complexity(&v1, 0.5, DEFAULT_CAPACITY).unwrap().exact_n(), Some(2));
        let v2 = OmegaVector::from_sigmas(&[1.0, 1.0]).unwrap();
        assert_eq!(exact_complexity(&v2, 0.5, DEFAULT_CAPACITY).unwrap().exact_n(), Some(5));
    }

    #[test]
    fn epsilon_near_one_needs_one_eigenvalue() {
        let v = OmegaVector::from_omegas(&[0.2, 0.3]).unwrap();
        let first: f64 = 0.8 * 0.7;
        let eps = (1.0 - first + 1e-3).sqrt();
        assert_eq!(exact_complexity(&v, eps, DEFAULT_CAPACITY).unwrap().exact_n(), Some(1));
    }

    #[test]
    fn average_error_examples() {
        let v1 = OmegaVector::from_sigmas(&[1.0]).unwrap();
        assert_eq!(average_error(&v1, 0, DEFAULT_CAPACITY).unwrap(), 1.0);
        assert!((average_error(&v1, 2, DEFAULT_CAPACITY).unwrap() - golden()).abs() < 1e-12);
        let v2 = OmegaVector::from_sigmas(&[1.0, 1.0]).unwrap();
        let e = average_error(&v2, 5, DEFAULT_CAPACITY).unwrap();
        assert!((e - 0.463446).abs() < 1e-6, "{e}");
    }

    #[test]
    fn capacity_error_names_the_cap() {
        let v = OmegaVector::from_omegas(&[0.9; 6]).unwrap();
        let err = exact_complexity(&v, 0.01, 1000).unwrap_err();
        match err {
            Error::Capacity { cap, .. } => assert_eq!(cap, 1000),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("1000"));
    }

    #[test]
    fn bad_inputs() {
        let v = OmegaVector::from_omegas(&[0.5]).unwrap();
        assert!(exact_complexity(&v, 0.0, 10).is_err());
        assert!(exact_complexity(&v, 1.0, 10).is_err());
        assert!(enumerate_top(&v, StopRule::Mass(1.0), 10).is_err());
    }
}
