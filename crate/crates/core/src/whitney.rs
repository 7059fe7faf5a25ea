//! Whitney decomposition of a finite union of open axis-aligned boxes into
//! dyadic cubes `Q` with `diam Q ≤ dist(Q, ∂U) ≤ 4 diam Q`.
//!
//! Distances to the complement are exact: the complement inside the bounding
//! box is enumerated once as a list of closed faces of the box arrangement.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

pub const MAX_DIM: usize = 4;
pub const MAX_GENERATION: u32 = 24;
const MAX_ARRANGEMENT_FACES: usize = 20_000_000;

/// Open box `Π (lo_a, hi_a)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisBox<T: Real> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> AxisBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::arg("box corners must share a dimension between 1 and 4"));
        }
        for (a, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::arg(format!("box is degenerate on axis {a}")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |v, (&l, &h)| v * (h - l))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| l < v && v < h)
    }
}

/// Closed box used for faces of the complement and for cubes.
#[derive(Clone, Debug, PartialEq)]
struct Closed<T: Real> {
    lo: [T; MAX_DIM],
    hi: [T; MAX_DIM],
}

fn gap<T: Real>(alo: T, ahi: T, blo: T, bhi: T) -> T {
    (blo - ahi).max(alo - bhi).max(T::zero())
}

impl<T: Real> Closed<T> {
    fn distance_sq(&self, other: &Closed<T>, dim: usize) -> T {
        (0..dim).fold(T::zero(), |acc, a| {
            let g = gap(self.lo[a], self.hi[a], other.lo[a], other.hi[a]);
            acc + g * g
        })
    }
}

/// The open set `U = ⋃ boxes`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet<T: Real> {
    dim: usize,
    boxes: Vec<AxisBox<T>>,
    bbox: Option<AxisBox<T>>,
    /// Closed faces whose union is `Uᶜ ∩ interior(bbox)`.
    complement: Vec<Closed<T>>,
    measure: T,
}

impl<T: Real> BoxSet<T> {
    pub fn new(dim: usize, boxes: Vec<AxisBox<T>>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::arg(format!("box-set dimension must be 1 to 4, got {dim}")));
        }
        if let Some(b) = boxes.iter().find(|b| b.dim() != dim) {
            return Err(Error::arg(format!("box of dimension {} in a {dim}-dimensional set", b.dim())));
        }
        let mut set = Self {
            dim,
            boxes,
            bbox: None,
            complement: Vec::new(),
            measure: T::zero(),
        };
        set.build()?;
        Ok(set)
    }

    pub fn unit_cube(dim: usize) -> Result<Self> {
        Self::new(dim, vec![AxisBox::new(vec![T::zero(); dim], vec![T::one(); dim])?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[AxisBox<T>] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn bounding_box(&self) -> Option<&AxisBox<T>> {
        self.bbox.as_ref()
    }

    /// Lebesgue measure of `U`.
    pub fn measure(&self) -> T {
        self.measure
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    fn build(&mut self) -> Result<()> {
        let d = self.dim;
        if self.boxes.is_empty() {
            return Ok(());
        }
        let mut lo = self.boxes[0].lo.clone();
        let mut hi = self.boxes[0].hi.clone();
        for b in &self.boxes {
            for a in 0..d {
                lo[a] = lo[a].min(b.lo[a]);
                hi[a] = hi[a].max(b.hi[a]);
            }
        }
        self.bbox = Some(AxisBox { lo, hi });
        let breaks: Vec<Vec<T>> = (0..d)
            .map(|a| {
                let mut v: Vec<T> = self.boxes.iter().flat_map(|b| [b.lo[a], b.hi[a]]).collect();
                v.sort_by(|x, y| x.partial_cmp(y).expect("finite corners"));
                v.dedup();
                v
            })
            .collect();
        // per axis: even k is the breakpoint k/2, odd k the interval after it;
        // the outer breakpoints lie on the bounding box and are skipped
        let sizes: Vec<usize> = breaks.iter().map(|b| 2 * b.len() - 1).collect();
        let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        if total.is_none_or(|t| t > MAX_ARRANGEMENT_FACES) {
            return Err(Error::arg("box arrangement too large for exact distances"));
        }
        let total = total.unwrap_or(0);
        let element = |a: usize, k: usize| -> (T, T) {
            if k % 2 == 0 {
                (breaks[a][k / 2], breaks[a][k / 2])
            } else {
                (breaks[a][k / 2], breaks[a][k / 2 + 1])
            }
        };
        let covered = |ks: &[usize; MAX_DIM]| -> bool {
            self.boxes.iter().any(|b| {
                (0..d).all(|a| {
                    let (l, h) = element(a, ks[a]);
                    if ks[a] % 2 == 0 {
                        b.lo[a] < l && l < b.hi[a]
                    } else {
                        b.lo[a] <= l && h <= b.hi[a]
                    }
                })
            })
        };
        let decode = |mut flat: usize| -> [usize; MAX_DIM] {
            let mut ks = [0usize; MAX_DIM];
            for a in (0..d).rev() {
                ks[a] = flat % sizes[a];
                flat /= sizes[a];
            }
            ks
        };
        let faces: Vec<(Closed<T>, bool)> = (0..total)
            .into_par_iter()
            .filter_map(|flat| {
                let ks = decode(flat);
                let on_hull = (0..d).any(|a| ks[a] == 0 || ks[a] + 1 == sizes[a]);
                if on_hull {
                    return None;
                }
                let mut c = Closed {
                    lo: [T::zero(); MAX_DIM],
                    hi: [T::zero(); MAX_DIM],
                };
                for a in 0..d {
                    let (l, h) = element(a, ks[a]);
                    c.lo[a] = l;
                    c.hi[a] = h;
                }
                let full = (0..d).all(|a| ks[a] % 2 == 1);
                if covered(&ks) {
                    return full.then_some((c, true));
                }
                // a crack between covered cells matters; a face on the rim of
                // an uncovered cell is already in that cell's closure
                if !full {
                    let pts: Vec<usize> = (0..d).filter(|&a| ks[a] % 2 == 0).collect();
                    for mask in 0..(1usize << pts.len()) {
                        let mut nb = ks;
                        for (bit, &a) in pts.iter().enumerate() {
                            nb[a] = if mask >> bit & 1 == 1 { ks[a] + 1 } else { ks[a] - 1 };
                        }
                        if !covered(&nb) {
                            return None;
                        }
                    }
                }
                Some((c, false))
            })
            .collect();
        let mut measure = T::zero();
        for (c, is_covered) in faces {
            if is_covered {
                measure = measure + (0..d).fold(T::one(), |v, a| v * (c.hi[a] - c.lo[a]));
            } else {
                self.complement.push(c);
            }
        }
        self.measure = measure;
        Ok(())
    }

    fn distance_closed(&self, q: &Closed<T>) -> T {
        let Some(bb) = &self.bbox else {
            return T::zero();
        };
        let d = self.dim;
        let mut best = T::infinity();
        for a in 0..d {
            best = best.min(q.lo[a] - bb.lo[a]).min(bb.hi[a] - q.hi[a]);
        }
        let mut best_sq = best.max(T::zero()).powi(2);
        for f in &self.complement {
            best_sq = best_sq.min(q.distance_sq(f, d));
            if best_sq == T::zero() {
                break;
            }
        }
        best_sq.sqrt()
    }

    /// Euclidean distance from `x ∈ U` to `Uᶜ`.
    pub fn distance_to_complement(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::arg("point dimension differs from the set"));
        }
        if !self.contains(x) {
            return Err(Error::arg("point lies outside the open set"));
        }
        let mut p = [T::zero(); MAX_DIM];
        p[..self.dim].copy_from_slice(x);
        Ok(self.distance_closed(&Closed { lo: p, hi: p }))
    }

    /// Distance from the closed box `[lo, hi]` to `Uᶜ`; zero if they meet.
    pub fn distance_from_box(&self, lo: &[T], hi: &[T]) -> T {
        let mut c = Closed {
            lo: [T::zero(); MAX_DIM],
            hi: [T::zero(); MAX_DIM],
        };
        c.lo[..self.dim].copy_from_slice(&lo[..self.dim]);
        c.hi[..self.dim].copy_from_slice(&hi[..self.dim]);
        self.distance_closed(&c)
    }

    /// Whether the open box `(lo, hi)` lies inside `U`.
    pub fn contains_open_box(&self, lo: &[T], hi: &[T]) -> bool {
        let d = self.dim;
        let Some(bb) = &self.bbox else {
            return false;
        };
        if (0..d).any(|a| lo[a] < bb.lo[a] || hi[a] > bb.hi[a]) {
            return false;
        }
        !self
            .complement
            .iter()
            .any(|f| (0..d).all(|a| f.lo[a] < hi[a] && f.hi[a] > lo[a]))
    }

    /// Whether the open box `(lo, hi)` meets `U` in a set of positive measure.
    fn meets_open_box(&self, lo: &[T], hi: &[T]) -> bool {
        self.boxes
            .iter()
            .any(|b| (0..self.dim).all(|a| b.lo[a].max(lo[a]) < b.hi[a].min(hi[a])))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DyadicCube {
    pub generation: u32,
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn side<T: Real>(&self, root_side: T) -> T {
        root_side / lit::<T>(2f64.powi(self.generation as i32))
    }

    pub fn corners<T: Real>(&self, origin: &[T], root_side: T) -> (Vec<T>, Vec<T>) {
        let s = self.side(root_side);
        let lo: Vec<T> = self
            .index
            .iter()
            .zip(origin)
            .map(|(&i, &o)| o + s * lit::<T>(i as f64))
            .collect();
        let hi = lo.iter().map(|&l| l + s).collect();
        (lo, hi)
    }

    fn children(&self) -> Vec<DyadicCube> {
        let d = self.index.len();
        (0..(1usize << d))
            .map(|mask| DyadicCube {
                generation: self.generation + 1,
                index: (0..d).map(|a| 2 * self.index[a] + (mask >> (d - 1 - a) & 1) as i64).collect(),
            })
            .collect()
    }

    /// Whether the interiors of the two cubes intersect.
    pub fn overlaps(&self, other: &DyadicCube) -> bool {
        let (fine, coarse) = if self.generation >= other.generation {
            (self, other)
        } else {
            (other, self)
        };
        let shift = fine.generation - coarse.generation;
        fine.index.iter().zip(&coarse.index).all(|(&f, &c)| f >> shift == c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhitneyCube<T: Real> {
    pub cube: DyadicCube,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub diam: T,
    pub dist: T,
}

impl<T: Real> WhitneyCube<T> {
    pub fn satisfies_predicate(&self) -> bool {
        self.diam <= self.dist && self.dist <= lit::<T>(4.0) * self.diam
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| l <= v && v < h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition<T: Real> {
    pub origin: Vec<T>,
    pub root_side: T,
    pub max_generation: u32,
    pub cubes: Vec<WhitneyCube<T>>,
    /// Total measure of the capped cubes meeting `U` that were not emitted;
    /// bounds the measure of `U` left uncovered.
    pub residual_bound: T,
    pub measure: T,
    #[serde(skip)]
    lookup: HashMap<DyadicCube, usize>,
}

impl<T: Real> Decomposition<T> {
    fn new(origin: Vec<T>, root_side: T, max_generation: u32, cubes: Vec<WhitneyCube<T>>, residual_bound: T, measure: T) -> Self {
        let lookup = cubes.iter().enumerate().map(|(i, c)| (c.cube.clone(), i)).collect();
        Self {
            origin,
            root_side,
            max_generation,
            cubes,
            residual_bound,
            measure,
            lookup,
        }
    }

    /// Position in `cubes` of the emitted cube containing `x`, by lattice
    /// arithmetic so that every point has at most one cube.
    pub fn locate_index(&self, x: &[T]) -> Option<usize> {
        let d = self.origin.len();
        for g in 0..=self.max_generation {
            let side = self.root_side / lit::<T>(2f64.powi(g as i32));
            let mut index = Vec::with_capacity(d);
            for a in 0..d {
                index.push(((x[a] - self.origin[a]) / side).floor().to_i64()?);
            }
            if let Some(&i) = self.lookup.get(&DyadicCube { generation: g, index }) {
                return Some(i);
            }
        }
        None
    }

    pub fn covered_measure(&self) -> T {
        let d = self.origin.len();
        self.cubes.iter().fold(T::zero(), |acc, c| acc + c.cube.side(self.root_side).powi(d as i32))
    }

    pub fn locate(&self, x: &[T]) -> Option<&WhitneyCube<T>> {
        self.locate_index(x).map(|i| &self.cubes[i])
    }
}

enum Verdict<T: Real> {
    Outside,
    Emit(WhitneyCube<T>),
    Split(Vec<DyadicCube>),
    Leftover(T),
}

/// Dyadic top-down selection from the cube spanned by the bounding box.
pub fn whitney_decompose<T: Real>(set: &BoxSet<T>, max_generation: u32) -> Result<Decomposition<T>> {
    if max_generation > MAX_GENERATION {
        return Err(Error::arg(format!(
            "max_generation {max_generation} exceeds the limit {MAX_GENERATION}"
        )));
    }
    let d = set.dim();
    let Some(bb) = set.bounding_box() else {
        return Ok(Decomposition::new(vec![T::zero(); d], T::one(), max_generation, Vec::new(), T::zero(), T::zero()));
    };
    let origin = bb.lo.clone();
    let root_side = (0..d).fold(T::zero(), |m, a| m.max(bb.hi[a] - bb.lo[a]));
    let sqrt_d = count::<T>(d).sqrt();
    let four = lit::<T>(4.0);
    let mut active = vec![DyadicCube {
        generation: 0,
        index: vec![0; d],
    }];
    let mut cubes = Vec::new();
    let mut residual = T::zero();
    while !active.is_empty() {
        let verdicts: Vec<Verdict<T>> = active
            .par_iter()
            .map(|q| {
                let (lo, hi) = q.corners(&origin, root_side);
                if !set.meets_open_box(&lo, &hi) {
                    return Verdict::Outside;
                }
                let side = q.side(root_side);
                let diam = side * sqrt_d;
                let dist = set.distance_from_box(&lo, &hi);
                if diam <= dist && dist <= four * diam {
                    return Verdict::Emit(WhitneyCube {
                        cube: q.clone(),
                        lo,
                        hi,
                        diam,
                        dist,
                    });
                }
                if q.generation < max_generation {
                    Verdict::Split(q.children())
                } else {
                    Verdict::Leftover(side.powi(d as i32))
                }
            })
            .collect();
        let mut next = Vec::new();
        for v in verdicts {
            match v {
                Verdict::Outside => {}
                Verdict::Emit(c) => cubes.push(c),
                Verdict::Split(children) => next.extend(children),
                Verdict::Leftover(vol) => residual = residual + vol,
            }
        }
        active = next;
    }
    cubes.sort_by(|a, b| a.cube.cmp(&b.cube));
    Ok(Decomposition::new(origin, root_side, max_generation, cubes, residual, set.measure()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l_shape() -> BoxSet<f64> {
        BoxSet::new(
            2,
            vec![
                AxisBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap(),
                AxisBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn unit_cube_distances() {
        for d in 1..=4 {
            let u = BoxSet::<f64>::unit_cube(d).unwrap();
            assert_eq!(u.distance_to_complement(&vec![0.5; d]).unwrap(), 0.5);
            let mut x = vec![0.5; d];
            x[0] = 0.1;
            assert!((u.distance_to_complement(&x).unwrap() - 0.1).abs() < 1e-15);
            assert!(u.distance_to_complement(&vec![1.5; d]).is_err());
            assert!((u.measure() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn l_shape_measure_and_reentrant_corner() {
        let u = l_shape();
        assert!((u.measure() - 3.0).abs() < 1e-14);
        // nearest complement point is the re-entrant corner (1, 1)
        assert!(u.distance_to_complement(&[1.3, 1.4]).is_err());
        let d = u.distance_to_complement(&[1.3, 0.6]).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
        let d = u.distance_to_complement(&[0.7, 0.6]).unwrap();
        assert!((d - (0.09f64 + 0.16).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn abutting_boxes_leave_the_shared_face_out() {
        let u = BoxSet::<f64>::new(
            2,
            vec![
                AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
                AxisBox::new(vec![1.0, 0.0], vec![2.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!(!u.contains(&[1.0, 0.5]));
        assert!((u.distance_to_complement(&[0.9, 0.5]).unwrap() - 0.1).abs() < 1e-15);
        assert!(!u.contains_open_box(&[0.5, 0.2], &[1.5, 0.8]));
        assert!(u.contains_open_box(&[0.5, 0.2], &[0.9, 0.8]));
    }

    #[test]
    fn overlapping_boxes_match_monte_carlo() {
        let u = BoxSet::<f64>::new(
            2,
            vec![
                AxisBox::new(vec![0.0, 0.0], vec![0.7, 0.6]).unwrap(),
                AxisBox::new(vec![0.4, 0.3], vec![1.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<[f64; 2]> = (0..1_000_000).map(|_| [rng.gen_range(-0.1..1.1), rng.gen_range(-0.1..1.1)]).collect();
        for _ in 0..8 {
            let x = loop {
                let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                if u.contains(&p) {
                    break p;
                }
            };
            let exact = u.distance_to_complement(&x).unwrap();
            let estimate = samples
                .iter()
                .filter(|y| !u.contains(&y[..]))
                .map(|y| ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(estimate >= exact - 1e-12);
            assert!(estimate - exact < 5e-3, "{estimate} vs {exact}");
        }
    }

    fn check_suite(u: &BoxSet<f64>, max_generation: u32, seed: u64) -> Decomposition<f64> {
        let dec = whitney_decompose(u, max_generation).unwrap();
        assert!(!dec.cubes.is_empty());
        for c in &dec.cubes {
            assert!(c.satisfies_predicate());
        }
        // interiors are disjoint: sorted by generation, coarse cubes first
        let mut seen = std::collections::HashSet::new();
        for c in &dec.cubes {
            for g in 0..=c.cube.generation {
                let shift = c.cube.generation - g;
                let anc = DyadicCube {
                    generation: g,
                    index: c.cube.index.iter().map(|&i| i >> shift).collect(),
                };
                assert!(!seen.contains(&anc), "overlap at {:?}", c.cube);
            }
            seen.insert(c.cube.clone());
        }
        let bb = u.bounding_box().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut inside, mut missed) = (0usize, 0usize);
        while inside < 100_000 {
            let x: Vec<f64> = (0..u.dim()).map(|a| rng.gen_range(bb.lo[a]..bb.hi[a])).collect();
            if !u.contains(&x) {
                continue;
            }
            inside += 1;
            if dec.locate(&x).is_none() {
                missed += 1;
            }
        }
        let fraction = missed as f64 / inside as f64;
        let bound = dec.residual_bound / dec.measure;
        let sigma = (bound * (1.0 - bound) / inside as f64).sqrt();
        assert!(fraction <= bound + 4.0 * sigma + 1e-12, "{fraction} > {bound}");
        dec
    }

    #[test]
    fn unit_square_decomposition() {
        let u = BoxSet::<f64>::unit_cube(2).unwrap();
        let dec = check_suite(&u, 10, 1);
        assert!(dec.residual_bound < 4.0 * 2f64.powi(-10) * 4.0);
        assert!((dec.covered_measure() + dec.residual_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_decomposition() {
        check_suite(&l_shape(), 10, 2);
    }

    #[test]
    fn refinement_is_monotone() {
        let u = l_shape();
        let coarse = whitney_decompose(&u, 6).unwrap();
        let fine = whitney_decompose(&u, 8).unwrap();
        for c in &coarse.cubes {
            assert!(fine.cubes.iter().any(|f| f.cube == c.cube));
        }
        assert!(fine.residual_bound <= coarse.residual_bound);
    }

    #[test]
    fn disjoint_root_is_empty_and_cap_is_guarded() {
        let u = BoxSet::<f64>::new(2, Vec::new()).unwrap();
        assert!(whitney_decompose(&u, 5).unwrap().cubes.is_empty());
        assert!(whitney_decompose(&BoxSet::<f64>::unit_cube(2).unwrap(), 25).is_err());
    }

    #[test]
    fn overlap_by_index_arithmetic() {
        let a = DyadicCube { generation: 1, index: vec![1, 0] };
        let b = DyadicCube { generation: 3, index: vec![5, 2] };
        let c = DyadicCube { generation: 3, index: vec![2, 2] };
        assert!(a.overlaps(&b) && !a.overlaps(&c));
    }
}
