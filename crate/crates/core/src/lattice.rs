//! Torus geometry, domain-wall loops and well/bottleneck classification.
//!
//! Spins live on the sites of an `lx × ly` periodic square lattice. Site `(x, y)`
//! has index `x + lx·y`; its horizontal edge to `(x+1, y)` is edge `2·site` and its
//! vertical edge to `(x, y+1)` is edge `2·site + 1`. Domain-wall links are the dual
//! edges, indexed like the primal edge they cross. Dual vertex `(u, v)` is the
//! plaquette whose lower-left corner is site `(u, v)`; north is `+y`.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peierls::BottleneckStructure;
use crate::spin::SpinConfig;

/// Longest loop length enumerated exhaustively unless a caller widens it.
pub const DEFAULT_LOOP_BUDGET: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

const NW: u8 = 0b1001;
const ES: u8 = 0b0110;

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    #[inline]
    fn bit(self) -> u8 {
        match self {
            Dir::N => 1,
            Dir::E => 2,
            Dir::S => 4,
            Dir::W => 8,
        }
    }

    #[inline]
    pub fn opposite(self) -> Dir {
        match self {
            Dir::N => Dir::S,
            Dir::E => Dir::W,
            Dir::S => Dir::N,
            Dir::W => Dir::E,
        }
    }

    /// Side joined to `self` at a 4-valent vertex: north with west, east with south.
    #[inline]
    pub fn crossing_partner(self) -> Dir {
        match self {
            Dir::N => Dir::W,
            Dir::W => Dir::N,
            Dir::E => Dir::S,
            Dir::S => Dir::E,
        }
    }

    #[inline]
    pub fn delta(self) -> (i64, i64) {
        match self {
            Dir::N => (0, 1),
            Dir::E => (1, 0),
            Dir::S => (0, -1),
            Dir::W => (-1, 0),
        }
    }

    fn from_bit(b: u8) -> Dir {
        match b {
            1 => Dir::N,
            2 => Dir::E,
            4 => Dir::S,
            _ => Dir::W,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLattice {
    lx: usize,
    ly: usize,
}

/// Square `L0 × L0` torus; `L0` must be even and at least 4.
pub fn build_torus(l0: usize) -> Result<TorusLattice> {
    if l0 < 4 || !l0.is_multiple_of(2) {
        return Err(Error::Lattice(format!("L0 must be even and >= 4, got {l0}")));
    }
    Ok(TorusLattice { lx: l0, ly: l0 })
}

impl TorusLattice {
    /// Rectangular torus for small dynamics demos. Loop machinery needs both sides ≥ 3.
    pub fn rect(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::Lattice(format!("torus sides must be >= 2, got {lx}x{ly}")));
        }
        Ok(Self { lx, ly })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    /// Linear size of a square torus (the x extent otherwise).
    pub fn l0(&self) -> usize {
        self.lx
    }

    pub fn is_square(&self) -> bool {
        self.lx == self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn n_edges(&self) -> usize {
        2 * self.n_sites()
    }

    #[inline]
    pub fn site(&self, x: i64, y: i64) -> usize {
        let x = x.rem_euclid(self.lx as i64) as usize;
        let y = y.rem_euclid(self.ly as i64) as usize;
        x + self.lx * y
    }

    #[inline]
    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s % self.lx, s / self.lx)
    }

    /// Endpoints of primal edge `e`.
    #[inline]
    pub fn edge_sites(&self, e: usize) -> (usize, usize) {
        let s = e / 2;
        let (x, y) = self.coords(s);
        let t = if e.is_multiple_of(2) { self.site(x as i64 + 1, y as i64) } else { self.site(x as i64, y as i64 + 1) };
        (s, t)
    }

    /// Incident edges of site `s`: right, up, left, down.
    pub fn site_edges(&self, s: usize) -> [usize; 4] {
        let (x, y) = self.coords(s);
        let (x, y) = (x as i64, y as i64);
        [2 * s, 2 * s + 1, 2 * self.site(x - 1, y), 2 * self.site(x, y - 1) + 1]
    }

    /// Nearest neighbours of `s`: right, up, left, down.
    pub fn neighbors(&self, s: usize) -> [usize; 4] {
        let (x, y) = self.coords(s);
        let (x, y) = (x as i64, y as i64);
        [self.site(x + 1, y), self.site(x, y + 1), self.site(x - 1, y), self.site(x, y - 1)]
    }

    /// +1 on the even sublattice (`x + y` even), −1 on the odd one.
    pub fn sublattice_sign(&self, s: usize) -> i8 {
        let (x, y) = self.coords(s);
        if (x + y) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        (0..self.n_edges()).map(|e| self.edge_sites(e)).collect()
    }

    /// Dual edge leaving dual vertex `dv` on side `d`.
    #[inline]
    pub fn dual_edge(&self, dv: usize, d: Dir) -> usize {
        let (u, v) = self.coords(dv);
        let (u, v) = (u as i64, v as i64);
        match d {
            Dir::N => 2 * self.site(u, v + 1),
            Dir::S => 2 * self.site(u, v),
            Dir::E => 2 * self.site(u + 1, v) + 1,
            Dir::W => 2 * self.site(u, v) + 1,
        }
    }

    #[inline]
    pub fn dual_step(&self, dv: usize, d: Dir) -> usize {
        let (u, v) = self.coords(dv);
        let (dx, dy) = d.delta();
        self.site(u as i64 + dx, v as i64 + dy)
    }

    /// The dual vertex on the south/west end of dual edge `e` and the side it leaves by.
    #[inline]
    pub fn dual_ends(&self, e: usize) -> (usize, Dir) {
        let (x, y) = self.coords(e / 2);
        let (x, y) = (x as i64, y as i64);
        if e.is_multiple_of(2) {
            (self.site(x, y - 1), Dir::N)
        } else {
            (self.site(x - 1, y), Dir::E)
        }
    }

    fn check_loop_geometry(&self) -> Result<()> {
        if self.lx < 3 || self.ly < 3 {
            return Err(Error::Lattice(format!("loop machinery needs sides >= 3, got {}x{}", self.lx, self.ly)));
        }
        Ok(())
    }
}

/// A closed domain-wall trail on the dual lattice.
#[derive(Clone, Debug)]
pub struct DWLoop {
    start: usize,
    steps: Vec<Dir>,
    links: Vec<usize>,
    key: Vec<usize>,
    disp: (i64, i64),
}

impl PartialEq for DWLoop {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for DWLoop {}

impl DWLoop {
    fn from_walk(lat: &TorusLattice, start: usize, steps: Vec<Dir>) -> Self {
        let mut links = Vec::with_capacity(steps.len());
        let mut v = start;
        let mut disp = (0, 0);
        for &d in &steps {
            links.push(lat.dual_edge(v, d));
            v = lat.dual_step(v, d);
            let (dx, dy) = d.delta();
            disp.0 += dx;
            disp.1 += dy;
        }
        debug_assert_eq!(v, start, "walk must close");
        let key = canonical_key(&links);
        Self { start, steps, links, key, disp }
    }

    /// Rebuild a loop from its cyclic link sequence.
    pub fn from_links(lat: &TorusLattice, links: &[usize]) -> Result<Self> {
        lat.check_loop_geometry()?;
        let bad = || Error::Precondition("link list is not a closed dual trail".into());
        if links.len() < 4 || links.iter().any(|&e| e >= lat.n_edges()) {
            return Err(bad());
        }
        let touches = |v: usize, e: usize| Dir::ALL.iter().any(|&d| lat.dual_edge(v, d) == e);
        let (a, d0) = lat.dual_ends(links[0]);
        let b = lat.dual_step(a, d0);
        let (start, first) = if touches(b, links[1]) { (a, d0) } else { (b, d0.opposite()) };
        let mut steps = vec![first];
        let mut v = lat.dual_step(start, first);
        let mut in_side = first.opposite();
        for &e in &links[1..] {
            let d = Dir::ALL.into_iter().find(|&d| d != in_side && lat.dual_edge(v, d) == e).ok_or_else(bad)?;
            steps.push(d);
            v = lat.dual_step(v, d);
            in_side = d.opposite();
        }
        if v != start {
            return Err(bad());
        }
        Ok(Self::from_walk(lat, start, steps))
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn canonical_key(&self) -> &[usize] {
        &self.key
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn steps(&self) -> &[Dir] {
        &self.steps
    }

    /// Number of times the loop winds around the x and y cycles of the torus.
    pub fn winding(&self, lat: &TorusLattice) -> (i64, i64) {
        (self.disp.0 / lat.lx as i64, self.disp.1 / lat.ly as i64)
    }

    pub fn is_contractible(&self) -> bool {
        self.disp == (0, 0)
    }

    /// Sites enclosed by a contractible loop, from ray-crossing parity on the planar lift.
    pub fn interior(&self, lat: &TorusLattice) -> Vec<usize> {
        assert!(self.is_contractible(), "interior is defined for contractible loops only");
        let (u0, v0) = lat.coords(self.start);
        let (mut u, mut v) = (u0 as i64, v0 as i64);
        // (row, column) of every primal horizontal edge crossed by the lift
        let mut crossings: Vec<(i64, i64)> = Vec::new();
        for &d in &self.steps {
            match d {
                Dir::N => crossings.push((v + 1, u)),
                Dir::S => crossings.push((v, u)),
                _ => {}
            }
            let (dx, dy) = d.delta();
            u += dx;
            v += dy;
        }
        crossings.sort_unstable();
        let mut parity = vec![false; lat.n_sites()];
        let mut i = 0;
        while i < crossings.len() {
            let row = crossings[i].0;
            let mut j = i;
            while j < crossings.len() && crossings[j].0 == row {
                j += 1;
            }
            let cols: Vec<i64> = crossings[i..j].iter().map(|c| c.1).collect();
            for x in cols[0]..=cols[cols.len() - 1] {
                let right = cols.iter().filter(|&&c| c >= x).count();
                if right % 2 == 1 {
                    let s = lat.site(x, row);
                    parity[s] = !parity[s];
                }
            }
            i = j;
        }
        (0..lat.n_sites()).filter(|&s| parity[s]).collect()
    }
}

/// Lexicographically smallest rotation of the link sequence over both orientations.
pub fn canonical_key(links: &[usize]) -> Vec<usize> {
    let n = links.len();
    let mut best: Option<Vec<usize>> = None;
    let mut rev = links.to_vec();
    rev.reverse();
    for seq in [links, &rev[..]] {
        for r in 0..n {
            let cand: Vec<usize> = (0..n).map(|i| seq[(r + i) % n]).collect();
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.unwrap_or_default()
}

struct Walker<'a> {
    lat: &'a TorusLattice,
    anchor: usize,
    a: usize,
    s0: Dir,
    min_len: usize,
    max_len: usize,
    min_edge_only: bool,
    used: Vec<bool>,
    masks: Vec<u8>,
    steps: Vec<Dir>,
    found: Vec<DWLoop>,
}

impl<'a> Walker<'a> {
    fn new(lat: &'a TorusLattice, anchor: usize, min_len: usize, max_len: usize, min_edge_only: bool) -> Self {
        let (a, s0) = lat.dual_ends(anchor);
        Self {
            lat,
            anchor,
            a,
            s0,
            min_len,
            max_len,
            min_edge_only,
            used: vec![false; lat.n_edges()],
            masks: vec![0; lat.n_sites()],
            steps: Vec::new(),
            found: Vec::new(),
        }
    }

    fn run(mut self) -> Vec<DWLoop> {
        self.used[self.anchor] = true;
        self.masks[self.a] = self.s0.bit();
        self.steps.push(self.s0);
        let b = self.lat.dual_step(self.a, self.s0);
        self.dfs(b, self.s0.opposite(), self.s0.delta());
        self.found
    }

    /// Whether the trail may close at the anchor vertex arriving from `in_side`.
    fn may_close(&self, in_side: Dir) -> bool {
        if in_side == self.s0 {
            return false;
        }
        let mid = self.masks[self.a] & !self.s0.bit();
        let pair = in_side.bit() | self.s0.bit();
        mid == 0 || ((mid == NW || mid == ES) && pair == 0b1111 ^ mid)
    }

    /// Exit sides allowed at `v` when arriving from `in_side`.
    fn exits(&self, v: usize, in_side: Dir) -> ([Dir; 3], usize) {
        let mut out = [Dir::N; 3];
        let m = self.masks[v];
        if v == self.a {
            if m == self.s0.bit() && in_side != self.s0 {
                let o = in_side.crossing_partner();
                if o != self.s0 {
                    out[0] = o;
                    return (out, 1);
                }
            }
            return (out, 0);
        }
        if m != 0 {
            if (m == NW || m == ES) && in_side.bit() & m == 0 {
                out[0] = in_side.crossing_partner();
                return (out, 1);
            }
            return (out, 0);
        }
        let mut k = 0;
        for d in Dir::ALL {
            if d != in_side {
                out[k] = d;
                k += 1;
            }
        }
        (out, k)
    }

    fn dfs(&mut self, v: usize, in_side: Dir, pos: (i64, i64)) {
        let len = self.steps.len();
        if v == self.a && pos == (0, 0) && len >= self.min_len && len <= self.max_len && self.may_close(in_side) {
            self.found.push(DWLoop::from_walk(self.lat, self.a, self.steps.clone()));
        }
        if len >= self.max_len {
            return;
        }
        let remaining = (self.max_len - len - 1) as i64;
        let (outs, k) = self.exits(v, in_side);
        for &out in &outs[..k] {
            let e = self.lat.dual_edge(v, out);
            if self.used[e] || (self.min_edge_only && e < self.anchor) {
                continue;
            }
            let (dx, dy) = out.delta();
            let np = (pos.0 + dx, pos.1 + dy);
            if np.0.abs() + np.1.abs() > remaining {
                continue;
            }
            self.used[e] = true;
            let old = self.masks[v];
            self.masks[v] |= in_side.bit() | out.bit();
            self.steps.push(out);
            let w = self.lat.dual_step(v, out);
            self.dfs(w, out.opposite(), np);
            self.steps.pop();
            self.masks[v] = old;
            self.used[e] = false;
        }
    }
}

/// All contractible loops of length ≤ `max_len`, through `anchor` if given.
pub fn enumerate_loops(lat: &TorusLattice, max_len: usize, anchor: Option<usize>) -> Result<Vec<DWLoop>> {
    enumerate_loops_between(lat, 4, max_len, anchor, DEFAULT_LOOP_BUDGET)
}

/// Contractible loops with `min_len ≤ ℓ ≤ max_len`, exhaustively, subject to `budget`.
pub fn enumerate_loops_between(
    lat: &TorusLattice,
    min_len: usize,
    max_len: usize,
    anchor: Option<usize>,
    budget: usize,
) -> Result<Vec<DWLoop>> {
    lat.check_loop_geometry()?;
    if max_len < 4 {
        return Err(Error::Precondition(format!("max_len must be >= 4, got {max_len}")));
    }
    if max_len > budget {
        return Err(Error::LoopBudget { requested: max_len, budget });
    }
    let loops: Vec<DWLoop> = match anchor {
        Some(e) => {
            if e >= lat.n_edges() {
                return Err(Error::Precondition(format!("anchor edge {e} out of range")));
            }
            Walker::new(lat, e, min_len, max_len, false).run()
        }
        None => (0..lat.n_edges())
            .into_par_iter()
            .map(|e| Walker::new(lat, e, min_len, max_len, true).run())
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect(),
    };
    let mut seen = HashSet::with_capacity(loops.len());
    Ok(loops.into_iter().filter(|l| seen.insert(l.key.clone())).collect())
}

/// Random contractible loops with `min_len ≤ ℓ ≤ max_len` from anchored growth with rejection.
///
/// Each attempt picks an anchor edge and an even target length uniformly, then grows
/// the trail by uniform choice among the moves that can still close on time. The
/// resulting distribution over loops is not uniform. Duplicates are dropped.
pub fn sample_loops<R: Rng>(
    lat: &TorusLattice,
    count: usize,
    min_len: usize,
    max_len: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Vec<DWLoop>> {
    lat.check_loop_geometry()?;
    let lo = min_len.max(4).div_ceil(2);
    let hi = max_len / 2;
    if lo > hi {
        return Err(Error::Precondition(format!("no even length in [{min_len}, {max_len}]")));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let anchor = rng.gen_range(0..lat.n_edges());
        let target = 2 * rng.gen_range(lo..=hi);
        if let Some(l) = grow_once(lat, anchor, target, rng) {
            if seen.insert(l.key.clone()) {
                out.push(l);
            }
        }
    }
    Ok(out)
}

fn grow_once<R: Rng>(lat: &TorusLattice, anchor: usize, target: usize, rng: &mut R) -> Option<DWLoop> {
    let mut w = Walker::new(lat, anchor, target, target, false);
    w.used[anchor] = true;
    w.masks[w.a] = w.s0.bit();
    w.steps.push(w.s0);
    let mut v = lat.dual_step(w.a, w.s0);
    let mut in_side = w.s0.opposite();
    let mut pos = w.s0.delta();
    loop {
        let len = w.steps.len();
        if len == target {
            return (v == w.a && pos == (0, 0) && w.may_close(in_side)).then(|| DWLoop::from_walk(lat, w.a, w.steps.clone()));
        }
        let remaining = (target - len - 1) as i64;
        let (outs, k) = w.exits(v, in_side);
        let mut ok = [Dir::N; 3];
        let mut n_ok = 0;
        for &o in &outs[..k] {
            let (dx, dy) = o.delta();
            if !w.used[lat.dual_edge(v, o)] && (pos.0 + dx).abs() + (pos.1 + dy).abs() <= remaining {
                ok[n_ok] = o;
                n_ok += 1;
            }
        }
        if n_ok == 0 {
            return None;
        }
        let o = ok[rng.gen_range(0..n_ok)];
        w.used[lat.dual_edge(v, o)] = true;
        w.masks[v] |= in_side.bit() | o.bit();
        w.steps.push(o);
        let (dx, dy) = o.delta();
        pos = (pos.0 + dx, pos.1 + dy);
        v = lat.dual_step(v, o);
        in_side = o.opposite();
    }
}

#[derive(Clone, Debug)]
pub struct DWDecomposition {
    pub loops: Vec<DWLoop>,
    /// Spin of the region percolating in both torus directions.
    pub sea_value: Option<i8>,
    /// Dual vertices where four domain-wall links meet.
    pub resolved_crossings: Vec<usize>,
}

/// Excited-edge indicator: `true` iff `z_i z_j = −1`.
pub fn excited_edges(lat: &TorusLattice, z: &SpinConfig) -> Vec<bool> {
    (0..lat.n_edges())
        .map(|e| {
            let (a, b) = lat.edge_sites(e);
            z.spin(a) != z.spin(b)
        })
        .collect()
}

pub fn dw_decompose(lat: &TorusLattice, z: &SpinConfig) -> DWDecomposition {
    let excited = excited_edges(lat, z);
    let masks: Vec<u8> =
        (0..lat.n_sites()).map(|dv| Dir::ALL.iter().filter(|&&d| excited[lat.dual_edge(dv, d)]).fold(0u8, |m, d| m | d.bit())).collect();
    let resolved_crossings = (0..lat.n_sites()).filter(|&dv| masks[dv] == 0b1111).collect();
    let mut visited = vec![false; lat.n_edges()];
    let mut loops = Vec::new();
    for e in 0..lat.n_edges() {
        if !excited[e] || visited[e] {
            continue;
        }
        let (a, d0) = lat.dual_ends(e);
        visited[e] = true;
        let mut steps = vec![d0];
        let mut v = lat.dual_step(a, d0);
        let mut in_side = d0.opposite();
        loop {
            let m = masks[v];
            let out = if m == 0b1111 { in_side.crossing_partner() } else { Dir::from_bit(m & !in_side.bit()) };
            let next = lat.dual_edge(v, out);
            if visited[next] {
                debug_assert_eq!(next, e);
                break;
            }
            visited[next] = true;
            steps.push(out);
            v = lat.dual_step(v, out);
            in_side = out.opposite();
        }
        loops.push(DWLoop::from_walk(lat, a, steps));
    }
    DWDecomposition { loops, sea_value: percolating_spin(lat, z), resolved_crossings }
}

/// Spin value of the same-spin region that wraps both torus directions, if any.
///
/// Regions are 4-neighbour clusters, joined additionally across a checkerboard plaquette
/// between its south-west and north-east corners, since the crossing rule separates the
/// other two corners there.
pub fn percolating_spin(lat: &TorusLattice, z: &SpinConfig) -> Option<i8> {
    let n = lat.n_sites();
    let mut pos: Vec<Option<(i64, i64)>> = vec![None; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if pos[root].is_some() {
            continue;
        }
        let spin = z.spin(root);
        let (x0, y0) = lat.coords(root);
        pos[root] = Some((x0 as i64, y0 as i64));
        queue.push_back(root);
        let mut first: Option<(i64, i64)> = None;
        let mut wraps_both = false;
        while let Some(s) = queue.pop_front() {
            let (px, py) = pos[s].unwrap();
            let (x, y) = lat.coords(s);
            let (x, y) = (x as i64, y as i64);
            let [right, up, left, down] = lat.neighbors(s);
            // south-west and north-east corners of a checkerboard plaquette share a region
            let ne = lat.site(x + 1, y + 1);
            let sw = lat.site(x - 1, y - 1);
            let ne_open = z.spin(ne) == spin && z.spin(right) != spin && z.spin(up) != spin;
            let sw_open = z.spin(sw) == spin && z.spin(left) != spin && z.spin(down) != spin;
            let steps = [
                (right, (1, 0), true),
                (up, (0, 1), true),
                (left, (-1, 0), true),
                (down, (0, -1), true),
                (ne, (1, 1), ne_open),
                (sw, (-1, -1), sw_open),
            ];
            for (t, (dx, dy), open) in steps {
                if !open || z.spin(t) != spin {
                    continue;
                }
                let cand = (px + dx, py + dy);
                match pos[t] {
                    None => {
                        pos[t] = Some(cand);
                        queue.push_back(t);
                    }
                    Some(q) if q != cand && !wraps_both => {
                        let d = (cand.0 - q.0, cand.1 - q.1);
                        match first {
                            None => first = Some(d),
                            Some(f) => wraps_both = f.0 * d.1 - f.1 * d.0 != 0,
                        }
                    }
                    _ => {}
                }
            }
        }
        if wraps_both {
            return Some(spin);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConfigClass {
    Well(u8),
    Bottleneck(u8),
    Out,
}

impl ConfigClass {
    /// Image under the global spin flip (wells and bottlenecks swap labels).
    pub fn swapped(self) -> Self {
        match self {
            ConfigClass::Well(k) => ConfigClass::Well(3 - k),
            ConfigClass::Bottleneck(k) => ConfigClass::Bottleneck(3 - k),
            ConfigClass::Out => ConfigClass::Out,
        }
    }

    pub fn is_well(self, k: u8) -> bool {
        self == ConfigClass::Well(k)
    }

    pub fn is_bottleneck(self, k: u8) -> bool {
        self == ConfigClass::Bottleneck(k)
    }

    /// Member of `W_k ∪ Φ_k`.
    pub fn in_sector(self, k: u8) -> bool {
        self.is_well(k) || self.is_bottleneck(k)
    }
}

/// Classification from loop lengths: wells have all loops ≤ `well_cap`, bottlenecks
/// all loops ≤ `bottleneck_cap` with one longer than `well_cap`. Winding loops are Out.
pub fn classify_decomposition(dec: &DWDecomposition, well_cap: usize, bottleneck_cap: usize) -> ConfigClass {
    if dec.loops.iter().any(|l| !l.is_contractible()) {
        return ConfigClass::Out;
    }
    let longest = dec.loops.iter().map(DWLoop::len).max().unwrap_or(0);
    let k = match dec.sea_value {
        Some(1) => 1,
        Some(_) => 2,
        None => {
            assert!(longest > bottleneck_cap, "contractible small loops without a percolating sea");
            return ConfigClass::Out;
        }
    };
    if longest <= well_cap {
        ConfigClass::Well(k)
    } else if longest <= bottleneck_cap {
        ConfigClass::Bottleneck(k)
    } else {
        ConfigClass::Out
    }
}

pub fn classify_config(z: &SpinConfig, bs: &BottleneckStructure) -> ConfigClass {
    let dec = dw_decompose(bs.lattice(), z);
    classify_decomposition(&dec, bs.l, bs.cap)
}

/// Loop set as a JSON array of dual-edge index lists.
pub fn loops_to_json(loops: &[DWLoop]) -> String {
    let lists: Vec<&[usize]> = loops.iter().map(|l| l.links()).collect();
    serde_json::to_string(&lists).expect("plain integer arrays serialize")
}

pub fn loops_from_json(lat: &TorusLattice, s: &str) -> Result<Vec<DWLoop>> {
    let lists: Vec<Vec<usize>> = serde_json::from_str(s)?;
    lists.iter().map(|l| DWLoop::from_links(lat, l)).collect()
}
