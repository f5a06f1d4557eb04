//! Boykov–Kolmogorov augmenting-path max-flow for binary labeling problems.
//!
//! Nodes carry a signed terminal capacity (`> 0`: from the source, `< 0`: to
//! the sink). After [`MaxFlow::solve`], [`MaxFlow::is_sink_side`] gives the
//! minimum cut; nodes reachable from neither terminal stay on the source side.

use std::collections::VecDeque;

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const INF_DIST: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Arc {
    head: u32,
    next: u32,
    cap: f64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    first: u32,
    parent: u32,
    sink: bool,
    active: bool,
    ts: u32,
    dist: u32,
    tr_cap: f64,
}

#[derive(Debug, Clone)]
pub struct MaxFlow {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    time: u32,
    active: VecDeque<u32>,
    orphans: VecDeque<u32>,
}

#[inline]
fn sister(a: u32) -> u32 {
    a ^ 1
}

impl MaxFlow {
    pub fn new(node_count: usize, edge_hint: usize) -> Self {
        MaxFlow {
            nodes: vec![
                Node { first: NONE, parent: NONE, sink: false, active: false, ts: 0, dist: 0, tr_cap: 0.0 };
                node_count
            ],
            arcs: Vec::with_capacity(2 * edge_hint),
            flow: 0.0,
            time: 0,
            active: VecDeque::new(),
            orphans: VecDeque::new(),
        }
    }

    /// Adds source/sink capacities to node `i`.
    pub fn add_terminal(&mut self, i: usize, source_cap: f64, sink_cap: f64) {
        let delta = self.nodes[i].tr_cap;
        // keep only the net terminal capacity, the common part is saturated flow
        let (s, t) = if delta > 0.0 { (source_cap + delta, sink_cap) } else { (source_cap, sink_cap - delta) };
        self.flow += s.min(t);
        self.nodes[i].tr_cap = s - t;
    }

    /// Adds an edge with capacity `cap` from `i` to `j` and `rev_cap` back.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        let a = self.arcs.len() as u32;
        self.arcs.push(Arc { head: j as u32, next: self.nodes[i].first, cap });
        self.nodes[i].first = a;
        self.arcs.push(Arc { head: i as u32, next: self.nodes[j].first, cap: rev_cap });
        self.nodes[j].first = a + 1;
    }

    pub fn flow(&self) -> f64 {
        self.flow
    }

    pub fn is_sink_side(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        n.parent != NONE && n.sink
    }

    fn set_active(&mut self, i: u32) {
        let n = &mut self.nodes[i as usize];
        if !n.active {
            n.active = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<u32> {
        while let Some(i) = self.active.pop_front() {
            let n = &mut self.nodes[i as usize];
            n.active = false;
            if n.parent != NONE {
                return Some(i);
            }
        }
        None
    }

    pub fn solve(&mut self) -> f64 {
        for i in 0..self.nodes.len() {
            let n = &mut self.nodes[i];
            if n.tr_cap > 0.0 {
                n.sink = false;
                n.parent = TERMINAL;
                n.ts = 0;
                n.dist = 1;
                self.set_active(i as u32);
            } else if n.tr_cap < 0.0 {
                n.sink = true;
                n.parent = TERMINAL;
                n.ts = 0;
                n.dist = 1;
                self.set_active(i as u32);
            }
        }

        let mut current: Option<u32> = None;
        loop {
            let i = match current.filter(|&c| self.nodes[c as usize].parent != NONE) {
                Some(c) => c,
                None => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            current = None;

            // growth
            let mut bridge = NONE;
            let i_sink = self.nodes[i as usize].sink;
            let mut a = self.nodes[i as usize].first;
            while a != NONE {
                let arc = self.arcs[a as usize];
                let residual = if i_sink { self.arcs[sister(a) as usize].cap } else { arc.cap };
                if residual > 0.0 {
                    let j = arc.head as usize;
                    if self.nodes[j].parent == NONE {
                        let (ts, dist) = (self.nodes[i as usize].ts, self.nodes[i as usize].dist);
                        let nj = &mut self.nodes[j];
                        nj.sink = i_sink;
                        nj.parent = sister(a);
                        nj.ts = ts;
                        nj.dist = dist + 1;
                        self.set_active(j as u32);
                    } else if self.nodes[j].sink != i_sink {
                        bridge = if i_sink { sister(a) } else { a };
                        break;
                    } else {
                        let (ts_i, d_i) = (self.nodes[i as usize].ts, self.nodes[i as usize].dist);
                        let nj = &mut self.nodes[j];
                        if nj.ts <= ts_i && nj.dist > d_i {
                            // shorter path to the root through i
                            nj.parent = sister(a);
                            nj.ts = ts_i;
                            nj.dist = d_i + 1;
                        }
                    }
                }
                a = arc.next;
            }

            self.time += 1;
            if bridge != NONE {
                // re-examine i after the augmentation
                current = Some(i);
                self.augment(bridge);
                self.adopt();
            }
        }
        self.flow
    }

    fn augment(&mut self, middle: u32) {
        // bottleneck
        let mut bottleneck = self.arcs[middle as usize].cap;
        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[sister(p) as usize].cap);
            i = self.arcs[p as usize].head;
        }
        bottleneck = bottleneck.min(self.nodes[i as usize].tr_cap);
        let mut i = self.arcs[middle as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[p as usize].cap);
            i = self.arcs[p as usize].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i as usize].tr_cap);

        // push
        self.arcs[sister(middle) as usize].cap += bottleneck;
        self.arcs[middle as usize].cap -= bottleneck;

        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            self.arcs[p as usize].cap += bottleneck;
            self.arcs[sister(p) as usize].cap -= bottleneck;
            if self.arcs[sister(p) as usize].cap <= 0.0 {
                self.make_orphan(i);
            }
            i = self.arcs[p as usize].head;
        }
        self.nodes[i as usize].tr_cap -= bottleneck;
        if self.nodes[i as usize].tr_cap <= 0.0 {
            self.make_orphan(i);
        }

        let mut i = self.arcs[middle as usize].head;
        loop {
            let p = self.nodes[i as usize].parent;
            if p == TERMINAL {
                break;
            }
            self.arcs[sister(p) as usize].cap += bottleneck;
            self.arcs[p as usize].cap -= bottleneck;
            if self.arcs[p as usize].cap <= 0.0 {
                self.make_orphan(i);
            }
            i = self.arcs[p as usize].head;
        }
        self.nodes[i as usize].tr_cap += bottleneck;
        if self.nodes[i as usize].tr_cap >= 0.0 {
            self.make_orphan(i);
        }
        self.flow += bottleneck;
    }

    fn make_orphan(&mut self, i: u32) {
        self.nodes[i as usize].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    fn adopt(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            let i_sink = self.nodes[i as usize].sink;
            let mut best = NONE;
            let mut best_d = INF_DIST;
            let mut a0 = self.nodes[i as usize].first;
            while a0 != NONE {
                let arc = self.arcs[a0 as usize];
                let residual = if i_sink { arc.cap } else { self.arcs[sister(a0) as usize].cap };
                let j0 = arc.head;
                if residual > 0.0
                    && self.nodes[j0 as usize].sink == i_sink
                    && self.nodes[j0 as usize].parent != NONE
                {
                    // distance of j0 to its root, if it has one
                    let mut j = j0;
                    let mut d = 0u32;
                    loop {
                        let nj = self.nodes[j as usize];
                        if nj.ts == self.time {
                            d = d.saturating_add(nj.dist);
                            break;
                        }
                        d += 1;
                        if nj.parent == TERMINAL {
                            let n = &mut self.nodes[j as usize];
                            n.ts = self.time;
                            n.dist = 1;
                            break;
                        }
                        if nj.parent == ORPHAN {
                            d = INF_DIST;
                            break;
                        }
                        j = self.arcs[nj.parent as usize].head;
                    }
                    if d < INF_DIST {
                        if d < best_d {
                            best = a0;
                            best_d = d;
                        }
                        let mut j = j0;
                        let mut dd = d;
                        while self.nodes[j as usize].ts != self.time {
                            let n = &mut self.nodes[j as usize];
                            n.ts = self.time;
                            n.dist = dd;
                            dd -= 1;
                            j = self.arcs[n.parent as usize].head;
                        }
                    }
                }
                a0 = arc.next;
            }

            if best != NONE {
                let n = &mut self.nodes[i as usize];
                n.parent = best;
                n.ts = self.time;
                n.dist = best_d + 1;
            } else {
                let mut a0 = self.nodes[i as usize].first;
                while a0 != NONE {
                    let arc = self.arcs[a0 as usize];
                    let j = arc.head;
                    let nj = self.nodes[j as usize];
                    if nj.sink == i_sink && nj.parent != NONE {
                        let residual = if i_sink { arc.cap } else { self.arcs[sister(a0) as usize].cap };
                        if residual > 0.0 {
                            self.set_active(j);
                        }
                        if nj.parent != TERMINAL && nj.parent != ORPHAN && self.arcs[nj.parent as usize].head == i {
                            self.make_orphan(j);
                        }
                    }
                    a0 = arc.next;
                }
                self.nodes[i as usize].parent = NONE;
            }
        }
    }
}
