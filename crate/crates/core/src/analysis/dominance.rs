//! Dominators and post-dominators by the standard iterative dataflow
//! algorithm over bitsets. Correctness is cross-checked in tests against a
//! brute-force path-enumeration oracle.

use super::cfg::Cfg;

/// Dense bitset relation: `rel[n]` holds the dominators of node `n`.
#[derive(Debug, Clone)]
pub struct DomRelation {
    words_per_row: usize,
    bits: Vec<u64>,
    pub n: usize,
}

impl DomRelation {
    fn full(n: usize) -> Self {
        let wpr = n.div_ceil(64);
        DomRelation { words_per_row: wpr, bits: vec![u64::MAX; wpr * n], n }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    fn set_only(&mut self, i: usize, member: usize) {
        let r = &mut self.bits[i * self.words_per_row..(i + 1) * self.words_per_row];
        r.fill(0);
        r[member / 64] |= 1 << (member % 64);
    }

    /// True iff `d` dominates `node`.
    pub fn dominates(&self, d: usize, node: usize) -> bool {
        self.row(node)[d / 64] & (1 << (d % 64)) != 0
    }

    pub fn dominators_of(&self, node: usize) -> Vec<usize> {
        (0..self.n).filter(|d| self.dominates(*d, node)).collect()
    }
}

fn iterate(n: usize, root: usize, preds: &[Vec<u32>]) -> DomRelation {
    let mut rel = DomRelation::full(n);
    rel.set_only(root, root);
    let wpr = rel.words_per_row;
    let mut changed = true;
    while changed {
        changed = false;
        for node in 0..n {
            if node == root {
                continue;
            }
            let mut acc = vec![u64::MAX; wpr];
            let mut any = false;
            for p in &preds[node] {
                any = true;
                let prow = rel.row(*p as usize).to_vec();
                for (a, b) in acc.iter_mut().zip(prow) {
                    *a &= b;
                }
            }
            if !any {
                continue; // unreachable: keep the full set
            }
            acc[node / 64] |= 1 << (node % 64);
            let row = &mut rel.bits[node * wpr..(node + 1) * wpr];
            if row != acc.as_slice() {
                row.copy_from_slice(&acc);
                changed = true;
            }
        }
    }
    rel
}

/// Dominators of every block from `root`.
pub fn compute_dominators(cfg: &Cfg, root: u32) -> DomRelation {
    iterate(cfg.succs.len(), root as usize, &cfg.preds)
}

/// Post-dominators: dominance on the reverse graph from a virtual exit
/// node (index `n`) wired to every function exit.
pub struct PostDomRelation {
    rel: DomRelation,
}

impl PostDomRelation {
    /// True iff `d` post-dominates `node`.
    pub fn post_dominates(&self, d: usize, node: usize) -> bool {
        self.rel.dominates(d, node)
    }
}

pub fn compute_post_dominators(cfg: &Cfg) -> PostDomRelation {
    let n = cfg.succs.len();
    // Reverse graph: preds of the reverse graph are the successors.
    let mut rpreds: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for (b, ss) in cfg.succs.iter().enumerate() {
        for (s, _) in ss {
            rpreds[b].push(*s);
        }
    }
    for e in &cfg.exits {
        rpreds[*e as usize].push(n as u32);
    }
    PostDomRelation { rel: iterate(n + 1, n, &rpreds) }
}
