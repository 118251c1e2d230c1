//! Unrestricted FCI over an arbitrary conditional-independence oracle.
//!
//! This is the reference the recursive discovery is checked against: driven by
//! the d-separation oracle it produces ground-truth PAGs, driven by a
//! correlation matrix it provides the baseline CI-test count.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::pag::{orient, orient_v_structures, Mark, OrientationConfig, Pag};

/// Possible-D-Sep(x): nodes reachable from `x` along paths whose every inner
/// triple is a collider or a triangle.
pub fn possible_d_sep(g: &Pag, x: usize) -> BTreeSet<usize> {
    let n = g.n();
    let mut seen_state = vec![false; n * n];
    let mut out = BTreeSet::new();
    let mut queue = VecDeque::new();
    for v in g.neighbors(x) {
        seen_state[x * n + v] = true;
        out.insert(v);
        queue.push_back((x, v));
    }
    while let Some((a, b)) = queue.pop_front() {
        for c in g.neighbors(b) {
            if c == a || seen_state[b * n + c] {
                continue;
            }
            let collider = g.mark_at(b, a) == Some(Mark::Arrow) && g.mark_at(b, c) == Some(Mark::Arrow);
            if collider || g.is_adjacent(a, c) {
                seen_state[b * n + c] = true;
                if c != x {
                    out.insert(c);
                }
                queue.push_back((b, c));
            }
        }
    }
    out.remove(&x);
    out
}

/// All size-`k` subsets of `pool` (ascending input) in lexicographic order.
pub fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > pool.len() {
        return out;
    }
    let n = pool.len();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct FciOutput {
    pub pag: Pag,
    /// Distinct `(pair, conditioning set)` queries issued to the oracle.
    pub tests: usize,
}

/// Memoizes the oracle so that repeated queries are counted once.
struct Counted<F> {
    oracle: F,
    cache: HashMap<(usize, usize, Vec<usize>), bool>,
}

impl<F, E> Counted<F>
where
    F: FnMut(usize, usize, &[usize]) -> Result<bool, E>,
{
    fn query(&mut self, x: usize, y: usize, s: &[usize]) -> Result<bool, E> {
        let key = (x.min(y), x.max(y), s.to_vec());
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = (self.oracle)(x, y, s)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

/// Standard FCI: PC adjacency search, collider orientation, a
/// Possible-D-Sep pass, then re-orientation from scratch under the full rule set.
/// `oracle(x, y, s)` returns `true` for independence; `s` is ascending.
pub fn fci<F, E>(n: usize, oracle: F, cfg: &OrientationConfig) -> Result<FciOutput, E>
where
    F: FnMut(usize, usize, &[usize]) -> Result<bool, E>,
{
    let mut oracle = Counted {
        oracle,
        cache: HashMap::new(),
    };
    let mut g = Pag::complete_over(n);

    let mut depth = 0;
    loop {
        let mut any = false;
        for x in 0..n {
            for y in 0..n {
                if x == y || !g.is_adjacent(x, y) {
                    continue;
                }
                let adj: Vec<usize> = g.neighbors(x).filter(|&v| v != y).collect();
                if adj.len() < depth {
                    continue;
                }
                any = true;
                for s in subsets(&adj, depth) {
                    if oracle.query(x, y, &s)? {
                        g.remove_edge_with_sepset(x, y, &s).expect("edge present");
                        break;
                    }
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }

    orient_v_structures(&mut g);
    let pds: Vec<BTreeSet<usize>> = (0..n).map(|x| possible_d_sep(&g, x)).collect();
    for (x, y) in g.skeleton() {
        'pair: for (a, b) in [(x, y), (y, x)] {
            let pool: Vec<usize> = pds[a].iter().copied().filter(|&v| v != b).collect();
            for k in 0..=pool.len() {
                for s in subsets(&pool, k) {
                    if oracle.query(a, b, &s)? {
                        g.remove_edge_with_sepset(a, b, &s).expect("edge present");
                        break 'pair;
                    }
                }
            }
        }
    }

    orient(&mut g, cfg);
    Ok(FciOutput {
        pag: g,
        tests: oracle.cache.len(),
    })
}
