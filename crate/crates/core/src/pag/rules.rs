//! Collider orientation and the FCI orientation rules (R1–R4, R8–R10, and the
//! selection-bias rules R5–R7 when enabled).
//!
//! Rules only ever turn circles into arrows or tails. Each rule sweeps nodes
//! in ascending order; after any change the sweep restarts from R1, so the
//! result is deterministic for a given skeleton and sepset contents.

use super::{Mark, Pag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrientationConfig {
    /// Enables R5–R7. Off by default: the attention world model has no
    /// selection variables.
    pub selection_bias: bool,
}

fn set_if_circle(g: &mut Pag, node: usize, other: usize, mark: Mark) -> bool {
    if g.mark_at(node, other) == Some(Mark::Circle) {
        g.set_mark(node, other, mark);
        true
    } else {
        false
    }
}

/// For every unshielded triple `i *–* k *–* j` whose middle node is absent
/// from the recorded sepset of `(i, j)`, puts arrowheads at `k`.
pub fn orient_v_structures(g: &mut Pag) {
    let n = g.n();
    for k in 0..n {
        let nb: Vec<usize> = g.neighbors(k).collect();
        for (x, &i) in nb.iter().enumerate() {
            for &j in &nb[x + 1..] {
                if g.is_adjacent(i, j) {
                    continue;
                }
                let Some(sep) = g.sepset(i, j) else { continue };
                if sep.contains(&k) {
                    continue;
                }
                set_if_circle(g, k, i, Mark::Arrow);
                set_if_circle(g, k, j, Mark::Arrow);
            }
        }
    }
}

/// Applies the orientation rules until no rule changes a mark.
pub fn apply_fci_rules(g: &mut Pag, cfg: &OrientationConfig) {
    loop {
        let changed = rule1(g)
            || rule2(g)
            || rule3(g)
            || rule4(g)
            || (cfg.selection_bias && (rule5(g) || rule6(g) || rule7(g)))
            || rule8(g)
            || rule9(g)
            || rule10(g);
        if !changed {
            break;
        }
    }
}

/// Resets all marks, re-derives colliders from the sepsets and closes under
/// the rules.
pub fn orient(g: &mut Pag, cfg: &OrientationConfig) {
    g.reset_marks();
    orient_v_structures(g);
    apply_fci_rules(g, cfg);
}

/// R1: `α *→ β o–* γ`, α and γ nonadjacent ⇒ `β → γ`.
fn rule1(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        for alpha in 0..n {
            if g.mark_at(beta, alpha) != Some(Mark::Arrow) {
                continue;
            }
            for gamma in 0..n {
                if gamma == alpha
                    || g.mark_at(beta, gamma) != Some(Mark::Circle)
                    || g.is_adjacent(alpha, gamma)
                {
                    continue;
                }
                g.set_mark(beta, gamma, Mark::Tail);
                set_if_circle(g, gamma, beta, Mark::Arrow);
                changed = true;
            }
        }
    }
    changed
}

/// R2: `α → β *→ γ` or `α *→ β → γ`, with `α *–o γ` ⇒ `α *→ γ`.
fn rule2(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for alpha in 0..n {
        for gamma in 0..n {
            if g.mark_at(gamma, alpha) != Some(Mark::Circle) {
                continue;
            }
            let fires = (0..n).any(|beta| {
                if beta == alpha || beta == gamma || !g.is_adjacent(alpha, beta) || !g.is_adjacent(beta, gamma) {
                    return false;
                }
                let into_beta = g.mark_at(beta, alpha) == Some(Mark::Arrow);
                let into_gamma = g.mark_at(gamma, beta) == Some(Mark::Arrow);
                let tail_alpha = g.mark_at(alpha, beta) == Some(Mark::Tail);
                let tail_beta = g.mark_at(beta, gamma) == Some(Mark::Tail);
                into_beta && into_gamma && (tail_alpha || tail_beta)
            });
            if fires {
                g.set_mark(gamma, alpha, Mark::Arrow);
                changed = true;
            }
        }
    }
    changed
}

/// R3: `α *→ β ←* γ`, `α *–o θ o–* γ`, α and γ nonadjacent, `θ *–o β` ⇒ `θ *→ β`.
fn rule3(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        for theta in 0..n {
            if g.mark_at(beta, theta) != Some(Mark::Circle) {
                continue;
            }
            let parents: Vec<usize> = (0..n)
                .filter(|&a| {
                    a != theta
                        && g.mark_at(beta, a) == Some(Mark::Arrow)
                        && g.mark_at(theta, a) == Some(Mark::Circle)
                })
                .collect();
            let fires = parents.iter().enumerate().any(|(x, &alpha)| {
                parents[x + 1..]
                    .iter()
                    .any(|&gamma| !g.is_adjacent(alpha, gamma))
            });
            if fires {
                g.set_mark(beta, theta, Mark::Arrow);
                changed = true;
            }
        }
    }
    changed
}

/// Searches a discriminating path `⟨θ, …, α, β, γ⟩` for `β` and returns
/// `(θ, α)`.
///
/// Every node strictly between θ and β must be a collider on the path and a
/// parent of γ; θ must not be adjacent to γ. Breadth-first, so the shortest
/// such path is found; the search is exhaustive over simple paths.
fn discriminating_path(g: &Pag, beta: usize, gamma: usize) -> Option<(usize, usize)> {
    let n = g.n();
    let parent_of_gamma =
        |v: usize| g.mark_at(v, gamma) == Some(Mark::Tail) && g.mark_at(gamma, v) == Some(Mark::Arrow);
    let mut visited = vec![false; n];
    visited[beta] = true;
    visited[gamma] = true;
    // (node, the α through which it was reached)
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    for alpha in g.neighbors(beta) {
        if alpha != gamma && g.mark_at(alpha, beta) == Some(Mark::Arrow) && parent_of_gamma(alpha) {
            visited[alpha] = true;
            frontier.push((alpha, alpha));
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &(cur, alpha) in &frontier {
            for w in g.neighbors(cur) {
                if visited[w] || g.mark_at(cur, w) != Some(Mark::Arrow) {
                    continue;
                }
                if !g.is_adjacent(w, gamma) {
                    return Some((w, alpha));
                }
                if parent_of_gamma(w) && g.mark_at(w, cur) == Some(Mark::Arrow) {
                    visited[w] = true;
                    next.push((w, alpha));
                }
            }
        }
        frontier = next;
    }
    None
}

/// R4: discriminating path for β with `β o–* γ`.
fn rule4(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        for gamma in 0..n {
            if g.mark_at(beta, gamma) != Some(Mark::Circle) {
                continue;
            }
            let Some((theta, alpha)) = discriminating_path(g, beta, gamma) else { continue };
            let Some(sep) = g.sepset(theta, gamma) else { continue };
            if sep.contains(&beta) {
                g.set_mark(beta, gamma, Mark::Tail);
                set_if_circle(g, gamma, beta, Mark::Arrow);
            } else {
                g.set_mark(beta, gamma, Mark::Arrow);
                set_if_circle(g, gamma, beta, Mark::Arrow);
                set_if_circle(g, beta, alpha, Mark::Arrow);
            }
            changed = true;
        }
    }
    changed
}

fn is_circle_edge(g: &Pag, a: usize, b: usize) -> bool {
    g.mark_at(a, b) == Some(Mark::Circle) && g.mark_at(b, a) == Some(Mark::Circle)
}

/// Uncovered circle path `⟨β, α, …, θ, γ⟩` with α, γ nonadjacent and β, θ
/// nonadjacent.
fn uncovered_circle_path(g: &Pag, beta: usize, gamma: usize) -> Option<Vec<usize>> {
    fn dfs(g: &Pag, path: &mut Vec<usize>, beta: usize, gamma: usize) -> bool {
        let cur = *path.last().unwrap();
        let prev = path[path.len() - 2];
        for next in g.neighbors(cur) {
            if path.contains(&next) || !is_circle_edge(g, cur, next) || g.is_adjacent(prev, next) {
                continue;
            }
            if next == gamma {
                // θ = cur must not be adjacent to β
                if path.len() >= 3 && !g.is_adjacent(beta, cur) {
                    path.push(next);
                    return true;
                }
                continue;
            }
            path.push(next);
            if dfs(g, path, beta, gamma) {
                return true;
            }
            path.pop();
        }
        false
    }
    for alpha in g.neighbors(beta) {
        if alpha == gamma || !is_circle_edge(g, beta, alpha) || g.is_adjacent(alpha, gamma) {
            continue;
        }
        let mut path = vec![beta, alpha];
        if dfs(g, &mut path, beta, gamma) {
            return Some(path);
        }
    }
    None
}

/// R5: `β o–o γ` closing an uncovered circle path ⇒ every edge undirected.
fn rule5(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        for gamma in beta + 1..n {
            if !g.is_adjacent(beta, gamma) || !is_circle_edge(g, beta, gamma) {
                continue;
            }
            if let Some(path) = uncovered_circle_path(g, beta, gamma) {
                g.set_mark(beta, gamma, Mark::Tail);
                g.set_mark(gamma, beta, Mark::Tail);
                for w in path.windows(2) {
                    g.set_mark(w[0], w[1], Mark::Tail);
                    g.set_mark(w[1], w[0], Mark::Tail);
                }
                changed = true;
            }
        }
    }
    changed
}

/// R6: `α - β o–* γ` ⇒ `β -* γ`.
fn rule6(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        let undirected = (0..n).any(|a| {
            g.mark_at(a, beta) == Some(Mark::Tail) && g.mark_at(beta, a) == Some(Mark::Tail)
        });
        if !undirected {
            continue;
        }
        for gamma in 0..n {
            if set_if_circle(g, beta, gamma, Mark::Tail) {
                changed = true;
            }
        }
    }
    changed
}

/// R7: `α -o β o–* γ`, α and γ nonadjacent ⇒ `β -* γ`.
fn rule7(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for beta in 0..n {
        for alpha in 0..n {
            if g.mark_at(alpha, beta) != Some(Mark::Tail) || g.mark_at(beta, alpha) != Some(Mark::Circle) {
                continue;
            }
            for gamma in 0..n {
                if gamma != alpha
                    && !g.is_adjacent(alpha, gamma)
                    && set_if_circle(g, beta, gamma, Mark::Tail)
                {
                    changed = true;
                }
            }
        }
    }
    changed
}

/// `α o→ γ`.
fn is_circle_arrow(g: &Pag, alpha: usize, gamma: usize) -> bool {
    g.mark_at(alpha, gamma) == Some(Mark::Circle) && g.mark_at(gamma, alpha) == Some(Mark::Arrow)
}

/// R8: `α → β → γ` or `α -o β → γ`, with `α o→ γ` ⇒ `α → γ`.
fn rule8(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for alpha in 0..n {
        for gamma in 0..n {
            if !is_circle_arrow(g, alpha, gamma) {
                continue;
            }
            let fires = (0..n).any(|beta| {
                beta != alpha
                    && beta != gamma
                    && g.mark_at(alpha, beta) == Some(Mark::Tail)
                    && matches!(g.mark_at(beta, alpha), Some(Mark::Arrow | Mark::Circle))
                    && g.is_directed(beta, gamma)
            });
            if fires {
                g.set_mark(alpha, gamma, Mark::Tail);
                changed = true;
            }
        }
    }
    changed
}

/// Edge `u – v` could be oriented `u → v` in some member of the class.
fn potentially_directed(g: &Pag, u: usize, v: usize) -> bool {
    matches!(g.mark_at(u, v), Some(Mark::Circle | Mark::Tail))
        && matches!(g.mark_at(v, u), Some(Mark::Circle | Mark::Arrow))
}

/// Uncovered potentially directed path `⟨start, first, …, target⟩`.
fn uncovered_pd_path(g: &Pag, start: usize, first: usize, target: usize) -> bool {
    fn dfs(g: &Pag, path: &mut Vec<usize>, target: usize) -> bool {
        let cur = *path.last().unwrap();
        if cur == target {
            return true;
        }
        let prev = path[path.len() - 2];
        for next in g.neighbors(cur) {
            if path.contains(&next) || g.is_adjacent(prev, next) || !potentially_directed(g, cur, next) {
                continue;
            }
            path.push(next);
            if dfs(g, path, target) {
                return true;
            }
            path.pop();
        }
        false
    }
    if !potentially_directed(g, start, first) {
        return false;
    }
    let mut path = vec![start, first];
    dfs(g, &mut path, target)
}

/// R9: `α o→ γ` and an uncovered p.d. path `⟨α, β, θ, …, γ⟩` with β, γ
/// nonadjacent ⇒ `α → γ`.
fn rule9(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for alpha in 0..n {
        for gamma in 0..n {
            if !is_circle_arrow(g, alpha, gamma) {
                continue;
            }
            let fires = g
                .neighbors(alpha)
                .filter(|&b| b != gamma && !g.is_adjacent(b, gamma))
                .any(|beta| uncovered_pd_path(g, alpha, beta, gamma));
            if fires {
                g.set_mark(alpha, gamma, Mark::Tail);
                changed = true;
            }
        }
    }
    changed
}

/// R10: `α o→ γ`, `β → γ ← θ`, uncovered p.d. paths from α to β and to θ
/// leaving α through distinct nonadjacent nodes μ and ω ⇒ `α → γ`.
fn rule10(g: &mut Pag) -> bool {
    let n = g.n();
    let mut changed = false;
    for alpha in 0..n {
        for gamma in 0..n {
            if !is_circle_arrow(g, alpha, gamma) {
                continue;
            }
            let parents: Vec<usize> = (0..n)
                .filter(|&v| v != alpha && g.is_directed(v, gamma))
                .collect();
            if parents.len() < 2 {
                continue;
            }
            let firsts: Vec<usize> = g
                .neighbors(alpha)
                .filter(|&m| m != gamma && potentially_directed(g, alpha, m))
                .collect();
            let mut fires = false;
            'search: for (x, &beta) in parents.iter().enumerate() {
                for &theta in &parents[x + 1..] {
                    for &mu in &firsts {
                        if !uncovered_pd_path(g, alpha, mu, beta) {
                            continue;
                        }
                        for &omega in &firsts {
                            if omega != mu
                                && !g.is_adjacent(mu, omega)
                                && uncovered_pd_path(g, alpha, omega, theta)
                            {
                                fires = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if fires {
                g.set_mark(alpha, gamma, Mark::Tail);
                changed = true;
            }
        }
    }
    changed
}
