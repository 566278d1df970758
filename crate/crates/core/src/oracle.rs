//! Slow, independently coded reference implementations used to validate the
//! production algorithms.

use crate::graph::Graph;
use crate::treemetrics::KilledRegion;

/// Chronological loop erasure by the last-visit recursion: T(0) is the last
/// visit to θ_0 and T(i) the last visit to θ_{T(i-1)+1}.
pub fn naive_loop_erase<V: PartialEq + Copy>(theta: &[V]) -> Vec<V> {
    if theta.is_empty() {
        return Vec::new();
    }
    let last_visit = |v: V| theta.iter().rposition(|&w| w == v).unwrap();
    let end = theta.len() - 1;
    let mut t = last_visit(theta[0]);
    let mut out = vec![theta[t]];
    while t < end {
        t = last_visit(theta[t + 1]);
        out.push(theta[t]);
    }
    out
}

/// First index of `path` inside `set`, by linear scan.
pub fn naive_hitting_time<V: PartialEq>(path: &[V], set: &[V]) -> Option<usize> {
    path.iter().position(|v| set.contains(v))
}

/// One step of the killed walk applied to a mass distribution.
fn push_forward(region: &KilledRegion, mass: &[f64], next: &mut [f64]) {
    next.iter_mut().for_each(|m| *m = 0.0);
    for (i, &m) in mass.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let share = m / region.degree[i] as f64;
        for &j in region.neighbors(i) {
            next[j as usize] += share;
        }
    }
}

/// Distributions P^x(X_n = ·), n = 0, 1, ..., until the live mass drops below `tol`.
pub fn killed_distributions(region: &KilledRegion, x: usize, tol: f64) -> impl Iterator<Item = Vec<f64>> + '_ {
    let mut current = vec![0.0; region.len()];
    current[x] = 1.0;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = current.clone();
        if out.iter().sum::<f64>() < tol {
            done = true;
        }
        let mut next = vec![0.0; region.len()];
        push_forward(region, &current, &mut next);
        current = next;
        Some(out)
    })
}

/// G(x, y) = Σ_n P^x(X_n = y), truncated once the live mass is below `tol`.
pub fn green_series(region: &KilledRegion, x: usize, y: usize, tol: f64) -> f64 {
    killed_distributions(region, x, tol).map(|p| p[y]).sum()
}

/// Σ_n P^x(X_{2n} = x), the even-time return series.
pub fn even_return_series(region: &KilledRegion, x: usize, tol: f64) -> f64 {
    killed_distributions(region, x, tol).step_by(2).map(|p| p[x]).sum()
}

/// Exact collision moments from the definition Z = Σ_n 1(X_n = Y_n):
/// E Z = Σ_x V(0,x) with V(0,x) = Σ_n P^0(X_n = x)², and
/// E Z² = 2 Σ_x V(0,x) E_{x,x}(Z) − E Z.
/// Quadratic in the region size; meant for small regions.
pub fn collision_moments_series(region: &KilledRegion, tol: f64) -> (f64, f64) {
    let v = pair_visits(region, 0, tol);
    let ez: f64 = v.iter().sum();
    let mut cross = 0.0;
    for (x, &vx) in v.iter().enumerate() {
        if vx > 0.0 {
            cross += vx * pair_visits(region, x, tol).iter().sum::<f64>();
        }
    }
    (ez, 2.0 * cross - ez)
}

/// V(x, ·) = Σ_n P^x(X_n = ·)².
pub fn pair_visits(region: &KilledRegion, x: usize, tol: f64) -> Vec<f64> {
    let mut v = vec![0.0; region.len()];
    for p in killed_distributions(region, x, tol) {
        for (acc, q) in v.iter_mut().zip(&p) {
            *acc += q * q;
        }
    }
    v
}

/// Expected exit time from every member, by solving the hitting equations densely.
pub fn exit_times_dense(region: &KilledRegion) -> Vec<f64> {
    let n = region.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![1.0; n];
    for i in 0..n {
        a[i][i] = 1.0;
        let p = 1.0 / region.degree[i] as f64;
        for &j in region.neighbors(i) {
            a[i][j as usize] -= p;
        }
    }
    gauss_solve(&mut a, &mut b);
    b
}

/// Effective resistance between vertex sets by dense Gaussian elimination on
/// the Dirichlet problem. Returns `None` when no current can flow.
pub fn resistance_dense(graph: &Graph, a: &[usize], b: &[usize]) -> Option<f64> {
    let n = graph.len();
    let mut fixed = vec![None; n];
    for &v in a {
        fixed[v] = Some(1.0);
    }
    for &v in b {
        fixed[v] = Some(0.0);
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let mut index = vec![usize::MAX; n];
    for (k, &v) in free.iter().enumerate() {
        index[v] = k;
    }
    let m = free.len();
    let mut mat = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (k, &v) in free.iter().enumerate() {
        mat[k][k] = graph.degree(v) as f64;
        for &w in graph.neighbors(v) {
            match fixed[w] {
                Some(val) => rhs[k] += val,
                None => mat[k][index[w]] -= 1.0,
            }
        }
        if graph.degree(v) == 0 {
            mat[k][k] = 1.0;
        }
    }
    // Vertices in components without a fixed vertex make the system singular; pin them to 0.
    let reach = graph.reachable(&a.iter().chain(b).copied().collect::<Vec<_>>(), |_| true);
    for (k, &v) in free.iter().enumerate() {
        if !reach[v] {
            mat[k].iter_mut().for_each(|x| *x = 0.0);
            mat[k][k] = 1.0;
            rhs[k] = 0.0;
        }
    }
    gauss_solve(&mut mat, &mut rhs);
    let potential = |v: usize| fixed[v].unwrap_or_else(|| rhs[index[v]]);
    let energy: f64 = graph
        .edges()
        .into_iter()
        .map(|(x, y)| (potential(x) - potential(y)).powi(2))
        .sum();
    (energy > 0.0).then(|| 1.0 / energy)
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col][k] * b[k]).sum();
        b[col] = (b[col] - s) / a[col][col];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_erasure_hand_cases() {
        assert_eq!(naive_loop_erase::<u8>(&[]), Vec::<u8>::new());
        assert_eq!(naive_loop_erase(&[0, 1, 0, 1, 2]), vec![0, 1, 2]);
        assert_eq!(naive_loop_erase(&[0, 1, 2, 1, 3]), vec![0, 1, 3]);
        assert_eq!(naive_loop_erase(&[5, 5]), vec![5]);
    }

    #[test]
    fn dense_resistance_hand_cases() {
        assert!((resistance_dense(&Graph::path(3), &[0], &[2]).unwrap() - 2.0).abs() < 1e-12);
        assert!((resistance_dense(&Graph::cycle(4), &[0], &[2]).unwrap() - 1.0).abs() < 1e-12);
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]);
        assert_eq!(resistance_dense(&g, &[0], &[3]), None);
    }

    #[test]
    fn line_tree_series() {
        let line = KilledRegion::line(1);
        assert!((green_series(&line, 0, 0, 1e-12) - 2.0).abs() < 1e-9);
        let (ez, _) = collision_moments_series(&line, 1e-14);
        assert!((ez - 2.0).abs() < 1e-9);
        let t = exit_times_dense(&line);
        assert!((t[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lone_vertex_moments() {
        let (ez, ez2) = collision_moments_series(&KilledRegion::single(3), 1e-12);
        assert_eq!((ez, ez2), (1.0, 1.0));
    }
}
