//! Linear-algebra services: stationary vectors of finite generators and
//! stochastic matrices, linear solves, and the invertibility machinery for
//! matrices that are dominant on the working states and balanced on the
//! blocking states.
//!
//! Stationary solves use subtraction-free state elimination (GTH style)
//! instead of a generic LU: generator matrices at near-degenerate parameters
//! lose accuracy under cancellation, while censoring only ever adds
//! nonnegative terms.

mod mat;

pub use mat::Mat;

use thiserror::Error;

/// Residual tolerance for solves and self-checks.
pub const EPS_RES: f64 = 1e-10;
/// Tolerance for stochastic / generator row-sum checks on parsed input.
pub const EPS_STOCH: f64 = 1e-9;

/// Relative threshold under which a matrix entry is treated as structurally
/// zero when building support graphs.
const SUPPORT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix has {0} closed communicating classes; stationary vector is not unique")]
    MultipleClosedClasses(usize),
    #[error("matrix is singular (rank deficiency detected at pivot {0})")]
    Singular(usize),
    #[error("matrix is not square")]
    NotSquare,
}

/// Directed graph on the index set of a matrix, with an edge `k -> m`
/// wherever the examined off-diagonal entry is (structurally) nonzero.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    /// Graph of the off-diagonal support of `m`. Entries with absolute value
    /// below `SUPPORT_REL_TOL * max|m|` are treated as zero.
    pub fn from_matrix(m: &Mat) -> Self {
        let n = m.n_rows();
        let tol = support_tol(m);
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && m[(i, j)].abs() > tol {
                    adj[i].push(j);
                }
            }
        }
        FlowGraph { adj }
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Vertices from which no vertex of `targets` is reachable
    /// (a vertex in `targets` trivially reaches it).
    pub fn unreachable_from(&self, targets: &[bool]) -> Vec<usize> {
        let n = self.adj.len();
        // reverse reachability from the target set
        let mut radj = vec![Vec::new(); n];
        for (v, succs) in self.adj.iter().enumerate() {
            for &w in succs {
                radj[w].push(v);
            }
        }
        let mut reach = targets.to_vec();
        let mut stack: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
        while let Some(v) = stack.pop() {
            for &u in &radj[v] {
                if !reach[u] {
                    reach[u] = true;
                    stack.push(u);
                }
            }
        }
        (0..n).filter(|&v| !reach[v]).collect()
    }
}

fn support_tol(m: &Mat) -> f64 {
    (SUPPORT_REL_TOL * m.max_abs()).max(f64::MIN_POSITIVE)
}

/// Strongly connected components (Tarjan, iterative), in reverse
/// topological order of the condensation.
pub fn strongly_connected_components(graph: &FlowGraph) -> Vec<Vec<usize>> {
    let n = graph.n_vertices();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut next_index = 0usize;

    // explicit work stack: (vertex, next successor position)
    let mut work: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let succs = graph.successors(v);
            if *pos < succs.len() {
                let w = succs[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
                work.pop();
                if let Some(&mut (parent, _)) = work.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    comps
}

/// Classes of the off-diagonal support of `m` that have no edge leaving them.
pub fn closed_classes(m: &Mat) -> Vec<Vec<usize>> {
    let graph = FlowGraph::from_matrix(m);
    let comps = strongly_connected_components(&graph);
    let n = graph.n_vertices();
    let mut comp_of = vec![0usize; n];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|&v| graph.successors(v).iter().all(|&w| comp_of[w] == *c))
        })
        .map(|(_, comp)| comp.clone())
        .collect()
}

/// Subtraction-free stationary vector on an irreducible index set.
///
/// Only the off-diagonal entries of `a` are read, so the same routine serves
/// generators (rates) and stochastic matrices (jump probabilities): the
/// stationary equation ignores the diagonal in both cases once row sums are
/// fixed. States are censored from the back; censoring adds the detour mass
/// `a[i][k] * a[k][j] / out_k`, which involves no cancellation.
fn gth_on_class(mut a: Mat) -> Result<Vec<f64>, NumericsError> {
    let n = a.n_rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out_rate = vec![0.0; n];
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if s <= 0.0 {
            // no flow from state k back into the remaining states:
            // the class was not irreducible after all
            return Err(NumericsError::Singular(k));
        }
        out_rate[k] = s;
        for i in 0..k {
            let f = a[(i, k)];
            if f == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    let add = f * a[(k, j)] / s;
                    a[(i, j)] += add;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    for k in 1..n {
        let inflow: f64 = (0..k).map(|i| x[i] * a[(i, k)]).sum();
        x[k] = inflow / out_rate[k];
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    Ok(x)
}

/// Stationary probability vector of a finite generator matrix.
///
/// Requires a unique closed communicating class on the positive-entry
/// support; the result is strictly positive there and exactly zero on the
/// transient states, normalized to sum 1.
pub fn stationary_of_generator(g: &Mat) -> Result<Vec<f64>, NumericsError> {
    if !g.is_square() {
        return Err(NumericsError::NotSquare);
    }
    stationary_from_offdiag(g)
}

/// Stationary probability vector of a row-stochastic matrix, supported on its
/// unique closed class. Self-loops are irrelevant for stationarity and are
/// ignored along with the rest of the diagonal.
pub fn stationary_of_stochastic(p: &Mat) -> Result<Vec<f64>, NumericsError> {
    if !p.is_square() {
        return Err(NumericsError::NotSquare);
    }
    stationary_from_offdiag(p)
}

fn stationary_from_offdiag(m: &Mat) -> Result<Vec<f64>, NumericsError> {
    let n = m.n_rows();
    let classes = closed_classes(m);
    if classes.len() != 1 {
        return Err(NumericsError::MultipleClosedClasses(classes.len()));
    }
    let class = &classes[0];
    let sub = m.submatrix(class, class);
    let pi_sub = gth_on_class(sub)?;
    let mut pi = vec![0.0; n];
    for (local, &global) in class.iter().enumerate() {
        pi[global] = pi_sub[local];
    }
    Ok(pi)
}

/// Outcome of the invertibility check for matrices that are balanced on the
/// blocking index set and strictly dominant on the working one.
#[derive(Debug, Clone, PartialEq)]
pub enum InvertibilityVerdict {
    /// All hypotheses hold; the matrix is invertible.
    InvertibleCertified,
    /// The flow condition fails: the witness subset of blocking indices has
    /// no (structural) outflow to its complement.
    FlowViolated { witness: Vec<usize> },
    /// A diagonal-dominance hypothesis fails; nothing is certified.
    HypothesesUnmet { reason: String },
}

/// Certify invertibility of `m` from row dominance plus a flow condition.
///
/// Hypotheses checked, with `working[k]` marking the working indices:
/// * `|m_kk| = sum_{j != k} |m_kj|` on blocking rows (within `EPS_STOCH`),
/// * `|m_kk| > sum_{j != k} |m_kj|` strictly on working rows,
/// * from every blocking index some working index is reachable along
///   nonzero entries of `m`.
pub fn check_flow_invertible(m: &Mat, working: &[bool]) -> InvertibilityVerdict {
    if !m.is_square() || m.n_rows() != working.len() {
        return InvertibilityVerdict::HypothesesUnmet {
            reason: "dimension mismatch".to_string(),
        };
    }
    let n = m.n_rows();
    if !working.iter().any(|&w| w) {
        return InvertibilityVerdict::HypothesesUnmet {
            reason: "working index set is empty".to_string(),
        };
    }
    for k in 0..n {
        let diag = m[(k, k)].abs();
        let off: f64 = (0..n).filter(|&j| j != k).map(|j| m[(k, j)].abs()).sum();
        let scale = diag.max(off).max(1.0);
        if working[k] {
            if diag - off <= EPS_STOCH * scale {
                return InvertibilityVerdict::HypothesesUnmet {
                    reason: format!(
                        "row {k} (working): |diagonal| {diag} does not strictly dominate off-row sum {off}"
                    ),
                };
            }
        } else if (diag - off).abs() > EPS_STOCH * scale {
            return InvertibilityVerdict::HypothesesUnmet {
                reason: format!(
                    "row {k} (blocking): |diagonal| {diag} does not equal off-row sum {off}"
                ),
            };
        }
    }
    let graph = FlowGraph::from_matrix(m);
    let witness: Vec<usize> = graph
        .unreachable_from(working)
        .into_iter()
        .filter(|&v| !working[v])
        .collect();
    if witness.is_empty() {
        InvertibilityVerdict::InvertibleCertified
    } else {
        InvertibilityVerdict::FlowViolated { witness }
    }
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare);
    }
    let n = a.n_rows();
    assert_eq!(b.len(), n);
    let mut lu = a.clone();
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = lu.max_abs().max(1.0);
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, lu[(perm[r], col)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pivot_abs <= 1e-14 * scale {
            return Err(NumericsError::Singular(col));
        }
        perm.swap(col, pivot_row);
        let p = perm[col];
        for r in (col + 1)..n {
            let row = perm[r];
            let f = lu[(row, col)] / lu[(p, col)];
            if f == 0.0 {
                continue;
            }
            lu[(row, col)] = 0.0;
            for j in (col + 1)..n {
                let v = lu[(p, j)];
                lu[(row, j)] -= f * v;
            }
            x[row] -= f * x[p];
        }
    }
    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let p = perm[col];
        let mut v = x[p];
        for j in (col + 1)..n {
            v -= lu[(p, j)] * out[j];
        }
        out[col] = v / lu[(p, col)];
    }
    Ok(out)
}

/// Full inverse via column-wise solves. Fine at the sizes used here.
pub fn inverse(a: &Mat) -> Result<Mat, NumericsError> {
    let n = a.n_rows();
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solve_linear(a, &e)?;
        e[j] = 0.0;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Orthonormal-ish basis of the right null space `{x : A x = 0}` via Gaussian
/// elimination with partial pivoting. `A` may be rectangular.
pub fn null_space(a: &Mat, tol: f64) -> Vec<Vec<f64>> {
    let m = a.n_rows();
    let n = a.n_cols();
    let mut r = a.clone();
    let scale = r.max_abs().max(1.0);
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        if row >= m {
            break;
        }
        let (pr, pa) = (row..m)
            .map(|i| (i, r[(i, col)].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pa <= tol * scale {
            continue;
        }
        // swap rows
        if pr != row {
            for j in 0..n {
                let t = r[(row, j)];
                r[(row, j)] = r[(pr, j)];
                r[(pr, j)] = t;
            }
        }
        let piv = r[(row, col)];
        for j in 0..n {
            r[(row, j)] /= piv;
        }
        for i in 0..m {
            if i != row {
                let f = r[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        let v = r[(row, j)];
                        r[(i, j)] -= f * v;
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let pivot_row_of_col: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (i, &c) in pivot_cols.iter().enumerate() {
            v[c] = Some(i);
        }
        v
    };
    let mut basis = Vec::new();
    for free in 0..n {
        if pivot_row_of_col[free].is_some() {
            continue;
        }
        let mut x = vec![0.0; n];
        x[free] = 1.0;
        for (j, pr) in pivot_row_of_col.iter().enumerate() {
            if let Some(i) = pr {
                x[j] = -r[(*i, free)];
            }
        }
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut x {
            *v /= norm;
        }
        basis.push(x);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn stationary_symmetric_two_state() {
        let nu = 0.37;
        let g = Mat::from_rows(&[vec![-nu, nu], vec![nu, -nu]]);
        let pi = stationary_of_generator(&g).unwrap();
        assert!(approx_eq(&pi, &[0.5, 0.5], 1e-14));
    }

    #[test]
    fn stationary_two_state_routing() {
        // reduced generator of a two-state working environment with routing
        // probabilities c and d and no autonomous transitions
        let (c, d) = (0.3, 0.8);
        let lam = 1.7;
        let g = Mat::from_rows(&[vec![-lam * c, lam * c], vec![lam * d, -lam * d]]);
        let pi = stationary_of_generator(&g).unwrap();
        assert!(approx_eq(&pi, &[d / (c + d), c / (c + d)], 1e-14));
    }

    #[test]
    fn stationary_three_state_replenishment() {
        // 3x3 reduced generator with one blocking state and refill rate nu:
        // stationary vector proportional to (lam/nu, 1, (lam+nu)/lam)
        let (lam, nu) = (1.3, 2.1);
        let g = Mat::from_rows(&[
            vec![-nu, 0.0, nu],
            vec![lam, -(lam + nu), nu],
            vec![0.0, lam, -lam],
        ]);
        let pi = stationary_of_generator(&g).unwrap();
        let mut expect = [lam / nu, 1.0, (lam + nu) / lam];
        let tot: f64 = expect.iter().sum();
        expect.iter_mut().for_each(|x| *x /= tot);
        assert!(approx_eq(&pi, &expect, 1e-13));
        let res = g.left_mul(&pi);
        assert!(res.iter().all(|r| r.abs() <= EPS_RES));
    }

    #[test]
    fn stationary_zeros_on_transient_states() {
        // state 2 drains into the closed class {0, 1}
        let g = Mat::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![1.0, -1.0, 0.0],
            vec![0.5, 0.0, -0.5],
        ]);
        let pi = stationary_of_generator(&g).unwrap();
        assert!(approx_eq(&pi, &[0.5, 0.5, 0.0], 1e-14));
    }

    #[test]
    fn stochastic_identity_has_many_classes() {
        let p = Mat::identity(2);
        match stationary_of_stochastic(&p) {
            Err(NumericsError::MultipleClosedClasses(2)) => {}
            other => panic!("expected MultipleClosedClasses(2), got {other:?}"),
        }
    }

    #[test]
    fn stochastic_cycle_is_uniform() {
        let s = 5;
        let mut p = Mat::zeros(s, s);
        for k in 0..s {
            p[(k, (k + 1) % s)] = 1.0;
        }
        let pi = stationary_of_stochastic(&p).unwrap();
        assert!(approx_eq(&pi, &[0.2; 5], 1e-14));
    }

    #[test]
    fn solve_linear_identity() {
        let a = Mat::identity(4);
        let b = vec![3.0, -1.0, 0.5, 9.0];
        let x = solve_linear(&a, &b).unwrap();
        assert!(approx_eq(&x, &b, 0.0));
    }

    #[test]
    fn solve_linear_residual_random() {
        // fixed "random" well-conditioned 6x6 system; residual must meet EPS_RES
        let mut a = Mat::zeros(6, 6);
        let mut s = 1u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..6 {
            for j in 0..6 {
                a[(i, j)] = next();
            }
            a[(i, i)] += 4.0;
        }
        let b: Vec<f64> = (0..6).map(|_| next()).collect();
        let x = solve_linear(&a, &b).unwrap();
        let r = a.mul_vec(&x);
        let binf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..6 {
            assert!((r[i] - b[i]).abs() <= EPS_RES * (1.0 + binf));
        }
    }

    #[test]
    fn solve_linear_detects_singular() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            solve_linear(&a, &[1.0, 2.0]),
            Err(NumericsError::Singular(_))
        ));
    }

    /// The worked example: two working states, four blocking states, with a
    /// chain of rates leading every blocking state back to the working set.
    fn flow_example(rates_on: bool) -> (Mat, Vec<bool>) {
        let lam = 1.0;
        let (v23, mut v32, v43, mut v46, v54, v63) = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        if !rates_on {
            v32 = 0.0;
            v46 = 0.0;
        }
        let m = Mat::from_rows(&[
            vec![-lam, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, -(lam + v23), v23, 0.0, 0.0, 0.0],
            vec![0.0, v32, -v32, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, v43, -(v43 + v46), 0.0, v46],
            vec![0.0, 0.0, 0.0, v54, -v54, 0.0],
            vec![0.0, 0.0, v63, 0.0, 0.0, -v63],
        ]);
        let working = vec![true, true, false, false, false, false];
        (m, working)
    }

    #[test]
    fn flow_example_certified() {
        let (m, working) = flow_example(true);
        assert_eq!(
            check_flow_invertible(&m, &working),
            InvertibilityVerdict::InvertibleCertified
        );
        // certified implies solvable
        assert!(solve_linear(&m, &[1.0; 6]).is_ok());
    }

    #[test]
    fn flow_example_violated_with_witness() {
        let (m, working) = flow_example(false);
        match check_flow_invertible(&m, &working) {
            InvertibilityVerdict::FlowViolated { witness } => {
                // the blocking states cut off from the working set
                assert_eq!(witness, vec![2, 3, 4, 5]);
                // and the matrix is indeed singular: row 2 is all zeros
                assert!(matches!(
                    solve_linear(&m, &[1.0; 6]),
                    Err(NumericsError::Singular(_))
                ));
            }
            other => panic!("expected FlowViolated, got {other:?}"),
        }
    }

    #[test]
    fn strictly_dominant_no_blocking_certified() {
        let m = Mat::from_rows(&[vec![3.0, 1.0, 1.0], vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 4.0]]);
        assert_eq!(
            check_flow_invertible(&m, &[true, true, true]),
            InvertibilityVerdict::InvertibleCertified
        );
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = Mat::from_rows(&[vec![1.0, 1.0, 1.0]]);
        let basis = null_space(&a, 1e-12);
        assert_eq!(basis.len(), 2);
        for x in &basis {
            let r: f64 = x.iter().sum();
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let inv = inverse(&a).unwrap();
        let id = a.matmul(&inv);
        assert!((id[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((id[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(id[(0, 1)].abs() < 1e-12);
        assert!(id[(1, 0)].abs() < 1e-12);
    }
}
