//! Twenty small SDPs with values known analytically or by brute force.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satisfice::sdp::{LinearForm, SdpProblem};

pub struct Golden {
    pub name: String,
    pub problem: SdpProblem,
    /// Optimal value of the problem as posed (minimization).
    pub expected: f64,
}

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

fn add_matrix(form: &mut LinearForm, block: usize, m: &DMatrix<f64>, scale: f64) {
    for j in 0..m.nrows() {
        for i in 0..=j {
            let c = if i == j { m[(i, i)] } else { 2.0 * m[(i, j)] };
            if c != 0.0 {
                form.add_entry(block, i, j, scale * c);
            }
        }
    }
}

/// `min t  s.t.  t I - A >= 0` (sign = 1) or `max t  s.t.  A - t I >= 0`
/// posed as `min -t` (sign = -1).
fn extreme_eigenvalue(a: &DMatrix<f64>, sign: f64) -> SdpProblem {
    let n = a.nrows();
    let mut p = SdpProblem::new(vec![n], 1);
    p.objective.add_free(0, sign);
    for j in 0..n {
        for i in 0..=j {
            let mut f = LinearForm::new();
            f.add_entry(0, i, j, 1.0);
            if i == j {
                f.add_free(0, -sign);
            }
            p.add_constraint(f, -sign * a[(i, j)]);
        }
    }
    p
}

/// `min -<A, X>  s.t.  tr X = k, X + Y = I, X, Y >= 0`.
fn ky_fan(a: &DMatrix<f64>, k: f64) -> SdpProblem {
    let n = a.nrows();
    let mut p = SdpProblem::new(vec![n, n], 0);
    add_matrix(&mut p.objective, 0, a, -1.0);
    let mut tr = LinearForm::new();
    for i in 0..n {
        tr.add_entry(0, i, i, 1.0);
    }
    p.add_constraint(tr, k);
    for j in 0..n {
        for i in 0..=j {
            let mut f = LinearForm::new();
            f.add_entry(0, i, j, 1.0);
            f.add_entry(1, i, j, 1.0);
            p.add_constraint(f, if i == j { 1.0 } else { 0.0 });
        }
    }
    p
}

/// Lovasz theta: `max <J, X>  s.t.  tr X = 1, X_ij = 0 on edges`.
fn theta(n: usize, edges: &[(usize, usize)]) -> SdpProblem {
    let mut p = SdpProblem::new(vec![n], 0);
    add_matrix(&mut p.objective, 0, &DMatrix::from_element(n, n, 1.0), -1.0);
    let mut tr = LinearForm::new();
    for i in 0..n {
        tr.add_entry(0, i, i, 1.0);
    }
    p.add_constraint(tr, 1.0);
    for &(i, j) in edges {
        let mut f = LinearForm::new();
        f.add_entry(0, i, j, 1.0);
        p.add_constraint(f, 0.0);
    }
    p
}

/// Max-cut relaxation `max sum_edges (1 - X_ij) / 2  s.t.  X_ii = 1`.
fn maxcut(n: usize, edges: &[(usize, usize)]) -> SdpProblem {
    let mut p = SdpProblem::new(vec![n], 0);
    p.objective_constant = -(edges.len() as f64) / 2.0;
    for &(i, j) in edges {
        p.objective.add_entry(0, i, j, 0.5);
    }
    for i in 0..n {
        let mut f = LinearForm::new();
        f.add_entry(0, i, i, 1.0);
        p.add_constraint(f, 1.0);
    }
    p
}

fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

fn complete(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

fn petersen() -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, (i + 1) % 5));
        e.push((i, i + 5));
        e.push((5 + i, 5 + (i + 2) % 5));
    }
    e
}

fn brute_independence(n: usize, edges: &[(usize, usize)]) -> f64 {
    (0u32..1 << n)
        .filter(|s| edges.iter().all(|&(i, j)| s & (1 << i) == 0 || s & (1 << j) == 0))
        .map(|s| s.count_ones())
        .max()
        .unwrap() as f64
}

fn brute_maxcut(n: usize, edges: &[(usize, usize)]) -> f64 {
    (0u32..1 << n)
        .map(|s| {
            edges
                .iter()
                .filter(|&&(i, j)| (s >> i) & 1 != (s >> j) & 1)
                .count()
        })
        .max()
        .unwrap() as f64
}

fn sorted_eigs(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn golden_suite() -> Vec<Golden> {
    let mut out = Vec::new();
    let mut push = |name: &str, problem: SdpProblem, expected: f64| {
        out.push(Golden {
            name: name.to_string(),
            problem,
            expected,
        })
    };

    for (n, seed) in [(3, 11), (4, 12), (5, 13)] {
        let a = random_symmetric(n, seed);
        push(&format!("lambda_max random {n}x{n}"), extreme_eigenvalue(&a, 1.0), sorted_eigs(&a)[0]);
    }
    for (n, seed) in [(4, 21), (6, 22)] {
        let a = random_symmetric(n, seed);
        push(&format!("lambda_min random {n}x{n}"), extreme_eigenvalue(&a, -1.0), -sorted_eigs(&a)[n - 1]);
    }
    for (n, k, seed) in [(4, 2, 31), (5, 3, 32)] {
        let a = random_symmetric(n, seed);
        let top: f64 = sorted_eigs(&a)[..k].iter().sum();
        push(&format!("ky fan top-{k} random {n}x{n}"), ky_fan(&a, k as f64), -top);
    }

    push("theta C5", theta(5, &cycle(5)), -5f64.sqrt());
    push("theta K4", theta(4, &complete(4)), -1.0);
    push("theta empty graph on 4", theta(4, &[]), -4.0);
    push("theta C4", theta(4, &cycle(4)), -2.0);
    push("theta Petersen", theta(10, &petersen()), -4.0);
    let c = (std::f64::consts::PI / 7.0).cos();
    push("theta C7", theta(7, &cycle(7)), -7.0 * c / (1.0 + c));
    let p4 = [(0, 1), (1, 2), (2, 3)];
    push("theta P4", theta(4, &p4), -brute_independence(4, &p4));
    let bull = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 4)];
    push("theta bull", theta(5, &bull), -brute_independence(5, &bull));

    push("maxcut C4", maxcut(4, &cycle(4)), -brute_maxcut(4, &cycle(4)));
    let star = [(0, 1), (0, 2), (0, 3)];
    push("maxcut star K1,3", maxcut(4, &star), -brute_maxcut(4, &star));
    push("maxcut P4", maxcut(4, &p4), -brute_maxcut(4, &p4));
    push("maxcut K4", maxcut(4, &complete(4)), -4.0);
    push("maxcut triangle plus isolated vertex", maxcut(4, &[(0, 1), (1, 2), (0, 2)]), -2.25);
    out
}
