//! Independent oracles, kept separate from the constructions they check.

use crate::error::{Error, Result};
use crate::error_reduction::SegmentTable;
use crate::generators::Generator;
use crate::matrix::{MatrixAlgebra, StochMatrix};
use crate::randomness::Expander;
use crate::robp::Robp;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Block `(0, n)` of `Σ_{i=0}^{m} (I − B M)^i B`, where `M = I − A` has the
/// steps `A_1..A_n` on the block superdiagonal and `B` is block upper
/// triangular with `B_{i,i} = I`.
pub fn block_richardson(steps: &[StochMatrix], table: &SegmentTable<StochMatrix>, m: usize) -> Result<StochMatrix> {
    let n = steps.len();
    let w = table.w();
    let big = (n + 1) * w;
    let mut mm = DMatrix::<f64>::identity(big, big);
    for (i, a) in steps.iter().enumerate() {
        for r in 0..w {
            for c in 0..w {
                mm[(i * w + r, (i + 1) * w + c)] = -a.get(r, c);
            }
        }
    }
    let mut b = DMatrix::<f64>::zeros(big, big);
    for i in 0..=n {
        for j in i..=n {
            let bij = table.get(i, j)?;
            for r in 0..w {
                for c in 0..w {
                    b[(i * w + r, j * w + c)] = bij.get(r, c);
                }
            }
        }
    }
    let e = DMatrix::<f64>::identity(big, big) - &b * &mm;
    let mut term = b.clone();
    let mut acc = b.clone();
    for _ in 0..m {
        term = &e * &term;
        acc += &term;
    }
    Ok(StochMatrix::from_fn(w, |r, c| acc[(r, n * w + c)]))
}

/// `M^{(k)}_{l…r}` evaluated directly by the binary-splitting recursion.
pub fn binary_splitting_direct<M: MatrixAlgebra>(steps: &[M], table: &SegmentTable<M>, l: usize, r: usize, k: usize) -> Result<M> {
    if r == l + 1 {
        return Ok(steps[l].clone());
    }
    if k == 0 {
        return table.get(l, r);
    }
    let m = (l + r) / 2;
    let w = table.w();
    let mut acc = M::zeros(w);
    for i in 0..=k {
        let p = binary_splitting_direct(steps, table, l, m, i)?.mul(&binary_splitting_direct(steps, table, m, r, k - i)?);
        acc.add_signed(&p, 1);
    }
    for i in 0..k {
        let p = binary_splitting_direct(steps, table, l, m, i)?.mul(&binary_splitting_direct(steps, table, m, r, k - 1 - i)?);
        acc.add_signed(&p, -1);
    }
    Ok(acc)
}

fn psd_pinv_sqrt(a: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    // returns (A^{+1/2}, projector onto the null space)
    let n = a.nrows();
    let e = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let mut root = DMatrix::zeros(n, n);
    let mut null = DMatrix::zeros(n, n);
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        let v = e.eigenvectors.column(i);
        if l > tol {
            root += (v * v.transpose()) / l.sqrt();
        } else {
            null += v * v.transpose();
        }
    }
    (root, null)
}

/// Closed form `ε = 2 ‖Q^{+1/2} Δ P^{+1/2}‖₂` with `P = I − WᵀW`,
/// `Q = I − WWᵀ`; infinite when `Δ` reaches the null space of `P` or `Q`.
pub fn sv_closed_form(wt: &StochMatrix, w: &StochMatrix) -> Result<f64> {
    if wt.order() != w.order() {
        return Err(Error::Dimension(format!("{} vs {}", wt.order(), w.order())));
    }
    let wm = w.as_dmatrix();
    let n = wm.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let p = &id - wm.transpose() * wm;
    let q = &id - wm * wm.transpose();
    let delta = wt.as_dmatrix() - wm;
    let (pr, pn) = psd_pinv_sqrt(&p, 1e-9);
    let (qr, qn) = psd_pinv_sqrt(&q, 1e-9);
    if (&delta * &pn).amax() > 1e-8 || (qn * &delta).amax() > 1e-8 {
        return Ok(f64::INFINITY);
    }
    let core = qr * delta * pr;
    Ok(2.0 * core.singular_values().iter().cloned().fold(0.0, f64::max))
}

/// Lower bound on the sv error of 2×2 matrices by a grid over unit vectors:
/// for fixed directions the best scaling gives `2|yᵀΔx| / sqrt(xᵀPx · yᵀQy)`.
pub fn sv_grid_2x2(wt: &StochMatrix, w: &StochMatrix, steps: usize) -> f64 {
    let wm = w.as_dmatrix();
    let id = DMatrix::<f64>::identity(2, 2);
    let p = &id - wm.transpose() * wm;
    let q = &id - wm * wm.transpose();
    let delta = wt.as_dmatrix() - wm;
    let mut best = 0.0f64;
    for a in 0..steps {
        let ta = std::f64::consts::PI * a as f64 / steps as f64;
        let x = DVector::from_vec(vec![ta.cos(), ta.sin()]);
        for b in 0..steps {
            let tb = std::f64::consts::PI * b as f64 / steps as f64;
            let y = DVector::from_vec(vec![tb.cos(), tb.sin()]);
            let num = (y.transpose() * &delta * &x)[(0, 0)].abs();
            let den = ((x.transpose() * &p * &x)[(0, 0)] * (y.transpose() * &q * &y)[(0, 0)]).sqrt();
            if num > 1e-14 {
                best = best.max(if den > 1e-14 { 2.0 * num / den } else { f64::INFINITY });
            }
        }
    }
    best
}

/// `λ(H)` by power iteration on `(W − J)ᵀ(W − J)`, using only the rotation map.
pub fn lambda_power_iteration(h: &Expander, iters: usize) -> f64 {
    let d = h.vertices() as usize;
    let c = h.degree();
    let apply = |v: &[f64], transpose: bool| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / d as f64;
        let mut out = vec![0.0; d];
        for u in 0..d {
            for i in 0..c {
                let z = h.neighbor(u as u64, i) as usize;
                if transpose {
                    out[u] += (v[z] - mean) / c as f64;
                } else {
                    out[z] += (v[u] - mean) / c as f64;
                }
            }
        }
        out
    };
    // deterministic start vector orthogonal to nothing in particular
    let mut v: Vec<f64> = (0..d).map(|i| ((i * 7919 + 13) % 101) as f64 / 101.0 - 0.5).collect();
    let mut est = 0.0;
    for _ in 0..iters {
        let m = v.iter().sum::<f64>() / d as f64;
        v.iter_mut().for_each(|x| *x -= m);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let wv = apply(&v, false);
        est = wv.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = apply(&wv, true);
    }
    est
}

/// `E_seed 1[f(G(seed)) accepts]` by running the program on every seed.
pub fn brute_generator_expectation<G: Generator + ?Sized>(g: &G, f: &Robp, cap_bits: u32) -> Result<f64> {
    let bits = g.seed_bits();
    if bits > cap_bits {
        return Err(Error::CapExceeded { bits, cap: cap_bits });
    }
    let f = f.pad_identity(g.out_len().max(f.n()))?;
    let mut hits = 0u64;
    for seed in 0..1u64 << bits {
        if f.evaluate(&g.eval(seed))? {
            hits += 1;
        }
    }
    Ok(hits as f64 / (1u64 << bits) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sv_approx_error;
    use crate::randomness::lambda_measure;

    #[test]
    fn closed_form_matches_bisection() {
        let w = StochMatrix::from_rows(&[vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        let wt = StochMatrix::from_rows(&[vec![0.65, 0.35], vec![0.35, 0.65]]).unwrap();
        let a = sv_closed_form(&wt, &w).unwrap();
        let b = sv_approx_error(&wt, &w).unwrap();
        assert!((a - b).abs() <= 1e-5 * a.max(1e-3), "{a} vs {b}");
        let g = sv_grid_2x2(&wt, &w, 360);
        assert!(g <= a + 1e-9 && g >= 0.99 * a);
    }

    #[test]
    fn power_iteration_matches_eigensolver() {
        for h in [Expander::mgg(4), Expander::mgg(3).tensor_k2(), Expander::complete(8)] {
            let a = lambda_power_iteration(&h, 500);
            let b = lambda_measure(&h).unwrap();
            assert!((a - b).abs() < 1e-6, "{h:?}: {a} vs {b}");
        }
    }
}
