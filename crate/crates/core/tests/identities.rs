//! Randomized checks of the vec / Kronecker / unfolding identities the
//! solvers are built on. Expected values come from explicit index sums.

use lrwave::kron_linalg::{kron, matmul, unvec, vec, Factor, KronSumOperator, Tridiagonal};
use lrwave::rng::{random_cmat, random_cvec};
use lrwave::tensor::{fold, hadamard, ttm, unfold, DenseTensor, TuckerTensor};
use lrwave::{CMat, C64};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn close(a: &CMat, b: &CMat) -> bool {
    (a - b).norm() <= TOL * (1.0 + b.norm())
}

fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
    let n: usize = shape.iter().product();
    DenseTensor::from_vec(shape, random_cvec(n, seed).as_slice().to_vec()).unwrap()
}

fn random_tridiagonal(n: usize, seed: u64) -> Tridiagonal {
    let v = random_cvec(3 * n, seed);
    let s = v.as_slice();
    Tridiagonal::new(s[..n - 1].to_vec(), s[n..2 * n].to_vec(), s[2 * n..3 * n - 1].to_vec()).unwrap()
}

// Column index of entry `idx` in the mode-k unfolding: remaining indices in
// increasing mode order, earliest fastest.
fn unfold_column(shape: &[usize], idx: &[usize], k: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for (m, (&i, &n)) in idx.iter().zip(shape).enumerate() {
        if m != k {
            col += i * stride;
            stride *= n;
        }
    }
    col
}

fn shape3() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vec_of_triple_product(n in 1usize..6, m in 1usize..6, p in 1usize..6, q in 1usize..6, seed in any::<u64>()) {
        let a = random_cmat(p, n, seed);
        let x = random_cmat(n, m, seed ^ 1);
        let b = random_cmat(m, q, seed ^ 2);
        let lhs = CMat::from_column_slice(p * q, 1, vec(&(&a * &x * &b)).as_slice());
        let rhs = kron(&b.transpose(), &a) * CMat::from_column_slice(n * m, 1, vec(&x).as_slice());
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn kron_entries(p in 1usize..5, q in 1usize..5, r in 1usize..5, s in 1usize..5, seed in any::<u64>()) {
        let a = random_cmat(p, q, seed);
        let b = random_cmat(r, s, seed ^ 3);
        let k = kron(&a, &b);
        prop_assert_eq!(k.shape(), (p * r, q * s));
        for i in 0..p * r {
            for j in 0..q * s {
                let want = a[(i / r, j / s)] * b[(i % r, j % s)];
                prop_assert!((k[(i, j)] - want).norm() <= TOL * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn kron_mixed_product(n in 1usize..4, m in 1usize..4, seed in any::<u64>()) {
        let (a, c) = (random_cmat(n, n, seed), random_cmat(n, n, seed ^ 4));
        let (b, d) = (random_cmat(m, m, seed ^ 5), random_cmat(m, m, seed ^ 6));
        prop_assert!(close(&(kron(&a, &b) * kron(&c, &d)), &kron(&(&a * &c), &(&b * &d))));
    }

    #[test]
    fn vec_unvec_inverse(n in 1usize..7, m in 1usize..7, seed in any::<u64>()) {
        let x = random_cmat(n, m, seed);
        let v = vec(&x);
        for j in 0..m {
            for i in 0..n {
                prop_assert_eq!(v[i + n * j], x[(i, j)]);
            }
        }
        prop_assert_eq!(unvec(&v, n, m).unwrap(), x);
    }

    #[test]
    fn hadamard_is_diagonal_scaling(n in 1usize..6, m in 1usize..6, seed in any::<u64>()) {
        let k = random_cmat(n, m, seed);
        let x = random_cmat(n, m, seed ^ 7);
        let lhs = vec(&k.component_mul(&x));
        let rhs = CMat::from_diagonal(&vec(&k)) * vec(&x);
        prop_assert!((&lhs - &rhs).norm() <= TOL * (1.0 + rhs.norm()));
        let kt = DenseTensor::from_matrix(&k);
        let xt = DenseTensor::from_matrix(&x);
        prop_assert_eq!(hadamard(&kt, &xt).unwrap().to_matrix().unwrap(), k.component_mul(&x));
    }

    #[test]
    fn unfold_matches_index_formula(shape in shape3(), k in 0usize..3, seed in any::<u64>()) {
        let t = random_tensor(&shape, seed);
        let m = unfold(&t, k).unwrap();
        let total: usize = shape.iter().product();
        prop_assert_eq!(m.shape(), (shape[k], total / shape[k]));
        for c in 0..shape[2] {
            for b in 0..shape[1] {
                for a in 0..shape[0] {
                    let idx = [a, b, c];
                    prop_assert_eq!(m[(idx[k], unfold_column(&shape, &idx, k))], t.get(&idx));
                }
            }
        }
        prop_assert_eq!(fold(&m, k, &shape).unwrap(), t);
    }

    #[test]
    fn ttm_matches_index_sum(shape in shape3(), k in 0usize..3, p in 1usize..5, seed in any::<u64>()) {
        let t = random_tensor(&shape, seed);
        let w = random_cmat(p, shape[k], seed ^ 8);
        let y = ttm(&t, &w, k).unwrap();
        prop_assert!(close(&unfold(&y, k).unwrap(), &(&w * unfold(&t, k).unwrap())));
        let mut out = shape.clone();
        out[k] = p;
        prop_assert_eq!(y.shape(), &out[..]);
        for c in 0..out[2] {
            for b in 0..out[1] {
                for a in 0..out[0] {
                    let idx = [a, b, c];
                    let mut want = C64::new(0.0, 0.0);
                    for s in 0..shape[k] {
                        let mut src = idx;
                        src[k] = s;
                        want += w[(idx[k], s)] * t.get(&src);
                    }
                    prop_assert!((y.get(&idx) - want).norm() <= TOL * (1.0 + want.norm()));
                }
            }
        }
    }

    #[test]
    fn tucker_unfolding_factorizes(dims in shape3(), ranks in shape3(), k in 0usize..3, seed in any::<u64>()) {
        let core = random_tensor(&ranks, seed);
        let bases: Vec<CMat> = (0..3).map(|i| random_cmat(dims[i], ranks[i], seed ^ (9 + i as u64))).collect();
        let t = TuckerTensor::from_bases(core.clone(), bases.clone()).unwrap().to_dense();
        let (j, l) = match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let want = &bases[k] * unfold(&core, k).unwrap() * kron(&bases[l], &bases[j]).transpose();
        prop_assert!(close(&unfold(&t, k).unwrap(), &want));
    }

    #[test]
    fn kron_sum_apply_matches_assembly(n in 2usize..5, m in 2usize..5, seed in any::<u64>()) {
        let dx = random_tridiagonal(n, seed);
        let dy = random_tridiagonal(m, seed ^ 10);
        let k = random_cmat(n, m, seed ^ 11);
        let mut op = KronSumOperator::new(vec![n, m]);
        op.add_pair(Factor::Identity(m), Factor::Tridiagonal(dx.clone())).unwrap();
        op.add_pair(Factor::Tridiagonal(dy.clone()), Factor::Identity(n)).unwrap();
        op.add_diagonal(&vec(&k)).unwrap();
        let explicit = kron(&CMat::identity(m, m), &dx.to_dense())
            + kron(&dy.to_dense(), &CMat::identity(n, n))
            + CMat::from_diagonal(&vec(&k));
        prop_assert!(close(&op.assemble_dense(1 << 12).unwrap(), &explicit));
        let x = random_cmat(n, m, seed ^ 12);
        // Matrix form: Dx X + X Dyᵀ + K∘X.
        let want = matmul(&dx.to_dense(), &x) + &x * dy.to_dense().transpose() + k.component_mul(&x);
        let got = op.apply(&vec(&x)).unwrap();
        prop_assert!((&got - vec(&want)).norm() <= TOL * (1.0 + want.norm()));
    }
}
