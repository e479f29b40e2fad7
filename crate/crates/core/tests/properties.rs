mod common;

use common::{equal_row_profile, jacobi_eigenvalues};
use lapcert::certificates::{certify_rank_one, dual_diagonal};
use lapcert::ensembles::{derive_stream, sample_er};
use lapcert::experiments::{format_number, Grid};
use lapcert::laplacian::{graph_laplacian, laplacian_of};
use lapcert::symm_eig::{eig_all, lambda_k, spectral_norm};
use lapcert::tail::{build_variance_sets, greedy_half_cut, t_distribution, t_exact};
use lapcert::SymmetricMatrix;
use proptest::prelude::*;

fn matrix(max_n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, n * (n + 1) / 2).prop_map(move |vals| {
            let mut it = vals.into_iter();
            SymmetricMatrix::from_fn(n, |_, _| it.next().unwrap()).unwrap()
        })
    })
}

fn matrix_and_signs(max_n: usize) -> impl Strategy<Value = (SymmetricMatrix, Vec<i8>)> {
    matrix(max_n).prop_flat_map(|m| {
        let n = m.n();
        (Just(m), prop::collection::vec(prop::bool::ANY, n))
            .prop_map(|(m, b)| (m, b.into_iter().map(|s| if s { 1 } else { -1 }).collect()))
    })
}

fn nonneg_weights(max_n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n * (n + 1) / 2).prop_map(move |vals| {
            let mut it = vals.into_iter();
            SymmetricMatrix::from_fn(n, |i, j| {
                let v = it.next().unwrap();
                if i == j {
                    0.0
                } else {
                    v
                }
            })
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spectrum_sums_to_trace_and_vectors_are_orthonormal(m in matrix(24)) {
        let n = m.n();
        let s = eig_all(&m, true).unwrap();
        let scale = 1.0 + m.inf_norm();
        let sum: f64 = s.eigenvalues.iter().sum();
        prop_assert!((sum - m.trace()).abs() <= 1e-10 * scale * n as f64);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.residual <= 1e-10 * scale);
        for a in 0..n {
            for b in 0..n {
                let va = s.eigenvector(a).unwrap();
                let vb = s.eigenvector(b).unwrap();
                let d: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lambda_k_agrees_with_full_spectrum(m in matrix(20)) {
        let s = eig_all(&m, false).unwrap();
        let scale = 1.0 + m.inf_norm();
        for k in 1..=m.n() {
            let v = lambda_k(&m, k).unwrap();
            prop_assert!((v - s.eigenvalues[k - 1]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn sign_conjugation_preserves_spectrum((m, s) in matrix_and_signs(16)) {
        let a = eig_all(&m, false).unwrap().eigenvalues;
        let b = eig_all(&m.conjugate_signs(&s), false).unwrap().eigenvalues;
        let scale = 1.0 + m.inf_norm();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn eig_agrees_with_jacobi(m in matrix(12)) {
        let a = eig_all(&m, false).unwrap().eigenvalues;
        let b = jacobi_eigenvalues(&m);
        let scale = 1.0 + m.inf_norm();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn spectral_norm_bounds(m in matrix(16)) {
        let norm = spectral_norm(&m).unwrap();
        prop_assert!(norm <= m.inf_norm() * (1.0 + 1e-12) + 1e-300);
        prop_assert!(norm >= m.max_abs() * (1.0 - 1e-12));
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_ignore_diagonal(m in matrix(16), shift in -5.0f64..5.0) {
        let l = laplacian_of(&m);
        let scale = 1.0 + m.inf_norm();
        for s in l.row_sums() {
            prop_assert!(s.abs() <= 1e-12 * scale * m.n() as f64);
        }
        let shifted = m.add_diag(&vec![shift; m.n()]);
        prop_assert_eq!(laplacian_of(&shifted), l.clone());
        // The all-ones vector is in the kernel, so λmax ≥ max diag.
        let lmax = eig_all(&l, false).unwrap().lambda_max();
        let dmax = l.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lmax >= dmax - 1e-10 * scale);
    }

    #[test]
    fn graph_laplacian_is_psd(seed in 0u64..10_000, n in 2usize..30, p in 0.0f64..1.0) {
        let g = sample_er(n, p, &mut derive_stream(seed, 0)).unwrap();
        let l = graph_laplacian(&g);
        let ev = eig_all(&l, false).unwrap().eigenvalues;
        prop_assert!(ev[0].abs() <= 1e-10 * (1.0 + n as f64));
        prop_assert!(ev[0] >= -1e-10 * (1.0 + n as f64));
    }

    #[test]
    fn dual_diagonal_identities((y, x) in matrix_and_signs(16)) {
        let d = dual_diagonal(&y, &x).unwrap();
        let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
        let quad: f64 = xf.iter().zip(y.matvec(&xf)).map(|(a, b)| a * b).sum();
        let scale = 1.0 + y.inf_norm() * y.n() as f64;
        prop_assert!((d.iter().sum::<f64>() - quad).abs() <= 1e-12 * scale);
        let r = certify_rank_one(&y, &x).unwrap();
        prop_assert!(r.residual_null <= 1e-10 * y.n() as f64 * (1.0 + y.max_abs()));
        prop_assert!(r.lambda1 <= r.lambda2);
    }

    #[test]
    fn certificate_verdict_is_scale_invariant((y, x) in matrix_and_signs(12), c in 0.5f64..4.0) {
        let a = certify_rank_one(&y, &x).unwrap();
        let b = certify_rank_one(&y.scaled(c), &x).unwrap();
        // Decisions inside the dead band may legitimately differ.
        if a.lambda2.abs() > 1e-6 * a.scale {
            prop_assert_eq!(a.tight, b.tight);
        }
    }

    #[test]
    fn certificate_is_conjugation_invariant((y, x) in matrix_and_signs(12)) {
        let a = certify_rank_one(&y, &x).unwrap();
        let ones = vec![1i8; y.n()];
        let b = certify_rank_one(&y.conjugate_signs(&x), &ones).unwrap();
        if y.n() > 1 {
            prop_assert!((a.lambda2 - b.lambda2).abs() <= 1e-10 * a.scale);
        }
        prop_assert_eq!(a.d_diag, b.d_diag);
    }

    #[test]
    fn tail_law_is_a_distribution(m in 0usize..150, p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let d = t_distribution(m, p, q).unwrap();
        prop_assert_eq!(d.len(), 2 * m + 1);
        prop_assert!(d.iter().all(|&v| v >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tail_is_monotone_in_delta(m in 0usize..80, p in 0.0f64..=1.0, q in 0.0f64..=1.0, d in -90.0f64..90.0, step in 0.0f64..10.0) {
        let a = t_exact(m, p, q, d).unwrap();
        let b = t_exact(m, p, q, d + step).unwrap();
        prop_assert!(b <= a + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn tail_swap_symmetry(m in 0usize..80, p in 0.0f64..=1.0, q in 0.0f64..=1.0, d in -85i32..85) {
        // Swapping p and q negates S: P[S ≥ d] = 1 - P[-S ≥ 1 - d].
        let a = t_exact(m, p, q, f64::from(d)).unwrap();
        let b = t_exact(m, q, p, f64::from(1 - d)).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn greedy_cut_takes_half(w in nonneg_weights(20)) {
        let cut = greedy_half_cut(&w).unwrap();
        let n = w.n();
        prop_assert!(cut.weight >= 0.5 * cut.total - 1e-9 * (1.0 + cut.total));
        prop_assert!(2 * cut.s.len() >= n);
        let mut all: Vec<usize> = cut.s.iter().chain(&cut.complement).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        // The reported weight is the weight actually cut.
        let direct: f64 = cut.s.iter().flat_map(|&i| cut.complement.iter().map(move |&j| (i, j))).map(|(i, j)| w.get(i, j)).sum();
        prop_assert!((direct - cut.weight).abs() <= 1e-9 * (1.0 + cut.total));
    }

    #[test]
    fn variance_sets_cover_an_eighth(seed in 0u64..100_000, n in 2usize..40, layers in 1usize..5) {
        let (w, sigma2) = equal_row_profile(n, layers, seed);
        let sets = build_variance_sets(&w, sigma2).unwrap();
        prop_assert!(8 * sets.i_set.len() >= n);
    }

    #[test]
    fn grid_values_are_inclusive(start in -50i32..50, count in 0usize..40, step_milli in 1u32..5000) {
        let step = f64::from(step_milli) / 1000.0;
        let start = f64::from(start) / 4.0;
        let stop = start + count as f64 * step;
        let g: Grid = format!("{start}:{stop}:{step}").parse().unwrap();
        prop_assert_eq!(g.values().len(), count + 1);
    }

    #[test]
    fn csv_numbers_round_trip(v in -1e12f64..1e12) {
        let s = format_number(v);
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(format_number(back), s);
        prop_assert!((back - v).abs() <= 1e-8 * v.abs());
    }
}

#[test]
fn single_pair_profile_has_one_node() {
    let mut w = SymmetricMatrix::zeros(2);
    w.set(0, 1, 1.0);
    let sets = build_variance_sets(&w, 1.0).unwrap();
    assert!(!sets.i_set.is_empty());
}
