use proptest::prelude::*;
use stokes_saddle::fem::{assemble, assemble_full, build_box_mesh, channel_system, StokesParams, CHANNEL_EXTENTS};
use stokes_saddle::global::{gcg, pgcg, pgcg_recorded};
use stokes_saddle::krylov::{ichol0, IcholFactor, KrylovConfig};
use stokes_saddle::sparse::{diamond, mv_apply, CsrMatrix, MultiVector, TripletBuilder};
use stokes_saddle::verify::{cholesky, jacobi_eigen, rank, verify_pressure_spectrum, DenseMatrix};

fn dense_of(a: &CsrMatrix) -> Vec<f64> {
    let mut d = vec![0.0; a.nrows() * a.ncols()];
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            d[i * a.ncols() + j] += v;
        }
    }
    d
}

fn triplets(max_dim: usize) -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        let entry = (0..m, 0..n, -10.0..10.0f64);
        (Just(m), Just(n), prop::collection::vec(entry, 0..4 * m * n))
    })
}

/// Symmetric, strictly diagonally dominant sparse matrix.
fn sparse_spd(max_dim: usize) -> impl Strategy<Value = CsrMatrix> {
    (2..=max_dim)
        .prop_flat_map(|n| {
            let off = (0..n, 0..n, -1.0..1.0f64);
            (Just(n), prop::collection::vec(off, 0..3 * n))
        })
        .prop_map(|(n, offs)| {
            let mut b = TripletBuilder::new(n, n);
            let mut rowsum = vec![0.0f64; n];
            for (i, j, v) in offs.into_iter().filter(|(i, j, _)| i != j) {
                b.push(i, j, v);
                b.push(j, i, v);
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
            for (i, s) in rowsum.iter().enumerate() {
                b.push(i, i, s + 1.0);
            }
            b.build().expect("valid triplets")
        })
}

fn block(n: usize, s: usize) -> impl Strategy<Value = MultiVector> {
    prop::collection::vec(-1.0..1.0f64, n * s)
        .prop_map(move |d| MultiVector::from_col_major(n, s, d).expect("shape"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csr_structure_and_products((m, n, entries) in triplets(12)) {
        let mut b = TripletBuilder::new(m, n);
        let mut oracle = vec![0.0; m * n];
        for &(i, j, v) in &entries {
            b.push(i, j, v);
            oracle[i * n + j] += v;
        }
        let a = b.build().unwrap();
        let rp = a.row_ptr();
        prop_assert_eq!(rp[0], 0);
        prop_assert_eq!(rp[m], a.nnz());
        prop_assert!(rp.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..m {
            let (cols, _) = a.row(i);
            prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cols.iter().all(|&c| c < n));
        }
        let dense = dense_of(&a);
        for (x, y) in dense.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }

        let x: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
        let y = a.spmv(&x).unwrap();
        for i in 0..m {
            let expect: f64 = (0..n).map(|j| oracle[i * n + j] * x[j]).sum();
            prop_assert!((y[i] - expect).abs() <= 1e-10);
        }
        let w: Vec<f64> = (0..m).map(|i| (i as f64).cos()).collect();
        let t1 = a.spmv_transpose(&w).unwrap();
        let t2 = a.transpose().spmv(&w).unwrap();
        for (p, q) in t1.iter().zip(&t2) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        prop_assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn ichol_matches_on_pattern(a in sparse_spd(20)) {
        let g = ichol0(&a).unwrap();
        let gf = g.factor();
        let n = a.nrows();
        let lower = a.lower();
        for i in 0..n {
            let (cols, _) = gf.row(i);
            for &j in cols {
                prop_assert!(j <= i);
                prop_assert!(lower.row(i).0.contains(&j));
            }
        }
        let gd = dense_of(gf);
        let scale = a.max_abs();
        for i in 0..n {
            let (cols, vals) = lower.row(i);
            for (&j, &aij) in cols.iter().zip(vals) {
                let ggt: f64 = (0..n).map(|k| gd[i * n + k] * gd[j * n + k]).sum();
                prop_assert!((ggt - aij).abs() <= 1e-12 * scale, "({i},{j}) {ggt} vs {aij}");
            }
        }
    }

    #[test]
    fn pgcg_with_identity_factor_is_gcg(a in sparse_spd(25), seed in 0u64..1000) {
        let n = a.nrows();
        let h = MultiVector::from_col_major(
            n, 3, (0..3 * n).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 / 97.0 - 0.5).collect()).unwrap();
        let cfg = KrylovConfig::default().with_tol(1e-10).with_max_iters(4 * n);
        let (x1, r1) = gcg(&a, &h, &cfg).unwrap();
        let (x2, r2) = pgcg(&a, &IcholFactor::identity(n), &h, &cfg).unwrap();
        prop_assert_eq!(r1.iterations, r2.iterations);
        for (p, q) in x1.as_slice().iter().zip(x2.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-14 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn recorded_pgcg_invariants(a in sparse_spd(25), h in block(25, 3)) {
        let n = a.nrows();
        let h = MultiVector::from_col_major(n, 3, h.as_slice()[..3 * n].to_vec()).unwrap();
        let g = ichol0(&a).unwrap();
        let cfg = KrylovConfig::default().with_tol(1e-8).with_max_iters(n);
        let (_, _, state) = pgcg_recorded(&a, Some(&g), &h, &cfg).unwrap();
        for w in state.k_blocks.windows(2) {
            let mut z = w[0].clone();
            for j in 0..z.ncols() {
                let c = g.solve(w[0].col(j)).unwrap();
                z.col_mut(j).copy_from_slice(&c);
            }
            let next = mv_apply(&a, &z).unwrap();
            let mut d = next.clone();
            d.axpy(-1.0, &w[1]);
            prop_assert!(d.frobenius_norm() <= 1e-12 * next.frobenius_norm().max(f64::MIN_POSITIVE));
        }
        let hn = h.frobenius_norm();
        for (x, r) in state.iterates.iter().zip(&state.residuals) {
            let mut t = h.clone();
            t.axpy(-1.0, &mv_apply(&a, x).unwrap());
            t.axpy(-1.0, r);
            prop_assert!(t.frobenius_norm() <= 1e-12 * hn);
        }
    }

    #[test]
    fn diamond_is_gram_of_frobenius_products(ys in prop::collection::vec(block(6, 2), 1..4),
                                             zs in prop::collection::vec(block(6, 2), 1..4)) {
        let d = diamond(&ys, &zs).unwrap();
        prop_assert_eq!(d.len(), ys.len() * zs.len());
        for (i, y) in ys.iter().enumerate() {
            for (j, z) in zs.iter().enumerate() {
                let f: f64 = y.as_slice().iter().zip(z.as_slice()).map(|(a, b)| a * b).sum();
                prop_assert!((d[i * zs.len() + j] - f).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn assembled_blocks_have_the_expected_structure(
        nx in 1usize..=3, ny in 1usize..=2, nz in 1usize..=2,
        alpha in 0.0..1e4f64, log_nu in -3.0..0.0f64,
    ) {
        let p = StokesParams::new(alpha, 10f64.powf(log_nu));
        let mesh = build_box_mesh(nx, ny, nz, CHANNEL_EXTENTS).unwrap();
        let sys = assemble(&mesh, &p).unwrap();
        let full = assemble_full(&mesh, &p).unwrap();
        prop_assert!(full.a.symmetry_defect() <= 1e-12 * full.a.max_abs());
        prop_assert!(cholesky(&DenseMatrix::from_csr(&full.a).unwrap()).is_ok());
        if sys.n_u() > 0 {
            prop_assert!(cholesky(&DenseMatrix::from_csr(&sys.a).unwrap()).is_ok());
        }
        prop_assert!(sys.q.symmetry_defect() <= 1e-12 * sys.q.max_abs());
        prop_assert!(cholesky(&DenseMatrix::from_csr(&sys.q).unwrap()).is_ok());
        let c = DenseMatrix::from_csr(&sys.c).unwrap();
        let cmin = jacobi_eigen(&c).unwrap().values[0];
        prop_assert!(cmin >= -1e-12 * c.max_abs());

        // Constants span the kernel of Bᵀ when every boundary velocity is
        // prescribed, so rank(B) is capped at n_p − 1.
        let n_p = sys.n_p();
        let mut b_all = DenseMatrix::zeros(n_p, 3 * sys.n_u());
        for (comp, b) in sys.b.iter().enumerate() {
            b_all.set_block(0, comp * sys.n_u(), &DenseMatrix::from_csr(b).unwrap());
        }
        prop_assert_eq!(rank(&b_all, 1e-10), (3 * sys.n_u()).min(n_p - 1));
    }

    #[test]
    fn pressure_rayleigh_quotients_are_nonnegative(dims in prop::sample::select(vec![[1, 1, 1], [2, 1, 1], [2, 2, 2]]),
                                                   log_beta in -2.0..2.0f64) {
        let sys = channel_system(dims, &StokesParams::new(1e2, 1e-2)).unwrap();
        let r = verify_pressure_spectrum(&sys, 10f64.powf(log_beta)).unwrap();
        for pair in &r.pairs {
            prop_assert!(pair.q > 0.0);
            prop_assert!(pair.c >= -1e-12);
            prop_assert!(pair.a >= -1e-12);
        }
    }
}
