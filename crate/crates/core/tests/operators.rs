use magstark::assembly::{make_grid, Domain};
use magstark::distortion::distorted_coefficients;
use magstark::eig::scan::{eigs_in_rectangle, Rectangle, ScanOptions};
use magstark::eig::{count_in_interval, dense_eigenvalues, DenseMatrix};
use magstark::wellops::flatten_exterior;
use magstark::*;
use proptest::prelude::*;

fn well(l: f64) -> PotentialSpec {
    PotentialSpec {
        terms: vec![Term::EnvelopedQuadraticWell { offset: 0.0, x0: 0.0, y0: 0.0, envelope: l, lambda1: 1.0, lambda2: 1.0 }],
    }
}

fn to_dense(a: &ComplexSparseMatrix) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(a.dim());
    for i in 0..a.dim() {
        for (j, v) in a.row_entries(i) {
            d[(i, j)] += v;
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_theta_reproduces_p_bitwise(nx in 4usize..14, ny in 4usize..14, b in 0.0..2.0f64, h in 0.05..0.5f64, r0 in 0.2..1.5f64) {
        let g = make_grid(Domain::new(-2.0, 1.5, -1.5, 1.7), nx, ny).unwrap();
        let hp = HamiltonianParams::new(b, h).unwrap();
        let spec = well(2.5);
        let p = assemble_operator(OperatorKind::SelfAdjoint(&spec), &g, &hp).unwrap();
        let dp = DistortionParams::fixed(r0, 1.0, C64::new(0.0, 0.0), CutoffGeometry::Disc);
        let c = distorted_coefficients(&dp, h, &spec, &g).unwrap();
        let q = assemble_operator(OperatorKind::Distorted(&c), &g, &hp).unwrap();
        for i in 0..p.dim() {
            let a: Vec<_> = p.row_entries(i).collect();
            let b: Vec<_> = q.row_entries(i).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn reference_operator_is_exactly_hermitian(nx in 4usize..16, ny in 4usize..16, b in 0.0..3.0f64, h in 0.05..0.5f64) {
        let g = make_grid(Domain::new(-2.5, 2.0, -2.0, 2.0), nx, ny).unwrap();
        let hp = HamiltonianParams::new(b, h).unwrap();
        let pint = flatten_exterior(&well(2.5), Region::Disc { cx: 0.0, cy: 0.0, radius: 1.0 }, 0.3, 0.5, 0.25).unwrap();
        let a = assemble_operator(OperatorKind::SelfAdjoint(&pint), &g, &hp).unwrap();
        prop_assert_eq!(a.hermitian_defect(), 0.0);
        prop_assert_eq!(a.symmetry(), SymmetryTag::HermitianExpected);
    }

    #[test]
    fn inertia_count_matches_dense(nx in 4usize..12, ny in 4usize..12, b in 0.0..2.0f64, lo in -0.5..0.5f64, w in 0.0..1.5f64) {
        let g = make_grid(Domain::new(-2.0, 2.0, -2.0, 2.0), nx, ny).unwrap();
        let hp = HamiltonianParams::new(b, 0.3).unwrap();
        let a = assemble_operator(OperatorKind::SelfAdjoint(&well(3.0)), &g, &hp).unwrap();
        let ev = dense_eigenvalues(&to_dense(&a)).unwrap();
        // stay away from eigenvalues sitting on an endpoint
        let near = |x: f64| ev.iter().any(|z| (z.re - x).abs() < 1e-9);
        prop_assume!(!near(lo) && !near(lo + w));
        let want = ev.iter().filter(|z| z.re >= lo && z.re < lo + w).count();
        prop_assert_eq!(count_in_interval(&a, lo, lo + w).unwrap(), want);
    }

    #[test]
    fn rectangle_scan_matches_dense(nx in 6usize..12, ny in 6usize..12, th in 0.05..0.3f64) {
        let g = make_grid(Domain::new(-2.5, 2.0, -2.0, 2.0), nx, ny).unwrap();
        let hp = HamiltonianParams::new(1.0, 0.3).unwrap();
        let dp = DistortionParams::fixed(0.5, 1.0, C64::new(0.0, -th), CutoffGeometry::Disc);
        let c = distorted_coefficients(&dp, 0.3, &well(2.5), &g).unwrap();
        let q = assemble_operator(OperatorKind::Distorted(&c), &g, &hp).unwrap();
        let rect = Rectangle::new(0.0, 1.0, -0.5, 0.0);
        let ev = dense_eigenvalues(&to_dense(&q)).unwrap();
        let edge = 1e-6;
        prop_assume!(ev.iter().all(|z| !rect.contains_within(*z, edge) || rect.contains_within(*z, -edge)));
        let want = ev.iter().filter(|z| rect.contains(**z)).count();
        let s = eigs_in_rectangle(&q, rect, &ScanOptions { k_initial: 6, k_max: 24, ..Default::default() }).unwrap();
        prop_assert!(s.complete);
        prop_assert_eq!(s.pairs.iter().filter(|p| rect.contains(p.value)).count(), want);
    }
}
