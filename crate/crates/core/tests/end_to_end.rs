use adasketch::embeddings::{critical_m_gaussian, sketch};
use adasketch::problem::{
    direct_solve, effective_dimension, exact_error, gen_synthetic, load_csv, random_features,
    write_csv, LabelMode,
};
use adasketch::solvers::{adaptive_run, cg, ihs_run, pcg_run, polyak_ihs_run, RunOptions};
use adasketch::{
    AdaptiveConfig, AdaptiveMethod, DenseMatrix, Preconditioner, RegularizedProblem, SketchFamily,
    SketchSpec, TraceEvent,
};

#[test]
fn generated_minimizer_is_recovered_by_every_solver() {
    let sp = gen_synthetic(1024, 64, 0.95, 0.05, 1).unwrap();
    let p = &sp.problem;
    let sol = direct_solve(p).unwrap();
    let truth = sp.x_true.sub(&sol.x_star).unwrap().max_abs();
    assert!(
        truth < 1e-8,
        "direct solve misses the planted minimizer by {truth}"
    );

    let x0 = DenseMatrix::zeros(64, 1);
    let opts = RunOptions::new(40).with_exact(&sol);
    let d0 = exact_error(p, &x0, &sol).unwrap();
    for family in [
        SketchFamily::Gaussian,
        SketchFamily::Srht,
        SketchFamily::Sjlt,
    ] {
        let spec = SketchSpec::new(family, 512, 3).with_sparsity(4);
        let runs = [
            ("ihs", ihs_run(p, &x0, &spec, 0.25, &opts).unwrap()),
            ("pcg", pcg_run(p, &x0, &spec, &opts).unwrap()),
            (
                "polyak",
                polyak_ihs_run(p, &x0, &spec, 0.25, &opts).unwrap(),
            ),
        ];
        for (name, (x, _)) in runs {
            let e = exact_error(p, &x, &sol).unwrap();
            assert!(e <= 1e-14 * d0, "{name}/{family}: {e:e} of {d0:e}");
        }
    }
    let (x, trace) = cg(p, &x0, &RunOptions::new(200).with_exact(&sol)).unwrap();
    assert!(exact_error(p, &x, &sol).unwrap() <= 1e-14 * d0);
    assert!(trace.iterations() <= 200);
}

#[test]
fn adaptive_solvers_converge_with_a_modest_sketch() {
    let sp = gen_synthetic(2048, 128, 0.95, 0.1, 5).unwrap();
    let p = &sp.problem;
    let sol = direct_solve(p).unwrap();
    let de = effective_dimension(p).unwrap();
    let bound = 2.0 * critical_m_gaussian(de, 0.1).unwrap() / 0.125;
    for method in [AdaptiveMethod::Ihs, AdaptiveMethod::Pcg] {
        for family in [
            SketchFamily::Gaussian,
            SketchFamily::Srht,
            SketchFamily::Sjlt,
        ] {
            let cfg = AdaptiveConfig::new(method, 0.125, 1, 80, family, 9)
                .unwrap()
                .with_sparsity(2);
            let (x, trace) =
                adaptive_run(p, &DenseMatrix::zeros(128, 1), &cfg, Some(&sol)).unwrap();
            let errs = trace.exact_errors().unwrap();
            assert!(errs[errs.len() - 1] <= 1e-12 * errs[0], "{method}/{family}");
            assert!(
                (trace.final_m() as f64) <= bound.max(2.0 * 128.0),
                "{method}/{family}: m {}",
                trace.final_m()
            );
            assert!(trace
                .records()
                .iter()
                .any(|r| r.event == TraceEvent::Resketch));
            assert_eq!(exact_error(p, &x, &sol).unwrap(), errs[errs.len() - 1]);
        }
    }
}

#[test]
fn ridge_regression_from_csv_with_random_features() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let n = 300;
    let features = DenseMatrix::from_fn(n, 4, |i, j| ((i * (j + 3)) as f64 * 0.37).sin());
    let labels: Vec<f64> = (0..n).map(|i| (i % 4) as f64).collect();
    write_csv(&path, &features, Some(&labels)).unwrap();

    let (x, y) = load_csv(&path, LabelMode::LastColumnClass).unwrap();
    assert_eq!(x.shape(), (n, 4));
    assert_eq!(y.shape(), (n, 4));
    let z = random_features(&x, 0.5, 64, 2).unwrap();
    let p = RegularizedProblem::from_ridge(z, &y, 1e-3).unwrap();
    assert_eq!(p.c(), 4);
    let sol = direct_solve(&p).unwrap();

    let pre = Preconditioner::build(
        &sketch(&SketchSpec::new(SketchFamily::Srht, 256, 4), p.a()).unwrap(),
        p.nu(),
        p.lambda(),
    )
    .unwrap();
    let x0 = DenseMatrix::zeros(64, 4);
    let (xt, trace) =
        adasketch::solvers::pcg_run_with(&p, &pre, &x0, &RunOptions::new(40).with_exact(&sol))
            .unwrap();
    let errs = trace.exact_errors().unwrap();
    assert!(errs[errs.len() - 1] <= 1e-16 * errs[0]);
    assert!(xt.sub(&sol.x_star).unwrap().max_abs() < 1e-6);
}
