//! Scratch probe for study phenomena (temporary, run with --ignored).

use sgpe_core::experiments::{run_study, ErrorNorm, InitialProfile, StudyConfig, StudyKind};
use sgpe_core::schemes::{SchemeConfig, SchemeKind};

#[test]
#[ignore]
fn probe_fig3_desk() {
    let mut base = SchemeConfig::new(SchemeKind::CnHermite, 40, 2f64.powi(-10), 1.0);
    base.lambda = 1.0;
    base.alpha = 0.2;
    let mut cfg = StudyConfig::new(
        StudyKind::TimeMeansquare,
        base,
        vec![32, 64, 128, 256, 512, 1024],
        2026,
    );
    cfg.n_samples = 32;
    cfg.error_norm = ErrorNorm::L2;
    cfg.initial = InitialProfile::Gaussian { a: 0.25 };
    let t0 = std::time::Instant::now();
    let result = run_study(&cfg).unwrap();
    println!("fig3 desk took {:?}", t0.elapsed());
    for row in result.rows.iter().filter(|r| r.sample.is_none()) {
        println!(
            "scheme {:14} dt {:10.6} mean_err_sq {:.6e} stderr {:.2e}",
            row.scheme,
            row.dt,
            row.error_sq,
            row.stderr.unwrap_or(0.0)
        );
    }
    for (label, slope) in &result.slopes {
        println!("slope {label}: {slope:.3}");
    }
}

#[test]
#[ignore]
fn probe_fig4_desk() {
    let mut base = SchemeConfig::new(SchemeKind::CnHermite, 40, 2f64.powi(-10), 1.0);
    base.lambda = 1.0;
    base.alpha = 1.0;
    let mut cfg = StudyConfig::new(StudyKind::StabilityVsK, base, vec![40, 80, 120], 2027);
    cfg.n_samples = 16;
    cfg.error_norm = ErrorNorm::Sigma1;
    cfg.dt_list = vec![2f64.powi(-8), 2f64.powi(-10), 2f64.powi(-12)];
    cfg.initial = InitialProfile::Gaussian { a: 0.25 };
    let t0 = std::time::Instant::now();
    let result = run_study(&cfg).unwrap();
    println!("fig4 desk took {:?}", t0.elapsed());
    for row in result.rows.iter().filter(|r| r.sample.is_none()) {
        println!(
            "K {:4} dt {:12.8} mean_gap_sq {:.6e} diag {:.4}",
            row.k,
            row.dt,
            row.error_sq,
            row.diagnostic.unwrap()
        );
    }
}

#[test]
#[ignore]
fn probe_fig12_desk() {
    let mut base = SchemeConfig::new(SchemeKind::CnHermite, 128, 2f64.powi(-12), 1.0);
    base.lambda = 1.0;
    base.alpha = 0.3;
    base.lx = Some(10.0);
    let mut cfg = StudyConfig::new(
        StudyKind::SpacePathwise,
        base.clone(),
        vec![16, 32, 64, 128],
        2028,
    );
    cfg.initial = InitialProfile::Gaussian { a: 0.1 };
    let t0 = std::time::Instant::now();
    let result = run_study(&cfg).unwrap();
    println!("fig1 desk took {:?}", t0.elapsed());
    for row in &result.rows {
        println!(
            "scheme {:14} dof {:4} err {:.6e}",
            row.scheme,
            row.k,
            row.error_sq.sqrt()
        );
    }

    let mut base2 = base.clone();
    base2.dt = 2f64.powi(-16);
    let mut cfg2 = StudyConfig::new(StudyKind::CrossScheme, base2, vec![16, 32, 64, 128], 2028);
    cfg2.lx_list = vec![3.0, 10.0];
    cfg2.initial = InitialProfile::Gaussian { a: 0.1 };
    let t0 = std::time::Instant::now();
    let result = run_study(&cfg2).unwrap();
    println!("fig2 desk took {:?}", t0.elapsed());
    for row in &result.rows {
        println!(
            "scheme {:14} dof {:4} lx {:?} err {:.6e}",
            row.scheme,
            row.k,
            row.lx,
            row.error_sq.sqrt()
        );
    }
}
