//! Cross-checks of the precoders and the detector against independent
//! computations built here from first principles.

use nalgebra::DMatrix;
use num_complex::Complex64;
use ssb_isac::detector::{
    llr, roc_analytic, roc_mc, sensing_covariance, test_statistic, test_statistic_dense,
    HypothesisModel,
};
use ssb_isac::harness::{compare_with_sdr, random_instance, OracleInstance};
use ssb_isac::linalg::c;
use ssb_isac::precoder::{
    coordinated_precoder, extract_rank1, sdr_bisection_solver, MaskMode, PrecoderSolution,
    SdrOptions,
};
use ssb_isac::rng::{complex_normal, StreamSeed};
use ssb_isac::{CMatrix, CVector};

fn instance(side: usize, j: usize, mode: MaskMode, tag: u64) -> OracleInstance {
    // Some draws leave every AP unable to see the voxel; walk forward to the
    // next usable one.
    (0..50)
        .map(|k| random_instance(side, j, mode, StreamSeed(0x0ac1e).derive(&[tag, k])).unwrap())
        .find(|inst| {
            coordinated_precoder(
                &inst.scene,
                &inst.channels,
                inst.q,
                &inst.rho_min,
                inst.p_max,
                inst.mode,
            )
            .is_ok()
        })
        .expect("no usable instance in 50 draws")
}

fn solve(inst: &OracleInstance) -> PrecoderSolution {
    coordinated_precoder(
        &inst.scene,
        &inst.channels,
        inst.q,
        &inst.rho_min,
        inst.p_max,
        inst.mode,
    )
    .unwrap()
}

/// `‖P^⊥ x‖²` with `P^⊥` the projector off the column span of `a`, via an
/// SVD of the constraint matrix.
fn residual_energy(a: &CMatrix, x: &CVector) -> f64 {
    let svd = a.clone().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let mut r = x.clone();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-10 * smax {
            let col = u.column(k);
            let coef = col.dotc(&r);
            r -= col * coef;
        }
    }
    r.norm_squared()
}

#[test]
fn closed_form_meets_the_per_ap_projection_bound() {
    for (tag, mode) in [(1, MaskMode::DlMasked), (2, MaskMode::NonDlMasked)] {
        let inst = instance(4, 3, mode, tag);
        let sol = solve(&inst);
        let f = inst.scene.ssb_column(inst.q);
        for (j, h) in inst.channels.sensing[inst.q].iter().enumerate() {
            let w = &sol.w[j];
            // h^T w = <conj h, w>, so the constraints live on conjugated vectors.
            let mut cols = vec![f.conjugate()];
            if mode.is_masked() {
                cols.push(inst.channels.direct[j].h_dep.conjugate());
            }
            let a = CMatrix::from_columns(&cols);
            let bound = (inst.p_max - inst.rho_min[j]) * residual_energy(&a, &h.h_tx.conjugate());
            let got = h.h_tx.dot(w).norm_sqr();
            if sol.idle_aps.contains(&j) {
                assert_eq!(w.norm(), 0.0);
                continue;
            }
            assert!(
                (got - bound).abs() <= 1e-9 * bound,
                "AP {j}: |h^T w|² = {got}, projection bound {bound}"
            );
            assert!(f.dot(w).norm() < 1e-9 * w.norm() * f.norm());
            if mode.is_masked() {
                let hd = &inst.channels.direct[j].h_dep;
                assert!(hd.dot(w).norm() < 1e-9 * w.norm() * hd.norm());
            }
            let total = w.norm_squared() + inst.rho_min[j];
            assert!((total - inst.p_max).abs() < 1e-9 * inst.p_max);
        }
    }
}

#[test]
fn closed_form_echoes_add_in_phase_at_the_receiver() {
    let inst = instance(4, 3, MaskMode::DlMasked, 3);
    let sol = solve(&inst);
    let v = &inst.channels.sensing[inst.q][0].h_rx;
    let echoes: Vec<Complex64> = inst.channels.sensing[inst.q]
        .iter()
        .zip(&sol.w)
        .map(|(h, w)| v.dotc(&h.apply(w)))
        .filter(|e| e.norm() > 0.0)
        .collect();
    let coherent: f64 = echoes.iter().map(|e| e.norm()).sum();
    let actual = echoes.iter().sum::<Complex64>().norm();
    assert!((coherent - actual).abs() < 1e-9 * coherent);
}

#[test]
fn closed_form_is_not_beaten_by_the_relaxation() {
    let opts = SdrOptions::default();
    for (tag, (side, j)) in [(2, 2), (3, 2), (3, 3)].into_iter().enumerate() {
        for mode in [MaskMode::DlMasked, MaskMode::NonDlMasked] {
            let inst = instance(side, j, mode, 100 + tag as u64);
            let cmp = compare_with_sdr(&inst, &opts).unwrap();
            assert!(cmp.closed_form_dominates(), "{cmp:?}");
            // The relaxation is an upper bound up to the bisection tolerance.
            assert!(cmp.closed_form <= cmp.sdr * (1.0 + 1e-3), "{cmp:?}");
        }
    }
}

#[test]
fn sdr_extraction_respects_power_and_nulls() {
    let inst = instance(3, 2, MaskMode::DlMasked, 7);
    let (sol, diag) = sdr_bisection_solver(
        &inst.scene,
        &inst.channels,
        inst.q,
        &inst.rho_min,
        inst.p_max,
        inst.mode,
        &SdrOptions::default(),
    )
    .unwrap();
    assert!(
        diag.eigen_ratio > 1e3,
        "W is not close to rank one: λ1/λ2 = {}",
        diag.eigen_ratio
    );
    let f = inst.scene.ssb_column(inst.q);
    for (j, w) in sol.w.iter().enumerate() {
        assert!(w.norm_squared() + sol.rho[j] <= inst.p_max * (1.0 + 1e-9));
        let leak = f.dot(w).norm();
        assert!(leak < 1e-4 * (inst.p_max * f.norm_squared()).sqrt());
    }
}

#[test]
fn rank1_extraction_recovers_blocks_up_to_phase() {
    let mut rng = StreamSeed(11).rng();
    let parts: Vec<CVector> = (0..3)
        .map(|_| CVector::from_fn(4, |_, _| complex_normal(&mut rng, 1.0)))
        .collect();
    let stacked = CVector::from_iterator(12, parts.iter().flat_map(|p| p.iter().copied()));
    let w = &stacked * stacked.adjoint() * c(2.5);
    let rho = [0.5, 1.0, 2.0];
    let out = extract_rank1(&w, &rho, 4.0).unwrap();
    let unit = stacked.normalize();
    let phase = {
        let first = unit[0];
        first.conj() / first.norm()
    };
    for (k, w_k) in out.iter().enumerate() {
        let expected = unit.rows(k * 4, 4).into_owned() * phase * c((4.0 - rho[k]).sqrt());
        assert!((w_k - expected).norm() < 1e-10);
    }
    assert!(out[0][0].im.abs() < 1e-12 && out[0][0].re > 0.0);
}

#[test]
fn covariance_trace_matches_the_rank_one_model() {
    let inst = instance(4, 3, MaskMode::DlMasked, 5);
    let sol = solve(&inst);
    let phi = sensing_covariance(&sol, &inst.channels);
    let model = HypothesisModel::from_solution(&sol, &inst.channels);
    let trace = phi.trace().re;
    assert!((trace - model.phi).abs() < 1e-9 * trace);
    assert!((&phi - phi.adjoint()).norm() < 1e-12 * phi.norm());
}

#[test]
fn llr_and_statistic_differ_by_a_constant() {
    let inst = instance(4, 2, MaskMode::DlMasked, 6);
    let sol = solve(&inst);
    let rank1 = HypothesisModel::from_solution(&sol, &inst.channels);
    let dense = HypothesisModel::from_covariance(
        sensing_covariance(&sol, &inst.channels),
        rank1.sigma2,
        rank1.sigma_rcs2,
    )
    .unwrap();
    let m = inst.scene.m();
    let mut rng = StreamSeed(21).rng();
    let mut offsets = Vec::new();
    let mut stats = Vec::new();
    for _ in 0..8 {
        let y = CVector::from_fn(m, |_, _| complex_normal(&mut rng, rank1.sigma2 * 3.0));
        let t = test_statistic(&y, &rank1).unwrap();
        let t_dense = test_statistic_dense(&y, &dense).unwrap();
        assert!((t - t_dense).abs() <= 1e-8 * t.abs().max(1e-300) + 1e-12);
        offsets.push(llr(&y, &rank1).unwrap() - t);
        let dense_offset = llr(&y, &dense).unwrap() - t_dense;
        assert!((dense_offset - offsets[0]).abs() < 1e-8 * offsets[0].abs().max(1.0));
        stats.push((t, llr(&y, &rank1).unwrap()));
    }
    assert!(offsets.iter().all(|o| (o - offsets[0]).abs() < 1e-10));
    // The LLR is increasing in T.
    stats.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(stats.windows(2).all(|p| p[1].1 >= p[0].1));
}

/// Largest gap between the empirical CDF of `xs` and `cdf`.
fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn statistic_is_exponential_under_h0() {
    let inst = instance(4, 3, MaskMode::DlMasked, 8);
    let sol = solve(&inst);
    let model = HypothesisModel::from_solution(&sol, &inst.channels);
    let roc = roc_analytic(&model).unwrap();
    // P(T > γ(p)) = p, so the mean of T is γ(1/e).
    let mean = roc.threshold((-1f64).exp());
    let m = inst.scene.m();
    let mut rng = StreamSeed(31).rng();
    let n = 20_000;
    let mut ts: Vec<f64> = (0..n)
        .map(|_| {
            let y = CVector::from_fn(m, |_, _| complex_normal(&mut rng, model.sigma2));
            test_statistic(&y, &model).unwrap()
        })
        .collect();
    let d = ks_statistic(&mut ts, |t| 1.0 - (-t / mean).exp());
    // 1 % critical value of the one-sample KS test.
    assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn monte_carlo_roc_tracks_the_closed_form() {
    let inst = instance(4, 3, MaskMode::DlMasked, 9);
    let sol = solve(&inst);
    let mut model = HypothesisModel::from_solution(&sol, &inst.channels);
    // Pin the effective SNR near 5 so Pd is far from 0 and 1.
    model.sigma_rcs2 = 5.0 * model.sigma2 / model.phi;
    let roc = roc_analytic(&model).unwrap();
    let pfas = [1e-2, 0.1, 0.5];
    let trials = 200_000;
    let points = roc_mc(&model, inst.scene.m(), trials, &pfas, StreamSeed(41)).unwrap();
    for p in points {
        let pd = roc.pd(p.target_pfa);
        let sd_pd = (pd * (1.0 - pd) / trials as f64).sqrt();
        let sd_fa = (p.target_pfa * (1.0 - p.target_pfa) / trials as f64).sqrt();
        assert!((p.pd - pd).abs() < 4.0 * sd_pd, "{p:?} vs {pd}");
        assert!((p.pfa - p.target_pfa).abs() < 4.0 * sd_fa, "{p:?}");
    }
}

#[test]
fn idle_covariance_gives_a_blind_detector() {
    let model = HypothesisModel::from_covariance(DMatrix::zeros(4, 4), 1.0, 0.1).unwrap();
    let roc = roc_analytic(&model).unwrap();
    assert_eq!(roc.effective_snr, 0.0);
    assert!((roc.pd(0.01) - 0.01).abs() < 1e-15);
}
