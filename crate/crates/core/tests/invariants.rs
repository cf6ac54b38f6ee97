use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use nafd_isac::beamforming::{compute_beams, BeamPolicy, BeamSet};
use nafd_isac::channel::{draw_realization, ChannelSet, FadingParams};
use nafd_isac::comm::{downlink_sinr, uplink_sinr, NumeratorForm, PowerAllocation};
use nafd_isac::dqn::{calibrate_scale, reward};
use nafd_isac::experiments::{Scenario, ScenarioParams};
use nafd_isac::geometry::{make_circle_deployment, ArraySpec, NetworkLayout};
use nafd_isac::moo::{
    crowding_distance, fast_nondominated_sort, gene_loads, repair_genes, Objectives,
};
use nafd_isac::units::wavelength;

fn layout(n: usize, seed: u64) -> NetworkLayout {
    make_circle_deployment(
        8,
        60.0,
        2,
        2,
        90.0,
        ArraySpec::new(n, wavelength(3.5e9)),
        seed,
    )
    .unwrap()
}

/// Large enough estimation errors that the residual terms matter.
fn noisy_fading() -> FadingParams {
    FadingParams {
        sigma2_sp_dl: 1e-9,
        sigma2_sp_ul: 1e-8,
        ..FadingParams::default()
    }
}

fn allocation(m_dl: usize, k_dl: usize, k_ul: usize, shares: &[f64]) -> PowerAllocation {
    let mut a = PowerAllocation::zeros(m_dl, k_dl, 0.7, vec![0.2; k_ul]);
    let mut it = shares.iter().cycle();
    for m in 0..m_dl {
        for i in 0..k_dl {
            a.alpha[m][i] = *it.next().unwrap();
        }
        a.beta[m] = *it.next().unwrap();
    }
    a
}

// Raw-loop transcriptions of the SINR expressions, written against the
// channel and beam containers only.

fn conj_dot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

fn dl_sinr_oracle(
    ch: &ChannelSet,
    bm: &BeamSet,
    a: &PowerAllocation,
    f: &FadingParams,
    l: usize,
    form: NumeratorForm,
) -> f64 {
    let (m_dl, k_dl) = (ch.g_dl.len(), ch.g_dl[0].len());
    let p = a.p_max;
    let stream = |i: usize| -> f64 {
        match form {
            NumeratorForm::Printed => {
                let mut stacked = Complex64::new(0.0, 0.0);
                let mut share = 0.0;
                for m in 0..m_dl {
                    stacked += conj_dot(ch.g_dl[m][l].truth.as_slice(), bm.w_c[m][i].as_slice());
                    share += a.alpha[m][i];
                }
                p * share * stacked.norm_sqr()
            }
            NumeratorForm::Coherent => {
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..m_dl {
                    s += conj_dot(ch.g_dl[m][l].truth.as_slice(), bm.w_c[m][i].as_slice())
                        * (p * a.alpha[m][i]).sqrt();
                }
                s.norm_sqr()
            }
        }
    };
    let mut den = f.sigma2_dl;
    for i in 0..k_dl {
        if i != l {
            den += stream(i);
        }
    }
    for (k, g) in ch.g_t[l].iter().enumerate() {
        den += a.p_ul[k] * g.truth.norm_sqr();
    }
    for m in 0..m_dl {
        den += p
            * a.beta[m]
            * conj_dot(ch.g_dl[m][l].error.as_slice(), bm.w_s[m].as_slice()).norm_sqr();
    }
    stream(l) / den
}

fn ul_sinr_oracle(
    ch: &ChannelSet,
    bm: &BeamSet,
    a: &PowerAllocation,
    f: &FadingParams,
    k: usize,
) -> f64 {
    let n = ch.n_antennas;
    let (m_ul, m_dl, k_ul, k_dl) = (
        ch.g_ul.len(),
        ch.g_dl.len(),
        ch.g_ul[0].len(),
        ch.g_dl[0].len(),
    );
    let v = bm.v[k].as_slice();
    let gain = |user: usize| -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..m_ul {
            for r in 0..n {
                s += v[i * n + r].conj() * ch.g_ul[i][user].truth[r];
            }
        }
        s.norm_sqr()
    };
    // v_kᴴ G̃_{I,m} x, with the inter-RRU error blocks stacked over UL-RRUs.
    let leak = |m: usize, x: &[Complex64]| -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..m_ul {
            let e = &ch.g_i[i][m].error;
            for r in 0..n {
                let mut row = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    row += e[(r, c)] * x[c];
                }
                s += v[i * n + r].conj() * row;
            }
        }
        s
    };
    let p = a.p_max;
    let mut den = f.sigma2_ul * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    for j in 0..k_ul {
        if j != k {
            den += a.p_ul[j] * gain(j);
        }
    }
    for l in 0..k_dl {
        let mut s = Complex64::new(0.0, 0.0);
        for m in 0..m_dl {
            s += leak(m, bm.w_c[m][l].as_slice()) * (p * a.alpha[m][l]).sqrt();
        }
        den += s.norm_sqr();
    }
    for m in 0..m_dl {
        den += p * a.beta[m] * leak(m, bm.w_s[m].as_slice()).norm_sqr();
    }
    a.p_ul[k] * gain(k) / den
}

#[test]
fn sinr_matches_raw_loop_transcription() {
    let fading = noisy_fading();
    for (seed, n) in [(3, 2), (4, 4), (5, 3)] {
        let lay = layout(n, seed);
        let ch = draw_realization(&lay, &fading, 100 + seed).unwrap();
        let bm = compute_beams(&lay, &ch, &BeamPolicy::default()).unwrap();
        let a = allocation(4, 2, 2, &[0.3, 0.1, 0.25, 0.05, 0.4, 0.2]);
        for l in 0..2 {
            for form in [NumeratorForm::Printed, NumeratorForm::Coherent] {
                let got = downlink_sinr(&ch, &bm, &a, &fading, l, form);
                assert_relative_eq!(
                    got,
                    dl_sinr_oracle(&ch, &bm, &a, &fading, l, form),
                    max_relative = 1e-12
                );
            }
        }
        for k in 0..2 {
            let got = uplink_sinr(&ch, &bm, &a, &fading, k);
            assert_relative_eq!(
                got,
                ul_sinr_oracle(&ch, &bm, &a, &fading, k),
                max_relative = 1e-12
            );
        }
    }
}

#[test]
fn reward_examples() {
    let sc = Scenario::new(
        layout(4, 9),
        ScenarioParams {
            trials: 20,
            ..ScenarioParams::default()
        },
    )
    .unwrap();
    let epa = sc.epa_allocation();
    let point = sc.evaluate(&epa).unwrap();
    assert_eq!(reward(&sc, &epa, 0.0).unwrap(), point.f1);

    let mut no_pilot = epa.clone();
    no_pilot.beta.iter_mut().for_each(|b| *b = 0.0);
    let f1 = sc.evaluate(&no_pilot).unwrap().f1;
    assert_eq!(reward(&sc, &no_pilot, 1e20).unwrap(), f1);

    // The calibrated scale weighs both objectives equally at EPA.
    let b = calibrate_scale(&sc).unwrap();
    assert_relative_eq!(b * point.f2, point.f1, max_relative = 1e-9);
    assert_relative_eq!(
        reward(&sc, &epa, b).unwrap(),
        2.0 * point.f1,
        max_relative = 1e-9
    );
}

fn dominance_clean(objs: &[Objectives], fronts: &[Vec<usize>]) -> Result<(), TestCaseError> {
    let mut seen: Vec<usize> = fronts.iter().flatten().copied().collect();
    seen.sort_unstable();
    prop_assert_eq!(seen, (0..objs.len()).collect::<Vec<_>>());
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            for &j in front {
                prop_assert!(!objs[i].dominates(&objs[j]));
            }
            if r > 0 {
                prop_assert!(fronts[r - 1].iter().any(|&j| objs[j].dominates(&objs[i])));
            }
        }
    }
    Ok(())
}

proptest! {
    #[test]
    fn repair_is_feasible_and_idempotent(
        m_dl in 1usize..5,
        k_dl in 0usize..4,
        raw in prop::collection::vec(-0.5f64..1.5, 20),
    ) {
        let mut genes: Vec<f64> = raw.into_iter().take(m_dl * (k_dl + 1)).collect();
        genes.resize(m_dl * (k_dl + 1), 0.3);
        repair_genes(&mut genes, m_dl, k_dl);
        prop_assert!(genes.iter().all(|g| (0.0..=1.0).contains(g)));
        prop_assert!(gene_loads(&genes, m_dl, k_dl).iter().all(|&l| l <= 1.0 + 1e-12));
        let again = {
            let mut g = genes.clone();
            repair_genes(&mut g, m_dl, k_dl);
            g
        };
        prop_assert_eq!(again, genes);
    }

    #[test]
    fn nondominated_sort_is_clean(points in prop::collection::vec((0u8..6, 0u8..6), 0..40)) {
        // Coarse integer grid forces ties and duplicates.
        let objs: Vec<Objectives> = points.iter().map(|&(a, b)| Objectives::new(a as f64, b as f64)).collect();
        let fronts = fast_nondominated_sort(&objs);
        dominance_clean(&objs, &fronts)?;
    }

    #[test]
    fn crowding_is_permutation_invariant(
        points in prop::collection::hash_set((0u32..1000, 0u32..1000), 3..20),
        rotate in 0usize..20,
    ) {
        let objs: Vec<Objectives> = points.iter().map(|&(a, b)| Objectives::new(a as f64, b as f64)).collect();
        let f1s: std::collections::HashSet<_> = points.iter().map(|p| p.0).collect();
        let f2s: std::collections::HashSet<_> = points.iter().map(|p| p.1).collect();
        prop_assume!(f1s.len() == points.len() && f2s.len() == points.len());
        let d = crowding_distance(&objs);
        let r = rotate % objs.len();
        let mut shifted = objs.clone();
        shifted.rotate_left(r);
        let ds = crowding_distance(&shifted);
        for (i, &x) in d.iter().enumerate() {
            let y = ds[(i + objs.len() - r) % objs.len()];
            prop_assert!(x == y || (x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn estimate_plus_error_is_truth(seed in 0u64..1000) {
        let lay = layout(2, 1);
        let ch = draw_realization(&lay, &noisy_fading(), seed).unwrap();
        for link in ch.g_dl.iter().flatten() {
            prop_assert_eq!(&link.truth, &(&link.estimate + &link.error));
        }
        for link in ch.g_i.iter().flatten() {
            prop_assert_eq!(&link.truth, &(&link.estimate + &link.error));
        }
    }

    #[test]
    fn sinr_is_non_negative(seed in 0u64..200, shares in prop::collection::vec(0.0f64..1.0, 6)) {
        let lay = layout(2, 2);
        let fading = noisy_fading();
        let ch = draw_realization(&lay, &fading, seed).unwrap();
        let bm = compute_beams(&lay, &ch, &BeamPolicy::default()).unwrap();
        let a = allocation(4, 2, 2, &shares);
        for l in 0..2 {
            let s = downlink_sinr(&ch, &bm, &a, &fading, l, NumeratorForm::Printed);
            prop_assert!(s >= 0.0 && s.is_finite());
        }
        for k in 0..2 {
            let s = uplink_sinr(&ch, &bm, &a, &fading, k);
            prop_assert!(s >= 0.0 && s.is_finite());
        }
    }
}
