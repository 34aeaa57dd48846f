//! Cross-module invariants checked on random inputs.

use hrsnn_core::bayesopt::{matern52, search_distance, SearchSpace};
use hrsnn_core::codec::{decode_bound, rate_decode};
use hrsnn_core::hawkes::{intensity_at, simulate_hawkes, HawkesConfig, HawkesKernels};
use hrsnn_core::network::{simulate, Learning};
use hrsnn_core::pipeline::ReservoirConfig;
use hrsnn_core::plasticity::{stdp_delta, StdpParams};
use hrsnn_core::readout::{predict, ReadoutModel};
use hrsnn_core::SpikeRaster;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_raster(n: usize, bins: usize, dt: f64, bits: &[bool]) -> SpikeRaster {
    let mut r = SpikeRaster::new(n, bins, dt);
    for (k, &b) in bits.iter().enumerate().take(n * bins) {
        r.set(k % n, k / n, b);
    }
    r
}

fn stdp(tau_plus: f64, tau_minus: f64) -> StdpParams {
    StdpParams {
        tau_plus,
        tau_minus,
        eta_plus: 0.5,
        eta_minus: 0.45,
        w_min: 0.0,
        w_max: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Refractory periods, weight bounds and determinism of a learning run.
    #[test]
    fn network_run_contracts(seed in 0u64..1000, n in 20usize..60, bias in 0.0f64..2.0, density in 0.05f64..0.6) {
        let mut cfg = ReservoirConfig::with_size(n);
        cfg.topology.bias_current = bias;
        cfg.topology.n_inputs = 8;
        let net = cfg.build(seed).unwrap();
        let bins = 300;
        let mut input = SpikeRaster::new(8, bins, cfg.dt);
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for c in 0..8 {
            for b in 0..bins {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                input.set(c, b, ((state >> 33) as f64 / (1u64 << 31) as f64) < density);
            }
        }
        let a = simulate(&net, &input, input.duration(), cfg.dt, Learning::On).unwrap();
        let b = simulate(&net, &input, input.duration(), cfg.dt, Learning::On).unwrap();
        prop_assert_eq!(&a.raster, &b.raster);
        prop_assert_eq!(&a.final_weights, &b.final_weights);
        for (w, p) in a.final_weights.iter().zip(&net.stdp) {
            prop_assert!(*w >= p.w_min && *w <= p.w_max);
        }
        for (i, p) in net.neurons.iter().enumerate() {
            let spikes = a.raster.spike_bins(i);
            for pair in spikes.windows(2) {
                prop_assert!((pair[1] - pair[0]) as f64 * cfg.dt > p.t_ref);
            }
        }
    }
}

proptest! {
    #[test]
    fn stdp_magnitude_decays_with_lag(w in 0.01f64..0.99, t1 in 0.0f64..100.0, dt in 0.01f64..100.0,
                                      tp in 1.0f64..50.0, tm in 1.0f64..50.0) {
        let p = stdp(tp, tm);
        let near = stdp_delta(&p, w, t1).unwrap();
        let far = stdp_delta(&p, w, t1 + dt).unwrap();
        prop_assert!(far.abs() < near.abs());
        let near = stdp_delta(&p, w, -t1 - 1e-9).unwrap();
        let far = stdp_delta(&p, w, -t1 - dt).unwrap();
        prop_assert!(far.abs() < near.abs());
    }

    #[test]
    fn clamped_updates_stay_in_bounds(lags in proptest::collection::vec(-200.0f64..200.0, 1..400), w0 in 0.0f64..1.0) {
        let p = stdp(16.8, 33.7);
        let mut w = w0;
        for dt in lags {
            w = p.clamp(w + stdp_delta(&p, w, dt).unwrap());
            prop_assert!((p.w_min..=p.w_max).contains(&w));
        }
    }

    #[test]
    fn decoder_is_columnwise_and_bounded(bits_a in proptest::collection::vec(any::<bool>(), 3 * 80),
                                          bits_b in proptest::collection::vec(any::<bool>(), 2 * 80),
                                          window in 1usize..30, gamma in 0.5f64..0.999) {
        let a = random_raster(3, 80, 1.0, &bits_a);
        let b = random_raster(2, 80, 1.0, &bits_b);
        let joint = rate_decode(&a.stack(&b).unwrap(), window, gamma);
        let da = rate_decode(&a, window, gamma);
        let db = rate_decode(&b, window, gamma);
        prop_assert_eq!(joint.columns(0, 3).into_owned(), da.clone());
        prop_assert_eq!(joint.columns(3, 2).into_owned(), db);
        let bound = decode_bound(window, gamma);
        prop_assert!(joint.iter().all(|v| *v >= 0.0 && *v <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn readout_is_affine(vals in proptest::collection::vec(-3.0f64..3.0, 3 * 4 + 3 + 2 * 4 * 2), alpha in -2.0f64..2.0) {
        let model = ReadoutModel {
            weights: DMatrix::from_row_slice(3, 4, &vals[..12]),
            bias: DVector::from_row_slice(&vals[12..15]),
        };
        let x = DMatrix::from_row_slice(2, 4, &vals[15..23]);
        let z = DMatrix::from_row_slice(2, 4, &vals[23..31]);
        let mix = &x * alpha + &z * (1.0 - alpha);
        let lhs = predict(&model, &mix).unwrap();
        let rhs = predict(&model, &x).unwrap() * alpha + predict(&model, &z).unwrap() * (1.0 - alpha);
        prop_assert!((lhs - rhs).abs().max() < 1e-9);
    }

    #[test]
    fn search_distance_is_a_metric(u in proptest::collection::vec(0.0f64..1.0, 36)) {
        let space = SearchSpace::default();
        let k = space.n_coords();
        let p: Vec<_> = (0..3).map(|i| space.from_unit(&u[i * k..(i + 1) * k])).collect();
        let d = |a: usize, b: usize| search_distance(&space, &p[a], &p[b]).unwrap();
        prop_assert!(d(0, 0).abs() < 1e-9);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_matrix_is_psd(u in proptest::collection::vec(0.0f64..1.0, 12 * 50), n in 2usize..50, ls in 0.05f64..5.0) {
        let space = SearchSpace::default();
        let k = space.n_coords();
        let pts: Vec<_> = (0..n).map(|i| space.from_unit(&u[i * k..(i + 1) * k])).collect();
        let gram = DMatrix::from_fn(n, n, |i, j| matern52(search_distance(&space, &pts[i], &pts[j]).unwrap(), ls, 1.0));
        let min_eig = gram.symmetric_eigenvalues().min();
        prop_assert!(min_eig > -1e-8, "min eigenvalue {}", min_eig);
    }

    /// Intensities are non-negative and inhibition never raises `lambda_A`.
    #[test]
    fn hawkes_inhibition_only_lowers_a(seed in 0u64..1000, t in 0.1f64..20.0) {
        let cfg = HawkesConfig { n_total: 10, ..HawkesConfig::default() };
        let kernels = HawkesKernels::sample(&cfg, seed).unwrap();
        let rec = simulate_hawkes(&cfg, &kernels, 20.0, seed).unwrap();
        let (la, lb) = intensity_at(&cfg, &kernels, &rec, t).unwrap();
        let mut free = kernels.clone();
        for p in free.params[1].iter_mut() {
            p.0 = 0.0;
        }
        let (phi_a, _) = intensity_at(&cfg, &free, &rec, t).unwrap();
        prop_assert!(la >= 0.0 && lb >= 0.0);
        prop_assert!(la <= phi_a + 1e-12);
        let again = simulate_hawkes(&cfg, &kernels, 20.0, seed).unwrap();
        prop_assert_eq!(rec, again);
    }
}
