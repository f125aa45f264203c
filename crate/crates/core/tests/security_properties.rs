//! Weight leakage, sweeps and multiparty scaling.

use qsmc_core::engine::ProtocolParams;
use qsmc_core::gaussian::Gain;
use qsmc_core::security::*;

fn chi(mu: f64, eta: f64) -> f64 {
    holevo_weight_leakage(&HolevoInputs::new(mu, eta)).unwrap()
}

#[test]
fn holevo_vanishes_without_excess_noise() {
    for mu in [0.1, 1.0, 4.0, 100.0] {
        assert!(chi(mu, 0.0).abs() < 1e-9, "mu={mu}");
    }
}

#[test]
fn holevo_monotone_in_eta_and_mu() {
    let etas = [0.001, 0.01, 0.1, 0.5, 1.0];
    let mus = [0.5, 2.0, 4.0, 16.0, 64.0];
    for &mu in &mus {
        let row: Vec<f64> = etas.iter().map(|&e| chi(mu, e)).collect();
        assert!(row.windows(2).all(|w| w[1] > w[0]), "mu={mu}: {row:?}");
    }
    for &eta in &etas {
        let col: Vec<f64> = mus.iter().map(|&m| chi(m, eta)).collect();
        assert!(col.windows(2).all(|w| w[1] > w[0]), "eta={eta}: {col:?}");
    }
}

#[test]
fn operating_point() {
    assert!((chi(4.0, 0.0034) - 0.110_687_432_631_312_64).abs() < 1e-12);
}

#[test]
fn alternative_formulation_frozen_values() {
    let mt = |eta: f64| {
        holevo_weight_leakage(&HolevoInputs::new(4.0, eta).with_formulation(Formulation::MainText))
            .unwrap()
    };
    assert!((mt(0.0) - 2.708_28).abs() < 1e-5);
    assert!((mt(0.0034) - 2.711_624_829_223_093).abs() < 1e-12);
    assert!((mt(0.01) - 2.718_064_537_542_079).abs() < 1e-12);
}

#[test]
fn closed_form_and_matrix_routes_agree() {
    for &(mu, eta, t) in &[
        (4.0, 0.0034, 1.0),
        (1.0, 0.3, 0.5),
        (20.0, 1.0, 0.1),
        (0.5, 0.01, 0.9),
    ] {
        let inputs = HolevoInputs::new(mu, eta).with_transmittance(t);
        let a = holevo_weight_leakage(&inputs).unwrap();
        let b = holevo_weight_leakage_matrix(&inputs).unwrap();
        assert!((a - b).abs() < 1e-8, "{mu} {eta} {t}: {a} vs {b}");
    }
}

#[test]
fn classical_never_exceeds_quantum_leakage() {
    for g in [1.1, 2.0, 3.0, 10.0] {
        let p = ProtocolParams::new(4.0, Gain::new(g).unwrap());
        for power in [1.0 / 784.0, 0.01, 0.3] {
            let r = leakage_report(&p, power, 784, Formulation::Methods).unwrap();
            assert!(r.data_bits_per_symbol_quantum >= r.data_bits_per_symbol_classical);
        }
    }
}

#[test]
fn width_sweep_shrinks_weight_leakage() {
    let reports = width_sweep(
        &[16, 64, 256, 784, 1024],
        &ProtocolParams::default(),
        Formulation::Methods,
    )
    .unwrap();
    let w: Vec<f64> = reports.iter().map(|r| r.weight_bits_per_symbol).collect();
    assert!(w.windows(2).all(|p| p[1] < p[0]), "{w:?}");
    let direct = leakage_report(
        &ProtocolParams {
            modes: 784,
            ..ProtocolParams::default()
        },
        1.0 / 784.0,
        784,
        Formulation::Methods,
    )
    .unwrap();
    assert_eq!(reports[3], direct);
    assert!(width_sweep(&[1], &ProtocolParams::default(), Formulation::Methods).is_err());
}

#[test]
fn loss_sweep_keeps_data_leakage_fixed() {
    let p = ProtocolParams::default();
    let f = p.physical_scaling();
    let losses: Vec<f64> = (0..=10).map(|i| i as f64 * 2.0).collect();
    let pts = loss_sweep(&losses, &p, f, 1.0 / 392.0, 784, Formulation::Methods, 1e9).unwrap();
    let x0 = pts[0].report.data_bits_per_symbol_quantum;
    for w in pts.windows(2) {
        assert!(w[1].report.weight_bits_per_symbol > w[0].report.weight_bits_per_symbol);
    }
    for pt in &pts {
        assert!((pt.report.data_bits_per_symbol_quantum - x0).abs() < 1e-12);
        assert!((pt.report.physical_scaling() - f).abs() < 1e-9);
    }
    let six = &pts[3].report;
    assert!((six.params.mu - 7.981_05).abs() < 1e-4, "{}", six.params.mu);
    assert!((six.weight_bits_per_symbol - 4.140_941_456_797_835).abs() < 1e-9);
}

#[test]
fn more_clients_leak_more_weight() {
    let s = multiparty_adjust(2, Topology::Symmetric).unwrap();
    assert_eq!(s.eta_scale, 2.0);
    assert_eq!(
        multiparty_adjust(1, Topology::Asymmetric).unwrap(),
        MultipartyScaling {
            snr_scale: 1.0,
            eta_scale: 1.0
        }
    );
    assert!(multiparty_adjust(0, Topology::Symmetric).is_err());
    let eta = 0.0034;
    assert!(chi(4.0, s.eta_scale * eta) > chi(4.0, eta));
}

#[test]
fn sweep_csv_round_trip() {
    let p = ProtocolParams::default();
    let rows: Vec<SweepRow> = width_sweep(&[16, 64], &p, Formulation::Methods)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, r)| SweepRow::from_report(0.0, r, if i == 0 { Some(0.9) } else { None }))
        .collect();
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
}
