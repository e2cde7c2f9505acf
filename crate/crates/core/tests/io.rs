use proptest::prelude::*;
use qha_lab::gap_criteria::{wigner_ball_verdict, GapRow};
use qha_lab::io::*;
use qha_lab::phase_space::{GridModel, Region, Signal};
use qha_lab::qha;
use qha_lab::windows::{self, Structure};
use qha_lab::LabError;

#[test]
fn signal_json_schema_and_round_trip() {
    let grid = GridModel::exact(8).unwrap();
    let f = Signal::random(grid, 3).unwrap();
    let text = to_json(&SignalRecord::from(&f)).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["n"], 8);
    assert_eq!(value["mode"], "exact");
    assert_eq!(value["data"].as_array().unwrap().len(), 8);
    let back = read_signal(text.as_bytes()).unwrap();
    assert_eq!(back, f);
    assert!(back
        .data()
        .iter()
        .zip(f.data())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
}

#[test]
fn region_json_round_trip_and_default_mode() {
    let grid = GridModel::continuum(16).unwrap();
    let region = Region::ball(grid, (0.2, -0.1), 0.8).unwrap();
    let text = to_json(&RegionRecord::from(&region)).unwrap();
    assert_eq!(read_region(text.as_bytes()).unwrap(), region);
    let mask: Vec<bool> = (0..16).map(|i| i == 5).collect();
    let loaded = read_region(
        format!(
            r#"{{"n": 4, "mask": {}}}"#,
            serde_json::to_string(&mask).unwrap()
        )
        .as_bytes(),
    )
    .unwrap();
    assert!(loaded.grid().is_continuum());
    assert_eq!(loaded.count(), 1);
}

#[test]
fn operator_json_round_trip_keeps_structure_and_flags() {
    let grid = GridModel::continuum(16).unwrap();
    for window in [
        windows::wigner(grid),
        windows::identity_minus_gaussian(grid).unwrap(),
        windows::born_jordan(grid, windows::BornJordanMethod::SincSymbol).unwrap(),
    ] {
        let record = OperatorRecord::from(&window);
        let text = to_json(&record).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["structure"], window.structure().as_str());
        assert_eq!(value["matrix"][0][0].as_array().unwrap().len(), 2);
        let back = read_window(text.as_bytes()).unwrap();
        assert_eq!(back.structure(), window.structure());
        assert_eq!(back.flags(), window.flags());
        assert_eq!(back.operator().matrix(), window.operator().matrix());
    }
}

#[test]
fn operator_json_rejects_ragged_matrix() {
    let text = r#"{"n": 4, "mode": "exact", "matrix": [[[1,0]]], "structure": "custom"}"#;
    assert!(matches!(
        read_window(text.as_bytes()),
        Err(LabError::DimensionMismatch(_))
    ));
}

#[test]
fn phase_csv_round_trip() {
    let grid = GridModel::exact(8).unwrap();
    let f = Signal::random(grid, 9).unwrap();
    let q = qha::ambiguity(&f);
    let mut buf = Vec::new();
    write_phase_csv(&q, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("m,k,re,im\n0,0,"));
    assert_eq!(text.lines().count(), 65);
    assert_eq!(read_phase_csv(grid, buf.as_slice()).unwrap(), q);
    let short = "m,k,re,im\n0,0,1,0\n";
    assert!(read_phase_csv(grid, short.as_bytes()).is_err());
}

#[test]
fn gap_csv_columns() {
    let rows: Vec<GapRow> = [0.5, 1.0]
        .iter()
        .map(|&r| GapRow::from(&wigner_ball_verdict(1, 2.0, r).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_gap_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("d,p,R,x,A_d,F_d,C_p^p,verdict"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",certified-gap")));
}

#[test]
fn window_specs_build() {
    let grid = GridModel::continuum(32).unwrap();
    let spec: WindowSpec = parse(
        r#"{"kind": "rank-one", "g": {"kind": "gaussian"}, "h": {"kind": "hermite", "j": 1}}"#,
    );
    assert_eq!(spec.build(grid).unwrap().structure(), Structure::RankOne);
    let spec: WindowSpec = parse(
        r#"{"kind": "identity-plus", "c": 2.0, "weights": [1.0], "signals": [{"kind": "gaussian", "lambda": 1.5}]}"#,
    );
    let w = spec.build(grid).unwrap();
    assert_eq!(w.structure(), Structure::IdentityPlus);
    assert!(w.flags().positive);
    let zero: WindowSpec = parse(r#"{"kind": "zero"}"#);
    assert!(zero.build(grid).unwrap().is_zero());
    let bad = serde_json::from_str::<WindowSpec>(r#"{"kind": "wigner", "tau": 0.3}"#);
    assert!(bad.is_err());
    let exact = GridModel::exact(8).unwrap();
    let err = parse::<WindowSpec>(r#"{"kind": "born-jordan"}"#)
        .build(exact)
        .unwrap_err();
    assert_eq!(err.to_string(), "continuum emulation required");
}

#[test]
fn region_source_accepts_specs_and_files() {
    let grid = GridModel::continuum(16).unwrap();
    let spec: RegionSource = parse(r#"{"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}"#);
    let region = spec.build(grid).unwrap();
    let dir = std::env::temp_dir().join(format!("qha-lab-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("region.json");
    write_json(
        &RegionRecord::from(&region),
        std::fs::File::create(&path).unwrap(),
    )
    .unwrap();
    let from_file: RegionSource = parse(&format!(r#"{{"path": {:?}}}"#, path.to_str().unwrap()));
    assert_eq!(from_file.build(grid).unwrap(), region);
    std::fs::remove_dir_all(&dir).unwrap();
}

fn parse<T: for<'de> serde::Deserialize<'de>>(text: &str) -> T {
    serde_json::from_str(text).unwrap()
}

proptest! {
    #[test]
    fn signals_reload_bit_identically(seed in 0u64..10_000, n in prop::sample::select(vec![4usize, 8, 16, 64])) {
        let grid = GridModel::continuum(n).unwrap();
        let f = Signal::random(grid, seed).unwrap().scaled(num_complex::Complex64::new(1e-7, 3.3e5));
        let text = to_json(&SignalRecord::from(&f)).unwrap();
        let back = read_signal(text.as_bytes()).unwrap();
        for (a, b) in back.data().iter().zip(f.data()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn operators_reload_bit_identically(seed in 0u64..10_000) {
        let grid = GridModel::exact(8).unwrap();
        let g = Signal::random(grid, seed).unwrap();
        let h = Signal::random(grid, seed + 1).unwrap();
        let w = windows::rank_one(&g, &h).unwrap();
        let back = read_window(to_json(&OperatorRecord::from(&w)).unwrap().as_bytes()).unwrap();
        for (a, b) in back.operator().matrix().iter().zip(w.operator().matrix().iter()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
