use adcalc::corpus::j_corpus;
use adcalc::dnc::GroupoidSpec;
use adcalc::error::Error;
use adcalc::family::{FamilyClass, NormalGrid, Representation, SampledField};
use adcalc::io::*;
use adcalc::C64;
use std::f64::consts::PI;

fn small_field() -> SampledField {
    SampledField::from_fn(vec![-1.0, 0.0, 1.0], vec![-2.0, -1.0, 0.0, 1.0], vec![0.25, 0.5], |x, u, t| {
        C64::new((x + u * t).sin() / 3.0, (u - x).cos() * t)
    })
}

fn format_msg(r: Result<(u32, SampledField), Error>) -> String {
    match r {
        Err(Error::Format(m)) => m,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn encode_decode_is_bit_exact() {
    let f = small_field();
    let bytes = encode(&f, 1);
    assert_eq!(bytes.len(), 24 + 8 * (3 + 4 + 2) + 16 * 24);
    assert_eq!(&bytes[..4], b"ADKF");
    let (dim, g) = decode(&bytes).unwrap();
    assert_eq!(dim, 1);
    for (a, b) in f.data.iter().zip(&g.data) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
    assert_eq!(f, g);
}

#[test]
fn saved_family_reloads_identically() {
    let line = GroupoidSpec::pair_line(4.0 * PI).unwrap();
    let f = j_corpus()[0].1.build(line, (0.25, 1.0)).unwrap();
    let grid = NormalGrid::uniform_u(vec![-1.0, 0.0, 2.0], 6.0, 32, vec![0.25, 0.5, 1.0]);
    let s = sample_family(&f, &grid).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.adkf");
    save_family(&path, &s).unwrap();
    let back = load_family(&path, 4.0 * PI, Some(FamilyClass::J)).unwrap();
    let (Representation::Sampled(a), Representation::Sampled(b)) = (&s.repr, &back.repr) else { panic!() };
    assert_eq!(a, b);
    assert_eq!(back.claimed_class, Some(FamilyClass::J));
    // the stored samples are φ(x, U, t) of the analytic family
    let an = f.analytic_ref().unwrap();
    assert_eq!(b.at(1, 2, 5), an.phi(2.0, b.us[5], 0.5).unwrap());
    assert!(matches!(save_family(&path, &f), Err(Error::Format(_))));
}

#[test]
fn version_mismatch_is_named() {
    let mut bytes = encode(&small_field(), 1);
    bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
    let m = format_msg(decode(&bytes));
    assert!(m.contains("version 7") && m.contains("version 1"), "{m}");
}

#[test]
fn damaged_buffers_are_rejected() {
    let good = encode(&small_field(), 1);
    assert!(format_msg(decode(&good[..10])).contains("truncated header"));
    assert!(format_msg(decode(&good[..good.len() - 1])).contains("truncated payload"));
    let mut long = good.clone();
    long.push(0);
    assert!(format_msg(decode(&long)).contains("trailing"));
    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(format_msg(decode(&magic)).contains("magic"));
    let mut huge = good.clone();
    huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
    huge[16..20].copy_from_slice(&u32::MAX.to_le_bytes());
    huge[20..24].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(decode(&huge).is_err());
}

#[test]
fn unordered_grid_is_rejected() {
    let mut bytes = encode(&small_field(), 1);
    // swap the first two x nodes
    let (a, b): (Vec<u8>, Vec<u8>) = (bytes[24..32].to_vec(), bytes[32..40].to_vec());
    bytes[24..32].copy_from_slice(&b);
    bytes[32..40].copy_from_slice(&a);
    assert!(format_msg(decode(&bytes)).contains("x-grid"));
}

#[test]
fn summary_json_carries_every_check() {
    let s = Summary::new(
        "gauge-check",
        vec![Check::at_most("unitarity", 1.0 / 3.0, 1e-6), Check::at_least("slope", 7.5, 6.0)],
    );
    assert!(!s.pass);
    let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
    assert_eq!(v["scenario"], "gauge-check");
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"][0]["pass"], false);
    assert_eq!(v["checks"][1]["pass"], true);
    let raw = v["checks"][0]["measured"].to_string();
    assert_eq!(raw.parse::<f64>().unwrap(), 1.0 / 3.0);
    assert_eq!(raw, fmt17(1.0 / 3.0));
}

#[test]
fn csv_uses_seventeen_digits() {
    assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt17(f64::INFINITY), "inf");
    for v in [PI, 1e-300, -2.5e17, 0.1 + 0.2] {
        assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_csv(&path, &["n", "err"], &[vec!["128".into(), fmt17(PI)]]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, format!("n,err\n128,{}\n", fmt17(PI)));
}
