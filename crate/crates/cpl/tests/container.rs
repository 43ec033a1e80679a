use cpl::container::{decode, decode_header, encode, load_any, load_csv, save_container, save_csv, HEADER_LEN};
use cpl::error::IoError;
use cpl_core::{ContainerKind, DataContainer};
use proptest::prelude::*;

fn container_strategy() -> impl Strategy<Value = DataContainer> {
    (1usize..6, 0usize..12, any::<bool>(), any::<bool>()).prop_flat_map(|(c, n, logits, named)| {
        let d = if logits { c } else { c + 1 };
        (
            prop::collection::vec(-1e6f32..1e6, n * d),
            prop::collection::vec(prop::option::of(0..c), n),
        )
            .prop_map(move |(values, labels)| {
                let kind = if logits {
                    ContainerKind::Logits
                } else {
                    ContainerKind::Features
                };
                let names = named.then(|| (0..c).map(|k| format!("class {k}")).collect());
                let rows = values.into_iter().map(f64::from).collect();
                DataContainer::new(kind, d, c, rows, labels, names).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn binary_round_trip(container in container_strategy()) {
        let bytes = encode(&container).unwrap();
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &container);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_rejected(container in container_strategy()) {
        let bytes = encode(&container).unwrap();
        let has_sidecar = container.class_names().is_some();
        let payload_end = HEADER_LEN + decode_header(&bytes).unwrap().payload_len().unwrap() as usize;
        for cut in 0..bytes.len() {
            match decode(&bytes[..cut]) {
                Err(IoError::Format { .. }) => {}
                // the class-name sidecar is optional, so dropping it whole is fine
                Ok(back) => {
                    prop_assert!(has_sidecar && cut == payload_end, "accepted a {cut}-byte prefix of {}", bytes.len());
                    prop_assert_eq!(back.rows(), container.rows());
                }
                Err(e) => prop_assert!(has_sidecar, "unexpected error {e}"),
            }
        }
    }
}

#[test]
fn truncated_header_reports_its_length() {
    let c = DataContainer::new(
        ContainerKind::Features,
        2,
        2,
        vec![1.0, 2.0, 3.0, 4.0],
        vec![Some(0), Some(1)],
        None,
    )
    .unwrap();
    let bytes = encode(&c).unwrap();
    match decode(&bytes[..HEADER_LEN - 3]) {
        Err(IoError::Format { offset, .. }) => assert_eq!(offset, (HEADER_LEN - 3) as u64),
        other => panic!("{other:?}"),
    }
    match decode(&bytes[..HEADER_LEN + 5]) {
        Err(IoError::Format { offset, .. }) => assert_eq!(offset, (HEADER_LEN + 5) as u64),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let c = DataContainer::new(
        ContainerKind::Features,
        3,
        2,
        vec![0.5, -1.0, 2.25, 3.0, 0.0, -0.125, 1.5, 1.5, 1.5],
        vec![Some(1), None, Some(0)],
        None,
    )
    .unwrap();
    save_container(&c, dir.path().join("a.cple")).unwrap();
    save_csv(&c, dir.path().join("a.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("f0,f1,f2,label"));
    assert!(text.lines().nth(2).unwrap().ends_with(",-1"));
    let from_csv = load_any(dir.path().join("a.csv"), ContainerKind::Features, Some(2)).unwrap();
    let from_bin = load_any(dir.path().join("a.cple"), ContainerKind::Features, None).unwrap();
    assert_eq!(from_csv, from_bin);
}

#[test]
fn csv_rejects_bad_headers_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,label\n1,2,0\n").unwrap();
    assert!(matches!(
        load_csv(&path, ContainerKind::Features, None),
        Err(IoError::Csv { line: 1, .. })
    ));
    std::fs::write(&path, "f0,f1,label\n1,2,0\n1,x,1\n").unwrap();
    assert!(load_csv(&path, ContainerKind::Features, None).is_err());
    std::fs::write(&path, "f0,f1,label\n1,2,5\n").unwrap();
    assert!(load_csv(&path, ContainerKind::Features, Some(2)).is_err());
}
