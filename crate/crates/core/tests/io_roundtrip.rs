use atc_core::io::{load_dump_as, save_dump};
use atc_core::{generate, load_dump, DumpFormat, Error, GeneratorSpec, Shift};

#[test]
fn generate_write_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (k, format) in [(2, DumpFormat::Csv), (7, DumpFormat::Csv), (30, DumpFormat::Json)] {
        let spec = GeneratorSpec::new(k, 400, 0.7, k as u64).with_shift(Shift::temperature(1.7));
        let data = generate(&spec).unwrap();
        let path = dir.path().join(format!("dump{k}"));
        save_dump(&path, &data, format).unwrap();
        for renormalize in [true, false] {
            let back = load_dump_as(&path, format, renormalize).unwrap();
            assert_eq!(back.labels(), data.labels());
            for (a, b) in back.vectors().iter().zip(data.vectors()) {
                for (x, y) in a.components().iter().zip(b.components()) {
                    assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
                }
            }
            assert_eq!(back.predicted_labels(), data.predicted_labels());
        }
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_dump("/nonexistent/dump.csv", true), Err(Error::Io(_))));
}
