use lal_core::data::{banana, gaussian_clouds, load_csv};
use lal_core::forest::{predict_logistic, train_forest, train_logistic, ForestConfig};
use lal_core::metrics::hard_label;
use lal_core::Error;

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clouds.csv");
    let d = gaussian_clouds(300, 0.5, 2.0, 3, 9).unwrap();
    d.write_csv(&path).unwrap();
    let back = load_csv(&path, "label").unwrap();
    assert_eq!(back.dim(), 3);
    assert_eq!(back.labels(), d.labels());
    assert_eq!(back.features(), d.features());
}

#[test]
fn small_csv_and_bad_label_row() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.csv");
    std::fs::write(&ok, "f0,f1,label\n0.5,1,0\n2,3,1\n-1,4.5,1\n").unwrap();
    let d = load_csv(&ok, "label").unwrap();
    assert_eq!((d.len(), d.dim()), (3, 2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "f0,label\n1,0\n2,1\n3,0\n4,1\n5,2\n").unwrap();
    match load_csv(&bad, "label") {
        Err(Error::CsvCell { row, column, .. }) => {
            assert_eq!(row, 5);
            assert_eq!(column, "label");
        }
        other => panic!("expected a cell error, got {other:?}"),
    }
    assert!(load_csv(dir.path().join("missing.csv"), "label").is_err());
}

#[test]
fn gaussian_class_means_converge() {
    let d = gaussian_clouds(100_000, 0.5, 2.0, 2, 4).unwrap();
    let mut sums = [[0.0; 2]; 2];
    let counts = d.class_counts();
    for (x, &l) in d.rows().zip(d.labels()) {
        sums[l as usize][0] += x[0];
        sums[l as usize][1] += x[1];
    }
    let expected = [[-1.0, 0.0], [1.0, 0.0]];
    for c in 0..2 {
        for j in 0..2 {
            let mean = sums[c][j] / counts[c] as f64;
            assert!(
                (mean - expected[c][j]).abs() < 0.02,
                "class {c} axis {j}: {mean}"
            );
        }
    }
}

fn held_out(correct: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for c in correct {
        hit += usize::from(c);
        n += 1;
    }
    hit as f64 / n as f64
}

#[test]
fn banana_is_not_linearly_separable() {
    let train = banana(500, 0.15, 1).unwrap();
    let test = banana(2000, 0.15, 2).unwrap();

    let linear = train_logistic(train.features(), 2, train.labels(), 0.5, 2000).unwrap();
    let lin_acc = held_out(
        test.rows()
            .zip(test.labels())
            .map(|(x, &l)| u8::from(predict_logistic(&linear, x) > 0.5) == l),
    );

    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
    let forest = train_forest(train.features(), 2, &y, &ForestConfig::classifier(), 3).unwrap();
    let forest_acc = held_out(
        test.rows()
            .zip(test.labels())
            .map(|(x, &l)| hard_label(forest.predict_proba(x)) == l),
    );
    assert!(lin_acc < 0.95, "linear {lin_acc}");
    assert!(forest_acc > 0.95, "forest {forest_acc}");
}
