use palisade_core::archive::{read_field, read_series, write_field, write_series, FieldArchive};
use palisade_core::config::RunConfig;
use palisade_core::forward::solve_forward;
use palisade_core::imaging::{
    decode_raster, encode_pnm, export_pgm, import_raster, perturb, preprocess, to_raster, total_variation,
    PreprocessParams,
};
use palisade_core::synthetic::{noisy, reference_theta, ring_image};
use palisade_core::{Error, Grid2D, ScalarField};

#[test]
fn trajectory_archive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::reference(Grid2D::new(7, 5, 0.1, 0.2).unwrap()).with_time(0.5, 5).unwrap();
    let traj = solve_forward(&reference_theta(cfg.grid, cfg.time), &cfg).unwrap();
    let path = dir.path().join("u1.pfld");
    write_series(&path, &traj.u1).unwrap();
    assert_eq!(read_series(&path).unwrap(), traj.u1);
    let single = dir.path().join("final.pfld");
    write_field(&single, traj.final_u1()).unwrap();
    assert_eq!(&read_field(&single).unwrap(), traj.final_u1());
    let archive = FieldArchive::read(&path).unwrap();
    assert_eq!(archive.slices.len(), 6);
}

#[test]
fn truncated_archive_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.pfld");
    write_field(&path, &ScalarField::constant(Grid2D::square(4, 4, 0.1).unwrap(), 0.5)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_field(&path), Err(Error::Archive(_))));
}

#[test]
fn pgm_export_reimports_as_quantized_field() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid2D::square(9, 6, 0.1).unwrap();
    let field = ScalarField::from_fn(grid, |x, y| (x * 0.9 + y * 0.2).min(1.0));
    let path = dir.path().join("f.pgm");
    export_pgm(&field, &path).unwrap();
    let img = import_raster(&path).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (9, 6, 1));
    assert_eq!(img, to_raster(&field));
    let back = preprocess(&img, &PreprocessParams { threshold: Some(0), gaussian_kernel: 1, median_kernel: 1, open_radius: 0, ..Default::default() }, (0.1, 0.1)).unwrap();
    for (a, b) in back.values().iter().zip(field.values()) {
        assert!((a - (1.0 - b)).abs() <= 0.5 / 255.0 + 1e-12 || *a == 1.0);
    }
}

#[test]
fn raster_bytes_round_trip() {
    let img = ring_image(24, 4);
    assert_eq!(decode_raster(&encode_pnm(&img).unwrap()).unwrap(), img);
    assert!(matches!(decode_raster(b"not an image"), Err(Error::Image(_))));
}

#[test]
fn stronger_perturbation_is_smoother() {
    let grid = Grid2D::square(48, 48, 0.05).unwrap();
    let base = ScalarField::from_fn(grid, |x, y| 0.5 + 0.3 * (4.0 * x).sin() * (3.0 * y).cos());
    let rough = noisy(&base, 0.1, 12);
    let tv: Vec<f64> = [0.2, 0.6, 1.0, 2.0].iter().map(|&s| total_variation(&perturb(&rough, 5, s, 1).unwrap())).collect();
    assert!(tv.windows(2).all(|w| w[1] < w[0]), "{tv:?}");
    let coarse = perturb(&rough, 5, 1.0, 2).unwrap();
    assert_eq!((coarse.grid().nx(), coarse.grid().hx()), (24, 0.1));
}
