use isoc_vgae::encoder::LayerKind;
use isoc_vgae_py::convert::{layer_kind, tensor_from_rows, tensor_to_rows, train_config};

#[test]
fn rows_round_trip() {
    let rows = vec![vec![1.0, 2.0], vec![3.0, -4.5]];
    let t = tensor_from_rows(&rows).unwrap();
    assert_eq!(t.shape(), (2, 2));
    assert_eq!(t.get(1, 1), -4.5);
    assert_eq!(tensor_to_rows(&t), rows);
}

#[test]
fn ragged_rows_rejected() {
    assert!(tensor_from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
}

#[test]
fn empty_matrix() {
    assert_eq!(tensor_from_rows(&[]).unwrap().shape(), (0, 0));
}

#[test]
fn train_config_from_keywords() {
    let c = train_config("GIN", &[16, 8], 32, 0.1, 1.0, 1e-3, 50, 20, 1e-4, 3).unwrap();
    assert_eq!(c.encoder.layer_kind, LayerKind::Gin);
    assert_eq!(c.encoder.dims, vec![1, 16, 8]);
    assert_eq!((c.decoder_hidden, c.max_epochs, c.seed), (32, 50, 3));
    assert!(train_config("gcn", &[8], 8, -1.0, 1.0, 1e-3, 5, 20, 1e-4, 0).is_err());
    assert!(layer_kind("gat").is_err());
}
