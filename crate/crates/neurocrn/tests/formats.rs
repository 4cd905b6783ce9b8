use std::fs;

use neurocrn::idx::{self, IdxImages};
use neurocrn::network_format::{self, NetworkFile};
use neurocrn::params::ParamsFile;
use neurocrn::Error;
use neurocrn_core::compiler::compile_network;
use neurocrn_core::neural_net::{Activation, Architecture, HardwiredNetwork};
use neurocrn_core::seeded_rng;
use rand::Rng;

fn write_pair(dir: &std::path::Path, images: &IdxImages, labels: &[u8]) {
    let (ip, lp) = idx::training_files(dir);
    fs::write(ip, idx::encode_images(images)).unwrap();
    fs::write(lp, idx::encode_labels(labels)).unwrap();
}

#[test]
fn all_zero_images_load_as_zero_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages {
        count: 3,
        rows: 28,
        cols: 28,
        pixels: vec![0; 3 * 784],
    };
    write_pair(dir.path(), &images, &[1, 7, 9]);
    let (ip, lp) = idx::training_files(dir.path());
    let data = idx::load_idx(&ip, &lp).unwrap();
    assert_eq!((data.len(), data.input_dim()), (3, 784));
    for k in 0..3 {
        assert!(data.image(k).iter().all(|p| *p == 0.0));
    }
    assert_eq!(data.labels(), [1, 7, 9]);
}

#[test]
fn pixels_scale_by_255() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages {
        count: 1,
        rows: 1,
        cols: 3,
        pixels: vec![0, 51, 255],
    };
    write_pair(dir.path(), &images, &[4]);
    let (ip, lp) = idx::training_files(dir.path());
    assert_eq!(idx::load_idx(&ip, &lp).unwrap().image(0), [0.0, 0.2, 1.0]);
}

#[test]
fn labels_with_image_magic_are_rejected_at_offset_zero() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages {
        count: 1,
        rows: 2,
        cols: 2,
        pixels: vec![0; 4],
    };
    write_pair(dir.path(), &images, &[3]);
    let (ip, lp) = idx::training_files(dir.path());
    let mut bytes = fs::read(&lp).unwrap();
    bytes[..4].copy_from_slice(&0x0000_0803u32.to_be_bytes());
    fs::write(&lp, bytes).unwrap();
    match idx::load_idx(&ip, &lp) {
        Err(Error::Idx { offset, .. }) => assert_eq!(offset, 0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn count_mismatch_and_truncation_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let images = IdxImages {
        count: 2,
        rows: 2,
        cols: 2,
        pixels: vec![9; 8],
    };
    write_pair(dir.path(), &images, &[3]);
    let (ip, lp) = idx::training_files(dir.path());
    assert!(matches!(idx::load_idx(&ip, &lp), Err(Error::Idx { offset: 4, .. })));

    write_pair(dir.path(), &images, &[3, 4]);
    let bytes = fs::read(&ip).unwrap();
    fs::write(&ip, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(idx::load_idx(&ip, &lp), Err(Error::Idx { .. })));
}

#[test]
fn compiled_network_survives_both_file_formats() {
    let mut rng = seeded_rng(8);
    for q in [2, 3] {
        let act = if q == 2 {
            Activation::SmoothedRelu { h: 0.7 }
        } else {
            Activation::ImplicitRoot { h: 0.7, q }
        };
        let net = HardwiredNetwork::random(Architecture::new(vec![3, 4, 2]).unwrap(), act, &mut rng).unwrap();
        let mut compiled = compile_network(&net).unwrap();
        compiled.set_input(&[0.2, 0.5, 0.9]).unwrap();
        let file = NetworkFile::from_system(&compiled.system);
        let from_text = network_format::parse_text(&network_format::to_text(&file))
            .unwrap()
            .into_system()
            .unwrap();
        let from_json = network_format::parse_json(&network_format::to_json(&file).unwrap())
            .unwrap()
            .into_system()
            .unwrap();
        for sys in [&from_text, &from_json] {
            assert_eq!(sys.dynamic_order(), compiled.system.dynamic_order());
            assert_eq!(sys.enzymes(), compiled.system.enzymes());
            for _ in 0..10 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..5.0)).collect();
                assert_eq!(sys.rhs(&x).unwrap(), compiled.system.rhs(&x).unwrap());
            }
        }
    }
}

#[test]
fn params_file_rejects_wrong_shapes() {
    let text = r#"{"layer_sizes":[2,2],"activation":{"kind":"smoothed-relu","h":1.0},
                   "weights":[[[1.0,2.0]]],"biases":[[0.0,0.0]]}"#;
    assert!(ParamsFile::from_json(text).unwrap().to_network().is_err());
    assert!(ParamsFile::from_json(&text.replace("layer_sizes", "sizes")).is_err());
}
