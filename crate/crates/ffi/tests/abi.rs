use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use candle_core::{DType, Device};
use mccsod::checkpoint;
use mccsod::data::{edge_ground_truth, EdgeConfig};
use mccsod::metrics::{evaluate_directory, evaluate_pair, EvalOptions};
use mccsod::synthetic::{scene, write_dataset};
use mccsod::{Network, NetworkConfig};
use mccsod_ffi::*;
use ndarray::Array2;

fn last_error() -> String {
    let p = mccsod_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn saved_model(dir: &Path) -> (Network, std::path::PathBuf) {
    let net = Network::new(
        NetworkConfig::surrogate([4, 4, 8, 8, 8], 32),
        DType::F32,
        &Device::Cpu,
        11,
    )
    .unwrap();
    let path = dir.join("model.safetensors");
    checkpoint::save(&path, &net, None, 0, 0).unwrap();
    (net, path)
}

fn interleave(chw: &ndarray::Array3<f32>) -> Vec<f32> {
    let (_, h, w) = chw.dim();
    (0..h * w * 3)
        .map(|k| chw[[k % 3, k / 3 / w, k / 3 % w]])
        .collect()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mccsod_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_handle_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (net, path) = saved_model(tmp.path());
    let mut model = ptr::null_mut();
    let path = c_path(&path);
    assert_eq!(
        unsafe { mccsod_model_load(path.as_ptr(), &mut model) },
        MccsodStatus::Ok
    );
    assert!(!model.is_null());

    let mut size = 0usize;
    assert_eq!(
        unsafe { mccsod_model_input_size(model, &mut size) },
        MccsodStatus::Ok
    );
    assert_eq!(size, 32);
    let mut count = 0usize;
    assert_eq!(
        unsafe { mccsod_model_parameter_count(model, &mut count) },
        MccsodStatus::Ok
    );
    assert_eq!(count, net.parameter_count());

    let (rgb, _) = scene(3, 40);
    let (h, w) = (24, 40);
    let rgb = rgb.slice(ndarray::s![.., ..h, ..]).to_owned();
    let mut out = vec![0f32; h * w];
    let src = interleave(&rgb);
    let st = unsafe { mccsod_model_predict(model, src.as_ptr(), h, w, out.as_mut_ptr()) };
    assert_eq!(st, MccsodStatus::Ok);
    let want = net.predict(&rgb).unwrap();
    assert_eq!(out, want.iter().copied().collect::<Vec<_>>());

    let st = unsafe { mccsod_model_predict(model, src.as_ptr(), 0, w, out.as_mut_ptr()) };
    assert_eq!(st, MccsodStatus::Dimension);
    unsafe { mccsod_model_free(model) };
    unsafe { mccsod_model_free(ptr::null_mut()) };
}

#[test]
fn bad_checkpoint_paths_are_state_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = c_path(&tmp.path().join("absent.safetensors"));
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { mccsod_model_load(missing.as_ptr(), &mut model) },
        MccsodStatus::State
    );
    assert!(model.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_reported() {
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { mccsod_model_load(ptr::null(), &mut model) },
        MccsodStatus::NullPointer
    );
    assert!(last_error().contains("path"));
    let mut m = MccsodMetrics::default();
    let g = [0f32; 4];
    assert_eq!(
        unsafe { mccsod_evaluate_pair(ptr::null(), g.as_ptr(), 2, 2, &mut m) },
        MccsodStatus::NullPointer
    );
    assert!(last_error().contains("pred"));
    assert_eq!(
        unsafe { mccsod_evaluate_pair(g.as_ptr(), g.as_ptr(), 2, 2, ptr::null_mut()) },
        MccsodStatus::NullPointer
    );
    let mut size = 0;
    assert_eq!(
        unsafe { mccsod_model_input_size(ptr::null(), &mut size) },
        MccsodStatus::NullPointer
    );
}

#[test]
fn pair_metrics_and_curve_match_the_library() {
    let (rgb, mask) = scene(5, 24);
    let pred: Array2<f32> = rgb.index_axis(ndarray::Axis(0), 1).to_owned();
    let p: Vec<f32> = pred.iter().copied().collect();
    let g: Vec<f32> = mask.iter().copied().collect();
    let lib = evaluate_pair(&pred.view(), &mask.view()).unwrap();

    let mut m = MccsodMetrics::default();
    assert_eq!(
        unsafe { mccsod_evaluate_pair(p.as_ptr(), g.as_ptr(), 24, 24, &mut m) },
        MccsodStatus::Ok
    );
    assert_eq!(m.n_images, 1);
    assert_eq!(
        [m.s_alpha, m.f_max, m.f_mean, m.f_adp, m.e_max, m.e_mean, m.e_adp, m.mae],
        [
            lib.s_alpha,
            lib.f_max,
            lib.f_mean,
            lib.f_adp,
            lib.e_max,
            lib.e_mean,
            lib.e_adp,
            lib.mae
        ]
    );

    let mut pr = vec![0f64; 256];
    let mut rc = vec![0f64; 256];
    let st = unsafe {
        mccsod_pr_curve(
            p.as_ptr(),
            g.as_ptr(),
            24,
            24,
            pr.as_mut_ptr(),
            rc.as_mut_ptr(),
        )
    };
    assert_eq!(st, MccsodStatus::Ok);
    assert_eq!(pr, lib.precision);
    assert_eq!(rc, lib.recall);
}

#[test]
fn directory_evaluation_matches_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), "test", 3, 24, 8).unwrap();
    let img = tmp.path().join("test").join("GT");
    let lib = evaluate_directory(&img, &img, &EvalOptions::default())
        .unwrap()
        .report;
    let mut m = MccsodMetrics::default();
    let d = c_path(&img);
    assert_eq!(
        unsafe { mccsod_evaluate_directory(d.as_ptr(), d.as_ptr(), &mut m) },
        MccsodStatus::Ok
    );
    assert_eq!(m.n_images, 3);
    assert_eq!(
        (m.s_alpha, m.f_max, m.mae),
        (lib.s_alpha, lib.f_max, lib.mae)
    );

    let other = c_path(&tmp.path().join("test").join("image"));
    std::fs::remove_file(tmp.path().join("test").join("image").join("0002.png")).unwrap();
    assert_eq!(
        unsafe { mccsod_evaluate_directory(other.as_ptr(), d.as_ptr(), &mut m) },
        MccsodStatus::Data
    );
    assert!(last_error().contains("0002"));
}

#[test]
fn edge_masks_match_the_library() {
    let (_, mask) = scene(9, 20);
    let src: Vec<f32> = mask.iter().copied().collect();
    let mut out = vec![0f32; 400];
    for width in 1..4 {
        let st = unsafe { mccsod_edge_ground_truth(src.as_ptr(), 20, 20, width, out.as_mut_ptr()) };
        assert_eq!(st, MccsodStatus::Ok);
        let cfg = EdgeConfig {
            width,
            ..EdgeConfig::default()
        };
        assert_eq!(
            out,
            edge_ground_truth(&mask, &cfg)
                .iter()
                .copied()
                .collect::<Vec<_>>()
        );
    }
    let st = unsafe { mccsod_edge_ground_truth(src.as_ptr(), 20, 20, 0, out.as_mut_ptr()) };
    assert_eq!(st, MccsodStatus::InvalidArgument);
}

#[test]
fn loss_terms_of_a_uniform_map() {
    let s = [0.5f32; 16];
    let g = [1.0f32; 16];
    let mut t = MccsodLossTerms::default();
    assert_eq!(
        unsafe { mccsod_saliency_loss_terms(s.as_ptr(), g.as_ptr(), 4, 4, &mut t) },
        MccsodStatus::Ok
    );
    assert!((t.bce - 2f64.ln()).abs() < 1e-6, "{}", t.bce);
    assert!((t.iou - 0.5).abs() < 1e-6);
    assert!((t.fm - 0.1875).abs() < 1e-6);
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mccsod.h"))
            .unwrap();
    for f in [
        "mccsod_version",
        "mccsod_last_error",
        "mccsod_model_load",
        "mccsod_model_free",
        "mccsod_model_input_size",
        "mccsod_model_parameter_count",
        "mccsod_model_predict",
        "mccsod_evaluate_pair",
        "mccsod_pr_curve",
        "mccsod_evaluate_directory",
        "mccsod_edge_ground_truth",
        "mccsod_saliency_loss_terms",
        "typedef struct MccsodModel MccsodModel",
    ] {
        assert!(header.contains(f), "{f}");
    }
}
