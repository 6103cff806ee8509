use std::ffi::{c_char, CString};
use std::process::Command;
use std::ptr;

use dkf::bench::{FilterKind, FittedFilter};
use dkf::filters::dkf_update;
use dkf::regression::LearnerOptions;
use dkf::statespace::{generate_synthetic2, GaussianBelief, LinearGaussianDynamics};
use dkf::RandomSource;
use dkf_ffi::*;
use nalgebra::{DMatrix, DVector};

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let len = unsafe { dkf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn dynamics_and_step_match_library() {
    let a = [0.9, 0.1, 0.0, 0.5];
    let gamma = [1.0, 0.2, 0.2, 0.5];
    let mut h: *mut DkfDynamics = ptr::null_mut();
    assert_eq!(unsafe { dkf_dynamics_new(a.as_ptr(), gamma.as_ptr(), 2, &mut h) }, DkfStatus::Ok);
    assert_eq!(unsafe { dkf_dynamics_dim(h) }, 2);

    let lib = LinearGaussianDynamics::new(DMatrix::from_row_slice(2, 2, &a), DMatrix::from_row_slice(2, 2, &gamma)).unwrap();
    let mut s = [0.0; 4];
    assert_eq!(unsafe { dkf_dynamics_stationary_covariance(h, s.as_mut_ptr()) }, DkfStatus::Ok);
    assert_eq!(DMatrix::from_row_slice(2, 2, &s), *lib.stationary_covariance());

    let mean = [0.3, -0.2];
    let cov = [1.0, 0.1, 0.1, 0.8];
    let f = [1.0, 0.5];
    let q = [0.4, 0.0, 0.0, 0.3];
    let (mut m_out, mut c_out) = ([0.0; 2], [0.0; 4]);
    let status = unsafe {
        dkf_step_discriminative(h, mean.as_ptr(), cov.as_ptr(), f.as_ptr(), q.as_ptr(), 1, m_out.as_mut_ptr(), c_out.as_mut_ptr())
    };
    assert_eq!(status, DkfStatus::Ok);
    let belief = GaussianBelief::new(DVector::from_column_slice(&mean), DMatrix::from_row_slice(2, 2, &cov)).unwrap();
    let expected = dkf_update(
        &belief,
        &DVector::from_column_slice(&f),
        &DMatrix::from_row_slice(2, 2, &q),
        &lib,
        dkf::filters::PosteriorPolicy::Strict,
    )
    .unwrap();
    assert_eq!(m_out, expected.belief.mean().as_slice());
    assert_eq!(DMatrix::from_row_slice(2, 2, &c_out), *expected.belief.covariance());
    unsafe { dkf_dynamics_free(h) };
}

#[test]
fn error_codes_and_messages() {
    let mut h: *mut DkfDynamics = ptr::null_mut();
    let unstable = [1.5];
    let one = [1.0];
    assert_eq!(unsafe { dkf_dynamics_new(unstable.as_ptr(), one.as_ptr(), 1, &mut h) }, DkfStatus::Numerical);
    assert!(last_error().contains("spectral radius"), "{}", last_error());
    assert!(h.is_null());
    assert_eq!(unsafe { dkf_dynamics_new(ptr::null(), one.as_ptr(), 1, &mut h) }, DkfStatus::NullPointer);
    assert_eq!(unsafe { dkf_dynamics_new(one.as_ptr(), one.as_ptr(), 0, &mut h) }, DkfStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/model.json").unwrap();
    let mut model: *mut DkfModel = ptr::null_mut();
    assert_eq!(unsafe { dkf_model_load(missing.as_ptr(), &mut model) }, DkfStatus::Io);

    let flat = [1.0, 1.0];
    let mut out = 0.0;
    assert_eq!(unsafe { dkf_normalized_mse(flat.as_ptr(), flat.as_ptr(), 2, 1, &mut out) }, DkfStatus::InvalidArgument);
    let truth = [0.0, 2.0];
    assert_eq!(unsafe { dkf_normalized_mse(flat.as_ptr(), truth.as_ptr(), 2, 1, &mut out) }, DkfStatus::Ok);
    assert_eq!(out, 1.0);
    assert_eq!(last_error(), "");

    // freeing NULL is allowed
    unsafe {
        dkf_dynamics_free(ptr::null_mut());
        dkf_model_free(ptr::null_mut());
        dkf_filter_free(ptr::null_mut());
    }
}

#[test]
fn model_file_filtering_matches_library() {
    let ds = generate_synthetic2(200, &mut RandomSource::new(4)).unwrap();
    let mut learners = LearnerOptions::default();
    learners.mlp.max_epochs = 200;
    let fitted = FittedFilter::fit(FilterKind::Dkf(dkf::regression::DkfVariant::Nn), &ds, &learners, &mut RandomSource::new(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    fitted.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model: *mut DkfModel = ptr::null_mut();
    assert_eq!(unsafe { dkf_model_load(c_path.as_ptr(), &mut model) }, DkfStatus::Ok);
    assert_eq!(unsafe { (dkf_model_state_dim(model), dkf_model_observation_dim(model)) }, (1, 2));
    let mut filter: *mut DkfFilter = ptr::null_mut();
    assert_eq!(unsafe { dkf_filter_new(model, &mut filter) }, DkfStatus::Ok);
    unsafe { dkf_model_free(model) };

    let xs = &ds.test_observations()[..30];
    let expected = fitted.run(xs).unwrap();
    for (x, b) in xs.iter().zip(&expected.beliefs) {
        let (mut mean, mut cov) = ([0.0], [0.0]);
        assert_eq!(unsafe { dkf_filter_step(filter, x.as_ptr(), 2, mean.as_mut_ptr(), cov.as_mut_ptr()) }, DkfStatus::Ok);
        assert_eq!(mean[0], b.mean()[0]);
        assert_eq!(cov[0], b.covariance()[(0, 0)]);
    }
    let x = [0.0; 3];
    assert_eq!(unsafe { dkf_filter_step(filter, x.as_ptr(), 3, ptr::null_mut(), ptr::null_mut()) }, DkfStatus::DimensionMismatch);
    unsafe { dkf_filter_free(filter) };
}

#[test]
fn header_declares_api_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dkf.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "dkf_last_error_message",
        "dkf_dynamics_new",
        "dkf_dynamics_free",
        "dkf_step_discriminative",
        "dkf_model_load",
        "dkf_filter_step",
        "dkf_normalized_mse",
        "DKF_STATUS_OK",
        "typedef struct DkfFilter DkfFilter",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax check with a C compiler when one is installed.
    if let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).status() {
        assert!(status.success());
    }
}
