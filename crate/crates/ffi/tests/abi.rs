use std::ffi::{CStr, CString};
use std::ptr;

use fockrbm_ffi::*;

const MODEL: FockrbmModel = FockrbmModel {
    g0: 0.2,
    gamma: 0.4,
    kappa: 0.04,
    detuning: 0.0,
};

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        fockrbm_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(fockrbm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn steady_state_matches_the_library() {
    unsafe {
        let mut ss = ptr::null_mut();
        assert_eq!(
            fockrbm_steady_state_solve(&MODEL, 14, &mut ss),
            FockrbmStatus::Ok
        );
        let (mut n, mut up, mut down) = (0.0, 0.0, 0.0);
        assert_eq!(
            fockrbm_steady_state_observables(ss, &mut n, &mut up, &mut down),
            FockrbmStatus::Ok
        );
        let m = fockrbm::model::ModelParams::new(0.2, 0.4, 0.04, 0.0).unwrap();
        let r = fockrbm::exact::projector_steady_state(&m, 14).unwrap();
        assert_eq!(n, fockrbm::exact::observable_n(&r.rho));
        assert!((up + down - 1.0).abs() < 1e-12);

        let mut needed = 0;
        assert_eq!(
            fockrbm_steady_state_populations(ss, ptr::null_mut(), 0, &mut needed),
            FockrbmStatus::BufferTooSmall
        );
        assert_eq!(needed, 14);
        let mut p = vec![0.0; needed];
        assert_eq!(
            fockrbm_steady_state_populations(ss, p.as_mut_ptr(), p.len(), &mut needed),
            FockrbmStatus::Ok
        );
        let mean: f64 = p.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        assert!((mean - n).abs() < 1e-10);
        fockrbm_steady_state_free(ss);
    }
}

#[test]
fn bad_arguments_report_status_and_message() {
    unsafe {
        let mut ss = ptr::null_mut();
        let bad = FockrbmModel {
            kappa: -1.0,
            ..MODEL
        };
        assert_eq!(
            fockrbm_steady_state_solve(&bad, 14, &mut ss),
            FockrbmStatus::InvalidArgument
        );
        assert!(ss.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            fockrbm_steady_state_solve(ptr::null(), 14, &mut ss),
            FockrbmStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let mut p = ptr::null_mut();
        assert_eq!(
            fockrbm_params_new(1, 0, 1, 1, 0, &mut p),
            FockrbmStatus::InvalidArgument
        );
        let missing = CString::new("/nonexistent/dir/x.ckpt").unwrap();
        assert_eq!(
            fockrbm_params_load(missing.as_ptr(), &mut p),
            FockrbmStatus::Io
        );

        // freeing null is a no-op
        fockrbm_params_free(ptr::null_mut());
        fockrbm_trainer_free(ptr::null_mut());
        fockrbm_steady_state_free(ptr::null_mut());
    }
}

#[test]
fn last_error_reports_required_length_and_truncates() {
    unsafe {
        let mut ss = ptr::null_mut();
        fockrbm_steady_state_solve(ptr::null(), 14, &mut ss);
        let need = fockrbm_last_error(ptr::null_mut(), 0);
        let full = last_error();
        assert_eq!(need, full.len() + 1);
        let mut small = [0x7f as std::ffi::c_char; 4];
        fockrbm_last_error(small.as_mut_ptr(), small.len());
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_str().unwrap(), &full[..3]);
    }
}

#[test]
fn params_round_trip_through_file_and_flat_vector() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(fockrbm_params_new(1, 2, 1, 1, 7, &mut p), FockrbmStatus::Ok);
        let count = fockrbm_params_count(p);
        // 2·3 + 2 + 1 + 2·3 + 2·3
        assert_eq!(count, 21);
        let mut v = vec![0.0; count];
        assert_eq!(
            fockrbm_params_get(p, v.as_mut_ptr(), count),
            FockrbmStatus::Ok
        );
        assert_eq!(
            fockrbm_params_get(p, v.as_mut_ptr(), count - 1),
            FockrbmStatus::BufferTooSmall
        );
        assert_eq!(
            fockrbm_params_set(p, v.as_ptr(), count - 1),
            FockrbmStatus::InvalidArgument
        );

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("p.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(
            fockrbm_params_save(p, path.as_ptr(), 7, 0),
            FockrbmStatus::Ok
        );
        let mut q = ptr::null_mut();
        assert_eq!(
            fockrbm_params_load(path.as_ptr(), &mut q),
            FockrbmStatus::Ok
        );
        let mut w = vec![0.0; count];
        fockrbm_params_get(q, w.as_mut_ptr(), count);
        assert_eq!(v, w);

        let spins = [1i8];
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(
            fockrbm_params_log_rho(p, spins.as_ptr(), 2, spins.as_ptr(), 2, &mut re, &mut im),
            FockrbmStatus::Ok
        );
        let (mut re2, mut im2) = (0.0, 0.0);
        fockrbm_params_log_rho(q, spins.as_ptr(), 2, spins.as_ptr(), 2, &mut re2, &mut im2);
        assert_eq!((re, im), (re2, im2));
        // diagonal entries are real
        assert!(im.abs() < 1e-12);
        // occupation 4 does not fit in two bits
        assert_eq!(
            fockrbm_params_log_rho(p, spins.as_ptr(), 4, spins.as_ptr(), 0, &mut re, &mut im),
            FockrbmStatus::InvalidArgument
        );
        let bad = [0i8];
        assert_eq!(
            fockrbm_params_log_rho(p, bad.as_ptr(), 0, spins.as_ptr(), 0, &mut re, &mut im),
            FockrbmStatus::InvalidArgument
        );
        fockrbm_params_free(p);
        fockrbm_params_free(q);
    }
}

#[test]
fn trainer_steps_deterministically() {
    let cfg = FockrbmTrainConfig {
        model: MODEL,
        n_spins: 1,
        n_bits: 2,
        n_hidden: 1,
        n_mixing: 1,
        learning_rate: 0.05,
        n_samples: 200,
        max_iters: 10,
        n_chains: 4,
        seed: 3,
        enumerate: 0,
    };
    let run = || unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(fockrbm_trainer_new(&cfg, &mut t), FockrbmStatus::Ok);
        let mut recs = Vec::new();
        for _ in 0..5 {
            let mut r = FockrbmIterationRecord::default();
            assert_eq!(fockrbm_trainer_step(t, &mut r), FockrbmStatus::Ok);
            recs.push((r.iteration, r.cost, r.n_mean));
        }
        assert_eq!(fockrbm_trainer_iteration(t), 5);
        let mut p = ptr::null_mut();
        assert_eq!(fockrbm_trainer_params(t, &mut p), FockrbmStatus::Ok);
        assert!(fockrbm_params_count(p) > 0);
        fockrbm_params_free(p);
        fockrbm_trainer_free(t);
        recs
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|r| r.1.is_finite() && r.1 >= 0.0));

    let bad = FockrbmTrainConfig {
        enumerate: 1,
        n_bits: 4,
        ..cfg
    };
    let mut t = ptr::null_mut();
    assert_eq!(
        unsafe { fockrbm_trainer_new(&bad, &mut t) },
        FockrbmStatus::InvalidArgument
    );
}

#[test]
fn header_declares_every_entry_point() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fockrbm.h")).unwrap();
    for sym in [
        "fockrbm_last_error",
        "fockrbm_version",
        "fockrbm_steady_state_solve",
        "fockrbm_steady_state_populations",
        "fockrbm_params_log_rho",
        "fockrbm_trainer_step",
        "FOCKRBM_STATUS_NULL_POINTER",
        "typedef struct FockrbmTrainer FockrbmTrainer",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
