use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use invtori_ffi::*;

fn last_error() -> String {
    let p = invtori_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_fixture(name: &str) -> *mut InvtoriFixture {
    let name = CString::new(name).unwrap();
    let mut fx = ptr::null_mut();
    assert_eq!(unsafe { invtori_fixture_new(name.as_ptr(), &mut fx) }, InvtoriStatus::Ok);
    fx
}

#[test]
fn fixture_embed_and_flow() {
    let fx = new_fixture("prop-p1-torus");
    unsafe {
        assert_eq!(invtori_fixture_dim(fx), 3);
        assert_eq!(invtori_fixture_param_dim(fx), 3);
        let theta = [0.1, 0.2, 0.125];
        let mut x = [0.0; 6];
        assert_eq!(invtori_fixture_embed(fx, theta.as_ptr(), 3, x.as_mut_ptr(), 6), InvtoriStatus::Ok);
        let c = (std::f64::consts::TAU * 0.125).cos();
        assert!((x[3] - c).abs() < 1e-15);
        let mut v = [0.0; 6];
        assert_eq!(invtori_fixture_vector_field(fx, x.as_ptr(), 6, v.as_mut_ptr(), 6), InvtoriStatus::Ok);
        assert_eq!(&v[..3], &x[3..]);
        let mut y = [0.0; 6];
        assert_eq!(invtori_fixture_flow(fx, x.as_ptr(), 6, 2.0, 0.0, y.as_mut_ptr(), 6), InvtoriStatus::Ok);
        assert!((y[0] - (x[0] + 2.0 * x[3])).abs() < 1e-12);
        invtori_fixture_free(fx);
    }
}

#[test]
fn errors_are_reported_per_thread() {
    let name = CString::new("no-such-fixture").unwrap();
    let mut fx = ptr::null_mut();
    assert_eq!(unsafe { invtori_fixture_new(name.as_ptr(), &mut fx) }, InvtoriStatus::UnknownName);
    assert!(fx.is_null());
    assert!(last_error().contains("no-such-fixture"));
    std::thread::spawn(|| assert!(invtori_last_error().is_null())).join().unwrap();

    let fx = new_fixture("herman");
    assert!(invtori_last_error().is_null());
    let mut out = [0.0; 4];
    let st = unsafe { invtori_fixture_vector_field(fx, ptr::null(), 4, out.as_mut_ptr(), 4) };
    assert_eq!(st, InvtoriStatus::NullPointer);
    let x = [0.0; 3];
    let st = unsafe { invtori_fixture_vector_field(fx, x.as_ptr(), 3, out.as_mut_ptr(), 4) };
    assert_eq!(st, InvtoriStatus::InvalidArgument);
    assert!(last_error().contains("needs 4"));
    unsafe { invtori_fixture_free(fx) };
    unsafe { invtori_fixture_free(ptr::null_mut()) };
    assert_eq!(unsafe { invtori_fixture_dim(ptr::null()) }, 0);
}

#[test]
fn extension_translation_shifts_q() {
    let name = CString::new("translation(0.1,-0.2)").unwrap();
    let mut ext = ptr::null_mut();
    unsafe {
        assert_eq!(invtori_extension_new(name.as_ptr(), 2, &mut ext), InvtoriStatus::Ok);
        assert_eq!(invtori_extension_dim(ext), 2);
        let x = [0.3, 0.4, 0.2, -0.1];
        let mut y = [0.0; 4];
        assert_eq!(invtori_extension_apply(ext, x.as_ptr(), 4, y.as_mut_ptr(), 4), InvtoriStatus::Ok);
        let want = [0.4, 0.2, 0.2, -0.1];
        for (a, b) in y.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{y:?}");
        }
        invtori_extension_free(ext);
    }
    let far = CString::new("sine-0.5").unwrap();
    let mut ext = ptr::null_mut();
    assert_eq!(unsafe { invtori_extension_new(far.as_ptr(), 2, &mut ext) }, InvtoriStatus::Numerical);
    assert!(last_error().contains("too far"));
}

#[test]
fn homology_classification() {
    let (mut class, mut growth, mut angle) = (InvtoriOrbitClass::FiniteOrbit, 0.0, 0.0);
    let a = [2i64, 1, 1, 1];
    let v = [1i64, 0];
    let st = unsafe { invtori_homology_classify(a.as_ptr(), v.as_ptr(), 40, &mut class, &mut growth, &mut angle) };
    assert_eq!(st, InvtoriStatus::Ok);
    assert_eq!(class, InvtoriOrbitClass::HyperbolicGrowth);
    assert!((growth / 2.618_033_988_749_895 - 1.0).abs() < 0.01);
    let bad = [2i64, 0, 0, 1];
    let st = unsafe { invtori_homology_classify(bad.as_ptr(), v.as_ptr(), 5, &mut class, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, InvtoriStatus::NotUnimodular);
    let r = [0i64, -1, 1, 0];
    let st = unsafe { invtori_homology_classify(r.as_ptr(), v.as_ptr(), 8, &mut class, &mut growth, ptr::null_mut()) };
    assert_eq!(st, InvtoriStatus::Ok);
    assert_eq!(class, InvtoriOrbitClass::FiniteOrbit);
    assert!(growth.is_nan());
}

#[test]
fn run_config_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        "[run]\noperation = \"homology\"\noutput_dir = {:?}\n",
        dir.path().to_str().unwrap()
    );
    let toml = CString::new(toml).unwrap();
    let mut passed = false;
    assert_eq!(unsafe { invtori_run_config(toml.as_ptr(), &mut passed) }, InvtoriStatus::Ok);
    assert!(passed);
    assert!(dir.path().join("summary.json").exists());
    let bad = CString::new("[run]\noperation = 3").unwrap();
    assert_eq!(unsafe { invtori_run_config(bad.as_ptr(), &mut passed) }, InvtoriStatus::Config);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(invtori_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn compiler_accepts(compiler: &str, args: &[&str], source: &Path) -> Option<bool> {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(compiler)
        .args(args)
        .arg("-I")
        .arg(&include)
        .arg(source)
        .output()
        .ok()?;
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    Some(out.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/invtori.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "invtori_last_error",
        "invtori_fixture_new",
        "invtori_fixture_flow",
        "invtori_extension_apply",
        "invtori_homology_classify",
        "invtori_run_config",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"invtori.h\"\n\
         int probe(void) {\n\
           InvtoriFixture *fx = 0;\n\
           double x[6] = {0}, y[6];\n\
           if (invtori_fixture_new(\"herman\", &fx) != INVTORI_STATUS_OK) return 1;\n\
           invtori_fixture_flow(fx, x, 6, 1.0, 0.0, y, 6);\n\
           invtori_fixture_free(fx);\n\
           return invtori_last_error() != 0;\n\
         }\n",
    )
    .unwrap();
    let cpp = dir.path().join("use.cpp");
    std::fs::copy(&src, &cpp).unwrap();
    match compiler_accepts("cc", &["-std=c99", "-Wall", "-Werror", "-fsyntax-only"], &src) {
        Some(ok) => assert!(ok, "C compile failed"),
        None => eprintln!("no C compiler; skipped"),
    }
    if let Some(ok) = compiler_accepts("c++", &["-Wall", "-Werror", "-fsyntax-only"], &cpp) {
        assert!(ok, "C++ compile failed");
    }
}

#[test]
fn c_program_links_and_runs() {
    // The test binary lives in target/<profile>/deps, next to the archive.
    let exe = std::env::current_exe().unwrap();
    let archive = exe.parent().and_then(Path::parent).unwrap().join("libinvtori_ffi.a");
    if !archive.exists() {
        eprintln!("{} not built; skipped", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        "#include <stdio.h>\n#include \"invtori.h\"\n\
         int main(void) {\n\
           InvtoriFixture *fx = 0;\n\
           double th[3] = {0.1, 0.2, 0.0}, x[6], y[6];\n\
           if (invtori_fixture_new(\"prop-p1-torus\", &fx) != INVTORI_STATUS_OK) return 1;\n\
           invtori_fixture_embed(fx, th, 3, x, 6);\n\
           if (invtori_fixture_flow(fx, x, 6, 1.0, 0.0, y, 6) != INVTORI_STATUS_OK) return 2;\n\
           invtori_fixture_free(fx);\n\
           printf(\"%.12f %.12f\\n\", y[0], y[1]);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let bin = dir.path().join("main");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let Ok(status) = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&archive)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.100000000000 0.200000000000");
}
