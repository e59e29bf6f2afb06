//! Compiles a small C program against the generated header and links it
//! to the cdylib built alongside these tests.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "ubss.h"

int main(void) {
    const double ratios[3] = {0.5, 2.0, 1.8};
    UbssEstimate *h = NULL;
    if (ubss_estimate_from_ratios(ratios, 3, &h) != UBSS_STATUS_OK) return 1;
    if (ubss_estimate_count(h) != 3) return 2;

    const double x1[2] = {1.0, 0.0};
    const double x2[2] = {0.5, 0.0};
    double out[6];
    if (ubss_separate(h, x1, x2, 2, 1e-6, out, 6) != UBSS_STATUS_OK) return 3;
    if (out[0] != 1.0 || out[1] != 0.0 || out[2] != 0.0) return 4;
    if (ubss_separate(h, x1, x2, 2, 1e-6, out, 5) != UBSS_STATUS_BUFFER_TOO_SMALL) return 5;
    ubss_estimate_free(h);

    const double dup[2] = {1.0, 1.0};
    if (ubss_estimate_from_ratios(dup, 2, &h) != UBSS_STATUS_DEGENERATE_PAIR) return 6;
    char msg[128];
    if (ubss_last_error_message(msg, sizeof msg) == 0) return 7;
    printf("%s: %s\n", ubss_status_name(UBSS_STATUS_DEGENERATE_PAIR), msg);
    return 0;
}
"#;

fn lib_dir() -> PathBuf {
    // target/<profile>/deps/c_smoke-* -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let libs = lib_dir();
    assert!(libs.join("libubss_ffi.so").is_file(), "cdylib not found in {}", libs.display());
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&libs)
        .arg("-lubss_ffi")
        .arg(format!("-Wl,-rpath,{}", libs.display()))
        .arg("-o")
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("degenerate pair: "), "{stdout}");
}
