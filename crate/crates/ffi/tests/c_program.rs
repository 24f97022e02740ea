//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is available.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "challenge_dp.h"

int main(void) {
    CdpCounter *c = NULL;
    if (cdp_counter_new(32, 1.0, 1, true, &c) != CDP_STATUS_OK) return 1;
    uint64_t est = 0;
    for (int i = 0; i < 32; i++) {
        if (cdp_counter_feed(c, i % 2, &est) != CDP_STATUS_OK) return 2;
    }
    cdp_counter_free(c);
    if (est != 16) return 3;

    CdpClass *h = NULL;
    if (cdp_class_thresholds(7, &h) != CDP_STATUS_OK) return 4;
    uint32_t d = 0;
    cdp_class_ldim(h, &d);
    cdp_class_free(h);

    if (cdp_counter_new(8, -1.0, 1, false, &c) != CDP_STATUS_INVALID_PARAMETER) return 5;
    printf("%llu %u %s\n", (unsigned long long)est, d, cdp_last_error_message() ? "err" : "none");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests/../../../target/<profile>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have(tool: &str) -> bool {
    Command::new(tool)
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("skipping: no C compiler");
        return;
    }
    let lib = target_dir().join("libchallenge_dp_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = dir.join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "16 3 err");
}
