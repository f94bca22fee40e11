//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "haptoflow.h"

int main(void) {
    HfLiquid ga;
    HfGeometry geo;
    double v = 0.0;
    if (hf_liquid_galinstan(&ga) != HF_STATUS_OK) return 10;
    if (hf_geometry_default(&geo) != HF_STATUS_OK) return 11;
    if (hf_volume_for_mass(50.0, &ga, &v) != HF_STATUS_OK) return 12;
    if (v < 7.763 || v > 7.765) return 13;

    HfDevice *dev = NULL;
    if (hf_device_new(NULL, 7, &dev) != HF_STATUS_OK) return 20;
    const char *line = "1 SET_TARGET 20.0 60.0\n";
    if (hf_device_handle_line(dev, (const uint8_t *)line, strlen(line)) != HF_STATUS_OK) return 21;
    char out[4096];
    size_t n = 0;
    if (hf_device_read_outbox(dev, out, sizeof out, &n) != HF_STATUS_OK) return 22;
    if (strncmp(out, "ACK 1\n", 6) != 0) return 23;
    for (int i = 0; i < 3000; i++) hf_device_tick(dev, 0.001);
    HfDeviceStatus st;
    hf_device_status(dev, &st);
    if (st.mode != HF_MODE_HOLDING) return 24;
    hf_device_free(dev);

    double y = 0.0;
    if (hf_volume_for_mass(-1.0, &ga, &y) != HF_STATUS_DOMAIN) return 30;
    char msg[256];
    if (hf_last_error(msg, sizeof msg, &n) != HF_STATUS_OK || n == 0) return 31;
    printf("ok\n");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests/…/target/<profile>/deps/<test-exe>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn compiler() -> Option<&'static str> {
    ["cc", "clang", "gcc"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libhaptoflow_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
