use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.cpp_compat = true;
    config.include_guard = Some("NPATHSIM_H".to_string());
    config.documentation = true;

    let header = cbindgen::Builder::new()
        .with_config(config)
        .with_crate(&crate_dir)
        .generate()
        .expect("cbindgen header generation failed");

    let out = PathBuf::from(env::var("OUT_DIR").unwrap()).join("npathsim.h");
    header.write_to_file(&out);
    // convenience copy next to the crate for direct consumption
    header.write_to_file(PathBuf::from(&crate_dir).join("include/npathsim.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
}
