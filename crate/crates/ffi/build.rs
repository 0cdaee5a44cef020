fn main() {
    // Regenerate the C header whenever the surface changes; errors are
    // non-fatal so downstream builds never depend on cbindgen succeeding.
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/pareig.h"));
        }
        Err(err) => {
            println!("cargo:warning=cbindgen skipped: {err}");
        }
    }
}
