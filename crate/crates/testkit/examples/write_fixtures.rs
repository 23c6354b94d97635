//! Writes the fixture files used in the README into a directory.
//!
//! cargo run -p depkit-testkit --example write_fixtures -- fixtures

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    std::fs::create_dir_all(&dir).expect("create fixture directory");
    let files = depkit_testkit::fixtures::write_all(dir.as_ref()).expect("write fixtures");
    println!("{files:#?}");
}
