use std::path::Path;

use haptoflow::config::Config;
use haptoflow::harness::Catalog;

#[test]
fn bundled_defaults_match_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.toml");
    let mut loaded = Config::load(&path).unwrap();
    let catalog = loaded.catalog().unwrap();
    let builtin = Catalog::builtin();
    assert_eq!(catalog.iter().collect::<Vec<_>>(), builtin.iter().collect::<Vec<_>>());
    loaded.catalog.clear();
    assert_eq!(loaded, Config::default());
}

#[test]
fn empty_file_is_default() {
    assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(Config::from_toml_str("[geometry]\nplunger_radus = 10.0\n").is_err());
    assert!(Config::from_toml_str("colour = \"red\"\n").is_err());
}

#[test]
fn custom_liquid_table() {
    let c = Config::from_toml_str("[liquid]\nname = \"brine\"\ndensity = 1.2\nviscosity = 0.0012\n").unwrap();
    assert_eq!(c.liquid().density, 1.2);
    assert!(Config::from_toml_str("liquid = \"mercury\"\n").is_err());
    assert!(Config::from_toml_str("[liquid]\nname = \"x\"\ndensity = -1.0\nviscosity = 0.0\n").is_err());
}
