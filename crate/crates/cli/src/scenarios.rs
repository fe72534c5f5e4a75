//! Bundled scenario definitions compiled into the binary.

/// Bundled scenario names in presentation order.
const NAMES: [&str; 5] = [
    "clean-single-channel",
    "qpsk-wdm",
    "qam16-wdm",
    "qam16-osnr-sweep",
    "qam16-symbolrate-sweep",
];

/// Look up a bundled scenario's TOML text by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "clean-single-channel" => Some(include_str!("../scenarios/clean-single-channel.toml")),
        "qpsk-wdm" => Some(include_str!("../scenarios/qpsk-wdm.toml")),
        "qam16-wdm" => Some(include_str!("../scenarios/qam16-wdm.toml")),
        "qam16-osnr-sweep" => Some(include_str!("../scenarios/qam16-osnr-sweep.toml")),
        "qam16-symbolrate-sweep" => Some(include_str!("../scenarios/qam16-symbolrate-sweep.toml")),
        _ => None,
    }
}

/// Names of every bundled scenario.
pub fn names() -> Vec<&'static str> {
    NAMES.to_vec()
}
