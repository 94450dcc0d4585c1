//! Problem files shipped with the binary.

use subrad_core::problem::ProblemSpec;

pub const FIXTURES: [(&str, &str); 6] = [
    ("cone_p1", include_str!("../fixtures/cone_p1.json")),
    ("cone_p2", include_str!("../fixtures/cone_p2.json")),
    ("cone_pinf", include_str!("../fixtures/cone_pinf.json")),
    ("zero_map", include_str!("../fixtures/zero_map.json")),
    ("linear_A", include_str!("../fixtures/linear_A.json")),
    ("staircase", include_str!("../fixtures/staircase.json")),
];

pub fn specs() -> Vec<(String, ProblemSpec)> {
    FIXTURES
        .iter()
        .map(|(name, text)| (name.to_string(), serde_json::from_str(text).expect("bundled fixture parses")))
        .collect()
}
