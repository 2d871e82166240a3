//! Built-in culture lists.

/// Default global comparison set, one name per line (`#` starts a comment).
pub const GLOBAL_CULTURES_FILE: &str = include_str!("../data/global_cultures.txt");

/// Custom set that includes Japan's neighbors.
pub const NEIGHBOR_PLUS: [&str; 4] = ["China", "Republic of Korea", "United States of America", "Japan"];

/// Custom set that leaves Japan's neighbors out.
pub const NEIGHBOR_MINUS: [&str; 4] = ["Brazil", "France", "United States of America", "Japan"];

/// Parses a culture list file: one name per line, blank lines and `#` comments skipped.
pub fn parse_culture_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// The shipped global list.
pub fn global_cultures() -> Vec<String> {
    parse_culture_list(GLOBAL_CULTURES_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn global_list_has_nineteen_unique_countries() {
        let list = global_cultures();
        assert_eq!(list.len(), 19);
        assert_eq!(list.iter().collect::<HashSet<_>>().len(), 19);
        assert!(list.iter().any(|c| c == "Japan"));
        // names line up with the custom presets
        for name in NEIGHBOR_PLUS.iter().chain(NEIGHBOR_MINUS.iter()) {
            assert!(list.iter().any(|c| c == name), "{name}");
        }
    }
}
