use std::collections::HashSet;

use crate::dataset::nc_token;

/// Replaces contiguous compound bigrams with single `modifier_head` tokens.
///
/// Matching is on lowercased surface forms, leftmost first, without
/// overlaps. Unmatched tokens pass through unchanged.
#[derive(Clone, Debug, Default)]
pub struct NcRewriter {
    targets: HashSet<(String, String)>,
}

impl NcRewriter {
    pub fn new<'a, I>(targets: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        NcRewriter {
            targets: targets
                .into_iter()
                .map(|(m, h)| (m.to_lowercase(), h.to_lowercase()))
                .collect(),
        }
    }

    pub fn rewrite_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        let lower: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            if i + 1 < tokens.len() && self.targets.contains(&(lower[i].clone(), lower[i + 1].clone())) {
                out.push(nc_token(&lower[i], &lower[i + 1]));
                i += 2;
            } else {
                out.push(tokens[i].as_ref().to_string());
                i += 1;
            }
        }
        out
    }

    pub fn rewrite_line(&self, line: &str) -> String {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        self.rewrite_tokens(&tokens).join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_compound() {
        let r = NcRewriter::new([("coffee", "cup")]);
        assert_eq!(r.rewrite_line("a coffee cup on the table"), "a coffee_cup on the table");
        assert_eq!(r.rewrite_line("A Coffee CUP"), "A coffee_cup");
    }

    #[test]
    fn leftmost_after_failed_match() {
        let r = NcRewriter::new([("coffee", "cup")]);
        assert_eq!(r.rewrite_line("coffee coffee cup"), "coffee coffee_cup");
    }

    #[test]
    fn overlapping_targets_take_leftmost() {
        let r = NcRewriter::new([("a", "b"), ("b", "c")]);
        assert_eq!(r.rewrite_line("a b c"), "a_b c");
        assert_eq!(r.rewrite_line("x b c"), "x b_c");
    }
}
