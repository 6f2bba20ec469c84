use serde::{Deserialize, Serialize};

/// Ordered token list shared by all n-gram and LCS metrics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        TokenSeq { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq::new(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }
}

const PUNCT: &[char] = &['(', ')', ',', ':', '+', '-', '*', '&', '|', '^', '<', '>', '='];
const MULTI: &[&str] = &["&&", "||", "+=", "*="];

/// Whitespace split, then every punctuation character in `( ) , : + - * & | ^ < > =`
/// becomes its own token, except the operators `&&`, `||`, `+=` and `*=`.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for piece in text.split_whitespace() {
        let mut word = String::new();
        let mut rest = piece;
        while let Some(c) = rest.chars().next() {
            if PUNCT.contains(&c) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                let len = match MULTI.iter().find(|op| rest.starts_with(**op)) {
                    Some(op) => op.len(),
                    None => c.len_utf8(),
                };
                tokens.push(rest[..len].to_string());
                rest = &rest[len..];
            } else {
                word.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    TokenSeq { tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<String> {
        tokenize(text).tokens().to_vec()
    }

    #[test]
    fn splits_clause_punctuation() {
        assert_eq!(toks("private(i,j)"), ["private", "(", "i", ",", "j", ")"]);
        assert_eq!(toks("reduction(+:z)"), ["reduction", "(", "+", ":", "z", ")"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn multi_char_operators_and_pragma() {
        assert_eq!(toks("#pragma omp"), ["#pragma", "omp"]);
        assert_eq!(toks("a&&b||c"), ["a", "&&", "b", "||", "c"]);
        assert_eq!(toks("s+=x*=y"), ["s", "+=", "x", "*=", "y"]);
        assert_eq!(toks("a-=b"), ["a", "-", "=", "b"]);
        assert_eq!(toks("a==b"), ["a", "=", "=", "b"]);
        assert_eq!(toks("&&&"), ["&&", "&"]);
    }

    #[test]
    fn case_sensitive() {
        assert_ne!(tokenize("Private"), tokenize("private"));
    }
}
