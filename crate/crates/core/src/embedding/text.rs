use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// NFC-normalize, trim, and collapse internal whitespace runs to one space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Content key of a text: SHA-256 over the UTF-8 bytes of [`normalize_text`].
pub fn content_key(text: &str) -> [u8; 32] {
    Sha256::digest(normalize_text(text).as_bytes()).into()
}

/// Lowercased alphanumeric tokens of an NFC-normalized string.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.nfc().collect::<String>().to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("I feel fine."), vec!["i", "feel", "fine"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("patient-doctor, yes"), vec!["patient", "doctor", "yes"]);
        assert_eq!(tokenize("  Cafe\u{0301}!!"), vec!["caf\u{e9}"]);
    }

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(normalize_text(" abc "), "abc");
        assert_eq!(normalize_text("a \t\n b"), "a b");
        assert_eq!(content_key(" abc "), content_key("abc"));
        // composed and decomposed forms share a key
        assert_eq!(content_key("e\u{0301}"), content_key("\u{00e9}"));
    }

    #[test]
    fn golden_keys() {
        assert_eq!(
            hex::encode(content_key("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            hex::encode(content_key("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
