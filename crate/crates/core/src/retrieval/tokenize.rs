/// Lowercases and splits on runs of non-alphanumeric characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokenizer;

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }

    pub fn count(&self, text: &str) -> usize {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(
            Tokenizer.tokenize("Article 4 - Prohibition of slavery & FORCED labour."),
            vec!["article", "4", "prohibition", "of", "slavery", "forced", "labour"]
        );
        assert_eq!(Tokenizer.tokenize("  --  "), Vec::<String>::new());
        assert_eq!(Tokenizer.count("a_b c"), 3);
    }
}
