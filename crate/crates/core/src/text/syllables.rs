use super::TextError;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic English syllable count.
///
/// Counts maximal vowel groups over the word's alphabetic characters (`y` is a consonant
/// when it starts the word), drops a silent trailing `e`, keeps the `-le` ending after a
/// consonant as its own syllable, and never returns less than 1.
pub fn count_syllables(word: &str) -> Result<usize, TextError> {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return Err(TextError::SyllableUndefined(word.to_string()));
    }

    let mut groups = 0usize;
    let mut in_group = false;
    for (i, &c) in letters.iter().enumerate() {
        let vowel = is_vowel(c) && !(c == 'y' && i == 0);
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }

    let n = letters.len();
    if n >= 3 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le && groups > 1 {
            groups -= 1;
        }
    }
    Ok(groups.max(1))
}
